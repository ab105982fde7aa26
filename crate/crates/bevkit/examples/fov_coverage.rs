//! Field-of-view coverage of a mixed rig: two forward stereo pinholes
//! plus two side fisheyes, before and after rectification into six
//! pinhole views.
//!
//! ```bash
//! cargo run --example fov_coverage
//! ```

use bevkit::camera::MeiCamera;
use bevkit::geometry::{Pose, Quaternion};
use bevkit::rectify::{fov_coverage, make_virtual_cameras};
use nalgebra::Vector3;
use std::f64::consts::{FRAC_PI_2, PI};

fn forward_rotation() -> Quaternion {
    Quaternion::new(0.5, -0.5, 0.5, -0.5)
}

fn side_rotation(left: bool) -> Quaternion {
    let tilt = Quaternion::from_axis_angle(Vector3::x(), -FRAC_PI_2);
    if left {
        tilt
    } else {
        Quaternion::from_axis_angle(Vector3::z(), PI).multiply(tilt)
    }
}

fn print_coverage(label: &str, cameras: &[(MeiCamera, Pose)], bins: usize) -> bevkit::Result<()> {
    let report = fov_coverage(cameras, bins)?;
    let covered = (0..bins).filter(|&b| report.covered(b)).count();
    let strip: String = (0..bins)
        .map(|b| if report.covered(b) { '#' } else { '.' })
        .collect();
    println!("{label:<28} {covered:>3}/{bins} bins  [{strip}]");
    Ok(())
}

fn main() -> bevkit::Result<()> {
    let pinhole = MeiCamera::pinhole(552.554, 552.554, 704.0, 188.0, 1408, 376);
    let fisheye = MeiCamera {
        xi: 2.2134,
        k1: 0.0168,
        k2: 1.6548,
        fx: 1336.3,
        fy: 1335.8,
        cx: 716.94,
        cy: 705.76,
        width: 1400,
        height: 1400,
        crop_u0: 0.0,
        crop_v0: 0.0,
    };

    let stereo = vec![
        (
            pinhole.clone(),
            Pose::new(forward_rotation(), Vector3::new(1.6, 0.3, 1.55)),
        ),
        (
            pinhole.clone(),
            Pose::new(forward_rotation(), Vector3::new(1.6, -0.3, 1.55)),
        ),
    ];
    let fish_left = Pose::new(side_rotation(true), Vector3::new(0.8, 0.8, 1.4));
    let fish_right = Pose::new(side_rotation(false), Vector3::new(0.8, -0.8, 1.4));

    let bins = 72;
    println!("azimuth coverage, 0\u{b0} = straight ahead, 5\u{b0} bins:\n");

    print_coverage("stereo pinholes only", &stereo, bins)?;

    let mut original = stereo.clone();
    original.push((fisheye.clone(), fish_left));
    original.push((fisheye.clone(), fish_right));
    print_coverage("stereo + two 180\u{b0} fisheyes", &original, bins)?;

    // Rectified rig: each fisheye becomes two virtual pinholes.
    let mut rectified = stereo;
    for fish_pose in [fish_left, fish_right] {
        for vp in make_virtual_cameras(552.554, 704, 376) {
            rectified.push((vp.as_mei(), vp.ego_pose(&fish_pose)));
        }
    }
    print_coverage("rectified 6-pinhole rig", &rectified, bins)?;

    println!("\nper-camera detail for the rectified rig:");
    let report = fov_coverage(&rectified, bins)?;
    let names = [
        "stereo_left",
        "stereo_right",
        "left_forward",
        "left_backward",
        "right_forward",
        "right_backward",
    ];
    for (c, name) in names.iter().enumerate() {
        let strip: String = (0..bins)
            .map(|b| if report.seen[b][c] { '#' } else { '.' })
            .collect();
        println!("  {name:<16} [{strip}]");
    }
    Ok(())
}
