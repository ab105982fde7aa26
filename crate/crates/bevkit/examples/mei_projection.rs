//! Unified camera model in action: forward projection, iterative
//! unprojection, pinhole reduction, and what distortion does to rays.
//!
//! ```bash
//! cargo run --example mei_projection
//! ```

use bevkit::camera::MeiCamera;
use nalgebra::Vector3;

fn main() -> bevkit::Result<()> {
    // A strongly distorted fisheye (values in the range of real 180-degree
    // lenses) and its pinhole reduction.
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
    let pinhole = MeiCamera::pinhole(552.554, 552.554, 704.0, 188.0, 1408, 376);

    println!("forward projection of points at increasing incidence angle:");
    println!("{:>8} {:>24} {:>12}", "angle", "fisheye pixel", "radius px");
    for deg in [0.0, 20.0, 45.0, 70.0, 88.0] {
        let phi = f64::to_radians(deg);
        let p = Vector3::new(phi.sin(), 0.0, phi.cos()) * 10.0;
        let r = fisheye.project(p)?;
        let radius = (r.pixel.0 - fisheye.cx).hypot(r.pixel.1 - fisheye.cy);
        println!(
            "{deg:>7}\u{b0} ({:>10.3}, {:>9.3}) {radius:>12.3}",
            r.pixel.0, r.pixel.1
        );
    }

    println!("\npinhole reduction (xi = 0, k = 0) matches the closed form:");
    let p = Vector3::new(3.0, -1.0, 12.0);
    let got = pinhole.project(p)?;
    let want = (
        pinhole.fx * p.x / p.z + pinhole.cx,
        pinhole.fy * p.y / p.z + pinhole.cy,
    );
    println!("  project {:?} -> {:?}", [p.x, p.y, p.z], got.pixel);
    println!("  closed form        -> {want:?}");

    println!("\nround trip through the iterative undistortion:");
    for pixel in [(716.94, 705.76), (1000.0, 800.0), (400.0, 300.0)] {
        let ray = fisheye.unproject(pixel.0, pixel.1)?;
        let back = fisheye.project(ray * 25.0)?;
        println!(
            "  pixel {:?} -> ray [{:+.4}, {:+.4}, {:+.4}] -> pixel ({:.9}, {:.9})",
            pixel, ray.x, ray.y, ray.z, back.pixel.0, back.pixel.1
        );
    }

    println!("\nhow far fisheye rays bend away from straight pinhole rays:");
    for offset in [100.0, 300.0, 500.0] {
        let u = fisheye.cx + offset;
        let ray = fisheye.unproject(u, fisheye.cy)?;
        let straight = Vector3::new((u - fisheye.cx) / fisheye.fx, 0.0, 1.0).normalize();
        let angle = ray.dot(&straight).clamp(-1.0, 1.0).acos();
        println!(
            "  {offset:>5.0} px off-center: {:>7.3}\u{b0} of bending",
            angle.to_degrees()
        );
    }
    Ok(())
}
