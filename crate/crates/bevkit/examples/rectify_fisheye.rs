//! Rectification: synthesize forward/backward virtual pinhole views from
//! a fisheye camera, build remap tables, and resample a synthetic image.
//!
//! ```bash
//! cargo run --release --example rectify_fisheye
//! ```

use bevkit::camera::MeiCamera;
use bevkit::rectify::{build_remap, make_virtual_cameras};

fn main() -> bevkit::Result<()> {
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

    let virtuals = make_virtual_cameras(552.554, 704, 376);
    for (vp, label) in virtuals.iter().zip(["forward", "backward"]) {
        println!(
            "{label:>8}: yaw {:+.0}\u{b0} pitch {:+.0}\u{b0}, {}x{} @ f={:.3}",
            vp.yaw_deg, vp.pitch_deg, vp.width, vp.height, vp.fx
        );
        let table = build_remap(&fisheye, vp);
        let total = table.entries.len();
        let valid = table.valid_count();
        println!(
            "          remap: {valid}/{total} target pixels covered ({:.1}%)",
            100.0 * valid as f64 / total as f64
        );

        // Resample a checkerboard rendered in the fisheye image.
        let src: Vec<f32> = (0..fisheye.height * fisheye.width)
            .map(|i| {
                let (u, v) = (i % fisheye.width, i / fisheye.width);
                if (u / 64 + v / 64) % 2 == 0 {
                    1.0
                } else {
                    0.0
                }
            })
            .collect();
        let out = table.apply_f32(&src, fisheye.width, fisheye.height);
        let mean = out.iter().sum::<f32>() / out.len() as f32;
        println!("          resampled checkerboard mean intensity: {mean:.3}");

        // The table round-trips: valid source coordinates re-project onto
        // their target pixel through the virtual camera.
        let vmei = vp.as_mei();
        let inv = vp.mount.rotation.inverse();
        let mut worst = 0.0f64;
        for v in (0..vp.height).step_by(16) {
            for u in (0..vp.width).step_by(16) {
                if let Some((us, vs)) = table.entry(u, v) {
                    let ray = fisheye.unproject(us, vs)?;
                    let p = vmei.project(inv.rotate(ray))?;
                    worst = worst
                        .max((p.pixel.0 - f64::from(u)).abs())
                        .max((p.pixel.1 - f64::from(v)).abs());
                }
            }
        }
        println!("          worst round-trip error on a 16 px grid: {worst:.2e} px");
    }
    Ok(())
}
