//! Forward projection path: lift per-pixel features along distortion-aware
//! rays into an ego-frame cloud, then sum-pool into polar and Cartesian
//! BEV grids. Also shows reference-point projection (backward path) and
//! position-encoding inputs (projection-free path).
//!
//! ```bash
//! cargo run --release --example lift_splat
//! ```

use bevkit::camera::MeiCamera;
use bevkit::geometry::{Pose, Quaternion};
use bevkit::polar::{CartesianGrid, PolarGrid};
use bevkit::view::{
    lift_frustum, petr_pe_inputs, project_reference_points, splat, FeatureGrid, PeMode,
};
use bevkit::BevGrid;
use nalgebra::Vector3;
use std::f64::consts::FRAC_PI_2;

fn main() -> bevkit::Result<()> {
    let cam = MeiCamera {
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
    // Left-mounted: optical axis along ego +y.
    let pose = Pose::new(
        Quaternion::from_axis_angle(Vector3::x(), -FRAC_PI_2),
        Vector3::new(0.8, 0.8, 1.4),
    );

    let stride = 32;
    let depths: Vec<f64> = (0..16).map(|i| 1.0 + 4.0 * f64::from(i)).collect();
    let rays = bevkit::camera::generate_ray_grid(&cam, stride, &depths)?;
    let features = FeatureGrid::ones(rays.n_u, rays.n_v, 1);
    let cloud = lift_frustum(&cam, &pose, stride, &depths, &features, 0)?;
    println!(
        "lifted {} of {} (pixel, depth) samples into the ego frame",
        cloud.len(),
        rays.points.len()
    );

    let polar = BevGrid::Polar(PolarGrid {
        rho_max: 51.2,
        n_theta: 16,
        n_rho: 8,
        z_min: -5.0,
        z_max: 3.0,
    });
    let cartesian = BevGrid::Cartesian(CartesianGrid {
        x_min: -51.2,
        x_max: 51.2,
        y_min: -51.2,
        y_max: 51.2,
        n_x: 16,
        n_y: 16,
        z_min: -5.0,
        z_max: 3.0,
    });
    for (grid, label) in [(polar, "polar"), (cartesian, "cartesian")] {
        let map = splat(&cloud, &grid)?;
        let occupied = (0..map.n_bins()).filter(|&b| map.at(0, b) > 0.0).count();
        println!(
            "{label:>10} splat: {} of {} bins occupied, mass {:.0}",
            occupied,
            map.n_bins(),
            map.channel_sum(0)
        );
    }

    // Backward path: project BEV query points back into the camera.
    let queries: Vec<Vector3<f64>> = vec![
        Vector3::new(0.8, 10.0, 0.0),
        Vector3::new(5.0, 5.0, 0.5),
        Vector3::new(-3.0, 8.0, 1.0),
        Vector3::new(0.8, -10.0, 0.0), // behind this camera
    ];
    println!("\nreference-point projection (backward path):");
    for (q, r) in queries
        .iter()
        .zip(project_reference_points(&queries, &cam, &pose))
    {
        println!(
            "  ego ({:>5.1}, {:>5.1}, {:>4.1}) -> ({:>8.2}, {:>8.2}) valid={}",
            q.x, q.y, q.z, r.u, r.v, r.valid
        );
    }

    // Projection-free path: PE inputs in both parameterizations.
    let grid = BevGrid::Polar(PolarGrid {
        rho_max: 51.2,
        n_theta: 16,
        n_rho: 8,
        z_min: -5.0,
        z_max: 3.0,
    });
    for mode in [PeMode::Cartesian, PeMode::Polar] {
        let pe = petr_pe_inputs(&cam, &pose, stride, &depths, &grid, mode)?;
        let valid = pe.valid.iter().filter(|&&v| v).count();
        let first = (0..pe.valid.len()).find(|&i| pe.valid[i]).unwrap();
        println!(
            "PE inputs {:?}: {} valid samples, encoding[first] = {:?}",
            mode,
            valid,
            pe.encoding(first)
        );
    }
    Ok(())
}
