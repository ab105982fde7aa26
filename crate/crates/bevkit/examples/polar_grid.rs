//! Polar BEV parameterization: wrap-safe encodings, uniform anchors and
//! angular-radial binning.
//!
//! ```bash
//! cargo run --example polar_grid
//! ```

use bevkit::geometry::cart_to_cyl;
use bevkit::polar::{bin_index, encode_polar, polar_anchor_grid, PolarGrid};
use nalgebra::Vector3;
use std::f64::consts::TAU;

fn main() -> bevkit::Result<()> {
    let grid = PolarGrid {
        rho_max: 51.2,
        n_theta: 16,
        n_rho: 8,
        z_min: -5.0,
        z_max: 3.0,
    };
    grid.validate()?;

    println!("encodings [sin t, cos t, rho_norm, z_norm]:");
    for p in [
        Vector3::new(51.2, 0.0, -5.0),
        Vector3::new(0.0, -10.0, 0.0),
        Vector3::new(-20.0, 20.0, 2.0),
    ] {
        let e = encode_polar(p, &grid)?;
        println!(
            "  ({:>6.1}, {:>6.1}, {:>5.1}) -> [{:+.4}, {:+.4}, {:.4}, {:.4}]{}",
            p.x,
            p.y,
            p.z,
            e.sin_theta,
            e.cos_theta,
            e.rho_norm,
            e.z_norm,
            if e.clamped { "  (clamped)" } else { "" }
        );
    }

    println!("\nwrap-around continuity at the 0/2\u{3c0} boundary:");
    for eps in [1e-3, 1e-6, 1e-9] {
        let a = encode_polar(
            Vector3::new(30.0 * f64::cos(eps), 30.0 * f64::sin(eps), 0.0),
            &grid,
        )?
        .to_array();
        let b = encode_polar(
            Vector3::new(30.0 * (TAU - eps).cos(), 30.0 * (TAU - eps).sin(), 0.0),
            &grid,
        )?
        .to_array();
        let gap = a
            .iter()
            .zip(&b)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
        println!("  eps = {eps:>5.0e}: encoding gap {gap:.3e}");
    }

    let anchors = polar_anchor_grid(&grid, 4);
    println!(
        "\n{} anchors on {} beams ({} per beam); first beam:",
        anchors.len(),
        grid.n_theta,
        4
    );
    for a in &anchors[..4] {
        println!(
            "  rho {:>6.2} m  theta {:>7.4} rad  z {:>4.1} m",
            a.rho, a.theta, a.z
        );
    }

    println!("\nbinning a ring of points at rho = 20 m:");
    let mut histogram = vec![0usize; grid.n_theta];
    for i in 0..1_000 {
        let theta = TAU * i as f64 / 1_000.0;
        let p = cart_to_cyl(Vector3::new(20.0 * theta.cos(), 20.0 * theta.sin(), 0.0));
        if let Some((ti, _)) = bin_index(&p, &grid) {
            histogram[ti] += 1;
        }
    }
    println!("  per-angular-bin counts: {histogram:?}");
    Ok(())
}
