//! Polar/cylindrical BEV parameterization.
//!
//! A polar grid partitions the disc `[0, rho_max) x [0, 2π)` into
//! `n_theta x n_rho` angular-radial bins with no gaps or overlaps. Point
//! encodings use `[sin θ, cos θ, ρ/ρ_max, z_norm]` so embeddings stay
//! continuous across the θ = 0/2π wrap.

use crate::error::{Error, Result};
use crate::geometry::{cart_to_cyl, CylindricalPoint};
use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

/// Angular-radial BEV grid with a vertical slab `[z_min, z_max)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolarGrid {
    /// Maximum detection range in meters; radial bins span `[0, rho_max)`.
    pub rho_max: f64,
    pub n_theta: usize,
    pub n_rho: usize,
    pub z_min: f64,
    pub z_max: f64,
}

/// Axis-aligned Cartesian BEV grid with a vertical slab `[z_min, z_max)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CartesianGrid {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub n_x: usize,
    pub n_y: usize,
    pub z_min: f64,
    pub z_max: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum BevGrid {
    Polar(PolarGrid),
    Cartesian(CartesianGrid),
}

impl PolarGrid {
    pub fn validate(&self) -> Result<()> {
        if self.n_theta < 4 {
            return Err(Error::BadGrid(format!(
                "n_theta must be >= 4 (got {})",
                self.n_theta
            )));
        }
        if self.n_rho < 1 {
            return Err(Error::BadGrid("n_rho must be >= 1".into()));
        }
        if self.rho_max <= 0.0 || self.rho_max.is_nan() {
            return Err(Error::BadGrid(format!(
                "rho_max must be > 0 (got {})",
                self.rho_max
            )));
        }
        if self.z_max <= self.z_min || self.z_max.is_nan() || self.z_min.is_nan() {
            return Err(Error::BadGrid(format!(
                "z slab is empty: [{}, {})",
                self.z_min, self.z_max
            )));
        }
        Ok(())
    }

    pub fn theta_bin_width(&self) -> f64 {
        TAU / self.n_theta as f64
    }

    pub fn rho_bin_width(&self) -> f64 {
        self.rho_max / self.n_rho as f64
    }

    pub fn n_bins(&self) -> usize {
        self.n_theta * self.n_rho
    }
}

impl CartesianGrid {
    pub fn validate(&self) -> Result<()> {
        let xy_ok = self.x_max > self.x_min && self.y_max > self.y_min;
        if !xy_ok {
            return Err(Error::BadGrid("x/y ranges are empty".into()));
        }
        if self.n_x < 1 || self.n_y < 1 {
            return Err(Error::BadGrid("bin counts must be >= 1".into()));
        }
        if self.z_max <= self.z_min || self.z_max.is_nan() || self.z_min.is_nan() {
            return Err(Error::BadGrid(format!(
                "z slab is empty: [{}, {})",
                self.z_min, self.z_max
            )));
        }
        Ok(())
    }

    pub fn n_bins(&self) -> usize {
        self.n_x * self.n_y
    }
}

impl BevGrid {
    pub fn validate(&self) -> Result<()> {
        match self {
            BevGrid::Polar(g) => g.validate(),
            BevGrid::Cartesian(g) => g.validate(),
        }
    }

    pub fn n_bins(&self) -> usize {
        match self {
            BevGrid::Polar(g) => g.n_bins(),
            BevGrid::Cartesian(g) => g.n_bins(),
        }
    }

    pub fn z_slab(&self) -> (f64, f64) {
        match self {
            BevGrid::Polar(g) => (g.z_min, g.z_max),
            BevGrid::Cartesian(g) => (g.z_min, g.z_max),
        }
    }

    pub fn as_polar(&self) -> Result<&PolarGrid> {
        match self {
            BevGrid::Polar(g) => Ok(g),
            BevGrid::Cartesian(_) => Err(Error::NotPolar),
        }
    }
}

/// Normalized polar point encoding `[sin θ, cos θ, ρ_norm, z_norm]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolarEncoding {
    pub sin_theta: f64,
    pub cos_theta: f64,
    pub rho_norm: f64,
    pub z_norm: f64,
    /// Set when the input fell outside `[0, rho_max]` or the z slab and
    /// was clamped.
    pub clamped: bool,
}

impl PolarEncoding {
    pub fn to_array(self) -> [f64; 4] {
        [self.sin_theta, self.cos_theta, self.rho_norm, self.z_norm]
    }
}

/// Encode a Cartesian point against a polar grid.
///
/// Radius normalizes by `rho_max`, height by the z slab; out-of-range
/// inputs are clamped and flagged so encodings stay finite for any query.
pub fn encode_polar(p: Vector3<f64>, grid: &PolarGrid) -> Result<PolarEncoding> {
    let dz = grid.z_max - grid.z_min;
    if dz <= 0.0 {
        return Err(Error::ZeroZSlab);
    }
    let cyl = cart_to_cyl(p);
    let rho_raw = cyl.rho / grid.rho_max;
    let z_raw = (cyl.z - grid.z_min) / dz;
    let clamped = !(0.0..=1.0).contains(&rho_raw) || !(0.0..=1.0).contains(&z_raw);
    Ok(PolarEncoding {
        sin_theta: cyl.theta.sin(),
        cos_theta: cyl.theta.cos(),
        rho_norm: rho_raw.clamp(0.0, 1.0),
        z_norm: z_raw.clamp(0.0, 1.0),
        clamped,
    })
}

/// Anchor points placed uniformly in polar space, at bin centers of an
/// `n_theta x n_per_beam` subdivision: beam `j` sits at angle
/// `(j + 1/2) * 2π / n_theta`, point `i` on it at radius
/// `(i + 1/2) * rho_max / n_per_beam`. Beam-major order.
pub fn polar_anchor_grid(grid: &PolarGrid, n_per_beam: usize) -> Vec<CylindricalPoint> {
    let mut anchors = Vec::with_capacity(grid.n_theta * n_per_beam);
    for j in 0..grid.n_theta {
        let theta = (j as f64 + 0.5) * TAU / grid.n_theta as f64;
        for i in 0..n_per_beam {
            let rho = (i as f64 + 0.5) * grid.rho_max / n_per_beam as f64;
            anchors.push(CylindricalPoint {
                rho,
                theta,
                z: 0.5 * (grid.z_min + grid.z_max),
            });
        }
    }
    anchors
}

/// Bin index `(theta_idx, rho_idx)` of a cylindrical point, or `None`
/// when `rho >= rho_max`. The z coordinate does not participate.
pub fn bin_index(p: &CylindricalPoint, grid: &PolarGrid) -> Option<(usize, usize)> {
    if p.rho >= grid.rho_max || p.rho < 0.0 {
        return None;
    }
    // Clamp: θ just below 2π (or ρ just below ρ_max) may round up to the
    // bin count under division.
    let ti = ((p.theta / grid.theta_bin_width()) as usize).min(grid.n_theta - 1);
    let ri = ((p.rho / grid.rho_bin_width()) as usize).min(grid.n_rho - 1);
    Some((ti, ri))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn grid_8x4() -> PolarGrid {
        PolarGrid {
            rho_max: 40.0,
            n_theta: 8,
            n_rho: 4,
            z_min: -2.0,
            z_max: 6.0,
        }
    }

    #[test]
    fn encode_range_endpoints() {
        let g = PolarGrid {
            rho_max: 10.0,
            n_theta: 8,
            n_rho: 4,
            z_min: -1.0,
            z_max: 3.0,
        };
        let e = encode_polar(Vector3::new(10.0, 0.0, -1.0), &g).unwrap();
        assert_relative_eq!(e.sin_theta, 0.0);
        assert_relative_eq!(e.cos_theta, 1.0);
        assert_relative_eq!(e.rho_norm, 1.0);
        assert_relative_eq!(e.z_norm, 0.0);
        assert!(!e.clamped);
    }

    #[test]
    fn encode_hand_evaluated() {
        // (0,-1): θ = 3π/2, so [sin, cos] = [-1, 0]; ρ/ρ_max = 0.5.
        let g = PolarGrid {
            rho_max: 2.0,
            n_theta: 8,
            n_rho: 4,
            z_min: 0.0,
            z_max: 1.0,
        };
        let e = encode_polar(Vector3::new(0.0, -1.0, 0.25), &g).unwrap();
        assert_relative_eq!(e.sin_theta, -1.0, epsilon = 1e-12);
        assert_relative_eq!(e.cos_theta, 0.0, epsilon = 1e-12);
        assert_relative_eq!(e.rho_norm, 0.5);
        assert_relative_eq!(e.z_norm, 0.25);
    }

    #[test]
    fn encode_clamps_and_flags() {
        let g = grid_8x4();
        let e = encode_polar(Vector3::new(100.0, 0.0, 0.0), &g).unwrap();
        assert!(e.clamped);
        assert_relative_eq!(e.rho_norm, 1.0);
        let e = encode_polar(Vector3::new(1.0, 0.0, 99.0), &g).unwrap();
        assert!(e.clamped);
        assert_relative_eq!(e.z_norm, 1.0);
    }

    #[test]
    fn encode_rejects_empty_slab() {
        let mut g = grid_8x4();
        g.z_max = g.z_min;
        assert!(matches!(
            encode_polar(Vector3::zeros(), &g),
            Err(Error::ZeroZSlab)
        ));
    }

    #[test]
    fn wrap_around_continuity() {
        let g = grid_8x4();
        let eps: f64 = 1e-6;
        let rho = 20.0;
        let a = encode_polar(Vector3::new(rho * eps.cos(), rho * eps.sin(), 1.0), &g)
            .unwrap()
            .to_array();
        let b = encode_polar(
            Vector3::new(rho * (TAU - eps).cos(), rho * (TAU - eps).sin(), 1.0),
            &g,
        )
        .unwrap()
        .to_array();
        let max_diff = a
            .iter()
            .zip(&b)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
        assert!(max_diff < 1e-5, "wrap discontinuity {max_diff}");
    }

    #[test]
    fn anchors_four_beams() {
        let g = PolarGrid {
            rho_max: 2.0,
            n_theta: 4,
            n_rho: 1,
            z_min: 0.0,
            z_max: 1.0,
        };
        let anchors = polar_anchor_grid(&g, 1);
        assert_eq!(anchors.len(), 4);
        let want = [PI / 4.0, 3.0 * PI / 4.0, 5.0 * PI / 4.0, 7.0 * PI / 4.0];
        for (a, w) in anchors.iter().zip(want) {
            assert_relative_eq!(a.rho, 1.0);
            assert_relative_eq!(a.theta, w, epsilon = 1e-12);
        }
    }

    #[test]
    fn anchors_rotation_symmetry_and_bounds() {
        let g = grid_8x4();
        let anchors = polar_anchor_grid(&g, 3);
        assert_eq!(anchors.len(), 8 * 3);
        let inc = g.theta_bin_width();
        for a in &anchors {
            assert!(a.rho > 0.0 && a.rho < g.rho_max);
            let rotated = crate::geometry::wrap_to_2pi(a.theta + inc);
            assert!(
                anchors
                    .iter()
                    .any(|b| (b.theta - rotated).abs() < 1e-9 && (b.rho - a.rho).abs() < 1e-12),
                "rotated anchor missing"
            );
        }
    }

    #[test]
    fn bin_index_examples() {
        let g = grid_8x4();
        assert_eq!(
            bin_index(
                &CylindricalPoint {
                    rho: 0.0,
                    theta: 0.0,
                    z: 0.0
                },
                &g
            ),
            Some((0, 0))
        );
        assert_eq!(
            bin_index(
                &CylindricalPoint {
                    rho: 25.0,
                    theta: PI,
                    z: 0.0
                },
                &g
            ),
            Some((4, 2))
        );
        // θ just under 2π clamps to the last bin, never n_theta.
        assert_eq!(
            bin_index(
                &CylindricalPoint {
                    rho: 1.0,
                    theta: TAU - 1e-9,
                    z: 0.0
                },
                &g
            ),
            Some((7, 0))
        );
        // ρ at or past ρ_max is out of range.
        assert_eq!(
            bin_index(
                &CylindricalPoint {
                    rho: 40.0,
                    theta: 0.0,
                    z: 0.0
                },
                &g
            ),
            None
        );
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(512))]

        #[test]
        fn every_in_range_point_gets_one_bin(
            rho in 0.0f64..39.999,
            theta in 0.0f64..TAU,
        ) {
            let g = grid_8x4();
            let p = CylindricalPoint { rho, theta: crate::geometry::wrap_to_2pi(theta), z: 0.0 };
            let (ti, ri) = bin_index(&p, &g).expect("in-range point must bin");
            prop_assert!(ti < g.n_theta && ri < g.n_rho);
            // Bin center lies within half a bin of the point in index space.
            let tc = (ti as f64 + 0.5) * g.theta_bin_width();
            let rc = (ri as f64 + 0.5) * g.rho_bin_width();
            let dtheta = crate::geometry::wrap_to_pi(p.theta - tc).abs();
            prop_assert!(dtheta <= g.theta_bin_width() * 0.5 + 1e-12);
            prop_assert!((p.rho - rc).abs() <= g.rho_bin_width() * 0.5 + 1e-12);
        }

        #[test]
        fn encodings_are_normalized(
            x in -60.0f64..60.0,
            y in -60.0f64..60.0,
            z in -10.0f64..10.0,
        ) {
            let g = grid_8x4();
            let e = encode_polar(Vector3::new(x, y, z), &g).unwrap();
            let s2c2 = e.sin_theta * e.sin_theta + e.cos_theta * e.cos_theta;
            prop_assert!((s2c2 - 1.0).abs() < 1e-9);
            prop_assert!((0.0..=1.0).contains(&e.rho_norm));
            prop_assert!((0.0..=1.0).contains(&e.z_norm));
        }
    }
}
