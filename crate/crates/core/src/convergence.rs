//! Stability of the compensator and the length/bandwidth trade-off.
//!
//! With matched fibers the stage operator is
//! `E_D(Δω) = 1 − √α·e^{−jθ(Δω)}` where `θ = z·Σ_{i≥2} βᵢ^FIB/i!·Δωⁱ`.
//! The cascade converges over a band when `sup |E_D| < 1` there. For a
//! β₂-only fiber `|E_D|² = 1 + α − 2√α·cos θ`, so the condition is
//! `(|β₂|/2)·Δω²·z < arccos(√α/2)` at the band edge `Δω = πB`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fiber::FiberParams;
use crate::iterative::is_contraction;

/// Samples used to search `sup |E_D|` when higher-order terms are present.
const BAND_SEARCH_POINTS: usize = 4097;

/// Band edge `Δω = πB` for two-sided bandwidth `B`.
pub fn band_edge(bandwidth: f64) -> f64 {
    PI * bandwidth
}

/// Dimensionless dispersion strength `ξ = |β₂|·z·(2πB)²`.
pub fn xi(beta2: f64, z: f64, bandwidth: f64) -> f64 {
    let w = 2.0 * PI * bandwidth;
    beta2.abs() * z * w * w
}

/// Transmission length giving dispersion strength `ξ` at bandwidth `B`.
pub fn length_for_xi(xi: f64, beta2: f64, bandwidth: f64) -> f64 {
    let w = 2.0 * PI * bandwidth;
    xi / (beta2.abs() * w * w)
}

/// β₂ phase at the band edge, `|β₂|·z·(πB)²/2 = ξ/8`.
pub fn edge_phase(beta2: f64, z: f64, bandwidth: f64) -> f64 {
    let w = band_edge(bandwidth);
    0.5 * beta2.abs() * z * w * w
}

/// `|1 − √α·e^{−jθ}|`.
pub fn e_d_magnitude(alpha: f64, theta: f64) -> f64 {
    (Complex64::new(1.0, 0.0) - alpha.sqrt() * Complex64::from_polar(1.0, -theta)).norm()
}

/// Largest admissible band-edge phase, `arccos(√α/2)`.
pub fn critical_phase(alpha: f64) -> f64 {
    (0.5 * alpha.sqrt()).acos()
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha <= 1.0 {
        Ok(())
    } else {
        Err(Error::param("alpha", format!("must lie in (0, 1], got {alpha}")))
    }
}

/// Attenuation and the transmission fiber's dispersive coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct StabilityModel {
    alpha: f64,
    /// `βᵢ` for `i ≥ 2`, indexed by `i − 2`.
    dispersive: Vec<f64>,
}

impl StabilityModel {
    /// Uses every `βᵢ, i ≥ 2` of `fiber`; its length is ignored.
    pub fn new(alpha: f64, fiber: &FiberParams) -> Result<Self> {
        check_alpha(alpha)?;
        Ok(Self {
            alpha,
            dispersive: fiber.betas()[2..].to_vec(),
        })
    }

    pub fn beta2_only(alpha: f64, beta2: f64) -> Result<Self> {
        check_alpha(alpha)?;
        if !beta2.is_finite() {
            return Err(Error::param("beta2", "must be finite"));
        }
        Ok(Self {
            alpha,
            dispersive: vec![beta2],
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta2(&self) -> f64 {
        self.dispersive[0]
    }

    fn has_higher_orders(&self) -> bool {
        self.dispersive[1..].iter().any(|&b| b != 0.0)
    }

    fn phase(&self, z: f64, w: f64) -> f64 {
        let mut fact = 1.0;
        let mut acc = 0.0;
        for (offset, &b) in self.dispersive.iter().enumerate() {
            let i = offset + 2;
            fact *= if offset == 0 { 2.0 } else { i as f64 };
            acc += b / fact * w.powi(i as i32);
        }
        z * acc
    }

    /// `sup |E_D|` over `|Δω| <= πB` at transmission length `z`.
    pub fn sup_e_d(&self, bandwidth: f64, z: f64) -> f64 {
        if !self.has_higher_orders() {
            // |E_D| grows monotonically with |θ| on [0, π]
            let theta = edge_phase(self.beta2(), z, bandwidth).min(PI);
            return e_d_magnitude(self.alpha, theta);
        }
        let edge = band_edge(bandwidth);
        (0..BAND_SEARCH_POINTS)
            .map(|p| {
                let w = -edge + 2.0 * edge * p as f64 / (BAND_SEARCH_POINTS - 1) as f64;
                e_d_magnitude(self.alpha, self.phase(z, w))
            })
            .fold(0.0, f64::max)
    }

    /// Whether the cascade converges over the whole band, with the strict
    /// margin of [`is_contraction`].
    pub fn stable(&self, bandwidth: f64, z: f64) -> Result<bool> {
        if !(bandwidth.is_finite() && bandwidth > 0.0) {
            return Err(Error::param("bandwidth", format!("must be positive, got {bandwidth}")));
        }
        if !(z.is_finite() && z >= 0.0) {
            return Err(Error::param("z", format!("must be >= 0, got {z}")));
        }
        Ok(is_contraction(self.sup_e_d(bandwidth, z)))
    }
}

/// Longest stably compensable length at bandwidth `B`:
/// `z_max = 2·arccos(√α/2)/(|β₂|·(πB)²)`. Infinite when `β₂ = 0`.
pub fn z_max(bandwidth: f64, alpha: f64, beta2: f64) -> Result<f64> {
    check_alpha(alpha)?;
    if !(bandwidth.is_finite() && bandwidth > 0.0) {
        return Err(Error::param("bandwidth", format!("must be positive, got {bandwidth}")));
    }
    if beta2 == 0.0 {
        return Ok(f64::INFINITY);
    }
    let w = band_edge(bandwidth);
    Ok(2.0 * critical_phase(alpha) / (beta2.abs() * w * w))
}

/// Axes of a stability-region table.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionQuery {
    alpha: f64,
    beta2_fib: f64,
    bandwidth_grid: Vec<f64>,
    z_grid: Vec<f64>,
}

fn check_axis(name: &'static str, axis: &[f64]) -> Result<()> {
    if axis.is_empty() {
        return Err(Error::param(name, "must not be empty"));
    }
    if axis.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(Error::param(name, "values must be positive and finite"));
    }
    if axis.windows(2).any(|p| p[1] <= p[0]) {
        return Err(Error::param(name, "values must be strictly increasing"));
    }
    Ok(())
}

impl RegionQuery {
    pub fn new(alpha: f64, beta2_fib: f64, bandwidth_grid: Vec<f64>, z_grid: Vec<f64>) -> Result<Self> {
        check_alpha(alpha)?;
        if !beta2_fib.is_finite() {
            return Err(Error::param("beta2_fib", "must be finite"));
        }
        check_axis("bandwidth_grid", &bandwidth_grid)?;
        check_axis("z_grid", &z_grid)?;
        Ok(Self {
            alpha,
            beta2_fib,
            bandwidth_grid,
            z_grid,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta2_fib(&self) -> f64 {
        self.beta2_fib
    }

    pub fn bandwidth_grid(&self) -> &[f64] {
        &self.bandwidth_grid
    }

    pub fn z_grid(&self) -> &[f64] {
        &self.z_grid
    }

    pub fn with_alpha(&self, alpha: f64) -> Result<Self> {
        check_alpha(alpha)?;
        Ok(Self { alpha, ..self.clone() })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegionTable {
    /// `stable[i][j]` for bandwidth `i` and length `j`.
    pub stable: Vec<Vec<bool>>,
    /// `z_max` per bandwidth.
    pub boundary: Vec<f64>,
}

impl RegionTable {
    /// Number of stable cells.
    pub fn area(&self) -> usize {
        self.stable.iter().flatten().filter(|&&s| s).count()
    }
}

/// Stability over the `(B, z)` grid and the closed-form boundary.
/// Rows are evaluated in parallel.
pub fn region_table(q: &RegionQuery) -> RegionTable {
    let model = StabilityModel::beta2_only(q.alpha, q.beta2_fib).expect("validated query");
    let rows: Vec<(Vec<bool>, f64)> = q
        .bandwidth_grid
        .par_iter()
        .map(|&b| {
            let row = q
                .z_grid
                .iter()
                .map(|&z| model.stable(b, z).expect("validated query"))
                .collect();
            (row, z_max(b, q.alpha, q.beta2_fib).expect("validated query"))
        })
        .collect();
    let (stable, boundary) = rows.into_iter().unzip();
    RegionTable { stable, boundary }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fiber::beta2_from_ps2_per_km;

    const B2: f64 = -21e-27;

    #[test]
    fn zero_length_is_always_stable() {
        for alpha in [1e-6, 0.25, 0.5, 1.0] {
            let m = StabilityModel::beta2_only(alpha, B2).unwrap();
            assert!(m.stable(3e9, 0.0).unwrap());
        }
    }

    #[test]
    fn quarter_turn_at_alpha_one_is_unstable() {
        // θ_edge = π/2 → |E_D| = 2 sin(π/4) = √2
        let b = 3e9;
        let w = band_edge(b);
        let z = (PI / 2.0) * 2.0 / (21e-27 * w * w);
        let m = StabilityModel::beta2_only(1.0, B2).unwrap();
        assert!((m.sup_e_d(b, z) - 2f64.sqrt()).abs() < 1e-12);
        assert!(!m.stable(b, z).unwrap());
    }

    #[test]
    fn critical_boundary_is_unstable() {
        for alpha in [0.1, 0.5, 1.0] {
            let b = 3e9;
            let z = z_max(b, alpha, B2).unwrap();
            let m = StabilityModel::beta2_only(alpha, B2).unwrap();
            assert!((m.sup_e_d(b, z) - 1.0).abs() < 1e-12);
            assert!(!m.stable(b, z).unwrap());
            assert!(m.stable(b, 0.999 * z).unwrap());
        }
    }

    #[test]
    fn z_max_spot_value() {
        let z = z_max(3e9, 1.0, beta2_from_ps2_per_km(-21.0)).unwrap();
        let expected = (2.0 * PI / 3.0) / (21e-27 * (PI * 3e9).powi(2));
        assert!((z - expected).abs() / expected < 1e-14);
        assert!((z / 1e3 - 1122.8).abs() < 0.5, "{z}");
    }

    #[test]
    fn z_max_limits_and_scaling() {
        assert_eq!(z_max(3e9, 1.0, 0.0).unwrap(), f64::INFINITY);
        assert!(z_max(0.0, 1.0, B2).is_err());
        assert!(z_max(3e9, 0.0, B2).is_err());
        let tiny = z_max(3e9, 1e-12, B2).unwrap();
        let pi_half = PI / (21e-27 * (PI * 3e9).powi(2));
        assert!((tiny - pi_half).abs() / pi_half < 1e-6);
        let z1 = z_max(1e9, 0.5, B2).unwrap();
        let z4 = z_max(4e9, 0.5, B2).unwrap();
        assert!((z1 / z4 - 16.0).abs() < 1e-12);
    }

    #[test]
    fn xi_and_edge_phase_agree() {
        let (z, b) = (130e3, 3e9);
        let x = xi(B2, z, b);
        assert!((x - 0.970).abs() < 0.005, "{x}");
        assert!((edge_phase(B2, z, b) - x / 8.0).abs() < 1e-15);
        assert!((length_for_xi(x, B2, b) - z).abs() < 1e-9);
    }

    #[test]
    fn higher_orders_enter_numerically() {
        let fiber = FiberParams::new(vec![0.0, 0.0, B2, 0.0], 1.0, "f").unwrap();
        let plain = StabilityModel::new(0.5, &fiber).unwrap();
        let closed = StabilityModel::beta2_only(0.5, B2).unwrap();
        assert_eq!(plain.sup_e_d(3e9, 500e3), closed.sup_e_d(3e9, 500e3));

        // a large β₃ pushes the band edge over the limit
        let z = 0.9 * z_max(3e9, 0.5, B2).unwrap();
        assert!(closed.stable(3e9, z).unwrap());
        let w = band_edge(3e9);
        let b3 = 6.0 * 0.5 / (z * w.powi(3));
        let fiber = FiberParams::new(vec![0.0, 0.0, B2, b3], 1.0, "f").unwrap();
        let model = StabilityModel::new(0.5, &fiber).unwrap();
        assert!(!model.stable(3e9, z).unwrap());
    }

    #[test]
    fn stable_rejects_bad_bandwidth() {
        let m = StabilityModel::beta2_only(1.0, B2).unwrap();
        assert!(m.stable(0.0, 1.0).is_err());
        assert!(m.stable(-1.0, 1.0).is_err());
    }

    #[test]
    fn query_validation() {
        assert!(RegionQuery::new(1.0, B2, vec![1.0, 2.0], vec![1.0]).is_ok());
        assert!(RegionQuery::new(1.0, B2, vec![2.0, 1.0], vec![1.0]).is_err());
        assert!(RegionQuery::new(1.0, B2, vec![1.0, 1.0], vec![1.0]).is_err());
        assert!(RegionQuery::new(1.0, B2, vec![0.0, 1.0], vec![1.0]).is_err());
        assert!(RegionQuery::new(1.0, B2, vec![1.0], vec![]).is_err());
        assert!(RegionQuery::new(1.5, B2, vec![1.0], vec![1.0]).is_err());
    }

    #[test]
    fn table_agrees_with_boundary() {
        let bs: Vec<f64> = (1..=20).map(|i| i as f64 * 0.5e9).collect();
        let zs: Vec<f64> = (1..=40).map(|i| i as f64 * 50e3).collect();
        let q = RegionQuery::new(0.7, B2, bs, zs.clone()).unwrap();
        let t = region_table(&q);
        let min_boundary = t.boundary.iter().cloned().fold(f64::INFINITY, f64::min);
        for (row, zmax) in t.stable.iter().zip(&t.boundary) {
            for (&s, &z) in row.iter().zip(&zs) {
                if z < min_boundary {
                    assert!(s);
                }
                if s {
                    assert!(z < *zmax);
                }
                if z < zmax * (1.0 - 1e-6) {
                    assert!(s);
                }
            }
        }
    }
}
