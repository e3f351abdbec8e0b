//! Fiber parameterization and the dispersion transfer function.
//!
//! The propagation constant is expanded around the carrier as
//! `β(ω) = β₀ + β₁Δω + (β₂/2)Δω² + …`. Linear propagation over length `z`
//! multiplies the spectrum by `exp(−j·z·Σ βᵢ/i!·Δωⁱ)`.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::signal::{apply_tf, check_wraparound, Envelope, FrequencyGrid, TransferFunction};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// 1 ps/(nm·km) in s/m².
pub const PS_PER_NM_KM: f64 = 1e-6;

/// 1 ps²/km in s²/m.
pub const PS2_PER_KM: f64 = 1e-27;

/// Group-velocity dispersion `β₂` (s²/m) from the dispersion coefficient
/// `D` (ps/nm/km) at carrier wavelength `lambda0` (m): `β₂ = −D·λ₀²/(2πc)`.
pub fn d_to_beta2(d_ps_nm_km: f64, lambda0: f64) -> f64 {
    -(d_ps_nm_km * PS_PER_NM_KM) * lambda0 * lambda0 / (2.0 * PI * SPEED_OF_LIGHT)
}

/// Dispersion coefficient `D` (ps/nm/km) from `β₂` (s²/m):
/// `D = −(2πc/λ₀²)·β₂`.
pub fn beta2_to_d(beta2: f64, lambda0: f64) -> f64 {
    -(2.0 * PI * SPEED_OF_LIGHT / (lambda0 * lambda0)) * beta2 / PS_PER_NM_KM
}

pub fn beta2_from_ps2_per_km(beta2_ps2_km: f64) -> f64 {
    beta2_ps2_km * PS2_PER_KM
}

pub fn beta2_to_ps2_per_km(beta2: f64) -> f64 {
    beta2 / PS2_PER_KM
}

fn factorial(i: usize) -> f64 {
    (1..=i).fold(1.0, |acc, k| acc * k as f64)
}

/// Taylor coefficients of the propagation constant and a length.
#[derive(Debug, Clone, PartialEq)]
pub struct FiberParams {
    betas: Vec<f64>,
    length_m: f64,
    label: String,
}

impl FiberParams {
    /// `betas[i]` is `βᵢ` in sⁱ/m. At least β₀, β₁ and β₂ must be present.
    pub fn new(betas: Vec<f64>, length_m: f64, label: impl Into<String>) -> Result<Self> {
        if betas.len() < 3 {
            return Err(Error::param(
                "betas",
                format!("need at least beta0..beta2, got {} coefficients", betas.len()),
            ));
        }
        if betas.iter().any(|b| !b.is_finite()) {
            return Err(Error::param("betas", "non-finite coefficient"));
        }
        if !(length_m.is_finite() && length_m >= 0.0) {
            return Err(Error::param("length_m", format!("must be >= 0, got {length_m}")));
        }
        Ok(Self {
            betas,
            length_m,
            label: label.into(),
        })
    }

    /// Fiber described only by its group-velocity dispersion (β₀ = β₁ = 0).
    pub fn with_beta2(beta2: f64, length_m: f64, label: impl Into<String>) -> Result<Self> {
        Self::new(vec![0.0, 0.0, beta2], length_m, label)
    }

    /// Conventional-unit constructor: `D` in ps/nm/km, length in km.
    pub fn from_d(d_ps_nm_km: f64, lambda0: f64, length_km: f64, label: impl Into<String>) -> Result<Self> {
        if !(lambda0.is_finite() && lambda0 > 0.0) {
            return Err(Error::param("lambda0", format!("must be positive, got {lambda0}")));
        }
        Self::with_beta2(d_to_beta2(d_ps_nm_km, lambda0), length_km * 1e3, label)
    }

    /// Conventional-unit constructor: `β₂` in ps²/km, length in km.
    pub fn from_beta2_ps2_km(beta2_ps2_km: f64, length_km: f64, label: impl Into<String>) -> Result<Self> {
        Self::with_beta2(beta2_from_ps2_per_km(beta2_ps2_km), length_km * 1e3, label)
    }

    pub fn betas(&self) -> &[f64] {
        &self.betas
    }

    pub fn beta(&self, i: usize) -> f64 {
        self.betas.get(i).copied().unwrap_or(0.0)
    }

    pub fn beta2(&self) -> f64 {
        self.betas[2]
    }

    pub fn length_m(&self) -> f64 {
        self.length_m
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// Same coefficients over a different length.
    pub fn with_length(&self, length_m: f64) -> Result<Self> {
        Self::new(self.betas.clone(), length_m, self.label.clone())
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    /// Replaces (or appends) coefficient `βᵢ`.
    pub fn with_beta(mut self, i: usize, value: f64) -> Result<Self> {
        if !value.is_finite() {
            return Err(Error::param("betas", "non-finite coefficient"));
        }
        if self.betas.len() <= i {
            self.betas.resize(i + 1, 0.0);
        }
        self.betas[i] = value;
        Ok(self)
    }

    /// Per-unit-length phase `Σ βᵢ/i!·Δωⁱ` summed from order `from`.
    pub fn phase_per_meter(&self, delta_omega: f64, from: usize) -> f64 {
        let mut acc = 0.0;
        for (i, &b) in self.betas.iter().enumerate().skip(from) {
            acc += b / factorial(i) * delta_omega.powi(i as i32);
        }
        acc
    }

    /// Dispersive phase `z·Σ_{i≥2} βᵢ/i!·Δωⁱ` over the fiber length.
    pub fn dispersive_phase(&self, delta_omega: f64) -> f64 {
        self.length_m * self.phase_per_meter(delta_omega, 2)
    }

    /// Per-unit-length group delay `dβ/dω` from order `from`, in s/m.
    pub fn group_delay_per_meter(&self, delta_omega: f64, from: usize) -> f64 {
        let mut acc = 0.0;
        for (i, &b) in self.betas.iter().enumerate().skip(from.max(1)) {
            acc += b / factorial(i - 1) * delta_omega.powi(i as i32 - 1);
        }
        acc
    }

    /// Bulk group delay `β₁·z` removed by the retarded frame.
    pub fn group_delay(&self) -> f64 {
        self.beta(1) * self.length_m
    }

    /// Difference between the largest and smallest dispersive group delay
    /// over `|Δω| <= half_band`. Equals `|β₂|·z·2·half_band` for β₂-only
    /// fibers.
    pub fn delay_spread(&self, half_band: f64) -> f64 {
        if self.betas.len() <= 3 {
            return self.beta2().abs() * self.length_m * 2.0 * half_band;
        }
        const POINTS: usize = 2049;
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for p in 0..POINTS {
            let w = -half_band + 2.0 * half_band * p as f64 / (POINTS - 1) as f64;
            let tau = self.length_m * self.group_delay_per_meter(w, 2);
            lo = lo.min(tau);
            hi = hi.max(tau);
        }
        hi - lo
    }
}

/// Sampled `exp(−j·z·Σ βᵢ/i!·Δωⁱ)`; the sum starts at `i = 2` unless
/// `include_low_orders` adds the β₀ + β₁Δω terms.
pub fn dispersion_tf(fiber: &FiberParams, grid: &FrequencyGrid, include_low_orders: bool) -> TransferFunction {
    let from = if include_low_orders { 0 } else { 2 };
    let z = fiber.length_m;
    TransferFunction::from_fn(*grid, |w| Complex64::from_polar(1.0, -z * fiber.phase_per_meter(w, from)))
}

/// Linear propagation in the retarded frame.
///
/// β₁ (bulk group delay) and β₀ (constant phase) are left out of the
/// sampled response; [`FiberParams::group_delay`] reports the delay.
pub fn propagate(e: &Envelope, fiber: &FiberParams) -> Result<Envelope> {
    let half_band = e.to_spectrum().occupied_half_width();
    check_wraparound(e, fiber.delay_spread(half_band))?;
    apply_tf(e, &dispersion_tf(fiber, e.grid(), false))
}
