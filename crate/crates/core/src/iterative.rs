//! Iterative inversion of an LTI operator by a truncated Neumann series.
//!
//! With the error operator `E = I − μH`, the partial sums
//! `S_K = Σ_{j=0}^{K} E^j` approach `(μH)⁻¹` whenever `‖E‖ < 1`. Every
//! operator here is diagonal in the frequency basis, so operators are
//! sampled [`TransferFunction`]s and all algebra is bin-wise.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::signal::{apply_tf, Envelope, TransferFunction};

/// A norm counts as contracting only below `1 − CONVERGENCE_MARGIN`.
pub const CONVERGENCE_MARGIN: f64 = 1e-9;

/// Number of error-operator applications `K` and scaling factor `μ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationSpec {
    k_terms: usize,
    mu: f64,
}

impl IterationSpec {
    pub fn new(k_terms: usize, mu: f64) -> Result<Self> {
        if !(mu.is_finite() && mu > 0.0) {
            return Err(Error::param("mu", format!("must be positive, got {mu}")));
        }
        Ok(Self { k_terms, mu })
    }

    /// `μ = 1`.
    pub fn unscaled(k_terms: usize) -> Self {
        Self { k_terms, mu: 1.0 }
    }

    pub fn k_terms(&self) -> usize {
        self.k_terms
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }
}

/// `1 − μ·h` at every bin.
pub fn error_tf(h: &TransferFunction, mu: f64) -> TransferFunction {
    h.map(|v| Complex64::new(1.0, 0.0) - mu * v)
}

/// `Σ_{j=0}^{K} e^j` at every bin.
pub fn partial_sum_tf(e: &TransferFunction, k_terms: usize) -> TransferFunction {
    e.map(|x| {
        let mut sum = Complex64::new(1.0, 0.0);
        let mut power = Complex64::new(1.0, 0.0);
        for _ in 0..k_terms {
            power *= x;
            sum += power;
        }
        sum
    })
}

/// `Σ_{j=0}^{K} (1 − μh)^j` at every bin.
pub fn neumann_sum_tf(h: &TransferFunction, spec: IterationSpec) -> TransferFunction {
    partial_sum_tf(&error_tf(h, spec.mu), spec.k_terms)
}

/// Feedback realization: starting from `y = e_in`, applies
/// `y ← e_in + E{y}` exactly `K` times.
pub fn feedback_run(e_in: &Envelope, h: &TransferFunction, spec: IterationSpec) -> Result<Envelope> {
    if e_in.grid() != h.grid() {
        // surface the mismatch even when K = 0
        apply_tf(e_in, h)?;
    }
    let error = error_tf(h, spec.mu);
    let one = Complex64::new(1.0, 0.0);
    let mut y = e_in.clone();
    for _ in 0..spec.k_terms {
        let fed_back = apply_tf(&y, &error)?;
        y = e_in.linear_combination(one, &fed_back, one)?;
    }
    Ok(y)
}

/// `max |1 − μh_k|` over bins with `|Δω| <= band_limit`.
pub fn operator_norm(h: &TransferFunction, mu: f64, band_limit: f64) -> Result<f64> {
    let grid = h.grid();
    if band_limit > grid.max_delta_omega() {
        return Err(Error::param(
            "band_limit",
            format!(
                "{band_limit:e} rad/s exceeds the grid's max |Δω| = {:e} rad/s",
                grid.max_delta_omega()
            ),
        ));
    }
    error_tf(h, mu).max_magnitude_in_band(band_limit)
}

/// Whether an operator norm admits a convergent Neumann series.
pub fn is_contraction(norm: f64) -> bool {
    norm < 1.0 - CONVERGENCE_MARGIN
}

/// `max_k |S_K·μh_k − 1|`, the worst-bin deviation of `S_K·μH` from identity.
pub fn inversion_residual(h: &TransferFunction, spec: IterationSpec) -> f64 {
    let s = neumann_sum_tf(h, spec);
    s.values()
        .iter()
        .zip(h.values())
        .map(|(s, h)| (s * spec.mu * h - 1.0).norm())
        .fold(0.0, f64::max)
}

/// Smallest `K <= max_k` whose [`inversion_residual`] is at most `target`.
pub fn terms_to_residual(h: &TransferFunction, mu: f64, target: f64, max_k: usize) -> Option<usize> {
    (0..=max_k).find(|&k| inversion_residual(h, IterationSpec { k_terms: k, mu }) <= target)
}
