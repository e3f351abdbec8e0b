//! Optical dispersion compensator built from cascaded two-branch
//! sub-systems.
//!
//! Each sub-system splits its input between a standard fiber of length `L`
//! and a strongly dispersive fiber of the same length followed by an
//! attenuator `α`, then subtracts the branches. With matched β₀/β₁ the
//! response factors as
//!
//! ```text
//! E(ω) = (1/√2)·e^{−jL(β₀ + β₁Δω)}·E_D(ω),   E_D(ω) = 1 − √α·e^{−jLΣ_{i≥2} βᵢ/i!·Δωⁱ}
//! ```
//!
//! and `K` cascaded stages followed by an amplifier of power gain `G`
//! realize the partial Neumann sum
//!
//! ```text
//! H⁻¹(ω) ≈ √G/2^{(K+1)/2}·e^{−jKL(β₀ + β₁Δω)}·Σ_{k=0}^{K} E_D(ω)^k.
//! ```
//!
//! When `βᵢ^PCF·L = βᵢ^FIB·z` for `i ≥ 2` and `G = α·2^{K+1}`, the product of
//! this response with the transmission fiber's dispersion response is a pure
//! delay times `1 − E_D^{K+1}`.

use std::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fiber::{dispersion_tf, FiberParams};
use crate::iterative::{feedback_run, partial_sum_tf, IterationSpec};
use crate::signal::{apply_tf, check_wraparound, Envelope, FrequencyGrid, TransferFunction};

const MATCH_TOLERANCE: f64 = 1e-12;

fn close(a: f64, b: f64, rel: f64) -> bool {
    a == b || (a - b).abs() <= rel * a.abs().max(b.abs())
}

fn chord(phase: f64) -> f64 {
    2.0 * (0.5 * phase).sin().abs()
}

/// One sub-system: standard fiber (up branch), dispersive fiber (down
/// branch) and the down-branch attenuation `α`.
#[derive(Debug, Clone, PartialEq)]
pub struct SubsystemSpec {
    smf: FiberParams,
    pcf: FiberParams,
    alpha: f64,
}

impl SubsystemSpec {
    pub fn new(smf: FiberParams, pcf: FiberParams, alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::param("alpha", format!("must lie in (0, 1], got {alpha}")));
        }
        if !close(smf.length_m(), pcf.length_m(), MATCH_TOLERANCE) {
            return Err(Error::param(
                "length_m",
                format!(
                    "branches must have equal length, got {} m and {} m",
                    smf.length_m(),
                    pcf.length_m()
                ),
            ));
        }
        for i in 0..2 {
            if !close(smf.beta(i), pcf.beta(i), MATCH_TOLERANCE) {
                return Err(Error::param(
                    "betas",
                    format!(
                        "beta{i} must match across branches ({:e} vs {:e})",
                        smf.beta(i),
                        pcf.beta(i)
                    ),
                ));
            }
        }
        Ok(Self { smf, pcf, alpha })
    }

    pub fn smf(&self) -> &FiberParams {
        &self.smf
    }

    pub fn pcf(&self) -> &FiberParams {
        &self.pcf
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn sqrt_alpha(&self) -> f64 {
        self.alpha.sqrt()
    }

    /// Branch length `L`.
    pub fn length_m(&self) -> f64 {
        self.smf.length_m()
    }

    pub fn with_alpha(&self, alpha: f64) -> Result<Self> {
        Self::new(self.smf.clone(), self.pcf.clone(), alpha)
    }
}

/// `E_D(Δω) = 1 − √α·exp(−jLΣ_{i≥2} βᵢ^PCF/i!·Δωⁱ)`.
pub fn e_d_tf(sub: &SubsystemSpec, grid: &FrequencyGrid) -> TransferFunction {
    let sa = sub.sqrt_alpha();
    TransferFunction::from_fn(*grid, |w| {
        Complex64::new(1.0, 0.0) - sa * Complex64::from_polar(1.0, -sub.pcf.dispersive_phase(w))
    })
}

/// Phases of the two branches split as `(bulk, up, down)`: `bulk` is the
/// up branch's β₀/β₁ phase, `up` its own i ≥ 2 phase and `down` the down
/// branch's total phase relative to `bulk`. The β₀/β₁ difference is formed
/// from coefficient differences so large carrier phases cancel exactly.
fn branch_phases(smf: &FiberParams, pcf: &FiberParams, w: f64) -> (f64, f64, f64) {
    let (ls, lp) = (smf.length_m(), pcf.length_m());
    let bulk = ls * (smf.beta(0) + smf.beta(1) * w);
    let d0 = lp * pcf.beta(0) - ls * smf.beta(0);
    let d1 = lp * pcf.beta(1) - ls * smf.beta(1);
    (bulk, smf.dispersive_phase(w), d0 + d1 * w + pcf.dispersive_phase(w))
}

/// Exact two-branch response `(1/√2)(H_smf − √α·H_pcf)` with every
/// series term of both fibers. `alpha` may be 0 (down branch blocked).
pub fn exact_branches(
    smf: &FiberParams,
    pcf: &FiberParams,
    alpha: f64,
    grid: &FrequencyGrid,
) -> Result<TransferFunction> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::param("alpha", format!("must lie in [0, 1], got {alpha}")));
    }
    let sa = alpha.sqrt();
    Ok(TransferFunction::from_fn(*grid, |w| {
        let (bulk, up, down) = branch_phases(smf, pcf, w);
        Complex64::from_polar(FRAC_1_SQRT_2, -bulk)
            * (Complex64::from_polar(1.0, -up) - sa * Complex64::from_polar(1.0, -down))
    }))
}

/// Factored approximation `(1/√2)·e^{−jL(β₀^SMF + β₁^SMF·Δω)}·E_D(Δω)`.
pub fn factored_branches(
    smf: &FiberParams,
    pcf: &FiberParams,
    alpha: f64,
    grid: &FrequencyGrid,
) -> Result<TransferFunction> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::param("alpha", format!("must lie in [0, 1], got {alpha}")));
    }
    let sa = alpha.sqrt();
    let l = smf.length_m();
    Ok(TransferFunction::from_fn(*grid, |w| {
        let bulk = Complex64::from_polar(FRAC_1_SQRT_2, -l * (smf.beta(0) + smf.beta(1) * w));
        bulk * (Complex64::new(1.0, 0.0) - sa * Complex64::from_polar(1.0, -pcf.dispersive_phase(w)))
    }))
}

/// Bin-wise upper bound on `|exact − factored|`:
/// `(1/√2)·|1 − e^{−jφ_smf}| + (√α/√2)·|1 − e^{−jΔφ₀₁}|`, where `φ_smf` is
/// the up branch's own i ≥ 2 phase and `Δφ₀₁` the β₀/β₁ phase mismatch
/// between branches.
pub fn factoring_error_bound(smf: &FiberParams, pcf: &FiberParams, alpha: f64, grid: &FrequencyGrid) -> Vec<f64> {
    let sa = alpha.sqrt();
    (0..grid.n_samples())
        .map(|k| {
            let w = grid.delta_omega(k);
            let (_, up, down) = branch_phases(smf, pcf, w);
            let mismatch = down - pcf.dispersive_phase(w);
            FRAC_1_SQRT_2 * (chord(up) + sa * chord(mismatch))
        })
        .collect()
}

/// Both forms of the sub-system response.
#[derive(Debug, Clone, PartialEq)]
pub struct SubsystemResponse {
    pub exact: TransferFunction,
    pub factored: TransferFunction,
}

pub fn subsystem_tf(sub: &SubsystemSpec, grid: &FrequencyGrid) -> SubsystemResponse {
    SubsystemResponse {
        exact: exact_branches(&sub.smf, &sub.pcf, sub.alpha, grid).expect("alpha validated"),
        factored: factored_branches(&sub.smf, &sub.pcf, sub.alpha, grid).expect("alpha validated"),
    }
}

/// Which sub-system response the cascade iterates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CascadeForm {
    /// `E_D` from the factored approximation.
    #[default]
    Factored,
    /// Exact two-branch response with the up branch's bulk β₀/β₁ phase
    /// removed, so the up branch's own dispersion and any β₀/β₁ mismatch
    /// are kept.
    Exact,
}

/// A `K`-stage compensator with its output amplifier.
#[derive(Debug, Clone, PartialEq)]
pub struct CompensatorSpec {
    subsystem: SubsystemSpec,
    k_stages: usize,
    gain_override: Option<f64>,
    form: CascadeForm,
}

impl CompensatorSpec {
    /// Uses the default power gain `G = α·2^{K+1}`.
    pub fn new(subsystem: SubsystemSpec, k_stages: usize) -> Self {
        Self {
            subsystem,
            k_stages,
            gain_override: None,
            form: CascadeForm::default(),
        }
    }

    pub fn with_gain(mut self, gain: f64) -> Result<Self> {
        if !(gain.is_finite() && gain > 0.0) {
            return Err(Error::param("gain", format!("must be positive, got {gain}")));
        }
        self.gain_override = Some(gain);
        Ok(self)
    }

    pub fn with_form(mut self, form: CascadeForm) -> Self {
        self.form = form;
        self
    }

    pub fn with_stages(&self, k_stages: usize) -> Self {
        Self {
            k_stages,
            ..self.clone()
        }
    }

    pub fn subsystem(&self) -> &SubsystemSpec {
        &self.subsystem
    }

    pub fn k_stages(&self) -> usize {
        self.k_stages
    }

    pub fn form(&self) -> CascadeForm {
        self.form
    }

    pub fn default_gain(&self) -> f64 {
        self.subsystem.alpha * 2f64.powi(self.k_stages as i32 + 1)
    }

    pub fn gain(&self) -> f64 {
        self.gain_override.unwrap_or_else(|| self.default_gain())
    }

    /// Amplitude prefactor `√G/2^{(K+1)/2}`; exactly `√α` for the default gain.
    pub fn prefactor(&self) -> f64 {
        match self.gain_override {
            None => self.subsystem.sqrt_alpha(),
            Some(g) => g.sqrt() / 2f64.powf(0.5 * (self.k_stages as f64 + 1.0)),
        }
    }

    /// Bulk group delay of the cascade, `K·L·β₁`.
    pub fn latency(&self) -> f64 {
        self.k_stages as f64 * self.subsystem.length_m() * self.subsystem.smf.beta(1)
    }

    /// Constant carrier phase of the cascade, `K·L·β₀`.
    pub fn constant_phase(&self) -> f64 {
        self.k_stages as f64 * self.subsystem.length_m() * self.subsystem.smf.beta(0)
    }

    /// Total fiber path a signal traverses through the cascade, `K·L`.
    pub fn path_length_m(&self) -> f64 {
        self.k_stages as f64 * self.subsystem.length_m()
    }

    /// The per-stage operator whose partial sums the cascade forms.
    pub fn stage_error_tf(&self, grid: &FrequencyGrid) -> TransferFunction {
        match self.form {
            CascadeForm::Factored => e_d_tf(&self.subsystem, grid),
            CascadeForm::Exact => {
                let smf = &self.subsystem.smf;
                let pcf = &self.subsystem.pcf;
                let sa = self.subsystem.sqrt_alpha();
                TransferFunction::from_fn(*grid, |w| {
                    let (_, up, down) = branch_phases(smf, pcf, w);
                    Complex64::from_polar(1.0, -up) - sa * Complex64::from_polar(1.0, -down)
                })
            }
        }
    }
}

/// Retarded-frame cascade response `prefactor·Σ_{k=0}^{K} E_D^k`.
pub fn compensator_tf(spec: &CompensatorSpec, grid: &FrequencyGrid) -> TransferFunction {
    partial_sum_tf(&spec.stage_error_tf(grid), spec.k_stages).scaled(Complex64::new(spec.prefactor(), 0.0))
}

/// Cascade response including the bulk `e^{−jKL(β₀ + β₁Δω)}` term.
pub fn compensator_tf_lab(spec: &CompensatorSpec, grid: &FrequencyGrid) -> TransferFunction {
    let retarded = compensator_tf(spec, grid);
    let kl = spec.path_length_m();
    let smf = &spec.subsystem.smf;
    let bulk = TransferFunction::from_fn(*grid, |w| Complex64::from_polar(1.0, -kl * (smf.beta(0) + smf.beta(1) * w)));
    retarded.cascade(&bulk).expect("same grid")
}

/// Large-K limit `√G/(√α·2^{(K+1)/2})·e^{+jLΣ_{i≥2} βᵢ^PCF/i!·Δωⁱ}` (retarded frame).
pub fn inverse_limit_tf(spec: &CompensatorSpec, grid: &FrequencyGrid) -> TransferFunction {
    let scale = spec.prefactor() / spec.subsystem.sqrt_alpha();
    let pcf = &spec.subsystem.pcf;
    TransferFunction::from_fn(*grid, |w| Complex64::from_polar(scale, pcf.dispersive_phase(w)))
}

/// Worst in-band residual `max |E_D|^{K+1}` over `|Δω| <= band_limit`.
pub fn residual_max(spec: &CompensatorSpec, grid: &FrequencyGrid, band_limit: f64) -> Result<f64> {
    let m = spec.stage_error_tf(grid).max_magnitude_in_band(band_limit)?;
    Ok(m.powi(spec.k_stages as i32 + 1))
}

fn check_compensator_window(e: &Envelope, spec: &CompensatorSpec) -> Result<()> {
    let half_band = e.to_spectrum().occupied_half_width();
    let pcf = &spec.subsystem.pcf;
    let spread = pcf.with_length(spec.path_length_m())?.delay_spread(half_band);
    check_wraparound(e, spread)
}

/// Applies the compensator (direct cascade realization).
pub fn compensate(e: &Envelope, spec: &CompensatorSpec) -> Result<Envelope> {
    check_compensator_window(e, spec)?;
    apply_tf(e, &compensator_tf(spec, e.grid()))
}

/// Applies the compensator through the feedback realization: the signal
/// cycles `K` times through one stage, then the output amplifier scales it.
pub fn compensate_feedback(e: &Envelope, spec: &CompensatorSpec) -> Result<Envelope> {
    check_compensator_window(e, spec)?;
    let stage = spec.stage_error_tf(e.grid());
    let h = stage.map(|v| Complex64::new(1.0, 0.0) - v);
    let looped = feedback_run(e, &h, IterationSpec::unscaled(spec.k_stages))?;
    Ok(looped.scaled(Complex64::new(spec.prefactor(), 0.0)))
}

/// Dispersive fiber matched to a transmission fiber.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchedPcf {
    pub length_m: f64,
    pub pcf: FiberParams,
}

/// Sizes the dispersive branch so that `βᵢ^PCF·L = βᵢ^FIB·z`.
///
/// `L = β₂^FIB·z/β₂^PCF`. With `match_higher_orders`, every `βᵢ^FIB`
/// (`i ≥ 3`) of the target is scaled by `z/L` into the PCF. The PCF takes
/// the target's β₀ and β₁.
pub fn match_pcf(target: &FiberParams, pcf_beta2: f64, match_higher_orders: bool) -> Result<MatchedPcf> {
    let fib_beta2 = target.beta2();
    if !pcf_beta2.is_finite() || pcf_beta2 == 0.0 {
        return Err(Error::param("pcf_beta2", "must be finite and non-zero"));
    }
    if fib_beta2 == 0.0 || fib_beta2.signum() != pcf_beta2.signum() {
        return Err(Error::param(
            "pcf_beta2",
            format!("sign must match the transmission fiber's beta2 ({fib_beta2:e}), got {pcf_beta2:e}"),
        ));
    }
    let length_m = fib_beta2 * target.length_m() / pcf_beta2;
    // z/L, defined even when z = 0
    let ratio = pcf_beta2 / fib_beta2;
    let mut betas = vec![target.beta(0), target.beta(1), pcf_beta2];
    if match_higher_orders {
        betas.extend(target.betas().iter().skip(3).map(|b| b * ratio));
    }
    let pcf = FiberParams::new(betas, length_m, "pcf")?;
    Ok(MatchedPcf { length_m, pcf })
}

/// Sub-system matched to `target`: the up branch carries the target
/// fiber's coefficients over the matched length `L`.
pub fn matched_subsystem(
    target: &FiberParams,
    pcf_beta2: f64,
    alpha: f64,
    match_higher_orders: bool,
) -> Result<SubsystemSpec> {
    let matched = match_pcf(target, pcf_beta2, match_higher_orders)?;
    let smf = target.with_length(matched.length_m)?.with_label("smf");
    SubsystemSpec::new(smf, matched.pcf, alpha)
}

/// Largest response magnitude of each element in the structure.
#[derive(Debug, Clone, PartialEq)]
pub struct PassivityReport {
    pub elements: Vec<(&'static str, f64)>,
    /// Output amplifier amplitude gain `√G`, the only active element.
    pub amplifier_amplitude_gain: f64,
}

impl PassivityReport {
    pub fn passive(&self) -> bool {
        self.elements.iter().all(|(_, m)| *m <= 1.0 + 1e-12)
    }
}

pub fn passivity_audit(spec: &CompensatorSpec, grid: &FrequencyGrid) -> PassivityReport {
    let sub = &spec.subsystem;
    let peak = |h: TransferFunction| h.values().iter().map(|v| v.norm()).fold(0.0, f64::max);
    PassivityReport {
        elements: vec![
            ("splitter", FRAC_1_SQRT_2),
            ("combiner", FRAC_1_SQRT_2),
            ("smf_branch", peak(dispersion_tf(&sub.smf, grid, true))),
            ("pcf_branch", peak(dispersion_tf(&sub.pcf, grid, true))),
            ("attenuator", sub.sqrt_alpha()),
            ("delay_line", peak(dispersion_tf(&sub.smf, grid, true))),
        ],
        amplifier_amplitude_gain: spec.gain().sqrt(),
    }
}
