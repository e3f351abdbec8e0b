//! Experiment configuration: a single JSON document, unknown keys rejected.
//!
//! Conventional units are accepted here (ps/nm/km, ps²/km, km) and resolved
//! into SI values by [`ExperimentConfig::resolve`].

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

use dispcomp_core::fiber::{beta2_from_ps2_per_km, d_to_beta2, FiberParams, SPEED_OF_LIGHT};
use dispcomp_core::signal::{self, Envelope, FrequencyGrid};

use crate::error::{RunError, RunResult};

/// Group index used for β₁ when none is configured.
pub const DEFAULT_GROUP_INDEX: f64 = 1.4682;
pub const DEFAULT_K_MAX: usize = 12;
pub const DEFAULT_N_SAMPLES: usize = 1 << 14;
pub const DEFAULT_WINDOW_WIDTHS: f64 = 64.0;
pub const DEFAULT_TARGET_BROADENING: f64 = 1.1;

fn default_lambda0() -> f64 {
    1550e-9
}

fn default_k_max() -> usize {
    DEFAULT_K_MAX
}

fn default_n_samples() -> usize {
    DEFAULT_N_SAMPLES
}

fn default_window_widths() -> f64 {
    DEFAULT_WINDOW_WIDTHS
}

fn default_xi() -> Vec<f64> {
    vec![0.5, 1.0, 2.0]
}

fn default_alpha() -> Vec<f64> {
    vec![1.0]
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct FiberSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d_ps_nm_km: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta2_ps2_km: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta3_ps3_km: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta1_s_per_m: Option<f64>,
    #[serde(default = "default_lambda0")]
    pub lambda0_m: f64,
    pub length_km: f64,
}

/// Dispersion of the compensator's dispersive fiber (or of a reference DCF).
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct DispersionSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d_ps_nm_km: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta2_ps2_km: Option<f64>,
    /// Externally quoted β₂ to compare against the value derived from D.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quoted_beta2_ps2_km: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct DcfSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d_ps_nm_km: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta2_ps2_km: Option<f64>,
    /// Externally quoted DCF path length, reported alongside the computed one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quoted_path_km: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct CompensatorSection {
    #[serde(default = "default_alpha")]
    pub alpha: Vec<f64>,
    #[serde(default = "default_k_max")]
    pub k_max: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_list: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gain: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_broadening: Option<f64>,
    #[serde(default)]
    pub match_higher_orders: bool,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum PulseShape {
    Sinc,
    Gaussian,
}

/// For `sinc`, `width_s` is the zero-to-zero main-lobe width and
/// `B = 2/width`. For `gaussian`, `width_s` is the 1/e amplitude half-width
/// `t0` and `B = 1/(π·t0)` (1/e points of the intensity spectrum).
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SignalSection {
    pub shape: PulseShape,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bandwidth_hz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub width_s: Option<f64>,
    #[serde(default = "default_n_samples")]
    pub n_samples: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt_s: Option<f64>,
    #[serde(default = "default_window_widths")]
    pub window_widths: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    #[serde(default = "default_xi")]
    pub xi: Vec<f64>,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self { xi: default_xi() }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RegionSection {
    pub b_min_hz: f64,
    pub b_max_hz: f64,
    pub b_points: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z_max_km: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z_points: Option<usize>,
}

impl Default for RegionSection {
    fn default() -> Self {
        Self {
            b_min_hz: 1e9,
            b_max_hz: 20e9,
            b_points: 39,
            z_max_km: None,
            z_points: None,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: String,
    pub fiber: FiberSection,
    pub pcf: DispersionSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dcf: Option<DcfSection>,
    pub compensator: CompensatorSection,
    pub signal: SignalSection,
    #[serde(default)]
    pub sweep: SweepSection,
    #[serde(default)]
    pub region: RegionSection,
    #[serde(default)]
    pub output: OutputSection,
}

fn one_of(section: &str, d: Option<f64>, beta2: Option<f64>, lambda0: f64) -> RunResult<f64> {
    match (d, beta2) {
        (Some(d), None) => {
            finite(&format!("{section}.d_ps_nm_km"), d)?;
            Ok(d_to_beta2(d, lambda0))
        }
        (None, Some(b)) => {
            finite(&format!("{section}.beta2_ps2_km"), b)?;
            Ok(beta2_from_ps2_per_km(b))
        }
        _ => Err(RunError::config(format!(
            "{section}: exactly one of d_ps_nm_km or beta2_ps2_km must be given"
        ))),
    }
}

fn finite(name: &str, v: f64) -> RunResult<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(RunError::config(format!("{name} must be finite")))
    }
}

fn positive(name: &str, v: f64) -> RunResult<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(RunError::config(format!("{name} must be positive, got {v}")))
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> RunResult<Self> {
        serde_json::from_str(text).map_err(|e| RunError::config(e.to_string()))
    }

    pub fn load(path: &Path) -> RunResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| RunError::config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Validates every section and converts to SI.
    pub fn resolve(&self) -> RunResult<Resolved> {
        let f = &self.fiber;
        positive("fiber.lambda0_m", f.lambda0_m)?;
        if !(f.length_km.is_finite() && f.length_km >= 0.0) {
            return Err(RunError::config("fiber.length_km must be >= 0"));
        }
        let beta2 = one_of("fiber", f.d_ps_nm_km, f.beta2_ps2_km, f.lambda0_m)?;
        if beta2 == 0.0 {
            return Err(RunError::config("fiber dispersion must be non-zero"));
        }
        let beta1 = f.beta1_s_per_m.unwrap_or(DEFAULT_GROUP_INDEX / SPEED_OF_LIGHT);
        finite("fiber.beta1_s_per_m", beta1)?;
        let beta0 = 2.0 * PI * DEFAULT_GROUP_INDEX / f.lambda0_m;
        let mut betas = vec![beta0, beta1, beta2];
        if let Some(b3) = f.beta3_ps3_km {
            finite("fiber.beta3_ps3_km", b3)?;
            betas.push(b3 * 1e-39);
        }
        let fiber = FiberParams::new(betas, f.length_km * 1e3, "fiber").map_err(|e| RunError::config(e.to_string()))?;

        let pcf_beta2 = one_of("pcf", self.pcf.d_ps_nm_km, self.pcf.beta2_ps2_km, f.lambda0_m)?;
        if pcf_beta2 == 0.0 || pcf_beta2.signum() != beta2.signum() {
            return Err(RunError::config(
                "pcf dispersion must be non-zero with the same sign as the transmission fiber",
            ));
        }
        let dcf_beta2 = match &self.dcf {
            Some(d) => Some(one_of("dcf", d.d_ps_nm_km, d.beta2_ps2_km, f.lambda0_m)?),
            None => None,
        };

        let c = &self.compensator;
        if c.alpha.is_empty() {
            return Err(RunError::config("compensator.alpha must list at least one value"));
        }
        for &a in &c.alpha {
            if !(a > 0.0 && a <= 1.0) {
                return Err(RunError::config(format!("compensator.alpha values must lie in (0, 1], got {a}")));
            }
        }
        let mut alphas = c.alpha.clone();
        alphas.sort_by(f64::total_cmp);
        alphas.dedup();
        let ks: Vec<usize> = match &c.k_list {
            Some(list) if list.is_empty() => return Err(RunError::config("compensator.k_list must not be empty")),
            Some(list) => {
                let mut l = list.clone();
                l.sort_unstable();
                l.dedup();
                l
            }
            None => (0..=c.k_max).collect(),
        };
        if let Some(g) = c.gain {
            positive("compensator.gain", g)?;
        }
        let target_broadening = c.target_broadening.unwrap_or(DEFAULT_TARGET_BROADENING);
        positive("compensator.target_broadening", target_broadening)?;

        let signal = self.resolve_signal()?;

        if self.sweep.xi.is_empty() {
            return Err(RunError::config("sweep.xi must list at least one value"));
        }
        for &x in &self.sweep.xi {
            positive("sweep.xi", x)?;
        }
        let mut xi = self.sweep.xi.clone();
        xi.sort_by(f64::total_cmp);
        xi.dedup();

        let r = &self.region;
        positive("region.b_min_hz", r.b_min_hz)?;
        positive("region.b_max_hz", r.b_max_hz)?;
        if r.b_points < 2 || r.b_max_hz <= r.b_min_hz {
            return Err(RunError::config("region needs b_points >= 2 and b_max_hz > b_min_hz"));
        }
        let bandwidths: Vec<f64> = (0..r.b_points)
            .map(|i| r.b_min_hz + (r.b_max_hz - r.b_min_hz) * i as f64 / (r.b_points - 1) as f64)
            .collect();
        if let Some(z) = r.z_max_km {
            positive("region.z_max_km", z)?;
        }
        let z_points = r.z_points.unwrap_or(40);
        if z_points < 1 {
            return Err(RunError::config("region.z_points must be >= 1"));
        }

        Ok(Resolved {
            scenario: self.scenario.clone(),
            lambda0: f.lambda0_m,
            fiber,
            pcf_beta2,
            pcf_quoted_beta2: self.pcf.quoted_beta2_ps2_km.map(beta2_from_ps2_per_km),
            dcf_beta2,
            dcf_quoted_path_m: self.dcf.as_ref().and_then(|d| d.quoted_path_km).map(|km| km * 1e3),
            alphas,
            ks,
            gain: c.gain,
            target_broadening,
            match_higher_orders: c.match_higher_orders,
            signal,
            xi,
            region_bandwidths: bandwidths,
            region_z_max_m: r.z_max_km.map(|z| z * 1e3),
            region_z_points: z_points,
        })
    }

    fn resolve_signal(&self) -> RunResult<SignalSpec> {
        let s = &self.signal;
        let (bandwidth, width) = match (s.bandwidth_hz, s.width_s, s.shape) {
            (Some(b), None, PulseShape::Sinc) => {
                positive("signal.bandwidth_hz", b)?;
                (b, signal::sinc_width_for_bandwidth(b))
            }
            (None, Some(w), PulseShape::Sinc) => {
                positive("signal.width_s", w)?;
                (signal::sinc_bandwidth(w), w)
            }
            (Some(b), None, PulseShape::Gaussian) => {
                positive("signal.bandwidth_hz", b)?;
                (b, 1.0 / (PI * b))
            }
            (None, Some(t0), PulseShape::Gaussian) => {
                positive("signal.width_s", t0)?;
                (1.0 / (PI * t0), t0)
            }
            _ => {
                return Err(RunError::config(
                    "signal: exactly one of bandwidth_hz or width_s must be given",
                ))
            }
        };
        positive("signal.window_widths", s.window_widths)?;
        let grid = match s.dt_s {
            Some(dt) => {
                positive("signal.dt_s", dt)?;
                FrequencyGrid::new(s.n_samples, dt)
            }
            None => FrequencyGrid::with_window(s.n_samples, s.window_widths * width),
        }
        .map_err(|e| RunError::config(e.to_string()))?;
        Ok(SignalSpec {
            shape: s.shape,
            bandwidth,
            width,
            grid,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignalSpec {
    pub shape: PulseShape,
    /// Two-sided bandwidth `B` in Hz; the band edge is `Δω = πB`.
    pub bandwidth: f64,
    /// Sinc zero-to-zero width or Gaussian `t0`, seconds.
    pub width: f64,
    pub grid: FrequencyGrid,
}

impl SignalSpec {
    pub fn pulse(&self, lambda0: f64) -> dispcomp_core::Result<Envelope> {
        let e = match self.shape {
            PulseShape::Sinc => signal::make_sinc_pulse(&self.grid, self.width, 1.0)?,
            PulseShape::Gaussian => signal::make_gaussian_pulse(&self.grid, self.width, 1.0)?,
        };
        e.with_carrier(lambda0)
    }

    pub fn band_edge(&self) -> f64 {
        PI * self.bandwidth
    }
}

/// Validated configuration in SI units.
#[derive(Debug, Clone, PartialEq)]
pub struct Resolved {
    pub scenario: String,
    pub lambda0: f64,
    pub fiber: FiberParams,
    pub pcf_beta2: f64,
    pub pcf_quoted_beta2: Option<f64>,
    pub dcf_beta2: Option<f64>,
    pub dcf_quoted_path_m: Option<f64>,
    /// Ascending, deduplicated.
    pub alphas: Vec<f64>,
    /// Ascending, deduplicated.
    pub ks: Vec<usize>,
    pub gain: Option<f64>,
    pub target_broadening: f64,
    pub match_higher_orders: bool,
    pub signal: SignalSpec,
    /// Ascending, deduplicated.
    pub xi: Vec<f64>,
    pub region_bandwidths: Vec<f64>,
    pub region_z_max_m: Option<f64>,
    pub region_z_points: usize,
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"{
        "scenario": "t",
        "fiber": {"beta2_ps2_km": -21, "length_km": 130},
        "pcf": {"d_ps_nm_km": 2200},
        "compensator": {"alpha": [1.0, 0.5]},
        "signal": {"shape": "sinc", "bandwidth_hz": 3e9}
    }"#;

    #[test]
    fn base_config_resolves_with_defaults() {
        let r = ExperimentConfig::from_json(BASE).unwrap().resolve().unwrap();
        assert_eq!(r.alphas, vec![0.5, 1.0]);
        assert_eq!(r.ks, (0..=12).collect::<Vec<_>>());
        assert_eq!(r.signal.grid.n_samples(), 1 << 14);
        assert!((r.signal.grid.window() - 64.0 * 2.0 / 3e9).abs() < 1e-18);
        assert!((r.fiber.beta2() + 21e-27).abs() < 1e-40);
        assert_eq!(r.lambda0, 1550e-9);
        assert_eq!(r.xi, vec![0.5, 1.0, 2.0]);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = BASE.replace("\"length_km\"", "\"lenght_km\": 1, \"length_km\"");
        let err = ExperimentConfig::from_json(&text).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("lenght_km"));
    }

    #[test]
    fn both_d_and_beta2_rejected() {
        let text = BASE.replace("\"beta2_ps2_km\": -21", "\"beta2_ps2_km\": -21, \"d_ps_nm_km\": 17");
        let err = ExperimentConfig::from_json(&text).unwrap().resolve().unwrap_err();
        assert!(err.to_string().contains("exactly one"));
    }

    #[test]
    fn both_bandwidth_and_width_rejected() {
        let text = BASE.replace("\"bandwidth_hz\": 3e9", "\"bandwidth_hz\": 3e9, \"width_s\": 1e-9");
        assert!(ExperimentConfig::from_json(&text).unwrap().resolve().is_err());
    }

    #[test]
    fn bad_alpha_and_sign_rejected() {
        let text = BASE.replace("[1.0, 0.5]", "[1.5]");
        assert!(ExperimentConfig::from_json(&text).unwrap().resolve().is_err());
        let text = BASE.replace("\"d_ps_nm_km\": 2200", "\"d_ps_nm_km\": -250");
        assert!(ExperimentConfig::from_json(&text).unwrap().resolve().is_err());
    }

    #[test]
    fn gaussian_width_maps_to_bandwidth() {
        let text = BASE.replace(
            "\"shape\": \"sinc\", \"bandwidth_hz\": 3e9",
            "\"shape\": \"gaussian\", \"width_s\": 100e-12",
        );
        let r = ExperimentConfig::from_json(&text).unwrap().resolve().unwrap();
        assert!((r.signal.bandwidth - 1.0 / (PI * 100e-12)).abs() < 1.0);
    }
}
