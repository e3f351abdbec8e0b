//! The experiment runs behind each CLI subcommand.
//!
//! Every run is a pure function of the resolved configuration; independent
//! jobs execute on a rayon pool and results are ordered by sort key.

use rayon::prelude::*;
use serde::Serialize;

use dispcomp_core::compensator::{compensate, matched_subsystem, residual_max, CompensatorSpec, SubsystemSpec};
use dispcomp_core::convergence::{
    edge_phase, length_for_xi, region_table, xi, z_max, RegionQuery, RegionTable, StabilityModel,
};
use dispcomp_core::fiber::{beta2_to_d, beta2_to_ps2_per_km, propagate, FiberParams};
use dispcomp_core::signal::{broadening_factor, Envelope, WIDTH_METRIC};

use crate::config::Resolved;
use crate::error::{RunError, RunResult};
use crate::output::{num, Csv};

pub const REGION_HEADER: &str = "B_hz,z_max_m,alpha,beta2_si";
pub const REGION_TABLE_HEADER: &str = "B_hz,z_m,alpha,stable";
pub const SWEEP_HEADER: &str = "xi,alpha,K,broadening_factor,residual_max";
pub const ENVELOPE_HEADER: &str = "t_s,re,im";

/// Runs `f` on a pool of `jobs` threads (all cores when `None`).
pub fn with_pool<T: Send>(jobs: Option<usize>, f: impl FnOnce() -> T + Send) -> RunResult<T> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = jobs {
        if n == 0 {
            return Err(RunError::config("--jobs must be >= 1"));
        }
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| RunError::config(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(f))
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegionRow {
    pub bandwidth: f64,
    pub z_max: f64,
    pub alpha: f64,
    pub beta2: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegionOutput {
    /// Ordered by bandwidth, then α.
    pub rows: Vec<RegionRow>,
    pub z_grid: Vec<f64>,
    /// One table per α, ascending.
    pub tables: Vec<(f64, RegionTable)>,
}

impl RegionOutput {
    pub fn csv(&self) -> String {
        let mut csv = Csv::with_header(REGION_HEADER);
        for r in &self.rows {
            csv.row([num(r.bandwidth), num(r.z_max), num(r.alpha), num(r.beta2)]);
        }
        csv.as_str().to_owned()
    }

    /// Stability of every `(B, z)` cell, ordered by B, then z, then α.
    pub fn table_csv(&self, bandwidths: &[f64]) -> String {
        let mut csv = Csv::with_header(REGION_TABLE_HEADER);
        for (i, b) in bandwidths.iter().enumerate() {
            for (j, z) in self.z_grid.iter().enumerate() {
                for (alpha, t) in &self.tables {
                    csv.row([num(*b), num(*z), num(*alpha), u8::from(t.stable[i][j]).to_string()]);
                }
            }
        }
        csv.as_str().to_owned()
    }
}

pub fn run_region(r: &Resolved) -> RunResult<RegionOutput> {
    let beta2 = r.fiber.beta2();
    let bandwidths = &r.region_bandwidths;
    let mut rows = Vec::with_capacity(bandwidths.len() * r.alphas.len());
    for &b in bandwidths {
        for &alpha in &r.alphas {
            rows.push(RegionRow {
                bandwidth: b,
                z_max: z_max(b, alpha, beta2)?,
                alpha,
                beta2,
            });
        }
    }
    let z_top = match r.region_z_max_m {
        Some(z) => z,
        None => {
            let widest = rows.iter().map(|row| row.z_max).fold(0.0, f64::max);
            1.25 * widest
        }
    };
    let n = r.region_z_points;
    let z_grid: Vec<f64> = (1..=n).map(|j| z_top * j as f64 / n as f64).collect();
    let tables = r
        .alphas
        .iter()
        .map(|&alpha| {
            let q = RegionQuery::new(alpha, beta2, bandwidths.clone(), z_grid.clone())?;
            Ok((alpha, region_table(&q)))
        })
        .collect::<dispcomp_core::Result<Vec<_>>>()?;
    Ok(RegionOutput { rows, z_grid, tables })
}

fn compensator_for(r: &Resolved, sub: &SubsystemSpec, k: usize) -> RunResult<CompensatorSpec> {
    let spec = CompensatorSpec::new(sub.clone(), k);
    Ok(match r.gain {
        Some(g) => spec.with_gain(g)?,
        None => spec,
    })
}

/// Outcome of compensating one received pulse with a `K`-stage cascade.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StageResult {
    #[serde(rename = "K")]
    pub k: usize,
    /// `None` when the cascade diverges over the signal band.
    pub broadening_factor: Option<f64>,
    pub residual_max: f64,
    pub ambiguous_width: bool,
}

/// Propagates the configured pulse over `fiber`, then compensates it with
/// every configured `K` at attenuation `alpha`.
fn simulate_stages(
    r: &Resolved,
    tx: &Envelope,
    rx: &Envelope,
    fiber: &FiberParams,
    alpha: f64,
) -> RunResult<Vec<StageResult>> {
    let bandwidth = r.signal.bandwidth;
    let stable = StabilityModel::new(alpha, fiber)?.stable(bandwidth, fiber.length_m())?;
    let sub = matched_subsystem(fiber, r.pcf_beta2, alpha, r.match_higher_orders)?;
    let grid = r.signal.grid;
    r.ks.iter()
        .map(|&k| {
            let spec = compensator_for(r, &sub, k)?;
            let residual = residual_max(&spec, &grid, r.signal.band_edge())?;
            if !stable {
                return Ok(StageResult {
                    k,
                    broadening_factor: None,
                    residual_max: residual,
                    ambiguous_width: false,
                });
            }
            let out = compensate(rx, &spec)?;
            let b = broadening_factor(tx, &out)?;
            Ok(StageResult {
                k,
                broadening_factor: Some(b.factor),
                residual_max: residual,
                ambiguous_width: b.ambiguous,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub xi: f64,
    pub alpha: f64,
    pub stage: StageResult,
}

/// Broadening factor versus number of stages for every `(ξ, α)` pair.
pub fn run_sweep(r: &Resolved, jobs: Option<usize>) -> RunResult<Vec<SweepRow>> {
    let tx = r.signal.pulse(r.lambda0)?;
    let pairs: Vec<(f64, f64)> = r
        .xi
        .iter()
        .flat_map(|&x| r.alphas.iter().map(move |&a| (x, a)))
        .collect();
    let beta2 = r.fiber.beta2();
    let bandwidth = r.signal.bandwidth;
    let per_pair = with_pool(jobs, || {
        pairs
            .par_iter()
            .map(|&(x, alpha)| {
                let fiber = r.fiber.with_length(length_for_xi(x, beta2, bandwidth))?;
                let rx = propagate(&tx, &fiber)?;
                let stages = simulate_stages(r, &tx, &rx, &fiber, alpha)?;
                Ok(stages
                    .into_iter()
                    .map(|stage| SweepRow { xi: x, alpha, stage })
                    .collect::<Vec<_>>())
            })
            .collect::<RunResult<Vec<_>>>()
    })??;
    Ok(per_pair.into_iter().flatten().collect())
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut csv = Csv::with_header(SWEEP_HEADER);
    for row in rows {
        let bf = match row.stage.broadening_factor {
            Some(b) => num(b),
            None => "diverged".to_owned(),
        };
        csv.row([num(row.xi), num(row.alpha), row.stage.k.to_string(), bf, num(row.stage.residual_max)]);
    }
    csv.as_str().to_owned()
}

/// A reported number with its unit and the formula that produced it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Quantity {
    pub value: f64,
    pub unit: &'static str,
    pub formula: &'static str,
}

fn q(value: f64, unit: &'static str, formula: &'static str) -> Quantity {
    Quantity { value, unit, formula }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlphaReport {
    pub alpha: f64,
    pub z_max: Quantity,
    pub stable: bool,
    pub stages: Vec<StageResult>,
    /// Smallest configured K reaching the target broadening.
    #[serde(rename = "required_K")]
    pub required_k: Option<usize>,
    /// `K·L` for the required K.
    pub compensator_path: Option<Quantity>,
    /// `K·L·β₁` for the required K.
    pub compensator_latency: Option<Quantity>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DcfReport {
    pub beta2: Quantity,
    pub d: Quantity,
    pub path: Quantity,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub quoted_path: Option<Quantity>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PcfReport {
    pub beta2: Quantity,
    pub beta2_ps2_km: Quantity,
    pub d: Quantity,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub quoted_beta2_ps2_km: Option<Quantity>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub quoted_relative_discrepancy: Option<Quantity>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioReport {
    pub scenario: String,
    pub width_metric: &'static str,
    pub bandwidth: Quantity,
    pub length: Quantity,
    pub fiber_beta2: Quantity,
    pub fiber_d: Quantity,
    pub xi: Quantity,
    pub edge_phase: Quantity,
    pub pcf: PcfReport,
    pub matched_length: Quantity,
    pub target_broadening: f64,
    pub uncompensated_broadening: Quantity,
    pub per_alpha: Vec<AlphaReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dcf: Option<DcfReport>,
}

pub fn run_scenario(r: &Resolved, jobs: Option<usize>) -> RunResult<ScenarioReport> {
    let fiber = &r.fiber;
    let beta2 = fiber.beta2();
    let z = fiber.length_m();
    let b = r.signal.bandwidth;
    let tx = r.signal.pulse(r.lambda0)?;
    let rx = propagate(&tx, fiber)?;
    let uncompensated = broadening_factor(&tx, &rx)?.factor;
    let sub = matched_subsystem(fiber, r.pcf_beta2, r.alphas[0], r.match_higher_orders)?;
    let l = sub.length_m();

    let per_alpha = with_pool(jobs, || {
        r.alphas
            .par_iter()
            .map(|&alpha| {
                let stages = simulate_stages(r, &tx, &rx, fiber, alpha)?;
                let stable = StabilityModel::new(alpha, fiber)?.stable(b, z)?;
                let required_k = stages
                    .iter()
                    .find(|s| s.broadening_factor.is_some_and(|f| f <= r.target_broadening))
                    .map(|s| s.k);
                Ok(AlphaReport {
                    alpha,
                    z_max: q(z_max(b, alpha, beta2)?, "m", "2*acos(sqrt(alpha)/2)/(|beta2_fib|*(pi*B)^2)"),
                    stable,
                    stages,
                    required_k,
                    compensator_path: required_k.map(|k| q(k as f64 * l, "m", "K*L")),
                    compensator_latency: required_k.map(|k| q(k as f64 * l * fiber.beta(1), "s", "K*L*beta1")),
                })
            })
            .collect::<RunResult<Vec<_>>>()
    })??;

    let pcf_ps2 = beta2_to_ps2_per_km(r.pcf_beta2);
    let pcf = PcfReport {
        beta2: q(r.pcf_beta2, "s^2/m", "beta2 = -D*lambda0^2/(2*pi*c)"),
        beta2_ps2_km: q(pcf_ps2, "ps^2/km", "beta2 = -D*lambda0^2/(2*pi*c)"),
        d: q(beta2_to_d(r.pcf_beta2, r.lambda0), "ps/nm/km", "D = -(2*pi*c/lambda0^2)*beta2"),
        quoted_beta2_ps2_km: r
            .pcf_quoted_beta2
            .map(|v| q(beta2_to_ps2_per_km(v), "ps^2/km", "configured quoted value")),
        quoted_relative_discrepancy: r
            .pcf_quoted_beta2
            .map(|v| q((r.pcf_beta2 - v) / v, "1", "(beta2_derived - beta2_quoted)/beta2_quoted")),
    };

    let dcf = r.dcf_beta2.map(|d_b2| DcfReport {
        beta2: q(d_b2, "s^2/m", "beta2 = -D*lambda0^2/(2*pi*c)"),
        d: q(beta2_to_d(d_b2, r.lambda0), "ps/nm/km", "D = -(2*pi*c/lambda0^2)*beta2"),
        path: q(z * beta2.abs() / d_b2.abs(), "m", "z*|beta2_fib|/|beta2_dcf|"),
        quoted_path: r.dcf_quoted_path_m.map(|p| q(p, "m", "configured quoted value")),
    });

    Ok(ScenarioReport {
        scenario: r.scenario.clone(),
        width_metric: WIDTH_METRIC,
        bandwidth: q(b, "Hz", "B = max|dw|/pi"),
        length: q(z, "m", "z"),
        fiber_beta2: q(beta2, "s^2/m", "beta2_fib"),
        fiber_d: q(beta2_to_d(beta2, r.lambda0), "ps/nm/km", "D = -(2*pi*c/lambda0^2)*beta2"),
        xi: q(xi(beta2, z, b), "1", "|beta2_fib|*z*(2*pi*B)^2"),
        edge_phase: q(edge_phase(beta2, z, b), "rad", "|beta2_fib|*z*(pi*B)^2/2"),
        pcf,
        matched_length: q(l, "m", "L = beta2_fib*z/beta2_pcf"),
        target_broadening: r.target_broadening,
        uncompensated_broadening: q(uncompensated, "1", "fwhm(rx)/fwhm(tx), no compensator"),
        per_alpha,
        dcf,
    })
}

pub fn envelope_csv(e: &Envelope) -> String {
    let mut csv = Csv::with_header(ENVELOPE_HEADER);
    let g = e.grid();
    for (i, s) in e.samples().iter().enumerate() {
        csv.row([num(g.time(i)), num(s.re), num(s.im)]);
    }
    csv.as_str().to_owned()
}

#[derive(Debug, Clone, PartialEq)]
pub struct PropagateOutput {
    pub before: Envelope,
    pub after: Envelope,
    /// Present when a stage count was requested.
    pub compensated: Option<Envelope>,
}

/// Debug run: the configured pulse before and after the fiber and,
/// optionally, after a `k`-stage compensator at the first configured α.
pub fn run_propagate(r: &Resolved, k: Option<usize>) -> RunResult<PropagateOutput> {
    let before = r.signal.pulse(r.lambda0)?;
    let after = propagate(&before, &r.fiber)?;
    let compensated = match k {
        Some(k) => {
            let sub = matched_subsystem(&r.fiber, r.pcf_beta2, r.alphas[0], r.match_higher_orders)?;
            Some(compensate(&after, &compensator_for(r, &sub, k)?)?)
        }
        None => None,
    };
    Ok(PropagateOutput {
        before,
        after,
        compensated,
    })
}
