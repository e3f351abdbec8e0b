//! Command-line surface. `main` only parses arguments and maps errors to
//! exit codes; everything else lives here so it can be driven in-process.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use dispcomp_core::fiber::{beta2_from_ps2_per_km, beta2_to_d, beta2_to_ps2_per_km, d_to_beta2, PS_PER_NM_KM};
use dispcomp_core::signal::WIDTH_METRIC;

use crate::config::{ExperimentConfig, Resolved};
use crate::error::{RunError, RunResult};
use crate::output::{num, write_json, write_text};
use crate::runs::{envelope_csv, run_propagate, run_region, run_scenario, run_sweep, sweep_csv};

#[derive(Debug, Parser)]
#[command(name = "dispcomp", version, about = "Iterative fiber dispersion compensator experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Experiment configuration (JSON).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Output directory; overrides the config's output.dir.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    /// Worker threads for independent jobs.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,

    /// Reserved; every experiment is deterministic.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Convert between D (ps/nm/km) and beta2 (ps^2/km).
    Convert(ConvertArgs),
    /// Stability boundary z_max(B) per alpha (region.csv, region_table.csv).
    Region,
    /// Broadening factor versus number of stages (sweep.csv).
    #[command(name = "sweep-k")]
    SweepK,
    /// Worked single-channel example (scenario.json).
    Scenario,
    /// Dump the pulse before/after the fiber as CSV.
    Propagate(PropagateArgs),
}

#[derive(Debug, Args)]
pub struct ConvertArgs {
    /// Dispersion coefficient in ps/nm/km.
    #[arg(long, allow_hyphen_values = true, conflicts_with = "beta2")]
    pub d: Option<f64>,

    /// Group-velocity dispersion in ps^2/km.
    #[arg(long, allow_hyphen_values = true)]
    pub beta2: Option<f64>,

    /// Carrier wavelength in meters.
    #[arg(long, default_value_t = 1550e-9)]
    pub lambda: f64,

    /// A quoted beta2 (ps^2/km) to compare with the converted value.
    #[arg(long, allow_hyphen_values = true)]
    pub quoted_beta2: Option<f64>,
}

#[derive(Debug, Args)]
pub struct PropagateArgs {
    /// Also write the output of a K-stage compensator (first alpha).
    #[arg(long)]
    pub k: Option<usize>,
}

#[derive(Debug, Serialize)]
struct SiSummary {
    lambda0_m: f64,
    fiber_length_m: f64,
    fiber_betas: Vec<f64>,
    pcf_beta2_s2_per_m: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    dcf_beta2_s2_per_m: Option<f64>,
    alphas: Vec<f64>,
    #[serde(rename = "K")]
    ks: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    gain: Option<f64>,
    target_broadening: f64,
    bandwidth_hz: f64,
    pulse_width_s: f64,
    n_samples: usize,
    dt_s: f64,
    window_s: f64,
    xi: Vec<f64>,
}

impl SiSummary {
    fn new(r: &Resolved) -> Self {
        let g = r.signal.grid;
        Self {
            lambda0_m: r.lambda0,
            fiber_length_m: r.fiber.length_m(),
            fiber_betas: r.fiber.betas().to_vec(),
            pcf_beta2_s2_per_m: r.pcf_beta2,
            dcf_beta2_s2_per_m: r.dcf_beta2,
            alphas: r.alphas.clone(),
            ks: r.ks.clone(),
            gain: r.gain,
            target_broadening: r.target_broadening,
            bandwidth_hz: r.signal.bandwidth,
            pulse_width_s: r.signal.width,
            n_samples: g.n_samples(),
            dt_s: g.dt(),
            window_s: g.window(),
            xi: r.xi.clone(),
        }
    }
}

#[derive(Debug, Serialize)]
struct Meta<'a> {
    command: &'a str,
    version: &'a str,
    config: &'a ExperimentConfig,
    si: SiSummary,
    width_metric: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    jobs: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    outputs: Vec<&'a str>,
}

struct Loaded {
    config: ExperimentConfig,
    resolved: Resolved,
    out_dir: PathBuf,
}

fn load(cli: &Cli) -> RunResult<Loaded> {
    let path = cli
        .config
        .as_deref()
        .ok_or_else(|| RunError::config("this command needs --config <path>"))?;
    let config = ExperimentConfig::load(path)?;
    let resolved = config.resolve()?;
    let out_dir = match (&cli.out, &config.output.dir) {
        (Some(out), _) => out.clone(),
        (None, Some(dir)) => PathBuf::from(dir),
        (None, None) => PathBuf::from("out"),
    };
    Ok(Loaded {
        config,
        resolved,
        out_dir,
    })
}

fn write_meta(cli: &Cli, loaded: &Loaded, command: &str, outputs: Vec<&str>) -> RunResult<PathBuf> {
    let meta = Meta {
        command,
        version: env!("CARGO_PKG_VERSION"),
        config: &loaded.config,
        si: SiSummary::new(&loaded.resolved),
        width_metric: WIDTH_METRIC,
        jobs: cli.jobs,
        seed: cli.seed,
        outputs,
    };
    write_json(&loaded.out_dir, "meta.json", &meta)
}

pub fn execute(cli: &Cli, out: &mut impl Write) -> RunResult<()> {
    match &cli.command {
        Command::Convert(args) => convert(args, out),
        Command::Region => {
            let loaded = load(cli)?;
            let region = run_region(&loaded.resolved)?;
            let dir = &loaded.out_dir;
            let p = write_text(dir, "region.csv", &region.csv())?;
            write_text(dir, "region_table.csv", &region.table_csv(&loaded.resolved.region_bandwidths))?;
            write_meta(cli, &loaded, "region", vec!["region.csv", "region_table.csv"])?;
            report(out, format!("wrote {} ({} rows)", p.display(), region.rows.len()))
        }
        Command::SweepK => {
            let loaded = load(cli)?;
            let rows = run_sweep(&loaded.resolved, cli.jobs)?;
            for row in rows.iter().filter(|r| r.stage.ambiguous_width) {
                eprintln!(
                    "warning: ambiguous half-maximum crossings at xi={} alpha={} K={}",
                    row.xi, row.alpha, row.stage.k
                );
            }
            let diverged = rows.iter().filter(|r| r.stage.broadening_factor.is_none()).count();
            let p = write_text(&loaded.out_dir, "sweep.csv", &sweep_csv(&rows))?;
            write_meta(cli, &loaded, "sweep-k", vec!["sweep.csv"])?;
            report(
                out,
                format!("wrote {} ({} rows, {} flagged diverged)", p.display(), rows.len(), diverged),
            )
        }
        Command::Scenario => {
            let loaded = load(cli)?;
            let report_json = run_scenario(&loaded.resolved, cli.jobs)?;
            let p = write_json(&loaded.out_dir, "scenario.json", &report_json)?;
            write_meta(cli, &loaded, "scenario", vec!["scenario.json"])?;
            let text = serde_json::to_string_pretty(&report_json).expect("serializable");
            report(out, format!("{text}\nwrote {}", p.display()))
        }
        Command::Propagate(args) => {
            let loaded = load(cli)?;
            let run = run_propagate(&loaded.resolved, args.k)?;
            let dir = &loaded.out_dir;
            write_text(dir, "before.csv", &envelope_csv(&run.before))?;
            write_text(dir, "after.csv", &envelope_csv(&run.after))?;
            let mut outputs = vec!["before.csv", "after.csv"];
            if let Some(c) = &run.compensated {
                write_text(dir, "compensated.csv", &envelope_csv(c))?;
                outputs.push("compensated.csv");
            }
            write_meta(cli, &loaded, "propagate", outputs)?;
            report(out, format!("wrote envelopes to {}", display_dir(dir)))
        }
    }
}

fn display_dir(dir: &Path) -> String {
    dir.display().to_string()
}

fn report(out: &mut impl Write, text: String) -> RunResult<()> {
    writeln!(out, "{text}").map_err(|source| RunError::Io {
        path: PathBuf::from("<stdout>"),
        source,
    })
}

fn convert(args: &ConvertArgs, out: &mut impl Write) -> RunResult<()> {
    if !(args.lambda.is_finite() && args.lambda > 0.0) {
        return Err(RunError::config(format!("--lambda must be positive, got {}", args.lambda)));
    }
    let beta2 = match (args.d, args.beta2) {
        (Some(d), None) if d.is_finite() => d_to_beta2(d, args.lambda),
        (None, Some(b)) if b.is_finite() => beta2_from_ps2_per_km(b),
        (None, None) => return Err(RunError::config("convert needs --d or --beta2")),
        _ => return Err(RunError::config("convert values must be finite")),
    };
    let d = match args.d {
        Some(d) => d,
        None => beta2_to_d(beta2, args.lambda),
    };
    let beta2_ps2 = beta2_to_ps2_per_km(beta2);
    let mut text = String::new();
    text.push_str(&format!("lambda0  {} m\n", num(args.lambda)));
    text.push_str(&format!("D        {} ps/nm/km    {} s/m^2\n", num(d), num(d * PS_PER_NM_KM)));
    text.push_str(&format!("beta2    {} ps^2/km     {} s^2/m\n", num(beta2_ps2), num(beta2)));
    if let Some(quoted) = args.quoted_beta2 {
        let rel = (beta2_ps2 - quoted) / quoted;
        text.push_str(&format!(
            "quoted   {} ps^2/km     derived differs by {:+.2}% (D = -(2*pi*c/lambda0^2)*beta2)\n",
            num(quoted),
            100.0 * rel
        ));
    }
    out.write_all(text.as_bytes()).map_err(|source| RunError::Io {
        path: PathBuf::from("<stdout>"),
        source,
    })
}
