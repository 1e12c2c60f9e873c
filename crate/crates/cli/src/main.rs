// Copyright 2026 The gsp Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

//! Command-line front end: simulate, estimate, decode and Monte Carlo runs.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use gsp_core::decode::{decode_pairs, export_decoded_csv, map_accuracy};
use gsp_core::estimate::{estimate, Bandwidth, EstimateOptions, EstimationReport, Method};
use gsp_core::harness::{run_and_export, ExperimentConfig};
use gsp_core::simulate::{
    read_series_csv, simulate_observed, simulate_reference, write_trajectory_csv, Scenario,
};

#[derive(Parser)]
#[command(name = "gsp", version, about = "Gold-standard poisoning model: simulation and estimation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    D,
    S,
    Both,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::D => Method::D,
            MethodArg::S => Method::S,
            MethodArg::Both => Method::Both,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one trajectory and write it as `z.csv`.
    Simulate {
        /// Preset name or path to a scenario JSON file.
        #[arg(long)]
        scenario: String,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "simulate_out")]
        out: PathBuf,
    },
    /// Simulate a trajectory and its reference sample, then estimate.
    Estimate {
        #[arg(long)]
        scenario: String,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum, default_value = "d")]
        method: MethodArg,
        /// Clip the plug-in distribution function to [0, 1] and make it monotone.
        #[arg(long)]
        clamp_f1: bool,
        #[arg(long, default_value_t = gsp_core::empirical::DEFAULT_GRID_SIZE)]
        grid_size: usize,
        /// Kernel bandwidth; Silverman's rule when omitted.
        #[arg(long)]
        bandwidth: Option<f64>,
        #[arg(long, default_value = "estimate_out")]
        out: PathBuf,
    },
    /// Posterior labels of non-overlapping pairs from an estimate report.
    Decode {
        #[arg(long)]
        report: PathBuf,
        /// Series CSV with a `z` column (and optionally hidden labels `x`).
        #[arg(long)]
        trajectory: PathBuf,
        /// Start pairing at index 0 or 1.
        #[arg(long, default_value_t = 0)]
        offset: usize,
        #[arg(long, default_value = "decoded.csv")]
        out: PathBuf,
    },
    /// Run a Monte Carlo experiment from a JSON config.
    Montecarlo {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        workers: Option<usize>,
    },
}

fn scenario_from_args(name: &str, n: Option<usize>, seed: Option<u64>) -> Result<Scenario> {
    let mut s = Scenario::resolve(name).with_context(|| format!("loading scenario `{name}`"))?;
    if let Some(n) = n {
        s = s.with_n(n);
    }
    if let Some(seed) = seed {
        s = s.with_seed(seed);
    }
    s.validate()?;
    Ok(s)
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate { scenario, n, seed, out } => {
            let s = scenario_from_args(&scenario, n, seed)?;
            create_dir(&out)?;
            let traj = simulate_observed(&s);
            write_trajectory_csv(&traj, out.join("z.csv"))?;
            std::fs::write(out.join("scenario.json"), s.to_json())?;
            println!("wrote {} observations to {}", traj.z.len(), out.display());
        }
        Command::Estimate {
            scenario,
            n,
            seed,
            method,
            clamp_f1,
            grid_size,
            bandwidth,
            out,
        } => {
            let s = scenario_from_args(&scenario, n, seed)?;
            let options = EstimateOptions {
                method: method.into(),
                clamp_f1,
                grid_size,
                bandwidth: bandwidth.map_or(Bandwidth::Auto, Bandwidth::Fixed),
                ..Default::default()
            };
            let traj = simulate_observed(&s);
            let refs = simulate_reference(&s);
            let report = estimate(&traj.z, &refs, &s.gold_law(), &options)?;
            create_dir(&out)?;
            write_trajectory_csv(&traj, out.join("z.csv"))?;
            report.f1_curve.export_csv(out.join("f1_cdf.csv"))?;
            report.f1_density.export_csv(out.join("f1_density.csv"))?;
            std::fs::write(out.join("report.json"), serde_json::to_string_pretty(&report)?)?;
            std::fs::write(out.join("scenario.json"), s.to_json())?;
            let t = report.theta_hat;
            println!("theta_hat = ({:.4}, {:.4}) via {:?}", t.alpha, t.beta, report.solver_path);
            if let Some(t) = report.theta_tilde {
                println!("theta_tilde = ({:.4}, {:.4})", t.alpha, t.beta);
            }
            println!("truth = ({}, {}); outputs in {}", s.theta.alpha, s.theta.beta, out.display());
        }
        Command::Decode {
            report,
            trajectory,
            offset,
            out,
        } => {
            let text = std::fs::read_to_string(&report)
                .with_context(|| format!("reading {}", report.display()))?;
            let rep: EstimationReport = serde_json::from_str(&text)
                .with_context(|| format!("parsing {}", report.display()))?;
            let (z, labels) = read_series_csv(&trajectory)?;
            let decoded = decode_pairs(&rep.theta_hat, &rep.f1_density, &rep.gold_law, &z, offset)?;
            export_decoded_csv(&decoded, &out)?;
            let undecided = decoded.iter().filter(|d| d.posterior.is_none()).count();
            println!("decoded {} pairs ({undecided} undecidable) into {}", decoded.len(), out.display());
            if let Some(x) = labels {
                if x.len() != z.len() {
                    bail!("label column length {} differs from series length {}", x.len(), z.len());
                }
                println!("MAP accuracy against hidden labels: {:.4}", map_accuracy(&decoded, &x));
            }
        }
        Command::Montecarlo { config, out, workers } => {
            let mut cfg = ExperimentConfig::from_json_file(&config)?;
            if workers.is_some() {
                cfg.workers = workers;
            }
            let dir = out
                .or_else(|| cfg.outputs.clone())
                .unwrap_or_else(|| PathBuf::from("montecarlo_out"));
            cfg.validate()?;
            let (report, manifest) = run_and_export(&cfg, &dir)?;
            for s in &report.summaries {
                println!(
                    "{} n={:>6} {:>4} ok {:>3} failed  alpha bias {:+.4} std {:.4}  beta bias {:+.4} std {:.4}",
                    s.method.name(),
                    s.n,
                    s.count,
                    s.failures,
                    s.bias[0],
                    s.std[0],
                    s.bias[1],
                    s.std[1]
                );
            }
            println!("manifest: {}", manifest.display());
        }
    }
    Ok(())
}

fn main() {
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
