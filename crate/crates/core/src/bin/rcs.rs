//! Command-line front end.
//!
//! Exit codes: 0 success / check passed, 1 checked condition failed,
//! 2 usage or configuration error, 3 numerical abort.

use clap::{ArgGroup, Parser, Subcommand};
use rcs_lab::climit::c_scan;
use rcs_lab::config::{parse_config, serialize_config, RunConfig};
use rcs_lab::diagnostics::{flocking_certificate, DiagnosticsSeries, FlockingCertificate};
use rcs_lab::dynamics::ModelKind;
use rcs_lab::error::Error;
use rcs_lab::integrator::simulate;
use rcs_lab::meanfield::{
    kinetic_limit_scan, meanfield_convergence_scan, sample_cloud, wasserstein1_exact, PointCloud6D,
};
use rcs_lab::output::{
    config_hash, read_trajectory_csv, report_to_string, write_report_json, write_trajectory_csv,
    RunManifest,
};
use rcs_lab::vec3::Vec3;
use serde::Serialize;
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(name = "rcs", version, about = "Relativistic flocking simulation lab")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate the configured scenario and persist trajectory + diagnostics
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Override the model from the config file
        #[arg(long)]
        model: Option<String>,
        /// Existing output directory
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Evaluate the flocking certificate for the configured initial data
    FlockCert {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Classical-limit deviation scan over a ladder of c values
    Climit {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated c values, at least 3
        #[arg(long, value_delimiter = ',')]
        c_list: Vec<f64>,
        /// Perturbation amplitude K (overrides scan.k)
        #[arg(long)]
        k: Option<f64>,
        /// Report file; stdout when omitted
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Kinetic Wasserstein scan (--c-list) or mean-field N-ladder (--n-list)
    #[command(group(ArgGroup::new("ladder").required(true).args(["c_list", "n_list"])))]
    MeanfieldScan {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_delimiter = ',')]
        c_list: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',')]
        n_list: Option<Vec<usize>>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Print the structural constants at a momentum bound W
    Constants {
        #[arg(long)]
        config: PathBuf,
        #[arg(long = "W", visible_alias = "w")]
        w: f64,
        /// Reference diameter for lambda (overrides dx_inf)
        #[arg(long)]
        dx_inf: Option<f64>,
    },
    /// Exact W1 between matched samples of two trajectory CSV files
    Wasserstein {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
    },
}

fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config { .. } | Error::Io(_) | Error::Domain(_) | Error::Superluminal { .. } | Error::Mismatch(_) => 2,
        Error::Uncertified(_) => 1,
        Error::NonFiniteState { .. } | Error::NonpositiveLog { .. } | Error::Json(_) => 3,
    }
}

fn main() {
    let cli = Cli::parse();
    let code = match run(cli.command) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            exit_code(&err)
        }
    };
    std::process::exit(code);
}

fn load(config: &Path, seed: Option<u64>) -> Result<(RunConfig, String), Error> {
    let mut cfg = parse_config(config)?;
    if let Some(seed) = seed {
        cfg.sim.seed = seed;
    }
    let echo = serialize_config(&cfg);
    Ok((cfg, echo))
}

fn emit(text: String, out: Option<&Path>) -> Result<(), Error> {
    match out {
        Some(path) => std::fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn run(command: Command) -> Result<i32, Error> {
    match command {
        Command::Simulate { config, model, out, seed } => {
            let (mut cfg, _) = load(&config, seed)?;
            match model.as_deref() {
                None => {}
                Some("rcs") => cfg.sim.model = ModelKind::Rcs,
                Some("cs") => cfg.sim.model = ModelKind::Cs,
                Some(other) => {
                    return Err(Error::Config {
                        key: "--model".into(),
                        message: format!("unknown model {other:?}; expected rcs or cs"),
                    })
                }
            }
            let echo = serialize_config(&cfg);
            if !out.is_dir() {
                return Err(Error::Config {
                    key: "--out".into(),
                    message: format!("{} is not an existing directory", out.display()),
                });
            }
            let cloud = sample_cloud(&cfg.scenario.measure, cfg.params.agents.len(), cfg.sim.seed);
            let init = cloud.to_state(0.0);
            let certificate = flocking_certificate(&init, &cfg.params).ok();
            let traj = simulate(&init, &cfg.params, &cfg.sim)?;
            let series = DiagnosticsSeries::from_trajectory(&traj)?;

            #[derive(Serialize)]
            struct SimulateReport {
                model: String,
                #[serde(skip_serializing_if = "Option::is_none")]
                certificate: Option<FlockingCertificate>,
                series: DiagnosticsSeries,
            }
            let report = SimulateReport {
                model: cfg.sim.model.to_string(),
                certificate,
                series,
            };

            let mut manifest = RunManifest::new(echo, cfg.sim.seed);
            let traj_path = out.join("trajectory.csv");
            write_trajectory_csv(&traj, &traj_path, &manifest.config_hash)?;
            manifest.record(&traj_path, "trajectory");
            let diag_path = out.join("diagnostics.json");
            write_report_json("diagnostics", &report, &diag_path, &manifest.config_hash)?;
            manifest.record(&diag_path, "diagnostics");
            manifest.finish(&out.join("manifest.json"))?;
            Ok(0)
        }

        Command::FlockCert { config, seed } => {
            let (cfg, echo) = load(&config, seed)?;
            let cloud = sample_cloud(&cfg.scenario.measure, cfg.params.agents.len(), cfg.sim.seed);
            let cert = flocking_certificate(&cloud.to_state(0.0), &cfg.params)?;
            print!("{}", report_to_string("flocking_certificate", &cert, &config_hash(&echo))?);
            Ok(if cert.satisfied { 0 } else { 1 })
        }

        Command::Climit { config, c_list, k, out, seed } => {
            let (cfg, echo) = load(&config, seed)?;
            let kk = k.unwrap_or(cfg.scenario.k);
            let cloud = sample_cloud(&cfg.scenario.measure, cfg.params.agents.len(), cfg.sim.seed);
            let result = c_scan(&cloud.to_state(0.0), &cfg.params, &cfg.sim, &c_list, kk, false)?;
            if !result.slope.is_finite() {
                // all-zero deviations leave the log-log fit undefined
                let text = report_to_string(
                    "climit_scan_degenerate",
                    &serde_json::json!({ "c_values": result.c_values, "sup_delta": result.sup_delta }),
                    &config_hash(&echo),
                )?;
                emit(text, out.as_deref())?;
                eprintln!("slope undefined: sup-deviation is zero across the scan");
                return Ok(1);
            }
            let text = report_to_string("climit_scan", &result, &config_hash(&echo))?;
            emit(text, out.as_deref())?;
            eprintln!("fitted slope: {:.4} (r^2 = {:.4})", result.slope, result.r_squared);
            let (lo, hi) = cfg.scenario.band_climit;
            Ok(if result.slope >= lo && result.slope <= hi { 0 } else { 1 })
        }

        Command::MeanfieldScan { config, c_list, n_list, out, seed } => {
            let (cfg, echo) = load(&config, seed)?;
            let hash = config_hash(&echo);
            if let Some(c_values) = c_list {
                let result = kinetic_limit_scan(
                    &cfg.scenario.measure,
                    cfg.params.agents.len(),
                    &c_values,
                    &cfg.params,
                    &cfg.sim,
                    cfg.sim.seed,
                    cfg.scenario.w1_stride,
                )?;
                let text = report_to_string("kinetic_limit_scan", &result, &hash)?;
                emit(text, out.as_deref())?;
                eprintln!("fitted slope: {:.4} (r^2 = {:.4})", result.slope, result.r_squared);
                let (lo, hi) = cfg.scenario.band_kinetic;
                let pass = result.slope >= lo && result.slope <= hi && result.coupling_bound_ok;
                Ok(if pass { 0 } else { 1 })
            } else {
                let n_values = n_list.expect("clap group guarantees one ladder flag");
                let result = meanfield_convergence_scan(
                    &cfg.scenario.measure,
                    &n_values,
                    &cfg.params,
                    &cfg.sim,
                    cfg.sim.seed,
                    cfg.scenario.w1_stride,
                )?;
                let text = report_to_string("meanfield_convergence_scan", &result, &hash)?;
                emit(text, out.as_deref())?;
                Ok(if result.decreasing_trend { 0 } else { 1 })
            }
        }

        Command::Constants { config, w, dx_inf } => {
            let (cfg, echo) = load(&config, None)?;
            if !(w >= 0.0 && w.is_finite()) {
                return Err(Error::Config {
                    key: "--W".into(),
                    message: format!("must be >= 0 and finite, got {w}"),
                });
            }
            let p = &cfg.params;
            let dx_inf = dx_inf.unwrap_or(cfg.scenario.dx_inf);
            let gamma = p.gamma_from_w(w, 0)?;
            let f = p.f_of_gamma(gamma, 0)?;
            let phi = p.kernel.eval(dx_inf)?;
            let lambda2 = p.lambda2(w, 0)?;
            let lambda = phi / p.t_star - 2.0 * lambda2 / (p.c * p.c * p.t_star);
            let report = serde_json::json!({
                "W": w,
                "gamma": gamma,
                "F": f,
                "lambda0": p.lambda0(w, 0)?,
                "lambda1": p.lambda1(w, 0)?,
                "lambda2": lambda2,
                "dx_inf": dx_inf,
                "lambda": lambda,
            });
            print!("{}", report_to_string("constants", &report, &config_hash(&echo))?);
            Ok(0)
        }

        Command::Wasserstein { a, b } => {
            let ta = read_trajectory_csv(&a)?;
            let tb = read_trajectory_csv(&b)?;
            if ta.times.len() != tb.times.len() {
                return Err(Error::Mismatch(format!(
                    "sample counts differ: {} vs {}",
                    ta.times.len(),
                    tb.times.len()
                )));
            }
            let mut w1 = Vec::with_capacity(ta.times.len());
            let mut sup = 0.0f64;
            for i in 0..ta.times.len() {
                let ca = cloud_at(&ta.x[i], &ta.w[i]);
                let cb = cloud_at(&tb.x[i], &tb.w[i]);
                let (d, _) = wasserstein1_exact(&ca, &cb)?;
                sup = sup.max(d);
                w1.push(d);
            }
            let report = serde_json::json!({ "times": ta.times, "w1": w1, "sup_w1": sup });
            print!("{}", report_to_string("wasserstein", &report, &ta.config_hash)?);
            Ok(0)
        }
    }
}

fn cloud_at(x: &[Vec3], w: &[Vec3]) -> PointCloud6D {
    PointCloud6D {
        x: x.to_vec(),
        w: w.to_vec(),
    }
}
