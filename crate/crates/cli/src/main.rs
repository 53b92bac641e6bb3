//! `sia`: synthesize, adapt, check and exercise safety index certificates.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use sia_core::dga::adapt;
use sia_core::dynamics::StateSampler;
use sia_core::evaluation::{sweep, write_sweep_csv, write_sweep_json, SweepSettings};
use sia_core::io::{write_matrix_csv, write_trace_csv, Certificate, Config, Provenance};
use sia_core::simulation::{
    run_scenario, write_path_csv, write_trajectory_csv, write_trajectory_json, TerminalStatus,
};
use sia_core::sos::certificate::certificate_polynomial_value;
use sia_core::sos::{assemble_q, psd_status, LiftedState, SignAssignment};
use sia_core::synthesis::synthesize;
use sia_core::{Error, SystemParams};

/// Relative agreement required between `b' Q b` and the expanded polynomial.
const IDENTITY_RTOL: f64 = 1e-10;

#[derive(Parser)]
#[command(name = "sia", version, about = "Safety index synthesis and adaptation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON config; defaults apply to missing keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory, created if missing.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Worker thread cap.
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Cold synthesis at the config's `rho`.
    Synth {
        #[command(flatten)]
        common: Common,
    },
    /// Re-certify an existing certificate for new parameters.
    Adapt {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        certificate: PathBuf,
        /// Target parameters `c1,c2,b1,b2`; falls back to the config's `rho_new`.
        #[arg(long, value_parser = parse_rho)]
        rho: Option<SystemParams>,
    },
    /// Verify a certificate and cross-check its matrices.
    Check {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        certificate: PathBuf,
        /// Lifted states for the polynomial identity check.
        #[arg(long, default_value_t = 100)]
        samples: usize,
    },
    /// Feasibility sweep over the config's parameter grid.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        certificate: PathBuf,
    },
    /// Closed-loop goal tracking scenario.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        certificate: PathBuf,
        #[arg(long, conflicts_with = "no_adapt")]
        adapt: bool,
        #[arg(long)]
        no_adapt: bool,
    },
}

fn parse_rho(s: &str) -> Result<SystemParams, String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("{p:?}: {e}")))
        .collect::<Result<_, _>>()?;
    match v[..] {
        [c1, c2, b1, b2] => SystemParams::new(c1, c2, b1, b2).map_err(|e| e.to_string()),
        _ => Err(format!("expected c1,c2,b1,b2, got {} values", v.len())),
    }
}

/// A failed command with its exit code.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn new(code: u8, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }
}

const USAGE: u8 = 1;
const SYNTHESIS: u8 = 2;
const ADAPTATION: u8 = 3;
const INVALID: u8 = 4;
const UNSAFE: u8 = 5;

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::SynthesisFailed { .. } => SYNTHESIS,
            Error::AdaptationDidNotConverge { .. } => ADAPTATION,
            _ => USAGE,
        };
        Self::new(code, e.to_string())
    }
}

type Outcome = Result<(), Failure>;

fn load_config(common: &Common) -> Result<Config, Failure> {
    let mut cfg = match &common.config {
        Some(p) => Config::load(p).map_err(|e| Failure::new(USAGE, format!("{}: {e}", p.display())))?,
        None => Config::default(),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(jobs) = common.jobs {
        if jobs == 0 {
            return Err(Failure::new(USAGE, "--jobs must be >= 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| Failure::new(USAGE, format!("thread pool: {e}")))?;
    }
    fs::create_dir_all(&common.out)
        .map_err(|e| Failure::new(USAGE, format!("{}: {e}", common.out.display())))?;
    Ok(cfg)
}

fn load_certificate(path: &Path) -> Result<Certificate, Failure> {
    Certificate::load(path).map_err(|e| Failure::new(USAGE, format!("{}: {e}", path.display())))
}

fn dump_matrices(cert: &Certificate, out: &Path) -> Outcome {
    for a in SignAssignment::ALL {
        let q = assemble_q(
            a,
            cert.k,
            &cert.multipliers[a.index() - 1],
            &cert.rho,
            &cert.geometry,
            &cert.bounds,
            cert.eta,
        )?;
        write_matrix_csv(&out.join(format!("q{}.csv", a.index())), &q)?;
    }
    Ok(())
}

fn cmd_synth(common: &Common) -> Outcome {
    let cfg = load_config(common)?;
    let s = synthesize(&cfg.rho, &cfg.geometry, &cfg.bounds, cfg.eta, &cfg.synthesis_config())?;
    let cert = Certificate::new(
        cfg.rho,
        s.k,
        s.multipliers,
        cfg.eta,
        cfg.geometry,
        cfg.bounds,
        cfg.seed,
    );
    let path = common.out.join("certificate.json");
    cert.save(&path)?;
    dump_matrices(&cert, &common.out)?;
    println!(
        "certified k = {} after {} attempt(s), {} iterations, {:.3} s -> {}",
        s.k,
        s.attempts,
        s.iterations,
        s.wall_time.as_secs_f64(),
        path.display()
    );
    Ok(())
}

fn cmd_adapt(common: &Common, certificate: &Path, rho: Option<SystemParams>) -> Outcome {
    let cfg = load_config(common)?;
    let base = load_certificate(certificate)?;
    let rho_new = rho
        .or(cfg.rho_new)
        .ok_or_else(|| Failure::new(USAGE, "no target parameters: pass --rho or set rho_new"))?;
    let mut trace = Vec::new();
    let result = adapt(
        base.k,
        base.multipliers,
        &rho_new,
        &base.geometry,
        &base.bounds,
        base.eta,
        &cfg.dga,
        Some(&mut trace),
    );
    // the trace is useful precisely when the ascent fails
    write_trace_csv(&common.out.join("trace.csv"), &trace)?;
    let a = result?;
    let mut cert = Certificate::new(
        rho_new,
        a.k,
        a.multipliers,
        base.eta,
        base.geometry,
        base.bounds,
        cfg.seed,
    );
    cert.provenance = Some(Provenance {
        previous_rho: base.rho,
        previous_k: base.k,
        rho: rho_new,
        iterations: a.iterations,
        wall_time_s: a.wall_time.as_secs_f64(),
    });
    let path = common.out.join("certificate.json");
    cert.save(&path)?;
    dump_matrices(&cert, &common.out)?;
    println!(
        "k {} -> {} in {} iterations, {:.3} s -> {}",
        base.k,
        a.k,
        a.iterations,
        a.wall_time.as_secs_f64(),
        path.display()
    );
    Ok(())
}

fn cmd_check(common: &Common, certificate: &Path, samples: usize) -> Outcome {
    let cfg = load_config(common)?;
    let cert = load_certificate(certificate)?;
    let mut ok = true;
    for a in SignAssignment::ALL {
        let m = &cert.multipliers[a.index() - 1];
        let q = assemble_q(a, cert.k, m, &cert.rho, &cert.geometry, &cert.bounds, cert.eta)?;
        let status = psd_status(&q, cfg.dga.tol);
        let mut worst_rel = 0.0_f64;
        for x in StateSampler::new(cfg.seed).take(samples) {
            let lifted = LiftedState::from_state(&x);
            let b = lifted.basis();
            let direct = certificate_polynomial_value(
                a,
                cert.k,
                m,
                &cert.rho,
                &cert.geometry,
                &cert.bounds,
                cert.eta,
                &lifted,
            );
            let rel = (q.quadratic_form(&b) - direct).abs() / direct.abs().max(1.0);
            worst_rel = worst_rel.max(rel);
        }
        let identity = worst_rel <= IDENTITY_RTOL;
        println!(
            "Q{}: {} (worst minor {:.6e} at {:?}), identity {} (max rel err {:.3e})",
            a.index(),
            if status.is_psd { "psd" } else { "NOT psd" },
            status.worst_value,
            status.worst_index_set.to_vec(),
            if identity { "ok" } else { "FAILED" },
            worst_rel
        );
        ok &= status.is_psd && identity;
    }
    if ok {
        println!("certificate valid");
        Ok(())
    } else {
        Err(Failure::new(INVALID, "certificate invalid"))
    }
}

fn cmd_eval(common: &Common, certificate: &Path) -> Outcome {
    let cfg = load_config(common)?;
    let base = load_certificate(certificate)?;
    let settings = SweepSettings {
        sweep: cfg.sweep.clone(),
        dga: cfg.dga,
        synthesis: cfg.synthesis_config(),
        seed: cfg.seed,
        jobs: None,
    };
    let reports = sweep(&base, &settings)?;
    write_sweep_csv(&common.out.join("sweep.csv"), &reports)?;
    write_sweep_json(&common.out.join("sweep.json"), &reports)?;

    let opt = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |v| format!("{v:.4}"));
    println!(
        "{:>6} {:>6} {:>9} {:>9} {:>8} {:>8} {:>9} {:>9}",
        "c1", "c2", "rate_nom", "rate_ad", "k_ad", "iters", "adapt_s", "synth_s"
    );
    for r in &reports {
        println!(
            "{:>6} {:>6} {:>9.3} {:>9} {:>8} {:>8} {:>9.3} {:>9}",
            r.rho.c1,
            r.rho.c2,
            r.feasibility_rate_nominal,
            opt(r.feasibility_rate_adapted),
            opt(r.k_adapted),
            r.iterations.map_or_else(|| "-".to_string(), |i| i.to_string()),
            r.adaptation_time,
            opt(r.synthesis_time),
        );
        if let Some(e) = &r.adaptation_error {
            eprintln!("c1={} c2={}: {e}", r.rho.c1, r.rho.c2);
        }
    }
    if reports.iter().all(|r| !r.converged) {
        return Err(Failure::new(ADAPTATION, "adaptation failed in every cell"));
    }
    Ok(())
}

fn cmd_simulate(common: &Common, certificate: &Path, adapt: bool, no_adapt: bool) -> Outcome {
    let cfg = load_config(common)?;
    let cert = load_certificate(certificate)?;
    let mut scn = cfg.scenario.clone();
    if adapt {
        scn.adapt = true;
    } else if no_adapt {
        scn.adapt = false;
    }
    let log = run_scenario(&scn, &cert, &cfg.dga)?;
    write_trajectory_csv(&common.out.join("trajectory.csv"), &log)?;
    write_trajectory_json(&common.out.join("trajectory.json"), &scn, &log)?;
    write_path_csv(&common.out.join("path.csv"), &cert.geometry, &log)?;
    println!(
        "{} after {} ticks, {} of {} goals, adaptation {}",
        log.status.as_str(),
        log.ticks.len(),
        log.goals_reached,
        scn.goals.len(),
        if scn.adapt { "on" } else { "off" }
    );
    match log.status {
        TerminalStatus::WallViolation | TerminalStatus::InfeasibleEncountered => {
            Err(Failure::new(UNSAFE, format!("safety violation: {}", log.status.as_str())))
        }
        _ => Ok(()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match &cli.command {
        Command::Synth { common } => cmd_synth(common),
        Command::Adapt {
            common,
            certificate,
            rho,
        } => cmd_adapt(common, certificate, *rho),
        Command::Check {
            common,
            certificate,
            samples,
        } => cmd_check(common, certificate, *samples),
        Command::Eval {
            common,
            certificate,
        } => cmd_eval(common, certificate),
        Command::Simulate {
            common,
            certificate,
            adapt,
            no_adapt,
        } => cmd_simulate(common, certificate, *adapt, *no_adapt),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
