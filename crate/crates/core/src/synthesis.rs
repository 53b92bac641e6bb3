//! Cold-start safety index synthesis.
//!
//! A multi-start search over a grid of `k` values: every `(k, restart)` cell
//! draws random multipliers and runs the ascent loop from scratch with both
//! `k` and the multipliers free. This stands in for a full nonlinear-program
//! synthesis and doubles as the timing baseline for adaptation.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dga::{run_dga, CertificateProblem, DgaConfig};
use crate::dynamics::{ArmGeometry, ControlBounds, SystemParams};
use crate::error::{Error, Result};
use crate::sos::Multipliers;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthesisConfig {
    pub k_grid: Vec<f64>,
    pub restarts: usize,
    /// `p1..p9` start on `[0, p_init_max]`, `pp1, pp2` on `[-p_init_max, p_init_max]`.
    pub p_init_max: f64,
    pub dga: DgaConfig,
    pub seed: u64,
    /// Evaluate cells concurrently and keep the first one to finish. Off by
    /// default because the winner then depends on scheduling.
    pub race: bool,
}

impl Default for SynthesisConfig {
    fn default() -> Self {
        Self {
            k_grid: (2..=30).map(|i| i as f64 * 0.1).collect(),
            restarts: 5,
            p_init_max: 10.0,
            dga: DgaConfig {
                lambda_theta: 1e-5,
                lambda_p: 3e-2,
                max_iters: 60_000,
                ..DgaConfig::default()
            },
            seed: 0,
            race: false,
        }
    }
}

impl SynthesisConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k_grid.is_empty() {
            return Err(Error::InvalidParameter("k_grid must not be empty".into()));
        }
        if let Some(k) = self.k_grid.iter().find(|k| !(**k >= 0.0 && k.is_finite())) {
            return Err(Error::InvalidParameter(format!("k_grid values must be >= 0, got {k}")));
        }
        if self.restarts == 0 {
            return Err(Error::InvalidParameter("restarts must be >= 1".into()));
        }
        if !(self.p_init_max >= 0.0 && self.p_init_max.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "p_init_max must be >= 0, got {}",
                self.p_init_max
            )));
        }
        self.dga.validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Synthesis {
    pub k: f64,
    pub multipliers: [Multipliers; 4],
    pub wall_time: Duration,
    /// Cells tried, counting the successful one.
    pub attempts: usize,
    /// Ascent iterations spent in the successful cell.
    pub iterations: u64,
}

fn initial_multipliers(rng: &mut ChaCha8Rng, p_max: f64) -> [Multipliers; 4] {
    std::array::from_fn(|_| {
        let mut m = Multipliers::zeros();
        for v in &mut m.pp {
            *v = if p_max > 0.0 { rng.random_range(-p_max..=p_max) } else { 0.0 };
        }
        for v in &mut m.p {
            *v = if p_max > 0.0 { rng.random_range(0.0..=p_max) } else { 0.0 };
        }
        m
    })
}

struct CellOutcome {
    k: f64,
    multipliers: [Multipliers; 4],
    iterations: u64,
}

fn run_cell(
    problem: &CertificateProblem,
    cfg: &SynthesisConfig,
    cell: usize,
) -> std::result::Result<CellOutcome, f64> {
    let k0 = cfg.k_grid[cell / cfg.restarts];
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(cell as u64);
    let start = initial_multipliers(&mut rng, cfg.p_init_max);
    match run_dga(problem, k0, start, &cfg.dga, None) {
        Ok(a) => Ok(CellOutcome {
            k: a.k,
            multipliers: a.multipliers,
            iterations: a.iterations,
        }),
        Err(Error::AdaptationDidNotConverge { worst_minor, .. }) => Err(worst_minor),
        Err(_) => Err(f64::NEG_INFINITY),
    }
}

/// Searches for `(k, multipliers)` certifying all four matrices PSD.
///
/// Cells are ordered `k` first, then restart. Without racing the first
/// successful cell in that order is returned.
pub fn synthesize(
    rho: &SystemParams,
    geom: &ArmGeometry,
    bounds: &ControlBounds,
    eta: f64,
    cfg: &SynthesisConfig,
) -> Result<Synthesis> {
    cfg.validate()?;
    let start = Instant::now();
    let problem = CertificateProblem::new(rho, geom, bounds, eta)?;
    let n_cells = cfg.k_grid.len() * cfg.restarts;

    let found = if cfg.race {
        let tried = AtomicUsize::new(0);
        let hit = (0..n_cells).into_par_iter().find_map_any(|cell| {
            tried.fetch_add(1, Ordering::Relaxed);
            run_cell(&problem, cfg, cell).ok().map(|o| (cell, o))
        });
        match hit {
            Some((_, o)) => Ok((o, tried.load(Ordering::Relaxed))),
            None => Err(n_cells),
        }
    } else {
        let mut out = Err(n_cells);
        for cell in 0..n_cells {
            if let Ok(o) = run_cell(&problem, cfg, cell) {
                out = Ok((o, cell + 1));
                break;
            }
        }
        out
    };

    match found {
        Ok((o, attempts)) => Ok(Synthesis {
            k: o.k,
            multipliers: o.multipliers,
            wall_time: start.elapsed(),
            attempts,
            iterations: o.iterations,
        }),
        Err(attempts) => {
            // Report the best residual over a cheap re-scan of the starts.
            let best = (0..n_cells)
                .map(|cell| {
                    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
                    rng.set_stream(cell as u64);
                    let m = initial_multipliers(&mut rng, cfg.p_init_max);
                    let k = cfg.k_grid[cell / cfg.restarts];
                    problem
                        .statuses(k, &m, cfg.dga.tol)
                        .iter()
                        .map(|s| s.worst_value)
                        .fold(f64::INFINITY, f64::min)
                })
                .fold(f64::NEG_INFINITY, f64::max);
            Err(Error::SynthesisFailed {
                attempts,
                best_minor: best,
            })
        }
    }
}

/// True iff all four matrices pass the principal-minor test.
pub fn verify_certificate(
    k: f64,
    multipliers: &[Multipliers; 4],
    rho: &SystemParams,
    geom: &ArmGeometry,
    bounds: &ControlBounds,
    eta: f64,
    tol: f64,
) -> bool {
    if k < 0.0 || multipliers.iter().any(|m| m.validate().is_err()) {
        return false;
    }
    match CertificateProblem::new(rho, geom, bounds, eta) {
        Ok(p) => p.is_certified(k, multipliers, tol),
        Err(_) => false,
    }
}
