//! Sampled feasibility rates and the parameter sweep.
//!
//! For every perturbed `rho'` the sweep measures how often the nominal index
//! is still feasible, re-certifies it with warm-started adaptation, measures
//! the adapted index, and times a cold synthesis for comparison.

use std::path::Path;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dga::{adapt, Adaptation, DgaConfig};
use crate::dynamics::{ArmGeometry, ControlBounds, StateSampler, SystemParams};
use crate::error::{Error, Result};
use crate::io::Certificate;
use crate::safe_control::is_feasible_with_gain;
use crate::synthesis::{synthesize, SynthesisConfig};

/// Stream used for the larger confirmation batch of perfect rates.
const RECHECK_STREAM: u64 = 1;

/// Fraction of `n` sampled states at which the index with gain `k` is feasible.
pub fn feasibility_rate(
    k: f64,
    rho: &SystemParams,
    geom: &ArmGeometry,
    bounds: &ControlBounds,
    eta: f64,
    n: usize,
    seed: u64,
) -> f64 {
    sampled_rate(k, rho, geom, bounds, eta, n, StateSampler::new(seed))
}

fn sampled_rate(
    k: f64,
    rho: &SystemParams,
    geom: &ArmGeometry,
    bounds: &ControlBounds,
    eta: f64,
    n: usize,
    sampler: StateSampler,
) -> f64 {
    assert!(n > 0, "need at least one sample");
    let ok = sampler
        .take(n)
        .filter(|x| is_feasible_with_gain(x, k, rho, geom, bounds, eta))
        .count();
    ok as f64 / n as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    pub grid: Vec<SystemParams>,
    pub n_samples: usize,
    /// Each timed run is repeated this many times and the median reported.
    pub timing_repeats: usize,
    /// A perfect adapted rate is confirmed on `recheck_factor * n_samples`
    /// fresh states; 0 disables the check.
    pub recheck_factor: usize,
    /// Time a cold synthesis at every grid point.
    pub time_synthesis: bool,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            grid: [1.0, 0.9, 0.8, 0.7, 0.6, 0.5]
                .into_iter()
                .map(SystemParams::symmetric_gain)
                .collect(),
            n_samples: 1000,
            timing_repeats: 3,
            recheck_factor: 10,
            time_synthesis: true,
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.grid.is_empty() {
            return Err(Error::InvalidParameter("sweep grid must not be empty".into()));
        }
        for rho in &self.grid {
            rho.validate()?;
        }
        if self.n_samples == 0 || self.timing_repeats == 0 {
            return Err(Error::InvalidParameter(
                "n_samples and timing_repeats must be >= 1".into(),
            ));
        }
        Ok(())
    }
}

/// Everything the sweep needs besides the base certificate.
#[derive(Debug, Clone)]
pub struct SweepSettings {
    pub sweep: SweepConfig,
    pub dga: DgaConfig,
    pub synthesis: SynthesisConfig,
    pub seed: u64,
    /// Worker threads; `None` uses the global pool.
    pub jobs: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    pub rho: SystemParams,
    pub k_nominal: f64,
    pub k_adapted: Option<f64>,
    pub feasibility_rate_nominal: f64,
    pub feasibility_rate_adapted: Option<f64>,
    /// Rate on the larger confirmation batch, when the adapted rate was 1.
    pub recheck_rate_adapted: Option<f64>,
    pub n_samples: usize,
    pub iterations: Option<u64>,
    pub adaptation_time: f64,
    pub synthesis_time: Option<f64>,
    pub synthesis_k: Option<f64>,
    pub converged: bool,
    pub seed: u64,
    pub adaptation_error: Option<String>,
    pub synthesis_error: Option<String>,
}

fn median(mut v: Vec<Duration>) -> Duration {
    v.sort();
    v[v.len() / 2]
}

fn timed<T>(repeats: usize, mut f: impl FnMut() -> T) -> (T, Duration) {
    let mut times = Vec::with_capacity(repeats);
    let mut last = None;
    for _ in 0..repeats {
        let t = Instant::now();
        let out = f();
        times.push(t.elapsed());
        last = Some(out);
    }
    (last.expect("repeats >= 1"), median(times))
}

fn sweep_cell(base: &Certificate, rho: &SystemParams, s: &SweepSettings) -> FeasibilityReport {
    let (geom, bounds, eta) = (&base.geometry, &base.bounds, base.eta);
    let n = s.sweep.n_samples;
    let rate = |k: f64| feasibility_rate(k, rho, geom, bounds, eta, n, s.seed);

    let (adapted, adapt_time): (Result<Adaptation>, _) = timed(s.sweep.timing_repeats, || {
        adapt(base.k, base.multipliers, rho, geom, bounds, eta, &s.dga, None)
    });
    let (synth, synth_time) = if s.sweep.time_synthesis {
        let (r, t) = timed(s.sweep.timing_repeats, || {
            synthesize(rho, geom, bounds, eta, &s.synthesis)
        });
        (Some(r), Some(t.as_secs_f64()))
    } else {
        (None, None)
    };

    let (k_adapted, iterations, adaptation_error) = match &adapted {
        Ok(a) => (Some(a.k), Some(a.iterations), None),
        Err(e) => (None, None, Some(e.to_string())),
    };
    let feasibility_rate_adapted = k_adapted.map(rate);
    let recheck_rate_adapted = match (k_adapted, feasibility_rate_adapted) {
        (Some(k), Some(r)) if r == 1.0 && s.sweep.recheck_factor > 0 => Some(sampled_rate(
            k,
            rho,
            geom,
            bounds,
            eta,
            n * s.sweep.recheck_factor,
            StateSampler::with_stream(s.seed, RECHECK_STREAM),
        )),
        _ => None,
    };
    let (synthesis_k, synthesis_error) = match &synth {
        Some(Ok(r)) => (Some(r.k), None),
        Some(Err(e)) => (None, Some(e.to_string())),
        None => (None, None),
    };
    FeasibilityReport {
        rho: *rho,
        k_nominal: base.k,
        k_adapted,
        feasibility_rate_nominal: rate(base.k),
        feasibility_rate_adapted,
        recheck_rate_adapted,
        n_samples: n,
        iterations,
        adaptation_time: adapt_time.as_secs_f64(),
        synthesis_time: synth_time,
        synthesis_k,
        converged: adapted.is_ok(),
        seed: s.seed,
        adaptation_error,
        synthesis_error,
    }
}

/// Runs every grid cell; failures are recorded per cell rather than aborting.
pub fn sweep(base: &Certificate, settings: &SweepSettings) -> Result<Vec<FeasibilityReport>> {
    settings.sweep.validate()?;
    base.validate()?;
    let run = || {
        settings
            .sweep
            .grid
            .par_iter()
            .map(|rho| sweep_cell(base, rho, settings))
            .collect::<Vec<_>>()
    };
    match settings.jobs {
        Some(j) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(j.max(1))
                .build()
                .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;
            Ok(pool.install(run))
        }
        None => Ok(run()),
    }
}

#[derive(Serialize)]
struct SweepRow {
    c1: f64,
    c2: f64,
    b1: f64,
    b2: f64,
    rate_nominal: f64,
    rate_adapted: Option<f64>,
    k_adapted: Option<f64>,
    iters: Option<u64>,
    adapt_time_s: f64,
    synth_time_s: Option<f64>,
    converged: bool,
}

/// `sweep.csv`, one row per grid point. Missing values are left empty.
pub fn write_sweep_csv(path: &Path, reports: &[FeasibilityReport]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in reports {
        w.serialize(SweepRow {
            c1: r.rho.c1,
            c2: r.rho.c2,
            b1: r.rho.b1,
            b2: r.rho.b2,
            rate_nominal: r.feasibility_rate_nominal,
            rate_adapted: r.feasibility_rate_adapted,
            k_adapted: r.k_adapted,
            iters: r.iterations,
            adapt_time_s: r.adaptation_time,
            synth_time_s: r.synthesis_time,
            converged: r.converged,
        })?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_sweep_json(path: &Path, reports: &[FeasibilityReport]) -> Result<()> {
    let mut s = serde_json::to_string_pretty(reports)?;
    s.push('\n');
    std::fs::write(path, s)?;
    Ok(())
}
