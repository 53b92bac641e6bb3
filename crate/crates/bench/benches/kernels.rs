use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};

use sia_core::dga::{dga_step, AdaptationState, CertificateProblem, DgaConfig};
use sia_core::safe_control::{ssa_filter, SafeControlConfig};
use sia_core::sos::{psd_status, Multipliers, DEFAULT_PSD_TOL};
use sia_core::{ArmGeometry, ControlBounds, ControlVector, SafetyIndexParams, StateVector, SystemParams};

fn start() -> [Multipliers; 4] {
    let mut m = Multipliers::zeros();
    m.pp = [-1.0, -1.0];
    m.p = [1.0; 9];
    [m; 4]
}

fn kernels(c: &mut Criterion) {
    let geom = ArmGeometry::default();
    let bounds = ControlBounds::default();
    let rho = SystemParams::symmetric_gain(0.7);
    let problem = CertificateProblem::new(&rho, &geom, &bounds, 0.1).unwrap();
    let mults = start();
    let q = problem.matrices(0.3, &mults)[0];

    c.bench_function("psd_status", |b| {
        b.iter(|| psd_status(black_box(&q), DEFAULT_PSD_TOL))
    });

    let cfg = DgaConfig::default();
    let state = AdaptationState::new(0.3, mults, rho);
    c.bench_function("dga_step", |b| {
        b.iter(|| dga_step(&problem, black_box(&state), &cfg))
    });

    let x = StateVector::new(0.4, 0.3, 0.8, 0.6);
    let k = SafetyIndexParams::first_order(0.3).unwrap();
    let u_ref = ControlVector::new(80.0, -20.0);
    let ctrl = SafeControlConfig::default();
    c.bench_function("ssa_filter", |b| {
        b.iter(|| ssa_filter(black_box(&x), &u_ref, &k, &rho, &geom, &bounds, &ctrl))
    });
}

criterion_group!(benches, kernels);
criterion_main!(benches);
