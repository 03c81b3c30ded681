//! Hot kernels on the desk grid.
//!
//! The ids do not depend on the build, so the sequential fallback can be
//! compared against a saved parallel run:
//!
//! ```text
//! cargo bench -p afc-core --bench kernels -- --save-baseline parallel
//! cargo bench -p afc-core --bench kernels --no-default-features -- --baseline parallel
//! ```

use std::hint::black_box;

use afc_core::agent::ppo::loss_and_grad;
use afc_core::agent::{PolicyParams, PpoConfig, Sample};
use afc_core::flow::poisson::{FastDiagonalization, PoissonOperator};
use afc_core::flow::{JetConfig, SimConfig, Simulation, OBS_LEN};
use criterion::{criterion_group, criterion_main, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn desk_sim() -> Simulation {
    let cfg = SimConfig::default();
    let mut sim = Simulation::new(&cfg, &JetConfig::default()).unwrap();
    let dt = sim.stable_dt(cfg.cfl, 0.0);
    for _ in 0..5 {
        sim.step(0.0, dt).unwrap();
    }
    sim
}

fn solver(c: &mut Criterion) {
    eprintln!("execution mode: {}", afc_core::par::MODE);
    let mut g = c.benchmark_group("solver");
    g.sample_size(20);
    let mut sim = desk_sim();
    let dt = sim.stable_dt(0.5, 2.0);
    g.bench_function("step_750x375", |b| {
        b.iter(|| black_box(sim.step(0.05, dt).unwrap()))
    });

    let op = PoissonOperator::for_geometry(sim.geometry());
    let mut fd = FastDiagonalization::new(&op);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let r: Vec<f64> = (0..op.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mut z = vec![0.0; op.len()];
    g.bench_function("fast_diagonalization_750x375", |b| {
        b.iter(|| fd.solve(black_box(&r), &mut z))
    });
    let mut out = vec![0.0; op.len()];
    g.bench_function("poisson_apply_750x375", |b| {
        b.iter(|| op.apply(black_box(&r), &mut out))
    });
    g.finish();
}

fn ppo(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let p = PolicyParams::<f32>::new(OBS_LEN, 128, 0.176, -1.5, &mut rng);
    let batch: Vec<Sample> = (0..480)
        .map(|_| Sample {
            observation: (0..OBS_LEN).map(|_| rng.random_range(-1.0..1.0)).collect(),
            raw_action: rng.random_range(-0.5..0.5),
            old_log_prob: 0.5,
            advantage: rng.random_range(-1.0..1.0),
            value_target: rng.random_range(-1.0..1.0),
        })
        .collect();
    let refs: Vec<&Sample> = batch.iter().collect();
    let cfg = PpoConfig::default();
    c.bench_function("ppo/loss_and_grad_480x128", |b| {
        b.iter(|| black_box(loss_and_grad(&p, &refs, &cfg)))
    });
}

criterion_group!(benches, solver, ppo);
criterion_main!(benches);
