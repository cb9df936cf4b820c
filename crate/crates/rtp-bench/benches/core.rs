use criterion::{black_box, criterion_group, criterion_main, Criterion};

use rtp_core::lattice::{stationary_distribution, LatticeParams};
use rtp_core::measures::{citp_invariant, w1_distance};
use rtp_core::pdmp::simulate_occupation;
use rtp_core::rng::{stream, StreamRole};
use rtp_core::{ContParams, ContState, TumbleKind, VelocityPair};

fn bench_pdmp(c: &mut Criterion) {
    let params = ContParams::new(1.0, TumbleKind::Instantaneous { omega: 1.0 }).unwrap();
    let init = ContState::new(0.5, VelocityPair::new(1, -1));
    c.bench_function("pdmp_occupation_horizon_1e3", |b| {
        b.iter(|| {
            simulate_occupation(
                &params,
                init,
                1e3,
                50,
                stream(1, 0, StreamRole::Velocity1),
                stream(1, 0, StreamRole::Velocity2),
            )
            .unwrap()
        })
    });
}

fn bench_stationary(c: &mut Criterion) {
    let kind = TumbleKind::Instantaneous { omega: 1.0 };
    for l in [128usize, 512] {
        let params = LatticeParams::scaled(l, 1.0, kind).unwrap();
        c.bench_function(&format!("stationary_solve_L{l}"), |b| {
            b.iter(|| stationary_distribution(black_box(&params)).unwrap())
        });
    }
}

fn bench_w1(c: &mut Criterion) {
    let kind = TumbleKind::Instantaneous { omega: 1.0 };
    let analytic = citp_invariant(1.0, 1.0).unwrap().bin(100).unwrap().to_discrete();
    let params = LatticeParams::scaled(128, 1.0, kind).unwrap();
    let embedded = stationary_distribution(&params).unwrap().embedded_measure();
    c.bench_function("w1_L128_vs_100_bins", |b| {
        b.iter(|| w1_distance(black_box(&embedded), black_box(&analytic)).unwrap())
    });
}

criterion_group!(benches, bench_pdmp, bench_stationary, bench_w1);
criterion_main!(benches);
