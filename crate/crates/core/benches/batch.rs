use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use threebody::batch;
use threebody::dynamics::{integrate, momenta_from_velocities, IntegratorSpec};
use threebody::geometry::geo_from_rho;
use threebody::potentials::newton_quartic_roots;
use threebody::sampling::{generic_rho, masses, rng_for};
use threebody::{HamiltonianSpec, MassTriple, PhaseState, PotentialSpec, Representation, RhoPoint};

/// Expanding arcs under a weak harmonic chain, one per sample.
fn flows(n: u64) -> Vec<(MassTriple, RhoPoint)> {
    (0..n)
        .map(|i| {
            let mut rng = rng_for(1, i);
            (masses(&mut rng), generic_rho(&mut rng))
        })
        .collect()
}

fn run_flow((m, rho): &(MassTriple, RhoPoint)) -> f64 {
    let pot = PotentialSpec::HarmonicChain {
        omega: 0.05,
        nu12: 1.0,
        nu13: 0.7,
        nu23: 1.3,
    };
    let spec = HamiltonianSpec::new(Representation::Rho, *m, pot, 0.0).unwrap();
    let q = rho.as_array();
    let rdot = q.map(|x| 0.6 * x);
    let p = momenta_from_velocities(Representation::Rho, &q, &rdot, m).unwrap();
    let state = PhaseState {
        rep: Representation::Rho,
        q,
        p,
    };
    integrate(
        &spec,
        &state,
        (0.0, 2.0),
        &IntegratorSpec::adaptive(1e-10, 1e-10),
        &[],
    )
    .unwrap()
    .max_energy_drift()
}

fn quartic(rho: &RhoPoint) -> f64 {
    newton_quartic_roots(&geo_from_rho(rho), 1.0).unwrap().roots[0].re
}

fn bench_flows(c: &mut Criterion) {
    let mut group = c.benchmark_group("reduced_flows");
    group.sample_size(20);
    for n in [16, 128] {
        let items = flows(n);
        group.bench_with_input(BenchmarkId::new("seq", n), &items, |b, items| {
            b.iter(|| batch::map_seq(black_box(items), run_flow))
        });
        #[cfg(feature = "parallel")]
        group.bench_with_input(BenchmarkId::new("par", n), &items, |b, items| {
            b.iter(|| batch::map_par(black_box(items), run_flow))
        });
    }
    group.finish();
}

fn bench_quartics(c: &mut Criterion) {
    let items: Vec<RhoPoint> = flows(10_000).into_iter().map(|(_, r)| r).collect();
    let mut group = c.benchmark_group("newton_quartic");
    group.bench_function("seq", |b| {
        b.iter(|| batch::map_seq(black_box(&items), quartic))
    });
    #[cfg(feature = "parallel")]
    group.bench_function("par", |b| {
        b.iter(|| batch::map_par(black_box(&items), quartic))
    });
    group.finish();
}

criterion_group!(benches, bench_flows, bench_quartics);
criterion_main!(benches);
