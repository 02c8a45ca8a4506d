use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use markovsharp_core::markov::sharp_constant_l2;
use markovsharp_core::orthopoly::recurrence;
use markovsharp_core::quadrature::composite_rule;
use markovsharp_core::{Family, MarkovProblem, SobolevSpec, WeightSpec};

fn weights() -> Vec<(&'static str, WeightSpec)> {
    vec![
        ("legendre", WeightSpec::legendre()),
        ("laguerre", WeightSpec::laguerre(1.5).unwrap()),
        (
            "gen_jacobi",
            WeightSpec::generalized(Family::GenJacobi, None, 0.5, -0.5, &[(0.0, 0.5)]).unwrap(),
        ),
        (
            "gen_laguerre",
            WeightSpec::generalized(
                Family::GenLaguerre,
                None,
                0.0,
                0.0,
                &[(-1.0, 5.0), (2.0, 1.0)],
            )
            .unwrap(),
        ),
    ]
}

fn sharp_l2(c: &mut Criterion) {
    let mut group = c.benchmark_group("sharp_l2");
    for (name, w) in weights() {
        for n in [10usize, 40] {
            group.bench_with_input(BenchmarkId::new(name, n), &n, |b, &n| {
                b.iter(|| sharp_constant_l2(black_box(&w), n).unwrap().value)
            });
        }
    }
    group.finish();
}

fn sweep(c: &mut Criterion) {
    let w = WeightSpec::jacobi(1.0, 2.0).unwrap();
    let sob = SobolevSpec::new(vec![1.0, 0.5]).unwrap();
    c.bench_function("sweep_sobolev_jacobi_4_40", |b| {
        b.iter(|| {
            let p = MarkovProblem::new(&w, 40).unwrap();
            (4..=40)
                .map(|n| p.sharp_sobolev(&sob, n).unwrap().value)
                .sum::<f64>()
        })
    });
}

fn kernels(c: &mut Criterion) {
    let w = WeightSpec::generalized(Family::GenHermite, None, 0.0, 0.0, &[(0.5, 1.0)]).unwrap();
    c.bench_function("composite_rule_gen_hermite_deg_120", |b| {
        b.iter(|| composite_rule(black_box(&w), 120).unwrap().len())
    });
    c.bench_function("stieltjes_gen_hermite_61", |b| {
        b.iter(|| recurrence(black_box(&w), 61).unwrap().mass())
    });
}

criterion_group!(benches, sharp_l2, sweep, kernels);
criterion_main!(benches);
