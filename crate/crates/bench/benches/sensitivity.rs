use criterion::{criterion_group, criterion_main, Criterion};
use spm_bench::{consts, nominal, CAPACITY_AH, CUTOFF, STEP};
use spm_core::sensitivity::{default_scenarios, indices_for, ishigami, run_sensitivity, sample_matrices, ParameterSpace};

fn bench_sensitivity(c: &mut Criterion) {
    let pi = std::f64::consts::PI;
    let names: Vec<String> = ["x1", "x2", "x3"].iter().map(|s| s.to_string()).collect();
    c.bench_function("ishigami_n1024", |b| {
        b.iter(|| {
            let s = sample_matrices(&[(-pi, pi); 3], 1024, 1).unwrap();
            indices_for(&names, &s, |x| ishigami(x, 7.0, 0.1)).unwrap()
        })
    });

    let space = ParameterSpace::literature_ranges();
    let scenarios = default_scenarios(&nominal(), consts(), CAPACITY_AH, CUTOFF, STEP, 7).unwrap();
    let one_c: Vec<_> = scenarios.into_iter().filter(|s| s.name == "1C").collect();
    let mut group = c.benchmark_group("sensitivity");
    group.sample_size(10);
    group.bench_function("1c_n64", |b| b.iter(|| run_sensitivity(&space, &one_c, 64, 1).unwrap()));
    group.finish();
}

criterion_group!(benches, bench_sensitivity);
criterion_main!(benches);
