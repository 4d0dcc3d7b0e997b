use criterion::{black_box, criterion_group, criterion_main, BatchSize, Criterion};
use degenwave_core::operator_checks::dissipativity_probe;
use degenwave_core::tridiag::{SymTridiag, TridiagFactor};
use degenwave_core::{init_state, run, RunConfig, Setup, Stepper};

fn setup(overrides: &[&str]) -> Setup {
    let mut c = RunConfig::scenario("baseline").unwrap();
    for o in overrides {
        c.apply_override(o).unwrap();
    }
    c.build().unwrap()
}

fn tridiagonal(c: &mut Criterion) {
    let n = 1024;
    let mut a = SymTridiag::zeros(n);
    a.diag.iter_mut().for_each(|d| *d = 4.0);
    a.off.iter_mut().for_each(|o| *o = -1.0);
    let factor = TridiagFactor::new(&a, 0).unwrap();
    let rhs: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
    c.bench_function("tridiag_solve_1024", |b| {
        b.iter_batched_ref(|| rhs.clone(), |r| factor.solve(black_box(r)).unwrap(), BatchSize::SmallInput)
    });
}

fn stepping(c: &mut Criterion) {
    let s = setup(&["mesh.n=256", "channel.n_delta=64"]);
    let (state, _) = init_state(&s).unwrap();
    let mut stepper = Stepper::new(s).unwrap();
    let mut state = state;
    c.bench_function("step_n256", |b| b.iter(|| stepper.step(black_box(&mut state)).unwrap()));

    let short = setup(&["integrator.t_end=1"]);
    let mut group = c.benchmark_group("run");
    group.sample_size(20);
    group.bench_function("baseline_t1", |b| b.iter(|| run(black_box(&short)).unwrap()));
    group.finish();
}

fn probes(c: &mut Criterion) {
    let s = setup(&[]);
    let mut group = c.benchmark_group("operator");
    group.sample_size(20);
    group.bench_function("dissipativity_100", |b| b.iter(|| dissipativity_probe(black_box(&s), 5.0, 100, 1)));
    group.finish();
}

criterion_group!(benches, tridiagonal, stepping, probes);
criterion_main!(benches);
