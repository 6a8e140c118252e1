use criterion::{black_box, criterion_group, criterion_main, Criterion};
use fidvr_bench::Fixture;
use fidvr_core::mitigation::{plan_for_report, solve_bounded_lp, MitigationConfig};
use fidvr_core::monitor::{monitor_frames, DetectionConfig, EstimationConfig};
use fidvr_core::reference;

fn simulation(c: &mut Criterion) {
    let fx = Fixture::reference();
    c.bench_function("steady_state", |b| b.iter(|| fx.sim.steady_state(black_box(1.0)).unwrap()));
    let mut g = c.benchmark_group("simulate");
    g.sample_size(10);
    g.bench_function("reference_fault", |b| {
        b.iter(|| fx.sim.run(Some(black_box(&reference::reference_fault())), &[]).unwrap())
    });
    g.finish();
}

fn monitoring(c: &mut Criterion) {
    let fx = Fixture::reference();
    c.bench_function("monitor_frames", |b| {
        b.iter(|| {
            monitor_frames(
                black_box(&fx.frames),
                &fx.models,
                &DetectionConfig::default(),
                &EstimationConfig::default(),
            )
            .unwrap()
        })
    });
}

fn mitigation(c: &mut Criterion) {
    let fx = Fixture::reference();
    let net = reference::network();
    let cfg = MitigationConfig { t_criterion_s: 21.0, ..MitigationConfig::default() };
    c.bench_function("plan_for_report", |b| {
        b.iter(|| plan_for_report(&net, black_box(&fx.report), &fx.models, &fx.caps, &cfg).unwrap())
    });

    // twelve controls against six areas, the size of the reference problem
    let n = 12;
    let cost: Vec<f64> = (0..n).map(|j| if j < 6 { 1.0 } else { 0.01 }).collect();
    let g: Vec<Vec<f64>> = (0..6)
        .map(|i| (0..n).map(|j| -0.01 * (1.0 + ((i * 7 + j * 3) % 5) as f64)).collect())
        .collect();
    let h = vec![-2.0; 6];
    let ub = vec![100.0; n];
    c.bench_function("solve_bounded_lp", |b| b.iter(|| solve_bounded_lp(&cost, black_box(&g), &h, &ub).unwrap()));
}

criterion_group!(benches, simulation, monitoring, mitigation);
criterion_main!(benches);
