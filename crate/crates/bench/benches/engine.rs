use criterion::{black_box, criterion_group, criterion_main, Criterion};
use irsloc::locate::{default_levels, FocusedPatterns, NullSteeredPatterns};
use irsloc::*;
use irsloc_bench::null_problem;

fn channel(c: &mut Criterion) {
    let s = Scenario::reference();
    let model = ChannelModel::new(&s).unwrap();
    let p = PhasePattern::zeros(model.element_count());
    let person = model.reflector(Vec3::floor(3.5, 3.5)).unwrap();
    c.bench_function("snapshot_9x9", |b| b.iter(|| model.snapshot(black_box(&p), std::slice::from_ref(&person), None, 0).unwrap()));
    c.bench_function("codebook_coarse_9x9", |b| {
        let grid = Grid::covering(&s.room, 0.5, 0).unwrap();
        b.iter(|| build_codebook(&s, black_box(&grid)).unwrap())
    });
}

fn optimizer(c: &mut Criterion) {
    let one = null_problem(&Scenario::reference(), &[(2.22, 3.0)]);
    c.bench_function("solve_null_81", |b| b.iter(|| solve_null(black_box(&one)).unwrap()));
    let small = null_problem(&Scenario::reference().with_irs_dims(5, 5), &[(2.0, 4.0)]);
    c.bench_function("solve_null_25", |b| b.iter(|| solve_null(black_box(&small)).unwrap()));
}

fn localization(c: &mut Criterion) {
    let s = Scenario::reference();
    let model = ChannelModel::new(&s).unwrap();
    let src = SimulatedSource::from_scenario(&s, 0.0, 0).unwrap();
    let focused = FocusedPatterns { model: &model, bits: Some(s.irs.bits) };
    let levels = default_levels();
    c.bench_function("locate_single_reference", |b| b.iter(|| locate_single(&src, &s, &levels, &focused).unwrap()));

    let mut g = c.benchmark_group("null_steered_scan");
    g.sample_size(10);
    let grid = Grid::covering(&s.room, 0.5, 0).unwrap();
    g.bench_function("coarse_9x9_one_detection", |b| {
        b.iter(|| {
            let p = NullSteeredPatterns::new(&model, &[(3.5, 3.5)], std::f64::consts::FRAC_PI_6, Some(2), None).unwrap();
            scan(&src, &s, &grid, &p, 1).unwrap()
        })
    });
    g.finish();
}

criterion_group!(benches, channel, optimizer, localization);
criterion_main!(benches);
