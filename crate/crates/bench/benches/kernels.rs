use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use std::hint::black_box;

use nlkg::decomposition::{decompose, ModeBasis, Thresholds};
use nlkg::evolution::flow;
use nlkg::field::{BoxGrid, Complex64, Field, Grid, RadialGrid};
use nlkg::functionals::energy;
use nlkg::ground_state::compute_ground_state;
use nlkg::linearization::compute_linearization;

fn radial(c: &mut Criterion) {
    let grid = RadialGrid::new(40.0, 511).unwrap();
    c.bench_function("ground_state_r40_n511", |b| b.iter(|| compute_ground_state(black_box(grid), 1e-11).unwrap()));
    let gs = compute_ground_state(grid, 1e-11).unwrap();
    c.bench_function("linearization_r40_n511", |b| b.iter(|| compute_linearization(black_box(&gs)).unwrap()));
    let lin = compute_linearization(&gs).unwrap();
    let basis = ModeBasis::radial(&lin);
    let u = basis.state.axpy(1e-3, &basis.gplus).unwrap();
    let th = Thresholds::default();
    c.bench_function("decompose_radial", |b| b.iter(|| decompose(black_box(&u), &basis, &th).unwrap()));
    c.bench_function("energy_radial", |b| b.iter(|| energy(black_box(&u))));
    c.bench_function("flow_radial_100_steps", |b| b.iter(|| flow(black_box(&u), 0.1, 1e-3, false).unwrap()));
}

fn boxed(c: &mut Criterion) {
    let bx = BoxGrid::new(20.0, 32).unwrap();
    let g = Grid::Box(bx);
    let data: Vec<Complex64> = (0..bx.len())
        .map(|i| {
            let x = bx.point(i);
            let r2 = x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
            Complex64::new((-r2 / 4.0).exp(), 0.0)
        })
        .collect();
    let u = Field::new(g, data).unwrap();
    c.bench_function("fft3_32", |b| b.iter(|| bx.fft(black_box(u.data()))));
    c.bench_function("energy_box_32", |b| b.iter(|| energy(black_box(&u))));
    c.bench_function("flow_box_32_10_steps", |b| {
        b.iter_batched(|| u.clone(), |v| flow(&v, 0.01, 1e-3, false).unwrap(), BatchSize::LargeInput)
    });
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(10);
    targets = radial, boxed
}
criterion_main!(benches);
