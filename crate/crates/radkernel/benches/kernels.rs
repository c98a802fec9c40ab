//! Sequential vs rayon execution of the hot kernels.
//!
//! Build with `--no-default-features` to see both arms fall back to the
//! sequential loop.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use radkernel::functionals::phi1_apply_with;
use radkernel::grid::{AngularField, Dimension};
use radkernel::inverse_radial::{apply_l1, assemble, build_kernel, g1_kernel_with, green_function};
use radkernel::manufactured::{general_problem, radial_named, GeneralConfig};
use radkernel::reduction::{n1_eval_with, ReductionState};
use radkernel::Exec;

const POLICIES: [(&str, Exec); 2] = [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)];

fn radial(c: &mut Criterion) {
    let (input, _) = radial_named("radial3d", 64).expect("preset");
    let asm = assemble(&input).expect("assemble");
    let g = green_function(&asm.alpha, &asm.ell, asm.kappa, &asm.radial).expect("green");
    let kernel = build_kernel(&asm, Exec::Parallel).expect("kernel");

    let mut group = c.benchmark_group("g1_kernel");
    for (name, exec) in POLICIES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| g1_kernel_with(black_box(&asm), &g, exec))
        });
    }
    group.finish();

    let mut group = c.benchmark_group("apply_l1");
    for (name, exec) in POLICIES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| apply_l1(&asm, &kernel.g1, black_box(&kernel.w), exec))
        });
    }
    group.finish();
}

fn angular(c: &mut Criterion) {
    let p = general_problem(&GeneralConfig::new(Dimension::Three, 16)).expect("problem");
    let data = &p.data;
    let w = AngularField::from_cartesian(data.grid(), |x| (x[0] + 0.5 * x[1] * x[2]).sin());

    let mut group = c.benchmark_group("phi1_apply");
    for (name, exec) in POLICIES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| phi1_apply_with(&data.meas.lambda, &data.coeffs, black_box(&w), exec))
        });
    }
    group.finish();

    let state = ReductionState::new(data, p.v_true.clone(), p.h_true.clone(), p.q_true.clone()).expect("state");
    let mut group = c.benchmark_group("n1_eval");
    group.sample_size(20);
    for (name, exec) in POLICIES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| n1_eval_with(black_box(&state), &data.coeffs, &data.time, exec))
        });
    }
    group.finish();
}

criterion_group!(benches, radial, angular);
criterion_main!(benches);
