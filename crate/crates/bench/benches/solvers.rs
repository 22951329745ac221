use criterion::{black_box, criterion_group, criterion_main, Criterion};

use grlpn_bench::separable_instance;
use grlpn_core::fixtures::{toy_mpec, TOY_START, TOY_TAU};
use grlpn_core::lpnewton::{inner_solve, LpNewtonConfig};
use grlpn_core::lpsolve::{beale, solve_lp, LpOptions};
use grlpn_core::residual::{eval_residual, jacobian, select_active, ZLayout};
use grlpn_core::svcqp::{train_boxed_signed, QpOptions};
use grlpn_core::{solve, IterateZ, SolverConfig};

fn lp(c: &mut Criterion) {
    let lp = beale();
    c.bench_function("lp/beale_dense", |b| {
        b.iter(|| solve_lp(black_box(&lp), &LpOptions::default()).unwrap())
    });
}

fn qp(c: &mut Criterion) {
    let (_, _, p) = separable_instance(90, 0, 3);
    let rows = &p.b_blocks[0];
    let wb = vec![1.5; p.dims.n];
    c.bench_function("svcqp/boxed_m60", |b| {
        b.iter(|| {
            train_boxed_signed(black_box(rows), 1.0, &wb, &QpOptions::default(), None).unwrap()
        })
    });
}

fn residual(c: &mut Criterion) {
    let (_, _, p) = separable_instance(36, 0, 5);
    let layout = ZLayout::of(&p.affine);
    let z = IterateZ::new(layout, vec![0.1; layout.len()]).unwrap();
    c.bench_function("residual/eval_and_jacobian_l36", |b| {
        b.iter(|| {
            let f = eval_residual(&p.affine, &z, 0.1).unwrap();
            let sel = select_active(&p.affine, &z).unwrap();
            (f, jacobian(&p.affine, &z, &sel).unwrap())
        })
    });
}

fn newton(c: &mut Criterion) {
    let m = toy_mpec();
    let z = IterateZ::new(ZLayout::of(&m), TOY_START.to_vec()).unwrap();
    c.bench_function("lpnewton/toy", |b| {
        b.iter(|| {
            inner_solve(
                &m,
                black_box(&z),
                TOY_TAU,
                1e-10,
                &LpNewtonConfig::default(),
            )
            .unwrap()
        })
    });
}

fn end_to_end(c: &mut Criterion) {
    let (data, split, p) = separable_instance(12, 6, 11);
    let mut g = c.benchmark_group("grlpn");
    g.sample_size(10);
    g.bench_function("separable_l12", |b| {
        b.iter(|| solve(&p, &data, &split, &SolverConfig::default()).unwrap())
    });
    g.finish();
}

criterion_group!(benches, lp, qp, residual, newton, end_to_end);
criterion_main!(benches);
