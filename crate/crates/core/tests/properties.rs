use std::sync::Arc;

use mcbcd_core::analysis::{envelope_linear, envelope_sublinear, fit_rate, rate_constants, FitKind};
use mcbcd_core::chain::{phi_product, stationary_distribution, TransitionSchedule, WalkSampler};
use mcbcd_core::dmdp::{bellman_residual, direct_solve, DmdpModel};
use mcbcd_core::objective::{block_consistency, gradient_check, make_quadratic, BlockLayout, BlockObjective, CoupledQuartic};
use mcbcd_core::rng::{stream_rng, SeedStreams};
use mcbcd_core::select::BlockSelector;
use mcbcd_core::solver::{step_sum_audit, NoiseModel, Solver, SolverConfig};
use mcbcd_core::DMatrix;
use proptest::prelude::*;

/// Row-stochastic matrix with a positive diagonal and a ring backbone, so
/// the chain is irreducible and aperiodic.
fn chain_matrix() -> impl Strategy<Value = DMatrix<f64>> {
    (2usize..9).prop_flat_map(|n| {
        prop::collection::vec(0.0f64..1.0, n * n).prop_map(move |w| {
            let mut p = DMatrix::from_fn(n, n, |i, j| {
                let base = if i == j || j == (i + 1) % n { 0.2 } else { 0.0 };
                base + if w[i * n + j] > 0.6 { w[i * n + j] } else { 0.0 }
            });
            for i in 0..n {
                let s: f64 = p.row(i).sum();
                p.row_mut(i).unscale_mut(s);
            }
            p
        })
    })
}

fn quadratic(n: usize, entries: &[f64], shift: f64) -> mcbcd_core::objective::Quadratic {
    let b = DMatrix::from_fn(n, n, |i, j| entries[i * n + j]);
    let q = &b * b.transpose() + DMatrix::identity(n, n) * shift;
    let c = (0..n).map(|i| entries[(i * 7) % (n * n)]).collect();
    make_quadratic(q, c, BlockLayout::scalar(n)).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn phi_products_are_stochastic(p in chain_matrix(), m in 0usize..5, len in 0usize..12) {
        let s = TransitionSchedule::from_matrix(p).unwrap();
        let phi = phi_product(&s, m, len);
        for i in 0..phi.nrows() {
            prop_assert!((phi.row(i).sum() - 1.0).abs() < 1e-12);
            prop_assert!(phi.row(i).iter().all(|&v| v >= 0.0));
        }
    }

    #[test]
    fn stationary_is_fixed_point(p in chain_matrix()) {
        let s = TransitionSchedule::from_matrix(p.clone()).unwrap();
        let st = stationary_distribution(&s).unwrap();
        prop_assert!((st.pi.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(st.residual(&p) <= 1e-10);
        prop_assert!(st.pi_min > 0.0);
    }

    #[test]
    fn walks_follow_support(p in chain_matrix(), seed in 0u64..1000) {
        let s = Arc::new(TransitionSchedule::from_matrix(p.clone()).unwrap());
        let mut w = WalkSampler::new(s, 0, stream_rng(seed, 0));
        let mut prev = w.next_block();
        for _ in 0..200 {
            let next = w.next_block();
            prop_assert!(p[(prev, next)] > 0.0);
            prev = next;
        }
    }

    #[test]
    fn block_descent_lemma(n in 2usize..7, entries in prop::collection::vec(-1.0f64..1.0, 49),
                           x in prop::collection::vec(-3.0f64..3.0, 7), block in 0usize..7) {
        let f = quadratic(n, &entries, 0.1);
        let x = &x[..n];
        let i = block % n;
        let l = f.smoothness().block_lipschitz;
        let g = f.block_gradient(x, i);
        let mut y = x.to_vec();
        y[i] -= g[0] / l;
        prop_assert!(f.value(&y) <= f.value(x) - g[0] * g[0] / (2.0 * l) + 1e-9 * (1.0 + f.value(x).abs()));
    }

    #[test]
    fn quadratic_convexity_probe(n in 2usize..7, entries in prop::collection::vec(-1.0f64..1.0, 49),
                                 a in prop::collection::vec(-3.0f64..3.0, 7), b in prop::collection::vec(-3.0f64..3.0, 7),
                                 t in 0.0f64..1.0) {
        let f = quadratic(n, &entries, 0.0);
        let (a, b) = (&a[..n], &b[..n]);
        let mid: Vec<f64> = a.iter().zip(b).map(|(u, v)| t * u + (1.0 - t) * v).collect();
        prop_assert!(f.value(&mid) <= t * f.value(a) + (1.0 - t) * f.value(b) + 1e-9);
        prop_assert!(f.value(a) >= f.lower_bound().unwrap() - 1e-9);
    }

    #[test]
    fn quartic_gradients(n in 1usize..8, x in prop::collection::vec(-2.5f64..2.5, 8)) {
        let f = CoupledQuartic::new(n, 2.0, 0.5).unwrap();
        prop_assert!(gradient_check(&f, &x[..n], 1e-6) < 1e-5);
        prop_assert!(block_consistency(&f, &x[..n]) < 1e-12);
    }

    #[test]
    fn step_sum_holds_on_random_runs(n in 2usize..6, entries in prop::collection::vec(-1.0f64..1.0, 36),
                                     scale in 0.1f64..1.95, seed in 0u64..50, noisy in any::<bool>()) {
        let f = quadratic(n, &entries, 0.05);
        let p = DMatrix::from_element(n, n, 1.0 / n as f64);
        let s = Arc::new(TransitionSchedule::from_matrix(p).unwrap());
        let mut cfg = SolverConfig::new(scale / f.smoothness().block_lipschitz, 300);
        cfg.initial_point = Some(vec![1.0; n]);
        if noisy {
            cfg.noise = NoiseModel::SquareSummable { sigma0: 0.5 };
        }
        let trace = Solver::new(&f, cfg).run_chain(s, SeedStreams::new(seed, 0)).unwrap();
        let r = step_sum_audit(&trace, f.smoothness().block_lipschitz, trace.initial().f_value, f.lower_bound().unwrap());
        prop_assert!(r.passed(), "{:?}", r);
    }

    #[test]
    fn direct_solve_is_bellman_fixed_point(n in 2usize..12, seed in 0u64..500, discount in 0.1f64..0.99) {
        let m = DmdpModel::random(n, discount, &mut stream_rng(seed, 3)).unwrap();
        let v = direct_solve(&m);
        let scale = m.rewards().iter().fold(1.0_f64, |a, r| a.max(r.abs())) / (1.0 - discount);
        prop_assert!(bellman_residual(&m, &v.v) <= 1e-10 * scale);
    }

    #[test]
    fn envelopes_are_nonincreasing(f0 in 0.1f64..100.0, c in 1.0f64..1e4, r in 0.1f64..10.0,
                                   nu in 0.01f64..1.0, tau in 1usize..50) {
        let grid: Vec<usize> = (0..2000).step_by(7).collect();
        let sub = envelope_sublinear(f0, c, r, tau, &grid);
        let lin = envelope_linear(f0, c.max(nu * 2.0), nu, tau, &grid).bound;
        for w in sub.windows(2).chain(lin.windows(2)) {
            prop_assert!(w[1] <= w[0]);
        }
        prop_assert!((sub[0] - f0).abs() <= 1e-12 * f0 && (lin[0] - f0).abs() <= 1e-12 * f0);
    }

    #[test]
    fn rate_constants_grow_with_tau(gamma_scale in 0.05f64..1.9, tau in 1usize..100, pi in 0.01f64..0.5) {
        let (l, lr) = (2.0, 3.0);
        let a = rate_constants(gamma_scale / l, l, lr, tau, pi).unwrap();
        let b = rate_constants(gamma_scale / l, l, lr, tau + 1, pi).unwrap();
        prop_assert!(b.c1 >= a.c1 && b.c2 >= a.c2 && b.c_tau >= a.c_tau);
    }

    #[test]
    fn power_laws_are_recovered(exponent in 0.2f64..3.0, scale in 0.1f64..10.0) {
        let curve: Vec<(usize, f64)> = (1..500).map(|k| (k, scale * (k as f64).powf(-exponent))).collect();
        let fit = fit_rate(&curve, 10..=400, FitKind::LogLog).unwrap();
        prop_assert!((fit.slope + exponent).abs() < 1e-9);
        prop_assert!(fit.r_squared > 1.0 - 1e-9);
    }
}

#[test]
fn complete_uniform_walk_matches_iid() {
    use mcbcd_core::rng::Purpose;
    use mcbcd_core::select::IidSelector;
    let n = 9;
    let s = Arc::new(TransitionSchedule::from_matrix(DMatrix::from_element(n, n, 1.0 / n as f64)).unwrap());
    let streams = SeedStreams::new(3, 4);
    let (mut walk, _) =
        mcbcd_core::solver::chain_sampler(s, streams, mcbcd_core::solver::InitialBlock::Stationary).unwrap();
    let mut iid = IidSelector::uniform(n, streams.rng(Purpose::Selection));
    for _ in 0..10_000 {
        assert_eq!(walk.next_block(), iid.next_block());
    }
}
