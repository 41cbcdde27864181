mod common;

use approx::assert_relative_eq;
use halfspace::eval::{
    abs_error, margin_domination_check, margin_error, zero_one_error, MarginTransfer,
};
use halfspace::kernel::{explicit_feature_map, gram, truncated_kernel, KernelSpec, DEFAULT_FEATURE_CAP};
use halfspace::polyspace::{approx_sigmoid_chebyshev, erf_taylor_coeffs, pb_norm, ChebyshevOptions};
use halfspace::solver::{clip_prob, solve_erm, Batch, SolverOptions, FEASIBILITY_SLACK};
use halfspace::transfer::{eval_transfer, lipschitz_check, uniform_grid, TransferKind, TransferVariant};
use halfspace::{composed_kernel, train};
use proptest::prelude::*;

use common::{ball, ball_points, random_dataset};

fn continuous_kind() -> impl Strategy<Value = TransferKind> {
    (prop_oneof![
        Just(TransferVariant::Sigmoid),
        Just(TransferVariant::Erf),
        Just(TransferVariant::PiecewiseLinear)
    ], 0.05f64..20.0)
        .prop_map(|(v, l)| TransferKind::new(v, l).unwrap())
}

proptest! {
    #[test]
    fn transfers_stay_in_unit_interval(kind in continuous_kind(), a in -1e3f64..1e3) {
        let v = eval_transfer(&kind, a).unwrap();
        prop_assert!((0.0..=1.0).contains(&v));
        let step = eval_transfer(&TransferKind::ZeroOne, a).unwrap();
        prop_assert!(step == 0.0 || step == 1.0);
    }

    #[test]
    fn transfers_are_monotone_and_centered(kind in continuous_kind(), a in -5.0f64..5.0, d in 0.0f64..2.0) {
        prop_assert!(eval_transfer(&kind, a).unwrap() <= eval_transfer(&kind, a + d).unwrap());
        prop_assert_eq!(eval_transfer(&kind, 0.0).unwrap(), 0.5);
    }

    #[test]
    fn transfers_are_point_symmetric(kind in continuous_kind(), a in -3.0f64..3.0) {
        let sum = eval_transfer(&kind, a).unwrap() + eval_transfer(&kind, -a).unwrap();
        match kind.variant() {
            TransferVariant::Erf => prop_assert!((sum - 1.0).abs() <= 1e-12),
            _ => prop_assert!((sum - 1.0).abs() <= f64::EPSILON, "sum = {}", sum),
        }
    }

    #[test]
    fn empirical_slope_respects_lipschitz(kind in continuous_kind(), n in 2usize..2000) {
        let slope = lipschitz_check(&kind, &uniform_grid(-1.0, 1.0, n)).unwrap();
        prop_assert!(slope <= kind.lipschitz().unwrap() * (1.0 + 1e-6));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn gram_is_symmetric_psd(seed in any::<u64>(), m in 2usize..=200, dim in 1usize..=6) {
        let g = gram(&ball_points(seed, m, dim), &KernelSpec::default()).unwrap();
        let k = g.matrix();
        for i in 0..m {
            prop_assert!(k[(i, i)] <= 2.0 + 1e-12);
            for j in 0..i {
                prop_assert_eq!(k[(i, j)], k[(j, i)]);
            }
        }
        prop_assert!(g.min_eigenvalue() >= -1e-8 * m as f64);
    }
}

proptest! {
    #[test]
    fn kernel_range(x in ball(3), x2 in ball(3), nu in 0.05f64..0.95) {
        let spec = KernelSpec::new(nu).unwrap();
        let k = composed_kernel(&x, &x2, &spec).unwrap();
        prop_assert!(k >= 1.0 / (1.0 + nu) - 1e-15 && k <= 1.0 / (1.0 - nu) + 1e-15);
    }

    #[test]
    fn geometric_tail_bound(x in ball(3), x2 in ball(3), d in 0usize..=40) {
        let full = composed_kernel(&x, &x2, &KernelSpec::default()).unwrap();
        let truncated = truncated_kernel(&x, &x2, d).unwrap();
        prop_assert!((full - truncated).abs() <= 2f64.powi(-(d as i32)) * (1.0 + 1e-12));
    }

    #[test]
    fn feature_map_reproduces_truncated_kernel(n in 1usize..=3, d in 0usize..=8, seed in any::<u64>()) {
        let pts = ball_points(seed, 2, n);
        let f = explicit_feature_map(&pts[0], d, DEFAULT_FEATURE_CAP).unwrap();
        let g = explicit_feature_map(&pts[1], d, DEFAULT_FEATURE_CAP).unwrap();
        let inner: f64 = f.iter().zip(&g).map(|(a, b)| a * b).sum();
        prop_assert!((inner - truncated_kernel(&pts[0], &pts[1], d).unwrap()).abs() <= 1e-10);
    }

    #[test]
    fn pb_norm_ignores_trailing_zeros(beta in proptest::collection::vec(-5.0f64..5.0, 0..40), z in 0usize..20) {
        let mut padded = beta.clone();
        padded.extend(std::iter::repeat_n(0.0, z));
        prop_assert_eq!(pb_norm(&beta), pb_norm(&padded));
    }

    #[test]
    fn clipping_never_hurts(p in -10.0f64..10.0, y in 0u8..=1) {
        let y = f64::from(y);
        prop_assert!((clip_prob(p) - y).abs() <= (p - y).abs());
    }

    #[test]
    fn margin_error_is_monotone_in_mu(seed in any::<u64>(), w_seed in any::<u64>(), mu1 in 0.001f64..1.0, mu2 in 0.001f64..1.0) {
        let data = random_dataset(seed, 60, 3);
        let w = common::unit_point(&mut <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(w_seed), 3);
        let (lo, hi) = if mu1 <= mu2 { (mu1, mu2) } else { (mu2, mu1) };
        let e_lo = margin_error(&w, lo, &data).unwrap();
        let e_hi = margin_error(&w, hi, &data).unwrap();
        prop_assert!(e_lo <= e_hi);
        prop_assert!((0.0..=1.0).contains(&e_lo) && (0.0..=1.0).contains(&e_hi));
    }

    #[test]
    fn margin_loss_is_dominated(seed in any::<u64>(), w_seed in any::<u64>(), mu in 0.01f64..0.5, eps in 0.01f64..0.9) {
        let data = random_dataset(seed, 50, 4);
        let w = common::unit_point(&mut <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(w_seed), 4);
        for t in [MarginTransfer::PiecewiseLinear, MarginTransfer::Sigmoid] {
            let report = margin_domination_check(&w, mu, &data, t, eps).unwrap();
            prop_assert_eq!(report.violations, 0);
            prop_assert!(report.mean_loss <= report.margin_error + report.slack + 1e-12);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn solver_is_feasible_and_deterministic(
        seed in any::<u64>(),
        m in 1usize..=30,
        b in 0.01f64..50.0,
        single in any::<bool>(),
    ) {
        let data = random_dataset(seed, m, 3);
        let opts = SolverOptions {
            max_iters: Some(400),
            seed,
            batch: if single { Batch::SingleSample } else { Batch::Full },
            ..Default::default()
        };
        let spec = KernelSpec::default();
        let (p1, r1) = train(&data.points(), &data.labels(), &spec, b, &opts).unwrap();
        let g = gram(&data.points(), &spec).unwrap();
        prop_assert!(g.quadratic_form(p1.alpha()) <= b * (1.0 + FEASIBILITY_SLACK));
        let (a2, r2) = solve_erm(&g, &data.labels(), b, &opts).unwrap();
        prop_assert_eq!(p1.alpha(), a2.as_slice());
        prop_assert_eq!(&r1, &r2);

        let abs = abs_error(|x| p1.predict_prob(x), &data).unwrap();
        let zo = zero_one_error(|x| p1.predict_label(x), &data).unwrap();
        prop_assert!((0.0..=1.0).contains(&abs) && (0.0..=1.0).contains(&zo));
        // clipping can only lower the absolute error below the training objective
        prop_assert!(abs <= r1.final_objective + 1e-12);
    }
}

#[test]
fn chebyshev_sup_error_is_the_measured_maximum() {
    let opts = ChebyshevOptions::default();
    for (l, eps) in [(1.0, 0.01), (3.0, 0.05), (5.0, 0.1)] {
        let p = approx_sigmoid_chebyshev(l, eps, &opts).unwrap();
        let kind = TransferKind::sigmoid(l).unwrap();
        let worst = uniform_grid(-1.0, 1.0, opts.grid_size)
            .into_iter()
            .map(|a| (p.eval(a) - kind.eval(a).unwrap()).abs())
            .fold(0.0, f64::max);
        assert!(worst <= p.sup_error);
        assert_relative_eq!(worst, p.sup_error, max_relative = 1e-12);
    }
}

#[test]
fn erf_taylor_error_decreases_past_dominance() {
    for l in [0.5, 1.0, 2.0, 3.0] {
        // terms shrink once n exceeds (sqrt(pi) L)^2
        let start = (std::f64::consts::PI * l * l).ceil() as usize;
        let mut previous = f64::INFINITY;
        for d in ((2 * start + 1)..=79).step_by(2) {
            let e = erf_taylor_coeffs(l, d).unwrap().sup_error;
            if e < 1e-6 {
                break;
            }
            assert!(e <= previous, "L = {l}, degree {d}: {e} > {previous}");
            previous = e;
        }
    }
}
