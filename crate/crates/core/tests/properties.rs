use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

use steinrule::analysis::{correlation_table, Dataset};
use steinrule::model::{
    estimate_pair, fit_restricted, joint_moments_restricted, EstimatePair, JointMoments,
    LinearModel, LinearRestriction,
};
use steinrule::risk::{check_h3, courant_ratios};
use steinrule::shrinkage::{combine, HFunction, ShrinkageSpec};
use steinrule::stats::MeanVar;
use steinrule::{inv_chisq_mean, Competitor};

fn vec_strategy(k: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-50.0..50.0f64, k)
}

fn h_strategy() -> impl Strategy<Value = HFunction> {
    prop_oneof![
        Just(HFunction::inverse_sq_norm()),
        (2.0..12.0f64).prop_map(|p| HFunction::smooth_inverse(p).unwrap()),
        Just(HFunction::zero()),
    ]
}

fn pair_strategy() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (1usize..8).prop_flat_map(|k| (vec_strategy(k), vec_strategy(k)))
}

fn matrix_strategy(rows: usize, cols: usize) -> impl Strategy<Value = DMatrix<f64>> {
    prop::collection::vec(-3.0..3.0f64, rows * cols)
        .prop_map(move |v| DMatrix::from_row_slice(rows, cols, &v))
}

/// A full-rank regression design with an intercept column.
fn design_strategy() -> impl Strategy<Value = (LinearModel, DVector<f64>)> {
    (3usize..7).prop_flat_map(|k| {
        let n = 3 * k + 4;
        (
            matrix_strategy(n, k - 1),
            prop::collection::vec(-2.0..2.0f64, n),
            vec_strategy(k),
            0.1..3.0f64,
        )
            .prop_filter_map("well-conditioned design", move |(cols, y, beta, sigma)| {
                let mut x = DMatrix::from_element(n, k, 1.0);
                x.view_mut((0, 1), (n, k - 1)).copy_from(&cols);
                let sv = x.clone().svd(false, false).singular_values;
                if sv.min() < 1e-3 * sv.max() {
                    return None;
                }
                let model = LinearModel::new(x, DVector::from_vec(y), sigma).ok()?;
                Some((model, DVector::from_vec(beta)))
            })
    })
}

fn restriction_strategy(k: usize) -> impl Strategy<Value = LinearRestriction> {
    (1..=k).prop_flat_map(move |q| {
        (matrix_strategy(q, k), prop::collection::vec(-5.0..5.0f64, q)).prop_filter_map(
            "full row rank restriction",
            move |(rm, r)| {
                let sv = rm.clone().svd(false, false).singular_values;
                if sv.min() < 1e-2 * sv.max() {
                    return None;
                }
                LinearRestriction::new(rm, DVector::from_vec(r)).ok()
            },
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn weight_times_squared_distance_is_bounded((x, y) in pair_strategy(), h in h_strategy()) {
        let dist_sq: f64 = x.iter().zip(&y).map(|(a, b)| (a - b) * (a - b)).sum();
        prop_assume!(dist_sq > 0.0);
        let product = h.eval(&x, &y).abs() * dist_sq;
        prop_assert!(product <= h.q0() * (1.0 + 1e-12), "product {product} > q0 {}", h.q0());
    }

    #[test]
    fn combination_is_translation_equivariant(
        (x, y) in pair_strategy(),
        shift in -100.0..100.0f64,
        h in h_strategy(),
        c in -5.0..5.0f64,
    ) {
        let k = x.len();
        let pair = EstimatePair::new(DVector::from_vec(x.clone()), DVector::from_vec(y.clone())).unwrap();
        let t = DVector::from_fn(k, |i, _| shift * (i as f64 + 1.0));
        let moved = EstimatePair::new(&pair.beta_hat + &t, &pair.beta_tilde + &t).unwrap();
        prop_assume!(!combine(&pair, &ShrinkageSpec::new(h.clone(), c).unwrap()).degenerate);
        let spec = ShrinkageSpec::new(h, c).unwrap();
        let a = combine(&pair, &spec).estimate + &t;
        let b = combine(&moved, &spec).estimate;
        let scale = 1.0 + a.amax();
        prop_assert!((a - b).amax() <= 1e-8 * scale);
    }

    #[test]
    fn zero_coefficient_returns_base_estimate((x, y) in pair_strategy(), h in h_strategy()) {
        let pair = EstimatePair::new(DVector::from_vec(x), DVector::from_vec(y)).unwrap();
        let out = combine(&pair, &ShrinkageSpec::new(h, 0.0).unwrap());
        prop_assert_eq!(out.estimate, pair.beta_hat);
    }

    #[test]
    fn zero_weight_returns_base_estimate((x, y) in pair_strategy(), c in -5.0..5.0f64) {
        let pair = EstimatePair::new(DVector::from_vec(x), DVector::from_vec(y)).unwrap();
        let out = combine(&pair, &ShrinkageSpec::new(HFunction::zero(), c).unwrap());
        prop_assert_eq!(out.estimate, pair.beta_hat);
    }

    #[test]
    fn inverse_chi_square_mean_decreases_in_k_and_lambda(k in 3usize..40, lambda in 0.0..200.0f64, step in 0.01..20.0f64) {
        let base = inv_chisq_mean(k, lambda).unwrap();
        prop_assert!(base > 0.0 && base <= 1.0 / (k as f64 - 2.0) * (1.0 + 1e-12));
        prop_assert!(inv_chisq_mean(k + 1, lambda).unwrap() < base);
        prop_assert!(inv_chisq_mean(k, lambda + step).unwrap() < base);
    }

    #[test]
    fn restricted_fit_satisfies_restriction(
        (model, restriction) in design_strategy()
            .prop_flat_map(|(model, _)| { let k = model.k(); (Just(model), restriction_strategy(k)) }),
    ) {
        let beta_tilde = fit_restricted(&model, &restriction).unwrap();
        let residual = restriction.matrix() * &beta_tilde - restriction.r();
        let scale = 1.0 + restriction.r().amax();
        prop_assert!(residual.amax() <= 1e-8 * scale, "residual {}", residual.amax());

        let pair = estimate_pair(&model, &Competitor::Restricted(restriction.clone())).unwrap();
        prop_assert!((&pair.beta_tilde - &beta_tilde).amax() <= 1e-12 * (1.0 + beta_tilde.amax()));
    }

    #[test]
    fn restricted_moments_satisfy_idempotency_condition(
        (model, beta) in design_strategy(),
        q_frac in 0.0..1.0f64,
        offset in -2.0..2.0f64,
    ) {
        let k = model.k();
        let q = 1 + ((k as f64 - 1.0) * q_frac) as usize;
        let indices: Vec<usize> = (k - q..k).collect();
        let values: Vec<f64> = indices.iter().map(|&i| beta[i] + offset).collect();
        let restriction = LinearRestriction::select(k, &indices, &values).unwrap();
        let m = joint_moments_restricted(&model, &restriction, &beta).unwrap();
        prop_assert_eq!(m.q(), q);
        let lambda = steinrule::linalg::spd_inverse(m.a()).unwrap();
        for report in check_h3(&m, &lambda).unwrap() {
            prop_assert!(report.holds, "{}", report.line());
        }
    }

    #[test]
    fn quadratic_form_ratios_respect_eigenvalue_bounds(
        m in 1usize..9,
        seed in any::<u64>(),
    ) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut normal = || rng.sample::<f64, _>(rand_distr::StandardNormal);
        let c = DMatrix::from_fn(m, m, |_, _| normal());
        let x = DVector::from_fn(m, |_, _| normal());
        let y = DVector::from_fn(m, |_, _| normal());
        for (lhs, rhs) in courant_ratios(&c, &x, &y) {
            prop_assert!(lhs <= rhs * (1.0 + 1e-12), "{lhs} > {rhs}");
        }
    }

    #[test]
    fn nonsingular_moments_have_full_rank(k in 1usize..8, seed in any::<u64>()) {
        let m = steinrule::risk::random_joint_moments(k, seed).unwrap();
        prop_assert_eq!(m.q(), k);
        prop_assert!(m.psi0() > 0.0);
    }

    #[test]
    fn correlation_table_is_symmetric_with_unit_diagonal(
        cols in 2usize..6,
        rows in 5usize..40,
        seed in any::<u64>(),
    ) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let data = DMatrix::from_fn(rows, cols, |_, _| rng.sample::<f64, _>(rand_distr::StandardNormal));
        let names = (0..cols).map(|i| format!("v{i}")).collect();
        let table = correlation_table(&Dataset::new(names, data).unwrap()).unwrap();
        for i in 0..cols {
            prop_assert!((table.r[i][i] - 1.0).abs() < 1e-12);
            for j in 0..cols {
                prop_assert_eq!(table.r[i][j], table.r[j][i]);
                prop_assert_eq!(table.p[i][j], table.p[j][i]);
                prop_assert!(table.r[i][j].abs() <= 1.0 + 1e-12);
                prop_assert!((0.0..=1.0).contains(&table.p[i][j]));
            }
        }
    }

    #[test]
    fn merged_accumulators_match_sequential(values in prop::collection::vec(-1e3..1e3f64, 2..200), split in 0.0..1.0f64) {
        let cut = ((values.len() as f64) * split) as usize;
        let whole: MeanVar = values.iter().copied().collect();
        let mut left: MeanVar = values[..cut].iter().copied().collect();
        let right: MeanVar = values[cut..].iter().copied().collect();
        left.merge(&right);
        prop_assert_eq!(left.count(), whole.count());
        prop_assert!((left.mean() - whole.mean()).abs() <= 1e-9 * (1.0 + whole.mean().abs()));
        prop_assert!((left.variance() - whole.variance()).abs() <= 1e-8 * (1.0 + whole.variance()));
    }
}

#[test]
fn weight_bound_holds_on_many_random_pairs() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
    let kinds = [
        HFunction::inverse_sq_norm(),
        HFunction::smooth_inverse(2.0).unwrap(),
        HFunction::smooth_inverse(3.0).unwrap(),
        HFunction::smooth_inverse(8.0).unwrap(),
    ];
    for _ in 0..100_000 {
        let k = rng.random_range(1..8);
        let scale = 10f64.powf(rng.random_range(-4.0..4.0));
        let x: Vec<f64> = (0..k).map(|_| scale * rng.sample::<f64, _>(rand_distr::StandardNormal)).collect();
        let y: Vec<f64> = (0..k).map(|_| scale * rng.sample::<f64, _>(rand_distr::StandardNormal)).collect();
        let dist_sq: f64 = x.iter().zip(&y).map(|(a, b)| (a - b) * (a - b)).sum();
        for h in &kinds {
            let product = h.eval(&x, &y).abs() * dist_sq;
            assert!(product <= h.q0() * (1.0 + 1e-12), "{} at {dist_sq}: {product}", h.label());
        }
        // 1/x * x is 1 up to one rounding
        let unit = HFunction::inverse_sq_norm().eval(&x, &y) * dist_sq;
        assert!((unit - 1.0).abs() <= 2.0 * f64::EPSILON, "{unit}");
    }
}

#[test]
fn identity_moments_have_expected_factor_quantities() {
    for k in 1..7 {
        let m = JointMoments::identity(k);
        assert_eq!(m.q(), k);
        assert!((m.trace_a() - k as f64).abs() < 1e-12);
        assert!((m.psi0() - 2.0).abs() < 1e-12);
        assert_eq!(m.mu_norm_sq(), 0.0);
    }
}
