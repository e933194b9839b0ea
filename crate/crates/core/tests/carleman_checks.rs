use convexify_core::carleman_checks::{
    carleman_ratio, carleman_test_function, clamp_boundary_columns, early_support_test_function,
    random_fourier_field, volterra_bound_check,
};
use convexify_core::error::Error;
use convexify_core::mesh::{ScalarField, UniformGrid};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn unit_rectangle(t_max: f64, nx: usize, nt: usize) -> UniformGrid {
    UniformGrid::new(0.0, 1.0, 0.0, t_max, nx, nt).unwrap()
}

/// Composite Simpson on `[a, b]` with `n` (even) panels.
fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let inner: f64 = (1..n).map(|k| if k % 2 == 1 { 4.0 } else { 2.0 } * f(a + k as f64 * h)).sum();
    h / 3.0 * (f(a) + f(b) + inner)
}

#[test]
fn zero_field_gives_zero_sides() {
    let g = ScalarField::zeros(unit_rectangle(2.0, 21, 41));
    let r = volterra_bound_check(&g, 1.0, 0.5).unwrap();
    assert_eq!((r.lhs, r.rhs), (0.0, 0.0));
    assert!(r.degenerate);
}

#[test]
fn constant_field_matches_quadrature_oracle() {
    let grid = unit_rectangle(2.0, 801, 1601);
    let g = ScalarField::from_fn(grid, |_, _| 1.0);
    let r = volterra_bound_check(&g, 1.0, 1.0).unwrap();
    let ex = simpson(|x| (-2.0 * x).exp(), 0.0, 1.0, 2000);
    let lhs = ex * simpson(|t| t * t * (-2.0 * t).exp(), 0.0, 2.0, 4000);
    let rhs = ex * simpson(|t| (-2.0 * t).exp(), 0.0, 2.0, 4000);
    assert!((r.lhs - lhs).abs() < 5e-3 * lhs, "{} vs {lhs}", r.lhs);
    assert!((r.rhs - rhs).abs() < 5e-3 * rhs, "{} vs {rhs}", r.rhs);
    assert!(r.ratio < 1.0);
}

#[test]
fn volterra_check_rejects_nonpositive_parameters() {
    let g = ScalarField::zeros(unit_rectangle(1.0, 5, 5));
    assert!(matches!(volterra_bound_check(&g, 0.0, 0.5), Err(Error::InequalityInput(_))));
    assert!(matches!(volterra_bound_check(&g, 1.0, -0.5), Err(Error::InequalityInput(_))));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn volterra_bound_holds_for_smooth_fields(seed in any::<u64>()) {
        let grid = unit_rectangle(2.0, 101, 201);
        let g = random_fourier_field(grid, 5, &mut ChaCha8Rng::seed_from_u64(seed));
        for lambda in [1.0, 2.0, 5.0] {
            for alpha in [0.2, 0.5] {
                let r = volterra_bound_check(&g, lambda, alpha).unwrap();
                prop_assert!(r.lhs >= 0.0 && r.rhs >= 0.0);
                prop_assert!(r.lhs <= r.rhs * (1.0 + 1e-6), "lambda {} alpha {}: {} > {}", lambda, alpha, r.lhs, r.rhs);
            }
        }
    }
}

#[test]
fn zero_function_is_degenerate() {
    let u = ScalarField::zeros(unit_rectangle(2.0, 41, 41));
    let r = carleman_ratio(&u, 2.0, 0.25).unwrap();
    assert_eq!((r.lhs, r.rhs), (0.0, 0.0));
    assert!(r.degenerate);
}

#[test]
fn nonzero_boundary_columns_are_rejected() {
    let u = ScalarField::from_fn(unit_rectangle(2.0, 41, 41), |x, t| (x + 0.1) * t);
    assert!(matches!(carleman_ratio(&u, 2.0, 0.25), Err(Error::InequalityInput(_))));
    assert!(carleman_ratio(&clamp_boundary_columns(u), 2.0, 0.25).is_ok());
}

#[test]
fn carleman_lambda_must_be_at_least_one() {
    let u = ScalarField::zeros(unit_rectangle(2.0, 41, 41));
    assert!(carleman_ratio(&u, 0.5, 0.25).is_err());
}

#[test]
fn carleman_ratio_is_bounded_below_in_lambda() {
    let grid = unit_rectangle(2.0, 801, 801);
    let u = clamp_boundary_columns(carleman_test_function(grid));
    let base = carleman_ratio(&u, 2.0, 0.25).unwrap().ratio;
    assert!(base > 0.0);
    for lambda in [4.0, 8.0, 16.0] {
        let r = carleman_ratio(&u, lambda, 0.25).unwrap();
        assert!(!r.degenerate);
        assert!(r.ratio >= 0.5 * base, "lambda {lambda}: {} vs {base}", r.ratio);
    }
}

#[test]
fn negative_terms_vanish_for_early_support() {
    let grid = unit_rectangle(2.0, 401, 401);
    let u = clamp_boundary_columns(early_support_test_function(grid));
    for lambda in [2.0, 4.0, 8.0, 16.0] {
        let terms = carleman_ratio(&u, lambda, 0.25).unwrap().terms.unwrap();
        assert!(terms.final_time < 1e-12);
    }
}

#[test]
fn initial_trace_terms_are_nonnegative() {
    let grid = unit_rectangle(2.0, 201, 201);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..20 {
        let u = clamp_boundary_columns(random_fourier_field(grid, 5, &mut rng));
        let terms = carleman_ratio(&u, 3.0, 0.4).unwrap().terms.unwrap();
        assert!(terms.trace_gradient >= 0.0 && terms.trace_value >= 0.0);
    }
}
