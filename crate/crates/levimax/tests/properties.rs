//! Property suites for the smoothing kernel, the expression engine and
//! the structure representations.

use levimax::almost_complex::{
    complex_matrix_of_j, j_from_complex_matrix, operator_norm, AlmostComplexStructure,
    ComplexMatrixField,
};
use levimax::field::{complexify, DerivIndex, ScalarField};
use levimax::regmax::{RegMax, ThetaVector};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use proptest::prelude::*;

fn theta_vec(k: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.05f64..2.0, k)
}

fn t_vec(k: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-10.0f64..10.0, k)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn regmax_is_sandwiched(
        k in 1usize..=4,
        t in t_vec(4),
        theta in theta_vec(4),
    ) {
        run_sandwich(&t[..k], &theta[..k]);
    }
}

fn run_sandwich(t: &[f64], theta: &[f64]) {
    let rm = RegMax::new();
    let tv = ThetaVector::new(theta.to_vec()).unwrap();
    let value = rm.eval(t, &tv).unwrap();
    let lower = t.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let upper = t
        .iter()
        .zip(theta)
        .map(|(a, b)| a + b)
        .fold(f64::NEG_INFINITY, f64::max);
    assert!(value >= lower - 1e-9, "{value} < {lower}");
    assert!(value <= upper + 1e-9, "{value} > {upper}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn regmax_translation_equivariance(
        t in t_vec(3),
        theta in theta_vec(3),
        c in -20.0f64..20.0,
    ) {
        let rm = RegMax::new();
        let tv = ThetaVector::new(theta).unwrap();
        let base = rm.eval(&t, &tv).unwrap();
        let shifted: Vec<f64> = t.iter().map(|x| x + c).collect();
        let moved = rm.eval(&shifted, &tv).unwrap();
        prop_assert!((moved - base - c).abs() <= 1e-9, "{moved} vs {base} + {c}");
    }

    #[test]
    fn regmax_permutation_invariance(
        t in t_vec(4),
        theta in theta_vec(4),
    ) {
        let rm = RegMax::new();
        let tv = ThetaVector::new(theta.clone()).unwrap();
        let base = rm.eval(&t, &tv).unwrap();
        // rotate both vectors by one slot
        let mut t2 = t.clone();
        let mut th2 = theta.clone();
        t2.rotate_left(1);
        th2.rotate_left(1);
        let tv2 = ThetaVector::new(th2).unwrap();
        let rotated = rm.eval(&t2, &tv2).unwrap();
        prop_assert!((rotated - base).abs() <= 1e-9);
    }

    #[test]
    fn regmax_monotone_in_arguments(
        t in t_vec(3),
        theta in theta_vec(3),
        bump in 0.0f64..5.0,
        slot in 0usize..3,
    ) {
        let rm = RegMax::new();
        let tv = ThetaVector::new(theta).unwrap();
        let base = rm.eval(&t, &tv).unwrap();
        let mut t2 = t.clone();
        t2[slot] += bump;
        let bigger = rm.eval(&t2, &tv).unwrap();
        prop_assert!(bigger >= base - 1e-10);
    }

    #[test]
    fn regmax_midpoint_convexity(
        t in t_vec(3),
        s in t_vec(3),
        theta in theta_vec(3),
    ) {
        let rm = RegMax::new();
        let tv = ThetaVector::new(theta).unwrap();
        let mid: Vec<f64> = t.iter().zip(&s).map(|(a, b)| 0.5 * (a + b)).collect();
        let lhs = rm.eval(&mid, &tv).unwrap();
        let rhs = 0.5 * (rm.eval(&t, &tv).unwrap() + rm.eval(&s, &tv).unwrap());
        prop_assert!(lhs <= rhs + 1e-9, "{lhs} > {rhs}");
    }

    #[test]
    fn regmax_gradient_is_a_probability_vector(
        t in t_vec(3),
        theta in theta_vec(3),
    ) {
        let rm = RegMax::new();
        let tv = ThetaVector::new(theta).unwrap();
        let grad = rm.grad(&t, &tv).unwrap();
        let sum: f64 = grad.iter().sum();
        prop_assert!((sum - 1.0).abs() <= 1e-8, "sum {sum}");
        for g in grad {
            prop_assert!(g >= -1e-10);
        }
    }

    #[test]
    fn regmax_gradient_matches_finite_differences(
        t in t_vec(2),
        theta in theta_vec(2),
        slot in 0usize..2,
    ) {
        let rm = RegMax::new();
        let tv = ThetaVector::new(theta).unwrap();
        let grad = rm.grad(&t, &tv).unwrap();
        let h = 1e-5;
        let mut plus = t.clone();
        let mut minus = t.clone();
        plus[slot] += h;
        minus[slot] -= h;
        let fd = (rm.eval(&plus, &tv).unwrap() - rm.eval(&minus, &tv).unwrap()) / (2.0 * h);
        prop_assert!((grad[slot] - fd).abs() <= 1e-6, "{} vs {}", grad[slot], fd);
    }
}

#[test]
fn regmax_is_smooth_across_the_diagonal() {
    // second differences of t1 -> M(t1, 0) stay continuous through t1 = t2
    let rm = RegMax::new();
    let tv = ThetaVector::new(vec![1.0, 1.0]).unwrap();
    let h = 1e-3;
    let eval = |t1: f64| rm.eval(&[t1, 0.0], &tv).unwrap();
    let second = |t1: f64| eval(t1 + h) - 2.0 * eval(t1) + eval(t1 - h);
    let mut prev = second(-0.3);
    let mut t1 = -0.3 + h;
    while t1 <= 0.3 {
        let cur = second(t1);
        assert!(
            (cur - prev).abs() <= 1e-4,
            "second-difference jump {} at t1 = {t1}",
            (cur - prev).abs()
        );
        prev = cur;
        t1 += h;
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn exact_derivatives_match_numeric_differencing(
        a in -2.0f64..2.0,
        b in -2.0f64..2.0,
        x in -1.0f64..1.0,
        y in -1.0f64..1.0,
    ) {
        let text = format!("{a} * x1^2 + {b} * sin(x1 * x2) + exp(0.3 * x2)");
        let field = ScalarField::parse(&text, 1).unwrap();
        let p = [x, y];
        for idx in 1..=2 {
            let exact = field.derivative(&p, DerivIndex::First(idx)).unwrap();
            let h = 1e-5;
            let mut plus = p;
            let mut minus = p;
            plus[idx - 1] += h;
            minus[idx - 1] -= h;
            let fd = (field.eval(&plus).unwrap() - field.eval(&minus).unwrap()) / (2.0 * h);
            prop_assert!((exact - fd).abs() <= 1e-6 * (1.0 + exact.abs()), "{exact} vs {fd}");
        }
    }

    #[test]
    fn complex_matrix_round_trips_through_j(
        re in prop::collection::vec(-0.2f64..0.2, 4),
        im in prop::collection::vec(-0.2f64..0.2, 4),
    ) {
        let a = DMatrix::from_fn(2, 2, |i, j| Complex64::new(re[2 * i + j], im[2 * i + j]));
        prop_assume!(operator_norm(&a) < 0.9);
        let j = j_from_complex_matrix(&a).unwrap();
        let back = complex_matrix_of_j(&j).unwrap();
        prop_assert!((&back - &a).norm() <= 1e-10);
        let d = j.nrows();
        let square = &j * &j + DMatrix::<f64>::identity(d, d);
        prop_assert!(square.norm() <= 1e-10);
    }

    #[test]
    fn defining_oracle_holds_for_random_structures(
        re in prop::collection::vec(-0.2f64..0.2, 4),
        im in prop::collection::vec(-0.2f64..0.2, 4),
        w_raw in prop::collection::vec(-1.0f64..1.0, 4),
    ) {
        let a = DMatrix::from_fn(2, 2, |i, j| Complex64::new(re[2 * i + j], im[2 * i + j]));
        prop_assume!(operator_norm(&a) < 0.9);
        let structure =
            AlmostComplexStructure::from_complex_matrix_field(ComplexMatrixField::Constant(a));
        let w = complexify(&w_raw);
        prop_assume!(w.norm() > 1e-3);
        let p = vec![0.0; 4];
        let residual = structure.defining_oracle_residual(&p, &w).unwrap();
        prop_assert!(residual <= 1e-10 * w.norm().max(1.0), "residual {residual}");
    }

    #[test]
    fn standard_structure_rotates_tangent_vectors(
        v in prop::collection::vec(-3.0f64..3.0, 4),
    ) {
        let structure = AlmostComplexStructure::standard(2);
        let j = structure.j_at(&[0.0; 4]).unwrap();
        let vv = DVector::from_row_slice(&v);
        let jv = &j * &vv;
        // J acts as multiplication by i on each complex slot
        for k in 0..2 {
            prop_assert!((jv[2 * k] + v[2 * k + 1]).abs() <= 1e-14);
            prop_assert!((jv[2 * k + 1] - v[2 * k]).abs() <= 1e-14);
        }
    }
}
