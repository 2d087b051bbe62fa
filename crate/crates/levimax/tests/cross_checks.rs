//! Cross-validation against independent re-implementations: a
//! kink-splitting quadrature oracle for the smoothed maximum and a
//! two-path comparison for coordinate changes of structure matrices.

use levimax::almost_complex::{
    pushforward, remark1_map, remark1_structure, transform_complex_matrix, ComplexMatrixField,
};
use levimax::quad::g64;
use levimax::regmax::{Mollifier, RegMax, ThetaVector};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

/// Direct two-variable quadrature of the defining integral for k = 2,
/// splitting the inner integral at the kink of the integrand so plain
/// Gauss-Legendre converges.
fn regmax2_oracle(t: &[f64; 2], theta: &[f64; 2]) -> f64 {
    let moll = Mollifier::standard();
    let integrand = |s1: f64| {
        let a = t[0] + theta[0] * s1;
        let inner = |s2: f64| a.max(t[1] + theta[1] * s2) * moll.omega(s2);
        let kink = (a - t[1]) / theta[1];
        let split = if kink > 0.0 && kink < 1.0 {
            g64().integrate(0.0, kink, inner) + g64().integrate(kink, 1.0, inner)
        } else {
            g64().integrate(0.0, 1.0, inner)
        };
        split * moll.omega(s1)
    };
    // split the outer integral where the inner kink crosses 0 or 1, since
    // higher s1-derivatives jump there
    let mut cuts = vec![0.0, 1.0];
    for target in [t[1], t[1] + theta[1]] {
        let s1 = (target - t[0]) / theta[0];
        if s1 > 0.0 && s1 < 1.0 {
            cuts.push(s1);
        }
    }
    cuts.sort_by(f64::total_cmp);
    cuts.windows(2)
        .map(|w| g64().integrate(w[0], w[1], integrand))
        .sum()
}

#[test]
fn regmax_matches_the_kink_splitting_oracle() {
    let rm = RegMax::new();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    for _ in 0..200 {
        let t = [rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0)];
        let theta = [rng.gen_range(0.1..2.0), rng.gen_range(0.1..2.0)];
        let tv = ThetaVector::new(theta.to_vec()).unwrap();
        let fast = rm.eval(&t, &tv).unwrap();
        let slow = regmax2_oracle(&t, &theta);
        assert!(
            (fast - slow).abs() <= 1e-9,
            "t={t:?} theta={theta:?}: {fast} vs {slow}"
        );
    }
}

#[test]
fn coordinate_change_agrees_along_both_paths() {
    // Path one: transform the complex matrix through the chart with the
    // Wirtinger blocks. Path two: push the real J-field forward and read
    // the complex matrix off the transported structure.
    let structure = remark1_structure();
    let phi = remark1_map();
    let mut rng = ChaCha8Rng::seed_from_u64(0xc0de);
    let pushed = pushforward(&structure, &phi);
    let a_field = match &structure {
        levimax::almost_complex::AlmostComplexStructure::ComplexMatrixField(f) => f.clone(),
        _ => ComplexMatrixField::zero(1),
    };
    for _ in 0..40 {
        let p = vec![rng.gen_range(-0.2..0.2), rng.gen_range(-0.2..0.2)];
        let direct = transform_complex_matrix(&a_field, &phi, &p).unwrap();
        let w = phi.apply(&p).unwrap();
        let via_j = pushed.complex_matrix_at(&w).unwrap();
        let gap = (&direct - &via_j).norm();
        assert!(gap <= 1e-8, "p={p:?}: gap {gap}");
    }
}

#[test]
fn remark1_transport_straightens_the_structure() {
    // The chart was built to carry the structure to the standard one, so
    // the transformed matrix must vanish along the image.
    let structure = remark1_structure();
    let phi = remark1_map();
    let a_field = match &structure {
        levimax::almost_complex::AlmostComplexStructure::ComplexMatrixField(f) => f.clone(),
        _ => unreachable!(),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..40 {
        let p = vec![rng.gen_range(-0.3..0.3), rng.gen_range(-0.3..0.3)];
        let direct = transform_complex_matrix(&a_field, &phi, &p).unwrap();
        assert!(direct.norm() <= 1e-10, "p={p:?}: {}", direct.norm());
    }
}
