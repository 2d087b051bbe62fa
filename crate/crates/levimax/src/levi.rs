//! The complex Hessian (Levi form) for chart-local structures.
//!
//! For a C^2 function `u` and a vector `V` at `p`,
//!
//! `H_J(u)(p, V) = -(d J*du)_p(X, JX)`,     `J*du(X) = du(JX)`,
//!
//! with any extension `X` of `V`. In coordinates the one-form has
//! coefficients `beta_i = sum_j (du/dx_j) J_{ji}` and
//!
//! `H = - sum_{i,j} (d_i beta_j - d_j beta_i) V_i (JV)_j`.
//!
//! Normalization: this definition yields the Laplacian for `u` on `C` with
//! `V = d/dxi` under `J_st`, i.e. `4 d^2u/dz dzbar`. All comparisons against
//! hermitian forms therefore carry the factor 4, pinned here once as
//! [`HERMITIAN_FACTOR`].

use crate::almost_complex::AlmostComplexStructure;
use crate::field::{HermitianMetric, ScalarField};
use crate::{Error, Result};
use nalgebra::{DMatrix, DVector};
use serde::Serialize;

/// `H_J(u) = HERMITIAN_FACTOR * (hermitian form)` under `J_st`.
pub const HERMITIAN_FACTOR: f64 = 4.0;

// FD step exponents: beta is first-derivative data, so differentiating it is
// second-order work; eps^(1/4) balances truncation against the noise floor.
fn curl_step(coord: f64) -> f64 {
    coord.abs().max(1.0) * f64::EPSILON.powf(0.25)
}

/// Coefficients `beta_i(x) = sum_j (du/dx_j)(x) J_{ji}(x)` of `J*du`.
pub fn one_form_coefficients(
    structure: &AlmostComplexStructure,
    u: &ScalarField,
    p: &[f64],
) -> Result<Vec<f64>> {
    let j = structure.j_at(p)?;
    let grad = u.gradient(p)?;
    let d = grad.len();
    let mut beta = vec![0.0; d];
    for (i, b) in beta.iter_mut().enumerate() {
        *b = (0..d).map(|jj| grad[jj] * j[(jj, i)]).sum();
    }
    Ok(beta)
}

/// The antisymmetric matrix `W_{ij} = (d_i beta_j - d_j beta_i)(p)`,
/// by central differences with one Richardson level.
fn curl_matrix(
    structure: &AlmostComplexStructure,
    u: &ScalarField,
    p: &[f64],
) -> Result<DMatrix<f64>> {
    let d = 2 * structure.n();
    // d beta_j / d x_i for all i, j
    let mut grad_beta = DMatrix::zeros(d, d);
    for i in 0..d {
        let h = curl_step(p[i]);
        let col = |h: f64| -> Result<Vec<f64>> {
            let mut xp = p.to_vec();
            let mut xm = p.to_vec();
            xp[i] += h;
            xm[i] -= h;
            let bp = one_form_coefficients(structure, u, &xp)?;
            let bm = one_form_coefficients(structure, u, &xm)?;
            Ok(bp
                .iter()
                .zip(&bm)
                .map(|(a, b)| (a - b) / (2.0 * h))
                .collect())
        };
        let d1 = col(h)?;
        let d2 = col(h / 2.0)?;
        for jj in 0..d {
            grad_beta[(i, jj)] = (4.0 * d2[jj] - d1[jj]) / 3.0;
        }
    }
    Ok(&grad_beta - grad_beta.transpose())
}

/// `H_J(u)(p, V)`.
pub fn levi_value(
    structure: &AlmostComplexStructure,
    u: &ScalarField,
    p: &[f64],
    v: &[f64],
) -> Result<f64> {
    let w = curl_matrix(structure, u, p)?;
    let j = structure.j_at(p)?;
    let vv = DVector::from_row_slice(v);
    let jv = &j * &vv;
    Ok(-(vv.transpose() * w * jv)[(0, 0)])
}

/// The symmetric quadratic-form matrix of the Levi form at `p`.
#[derive(Debug, Clone)]
pub struct LeviQuadraticForm {
    pub point: Vec<f64>,
    pub matrix: DMatrix<f64>,
}

impl LeviQuadraticForm {
    pub fn value(&self, v: &[f64]) -> f64 {
        let vv = DVector::from_row_slice(v);
        (vv.transpose() * &self.matrix * vv)[(0, 0)]
    }
}

/// Extracts the symmetric matrix `S` with `V^T S V = levi_value(p, V)`.
///
/// The quadratic form is `V -> -V^T W J V`, so `S` is the symmetric part of
/// `-W J`; this agrees with basis polarization of `levi_value` exactly
/// (same `W`), at one curl evaluation instead of `O(n^2)`.
pub fn levi_matrix(
    structure: &AlmostComplexStructure,
    u: &ScalarField,
    p: &[f64],
) -> Result<LeviQuadraticForm> {
    let w = curl_matrix(structure, u, p)?;
    let j = structure.j_at(p)?;
    let m = -(w * j);
    let matrix = (&m + m.transpose()) * 0.5;
    Ok(LeviQuadraticForm {
        point: p.to_vec(),
        matrix,
    })
}

/// `min_{V != 0} H_J(u)(p,V) / (4 h_p(V))`: the smallest generalized
/// eigenvalue of `(S, 4 H_real)`. The factor 4 makes the Euclidean metric
/// normalize `u = ||z||^2` under `J_st` to exactly 1.
pub fn min_levi_eigen(
    structure: &AlmostComplexStructure,
    u: &ScalarField,
    p: &[f64],
    metric: &HermitianMetric,
) -> Result<f64> {
    let form = levi_matrix(structure, u, p)?;
    let h_real = metric.real_form(p)? * HERMITIAN_FACTOR;
    let chol = h_real
        .cholesky()
        .ok_or(Error::MetricNotPositiveDefinite)?;
    let l = chol.l();
    let l_inv = l
        .clone()
        .try_inverse()
        .ok_or(Error::MetricNotPositiveDefinite)?;
    let b = &l_inv * &form.matrix * l_inv.transpose();
    let sym = (&b + b.transpose()) * 0.5;
    let eig = sym.symmetric_eigenvalues();
    Ok(eig.iter().cloned().fold(f64::INFINITY, f64::min))
}

#[derive(Debug, Clone, Serialize)]
pub struct PshRecord {
    pub point: Vec<f64>,
    pub min_eigen: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct PshReport {
    pub pass: bool,
    pub margin: f64,
    pub worst_eigen: f64,
    pub worst_point: Vec<f64>,
    pub records: Vec<PshRecord>,
}

/// Tests strict J-plurisubharmonicity on a grid: pass iff
/// `min_levi_eigen >= margin` at every node.
pub fn is_strictly_psh(
    structure: &AlmostComplexStructure,
    u: &ScalarField,
    grid: &[Vec<f64>],
    metric: &HermitianMetric,
    margin: f64,
) -> Result<PshReport> {
    use rayon::prelude::*;
    let evals: Result<Vec<f64>> = grid
        .par_iter()
        .map(|p| min_levi_eigen(structure, u, p, metric))
        .collect();
    let evals = evals?;
    let mut worst_eigen = f64::INFINITY;
    let mut worst_point = Vec::new();
    let mut records = Vec::with_capacity(grid.len());
    for (p, &e) in grid.iter().zip(&evals) {
        if e < worst_eigen {
            worst_eigen = e;
            worst_point = p.clone();
        }
        records.push(PshRecord {
            point: p.clone(),
            min_eigen: e,
            pass: e >= margin,
        });
    }
    Ok(PshReport {
        pass: worst_eigen >= margin,
        margin,
        worst_eigen,
        worst_point,
        records,
    })
}

/// Both sides of the holomorphic-invariance identity
/// `H_{J'}(u o F)(p', V') = H_J(u)(p, dF(p')(V'))`, computed independently.
///
/// `F` must be `(J', J)`-holomorphic: the residual `dF o J' - J(F) o dF` is
/// checked at `p'` and nearby sample points and must stay below `1e-8`.
pub fn hessian_invariance_check(
    f_map: &crate::almost_complex::CoordinateChange,
    structure_source: &AlmostComplexStructure,
    structure_target: &AlmostComplexStructure,
    u: &ScalarField,
    p_prime: &[f64],
    v_prime: &[f64],
) -> Result<(f64, f64)> {
    let d = p_prime.len();
    // holomorphy residual on p' and axis-offset samples
    let mut samples = vec![p_prime.to_vec()];
    for i in 0..d {
        let mut q = p_prime.to_vec();
        q[i] += 0.05;
        samples.push(q);
    }
    let mut worst = 0.0f64;
    for q in &samples {
        let df = f_map.jacobian(q)?;
        let j_src = structure_source.j_at(q)?;
        let j_tgt = structure_target.j_at(&f_map.apply(q)?)?;
        let res = (&df * &j_src - &j_tgt * &df).norm();
        worst = worst.max(res);
    }
    if worst > 1e-8 {
        return Err(Error::NotHolomorphic(worst));
    }

    let u_pulled = {
        let f_map = f_map.clone();
        let u = u.clone();
        ScalarField::from_fn(
            f_map.n,
            std::sync::Arc::new(move |z: &[f64]| u.eval(&f_map.apply(z)?)),
        )
    };
    let lhs = levi_value(structure_source, &u_pulled, p_prime, v_prime)?;

    let df = f_map.jacobian(p_prime)?;
    let dfv = &df * DVector::from_row_slice(v_prime);
    let target_point = f_map.apply(p_prime)?;
    let rhs = levi_value(structure_target, u, &target_point, dfv.as_slice())?;
    Ok((lhs, rhs))
}

/// Levi form through the vector-field formula
/// `d beta(X, Y) = X(beta(Y)) - Y(beta(X)) - beta([X, Y])` with the linear
/// extension `X(z) = V + M (z - p)` and `Y = JX`.
///
/// The coordinate formula in [`levi_value`] pairs the 2-form pointwise and
/// never sees the extension; this route does, so agreement between the two
/// is the extension-independence check.
pub fn levi_value_with_extension(
    structure: &AlmostComplexStructure,
    u: &ScalarField,
    p: &[f64],
    v: &[f64],
    extension: &DMatrix<f64>,
) -> Result<f64> {
    let d = 2 * structure.n();
    let x_field = |z: &[f64]| -> DVector<f64> {
        let mut dz = DVector::zeros(d);
        for i in 0..d {
            dz[i] = z[i] - p[i];
        }
        DVector::from_row_slice(v) + extension * dz
    };
    let y_field = |z: &[f64]| -> Result<DVector<f64>> {
        Ok(structure.j_at(z)? * x_field(z))
    };
    let beta_of = |z: &[f64], w: &DVector<f64>| -> Result<f64> {
        let beta = one_form_coefficients(structure, u, z)?;
        Ok(beta.iter().zip(w.iter()).map(|(a, b)| a * b).sum())
    };
    let h = f64::EPSILON.powf(0.25);
    let dir_deriv = |g: &dyn Fn(&[f64]) -> Result<f64>, dir: &DVector<f64>| -> Result<f64> {
        let step = |h: f64| -> Result<f64> {
            let zp: Vec<f64> = p.iter().zip(dir.iter()).map(|(a, b)| a + h * b).collect();
            let zm: Vec<f64> = p.iter().zip(dir.iter()).map(|(a, b)| a - h * b).collect();
            Ok((g(&zp)? - g(&zm)?) / (2.0 * h))
        };
        Ok((4.0 * step(h / 2.0)? - step(h)?) / 3.0)
    };

    let xp = x_field(p);
    let yp = y_field(p)?;

    // X(beta(Y)) and Y(beta(X))
    let beta_y = |z: &[f64]| -> Result<f64> { beta_of(z, &y_field(z)?) };
    let beta_x = |z: &[f64]| -> Result<f64> { beta_of(z, &x_field(z)) };
    let x_of_beta_y = dir_deriv(&beta_y, &xp)?;
    let y_of_beta_x = dir_deriv(&beta_x, &yp)?;

    // [X, Y]^i = X^j d_j Y^i - Y^j d_j X^i; d_j X = extension column j
    let mut bracket = DVector::zeros(d);
    for i in 0..d {
        let y_i = |z: &[f64]| -> Result<f64> { Ok(y_field(z)?[i]) };
        let dy_i_along_x = dir_deriv(&y_i, &xp)?;
        let dx_i_along_y: f64 = (0..d).map(|jj| extension[(i, jj)] * yp[jj]).sum();
        bracket[i] = dy_i_along_x - dx_i_along_y;
    }
    let beta_bracket = beta_of(p, &bracket)?;

    Ok(-(x_of_beta_y - y_of_beta_x - beta_bracket))
}
