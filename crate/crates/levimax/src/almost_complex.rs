//! Chart-local almost complex structures.
//!
//! A structure is stored either as a real `2n x 2n` operator field `J(z)`
//! with `J(z)^2 = -I`, or as the complex `n x n` matrix field `A(z)` that
//! rewrites the Cauchy-Riemann system `d_eta f = J(f) d_xi f` in the
//! quasilinear form `d_zbar f + A(f) d_zbar fbar = 0`.
//!
//! The normative bridge between the two is the defining identity: for every
//! complex vector `w`,
//!
//! `(w + i J w) + A conj(w - i J w) = 0`.
//!
//! The closed formulas used below (`A = -iQ(I + i conj(P))^{-1}` and its
//! inverse) are derivations gated by that identity, which the tests check
//! directly.

use crate::expr::Expression;
use crate::field::{complexify, realify, DerivIndex, ScalarField};
use crate::{Error, Result};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use std::sync::Arc;

type RealMatrixFn = Arc<dyn Fn(&[f64]) -> Result<DMatrix<f64>> + Send + Sync>;
type ComplexMatrixFn = Arc<dyn Fn(&[f64]) -> Result<DMatrix<Complex64>> + Send + Sync>;

/// A real `2n x 2n` matrix field on the chart.
#[derive(Clone)]
pub enum RealMatrixField {
    Constant(DMatrix<f64>),
    /// Row-major expression entries.
    Exprs { n: usize, entries: Vec<Expression> },
    Fn { n: usize, f: RealMatrixFn },
}

impl RealMatrixField {
    pub fn n(&self) -> usize {
        match self {
            RealMatrixField::Constant(m) => m.nrows() / 2,
            RealMatrixField::Exprs { n, .. } => *n,
            RealMatrixField::Fn { n, .. } => *n,
        }
    }

    pub fn eval(&self, p: &[f64]) -> Result<DMatrix<f64>> {
        match self {
            RealMatrixField::Constant(m) => Ok(m.clone()),
            RealMatrixField::Exprs { n, entries } => {
                let d = 2 * n;
                let mut m = DMatrix::zeros(d, d);
                for r in 0..d {
                    for c in 0..d {
                        m[(r, c)] = entries[r * d + c].eval(p)?;
                    }
                }
                Ok(m)
            }
            RealMatrixField::Fn { f, .. } => f(p),
        }
    }
}

/// A complex `n x n` matrix field on the chart.
#[derive(Clone)]
pub enum ComplexMatrixField {
    Constant(DMatrix<Complex64>),
    /// Row-major (re, im) expression pairs.
    Exprs {
        n: usize,
        entries: Vec<(Expression, Expression)>,
    },
    Fn { n: usize, f: ComplexMatrixFn },
}

impl ComplexMatrixField {
    pub fn zero(n: usize) -> ComplexMatrixField {
        ComplexMatrixField::Constant(DMatrix::zeros(n, n))
    }

    pub fn n(&self) -> usize {
        match self {
            ComplexMatrixField::Constant(m) => m.nrows(),
            ComplexMatrixField::Exprs { n, .. } => *n,
            ComplexMatrixField::Fn { n, .. } => *n,
        }
    }

    pub fn eval(&self, p: &[f64]) -> Result<DMatrix<Complex64>> {
        match self {
            ComplexMatrixField::Constant(m) => Ok(m.clone()),
            ComplexMatrixField::Exprs { n, entries } => {
                let mut m = DMatrix::zeros(*n, *n);
                for r in 0..*n {
                    for c in 0..*n {
                        let (re, im) = &entries[r * n + c];
                        m[(r, c)] = Complex64::new(re.eval(p)?, im.eval(p)?);
                    }
                }
                Ok(m)
            }
            ComplexMatrixField::Fn { f, .. } => f(p),
        }
    }

    /// `A_lambda(w) = A(lambda w)`; with `A(0) = 0` the sup-norm over the
    /// unit ball shrinks like `O(lambda)`.
    pub fn scaled(&self, lambda: f64) -> ComplexMatrixField {
        assert!(lambda > 0.0);
        if lambda == 1.0 {
            return self.clone();
        }
        let inner = self.clone();
        let n = self.n();
        ComplexMatrixField::Fn {
            n,
            f: Arc::new(move |p: &[f64]| {
                let scaled: Vec<f64> = p.iter().map(|x| lambda * x).collect();
                inner.eval(&scaled)
            }),
        }
    }
}

/// Operator norm (largest singular value).
pub fn operator_norm(m: &DMatrix<Complex64>) -> f64 {
    m.clone().singular_values().max()
}

/// Complex decomposition `L v = P v + Q conj(v)` of a real-linear operator
/// on `C^n` given by its real `2n x 2n` matrix.
#[derive(Debug, Clone)]
pub struct LinearComplexDecomposition {
    pub p: DMatrix<Complex64>,
    pub q: DMatrix<Complex64>,
}

impl LinearComplexDecomposition {
    /// `P v = (L v - i L(iv))/2`, `Q conj(v) = (L v + i L(iv))/2`,
    /// read off on the standard basis.
    pub fn decompose(l: &DMatrix<f64>) -> LinearComplexDecomposition {
        let n = l.nrows() / 2;
        let apply = |v: &DVector<Complex64>| -> DVector<Complex64> {
            let real = DVector::from_vec(realify(v));
            complexify((l * real).as_slice())
        };
        let mut p = DMatrix::zeros(n, n);
        let mut q = DMatrix::zeros(n, n);
        for j in 0..n {
            let mut e = DVector::<Complex64>::zeros(n);
            e[j] = Complex64::new(1.0, 0.0);
            let le = apply(&e);
            let mut ie = DVector::<Complex64>::zeros(n);
            ie[j] = Complex64::new(0.0, 1.0);
            let lie = apply(&ie);
            for r in 0..n {
                p[(r, j)] = (le[r] - Complex64::i() * lie[r]) / 2.0;
                q[(r, j)] = (le[r] + Complex64::i() * lie[r]) / 2.0;
            }
        }
        LinearComplexDecomposition { p, q }
    }

    pub fn apply(&self, v: &DVector<Complex64>) -> DVector<Complex64> {
        &self.p * v + &self.q * v.map(|c| c.conj())
    }

    /// Real `2n x 2n` matrix of the operator.
    pub fn real_matrix(&self) -> DMatrix<f64> {
        let n = self.p.nrows();
        let mut m = DMatrix::zeros(2 * n, 2 * n);
        for j in 0..2 * n {
            let mut e = vec![0.0; 2 * n];
            e[j] = 1.0;
            let col = realify(&self.apply(&complexify(&e)));
            for r in 0..2 * n {
                m[(r, j)] = col[r];
            }
        }
        m
    }
}

/// The standard structure `J_st` on `C^n` in the real coordinates:
/// `e_{2j-1} -> e_{2j}`, `e_{2j} -> -e_{2j-1}`.
pub fn j_standard(n: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(2 * n, 2 * n);
    for j in 0..n {
        m[(2 * j + 1, 2 * j)] = 1.0;
        m[(2 * j, 2 * j + 1)] = -1.0;
    }
    m
}

/// A chart-local almost complex structure.
#[derive(Clone)]
pub enum AlmostComplexStructure {
    JMatrixField(RealMatrixField),
    ComplexMatrixField(ComplexMatrixField),
}

/// Per-point result of [`AlmostComplexStructure::validate`].
#[derive(Debug, Clone, serde::Serialize)]
pub struct ValidationRecord {
    pub point: Vec<f64>,
    /// `||J^2 + I||` for J-form structures; `||A||` for A-form ones.
    pub residual: f64,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct ValidationReport {
    pub pass: bool,
    pub worst_residual: f64,
    pub worst_point: Vec<f64>,
    pub records: Vec<ValidationRecord>,
}

impl AlmostComplexStructure {
    pub fn standard(n: usize) -> AlmostComplexStructure {
        AlmostComplexStructure::JMatrixField(RealMatrixField::Constant(j_standard(n)))
    }

    pub fn from_complex_matrix_field(a: ComplexMatrixField) -> AlmostComplexStructure {
        AlmostComplexStructure::ComplexMatrixField(a)
    }

    pub fn n(&self) -> usize {
        match self {
            AlmostComplexStructure::JMatrixField(f) => f.n(),
            AlmostComplexStructure::ComplexMatrixField(f) => f.n(),
        }
    }

    /// The real operator `J(p)`.
    pub fn j_at(&self, p: &[f64]) -> Result<DMatrix<f64>> {
        match self {
            AlmostComplexStructure::JMatrixField(f) => f.eval(p),
            AlmostComplexStructure::ComplexMatrixField(f) => {
                let a = f.eval(p)?;
                j_from_complex_matrix(&a)
            }
        }
    }

    /// The complex matrix `A(p)`.
    ///
    /// For J-form structures: write `J(p) v = P v + Q conj(v)`; then
    /// `A = -i Q (I + i conj(P))^{-1}`. Fails when the inverted factor is
    /// singular (structure too far from `J_st` in this chart).
    pub fn complex_matrix_at(&self, p: &[f64]) -> Result<DMatrix<Complex64>> {
        match self {
            AlmostComplexStructure::ComplexMatrixField(f) => f.eval(p),
            AlmostComplexStructure::JMatrixField(f) => {
                let j = f.eval(p)?;
                complex_matrix_of_j(&j)
            }
        }
    }

    /// Validates the structural invariant on a sample grid:
    /// `||J^2 + I|| <= tol` (J form) or `||A|| < 1` (A form, residual is
    /// `||A||` and the tolerance check is `||A|| <= 1 - margin_floor` with
    /// `margin_floor = 0`, i.e. strict norm bound).
    pub fn validate(&self, grid: &[Vec<f64>], tol: f64) -> Result<ValidationReport> {
        let mut records = Vec::with_capacity(grid.len());
        let mut worst = f64::NEG_INFINITY;
        let mut worst_point = Vec::new();
        let mut pass = true;
        for p in grid {
            let (residual, ok) = match self {
                AlmostComplexStructure::JMatrixField(f) => {
                    let j = f.eval(p)?;
                    let d = j.nrows();
                    let res = (&j * &j + DMatrix::<f64>::identity(d, d)).norm();
                    (res, res <= tol)
                }
                AlmostComplexStructure::ComplexMatrixField(f) => {
                    let norm = operator_norm(&f.eval(p)?);
                    (norm, norm < 1.0)
                }
            };
            if residual > worst {
                worst = residual;
                worst_point = p.clone();
            }
            pass &= ok;
            records.push(ValidationRecord {
                point: p.clone(),
                residual,
            });
        }
        Ok(ValidationReport {
            pass,
            worst_residual: worst,
            worst_point,
            records,
        })
    }

    /// Residual of the defining identity
    /// `(w + iJw) + A conj(w - iJw) = 0` at `p` for the vector `w`.
    pub fn defining_oracle_residual(&self, p: &[f64], w: &DVector<Complex64>) -> Result<f64> {
        let j = self.j_at(p)?;
        let a = self.complex_matrix_at(p)?;
        let jw = complexify((&j * DVector::from_vec(realify(w))).as_slice());
        let ijw = jw.map(|c| c * Complex64::i());
        let lhs = w + &ijw;
        let rhs = &a * (w - &ijw).map(|c| c.conj());
        Ok((lhs + rhs).norm())
    }
}

/// `A = -i Q (I + i conj(P))^{-1}` from `J v = P v + Q conj(v)`.
pub fn complex_matrix_of_j(j: &DMatrix<f64>) -> Result<DMatrix<Complex64>> {
    let dec = LinearComplexDecomposition::decompose(j);
    let n = dec.p.nrows();
    let factor = DMatrix::<Complex64>::identity(n, n) + dec.p.map(|c| c.conj()) * Complex64::i();
    let inv = factor.try_inverse().ok_or_else(|| {
        Error::Singular("I + i conj(P) is singular; structure too far from J_st".into())
    })?;
    Ok(dec.q * inv * (-Complex64::i()))
}

/// The real operator with complex matrix `A` (requires `||A|| < 1`):
/// `Q = 2i (I - A conj(A))^{-1} A`, `P = i (I + A Qbar·)` ... concretely
/// `P = iI + 2i A (I - conj(A) A)^{-1} conj(A)`.
pub fn j_from_complex_matrix(a: &DMatrix<Complex64>) -> Result<DMatrix<f64>> {
    let norm = operator_norm(a);
    if norm >= 1.0 {
        return Err(Error::MatrixNormTooLarge(norm));
    }
    let n = a.nrows();
    let id = DMatrix::<Complex64>::identity(n, n);
    let a_conj = a.map(|c| c.conj());
    let inv1 = (&id - a * &a_conj)
        .try_inverse()
        .ok_or_else(|| Error::Singular("I - A conj(A)".into()))?;
    let inv2 = (&id - &a_conj * a)
        .try_inverse()
        .ok_or_else(|| Error::Singular("I - conj(A) A".into()))?;
    let q = inv1 * a * Complex64::new(0.0, 2.0);
    let p = (&id + a * inv2 * &a_conj * Complex64::new(2.0, 0.0)) * Complex64::i();
    Ok(LinearComplexDecomposition { p, q }.real_matrix())
}

/// The non-integrable-looking test structure on `C` obtained by pulling
/// `J_st` back through `F(zeta) = zeta + |zeta|^2`: its complex matrix is
/// `A(zeta) = zeta / (1 + conj(zeta))`.
pub fn remark1_structure() -> AlmostComplexStructure {
    // zeta = x1 + i x2; A = (x1 + i x2)((1+x1) + i x2) / ((1+x1)^2 + x2^2)
    let den = "((1 + x1)^2 + x2^2)";
    let re = format!("(x1*(1 + x1) - x2^2) / {den}");
    let im = format!("(x2*(1 + x1) + x1*x2) / {den}");
    let entries = vec![(
        Expression::parse(&re, 1).unwrap(),
        Expression::parse(&im, 1).unwrap(),
    )];
    AlmostComplexStructure::ComplexMatrixField(ComplexMatrixField::Exprs { n: 1, entries })
}

/// The chart map `F(zeta) = zeta + |zeta|^2` behind [`remark1_structure`],
/// as a coordinate change with expression components.
pub fn remark1_map() -> CoordinateChange {
    let comps = vec![
        ScalarField::parse("x1 + x1^2 + x2^2", 1).unwrap(),
        ScalarField::parse("x2", 1).unwrap(),
    ];
    CoordinateChange::new(comps).unwrap()
}

/// A polynomial (or closure-backed) coordinate change `z' = Phi(z, zbar)`,
/// stored through its `2n` real component fields.
#[derive(Clone)]
pub struct CoordinateChange {
    pub n: usize,
    pub components: Vec<ScalarField>,
    pub inverse: Option<Vec<ScalarField>>,
}

impl CoordinateChange {
    pub fn new(components: Vec<ScalarField>) -> Result<CoordinateChange> {
        if components.is_empty() || components.len() % 2 != 0 {
            return Err(Error::DimensionMismatch(
                "coordinate change needs 2n real components".into(),
            ));
        }
        let n = components.len() / 2;
        for c in &components {
            if c.n() != n {
                return Err(Error::DimensionMismatch(
                    "component dimension does not match the chart".into(),
                ));
            }
        }
        Ok(CoordinateChange {
            n,
            components,
            inverse: None,
        })
    }

    pub fn with_inverse(mut self, inverse: Vec<ScalarField>) -> Result<CoordinateChange> {
        if inverse.len() != 2 * self.n {
            return Err(Error::DimensionMismatch(
                "inverse needs 2n real components".into(),
            ));
        }
        self.inverse = Some(inverse);
        Ok(self)
    }

    pub fn identity(n: usize) -> CoordinateChange {
        let components = (1..=2 * n)
            .map(|i| ScalarField::parse(&format!("x{i}"), n).unwrap())
            .collect();
        CoordinateChange {
            n,
            components,
            inverse: None,
        }
    }

    /// A real-linear change `z' = L z`.
    pub fn linear(l: &DMatrix<f64>) -> CoordinateChange {
        let n = l.nrows() / 2;
        let l = l.clone();
        let mut components = Vec::with_capacity(2 * n);
        for r in 0..2 * n {
            let row: Vec<f64> = (0..2 * n).map(|c| l[(r, c)]).collect();
            components.push(ScalarField::from_fn(
                n,
                Arc::new(move |p: &[f64]| {
                    Ok(row.iter().zip(p).map(|(a, b)| a * b).sum())
                }),
            ));
        }
        let inv = l.clone().try_inverse();
        let mut change = CoordinateChange {
            n,
            components,
            inverse: None,
        };
        if let Some(linv) = inv {
            let mut inverse = Vec::with_capacity(2 * n);
            for r in 0..2 * n {
                let row: Vec<f64> = (0..2 * n).map(|c| linv[(r, c)]).collect();
                inverse.push(ScalarField::from_fn(
                    n,
                    Arc::new(move |p: &[f64]| {
                        Ok(row.iter().zip(p).map(|(a, b)| a * b).sum())
                    }),
                ));
            }
            change.inverse = Some(inverse);
        }
        change
    }

    pub fn apply(&self, p: &[f64]) -> Result<Vec<f64>> {
        self.components.iter().map(|c| c.eval(p)).collect()
    }

    /// Real Jacobian `dPhi(p)`, exact for expression components.
    pub fn jacobian(&self, p: &[f64]) -> Result<DMatrix<f64>> {
        let d = 2 * self.n;
        let mut m = DMatrix::zeros(d, d);
        for r in 0..d {
            for c in 0..d {
                m[(r, c)] = self.components[r].derivative(p, DerivIndex::First(c + 1))?;
            }
        }
        Ok(m)
    }

    /// Inverts `Phi` at `w`: the explicit inverse when given, Newton with
    /// initial guess `w` otherwise (the changes in scope are near-identity).
    pub fn invert_at(&self, w: &[f64]) -> Result<Vec<f64>> {
        if let Some(inv) = &self.inverse {
            return inv.iter().map(|c| c.eval(w)).collect();
        }
        let mut z = w.to_vec();
        for _ in 0..60 {
            let fz = self.apply(&z)?;
            let mut res = DVector::zeros(fz.len());
            for (i, (a, b)) in fz.iter().zip(w).enumerate() {
                res[i] = a - b;
            }
            if res.norm() < 1e-13 {
                return Ok(z);
            }
            let jac = self.jacobian(&z)?;
            let step = jac.lu().solve(&res).ok_or_else(|| {
                Error::SingularCoordinateChange("Newton Jacobian singular".into())
            })?;
            for (zi, si) in z.iter_mut().zip(step.iter()) {
                *zi -= si;
            }
        }
        Err(Error::SingularCoordinateChange(
            "Newton inversion did not converge".into(),
        ))
    }

    /// Wirtinger blocks of the map: `(d_z z', d_zbar z', d_z zbar',
    /// d_zbar zbar')`, each `n x n` complex, from the real Jacobian.
    pub fn wirtinger_blocks(
        &self,
        p: &[f64],
    ) -> Result<(
        DMatrix<Complex64>,
        DMatrix<Complex64>,
        DMatrix<Complex64>,
        DMatrix<Complex64>,
    )> {
        let jac = self.jacobian(p)?;
        let n = self.n;
        let mut dz = DMatrix::zeros(n, n);
        let mut dzbar = DMatrix::zeros(n, n);
        for a in 0..n {
            for b in 0..n {
                // z'_a = x'_{2a} + i x'_{2a+1} (0-based rows 2a, 2a+1)
                let du_dx = jac[(2 * a, 2 * b)];
                let du_dy = jac[(2 * a, 2 * b + 1)];
                let dv_dx = jac[(2 * a + 1, 2 * b)];
                let dv_dy = jac[(2 * a + 1, 2 * b + 1)];
                // d_z = (d_x - i d_y)/2, d_zbar = (d_x + i d_y)/2
                dz[(a, b)] = Complex64::new(du_dx + dv_dy, dv_dx - du_dy) * 0.5;
                dzbar[(a, b)] = Complex64::new(du_dx - dv_dy, dv_dx + du_dy) * 0.5;
            }
        }
        let dz_conj = dzbar.map(|c| c.conj()); // d_z zbar' = conj(d_zbar z')
        let dzbar_conj = dz.map(|c| c.conj()); // d_zbar zbar' = conj(d_z z')
        Ok((dz, dzbar, dz_conj, dzbar_conj))
    }
}

/// `A_J'` at `Phi(p)` by the chart-change formula
/// `A' = ((d_z z') A - d_zbar z') (d_zbar zbar' - (d_z zbar') A)^{-1}`.
pub fn transform_complex_matrix(
    a_field: &ComplexMatrixField,
    phi: &CoordinateChange,
    p: &[f64],
) -> Result<DMatrix<Complex64>> {
    let a = a_field.eval(p)?;
    let (dz, dzbar, dz_conj, dzbar_conj) = phi.wirtinger_blocks(p)?;
    let numerator = &dz * &a - &dzbar;
    let denominator = &dzbar_conj - &dz_conj * &a;
    let inv = denominator
        .try_inverse()
        .ok_or_else(|| Error::SingularCoordinateChange("chart change not admissible".into()))?;
    Ok(numerator * inv)
}

/// Direct image `Phi_*(S)`: `J'(Phi(z)) = dPhi(z) J(z) dPhi(z)^{-1}`,
/// realized as a NUMERIC matrix field in the target coordinates.
pub fn pushforward(
    structure: &AlmostComplexStructure,
    phi: &CoordinateChange,
) -> AlmostComplexStructure {
    let n = structure.n();
    let s = structure.clone();
    let phi = phi.clone();
    AlmostComplexStructure::JMatrixField(RealMatrixField::Fn {
        n,
        f: Arc::new(move |w: &[f64]| {
            let z = phi.invert_at(w)?;
            let jac = phi.jacobian(&z)?;
            let jac_inv = jac.clone().try_inverse().ok_or_else(|| {
                Error::SingularCoordinateChange("dPhi singular".into())
            })?;
            Ok(&jac * s.j_at(&z)? * jac_inv)
        }),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cvec(parts: &[(f64, f64)]) -> DVector<Complex64> {
        DVector::from_iterator(parts.len(), parts.iter().map(|&(r, i)| Complex64::new(r, i)))
    }

    #[test]
    fn decompose_multiplication_by_i() {
        let n = 2;
        let j = j_standard(n); // J_st is multiplication by i
        let dec = LinearComplexDecomposition::decompose(&j);
        let id_i = DMatrix::<Complex64>::identity(n, n) * Complex64::i();
        assert!((dec.p.clone() - id_i).norm() < 1e-14);
        assert!(dec.q.norm() < 1e-14);
    }

    #[test]
    fn decompose_conjugation() {
        // conjugation in real coordinates: (x, y) -> (x, -y)
        let mut c = DMatrix::<f64>::identity(2, 2);
        c[(1, 1)] = -1.0;
        let dec = LinearComplexDecomposition::decompose(&c);
        assert!(dec.p.norm() < 1e-14);
        assert!((dec.q.clone() - DMatrix::<Complex64>::identity(1, 1)).norm() < 1e-14);
    }

    #[test]
    fn decompose_reconstructs_random_operator() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let l = DMatrix::from_fn(4, 4, |_, _| rng.gen_range(-1.0..1.0));
        let dec = LinearComplexDecomposition::decompose(&l);
        let v = cvec(&[(0.3, -0.7), (1.1, 0.2)]);
        let direct = complexify((&l * DVector::from_vec(realify(&v))).as_slice());
        assert!((dec.apply(&v) - direct).norm() < 1e-12);
        assert!((dec.real_matrix() - l).norm() < 1e-12);
    }

    #[test]
    fn standard_structure_has_zero_complex_matrix() {
        let s = AlmostComplexStructure::standard(2);
        let a = s.complex_matrix_at(&[0.1, -0.2, 0.3, 0.4]).unwrap();
        assert!(a.norm() < 1e-13);
    }

    #[test]
    fn constant_a_round_trip() {
        let mut a0 = DMatrix::<Complex64>::zeros(1, 1);
        a0[(0, 0)] = Complex64::new(0.3, 0.0);
        let j = j_from_complex_matrix(&a0).unwrap();
        // J^2 = -I
        let res = (&j * &j + DMatrix::<f64>::identity(2, 2)).norm();
        assert!(res < 1e-12, "J^2 + I residual {res}");
        let back = complex_matrix_of_j(&j).unwrap();
        assert!((back - a0).norm() < 1e-12);
    }

    #[test]
    fn norm_bound_rejected() {
        let a = DMatrix::<Complex64>::identity(1, 1) * Complex64::new(1.2, 0.0);
        assert!(matches!(
            j_from_complex_matrix(&a).unwrap_err(),
            Error::MatrixNormTooLarge(_)
        ));
    }

    #[test]
    fn defining_oracle_on_random_structures() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let n = 2;
            let a = DMatrix::from_fn(n, n, |_, _| {
                Complex64::new(rng.gen_range(-0.3..0.3), rng.gen_range(-0.3..0.3))
            });
            let s = AlmostComplexStructure::ComplexMatrixField(ComplexMatrixField::Constant(
                a.clone(),
            ));
            for _ in 0..5 {
                let w = DVector::from_fn(n, |_, _| {
                    Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
                });
                let res = s.defining_oracle_residual(&[0.0; 4], &w).unwrap();
                assert!(res < 1e-10, "oracle residual {res}");
            }
        }
    }

    #[test]
    fn validate_standard_passes_and_perturbed_fails() {
        let grid = crate::grid::lattice(-0.9, 0.9, 3, 2);
        let ok = AlmostComplexStructure::standard(1)
            .validate(&grid, 1e-8)
            .unwrap();
        assert!(ok.pass);
        assert!(ok.worst_residual < 1e-14);

        let mut jm = j_standard(1);
        jm[(0, 0)] += 1e-3; // breaks J^2 = -I
        let bad = AlmostComplexStructure::JMatrixField(RealMatrixField::Constant(jm))
            .validate(&grid, 1e-8)
            .unwrap();
        assert!(!bad.pass);
    }

    #[test]
    fn validate_a_form_margin() {
        let mut a = DMatrix::<Complex64>::zeros(2, 2);
        a[(0, 0)] = Complex64::new(0.5, 0.0);
        let s = AlmostComplexStructure::ComplexMatrixField(ComplexMatrixField::Constant(a));
        let grid = crate::grid::lattice(-0.9, 0.9, 2, 4);
        let rep = s.validate(&grid, 1e-8).unwrap();
        assert!(rep.pass);
        assert!((rep.worst_residual - 0.5).abs() < 1e-12);
    }

    #[test]
    fn identity_change_preserves_a() {
        let n = 1;
        let a = ComplexMatrixField::Constant(
            DMatrix::<Complex64>::identity(n, n) * Complex64::new(0.2, 0.1),
        );
        let phi = CoordinateChange::identity(n);
        let out = transform_complex_matrix(&a, &phi, &[0.3, -0.1]).unwrap();
        assert!((out[(0, 0)] - Complex64::new(0.2, 0.1)).norm() < 1e-9);
    }

    #[test]
    fn complex_linear_pushforward_preserves_standard() {
        // multiplication by (1 + 2i) is complex-linear
        let l = DMatrix::from_row_slice(2, 2, &[1.0, -2.0, 2.0, 1.0]);
        let phi = CoordinateChange::linear(&l);
        let pushed = pushforward(&AlmostComplexStructure::standard(1), &phi);
        let j = pushed.j_at(&[0.4, 0.7]).unwrap();
        assert!((j - j_standard(1)).norm() < 1e-9);
    }

    #[test]
    fn scale_structure_basics() {
        let n = 1;
        // A(z) = z1 (i.e. x1 + i x2) in entry (0,0); A(0) = 0
        let entries = vec![(
            Expression::parse("x1", n).unwrap(),
            Expression::parse("x2", n).unwrap(),
        )];
        let a = ComplexMatrixField::Exprs { n, entries };
        let scaled = a.scaled(0.1);
        let v = scaled.eval(&[0.5, 0.5]).unwrap();
        assert!((v[(0, 0)] - Complex64::new(0.05, 0.05)).norm() < 1e-14);
        let at0 = scaled.eval(&[0.0, 0.0]).unwrap();
        assert!(at0.norm() < 1e-15);
    }
}
