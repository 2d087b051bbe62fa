//! Scalar fields on a chart of `C^n = R^{2n}` and their derivatives.
//!
//! Coordinate convention, fixed once for the whole crate:
//! `z_j = x_{2j-1} + i x_{2j}`, so a point of `C^n` is the real vector
//! `[x1, x2, ..., x_{2n}]`.
//!
//! A field is either EXACT (closed-form expression, differentiated
//! symbolically) or NUMERIC (an opaque evaluation closure, differentiated by
//! central finite differences with one Richardson extrapolation level).

use crate::expr::Expression;
use crate::Result;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use std::sync::{Arc, OnceLock};

pub type NumericFn = Arc<dyn Fn(&[f64]) -> Result<f64> + Send + Sync>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Tier {
    Exact,
    Numeric,
}

/// Multi-index of order at most 2, with 1-based coordinate indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DerivIndex {
    First(usize),
    Second(usize, usize),
}

enum Body {
    Exact(Expression),
    Numeric { n: usize, f: NumericFn },
}

struct Inner {
    body: Body,
    // write-once memo of symbolic derivatives, keyed by coordinate index
    grad: OnceLock<Vec<Expression>>,
}

/// A real scalar function of `2n` real variables.
#[derive(Clone)]
pub struct ScalarField {
    inner: Arc<Inner>,
}

impl std::fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match &self.inner.body {
            Body::Exact(e) => write!(f, "ScalarField::Exact(n={}, {})", e.n, e.root),
            Body::Numeric { n, .. } => write!(f, "ScalarField::Numeric(n={n})"),
        }
    }
}

impl ScalarField {
    pub fn from_expression(e: Expression) -> ScalarField {
        ScalarField {
            inner: Arc::new(Inner {
                body: Body::Exact(e),
                grad: OnceLock::new(),
            }),
        }
    }

    pub fn parse(text: &str, n: usize) -> Result<ScalarField> {
        Ok(ScalarField::from_expression(Expression::parse(text, n)?))
    }

    pub fn from_fn(n: usize, f: NumericFn) -> ScalarField {
        ScalarField {
            inner: Arc::new(Inner {
                body: Body::Numeric { n, f },
                grad: OnceLock::new(),
            }),
        }
    }

    pub fn constant(n: usize, c: f64) -> ScalarField {
        ScalarField::from_expression(Expression::constant(n, c))
    }

    pub fn n(&self) -> usize {
        match &self.inner.body {
            Body::Exact(e) => e.n,
            Body::Numeric { n, .. } => *n,
        }
    }

    pub fn tier(&self) -> Tier {
        match &self.inner.body {
            Body::Exact(_) => Tier::Exact,
            Body::Numeric { .. } => Tier::Numeric,
        }
    }

    pub fn eval(&self, p: &[f64]) -> Result<f64> {
        match &self.inner.body {
            Body::Exact(e) => e.eval(p),
            Body::Numeric { f, .. } => f(p),
        }
    }

    fn gradient_exprs(&self) -> Option<&Vec<Expression>> {
        match &self.inner.body {
            Body::Exact(e) => Some(self.inner.grad.get_or_init(|| {
                (1..=2 * e.n).map(|i| e.diff(i)).collect()
            })),
            Body::Numeric { .. } => None,
        }
    }

    /// Mixed partial of order at most 2 at `p`.
    ///
    /// EXACT fields differentiate the expression symbolically; NUMERIC fields
    /// use central differences with step `max(1,|p_i|) * eps^(1/3)` (first
    /// order) or `eps^(1/4)` (second order) and one Richardson level.
    pub fn derivative(&self, p: &[f64], idx: DerivIndex) -> Result<f64> {
        match idx {
            DerivIndex::First(i) => {
                if let Some(grad) = self.gradient_exprs() {
                    grad[i - 1].eval(p)
                } else {
                    self.fd_first(p, i)
                }
            }
            DerivIndex::Second(i, j) => {
                if let Some(grad) = self.gradient_exprs() {
                    grad[i - 1].diff(j).eval(p)
                } else if i == j {
                    self.fd_second_diag(p, i)
                } else {
                    self.fd_second_mixed(p, i, j)
                }
            }
        }
    }

    pub fn gradient(&self, p: &[f64]) -> Result<Vec<f64>> {
        (1..=2 * self.n())
            .map(|i| self.derivative(p, DerivIndex::First(i)))
            .collect()
    }

    fn fd_first(&self, p: &[f64], i: usize) -> Result<f64> {
        let h = p[i - 1].abs().max(1.0) * f64::EPSILON.powf(1.0 / 3.0);
        let d = |h: f64| -> Result<f64> {
            let mut xp = p.to_vec();
            let mut xm = p.to_vec();
            xp[i - 1] += h;
            xm[i - 1] -= h;
            Ok((self.eval(&xp)? - self.eval(&xm)?) / (2.0 * h))
        };
        Ok((4.0 * d(h / 2.0)? - d(h)?) / 3.0)
    }

    fn fd_second_diag(&self, p: &[f64], i: usize) -> Result<f64> {
        let h = p[i - 1].abs().max(1.0) * f64::EPSILON.powf(0.25);
        let f0 = self.eval(p)?;
        let d = |h: f64| -> Result<f64> {
            let mut xp = p.to_vec();
            let mut xm = p.to_vec();
            xp[i - 1] += h;
            xm[i - 1] -= h;
            Ok((self.eval(&xp)? - 2.0 * f0 + self.eval(&xm)?) / (h * h))
        };
        Ok((4.0 * d(h / 2.0)? - d(h)?) / 3.0)
    }

    fn fd_second_mixed(&self, p: &[f64], i: usize, j: usize) -> Result<f64> {
        let hi = p[i - 1].abs().max(1.0) * f64::EPSILON.powf(0.25);
        let hj = p[j - 1].abs().max(1.0) * f64::EPSILON.powf(0.25);
        let d = |s: f64| -> Result<f64> {
            let (hi, hj) = (hi * s, hj * s);
            let mut x = p.to_vec();
            let mut acc = 0.0;
            for (si, sj, w) in [
                (1.0, 1.0, 1.0),
                (1.0, -1.0, -1.0),
                (-1.0, 1.0, -1.0),
                (-1.0, -1.0, 1.0),
            ] {
                x.copy_from_slice(p);
                x[i - 1] += si * hi;
                x[j - 1] += sj * hj;
                acc += w * self.eval(&x)?;
            }
            Ok(acc / (4.0 * hi * hj))
        };
        Ok((4.0 * d(0.5)? - d(1.0)?) / 3.0)
    }
}

/// Result of [`hermitian_hessian_jst`]: the symmetrized matrix and the
/// hermitian-asymmetry residual of the raw entries.
#[derive(Debug, Clone)]
pub struct HermitianHessian {
    pub matrix: DMatrix<Complex64>,
    pub asymmetry: f64,
}

/// The standard hermitian Hessian `L_{kj} = d^2 u / dz_k dzbar_j` at `p`,
/// assembled from real partials by Wirtinger calculus:
///
/// `L_{kj} = 1/4 [ (d_{x_k} d_{x_j} + d_{y_k} d_{y_j}) u
///               + i (d_{x_k} d_{y_j} - d_{y_k} d_{x_j}) u ]`.
pub fn hermitian_hessian_jst(f: &ScalarField, p: &[f64]) -> Result<HermitianHessian> {
    let n = f.n();
    let mut raw = DMatrix::<Complex64>::zeros(n, n);
    for k in 0..n {
        for j in 0..n {
            let xk = 2 * k + 1;
            let yk = 2 * k + 2;
            let xj = 2 * j + 1;
            let yj = 2 * j + 2;
            let re = f.derivative(p, DerivIndex::Second(xk, xj))?
                + f.derivative(p, DerivIndex::Second(yk, yj))?;
            let im = f.derivative(p, DerivIndex::Second(xk, yj))?
                - f.derivative(p, DerivIndex::Second(yk, xj))?;
            raw[(k, j)] = Complex64::new(re / 4.0, im / 4.0);
        }
    }
    let adjoint = raw.adjoint();
    let asymmetry = (&raw - &adjoint).norm();
    let matrix = (raw + adjoint) * Complex64::new(0.5, 0.0);
    Ok(HermitianHessian { matrix, asymmetry })
}

/// Complex form of a real tangent vector: `v_j = V_{2j-1} + i V_{2j}`.
pub fn complexify(v: &[f64]) -> DVector<Complex64> {
    let n = v.len() / 2;
    DVector::from_fn(n, |j, _| Complex64::new(v[2 * j], v[2 * j + 1]))
}

/// Real form of a complex vector, inverse of [`complexify`].
pub fn realify(v: &DVector<Complex64>) -> Vec<f64> {
    let mut out = Vec::with_capacity(2 * v.len());
    for c in v.iter() {
        out.push(c.re);
        out.push(c.im);
    }
    out
}

type MetricFn = Arc<dyn Fn(&[f64]) -> Result<DMatrix<Complex64>> + Send + Sync>;

/// A positive definite hermitian metric on the chart.
#[derive(Clone)]
pub enum HermitianMetric {
    /// `h_p(V) = |V|^2` (complex Euclidean norm squared).
    Euclidean { n: usize },
    Constant(DMatrix<Complex64>),
    Field { n: usize, f: MetricFn },
}

impl HermitianMetric {
    pub fn n(&self) -> usize {
        match self {
            HermitianMetric::Euclidean { n } => *n,
            HermitianMetric::Constant(m) => m.nrows(),
            HermitianMetric::Field { n, .. } => *n,
        }
    }

    pub fn matrix_at(&self, p: &[f64]) -> Result<DMatrix<Complex64>> {
        match self {
            HermitianMetric::Euclidean { n } => Ok(DMatrix::identity(*n, *n)),
            HermitianMetric::Constant(m) => Ok(m.clone()),
            HermitianMetric::Field { f, .. } => f(p),
        }
    }

    /// `h_p(V)` for the complex form of a real tangent vector.
    pub fn value(&self, p: &[f64], v_real: &[f64]) -> Result<f64> {
        let v = complexify(v_real);
        let m = self.matrix_at(p)?;
        Ok((v.adjoint() * m * v)[(0, 0)].re)
    }

    /// The real symmetric `2n x 2n` matrix `R` with `V^T R V = h_p(V)`.
    pub fn real_form(&self, p: &[f64]) -> Result<DMatrix<f64>> {
        let d = 2 * self.n();
        let mut r = DMatrix::zeros(d, d);
        let mut basis = vec![0.0; d];
        let mut diag = vec![0.0; d];
        for a in 0..d {
            basis.fill(0.0);
            basis[a] = 1.0;
            diag[a] = self.value(p, &basis)?;
            r[(a, a)] = diag[a];
        }
        let mut pair = vec![0.0; d];
        for a in 0..d {
            for b in (a + 1)..d {
                pair.fill(0.0);
                pair[a] = 1.0;
                pair[b] = 1.0;
                let q = self.value(p, &pair)?;
                let off = 0.5 * (q - diag[a] - diag[b]);
                r[(a, b)] = off;
                r[(b, a)] = off;
            }
        }
        Ok(r)
    }
}
