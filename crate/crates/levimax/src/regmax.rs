//! The regularized max-function
//!
//! `M_theta(t) = int_{R^k} max{t_1+s_1,...,t_k+s_k} prod_j theta_j^{-1}
//! omega(s_j/theta_j) ds`
//!
//! built from the classical bump `omega(s) = C exp(-1/(s(1-s)))` on `(0,1)`,
//! normalized to unit mass.
//!
//! Evaluation splits the integral by the index attaining the maximum.
//! With independent variables `S_j = t_j + theta_j sigma_j`,
//! `sigma_j ~ omega`, one has
//!
//! `M_theta(t) = sum_j int_0^1 (t_j + theta_j s) omega(s)
//!               prod_{i!=j} Omega((t_j + theta_j s - t_i)/theta_i) ds`
//!
//! where `Omega` is the cumulative of `omega`. Every integrand here is
//! C-infinity, so fixed composite Gauss-Legendre converges spectrally; the
//! raw tensor-product form keeps a kink of `max` inside the box and cannot
//! reach the 1e-9 budget at any sane node count. The raw form survives as
//! the brute-force oracle in the test suite.
//!
//! The gradient drops the `(t_j + theta_j s)` weight:
//! `g_j = P(argmax = j)`, so `g_j >= 0` and `sum_j g_j = 1` hold by
//! construction up to quadrature error.

use crate::field::ScalarField;
use crate::quad::{g16, integrate_adaptive};
use crate::{Error, Result};
use std::sync::{Arc, OnceLock};

/// Default cap on the number of arguments.
pub const DEFAULT_K_MAX: usize = 4;

/// The raw kernel `exp(-1/(s(1-s)))` on `(0,1)`, zero elsewhere, before
/// normalization.
pub fn bump_raw(s: f64) -> f64 {
    if s <= 0.0 || s >= 1.0 {
        0.0
    } else {
        (-1.0 / (s * (1.0 - s))).exp()
    }
}

/// Smoothing widths `theta in (R+)^k`.
#[derive(Debug, Clone)]
pub struct ThetaVector(Vec<f64>);

impl ThetaVector {
    pub fn new(theta: Vec<f64>) -> Result<ThetaVector> {
        if theta.is_empty() {
            return Err(Error::DimensionMismatch("theta must have k >= 1".into()));
        }
        for &t in &theta {
            if !(t > 0.0) {
                return Err(Error::NonPositiveTheta(t));
            }
        }
        Ok(ThetaVector(theta))
    }

    pub fn uniform(k: usize, value: f64) -> Result<ThetaVector> {
        ThetaVector::new(vec![value; k])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

const CDF_CELLS: usize = 4096;

/// The normalized bump with its cumulative table.
pub struct Mollifier {
    constant: f64,
    /// `Omega` at `i / CDF_CELLS`.
    cdf_values: Vec<f64>,
    /// `omega` at the same grid (Hermite slopes).
    pdf_values: Vec<f64>,
    /// Outer quadrature nodes `(sigma, w * omega(sigma))` for the composite
    /// rule on [0,1].
    outer: Vec<(f64, f64)>,
}

impl Mollifier {
    /// Builds the mollifier: adaptive quadrature for the normalization
    /// constant (abs error <= 1e-12 requested, 1e-14 used), then the
    /// cumulative table.
    pub fn new() -> Result<Mollifier> {
        let raw_mass = integrate_adaptive(&bump_raw, 0.0, 1.0, 1e-14)?;
        let constant = 1.0 / raw_mass;

        let rule = g16();
        let h = 1.0 / CDF_CELLS as f64;
        let mut cdf_values = Vec::with_capacity(CDF_CELLS + 1);
        let mut pdf_values = Vec::with_capacity(CDF_CELLS + 1);
        let mut acc = 0.0;
        cdf_values.push(0.0);
        pdf_values.push(0.0);
        for i in 0..CDF_CELLS {
            let a = i as f64 * h;
            let b = a + h;
            acc += constant * rule.integrate(a, b, bump_raw);
            cdf_values.push(acc);
            pdf_values.push(constant * bump_raw(b));
        }
        // force the endpoint to exactly 1 (the tail defect is ~1e-15)
        let defect = 1.0 - acc;
        if defect.abs() > 1e-10 {
            return Err(Error::QuadratureNonConvergence {
                tol: 1e-10,
                err: defect.abs(),
            });
        }
        *cdf_values.last_mut().unwrap() = 1.0;

        // composite 64 x GL16 outer rule on [0,1]; the integrands seen by
        // the evaluator contain cdf transitions of width ~ theta_i/theta_j,
        // so panels must stay comfortably below that scale
        let mut outer = Vec::with_capacity(64 * 16);
        for panel in 0..64 {
            let a = panel as f64 / 64.0;
            let hw = 1.0 / 128.0;
            let c = a + hw;
            for (&x, &w) in rule.nodes.iter().zip(&rule.weights) {
                let s = c + hw * x;
                outer.push((s, w * hw * constant * bump_raw(s)));
            }
        }

        Ok(Mollifier {
            constant,
            cdf_values,
            pdf_values,
            outer,
        })
    }

    /// Shared instance.
    pub fn standard() -> &'static Mollifier {
        static M: OnceLock<Mollifier> = OnceLock::new();
        M.get_or_init(|| Mollifier::new().expect("mollifier construction is deterministic"))
    }

    /// The normalization constant `C` with `C * int_0^1 exp(-1/(s(1-s))) ds = 1`.
    pub fn constant(&self) -> f64 {
        self.constant
    }

    /// `omega(s)`.
    pub fn omega(&self, s: f64) -> f64 {
        self.constant * bump_raw(s)
    }

    /// Cumulative `Omega(s) = int_0^s omega`, clamped to [0,1] outside the
    /// support. Cubic Hermite on the precomputed table; interpolation error
    /// is ~1e-12.
    pub fn cdf(&self, s: f64) -> f64 {
        if s <= 0.0 {
            return 0.0;
        }
        if s >= 1.0 {
            return 1.0;
        }
        let scaled = s * CDF_CELLS as f64;
        let i = (scaled as usize).min(CDF_CELLS - 1);
        let u = scaled - i as f64;
        let h = 1.0 / CDF_CELLS as f64;
        let (y0, y1) = (self.cdf_values[i], self.cdf_values[i + 1]);
        let (m0, m1) = (self.pdf_values[i] * h, self.pdf_values[i + 1] * h);
        let u2 = u * u;
        let u3 = u2 * u;
        (2.0 * u3 - 3.0 * u2 + 1.0) * y0
            + (u3 - 2.0 * u2 + u) * m0
            + (-2.0 * u3 + 3.0 * u2) * y1
            + (u3 - u2) * m1
    }

    /// First moment `m1 = int_0^1 s omega(s) ds`; equals 1/2 exactly by the
    /// s -> 1-s symmetry of the kernel.
    pub fn first_moment(&self) -> f64 {
        self.outer.iter().map(|&(s, w)| s * w).sum()
    }
}

/// Evaluator for `M_theta` and its gradient.
#[derive(Clone)]
pub struct RegMax {
    moll: &'static Mollifier,
    k_max: usize,
}

impl Default for RegMax {
    fn default() -> Self {
        RegMax::new()
    }
}

impl RegMax {
    pub fn new() -> RegMax {
        RegMax {
            moll: Mollifier::standard(),
            k_max: DEFAULT_K_MAX,
        }
    }

    pub fn with_k_max(k_max: usize) -> RegMax {
        RegMax {
            moll: Mollifier::standard(),
            k_max,
        }
    }

    pub fn mollifier(&self) -> &Mollifier {
        self.moll
    }

    fn check_args(&self, t: &[f64], theta: &ThetaVector) -> Result<()> {
        if t.len() != theta.len() {
            return Err(Error::DimensionMismatch(format!(
                "len(t) = {} but len(theta) = {}",
                t.len(),
                theta.len()
            )));
        }
        if t.is_empty() {
            return Err(Error::DimensionMismatch("k must be >= 1".into()));
        }
        if t.len() > self.k_max {
            return Err(Error::TooManyArguments {
                k: t.len(),
                max: self.k_max,
            });
        }
        Ok(())
    }

    /// `M_theta(t)`.
    pub fn eval(&self, t: &[f64], theta: &ThetaVector) -> Result<f64> {
        self.check_args(t, theta)?;
        let th = theta.as_slice();
        let k = t.len();
        let mut acc = 0.0;
        for j in 0..k {
            for &(s, w) in &self.moll.outer {
                if w == 0.0 {
                    continue;
                }
                let sj = t[j] + th[j] * s;
                let mut prod = 1.0;
                for i in 0..k {
                    if i != j {
                        prod *= self.moll.cdf((sj - t[i]) / th[i]);
                        if prod == 0.0 {
                            break;
                        }
                    }
                }
                acc += w * sj * prod;
            }
        }
        Ok(acc)
    }

    /// Gradient of `M_theta` at `t`; components are the argmax probabilities.
    pub fn grad(&self, t: &[f64], theta: &ThetaVector) -> Result<Vec<f64>> {
        self.check_args(t, theta)?;
        let th = theta.as_slice();
        let k = t.len();
        let mut g = vec![0.0; k];
        for j in 0..k {
            let mut acc = 0.0;
            for &(s, w) in &self.moll.outer {
                if w == 0.0 {
                    continue;
                }
                let sj = t[j] + th[j] * s;
                let mut prod = 1.0;
                for i in 0..k {
                    if i != j {
                        prod *= self.moll.cdf((sj - t[i]) / th[i]);
                        if prod == 0.0 {
                            break;
                        }
                    }
                }
                acc += w * prod;
            }
            g[j] = acc;
        }
        Ok(g)
    }

    /// The composite field `p -> M_theta(u_1(p),...,u_k(p))`, NUMERIC tier.
    pub fn field(&self, fields: &[ScalarField], theta: &ThetaVector) -> Result<ScalarField> {
        if fields.is_empty() {
            return Err(Error::DimensionMismatch("need at least one field".into()));
        }
        if fields.len() != theta.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} fields but {} theta components",
                fields.len(),
                theta.len()
            )));
        }
        let n = fields[0].n();
        for u in fields {
            if u.n() != n {
                return Err(Error::DimensionMismatch(format!(
                    "fields of mixed dimension {} and {}",
                    n,
                    u.n()
                )));
            }
        }
        // eager argument check so errors surface at construction
        self.check_args(&vec![0.0; fields.len()], theta)?;
        let fields: Vec<ScalarField> = fields.to_vec();
        let theta = theta.clone();
        let rm = self.clone();
        Ok(ScalarField::from_fn(
            n,
            Arc::new(move |p: &[f64]| {
                let mut t = Vec::with_capacity(fields.len());
                for u in &fields {
                    t.push(u.eval(p)?);
                }
                rm.eval(&t, &theta)
            }),
        ))
    }
}
