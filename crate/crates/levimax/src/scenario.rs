//! Scenario configuration: a single JSON document bundling a structure,
//! the functions `u_1..u_k`, a metric, the lower-bound field `alpha`, the
//! smoothing widths, a grid, tolerances, and a seed.
//!
//! Scenarios load from a path or from the builtin registry via the
//! `builtin:` prefix (see [`BUILTINS`]).

use crate::almost_complex::{remark1_structure, AlmostComplexStructure, ComplexMatrixField};
use crate::expr::Expression;
use crate::field::{HermitianMetric, ScalarField};
use crate::regmax::ThetaVector;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Names accepted after the `builtin:` prefix.
pub const BUILTINS: [&str; 4] = [
    "integrable-paraboloids",
    "remark1-counterexample",
    "scaled-structure-psh",
    "theorem32-nonintegrable",
];

/// One complex expression entry, as a real/imaginary pair of expression
/// strings in the chart variables `x1..x{2n}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComplexExpr {
    pub re: String,
    pub im: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StructureSpec {
    /// The standard integrable structure (`A = 0`).
    Standard,
    /// `A(z) = z / (1 + zbar)` in one complex dimension.
    Remark1,
    /// Explicit `n x n` complex matrix field `A`, row-major entries.
    AExprs { entries: Vec<Vec<ComplexExpr>> },
    /// `A_lambda(z) = A(lambda z)` applied to a base spec.
    Scaled {
        base: Box<StructureSpec>,
        lambda: f64,
    },
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MetricSpec {
    #[default]
    Euclidean,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridSpec {
    pub lo: f64,
    pub hi: f64,
    /// Nodes per real axis; the lattice has `points^{2n}` nodes.
    pub points: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Tolerances {
    /// Absolute tolerance on the sandwich estimate (quadrature-limited).
    #[serde(default = "default_estimate_tol")]
    pub estimate: f64,
    /// Relative tolerance on Hessian lower bounds (FD-through-quadrature
    /// limited).
    #[serde(default = "default_hessian_rel")]
    pub hessian_rel: f64,
    /// Absolute tolerance on Levi-form values expected to vanish.
    #[serde(default = "default_levi_tol")]
    pub levi: f64,
}

fn default_estimate_tol() -> f64 {
    1e-8
}
fn default_hessian_rel() -> f64 {
    0.05
}
fn default_levi_tol() -> f64 {
    1e-5
}

impl Default for Tolerances {
    fn default() -> Tolerances {
        Tolerances {
            estimate: default_estimate_tol(),
            hessian_rel: default_hessian_rel(),
            levi: default_levi_tol(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DiscSpec {
    #[serde(default = "default_disc_r")]
    pub r: f64,
    #[serde(default = "default_disc_tol")]
    pub tol: f64,
}

fn default_disc_r() -> f64 {
    0.1
}
fn default_disc_tol() -> f64 {
    1e-4
}

impl Default for DiscSpec {
    fn default() -> DiscSpec {
        DiscSpec {
            r: default_disc_r(),
            tol: default_disc_tol(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub n: usize,
    pub structure: StructureSpec,
    /// Expressions for `u_1..u_k` in `x1..x{2n}`.
    pub fields: Vec<String>,
    #[serde(default)]
    pub metric: MetricSpec,
    /// Lower-bound field `alpha` as an expression (defaults to 0).
    #[serde(default)]
    pub alpha: Option<String>,
    /// Smoothing widths `theta_1..theta_k`.
    #[serde(default)]
    pub theta: Option<Vec<f64>>,
    /// Uniform width for the Proposition-1 estimate (`theta_j = epsilon`).
    #[serde(default)]
    pub epsilon: Option<f64>,
    pub grid: GridSpec,
    #[serde(default)]
    pub tolerances: Tolerances,
    /// Strictness margin for plurisubharmonicity sweeps.
    #[serde(default)]
    pub psh_margin: Option<f64>,
    /// When true, `levi check` asserts the Levi form vanishes (within the
    /// `levi` tolerance) instead of a positivity margin.
    #[serde(default)]
    pub levi_vanishes: bool,
    #[serde(default)]
    pub disc: Option<DiscSpec>,
    #[serde(default)]
    pub seed: u64,
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Scenario> {
        let scenario: Scenario = serde_json::from_str(text)?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn from_path(path: &Path) -> Result<Scenario> {
        Scenario::from_json(&std::fs::read_to_string(path)?)
    }

    /// Loads `builtin:<name>` from the registry, anything else as a path.
    pub fn load(spec: &str) -> Result<Scenario> {
        match spec.strip_prefix("builtin:") {
            Some(name) => Scenario::from_json(builtin_json(name)?),
            None => Scenario::from_path(Path::new(spec)),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::Scenario("dimension n must be positive".into()));
        }
        if self.fields.is_empty() {
            return Err(Error::Scenario("at least one field is required".into()));
        }
        if self.grid.points == 0 || self.grid.hi <= self.grid.lo {
            return Err(Error::Scenario(format!(
                "grid must satisfy lo < hi and points > 0, got [{}, {}] with {} points",
                self.grid.lo, self.grid.hi, self.grid.points
            )));
        }
        if let Some(theta) = &self.theta {
            if theta.len() != self.fields.len() {
                return Err(Error::Scenario(format!(
                    "theta has {} entries for {} fields",
                    theta.len(),
                    self.fields.len()
                )));
            }
            if let Some(&bad) = theta.iter().find(|t| **t <= 0.0) {
                return Err(Error::NonPositiveTheta(bad));
            }
        }
        Ok(())
    }

    pub fn build_structure(&self) -> Result<AlmostComplexStructure> {
        build_structure_spec(&self.structure, self.n)
    }

    pub fn build_fields(&self) -> Result<Vec<ScalarField>> {
        self.fields
            .iter()
            .map(|text| ScalarField::parse(text, self.n))
            .collect()
    }

    pub fn build_metric(&self) -> HermitianMetric {
        match self.metric {
            MetricSpec::Euclidean => HermitianMetric::Euclidean { n: self.n },
        }
    }

    pub fn build_alpha(&self) -> Result<ScalarField> {
        match &self.alpha {
            Some(text) => ScalarField::parse(text, self.n),
            None => Ok(ScalarField::constant(self.n, 0.0)),
        }
    }

    /// The smoothing widths: explicit `theta` wins, otherwise `epsilon` is
    /// replicated across the fields.
    pub fn build_theta(&self) -> Result<ThetaVector> {
        match (&self.theta, self.epsilon) {
            (Some(theta), _) => ThetaVector::new(theta.clone()),
            (None, Some(eps)) => ThetaVector::uniform(self.fields.len(), eps),
            (None, None) => Err(Error::Scenario(
                "scenario provides neither theta nor epsilon".into(),
            )),
        }
    }

    pub fn build_grid(&self) -> Vec<Vec<f64>> {
        crate::grid::lattice(self.grid.lo, self.grid.hi, self.grid.points, 2 * self.n)
    }
}

fn build_structure_spec(spec: &StructureSpec, n: usize) -> Result<AlmostComplexStructure> {
    match spec {
        StructureSpec::Standard => Ok(AlmostComplexStructure::standard(n)),
        StructureSpec::Remark1 => {
            if n != 1 {
                return Err(Error::Scenario(format!(
                    "the remark1 structure lives in n = 1, scenario has n = {n}"
                )));
            }
            Ok(remark1_structure())
        }
        StructureSpec::AExprs { entries } => {
            if entries.len() != n || entries.iter().any(|row| row.len() != n) {
                return Err(Error::Scenario(format!(
                    "structure entries must form an {n} x {n} matrix"
                )));
            }
            let mut parsed = Vec::with_capacity(n * n);
            for row in entries {
                for entry in row {
                    parsed.push((
                        Expression::parse(&entry.re, n)?,
                        Expression::parse(&entry.im, n)?,
                    ));
                }
            }
            Ok(AlmostComplexStructure::from_complex_matrix_field(
                ComplexMatrixField::Exprs { n, entries: parsed },
            ))
        }
        StructureSpec::Scaled { base, lambda } => {
            if *lambda <= 0.0 {
                return Err(Error::Scenario(format!(
                    "scale factor lambda must be positive, got {lambda}"
                )));
            }
            let base = build_structure_spec(base, n)?;
            match base {
                AlmostComplexStructure::ComplexMatrixField(a) => Ok(
                    AlmostComplexStructure::ComplexMatrixField(a.scaled(*lambda)),
                ),
                AlmostComplexStructure::JMatrixField(_) => Err(Error::Scenario(
                    "scaling requires an A-form base structure".into(),
                )),
            }
        }
    }
}

fn builtin_json(name: &str) -> Result<&'static str> {
    match name {
        "integrable-paraboloids" => Ok(include_str!("../scenarios/integrable-paraboloids.json")),
        "remark1-counterexample" => Ok(include_str!("../scenarios/remark1-counterexample.json")),
        "scaled-structure-psh" => Ok(include_str!("../scenarios/scaled-structure-psh.json")),
        "theorem32-nonintegrable" => Ok(include_str!("../scenarios/theorem32-nonintegrable.json")),
        other => Err(Error::Scenario(format!(
            "unknown builtin scenario `{other}` (available: {})",
            BUILTINS.join(", ")
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins_all_load_and_build() {
        for name in BUILTINS {
            let s = Scenario::load(&format!("builtin:{name}")).unwrap();
            assert_eq!(s.name, name);
            s.build_structure().unwrap();
            let fields = s.build_fields().unwrap();
            assert!(!fields.is_empty());
            s.build_alpha().unwrap();
            if s.theta.is_some() || s.epsilon.is_some() {
                s.build_theta().unwrap();
            }
            assert!(!s.build_grid().is_empty());
        }
    }

    #[test]
    fn unknown_builtin_is_rejected() {
        match Scenario::load("builtin:nope") {
            Err(Error::Scenario(msg)) => assert!(msg.contains("nope")),
            other => panic!("expected scenario error, got {:?}", other.map(|s| s.name)),
        }
    }

    #[test]
    fn theta_length_mismatch_is_rejected() {
        let text = r#"{
            "name": "bad",
            "n": 1,
            "structure": {"kind": "standard"},
            "fields": ["x1"],
            "theta": [0.1, 0.2],
            "grid": {"lo": -1.0, "hi": 1.0, "points": 3}
        }"#;
        assert!(matches!(Scenario::from_json(text), Err(Error::Scenario(_))));
    }

    #[test]
    fn nonpositive_theta_is_rejected() {
        let text = r#"{
            "name": "bad",
            "n": 1,
            "structure": {"kind": "standard"},
            "fields": ["x1"],
            "theta": [0.0],
            "grid": {"lo": -1.0, "hi": 1.0, "points": 3}
        }"#;
        assert!(matches!(
            Scenario::from_json(text),
            Err(Error::NonPositiveTheta(_))
        ));
    }

    #[test]
    fn scaled_structure_spec_scales_the_argument() {
        let text = r#"{
            "name": "s",
            "n": 1,
            "structure": {
                "kind": "scaled",
                "base": {
                    "kind": "a_exprs",
                    "entries": [[{"re": "0.2 * x1", "im": "0"}]]
                },
                "lambda": 0.5
            },
            "fields": ["x1^2 + x2^2"],
            "epsilon": 0.1,
            "grid": {"lo": -0.4, "hi": 0.4, "points": 3}
        }"#;
        let s = Scenario::from_json(text).unwrap();
        let structure = s.build_structure().unwrap();
        let a = structure.complex_matrix_at(&[1.0, 0.0]).unwrap();
        assert!((a[(0, 0)].re - 0.1).abs() < 1e-14);
    }
}
