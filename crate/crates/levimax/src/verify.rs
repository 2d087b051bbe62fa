//! Grid verification of the two headline conclusions: the sandwich estimate
//! `max u_j <= utilde <= max u_j + max theta_j` for the smoothed maximum,
//! and the uniform Levi-form lower bound `H_J(utilde) >= alpha h` under the
//! hypothesis `H_J(u_j) >= alpha h` for every input function.
//!
//! All Levi comparisons use the factor-4 convention of [`crate::levi`], so
//! `u = ||z||^2` with the Euclidean metric normalizes to eigenvalue 1 and
//! `alpha` is compared directly against [`crate::levi::min_levi_eigen`].

use crate::field::ScalarField;
use crate::levi::min_levi_eigen;
use crate::regmax::{RegMax, ThetaVector};
use crate::scenario::Scenario;
use crate::{Error, Result};
use rayon::prelude::*;
use serde::Serialize;
use std::fmt::Write as _;

/// Builds `utilde = M_theta(u_1, ..., u_k)` as a scalar field.
pub fn smooth_max(fields: &[ScalarField], theta: &ThetaVector) -> Result<ScalarField> {
    RegMax::new().field(fields, theta)
}

/// Per-node outcome of a verification sweep. Estimate sweeps fill the gap
/// fields; Hessian sweeps fill the eigenvalue fields.
#[derive(Debug, Clone, Serialize)]
pub struct PointRecord {
    pub point: Vec<f64>,
    pub max_u: f64,
    pub u_tilde: f64,
    /// `utilde - max u_j`, in `[0, max theta_j]` up to tolerance.
    pub gap: f64,
    /// `min_levi_eigen(utilde)` (factor-4 convention), when computed.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min_levi_eigen: Option<f64>,
    /// The bound `alpha(p)` the eigenvalue is compared against.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    /// Worst constraint margin at this node (non-negative = satisfied).
    pub margin: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerificationReport {
    pub scenario: String,
    pub criterion: String,
    pub pass: bool,
    pub tolerance: f64,
    /// Most negative margin over the grid.
    pub worst_margin: f64,
    pub worst_point: Vec<f64>,
    pub nodes: usize,
    pub seed: u64,
    pub runtime_ms: u128,
    pub records: Vec<PointRecord>,
}

impl VerificationReport {
    /// Stable-order JSON (field order fixed by the struct declaration).
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Per-node records as CSV, one row per grid node.
    pub fn to_csv(&self) -> String {
        let dim = self.records.first().map_or(0, |r| r.point.len());
        let mut out = String::new();
        for i in 1..=dim {
            let _ = write!(out, "x{i},");
        }
        out.push_str("max_u,u_tilde,gap,min_levi_eigen,alpha,margin\n");
        for r in &self.records {
            for x in &r.point {
                let _ = write!(out, "{x:.12e},");
            }
            let fmt_opt = |v: Option<f64>| match v {
                Some(v) => format!("{v:.12e}"),
                None => String::new(),
            };
            let _ = writeln!(
                out,
                "{:.12e},{:.12e},{:.12e},{},{},{:.12e}",
                r.max_u,
                r.u_tilde,
                r.gap,
                fmt_opt(r.min_levi_eigen),
                fmt_opt(r.alpha),
                r.margin
            );
        }
        out
    }
}

/// Proposition-1 sweep: `utilde = M_{(eps,eps)}(u_1, u_2)` must satisfy
/// `0 <= utilde - max(u_1, u_2) <= eps + tol` at every grid node.
pub fn verify_estimate(
    u1: &ScalarField,
    u2: &ScalarField,
    epsilon: f64,
    grid: &[Vec<f64>],
    tol: f64,
    name: &str,
    seed: u64,
) -> Result<VerificationReport> {
    if epsilon <= 0.0 {
        return Err(Error::NonPositiveEpsilon(epsilon));
    }
    let start = std::time::Instant::now();
    let theta = ThetaVector::uniform(2, epsilon)?;
    let u_tilde = smooth_max(&[u1.clone(), u2.clone()], &theta)?;
    let records: Result<Vec<PointRecord>> = grid
        .par_iter()
        .map(|p| {
            let max_u = u1.eval(p)?.max(u2.eval(p)?);
            let value = u_tilde.eval(p)?;
            let gap = value - max_u;
            // distance to the nearest edge of [0, eps]
            let margin = gap.min(epsilon - gap);
            Ok(PointRecord {
                point: p.clone(),
                max_u,
                u_tilde: value,
                gap,
                min_levi_eigen: None,
                alpha: None,
                margin,
            })
        })
        .collect();
    let records = records?;
    Ok(assemble(
        name,
        "estimate",
        records,
        tol,
        seed,
        start.elapsed().as_millis(),
    ))
}

/// Theorem-3.2 sweep. First gates on the hypothesis — every `u_j` must
/// satisfy `min_levi_eigen(u_j) >= alpha - tol` at every node, otherwise
/// the run aborts with [`Error::HypothesisViolated`] naming the function
/// and point (the theorem is then not applicable, not falsified). Then
/// verifies the conclusion `min_levi_eigen(utilde) >= alpha - tol`.
///
/// The tolerance is `hessian_rel * max(alpha, 1)` per node.
pub fn verify_hessian_bound(scenario: &Scenario) -> Result<VerificationReport> {
    let start = std::time::Instant::now();
    let structure = scenario.build_structure()?;
    let fields = scenario.build_fields()?;
    let metric = scenario.build_metric();
    let alpha = scenario.build_alpha()?;
    let theta = scenario.build_theta()?;
    let grid = scenario.build_grid();
    let rel = scenario.tolerances.hessian_rel;

    // hypothesis gate
    for (j, u) in fields.iter().enumerate() {
        let worst: Result<Vec<(usize, f64, f64)>> = grid
            .par_iter()
            .enumerate()
            .map(|(i, p)| {
                let a = alpha.eval(p)?;
                let eigen = min_levi_eigen(&structure, u, p, &metric)?;
                Ok((i, eigen, a))
            })
            .collect();
        for (i, eigen, a) in worst? {
            let tol = rel * a.max(1.0);
            if eigen < a - tol {
                return Err(Error::HypothesisViolated(format!(
                    "u_{} has min Levi eigenvalue {:.6} < alpha = {:.6} at {:?}",
                    j + 1,
                    eigen,
                    a,
                    grid[i]
                )));
            }
        }
    }

    let u_tilde = smooth_max(&fields, &theta)?;
    let records: Result<Vec<PointRecord>> = grid
        .par_iter()
        .map(|p| {
            let a = alpha.eval(p)?;
            let eigen = min_levi_eigen(&structure, &u_tilde, p, &metric)?;
            let mut max_u = f64::NEG_INFINITY;
            for u in &fields {
                max_u = max_u.max(u.eval(p)?);
            }
            let value = u_tilde.eval(p)?;
            // normalized so that "margin >= -tol" reads "margin >= -rel"
            let margin = (eigen - a) / a.max(1.0);
            Ok(PointRecord {
                point: p.clone(),
                max_u,
                u_tilde: value,
                gap: value - max_u,
                min_levi_eigen: Some(eigen),
                alpha: Some(a),
                margin,
            })
        })
        .collect();
    let records = records?;
    Ok(assemble(
        &scenario.name,
        "hessian_bound",
        records,
        rel,
        scenario.seed,
        start.elapsed().as_millis(),
    ))
}

fn assemble(
    name: &str,
    criterion: &str,
    records: Vec<PointRecord>,
    tol: f64,
    seed: u64,
    runtime_ms: u128,
) -> VerificationReport {
    let mut worst_margin = f64::INFINITY;
    let mut worst_point = Vec::new();
    for r in &records {
        if r.margin < worst_margin {
            worst_margin = r.margin;
            worst_point = r.point.clone();
        }
    }
    VerificationReport {
        scenario: name.to_string(),
        criterion: criterion.to_string(),
        pass: worst_margin >= -tol,
        tolerance: tol,
        worst_margin,
        worst_point,
        nodes: records.len(),
        seed,
        runtime_ms,
        records,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::lattice;
    use crate::regmax::Mollifier;

    #[test]
    fn smooth_max_k1_is_shift() {
        let u = ScalarField::parse("x1^2 + x2^2", 1).unwrap();
        let theta = ThetaVector::new(vec![0.2]).unwrap();
        let f = smooth_max(std::slice::from_ref(&u), &theta).unwrap();
        let m1 = Mollifier::standard().first_moment();
        for p in [[0.0, 0.0], [0.3, -0.4]] {
            let expected = u.eval(&p).unwrap() + 0.2 * m1;
            assert!((f.eval(&p).unwrap() - expected).abs() < 1e-10);
        }
    }

    #[test]
    fn smooth_max_identical_fields_constant_gap() {
        let u = ScalarField::parse("x1", 1).unwrap();
        let theta = ThetaVector::new(vec![0.1, 0.1]).unwrap();
        let f = smooth_max(&[u.clone(), u.clone()], &theta).unwrap();
        let gap0 = f.eval(&[0.0, 0.0]).unwrap();
        for p in [[0.5, 0.1], [-0.7, 0.3]] {
            let gap = f.eval(&p).unwrap() - u.eval(&p).unwrap();
            assert!((gap - gap0).abs() < 1e-10);
        }
    }

    #[test]
    fn estimate_switching_line() {
        let u1 = ScalarField::parse("x1", 1).unwrap();
        let u2 = ScalarField::parse("0 - x1", 1).unwrap();
        let grid = lattice(-1.0, 1.0, 21, 2);
        let report = verify_estimate(&u1, &u2, 0.1, &grid, 1e-8, "switch", 0).unwrap();
        assert!(report.pass, "worst margin {}", report.worst_margin);
        // strictly positive gap on the switching line x1 = 0
        for r in report.records.iter().filter(|r| r.point[0].abs() < 1e-12) {
            assert!(r.gap > 1e-3, "gap {} at {:?}", r.gap, r.point);
        }
    }

    #[test]
    fn estimate_separated_case_constant_gap() {
        let u1 = ScalarField::parse("x1^2 + x2^2", 1).unwrap();
        let u2 = ScalarField::parse("x1^2 + x2^2 - 100", 1).unwrap();
        let grid = lattice(-1.0, 1.0, 5, 2);
        let report = verify_estimate(&u1, &u2, 0.1, &grid, 1e-8, "separated", 0).unwrap();
        assert!(report.pass);
        let g0 = report.records[0].gap;
        for r in &report.records {
            assert!((r.gap - g0).abs() < 1e-10);
            assert!(r.gap >= 0.0 && r.gap <= 0.1);
        }
    }

    #[test]
    fn estimate_rejects_nonpositive_epsilon() {
        let u = ScalarField::parse("x1", 1).unwrap();
        let grid = lattice(-1.0, 1.0, 3, 2);
        assert!(matches!(
            verify_estimate(&u, &u, 0.0, &grid, 1e-8, "bad", 0),
            Err(Error::NonPositiveEpsilon(_))
        ));
    }

    #[test]
    fn estimate_halving_epsilon_still_passes() {
        let u1 = ScalarField::parse("x1", 1).unwrap();
        let u2 = ScalarField::parse("0 - x1", 1).unwrap();
        let grid = lattice(-1.0, 1.0, 9, 2);
        for eps in [0.1, 0.05] {
            let report = verify_estimate(&u1, &u2, eps, &grid, 1e-8, "halve", 0).unwrap();
            assert!(report.pass, "eps {eps}: worst {}", report.worst_margin);
        }
    }

    #[test]
    fn hessian_bound_integrable_scenario_passes() {
        let scenario = Scenario::load("builtin:integrable-paraboloids").unwrap();
        let report = verify_hessian_bound(&scenario).unwrap();
        assert!(report.pass, "worst margin {}", report.worst_margin);
    }

    #[test]
    fn hessian_bound_hypothesis_gate() {
        // u_2 has Levi eigenvalue 0.5 < alpha = 1 everywhere
        let text = r#"{
            "name": "violating",
            "n": 1,
            "structure": {"kind": "standard"},
            "fields": ["x1^2 + x2^2", "0.5 * (x1^2 + x2^2)"],
            "alpha": "1",
            "theta": [0.1, 0.1],
            "grid": {"lo": -0.4, "hi": 0.4, "points": 3}
        }"#;
        let scenario = Scenario::from_json(text).unwrap();
        match verify_hessian_bound(&scenario) {
            Err(Error::HypothesisViolated(msg)) => {
                assert!(msg.contains("u_2"), "message: {msg}");
            }
            Err(other) => panic!("expected HypothesisViolated, got {other:?}"),
            Ok(r) => panic!("expected HypothesisViolated, got pass={}", r.pass),
        }
    }

    #[test]
    fn report_json_is_deterministic() {
        let u1 = ScalarField::parse("x1", 1).unwrap();
        let u2 = ScalarField::parse("0 - x1", 1).unwrap();
        let grid = lattice(-1.0, 1.0, 5, 2);
        let mut a = verify_estimate(&u1, &u2, 0.1, &grid, 1e-8, "det", 7).unwrap();
        let mut b = verify_estimate(&u1, &u2, 0.1, &grid, 1e-8, "det", 7).unwrap();
        // runtime is metadata, not part of the determinism contract
        a.runtime_ms = 0;
        b.runtime_ms = 0;
        assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
    }

    #[test]
    fn csv_has_header_and_rows() {
        let u1 = ScalarField::parse("x1", 1).unwrap();
        let u2 = ScalarField::parse("0 - x1", 1).unwrap();
        let grid = lattice(-1.0, 1.0, 3, 2);
        let report = verify_estimate(&u1, &u2, 0.1, &grid, 1e-8, "csv", 0).unwrap();
        let csv = report.to_csv();
        let mut lines = csv.lines();
        assert_eq!(
            lines.next().unwrap(),
            "x1,x2,max_u,u_tilde,gap,min_levi_eigen,alpha,margin"
        );
        assert_eq!(lines.count(), 9);
    }

    #[test]
    fn smoothness_across_switching_locus() {
        // second differences of utilde along a grid line vary continuously
        // across the max-switching locus
        let u1 = ScalarField::parse("x1", 1).unwrap();
        let u2 = ScalarField::parse("0 - x1", 1).unwrap();
        let theta = ThetaVector::new(vec![0.1, 0.1]).unwrap();
        let f = smooth_max(&[u1, u2], &theta).unwrap();
        let h = 1e-4;
        let mut second = Vec::new();
        for i in -300..=300 {
            let x = i as f64 * h;
            let d2 = (f.eval(&[x + h, 0.0]).unwrap() - 2.0 * f.eval(&[x, 0.0]).unwrap()
                + f.eval(&[x - h, 0.0]).unwrap())
                / (h * h);
            second.push(d2);
        }
        let scale = second.iter().cloned().fold(0.0f64, |m, v| m.max(v.abs()));
        for w in second.windows(2) {
            assert!(
                (w[1] - w[0]).abs() <= 1e-2 * scale,
                "jump {} vs scale {scale}",
                (w[1] - w[0]).abs()
            );
        }
    }
}
