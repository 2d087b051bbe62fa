//! Small J-complex discs by Picard iteration on a discretized Cauchy-Green
//! operator.
//!
//! A disc `f: rD -> C^n` is J-complex when `d_etabar f = 0` in the
//! quasilinear form `d_zetabar f + A(f) conj(d_zeta f) = 0`, which the solver
//! treats as the fixed-point problem `f = f0 - T[A(f) conj(d_zeta f)]` with
//! `f0(zeta) = p + zeta V` and `T` the Cauchy-Green operator on the disc of
//! radius `r`.
//!
//! `T` is discretized on a polar midpoint grid with singularity subtraction:
//! the sampled density `g` is split into a low-order polynomial fit `ghat`
//! (in `zeta`, `zetabar`), whose transform is known in closed form on the
//! disc, plus a small residual handled by the plain midpoint sum,
//!
//! ```text
//! T[g](zeta) = T_exact[ghat](zeta)
//!            + (1/pi) sum_c area_c (g_c - ghat(w_c)) / (zeta - w_c)
//! ```
//!
//! This is exact for polynomial densities (in particular the classical
//! identity `T[1] = zetabar`), linear in `g`, and the near-singular kernel
//! only ever multiplies the fit residual, so the quadrature error is the
//! product of two small factors. The plain midpoint sum, by contrast, is
//! meromorphic in `zeta` and fails any pointwise `d_zetabar` check.

use crate::almost_complex::{operator_norm, AlmostComplexStructure};
use crate::field::{complexify, realify, ScalarField};
use crate::{Error, Result};
use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use num_complex::Complex64;
use std::f64::consts::PI;
use std::fmt::Write as _;

/// Number of terms in the polynomial fit basis `(z/r)^j (zbar/r)^k`,
/// `j + k <= 5`. The fit truncation error bounds the off-node equation
/// residual of the solved disc, so the degree is chosen to push it well
/// under the default solver tolerance.
const N_BASIS: usize = 21;

/// Exponent table for the fit basis, `(j, k)` per entry.
const BASIS_POWERS: [(u32, u32); N_BASIS] = [
    (0, 0),
    (1, 0),
    (0, 1),
    (2, 0),
    (1, 1),
    (0, 2),
    (3, 0),
    (2, 1),
    (1, 2),
    (0, 3),
    (4, 0),
    (3, 1),
    (2, 2),
    (1, 3),
    (0, 4),
    (5, 0),
    (4, 1),
    (3, 2),
    (2, 3),
    (1, 4),
    (0, 5),
];

/// Polar midpoint grid on the disc of radius `r`: `n_r` rings times `n_phi`
/// sectors, cell centers at `rho_i = (i + 1/2) dr`, `phi_j = (j + 1/2) dphi`,
/// weight `rho_i dr dphi` (the weights sum to `pi r^2` exactly).
pub struct DiscGrid {
    pub r: f64,
    pub n_r: usize,
    pub n_phi: usize,
    pub centers: Vec<Complex64>,
    pub weights: Vec<f64>,
    /// `phi_b(w_c)` for the fit basis, row per node.
    basis: DMatrix<Complex64>,
    gram: Cholesky<Complex64, Dyn>,
}

impl DiscGrid {
    pub fn new(r: f64, n_r: usize, n_phi: usize) -> DiscGrid {
        let dr = r / n_r as f64;
        let dphi = 2.0 * PI / n_phi as f64;
        let nn = n_r * n_phi;
        let mut centers = Vec::with_capacity(nn);
        let mut weights = Vec::with_capacity(nn);
        for i in 0..n_r {
            let rho = (i as f64 + 0.5) * dr;
            for j in 0..n_phi {
                let phi = (j as f64 + 0.5) * dphi;
                centers.push(Complex64::from_polar(rho, phi));
                weights.push(rho * dr * dphi);
            }
        }
        let basis = DMatrix::from_fn(nn, N_BASIS, |c, b| basis_value(centers[c], r, b));
        let mut gram = DMatrix::<Complex64>::zeros(N_BASIS, N_BASIS);
        for c in 0..nn {
            for a in 0..N_BASIS {
                for b in 0..N_BASIS {
                    gram[(a, b)] += basis[(c, a)].conj() * basis[(c, b)] * weights[c];
                }
            }
        }
        let gram = Cholesky::new(gram).expect("fit Gram matrix is positive definite");
        DiscGrid {
            r,
            n_r,
            n_phi,
            centers,
            weights,
            basis,
            gram,
        }
    }

    /// Least-squares fit of sampled node values onto the polynomial basis
    /// (area-weighted); linear in the samples.
    fn fit(&self, values: &[Complex64]) -> DVector<Complex64> {
        let mut rhs = DVector::<Complex64>::zeros(N_BASIS);
        for c in 0..values.len() {
            for a in 0..N_BASIS {
                rhs[a] += self.basis[(c, a)].conj() * values[c] * self.weights[c];
            }
        }
        self.gram.solve(&rhs)
    }
}

fn basis_value(z: Complex64, r: f64, b: usize) -> Complex64 {
    let (j, k) = BASIS_POWERS[b];
    (z / r).powu(j) * (z / r).conj().powu(k)
}

fn fit_eval(coeffs: &DVector<Complex64>, z: Complex64, r: f64) -> Complex64 {
    (0..N_BASIS).map(|b| coeffs[b] * basis_value(z, r, b)).sum()
}

/// Closed-form Cauchy-Green transform of a basis monomial on the disc of
/// radius `r`: `T[w^j wbar^k](zeta)` and its `d_zeta` derivative, scaled
/// like the basis. Derived from the Laurent expansion of the kernel:
///
/// ```text
/// k >= j:  T = z^j zbar^{k+1} / (k+1)
/// j >  k:  T = (z^j zbar^{k+1} - r^{2k+2} z^{j-k-1}) / (k+1)
/// ```
fn basis_cg(z: Complex64, r: f64, b: usize) -> (Complex64, Complex64) {
    let (j, k) = BASIS_POWERS[b];
    let scale = r.powi(-((j + k) as i32));
    let denom = (k + 1) as f64;
    let mut t = z.powu(j) * z.conj().powu(k + 1);
    let mut t_dz = if j == 0 {
        Complex64::default()
    } else {
        Complex64::new(j as f64, 0.0) * z.powu(j - 1) * z.conj().powu(k + 1)
    };
    if j > k {
        let rp = r.powi(2 * (k as i32) + 2);
        t -= rp * z.powu(j - k - 1);
        if j - k - 1 > 0 {
            t_dz -= rp * Complex64::new((j - k - 1) as f64, 0.0) * z.powu(j - k - 2);
        }
    }
    (t * scale / denom, t_dz * scale / denom)
}

/// `T_exact[ghat]` and its `d_zeta` derivative for a fitted polynomial.
fn fit_cg(coeffs: &DVector<Complex64>, z: Complex64, r: f64) -> (Complex64, Complex64) {
    let mut t = Complex64::default();
    let mut t_dz = Complex64::default();
    for b in 0..N_BASIS {
        let (tb, tb_dz) = basis_cg(z, r, b);
        t += coeffs[b] * tb;
        t_dz += coeffs[b] * tb_dz;
    }
    (t, t_dz)
}

/// `T[g](zeta)` and `d_zeta T[g](zeta)` at an arbitrary (non-node) point,
/// using the subtraction form with the fitted smooth density.
fn cauchy_green_at(
    grid: &DiscGrid,
    g: &[Complex64],
    coeffs: &DVector<Complex64>,
    zeta: Complex64,
) -> (Complex64, Complex64) {
    let (mut t, mut t_dz) = fit_cg(coeffs, zeta, grid.r);
    let mut s1 = Complex64::default();
    let mut s2 = Complex64::default();
    for c in 0..g.len() {
        let d = zeta - grid.centers[c];
        if d.norm_sqr() < 1e-24 {
            continue;
        }
        let resid = g[c] - fit_eval(coeffs, grid.centers[c], grid.r);
        let inv = d.inv();
        let wr = grid.weights[c] * resid;
        s1 += wr * inv;
        s2 += wr * inv * inv;
    }
    t += s1 / PI;
    t_dz -= s2 / PI;
    (t, t_dz)
}

/// Public single-density Cauchy-Green transform: returns `T[g]` sampled at
/// the nodes. Exactly linear in `g` and exact on constants.
pub fn cauchy_green(grid: &DiscGrid, g: &[Complex64]) -> Vec<Complex64> {
    let coeffs = grid.fit(g);
    node_transform(grid, g, &coeffs).0
}

/// `T[g]` and `d_zeta T[g]` at all nodes, reusing the precomputed
/// self-excluded kernel sums.
fn node_transform(
    grid: &DiscGrid,
    g: &[Complex64],
    coeffs: &DVector<Complex64>,
) -> (Vec<Complex64>, Vec<Complex64>) {
    let nn = g.len();
    let resid: Vec<Complex64> = (0..nn)
        .map(|c| {
            let ghat: Complex64 = (0..N_BASIS).map(|b| coeffs[b] * grid.basis[(c, b)]).sum();
            g[c] - ghat
        })
        .collect();
    let mut t = vec![Complex64::default(); nn];
    let mut t_dz = vec![Complex64::default(); nn];
    for k in 0..nn {
        let zk = grid.centers[k];
        let mut s1 = Complex64::default();
        let mut s2 = Complex64::default();
        for c in 0..nn {
            if c == k {
                continue;
            }
            let inv = (zk - grid.centers[c]).inv();
            let wr = grid.weights[c] * resid[c];
            s1 += wr * inv;
            s2 += wr * inv * inv;
        }
        let (tp, tp_dz) = fit_cg(coeffs, zk, grid.r);
        t[k] = tp + s1 / PI;
        t_dz[k] = tp_dz - s2 / PI;
    }
    (t, t_dz)
}

#[derive(Debug, Clone)]
pub struct DiscParams {
    pub r: f64,
    pub tol: f64,
    pub max_iterations: usize,
    pub n_r: usize,
    pub n_phi: usize,
    /// The solve fails with `DomainEscape` if `|f - p|` exceeds this.
    pub chart_radius: f64,
}

impl Default for DiscParams {
    fn default() -> DiscParams {
        DiscParams {
            r: 0.1,
            tol: 1e-4,
            max_iterations: 50,
            n_r: 32,
            n_phi: 64,
            chart_radius: 1.0,
        }
    }
}

/// A converged J-complex disc, evaluable anywhere on its domain.
pub struct DiscMap {
    pub grid: DiscGrid,
    /// Center `f(0) = p` (real coordinates).
    pub p: Vec<f64>,
    /// Center derivative `d_xi f(0) = V` (complex coordinates).
    pub v: DVector<Complex64>,
    /// Sampled values `f(w_c)`, one complex n-vector per node.
    pub values: Vec<DVector<Complex64>>,
    pub iterations: usize,
    pub final_increment: f64,
    /// Final Picard density `g = A(f) conj(d_zeta f)` per component.
    g: Vec<Vec<Complex64>>,
    fits: Vec<DVector<Complex64>>,
    /// Affine re-centering offsets of the final sweep.
    a: DVector<Complex64>,
    b: DVector<Complex64>,
}

impl DiscMap {
    /// Evaluates the disc at any `|zeta| <= r` (complex coordinates).
    pub fn eval(&self, zeta: Complex64) -> DVector<Complex64> {
        let n = self.v.len();
        let pc = complexify(&self.p);
        DVector::from_fn(n, |j, _| {
            let (t, _) = cauchy_green_at(&self.grid, &self.g[j], &self.fits[j], zeta);
            pc[j] + zeta * self.v[j] - t - self.a[j] - self.b[j] * zeta
        })
    }

    /// Evaluates the disc in real coordinates.
    pub fn eval_real(&self, zeta: Complex64) -> Vec<f64> {
        realify(&self.eval(zeta))
    }

    /// Sup over the interior nodes of `|d_eta f - J(f) d_xi f|_inf`, the
    /// defining equation of a J-complex disc, with the derivatives taken by
    /// centered differences of the node samples on the polar grid
    /// (`d_xi = cos(phi) d_rho - sin(phi)/rho d_phi`, etc.; sectors wrap,
    /// boundary rings are excluded).
    pub fn cr_residual(&self, structure: &AlmostComplexStructure) -> Result<f64> {
        let n_r = self.grid.n_r;
        let n_phi = self.grid.n_phi;
        let dr = self.grid.r / n_r as f64;
        let dphi = 2.0 * PI / n_phi as f64;
        // difference the correction h = f - (p + zeta V); the affine part
        // is differentiated exactly, which keeps the angular truncation of
        // e^{i phi} out of the residual
        let pc = complexify(&self.p);
        let at = |i: usize, j: usize| {
            let idx = i * n_phi + (j % n_phi);
            let w = self.grid.centers[idx];
            &self.values[idx] - (&pc + (&self.v).map(|c| c * w))
        };
        let mut worst = 0.0f64;
        for i in 1..n_r - 1 {
            let rho = (i as f64 + 0.5) * dr;
            for j in 0..n_phi {
                let phi = (j as f64 + 0.5) * dphi;
                let d_rho = (at(i + 1, j) - at(i - 1, j)) / Complex64::new(2.0 * dr, 0.0);
                let d_phi =
                    (at(i, j + 1) - at(i, j + n_phi - 1)) / Complex64::new(2.0 * dphi, 0.0);
                let (sin, cos) = phi.sin_cos();
                let f_xi =
                    &self.v + d_rho.map(|c| c * cos) - d_phi.map(|c| c * sin / rho);
                let f_eta = (&self.v).map(|c| c * Complex64::i())
                    + d_rho.map(|c| c * sin)
                    + d_phi.map(|c| c * cos / rho);
                let here = realify(&self.values[i * n_phi + j]);
                let jm = structure.j_at(&here)?;
                let lhs = DVector::from_vec(realify(&f_eta));
                let rhs = &jm * DVector::from_vec(realify(&f_xi));
                worst = worst.max((lhs - rhs).amax());
            }
        }
        Ok(worst)
    }

    /// Average of `u o f` over the circle of radius `rho` (in the domain).
    pub fn circle_average(&self, u: &ScalarField, rho: f64, samples: usize) -> Result<f64> {
        let mut acc = 0.0;
        for s in 0..samples {
            let zeta = Complex64::from_polar(rho, 2.0 * PI * s as f64 / samples as f64);
            acc += u.eval(&self.eval_real(zeta))?;
        }
        Ok(acc / samples as f64)
    }

    /// Node samples as CSV: `xi,eta,re_f1,im_f1,...`.
    pub fn to_csv(&self) -> String {
        let n = self.v.len();
        let mut out = String::from("xi,eta");
        for j in 1..=n {
            let _ = write!(out, ",re_f{j},im_f{j}");
        }
        out.push('\n');
        for (c, w) in self.grid.centers.iter().enumerate() {
            let _ = write!(out, "{:.12e},{:.12e}", w.re, w.im);
            for j in 0..n {
                let v = self.values[c][j];
                let _ = write!(out, ",{:.12e},{:.12e}", v.re, v.im);
            }
            out.push('\n');
        }
        out
    }
}

/// Solves the quasilinear Cauchy-Riemann equation for a J-complex disc with
/// center jet `f(0) = p`, `d_xi f(0) = V`, by Picard iteration
/// `f <- f0 - T[A(f) conj(d_zeta f)]` with affine re-centering after each
/// sweep (the jet holds exactly; the CR residual is what the tolerance
/// governs).
pub fn solve_disc(
    structure: &AlmostComplexStructure,
    p: &[f64],
    v: &DVector<Complex64>,
    params: &DiscParams,
) -> Result<DiscMap> {
    let n = structure.n();
    if p.len() != 2 * n || v.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "disc center data for n = {n}: point has {} coordinates, direction {}",
            p.len(),
            v.len()
        )));
    }
    let grid = DiscGrid::new(params.r, params.n_r, params.n_phi);
    let nn = grid.centers.len();
    let pc = complexify(p);
    let mut f: Vec<DVector<Complex64>> = grid
        .centers
        .iter()
        .map(|&w| DVector::from_fn(n, |j, _| pc[j] + w * v[j]))
        .collect();
    let mut df: Vec<DVector<Complex64>> = vec![v.clone(); nn];

    let mut g = vec![vec![Complex64::default(); nn]; n];
    let mut fits = vec![DVector::<Complex64>::zeros(N_BASIS); n];
    let mut a_off = DVector::<Complex64>::zeros(n);
    let mut b_off = DVector::<Complex64>::zeros(n);
    let mut last_increment = f64::INFINITY;

    for iter in 1..=params.max_iterations {
        // density g = A(f) conj(d_zeta f) at the nodes
        for k in 0..nn {
            let fr = realify(&f[k]);
            let drift = (&f[k] - &pc).iter().map(|c| c.norm()).fold(0.0, f64::max);
            if drift > params.chart_radius {
                return Err(Error::DomainEscape(drift));
            }
            let a_mat = structure.complex_matrix_at(&fr)?;
            let norm = operator_norm(&a_mat);
            if norm >= 1.0 {
                return Err(Error::MatrixNormTooLarge(norm));
            }
            let gk = a_mat * df[k].map(|c| c.conj());
            for j in 0..n {
                g[j][k] = gk[j];
            }
        }
        // component-wise transform and re-centering offsets
        let mut t_nodes = Vec::with_capacity(n);
        let mut tdz_nodes = Vec::with_capacity(n);
        for j in 0..n {
            fits[j] = grid.fit(&g[j]);
            let (t, tdz) = node_transform(&grid, &g[j], &fits[j]);
            let (t0, t0_dz) = cauchy_green_at(&grid, &g[j], &fits[j], Complex64::default());
            // f_raw = f0 - T[g]; a = -T(0); b = d_xi f_raw(0) - V
            //       = -(d_zeta T(0) + d_zetabar T(0)) = -(T'(0) + ghat(0))
            a_off[j] = -t0;
            b_off[j] = -(t0_dz + fit_eval(&fits[j], Complex64::default(), grid.r));
            t_nodes.push(t);
            tdz_nodes.push(tdz);
        }
        let mut increment = 0.0f64;
        for k in 0..nn {
            let w = grid.centers[k];
            let f_new = DVector::from_fn(n, |j, _| {
                pc[j] + w * v[j] - t_nodes[j][k] - a_off[j] - b_off[j] * w
            });
            let df_new = DVector::from_fn(n, |j, _| v[j] - tdz_nodes[j][k] - b_off[j]);
            increment = increment.max((&f_new - &f[k]).iter().map(|c| c.norm()).fold(0.0, f64::max));
            f[k] = f_new;
            df[k] = df_new;
        }
        last_increment = increment;
        if increment < params.tol / 10.0 {
            return Ok(DiscMap {
                grid,
                p: p.to_vec(),
                v: v.clone(),
                values: f,
                iterations: iter,
                final_increment: increment,
                g,
                fits,
                a: a_off,
                b: b_off,
            });
        }
    }
    Err(Error::DiscNonConvergence {
        iterations: params.max_iterations,
        last_increment,
    })
}

/// Hessian oracle `H_J(u)(p, V) = Laplacian(u o f)(0)`: 5-point finite
/// difference Laplacian of the composed disc at scale `r/4`, Richardson
/// extrapolated over two scales.
pub fn hessian_via_disc(
    structure: &AlmostComplexStructure,
    u: &ScalarField,
    p: &[f64],
    v: &DVector<Complex64>,
    params: &DiscParams,
) -> Result<f64> {
    let map = solve_disc(structure, p, v, params)?;
    let u_at = |zeta: Complex64| u.eval(&map.eval_real(zeta));
    let center = u_at(Complex64::default())?;
    let lap = |rho: f64| -> Result<f64> {
        let sum = u_at(Complex64::new(rho, 0.0))?
            + u_at(Complex64::new(-rho, 0.0))?
            + u_at(Complex64::new(0.0, rho))?
            + u_at(Complex64::new(0.0, -rho))?;
        Ok((sum - 4.0 * center) / (rho * rho))
    };
    let rho = params.r / 4.0;
    let l1 = lap(rho)?;
    let l2 = lap(rho / 2.0)?;
    Ok((4.0 * l2 - l1) / 3.0)
}

/// The circle-averaged subharmonicity margin `min_rho avg(u o f) - u(p)`
/// over a small radius battery (non-negative for J-psh u, up to
/// discretization error).
pub fn subharmonicity_margin(map: &DiscMap, u: &ScalarField) -> Result<f64> {
    let center = u.eval(&map.p)?;
    let mut margin = f64::INFINITY;
    for &frac in &[0.25, 0.5, 0.75] {
        let avg = map.circle_average(u, frac * map.grid.r, 64)?;
        margin = margin.min(avg - center);
    }
    Ok(margin)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::almost_complex::remark1_structure;
    use approx::assert_relative_eq;

    fn small_grid() -> DiscGrid {
        DiscGrid::new(0.1, 12, 24)
    }

    #[test]
    fn weights_sum_to_disc_area() {
        for (r, n_r, n_phi) in [(0.1, 32, 64), (1.0, 8, 16), (0.7, 5, 9)] {
            let grid = DiscGrid::new(r, n_r, n_phi);
            let total: f64 = grid.weights.iter().sum();
            assert!((total - PI * r * r).abs() < 1e-10, "area defect for r={r}");
            assert!(grid.weights.iter().all(|&w| w > 0.0));
        }
    }

    #[test]
    fn cauchy_green_of_zero_is_zero() {
        let grid = small_grid();
        let g = vec![Complex64::default(); grid.centers.len()];
        let t = cauchy_green(&grid, &g);
        assert!(t.iter().all(|c| c.norm() == 0.0));
    }

    #[test]
    fn cauchy_green_of_one_is_zetabar() {
        let grid = small_grid();
        let g = vec![Complex64::new(1.0, 0.0); grid.centers.len()];
        let t = cauchy_green(&grid, &g);
        for (k, &w) in grid.centers.iter().enumerate() {
            assert!((t[k] - w.conj()).norm() < 1e-13);
        }
        // and at an off-node point
        let coeffs = grid.fit(&g);
        let zeta = Complex64::new(0.033, -0.041);
        let (tz, tz_dz) = cauchy_green_at(&grid, &g, &coeffs, zeta);
        assert!((tz - zeta.conj()).norm() < 1e-13);
        assert!(tz_dz.norm() < 1e-12);
    }

    #[test]
    fn cauchy_green_linearity() {
        let grid = small_grid();
        let g1: Vec<Complex64> = grid.centers.iter().map(|w| w * w.conj()).collect();
        let g2: Vec<Complex64> = grid.centers.iter().map(|w| w + Complex64::i()).collect();
        let a = Complex64::new(1.7, -0.3);
        let combo: Vec<Complex64> = g1.iter().zip(&g2).map(|(x, y)| a * x + y).collect();
        let t1 = cauchy_green(&grid, &g1);
        let t2 = cauchy_green(&grid, &g2);
        let tc = cauchy_green(&grid, &combo);
        for k in 0..g1.len() {
            assert!((tc[k] - (a * t1[k] + t2[k])).norm() < 1e-12);
        }
    }

    #[test]
    fn cauchy_green_inverts_dbar() {
        // d_zetabar T[g] = g checked by finite differences at off-node
        // points, for a density inside the fit space (g = zeta).
        let grid = small_grid();
        let g: Vec<Complex64> = grid.centers.to_vec();
        let coeffs = grid.fit(&g);
        let h = 1e-4;
        for zeta in [Complex64::new(0.02, 0.03), Complex64::new(-0.05, 0.017)] {
            let at = |z: Complex64| cauchy_green_at(&grid, &g, &coeffs, z).0;
            let dx = (at(zeta + h) - at(zeta - h)) / (2.0 * h);
            let dy = (at(zeta + Complex64::i() * h) - at(zeta - Complex64::i() * h)) / (2.0 * h);
            let dbar = (dx + Complex64::i() * dy) / 2.0;
            assert!((dbar - zeta).norm() < 1e-6, "residual {}", (dbar - zeta).norm());
        }
    }

    #[test]
    fn standard_structure_gives_affine_disc() {
        let s = AlmostComplexStructure::standard(1);
        let v = DVector::from_vec(vec![Complex64::new(1.0, 0.0)]);
        let map = solve_disc(&s, &[0.2, -0.1], &v, &DiscParams::default()).unwrap();
        assert_eq!(map.iterations, 1);
        let pc = Complex64::new(0.2, -0.1);
        for (k, &w) in map.grid.centers.iter().enumerate() {
            assert!((map.values[k][0] - (pc + w)).norm() < 1e-14);
        }
        let z = Complex64::new(0.04, 0.02);
        assert!((map.eval(z)[0] - (pc + z)).norm() < 1e-14);
        assert!(map.cr_residual(&s).unwrap() < 1e-11);
    }

    #[test]
    fn remark1_disc_converges_with_small_cr_residual() {
        let s = remark1_structure();
        let v = DVector::from_vec(vec![Complex64::new(1.0, 0.0)]);
        let params = DiscParams::default();
        let map = solve_disc(&s, &[0.0, 0.0], &v, &params).unwrap();
        assert!(map.iterations < params.max_iterations);
        // center jet is exact
        let f0 = map.eval(Complex64::default());
        assert!(f0[0].norm() < 1e-13);
        let residual = map.cr_residual(&s).unwrap();
        assert!(residual <= params.tol, "CR residual {residual}");
    }

    #[test]
    fn remark1_disc_transports_to_holomorphic() {
        // F(zeta~) = zeta~ + |zeta~|^2 straightens the structure, so F o f
        // must be J_st-holomorphic: d_zetabar(F o f) small.
        let s = remark1_structure();
        let v = DVector::from_vec(vec![Complex64::new(1.0, 0.0)]);
        let params = DiscParams::default();
        let map = solve_disc(&s, &[0.0, 0.0], &v, &params).unwrap();
        let push = |zeta: Complex64| {
            let z = map.eval(zeta)[0];
            z + Complex64::new(z.norm_sqr(), 0.0)
        };
        let h = params.r * 1e-2;
        let mut worst = 0.0f64;
        for zeta in [Complex64::new(0.03, 0.02), Complex64::new(-0.04, 0.05)] {
            let dx = (push(zeta + h) - push(zeta - h)) / (2.0 * h);
            let dy =
                (push(zeta + Complex64::i() * h) - push(zeta - Complex64::i() * h)) / (2.0 * h);
            let dbar = (dx + Complex64::i() * dy) / 2.0;
            worst = worst.max(dbar.norm());
        }
        assert!(worst <= 10.0 * params.tol, "transport residual {worst}");
    }

    #[test]
    fn scaled_structure_iterations_non_increasing() {
        let s = remark1_structure();
        let v = DVector::from_vec(vec![Complex64::new(1.0, 0.0)]);
        let params = DiscParams::default();
        let mut last = usize::MAX;
        for lambda in [1.0, 0.6, 0.35, 0.2] {
            let scaled = match &s {
                AlmostComplexStructure::ComplexMatrixField(a) => {
                    AlmostComplexStructure::ComplexMatrixField(a.scaled(lambda))
                }
                _ => unreachable!(),
            };
            let map = solve_disc(&scaled, &[0.0, 0.0], &v, &params).unwrap();
            assert!(map.iterations <= last, "lambda {lambda}: {}", map.iterations);
            last = map.iterations;
        }
    }

    #[test]
    fn hessian_via_disc_standard_cases() {
        let s = AlmostComplexStructure::standard(1);
        let v = DVector::from_vec(vec![Complex64::new(1.0, 0.0)]);
        let params = DiscParams::default();
        let norm_sq = ScalarField::parse("x1^2 + x2^2", 1).unwrap();
        let h = hessian_via_disc(&s, &norm_sq, &[0.0, 0.0], &v, &params).unwrap();
        assert_relative_eq!(h, 4.0, max_relative = 1e-10);
        let re_z = ScalarField::parse("x1", 1).unwrap();
        let h0 = hessian_via_disc(&s, &re_z, &[0.0, 0.0], &v, &params).unwrap();
        assert!(h0.abs() < 1e-10);
    }

    #[test]
    fn hessian_via_disc_remark1_vanishes() {
        let s = remark1_structure();
        let u = ScalarField::parse("x1 + x1^2 + x2^2", 1).unwrap();
        let v = DVector::from_vec(vec![Complex64::new(1.0, 0.0)]);
        let h = hessian_via_disc(&s, &u, &[0.0, 0.0], &v, &DiscParams::default()).unwrap();
        assert!(h.abs() < 1e-3, "got {h}");
    }

    #[test]
    fn subharmonic_mean_value() {
        let s = remark1_structure();
        let u = ScalarField::parse("x1^2 + x2^2", 1).unwrap();
        let v = DVector::from_vec(vec![Complex64::new(1.0, 0.0)]);
        let map = solve_disc(&s, &[0.0, 0.0], &v, &DiscParams::default()).unwrap();
        let margin = subharmonicity_margin(&map, &u).unwrap();
        assert!(margin >= -1e-6, "margin {margin}");
    }

    #[test]
    fn refinement_reduces_cr_residual() {
        let s = remark1_structure();
        let v = DVector::from_vec(vec![Complex64::new(1.0, 0.0)]);
        let coarse = DiscParams {
            n_r: 8,
            n_phi: 16,
            ..DiscParams::default()
        };
        let fine = DiscParams {
            n_r: 16,
            n_phi: 32,
            ..DiscParams::default()
        };
        let rc = solve_disc(&s, &[0.0, 0.0], &v, &coarse)
            .unwrap()
            .cr_residual(&s)
            .unwrap();
        let rf = solve_disc(&s, &[0.0, 0.0], &v, &fine)
            .unwrap()
            .cr_residual(&s)
            .unwrap();
        assert!(rf <= rc / 2.0, "coarse {rc:.3e}, fine {rf:.3e}");
    }

    #[test]
    fn domain_escape_is_reported() {
        let s = remark1_structure();
        let v = DVector::from_vec(vec![Complex64::new(1.0, 0.0)]);
        let params = DiscParams {
            chart_radius: 0.01,
            ..DiscParams::default()
        };
        match solve_disc(&s, &[0.0, 0.0], &v, &params) {
            Err(Error::DomainEscape(_)) => {}
            Err(other) => panic!("expected DomainEscape, got {other:?}"),
            Ok(_) => panic!("expected DomainEscape, got a converged disc"),
        }
    }

    #[test]
    fn csv_dump_has_expected_shape() {
        let s = AlmostComplexStructure::standard(1);
        let v = DVector::from_vec(vec![Complex64::new(1.0, 0.0)]);
        let params = DiscParams {
            n_r: 4,
            n_phi: 8,
            ..DiscParams::default()
        };
        let map = solve_disc(&s, &[0.0, 0.0], &v, &params).unwrap();
        let csv = map.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "xi,eta,re_f1,im_f1");
        assert_eq!(lines.count(), 32);
    }
}
