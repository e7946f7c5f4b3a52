//! Search for solutions `γ = dW` of the relatedness conditions among
//! polynomial `W`, solved by Gauss-Newton on a collocation grid.

use super::{critical_samples, gamma_relatedness_residual, OneForm};
use crate::error::{Error, Result};
use crate::expr::{derivative, normalize_constraint, simplify, substitute, Expression, TapeSet};
use crate::linalg::{self, Mat};
use crate::morse::{Base, MorseFamily};
use crate::report::{Section, ToSection, Value};
use crate::sampling::{halton_cloud, sample_zero_set, SampleBox, DEFAULT_SEED};
use nalgebra::DVector;
use std::collections::HashMap;

#[derive(Clone, Debug)]
pub struct SearchOptions {
    /// Polynomial degree of the components of γ.
    pub degree: usize,
    pub collocation: usize,
    pub bbox: SampleBox,
    pub seed: u64,
    pub tol: f64,
    pub max_iter: usize,
    /// Degree of the polynomials fitted to leftover residuals when
    /// looking for a feasibility locus.
    pub locus_degree: usize,
    pub max_loci: usize,
    pub verify_samples: usize,
    pub verify_tol: f64,
}

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions {
            degree: 0,
            collocation: 24,
            bbox: SampleBox::default(),
            seed: DEFAULT_SEED,
            tol: 1e-9,
            max_iter: 80,
            locus_degree: 4,
            max_loci: 6,
            verify_samples: 16,
            verify_tol: 1e-8,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Candidate {
    /// A particular member of the family.
    pub gamma: OneForm,
    /// Components with the free parameters left symbolic.
    pub family: Vec<Expression>,
    pub parameters: Vec<String>,
    /// Dimension of the solution set near `gamma`, to first order.
    pub tangent_dim: usize,
    /// Base constraint on which the conditions hold, if not global.
    pub locus: Option<Expression>,
    pub residual: f64,
    /// γ-relatedness residual of `gamma` on fresh samples.
    pub verified_residual: f64,
    pub verified: bool,
}

#[derive(Clone, Debug, Default)]
pub struct SearchResult {
    pub candidates: Vec<Candidate>,
    pub best_residual: f64,
    pub loci_tried: Vec<String>,
    pub coefficients: usize,
}

impl ToSection for Candidate {
    fn to_section(&self) -> Section {
        Section::new()
            .with("gamma", self.gamma.component_strings())
            .with("family", self.family.iter().map(|e| e.to_string()).collect::<Vec<_>>())
            .with("parameters", self.parameters.clone())
            .with("tangent-dim", self.tangent_dim)
            .with("locus", self.locus.as_ref().map(|l| l.to_string()))
            .with("residual", self.residual)
            .with("verified-residual", self.verified_residual)
            .with("verified", self.verified)
    }
}

impl ToSection for SearchResult {
    fn to_section(&self) -> Section {
        let cands: Vec<Value> = self.candidates.iter().map(|c| c.to_section().into()).collect();
        Section::new()
            .with("coefficients", self.coefficients)
            .with("best-residual", self.best_residual)
            .with("loci-tried", self.loci_tried.clone())
            .with("candidates", Value::List(cands))
    }
}

/// Exponent vectors of total degree in `lo..=hi`, graded then lexicographic.
pub(super) fn monomials(n: usize, lo: usize, hi: usize) -> Vec<Vec<u32>> {
    fn rec(n: usize, left: u32, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if cur.len() == n - 1 {
            cur.push(left);
            out.push(cur.clone());
            cur.pop();
            return;
        }
        for e in (0..=left).rev() {
            cur.push(e);
            rec(n, left - e, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    for d in lo..=hi {
        rec(n, d as u32, &mut Vec::new(), &mut out);
    }
    out
}

fn monomial_expr(q: &[String], exps: &[u32]) -> Expression {
    let mut e = Expression::num(1.0);
    for (v, &k) in q.iter().zip(exps) {
        if k > 0 {
            e = e * Expression::var(v).powi(k as i32);
        }
    }
    e
}

fn poly_expr(q: &[String], monos: &[Vec<u32>], coeffs: &[f64]) -> Expression {
    let terms = monos
        .iter()
        .zip(coeffs)
        .filter(|(_, c)| **c != 0.0)
        .map(|(m, &c)| Expression::num(c) * monomial_expr(q, m));
    simplify(&Expression::sum(terms))
}

/// Round values that are within rounding noise of a small rational.
fn snap(x: f64) -> f64 {
    if x.abs() < 1e-10 {
        return 0.0;
    }
    for d in 1..=12 {
        let y = x * d as f64;
        if (y - y.round()).abs() < 1e-8 * d as f64 {
            return y.round() / d as f64;
        }
    }
    x
}

struct Ansatz {
    q: Vec<String>,
    monos: Vec<Vec<u32>>,
    n: usize,
    m: usize,
    k: usize,
    /// Critical equations then tangency residuals, over `q ++ coeffs ++ λ`.
    system: TapeSet,
    crit: TapeSet,
}

impl Ansatz {
    fn new(mf: &MorseFamily, degree: usize) -> Result<Ansatz> {
        let space = mf.space();
        let n = space.n();
        let q = space.q();
        let monos = monomials(n, 1, degree + 1);
        let coeff_names: Vec<String> = (1..=monos.len()).map(|i| format!("__w{i}")).collect();
        let w = Expression::sum(
            monos
                .iter()
                .zip(&coeff_names)
                .map(|(m, c)| Expression::var(c) * monomial_expr(&q, m)),
        );
        let gamma: Vec<Expression> = q.iter().map(|v| simplify(&derivative(&w, v))).collect();
        let sub: HashMap<String, Expression> = space.p().into_iter().zip(gamma.iter().cloned()).collect();
        let f = mf.function();
        let fp: Vec<Expression> = space.p().iter().map(|v| substitute(&derivative(f, v), &sub)).collect();
        let mut rows: Vec<Expression> = mf
            .fibers()
            .iter()
            .map(|l| substitute(&derivative(f, l), &sub))
            .collect();
        let crit_rows = rows.clone();
        for qi in &q {
            let fq = substitute(&derivative(f, qi), &sub);
            let terms = gamma.iter().zip(&fp).map(|(gj, fpj)| derivative(gj, qi) * fpj.clone());
            rows.push(Expression::sum(terms.chain(std::iter::once(fq))));
        }
        let vars: Vec<String> = [q.clone(), coeff_names, mf.fibers().to_vec()].concat();
        Ok(Ansatz {
            n,
            m: monos.len(),
            k: mf.k(),
            q,
            monos,
            system: TapeSet::compile(&rows, &vars)?,
            crit: TapeSet::compile(&crit_rows, &vars)?,
        })
    }

    fn rows(&self) -> usize {
        self.k + self.n
    }

    /// Stacked residuals and, when requested, the Jacobian with respect to
    /// the coefficients (unless `fixed`) and all fiber values.
    fn assemble(&self, qs: &[Vec<f64>], z: &[f64], fixed: bool, jac: bool) -> Option<(DVector<f64>, Mat)> {
        let (m, k, r) = (self.m, self.k, self.rows());
        let off = if fixed { 0 } else { m };
        let cols = off + qs.len() * k;
        let mut res = DVector::zeros(qs.len() * r);
        let mut j = if jac { Mat::zeros(qs.len() * r, cols) } else { Mat::zeros(0, 0) };
        let coeffs = &z[..m];
        for (s, q) in qs.iter().enumerate() {
            let lam = &z[m + s * k..m + (s + 1) * k];
            let x = [q.as_slice(), coeffs, lam].concat();
            let vals = self.system.eval(&x).ok()?;
            for (e, v) in vals.iter().enumerate() {
                if !v.is_finite() {
                    return None;
                }
                res[s * r + e] = *v;
            }
            if jac {
                let g = self.system.jacobian(&x).ok()?;
                for e in 0..r {
                    if !fixed {
                        for c in 0..m {
                            j[(s * r + e, c)] = g[e][self.n + c];
                        }
                    }
                    for a in 0..k {
                        j[(s * r + e, off + s * k + a)] = g[e][self.n + m + a];
                    }
                }
            }
        }
        Some((res, j))
    }

    /// Gauss-Newton with step halving. With `fixed`, only the fiber values
    /// move. Returns the final point and its max-abs residual.
    fn solve(&self, qs: &[Vec<f64>], mut z: Vec<f64>, fixed: bool, opts: &SearchOptions) -> (Vec<f64>, f64) {
        let m = self.m;
        let off = if fixed { m } else { 0 };
        let Some((mut r, _)) = self.assemble(qs, &z, fixed, false) else {
            return (z, f64::INFINITY);
        };
        for _ in 0..opts.max_iter {
            if r.amax() < opts.tol * 1e-3 {
                break;
            }
            let Some((_, j)) = self.assemble(qs, &z, fixed, true) else { break };
            let (dx, _) = linalg::lstsq(&j, &(-&r), 1e-12);
            let norm0 = r.norm();
            let mut t = 1.0;
            let mut improved = false;
            for _ in 0..30 {
                let mut trial = z.clone();
                for (i, d) in dx.iter().enumerate() {
                    trial[off + i] += t * d;
                }
                if let Some((rt, _)) = self.assemble(qs, &trial, fixed, false) {
                    if rt.norm() < norm0 {
                        z = trial;
                        r = rt;
                        improved = true;
                        break;
                    }
                }
                t *= 0.5;
            }
            if !improved {
                break;
            }
        }
        let worst = r.amax();
        (z, worst)
    }

    fn coeff_expr(&self, coeffs: &[f64]) -> Expression {
        poly_expr(&self.q, &self.monos, coeffs)
    }

    fn gamma(&self, space: crate::geometry::PhaseSpace, coeffs: &[f64]) -> Result<OneForm> {
        OneForm::exact(space, &self.coeff_expr(coeffs))
    }

    /// Residual components at each sample with the coefficients fixed and
    /// `λ` chosen to satisfy the critical equations as well as possible.
    fn leftover(&self, qs: &[Vec<f64>], coeffs: &[f64], opts: &SearchOptions) -> Vec<Vec<f64>> {
        let mut out = Vec::with_capacity(qs.len());
        for q in qs {
            let mut lam = vec![0.0; self.k];
            for _ in 0..opts.max_iter {
                let x = [q.as_slice(), coeffs, &lam].concat();
                let (Ok(c), Ok(j)) = (self.crit.eval(&x), self.crit.jacobian(&x)) else { break };
                let rv = DVector::from_vec(c);
                if rv.amax() < 1e-14 {
                    break;
                }
                let jm = Mat::from_fn(self.k, self.k, |a, b| j[a][self.n + self.m + b]);
                let (dx, _) = linalg::lstsq(&jm, &(-&rv), 1e-12);
                if dx.amax() < 1e-15 {
                    break;
                }
                for (l, d) in lam.iter_mut().zip(dx.iter()) {
                    *l += d;
                }
            }
            let x = [q.as_slice(), coeffs, &lam].concat();
            out.push(self.system.eval(&x).unwrap_or_else(|_| vec![f64::NAN; self.rows()]));
        }
        out
    }
}

/// Least-squares polynomial fit of sampled values, or `None` when no
/// polynomial of the given degree matches them.
pub(super) fn fit_polynomial(q: &[String], qs: &[Vec<f64>], vals: &[f64], degree: usize) -> Option<Expression> {
    let monos = monomials(q.len(), 0, degree);
    if qs.len() < monos.len() + 4 || vals.iter().any(|v| !v.is_finite()) {
        return None;
    }
    let a = Mat::from_fn(qs.len(), monos.len(), |s, c| {
        monos[c].iter().zip(&qs[s]).map(|(&e, x)| x.powi(e as i32)).product()
    });
    let b = DVector::from_column_slice(vals);
    let (c, _) = linalg::lstsq(&a, &b, 1e-12);
    let fit = &a * &c - &b;
    let scale = 1.0 + b.amax();
    if fit.amax() > 1e-8 * scale {
        return None;
    }
    let coeffs: Vec<f64> = c.iter().map(|&v| snap(v / scale) * scale).map(snap).collect();
    Some(poly_expr(q, &monos, &coeffs))
}

/// Reduced row echelon form of the rows of `b` (tolerance `tol`).
fn rref(mut b: Mat, tol: f64) -> Mat {
    let (rows, cols) = b.shape();
    let mut r = 0;
    for c in 0..cols {
        if r == rows {
            break;
        }
        let (piv, val) = (r..rows)
            .map(|i| (i, b[(i, c)].abs()))
            .fold((r, 0.0), |a, x| if x.1 > a.1 { x } else { a });
        if val < tol {
            continue;
        }
        b.swap_rows(r, piv);
        let p = b[(r, c)];
        for j in 0..cols {
            b[(r, j)] /= p;
        }
        for i in 0..rows {
            if i != r {
                let f = b[(i, c)];
                for j in 0..cols {
                    b[(i, j)] -= f * b[(r, j)];
                }
            }
        }
        r += 1;
    }
    b.rows(0, r).into_owned()
}

struct Solved {
    coeffs: Vec<f64>,
    residual: f64,
    directions: Vec<Vec<f64>>,
    tangent_dim: usize,
}

fn analyse(ans: &Ansatz, qs: &[Vec<f64>], z: &[f64], residual: f64, opts: &SearchOptions) -> Solved {
    let m = ans.m;
    let coeffs = z[..m].to_vec();
    let mut out = Solved {
        coeffs: coeffs.clone(),
        residual,
        directions: Vec::new(),
        tangent_dim: 0,
    };
    let Some((_, j)) = ans.assemble(qs, z, false, true) else { return out };
    let ns = linalg::nullspace_rel(&j, 1e-8);
    if ns.ncols() == 0 {
        return out;
    }
    let proj = ns.rows(0, m).into_owned();
    let svd = proj.clone().svd(true, false);
    let u = svd.u.expect("requested");
    let basis: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&i| svd.singular_values[i] > 1e-6)
        .collect();
    out.tangent_dim = basis.len();
    if basis.is_empty() {
        return out;
    }
    let b = Mat::from_fn(basis.len(), m, |r, c| u[(c, basis[r])]);
    let dirs = rref(b, 1e-9);
    let dirs: Vec<Vec<f64>> = (0..dirs.nrows())
        .map(|r| dirs.row(r).iter().map(|&v| snap(v)).collect())
        .collect();

    let lam0 = z[m..].to_vec();
    let passes = |c: &[f64]| -> bool {
        let zt = [c, lam0.as_slice()].concat();
        ans.solve(qs, zt, true, opts).1 < opts.tol
    };
    let shifted = |base: &[f64], ts: &[(usize, f64)]| -> Vec<f64> {
        let mut c = base.to_vec();
        for &(d, t) in ts {
            for (ci, v) in c.iter_mut().zip(&dirs[d]) {
                *ci += t * v;
            }
        }
        c
    };
    let mut linear: Vec<usize> = (0..dirs.len())
        .filter(|&d| passes(&shifted(&coeffs, &[(d, 0.7)])) && passes(&shifted(&coeffs, &[(d, -1.3)])))
        .collect();
    if linear.len() > 1 {
        let combo: Vec<(usize, f64)> = linear.iter().enumerate().map(|(i, &d)| (d, 0.6 - 0.45 * i as f64)).collect();
        if !passes(&shifted(&coeffs, &combo)) {
            linear.clear();
        }
    }
    out.directions = linear.iter().map(|&d| dirs[d].clone()).collect();

    // Move the base point to the member orthogonal to the free directions.
    if !out.directions.is_empty() {
        let v = Mat::from_fn(m, out.directions.len(), |r, c| out.directions[c][r]);
        let (t, _) = linalg::lstsq(&v, &DVector::from_column_slice(&coeffs), 1e-12);
        let base: Vec<f64> = (&DVector::from_column_slice(&coeffs) - &v * t).iter().map(|&x| snap(x)).collect();
        if passes(&base) {
            out.coeffs = base;
        }
    } else {
        let snapped: Vec<f64> = coeffs.iter().map(|&x| snap(x)).collect();
        if passes(&snapped) {
            out.coeffs = snapped;
        }
    }
    out
}

fn candidate(
    mf: &MorseFamily,
    ans: &Ansatz,
    sol: Solved,
    locus: Option<Expression>,
    verify: &[Vec<f64>],
    opts: &SearchOptions,
) -> Result<Candidate> {
    let space = mf.space();
    let gamma = ans.gamma(space, &sol.coeffs)?;
    let parameters: Vec<String> = (1..=sol.directions.len()).map(|i| format!("c{i}")).collect();
    let w = Expression::sum(
        std::iter::once(ans.coeff_expr(&sol.coeffs)).chain(
            sol.directions
                .iter()
                .zip(&parameters)
                .map(|(d, c)| Expression::var(c) * ans.coeff_expr(d)),
        ),
    );
    let family: Vec<Expression> = space.q().iter().map(|v| simplify(&derivative(&w, v))).collect();

    let crit = critical_samples(mf, &gamma, verify, opts.bbox)?;
    let d = gamma_relatedness_residual(mf, &gamma, &crit.points, opts.verify_tol)?;
    Ok(Candidate {
        gamma,
        family,
        parameters,
        tangent_dim: sol.tangent_dim,
        locus,
        residual: sol.residual,
        verified_residual: d.max_residual,
        verified: d.passed && crit.infeasible.is_empty(),
    })
}

pub(super) fn locus_points(g: &Expression, q: &[String], count: usize, bbox: SampleBox, seed: u64) -> Result<Vec<Vec<f64>>> {
    let set = TapeSet::compile(std::slice::from_ref(g), q)?;
    Ok(sample_zero_set(&set, count, bbox, seed, 1e-12))
}

/// Look for `γ = dW`, `W` polynomial, satisfying the γ-relatedness
/// conditions of `mf` on a collocation grid. When none exists globally,
/// loci suggested by the leftover residuals are tried one at a time.
pub fn search_oneform(mf: &MorseFamily, opts: &SearchOptions) -> Result<SearchResult> {
    if mf.base() != Base::Cotangent {
        return Err(Error::Unsupported("the dynamics family must live over T*Q".into()));
    }
    if opts.degree > 2 {
        return Err(Error::Invalid(format!("search degree {} is above 2", opts.degree)));
    }
    let ans = Ansatz::new(mf, opts.degree)?;
    let n = ans.n;
    let qs = halton_cloud(n, opts.collocation, opts.bbox, opts.seed);
    let z0 = vec![0.0; ans.m + qs.len() * ans.k];
    let (z, worst) = ans.solve(&qs, z0, false, opts);
    let mut result = SearchResult {
        best_residual: worst,
        coefficients: ans.m,
        ..SearchResult::default()
    };
    if worst < opts.tol {
        let fresh = halton_cloud(n, opts.verify_samples, opts.bbox, opts.seed.wrapping_add(1));
        let sol = analyse(&ans, &qs, &z, worst, opts);
        result.candidates.push(candidate(mf, &ans, sol, None, &fresh, opts)?);
        return Ok(result);
    }

    let fit_count = (2 * monomials(n, 0, opts.locus_degree).len()).max(opts.collocation);
    let fit_qs = halton_cloud(n, fit_count, opts.bbox, opts.seed.wrapping_add(2));
    let left = ans.leftover(&fit_qs, &z[..ans.m], opts);
    let mut loci: Vec<Expression> = Vec::new();
    for e in 0..ans.rows() {
        let vals: Vec<f64> = left.iter().map(|r| r[e]).collect();
        if vals.iter().all(|v| v.abs() < opts.tol) {
            continue;
        }
        if let Some(p) = fit_polynomial(&ans.q, &fit_qs, &vals, opts.locus_degree) {
            let g = normalize_constraint(&p);
            if g.as_constant().is_none() && !loci.iter().any(|l| l.to_string() == g.to_string()) {
                loci.push(g);
            }
        }
    }
    loci.sort_by_key(|g| (g.free_vars().len(), g.to_string().len()));
    loci.truncate(opts.max_loci);

    for (i, g) in loci.iter().enumerate() {
        result.loci_tried.push(g.to_string());
        let seed = opts.seed.wrapping_add(10 + 2 * i as u64);
        let pts = locus_points(g, &ans.q, opts.collocation, opts.bbox, seed)?;
        if pts.len() < opts.collocation / 2 {
            continue;
        }
        let z0 = vec![0.0; ans.m + pts.len() * ans.k];
        let (z, worst) = ans.solve(&pts, z0, false, opts);
        result.best_residual = result.best_residual.min(worst);
        if worst < opts.tol {
            let fresh = locus_points(g, &ans.q, opts.verify_samples, opts.bbox, seed + 1)?;
            let sol = analyse(&ans, &pts, &z, worst, opts);
            result.candidates.push(candidate(mf, &ans, sol, Some(g.clone()), &fresh, opts)?);
        }
    }
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;
    use crate::geometry::{indexed_names, PhaseSpace};

    fn strs(v: &[Expression]) -> Vec<String> {
        v.iter().map(|e| e.to_string()).collect()
    }

    #[test]
    fn monomial_enumeration() {
        assert_eq!(monomials(2, 1, 2), [vec![1, 0], vec![0, 1], vec![2, 0], vec![1, 1], vec![0, 2]]);
        assert_eq!(monomials(3, 0, 4).len(), 35);
    }

    #[test]
    fn snapping() {
        assert_eq!(snap(0.5000000000001), 0.5);
        assert_eq!(snap(-1.0 / 3.0 + 1e-12), -1.0 / 3.0);
        assert_eq!(snap(1e-13), 0.0);
        assert_eq!(snap(0.123456789), 0.123456789);
    }

    #[test]
    fn polynomial_fit_recovers_exact_data() {
        let q = indexed_names("q", 2);
        let qs = halton_cloud(2, 40, SampleBox::default(), 3);
        let vals: Vec<f64> = qs.iter().map(|x| -2.0 * x[0] * x[1] + 0.5).collect();
        let p = fit_polynomial(&q, &qs, &vals, 3).unwrap();
        assert_eq!(p.to_string(), "-2*q1*q2 + 0.5");
        let vals: Vec<f64> = qs.iter().map(|x| x[0].sin()).collect();
        assert!(fit_polynomial(&q, &qs, &vals, 2).is_none());
    }

    #[test]
    fn example1_degree0_family() {
        let mf = MorseFamily::new(
            PhaseSpace::new(3),
            indexed_names("qd", 3),
            parse("p1*qd1 + p2*qd2 + p3*qd3 - 1/2*(qd1 + qd2)^2").unwrap(),
        )
        .unwrap();
        let res = search_oneform(&mf, &SearchOptions::default()).unwrap();
        assert_eq!(res.candidates.len(), 1);
        let c = &res.candidates[0];
        assert!(c.locus.is_none());
        assert_eq!(strs(&c.family), ["c1", "c1", "0"]);
        assert_eq!(c.tangent_dim, 1);
        assert!(c.residual < 1e-10 && c.verified);
    }

    #[test]
    fn example2_degree1_finds_locus() {
        let mf = MorseFamily::new(
            PhaseSpace::new(2),
            indexed_names("qd", 2),
            parse("p1*qd1 + p2*qd2 - (1/2*qd1^2 + q2*q1^2)").unwrap(),
        )
        .unwrap();
        let res = search_oneform(&mf, &SearchOptions { degree: 1, ..SearchOptions::default() }).unwrap();
        assert!(!res.candidates.is_empty(), "{res:?}");
        let c = &res.candidates[0];
        assert_eq!(c.locus.as_ref().unwrap().to_string(), "q1");
        assert!(c.verified);
        assert_eq!(c.gamma.component_strings()[1], "0");
    }

    #[test]
    fn oscillator_degree0_only_locus() {
        let mf = MorseFamily::hamiltonian(PhaseSpace::new(1), parse("1/2*(p1^2 + q1^2)").unwrap()).unwrap();
        let res = search_oneform(&mf, &SearchOptions::default()).unwrap();
        assert_eq!(res.candidates.len(), 1);
        let c = &res.candidates[0];
        assert_eq!(c.locus.as_ref().unwrap().to_string(), "q1");
        assert_eq!(c.gamma.component_strings(), ["0"]);
    }
}
