//! Possibly degenerate Lagrangians `L(q, qd)`: Legendre map, energy,
//! Pontryagin family, Lagrangian HJ residuals and the Gotay-Nester
//! constraint algorithm.

use crate::affine::{eliminate, split_affine};
use crate::error::{Error, Result};
use crate::expr::{derivative, normalize_constraint, simplify, substitute, Expression, Tape, TapeSet};
use crate::geometry::{canonical_bracket_expr, PhaseSpace};
use crate::hj::OneForm;
use crate::linalg::{self, Mat};
use crate::morse::MorseFamily;
use crate::report::{Diagnostics, Section, ToSection, Value};
use crate::sampling::{halton_cloud, sample_zero_set, SampleBox, DEFAULT_SEED};
use std::collections::HashMap;

#[derive(Clone, Debug)]
pub struct LagrangianSystem {
    space: PhaseSpace,
    l: Expression,
}

impl LagrangianSystem {
    pub fn new(space: PhaseSpace, l: Expression) -> Result<Self> {
        let vars = space.tangent();
        if let Some(v) = l.free_vars().iter().find(|v| !vars.contains(v)) {
            return Err(Error::UnexpectedVariable(v.clone()));
        }
        Ok(LagrangianSystem { space, l })
    }

    pub fn space(&self) -> PhaseSpace {
        self.space
    }

    pub fn lagrangian(&self) -> &Expression {
        &self.l
    }

    /// `∂L/∂qd_i`.
    pub fn momenta(&self) -> Vec<Expression> {
        self.space.qd().iter().map(|v| simplify(&derivative(&self.l, v))).collect()
    }

    /// `W_ij = ∂²L/∂qd_i∂qd_j`.
    pub fn hessian(&self) -> Vec<Vec<Expression>> {
        let qd = self.space.qd();
        self.momenta()
            .iter()
            .map(|m| qd.iter().map(|v| simplify(&derivative(m, v))).collect())
            .collect()
    }

    /// Constraints of `{(q, ∂L/∂qd; qd, ∂L/∂q)}` over TT*Q.
    pub fn euler_lagrange_constraints(&self) -> Vec<Expression> {
        let s = self.space;
        let mut out: Vec<Expression> = s
            .p()
            .iter()
            .zip(self.momenta())
            .map(|(p, m)| simplify(&(Expression::var(p) - m)))
            .collect();
        for (pd, q) in s.pd().iter().zip(s.q()) {
            out.push(simplify(&(Expression::var(pd) - derivative(&self.l, &q))));
        }
        out
    }
}

#[derive(Clone, Debug)]
pub struct HessianAnalysis {
    pub ranks: Vec<usize>,
    pub regular: bool,
}

/// Numerical rank of the velocity Hessian at each `(q, qd)` sample.
pub fn hessian_analysis(ls: &LagrangianSystem, samples: &[Vec<f64>], tol_rank: f64) -> Result<HessianAnalysis> {
    let n = ls.space.n();
    let vars = ls.space.tangent();
    let tape = Tape::compile(&ls.l, &vars)?;
    let active: Vec<usize> = (n..2 * n).collect();
    let mut ranks = Vec::with_capacity(samples.len());
    for x in samples {
        let jet = tape.jet2(x, &active)?;
        let h = Mat::from_fn(n, n, |i, j| jet.hess(i, j));
        ranks.push(linalg::numerical_rank(&h, tol_rank));
    }
    let regular = ranks.iter().all(|&r| r == n);
    Ok(HessianAnalysis { ranks, regular })
}

/// `(q, qd) ↦ (q, ∂L/∂qd)`.
pub fn legendre_map(ls: &LagrangianSystem, x: &[f64]) -> Result<Vec<f64>> {
    let n = ls.space.n();
    let tape = Tape::compile(&ls.l, &ls.space.tangent())?;
    let g = tape.gradient(x)?;
    Ok([&x[..n], &g[n..]].concat())
}

/// `E_L = qd·∂L/∂qd − L`.
pub fn energy(ls: &LagrangianSystem) -> Expression {
    let terms = ls
        .space
        .qd()
        .into_iter()
        .zip(ls.momenta())
        .map(|(v, m)| Expression::var(&v) * m);
    simplify(&(Expression::sum(terms) - ls.l.clone()))
}

/// `F(q, p, qd) = p·qd − L(q, qd)` with fiber `qd`.
pub fn pontryagin_family(ls: &LagrangianSystem) -> Result<MorseFamily> {
    let s = ls.space;
    let pq = Expression::sum(s.p().iter().zip(s.qd()).map(|(p, v)| Expression::var(p) * Expression::var(&v)));
    MorseFamily::new(s, s.qd(), simplify(&(pq - ls.l.clone())))
}

/// Residuals of the Lagrangian HJ equation at `(q, qd)` samples:
/// `qd^i ∂γ_i/∂q^j − ∂L/∂q^j` and `γ_i − ∂L/∂qd^i`.
pub fn lagrangian_hj_residual(ls: &LagrangianSystem, g: &OneForm, samples: &[Vec<f64>], tol: f64) -> Result<Diagnostics> {
    let n = ls.space.n();
    let vars = ls.space.tangent();
    let tape = Tape::compile(&ls.l, &vars)?;
    let mut d = Diagnostics::new("lagrangian-hj", tol, vars);
    let (mut b1, mut b2) = (0.0f64, 0.0f64);
    for x in samples {
        let (q, qd) = x.split_at(n);
        let gl = tape.gradient(x)?;
        let gam = g.eval(q)?;
        let jg = g.jacobian(q)?;
        let r1 = (0..n)
            .map(|j| ((0..n).map(|i| qd[i] * jg[i][j]).sum::<f64>() - gl[j]).abs())
            .fold(0.0f64, f64::max);
        let r2 = (0..n).map(|i| (gam[i] - gl[n + i]).abs()).fold(0.0f64, f64::max);
        b1 = b1.max(r1);
        b2 = b2.max(r2);
        d.observe(r1.max(r2), x);
    }
    d.passed = d.samples > 0 && d.max_residual < tol;
    d.details = Section::new().with("max-dynamics-block", b1).with("max-momentum-block", b2);
    Ok(d)
}

/// One level `M_l` of the constraint algorithm.
#[derive(Clone, Debug)]
pub struct PresymplecticLevel {
    pub level: usize,
    pub constraints: Vec<Expression>,
    /// Constraints first appearing at this level.
    pub added: Vec<Expression>,
    pub samples: usize,
    pub dim: Option<usize>,
    pub stratified: bool,
}

#[derive(Clone, Debug)]
pub struct GotayNesterOptions {
    pub max_iter: usize,
    pub samples: usize,
    pub bbox: SampleBox,
    pub seed: u64,
    pub tol: f64,
    pub tol_rank: f64,
}

impl Default for GotayNesterOptions {
    fn default() -> Self {
        GotayNesterOptions {
            max_iter: 10,
            samples: 100,
            bbox: SampleBox::default(),
            seed: DEFAULT_SEED,
            tol: 1e-9,
            tol_rank: 1e-8,
        }
    }
}

#[derive(Clone, Debug)]
pub struct GotayNesterResult {
    pub levels: Vec<PresymplecticLevel>,
    pub primary: Vec<Expression>,
    pub secondary: Vec<Expression>,
    /// Energy projected to `M_1`.
    pub h1: Option<Expression>,
    /// Largest variation of `E_L` along sampled Legendre fibers.
    pub energy_fiber_spread: f64,
    pub stabilized: bool,
    /// No symbolic constraints: `∂L/∂qd` is not affine in `qd`.
    pub pointwise: bool,
    pub hessian_ranks: Vec<usize>,
    pub notes: Vec<String>,
}

impl GotayNesterResult {
    pub fn final_constraints(&self) -> &[Expression] {
        self.levels.last().map_or(&[], |l| &l.constraints)
    }
}

fn strings(v: &[Expression]) -> Vec<String> {
    v.iter().map(|e| e.to_string()).collect()
}

impl ToSection for GotayNesterResult {
    fn to_section(&self) -> Section {
        let levels: Vec<Value> = self
            .levels
            .iter()
            .map(|l| {
                Section::new()
                    .with("level", l.level)
                    .with("constraints", strings(&l.constraints))
                    .with("added", strings(&l.added))
                    .with("dim", l.dim)
                    .with("samples", l.samples)
                    .with("stratified", l.stratified)
                    .into()
            })
            .collect();
        let mut s = Section::new()
            .with("mode", if self.pointwise { "pointwise" } else { "exact" })
            .with("stabilized", self.stabilized)
            .with("primary", strings(&self.primary))
            .with("secondary", strings(&self.secondary))
            .with("final", strings(self.final_constraints()))
            .with("h1", self.h1.as_ref().map(|h| h.to_string()))
            .with("energy-fiber-spread", self.energy_fiber_spread)
            .with("levels", Value::List(levels));
        if !self.notes.is_empty() {
            s.push("notes", self.notes.clone());
        }
        s
    }
}

fn sample_level(cons: &[Expression], vars: &[String], opts: &GotayNesterOptions, level: usize) -> Result<Vec<Vec<f64>>> {
    let seed = opts.seed.wrapping_add(level as u64);
    if cons.is_empty() {
        return Ok(halton_cloud(vars.len(), opts.samples, opts.bbox, seed));
    }
    let set = TapeSet::compile(cons, vars)?;
    Ok(sample_zero_set(&set, opts.samples, opts.bbox, seed, 1e-12))
}

fn level_dim(cons: &[Expression], vars: &[String], x: &[f64], tol_rank: f64) -> Option<usize> {
    if cons.is_empty() {
        return Some(vars.len());
    }
    let set = TapeSet::compile(cons, vars).ok()?;
    let j = set.jacobian(x).ok()?;
    Some(vars.len() - linalg::numerical_rank(&linalg::from_rows(&j, vars.len()), tol_rank))
}

fn push_unique(out: &mut Vec<Expression>, e: Expression) -> bool {
    if e.is_zero() || out.iter().any(|o| o.to_string() == e.to_string()) {
        return false;
    }
    out.push(e);
    true
}

/// Gotay-Nester algorithm on `M_1 = FL(TQ) ⊂ T*Q`.
///
/// Primary constraints come from eliminating `qd` in `p = ∂L/∂qd`. The
/// dynamics `i_X ω_1 = dh_1` is solvable on `M_l` iff some multipliers `u`
/// make `{ψ, h} + u_a {ψ, φ_a}` vanish for every constraint `ψ` of `M_l`;
/// eliminating `u` leaves the conditions defining `M_{l+1}`.
pub fn gotay_nester(ls: &LagrangianSystem, opts: &GotayNesterOptions) -> Result<GotayNesterResult> {
    let s = ls.space;
    let n = s.n();
    let qd = s.qd();
    let cot = s.cotangent();
    let probe = halton_cloud(2 * n, 16, opts.bbox, opts.seed);
    let ranks = hessian_analysis(ls, &probe, opts.tol_rank)?.ranks;
    let mut res = GotayNesterResult {
        levels: Vec::new(),
        primary: Vec::new(),
        secondary: Vec::new(),
        h1: None,
        energy_fiber_spread: 0.0,
        stabilized: false,
        pointwise: false,
        hessian_ranks: ranks,
        notes: Vec::new(),
    };

    let legendre: Vec<Expression> = s
        .p()
        .iter()
        .zip(ls.momenta())
        .map(|(p, m)| simplify(&(Expression::var(p) - m)))
        .collect();
    let rows: Option<Vec<_>> = legendre.iter().map(|r| split_affine(r, &qd)).collect();
    let Some(rows) = rows else {
        res.pointwise = true;
        res.notes.push("momenta are not affine in the velocities: Hessian ranks only".into());
        return Ok(res);
    };

    let cloud = halton_cloud(2 * n, opts.samples, opts.bbox, opts.seed);
    let el = eliminate(rows, &cot, &cloud, opts.tol);
    if el.inconsistent() {
        return Err(Error::Invalid("Legendre map has empty image".into()));
    }
    if el.stratified {
        res.notes.push("Legendre rank varies over the sampled region".into());
    }
    for c in &el.conditions {
        push_unique(&mut res.primary, normalize_constraint(c));
    }

    // h1: E_L at any point of the Legendre fiber.
    let sol = el.particular_solution(n);
    let sub: HashMap<String, Expression> = qd
        .iter()
        .zip(&sol)
        .map(|(v, e)| (v.clone(), e.clone().unwrap_or_else(Expression::zero)))
        .collect();
    let el_energy = energy(ls);
    let h = simplify(&substitute(&el_energy, &sub));
    res.h1 = Some(h.clone());
    res.energy_fiber_spread = energy_fiber_spread(ls, &el_energy, &sub, &res.primary, opts)?;
    if res.energy_fiber_spread > opts.tol {
        return Err(Error::Invalid(format!(
            "energy varies by {:e} along a Legendre fiber: h1 is not well defined",
            res.energy_fiber_spread
        )));
    }

    let primary = res.primary.clone();
    let mut current = primary.clone();
    let mut added = primary.clone();
    for level in 1..=opts.max_iter {
        let pts = sample_level(&current, &cot, opts, level)?;
        if pts.is_empty() && !current.is_empty() {
            res.notes.push(format!("no sample found on M{level}"));
            res.levels.push(PresymplecticLevel {
                level,
                constraints: current.clone(),
                added: added.clone(),
                samples: 0,
                dim: None,
                stratified: false,
            });
            return Ok(res);
        }
        let dim = pts.first().and_then(|x| level_dim(&current, &cot, x, opts.tol_rank));
        let u: Vec<String> = (1..=primary.len()).map(|i| format!("__u{i}")).collect();
        let cons_rows: Vec<_> = current
            .iter()
            .map(|psi| {
                let mut terms = vec![canonical_bracket_expr(&s, psi, &h)];
                for (phi, ua) in primary.iter().zip(&u) {
                    terms.push(Expression::var(ua) * canonical_bracket_expr(&s, psi, phi));
                }
                split_affine(&simplify(&Expression::sum(terms)), &u).expect("linear in multipliers")
            })
            .collect();
        let el = if cons_rows.is_empty() {
            Default::default()
        } else {
            eliminate(cons_rows, &cot, &pts, opts.tol)
        };
        let scale = pts.iter().flatten().fold(0.0f64, |a, v| a.max(v.abs()));
        let mut fresh = Vec::new();
        for c in &el.conditions {
            let c = normalize_constraint(c);
            if c.as_constant().is_some_and(|v| v != 0.0) {
                res.notes.push(format!("inconsistent dynamics on M{level}"));
                fresh.clear();
                push_unique(&mut fresh, c);
                break;
            }
            let tape = Tape::compile(&c, &cot)?;
            let worst = pts
                .iter()
                .map(|x| tape.eval(x).map(f64::abs).unwrap_or(f64::INFINITY))
                .fold(0.0f64, f64::max);
            if worst >= opts.tol * (1.0 + scale) && !current.iter().any(|o| o.to_string() == c.to_string()) {
                push_unique(&mut fresh, c);
            }
        }
        res.levels.push(PresymplecticLevel {
            level,
            constraints: current.clone(),
            added: added.clone(),
            samples: pts.len(),
            dim,
            stratified: el.stratified,
        });
        if fresh.is_empty() {
            res.stabilized = true;
            return Ok(res);
        }
        for c in &fresh {
            push_unique(&mut res.secondary, c.clone());
            push_unique(&mut current, c.clone());
        }
        added = fresh;
    }
    Ok(res)
}

/// Variation of `E_L` along the kernel of the velocity Hessian at sampled
/// points of `M_1`.
fn energy_fiber_spread(
    ls: &LagrangianSystem,
    el_energy: &Expression,
    particular: &HashMap<String, Expression>,
    primary: &[Expression],
    opts: &GotayNesterOptions,
) -> Result<f64> {
    let s = ls.space;
    let n = s.n();
    let cot = s.cotangent();
    let pts = sample_level(primary, &cot, opts, 0)?;
    let qd_exprs: Vec<Expression> = s.qd().iter().map(|v| particular[v].clone()).collect();
    let qd_tape = TapeSet::compile(&qd_exprs, &cot)?;
    let e_tape = Tape::compile(el_energy, &s.tangent())?;
    let l_tape = Tape::compile(&ls.l, &s.tangent())?;
    let active: Vec<usize> = (n..2 * n).collect();
    let mut worst = 0.0f64;
    for x in pts.iter().take(20) {
        let q = &x[..n];
        let v0 = qd_tape.eval(x)?;
        let base = [q, v0.as_slice()].concat();
        let e0 = e_tape.eval(&base)?;
        let jet = l_tape.jet2(&base, &active)?;
        let hm = Mat::from_fn(n, n, |i, j| jet.hess(i, j));
        let ker = linalg::nullspace_rel(&hm, opts.tol_rank);
        for c in 0..ker.ncols() {
            for t in [0.7, -1.3] {
                let v: Vec<f64> = (0..n).map(|i| v0[i] + t * ker[(i, c)]).collect();
                let e1 = e_tape.eval(&[q, v.as_slice()].concat())?;
                worst = worst.max((e1 - e0).abs());
            }
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    fn sys(n: usize, l: &str) -> LagrangianSystem {
        LagrangianSystem::new(PhaseSpace::new(n), parse(l).unwrap()).unwrap()
    }

    fn ex1() -> LagrangianSystem {
        sys(3, "1/2*(qd1 + qd2)^2")
    }

    fn ex2() -> LagrangianSystem {
        sys(2, "1/2*qd1^2 + q2*q1^2")
    }

    #[test]
    fn hessians() {
        let cloud = halton_cloud(6, 5, SampleBox::default(), 1);
        let h = hessian_analysis(&ex1(), &cloud, 1e-8).unwrap();
        assert_eq!(h.ranks, [1; 5]);
        assert!(!h.regular);
        assert_eq!(strings(&ex1().hessian()[0]), ["1", "1", "0"]);
        let h = hessian_analysis(&ex2(), &halton_cloud(4, 5, SampleBox::default(), 1), 1e-8).unwrap();
        assert_eq!(h.ranks, [1; 5]);
        let h = hessian_analysis(&sys(2, "1/2*(qd1^2 + qd2^2)"), &halton_cloud(4, 5, SampleBox::default(), 1), 1e-8)
            .unwrap();
        assert!(h.regular);
    }

    #[test]
    fn legendre_and_energy() {
        assert_eq!(legendre_map(&ex1(), &[0.0, 0.0, 0.0, 1.0, 2.0, 3.0]).unwrap(), [0.0, 0.0, 0.0, 3.0, 3.0, 0.0]);
        assert_eq!(legendre_map(&ex2(), &[1.0, 1.0, 2.0, 5.0]).unwrap(), [1.0, 1.0, 2.0, 0.0]);
        assert_eq!(legendre_map(&sys(1, "1/2*qd1^2"), &[0.3, -0.8]).unwrap(), [0.3, -0.8]);
        assert_eq!(energy(&sys(1, "1/2*qd1^2")).to_string(), "0.5*qd1^2");
        assert_eq!(energy(&ex2()).to_string(), "0.5*qd1^2 - q1^2*q2");
        assert_eq!(energy(&sys(1, "q1*qd1 - cos(q1)")).to_string(), "cos(q1)");
    }

    #[test]
    fn pontryagin_generates_euler_lagrange_submanifold() {
        let e = pontryagin_family(&ex2()).unwrap().generate_e().unwrap();
        assert_eq!(e.constraint_strings(), ["pd1 - 2*q1*q2", "pd2 - q1^2", "p1 - qd1", "p2"]);
        let e = pontryagin_family(&sys(1, "1/2*qd1^2")).unwrap().generate_e().unwrap();
        assert_eq!(e.constraint_strings(), ["pd1", "p1 - qd1"]);
    }

    #[test]
    fn lagrangian_hj_examples() {
        let g = OneForm::new(PhaseSpace::new(3), vec![parse("1.5").unwrap(), parse("1.5").unwrap(), parse("0").unwrap()])
            .unwrap();
        let samples = vec![vec![0.1, 0.2, 0.3, 1.0, 0.5, -2.0], vec![-1.0, 0.0, 1.0, 3.0, -1.5, 0.0]];
        assert!(lagrangian_hj_residual(&ex1(), &g, &samples, 1e-9).unwrap().passed);

        let g = OneForm::new(PhaseSpace::new(2), vec![parse("q1").unwrap(), parse("0").unwrap()]).unwrap();
        let on = vec![vec![0.0, 0.4, 0.0, 1.7], vec![0.0, -1.0, 0.0, 0.0]];
        assert!(lagrangian_hj_residual(&ex2(), &g, &on, 1e-9).unwrap().passed);
        let d = lagrangian_hj_residual(&ex2(), &g, &[vec![1.0, 1.0, 1.0, 0.0]], 1e-9).unwrap();
        assert!(!d.passed);
        assert_eq!(d.details.get("max-dynamics-block"), Some(&Value::Num(1.0)));
    }

    #[test]
    fn gotay_nester_example2() {
        let r = gotay_nester(&ex2(), &GotayNesterOptions::default()).unwrap();
        assert!(r.stabilized);
        assert_eq!(strings(&r.primary), ["p2"]);
        assert_eq!(strings(&r.secondary), ["q1", "p1"]);
        assert_eq!(strings(r.final_constraints()), ["p2", "q1", "p1"]);
        assert_eq!(r.h1.unwrap().to_string(), "0.5*p1^2 - q1^2*q2");
        assert_eq!(r.levels.last().unwrap().dim, Some(1));
    }

    #[test]
    fn gotay_nester_example1() {
        let r = gotay_nester(&ex1(), &GotayNesterOptions::default()).unwrap();
        assert!(r.stabilized);
        assert_eq!(strings(&r.primary), ["p1 - p2", "p3"]);
        assert!(r.secondary.is_empty());
        assert_eq!(r.h1.unwrap().to_string(), "0.5*p1^2");
        assert!(r.energy_fiber_spread < 1e-12);
    }

    #[test]
    fn gotay_nester_regular() {
        let r = gotay_nester(&sys(2, "1/2*(qd1^2 + qd2^2) - q1*q2"), &GotayNesterOptions::default()).unwrap();
        assert!(r.stabilized && r.primary.is_empty() && r.secondary.is_empty());
        assert_eq!(r.levels.len(), 1);
        assert_eq!(r.levels[0].dim, Some(4));
    }

    #[test]
    fn gotay_nester_non_affine_is_pointwise() {
        let r = gotay_nester(&sys(1, "qd1^4"), &GotayNesterOptions::default()).unwrap();
        assert!(r.pointwise && r.levels.is_empty());
    }
}
