//! Complete solutions `W(q̄, q)` and the symplectomorphism they generate.
//!
//! Momenta follow `p dq − p̄ dq̄ = dW`, i.e. `p = ∂W/∂q`, `p̄ = −∂W/∂q̄`,
//! optionally with multiplier terms `ν_a ∂U^a` for constraints
//! `U^a(q̄, q) = 0`.

use crate::error::{Error, Result};
use crate::expr::{derivative, simplify, Expression, Tape, TapeSet};
use crate::geometry::{indexed_names, PhaseSpace};
use crate::linalg::{self, Mat};
use crate::morse::{Base, FiberOptions, MorseFamily};
use crate::report::{fmt_float, point_value, Section, ToSection};
use crate::sampling::{halton_cloud, Projector, SampleBox, DEFAULT_SEED};

use super::fiber_starts;

#[derive(Clone, Debug)]
pub struct CompleteSolution {
    space: PhaseSpace,
    w: Expression,
    constraints: Vec<Expression>,
    multipliers: Vec<String>,
}

impl CompleteSolution {
    /// `W` over `qb1..qbm, q1..qn`. Only `m = n` is supported.
    pub fn new(space: PhaseSpace, nbar: usize, w: Expression, constraints: Vec<Expression>) -> Result<Self> {
        if nbar != space.n() {
            return Err(Error::Unsupported(format!(
                "complete solution with {nbar} parameters for {} coordinates",
                space.n()
            )));
        }
        let multipliers = indexed_names("nu", constraints.len());
        let cs = CompleteSolution {
            space,
            w,
            constraints,
            multipliers,
        };
        let vars = cs.vars();
        if let Some(v) = std::iter::once(&cs.w)
            .chain(&cs.constraints)
            .flat_map(|e| e.free_vars())
            .find(|v| !vars.contains(v))
        {
            return Err(Error::UnexpectedVariable(v.clone()));
        }
        Ok(cs)
    }

    pub fn qbar(&self) -> Vec<String> {
        indexed_names("qb", self.space.n())
    }

    /// `qb ++ q`.
    pub fn vars(&self) -> Vec<String> {
        [self.qbar(), self.space.q()].concat()
    }

    pub fn is_constrained(&self) -> bool {
        !self.constraints.is_empty()
    }

    /// `(p, p̄)` as expressions over `qb ++ q ++ nu`.
    fn momenta(&self) -> (Vec<Expression>, Vec<Expression>) {
        let part = |v: &String, sign: f64| {
            let mut terms = vec![derivative(&self.w, v)];
            for (u, nu) in self.constraints.iter().zip(&self.multipliers) {
                terms.push(Expression::var(nu) * derivative(u, v));
            }
            simplify(&(Expression::num(sign) * Expression::sum(terms)))
        };
        let p = self.space.q().iter().map(|v| part(v, 1.0)).collect();
        let pb = self.qbar().iter().map(|v| part(v, -1.0)).collect();
        (p, pb)
    }
}

#[derive(Clone, Debug)]
pub struct CompleteOptions {
    pub leaves: usize,
    pub per_leaf: usize,
    pub bbox: SampleBox,
    pub seed: u64,
    pub tol: f64,
    pub tol_rank: f64,
    /// Step for the finite-difference checks of the induced map.
    pub fd_step: f64,
    pub fd_tol: f64,
    /// Points per leaf used for the finite-difference checks.
    pub fd_points: usize,
}

impl Default for CompleteOptions {
    fn default() -> Self {
        CompleteOptions {
            leaves: 6,
            per_leaf: 12,
            bbox: SampleBox::default(),
            seed: DEFAULT_SEED,
            tol: 1e-9,
            tol_rank: 1e-8,
            fd_step: 1e-5,
            fd_tol: 1e-6,
            fd_points: 2,
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct CompleteReport {
    pub morse_checked: bool,
    pub morse_ok: bool,
    pub min_mixed_singular_value: f64,
    /// `max − min` of F over each leaf.
    pub leaf_spreads: Vec<f64>,
    pub leaf_values: Vec<f64>,
    pub worst_spread: f64,
    pub worst_leaf: Option<Vec<f64>>,
    pub infeasible: usize,
    /// Constrained case: spread with the multiplier terms dropped.
    pub spread_without_multipliers: Option<f64>,
    /// `max |∂F̄/∂p̄|` of the pulled-back family.
    pub pullback_dpbar: Option<f64>,
    /// `max |∂F̄/∂q̄|`, informational.
    pub pullback_dqbar: Option<f64>,
    pub symplectic_defect: Option<f64>,
    pub qbar: Vec<String>,
    pub passed: bool,
    pub notes: Vec<String>,
}

impl ToSection for CompleteReport {
    fn to_section(&self) -> Section {
        let mut s = Section::new()
            .with("passed", self.passed)
            .with("morse-checked", self.morse_checked)
            .with("morse-condition", self.morse_ok)
            .with("min-mixed-singular-value", self.min_mixed_singular_value)
            .with("leaves", self.leaf_spreads.len())
            .with("leaf-values", self.leaf_values.iter().map(|v| fmt_float(*v)).collect::<Vec<_>>())
            .with("worst-leaf-spread", self.worst_spread)
            .with("infeasible-samples", self.infeasible);
        if let Some(l) = &self.worst_leaf {
            s.push("worst-leaf", point_value(&self.qbar, l));
        }
        s.push("spread-without-multipliers", self.spread_without_multipliers);
        s.push("pullback-dF-dpbar", self.pullback_dpbar);
        s.push("pullback-dF-dqbar", self.pullback_dqbar);
        s.push("symplectic-defect", self.symplectic_defect);
        if !self.notes.is_empty() {
            s.push("notes", self.notes.clone());
        }
        s
    }
}

struct Evaluator<'a> {
    mf: &'a MorseFamily,
    f: Tape,
    p: TapeSet,
    pb: TapeSet,
    starts: Vec<Vec<f64>>,
}

impl Evaluator<'_> {
    /// All critical values of F over `(q, p(qb, q, nu))`, with the roots.
    fn values(&self, qb: &[f64], q: &[f64], nu: &[f64]) -> Result<Vec<(f64, Vec<f64>)>> {
        let x = [qb, q, nu].concat();
        let p = self.p.eval(&x)?;
        let base = [q, p.as_slice()].concat();
        let sols = self.mf.solve_fiber(&base, &self.starts, &FiberOptions::default())?;
        sols.roots
            .into_iter()
            .map(|r| Ok((self.f.eval(&[base.as_slice(), &r.lam].concat())?, r.lam)))
            .collect()
    }
}

/// Check a complete solution of the implicit HJ equation of `mf`.
///
/// Per leaf `q̄ = const`, F on the Lagrangian submanifold generated by
/// `W(q̄, ·)` must be constant. In the unconstrained case the induced map
/// `(q̄, p̄) ↦ (q, p)` is also evaluated: the pulled-back family must not
/// depend on `p̄`, and the map must preserve the canonical form.
pub fn complete_solution_check(cs: &CompleteSolution, mf: &MorseFamily, opts: &CompleteOptions) -> Result<CompleteReport> {
    if mf.base() != Base::Cotangent || mf.space() != cs.space {
        return Err(Error::Invalid("complete solution and family live on different spaces".into()));
    }
    let n = cs.space.n();
    let l = cs.constraints.len();
    let wvars = cs.vars();
    let all: Vec<String> = [wvars.clone(), cs.multipliers.clone()].concat();
    let (p_exprs, pb_exprs) = cs.momenta();
    let ev = Evaluator {
        mf,
        f: Tape::compile(mf.function(), &mf.vars())?,
        p: TapeSet::compile(&p_exprs, &all)?,
        pb: TapeSet::compile(&pb_exprs, &all)?,
        starts: fiber_starts(mf.k(), opts.bbox),
    };
    let mut rep = CompleteReport {
        qbar: cs.qbar(),
        min_mixed_singular_value: f64::NAN,
        ..CompleteReport::default()
    };

    let leaves = halton_cloud(n, opts.leaves, opts.bbox, opts.seed);
    let qs = halton_cloud(n, opts.per_leaf, opts.bbox, opts.seed.wrapping_add(1));
    let nus = halton_cloud(l, opts.per_leaf, opts.bbox, opts.seed.wrapping_add(2));

    if !cs.is_constrained() {
        rep.morse_checked = true;
        let wt = Tape::compile(&cs.w, &wvars)?;
        let active: Vec<usize> = (0..2 * n).collect();
        let mut min_sv = f64::INFINITY;
        for qb in &leaves {
            for q in &qs {
                let jet = wt.jet2(&[qb.as_slice(), q].concat(), &active)?;
                let h = Mat::from_fn(n, n, |i, j| jet.hess(i, n + j));
                let sv = linalg::singular_values(&h);
                min_sv = min_sv.min(sv.last().copied().unwrap_or(0.0));
            }
        }
        rep.min_mixed_singular_value = min_sv;
        rep.morse_ok = min_sv > opts.tol_rank;
        if !rep.morse_ok {
            rep.notes.push("mixed Hessian of W is degenerate: not a Morse family".into());
            return Ok(rep);
        }
    }

    let u_set = if cs.is_constrained() {
        Some(TapeSet::compile(&cs.constraints, &wvars)?)
    } else {
        None
    };
    let projector = Projector::default();
    let free_q: Vec<usize> = (n..2 * n).collect();
    let mut plain_worst = 0.0f64;
    let mut leaf_points: Vec<Vec<(Vec<f64>, Vec<f64>)>> = Vec::new();
    for qb in &leaves {
        let mut vals = Vec::new();
        let mut plain = Vec::new();
        let mut pts = Vec::new();
        for (i, q0) in qs.iter().enumerate() {
            let q = match &u_set {
                None => q0.clone(),
                Some(set) => match projector.project(set, &[qb.as_slice(), q0].concat(), &free_q) {
                    Some(x) => x[n..].to_vec(),
                    None => {
                        rep.infeasible += 1;
                        continue;
                    }
                },
            };
            let nu = if l > 0 { nus[i].clone() } else { Vec::new() };
            let roots = ev.values(qb, &q, &nu)?;
            if roots.is_empty() {
                rep.infeasible += 1;
                continue;
            }
            for (v, lam) in &roots {
                vals.push(*v);
                if pts.len() < opts.fd_points {
                    pts.push((q.clone(), lam.clone()));
                }
            }
            if l > 0 {
                plain.extend(ev.values(qb, &q, &vec![0.0; l])?.into_iter().map(|(v, _)| v));
            }
        }
        let (lo, hi) = vals.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
        let spread = if vals.is_empty() { f64::INFINITY } else { hi - lo };
        if !plain.is_empty() {
            let (a, b) = plain.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
            plain_worst = plain_worst.max(b - a);
        }
        if rep.worst_leaf.is_none() || spread > rep.worst_spread {
            rep.worst_spread = spread;
            rep.worst_leaf = Some(qb.clone());
        }
        rep.leaf_spreads.push(spread);
        rep.leaf_values.push(if vals.is_empty() { f64::NAN } else { lo });
        leaf_points.push(pts);
    }
    if l > 0 {
        rep.spread_without_multipliers = Some(plain_worst);
    }
    let leaves_ok = rep.worst_spread < opts.tol;
    if rep.infeasible > 0 {
        rep.notes.push(format!("{} leaf samples without fiber solution", rep.infeasible));
    }

    if cs.is_constrained() {
        rep.notes.push("induced-map checks apply to the unconstrained case only".into());
        rep.passed = leaves_ok;
        return Ok(rep);
    }

    // Induced map (q̄, p̄) ↦ (q, p) and the pulled-back family.
    let pb_names = indexed_names("pb", n);
    let inv_exprs: Vec<Expression> = pb_exprs
        .iter()
        .zip(&pb_names)
        .map(|(e, pb)| simplify(&(Expression::var(pb) - e.clone())))
        .collect();
    let inv = TapeSet::compile(&inv_exprs, &[wvars.clone(), pb_names].concat())?;
    let phi = |qb: &[f64], pb: &[f64], q0: &[f64]| -> Option<Vec<f64>> {
        let x = projector.project(&inv, &[qb, q0, pb].concat(), &free_q)?;
        let q = &x[n..2 * n];
        let p = ev.p.eval(&[qb, q].concat()).ok()?;
        Some([q, p.as_slice()].concat())
    };
    let h = opts.fd_step;
    let mut dpb = 0.0f64;
    let mut dqb = 0.0f64;
    let mut sympl = 0.0f64;
    let omega = crate::geometry::omega_cotangent_matrix(n);
    let mut fd_failed = false;
    for (qb, pts) in leaves.iter().zip(&leaf_points) {
        for (q, lam) in pts {
            let pb = ev.pb.eval(&[qb.as_slice(), q].concat())?;
            let z0 = [qb.as_slice(), &pb].concat();
            let mut jac = Mat::zeros(2 * n, 2 * n);
            let mut fgrad = vec![0.0; 2 * n];
            for c in 0..2 * n {
                let mut zp = z0.clone();
                let mut zm = z0.clone();
                zp[c] += h;
                zm[c] -= h;
                let (Some(xp), Some(xm)) = (phi(&zp[..n], &zp[n..], q), phi(&zm[..n], &zm[n..], q)) else {
                    fd_failed = true;
                    continue;
                };
                for r in 0..2 * n {
                    jac[(r, c)] = (xp[r] - xm[r]) / (2.0 * h);
                }
                let fp = ev.f.eval(&[xp.as_slice(), lam].concat())?;
                let fm = ev.f.eval(&[xm.as_slice(), lam].concat())?;
                fgrad[c] = (fp - fm) / (2.0 * h);
            }
            dqb = fgrad[..n].iter().fold(dqb, |a, v| a.max(v.abs()));
            dpb = fgrad[n..].iter().fold(dpb, |a, v| a.max(v.abs()));
            let defect = (jac.transpose() * &omega * &jac - &omega).amax();
            sympl = sympl.max(defect);
        }
    }
    if fd_failed {
        rep.notes.push("induced map could not be inverted at some perturbed point".into());
    }
    rep.pullback_dpbar = Some(dpb);
    rep.pullback_dqbar = Some(dqb);
    rep.symplectic_defect = Some(sympl);
    rep.passed = leaves_ok && !fd_failed && dpb < opts.fd_tol && sympl < opts.fd_tol;
    Ok(rep)
}
