//! Morse families and the Lagrangian submanifolds of TT*Q they generate.

use crate::error::{Error, Result};
use crate::expr::{
    derivative, normalize_constraint, simplify, substitute, Expression, Point, Tape, TapeSet,
};
use crate::geometry::{bracket_from_grads, omega_t, PhaseSpace};
use crate::linalg::{self, Mat};
use crate::report::{fmt_float, point_value, Section, ToSection};
use crate::sampling::{sample_zero_set, SampleBox};
use nalgebra::DVector;
use std::collections::HashMap;

/// Base of the fibration carrying a Morse family.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Base {
    /// Base `(q, p)`: the family generates a submanifold of TT*Q.
    Cotangent,
    /// Base `q`: the family generates a submanifold of T*Q.
    Configuration,
}

/// `F(base, fiber)` together with its fibration.
#[derive(Clone, Debug)]
pub struct MorseFamily {
    space: PhaseSpace,
    base: Base,
    fibers: Vec<String>,
    f: Expression,
}

impl MorseFamily {
    /// Family on `T*Q × R^k` with fiber coordinates `fibers`.
    pub fn new(space: PhaseSpace, fibers: Vec<String>, f: Expression) -> Result<Self> {
        Self::with_base(space, Base::Cotangent, fibers, f)
    }

    /// Family on `Q × R^k`, as used for generating functions `W(q, mu)`.
    pub fn over_configuration(space: PhaseSpace, fibers: Vec<String>, f: Expression) -> Result<Self> {
        Self::with_base(space, Base::Configuration, fibers, f)
    }

    /// Ordinary Hamiltonian, no fiber.
    pub fn hamiltonian(space: PhaseSpace, h: Expression) -> Result<Self> {
        Self::new(space, Vec::new(), h)
    }

    fn with_base(space: PhaseSpace, base: Base, fibers: Vec<String>, f: Expression) -> Result<Self> {
        let mf = MorseFamily {
            space,
            base,
            fibers,
            f,
        };
        let vars = mf.vars();
        if let Some(v) = mf.f.free_vars().iter().find(|v| !vars.contains(v)) {
            return Err(Error::UnexpectedVariable(v.clone()));
        }
        let base_vars = mf.base_vars();
        if let Some(v) = mf.fibers.iter().find(|v| base_vars.contains(v)) {
            return Err(Error::Invalid(format!("fiber `{v}` collides with a base coordinate")));
        }
        Ok(mf)
    }

    pub fn space(&self) -> PhaseSpace {
        self.space
    }

    pub fn base(&self) -> Base {
        self.base
    }

    pub fn function(&self) -> &Expression {
        &self.f
    }

    pub fn fibers(&self) -> &[String] {
        &self.fibers
    }

    pub fn k(&self) -> usize {
        self.fibers.len()
    }

    pub fn base_vars(&self) -> Vec<String> {
        match self.base {
            Base::Cotangent => self.space.cotangent(),
            Base::Configuration => self.space.q(),
        }
    }

    /// Base coordinates followed by fiber coordinates.
    pub fn vars(&self) -> Vec<String> {
        [self.base_vars(), self.fibers.clone()].concat()
    }

    fn coords(&self, x: &Point) -> Result<Vec<f64>> {
        self.vars()
            .iter()
            .map(|v| {
                x.get(v)
                    .copied()
                    .ok_or_else(|| crate::expr::EvalError::UnboundVariable(v.clone()).into())
            })
            .collect()
    }

    fn tape(&self) -> Result<Tape> {
        Ok(Tape::compile(&self.f, &self.vars())?)
    }

    /// `∂F/∂fiber` at `x`.
    pub fn critical_residual(&self, x: &Point) -> Result<Vec<f64>> {
        let xs = self.coords(x)?;
        self.critical_residual_at(&xs)
    }

    pub(crate) fn critical_residual_at(&self, xs: &[f64]) -> Result<Vec<f64>> {
        let nb = self.base_vars().len();
        let active: Vec<usize> = (nb..nb + self.k()).collect();
        Ok(self.tape()?.jet2(xs, &active)?.grad().to_vec())
    }

    /// The matrix `[∂²F/∂fiber∂base | ∂²F/∂fiber∂fiber]`: the form
    /// `W(F, z)` restricted to vertical vectors in its first slot.
    pub fn rank_matrix(&self, x: &Point) -> Result<Mat> {
        let xs = self.coords(x)?;
        self.rank_matrix_at(&xs)
    }

    fn rank_matrix_at(&self, xs: &[f64]) -> Result<Mat> {
        let m = xs.len();
        let nb = self.base_vars().len();
        let all: Vec<usize> = (0..m).collect();
        let jet = self.tape()?.jet2(xs, &all)?;
        Ok(Mat::from_fn(m - nb, m, |a, j| jet.hess(nb + a, j)))
    }

    /// Rank of the Morse matrix without checking criticality.
    pub fn morse_rank(&self, x: &Point, tol_rank: f64) -> Result<RankInfo> {
        let m = self.rank_matrix(x)?;
        Ok(RankInfo::from_matrix(&m, tol_rank))
    }

    /// Rank of the Morse matrix at a point of the critical set.
    pub fn morse_rank_check(&self, x: &Point, tol_rank: f64, tol_crit: f64) -> Result<RankInfo> {
        let res = self.critical_residual(x)?;
        let worst = res.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if worst > tol_crit {
            return Err(Error::NotCritical { residual: worst });
        }
        self.morse_rank(x, tol_rank)
    }

    /// Critical equations `∂F/∂fiber = 0` as expressions.
    pub fn critical_equations(&self) -> Vec<Expression> {
        self.fibers.iter().map(|l| derivative(&self.f, l)).collect()
    }

    /// Points of the critical set, sampled by projecting a Halton cloud in
    /// `bbox` onto `∂F/∂fiber = 0`. Coordinates follow [`Self::vars`].
    pub fn sample_critical_points(
        &self,
        count: usize,
        bbox: SampleBox,
        seed: u64,
        tol: f64,
    ) -> Result<Vec<Vec<f64>>> {
        let vars = self.vars();
        let set = TapeSet::compile(&self.critical_equations(), &vars)?;
        Ok(sample_zero_set(&set, count, bbox, seed, tol))
    }

    /// Point of E over a critical point given in [`Self::vars`] order:
    /// `(q, p, ∂F/∂p, −∂F/∂q)`.
    pub fn e_point(&self, xs: &[f64]) -> Result<Vec<f64>> {
        if self.base != Base::Cotangent {
            return Err(Error::Unsupported("E points need a family over T*Q".into()));
        }
        let n = self.space.n();
        let all: Vec<usize> = (0..2 * n).collect();
        let jet = self.tape()?.jet2(xs, &all)?;
        let g = jet.grad();
        let mut out = xs[..2 * n].to_vec();
        out.extend((0..n).map(|i| g[n + i]));
        out.extend((0..n).map(|i| -g[i]));
        Ok(out)
    }

    /// The implicit system `E ⊂ TT*Q` generated by the family.
    ///
    /// Fiber coordinates that appear with a constant coefficient in some
    /// equation are eliminated; any that remain are kept as hidden
    /// coordinates of the system.
    pub fn generate_e(&self) -> Result<ImplicitSystem> {
        if self.base != Base::Cotangent {
            return Err(Error::Unsupported("E is generated by families over T*Q".into()));
        }
        let space = self.space;
        let taken = [space.tulczyjew(), self.fibers.clone()].concat();
        // Fibers named like TT*Q coordinates (the Pontryagin family uses qd)
        // are renamed so that they stay independent of the velocities.
        let mut rename: HashMap<String, Expression> = HashMap::new();
        let mut hidden = Vec::new();
        for l in &self.fibers {
            if space.tulczyjew().contains(l) {
                let mut fresh = format!("f{l}");
                while taken.contains(&fresh) || hidden.contains(&fresh) {
                    fresh.insert(0, 'f');
                }
                rename.insert(l.clone(), Expression::var(&fresh));
                hidden.push(fresh);
            } else {
                hidden.push(l.clone());
            }
        }
        let f = substitute(&self.f, &rename);
        let (q, p, qd, pd) = (space.q(), space.p(), space.qd(), space.pd());
        let mut cons = Vec::new();
        for i in 0..space.n() {
            cons.push(simplify(&(Expression::var(&qd[i]) - derivative(&f, &p[i]))));
        }
        for i in 0..space.n() {
            cons.push(simplify(&(Expression::var(&pd[i]) + derivative(&f, &q[i]))));
        }
        for l in &hidden {
            cons.push(derivative(&f, l));
        }
        let (cons, hidden) = eliminate_hidden(cons, hidden);
        let mut out: Vec<Expression> = Vec::new();
        for c in cons {
            let c = normalize_constraint(&c);
            if !c.is_zero() && !out.iter().any(|o| o.to_string() == c.to_string()) {
                out.push(c);
            }
        }
        Ok(ImplicitSystem {
            label: "E".into(),
            ambient: Ambient::Tulczyjew(space.n()),
            vars: space.tulczyjew(),
            hidden,
            constraints: out,
        })
    }

    /// Damped Newton on `∂F/∂fiber = 0` over a fixed base point, from each
    /// start. Converged roots are deduplicated within `opts.tol`.
    pub fn solve_fiber(&self, base: &[f64], starts: &[Vec<f64>], opts: &FiberOptions) -> Result<FiberSolutions> {
        let nb = self.base_vars().len();
        if base.len() != nb {
            return Err(Error::DimensionMismatch {
                expected: nb,
                got: base.len(),
            });
        }
        let k = self.k();
        let tape = self.tape()?;
        let active: Vec<usize> = (nb..nb + k).collect();
        let mut out = FiberSolutions::default();
        if k == 0 {
            out.roots.push(FiberRoot {
                lam: Vec::new(),
                residual: 0.0,
                non_isolated: false,
                hessian_rank: 0,
            });
            return Ok(out);
        }
        for start in starts {
            if start.len() != k {
                return Err(Error::DimensionMismatch {
                    expected: k,
                    got: start.len(),
                });
            }
            match newton_fiber(&tape, base, start, &active, opts) {
                Some(root) => {
                    let dup = out.roots.iter().any(|r| {
                        r.lam
                            .iter()
                            .zip(&root.lam)
                            .all(|(a, b)| (a - b).abs() <= opts.tol.max(1e-12) * (1.0 + a.abs()))
                    });
                    if !dup {
                        out.roots.push(root);
                    }
                }
                None => out.failed_starts += 1,
            }
        }
        Ok(out)
    }

    /// Convenience wrapper: a single start over a `(q, p)` base point.
    pub fn solve_fiber_qp(
        &self,
        q: &[f64],
        p: &[f64],
        lam0: &[f64],
        tol: f64,
        max_iter: usize,
    ) -> Result<FiberSolutions> {
        let base = [q, p].concat();
        let opts = FiberOptions {
            tol,
            max_iter,
            ..FiberOptions::default()
        };
        self.solve_fiber(&base, &[lam0.to_vec()], &opts)
    }
}

fn eliminate_hidden(mut cons: Vec<Expression>, hidden: Vec<String>) -> (Vec<Expression>, Vec<String>) {
    let mut remaining = Vec::new();
    for h in hidden {
        let pick = cons
            .iter()
            .enumerate()
            .filter_map(|(i, c)| {
                let d = derivative(c, &h);
                match d.as_constant() {
                    Some(v) if v != 0.0 => Some((i, v, c.free_vars().len())),
                    _ => None,
                }
            })
            .min_by_key(|&(i, _, nv)| (nv, i));
        match pick {
            Some((i, coef, _)) => {
                let c = cons.remove(i);
                let mut zero = HashMap::new();
                zero.insert(h.clone(), Expression::zero());
                let rest = substitute(&c, &zero);
                let value = simplify(&(-(rest) / coef));
                let mut map = HashMap::new();
                map.insert(h.clone(), value);
                cons = cons.iter().map(|e| substitute(e, &map)).collect();
            }
            None => remaining.push(h),
        }
    }
    (cons, remaining)
}

#[derive(Clone, Debug)]
pub struct FiberOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub max_halvings: usize,
    /// Relative singular-value threshold for the fiber Hessian.
    pub tol_rank: f64,
}

impl Default for FiberOptions {
    fn default() -> Self {
        FiberOptions {
            tol: 1e-10,
            max_iter: 50,
            max_halvings: 20,
            tol_rank: 1e-8,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FiberRoot {
    pub lam: Vec<f64>,
    pub residual: f64,
    /// Fiber Hessian is singular: the root lies on a family of roots.
    pub non_isolated: bool,
    pub hessian_rank: usize,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct FiberSolutions {
    pub roots: Vec<FiberRoot>,
    pub failed_starts: usize,
}

fn newton_fiber(
    tape: &Tape,
    base: &[f64],
    start: &[f64],
    active: &[usize],
    opts: &FiberOptions,
) -> Option<FiberRoot> {
    let k = active.len();
    let mut x = [base, start].concat();
    let eval = |x: &[f64]| tape.jet2(x, active).ok();
    let mut jet = eval(&x)?;
    let norm = |g: &[f64]| g.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    for _ in 0..=opts.max_iter {
        let g = jet.grad().to_vec();
        let h = Mat::from_fn(k, k, |i, j| jet.hess(i, j));
        if norm(&g) <= opts.tol {
            let rank = linalg::numerical_rank(&h, opts.tol_rank);
            return Some(FiberRoot {
                lam: x[base.len()..].to_vec(),
                residual: norm(&g),
                non_isolated: rank < k,
                hessian_rank: rank,
            });
        }
        let (step, _) = linalg::lstsq(&h, &DVector::from_vec(g.iter().map(|v| -v).collect()), 1e-12);
        if step.norm() == 0.0 {
            return None;
        }
        let g0: f64 = g.iter().map(|v| v * v).sum();
        let mut t = 1.0;
        let mut moved = false;
        for _ in 0..=opts.max_halvings {
            let mut xn = x.clone();
            for i in 0..k {
                xn[base.len() + i] += t * step[i];
            }
            if let Some(jn) = eval(&xn) {
                let g1: f64 = jn.grad().iter().map(|v| v * v).sum();
                if g1 < g0 {
                    x = xn;
                    jet = jn;
                    moved = true;
                    break;
                }
            }
            t *= 0.5;
        }
        if !moved {
            return None;
        }
    }
    None
}

/// Deterministic grid of fiber starts: `per_dim` points per axis of `bbox`,
/// capped at `max_points`.
pub fn fiber_grid(k: usize, bbox: SampleBox, per_dim: usize, max_points: usize) -> Vec<Vec<f64>> {
    if k == 0 {
        return vec![Vec::new()];
    }
    let per_dim = per_dim.max(1);
    let axis: Vec<f64> = if per_dim == 1 {
        vec![0.5 * (bbox.lo + bbox.hi)]
    } else {
        (0..per_dim)
            .map(|i| bbox.lo + bbox.width() * i as f64 / (per_dim - 1) as f64)
            .collect()
    };
    let mut out: Vec<Vec<f64>> = vec![Vec::new()];
    for _ in 0..k {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                axis.iter().map(move |&a| {
                    let mut v = prefix.clone();
                    v.push(a);
                    v
                })
            })
            .take(max_points)
            .collect();
    }
    out
}

/// Singular-value rank of a Morse matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct RankInfo {
    pub rank: usize,
    pub rows: usize,
    pub maximal: bool,
    pub singular_values: Vec<f64>,
}

impl RankInfo {
    fn from_matrix(m: &Mat, tol_rank: f64) -> Self {
        let singular_values = linalg::singular_values(m);
        let rank = linalg::rank_from_singular_values(&singular_values, tol_rank);
        RankInfo {
            rank,
            rows: m.nrows(),
            maximal: rank == m.nrows(),
            singular_values,
        }
    }
}

/// Dirac family `H + Σ lam_a Φ^a` on `T*Q × R^k`.
pub fn dirac_family(space: PhaseSpace, h: &Expression, constraints: &[Expression]) -> Result<MorseFamily> {
    let fibers = crate::geometry::indexed_names("lam", constraints.len());
    let terms = constraints
        .iter()
        .zip(&fibers)
        .map(|(phi, l)| Expression::var(l) * phi.clone());
    let f = Expression::sum(std::iter::once(h.clone()).chain(terms));
    let cot = space.cotangent();
    for e in std::iter::once(h).chain(constraints) {
        if let Some(v) = e.free_vars().iter().find(|v| !cot.contains(v)) {
            return Err(Error::UnexpectedVariable(v.clone()));
        }
    }
    MorseFamily::new(space, fibers, f)
}

/// Which space a constraint system lives on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Ambient {
    Cotangent(usize),
    Tulczyjew(usize),
    /// Tangent bundle of a manifold with `m` coordinates.
    Tangent(usize),
}

/// Submanifold given by constraint functions. Hidden coordinates are
/// existentially quantified: the submanifold is the projection of the zero
/// set in `(vars, hidden)` onto `vars`.
#[derive(Clone, Debug)]
pub struct ImplicitSystem {
    pub label: String,
    pub ambient: Ambient,
    pub vars: Vec<String>,
    pub hidden: Vec<String>,
    pub constraints: Vec<Expression>,
}

impl ImplicitSystem {
    pub fn new(label: &str, ambient: Ambient, vars: Vec<String>, constraints: Vec<Expression>) -> Self {
        ImplicitSystem {
            label: label.into(),
            ambient,
            vars,
            hidden: Vec::new(),
            constraints,
        }
    }

    /// Visible coordinates followed by hidden ones.
    pub fn all_vars(&self) -> Vec<String> {
        [self.vars.clone(), self.hidden.clone()].concat()
    }

    pub fn tapes(&self) -> Result<TapeSet> {
        Ok(TapeSet::compile(&self.constraints, &self.all_vars())?)
    }

    pub fn constraint_strings(&self) -> Vec<String> {
        self.constraints.iter().map(|c| c.to_string()).collect()
    }

    /// Sample the zero set; coordinates follow [`Self::all_vars`].
    pub fn sample(&self, count: usize, bbox: SampleBox, seed: u64, tol: f64) -> Result<Vec<Vec<f64>>> {
        Ok(sample_zero_set(&self.tapes()?, count, bbox, seed, tol))
    }
}

impl ToSection for ImplicitSystem {
    fn to_section(&self) -> Section {
        Section::new()
            .with("label", self.label.as_str())
            .with("vars", self.vars.clone())
            .with("hidden", self.hidden.clone())
            .with("constraints", self.constraint_strings())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ClosureMethod {
    /// Pairwise Poisson brackets of the constraints.
    Brackets,
    /// Lifted form on tangent spaces of the zero set (hidden coordinates).
    Isotropy,
}

#[derive(Clone, Debug)]
pub struct ClosureReport {
    pub method: ClosureMethod,
    pub constraint_count: usize,
    pub expected_count: usize,
    pub checked: usize,
    pub rejected: usize,
    pub max_violation: f64,
    pub worst_pair: Option<(usize, usize)>,
    pub worst_point: Option<Vec<f64>>,
    /// Dimension of the tangent space found at each checked point
    /// (isotropy method only).
    pub tangent_dims: Vec<usize>,
    pub passed: bool,
    vars: Vec<String>,
}

impl ToSection for ClosureReport {
    fn to_section(&self) -> Section {
        let mut s = Section::new()
            .with(
                "method",
                match self.method {
                    ClosureMethod::Brackets => "poisson-brackets",
                    ClosureMethod::Isotropy => "tangent-isotropy",
                },
            )
            .with("passed", self.passed)
            .with("constraints", self.constraint_count)
            .with("expected-dimension-count", self.expected_count)
            .with("points-checked", self.checked)
            .with("points-rejected", self.rejected)
            .with("max-violation", self.max_violation);
        if let Some((a, b)) = self.worst_pair {
            s.push("worst-pair", format!("{a} {b}"));
        }
        if let Some(x) = &self.worst_point {
            s.push("worst-point", point_value(&self.vars, x));
        }
        s
    }
}

/// Lagrangian test for a system on TT*Q, evaluated at `points` given in the
/// system's [`ImplicitSystem::all_vars`] order.
pub fn lagrangian_closure_check(sys: &ImplicitSystem, points: &[Vec<f64>], tol: f64) -> Result<ClosureReport> {
    let Ambient::Tulczyjew(n) = sys.ambient else {
        return Err(Error::Unsupported("closure check needs a system on TT*Q".into()));
    };
    let tapes = sys.tapes()?;
    let method = if sys.hidden.is_empty() {
        ClosureMethod::Brackets
    } else {
        ClosureMethod::Isotropy
    };
    let mut rep = ClosureReport {
        method,
        constraint_count: sys.constraints.len(),
        expected_count: 2 * n,
        checked: 0,
        rejected: 0,
        max_violation: 0.0,
        worst_pair: None,
        worst_point: None,
        tangent_dims: Vec::new(),
        passed: false,
        vars: sys.all_vars(),
    };
    for x in points {
        let r = match tapes.eval(x) {
            Ok(r) => r,
            Err(_) => {
                rep.rejected += 1;
                continue;
            }
        };
        if r.iter().any(|v| v.abs() > tol) {
            rep.rejected += 1;
            continue;
        }
        let jac = tapes.jacobian(x)?;
        rep.checked += 1;
        match method {
            ClosureMethod::Brackets => {
                for a in 0..jac.len() {
                    for b in a + 1..jac.len() {
                        let v = bracket_from_grads(n, &jac[a], &jac[b]).abs();
                        if v > rep.max_violation || rep.worst_pair.is_none() {
                            rep.max_violation = rep.max_violation.max(v);
                            rep.worst_pair = Some((a, b));
                            rep.worst_point = Some(x.clone());
                        }
                    }
                }
            }
            ClosureMethod::Isotropy => {
                let m = x.len();
                let j = linalg::from_rows(&jac, m);
                let null = linalg::nullspace_rel(&j, 1e-8);
                let vis = null.rows(0, 4 * n).into_owned();
                let dim = linalg::numerical_rank(&vis, 1e-8);
                rep.tangent_dims.push(dim);
                let cols: Vec<Vec<f64>> = (0..vis.ncols())
                    .map(|c| vis.column(c).iter().copied().collect())
                    .collect();
                for a in 0..cols.len() {
                    for b in a + 1..cols.len() {
                        let v = omega_t(n, &cols[a], &cols[b]).abs();
                        if v >= rep.max_violation {
                            rep.max_violation = v;
                            rep.worst_pair = Some((a, b));
                            rep.worst_point = Some(x.clone());
                        }
                    }
                }
            }
        }
    }
    let count_ok = match method {
        ClosureMethod::Brackets => rep.constraint_count == rep.expected_count,
        ClosureMethod::Isotropy => rep.tangent_dims.iter().all(|&d| d == 2 * n),
    };
    rep.passed = count_ok && rep.checked > 0 && rep.max_violation <= tol;
    Ok(rep)
}

impl std::fmt::Display for RankInfo {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let sv: Vec<String> = self.singular_values.iter().map(|v| fmt_float(*v)).collect();
        write!(f, "rank {}/{} [{}]", self.rank, self.rows, sv.join(", "))
    }
}
