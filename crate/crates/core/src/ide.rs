//! Implicit differential equations `E ⊂ TM` and extraction of their
//! integrable part.
//!
//! Exact mode handles systems whose constraints are affine in the
//! velocities: the base projection is computed by elimination and the
//! iteration `E ← E ∩ T(τ(E))` runs on constraint lists. Any other system
//! gets a pointwise diagnostic instead.

use crate::affine::{eliminate, split_affine, AffineRow};
use crate::error::{Error, Result};
use crate::expr::{derivative, normalize_constraint, simplify, Expression, TapeSet};
use crate::geometry::velocity_name;
use crate::linalg::{self, Mat};
use crate::morse::{Ambient, ImplicitSystem};
use crate::report::{point_value, Section, ToSection};
use crate::sampling::{halton_cloud, sample_zero_set, SampleBox, DEFAULT_SEED};

/// Coordinates of TM: positions followed by their velocities.
pub fn tangent_bundle_vars(x: &[String]) -> Vec<String> {
    let vel: Vec<String> = x.iter().map(|v| velocity_name(v)).collect();
    [x.to_vec(), vel].concat()
}

/// A velocity-affine implicit differential equation.
#[derive(Clone, Debug)]
pub struct AffineIde {
    pub vars: Vec<String>,
    pub velocities: Vec<String>,
    /// Constraints on positions only.
    pub base: Vec<Expression>,
    /// Constraints involving velocities, each affine in them.
    pub rows: Vec<Expression>,
}

impl AffineIde {
    /// Split the constraints of a system on TM into base constraints and
    /// velocity rows. Fails when some constraint is not affine in the
    /// velocities.
    pub fn new(vars: Vec<String>, constraints: &[Expression]) -> Result<AffineIde> {
        let velocities: Vec<String> = vars.iter().map(|v| velocity_name(v)).collect();
        let all = [vars.clone(), velocities.clone()].concat();
        let mut base = Vec::new();
        let mut rows = Vec::new();
        for c in constraints {
            if let Some(v) = c.free_vars().iter().find(|v| !all.contains(v)) {
                return Err(Error::UnexpectedVariable(v.clone()));
            }
            if !c.depends_on_any(&velocities) {
                base.push(c.clone());
            } else if split_affine(c, &velocities).is_some() {
                rows.push(c.clone());
            } else {
                return Err(Error::Unsupported(format!(
                    "constraint `{c}` is not affine in the velocities"
                )));
            }
        }
        Ok(AffineIde {
            vars,
            velocities,
            base,
            rows,
        })
    }

    pub fn from_system(sys: &ImplicitSystem) -> Result<AffineIde> {
        let Ambient::Tangent(m) = sys.ambient else {
            return Err(Error::Unsupported("expected a system on a tangent bundle".into()));
        };
        if !sys.hidden.is_empty() {
            return Err(Error::Unsupported("hidden coordinates in an IDE".into()));
        }
        AffineIde::new(sys.vars[..m].to_vec(), &sys.constraints)
    }

    pub fn tm_vars(&self) -> Vec<String> {
        [self.vars.clone(), self.velocities.clone()].concat()
    }

    pub fn constraints(&self) -> Vec<Expression> {
        [self.base.clone(), self.rows.clone()].concat()
    }

    pub fn to_system(&self, label: &str) -> ImplicitSystem {
        ImplicitSystem::new(label, Ambient::Tangent(self.vars.len()), self.tm_vars(), self.constraints())
    }
}

/// Result of eliminating the velocities.
#[derive(Clone, Debug)]
pub struct BaseProjection {
    /// Base constraints of the input plus the solvability conditions.
    pub constraints: Vec<Expression>,
    /// Only the solvability conditions.
    pub conditions: Vec<Expression>,
    pub rank: usize,
    pub stratified: bool,
    /// Some condition is a nonzero constant: the projection is empty.
    pub inconsistent: bool,
}

fn push_unique(out: &mut Vec<Expression>, e: Expression) {
    if !e.is_zero() && !out.iter().any(|o| o.to_string() == e.to_string()) {
        out.push(e);
    }
}

/// Constraints of `C = τ(E)`. `samples` are points of the region of M on
/// which pivots must not vanish, ordered like `e.vars`.
pub fn project_to_base(e: &AffineIde, samples: &[Vec<f64>], tol: f64) -> BaseProjection {
    let rows: Vec<AffineRow> = e
        .rows
        .iter()
        .map(|r| split_affine(r, &e.velocities).expect("rows are affine by construction"))
        .collect();
    let el = eliminate(rows, &e.vars, samples, tol);
    let inconsistent = el.inconsistent();
    let mut constraints = Vec::new();
    for b in &e.base {
        push_unique(&mut constraints, normalize_constraint(b));
    }
    let mut conditions = Vec::new();
    for c in &el.conditions {
        let c = normalize_constraint(c);
        push_unique(&mut conditions, c.clone());
        push_unique(&mut constraints, c);
    }
    BaseProjection {
        constraints,
        conditions,
        rank: el.rank(),
        stratified: el.stratified,
        inconsistent,
    }
}

/// `g = 0` together with `⟨dg, xd⟩ = 0` for each base constraint `g`.
pub fn tangent_constraints(constraints: &[Expression], vars: &[String]) -> Vec<Expression> {
    let mut out = Vec::new();
    for g in constraints {
        push_unique(&mut out, g.clone());
        let terms = vars
            .iter()
            .map(|v| derivative(g, v) * Expression::var(&velocity_name(v)));
        push_unique(&mut out, normalize_constraint(&simplify(&Expression::sum(terms))));
    }
    out
}

#[derive(Clone, Debug)]
pub struct IntegrabilityOptions {
    pub max_iter: usize,
    /// Zero-set samples used for redundancy tests.
    pub samples: usize,
    pub bbox: SampleBox,
    pub seed: u64,
    /// Redundancy threshold: `max |residual| < tol·(1 + scale)`.
    pub tol: f64,
    pub tol_rank: f64,
}

impl Default for IntegrabilityOptions {
    fn default() -> Self {
        IntegrabilityOptions {
            max_iter: 10,
            samples: 200,
            bbox: SampleBox::default(),
            seed: DEFAULT_SEED,
            tol: 1e-9,
            tol_rank: 1e-8,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Iteration {
    pub e: Vec<Expression>,
    pub c: Vec<Expression>,
    /// Constraints added to form the next E.
    pub added: Vec<Expression>,
    pub e_dim: Option<usize>,
    pub c_dim: Option<usize>,
    pub samples: usize,
    pub stratified: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outcome {
    Stabilized,
    /// The sampled zero set became empty.
    Empty,
    MaxIterExceeded,
}

#[derive(Clone, Debug)]
pub struct AlgorithmTrace {
    pub vars: Vec<String>,
    pub iterations: Vec<Iteration>,
    pub stabilized_at: Option<usize>,
    pub outcome: Outcome,
}

impl AlgorithmTrace {
    /// Constraints of the last E reached.
    pub fn final_e(&self) -> &[Expression] {
        self.iterations.last().map_or(&[], |it| &it.e)
    }

    pub fn final_c(&self) -> &[Expression] {
        self.iterations.last().map_or(&[], |it| &it.c)
    }
}

fn strings(v: &[Expression]) -> Vec<String> {
    v.iter().map(|e| e.to_string()).collect()
}

impl ToSection for AlgorithmTrace {
    fn to_section(&self) -> Section {
        let mut s = Section::new()
            .with(
                "outcome",
                match self.outcome {
                    Outcome::Stabilized => "stabilized",
                    Outcome::Empty => "no integrable part on sampled region",
                    Outcome::MaxIterExceeded => "max-iter exceeded",
                },
            )
            .with("stabilized-at", self.stabilized_at);
        let its: Vec<Section> = self
            .iterations
            .iter()
            .enumerate()
            .map(|(k, it)| {
                Section::new()
                    .with("k", k)
                    .with("E", strings(&it.e))
                    .with("C", strings(&it.c))
                    .with("added", strings(&it.added))
                    .with("dim-E", it.e_dim)
                    .with("dim-C", it.c_dim)
                    .with("samples", it.samples)
                    .with("stratified", it.stratified)
            })
            .collect();
        s.push("iterations", its);
        s.push("final-E", strings(self.final_e()));
        s
    }
}

fn jacobian_rank(set: &TapeSet, x: &[f64], cols: std::ops::Range<usize>, tol_rank: f64) -> Option<usize> {
    let jac = set.jacobian(x).ok()?;
    let m = Mat::from_fn(jac.len(), cols.len(), |i, j| jac[i][cols.start + j]);
    Some(linalg::numerical_rank(&m, tol_rank))
}

/// The iteration `E^{k+1} = E^k ∩ T C^k`, `C^k = τ(E^k)`, run until no
/// candidate constraint is new on the sampled zero set of `E^k`.
pub fn run_integrability(e: &AffineIde, opts: &IntegrabilityOptions) -> Result<AlgorithmTrace> {
    let m = e.vars.len();
    let tm = e.tm_vars();
    let mut current: Vec<Expression> = Vec::new();
    for c in e.constraints() {
        push_unique(&mut current, c);
    }
    let mut trace = AlgorithmTrace {
        vars: tm.clone(),
        iterations: Vec::new(),
        stabilized_at: None,
        outcome: Outcome::MaxIterExceeded,
    };
    for k in 0..=opts.max_iter {
        let set = TapeSet::compile(&current, &tm)?;
        let pts = if current.is_empty() {
            halton_cloud(2 * m, opts.samples, opts.bbox, opts.seed)
        } else {
            sample_zero_set(&set, opts.samples, opts.bbox, opts.seed.wrapping_add(k as u64), 1e-12)
        };
        let ide_k = AffineIde::new(e.vars.clone(), &current)?;
        if pts.is_empty() {
            trace.iterations.push(Iteration {
                e: current.clone(),
                c: Vec::new(),
                added: Vec::new(),
                e_dim: None,
                c_dim: None,
                samples: 0,
                stratified: false,
            });
            trace.outcome = Outcome::Empty;
            return Ok(trace);
        }
        let base_samples: Vec<Vec<f64>> = pts.iter().map(|x| x[..m].to_vec()).collect();
        let proj = project_to_base(&ide_k, &base_samples, opts.tol);
        let e_dim = jacobian_rank(&set, &pts[0], 0..2 * m, opts.tol_rank).map(|r| 2 * m - r);
        let c_dim = if proj.constraints.is_empty() {
            Some(m)
        } else {
            let cset = TapeSet::compile(&proj.constraints, &e.vars)?;
            jacobian_rank(&cset, &base_samples[0], 0..m, opts.tol_rank).map(|r| m - r)
        };
        let mut it = Iteration {
            e: current.clone(),
            c: proj.constraints.clone(),
            added: Vec::new(),
            e_dim,
            c_dim,
            samples: pts.len(),
            stratified: proj.stratified,
        };
        if proj.inconsistent {
            trace.iterations.push(it);
            trace.outcome = Outcome::Empty;
            return Ok(trace);
        }
        let scale = pts.iter().flatten().fold(0.0f64, |a, v| a.max(v.abs()));
        let threshold = opts.tol * (1.0 + scale);
        for cand in tangent_constraints(&proj.constraints, &e.vars) {
            if current.iter().any(|c| c.to_string() == cand.to_string()) {
                continue;
            }
            let tape = TapeSet::compile(std::slice::from_ref(&cand), &tm)?;
            let worst = pts
                .iter()
                .map(|x| tape.eval(x).map(|r| r[0].abs()).unwrap_or(f64::INFINITY))
                .fold(0.0f64, f64::max);
            if worst >= threshold {
                it.added.push(cand);
            }
        }
        let done = it.added.is_empty();
        for a in &it.added {
            push_unique(&mut current, a.clone());
        }
        trace.iterations.push(it);
        if done {
            trace.stabilized_at = Some(k);
            trace.outcome = Outcome::Stabilized;
            return Ok(trace);
        }
    }
    Ok(trace)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PointStatus {
    Integrable,
    NonIntegrable,
    Indeterminate,
}

#[derive(Clone, Debug)]
pub struct PointwiseOptions {
    /// Singular values of the velocity Jacobian below
    /// `tol_rank·max(1, |J|)` count as zero.
    pub tol_rank: f64,
    /// Singular values between the zero threshold and
    /// `gray·max(1, |J|)` make the point indeterminate.
    pub gray: f64,
    /// Tangency defect threshold, scaled by `1 + |x|`.
    pub tol: f64,
}

impl Default for PointwiseOptions {
    fn default() -> Self {
        PointwiseOptions {
            tol_rank: 1e-8,
            gray: 1e-5,
            tol: 1e-9,
        }
    }
}

#[derive(Clone, Debug)]
pub struct PointwiseReport {
    pub vars: Vec<String>,
    pub statuses: Vec<PointStatus>,
    pub defects: Vec<f64>,
    pub points: Vec<Vec<f64>>,
}

impl PointwiseReport {
    pub fn flagged(&self) -> Vec<usize> {
        self.indices(PointStatus::NonIntegrable)
    }

    pub fn indeterminate(&self) -> Vec<usize> {
        self.indices(PointStatus::Indeterminate)
    }

    fn indices(&self, s: PointStatus) -> Vec<usize> {
        self.statuses
            .iter()
            .enumerate()
            .filter(|(_, &t)| t == s)
            .map(|(i, _)| i)
            .collect()
    }
}

impl ToSection for PointwiseReport {
    fn to_section(&self) -> Section {
        let flagged: Vec<crate::report::Value> = self
            .flagged()
            .into_iter()
            .map(|i| point_value(&self.vars, &self.points[i]))
            .collect();
        Section::new()
            .with("points", self.statuses.len())
            .with("flagged-count", self.flagged().len())
            .with("indeterminate-count", self.indeterminate().len())
            .with("flagged", crate::report::Value::List(flagged))
    }
}

/// Test `E ⊂ T(τ(E))` at points of E.
///
/// At each point, combinations `y` of the constraints whose velocity
/// derivative vanishes define base constraints to first order; the point is
/// flagged when the velocity is not tangent to them, i.e. `yᵀ J_x · xd ≠ 0`.
pub fn pointwise_integrability(
    sys: &ImplicitSystem,
    points: &[Vec<f64>],
    opts: &PointwiseOptions,
) -> Result<PointwiseReport> {
    let Ambient::Tangent(m) = sys.ambient else {
        return Err(Error::Unsupported("expected a system on a tangent bundle".into()));
    };
    let set = sys.tapes()?;
    let mut rep = PointwiseReport {
        vars: sys.all_vars(),
        statuses: Vec::with_capacity(points.len()),
        defects: Vec::with_capacity(points.len()),
        points: points.to_vec(),
    };
    for x in points {
        let (status, defect) = match set.jacobian(x) {
            Err(_) => (PointStatus::Indeterminate, f64::NAN),
            Ok(rows) => classify_point(&rows, x, m, opts),
        };
        rep.statuses.push(status);
        rep.defects.push(defect);
    }
    Ok(rep)
}

fn classify_point(rows: &[Vec<f64>], x: &[f64], m: usize, opts: &PointwiseOptions) -> (PointStatus, f64) {
    let r = rows.len();
    let jx = Mat::from_fn(r, m, |i, j| rows[i][j]);
    let jv = Mat::from_fn(r, m, |i, j| rows[i][m + j]);
    let scale = Mat::from_fn(r, 2 * m, |i, j| rows[i][j]).norm().max(1.0);
    let sv = linalg::singular_values(&jv);
    let zero = opts.tol_rank * scale;
    let gray = opts.gray * scale;
    if sv.iter().any(|&s| s > zero && s < gray) {
        return (PointStatus::Indeterminate, f64::NAN);
    }
    let y = linalg::nullspace(&jv.transpose(), zero);
    if y.ncols() == 0 {
        return (PointStatus::Integrable, 0.0);
    }
    let xd = nalgebra::DVector::from_iterator(m, x[m..2 * m].iter().copied());
    let g = y.transpose() * &jx;
    let defect = (g * xd).amax();
    let size = x.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if defect > opts.tol * (1.0 + size) {
        (PointStatus::NonIntegrable, defect)
    } else {
        (PointStatus::Integrable, defect)
    }
}
