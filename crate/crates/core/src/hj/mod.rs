//! Hamilton-Jacobi theory for explicit and implicit Hamiltonian systems.
//!
//! Every check here is a residual evaluated at sample points. Composite
//! quantities such as `F(q, γ(q), λ)` are built symbolically and
//! differentiated by the tape, while the tangency form of the same
//! condition is assembled from separate jets so the two stay independent.

mod complete;
mod search;
mod verify;

pub use complete::{complete_solution_check, CompleteOptions, CompleteReport, CompleteSolution};
pub use search::{search_oneform, Candidate, SearchOptions, SearchResult};
pub use verify::{verify_oneform, Verification, VerifyOptions};

use crate::error::{Error, Result};
use crate::expr::{derivative, simplify, substitute, Expression, Tape, TapeSet};
use crate::geometry::PhaseSpace;
use crate::morse::{fiber_grid, Base, FiberOptions, ImplicitSystem, MorseFamily};
use crate::report::{Diagnostics, Section};
use crate::sampling::SampleBox;
use std::collections::HashMap;

/// A one-form `γ = γ_i(q) dq^i` on Q.
#[derive(Clone, Debug)]
pub struct OneForm {
    space: PhaseSpace,
    comps: Vec<Expression>,
    tapes: TapeSet,
}

impl OneForm {
    pub fn new(space: PhaseSpace, comps: Vec<Expression>) -> Result<Self> {
        if comps.len() != space.n() {
            return Err(Error::DimensionMismatch {
                expected: space.n(),
                got: comps.len(),
            });
        }
        let q = space.q();
        for c in &comps {
            if let Some(v) = c.free_vars().iter().find(|v| !q.contains(v)) {
                return Err(Error::UnexpectedVariable(v.clone()));
            }
        }
        let tapes = TapeSet::compile(&comps, &q)?;
        Ok(OneForm { space, comps, tapes })
    }

    /// `dW` for a function `W(q)`.
    pub fn exact(space: PhaseSpace, w: &Expression) -> Result<Self> {
        let comps = space.q().iter().map(|v| simplify(&derivative(w, v))).collect();
        Self::new(space, comps)
    }

    pub fn space(&self) -> PhaseSpace {
        self.space
    }

    pub fn components(&self) -> &[Expression] {
        &self.comps
    }

    pub fn eval(&self, q: &[f64]) -> Result<Vec<f64>> {
        Ok(self.tapes.eval(q)?)
    }

    /// `J[j][i] = ∂γ_j/∂q^i`.
    pub fn jacobian(&self, q: &[f64]) -> Result<Vec<Vec<f64>>> {
        Ok(self.tapes.jacobian(q)?)
    }

    /// `p_j ↦ γ_j`, for composing functions on T*Q with γ.
    pub fn momentum_substitution(&self) -> HashMap<String, Expression> {
        self.space.p().into_iter().zip(self.comps.iter().cloned()).collect()
    }

    pub fn component_strings(&self) -> Vec<String> {
        self.comps.iter().map(|c| c.to_string()).collect()
    }
}

/// Maximum of `|∂γ_i/∂q^j − ∂γ_j/∂q^i|` over the samples.
pub fn closedness_residual(g: &OneForm, qs: &[Vec<f64>]) -> Result<f64> {
    let mut worst = 0.0f64;
    for q in qs {
        let j = g.jacobian(q)?;
        for a in 0..j.len() {
            for b in 0..a {
                worst = worst.max((j[a][b] - j[b][a]).abs());
            }
        }
    }
    Ok(worst)
}

/// Gradient of `q ↦ H(q, γ(q))` at each sample.
pub fn classical_hj_residual(h: &Expression, g: &OneForm, qs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let composite = substitute(h, &g.momentum_substitution());
    let q = g.space().q();
    if let Some(v) = composite.free_vars().iter().find(|v| !q.contains(v)) {
        return Err(Error::UnexpectedVariable(v.clone()));
    }
    let tape = Tape::compile(&composite, &q)?;
    qs.iter().map(|x| Ok(tape.gradient(x)?)).collect()
}

/// Points `(q, λ)` of the critical set over `Im γ`.
#[derive(Clone, Debug, Default)]
pub struct CriticalSamples {
    /// `q` followed by `λ`.
    pub points: Vec<Vec<f64>>,
    /// Indices of base samples where no fiber root was found.
    pub infeasible: Vec<usize>,
}

fn fiber_starts(k: usize, bbox: SampleBox) -> Vec<Vec<f64>> {
    if k == 0 {
        vec![Vec::new()]
    } else {
        fiber_grid(k, bbox, 3, 27)
    }
}

/// Solve `∂F/∂λ(q, p, λ) = 0` from a grid of starts, where `p` is given by
/// `momenta(q)`. Every distinct root is kept, so non-isolated fibers are
/// represented by several points.
fn critical_over<M>(mf: &MorseFamily, qs: &[Vec<f64>], bbox: SampleBox, mut momenta: M) -> Result<CriticalSamples>
where
    M: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    let starts = fiber_starts(mf.k(), bbox);
    let opts = FiberOptions::default();
    let mut out = CriticalSamples::default();
    for (i, q) in qs.iter().enumerate() {
        let p = match momenta(q) {
            Ok(p) => p,
            Err(_) => {
                out.infeasible.push(i);
                continue;
            }
        };
        let base = [q.as_slice(), p.as_slice()].concat();
        let sols = mf.solve_fiber(&base, &starts, &opts)?;
        if sols.roots.is_empty() {
            out.infeasible.push(i);
        }
        for r in sols.roots {
            out.points.push([q.as_slice(), r.lam.as_slice()].concat());
        }
    }
    Ok(out)
}

fn require_cotangent(mf: &MorseFamily) -> Result<()> {
    if mf.base() != Base::Cotangent {
        return Err(Error::Unsupported("the dynamics family must live over T*Q".into()));
    }
    Ok(())
}

pub fn critical_samples(mf: &MorseFamily, g: &OneForm, qs: &[Vec<f64>], bbox: SampleBox) -> Result<CriticalSamples> {
    require_cotangent(mf)?;
    critical_over(mf, qs, bbox, |q| g.eval(q))
}

/// Sample-wise residuals of the two equivalent conditions for `X_F` and
/// `γ` to be γ-related.
///
/// The tangency residual is `R_i = Σ_j ∂γ_j/∂q^i ∂F/∂p_j + ∂F/∂q^i`; the
/// differential residual is `|d(F(q, γ(q), λ))|` computed from the composite
/// function. `samples` are `(q, λ)` points.
pub fn gamma_relatedness_residual(
    mf: &MorseFamily,
    g: &OneForm,
    samples: &[Vec<f64>],
    tol: f64,
) -> Result<Diagnostics> {
    require_cotangent(mf)?;
    let space = mf.space();
    let n = space.n();
    let k = mf.k();
    let f_tape = Tape::compile(mf.function(), &mf.vars())?;
    let composite = substitute(mf.function(), &g.momentum_substitution());
    let ql: Vec<String> = [space.q(), mf.fibers().to_vec()].concat();
    let c_tape = Tape::compile(&composite, &ql)?;

    let mut d = Diagnostics::new("gamma-relatedness", tol, ql.clone());
    let mut max_df = 0.0f64;
    let mut max_crit = 0.0f64;
    let mut disagreements = 0usize;
    for x in samples {
        if x.len() != n + k {
            return Err(Error::DimensionMismatch {
                expected: n + k,
                got: x.len(),
            });
        }
        let (q, lam) = x.split_at(n);
        let p = g.eval(q)?;
        let full = [q, &p, lam].concat();
        let gf = f_tape.gradient(&full)?;
        let crit = gf[2 * n..].iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if crit > tol {
            d.rejected += 1;
            continue;
        }
        max_crit = max_crit.max(crit);
        let jg = g.jacobian(q)?;
        let r = (0..n)
            .map(|i| {
                let s: f64 = (0..n).map(|j| jg[j][i] * gf[n + j]).sum();
                (s + gf[i]).abs()
            })
            .fold(0.0f64, f64::max);
        let dc = c_tape.gradient(x)?;
        let df = dc.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        max_df = max_df.max(df);
        if (r < tol) != (df < 10.0 * tol) {
            disagreements += 1;
        }
        d.observe(r, x);
    }
    d.passed = d.samples > 0 && d.max_residual < tol;
    d.details = Section::new()
        .with("max-tangency", d.max_residual)
        .with("max-dF", max_df)
        .with("max-fiber-residual", max_crit)
        .with("conditions-agree", disagreements == 0)
        .with("disagreements", disagreements);
    if d.samples == 0 {
        d.notes.push("no sample on the critical set".into());
    }
    Ok(d)
}

/// The IHJ equation for an exact one-form `dW`: `F(q, ∂W/∂q, λ)` must be
/// constant on the critical set over the sampled region.
pub fn ihj_residual(mf: &MorseFamily, w: &Expression, qs: &[Vec<f64>], bbox: SampleBox, tol: f64) -> Result<Diagnostics> {
    require_cotangent(mf)?;
    let g = OneForm::exact(mf.space(), w)?;
    let crit = critical_over(mf, qs, bbox, |q| g.eval(q))?;
    let space = mf.space();
    let n = space.n();
    let vars = mf.vars();
    let f_tape = Tape::compile(mf.function(), &vars)?;
    let ql: Vec<String> = [space.q(), mf.fibers().to_vec()].concat();
    let mut d = Diagnostics::new("ihj", tol, ql);

    let mut values = Vec::with_capacity(crit.points.len());
    for x in &crit.points {
        let (q, lam) = x.split_at(n);
        let p = g.eval(q)?;
        values.push((f_tape.eval(&[q, &p, lam].concat())?, x.clone()));
    }
    let (lo, hi) = spread(values.iter().map(|(v, _)| *v));
    let mean = if values.is_empty() {
        f64::NAN
    } else {
        values.iter().map(|(v, _)| v).sum::<f64>() / values.len() as f64
    };
    for (v, x) in &values {
        d.observe((v - mean).abs(), x);
    }
    let spread_crit = hi - lo;

    // Second reading: F at fixed λ, ignoring the critical condition.
    let mut spread_all = 0.0f64;
    if mf.k() > 0 {
        for lam in fiber_starts(mf.k(), bbox) {
            let vals: Vec<f64> = qs
                .iter()
                .filter_map(|q| {
                    let p = g.eval(q).ok()?;
                    f_tape.eval(&[q.as_slice(), &p, &lam].concat()).ok()
                })
                .collect();
            let (a, b) = spread(vals.into_iter());
            if b >= a {
                spread_all = spread_all.max(b - a);
            }
        }
    } else {
        spread_all = spread_crit.max(0.0);
    }

    d.rejected = crit.infeasible.len();
    d.max_residual = if values.is_empty() { f64::INFINITY } else { spread_crit };
    d.passed = !values.is_empty() && spread_crit < tol;
    d.details = Section::new()
        .with("value", mean)
        .with("spread-critical", if values.is_empty() { f64::NAN } else { spread_crit })
        .with("spread-all-lambda", spread_all)
        .with("infeasible-samples", crit.infeasible.len());
    if !crit.infeasible.is_empty() {
        d.notes.push(format!("{} base samples have no fiber solution", crit.infeasible.len()));
    }
    Ok(d)
}

fn spread(vals: impl Iterator<Item = f64>) -> (f64, f64) {
    vals.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
}

/// Relatedness check for a Lagrangian submanifold `S ⊂ T*Q` generated by
/// `W(q, μ)`: the gradient in `q` of `F(q, ∂W/∂q(q, μ), λ)` with `μ` and `λ`
/// frozen. `samples` are `(q, μ, λ)` points.
pub fn generalized_relatedness(
    mf: &MorseFamily,
    wf: &MorseFamily,
    samples: &[Vec<f64>],
    tol: f64,
) -> Result<Diagnostics> {
    require_cotangent(mf)?;
    if wf.base() != Base::Configuration {
        return Err(Error::Unsupported("W must be a family over Q".into()));
    }
    let space = mf.space();
    let n = space.n();
    let (kw, kf) = (wf.k(), mf.k());
    let q = space.q();
    let momenta: HashMap<String, Expression> = space
        .p()
        .into_iter()
        .zip(q.iter().map(|v| simplify(&derivative(wf.function(), v))))
        .collect();
    let composite = substitute(mf.function(), &momenta);
    let vars: Vec<String> = [q.clone(), wf.fibers().to_vec(), mf.fibers().to_vec()].concat();
    let c_tape = Tape::compile(&composite, &vars)?;
    let crit_exprs: Vec<Expression> = mf
        .fibers()
        .iter()
        .map(|l| derivative(&composite, l))
        .chain(wf.fibers().iter().map(|m| derivative(wf.function(), m)))
        .collect();
    let crit_tapes = TapeSet::compile(&crit_exprs, &vars)?;

    let mut d = Diagnostics::new("generalized-relatedness", tol, vars.clone());
    let mut morse_ok = true;
    for x in samples {
        if x.len() != n + kw + kf {
            return Err(Error::DimensionMismatch {
                expected: n + kw + kf,
                got: x.len(),
            });
        }
        let crit = crit_tapes.eval(x)?.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if crit > tol {
            d.rejected += 1;
            continue;
        }
        if kw > 0 {
            let wpt: HashMap<String, f64> = wf.vars().into_iter().zip(x[..n + kw].iter().copied()).collect();
            morse_ok &= wf.morse_rank(&wpt, 1e-8)?.maximal;
        }
        let grad = c_tape.gradient(x)?;
        let df = grad[..n].iter().fold(0.0f64, |a, v| a.max(v.abs()));
        d.observe(df, x);
    }
    d.passed = d.samples > 0 && d.max_residual < tol;
    d.details = Section::new().with("generating-family-morse", morse_ok);
    if !morse_ok {
        d.notes.push("W fails the Morse rank condition at some sample".into());
    }
    Ok(d)
}

/// An auxiliary section `σ(q, p) = σ^i ∂/∂q^i + σ_i ∂/∂p_i` of TT*Q → T*Q.
#[derive(Clone, Debug)]
pub struct SectionSigma {
    space: PhaseSpace,
    upper: Vec<Expression>,
    lower: Vec<Expression>,
}

impl SectionSigma {
    pub fn new(space: PhaseSpace, upper: Vec<Expression>, lower: Vec<Expression>) -> Result<Self> {
        let n = space.n();
        for v in [&upper, &lower] {
            if v.len() != n {
                return Err(Error::DimensionMismatch { expected: n, got: v.len() });
            }
        }
        let vars = space.cotangent();
        if let Some(v) = upper
            .iter()
            .chain(&lower)
            .flat_map(|e| e.free_vars())
            .find(|v| !vars.contains(v))
        {
            return Err(Error::UnexpectedVariable(v.clone()));
        }
        Ok(SectionSigma { space, upper, lower })
    }

    fn tapes(&self) -> Result<TapeSet> {
        let all: Vec<Expression> = self.upper.iter().chain(&self.lower).cloned().collect();
        Ok(TapeSet::compile(&all, &self.space.cotangent())?)
    }
}

/// Maximum over samples and `j` of `|σ^i(q,γ) ∂γ_j/∂q^i − σ_j(q,γ)|`.
pub fn sigma_relatedness_residual(s: &SectionSigma, g: &OneForm, qs: &[Vec<f64>]) -> Result<f64> {
    let n = s.space.n();
    let t = s.tapes()?;
    let mut worst = 0.0f64;
    for q in qs {
        let p = g.eval(q)?;
        let sv = t.eval(&[q.as_slice(), &p].concat())?;
        let jg = g.jacobian(q)?;
        for j in 0..n {
            let lhs: f64 = (0..n).map(|i| sv[i] * jg[j][i]).sum();
            worst = worst.max((lhs - sv[n + j]).abs());
        }
    }
    Ok(worst)
}

/// Largest constraint value of `e` at `(q, γ(q), σ(q, γ(q)))`: zero when
/// `Im σ ⊂ E` over the sampled part of `Im γ`.
pub fn sigma_in_e(s: &SectionSigma, g: &OneForm, e: &ImplicitSystem, qs: &[Vec<f64>]) -> Result<f64> {
    if !e.hidden.is_empty() {
        return Err(Error::Unsupported("E has hidden coordinates".into()));
    }
    let t = s.tapes()?;
    let set = TapeSet::compile(&e.constraints, &s.space.tulczyjew())?;
    let mut worst = 0.0f64;
    for q in qs {
        let p = g.eval(q)?;
        let sv = t.eval(&[q.as_slice(), &p].concat())?;
        let x = [q.as_slice(), &p, &sv].concat();
        worst = set.eval(&x)?.iter().fold(worst, |a, v| a.max(v.abs()));
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;
    use crate::geometry::indexed_names;
    use crate::sampling::halton_cloud;

    fn e(s: &str) -> Expression {
        parse(s).unwrap()
    }

    fn form(n: usize, comps: &[&str]) -> OneForm {
        OneForm::new(PhaseSpace::new(n), comps.iter().map(|c| e(c)).collect()).unwrap()
    }

    fn example1() -> MorseFamily {
        MorseFamily::new(
            PhaseSpace::new(3),
            indexed_names("qd", 3),
            e("p1*qd1 + p2*qd2 + p3*qd3 - 1/2*(qd1 + qd2)^2"),
        )
        .unwrap()
    }

    fn example2() -> MorseFamily {
        MorseFamily::new(
            PhaseSpace::new(2),
            indexed_names("qd", 2),
            e("p1*qd1 + p2*qd2 - (1/2*qd1^2 + q2*q1^2)"),
        )
        .unwrap()
    }

    fn cloud(n: usize, count: usize) -> Vec<Vec<f64>> {
        halton_cloud(n, count, SampleBox::default(), 7)
    }

    #[test]
    fn closedness() {
        let qs = cloud(3, 20);
        assert_eq!(closedness_residual(&form(3, &["2", "2", "0"]), &qs).unwrap(), 0.0);
        assert_eq!(closedness_residual(&form(2, &["q2", "0"]), &cloud(2, 5)).unwrap(), 1.0);
        let g = OneForm::exact(PhaseSpace::new(2), &e("sin(q1)*q2^3 + exp(q1*q2)")).unwrap();
        assert!(closedness_residual(&g, &cloud(2, 20)).unwrap() < 1e-12);
    }

    #[test]
    fn classical_residuals() {
        let h = e("1/2*(p1^2 + q1^2)");
        let g = form(1, &["sqrt(2*2 - q1^2)"]);
        let qs: Vec<Vec<f64>> = (0..9).map(|i| vec![-1.6 + 0.4 * i as f64]).collect();
        for r in classical_hj_residual(&h, &g, &qs).unwrap() {
            assert!(r[0].abs() < 1e-12);
        }
        let r = classical_hj_residual(&e("p1"), &form(1, &["q1"]), &qs).unwrap();
        assert!(r.iter().all(|v| (v[0] - 1.0).abs() < 1e-15));
        let r = classical_hj_residual(&e("p1^2 + p1*q1 + 3"), &form(1, &["0"]), &qs).unwrap();
        assert!(r.iter().all(|v| v[0] == 0.0));
    }

    #[test]
    fn example1_constant_form_is_related() {
        let mf = example1();
        let g = form(3, &["1.5", "1.5", "0"]);
        let crit = critical_samples(&mf, &g, &cloud(3, 10), SampleBox::default()).unwrap();
        assert!(crit.infeasible.is_empty());
        assert!(crit.points.len() > 10);
        for x in &crit.points {
            assert!((x[3] + x[4] - 1.5).abs() < 1e-9);
        }
        let d = gamma_relatedness_residual(&mf, &g, &crit.points, 1e-9).unwrap();
        assert!(d.passed, "{d:?}");
        assert_eq!(d.max_residual, 0.0);
    }

    #[test]
    fn example1_linear_form_fails_with_q1_residual() {
        let mf = example1();
        let g = form(3, &["q1", "q1", "0"]);
        let qs = vec![vec![0.7, 0.2, -0.4], vec![-1.3, 1.0, 0.5]];
        let crit = critical_samples(&mf, &g, &qs, SampleBox::default()).unwrap();
        let d = gamma_relatedness_residual(&mf, &g, &crit.points, 1e-9).unwrap();
        assert!(!d.passed);
        assert!((d.max_residual - 1.3).abs() < 1e-9);
    }

    #[test]
    fn example2_related_on_locus_only() {
        let mf = example2();
        let g = form(2, &["q1", "0"]);
        let on: Vec<Vec<f64>> = (0..6).map(|i| vec![0.0, -1.5 + 0.6 * i as f64]).collect();
        let crit = critical_samples(&mf, &g, &on, SampleBox::default()).unwrap();
        let d = gamma_relatedness_residual(&mf, &g, &crit.points, 1e-9).unwrap();
        assert!(d.passed);
        let off = critical_samples(&mf, &g, &[vec![1.0, 1.0]], SampleBox::default()).unwrap();
        let d = gamma_relatedness_residual(&mf, &g, &off.points, 1e-9).unwrap();
        assert!(!d.passed);
    }

    #[test]
    fn off_critical_samples_are_rejected() {
        let d = gamma_relatedness_residual(&example1(), &form(3, &["1", "1", "0"]), &[vec![0.0; 6]], 1e-9).unwrap();
        assert_eq!((d.samples, d.rejected), (0, 1));
        assert!(!d.passed);
    }

    #[test]
    fn k0_relatedness_matches_classical_gradient() {
        let space = PhaseSpace::new(1);
        let h = e("1/2*(p1^2 + q1^2)");
        let mf = MorseFamily::hamiltonian(space, h.clone()).unwrap();
        for g in [form(1, &["sqrt(4 - q1^2)"]), form(1, &["q1^2"]), form(1, &["0.5"])] {
            let qs: Vec<Vec<f64>> = (0..7).map(|i| vec![-1.5 + 0.5 * i as f64]).collect();
            let classical = classical_hj_residual(&h, &g, &qs).unwrap();
            for (q, c) in qs.iter().zip(&classical) {
                let d = gamma_relatedness_residual(&mf, &g, std::slice::from_ref(q), 1e-9).unwrap();
                assert!((d.max_residual - c[0].abs()).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn ihj_examples() {
        let bbox = SampleBox::default();
        let d = ihj_residual(&example1(), &e("1.2*(q1 + q2)"), &cloud(3, 8), bbox, 1e-9).unwrap();
        assert!(d.passed, "{d:?}");
        let Some(crate::report::Value::Num(value)) = d.details.get("value") else { panic!() };
        assert!((value - 0.5 * 1.2 * 1.2).abs() < 1e-12);

        let free = MorseFamily::hamiltonian(PhaseSpace::new(1), e("1/2*p1^2")).unwrap();
        assert!(ihj_residual(&free, &e("0"), &cloud(1, 8), bbox, 1e-9).unwrap().passed);
        assert!(!ihj_residual(&free, &e("q1^2"), &cloud(1, 8), bbox, 1e-9).unwrap().passed);
    }

    #[test]
    fn nonholonomic_family() {
        let mf = MorseFamily::new(
            PhaseSpace::new(3),
            indexed_names("lam", 2),
            e("lam1*(p1 + q2*p3) + lam2*p2"),
        )
        .unwrap();
        let bbox = SampleBox::default();
        let d = ihj_residual(&mf, &e("0"), &cloud(3, 8), bbox, 1e-9).unwrap();
        assert!(d.passed);
        let d = ihj_residual(&mf, &e("q1"), &cloud(3, 8), bbox, 1e-9).unwrap();
        assert!(!d.passed);
        assert_eq!(d.rejected, 8);
    }

    #[test]
    fn generalized_relatedness_cases() {
        let space = PhaseSpace::new(1);
        let free = MorseFamily::hamiltonian(space, e("1/2*p1^2")).unwrap();
        let fiber = MorseFamily::over_configuration(space, vec!["mu1".into()], e("mu1*(q1 - 0.5)")).unwrap();
        let d = generalized_relatedness(&free, &fiber, &[vec![0.5, 1.3], vec![0.5, -0.2]], 1e-9).unwrap();
        assert!(d.passed);
        assert_eq!(d.max_residual, 0.0);

        let lin = MorseFamily::hamiltonian(space, e("p1")).unwrap();
        let bad = MorseFamily::over_configuration(space, vec!["mu1".into()], e("mu1*q1^2")).unwrap();
        let d = generalized_relatedness(&lin, &bad, &[vec![0.0, 0.75]], 1e-9).unwrap();
        assert!((d.max_residual - 1.5).abs() < 1e-12);

        // Trivial fiber: agrees with the exact case.
        let h = MorseFamily::hamiltonian(space, e("1/2*(p1^2 + q1^2)")).unwrap();
        let triv = MorseFamily::over_configuration(space, vec!["mu1".into()], e("1/3*q1^3")).unwrap();
        let g = form(1, &["q1^2"]);
        for q in [-1.0, 0.3, 1.7] {
            let d = generalized_relatedness(&h, &triv, &[vec![q, 0.4]], 1e-9).unwrap();
            let c = classical_hj_residual(&e("1/2*(p1^2 + q1^2)"), &g, &[vec![q]]).unwrap();
            assert!((d.max_residual - c[0][0].abs()).abs() < 1e-12);
        }
    }

    #[test]
    fn sigma_examples() {
        let s3 = PhaseSpace::new(3);
        let sigma = SectionSigma::new(
            s3,
            vec![e("1.5 - q3"), e("q3"), e("1")],
            vec![e("0"), e("0"), e("0")],
        )
        .unwrap();
        let g = form(3, &["1.5", "1.5", "0"]);
        let qs = cloud(3, 12);
        assert_eq!(sigma_relatedness_residual(&sigma, &g, &qs).unwrap(), 0.0);
        let e1 = example1().generate_e().unwrap();
        assert!(sigma_in_e(&sigma, &g, &e1, &qs).unwrap() < 1e-12);

        let s2 = PhaseSpace::new(2);
        let sigma = SectionSigma::new(s2, vec![e("p1"), e("q2")], vec![e("2*q2*q1"), e("q1^2")]).unwrap();
        let g = form(2, &["q1", "0"]);
        let locus: Vec<Vec<f64>> = (0..5).map(|i| vec![0.0, -1.0 + 0.5 * i as f64]).collect();
        assert_eq!(sigma_relatedness_residual(&sigma, &g, &locus).unwrap(), 0.0);
        let e2 = example2().generate_e().unwrap();
        assert!(sigma_in_e(&sigma, &g, &e2, &locus).unwrap() < 1e-12);

        let s1 = PhaseSpace::new(1);
        let sigma = SectionSigma::new(s1, vec![e("1")], vec![e("0")]).unwrap();
        assert_eq!(sigma_relatedness_residual(&sigma, &form(1, &["q1"]), &[vec![0.3]]).unwrap(), 1.0);
    }
}
