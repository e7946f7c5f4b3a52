//! Verification of a given one-form, with a fallback search for the base
//! locus on which it solves the HJ conditions.

use super::search::{fit_polynomial, locus_points, monomials};
use super::{closedness_residual, critical_samples, gamma_relatedness_residual, OneForm};
use crate::error::Result;
use crate::expr::{normalize_constraint, Expression, Tape};
use crate::morse::MorseFamily;
use crate::report::{Diagnostics, Section, ToSection};
use crate::sampling::{halton_cloud, SampleBox, DEFAULT_SEED};

#[derive(Clone, Debug)]
pub struct VerifyOptions {
    pub samples: usize,
    pub bbox: SampleBox,
    pub seed: u64,
    pub tol: f64,
    pub locus_degree: usize,
    pub max_loci: usize,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            samples: 40,
            bbox: SampleBox::default(),
            seed: DEFAULT_SEED,
            tol: 1e-9,
            locus_degree: 4,
            max_loci: 6,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Verification {
    pub closedness: f64,
    pub global: Diagnostics,
    pub infeasible: usize,
    pub loci_tried: Vec<String>,
    /// Locus of Q on which the conditions hold, when they fail globally.
    pub locus: Option<Expression>,
    pub on_locus: Option<Diagnostics>,
    pub passed: bool,
}

impl Verification {
    pub fn holds_globally(&self) -> bool {
        self.passed && self.locus.is_none()
    }
}

impl ToSection for Verification {
    fn to_section(&self) -> Section {
        let mut s = Section::new()
            .with("passed", self.passed)
            .with("closedness", self.closedness)
            .with("closed", self.closedness < self.global.tol)
            .with("infeasible-samples", self.infeasible)
            .with("global", self.global.to_section())
            .with("loci-tried", self.loci_tried.clone())
            .with("locus", self.locus.as_ref().map(|l| l.to_string()));
        if let Some(d) = &self.on_locus {
            s.push("on-locus", d.to_section());
        }
        s
    }
}

/// Signed tangency components `Σ_j ∂γ_j/∂q^i ∂F/∂p_j + ∂F/∂q^i` at `(q, λ)`.
fn tangency(mf: &MorseFamily, f: &Tape, g: &OneForm, x: &[f64]) -> Result<Vec<f64>> {
    let n = mf.space().n();
    let (q, lam) = x.split_at(n);
    let p = g.eval(q)?;
    let gf = f.gradient(&[q, &p, lam].concat())?;
    let jg = g.jacobian(q)?;
    Ok((0..n)
        .map(|i| (0..n).map(|j| jg[j][i] * gf[n + j]).sum::<f64>() + gf[i])
        .collect())
}

/// γ-relatedness of `g` on a Halton cloud over Q. When it fails, each
/// tangency component is fitted by a polynomial in `q`; the normalized
/// fits are tried in turn as loci, shortest first.
pub fn verify_oneform(mf: &MorseFamily, g: &OneForm, opts: &VerifyOptions) -> Result<Verification> {
    let n = mf.space().n();
    let qs = halton_cloud(n, opts.samples, opts.bbox, opts.seed);
    let closedness = closedness_residual(g, &qs)?;
    let crit = critical_samples(mf, g, &qs, opts.bbox)?;
    let global = gamma_relatedness_residual(mf, g, &crit.points, opts.tol)?;
    let closed = closedness < opts.tol;
    let mut out = Verification {
        closedness,
        passed: closed && global.passed && crit.infeasible.is_empty(),
        global,
        infeasible: crit.infeasible.len(),
        loci_tried: Vec::new(),
        locus: None,
        on_locus: None,
    };
    if out.passed || !closed {
        return Ok(out);
    }

    let q = mf.space().q();
    let count = (2 * monomials(n, 0, opts.locus_degree).len()).max(opts.samples);
    let fit_qs = halton_cloud(n, count, opts.bbox, opts.seed.wrapping_add(2));
    let fit_crit = critical_samples(mf, g, &fit_qs, opts.bbox)?;
    let f = Tape::compile(mf.function(), &mf.vars())?;
    let mut pts = Vec::new();
    let mut comps = Vec::new();
    for x in &fit_crit.points {
        if let Ok(r) = tangency(mf, &f, g, x) {
            pts.push(x[..n].to_vec());
            comps.push(r);
        }
    }
    let mut loci: Vec<Expression> = Vec::new();
    for i in 0..n {
        let vals: Vec<f64> = comps.iter().map(|r| r[i]).collect();
        if vals.iter().all(|v| v.abs() < opts.tol) {
            continue;
        }
        if let Some(p) = fit_polynomial(&q, &pts, &vals, opts.locus_degree) {
            let l = normalize_constraint(&p);
            if l.as_constant().is_none() && !loci.iter().any(|o| o.to_string() == l.to_string()) {
                loci.push(l);
            }
        }
    }
    loci.sort_by_key(|l| (l.free_vars().len(), l.to_string().len()));
    loci.truncate(opts.max_loci);

    for (i, l) in loci.iter().enumerate() {
        out.loci_tried.push(l.to_string());
        let on = locus_points(l, &q, opts.samples, opts.bbox, opts.seed.wrapping_add(10 + i as u64))?;
        if on.is_empty() {
            continue;
        }
        let crit = critical_samples(mf, g, &on, opts.bbox)?;
        let d = gamma_relatedness_residual(mf, g, &crit.points, opts.tol)?;
        if d.passed && crit.infeasible.is_empty() {
            out.locus = Some(l.clone());
            out.on_locus = Some(d);
            out.passed = true;
            break;
        }
    }
    Ok(out)
}
