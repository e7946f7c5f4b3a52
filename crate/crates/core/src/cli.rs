//! Command-line front end: argument parsing, command dispatch and report
//! assembly. The binary in `src/bin/ihj.rs` only handles I/O.

use crate::error::Error;
use crate::expr::{derivative, Expression, Point, TapeSet};
use crate::geometry::{indexed_names, PhaseSpace};
use crate::hj::{
    closedness_residual, complete_solution_check, critical_samples, gamma_relatedness_residual, ihj_residual,
    search_oneform, sigma_in_e, sigma_relatedness_residual, verify_oneform, CompleteOptions, CompleteSolution,
    OneForm, SearchOptions, SectionSigma, VerifyOptions,
};
use crate::ide::{
    pointwise_integrability, run_integrability, tangent_bundle_vars, AffineIde, IntegrabilityOptions, Outcome,
    PointwiseOptions,
};
use crate::lagrangian::{gotay_nester, pontryagin_family, GotayNesterOptions, LagrangianSystem};
use crate::morse::{dirac_family, lagrangian_closure_check, Ambient, ImplicitSystem, MorseFamily};
use crate::report::{fmt_float, point_value, render, Section, ToSection, Value};
use crate::sampling::{halton_cloud, sample_zero_set};
use crate::sysfile::{parse_system, Dynamics, OneFormSpec, Sampling, SysfileError, SystemFile};
use clap::{Args, Parser, Subcommand};
use sha2::{Digest, Sha256};
use std::path::PathBuf;

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_INPUT: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "ihj", version, about = "Checks for implicit Hamiltonian systems given by Morse families")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Morse rank, Lagrangian closure and one-form checks.
    Check(Common),
    /// Extract the integrable part of an implicit differential equation.
    Integrability(Common),
    /// Verify a one-form or search for solutions of the implicit HJ equation.
    Hj(HjArgs),
    /// Run the Gotay-Nester constraint algorithm on a Lagrangian.
    GotayNester(Common),
    /// Check a complete solution W(qb, q).
    Complete(Common),
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// System file.
    pub file: PathBuf,
    /// Seed for all sampling.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Write the machine-readable report here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Residual tolerance.
    #[arg(long)]
    pub tol: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct HjArgs {
    #[command(flatten)]
    pub common: Common,
    /// Search for γ = dW with polynomial components of this degree.
    #[arg(long)]
    pub search_degree: Option<usize>,
    /// Verify the one-form given in [oneform].
    #[arg(long)]
    pub verify: bool,
}

impl Command {
    pub fn common(&self) -> &Common {
        match self {
            Command::Check(c) | Command::Integrability(c) | Command::GotayNester(c) | Command::Complete(c) => c,
            Command::Hj(h) => &h.common,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Command::Check(_) => "check",
            Command::Integrability(_) => "integrability",
            Command::Hj(_) => "hj",
            Command::GotayNester(_) => "gotay-nester",
            Command::Complete(_) => "complete",
        }
    }
}

/// What to run, independent of where the input came from.
#[derive(Clone, Debug, PartialEq)]
pub enum Task {
    Check,
    Integrability,
    Hj { search_degree: Option<usize>, verify: bool },
    GotayNester,
    Complete,
}

impl Task {
    pub fn name(&self) -> &'static str {
        match self {
            Task::Check => "check",
            Task::Integrability => "integrability",
            Task::Hj { .. } => "hj",
            Task::GotayNester => "gotay-nester",
            Task::Complete => "complete",
        }
    }
}

impl From<&Command> for Task {
    fn from(c: &Command) -> Self {
        match c {
            Command::Check(_) => Task::Check,
            Command::Integrability(_) => Task::Integrability,
            Command::Hj(h) => Task::Hj {
                search_degree: h.search_degree,
                verify: h.verify,
            },
            Command::GotayNester(_) => Task::GotayNester,
            Command::Complete(_) => Task::Complete,
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub tol: Option<f64>,
}

/// Result of a run: the report body and per-check verdicts.
#[derive(Clone, Debug)]
pub struct RunOutput {
    pub body: Section,
    pub verdicts: Vec<(String, bool)>,
    pub notes: Vec<String>,
    pub exit_code: i32,
}

impl RunOutput {
    /// Machine-readable report without timing.
    pub fn render(&self) -> String {
        render(&self.body)
    }

    /// One line per check, for the terminal.
    pub fn summary(&self) -> String {
        let mut out = String::new();
        for (name, ok) in &self.verdicts {
            out.push_str(&format!("{name}: {}\n", if *ok { "pass" } else { "FAIL" }));
        }
        for n in &self.notes {
            out.push_str(&format!("note: {n}\n"));
        }
        out
    }
}

/// An input problem: unparsable file or a missing section.
#[derive(Clone, Debug, PartialEq)]
pub struct InputError(pub String);

impl std::fmt::Display for InputError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<SysfileError> for InputError {
    fn from(e: SysfileError) -> Self {
        InputError(e.to_string())
    }
}

struct Ctx {
    sys: SystemFile,
    s: Sampling,
    checks: Vec<Value>,
    verdicts: Vec<(String, bool)>,
    notes: Vec<String>,
}

impl Ctx {
    fn record(&mut self, name: &str, passed: bool, section: Section) {
        self.verdicts.push((name.to_string(), passed));
        let mut s = Section::new().with("name", name).with("passed", passed);
        for (k, v) in section.entries() {
            if k != "passed" && k != "check" {
                s.push(k, v.clone());
            }
        }
        self.checks.push(s.into());
    }

    fn note(&mut self, n: impl Into<String>) {
        self.notes.push(n.into());
    }

    fn space(&self) -> Result<PhaseSpace, InputError> {
        self.sys
            .space()
            .ok_or_else(|| InputError("this command needs [space] dim".into()))
    }

    /// The dynamics as a Morse family over T*Q, when it is one.
    fn family(&self) -> Result<Option<MorseFamily>, Error> {
        let Some(space) = self.sys.space() else { return Ok(None) };
        Ok(match &self.sys.dynamics {
            Dynamics::Morse { fibers, f } => Some(MorseFamily::new(space, fibers.clone(), f.clone())?),
            Dynamics::Hamiltonian { h, constraints } if constraints.is_empty() => {
                Some(MorseFamily::hamiltonian(space, h.clone())?)
            }
            Dynamics::Hamiltonian { h, constraints } => Some(dirac_family(space, h, constraints)?),
            Dynamics::Lagrangian { l } => Some(pontryagin_family(&LagrangianSystem::new(space, l.clone())?)?),
            Dynamics::Ide { .. } => None,
        })
    }

    fn oneform(&self) -> Result<Option<OneForm>, Error> {
        let Some(space) = self.sys.space() else { return Ok(None) };
        Ok(match &self.sys.oneform {
            Some(OneFormSpec::Components(c)) => Some(OneForm::new(space, c.clone())?),
            Some(OneFormSpec::Potential(w)) => Some(OneForm::exact(space, w)?),
            None => None,
        })
    }
}

fn digest(text: &str) -> String {
    Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

/// Parse `text` and run `task`. Input problems are returned as errors;
/// failures inside a check are part of the report.
pub fn run_text(task: &Task, text: &str, ov: &Overrides) -> Result<RunOutput, InputError> {
    let sys = parse_system(text)?;
    let mut s = sys.sampling.clone();
    if let Some(seed) = ov.seed {
        s.seed = seed;
    }
    if let Some(tol) = ov.tol {
        if !(tol > 0.0) {
            return Err(InputError("--tol must be positive".into()));
        }
        s.tol = tol;
    }
    let mut ctx = Ctx {
        sys,
        s,
        checks: Vec::new(),
        verdicts: Vec::new(),
        notes: Vec::new(),
    };
    let mut extra = Section::new();
    let res = match task {
        Task::Check => cmd_check(&mut ctx),
        Task::Integrability => cmd_integrability(&mut ctx, &mut extra),
        Task::Hj { search_degree, verify } => cmd_hj(&mut ctx, *search_degree, *verify),
        Task::GotayNester => cmd_gotay_nester(&mut ctx, &mut extra),
        Task::Complete => cmd_complete(&mut ctx),
    };
    match res {
        Ok(()) => {}
        Err(Failure::Input(e)) => return Err(e),
        Err(Failure::Core(e)) => {
            ctx.verdicts.push(("error".into(), false));
            ctx.note(format!("error: {e}"));
        }
    }

    let s = &ctx.s;
    let passed = !ctx.verdicts.is_empty() && ctx.verdicts.iter().all(|(_, ok)| *ok);
    let mut body = Section::new()
        .with("command", task.name())
        .with("input-sha256", digest(text))
        .with("dynamics", ctx.sys.dynamics.kind())
        .with("dim", ctx.sys.dim.map(|d| d as i64))
        .with("seed", s.seed as i64)
        .with(
            "sampling",
            Section::new()
                .with("lo", s.bbox.lo)
                .with("hi", s.bbox.hi)
                .with("count", s.count),
        )
        .with(
            "tolerances",
            Section::new()
                .with("tol", s.tol)
                .with("tol-crit", s.tol_crit)
                .with("tol-rank", s.tol_rank)
                .with("fd-h", s.fd_h),
        );
    if !ctx.sys.params.is_empty() {
        let mut p = Section::new();
        for (k, v) in &ctx.sys.params {
            p.push(k, *v);
        }
        body.push("params", p);
    }
    body.push("checks", Value::List(ctx.checks));
    for (k, v) in extra.entries() {
        body.push(k, v.clone());
    }
    if !ctx.notes.is_empty() {
        body.push("notes", ctx.notes.clone());
    }
    body.push("passed", passed);
    Ok(RunOutput {
        body,
        verdicts: ctx.verdicts,
        notes: ctx.notes,
        exit_code: if passed { EXIT_PASS } else { EXIT_FAIL },
    })
}

enum Failure {
    Input(InputError),
    Core(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

impl From<InputError> for Failure {
    fn from(e: InputError) -> Self {
        Failure::Input(e)
    }
}

fn input<T>(msg: &str) -> Result<T, Failure> {
    Err(Failure::Input(InputError(msg.into())))
}

fn to_point(vars: &[String], x: &[f64]) -> Point {
    vars.iter().cloned().zip(x.iter().copied()).collect()
}

fn morse_rank_section(ctx: &Ctx, mf: &MorseFamily) -> Result<(bool, Section), Error> {
    let s = &ctx.s;
    let pts = mf.sample_critical_points(s.count, s.bbox, s.seed, s.tol_crit)?;
    let vars = mf.vars();
    let mut deficient = 0usize;
    let mut min_sv = f64::INFINITY;
    let mut worst: Option<Vec<f64>> = None;
    for x in &pts {
        let r = mf.morse_rank_check(&to_point(&vars, x), s.tol_rank, s.tol_crit)?;
        let sv = r.singular_values.iter().copied().fold(f64::INFINITY, f64::min);
        if !r.maximal {
            deficient += 1;
            worst.get_or_insert_with(|| x.clone());
        }
        if sv < min_sv {
            min_sv = sv;
        }
    }
    let passed = !pts.is_empty() && deficient == 0;
    let mut sec = Section::new()
        .with("samples", pts.len())
        .with("rank-deficient", deficient)
        .with("min-singular-value", min_sv);
    if let Some(x) = worst {
        sec.push("worst-point", point_value(&vars, &x));
    }
    Ok((passed, sec))
}

fn cmd_check(ctx: &mut Ctx) -> Result<(), Failure> {
    let s = ctx.s.clone();
    let family = ctx.family()?;
    if let Some(mf) = &family {
        let (ok, sec) = morse_rank_section(ctx, mf)?;
        ctx.record("morse-rank", ok, sec);
        let e = mf.generate_e()?;
        let pts = e.sample(s.count, s.bbox, s.seed.wrapping_add(1), 1e-12)?;
        let rep = lagrangian_closure_check(&e, &pts, s.tol)?;
        let mut sec = Section::new().with("E", e.constraint_strings());
        for (k, v) in rep.to_section().entries() {
            sec.push(k, v.clone());
        }
        ctx.record("lagrangian-closure", rep.passed, sec);
    } else {
        ctx.note("no Morse family: the dynamics is a bare implicit differential equation");
    }

    if let Some(g) = ctx.oneform()? {
        let space = ctx.space()?;
        let qs = halton_cloud(space.n(), s.count, s.bbox, s.seed.wrapping_add(3));
        let c = closedness_residual(&g, &qs)?;
        ctx.record(
            "closedness",
            c < s.tol,
            Section::new()
                .with("gamma", g.component_strings())
                .with("max-residual", c),
        );
        if let Some(mf) = &family {
            let crit = critical_samples(mf, &g, &qs, s.bbox)?;
            let d = gamma_relatedness_residual(mf, &g, &crit.points, s.tol)?;
            let ok = d.passed && crit.infeasible.is_empty();
            let mut sec = d.to_section();
            sec.push("infeasible-samples", crit.infeasible.len());
            ctx.record("gamma-relatedness", ok, sec);
            if let Some(OneFormSpec::Potential(w)) = &ctx.sys.oneform {
                let d = ihj_residual(mf, w, &qs, s.bbox, s.tol)?;
                ctx.record("ihj", d.passed, d.to_section());
            }
        }
        if let Some(sig) = &ctx.sys.sigma {
            let sigma = SectionSigma::new(space, sig.upper.clone(), sig.lower.clone())?;
            let r = sigma_relatedness_residual(&sigma, &g, &qs)?;
            ctx.record("sigma-relatedness", r < s.tol, Section::new().with("max-residual", r));
            if let Some(mf) = &family {
                let e = mf.generate_e()?;
                if e.hidden.is_empty() {
                    let r = sigma_in_e(&sigma, &g, &e, &qs)?;
                    ctx.record("sigma-in-E", r < s.tol, Section::new().with("max-residual", r));
                } else {
                    ctx.note("sigma-in-E skipped: E keeps hidden fiber coordinates");
                }
            }
        }
    } else if ctx.sys.sigma.is_some() {
        ctx.note("[sigma] ignored without [oneform]");
    }
    if ctx.verdicts.is_empty() {
        ctx.record("applicable-checks", true, Section::new().with("count", 0usize));
    }
    Ok(())
}

/// The implicit system the integrability command works on.
fn ide_system(ctx: &Ctx) -> Result<ImplicitSystem, Failure> {
    match &ctx.sys.dynamics {
        Dynamics::Ide { vars, constraints } => Ok(ImplicitSystem::new(
            "E",
            Ambient::Tangent(vars.len()),
            tangent_bundle_vars(vars),
            constraints.clone(),
        )),
        _ => {
            let mf = ctx.family()?.expect("non-ide dynamics has a family");
            let e = mf.generate_e()?;
            if !e.hidden.is_empty() {
                return Err(Error::Unsupported(format!(
                    "E keeps hidden fiber coordinates {:?}; give the system as [ide]",
                    e.hidden
                ))
                .into());
            }
            let vars = mf.space().cotangent();
            Ok(ImplicitSystem::new(
                "E",
                Ambient::Tangent(vars.len()),
                tangent_bundle_vars(&vars),
                e.constraints,
            ))
        }
    }
}

/// Points of E where the velocity Jacobian of the constraints drops rank:
/// zero set of `φ = 0`, `yᵀ ∂φ/∂v = 0`, `|y|² = 1` with hidden `y`.
fn singular_points(sys: &ImplicitSystem, m: usize, ctx: &Ctx) -> Result<Vec<Vec<f64>>, Error> {
    let vel = &sys.vars[m..];
    let ys = indexed_names("__y", sys.constraints.len());
    let mut eqs = sys.constraints.clone();
    for v in vel {
        let terms = sys
            .constraints
            .iter()
            .zip(&ys)
            .map(|(c, y)| Expression::var(y) * derivative(c, v));
        eqs.push(Expression::sum(terms));
    }
    let norm = Expression::sum(ys.iter().map(|y| Expression::var(y).powi(2)));
    eqs.push(norm - Expression::num(1.0));
    let vars = [sys.vars.clone(), ys].concat();
    let set = TapeSet::compile(&eqs, &vars)?;
    let s = &ctx.s;
    Ok(sample_zero_set(&set, s.count, s.bbox, s.seed.wrapping_add(5), 1e-12)
        .into_iter()
        .map(|x| x[..sys.vars.len()].to_vec())
        .collect())
}

fn cmd_integrability(ctx: &mut Ctx, extra: &mut Section) -> Result<(), Failure> {
    let s = ctx.s.clone();
    let sys = ide_system(ctx)?;
    let Ambient::Tangent(m) = sys.ambient else { unreachable!() };
    match AffineIde::new(sys.vars[..m].to_vec(), &sys.constraints) {
        Ok(e) => {
            let opts = IntegrabilityOptions {
                bbox: s.bbox,
                seed: s.seed,
                tol: s.tol,
                tol_rank: s.tol_rank,
                ..IntegrabilityOptions::default()
            };
            let trace = run_integrability(&e, &opts)?;
            let ok = trace.outcome == Outcome::Stabilized;
            let sec = Section::new()
                .with("mode", "exact")
                .with("stabilized-at", trace.stabilized_at.map(|k| k as i64))
                .with("final-constraints", trace.final_e().iter().map(|c| c.to_string()).collect::<Vec<_>>())
                .with("base-constraints", trace.final_c().iter().map(|c| c.to_string()).collect::<Vec<_>>());
            ctx.record("integrability", ok, sec);
            extra.push("trace", trace.to_section());
        }
        Err(Error::Unsupported(why)) => {
            ctx.note(format!("pointwise mode: {why}"));
            let mut pts = sys.sample(s.count, s.bbox, s.seed, 1e-12)?;
            let generic = pts.len();
            pts.extend(singular_points(&sys, m, ctx)?);
            let opts = PointwiseOptions {
                tol_rank: s.tol_rank,
                tol: s.tol,
                ..PointwiseOptions::default()
            };
            let rep = pointwise_integrability(&sys, &pts, &opts)?;
            let mut sec = Section::new()
                .with("mode", "pointwise")
                .with("generic-samples", generic)
                .with("singular-samples", pts.len() - generic);
            for (k, v) in rep.to_section().entries() {
                sec.push(k, v.clone());
            }
            ctx.record("integrability", rep.flagged().is_empty(), sec);
        }
        Err(e) => return Err(e.into()),
    }
    Ok(())
}

fn cmd_hj(ctx: &mut Ctx, search_degree: Option<usize>, verify: bool) -> Result<(), Failure> {
    let s = ctx.s.clone();
    let Some(mf) = ctx.family()? else {
        return input("hj needs a dynamics given by a Morse family, Hamiltonian or Lagrangian");
    };
    let verify = verify || (search_degree.is_none() && ctx.sys.oneform.is_some());
    let search_degree = search_degree.or(if verify { None } else { Some(0) });
    if verify {
        let Some(g) = ctx.oneform()? else {
            return input("hj --verify needs [oneform]");
        };
        let opts = VerifyOptions {
            samples: s.count,
            bbox: s.bbox,
            seed: s.seed,
            tol: s.tol,
            ..VerifyOptions::default()
        };
        let v = verify_oneform(&mf, &g, &opts)?;
        let mut sec = Section::new().with("gamma", g.component_strings());
        for (k, val) in v.to_section().entries() {
            if k != "passed" {
                sec.push(k, val.clone());
            }
        }
        if let Some(l) = &v.locus {
            ctx.note(format!("one-form solves the HJ conditions only on the locus {l} = 0"));
        }
        ctx.record("verify", v.passed, sec);
        if let Some(OneFormSpec::Potential(w)) = &ctx.sys.oneform {
            let qs = halton_cloud(mf.space().n(), s.count, s.bbox, s.seed.wrapping_add(3));
            let d = ihj_residual(&mf, w, &qs, s.bbox, s.tol)?;
            ctx.record("ihj", d.passed, d.to_section());
        }
    }
    if let Some(degree) = search_degree {
        let opts = SearchOptions {
            degree,
            bbox: s.bbox,
            seed: s.seed,
            tol: s.tol,
            ..SearchOptions::default()
        };
        let r = search_oneform(&mf, &opts)?;
        let ok = r.candidates.iter().any(|c| c.verified);
        if r.candidates.is_empty() {
            ctx.note(format!(
                "no one-form of degree {degree} found; best residual {}",
                fmt_float(r.best_residual)
            ));
        }
        let mut sec = Section::new().with("degree", degree);
        for (k, v) in r.to_section().entries() {
            sec.push(k, v.clone());
        }
        ctx.record("search", ok, sec);
    }
    Ok(())
}

fn cmd_gotay_nester(ctx: &mut Ctx, extra: &mut Section) -> Result<(), Failure> {
    let s = ctx.s.clone();
    let Dynamics::Lagrangian { l } = &ctx.sys.dynamics else {
        return input("gotay-nester needs [lagrangian]");
    };
    let ls = LagrangianSystem::new(ctx.space()?, l.clone())?;
    let opts = GotayNesterOptions {
        bbox: s.bbox,
        seed: s.seed,
        tol: s.tol,
        tol_rank: s.tol_rank,
        ..GotayNesterOptions::default()
    };
    let r = gotay_nester(&ls, &opts)?;
    if r.pointwise {
        ctx.note("momenta are not affine in the velocities; constraints were not derived symbolically");
    }
    if r.primary.is_empty() && r.secondary.is_empty() && !r.pointwise {
        ctx.note(format!("M1 = T*Q; algorithm stabilizes at level {}", r.levels.len()));
    }
    let sec = Section::new()
        .with("levels", r.levels.len())
        .with("final-dim", r.levels.last().and_then(|l| l.dim).map(|d| d as i64));
    ctx.record("gotay-nester", r.stabilized, sec);
    extra.push("algorithm", r.to_section());
    Ok(())
}

fn cmd_complete(ctx: &mut Ctx) -> Result<(), Failure> {
    let s = ctx.s.clone();
    let Some(spec) = ctx.sys.complete.clone() else {
        return input("complete needs [complete]");
    };
    let Some(mf) = ctx.family()? else {
        return input("complete needs a dynamics given by a Morse family, Hamiltonian or Lagrangian");
    };
    let space = ctx.space()?;
    let cs = CompleteSolution::new(space, space.n(), spec.w, spec.constraints)?;
    let opts = CompleteOptions {
        bbox: s.bbox,
        seed: s.seed,
        tol: s.tol,
        tol_rank: s.tol_rank,
        fd_step: s.fd_h,
        ..CompleteOptions::default()
    };
    let r = complete_solution_check(&cs, &mf, &opts)?;
    ctx.record("complete-solution", r.passed, r.to_section());
    Ok(())
}

/// Run a parsed command line: read the file, run, write the report.
/// Returns the process exit code.
pub fn main_with(cli: Cli) -> i32 {
    let common = cli.command.common().clone();
    let text = match std::fs::read_to_string(&common.file) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("ihj: cannot read {}: {e}", common.file.display());
            return EXIT_INPUT;
        }
    };
    let started = std::time::Instant::now();
    let ov = Overrides {
        seed: common.seed,
        tol: common.tol,
    };
    let out = match run_text(&Task::from(&cli.command), &text, &ov) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("ihj: {}: {e}", common.file.display());
            return EXIT_INPUT;
        }
    };
    let mut doc = out.render();
    doc.push_str(&format!("timing-seconds {}\n", fmt_float(started.elapsed().as_secs_f64())));
    let written = match &common.out {
        Some(p) => std::fs::write(p, &doc).map_err(|e| format!("cannot write {}: {e}", p.display())),
        None => {
            use std::io::Write;
            std::io::stdout().write_all(doc.as_bytes()).map_err(|e| e.to_string())
        }
    };
    if let Err(e) = written {
        eprintln!("ihj: {e}");
        return EXIT_INPUT;
    }
    eprint!("{}", out.summary());
    eprintln!("result: {}", if out.exit_code == EXIT_PASS { "pass" } else { "FAIL" });
    out.exit_code
}
