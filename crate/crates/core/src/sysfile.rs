//! System files: INI-like descriptions of a dynamics plus optional
//! one-forms, sections, complete solutions and sampling settings.
//!
//! ```text
//! [space]
//! dim = 2
//!
//! [lagrangian]
//! L = 1/2*qd1^2 + q1^2*q2
//!
//! [oneform]
//! gamma = q1, 0
//! ```
//!
//! Lists are comma separated. `#` starts a comment. Keys holding
//! expression lists may be repeated; each occurrence appends.

use crate::expr::symbolic::bind_constants;
use crate::expr::{parse, Expression};
use crate::geometry::{velocity_name, PhaseSpace};
use crate::sampling::{SampleBox, DEFAULT_SEED};
use std::collections::{BTreeMap, HashSet};
use std::fmt;

/// A problem in a system file, with its 1-based location.
#[derive(Clone, Debug, PartialEq)]
pub struct SysfileError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

impl fmt::Display for SysfileError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}, column {}: {}", self.line, self.column, self.message)
    }
}

impl std::error::Error for SysfileError {}

fn err<T>(line: usize, column: usize, message: impl Into<String>) -> Result<T, SysfileError> {
    Err(SysfileError {
        line,
        column,
        message: message.into(),
    })
}

#[derive(Clone, Debug)]
pub enum Dynamics {
    Morse { fibers: Vec<String>, f: Expression },
    Lagrangian { l: Expression },
    Hamiltonian { h: Expression, constraints: Vec<Expression> },
    Ide { vars: Vec<String>, constraints: Vec<Expression> },
}

impl Dynamics {
    pub fn kind(&self) -> &'static str {
        match self {
            Dynamics::Morse { .. } => "morse",
            Dynamics::Lagrangian { .. } => "lagrangian",
            Dynamics::Hamiltonian { .. } => "hamiltonian",
            Dynamics::Ide { .. } => "ide",
        }
    }
}

#[derive(Clone, Debug)]
pub enum OneFormSpec {
    Components(Vec<Expression>),
    Potential(Expression),
}

#[derive(Clone, Debug)]
pub struct SigmaSpec {
    pub upper: Vec<Expression>,
    pub lower: Vec<Expression>,
}

#[derive(Clone, Debug)]
pub struct CompleteSpec {
    pub w: Expression,
    pub constraints: Vec<Expression>,
}

/// Sampling box, counts and tolerances.
#[derive(Clone, Debug, PartialEq)]
pub struct Sampling {
    pub bbox: SampleBox,
    pub count: usize,
    pub seed: u64,
    pub tol: f64,
    pub tol_crit: f64,
    pub tol_rank: f64,
    pub fd_h: f64,
}

impl Default for Sampling {
    fn default() -> Self {
        Sampling {
            bbox: SampleBox::default(),
            count: 40,
            seed: DEFAULT_SEED,
            tol: 1e-9,
            tol_crit: 1e-9,
            tol_rank: 1e-8,
            fd_h: 1e-5,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SystemFile {
    pub dim: Option<usize>,
    pub dynamics: Dynamics,
    pub oneform: Option<OneFormSpec>,
    pub params: BTreeMap<String, f64>,
    pub sigma: Option<SigmaSpec>,
    pub complete: Option<CompleteSpec>,
    pub sampling: Sampling,
}

impl SystemFile {
    /// Phase space of the file, when it declares a dimension.
    pub fn space(&self) -> Option<PhaseSpace> {
        self.dim.map(PhaseSpace::new)
    }
}

const SECTIONS: &[&str] = &[
    "space", "morse", "lagrangian", "hamiltonian", "ide", "oneform", "params", "sigma", "complete", "sampling",
];
const DYNAMICS: &[&str] = &["morse", "lagrangian", "hamiltonian", "ide"];
const LIST_KEYS: &[(&str, &str)] = &[
    ("hamiltonian", "constraints"),
    ("ide", "constraints"),
    ("oneform", "gamma"),
    ("sigma", "upper"),
    ("sigma", "lower"),
    ("complete", "U"),
];

#[derive(Clone, Debug)]
struct Entry {
    line: usize,
    /// Column of the first character of the value.
    column: usize,
    value: String,
}

#[derive(Debug, Default)]
struct Raw {
    order: Vec<(String, usize)>,
    entries: BTreeMap<(String, String), Vec<Entry>>,
}

impl Raw {
    fn get(&self, sec: &str, key: &str) -> Option<&Entry> {
        self.entries.get(&(sec.into(), key.into())).and_then(|v| v.first())
    }

    fn all(&self, sec: &str, key: &str) -> &[Entry] {
        self.entries.get(&(sec.into(), key.into())).map_or(&[], |v| v.as_slice())
    }

    fn has(&self, sec: &str) -> bool {
        self.order.iter().any(|(s, _)| s == sec)
    }

    fn keys<'a>(&'a self, sec: &'a str) -> impl Iterator<Item = (&'a str, &'a Entry)> + 'a {
        self.entries
            .iter()
            .filter(move |((s, _), _)| s == sec)
            .flat_map(|((_, k), es)| es.iter().map(move |e| (k.as_str(), e)))
    }
}

fn lex(text: &str) -> Result<Raw, SysfileError> {
    let mut raw = Raw::default();
    let mut current: Option<String> = None;
    for (i, full) in text.lines().enumerate() {
        let line = i + 1;
        let content = full.split('#').next().unwrap_or("");
        let trimmed = content.trim();
        if trimmed.is_empty() {
            continue;
        }
        let indent = content.len() - content.trim_start().len();
        if trimmed.starts_with('[') {
            if !trimmed.ends_with(']') || trimmed.len() < 3 {
                return err(line, indent + 1, format!("malformed section header `{trimmed}`"));
            }
            let name = trimmed[1..trimmed.len() - 1].trim();
            if !SECTIONS.contains(&name) {
                return err(line, indent + 2, format!("unknown section `{name}`"));
            }
            if raw.has(name) {
                return err(line, indent + 1, format!("section `{name}` appears twice"));
            }
            raw.order.push((name.to_string(), line));
            current = Some(name.to_string());
            continue;
        }
        let Some(eq) = content.find('=') else {
            return err(line, indent + 1, "expected `key = value`");
        };
        let key = content[..eq].trim();
        if key.is_empty() || !key.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
            return err(line, indent + 1, format!("invalid key `{key}`"));
        }
        let Some(sec) = current.clone() else {
            return err(line, indent + 1, "key outside of any section");
        };
        let after = &content[eq + 1..];
        let value = after.trim();
        let column = eq + 2 + (after.len() - after.trim_start().len());
        if value.is_empty() {
            return err(line, column, format!("empty value for `{key}`"));
        }
        let slot = raw.entries.entry((sec.clone(), key.to_string())).or_default();
        if !slot.is_empty() && !LIST_KEYS.contains(&(sec.as_str(), key)) {
            return err(line, indent + 1, format!("duplicate key `{key}` in [{sec}]"));
        }
        slot.push(Entry {
            line,
            column,
            value: value.to_string(),
        });
    }
    Ok(raw)
}

/// Split on commas, keeping the column of each item.
fn items(e: &Entry) -> Vec<(usize, &str)> {
    let mut out = Vec::new();
    let mut start = 0;
    for part in e.value.split(',') {
        let lead = part.len() - part.trim_start().len();
        out.push((e.column + start + lead, part.trim()));
        start += part.len() + 1;
    }
    out
}

fn expr_at(line: usize, column: usize, text: &str) -> Result<Expression, SysfileError> {
    if text.is_empty() {
        return err(line, column, "empty expression");
    }
    parse(text).map_err(|e| {
        let (_, c) = e.position();
        let message = match &e {
            crate::expr::ParseError::Syntax { message, .. } => message.clone(),
            other => other.to_string(),
        };
        SysfileError {
            line,
            column: column + c.saturating_sub(1),
            message,
        }
    })
}

fn exprs(es: &[Entry]) -> Result<Vec<Located>, SysfileError> {
    let mut out = Vec::new();
    for e in es {
        for (col, text) in items(e) {
            out.push(Located {
                line: e.line,
                column: col,
                expr: expr_at(e.line, col, text)?,
            });
        }
    }
    Ok(out)
}

fn names(e: &Entry) -> Result<Vec<String>, SysfileError> {
    let mut out: Vec<String> = Vec::new();
    for (col, name) in items(e) {
        let ok = name.chars().next().is_some_and(|c| c.is_ascii_alphabetic())
            && name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_');
        if !ok {
            return err(e.line, col, format!("invalid name `{name}`"));
        }
        if out.iter().any(|o| o == name) {
            return err(e.line, col, format!("name `{name}` listed twice"));
        }
        out.push(name.to_string());
    }
    Ok(out)
}

fn number<T: std::str::FromStr>(e: &Entry, what: &str) -> Result<T, SysfileError> {
    e.value
        .parse()
        .or_else(|_| err(e.line, e.column, format!("expected {what}, found `{}`", e.value)))
}

#[derive(Clone, Debug)]
struct Located {
    line: usize,
    column: usize,
    expr: Expression,
}

fn require<'a>(raw: &'a Raw, sec: &str, key: &str) -> Result<&'a Entry, SysfileError> {
    raw.get(sec, key).ok_or_else(|| {
        let line = raw.order.iter().find(|(s, _)| s == sec).map_or(1, |(_, l)| *l);
        SysfileError {
            line,
            column: 1,
            message: format!("[{sec}] needs `{key}`"),
        }
    })
}

fn check_keys(raw: &Raw, sec: &str, allowed: &[&str]) -> Result<(), SysfileError> {
    for (k, e) in raw.keys(sec) {
        if !allowed.contains(&k) {
            return err(e.line, 1, format!("unknown key `{k}` in [{sec}]"));
        }
    }
    Ok(())
}

struct Binder<'a> {
    params: &'a BTreeMap<String, f64>,
}

impl Binder<'_> {
    /// Bind parameters and check that the remaining variables are allowed.
    fn bind(&self, l: &Located, allowed: &HashSet<String>, what: &str) -> Result<Expression, SysfileError> {
        let e = bind_constants(&l.expr, self.params);
        if let Some(v) = e.free_vars().iter().find(|v| !allowed.contains(*v)) {
            return err(l.line, l.column, format!("variable `{v}` is not allowed in {what}"));
        }
        Ok(e)
    }

    fn bind_all(&self, ls: &[Located], allowed: &HashSet<String>, what: &str) -> Result<Vec<Expression>, SysfileError> {
        ls.iter().map(|l| self.bind(l, allowed, what)).collect()
    }
}

fn set(names: impl IntoIterator<Item = String>) -> HashSet<String> {
    names.into_iter().collect()
}

/// Parse a system file.
pub fn parse_system(text: &str) -> Result<SystemFile, SysfileError> {
    let raw = lex(text)?;
    check_keys(&raw, "space", &["dim"])?;
    check_keys(&raw, "morse", &["fibers", "F"])?;
    check_keys(&raw, "lagrangian", &["L"])?;
    check_keys(&raw, "hamiltonian", &["H", "constraints"])?;
    check_keys(&raw, "ide", &["vars", "constraints"])?;
    check_keys(&raw, "oneform", &["gamma", "W"])?;
    check_keys(&raw, "sigma", &["upper", "lower"])?;
    check_keys(&raw, "complete", &["W", "U"])?;
    check_keys(
        &raw,
        "sampling",
        &["lo", "hi", "count", "seed", "tol", "tol_crit", "tol_rank", "fd_h"],
    )?;

    let mut params = BTreeMap::new();
    for (k, e) in raw.keys("params") {
        if params.insert(k.to_string(), number::<f64>(e, "a number")?).is_some() {
            return err(e.line, 1, format!("parameter `{k}` defined twice"));
        }
    }
    let binder = Binder { params: &params };

    let dim = match raw.get("space", "dim") {
        Some(e) => {
            let n: usize = number(e, "a positive integer")?;
            if n == 0 {
                return err(e.line, e.column, "dimension must be positive");
            }
            Some(n)
        }
        None => None,
    };

    let present: Vec<&(String, usize)> = raw.order.iter().filter(|(s, _)| DYNAMICS.contains(&s.as_str())).collect();
    let (kind, kind_line) = match present.as_slice() {
        [one] => (one.0.as_str(), one.1),
        [] => return err(1, 1, "no dynamics section ([morse], [lagrangian], [hamiltonian] or [ide])"),
        [_, second, ..] => return err(second.1, 1, "more than one dynamics section"),
    };
    let need_dim = |sec: &str| -> Result<usize, SysfileError> {
        dim.ok_or_else(|| SysfileError {
            line: kind_line,
            column: 1,
            message: format!("[{sec}] needs [space] dim"),
        })
    };
    for p in params.keys() {
        if is_reserved(p) {
            let e = raw.get("params", p).unwrap();
            return err(e.line, 1, format!("parameter `{p}` shadows a coordinate"));
        }
    }

    let dynamics = match kind {
        "morse" => {
            let space = PhaseSpace::new(need_dim("morse")?);
            let fibers = match raw.get("morse", "fibers") {
                Some(e) => names(e)?,
                None => Vec::new(),
            };
            let allowed = set(space.cotangent().into_iter().chain(fibers.clone()));
            let f = exprs(std::slice::from_ref(require(&raw, "morse", "F")?))?;
            if f.len() != 1 {
                return err(f[1].line, f[1].column, "F must be a single expression");
            }
            Dynamics::Morse {
                f: binder.bind(&f[0], &allowed, "F")?,
                fibers,
            }
        }
        "lagrangian" => {
            let space = PhaseSpace::new(need_dim("lagrangian")?);
            let l = exprs(std::slice::from_ref(require(&raw, "lagrangian", "L")?))?;
            Dynamics::Lagrangian {
                l: binder.bind(&l[0], &set(space.tangent()), "L")?,
            }
        }
        "hamiltonian" => {
            let space = PhaseSpace::new(need_dim("hamiltonian")?);
            let allowed = set(space.cotangent());
            let h = exprs(std::slice::from_ref(require(&raw, "hamiltonian", "H")?))?;
            let cs = exprs(raw.all("hamiltonian", "constraints"))?;
            Dynamics::Hamiltonian {
                h: binder.bind(&h[0], &allowed, "H")?,
                constraints: binder.bind_all(&cs, &allowed, "a constraint")?,
            }
        }
        _ => {
            let vars = match raw.get("ide", "vars") {
                Some(e) => names(e)?,
                None => PhaseSpace::new(need_dim("ide")?).cotangent(),
            };
            let mut allowed = set(vars.clone());
            allowed.extend(vars.iter().map(|v| velocity_name(v)));
            let cs = exprs(raw.all("ide", "constraints"))?;
            if cs.is_empty() {
                return err(kind_line, 1, "[ide] needs `constraints`");
            }
            Dynamics::Ide {
                constraints: binder.bind_all(&cs, &allowed, "a constraint")?,
                vars,
            }
        }
    };

    let q_allowed = || dim.map(|n| set(PhaseSpace::new(n).q()));
    let oneform = if raw.has("oneform") {
        let Some(qs) = q_allowed() else {
            return err(1, 1, "[oneform] needs [space] dim");
        };
        match (raw.get("oneform", "gamma"), raw.get("oneform", "W")) {
            (Some(_), Some(w)) => return err(w.line, 1, "give either `gamma` or `W`, not both"),
            (None, Some(w)) => {
                let w = exprs(std::slice::from_ref(w))?;
                Some(OneFormSpec::Potential(binder.bind(&w[0], &qs, "W")?))
            }
            (Some(_), None) => {
                let g = exprs(raw.all("oneform", "gamma"))?;
                let n = dim.unwrap();
                if g.len() != n {
                    return err(g[0].line, 1, format!("gamma has {} components, expected {n}", g.len()));
                }
                Some(OneFormSpec::Components(binder.bind_all(&g, &qs, "gamma")?))
            }
            (None, None) => return err(1, 1, "[oneform] needs `gamma` or `W`"),
        }
    } else {
        None
    };

    let sigma = if raw.has("sigma") {
        let n = need_dim("sigma")?;
        let allowed = set(PhaseSpace::new(n).cotangent());
        let upper = exprs(raw.all("sigma", "upper"))?;
        let lower = exprs(raw.all("sigma", "lower"))?;
        for (name, v) in [("upper", &upper), ("lower", &lower)] {
            if v.len() != n {
                let line = raw.get("sigma", name).map_or(1, |e| e.line);
                return err(line, 1, format!("sigma {name} has {} components, expected {n}", v.len()));
            }
        }
        Some(SigmaSpec {
            upper: binder.bind_all(&upper, &allowed, "sigma")?,
            lower: binder.bind_all(&lower, &allowed, "sigma")?,
        })
    } else {
        None
    };

    let complete = if raw.has("complete") {
        let n = need_dim("complete")?;
        let space = PhaseSpace::new(n);
        let qb: Vec<String> = (1..=n).map(|i| format!("qb{i}")).collect();
        let allowed = set(space.q().into_iter().chain(qb));
        let w = exprs(std::slice::from_ref(require(&raw, "complete", "W")?))?;
        let u = exprs(raw.all("complete", "U"))?;
        Some(CompleteSpec {
            w: binder.bind(&w[0], &allowed, "W")?,
            constraints: binder.bind_all(&u, &allowed, "U")?,
        })
    } else {
        None
    };

    let mut sampling = Sampling::default();
    if let Some(e) = raw.get("sampling", "lo") {
        sampling.bbox.lo = number(e, "a number")?;
    }
    if let Some(e) = raw.get("sampling", "hi") {
        sampling.bbox.hi = number(e, "a number")?;
    }
    if !(sampling.bbox.lo < sampling.bbox.hi) {
        let e = raw.get("sampling", "hi").or(raw.get("sampling", "lo")).unwrap();
        return err(e.line, e.column, "sampling box needs lo < hi");
    }
    if let Some(e) = raw.get("sampling", "count") {
        sampling.count = number(e, "a sample count")?;
    }
    if let Some(e) = raw.get("sampling", "seed") {
        sampling.seed = number(e, "an unsigned seed")?;
    }
    for (key, slot) in [
        ("tol", &mut sampling.tol),
        ("tol_crit", &mut sampling.tol_crit),
        ("tol_rank", &mut sampling.tol_rank),
        ("fd_h", &mut sampling.fd_h),
    ] {
        if let Some(e) = raw.get("sampling", key) {
            let v: f64 = number(e, "a positive number")?;
            if !(v > 0.0) {
                return err(e.line, e.column, format!("`{key}` must be positive"));
            }
            *slot = v;
        }
    }

    Ok(SystemFile {
        dim,
        dynamics,
        oneform,
        params,
        sigma,
        complete,
        sampling,
    })
}

/// Names of the coordinate convention, which parameters may not take.
fn is_reserved(name: &str) -> bool {
    const PREFIXES: &[&str] = &["qd", "pd", "qb", "pb", "lam", "mu", "nu", "q", "p"];
    PREFIXES.iter().any(|p| {
        name.strip_prefix(p)
            .is_some_and(|rest| !rest.is_empty() && rest.chars().all(|c| c.is_ascii_digit()))
    })
}
