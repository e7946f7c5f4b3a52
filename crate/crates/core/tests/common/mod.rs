//! Shared corpora and oracles for the integration tests.
#![allow(dead_code)]

use ihj_core::expr::{parse, Expression};
use ihj_core::geometry::PhaseSpace;
use ihj_core::hj::OneForm;
use ihj_core::lagrangian::{pontryagin_family, LagrangianSystem};
use ihj_core::morse::{dirac_family, MorseFamily};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use std::path::{Path, PathBuf};
use std::process::Command;

/// Variables of the expression corpus.
pub const CORPUS_VARS: [&str; 3] = ["x", "y", "z"];

/// Expressions that are smooth on `[-1.5, 1.5]^3`.
pub const EXPRESSIONS: &[&str] = &[
    "x",
    "x + y + z",
    "x*y*z",
    "x^2 + y^2 + z^2",
    "3*x^3 - 2*x*y + 5",
    "(x + y)^4",
    "x^2*y - y^3/3",
    "1/2*(x - y)^2 + z",
    "sin(x)",
    "cos(x*y)",
    "sin(x)*cos(y)",
    "exp(x)",
    "exp(-x^2 - y^2)",
    "x*exp(y*z)",
    "ln(1 + x^2)",
    "ln(2 + sin(y))",
    "sqrt(1 + x^2 + y^2)",
    "sqrt(3 + z)",
    "1/(1 + x^2)",
    "x/(2 + cos(y))",
    "(x*y - z)/(1 + z^2)",
    "sin(x + y + z)^2",
    "cos(x)^3 - sin(z)^2",
    "exp(sin(x))",
    "ln(1 + exp(x*y))",
    "sqrt(1 + x^4)*y",
    "x^5 - 4*x^3*y^2 + z",
    "(1 + x)^3*(1 - y)^2",
    "sin(exp(x/2))",
    "x*y/(1 + x^2*y^2)",
    "-x^2 + y",
    "1/2*x^2*y^2*z^2 - x*y*z",
    "exp(x)*sin(y) - exp(y)*cos(z)",
    "ln(sqrt(1 + z^2))",
];

pub fn corpus() -> Vec<Expression> {
    EXPRESSIONS.iter().map(|s| parse(s).expect(s)).collect()
}

pub fn corpus_vars() -> Vec<String> {
    CORPUS_VARS.iter().map(|s| s.to_string()).collect()
}

/// Lagrangians `(n, L)`, regular and degenerate.
pub const LAGRANGIANS: &[(usize, &str)] = &[
    (3, "1/2*(qd1 + qd2)^2"),
    (2, "1/2*qd1^2 + q1^2*q2"),
    (1, "1/2*qd1^2 - 1/2*q1^2"),
    (2, "1/2*(qd1^2 + qd2^2) - q1*q2"),
    (1, "1/2*(1 + q1^2)*qd1^2 - cos(q1)"),
    (2, "q2*qd1 - 1/2*q1^2"),
    (2, "qd1*q2 - qd2*q1 - 1/2*(q1^2 + q2^2)"),
    (2, "1/2*(qd1 + qd2)^2 + sin(q1)"),
];

pub fn lagrangian(n: usize, l: &str) -> LagrangianSystem {
    LagrangianSystem::new(PhaseSpace::new(n), parse(l).unwrap()).unwrap()
}

pub fn example1() -> LagrangianSystem {
    lagrangian(3, "1/2*(qd1 + qd2)^2")
}

pub fn example2() -> LagrangianSystem {
    lagrangian(2, "1/2*qd1^2 + q1^2*q2")
}

pub fn oneform(n: usize, comps: &[&str]) -> OneForm {
    OneForm::new(PhaseSpace::new(n), comps.iter().map(|c| parse(c).unwrap()).collect()).unwrap()
}

/// `(label, family, one-form)` pairs on which γ-relatedness is probed.
pub fn family_oneform_pairs() -> Vec<(&'static str, MorseFamily, OneForm)> {
    let ham = |n: usize, h: &str| MorseFamily::hamiltonian(PhaseSpace::new(n), parse(h).unwrap()).unwrap();
    let nonholonomic = MorseFamily::new(
        PhaseSpace::new(3),
        vec!["lam1".into(), "lam2".into()],
        parse("lam1*(p1 + q2*p3) + lam2*p2").unwrap(),
    )
    .unwrap();
    let dirac = dirac_family(
        PhaseSpace::new(2),
        &parse("1/2*(p1^2 + p2^2)").unwrap(),
        &[parse("p2").unwrap()],
    )
    .unwrap();
    vec![
        ("example1 global", pontryagin_family(&example1()).unwrap(), oneform(3, &["1", "1", "0"])),
        ("example2 locus", pontryagin_family(&example2()).unwrap(), oneform(2, &["q1", "0"])),
        ("oscillator zero", ham(1, "1/2*(p1^2 + q1^2)"), oneform(1, &["0"])),
        ("free particle", ham(2, "1/2*(p1^2 + p2^2)"), oneform(2, &["1", "2"])),
        ("free particle rotation", ham(2, "1/2*(p1^2 + p2^2)"), oneform(2, &["q2", "q1"])),
        ("nonholonomic zero", nonholonomic.clone(), oneform(3, &["0", "0", "0"])),
        ("nonholonomic linear", nonholonomic, oneform(3, &["q1", "0", "0"])),
        ("dirac", dirac, oneform(2, &["1", "0"])),
    ]
}

/// Random polynomial of total degree at most `max_deg` in `vars`, with
/// coefficients in `[-1, 1]`.
pub fn random_polynomial(rng: &mut ChaCha8Rng, vars: &[String], max_deg: u32, terms: usize) -> Expression {
    let mut parts = Vec::with_capacity(terms);
    for _ in 0..terms {
        let c: f64 = rng.random_range(-1.0..1.0);
        let mut mono = format!("({c:.6})");
        let deg = rng.random_range(0..=max_deg);
        for _ in 0..deg {
            let v = &vars[rng.random_range(0..vars.len())];
            mono.push('*');
            mono.push_str(v);
        }
        parts.push(mono);
    }
    parse(&parts.join(" + ")).unwrap()
}

pub fn random_point(rng: &mut ChaCha8Rng, dim: usize, half_width: f64) -> Vec<f64> {
    (0..dim).map(|_| rng.random_range(-half_width..half_width)).collect()
}

/// Largest absolute entry.
pub fn max_abs(v: impl IntoIterator<Item = f64>) -> f64 {
    v.into_iter().fold(0.0f64, |a, x| a.max(x.abs()))
}

/// Central-difference gradient of a scalar function, used as an oracle
/// independent of the tapes and jets.
pub fn fd_gradient(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut xp = x.to_vec();
    (0..x.len())
        .map(|i| {
            xp[i] = x[i] + h;
            let a = f(&xp);
            xp[i] = x[i] - h;
            let b = f(&xp);
            xp[i] = x[i];
            (a - b) / (2.0 * h)
        })
        .collect()
}

/// Central-difference Hessian of a scalar function.
pub fn fd_hessian(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<Vec<f64>> {
    let n = x.len();
    let mut out = vec![vec![0.0; n]; n];
    let mut xp = x.to_vec();
    let f0 = f(x);
    for i in 0..n {
        for j in i..n {
            let v = if i == j {
                xp[i] = x[i] + h;
                let a = f(&xp);
                xp[i] = x[i] - h;
                let b = f(&xp);
                xp[i] = x[i];
                (a - 2.0 * f0 + b) / (h * h)
            } else {
                let mut corner = |si: f64, sj: f64| {
                    xp[i] = x[i] + si * h;
                    xp[j] = x[j] + sj * h;
                    let v = f(&xp);
                    xp[i] = x[i];
                    xp[j] = x[j];
                    v
                };
                (corner(1.0, 1.0) - corner(1.0, -1.0) - corner(-1.0, 1.0) + corner(-1.0, -1.0)) / (4.0 * h * h)
            };
            out[i][j] = v;
            out[j][i] = v;
        }
    }
    out
}

/// Golden report cases: name, fixture, arguments, exit code.
pub const GOLDEN_CASES: &[(&str, &str, &[&str], i32)] = &[
    ("example1.check", "example1.sys", &["check"], 0),
    ("example1.hj-search", "example1.sys", &["hj", "--search-degree", "0"], 0),
    ("example1.gotay-nester", "example1.sys", &["gotay-nester"], 0),
    ("example2.hj-verify", "example2.sys", &["hj", "--verify"], 0),
    ("example2.gotay-nester", "example2.sys", &["gotay-nester"], 0),
    ("constrained.integrability", "constrained.sys", &["integrability"], 0),
    ("nonintegrable.integrability", "nonintegrable.sys", &["integrability"], 1),
    ("nonholonomic.check", "nonholonomic.sys", &["check"], 0),
    ("nonholonomic.hj-verify", "nonholonomic.sys", &["hj", "--verify"], 0),
];

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

/// Run the binary and return (exit code, report without the timing line).
pub fn run_report(args: &[&str], file: &Path) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_ihj"))
        .arg(args[0])
        .arg(file)
        .args(&args[1..])
        .output()
        .expect("binary runs");
    let text = String::from_utf8(out.stdout).expect("utf-8 report");
    let body: String = text
        .lines()
        .filter(|l| !l.starts_with("timing-seconds "))
        .map(|l| format!("{l}\n"))
        .collect();
    (out.status.code().unwrap_or(-1), body)
}
