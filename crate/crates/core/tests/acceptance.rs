//! One pass/fail line per acceptance criterion.
//!
//! Criteria listed in `UNATTAINABLE` are still computed and printed; the
//! target only requires that they keep failing, so a fix shows up here.

mod common;

use common::*;
use ihj_core::expr::{derivative, normalize_constraint, parse, Expression, Tape, TapeSet};
use ihj_core::geometry::{
    alpha_permutation, beta_permutation, bracket_from_grads, bracket_gradient, exterior_derivative_fd, omega_t_matrix,
    omega_cotangent_of_tangent, omega_iterated_cotangent, theta1_coeffs, theta2_coeffs, PhaseSpace,
};
use ihj_core::hj::{critical_samples, gamma_relatedness_residual, search_oneform, verify_oneform, SearchOptions, VerifyOptions};
use ihj_core::ide::{
    pointwise_integrability, project_to_base, run_integrability, tangent_bundle_vars, AffineIde, IntegrabilityOptions,
    PointStatus, PointwiseOptions,
};
use ihj_core::lagrangian::{gotay_nester, pontryagin_family, GotayNesterOptions};
use ihj_core::morse::{lagrangian_closure_check, Ambient, ImplicitSystem, MorseFamily};
use ihj_core::sampling::{halton_cloud, sample_zero_set, SampleBox, DEFAULT_SEED};
use ihj_core::sysfile::{parse_system, Dynamics};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::{BTreeSet, HashMap};
use std::time::Instant;

/// The Tulczyjew sign identities cannot all hold with the canonical forms
/// as specified; see the criterion 5 detail line.
const UNATTAINABLE: &[usize] = &[5];

struct Verdict {
    passed: bool,
    detail: String,
}

fn verdict(passed: bool, detail: String) -> Verdict {
    Verdict { passed, detail }
}

fn exprs(v: &[&str]) -> Vec<Expression> {
    v.iter().map(|s| parse(s).unwrap()).collect()
}

fn normalized(v: &[Expression]) -> BTreeSet<String> {
    v.iter().map(|e| normalize_constraint(e).to_string()).collect()
}

/// Largest value of `b` on samples of the zero set of `a`, and the reverse.
fn mutual_residual(a: &[Expression], b: &[Expression], vars: &[String]) -> f64 {
    let one_way = |a: &[Expression], b: &[Expression], seed: u64| {
        let sa = TapeSet::compile(a, vars).unwrap();
        let sb = TapeSet::compile(b, vars).unwrap();
        let pts = sample_zero_set(&sa, 40, SampleBox::default(), seed, 1e-12);
        if pts.is_empty() {
            return f64::INFINITY;
        }
        pts.iter().map(|x| max_abs(sb.eval(x).unwrap())).fold(0.0, f64::max)
    };
    one_way(a, b, DEFAULT_SEED).max(one_way(b, a, DEFAULT_SEED + 1))
}

fn fixture_ide(name: &str) -> (Vec<String>, Vec<Expression>) {
    let text = std::fs::read_to_string(fixtures().join(name)).unwrap();
    match parse_system(&text).unwrap().dynamics {
        Dynamics::Ide { vars, constraints } => (vars, constraints),
        other => panic!("{name}: unexpected dynamics {}", other.kind()),
    }
}

fn criterion_1() -> Verdict {
    let t0 = Instant::now();
    let ls = example1();
    let space = ls.space();
    let mf = pontryagin_family(&ls).unwrap();
    let e = mf.generate_e().unwrap();
    let sex1 = exprs(&["p1 - (qd1 + qd2)", "p2 - (qd1 + qd2)", "p3", "pd1", "pd2", "pd3"]);
    let exact = e.hidden.is_empty() && normalized(&e.constraints) == normalized(&sex1);
    let e_res = mutual_residual(&e.constraints, &sex1, &space.tulczyjew());

    let ide = AffineIde::new(space.cotangent(), &e.constraints).unwrap();
    let c = project_to_base(&ide, &halton_cloud(6, 40, SampleBox::default(), DEFAULT_SEED), 1e-9);
    let c_res = mutual_residual(&c.constraints, &exprs(&["p1 - p2", "p3"]), &space.cotangent());

    let res = search_oneform(&mf, &SearchOptions::default()).unwrap();
    let family = res.candidates.iter().find(|c| {
        c.parameters.len() == 1
            && c.family.len() == 3
            && c.family[0] == c.family[1]
            && c.family[0].free_vars() == c.parameters.as_slice()
            && c.family[2].is_zero()
            && c.locus.is_none()
    });
    let search_res = family.map_or(f64::INFINITY, |c| c.residual.max(c.verified_residual));
    let secs = t0.elapsed().as_secs_f64();
    let worst = e_res.max(c_res).max(search_res);
    verdict(
        exact && family.is_some() && worst < 1e-9 && secs < 5.0,
        format!(
            "E exact {exact}, family {}, max residual {worst:.2e}, {secs:.2} s",
            family.map_or("none".into(), |c| format!("{:?}", c.family.iter().map(|e| e.to_string()).collect::<Vec<_>>()))
        ),
    )
}

fn criterion_2() -> Verdict {
    let t0 = Instant::now();
    let ls = example2();
    let space = ls.space();
    let mf = pontryagin_family(&ls).unwrap();
    let e = mf.generate_e().unwrap();
    let e_res = mutual_residual(
        &e.constraints,
        &exprs(&["p1 - qd1", "p2", "pd1 - 2*q2*q1", "pd2 - q1^2"]),
        &space.tulczyjew(),
    );
    let ide = AffineIde::new(space.cotangent(), &e.constraints).unwrap();
    let c = project_to_base(&ide, &halton_cloud(4, 40, SampleBox::default(), DEFAULT_SEED), 1e-9);
    let c_ok = normalized(&c.constraints) == normalized(&exprs(&["p2"]));

    let v = verify_oneform(&mf, &oneform(2, &["q1", "0"]), &VerifyOptions::default()).unwrap();
    let locus_ok = v.passed && v.locus.as_ref().map(|l| l.to_string()).as_deref() == Some("q1");
    let v_res = v.on_locus.as_ref().map_or(f64::INFINITY, |d| d.max_residual);

    let gn = gotay_nester(&ls, &GotayNesterOptions::default()).unwrap();
    let gn_ok = normalized(&gn.primary) == normalized(&exprs(&["p2"]))
        && normalized(&gn.secondary) == normalized(&exprs(&["q1", "p1"]));
    let mf_res = mutual_residual(gn.final_constraints(), &exprs(&["q1", "p1", "p2"]), &space.cotangent());
    let secs = t0.elapsed().as_secs_f64();
    let worst = e_res.max(v_res).max(mf_res);
    verdict(
        c_ok && locus_ok && gn_ok && worst < 1e-9 && secs < 5.0,
        format!("C ok {c_ok}, locus ok {locus_ok}, GN classes ok {gn_ok}, max residual {worst:.2e}, {secs:.2} s"),
    )
}

fn criterion_3() -> Verdict {
    let (vars, cons) = fixture_ide("constrained.sys");
    let ide = AffineIde::new(vars.clone(), &cons).unwrap();
    let trace = run_integrability(&ide, &IntegrabilityOptions::default()).unwrap();
    // ṡ = 0 is part of T C⁰ and holds on the integrable part.
    let intpart = exprs(&["xd - p", "rd + x", "pd + x", "r - p", "s", "sd"]);
    let int_res = mutual_residual(trace.final_e(), &intpart, &tangent_bundle_vars(&vars));
    let stab_ok = trace.stabilized_at == Some(1);

    let (vars, cons) = fixture_ide("nonintegrable.sys");
    let sys = ImplicitSystem::new("E", Ambient::Tangent(2), tangent_bundle_vars(&vars), cons);
    let on_locus: Vec<Vec<f64>> = (0..100)
        .map(|i| {
            let t = std::f64::consts::TAU * (i as f64 + 0.5) / 100.0;
            vec![t.cos(), t.sin(), -1.0, 0.0]
        })
        .collect();
    let rep = pointwise_integrability(&sys, &on_locus, &PointwiseOptions::default()).unwrap();
    let false_neg = rep.statuses.iter().filter(|s| **s != PointStatus::NonIntegrable).count();

    let probes = sys.sample(100, SampleBox::default(), DEFAULT_SEED, 1e-12).unwrap();
    let dist = |x: &[f64]| ((x[0].hypot(x[1]) - 1.0).powi(2) + (x[2] + 1.0).powi(2) + x[3].powi(2)).sqrt();
    let off: Vec<Vec<f64>> = probes.into_iter().filter(|x| dist(x) > 1e-3).collect();
    let rep = pointwise_integrability(&sys, &off, &PointwiseOptions::default()).unwrap();
    let false_pos = rep.flagged().len();
    verdict(
        stab_ok && int_res < 1e-9 && false_neg == 0 && false_pos == 0 && off.len() >= 50,
        format!(
            "stabilized at {:?}, intpart residual {int_res:.2e}, false negatives {false_neg}/100, false positives {false_pos}/{}",
            trace.stabilized_at,
            off.len()
        ),
    )
}

fn criterion_4() -> Verdict {
    let n = 2;
    let vars = PhaseSpace::new(n).tulczyjew();
    let mut rng = ChaCha8Rng::seed_from_u64(DEFAULT_SEED);
    let all: Vec<usize> = (0..4 * n).collect();
    let (mut anti, mut bilin, mut leib, mut jac) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for _ in 0..100 {
        let f = random_polynomial(&mut rng, &vars, 3, 6);
        let g = random_polynomial(&mut rng, &vars, 3, 6);
        let h = random_polynomial(&mut rng, &vars, 3, 6);
        let (a, b) = (rng_coeff(&mut rng), rng_coeff(&mut rng));
        let lin = Expression::num(a) * f.clone() + Expression::num(b) * g.clone();
        let gh = g.clone() * h.clone();
        let tapes: Vec<Tape> = [&f, &g, &h, &lin, &gh].iter().map(|e| Tape::compile(e, &vars).unwrap()).collect();
        for _ in 0..100 {
            let x = random_point(&mut rng, 4 * n, 1.0);
            let jets: Vec<_> = tapes.iter().map(|t| t.jet2(&x, &all).unwrap()).collect();
            let gr = |i: usize| jets[i].grad();
            let br = |i: usize, j: usize| bracket_from_grads(n, gr(i), gr(j));
            let val = |i: usize| jets[i].value;
            anti = anti.max((br(0, 1) + br(1, 0)).abs());
            bilin = bilin.max((br(3, 2) - (a * br(0, 2) + b * br(1, 2))).abs());
            leib = leib.max((br(0, 4) - (br(0, 1) * val(2) + val(1) * br(0, 2))).abs());
            let cyc = bracket_from_grads(n, gr(0), &bracket_gradient(n, &jets[1], &jets[2]))
                + bracket_from_grads(n, gr(1), &bracket_gradient(n, &jets[2], &jets[0]))
                + bracket_from_grads(n, gr(2), &bracket_gradient(n, &jets[0], &jets[1]));
            jac = jac.max(cyc.abs());
        }
    }
    verdict(
        anti == 0.0 && bilin < 1e-12 && leib < 1e-9 && jac < 1e-8,
        format!("antisymmetry {anti:.1e}, bilinearity {bilin:.1e}, Leibniz {leib:.1e}, Jacobi {jac:.1e}"),
    )
}

fn rng_coeff(rng: &mut ChaCha8Rng) -> f64 {
    random_point(rng, 1, 2.0)[0]
}

fn criterion_5() -> Verdict {
    let n = 2;
    let m = 4 * n;
    let mut rng = ChaCha8Rng::seed_from_u64(DEFAULT_SEED);
    let omega = omega_t_matrix(n);
    let pair = |u: &[f64], w: &[f64]| -> f64 {
        (0..m).map(|i| (0..m).map(|j| u[i] * omega[(i, j)] * w[j]).sum::<f64>()).sum()
    };
    let (alpha, beta) = (alpha_permutation(n), beta_permutation(n));
    let pq = parse("p1*qd1 + p2*qd2").unwrap();
    let pq_tape = Tape::compile(&pq, &PhaseSpace::new(n).tulczyjew()).unwrap();
    let (mut d_alpha, mut d_beta, mut d_exact, mut d_theta1, mut d_theta2) = (0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for _ in 0..100 {
        let x = random_point(&mut rng, m, 2.0);
        let u = random_point(&mut rng, m, 1.0);
        let w = random_point(&mut rng, m, 1.0);
        let reference = pair(&u, &w);
        let a = omega_cotangent_of_tangent(n, &alpha.apply(&u), &alpha.apply(&w));
        let b = omega_iterated_cotangent(n, &beta.apply(&u), &beta.apply(&w));
        d_alpha = d_alpha.max((a - reference).abs());
        d_beta = d_beta.max((b - reference).abs());

        let diff: Vec<f64> = theta2_coeffs(n, &x).iter().zip(theta1_coeffs(n, &x)).map(|(a, b)| a - b).collect();
        let grad = pq_tape.gradient(&x).unwrap();
        d_exact = d_exact.max(max_abs(diff.iter().zip(&grad).map(|(a, b)| a - b)));

        for (coeffs, worst) in [
            (theta1_coeffs as fn(usize, &[f64]) -> Vec<f64>, &mut d_theta1),
            (theta2_coeffs, &mut d_theta2),
        ] {
            let d = exterior_derivative_fd(|y| coeffs(n, y), &x, 1e-5);
            *worst = worst.max(max_abs((-d - &omega).iter().copied()));
        }
    }
    verdict(
        d_alpha < 1e-12 && d_beta < 1e-12 && d_exact < 1e-12 && d_theta1 < 1e-6 && d_theta2 < 1e-6,
        format!(
            "alpha pullback {d_alpha:.2e}, beta pullback {d_beta:.2e}, theta2 - theta1 - d(p.qd) {d_exact:.2e}, \
             -dtheta1 - omega {d_theta1:.2e}, -dtheta2 - omega {d_theta2:.2e} \
             (the forms as specified give alpha* = -omega and dtheta = +omega)"
        ),
    )
}

fn criterion_6() -> Verdict {
    let n = 2;
    let space = PhaseSpace::new(n);
    let mut rng = ChaCha8Rng::seed_from_u64(DEFAULT_SEED);
    let (mut worst_exact, mut best_perturbed) = (0.0f64, f64::INFINITY);
    let mut all_ok = true;
    for i in 0..10 {
        let h = random_polynomial(&mut rng, &space.cotangent(), 3, 6);
        let e = MorseFamily::hamiltonian(space, h.clone()).unwrap().generate_e().unwrap();
        let pts = e.sample(30, SampleBox::default(), DEFAULT_SEED + i, 1e-12).unwrap();
        let rep = lagrangian_closure_check(&e, &pts, 1e-9).unwrap();
        all_ok &= rep.passed && rep.checked > 0;
        worst_exact = worst_exact.max(rep.max_violation);

        // Graph of X_H plus a non-closed term q2 dq1.
        let (q, p, qd, pd) = (space.q(), space.p(), space.qd(), space.pd());
        let mut cons = Vec::new();
        for j in 0..n {
            cons.push(Expression::var(&qd[j]) - derivative(&h, &p[j]));
            let extra = if j == 0 { Expression::var(&q[1]) } else { Expression::zero() };
            cons.push(Expression::var(&pd[j]) + derivative(&h, &q[j]) - extra);
        }
        let bad = ImplicitSystem::new("E'", Ambient::Tulczyjew(n), space.tulczyjew(), cons);
        let pts = bad.sample(30, SampleBox::default(), DEFAULT_SEED + i, 1e-12).unwrap();
        let rep = lagrangian_closure_check(&bad, &pts, 1e-9).unwrap();
        all_ok &= !rep.passed && rep.max_violation > 1e-3;
        best_perturbed = best_perturbed.min(rep.max_violation);
    }
    verdict(
        all_ok,
        format!("worst exact violation {worst_exact:.1e}, smallest perturbed violation {best_perturbed:.2e}"),
    )
}

fn criterion_7() -> Verdict {
    let mut points = 0;
    let mut deficient = Vec::new();
    for &(n, l) in LAGRANGIANS {
        let mf = pontryagin_family(&lagrangian(n, l)).unwrap();
        let pts = mf.sample_critical_points(40, SampleBox::default(), DEFAULT_SEED, 1e-12).unwrap();
        let vars = mf.vars();
        if pts.is_empty() {
            deficient.push(format!("{l} (no samples)"));
        }
        for x in &pts {
            let pt: HashMap<String, f64> = vars.iter().cloned().zip(x.iter().copied()).collect();
            points += 1;
            if !mf.morse_rank_check(&pt, 1e-8, 1e-9).map(|r| r.maximal).unwrap_or(false) {
                deficient.push(l.to_string());
            }
        }
    }
    verdict(
        deficient.is_empty(),
        format!("{} Lagrangians, {points} critical points, deficient {deficient:?}", LAGRANGIANS.len()),
    )
}

fn criterion_8() -> Verdict {
    let vars = corpus_vars();
    let pts = halton_cloud(3, 100, SampleBox { lo: -1.5, hi: 1.5 }, DEFAULT_SEED);
    let (mut g_err, mut h_err) = (0.0f64, 0.0f64);
    let mut worst = "";
    for (text, e) in EXPRESSIONS.iter().zip(corpus()) {
        let tape = Tape::compile(&e, &vars).unwrap();
        let f = |x: &[f64]| tape.eval(x).unwrap();
        for x in &pts {
            let jet = tape.jet2(x, &[0, 1, 2]).unwrap();
            let fd = fd_gradient(f, x, 1e-6);
            let ge = max_abs(jet.grad().iter().zip(&fd).map(|(a, b)| a - b)) / (1.0 + max_abs(jet.grad().iter().copied()));
            let hd = jet.hess_dense();
            let fh = fd_hessian(f, x, 1e-4);
            let he = max_abs(hd.iter().flatten().zip(fh.iter().flatten()).map(|(a, b)| a - b))
                / (1.0 + max_abs(hd.iter().flatten().copied()));
            if ge.max(he) > g_err.max(h_err) {
                worst = text;
            }
            g_err = g_err.max(ge);
            h_err = h_err.max(he);
        }
    }
    verdict(
        g_err < 1e-6 && h_err < 1e-6,
        format!(
            "{} expressions x {} points, gradient {g_err:.1e}, Hessian {h_err:.1e} (worst `{worst}`)",
            EXPRESSIONS.len(),
            pts.len()
        ),
    )
}

fn criterion_9() -> Verdict {
    let (mut points, mut both_pass, mut both_fail, mut split) = (0, 0, 0, Vec::new());
    for (label, mf, g) in family_oneform_pairs() {
        let n = mf.space().n();
        let qs = halton_cloud(n, 30, SampleBox::default(), DEFAULT_SEED);
        let crit = critical_samples(&mf, &g, &qs, SampleBox::default()).unwrap();
        let f = Tape::compile(mf.function(), &mf.vars()).unwrap();
        for x in &crit.points {
            let tangency = gamma_relatedness_residual(&mf, &g, std::slice::from_ref(x), 1e-9).unwrap().passed;
            let lam = &x[n..];
            let composite = |q: &[f64]| f.eval(&[q, &g.eval(q).unwrap(), lam].concat()).unwrap();
            let df = max_abs(fd_gradient(composite, &x[..n], 1e-6)) < 1e-6;
            points += 1;
            match (tangency, df) {
                (true, true) => both_pass += 1,
                (false, false) => both_fail += 1,
                _ => split.push(label),
            }
        }
    }
    verdict(
        split.is_empty() && both_pass > 0 && both_fail > 0,
        format!("{points} points: both pass {both_pass}, both fail {both_fail}, disagree {split:?}"),
    )
}

fn criterion_10() -> Verdict {
    let mut mismatched = Vec::new();
    let mut files = BTreeSet::new();
    for (name, file, args, _) in GOLDEN_CASES {
        files.insert(*file);
        let path = fixtures().join(file);
        let (_, first) = run_report(args, &path);
        let (_, second) = run_report(args, &path);
        let golden = std::fs::read_to_string(fixtures().join("golden").join(format!("{name}.txt"))).unwrap_or_default();
        if first != second || first != golden {
            mismatched.push(*name);
        }
    }
    verdict(
        mismatched.is_empty() && files.len() == 5,
        format!("{} reports over {} fixtures, mismatched {mismatched:?}", GOLDEN_CASES.len(), files.len()),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Verdict); 10] = [
        ("example 1 reproduction", criterion_1),
        ("example 2 reproduction", criterion_2),
        ("integrability algorithm", criterion_3),
        ("bracket properties", criterion_4),
        ("Tulczyjew maps", criterion_5),
        ("Lagrangian-submanifold oracle", criterion_6),
        ("Morse rank of Pontryagin families", criterion_7),
        ("AD against finite differences", criterion_8),
        ("lemma co-occurrence", criterion_9),
        ("determinism", criterion_10),
    ];
    let mut unexpected = Vec::new();
    for (i, (title, run)) in criteria.iter().enumerate() {
        let k = i + 1;
        let v = run();
        println!("criterion {k:>2} {} {title}: {}", if v.passed { "PASS" } else { "FAIL" }, v.detail);
        if v.passed == UNATTAINABLE.contains(&k) {
            unexpected.push(k);
        }
    }
    if !unexpected.is_empty() {
        eprintln!("criteria {unexpected:?} differ from expectation (unattainable: {UNATTAINABLE:?})");
        std::process::exit(1);
    }
}
