mod common;

use common::*;
use ihj_core::expr::{derivative, parse, simplify, Expression, Func, Node, Tape};
use ihj_core::geometry::{bracket_from_grads, bracket_gradient, poisson_bracket_expr, PhaseSpace};
use ihj_core::morse::{lagrangian_closure_check, MorseFamily};
use ihj_core::sampling::SampleBox;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn cfg(cases: u32) -> ProptestConfig {
    ProptestConfig {
        cases,
        ..ProptestConfig::default()
    }
}

fn coord() -> impl Strategy<Value = f64> {
    -1.5f64..1.5
}

/// Source text of a random expression in x, y, z.
fn expr_text() -> impl Strategy<Value = String> {
    let leaf = prop_oneof![
        prop::sample::select(vec!["x", "y", "z"]).prop_map(str::to_string),
        (0u32..20).prop_map(|k| k.to_string()),
        (0u32..100).prop_map(|k| format!("{}.{:02}", k / 10, k)),
    ];
    leaf.prop_recursive(4, 32, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone(), prop::sample::select(vec!["+", "-", "*", "/"]))
                .prop_map(|(a, b, op)| format!("({a}) {op} ({b})")),
            (inner.clone(), 0u32..4).prop_map(|(a, k)| format!("({a})^{k}")),
            inner.clone().prop_map(|a| format!("-({a})")),
            (inner, prop::sample::select(vec!["sin", "cos", "exp", "ln", "sqrt"]))
                .prop_map(|(a, f)| format!("{f}({a})")),
        ]
    })
}

/// Value of `node` at `(x, y, z)` and the largest magnitude met on the way.
fn eval_scale(node: &Node, p: &[f64; 3]) -> (f64, f64) {
    let (v, m) = match node {
        Node::Num(c) => (*c, 0.0),
        Node::Var(name) => (p[["x", "y", "z"].iter().position(|v| v == name).unwrap()], 0.0),
        Node::Neg(a) => {
            let (a, m) = eval_scale(a, p);
            (-a, m)
        }
        Node::Pow(a, k) => {
            let (a, m) = eval_scale(a, p);
            (a.powi(*k), m)
        }
        Node::Call(f, a) => {
            let (a, m) = eval_scale(a, p);
            let v = match f {
                Func::Sin => a.sin(),
                Func::Cos => a.cos(),
                Func::Exp => a.exp(),
                Func::Ln => a.ln(),
                Func::Sqrt => a.sqrt(),
            };
            (v, m)
        }
        Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) | Node::Div(a, b) => {
            let (x, mx) = eval_scale(a, p);
            let (y, my) = eval_scale(b, p);
            let v = match node {
                Node::Add(..) => x + y,
                Node::Sub(..) => x - y,
                Node::Mul(..) => x * y,
                _ => x / y,
            };
            (v, mx.max(my))
        }
    };
    (v, m.max(v.abs()))
}

/// Bracket values of `f` and `g` through gradients of compiled tapes.
fn bracket(n: usize, f: &Expression, g: &Expression, x: &[f64]) -> f64 {
    let vars = PhaseSpace::new(n).tulczyjew();
    let gf = Tape::compile(f, &vars).unwrap().gradient(x).unwrap();
    let gg = Tape::compile(g, &vars).unwrap().gradient(x).unwrap();
    bracket_from_grads(n, &gf, &gg)
}

fn jet_all(e: &Expression, vars: &[String], x: &[f64]) -> ihj_core::expr::Jet2 {
    let all: Vec<usize> = (0..vars.len()).collect();
    Tape::compile(e, vars).unwrap().jet2(x, &all).unwrap()
}

proptest! {
    #![proptest_config(cfg(256))]

    #[test]
    fn jet_gradient_matches_finite_differences(i in 0..EXPRESSIONS.len(), x in coord(), y in coord(), z in coord()) {
        let e = parse(EXPRESSIONS[i]).unwrap();
        let vars = corpus_vars();
        let tape = Tape::compile(&e, &vars).unwrap();
        let p = [x, y, z];
        let jet = jet_all(&e, &vars, &p);
        let fd = fd_gradient(|v| tape.eval(v).unwrap(), &p, 1e-6);
        let scale = 1.0 + max_abs(jet.grad().iter().copied());
        let err = max_abs(jet.grad().iter().zip(&fd).map(|(a, b)| a - b));
        prop_assert!(err / scale < 1e-6, "{}: {err}", EXPRESSIONS[i]);
    }

    #[test]
    fn hessian_is_symmetric(i in 0..EXPRESSIONS.len(), x in coord(), y in coord(), z in coord()) {
        let e = parse(EXPRESSIONS[i]).unwrap();
        let jet = jet_all(&e, &corpus_vars(), &[x, y, z]);
        let h = jet.hess_dense();
        let scale = 1.0 + max_abs(h.iter().flatten().copied());
        for a in 0..3 {
            for b in 0..3 {
                prop_assert!((h[a][b] - h[b][a]).abs() <= 1e-12 * scale);
            }
        }
    }

    #[test]
    fn parse_print_parse_is_a_fixed_point(text in expr_text()) {
        let e1 = parse(&text).unwrap();
        let printed = e1.to_string();
        let e2 = parse(&printed).unwrap();
        prop_assert_eq!(&e1, &e2, "{} printed as {}", text, printed);
        prop_assert_eq!(printed, e2.to_string());
    }

    #[test]
    fn structural_derivative_matches_jet(i in 0..EXPRESSIONS.len(), x in coord(), y in coord(), z in coord()) {
        let e = parse(EXPRESSIONS[i]).unwrap();
        let vars = corpus_vars();
        let p = [x, y, z];
        let jet = jet_all(&e, &vars, &p);
        for (k, v) in vars.iter().enumerate() {
            let d = derivative(&e, v);
            let val = Tape::compile(&d, &vars).unwrap().eval(&p).unwrap();
            prop_assert!((val - jet.grad()[k]).abs() <= 1e-12 * (1.0 + val.abs()), "{} d/d{v}", EXPRESSIONS[i]);
        }
    }
}

proptest! {
    #![proptest_config(cfg(64))]

    #[test]
    fn bracket_axioms(seed in any::<u64>()) {
        let n = 2;
        let vars = PhaseSpace::new(n).tulczyjew();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = random_polynomial(&mut rng, &vars, 3, 6);
        let g = random_polynomial(&mut rng, &vars, 3, 6);
        let h = random_polynomial(&mut rng, &vars, 3, 6);
        let x = random_point(&mut rng, 4 * n, 1.0);
        let (a, b) = (0.7, -1.3);

        prop_assert_eq!(bracket(n, &f, &g, &x), -bracket(n, &g, &f, &x));

        let lin = Expression::num(a) * f.clone() + Expression::num(b) * g.clone();
        let lhs = bracket(n, &lin, &h, &x);
        let rhs = a * bracket(n, &f, &h, &x) + b * bracket(n, &g, &h, &x);
        prop_assert!((lhs - rhs).abs() < 1e-12 * (1.0 + rhs.abs()));

        let gh = g.clone() * h.clone();
        let ev = |e: &Expression| Tape::compile(e, &vars).unwrap().eval(&x).unwrap();
        let lhs = bracket(n, &f, &gh, &x);
        let rhs = bracket(n, &f, &g, &x) * ev(&h) + ev(&g) * bracket(n, &f, &h, &x);
        prop_assert!((lhs - rhs).abs() < 1e-9);

        let jets: Vec<_> = [&f, &g, &h].iter().map(|e| jet_all(e, &vars, &x)).collect();
        let grad_gh = bracket_gradient(n, &jets[1], &jets[2]);
        let grad_hf = bracket_gradient(n, &jets[2], &jets[0]);
        let grad_fg = bracket_gradient(n, &jets[0], &jets[1]);
        let jacobi = bracket_from_grads(n, jets[0].grad(), &grad_gh)
            + bracket_from_grads(n, jets[1].grad(), &grad_hf)
            + bracket_from_grads(n, jets[2].grad(), &grad_fg);
        prop_assert!(jacobi.abs() < 1e-8, "jacobi {jacobi}");
    }

    #[test]
    fn structural_bracket_matches_numeric(seed in any::<u64>()) {
        let n = 2;
        let space = PhaseSpace::new(n);
        let vars = space.tulczyjew();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = random_polynomial(&mut rng, &vars, 3, 5);
        let g = random_polynomial(&mut rng, &vars, 3, 5);
        let x = random_point(&mut rng, 4 * n, 1.0);
        let s = poisson_bracket_expr(&space, &f, &g);
        let sv = Tape::compile(&s, &vars).unwrap().eval(&x).unwrap();
        let nv = bracket(n, &f, &g, &x);
        prop_assert!((sv - nv).abs() < 1e-12 * (1.0 + nv.abs()));
    }

    #[test]
    fn hamiltonian_e_is_the_vector_field_graph(seed in any::<u64>()) {
        let n = 2;
        let space = PhaseSpace::new(n);
        let cot = space.cotangent();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = random_polynomial(&mut rng, &cot, 3, 5);
        let e = MorseFamily::hamiltonian(space, h.clone()).unwrap().generate_e().unwrap();
        prop_assert!(e.hidden.is_empty());
        let z = random_point(&mut rng, 2 * n, 1.5);
        let gh = fd_gradient(|v| Tape::compile(&h, &cot).unwrap().eval(v).unwrap(), &z, 1e-6);
        let on: Vec<f64> = z.iter().copied()
            .chain((0..n).map(|i| gh[n + i]))
            .chain((0..n).map(|i| -gh[i]))
            .collect();
        let vals = ihj_core::expr::TapeSet::compile(&e.constraints, &space.tulczyjew()).unwrap().eval(&on).unwrap();
        // Central differences with h = 1e-6.
        prop_assert!(max_abs(vals) < 1e-6 * (1.0 + max_abs(gh.clone())), "{h}");
        let mut off = on.clone();
        off[2 * n] += 0.1;
        let vals = ihj_core::expr::TapeSet::compile(&e.constraints, &space.tulczyjew()).unwrap().eval(&off).unwrap();
        // Constraints may come back rescaled, so only require a clear miss.
        prop_assert!(max_abs(vals) > 1e-4, "{h}");
    }

    #[test]
    fn generated_e_passes_closure(seed in any::<u64>()) {
        let space = PhaseSpace::new(2);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = random_polynomial(&mut rng, &space.cotangent(), 3, 5);
        let e = MorseFamily::hamiltonian(space, h).unwrap().generate_e().unwrap();
        let pts = e.sample(10, SampleBox::default(), seed, 1e-12).unwrap();
        let rep = lagrangian_closure_check(&e, &pts, 1e-9).unwrap();
        prop_assert!(rep.passed, "violation {}", rep.max_violation);
    }

    #[test]
    fn simplify_preserves_values(text in expr_text(), x in coord(), y in coord(), z in coord()) {
        let e = parse(&text).unwrap();
        let s = simplify(&e);
        let vars = corpus_vars();
        let a = Tape::compile(&e, &vars).unwrap().eval(&[x, y, z]);
        let b = Tape::compile(&s, &vars).unwrap().eval(&[x, y, z]);
        // Rounding scales with the largest intermediate, which sin and cos can hide.
        let (_, scale) = eval_scale(e.root(), &[x, y, z]);
        if let (Ok(a), Ok(b)) = (a, b) {
            if a.is_finite() && scale < 1e6 {
                prop_assert!((a - b).abs() <= 1e-9 * (1.0 + scale), "{text}: {a} vs {b}");
            }
        }
    }
}
