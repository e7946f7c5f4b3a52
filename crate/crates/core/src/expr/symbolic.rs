//! Structural operations on expressions: differentiation, substitution and a
//! normal form used to materialize and compare constraints.
//!
//! The normal form treats an expression as a Laurent polynomial whose atoms
//! are variables or opaque non-polynomial subterms (function calls, quotients
//! by sums). It is not a general simplifier; it exists so that generated
//! constraints print readably and identical constraints compare equal.

use super::ast::{cmp_var_names, fmt_number, Expression, Func, Node};
use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};

/// d(expr)/d(var), simplified.
pub fn derivative(expr: &Expression, var: &str) -> Expression {
    if !expr.depends_on(var) {
        return Expression::zero();
    }
    simplify(&Expression::new(diff(expr.root(), var)))
}

/// Gradient with respect to each name in `vars`.
pub fn gradient(expr: &Expression, vars: &[String]) -> Vec<Expression> {
    vars.iter().map(|v| derivative(expr, v)).collect()
}

fn num(v: f64) -> Node {
    Node::Num(v)
}

fn b(n: Node) -> Box<Node> {
    Box::new(n)
}

fn mentions(node: &Node, var: &str) -> bool {
    match node {
        Node::Num(_) => false,
        Node::Var(v) => v == var,
        Node::Neg(a) | Node::Pow(a, _) | Node::Call(_, a) => mentions(a, var),
        Node::Add(a, c) | Node::Sub(a, c) | Node::Mul(a, c) | Node::Div(a, c) => {
            mentions(a, var) || mentions(c, var)
        }
    }
}

fn diff(node: &Node, var: &str) -> Node {
    if !mentions(node, var) {
        return num(0.0);
    }
    match node {
        Node::Num(_) => num(0.0),
        Node::Var(v) => num(if v == var { 1.0 } else { 0.0 }),
        Node::Neg(a) => Node::Neg(b(diff(a, var))),
        Node::Add(x, y) => Node::Add(b(diff(x, var)), b(diff(y, var))),
        Node::Sub(x, y) => Node::Sub(b(diff(x, var)), b(diff(y, var))),
        Node::Mul(x, y) => Node::Add(
            b(Node::Mul(b(diff(x, var)), y.clone())),
            b(Node::Mul(x.clone(), b(diff(y, var)))),
        ),
        Node::Div(x, y) => Node::Div(
            b(Node::Sub(
                b(Node::Mul(b(diff(x, var)), y.clone())),
                b(Node::Mul(x.clone(), b(diff(y, var)))),
            )),
            b(Node::Pow(y.clone(), 2)),
        ),
        Node::Pow(x, k) => Node::Mul(
            b(Node::Mul(b(num(*k as f64)), b(Node::Pow(x.clone(), k - 1)))),
            b(diff(x, var)),
        ),
        Node::Call(f, x) => {
            let outer = match f {
                Func::Sin => Node::Call(Func::Cos, x.clone()),
                Func::Cos => Node::Neg(b(Node::Call(Func::Sin, x.clone()))),
                Func::Exp => Node::Call(Func::Exp, x.clone()),
                Func::Ln => Node::Div(b(num(1.0)), x.clone()),
                Func::Sqrt => Node::Div(
                    b(num(1.0)),
                    b(Node::Mul(b(num(2.0)), b(Node::Call(Func::Sqrt, x.clone())))),
                ),
            };
            Node::Mul(b(outer), b(diff(x, var)))
        }
    }
}

/// Replace variables by expressions (simultaneously), then simplify.
pub fn substitute(expr: &Expression, map: &HashMap<String, Expression>) -> Expression {
    if !expr.free_vars().iter().any(|v| map.contains_key(v)) {
        return expr.clone();
    }
    simplify(&Expression::new(subst(expr.root(), map)))
}

fn subst(node: &Node, map: &HashMap<String, Expression>) -> Node {
    match node {
        Node::Num(_) => node.clone(),
        Node::Var(v) => match map.get(v) {
            Some(e) => e.root().clone(),
            None => node.clone(),
        },
        Node::Neg(a) => Node::Neg(b(subst(a, map))),
        Node::Add(x, y) => Node::Add(b(subst(x, map)), b(subst(y, map))),
        Node::Sub(x, y) => Node::Sub(b(subst(x, map)), b(subst(y, map))),
        Node::Mul(x, y) => Node::Mul(b(subst(x, map)), b(subst(y, map))),
        Node::Div(x, y) => Node::Div(b(subst(x, map)), b(subst(y, map))),
        Node::Pow(x, k) => Node::Pow(b(subst(x, map)), *k),
        Node::Call(f, x) => Node::Call(*f, b(subst(x, map))),
    }
}

/// Substitute numeric constants for named parameters.
pub fn bind_constants(expr: &Expression, values: &BTreeMap<String, f64>) -> Expression {
    let map: HashMap<String, Expression> = values
        .iter()
        .map(|(k, v)| (k.clone(), Expression::num(*v)))
        .collect();
    substitute(expr, &map)
}

// ---------------------------------------------------------------------------
// Normal form

#[derive(Clone, Debug)]
enum Atom {
    Var(String),
    Opaque(String, Node),
}

impl Atom {
    fn rank(&self) -> u8 {
        match self {
            Atom::Var(_) => 0,
            Atom::Opaque(..) => 1,
        }
    }

    fn key(&self) -> &str {
        match self {
            Atom::Var(s) | Atom::Opaque(s, _) => s,
        }
    }

    fn node(&self) -> Node {
        match self {
            Atom::Var(s) => Node::Var(s.clone()),
            Atom::Opaque(_, n) => n.clone(),
        }
    }
}

impl PartialEq for Atom {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Atom {}
impl Ord for Atom {
    fn cmp(&self, other: &Self) -> Ordering {
        self.rank().cmp(&other.rank()).then_with(|| match (self, other) {
            (Atom::Var(a), Atom::Var(c)) => cmp_var_names(a, c),
            _ => self.key().cmp(other.key()),
        })
    }
}
impl PartialOrd for Atom {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Product of atoms with nonzero integer exponents, sorted by atom.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Default)]
struct Mono(Vec<(Atom, i32)>);

impl Mono {
    fn degree(&self) -> i32 {
        self.0.iter().map(|(_, e)| e.abs()).sum()
    }

    fn mul(&self, other: &Mono) -> Mono {
        let mut map: BTreeMap<Atom, i32> = BTreeMap::new();
        for (a, e) in self.0.iter().chain(other.0.iter()) {
            *map.entry(a.clone()).or_insert(0) += e;
        }
        Mono(map.into_iter().filter(|(_, e)| *e != 0).collect())
    }

    fn pow(&self, k: i32) -> Mono {
        Mono(self.0.iter().map(|(a, e)| (a.clone(), e * k)).collect())
    }
}

#[derive(Clone, Debug, Default)]
struct Poly(BTreeMap<Mono, f64>);

const MAX_EXPANDED_TERMS: usize = 400;

impl Poly {
    fn constant(c: f64) -> Poly {
        let mut m = BTreeMap::new();
        if c != 0.0 {
            m.insert(Mono::default(), c);
        }
        Poly(m)
    }

    fn atom(a: Atom) -> Poly {
        let mut m = BTreeMap::new();
        m.insert(Mono(vec![(a, 1)]), 1.0);
        Poly(m)
    }

    fn as_constant(&self) -> Option<f64> {
        match self.0.len() {
            0 => Some(0.0),
            1 => self.0.get(&Mono::default()).copied(),
            _ => None,
        }
    }

    fn single_term(&self) -> Option<(&Mono, f64)> {
        if self.0.len() == 1 {
            self.0.iter().next().map(|(m, c)| (m, *c))
        } else {
            None
        }
    }

    fn add(mut self, other: &Poly, sign: f64) -> Poly {
        for (m, c) in &other.0 {
            *self.0.entry(m.clone()).or_insert(0.0) += sign * c;
        }
        self.cleanup();
        self
    }

    fn scale(mut self, s: f64) -> Poly {
        for c in self.0.values_mut() {
            *c *= s;
        }
        self.cleanup();
        self
    }

    fn mul(&self, other: &Poly) -> Option<Poly> {
        if self.0.len() * other.0.len() > MAX_EXPANDED_TERMS {
            return None;
        }
        let mut out: BTreeMap<Mono, f64> = BTreeMap::new();
        for (m1, c1) in &self.0 {
            for (m2, c2) in &other.0 {
                *out.entry(m1.mul(m2)).or_insert(0.0) += c1 * c2;
            }
        }
        let mut p = Poly(out);
        p.cleanup();
        Some(p)
    }

    fn cleanup(&mut self) {
        let max = self.0.values().fold(0.0f64, |a, c| a.max(c.abs()));
        self.0.retain(|_, c| *c != 0.0 && c.abs() > 1e-14 * max);
    }
}

/// `Some(r)` when `a == r * b` term by term.
fn proportional(a: &Poly, b: &Poly) -> Option<f64> {
    if a.0.is_empty() {
        return Some(0.0);
    }
    if a.0.len() != b.0.len() {
        return None;
    }
    let (m0, c0) = b.0.iter().next()?;
    let r = a.0.get(m0)? / c0;
    let ok = b.0.iter().all(|(m, c)| {
        a.0.get(m)
            .is_some_and(|ac| (ac - r * c).abs() <= 1e-14 * ac.abs().max((r * c).abs()))
    });
    ok.then_some(r)
}

fn to_poly(node: &Node) -> Option<Poly> {
    Some(match node {
        Node::Num(v) => Poly::constant(*v),
        Node::Var(v) => Poly::atom(Atom::Var(v.clone())),
        Node::Neg(a) => to_poly(a)?.scale(-1.0),
        Node::Add(x, y) => to_poly(x)?.add(&to_poly(y)?, 1.0),
        Node::Sub(x, y) => to_poly(x)?.add(&to_poly(y)?, -1.0),
        Node::Mul(x, y) => to_poly(x)?.mul(&to_poly(y)?)?,
        Node::Div(x, y) => {
            let num_p = to_poly(x)?;
            let den = to_poly(y)?;
            if let Some(c) = den.as_constant() {
                if c == 0.0 {
                    return None;
                }
                num_p.scale(1.0 / c)
            } else if let Some((m, c)) = den.single_term() {
                let inv = Poly([(m.pow(-1), 1.0 / c)].into_iter().collect());
                num_p.mul(&inv)?
            } else if let Some(ratio) = proportional(&num_p, &den) {
                Poly::constant(ratio)
            } else {
                let den_node = from_poly(&den);
                let atom = Atom::Opaque(den_node.to_string(), den_node);
                let inv = Poly([(Mono(vec![(atom, -1)]), 1.0)].into_iter().collect());
                num_p.mul(&inv)?
            }
        }
        Node::Pow(x, k) => {
            let base = to_poly(x)?;
            if let Some((m, c)) = base.single_term() {
                let mut out = BTreeMap::new();
                if *k == 0 {
                    out.insert(Mono::default(), 1.0);
                } else {
                    out.insert(m.pow(*k), c.powi(*k));
                }
                let mut p = Poly(out);
                p.cleanup();
                p
            } else if *k >= 0 {
                let mut acc = Poly::constant(1.0);
                for _ in 0..*k {
                    acc = acc.mul(&base)?;
                }
                acc
            } else {
                let base_node = from_poly(&base);
                let atom = Atom::Opaque(base_node.to_string(), base_node);
                Poly([(Mono(vec![(atom, *k)]), 1.0)].into_iter().collect())
            }
        }
        Node::Call(f, x) => {
            let inner = simplify_node(x);
            if let Some(c) = inner.as_num() {
                let v = match f {
                    Func::Sin => Some(c.sin()),
                    Func::Cos => Some(c.cos()),
                    Func::Exp => Some(c.exp()),
                    Func::Ln if c > 0.0 => Some(c.ln()),
                    Func::Sqrt if c >= 0.0 => Some(c.sqrt()),
                    _ => None,
                };
                if let Some(v) = v {
                    return Some(Poly::constant(v));
                }
            }
            let n = Node::Call(*f, b(inner));
            Poly::atom(Atom::Opaque(n.to_string(), n))
        }
    })
}

fn term_order(a: &(&Mono, &f64), c: &(&Mono, &f64)) -> Ordering {
    let ka = (a.0 .0.is_empty(), a.0.degree());
    let kc = (c.0 .0.is_empty(), c.0.degree());
    ka.cmp(&kc).then_with(|| a.0.cmp(c.0))
}

fn mono_node(m: &Mono, coef: f64) -> Node {
    let mut numer: Vec<Node> = Vec::new();
    let mut denom: Vec<Node> = Vec::new();
    for (a, e) in &m.0 {
        let base = a.node();
        let pow = |k: i32| if k == 1 { base.clone() } else { Node::Pow(b(base.clone()), k) };
        if *e > 0 {
            numer.push(pow(*e));
        } else {
            denom.push(pow(-*e));
        }
    }
    let mut acc: Option<Node> = if numer.is_empty() || (coef != 1.0 && coef != -1.0) {
        Some(num(coef))
    } else {
        None
    };
    let negate_first = coef == -1.0 && !numer.is_empty();
    for (i, f) in numer.into_iter().enumerate() {
        let f = if i == 0 && negate_first { Node::Neg(b(f)) } else { f };
        acc = Some(match acc {
            None => f,
            Some(a) => Node::Mul(b(a), b(f)),
        });
    }
    let mut out = acc.unwrap_or(num(1.0));
    for d in denom {
        out = Node::Div(b(out), b(d));
    }
    out
}

fn from_poly(p: &Poly) -> Node {
    let mut terms: Vec<(&Mono, &f64)> = p.0.iter().collect();
    terms.sort_by(term_order);
    let mut out: Option<Node> = None;
    for (m, &c) in terms {
        out = Some(match out {
            None => mono_node(m, c),
            Some(acc) => {
                if c < 0.0 {
                    Node::Sub(b(acc), b(mono_node(m, -c)))
                } else {
                    Node::Add(b(acc), b(mono_node(m, c)))
                }
            }
        });
    }
    out.unwrap_or(num(0.0))
}

fn simplify_node(node: &Node) -> Node {
    match to_poly(node) {
        Some(p) => from_poly(&p),
        None => node.clone(),
    }
}

/// Normal form of `expr`.
pub fn simplify(expr: &Expression) -> Expression {
    Expression::new(simplify_node(expr.root()))
}

/// Normal form of a constraint `expr = 0`, chosen to describe the same zero
/// set with a regular defining function where that is cheap to see:
/// constant factors are dropped, the leading coefficient is scaled to one,
/// and a lone monomial is replaced by its square-free part (`q1^2` → `q1`).
pub fn normalize_constraint(expr: &Expression) -> Expression {
    let Some(p) = to_poly(expr.root()) else {
        return expr.clone();
    };
    if p.0.is_empty() {
        return Expression::zero();
    }
    if let Some((m, _)) = p.single_term() {
        if m.0.is_empty() {
            return Expression::num(1.0);
        }
        let radical = Mono(
            m.0.iter()
                .filter(|(_, e)| *e > 0)
                .map(|(a, _)| (a.clone(), 1))
                .collect(),
        );
        if radical.0.is_empty() {
            // 1/x = 0 has no solutions.
            return Expression::num(1.0);
        }
        return Expression::new(mono_node(&radical, 1.0));
    }
    let mut terms: Vec<(&Mono, &f64)> = p.0.iter().collect();
    terms.sort_by(term_order);
    let lead = *terms[0].1;
    Expression::new(from_poly(&p.clone().scale(1.0 / lead)))
}

/// Print a number the way the normal form does.
pub fn format_number(v: f64) -> String {
    fmt_number(v)
}
