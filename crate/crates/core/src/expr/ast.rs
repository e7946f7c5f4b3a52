use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::fmt;
use std::ops;

/// Elementary functions accepted by the DSL.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Ln,
    Sqrt,
}

impl Func {
    pub fn from_name(name: &str) -> Option<Func> {
        match name {
            "sin" => Some(Func::Sin),
            "cos" => Some(Func::Cos),
            "exp" => Some(Func::Exp),
            "ln" => Some(Func::Ln),
            "sqrt" => Some(Func::Sqrt),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Ln => "ln",
            Func::Sqrt => "sqrt",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Node {
    Num(f64),
    Var(String),
    Neg(Box<Node>),
    Add(Box<Node>, Box<Node>),
    Sub(Box<Node>, Box<Node>),
    Mul(Box<Node>, Box<Node>),
    Div(Box<Node>, Box<Node>),
    /// Integer powers only; keeps jets exact away from branch cuts.
    Pow(Box<Node>, i32),
    Call(Func, Box<Node>),
}

impl Node {
    fn collect_vars(&self, out: &mut BTreeSet<VarName>) {
        match self {
            Node::Num(_) => {}
            Node::Var(v) => {
                out.insert(VarName(v.clone()));
            }
            Node::Neg(a) | Node::Pow(a, _) | Node::Call(_, a) => a.collect_vars(out),
            Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) | Node::Div(a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
        }
    }

    pub fn as_num(&self) -> Option<f64> {
        match self {
            Node::Num(v) => Some(*v),
            _ => None,
        }
    }

    /// Grammar level at which this node prints without parentheses:
    /// 0 = expr, 1 = term, 2 = factor, 3 = atom.
    fn level(&self) -> u8 {
        match self {
            Node::Add(..) | Node::Sub(..) => 0,
            Node::Mul(..) | Node::Div(..) => 1,
            Node::Pow(..) => 2,
            _ => 3,
        }
    }
}

/// Variable name ordered "naturally": `q2 < q10`, and by prefix first.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct VarName(pub String);

fn split_name(s: &str) -> (&str, Option<u64>) {
    let idx = s
        .char_indices()
        .rev()
        .take_while(|(_, c)| c.is_ascii_digit())
        .last()
        .map(|(i, _)| i);
    match idx {
        Some(i) => (&s[..i], s[i..].parse().ok()),
        None => (s, None),
    }
}

/// Natural ordering on variable names, used for every deterministic listing.
pub fn cmp_var_names(a: &str, b: &str) -> Ordering {
    let (pa, na) = split_name(a);
    let (pb, nb) = split_name(b);
    pa.cmp(pb).then(na.cmp(&nb)).then(a.cmp(b))
}

impl Ord for VarName {
    fn cmp(&self, other: &Self) -> Ordering {
        cmp_var_names(&self.0, &other.0)
    }
}

impl PartialOrd for VarName {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// A parsed scalar expression over named real variables.
#[derive(Clone, Debug, PartialEq)]
pub struct Expression {
    root: Node,
    free_vars: Vec<String>,
}

impl Expression {
    pub fn new(root: Node) -> Self {
        let mut set = BTreeSet::new();
        root.collect_vars(&mut set);
        Expression {
            root,
            free_vars: set.into_iter().map(|v| v.0).collect(),
        }
    }

    pub fn num(v: f64) -> Self {
        Expression::new(Node::Num(v))
    }

    pub fn var(name: &str) -> Self {
        Expression::new(Node::Var(name.to_string()))
    }

    pub fn zero() -> Self {
        Expression::num(0.0)
    }

    pub fn root(&self) -> &Node {
        &self.root
    }

    pub fn into_root(self) -> Node {
        self.root
    }

    /// Free variables in natural order.
    pub fn free_vars(&self) -> &[String] {
        &self.free_vars
    }

    pub fn depends_on(&self, name: &str) -> bool {
        self.free_vars.iter().any(|v| v == name)
    }

    pub fn depends_on_any(&self, names: &[String]) -> bool {
        names.iter().any(|n| self.depends_on(n))
    }

    pub fn as_constant(&self) -> Option<f64> {
        self.root.as_num()
    }

    pub fn is_zero(&self) -> bool {
        self.as_constant() == Some(0.0)
    }

    pub fn powi(self, k: i32) -> Self {
        Expression::new(Node::Pow(Box::new(self.root), k))
    }

    pub fn call(f: Func, arg: Expression) -> Self {
        Expression::new(Node::Call(f, Box::new(arg.root)))
    }

    /// Sum of a list; `0` when empty.
    pub fn sum<I: IntoIterator<Item = Expression>>(items: I) -> Self {
        let mut acc: Option<Expression> = None;
        for e in items {
            acc = Some(match acc {
                None => e,
                Some(a) => a + e,
            });
        }
        acc.unwrap_or_else(Expression::zero)
    }
}

macro_rules! binop {
    ($trait:ident, $method:ident, $variant:ident) => {
        impl ops::$trait for Expression {
            type Output = Expression;
            fn $method(self, rhs: Expression) -> Expression {
                Expression::new(Node::$variant(Box::new(self.root), Box::new(rhs.root)))
            }
        }
        impl ops::$trait<f64> for Expression {
            type Output = Expression;
            fn $method(self, rhs: f64) -> Expression {
                Expression::new(Node::$variant(Box::new(self.root), Box::new(Node::Num(rhs))))
            }
        }
    };
}

binop!(Add, add, Add);
binop!(Sub, sub, Sub);
binop!(Mul, mul, Mul);
binop!(Div, div, Div);

impl ops::Neg for Expression {
    type Output = Expression;
    fn neg(self) -> Expression {
        Expression::new(Node::Neg(Box::new(self.root)))
    }
}

pub(crate) fn fmt_number(v: f64) -> String {
    let a = v.abs();
    if a == 0.0 || (1e-5..1e15).contains(&a) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

fn write_node(f: &mut fmt::Formatter<'_>, node: &Node, min_level: u8) -> fmt::Result {
    let needs_parens = node.level() < min_level;
    if needs_parens {
        f.write_str("(")?;
    }
    match node {
        Node::Num(v) => f.write_str(&fmt_number(*v))?,
        Node::Var(v) => f.write_str(v)?,
        Node::Neg(a) => {
            f.write_str("-")?;
            write_node(f, a, 3)?;
        }
        Node::Add(a, b) => {
            write_node(f, a, 0)?;
            f.write_str(" + ")?;
            write_node(f, b, 1)?;
        }
        Node::Sub(a, b) => {
            write_node(f, a, 0)?;
            f.write_str(" - ")?;
            write_node(f, b, 1)?;
        }
        Node::Mul(a, b) => {
            write_node(f, a, 1)?;
            f.write_str("*")?;
            write_node(f, b, 2)?;
        }
        Node::Div(a, b) => {
            write_node(f, a, 1)?;
            f.write_str("/")?;
            write_node(f, b, 2)?;
        }
        Node::Pow(a, k) => {
            // A negated base is an atom in the grammar, but "-x^2" reads badly.
            let base_level = match **a {
                Node::Neg(_) => 4,
                Node::Num(v) if v < 0.0 => 4,
                _ => 3,
            };
            write_node(f, a, base_level)?;
            write!(f, "^{k}")?;
        }
        Node::Call(func, a) => {
            write!(f, "{}(", func.name())?;
            write_node(f, a, 0)?;
            f.write_str(")")?;
        }
    }
    if needs_parens {
        f.write_str(")")?;
    }
    Ok(())
}

impl fmt::Display for Node {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_node(f, self, 0)
    }
}

impl fmt::Display for Expression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_node(f, &self.root, 0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn natural_order() {
        let mut v = vec!["q10", "p1", "q2", "qd1", "q1"];
        v.sort_by(|a, b| cmp_var_names(a, b));
        assert_eq!(v, vec!["p1", "q1", "q2", "q10", "qd1"]);
    }

    #[test]
    fn printing_parenthesizes_by_level() {
        let e = (Expression::var("a") + Expression::var("b")) * Expression::var("c");
        assert_eq!(e.to_string(), "(a + b)*c");
        let e = -(Expression::var("x").powi(2));
        assert_eq!(e.to_string(), "-(x^2)");
        let e = (-Expression::var("x")).powi(2);
        assert_eq!(e.to_string(), "(-x)^2");
        let e = Expression::var("a") - (Expression::var("b") - Expression::var("c"));
        assert_eq!(e.to_string(), "a - (b - c)");
    }
}
