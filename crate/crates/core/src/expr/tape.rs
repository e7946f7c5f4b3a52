//! Flat evaluation tape bound to a fixed variable ordering.

use super::ast::{Expression, Func, Node};
use super::jet::Jet2;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("division by zero")]
    DivisionByZero,
    #[error("unbound variable `{0}`")]
    UnboundVariable(String),
}

#[derive(Clone, Debug)]
enum Op {
    Const(f64),
    Var(usize),
    Neg(usize),
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    Div(usize, usize),
    Pow(usize, i32),
    Call(Func, usize),
}

/// An expression compiled against an ordered variable list.
#[derive(Clone, Debug)]
pub struct Tape {
    ops: Vec<Op>,
    vars: Vec<String>,
}

fn powi_checked(x: f64, k: i32) -> Result<f64, EvalError> {
    if k < 0 && x == 0.0 {
        return Err(EvalError::DivisionByZero);
    }
    Ok(x.powi(k))
}

fn func_value(f: Func, x: f64) -> Result<f64, EvalError> {
    match f {
        Func::Sin => Ok(x.sin()),
        Func::Cos => Ok(x.cos()),
        Func::Exp => Ok(x.exp()),
        Func::Ln => {
            if x <= 0.0 {
                Err(EvalError::Domain(format!("ln of non-positive value {x}")))
            } else {
                Ok(x.ln())
            }
        }
        Func::Sqrt => {
            if x < 0.0 {
                Err(EvalError::Domain(format!("sqrt of negative value {x}")))
            } else {
                Ok(x.sqrt())
            }
        }
    }
}

/// (f, f', f'') for the elementary functions.
fn func_derivs(f: Func, x: f64) -> Result<(f64, f64, f64), EvalError> {
    match f {
        Func::Sin => Ok((x.sin(), x.cos(), -x.sin())),
        Func::Cos => Ok((x.cos(), -x.sin(), -x.cos())),
        Func::Exp => {
            let e = x.exp();
            Ok((e, e, e))
        }
        Func::Ln => {
            if x <= 0.0 {
                return Err(EvalError::Domain(format!("ln of non-positive value {x}")));
            }
            Ok((x.ln(), 1.0 / x, -1.0 / (x * x)))
        }
        Func::Sqrt => {
            if x < 0.0 {
                return Err(EvalError::Domain(format!("sqrt of negative value {x}")));
            }
            if x == 0.0 {
                return Err(EvalError::Domain("sqrt is not differentiable at 0".into()));
            }
            let s = x.sqrt();
            Ok((s, 0.5 / s, -0.25 / (s * x)))
        }
    }
}

impl Tape {
    /// Compile `expr` so that slot `i` reads `vars[i]`.
    pub fn compile(expr: &Expression, vars: &[String]) -> Result<Tape, EvalError> {
        let mut ops = Vec::new();
        emit(expr.root(), vars, &mut ops)?;
        Ok(Tape {
            ops,
            vars: vars.to_vec(),
        })
    }

    pub fn vars(&self) -> &[String] {
        &self.vars
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64, EvalError> {
        let mut vals: Vec<f64> = Vec::with_capacity(self.ops.len());
        for op in &self.ops {
            let v = match *op {
                Op::Const(c) => c,
                Op::Var(i) => x[i],
                Op::Neg(a) => -vals[a],
                Op::Add(a, b) => vals[a] + vals[b],
                Op::Sub(a, b) => vals[a] - vals[b],
                Op::Mul(a, b) => vals[a] * vals[b],
                Op::Div(a, b) => {
                    if vals[b] == 0.0 {
                        return Err(EvalError::DivisionByZero);
                    }
                    vals[a] / vals[b]
                }
                Op::Pow(a, k) => powi_checked(vals[a], k)?,
                Op::Call(f, a) => func_value(f, vals[a])?,
            };
            vals.push(v);
        }
        Ok(*vals.last().expect("tape is never empty"))
    }

    /// Jet with respect to the slots listed in `active`.
    pub fn jet2(&self, x: &[f64], active: &[usize]) -> Result<Jet2, EvalError> {
        let n = active.len();
        let mut vals: Vec<Jet2> = Vec::with_capacity(self.ops.len());
        for op in &self.ops {
            let v = match *op {
                Op::Const(c) => Jet2::constant(c, n),
                Op::Var(i) => match active.iter().position(|&a| a == i) {
                    Some(slot) => Jet2::variable(x[i], n, slot),
                    None => Jet2::constant(x[i], n),
                },
                Op::Neg(a) => vals[a].neg(),
                Op::Add(a, b) => vals[a].add(&vals[b]),
                Op::Sub(a, b) => vals[a].sub(&vals[b]),
                Op::Mul(a, b) => vals[a].mul(&vals[b]),
                Op::Div(a, b) => {
                    let d = vals[b].value;
                    if d == 0.0 {
                        return Err(EvalError::DivisionByZero);
                    }
                    let inv = vals[b].chain(1.0 / d, -1.0 / (d * d), 2.0 / (d * d * d));
                    vals[a].mul(&inv)
                }
                Op::Pow(a, k) => {
                    let u = vals[a].value;
                    if k < 0 && u == 0.0 {
                        return Err(EvalError::DivisionByZero);
                    }
                    let kf = k as f64;
                    let f = u.powi(k);
                    let df = if k == 0 { 0.0 } else { kf * u.powi(k - 1) };
                    let d2f = if k == 0 || k == 1 {
                        0.0
                    } else {
                        kf * (kf - 1.0) * u.powi(k - 2)
                    };
                    vals[a].chain(f, df, d2f)
                }
                Op::Call(func, a) => {
                    let (f, df, d2f) = func_derivs(func, vals[a].value)?;
                    vals[a].chain(f, df, d2f)
                }
            };
            vals.push(v);
        }
        Ok(vals.pop().expect("tape is never empty"))
    }

    /// Gradient with respect to every slot.
    pub fn gradient(&self, x: &[f64]) -> Result<Vec<f64>, EvalError> {
        let all: Vec<usize> = (0..self.vars.len()).collect();
        Ok(self.jet2(x, &all)?.grad().to_vec())
    }
}

fn emit(node: &Node, vars: &[String], ops: &mut Vec<Op>) -> Result<usize, EvalError> {
    let op = match node {
        Node::Num(v) => Op::Const(*v),
        Node::Var(name) => {
            let i = vars
                .iter()
                .position(|v| v == name)
                .ok_or_else(|| EvalError::UnboundVariable(name.clone()))?;
            Op::Var(i)
        }
        Node::Neg(a) => Op::Neg(emit(a, vars, ops)?),
        Node::Add(a, b) => Op::Add(emit(a, vars, ops)?, emit(b, vars, ops)?),
        Node::Sub(a, b) => Op::Sub(emit(a, vars, ops)?, emit(b, vars, ops)?),
        Node::Mul(a, b) => Op::Mul(emit(a, vars, ops)?, emit(b, vars, ops)?),
        Node::Div(a, b) => Op::Div(emit(a, vars, ops)?, emit(b, vars, ops)?),
        Node::Pow(a, k) => Op::Pow(emit(a, vars, ops)?, *k),
        Node::Call(f, a) => Op::Call(*f, emit(a, vars, ops)?),
    };
    ops.push(op);
    Ok(ops.len() - 1)
}

/// Several tapes sharing one variable ordering; the usual way to evaluate a
/// constraint system.
#[derive(Clone, Debug)]
pub struct TapeSet {
    tapes: Vec<Tape>,
    vars: Vec<String>,
}

impl TapeSet {
    pub fn compile(exprs: &[Expression], vars: &[String]) -> Result<TapeSet, EvalError> {
        let tapes = exprs
            .iter()
            .map(|e| Tape::compile(e, vars))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(TapeSet {
            tapes,
            vars: vars.to_vec(),
        })
    }

    pub fn len(&self) -> usize {
        self.tapes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tapes.is_empty()
    }

    pub fn vars(&self) -> &[String] {
        &self.vars
    }

    pub fn tapes(&self) -> &[Tape] {
        &self.tapes
    }

    pub fn eval(&self, x: &[f64]) -> Result<Vec<f64>, EvalError> {
        self.tapes.iter().map(|t| t.eval(x)).collect()
    }

    /// Row-major Jacobian (one row per tape) with respect to all slots.
    pub fn jacobian(&self, x: &[f64]) -> Result<Vec<Vec<f64>>, EvalError> {
        self.tapes.iter().map(|t| t.gradient(x)).collect()
    }
}
