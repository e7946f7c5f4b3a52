//! Expression language: parsing, printing, evaluation and differentiation.

mod ast;
pub mod fd;
mod jet;
mod parser;
pub mod symbolic;
mod tape;

pub use ast::{cmp_var_names, Expression, Func, Node, VarName};
pub use jet::Jet2;
pub use parser::{parse, ParseError};
pub use symbolic::{derivative, gradient, normalize_constraint, simplify, substitute};
pub use tape::{EvalError, Tape, TapeSet};

use std::collections::HashMap;

/// Assignment of values to variable names.
pub type Point = HashMap<String, f64>;

/// Evaluate at a named point. Every free variable must be bound.
pub fn eval(expr: &Expression, point: &Point) -> Result<f64, EvalError> {
    let vars = expr.free_vars().to_vec();
    let x = vars
        .iter()
        .map(|v| point.get(v).copied().ok_or_else(|| EvalError::UnboundVariable(v.clone())))
        .collect::<Result<Vec<_>, _>>()?;
    Tape::compile(expr, &vars)?.eval(&x)
}

/// Value, gradient and Hessian with respect to `active` (in that order).
/// Free variables outside `active` are read from `point` and held fixed.
pub fn eval_jet2(expr: &Expression, point: &Point, active: &[String]) -> Result<Jet2, EvalError> {
    let mut vars = active.to_vec();
    for v in expr.free_vars() {
        if !vars.contains(v) {
            vars.push(v.clone());
        }
    }
    let x = vars
        .iter()
        .map(|v| point.get(v).copied().ok_or_else(|| EvalError::UnboundVariable(v.clone())))
        .collect::<Result<Vec<_>, _>>()?;
    let tape = Tape::compile(expr, &vars)?;
    let slots: Vec<usize> = (0..active.len()).collect();
    tape.jet2(&x, &slots)
}

/// Central-difference gradient with respect to `active`.
pub fn finite_diff_grad(
    expr: &Expression,
    point: &Point,
    active: &[String],
    h: f64,
) -> Result<Vec<f64>, EvalError> {
    assert!(h > 0.0, "finite-difference step must be positive");
    let mut vars = active.to_vec();
    for v in expr.free_vars() {
        if !vars.contains(v) {
            vars.push(v.clone());
        }
    }
    let x = vars
        .iter()
        .map(|v| point.get(v).copied().ok_or_else(|| EvalError::UnboundVariable(v.clone())))
        .collect::<Result<Vec<_>, _>>()?;
    let tape = Tape::compile(expr, &vars)?;
    let full = fd::gradient(&tape, &x, h)?;
    Ok(full[..active.len()].to_vec())
}
