//! Expression-level elimination for systems affine in a set of unknowns.
//!
//! Each row reads `Σ_j c_j(x)·u_j + c_0(x) = 0`. Pivots are chosen only
//! where the coefficient is a nonzero constant or is nonzero at every sample
//! of the region under study, so the reduced system is valid on that region.

use crate::expr::{derivative, simplify, substitute, Expression, Tape};
use std::collections::HashMap;

#[derive(Clone, Debug, PartialEq)]
pub struct AffineRow {
    pub coeffs: Vec<Expression>,
    pub constant: Expression,
}

impl AffineRow {
    pub fn to_expression(&self, unknowns: &[String]) -> Expression {
        let terms = self
            .coeffs
            .iter()
            .zip(unknowns)
            .filter(|(c, _)| !c.is_zero())
            .map(|(c, u)| c.clone() * Expression::var(u));
        simplify(&Expression::sum(terms.chain(std::iter::once(self.constant.clone()))))
    }

    fn is_free_of_unknowns(&self) -> bool {
        self.coeffs.iter().all(Expression::is_zero)
    }
}

/// Split `expr` as an affine function of `unknowns`, or `None` when some
/// second derivative in the unknowns is not identically zero.
pub fn split_affine(expr: &Expression, unknowns: &[String]) -> Option<AffineRow> {
    let coeffs: Vec<Expression> = unknowns.iter().map(|u| derivative(expr, u)).collect();
    if coeffs.iter().any(|c| c.depends_on_any(unknowns)) {
        return None;
    }
    let zeros: HashMap<String, Expression> = unknowns
        .iter()
        .map(|u| (u.clone(), Expression::zero()))
        .collect();
    let constant = substitute(expr, &zeros);
    Some(AffineRow { coeffs, constant })
}

/// True when `expr` is affine in `unknowns`.
pub fn is_affine(expr: &Expression, unknowns: &[String]) -> bool {
    split_affine(expr, unknowns).is_some()
}

#[derive(Clone, Debug, Default)]
pub struct Elimination {
    /// `(row, unknown)` for each pivot, in elimination order.
    pub pivots: Vec<(usize, usize)>,
    /// Rows after Gauss-Jordan reduction (same indexing as the input).
    pub rows: Vec<AffineRow>,
    /// Solvability conditions: constants of rows whose coefficients vanish.
    pub conditions: Vec<Expression>,
    /// Some row had coefficients vanishing on part of the region only.
    pub stratified: bool,
}

impl Elimination {
    /// Particular solution with free unknowns set to zero, one entry per
    /// unknown (`None` for free ones).
    pub fn particular_solution(&self, n_unknowns: usize) -> Vec<Option<Expression>> {
        let mut out = vec![None; n_unknowns];
        for &(r, j) in &self.pivots {
            let row = &self.rows[r];
            let value = simplify(&(-(row.constant.clone()) / row.coeffs[j].clone()));
            out[j] = Some(value);
        }
        out
    }

    /// Some condition is a nonzero constant.
    pub fn inconsistent(&self) -> bool {
        self.conditions
            .iter()
            .any(|c| c.as_constant().is_some_and(|v| v != 0.0))
    }

    pub fn rank(&self) -> usize {
        self.pivots.len()
    }
}

/// Values of `e` at each sample (`NaN` where evaluation fails).
fn sample_values(e: &Expression, vars: &[String], samples: &[Vec<f64>]) -> Vec<f64> {
    match Tape::compile(e, vars) {
        Ok(t) => samples
            .iter()
            .map(|x| t.eval(x).unwrap_or(f64::NAN))
            .collect(),
        Err(_) => vec![f64::NAN; samples.len()],
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Support {
    Zero,
    Nowhere,
    Everywhere,
    Partial,
}

fn support(e: &Expression, vars: &[String], samples: &[Vec<f64>], tol: f64) -> Support {
    if e.is_zero() {
        return Support::Zero;
    }
    if e.as_constant().is_some() {
        return Support::Everywhere;
    }
    if samples.is_empty() {
        return Support::Partial;
    }
    let vals = sample_values(e, vars, samples);
    let scale = vals.iter().filter(|v| v.is_finite()).fold(1.0f64, |a, v| a.max(v.abs()));
    let nonzero = vals
        .iter()
        .filter(|v| v.is_finite() && v.abs() > tol * scale)
        .count();
    if vals.iter().any(|v| !v.is_finite()) {
        return if nonzero == 0 { Support::Nowhere } else { Support::Partial };
    }
    match nonzero {
        0 => Support::Nowhere,
        k if k == samples.len() => Support::Everywhere,
        _ => Support::Partial,
    }
}

/// Gauss-Jordan elimination with pivots valid on the sampled region.
///
/// `vars` orders the coordinates of `samples`; coefficient expressions must
/// only use those names.
pub fn eliminate(
    rows: Vec<AffineRow>,
    vars: &[String],
    samples: &[Vec<f64>],
    tol: f64,
) -> Elimination {
    let n_unknowns = rows.first().map_or(0, |r| r.coeffs.len());
    let mut rows = rows;
    let mut used = vec![false; rows.len()];
    let mut pivots = Vec::new();

    for j in 0..n_unknowns {
        let mut choice: Option<usize> = None;
        // Constant pivots first, then pivots that never vanish on the region.
        for r in (0..rows.len()).filter(|&r| !used[r]) {
            if rows[r].coeffs[j].as_constant().is_some_and(|c| c != 0.0) {
                choice = Some(r);
                break;
            }
        }
        if choice.is_none() {
            choice = (0..rows.len())
                .filter(|&r| !used[r])
                .find(|&r| support(&rows[r].coeffs[j], vars, samples, tol) == Support::Everywhere);
        }
        let Some(pr) = choice else { continue };
        used[pr] = true;
        pivots.push((pr, j));
        let piv = rows[pr].clone();
        let piv_const = piv.coeffs[j].as_constant();
        for r in 0..rows.len() {
            if r == pr || rows[r].coeffs[j].is_zero() {
                continue;
            }
            let a = rows[r].coeffs[j].clone();
            let combine = |x: &Expression, y: &Expression| -> Expression {
                match piv_const {
                    Some(c) => simplify(&(x.clone() - (a.clone() / c) * y.clone())),
                    None => simplify(&(piv.coeffs[j].clone() * x.clone() - a.clone() * y.clone())),
                }
            };
            let coeffs: Vec<Expression> = rows[r]
                .coeffs
                .iter()
                .zip(&piv.coeffs)
                .map(|(x, y)| combine(x, y))
                .collect();
            let constant = combine(&rows[r].constant, &piv.constant);
            rows[r] = AffineRow { coeffs, constant };
        }
    }

    let mut conditions = Vec::new();
    let mut stratified = false;
    for r in (0..rows.len()).filter(|&r| !used[r]) {
        let row = &rows[r];
        let supports: Vec<Support> = row
            .coeffs
            .iter()
            .map(|c| support(c, vars, samples, tol))
            .collect();
        if row.is_free_of_unknowns()
            || supports.iter().all(|s| matches!(s, Support::Zero | Support::Nowhere))
        {
            if !row.constant.is_zero() {
                conditions.push(row.constant.clone());
            }
        } else {
            stratified = true;
        }
    }
    Elimination {
        pivots,
        rows,
        conditions,
        stratified,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    fn names(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn split_detects_affinity() {
        let u = names(&["qd1", "qd2"]);
        let row = split_affine(&parse("p1 - (qd1 + qd2)").unwrap(), &u).unwrap();
        assert_eq!(row.coeffs[0].to_string(), "-1");
        assert_eq!(row.constant.to_string(), "p1");
        assert!(split_affine(&parse("p1 - qd1^2").unwrap(), &u).is_none());
        assert!(split_affine(&parse("q1*qd1 + sin(q1)").unwrap(), &u).is_some());
    }

    #[test]
    fn legendre_rows_of_example_one() {
        let u = names(&["qd1", "qd2", "qd3"]);
        let rows: Vec<AffineRow> = ["p1 - (qd1 + qd2)", "p2 - (qd1 + qd2)", "p3"]
            .iter()
            .map(|t| split_affine(&parse(t).unwrap(), &u).unwrap())
            .collect();
        let el = eliminate(rows, &names(&["p1", "p2", "p3"]), &[], 1e-9);
        assert_eq!(el.rank(), 1);
        let conds: Vec<String> = el.conditions.iter().map(|c| c.to_string()).collect();
        assert_eq!(conds, ["-p1 + p2", "p3"]);
        let sol = el.particular_solution(3);
        assert_eq!(sol[0].as_ref().unwrap().to_string(), "p1");
        assert!(sol[1].is_none() && sol[2].is_none());
    }

    #[test]
    fn zero_row_becomes_condition() {
        let u = names(&["xd1"]);
        let rows = vec![
            split_affine(&parse("xd1").unwrap(), &u).unwrap(),
            split_affine(&parse("x1").unwrap(), &u).unwrap(),
        ];
        let el = eliminate(rows, &names(&["x1"]), &[], 1e-9);
        assert_eq!(el.conditions.len(), 1);
        assert_eq!(el.conditions[0].to_string(), "x1");
    }

    #[test]
    fn contradiction_is_inconsistent() {
        let u = names(&["xd1"]);
        let rows = vec![
            split_affine(&parse("xd1 - 1").unwrap(), &u).unwrap(),
            split_affine(&parse("xd1").unwrap(), &u).unwrap(),
        ];
        let el = eliminate(rows, &names(&["x1"]), &[], 1e-9);
        assert!(el.inconsistent());
    }

    #[test]
    fn vanishing_pivot_marks_stratification() {
        let u = names(&["xd1"]);
        let rows = vec![split_affine(&parse("x1*xd1 - 1").unwrap(), &u).unwrap()];
        let samples = vec![vec![0.0], vec![1.0]];
        let el = eliminate(rows, &names(&["x1"]), &samples, 1e-9);
        assert!(el.stratified);
        assert_eq!(el.rank(), 0);
    }
}
