//! Central finite differences, used as an independent check on the jets.

use super::tape::{EvalError, Tape};

/// Central-difference gradient with step `h` in every coordinate.
pub fn gradient(tape: &Tape, x: &[f64], h: f64) -> Result<Vec<f64>, EvalError> {
    let mut xp = x.to_vec();
    let mut g = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        let xi = x[i];
        xp[i] = xi + h;
        let fp = tape.eval(&xp)?;
        xp[i] = xi - h;
        let fm = tape.eval(&xp)?;
        xp[i] = xi;
        g.push((fp - fm) / (2.0 * h));
    }
    Ok(g)
}

/// Central-difference Hessian.
pub fn hessian(tape: &Tape, x: &[f64], h: f64) -> Result<Vec<Vec<f64>>, EvalError> {
    let n = x.len();
    let mut out = vec![vec![0.0; n]; n];
    let mut xp = x.to_vec();
    let f0 = tape.eval(x)?;
    for i in 0..n {
        for j in i..n {
            let v = if i == j {
                xp[i] = x[i] + h;
                let fp = tape.eval(&xp)?;
                xp[i] = x[i] - h;
                let fm = tape.eval(&xp)?;
                xp[i] = x[i];
                (fp - 2.0 * f0 + fm) / (h * h)
            } else {
                let mut corner = |si: f64, sj: f64| -> Result<f64, EvalError> {
                    xp[i] = x[i] + si * h;
                    xp[j] = x[j] + sj * h;
                    let v = tape.eval(&xp);
                    xp[i] = x[i];
                    xp[j] = x[j];
                    v
                };
                (corner(1.0, 1.0)? - corner(1.0, -1.0)? - corner(-1.0, 1.0)? + corner(-1.0, -1.0)?)
                    / (4.0 * h * h)
            };
            out[i][j] = v;
            out[j][i] = v;
        }
    }
    Ok(out)
}
