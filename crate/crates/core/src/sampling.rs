//! Reproducible point clouds and Newton projection onto constraint zero sets.

use crate::expr::{EvalError, TapeSet};
use crate::linalg::{self, Mat};
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const DEFAULT_SEED: u64 = 20240917;

const PRIMES: [u32; 32] = [
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89,
    97, 101, 103, 107, 109, 113, 127, 131,
];

fn radical_inverse(mut i: u64, base: u32) -> f64 {
    let b = base as u64;
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut out = 0.0;
    while i > 0 {
        out += (i % b) as f64 * f;
        i /= b;
        f *= inv;
    }
    out
}

/// Axis-aligned box `[lo, hi]^dim`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SampleBox {
    pub lo: f64,
    pub hi: f64,
}

impl Default for SampleBox {
    fn default() -> Self {
        SampleBox { lo: -2.0, hi: 2.0 }
    }
}

impl SampleBox {
    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

/// Shifted Halton points in `bbox^dim`. Dimensions past the prime table fall
/// back to uniform ChaCha draws.
pub fn halton_cloud(dim: usize, count: usize, bbox: SampleBox, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shift: Vec<f64> = (0..dim).map(|_| rng.random::<f64>()).collect();
    (0..count)
        .map(|i| {
            (0..dim)
                .map(|d| {
                    let u = match PRIMES.get(d) {
                        Some(&b) => (radical_inverse(i as u64 + 1, b) + shift[d]).fract(),
                        None => rng.random::<f64>(),
                    };
                    bbox.lo + u * bbox.width()
                })
                .collect()
        })
        .collect()
}

/// Uniform random points in `bbox^dim`.
pub fn uniform_cloud(dim: usize, count: usize, bbox: SampleBox, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| (0..dim).map(|_| rng.random_range(bbox.lo..bbox.hi)).collect())
        .collect()
}

/// Gauss-Newton projection onto the zero set of a constraint system.
#[derive(Clone, Debug)]
pub struct Projector {
    pub tol: f64,
    pub max_iter: usize,
    pub max_halvings: usize,
}

impl Default for Projector {
    fn default() -> Self {
        Projector {
            tol: 1e-12,
            max_iter: 60,
            max_halvings: 20,
        }
    }
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |a, x| a.max(x.abs()))
}

impl Projector {
    /// Move `x0` onto `{set = 0}` changing only the slots in `free`, by
    /// minimum-norm Newton steps. `None` when the iteration stalls or leaves
    /// the domain.
    pub fn project(&self, set: &TapeSet, x0: &[f64], free: &[usize]) -> Option<Vec<f64>> {
        let mut x = x0.to_vec();
        let mut r = set.eval(&x).ok()?;
        for _ in 0..self.max_iter {
            let rn = max_abs(&r);
            if rn <= self.tol {
                return Some(x);
            }
            let jac = self.free_jacobian(set, &x, free).ok()?;
            let (dx, _) = linalg::lstsq(&jac, &DVector::from_vec(r.clone()), 1e-12);
            let norm0 = r.iter().map(|v| v * v).sum::<f64>();
            let mut step = 1.0;
            let mut accepted = false;
            for _ in 0..=self.max_halvings {
                let mut xn = x.clone();
                for (k, &slot) in free.iter().enumerate() {
                    xn[slot] -= step * dx[k];
                }
                if let Ok(rn_vec) = set.eval(&xn) {
                    let norm1 = rn_vec.iter().map(|v| v * v).sum::<f64>();
                    if norm1 < norm0 || norm1 == 0.0 {
                        x = xn;
                        r = rn_vec;
                        accepted = true;
                        break;
                    }
                }
                step *= 0.5;
            }
            if !accepted {
                break;
            }
        }
        (max_abs(&r) <= self.tol).then_some(x)
    }

    fn free_jacobian(&self, set: &TapeSet, x: &[f64], free: &[usize]) -> Result<Mat, EvalError> {
        let rows = set.jacobian(x)?;
        Ok(Mat::from_fn(rows.len(), free.len(), |i, k| rows[i][free[k]]))
    }
}

/// Up to `count` points on the zero set of `set`, obtained by projecting a
/// shifted Halton cloud drawn in `bbox`. Points that leave `bbox` by more
/// than one box width are discarded.
pub fn sample_zero_set(
    set: &TapeSet,
    count: usize,
    bbox: SampleBox,
    seed: u64,
    tol: f64,
) -> Vec<Vec<f64>> {
    let dim = set.vars().len();
    let free: Vec<usize> = (0..dim).collect();
    let proj = Projector {
        tol,
        ..Projector::default()
    };
    let mut out = Vec::with_capacity(count);
    let attempts = count * 4 + 16;
    for x0 in halton_cloud(dim, attempts, bbox, seed) {
        if out.len() >= count {
            break;
        }
        if let Some(x) = proj.project(set, &x0, &free) {
            let w = bbox.width();
            if x.iter().all(|&v| v >= bbox.lo - w && v <= bbox.hi + w) {
                out.push(x);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    #[test]
    fn halton_is_deterministic_and_in_box() {
        let a = halton_cloud(3, 50, SampleBox::default(), 7);
        let b = halton_cloud(3, 50, SampleBox::default(), 7);
        assert_eq!(a, b);
        assert!(a.iter().flatten().all(|v| (-2.0..2.0).contains(v)));
        let c = halton_cloud(3, 50, SampleBox::default(), 8);
        assert_ne!(a, c);
    }

    #[test]
    fn projects_onto_circle() {
        let e = parse("x^2 + y^2 - 1").unwrap();
        let vars = vec!["x".to_string(), "y".to_string()];
        let set = TapeSet::compile(&[e], &vars).unwrap();
        let pts = sample_zero_set(&set, 20, SampleBox::default(), 1, 1e-12);
        assert_eq!(pts.len(), 20);
        for p in pts {
            assert!((p[0] * p[0] + p[1] * p[1] - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn inconsistent_system_yields_nothing() {
        let vars = vec!["x".to_string()];
        let set = TapeSet::compile(&[parse("x").unwrap(), parse("x - 1").unwrap()], &vars).unwrap();
        assert!(sample_zero_set(&set, 5, SampleBox::default(), 1, 1e-12).is_empty());
    }
}
