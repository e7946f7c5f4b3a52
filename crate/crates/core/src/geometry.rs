//! Coordinates and symplectic structures on T*Q, TT*Q, T*T*Q and T*TQ.
//!
//! Points and tangent vectors are dense slices in the coordinate order of the
//! space they live on. For TT*Q that order is `(q, p, qd, pd)`, each block of
//! length `n`.

use crate::error::{Error, Result};
use crate::expr::{derivative, simplify, Expression, Jet2, Point, Tape};
use crate::linalg::Mat;

/// Names `prefix1..prefixn`.
pub fn indexed_names(prefix: &str, n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("{prefix}{i}")).collect()
}

/// Velocity companion of a coordinate name: `q1 -> qd1`, `x -> xd`.
pub fn velocity_name(name: &str) -> String {
    let split = name
        .char_indices()
        .rev()
        .take_while(|(_, c)| c.is_ascii_digit())
        .last()
        .map_or(name.len(), |(i, _)| i);
    format!("{}d{}", &name[..split], &name[split..])
}

/// Coordinate tables for a configuration space of dimension `n`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PhaseSpace {
    n: usize,
}

impl PhaseSpace {
    pub fn new(n: usize) -> Self {
        assert!(n > 0, "configuration space dimension must be positive");
        PhaseSpace { n }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn q(&self) -> Vec<String> {
        indexed_names("q", self.n)
    }
    pub fn p(&self) -> Vec<String> {
        indexed_names("p", self.n)
    }
    pub fn qd(&self) -> Vec<String> {
        indexed_names("qd", self.n)
    }
    pub fn pd(&self) -> Vec<String> {
        indexed_names("pd", self.n)
    }

    /// `(q, qd)`.
    pub fn tangent(&self) -> Vec<String> {
        [self.q(), self.qd()].concat()
    }

    /// `(q, p)`.
    pub fn cotangent(&self) -> Vec<String> {
        [self.q(), self.p()].concat()
    }

    /// `(q, p, qd, pd)`.
    pub fn tulczyjew(&self) -> Vec<String> {
        [self.q(), self.p(), self.qd(), self.pd()].concat()
    }

    /// `(q, p, alpha, beta)`.
    pub fn iterated_cotangent(&self) -> Vec<String> {
        [
            self.q(),
            self.p(),
            indexed_names("alpha", self.n),
            indexed_names("beta", self.n),
        ]
        .concat()
    }

    /// `(q, qd, a, b)`.
    pub fn cotangent_of_tangent(&self) -> Vec<String> {
        [
            self.q(),
            self.qd(),
            indexed_names("a", self.n),
            indexed_names("b", self.n),
        ]
        .concat()
    }

    fn check_len(&self, got: usize, blocks: usize) -> Result<()> {
        if got != blocks * self.n {
            return Err(Error::DimensionMismatch {
                expected: blocks * self.n,
                got,
            });
        }
        Ok(())
    }

    /// Dense coordinates on TT*Q read from a named point. Missing names are
    /// an error.
    pub fn tulczyjew_coords(&self, point: &Point) -> Result<Vec<f64>> {
        self.tulczyjew()
            .iter()
            .map(|v| {
                point
                    .get(v)
                    .copied()
                    .ok_or_else(|| crate::expr::EvalError::UnboundVariable(v.clone()).into())
            })
            .collect()
    }
}

/// Coordinate map `y_i = sign_i * x_{src_i}`.
#[derive(Clone, Debug, PartialEq)]
pub struct SignedPermutation {
    src: Vec<usize>,
    sign: Vec<f64>,
}

impl SignedPermutation {
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.src.iter().zip(&self.sign).map(|(&i, &s)| s * x[i]).collect()
    }

    pub fn inverse(&self) -> SignedPermutation {
        let mut src = vec![0; self.src.len()];
        let mut sign = vec![1.0; self.src.len()];
        for (k, (&i, &s)) in self.src.iter().zip(&self.sign).enumerate() {
            src[i] = k;
            sign[i] = s;
        }
        SignedPermutation { src, sign }
    }

    /// The (constant) differential as a matrix.
    pub fn matrix(&self) -> Mat {
        let m = self.src.len();
        let mut out = Mat::zeros(m, m);
        for (k, (&i, &s)) in self.src.iter().zip(&self.sign).enumerate() {
            out[(k, i)] = s;
        }
        out
    }

    fn from_blocks(n: usize, blocks: &[(usize, f64)]) -> Self {
        let mut src = Vec::with_capacity(4 * n);
        let mut sign = Vec::with_capacity(4 * n);
        for &(b, s) in blocks {
            for i in 0..n {
                src.push(b * n + i);
                sign.push(s);
            }
        }
        SignedPermutation { src, sign }
    }
}

/// TT*Q → T*T*Q, `(q, p, qd, pd) ↦ (q, p, -pd, qd)`.
pub fn beta_permutation(n: usize) -> SignedPermutation {
    SignedPermutation::from_blocks(n, &[(0, 1.0), (1, 1.0), (3, -1.0), (2, 1.0)])
}

/// TT*Q → T*TQ, `(q, p, qd, pd) ↦ (q, qd, pd, p)`.
pub fn alpha_permutation(n: usize) -> SignedPermutation {
    SignedPermutation::from_blocks(n, &[(0, 1.0), (2, 1.0), (3, 1.0), (1, 1.0)])
}

fn map_point(
    space: &PhaseSpace,
    perm: &SignedPermutation,
    target: Vec<String>,
    v: &Point,
) -> Result<Point> {
    let x = space.tulczyjew_coords(v)?;
    Ok(target.into_iter().zip(perm.apply(&x)).collect())
}

pub fn beta_map(space: &PhaseSpace, v: &Point) -> Result<Point> {
    map_point(space, &beta_permutation(space.n), space.iterated_cotangent(), v)
}

pub fn alpha_map(space: &PhaseSpace, v: &Point) -> Result<Point> {
    map_point(space, &alpha_permutation(space.n), space.cotangent_of_tangent(), v)
}

/// A tangent vector with its base point, both in the coordinate order of the
/// ambient space.
#[derive(Clone, Debug, PartialEq)]
pub struct TangentVector {
    pub base: Vec<f64>,
    pub components: Vec<f64>,
}

impl TangentVector {
    pub fn new(base: Vec<f64>, components: Vec<f64>) -> Self {
        TangentVector { base, components }
    }
}

/// Sum over blocks of `u_a w_b - u_b w_a` for each `(a, b)` block pair.
fn block_pairing(n: usize, pairs: &[(usize, usize)], u: &[f64], w: &[f64]) -> f64 {
    let mut s = 0.0;
    for &(a, b) in pairs {
        for i in 0..n {
            s += u[a * n + i] * w[b * n + i] - u[b * n + i] * w[a * n + i];
        }
    }
    s
}

/// Lifted form `dpd∧dq + dp∧dqd` on TT*Q.
pub fn omega_t_pair(space: &PhaseSpace, u: &TangentVector, w: &TangentVector) -> Result<f64> {
    space.check_len(u.components.len(), 4)?;
    space.check_len(w.components.len(), 4)?;
    if u.base.len() != w.base.len() {
        return Err(Error::DimensionMismatch {
            expected: u.base.len(),
            got: w.base.len(),
        });
    }
    Ok(omega_t(space.n, &u.components, &w.components))
}

pub(crate) fn omega_t(n: usize, u: &[f64], w: &[f64]) -> f64 {
    block_pairing(n, &[(3, 0), (1, 2)], u, w)
}

/// Matrix `Ω` with `uᵀ Ω w` equal to the lifted form.
pub fn omega_t_matrix(n: usize) -> Mat {
    let m = 4 * n;
    Mat::from_fn(m, m, |i, j| {
        let mut e_i = vec![0.0; m];
        let mut e_j = vec![0.0; m];
        e_i[i] = 1.0;
        e_j[j] = 1.0;
        omega_t(n, &e_i, &e_j)
    })
}

/// Canonical `dq∧dp` on T*Q.
pub fn omega_cotangent(n: usize, u: &[f64], w: &[f64]) -> f64 {
    block_pairing(n, &[(0, 1)], u, w)
}

/// Matrix of `dq∧dp` on T*Q.
pub fn omega_cotangent_matrix(n: usize) -> Mat {
    let mut m = Mat::zeros(2 * n, 2 * n);
    for i in 0..n {
        m[(i, n + i)] = 1.0;
        m[(n + i, i)] = -1.0;
    }
    m
}

/// Canonical `dq∧dalpha + dp∧dbeta` on T*T*Q.
pub fn omega_iterated_cotangent(n: usize, u: &[f64], w: &[f64]) -> f64 {
    block_pairing(n, &[(0, 2), (1, 3)], u, w)
}

/// Canonical `dq∧da + dqd∧db` on T*TQ.
pub fn omega_cotangent_of_tangent(n: usize, u: &[f64], w: &[f64]) -> f64 {
    block_pairing(n, &[(0, 2), (1, 3)], u, w)
}

/// Coefficients of `θ₁ = pd·dq − qd·dp` at a TT*Q point.
pub fn theta1_coeffs(n: usize, x: &[f64]) -> Vec<f64> {
    let mut c = vec![0.0; 4 * n];
    for i in 0..n {
        c[i] = x[3 * n + i];
        c[n + i] = -x[2 * n + i];
    }
    c
}

/// Coefficients of `θ₂ = pd·dq + p·dqd` at a TT*Q point.
pub fn theta2_coeffs(n: usize, x: &[f64]) -> Vec<f64> {
    let mut c = vec![0.0; 4 * n];
    for i in 0..n {
        c[i] = x[3 * n + i];
        c[2 * n + i] = x[n + i];
    }
    c
}

/// `(⟨θ₁, v⟩, ⟨θ₂, v⟩)`.
pub fn theta_forms(space: &PhaseSpace, v: &TangentVector) -> Result<(f64, f64)> {
    space.check_len(v.base.len(), 4)?;
    space.check_len(v.components.len(), 4)?;
    let dot = |c: Vec<f64>| c.iter().zip(&v.components).map(|(a, b)| a * b).sum();
    Ok((dot(theta1_coeffs(space.n, &v.base)), dot(theta2_coeffs(space.n, &v.base))))
}

/// Antisymmetrized central-difference Jacobian of a one-form's coefficient
/// map: entry `(i, j)` is `∂_i θ_j − ∂_j θ_i`, so `dθ(u, w) = uᵀ A w`.
pub fn exterior_derivative_fd<F>(coeffs: F, x: &[f64], h: f64) -> Mat
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    let m = x.len();
    let mut jac = Mat::zeros(m, m);
    let mut xp = x.to_vec();
    for i in 0..m {
        xp[i] = x[i] + h;
        let cp = coeffs(&xp);
        xp[i] = x[i] - h;
        let cm = coeffs(&xp);
        xp[i] = x[i];
        for j in 0..m {
            jac[(i, j)] = (cp[j] - cm[j]) / (2.0 * h);
        }
    }
    &jac - jac.transpose()
}

/// Poisson bracket on TT*Q from gradients in `(q, p, qd, pd)` order.
/// The two halves are summed separately so that swapping `f` and `g`
/// negates the result exactly.
pub fn bracket_from_grads(n: usize, gf: &[f64], gg: &[f64]) -> f64 {
    let half = |a: &[f64], b: &[f64]| -> f64 {
        (0..n).map(|i| a[3 * n + i] * b[i] + a[n + i] * b[2 * n + i]).sum()
    };
    half(gf, gg) - half(gg, gf)
}

/// Gradient of `{f, g}` from second-order jets of `f` and `g` taken with
/// respect to all TT*Q coordinates.
pub fn bracket_gradient(n: usize, jf: &Jet2, jg: &Jet2) -> Vec<f64> {
    let (q, p, qd, pd) = (0, n, 2 * n, 3 * n);
    let gf = jf.grad();
    let gg = jg.grad();
    (0..4 * n)
        .map(|k| {
            (0..n)
                .map(|i| {
                    jf.hess(k, pd + i) * gg[q + i] + gf[pd + i] * jg.hess(k, q + i)
                        - jg.hess(k, pd + i) * gf[q + i]
                        - gg[pd + i] * jf.hess(k, q + i)
                        + jf.hess(k, p + i) * gg[qd + i]
                        + gf[p + i] * jg.hess(k, qd + i)
                        - jg.hess(k, p + i) * gf[qd + i]
                        - gg[p + i] * jf.hess(k, qd + i)
                })
                .sum()
        })
        .collect()
}

fn check_tulczyjew_vars(space: &PhaseSpace, e: &Expression) -> Result<()> {
    let vars = space.tulczyjew();
    match e.free_vars().iter().find(|v| !vars.contains(v)) {
        Some(v) => Err(Error::UnexpectedVariable(v.clone())),
        None => Ok(()),
    }
}

/// `{f, g}(x)` on TT*Q. Coordinates that neither expression uses may be
/// omitted from `x`.
pub fn poisson_bracket(space: &PhaseSpace, f: &Expression, g: &Expression, x: &Point) -> Result<f64> {
    check_tulczyjew_vars(space, f)?;
    check_tulczyjew_vars(space, g)?;
    let vars = space.tulczyjew();
    let coords: Vec<f64> = vars
        .iter()
        .map(|v| {
            let used = f.depends_on(v) || g.depends_on(v);
            match x.get(v) {
                Some(&val) => Ok(val),
                None if !used => Ok(0.0),
                None => Err(crate::expr::EvalError::UnboundVariable(v.clone())),
            }
        })
        .collect::<std::result::Result<_, _>>()?;
    let gf = Tape::compile(f, &vars)?.gradient(&coords)?;
    let gg = Tape::compile(g, &vars)?.gradient(&coords)?;
    Ok(bracket_from_grads(space.n, &gf, &gg))
}

/// `{f, g}` as an expression, by structural differentiation.
pub fn poisson_bracket_expr(space: &PhaseSpace, f: &Expression, g: &Expression) -> Expression {
    let (q, p, qd, pd) = (space.q(), space.p(), space.qd(), space.pd());
    let d = |e: &Expression, v: &str| derivative(e, v);
    let mut terms = Vec::new();
    for i in 0..space.n {
        terms.push(d(f, &pd[i]) * d(g, &q[i]));
        terms.push(-(d(g, &pd[i]) * d(f, &q[i])));
        terms.push(d(f, &p[i]) * d(g, &qd[i]));
        terms.push(-(d(g, &p[i]) * d(f, &qd[i])));
    }
    simplify(&Expression::sum(terms))
}

/// Canonical bracket on T*Q, `Σ ∂f/∂q·∂g/∂p − ∂f/∂p·∂g/∂q`, as an expression.
pub fn canonical_bracket_expr(space: &PhaseSpace, f: &Expression, g: &Expression) -> Expression {
    let (q, p) = (space.q(), space.p());
    let mut terms = Vec::new();
    for i in 0..space.n {
        terms.push(derivative(f, &q[i]) * derivative(g, &p[i]));
        terms.push(-(derivative(f, &p[i]) * derivative(g, &q[i])));
    }
    simplify(&Expression::sum(terms))
}
