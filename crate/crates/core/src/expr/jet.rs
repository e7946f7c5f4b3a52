//! Second-order forward-mode jets.

/// Value, gradient and Hessian of a scalar function with respect to an
/// ordered set of active variables.
///
/// The Hessian is stored as a packed upper triangle, so it is symmetric by
/// construction.
#[derive(Clone, Debug, PartialEq)]
pub struct Jet2 {
    pub value: f64,
    grad: Vec<f64>,
    hess: Vec<f64>,
}

#[inline]
fn tri_index(n: usize, i: usize, j: usize) -> usize {
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    i * n - i * (i + 1) / 2 + j
}

impl Jet2 {
    pub fn constant(value: f64, n: usize) -> Self {
        Jet2 {
            value,
            grad: vec![0.0; n],
            hess: vec![0.0; n * (n + 1) / 2],
        }
    }

    /// The `slot`-th active variable at `value`.
    pub fn variable(value: f64, n: usize, slot: usize) -> Self {
        let mut j = Jet2::constant(value, n);
        j.grad[slot] = 1.0;
        j
    }

    pub fn dim(&self) -> usize {
        self.grad.len()
    }

    pub fn grad(&self) -> &[f64] {
        &self.grad
    }

    pub fn hess(&self, i: usize, j: usize) -> f64 {
        self.hess[tri_index(self.dim(), i, j)]
    }

    /// Dense symmetric Hessian, row-major.
    pub fn hess_dense(&self) -> Vec<Vec<f64>> {
        let n = self.dim();
        (0..n)
            .map(|i| (0..n).map(|j| self.hess(i, j)).collect())
            .collect()
    }

    pub fn neg(&self) -> Jet2 {
        Jet2 {
            value: -self.value,
            grad: self.grad.iter().map(|g| -g).collect(),
            hess: self.hess.iter().map(|h| -h).collect(),
        }
    }

    pub fn add(&self, o: &Jet2) -> Jet2 {
        Jet2 {
            value: self.value + o.value,
            grad: self.grad.iter().zip(&o.grad).map(|(a, b)| a + b).collect(),
            hess: self.hess.iter().zip(&o.hess).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn sub(&self, o: &Jet2) -> Jet2 {
        Jet2 {
            value: self.value - o.value,
            grad: self.grad.iter().zip(&o.grad).map(|(a, b)| a - b).collect(),
            hess: self.hess.iter().zip(&o.hess).map(|(a, b)| a - b).collect(),
        }
    }

    pub fn mul(&self, o: &Jet2) -> Jet2 {
        let n = self.dim();
        let mut hess = vec![0.0; self.hess.len()];
        for i in 0..n {
            for j in i..n {
                let k = tri_index(n, i, j);
                hess[k] = self.value * o.hess[k]
                    + o.value * self.hess[k]
                    + self.grad[i] * o.grad[j]
                    + self.grad[j] * o.grad[i];
            }
        }
        Jet2 {
            value: self.value * o.value,
            grad: self
                .grad
                .iter()
                .zip(&o.grad)
                .map(|(a, b)| self.value * b + o.value * a)
                .collect(),
            hess,
        }
    }

    /// Compose with a scalar function given its value and first two
    /// derivatives at `self.value`.
    pub fn chain(&self, f: f64, df: f64, d2f: f64) -> Jet2 {
        let n = self.dim();
        let mut hess = vec![0.0; self.hess.len()];
        for i in 0..n {
            for j in i..n {
                let k = tri_index(n, i, j);
                hess[k] = d2f * self.grad[i] * self.grad[j] + df * self.hess[k];
            }
        }
        Jet2 {
            value: f,
            grad: self.grad.iter().map(|g| df * g).collect(),
            hess,
        }
    }

    pub fn scale(&self, c: f64) -> Jet2 {
        Jet2 {
            value: self.value * c,
            grad: self.grad.iter().map(|g| g * c).collect(),
            hess: self.hess.iter().map(|h| h * c).collect(),
        }
    }
}
