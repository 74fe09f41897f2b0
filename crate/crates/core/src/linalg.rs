//! Small dense matrices over any [`Scalar`].

use crate::dual::Scalar;

#[derive(Clone, Debug, PartialEq)]
pub struct Mat<S> {
    dim: usize,
    data: Vec<S>,
}

impl<S: Scalar> Mat<S> {
    pub fn zeros(dim: usize) -> Self {
        Self { dim, data: vec![S::zero(); dim * dim] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m[(i, i)] = S::one();
        }
        m
    }

    pub fn diag(entries: &[S]) -> Self {
        let mut m = Self::zeros(entries.len());
        for (i, &e) in entries.iter().enumerate() {
            m[(i, i)] = e;
        }
        m
    }

    pub fn from_fn(dim: usize, f: impl Fn(usize, usize) -> S) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            for j in 0..dim {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn mul_vec(&self, v: &[S]) -> Vec<S> {
        (0..self.dim)
            .map(|i| {
                let mut acc = S::zero();
                for j in 0..self.dim {
                    acc += self[(i, j)] * v[j];
                }
                acc
            })
            .collect()
    }

    /// Bilinear form `uᵀ M v`.
    pub fn form(&self, u: &[S], v: &[S]) -> S {
        let mut acc = S::zero();
        for i in 0..self.dim {
            for j in 0..self.dim {
                acc += u[i] * self[(i, j)] * v[j];
            }
        }
        acc
    }

    pub fn mul(&self, o: &Self) -> Self {
        Self::from_fn(self.dim, |i, j| {
            let mut acc = S::zero();
            for k in 0..self.dim {
                acc += self[(i, k)] * o[(k, j)];
            }
            acc
        })
    }

    pub fn trace(&self) -> S {
        let mut acc = S::zero();
        for i in 0..self.dim {
            acc += self[(i, i)];
        }
        acc
    }

    /// Gauss–Jordan with partial pivoting on the primal values.
    /// Returns `None` when a pivot falls below `1e-14` times the largest entry.
    pub fn inverse(&self) -> Option<Self> {
        let n = self.dim;
        let scale = self.data.iter().fold(0.0f64, |m, x| m.max(x.re().abs()));
        if scale == 0.0 {
            return None;
        }
        let mut a = self.clone();
        let mut inv = Self::identity(n);
        for col in 0..n {
            let pivot = (col..n)
                .max_by(|&r, &s| a[(r, col)].re().abs().total_cmp(&a[(s, col)].re().abs()))
                .unwrap();
            if a[(pivot, col)].re().abs() < 1e-14 * scale {
                return None;
            }
            if pivot != col {
                for k in 0..n {
                    a.data.swap(pivot * n + k, col * n + k);
                    inv.data.swap(pivot * n + k, col * n + k);
                }
            }
            let d = a[(col, col)];
            for k in 0..n {
                a[(col, k)] = a[(col, k)] / d;
                inv[(col, k)] = inv[(col, k)] / d;
            }
            for r in 0..n {
                if r == col {
                    continue;
                }
                let f = a[(r, col)];
                for k in 0..n {
                    let ack = a[(col, k)];
                    let ick = inv[(col, k)];
                    a[(r, k)] -= f * ack;
                    inv[(r, k)] -= f * ick;
                }
            }
        }
        Some(inv)
    }

    /// Determinant by elimination with partial pivoting.
    pub fn det(&self) -> S {
        let n = self.dim;
        let mut a = self.clone();
        let mut det = S::one();
        for col in 0..n {
            let pivot = (col..n)
                .max_by(|&r, &s| a[(r, col)].re().abs().total_cmp(&a[(s, col)].re().abs()))
                .unwrap();
            if a[(pivot, col)].re() == 0.0 {
                return S::zero();
            }
            if pivot != col {
                for k in 0..n {
                    a.data.swap(pivot * n + k, col * n + k);
                }
                det = -det;
            }
            let d = a[(col, col)];
            det *= d;
            for r in (col + 1)..n {
                let f = a[(r, col)] / d;
                for k in col..n {
                    let ack = a[(col, k)];
                    a[(r, k)] -= f * ack;
                }
            }
        }
        det
    }

    pub fn map<T: Scalar>(&self, f: impl Fn(S) -> T) -> Mat<T> {
        Mat { dim: self.dim, data: self.data.iter().map(|&x| f(x)).collect() }
    }

    pub fn to_f64(&self) -> Mat<f64> {
        self.map(|x| x.re())
    }

    pub fn rows(&self) -> Vec<Vec<S>> {
        (0..self.dim).map(|i| self.data[i * self.dim..(i + 1) * self.dim].to_vec()).collect()
    }

    pub fn max_asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.dim {
            for j in 0..self.dim {
                worst = worst.max((self[(i, j)] - self[(j, i)]).re().abs());
            }
        }
        worst
    }
}

impl Mat<f64> {
    pub fn to_nalgebra(&self) -> nalgebra::DMatrix<f64> {
        nalgebra::DMatrix::from_fn(self.dim, self.dim, |i, j| self[(i, j)])
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        Self::from_fn(rows.len(), |i, j| rows[i][j])
    }

    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// Eigenvalues of the symmetric part, ascending.
    pub fn symmetric_eigenvalues(&self) -> Vec<f64> {
        let m = self.to_nalgebra();
        let sym = (&m + m.transpose()) * 0.5;
        let mut ev: Vec<f64> = sym.symmetric_eigen().eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }
}

impl serde::Serialize for Mat<f64> {
    fn serialize<Ser: serde::Serializer>(&self, s: Ser) -> std::result::Result<Ser::Ok, Ser::Error> {
        self.rows().serialize(s)
    }
}

impl<S> std::ops::Index<(usize, usize)> for Mat<S> {
    type Output = S;
    fn index(&self, (i, j): (usize, usize)) -> &S {
        &self.data[i * self.dim + j]
    }
}

impl<S> std::ops::IndexMut<(usize, usize)> for Mat<S> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut S {
        &mut self.data[i * self.dim + j]
    }
}

pub fn dot<S: Scalar>(u: &[S], v: &[S]) -> S {
    let mut acc = S::zero();
    for (a, b) in u.iter().zip(v) {
        acc += *a * *b;
    }
    acc
}

pub fn axpy<S: Scalar>(a: S, x: &[S], y: &[S]) -> Vec<S> {
    x.iter().zip(y).map(|(&xi, &yi)| a * xi + yi).collect()
}

pub fn scaled<S: Scalar>(a: S, x: &[S]) -> Vec<S> {
    x.iter().map(|&xi| a * xi).collect()
}
