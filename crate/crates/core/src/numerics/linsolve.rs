use super::Matrix;
use crate::{Error, Result};

/// Lower-triangular Cholesky factor `L` with `M = L Lᵀ`.
#[derive(Debug, Clone)]
pub struct Cholesky {
    l: Matrix,
    min_pivot: f64,
}

impl Cholesky {
    /// Smallest squared diagonal entry of `L`, i.e. the smallest pivot.
    pub fn min_pivot(&self) -> f64 {
        self.min_pivot
    }

    pub fn factor(&self) -> &Matrix {
        &self.l
    }

    pub fn solve(&self, v: &[f64]) -> Result<Vec<f64>> {
        let n = self.l.rows();
        if v.len() != n {
            return Err(Error::Dimension(format!(
                "rhs has length {}, system is {n}x{n}",
                v.len()
            )));
        }
        let l = &self.l;
        let mut y = v.to_vec();
        for i in 0..n {
            let mut s = y[i];
            for k in 0..i {
                s -= l[(i, k)] * y[k];
            }
            y[i] = s / l[(i, i)];
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in i + 1..n {
                s -= l[(k, i)] * y[k];
            }
            y[i] = s / l[(i, i)];
        }
        Ok(y)
    }
}

/// Cholesky factorization; only the lower triangle of `m` is read.
pub fn cholesky(m: &Matrix) -> Result<Cholesky> {
    if !m.is_square() {
        return Err(Error::Dimension(format!(
            "cholesky of {}x{} matrix",
            m.rows(),
            m.cols()
        )));
    }
    let n = m.rows();
    let mut l = Matrix::zeros(n, n);
    let mut min_pivot = f64::INFINITY;
    for j in 0..n {
        let mut d = m[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if !(d > 0.0) || !d.is_finite() {
            return Err(Error::Definiteness { pivot: j, value: d });
        }
        min_pivot = min_pivot.min(d);
        let ljj = d.sqrt();
        l[(j, j)] = ljj;
        for i in j + 1..n {
            let mut s = m[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / ljj;
        }
    }
    Ok(Cholesky { l, min_pivot })
}

/// Solves `M x = v` for symmetric positive definite `M`.
pub fn solve_spd(m: &Matrix, v: &[f64]) -> Result<Vec<f64>> {
    if m.rows() != v.len() {
        return Err(Error::Dimension(format!(
            "rhs has length {}, matrix is {}x{}",
            v.len(),
            m.rows(),
            m.cols()
        )));
    }
    cholesky(m)?.solve(v)
}

/// Solves `M X = B` by LU with partial pivoting.
pub fn solve_general(m: &Matrix, b: &Matrix) -> Result<Matrix> {
    if !m.is_square() || m.rows() != b.rows() {
        return Err(Error::Dimension(format!(
            "cannot solve {}x{} system with {}x{} rhs",
            m.rows(),
            m.cols(),
            b.rows(),
            b.cols()
        )));
    }
    let n = m.rows();
    let mut a = m.clone();
    let mut x = b.clone();
    let scale = m.norm_max().max(f64::MIN_POSITIVE);
    for k in 0..n {
        let p = (k..n)
            .max_by(|&i, &j| a[(i, k)].abs().total_cmp(&a[(j, k)].abs()))
            .unwrap_or(k);
        if a[(p, k)].abs() <= scale * f64::EPSILON * n as f64 {
            return Err(Error::Singular);
        }
        if p != k {
            for j in 0..n {
                let t = a[(k, j)];
                a[(k, j)] = a[(p, j)];
                a[(p, j)] = t;
            }
            for j in 0..x.cols() {
                let t = x[(k, j)];
                x[(k, j)] = x[(p, j)];
                x[(p, j)] = t;
            }
        }
        let piv = a[(k, k)];
        for i in k + 1..n {
            let f = a[(i, k)] / piv;
            if f == 0.0 {
                continue;
            }
            a[(i, k)] = f;
            for j in k + 1..n {
                a[(i, j)] -= f * a[(k, j)];
            }
            for j in 0..x.cols() {
                x[(i, j)] -= f * x[(k, j)];
            }
        }
    }
    for j in 0..x.cols() {
        for i in (0..n).rev() {
            let mut s = x[(i, j)];
            for k in i + 1..n {
                s -= a[(i, k)] * x[(k, j)];
            }
            x[(i, j)] = s / a[(i, i)];
        }
    }
    Ok(x)
}
