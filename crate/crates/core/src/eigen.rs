//! Extremal eigenpairs of real symmetric operators by restarted Lanczos.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

/// A real symmetric matrix in row-compressed form.
#[derive(Clone, Debug)]
pub struct SparseSymmetric {
    n: usize,
    rows: Vec<Vec<(usize, f64)>>,
}

impl SparseSymmetric {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            rows: vec![Vec::new(); n],
        }
    }

    /// Adds `value` at `(i, j)`; the caller supplies both triangles.
    pub fn add(&mut self, i: usize, j: usize, value: f64) {
        match self.rows[i].iter_mut().find(|(c, _)| *c == j) {
            Some((_, v)) => *v += value,
            None => self.rows[i].push((j, value)),
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Stored entries `(j, a_ij)` of row `i`.
    pub fn row(&self, i: usize) -> &[(usize, f64)] {
        &self.rows[i]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.rows[i].iter().find(|(c, _)| *c == j).map_or(0.0, |(_, v)| *v)
    }

    pub fn mul(&self, x: &[f64], y: &mut [f64]) {
        for (yi, row) in y.iter_mut().zip(&self.rows) {
            *yi = row.iter().map(|&(j, a)| a * x[j]).sum();
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, a) in row {
                m[(i, j)] += a;
            }
        }
        m
    }

    /// `⟨Ax, x⟩ / ⟨x, x⟩`.
    pub fn rayleigh(&self, x: &[f64]) -> f64 {
        let mut y = vec![0.0; self.n];
        self.mul(x, &mut y);
        dot(&y, x) / dot(x, x)
    }
}

/// An approximate eigenpair with its certified residual `‖Ax − θx‖` (unit `x`).
#[derive(Clone, Debug)]
pub struct EigenPair {
    pub value: f64,
    pub vector: Vec<f64>,
    pub residual: f64,
    pub matvecs: usize,
}

/// Largest eigenpair of `a` to residual `tol`, using at most `max_matvecs` products.
///
/// The start vector is the all-ones vector, which overlaps the Perron vector of
/// any nonnegative irreducible operator. The returned value is a Rayleigh
/// quotient, hence never above the true largest eigenvalue, and within
/// `residual` of some eigenvalue.
pub fn largest_eigenpair(a: &SparseSymmetric, tol: f64, max_matvecs: usize) -> Result<EigenPair> {
    let n = a.dim();
    if n == 0 {
        return Err(Error::precondition("eigenproblem of dimension 0"));
    }
    let krylov = n.min(120);
    let mut start = vec![1.0 / (n as f64).sqrt(); n];
    let mut matvecs = 0;
    let mut best = f64::NEG_INFINITY;
    loop {
        let (value, vector, used) = lanczos_cycle(a, &start, krylov);
        matvecs += used;
        let mut ax = vec![0.0; n];
        a.mul(&vector, &mut ax);
        matvecs += 1;
        let theta = dot(&ax, &vector);
        let residual = ax
            .iter()
            .zip(&vector)
            .map(|(p, q)| (p - theta * q).powi(2))
            .sum::<f64>()
            .sqrt();
        best = best.max(theta);
        if residual <= tol || krylov == n && residual <= tol.max(1e-12 * value.abs().max(1.0)) {
            return Ok(EigenPair {
                value: theta,
                vector,
                residual,
                matvecs,
            });
        }
        if matvecs >= max_matvecs {
            return Err(Error::NoConvergence {
                iterations: matvecs,
                best,
            });
        }
        start = vector;
        let _ = value;
    }
}

/// One Lanczos cycle of length `m` with full reorthogonalization; returns the top Ritz pair.
fn lanczos_cycle(a: &SparseSymmetric, start: &[f64], m: usize) -> (f64, Vec<f64>, usize) {
    let n = a.dim();
    let mut q: Vec<Vec<f64>> = Vec::with_capacity(m);
    let mut alpha = Vec::with_capacity(m);
    let mut beta: Vec<f64> = Vec::with_capacity(m);
    let norm = dot(start, start).sqrt();
    q.push(start.iter().map(|x| x / norm).collect());
    let mut w = vec![0.0; n];
    let mut used = 0;
    for k in 0..m {
        a.mul(&q[k], &mut w);
        used += 1;
        let ak = dot(&w, &q[k]);
        alpha.push(ak);
        // full reorthogonalization, twice
        for _ in 0..2 {
            for qi in &q {
                let c = dot(&w, qi);
                for (wj, qj) in w.iter_mut().zip(qi) {
                    *wj -= c * qj;
                }
            }
        }
        let b = dot(&w, &w).sqrt();
        if k + 1 == m || b < 1e-14 {
            break;
        }
        beta.push(b);
        q.push(w.iter().map(|x| x / b).collect());
    }
    let k = alpha.len();
    let mut t = DMatrix::<f64>::zeros(k, k);
    for i in 0..k {
        t[(i, i)] = alpha[i];
        if i + 1 < k {
            t[(i, i + 1)] = beta[i];
            t[(i + 1, i)] = beta[i];
        }
    }
    let eig = SymmetricEigen::new(t);
    let (top, value) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
    let s = eig.eigenvectors.column(top);
    let mut x = vec![0.0; n];
    for (qi, si) in q.iter().zip(s.iter()) {
        for (xj, qj) in x.iter_mut().zip(qi) {
            *xj += si * qj;
        }
    }
    let nx = dot(&x, &x).sqrt();
    x.iter_mut().for_each(|v| *v /= nx);
    (value, x, used)
}

fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path(n: usize) -> SparseSymmetric {
        let mut a = SparseSymmetric::new(n);
        for i in 0..n - 1 {
            a.add(i, i + 1, 0.5);
            a.add(i + 1, i, 0.5);
        }
        a
    }

    #[test]
    fn path_graph_top_eigenvalue() {
        for n in [2, 9, 101, 400] {
            let p = largest_eigenpair(&path(n), 1e-10, 200_000).unwrap();
            let exact = (std::f64::consts::PI / (n as f64 + 1.0)).cos();
            assert!((p.value - exact).abs() < 1e-9, "n={n}: {} vs {exact}", p.value);
            assert!(p.value <= exact + 1e-15);
        }
    }

    #[test]
    fn matches_dense_solver() {
        let mut a = SparseSymmetric::new(30);
        for i in 0..30 {
            for j in 0..30 {
                let v = (((i * 7 + j * 7) % 11) as f64) / 11.0;
                a.add(i, j, v);
            }
        }
        let dense = SymmetricEigen::new(a.to_dense()).eigenvalues.max();
        let p = largest_eigenpair(&a, 1e-10, 10_000).unwrap();
        assert!((p.value - dense).abs() < 1e-9);
    }

    #[test]
    fn reports_non_convergence() {
        let err = largest_eigenpair(&path(2000), 1e-14, 130).unwrap_err();
        assert!(matches!(err, Error::NoConvergence { .. }));
    }
}
