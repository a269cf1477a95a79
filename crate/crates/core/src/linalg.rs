//! Direct linear solvers: a skyline LDL^t factorization for the sparse
//! symmetric quasi-definite step systems and a dense LDL^t for the reduced
//! Schur systems.

use crate::{Error, Result};

/// Sparse symmetric matrix in skyline (profile) storage, lower triangle.
///
/// Row `i` stores the contiguous entries from `first[i]` to `i`. The step
/// matrices are symmetric quasi-definite after the flow rows are negated,
/// so LDL^t without pivoting is stable.
pub struct SkylineMatrix {
    n: usize,
    first: Vec<usize>,
    /// start of row i in `data`; row i holds columns first[i]..=i
    row_start: Vec<usize>,
    data: Vec<f64>,
}

impl SkylineMatrix {
    /// Build from symmetric triplets (entries with i >= j are taken; the
    /// strictly upper triangle is ignored, it must mirror the lower one).
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut first: Vec<usize> = (0..n).collect();
        for &(i, j, _) in triplets {
            let (r, c) = if i >= j { (i, j) } else { (j, i) };
            if c < first[r] {
                first[r] = c;
            }
        }
        let mut row_start = vec![0usize; n + 1];
        for i in 0..n {
            row_start[i + 1] = row_start[i] + (i - first[i] + 1);
        }
        let mut data = vec![0.0; row_start[n]];
        for &(i, j, v) in triplets {
            if i >= j {
                data[row_start[i] + (j - first[i])] += v;
            }
        }
        SkylineMatrix {
            n,
            first,
            row_start,
            data,
        }
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> Option<usize> {
        if j > i || j < self.first[i] {
            None
        } else {
            Some(self.row_start[i] + (j - self.first[i]))
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// In-place LDL^t factorization. L is unit lower triangular stored in the
    /// profile, D on the diagonal. Fails on a (near-)zero pivot.
    pub fn factorize(mut self) -> Result<SkylineFactor> {
        let n = self.n;
        let mut max_diag = 0.0f64;
        for i in 0..n {
            if let Some(k) = self.idx(i, i) {
                max_diag = max_diag.max(self.data[k].abs());
            }
        }
        if max_diag == 0.0 {
            max_diag = 1.0;
        }
        for i in 0..n {
            let fi = self.first[i];
            // l_ij = (a_ij - sum_{k<j} l_ik d_k l_jk) / d_j
            for j in fi..i {
                let fj = self.first[j];
                let lo = fi.max(fj);
                let mut s = self.data[self.row_start[i] + (j - fi)];
                for k in lo..j {
                    let lik = self.data[self.row_start[i] + (k - fi)];
                    let ljk = self.data[self.row_start[j] + (k - fj)];
                    let dk = self.data[self.row_start[k] + (k - self.first[k])];
                    s -= lik * dk * ljk;
                }
                let dj = self.data[self.row_start[j] + (j - fj)];
                self.data[self.row_start[i] + (j - fi)] = s / dj;
            }
            // d_i = a_ii - sum_k l_ik^2 d_k
            let mut d = self.data[self.row_start[i] + (i - fi)];
            for k in fi..i {
                let lik = self.data[self.row_start[i] + (k - fi)];
                let dk = self.data[self.row_start[k] + (k - self.first[k])];
                d -= lik * lik * dk;
            }
            if d.abs() < 1e-14 * max_diag {
                return Err(Error::Solver(format!(
                    "singular system: zero pivot at row {i} (d = {d:.3e})"
                )));
            }
            self.data[self.row_start[i] + (i - fi)] = d;
        }
        Ok(SkylineFactor { m: self })
    }
}

/// Factorized skyline system.
pub struct SkylineFactor {
    m: SkylineMatrix,
}

impl SkylineFactor {
    pub fn n(&self) -> usize {
        self.m.n
    }

    /// Solve A x = b.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.m.n;
        let mut x = b.to_vec();
        // forward: L y = b
        for i in 0..n {
            let fi = self.m.first[i];
            let mut s = x[i];
            for k in fi..i {
                s -= self.m.data[self.m.row_start[i] + (k - fi)] * x[k];
            }
            x[i] = s;
        }
        // diagonal
        for i in 0..n {
            let d = self.m.data[self.m.row_start[i] + (i - self.m.first[i])];
            x[i] /= d;
        }
        // backward: L^t x = y
        for i in (0..n).rev() {
            let fi = self.m.first[i];
            let xi = x[i];
            for k in fi..i {
                x[k] -= self.m.data[self.m.row_start[i] + (k - fi)] * xi;
            }
        }
        x
    }
}

/// Dense symmetric LDL^t with the same no-pivoting convention.
pub struct DenseFactor {
    n: usize,
    a: Vec<f64>,
}

pub fn dense_factorize(n: usize, a: &[f64]) -> Result<DenseFactor> {
    assert_eq!(a.len(), n * n);
    let mut m = a.to_vec();
    let mut max_diag = 1e-300f64;
    for i in 0..n {
        max_diag = max_diag.max(m[i * n + i].abs());
    }
    for i in 0..n {
        for j in 0..i {
            let mut s = m[i * n + j];
            for k in 0..j {
                s -= m[i * n + k] * m[k * n + k] * m[j * n + k];
            }
            m[i * n + j] = s / m[j * n + j];
        }
        let mut d = m[i * n + i];
        for k in 0..i {
            d -= m[i * n + k] * m[i * n + k] * m[k * n + k];
        }
        if d.abs() < 1e-14 * max_diag {
            return Err(Error::Solver(format!("dense LDL^t: zero pivot at {i}")));
        }
        m[i * n + i] = d;
    }
    Ok(DenseFactor { n, a: m })
}

impl DenseFactor {
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut x = b.to_vec();
        for i in 0..n {
            for k in 0..i {
                x[i] -= self.a[i * n + k] * x[k];
            }
        }
        for i in 0..n {
            x[i] /= self.a[i * n + i];
        }
        for i in (0..n).rev() {
            for k in 0..i {
                x[k] -= self.a[i * n + k] * x[i];
            }
        }
        x
    }
}

/// Symmetric 2x2 inverse.
pub fn inv2(m: [[f64; 2]; 2]) -> Result<[[f64; 2]; 2]> {
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    if det.abs() < 1e-300 {
        return Err(Error::Solver("singular 2x2 matrix".into()));
    }
    Ok([
        [m[1][1] / det, -m[0][1] / det],
        [-m[1][0] / det, m[0][0] / det],
    ])
}

/// Eigenvalues of a symmetric 2x2 matrix, ascending.
pub fn eig2_sym(m: [[f64; 2]; 2]) -> [f64; 2] {
    let tr = m[0][0] + m[1][1];
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    let disc = (tr * tr / 4.0 - det).max(0.0).sqrt();
    [tr / 2.0 - disc, tr / 2.0 + disc]
}

/// Smallest eigenvalue of a dense symmetric matrix by inverse power
/// iteration with a small shift; used only for oracle checks.
pub fn min_eig_sym(n: usize, a: &[f64]) -> Result<f64> {
    // Power iteration on (A - sigma I)^{-1} with sigma slightly below the
    // smallest Gershgorin bound.
    let mut lo = f64::INFINITY;
    for i in 0..n {
        let mut r = 0.0;
        for j in 0..n {
            if j != i {
                r += a[i * n + j].abs();
            }
        }
        lo = lo.min(a[i * n + i] - r);
    }
    let sigma = lo - 1.0;
    let mut shifted = a.to_vec();
    for i in 0..n {
        shifted[i * n + i] -= sigma;
    }
    let f = dense_factorize(n, &shifted)?;
    let mut v = vec![1.0; n];
    let mut lam = 0.0;
    for _ in 0..200 {
        let w = f.solve(&v);
        let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        for i in 0..n {
            v[i] = w[i] / norm;
        }
        lam = norm;
    }
    // eigenvalue of (A - sigma)^{-1} is lam -> min eig of A = sigma + 1/lam
    Ok(sigma + 1.0 / lam)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn skyline_solves_spd_system() {
        // 1D Laplacian, n=5
        let n = 5;
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0));
            if i > 0 {
                t.push((i, i - 1, -1.0));
                t.push((i - 1, i, -1.0));
            }
        }
        let f = SkylineMatrix::from_triplets(n, &t).factorize().unwrap();
        let b = vec![1.0; n];
        let x = f.solve(&b);
        // residual check
        for i in 0..n {
            let mut r = 2.0 * x[i];
            if i > 0 {
                r -= x[i - 1];
            }
            if i + 1 < n {
                r -= x[i + 1];
            }
            assert!((r - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn skyline_handles_quasi_definite_saddle() {
        // [ 2 1 ; 1 -3 ] symmetric quasi-definite
        let t = vec![(0, 0, 2.0), (1, 0, 1.0), (0, 1, 1.0), (1, 1, -3.0)];
        let f = SkylineMatrix::from_triplets(2, &t).factorize().unwrap();
        let x = f.solve(&[1.0, 0.0]);
        // exact solution: A^{ -1} [1,0] = [3/7, 1/7]
        assert!((x[0] - 3.0 / 7.0).abs() < 1e-14);
        assert!((x[1] - 1.0 / 7.0).abs() < 1e-14);
    }

    #[test]
    fn dense_matches_skyline() {
        let a = [4.0, 1.0, 0.5, 1.0, 3.0, -0.2, 0.5, -0.2, 5.0];
        let f = dense_factorize(3, &a).unwrap();
        let x = f.solve(&[1.0, 2.0, 3.0]);
        for i in 0..3 {
            let mut r = 0.0;
            for j in 0..3 {
                r += a[i * 3 + j] * x[j];
            }
            assert!((r - (i as f64 + 1.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn min_eig_of_diag() {
        let a = [3.0, 0.0, 0.0, 0.0, 0.7, 0.0, 0.0, 0.0, 5.0];
        let e = min_eig_sym(3, &a).unwrap();
        assert!((e - 0.7).abs() < 1e-9);
    }
}
