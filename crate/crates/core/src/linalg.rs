//! Small sparse/banded kernels used by the truth solver.

/// Compressed sparse row matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds from (row, col, value) triplets; duplicates are summed.
    pub fn from_triplets(nrows: usize, ncols: usize, mut triplets: Vec<(usize, usize, f64)>) -> Self {
        triplets.sort_unstable_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut row_ptr = vec![0usize; nrows + 1];
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            assert!(r < nrows && c < ncols, "triplet ({r}, {c}) out of bounds");
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
                continue;
            }
            last = Some((r, c));
            row_ptr[r + 1] += 1;
            col_idx.push(c);
            values.push(v);
        }
        for r in 0..nrows {
            row_ptr[r + 1] += row_ptr[r];
        }
        Self { nrows, ncols, row_ptr, col_idx, values }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.col_idx[span.clone()].iter().copied().zip(self.values[span].iter().copied())
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.row(r).find(|&(cc, _)| cc == c).map_or(0.0, |(_, v)| v)
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows];
        self.matvec_into(x, &mut y);
        y
    }

    pub fn matvec_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.ncols);
        for (r, yr) in y.iter_mut().enumerate() {
            *yr = self.row(r).map(|(c, v)| v * x[c]).sum();
        }
    }

    /// `A^T x`.
    pub fn matvec_transpose(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.nrows);
        let mut y = vec![0.0; self.ncols];
        for (r, xr) in x.iter().enumerate() {
            for (c, v) in self.row(r) {
                y[c] += v * xr;
            }
        }
        y
    }

    /// `y^T A x`.
    pub fn bilinear(&self, y: &[f64], x: &[f64]) -> f64 {
        (0..self.nrows)
            .map(|r| y[r] * self.row(r).map(|(c, v)| v * x[c]).sum::<f64>())
            .sum()
    }

    /// Entrywise linear combination of matrices sharing this sparsity pattern.
    pub fn combine(terms: &[(f64, &CsrMatrix)]) -> CsrMatrix {
        let first = terms[0].1;
        let mut out = first.clone();
        out.values.iter_mut().for_each(|v| *v = 0.0);
        for (w, m) in terms {
            assert!(m.row_ptr == first.row_ptr && m.col_idx == first.col_idx, "pattern mismatch");
            for (o, v) in out.values.iter_mut().zip(&m.values) {
                *o += w * v;
            }
        }
        out
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let mut d = nalgebra::DMatrix::zeros(self.nrows, self.ncols);
        for r in 0..self.nrows {
            for (c, v) in self.row(r) {
                d[(r, c)] += v;
            }
        }
        d
    }
}

/// LU factorization without pivoting of a square band matrix with equal
/// lower and upper bandwidth. Suitable for matrices whose symmetric part is
/// positive definite, such as Galerkin convection-diffusion operators.
#[derive(Debug, Clone)]
pub struct BandedLu {
    n: usize,
    bw: usize,
    // row-major band storage: entry (i, j) at i * (2 bw + 1) + (j + bw - i)
    band: Vec<f64>,
}

impl BandedLu {
    pub fn new(n: usize, bw: usize) -> Self {
        Self { n, bw, band: vec![0.0; n * (2 * bw + 1)] }
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        i * (2 * self.bw + 1) + (j + self.bw - i)
    }

    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        assert!(i.abs_diff(j) <= self.bw, "entry ({i}, {j}) outside band {}", self.bw);
        let k = self.idx(i, j);
        self.band[k] += v;
    }

    /// Factorizes in place. Returns `false` on a (near-)zero pivot.
    pub fn factor(&mut self) -> bool {
        let (n, bw) = (self.n, self.bw);
        let w = 2 * bw + 1;
        let scale = self.band.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        for k in 0..n {
            let pivot = self.band[k * w + bw];
            if !(pivot.abs() > 1e-14 * scale) {
                return false;
            }
            let jmax = (k + bw).min(n - 1);
            for i in (k + 1)..=jmax {
                let lik_pos = i * w + (k + bw - i);
                let lik = self.band[lik_pos] / pivot;
                self.band[lik_pos] = lik;
                if lik == 0.0 {
                    continue;
                }
                let (head, tail) = self.band.split_at_mut(i * w);
                let krow = &head[k * w..(k + 1) * w];
                let irow = &mut tail[..w];
                // entries (k, j) for j in k+1..=jmax
                for j in (k + 1)..=jmax {
                    irow[j + bw - i] -= lik * krow[j + bw - k];
                }
            }
        }
        true
    }

    pub fn solve(&self, b: &mut [f64]) {
        let (n, bw) = (self.n, self.bw);
        let w = 2 * bw + 1;
        for i in 0..n {
            let lo = i.saturating_sub(bw);
            let row = &self.band[i * w..(i + 1) * w];
            let mut s = b[i];
            for j in lo..i {
                s -= row[j + bw - i] * b[j];
            }
            b[i] = s;
        }
        for i in (0..n).rev() {
            let hi = (i + bw).min(n - 1);
            let row = &self.band[i * w..(i + 1) * w];
            let mut s = b[i];
            for j in (i + 1)..=hi {
                s -= row[j + bw - i] * b[j];
            }
            b[i] = s / row[bw];
        }
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
