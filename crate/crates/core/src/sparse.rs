//! Compressed sparse row operators.

use crate::linalg::DenseMatrix;
use crate::{Error, Result};
use num_complex::Complex64;

#[derive(Clone, Debug)]
pub struct SparseOperator {
    dim: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<Complex64>,
    hermitian: bool,
}

/// Hermiticity tolerance for the flag.
pub const HERMITIAN_TOL: f64 = 1e-12;

impl SparseOperator {
    /// Build from (row, col, value) triplets. Triplets are sorted and
    /// duplicates summed; exact zeros are dropped.
    pub fn from_triplets(dim: usize, mut triplets: Vec<(usize, usize, Complex64)>) -> Result<Self> {
        for &(r, c, _) in &triplets {
            if r >= dim || c >= dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: r.max(c) + 1,
                });
            }
        }
        triplets.sort_unstable_by_key(|&(r, c, _)| (r, c));
        let mut indptr = vec![0usize; dim + 1];
        let mut indices = Vec::with_capacity(triplets.len());
        let mut values: Vec<Complex64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        let mut rows = Vec::with_capacity(triplets.len());
        for (r, c, v) in triplets {
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                rows.push(r);
                indices.push(c);
                values.push(v);
                last = Some((r, c));
            }
        }
        let mut keep_idx = Vec::with_capacity(indices.len());
        let mut keep_val = Vec::with_capacity(values.len());
        for k in 0..indices.len() {
            if values[k] != Complex64::new(0.0, 0.0) {
                indptr[rows[k] + 1] += 1;
                keep_idx.push(indices[k]);
                keep_val.push(values[k]);
            }
        }
        for r in 0..dim {
            indptr[r + 1] += indptr[r];
        }
        Ok(SparseOperator {
            dim,
            indptr,
            indices: keep_idx,
            values: keep_val,
            hermitian: false,
        })
    }

    /// As [`from_triplets`](Self::from_triplets), then verify and set the
    /// hermitian flag.
    pub fn hermitian_from_triplets(dim: usize, triplets: Vec<(usize, usize, Complex64)>) -> Result<Self> {
        let mut op = Self::from_triplets(dim, triplets)?;
        op.mark_hermitian()?;
        Ok(op)
    }

    pub fn diagonal(values: &[Complex64]) -> Self {
        let dim = values.len();
        let trip = values.iter().enumerate().map(|(i, &v)| (i, i, v)).collect();
        Self::from_triplets(dim, trip).expect("diagonal in range")
    }

    pub fn real_diagonal(values: &[f64]) -> Self {
        let v: Vec<Complex64> = values.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        let mut op = Self::diagonal(&v);
        op.hermitian = true;
        op
    }

    pub fn zeros(dim: usize) -> Self {
        let mut op = Self::from_triplets(dim, Vec::new()).unwrap();
        op.hermitian = true;
        op
    }

    pub fn mark_hermitian(&mut self) -> Result<()> {
        let err = self.hermiticity_error();
        if err > HERMITIAN_TOL {
            return Err(Error::NotHermitian(err));
        }
        self.hermitian = true;
        Ok(())
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermitian
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, Complex64)> + '_ {
        let (a, b) = (self.indptr[r], self.indptr[r + 1]);
        self.indices[a..b].iter().copied().zip(self.values[a..b].iter().copied())
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, Complex64)> + '_ {
        (0..self.dim).flat_map(move |r| self.row(r).map(move |(c, v)| (r, c, v)))
    }

    pub fn get(&self, r: usize, c: usize) -> Complex64 {
        let (a, b) = (self.indptr[r], self.indptr[r + 1]);
        match self.indices[a..b].binary_search(&c) {
            Ok(k) => self.values[a + k],
            Err(_) => Complex64::new(0.0, 0.0),
        }
    }

    /// `y = A x`.
    pub fn matvec(&self, x: &[Complex64], y: &mut [Complex64]) {
        debug_assert_eq!(x.len(), self.dim);
        debug_assert_eq!(y.len(), self.dim);
        for r in 0..self.dim {
            let (a, b) = (self.indptr[r], self.indptr[r + 1]);
            let mut acc = Complex64::new(0.0, 0.0);
            for k in a..b {
                acc += self.values[k] * x[self.indices[k]];
            }
            y[r] = acc;
        }
    }

    /// `y += α A x`.
    pub fn matvec_add(&self, alpha: Complex64, x: &[Complex64], y: &mut [Complex64]) {
        for r in 0..self.dim {
            let (a, b) = (self.indptr[r], self.indptr[r + 1]);
            let mut acc = Complex64::new(0.0, 0.0);
            for k in a..b {
                acc += self.values[k] * x[self.indices[k]];
            }
            y[r] += alpha * acc;
        }
    }

    pub fn apply(&self, x: &[Complex64]) -> Vec<Complex64> {
        let mut y = vec![Complex64::new(0.0, 0.0); self.dim];
        self.matvec(x, &mut y);
        y
    }

    /// `⟨ψ|A|ψ⟩` (no normalization).
    pub fn expectation(&self, psi: &[Complex64]) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for r in 0..self.dim {
            let mut row = Complex64::new(0.0, 0.0);
            for (c, v) in self.row(r) {
                row += v * psi[c];
            }
            acc += psi[r].conj() * row;
        }
        acc
    }

    pub fn adjoint(&self) -> SparseOperator {
        let trip = self.triplets().map(|(r, c, v)| (c, r, v.conj())).collect();
        let mut op = Self::from_triplets(self.dim, trip).unwrap();
        op.hermitian = self.hermitian;
        op
    }

    /// `self + s·other`; the hermitian flag is recomputed.
    pub fn add_scaled(&self, s: Complex64, other: &SparseOperator) -> Result<SparseOperator> {
        if other.dim != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: other.dim,
            });
        }
        let trip = self
            .triplets()
            .chain(other.triplets().map(|(r, c, v)| (r, c, s * v)))
            .collect();
        let mut op = Self::from_triplets(self.dim, trip)?;
        op.hermitian = op.hermiticity_error() <= HERMITIAN_TOL;
        Ok(op)
    }

    pub fn scaled(&self, s: Complex64) -> SparseOperator {
        let mut op = self.clone();
        for v in &mut op.values {
            *v *= s;
        }
        op.hermitian = self.hermitian && s.im == 0.0;
        op
    }

    /// `max |A_rc − B_rc|` over the union of both patterns.
    pub fn max_abs_diff(&self, other: &SparseOperator) -> f64 {
        assert_eq!(self.dim, other.dim);
        let mut m = 0.0f64;
        for r in 0..self.dim {
            let mut a = self.row(r).peekable();
            let mut b = other.row(r).peekable();
            loop {
                match (a.peek().copied(), b.peek().copied()) {
                    (None, None) => break,
                    (Some((ca, va)), Some((cb, vb))) if ca == cb => {
                        m = m.max((va - vb).norm());
                        a.next();
                        b.next();
                    }
                    (Some((ca, va)), Some((cb, _))) if ca < cb => {
                        m = m.max(va.norm());
                        a.next();
                    }
                    (Some((ca, va)), None) => {
                        let _ = ca;
                        m = m.max(va.norm());
                        a.next();
                    }
                    (_, Some((_, vb))) => {
                        m = m.max(vb.norm());
                        b.next();
                    }
                }
            }
        }
        m
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.norm()))
    }

    /// `max |A − A†|`.
    pub fn hermiticity_error(&self) -> f64 {
        let mut m = 0.0f64;
        for (r, c, v) in self.triplets() {
            m = m.max((v - self.get(c, r).conj()).norm());
        }
        m
    }

    /// Row-sum bound on the spectral norm, `max_r Σ_c |A_rc|`.
    pub fn norm_bound(&self) -> f64 {
        (0..self.dim)
            .map(|r| self.row(r).map(|(_, v)| v.norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut d = DenseMatrix::zeros(self.dim, self.dim);
        for (r, c, v) in self.triplets() {
            d[(r, c)] += v;
        }
        d
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.dim).map(|r| self.get(r, r)).sum()
    }

    pub fn structure(&self) -> (&[usize], &[usize], &[Complex64]) {
        (&self.indptr, &self.indices, &self.values)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cx(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn duplicates_are_summed_and_zeros_dropped() {
        let op = SparseOperator::from_triplets(
            3,
            vec![
                (2, 1, cx(1.0, 0.0)),
                (0, 0, cx(1.0, 1.0)),
                (2, 1, cx(0.5, -1.0)),
                (1, 2, cx(0.0, 0.0)),
            ],
        )
        .unwrap();
        assert_eq!(op.nnz(), 2);
        assert_eq!(op.get(2, 1), cx(1.5, -1.0));
        assert_eq!(op.get(1, 2), cx(0.0, 0.0));
    }

    #[test]
    fn out_of_range_rejected() {
        assert!(SparseOperator::from_triplets(2, vec![(0, 2, cx(1.0, 0.0))]).is_err());
    }

    #[test]
    fn non_hermitian_flag_refused() {
        let t = vec![(0, 1, cx(1.0, 0.0)), (1, 0, cx(2.0, 0.0))];
        assert!(matches!(
            SparseOperator::hermitian_from_triplets(2, t),
            Err(Error::NotHermitian(_))
        ));
    }

    proptest! {
        #[test]
        fn matvec_matches_dense(entries in prop::collection::vec((0usize..6, 0usize..6, -2.0f64..2.0, -2.0f64..2.0), 0..30),
                                x in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 6)) {
            let trip: Vec<_> = entries.iter().map(|&(r, c, a, b)| (r, c, cx(a, b))).collect();
            let op = SparseOperator::from_triplets(6, trip.clone()).unwrap();
            let x: Vec<Complex64> = x.iter().map(|&(a, b)| cx(a, b)).collect();
            let y = op.apply(&x);
            let mut yd = vec![cx(0.0, 0.0); 6];
            for (r, c, v) in trip {
                yd[r] += v * x[c];
            }
            for k in 0..6 {
                prop_assert!((y[k] - yd[k]).norm() < 1e-12);
            }
            let adj = op.adjoint();
            for (r, c, v) in op.triplets() {
                prop_assert_eq!(adj.get(c, r), v.conj());
            }
            prop_assert!(op.max_abs_diff(&op) == 0.0);
            let h = op.add_scaled(cx(1.0, 0.0), &adj).unwrap();
            prop_assert!(h.is_hermitian());
        }
    }
}
