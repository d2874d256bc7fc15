//! Dense matrices and the LAPACK eigensolvers behind them.

use crate::{Error, Result};
use num_complex::Complex64;
use std::ops::{Index, IndexMut};

/// Column-major dense complex matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        DenseMatrix {
            rows,
            cols,
            data: vec![Complex64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Complex64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl Fn(usize, usize) -> Complex64) -> Self {
        let mut m = Self::zeros(rows, cols);
        for c in 0..cols {
            for r in 0..rows {
                m.data[r + c * rows] = f(r, c);
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn col(&self, c: usize) -> &[Complex64] {
        &self.data[c * self.rows..(c + 1) * self.rows]
    }

    pub fn col_mut(&mut self, c: usize) -> &mut [Complex64] {
        &mut self.data[c * self.rows..(c + 1) * self.rows]
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    /// `A x`.
    pub fn matvec(&self, x: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(x.len(), self.cols);
        let mut y = vec![Complex64::new(0.0, 0.0); self.rows];
        for (c, &xc) in x.iter().enumerate() {
            if xc == Complex64::new(0.0, 0.0) {
                continue;
            }
            for (yr, a) in y.iter_mut().zip(self.col(c)) {
                *yr += a * xc;
            }
        }
        y
    }

    /// `A† x`.
    pub fn adjoint_matvec(&self, x: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(x.len(), self.rows);
        (0..self.cols).map(|c| dot(self.col(c), x)).collect()
    }

    pub fn matmul(&self, other: &DenseMatrix) -> DenseMatrix {
        assert_eq!(self.cols, other.rows);
        let mut out = DenseMatrix::zeros(self.rows, other.cols);
        for c in 0..other.cols {
            let y = self.matvec(other.col(c));
            out.col_mut(c).copy_from_slice(&y);
        }
        out
    }

    pub fn adjoint(&self) -> DenseMatrix {
        DenseMatrix::from_fn(self.cols, self.rows, |r, c| self[(c, r)].conj())
    }

    pub fn max_abs_diff(&self, other: &DenseMatrix) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0, |m, (a, b)| m.max((a - b).norm()))
    }
}

impl Index<(usize, usize)> for DenseMatrix {
    type Output = Complex64;
    fn index(&self, (r, c): (usize, usize)) -> &Complex64 {
        &self.data[r + c * self.rows]
    }
}

impl IndexMut<(usize, usize)> for DenseMatrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut Complex64 {
        &mut self.data[r + c * self.rows]
    }
}

/// `⟨a|b⟩ = Σ a* b`.
pub fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn norm(a: &[Complex64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

/// Hermitian eigendecomposition (divide and conquer, upper triangle used).
/// Eigenvalues ascending; eigenvectors are the columns.
pub fn eigh(a: &DenseMatrix) -> Result<(Vec<f64>, DenseMatrix)> {
    if a.rows != a.cols {
        return Err(Error::DimensionMismatch {
            expected: a.rows,
            got: a.cols,
        });
    }
    let n = a.rows;
    if n == 0 {
        return Ok((Vec::new(), DenseMatrix::zeros(0, 0)));
    }
    let mut v = a.clone();
    let mut w = vec![0.0f64; n];
    let nn = n as i32;
    let jobz = b'V' as std::os::raw::c_char;
    let uplo = b'U' as std::os::raw::c_char;
    let mut info = 0i32;
    let mut work = vec![Complex64::new(0.0, 0.0); 1];
    let mut rwork = vec![0.0f64; 1];
    let mut iwork = vec![0i32; 1];
    // SAFETY: buffers are sized per the LAPACK workspace query and
    // Complex64 is layout-compatible with the bindgen complex type.
    unsafe {
        lapack_sys::zheevd_(
            &jobz,
            &uplo,
            &nn,
            v.data.as_mut_ptr() as *mut _,
            &nn,
            w.as_mut_ptr(),
            work.as_mut_ptr() as *mut _,
            &-1,
            rwork.as_mut_ptr(),
            &-1,
            iwork.as_mut_ptr(),
            &-1,
            &mut info,
        );
    }
    if info != 0 {
        return Err(Error::Lapack {
            routine: "zheevd",
            info,
        });
    }
    let lwork = work[0].re as i32;
    let lrwork = rwork[0] as i32;
    let liwork = iwork[0];
    work = vec![Complex64::new(0.0, 0.0); lwork as usize];
    rwork = vec![0.0; lrwork as usize];
    iwork = vec![0; liwork as usize];
    unsafe {
        lapack_sys::zheevd_(
            &jobz,
            &uplo,
            &nn,
            v.data.as_mut_ptr() as *mut _,
            &nn,
            w.as_mut_ptr(),
            work.as_mut_ptr() as *mut _,
            &lwork,
            rwork.as_mut_ptr(),
            &lrwork,
            iwork.as_mut_ptr(),
            &liwork,
            &mut info,
        );
    }
    if info != 0 {
        return Err(Error::Lapack {
            routine: "zheevd",
            info,
        });
    }
    Ok((w, v))
}

/// Symmetric tridiagonal eigenproblem. `diag` has length m, `off` m−1.
/// Returns ascending eigenvalues and the column-major m×m eigenvectors.
pub fn eigh_tridiagonal(diag: &[f64], off: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let m = diag.len();
    assert!(off.len() + 1 == m || (m == 0 && off.is_empty()));
    if m == 0 {
        return Ok((Vec::new(), Vec::new()));
    }
    let mut d = diag.to_vec();
    let mut e = off.to_vec();
    e.push(0.0);
    let mut z = vec![0.0f64; m * m];
    let mut work = vec![0.0f64; (2 * m).saturating_sub(2).max(1)];
    let nn = m as i32;
    let jobz = b'V' as std::os::raw::c_char;
    let mut info = 0i32;
    // SAFETY: d has length m, e at least m−1, z is m×m, work 2m−2.
    unsafe {
        lapack_sys::dstev_(
            &jobz,
            &nn,
            d.as_mut_ptr(),
            e.as_mut_ptr(),
            z.as_mut_ptr(),
            &nn,
            work.as_mut_ptr(),
            &mut info,
        );
    }
    if info != 0 {
        return Err(Error::Lapack {
            routine: "dstev",
            info,
        });
    }
    Ok((d, z))
}
