//! Lanczos propagator for `exp(−iHt)ψ` with Hermitian sparse `H`.
//!
//! Each substep builds one Krylov space of dimension at most `m`, then picks
//! the longest sub-interval whose a-posteriori error estimate
//! `β₀·β_m·|e_mᵀ exp(−iτT) e₁|` stays below the tolerance. The Krylov space
//! is reused while shrinking the interval, and for every output time that
//! falls inside it.

use crate::linalg::{eigh_tridiagonal, norm};
use crate::sparse::SparseOperator;
use crate::{Error, Result};
use num_complex::Complex64;

#[derive(Clone, Copy, Debug)]
pub struct KrylovOptions {
    /// Maximum Krylov subspace dimension.
    pub m: usize,
    /// Error target per substep, absolute in the state norm.
    pub tol: f64,
    /// Give up after this many interval reductions on one Krylov space.
    pub max_shrinks: usize,
}

impl Default for KrylovOptions {
    fn default() -> Self {
        KrylovOptions {
            m: 30,
            tol: 1e-10,
            max_shrinks: 160,
        }
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct KrylovStats {
    pub substeps: usize,
    pub matvecs: usize,
    pub max_error: f64,
}

impl KrylovStats {
    pub fn merge(&mut self, o: KrylovStats) {
        self.substeps += o.substeps;
        self.matvecs += o.matvecs;
        self.max_error = self.max_error.max(o.max_error);
    }
}

const SHRINK: f64 = 0.75;

/// Tridiagonal projection of one Krylov space.
struct Space {
    beta0: f64,
    dim: usize,
    happy: bool,
    beta_last: f64,
    lam: Vec<f64>,
    z: Vec<f64>,
}

impl Space {
    /// `β₀ exp(−isT) e₁` in the Lanczos basis.
    fn coeffs(&self, s: f64) -> Vec<Complex64> {
        let d = self.dim;
        (0..d)
            .map(|k| {
                self.beta0
                    * (0..d)
                        .map(|l| self.z[k + l * d] * self.z[l * d] * Complex64::from_polar(1.0, -s * self.lam[l]))
                        .sum::<Complex64>()
            })
            .collect()
    }

    fn error(&self, y: &[Complex64]) -> f64 {
        if self.happy {
            0.0
        } else {
            self.beta_last * y[self.dim - 1].norm()
        }
    }
}

/// Workspace reused across calls on operators of one dimension.
pub struct Krylov {
    opts: KrylovOptions,
    basis: Vec<Vec<Complex64>>,
    w: Vec<Complex64>,
    out: Vec<Complex64>,
}

impl Krylov {
    pub fn new(dim: usize, opts: KrylovOptions) -> Self {
        let m = opts.m.max(2);
        let zero = Complex64::new(0.0, 0.0);
        Krylov {
            opts: KrylovOptions { m, ..opts },
            basis: (0..=m).map(|_| vec![zero; dim]).collect(),
            w: vec![zero; dim],
            out: vec![zero; dim],
        }
    }

    /// Lanczos recurrence without reorthogonalization.
    fn lanczos(&mut self, h: &SparseOperator, psi: &[Complex64], hnorm: f64, stats: &mut KrylovStats) -> Result<Space> {
        let beta0 = norm(psi);
        let m = self.opts.m;
        let mut alpha = Vec::with_capacity(m);
        let mut beta: Vec<f64> = Vec::with_capacity(m);
        for (b, p) in self.basis[0].iter_mut().zip(psi) {
            *b = p / beta0;
        }
        let mut happy = false;
        let mut beta_last = 0.0;
        for j in 0..m {
            h.matvec(&self.basis[j], &mut self.w);
            stats.matvecs += 1;
            let a: f64 = crate::linalg::dot(&self.basis[j], &self.w).re;
            for (k, wk) in self.w.iter_mut().enumerate() {
                *wk -= a * self.basis[j][k];
                if j > 0 {
                    *wk -= beta[j - 1] * self.basis[j - 1][k];
                }
            }
            alpha.push(a);
            let b = norm(&self.w);
            if b <= 1e-13 * hnorm {
                happy = true;
                break;
            }
            beta_last = b;
            if j + 1 < m {
                beta.push(b);
            }
            for (v, wk) in self.basis[j + 1].iter_mut().zip(self.w.iter()) {
                *v = wk / b;
            }
        }
        let dim = alpha.len();
        let (lam, z) = eigh_tridiagonal(&alpha, &beta[..dim - 1])?;
        Ok(Space {
            beta0,
            dim,
            happy,
            beta_last,
            lam,
            z,
        })
    }

    fn combine(&mut self, y: &[Complex64]) {
        for p in self.out.iter_mut() {
            *p = Complex64::new(0.0, 0.0);
        }
        for (k, yk) in y.iter().enumerate() {
            for (p, v) in self.out.iter_mut().zip(&self.basis[k]) {
                *p += yk * v;
            }
        }
    }

    /// Advance `psi ← exp(−iHt) psi`. `t` may be negative.
    pub fn propagate(&mut self, h: &SparseOperator, psi: &mut [Complex64], t: f64) -> Result<KrylovStats> {
        if t == 0.0 {
            return Ok(KrylovStats::default());
        }
        self.run(h, psi, t.signum(), &[t.abs()], |_, _| {})
    }

    /// Propagate through the non-decreasing offsets `times ≥ 0`, calling
    /// `visit(k, ψ(times[k]))` at each one. One Krylov space serves every
    /// offset it can reach within tolerance. On return `psi` holds the
    /// state at the last offset.
    pub fn propagate_sampled<V>(&mut self, h: &SparseOperator, psi: &mut [Complex64], times: &[f64], visit: V) -> Result<KrylovStats>
    where
        V: FnMut(usize, &[Complex64]),
    {
        if times.iter().any(|t| !(t.is_finite() && *t >= 0.0)) || times.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::InvalidArgument("sample offsets must be finite, non-negative and non-decreasing".into()));
        }
        self.run(h, psi, 1.0, times, visit)
    }

    fn run<V>(&mut self, h: &SparseOperator, psi: &mut [Complex64], dir: f64, times: &[f64], mut visit: V) -> Result<KrylovStats>
    where
        V: FnMut(usize, &[Complex64]),
    {
        let mut stats = KrylovStats::default();
        let hnorm = h.norm_bound().max(f64::MIN_POSITIVE);
        let mut tc = 0.0;
        let mut k = 0;
        while k < times.len() {
            if times[k] <= tc {
                visit(k, psi);
                k += 1;
                continue;
            }
            if norm(psi) == 0.0 {
                for j in k..times.len() {
                    visit(j, psi);
                }
                break;
            }
            let space = self.lanczos(h, psi, hnorm, &mut stats)?;
            let mut tau = times[times.len() - 1] - tc;
            let mut y = space.coeffs(dir * tau);
            let mut err = space.error(&y);
            let mut shrinks = 0;
            while err > self.opts.tol {
                shrinks += 1;
                if shrinks > self.opts.max_shrinks {
                    return Err(Error::KrylovBreakdown {
                        target: self.opts.tol,
                        achieved: err,
                    });
                }
                tau *= SHRINK;
                y = space.coeffs(dir * tau);
                err = space.error(&y);
            }
            stats.substeps += 1;
            stats.max_error = stats.max_error.max(err);
            let reach = tc + tau;
            let mut advanced = false;
            while k < times.len() && times[k] <= reach {
                let yk = space.coeffs(dir * (times[k] - tc));
                self.combine(&yk);
                visit(k, &self.out);
                advanced = true;
                k += 1;
            }
            if advanced {
                psi.copy_from_slice(&self.out);
                tc = times[k - 1];
            } else {
                self.combine(&y);
                psi.copy_from_slice(&self.out);
                tc = reach;
            }
        }
        Ok(stats)
    }
}

/// One-shot `exp(−iHt) psi`.
pub fn expm_apply(h: &SparseOperator, psi: &[Complex64], t: f64, opts: KrylovOptions) -> Result<Vec<Complex64>> {
    let mut out = psi.to_vec();
    Krylov::new(h.dim(), opts).propagate(h, &mut out, t)?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::eigh;

    fn chain(n: usize) -> SparseOperator {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, Complex64::new((i as f64 * 0.37).sin(), 0.0)));
            if i + 1 < n {
                let v = Complex64::new(1.0, 0.3 * i as f64 / n as f64);
                t.push((i, i + 1, v));
                t.push((i + 1, i, v.conj()));
            }
        }
        SparseOperator::hermitian_from_triplets(n, t).unwrap()
    }

    fn exact(h: &SparseOperator, psi: &[Complex64], t: f64) -> Vec<Complex64> {
        let (w, v) = eigh(&h.to_dense()).unwrap();
        let mut c = v.adjoint_matvec(psi);
        for (ck, e) in c.iter_mut().zip(&w) {
            *ck *= Complex64::from_polar(1.0, -e * t);
        }
        v.matvec(&c)
    }

    #[test]
    fn matches_dense_exponential() {
        let n = 120;
        let h = chain(n);
        let mut psi = vec![Complex64::new(0.0, 0.0); n];
        psi[n / 2] = Complex64::new(1.0, 0.0);
        for t in [0.3, 5.0, -7.5] {
            let got = expm_apply(&h, &psi, t, KrylovOptions::default()).unwrap();
            let want = exact(&h, &psi, t);
            let diff: f64 = got.iter().zip(&want).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
            assert!(diff < 1e-9, "t={t} diff={diff}");
            assert!((norm(&got) - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn happy_breakdown_on_invariant_subspace() {
        let h = SparseOperator::real_diagonal(&[1.0, 2.0, 3.0]);
        let psi = vec![Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)];
        let out = expm_apply(&h, &psi, 100.0, KrylovOptions::default()).unwrap();
        assert!((out[1] - Complex64::from_polar(1.0, -200.0)).norm() < 1e-12);
    }

    #[test]
    fn sampled_matches_dense() {
        let n = 80;
        let h = chain(n);
        let mut psi = vec![Complex64::new(0.0, 0.0); n];
        psi[3] = Complex64::new(0.6, 0.0);
        psi[40] = Complex64::new(0.0, 0.8);
        let psi0 = psi.clone();
        let times: Vec<f64> = (0..60).map(|i| 0.25 * i as f64).collect();
        let mut worst = 0.0f64;
        let mut seen = 0;
        let mut k = Krylov::new(n, KrylovOptions::default());
        let stats = k
            .propagate_sampled(&h, &mut psi, &times, |i, v| {
                let want = exact(&h, &psi0, times[i]);
                worst = worst.max(v.iter().zip(&want).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max));
                seen += 1;
            })
            .unwrap();
        assert_eq!(seen, times.len());
        assert!(worst < 1e-9, "{worst}");
        assert!(stats.substeps < times.len());
        let end = exact(&h, &psi0, *times.last().unwrap());
        assert!(psi.iter().zip(&end).all(|(a, b)| (a - b).norm() < 1e-9));
        assert!(k.propagate_sampled(&h, &mut psi, &[1.0, 0.5], |_, _| {}).is_err());
    }

    #[test]
    fn zero_time_is_identity() {
        let h = chain(10);
        let psi: Vec<Complex64> = (0..10).map(|i| Complex64::new(i as f64, 1.0)).collect();
        assert_eq!(expm_apply(&h, &psi, 0.0, KrylovOptions::default()).unwrap(), psi);
    }
}
