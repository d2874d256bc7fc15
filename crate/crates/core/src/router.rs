//! Driven three-cavity router with two detector cavities.
//!
//! Cavity 3 is kicked by a Lorentzian pulse; cavities 1 and 2 feed
//! detectors D1 and D2 through the non-reciprocal coupling
//! `r_out b_Dk† b_k + r_in b_k† b_Dk`. In the frame rotating at the drive
//! frequency, keeping the resonant half of the pulse,
//! `H(t) = H_core + ½F₀L(t) b₃† + ½F₀*L(t) b₃ + H_det` with
//! `L(t) = σ/(π(t² + σ²))`. The state is never renormalized.

use crate::basis::Spin;
use crate::ode::{integrate, OdeOptions};
use crate::operators::{coupling_vector, dot_sigma, next, prev};
use crate::sparse::SparseOperator;
use crate::{c, Error, Result};
use num_complex::Complex64;
use std::collections::HashMap;
use std::f64::consts::PI;

/// Modes in order: cavities 1, 2, 3, detectors D1, D2.
pub const MODES: usize = 5;

#[derive(Clone, Debug, PartialEq)]
pub struct RouterConfig {
    pub f0: Complex64,
    pub sigma_pulse: f64,
    pub omega: f64,
    pub r_in: f64,
    pub r_out: f64,
    pub g: f64,
    /// Fock levels kept per mode (cavities 1–3, D1, D2).
    pub cutoffs: [usize; MODES],
    /// Optional cap on the total photon number.
    pub total_cap: Option<usize>,
    pub t_start: f64,
    pub t_final: f64,
    pub dt: f64,
    /// Relative per-step tolerance of the integrator.
    pub rtol: f64,
    /// Below this detector population the imbalance is reported as 0.
    pub floor_tol: f64,
    /// Largest normalized population allowed on the truncation edge.
    pub leak_tol: f64,
}

impl RouterConfig {
    /// Desk-scale setup: `F₀ = 2`, `σ = 0.1/g`, `r_out = 2|g|`,
    /// `r_in = 0.02|g|`, seven levels per mode, from `−40σ` to `2T`.
    pub fn scaled(g: f64) -> Self {
        let ga = g.abs();
        let sigma = 0.1 / ga;
        RouterConfig {
            f0: c(2.0, 0.0),
            sigma_pulse: sigma,
            omega: 1.0,
            r_in: 0.02 * ga,
            r_out: 2.0 * ga,
            g,
            cutoffs: [7; MODES],
            total_cap: None,
            t_start: -40.0 * sigma,
            t_final: 2.0 * crate::period(g),
            dt: crate::period(g) / 200.0,
            rtol: 1e-8,
            floor_tol: 1e-6,
            leak_tol: 1e-4,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_pulse > 0.0) {
            return Err(Error::InvalidArgument("pulse width must be positive".into()));
        }
        if self.cutoffs.iter().any(|&l| l < 2) {
            return Err(Error::InvalidArgument("every mode needs at least 2 levels".into()));
        }
        if self.r_in < 0.0 || self.r_out < 0.0 {
            return Err(Error::InvalidArgument("detector couplings must be non-negative".into()));
        }
        if !(self.t_final > self.t_start && self.dt > 0.0 && self.rtol > 0.0) {
            return Err(Error::InvalidArgument("need t_final > t_start, dt > 0 and rtol > 0".into()));
        }
        Ok(())
    }

    /// `|F₀|²/4`, the photon number deposited by the pulse.
    pub fn mean_photons(&self) -> f64 {
        self.f0.norm_sqr() / 4.0
    }

    pub fn sample_times(&self) -> Vec<f64> {
        let n = ((self.t_final - self.t_start) / self.dt).round().max(1.0) as usize;
        (0..=n)
            .map(|k| self.t_start + (self.t_final - self.t_start) * k as f64 / n as f64)
            .collect()
    }
}

/// `F(t) = F₀σ e^{iωt}/(π(t² + σ²))`.
pub fn drive_envelope(t: f64, f0: Complex64, sigma_pulse: f64, omega: f64) -> Complex64 {
    f0 * Complex64::from_polar(sigma_pulse / (PI * (t * t + sigma_pulse * sigma_pulse)), omega * t)
}

/// Five bosonic modes and the qubit.
#[derive(Clone, Debug)]
pub struct RouterBasis {
    labels: Vec<([usize; MODES], Spin)>,
    index: HashMap<([usize; MODES], Spin), usize>,
    cutoffs: [usize; MODES],
    total_cap: Option<usize>,
}

impl RouterBasis {
    pub fn new(cutoffs: [usize; MODES], total_cap: Option<usize>) -> Self {
        let mut labels = Vec::new();
        let mut n = [0usize; MODES];
        loop {
            if total_cap.is_none_or(|cap| n.iter().sum::<usize>() <= cap) {
                for s in Spin::BOTH {
                    labels.push((n, s));
                }
            }
            let mut m = MODES;
            loop {
                if m == 0 {
                    let index = labels.iter().enumerate().map(|(i, l)| (*l, i)).collect();
                    return RouterBasis {
                        labels,
                        index,
                        cutoffs,
                        total_cap,
                    };
                }
                m -= 1;
                n[m] += 1;
                if n[m] < cutoffs[m] {
                    break;
                }
                n[m] = 0;
            }
        }
    }

    pub fn dim(&self) -> usize {
        self.labels.len()
    }

    pub fn index_of(&self, n: [usize; MODES], s: Spin) -> Option<usize> {
        self.index.get(&(n, s)).copied()
    }

    fn on_edge(&self, n: &[usize; MODES]) -> bool {
        (0..MODES).any(|m| n[m] + 1 == self.cutoffs[m])
            || self.total_cap.is_some_and(|cap| n.iter().sum::<usize>() == cap)
    }

    /// `Σ_k c_k b_{to}† b_{from}` style triplets: `b_to† b_from` times a
    /// qubit matrix.
    fn hop(&self, to: usize, from: usize, q: [[Complex64; 2]; 2], t: &mut Vec<(usize, usize, Complex64)>) {
        for (col, (n, s)) in self.labels.iter().enumerate() {
            if n[from] == 0 {
                continue;
            }
            let mut n2 = *n;
            n2[from] -= 1;
            n2[to] += 1;
            let amp = ((n[from] * n2[to]) as f64).sqrt();
            for sp in Spin::BOTH {
                let v = q[sp.index()][s.index()];
                if v == c(0.0, 0.0) {
                    continue;
                }
                if let Some(r) = self.index_of(n2, sp) {
                    t.push((r, col, amp * v));
                }
            }
        }
    }

    /// `b_m†`.
    fn raise(&self, m: usize) -> Result<SparseOperator> {
        let mut t = Vec::new();
        for (col, (n, s)) in self.labels.iter().enumerate() {
            let mut n2 = *n;
            n2[m] += 1;
            if let Some(r) = self.index_of(n2, *s) {
                t.push((r, col, c((n2[m] as f64).sqrt(), 0.0)));
            }
        }
        SparseOperator::from_triplets(self.dim(), t)
    }
}

const ID2: [[Complex64; 2]; 2] = [[c1(), c0()], [c0(), c1()]];

const fn c0() -> Complex64 {
    Complex64::new(0.0, 0.0)
}

const fn c1() -> Complex64 {
    Complex64::new(1.0, 0.0)
}

/// Time-independent part and the `b₃†` operator.
pub struct RouterOperators {
    pub basis: RouterBasis,
    pub static_part: SparseOperator,
    pub raise3: SparseOperator,
    pub lower3: SparseOperator,
}

pub fn router_operators(cfg: &RouterConfig) -> Result<RouterOperators> {
    cfg.validate()?;
    let basis = RouterBasis::new(cfg.cutoffs, cfg.total_cap);
    let mut t = Vec::new();
    for j in 1..=3 {
        let gm = dot_sigma(coupling_vector(prev(j), cfg.g)?);
        let gd = [[gm[0][0].conj(), gm[1][0].conj()], [gm[0][1].conj(), gm[1][1].conj()]];
        basis.hop(j - 1, next(j) - 1, gm, &mut t);
        basis.hop(next(j) - 1, j - 1, gd, &mut t);
    }
    for (cav, det) in [(0, 3), (1, 4)] {
        let out: [[Complex64; 2]; 2] = ID2.map(|r| r.map(|x| x * cfg.r_out));
        let inn: [[Complex64; 2]; 2] = ID2.map(|r| r.map(|x| x * cfg.r_in));
        basis.hop(det, cav, out, &mut t);
        basis.hop(cav, det, inn, &mut t);
    }
    let static_part = SparseOperator::from_triplets(basis.dim(), t)?;
    let raise3 = basis.raise(2)?;
    let lower3 = raise3.adjoint();
    Ok(RouterOperators {
        basis,
        static_part,
        raise3,
        lower3,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RouterSample {
    pub t: f64,
    /// Normalized `⟨n̂_j⟩` of the three cavities.
    pub n: [f64; 3],
    /// Normalized detector populations.
    pub n_det: [f64; 2],
    pub imbalance: f64,
    /// `‖ψ‖`, not renormalized.
    pub norm: f64,
    /// Normalized population on the truncation edge.
    pub leakage: f64,
}

fn measure(basis: &RouterBasis, t: f64, psi: &[Complex64], floor_tol: f64) -> RouterSample {
    let mut pops = [0.0; MODES];
    let mut w = 0.0;
    let mut edge = 0.0;
    for ((n, _), a) in basis.labels.iter().zip(psi) {
        let p = a.norm_sqr();
        w += p;
        if basis.on_edge(n) {
            edge += p;
        }
        for m in 0..MODES {
            pops[m] += p * n[m] as f64;
        }
    }
    let inv = if w > 0.0 { 1.0 / w } else { 0.0 };
    let n_det = [pops[3] * inv, pops[4] * inv];
    let den = n_det[0] + n_det[1];
    RouterSample {
        t,
        n: [pops[0] * inv, pops[1] * inv, pops[2] * inv],
        n_det,
        imbalance: if den < floor_tol { 0.0 } else { (n_det[0] - n_det[1]) / den },
        norm: w.sqrt(),
        leakage: edge * inv,
    }
}

/// Vacuum in every mode with the qubit in `|+⟩`.
pub fn initial_state(basis: &RouterBasis) -> Vec<Complex64> {
    let mut psi = vec![c(0.0, 0.0); basis.dim()];
    let s = std::f64::consts::FRAC_1_SQRT_2;
    psi[basis.index_of([0; MODES], Spin::Up).unwrap()] = c(s, 0.0);
    psi[basis.index_of([0; MODES], Spin::Down).unwrap()] = c(s, 0.0);
    psi
}

/// Integrate from `cfg.t_start` starting in `psi0` and sample every `dt`.
pub fn evolve_router_from(cfg: &RouterConfig, ops: &RouterOperators, psi0: &[Complex64]) -> Result<Vec<RouterSample>> {
    let dim = ops.basis.dim();
    if psi0.len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: psi0.len(),
        });
    }
    let times = cfg.sample_times();
    let y0: Vec<f64> = psi0.iter().flat_map(|a| [a.re, a.im]).collect();
    let mut hpsi = vec![c(0.0, 0.0); dim];
    let mut x = vec![c(0.0, 0.0); dim];
    let mut out = Vec::with_capacity(times.len());
    let mut onset = false;
    let mut failure: Option<Error> = None;
    let opts = OdeOptions {
        h_init: cfg.sigma_pulse / 20.0,
        ..OdeOptions::relative(cfg.rtol)
    };
    let half = 0.5 * cfg.f0;
    let sig = cfg.sigma_pulse;
    integrate(
        |t, y, dy| {
            for (k, xk) in x.iter_mut().enumerate() {
                *xk = c(y[2 * k], y[2 * k + 1]);
            }
            let d = half * (sig / (PI * (t * t + sig * sig)));
            ops.static_part.matvec(&x, &mut hpsi);
            ops.raise3.matvec_add(d, &x, &mut hpsi);
            ops.lower3.matvec_add(d.conj(), &x, &mut hpsi);
            // ψ' = −iHψ
            for (k, h) in hpsi.iter().enumerate() {
                dy[2 * k] = h.im;
                dy[2 * k + 1] = -h.re;
            }
        },
        cfg.t_start,
        &y0,
        &times,
        &opts,
        |_, t, y| {
            if failure.is_some() {
                return;
            }
            let psi: Vec<Complex64> = (0..dim).map(|k| c(y[2 * k], y[2 * k + 1])).collect();
            let s = measure(&ops.basis, t, &psi, cfg.floor_tol);
            if s.leakage > cfg.leak_tol {
                failure = Some(Error::Leakage {
                    leak: s.leakage,
                    tol: cfg.leak_tol,
                    t,
                });
            } else if onset && s.n_det[0] + s.n_det[1] < cfg.floor_tol && cfg.r_out > 0.0 {
                failure = Some(Error::Numerical(format!("detector population fell below the floor at t = {t}")));
            }
            onset |= s.n_det[0] + s.n_det[1] >= cfg.floor_tol;
            out.push(s);
        },
    )?;
    match failure {
        Some(e) => Err(e),
        None => Ok(out),
    }
}

pub fn evolve_router(cfg: &RouterConfig) -> Result<Vec<RouterSample>> {
    let ops = router_operators(cfg)?;
    let psi0 = initial_state(&ops.basis);
    evolve_router_from(cfg, &ops, &psi0)
}

/// Mean imbalance over samples with `t ≥ t_from`.
pub fn late_imbalance(samples: &[RouterSample], t_from: f64) -> Option<f64> {
    let v: Vec<f64> = samples.iter().filter(|s| s.t >= t_from).map(|s| s.imbalance).collect();
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

/// Circulation period after the pulse from upward crossings of
/// `⟨n̂₁⟩ − N_core/3`, using samples with `t ≥ t_from`.
pub fn circulation_period(samples: &[RouterSample], t_from: f64) -> Result<f64> {
    let s: Vec<&RouterSample> = samples.iter().filter(|s| s.t >= t_from).collect();
    let times: Vec<f64> = s.iter().map(|s| s.t).collect();
    let vals: Vec<f64> = s.iter().map(|s| s.n[0] - (s.n[0] + s.n[1] + s.n[2]) / 3.0).collect();
    crate::dynamics::period_from_crossings(&times, &vals)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn envelope_shape() {
        let f0 = c(1.5, -0.5);
        let s = 0.3;
        let p = drive_envelope(0.0, f0, s, 2.0);
        assert!((p - f0 / (PI * s)).norm() < 1e-15);
        let h = drive_envelope(s, f0, s, 2.0);
        assert!((h.norm() - p.norm() / 2.0).abs() < 1e-15);
    }

    #[test]
    fn envelope_integral() {
        // ∫ F e^{−iωt} over ±20σ is F₀ (2/π) atan 20.
        let (f0, s, w) = (c(2.0, 1.0), 0.1, 1.0);
        let m = 400_000;
        let (a, b) = (-20.0 * s, 20.0 * s);
        let h = (b - a) / m as f64;
        let mut acc = c(0.0, 0.0);
        for k in 0..=m {
            let t = a + h * k as f64;
            let wgt = if k == 0 || k == m { 0.5 } else { 1.0 };
            acc += wgt * h * drive_envelope(t, f0, s, w) * Complex64::from_polar(1.0, -w * t);
        }
        let want = f0 * (2.0 / PI * 20f64.atan());
        assert!((acc - want).norm() < 1e-8);
        assert!((acc - f0).norm() / f0.norm() < 0.035);
    }

    #[test]
    fn basis_size() {
        assert_eq!(RouterBasis::new([7; MODES], None).dim(), 2 * 7usize.pow(5));
        assert_eq!(RouterBasis::new([3; MODES], Some(1)).dim(), 2 * 6);
    }

    fn small(g: f64) -> RouterConfig {
        RouterConfig {
            cutoffs: [5, 5, 5, 4, 4],
            f0: c(1.0, 0.0),
            t_final: 0.5 * crate::period(g),
            leak_tol: 1.0,
            ..RouterConfig::scaled(g)
        }
    }

    #[test]
    fn hermitian_limit_conserves_norm() {
        let cfg = RouterConfig {
            f0: c(0.0, 0.0),
            r_in: 0.7,
            r_out: 0.7,
            cutoffs: [4, 4, 4, 3, 3],
            t_start: 0.0,
            t_final: 3.0,
            leak_tol: 1.0,
            ..RouterConfig::scaled(1.0)
        };
        let ops = router_operators(&cfg).unwrap();
        assert!(ops.static_part.hermiticity_error() < 1e-14);
        // Put a photon in cavity 1 so the detector coupling acts.
        let mut psi = vec![c(0.0, 0.0); ops.basis.dim()];
        psi[ops.basis.index_of([1, 0, 0, 0, 0], Spin::Up).unwrap()] = c(0.6, 0.0);
        psi[ops.basis.index_of([0, 0, 2, 0, 0], Spin::Down).unwrap()] = c(0.0, 0.8);
        let s = evolve_router_from(&cfg, &ops, &psi).unwrap();
        assert!(s.iter().all(|x| (x.norm - 1.0).abs() < 1e-8));
        assert!(s.last().unwrap().n_det[0] > 1e-3);
    }

    #[test]
    fn pulse_deposits_quarter_f0_squared() {
        let cfg = RouterConfig {
            r_in: 0.0,
            r_out: 0.0,
            f0: c(1.0, 0.0),
            cutoffs: [2, 2, 7, 2, 2],
            total_cap: None,
            t_final: 40.0 * 0.1,
            g: 1e-9,
            ..RouterConfig::scaled(1.0)
        };
        let s = evolve_router(&cfg).unwrap();
        let last = s.last().unwrap();
        // Residual tail of the Lorentzian beyond 40σ: (1 − (2/π)atan 40)... on
        // each side the pulse amplitude is short by atan-tails.
        let frac = (40f64.atan() + 40f64.atan()) / PI;
        let want = 0.25 * frac * frac;
        assert!((last.n[2] - want).abs() < 1e-6, "{} vs {want}", last.n[2]);
        assert!((last.norm - 1.0).abs() < 1e-7);
    }

    #[test]
    fn imbalance_invariant_under_rescaling() {
        let cfg = small(1.0);
        let ops = router_operators(&cfg).unwrap();
        let psi = initial_state(&ops.basis);
        let psi2: Vec<Complex64> = psi.iter().map(|a| a * 2.0).collect();
        let (a, b) = (
            evolve_router_from(&cfg, &ops, &psi).unwrap(),
            evolve_router_from(&cfg, &ops, &psi2).unwrap(),
        );
        for (x, y) in a.iter().zip(&b) {
            assert!((x.imbalance - y.imbalance).abs() < 1e-10);
            assert!((y.norm - 2.0 * x.norm).abs() < 1e-8 * y.norm);
        }
    }

    #[test]
    fn sign_of_g_sets_the_detector() {
        let late = |g: f64| {
            let s = evolve_router(&small(g)).unwrap();
            late_imbalance(&s, 0.3 * crate::period(g)).unwrap()
        };
        let (p, m) = (late(1.0), late(-1.0));
        assert!(p > 0.0 && m < 0.0, "{p} {m}");
        assert!((p + m).abs() < 1e-6);
    }

    #[test]
    fn imbalance_zero_before_onset() {
        let s = evolve_router(&small(1.0)).unwrap();
        assert_eq!(s[0].imbalance, 0.0);
        assert_eq!(s[0].n_det, [0.0, 0.0]);
    }
}
