//! Floquet generation of the three-body coupling from a driven two-body
//! Hamiltonian.
//!
//! Lab frame: `H(t) = Δ₀σ_z + ω₀N̂ + Σ_j [(A_j cos ω_d t + B_j sin ω_d t)·σ b_j† + h.c.]`.
//! With `r_{j±} = (A_j ± iB_j)/2` the coupling is
//! `r_{j+} e^{−iω_d t} + r_{j−} e^{iω_d t}`, so that
//! `H(t) = H₀ + H₊ e^{−iω_d t} + H₋ e^{iω_d t}` with
//! `H₊ = Σ_j [b_j†(r_{j+}·σ) + b_j(r_{j−}*·σ)]` and `H₋ = H₊†`.

use crate::basis::{FockLabel, SectorBasis, Spin};
use crate::dynamics::{circulate_fock, Method};
use crate::linalg::norm;
use crate::operators::{coupling_vector, dot_sigma, rotate_z, Mat2, ModelParams};
use crate::sparse::SparseOperator;
use crate::{c, Error, Result, I};
use num_complex::Complex64;
use std::collections::HashMap;
use std::f64::consts::PI;

pub type CVec3 = [Complex64; 3];

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const C3_TOL: f64 = 1e-10;

fn cross(a: &CVec3, b: &CVec3) -> CVec3 {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

fn conj3(a: &CVec3) -> CVec3 {
    [a[0].conj(), a[1].conj(), a[2].conj()]
}

fn max_diff3(a: &CVec3, b: &CVec3) -> f64 {
    (0..3).map(|k| (a[k] - b[k]).norm()).fold(0.0, f64::max)
}

#[derive(Clone, Debug, PartialEq)]
pub struct DriveSpec {
    pub a: [CVec3; 3],
    pub b: [CVec3; 3],
    pub omega_d: f64,
    pub omega_0: f64,
    pub delta_0: f64,
}

impl DriveSpec {
    /// Drive with `A₃`, `B₃` given and the other cavities generated by
    /// `A_{j+1} = R_z(2π/3) A_j`.
    pub fn from_cavity3(a3: CVec3, b3: CVec3, omega_d: f64, omega_0: f64, delta_0: f64) -> Self {
        let th = 2.0 * PI / 3.0;
        DriveSpec {
            a: [rotate_z(a3, th), rotate_z(a3, 2.0 * th), a3],
            b: [rotate_z(b3, th), rotate_z(b3, 2.0 * th), b3],
            omega_d,
            omega_0,
            delta_0,
        }
    }

    pub fn zero(omega_d: f64, omega_0: f64, delta_0: f64) -> Self {
        Self::from_cavity3([ZERO; 3], [ZERO; 3], omega_d, omega_0, delta_0)
    }

    /// Largest `|R_z(2π/3) X_j − X_{j+1}|` over `X = A, B`.
    pub fn c3_residual(&self) -> f64 {
        let th = 2.0 * PI / 3.0;
        (0..3)
            .flat_map(|j| {
                let k = (j + 1) % 3;
                [
                    max_diff3(&rotate_z(self.a[j], th), &self.a[k]),
                    max_diff3(&rotate_z(self.b[j], th), &self.b[k]),
                ]
            })
            .fold(0.0, f64::max)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.omega_d.is_finite() && self.omega_d != 0.0) {
            return Err(Error::InvalidArgument("drive frequency must be finite and nonzero".into()));
        }
        let r = self.c3_residual();
        if r > C3_TOL {
            return Err(Error::InvalidArgument(format!("drive breaks C3 covariance by {r:e}")));
        }
        Ok(())
    }

    /// `(r_{j+}, r_{j−}) = ((A_j + iB_j)/2, (A_j − iB_j)/2)`.
    pub fn harmonics(&self) -> ([CVec3; 3], [CVec3; 3]) {
        let mut rp = [[ZERO; 3]; 3];
        let mut rm = [[ZERO; 3]; 3];
        for j in 0..3 {
            for k in 0..3 {
                rp[j][k] = 0.5 * (self.a[j][k] + I * self.b[j][k]);
                rm[j][k] = 0.5 * (self.a[j][k] - I * self.b[j][k]);
            }
        }
        (rp, rm)
    }

    /// `A_j cos ω_d t + B_j sin ω_d t`.
    pub fn coupling_at(&self, j: usize, t: f64) -> CVec3 {
        let (s, co) = (self.omega_d * t).sin_cos();
        [0, 1, 2].map(|k| self.a[j - 1][k] * co + self.b[j - 1][k] * s)
    }

    pub fn period(&self) -> f64 {
        2.0 * PI / self.omega_d.abs()
    }
}

/// The explicit solution with `A₃ = sign(gω_d)√(|gω_d|/6)(√3, √3, −i)`,
/// `B₃ = √(|gω_d|/6)(√3, −√3, i)` and `Δ₀ = −g(2N+3)`, which makes the
/// effective Hamiltonian on sector `n_target` have `Δ = 0`.
pub fn default_drive_solution(g: f64, omega_d: f64, omega_0: f64, n_target: usize) -> Result<DriveSpec> {
    if g * omega_d == 0.0 || !(g * omega_d).is_finite() {
        return Err(Error::InvalidArgument("need g·ω_d finite and nonzero".into()));
    }
    let s = (g * omega_d).abs().sqrt() / 6f64.sqrt();
    let sg = (g * omega_d).signum();
    let r3 = 3f64.sqrt();
    let a3 = [c(sg * s * r3, 0.0), c(sg * s * r3, 0.0), c(0.0, -sg * s)];
    let b3 = [c(s * r3, 0.0), c(-s * r3, 0.0), c(0.0, s)];
    Ok(DriveSpec::from_cavity3(
        a3,
        b3,
        omega_d,
        omega_0,
        -g * (2.0 * n_target as f64 + 3.0),
    ))
}

/// First-order Magnus couplings of the number-conserving effective
/// Hamiltonian `Σ_ij α_ij·σ b_i†b_j + h·σ`.
#[derive(Clone, Debug, PartialEq)]
pub struct MagnusCoupling {
    /// `alpha[i][j]` couples `b_{i+1}† b_{j+1}`.
    pub alpha: [[CVec3; 3]; 3],
    pub h: CVec3,
}

/// `α_ij = (2i/ω_d)[r_{i−}×r_{j−}* − r_{i+}×r_{j+}*]`, `h = ½Σ_j α_jj`.
pub fn magnus_first_order(drive: &DriveSpec) -> Result<MagnusCoupling> {
    if !(drive.omega_d.is_finite() && drive.omega_d != 0.0) {
        return Err(Error::InvalidArgument("drive frequency must be finite and nonzero".into()));
    }
    let (rp, rm) = drive.harmonics();
    let pre = 2.0 * I / drive.omega_d;
    let mut alpha = [[[ZERO; 3]; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            let m = cross(&rm[i], &conj3(&rm[j]));
            let p = cross(&rp[i], &conj3(&rp[j]));
            alpha[i][j] = [0, 1, 2].map(|k| pre * (m[k] - p[k]));
        }
    }
    let h = [0, 1, 2].map(|k| 0.5 * (alpha[0][0][k] + alpha[1][1][k] + alpha[2][2][k]));
    Ok(MagnusCoupling { alpha, h })
}

/// Largest deviation of `α_ij·σ` from the target couplings:
/// `α_{j,j+1} = g_{j−1}`, `α_{j+1,j} = g_{j−1}*` and `α_jj = 2g ẑ`.
pub fn alpha_match_residual(m: &MagnusCoupling, g: f64) -> f64 {
    let mut worst = 0.0f64;
    for i in 1..=3 {
        for j in 1..=3 {
            let want: CVec3 = if j == i % 3 + 1 {
                coupling_vector((i + 1) % 3 + 1, g).unwrap()
            } else if i == j % 3 + 1 {
                conj3(&coupling_vector((j + 1) % 3 + 1, g).unwrap())
            } else {
                [ZERO, ZERO, c(2.0 * g, 0.0)]
            };
            worst = worst.max(max_diff3(&m.alpha[i - 1][j - 1], &want));
        }
    }
    worst
}

/// Rotating-frame effective Hamiltonian on a number sector,
/// `Δ₀σ_z + Σ_ij α_ij·σ b_i†b_j + h·σ` (the `ω₀N` and scalar shifts dropped).
pub fn effective_hamiltonian(drive: &DriveSpec, basis: &SectorBasis) -> Result<SparseOperator> {
    let m = magnus_first_order(drive)?;
    let hm = dot_sigma(m.h);
    let mut t = Vec::new();
    for (col, l) in basis.labels().iter().enumerate() {
        let s = l.spin.index();
        for sp in Spin::BOTH {
            let r = basis.index_of(&FockLabel::new(l.n, sp)).unwrap();
            let mut v = hm[sp.index()][s];
            if sp == l.spin {
                v += drive.delta_0 * l.spin.sign() as f64;
            }
            t.push((r, col, v));
        }
        for i in 0..3 {
            for j in 0..3 {
                let mat = dot_sigma(m.alpha[i][j]);
                let (n2, amp) = if i == j {
                    (l.n, l.n[i] as f64)
                } else {
                    if l.n[j] == 0 {
                        continue;
                    }
                    let mut n2 = l.n;
                    n2[j] -= 1;
                    n2[i] += 1;
                    (n2, ((l.n[j] * (l.n[i] + 1)) as f64).sqrt())
                };
                for sp in Spin::BOTH {
                    let r = basis.index_of(&FockLabel::new(n2, sp)).unwrap();
                    t.push((r, col, amp * mat[sp.index()][s]));
                }
            }
        }
    }
    SparseOperator::hermitian_from_triplets(basis.dim(), t)
}

/// Largest entrywise `|H_eff − H_target|` with `H_target` the static
/// rotating-frame Hamiltonian at `Δ = Δ₀ + g(2N + 3)`.
pub fn target_match_residual(drive: &DriveSpec, basis: &SectorBasis, g: f64) -> Result<f64> {
    let n = basis.n_total();
    let heff = effective_hamiltonian(drive, basis)?;
    let delta = drive.delta_0 + g * (2.0 * n as f64 + 3.0);
    let target = crate::operators::hamiltonian(basis, &ModelParams::new(n, g, delta))?;
    Ok(heff.max_abs_diff(&target))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ValidityReport {
    /// `‖H₍₁₎‖ ~ 3gN`.
    pub first_order: f64,
    /// `‖H₍₂₎‖ ~ 20g²N²/(3ω_d)`.
    pub second_order: f64,
    /// `‖H₍₂₎‖/‖H₍₁₎‖ = 20gN/(9ω_d)`; should be ≪ 1.
    pub magnus_ratio: f64,
    /// `ω₀/g`; should be ≫ 1 for the rotating-wave step.
    pub rwa_ratio: f64,
}

pub fn validity_report(g: f64, n: usize, omega_0: f64, omega_d: f64) -> Result<ValidityReport> {
    if !(g.abs() > 0.0 && omega_0 > 0.0 && omega_d > 0.0) {
        return Err(Error::InvalidArgument("need g ≠ 0 and positive frequencies".into()));
    }
    let (g, nf) = (g.abs(), n as f64);
    let first_order = 3.0 * g * nf;
    let second_order = 20.0 * g * g * nf * nf / (3.0 * omega_d);
    Ok(ValidityReport {
        first_order,
        second_order,
        magnus_ratio: second_order / first_order,
        rwa_ratio: omega_0 / g,
    })
}

/// Product basis `|n₁,n₂,n₃⟩⊗qubit` with `n_j ≤ n_max` and, optionally,
/// `Σn_j ≤ total_cap`. The lab Hamiltonian changes the photon number by
/// one per coupling, so a total cap a few above the initial sector keeps
/// the basis small.
#[derive(Clone, Debug)]
pub struct TruncatedProductBasis {
    n_max: usize,
    total_cap: Option<usize>,
    labels: Vec<FockLabel>,
    index: HashMap<FockLabel, usize>,
}

impl TruncatedProductBasis {
    pub fn new(n_max: usize) -> Self {
        Self::build(n_max, None)
    }

    pub fn with_total_cap(n_max: usize, total_cap: usize) -> Self {
        Self::build(n_max, Some(total_cap))
    }

    fn build(n_max: usize, total_cap: Option<usize>) -> Self {
        let mut labels = Vec::new();
        for n1 in 0..=n_max {
            for n2 in 0..=n_max {
                for n3 in 0..=n_max {
                    if total_cap.is_some_and(|cap| n1 + n2 + n3 > cap) {
                        continue;
                    }
                    for s in Spin::BOTH {
                        labels.push(FockLabel::new([n1, n2, n3], s));
                    }
                }
            }
        }
        let index = labels.iter().enumerate().map(|(i, l)| (*l, i)).collect();
        TruncatedProductBasis {
            n_max,
            total_cap,
            labels,
            index,
        }
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn total_cap(&self) -> Option<usize> {
        self.total_cap
    }

    pub fn dim(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[FockLabel] {
        &self.labels
    }

    pub fn index_of(&self, l: &FockLabel) -> Option<usize> {
        self.index.get(l).copied()
    }

    fn on_edge(&self, l: &FockLabel) -> bool {
        l.n.iter().any(|&x| x == self.n_max) || self.total_cap.is_some_and(|cap| l.total() == cap)
    }

    /// Population on the truncation edge.
    pub fn leakage(&self, psi: &[Complex64]) -> f64 {
        self.labels
            .iter()
            .zip(psi)
            .filter(|(l, _)| self.on_edge(l))
            .map(|(_, a)| a.norm_sqr())
            .sum()
    }

    /// Copy a sector state into the product basis.
    pub fn embed(&self, sector: &SectorBasis, psi: &[Complex64]) -> Result<Vec<Complex64>> {
        let mut out = vec![ZERO; self.dim()];
        for (l, a) in sector.labels().iter().zip(psi) {
            let i = self.index_of(l).ok_or_else(|| {
                Error::InvalidArgument(format!("{:?} outside the truncated basis", l.n))
            })?;
            out[i] = *a;
        }
        Ok(out)
    }

    /// `⟨n̂_j⟩` for j = 1, 2, 3.
    pub fn occupations(&self, psi: &[Complex64]) -> [f64; 3] {
        let mut n = [0.0; 3];
        for (l, a) in self.labels.iter().zip(psi) {
            let p = a.norm_sqr();
            for j in 0..3 {
                n[j] += p * l.n[j] as f64;
            }
        }
        n
    }

    /// `Σ_j b_j†(v_j·σ)`.
    pub fn raising(&self, v: &[CVec3; 3]) -> Result<SparseOperator> {
        let mats: [Mat2; 3] = [dot_sigma(v[0]), dot_sigma(v[1]), dot_sigma(v[2])];
        let mut t = Vec::new();
        for (col, l) in self.labels.iter().enumerate() {
            for j in 0..3 {
                let mut n2 = l.n;
                n2[j] += 1;
                let amp = (n2[j] as f64).sqrt();
                for sp in Spin::BOTH {
                    if let Some(r) = self.index_of(&FockLabel::new(n2, sp)) {
                        t.push((r, col, amp * mats[j][sp.index()][l.spin.index()]));
                    }
                }
            }
        }
        SparseOperator::from_triplets(self.dim(), t)
    }

    /// `ω₀N̂ + Δ₀σ_z` as a diagonal.
    pub fn bare_diagonal(&self, omega_0: f64, delta_0: f64) -> Vec<f64> {
        self.labels
            .iter()
            .map(|l| omega_0 * l.total() as f64 + delta_0 * l.spin.sign() as f64)
            .collect()
    }
}

#[derive(Clone, Debug)]
pub struct FourierComponents {
    pub h_plus: SparseOperator,
    pub h_minus: SparseOperator,
    pub h_avg: SparseOperator,
}

impl FourierComponents {
    /// `H₀ + H₊e^{−iω_d t} + H₋e^{iω_d t}`.
    pub fn reconstruct(&self, omega_d: f64, t: f64) -> Result<SparseOperator> {
        let e = Complex64::from_polar(1.0, -omega_d * t);
        self.h_avg.add_scaled(e, &self.h_plus)?.add_scaled(e.conj(), &self.h_minus)
    }
}

pub fn fourier_components(drive: &DriveSpec, basis: &TruncatedProductBasis) -> Result<FourierComponents> {
    drive.validate()?;
    let (rp, rm) = drive.harmonics();
    let h_plus = basis.raising(&rp)?.add_scaled(c(1.0, 0.0), &basis.raising(&rm)?.adjoint())?;
    let h_minus = h_plus.adjoint();
    let h_avg = SparseOperator::real_diagonal(&basis.bare_diagonal(drive.omega_0, drive.delta_0));
    Ok(FourierComponents {
        h_plus,
        h_minus,
        h_avg,
    })
}

/// `H(t)` assembled directly from `A_j`, `B_j`.
pub fn lab_hamiltonian(drive: &DriveSpec, basis: &TruncatedProductBasis, t: f64) -> Result<SparseOperator> {
    let v = [1, 2, 3].map(|j| drive.coupling_at(j, t));
    let r = basis.raising(&v)?;
    let d = SparseOperator::real_diagonal(&basis.bare_diagonal(drive.omega_0, drive.delta_0));
    d.add_scaled(c(1.0, 0.0), &r)?.add_scaled(c(1.0, 0.0), &r.adjoint())
}

/// `H(t) = D + cos(ω_d t) H_A + sin(ω_d t) H_B` stored on one sparsity
/// pattern so that any real combination costs a single pass.
struct LabOperator {
    diag: Vec<f64>,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    va: Vec<Complex64>,
    vb: Vec<Complex64>,
    diag_max: f64,
    a_rows: f64,
    b_rows: f64,
}

impl LabOperator {
    fn new(drive: &DriveSpec, basis: &TruncatedProductBasis) -> Result<Self> {
        let hermitize = |v: &[CVec3; 3]| -> Result<SparseOperator> {
            let r = basis.raising(v)?;
            r.add_scaled(c(1.0, 0.0), &r.adjoint())
        };
        let ha = hermitize(&drive.a)?;
        let hb = hermitize(&drive.b)?;
        let mut entries: Vec<(usize, usize, Complex64, Complex64)> = ha.triplets().map(|(r, c0, v)| (r, c0, v, ZERO)).collect();
        entries.extend(hb.triplets().map(|(r, c0, v)| (r, c0, ZERO, v)));
        entries.sort_unstable_by_key(|e| (e.0, e.1));
        let dim = basis.dim();
        let mut indptr = vec![0usize; dim + 1];
        let (mut indices, mut va, mut vb) = (Vec::new(), Vec::new(), Vec::new());
        let mut last = None;
        for (r, col, a, b) in entries {
            if last == Some((r, col)) {
                *va.last_mut().unwrap() += a;
                *vb.last_mut().unwrap() += b;
            } else {
                indices.push(col);
                va.push(a);
                vb.push(b);
                indptr[r + 1] += 1;
                last = Some((r, col));
            }
        }
        for r in 0..dim {
            indptr[r + 1] += indptr[r];
        }
        let row_sum = |v: &[Complex64]| {
            (0..dim)
                .map(|r| v[indptr[r]..indptr[r + 1]].iter().map(|x| x.norm()).sum::<f64>())
                .fold(0.0, f64::max)
        };
        let diag = basis.bare_diagonal(drive.omega_0, drive.delta_0);
        Ok(LabOperator {
            diag_max: diag.iter().fold(0.0f64, |m, x| m.max(x.abs())),
            a_rows: row_sum(&va),
            b_rows: row_sum(&vb),
            diag,
            indptr,
            indices,
            va,
            vb,
        })
    }

    /// `y = −iτ(s_d D + s_a H_A + s_b H_B) x`.
    fn apply(&self, coef: [f64; 3], tau: f64, x: &[Complex64], y: &mut [Complex64]) {
        let [sd, sa, sb] = coef;
        for (r, yr) in y.iter_mut().enumerate() {
            let mut acc = x[r] * (sd * self.diag[r]);
            for k in self.indptr[r]..self.indptr[r + 1] {
                acc += (self.va[k] * sa + self.vb[k] * sb) * x[self.indices[k]];
            }
            *yr = c(acc.im * tau, -acc.re * tau);
        }
    }

    fn bound(&self, coef: [f64; 3]) -> f64 {
        coef[0].abs() * self.diag_max + coef[1].abs() * self.a_rows + coef[2].abs() * self.b_rows
    }
}

/// `ψ ← exp(−iτM)ψ` by Taylor series, substepping so that each piece has
/// `τ‖M‖ ≤ 1`.
fn taylor_exp(op: &LabOperator, coef: [f64; 3], tau: f64, psi: &mut [Complex64], term: &mut Vec<Complex64>, next: &mut Vec<Complex64>) {
    let pieces = (op.bound(coef) * tau.abs()).ceil().max(1.0) as usize;
    let dt = tau / pieces as f64;
    for _ in 0..pieces {
        term.copy_from_slice(psi);
        for k in 1..=40 {
            op.apply(coef, dt / k as f64, term, next);
            std::mem::swap(term, next);
            let mut small = 0.0f64;
            for (p, t) in psi.iter_mut().zip(term.iter()) {
                *p += *t;
                small = small.max(t.norm_sqr());
            }
            if small < 1e-34 {
                break;
            }
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct StroboscopicOptions {
    pub steps_per_period: usize,
    pub leak_tol: f64,
    /// Record every `stride`-th drive period.
    pub stride: usize,
}

impl Default for StroboscopicOptions {
    fn default() -> Self {
        StroboscopicOptions {
            steps_per_period: 64,
            leak_tol: 1e-6,
            stride: 1,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StroboscopicSample {
    pub q: usize,
    pub t: f64,
    pub n: [f64; 3],
    pub total: f64,
    pub leakage: f64,
    pub norm: f64,
}

/// Propagate the lab-frame state over `q_max` drive periods with the
/// fourth-order commutator-free Magnus scheme and record `t = qT_d`.
pub fn stroboscopic_evolve(
    drive: &DriveSpec,
    basis: &TruncatedProductBasis,
    psi0: &[Complex64],
    q_max: usize,
    opts: &StroboscopicOptions,
) -> Result<Vec<StroboscopicSample>> {
    drive.validate()?;
    if psi0.len() != basis.dim() {
        return Err(Error::DimensionMismatch {
            expected: basis.dim(),
            got: psi0.len(),
        });
    }
    if opts.steps_per_period < 64 || opts.stride == 0 {
        return Err(Error::InvalidArgument("need ≥ 64 steps per drive period and stride ≥ 1".into()));
    }
    let op = LabOperator::new(drive, basis)?;
    let td = drive.period();
    let h = td / opts.steps_per_period as f64;
    let r3 = 3f64.sqrt();
    let (c1, c2) = (0.5 - r3 / 6.0, 0.5 + r3 / 6.0);
    let (a1, a2) = (0.25 - r3 / 6.0, 0.25 + r3 / 6.0);
    let w = drive.omega_d;
    let mut psi = psi0.to_vec();
    let (mut term, mut next) = (vec![ZERO; psi.len()], vec![ZERO; psi.len()]);
    let sample = |q: usize, psi: &[Complex64]| {
        let n = basis.occupations(psi);
        StroboscopicSample {
            q,
            t: q as f64 * td,
            n,
            total: n.iter().sum(),
            leakage: basis.leakage(psi),
            norm: norm(psi),
        }
    };
    let mut out = vec![sample(0, &psi)];
    for q in 1..=q_max {
        for s in 0..opts.steps_per_period {
            let t0 = (q - 1) as f64 * td + s as f64 * h;
            let (t1, t2) = (t0 + c1 * h, t0 + c2 * h);
            let (s1, k1) = (w * t1).sin_cos();
            let (s2, k2) = (w * t2).sin_cos();
            let first = [a2 + a1, a2 * k1 + a1 * k2, a2 * s1 + a1 * s2];
            let second = [a1 + a2, a1 * k1 + a2 * k2, a1 * s1 + a2 * s2];
            taylor_exp(&op, first, h, &mut psi, &mut term, &mut next);
            taylor_exp(&op, second, h, &mut psi, &mut term, &mut next);
        }
        let leak = basis.leakage(&psi);
        if leak > opts.leak_tol {
            return Err(Error::Leakage {
                leak,
                tol: opts.leak_tol,
                t: q as f64 * td,
            });
        }
        if q % opts.stride == 0 || q == q_max {
            out.push(sample(q, &psi));
        }
    }
    Ok(out)
}

#[derive(Clone, Debug)]
pub struct StroboscopicComparison {
    pub samples: Vec<StroboscopicSample>,
    /// `⟨n̂_j⟩` under the static Hamiltonian at the sample times.
    pub static_n: Vec<[f64; 3]>,
    /// Per-sample `max_j |⟨n̂_j⟩ − ⟨n̂_j⟩_static|`.
    pub deviation: Vec<f64>,
}

impl StroboscopicComparison {
    pub fn max_deviation(&self) -> f64 {
        self.deviation.iter().cloned().fold(0.0, f64::max)
    }

    /// Largest `|⟨N̂⟩(t) − ⟨N̂⟩(0)|`.
    pub fn max_total_drift(&self) -> f64 {
        let n0 = self.samples[0].total;
        self.samples.iter().map(|s| (s.total - n0).abs()).fold(0.0, f64::max)
    }
}

/// Lab-frame drive run from `|0,0,N⟩⊗qubit` (photons in `source`) against
/// the static rotating-frame evolution at `Δ = 0`.
pub fn compare_with_static(
    drive: &DriveSpec,
    basis: &TruncatedProductBasis,
    g: f64,
    n: usize,
    qubit: [Complex64; 2],
    source: usize,
    q_max: usize,
    opts: &StroboscopicOptions,
) -> Result<StroboscopicComparison> {
    let sector = crate::basis::enumerate_sector(n);
    let psi_sector = crate::dynamics::fock_start(&sector, qubit, source)?;
    let psi0 = basis.embed(&sector, &psi_sector)?;
    let samples = stroboscopic_evolve(drive, basis, &psi0, q_max, opts)?;
    let times: Vec<f64> = samples.iter().map(|s| s.t).collect();
    let params = ModelParams::new(n, g, drive.delta_0 + g * (2.0 * n as f64 + 3.0));
    let series = circulate_fock(&params, &times, qubit, source, Method::Auto)?;
    let static_n: Vec<[f64; 3]> = (0..times.len())
        .map(|k| [series.n_exp[0][k], series.n_exp[1][k], series.n_exp[2][k]])
        .collect();
    let deviation = samples
        .iter()
        .zip(&static_n)
        .map(|(s, st)| (0..3).map(|j| (s.n[j] - st[j]).abs()).fold(0.0, f64::max))
        .collect();
    Ok(StroboscopicComparison {
        samples,
        static_n,
        deviation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::enumerate_sector;
    use crate::dynamics::plus_state;
    use rand::{RngExt, SeedableRng};

    #[test]
    fn default_solution_matches_target_couplings() {
        for g in [1.0, -0.7, 2.5] {
            for wd in [50.0, 5e3, -300.0] {
                let d = default_drive_solution(g, wd, 10.0, 4).unwrap();
                assert!(d.c3_residual() < 1e-12);
                let m = magnus_first_order(&d).unwrap();
                let scale = g.abs();
                assert!(alpha_match_residual(&m, g) < 1e-12 * scale.max(1.0) * 10.0, "g={g} wd={wd}");
                for k in 0..3 {
                    let want = if k == 2 { 3.0 * g } else { 0.0 };
                    assert!((m.h[k] - c(want, 0.0)).norm() < 1e-12 * 10.0);
                }
            }
        }
    }

    #[test]
    fn alpha_identities_hold_for_any_covariant_drive() {
        let mut rng = rand_pcg::Pcg64::seed_from_u64(3);
        let mut r = || c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let d = DriveSpec::from_cavity3([r(), r(), r()], [r(), r(), r()], 7.0, 1.0, 0.0);
        let m = magnus_first_order(&d).unwrap();
        let th = 2.0 * PI / 3.0;
        for i in 0..3 {
            for j in 0..3 {
                let rot = rotate_z(m.alpha[i][j], th);
                assert!(max_diff3(&rot, &m.alpha[(i + 1) % 3][(j + 1) % 3]) < 1e-13);
                assert!(max_diff3(&conj3(&m.alpha[i][j]), &m.alpha[j][i]) < 1e-13);
            }
            // α_jj = −2 Re α_{j+1,j−1}
            let off = m.alpha[(i + 1) % 3][(i + 2) % 3];
            let want = [0, 1, 2].map(|k| c(-2.0 * off[k].re, 0.0));
            assert!(max_diff3(&m.alpha[i][i], &want) < 1e-13);
        }
    }

    #[test]
    fn alpha_scales_inversely_with_drive_frequency() {
        let d = default_drive_solution(1.0, 100.0, 10.0, 3).unwrap();
        let mut d2 = d.clone();
        d2.omega_d = 200.0;
        let (m1, m2) = (magnus_first_order(&d).unwrap(), magnus_first_order(&d2).unwrap());
        for i in 0..3 {
            for j in 0..3 {
                let half = m1.alpha[i][j].map(|x| 0.5 * x);
                assert!(max_diff3(&half, &m2.alpha[i][j]) < 1e-15);
            }
        }
    }

    #[test]
    fn effective_hamiltonian_equals_target() {
        for n in [0, 1, 4, 10] {
            let basis = enumerate_sector(n);
            for g in [1.0, -1.0, 0.4] {
                let d = default_drive_solution(g, 5e3, 10.0, n).unwrap();
                assert!(target_match_residual(&d, &basis, g).unwrap() <= 1e-10 * g.abs());
            }
        }
    }

    #[test]
    fn sign_of_g_flips_only_a3() {
        let (p, m) = (
            default_drive_solution(1.0, 500.0, 10.0, 5).unwrap(),
            default_drive_solution(-1.0, 500.0, 10.0, 5).unwrap(),
        );
        for k in 0..3 {
            assert_eq!(p.a[2][k], -m.a[2][k]);
            assert_eq!(p.b[2][k], m.b[2][k]);
        }
        let basis = enumerate_sector(5);
        assert!(target_match_residual(&m, &basis, -1.0).unwrap() < 1e-10);
        // The +g drive does not realize −g.
        let mut wrong = p.clone();
        wrong.delta_0 = m.delta_0;
        assert!(target_match_residual(&wrong, &basis, -1.0).unwrap() > 0.1);
    }

    #[test]
    fn validity_scales() {
        let r = validity_report(1.0, 6, 10.0, 5e3).unwrap();
        assert!((r.magnus_ratio - 20.0 * 6.0 / (9.0 * 5e3)).abs() < 1e-15);
        assert_eq!(r.rwa_ratio, 10.0);
        // ratio < 0.1 exactly when ω_d > (200/9) gN
        let edge = 200.0 / 9.0 * 30.0;
        assert!(validity_report(1.0, 30, 10.0, edge * 1.001).unwrap().magnus_ratio < 0.1);
        assert!(validity_report(1.0, 30, 10.0, edge * 0.999).unwrap().magnus_ratio > 0.1);
        let a = validity_report(1.0, 20, 10.0, 1e3).unwrap().magnus_ratio;
        let b = validity_report(1.0, 40, 10.0, 2e3).unwrap().magnus_ratio;
        assert!((a - b).abs() < 1e-15);
        assert!(validity_report(1.0, 225, 10.0, 5e3).unwrap().magnus_ratio <= 0.1 + 1e-15);
        assert!(validity_report(1.0, 6, -1.0, 5e3).is_err());
    }

    #[test]
    fn components_reconstruct_lab_hamiltonian() {
        let basis = TruncatedProductBasis::new(3);
        let d = default_drive_solution(1.0, 40.0, 10.0, 2).unwrap();
        let f = fourier_components(&d, &basis).unwrap();
        assert!(f.h_minus.max_abs_diff(&f.h_plus.adjoint()) == 0.0);
        let mut rng = rand_pcg::Pcg64::seed_from_u64(11);
        for _ in 0..20 {
            let t = rng.random_range(-3.0..3.0);
            let lab = lab_hamiltonian(&d, &basis, t).unwrap();
            assert!(f.reconstruct(d.omega_d, t).unwrap().max_abs_diff(&lab) < 1e-12);
        }
        let z = fourier_components(&DriveSpec::zero(40.0, 10.0, 0.0), &basis).unwrap();
        assert_eq!(z.h_plus.max_abs(), 0.0);
        assert_eq!(z.h_minus.max_abs(), 0.0);
    }

    #[test]
    fn components_match_quadrature() {
        let basis = TruncatedProductBasis::new(2);
        let d = default_drive_solution(1.0, 40.0, 10.0, 2).unwrap();
        let f = fourier_components(&d, &basis).unwrap();
        let m = 10_000;
        let td = d.period();
        let mut acc_p = SparseOperator::zeros(basis.dim());
        let mut acc_m = SparseOperator::zeros(basis.dim());
        let mut acc_0 = SparseOperator::zeros(basis.dim());
        for k in 0..m {
            let t = td * k as f64 / m as f64;
            let lab = lab_hamiltonian(&d, &basis, t).unwrap();
            let e = Complex64::from_polar(1.0 / m as f64, d.omega_d * t);
            acc_p = acc_p.add_scaled(e, &lab).unwrap();
            acc_m = acc_m.add_scaled(e.conj(), &lab).unwrap();
            acc_0 = acc_0.add_scaled(c(1.0 / m as f64, 0.0), &lab).unwrap();
        }
        assert!(acc_p.max_abs_diff(&f.h_plus) < 1e-8);
        assert!(acc_m.max_abs_diff(&f.h_minus) < 1e-8);
        assert!(acc_0.max_abs_diff(&f.h_avg) < 1e-8);
    }

    #[test]
    fn rejects_broken_covariance() {
        let mut d = default_drive_solution(1.0, 40.0, 10.0, 2).unwrap();
        d.a[0][0] += 1e-6;
        assert!(d.validate().is_err());
        assert!(fourier_components(&d, &TruncatedProductBasis::new(2)).is_err());
    }

    #[test]
    fn magnus_commutator_oracle() {
        // Number-conserving part of [H₋, H₊]/ω_d on a small basis equals
        // Σ α_ij·σ b_i†b_j + h·σ plus the scalar Σ(|r₊|² − |r₋|²)/ω_d.
        let n = 2;
        let basis = TruncatedProductBasis::new(n + 2);
        let d = DriveSpec::from_cavity3(
            [c(0.3, 0.1), c(-0.2, 0.5), c(0.4, -0.3)],
            [c(0.1, 0.2), c(0.6, -0.1), c(-0.5, 0.2)],
            3.0,
            0.0,
            0.0,
        );
        let f = fourier_components(&d, &basis).unwrap();
        let hm = f.h_minus.to_dense();
        let hp = f.h_plus.to_dense();
        let comm = hm.matmul(&hp);
        let comm2 = hp.matmul(&hm);
        let sector = enumerate_sector(n);
        let heff = effective_hamiltonian(&d, &sector).unwrap();
        let (rp, rm) = d.harmonics();
        let scalar: f64 = (0..3)
            .map(|j| (0..3).map(|k| rp[j][k].norm_sqr() - rm[j][k].norm_sqr()).sum::<f64>())
            .sum::<f64>()
            / d.omega_d;
        for (ci, lc) in sector.labels().iter().enumerate() {
            for (ri, lr) in sector.labels().iter().enumerate() {
                let (r, col) = (basis.index_of(lr).unwrap(), basis.index_of(lc).unwrap());
                let mut v = (comm[(r, col)] - comm2[(r, col)]) / d.omega_d;
                if ri == ci {
                    v -= scalar;
                }
                assert!((v - heff.get(ri, ci)).norm() < 1e-12, "{lr:?} {lc:?}");
            }
        }
    }

    /// α₁₂ as a real 6-vector of the 12 real drive parameters.
    fn alpha12(p: &[f64; 12]) -> [f64; 6] {
        let a3 = [c(p[0], p[1]), c(p[2], p[3]), c(p[4], p[5])];
        let b3 = [c(p[6], p[7]), c(p[8], p[9]), c(p[10], p[11])];
        let m = magnus_first_order(&DriveSpec::from_cavity3(a3, b3, 100.0, 10.0, 0.0)).unwrap();
        let a = m.alpha[0][1];
        [a[0].re, a[0].im, a[1].re, a[1].im, a[2].re, a[2].im]
    }

    fn jacobian(p: &[f64; 12]) -> [[f64; 12]; 6] {
        // α is quadratic in p, so central differences are exact up to rounding.
        let mut j = [[0.0; 12]; 6];
        for k in 0..12 {
            let (mut a, mut b) = (*p, *p);
            a[k] += 1e-3;
            b[k] -= 1e-3;
            let (fa, fb) = (alpha12(&a), alpha12(&b));
            for r in 0..6 {
                j[r][k] = (fa[r] - fb[r]) / 2e-3;
            }
        }
        j
    }

    fn solve6(mut m: [[f64; 6]; 6], mut rhs: [f64; 6]) -> [f64; 6] {
        for col in 0..6 {
            let piv = (col..6).max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs())).unwrap();
            m.swap(col, piv);
            rhs.swap(col, piv);
            for r in col + 1..6 {
                let f = m[r][col] / m[col][col];
                for k in col..6 {
                    m[r][k] -= f * m[col][k];
                }
                rhs[r] -= f * rhs[col];
            }
        }
        let mut x = [0.0; 6];
        for r in (0..6).rev() {
            let s: f64 = (r + 1..6).map(|k| m[r][k] * x[k]).sum();
            x[r] = (rhs[r] - s) / m[r][r];
        }
        x
    }

    /// Minimum-norm correction `Jᵀ(JJᵀ)⁻¹ r`.
    fn min_norm(j: &[[f64; 12]; 6], r: [f64; 6]) -> [f64; 12] {
        let mut jjt = [[0.0; 6]; 6];
        for a in 0..6 {
            for b in 0..6 {
                jjt[a][b] = (0..12).map(|k| j[a][k] * j[b][k]).sum();
            }
        }
        let y = solve6(jjt, r);
        let mut out = [0.0; 12];
        for k in 0..12 {
            out[k] = (0..6).map(|a| j[a][k] * y[a]).sum();
        }
        out
    }

    #[test]
    fn six_dimensional_solution_family() {
        let g = 1.0;
        let d0 = default_drive_solution(g, 100.0, 10.0, 6).unwrap();
        let mut p0 = [0.0; 12];
        for k in 0..3 {
            p0[2 * k] = d0.a[2][k].re;
            p0[2 * k + 1] = d0.a[2][k].im;
            p0[6 + 2 * k] = d0.b[2][k].re;
            p0[6 + 2 * k + 1] = d0.b[2][k].im;
        }
        let target = alpha12(&p0);
        let basis = enumerate_sector(6);
        let mut rng = rand_pcg::Pcg64::seed_from_u64(21);
        for _ in 0..3 {
            let j0 = jacobian(&p0);
            let v: [f64; 12] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
            let jv: [f64; 6] = std::array::from_fn(|a| (0..12).map(|k| j0[a][k] * v[k]).sum());
            let corr = min_norm(&j0, jv);
            let dir: [f64; 12] = std::array::from_fn(|k| v[k] - corr[k]);
            let dn = dir.iter().map(|x| x * x).sum::<f64>().sqrt();
            let scale = p0.iter().map(|x| x * x).sum::<f64>().sqrt();
            let mut p: [f64; 12] = std::array::from_fn(|k| p0[k] + 0.2 * scale * dir[k] / dn);
            // Newton back onto α₁₂ = target.
            for _ in 0..50 {
                let a = alpha12(&p);
                let r: [f64; 6] = std::array::from_fn(|i| a[i] - target[i]);
                if r.iter().all(|x| x.abs() < 1e-14) {
                    break;
                }
                let step = min_norm(&jacobian(&p), r);
                for k in 0..12 {
                    p[k] -= step[k];
                }
            }
            let moved = (0..12).map(|k| (p[k] - p0[k]).powi(2)).sum::<f64>().sqrt();
            assert!(moved > 0.05 * scale);
            let a3 = [c(p[0], p[1]), c(p[2], p[3]), c(p[4], p[5])];
            let b3 = [c(p[6], p[7]), c(p[8], p[9]), c(p[10], p[11])];
            let d = DriveSpec::from_cavity3(a3, b3, 100.0, 10.0, d0.delta_0);
            assert!(target_match_residual(&d, &basis, g).unwrap() < 1e-10);
        }
    }

    #[test]
    fn undriven_populations_constant() {
        let basis = TruncatedProductBasis::with_total_cap(5, 5);
        let d = DriveSpec::zero(100.0, 10.0, 0.0);
        let sector = enumerate_sector(3);
        let psi = basis
            .embed(&sector, &sector.product_state([1, 0, 2], plus_state()).unwrap())
            .unwrap();
        let s = stroboscopic_evolve(&d, &basis, &psi, 20, &StroboscopicOptions::default()).unwrap();
        for x in &s {
            assert!((x.n[0] - 1.0).abs() < 1e-12 && x.n[1].abs() < 1e-12 && (x.n[2] - 2.0).abs() < 1e-12);
            assert!((x.norm - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn cf4_is_fourth_order() {
        let basis = TruncatedProductBasis::with_total_cap(4, 4);
        let d = default_drive_solution(1.0, 20.0, 3.0, 1).unwrap();
        let sector = enumerate_sector(1);
        let psi = basis.embed(&sector, &sector.product_state([0, 0, 1], plus_state()).unwrap()).unwrap();
        let run = |spp: usize| {
            let o = StroboscopicOptions {
                steps_per_period: spp,
                leak_tol: 1.0,
                stride: 1,
            };
            stroboscopic_evolve(&d, &basis, &psi, 3, &o).unwrap().last().unwrap().n
        };
        let (r, a, b) = (run(1024), run(64), run(128));
        let ea = (0..3).map(|j| (a[j] - r[j]).abs()).fold(0.0, f64::max);
        let eb = (0..3).map(|j| (b[j] - r[j]).abs()).fold(0.0, f64::max);
        assert!(ea / eb > 12.0, "{ea} {eb}");
    }

    #[test]
    fn leakage_aborts() {
        let basis = TruncatedProductBasis::with_total_cap(3, 3);
        let d = default_drive_solution(1.0, 20.0, 3.0, 2).unwrap();
        let sector = enumerate_sector(2);
        let psi = basis.embed(&sector, &sector.product_state([0, 0, 2], plus_state()).unwrap()).unwrap();
        let r = stroboscopic_evolve(&d, &basis, &psi, 5, &StroboscopicOptions::default());
        assert!(matches!(r, Err(Error::Leakage { .. })));
    }

    fn late_deviation(n: usize, wd: f64, w0: f64, periods: f64) -> f64 {
        let d = default_drive_solution(1.0, wd, w0, n).unwrap();
        let basis = TruncatedProductBasis::with_total_cap(n + 6, n + 6);
        let q = (periods * crate::period(1.0) / d.period()).round() as usize;
        let opts = StroboscopicOptions {
            stride: 16,
            ..Default::default()
        };
        let cmp = compare_with_static(&d, &basis, 1.0, n, plus_state(), 3, q, &opts).unwrap();
        cmp.max_deviation()
    }

    #[test]
    fn drive_tracks_static_evolution() {
        assert!(late_deviation(2, 2000.0, 50.0, 0.5) < 0.1 * 2.0);
    }

    #[test]
    fn deviation_grows_as_drive_frequency_drops() {
        let fast = late_deviation(2, 2000.0, 200.0, 0.5);
        let slow = late_deviation(2, 1000.0, 200.0, 0.5);
        assert!(slow >= 2.0 * fast, "{slow} vs {fast}");
    }

}
