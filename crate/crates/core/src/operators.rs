//! Model Hamiltonian, disorder, observables and symmetry operators on a
//! number sector.
//!
//! `H = Δσ_z + Σ_j (b_j† b_{j+1} G_{j−1} + h.c.)` with
//! `G_j = i g (cos(2πj/3)σ_x + sin(2πj/3)σ_y + iσ_z)`. Cavity indices are
//! 1-based and cyclic (`G_0 ≡ G_3`).

use crate::basis::{FockLabel, SectorBasis, Spin};
use crate::sparse::SparseOperator;
use crate::{c, Error, Result, I};
use num_complex::Complex64;
use rand::RngExt;
use rand_pcg::Pcg64;
use std::f64::consts::PI;

pub type Mat2 = [[Complex64; 2]; 2];

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// `v·σ` for a complex 3-vector `v`.
pub fn dot_sigma(v: [Complex64; 3]) -> Mat2 {
    [[v[2], v[0] - I * v[1]], [v[0] + I * v[1], -v[2]]]
}

/// Components of `G_j` in the Pauli basis, `G_j = v·σ`.
pub fn coupling_vector(j: usize, g: f64) -> Result<[Complex64; 3]> {
    if !(1..=3).contains(&j) {
        return Err(Error::InvalidArgument(format!("cavity index {j} outside 1..=3")));
    }
    let th = 2.0 * PI * j as f64 / 3.0;
    Ok([c(0.0, g * th.cos()), c(0.0, g * th.sin()), c(-g, 0.0)])
}

pub fn qubit_coupling(j: usize, g: f64) -> Result<Mat2> {
    Ok(dot_sigma(coupling_vector(j, g)?))
}

/// `R_z(θ) = exp(−iθσ_z/2)`.
pub fn rz(theta: f64) -> Mat2 {
    [
        [Complex64::from_polar(1.0, -theta / 2.0), ZERO],
        [ZERO, Complex64::from_polar(1.0, theta / 2.0)],
    ]
}

pub fn mat2_mul(a: &Mat2, b: &Mat2) -> Mat2 {
    let mut out = [[ZERO; 2]; 2];
    for r in 0..2 {
        for col in 0..2 {
            out[r][col] = a[r][0] * b[0][col] + a[r][1] * b[1][col];
        }
    }
    out
}

pub fn mat2_adjoint(a: &Mat2) -> Mat2 {
    [[a[0][0].conj(), a[1][0].conj()], [a[0][1].conj(), a[1][1].conj()]]
}

/// Rotate a 3-vector about z by `θ`: components (x, y) mix, z untouched.
pub fn rotate_z(v: [Complex64; 3], theta: f64) -> [Complex64; 3] {
    let (s, co) = theta.sin_cos();
    [co * v[0] - s * v[1], s * v[0] + co * v[1], v[2]]
}

/// Cyclic successor and predecessor of a 1-based cavity index.
pub fn next(j: usize) -> usize {
    j % 3 + 1
}

pub fn prev(j: usize) -> usize {
    (j + 1) % 3 + 1
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModelParams {
    pub g: f64,
    /// Qubit half-splitting Δ.
    pub delta: f64,
    /// Cavity frequency, only used in the lab frame.
    pub omega: f64,
    pub n: usize,
}

impl ModelParams {
    pub fn new(n: usize, g: f64, delta: f64) -> Self {
        ModelParams { g, delta, omega: 0.0, n }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PerturbationKind {
    None,
    CavityFrequency,
    CouplingGeneric,
    CouplingPSymmetric,
}

impl std::str::FromStr for PerturbationKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(PerturbationKind::None),
            "cavity_frequency" => Ok(PerturbationKind::CavityFrequency),
            "coupling_generic" => Ok(PerturbationKind::CouplingGeneric),
            "coupling_p_symmetric" => Ok(PerturbationKind::CouplingPSymmetric),
            other => Err(Error::InvalidArgument(format!("unknown perturbation kind '{other}'"))),
        }
    }
}

impl PerturbationKind {
    pub fn name(self) -> &'static str {
        match self {
            PerturbationKind::None => "none",
            PerturbationKind::CavityFrequency => "cavity_frequency",
            PerturbationKind::CouplingGeneric => "coupling_generic",
            PerturbationKind::CouplingPSymmetric => "coupling_p_symmetric",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PerturbationSpec {
    pub kind: PerturbationKind,
    pub strength: f64,
    pub seed: u64,
}

impl PerturbationSpec {
    pub fn none() -> Self {
        PerturbationSpec {
            kind: PerturbationKind::None,
            strength: 0.0,
            seed: 0,
        }
    }
}

/// One disorder realization.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Perturbation {
    /// Cavity frequency shifts `δω_j`, adding `Σ δω_j n̂_j`.
    pub d_omega: [f64; 3],
    /// `δg_k` added to the Pauli vector of `G_k` (index k−1).
    pub d_g: [[Complex64; 3]; 3],
}

impl Perturbation {
    pub fn none() -> Self {
        Perturbation {
            d_omega: [0.0; 3],
            d_g: [[ZERO; 3]; 3],
        }
    }
}

/// The generator behind every disorder draw: PCG64 (128-bit LCG, XSL-RR
/// output) seeded with `seed`, one stream per realization index.
pub fn realization_rng(seed: u64, realization: u64) -> Pcg64 {
    Pcg64::new(seed as u128 | ((seed as u128) << 64), realization as u128)
}

/// Draw realization number `realization` of `spec`. Each coupling draw
/// consumes six uniforms per cavity in the order (Re x, Im x, Re y, Im y,
/// Re z, Im z); the P-symmetric family draws the same numbers and then
/// zeroes Re δg_x, Re δg_y and Im δg_z.
pub fn sample_perturbation(spec: &PerturbationSpec, realization: u64) -> Result<Perturbation> {
    if !(spec.strength >= 0.0) {
        return Err(Error::InvalidArgument(format!("negative perturbation strength {}", spec.strength)));
    }
    let mut p = Perturbation::none();
    let d = spec.strength;
    if spec.kind == PerturbationKind::None || d == 0.0 {
        return Ok(p);
    }
    let mut rng = realization_rng(spec.seed, realization);
    let mut u = || rng.random_range(-d..=d);
    match spec.kind {
        PerturbationKind::None => {}
        PerturbationKind::CavityFrequency => {
            for w in &mut p.d_omega {
                *w = u();
            }
        }
        PerturbationKind::CouplingGeneric | PerturbationKind::CouplingPSymmetric => {
            for k in 0..3 {
                for a in 0..3 {
                    let re = u();
                    let im = u();
                    p.d_g[k][a] = c(re, im);
                }
                if spec.kind == PerturbationKind::CouplingPSymmetric {
                    p.d_g[k][0].re = 0.0;
                    p.d_g[k][1].re = 0.0;
                    p.d_g[k][2].im = 0.0;
                }
            }
        }
    }
    Ok(p)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Frame {
    Rotating,
    Lab,
}

/// Hopping triplets `Σ_j b_j† b_{j+1} M_j` (without h.c.), where `M_j` is
/// the 2×2 qubit matrix attached to hop j (1-based, index j−1).
fn hop_triplets(basis: &SectorBasis, m: &[Mat2; 3]) -> Vec<(usize, usize, Complex64)> {
    let mut t = Vec::with_capacity(basis.dim() * 12);
    for (col, l) in basis.labels().iter().enumerate() {
        for j in 1..=3 {
            let (a, b) = (j - 1, next(j) - 1);
            if l.n[b] == 0 {
                continue;
            }
            let mut n = l.n;
            n[a] += 1;
            n[b] -= 1;
            let amp = (((l.n[a] + 1) * l.n[b]) as f64).sqrt();
            for s in Spin::BOTH {
                let v = m[j - 1][s.index()][l.spin.index()];
                if v != ZERO {
                    let row = basis.index_of(&FockLabel::new(n, s)).unwrap();
                    t.push((row, col, amp * v));
                }
            }
        }
    }
    t
}

/// Hopping matrices `G_{j−1} + δG_{j−1}` for hops j = 1, 2, 3.
pub fn hop_matrices(g: f64, pert: &Perturbation) -> [Mat2; 3] {
    let mut out = [[[ZERO; 2]; 2]; 3];
    for j in 1..=3 {
        let k = prev(j);
        let mut v = coupling_vector(k, g).unwrap();
        for a in 0..3 {
            v[a] += pert.d_g[k - 1][a];
        }
        out[j - 1] = dot_sigma(v);
    }
    out
}

/// Assemble `Σ_j (b_j† b_{j+1} M_j + h.c.)` plus a diagonal.
pub fn assemble(basis: &SectorBasis, m: &[Mat2; 3], diag: impl Fn(&FockLabel) -> f64) -> Result<SparseOperator> {
    let fwd = hop_triplets(basis, m);
    let mut t: Vec<_> = fwd.iter().map(|&(r, c0, v)| (c0, r, v.conj())).collect();
    t.extend(fwd);
    for (i, l) in basis.labels().iter().enumerate() {
        let d = diag(l);
        if d != 0.0 {
            t.push((i, i, c(d, 0.0)));
        }
    }
    SparseOperator::hermitian_from_triplets(basis.dim(), t)
}

pub fn build_hamiltonian(
    basis: &SectorBasis,
    params: &ModelParams,
    pert: &Perturbation,
    frame: Frame,
) -> Result<SparseOperator> {
    if basis.n_total() != params.n {
        return Err(Error::DimensionMismatch {
            expected: params.n,
            got: basis.n_total(),
        });
    }
    let m = hop_matrices(params.g, pert);
    let shift = match frame {
        Frame::Rotating => 0.0,
        Frame::Lab => params.omega * params.n as f64,
    };
    assemble(basis, &m, |l| {
        params.delta * l.spin.sign() as f64
            + shift
            + (0..3).map(|j| pert.d_omega[j] * l.n[j] as f64).sum::<f64>()
    })
}

/// Unperturbed rotating-frame Hamiltonian.
pub fn hamiltonian(basis: &SectorBasis, params: &ModelParams) -> Result<SparseOperator> {
    build_hamiltonian(basis, params, &Perturbation::none(), Frame::Rotating)
}

fn check_cavity(j: usize) -> Result<()> {
    if (1..=3).contains(&j) {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("cavity index {j} outside 1..=3")))
    }
}

pub fn number_op(basis: &SectorBasis, j: usize) -> Result<SparseOperator> {
    check_cavity(j)?;
    let d: Vec<f64> = basis.labels().iter().map(|l| l.n[j - 1] as f64).collect();
    Ok(SparseOperator::real_diagonal(&d))
}

/// `√(3/2)·min_j n̂_j`.
pub fn edge_distance_op(basis: &SectorBasis) -> SparseOperator {
    let d: Vec<f64> = basis.labels().iter().map(|l| crate::basis::edge_distance(l.n)).collect();
    SparseOperator::real_diagonal(&d)
}

fn check_dim(basis: &SectorBasis, h: &SparseOperator) -> Result<()> {
    if h.dim() != basis.dim() {
        return Err(Error::DimensionMismatch {
            expected: basis.dim(),
            got: h.dim(),
        });
    }
    Ok(())
}

/// `J_j = i[H, n̂_j]`.
pub fn current_op(basis: &SectorBasis, h: &SparseOperator, j: usize) -> Result<SparseOperator> {
    check_cavity(j)?;
    check_dim(basis, h)?;
    let n = |i: usize| basis.label(i).n[j - 1] as f64;
    let t = h.triplets().map(|(r, col, v)| (r, col, I * v * (n(col) - n(r)))).collect();
    SparseOperator::hermitian_from_triplets(basis.dim(), t)
}

/// `C = ½ Σ ε_abc u_c n̂_a J_b + h.c.` with `u = (1,1,1)/√3`.
pub fn circulation_op(basis: &SectorBasis, h: &SparseOperator) -> Result<SparseOperator> {
    check_dim(basis, h)?;
    if !h.is_hermitian() {
        return Err(Error::NotHermitian(h.hermiticity_error()));
    }
    let u = 1.0 / 3f64.sqrt();
    let n = |i: usize, a: usize| basis.label(i).n[a] as f64;
    let mut t = Vec::with_capacity(h.nnz());
    for (r, col, v) in h.triplets() {
        // Σ_abc ε_abc u_c J_b,rc (n_a(r) + n_a(col)) / 2
        let mut acc = 0.0;
        for a in 0..3 {
            for b in 0..3 {
                if a == b {
                    continue;
                }
                let eps = if (b + 3 - a) % 3 == 1 { 1.0 } else { -1.0 };
                let jb = n(col, b) - n(r, b);
                acc += eps * u * jb * (n(r, a) + n(col, a));
            }
        }
        if acc != 0.0 {
            t.push((r, col, I * v * (0.5 * acc)));
        }
    }
    SparseOperator::hermitian_from_triplets(basis.dim(), t)
}

/// Spin phase of the C₃ rotation `exp(−iπσ_z/3)`.
fn c3_phase(s: Spin) -> Complex64 {
    Complex64::from_polar(1.0, -(s.sign() as f64) * PI / 3.0)
}

/// `U_C3`: `|n₁,n₂,n₃⟩ → |n₃,n₁,n₂⟩` times `exp(−iπσ_z/3)` on the qubit.
pub fn c3_unitary(basis: &SectorBasis) -> SparseOperator {
    let t = basis
        .labels()
        .iter()
        .enumerate()
        .map(|(col, l)| {
            let img = FockLabel::new([l.n[2], l.n[0], l.n[1]], l.spin);
            (basis.index_of(&img).unwrap(), col, c3_phase(l.spin))
        })
        .collect();
    SparseOperator::from_triplets(basis.dim(), t).unwrap()
}

/// `U_C3ⁿ |ψ⟩` without forming the operator power.
pub fn apply_c3(basis: &SectorBasis, psi: &[Complex64], times: usize) -> Vec<Complex64> {
    let mut cur = psi.to_vec();
    let u = c3_unitary(basis);
    for _ in 0..times % 6 {
        cur = u.apply(&cur);
    }
    cur
}

/// `max |U H U† − H|`, evaluated through the label permutation.
pub fn c3_residual(basis: &SectorBasis, h: &SparseOperator) -> f64 {
    let u = c3_unitary(basis);
    let perm: Vec<(usize, Complex64)> = (0..basis.dim()).map(|col| u.row_of_col(col)).collect();
    let t = h
        .triplets()
        .map(|(r, col, v)| {
            let (pr, ph_r) = perm[r];
            let (pc, ph_c) = perm[col];
            (pr, pc, ph_r * v * ph_c.conj())
        })
        .collect();
    let rotated = SparseOperator::from_triplets(basis.dim(), t).unwrap();
    rotated.max_abs_diff(h)
}

impl SparseOperator {
    /// For a monomial (permutation-times-phase) operator: the unique
    /// nonzero entry in column `col`.
    fn row_of_col(&self, col: usize) -> (usize, Complex64) {
        self.triplets().find(|&(_, c0, _)| c0 == col).map(|(r, _, v)| (r, v)).unwrap()
    }
}

/// `max |σ_x H* σ_x + H|` for an operator in sector ordering (qubit
/// orbitals of one site at indices 2k, 2k+1). The anti-unitary `σ_x K`
/// anti-commutes with the unperturbed rotating-frame Hamiltonian.
pub fn p_antisymmetry_residual(h: &SparseOperator) -> f64 {
    let t = h.triplets().map(|(r, col, v)| (r ^ 1, col ^ 1, v.conj())).collect();
    let ph = SparseOperator::from_triplets(h.dim(), t).unwrap();
    ph.add_scaled(c(1.0, 0.0), h).unwrap().max_abs()
}
