//! Full sector eigensolves and the boundary-band diagnostics.

use crate::basis::SectorBasis;
use crate::linalg::{eigh, norm, DenseMatrix};
use crate::operators::{circulation_op, edge_distance_op, ModelParams};
use crate::sparse::SparseOperator;
use crate::{Error, Result};
use num_complex::Complex64;

#[derive(Clone, Debug)]
pub struct SectorSpectrum {
    pub energies: Vec<f64>,
    /// Eigenvectors as columns, in the order of `energies`.
    pub states: DenseMatrix,
}

pub fn eigensolve(h: &SparseOperator) -> Result<SectorSpectrum> {
    if !h.is_hermitian() {
        return Err(Error::NotHermitian(h.hermiticity_error()));
    }
    let (energies, states) = eigh(&h.to_dense())?;
    Ok(SectorSpectrum { energies, states })
}

impl SectorSpectrum {
    pub fn dim(&self) -> usize {
        self.energies.len()
    }

    /// `⟨v_k|A|v_k⟩` for every eigenstate (real part).
    pub fn expectations(&self, op: &SparseOperator) -> Vec<f64> {
        (0..self.dim()).map(|k| op.expectation(self.states.col(k)).re).collect()
    }

    /// Largest `‖H v_k − E_k v_k‖`.
    pub fn residual(&self, h: &SparseOperator) -> f64 {
        (0..self.dim())
            .map(|k| {
                let v = self.states.col(k);
                let hv = h.apply(v);
                let r: Vec<Complex64> = hv.iter().zip(v).map(|(a, b)| a - self.energies[k] * b).collect();
                norm(&r)
            })
            .fold(0.0, f64::max)
    }
}

/// Thresholds for separating the chiral boundary band from bulk states.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BandOptions {
    /// States with `⟨d⟩/N` above this are bulk.
    pub bulk_distance: f64,
    /// Boundary band lies within `|E| ≤ band_fraction · gap`.
    pub band_fraction: f64,
    /// States whose chirality `⟨C⟩/gN²` (signed g) falls below this
    /// fraction of the boundary-mode value are also bulk. `None` disables
    /// the test.
    pub chirality_fraction: Option<f64>,
}

impl Default for BandOptions {
    fn default() -> Self {
        BandOptions {
            bulk_distance: 0.15,
            band_fraction: 0.4,
            chirality_fraction: Some(0.5),
        }
    }
}

#[derive(Clone, Debug)]
pub struct BandDiagnostics {
    pub energies: Vec<f64>,
    /// `⟨d⟩/N` per state.
    pub distance: Vec<f64>,
    /// `⟨C⟩/(gN²)` per state.
    pub chirality: Vec<f64>,
    pub gap_estimate: f64,
    pub boundary_indices: Vec<usize>,
}

impl BandDiagnostics {
    pub fn is_boundary(&self, k: usize) -> bool {
        self.boundary_indices.binary_search(&k).is_ok()
    }

    pub fn band_mean_distance(&self) -> f64 {
        mean(self.boundary_indices.iter().map(|&k| self.distance[k]))
    }

    pub fn band_mean_chirality(&self) -> f64 {
        mean(self.boundary_indices.iter().map(|&k| self.chirality[k]))
    }
}

fn mean(it: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = it.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        s / n as f64
    }
}

/// Per-state `⟨d⟩` and `⟨C⟩`, bulk-gap estimate and boundary band.
///
/// Bulk states are those far from the edge (`⟨d⟩/N > bulk_distance`) or,
/// when enabled, those whose chirality is well below the boundary-mode
/// value; the gap is twice the smallest bulk `|E|`.
pub fn band_diagnostics(
    spec: &SectorSpectrum,
    d_op: &SparseOperator,
    c_op: &SparseOperator,
    params: &ModelParams,
    opts: &BandOptions,
) -> Result<BandDiagnostics> {
    if spec.dim() == 0 {
        return Err(Error::InvalidArgument("empty spectrum".into()));
    }
    if d_op.dim() != spec.dim() || c_op.dim() != spec.dim() {
        return Err(Error::DimensionMismatch {
            expected: spec.dim(),
            got: d_op.dim().min(c_op.dim()),
        });
    }
    let n = params.n.max(1) as f64;
    let distance: Vec<f64> = spec.expectations(d_op).iter().map(|d| d / n).collect();
    let chirality: Vec<f64> = spec
        .expectations(c_op)
        .iter()
        .map(|x| x / (params.g * n * n))
        .collect();
    let c_ref = crate::lda::lda_boundary_constants().1;
    let bulk = |k: usize| {
        distance[k] > opts.bulk_distance
            || opts
                .chirality_fraction
                .is_some_and(|f| chirality[k] < f * c_ref)
    };
    let gap_estimate = 2.0
        * (0..spec.dim())
            .filter(|&k| bulk(k))
            .map(|k| spec.energies[k].abs())
            .fold(f64::INFINITY, f64::min);
    let gap_estimate = if gap_estimate.is_finite() { gap_estimate } else { 0.0 };
    let boundary_indices = (0..spec.dim())
        .filter(|&k| {
            spec.energies[k].abs() <= opts.band_fraction * gap_estimate
                && distance[k] <= opts.bulk_distance
                && !bulk(k)
        })
        .collect();
    Ok(BandDiagnostics {
        energies: spec.energies.clone(),
        distance,
        chirality,
        gap_estimate,
        boundary_indices,
    })
}

/// Convenience: Hamiltonian, spectrum and diagnostics for one sector.
pub fn sector_diagnostics(
    basis: &SectorBasis,
    h: &SparseOperator,
    params: &ModelParams,
    opts: &BandOptions,
) -> Result<(SectorSpectrum, BandDiagnostics)> {
    let spec = eigensolve(h)?;
    let d = edge_distance_op(basis);
    let cop = circulation_op(basis, h)?;
    let diag = band_diagnostics(&spec, &d, &cop, params, opts)?;
    Ok((spec, diag))
}

/// `(⟨H⟩, √(⟨H²⟩ − ⟨H⟩²))` for a normalized state.
pub fn initial_state_energy_stats(h: &SparseOperator, state: &[Complex64]) -> Result<(f64, f64)> {
    let nrm = norm(state);
    if (nrm - 1.0).abs() > 1e-8 {
        return Err(Error::InvalidArgument(format!("state norm {nrm} is not 1")));
    }
    let hv = h.apply(state);
    let mean = crate::linalg::dot(state, &hv).re;
    let h2 = hv.iter().map(|x| x.norm_sqr()).sum::<f64>();
    Ok((mean, (h2 - mean * mean).max(0.0).sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::enumerate_sector;
    use crate::operators::hamiltonian;
    use crate::c;

    #[test]
    fn two_level_sector() {
        let basis = enumerate_sector(0);
        let h = hamiltonian(&basis, &ModelParams::new(0, 1.0, 1.0)).unwrap();
        let s = eigensolve(&h).unwrap();
        assert_eq!(s.energies, vec![-1.0, 1.0]);
    }

    #[test]
    fn n1_pairs() {
        let basis = enumerate_sector(1);
        let h = hamiltonian(&basis, &ModelParams::new(1, 1.0, 0.0)).unwrap();
        let s = eigensolve(&h).unwrap();
        assert!(s.energies.iter().sum::<f64>().abs() < 1e-12);
        for k in 0..6 {
            assert!((s.energies[k] + s.energies[5 - k]).abs() < 1e-12);
        }
    }

    #[test]
    fn non_hermitian_rejected() {
        let op = SparseOperator::from_triplets(2, vec![(0, 1, c(1.0, 0.0))]).unwrap();
        assert!(eigensolve(&op).is_err());
    }

    #[test]
    fn plus_state_energy_spread() {
        let n = 40;
        let basis = enumerate_sector(n);
        let h = hamiltonian(&basis, &ModelParams::new(n, 1.0, 0.0)).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let plus = basis.product_state([0, 0, n], [c(s, 0.0), c(s, 0.0)]).unwrap();
        let (m, sd) = initial_state_energy_stats(&h, &plus).unwrap();
        assert!(m.abs() < 1e-9);
        let want = (n as f64 * (4.0 - 2.0 * 3f64.sqrt())).sqrt();
        assert!((sd - want).abs() < 1e-9, "{sd} vs {want}");
        assert!((sd - 4.6299).abs() < 1e-3);

        let up = basis.product_state([0, 0, n], [c(1.0, 0.0), c(0.0, 0.0)]).unwrap();
        // Oracle for ⟨H²⟩: sum of squared matrix elements out of the state.
        let col = basis.index_of(&crate::basis::FockLabel::new([0, 0, n], crate::basis::Spin::Up)).unwrap();
        let h2: f64 = (0..basis.dim()).map(|r| h.get(r, col).norm_sqr()).sum();
        let (_, sd_up) = initial_state_energy_stats(&h, &up).unwrap();
        assert!((sd_up - h2.sqrt()).abs() < 1e-9);
        assert!(sd_up > sd);

        let bad: Vec<Complex64> = plus.iter().map(|x| x * 2.0).collect();
        assert!(initial_state_energy_stats(&h, &bad).is_err());
    }

    #[test]
    fn diagnostics_invariants_small_n() {
        let n = 12;
        let basis = enumerate_sector(n);
        let params = ModelParams::new(n, 1.0, 0.0);
        let h = hamiltonian(&basis, &params).unwrap();
        let (spec, d) = sector_diagnostics(&basis, &h, &params, &BandOptions::default()).unwrap();
        assert!(spec.residual(&h) < 1e-8 * h.norm_bound());
        let csum: f64 = d.chirality.iter().sum();
        assert!(csum.abs() < 1e-8);
        let bound = 1.5f64.sqrt() / 3.0 + 1e-9;
        assert!(d.distance.iter().all(|&x| x >= 0.0 && x <= bound));
        assert!(d.gap_estimate > 0.0);
        assert!(d.boundary_indices.iter().all(|&k| k < spec.dim()));
    }
}
