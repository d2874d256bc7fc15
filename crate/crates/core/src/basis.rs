//! Fixed-N photon lattice: Fock labels, sector enumeration and geometry.

use std::collections::HashMap;

/// Qubit orbital, labelled by the σ_z eigenvalue.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Spin {
    Up,
    Down,
}

impl Spin {
    pub const BOTH: [Spin; 2] = [Spin::Up, Spin::Down];

    /// σ_z eigenvalue, +1 or −1.
    pub fn sign(self) -> i8 {
        match self {
            Spin::Up => 1,
            Spin::Down => -1,
        }
    }

    /// Row/column of this orbital in 2×2 qubit matrices.
    pub fn index(self) -> usize {
        match self {
            Spin::Up => 0,
            Spin::Down => 1,
        }
    }

    pub fn from_index(i: usize) -> Spin {
        if i == 0 {
            Spin::Up
        } else {
            Spin::Down
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FockLabel {
    pub n: [usize; 3],
    pub spin: Spin,
}

impl FockLabel {
    pub fn new(n: [usize; 3], spin: Spin) -> Self {
        FockLabel { n, spin }
    }

    pub fn total(&self) -> usize {
        self.n.iter().sum()
    }
}

/// All states with `n₁+n₂+n₃ = N`, ordered lexicographically in
/// (n₁, n₂, spin) with spin up before spin down.
#[derive(Clone, Debug)]
pub struct SectorBasis {
    n_total: usize,
    labels: Vec<FockLabel>,
    index: HashMap<FockLabel, usize>,
}

pub fn enumerate_sector(n_total: usize) -> SectorBasis {
    let mut labels = Vec::with_capacity((n_total + 1) * (n_total + 2));
    for n1 in 0..=n_total {
        for n2 in 0..=(n_total - n1) {
            for spin in Spin::BOTH {
                labels.push(FockLabel::new([n1, n2, n_total - n1 - n2], spin));
            }
        }
    }
    let index = labels.iter().enumerate().map(|(i, l)| (*l, i)).collect();
    SectorBasis {
        n_total,
        labels,
        index,
    }
}

impl SectorBasis {
    pub fn n_total(&self) -> usize {
        self.n_total
    }

    pub fn dim(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[FockLabel] {
        &self.labels
    }

    pub fn label(&self, i: usize) -> FockLabel {
        self.labels[i]
    }

    pub fn index_of(&self, label: &FockLabel) -> Option<usize> {
        self.index.get(label).copied()
    }

    /// Number of lattice sites; each carries the two qubit orbitals at
    /// consecutive indices (up first).
    pub fn n_sites(&self) -> usize {
        self.labels.len() / 2
    }

    /// `|n⟩ ⊗ qubit` as a state vector.
    pub fn product_state(
        &self,
        n: [usize; 3],
        qubit: [num_complex::Complex64; 2],
    ) -> crate::Result<Vec<num_complex::Complex64>> {
        let up = self
            .index_of(&FockLabel::new(n, Spin::Up))
            .ok_or_else(|| crate::Error::InvalidArgument(format!("{n:?} not in sector {}", self.n_total)))?;
        let mut psi = vec![num_complex::Complex64::new(0.0, 0.0); self.dim()];
        psi[up] = qubit[0];
        psi[up + 1] = qubit[1];
        Ok(psi)
    }
}

/// `√(3/2)·min_j n_j`, the distance of a site from the nearest lattice edge.
pub fn edge_distance(n: [usize; 3]) -> f64 {
    1.5f64.sqrt() * (*n.iter().min().unwrap() as f64)
}

/// Orthogonal projection onto the plane `n₁+n₂+n₃ = N`.
pub fn plane_coords(n: [usize; 3]) -> (f64, f64) {
    plane_coords_f([n[0] as f64, n[1] as f64, n[2] as f64])
}

pub fn plane_coords_f(n: [f64; 3]) -> (f64, f64) {
    (
        (n[0] - n[1]) / 2f64.sqrt(),
        (n[0] + n[1] - 2.0 * n[2]) / 6f64.sqrt(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn sector_sizes() {
        assert_eq!(enumerate_sector(0).dim(), 2);
        assert_eq!(enumerate_sector(1).dim(), 6);
        assert_eq!(enumerate_sector(20).dim(), 462);
        for n in 0..=60 {
            assert_eq!(enumerate_sector(n).dim(), (n + 1) * (n + 2));
        }
    }

    #[test]
    fn ordering() {
        let b = enumerate_sector(2);
        assert_eq!(b.label(0), FockLabel::new([0, 0, 2], Spin::Up));
        assert_eq!(b.label(1), FockLabel::new([0, 0, 2], Spin::Down));
        assert_eq!(b.label(2), FockLabel::new([0, 1, 1], Spin::Up));
        assert_eq!(b.label(11), FockLabel::new([2, 0, 0], Spin::Down));
        let mut sorted = b.labels().to_vec();
        sorted.sort_by_key(|l| (l.n[0], l.n[1], l.spin));
        assert_eq!(sorted, b.labels());
    }

    #[test]
    fn round_trip() {
        for n in [0, 3, 17] {
            let b = enumerate_sector(n);
            for (i, l) in b.labels().iter().enumerate() {
                assert_eq!(b.index_of(l), Some(i));
                assert_eq!(l.total(), n);
            }
        }
    }

    #[test]
    fn edge_distance_examples() {
        assert_eq!(edge_distance([0, 5, 5]), 0.0);
        assert!((edge_distance([2, 3, 15]) - 2.4494897).abs() < 1e-6);
        assert!((edge_distance([7, 7, 7]) - 8.5732141).abs() < 1e-6);
    }

    #[test]
    fn plane_coord_examples() {
        assert_eq!(plane_coords([1, 1, 1]), (0.0, 0.0));
        let n = 9usize;
        let nf = n as f64;
        let (x, y) = plane_coords([n, 0, 0]);
        assert!((x - nf / 2f64.sqrt()).abs() < 1e-12 && (y - nf / 6f64.sqrt()).abs() < 1e-12);
        let (x, y) = plane_coords([0, 0, n]);
        assert!(x.abs() < 1e-12 && (y + 2.0 * nf / 6f64.sqrt()).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn edge_distance_cyclic(a in 0usize..200, b in 0usize..200, c in 0usize..200) {
            let d = edge_distance([a, b, c]);
            prop_assert_eq!(d, edge_distance([c, a, b]));
            prop_assert_eq!(d, edge_distance([b, c, a]));
        }

        #[test]
        fn corners_equilateral(n in 1usize..500) {
            let p = [plane_coords([n, 0, 0]), plane_coords([0, n, 0]), plane_coords([0, 0, n])];
            let side = (n as f64) * 2f64.sqrt();
            for i in 0..3 {
                let (a, b) = (p[i], p[(i + 1) % 3]);
                let d = ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt();
                prop_assert!((d - side).abs() < 1e-9 * side);
            }
        }

        #[test]
        fn index_inverse(n in 0usize..40, k in 0usize..10_000) {
            let b = enumerate_sector(n);
            let i = k % b.dim();
            prop_assert_eq!(b.index_of(&b.label(i)), Some(i));
        }
    }
}
