//! Local-density (LDA) band topology of the photon lattice.
//!
//! Freezing the Bose factors at a site `n` gives a two-band Bloch
//! Hamiltonian `2g h(k)·σ` on the triangular lattice with
//! `h(k) = (Δ/2g) ẑ + Σ_j f_j [sin θ_j (cos φ_j, sin φ_j, 0) − cos θ_j ẑ]`,
//! `f_j = √(n_{j+1} n_{j−1})`, `φ_j = 2πj/3`, and phases
//! `θ₃ = k_x`, `θ_{1,2} = −k_x/2 ± √3 k_y/2`. At the centroid this is
//! `(2gN/3) η(k)·σ` with mass `m = 3Δ/(2gN)`.

use crate::par::{self, Exec};
use crate::{Error, Result};
use num_complex::Complex64;
use std::f64::consts::PI;

const SQ3: f64 = 1.7320508075688772;

/// QWZ-type Bloch vector on the triangular lattice.
pub fn bloch_vector(k: [f64; 2], m: f64) -> [f64; 3] {
    let (kx, ky) = (k[0], k[1]);
    [
        kx.sin() + (kx / 2.0).sin() * (SQ3 * ky / 2.0).cos(),
        SQ3 * (kx / 2.0).cos() * (SQ3 * ky / 2.0).sin(),
        m - kx.cos() - 2.0 * (kx / 2.0).cos() * (SQ3 * ky / 2.0).cos(),
    ]
}

/// Reciprocal lattice vectors spanning the Brillouin zone.
pub const B1: [f64; 2] = [2.0 * PI, 2.0 * PI / SQ3];
pub const B2: [f64; 2] = [2.0 * PI, -2.0 * PI / SQ3];

/// The three inequivalent M points, where the centroid gap closes at m = −1.
pub const M_POINTS: [[f64; 2]; 3] = [[0.0, 2.0 * PI / SQ3], [PI, PI / SQ3], [PI, -PI / SQ3]];

/// The two inequivalent K points, where the centroid gap closes at m = −3/2.
pub const K_POINTS: [[f64; 2]; 2] = [[4.0 * PI / 3.0, 0.0], [2.0 * PI / 3.0, 2.0 * PI / SQ3]];

fn grid_k(i: usize, j: usize, grid: usize) -> [f64; 2] {
    let (a, b) = (i as f64 / grid as f64, j as f64 / grid as f64);
    [a * B1[0] + b * B2[0], a * B1[1] + b * B2[1]]
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Band {
    Lower,
    Upper,
}

/// Eigenvector of `ĥ·σ` for the requested band. The gauge is switched by
/// the sign of `h_z` to stay away from the singular pole; plaquette fluxes
/// do not care.
pub fn band_vector(h: [f64; 3], band: Band) -> [Complex64; 2] {
    let r = (h[0] * h[0] + h[1] * h[1] + h[2] * h[2]).sqrt();
    let (hx, hy, hz) = (h[0], h[1], h[2]);
    let e = match band {
        Band::Lower => -r,
        Band::Upper => r,
    };
    // Columns of (h·σ − e) null space: (h_x − i h_y, e − h_z) or (e + h_z, h_x + i h_y).
    let v = if (e - hz).abs() >= (e + hz).abs() {
        [Complex64::new(hx, -hy), Complex64::new(e - hz, 0.0)]
    } else {
        [Complex64::new(e + hz, 0.0), Complex64::new(hx, hy)]
    };
    let nv = (v[0].norm_sqr() + v[1].norm_sqr()).sqrt();
    [v[0] / nv, v[1] / nv]
}

fn overlap(a: &[Complex64; 2], b: &[Complex64; 2]) -> Complex64 {
    a[0].conj() * b[0] + a[1].conj() * b[1]
}

/// Berry flux of one band through the Brillouin zone, in units of 2π, by
/// the plaquette (lattice field strength) method. Errors when the band gap
/// `min |h|` on the grid is at or below `gap_floor`.
pub fn chern_flux<F>(h: F, grid: usize, band: Band, gap_floor: f64) -> Result<f64>
where
    F: Fn([f64; 2]) -> [f64; 3],
{
    if grid < 2 {
        return Err(Error::InvalidArgument(format!("grid {grid} too small")));
    }
    let mut min_gap = f64::INFINITY;
    let mut u = Vec::with_capacity(grid * grid);
    for i in 0..grid {
        for j in 0..grid {
            let hv = h(grid_k(i, j, grid));
            min_gap = min_gap.min((hv[0] * hv[0] + hv[1] * hv[1] + hv[2] * hv[2]).sqrt());
            u.push(band_vector(hv, band));
        }
    }
    if !(min_gap > gap_floor) {
        return Err(Error::Gapless(min_gap));
    }
    let at = |i: usize, j: usize| &u[(i % grid) * grid + (j % grid)];
    let mut flux = 0.0;
    for i in 0..grid {
        for j in 0..grid {
            let w = overlap(at(i, j), at(i + 1, j))
                * overlap(at(i + 1, j), at(i + 1, j + 1))
                * overlap(at(i + 1, j + 1), at(i, j + 1))
                * overlap(at(i, j + 1), at(i, j));
            flux += w.arg();
        }
    }
    Ok(flux / (2.0 * PI))
}

/// Gap floor used by [`chern_number`].
pub const GAP_FLOOR: f64 = 1e-6;

pub fn chern_number_band(m: f64, grid: usize, band: Band) -> Result<i32> {
    if grid < 24 {
        return Err(Error::InvalidArgument(format!("grid {grid} below 24")));
    }
    let f = chern_flux(|k| bloch_vector(k, m), grid, band, GAP_FLOOR)?;
    Ok(f.round() as i32)
}

/// Lower-band Chern number of `η(k)·σ`.
pub fn chern_number(m: f64, grid: usize) -> Result<i32> {
    chern_number_band(m, grid, Band::Lower)
}

/// `f_j = √(n_{j+1} n_{j−1})`.
pub fn hopping_weights(n: [f64; 3]) -> [f64; 3] {
    [(n[1] * n[2]).sqrt(), (n[2] * n[0]).sqrt(), (n[0] * n[1]).sqrt()]
}

/// Local Bloch vector `h(k)` at frozen hopping weights `f`, with
/// `offset = Δ/(2g)`.
pub fn local_bloch_vector(f: [f64; 3], offset: f64, k: [f64; 2]) -> [f64; 3] {
    let th = [
        -k[0] / 2.0 + SQ3 * k[1] / 2.0,
        -k[0] / 2.0 - SQ3 * k[1] / 2.0,
        k[0],
    ];
    let mut h = [0.0, 0.0, offset];
    for j in 0..3 {
        let phi = 2.0 * PI * (j + 1) as f64 / 3.0;
        let (s, co) = th[j].sin_cos();
        h[0] += f[j] * s * phi.cos();
        h[1] += f[j] * s * phi.sin();
        h[2] -= f[j] * co;
    }
    h
}

/// True when some `f_j > f_{j+1} + f_{j−1} + Δ/(2g)`, the condition for a
/// topologically trivial local band (`f` in raw units, not scaled by N/3).
pub fn locally_trivial(f: [f64; 3], delta: f64, g: f64) -> bool {
    let off = delta / (2.0 * g);
    (0..3).any(|j| f[j] > f[(j + 1) % 3] + f[(j + 2) % 3] + off)
}

#[derive(Clone, Debug, PartialEq)]
pub struct LocalCell {
    pub n: [f64; 3],
    pub f: [f64; 3],
    /// Local band splitting `4g·min_k |h(k)|`.
    pub gap: f64,
    /// Lower-band Chern number; `None` where the local gap closes.
    pub chern: Option<i32>,
    pub trivial: bool,
}

/// Minimum of `|h(k)|` over a k-grid plus the Γ, M and K points.
fn local_min_h(f: [f64; 3], offset: f64, grid: usize) -> f64 {
    let mag = |k: [f64; 2]| {
        let h = local_bloch_vector(f, offset, k);
        (h[0] * h[0] + h[1] * h[1] + h[2] * h[2]).sqrt()
    };
    let mut m = mag([0.0, 0.0]);
    for p in M_POINTS.iter().chain(&K_POINTS) {
        m = m.min(mag(*p));
    }
    for i in 0..grid {
        for j in 0..grid {
            m = m.min(mag(grid_k(i, j, grid)));
        }
    }
    m
}

pub fn local_cell(n: [f64; 3], delta: f64, g: f64, grid: usize) -> LocalCell {
    let f = hopping_weights(n);
    let offset = delta / (2.0 * g);
    let gap = 4.0 * g.abs() * local_min_h(f, offset, grid);
    let scale = f.iter().fold(0.0f64, |a, &b| a.max(b)).max(offset.abs()).max(1.0);
    let chern = chern_flux(|k| local_bloch_vector(f, offset, k), grid, Band::Lower, 1e-9 * scale)
        .ok()
        .map(|x| x.round() as i32);
    LocalCell {
        n,
        f,
        gap,
        chern,
        trivial: locally_trivial(f, delta, g),
    }
}

/// Local gap and Chern number on the simplex `Σ n_j = N`, sampled at
/// `n = N·(a, b, res−a−b)/res` for integers `a, b`.
pub fn local_phase_map(n_total: usize, delta: f64, g: f64, resolution: usize, grid: usize, exec: Exec) -> Result<Vec<LocalCell>> {
    if n_total < 3 {
        return Err(Error::InvalidArgument(format!("N = {n_total} below 3")));
    }
    if resolution == 0 {
        return Err(Error::InvalidArgument("resolution must be positive".into()));
    }
    let mut pts = Vec::new();
    let nf = n_total as f64;
    let r = resolution as f64;
    for a in 0..=resolution {
        for b in 0..=(resolution - a) {
            let c0 = resolution - a - b;
            pts.push([nf * a as f64 / r, nf * b as f64 / r, nf * c0 as f64 / r]);
        }
    }
    Ok(par::map(exec, pts.len(), |i| local_cell(pts[i], delta, g, grid)))
}

/// Boundary-mode path `ν(x) = (1 + 2cos 2πx)²/9`.
pub fn nu(x: f64) -> f64 {
    let v = 1.0 + 2.0 * (2.0 * PI * x).cos();
    v * v / 9.0
}

/// `n_j/N = ν(x − j/3)` for j = 1, 2, 3.
pub fn boundary_path(x: f64) -> [f64; 3] {
    [nu(x - 1.0 / 3.0), nu(x - 2.0 / 3.0), nu(x - 1.0)]
}

/// Boundary-mode averages `(d_bm/N, C_bm/gN²) = (1/√6 − 3/(2√2π), 2/(9√3))`.
pub fn lda_boundary_constants() -> (f64, f64) {
    (
        1.0 / 6f64.sqrt() - 3.0 / (2.0 * 2f64.sqrt() * PI),
        2.0 / (9.0 * SQ3),
    )
}

/// `2 n₁n₂n₃ N − Σ (n_a n_b)²`, zero on the gap-closing curve.
pub fn gap_curve_residual(n: [f64; 3]) -> f64 {
    let nn = n[0] + n[1] + n[2];
    2.0 * n[0] * n[1] * n[2] * nn - (n[0] * n[1]).powi(2) - (n[1] * n[2]).powi(2) - (n[2] * n[0]).powi(2)
}
