//! Time evolution inside number sectors: circulation of Fock and coherent
//! states, rotated-state fidelity, revival detection and disorder-averaged
//! lifetime sweeps.

use crate::basis::{enumerate_sector, SectorBasis};
use crate::krylov::{Krylov, KrylovOptions, KrylovStats};
use crate::linalg::{dot, norm};
use crate::operators::{apply_c3, build_hamiltonian, hamiltonian, sample_perturbation, Frame, ModelParams, PerturbationSpec};
use crate::par::{self, Exec};
use crate::sparse::SparseOperator;
use crate::spectral::eigensolve;
use crate::{c, period, Error, Result};
use num_complex::Complex64;

/// `|+⟩ = (|↑⟩ + |↓⟩)/√2`.
pub fn plus_state() -> [Complex64; 2] {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    [c(s, 0.0), c(s, 0.0)]
}

fn check_qubit(q: &[Complex64; 2]) -> Result<()> {
    let n = (q[0].norm_sqr() + q[1].norm_sqr()).sqrt();
    if (n - 1.0).abs() > 1e-10 {
        return Err(Error::InvalidArgument(format!("qubit state norm {n} is not 1")));
    }
    Ok(())
}

fn source_site(n: usize, source: usize) -> Result<[usize; 3]> {
    if !(1..=3).contains(&source) {
        return Err(Error::InvalidArgument(format!("source cavity {source} outside 1..=3")));
    }
    let mut site = [0; 3];
    site[source - 1] = n;
    Ok(site)
}

/// Propagation back end for one sector.
#[derive(Clone, Copy, Debug)]
pub enum Method {
    /// Dense eigendecomposition when the sector dimension is at most
    /// [`EIGEN_MAX_DIM`], Krylov otherwise.
    Auto,
    Eigen,
    Krylov(KrylovOptions),
}

impl Default for Method {
    fn default() -> Self {
        Method::Auto
    }
}

pub const EIGEN_MAX_DIM: usize = 500;

#[derive(Clone, Debug, Default)]
pub struct EvolveOptions {
    pub method: Method,
    /// Circulation period used to pick the rotated reference state for the
    /// fidelity column. Without it the reference is the initial state.
    pub period: Option<f64>,
    /// Indices into the time grid at which to record per-site probabilities.
    pub snapshots: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub t: f64,
    /// `(n₁, n₂, n₃, probability)` with the qubit traced out.
    pub probs: Vec<([usize; 3], f64)>,
}

#[derive(Clone, Debug, Default)]
pub struct TimeSeries {
    pub times: Vec<f64>,
    pub n_exp: [Vec<f64>; 3],
    pub sigma_exp: [Vec<f64>; 3],
    /// `|⟨U_C3^k ψ₀|ψ(t)⟩|²` with `k = round(3t/T) mod 3`.
    pub fidelity: Vec<f64>,
    pub norm: Vec<f64>,
    pub snapshots: Vec<Snapshot>,
    pub krylov: KrylovStats,
}

impl TimeSeries {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    fn with_capacity(times: &[f64]) -> Self {
        let z = || vec![0.0; times.len()];
        TimeSeries {
            times: times.to_vec(),
            n_exp: [z(), z(), z()],
            sigma_exp: [z(), z(), z()],
            fidelity: z(),
            norm: z(),
            snapshots: Vec::new(),
            krylov: KrylovStats::default(),
        }
    }

    /// `Σ_j ⟨n̂_j⟩` at every time.
    pub fn total_number(&self) -> Vec<f64> {
        (0..self.len()).map(|k| (0..3).map(|j| self.n_exp[j][k]).sum()).collect()
    }
}

/// Unnormalized observables of one state.
#[derive(Clone, Copy, Debug, Default)]
struct Sample {
    n: [f64; 3],
    s: [f64; 3],
    norm2: f64,
    overlap: Complex64,
}

fn measure(basis: &SectorBasis, psi: &[Complex64], reference: &[Complex64]) -> Sample {
    let mut out = Sample::default();
    for (k, pair) in psi.chunks_exact(2).enumerate() {
        let (u, d) = (pair[0], pair[1]);
        let p = u.norm_sqr() + d.norm_sqr();
        let site = basis.label(2 * k).n;
        for j in 0..3 {
            out.n[j] += p * site[j] as f64;
        }
        let x = u.conj() * d;
        out.s[0] += 2.0 * x.re;
        out.s[1] += 2.0 * x.im;
        out.s[2] += u.norm_sqr() - d.norm_sqr();
        out.norm2 += p;
    }
    out.overlap = dot(reference, psi);
    out
}

fn site_probabilities(basis: &SectorBasis, psi: &[Complex64]) -> Vec<([usize; 3], f64)> {
    psi.chunks_exact(2)
        .enumerate()
        .map(|(k, p)| (basis.label(2 * k).n, p[0].norm_sqr() + p[1].norm_sqr()))
        .collect()
}

fn reference_index(t: f64, period: Option<f64>) -> usize {
    match period {
        Some(tp) if tp > 0.0 => ((3.0 * t / tp).round() as i64).rem_euclid(3) as usize,
        _ => 0,
    }
}

fn validate(basis: &SectorBasis, h: &SparseOperator, psi0: &[Complex64], times: &[f64]) -> Result<()> {
    if h.dim() != basis.dim() || psi0.len() != basis.dim() {
        return Err(Error::DimensionMismatch {
            expected: basis.dim(),
            got: if h.dim() != basis.dim() { h.dim() } else { psi0.len() },
        });
    }
    let nrm = norm(psi0);
    if (nrm - 1.0).abs() > 1e-8 {
        return Err(Error::InvalidArgument(format!("initial state norm {nrm} is not 1")));
    }
    if times.iter().any(|t| !t.is_finite()) || times.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidArgument("times must be finite and non-decreasing".into()));
    }
    Ok(())
}

/// Drive `exp(−iHt)ψ₀` through `times`, handing each state to `visit`.
fn propagate_each<V>(h: &SparseOperator, psi0: &[Complex64], times: &[f64], method: Method, mut visit: V) -> Result<KrylovStats>
where
    V: FnMut(usize, &[Complex64]),
{
    let method = match method {
        Method::Auto if h.dim() <= EIGEN_MAX_DIM => Method::Eigen,
        Method::Auto => Method::Krylov(KrylovOptions::default()),
        m => m,
    };
    match method {
        Method::Eigen => {
            let spec = eigensolve(h)?;
            let coef = spec.states.adjoint_matvec(psi0);
            let mut tmp = vec![c(0.0, 0.0); coef.len()];
            for (k, &t) in times.iter().enumerate() {
                for ((x, c0), e) in tmp.iter_mut().zip(&coef).zip(&spec.energies) {
                    *x = c0 * Complex64::from_polar(1.0, -e * t);
                }
                visit(k, &spec.states.matvec(&tmp));
            }
            Ok(KrylovStats::default())
        }
        Method::Krylov(opts) => {
            let mut kr = Krylov::new(h.dim(), opts);
            let mut psi = psi0.to_vec();
            let mut stats = KrylovStats::default();
            let t0 = times.first().copied().unwrap_or(0.0);
            stats.merge(kr.propagate(h, &mut psi, t0)?);
            let offsets: Vec<f64> = times.iter().map(|t| t - t0).collect();
            stats.merge(kr.propagate_sampled(h, &mut psi, &offsets, visit)?);
            Ok(stats)
        }
        Method::Auto => unreachable!(),
    }
}

/// Per-time samples of one sector, plus snapshots.
fn sector_samples(
    basis: &SectorBasis,
    h: &SparseOperator,
    psi0: &[Complex64],
    times: &[f64],
    opts: &EvolveOptions,
) -> Result<(Vec<Sample>, Vec<Snapshot>, KrylovStats)> {
    validate(basis, h, psi0, times)?;
    if let Some(&bad) = opts.snapshots.iter().find(|&&i| i >= times.len()) {
        return Err(Error::InvalidArgument(format!("snapshot index {bad} outside the time grid")));
    }
    let refs: Vec<Vec<Complex64>> = (0..3).map(|k| apply_c3(basis, psi0, k)).collect();
    let mut samples = vec![Sample::default(); times.len()];
    let mut snaps = Vec::new();
    let stats = propagate_each(h, psi0, times, opts.method, |k, psi| {
        let r = reference_index(times[k], opts.period);
        samples[k] = measure(basis, psi, &refs[r]);
        if opts.snapshots.contains(&k) {
            snaps.push(Snapshot {
                t: times[k],
                probs: site_probabilities(basis, psi),
            });
        }
    })?;
    Ok((samples, snaps, stats))
}

fn fill(series: &mut TimeSeries, k: usize, s: &Sample, overlap: Complex64) {
    for j in 0..3 {
        series.n_exp[j][k] = s.n[j];
        series.sigma_exp[j][k] = s.s[j];
    }
    series.norm[k] = s.norm2.sqrt();
    series.fidelity[k] = overlap.norm_sqr();
}

/// `|ψ(t)⟩ = exp(−iHt)|ψ₀⟩` sampled on `times`.
pub fn evolve_sector(
    basis: &SectorBasis,
    h: &SparseOperator,
    psi0: &[Complex64],
    times: &[f64],
    opts: &EvolveOptions,
) -> Result<TimeSeries> {
    let (samples, snaps, stats) = sector_samples(basis, h, psi0, times, opts)?;
    let mut series = TimeSeries::with_capacity(times);
    for (k, s) in samples.iter().enumerate() {
        fill(&mut series, k, s, s.overlap);
    }
    series.snapshots = snaps;
    series.krylov = stats;
    Ok(series)
}

/// `|n⟩ ⊗ qubit` with all `N` photons in cavity `source`.
pub fn fock_start(basis: &SectorBasis, qubit: [Complex64; 2], source: usize) -> Result<Vec<Complex64>> {
    check_qubit(&qubit)?;
    basis.product_state(source_site(basis.n_total(), source)?, qubit)
}

/// Evolve `|N in cavity source⟩ ⊗ qubit` under the rotating-frame model.
pub fn circulate_fock(
    params: &ModelParams,
    times: &[f64],
    qubit: [Complex64; 2],
    source: usize,
    method: Method,
) -> Result<TimeSeries> {
    let basis = enumerate_sector(params.n);
    let h = hamiltonian(&basis, params)?;
    let psi0 = fock_start(&basis, qubit, source)?;
    let opts = EvolveOptions {
        method,
        period: Some(period(params.g)),
        snapshots: Vec::new(),
    };
    evolve_sector(&basis, &h, &psi0, times, &opts)
}

/// Photon-number sectors kept for a coherent state and their Poisson
/// weights.
#[derive(Clone, Debug, PartialEq)]
pub struct PoissonWindow {
    pub sectors: Vec<(usize, f64)>,
    pub omitted: f64,
}

/// Smallest contiguous window of sectors around the mode of a Poisson
/// distribution with mean `mean` whose omitted weight is below `tail_tol`.
pub fn poisson_window(mean: f64, tail_tol: f64) -> Result<PoissonWindow> {
    if !(mean > 0.0 && mean.is_finite()) {
        return Err(Error::InvalidArgument(format!("mean photon number {mean} must be positive")));
    }
    if !(tail_tol > 0.0 && tail_tol < 1.0) {
        return Err(Error::InvalidArgument(format!("tail tolerance {tail_tol} outside (0, 1)")));
    }
    let ln_mean = mean.ln();
    // log p_N built by recurrence so that no factorial overflows.
    let weight = |n: usize| {
        let lf: f64 = (1..=n).map(|k| (k as f64).ln()).sum();
        (-mean + n as f64 * ln_mean - lf).exp()
    };
    let mode = mean.floor() as usize;
    let (mut lo, mut hi) = (mode, mode);
    let mut kept = weight(mode);
    while 1.0 - kept >= tail_tol {
        let below = if lo > 0 { weight(lo - 1) } else { 0.0 };
        let above = weight(hi + 1);
        if below == 0.0 && above == 0.0 {
            break;
        }
        if below > above {
            lo -= 1;
            kept += below;
        } else {
            hi += 1;
            kept += above;
        }
    }
    if hi - lo + 1 < 3 {
        return Err(Error::InvalidArgument(format!(
            "tail tolerance {tail_tol} keeps only {} sectors",
            hi - lo + 1
        )));
    }
    Ok(PoissonWindow {
        sectors: (lo..=hi).map(|n| (n, weight(n))).collect(),
        omitted: (1.0 - kept).max(0.0),
    })
}

#[derive(Clone, Debug)]
pub struct CoherentSeries {
    pub series: TimeSeries,
    pub window: PoissonWindow,
}

/// Evolve `|α in cavity source⟩ ⊗ qubit`, one independent run per photon
/// number sector. Reported observables are the Poisson-weighted sums.
#[allow(clippy::too_many_arguments)]
pub fn circulate_coherent(
    g: f64,
    delta: f64,
    alpha: Complex64,
    times: &[f64],
    tail_tol: f64,
    qubit: [Complex64; 2],
    source: usize,
    method: Method,
    exec: Exec,
) -> Result<CoherentSeries> {
    check_qubit(&qubit)?;
    source_site(0, source)?;
    let window = poisson_window(alpha.norm_sqr(), tail_tol)?;
    let tp = period(g);
    let runs = par::try_map(exec, window.sectors.len(), |i| {
        let n = window.sectors[i].0;
        let basis = enumerate_sector(n);
        let h = hamiltonian(&basis, &ModelParams::new(n, g, delta))?;
        let psi0 = fock_start(&basis, qubit, source)?;
        let opts = EvolveOptions {
            method,
            period: Some(tp),
            snapshots: Vec::new(),
        };
        sector_samples(&basis, &h, &psi0, times, &opts)
    })?;
    let mut series = TimeSeries::with_capacity(times);
    for k in 0..times.len() {
        let mut acc = Sample::default();
        for ((_, w), (samples, _, _)) in window.sectors.iter().zip(&runs) {
            let s = &samples[k];
            for j in 0..3 {
                acc.n[j] += w * s.n[j];
                acc.s[j] += w * s.s[j];
            }
            acc.norm2 += w * s.norm2;
            acc.overlap += w * s.overlap;
        }
        fill(&mut series, k, &acc, acc.overlap);
    }
    for (_, _, st) in &runs {
        series.krylov.merge(*st);
    }
    Ok(CoherentSeries { series, window })
}

/// `|⟨ψ(t)| U_C3ⁿ |ψ₀⟩|²`.
pub fn rotated_fidelity(basis: &SectorBasis, state_t: &[Complex64], reference: &[Complex64], n_thirds: usize) -> Result<f64> {
    if state_t.len() != basis.dim() || reference.len() != basis.dim() {
        return Err(Error::DimensionMismatch {
            expected: basis.dim(),
            got: if state_t.len() != basis.dim() { state_t.len() } else { reference.len() },
        });
    }
    let rotated = apply_c3(basis, reference, n_thirds % 3);
    Ok(dot(state_t, &rotated).norm_sqr())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RevivalRecord {
    pub q: usize,
    pub t_q: f64,
    pub peak: f64,
}

/// Maximum of `values` inside each window `((q−½)T, (q+½)T)`, q = 1..=q_max.
pub fn detect_revivals(times: &[f64], values: &[f64], period: f64, q_max: usize) -> Result<Vec<RevivalRecord>> {
    if times.len() != values.len() {
        return Err(Error::DimensionMismatch {
            expected: times.len(),
            got: values.len(),
        });
    }
    if !(period > 0.0) || q_max == 0 {
        return Err(Error::InvalidArgument("need a positive period and q_max ≥ 1".into()));
    }
    let end = (q_max as f64 + 0.5) * period;
    let last = times.last().copied().unwrap_or(f64::NEG_INFINITY);
    if last < end * (1.0 - 1e-12) {
        return Err(Error::InvalidArgument(format!("revival window ends at {end}, series ends at {last}")));
    }
    let mut out = Vec::with_capacity(q_max);
    for q in 1..=q_max {
        let (a, b) = ((q as f64 - 0.5) * period, (q as f64 + 0.5) * period);
        let mut best: Option<(f64, f64)> = None;
        for (&t, &v) in times.iter().zip(values) {
            if t > a && t < b && best.is_none_or(|(_, p)| v > p) {
                best = Some((t, v));
            }
        }
        let (t_q, peak) = best.ok_or_else(|| Error::InvalidArgument(format!("no samples in revival window {q}")))?;
        out.push(RevivalRecord { q, t_q, peak });
    }
    Ok(out)
}

/// Distance of a run from the semiclassical boundary-mode motion
/// `⟨n̂_j⟩ = N̄·ν(t/T − j/3)`, `⟨σ⟩ = (cos 2πt/T, sin 2πt/T, 0)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PathDeviation {
    /// Largest `|⟨n̂_j⟩/N̄ − ν(t/T − j/3)|` over samples with `t ≤ occupation_window`.
    pub max_occupation: f64,
    /// RMS distance of `(⟨σ_x⟩, ⟨σ_y⟩)` from the circle point, all samples.
    pub circle_rms: f64,
}

pub fn path_deviation(series: &TimeSeries, mean_n: f64, period: f64, occupation_window: f64) -> Result<PathDeviation> {
    if series.is_empty() || !(mean_n > 0.0) || !(period > 0.0) {
        return Err(Error::InvalidArgument("need samples, N̄ > 0 and T > 0".into()));
    }
    let mut max_occupation: f64 = 0.0;
    let mut sq = 0.0;
    for (k, &t) in series.times.iter().enumerate() {
        let x = t / period;
        if t <= occupation_window {
            let nu = crate::lda::boundary_path(x);
            for j in 0..3 {
                max_occupation = max_occupation.max((series.n_exp[j][k] / mean_n - nu[j]).abs());
            }
        }
        let ph = 2.0 * std::f64::consts::PI * x;
        sq += (series.sigma_exp[0][k] - ph.cos()).powi(2) + (series.sigma_exp[1][k] - ph.sin()).powi(2);
    }
    Ok(PathDeviation {
        max_occupation,
        circle_rms: (sq / series.len() as f64).sqrt(),
    })
}

/// Mean spacing of successive upward zero crossings, located by linear
/// interpolation.
pub fn period_from_crossings(times: &[f64], values: &[f64]) -> Result<f64> {
    let mut cross = Vec::new();
    for k in 1..times.len().min(values.len()) {
        let (a, b) = (values[k - 1], values[k]);
        if a < 0.0 && b >= 0.0 {
            cross.push(times[k - 1] + (times[k] - times[k - 1]) * (-a) / (b - a));
        }
    }
    if cross.len() < 2 {
        return Err(Error::Numerical(format!("{} upward zero crossings, need 2", cross.len())));
    }
    Ok((cross[cross.len() - 1] - cross[0]) / (cross.len() - 1) as f64)
}

#[derive(Clone, Debug)]
pub struct LifetimeConfig {
    pub ns: Vec<usize>,
    pub g: f64,
    pub delta: f64,
    pub perturbation: PerturbationSpec,
    pub realizations: usize,
    pub q_max: usize,
    pub samples_per_period: usize,
    /// Revival peaks below `threshold·N` mark the end of circulation.
    pub threshold: f64,
    pub source: usize,
    pub krylov: KrylovOptions,
}

impl Default for LifetimeConfig {
    fn default() -> Self {
        LifetimeConfig {
            ns: vec![16, 24, 32],
            g: 1.0,
            delta: 0.0,
            perturbation: PerturbationSpec::none(),
            realizations: 100,
            q_max: 20,
            samples_per_period: 64,
            threshold: 0.9,
            source: 3,
            krylov: KrylovOptions::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SectorLifetime {
    pub n: usize,
    /// Realization-averaged revival times `t̄_q`, q = 1..=q_max.
    pub t_mean: Vec<f64>,
    /// Realization-averaged `peak_q/N`.
    pub peak_mean: Vec<f64>,
    /// Threshold crossing, linearly interpolated in the averaged peaks
    /// (with `(0, 1)` as the q = 0 point). `None` when censored.
    pub t_star: Option<f64>,
    /// First `t̄_q` whose averaged peak is below threshold.
    pub t_star_discrete: Option<f64>,
}

impl SectorLifetime {
    pub fn censored(&self) -> bool {
        self.t_star.is_none()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LifetimeResult {
    pub sectors: Vec<SectorLifetime>,
    /// Fitted exponent of `t* ∝ N^β`; `None` with fewer than two
    /// uncensored sizes.
    pub beta: Option<f64>,
    pub beta_discrete: Option<f64>,
}

fn validate_lifetime(cfg: &LifetimeConfig) -> Result<()> {
    if cfg.realizations < 10 {
        return Err(Error::InvalidArgument(format!("{} realizations, need at least 10", cfg.realizations)));
    }
    if cfg.ns.is_empty() || cfg.ns.iter().any(|&n| n == 0) {
        return Err(Error::InvalidArgument("sector list must hold positive N".into()));
    }
    if cfg.samples_per_period < 40 {
        return Err(Error::InvalidArgument(format!(
            "{} samples per period, need at least 40",
            cfg.samples_per_period
        )));
    }
    if cfg.q_max == 0 || !(cfg.threshold > 0.0 && cfg.threshold < 1.0) || cfg.g == 0.0 {
        return Err(Error::InvalidArgument("need q_max ≥ 1, threshold in (0, 1) and g ≠ 0".into()));
    }
    Ok(())
}

/// Revival records of one disorder realization in sector `n`.
pub fn realization_revivals(cfg: &LifetimeConfig, n: usize, realization: u64) -> Result<Vec<RevivalRecord>> {
    let tp = period(cfg.g);
    let spp = cfg.samples_per_period;
    let steps = ((cfg.q_max as f64 + 0.5) * spp as f64).ceil() as usize;
    let times: Vec<f64> = (0..=steps).map(|i| i as f64 * tp / spp as f64).collect();
    let basis = enumerate_sector(n);
    let params = ModelParams::new(n, cfg.g, cfg.delta);
    let pert = sample_perturbation(&cfg.perturbation, realization)?;
    let h = build_hamiltonian(&basis, &params, &pert, Frame::Rotating)?;
    let psi0 = fock_start(&basis, plus_state(), cfg.source)?;
    let mut values = vec![0.0; times.len()];
    let occ: Vec<f64> = basis.labels().iter().map(|l| l.n[cfg.source - 1] as f64).collect();
    propagate_each(&h, &psi0, &times, Method::Krylov(cfg.krylov), |k, psi| {
        values[k] = psi.iter().zip(&occ).map(|(a, o)| a.norm_sqr() * o).sum::<f64>() / n as f64;
    })?;
    detect_revivals(&times, &values, tp, cfg.q_max)
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn power_law_exponent(points: &[(f64, f64)]) -> Option<f64> {
    if points.len() < 2 {
        return None;
    }
    let pts: Vec<(f64, f64)> = points.iter().map(|(x, y)| (x.ln(), y.ln())).collect();
    let m = pts.len() as f64;
    let (mx, my) = pts.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x / m, b + y / m));
    let sxx: f64 = pts.iter().map(|(x, _)| (x - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx == 0.0 {
        None
    } else {
        Some(sxy / sxx)
    }
}

/// Threshold crossing of the averaged peaks, see [`SectorLifetime`].
pub fn crossing_time(t_mean: &[f64], peak_mean: &[f64], threshold: f64) -> (Option<f64>, Option<f64>) {
    let q = match peak_mean.iter().position(|&p| p < threshold) {
        Some(q) => q,
        None => return (None, None),
    };
    let (t0, p0) = if q == 0 { (0.0, 1.0) } else { (t_mean[q - 1], peak_mean[q - 1]) };
    let (t1, p1) = (t_mean[q], peak_mean[q]);
    let interp = if p0 > p1 { t0 + (t1 - t0) * (p0 - threshold) / (p0 - p1) } else { t1 };
    (Some(interp), Some(t1))
}

/// Disorder-averaged revival decay for every N, and the scaling exponent
/// of the lifetime. Realizations run as independent tasks; averages are
/// reduced in realization order.
pub fn lifetime_sweep(cfg: &LifetimeConfig, exec: Exec) -> Result<LifetimeResult> {
    validate_lifetime(cfg)?;
    source_site(0, cfg.source)?;
    let r = cfg.realizations;
    let tasks: Vec<(usize, u64)> = cfg.ns.iter().flat_map(|&n| (0..r as u64).map(move |k| (n, k))).collect();
    let records = par::try_map(exec, tasks.len(), |i| realization_revivals(cfg, tasks[i].0, tasks[i].1))?;
    let mut sectors = Vec::with_capacity(cfg.ns.len());
    for (s, &n) in cfg.ns.iter().enumerate() {
        let mut t_mean = vec![0.0; cfg.q_max];
        let mut peak_mean = vec![0.0; cfg.q_max];
        for rec in &records[s * r..(s + 1) * r] {
            for (q, x) in rec.iter().enumerate() {
                t_mean[q] += x.t_q;
                peak_mean[q] += x.peak;
            }
        }
        for q in 0..cfg.q_max {
            t_mean[q] /= r as f64;
            peak_mean[q] /= r as f64;
        }
        let (t_star, t_star_discrete) = crossing_time(&t_mean, &peak_mean, cfg.threshold);
        sectors.push(SectorLifetime {
            n,
            t_mean,
            peak_mean,
            t_star,
            t_star_discrete,
        });
    }
    let fit = |pick: fn(&SectorLifetime) -> Option<f64>| {
        let pts: Vec<(f64, f64)> = sectors.iter().filter_map(|s| pick(s).map(|t| (s.n as f64, t))).collect();
        power_law_exponent(&pts)
    };
    let beta = fit(|s| s.t_star);
    let beta_discrete = fit(|s| s.t_star_discrete);
    Ok(LifetimeResult {
        sectors,
        beta,
        beta_discrete,
    })
}
