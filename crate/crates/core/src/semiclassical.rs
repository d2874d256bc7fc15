//! Classical limit: three classical boson amplitudes and a classical spin.
//!
//! `H = Δσ_z + 2 Re Σ_j b_j* b_{j+1} (g_{j−1}·σ)` with brackets
//! `{b_n, b_m*} = −iδ_nm` and `{σ_a, σ_b} = 2ε_abc σ_c`, so that
//! `ḃ_j = −i ∂H/∂b_j*` and `σ̇ = σ × B` with `B = −2∇_σ H`.

use crate::dynamics::period_from_crossings;
use crate::ode::{integrate as ode_integrate, OdeOptions};
use crate::operators::{coupling_vector, next, prev};
use crate::{c, Error, Result};
use num_complex::Complex64;

const SQ3: f64 = 1.7320508075688772;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClassicalParams {
    pub g: f64,
    pub delta: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClassicalState {
    pub b: [Complex64; 3],
    pub sigma: [f64; 3],
}

impl ClassicalState {
    /// `|b_j|²`.
    pub fn occupations(&self) -> [f64; 3] {
        [self.b[0].norm_sqr(), self.b[1].norm_sqr(), self.b[2].norm_sqr()]
    }

    pub fn photon_number(&self) -> f64 {
        self.occupations().iter().sum()
    }

    pub fn spin_length(&self) -> f64 {
        self.sigma.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    fn to_flat(self) -> [f64; 9] {
        let mut y = [0.0; 9];
        for j in 0..3 {
            y[2 * j] = self.b[j].re;
            y[2 * j + 1] = self.b[j].im;
            y[6 + j] = self.sigma[j];
        }
        y
    }

    fn from_flat(y: &[f64]) -> Self {
        ClassicalState {
            b: [c(y[0], y[1]), c(y[2], y[3]), c(y[4], y[5])],
            sigma: [y[6], y[7], y[8]],
        }
    }
}

fn couplings(g: f64) -> [[Complex64; 3]; 3] {
    [
        coupling_vector(1, g).unwrap(),
        coupling_vector(2, g).unwrap(),
        coupling_vector(3, g).unwrap(),
    ]
}

fn contract(v: &[Complex64; 3], s: &[f64; 3]) -> Complex64 {
    v[0] * s[0] + v[1] * s[1] + v[2] * s[2]
}

pub fn energy(state: &ClassicalState, p: &ClassicalParams) -> f64 {
    let v = couplings(p.g);
    let mut e = p.delta * state.sigma[2];
    for j in 1..=3 {
        let amp = state.b[j - 1].conj() * state.b[next(j) - 1];
        e += 2.0 * (amp * contract(&v[prev(j) - 1], &state.sigma)).re;
    }
    e
}

/// `∇_σ H`.
pub fn spin_gradient(state: &ClassicalState, p: &ClassicalParams) -> [f64; 3] {
    let v = couplings(p.g);
    let mut grad = [0.0, 0.0, p.delta];
    for j in 1..=3 {
        let amp = state.b[j - 1].conj() * state.b[next(j) - 1];
        for a in 0..3 {
            grad[a] += 2.0 * (amp * v[prev(j) - 1][a]).re;
        }
    }
    grad
}

pub fn eom_derivative(state: &ClassicalState, p: &ClassicalParams) -> ClassicalState {
    let v = couplings(p.g);
    let gs: [Complex64; 3] = [
        contract(&v[0], &state.sigma),
        contract(&v[1], &state.sigma),
        contract(&v[2], &state.sigma),
    ];
    let mut db = [c(0.0, 0.0); 3];
    for j in 1..=3 {
        let (jp, jm) = (next(j), prev(j));
        db[j - 1] = -crate::I * (state.b[jp - 1] * gs[jm - 1] + state.b[jm - 1] * gs[jp - 1].conj());
    }
    let grad = spin_gradient(state, p);
    let bf = [-2.0 * grad[0], -2.0 * grad[1], -2.0 * grad[2]];
    let s = state.sigma;
    ClassicalState {
        b: db,
        sigma: [s[1] * bf[2] - s[2] * bf[1], s[2] * bf[0] - s[0] * bf[2], s[0] * bf[1] - s[1] * bf[0]],
    }
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub params: ClassicalParams,
    pub times: Vec<f64>,
    pub states: Vec<ClassicalState>,
}

impl Trajectory {
    pub fn energies(&self) -> Vec<f64> {
        self.states.iter().map(|s| energy(s, &self.params)).collect()
    }

    pub fn sigma_component(&self, a: usize) -> Vec<f64> {
        self.states.iter().map(|s| s.sigma[a]).collect()
    }

    /// Largest change of `(Σ|b_j|², |σ|, H)` from their initial values.
    pub fn drifts(&self) -> (f64, f64, f64) {
        let s0 = &self.states[0];
        let (n0, l0, e0) = (s0.photon_number(), s0.spin_length(), energy(s0, &self.params));
        self.states.iter().fold((0.0f64, 0.0f64, 0.0f64), |(a, b, e), s| {
            (
                a.max((s.photon_number() - n0).abs()),
                b.max((s.spin_length() - l0).abs()),
                e.max((energy(s, &self.params) - e0).abs()),
            )
        })
    }
}

/// Integrate from `t = 0` through the sample times with an adaptive
/// Dormand–Prince 5(4) pair at absolute per-step tolerance `tol`.
pub fn integrate(state0: &ClassicalState, p: &ClassicalParams, times: &[f64], tol: f64) -> Result<Trajectory> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance {tol} must be positive")));
    }
    if times.first().is_some_and(|&t| t < 0.0) {
        return Err(Error::InvalidArgument("sample times must start at t ≥ 0".into()));
    }
    let mut states = Vec::with_capacity(times.len());
    ode_integrate(
        |_, y, dy| {
            let d = eom_derivative(&ClassicalState::from_flat(y), p).to_flat();
            dy.copy_from_slice(&d);
        },
        0.0,
        &state0.to_flat(),
        times,
        &OdeOptions::absolute(tol),
        |_, _, y| states.push(ClassicalState::from_flat(y)),
    )?;
    Ok(Trajectory {
        params: *p,
        times: times.to_vec(),
        states,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FixedPointSolution {
    pub n: f64,
    pub g: f64,
    pub epsilon: f64,
    /// `Δ = (√3 g/4)(1 + ε)`.
    pub delta: f64,
    pub b_z: f64,
    /// Real cavity amplitudes of the circulating state at `t = 0`, with
    /// `σ₀ = (1, 0, 0)`.
    pub x0: [f64; 3],
    pub period: f64,
    /// `|B_z − F(B_z)|` of the self-consistency map.
    pub residual: f64,
}

impl FixedPointSolution {
    pub fn initial_state(&self) -> ClassicalState {
        ClassicalState {
            b: [c(self.x0[0], 0.0), c(self.x0[1], 0.0), c(self.x0[2], 0.0)],
            sigma: [1.0, 0.0, 0.0],
        }
    }

    pub fn params(&self) -> ClassicalParams {
        ClassicalParams {
            g: self.g,
            delta: self.delta,
        }
    }
}

/// `T∞ (1 − (3√3/16) ε/N)`.
pub fn period_series_first_order(n: f64, epsilon: f64, g: f64) -> f64 {
    crate::period(g) * (1.0 - 3.0 * SQ3 / 16.0 * epsilon / n)
}

/// Circulating solution on the `σ_z = 0` manifold: solve
/// `B_z = −2Δ − 2gN + 6gN B_z²/(B_z² + 3g²/2)` by bisection around the
/// ε = 0 root `B₀ = −√3g/2`, bracket `B₀(1 ± 1/√N)`.
pub fn solve_circulating_point(n: f64, epsilon: f64, g: f64) -> Result<FixedPointSolution> {
    if !(n > 0.0) || g == 0.0 || !g.is_finite() {
        return Err(Error::InvalidArgument("need N > 0 and finite g ≠ 0".into()));
    }
    if !(epsilon.abs() <= 0.5) {
        return Err(Error::InvalidArgument(format!("detuning ε = {epsilon} outside [−0.5, 0.5]")));
    }
    let omega2 = 1.5 * g * g;
    let delta = SQ3 * g / 4.0 * (1.0 + epsilon);
    let map = |b: f64| -2.0 * delta - 2.0 * g * n + 6.0 * g * n * b * b / (b * b + omega2);
    let f = |b: f64| map(b) - b;
    let b0 = -SQ3 * g / 2.0;
    let w = 1.0 / n.sqrt();
    let (mut lo, mut hi) = (b0 * (1.0 - w), b0 * (1.0 + w));
    let (mut flo, fhi) = (f(lo), f(hi));
    if flo == 0.0 {
        hi = lo;
    } else if fhi == 0.0 {
        lo = hi;
    } else if flo.signum() == fhi.signum() {
        return Err(Error::NoRoot(lo.min(hi), lo.max(hi)));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            lo = mid;
            hi = mid;
            break;
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    let b_z = if f(lo).abs() <= f(hi).abs() { lo } else { hi };
    // Ω(0) = Im G_j at σ = (1, 0, 0).
    let om = [-0.5 * g, -0.5 * g, g];
    let u = 1.0 / SQ3;
    let scale = -g.signum() * n.sqrt() / (b_z * b_z + omega2).sqrt();
    let x0 = [scale * (b_z * u - om[0]), scale * (b_z * u - om[1]), scale * (b_z * u - om[2])];
    Ok(FixedPointSolution {
        n,
        g,
        epsilon,
        delta,
        b_z,
        x0,
        period: 2.0 * std::f64::consts::PI / b_z.abs(),
        residual: f(b_z).abs(),
    })
}

/// Period from the upward zero crossings of `σ_x`.
pub fn measure_period(traj: &Trajectory) -> Result<f64> {
    period_from_crossings(&traj.times, &traj.sigma_component(0))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrajectoryAverages {
    /// Photon number of the trajectory.
    pub n: f64,
    pub g: f64,
    /// Time average of `√(3/2) min_j |b_j|²`.
    pub d_avg: f64,
    /// Time average of `(n × ṅ)·u`.
    pub c_avg: f64,
}

impl TrajectoryAverages {
    pub fn d_over_n(&self) -> f64 {
        self.d_avg / self.n
    }

    pub fn c_over_gn2(&self) -> f64 {
        self.c_avg / (self.g * self.n * self.n)
    }
}

/// Trapezoid averages over a trajectory sampled on a uniform grid covering
/// exactly one period, `period`.
pub fn trajectory_averages(traj: &Trajectory, period: f64) -> Result<TrajectoryAverages> {
    let k = traj.times.len();
    if k < 3 || traj.states.len() != k {
        return Err(Error::InvalidArgument("trajectory too short".into()));
    }
    let span = traj.times[k - 1] - traj.times[0];
    if !(period > 0.0) || (span - period).abs() > 1e-9 * period {
        return Err(Error::InvalidArgument(format!("trajectory spans {span}, not one period {period}")));
    }
    let dt = span / (k - 1) as f64;
    if traj.times.windows(2).any(|w| ((w[1] - w[0]) - dt).abs() > 1e-9 * dt) {
        return Err(Error::InvalidArgument("trajectory samples must be uniform".into()));
    }
    let u = 1.0 / SQ3;
    let mut d_sum = 0.0;
    let mut c_sum = 0.0;
    for (i, s) in traj.states.iter().enumerate() {
        let w = if i == 0 || i == k - 1 { 0.5 } else { 1.0 };
        let n = s.occupations();
        d_sum += w * 1.5f64.sqrt() * n.iter().cloned().fold(f64::INFINITY, f64::min);
        let db = eom_derivative(s, &traj.params).b;
        let nd: Vec<f64> = (0..3).map(|j| 2.0 * (s.b[j].conj() * db[j]).re).collect();
        let cr = [n[1] * nd[2] - n[2] * nd[1], n[2] * nd[0] - n[0] * nd[2], n[0] * nd[1] - n[1] * nd[0]];
        c_sum += w * u * (cr[0] + cr[1] + cr[2]);
    }
    let m = (k - 1) as f64;
    Ok(TrajectoryAverages {
        n: traj.states[0].photon_number(),
        g: traj.params.g,
        d_avg: d_sum / m,
        c_avg: c_sum / m,
    })
}

/// One period of the circulating solution sampled at `samples + 1` points.
pub fn fixed_point_period(sol: &FixedPointSolution, samples: usize, tol: f64) -> Result<Trajectory> {
    let times: Vec<f64> = (0..=samples).map(|i| sol.period * i as f64 / samples as f64).collect();
    integrate(&sol.initial_state(), &sol.params(), &times, tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lda::{boundary_path, lda_boundary_constants};
    use crate::period;
    use proptest::prelude::*;
    use rand::{RngExt, SeedableRng};

    fn random_state(rng: &mut rand_pcg::Pcg64) -> ClassicalState {
        let mut r = || rng.random_range(-2.0..2.0f64);
        let mut s = [r(), r(), r()];
        let l = (s[0] * s[0] + s[1] * s[1] + s[2] * s[2]).sqrt();
        s.iter_mut().for_each(|x| *x /= l);
        ClassicalState {
            b: [c(r(), r()), c(r(), r()), c(r(), r())],
            sigma: s,
        }
    }

    fn grid(t_end: f64, n: usize) -> Vec<f64> {
        (0..=n).map(|i| t_end * i as f64 / n as f64).collect()
    }

    #[test]
    fn larmor_only_without_photons() {
        let p = ClassicalParams { g: 1.0, delta: 0.7 };
        let s = ClassicalState {
            b: [c(0.0, 0.0); 3],
            sigma: [0.6, 0.0, 0.8],
        };
        let d = eom_derivative(&s, &p);
        assert!(d.b.iter().all(|x| x.norm() == 0.0));
        // B = −2Δẑ, σ × B = (0, 2Δσ_x, 0).
        assert!(d.sigma[0].abs() < 1e-15 && (d.sigma[1] - 0.84).abs() < 1e-15 && d.sigma[2] == 0.0);
    }

    #[test]
    fn flow_conserves_energy_at_random_states() {
        let mut rng = rand_pcg::Pcg64::seed_from_u64(5);
        let p = ClassicalParams { g: 0.8, delta: 0.3 };
        for _ in 0..20 {
            let s = random_state(&mut rng);
            let d = eom_derivative(&s, &p);
            // dH/dt through the chain rule with the numerical gradient.
            let h = 1e-6;
            let mut dh = 0.0;
            for j in 0..3 {
                for (dir, comp) in [(c(1.0, 0.0), d.b[j].re), (c(0.0, 1.0), d.b[j].im)] {
                    let mut a = s;
                    let mut b = s;
                    a.b[j] += dir * h;
                    b.b[j] -= dir * h;
                    dh += (energy(&a, &p) - energy(&b, &p)) / (2.0 * h) * comp;
                }
                let mut a = s;
                let mut b = s;
                a.sigma[j] += h;
                b.sigma[j] -= h;
                dh += (energy(&a, &p) - energy(&b, &p)) / (2.0 * h) * d.sigma[j];
            }
            assert!(dh.abs() < 1e-6 * (1.0 + energy(&s, &p).abs()), "{dh}");
        }
    }

    #[test]
    fn derivative_matches_poisson_brackets_of_fd_gradient() {
        let mut rng = rand_pcg::Pcg64::seed_from_u64(9);
        let p = ClassicalParams { g: -1.1, delta: 0.4 };
        for _ in 0..20 {
            let s = random_state(&mut rng);
            let d = eom_derivative(&s, &p);
            let h = 1e-6;
            for j in 0..3 {
                // ∂H/∂b* = (∂_x + i∂_y)H / 2, ḃ = −i ∂H/∂b*.
                let part = |dir: Complex64| {
                    let (mut a, mut b) = (s, s);
                    a.b[j] += dir * h;
                    b.b[j] -= dir * h;
                    (energy(&a, &p) - energy(&b, &p)) / (2.0 * h)
                };
                let dstar = 0.5 * (c(part(c(1.0, 0.0)), 0.0) + crate::I * part(c(0.0, 1.0)));
                let want = -crate::I * dstar;
                let rel = (want - d.b[j]).norm() / d.b[j].norm().max(1.0);
                assert!(rel < 1e-6, "{rel}");
            }
            let mut grad = [0.0; 3];
            for a in 0..3 {
                let (mut x, mut y) = (s, s);
                x.sigma[a] += h;
                y.sigma[a] -= h;
                grad[a] = (energy(&x, &p) - energy(&y, &p)) / (2.0 * h);
            }
            let b = [-2.0 * grad[0], -2.0 * grad[1], -2.0 * grad[2]];
            let sg = s.sigma;
            let want = [sg[1] * b[2] - sg[2] * b[1], sg[2] * b[0] - sg[0] * b[2], sg[0] * b[1] - sg[1] * b[0]];
            for a in 0..3 {
                assert!((want[a] - d.sigma[a]).abs() / d.sigma[a].abs().max(1.0) < 1e-6);
            }
        }
    }

    #[test]
    fn conservation_over_five_periods() {
        let n: f64 = 30.0;
        let s0 = ClassicalState {
            b: [c(0.0, 0.0), c(0.0, 0.0), c(n.sqrt(), 0.0)],
            sigma: [1.0, 0.0, 0.0],
        };
        let p = ClassicalParams { g: 1.0, delta: 0.0 };
        let tr = integrate(&s0, &p, &grid(5.0 * period(1.0), 500), 1e-10).unwrap();
        let (dn, ds, de) = tr.drifts();
        assert!(dn < 1e-8, "{dn}");
        assert!(ds < 1e-8, "{ds}");
        assert!(de < 100.0 * 1e-10 * n, "{de}");
    }

    #[test]
    fn exact_root_at_zero_detuning() {
        for g in [1.0, -0.5, 2.0] {
            let sol = solve_circulating_point(40.0, 0.0, g).unwrap();
            assert!(sol.residual < 1e-10);
            assert!((sol.b_z + SQ3 * g / 2.0).abs() < 1e-14 * g.abs());
            assert!((sol.period - period(g)).abs() < 1e-12 * period(g));
            assert!(sol.x0[0].abs() < 1e-12 && sol.x0[1].abs() < 1e-12);
            assert!((sol.x0[2] - 40f64.sqrt()).abs() < 1e-12);
        }
    }

    #[test]
    fn period_series() {
        let n = 50.0;
        let sol = solve_circulating_point(n, 0.2, 1.0).unwrap();
        let series = period_series_first_order(n, 0.2, 1.0);
        assert!(((sol.period - series) / series).abs() < 5.0 / (n * n));
        let want = 0.2 / 16.0 * (3.0 / n).sqrt();
        assert!((sol.x0[0] - want).abs() < 1e-3 * want.max(1e-3) + 0.2 / n.powf(1.5));
        assert!(solve_circulating_point(n, 0.8, 1.0).is_err());
    }

    #[test]
    fn fixed_point_trajectory_follows_nu() {
        let sol = solve_circulating_point(30.0, 0.0, 1.0).unwrap();
        let tr = integrate(&sol.initial_state(), &sol.params(), &grid(sol.period, 300), 1e-11).unwrap();
        for (t, s) in tr.times.iter().zip(&tr.states) {
            let want = boundary_path(t / sol.period);
            let n = s.occupations();
            for j in 0..3 {
                assert!((n[j] - 30.0 * want[j]).abs() < 1e-4 * 30.0, "t={t}");
            }
            assert!(s.sigma[2].abs() < 1e-8);
        }
        let tm = integrate(&sol.initial_state(), &sol.params(), &grid(3.0 * sol.period, 3000), 1e-11).unwrap();
        assert!((measure_period(&tm).unwrap() / sol.period - 1.0).abs() < 1e-6);
    }

    #[test]
    fn averages_match_closed_forms() {
        let sol = solve_circulating_point(40.0, 0.0, 1.0).unwrap();
        let tr = fixed_point_period(&sol, 6000, 1e-11).unwrap();
        let av = trajectory_averages(&tr, sol.period).unwrap();
        let (d, cc) = lda_boundary_constants();
        assert!((av.d_over_n() - d).abs() < 1e-4 * d, "{}", av.d_over_n());
        assert!((av.c_over_gn2() - cc).abs() < 1e-4 * cc, "{}", av.c_over_gn2());
        assert!(trajectory_averages(&tr, 0.5 * sol.period).is_err());
    }

    #[test]
    fn frozen_state_has_no_circulation() {
        let s0 = ClassicalState {
            b: [c(0.0, 0.0), c(0.0, 0.0), c(5.0, 0.0)],
            sigma: [1.0, 0.0, 0.0],
        };
        let tr = integrate(&s0, &ClassicalParams { g: 0.0, delta: 0.0 }, &grid(2.0, 50), 1e-10).unwrap();
        assert_eq!(trajectory_averages(&tr, 2.0).unwrap().c_avg, 0.0);
    }

    #[test]
    fn period_shift_scales_as_inverse_n() {
        let shift = |n: f64| {
            let sol = solve_circulating_point(n, 0.3, 1.0).unwrap();
            let tr = integrate(&sol.initial_state(), &sol.params(), &grid(4.0 * sol.period, 8000), 1e-11).unwrap();
            period(1.0) - measure_period(&tr).unwrap()
        };
        let r = shift(30.0) / shift(60.0);
        assert!((r - 2.0).abs() < 0.4, "{r}");
    }

    #[test]
    fn sign_of_g_sets_direction() {
        let first_peak = |g: f64, j: usize| {
            let sol = solve_circulating_point(30.0, 0.0, g).unwrap();
            let tr = integrate(&sol.initial_state(), &sol.params(), &grid(0.9 * sol.period, 900), 1e-10).unwrap();
            let v: Vec<f64> = tr.states.iter().map(|s| s.occupations()[j]).collect();
            let k = (0..v.len()).max_by(|&a, &b| v[a].total_cmp(&v[b])).unwrap();
            tr.times[k] / sol.period
        };
        assert!(first_peak(1.0, 0) < first_peak(1.0, 1));
        assert!(first_peak(-1.0, 1) < first_peak(-1.0, 0));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn sigma_z_manifold_invariant(x in prop::array::uniform3(-3.0..3.0f64), phi in 0.0..6.3f64, g in 0.3..1.5f64) {
            let s0 = ClassicalState {
                b: [c(x[0], 0.0), c(x[1], 0.0), c(x[2], 0.0)],
                sigma: [phi.cos(), phi.sin(), 0.0],
            };
            let tr = integrate(&s0, &ClassicalParams { g, delta: 0.2 }, &grid(10.0, 20), 1e-10).unwrap();
            for s in &tr.states {
                prop_assert!(s.sigma[2].abs() < 1e-8);
            }
        }
    }
}
