//! Dormand–Prince 5(4) with adaptive steps, on flat `f64` state vectors.

use crate::{Error, Result};

#[derive(Clone, Copy, Debug)]
pub struct OdeOptions {
    /// Absolute part of the per-step error bound.
    pub atol: f64,
    /// Relative part, scaled by the max-norm of the state.
    pub rtol: f64,
    pub h_init: f64,
    pub h_max: f64,
    pub h_min: f64,
    pub max_steps: usize,
}

impl OdeOptions {
    pub fn absolute(tol: f64) -> Self {
        OdeOptions {
            atol: tol,
            rtol: 0.0,
            ..Default::default()
        }
    }

    pub fn relative(tol: f64) -> Self {
        OdeOptions {
            atol: 0.0,
            rtol: tol,
            ..Default::default()
        }
    }
}

impl Default for OdeOptions {
    fn default() -> Self {
        OdeOptions {
            atol: 1e-10,
            rtol: 0.0,
            h_init: 1e-3,
            h_max: f64::INFINITY,
            h_min: 1e-14,
            max_steps: 50_000_000,
        }
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct OdeStats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
/// Fifth minus fourth order weights.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// Integrate `y' = f(t, y)` from `t0` through every time in `t_out`
/// (increasing, all ≥ t0), calling `observe(k, t_out[k], y)` on arrival.
/// Steps are clipped to land on the output times exactly.
pub fn integrate<F, O>(mut f: F, t0: f64, y0: &[f64], t_out: &[f64], opts: &OdeOptions, mut observe: O) -> Result<OdeStats>
where
    F: FnMut(f64, &[f64], &mut [f64]),
    O: FnMut(usize, f64, &[f64]),
{
    let n = y0.len();
    let mut y = y0.to_vec();
    let mut k: Vec<Vec<f64>> = (0..7).map(|_| vec![0.0; n]).collect();
    let mut tmp = vec![0.0; n];
    let mut ynew = vec![0.0; n];
    let mut stats = OdeStats::default();
    let mut t = t0;
    let mut h = opts.h_init.min(opts.h_max);
    f(t, &y, &mut k[0]);
    stats.evaluations += 1;
    for (idx, &target) in t_out.iter().enumerate() {
        if target < t - 1e-12 * t.abs().max(1.0) {
            return Err(Error::InvalidArgument("output times must be increasing".into()));
        }
        while t < target {
            if stats.accepted + stats.rejected >= opts.max_steps {
                return Err(Error::Numerical(format!("step budget exhausted at t = {t}")));
            }
            let mut last = false;
            let mut hh = h;
            if t + hh >= target {
                hh = target - t;
                last = true;
            }
            for s in 1..7 {
                for i in 0..n {
                    let mut acc = 0.0;
                    for (j, kj) in k.iter().enumerate().take(s) {
                        acc += A[s][j] * kj[i];
                    }
                    tmp[i] = y[i] + hh * acc;
                }
                f(t + C[s] * hh, &tmp, &mut k[s]);
                stats.evaluations += 1;
                if s == 6 {
                    ynew.copy_from_slice(&tmp);
                }
            }
            let scale = y.iter().chain(ynew.iter()).fold(0.0f64, |m, v| m.max(v.abs()));
            let sc = opts.atol + opts.rtol * scale;
            let mut err = 0.0f64;
            for i in 0..n {
                let mut e = 0.0;
                for (j, kj) in k.iter().enumerate() {
                    e += E[j] * kj[i];
                }
                err = err.max((hh * e).abs());
            }
            let ratio = if sc > 0.0 { err / sc } else if err == 0.0 { 0.0 } else { f64::INFINITY };
            if ratio <= 1.0 {
                stats.accepted += 1;
                t = if last { target } else { t + hh };
                std::mem::swap(&mut y, &mut ynew);
                let (first, rest) = k.split_at_mut(1);
                first[0].copy_from_slice(&rest[5]);
                let grow = if ratio == 0.0 { 5.0 } else { (0.9 * ratio.powf(-0.2)).clamp(0.2, 5.0) };
                // Keep the natural step when the last one was clipped.
                if !last || hh * grow > h {
                    h = (hh * grow).min(opts.h_max);
                }
            } else {
                stats.rejected += 1;
                h = hh * (0.9 * ratio.powf(-0.2)).clamp(0.1, 1.0);
                if h < opts.h_min {
                    return Err(Error::StepUnderflow(t));
                }
            }
        }
        observe(idx, target, &y);
    }
    Ok(stats)
}
