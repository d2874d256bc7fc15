//! One function per subcommand: resolved config in, artifacts out.

use crate::config::Config;
use crate::output::{Artifacts, Header, Table};
use crate::CliError;
use photon_lattice::basis::{enumerate_sector, plane_coords_f};
use photon_lattice::dynamics::{
    circulate_coherent, circulate_fock, detect_revivals, lifetime_sweep, path_deviation, period_from_crossings, plus_state,
    LifetimeConfig, Method, TimeSeries,
};
use photon_lattice::floquet::{
    compare_with_static, default_drive_solution, magnus_first_order, alpha_match_residual, target_match_residual,
    validity_report, StroboscopicOptions, TruncatedProductBasis,
};
use photon_lattice::krylov::KrylovOptions;
use photon_lattice::lda::{chern_number, lda_boundary_constants, local_phase_map};
use photon_lattice::operators::{c3_residual, hamiltonian, p_antisymmetry_residual, ModelParams, PerturbationSpec};
use photon_lattice::par::{self, Exec};
use photon_lattice::router::{circulation_period, evolve_router, late_imbalance, RouterBasis, RouterConfig};
use photon_lattice::semiclassical::{
    fixed_point_period, integrate, measure_period, period_series_first_order, solve_circulating_point, trajectory_averages,
};
use photon_lattice::spectral::{sector_diagnostics, BandOptions};
use photon_lattice::{period, Complex64, Error};
use serde_json::{json, Value};
use std::path::PathBuf;

pub const COMMANDS: [&str; 9] = [
    "spectrum",
    "chern",
    "phase-map",
    "evolve",
    "coherent",
    "lifetime",
    "semiclassical",
    "floquet",
    "route",
];

pub fn run(command: &str, cfg: &Config, exec: Exec) -> Result<Vec<PathBuf>, CliError> {
    match command {
        "spectrum" => spectrum(cfg),
        "chern" => chern(cfg, exec),
        "phase-map" => phase_map(cfg, exec),
        "evolve" => evolve(cfg),
        "coherent" => coherent(cfg, exec),
        "lifetime" => lifetime(cfg, exec),
        "semiclassical" => semiclassical(cfg),
        "floquet" => floquet(cfg),
        "route" => route(cfg),
        other => Err(CliError::Config(format!("unknown command '{other}'"))),
    }
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

fn qubit_state(name: &str) -> Result<[Complex64; 2], CliError> {
    let one = Complex64::new(1.0, 0.0);
    let zero = Complex64::new(0.0, 0.0);
    match name {
        "plus" => Ok(plus_state()),
        "up" => Ok([one, zero]),
        "down" => Ok([zero, one]),
        other => Err(invalid(format!("qubit '{other}' is not plus, up or down"))),
    }
}

fn method(name: &str) -> Result<Method, CliError> {
    match name {
        "auto" => Ok(Method::Auto),
        "eigen" => Ok(Method::Eigen),
        "krylov" => Ok(Method::Krylov(KrylovOptions::default())),
        other => Err(invalid(format!("method '{other}' is not auto, eigen or krylov"))),
    }
}

fn time_grid(t_final: f64, samples: usize) -> Result<Vec<f64>, CliError> {
    if samples == 0 || !(t_final > 0.0) {
        return Err(invalid("need samples ≥ 1 and a positive final time"));
    }
    Ok((0..=samples).map(|k| t_final * k as f64 / samples as f64).collect())
}

fn finish(art: &Artifacts, header: &Header, tables: &[(&str, Table)], summary: Value) -> Result<Vec<PathBuf>, CliError> {
    let mut out = Vec::new();
    for (suffix, t) in tables {
        out.push(art.write_csv(suffix, header, t)?);
    }
    out.push(art.write_json(header, summary)?);
    Ok(out)
}

fn header<'a>(command: &'a str, cfg: &'a Config, seed: Option<u64>) -> Header<'a> {
    Header { command, seed, config: cfg }
}

fn spectrum(cfg: &Config) -> Result<Vec<PathBuf>, CliError> {
    let s = &cfg.spectrum;
    let (g, delta) = (cfg.model.g, cfg.model.delta);
    let basis = enumerate_sector(s.n);
    let params = ModelParams::new(s.n, g, delta);
    let h = hamiltonian(&basis, &params)?;
    let opts = BandOptions {
        bulk_distance: s.bulk_distance,
        band_fraction: s.band_fraction,
        chirality_fraction: (s.chirality_fraction > 0.0).then_some(s.chirality_fraction),
    };
    let (spec, diag) = sector_diagnostics(&basis, &h, &params, &opts)?;
    let mut t = Table::new(&["index", "energy", "d_over_n", "c_over_gn2", "boundary"]);
    for k in 0..spec.dim() {
        t.push(vec![
            k.into(),
            spec.energies[k].into(),
            diag.distance[k].into(),
            diag.chirality[k].into(),
            diag.is_boundary(k).into(),
        ]);
    }
    let (d_lda, c_lda) = lda_boundary_constants();
    let summary = json!({
        "n": s.n,
        "dim": spec.dim(),
        "gap_estimate": diag.gap_estimate,
        "gap_over_g_sqrt_n": diag.gap_estimate / (g.abs() * (s.n as f64).sqrt()),
        "boundary_states": diag.boundary_indices.len(),
        "band_mean_d_over_n": diag.band_mean_distance(),
        "band_mean_c_over_gn2": diag.band_mean_chirality(),
        "lda_d_over_n": d_lda,
        "lda_c_over_gn2": c_lda,
        "eigen_residual": spec.residual(&h),
        "c3_residual": c3_residual(&basis, &h),
        "p_residual": p_antisymmetry_residual(&h),
    });
    let art = Artifacts::new(cfg, "spectrum");
    finish(&art, &header("spectrum", cfg, None), &[("", t)], summary)
}

fn chern(cfg: &Config, exec: Exec) -> Result<Vec<PathBuf>, CliError> {
    let c = &cfg.chern;
    if !(c.step > 0.0) || c.m_to < c.m_from {
        return Err(invalid("need step > 0 and m_to ≥ m_from"));
    }
    let count = ((c.m_to - c.m_from) / c.step + 1e-9).floor() as usize + 1;
    // Snap to 12 decimals so that grid points print as typed.
    let ms: Vec<f64> = (0..count).map(|k| ((c.m_from + c.step * k as f64) * 1e12).round() / 1e12).collect();
    let values = par::try_map(exec, count, |k| match chern_number(ms[k], c.grid) {
        Ok(v) => Ok(Some(v)),
        Err(Error::Gapless(_)) => Ok(None),
        Err(e) => Err(e),
    })?;
    let mut t = Table::new(&["m", "chern", "gapless"]);
    let mut phases: Vec<Value> = Vec::new();
    let mut run: Option<(f64, f64, Option<i32>)> = None;
    for (&m, &v) in ms.iter().zip(&values) {
        t.push(vec![m.into(), v.into(), v.is_none().into()]);
        run = match run {
            Some((a, _, w)) if w == v => Some((a, m, w)),
            Some((a, b, w)) => {
                phases.push(json!({"m_from": a, "m_to": b, "chern": w}));
                Some((m, m, v))
            }
            None => Some((m, m, v)),
        };
    }
    if let Some((a, b, w)) = run {
        phases.push(json!({"m_from": a, "m_to": b, "chern": w}));
    }
    let summary = json!({ "points": count, "grid": c.grid, "phases": phases });
    let art = Artifacts::new(cfg, "chern");
    finish(&art, &header("chern", cfg, None), &[("", t)], summary)
}

fn phase_map(cfg: &Config, exec: Exec) -> Result<Vec<PathBuf>, CliError> {
    let p = &cfg.phase_map;
    let cells = local_phase_map(p.n, cfg.model.delta, cfg.model.g, p.resolution, p.grid, exec)?;
    let mut t = Table::new(&["n1", "n2", "n3", "x", "y", "gap", "chern", "trivial"]);
    let mut trivial = 0;
    let mut gapless = 0;
    for cell in &cells {
        let (x, y) = plane_coords_f(cell.n);
        t.push(vec![
            cell.n[0].into(),
            cell.n[1].into(),
            cell.n[2].into(),
            x.into(),
            y.into(),
            cell.gap.into(),
            cell.chern.into(),
            cell.trivial.into(),
        ]);
        trivial += cell.trivial as usize;
        gapless += cell.chern.is_none() as usize;
    }
    let summary = json!({ "cells": cells.len(), "trivial": trivial, "gapless": gapless });
    let art = Artifacts::new(cfg, "phase-map");
    finish(&art, &header("phase-map", cfg, None), &[("", t)], summary)
}

fn series_table(s: &TimeSeries, tp: f64) -> Table {
    let mut t = Table::new(&[
        "t", "t_over_T", "n1", "n2", "n3", "sigma_x", "sigma_y", "sigma_z", "fidelity", "norm",
    ]);
    for k in 0..s.len() {
        t.push(vec![
            s.times[k].into(),
            (s.times[k] / tp).into(),
            s.n_exp[0][k].into(),
            s.n_exp[1][k].into(),
            s.n_exp[2][k].into(),
            s.sigma_exp[0][k].into(),
            s.sigma_exp[1][k].into(),
            s.sigma_exp[2][k].into(),
            s.fidelity[k].into(),
            s.norm[k].into(),
        ]);
    }
    t
}

fn evolve(cfg: &Config) -> Result<Vec<PathBuf>, CliError> {
    let e = &cfg.evolve;
    let g = cfg.model.g;
    let tp = period(g);
    let times = time_grid(e.t_final_periods * tp, e.samples)?;
    let params = ModelParams::new(e.n, g, cfg.model.delta);
    let s = circulate_fock(&params, &times, qubit_state(&e.qubit)?, e.source, method(&e.method)?)?;
    let nf = e.n.max(1) as f64;
    let target = e.source % 3;
    let first = detect_revivals(&times, &s.n_exp[target].iter().map(|x| x / nf).collect::<Vec<_>>(), tp, 1)
        .ok()
        .and_then(|r| r.first().copied());
    let measured = period_from_crossings(&times, &s.sigma_exp[0]).ok();
    let summary = json!({
        "n": e.n,
        "period": tp,
        "first_revival_cavity": target + 1,
        "first_revival_t_over_T": first.map(|r| r.t_q / tp),
        "first_revival_peak_over_n": first.map(|r| r.peak),
        "sigma_x_period": measured,
        "sigma_x_period_rel_error": measured.map(|p| (p - tp).abs() / tp),
        "max_norm_error": s.norm.iter().map(|x| (x - 1.0).abs()).fold(0.0, f64::max),
        "krylov_matvecs": s.krylov.matvecs,
    });
    let art = Artifacts::new(cfg, "evolve");
    finish(&art, &header("evolve", cfg, None), &[("", series_table(&s, tp))], summary)
}

fn coherent(cfg: &Config, exec: Exec) -> Result<Vec<PathBuf>, CliError> {
    let c = &cfg.coherent;
    let g = cfg.model.g;
    let tp = period(g);
    let times = time_grid(c.t_final_periods * tp, c.samples)?;
    if !(c.mean > 0.0) {
        return Err(invalid("coherent mean photon number must be positive"));
    }
    let alpha = Complex64::from_polar(c.mean.sqrt(), c.phase);
    let r = circulate_coherent(
        g,
        cfg.model.delta,
        alpha,
        &times,
        c.tail_tol,
        qubit_state(&c.qubit)?,
        c.source,
        method(&c.method)?,
        exec,
    )?;
    let dev = path_deviation(&r.series, c.mean, tp, tp)?;
    let sectors = r.window.sectors.iter().map(|s| s.0);
    let summary = json!({
        "mean": c.mean,
        "sector_min": sectors.clone().min(),
        "sector_max": sectors.max(),
        "omitted_weight": r.window.omitted,
        "max_occupation_deviation_first_period": dev.max_occupation,
        "qubit_circle_rms": dev.circle_rms,
    });
    let art = Artifacts::new(cfg, "coherent");
    finish(&art, &header("coherent", cfg, None), &[("", series_table(&r.series, tp))], summary)
}

fn lifetime(cfg: &Config, exec: Exec) -> Result<Vec<PathBuf>, CliError> {
    let l = &cfg.lifetime;
    let g = cfg.model.g;
    let kind = l.kind.parse().map_err(|e: Error| invalid(e.to_string()))?;
    let lc = LifetimeConfig {
        ns: l.ns.clone(),
        g,
        delta: cfg.model.delta,
        perturbation: PerturbationSpec {
            kind,
            strength: l.strength,
            seed: l.seed,
        },
        realizations: l.realizations,
        q_max: l.q_max,
        samples_per_period: l.samples_per_period,
        threshold: l.threshold,
        source: l.source,
        krylov: KrylovOptions::default(),
    };
    let res = lifetime_sweep(&lc, exec)?;
    let tp = period(g);
    let mut t = Table::new(&["n", "q", "t_mean", "t_over_T", "peak_over_n", "t_over_t_star"]);
    let mut sectors = Vec::new();
    for s in &res.sectors {
        for q in 0..s.t_mean.len() {
            t.push(vec![
                s.n.into(),
                (q + 1).into(),
                s.t_mean[q].into(),
                (s.t_mean[q] / tp).into(),
                s.peak_mean[q].into(),
                s.t_star.map(|ts| s.t_mean[q] / ts).into(),
            ]);
        }
        sectors.push(json!({
            "n": s.n,
            "t_star": s.t_star,
            "t_star_over_T": s.t_star.map(|x| x / tp),
            "t_star_discrete": s.t_star_discrete,
            "censored": s.censored(),
        }));
    }
    let summary = json!({
        "kind": kind.name(),
        "strength": l.strength,
        "realizations": l.realizations,
        "beta": res.beta,
        "beta_discrete": res.beta_discrete,
        "sectors": sectors,
    });
    let art = Artifacts::new(cfg, "lifetime");
    finish(&art, &header("lifetime", cfg, Some(l.seed)), &[("", t)], summary)
}

fn semiclassical(cfg: &Config) -> Result<Vec<PathBuf>, CliError> {
    let s = &cfg.semiclassical;
    let g = cfg.model.g;
    if s.samples < 2 || !(s.periods > 0.0) {
        return Err(invalid("need samples ≥ 2 per period and periods > 0"));
    }
    let sol = solve_circulating_point(s.n, s.epsilon, g)?;
    let one = fixed_point_period(&sol, s.samples, s.tol)?;
    let avg = trajectory_averages(&one, sol.period)?;
    let total = (s.periods * s.samples as f64).round().max(1.0) as usize;
    let times = time_grid(s.periods * sol.period, total)?;
    let traj = integrate(&sol.initial_state(), &sol.params(), &times, s.tol)?;
    let energies = traj.energies();
    let mut t = Table::new(&["t", "t_over_T", "n1", "n2", "n3", "sigma_x", "sigma_y", "sigma_z", "energy"]);
    for (k, st) in traj.states.iter().enumerate() {
        let occ = st.occupations();
        t.push(vec![
            times[k].into(),
            (times[k] / sol.period).into(),
            occ[0].into(),
            occ[1].into(),
            occ[2].into(),
            st.sigma[0].into(),
            st.sigma[1].into(),
            st.sigma[2].into(),
            energies[k].into(),
        ]);
    }
    let (n_drift, s_drift, e_drift) = traj.drifts();
    let summary = json!({
        "n": s.n,
        "epsilon": s.epsilon,
        "delta": sol.delta,
        "b_z": sol.b_z,
        "x0": sol.x0,
        "fixed_point_residual": sol.residual,
        "period": sol.period,
        "period_over_T": sol.period / period(g),
        "period_series_first_order": period_series_first_order(s.n, s.epsilon, g),
        "period_from_crossings": measure_period(&traj).ok(),
        "d_avg_over_n": avg.d_over_n(),
        "c_avg_over_gn2": avg.c_over_gn2(),
        "energy_drift": e_drift,
        "photon_number_drift": n_drift,
        "spin_length_drift": s_drift,
    });
    let art = Artifacts::new(cfg, "semiclassical");
    finish(&art, &header("semiclassical", cfg, None), &[("", t)], summary)
}

fn floquet(cfg: &Config) -> Result<Vec<PathBuf>, CliError> {
    let f = &cfg.floquet;
    let g = cfg.model.g;
    let drive = default_drive_solution(g, f.omega_d, f.omega_0, f.n)?;
    let magnus = magnus_first_order(&drive)?;
    let alpha_residual = alpha_match_residual(&magnus, g);
    let target_residual = target_match_residual(&drive, &enumerate_sector(f.n), g)?;
    let validity = validity_report(g, f.n, f.omega_0, f.omega_d)?;
    let tp = period(g);
    let q_max = (f.periods * tp / drive.period()).ceil() as usize;
    let cap = f.n + f.cap_extra;
    let basis = TruncatedProductBasis::with_total_cap(cap, cap);
    let opts = StroboscopicOptions {
        steps_per_period: f.steps_per_period,
        leak_tol: f.leak_tol,
        stride: f.stride,
    };
    let cmp = compare_with_static(&drive, &basis, g, f.n, qubit_state(&f.qubit)?, f.source, q_max, &opts)?;
    let mut t = Table::new(&[
        "q", "t", "t_over_T", "n1", "n2", "n3", "static_n1", "static_n2", "static_n3", "deviation", "total", "leakage",
        "norm",
    ]);
    for (k, s) in cmp.samples.iter().enumerate() {
        let st = cmp.static_n[k];
        t.push(vec![
            s.q.into(),
            s.t.into(),
            (s.t / tp).into(),
            s.n[0].into(),
            s.n[1].into(),
            s.n[2].into(),
            st[0].into(),
            st[1].into(),
            st[2].into(),
            cmp.deviation[k].into(),
            s.total.into(),
            s.leakage.into(),
            s.norm.into(),
        ]);
    }
    let cv = |v: &[Complex64; 3]| v.iter().map(|z| [z.re, z.im]).collect::<Vec<_>>();
    let summary = json!({
        "n": f.n,
        "omega_d": f.omega_d,
        "omega_0": f.omega_0,
        "delta_0": drive.delta_0,
        "drive_a": cv(&drive.a[2]),
        "drive_b": cv(&drive.b[2]),
        "alpha_match_residual": alpha_residual,
        "target_match_residual": target_residual,
        "magnus_ratio": validity.magnus_ratio,
        "rwa_ratio": validity.rwa_ratio,
        "basis_dim": basis.dim(),
        "drive_periods": q_max,
        "max_deviation": cmp.max_deviation(),
        "max_deviation_over_n": cmp.max_deviation() / f.n.max(1) as f64,
        "max_total_drift": cmp.max_total_drift(),
        "max_leakage": cmp.samples.iter().map(|s| s.leakage).fold(0.0, f64::max),
    });
    let art = Artifacts::new(cfg, "floquet");
    finish(&art, &header("floquet", cfg, None), &[("", t)], summary)
}

pub fn router_config(cfg: &Config) -> RouterConfig {
    let r = &cfg.route;
    let tp = period(cfg.model.g);
    RouterConfig {
        f0: Complex64::new(r.f0[0], r.f0[1]),
        sigma_pulse: r.sigma,
        omega: r.omega,
        r_in: r.r_in,
        r_out: r.r_out,
        g: cfg.model.g,
        cutoffs: r.cutoffs,
        total_cap: r.total_cap,
        t_start: r.t_start_sigmas * r.sigma,
        t_final: r.t_final_periods * tp,
        dt: tp / r.samples_per_period.max(1) as f64,
        rtol: r.rtol,
        floor_tol: r.floor_tol,
        leak_tol: r.leak_tol,
    }
}

fn route(cfg: &Config) -> Result<Vec<PathBuf>, CliError> {
    let rc = router_config(cfg);
    let tp = period(cfg.model.g);
    let samples = evolve_router(&rc)?;
    let mut t = Table::new(&[
        "t", "t_over_T", "n1", "n2", "n3", "nD1", "nD2", "imbalance", "norm", "leakage",
    ]);
    for s in &samples {
        t.push(vec![
            s.t.into(),
            (s.t / tp).into(),
            s.n[0].into(),
            s.n[1].into(),
            s.n[2].into(),
            s.n_det[0].into(),
            s.n_det[1].into(),
            s.imbalance.into(),
            s.norm.into(),
            s.leakage.into(),
        ]);
    }
    // Pulse over: the drive envelope has fallen to 1% of its peak.
    let t_after = 10.0 * rc.sigma_pulse;
    let summary = json!({
        "basis_dim": RouterBasis::new(rc.cutoffs, rc.total_cap).dim(),
        "mean_photons_drive": rc.mean_photons(),
        "late_imbalance": late_imbalance(&samples, tp),
        "circulation_period_over_T": circulation_period(&samples, t_after).ok().map(|p| p / tp),
        "max_leakage": samples.iter().map(|s| s.leakage).fold(0.0, f64::max),
    });
    let art = Artifacts::new(cfg, "route");
    finish(&art, &header("route", cfg, None), &[("", t)], summary)
}
