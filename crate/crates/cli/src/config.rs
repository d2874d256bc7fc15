//! Run configuration: one TOML file with a table per subcommand. Every
//! table is optional and every key has a default; unknown keys are errors.
//! Energies are in units of g = 1 and times in units of 1/g unless a key
//! name says otherwise (`*_periods` keys count circulation periods T).

use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    pub model: ModelCfg,
    pub output: OutputCfg,
    pub spectrum: SpectrumCfg,
    pub chern: ChernCfg,
    pub phase_map: PhaseMapCfg,
    pub evolve: EvolveCfg,
    pub coherent: CoherentCfg,
    pub lifetime: LifetimeCfg,
    pub semiclassical: SemiclassicalCfg,
    pub floquet: FloquetCfg,
    pub route: RouteCfg,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelCfg {
    pub g: f64,
    /// Qubit splitting Δ in the rotating frame.
    pub delta: f64,
}

impl Default for ModelCfg {
    fn default() -> Self {
        ModelCfg { g: 1.0, delta: 0.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputCfg {
    pub dir: String,
    /// File stem; defaults to the subcommand name.
    pub prefix: Option<String>,
}

impl Default for OutputCfg {
    fn default() -> Self {
        OutputCfg { dir: ".".into(), prefix: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpectrumCfg {
    pub n: usize,
    pub bulk_distance: f64,
    pub band_fraction: f64,
    /// Set to 0 to disable the chirality filter on the boundary band.
    pub chirality_fraction: f64,
}

impl Default for SpectrumCfg {
    fn default() -> Self {
        SpectrumCfg {
            n: 20,
            bulk_distance: 0.15,
            band_fraction: 0.4,
            chirality_fraction: 0.5,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChernCfg {
    pub m_from: f64,
    pub m_to: f64,
    pub step: f64,
    /// Plaquettes per reciprocal direction.
    pub grid: usize,
}

impl Default for ChernCfg {
    fn default() -> Self {
        ChernCfg {
            m_from: -5.0,
            m_to: 10.0,
            step: 0.05,
            grid: 24,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PhaseMapCfg {
    pub n: usize,
    /// Points per simplex edge.
    pub resolution: usize,
    pub grid: usize,
}

impl Default for PhaseMapCfg {
    fn default() -> Self {
        PhaseMapCfg {
            n: 40,
            resolution: 40,
            grid: 24,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvolveCfg {
    pub n: usize,
    pub t_final_periods: f64,
    pub samples: usize,
    /// Cavity holding the photons at t = 0 (1, 2 or 3).
    pub source: usize,
    /// `plus`, `up` or `down`.
    pub qubit: String,
    /// `auto`, `eigen` or `krylov`.
    pub method: String,
}

impl Default for EvolveCfg {
    fn default() -> Self {
        EvolveCfg {
            n: 40,
            t_final_periods: 2.0,
            samples: 400,
            source: 3,
            qubit: "plus".into(),
            method: "auto".into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CoherentCfg {
    /// Mean photon number |α|².
    pub mean: f64,
    /// Phase of α in radians.
    pub phase: f64,
    pub tail_tol: f64,
    pub t_final_periods: f64,
    pub samples: usize,
    pub source: usize,
    pub qubit: String,
    pub method: String,
}

impl Default for CoherentCfg {
    fn default() -> Self {
        CoherentCfg {
            mean: 50.0,
            phase: 0.0,
            tail_tol: 1e-8,
            t_final_periods: 2.0,
            samples: 200,
            source: 3,
            qubit: "plus".into(),
            method: "auto".into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LifetimeCfg {
    /// `none`, `cavity_frequency`, `coupling_generic` or `coupling_p_symmetric`.
    pub kind: String,
    pub strength: f64,
    pub seed: u64,
    pub realizations: usize,
    pub ns: Vec<usize>,
    pub q_max: usize,
    pub samples_per_period: usize,
    pub threshold: f64,
    pub source: usize,
}

impl Default for LifetimeCfg {
    fn default() -> Self {
        LifetimeCfg {
            kind: "coupling_generic".into(),
            strength: 0.1,
            seed: 1,
            realizations: 100,
            ns: vec![16, 24, 32],
            q_max: 20,
            samples_per_period: 64,
            threshold: 0.9,
            source: 3,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SemiclassicalCfg {
    pub n: f64,
    /// Relative shift of Δ from √3g/4.
    pub epsilon: f64,
    pub periods: f64,
    /// Samples per period.
    pub samples: usize,
    pub tol: f64,
}

impl Default for SemiclassicalCfg {
    fn default() -> Self {
        SemiclassicalCfg {
            n: 40.0,
            epsilon: 0.0,
            periods: 1.0,
            samples: 1000,
            tol: 1e-11,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FloquetCfg {
    pub n: usize,
    pub omega_d: f64,
    pub omega_0: f64,
    /// Length of the lab-frame run in circulation periods.
    pub periods: f64,
    /// Extra photons allowed above N in the truncated basis.
    pub cap_extra: usize,
    pub steps_per_period: usize,
    /// Record every `stride`-th drive period.
    pub stride: usize,
    pub leak_tol: f64,
    pub source: usize,
    pub qubit: String,
}

impl Default for FloquetCfg {
    fn default() -> Self {
        FloquetCfg {
            n: 6,
            omega_d: 5000.0,
            omega_0: 170.0,
            periods: 2.0,
            cap_extra: 6,
            steps_per_period: 64,
            stride: 16,
            leak_tol: 1e-6,
            source: 3,
            qubit: "plus".into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RouteCfg {
    /// Complex pulse amplitude F₀ as `[re, im]`.
    pub f0: [f64; 2],
    pub sigma: f64,
    pub omega: f64,
    pub r_in: f64,
    pub r_out: f64,
    /// Fock levels per mode: cavities 1–3, then the two detectors.
    pub cutoffs: [usize; 5],
    pub total_cap: Option<usize>,
    /// Start time in units of the pulse width (negative).
    pub t_start_sigmas: f64,
    pub t_final_periods: f64,
    pub samples_per_period: usize,
    pub rtol: f64,
    pub floor_tol: f64,
    pub leak_tol: f64,
}

impl Default for RouteCfg {
    fn default() -> Self {
        RouteCfg {
            f0: [2.0, 0.0],
            sigma: 0.1,
            omega: 1.0,
            r_in: 0.02,
            r_out: 2.0,
            cutoffs: [7; 5],
            total_cap: None,
            t_start_sigmas: -40.0,
            t_final_periods: 2.0,
            samples_per_period: 200,
            rtol: 1e-8,
            floor_tol: 1e-6,
            leak_tol: 1e-4,
        }
    }
}

pub fn parse(text: &str) -> Result<Config, String> {
    toml::from_str(text).map_err(|e| e.to_string())
}
