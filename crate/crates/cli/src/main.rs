//! `photon-lattice`: batch front end for the photon lattice simulator.
//!
//! Exit codes: 0 success, 1 i/o failure, 2 configuration error, 3 numerical
//! failure (leakage, non-convergence, gap closing where a gap is needed).

mod commands;
mod config;
mod output;

use clap::{Args, Parser, Subcommand};
use config::Config;
use photon_lattice::par::{self, Exec};
use std::path::PathBuf;
use std::process::ExitCode;

pub const THREADS_ENV: &str = "PHOTON_LATTICE_THREADS";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{0}")]
    Core(#[from] photon_lattice::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Io(_) => 1,
            CliError::Config(_) => 2,
            CliError::Core(e) if e.is_numerical() => 3,
            CliError::Core(_) => 2,
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "photon-lattice", version, about = "Three cavities, one qubit: photon lattice simulator")]
struct Cli {
    /// TOML configuration file; flags override its values.
    #[arg(short, long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(short, long, global = true)]
    out: Option<String>,
    /// Output file stem (default: the command name).
    #[arg(long, global = true)]
    prefix: Option<String>,
    /// Worker threads (default from PHOTON_LATTICE_THREADS, else all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Run all tasks in order on one thread.
    #[arg(long, global = true)]
    sequential: bool,
    /// Coupling g.
    #[arg(long, global = true, allow_hyphen_values = true)]
    g: Option<f64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Full sector spectrum with edge distance and chirality per state.
    Spectrum(SpectrumArgs),
    /// Chern number of the lower band of the lattice model against mass m.
    Chern(ChernArgs),
    /// Local topological phase across the photon-number simplex.
    PhaseMap(PhaseMapArgs),
    /// Fock-state circulation in one sector.
    Evolve(EvolveArgs),
    /// Coherent-state circulation, summed over number sectors.
    Coherent(CoherentArgs),
    /// Disorder-averaged circulation lifetime and its scaling exponent.
    Lifetime(LifetimeArgs),
    /// Classical circulating solution, period and boundary averages.
    Semiclassical(SemiclassicalArgs),
    /// Drive construction and lab-frame run against the static model.
    Floquet(FloquetArgs),
    /// Pulse-driven router with two detectors.
    Route(RouteArgs),
    /// Re-run the command recorded in an output file's header.
    Replay {
        /// A CSV or JSON file written by this tool.
        file: PathBuf,
    },
}

#[derive(Args, Debug)]
struct SpectrumArgs {
    #[arg(long = "N")]
    n: Option<usize>,
    /// Qubit splitting Δ.
    #[arg(long, allow_hyphen_values = true)]
    delta: Option<f64>,
    #[arg(long)]
    bulk_distance: Option<f64>,
    #[arg(long)]
    band_fraction: Option<f64>,
    #[arg(long)]
    chirality_fraction: Option<f64>,
}

#[derive(Args, Debug)]
struct ChernArgs {
    #[arg(long, allow_hyphen_values = true)]
    m_from: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    m_to: Option<f64>,
    #[arg(long)]
    step: Option<f64>,
    #[arg(long)]
    grid: Option<usize>,
}

#[derive(Args, Debug)]
struct PhaseMapArgs {
    #[arg(long = "N")]
    n: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    delta: Option<f64>,
    #[arg(long)]
    resolution: Option<usize>,
    #[arg(long)]
    grid: Option<usize>,
}

#[derive(Args, Debug)]
struct EvolveArgs {
    #[arg(long = "N")]
    n: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    delta: Option<f64>,
    /// Final time in periods T.
    #[arg(long)]
    t_final: Option<f64>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    source: Option<usize>,
    #[arg(long)]
    qubit: Option<String>,
    #[arg(long)]
    method: Option<String>,
}

#[derive(Args, Debug)]
struct CoherentArgs {
    #[arg(long)]
    mean: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    phase: Option<f64>,
    #[arg(long)]
    tail_tol: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    delta: Option<f64>,
    /// Final time in periods T.
    #[arg(long)]
    t_final: Option<f64>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    source: Option<usize>,
    #[arg(long)]
    qubit: Option<String>,
    #[arg(long)]
    method: Option<String>,
}

#[derive(Args, Debug)]
struct LifetimeArgs {
    #[arg(long)]
    kind: Option<String>,
    /// Disorder strength δ.
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    realizations: Option<usize>,
    /// Comma-separated photon numbers.
    #[arg(long = "N", value_delimiter = ',')]
    ns: Option<Vec<usize>>,
    #[arg(long)]
    q_max: Option<usize>,
    #[arg(long)]
    samples_per_period: Option<usize>,
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long)]
    source: Option<usize>,
}

#[derive(Args, Debug)]
struct SemiclassicalArgs {
    #[arg(long = "N")]
    n: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    epsilon: Option<f64>,
    #[arg(long)]
    periods: Option<f64>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    tol: Option<f64>,
}

#[derive(Args, Debug)]
struct FloquetArgs {
    #[arg(long = "N")]
    n: Option<usize>,
    #[arg(long)]
    omega_d: Option<f64>,
    #[arg(long)]
    omega_0: Option<f64>,
    #[arg(long)]
    periods: Option<f64>,
    #[arg(long)]
    cap_extra: Option<usize>,
    #[arg(long)]
    steps_per_period: Option<usize>,
    #[arg(long)]
    stride: Option<usize>,
    #[arg(long)]
    leak_tol: Option<f64>,
    #[arg(long)]
    source: Option<usize>,
    #[arg(long)]
    qubit: Option<String>,
}

#[derive(Args, Debug)]
struct RouteArgs {
    #[arg(long, allow_hyphen_values = true)]
    f0_re: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    f0_im: Option<f64>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    omega: Option<f64>,
    #[arg(long)]
    r_in: Option<f64>,
    #[arg(long)]
    r_out: Option<f64>,
    /// Five comma-separated level counts: cavities 1–3, detectors 1–2.
    #[arg(long, value_delimiter = ',')]
    cutoffs: Option<Vec<usize>>,
    #[arg(long)]
    total_cap: Option<usize>,
    /// Final time in periods T.
    #[arg(long)]
    t_final: Option<f64>,
    #[arg(long)]
    samples_per_period: Option<usize>,
    #[arg(long)]
    rtol: Option<f64>,
    #[arg(long)]
    leak_tol: Option<f64>,
    #[arg(long)]
    floor_tol: Option<f64>,
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

/// Apply subcommand flags; returns the command name.
fn apply(cmd: Command, cfg: &mut Config) -> Result<&'static str, CliError> {
    Ok(match cmd {
        Command::Spectrum(a) => {
            set(&mut cfg.spectrum.n, a.n);
            set(&mut cfg.model.delta, a.delta);
            set(&mut cfg.spectrum.bulk_distance, a.bulk_distance);
            set(&mut cfg.spectrum.band_fraction, a.band_fraction);
            set(&mut cfg.spectrum.chirality_fraction, a.chirality_fraction);
            "spectrum"
        }
        Command::Chern(a) => {
            set(&mut cfg.chern.m_from, a.m_from);
            set(&mut cfg.chern.m_to, a.m_to);
            set(&mut cfg.chern.step, a.step);
            set(&mut cfg.chern.grid, a.grid);
            "chern"
        }
        Command::PhaseMap(a) => {
            set(&mut cfg.phase_map.n, a.n);
            set(&mut cfg.model.delta, a.delta);
            set(&mut cfg.phase_map.resolution, a.resolution);
            set(&mut cfg.phase_map.grid, a.grid);
            "phase-map"
        }
        Command::Evolve(a) => {
            let e = &mut cfg.evolve;
            set(&mut e.n, a.n);
            set(&mut e.t_final_periods, a.t_final);
            set(&mut e.samples, a.samples);
            set(&mut e.source, a.source);
            set(&mut e.qubit, a.qubit);
            set(&mut e.method, a.method);
            set(&mut cfg.model.delta, a.delta);
            "evolve"
        }
        Command::Coherent(a) => {
            let c = &mut cfg.coherent;
            set(&mut c.mean, a.mean);
            set(&mut c.phase, a.phase);
            set(&mut c.tail_tol, a.tail_tol);
            set(&mut c.t_final_periods, a.t_final);
            set(&mut c.samples, a.samples);
            set(&mut c.source, a.source);
            set(&mut c.qubit, a.qubit);
            set(&mut c.method, a.method);
            set(&mut cfg.model.delta, a.delta);
            "coherent"
        }
        Command::Lifetime(a) => {
            let l = &mut cfg.lifetime;
            set(&mut l.kind, a.kind);
            set(&mut l.strength, a.delta);
            set(&mut l.seed, a.seed);
            set(&mut l.realizations, a.realizations);
            set(&mut l.ns, a.ns);
            set(&mut l.q_max, a.q_max);
            set(&mut l.samples_per_period, a.samples_per_period);
            set(&mut l.threshold, a.threshold);
            set(&mut l.source, a.source);
            "lifetime"
        }
        Command::Semiclassical(a) => {
            let s = &mut cfg.semiclassical;
            set(&mut s.n, a.n);
            set(&mut s.epsilon, a.epsilon);
            set(&mut s.periods, a.periods);
            set(&mut s.samples, a.samples);
            set(&mut s.tol, a.tol);
            "semiclassical"
        }
        Command::Floquet(a) => {
            let f = &mut cfg.floquet;
            set(&mut f.n, a.n);
            set(&mut f.omega_d, a.omega_d);
            set(&mut f.omega_0, a.omega_0);
            set(&mut f.periods, a.periods);
            set(&mut f.cap_extra, a.cap_extra);
            set(&mut f.steps_per_period, a.steps_per_period);
            set(&mut f.stride, a.stride);
            set(&mut f.leak_tol, a.leak_tol);
            set(&mut f.source, a.source);
            set(&mut f.qubit, a.qubit);
            "floquet"
        }
        Command::Route(a) => {
            let r = &mut cfg.route;
            set(&mut r.f0[0], a.f0_re);
            set(&mut r.f0[1], a.f0_im);
            set(&mut r.sigma, a.sigma);
            set(&mut r.omega, a.omega);
            set(&mut r.r_in, a.r_in);
            set(&mut r.r_out, a.r_out);
            if let Some(c) = a.cutoffs {
                r.cutoffs = c
                    .try_into()
                    .map_err(|c: Vec<usize>| CliError::Config(format!("cutoffs need 5 entries, got {}", c.len())))?;
            }
            if a.total_cap.is_some() {
                r.total_cap = a.total_cap;
            }
            set(&mut r.t_final_periods, a.t_final);
            set(&mut r.samples_per_period, a.samples_per_period);
            set(&mut r.rtol, a.rtol);
            set(&mut r.leak_tol, a.leak_tol);
            set(&mut r.floor_tol, a.floor_tol);
            "route"
        }
        Command::Replay { .. } => unreachable!("replay is resolved before flags are applied"),
    })
}

fn thread_count(flag: Option<usize>) -> Result<Option<usize>, CliError> {
    if flag.is_some() {
        return Ok(flag);
    }
    match std::env::var(THREADS_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| CliError::Config(format!("{THREADS_ENV}='{v}' is not a thread count"))),
        Err(_) => Ok(None),
    }
}

fn resolve(cli: Cli) -> Result<(String, Config), CliError> {
    if let Command::Replay { file } = &cli.command {
        return output::read_header(file)
            .map_err(CliError::Config)
            .and_then(|(cmd, cfg)| {
                if commands::COMMANDS.contains(&cmd.as_str()) {
                    Ok((cmd, cfg))
                } else {
                    Err(CliError::Config(format!("recorded command '{cmd}' is unknown")))
                }
            });
    }
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            config::parse(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?
        }
        None => Config::default(),
    };
    set(&mut cfg.model.g, cli.g);
    set(&mut cfg.output.dir, cli.out);
    if cli.prefix.is_some() {
        cfg.output.prefix = cli.prefix;
    }
    let name = apply(cli.command, &mut cfg)?;
    Ok((name.to_string(), cfg))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let exec = if cli.sequential { Exec::Sequential } else { Exec::Parallel };
    let result = thread_count(cli.threads).and_then(|threads| {
        if let Some(n) = threads {
            if n == 0 {
                return Err(CliError::Config("thread count must be positive".into()));
            }
            par::set_threads(n);
        }
        let (name, cfg) = resolve(cli)?;
        commands::run(&name, &cfg, exec)
    });
    match result {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("photon-lattice: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
