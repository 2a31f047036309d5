mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use multiwell::potentials::PotentialConfig;
use multiwell::propagate::Window;
use serde_json::{json, Value};

use config::{Command, ConfigError, ExperimentConfig, GridConfig, MethodConfig, Solver};
use output::RunDir;

/// Multi-well quantum and classical experiments.
#[derive(Parser, Debug)]
#[command(name = "multiwell", version)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Build SUSY double/triple-well models and their states.
    SusyGen {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        potential: PotentialArgs,
        #[command(flatten)]
        grid: GridArgs,
        /// Oscillator states carried over to the partner.
        #[arg(long)]
        n_states: Option<usize>,
    },
    /// Matrix diagonalization in an oscillator basis, or a 1D grid solve.
    Diag {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        potential: PotentialArgs,
        #[command(flatten)]
        grid: GridArgs,
        #[command(flatten)]
        basis: BasisArgs,
        #[arg(long, value_enum)]
        solver: Option<SolverArg>,
        #[arg(long)]
        n_levels: Option<usize>,
    },
    /// Split-operator propagation and spectrum from the autocorrelation.
    Spectral {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        potential: PotentialArgs,
        #[command(flatten)]
        grid: GridArgs,
        #[command(flatten)]
        packet: PacketArgs,
        /// Run length is 2^exponent time steps.
        #[arg(long)]
        exponent: Option<u32>,
        #[arg(long)]
        hbar: Option<f64>,
        #[arg(long, value_enum)]
        window: Option<WindowArg>,
        #[arg(long, allow_negative_numbers = true)]
        e_min: Option<f64>,
        #[arg(long, allow_negative_numbers = true)]
        e_max: Option<f64>,
    },
    /// Classical ensembles, surfaces of section and regularity estimates.
    Poincare {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        potential: PotentialArgs,
        /// Energy as a fraction of the saddle energy (QO) or barrier scale (D5).
        #[arg(long)]
        energy_frac: Option<f64>,
        #[arg(long)]
        trajectories: Option<usize>,
        #[arg(long)]
        duration: Option<f64>,
        #[arg(long, value_delimiter = ',')]
        wells: Option<Vec<String>>,
        #[arg(long)]
        sample_stride: Option<usize>,
    },
    /// Nodal domains of a separable or diagonalized 2D eigenstate.
    Nodal {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        potential: PotentialArgs,
        #[command(flatten)]
        grid: GridArgs,
        #[command(flatten)]
        basis: BasisArgs,
        /// `nx,ny` for ho2d, or an eigenstate index.
        #[arg(long, value_delimiter = ',')]
        state: Option<Vec<usize>>,
        #[arg(long)]
        mask_radius: Option<f64>,
        #[arg(long)]
        amplitude_floor: Option<f64>,
    },
    /// Solve-time scaling and method cost tables.
    Bench {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        potential: PotentialArgs,
        #[command(flatten)]
        grid: GridArgs,
        #[command(flatten)]
        packet: PacketArgs,
        #[arg(long, value_delimiter = ',')]
        sizes: Option<Vec<usize>>,
        #[arg(long)]
        repeats: Option<usize>,
        #[arg(long)]
        n_levels: Option<usize>,
        #[arg(long)]
        epsilon: Option<f64>,
        #[arg(long)]
        basis_omega: Option<f64>,
    },
    /// Minima and saddles of a 2D potential.
    CriticalPoints {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        potential: PotentialArgs,
        /// `x_lo,y_lo,x_hi,y_hi`.
        #[arg(long, value_delimiter = ',', num_args = 4, allow_negative_numbers = true)]
        search_box: Option<Vec<f64>>,
        #[arg(long)]
        seeds_per_axis: Option<usize>,
    },
}

#[derive(Args, Debug)]
struct Common {
    /// TOML config; its values override the flags.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = "runs")]
    outdir: PathBuf,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Kind {
    Ho,
    Ho2d,
    Quartic,
    Polynomial1d,
    Qo,
    D5,
    Susy,
}

#[derive(Args, Debug)]
struct PotentialArgs {
    #[arg(long, value_enum)]
    potential: Option<Kind>,
    #[arg(long = "W")]
    w: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    a: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    b: Option<f64>,
    #[arg(long)]
    omega: Option<f64>,
    #[arg(long)]
    omega_y: Option<f64>,
    /// Polynomial coefficients from x⁰ up.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    coefficients: Option<Vec<f64>>,
    #[arg(long, allow_negative_numbers = true)]
    nu: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    mu: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    lambda1: Option<f64>,
}

#[derive(Args, Debug)]
struct GridArgs {
    #[arg(long)]
    half_width: Option<f64>,
    #[arg(long)]
    log2_points: Option<u32>,
}

#[derive(Args, Debug)]
struct BasisArgs {
    #[arg(long)]
    basis_size: Option<usize>,
    #[arg(long)]
    basis_omega: Option<f64>,
    #[arg(long)]
    hbar: Option<f64>,
    /// Basis (and grid) centre `x,y`.
    #[arg(long, value_delimiter = ',', num_args = 2, allow_negative_numbers = true)]
    center: Option<Vec<f64>>,
}

#[derive(Args, Debug)]
struct PacketArgs {
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    packet_center: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    packet_width: Option<Vec<f64>>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum SolverArg {
    Basis,
    Grid,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum WindowArg {
    Hann,
    Rectangular,
}

impl PotentialArgs {
    fn resolve(&self, default: Kind) -> Result<PotentialConfig, ConfigError> {
        let kind = self.potential.unwrap_or(if self.nu.is_some() { Kind::Susy } else { default });
        Ok(match kind {
            Kind::Ho => PotentialConfig::Ho { omega: self.omega.unwrap_or(1.0) },
            Kind::Ho2d => PotentialConfig::Ho2d { omega_x: self.omega.unwrap_or(1.0), omega_y: self.omega_y.or(self.omega).unwrap_or(1.0) },
            Kind::Quartic => PotentialConfig::Quartic,
            Kind::Polynomial1d => PotentialConfig::Polynomial1d {
                coefficients: self.coefficients.clone().ok_or_else(|| ConfigError::missing("coefficients"))?,
            },
            Kind::Qo => PotentialConfig::Qo { w: self.w.unwrap_or(18.0) },
            Kind::D5 => PotentialConfig::D5 { a: self.a.unwrap_or(2.0), b: self.b.unwrap_or(1.0) },
            Kind::Susy => PotentialConfig::Susy {
                nu: self.nu.ok_or_else(|| ConfigError::missing("nu"))?,
                mu: self.mu,
                lambda: self.lambda.unwrap_or(1.0),
                lambda1: self.lambda1.unwrap_or(1.0),
                omega: self.omega.unwrap_or(1.0),
            },
        })
    }
}

impl GridArgs {
    fn resolve(&self) -> Option<GridConfig> {
        match (self.half_width, self.log2_points) {
            (None, None) => None,
            (h, n) => Some(GridConfig { half_width: h.unwrap_or(8.0), log2_points: n.unwrap_or(9) }),
        }
    }
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

impl BasisArgs {
    fn apply(&self, m: &mut MethodConfig) {
        m.basis_size = self.basis_size.or(m.basis_size);
        m.basis_omega = self.basis_omega.or(m.basis_omega);
        set(&mut m.hbar, self.hbar);
        if let Some(c) = &self.center {
            m.center = [c[0], c[1]];
        }
    }
}

impl PacketArgs {
    fn apply(&self, m: &mut MethodConfig) {
        set(&mut m.packet_center, self.packet_center.clone());
        set(&mut m.packet_width, self.packet_width.clone());
    }
}

/// Flags to config, then the config file on top.
fn resolve(cmd: Cmd) -> Result<ExperimentConfig, ConfigError> {
    let mut m = MethodConfig::default();
    let (command, common, potential, grid) = match cmd {
        Cmd::SusyGen { common, potential, grid, n_states } => {
            set(&mut m.n_states, n_states);
            (Command::SusyGen, common, potential.resolve(Kind::Susy)?, grid.resolve())
        }
        Cmd::Diag { common, potential, grid, basis, solver, n_levels } => {
            basis.apply(&mut m);
            set(&mut m.solver, solver.map(|s| match s {
                SolverArg::Basis => Solver::Basis,
                SolverArg::Grid => Solver::Grid,
            }));
            set(&mut m.n_levels, n_levels);
            (Command::Diag, common, potential.resolve(Kind::Ho)?, grid.resolve())
        }
        Cmd::Spectral { common, potential, grid, packet, exponent, hbar, window, e_min, e_max } => {
            packet.apply(&mut m);
            set(&mut m.exponent, exponent);
            set(&mut m.hbar, hbar);
            set(&mut m.window, window.map(|w| match w {
                WindowArg::Hann => Window::Hann,
                WindowArg::Rectangular => Window::Rectangular,
            }));
            m.e_min = e_min;
            m.e_max = e_max;
            (Command::Spectral, common, potential.resolve(Kind::Ho)?, grid.resolve())
        }
        Cmd::Poincare { common, potential, energy_frac, trajectories, duration, wells, sample_stride } => {
            set(&mut m.energy_frac, energy_frac);
            set(&mut m.trajectories, trajectories);
            m.duration = duration;
            set(&mut m.wells, wells);
            set(&mut m.sample_stride, sample_stride);
            (Command::Poincare, common, potential.resolve(Kind::Qo)?, None)
        }
        Cmd::Nodal { common, potential, grid, basis, state, mask_radius, amplitude_floor } => {
            basis.apply(&mut m);
            set(&mut m.state, state);
            m.mask_radius = mask_radius;
            set(&mut m.amplitude_floor, amplitude_floor);
            (Command::Nodal, common, potential.resolve(Kind::Ho2d)?, grid.resolve())
        }
        Cmd::Bench { common, potential, grid, packet, sizes, repeats, n_levels, epsilon, basis_omega } => {
            packet.apply(&mut m);
            set(&mut m.sizes, sizes);
            set(&mut m.repeats, repeats);
            set(&mut m.n_levels, n_levels);
            set(&mut m.epsilon, epsilon);
            m.basis_omega = basis_omega;
            (Command::Bench, common, potential.resolve(Kind::Quartic)?, grid.resolve())
        }
        Cmd::CriticalPoints { common, potential, search_box, seeds_per_axis } => {
            m.search_box = search_box.map(|b| [b[0], b[1], b[2], b[3]]);
            set(&mut m.seeds_per_axis, seeds_per_axis);
            (Command::CriticalPoints, common, potential.resolve(Kind::Qo)?, None)
        }
    };
    let cfg = ExperimentConfig { command, seed: common.seed, outdir: common.outdir, potential, grid, method: m };
    match &common.config {
        Some(path) => cfg.overlay_file(path),
        None => Ok(cfg),
    }
}

fn error_record(err: &anyhow::Error) -> (Value, u8) {
    if let Some(c) = err.downcast_ref::<ConfigError>() {
        let rec = json!({
            "status": "error",
            "kind": "config",
            "message": c.message,
            "field": c.field,
            "line": c.line,
            "path": c.path,
        });
        return (rec, 2);
    }
    if let Some(e) = err.downcast_ref::<multiwell::Error>() {
        use multiwell::Error as E;
        let (kind, detail) = match e {
            E::Domain(_) => ("domain", Value::Null),
            E::GridMismatch(_) => ("grid-mismatch", Value::Null),
            E::NotNormalized { norm_sq } => ("not-normalized", json!({ "norm_sq": norm_sq })),
            E::Overflow(_) => ("overflow", Value::Null),
            E::Positivity { index, xi } => ("positivity", json!({ "index": index, "xi": xi })),
            E::Construction(_) => ("construction", Value::Null),
            E::GridTooSmall { deviation } => ("grid-too-small", json!({ "deviation": deviation })),
            E::Numerical(_) => ("numerical", Value::Null),
            E::NormDrift { step, drift } => ("norm-drift", json!({ "step": step, "drift": drift })),
            E::Unresolved { energy, required_t } => ("unresolved", json!({ "energy": energy, "required_t": required_t })),
            E::IndexOutOfRange { index, len } => ("index-out-of-range", json!({ "index": index, "len": len })),
            E::Config(_) => ("config", Value::Null),
            E::Io(_) => ("io", Value::Null),
        };
        let rec = json!({ "status": "error", "kind": kind, "message": e.to_string(), "detail": detail });
        return (rec, 1);
    }
    (json!({ "status": "error", "kind": "failure", "message": format!("{err:#}") }), 1)
}

fn execute(cfg: ExperimentConfig, run_dir: &mut Option<RunDir>) -> anyhow::Result<()> {
    let out = run_dir.insert(RunDir::create(&cfg)?);
    commands::run(&cfg, out)?;
    out.note("done");
    println!("{}", out.path().display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut run_dir = None;
    let result = resolve(cli.command).map_err(anyhow::Error::from).and_then(|cfg| execute(cfg, &mut run_dir));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let (rec, code) = error_record(&err);
            if let Some(dir) = run_dir.as_mut() {
                dir.note(format!("error: {err:#}"));
                let _ = dir.json("error.json", &rec);
            }
            eprintln!("{rec}");
            ExitCode::from(code)
        }
    }
}
