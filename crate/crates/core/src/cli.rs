//! Command-line front end: `fit`, `price` and `replay`.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 calibration did
//! not reach ε_max, 3 the evolution diverged.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::ansatz::AnsatzCircuit;
use crate::calibration::{
    ansatz_depth_search, fit_theta0, load_theta, payoff_state_asian, payoff_state_european, residual, Contract,
    DeConfig, DepthSearch, DepthSearchConfig, FitConfig, FitResult, TargetState,
};
use crate::error::{Error, Result};
use crate::hamiltonian::{european_hamiltonian, AsianHamiltonian, HamiltonianSource, SpaceGrid, TransformConstants};
use crate::oracle::{
    black_scholes_call, exact_imaginary_evolution_td, interpolate, rescale_to_price_asian, rescale_to_price_european,
    Interpolation, ReferenceTrajectory,
};
use crate::statevector::StateVector;
use crate::varqite::{evolve, EvolutionConfig, MeasurementMode};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_NOT_CONVERGED: i32 = 2;
pub const EXIT_DIVERGED: i32 = 3;

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "QITE_OUT_DIR";

#[derive(Debug, Parser)]
#[command(name = "qite", version, about = "Option pricing by variational imaginary-time evolution")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit the initial parameters to the payoff.
    Fit(FitArgs),
    /// Fit (or load) θ₀, evolve, and price against the classical oracle.
    Price(PriceArgs),
    /// Load θ from a file and report its residual.
    Replay(ReplayArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ContractArg {
    European,
    Asian,
}

impl From<ContractArg> for Contract {
    fn from(c: ContractArg) -> Self {
        match c {
            ContractArg::European => Contract::European,
            ContractArg::Asian => Contract::Asian,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Exact,
    Shots,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InterpolationArg {
    Linear,
    Quadratic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReplayAgainst {
    /// The payoff state at τ = 0.
    Payoff,
    /// The oracle state at τ = σ²T.
    Terminal,
}

#[derive(Debug, Clone, Args)]
pub struct ProblemArgs {
    #[arg(long, value_enum)]
    pub contract: ContractArg,
    #[arg(long, default_value_t = 100.0)]
    pub s0: f64,
    #[arg(long, default_value_t = 100.0)]
    pub strike: f64,
    #[arg(long, default_value_t = 0.2)]
    pub sigma: f64,
    #[arg(long, default_value_t = 0.0)]
    pub rate: f64,
    #[arg(long, default_value_t = 1.0)]
    pub maturity: f64,
    #[arg(long, default_value_t = 4)]
    pub qubits: usize,
    #[arg(long, default_value_t = 3)]
    pub cells: usize,
    #[arg(long, default_value_t = 50.0)]
    pub s_min: f64,
    #[arg(long, default_value_t = 150.0)]
    pub s_max: f64,
    #[arg(long, default_value_t = -0.5, allow_hyphen_values = true)]
    pub y_min: f64,
    #[arg(long, default_value_t = 0.4, allow_hyphen_values = true)]
    pub y_max: f64,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    #[arg(long, env = OUT_DIR_ENV, default_value = ".")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct CalibrationArgs {
    #[arg(long, default_value_t = 0.05)]
    pub eps_max: f64,
    /// Escalate from one cell up to --max-cells instead of fitting --cells directly.
    #[arg(long)]
    pub depth_search: bool,
    #[arg(long, default_value_t = 4)]
    pub max_cells: usize,
    #[arg(long, default_value_t = 2000)]
    pub generations: usize,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[command(flatten)]
    pub calibration: CalibrationArgs,
}

#[derive(Debug, Args)]
pub struct PriceArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[command(flatten)]
    pub calibration: CalibrationArgs,
    #[arg(long, default_value_t = 500)]
    pub steps: usize,
    #[arg(long, default_value_t = 1e-8)]
    pub cutoff: f64,
    #[arg(long, value_enum, default_value_t = ModeArg::Exact)]
    pub mode: ModeArg,
    #[arg(long, default_value_t = 100_000)]
    pub shots: u64,
    #[arg(long, value_enum, default_value_t = InterpolationArg::Linear)]
    pub interpolation: InterpolationArg,
    /// Use θ₀ from this file instead of fitting.
    #[arg(long)]
    pub theta_file: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[arg(long)]
    pub theta_file: PathBuf,
    #[arg(long, value_enum, default_value_t = ReplayAgainst::Payoff)]
    pub against: ReplayAgainst,
    #[arg(long, default_value_t = 500)]
    pub steps: usize,
}

/// Grid, constants, target and Hamiltonian for one contract.
pub struct Problem {
    pub contract: Contract,
    pub grid: SpaceGrid,
    pub consts: TransformConstants,
    pub target: TargetState,
    pub hamiltonian: Box<dyn HamiltonianSource>,
}

impl ProblemArgs {
    pub fn problem(&self) -> Result<Problem> {
        if self.qubits < 2 || self.qubits > 6 {
            return Err(Error::Config(format!("qubit count must lie in 2..=6, got {}", self.qubits)));
        }
        if !(self.s0 > 0.0) {
            return Err(Error::Config(format!("spot must be positive, got {}", self.s0)));
        }
        let consts = TransformConstants::new(self.sigma, self.rate, self.maturity)?;
        let contract = Contract::from(self.contract);
        match contract {
            Contract::European => {
                let grid = SpaceGrid::log_price(self.s_min, self.s_max, self.qubits)?;
                let target = payoff_state_european(&grid, self.strike, &consts)?;
                let h = european_hamiltonian(&grid, &consts)?;
                Ok(Problem { contract, grid, consts, target, hamiltonian: Box::new(h) })
            }
            Contract::Asian => {
                let grid = SpaceGrid::new(self.y_min, self.y_max, 1 << self.qubits)?;
                let target = payoff_state_asian(&grid)?;
                let h = AsianHamiltonian { grid: grid.clone(), consts };
                Ok(Problem { contract, grid, consts, target, hamiltonian: Box::new(h) })
            }
        }
    }

    fn header(&self, out: &mut String) {
        let c = Contract::from(self.contract);
        writeln!(out, "# contract={}", c.name()).unwrap();
        for (k, v) in [
            ("s0", self.s0),
            ("strike", self.strike),
            ("sigma", self.sigma),
            ("rate", self.rate),
            ("maturity", self.maturity),
        ] {
            writeln!(out, "# {k}={v:?}").unwrap();
        }
        writeln!(out, "# qubits={}", self.qubits).unwrap();
        writeln!(out, "# cells={}", self.cells).unwrap();
        match c {
            Contract::European => writeln!(out, "# s_min={:?}\n# s_max={:?}", self.s_min, self.s_max).unwrap(),
            Contract::Asian => writeln!(out, "# y_min={:?}\n# y_max={:?}", self.y_min, self.y_max).unwrap(),
        }
        writeln!(out, "# seed={}", self.seed).unwrap();
    }

    fn path(&self, suffix: &str) -> PathBuf {
        self.out_dir.join(format!("{}_{suffix}.csv", Contract::from(self.contract).name()))
    }
}

impl CalibrationArgs {
    fn fit_config(&self, seed: u64) -> FitConfig {
        FitConfig {
            de: DeConfig { seed, max_generations: self.generations, ..DeConfig::default() },
            eps_max: self.eps_max,
            ..FitConfig::default()
        }
    }

    fn header(&self, out: &mut String) {
        writeln!(out, "# eps_max={:?}", self.eps_max).unwrap();
        writeln!(out, "# depth_search={}", self.depth_search).unwrap();
        writeln!(out, "# max_cells={}", self.max_cells).unwrap();
        writeln!(out, "# generations={}", self.generations).unwrap();
    }

    /// Returns the circuit actually used and its fit.
    fn calibrate(&self, p: &ProblemArgs, problem: &Problem) -> Result<(AnsatzCircuit, FitResult)> {
        let fit_cfg = self.fit_config(p.seed);
        if self.depth_search {
            let cfg = DepthSearchConfig { n_qubits: p.qubits, start_cells: 1, max_cells: self.max_cells, fit: fit_cfg };
            match ansatz_depth_search(&problem.target, &cfg)? {
                DepthSearch::Found { circuit, fit, .. } => Ok((circuit, fit)),
                DepthSearch::NotFound { best: Some(best), .. } => Ok(best),
                DepthSearch::NotFound { best: None, .. } => {
                    Err(Error::Config("depth search has no cell counts to try".into()))
                }
            }
        } else {
            let circuit = AnsatzCircuit::build(p.qubits, p.cells)?;
            let fit = fit_theta0(&circuit, &problem.target, &fit_cfg)?;
            Ok((circuit, fit))
        }
    }
}

fn write_file(path: &Path, header: &str, body: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)?;
        }
    }
    fs::write(path, format!("{header}{body}"))?;
    Ok(())
}

fn code_for(e: &Error) -> i32 {
    match e {
        Error::Divergence { .. } => EXIT_DIVERGED,
        _ => EXIT_USAGE,
    }
}

pub fn cmd_fit(args: &FitArgs) -> Result<i32> {
    let problem = args.problem.problem()?;
    let (_, fit) = args.calibration.calibrate(&args.problem, &problem)?;
    let mut header = String::new();
    args.problem.header(&mut header);
    args.calibration.header(&mut header);
    let path = args.problem.path("fit");
    write_file(&path, &header, &fit.to_csv())?;
    println!("residual={:e} cells={} converged={} -> {}", fit.residual, fit.n_cells, fit.converged, path.display());
    Ok(if fit.converged { EXIT_OK } else { EXIT_NOT_CONVERGED })
}

/// Key figures of a pricing run.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceSummary {
    pub quantum_price: f64,
    pub oracle_price: f64,
    pub closed_form_price: Option<f64>,
    pub fit_residual: f64,
    pub max_oracle_distance: f64,
    pub final_oracle_distance: f64,
    /// Y₀ for Asian contracts.
    pub y0: Option<f64>,
}

impl PriceSummary {
    fn to_csv(&self) -> String {
        let mut out = String::from("key,value\n");
        let mut row = |k: &str, v: f64| writeln!(out, "{k},{v:?}").unwrap();
        row("quantum_price", self.quantum_price);
        row("oracle_price", self.oracle_price);
        if let Some(bs) = self.closed_form_price {
            row("closed_form_price", bs);
        }
        row("abs_error", (self.quantum_price - self.oracle_price).abs());
        row("rel_error", ((self.quantum_price - self.oracle_price) / self.oracle_price).abs());
        row("fit_residual", self.fit_residual);
        row("max_oracle_distance", self.max_oracle_distance);
        row("final_oracle_distance", self.final_oracle_distance);
        if let Some(y0) = self.y0 {
            row("y0", y0);
        }
        out
    }
}

/// Quantum and oracle values on the grid plus the headline price.
struct Priced {
    grid_values: Vec<f64>,
    quantum: Vec<f64>,
    classical: Vec<f64>,
    quantum_price: f64,
    oracle_price: f64,
    closed_form: Option<f64>,
    y0: Option<f64>,
}

fn price_states(
    p: &ProblemArgs,
    problem: &Problem,
    phi: &StateVector,
    oracle: &StateVector,
    tau: f64,
    how: Interpolation,
) -> Result<Priced> {
    match problem.contract {
        Contract::European => {
            let q = rescale_to_price_european(phi, tau, &problem.grid, &problem.consts, p.strike)?;
            let o = rescale_to_price_european(oracle, tau, &problem.grid, &problem.consts, p.strike)?;
            let x0 = p.s0.ln();
            Ok(Priced {
                grid_values: problem.grid.values().iter().map(|x| x.exp()).collect(),
                quantum_price: interpolate(problem.grid.values(), &q, x0, how)?,
                oracle_price: interpolate(problem.grid.values(), &o, x0, how)?,
                quantum: q,
                classical: o,
                closed_form: Some(black_scholes_call(p.s0, p.strike, p.sigma, p.rate, p.maturity)?),
                y0: None,
            })
        }
        Contract::Asian => {
            let q = rescale_to_price_asian(phi, &problem.grid, p.s0, p.strike, &problem.consts, how)?;
            let o = rescale_to_price_asian(oracle, &problem.grid, p.s0, p.strike, &problem.consts, how)?;
            Ok(Priced {
                grid_values: problem.grid.values().to_vec(),
                quantum_price: q.price,
                oracle_price: o.price,
                quantum: q.q_values,
                classical: o.q_values,
                closed_form: None,
                y0: Some(q.y0),
            })
        }
    }
}

pub fn cmd_price(args: &PriceArgs) -> Result<i32> {
    let p = &args.problem;
    let problem = p.problem()?;
    let (circuit, fit) = match &args.theta_file {
        Some(path) => {
            let theta = load_theta(&fs::read_to_string(path)?)?;
            let circuit = AnsatzCircuit::build(p.qubits, p.cells)?;
            if theta.len() != circuit.n_params() {
                return Err(Error::Usage(format!(
                    "{} holds {} values, the circuit needs {}",
                    path.display(),
                    theta.len(),
                    circuit.n_params()
                )));
            }
            let residual = residual(&circuit, &theta, &problem.target.vector)?;
            let fit = FitResult {
                theta0: theta,
                residual,
                n_cells: p.cells,
                generations: 0,
                evaluations: 0,
                converged: residual <= args.calibration.eps_max,
            };
            (circuit, fit)
        }
        None => args.calibration.calibrate(p, &problem)?,
    };
    if !fit.converged {
        eprintln!("calibration residual {:e} exceeds eps_max {:e}", fit.residual, args.calibration.eps_max);
        return Ok(EXIT_NOT_CONVERGED);
    }

    let mut cfg = EvolutionConfig::new(args.steps, problem.consts.tau_max());
    cfg.cutoff_ratio = args.cutoff;
    cfg.rng_seed = p.seed;
    cfg.mode = match args.mode {
        ModeArg::Exact => MeasurementMode::Exact,
        ModeArg::Shots => MeasurementMode::Shots(args.shots),
    };
    let how = match args.interpolation {
        InterpolationArg::Linear => Interpolation::Linear,
        InterpolationArg::Quadratic => Interpolation::Quadratic,
    };

    let mut header = String::new();
    p.header(&mut header);
    args.calibration.header(&mut header);
    writeln!(header, "# steps={}", args.steps).unwrap();
    writeln!(header, "# cutoff={:?}", args.cutoff).unwrap();
    match cfg.mode {
        MeasurementMode::Exact => writeln!(header, "# mode=exact").unwrap(),
        MeasurementMode::Shots(s) => writeln!(header, "# mode=shots\n# shots={s}").unwrap(),
    }
    writeln!(header, "# interpolation={}", if how == Interpolation::Linear { "linear" } else { "quadratic" }).unwrap();

    let reference: ReferenceTrajectory =
        exact_imaginary_evolution_td(problem.hamiltonian.as_ref(), &problem.target.vector, &cfg.tau_grid())?;
    write_file(&p.path("reference"), &header, &reference.to_csv())?;

    let trace = match evolve(&circuit, &fit.theta0, problem.hamiltonian.as_ref(), &cfg, Some(&reference)) {
        Ok(t) => t,
        Err(Error::Divergence { step, norm, partial }) => {
            write_file(&p.path("trace"), &header, &partial.to_csv())?;
            eprintln!("evolution diverged at step {step} (|dθ/dτ| = {norm:e}); partial trace saved");
            return Ok(EXIT_DIVERGED);
        }
        Err(e) => return Err(e),
    };
    write_file(&p.path("trace"), &header, &trace.to_csv())?;

    let phi = circuit.prepare_state(trace.final_theta().unwrap())?;
    let priced = price_states(p, &problem, &phi, reference.last(), cfg.tau_final, how)?;
    let mut prices = String::from("grid_value,quantum_price,classical_price,abs_error\n");
    for ((g, q), o) in priced.grid_values.iter().zip(&priced.quantum).zip(&priced.classical) {
        writeln!(prices, "{g:?},{q:?},{o:?},{:?}", (q - o).abs()).unwrap();
    }
    write_file(&p.path("prices"), &header, &prices)?;

    let last = trace.records.last().unwrap();
    let summary = PriceSummary {
        quantum_price: priced.quantum_price,
        oracle_price: priced.oracle_price,
        closed_form_price: priced.closed_form,
        fit_residual: fit.residual,
        max_oracle_distance: trace.max_oracle_distance().unwrap_or(f64::NAN),
        final_oracle_distance: last.oracle_distance.unwrap_or(f64::NAN),
        y0: priced.y0,
    };
    write_file(&p.path("summary"), &header, &summary.to_csv())?;
    Ok(EXIT_OK)
}

pub fn cmd_replay(args: &ReplayArgs) -> Result<i32> {
    let p = &args.problem;
    let problem = p.problem()?;
    let theta = load_theta(&fs::read_to_string(&args.theta_file)?)?;
    let circuit = AnsatzCircuit::build(p.qubits, p.cells)?;
    if theta.len() != circuit.n_params() {
        return Err(Error::Usage(format!(
            "{} holds {} values, the circuit needs {}",
            args.theta_file.display(),
            theta.len(),
            circuit.n_params()
        )));
    }
    let reference = match args.against {
        ReplayAgainst::Payoff => problem.target.vector.clone(),
        ReplayAgainst::Terminal => {
            let cfg = EvolutionConfig::new(args.steps, problem.consts.tau_max());
            exact_imaginary_evolution_td(problem.hamiltonian.as_ref(), &problem.target.vector, &cfg.tau_grid())?
                .last()
                .clone()
        }
    };
    let r = residual(&circuit, &theta, &reference)?;
    println!("residual={r:?}");
    Ok(EXIT_OK)
}

/// Parse `args` (including the program name) and run. Returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let out = match &cli.command {
        Command::Fit(a) => cmd_fit(a),
        Command::Price(a) => cmd_price(a).inspect(|&code| {
            if code == EXIT_OK {
                if let Ok(text) = fs::read_to_string(a.problem.path("summary")) {
                    print!("{}", text.lines().filter(|l| !l.starts_with('#')).collect::<Vec<_>>().join("\n") + "\n");
                }
            }
        }),
        Command::Replay(a) => cmd_replay(a),
    };
    match out {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            code_for(&e)
        }
    }
}
