//! Payoff targets and the fit of initial ansatz parameters.
//!
//! θ₀ minimizes ε(θ) = ‖φ(θ) − ψ(0)‖. The global search is a seeded
//! differential evolution (rand/1/bin); its best member is then polished by
//! Levenberg-Marquardt on the residual vector, using the generator-inserted
//! derivative states as the Jacobian.

use std::f64::consts::PI;
use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::ansatz::AnsatzCircuit;
use crate::error::{config, usage, Error, Result};
use crate::hamiltonian::{SpaceGrid, TransformConstants};
use crate::statevector::StateVector;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Contract {
    European,
    Asian,
}

impl Contract {
    pub fn name(self) -> &'static str {
        match self {
            Contract::European => "european",
            Contract::Asian => "asian",
        }
    }
}

/// Normalized encoding of a payoff on a grid.
#[derive(Debug, Clone)]
pub struct TargetState {
    pub vector: StateVector,
    pub contract: Contract,
    pub grid: SpaceGrid,
    /// Unnormalized entries, so the normalization can be undone.
    pub raw: Vec<f64>,
}

impl TargetState {
    fn from_raw(raw: Vec<f64>, contract: Contract, grid: &SpaceGrid) -> Result<Self> {
        let norm = raw.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(config("payoff is zero on every grid point"));
        }
        let unit: Vec<f64> = raw.iter().map(|v| v / norm).collect();
        Ok(Self { vector: StateVector::from_real(&unit)?, contract, grid: grid.clone(), raw })
    }

    /// 1/‖raw‖, the γ(0) of the encoding.
    pub fn gamma0(&self) -> f64 {
        1.0 / self.raw.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// e^{−a x}·max(e^x − K, 0) on a log-price grid, normalized.
pub fn payoff_state_european(grid: &SpaceGrid, strike: f64, consts: &TransformConstants) -> Result<TargetState> {
    if !(strike > 0.0) {
        return Err(config(format!("strike must be positive, got {strike}")));
    }
    let a = consts.a();
    let raw = grid.values().iter().map(|x| (-a * x).exp() * (x.exp() - strike).max(0.0)).collect();
    TargetState::from_raw(raw, Contract::European, grid)
}

/// max(y, 0) on a y grid, normalized.
pub fn payoff_state_asian(grid: &SpaceGrid) -> Result<TargetState> {
    let raw = grid.values().iter().map(|y| y.max(0.0)).collect();
    TargetState::from_raw(raw, Contract::Asian, grid)
}

/// Differential-evolution settings.
#[derive(Debug, Clone)]
pub struct DeConfig {
    /// Population size per parameter.
    pub pop_per_param: usize,
    pub f: f64,
    pub cr: f64,
    pub max_generations: usize,
    pub lower: f64,
    pub upper: f64,
    pub seed: u64,
    /// Stop once the best residual falls below this.
    pub stop_residual: f64,
}

impl Default for DeConfig {
    fn default() -> Self {
        Self {
            pop_per_param: 15,
            f: 0.8,
            cr: 0.9,
            max_generations: 2000,
            lower: -PI,
            upper: 3.0 * PI,
            seed: 0,
            stop_residual: 1e-9,
        }
    }
}

#[derive(Debug, Clone)]
pub struct FitConfig {
    pub de: DeConfig,
    /// Residual at or below which the fit counts as converged.
    pub eps_max: f64,
    pub polish_iterations: usize,
    /// Seeded into the initial population, padded with zeros or truncated.
    pub warm_start: Option<Vec<f64>>,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self { de: DeConfig::default(), eps_max: 0.05, polish_iterations: 200, warm_start: None }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub theta0: Vec<f64>,
    pub residual: f64,
    pub n_cells: usize,
    pub generations: usize,
    pub evaluations: usize,
    pub converged: bool,
}

impl FitResult {
    /// `param,theta` rows behind a `#` summary block.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        writeln!(out, "# residual={:e}", self.residual).unwrap();
        writeln!(out, "# n_cells={}", self.n_cells).unwrap();
        writeln!(out, "# generations={}", self.generations).unwrap();
        writeln!(out, "# evaluations={}", self.evaluations).unwrap();
        writeln!(out, "# converged={}", self.converged).unwrap();
        out.push_str("param,theta\n");
        for (k, t) in self.theta0.iter().enumerate() {
            writeln!(out, "{},{t:?}", k + 1).unwrap();
        }
        out
    }
}

/// Read θ values from text: the last comma-separated field of every row that
/// parses as a number; `#` lines and non-numeric headers are skipped.
pub fn load_theta(text: &str) -> Result<Vec<f64>> {
    let mut theta = Vec::new();
    for line in text.lines().map(str::trim) {
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let field = line.rsplit(',').next().unwrap().trim();
        match field.parse::<f64>() {
            Ok(v) if v.is_finite() => theta.push(v),
            Ok(_) => return Err(Error::Parse(format!("non-finite θ value in line '{line}'"))),
            Err(_) if theta.is_empty() => continue,
            Err(_) => return Err(Error::Parse(format!("cannot read θ from line '{line}'"))),
        }
    }
    if theta.is_empty() {
        return Err(Error::Parse("no θ values found".into()));
    }
    Ok(theta)
}

/// ‖φ(θ) − target‖.
pub fn residual(circuit: &AnsatzCircuit, theta: &[f64], target: &StateVector) -> Result<f64> {
    circuit.prepare_state(theta)?.distance(target)
}

fn residual_vector(circuit: &AnsatzCircuit, theta: &[f64], target: &[f64]) -> Result<DVector<f64>> {
    let phi = circuit.prepare_state(theta)?.real_parts();
    Ok(DVector::from_iterator(target.len(), phi.iter().zip(target).map(|(p, t)| p - t)))
}

/// Levenberg-Marquardt on r(θ) = φ(θ) − target.
fn polish(circuit: &AnsatzCircuit, theta: &mut Vec<f64>, target: &[f64], iterations: usize) -> Result<(f64, usize)> {
    let n = theta.len();
    let mut r = residual_vector(circuit, theta, target)?;
    let mut cost = r.norm_squared();
    let mut mu = 1e-3;
    let mut evals = 1;
    for _ in 0..iterations {
        let derivs = circuit.derivative_states(theta)?;
        let j = DMatrix::from_fn(target.len(), n, |row, col| derivs[col].amplitudes()[row].re);
        let jtj = j.transpose() * &j;
        let g = j.transpose() * &r;
        if g.amax() < 1e-15 {
            break;
        }
        let mut improved = false;
        while mu < 1e12 {
            let mut damped = jtj.clone();
            for k in 0..n {
                damped[(k, k)] += mu * (1.0 + jtj[(k, k)]);
            }
            let Some(step) = damped.cholesky().map(|c| c.solve(&(-&g))) else {
                mu *= 10.0;
                continue;
            };
            let trial: Vec<f64> = theta.iter().zip(step.iter()).map(|(t, s)| t + s).collect();
            let r_trial = residual_vector(circuit, &trial, target)?;
            evals += 1;
            let c_trial = r_trial.norm_squared();
            if c_trial < cost {
                *theta = trial;
                r = r_trial;
                let gain = cost - c_trial;
                cost = c_trial;
                mu = (mu / 3.0).max(1e-12);
                improved = gain > 1e-30;
                break;
            }
            mu *= 10.0;
        }
        if !improved {
            break;
        }
    }
    Ok((cost.sqrt(), evals))
}

/// Differential evolution followed by a local polish.
pub fn fit_theta0(circuit: &AnsatzCircuit, target: &TargetState, cfg: &FitConfig) -> Result<FitResult> {
    let de = &cfg.de;
    if target.vector.n_qubits() != circuit.n_qubits() {
        return Err(usage("target and circuit register sizes differ"));
    }
    if !(de.f > 0.0 && de.f <= 2.0) || !(0.0..=1.0).contains(&de.cr) || !(de.lower < de.upper) {
        return Err(config("invalid differential evolution settings"));
    }
    if de.pop_per_param == 0 || !(cfg.eps_max > 0.0) {
        return Err(config("population size and ε_max must be positive"));
    }
    let n = circuit.n_params();
    let target_re = target.vector.real_parts();
    let cost = |theta: &[f64]| -> Result<f64> { Ok(residual_vector(circuit, theta, &target_re)?.norm()) };
    let np = (de.pop_per_param * n).max(4);
    let mut rng = ChaCha8Rng::seed_from_u64(de.seed);

    let mut pop: Vec<Vec<f64>> = (0..np)
        .map(|_| (0..n).map(|_| rng.random_range(de.lower..de.upper)).collect())
        .collect();
    if let Some(w) = &cfg.warm_start {
        pop[0] = (0..n).map(|k| w.get(k).copied().unwrap_or(0.0)).collect();
    }
    let mut fit: Vec<f64> = pop.iter().map(|p| cost(p)).collect::<Result<_>>()?;
    let mut evaluations = np;
    let mut best = (0..np).min_by(|&a, &b| fit[a].total_cmp(&fit[b])).unwrap();
    let mut generations = 0;

    while generations < de.max_generations && fit[best] > de.stop_residual {
        generations += 1;
        for i in 0..np {
            let pick = |rng: &mut ChaCha8Rng, avoid: &[usize]| loop {
                let k = rng.random_range(0..np);
                if !avoid.contains(&k) {
                    break k;
                }
            };
            let r1 = pick(&mut rng, &[i]);
            let r2 = pick(&mut rng, &[i, r1]);
            let r3 = pick(&mut rng, &[i, r1, r2]);
            let forced = rng.random_range(0..n);
            let mut trial = pop[i].clone();
            for k in 0..n {
                if k == forced || rng.random::<f64>() < de.cr {
                    let mut v = pop[r1][k] + de.f * (pop[r2][k] - pop[r3][k]);
                    if v < de.lower || v > de.upper {
                        v = rng.random_range(de.lower..de.upper);
                    }
                    trial[k] = v;
                }
            }
            let c = cost(&trial)?;
            evaluations += 1;
            if c <= fit[i] {
                pop[i] = trial;
                fit[i] = c;
                if c < fit[best] {
                    best = i;
                }
            }
        }
        let worst = fit.iter().cloned().fold(f64::MIN, f64::max);
        if worst - fit[best] < 1e-12 {
            break;
        }
    }

    let mut theta0 = pop[best].clone();
    let (_, polish_evals) = polish(circuit, &mut theta0, &target_re, cfg.polish_iterations)?;
    evaluations += polish_evals;
    let residual = residual(circuit, &theta0, &target.vector)?;
    Ok(FitResult {
        theta0,
        residual,
        n_cells: circuit.n_cells(),
        generations,
        evaluations,
        converged: residual <= cfg.eps_max,
    })
}

#[derive(Debug, Clone)]
pub struct DepthSearchConfig {
    pub n_qubits: usize,
    pub start_cells: usize,
    /// Largest cell count tried, inclusive.
    pub max_cells: usize,
    pub fit: FitConfig,
}

/// Outcome of the depth search.
#[derive(Debug, Clone)]
pub enum DepthSearch {
    Found { circuit: AnsatzCircuit, fit: FitResult, history: Vec<FitResult> },
    /// No depth up to the limit reached ε_max; carries the best attempt if any.
    NotFound { best: Option<(AnsatzCircuit, FitResult)>, history: Vec<FitResult> },
}

impl DepthSearch {
    pub fn history(&self) -> &[FitResult] {
        match self {
            DepthSearch::Found { history, .. } | DepthSearch::NotFound { history, .. } => history,
        }
    }
}

/// Fit with increasing cell count until ε ≤ ε_max. Each escalation is warm
/// started from the previous optimum padded with zeros, which is the same
/// state since zero-angle cells act as the identity.
pub fn ansatz_depth_search(target: &TargetState, cfg: &DepthSearchConfig) -> Result<DepthSearch> {
    let mut history: Vec<FitResult> = Vec::new();
    let mut best: Option<(AnsatzCircuit, FitResult)> = None;
    let mut warm = cfg.fit.warm_start.clone();
    for cells in cfg.start_cells..=cfg.max_cells {
        let circuit = AnsatzCircuit::build(cfg.n_qubits, cells)?;
        let fit_cfg = FitConfig { warm_start: warm.clone(), ..cfg.fit.clone() };
        let fit = fit_theta0(&circuit, target, &fit_cfg)?;
        history.push(fit.clone());
        warm = Some(fit.theta0.clone());
        if fit.converged {
            return Ok(DepthSearch::Found { circuit, fit, history });
        }
        if best.as_ref().is_none_or(|(_, b)| fit.residual < b.residual) {
            best = Some((circuit, fit));
        }
    }
    Ok(DepthSearch::NotFound { best, history })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn consts() -> TransformConstants {
        TransformConstants::new(0.2, 0.0, 1.0).unwrap()
    }

    fn euro_grid() -> SpaceGrid {
        SpaceGrid::log_price(50.0, 150.0, 4).unwrap()
    }

    fn quick(seed: u64, eps_max: f64) -> FitConfig {
        FitConfig {
            de: DeConfig { pop_per_param: 8, max_generations: 300, seed, ..DeConfig::default() },
            eps_max,
            ..FitConfig::default()
        }
    }

    #[test]
    fn european_payoff_entries() {
        let t = payoff_state_european(&euro_grid(), 100.0, &consts()).unwrap();
        assert!((t.vector.norm() - 1.0).abs() < 1e-12);
        for (x, v) in euro_grid().values().iter().zip(&t.raw) {
            if x.exp() <= 100.0 {
                assert_eq!(*v, 0.0);
            } else {
                assert!(*v > 0.0);
            }
        }
        let last = *t.raw.last().unwrap();
        assert!((last - 50.0 / 150f64.sqrt()).abs() < 1e-12);
        assert!(t.vector.real_parts().iter().all(|v| *v >= 0.0));
    }

    #[test]
    fn asian_payoff_entries() {
        let grid = SpaceGrid::new(-0.5, 0.4, 16).unwrap();
        let t = payoff_state_asian(&grid).unwrap();
        assert!((t.vector.norm() - 1.0).abs() < 1e-12);
        assert!((t.raw[15] - 0.4).abs() < 1e-15);
        for (y, v) in grid.values().iter().zip(&t.raw) {
            assert_eq!(*v, y.max(0.0));
        }
    }

    #[test]
    fn zero_payoff_is_rejected() {
        let grid = SpaceGrid::log_price(50.0, 90.0, 4).unwrap();
        assert!(matches!(payoff_state_european(&grid, 100.0, &consts()), Err(Error::Config(_))));
        let grid = SpaceGrid::new(-0.5, -0.1, 16).unwrap();
        assert!(matches!(payoff_state_asian(&grid), Err(Error::Config(_))));
    }

    #[test]
    fn self_target_is_recovered() {
        let c = AnsatzCircuit::build(4, 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let star: Vec<f64> = (0..11).map(|_| rng.random_range(-PI..3.0 * PI)).collect();
        let phi = c.prepare_state(&star).unwrap();
        let target = TargetState {
            raw: phi.real_parts(),
            vector: phi,
            contract: Contract::European,
            grid: euro_grid(),
        };
        let fit = fit_theta0(&c, &target, &quick(1, 1e-6)).unwrap();
        assert!(fit.residual <= 1e-6, "ε = {}", fit.residual);
        assert!(fit.converged);
    }

    #[test]
    fn residual_is_recomputable_and_deterministic() {
        let c = AnsatzCircuit::build(4, 1).unwrap();
        let target = payoff_state_european(&euro_grid(), 100.0, &consts()).unwrap();
        let a = fit_theta0(&c, &target, &quick(5, 0.05)).unwrap();
        let b = fit_theta0(&c, &target, &quick(5, 0.05)).unwrap();
        assert_eq!(a, b);
        let again = c.prepare_state(&a.theta0).unwrap().distance(&target.vector).unwrap();
        assert!((again - a.residual).abs() <= 1e-12);
        assert!(a.residual >= 0.0);
    }

    #[test]
    fn csv_round_trip() {
        let fit = FitResult {
            theta0: vec![0.1, -2.5, 1.0 / 3.0],
            residual: 0.01,
            n_cells: 0,
            generations: 3,
            evaluations: 9,
            converged: true,
        };
        assert_eq!(load_theta(&fit.to_csv()).unwrap(), fit.theta0);
        assert_eq!(load_theta("4.173\n\n-1.5\n").unwrap(), vec![4.173, -1.5]);
        assert!(load_theta("# nothing\n").is_err());
        assert!(load_theta("1.0\nabc\n").is_err());
    }

    #[test]
    fn depth_search_loose_tolerance_stops_at_first_depth() {
        let target = payoff_state_european(&euro_grid(), 100.0, &consts()).unwrap();
        let cfg = DepthSearchConfig { n_qubits: 4, start_cells: 1, max_cells: 4, fit: quick(2, 1.0) };
        match ansatz_depth_search(&target, &cfg).unwrap() {
            DepthSearch::Found { circuit, history, .. } => {
                assert_eq!(circuit.n_cells(), 1);
                assert_eq!(history.len(), 1);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn depth_search_guard_and_monotone_escalation() {
        let target = payoff_state_european(&euro_grid(), 100.0, &consts()).unwrap();
        let cfg = DepthSearchConfig { n_qubits: 4, start_cells: 3, max_cells: 2, fit: quick(2, 0.05) };
        match ansatz_depth_search(&target, &cfg).unwrap() {
            DepthSearch::NotFound { best: None, history } => assert!(history.is_empty()),
            other => panic!("{other:?}"),
        }
        let cfg = DepthSearchConfig { n_qubits: 4, start_cells: 1, max_cells: 3, fit: quick(3, 1e-30) };
        let out = ansatz_depth_search(&target, &cfg).unwrap();
        assert!(matches!(out, DepthSearch::NotFound { best: Some(_), .. }));
        let res: Vec<f64> = out.history().iter().map(|f| f.residual).collect();
        assert_eq!(res.len(), 3);
        for w in res.windows(2) {
            assert!(w[1] <= w[0] + 1e-12, "{res:?}");
        }
    }
}
