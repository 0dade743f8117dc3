//! Variational imaginary-time evolution.
//!
//! At every step the McLachlan system A θ̇ = C is assembled from the ansatz,
//!
//! ```text
//! A_ij = Re ⟨∂_i φ | ∂_j φ⟩,    C_i = Re ⟨∂_i φ | H | φ⟩,
//! ```
//!
//! solved by truncated-SVD least squares and integrated with explicit Euler
//! steps. C carries no minus sign because the propagator is e^{+Hτ}.
//!
//! Two measurement modes are available. `Exact` reads A and C off the
//! simulated statevector. `Shots` estimates every entry with ancilla-based
//! interference circuits (one ancilla, two Hadamards, X staging) and draws
//! binomial samples of the ancilla outcome.

use std::fmt::Write as _;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector, SymmetricEigen, SVD};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};

use crate::ansatz::{AnsatzCircuit, GeneratorTerm, Pauli1};
use crate::error::{config, usage, Error, Result};
use crate::hamiltonian::{pauli_decompose, HamiltonianSource, PauliDecomposition, PauliTerm};
use crate::oracle::ReferenceTrajectory;
use crate::statevector::{GateMatrix, Qubit, StateVector};

/// Default relative singular-value cutoff.
pub const DEFAULT_CUTOFF_RATIO: f64 = 1e-8;

/// Abort threshold on ‖θ̇‖.
pub const DIVERGENCE_LIMIT: f64 = 1e6;

const PSD_TOL: f64 = 1e-10;

/// A and C at one point of parameter space.
#[derive(Debug, Clone)]
pub struct McLachlanSystem {
    pub a: DMatrix<f64>,
    pub c: DVector<f64>,
}

impl McLachlanSystem {
    pub fn singular_values(&self) -> DVector<f64> {
        SVD::new(self.a.clone(), false, false).singular_values
    }

    pub fn min_eigenvalue(&self) -> f64 {
        SymmetricEigen::new(self.a.clone()).eigenvalues.min()
    }

    /// Symmetry and positive-semidefiniteness of A.
    pub fn check_metric(&self) -> Result<()> {
        let asym = (&self.a - self.a.transpose()).amax();
        if asym > PSD_TOL {
            return Err(Error::Numerical(format!("A is not symmetric (max asymmetry {asym:e})")));
        }
        let min = self.min_eigenvalue();
        if min < -PSD_TOL {
            return Err(Error::Numerical(format!("A is not positive semidefinite (λ_min = {min:e})")));
        }
        Ok(())
    }
}

fn gram(derivs: &[StateVector]) -> Result<DMatrix<f64>> {
    let n = derivs.len();
    let mut a = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = derivs[i].inner(&derivs[j])?.re;
            a[(i, j)] = v;
            a[(j, i)] = v;
        }
    }
    Ok(a)
}

/// A_ij = Re⟨∂_iφ|∂_jφ⟩ from generator-inserted derivative states.
pub fn assemble_a(circuit: &AnsatzCircuit, theta: &[f64]) -> Result<DMatrix<f64>> {
    gram(&circuit.derivative_states(theta)?)
}

fn project(derivs: &[StateVector], h_phi: &StateVector) -> Result<DVector<f64>> {
    let c: Result<Vec<f64>> = derivs.iter().map(|d| Ok(d.inner(h_phi)?.re)).collect();
    Ok(DVector::from_vec(c?))
}

/// C_i = Re⟨∂_iφ|H|φ⟩ with H applied as a dense matrix.
pub fn assemble_c(circuit: &AnsatzCircuit, theta: &[f64], h: &DMatrix<f64>) -> Result<DVector<f64>> {
    let phi = circuit.prepare_state(theta)?;
    project(&circuit.derivative_states(theta)?, &phi.apply_real_dense(h)?)
}

/// C_i = Re Σ_j λ_j ⟨∂_iφ|h_j|φ⟩ with H applied term by term.
pub fn assemble_c_pauli(circuit: &AnsatzCircuit, theta: &[f64], h: &PauliDecomposition) -> Result<DVector<f64>> {
    if h.n_qubits != circuit.n_qubits() {
        return Err(usage("Hamiltonian and circuit register sizes differ"));
    }
    let phi = circuit.prepare_state(theta)?;
    project(&circuit.derivative_states(theta)?, &h.apply(&phi)?)
}

/// Both A and C from one set of derivative states.
pub fn assemble_system(circuit: &AnsatzCircuit, theta: &[f64], h: &DMatrix<f64>) -> Result<McLachlanSystem> {
    if h.nrows() != 1 << circuit.n_qubits() {
        return Err(usage(format!("Hamiltonian dimension {} does not match the circuit", h.nrows())));
    }
    let derivs = circuit.derivative_states(theta)?;
    let phi = circuit.prepare_state(theta)?;
    Ok(McLachlanSystem { a: gram(&derivs)?, c: project(&derivs, &phi.apply_real_dense(h)?)? })
}

/// Minimum-norm least-squares solution of A θ̇ = C.
#[derive(Debug, Clone)]
pub struct ThetaDot {
    pub value: DVector<f64>,
    /// Singular values kept.
    pub rank: usize,
    /// True when every singular value fell below the cutoff.
    pub degenerate: bool,
}

/// Pseudo-inverse solve discarding singular values below `cutoff_ratio · σ_max`.
pub fn solve_thetadot(a: &DMatrix<f64>, c: &DVector<f64>, cutoff_ratio: f64) -> Result<ThetaDot> {
    if !(cutoff_ratio > 0.0 && cutoff_ratio < 1.0) {
        return Err(config(format!("cutoff ratio must lie in (0, 1), got {cutoff_ratio}")));
    }
    if a.nrows() != c.len() || !a.is_square() {
        return Err(usage("A must be square and match C"));
    }
    let n = c.len();
    let svd = SVD::new(a.clone(), true, true);
    let s_max = svd.singular_values.max();
    let (u, vt) = (svd.u.as_ref().unwrap(), svd.v_t.as_ref().unwrap());
    let mut value = DVector::zeros(n);
    let mut rank = 0;
    if s_max > 0.0 {
        let threshold = cutoff_ratio * s_max;
        for (k, &s) in svd.singular_values.iter().enumerate() {
            if s >= threshold {
                let coef = u.column(k).dot(c) / s;
                value += vt.row(k).transpose() * coef;
                rank += 1;
            }
        }
    }
    Ok(ThetaDot { value, rank, degenerate: rank == 0 })
}

/// How A and C are obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeasurementMode {
    /// Expectation values read directly from the statevector.
    Exact,
    /// Interference circuits sampled `shots` times per measured quantity.
    Shots(u64),
}

/// Which part of an overlap ⟨a|b⟩ a measurement circuit returns.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Part {
    Re,
    Im,
}

/// Pauli operators inserted on one branch of a measurement circuit.
#[derive(Debug, Clone)]
pub struct Insertion {
    /// Insert right after this gate index, or after the whole circuit when `None`.
    pub after_gate: Option<usize>,
    pub paulis: Vec<(Qubit, Pauli1)>,
}

impl Insertion {
    fn from_generator(circuit: &AnsatzCircuit, param: usize, term: &GeneratorTerm) -> Result<Self> {
        Ok(Self { after_gate: Some(circuit.gate_of_param(param)?), paulis: term.paulis.clone() })
    }

    fn final_string(term: &PauliTerm) -> Self {
        let paulis = term
            .string
            .0
            .iter()
            .enumerate()
            .filter(|(_, p)| **p != Pauli1::I)
            .map(|(i, p)| (Qubit(i + 1), *p))
            .collect();
        Self { after_gate: None, paulis }
    }
}

/// Ancilla ⟨Z⟩ of the interference circuit for Re or Im of ⟨ψ₀|W₀† W₁|ψ₀⟩.
///
/// The ancilla is qubit 1 and the system register is shifted up by one. The
/// ancilla starts in H|0⟩ (followed by S† for the imaginary part). Branch 0
/// insertions are controlled on the ancilla being |0⟩, staged by a pair of X
/// gates; branch 1 insertions are controlled on |1⟩. A final H maps the
/// interference onto ⟨Z⟩.
pub fn interference_expectation(
    circuit: &AnsatzCircuit,
    theta: &[f64],
    branch0: &Insertion,
    branch1: &Insertion,
    part: Part,
) -> Result<f64> {
    let wide = circuit.shifted(1);
    let anc = Qubit(1);
    let shift = |q: Qubit| Qubit(q.0 + 1);
    let mut s = StateVector::zero(wide.n_qubits())?;
    s.apply_single(&GateMatrix::h(), anc)?;
    if part == Part::Im {
        s.apply_single(&GateMatrix::s_dag(), anc)?;
    }
    let insert = |s: &mut StateVector, ins: &Insertion, on_zero: bool| -> Result<()> {
        if on_zero {
            s.apply_single(&GateMatrix::x(), anc)?;
        }
        for (q, p) in &ins.paulis {
            if *p != Pauli1::I {
                s.apply_controlled(&p.matrix(), anc, shift(*q))?;
            }
        }
        if on_zero {
            s.apply_single(&GateMatrix::x(), anc)?;
        }
        Ok(())
    };
    let n_ops = wide.ops().len();
    for g in 0..n_ops {
        wide.run_gates(theta, g..g + 1, &mut s)?;
        if branch0.after_gate == Some(g) {
            insert(&mut s, branch0, true)?;
        }
        if branch1.after_gate == Some(g) {
            insert(&mut s, branch1, false)?;
        }
    }
    if branch0.after_gate.is_none() {
        insert(&mut s, branch0, true)?;
    }
    if branch1.after_gate.is_none() {
        insert(&mut s, branch1, false)?;
    }
    s.apply_single(&GateMatrix::h(), anc)?;
    s.expect_z(anc)
}

/// Turn an exact ±1-observable expectation into an estimate under `mode`.
fn measure(expectation: f64, mode: MeasurementMode, rng: &mut ChaCha8Rng) -> Result<f64> {
    match mode {
        MeasurementMode::Exact => Ok(expectation),
        MeasurementMode::Shots(0) => Err(config("shot mode needs at least one shot")),
        MeasurementMode::Shots(shots) => {
            let p0 = ((1.0 + expectation) / 2.0).clamp(0.0, 1.0);
            let zeros = Binomial::new(shots, p0).map_err(|e| Error::Numerical(e.to_string()))?.sample(rng);
            Ok(2.0 * zeros as f64 / shots as f64 - 1.0)
        }
    }
}

/// Re Σ w·⟨a|b⟩ measured one part at a time.
fn weighted_overlap(
    circuit: &AnsatzCircuit,
    theta: &[f64],
    b0: &Insertion,
    b1: &Insertion,
    weight: Complex64,
    mode: MeasurementMode,
    rng: &mut ChaCha8Rng,
) -> Result<f64> {
    // Re(w z) = Re w · Re z − Im w · Im z
    let mut total = 0.0;
    if weight.re != 0.0 {
        let z = interference_expectation(circuit, theta, b0, b1, Part::Re)?;
        total += weight.re * measure(z, mode, rng)?;
    }
    if weight.im != 0.0 {
        let z = interference_expectation(circuit, theta, b0, b1, Part::Im)?;
        total -= weight.im * measure(z, mode, rng)?;
    }
    Ok(total)
}

/// Right-hand operand of [`hadamard_test_entry`].
#[derive(Debug, Clone)]
pub enum HadamardTarget {
    /// Metric entry A_ij against parameter j.
    Param(usize),
    /// Contribution Re Σ_k f*_k λ ⟨Φ̃_k ψ|h|φ⟩ of one Hamiltonian term to C_i.
    Pauli(PauliTerm),
}

/// One A or C contribution estimated with interference circuits.
pub fn hadamard_test_entry(
    circuit: &AnsatzCircuit,
    theta: &[f64],
    i: usize,
    target: &HadamardTarget,
    mode: MeasurementMode,
    rng: &mut ChaCha8Rng,
) -> Result<f64> {
    let gi = circuit.gate_of_param(i)?;
    let terms_i = circuit.ops()[gi].generator_terms();
    let mut total = 0.0;
    match target {
        HadamardTarget::Param(j) => {
            let gj = circuit.gate_of_param(*j)?;
            for ta in &terms_i {
                for tb in circuit.ops()[gj].generator_terms() {
                    let w = ta.factor.conj() * tb.factor;
                    let b0 = Insertion::from_generator(circuit, i, ta)?;
                    let b1 = Insertion::from_generator(circuit, *j, &tb)?;
                    total += weighted_overlap(circuit, theta, &b0, &b1, w, mode, rng)?;
                }
            }
        }
        HadamardTarget::Pauli(term) => {
            if term.string.n_qubits() != circuit.n_qubits() {
                return Err(usage("Pauli term length differs from the circuit register"));
            }
            let b1 = Insertion::final_string(term);
            for ta in &terms_i {
                let w = ta.factor.conj() * term.coeff;
                let b0 = Insertion::from_generator(circuit, i, ta)?;
                total += weighted_overlap(circuit, theta, &b0, &b1, w, mode, rng)?;
            }
        }
    }
    Ok(total)
}

/// Raw Re⟨ψ₀|Φ̃_i† Φ̃_j|ψ₀⟩ for two single-generator (plain Ry) parameters.
pub fn hadamard_overlap(
    circuit: &AnsatzCircuit,
    theta: &[f64],
    i: usize,
    j: usize,
    mode: MeasurementMode,
    rng: &mut ChaCha8Rng,
) -> Result<f64> {
    let term = |k: usize| -> Result<GeneratorTerm> {
        let mut t = circuit.ops()[circuit.gate_of_param(k)?].generator_terms();
        if t.len() != 1 {
            return Err(usage(format!("parameter {k} has a multi-term generator")));
        }
        Ok(t.remove(0))
    };
    let b0 = Insertion::from_generator(circuit, i, &term(i)?)?;
    let b1 = Insertion::from_generator(circuit, j, &term(j)?)?;
    let z = interference_expectation(circuit, theta, &b0, &b1, Part::Re)?;
    measure(z, mode, rng)
}

/// Full A from interference circuits.
pub fn assemble_a_hadamard(
    circuit: &AnsatzCircuit,
    theta: &[f64],
    mode: MeasurementMode,
    rng: &mut ChaCha8Rng,
) -> Result<DMatrix<f64>> {
    let n = circuit.n_params();
    let mut a = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = hadamard_test_entry(circuit, theta, i, &HadamardTarget::Param(j), mode, rng)?;
            a[(i, j)] = v;
            a[(j, i)] = v;
        }
    }
    Ok(a)
}

/// Full C from interference circuits over the Pauli terms of H.
pub fn assemble_c_hadamard(
    circuit: &AnsatzCircuit,
    theta: &[f64],
    h: &PauliDecomposition,
    mode: MeasurementMode,
    rng: &mut ChaCha8Rng,
) -> Result<DVector<f64>> {
    let mut c = DVector::zeros(circuit.n_params());
    for i in 0..circuit.n_params() {
        for term in &h.terms {
            c[i] += hadamard_test_entry(circuit, theta, i, &HadamardTarget::Pauli(term.clone()), mode, rng)?;
        }
    }
    Ok(c)
}

#[derive(Debug, Clone)]
pub struct EvolutionConfig {
    pub n_steps: usize,
    /// End of the scaled-time interval, σ²T for a full run.
    pub tau_final: f64,
    pub cutoff_ratio: f64,
    pub mode: MeasurementMode,
    pub rng_seed: u64,
    /// Subtract Re⟨∂_iφ|φ⟩⟨φ|H|φ⟩ from C_i. Off by default.
    pub phase_correction: bool,
}

impl EvolutionConfig {
    pub fn new(n_steps: usize, tau_final: f64) -> Self {
        Self {
            n_steps,
            tau_final,
            cutoff_ratio: DEFAULT_CUTOFF_RATIO,
            mode: MeasurementMode::Exact,
            rng_seed: 0,
            phase_correction: false,
        }
    }

    pub fn dtau(&self) -> f64 {
        self.tau_final / self.n_steps as f64
    }

    pub fn tau_grid(&self) -> Vec<f64> {
        (0..=self.n_steps).map(|k| self.tau_final * k as f64 / self.n_steps as f64).collect()
    }

    fn validate(&self) -> Result<()> {
        if self.n_steps == 0 {
            return Err(config("n_steps must be at least 1"));
        }
        if !(self.tau_final > 0.0) {
            return Err(config(format!("final τ must be positive, got {}", self.tau_final)));
        }
        if !(self.cutoff_ratio > 0.0 && self.cutoff_ratio < 1.0) {
            return Err(config(format!("cutoff ratio must lie in (0, 1), got {}", self.cutoff_ratio)));
        }
        if self.mode == MeasurementMode::Shots(0) {
            return Err(config("shot mode needs at least one shot"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct StepRecord {
    pub step: usize,
    pub tau: f64,
    pub theta: Vec<f64>,
    pub thetadot_norm: f64,
    /// ‖A θ̇ − C‖.
    pub residual: f64,
    pub rank: usize,
    /// ‖ψ(τ) − φ(θ_τ)‖ when a reference trajectory is attached.
    pub oracle_distance: Option<f64>,
    pub wall_time: Duration,
}

#[derive(Debug, Clone, Default)]
pub struct EvolutionTrace {
    pub records: Vec<StepRecord>,
}

impl EvolutionTrace {
    pub fn final_theta(&self) -> Option<&[f64]> {
        self.records.last().map(|r| r.theta.as_slice())
    }

    pub fn max_oracle_distance(&self) -> Option<f64> {
        self.records.iter().map(|r| r.oracle_distance).try_fold(0.0f64, |m, d| d.map(|d| m.max(d)))
    }

    /// `step,tau,theta_1..theta_N,residual,oracle_distance`. Wall times are omitted
    /// so identical runs produce identical files.
    pub fn to_csv(&self) -> String {
        let n = self.records.first().map_or(0, |r| r.theta.len());
        let mut out = String::from("step,tau");
        for k in 1..=n {
            write!(out, ",theta_{k}").unwrap();
        }
        out.push_str(",residual,oracle_distance\n");
        for r in &self.records {
            write!(out, "{},{}", r.step, r.tau).unwrap();
            for t in &r.theta {
                write!(out, ",{t}").unwrap();
            }
            write!(out, ",{},", r.residual).unwrap();
            if let Some(d) = r.oracle_distance {
                write!(out, "{d}").unwrap();
            }
            out.push('\n');
        }
        out
    }
}

/// Euler integration of θ over the τ grid of `cfg`.
///
/// Time-dependent Hamiltonians are frozen at the left end of each step. In shot
/// mode the Pauli decomposition is refreshed whenever H changes.
pub fn evolve(
    circuit: &AnsatzCircuit,
    theta0: &[f64],
    source: &dyn HamiltonianSource,
    cfg: &EvolutionConfig,
    reference: Option<&ReferenceTrajectory>,
) -> Result<EvolutionTrace> {
    cfg.validate()?;
    if theta0.len() != circuit.n_params() {
        return Err(usage(format!("θ₀ has {} entries, circuit needs {}", theta0.len(), circuit.n_params())));
    }
    if source.dim() != 1 << circuit.n_qubits() {
        return Err(usage("Hamiltonian dimension does not match the circuit"));
    }
    if let Some(r) = reference {
        if r.len() != cfg.n_steps + 1 {
            return Err(usage(format!("reference has {} samples, need {}", r.len(), cfg.n_steps + 1)));
        }
    }
    let taus = cfg.tau_grid();
    let dtau = cfg.dtau();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let mut theta = theta0.to_vec();
    let mut trace = EvolutionTrace::default();
    let mut h = source.matrix_at(0.0)?;
    let mut pauli = match cfg.mode {
        MeasurementMode::Shots(_) => Some(pauli_decompose(&h)?),
        MeasurementMode::Exact => None,
    };
    for (k, &tau) in taus.iter().enumerate() {
        let start = Instant::now();
        if source.is_time_dependent() && k > 0 {
            h = source.matrix_at(tau)?;
            if pauli.is_some() {
                pauli = Some(pauli_decompose(&h)?);
            }
        }
        let mut sys = match (cfg.mode, &pauli) {
            (MeasurementMode::Shots(_), Some(p)) => {
                rng.set_stream(k as u64);
                McLachlanSystem {
                    a: assemble_a_hadamard(circuit, &theta, cfg.mode, &mut rng)?,
                    c: assemble_c_hadamard(circuit, &theta, p, cfg.mode, &mut rng)?,
                }
            }
            _ => {
                let sys = assemble_system(circuit, &theta, &h)?;
                sys.check_metric()?;
                sys
            }
        };
        if cfg.phase_correction {
            let phi = circuit.prepare_state(&theta)?;
            let energy = phi.inner(&phi.apply_real_dense(&h)?)?.re;
            for (i, d) in circuit.derivative_states(&theta)?.iter().enumerate() {
                sys.c[i] -= d.inner(&phi)?.re * energy;
            }
        }
        let sol = solve_thetadot(&sys.a, &sys.c, cfg.cutoff_ratio)?;
        let residual = (&sys.a * &sol.value - &sys.c).norm();
        let oracle_distance = match reference {
            Some(r) => Some(circuit.prepare_state(&theta)?.distance(&r.states[k])?),
            None => None,
        };
        let norm = sol.value.norm();
        trace.records.push(StepRecord {
            step: k,
            tau,
            theta: theta.clone(),
            thetadot_norm: norm,
            residual,
            rank: sol.rank,
            oracle_distance,
            wall_time: start.elapsed(),
        });
        if !(norm <= DIVERGENCE_LIMIT) {
            return Err(Error::Divergence { step: k, norm, partial: Box::new(trace) });
        }
        if k < cfg.n_steps {
            for (t, v) in theta.iter_mut().zip(sol.value.iter()) {
                *t += dtau * v;
            }
        }
    }
    Ok(trace)
}
