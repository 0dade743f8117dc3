//! Finite-difference Hamiltonians for the heat and Vecer PDEs, and their
//! expansion in Pauli strings.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::ansatz::Pauli1;
use crate::error::{config, usage, Error, Result};
use crate::statevector::{kron_all, Qubit, StateVector};

/// Equidistant 1-D grid on [v_min, v_max].
#[derive(Debug, Clone, PartialEq)]
pub struct SpaceGrid {
    v_min: f64,
    v_max: f64,
    values: Vec<f64>,
}

impl SpaceGrid {
    pub fn new(v_min: f64, v_max: f64, n_points: usize) -> Result<Self> {
        if n_points < 2 {
            return Err(config(format!("grid needs at least 2 points, got {n_points}")));
        }
        if !(v_max > v_min) || !v_min.is_finite() || !v_max.is_finite() {
            return Err(config(format!("grid bounds must satisfy v_min < v_max, got [{v_min}, {v_max}]")));
        }
        let step = (v_max - v_min) / (n_points - 1) as f64;
        let mut values: Vec<f64> = (0..n_points).map(|i| v_min + step * i as f64).collect();
        values[n_points - 1] = v_max;
        Ok(Self { v_min, v_max, values })
    }

    /// Log-price grid x = ln S on [ln s_min, ln s_max] with 2^n_qubits points.
    pub fn log_price(s_min: f64, s_max: f64, n_qubits: usize) -> Result<Self> {
        if !(s_min > 0.0) {
            return Err(config(format!("S_min must be positive, got {s_min}")));
        }
        Self::new(s_min.ln(), s_max.ln(), 1 << n_qubits)
    }

    pub fn v_min(&self) -> f64 {
        self.v_min
    }

    pub fn v_max(&self) -> f64 {
        self.v_max
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn step(&self) -> f64 {
        (self.v_max - self.v_min) / (self.len() - 1) as f64
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Market constants and the heat-equation change-of-variable coefficients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransformConstants {
    pub sigma: f64,
    pub rate: f64,
    pub maturity: f64,
}

impl TransformConstants {
    pub fn new(sigma: f64, rate: f64, maturity: f64) -> Result<Self> {
        if !(sigma > 0.0) || !(maturity > 0.0) || !rate.is_finite() {
            return Err(config(format!("need σ > 0 and T > 0, got σ={sigma}, T={maturity}")));
        }
        Ok(Self { sigma, rate, maturity })
    }

    /// a = ½ − r/σ².
    pub fn a(&self) -> f64 {
        0.5 - self.rate / (self.sigma * self.sigma)
    }

    /// b = (1/4σ²)(½ − 4r/2σ² − σ² − 2r), the boundary decay rate.
    pub fn b(&self) -> f64 {
        let s2 = self.sigma * self.sigma;
        (0.5 - 4.0 * self.rate / (2.0 * s2) - s2 - 2.0 * self.rate) / (4.0 * s2)
    }

    /// Final scaled time σ²T.
    pub fn tau_max(&self) -> f64 {
        self.sigma * self.sigma * self.maturity
    }

    /// Calendar time t = T − τ/σ².
    pub fn calendar_time(&self, tau: f64) -> f64 {
        self.maturity - tau / (self.sigma * self.sigma)
    }

    fn check_tau(&self, tau: f64) -> Result<()> {
        let max = self.tau_max();
        if !(-1e-12 * max..=max * (1.0 + 1e-12)).contains(&tau) {
            return Err(usage(format!("τ={tau} outside [0, σ²T={max}]")));
        }
        Ok(())
    }
}

/// q(t) = (1 − e^{−r(T−t)})/(rT) for r ≠ 0, 1 − t/T for r = 0.
pub fn q_of_t(t: f64, rate: f64, maturity: f64) -> Result<f64> {
    if !(0.0..=maturity).contains(&t) {
        return Err(usage(format!("t={t} outside [0, {maturity}]")));
    }
    if rate == 0.0 {
        Ok(1.0 - t / maturity)
    } else {
        Ok(-(-rate * (maturity - t)).exp_m1() / (rate * maturity))
    }
}

/// A time-independent or time-dependent Hamiltonian.
pub trait HamiltonianSource {
    fn dim(&self) -> usize;

    fn is_time_dependent(&self) -> bool;

    /// Dense matrix at scaled time τ.
    fn matrix_at(&self, tau: f64) -> Result<DMatrix<f64>>;
}

/// A fixed dense real Hamiltonian.
#[derive(Debug, Clone, PartialEq)]
pub struct HamiltonianSpec {
    pub matrix: DMatrix<f64>,
}

impl HamiltonianSpec {
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        if !matrix.is_square() || !matrix.nrows().is_power_of_two() || matrix.nrows() < 2 {
            return Err(usage(format!("Hamiltonian must be 2^n × 2^n, got {}×{}", matrix.nrows(), matrix.ncols())));
        }
        Ok(Self { matrix })
    }

    pub fn to_csv(&self) -> String {
        matrix_to_csv(&self.matrix)
    }
}

impl HamiltonianSource for HamiltonianSpec {
    fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    fn is_time_dependent(&self) -> bool {
        false
    }

    fn matrix_at(&self, _tau: f64) -> Result<DMatrix<f64>> {
        Ok(self.matrix.clone())
    }
}

/// Dense matrix as CSV, one row per line.
pub fn matrix_to_csv(m: &DMatrix<f64>) -> String {
    let mut out = String::new();
    for r in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|c| format!("{}", m[(r, c)])).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// Discretized ½∂ₓₓ on the log-price grid with −b on the two boundary diagonals.
pub fn european_hamiltonian(grid: &SpaceGrid, consts: &TransformConstants) -> Result<HamiltonianSpec> {
    let n = grid.len();
    let dx = grid.step();
    if !(dx > 0.0) || n < 3 {
        return Err(config("European Hamiltonian needs a grid with positive spacing and at least 3 points"));
    }
    let off = 1.0 / (2.0 * dx * dx);
    let mut m = DMatrix::zeros(n, n);
    m[(0, 0)] = -consts.b();
    m[(n - 1, n - 1)] = -consts.b();
    for i in 1..n - 1 {
        m[(i, i - 1)] = off;
        m[(i, i)] = -2.0 * off;
        m[(i, i + 1)] = off;
    }
    HamiltonianSpec::new(m)
}

/// Vecer Hamiltonian (q(t) − y)²/2 ∂ᵧᵧ at scaled time τ, with null boundary rows.
///
/// q is evaluated at calendar time t = T − τ/σ².
pub fn asian_hamiltonian(grid: &SpaceGrid, tau: f64, consts: &TransformConstants) -> Result<DMatrix<f64>> {
    consts.check_tau(tau)?;
    let n = grid.len();
    let dy = grid.step();
    if n < 3 {
        return Err(config("Asian Hamiltonian needs at least 3 grid points"));
    }
    let t = consts.calendar_time(tau).clamp(0.0, consts.maturity);
    let q = q_of_t(t, consts.rate, consts.maturity)?;
    let mut m = DMatrix::zeros(n, n);
    for (i, y) in grid.values().iter().enumerate().take(n - 1).skip(1) {
        let w = (q - y).powi(2) / (dy * dy);
        m[(i, i - 1)] = w / 2.0;
        m[(i, i)] = -w;
        m[(i, i + 1)] = w / 2.0;
    }
    Ok(m)
}

/// Time-dependent Vecer Hamiltonian H(τ).
#[derive(Debug, Clone)]
pub struct AsianHamiltonian {
    pub grid: SpaceGrid,
    pub consts: TransformConstants,
}

impl HamiltonianSource for AsianHamiltonian {
    fn dim(&self) -> usize {
        self.grid.len()
    }

    fn is_time_dependent(&self) -> bool {
        true
    }

    fn matrix_at(&self, tau: f64) -> Result<DMatrix<f64>> {
        asian_hamiltonian(&self.grid, tau, &self.consts)
    }
}

/// Tensor product of single-qubit Paulis, qubit 1 first.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PauliString(pub Vec<Pauli1>);

impl PauliString {
    pub fn n_qubits(&self) -> usize {
        self.0.len()
    }

    /// String number `index` in base 4 (I=0, X=1, Y=2, Z=3), qubit 1 most significant.
    fn from_index(mut index: usize, n: usize) -> Self {
        let mut ps = vec![Pauli1::I; n];
        for slot in ps.iter_mut().rev() {
            *slot = [Pauli1::I, Pauli1::X, Pauli1::Y, Pauli1::Z][index % 4];
            index /= 4;
        }
        Self(ps)
    }

    pub fn count_y(&self) -> usize {
        self.0.iter().filter(|p| **p == Pauli1::Y).count()
    }

    /// P|k⟩ = phase(k)·|k ⊕ flip_mask⟩.
    fn flip_mask(&self) -> usize {
        let n = self.n_qubits();
        self.0
            .iter()
            .enumerate()
            .filter(|(_, p)| matches!(p, Pauli1::X | Pauli1::Y))
            .fold(0, |m, (i, _)| m | 1 << (n - 1 - i))
    }

    fn phase(&self, k: usize) -> Complex64 {
        let n = self.n_qubits();
        let mut ph = Complex64::new(1.0, 0.0);
        for (i, p) in self.0.iter().enumerate() {
            let bit = (k >> (n - 1 - i)) & 1;
            match (p, bit) {
                (Pauli1::Y, 0) => ph *= Complex64::new(0.0, 1.0),
                (Pauli1::Y, _) => ph *= Complex64::new(0.0, -1.0),
                (Pauli1::Z, 1) => ph = -ph,
                _ => {}
            }
        }
        ph
    }

    /// Explicit Kronecker product.
    pub fn to_dense(&self) -> DMatrix<Complex64> {
        let factors: Vec<_> = self.0.iter().map(|p| p.matrix().to_dense()).collect();
        kron_all(&factors)
    }

    /// Apply the string gate by gate.
    pub fn apply(&self, state: &mut StateVector) -> Result<()> {
        if state.n_qubits() != self.n_qubits() {
            return Err(usage("Pauli string length differs from register size"));
        }
        for (i, p) in self.0.iter().enumerate() {
            if *p != Pauli1::I {
                state.apply_single(&p.matrix(), Qubit(i + 1))?;
            }
        }
        Ok(())
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for p in &self.0 {
            let c = match p {
                Pauli1::I => 'I',
                Pauli1::X => 'X',
                Pauli1::Y => 'Y',
                Pauli1::Z => 'Z',
            };
            write!(f, "{c}")?;
        }
        Ok(())
    }
}

impl FromStr for PauliString {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        s.chars()
            .map(|c| match c {
                'I' => Ok(Pauli1::I),
                'X' => Ok(Pauli1::X),
                'Y' => Ok(Pauli1::Y),
                'Z' => Ok(Pauli1::Z),
                other => Err(Error::Parse(format!("invalid Pauli letter {other:?}"))),
            })
            .collect::<Result<Vec<_>>>()
            .map(PauliString)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PauliTerm {
    pub string: PauliString,
    /// Complex in general: a real non-symmetric matrix puts imaginary weight
    /// on strings with an odd number of Y factors.
    pub coeff: Complex64,
}

/// Σ λ_i h_i over Pauli strings on `n_qubits`.
#[derive(Debug, Clone, PartialEq)]
pub struct PauliDecomposition {
    pub n_qubits: usize,
    pub terms: Vec<PauliTerm>,
}

/// Coefficients with modulus at or below this are dropped.
pub const PAULI_DROP_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, Default)]
pub struct DecomposeOptions {
    /// Decompose (M + Mᵀ)/2 instead of M, which keeps every coefficient real.
    pub symmetrize: bool,
}

/// λ_P = Tr(P·M)/2^n over all 4^n strings.
pub fn pauli_decompose(m: &DMatrix<f64>) -> Result<PauliDecomposition> {
    pauli_decompose_with(m, DecomposeOptions::default())
}

pub fn pauli_decompose_with(m: &DMatrix<f64>, opts: DecomposeOptions) -> Result<PauliDecomposition> {
    let dim = m.nrows();
    if !m.is_square() || dim < 2 || !dim.is_power_of_two() {
        return Err(usage(format!("matrix {}×{} is not 2^n × 2^n", m.nrows(), m.ncols())));
    }
    let n = dim.trailing_zeros() as usize;
    if n > 6 {
        return Err(usage(format!("Pauli decomposition limited to 6 qubits, got {n}")));
    }
    let m = if opts.symmetrize { (m + m.transpose()) * 0.5 } else { m.clone() };
    let mut terms = Vec::new();
    for index in 0..1usize << (2 * n) {
        let string = PauliString::from_index(index, n);
        let flip = string.flip_mask();
        // Tr(P M) = Σ_k ⟨k⊕f|P|k⟩ M[k, k⊕f]
        let trace: Complex64 = (0..dim).map(|k| string.phase(k) * m[(k, k ^ flip)]).sum();
        let coeff = trace / dim as f64;
        if coeff.norm() > PAULI_DROP_TOL {
            terms.push(PauliTerm { string, coeff });
        }
    }
    Ok(PauliDecomposition { n_qubits: n, terms })
}

impl PauliDecomposition {
    /// Σ λ_i h_i built from explicit Kronecker products.
    pub fn reconstruct(&self) -> Result<DMatrix<Complex64>> {
        let dim = 1usize << self.n_qubits;
        let mut m = DMatrix::zeros(dim, dim);
        for term in &self.terms {
            if term.string.n_qubits() != self.n_qubits {
                return Err(usage(format!("term {} has the wrong length", term.string)));
            }
            m += term.string.to_dense() * term.coeff;
        }
        Ok(m)
    }

    /// H·|state⟩ as a sum of Pauli-string actions.
    pub fn apply(&self, state: &StateVector) -> Result<StateVector> {
        let mut out = state.scaled(Complex64::new(0.0, 0.0));
        for term in &self.terms {
            let mut s = state.clone();
            term.string.apply(&mut s)?;
            out.axpy(term.coeff, &s)?;
        }
        Ok(out)
    }

    /// One line per term: `STRING coefficient_re coefficient_im`.
    pub fn to_lines(&self) -> String {
        self.terms.iter().map(|t| format!("{} {} {}\n", t.string, t.coeff.re, t.coeff.im)).collect()
    }

    pub fn from_lines(n_qubits: usize, text: &str) -> Result<Self> {
        let mut terms = Vec::new();
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')) {
            let fields: Vec<&str> = line.split_whitespace().collect();
            let [s, re, im] = fields.as_slice() else {
                return Err(Error::Parse(format!("expected `STRING re im`, got {line:?}")));
            };
            let string: PauliString = s.parse()?;
            if string.n_qubits() != n_qubits {
                return Err(Error::Parse(format!("string {s} is not {n_qubits} qubits long")));
            }
            let num = |v: &str| v.parse::<f64>().map_err(|e| Error::Parse(format!("{v}: {e}")));
            terms.push(PauliTerm { string, coeff: Complex64::new(num(re)?, num(im)?) });
        }
        Ok(Self { n_qubits, terms })
    }
}

/// Σ λ_i h_i; equivalent to [`PauliDecomposition::reconstruct`].
pub fn pauli_reconstruct(d: &PauliDecomposition) -> Result<DMatrix<Complex64>> {
    d.reconstruct()
}
