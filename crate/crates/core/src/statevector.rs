//! Dense statevector simulation.
//!
//! Qubits are numbered from 1 and qubit 1 is the most significant bit of the
//! basis label, so basis index 0 is |00…0⟩ and the Kronecker order of a layer
//! is qubit 1 ⊗ qubit 2 ⊗ … ⊗ qubit n.

use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{config, usage, Result};

/// Largest register the dense simulator accepts.
pub const MAX_QUBITS: usize = 12;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

/// 1-based qubit label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Qubit(pub usize);

impl Qubit {
    /// Bit position of this qubit inside a basis index of an `n_qubits` register.
    #[inline]
    pub fn bit(self, n_qubits: usize) -> usize {
        n_qubits - self.0
    }
}

impl fmt::Display for Qubit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GateKind {
    I,
    X,
    Y,
    Z,
    H,
    /// Inverse phase gate diag(1, −i); stages the imaginary-part Hadamard test.
    Sdg,
    Ry(f64),
    /// Any other 2×2 operator (projectors, scaled generators). Not necessarily unitary.
    Custom,
}

/// An explicit 2×2 single-qubit operator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GateMatrix {
    pub kind: GateKind,
    pub m: [[Complex64; 2]; 2],
}

impl GateMatrix {
    pub fn identity() -> Self {
        Self { kind: GateKind::I, m: [[ONE, ZERO], [ZERO, ONE]] }
    }

    pub fn x() -> Self {
        Self { kind: GateKind::X, m: [[ZERO, ONE], [ONE, ZERO]] }
    }

    pub fn y() -> Self {
        Self { kind: GateKind::Y, m: [[ZERO, -I], [I, ZERO]] }
    }

    pub fn z() -> Self {
        Self { kind: GateKind::Z, m: [[ONE, ZERO], [ZERO, -ONE]] }
    }

    pub fn h() -> Self {
        let h = Complex64::new(FRAC_1_SQRT_2, 0.0);
        Self { kind: GateKind::H, m: [[h, h], [h, -h]] }
    }

    pub fn s_dag() -> Self {
        Self { kind: GateKind::Sdg, m: [[ONE, ZERO], [ZERO, -I]] }
    }

    /// Rotation about the y axis: [[cos θ/2, −sin θ/2], [sin θ/2, cos θ/2]].
    pub fn ry(theta: f64) -> Self {
        let (s, c) = (theta / 2.0).sin_cos();
        let (c, s) = (Complex64::new(c, 0.0), Complex64::new(s, 0.0));
        Self { kind: GateKind::Ry(theta), m: [[c, -s], [s, c]] }
    }

    /// Projector |1⟩⟨1|.
    pub fn proj_one() -> Self {
        Self::custom([[ZERO, ZERO], [ZERO, ONE]])
    }

    pub fn custom(m: [[Complex64; 2]; 2]) -> Self {
        Self { kind: GateKind::Custom, m }
    }

    pub fn scaled(&self, factor: Complex64) -> Self {
        let m = self.m;
        Self::custom([
            [m[0][0] * factor, m[0][1] * factor],
            [m[1][0] * factor, m[1][1] * factor],
        ])
    }

    pub fn dagger(&self) -> Self {
        let m = self.m;
        Self::custom([[m[0][0].conj(), m[1][0].conj()], [m[0][1].conj(), m[1][1].conj()]])
    }

    pub fn to_dense(&self) -> DMatrix<Complex64> {
        DMatrix::from_fn(2, 2, |r, c| self.m[r][c])
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        let d = self.to_dense();
        let prod = d.adjoint() * &d;
        (prod - DMatrix::identity(2, 2)).iter().all(|z| z.norm() <= tol)
    }
}

/// The 4×4 controlled-Ry block matrix diag(I₂, Ry(θ)) with the control as the
/// more significant qubit.
pub fn controlled_ry_matrix(theta: f64) -> DMatrix<Complex64> {
    let ry = GateMatrix::ry(theta);
    let mut m = DMatrix::zeros(4, 4);
    m[(0, 0)] = ONE;
    m[(1, 1)] = ONE;
    for r in 0..2 {
        for c in 0..2 {
            m[(2 + r, 2 + c)] = ry.m[r][c];
        }
    }
    m
}

/// Kronecker product of a list of factors, leftmost factor most significant.
pub fn kron_all(factors: &[DMatrix<Complex64>]) -> DMatrix<Complex64> {
    factors
        .iter()
        .fold(DMatrix::from_element(1, 1, ONE), |acc, f| acc.kronecker(f))
}

/// Dense matrix of `gate` acting on qubit `q` of an `n_qubits` register.
pub fn embed_single(gate: &GateMatrix, q: Qubit, n_qubits: usize) -> DMatrix<Complex64> {
    let factors: Vec<_> = (1..=n_qubits)
        .map(|k| if k == q.0 { gate.to_dense() } else { DMatrix::identity(2, 2) })
        .collect();
    kron_all(&factors)
}

/// 2^n complex amplitudes. Not required to be normalized.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    n_qubits: usize,
    amps: Vec<Complex64>,
}

impl StateVector {
    /// |0…0⟩ on `n_qubits` qubits.
    pub fn zero(n_qubits: usize) -> Result<Self> {
        if !(1..=MAX_QUBITS).contains(&n_qubits) {
            return Err(config(format!("n_qubits must lie in 1..={MAX_QUBITS}, got {n_qubits}")));
        }
        let mut amps = vec![ZERO; 1 << n_qubits];
        amps[0] = ONE;
        Ok(Self { n_qubits, amps })
    }

    pub fn from_amplitudes(amps: Vec<Complex64>) -> Result<Self> {
        let len = amps.len();
        if len < 2 || !len.is_power_of_two() {
            return Err(usage(format!("amplitude count {len} is not a power of two ≥ 2")));
        }
        let n_qubits = len.trailing_zeros() as usize;
        if n_qubits > MAX_QUBITS {
            return Err(config(format!("{n_qubits} qubits exceeds the {MAX_QUBITS}-qubit limit")));
        }
        Ok(Self { n_qubits, amps })
    }

    pub fn from_real(values: &[f64]) -> Result<Self> {
        Self::from_amplitudes(values.iter().map(|&v| Complex64::new(v, 0.0)).collect())
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn real_parts(&self) -> Vec<f64> {
        self.amps.iter().map(|z| z.re).collect()
    }

    pub fn max_imag(&self) -> f64 {
        self.amps.iter().fold(0.0, |m, z| m.max(z.im.abs()))
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn normalized(&self) -> Result<Self> {
        let n = self.norm();
        if n == 0.0 || !n.is_finite() {
            return Err(usage("cannot normalize a zero or non-finite state"));
        }
        Ok(self.scaled(Complex64::new(1.0 / n, 0.0)))
    }

    pub fn scaled(&self, factor: Complex64) -> Self {
        Self { n_qubits: self.n_qubits, amps: self.amps.iter().map(|a| a * factor).collect() }
    }

    fn check_same_dim(&self, other: &Self) -> Result<()> {
        if self.dim() != other.dim() {
            return Err(usage(format!("dimension mismatch: {} vs {}", self.dim(), other.dim())));
        }
        Ok(())
    }

    fn check_qubit(&self, q: Qubit) -> Result<()> {
        if q.0 == 0 || q.0 > self.n_qubits {
            return Err(usage(format!("qubit {q} out of range 1..={}", self.n_qubits)));
        }
        Ok(())
    }

    /// ⟨self|other⟩, conjugate-linear in `self`.
    pub fn inner(&self, other: &Self) -> Result<Complex64> {
        self.check_same_dim(other)?;
        Ok(self.amps.iter().zip(&other.amps).map(|(a, b)| a.conj() * b).sum())
    }

    /// ‖self − other‖₂.
    pub fn distance(&self, other: &Self) -> Result<f64> {
        self.check_same_dim(other)?;
        Ok(self
            .amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt())
    }

    /// self + factor·other.
    pub fn axpy(&mut self, factor: Complex64, other: &Self) -> Result<()> {
        self.check_same_dim(other)?;
        for (a, b) in self.amps.iter_mut().zip(&other.amps) {
            *a += factor * b;
        }
        Ok(())
    }

    /// Apply `gate` to qubit `q` in place, identity on every other qubit.
    pub fn apply_single(&mut self, gate: &GateMatrix, q: Qubit) -> Result<()> {
        self.check_qubit(q)?;
        let stride = 1usize << q.bit(self.n_qubits);
        let m = gate.m;
        for base in (0..self.amps.len()).filter(|i| i & stride == 0) {
            let a0 = self.amps[base];
            let a1 = self.amps[base | stride];
            self.amps[base] = m[0][0] * a0 + m[0][1] * a1;
            self.amps[base | stride] = m[1][0] * a0 + m[1][1] * a1;
        }
        Ok(())
    }

    /// Apply `gate` to `target` on the subspace where `control` is |1⟩.
    pub fn apply_controlled(&mut self, gate: &GateMatrix, control: Qubit, target: Qubit) -> Result<()> {
        self.check_qubit(control)?;
        self.check_qubit(target)?;
        if control == target {
            return Err(usage(format!("control and target are both qubit {control}")));
        }
        let cmask = 1usize << control.bit(self.n_qubits);
        let stride = 1usize << target.bit(self.n_qubits);
        let m = gate.m;
        for base in (0..self.amps.len()).filter(|i| i & stride == 0 && i & cmask != 0) {
            let a0 = self.amps[base];
            let a1 = self.amps[base | stride];
            self.amps[base] = m[0][0] * a0 + m[0][1] * a1;
            self.amps[base | stride] = m[1][0] * a0 + m[1][1] * a1;
        }
        Ok(())
    }

    /// M·self for an arbitrary complex matrix.
    pub fn apply_dense(&self, m: &DMatrix<Complex64>) -> Result<Self> {
        if m.nrows() != self.dim() || m.ncols() != self.dim() {
            return Err(usage(format!(
                "operator is {}×{}, state has dimension {}",
                m.nrows(),
                m.ncols(),
                self.dim()
            )));
        }
        let amps = (0..self.dim())
            .map(|r| (0..self.dim()).map(|c| m[(r, c)] * self.amps[c]).sum())
            .collect();
        Ok(Self { n_qubits: self.n_qubits, amps })
    }

    /// M·self for a real matrix (Hamiltonians).
    pub fn apply_real_dense(&self, m: &DMatrix<f64>) -> Result<Self> {
        if m.nrows() != self.dim() || m.ncols() != self.dim() {
            return Err(usage(format!(
                "operator is {}×{}, state has dimension {}",
                m.nrows(),
                m.ncols(),
                self.dim()
            )));
        }
        let amps = (0..self.dim())
            .map(|r| (0..self.dim()).map(|c| self.amps[c] * m[(r, c)]).sum())
            .collect();
        Ok(Self { n_qubits: self.n_qubits, amps })
    }

    /// Probability that `q` reads 0 on a normalized state.
    pub fn prob_zero(&self, q: Qubit) -> Result<f64> {
        self.check_qubit(q)?;
        let mask = 1usize << q.bit(self.n_qubits);
        Ok(self
            .amps
            .iter()
            .enumerate()
            .filter(|(i, _)| i & mask == 0)
            .map(|(_, a)| a.norm_sqr())
            .sum())
    }

    /// ⟨Z_q⟩ on a normalized state.
    pub fn expect_z(&self, q: Qubit) -> Result<f64> {
        Ok(2.0 * self.prob_zero(q)? - self.norm().powi(2))
    }
}
