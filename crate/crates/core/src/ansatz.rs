//! The layered Ry / controlled-Ry ansatz and its exact parameter derivatives.
//!
//! Gate order of [`AnsatzCircuit::build`]:
//!
//! * entry layer: H on every qubit, then X on every qubit (no parameters);
//! * one Ry layer on all qubits;
//! * `n_cells` unit cells, each a controlled-Ry ladder (1→2, 2→3, …, n−1→n)
//!   followed by another Ry layer on all qubits.
//!
//! Parameters are numbered in gate order. With 4 qubits a cell carries 7
//! parameters, so three cells give 4 + 21 = 25.

use std::fmt::Write as _;

use num_complex::Complex64;

use crate::error::{usage, Error, Result};
use crate::statevector::{GateMatrix, Qubit, StateVector};

/// Parameterless gates of the entry layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FixedGate {
    H,
    X,
}

impl FixedGate {
    fn matrix(self) -> GateMatrix {
        match self {
            FixedGate::H => GateMatrix::h(),
            FixedGate::X => GateMatrix::x(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Pauli1 {
    I,
    X,
    Y,
    Z,
}

impl Pauli1 {
    pub fn matrix(self) -> GateMatrix {
        match self {
            Pauli1::I => GateMatrix::identity(),
            Pauli1::X => GateMatrix::x(),
            Pauli1::Y => GateMatrix::y(),
            Pauli1::Z => GateMatrix::z(),
        }
    }
}

/// One Pauli-product term `f · σ` of a gate derivative ∂U = Σ f·U·σ.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorTerm {
    pub factor: Complex64,
    pub paulis: Vec<(Qubit, Pauli1)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GateOp {
    Fixed { gate: FixedGate, qubit: Qubit },
    Ry { qubit: Qubit, param: usize },
    CRy { control: Qubit, target: Qubit, param: usize },
}

impl GateOp {
    pub fn param(&self) -> Option<usize> {
        match *self {
            GateOp::Fixed { .. } => None,
            GateOp::Ry { param, .. } | GateOp::CRy { param, .. } => Some(param),
        }
    }

    pub(crate) fn apply(&self, theta: &[f64], state: &mut StateVector) -> Result<()> {
        match *self {
            GateOp::Fixed { gate, qubit } => state.apply_single(&gate.matrix(), qubit),
            GateOp::Ry { qubit, param } => state.apply_single(&GateMatrix::ry(theta[param]), qubit),
            GateOp::CRy { control, target, param } => {
                state.apply_controlled(&GateMatrix::ry(theta[param]), control, target)
            }
        }
    }

    /// Apply the gate's generator G, with ∂U/∂θ = G·U.
    ///
    /// Ry: G = −(i/2)·Y_q. CRy: G = −(i/2)·|1⟩⟨1|_c ⊗ Y_t, applied directly
    /// through the projector rather than as a Pauli sum.
    pub(crate) fn apply_generator(&self, state: &mut StateVector) -> Result<()> {
        let half_y = GateMatrix::y().scaled(Complex64::new(0.0, -0.5));
        match *self {
            GateOp::Fixed { .. } => Err(usage("fixed gates have no generator")),
            GateOp::Ry { qubit, .. } => state.apply_single(&half_y, qubit),
            GateOp::CRy { control, target, .. } => {
                state.apply_single(&GateMatrix::proj_one(), control)?;
                state.apply_single(&half_y, target)
            }
        }
    }

    /// Pauli-product expansion of the generator, for measurement circuits.
    ///
    /// |1⟩⟨1| = (I − Z)/2, so the CRy generator is −(i/4)·Y_t + (i/4)·Z_c Y_t.
    pub fn generator_terms(&self) -> Vec<GeneratorTerm> {
        match *self {
            GateOp::Fixed { .. } => Vec::new(),
            GateOp::Ry { qubit, .. } => vec![GeneratorTerm {
                factor: Complex64::new(0.0, -0.5),
                paulis: vec![(qubit, Pauli1::Y)],
            }],
            GateOp::CRy { control, target, .. } => vec![
                GeneratorTerm { factor: Complex64::new(0.0, -0.25), paulis: vec![(target, Pauli1::Y)] },
                GeneratorTerm {
                    factor: Complex64::new(0.0, 0.25),
                    paulis: vec![(control, Pauli1::Z), (target, Pauli1::Y)],
                },
            ],
        }
    }
}

/// How a derivative vector was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DerivativeProvenance {
    GeneratorInsertion,
    FiniteDifference,
}

/// ∂|φ(θ)⟩/∂θ_k (unnormalized).
#[derive(Debug, Clone)]
pub struct DerivativeState {
    pub param: usize,
    pub vector: StateVector,
    pub provenance: DerivativeProvenance,
}

/// Ordered parameterized circuit acting on |0…0⟩.
#[derive(Debug, Clone, PartialEq)]
pub struct AnsatzCircuit {
    n_qubits: usize,
    n_cells: usize,
    ops: Vec<GateOp>,
    /// Index into `ops` of the gate carrying each parameter.
    param_gate: Vec<usize>,
}

impl AnsatzCircuit {
    /// Layered ansatz with `n_cells` unit cells.
    pub fn build(n_qubits: usize, n_cells: usize) -> Result<Self> {
        if n_qubits < 2 {
            return Err(usage(format!("ansatz needs at least 2 qubits, got {n_qubits}")));
        }
        if n_cells < 1 {
            return Err(usage("ansatz needs at least one unit cell"));
        }
        let mut ops = Vec::new();
        for q in 1..=n_qubits {
            ops.push(GateOp::Fixed { gate: FixedGate::H, qubit: Qubit(q) });
        }
        for q in 1..=n_qubits {
            ops.push(GateOp::Fixed { gate: FixedGate::X, qubit: Qubit(q) });
        }
        let mut next = 0;
        let ry_layer = |ops: &mut Vec<GateOp>, next: &mut usize| {
            for q in 1..=n_qubits {
                ops.push(GateOp::Ry { qubit: Qubit(q), param: *next });
                *next += 1;
            }
        };
        ry_layer(&mut ops, &mut next);
        for _ in 0..n_cells {
            for c in 1..n_qubits {
                ops.push(GateOp::CRy { control: Qubit(c), target: Qubit(c + 1), param: next });
                next += 1;
            }
            ry_layer(&mut ops, &mut next);
        }
        let mut circuit = Self::from_ops(n_qubits, ops)?;
        circuit.n_cells = n_cells;
        Ok(circuit)
    }

    /// Arbitrary gate list. Each parameter index 0..N must appear on exactly one gate.
    pub fn from_ops(n_qubits: usize, ops: Vec<GateOp>) -> Result<Self> {
        // validates the register size
        StateVector::zero(n_qubits)?;
        let n_params = ops.iter().filter_map(GateOp::param).map(|p| p + 1).max().unwrap_or(0);
        let mut param_gate = vec![usize::MAX; n_params];
        for (i, op) in ops.iter().enumerate() {
            let qubits: Vec<Qubit> = match *op {
                GateOp::Fixed { qubit, .. } | GateOp::Ry { qubit, .. } => vec![qubit],
                GateOp::CRy { control, target, .. } => {
                    if control == target {
                        return Err(usage(format!("gate {i}: control equals target")));
                    }
                    vec![control, target]
                }
            };
            if qubits.iter().any(|q| q.0 == 0 || q.0 > n_qubits) {
                return Err(usage(format!("gate {i}: qubit out of range")));
            }
            if let Some(p) = op.param() {
                if param_gate[p] != usize::MAX {
                    return Err(usage(format!("parameter {} used by more than one gate", p + 1)));
                }
                param_gate[p] = i;
            }
        }
        if let Some(p) = param_gate.iter().position(|&g| g == usize::MAX) {
            return Err(usage(format!("parameter {} is not used by any gate", p + 1)));
        }
        Ok(Self { n_qubits, n_cells: 0, ops, param_gate })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    /// Unit cells, or 0 for circuits built with [`AnsatzCircuit::from_ops`].
    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    pub fn n_params(&self) -> usize {
        self.param_gate.len()
    }

    pub fn ops(&self) -> &[GateOp] {
        &self.ops
    }

    /// Gate index carrying parameter `k`.
    pub fn gate_of_param(&self, k: usize) -> Result<usize> {
        self.param_gate
            .get(k)
            .copied()
            .ok_or_else(|| usage(format!("parameter index {k} out of range 0..{}", self.n_params())))
    }

    fn check_theta(&self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.n_params() {
            return Err(usage(format!("expected {} parameters, got {}", self.n_params(), theta.len())));
        }
        Ok(())
    }

    /// Apply gates `range` of the circuit to `state`.
    pub(crate) fn run_gates(&self, theta: &[f64], range: std::ops::Range<usize>, state: &mut StateVector) -> Result<()> {
        self.ops[range].iter().try_for_each(|op| op.apply(theta, state))
    }

    /// |φ(θ)⟩ = U_N(θ_N)…U_1(θ_1)|0…0⟩.
    pub fn prepare_state(&self, theta: &[f64]) -> Result<StateVector> {
        self.check_theta(theta)?;
        let mut s = StateVector::zero(self.n_qubits)?;
        self.run_gates(theta, 0..self.ops.len(), &mut s)?;
        Ok(s)
    }

    /// Exact ∂|φ⟩/∂θ_k: run the circuit with the generator inserted after gate k.
    pub fn derivative_state(&self, theta: &[f64], k: usize) -> Result<DerivativeState> {
        self.check_theta(theta)?;
        let g = self.gate_of_param(k)?;
        let mut s = StateVector::zero(self.n_qubits)?;
        self.run_gates(theta, 0..g + 1, &mut s)?;
        self.ops[g].apply_generator(&mut s)?;
        self.run_gates(theta, g + 1..self.ops.len(), &mut s)?;
        Ok(DerivativeState { param: k, vector: s, provenance: DerivativeProvenance::GeneratorInsertion })
    }

    /// All derivative states, sharing the prefix simulation.
    pub fn derivative_states(&self, theta: &[f64]) -> Result<Vec<StateVector>> {
        self.check_theta(theta)?;
        let mut prefix = StateVector::zero(self.n_qubits)?;
        let mut done = 0;
        let mut out = Vec::with_capacity(self.n_params());
        for k in 0..self.n_params() {
            let g = self.param_gate[k];
            // parameters are not required to appear in gate order
            if g + 1 < done {
                prefix = StateVector::zero(self.n_qubits)?;
                done = 0;
            }
            self.run_gates(theta, done..g + 1, &mut prefix)?;
            done = g + 1;
            let mut s = prefix.clone();
            self.ops[g].apply_generator(&mut s)?;
            self.run_gates(theta, g + 1..self.ops.len(), &mut s)?;
            out.push(s);
        }
        Ok(out)
    }

    /// Central difference (|φ(θ + h e_k)⟩ − |φ(θ − h e_k)⟩) / 2h.
    pub fn derivative_state_fd(&self, theta: &[f64], k: usize, h: f64) -> Result<DerivativeState> {
        self.check_theta(theta)?;
        self.gate_of_param(k)?;
        if h <= 0.0 {
            return Err(usage(format!("finite-difference step must be positive, got {h}")));
        }
        let mut plus = theta.to_vec();
        plus[k] += h;
        let mut minus = theta.to_vec();
        minus[k] -= h;
        let mut v = self.prepare_state(&plus)?;
        v.axpy(Complex64::new(-1.0, 0.0), &self.prepare_state(&minus)?)?;
        Ok(DerivativeState {
            param: k,
            vector: v.scaled(Complex64::new(0.5 / h, 0.0)),
            provenance: DerivativeProvenance::FiniteDifference,
        })
    }

    /// Same circuit on a register `offset` qubits wider, every qubit label shifted by `offset`.
    pub(crate) fn shifted(&self, offset: usize) -> Self {
        let sh = |q: Qubit| Qubit(q.0 + offset);
        let ops = self
            .ops
            .iter()
            .map(|op| match *op {
                GateOp::Fixed { gate, qubit } => GateOp::Fixed { gate, qubit: sh(qubit) },
                GateOp::Ry { qubit, param } => GateOp::Ry { qubit: sh(qubit), param },
                GateOp::CRy { control, target, param } => GateOp::CRy { control: sh(control), target: sh(target), param },
            })
            .collect();
        Self { n_qubits: self.n_qubits + offset, n_cells: self.n_cells, ops, param_gate: self.param_gate.clone() }
    }

    /// One gate per line: `GATE kind qubits param_index`, 1-based, `-` for no parameter.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        writeln!(out, "QUBITS {}", self.n_qubits).unwrap();
        for op in &self.ops {
            match *op {
                GateOp::Fixed { gate, qubit } => {
                    let kind = match gate {
                        FixedGate::H => "H",
                        FixedGate::X => "X",
                    };
                    writeln!(out, "GATE {kind} {qubit} -").unwrap();
                }
                GateOp::Ry { qubit, param } => writeln!(out, "GATE RY {qubit} {}", param + 1).unwrap(),
                GateOp::CRy { control, target, param } => {
                    writeln!(out, "GATE CRY {control},{target} {}", param + 1).unwrap()
                }
            }
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let parse_err = |line: usize, msg: &str| Error::Parse(format!("line {}: {msg}", line + 1));
        let mut n_qubits = None;
        let mut ops = Vec::new();
        for (ln, line) in text.lines().enumerate() {
            let fields: Vec<&str> = line.split_whitespace().collect();
            match fields.as_slice() {
                [] => continue,
                [c, ..] if c.starts_with('#') => continue,
                ["QUBITS", n] => n_qubits = Some(n.parse().map_err(|_| parse_err(ln, "bad qubit count"))?),
                ["GATE", kind, qubits, param] => {
                    let qs: Vec<usize> = qubits
                        .split(',')
                        .map(|q| q.parse())
                        .collect::<std::result::Result<_, _>>()
                        .map_err(|_| parse_err(ln, "bad qubit list"))?;
                    let param = match *param {
                        "-" => None,
                        p => Some(
                            p.parse::<usize>()
                                .ok()
                                .and_then(|p| p.checked_sub(1))
                                .ok_or_else(|| parse_err(ln, "bad parameter index"))?,
                        ),
                    };
                    let op = match (*kind, qs.as_slice(), param) {
                        ("H", [q], None) => GateOp::Fixed { gate: FixedGate::H, qubit: Qubit(*q) },
                        ("X", [q], None) => GateOp::Fixed { gate: FixedGate::X, qubit: Qubit(*q) },
                        ("RY", [q], Some(p)) => GateOp::Ry { qubit: Qubit(*q), param: p },
                        ("CRY", [c, t], Some(p)) => GateOp::CRy { control: Qubit(*c), target: Qubit(*t), param: p },
                        _ => return Err(parse_err(ln, "unrecognized gate")),
                    };
                    ops.push(op);
                }
                _ => return Err(parse_err(ln, "expected `GATE kind qubits param` or `QUBITS n`")),
            }
        }
        let n_qubits = n_qubits.ok_or_else(|| Error::Parse("missing QUBITS line".into()))?;
        Self::from_ops(n_qubits, ops)
    }
}
