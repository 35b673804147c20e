//! Quantum logic networks: the compiler's input language and the oracle's
//! reference semantics.

use std::f64::consts::PI;
use std::fmt;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::qsim::{gates, Matrix2, QsimError, QuantumState, SiteId};

/// Largest register the direct-simulation oracle accepts.
pub const ORACLE_MAX_QUBITS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type")]
pub enum GateSpec {
    #[serde(rename = "CNOT")]
    Cnot { control: usize, target: usize },
    H { qubit: usize },
    /// π/2 phase gate U_z(π/2), up to global phase diag(1, i).
    S { qubit: usize },
    /// U_x(zeta) U_z(eta) U_x(xi).
    #[serde(rename = "ROT")]
    Rot { qubit: usize, xi: f64, eta: f64, zeta: f64 },
    /// Identity padding emitted by the compiler; never accepted in circuit files.
    #[serde(rename = "WIRE")]
    Wire { qubit: usize },
}

impl GateSpec {
    /// Logical wires touched, control first for CNOT.
    pub fn wires(&self) -> Vec<usize> {
        match *self {
            GateSpec::Cnot { control, target } => vec![control, target],
            GateSpec::H { qubit }
            | GateSpec::S { qubit }
            | GateSpec::Rot { qubit, .. }
            | GateSpec::Wire { qubit } => vec![qubit],
        }
    }

    pub fn is_clifford(&self) -> bool {
        !matches!(self, GateSpec::Rot { .. })
    }

    /// Unitary on `wires()`, first wire as the low bit. Two-qubit gates are
    /// returned as 4×4.
    pub fn unitary(&self) -> DMatrix<Complex64> {
        match *self {
            GateSpec::Cnot { .. } => {
                let mut m = DMatrix::zeros(4, 4);
                // control = bit 0, target = bit 1
                for i in 0..4usize {
                    let j = if i & 1 == 1 { i ^ 2 } else { i };
                    m[(j, i)] = Complex64::new(1.0, 0.0);
                }
                m
            }
            GateSpec::H { .. } => from_matrix2(&gates::hadamard()),
            GateSpec::S { .. } => from_matrix2(&gates::phase()),
            GateSpec::Rot { xi, eta, zeta, .. } => from_matrix2(&gates::euler(xi, eta, zeta)),
            GateSpec::Wire { .. } => from_matrix2(&gates::identity()),
        }
    }
}

impl fmt::Display for GateSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            GateSpec::Cnot { control, target } => write!(f, "CNOT({control},{target})"),
            GateSpec::H { qubit } => write!(f, "H({qubit})"),
            GateSpec::S { qubit } => write!(f, "S({qubit})"),
            GateSpec::Rot { qubit, xi, eta, zeta } => {
                write!(f, "ROT({qubit}, {xi}, {eta}, {zeta})")
            }
            GateSpec::Wire { qubit } => write!(f, "WIRE({qubit})"),
        }
    }
}

pub fn from_matrix2(m: &Matrix2) -> DMatrix<Complex64> {
    DMatrix::from_fn(2, 2, |r, c| m[r][c])
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CircuitError {
    #[error("gate {index} ({gate}): qubit out of range for {qubits} qubits")]
    OutOfRange { index: usize, gate: GateSpec, qubits: usize },
    #[error("gate {index} ({gate}): CNOT needs neighbouring wires")]
    NotNearestNeighbor { index: usize, gate: GateSpec },
    #[error("gate {index} ({gate}): non-finite angle")]
    NonFiniteAngle { index: usize, gate: GateSpec },
    #[error("gate {index} ({gate}): padding gates are not allowed in circuits")]
    PaddingGate { index: usize, gate: GateSpec },
    #[error("circuit needs at least one qubit")]
    NoQubits,
    #[error("{qubits} qubits exceed the oracle limit of {limit}")]
    OracleLimit { qubits: usize, limit: usize },
    #[error(transparent)]
    Qsim(#[from] QsimError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Circuit {
    pub qubits: usize,
    pub gates: Vec<GateSpec>,
}

impl Circuit {
    pub fn new(qubits: usize, gates: Vec<GateSpec>) -> Self {
        Circuit { qubits, gates }
    }

    pub fn validate(&self) -> Result<(), CircuitError> {
        if self.qubits == 0 {
            return Err(CircuitError::NoQubits);
        }
        for (index, gate) in self.gates.iter().enumerate() {
            let gate = *gate;
            if gate.wires().iter().any(|w| *w >= self.qubits) {
                return Err(CircuitError::OutOfRange { index, gate, qubits: self.qubits });
            }
            match gate {
                GateSpec::Cnot { control, target } if control.abs_diff(target) != 1 => {
                    return Err(CircuitError::NotNearestNeighbor { index, gate });
                }
                GateSpec::Rot { xi, eta, zeta, .. }
                    if !(xi.is_finite() && eta.is_finite() && zeta.is_finite()) =>
                {
                    return Err(CircuitError::NonFiniteAngle { index, gate });
                }
                GateSpec::Wire { .. } => return Err(CircuitError::PaddingGate { index, gate }),
                _ => {}
            }
        }
        Ok(())
    }

    pub fn is_clifford(&self) -> bool {
        self.gates.iter().all(GateSpec::is_clifford)
    }

    /// U_circuit |+…+⟩ by direct gate application; bit `i` of the amplitude
    /// index is wire `i`.
    pub fn oracle_state(&self) -> Result<QuantumState, CircuitError> {
        if self.qubits > ORACLE_MAX_QUBITS {
            return Err(CircuitError::OracleLimit { qubits: self.qubits, limit: ORACLE_MAX_QUBITS });
        }
        let wires: Vec<SiteId> = (0..self.qubits as u32).map(SiteId).collect();
        let mut psi = QuantumState::init_plus(&wires)?;
        for gate in &self.gates {
            let u = gate.unitary();
            let w = gate.wires();
            if w.len() == 1 {
                let m = [[u[(0, 0)], u[(0, 1)]], [u[(1, 0)], u[(1, 1)]]];
                psi.apply_unitary1(wires[w[0]], &m)?;
            } else {
                let mut m = [[Complex64::new(0.0, 0.0); 4]; 4];
                for (r, row) in m.iter_mut().enumerate() {
                    for (c, v) in row.iter_mut().enumerate() {
                        *v = u[(r, c)];
                    }
                }
                psi.apply_unitary2(wires[w[0]], wires[w[1]], &m)?;
            }
        }
        Ok(psi)
    }
}

/// Random nearest-neighbour circuit. Rotation angles are uniform in (−π, π].
pub fn random_circuit<R: Rng + ?Sized>(rng: &mut R, qubits: usize, gates: usize, clifford_only: bool) -> Circuit {
    let mut out = Vec::with_capacity(gates);
    while out.len() < gates {
        let kinds = if clifford_only { 3 } else { 4 };
        let q = rng.random_range(0..qubits);
        let gate = match rng.random_range(0..kinds) {
            0 => GateSpec::H { qubit: q },
            1 => GateSpec::S { qubit: q },
            2 if qubits > 1 => {
                let a = rng.random_range(0..qubits - 1);
                if rng.random_bool(0.5) {
                    GateSpec::Cnot { control: a, target: a + 1 }
                } else {
                    GateSpec::Cnot { control: a + 1, target: a }
                }
            }
            2 => continue,
            _ => {
                let mut angle = || rng.random_range(-PI..PI);
                GateSpec::Rot { qubit: q, xi: angle(), eta: angle(), zeta: angle() }
            }
        };
        out.push(gate);
    }
    Circuit::new(qubits, out)
}
