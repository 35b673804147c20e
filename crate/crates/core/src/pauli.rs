//! Sign-free Pauli algebra over GF(2)^(2n).
//!
//! An image `(x, z)` stands for `∏_i (σ_x^(i))^{x_i} (σ_z^(i))^{z_i}` with the
//! x factor left of the z factor on each qubit. Signs are discarded, so all
//! identities here hold up to global phase.

use std::fmt;
use std::ops::{Add, AddAssign};

use bitvec::prelude::*;
use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circuit::GateSpec;

pub type Bits = BitVec<u64, Lsb0>;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PauliError {
    #[error("image lengths differ: {0} vs {1} qubits")]
    LengthMismatch(usize, usize),
    #[error("gate {gate} touches a qubit outside 0..{qubits}")]
    QubitOutOfRange { gate: String, qubits: usize },
    #[error("bad hex bitstring {0:?}")]
    BadHex(String),
}

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PauliImage {
    x: Bits,
    z: Bits,
}

impl fmt::Debug for PauliImage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self)
    }
}

/// Writes `X0 Z1 Y2`-style labels; `I` for the identity.
impl fmt::Display for PauliImage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut any = false;
        for q in 0..self.num_qubits() {
            let label = match (self.x[q], self.z[q]) {
                (false, false) => continue,
                (true, false) => "X",
                (false, true) => "Z",
                (true, true) => "Y",
            };
            if any {
                write!(f, " ")?;
            }
            write!(f, "{label}{q}")?;
            any = true;
        }
        if !any {
            write!(f, "I")?;
        }
        Ok(())
    }
}

impl PauliImage {
    pub fn identity(n: usize) -> Self {
        PauliImage { x: bitvec![u64, Lsb0; 0; n], z: bitvec![u64, Lsb0; 0; n] }
    }

    pub fn x_on(n: usize, q: usize) -> Self {
        let mut p = Self::identity(n);
        p.x.set(q, true);
        p
    }

    pub fn z_on(n: usize, q: usize) -> Self {
        let mut p = Self::identity(n);
        p.z.set(q, true);
        p
    }

    pub fn from_parts(x: Bits, z: Bits) -> Result<Self, PauliError> {
        if x.len() != z.len() {
            return Err(PauliError::LengthMismatch(x.len(), z.len()));
        }
        Ok(PauliImage { x, z })
    }

    /// Component `i` of the 2n-vector: x block first, then z block.
    pub fn basis(n: usize, i: usize) -> Self {
        if i < n {
            Self::x_on(n, i)
        } else {
            Self::z_on(n, i - n)
        }
    }

    pub fn num_qubits(&self) -> usize {
        self.x.len()
    }

    pub fn x_part(&self) -> &BitSlice<u64, Lsb0> {
        &self.x
    }

    pub fn z_part(&self) -> &BitSlice<u64, Lsb0> {
        &self.z
    }

    pub fn x(&self, q: usize) -> bool {
        self.x[q]
    }

    pub fn z(&self, q: usize) -> bool {
        self.z[q]
    }

    pub fn set_x(&mut self, q: usize, v: bool) {
        self.x.set(q, v);
    }

    pub fn set_z(&mut self, q: usize, v: bool) {
        self.z.set(q, v);
    }

    pub fn component(&self, i: usize) -> bool {
        let n = self.num_qubits();
        if i < n {
            self.x[i]
        } else {
            self.z[i - n]
        }
    }

    pub fn is_identity(&self) -> bool {
        self.x.not_any() && self.z.not_any()
    }

    /// Plain GF(2) dot product of the two 2n-vectors.
    pub fn dot(&self, other: &PauliImage) -> u8 {
        let xs = (self.x.clone() & &other.x).count_ones();
        let zs = (self.z.clone() & &other.z).count_ones();
        ((xs + zs) % 2) as u8
    }

    /// `x_aᵀ z_b + z_aᵀ x_b mod 2`; 1 iff the representatives anticommute.
    pub fn symplectic(&self, other: &PauliImage) -> Result<u8, PauliError> {
        if self.num_qubits() != other.num_qubits() {
            return Err(PauliError::LengthMismatch(self.num_qubits(), other.num_qubits()));
        }
        let a = (self.x.clone() & &other.z).count_ones();
        let b = (self.z.clone() & &other.x).count_ones();
        Ok(((a + b) % 2) as u8)
    }

    /// Restriction to the listed wires, in that order.
    pub fn restrict(&self, wires: &[usize]) -> PauliImage {
        let mut p = Self::identity(wires.len());
        for (i, &w) in wires.iter().enumerate() {
            p.x.set(i, self.x[w]);
            p.z.set(i, self.z[w]);
        }
        p
    }

    /// Embeds a local image on `wires` into `n` qubits.
    pub fn embed(&self, n: usize, wires: &[usize]) -> PauliImage {
        let mut p = Self::identity(n);
        for (i, &w) in wires.iter().enumerate() {
            p.x.set(w, self.x[i]);
            p.z.set(w, self.z[i]);
        }
        p
    }

    /// Dense representative; qubit `i` is bit `i` of the matrix index.
    pub fn to_pauli(&self) -> DMatrix<Complex64> {
        let one = Complex64::new(1.0, 0.0);
        let mut m = DMatrix::from_element(1, 1, one);
        for q in 0..self.num_qubits() {
            let mut single = DMatrix::identity(2, 2);
            if self.x[q] {
                single = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0].map(|v| one * v));
            }
            if self.z[q] {
                let z = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0].map(|v| one * v));
                single *= z;
            }
            // Higher qubits are more significant, so they sit on the left of the Kronecker product.
            m = single.kronecker(&m);
        }
        m
    }

    pub fn x_hex(&self) -> String {
        bits_to_hex(&self.x)
    }

    pub fn z_hex(&self) -> String {
        bits_to_hex(&self.z)
    }

    pub fn from_hex(n: usize, x: &str, z: &str) -> Result<Self, PauliError> {
        Ok(PauliImage { x: hex_to_bits(n, x)?, z: hex_to_bits(n, z)? })
    }
}

impl Add for &PauliImage {
    type Output = PauliImage;

    fn add(self, rhs: &PauliImage) -> PauliImage {
        let mut out = self.clone();
        out += rhs;
        out
    }
}

impl AddAssign<&PauliImage> for PauliImage {
    fn add_assign(&mut self, rhs: &PauliImage) {
        assert_eq!(self.num_qubits(), rhs.num_qubits(), "image length mismatch");
        self.x ^= &rhs.x;
        self.z ^= &rhs.z;
    }
}

pub fn symplectic_product(a: &PauliImage, b: &PauliImage) -> Result<u8, PauliError> {
    a.symplectic(b)
}

/// Little-endian hex: digit `k` holds bits `4k..4k+3`, lowest bit in the
/// digit's least significant position; digits are written in increasing `k`.
pub fn bits_to_hex(bits: &BitSlice<u64, Lsb0>) -> String {
    bits.chunks(4)
        .map(|chunk| {
            let v = chunk.iter().enumerate().fold(0u32, |acc, (i, b)| acc | ((*b as u32) << i));
            char::from_digit(v, 16).unwrap()
        })
        .collect()
}

pub fn hex_to_bits(n: usize, s: &str) -> Result<Bits, PauliError> {
    if s.len() != n.div_ceil(4) {
        return Err(PauliError::BadHex(s.to_string()));
    }
    let mut bits = bitvec![u64, Lsb0; 0; n];
    for (k, ch) in s.chars().enumerate() {
        let v = ch.to_digit(16).ok_or_else(|| PauliError::BadHex(s.to_string()))?;
        for i in 0..4 {
            let idx = 4 * k + i;
            if v >> i & 1 == 1 {
                if idx >= n {
                    return Err(PauliError::BadHex(s.to_string()));
                }
                bits.set(idx, true);
            }
        }
    }
    Ok(bits)
}

/// Euler angle of a rotation gate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EulerSlot {
    Xi,
    Eta,
    Zeta,
}

/// Sign reversal of one Euler angle, triggered when `selector · input` is odd.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AngleFlip {
    /// Position of the rotation inside the composed network.
    pub gate: usize,
    pub slot: EulerSlot,
    pub selector: PauliImage,
}

/// Action of a gate (or gate sequence) on byproduct images pushed from its
/// input side to its output side.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PropagationMap {
    n: usize,
    /// Column `i` is the image of basis vector `i`.
    columns: Vec<PauliImage>,
    flips: Vec<AngleFlip>,
    gate_count: usize,
}

impl PropagationMap {
    pub fn identity(n: usize) -> Self {
        PropagationMap {
            n,
            columns: (0..2 * n).map(|i| PauliImage::basis(n, i)).collect(),
            flips: Vec::new(),
            gate_count: 0,
        }
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn gate_count(&self) -> usize {
        self.gate_count
    }

    pub fn flips(&self) -> &[AngleFlip] {
        &self.flips
    }

    pub fn column(&self, i: usize) -> &PauliImage {
        &self.columns[i]
    }

    pub fn apply(&self, img: &PauliImage) -> PauliImage {
        assert_eq!(img.num_qubits(), self.n, "image length mismatch");
        let mut out = PauliImage::identity(self.n);
        for (i, col) in self.columns.iter().enumerate() {
            if img.component(i) {
                out += col;
            }
        }
        out
    }

    /// Angle flips set off by `img` entering on the input side.
    pub fn triggered(&self, img: &PauliImage) -> Vec<(usize, EulerSlot)> {
        self.flips
            .iter()
            .filter(|f| f.selector.dot(img) == 1)
            .map(|f| (f.gate, f.slot))
            .collect()
    }

    /// `Mᵀ s`, so that `(Mᵀ s)·v = s·(M v)`.
    fn pull_back(&self, selector: &PauliImage) -> PauliImage {
        let mut out = PauliImage::identity(self.n);
        for (i, col) in self.columns.iter().enumerate() {
            if selector.dot(col) == 1 {
                if i < self.n {
                    out.set_x(i, true);
                } else {
                    out.set_z(i - self.n, true);
                }
            }
        }
        out
    }

    /// `self` followed by `next`.
    pub fn then(&self, next: &PropagationMap) -> Result<PropagationMap, PauliError> {
        if self.n != next.n {
            return Err(PauliError::LengthMismatch(self.n, next.n));
        }
        let columns = self.columns.iter().map(|c| next.apply(c)).collect();
        let mut flips = self.flips.clone();
        flips.extend(next.flips.iter().map(|f| AngleFlip {
            gate: f.gate + self.gate_count,
            slot: f.slot,
            selector: self.pull_back(&f.selector),
        }));
        Ok(PropagationMap { n: self.n, columns, flips, gate_count: self.gate_count + next.gate_count })
    }

    /// Matrix inverse via `Ω Mᵀ Ω`; valid for symplectic matrices. Flip rows
    /// are dropped.
    pub fn inverse(&self) -> PropagationMap {
        let n = self.n;
        let swap = |i: usize| if i < n { i + n } else { i - n };
        let columns = (0..2 * n)
            .map(|j| {
                let mut col = PauliImage::identity(n);
                for i in 0..2 * n {
                    if self.columns[swap(i)].component(swap(j)) {
                        if i < n {
                            col.set_x(i, true);
                        } else {
                            col.set_z(i - n, true);
                        }
                    }
                }
                col
            })
            .collect();
        PropagationMap { n, columns, flips: Vec::new(), gate_count: self.gate_count }
    }

    /// Checks `(Ma, Mb)_S = (a, b)_S` on all basis pairs.
    pub fn is_symplectic(&self) -> bool {
        (0..2 * self.n).all(|i| {
            (0..2 * self.n).all(|j| {
                let a = PauliImage::basis(self.n, i);
                let b = PauliImage::basis(self.n, j);
                self.columns[i].symplectic(&self.columns[j]).unwrap() == a.symplectic(&b).unwrap()
            })
        })
    }
}

/// Conjugation action of one gate on byproduct images.
pub fn gate_propagation_map(gate: &GateSpec, n: usize) -> Result<PropagationMap, PauliError> {
    if gate.wires().iter().any(|w| *w >= n) {
        return Err(PauliError::QubitOutOfRange { gate: gate.to_string(), qubits: n });
    }
    let mut map = PropagationMap::identity(n);
    map.gate_count = 1;
    match *gate {
        GateSpec::H { qubit } => {
            map.columns[qubit] = PauliImage::z_on(n, qubit);
            map.columns[n + qubit] = PauliImage::x_on(n, qubit);
        }
        GateSpec::S { qubit } => {
            map.columns[qubit] = &PauliImage::x_on(n, qubit) + &PauliImage::z_on(n, qubit);
        }
        GateSpec::Cnot { control, target } => {
            map.columns[control] = &PauliImage::x_on(n, control) + &PauliImage::x_on(n, target);
            map.columns[n + target] = &PauliImage::z_on(n, target) + &PauliImage::z_on(n, control);
        }
        GateSpec::Rot { qubit, .. } => {
            let z = PauliImage::z_on(n, qubit);
            let x = PauliImage::x_on(n, qubit);
            map.flips = vec![
                AngleFlip { gate: 0, slot: EulerSlot::Xi, selector: z.clone() },
                AngleFlip { gate: 0, slot: EulerSlot::Eta, selector: x },
                AngleFlip { gate: 0, slot: EulerSlot::Zeta, selector: z },
            ];
        }
        GateSpec::Wire { .. } => {}
    }
    Ok(map)
}

/// Composition in network order.
pub fn compose(n: usize, maps: &[PropagationMap]) -> Result<PropagationMap, PauliError> {
    maps.iter().try_fold(PropagationMap::identity(n), |acc, m| acc.then(m))
}
