//! Dense statevector engine.
//!
//! Amplitudes are stored little-endian: bit `i` of an amplitude index is the
//! computational-basis value of the qubit at registry position `i`. Measured
//! qubits are removed from the register, so the vector halves on every
//! measurement.

use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default bound on the number of simultaneously live qubits.
pub const DEFAULT_MAX_QUBITS: usize = 24;

/// Outcome probabilities below this are treated as exactly zero.
pub const DEGENERATE_PROBABILITY: f64 = 1e-14;

const UNITARY_TOL: f64 = 1e-12;

/// Identifier of a cluster site.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SiteId(pub u32);

impl fmt::Display for SiteId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "q{}", self.0)
    }
}

/// One-qubit measurement basis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum BasisSpec {
    /// Computational basis; outcome 0 is |0⟩.
    Z,
    /// Equatorial basis {(|0⟩ ± e^{iφ}|1⟩)/√2}; outcome 0 is the `+` state.
    Planar { angle: f64 },
}

impl BasisSpec {
    pub fn x() -> Self {
        BasisSpec::Planar { angle: 0.0 }
    }

    /// Basis vector selected by outcome `s`.
    pub fn state(&self, s: u8) -> [Complex64; 2] {
        match *self {
            BasisSpec::Z => {
                if s == 0 {
                    [Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)]
                } else {
                    [Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)]
                }
            }
            BasisSpec::Planar { angle } => {
                let h = std::f64::consts::FRAC_1_SQRT_2;
                let sign = if s == 0 { 1.0 } else { -1.0 };
                [Complex64::new(h, 0.0), Complex64::from_polar(sign * h, angle)]
            }
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QsimError {
    #[error("duplicate site {0}")]
    DuplicateSite(SiteId),
    #[error("state would hold {requested} qubits, limit is {limit}")]
    SizeLimit { requested: usize, limit: usize },
    #[error("unknown site {0}")]
    UnknownSite(SiteId),
    #[error("controlled operation needs two distinct sites, got {0} twice")]
    SameSite(SiteId),
    #[error("matrix is not unitary (deviation {0:e})")]
    NotUnitary(f64),
    #[error("projection of {site} onto outcome {outcome} has probability {probability:e}")]
    DegenerateProjection { site: SiteId, outcome: u8, probability: f64 },
    #[error("states are defined on different registers")]
    RegistryMismatch,
    #[error("empty site list")]
    Empty,
}

/// Pure state of the live qubits.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantumState {
    amplitudes: Vec<Complex64>,
    sites: Vec<SiteId>,
    max_qubits: usize,
}

pub type Matrix2 = [[Complex64; 2]; 2];

impl QuantumState {
    /// ⊗|+⟩ over `sites`, with the default qubit limit.
    pub fn init_plus(sites: &[SiteId]) -> Result<Self, QsimError> {
        Self::init_plus_with_limit(sites, DEFAULT_MAX_QUBITS)
    }

    pub fn init_plus_with_limit(sites: &[SiteId], max_qubits: usize) -> Result<Self, QsimError> {
        if sites.is_empty() {
            return Err(QsimError::Empty);
        }
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let factors = vec![[Complex64::new(h, 0.0), Complex64::new(h, 0.0)]; sites.len()];
        Self::product(sites, &factors, max_qubits)
    }

    /// Product state with one normalized two-component factor per site.
    pub fn product(
        sites: &[SiteId],
        factors: &[[Complex64; 2]],
        max_qubits: usize,
    ) -> Result<Self, QsimError> {
        assert_eq!(sites.len(), factors.len(), "one factor per site");
        if sites.len() > max_qubits {
            return Err(QsimError::SizeLimit { requested: sites.len(), limit: max_qubits });
        }
        for (i, s) in sites.iter().enumerate() {
            if sites[..i].contains(s) {
                return Err(QsimError::DuplicateSite(*s));
            }
        }
        let mut amplitudes = vec![Complex64::new(1.0, 0.0)];
        for f in factors {
            let mut next = Vec::with_capacity(amplitudes.len() * 2);
            next.extend(amplitudes.iter().map(|a| a * f[0]));
            next.extend(amplitudes.iter().map(|a| a * f[1]));
            amplitudes = next;
        }
        let mut state = QuantumState { amplitudes, sites: sites.to_vec(), max_qubits };
        state.renormalize();
        Ok(state)
    }

    /// Builds a state from raw amplitudes in registry order. Amplitudes are renormalized.
    pub fn from_amplitudes(sites: &[SiteId], amplitudes: Vec<Complex64>) -> Result<Self, QsimError> {
        assert_eq!(amplitudes.len(), 1usize << sites.len());
        let mut state = QuantumState {
            amplitudes,
            sites: Vec::new(),
            max_qubits: DEFAULT_MAX_QUBITS.max(sites.len()),
        };
        for (i, s) in sites.iter().enumerate() {
            if sites[..i].contains(s) {
                return Err(QsimError::DuplicateSite(*s));
            }
        }
        state.sites = sites.to_vec();
        state.renormalize();
        Ok(state)
    }

    /// Tensors a fresh qubit onto the register at the highest index.
    pub fn add_qubit(&mut self, site: SiteId, factor: [Complex64; 2]) -> Result<(), QsimError> {
        if self.sites.contains(&site) {
            return Err(QsimError::DuplicateSite(site));
        }
        if self.sites.len() + 1 > self.max_qubits {
            return Err(QsimError::SizeLimit { requested: self.sites.len() + 1, limit: self.max_qubits });
        }
        let norm = (factor[0].norm_sqr() + factor[1].norm_sqr()).sqrt();
        let mut next = Vec::with_capacity(self.amplitudes.len() * 2);
        next.extend(self.amplitudes.iter().map(|a| a * factor[0] / norm));
        next.extend(self.amplitudes.iter().map(|a| a * factor[1] / norm));
        self.amplitudes = next;
        self.sites.push(site);
        Ok(())
    }

    pub fn add_plus(&mut self, site: SiteId) -> Result<(), QsimError> {
        let h = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        self.add_qubit(site, [h, h])
    }

    pub fn num_qubits(&self) -> usize {
        self.sites.len()
    }

    pub fn sites(&self) -> &[SiteId] {
        &self.sites
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn contains(&self, site: SiteId) -> bool {
        self.sites.contains(&site)
    }

    pub fn index_of(&self, site: SiteId) -> Result<usize, QsimError> {
        self.sites.iter().position(|s| *s == site).ok_or(QsimError::UnknownSite(site))
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    fn renormalize(&mut self) {
        let n = self.norm();
        for a in &mut self.amplitudes {
            *a /= n;
        }
    }

    pub fn apply_cz(&mut self, a: SiteId, b: SiteId) -> Result<(), QsimError> {
        if a == b {
            return Err(QsimError::SameSite(a));
        }
        let mask = (1usize << self.index_of(a)?) | (1usize << self.index_of(b)?);
        for (i, amp) in self.amplitudes.iter_mut().enumerate() {
            if i & mask == mask {
                *amp = -*amp;
            }
        }
        Ok(())
    }

    pub fn apply_unitary1(&mut self, site: SiteId, u: &Matrix2) -> Result<(), QsimError> {
        let dev = unitarity_deviation(u);
        if dev > UNITARY_TOL {
            return Err(QsimError::NotUnitary(dev));
        }
        let bit = 1usize << self.index_of(site)?;
        for i in 0..self.amplitudes.len() {
            if i & bit == 0 {
                let a0 = self.amplitudes[i];
                let a1 = self.amplitudes[i | bit];
                self.amplitudes[i] = u[0][0] * a0 + u[0][1] * a1;
                self.amplitudes[i | bit] = u[1][0] * a0 + u[1][1] * a1;
            }
        }
        Ok(())
    }

    /// Applies a 4×4 unitary to `(first, second)`; `first` is the low bit of the
    /// matrix index.
    pub fn apply_unitary2(
        &mut self,
        first: SiteId,
        second: SiteId,
        u: &[[Complex64; 4]; 4],
    ) -> Result<(), QsimError> {
        if first == second {
            return Err(QsimError::SameSite(first));
        }
        let mut dev: f64 = 0.0;
        for r in 0..4 {
            for c in 0..4 {
                let dot: Complex64 = (0..4).map(|k| u[k][r].conj() * u[k][c]).sum();
                let want = if r == c { 1.0 } else { 0.0 };
                dev = dev.max((dot - want).norm());
            }
        }
        if dev > UNITARY_TOL {
            return Err(QsimError::NotUnitary(dev));
        }
        let b0 = 1usize << self.index_of(first)?;
        let b1 = 1usize << self.index_of(second)?;
        for i in 0..self.amplitudes.len() {
            if i & (b0 | b1) == 0 {
                let idx = [i, i | b0, i | b1, i | b0 | b1];
                let v = idx.map(|j| self.amplitudes[j]);
                for (r, &j) in idx.iter().enumerate() {
                    self.amplitudes[j] = (0..4).map(|c| u[r][c] * v[c]).sum();
                }
            }
        }
        Ok(())
    }

    /// Unnormalized amplitudes after projecting `site` onto `outcome` of `basis`,
    /// with the qubit removed; returns them with their total probability.
    fn projected(&self, bit: usize, basis: &BasisSpec, outcome: u8) -> (Vec<Complex64>, f64) {
        let b = basis.state(outcome);
        let (c0, c1) = (b[0].conj(), b[1].conj());
        let low = bit - 1;
        let half = self.amplitudes.len() / 2;
        let mut out = Vec::with_capacity(half);
        let mut p = 0.0;
        for k in 0..half {
            let i0 = (k & low) | ((k & !low) << 1);
            let v = c0 * self.amplitudes[i0] + c1 * self.amplitudes[i0 | bit];
            p += v.norm_sqr();
            out.push(v);
        }
        (out, p)
    }

    /// Probability of outcome 0 when measuring `site` in `basis`.
    pub fn probability_zero(&self, site: SiteId, basis: &BasisSpec) -> Result<f64, QsimError> {
        let bit = 1usize << self.index_of(site)?;
        Ok(self.projected(bit, basis, 0).1)
    }

    /// Projective measurement driven by `draw ∈ [0, 1)`: outcome 0 iff
    /// `draw < Pr(0)`, except that an outcome with probability below
    /// [`DEGENERATE_PROBABILITY`] is never chosen. The qubit is removed.
    pub fn measure(&mut self, site: SiteId, basis: &BasisSpec, draw: f64) -> Result<u8, QsimError> {
        let pos = self.index_of(site)?;
        let bit = 1usize << pos;
        let (zero, p0) = self.projected(bit, basis, 0);
        let outcome = if p0 < DEGENERATE_PROBABILITY {
            1
        } else if 1.0 - p0 < DEGENERATE_PROBABILITY || draw < p0 {
            0
        } else {
            1
        };
        let (amps, p) = if outcome == 0 { (zero, p0) } else { self.projected(bit, basis, 1) };
        self.collapse(pos, amps, p, site, outcome)
    }

    /// Projects `site` onto a prescribed outcome and removes it.
    pub fn project(&mut self, site: SiteId, basis: &BasisSpec, outcome: u8) -> Result<f64, QsimError> {
        let pos = self.index_of(site)?;
        let (amps, p) = self.projected(1usize << pos, basis, outcome);
        self.collapse(pos, amps, p, site, outcome)?;
        Ok(p)
    }

    fn collapse(
        &mut self,
        pos: usize,
        amps: Vec<Complex64>,
        p: f64,
        site: SiteId,
        outcome: u8,
    ) -> Result<u8, QsimError> {
        if p < DEGENERATE_PROBABILITY {
            return Err(QsimError::DegenerateProjection { site, outcome, probability: p });
        }
        let scale = 1.0 / p.sqrt();
        self.amplitudes = amps.into_iter().map(|a| a * scale).collect();
        self.sites.remove(pos);
        Ok(outcome)
    }

    /// Amplitudes re-indexed so that bit `i` refers to `order[i]`.
    pub fn amplitudes_in_order(&self, order: &[SiteId]) -> Result<Vec<Complex64>, QsimError> {
        if order.len() != self.sites.len() {
            return Err(QsimError::RegistryMismatch);
        }
        let mut perm = Vec::with_capacity(order.len());
        for s in order {
            perm.push(self.index_of(*s).map_err(|_| QsimError::RegistryMismatch)?);
        }
        let mut out = vec![Complex64::new(0.0, 0.0); self.amplitudes.len()];
        for (j, slot) in out.iter_mut().enumerate() {
            let mut i = 0usize;
            for (k, &p) in perm.iter().enumerate() {
                if j >> k & 1 == 1 {
                    i |= 1 << p;
                }
            }
            *slot = self.amplitudes[i];
        }
        Ok(out)
    }

    /// ⟨self|other⟩ over the same set of sites, in any registry order.
    pub fn inner(&self, other: &QuantumState) -> Result<Complex64, QsimError> {
        let b = other.amplitudes_in_order(&self.sites)?;
        Ok(self.amplitudes.iter().zip(&b).map(|(x, y)| x.conj() * y).sum())
    }

    /// |⟨a|b⟩|².
    pub fn fidelity(&self, other: &QuantumState) -> Result<f64, QsimError> {
        Ok(self.inner(other)?.norm_sqr().min(1.0))
    }
}

pub fn unitarity_deviation(u: &Matrix2) -> f64 {
    let mut dev: f64 = 0.0;
    for r in 0..2 {
        for c in 0..2 {
            let dot = u[0][r].conj() * u[0][c] + u[1][r].conj() * u[1][c];
            let want = if r == c { 1.0 } else { 0.0 };
            dev = dev.max((dot - want).norm());
        }
    }
    dev
}

/// Common one-qubit gates.
pub mod gates {
    use super::Matrix2;
    use num_complex::Complex64;

    const fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    pub fn identity() -> Matrix2 {
        [[c(1.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(1.0, 0.0)]]
    }

    pub fn pauli_x() -> Matrix2 {
        [[c(0.0, 0.0), c(1.0, 0.0)], [c(1.0, 0.0), c(0.0, 0.0)]]
    }

    pub fn pauli_z() -> Matrix2 {
        [[c(1.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(-1.0, 0.0)]]
    }

    pub fn hadamard() -> Matrix2 {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        [[c(h, 0.0), c(h, 0.0)], [c(h, 0.0), c(-h, 0.0)]]
    }

    /// diag(1, i).
    pub fn phase() -> Matrix2 {
        [[c(1.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(0.0, 1.0)]]
    }

    /// exp(−iα σ_x / 2).
    pub fn rot_x(alpha: f64) -> Matrix2 {
        let (s, co) = (alpha / 2.0).sin_cos();
        [[c(co, 0.0), c(0.0, -s)], [c(0.0, -s), c(co, 0.0)]]
    }

    /// exp(−iα σ_z / 2).
    pub fn rot_z(alpha: f64) -> Matrix2 {
        [
            [Complex64::from_polar(1.0, -alpha / 2.0), c(0.0, 0.0)],
            [c(0.0, 0.0), Complex64::from_polar(1.0, alpha / 2.0)],
        ]
    }

    pub fn mul(a: &Matrix2, b: &Matrix2) -> Matrix2 {
        let mut out = [[c(0.0, 0.0); 2]; 2];
        for r in 0..2 {
            for col in 0..2 {
                out[r][col] = a[r][0] * b[0][col] + a[r][1] * b[1][col];
            }
        }
        out
    }

    /// Euler rotation U_x(ζ) U_z(η) U_x(ξ).
    pub fn euler(xi: f64, eta: f64, zeta: f64) -> Matrix2 {
        mul(&rot_x(zeta), &mul(&rot_z(eta), &rot_x(xi)))
    }
}
