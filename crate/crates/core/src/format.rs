//! On-disk formats: circuit files, compiled patterns, schedules.
//!
//! GF(2) vectors are hex strings, little-endian by qubit: hex digit `k` holds
//! qubits `4k … 4k+3`, lowest qubit in the lowest bit.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circuit::{Circuit, GateSpec};
use crate::cluster::Coord;
use crate::compiler::{CompiledPattern, SiteInfo, SiteRole, Stage};
use crate::pauli::{EulerSlot, PauliError, PauliImage};
use crate::qsim::{BasisSpec, SiteId};
use crate::scheduler::Schedule;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("line {line}, column {column}: {message}")]
    Json { line: usize, column: usize, message: String },
    #[error("unsupported version {0}")]
    Version(u32),
    #[error("pattern: {0}")]
    Pattern(String),
    #[error(transparent)]
    Pauli(#[from] PauliError),
}

impl From<serde_json::Error> for FormatError {
    fn from(e: serde_json::Error) -> Self {
        FormatError::Json { line: e.line(), column: e.column(), message: e.to_string() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CircuitFile {
    pub version: u32,
    pub qubits: usize,
    pub gates: Vec<GateSpec>,
}

impl From<&Circuit> for CircuitFile {
    fn from(c: &Circuit) -> Self {
        CircuitFile { version: FORMAT_VERSION, qubits: c.qubits, gates: c.gates.clone() }
    }
}

/// Parses a circuit file. Structural checks (indices, adjacency) are left to
/// the compiler.
pub fn parse_circuit(text: &str) -> Result<Circuit, FormatError> {
    let file: CircuitFile = serde_json::from_str(text)?;
    if file.version != FORMAT_VERSION {
        return Err(FormatError::Version(file.version));
    }
    Ok(Circuit::new(file.qubits, file.gates))
}

pub fn circuit_to_json(c: &Circuit) -> String {
    serde_json::to_string_pretty(&CircuitFile::from(c)).expect("circuit serializes")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HexImage {
    pub x: String,
    pub z: String,
}

impl From<&PauliImage> for HexImage {
    fn from(p: &PauliImage) -> Self {
        HexImage { x: p.x_hex(), z: p.z_hex() }
    }
}

impl HexImage {
    pub fn decode(&self, n: usize) -> Result<PauliImage, PauliError> {
        PauliImage::from_hex(n, &self.x, &self.z)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SiteRecord {
    pub id: SiteId,
    #[serde(flatten)]
    pub coord: Coord,
    pub wire: usize,
    pub role: SiteRole,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stage: Option<usize>,
    pub basis: BasisSpec,
    #[serde(default)]
    pub adaptive: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slot: Option<EulerSlot>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub depends: Vec<SiteId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi_init: Option<f64>,
    pub local: HexImage,
    pub image: HexImage,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub gate: GateSpec,
    pub sites: Vec<SiteId>,
    pub measured: Vec<SiteId>,
    pub edges: Vec<(SiteId, SiteId)>,
    pub local_constant: HexImage,
    pub constant: HexImage,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternFile {
    pub version: u32,
    pub qubits: usize,
    pub circuit: Vec<GateSpec>,
    pub f_init: HexImage,
    pub outputs: Vec<SiteId>,
    pub sites: Vec<SiteRecord>,
    pub edges: Vec<(SiteId, SiteId)>,
    pub stages: Vec<StageRecord>,
}

impl From<&CompiledPattern> for PatternFile {
    fn from(p: &CompiledPattern) -> Self {
        PatternFile {
            version: FORMAT_VERSION,
            qubits: p.qubits,
            circuit: p.circuit.gates.clone(),
            f_init: (&p.f_init).into(),
            outputs: p.outputs.clone(),
            sites: p
                .sites
                .iter()
                .map(|(id, s)| SiteRecord {
                    id: *id,
                    coord: s.coord,
                    wire: s.wire,
                    role: s.role,
                    stage: s.stage,
                    basis: s.basis,
                    adaptive: s.adaptive,
                    slot: s.slot,
                    depends: s.depends.clone(),
                    phi_init: p.phi_init.get(id).copied(),
                    local: (&s.local).into(),
                    image: (&s.image).into(),
                })
                .collect(),
            edges: p.edges.clone(),
            stages: p
                .stages
                .iter()
                .map(|s| StageRecord {
                    gate: s.gate,
                    sites: s.sites.clone(),
                    measured: s.measured.clone(),
                    edges: s.edges.clone(),
                    local_constant: (&s.local_constant).into(),
                    constant: (&s.constant).into(),
                })
                .collect(),
        }
    }
}

fn bad(msg: impl Into<String>) -> FormatError {
    FormatError::Pattern(msg.into())
}

impl PatternFile {
    pub fn into_pattern(self) -> Result<CompiledPattern, FormatError> {
        if self.version != FORMAT_VERSION {
            return Err(FormatError::Version(self.version));
        }
        let n = self.qubits;
        let mut sites = BTreeMap::new();
        let mut phi_init = BTreeMap::new();
        for r in self.sites {
            if r.wire >= n {
                return Err(bad(format!("site {} on wire {} of {n}", r.id, r.wire)));
            }
            if r.adaptive {
                let phi = r.phi_init.ok_or_else(|| bad(format!("adaptive site {} has no phi_init", r.id)))?;
                if !matches!(r.basis, BasisSpec::Planar { .. }) {
                    return Err(bad(format!("adaptive site {} is not planar", r.id)));
                }
                phi_init.insert(r.id, phi);
            }
            let info = SiteInfo {
                coord: r.coord,
                wire: r.wire,
                role: r.role,
                stage: r.stage,
                basis: r.basis,
                adaptive: r.adaptive,
                slot: r.slot,
                depends: r.depends,
                local: r.local.decode(n)?,
                image: r.image.decode(n)?,
            };
            if sites.insert(r.id, info).is_some() {
                return Err(bad(format!("duplicate site {}", r.id)));
            }
        }
        let known = |s: &SiteId| -> Result<(), FormatError> {
            if sites.contains_key(s) { Ok(()) } else { Err(bad(format!("unknown site {s}"))) }
        };
        for (a, b) in &self.edges {
            known(a)?;
            known(b)?;
        }
        for s in self.outputs.iter().chain(sites.values().flat_map(|i| i.depends.iter())) {
            known(s)?;
        }
        if self.outputs.len() != n {
            return Err(bad(format!("{} outputs for {n} wires", self.outputs.len())));
        }
        let mut stages = Vec::with_capacity(self.stages.len());
        for (g, st) in self.stages.into_iter().enumerate() {
            for s in st.sites.iter().chain(&st.measured) {
                known(s)?;
            }
            for s in &st.measured {
                if sites[s].stage != Some(g) {
                    return Err(bad(format!("site {s} measured by stage {g} but labelled otherwise")));
                }
            }
            stages.push(Stage {
                gate: st.gate,
                sites: st.sites,
                measured: st.measured,
                edges: st.edges,
                local_constant: st.local_constant.decode(n)?,
                constant: st.constant.decode(n)?,
            });
        }
        for (id, info) in &sites {
            if let Some(g) = info.stage {
                if g >= stages.len() || !stages[g].measured.contains(id) {
                    return Err(bad(format!("site {id} names stage {g} which does not measure it")));
                }
            }
        }
        let circuit = Circuit::new(n, self.circuit);
        Ok(CompiledPattern {
            qubits: n,
            circuit,
            stages,
            sites,
            edges: self.edges,
            f_init: self.f_init.decode(n)?,
            phi_init,
            outputs: self.outputs,
        })
    }
}

pub fn pattern_to_json(p: &CompiledPattern) -> String {
    serde_json::to_string_pretty(&PatternFile::from(p)).expect("pattern serializes")
}

pub fn parse_pattern(text: &str) -> Result<CompiledPattern, FormatError> {
    let file: PatternFile = serde_json::from_str(text)?;
    file.into_pattern()
}

pub fn schedule_to_json(s: &Schedule) -> String {
    serde_json::to_string(s).expect("schedule serializes")
}

pub fn parse_schedule(text: &str) -> Result<Schedule, FormatError> {
    Ok(serde_json::from_str(text)?)
}

/// True if the document looks like a compiled pattern rather than a circuit.
pub fn is_pattern_document(text: &str) -> bool {
    serde_json::from_str::<serde_json::Value>(text)
        .map(|v| v.get("sites").is_some())
        .unwrap_or(false)
}
