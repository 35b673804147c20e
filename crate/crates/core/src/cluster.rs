//! Cluster graphs and cluster-state preparation.
//!
//! A cluster state on graph `g` is `∏_{(a,b)∈E} CZ_{ab} ⊗_a |+⟩_a`; it is the
//! joint +1 eigenstate of `σ_x^(a) ⊗_{a'∈ngbh(a)} σ_z^(a')` for every site `a`.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::qsim::{gates, BasisSpec, QsimError, QuantumState, SiteId};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ClusterError {
    #[error("unknown site {0}")]
    UnknownSite(SiteId),
    #[error("duplicate site {0}")]
    DuplicateSite(SiteId),
    #[error("self-loop on {0}")]
    SelfLoop(SiteId),
    #[error("duplicate edge {0}-{1}")]
    DuplicateEdge(SiteId, SiteId),
    #[error("two sites placed at ({0}, {1})")]
    CoordinateClash(i32, i32),
    #[error(transparent)]
    Qsim(#[from] QsimError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Coord {
    pub row: i32,
    pub col: i32,
}

/// Undirected simple graph of cluster sites. Coordinates are layout metadata;
/// adjacency is authoritative.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ClusterGraph {
    coords: BTreeMap<SiteId, Coord>,
    adjacency: BTreeMap<SiteId, BTreeSet<SiteId>>,
}

impl ClusterGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_site(&mut self, id: SiteId, coord: Coord) -> Result<(), ClusterError> {
        if self.coords.contains_key(&id) {
            return Err(ClusterError::DuplicateSite(id));
        }
        if self.coords.values().any(|c| *c == coord) {
            return Err(ClusterError::CoordinateClash(coord.row, coord.col));
        }
        self.coords.insert(id, coord);
        self.adjacency.insert(id, BTreeSet::new());
        Ok(())
    }

    pub fn add_edge(&mut self, a: SiteId, b: SiteId) -> Result<(), ClusterError> {
        if a == b {
            return Err(ClusterError::SelfLoop(a));
        }
        for s in [a, b] {
            if !self.coords.contains_key(&s) {
                return Err(ClusterError::UnknownSite(s));
            }
        }
        if !self.adjacency.get_mut(&a).unwrap().insert(b) {
            return Err(ClusterError::DuplicateEdge(a, b));
        }
        self.adjacency.get_mut(&b).unwrap().insert(a);
        Ok(())
    }

    /// Chain `0-1-…-(n−1)` laid out along row 0.
    pub fn chain(n: u32) -> Self {
        let mut g = Self::new();
        for i in 0..n {
            g.add_site(SiteId(i), Coord { row: 0, col: i as i32 }).unwrap();
            if i > 0 {
                g.add_edge(SiteId(i - 1), SiteId(i)).unwrap();
            }
        }
        g
    }

    pub fn sites(&self) -> impl Iterator<Item = SiteId> + '_ {
        self.coords.keys().copied()
    }

    pub fn site_list(&self) -> Vec<SiteId> {
        self.sites().collect()
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn contains(&self, site: SiteId) -> bool {
        self.coords.contains_key(&site)
    }

    pub fn coord(&self, site: SiteId) -> Option<Coord> {
        self.coords.get(&site).copied()
    }

    pub fn neighbors(&self, site: SiteId) -> Result<&BTreeSet<SiteId>, ClusterError> {
        self.adjacency.get(&site).ok_or(ClusterError::UnknownSite(site))
    }

    /// Edges with `a < b`, in ascending order.
    pub fn edges(&self) -> Vec<(SiteId, SiteId)> {
        self.adjacency
            .iter()
            .flat_map(|(a, ns)| ns.iter().filter(move |b| *a < **b).map(move |b| (*a, *b)))
            .collect()
    }

    /// κ for a site; fixed to 0 for every cluster this crate builds.
    pub fn kappa(&self, _site: SiteId) -> u8 {
        0
    }

    /// The graph with `site` and its incident edges deleted.
    pub fn without(&self, site: SiteId) -> Result<Self, ClusterError> {
        if !self.contains(site) {
            return Err(ClusterError::UnknownSite(site));
        }
        let mut g = self.clone();
        g.coords.remove(&site);
        g.adjacency.remove(&site);
        for ns in g.adjacency.values_mut() {
            ns.remove(&site);
        }
        Ok(g)
    }
}

/// `S ⊗|+⟩` on `g`, limited to the default qubit bound.
pub fn make_cluster_state(g: &ClusterGraph) -> Result<QuantumState, ClusterError> {
    make_cluster_state_with_limit(g, crate::qsim::DEFAULT_MAX_QUBITS)
}

pub fn make_cluster_state_with_limit(
    g: &ClusterGraph,
    max_qubits: usize,
) -> Result<QuantumState, ClusterError> {
    let mut psi = QuantumState::init_plus_with_limit(&g.site_list(), max_qubits)?;
    for (a, b) in g.edges() {
        psi.apply_cz(a, b)?;
    }
    Ok(psi)
}

/// Checks every eigenvalue equation `K_a ψ = ψ`, i.e. eigenvalue +1.
pub fn check_stabilizers(g: &ClusterGraph, psi: &QuantumState) -> Result<bool, ClusterError> {
    let mut domain: Vec<SiteId> = psi.sites().to_vec();
    domain.sort();
    if domain != g.site_list() {
        return Err(QsimError::RegistryMismatch.into());
    }
    for a in g.sites() {
        let mut image = psi.clone();
        image.apply_unitary1(a, &gates::pauli_x())?;
        for &b in g.neighbors(a)? {
            image.apply_unitary1(b, &gates::pauli_z())?;
        }
        let overlap = psi.inner(&image)?;
        let fidelity = overlap.norm_sqr();
        let sign = if g.kappa(a) == 0 { 1.0 } else { -1.0 };
        if fidelity < 1.0 - 1e-10 || (overlap.re - sign).abs() > 1e-6 {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Result of a σ_z removal.
#[derive(Debug, Clone)]
pub struct Removal {
    pub outcome: u8,
    pub graph: ClusterGraph,
    /// σ_z^outcome owed by each former neighbor.
    pub corrections: BTreeMap<SiteId, u8>,
}

/// Measures `site` in Z, deleting it from the graph and the state. The
/// residual equals `∏_{b∈ngbh} (σ_z^(b))^s` applied to the cluster state of
/// the reduced graph.
pub fn remove_z(
    g: &ClusterGraph,
    psi: &mut QuantumState,
    site: SiteId,
    draw: f64,
) -> Result<Removal, ClusterError> {
    let neighbors = g.neighbors(site)?.clone();
    let outcome = psi.measure(site, &BasisSpec::Z, draw)?;
    let graph = g.without(site)?;
    let corrections = neighbors.into_iter().map(|b| (b, outcome)).collect();
    Ok(Removal { outcome, graph, corrections })
}

/// Applies the σ_z corrections recorded by [`remove_z`] to live sites of `psi`.
pub fn apply_corrections(
    psi: &mut QuantumState,
    corrections: &BTreeMap<SiteId, u8>,
) -> Result<(), ClusterError> {
    for (site, flip) in corrections {
        if *flip == 1 && psi.contains(*site) {
            psi.apply_unitary1(*site, &gates::pauli_z())?;
        }
    }
    Ok(())
}
