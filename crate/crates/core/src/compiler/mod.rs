//! Network → measurement-pattern compilation.
//!
//! Templates are placed left to right on one lattice row per wire. Each
//! measured site's byproduct image is its template-local byproduct pushed
//! through every downstream gate; constant template byproducts are collected
//! into `F_init` and their angle reversals folded into `φ_init`.

pub mod template;

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::circuit::{Circuit, CircuitError, GateSpec};
use crate::cluster::{ClusterError, ClusterGraph, Coord};
use crate::pauli::{compose, gate_propagation_map, EulerSlot, PauliError, PauliImage, PropagationMap};
use crate::qsim::{BasisSpec, SiteId};

pub use template::{
    clifford_template, cnot_template, derive_byproducts, rotation_template, template_for, wire_template,
    AffineByproductMap, CliffordKind, GateTemplate, TemplateError, TemplateLayout, TemplateRole,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CompileError {
    #[error(transparent)]
    Circuit(#[from] CircuitError),
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error(transparent)]
    Pauli(#[from] PauliError),
    #[error(transparent)]
    Cluster(#[from] ClusterError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SiteRole {
    /// First site of a wire, measured by the wire's first gate.
    Input,
    /// Measured inside a gate template.
    Interior,
    /// Last site of a wire; read out in σ_z.
    Output,
    /// A wire with no measured site: input and output at once.
    PassThrough,
    /// Lattice filler removed by a σ_z measurement.
    Filler,
}

impl SiteRole {
    pub fn is_readout(self) -> bool {
        matches!(self, SiteRole::Output | SiteRole::PassThrough)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SiteInfo {
    pub coord: Coord,
    pub wire: usize,
    pub role: SiteRole,
    /// Stage whose template measures this site.
    pub stage: Option<usize>,
    pub basis: BasisSpec,
    pub adaptive: bool,
    pub slot: Option<EulerSlot>,
    /// Sites of the same template whose outcomes flip this site's angle.
    pub depends: Vec<SiteId>,
    /// Byproduct at the output side of the measuring stage (readout: σ_x on
    /// the wire at the network output).
    pub local: PauliImage,
    /// Byproduct image at the network output.
    pub image: PauliImage,
}

/// One placed template.
#[derive(Debug, Clone, PartialEq)]
pub struct Stage {
    pub gate: GateSpec,
    /// All template sites, in template order.
    pub sites: Vec<SiteId>,
    /// Sites this stage measures, in measurement order.
    pub measured: Vec<SiteId>,
    pub edges: Vec<(SiteId, SiteId)>,
    /// Outcome-independent byproduct at the stage output.
    pub local_constant: PauliImage,
    /// `local_constant` pushed to the network output.
    pub constant: PauliImage,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompiledPattern {
    pub qubits: usize,
    pub circuit: Circuit,
    pub stages: Vec<Stage>,
    pub sites: BTreeMap<SiteId, SiteInfo>,
    pub edges: Vec<(SiteId, SiteId)>,
    pub f_init: PauliImage,
    pub phi_init: BTreeMap<SiteId, f64>,
    /// Readout site of each wire.
    pub outputs: Vec<SiteId>,
}

impl CompiledPattern {
    pub fn graph(&self) -> Result<ClusterGraph, ClusterError> {
        let mut g = ClusterGraph::new();
        for (id, info) in &self.sites {
            g.add_site(*id, info.coord)?;
        }
        for (a, b) in &self.edges {
            g.add_edge(*a, *b)?;
        }
        Ok(g)
    }

    pub fn num_sites(&self) -> usize {
        self.sites.len()
    }

    fn with_role(&self, role: SiteRole) -> BTreeSet<SiteId> {
        self.sites.iter().filter(|(_, i)| i.role == role).map(|(s, _)| *s).collect()
    }

    /// I: measured input sites.
    pub fn input_set(&self) -> BTreeSet<SiteId> {
        self.with_role(SiteRole::Input)
    }

    /// O: readout sites that are not also inputs.
    pub fn output_set(&self) -> BTreeSet<SiteId> {
        self.with_role(SiteRole::Output)
    }

    /// M: template interiors.
    pub fn interior_set(&self) -> BTreeSet<SiteId> {
        self.with_role(SiteRole::Interior)
    }

    pub fn pass_through_set(&self) -> BTreeSet<SiteId> {
        self.with_role(SiteRole::PassThrough)
    }

    pub fn filler_set(&self) -> BTreeSet<SiteId> {
        self.with_role(SiteRole::Filler)
    }

    pub fn adaptive_sites(&self) -> BTreeSet<SiteId> {
        self.sites.iter().filter(|(_, i)| i.adaptive).map(|(s, _)| *s).collect()
    }

    /// Adaptive site implementing Euler slot `slot` of stage `stage`.
    pub fn site_for_slot(&self, stage: usize, slot: EulerSlot) -> Option<SiteId> {
        self.stages[stage]
            .measured
            .iter()
            .copied()
            .find(|s| self.sites[s].slot == Some(slot) && self.sites[s].adaptive)
    }

    pub fn stage_maps(&self) -> Result<Vec<PropagationMap>, PauliError> {
        self.stages.iter().map(|s| gate_propagation_map(&s.gate, self.qubits)).collect()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CompileOptions {
    /// Pad the lagging wire with identity templates so a CNOT's control head
    /// and target head sit in the same column.
    pub align_columns: bool,
}

struct Builder {
    n: usize,
    next_id: u32,
    heads: Vec<SiteId>,
    head_cols: Vec<i32>,
    sites: BTreeMap<SiteId, SiteInfo>,
    edges: Vec<(SiteId, SiteId)>,
    stages: Vec<Stage>,
}

impl Builder {
    fn new_site(&mut self, coord: Coord, wire: usize) -> SiteId {
        let id = SiteId(self.next_id);
        self.next_id += 1;
        self.sites.insert(
            id,
            SiteInfo {
                coord,
                wire,
                role: SiteRole::Interior,
                stage: None,
                basis: BasisSpec::Z,
                adaptive: false,
                slot: None,
                depends: Vec::new(),
                local: PauliImage::identity(self.n),
                image: PauliImage::identity(self.n),
            },
        );
        id
    }

    fn place(&mut self, gate: GateSpec, template: &GateTemplate) {
        let wires = gate.wires();
        let layout = &template.layout;
        let stage_index = self.stages.len();
        let mut ids = Vec::with_capacity(layout.sites.len());
        for (i, ts) in layout.sites.iter().enumerate() {
            let wire = wires[ts.wire];
            let id = if layout.input(ts.wire) == i {
                self.heads[wire]
            } else {
                let coord = Coord { row: wire as i32, col: self.head_cols[wire] + ts.col };
                self.new_site(coord, wire)
            };
            ids.push(id);
        }
        let measured_idx = layout.measured();
        for (pos, &i) in measured_idx.iter().enumerate() {
            let ts = &layout.sites[i];
            let info = self.sites.get_mut(&ids[i]).unwrap();
            info.stage = Some(stage_index);
            info.basis = ts.basis;
            info.adaptive = ts.adaptive;
            info.slot = ts.slot;
            info.depends = ts.depends.iter().map(|d| ids[*d]).collect();
            info.local = template.byproducts.linear[pos].embed(self.n, &wires);
        }
        for (w_local, &wire) in wires.iter().enumerate() {
            let out = layout.output(w_local);
            self.heads[wire] = ids[out];
            self.head_cols[wire] += layout.sites[out].col;
        }
        let edges: Vec<_> = layout.edges.iter().map(|&(a, b)| (ids[a], ids[b])).collect();
        self.edges.extend(edges.iter().copied());
        self.stages.push(Stage {
            gate,
            sites: ids.clone(),
            measured: measured_idx.iter().map(|&i| ids[i]).collect(),
            edges,
            local_constant: template.byproducts.constant.embed(self.n, &wires),
            constant: PauliImage::identity(self.n),
        });
    }
}

/// Compiles with default options.
pub fn compile(circuit: &Circuit) -> Result<CompiledPattern, CompileError> {
    compile_with(circuit, CompileOptions::default())
}

pub fn compile_with(circuit: &Circuit, options: CompileOptions) -> Result<CompiledPattern, CompileError> {
    circuit.validate()?;
    let n = circuit.qubits;
    let mut b = Builder {
        n,
        next_id: 0,
        heads: Vec::new(),
        head_cols: vec![0; n],
        sites: BTreeMap::new(),
        edges: Vec::new(),
        stages: Vec::new(),
    };
    for w in 0..n {
        let id = b.new_site(Coord { row: w as i32, col: 0 }, w);
        b.heads.push(id);
    }
    let initial: Vec<SiteId> = b.heads.clone();
    let wire = wire_template()?;
    let cnot = cnot_template()?;
    let hadamard = clifford_template(CliffordKind::H)?;
    let phase = clifford_template(CliffordKind::S)?;

    for gate in &circuit.gates {
        match *gate {
            GateSpec::Cnot { control, target } => {
                if options.align_columns {
                    while b.head_cols[control] != b.head_cols[target] {
                        let lagging = if b.head_cols[control] < b.head_cols[target] { control } else { target };
                        b.place(GateSpec::Wire { qubit: lagging }, &wire);
                    }
                }
                b.place(*gate, &cnot);
            }
            GateSpec::H { .. } => b.place(*gate, &hadamard),
            GateSpec::S { .. } => b.place(*gate, &phase),
            GateSpec::Rot { xi, eta, zeta, .. } => b.place(*gate, &rotation_template(xi, eta, zeta)?),
            GateSpec::Wire { .. } => unreachable!("rejected by validation"),
        }
    }

    // Roles.
    for (w, &head) in b.heads.iter().enumerate() {
        let info = b.sites.get_mut(&head).unwrap();
        info.role = if head == initial[w] { SiteRole::PassThrough } else { SiteRole::Output };
        info.basis = BasisSpec::Z;
        info.local = PauliImage::x_on(n, w);
        info.image = PauliImage::x_on(n, w);
    }
    for &s in &initial {
        let info = b.sites.get_mut(&s).unwrap();
        if info.role != SiteRole::PassThrough {
            info.role = SiteRole::Input;
        }
    }

    // Forward propagation to the network output.
    let maps: Vec<PropagationMap> =
        b.stages.iter().map(|s| gate_propagation_map(&s.gate, n)).collect::<Result<_, _>>()?;
    let downstream = downstream_maps(n, &maps)?;
    let mut f_init = PauliImage::identity(n);
    let mut constant_flips: BTreeMap<SiteId, u8> = BTreeMap::new();
    for (g, d) in downstream.iter().enumerate() {
        for s in b.stages[g].measured.clone() {
            let info = b.sites.get_mut(&s).unwrap();
            info.image = d.apply(&info.local);
        }
        let local_constant = b.stages[g].local_constant.clone();
        b.stages[g].constant = d.apply(&local_constant);
        f_init += &b.stages[g].constant;
        for (rel, slot) in d.triggered(&local_constant) {
            if let Some(site) = b.site_for_slot(g + 1 + rel, slot) {
                *constant_flips.entry(site).or_default() ^= 1;
            }
        }
    }

    let mut phi_init = BTreeMap::new();
    for (id, info) in &b.sites {
        if let (true, BasisSpec::Planar { angle }) = (info.adaptive, info.basis) {
            let flip = constant_flips.get(id).copied().unwrap_or(0) == 1;
            phi_init.insert(*id, if flip { -angle } else { angle });
        }
    }

    Ok(CompiledPattern {
        qubits: n,
        circuit: circuit.clone(),
        stages: b.stages,
        sites: b.sites,
        edges: b.edges,
        f_init,
        phi_init,
        outputs: b.heads,
    })
}

impl Builder {
    fn site_for_slot(&self, stage: usize, slot: EulerSlot) -> Option<SiteId> {
        self.stages[stage]
            .measured
            .iter()
            .copied()
            .find(|s| self.sites[s].slot == Some(slot) && self.sites[s].adaptive)
    }
}

/// `result[g]` propagates from the output of stage `g` to the network output.
pub fn downstream_maps(n: usize, maps: &[PropagationMap]) -> Result<Vec<PropagationMap>, PauliError> {
    (0..maps.len()).map(|g| compose(n, &maps[g + 1..])).collect()
}

/// Fills the bounding box of the layout with σ_z-removable filler sites, each
/// joined to its occupied lattice neighbours.
pub fn embed_rectangular(p: &CompiledPattern) -> Result<CompiledPattern, CompileError> {
    let mut out = p.clone();
    let occupied: BTreeMap<(i32, i32), SiteId> =
        p.sites.iter().map(|(id, i)| ((i.coord.row, i.coord.col), *id)).collect();
    let rows = p.sites.values().map(|i| i.coord.row).max().unwrap_or(0);
    let cols = p.sites.values().map(|i| i.coord.col).max().unwrap_or(0);
    let mut next = p.sites.keys().map(|s| s.0 + 1).max().unwrap_or(0);
    let mut grid = occupied.clone();
    let mut fillers = Vec::new();
    for r in 0..=rows {
        for c in 0..=cols {
            if let std::collections::btree_map::Entry::Vacant(slot) = grid.entry((r, c)) {
                let id = SiteId(next);
                next += 1;
                slot.insert(id);
                fillers.push(id);
                out.sites.insert(
                    id,
                    SiteInfo {
                        coord: Coord { row: r, col: c },
                        wire: r as usize,
                        role: SiteRole::Filler,
                        stage: None,
                        basis: BasisSpec::Z,
                        adaptive: false,
                        slot: None,
                        depends: Vec::new(),
                        local: PauliImage::identity(p.qubits),
                        image: PauliImage::identity(p.qubits),
                    },
                );
            }
        }
    }
    let filler_set: BTreeSet<SiteId> = fillers.iter().copied().collect();
    for &f in &fillers {
        let c = out.sites[&f].coord;
        for (dr, dc) in [(0, 1), (1, 0), (0, -1), (-1, 0)] {
            if let Some(&nb) = grid.get(&(c.row + dr, c.col + dc)) {
                // filler pairs are joined once, from the lower id
                if !filler_set.contains(&nb) || f < nb {
                    out.edges.push((f, nb));
                }
            }
        }
    }
    out.graph()?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn single_h() {
        let p = compile(&Circuit::new(1, vec![GateSpec::H { qubit: 0 }])).unwrap();
        assert_eq!(p.num_sites(), 5);
        assert_eq!(p.interior_set().len() + p.input_set().len(), 4);
        assert_eq!(p.output_set().len(), 1);
        assert!(p.f_init.is_identity());
        assert!(p.adaptive_sites().is_empty());
        for s in p.interior_set() {
            match p.sites[&s].basis {
                BasisSpec::Planar { angle } => assert!((angle.abs() - FRAC_PI_2).abs() < 1e-15),
                BasisSpec::Z => panic!("interior measured in Z"),
            }
        }
    }

    #[test]
    fn single_s_has_constant() {
        let p = compile(&Circuit::new(1, vec![GateSpec::S { qubit: 0 }])).unwrap();
        assert_eq!(p.f_init, PauliImage::z_on(1, 0));
    }

    #[test]
    fn single_rotation_angles() {
        let (xi, eta, zeta) = (0.3, 0.7, -1.2);
        let p = compile(&Circuit::new(1, vec![GateSpec::Rot { qubit: 0, xi, eta, zeta }])).unwrap();
        assert_eq!(p.num_sites(), 5);
        let phi: Vec<f64> = p.phi_init.values().copied().collect();
        assert_eq!(phi, vec![-xi, -eta, -zeta]);
        assert_eq!(p.phi_init.keys().copied().collect::<Vec<_>>(), vec![SiteId(1), SiteId(2), SiteId(3)]);
    }

    #[test]
    fn cnot_last_keeps_template_map() {
        let p = compile(&Circuit::new(2, vec![GateSpec::Cnot { control: 0, target: 1 }])).unwrap();
        assert_eq!(p.num_sites(), 4);
        let t = cnot_template().unwrap();
        let stage = &p.stages[0];
        for (pos, s) in stage.measured.iter().enumerate() {
            assert_eq!(p.sites[s].image, t.byproducts.linear[pos]);
        }
        assert_eq!(p.sites[&p.outputs[0]].role, SiteRole::PassThrough);
        assert_eq!(p.sites[&p.outputs[1]].role, SiteRole::Output);
    }

    #[test]
    fn images_are_pushed_downstream() {
        // σ_x from a wire template's middle site becomes σ_z after H.
        let p = compile(&Circuit::new(1, vec![GateSpec::S { qubit: 0 }, GateSpec::H { qubit: 0 }])).unwrap();
        let s_stage = &p.stages[0];
        // S constant z, through H → x
        assert_eq!(s_stage.constant, PauliImage::x_on(1, 0));
        assert_eq!(p.f_init, PauliImage::x_on(1, 0));
    }

    #[test]
    fn constants_flip_downstream_rotation_angles() {
        // S leaves σ_z on its output, which reverses ξ and ζ of the next rotation.
        let p = compile(&Circuit::new(
            1,
            vec![GateSpec::S { qubit: 0 }, GateSpec::Rot { qubit: 0, xi: 0.4, eta: 0.5, zeta: 0.6 }],
        ))
        .unwrap();
        let phi: Vec<f64> = p.phi_init.values().copied().collect();
        assert_eq!(phi, vec![0.4, -0.5, 0.6]);
    }

    #[test]
    fn empty_circuit_is_bare_readout() {
        let p = compile(&Circuit::new(2, vec![])).unwrap();
        assert_eq!(p.num_sites(), 2);
        assert_eq!(p.pass_through_set().len(), 2);
    }

    #[test]
    fn rejects_distant_cnot() {
        let err = compile(&Circuit::new(3, vec![GateSpec::Cnot { control: 0, target: 2 }])).unwrap_err();
        assert!(matches!(err, CompileError::Circuit(CircuitError::NotNearestNeighbor { .. })));
    }

    #[test]
    fn io_sets_partition_sites() {
        let c = Circuit::new(
            3,
            vec![
                GateSpec::H { qubit: 0 },
                GateSpec::Cnot { control: 0, target: 1 },
                GateSpec::Rot { qubit: 1, xi: 0.1, eta: 0.2, zeta: 0.3 },
            ],
        );
        let p = compile(&c).unwrap();
        let total = p.input_set().len() + p.output_set().len() + p.interior_set().len() + p.pass_through_set().len();
        assert_eq!(total, p.num_sites());
        assert_eq!(p.pass_through_set().len(), 1);
        p.graph().unwrap();
    }

    #[test]
    fn alignment_pads_lagging_wire() {
        let c = Circuit::new(
            2,
            vec![GateSpec::H { qubit: 0 }, GateSpec::Cnot { control: 0, target: 1 }],
        );
        let p = compile_with(&c, CompileOptions { align_columns: true }).unwrap();
        let pads = p.stages.iter().filter(|s| matches!(s.gate, GateSpec::Wire { .. })).count();
        assert_eq!(pads, 2);
        p.graph().unwrap();
    }

    #[test]
    fn embedding_fills_bounding_box() {
        let c = Circuit::new(2, vec![GateSpec::H { qubit: 0 }]);
        let p = embed_rectangular(&compile(&c).unwrap()).unwrap();
        assert_eq!(p.num_sites(), 10);
        assert_eq!(p.filler_set().len(), 4);
    }

    #[test]
    fn compilation_is_deterministic() {
        let c = Circuit::new(
            2,
            vec![GateSpec::Rot { qubit: 0, xi: 0.1, eta: 0.2, zeta: 0.3 }, GateSpec::Cnot { control: 0, target: 1 }],
        );
        assert_eq!(compile(&c).unwrap(), compile(&c).unwrap());
    }
}
