//! Gate templates: small cluster fragments whose measurement realizes one
//! gate up to a Pauli byproduct.
//!
//! The byproduct of every template is not hard-coded. [`derive_byproducts`]
//! forces each outcome assignment in a statevector run over a tomographically
//! complete set of inputs, fits the sign-free Pauli `P(s)` with
//! `output = P(s) · U · input`, and checks that `s ↦ P(s)` is affine over GF(2).

use std::f64::consts::FRAC_PI_2;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use thiserror::Error;

use crate::circuit::GateSpec;
use crate::pauli::{EulerSlot, PauliImage};
use crate::qsim::{BasisSpec, QsimError, QuantumState, SiteId};

/// Largest number of measured sites a template may have.
pub const MAX_TEMPLATE_MEASURED: usize = 6;
/// Largest number of wires a template may span.
pub const MAX_TEMPLATE_WIRES: usize = 2;
/// Per-amplitude tolerance when fitting a byproduct.
pub const FIT_TOLERANCE: f64 = 1e-10;
/// Planar angles this close to 0 or π (mod 2π) give the same basis, with the
/// same outcome labels, after a sign flip.
pub const FLIP_INVARIANT_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TemplateError {
    #[error("template too large: {measured} measured sites on {wires} wires")]
    TooLarge { measured: usize, wires: usize },
    #[error("no Pauli byproduct fits outcome assignment {outcomes:?}")]
    NoFit { outcomes: Vec<u8> },
    #[error("byproducts are not affine in the outcomes (fails at {outcomes:?})")]
    NonAffine { outcomes: Vec<u8> },
    #[error(transparent)]
    Qsim(#[from] QsimError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TemplateRole {
    /// First site of a wire; measured.
    Input,
    /// Measured site in the middle of the template.
    Interior,
    /// Carries the wire's state out; not measured by this template.
    Output,
    /// Carries a wire through unmeasured (the CNOT control).
    InputOutput,
}

impl TemplateRole {
    pub fn is_measured(self) -> bool {
        matches!(self, TemplateRole::Input | TemplateRole::Interior)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TemplateSite {
    pub role: TemplateRole,
    /// Local wire index.
    pub wire: usize,
    /// Layout offset in columns relative to the wire's head.
    pub col: i32,
    pub basis: BasisSpec,
    /// Whether the angle's sign depends on other outcomes.
    pub adaptive: bool,
    /// Template sites whose outcomes flip this site's angle.
    pub depends: Vec<usize>,
    /// Euler angle this site implements, for flips arriving from upstream.
    pub slot: Option<EulerSlot>,
}

/// Sign-free byproduct as an affine function of the template's outcomes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AffineByproductMap {
    pub constant: PauliImage,
    /// One image per measured site, in measurement order.
    pub linear: Vec<PauliImage>,
}

impl AffineByproductMap {
    pub fn evaluate(&self, outcomes: &[u8]) -> PauliImage {
        assert_eq!(outcomes.len(), self.linear.len());
        let mut p = self.constant.clone();
        for (s, f) in outcomes.iter().zip(&self.linear) {
            if *s == 1 {
                p += f;
            }
        }
        p
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TemplateLayout {
    pub wires: usize,
    pub sites: Vec<TemplateSite>,
    pub edges: Vec<(usize, usize)>,
}

impl TemplateLayout {
    /// Indices of measured sites in measurement order.
    pub fn measured(&self) -> Vec<usize> {
        (0..self.sites.len()).filter(|&i| self.sites[i].role.is_measured()).collect()
    }

    /// Site index holding wire `w` at the input side.
    pub fn input(&self, w: usize) -> usize {
        self.sites
            .iter()
            .position(|s| s.wire == w && matches!(s.role, TemplateRole::Input | TemplateRole::InputOutput))
            .expect("every wire has an input")
    }

    /// Site index holding wire `w` at the output side.
    pub fn output(&self, w: usize) -> usize {
        self.sites
            .iter()
            .position(|s| s.wire == w && matches!(s.role, TemplateRole::Output | TemplateRole::InputOutput))
            .expect("every wire has an output")
    }

    /// Angle actually measured at site `i` given the outcomes of earlier sites
    /// (indexed by template site) and an extra sign from outside the template.
    pub fn adapted_basis(&self, i: usize, outcomes: &[Option<u8>], external_flip: bool) -> BasisSpec {
        let site = &self.sites[i];
        match site.basis {
            BasisSpec::Planar { angle } if site.adaptive => {
                let parity = site.depends.iter().map(|d| outcomes[*d].expect("dependency measured")).sum::<u8>() % 2;
                let flip = (parity == 1) ^ external_flip;
                BasisSpec::Planar { angle: if flip { -angle } else { angle } }
            }
            b => b,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GateTemplate {
    pub gate: GateSpec,
    pub layout: TemplateLayout,
    pub byproducts: AffineByproductMap,
}

pub fn is_flip_invariant(angle: f64) -> bool {
    angle.sin().abs() <= FLIP_INVARIANT_TOLERANCE
}

fn chain_layout(angles: [f64; 4], adaptive: bool) -> TemplateLayout {
    let deps: [&[usize]; 4] = [&[], &[0], &[1], &[0, 2]];
    let slots = [None, Some(EulerSlot::Xi), Some(EulerSlot::Eta), Some(EulerSlot::Zeta)];
    let mut sites: Vec<TemplateSite> = (0..4)
        .map(|i| {
            let is_adaptive = adaptive && i > 0 && !is_flip_invariant(angles[i]);
            TemplateSite {
                role: if i == 0 { TemplateRole::Input } else { TemplateRole::Interior },
                wire: 0,
                col: i as i32,
                basis: BasisSpec::Planar { angle: angles[i] },
                adaptive: is_adaptive,
                depends: if is_adaptive { deps[i].to_vec() } else { Vec::new() },
                slot: if is_adaptive { slots[i] } else { None },
            }
        })
        .collect();
    sites.push(TemplateSite {
        role: TemplateRole::Output,
        wire: 0,
        col: 4,
        basis: BasisSpec::Z,
        adaptive: false,
        depends: Vec::new(),
        slot: None,
    });
    TemplateLayout { wires: 1, sites, edges: (0..4).map(|i| (i, i + 1)).collect() }
}

fn build(gate: GateSpec, layout: TemplateLayout) -> Result<GateTemplate, TemplateError> {
    let byproducts = derive_byproducts(&layout, &gate.unitary())?;
    Ok(GateTemplate { gate, layout, byproducts })
}

/// Five-site chain for U_x(ζ) U_z(η) U_x(ξ). Base angles are `0, −ξ, −η, −ζ`;
/// the sign of site 2 follows s₁, site 3 follows s₂ and site 4 follows s₁+s₃.
pub fn rotation_template(xi: f64, eta: f64, zeta: f64) -> Result<GateTemplate, TemplateError> {
    build(
        GateSpec::Rot { qubit: 0, xi, eta, zeta },
        chain_layout([0.0, -xi, -eta, -zeta], true),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CliffordKind {
    H,
    S,
}

/// Static σ_x/σ_y chains. H measures angles (0, −π/2, −π/2, −π/2); S measures
/// (0, 0, +π/2, 0), which realizes U_z(−π/2) = σ_z · U_z(π/2) and hence
/// carries a constant σ_z byproduct.
pub fn clifford_template(kind: CliffordKind) -> Result<GateTemplate, TemplateError> {
    match kind {
        CliffordKind::H => build(
            GateSpec::H { qubit: 0 },
            chain_layout([0.0, -FRAC_PI_2, -FRAC_PI_2, -FRAC_PI_2], false),
        ),
        CliffordKind::S => build(GateSpec::S { qubit: 0 }, chain_layout([0.0, 0.0, FRAC_PI_2, 0.0], false)),
    }
}

/// Target chain t_in-m-t_out with the control site attached to m. Local wire 0
/// is the control, wire 1 the target; t_in and m are measured in σ_x.
pub fn cnot_template() -> Result<GateTemplate, TemplateError> {
    let site = |role, wire, col, basis| TemplateSite {
        role,
        wire,
        col,
        basis,
        adaptive: false,
        depends: Vec::new(),
        slot: None,
    };
    let layout = TemplateLayout {
        wires: 2,
        sites: vec![
            site(TemplateRole::InputOutput, 0, 0, BasisSpec::Z),
            site(TemplateRole::Input, 1, 0, BasisSpec::x()),
            site(TemplateRole::Interior, 1, 1, BasisSpec::x()),
            site(TemplateRole::Output, 1, 2, BasisSpec::Z),
        ],
        edges: vec![(1, 2), (2, 3), (0, 2)],
    };
    build(GateSpec::Cnot { control: 0, target: 1 }, layout)
}

/// Three-site identity chain used for padding.
pub fn wire_template() -> Result<GateTemplate, TemplateError> {
    let mut layout = chain_layout([0.0; 4], false);
    layout.sites.truncate(2);
    layout.sites.push(TemplateSite {
        role: TemplateRole::Output,
        wire: 0,
        col: 2,
        basis: BasisSpec::Z,
        adaptive: false,
        depends: Vec::new(),
        slot: None,
    });
    layout.edges = vec![(0, 1), (1, 2)];
    build(GateSpec::Wire { qubit: 0 }, layout)
}

/// Template for a network gate, with local wires in `gate.wires()` order.
pub fn template_for(gate: &GateSpec) -> Result<GateTemplate, TemplateError> {
    match *gate {
        GateSpec::Rot { xi, eta, zeta, .. } => rotation_template(xi, eta, zeta),
        GateSpec::H { .. } => clifford_template(CliffordKind::H),
        GateSpec::S { .. } => clifford_template(CliffordKind::S),
        GateSpec::Cnot { .. } => cnot_template(),
        GateSpec::Wire { .. } => wire_template(),
    }
}

/// The four single-qubit probe states |0⟩, |1⟩, |+⟩, |+i⟩.
pub fn probe_states() -> [[Complex64; 2]; 4] {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let c = Complex64::new;
    [
        [c(1.0, 0.0), c(0.0, 0.0)],
        [c(0.0, 0.0), c(1.0, 0.0)],
        [c(h, 0.0), c(h, 0.0)],
        [c(h, 0.0), c(0.0, h)],
    ]
}

/// Runs the template on a product input with every measured outcome forced.
/// `outcomes` is indexed by measurement order. The residual state lives on the
/// output sites, which are labelled `SiteId(template index)`.
pub fn simulate_template(
    layout: &TemplateLayout,
    outcomes: &[u8],
    inputs: &[[Complex64; 2]],
) -> Result<QuantumState, TemplateError> {
    let measured = layout.measured();
    assert_eq!(outcomes.len(), measured.len());
    assert_eq!(inputs.len(), layout.wires);
    let h = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    let ids: Vec<SiteId> = (0..layout.sites.len() as u32).map(SiteId).collect();
    let factors: Vec<[Complex64; 2]> = (0..layout.sites.len())
        .map(|i| {
            let w = layout.sites[i].wire;
            if layout.input(w) == i {
                inputs[w]
            } else {
                [h, h]
            }
        })
        .collect();
    let mut psi = QuantumState::product(&ids, &factors, crate::qsim::DEFAULT_MAX_QUBITS)?;
    for &(a, b) in &layout.edges {
        psi.apply_cz(ids[a], ids[b])?;
    }
    let mut seen = vec![None; layout.sites.len()];
    for (&i, &s) in measured.iter().zip(outcomes) {
        let basis = layout.adapted_basis(i, &seen, false);
        psi.project(ids[i], &basis, s)?;
        seen[i] = Some(s);
    }
    Ok(psi)
}

fn kron_inputs(inputs: &[[Complex64; 2]]) -> DVector<Complex64> {
    let mut v = DVector::from_element(1, Complex64::new(1.0, 0.0));
    for f in inputs {
        let single = DVector::from_column_slice(f);
        v = single.kronecker(&v);
    }
    v
}

/// Largest amplitude deviation between `actual` and `expected` after removing
/// the best global phase.
pub fn phase_aligned_deviation(actual: &[Complex64], expected: &DVector<Complex64>) -> f64 {
    let overlap: Complex64 = expected.iter().zip(actual).map(|(e, a)| e.conj() * a).sum();
    let phase = if overlap.norm() > 0.0 { overlap / overlap.norm() } else { Complex64::new(1.0, 0.0) };
    actual
        .iter()
        .zip(expected.iter())
        .map(|(a, e)| (a - phase * e).norm())
        .fold(0.0, f64::max)
}

fn all_paulis(w: usize) -> impl Iterator<Item = PauliImage> {
    (0..1usize << (2 * w)).map(move |m| {
        let mut p = PauliImage::identity(w);
        for i in 0..w {
            p.set_x(i, m >> i & 1 == 1);
            p.set_z(i, m >> (w + i) & 1 == 1);
        }
        p
    })
}

fn bits(m: usize, k: usize) -> Vec<u8> {
    (0..k).map(|i| (m >> i & 1) as u8).collect()
}

/// Brute-force derivation of the template's outcome → byproduct map.
pub fn derive_byproducts(
    layout: &TemplateLayout,
    target: &DMatrix<Complex64>,
) -> Result<AffineByproductMap, TemplateError> {
    let measured = layout.measured();
    let k = measured.len();
    let w = layout.wires;
    if k > MAX_TEMPLATE_MEASURED || w > MAX_TEMPLATE_WIRES {
        return Err(TemplateError::TooLarge { measured: k, wires: w });
    }
    let outputs: Vec<SiteId> = (0..w).map(|i| SiteId(layout.output(i) as u32)).collect();
    let probes = probe_states();
    let input_sets: Vec<Vec<[Complex64; 2]>> = (0..4usize.pow(w as u32))
        .map(|m| (0..w).map(|i| probes[(m / 4usize.pow(i as u32)) % 4]).collect())
        .collect();
    let ideal: Vec<DVector<Complex64>> = input_sets.iter().map(|inp| target * kron_inputs(inp)).collect();
    let candidates: Vec<(PauliImage, DMatrix<Complex64>)> =
        all_paulis(w).map(|p| { let m = p.to_pauli(); (p, m) }).collect();

    let mut fitted = Vec::with_capacity(1 << k);
    for m in 0..1usize << k {
        let s = bits(m, k);
        let mut residuals = Vec::with_capacity(input_sets.len());
        for inp in &input_sets {
            let psi = simulate_template(layout, &s, inp)?;
            residuals.push(psi.amplitudes_in_order(&outputs)?);
        }
        let fit = candidates.iter().find(|(_, pm)| {
            residuals
                .iter()
                .zip(&ideal)
                .all(|(res, id)| phase_aligned_deviation(res, &(pm * id)) <= FIT_TOLERANCE)
        });
        match fit {
            Some((p, _)) => fitted.push(p.clone()),
            None => return Err(TemplateError::NoFit { outcomes: s }),
        }
    }

    let constant = fitted[0].clone();
    let linear: Vec<PauliImage> = (0..k).map(|i| &fitted[1 << i] + &constant).collect();
    let map = AffineByproductMap { constant, linear };
    for (m, p) in fitted.iter().enumerate() {
        let s = bits(m, k);
        if map.evaluate(&s) != *p {
            return Err(TemplateError::NonAffine { outcomes: s });
        }
    }
    Ok(map)
}
