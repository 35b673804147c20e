use std::collections::BTreeSet;

use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use oneway::circuit::{random_circuit, Circuit, GateSpec};
use oneway::cluster::{apply_corrections, make_cluster_state, remove_z, ClusterGraph, Coord};
use oneway::compiler::compile;
use oneway::format::{parse_pattern, pattern_to_json};
use oneway::pauli::{gate_propagation_map, PauliImage};
use oneway::qsim::SiteId;
use oneway::runtime::{run_shots, summarize, tv_distance, Mode, Plan, RunConfig};

fn graph(n: u32, edges: &[(u32, u32)]) -> ClusterGraph {
    let mut g = ClusterGraph::new();
    for i in 0..n {
        g.add_site(SiteId(i), Coord { row: 0, col: i as i32 }).unwrap();
    }
    let pairs: BTreeSet<(u32, u32)> =
        edges.iter().map(|&(a, b)| ((a % n).min(b % n), (a % n).max(b % n))).filter(|(a, b)| a != b).collect();
    for (a, b) in pairs {
        g.add_edge(SiteId(a), SiteId(b)).unwrap();
    }
    g
}

fn arb_gate(n: usize) -> impl Strategy<Value = GateSpec> {
    let q = 0..n;
    let angle = -3.1f64..3.1;
    prop_oneof![
        q.clone().prop_map(|qubit| GateSpec::H { qubit }),
        q.clone().prop_map(|qubit| GateSpec::S { qubit }),
        (q.clone(), angle.clone(), angle.clone(), angle).prop_map(|(qubit, xi, eta, zeta)| GateSpec::Rot {
            qubit,
            xi,
            eta,
            zeta
        }),
        (0..n.max(2) - 1, any::<bool>()).prop_map(|(a, up)| if up {
            GateSpec::Cnot { control: a, target: a + 1 }
        } else {
            GateSpec::Cnot { control: a + 1, target: a }
        }),
    ]
}

fn arb_circuit(max_qubits: usize, max_gates: usize) -> impl Strategy<Value = Circuit> {
    (2..=max_qubits).prop_flat_map(move |n| {
        proptest::collection::vec(arb_gate(n), 0..=max_gates).prop_map(move |gates| Circuit::new(n, gates))
    })
}

/// Full 2^n unitary of `gate`, wire `i` as bit `i`.
fn embed(gate: &GateSpec, n: usize) -> DMatrix<Complex64> {
    let local = gate.unitary();
    let wires = gate.wires();
    let dim = 1 << n;
    DMatrix::from_fn(dim, dim, |r, c| {
        let rest = |i: usize| wires.iter().fold(i, |acc, w| acc & !(1 << w));
        if rest(r) != rest(c) {
            return Complex64::new(0.0, 0.0);
        }
        let pick = |i: usize| wires.iter().enumerate().fold(0, |acc, (k, w)| acc | (i >> w & 1) << k);
        local[(pick(r), pick(c))]
    })
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn z_removal_leaves_reduced_cluster(
        n in 2u32..8,
        edges in proptest::collection::vec((0u32..8, 0u32..8), 0..12),
        site in 0u32..8,
        draw in 0.0f64..1.0,
    ) {
        let g = graph(n, &edges);
        let site = SiteId(site % n);
        let mut psi = make_cluster_state(&g).unwrap();
        let removal = remove_z(&g, &mut psi, site, draw).unwrap();
        let mut reduced = make_cluster_state(&removal.graph).unwrap();
        apply_corrections(&mut reduced, &removal.corrections).unwrap();
        prop_assert!(psi.fidelity(&reduced).unwrap() > 1.0 - 1e-10);
    }

    #[test]
    fn gate_maps_match_conjugation(gate in (1usize..=3).prop_flat_map(|n| (Just(n), arb_gate(n))), bits in any::<u8>()) {
        let (n, gate) = gate;
        prop_assume!(!matches!(gate, GateSpec::Cnot { .. }) || n >= 2);
        let mut before = PauliImage::identity(n);
        for q in 0..n {
            before.set_x(q, bits >> q & 1 == 1);
            before.set_z(q, bits >> (q + 3) & 1 == 1);
        }
        let u = embed(&gate, n);
        let map = gate_propagation_map(&gate, n).unwrap();
        let after = map.apply(&before);
        let lhs = &u * before.to_pauli();
        let rhs = after.to_pauli() * &u;
        if let GateSpec::Rot { .. } = gate {
            // rotations pass Paulis through with flipped angles instead
            prop_assert_eq!(after, before);
        } else {
            let overlap: Complex64 = lhs.iter().zip(rhs.iter()).map(|(a, b)| a.conj() * b).sum();
            let phase = overlap / overlap.norm();
            let dev = (lhs * phase - rhs).iter().map(|c| c.norm()).fold(0.0, f64::max);
            prop_assert!(dev < 1e-12);
        }
    }

    #[test]
    fn patterns_survive_json(c in arb_circuit(3, 6)) {
        let p = compile(&c).unwrap();
        prop_assert_eq!(parse_pattern(&pattern_to_json(&p)).unwrap(), p);
    }
}

#[test]
fn full_and_streamed_modes_agree() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for i in 0..3 {
        let c = random_circuit(&mut rng, 2, 3, false);
        let plan = Plan::from_circuit(&c).unwrap();
        let mut dists = Vec::new();
        for mode in [Mode::Full, Mode::Streamed] {
            let cfg = RunConfig { shots: 10_000, seed: 40 + i, mode, check: false, ..RunConfig::default() };
            let records = run_shots(&plan, &cfg, None).unwrap();
            dists.push(summarize(&plan, &cfg, &records, None).distribution);
        }
        let tv: f64 = tv_distance(&dists[0], &dists[1]);
        assert!(tv <= 0.05, "circuit {i}: TV {tv}");
    }
}
