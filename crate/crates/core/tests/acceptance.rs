//! Acceptance criteria, one test per criterion.

use std::f64::consts::{FRAC_PI_2, PI};
use std::process::Command;
use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use oneway::circuit::{random_circuit, Circuit, GateSpec};
use oneway::cluster::{check_stabilizers, make_cluster_state, ClusterGraph, Coord};
use oneway::compiler::template::{probe_states, simulate_template};
use oneway::compiler::{clifford_template, compile, rotation_template, CliffordKind};
use oneway::pauli::{compose, gate_propagation_map, EulerSlot, PauliImage};
use oneway::qsim::{gates, Matrix2, QuantumState, SiteId};
use oneway::runtime::{run_shots, summarize, Mode, Oracle, Plan, RunConfig};
use oneway::scheduler::{cone_test, schedule};

fn report(n: u32, name: &str, ok: bool, detail: String, elapsed: Duration) {
    println!("criterion {n:>2} {:<4} {name}: {detail} ({:.2?})", if ok { "PASS" } else { "FAIL" }, elapsed);
}

fn random_graph(rng: &mut ChaCha8Rng, sites: u32) -> ClusterGraph {
    let mut g = ClusterGraph::new();
    for i in 0..sites {
        g.add_site(SiteId(i), Coord { row: 0, col: i as i32 }).unwrap();
    }
    for a in 0..sites {
        for b in a + 1..sites {
            if rng.random_bool(0.3) {
                g.add_edge(SiteId(a), SiteId(b)).unwrap();
            }
        }
    }
    g
}

/// Circuits with 1–3 qubits and 1–4 gates drawn from the full gate set.
fn corpus() -> Vec<Circuit> {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    (0..20)
        .map(|_| {
            let n = rng.random_range(1..=3);
            let g = rng.random_range(1..=4);
            random_circuit(&mut rng, n, g, false)
        })
        .collect()
}

#[test]
fn criterion_01_stabilizer_suite() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut passed = 0;
    for _ in 0..50 {
        let n = rng.random_range(1..=12);
        let g = random_graph(&mut rng, n);
        let psi = make_cluster_state(&g).unwrap();
        if check_stabilizers(&g, &psi).unwrap() {
            passed += 1;
        }
    }
    let elapsed = start.elapsed();
    let ok = passed == 50 && elapsed < Duration::from_secs(10);
    report(1, "stabilizer suite", ok, format!("{passed}/50 graphs"), elapsed);
    assert!(ok);
}

fn apply2(m: &Matrix2, v: [Complex64; 2]) -> [Complex64; 2] {
    [m[0][0] * v[0] + m[0][1] * v[1], m[1][0] * v[0] + m[1][1] * v[1]]
}

/// σ_x^{x} σ_z^{z} as a 2×2 matrix.
fn pauli2(x: bool, z: bool) -> Matrix2 {
    let mut m = gates::identity();
    if z {
        m = gates::mul(&gates::pauli_z(), &m);
    }
    if x {
        m = gates::mul(&gates::pauli_x(), &m);
    }
    m
}

#[test]
fn criterion_02_rotation_byproducts() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 1.0;
    let mut exact = true;
    for _ in 0..20 {
        let (xi, eta, zeta) = (rng.random_range(-PI..PI), rng.random_range(-PI..PI), rng.random_range(-PI..PI));
        let t = rotation_template(xi, eta, zeta).unwrap();
        let x = PauliImage::x_on(1, 0);
        let z = PauliImage::z_on(1, 0);
        exact &= t.byproducts.constant.is_identity() && t.byproducts.linear == vec![z.clone(), x.clone(), z, x];
        let u = gates::euler(xi, eta, zeta);
        for m in 0..16u8 {
            let s: Vec<u8> = (0..4).map(|i| m >> i & 1).collect();
            let by = pauli2((s[1] + s[3]) % 2 == 1, (s[0] + s[2]) % 2 == 1);
            for probe in probe_states() {
                let psi = simulate_template(&t.layout, &s, &[probe]).unwrap();
                let want = apply2(&by, apply2(&u, probe));
                let want = QuantumState::product(&[SiteId(4)], &[want], 24).unwrap();
                worst = worst.min(psi.fidelity(&want).unwrap());
            }
        }
    }
    let elapsed = start.elapsed();
    let ok = exact && worst >= 1.0 - 1e-10 && elapsed < Duration::from_secs(30);
    report(2, "rotation byproducts", ok, format!("affine map exact: {exact}, min fidelity {worst:.15}"), elapsed);
    assert!(ok);
}

#[test]
fn criterion_03_clifford_byproducts() {
    let start = Instant::now();
    let x = PauliImage::x_on(1, 0);
    let z = PauliImage::z_on(1, 0);
    let xz = &x + &z;
    let h = clifford_template(CliffordKind::H).unwrap();
    let s = clifford_template(CliffordKind::S).unwrap();
    // H: σ_x^{s1+s3+s4} σ_z^{s2+s3}; S: σ_x^{s2+s4} σ_z^{s1+s2+s3+1}
    let h_ok = h.byproducts.constant.is_identity()
        && h.byproducts.linear == vec![x.clone(), z.clone(), xz.clone(), x.clone()];
    let s_ok = s.byproducts.constant == z && s.byproducts.linear == vec![z.clone(), xz, z.clone(), x];
    let static_bases = h.layout.sites.iter().chain(&s.layout.sites).all(|site| !site.adaptive);
    let ok = h_ok && s_ok && static_bases;
    report(
        3,
        "Clifford byproducts",
        ok,
        format!("H {h_ok}, S {s_ok} (constant {}), static bases {static_bases}", s.byproducts.constant),
        start.elapsed(),
    );
    assert!(ok);
}

fn max_dev(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> f64 {
    (a - b).iter().map(|c| c.norm()).fold(0.0, f64::max)
}

fn phase_dev(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> f64 {
    let overlap: Complex64 = a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum();
    let phase = overlap / overlap.norm();
    max_dev(&(a * phase), b)
}

fn m2(m: &Matrix2) -> DMatrix<Complex64> {
    DMatrix::from_fn(2, 2, |r, c| m[r][c])
}

#[test]
fn criterion_04_propagation_relations() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut dev_rot: f64 = 0.0;
    let mut dev_cnot: f64 = 0.0;
    let mut dev_clifford: f64 = 0.0;
    for _ in 0..100 {
        let (s, s2) = (rng.random_bool(0.5), rng.random_bool(0.5));
        let (xi, eta, zeta) = (rng.random_range(-PI..PI), rng.random_range(-PI..PI), rng.random_range(-PI..PI));

        // U_R σ_z^s σ_x^{s'} = σ_z^s σ_x^{s'} U_R((−1)^s ξ, (−1)^{s'} η, (−1)^s ζ),
        // with the flips taken from the propagation map.
        let gate = GateSpec::Rot { qubit: 0, xi, eta, zeta };
        let map = gate_propagation_map(&gate, 1).unwrap();
        let mut img = PauliImage::identity(1);
        img.set_z(0, s);
        img.set_x(0, s2);
        let flipped = |slot: EulerSlot, a: f64| {
            if map.triggered(&img).iter().any(|(_, sl)| *sl == slot) { -a } else { a }
        };
        let zx = gates::mul(&pauli2(false, s), &pauli2(s2, false));
        let lhs = gates::mul(&gates::euler(xi, eta, zeta), &zx);
        let rhs = gates::mul(
            &zx,
            &gates::euler(flipped(EulerSlot::Xi, xi), flipped(EulerSlot::Eta, eta), flipped(EulerSlot::Zeta, zeta)),
        );
        assert_eq!(map.apply(&img), img);
        dev_rot = dev_rot.max(max_dev(&m2(&lhs), &m2(&rhs)));

        // CNOT relation on 4 dimensions, both orientations.
        for (control, target) in [(0, 1), (1, 0)] {
            let gate = GateSpec::Cnot { control, target };
            let mut full = DMatrix::<Complex64>::identity(4, 4);
            let u = gate.unitary();
            // gate.unitary() takes the control as the low bit.
            let perm = |i: usize| if control == 0 { i } else { (i & 1) << 1 | (i >> 1) };
            for r in 0..4 {
                for c in 0..4 {
                    full[(perm(r), perm(c))] = u[(r, c)];
                }
            }
            let map = gate_propagation_map(&gate, 2).unwrap();
            let mut before = PauliImage::identity(2);
            for q in 0..2 {
                before.set_x(q, rng.random_bool(0.5));
                before.set_z(q, rng.random_bool(0.5));
            }
            let after = map.apply(&before);
            dev_cnot = dev_cnot.max(max_dev(&(&full * before.to_pauli()), &(after.to_pauli() * &full)));
        }

        // H and U_z(π/2), up to global phase.
        let mut before = PauliImage::identity(1);
        before.set_x(0, s);
        before.set_z(0, s2);
        for (gate, u) in [(GateSpec::H { qubit: 0 }, gates::hadamard()), (GateSpec::S { qubit: 0 }, gates::rot_z(FRAC_PI_2))] {
            let after = gate_propagation_map(&gate, 1).unwrap().apply(&before);
            let lhs = m2(&u) * before.to_pauli();
            let rhs = after.to_pauli() * m2(&u);
            dev_clifford = dev_clifford.max(phase_dev(&lhs, &rhs));
        }
    }
    let worst = dev_rot.max(dev_cnot).max(dev_clifford);
    let ok = worst <= 1e-12;
    report(
        4,
        "propagation relations",
        ok,
        format!("max deviation rot {dev_rot:.1e}, cnot {dev_cnot:.1e}, H/S {dev_clifford:.1e}"),
        start.elapsed(),
    );
    assert!(ok);
}

#[test]
fn criterion_05_symplectic_and_cone_test() {
    let start = Instant::now();
    let mut maps_ok = true;
    let mut count = 0;
    for n in 1..=4 {
        let mut gates: Vec<GateSpec> = (0..n).flat_map(|q| [GateSpec::H { qubit: q }, GateSpec::S { qubit: q }]).collect();
        for a in 0..n.saturating_sub(1) {
            gates.push(GateSpec::Cnot { control: a, target: a + 1 });
            gates.push(GateSpec::Cnot { control: a + 1, target: a });
        }
        for g in &gates {
            let map = gate_propagation_map(g, n).unwrap();
            count += 1;
            maps_ok &= map.is_symplectic();
            // exhaustive over all image pairs
            for a in 0..1usize << (2 * n) {
                for b in 0..1usize << (2 * n) {
                    let pa = image_from_index(n, a);
                    let pb = image_from_index(n, b);
                    maps_ok &= pa.symplectic(&pb).unwrap() == map.apply(&pa).symplectic(&map.apply(&pb)).unwrap();
                }
            }
        }
        let composed = compose(n, &gates.iter().map(|g| gate_propagation_map(g, n).unwrap()).collect::<Vec<_>>()).unwrap();
        maps_ok &= composed.is_symplectic();
    }

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut pairs = 0;
    let mut disagreements = 0;
    for _ in 0..20 {
        let n = rng.random_range(1..=3);
        let g = rng.random_range(1..=5);
        let c = random_circuit(&mut rng, n, g, false);
        let p = compile(&c).unwrap();
        let (cones, _) = schedule(&p).unwrap();
        for j in p.adaptive_sites() {
            for &k in p.sites.keys() {
                pairs += 1;
                let direct = cones.in_forward(k, j) || cones.in_backward(k, j);
                if (cone_test(&p, j, k) == 1) != direct {
                    disagreements += 1;
                }
            }
        }
    }
    let ok = maps_ok && disagreements == 0 && pairs > 0;
    report(
        5,
        "symplectic invariance and cone test",
        ok,
        format!("{count} gate maps invariant: {maps_ok}; {disagreements} of {pairs} cone pairs disagree"),
        start.elapsed(),
    );
    assert!(ok);
}

fn image_from_index(n: usize, m: usize) -> PauliImage {
    let mut p = PauliImage::identity(n);
    for i in 0..n {
        p.set_x(i, m >> i & 1 == 1);
        p.set_z(i, m >> (n + i) & 1 == 1);
    }
    p
}

#[test]
fn criterion_06_clifford_unit_depth() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut depths = Vec::new();
    for _ in 0..30 {
        let n = rng.random_range(1..=4);
        let g = rng.random_range(1..=10);
        let c = random_circuit(&mut rng, n, g, true);
        assert!(c.is_clifford());
        depths.push(schedule(&compile(&c).unwrap()).unwrap().1.t_max());
    }
    let elapsed = start.elapsed();
    let ok = depths.iter().all(|d| *d == 0) && elapsed < Duration::from_secs(5);
    report(6, "Clifford unit depth", ok, format!("max t_max {}", depths.iter().max().unwrap()), elapsed);
    assert!(ok);
}

#[test]
fn criterion_07_end_to_end_state_correctness() {
    let start = Instant::now();
    let mut worst: f64 = 1.0;
    let mut mismatches = 0;
    let mut shots = 0;
    for (i, c) in corpus().iter().enumerate() {
        let plan = Plan::from_circuit(c).unwrap();
        let oracle = Oracle::new(c).unwrap();
        let cfg = RunConfig { shots: 50, seed: 700 + i as u64, mode: Mode::Full, ..RunConfig::default() };
        for r in run_shots(&plan, &cfg, Some(&oracle)).unwrap() {
            let check = r.check.expect("oracle check ran");
            worst = worst.min(check.final_fidelity);
            shots += 1;
            if check.corrected_readout != r.result || check.oracle_probability <= 1e-12 {
                mismatches += 1;
            }
        }
    }
    let elapsed = start.elapsed();
    let ok = worst >= 1.0 - 1e-9 && mismatches == 0 && elapsed < Duration::from_secs(120);
    report(
        7,
        "end-to-end state correctness",
        ok,
        format!("{shots} shots, min fidelity {worst:.12}, {mismatches} readout mismatches"),
        elapsed,
    );
    assert!(ok);
}

#[test]
fn criterion_08_distribution_match() {
    let start = Instant::now();
    let mut worst_tv: f64 = 0.0;
    let mut worst_p: f64 = 1.0;
    for (i, c) in corpus().iter().enumerate() {
        let plan = Plan::from_circuit(c).unwrap();
        let oracle = Oracle::new(c).unwrap();
        let cfg = RunConfig { shots: 10_000, seed: 800 + i as u64, mode: Mode::Streamed, ..RunConfig::default() };
        let records = run_shots(&plan, &cfg, Some(&oracle)).unwrap();
        let s = summarize(&plan, &cfg, &records, Some(&oracle));
        worst_tv = worst_tv.max(s.tv_distance.unwrap());
        worst_p = worst_p.min(s.chi_square_p.unwrap());
    }
    let elapsed = start.elapsed();
    let bound = 3.0 * (16.0f64 / 10_000.0).sqrt();
    let ok = worst_tv <= bound && worst_p > 1e-3 && elapsed < Duration::from_secs(120);
    report(
        8,
        "distribution match",
        ok,
        format!("max TV {worst_tv:.4} (bound {bound:.2}), min chi-square p {worst_p:.4}"),
        elapsed,
    );
    assert!(ok);
}

#[test]
fn criterion_09_deterministic_output() {
    let start = Instant::now();
    let mut ok = true;
    let mut detail = Vec::new();
    for n in 1..=4 {
        let c = Circuit::new(n, (0..n).map(|q| GateSpec::H { qubit: q }).collect());
        let plan = Plan::from_circuit(&c).unwrap();
        let cfg = RunConfig { shots: 10_000, seed: 9, ..RunConfig::default() };
        let records = run_shots(&plan, &cfg, None).unwrap();
        let zeros = records.iter().filter(|r| r.result == "0".repeat(n)).count();
        ok &= zeros == 10_000;
        detail.push(format!("n={n}: {zeros}/10000"));
    }
    report(9, "deterministic output", ok, detail.join(", "), start.elapsed());
    assert!(ok);
}

fn run_cli(args: &[&str]) -> Vec<u8> {
    let out = Command::new(env!("CARGO_BIN_EXE_oneway")).args(args).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    out.stdout
}

#[test]
fn criterion_10_determinism() {
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let circuit = concat!(env!("CARGO_MANIFEST_DIR"), "/data/mixed2.json");
    let pattern = dir.path().join("mixed2.pattern.json");
    let pattern = pattern.to_str().unwrap();
    run_cli(&["compile", circuit, pattern]);
    let mut ok = true;
    for mode in ["streamed", "full"] {
        let base = ["run", pattern, "--shots", "1000", "--seed", "7", "--mode", mode];
        let first = run_cli(&[&base[..], &["--threads", "1"]].concat());
        let second = run_cli(&[&base[..], &["--threads", "1"]].concat());
        let wide = run_cli(&[&base[..], &["--threads", "8"]].concat());
        ok &= !first.is_empty() && first == second && first == wide;
    }
    report(10, "determinism", ok, "byte-identical summaries across runs and 1/8 threads".into(), start.elapsed());
    assert!(ok);
}
