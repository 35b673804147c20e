//! Shot execution in full-cluster and streamed mode, plus oracle comparison.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};
use thiserror::Error;

use crate::circuit::{Circuit, CircuitError};
use crate::cluster::{make_cluster_state_with_limit, ClusterError};
use crate::compiler::{compile, CompileError, CompiledPattern, SiteRole};
use crate::controller::{ControllerError, FlowState, Outcomes, StreamedFlow, TraceLine};
use crate::pauli::{Bits, PauliImage};
use crate::qsim::{gates, BasisSpec, QsimError, QuantumState, SiteId, DEFAULT_MAX_QUBITS};
use crate::scheduler::{compute_cones, build_schedule, ConeSets, Schedule, ScheduleError};

/// Oracle probabilities at or below this count as outside the support.
pub const SUPPORT_EPSILON: f64 = 1e-12;
/// Per-shot state fidelity required in full mode.
pub const FIDELITY_THRESHOLD: f64 = 1.0 - 1e-9;

#[derive(Debug, Error)]
pub enum RuntimeError {
    #[error(transparent)]
    Qsim(#[from] QsimError),
    #[error(transparent)]
    Cluster(#[from] ClusterError),
    #[error(transparent)]
    Controller(#[from] ControllerError),
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
    #[error(transparent)]
    Compile(#[from] CompileError),
    #[error(transparent)]
    Circuit(#[from] CircuitError),
    #[error("schedule does not match pattern: {0}")]
    ScheduleMismatch(String),
    #[error("live frontier reached {live} qubits, bound is {bound}")]
    Frontier { live: usize, bound: usize },
    #[error("thread pool: {0}")]
    Threads(String),
}

impl RuntimeError {
    /// True when the failure is the statevector size bound.
    pub fn is_size_limit(&self) -> bool {
        matches!(
            self,
            RuntimeError::Qsim(QsimError::SizeLimit { .. })
                | RuntimeError::Cluster(ClusterError::Qsim(QsimError::SizeLimit { .. }))
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Full,
    #[default]
    Streamed,
}

/// Pattern together with its cones and schedule.
#[derive(Debug, Clone)]
pub struct Plan {
    pub pattern: CompiledPattern,
    pub cones: ConeSets,
    pub schedule: Schedule,
}

impl Plan {
    pub fn new(pattern: CompiledPattern) -> Result<Self, ScheduleError> {
        let cones = compute_cones(&pattern)?;
        let schedule = build_schedule(&pattern, &cones)?;
        Ok(Plan { pattern, cones, schedule })
    }

    pub fn from_circuit(c: &Circuit) -> Result<Self, RuntimeError> {
        Ok(Plan::new(compile(c)?)?)
    }
}

/// Per-shot checks against the direct-circuit oracle (full mode).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleCheck {
    pub final_fidelity: f64,
    /// Readout bits corrected by the byproduct accumulated before readout.
    pub corrected_readout: String,
    pub oracle_probability: f64,
}

impl OracleCheck {
    pub fn passes(&self, result: &str) -> bool {
        self.final_fidelity >= FIDELITY_THRESHOLD
            && self.corrected_readout == result
            && self.oracle_probability > SUPPORT_EPSILON
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShotRecord {
    pub seed: u64,
    pub shot: u64,
    /// Logical outcomes (filler corrections applied).
    pub outcomes: BTreeMap<SiteId, u8>,
    pub result: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub check: Option<OracleCheck>,
    pub max_live: usize,
    #[serde(skip)]
    pub trace: Vec<TraceLine>,
}

impl ShotRecord {
    pub fn final_fidelity(&self) -> Option<f64> {
        self.check.as_ref().map(|c| c.final_fidelity)
    }
}

/// `result` as a bitstring, qubit 0 first.
pub fn bitstring(bits: &Bits) -> String {
    bits.iter().map(|b| if *b { '1' } else { '0' }).collect()
}

pub fn shot_rng(seed: u64, shot: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(shot);
    rng
}

/// σ_x^{x} σ_z^{z} applied to `psi`, wire `i` on `wires[i]`.
fn apply_pauli(psi: &mut QuantumState, wires: &[SiteId], p: &PauliImage) -> Result<(), QsimError> {
    for (i, w) in wires.iter().enumerate() {
        if p.x(i) {
            psi.apply_unitary1(*w, &gates::pauli_x())?;
        }
        if p.z(i) {
            psi.apply_unitary1(*w, &gates::pauli_z())?;
        }
    }
    Ok(())
}

/// Oracle ψ = U|+…+⟩ plus its readout distribution.
#[derive(Debug, Clone)]
pub struct Oracle {
    pub state: QuantumState,
    pub distribution: BTreeMap<String, f64>,
}

impl Oracle {
    pub fn new(c: &Circuit) -> Result<Self, CircuitError> {
        let state = c.oracle_state()?;
        let distribution = distribution_of(&state, c.qubits);
        Ok(Oracle { state, distribution })
    }

    pub fn probability(&self, bits: &str) -> f64 {
        self.distribution.get(bits).copied().unwrap_or(0.0)
    }
}

fn distribution_of(psi: &QuantumState, n: usize) -> BTreeMap<String, f64> {
    let wires: Vec<SiteId> = (0..n as u32).map(SiteId).collect();
    let amps = psi.amplitudes_in_order(&wires).expect("oracle register");
    amps.iter()
        .enumerate()
        .filter(|(_, a)| a.norm_sqr() > SUPPORT_EPSILON)
        .map(|(i, a)| ((0..n).map(|q| if i >> q & 1 == 1 { '1' } else { '0' }).collect(), a.norm_sqr()))
        .collect()
}

/// Exact σ_z readout distribution of `U|+…+⟩`, bitstrings qubit 0 first.
pub fn oracle_distribution(c: &Circuit) -> Result<BTreeMap<String, f64>, CircuitError> {
    Ok(Oracle::new(c)?.distribution)
}

struct Measured {
    site: SiteId,
    basis: BasisSpec,
    raw: u8,
}

/// Entangles the whole pattern, removes fillers, then measures Q_0 … Q_tmax.
pub fn run_shot_full(
    plan: &Plan,
    seed: u64,
    shot: u64,
    max_qubits: usize,
    oracle: Option<&Oracle>,
    trace: bool,
) -> Result<ShotRecord, RuntimeError> {
    let p = &plan.pattern;
    let sched = &plan.schedule;
    let covered: BTreeSet<SiteId> = sched.rounds.iter().flatten().copied().collect();
    if covered.len() != sched.num_sites() || covered.iter().ne(p.sites.keys()) {
        return Err(RuntimeError::ScheduleMismatch("rounds must partition the sites".into()));
    }
    let graph = p.graph()?;
    let mut psi = make_cluster_state_with_limit(&graph, max_qubits)?;
    let mut rng = shot_rng(seed, shot);
    let fillers = p.filler_set();
    let mut zflip: BTreeMap<SiteId, u8> = BTreeMap::new();
    let mut log = Vec::with_capacity(p.sites.len());
    let mut outcomes = Outcomes::new();
    for &f in &fillers {
        let raw = psi.measure(f, &BasisSpec::Z, rng.random())?;
        log.push(Measured { site: f, basis: BasisSpec::Z, raw });
        outcomes.insert(f, raw);
        if raw == 1 {
            for nb in graph.neighbors(f)? {
                *zflip.entry(*nb).or_default() ^= 1;
            }
        }
    }

    let mut flow = FlowState::init(p);
    let mut lines = Vec::new();
    for (t, round) in sched.rounds.iter().enumerate() {
        let mut got = Outcomes::new();
        for &site in round {
            if fillers.contains(&site) {
                got.insert(site, outcomes[&site]);
                continue;
            }
            let info = &p.sites[&site];
            let basis = if info.adaptive && t > 0 {
                BasisSpec::Planar { angle: flow.adapt_angle(site, p)? }
            } else if info.adaptive {
                BasisSpec::Planar { angle: p.phi_init[&site] }
            } else {
                info.basis
            };
            let raw = psi.measure(site, &basis, rng.random())?;
            log.push(Measured { site, basis, raw });
            let logical = match basis {
                BasisSpec::Planar { .. } => raw ^ zflip.get(&site).copied().unwrap_or(0),
                BasisSpec::Z => raw,
            };
            got.insert(site, logical);
        }
        if t == 0 {
            flow.finish_round0(&got, p, &plan.cones, sched)?;
        } else {
            flow.update(&got, p, sched)?;
        }
        if trace {
            lines.push(flow.trace_line(round, &got));
        }
        outcomes.extend(got);
    }
    let result = bitstring(&flow.result(sched)?);
    let check = match oracle {
        Some(o) => Some(oracle_check(plan, &log, &outcomes, &zflip, o, max_qubits)?),
        None => None,
    };
    Ok(ShotRecord { seed, shot, outcomes, result, check, max_live: p.sites.len(), trace: lines })
}

/// Replays the shot's non-readout projections to recover the residual state on
/// the output sites, then compares it with `B · U|+…+⟩` where `B` is the
/// byproduct accumulated before readout.
fn oracle_check(
    plan: &Plan,
    log: &[Measured],
    outcomes: &Outcomes,
    zflip: &BTreeMap<SiteId, u8>,
    oracle: &Oracle,
    max_qubits: usize,
) -> Result<OracleCheck, RuntimeError> {
    let p = &plan.pattern;
    let mut psi = make_cluster_state_with_limit(&p.graph()?, max_qubits)?;
    for m in log {
        if !p.sites[&m.site].role.is_readout() {
            psi.project(m.site, &m.basis, m.raw)?;
        }
    }
    for out in &p.outputs {
        if zflip.get(out).copied().unwrap_or(0) == 1 {
            psi.apply_unitary1(*out, &gates::pauli_z())?;
        }
    }
    let wires: Vec<SiteId> = (0..p.qubits as u32).map(SiteId).collect();
    let residual = QuantumState::from_amplitudes(&wires, psi.amplitudes_in_order(&p.outputs)?)?;

    let mut byproduct = p.f_init.clone();
    for (k, s) in outcomes {
        let info = &p.sites[k];
        if *s == 1 && !info.role.is_readout() {
            byproduct += &info.image;
        }
    }
    let mut expected = oracle.state.clone();
    apply_pauli(&mut expected, &wires, &byproduct)?;
    let final_fidelity = residual.fidelity(&expected)?;

    let corrected: String = p
        .outputs
        .iter()
        .enumerate()
        .map(|(w, out)| if (outcomes[out] == 1) ^ byproduct.x(w) { '1' } else { '0' })
        .collect();
    let oracle_probability = oracle.probability(&corrected);
    Ok(OracleCheck { final_fidelity, corrected_readout: corrected, oracle_probability })
}

/// Gate-by-gate execution keeping only the live frontier.
pub fn run_shot_streamed(plan: &Plan, seed: u64, shot: u64, trace: bool) -> Result<ShotRecord, RuntimeError> {
    let p = &plan.pattern;
    let bound = p.qubits + 4;
    let mut rng = shot_rng(seed, shot);
    let inputs: Vec<SiteId> = (0..p.qubits)
        .map(|w| {
            p.sites
                .iter()
                .find(|(_, i)| i.wire == w && matches!(i.role, SiteRole::Input | SiteRole::PassThrough))
                .map(|(s, _)| *s)
                .ok_or_else(|| RuntimeError::ScheduleMismatch(format!("wire {w} has no input site")))
        })
        .collect::<Result<_, _>>()?;
    let mut psi = QuantumState::init_plus_with_limit(&inputs, bound)?;
    let mut flow = StreamedFlow::init(p);
    let mut outcomes = Outcomes::new();
    let mut max_live = psi.num_qubits();
    let mut lines = Vec::new();
    for (g, stage) in p.stages.iter().enumerate() {
        for s in &stage.sites {
            if !psi.contains(*s) && !outcomes.contains_key(s) {
                psi.add_plus(*s).map_err(|e| match e {
                    QsimError::SizeLimit { requested, limit } => RuntimeError::Frontier { live: requested, bound: limit },
                    e => e.into(),
                })?;
            }
        }
        max_live = max_live.max(psi.num_qubits());
        for (a, b) in &stage.edges {
            psi.apply_cz(*a, *b)?;
        }
        let mut got = Outcomes::new();
        for &site in &stage.measured {
            let info = &p.sites[&site];
            let basis = if info.adaptive { BasisSpec::Planar { angle: flow.angle(site, p)? } } else { info.basis };
            let s = psi.measure(site, &basis, rng.random())?;
            flow.record(site, s, p, &plan.cones);
            got.insert(site, s);
        }
        if trace {
            lines.push(TraceLine {
                t: g,
                x: flow.info().x_hex(),
                z: flow.info().z_hex(),
                sites: stage.measured.clone(),
                outcomes: stage.measured.iter().map(|s| got[s]).collect(),
            });
        }
        outcomes.extend(got);
    }
    let mut got = Outcomes::new();
    for &out in &p.outputs {
        let s = psi.measure(out, &BasisSpec::Z, rng.random())?;
        flow.record(out, s, p, &plan.cones);
        got.insert(out, s);
    }
    if trace {
        lines.push(TraceLine {
            t: p.stages.len(),
            x: flow.info().x_hex(),
            z: flow.info().z_hex(),
            sites: p.outputs.clone(),
            outcomes: p.outputs.iter().map(|s| got[s]).collect(),
        });
    }
    outcomes.extend(got);
    if max_live > bound {
        return Err(RuntimeError::Frontier { live: max_live, bound });
    }
    Ok(ShotRecord {
        seed,
        shot,
        outcomes,
        result: bitstring(&flow.result()),
        check: None,
        max_live,
        trace: lines,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunConfig {
    pub shots: u64,
    pub seed: u64,
    pub mode: Mode,
    /// Worker threads; `None` uses the global rayon pool.
    pub threads: Option<usize>,
    pub max_qubits: usize,
    pub trace: bool,
    /// Run the per-shot oracle check in full mode.
    pub check: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            shots: 1000,
            seed: 0,
            mode: Mode::Streamed,
            threads: None,
            max_qubits: DEFAULT_MAX_QUBITS,
            trace: false,
            check: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub mode: Mode,
    pub shots: u64,
    pub seed: u64,
    pub qubits: usize,
    pub sites: usize,
    pub t_max: usize,
    pub round_sizes: Vec<usize>,
    pub counts: BTreeMap<String, u64>,
    pub distribution: BTreeMap<String, f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oracle: Option<BTreeMap<String, f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tv_distance: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tv_threshold: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub chi_square_p: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_final_fidelity: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min_final_fidelity: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failed_shots: Option<u64>,
    pub max_live_qubits: usize,
}

pub fn tv_distance(empirical: &BTreeMap<String, f64>, oracle: &BTreeMap<String, f64>) -> f64 {
    let keys: BTreeSet<&String> = empirical.keys().chain(oracle.keys()).collect();
    0.5 * keys
        .into_iter()
        .map(|k| (empirical.get(k).copied().unwrap_or(0.0) - oracle.get(k).copied().unwrap_or(0.0)).abs())
        .sum::<f64>()
}

/// `3·√(k/N)` with `k` the support size.
pub fn tv_threshold(support: usize, shots: u64) -> f64 {
    3.0 * (support as f64 / shots as f64).sqrt()
}

/// Pearson goodness-of-fit p-value over the oracle support. Any count outside
/// the support gives 0.
pub fn chi_square_p(counts: &BTreeMap<String, u64>, oracle: &BTreeMap<String, f64>, shots: u64) -> f64 {
    if counts.keys().any(|k| !oracle.contains_key(k)) {
        return 0.0;
    }
    let stat: f64 = oracle
        .iter()
        .map(|(k, p)| {
            let expected = p * shots as f64;
            let observed = counts.get(k).copied().unwrap_or(0) as f64;
            (observed - expected).powi(2) / expected
        })
        .sum();
    let df = oracle.len().saturating_sub(1);
    if df == 0 {
        return 1.0;
    }
    ChiSquared::new(df as f64).map(|d| d.sf(stat)).unwrap_or(0.0)
}

pub fn run_shots(plan: &Plan, cfg: &RunConfig, oracle: Option<&Oracle>) -> Result<Vec<ShotRecord>, RuntimeError> {
    let one = |shot: u64| match cfg.mode {
        Mode::Full => run_shot_full(plan, cfg.seed, shot, cfg.max_qubits, oracle.filter(|_| cfg.check), cfg.trace),
        Mode::Streamed => run_shot_streamed(plan, cfg.seed, shot, cfg.trace),
    };
    if cfg.mode == Mode::Full {
        // Fail fast on the size bound before spawning work.
        if plan.pattern.num_sites() > cfg.max_qubits {
            return Err(QsimError::SizeLimit { requested: plan.pattern.num_sites(), limit: cfg.max_qubits }.into());
        }
    }
    let work = || (0..cfg.shots).into_par_iter().map(one).collect::<Result<Vec<_>, _>>();
    match cfg.threads {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| RuntimeError::Threads(e.to_string()))?
            .install(work),
        None => work(),
    }
}

pub fn summarize(plan: &Plan, cfg: &RunConfig, records: &[ShotRecord], oracle: Option<&Oracle>) -> Summary {
    let mut counts: BTreeMap<String, u64> = BTreeMap::new();
    for r in records {
        *counts.entry(r.result.clone()).or_default() += 1;
    }
    let shots = records.len() as u64;
    let distribution: BTreeMap<String, f64> =
        counts.iter().map(|(k, c)| (k.clone(), *c as f64 / shots.max(1) as f64)).collect();
    let fidelities: Vec<f64> = records.iter().filter_map(ShotRecord::final_fidelity).collect();
    let (mean, min) = if fidelities.is_empty() {
        (None, None)
    } else {
        (
            Some(fidelities.iter().sum::<f64>() / fidelities.len() as f64),
            Some(fidelities.iter().copied().fold(f64::INFINITY, f64::min)),
        )
    };
    let failed = if cfg.mode == Mode::Full && oracle.is_some() && cfg.check {
        Some(records.iter().filter(|r| !r.check.as_ref().is_some_and(|c| c.passes(&r.result))).count() as u64)
    } else {
        None
    };
    Summary {
        mode: cfg.mode,
        shots,
        seed: cfg.seed,
        qubits: plan.pattern.qubits,
        sites: plan.pattern.num_sites(),
        t_max: plan.schedule.t_max(),
        round_sizes: plan.schedule.round_sizes(),
        tv_distance: oracle.map(|o| tv_distance(&distribution, &o.distribution)),
        tv_threshold: oracle.map(|o| tv_threshold(o.distribution.len(), shots.max(1))),
        chi_square_p: oracle.map(|o| chi_square_p(&counts, &o.distribution, shots)),
        oracle: oracle.map(|o| o.distribution.clone()),
        counts,
        distribution,
        mean_final_fidelity: mean,
        min_final_fidelity: min,
        failed_shots: failed,
        max_live_qubits: records.iter().map(|r| r.max_live).max().unwrap_or(0),
    }
}

/// Runs a planned pattern and compares with the oracle when the register is
/// small enough for it.
pub fn run_plan(plan: &Plan, cfg: &RunConfig) -> Result<(Summary, Vec<ShotRecord>), RuntimeError> {
    let oracle = match Oracle::new(&plan.pattern.circuit) {
        Ok(o) => Some(o),
        Err(CircuitError::OracleLimit { .. }) => None,
        Err(e) => return Err(e.into()),
    };
    let records = run_shots(plan, cfg, oracle.as_ref())?;
    Ok((summarize(plan, cfg, &records, oracle.as_ref()), records))
}

pub fn run_experiment(c: &Circuit, cfg: &RunConfig) -> Result<Summary, RuntimeError> {
    Ok(run_plan(&Plan::from_circuit(c)?, cfg)?.0)
}
