//! Forward/backward cones, the measurement order ≺ and its round partition.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::compiler::{downstream_maps, CompiledPattern, SiteRole};
use crate::pauli::{PauliError, PauliImage, PropagationMap};
use crate::qsim::SiteId;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScheduleError {
    #[error("measurement order has a cycle through {0:?}")]
    Cycle(Vec<SiteId>),
    #[error("cone refers to unknown site {0}")]
    UnknownSite(SiteId),
    #[error(transparent)]
    Pauli(#[from] PauliError),
}

pub type Cones = BTreeMap<SiteId, BTreeSet<SiteId>>;

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ConeSets {
    pub fc: Cones,
    pub bc: Cones,
}

impl ConeSets {
    pub fn forward(&self, k: SiteId) -> impl Iterator<Item = SiteId> + '_ {
        self.fc.get(&k).into_iter().flatten().copied()
    }

    pub fn in_forward(&self, k: SiteId, j: SiteId) -> bool {
        self.fc.get(&k).is_some_and(|s| s.contains(&j))
    }

    pub fn in_backward(&self, k: SiteId, j: SiteId) -> bool {
        self.bc.get(&k).is_some_and(|s| s.contains(&j))
    }
}

fn triggered_sites(p: &CompiledPattern, first_stage: usize, map: &PropagationMap, img: &PauliImage) -> Vec<SiteId> {
    map.triggered(img)
        .into_iter()
        .filter_map(|(rel, slot)| p.site_for_slot(first_stage + rel, slot))
        .collect()
}

pub fn compute_cones(p: &CompiledPattern) -> Result<ConeSets, ScheduleError> {
    let n = p.qubits;
    let maps = p.stage_maps()?;
    let downstream = downstream_maps(n, &maps)?;
    let inverses: Vec<PropagationMap> = maps.iter().map(PropagationMap::inverse).collect();
    let mut cones = ConeSets::default();

    let backward_from = |start: usize, mut img: PauliImage, out: &mut BTreeSet<SiteId>| {
        // `img` sits at the output of stage `start - 1`.
        for h in (0..start).rev() {
            out.extend(triggered_sites(p, h, &maps[h], &img));
            img = inverses[h].apply(&img);
        }
    };

    for (&k, info) in &p.sites {
        let mut fc = BTreeSet::new();
        let mut bc = BTreeSet::new();
        match info.role {
            SiteRole::Filler => {}
            SiteRole::Output | SiteRole::PassThrough => {
                backward_from(p.stages.len(), info.local.clone(), &mut bc);
            }
            SiteRole::Input | SiteRole::Interior => {
                let g = info.stage.expect("measured site belongs to a stage");
                for &j in &p.stages[g].measured {
                    let other = &p.sites[&j];
                    if other.adaptive && other.depends.contains(&k) {
                        fc.insert(j);
                    }
                }
                fc.extend(triggered_sites(p, g + 1, &downstream[g], &info.local));
                bc.extend(info.depends.iter().copied().filter(|j| p.sites[j].adaptive));
                backward_from(g, inverses[g].apply(&info.local), &mut bc);
            }
        }
        cones.fc.insert(k, fc);
        cones.bc.insert(k, bc);
    }
    Ok(cones)
}

/// `(F_j, F_k)_S`, meaningful for adaptive `j`.
pub fn cone_test(p: &CompiledPattern, j: SiteId, k: SiteId) -> u8 {
    p.sites[&j].image.symplectic(&p.sites[&k].image).expect("images share the register size")
}

/// Ordered partition Q_0 … Q_tmax.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Schedule {
    pub rounds: Vec<Vec<SiteId>>,
}

impl Schedule {
    pub fn t_max(&self) -> usize {
        self.rounds.len().saturating_sub(1)
    }

    pub fn round_sizes(&self) -> Vec<usize> {
        self.rounds.iter().map(Vec::len).collect()
    }

    pub fn round_of(&self) -> BTreeMap<SiteId, usize> {
        self.rounds
            .iter()
            .enumerate()
            .flat_map(|(t, r)| r.iter().map(move |s| (*s, t)))
            .collect()
    }

    pub fn num_sites(&self) -> usize {
        self.rounds.iter().map(Vec::len).sum()
    }
}

/// Strict order generated by `j ∈ fc(k) ⇒ k ≺ j`: `result[k]` is every site
/// after `k`. Fails on cycles.
pub fn precedence_closure(sites: &BTreeSet<SiteId>, cones: &ConeSets) -> Result<Cones, ScheduleError> {
    let order = topological_order(sites, cones)?;
    let mut closure: Cones = sites.iter().map(|s| (*s, BTreeSet::new())).collect();
    for &k in order.iter().rev() {
        let mut after = BTreeSet::new();
        for j in cones.forward(k) {
            after.insert(j);
            after.extend(closure[&j].iter().copied());
        }
        closure.insert(k, after);
    }
    Ok(closure)
}

fn topological_order(sites: &BTreeSet<SiteId>, cones: &ConeSets) -> Result<Vec<SiteId>, ScheduleError> {
    let mut indegree: BTreeMap<SiteId, usize> = sites.iter().map(|s| (*s, 0)).collect();
    for &k in sites {
        for j in cones.forward(k) {
            *indegree.get_mut(&j).ok_or(ScheduleError::UnknownSite(j))? += 1;
        }
    }
    let mut ready: BTreeSet<SiteId> = indegree.iter().filter(|(_, d)| **d == 0).map(|(s, _)| *s).collect();
    let mut order = Vec::with_capacity(sites.len());
    while let Some(k) = ready.pop_first() {
        order.push(k);
        for j in cones.forward(k) {
            let d = indegree.get_mut(&j).unwrap();
            *d -= 1;
            if *d == 0 {
                ready.insert(j);
            }
        }
    }
    if order.len() != sites.len() {
        let stuck = indegree.into_iter().filter(|(_, d)| *d > 0).map(|(s, _)| s).collect();
        return Err(ScheduleError::Cycle(stuck));
    }
    Ok(order)
}

/// Q_t = minimal elements of what is left after Q_0 … Q_{t−1}.
pub fn build_schedule(p: &CompiledPattern, cones: &ConeSets) -> Result<Schedule, ScheduleError> {
    let sites: BTreeSet<SiteId> = p.sites.keys().copied().collect();
    for k in cones.fc.keys() {
        if !sites.contains(k) {
            return Err(ScheduleError::UnknownSite(*k));
        }
    }
    let closure = precedence_closure(&sites, cones)?;
    let mut remaining = sites;
    let mut rounds = Vec::new();
    while !remaining.is_empty() {
        let blocked: BTreeSet<SiteId> =
            remaining.iter().flat_map(|k| closure[k].iter().copied()).collect();
        let round: Vec<SiteId> = remaining.iter().copied().filter(|s| !blocked.contains(s)).collect();
        for s in &round {
            remaining.remove(s);
        }
        rounds.push(round);
    }
    if rounds.is_empty() {
        rounds.push(Vec::new());
    }
    Ok(Schedule { rounds })
}

/// Compute cones and schedule in one go.
pub fn schedule(p: &CompiledPattern) -> Result<(ConeSets, Schedule), ScheduleError> {
    let cones = compute_cones(p)?;
    let s = build_schedule(p, &cones)?;
    Ok((cones, s))
}
