//! Classical side-processing: the information flow vector I(t), adapted
//! measurement angles and the final readout.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;
use thiserror::Error;

use crate::compiler::CompiledPattern;
use crate::pauli::{Bits, PauliImage};
use crate::scheduler::{ConeSets, Schedule};
use crate::qsim::SiteId;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ControllerError {
    #[error("round {round}: no outcome for {site}")]
    MissingOutcome { round: usize, site: SiteId },
    #[error("round {round}: {site} is not scheduled in this round")]
    UnexpectedSite { round: usize, site: SiteId },
    #[error("round 0 has already been processed")]
    Round0Done,
    #[error("round 0 has not been processed yet")]
    Round0Pending,
    #[error("all {0} rounds already consumed")]
    Exhausted(usize),
    #[error("{0} has no adaptive angle")]
    NotAdaptive(SiteId),
    #[error("result requested after round {done} of {t_max}")]
    Early { done: usize, t_max: usize },
}

pub type Outcomes = BTreeMap<SiteId, u8>;

/// One JSON line of a per-shot trace.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TraceLine {
    pub t: usize,
    pub x: String,
    pub z: String,
    pub sites: Vec<SiteId>,
    pub outcomes: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowState {
    info: PauliImage,
    /// Last completed round; `None` before round 0.
    t: Option<usize>,
    phi_prime: BTreeMap<SiteId, f64>,
}

fn check_round(round: usize, expected: &[SiteId], outcomes: &Outcomes) -> Result<(), ControllerError> {
    let want: BTreeSet<&SiteId> = expected.iter().collect();
    if let Some(site) = outcomes.keys().find(|s| !want.contains(s)) {
        return Err(ControllerError::UnexpectedSite { round, site: *site });
    }
    if let Some(site) = expected.iter().find(|s| !outcomes.contains_key(s)) {
        return Err(ControllerError::MissingOutcome { round, site: *site });
    }
    Ok(())
}

impl FlowState {
    /// I = F_init.
    pub fn init(p: &CompiledPattern) -> Self {
        FlowState { info: p.f_init.clone(), t: None, phi_prime: BTreeMap::new() }
    }

    pub fn info(&self) -> &PauliImage {
        &self.info
    }

    pub fn rounds_done(&self) -> Option<usize> {
        self.t
    }

    pub fn phi_prime(&self) -> &BTreeMap<SiteId, f64> {
        &self.phi_prime
    }

    fn accumulate(&mut self, p: &CompiledPattern, outcomes: &Outcomes) {
        for (k, s) in outcomes {
            if *s == 1 {
                self.info += &p.sites[k].image;
            }
        }
    }

    /// Folds in Q_0 and fixes φ′ for every adaptive site. The Q_0 outcomes are
    /// not kept.
    pub fn finish_round0(
        &mut self,
        outcomes: &Outcomes,
        p: &CompiledPattern,
        cones: &ConeSets,
        schedule: &Schedule,
    ) -> Result<(), ControllerError> {
        if self.t.is_some() {
            return Err(ControllerError::Round0Done);
        }
        check_round(0, &schedule.rounds[0], outcomes)?;
        self.accumulate(p, outcomes);
        let mut eta: BTreeMap<SiteId, u8> = BTreeMap::new();
        for (k, s) in outcomes {
            if *s == 1 {
                for j in cones.forward(*k) {
                    *eta.entry(j).or_default() ^= 1;
                }
            }
        }
        self.phi_prime = p
            .phi_init
            .iter()
            .map(|(j, phi)| {
                let flip = eta.get(j).copied().unwrap_or(0) ^ self.sign_bit(p, *j);
                (*j, if flip == 1 { -phi } else { *phi })
            })
            .collect();
        self.t = Some(0);
        Ok(())
    }

    fn sign_bit(&self, p: &CompiledPattern, j: SiteId) -> u8 {
        self.info.symplectic(&p.sites[&j].image).expect("register sizes agree")
    }

    /// φ_meas = φ′ · (−1)^{(I, F_j)}.
    pub fn adapt_angle(&self, j: SiteId, p: &CompiledPattern) -> Result<f64, ControllerError> {
        if self.t.is_none() {
            return Err(ControllerError::Round0Pending);
        }
        let phi = *self.phi_prime.get(&j).ok_or(ControllerError::NotAdaptive(j))?;
        Ok(if self.sign_bit(p, j) == 1 { -phi } else { phi })
    }

    /// Folds in the next round Q_t, t ≥ 1.
    pub fn update(&mut self, outcomes: &Outcomes, p: &CompiledPattern, schedule: &Schedule) -> Result<(), ControllerError> {
        let done = self.t.ok_or(ControllerError::Round0Pending)?;
        let round = done + 1;
        if round > schedule.t_max() {
            return Err(ControllerError::Exhausted(schedule.rounds.len()));
        }
        check_round(round, &schedule.rounds[round], outcomes)?;
        self.accumulate(p, outcomes);
        self.t = Some(round);
        Ok(())
    }

    /// x-part of I(t_max).
    pub fn result(&self, schedule: &Schedule) -> Result<Bits, ControllerError> {
        match self.t {
            Some(t) if t == schedule.t_max() => Ok(self.info.x_part().to_bitvec()),
            Some(t) => Err(ControllerError::Early { done: t, t_max: schedule.t_max() }),
            None => Err(ControllerError::Round0Pending),
        }
    }

    pub fn trace_line(&self, sites: &[SiteId], outcomes: &Outcomes) -> TraceLine {
        TraceLine {
            t: self.t.unwrap_or(0),
            x: self.info.x_hex(),
            z: self.info.z_hex(),
            sites: sites.to_vec(),
            outcomes: sites.iter().map(|s| outcomes.get(s).copied().unwrap_or(0)).collect(),
        }
    }
}

/// Outcome-by-outcome bookkeeping in network order: each angle's sign is the
/// parity of the outcomes whose forward cone contains it.
#[derive(Debug, Clone, PartialEq)]
pub struct StreamedFlow {
    info: PauliImage,
    flips: BTreeMap<SiteId, u8>,
}

impl StreamedFlow {
    pub fn init(p: &CompiledPattern) -> Self {
        StreamedFlow { info: p.f_init.clone(), flips: BTreeMap::new() }
    }

    pub fn angle(&self, j: SiteId, p: &CompiledPattern) -> Result<f64, ControllerError> {
        let phi = *p.phi_init.get(&j).ok_or(ControllerError::NotAdaptive(j))?;
        Ok(if self.flips.get(&j).copied().unwrap_or(0) == 1 { -phi } else { phi })
    }

    pub fn record(&mut self, k: SiteId, s: u8, p: &CompiledPattern, cones: &ConeSets) {
        if s == 1 {
            self.info += &p.sites[&k].image;
            for j in cones.forward(k) {
                *self.flips.entry(j).or_default() ^= 1;
            }
        }
    }

    pub fn info(&self) -> &PauliImage {
        &self.info
    }

    pub fn result(&self) -> Bits {
        self.info.x_part().to_bitvec()
    }
}
