//! Record generation by bounded two-hop cascades, and occlusion of a target
//! person to plant a latent node in the records.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::ExecMode;
use crate::network::{PersonId, SocialNetwork};
use crate::records::{Basket, RecordSet};

/// Independent RNG for work item `stream` under `seed`.
///
/// ChaCha streams are independent, so the generator for item `i` depends only
/// on `(seed, i)` and never on execution order.
pub fn child_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// A 64-bit seed derived from `(seed, stream)`.
pub fn child_seed(seed: u64, stream: u64) -> u64 {
    child_rng(seed, stream).next_u64()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    /// Per-link transmission probability.
    pub t: f64,
    pub basket_count: usize,
    pub rng_seed: u64,
}

impl SimulationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.t) {
            return Err(Error::invalid("t", format!("{} is not in [0, 1]", self.t)));
        }
        if self.basket_count == 0 {
            return Err(Error::invalid("basket_count", "must be positive"));
        }
        Ok(())
    }
}

/// One diffusion event, kept with its transmission chain.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Cascade {
    pub initiator: PersonId,
    pub hop1: Vec<PersonId>,
    /// Hop-2 persons with the hop-1 member that reached them.
    pub hop2: Vec<(PersonId, PersonId)>,
}

impl Cascade {
    pub fn basket(&self) -> Basket {
        let members = std::iter::once(self.initiator.clone())
            .chain(self.hop1.iter().cloned())
            .chain(self.hop2.iter().map(|(p, _)| p.clone()));
        Basket::new(members).expect("initiator is always a member")
    }
}

fn cascade(net: &SocialNetwork, t: f64, rng: &mut impl Rng) -> Cascade {
    let n = net.len();
    let initiator = rng.random_range(0..n);
    let mut included = vec![false; n];
    included[initiator] = true;

    let mut hop1 = Vec::new();
    for &v in net.neighbors(initiator) {
        if rng.random::<f64>() < t {
            included[v] = true;
            hop1.push(v);
        }
    }
    let mut hop2 = Vec::new();
    for &u in &hop1 {
        for &v in net.neighbors(u) {
            if !included[v] && rng.random::<f64>() < t {
                included[v] = true;
                hop2.push((v, u));
            }
        }
    }
    let id = |i: usize| net.person(i).id.clone();
    Cascade {
        initiator: id(initiator),
        hop1: hop1.into_iter().map(id).collect(),
        hop2: hop2.into_iter().map(|(v, u)| (id(v), id(u))).collect(),
    }
}

/// Runs `cfg.basket_count` cascades; cascade `i` draws from `child_rng(seed, i)`.
pub fn generate_cascades(
    net: &SocialNetwork,
    cfg: &SimulationConfig,
    mode: ExecMode,
) -> Result<Vec<Cascade>> {
    cfg.validate()?;
    if net.is_empty() {
        return Err(Error::EmptyNetwork);
    }
    Ok(mode.map_indexed(cfg.basket_count, |i| {
        cascade(net, cfg.t, &mut child_rng(cfg.rng_seed, i as u64))
    }))
}

/// Generates co-occurrence records by depth-2 independent cascades.
pub fn generate_records(net: &SocialNetwork, cfg: &SimulationConfig) -> Result<RecordSet> {
    generate_records_with(net, cfg, ExecMode::default())
}

pub fn generate_records_with(
    net: &SocialNetwork,
    cfg: &SimulationConfig,
    mode: ExecMode,
) -> Result<RecordSet> {
    Ok(generate_cascades(net, cfg, mode)?
        .iter()
        .map(Cascade::basket)
        .collect())
}

/// Records with one person deleted, plus the ground truth of which records changed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OcclusionResult {
    pub occluded: RecordSet,
    /// `altered[i]` is true iff surviving basket `i` lost the target.
    pub altered: Vec<bool>,
    pub target: PersonId,
    /// Original indices of baskets that held only the target and were dropped.
    pub emptied: Vec<usize>,
}

impl OcclusionResult {
    /// Number of relevant records, including dropped ones.
    pub fn relevant_total(&self) -> usize {
        self.altered.iter().filter(|&&a| a).count() + self.emptied.len()
    }
}

/// Deletes `target` from every basket. Idempotent; never fails.
pub fn remove_person(records: &RecordSet, target: &PersonId) -> OcclusionResult {
    let mut kept = Vec::with_capacity(records.len());
    let mut altered = Vec::with_capacity(records.len());
    let mut emptied = Vec::new();
    for (i, b) in records.iter().enumerate() {
        if !b.contains(target) {
            kept.push(b.clone());
            altered.push(false);
            continue;
        }
        match b.without(target) {
            Some(rest) => {
                kept.push(rest);
                altered.push(true);
            }
            None => emptied.push(i),
        }
    }
    OcclusionResult {
        occluded: RecordSet::new(kept),
        altered,
        target: target.clone(),
        emptied,
    }
}

/// Configures `target` as a latent person by deleting it from the records.
pub fn occlude(records: &RecordSet, target: &PersonId) -> Result<OcclusionResult> {
    if !records.iter().any(|b| b.contains(target)) {
        return Err(Error::TargetAbsent {
            target: target.to_string(),
        });
    }
    Ok(remove_person(records, target))
}
