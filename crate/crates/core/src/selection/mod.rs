//! Warm-starting sequential selection.
//!
//! A round of sequential reallocation is one [`WsspInstance`]: `b` resources
//! start on the *preselection* and candidates arrive one at a time. Each
//! decision is immediate and irrevocable, and accepting a candidate withdraws
//! the resource of the weakest remaining preselected entry; accepted
//! candidates keep theirs, so a round has at most `b` acceptances.
//! Preselected entries that have
//! recovered (or idle resources) count as free slots: they are displaced
//! first and never enter a threshold.
//!
//! Strategies:
//! - offline: top-`b` of preselection and candidates, order ignored;
//! - CCM: reject a learning phase of `c` candidates, then accept anything
//!   strictly above the `b`-th best score seen so far (preselection
//!   included);
//! - CCM*: CCM with the cutoff read from a [`CutoffTable`];
//! - hiring above the mean / median of the current holders.

mod cutoff;
mod enumerate;

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::NodeId;
use crate::scoring::priority_order;
use crate::stats;

pub use cutoff::{
    compute_cutoff_table, q_bucket, rank_cost, CutoffEstimate, CutoffTable, CUTOFF_CSV_HEADER,
};
pub use enumerate::{exact_expected_cost, for_each_permutation, MAX_ENUMERATED_CANDIDATES};

/// Lower/upper margin keeping the quality strictly inside (0, 1).
pub const QUALITY_EPS: f64 = 1e-3;
/// Quality estimate before the first round.
pub const INITIAL_PHI: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PreselectedEntry {
    /// `None` for a resource that is not attached to any node.
    pub node: Option<NodeId>,
    pub score: f64,
    pub still_infected: bool,
}

impl PreselectedEntry {
    pub fn live(node: NodeId, score: f64) -> Self {
        PreselectedEntry { node: Some(node), score, still_infected: true }
    }

    pub fn recovered(node: NodeId) -> Self {
        PreselectedEntry { node: Some(node), score: f64::NEG_INFINITY, still_infected: false }
    }

    pub fn idle() -> Self {
        PreselectedEntry { node: None, score: f64::NEG_INFINITY, still_infected: false }
    }

    /// Score competing for the resource, `None` when the slot is free.
    pub fn live_score(&self) -> Option<f64> {
        (self.still_infected && self.node.is_some()).then_some(self.score)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub node: NodeId,
    pub score: f64,
}

/// One round's selection problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WsspInstance {
    pub b: usize,
    pub preselection: Vec<PreselectedEntry>,
    /// In arrival order.
    pub candidates: Vec<Candidate>,
}

impl WsspInstance {
    pub fn new(
        b: usize,
        preselection: Vec<PreselectedEntry>,
        candidates: Vec<Candidate>,
    ) -> Result<Self> {
        let inst = WsspInstance { b, preselection, candidates };
        inst.validate()?;
        Ok(inst)
    }

    /// Synthetic instance from bare scores: preselection ids `0..b`,
    /// candidate ids `b..b + n`.
    pub fn from_scores(preselection: &[f64], candidates: &[f64]) -> Result<Self> {
        let b = preselection.len();
        WsspInstance::new(
            b,
            preselection
                .iter()
                .enumerate()
                .map(|(i, &s)| PreselectedEntry::live(i, s))
                .collect(),
            candidates
                .iter()
                .enumerate()
                .map(|(j, &s)| Candidate { node: b + j, score: s })
                .collect(),
        )
    }

    pub fn n(&self) -> usize {
        self.candidates.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.preselection.len() != self.b {
            return Err(Error::param(format!(
                "preselection has {} entries, budget is {}",
                self.preselection.len(),
                self.b
            )));
        }
        let mut seen = HashSet::new();
        for e in &self.preselection {
            if let Some(node) = e.node {
                if !seen.insert(node) {
                    return Err(Error::param(format!("node {node} preselected twice")));
                }
            }
            if e.live_score().is_some_and(|s| !s.is_finite()) {
                return Err(Error::param(format!("non-finite preselection score {}", e.score)));
            }
        }
        for c in &self.candidates {
            if !seen.insert(c.node) {
                return Err(Error::param(format!(
                    "candidate {} repeats or overlaps the preselection",
                    c.node
                )));
            }
            if !c.score.is_finite() {
                return Err(Error::param(format!("non-finite candidate score {}", c.score)));
            }
        }
        Ok(())
    }

    pub fn n_live(&self) -> usize {
        self.preselection.iter().filter(|e| e.live_score().is_some()).count()
    }

    /// Items competing for resources: live preselected entries and all
    /// candidates, each with its `(score, node)` key.
    fn pool(&self) -> Vec<(Holder, f64, NodeId)> {
        let pre = self.preselection.iter().enumerate().filter_map(|(i, e)| {
            e.live_score().map(|s| (Holder::Preselected(i), s, e.node.unwrap_or(usize::MAX)))
        });
        let cand = self
            .candidates
            .iter()
            .enumerate()
            .map(|(j, c)| (Holder::Candidate(j), c.score, c.node));
        pre.chain(cand).collect()
    }

    /// Offline optimum: the best `min(b, pool)` items, best first.
    pub fn offline_top(&self) -> Vec<Holder> {
        let mut pool = self.pool();
        pool.sort_by(|a, b| priority_order((a.1, a.2), (b.1, b.2)));
        pool.truncate(self.b);
        pool.into_iter().map(|(h, _, _)| h).collect()
    }

    /// Score of a holder, `None` for a free slot.
    pub fn holder_score(&self, h: Holder) -> Option<f64> {
        match h {
            Holder::Preselected(i) => self.preselection[i].live_score(),
            Holder::Candidate(j) => Some(self.candidates[j].score),
        }
    }

    pub fn holder_node(&self, h: Holder) -> Option<NodeId> {
        match h {
            Holder::Preselected(i) => self.preselection[i].node,
            Holder::Candidate(j) => Some(self.candidates[j].node),
        }
    }
}

/// Who holds a resource: an index into the preselection or the candidates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Holder {
    Preselected(usize),
    Candidate(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Displacement {
    pub candidate: usize,
    pub displaced: Holder,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTrace {
    /// Decision per candidate, in arrival order.
    pub accept: Vec<bool>,
    pub displaced: Vec<Displacement>,
    /// Free resources handed to trailing candidates once the sequence ended.
    pub leftover: Vec<Displacement>,
    /// Resource holders at the end, one per slot. A `Preselected` holder
    /// whose entry is not live is a resource left unused.
    pub final_allocation: Vec<Holder>,
    /// Acceptance threshold in force when each candidate was examined.
    pub thresholds: Vec<f64>,
    pub cutoff: usize,
}

impl DecisionTrace {
    /// Holders that are live infected nodes.
    pub fn filled<'a>(&'a self, inst: &'a WsspInstance) -> impl Iterator<Item = Holder> + 'a {
        self.final_allocation
            .iter()
            .copied()
            .filter(|&h| inst.holder_score(h).is_some())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyKind {
    Offline,
    Ccm,
    CcmStar,
    MeanThreshold,
    MedianThreshold,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StrategySpec {
    pub kind: StrategyKind,
    /// Learning-phase length for CCM; CCM* fills it from a cutoff table.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cutoff: Option<usize>,
    /// Preselection quality for CCM*; the control loop chains its own.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quality: Option<f64>,
}

impl StrategySpec {
    pub fn new(kind: StrategyKind) -> Self {
        StrategySpec { kind, cutoff: None, quality: None }
    }

    pub fn offline() -> Self {
        Self::new(StrategyKind::Offline)
    }

    pub fn ccm(cutoff: usize) -> Self {
        StrategySpec { cutoff: Some(cutoff), ..Self::new(StrategyKind::Ccm) }
    }

    pub fn ccm_star() -> Self {
        Self::new(StrategyKind::CcmStar)
    }

    pub fn mean() -> Self {
        Self::new(StrategyKind::MeanThreshold)
    }

    pub fn median() -> Self {
        Self::new(StrategyKind::MedianThreshold)
    }

    pub fn with_cutoff(self, cutoff: usize) -> Self {
        StrategySpec { cutoff: Some(cutoff), ..self }
    }

    /// Learning-phase length on `n` candidates.
    pub fn resolved_cutoff(&self, n: usize) -> usize {
        match self.kind {
            StrategyKind::Offline | StrategyKind::MeanThreshold | StrategyKind::MedianThreshold => 0,
            StrategyKind::Ccm | StrategyKind::CcmStar => {
                self.cutoff.unwrap_or_else(|| fallback_cutoff(n))
            }
        }
    }

    pub fn label(&self) -> String {
        match (self.kind, self.cutoff) {
            (StrategyKind::Offline, _) => "offline".into(),
            (StrategyKind::Ccm, Some(c)) => format!("ccm_c{c}"),
            (StrategyKind::Ccm, None) => "ccm_sqrt".into(),
            (StrategyKind::CcmStar, _) => "ccm_star".into(),
            (StrategyKind::MeanThreshold, _) => "mean".into(),
            (StrategyKind::MedianThreshold, _) => "median".into(),
        }
    }
}

/// `round(sqrt(n)) - 1`, clamped to `[0, n - 1]`.
pub fn fallback_cutoff(n: usize) -> usize {
    if n == 0 {
        return 0;
    }
    ((n as f64).sqrt().round() as usize).saturating_sub(1).min(n - 1)
}

/// Preselection slot that loses its resource to the next acceptance: free
/// slots first, then the lowest score, then the highest node id. Accepted
/// candidates keep their resource, so `None` once every preselected
/// resource has been withdrawn.
fn weakest_slot(inst: &WsspInstance, holders: &[Holder]) -> Option<usize> {
    let preselected = || {
        holders
            .iter()
            .enumerate()
            .filter(|(_, h)| matches!(h, Holder::Preselected(_)))
    };
    if let Some((free, _)) = preselected().find(|(_, &h)| inst.holder_score(h).is_none()) {
        return Some(free);
    }
    let key = |h: Holder| {
        (
            inst.holder_score(h).unwrap_or(f64::NEG_INFINITY),
            inst.holder_node(h).unwrap_or(usize::MAX),
        )
    };
    let mut worst: Option<usize> = None;
    for (slot, &h) in preselected() {
        worst = match worst {
            None => Some(slot),
            Some(w) if priority_order(key(h), key(holders[w])).is_gt() => Some(slot),
            keep => keep,
        };
    }
    worst
}

/// Running `b`-th largest value; missing values count as `-inf`.
struct TopB {
    b: usize,
    values: Vec<f64>,
}

impl TopB {
    fn new(b: usize) -> Self {
        TopB { b, values: Vec::with_capacity(b + 1) }
    }

    fn push(&mut self, v: f64) {
        if self.b == 0 {
            return;
        }
        let pos = self.values.partition_point(|&x| x >= v);
        if pos < self.b {
            self.values.insert(pos, v);
            self.values.truncate(self.b);
        }
    }

    fn threshold(&self) -> f64 {
        if self.b == 0 {
            return f64::INFINITY;
        }
        if self.values.len() < self.b {
            f64::NEG_INFINITY
        } else {
            self.values[self.b - 1]
        }
    }
}

fn live_holder_scores(inst: &WsspInstance, holders: &[Holder]) -> Vec<f64> {
    holders.iter().filter_map(|&h| inst.holder_score(h)).collect()
}

fn median(mut xs: Vec<f64>) -> f64 {
    if xs.is_empty() {
        return f64::NEG_INFINITY;
    }
    xs.sort_by(f64::total_cmp);
    let m = xs.len() / 2;
    if xs.len() % 2 == 1 {
        xs[m]
    } else {
        0.5 * (xs[m - 1] + xs[m])
    }
}

/// Runs `spec` over the candidates of `inst` in arrival order.
pub fn run_strategy(inst: &WsspInstance, spec: &StrategySpec) -> Result<DecisionTrace> {
    inst.validate()?;
    let n = inst.n();
    let cutoff = spec.resolved_cutoff(n);
    if cutoff > n {
        return Err(Error::param(format!("cutoff {cutoff} exceeds {n} candidates")));
    }
    if spec.kind == StrategyKind::Offline {
        return Ok(run_offline(inst));
    }

    let mut holders: Vec<Holder> = (0..inst.b).map(Holder::Preselected).collect();
    let mut accept = vec![false; n];
    let mut displaced = Vec::new();
    let mut thresholds = Vec::with_capacity(n);

    let mut seen = TopB::new(inst.b);
    for e in &inst.preselection {
        if let Some(s) = e.live_score() {
            seen.push(s);
        }
    }

    for (j, cand) in inst.candidates.iter().enumerate() {
        let threshold = match spec.kind {
            StrategyKind::Ccm | StrategyKind::CcmStar => seen.threshold(),
            StrategyKind::MeanThreshold => {
                let live = live_holder_scores(inst, &holders);
                if live.is_empty() {
                    f64::NEG_INFINITY
                } else {
                    stats::mean(&live)
                }
            }
            StrategyKind::MedianThreshold => median(live_holder_scores(inst, &holders)),
            StrategyKind::Offline => unreachable!(),
        };
        thresholds.push(threshold);
        if j >= cutoff && cand.score > threshold {
            if let Some(slot) = weakest_slot(inst, &holders) {
                displaced.push(Displacement { candidate: j, displaced: holders[slot] });
                holders[slot] = Holder::Candidate(j);
                accept[j] = true;
            }
        }
        seen.push(cand.score);
    }

    // Unused resources go to the last candidates that do not hold one.
    let mut leftover = Vec::new();
    let mut trailing = (0..n).rev().filter(|&j| !accept[j]);
    for slot in holders.iter_mut() {
        if inst.holder_score(*slot).is_none() {
            let Some(j) = trailing.next() else { break };
            leftover.push(Displacement { candidate: j, displaced: *slot });
            *slot = Holder::Candidate(j);
        }
    }

    Ok(DecisionTrace {
        accept,
        displaced,
        leftover,
        final_allocation: holders,
        thresholds,
        cutoff,
    })
}

fn run_offline(inst: &WsspInstance) -> DecisionTrace {
    let top = inst.offline_top();
    let n = inst.n();
    let mut accept = vec![false; n];
    let mut holders: Vec<Holder> = (0..inst.b).map(Holder::Preselected).collect();
    let incoming: Vec<usize> = top
        .iter()
        .filter_map(|h| match *h {
            Holder::Candidate(j) => Some(j),
            Holder::Preselected(_) => None,
        })
        .collect();
    let losing: Vec<usize> = (0..inst.b)
        .filter(|&i| !top.contains(&Holder::Preselected(i)))
        .collect();
    let mut displaced = Vec::new();
    // Free slots are handed out before live holders are displaced.
    let mut losing = losing;
    losing.sort_by_key(|&i| inst.preselection[i].live_score().is_some());
    for (&j, &slot) in incoming.iter().zip(&losing) {
        displaced.push(Displacement { candidate: j, displaced: Holder::Preselected(slot) });
        holders[slot] = Holder::Candidate(j);
        accept[j] = true;
    }
    DecisionTrace {
        accept,
        displaced,
        leftover: Vec::new(),
        final_allocation: holders,
        thresholds: vec![f64::NAN; n],
        cutoff: 0,
    }
}

/// Regret of the final allocation against the best feasible one:
/// best total score of `min(b, pool)` items minus the total score held.
pub fn cost(inst: &WsspInstance, trace: &DecisionTrace) -> f64 {
    let best: f64 = inst
        .offline_top()
        .into_iter()
        .filter_map(|h| inst.holder_score(h))
        .sum();
    let held: f64 = trace.filled(inst).filter_map(|h| inst.holder_score(h)).sum();
    (best - held).max(0.0)
}

/// Number of final holders that belong to the offline top-`b` of the round.
pub fn phi(inst: &WsspInstance, trace: &DecisionTrace) -> usize {
    let top: HashSet<Holder> = inst.offline_top().into_iter().collect();
    trace.filled(inst).filter(|h| top.contains(h)).count()
}

/// `q = phi / b`, kept inside `[eps, 1 - eps]`.
pub fn quality_update(prev_phi: f64, b: usize) -> f64 {
    if b == 0 {
        return 0.5;
    }
    (prev_phi / b as f64).clamp(QUALITY_EPS, 1.0 - QUALITY_EPS)
}

/// Monte Carlo estimate of the expected cost over uniformly random arrival
/// orders. Returns `(mean, standard error)`.
pub fn monte_carlo_expected_cost<R: Rng + ?Sized>(
    inst: &WsspInstance,
    spec: &StrategySpec,
    n_perm: usize,
    rng: &mut R,
) -> Result<(f64, f64)> {
    if n_perm == 0 {
        return Err(Error::param("need at least one permutation"));
    }
    let mut shuffled = inst.clone();
    let mut costs = Vec::with_capacity(n_perm);
    for _ in 0..n_perm {
        shuffled.candidates.shuffle(rng);
        let trace = run_strategy(&shuffled, spec)?;
        costs.push(cost(&shuffled, &trace));
    }
    Ok((stats::mean(&costs), stats::std_error(&costs)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn fig2_instance() -> WsspInstance {
        // Preselection {0, -1}; candidates -1, 0, then a 4 and a 2.
        WsspInstance::from_scores(&[0.0, -1.0], &[-1.0, 0.0, 4.0, 2.0]).unwrap()
    }

    #[test]
    fn mean_walkthrough() {
        let inst = fig2_instance();
        let trace = run_strategy(&inst, &StrategySpec::mean()).unwrap();
        assert_eq!(trace.thresholds[0], -0.5);
        assert!(!trace.accept[0]);
        assert!(trace.accept[1]);
        assert_eq!(
            trace.displaced[0],
            Displacement { candidate: 1, displaced: Holder::Preselected(1) }
        );
        assert_eq!(trace.thresholds[1], -0.5);
        assert_eq!(trace.thresholds[2], 0.0);
        // 4 takes the last preselected resource; then mean 2 blocks the 2.
        assert!(trace.accept[2]);
        assert_eq!(trace.displaced[1].displaced, Holder::Preselected(0));
        assert!(!trace.accept[3]);
        assert_eq!(cost(&inst, &trace), 2.0);
        assert_eq!(cost(&inst, &trace) / inst.b as f64, 1.0);
    }

    #[test]
    fn offline_cost_is_zero() {
        let inst = fig2_instance();
        let trace = run_strategy(&inst, &StrategySpec::offline()).unwrap();
        assert_eq!(cost(&inst, &trace), 0.0);
        let mut held: Vec<f64> = trace.filled(&inst).filter_map(|h| inst.holder_score(h)).collect();
        held.sort_by(f64::total_cmp);
        assert_eq!(held, vec![2.0, 4.0]);
    }

    #[test]
    fn learning_phase_covering_everything() {
        let inst = WsspInstance::from_scores(&[5.0], &[1.0, 2.0, 3.0]).unwrap();
        let trace = run_strategy(&inst, &StrategySpec::ccm(3)).unwrap();
        assert!(trace.accept.iter().all(|&a| !a));
        assert_eq!(trace.final_allocation, vec![Holder::Preselected(0)]);
        assert_eq!(cost(&inst, &trace), 0.0);
    }

    #[test]
    fn rejected_best_candidate_costs_its_gap() {
        let inst = WsspInstance::from_scores(&[0.0], &[10.0]).unwrap();
        let trace = run_strategy(&inst, &StrategySpec::ccm(1)).unwrap();
        assert_eq!(cost(&inst, &trace), 10.0);
    }

    #[test]
    fn cutoff_beyond_sequence_is_error() {
        let inst = WsspInstance::from_scores(&[0.0], &[1.0, 2.0]).unwrap();
        assert!(matches!(
            run_strategy(&inst, &StrategySpec::ccm(3)),
            Err(Error::Parameter(_))
        ));
    }

    #[test]
    fn ccm_threshold_includes_preselection() {
        // b = 2, preselection {3, 1}; c = 0 -> threshold starts at 1.
        let inst = WsspInstance::from_scores(&[3.0, 1.0], &[0.5, 2.0, 1.5, 4.0]).unwrap();
        let trace = run_strategy(&inst, &StrategySpec::ccm(0)).unwrap();
        assert_eq!(trace.thresholds, vec![1.0, 1.0, 2.0, 2.0]);
        assert_eq!(trace.accept, vec![false, true, false, true]);
        // The 4 can only take the remaining preselected resource (the 3):
        // the accepted 2 keeps its own.
        let mut held: Vec<f64> = trace.filled(&inst).filter_map(|h| inst.holder_score(h)).collect();
        held.sort_by(f64::total_cmp);
        assert_eq!(held, vec![2.0, 4.0]);
        assert_eq!(cost(&inst, &trace), 1.0);
    }

    #[test]
    fn acceptances_stop_when_preselection_is_used_up() {
        // b = 1: the 1 beats the mean 0 and takes the only resource; the 2
        // beats the new mean but nothing is left to withdraw.
        let inst = WsspInstance::from_scores(&[0.0], &[1.0, 2.0]).unwrap();
        let trace = run_strategy(&inst, &StrategySpec::mean()).unwrap();
        assert_eq!(trace.thresholds, vec![0.0, 1.0]);
        assert_eq!(trace.accept, vec![true, false]);
        assert_eq!(cost(&inst, &trace), 1.0);
    }

    #[test]
    fn ccm_learning_phase_raises_threshold() {
        // b = 1, preselection {0}; learning sees 5, so 3 is rejected, 6 accepted.
        let inst = WsspInstance::from_scores(&[0.0], &[5.0, 3.0, 6.0]).unwrap();
        let trace = run_strategy(&inst, &StrategySpec::ccm(1)).unwrap();
        assert_eq!(trace.accept, vec![false, false, true]);
        assert_eq!(cost(&inst, &trace), 0.0);
    }

    #[test]
    fn median_threshold() {
        let inst = WsspInstance::from_scores(&[0.0, 1.0, 10.0], &[2.0, 0.5]).unwrap();
        let trace = run_strategy(&inst, &StrategySpec::median()).unwrap();
        // Median 1: the 2 replaces the 0; median becomes 2, the 0.5 is rejected.
        assert_eq!(trace.thresholds, vec![1.0, 2.0]);
        assert_eq!(trace.accept, vec![true, false]);
        // Same instance under MEAN: threshold 11/3 rejects both.
        let trace = run_strategy(&inst, &StrategySpec::mean()).unwrap();
        assert_eq!(trace.accept, vec![false, false]);
    }

    #[test]
    fn free_slots_are_displaced_first_and_filled_at_the_end() {
        let inst = WsspInstance::new(
            3,
            vec![
                PreselectedEntry::live(0, 5.0),
                PreselectedEntry::recovered(1),
                PreselectedEntry::idle(),
            ],
            vec![
                Candidate { node: 7, score: 6.0 },
                Candidate { node: 8, score: 1.0 },
                Candidate { node: 9, score: 2.0 },
            ],
        )
        .unwrap();
        let trace = run_strategy(&inst, &StrategySpec::mean()).unwrap();
        // 6 > 5: accepted into the recovered slot (first free).
        assert_eq!(
            trace.displaced,
            vec![Displacement { candidate: 0, displaced: Holder::Preselected(1) }]
        );
        assert_eq!(trace.accept, vec![true, false, false]);
        // Idle slot handed to the last candidate.
        assert_eq!(
            trace.leftover,
            vec![Displacement { candidate: 2, displaced: Holder::Preselected(2) }]
        );
        assert_eq!(trace.filled(&inst).count(), 3);
        // Best {6,5,2} = 13, held {5,6,2} = 13.
        assert_eq!(cost(&inst, &trace), 0.0);
    }

    #[test]
    fn all_free_preselection_accepts_first_arrivals() {
        let inst = WsspInstance::new(
            2,
            vec![PreselectedEntry::idle(), PreselectedEntry::recovered(3)],
            vec![Candidate { node: 1, score: -4.0 }, Candidate { node: 2, score: -5.0 }],
        )
        .unwrap();
        for spec in [StrategySpec::mean(), StrategySpec::median(), StrategySpec::ccm(0)] {
            let trace = run_strategy(&inst, &spec).unwrap();
            assert_eq!(trace.filled(&inst).count(), 2, "{spec:?}");
            assert_eq!(cost(&inst, &trace), 0.0);
        }
    }

    #[test]
    fn invalid_instances_rejected() {
        let dup = WsspInstance {
            b: 1,
            preselection: vec![PreselectedEntry::live(0, 1.0)],
            candidates: vec![Candidate { node: 0, score: 2.0 }],
        };
        assert!(run_strategy(&dup, &StrategySpec::mean()).is_err());
        let short = WsspInstance { b: 2, preselection: vec![PreselectedEntry::idle()], candidates: vec![] };
        assert!(short.validate().is_err());
    }

    #[test]
    fn quality_examples() {
        assert!((quality_update(INITIAL_PHI, 5) - 0.1).abs() < 1e-15);
        assert_eq!(quality_update(5.0, 5), 1.0 - QUALITY_EPS);
        assert_eq!(quality_update(0.0, 5), QUALITY_EPS);
        assert!((quality_update(3.0, 5) - 0.6).abs() < 1e-15);
    }

    #[test]
    fn phi_counts_holders_in_offline_top() {
        // b = 5, preselection 10..14 scores {10, 9, 1, 0, -1}; candidates 8, 7, 6.
        // Top-5 of the union: 10, 9, 8, 7, 6. Under "ccm(3)" nobody is accepted,
        // so holders in the top are 10 and 9 -> phi 2.
        let inst = WsspInstance::from_scores(&[10.0, 9.0, 1.0, 0.0, -1.0], &[8.0, 7.0, 6.0]).unwrap();
        let trace = run_strategy(&inst, &StrategySpec::ccm(3)).unwrap();
        assert_eq!(phi(&inst, &trace), 2);
        // Offline holds the top: phi = 5. MEAN takes the 8 (> 3.8) and the
        // 7 (> 5.6) but not the 6 (mean is then 7): phi = 4.
        let trace = run_strategy(&inst, &StrategySpec::offline()).unwrap();
        assert_eq!(phi(&inst, &trace), 5);
        let trace = run_strategy(&inst, &StrategySpec::mean()).unwrap();
        assert_eq!(trace.accept, vec![true, true, false]);
        assert_eq!(phi(&inst, &trace), 4);
        // Three holders in the top-5 -> q = 0.6.
        let inst = WsspInstance::from_scores(&[10.0, 9.0, 8.0, 0.0, -1.0], &[7.0, 6.0, 5.0]).unwrap();
        let trace = run_strategy(&inst, &StrategySpec::ccm(3)).unwrap();
        let p = phi(&inst, &trace);
        assert_eq!(p, 3);
        assert!((quality_update(p as f64, 5) - 0.6).abs() < 1e-15);
    }

    #[test]
    fn fallback_cutoff_values() {
        assert_eq!(fallback_cutoff(0), 0);
        assert_eq!(fallback_cutoff(1), 0);
        assert_eq!(fallback_cutoff(4), 1);
        assert_eq!(fallback_cutoff(9), 2);
        assert_eq!(fallback_cutoff(50), 6);
        assert_eq!(StrategySpec::ccm_star().resolved_cutoff(16), 3);
        assert_eq!(StrategySpec::mean().resolved_cutoff(16), 0);
    }

    #[test]
    fn spec_json_shape() {
        let spec: StrategySpec = serde_json::from_str(r#"{"kind":"ccm","cutoff":2}"#).unwrap();
        assert_eq!(spec, StrategySpec::ccm(2));
        let text = serde_json::to_string(&StrategySpec::mean()).unwrap();
        assert_eq!(text, r#"{"kind":"mean_threshold"}"#);
    }

    fn instance_strategy() -> impl Strategy<Value = (WsspInstance, usize)> {
        (1usize..4, 0usize..8).prop_flat_map(|(b, n)| {
            (
                proptest::collection::vec((-5i32..6, 0u8..4), b),
                proptest::collection::vec(-5i32..6, n),
                0..=n,
            )
                .prop_map(move |(pre, cand, c)| {
                    let preselection = pre
                        .iter()
                        .enumerate()
                        .map(|(i, &(s, kind))| match kind {
                            0 => PreselectedEntry::recovered(i),
                            _ => PreselectedEntry::live(i, s as f64),
                        })
                        .collect();
                    let candidates = cand
                        .iter()
                        .enumerate()
                        .map(|(j, &s)| Candidate { node: 100 + j, score: s as f64 })
                        .collect();
                    (WsspInstance::new(b, preselection, candidates).unwrap(), c)
                })
        })
    }

    fn all_specs(c: usize) -> [StrategySpec; 5] {
        [
            StrategySpec::offline(),
            StrategySpec::ccm(c),
            StrategySpec::ccm_star().with_cutoff(c),
            StrategySpec::mean(),
            StrategySpec::median(),
        ]
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(2000))]

        #[test]
        fn budget_conserved_and_cost_nonnegative((inst, c) in instance_strategy()) {
            let expected_filled = inst.b.min(inst.n_live() + inst.n());
            for spec in all_specs(c) {
                let trace = run_strategy(&inst, &spec).unwrap();
                prop_assert_eq!(trace.final_allocation.len(), inst.b);
                let distinct: HashSet<_> = trace.final_allocation.iter().collect();
                prop_assert_eq!(distinct.len(), inst.b);
                prop_assert_eq!(trace.filled(&inst).count(), expected_filled);
                prop_assert_eq!(trace.displaced.len(), trace.accept.iter().filter(|&&a| a).count());
                let k = cost(&inst, &trace);
                prop_assert!(k >= 0.0);
                if spec.kind == StrategyKind::Offline {
                    prop_assert_eq!(k, 0.0);
                }
            }
        }

        #[test]
        fn rejected_candidates_only_return_as_leftovers((inst, c) in instance_strategy()) {
            for spec in all_specs(c) {
                let trace = run_strategy(&inst, &spec).unwrap();
                let leftovers: HashSet<usize> = trace.leftover.iter().map(|d| d.candidate).collect();
                for h in &trace.final_allocation {
                    if let Holder::Candidate(j) = *h {
                        prop_assert!(trace.accept[j] || leftovers.contains(&j));
                    }
                }
                // Leftovers are a suffix of the rejected candidates.
                if let Some(first) = leftovers.iter().min() {
                    for j in *first..inst.n() {
                        prop_assert!(trace.accept[j] || leftovers.contains(&j));
                    }
                }
            }
        }

        #[test]
        fn ccm_threshold_monotone((inst, c) in instance_strategy()) {
            let trace = run_strategy(&inst, &StrategySpec::ccm(c)).unwrap();
            for w in trace.thresholds.windows(2) {
                prop_assert!(w[0] <= w[1]);
            }
            prop_assert!(trace.accept[..c].iter().all(|&a| !a));
        }

        #[test]
        fn accepted_candidates_keep_their_resource((inst, c) in instance_strategy()) {
            for spec in all_specs(c) {
                let trace = run_strategy(&inst, &spec).unwrap();
                prop_assert!(trace.displaced.len() <= inst.b);
                for d in &trace.displaced {
                    prop_assert!(matches!(d.displaced, Holder::Preselected(_)));
                    prop_assert!(trace.final_allocation.contains(&Holder::Candidate(d.candidate)));
                }
            }
        }

        #[test]
        fn mean_threshold_moves_only_on_acceptance((inst, _c) in instance_strategy()) {
            let trace = run_strategy(&inst, &StrategySpec::mean()).unwrap();
            for j in 0..inst.n().saturating_sub(1) {
                if !trace.accept[j] {
                    prop_assert_eq!(trace.thresholds[j + 1], trace.thresholds[j]);
                }
            }
        }

        #[test]
        fn cost_zero_iff_score_equivalent_to_offline((inst, c) in instance_strategy()) {
            let offline = run_strategy(&inst, &StrategySpec::offline()).unwrap();
            let mut best: Vec<f64> = offline.filled(&inst).filter_map(|h| inst.holder_score(h)).collect();
            best.sort_by(f64::total_cmp);
            for spec in all_specs(c) {
                let trace = run_strategy(&inst, &spec).unwrap();
                let mut held: Vec<f64> = trace.filled(&inst).filter_map(|h| inst.holder_score(h)).collect();
                held.sort_by(f64::total_cmp);
                prop_assert_eq!(cost(&inst, &trace) == 0.0, held == best);
            }
        }

        #[test]
        fn decisions_invariant_under_positive_affine_maps(
            (inst, c) in instance_strategy(),
            scale in 0.25f64..4.0,
            shift in -10.0f64..10.0,
        ) {
            // Dyadic-friendly maps keep ties exact.
            let scale = (scale * 4.0).round() / 4.0;
            let shift = shift.round();
            let mut mapped = inst.clone();
            for e in &mut mapped.preselection {
                if e.still_infected {
                    e.score = e.score * scale + shift;
                }
            }
            for cand in &mut mapped.candidates {
                cand.score = cand.score * scale + shift;
            }
            for spec in all_specs(c) {
                let a = run_strategy(&inst, &spec).unwrap();
                let b = run_strategy(&mapped, &spec).unwrap();
                prop_assert_eq!(&a.accept, &b.accept);
                prop_assert_eq!(&a.final_allocation, &b.final_allocation);
            }
            // Pure scaling scales the cost of a fixed trace.
            let mut scaled = inst.clone();
            for e in &mut scaled.preselection {
                if e.still_infected {
                    e.score *= scale;
                }
            }
            for cand in &mut scaled.candidates {
                cand.score *= scale;
            }
            for spec in all_specs(c) {
                let trace = run_strategy(&inst, &spec).unwrap();
                let k = cost(&inst, &trace);
                prop_assert!((cost(&scaled, &trace) - scale * k).abs() < 1e-9);
            }
        }
    }
}
