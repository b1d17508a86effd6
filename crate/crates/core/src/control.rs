//! Round-by-round resource reallocation driven by epidemic events.
//!
//! A replica alternates between reallocation rounds and single epidemic
//! events. The first round runs at `t = 0` on top of a uniformly random
//! initial allocation; every later round follows exactly one event, and the
//! loop stops at extinction (no round after the last recovery), when no
//! transition is enabled, or when a cap is hit.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::io::Write;

use rand::seq::{index, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Graph, NodeId};
use crate::rng::{stream_rng, Stream};
use crate::scoring::{top_b_nodes, ScoreVector, Scoring, ScoringFunction};
use crate::selection::{
    self, quality_update, run_strategy, Candidate, CutoffTable, PreselectedEntry, StrategyKind,
    StrategySpec, WsspInstance, INITIAL_PHI,
};
use crate::sis::{
    apply_event, next_event, write_event_log, EpidemicState, LoggedEvent, RateParams, Transition,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControlMode {
    /// Top-`b` over every infected node.
    FullDra,
    /// Top-`b` over the current holders and a random sample.
    Rdra,
    /// The sample arrives in random order and is processed online.
    Sdra,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlConfig {
    pub b: usize,
    pub mode: ControlMode,
    pub strategy: StrategySpec,
    /// Fraction `alpha` of the infected nodes accessible per round.
    pub sample_ratio: f64,
    #[serde(default)]
    pub scoring: Scoring,
}

impl ControlConfig {
    pub fn new(b: usize, mode: ControlMode, strategy: StrategySpec, sample_ratio: f64) -> Self {
        ControlConfig { b, mode, strategy, sample_ratio, scoring: Scoring::Lrie }
    }

    pub fn validate(&self) -> Result<()> {
        if self.b == 0 {
            return Err(Error::param("budget must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.sample_ratio) {
            return Err(Error::param(format!(
                "sample ratio must be in [0, 1], got {}",
                self.sample_ratio
            )));
        }
        if let Some(q) = self.strategy.quality {
            if !(q > 0.0 && q < 1.0) {
                return Err(Error::param(format!("quality must be in (0, 1), got {q}")));
            }
        }
        if self.mode == ControlMode::Rdra && self.strategy.kind != StrategyKind::Offline {
            return Err(Error::param("rdra mode decides offline; use the offline strategy"));
        }
        Ok(())
    }
}

/// Size of a round's sample: `floor(alpha * infected)`, capped by the pool.
pub fn sample_size(alpha: f64, n_infected: usize, n_eligible: usize) -> usize {
    // The epsilon absorbs products such as 0.29 * 100 = 28.999999999999996.
    let n = (alpha * n_infected as f64 + 1e-9).floor() as usize;
    n.min(n_eligible)
}

/// Uniformly random ordered sample of infected nodes that hold no resource.
pub fn draw_sample<R: Rng + ?Sized>(
    state: &EpidemicState,
    alpha: f64,
    rng: &mut R,
) -> Result<Vec<NodeId>> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::param(format!("alpha must be in [0, 1], got {alpha}")));
    }
    let mut eligible: Vec<NodeId> = state
        .infected_nodes()
        .filter(|&i| !state.r[i])
        .collect();
    let n = sample_size(alpha, state.n_infected(), eligible.len());
    let (picked, _) = eligible.partial_shuffle(rng, n);
    Ok(picked.to_vec())
}

/// Result of one reallocation round.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundOutcome {
    pub r: Vec<bool>,
    pub sample: Vec<NodeId>,
    pub scores: ScoreVector,
    /// Live holders plus sampled nodes: everything the round could allocate to.
    pub accessible: usize,
    pub cutoff: Option<usize>,
    pub quality: Option<f64>,
    pub cost: f64,
    pub phi: usize,
}

/// Builds the round's selection problem from the current holders.
pub fn build_instance(
    state: &EpidemicState,
    scores: &ScoreVector,
    b: usize,
    sample: &[NodeId],
) -> Result<WsspInstance> {
    let mut preselection: Vec<PreselectedEntry> = state
        .r
        .iter()
        .enumerate()
        .filter(|(_, &held)| held)
        .map(|(i, _)| {
            if state.x[i] {
                PreselectedEntry::live(i, scores.get(i))
            } else {
                PreselectedEntry::recovered(i)
            }
        })
        .collect();
    if preselection.len() > b {
        return Err(Error::Contract(format!(
            "{} resources allocated with a budget of {b}",
            preselection.len()
        )));
    }
    preselection.resize(b, PreselectedEntry::idle());
    let candidates = sample
        .iter()
        .map(|&node| Candidate { node, score: scores.get(node) })
        .collect();
    WsspInstance::new(b, preselection, candidates)
}

/// Cost and quality count of an allocation chosen outside the WSSP engine.
fn evaluate_allocation(inst: &WsspInstance, chosen: &[NodeId]) -> (f64, usize) {
    let top: Vec<NodeId> = inst
        .offline_top()
        .into_iter()
        .filter_map(|h| inst.holder_node(h))
        .collect();
    let score_of = |node: NodeId| {
        inst.preselection
            .iter()
            .find(|e| e.node == Some(node))
            .map(|e| e.score)
            .or_else(|| inst.candidates.iter().find(|c| c.node == node).map(|c| c.score))
            .expect("allocated node belongs to the round")
    };
    let best: f64 = top.iter().map(|&n| score_of(n)).sum();
    let held: f64 = chosen.iter().map(|&n| score_of(n)).sum();
    let top: HashSet<NodeId> = top.into_iter().collect();
    let phi = chosen.iter().filter(|n| top.contains(n)).count();
    ((best - held).max(0.0), phi)
}

/// Per-replica controller state: the configuration, an optional cutoff
/// table for CCM*, and the quality chain.
#[derive(Debug)]
pub struct Controller<'a> {
    cfg: ControlConfig,
    table: Option<&'a CutoffTable>,
    prev_phi: f64,
}

impl<'a> Controller<'a> {
    pub fn new(cfg: ControlConfig, table: Option<&'a CutoffTable>) -> Result<Self> {
        cfg.validate()?;
        Ok(Controller { cfg, table, prev_phi: INITIAL_PHI })
    }

    pub fn config(&self) -> &ControlConfig {
        &self.cfg
    }

    /// Quality used by the next round.
    pub fn quality(&self) -> f64 {
        self.cfg
            .strategy
            .quality
            .unwrap_or_else(|| quality_update(self.prev_phi, self.cfg.b))
    }

    pub fn run_round<R: Rng + ?Sized>(
        &mut self,
        state: &EpidemicState,
        graph: &Graph,
        rng: &mut R,
    ) -> Result<RoundOutcome> {
        let b = self.cfg.b;
        let scores = self.cfg.scoring.scores(state, graph)?;
        let n_nodes = state.n_nodes();
        let mut r = vec![false; n_nodes];

        let outcome = match self.cfg.mode {
            ControlMode::FullDra => {
                let infected: Vec<NodeId> = state.infected_nodes().collect();
                let chosen = top_b_nodes(&scores, &infected, b);
                for &i in &chosen {
                    r[i] = true;
                }
                let phi = chosen.len();
                RoundOutcome {
                    r,
                    sample: Vec::new(),
                    scores,
                    accessible: infected.len(),
                    cutoff: None,
                    quality: None,
                    cost: 0.0,
                    phi,
                }
            }
            ControlMode::Rdra => {
                let sample = draw_sample(state, self.cfg.sample_ratio, rng)?;
                let inst = build_instance(state, &scores, b, &sample)?;
                let mut allowed: Vec<NodeId> = inst
                    .preselection
                    .iter()
                    .filter(|e| e.live_score().is_some())
                    .filter_map(|e| e.node)
                    .collect();
                allowed.extend_from_slice(&sample);
                let chosen = top_b_nodes(&scores, &allowed, b);
                for &i in &chosen {
                    r[i] = true;
                }
                let (cost, phi) = evaluate_allocation(&inst, &chosen);
                RoundOutcome {
                    r,
                    accessible: allowed.len(),
                    sample,
                    scores,
                    cutoff: None,
                    quality: None,
                    cost,
                    phi,
                }
            }
            ControlMode::Sdra => {
                let sample = draw_sample(state, self.cfg.sample_ratio, rng)?;
                let inst = build_instance(state, &scores, b, &sample)?;
                let mut spec = self.cfg.strategy;
                // A fixed cutoff longer than this round's sample rejects everyone.
                if let Some(c) = spec.cutoff {
                    spec.cutoff = Some(c.min(sample.len()));
                }
                let mut quality = None;
                if spec.kind == StrategyKind::CcmStar && spec.cutoff.is_none() {
                    let q = self.quality();
                    quality = Some(q);
                    if let Some(table) = self.table {
                        spec.cutoff = Some(table.cutoff(b, sample.len(), q)?);
                    }
                }
                let trace = run_strategy(&inst, &spec)?;
                for h in trace.filled(&inst) {
                    let node = inst.holder_node(h).expect("filled holder has a node");
                    r[node] = true;
                }
                let cutoff = matches!(spec.kind, StrategyKind::Ccm | StrategyKind::CcmStar)
                    .then_some(trace.cutoff);
                RoundOutcome {
                    r,
                    accessible: inst.n_live() + sample.len(),
                    sample,
                    scores,
                    cutoff,
                    quality,
                    cost: selection::cost(&inst, &trace),
                    phi: selection::phi(&inst, &trace),
                }
            }
        };
        self.prev_phi = outcome.phi as f64;
        Ok(outcome)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Caps {
    pub max_time: f64,
    pub max_events: usize,
}

impl Default for Caps {
    fn default() -> Self {
        Caps { max_time: f64::INFINITY, max_events: 10_000_000 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CapKind {
    MaxTime,
    MaxEvents,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Termination {
    Extinct { t: f64 },
    /// Infections remain but nothing can change any more.
    Absorbed { t: f64 },
    /// Stopped by a cap; the state is known up to `t`.
    Censored { t: f64, cap: CapKind },
}

impl Termination {
    pub fn time(&self) -> f64 {
        match *self {
            Termination::Extinct { t } | Termination::Absorbed { t } | Termination::Censored { t, .. } => t,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    /// Round index, starting at 1 for the round at `t = 0`.
    pub k: usize,
    pub t: f64,
    pub n_infected: usize,
    pub sample_size: usize,
    pub accessible: usize,
    pub n_resources: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cutoff: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub quality: Option<f64>,
    pub cost: f64,
    pub phi: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub allocation: Option<Vec<NodeId>>,
}

/// What to keep beyond events and round summaries.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RecordOptions {
    /// Store every round's allocation.
    pub allocations: bool,
    /// Rounds at which to store the scores of all infected nodes.
    pub snapshot_rounds: BTreeSet<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub seed: u64,
    pub replica: u64,
    pub n_nodes: usize,
    pub x0: Vec<bool>,
    pub initial_allocation: Vec<NodeId>,
    pub events: Vec<LoggedEvent>,
    pub rounds: Vec<RoundRecord>,
    pub end: Termination,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub score_snapshots: BTreeMap<usize, Vec<f64>>,
}

impl TrajectoryRecord {
    pub fn initial_infected(&self) -> usize {
        self.x0.iter().filter(|&&v| v).count()
    }

    /// Infected count as a right-continuous step function sampled on `grid`.
    /// After the record ends the last value is carried forward (zero after
    /// extinction).
    pub fn infected_on_grid(&self, grid: &[f64]) -> Vec<usize> {
        let mut out = Vec::with_capacity(grid.len());
        let mut current = self.initial_infected();
        let mut next = 0;
        for &t in grid {
            while next < self.events.len() && self.events[next].t <= t {
                current = self.events[next].n_infected;
                next += 1;
            }
            out.push(current);
        }
        out
    }

    pub fn write_event_log<W: Write>(&self, out: W) -> std::io::Result<()> {
        write_event_log(out, &self.events)
    }

    /// Compact JSON summary: seed, configuration echo, termination and
    /// per-round costs.
    pub fn summary_json(&self, cfg: &ControlConfig) -> serde_json::Value {
        serde_json::json!({
            "seed": self.seed,
            "replica": self.replica,
            "config": cfg,
            "n_nodes": self.n_nodes,
            "initial_infected": self.initial_infected(),
            "n_events": self.events.len(),
            "n_rounds": self.rounds.len(),
            "end": self.end,
            "round_costs": self.rounds.iter().map(|r| r.cost).collect::<Vec<_>>(),
            "round_phi": self.rounds.iter().map(|r| r.phi).collect::<Vec<_>>(),
        })
    }
}

/// Runs one controlled epidemic from `x0`.
///
/// Epidemic events use the `(seed, replica, Epidemic)` stream; the initial
/// allocation, samples and arrival orders use `(seed, replica, Control)`.
#[allow(clippy::too_many_arguments)]
pub fn simulate_replica(
    graph: &Graph,
    rates: &RateParams,
    cfg: &ControlConfig,
    x0: &[bool],
    seed: u64,
    replica: u64,
    caps: Caps,
    table: Option<&CutoffTable>,
    options: &RecordOptions,
) -> Result<TrajectoryRecord> {
    rates.validate()?;
    let n = graph.n_nodes();
    if x0.len() != n {
        return Err(Error::param(format!("x0 has {} entries for {n} nodes", x0.len())));
    }
    let mut controller = Controller::new(*cfg, table)?;
    let mut epi_rng = stream_rng(seed, replica, Stream::Epidemic);
    let mut ctl_rng = stream_rng(seed, replica, Stream::Control);

    let mut state = EpidemicState::new(x0.to_vec());
    let initial_allocation: Vec<NodeId> = index::sample(&mut ctl_rng, n, cfg.b.min(n)).into_vec();
    for &i in &initial_allocation {
        state.r[i] = true;
    }

    let mut events = Vec::new();
    let mut rounds = Vec::new();
    let mut snapshots = BTreeMap::new();
    let mut n_infected = state.n_infected();
    let end = loop {
        if n_infected == 0 {
            break Termination::Extinct { t: state.t };
        }
        let k = rounds.len() + 1;
        let outcome = controller.run_round(&state, graph, &mut ctl_rng)?;
        state.r = outcome.r;
        if options.snapshot_rounds.contains(&k) {
            snapshots.insert(
                k,
                state.infected_nodes().map(|i| outcome.scores.get(i)).collect::<Vec<_>>(),
            );
        }
        rounds.push(RoundRecord {
            k,
            t: state.t,
            n_infected,
            sample_size: outcome.sample.len(),
            accessible: outcome.accessible,
            n_resources: state.n_resources(),
            cutoff: outcome.cutoff,
            quality: outcome.quality,
            cost: outcome.cost,
            phi: outcome.phi,
            allocation: options
                .allocations
                .then(|| state.r.iter().enumerate().filter(|(_, &h)| h).map(|(i, _)| i).collect()),
        });

        let event = match next_event(&state, graph, rates, &mut epi_rng)? {
            Transition::Event(e) => e,
            Transition::Absorbed => break Termination::Absorbed { t: state.t },
            Transition::Extinction => unreachable!("checked before the round"),
        };
        if state.t + event.dt > caps.max_time {
            break Termination::Censored { t: caps.max_time, cap: CapKind::MaxTime };
        }
        if events.len() >= caps.max_events {
            break Termination::Censored { t: state.t, cap: CapKind::MaxEvents };
        }
        apply_event(&mut state, &event)?;
        n_infected = match event.kind {
            crate::sis::EventKind::Infection => n_infected + 1,
            crate::sis::EventKind::Recovery => n_infected - 1,
        };
        events.push(LoggedEvent { t: state.t, node: event.node, kind: event.kind, n_infected });
    };

    Ok(TrajectoryRecord {
        seed,
        replica,
        n_nodes: n,
        x0: x0.to_vec(),
        initial_allocation,
        events,
        rounds,
        end,
        score_snapshots: snapshots,
    })
}
