//! Continuous-time SIS dynamics at node level.
//!
//! A susceptible node `i` is infected at rate `beta * (infected neighbors)`;
//! an infected node recovers at rate `rho * r_i + delta`. Sampling follows
//! the competing-exponentials race, so each emitted [`Event`] flips exactly
//! one coordinate of the infection vector.

mod exact;

use std::io::Write;

use rand::distributions::Open01;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Graph, NodeId};

pub use exact::{exact_mean_extinction_time, lowest_index_policy, MAX_EXACT_NODES};

/// Infection and resource indicators at time `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpidemicState {
    pub x: Vec<bool>,
    pub r: Vec<bool>,
    pub t: f64,
}

impl EpidemicState {
    /// No resources, `t = 0`.
    pub fn new(x: Vec<bool>) -> Self {
        let r = vec![false; x.len()];
        EpidemicState { x, r, t: 0.0 }
    }

    pub fn n_nodes(&self) -> usize {
        self.x.len()
    }

    pub fn n_infected(&self) -> usize {
        self.x.iter().filter(|&&v| v).count()
    }

    pub fn infected_nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.x.iter().enumerate().filter(|(_, &v)| v).map(|(i, _)| i)
    }

    pub fn n_resources(&self) -> usize {
        self.r.iter().filter(|&&v| v).count()
    }

    fn check_graph(&self, graph: &Graph) -> Result<()> {
        if self.x.len() != graph.n_nodes() || self.r.len() != graph.n_nodes() {
            return Err(Error::param(format!(
                "state has {} / {} entries but graph has {} nodes",
                self.x.len(),
                self.r.len(),
                graph.n_nodes()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateParams {
    /// Infection rate contributed by each infected neighbor.
    pub beta: f64,
    /// Recovery rate contributed by a resource.
    pub rho: f64,
    /// Self-recovery rate.
    #[serde(default)]
    pub delta: f64,
}

impl RateParams {
    pub fn new(beta: f64, rho: f64, delta: f64) -> Result<Self> {
        let rates = RateParams { beta, rho, delta };
        rates.validate()?;
        Ok(rates)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("beta", self.beta), ("rho", self.rho), ("delta", self.delta)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::param(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        Ok(())
    }

    /// Hazard of node `i` flipping in `state`.
    pub fn node_rate(&self, state: &EpidemicState, graph: &Graph, i: NodeId) -> f64 {
        if state.x[i] {
            let treated = if state.r[i] { self.rho } else { 0.0 };
            treated + self.delta
        } else {
            let pressure = graph.neighbors(i).iter().filter(|&&j| state.x[j]).count();
            self.beta * pressure as f64
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Infection,
    Recovery,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::Infection => "infection",
            EventKind::Recovery => "recovery",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub node: NodeId,
    pub kind: EventKind,
    /// Time elapsed since the previous event.
    pub dt: f64,
}

/// Outcome of sampling the next transition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Transition {
    Event(Event),
    /// No infected node remains.
    Extinction,
    /// Infections remain but no transition has positive rate.
    Absorbed,
}

/// Samples the next state change of the SIS race from `state`.
pub fn next_event<R: Rng + ?Sized>(
    state: &EpidemicState,
    graph: &Graph,
    rates: &RateParams,
    rng: &mut R,
) -> Result<Transition> {
    rates.validate()?;
    state.check_graph(graph)?;
    if !state.x.iter().any(|&v| v) {
        return Ok(Transition::Extinction);
    }
    let n = graph.n_nodes();
    let total: f64 = (0..n).map(|i| rates.node_rate(state, graph, i)).sum();
    if total <= 0.0 {
        return Ok(Transition::Absorbed);
    }
    let u: f64 = rng.sample(Open01);
    let dt = -u.ln() / total;

    let mut ticket = rng.gen::<f64>() * total;
    let mut chosen = None;
    for i in 0..n {
        let rate = rates.node_rate(state, graph, i);
        if rate <= 0.0 {
            continue;
        }
        chosen = Some(i);
        if ticket < rate {
            break;
        }
        ticket -= rate;
    }
    // Rounding can leave the ticket past the end; the last enabled node wins.
    let node = chosen.expect("positive total rate implies an enabled node");
    let kind = if state.x[node] {
        EventKind::Recovery
    } else {
        EventKind::Infection
    };
    Ok(Transition::Event(Event { node, kind, dt }))
}

/// Flips the event's node and advances the clock. Resources are untouched.
pub fn apply_event(state: &mut EpidemicState, event: &Event) -> Result<()> {
    let Some(&infected) = state.x.get(event.node) else {
        return Err(Error::Contract(format!(
            "event node {} out of range ({})",
            event.node,
            state.x.len()
        )));
    };
    match (event.kind, infected) {
        (EventKind::Infection, false) | (EventKind::Recovery, true) => {}
        (kind, _) => {
            return Err(Error::Contract(format!(
                "{} event on node {} whose infected flag is {infected}",
                kind.as_str(),
                event.node
            )))
        }
    }
    if !(event.dt > 0.0 && event.dt.is_finite()) {
        return Err(Error::Contract(format!("event dt must be positive, got {}", event.dt)));
    }
    state.x[event.node] = !infected;
    state.t += event.dt;
    Ok(())
}

/// One row of the per-replica event log.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoggedEvent {
    pub t: f64,
    pub node: NodeId,
    pub kind: EventKind,
    /// Infected count after the event.
    pub n_infected: usize,
}

pub const EVENT_LOG_HEADER: &str = "t,node,kind,n_infected";

pub fn write_event_log<W: Write>(mut out: W, events: &[LoggedEvent]) -> std::io::Result<()> {
    writeln!(out, "{EVENT_LOG_HEADER}")?;
    for e in events {
        writeln!(out, "{},{},{},{}", e.t, e.node, e.kind.as_str(), e.n_infected)?;
    }
    Ok(())
}
