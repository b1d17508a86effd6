//! Node criticality scores.
//!
//! The control loop treats the scoring function as a black box: higher
//! scores mark nodes that should hold resources. The default is LRIE
//! (largest reduction in infectious edges), `S_i = healthy neighbors -
//! infected neighbors`, recomputed from the current state every round.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Graph, NodeId};
use crate::sis::EpidemicState;

/// Per-node scores. Only entries of infected nodes are meaningful.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreVector(pub Vec<f64>);

impl ScoreVector {
    pub fn get(&self, i: NodeId) -> f64 {
        self.0[i]
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

pub trait ScoringFunction {
    fn scores(&self, state: &EpidemicState, graph: &Graph) -> Result<ScoreVector>;
}

/// Built-in scoring functions, selectable from configs.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scoring {
    #[default]
    Lrie,
    /// `S_i = -i`: a fixed priority on low ids. With full access this makes
    /// the allocation a function of the infection vector alone.
    IndexPriority,
}

impl ScoringFunction for Scoring {
    fn scores(&self, state: &EpidemicState, graph: &Graph) -> Result<ScoreVector> {
        match self {
            Scoring::Lrie => lrie_scores(state, graph),
            Scoring::IndexPriority => {
                check_size(state, graph)?;
                Ok(ScoreVector((0..graph.n_nodes()).map(|i| -(i as f64)).collect()))
            }
        }
    }
}

fn check_size(state: &EpidemicState, graph: &Graph) -> Result<()> {
    if state.n_nodes() != graph.n_nodes() {
        return Err(Error::param(format!(
            "state has {} nodes, graph has {}",
            state.n_nodes(),
            graph.n_nodes()
        )));
    }
    Ok(())
}

/// LRIE score of node `i`.
pub fn lrie_score(state: &EpidemicState, graph: &Graph, i: NodeId) -> i64 {
    graph
        .neighbors(i)
        .iter()
        .map(|&j| if state.x[j] { -1 } else { 1 })
        .sum()
}

pub fn lrie_scores(state: &EpidemicState, graph: &Graph) -> Result<ScoreVector> {
    check_size(state, graph)?;
    Ok(ScoreVector(
        (0..graph.n_nodes())
            .map(|i| lrie_score(state, graph, i) as f64)
            .collect(),
    ))
}

/// Orders `(score, id)` pairs best first: higher score, then lower id.
pub fn priority_order(a: (f64, NodeId), b: (f64, NodeId)) -> Ordering {
    b.0.total_cmp(&a.0).then(a.1.cmp(&b.1))
}

/// The `min(b, |eligible|)` eligible nodes with the largest scores, best
/// first; ties go to the lower id.
pub fn top_b_nodes(scores: &ScoreVector, eligible: &[NodeId], b: usize) -> Vec<NodeId> {
    let mut ranked: Vec<NodeId> = eligible.to_vec();
    ranked.sort_by(|&i, &j| priority_order((scores.get(i), i), (scores.get(j), j)));
    ranked.dedup();
    ranked.truncate(b);
    ranked
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn star(leaves: usize) -> Graph {
        let edges: Vec<_> = (1..=leaves).map(|i| (0, i)).collect();
        Graph::from_edges(leaves + 1, &edges).unwrap()
    }

    #[test]
    fn lrie_examples() {
        let g = star(3);
        let s = EpidemicState::new(vec![true, false, false, false]);
        assert_eq!(lrie_scores(&s, &g).unwrap().get(0), 3.0);

        let g = Graph::from_edges(2, &[]).unwrap();
        let s = EpidemicState::new(vec![true, false]);
        assert_eq!(lrie_scores(&s, &g).unwrap().get(0), 0.0);

        let g = Graph::from_edges(2, &[(0, 1)]).unwrap();
        let s = EpidemicState::new(vec![true, true]);
        assert_eq!(lrie_scores(&s, &g).unwrap().0, vec![-1.0, -1.0]);
    }

    #[test]
    fn lrie_size_mismatch() {
        let g = star(2);
        let s = EpidemicState::new(vec![true]);
        assert!(lrie_scores(&s, &g).is_err());
    }

    #[test]
    fn top_b_examples() {
        let s = ScoreVector(vec![5.0, 2.0, 7.0]);
        assert_eq!(top_b_nodes(&s, &[0, 1, 2], 2), vec![2, 0]);
        let s = ScoreVector(vec![0.0; 5]);
        assert_eq!(top_b_nodes(&s, &[4], 3), vec![4]);
        let s = ScoreVector(vec![3.0, 3.0]);
        assert_eq!(top_b_nodes(&s, &[1, 0], 1), vec![0]);
        assert!(top_b_nodes(&s, &[0, 1], 0).is_empty());
    }

    #[test]
    fn index_priority_prefers_low_ids() {
        let g = star(3);
        let s = EpidemicState::new(vec![false, true, true, true]);
        let scores = Scoring::IndexPriority.scores(&s, &g).unwrap();
        assert_eq!(top_b_nodes(&scores, &[3, 1, 2], 2), vec![1, 2]);
    }

    fn graph_and_state() -> impl Strategy<Value = (Graph, EpidemicState)> {
        (2usize..12).prop_flat_map(|n| {
            let pairs: Vec<(usize, usize)> =
                (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
            let m = pairs.len();
            (
                proptest::collection::vec(any::<bool>(), m),
                proptest::collection::vec(any::<bool>(), n),
            )
                .prop_map(move |(mask, x)| {
                    let edges: Vec<_> = pairs
                        .iter()
                        .zip(&mask)
                        .filter(|(_, &keep)| keep)
                        .map(|(&e, _)| e)
                        .collect();
                    (Graph::from_edges(n, &edges).unwrap(), EpidemicState::new(x))
                })
        })
    }

    proptest! {
        #[test]
        fn lrie_matches_adjacency_formula((g, s) in graph_and_state()) {
            let n = g.n_nodes();
            let scores = lrie_scores(&s, &g).unwrap();
            for i in 0..n {
                let mut expected = 0i64;
                for j in 0..n {
                    let mij = g.has_edge(i, j) as i64;
                    let mji = g.has_edge(j, i) as i64;
                    let xj = s.x[j] as i64;
                    expected += mij * (1 - xj) - mji * xj;
                }
                prop_assert_eq!(scores.get(i), expected as f64);
                prop_assert!(expected.abs() < n as i64);
            }
        }

        #[test]
        fn lrie_is_local((g, s) in graph_and_state(), flip in 0usize..12) {
            let n = g.n_nodes();
            let j = flip % n;
            let before = lrie_scores(&s, &g).unwrap();
            let mut s2 = s.clone();
            s2.x[j] = !s2.x[j];
            let after = lrie_scores(&s2, &g).unwrap();
            for i in 0..n {
                if i != j && !g.has_edge(i, j) {
                    prop_assert_eq!(before.get(i), after.get(i));
                }
            }
        }

        #[test]
        fn top_b_invariant_under_increasing_maps(
            scores in proptest::collection::vec(-20i32..20, 1..15),
            b in 0usize..6,
            scale in 0.1f64..10.0,
            shift in -100.0f64..100.0,
        ) {
            let n = scores.len();
            let raw = ScoreVector(scores.iter().map(|&v| v as f64).collect());
            let mapped = ScoreVector(raw.0.iter().map(|v| (v * scale + shift).exp2()).collect());
            let eligible: Vec<usize> = (0..n).rev().collect();
            prop_assert_eq!(top_b_nodes(&raw, &eligible, b), top_b_nodes(&mapped, &eligible, b));
        }
    }
}
