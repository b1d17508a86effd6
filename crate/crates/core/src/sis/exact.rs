//! Exact mean extinction time for small networks.
//!
//! With an allocation that depends on the infection vector alone, the
//! controlled SIS process is a Markov chain on `2^N` states. The expected
//! hitting time `tau` of the all-healthy state solves `(-Q_TT) tau = 1` over
//! the transient states `T` reachable from the start.

use std::collections::{HashMap, VecDeque};

use nalgebra::{DMatrix, DVector};

use super::{EpidemicState, RateParams};
use crate::error::{Error, Result};
use crate::graph::Graph;

pub const MAX_EXACT_NODES: usize = 12;

/// Treats the `b` infected nodes with the smallest ids.
pub fn lowest_index_policy(x: &[bool], b: usize) -> Vec<bool> {
    let mut r = vec![false; x.len()];
    for i in x.iter().enumerate().filter(|(_, &v)| v).map(|(i, _)| i).take(b) {
        r[i] = true;
    }
    r
}

fn to_mask(x: &[bool]) -> u32 {
    x.iter()
        .enumerate()
        .fold(0u32, |m, (i, &v)| if v { m | (1 << i) } else { m })
}

fn to_vec(mask: u32, n: usize) -> Vec<bool> {
    (0..n).map(|i| mask & (1 << i) != 0).collect()
}

/// Positive-rate transitions out of `mask` under `policy`.
fn transitions<P>(
    mask: u32,
    graph: &Graph,
    rates: &RateParams,
    b: usize,
    policy: &P,
) -> Vec<(u32, f64)>
where
    P: Fn(&[bool], usize) -> Vec<bool>,
{
    let n = graph.n_nodes();
    let x = to_vec(mask, n);
    let r = policy(&x, b);
    let state = EpidemicState { x, r, t: 0.0 };
    (0..n)
        .filter_map(|i| {
            let rate = rates.node_rate(&state, graph, i);
            (rate > 0.0).then_some((mask ^ (1 << i), rate))
        })
        .collect()
}

/// Expected time until extinction from `x0` when the allocation after every
/// change is `policy(x, b)`.
pub fn exact_mean_extinction_time<P>(
    graph: &Graph,
    rates: &RateParams,
    b: usize,
    policy: P,
    x0: &[bool],
) -> Result<f64>
where
    P: Fn(&[bool], usize) -> Vec<bool>,
{
    rates.validate()?;
    let n = graph.n_nodes();
    if n > MAX_EXACT_NODES {
        return Err(Error::Capacity(format!(
            "exact solve supports at most {MAX_EXACT_NODES} nodes, got {n}"
        )));
    }
    if x0.len() != n {
        return Err(Error::param(format!(
            "x0 has {} entries for a {n}-node graph",
            x0.len()
        )));
    }
    let start = to_mask(x0);
    if start == 0 {
        return Ok(0.0);
    }

    // Forward exploration of transient states reachable from the start.
    let mut index: HashMap<u32, usize> = HashMap::new();
    let mut states: Vec<u32> = Vec::new();
    let mut out: Vec<Vec<(u32, f64)>> = Vec::new();
    let mut queue = VecDeque::from([start]);
    index.insert(start, 0);
    states.push(start);
    while let Some(s) = queue.pop_front() {
        let trans = transitions(s, graph, rates, b, &policy);
        for &(t, _) in &trans {
            if t != 0 && !index.contains_key(&t) {
                index.insert(t, states.len());
                states.push(t);
                queue.push_back(t);
            }
        }
        out.push(trans);
    }
    // `out` was filled in BFS order, which is also the index order.
    debug_assert_eq!(out.len(), states.len());

    // Backward reachability of the healthy state.
    let m = states.len();
    let mut preds: Vec<Vec<usize>> = vec![Vec::new(); m];
    let mut reaches = vec![false; m];
    let mut queue = VecDeque::new();
    for (k, trans) in out.iter().enumerate() {
        for &(t, _) in trans {
            if t == 0 {
                if !reaches[k] {
                    reaches[k] = true;
                    queue.push_back(k);
                }
            } else {
                preds[index[&t]].push(k);
            }
        }
    }
    while let Some(k) = queue.pop_front() {
        for &p in &preds[k] {
            if !reaches[p] {
                reaches[p] = true;
                queue.push_back(p);
            }
        }
    }
    if let Some(k) = reaches.iter().position(|&ok| !ok) {
        return Err(Error::Structural(format!(
            "state {:0width$b} cannot reach extinction; absorption is not almost sure",
            states[k],
            width = n
        )));
    }

    let mut a = DMatrix::<f64>::zeros(m, m);
    for (k, trans) in out.iter().enumerate() {
        for &(t, rate) in trans {
            a[(k, k)] += rate;
            if t != 0 {
                a[(k, index[&t])] -= rate;
            }
        }
    }
    let rhs = DVector::<f64>::from_element(m, 1.0);
    let tau = a
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Structural("singular absorption system".into()))?;
    Ok(tau[0])
}
