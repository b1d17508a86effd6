//! Optimal learning-phase length for CCM.
//!
//! `c*(b, n, q)` minimizes the expected rank-based cost of CCM over a
//! synthetic instance family: candidate scores are i.i.d. uniform on (0, 1),
//! and each preselected score is drawn from the top `b / (n + b)` quantile
//! with probability `q`, from the full range otherwise. All cutoffs are
//! evaluated on the same draws.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Read, Write};
use std::sync::RwLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{run_strategy, DecisionTrace, StrategySpec, WsspInstance};
use crate::error::{Error, Result};
use crate::rng::mix64;
use crate::scoring::priority_order;

pub const CUTOFF_CSV_HEADER: &str = "b,n,q,c_star,est_cost";

/// Sum of the ranks (1 = best) of the final holders, minus the best
/// achievable sum `1 + 2 + ... + k`.
pub fn rank_cost(inst: &WsspInstance, trace: &DecisionTrace) -> f64 {
    let mut order: Vec<(f64, usize, super::Holder)> = Vec::with_capacity(inst.b + inst.n());
    for (i, e) in inst.preselection.iter().enumerate() {
        if let Some(s) = e.live_score() {
            order.push((s, e.node.unwrap_or(usize::MAX), super::Holder::Preselected(i)));
        }
    }
    for (j, c) in inst.candidates.iter().enumerate() {
        order.push((c.score, c.node, super::Holder::Candidate(j)));
    }
    order.sort_by(|a, b| priority_order((a.0, a.1), (b.0, b.1)));
    let mut held = 0usize;
    let mut rank_sum = 0usize;
    for h in trace.filled(inst) {
        let rank = order.iter().position(|o| o.2 == h).expect("holder in pool") + 1;
        rank_sum += rank;
        held += 1;
    }
    (rank_sum - held * (held + 1) / 2) as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct CutoffEstimate {
    pub c_star: usize,
    /// Estimated expected rank cost for each cutoff `0..n`.
    pub expected_costs: Vec<f64>,
    pub std_errors: Vec<f64>,
}

impl CutoffEstimate {
    pub fn est_cost(&self) -> f64 {
        self.expected_costs[self.c_star]
    }
}

fn sample_instance<R: Rng + ?Sized>(b: usize, n: usize, q: f64, rng: &mut R) -> WsspInstance {
    let top_width = b as f64 / (n + b) as f64;
    let pre: Vec<f64> = (0..b)
        .map(|_| {
            if rng.gen_bool(q) {
                1.0 - top_width * rng.gen::<f64>()
            } else {
                rng.gen::<f64>()
            }
        })
        .collect();
    let cand: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
    WsspInstance::from_scores(&pre, &cand).expect("finite synthetic scores")
}

/// Monte Carlo estimate of `c*(b, n, q)`; ties go to the smaller cutoff.
pub fn compute_cutoff_table<R: Rng + ?Sized>(
    b: usize,
    n: usize,
    q: f64,
    n_mc: usize,
    rng: &mut R,
) -> Result<CutoffEstimate> {
    if b == 0 {
        return Err(Error::param("budget must be at least 1"));
    }
    if n == 0 {
        return Err(Error::param("need at least one candidate"));
    }
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::param(format!("quality must lie in (0, 1), got {q}")));
    }
    if n_mc < 2 {
        return Err(Error::param(format!("need at least 2 Monte Carlo replicates, got {n_mc}")));
    }
    let mut sum = vec![0.0; n];
    let mut sum_sq = vec![0.0; n];
    for _ in 0..n_mc {
        let inst = sample_instance(b, n, q, rng);
        for c in 0..n {
            let trace = run_strategy(&inst, &StrategySpec::ccm(c))?;
            let k = rank_cost(&inst, &trace);
            sum[c] += k;
            sum_sq[c] += k * k;
        }
    }
    let m = n_mc as f64;
    let expected_costs: Vec<f64> = sum.iter().map(|s| s / m).collect();
    let std_errors = sum_sq
        .iter()
        .zip(&expected_costs)
        .map(|(sq, mu)| ((sq / m - mu * mu).max(0.0) * m / (m - 1.0) / m).sqrt())
        .collect();
    let mut c_star = 0;
    for c in 1..n {
        if expected_costs[c] < expected_costs[c_star] {
            c_star = c;
        }
    }
    Ok(CutoffEstimate { c_star, expected_costs, std_errors })
}

/// Quality rounded to two decimals, kept inside `[0.01, 0.99]`, as an
/// integer number of hundredths.
pub fn q_bucket(q: f64) -> u32 {
    ((q * 100.0).round() as i64).clamp(1, 99) as u32
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Entry {
    c_star: usize,
    est_cost: f64,
}

/// Lazily filled, shareable cache of `c*(b, n, q)` keyed by q bucket.
/// Each entry has its own seed, so values do not depend on the order in
/// which entries are requested.
#[derive(Debug)]
pub struct CutoffTable {
    n_mc: usize,
    seed: u64,
    entries: RwLock<BTreeMap<(usize, usize, u32), Entry>>,
}

impl CutoffTable {
    pub fn new(n_mc: usize, seed: u64) -> Self {
        CutoffTable { n_mc, seed, entries: RwLock::new(BTreeMap::new()) }
    }

    pub fn n_mc(&self) -> usize {
        self.n_mc
    }

    pub fn len(&self) -> usize {
        self.entries.read().expect("cutoff table lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn entry_seed(&self, b: usize, n: usize, bucket: u32) -> u64 {
        mix64(self.seed ^ mix64(b as u64) ^ mix64(((n as u64) << 16) | bucket as u64))
    }

    /// Optimal cutoff for `n` candidates; `0` when `n == 0`.
    pub fn cutoff(&self, b: usize, n: usize, q: f64) -> Result<usize> {
        if n == 0 {
            return Ok(0);
        }
        let bucket = q_bucket(q);
        let key = (b, n, bucket);
        if let Some(e) = self.entries.read().expect("cutoff table lock").get(&key) {
            return Ok(e.c_star);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.entry_seed(b, n, bucket));
        let est = compute_cutoff_table(b, n, bucket as f64 / 100.0, self.n_mc, &mut rng)?;
        let entry = Entry { c_star: est.c_star, est_cost: est.est_cost() };
        self.entries
            .write()
            .expect("cutoff table lock")
            .insert(key, entry);
        Ok(entry.c_star)
    }

    /// Fills every `(n, q)` combination in parallel.
    pub fn precompute(&self, b: usize, ns: &[usize], qs: &[f64]) -> Result<()> {
        let keys: Vec<(usize, f64)> = ns
            .iter()
            .flat_map(|&n| qs.iter().map(move |&q| (n, q)))
            .collect();
        keys.par_iter()
            .map(|&(n, q)| self.cutoff(b, n, q).map(|_| ()))
            .collect::<Result<Vec<()>>>()?;
        Ok(())
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{CUTOFF_CSV_HEADER}")?;
        for (&(b, n, bucket), e) in self.entries.read().expect("cutoff table lock").iter() {
            writeln!(out, "{b},{n},{:.2},{},{}", bucket as f64 / 100.0, e.c_star, e.est_cost)?;
        }
        Ok(())
    }

    /// Adds the rows of a previously written table.
    pub fn load_csv<R: Read>(&self, input: R) -> Result<usize> {
        let mut rows = 0;
        let mut lines = BufReader::new(input).lines();
        match lines.next() {
            Some(Ok(h)) if h.trim() == CUTOFF_CSV_HEADER => {}
            other => return Err(Error::Parse(format!("bad cutoff table header {other:?}"))),
        }
        let mut map = self.entries.write().expect("cutoff table lock");
        for line in lines {
            let line = line.map_err(|e| Error::Parse(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split(',').collect();
            let bad = || Error::Parse(format!("bad cutoff table row {line:?}"));
            if f.len() != 5 {
                return Err(bad());
            }
            let b: usize = f[0].parse().map_err(|_| bad())?;
            let n: usize = f[1].parse().map_err(|_| bad())?;
            let q: f64 = f[2].parse().map_err(|_| bad())?;
            let c_star: usize = f[3].parse().map_err(|_| bad())?;
            let est_cost: f64 = f[4].parse().map_err(|_| bad())?;
            map.insert((b, n, q_bucket(q)), Entry { c_star, est_cost });
            rows += 1;
        }
        Ok(rows)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_candidate_always_examined() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let est = compute_cutoff_table(1, 1, 0.5, 100, &mut rng).unwrap();
        assert_eq!(est.c_star, 0);
        assert_eq!(est.expected_costs.len(), 1);
    }

    #[test]
    fn argmin_not_worse_than_always_reject() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for (b, n, q) in [(1, 6, 0.3), (2, 8, 0.7), (5, 12, 0.1)] {
            let est = compute_cutoff_table(b, n, q, 400, &mut rng).unwrap();
            assert!(est.est_cost() <= est.expected_costs[n - 1]);
            assert!(est.expected_costs.iter().all(|&c| c >= 0.0));
        }
    }

    #[test]
    fn parameter_errors() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(compute_cutoff_table(1, 3, 0.5, 1, &mut rng).is_err());
        assert!(compute_cutoff_table(1, 3, 0.0, 10, &mut rng).is_err());
        assert!(compute_cutoff_table(1, 3, 1.0, 10, &mut rng).is_err());
        assert!(compute_cutoff_table(1, 0, 0.5, 10, &mut rng).is_err());
        assert!(compute_cutoff_table(0, 3, 0.5, 10, &mut rng).is_err());
    }

    #[test]
    fn deterministic_given_seed() {
        let a = compute_cutoff_table(2, 7, 0.4, 300, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let b = compute_cutoff_table(2, 7, 0.4, 300, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rank_cost_of_examples() {
        // Preselection 0.9, candidates 0.5 then 0.95; ranks: 0.95 -> 1, 0.9 -> 2.
        let inst = WsspInstance::from_scores(&[0.9], &[0.5, 0.95]).unwrap();
        let keep = run_strategy(&inst, &StrategySpec::ccm(2)).unwrap();
        assert_eq!(rank_cost(&inst, &keep), 1.0);
        let take = run_strategy(&inst, &StrategySpec::ccm(0)).unwrap();
        assert_eq!(rank_cost(&inst, &take), 0.0);
    }

    #[test]
    fn buckets() {
        assert_eq!(q_bucket(0.1), 10);
        assert_eq!(q_bucket(0.001), 1);
        assert_eq!(q_bucket(0.999), 99);
        assert_eq!(q_bucket(0.604), 60);
    }

    #[test]
    fn table_caches_and_round_trips_through_csv() {
        let table = CutoffTable::new(200, 5);
        let c1 = table.cutoff(2, 6, 0.4).unwrap();
        assert_eq!(table.cutoff(2, 6, 0.401).unwrap(), c1);
        assert_eq!(table.len(), 1);
        assert_eq!(table.cutoff(2, 0, 0.4).unwrap(), 0);
        table.precompute(2, &[3, 4], &[0.2, 0.6]).unwrap();
        assert_eq!(table.len(), 5);

        let mut buf = Vec::new();
        table.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("b,n,q,c_star,est_cost\n"));
        assert_eq!(text.lines().count(), 6);

        let other = CutoffTable::new(200, 5);
        assert_eq!(other.load_csv(text.as_bytes()).unwrap(), 5);
        let mut buf2 = Vec::new();
        other.write_csv(&mut buf2).unwrap();
        assert_eq!(text, String::from_utf8(buf2).unwrap());

        // Independent of request order.
        let fresh = CutoffTable::new(200, 5);
        fresh.precompute(2, &[4, 3], &[0.6, 0.2]).unwrap();
        assert_eq!(fresh.cutoff(2, 6, 0.4).unwrap(), c1);
        let mut buf3 = Vec::new();
        fresh.write_csv(&mut buf3).unwrap();
        assert_eq!(text, String::from_utf8(buf3).unwrap());

        assert!(other.load_csv("nope\n".as_bytes()).is_err());
        assert!(other.load_csv("b,n,q,c_star,est_cost\n1,2\n".as_bytes()).is_err());
    }
}
