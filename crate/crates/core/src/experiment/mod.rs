//! Monte Carlo campaigns: many seeded replicas per (strategy, alpha),
//! aggregated on a time grid and written as plot-ready CSV.
//!
//! Replica `k` of every arm uses the same initial infection and the same
//! epidemic stream, so arms can be compared pairwise.

mod config;

pub use config::{dedup_alphas, Arm, ExperimentConfig};

use std::collections::{BTreeMap, BTreeSet};
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::seq::index;
use rayon::prelude::*;
use serde::Serialize;

use crate::control::{simulate_replica, Caps, CapKind, RecordOptions, Termination};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::rng::{stream_rng, Stream};
use crate::selection::{CutoffTable, StrategyKind, StrategySpec};
use crate::stats;

pub const ETA_CSV_HEADER: &str = "t,eta_mean,eta_stderr,n_censored";
pub const HISTOGRAM_CSV_HEADER: &str = "score,count,density";
/// First line of every CSV the harness writes.
pub const FORMAT_LINE: &str = "# sdra-output v1";

/// Mean infected fraction on the time grid, for one arm and one ratio.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsSeries {
    pub label: String,
    pub alpha: f64,
    pub t: Vec<f64>,
    pub eta_mean: Vec<f64>,
    pub eta_stderr: Vec<f64>,
    pub n_censored: Vec<usize>,
}

impl MetricsSeries {
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{FORMAT_LINE}")?;
        writeln!(out, "{ETA_CSV_HEADER}")?;
        for k in 0..self.t.len() {
            writeln!(
                out,
                "{},{},{},{}",
                self.t[k], self.eta_mean[k], self.eta_stderr[k], self.n_censored[k]
            )?;
        }
        Ok(())
    }
}

/// Outcome of one arm at one ratio.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ArmResult {
    pub arm: Arm,
    pub alpha: f64,
    pub series: MetricsSeries,
    /// Per replica, the infected fraction averaged over the grid.
    pub time_avg_eta: Vec<f64>,
    /// Per replica, the mean selection cost over its rounds (0 without rounds).
    pub mean_round_cost: Vec<f64>,
    pub n_extinct: usize,
    pub n_absorbed: usize,
    pub n_censored: usize,
}

impl ArmResult {
    pub fn label(&self) -> String {
        self.arm.label()
    }

    fn summary(&self) -> serde_json::Value {
        serde_json::json!({
            "label": self.label(),
            "mode": self.arm.mode,
            "strategy": self.arm.strategy,
            "alpha": self.alpha,
            "replicas": self.time_avg_eta.len(),
            "time_avg_eta_mean": stats::mean(&self.time_avg_eta),
            "time_avg_eta_stderr": stats::std_error(&self.time_avg_eta),
            "mean_round_cost": stats::mean(&self.mean_round_cost),
            "n_extinct": self.n_extinct,
            "n_absorbed": self.n_absorbed,
            "n_censored": self.n_censored,
        })
    }
}

/// Scores of infected nodes pooled over replicas at one round index.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoreSnapshot {
    pub label: String,
    pub alpha: f64,
    pub round: usize,
    pub scores: Vec<f64>,
    /// Replicas that reached the round.
    pub n_replicas: usize,
    /// Set when no replica reached the round.
    pub warning: bool,
}

impl ScoreSnapshot {
    /// `(score, count, density)` over unit-width integer bins, empty bins included.
    pub fn histogram(&self) -> Vec<(i64, usize, f64)> {
        if self.scores.is_empty() {
            return Vec::new();
        }
        let bins: Vec<i64> = self.scores.iter().map(|s| s.round() as i64).collect();
        let lo = *bins.iter().min().expect("nonempty");
        let hi = *bins.iter().max().expect("nonempty");
        let mut counts = vec![0usize; (hi - lo + 1) as usize];
        for b in bins {
            counts[(b - lo) as usize] += 1;
        }
        let total = self.scores.len() as f64;
        counts
            .into_iter()
            .enumerate()
            .map(|(k, c)| (lo + k as i64, c, c as f64 / total))
            .collect()
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{FORMAT_LINE}")?;
        if self.warning {
            writeln!(out, "# warning: round {} not reached by any replica", self.round)?;
        }
        writeln!(out, "{HISTOGRAM_CSV_HEADER}")?;
        for (s, c, d) in self.histogram() {
            writeln!(out, "{s},{c},{d}")?;
        }
        Ok(())
    }
}

/// Shared read-only inputs of a campaign.
pub struct Campaign {
    pub cfg: ExperimentConfig,
    pub graph: Graph,
    pub table: CutoffTable,
    grid: Vec<f64>,
    pool: rayon::ThreadPool,
}

impl Campaign {
    /// Validates the config, builds the graph and the worker pool
    /// (`jobs = None` uses all cores), and preloads the cutoff table if
    /// the config names an existing file.
    pub fn new(cfg: ExperimentConfig, jobs: Option<usize>) -> Result<Self> {
        cfg.validate()?;
        let graph = cfg.graph.generate(&mut stream_rng(cfg.graph_seed, 0, Stream::Aux))?;
        let table = CutoffTable::new(cfg.cutoff_mc, cfg.cutoff_seed);
        if let Some(path) = &cfg.cutoff_table {
            if path.exists() {
                let file = File::open(path).map_err(|e| Error::io(path, e))?;
                table.load_csv(file)?;
            }
        }
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs.unwrap_or(0))
            .build()
            .map_err(|e| Error::param(format!("cannot start worker pool: {e}")))?;
        let grid = cfg.grid();
        Ok(Campaign { cfg, graph, table, grid, pool })
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    /// Initial infection of replica `k`, shared by every arm.
    pub fn initial_state(&self, replica: u64) -> Vec<bool> {
        let n = self.graph.n_nodes();
        let mut rng = stream_rng(self.cfg.master_seed, replica, Stream::Init);
        let mut x0 = vec![false; n];
        for i in index::sample(&mut rng, n, self.cfg.initial_infected().min(n)) {
            x0[i] = true;
        }
        x0
    }

    fn caps(&self) -> Caps {
        Caps { max_time: self.cfg.horizon, max_events: self.cfg.max_events }
    }

    /// Runs every replica of one arm and aggregates in replica order.
    /// Also returns pooled score snapshots for `snapshot_rounds`.
    pub fn run_arm(
        &self,
        arm: &Arm,
        alpha: f64,
        snapshot_rounds: &BTreeSet<usize>,
    ) -> Result<(ArmResult, Vec<ScoreSnapshot>)> {
        let ctl = self.cfg.control_config(arm, alpha);
        ctl.validate()?;
        let options = RecordOptions { allocations: false, snapshot_rounds: snapshot_rounds.clone() };
        let n = self.graph.n_nodes() as f64;
        let table = (arm.strategy.kind == StrategyKind::CcmStar).then_some(&self.table);

        struct ReplicaOut {
            counts: Vec<usize>,
            eta: Vec<f64>,
            censored_at: Option<f64>,
            end: Termination,
            mean_cost: f64,
            snapshots: BTreeMap<usize, Vec<f64>>,
        }
        let outs: Vec<ReplicaOut> = self.pool.install(|| {
            (0..self.cfg.replicas as u64)
                .into_par_iter()
                .map(|replica| {
                    let x0 = self.initial_state(replica);
                    let rec = simulate_replica(
                        &self.graph,
                        &self.cfg.rates,
                        &ctl,
                        &x0,
                        self.cfg.master_seed,
                        replica,
                        self.caps(),
                        table,
                        &options,
                    )?;
                    let counts = rec.infected_on_grid(&self.grid);
                    let eta = counts.iter().map(|&c| c as f64 / n).collect();
                    let censored_at = match rec.end {
                        Termination::Censored { t, cap: CapKind::MaxEvents } => Some(t),
                        _ => None,
                    };
                    let costs: Vec<f64> = rec.rounds.iter().map(|r| r.cost).collect();
                    Ok(ReplicaOut {
                        counts,
                        eta,
                        censored_at,
                        end: rec.end,
                        mean_cost: if costs.is_empty() { 0.0 } else { stats::mean(&costs) },
                        snapshots: rec.score_snapshots,
                    })
                })
                .collect::<Result<Vec<_>>>()
        })?;

        let g = self.grid.len();
        let mut eta_mean = Vec::with_capacity(g);
        let mut eta_stderr = Vec::with_capacity(g);
        let mut n_censored = Vec::with_capacity(g);
        let r = outs.len() as f64;
        for (k, &t) in self.grid.iter().enumerate() {
            // Integer sums keep e.g. the t = 0 values exact.
            let (sum, sum_sq) = outs.iter().fold((0u128, 0u128), |(s, q), o| {
                let c = o.counts[k] as u128;
                (s + c, q + c * c)
            });
            eta_mean.push(sum as f64 / (r * n));
            let stderr = if outs.len() > 1 {
                let ss = (sum_sq * outs.len() as u128 - sum * sum) as f64 / r;
                (ss / (r - 1.0) / r).sqrt() / n
            } else {
                0.0
            };
            eta_stderr.push(stderr);
            n_censored.push(outs.iter().filter(|o| o.censored_at.is_some_and(|c| c < t)).count());
        }

        let label = arm.label();
        let snapshots = snapshot_rounds
            .iter()
            .map(|&round| {
                let mut scores = Vec::new();
                let mut n_replicas = 0;
                for o in &outs {
                    if let Some(s) = o.snapshots.get(&round) {
                        scores.extend_from_slice(s);
                        n_replicas += 1;
                    }
                }
                ScoreSnapshot {
                    label: label.clone(),
                    alpha,
                    round,
                    warning: n_replicas == 0,
                    scores,
                    n_replicas,
                }
            })
            .collect();

        let result = ArmResult {
            arm: arm.clone(),
            alpha,
            series: MetricsSeries {
                label,
                alpha,
                t: self.grid.clone(),
                eta_mean,
                eta_stderr,
                n_censored,
            },
            time_avg_eta: outs.iter().map(|o| stats::mean(&o.eta)).collect(),
            mean_round_cost: outs.iter().map(|o| o.mean_cost).collect(),
            n_extinct: outs.iter().filter(|o| matches!(o.end, Termination::Extinct { .. })).count(),
            n_absorbed: outs.iter().filter(|o| matches!(o.end, Termination::Absorbed { .. })).count(),
            n_censored: outs.iter().filter(|o| matches!(o.end, Termination::Censored { .. })).count(),
        };
        Ok((result, snapshots))
    }

    /// Writes the resolved config, the graph, and (if non-empty) the
    /// cutoff table into the output directory.
    fn write_common(&self, out_dir: &Path) -> Result<()> {
        fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
        let config = serde_json::to_string_pretty(&self.cfg)?;
        write_file(&out_dir.join("config.json"), |w| writeln!(w, "{config}"))?;
        let edges = self.graph.to_edge_list();
        write_file(&out_dir.join("graph.edgelist"), |w| w.write_all(edges.as_bytes()))?;
        Ok(())
    }

    fn write_table(&self, out_dir: &Path) -> Result<()> {
        if !self.table.is_empty() {
            write_file(&out_dir.join("cutoff_table.csv"), |w| self.table.write_csv(w))?;
        }
        Ok(())
    }
}

fn write_file<F>(path: &Path, f: F) -> Result<()>
where
    F: FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
{
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    f(&mut w).and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
}

fn alpha_tag(alpha: f64) -> String {
    format!("a{alpha:.2}")
}

fn write_summary(path: &Path, results: &[ArmResult]) -> Result<()> {
    let summary: Vec<serde_json::Value> = results.iter().map(ArmResult::summary).collect();
    let text = serde_json::to_string_pretty(&summary)?;
    write_file(path, |w| writeln!(w, "{text}"))
}

/// Every arm at every ratio; one `eta_<label>_a<alpha>.csv` per pair.
pub fn run_campaign(cfg: &ExperimentConfig, jobs: Option<usize>) -> Result<Vec<ArmResult>> {
    let campaign = Campaign::new(cfg.clone(), jobs)?;
    let out_dir = cfg.out_dir.clone();
    campaign.write_common(&out_dir)?;
    let mut results = Vec::new();
    for &alpha in &dedup_alphas(&cfg.alphas) {
        for arm in &cfg.strategies {
            let (res, _) = campaign.run_arm(arm, alpha, &BTreeSet::new())?;
            let path = eta_csv_path(&out_dir, &res.label(), alpha);
            write_file(&path, |w| res.series.write_csv(w))?;
            results.push(res);
        }
    }
    write_summary(&out_dir.join("summary.json"), &results)?;
    campaign.write_table(&out_dir)?;
    Ok(results)
}

/// Score histograms of every arm (first configured ratio) at the given
/// round indices; one `scores_<label>_k<round>.csv` per pair.
pub fn snapshot_score_distribution(
    cfg: &ExperimentConfig,
    rounds: &[usize],
    jobs: Option<usize>,
) -> Result<Vec<ScoreSnapshot>> {
    if rounds.is_empty() || rounds.contains(&0) {
        return Err(Error::param("round indices start at 1"));
    }
    let campaign = Campaign::new(cfg.clone(), jobs)?;
    let out_dir = cfg.out_dir.clone();
    campaign.write_common(&out_dir)?;
    let rounds: BTreeSet<usize> = rounds.iter().copied().collect();
    let alpha = cfg.alphas[0];
    let mut all = Vec::new();
    for arm in &cfg.strategies {
        let (_, snaps) = campaign.run_arm(arm, alpha, &rounds)?;
        for s in snaps {
            let path = out_dir.join(format!("scores_{}_k{}.csv", s.label, s.round));
            write_file(&path, |w| s.write_csv(w))?;
            all.push(s);
        }
    }
    campaign.write_table(&out_dir)?;
    Ok(all)
}

/// The SDRA arm to sweep: the first configured one, else CCM*.
pub fn sweep_arm(cfg: &ExperimentConfig) -> Arm {
    cfg.strategies
        .iter()
        .find(|a| a.mode == crate::control::ControlMode::Sdra)
        .cloned()
        .unwrap_or_else(|| Arm::sdra(StrategySpec::ccm_star()))
}

/// The sweep arm at each distinct ratio, followed by the full-access RDRA
/// reference labelled `rdra_full`.
pub fn sweep_sample_size(
    cfg: &ExperimentConfig,
    alphas: &[f64],
    jobs: Option<usize>,
) -> Result<Vec<ArmResult>> {
    if alphas.iter().any(|a| !(0.0..=1.0).contains(a)) {
        return Err(Error::param("sample ratios must be in [0, 1]"));
    }
    let campaign = Campaign::new(cfg.clone(), jobs)?;
    let out_dir = cfg.out_dir.clone();
    campaign.write_common(&out_dir)?;
    let arm = sweep_arm(cfg);
    let mut runs: Vec<(Arm, f64)> = dedup_alphas(alphas).into_iter().map(|a| (arm.clone(), a)).collect();
    runs.push((Arm::rdra().labelled("rdra_full"), 1.0));
    let mut results = Vec::new();
    for (arm, alpha) in runs {
        let (res, _) = campaign.run_arm(&arm, alpha, &BTreeSet::new())?;
        let path = out_dir.join(format!("sweep_{}_{}.csv", res.label(), alpha_tag(alpha)));
        write_file(&path, |w| res.series.write_csv(w))?;
        results.push(res);
    }
    write_summary(&out_dir.join("summary.json"), &results)?;
    campaign.write_table(&out_dir)?;
    Ok(results)
}

/// Cutoff table for budget `b` over `n = 1..=n_max` and the given
/// qualities, written to `path`.
pub fn write_cutoff_table(
    b: usize,
    n_max: usize,
    qualities: &[f64],
    n_mc: usize,
    seed: u64,
    path: &Path,
    jobs: Option<usize>,
) -> Result<CutoffTable> {
    let table = CutoffTable::new(n_mc, seed);
    let ns: Vec<usize> = (1..=n_max).collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(0))
        .build()
        .map_err(|e| Error::param(format!("cannot start worker pool: {e}")))?;
    pool.install(|| table.precompute(b, &ns, qualities))?;
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    write_file(path, |w| table.write_csv(w))?;
    Ok(table)
}

/// Output path of an arm's eta series in a campaign directory.
pub fn eta_csv_path(out_dir: &Path, label: &str, alpha: f64) -> PathBuf {
    out_dir.join(format!("eta_{label}_{}.csv", alpha_tag(alpha)))
}
