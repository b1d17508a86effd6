use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use sdra_core::control::{simulate_replica, Caps, ControlConfig, ControlMode, RecordOptions};
use sdra_core::experiment::{
    eta_csv_path, run_campaign, snapshot_score_distribution, sweep_sample_size, Arm, ExperimentConfig,
    ScoreSnapshot, ETA_CSV_HEADER, FORMAT_LINE,
};
use sdra_core::graph::{Graph, GraphSpec};
use sdra_core::selection::StrategySpec;
use sdra_core::sis::RateParams;
use sdra_core::{stats, Error};

fn small(out: &Path) -> ExperimentConfig {
    ExperimentConfig {
        graph: GraphSpec::SmallWorld { n_nodes: 30, m: 4, p_rewire: 0.1 },
        rates: RateParams::new(0.3, 1.0, 0.0).unwrap(),
        budget: 3,
        initial_infected_fraction: 0.3,
        replicas: 20,
        horizon: 5.0,
        grid_step: 0.5,
        cutoff_mc: 100,
        out_dir: out.to_path_buf(),
        ..Default::default()
    }
}

fn read_dir_sorted(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap())
        .map(|e| (e.file_name().into_string().unwrap(), fs::read(e.path()).unwrap()))
        .collect();
    files.sort();
    files
}

fn eta_column(path: &Path) -> Vec<f64> {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some(FORMAT_LINE));
    assert_eq!(lines.next(), Some(ETA_CSV_HEADER));
    lines.map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect()
}

#[test]
fn repeated_campaigns_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let mut cfg = small(a.path());
    cfg.replicas = 2;
    run_campaign(&cfg, Some(1)).unwrap();
    cfg.out_dir = b.path().to_path_buf();
    // A different worker count must not change the numbers.
    run_campaign(&cfg, Some(3)).unwrap();
    let strip = |files: Vec<(String, Vec<u8>)>| -> Vec<(String, Vec<u8>)> {
        files.into_iter().filter(|(n, _)| n != "config.json").collect()
    };
    assert_eq!(strip(read_dir_sorted(a.path())), strip(read_dir_sorted(b.path())));
}

#[test]
fn outputs_echo_config_and_cover_the_grid() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small(dir.path());
    let results = run_campaign(&cfg, None).unwrap();
    assert_eq!(results.len(), cfg.strategies.len());
    for r in &results {
        assert_eq!(r.series.eta_stderr[0], 0.0);
        assert!(r.series.eta_stderr.iter().all(|s| s.is_finite() && *s >= 0.0));
    }

    let echoed = ExperimentConfig::load(&dir.path().join("config.json")).unwrap();
    assert_eq!(echoed, cfg);
    let graph = Graph::read_edge_list(fs::File::open(dir.path().join("graph.edgelist")).unwrap()).unwrap();
    assert_eq!(graph.n_edges(), 60);
    assert!(dir.path().join("summary.json").exists());

    for arm in &cfg.strategies {
        let eta = eta_column(&eta_csv_path(dir.path(), &arm.label(), 0.5));
        assert_eq!(eta.len(), cfg.grid().len());
        // Nine of thirty nodes start infected in every replica.
        assert_eq!(eta[0], 0.3);
        assert!(eta.iter().all(|v| (0.0..=1.0).contains(v)));
    }
}

#[test]
fn no_recovery_means_no_decrease() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small(dir.path());
    cfg.rates = RateParams::new(0.3, 0.0, 0.0).unwrap();
    for res in run_campaign(&cfg, None).unwrap() {
        for w in res.series.eta_mean.windows(2) {
            assert!(w[1] >= w[0], "{}: {:?}", res.label(), w);
        }
    }
}

#[test]
fn unwritable_output_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let cfg = small(&blocker.join("sub"));
    assert!(matches!(run_campaign(&cfg, None), Err(Error::Io { .. })));
}

#[test]
fn score_snapshots() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small(dir.path());
    cfg.replicas = 200;
    cfg.strategies = vec![Arm::rdra(), Arm::sdra(StrategySpec::ccm_star())];
    let snaps = snapshot_score_distribution(&cfg, &[1, 5, 1_000_000], None).unwrap();
    assert_eq!(snaps.len(), 6);
    for s in &snaps {
        let mass: f64 = s.histogram().iter().map(|h| h.2).sum();
        if s.round == 1_000_000 {
            assert!(s.warning && s.scores.is_empty() && s.n_replicas == 0);
            let text = fs::read_to_string(dir.path().join(format!("scores_{}_k{}.csv", s.label, s.round))).unwrap();
            assert!(text.contains("warning"));
        } else {
            assert!(!s.warning);
            assert!((mass - 1.0).abs() < 1e-9);
        }
    }
    let round1: Vec<&ScoreSnapshot> = snaps.iter().filter(|s| s.round == 1).collect();
    assert!(stats::ks_two_sample(&round1[0].scores, &round1[1].scores) > 0.01);
    assert!(snapshot_score_distribution(&cfg, &[0], None).is_err());
}

#[test]
fn isolated_nodes_score_zero() {
    let g = Graph::from_edges(6, &[]).unwrap();
    let rates = RateParams::new(0.5, 1.0, 0.0).unwrap();
    let cfg = ControlConfig::new(2, ControlMode::Rdra, StrategySpec::offline(), 0.5);
    let opts = RecordOptions { snapshot_rounds: BTreeSet::from([1]), ..Default::default() };
    let rec = simulate_replica(&g, &rates, &cfg, &[true; 6], 0, 0, Caps::default(), None, &opts).unwrap();
    let snap = ScoreSnapshot {
        label: "rdra".into(),
        alpha: 0.5,
        round: 1,
        scores: rec.score_snapshots[&1].clone(),
        n_replicas: 1,
        warning: false,
    };
    assert_eq!(snap.histogram(), vec![(0, 6, 1.0)]);
}

#[test]
fn sample_size_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small(dir.path());
    cfg.replicas = 500;
    cfg.strategies = vec![Arm::rdra(), Arm::sdra(StrategySpec::mean())];
    let res = sweep_sample_size(&cfg, &[0.0, 0.5, 0.0, 1.0], None).unwrap();
    let labels: Vec<(String, f64)> = res.iter().map(|r| (r.label(), r.alpha)).collect();
    assert_eq!(
        labels,
        vec![
            ("mean".to_string(), 0.0),
            ("mean".to_string(), 0.5),
            ("mean".to_string(), 1.0),
            ("rdra_full".to_string(), 1.0),
        ]
    );
    assert!(dir.path().join("sweep_rdra_full_a1.00.csv").exists());
    assert!(dir.path().join("sweep_mean_a0.00.csv").exists());

    // Without a sample nothing moves after the first round.
    let frozen = stats::mean(&res[0].time_avg_eta);
    for r in &res[1..] {
        assert!(stats::mean(&r.time_avg_eta) <= frozen, "{} at {}", r.label(), r.alpha);
    }
    assert!(sweep_sample_size(&cfg, &[1.5], None).is_err());
}

#[test]
fn zero_ratio_keeps_the_initial_allocation() {
    let g = Graph::from_edges(5, &[(0, 1), (1, 2), (2, 3), (3, 4)]).unwrap();
    let rates = RateParams::new(0.8, 1.0, 0.0).unwrap();
    let cfg = ControlConfig::new(2, ControlMode::Sdra, StrategySpec::mean(), 0.0);
    let opts = RecordOptions { allocations: true, ..Default::default() };
    let rec = simulate_replica(
        &g, &rates, &cfg, &[true, false, true, false, true], 4, 0,
        Caps { max_time: 20.0, max_events: 10_000 }, None, &opts,
    )
    .unwrap();
    let initial: BTreeSet<usize> = rec.initial_allocation.iter().copied().collect();
    for round in &rec.rounds {
        assert_eq!(round.sample_size, 0);
        let held: BTreeSet<usize> = round.allocation.clone().unwrap().into_iter().collect();
        assert!(held.is_subset(&initial));
    }
}
