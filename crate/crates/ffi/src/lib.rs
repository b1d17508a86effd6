//! C interface to the simulator.
//!
//! Objects are opaque handles created by the `sdra_graph_*` constructors and `sdra_simulate`, and
//! released with the matching `*_free`. Every fallible call returns an
//! [`SdraStatus`]; on failure [`sdra_last_error`] describes the problem.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use sdra_core::control::{CapKind, ControlConfig, ControlMode, RecordOptions, Termination};
use sdra_core::rng::{stream_rng, Stream};
use sdra_core::selection::{
    cost as selection_cost, run_strategy as core_run_strategy, CutoffTable, PreselectedEntry,
    StrategyKind, StrategySpec, WsspInstance,
};
use sdra_core::sis::{EventKind, RateParams};
use sdra_core::{Error, Graph, GraphSpec, TrajectoryRecord};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SdraStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidParameter = 2,
    Capacity = 3,
    Structural = 4,
    Contract = 5,
    Io = 6,
    Parse = 7,
    /// A Rust panic was caught at the boundary.
    Internal = 8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SdraMode {
    FullDra = 0,
    Rdra = 1,
    Sdra = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SdraStrategy {
    Offline = 0,
    Ccm = 1,
    CcmStar = 2,
    Mean = 3,
    Median = 4,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SdraEnd {
    Extinct = 0,
    Absorbed = 1,
    CensoredTime = 2,
    CensoredEvents = 3,
}

/// Parameters of one controlled replica.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct SdraRunParams {
    pub beta: f64,
    pub rho: f64,
    pub delta: f64,
    pub budget: usize,
    pub mode: SdraMode,
    pub strategy: SdraStrategy,
    /// Fixed cutoff for `Ccm`; negative selects `round(sqrt(n)) - 1`.
    pub cutoff: i64,
    pub sample_ratio: f64,
    pub seed: u64,
    pub replica: u64,
    /// Non-positive means no time cap.
    pub max_time: f64,
    pub max_events: usize,
    /// Monte Carlo instances per cutoff-table entry (`CcmStar` only).
    pub cutoff_mc: usize,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SdraEvent {
    pub t: f64,
    pub node: usize,
    /// 1 for an infection, 0 for a recovery.
    pub infection: u8,
    pub n_infected: usize,
}

/// Opaque graph handle.
pub struct SdraGraph(Graph);

/// Opaque trajectory handle.
pub struct SdraTrajectory(TrajectoryRecord);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let msg = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

fn status_of(e: &Error) -> SdraStatus {
    match e {
        Error::Parameter(_) => SdraStatus::InvalidParameter,
        Error::Capacity(_) => SdraStatus::Capacity,
        Error::Structural(_) => SdraStatus::Structural,
        Error::Contract(_) => SdraStatus::Contract,
        Error::Io { .. } => SdraStatus::Io,
        Error::Parse(_) | Error::Json(_) => SdraStatus::Parse,
    }
}

fn guard<F: FnOnce() -> Result<(), SdraStatus>>(f: F) -> SdraStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SdraStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => {
            set_error("internal panic".into());
            SdraStatus::Internal
        }
    }
}

fn fail(e: Error) -> SdraStatus {
    let s = status_of(&e);
    set_error(e.to_string());
    s
}

fn null(what: &str) -> SdraStatus {
    set_error(format!("{what} is null"));
    SdraStatus::NullPointer
}

fn invalid(msg: impl Into<String>) -> SdraStatus {
    set_error(msg.into());
    SdraStatus::InvalidParameter
}

/// # Safety
/// `ptr` must be null or valid for `len` reads.
unsafe fn slice<'a, T>(ptr: *const T, len: usize, what: &str) -> Result<&'a [T], SdraStatus> {
    if len == 0 {
        return Ok(&[]);
    }
    if ptr.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(ptr, len))
}

/// Message of the last failed call on this thread, or null. The pointer is
/// valid until the next call into the library from the same thread.
#[no_mangle]
pub extern "C" fn sdra_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn sdra_version() -> *const c_char {
    static VERSION: &CStr = match CStr::from_bytes_with_nul(concat!(env!("CARGO_PKG_VERSION"), "\0").as_bytes()) {
        Ok(v) => v,
        Err(_) => panic!("version string"),
    };
    VERSION.as_ptr()
}

/// Builds a graph from `n_edges` pairs stored flat in `edges`
/// (`u0, v0, u1, v1, ...`).
///
/// # Safety
/// `edges` must be valid for `2 * n_edges` reads and `out` for one write.
#[no_mangle]
pub unsafe extern "C" fn sdra_graph_from_edges(
    n_nodes: usize,
    edges: *const usize,
    n_edges: usize,
    out: *mut *mut SdraGraph,
) -> SdraStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let flat = slice(edges, n_edges.checked_mul(2).ok_or_else(|| invalid("too many edges"))?, "edges")?;
        let pairs: Vec<(usize, usize)> = flat.chunks_exact(2).map(|p| (p[0], p[1])).collect();
        let g = Graph::from_edges(n_nodes, &pairs).map_err(fail)?;
        *out = Box::into_raw(Box::new(SdraGraph(g)));
        Ok(())
    })
}

unsafe fn generate(spec: GraphSpec, seed: u64, out: *mut *mut SdraGraph) -> SdraStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let mut rng = stream_rng(seed, 0, Stream::Aux);
        let g = spec.generate(&mut rng).map_err(fail)?;
        *out = Box::into_raw(Box::new(SdraGraph(g)));
        Ok(())
    })
}

/// Watts–Strogatz graph; same output as the CLI for the same `graph_seed`.
///
/// # Safety
/// `out` must be valid for one write.
#[no_mangle]
pub unsafe extern "C" fn sdra_graph_small_world(
    n_nodes: usize,
    m: usize,
    p_rewire: f64,
    seed: u64,
    out: *mut *mut SdraGraph,
) -> SdraStatus {
    generate(GraphSpec::SmallWorld { n_nodes, m, p_rewire }, seed, out)
}

/// Barabási–Albert graph; same output as the CLI for the same `graph_seed`.
///
/// # Safety
/// `out` must be valid for one write.
#[no_mangle]
pub unsafe extern "C" fn sdra_graph_scale_free(
    n_nodes: usize,
    m: usize,
    seed: u64,
    out: *mut *mut SdraGraph,
) -> SdraStatus {
    generate(GraphSpec::ScaleFree { n_nodes, m }, seed, out)
}

/// # Safety
/// `graph` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sdra_graph_n_nodes(graph: *const SdraGraph) -> usize {
    graph.as_ref().map_or(0, |g| g.0.n_nodes())
}

/// # Safety
/// `graph` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sdra_graph_n_edges(graph: *const SdraGraph) -> usize {
    graph.as_ref().map_or(0, |g| g.0.n_edges())
}

/// # Safety
/// `graph` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sdra_graph_free(graph: *mut SdraGraph) {
    if !graph.is_null() {
        drop(Box::from_raw(graph));
    }
}

/// Parameters with no cap, full DRA and a zero seed.
#[no_mangle]
pub extern "C" fn sdra_run_params_default() -> SdraRunParams {
    SdraRunParams {
        beta: 0.1,
        rho: 1.0,
        delta: 0.0,
        budget: 5,
        mode: SdraMode::FullDra,
        strategy: SdraStrategy::Offline,
        cutoff: -1,
        sample_ratio: 0.5,
        seed: 0,
        replica: 0,
        max_time: 0.0,
        max_events: 1_000_000,
        cutoff_mc: 2000,
    }
}

fn strategy_spec(strategy: SdraStrategy, cutoff: i64) -> StrategySpec {
    let spec = match strategy {
        SdraStrategy::Offline => StrategySpec::offline(),
        SdraStrategy::Ccm => StrategySpec::new(StrategyKind::Ccm),
        SdraStrategy::CcmStar => StrategySpec::ccm_star(),
        SdraStrategy::Mean => StrategySpec::mean(),
        SdraStrategy::Median => StrategySpec::median(),
    };
    if strategy == SdraStrategy::Ccm && cutoff >= 0 {
        spec.with_cutoff(cutoff as usize)
    } else {
        spec
    }
}

/// Simulates one controlled replica from the infection vector `x0`
/// (`n_nodes` bytes, nonzero = infected).
///
/// # Safety
/// `graph` and `params` must be live, `x0` valid for `n_nodes(graph)`
/// reads and `out` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn sdra_simulate(
    graph: *const SdraGraph,
    params: *const SdraRunParams,
    x0: *const u8,
    out: *mut *mut SdraTrajectory,
) -> SdraStatus {
    guard(|| {
        let graph = &graph.as_ref().ok_or_else(|| null("graph"))?.0;
        let p = *params.as_ref().ok_or_else(|| null("params"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let x0: Vec<bool> = slice(x0, graph.n_nodes(), "x0")?.iter().map(|&v| v != 0).collect();
        let rates = RateParams::new(p.beta, p.rho, p.delta).map_err(fail)?;
        let mode = match p.mode {
            SdraMode::FullDra => ControlMode::FullDra,
            SdraMode::Rdra => ControlMode::Rdra,
            SdraMode::Sdra => ControlMode::Sdra,
        };
        let cfg = ControlConfig::new(p.budget, mode, strategy_spec(p.strategy, p.cutoff), p.sample_ratio);
        cfg.validate().map_err(fail)?;
        if p.max_events == 0 {
            return Err(invalid("max_events must be at least 1"));
        }
        let caps = sdra_core::Caps {
            max_time: if p.max_time > 0.0 { p.max_time } else { f64::INFINITY },
            max_events: p.max_events,
        };
        let table = CutoffTable::new(p.cutoff_mc.max(2), p.seed);
        let rec = sdra_core::simulate_replica(
            graph,
            &rates,
            &cfg,
            &x0,
            p.seed,
            p.replica,
            caps,
            Some(&table),
            &RecordOptions::default(),
        )
        .map_err(fail)?;
        *out = Box::into_raw(Box::new(SdraTrajectory(rec)));
        Ok(())
    })
}

/// # Safety
/// `traj` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sdra_trajectory_n_events(traj: *const SdraTrajectory) -> usize {
    traj.as_ref().map_or(0, |t| t.0.events.len())
}

/// # Safety
/// `traj` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sdra_trajectory_n_rounds(traj: *const SdraTrajectory) -> usize {
    traj.as_ref().map_or(0, |t| t.0.rounds.len())
}

/// Time at which the run ended (extinction, absorption or the cap).
///
/// # Safety
/// `traj` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sdra_trajectory_end_time(traj: *const SdraTrajectory) -> f64 {
    traj.as_ref().map_or(f64::NAN, |t| t.0.end.time())
}

/// # Safety
/// `traj` must be live and `out` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn sdra_trajectory_end(traj: *const SdraTrajectory, out: *mut SdraEnd) -> SdraStatus {
    guard(|| {
        let t = &traj.as_ref().ok_or_else(|| null("trajectory"))?.0;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = match t.end {
            Termination::Extinct { .. } => SdraEnd::Extinct,
            Termination::Absorbed { .. } => SdraEnd::Absorbed,
            Termination::Censored { cap: CapKind::MaxTime, .. } => SdraEnd::CensoredTime,
            Termination::Censored { cap: CapKind::MaxEvents, .. } => SdraEnd::CensoredEvents,
        };
        Ok(())
    })
}

/// Copies event `index` into `out`.
///
/// # Safety
/// `traj` must be live and `out` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn sdra_trajectory_event(
    traj: *const SdraTrajectory,
    index: usize,
    out: *mut SdraEvent,
) -> SdraStatus {
    guard(|| {
        let t = &traj.as_ref().ok_or_else(|| null("trajectory"))?.0;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let e = t
            .events
            .get(index)
            .ok_or_else(|| invalid(format!("event index {index} out of range ({})", t.events.len())))?;
        *out = SdraEvent {
            t: e.t,
            node: e.node,
            infection: u8::from(e.kind == EventKind::Infection),
            n_infected: e.n_infected,
        };
        Ok(())
    })
}

/// Number of infected nodes at each of the `n_grid` times in `grid`
/// (last value carried forward).
///
/// # Safety
/// `traj` must be live, `grid` valid for `n_grid` reads and `out` for
/// `n_grid` writes.
#[no_mangle]
pub unsafe extern "C" fn sdra_trajectory_infected_on_grid(
    traj: *const SdraTrajectory,
    grid: *const f64,
    n_grid: usize,
    out: *mut usize,
) -> SdraStatus {
    guard(|| {
        let t = &traj.as_ref().ok_or_else(|| null("trajectory"))?.0;
        let grid = slice(grid, n_grid, "grid")?;
        if n_grid > 0 && out.is_null() {
            return Err(null("out"));
        }
        if grid.windows(2).any(|w| w[1] < w[0]) {
            return Err(invalid("grid must be non-decreasing"));
        }
        for (k, v) in t.infected_on_grid(grid).into_iter().enumerate() {
            *out.add(k) = v;
        }
        Ok(())
    })
}

/// # Safety
/// `traj` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sdra_trajectory_free(traj: *mut SdraTrajectory) {
    if !traj.is_null() {
        drop(Box::from_raw(traj));
    }
}

/// Runs one selection round on raw scores. `pre` holds the `b` preselected
/// scores (NaN marks an entry that no longer needs its resource) and
/// `cand` the candidates in arrival order. Writes one accept flag per
/// candidate and the cost of the final allocation.
///
/// # Safety
/// `pre` must be valid for `b` reads, `cand` for `n` reads, `accept` for
/// `n` writes and `cost` for one write.
#[no_mangle]
pub unsafe extern "C" fn sdra_run_strategy(
    pre: *const f64,
    b: usize,
    cand: *const f64,
    n: usize,
    strategy: SdraStrategy,
    cutoff: i64,
    accept: *mut u8,
    cost: *mut f64,
) -> SdraStatus {
    guard(|| {
        let pre = slice(pre, b, "pre")?;
        let cand = slice(cand, n, "cand")?;
        if cost.is_null() || (n > 0 && accept.is_null()) {
            return Err(null("output"));
        }
        if strategy == SdraStrategy::CcmStar {
            return Err(invalid("ccm_star needs a quality estimate; pass Ccm with an explicit cutoff"));
        }
        let scored = WsspInstance::from_scores(&vec![0.0; b], cand).map_err(fail)?;
        let preselection = pre
            .iter()
            .enumerate()
            .map(|(i, &s)| if s.is_nan() { PreselectedEntry::recovered(i) } else { PreselectedEntry::live(i, s) })
            .collect();
        let inst = WsspInstance::new(b, preselection, scored.candidates).map_err(fail)?;
        let trace = core_run_strategy(&inst, &strategy_spec(strategy, cutoff)).map_err(fail)?;
        for (j, &a) in trace.accept.iter().enumerate() {
            *accept.add(j) = u8::from(a);
        }
        *cost = selection_cost(&inst, &trace);
        Ok(())
    })
}
