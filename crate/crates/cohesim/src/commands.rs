//! The four batch entry points behind the thin CLI: single runs, training,
//! offline dump analysis, and topology dumps. Identical config + seed gives
//! byte-identical output files.

use crate::ccta::{aggregate, parse_dump, CoherenceMetrics};
use crate::config::RunConfig;
use crate::energy::{estimate, EnergyReport};
use crate::noc::{compute_routing_tables, xy_routing_table, RoutingTables};
use crate::optimizer::{run_training, Agent, AgentHyper, TrainConfig, TrainingHistory};
use crate::sim::{MetricsSnapshot, SimConfig, SystemSim};
use crate::topology::{build_topology, validate, NetworkGraph, TopologyKind, ValidationReport};
use std::fmt;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

#[derive(Debug)]
pub enum CmdError {
    /// Bad usage or configuration (exit code 1).
    Config(String),
    /// Simulation/IO failure at runtime (exit code 2).
    Runtime(String),
}

impl fmt::Display for CmdError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CmdError::Config(m) => write!(f, "config error: {m}"),
            CmdError::Runtime(m) => write!(f, "runtime error: {m}"),
        }
    }
}

impl std::error::Error for CmdError {}

fn runtime<E: fmt::Display>(e: E) -> CmdError {
    CmdError::Runtime(e.to_string())
}

fn write_file(dir: &Path, name: &str, content: &str) -> Result<PathBuf, CmdError> {
    fs::create_dir_all(dir).map_err(runtime)?;
    let path = dir.join(name);
    fs::write(&path, content).map_err(runtime)?;
    Ok(path)
}

fn build_graph_and_tables(cfg: &RunConfig) -> Result<(NetworkGraph, RoutingTables), CmdError> {
    let kind = cfg.kind().map_err(CmdError::Config)?;
    let mut graph =
        build_topology(kind, cfg.topology.cores).map_err(|e| CmdError::Config(e.to_string()))?;
    match cfg.routing.weights.as_str() {
        "uniform" => {}
        path => {
            let text = fs::read_to_string(path)
                .map_err(|e| CmdError::Config(format!("weights file {path}: {e}")))?;
            let loaded = NetworkGraph::from_edge_list(&text).map_err(CmdError::Config)?;
            if loaded.kind != graph.kind || loaded.links != graph.links {
                return Err(CmdError::Config(
                    "weights file does not match the configured topology".into(),
                ));
            }
            graph.link_weights = loaded.link_weights;
        }
    }
    let tables = if cfg.routing.mode == "xy" {
        xy_routing_table(&graph).map_err(runtime)?
    } else {
        compute_routing_tables(&graph, &graph.link_weights.clone()).map_err(runtime)?
    };
    Ok((graph, tables))
}

fn sim_config(cfg: &RunConfig) -> SimConfig {
    SimConfig {
        ccta: cfg.sim.ccta,
        swmr_check: cfg.sim.swmr_check,
        ..Default::default()
    }
}

pub struct RunSummary {
    pub snapshot: MetricsSnapshot,
    pub energy: EnergyReport,
    pub cycles: u64,
    pub trace_done: bool,
    pub out_dir: PathBuf,
}

/// CSV row with the run's network metrics and energy columns.
fn noc_metrics_csv(s: &MetricsSnapshot, e: &EnergyReport, cycles: u64) -> String {
    format!(
        "cycles,injected,ejected,L_t,D_t,link_util,dyn_J,static_J,total_J,J_per_packet\n{},{},{},{},{},{},{},{},{},{}\n",
        cycles,
        s.noc.injected,
        s.noc.ejected,
        s.noc.latency_avg,
        s.noc.delay_avg,
        s.noc.link_utilization,
        e.dynamic_j,
        e.static_j,
        e.total_j,
        e.j_per_packet
    )
}

fn ccta_aggregate_csv(m: &CoherenceMetrics) -> String {
    format!(
        "window_start,window_end,H_t,write_miss_avg,mem_fetch_avg,C_t\n{},{},{},{},{},{}\n",
        m.window.0,
        m.window.1,
        m.cpu_delay_avg,
        m.write_miss_time_avg,
        m.mem_fetch_time_avg,
        m.total_messages
    )
}

fn link_counts_csv(sim: &SystemSim) -> String {
    let mut out = String::from("link_a,link_b,flits\n");
    let graph = &sim.net.graph;
    let mut per_link = vec![0u64; graph.links.len()];
    for (wi, count) in sim.net.link_flits_total.iter().enumerate() {
        // Wires come in canonical order, two per link.
        per_link[wi / 2] += count;
    }
    for (i, &(a, b)) in graph.links.iter().enumerate() {
        out.push_str(&format!("{a},{b},{}\n", per_link[i]));
    }
    out
}

/// Execute one simulation and write the report files.
pub fn cmd_run(cfg: &RunConfig, out_dir: &Path, quiet: bool) -> Result<RunSummary, CmdError> {
    let (graph, tables) = build_graph_and_tables(cfg)?;
    let trace = cfg.build_trace().map_err(CmdError::Config)?;
    let node_count = graph.node_count;
    let mut sim = SystemSim::new(graph, tables, trace, sim_config(cfg));
    // COHESIM_VERBOSE=1 turns the per-cycle logs on without touching the
    // config file.
    let verbose = cfg.sim.events || std::env::var("COHESIM_VERBOSE").is_ok_and(|v| v == "1");
    if verbose {
        fs::create_dir_all(out_dir).map_err(runtime)?;
        let log = fs::File::create(out_dir.join("events.log")).map_err(runtime)?;
        sim.net.event_log = Some(Box::new(std::io::BufWriter::new(log)));
        let ptrace = fs::File::create(out_dir.join("protocol_trace.csv")).map_err(runtime)?;
        sim.protocol_trace = Some(Box::new(std::io::BufWriter::new(ptrace)));
    }
    while !(sim.trace_done() && sim.quiet()) && sim.now() < cfg.sim.cycles {
        sim.cycle(true).map_err(runtime)?;
    }
    if !sim.quiet() {
        sim.quiesce(200_000).map_err(runtime)?;
    }
    if let Some(log) = sim.net.event_log.as_mut() {
        log.flush().map_err(runtime)?;
    }
    if let Some(t) = sim.protocol_trace.as_mut() {
        t.flush().map_err(runtime)?;
    }
    let cycles = sim.now();
    let snapshot = sim.snapshot((0, cycles));
    let energy = estimate(
        sim.net.total_flit_hops,
        sim.net.total_router_traversals,
        snapshot.noc.ejected,
        cycles,
        node_count,
        &cfg.energy.params(),
    );
    write_file(
        out_dir,
        "noc_metrics.csv",
        &noc_metrics_csv(&snapshot, &energy, cycles),
    )?;
    write_file(
        out_dir,
        "ccta_aggregate.csv",
        &ccta_aggregate_csv(&snapshot.cc),
    )?;
    let dump = sim.ccta.as_ref().map(|c| c.dump_csv()).unwrap_or_default();
    write_file(out_dir, "ccta_transactions.csv", &dump)?;
    write_file(out_dir, "link_counts.csv", &link_counts_csv(&sim))?;
    let summary = RunSummary {
        snapshot,
        energy,
        cycles,
        trace_done: sim.trace_done(),
        out_dir: out_dir.to_path_buf(),
    };
    if !quiet {
        print_run_summary(&summary);
    }
    Ok(summary)
}

fn print_run_summary(s: &RunSummary) {
    let m = &s.snapshot;
    println!(
        "simulated {} cycles (trace complete: {})",
        s.cycles, s.trace_done
    );
    println!(
        "packets: injected {} ejected {}  L_t {:.3}  D_t {:.3}  link util {:.4}",
        m.noc.injected, m.noc.ejected, m.noc.latency_avg, m.noc.delay_avg, m.noc.link_utilization
    );
    println!(
        "coherence: C_t {}  H_t {:.3}  write-miss {:.3}  mem-fetch {:.3}  (WHS {} / RM {} / WM {} / WB {})",
        m.cc.total_messages,
        m.cc.cpu_delay_avg,
        m.cc.write_miss_time_avg,
        m.cc.mem_fetch_time_avg,
        m.cc.write_hit_s_count,
        m.cc.read_miss_count,
        m.cc.write_miss_count,
        m.cc.writeback_count
    );
    println!(
        "energy: dynamic {:.3e} J  static {:.3e} J  total {:.3e} J  per-packet {:.3e} J",
        s.energy.dynamic_j, s.energy.static_j, s.energy.total_j, s.energy.j_per_packet
    );
    println!("reports in {}", s.out_dir.display());
}

/// Train the agent and write history + periodic checkpoints.
pub fn cmd_train(
    cfg: &RunConfig,
    out_dir: &Path,
    quiet: bool,
) -> Result<TrainingHistory, CmdError> {
    let trace = cfg.build_trace().map_err(CmdError::Config)?;
    let t = &cfg.train;
    let mut train = TrainConfig::new(cfg.topology.cores, trace, cfg.sim.seed);
    train.episodes = t.episodes;
    train.epoch_cycles = t.epoch_cycles;
    train.max_epochs_per_episode = t.max_epochs;
    train.hyper = AgentHyper {
        gamma: t.gamma,
        q_lr: t.q_lr,
        w_lr: t.w_lr,
        sigma: t.sigma,
        ..AgentHyper::default()
    };
    train.alphas = t.alphas;
    train.divisors = cfg.state_divisors();
    train.sim = sim_config(cfg);
    fs::create_dir_all(out_dir).map_err(runtime)?;
    let every = t.checkpoint_every.max(1);
    let out = out_dir.to_path_buf();
    let (history, agent) = run_training(&train, |episode, agent, _| {
        if (episode + 1) % every == 0 {
            let _ = save_checkpoint(&out.join(format!("checkpoint_ep{}", episode + 1)), agent);
        }
    })
    .map_err(runtime)?;
    write_file(out_dir, "training_history.csv", &history.to_csv())?;
    save_checkpoint(&out_dir.join("checkpoint_final"), &agent)?;
    if !quiet {
        let first = history.episode_mean_reward(0);
        let last = history.episode_mean_reward(train.episodes.saturating_sub(1));
        println!(
            "trained {} episodes ({} epochs): mean reward {:.4} -> {:.4}",
            train.episodes,
            history.rows.len(),
            first,
            last
        );
        println!("history and checkpoints in {}", out_dir.display());
    }
    Ok(history)
}

pub fn save_checkpoint(dir: &Path, agent: &Agent) -> Result<(), CmdError> {
    fs::create_dir_all(dir).map_err(runtime)?;
    fs::write(dir.join("qnet.ckpt"), agent.q_net.save()).map_err(runtime)?;
    fs::write(dir.join("predictor.ckpt"), agent.predictor.save()).map_err(runtime)?;
    let meta = format!(
        "cores {}\nepisode {}\nbaseline {}\nsigma {}\n",
        agent.cores, agent.episode, agent.reward_baseline, agent.hyper.sigma
    );
    fs::write(dir.join("agent_meta.txt"), meta).map_err(runtime)?;
    Ok(())
}

/// Recompute aggregates from a raw transaction dump.
pub fn cmd_analyze(path: &Path, quiet: bool) -> Result<CoherenceMetrics, CmdError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CmdError::Config(format!("cannot read {}: {e}", path.display())))?;
    let records = parse_dump(&text).map_err(CmdError::Config)?;
    let end = records
        .iter()
        .filter_map(|r| r.end_cycle)
        .max()
        .map_or(0, |m| m + 1);
    let metrics = aggregate(records.iter(), (0, end));
    if !quiet {
        print!("{}", ccta_aggregate_csv(&metrics));
    }
    Ok(metrics)
}

/// Dump a topology's canonical edge list plus its validation report.
pub fn cmd_topologies(
    kind: TopologyKind,
    cores: usize,
    quiet: bool,
) -> Result<(String, ValidationReport), CmdError> {
    let graph = build_topology(kind, cores).map_err(|e| CmdError::Config(e.to_string()))?;
    let report = validate(&graph);
    let edge_list = graph.to_edge_list();
    if !quiet {
        print!("{edge_list}");
        println!(
            "# connected: {}  degree histogram: {:?}",
            report.connected, report.degree_histogram
        );
        if report.is_valid() {
            println!("# valid");
        } else {
            for v in &report.violations {
                println!("# violation: {v}");
            }
        }
    }
    Ok((edge_list, report))
}
