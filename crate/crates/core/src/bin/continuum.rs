use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use continuum::agents::{
    init_local, pretrain_local, replay_bytes, train_hierarchy, Checkpoint, CheckpointError, EpisodeStats, TrainConfig, TrainError,
};
use continuum::harness::{
    compare, fmt_f64, load_scenario, run_experiment, to_json, write_json, CompareError, ExperimentError, ExperimentOptions, PolicySource,
    RunReport, Scenario, ScenarioError, Table,
};
use continuum::model::partition_resources;
use continuum::placement::{oracle_from, HeuristicKind, PlacementState};

#[derive(Parser)]
#[command(name = "continuum", version, about = "Hierarchical placement of multi-component applications on Cloud-Edge graphs")]
struct Cli {
    /// Worker threads; 1 keeps every run single-worker.
    #[arg(long, global = true, default_value_t = 1)]
    workers: usize,
    /// Output directory; results go to stdout when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Check a scenario file and summarize it.
    Validate { scenario: PathBuf },
    /// Print the zone of every node.
    Partition {
        scenario: PathBuf,
        #[arg(long)]
        zones: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Evaluate a placement heuristic or the random policy.
    Baseline {
        scenario: PathBuf,
        /// first_fit, best_fit, worst_fit, round_robin or random.
        #[arg(long)]
        kind: String,
        #[arg(long, default_value_t = 10)]
        episodes: usize,
        #[arg(long)]
        seed: Option<u64>,
        /// Report the gap to the exact optimum.
        #[arg(long)]
        oracle: bool,
        /// Record wall-clock seconds per episode.
        #[arg(long)]
        timing: bool,
    },
    /// Pretrain one zone's local policy.
    Pretrain {
        scenario: PathBuf,
        #[arg(long)]
        zone: usize,
        #[arg(long)]
        episodes: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        timing: bool,
    },
    /// Pretrain every zone, then train global and local policies jointly.
    Train {
        scenario: PathBuf,
        #[arg(long)]
        pretrain_episodes: Option<usize>,
        #[arg(long)]
        joint_episodes: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        timing: bool,
    },
    /// Evaluate a checkpoint.
    Eval {
        scenario: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        greedy: bool,
        #[arg(long, default_value_t = 10)]
        episodes: usize,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        oracle: bool,
        #[arg(long)]
        timing: bool,
    },
    /// Exhaustively solve a single-application scenario.
    Oracle { scenario: PathBuf },
    /// Tabulate run reports side by side.
    Compare {
        #[arg(required = true, num_args = 2..)]
        reports: Vec<PathBuf>,
    },
}

/// Where results go: files under `--out`, or stdout.
struct Sink {
    out: Option<PathBuf>,
    format: Format,
}

impl Sink {
    fn new(out: Option<PathBuf>, format: Format) -> Result<Self> {
        if let Some(dir) = &out {
            std::fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
        }
        Ok(Self { out, format })
    }

    fn path(&self, name: &str) -> Option<PathBuf> {
        self.out.as_ref().map(|d| d.join(name))
    }

    /// A JSON document; also rendered as `table` on stdout in csv format.
    fn document<T: Serialize>(&self, name: &str, value: &T, table: Option<&Table>) -> Result<()> {
        match self.path(&format!("{name}.json")) {
            Some(p) => write_json(&p, value).with_context(|| format!("cannot write {}", p.display()))?,
            None => match (self.format, table) {
                (Format::Csv, Some(t)) => print!("{}", t.to_csv()),
                _ => print!("{}", to_json(value)),
            },
        }
        Ok(())
    }

    /// A metric stream, written as CSV or JSON depending on `--format`.
    fn stream<T: Serialize>(&self, name: &str, rows: &T, table: &Table) -> Result<()> {
        let (file, text) = match self.format {
            Format::Csv => (format!("{name}.csv"), table.to_csv()),
            Format::Json => (format!("{name}.json"), to_json(rows)),
        };
        match self.path(&file) {
            Some(p) => std::fs::write(&p, text).with_context(|| format!("cannot write {}", p.display()))?,
            None => print!("{text}"),
        }
        Ok(())
    }

    fn report(&self, report: &RunReport) -> Result<()> {
        if self.out.is_some() {
            self.document("report", report, None)?;
            if self.format == Format::Csv {
                self.stream("episodes", &report.episodes, &report.episode_table())?;
                self.stream("summary", &report.summary, &report.summary_table())?;
            }
            Ok(())
        } else {
            self.document("report", report, Some(&report.episode_table()))
        }
    }
}

fn curve_table(curve: &[EpisodeStats]) -> Table {
    let zones = curve.first().map_or(0, |s| s.local_rewards.len());
    let mut header: Vec<String> =
        ["episode", "zone", "reward", "global_reward", "objective", "ru", "ct_app", "svr", "failed", "steps"].map(String::from).to_vec();
    header.extend((0..zones).map(|z| format!("local_reward_{z}")));
    let mut t = Table::new(header);
    for s in curve {
        let mut row = vec![s.episode.to_string(), s.zone.map(|z| z.to_string()).unwrap_or_default()];
        row.extend([s.reward, s.global_reward, s.objective, s.ru, s.ct_app, s.svr].map(fmt_f64));
        row.extend([s.failed.to_string(), s.steps.to_string()]);
        row.extend(s.local_rewards.iter().copied().map(fmt_f64));
        t.push(row);
    }
    t
}

fn train_config(scenario: &Scenario, seed: Option<u64>) -> TrainConfig {
    let mut cfg = scenario.file.train.clone();
    if let Some(s) = seed {
        cfg.seed = s;
    }
    cfg
}

fn options(scenario: &Scenario, workers: usize, episodes: usize, seed: Option<u64>, oracle: bool, timing: bool) -> ExperimentOptions {
    ExperimentOptions {
        episodes,
        seed: seed.unwrap_or(scenario.file.seed),
        greedy: false,
        oracle,
        parallel: workers > 1,
        wall_clock: timing,
    }
}

fn load(path: &Path) -> Result<Scenario> {
    Ok(load_scenario(path)?)
}

fn run(cli: Cli) -> Result<()> {
    let sink = Sink::new(cli.out, cli.format)?;
    match cli.command {
        Command::Validate { scenario } => {
            let s = load(&scenario)?;
            let f = &s.file;
            let summary = json!({
                "valid": true,
                "name": f.name,
                "nodes": f.resources.len(),
                "links": f.resources.links().len(),
                "applications": f.applications.len(),
                "components": f.applications.iter().map(|a| a.len()).collect::<Vec<_>>(),
                "arrivals": s.arrivals(),
                "zones": s.partition.zones(),
            });
            sink.document("validate", &summary, None)
        }
        Command::Partition { scenario, zones, seed } => {
            let s = load(&scenario)?;
            let n = s.file.resources.len();
            let part =
                partition_resources(&s.file.resources, zones.unwrap_or(s.file.partition.zones), seed.unwrap_or(s.file.partition.seed))?;
            let assignment: Vec<usize> = (0..n).map(|v| part.zone_of(v)).collect();
            let mut t = Table::new(["node", "zone"]);
            for (v, z) in assignment.iter().enumerate() {
                t.push(vec![v.to_string(), z.to_string()]);
            }
            let members: Vec<Vec<usize>> = (0..part.zones()).map(|z| part.members(z)).collect();
            let doc = json!({ "zones": part.zones(), "assignment": assignment, "members": members });
            match sink.format {
                Format::Csv => sink.stream("partition", &doc, &t),
                Format::Json => sink.document("partition", &doc, None),
            }
        }
        Command::Baseline { scenario, kind, episodes, seed, oracle, timing } => {
            let s = load(&scenario)?;
            let source = match kind.as_str() {
                "random" => PolicySource::Random,
                k => PolicySource::Heuristic(k.parse::<HeuristicKind>().map_err(anyhow::Error::msg)?),
            };
            let report = run_experiment(&s, &source, &options(&s, cli.workers, episodes, seed, oracle, timing))?;
            sink.report(&report)
        }
        Command::Pretrain { scenario, zone, episodes, seed, timing } => {
            let s = load(&scenario)?;
            let env = s.environment();
            if zone >= env.zone_count() {
                bail!("zone {zone} does not exist; the scenario has {} zone(s)", env.zone_count());
            }
            let mut cfg = train_config(&s, seed);
            if let Some(e) = episodes {
                cfg.pretrain_episodes = e;
            }
            let start = Instant::now();
            let pre = pretrain_local(&env, init_local(zone, cfg.seed), &cfg)?;
            let elapsed = start.elapsed().as_secs_f64();
            let ck = Checkpoint::new(cfg.clone(), env.zone_count(), None, vec![pre.policy]);
            let memory = ck.parameter_bytes() + pre.optimizer_bytes + replay_bytes(&pre.replay);
            write_training(&sink, &ck, &[(format!("pretrain_zone{zone}"), &pre.curve)], memory, timing.then_some(elapsed))
        }
        Command::Train { scenario, pretrain_episodes, joint_episodes, seed, timing } => {
            let s = load(&scenario)?;
            let env = s.environment();
            let mut cfg = train_config(&s, seed);
            if let Some(e) = pretrain_episodes {
                cfg.pretrain_episodes = e;
            }
            if let Some(e) = joint_episodes {
                cfg.joint_episodes = e;
            }
            let start = Instant::now();
            let h = train_hierarchy(&env, &cfg)?;
            let elapsed = start.elapsed().as_secs_f64();
            let ck = Checkpoint::new(cfg.clone(), env.zone_count(), Some(h.global), h.locals);
            let mut curves: Vec<(String, &Vec<EpisodeStats>)> =
                h.pretrain_curves.iter().enumerate().map(|(z, c)| (format!("pretrain_zone{z}"), c)).collect();
            curves.push(("joint".into(), &h.joint_curve));
            write_training(&sink, &ck, &curves, h.memory_bytes, timing.then_some(elapsed))
        }
        Command::Eval { scenario, checkpoint, greedy, episodes, seed, oracle, timing } => {
            let s = load(&scenario)?;
            let ck = Checkpoint::load(&checkpoint, s.partition.zones())?;
            let opts = ExperimentOptions { greedy, ..options(&s, cli.workers, episodes, seed, oracle, timing) };
            let report = run_experiment(&s, &PolicySource::Checkpoint(Box::new(ck)), &opts)?;
            sink.report(&report)
        }
        Command::Oracle { scenario } => {
            let s = load(&scenario)?;
            let env = s.environment();
            if env.arrivals.len() != 1 {
                bail!("the oracle solves single-arrival scenarios; this one has {} arrivals", env.arrivals.len());
            }
            let app = env.app(env.arrivals[0]);
            let mut start = PlacementState::new(app, &env.resources);
            for (v, &a) in env.initial_avail.iter().enumerate() {
                start.set_available(v, a);
            }
            let best = oracle_from(app, &env.resources, &start, &env.weights)?;
            let mut t = Table::new(["component", "node", "ct"]);
            for (c, (h, ct)) in best.state.hosts().iter().zip(&best.report.per_component_ct).enumerate() {
                t.push(vec![c.to_string(), h.map(|v| v.to_string()).unwrap_or_default(), fmt_f64(*ct)]);
            }
            let doc = json!({
                "objective": best.objective,
                "ru": best.report.ru,
                "ct_app": best.report.ct_app,
                "svr": best.report.svr,
                "hosts": best.state.hosts(),
                "per_component_ct": best.report.per_component_ct,
                "feasible_assignments": best.feasible,
            });
            match sink.format {
                Format::Csv => sink.stream("oracle", &doc, &t),
                Format::Json => sink.document("oracle", &doc, None),
            }
        }
        Command::Compare { reports } => {
            let loaded = reports
                .iter()
                .map(|p| {
                    let text = std::fs::read_to_string(p).with_context(|| format!("cannot read {}", p.display()))?;
                    serde_json::from_str::<RunReport>(&text).with_context(|| format!("{} is not a run report", p.display()))
                })
                .collect::<Result<Vec<_>>>()?;
            let c = compare(&loaded)?;
            match (sink.format, &sink.out) {
                (Format::Json, _) => sink.document("comparison", &c, None),
                (Format::Csv, Some(_)) => sink.stream("comparison", &c, &c.table()),
                (Format::Csv, None) => {
                    print!("{}", c.render());
                    Ok(())
                }
            }
        }
    }
}

fn write_training(
    sink: &Sink,
    ck: &Checkpoint,
    curves: &[(String, &Vec<EpisodeStats>)],
    memory_bytes: usize,
    wall: Option<f64>,
) -> Result<()> {
    let summary = json!({
        "code_version": ck.code_version,
        "config": ck.config,
        "zones": ck.zones,
        "episodes": curves.iter().map(|(n, c)| (n.clone(), c.len())).collect::<std::collections::BTreeMap<_, _>>(),
        "memory_bytes": memory_bytes,
        "wall_clock_seconds": wall,
    });
    match &sink.out {
        Some(_) => {
            sink.document("checkpoint", ck, None)?;
            for (name, c) in curves {
                sink.stream(name, c, &curve_table(c))?;
            }
            sink.document("training", &summary, None)
        }
        None => {
            let doc = json!({ "training": summary, "curves": curves.iter().map(|(n, c)| (n.clone(), c)).collect::<std::collections::BTreeMap<_, _>>() });
            sink.document("training", &doc, None)
        }
    }
}

fn error_kind(e: &anyhow::Error) -> &'static str {
    if e.is::<ScenarioError>() {
        "scenario"
    } else if e.is::<CheckpointError>() {
        "checkpoint"
    } else if e.is::<ExperimentError>() {
        "experiment"
    } else if e.is::<TrainError>() {
        "training"
    } else if e.is::<CompareError>() {
        "compare"
    } else {
        "runtime"
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.workers.max(1)).build_global() {
        eprintln!("{}", json!({ "error": { "kind": "runtime", "message": e.to_string() } }));
        return ExitCode::FAILURE;
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let problems = e.downcast_ref::<ScenarioError>().map(ScenarioError::problems);
            let err = json!({ "error": { "kind": error_kind(&e), "message": format!("{e:#}"), "problems": problems } });
            eprintln!("{err}");
            ExitCode::FAILURE
        }
    }
}
