//! Command implementations behind the `acard` binary.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use acard_core::bench::{
    card_cost_report, compare_learners, detect_convergence, generate_workload, read_records,
    run_adaptive_loop, svg_curves, svg_scatter, write_records, write_rows, Convergence, CurvePoint,
    IterationRecord, LoopConfig, TemplateOrder, WorkloadItem,
};
use acard_core::catalog::{write_csv, Catalog};
use acard_core::config::ExperimentConfig;
use acard_core::executor::{write_observations, NodeObservation, OBSERVATION_HEADER};
use acard_core::learner::{LearnerKind, LearnerRegistry};
use acard_core::optimizer::{best_plan, EstimatorMode, EstimatorPlugin};
use acard_core::plan::explain;
use acard_core::stats::StatsCatalog;
use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(
    name = "acard",
    version,
    about = "Adaptive cardinality estimation workbench"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate the configured tables as CSV files plus a manifest.
    Gen(Common),
    /// Run the plan-execute-learn loop over the configured workload.
    Run {
        #[command(flatten)]
        common: Common,
        /// Continue from a learner snapshot written by an earlier run.
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Print the plan chosen for one query template.
    Explain {
        #[command(flatten)]
        common: Common,
        /// Template id.
        #[arg(long)]
        query: String,
        /// Learner snapshot to estimate with in adaptive mode.
        #[arg(long)]
        snapshot: Option<PathBuf>,
    },
    /// Compare learner kinds on the configured comparison workload.
    Compare {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        svg: bool,
    },
    /// Cardinality and cost scatter data, from a run directory or a fresh run.
    Report {
        #[command(flatten)]
        common: Common,
        /// Directory holding `iterations.csv` and `nodes.csv`.
        #[arg(long)]
        records: Option<PathBuf>,
        #[arg(long)]
        svg: bool,
    },
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory; defaults to `out` from the config, then `results`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_parser = parse_mode)]
    pub mode: Option<EstimatorMode>,
    #[arg(long, value_parser = parse_kind)]
    pub learner: Option<LearnerKind>,
}

fn parse_mode(s: &str) -> std::result::Result<EstimatorMode, String> {
    s.parse().map_err(|e: acard_core::Error| e.to_string())
}

fn parse_kind(s: &str) -> std::result::Result<LearnerKind, String> {
    s.parse().map_err(|e: acard_core::Error| e.to_string())
}

/// Config, catalog and statistics shared by all commands.
pub struct Setup {
    pub config: ExperimentConfig,
    pub out: PathBuf,
    pub catalog: Catalog,
    pub stats: StatsCatalog,
}

impl Setup {
    pub fn load(common: &Common) -> Result<Self> {
        let mut config = ExperimentConfig::load(&common.config)?;
        if let Some(seed) = common.seed {
            config.seed = seed;
        }
        if let Some(mode) = common.mode {
            config.bench.mode = mode;
        }
        if let Some(kind) = common.learner {
            config.learner.kind = kind;
        }
        let out = common
            .out
            .clone()
            .or_else(|| config.out.as_ref().map(|o| config.base_dir.join(o)))
            .unwrap_or_else(|| PathBuf::from("results"));
        let catalog = config.build_catalog()?;
        let stats = StatsCatalog::build(&catalog, config.data.buckets)?;
        Ok(Self {
            config,
            out,
            catalog,
            stats,
        })
    }

    fn out_file(&self, name: &str) -> Result<BufWriter<File>> {
        fs::create_dir_all(&self.out)
            .with_context(|| format!("cannot create {}", self.out.display()))?;
        let path = self.out.join(name);
        let f = File::create(&path).with_context(|| format!("cannot write {}", path.display()))?;
        Ok(BufWriter::new(f))
    }
}

pub fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Gen(common) => {
            let setup = Setup::load(&common)?;
            gen(&setup)?;
        }
        Command::Run { common, resume } => {
            let setup = Setup::load(&common)?;
            let (records, conv) = run(&setup, resume.as_deref())?;
            let converged = conv.values().filter(|c| c.converged).count();
            println!(
                "{} iterations, {converged}/{} templates converged; output in {}",
                records.len(),
                conv.len(),
                setup.out.display()
            );
        }
        Command::Explain {
            common,
            query,
            snapshot,
        } => {
            let setup = Setup::load(&common)?;
            print!("{}", explain_query(&setup, &query, snapshot.as_deref())?);
        }
        Command::Compare { common, svg } => {
            let setup = Setup::load(&common)?;
            let curves = compare(&setup, svg)?;
            for (kind, err) in acard_core::bench::final_errors(&curves) {
                println!("{kind:>8}  {err:.4}");
            }
        }
        Command::Report {
            common,
            records,
            svg,
        } => {
            let setup = Setup::load(&common)?;
            let recs = match records {
                Some(dir) => load_records(&dir)?,
                None => run(&setup, None)?.0,
            };
            report(&setup, &recs, svg)?;
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct Manifest<'a> {
    seed: u64,
    tables: Vec<ManifestTable<'a>>,
}

#[derive(Serialize)]
struct ManifestTable<'a> {
    name: &'a str,
    rows: usize,
    file: String,
}

/// Writes `data/<table>.csv` for every table and `manifest.json`.
pub fn gen(setup: &Setup) -> Result<()> {
    let dir = setup.out.join("data");
    fs::create_dir_all(&dir).with_context(|| format!("cannot create {}", dir.display()))?;
    let mut tables = Vec::new();
    for t in setup.catalog.tables() {
        let file = format!("data/{}.csv", t.name());
        write_csv(t, BufWriter::new(File::create(setup.out.join(&file))?))?;
        tables.push(ManifestTable {
            name: t.name(),
            rows: t.row_count(),
            file,
        });
    }
    let manifest = Manifest {
        seed: setup.config.seed,
        tables,
    };
    let mut w = setup.out_file("manifest.json")?;
    serde_json::to_writer_pretty(&mut w, &manifest)?;
    std::io::Write::write_all(&mut w, b"\n")?;
    Ok(())
}

#[derive(Serialize)]
struct ConvergenceRow<'a> {
    template_id: &'a str,
    converged: bool,
    last_change: usize,
    iterations: usize,
    final_plan: &'a str,
}

/// Runs the loop and writes `iterations.csv`, `nodes.csv`,
/// `observations.csv`, `convergence.csv` and `snapshot.json`.
pub fn run(
    setup: &Setup,
    resume: Option<&Path>,
) -> Result<(
    Vec<IterationRecord>,
    std::collections::BTreeMap<String, Convergence>,
)> {
    let cfg = &setup.config;
    let (mut registry, done) = match resume {
        Some(path) => {
            let f = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
            let (reg, done) = LearnerRegistry::read_snapshot(f)?;
            if reg.config().kind != cfg.learner.kind {
                log::warn!(
                    "snapshot holds {} learners; continuing with them instead of {}",
                    reg.config().kind,
                    cfg.learner.kind
                );
            }
            (reg, done)
        }
        None => (LearnerRegistry::new(cfg.learner_config()), 0),
    };
    let mut wcfg = cfg.clone();
    wcfg.workload.iterations = done + cfg.workload.iterations;
    let items: Vec<WorkloadItem> = wcfg.workload(&setup.catalog)?.split_off(done);

    let mut obs_log = csv::Writer::from_writer(setup.out_file("observations.csv")?);
    obs_log.write_record(OBSERVATION_HEADER)?;
    let mut observer = |item: &WorkloadItem, obs: &[NodeObservation]| {
        write_observations(&mut obs_log, item.iteration, &item.template_id, obs)
    };
    let loop_cfg = LoopConfig {
        mode: cfg.bench.mode,
        optimizer: cfg.optimizer,
    };
    let records = run_adaptive_loop(
        &setup.catalog,
        &setup.stats,
        &items,
        &loop_cfg,
        &mut registry,
        Some(&mut observer),
    )?;
    obs_log.flush()?;
    drop(obs_log);

    write_records(
        &records,
        setup.out_file("iterations.csv")?,
        setup.out_file("nodes.csv")?,
    )?;
    let conv = detect_convergence(&records, cfg.bench.window);
    let rows: Vec<ConvergenceRow> = conv
        .iter()
        .map(|(id, c)| ConvergenceRow {
            template_id: id,
            converged: c.converged,
            last_change: c.last_change,
            iterations: c.iterations,
            final_plan: &c.final_plan,
        })
        .collect();
    write_rows(&rows, setup.out_file("convergence.csv")?)?;
    let mut snap = setup.out_file("snapshot.json")?;
    registry.write_snapshot(&mut snap, done + records.len())?;
    std::io::Write::write_all(&mut snap, b"\n")?;
    Ok((records, conv))
}

/// Plans the first instance of template `id` and renders it.
pub fn explain_query(setup: &Setup, id: &str, snapshot: Option<&Path>) -> Result<String> {
    let cfg = &setup.config;
    let template = cfg.template(id)?;
    let kinds = setup.catalog.column_kinds();
    let query = generate_workload(&[template], 1, TemplateOrder::RoundRobin, cfg.seed, &kinds)?
        .remove(0)
        .query;
    query.validate(&setup.catalog)?;
    let registry = match snapshot {
        Some(path) => {
            let f = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
            LearnerRegistry::read_snapshot(f)?.0
        }
        None => {
            if cfg.bench.mode == EstimatorMode::Adaptive {
                log::info!("no snapshot given; adaptive estimates fall back to the baseline");
            }
            LearnerRegistry::new(cfg.learner_config())
        }
    };
    let plugin = EstimatorPlugin::new(cfg.bench.mode, &setup.stats, &registry);
    let plan = best_plan(&query, &setup.stats, &plugin, &cfg.optimizer)?;
    Ok(format!("-- {query}\n{}", explain(&plan)))
}

/// Writes `compare.csv` (and `compare.svg`).
pub fn compare(setup: &Setup, svg: bool) -> Result<Vec<CurvePoint>> {
    let cfg = &setup.config;
    let (train, test) = cfg.compare_workloads(&setup.catalog)?;
    let section = cfg.compare.as_ref().expect("checked by compare_workloads");
    let curves = compare_learners(
        &setup.catalog,
        &setup.stats,
        &train,
        &test,
        &section.kinds,
        &cfg.learner_config(),
        section.eval_every,
    )?;
    write_rows(&curves, setup.out_file("compare.csv")?)?;
    if svg {
        let text = svg_curves(&curves, "estimation error while learning");
        fs::write(setup.out.join("compare.svg"), text)?;
    }
    Ok(curves)
}

pub fn load_records(dir: &Path) -> Result<Vec<IterationRecord>> {
    let open = |name: &str| {
        let p = dir.join(name);
        File::open(&p).with_context(|| format!("cannot open {}", p.display()))
    };
    Ok(read_records(open("iterations.csv")?, open("nodes.csv")?)?)
}

/// Writes `cardinality.csv` and `cost.csv` (and SVG scatters).
pub fn report(setup: &Setup, records: &[IterationRecord], svg: bool) -> Result<()> {
    let rep = card_cost_report(records)?;
    write_rows(&rep.cardinalities, setup.out_file("cardinality.csv")?)?;
    write_rows(&rep.costs, setup.out_file("cost.csv")?)?;
    if svg {
        let pts: Vec<(f64, f64)> = rep
            .cardinalities
            .iter()
            .map(|p| (p.true_cardinality.max(1) as f64, p.estimated))
            .collect();
        fs::write(
            setup.out.join("cardinality.svg"),
            svg_scatter(&pts, "estimated vs true cardinality", "true", "estimated"),
        )?;
        let pts: Vec<(f64, f64)> = rep
            .costs
            .iter()
            .map(|p| (p.true_cost, p.estimated_cost))
            .collect();
        fs::write(
            setup.out.join("cost.svg"),
            svg_scatter(
                &pts,
                "model cost vs true-cardinality cost",
                "true cost",
                "model cost",
            ),
        )?;
    }
    Ok(())
}
