//! Command-line interface.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use speedcas_core::encounters::{gen_hovering, gen_opsuit_like, gen_pairwise, PairwiseGeometry};
use speedcas_core::logic::{LogicKind, LogicSpec};
use speedcas_core::metrics::{self, ProfileParams};
use speedcas_core::simulator::{Equipage, PilotModel, SensorNoise, SimConfig};
use speedcas_core::solver::solve_with;
use speedcas_core::QTable;

use crate::artifacts;
use crate::config::{check_tables, RunConfig};
use crate::error::{Error, Result};
use crate::jsonl;
use crate::parallel::{self, Parallel};
use crate::table_io;

#[derive(Debug, Parser)]
#[command(name = "speedcas", version, about = "Speed-advisory collision avoidance: solve, simulate, evaluate")]
pub struct Cli {
    /// Worker threads; defaults to the number of CPUs.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Suppress progress output on stderr.
    #[arg(long, short, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve a logic and write its Q-table.
    Solve(SolveArgs),
    /// Generate an encounter set as JSON lines.
    Generate(GenerateArgs),
    /// Simulate an encounter set with zero or more logics.
    Simulate(SimulateArgs),
    /// Reduce simulation results to a metrics report.
    Evaluate(EvaluateArgs),
    /// Alerting profile over a grid of intruder start positions.
    Profile(ProfileArgs),
    /// System P(NMAC) under probabilistic pilot response.
    ResponseModel(ResponseArgs),
    /// Write a Q-table as JSON.
    Dump(DumpArgs),
    /// Solve, generate, simulate and evaluate from one config file.
    Run(RunArgs),
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[arg(long, value_enum)]
    pub logic: Option<Kind>,
    /// Logic spec JSON; flags override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value_t = 0.1)]
    pub scale: f64,
    /// In-place sweeps of the co-altitude stage.
    #[arg(long)]
    pub sweeps: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Kind {
    Speed,
    Horizontal,
    Vertical,
}

impl From<Kind> for LogicKind {
    fn from(k: Kind) -> Self {
        match k {
            Kind::Speed => LogicKind::Speed,
            Kind::Horizontal => LogicKind::Horizontal,
            Kind::Vertical => LogicKind::Vertical,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SetKind {
    Opsuit,
    Hovering,
    Pairwise,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Geometry {
    HeadOn,
    Overtake,
    Crossing,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long, value_enum)]
    pub kind: SetKind,
    #[arg(long, short, default_value_t = 1000)]
    pub n: usize,
    #[arg(long)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = Geometry::HeadOn)]
    pub geometry: Geometry,
    /// Crossing angle, degrees.
    #[arg(long, default_value_t = 90.0)]
    pub angle: f64,
    /// Initial range, ft.
    #[arg(long, default_value_t = 20_000.0)]
    pub range: f64,
    #[arg(long, default_value_t = 150.0)]
    pub v_own: f64,
    #[arg(long, default_value_t = 150.0)]
    pub v_int: f64,
    #[arg(long, default_value_t = 0.0)]
    pub alt_offset: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SimArgs {
    /// Simulation config JSON; flags override its fields.
    #[arg(long = "sim-config")]
    pub sim_config: Option<PathBuf>,
    #[arg(long)]
    pub repetitions: Option<u32>,
    /// Switch to probabilistic pilot response.
    #[arg(long)]
    pub p_no_response: Option<f64>,
    /// Pilot delay, s.
    #[arg(long)]
    pub delay: Option<f64>,
    /// Turn off surveillance and altimeter noise.
    #[arg(long)]
    pub noiseless: bool,
    /// The intruder runs the same logics.
    #[arg(long)]
    pub equipped_intruder: bool,
    /// QMDP belief particles per query.
    #[arg(long)]
    pub particles: Option<usize>,
}

impl SimArgs {
    pub fn resolve(&self) -> Result<SimConfig> {
        let mut c = match &self.sim_config {
            Some(p) => {
                let text = fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
                serde_json::from_str(&text).map_err(|e| Error::Parse {
                    path: p.clone(),
                    line: e.line(),
                    detail: e.to_string(),
                })?
            }
            None => SimConfig::default(),
        };
        if let Some(r) = self.repetitions {
            c.repetitions = r;
        }
        let delay = self.delay.unwrap_or(c.pilot.delay());
        c.pilot = match (self.p_no_response, c.pilot) {
            (Some(p), _) => PilotModel::Probabilistic {
                p_no_response: p,
                delay,
            },
            (None, PilotModel::Probabilistic { p_no_response, .. }) => PilotModel::Probabilistic { p_no_response, delay },
            (None, PilotModel::Deterministic { .. }) => PilotModel::Deterministic { delay },
        };
        if self.noiseless {
            c.sensor = SensorNoise::zero();
        }
        if self.equipped_intruder {
            c.equipage = Equipage::EquippedEquipped;
        }
        if let Some(n) = self.particles {
            c.qmdp_particles = n;
        }
        c.validate()?;
        Ok(c)
    }
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub encounters: PathBuf,
    /// Q-table files, at most one per dimension; none runs without CAS.
    #[arg(long = "table")]
    pub tables: Vec<PathBuf>,
    #[arg(long)]
    pub seed: u64,
    #[command(flatten)]
    pub sim: SimArgs,
    #[arg(long)]
    pub out: PathBuf,
    /// Optional CSV summary.
    #[arg(long)]
    pub summary: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub encounters: PathBuf,
    #[arg(long)]
    pub results: PathBuf,
    /// No-CAS results for the risk ratio.
    #[arg(long)]
    pub baseline: Option<PathBuf>,
    /// Probability of no pilot response used in the simulation.
    #[arg(long)]
    pub p_no_response: Option<f64>,
    #[arg(long, default_value_t = 10.0)]
    pub bin_width: f64,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub histogram: Option<PathBuf>,
    /// One-row alert rate / risk ratio CSV.
    #[arg(long)]
    pub scatter: Option<PathBuf>,
    #[arg(long, default_value = "cas")]
    pub label: String,
}

#[derive(Debug, Args)]
pub struct ProfileArgs {
    #[arg(long = "table", required = true)]
    pub tables: Vec<PathBuf>,
    /// ft/s.
    #[arg(long, default_value_t = 120.0)]
    pub own_speed: f64,
    /// ft/s.
    #[arg(long, default_value_t = 120.0)]
    pub int_speed: f64,
    /// Intruder heading relative to the ownship, degrees.
    #[arg(long, default_value_t = 180.0)]
    pub rel_heading: f64,
    /// Half-width, NMi.
    #[arg(long, default_value_t = 8.0)]
    pub extent: f64,
    /// Cell size, NMi.
    #[arg(long, default_value_t = 0.5)]
    pub cell: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub sim: SimArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ResponseArgs {
    /// CSV with columns subset,pnmac covering all eight subsets.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value_t = 0.1)]
    pub p_no_response: f64,
    #[arg(long, default_value_t = 0.005)]
    pub step: f64,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DumpArgs {
    #[arg(long)]
    pub table: PathBuf,
    /// Refuse tables with more values than this.
    #[arg(long, default_value_t = 1_000_000)]
    pub max_values: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub config: PathBuf,
}

/// Parses `args` and runs the command, returning the process status.
pub fn main_with<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

pub fn run(cli: &Cli) -> Result<()> {
    if cli.jobs == Some(0) {
        return Err(Error::usage("jobs must be at least 1"));
    }
    let quiet = cli.quiet;
    parallel::with_jobs(cli.jobs, || match &cli.command {
        Command::Solve(a) => cmd_solve(a, quiet),
        Command::Generate(a) => cmd_generate(a),
        Command::Simulate(a) => cmd_simulate(a, quiet),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Profile(a) => cmd_profile(a),
        Command::ResponseModel(a) => cmd_response(a),
        Command::Dump(a) => cmd_dump(a),
        Command::Run(a) => cmd_run(a, quiet),
    })?
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn check_scale(scale: f64) -> Result<()> {
    if !(scale > 0.0 && scale <= 1.0) {
        return Err(Error::usage(format!("scale must be in (0, 1], got {scale}")));
    }
    Ok(())
}

/// Solves `spec` on its default grid at `scale` across the current pool.
pub fn solve_table(spec: &LogicSpec, scale: f64, quiet: bool) -> Result<QTable> {
    check_scale(scale)?;
    let grid = spec.grid(scale)?;
    if !quiet {
        eprintln!(
            "solving {} logic: {} vertices, {} actions",
            spec.kind,
            grid.vertex_count(),
            spec.actions().len()
        );
    }
    let start = Instant::now();
    let mut last = start;
    let q = solve_with(spec, &grid, &Parallel, |s| {
        if !quiet {
            let now = Instant::now();
            eprintln!(
                "  sweep {}/{} stage {}{} {:.2}s",
                s.index + 1,
                s.total,
                s.stage,
                if s.absorbing { " (co-altitude)" } else { "" },
                (now - last).as_secs_f64()
            );
            last = now;
        }
    })?;
    if !quiet {
        eprintln!("solved in {:.2}s", start.elapsed().as_secs_f64());
    }
    Ok(q)
}

fn cmd_solve(a: &SolveArgs, quiet: bool) -> Result<()> {
    check_scale(a.scale)?;
    let mut spec = match &a.config {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            serde_json::from_str::<LogicSpec>(&text).map_err(|e| Error::Parse {
                path: p.clone(),
                line: e.line(),
                detail: e.to_string(),
            })?
        }
        None => LogicSpec::speed(),
    };
    if let Some(k) = a.logic {
        spec.kind = k.into();
    }
    if let Some(h) = a.sweeps {
        spec.coaltitude_sweeps = h;
    }
    spec.validate()?;
    let q = solve_table(&spec, a.scale, quiet)?;
    write_file(&a.out, table_io::encode(&q))
}

fn cmd_generate(a: &GenerateArgs) -> Result<()> {
    let set = match a.kind {
        SetKind::Opsuit => gen_opsuit_like(a.n, a.seed)?,
        SetKind::Hovering => gen_hovering(a.n, a.seed)?,
        SetKind::Pairwise => {
            let g = match a.geometry {
                Geometry::HeadOn => PairwiseGeometry::HeadOn,
                Geometry::Overtake => PairwiseGeometry::Overtake,
                Geometry::Crossing => PairwiseGeometry::Crossing(a.angle.to_radians()),
            };
            let (e, warn) = gen_pairwise(g, a.range, a.v_own, a.v_int, a.alt_offset)?;
            if let Some(w) = warn {
                eprintln!("warning: {}", w.detail);
            }
            vec![e]
        }
    };
    write_file(&a.out, jsonl::to_jsonl(&set))
}

fn load_tables(paths: &[PathBuf]) -> Result<Vec<QTable>> {
    let tables = paths.iter().map(|p| table_io::load(p)).collect::<Result<Vec<_>>>()?;
    check_tables(&tables.iter().collect::<Vec<_>>())?;
    Ok(tables)
}

fn cmd_simulate(a: &SimulateArgs, quiet: bool) -> Result<()> {
    let cfg = a.sim.resolve()?;
    let set = jsonl::load_set(&a.encounters)?;
    let tables = load_tables(&a.tables)?;
    let refs: Vec<&QTable> = tables.iter().collect();
    let start = Instant::now();
    let results = parallel::run_set(&set, &refs, &cfg, a.seed)?;
    if !quiet {
        eprintln!(
            "simulated {} runs of {} encounters in {:.2}s",
            results.len(),
            set.len(),
            start.elapsed().as_secs_f64()
        );
    }
    write_file(&a.out, jsonl::to_jsonl(&results))?;
    if let Some(p) = &a.summary {
        write_file(p, artifacts::summary_csv(&results))?;
    }
    Ok(())
}

fn cmd_evaluate(a: &EvaluateArgs) -> Result<()> {
    let set = jsonl::load_set(&a.encounters)?;
    let results = jsonl::load_results(&a.results)?;
    let baseline = a.baseline.as_deref().map(jsonl::load_results).transpose()?;
    let pilot = a
        .p_no_response
        .map(|p| PilotModel::Probabilistic { p_no_response: p, delay: 0.0 });
    let report = metrics::evaluate(&set, &results, baseline.as_deref(), pilot.as_ref(), a.bin_width)?;
    println!(
        "P(NMAC) {:.4e}  alert rate {:.4}  risk ratio {}",
        report.pnmac,
        report.alert_rate,
        report
            .risk_ratio
            .map_or_else(|| String::from("n/a"), |r| format!("{r:.4}"))
    );
    write_file(&a.out, serde_json::to_string_pretty(&report).expect("report serializes"))?;
    if let Some(p) = &a.histogram {
        write_file(p, artifacts::histogram_csv(&report.heading_histogram))?;
    }
    if let Some(p) = &a.scatter {
        write_file(p, artifacts::scatter_csv(&a.label, &report))?;
    }
    Ok(())
}

fn cmd_profile(a: &ProfileArgs) -> Result<()> {
    let cfg = a.sim.resolve()?;
    let p = ProfileParams {
        own_speed: a.own_speed,
        int_speed: a.int_speed,
        rel_heading_deg: a.rel_heading,
        extent_nmi: a.extent,
        cell_nmi: a.cell,
    };
    metrics::profile_axis(&p)?;
    let tables = load_tables(&a.tables)?;
    let refs: Vec<&QTable> = tables.iter().collect();
    let cells = parallel::alerting_profile(&refs, &cfg, &p, a.seed)?;
    write_file(&a.out, artifacts::profile_csv(&cells))
}

#[derive(serde::Serialize)]
struct Variant {
    subset_probs: Vec<(speedcas_core::logic::DimSet, f64)>,
    system_pnmac: f64,
}

#[derive(serde::Serialize)]
struct ResponseReport {
    p_no_response: f64,
    with_speed: Variant,
    without_speed: Variant,
    ratio: f64,
}

fn cmd_response(a: &ResponseArgs) -> Result<()> {
    let sweep = metrics::unit_sweep(a.step)?;
    metrics::response_subset_probs(a.p_no_response, 3)?;
    let table = artifacts::load_subset_table(&a.input)?;
    let hv = speedcas_core::logic::DimSet::single(speedcas_core::logic::Dimension::Horizontal)
        .with(speedcas_core::logic::Dimension::Vertical);
    let variant = |rows: &[(speedcas_core::logic::DimSet, f64)], n| -> Result<Variant> {
        let probs = metrics::response_subset_probs(a.p_no_response, n)?;
        Ok(Variant {
            system_pnmac: metrics::weighted_system_pnmac(rows, &probs)?,
            subset_probs: probs,
        })
    };
    let with = variant(&table, 3)?;
    let without = variant(&metrics::restrict(&table, hv), 2)?;
    if without.system_pnmac == 0.0 {
        return Err(speedcas_core::Error::UndefinedRatio(String::from("system P(NMAC) without speed is zero")).into());
    }
    let curve = metrics::response_curve(&table, &sweep)?;
    let report = ResponseReport {
        p_no_response: a.p_no_response,
        ratio: with.system_pnmac / without.system_pnmac,
        with_speed: with,
        without_speed: without,
    };
    println!(
        "system P(NMAC): with speed {:.4e}, without speed {:.4e}, ratio {:.4}",
        report.with_speed.system_pnmac, report.without_speed.system_pnmac, report.ratio
    );
    write_file(&a.out, artifacts::curve_csv(&curve))?;
    if let Some(p) = &a.report {
        write_file(p, serde_json::to_string_pretty(&report).expect("report serializes"))?;
    }
    Ok(())
}

fn cmd_dump(a: &DumpArgs) -> Result<()> {
    let q = table_io::load(&a.table)?;
    if q.values().len() > a.max_values {
        return Err(Error::usage(format!(
            "table has {} values, above --max-values {}",
            q.values().len(),
            a.max_values
        )));
    }
    write_file(&a.out, table_io::dump_json(&q))
}

/// Files written by [`run_pipeline`], relative to the output directory.
pub const PIPELINE_ARTIFACTS: [&str; 6] = [
    "encounters.jsonl",
    "nocas.jsonl",
    "cas.jsonl",
    "summary.csv",
    "metrics.json",
    "histogram.csv",
];

/// Runs the whole pipeline described by `c` into its output directory.
pub fn run_pipeline(c: &RunConfig, quiet: bool) -> Result<()> {
    c.validate()?;
    let set = c.encounter_set()?;
    let mut tables = Vec::with_capacity(c.logics.len());
    for spec in &c.logics {
        tables.push(solve_table(spec, c.scale, quiet)?);
    }
    let refs: Vec<&QTable> = tables.iter().collect();
    check_tables(&refs)?;
    let nocas = parallel::run_set(&set, &[], &c.sim, c.seed)?;
    let cas = parallel::run_set(&set, &refs, &c.sim, c.seed)?;
    let pilot = matches!(c.sim.pilot, PilotModel::Probabilistic { .. }).then_some(&c.sim.pilot);
    let report = metrics::evaluate(&set, &cas, Some(&nocas), pilot, c.bin_width_deg)?;

    let dir = &c.out_dir;
    for (spec, q) in c.logics.iter().zip(&tables) {
        write_file(&dir.join(format!("{}.qtbl", spec.kind)), table_io::encode(q))?;
    }
    write_file(&dir.join("encounters.jsonl"), jsonl::to_jsonl(&set))?;
    write_file(&dir.join("nocas.jsonl"), jsonl::to_jsonl(&nocas))?;
    write_file(&dir.join("cas.jsonl"), jsonl::to_jsonl(&cas))?;
    write_file(&dir.join("summary.csv"), artifacts::summary_csv(&cas))?;
    write_file(&dir.join("metrics.json"), serde_json::to_string_pretty(&report).expect("report serializes"))?;
    write_file(&dir.join("histogram.csv"), artifacts::histogram_csv(&report.heading_histogram))?;
    if !quiet {
        eprintln!("wrote artifacts to {}", dir.display());
    }
    Ok(())
}

fn cmd_run(a: &RunArgs, quiet: bool) -> Result<()> {
    run_pipeline(&RunConfig::load(&a.config)?, quiet)
}
