//! The `cineseg` command line.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 data or format
//! error, 3 pipeline or training failure.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

use cineseg_core::foundation::{simulate_foundation, FoundationSim};
use cineseg_core::grid::{CineStudy, LabelVolume, PerStructure, Structure};
use cineseg_core::metrics::{assd, dice, hd95, surface_distances};
use cineseg_core::qc::{collect_stats, flag_cohort, flagged_fraction};
use cineseg_core::segmenter::{PrecomputedLabels, SegmenterModel};
use cineseg_core::selftrain::{run_self_training, GroundTruth, IterationReport, Mode};
use cineseg_core::stats::MeanStd;
use cineseg_core::student::StudentLearner;
use cineseg_core::temporal::{cohort_temporal_summary, temporal_report};
use cineseg_core::Executor;
use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::PipelineConfig;
use crate::container::{read_studies, write_file, write_model, write_studies};
use crate::error::Error;
use crate::exec::RayonExecutor;
use crate::manifest::{
    check_out_file, label_set_hash, prepare_out_dir, IterationEntry, RunManifest, Seeds,
};
use crate::report::{
    csv_bytes, fmt_f64, fmt_opt, json_bytes, study_series, write_csv_report, write_curve_csv,
    write_json_report, write_svg_curves, write_temporal_summary_csv, CurveSeries,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitKind {
    Usage = 1,
    Data = 2,
    Pipeline = 3,
}

impl ExitKind {
    fn name(self) -> &'static str {
        match self {
            ExitKind::Usage => "usage",
            ExitKind::Data => "data",
            ExitKind::Pipeline => "pipeline",
        }
    }
}

#[derive(Debug)]
pub struct Failure {
    pub kind: ExitKind,
    pub error: Error,
}

type CmdResult<T = ()> = Result<T, Failure>;

trait Classify<T> {
    fn or_exit(self, kind: ExitKind) -> CmdResult<T>;
}

impl<T, E: Into<Error>> Classify<T> for Result<T, E> {
    fn or_exit(self, kind: ExitKind) -> CmdResult<T> {
        self.map_err(|e| Failure {
            kind,
            error: e.into(),
        })
    }
}

/// Configuration problems are usage errors; everything else in a config
/// load is a data error.
fn classify_config(e: Error) -> Failure {
    let kind = match e {
        Error::Config(_) | Error::UnknownKeys(_) | Error::Core(_) => ExitKind::Usage,
        _ => ExitKind::Data,
    };
    Failure { kind, error: e }
}

/// Output preparation: refusals are usage errors, IO trouble is data.
fn classify_output(e: Error) -> Failure {
    let kind = match e {
        Error::OutputNotEmpty(_) | Error::Locked(_) | Error::Config(_) => ExitKind::Usage,
        _ => ExitKind::Data,
    };
    Failure { kind, error: e }
}

#[derive(Debug, Parser)]
#[command(
    name = "cineseg",
    version,
    about = "Iterative pseudo-label self-training for 4D cardiac segmentation"
)]
pub struct Cli {
    /// Worker threads; 0 uses every available core. Results do not depend on it.
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Synthetic cardiac phantoms.
    #[command(subcommand)]
    Phantom(PhantomCmd),
    /// The self-training loop.
    #[command(subcommand)]
    Selftrain(SelftrainCmd),
    /// Agreement metrics between label sets.
    #[command(subcommand)]
    Metrics(MetricsCmd),
    /// Plausibility flagging.
    #[command(subcommand)]
    Qc(QcCmd),
    /// Temporal-consistency analytics.
    #[command(subcommand)]
    Temporal(TemporalCmd),
}

#[derive(Debug, Subcommand)]
pub enum PhantomCmd {
    /// Write phantom studies (labelled by the simulated foundation model) to
    /// `<out>/studies` and their ground truth to `<out>/truth`.
    Generate(GenerateArgs),
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// TOML configuration; defaults apply to every missing key.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Overrides `phantom.seed`.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides `studies`.
    #[arg(long)]
    pub studies: Option<usize>,
    /// Overrides `manual_studies`.
    #[arg(long)]
    pub manual_studies: Option<usize>,
    /// Replace this command's outputs in a non-empty directory.
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Subcommand)]
pub enum SelftrainCmd {
    /// Initialise pseudo-labels, then run the configured number of rounds.
    Run(RunArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    #[value(name = "pseudo_only", alias = "pseudo-only")]
    PseudoOnly,
    #[value(name = "pseudo_mixed", alias = "pseudo-mixed")]
    PseudoMixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FoundationArg {
    /// Corrupt the ground truth with the simulated foundation model.
    Sim,
    /// Use the labels stored in the data directory.
    Precomputed,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Study containers (a container, a directory of them, or one with `studies/`).
    #[arg(long)]
    pub data: PathBuf,
    /// Ground truth for evaluation; defaults to `<data>/truth` when present.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// TOML configuration; defaults to `<data>/config.toml` when present.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
    #[arg(long)]
    pub rounds: Option<usize>,
    /// Overrides `selftrain.seed`.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum, default_value_t = FoundationArg::Sim)]
    pub foundation: FoundationArg,
    #[arg(long)]
    pub out: PathBuf,
    /// Replace this command's outputs in a non-empty directory.
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Subcommand)]
pub enum MetricsCmd {
    /// Per-frame Dice, HD95 and ASSD plus cohort mean and std rows.
    Eval(EvalArgs),
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub pred: PathBuf,
    #[arg(long)]
    pub truth: PathBuf,
    /// Output CSV file.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Subcommand)]
pub enum QcCmd {
    /// Flag implausible structures in every frame.
    Flag(FlagArgs),
}

#[derive(Debug, Args)]
pub struct FlagArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Output CSV file.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Subcommand)]
pub enum TemporalCmd {
    /// Volume curves, frame-to-frame Dice spread and extreme counts.
    Report(TemporalArgs),
}

#[derive(Debug, Args)]
pub struct TemporalArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub force: bool,
}

/// Parses `args` (program name first), runs the command and returns the exit
/// code. Errors go to stderr as one JSON object.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() {
                ExitKind::Usage as i32
            } else {
                0
            };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(f) => {
            let msg = serde_json::json!({
                "status": "error",
                "kind": f.kind.name(),
                "exit_code": f.kind as i32,
                "message": f.error.to_string(),
            });
            eprintln!("{msg}");
            f.kind as i32
        }
    }
}

pub fn execute(cli: &Cli) -> CmdResult {
    let exec = RayonExecutor::new(cli.threads)
        .map_err(|e| Error::Config(format!("thread pool: {e}")))
        .or_exit(ExitKind::Usage)?;
    match &cli.command {
        Command::Phantom(PhantomCmd::Generate(a)) => phantom_generate(a, &exec),
        Command::Selftrain(SelftrainCmd::Run(a)) => selftrain_run(a, &exec),
        Command::Metrics(MetricsCmd::Eval(a)) => metrics_eval(a, &exec),
        Command::Qc(QcCmd::Flag(a)) => qc_flag(a, &exec),
        Command::Temporal(TemporalCmd::Report(a)) => temporal_cmd(a, &exec),
    }
}

fn load_config(path: Option<&Path>) -> CmdResult<PipelineConfig> {
    match path {
        Some(p) => PipelineConfig::load(p).map_err(classify_config),
        None => Ok(PipelineConfig::default()),
    }
}

fn phantom_generate(a: &GenerateArgs, exec: &RayonExecutor) -> CmdResult {
    let mut cfg = load_config(a.config.as_deref())?;
    if let Some(s) = a.seed {
        cfg.phantom.seed = s;
    }
    if let Some(n) = a.studies {
        cfg.studies = n;
    }
    if let Some(n) = a.manual_studies {
        cfg.manual_studies = n;
    }
    cfg.validate().map_err(classify_config)?;
    let toml_echo = cfg.to_toml_string().or_exit(ExitKind::Usage)?;

    let _lock = prepare_out_dir(&a.out, a.force, &["studies", "truth", "config.toml"])
        .map_err(classify_output)?;
    let truth = cineseg_core::phantom::generate_cohort(&cfg.phantom, cfg.studies)
        .or_exit(ExitKind::Pipeline)?;
    let first_manual = cfg.studies - cfg.manual_studies;
    let labelled: Vec<Result<CineStudy, cineseg_core::Error>> = exec.map(&truth, |i, st| {
        if i >= first_manual {
            CineStudy::new(st.subject_id(), st.frames().to_vec(), true)
        } else {
            simulate_foundation(st, &cfg.corruption)
        }
    });
    let labelled: Vec<CineStudy> = labelled
        .into_iter()
        .collect::<Result<_, _>>()
        .or_exit(ExitKind::Pipeline)?;

    write_studies(&labelled, &a.out.join("studies")).or_exit(ExitKind::Data)?;
    write_studies(&truth, &a.out.join("truth")).or_exit(ExitKind::Data)?;
    write_file(&a.out.join("config.toml"), toml_echo.as_bytes()).or_exit(ExitKind::Data)?;
    println!(
        "wrote {} studies x {} frames to {}",
        cfg.studies,
        cfg.phantom.frames,
        a.out.join("studies").display()
    );
    Ok(())
}

fn read_data(dir: &Path) -> CmdResult<Vec<CineStudy>> {
    if !dir.is_dir() {
        return Err(Failure {
            kind: ExitKind::Data,
            error: Error::Empty(format!("{}: data directory not found", dir.display())),
        });
    }
    read_studies(dir).or_exit(ExitKind::Data)
}

fn truth_dir(data: &Path, explicit: Option<&Path>) -> Option<PathBuf> {
    if let Some(p) = explicit {
        return Some(p.to_path_buf());
    }
    let parent_style = data.join("truth");
    if parent_style.is_dir() {
        return Some(parent_style);
    }
    data.parent()
        .map(|p| p.join("truth"))
        .filter(|p| p.is_dir() && data.ends_with("studies"))
}

fn selftrain_run(a: &RunArgs, exec: &RayonExecutor) -> CmdResult {
    let cfg_path = a.config.clone().or_else(|| {
        let p = a.data.join("config.toml");
        p.is_file().then_some(p)
    });
    let mut cfg = load_config(cfg_path.as_deref())?;
    if let Some(m) = a.mode {
        cfg.selftrain.mode = match m {
            ModeArg::PseudoOnly => Mode::PseudoOnly,
            ModeArg::PseudoMixed => Mode::PseudoMixed,
        };
    }
    if let Some(r) = a.rounds {
        cfg.selftrain.rounds = r;
    }
    if let Some(s) = a.seed {
        cfg.selftrain.seed = s;
    }
    cfg.selftrain.validate().or_exit(ExitKind::Usage)?;

    let studies = read_data(&a.data)?;
    let truth_path = truth_dir(&a.data, a.truth.as_deref());
    if let Some(t) = a.truth.as_ref().filter(|t| !t.is_dir()) {
        return Err(Failure {
            kind: ExitKind::Data,
            error: Error::Empty(format!("{}: truth directory not found", t.display())),
        });
    }
    let truth_studies = match &truth_path {
        Some(p) => Some(read_studies(p).or_exit(ExitKind::Data)?),
        None => None,
    };
    let mut truth = GroundTruth::new();
    for t in truth_studies.iter().flatten() {
        truth.insert(t.subject_id(), t.labels().cloned().collect());
    }

    let foundation: Box<dyn SegmenterModelSync> = match a.foundation {
        FoundationArg::Precomputed => Box::new(PrecomputedLabels::from_studies(&studies)),
        FoundationArg::Sim => {
            let Some(ts) = &truth_studies else {
                return Err(Failure {
                    kind: ExitKind::Data,
                    error: Error::Empty(
                        "--foundation sim needs ground truth (<data>/truth or --truth)".into(),
                    ),
                });
            };
            let mut sim = FoundationSim::new(cfg.corruption).or_exit(ExitKind::Usage)?;
            for t in ts {
                sim.insert_truth(t.subject_id(), t.labels().cloned().collect());
            }
            Box::new(sim)
        }
    };

    let owned = [
        "reports",
        "studies",
        "curves",
        "model.json",
        "manifest.json",
        "summary.csv",
        "reports.json",
    ];
    let _lock = prepare_out_dir(&a.out, a.force, &owned).map_err(classify_output)?;
    let reports_dir = a.out.join("reports");
    std::fs::create_dir_all(&reports_dir)
        .map_err(crate::error::io(&reports_dir))
        .or_exit(ExitKind::Data)?;

    let sc = &cfg.selftrain;
    let seeds = Seeds {
        selftrain: sc.seed,
        train: sc.train.seed,
        corruption: (a.foundation == FoundationArg::Sim).then_some(cfg.corruption.seed),
        rounds: (1..=sc.rounds).map(|r| sc.round_seed(r)).collect(),
    };
    let echo = serde_json::json!({
        "data": a.data,
        "truth": truth_path,
        "foundation": format!("{:?}", a.foundation).to_lowercase(),
        "corruption": cfg.corruption,
        "selftrain": cfg.selftrain,
    });
    let mut manifest = RunManifest::new("selftrain run", echo, seeds, exec.threads());
    manifest.write(&a.out).or_exit(ExitKind::Data)?;

    let learner = StudentLearner { cfg: sc.train };
    let truth_ref = (!truth.is_empty()).then_some(&truth);
    let mut write_err: Option<Error> = None;
    let mut clock = Instant::now();
    let outcome = run_self_training(
        studies,
        truth_ref,
        &foundation.as_ref(),
        &learner,
        sc,
        exec,
        |report, current| {
            manifest.iterations.push(IterationEntry {
                iteration: report.iteration,
                label_hash: label_set_hash(current),
                seconds: clock.elapsed().as_secs_f64(),
                mean_flagged_fraction: report.mean_flagged_fraction(),
            });
            clock = Instant::now();
            if write_err.is_none() {
                write_err = write_iteration(&reports_dir, report)
                    .and_then(|_| manifest.write(&a.out))
                    .err();
            }
        },
    );
    if let Some(e) = write_err {
        manifest.finish(Some(e.to_string()));
        let _ = manifest.write(&a.out);
        return Err(Failure {
            kind: ExitKind::Data,
            error: e,
        });
    }
    let outcome = match outcome {
        Ok(o) => o,
        Err(e) => {
            manifest.finish(Some(e.to_string()));
            let _ = manifest.write(&a.out);
            if !e.reports.is_empty() {
                let _ = write_json_report(&e.reports, &a.out.join("reports.json"));
                let _ = write_csv_report(&e.reports, &a.out.join("summary.csv"));
            }
            return Err(Failure {
                kind: ExitKind::Pipeline,
                error: e.into(),
            });
        }
    };

    let finish = || -> crate::error::Result<()> {
        write_json_report(&outcome.reports, &a.out.join("reports.json"))?;
        write_csv_report(&outcome.reports, &a.out.join("summary.csv"))?;
        if let Some(m) = &outcome.model {
            write_model(m, &a.out.join("model.json"))?;
        }
        write_studies(&outcome.studies, &a.out.join("studies"))?;
        write_run_curves(&a.out.join("curves"), &outcome.reports)?;
        Ok(())
    };
    if let Err(e) = finish() {
        manifest.finish(Some(e.to_string()));
        let _ = manifest.write(&a.out);
        return Err(Failure {
            kind: ExitKind::Data,
            error: e,
        });
    }
    manifest.finish(None);
    manifest.write(&a.out).or_exit(ExitKind::Data)?;

    let first = &outcome.reports[0];
    let last = outcome.reports.last().expect("at least one report");
    println!(
        "{} reports; mean flagged fraction {:.4} -> {:.4}",
        outcome.reports.len(),
        first.mean_flagged_fraction(),
        last.mean_flagged_fraction()
    );
    Ok(())
}

/// Object-safe view of a segmenter usable across threads.
trait SegmenterModelSync: SegmenterModel + Send {}
impl<T: SegmenterModel + Send> SegmenterModelSync for T {}

impl SegmenterModel for &dyn SegmenterModelSync {
    fn predict(
        &self,
        frame: cineseg_core::segmenter::FrameRef<'_>,
    ) -> cineseg_core::Result<LabelVolume> {
        (**self).predict(frame)
    }
}

fn write_iteration(dir: &Path, r: &IterationReport) -> crate::error::Result<()> {
    let stem = format!("iteration_{:02}", r.iteration);
    write_file(
        &dir.join(format!("{stem}.json")),
        &json_bytes("iteration_reports", std::slice::from_ref(r)),
    )?;
    write_csv_report(std::slice::from_ref(r), &dir.join(format!("{stem}.csv")))
}

/// One SVG per study with a polyline for every (structure, iteration).
fn write_run_curves(dir: &Path, reports: &[IterationReport]) -> crate::error::Result<()> {
    std::fs::create_dir_all(dir).map_err(crate::error::io(dir))?;
    let Some(first) = reports.first() else {
        return Ok(());
    };
    for (k, study) in first.temporal.iter().enumerate() {
        let mut series: Vec<CurveSeries> = Vec::new();
        for (v, r) in reports.iter().enumerate() {
            if let Some(t) = r.temporal.get(k) {
                series.extend(study_series(t, v, &format!(" it{}", r.iteration)));
            }
        }
        if series.is_empty() {
            continue;
        }
        write_svg_curves(
            &format!("{}: volume curves per iteration", study.subject_id),
            &series,
            &dir.join(format!("{}.svg", study.subject_id)),
        )?;
    }
    Ok(())
}

pub const METRIC_COLUMNS: [&str; 7] = [
    "row",
    "subject_id",
    "frame",
    "structure",
    "dice",
    "hd95_mm",
    "assd_mm",
];

fn metrics_eval(a: &EvalArgs, exec: &RayonExecutor) -> CmdResult {
    if !a.truth.is_dir() {
        return Err(Failure {
            kind: ExitKind::Data,
            error: Error::Empty(format!("{}: truth directory not found", a.truth.display())),
        });
    }
    let pred = read_data(&a.pred)?;
    let truth = read_studies(&a.truth).or_exit(ExitKind::Data)?;
    let by_id: BTreeMap<&str, &CineStudy> = truth.iter().map(|s| (s.subject_id(), s)).collect();
    check_out_file(&a.out, a.force).map_err(classify_output)?;

    let mut jobs = Vec::new();
    for p in &pred {
        let Some(t) = by_id.get(p.subject_id()) else {
            return Err(Failure {
                kind: ExitKind::Data,
                error: Error::Empty(format!("no ground truth for subject `{}`", p.subject_id())),
            });
        };
        if t.frame_count() != p.frame_count() {
            return Err(Failure {
                kind: ExitKind::Data,
                error: Error::Empty(format!(
                    "subject `{}`: {} predicted frames but {} truth frames",
                    p.subject_id(),
                    p.frame_count(),
                    t.frame_count()
                )),
            });
        }
        for f in 0..p.frame_count() {
            jobs.push((p, *t, f));
        }
    }
    type FrameMetrics = Result<PerStructure<(Option<f64>, Option<f64>, Option<f64>)>, String>;
    let results: Vec<FrameMetrics> = exec.map(&jobs, |_, &(p, t, f)| {
        let (pl, tl) = (&p.frames()[f].labels, &t.frames()[f].labels);
        let mut out = PerStructure::from_fn(|_| (None, None, None));
        for s in Structure::FOREGROUND {
            let d = dice(pl, tl, s).map_err(|e| e.to_string())?;
            let sd = surface_distances(pl, tl, s).map_err(|e| e.to_string())?;
            out[s] = (d, sd.as_ref().map(hd95), sd.as_ref().map(assd));
        }
        Ok(out)
    });

    let mut rows = Vec::new();
    let mut failures = Vec::new();
    let mut pooled: PerStructure<[Vec<f64>; 3]> = PerStructure::from_fn(|_| Default::default());
    for (&(p, _, f), r) in jobs.iter().zip(&results) {
        match r {
            Ok(m) => {
                for (s, &(d, h, asd)) in m.iter() {
                    rows.push(vec![
                        "frame".into(),
                        p.subject_id().into(),
                        f.to_string(),
                        s.name().into(),
                        fmt_opt(d),
                        fmt_opt(h),
                        fmt_opt(asd),
                    ]);
                    for (k, v) in [d, h, asd].into_iter().enumerate() {
                        pooled[s][k].extend(v);
                    }
                }
            }
            Err(e) => failures.push(format!("subject `{}` frame {f}: {e}", p.subject_id())),
        }
    }
    for (kind, pick) in [("mean", 0usize), ("std", 1)] {
        for (s, vals) in pooled.iter() {
            let cell = |v: &Vec<f64>| {
                MeanStd::of(v)
                    .map(|m| fmt_f64(if pick == 0 { m.mean } else { m.std }))
                    .unwrap_or_default()
            };
            rows.push(vec![
                kind.into(),
                String::new(),
                String::new(),
                s.name().into(),
                cell(&vals[0]),
                cell(&vals[1]),
                cell(&vals[2]),
            ]);
        }
    }
    write_file(&a.out, &csv_bytes(&METRIC_COLUMNS, &rows)).or_exit(ExitKind::Data)?;
    if !failures.is_empty() {
        for f in &failures {
            eprintln!("metric failure: {f}");
        }
        return Err(Failure {
            kind: ExitKind::Pipeline,
            error: Error::Empty(format!(
                "{} frame(s) could not be evaluated: {}",
                failures.len(),
                failures.join("; ")
            )),
        });
    }
    println!("evaluated {} frames -> {}", jobs.len(), a.out.display());
    Ok(())
}

pub const FLAG_COLUMNS: [&str; 8] = [
    "subject_id",
    "frame",
    "structure",
    "volume_mm3",
    "surface_mm2",
    "component_count",
    "flagged",
    "reasons",
];

fn qc_flag(a: &FlagArgs, exec: &RayonExecutor) -> CmdResult {
    let studies = read_data(&a.data)?;
    check_out_file(&a.out, a.force).map_err(classify_output)?;
    let frames: Vec<(&CineStudy, usize)> = studies
        .iter()
        .flat_map(|s| (0..s.frame_count()).map(move |t| (s, t)))
        .collect();
    let stats = exec.map(&frames, |_, &(s, t)| collect_stats(&s.frames()[t].labels));
    let (_, flags) = flag_cohort(&stats).or_exit(ExitKind::Data)?;
    let mut rows = Vec::new();
    for ((&(s, t), st), fl) in frames.iter().zip(&stats).zip(&flags) {
        for (k, f) in fl.iter() {
            rows.push(vec![
                s.subject_id().into(),
                t.to_string(),
                k.name().into(),
                fmt_f64(st[k].volume_mm3),
                fmt_f64(st[k].surface_mm2),
                st[k].component_count.to_string(),
                f.flagged.to_string(),
                f.reasons
                    .iter()
                    .map(|r| r.name())
                    .collect::<Vec<_>>()
                    .join(";"),
            ]);
        }
    }
    write_file(&a.out, &csv_bytes(&FLAG_COLUMNS, &rows)).or_exit(ExitKind::Data)?;
    let frac = flagged_fraction(&flags).or_exit(ExitKind::Data)?;
    println!("structure,flagged_fraction");
    for (s, f) in frac.iter() {
        println!("{},{}", s.name(), fmt_f64(*f));
    }
    Ok(())
}

fn temporal_cmd(a: &TemporalArgs, exec: &RayonExecutor) -> CmdResult {
    let studies = read_data(&a.data)?;
    let _lock = prepare_out_dir(
        &a.out,
        a.force,
        &["curves.csv", "temporal_summary.csv", "curves"],
    )
    .map_err(classify_output)?;
    let reports = exec.map(&studies, |_, s| temporal_report(s));
    let summary = cohort_temporal_summary(&reports).or_exit(ExitKind::Data)?;
    let go = || -> crate::error::Result<()> {
        write_curve_csv(&reports, &a.out.join("curves.csv"))?;
        write_temporal_summary_csv(&reports, &summary, &a.out.join("temporal_summary.csv"))?;
        let dir = a.out.join("curves");
        std::fs::create_dir_all(&dir).map_err(crate::error::io(&dir))?;
        for r in &reports {
            write_svg_curves(
                &format!("{}: volume curves", r.subject_id),
                &study_series(r, 0, ""),
                &dir.join(format!("{}.svg", r.subject_id)),
            )?;
        }
        Ok(())
    };
    go().or_exit(ExitKind::Data)?;
    println!(
        "temporal report for {} studies -> {}",
        reports.len(),
        a.out.display()
    );
    Ok(())
}
