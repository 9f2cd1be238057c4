//! Argument parsing and subcommand dispatch.

use std::collections::BTreeSet;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};
use kpt_diagnose::background::{
    background_impact_from_sets, clutter_stats, fn_heatmap, high_conf_fp_histogram,
};
use kpt_diagnose::benchmarks::{evaluate_benchmarks, BenchmarkSpec};
use kpt_diagnose::correction::{apply_correction, progressive_pr, separate_impact, CorrectionPlan};
use kpt_diagnose::data_model::{
    load_detections, load_ground_truth, write_detections, write_ground_truth, Detection,
    EvalConfig, GroundTruth, KeypointSchema,
};
use kpt_diagnose::fixtures::{generate, InjectionSpec, ScoreMode};
use kpt_diagnose::matching::evaluate;
use kpt_diagnose::scoring::{rescore, rescore_report, score_histograms};
use kpt_diagnose::taxonomy::{classify_matches, error_breakdown, ErrorKind};

use crate::error::{ReportError, Result};
use crate::pipeline::{
    analyze, default_plan_threshold, ApRow, BackgroundSummary, BenchmarkSummary, ErrorSummary,
    Options, ProgressiveSummary, RescoreSummary,
};
use crate::report::{ap_table, digest, write_file, write_report, Format};
use crate::{plots, tables};

pub const DEFAULT_SEED: u64 = 20_170_801;
pub const PARALLEL_ENV: &str = "KPT_DIAGNOSE_PARALLEL";

#[derive(Debug, Parser)]
#[command(
    name = "kpt-diagnose",
    version,
    about = "Keypoint detection evaluation and error diagnosis"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Ground-truth annotations (COCO keypoints JSON).
    #[arg(long, global = true, value_name = "PATH")]
    pub gt: Option<PathBuf>,
    /// Detections (COCO results JSON).
    #[arg(long, global = true, value_name = "PATH")]
    pub dt: Option<PathBuf>,
    /// Keypoint schema JSON; defaults to the 17-keypoint COCO person.
    #[arg(long, global = true, value_name = "PATH")]
    pub schema: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Comma-separated OKS thresholds; defaults to .50:.05:.95.
    #[arg(long, global = true, value_delimiter = ',', value_name = "LIST")]
    pub oks_thresholds: Option<Vec<f64>>,
    /// Detections kept per image, highest scores first.
    #[arg(long, global = true, value_name = "N")]
    pub max_dets: Option<usize>,
    /// Comma-separated correction stages for the progressive curves.
    #[arg(long, global = true, value_name = "LIST")]
    pub plan: Option<String>,
    /// OKS threshold of the progressive curves; .75 by default.
    #[arg(long, global = true, value_name = "T")]
    pub plan_threshold: Option<f64>,
    /// Seed for everything random.
    #[arg(long, global = true, default_value_t = DEFAULT_SEED, value_name = "N")]
    pub seed: u64,
    #[arg(long, global = true, value_enum, default_value_t = Format::Both)]
    pub format: Format,
    /// Worker threads.
    #[arg(long, global = true, env = PARALLEL_ENV, value_name = "N")]
    pub parallel: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// AP and AR per OKS threshold.
    Evaluate,
    /// Localization error breakdown and the AP impact of each error kind.
    Errors,
    /// Correct localization errors and export the corrected detections.
    Correct {
        /// Error kinds to correct.
        #[arg(
            long,
            value_delimiter = ',',
            default_value = "jitter,inversion,swap,miss"
        )]
        kinds: Vec<ErrorKind>,
    },
    /// Scoring errors and optimal rescoring.
    Rescore,
    /// Background false positives and false negatives.
    Background,
    /// Occlusion, crowding and size benchmarks.
    Benchmarks,
    /// Generate a synthetic dataset with labeled errors.
    Fixtures(FixtureArgs),
    /// Run every analysis and write the full report.
    Report,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ScoreModeArg {
    Optimal,
    Noisy,
    Random,
}

#[derive(Debug, Args)]
pub struct FixtureArgs {
    #[arg(long, default_value_t = 100)]
    pub images: usize,
    #[arg(long, default_value_t = 3)]
    pub people: usize,
    /// Injection rates as `kind=p` pairs.
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "jitter=0.15,inversion=0.05,swap=0.05,miss=0.1"
    )]
    pub rates: Vec<String>,
    #[arg(long, value_enum, default_value_t = ScoreModeArg::Noisy)]
    pub score_mode: ScoreModeArg,
    #[arg(long, default_value_t = 0.1)]
    pub noise_std: f64,
    /// Background detections per image.
    #[arg(long, default_value_t = 1)]
    pub background: usize,
    /// Probability that a person has no detection.
    #[arg(long, default_value_t = 0.1)]
    pub missed_rate: f64,
    /// Probability that a ground-truth keypoint is unlabeled.
    #[arg(long, default_value_t = 0.1)]
    pub unlabeled_rate: f64,
}

impl FixtureArgs {
    pub fn spec(&self, seed: u64) -> Result<InjectionSpec> {
        let mut rates = Vec::new();
        for pair in self.rates.iter().filter(|p| !p.trim().is_empty()) {
            let (kind, p) = pair
                .split_once('=')
                .ok_or_else(|| ReportError::Usage(format!("rate `{pair}` is not kind=p")))?;
            let kind: ErrorKind = kind
                .trim()
                .parse()
                .map_err(|e: String| ReportError::Usage(e.to_string()))?;
            let p: f64 = p
                .trim()
                .parse()
                .map_err(|_| ReportError::Usage(format!("rate `{pair}` is not a number")))?;
            rates.push((kind, p));
        }
        let mut spec = InjectionSpec::with_rates(&rates, seed);
        spec.score_mode = match self.score_mode {
            ScoreModeArg::Optimal => ScoreMode::Optimal,
            ScoreModeArg::Noisy => ScoreMode::NoisyOptimal {
                std: self.noise_std,
            },
            ScoreModeArg::Random => ScoreMode::Random,
        };
        spec.background_detections_per_image = self.background;
        spec.missed_person_rate = self.missed_rate;
        spec.unlabeled_rate = self.unlabeled_rate;
        Ok(spec)
    }
}

struct Inputs {
    schema: KeypointSchema,
    gt: GroundTruth,
    dets: Vec<Detection>,
    opts: Options,
}

fn usage_error(message: &str) -> ReportError {
    let usage = Cli::command().render_usage();
    ReportError::Usage(format!("{message}\n\n{usage}"))
}

impl Common {
    fn schema(&self) -> Result<KeypointSchema> {
        Ok(match &self.schema {
            Some(path) => KeypointSchema::load(path)?,
            None => KeypointSchema::coco_person(),
        })
    }

    fn config(&self) -> Result<EvalConfig> {
        let mut config = EvalConfig::default();
        if let Some(ts) = &self.oks_thresholds {
            config.oks_thresholds = ts.clone();
        }
        if let Some(n) = self.max_dets {
            config.max_detections_per_image = n;
        }
        config.validate()?;
        Ok(config)
    }

    fn plan(&self, config: &EvalConfig) -> Result<CorrectionPlan> {
        let t = self
            .plan_threshold
            .unwrap_or_else(|| default_plan_threshold(config));
        let plan = match &self.plan {
            Some(list) => CorrectionPlan::parse(list, t)?,
            None => CorrectionPlan::with_default_order(t),
        };
        plan.validate(config)?;
        Ok(plan)
    }

    fn inputs(&self) -> Result<Inputs> {
        let gt_path = self
            .gt
            .as_ref()
            .ok_or_else(|| usage_error("missing required --gt PATH"))?;
        let dt_path = self
            .dt
            .as_ref()
            .ok_or_else(|| usage_error("missing required --dt PATH"))?;
        let schema = self.schema()?;
        let config = self.config()?;
        let mut opts = Options::new(config, &schema);
        opts.plan = self.plan(&opts.config)?;
        let gt = load_ground_truth(gt_path, &schema)?;
        let dets = load_detections(dt_path, &schema)?;
        Ok(Inputs {
            schema,
            gt,
            dets,
            opts,
        })
    }

    fn worker_count(&self) -> Result<Option<usize>> {
        match self.parallel {
            Some(0) => Err(usage_error("--parallel must be at least 1")),
            n => Ok(n),
        }
    }
}

/// Output sink of the smaller subcommands: an optional directory plus the
/// text printed to stdout.
struct Sink<'a> {
    dir: Option<&'a Path>,
    format: Format,
}

impl Sink<'_> {
    fn json<T: serde::Serialize>(&self, name: &str, value: &T) -> Result<()> {
        if let (Some(dir), true) = (self.dir, self.format.json()) {
            let text = serde_json::to_string_pretty(value).expect("report types serialize");
            write_file(&dir.join(name), &(text + "\n"))?;
        }
        Ok(())
    }

    fn tables(&self, tables: &[tables::Table]) -> Result<()> {
        if let (Some(dir), true) = (self.dir, self.format.csv()) {
            for t in tables {
                write_file(
                    &dir.join("tables").join(format!("{}.csv", t.name)),
                    &t.to_csv()?,
                )?;
            }
        }
        Ok(())
    }

    fn plot(&self, name: &str, svg: &str) -> Result<()> {
        if let Some(dir) = self.dir {
            write_file(&dir.join("plots").join(name), svg)?;
        }
        Ok(())
    }

    fn file(&self, name: &str, contents: &str) -> Result<()> {
        if let Some(dir) = self.dir {
            write_file(&dir.join(name), contents)?;
        }
        Ok(())
    }
}

/// Parses `args` and runs the command, writing human-readable output to
/// `stdout`.
pub fn run_with<W: std::io::Write>(cli: &Cli, stdout: &mut W) -> Result<()> {
    let workers = cli.common.worker_count()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.unwrap_or(0))
        .build()
        .map_err(|e| ReportError::Usage(format!("thread pool: {e}")))?;
    let text = pool.install(|| execute(cli))?;
    stdout
        .write_all(text.as_bytes())
        .map_err(|e| ReportError::io("<stdout>", e))
}

fn execute(cli: &Cli) -> Result<String> {
    let common = &cli.common;
    if let Command::Fixtures(args) = &cli.command {
        return fixtures(common, args);
    }
    let Inputs {
        schema,
        gt,
        dets,
        opts,
    } = common.inputs()?;
    let config = &opts.config;
    let gts = &gt.instances;
    let sink = Sink {
        dir: common.out.as_deref(),
        format: common.format,
    };

    match &cli.command {
        Command::Evaluate => {
            let e = evaluate(&dets, gts, &schema, config)?;
            let rows: Vec<ApRow> = e.results.iter().map(ApRow::from).collect();
            sink.json(
                "evaluation.json",
                &serde_json::json!({"ap": rows, "coco_ap": e.coco_ap, "coco_ar": e.coco_ar}),
            )?;
            sink.tables(&[tables::ap(&rows, e.coco_ap, e.coco_ar)])?;
            Ok(format!(
                "{}\ncocoAP {:.6}  cocoAR {:.6}\n",
                ap_table(&rows),
                e.coco_ap,
                e.coco_ar
            ))
        }
        Command::Errors => {
            let e = evaluate(&dets, gts, &schema, config)?;
            let labels = classify_matches(&dets, gts, &e.match_sets, &schema, config);
            let breakdown = error_breakdown(&labels, &schema);
            let separate = separate_impact(&dets, gts, &schema, config)?;
            let summary = ErrorSummary::new(&breakdown, &separate);
            sink.json("errors.json", &summary)?;
            sink.tables(&tables::errors(&summary))?;
            sink.plot(
                "error_pie.svg",
                &plots::error_pie(&breakdown.overall, "Keypoint localization outcomes"),
            )?;
            sink.plot("errors_by_part.svg", &plots::per_part_bars(&breakdown))?;
            sink.plot("separate_impact.svg", &plots::separate_impact(&separate))?;
            let mut out = format!("{} classified keypoints\n", breakdown.overall.classified());
            for (name, f) in &summary.overall.frequency {
                out += &format!(
                    "{name:<10} {}\n",
                    f.map_or("n/a".into(), |v| format!("{v:.4}"))
                );
            }
            for k in &separate {
                for (t, d) in &k.ap_delta {
                    out += &format!("fix {:<10} OKS {t:.2}  AP {d:+.4}\n", k.kind.name());
                }
            }
            Ok(out)
        }
        Command::Correct { kinds } => {
            let kinds: BTreeSet<ErrorKind> = kinds.iter().copied().collect();
            if let Some(k) = kinds.iter().find(|k| !k.is_localization_error()) {
                return Err(usage_error(&format!(
                    "`{k}` is not a correctable error kind"
                )));
            }
            let e = evaluate(&dets, gts, &schema, config)?;
            let labels = classify_matches(&dets, gts, &e.match_sets, &schema, config);
            let outcome = apply_correction(&dets, gts, &labels, &kinds, &schema, config)?;
            let progressive = progressive_pr(&dets, gts, &opts.plan, &schema, config)?;
            let summary = ProgressiveSummary::new(&progressive, &[]);
            sink.file(
                "corrected_detections.json",
                &write_detections(&outcome.detections),
            )?;
            sink.json("oks_deltas.json", &outcome.deltas)?;
            sink.json("progressive.json", &summary)?;
            sink.tables(&tables::progressive(&summary))?;
            sink.plot("progressive_pr.svg", &plots::progressive_pr(&progressive))?;
            let raised = outcome.deltas.iter().filter(|d| d.delta() > 0.0).count();
            let mut out = format!(
                "corrected {} keypoints; OKS raised for {raised} of {} matched detections\n",
                outcome.corrected_keypoints,
                outcome.deltas.len()
            );
            for st in &summary.stages {
                out += &format!(
                    "{:<12} AP {:.4}  gain {:+.4}\n",
                    st.label, st.ap, st.ap_gain
                );
            }
            Ok(out)
        }
        Command::Rescore => {
            let report = rescore_report(&dets, gts, &schema, config)?;
            let rescored = rescore(&dets, gts, &schema, config)?;
            let histograms = score_histograms(&dets, gts, &schema, config, opts.histogram_bins)?;
            let summary = RescoreSummary {
                report,
                histograms,
                warnings: rescored.warnings,
            };
            sink.file(
                "rescored_detections.json",
                &write_detections(&rescored.detections),
            )?;
            sink.json("rescore.json", &summary)?;
            sink.tables(&tables::rescore(&summary))?;
            sink.plot(
                "score_histograms.svg",
                &plots::score_histograms(&summary.histograms),
            )?;
            Ok(format!(
                "images with detections       {}\nalready optimally ordered    {}\nscoring errors               {}\nmatch change                 {:+}\nmatches with higher OKS      {}\nhistogram overlap            {:.4} -> {:.4}\n",
                report.images_with_detections,
                report.images_with_optimal_order,
                report.scoring_errors,
                report.match_increase,
                report.matches_with_oks_improvement,
                summary.histograms.original.overlap,
                summary.histograms.optimal.overlap
            ))
        }
        Command::Background => {
            let e = evaluate(&dets, gts, &schema, config)?;
            let sets = &e.match_sets;
            let impact = background_impact_from_sets(sets, config)?;
            let fp = high_conf_fp_histogram(&dets, sets);
            let heat = fn_heatmap(gts, sets, &gt.images, opts.heatmap_grid);
            let summary = BackgroundSummary::new(&impact, &fp, clutter_stats(gts, sets), &heat);
            sink.json("background.json", &summary)?;
            sink.tables(&tables::background(&summary))?;
            sink.plot("fp_area.svg", &plots::fp_area_histogram(&fp))?;
            sink.plot("fn_heatmap.svg", &plots::fn_heatmap(&heat))?;
            let mut out = String::new();
            for b in &impact {
                out += &format!(
                    "OKS {:.2}  AP {:.4}  without FN {:.4}  without FP {:.4}\n",
                    b.threshold, b.ap, b.ap_without_fn, b.ap_without_fp
                );
            }
            Ok(out)
        }
        Command::Benchmarks => {
            let e = evaluate(&dets, gts, &schema, config)?;
            let labels = classify_matches(&dets, gts, &e.match_sets, &schema, config);
            let report = evaluate_benchmarks(
                &e.match_sets,
                &labels,
                gts,
                e.coco_ap,
                &BenchmarkSpec::for_keypoints(schema.len()),
                &schema,
                config,
            )?;
            let summary = BenchmarkSummary::from(&report);
            sink.json("benchmarks.json", &summary)?;
            sink.json("benchmark_manifest.json", &report.partition.manifest())?;
            sink.tables(&tables::benchmarks(&summary))?;
            sink.plot("benchmarks.svg", &plots::benchmark_grid(&report))?;
            let mut out = String::new();
            for c in &summary.cells {
                out += &format!(
                    "{:<16} {:>6} gts  cocoAP {}\n",
                    c.id,
                    c.gt_count,
                    c.coco_ap.map_or("n/a".into(), |v| format!("{v:.4}"))
                );
            }
            Ok(out)
        }
        Command::Report => {
            let analysis = analyze(&gt, &dets, &schema, &opts)?;
            let dir = common
                .out
                .as_deref()
                .ok_or_else(|| usage_error("report needs --out DIR"))?;
            write_report(dir, &analysis, common.format)?;
            Ok(digest(&analysis.summary()))
        }
        Command::Fixtures(_) => unreachable!("handled above"),
    }
}

fn fixtures(common: &Common, args: &FixtureArgs) -> Result<String> {
    let dir = common
        .out
        .as_deref()
        .ok_or_else(|| usage_error("fixtures needs --out DIR"))?;
    let schema = common.schema()?;
    let config = common.config()?;
    let spec = args.spec(common.seed)?;
    let set = generate(args.images, args.people, &spec, &schema, &config)?;
    write_file(&dir.join("gt.json"), &write_ground_truth(&set.ground_truth))?;
    write_file(&dir.join("dt.json"), &write_detections(&set.detections))?;
    write_file(&dir.join("truth.json"), &set.truth_json(&spec))?;
    write_file(&dir.join("schema.json"), &schema.to_json())?;
    Ok(format!(
        "{} images, {} ground truths, {} detections, {} injections skipped\n",
        set.ground_truth.images.len(),
        set.ground_truth.instances.len(),
        set.detections.len(),
        set.skipped
    ))
}

/// Entry point of the binary: returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let stdout = std::io::stdout();
    match run_with(&cli, &mut stdout.lock()) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(std::io::stderr(), "error: {e}");
            e.exit_code()
        }
    }
}
