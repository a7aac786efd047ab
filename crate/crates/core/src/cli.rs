//! Command-line front end: `evaluate`, `degrade`, `synth` and `validate`.
//!
//! Settings come from flags and an optional TOML config file (`--config`);
//! a flag wins over the same key in the file. Exit codes: 0 success, 2 usage
//! error, 3 data validation failure, 4 pipeline failure. Failures print one
//! JSON line on stderr: `{"error":<kind>,"code":<exit>,"message":<text>}`.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::data_model::{validate_dataset, DemographicGroup, ValidationReport};
use crate::degrade::{run_ladder_batch, LadderKind};
use crate::error::Error;
use crate::ingest::{
    read_embeddings, read_image_manifest, read_manifest, write_embeddings, write_image_manifest, write_manifest,
};
use crate::matching::{
    degenerate_probes, gallery_size_sweep, one_to_one_distributions, rank_one_scores, write_rank_one_csv, PairOptions,
};
use crate::metrics::{build_report, write_histogram_csv, write_reports_csv, HistogramSpec, MetricParams, MetricReport};
use crate::partition::{build_balanced_split, build_split, time_between_mated, BalanceSpec};
use crate::synth::{generate, SynthSpec};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_PIPELINE: i32 = 4;

#[derive(Debug, Parser)]
#[command(
    name = "identik",
    version,
    about = "Rank-one identification accuracy and demographic disparity metrics"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Split, match and report per-group metrics.
    Evaluate(EvaluateArgs),
    /// Write blurred or reduced-resolution versions of probe images.
    Degrade(DegradeArgs),
    /// Generate a synthetic manifest and embedding file.
    Synth(SynthArgs),
    /// Check a manifest and embedding file for consistency.
    Validate(ValidateArgs),
}

#[derive(Debug, Default, Args)]
pub struct EvaluateArgs {
    /// TOML file with any of the options below (flags take precedence).
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Equal identities and enrolled images per group.
    #[arg(long)]
    pub balanced: bool,
    #[arg(long)]
    pub identities_per_group: Option<usize>,
    #[arg(long)]
    pub enrolled_per_identity: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Matching threads; 0 uses all cores.
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long)]
    pub tail_mass: Option<f64>,
    #[arg(long)]
    pub target_fmr: Option<f64>,
    /// Fixed similarity threshold for FMR/FNMR and open-set FPIR.
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long)]
    pub hist_bins: Option<usize>,
    /// Also compute 1-to-1 genuine / impostor distributions per group.
    #[arg(long)]
    pub one_to_one: bool,
    /// Keep each 1-to-1 impostor pair with this probability.
    #[arg(long)]
    pub impostor_rate: Option<f64>,
    /// Include cross-group impostor pairs in each group's 1-to-1 distribution.
    #[arg(long)]
    pub cross_cohort: bool,
    /// Comma-separated gallery sizes (in subjects) for a nested sweep.
    #[arg(long, value_delimiter = ',')]
    pub sweep_sizes: Option<Vec<usize>>,
}

#[derive(Debug, Default, Args)]
pub struct DegradeArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Image manifest (`image_id,path`), paths relative to the manifest.
    #[arg(long)]
    pub images: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// `blur` or `resolution`.
    #[arg(long)]
    pub ladder: Option<String>,
    #[arg(long)]
    pub workers: Option<usize>,
}

#[derive(Debug, Default, Args)]
pub struct SynthArgs {
    /// Synthetic dataset spec (TOML, or JSON with a .json extension).
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Overrides the spec's seed.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Default, Args)]
pub struct ValidateArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
}

/// Keys accepted in a `--config` file.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub manifest: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
    pub images: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub balanced: Option<bool>,
    pub identities_per_group: Option<usize>,
    pub enrolled_per_identity: Option<usize>,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub tail_mass: Option<f64>,
    pub target_fmr: Option<f64>,
    pub threshold: Option<f64>,
    pub hist_bins: Option<usize>,
    pub one_to_one: Option<bool>,
    pub impostor_rate: Option<f64>,
    pub cross_cohort: Option<bool>,
    pub sweep_sizes: Option<Vec<usize>>,
    pub ladder: Option<String>,
}

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub kind: String,
    pub message: String,
}

impl CliError {
    fn usage(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_USAGE,
            kind: "Usage".into(),
            message: message.into(),
        }
    }

    /// The single stderr line for this error.
    pub fn to_line(&self) -> String {
        serde_json::json!({ "error": self.kind, "code": self.code, "message": self.message }).to_string()
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        Self {
            code: if e.is_data_error() { EXIT_DATA } else { EXIT_PIPELINE },
            kind: e.kind().into(),
            message: e.to_string(),
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum SplitMode {
    Full,
    Balanced(BalanceSpec),
}

/// Fully resolved settings for `evaluate`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunConfig {
    pub manifest: PathBuf,
    pub embeddings: PathBuf,
    pub out: PathBuf,
    pub split: SplitMode,
    pub metrics: MetricParams,
    pub workers: usize,
    pub seed: u64,
    pub one_to_one: Option<PairOptions>,
    pub sweep_sizes: Vec<usize>,
}

fn load_file_config(path: Option<&Path>) -> CliResult<FileConfig> {
    let Some(path) = path else {
        return Ok(FileConfig::default());
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::usage(format!("cannot read config {}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| CliError::usage(format!("bad config {}: {e}", path.display())))
}

fn required<T>(value: Option<T>, name: &str) -> CliResult<T> {
    value.ok_or_else(|| CliError::usage(format!("missing --{name}")))
}

fn existing(path: PathBuf, name: &str) -> CliResult<PathBuf> {
    if path.exists() {
        Ok(path)
    } else {
        Err(CliError::usage(format!("--{name} {} does not exist", path.display())))
    }
}

impl RunConfig {
    pub fn resolve(args: EvaluateArgs) -> CliResult<Self> {
        let file = load_file_config(args.config.as_deref())?;
        let manifest = existing(required(args.manifest.or(file.manifest), "manifest")?, "manifest")?;
        let embeddings = existing(
            required(args.embeddings.or(file.embeddings), "embeddings")?,
            "embeddings",
        )?;
        let out = required(args.out.or(file.out), "out")?;
        let seed = args.seed.or(file.seed).unwrap_or(0);
        let balanced = args.balanced || file.balanced.unwrap_or(false);
        let split = if balanced {
            SplitMode::Balanced(BalanceSpec {
                identities_per_group: required(
                    args.identities_per_group.or(file.identities_per_group),
                    "identities-per-group",
                )?,
                enrolled_per_identity: args.enrolled_per_identity.or(file.enrolled_per_identity).unwrap_or(1),
                rng_seed: seed,
            })
        } else {
            SplitMode::Full
        };
        let mut histogram = HistogramSpec::default();
        if let Some(bins) = args.hist_bins.or(file.hist_bins) {
            histogram.bins = bins;
        }
        let metrics = MetricParams {
            tail_mass: args
                .tail_mass
                .or(file.tail_mass)
                .unwrap_or(crate::metrics::DEFAULT_TAIL_MASS),
            histogram,
            threshold: args.threshold.or(file.threshold),
            target_fmr: args.target_fmr.or(file.target_fmr),
        };
        let one_to_one = (args.one_to_one || file.one_to_one.unwrap_or(false)).then(|| PairOptions {
            impostor_rate: args.impostor_rate.or(file.impostor_rate),
            rng_seed: seed,
            cross_cohort: args.cross_cohort || file.cross_cohort.unwrap_or(false),
        });
        Ok(Self {
            manifest,
            embeddings,
            out,
            split,
            metrics,
            workers: args.workers.or(file.workers).unwrap_or(0),
            seed,
            one_to_one,
            sweep_sizes: args.sweep_sizes.or(file.sweep_sizes).unwrap_or_default(),
        })
    }
}

fn create_dir(path: &Path) -> CliResult<()> {
    std::fs::create_dir_all(path).map_err(|e| Error::io(path, e).into())
}

fn write_with(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> CliResult<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    f(&mut w).and_then(|_| w.flush()).map_err(|e| Error::io(path, e).into())
}

fn write_text(path: &Path, text: &str) -> CliResult<()> {
    write_with(path, |w| w.write_all(text.as_bytes()))
}

#[derive(Serialize)]
struct Diagnostics<'a> {
    schema: &'a str,
    n_probes: usize,
    n_gallery_images: usize,
    singleton_subjects: Vec<&'a str>,
    degenerate_probes: Vec<&'a str>,
    validation: &'a ValidationReport,
}

/// Runs the evaluation pipeline and writes all outputs into `config.out`.
/// Returns the per-group reports in group order.
pub fn cmd_evaluate(config: &RunConfig) -> CliResult<Vec<MetricReport>> {
    let records = read_manifest(&config.manifest)?;
    let store = read_embeddings(&config.embeddings)?;
    let validation = validate_dataset(&records, &store);
    if !validation.is_valid() {
        return Err(Error::ValidationFailed(validation.summary()).into());
    }
    let split = match &config.split {
        SplitMode::Full => build_split(&records),
        SplitMode::Balanced(spec) => build_balanced_split(&records, spec)?,
    };
    let results = rank_one_scores(&split, &records, &store, config.workers)?;

    let groups: Vec<DemographicGroup> = results
        .iter()
        .map(|r| r.group.clone())
        .collect::<std::collections::BTreeSet<_>>()
        .into_iter()
        .collect();
    let mut reports = Vec::with_capacity(groups.len());
    for group in &groups {
        let pairs = match &config.one_to_one {
            Some(opts) => Some(one_to_one_distributions(&records, &store, Some(group), opts)?),
            None => None,
        };
        reports.push(build_report(&results, pairs.as_ref(), group, &config.metrics)?);
    }

    let out = &config.out;
    create_dir(out)?;
    write_text(&out.join("split.json"), &split.to_json()?)?;
    write_with(&out.join("rank_one.csv"), |w| write_rank_one_csv(&results, w))?;
    write_with(&out.join("summary.csv"), |w| write_reports_csv(&reports, w))?;
    for report in &reports {
        let slug = report.group.slug();
        write_text(&out.join(format!("report_{slug}.json")), &report.to_json()?)?;
        write_with(&out.join(format!("report_{slug}.csv")), |w| {
            write_reports_csv(std::slice::from_ref(report), w)
        })?;
        write_with(&out.join(format!("histogram_{slug}.csv")), |w| {
            write_histogram_csv(&report.diff_histogram, w)
        })?;
    }

    let gaps = time_between_mated(&split, &records)?;
    write_with(&out.join("time_between_mated.csv"), |w| {
        writeln!(w, "group,n,mean_days,std_days,min_days,max_days")?;
        for (g, s) in &gaps {
            writeln!(w, "{},{},{},{},{},{}", g.key(), s.n, s.mean, s.std_dev, s.min, s.max)?;
        }
        Ok(())
    })?;

    if !config.sweep_sizes.is_empty() {
        let sweep = gallery_size_sweep(
            &split,
            &records,
            &store,
            &config.sweep_sizes,
            config.seed,
            config.workers,
        )?;
        write_with(&out.join("gallery_sweep.csv"), |w| {
            writeln!(w, "gallery_subjects,n,mean,std_dev,min,max")?;
            for p in &sweep.points {
                match p.stats {
                    Some(s) => writeln!(w, "{},{},{},{},{},{}", p.size, s.n, s.mean, s.std_dev, s.min, s.max)?,
                    None => writeln!(w, "{},0,,,,", p.size)?,
                }
            }
            Ok(())
        })?;
    }

    let diagnostics = Diagnostics {
        schema: crate::REPORT_SCHEMA,
        n_probes: split.probe_count(),
        n_gallery_images: split.gallery_image_count(),
        singleton_subjects: split.singleton_subjects.iter().map(String::as_str).collect(),
        degenerate_probes: degenerate_probes(&results),
        validation: &validation,
    };
    write_text(
        &out.join("diagnostics.json"),
        &serde_json::to_string_pretty(&diagnostics).map_err(Error::from)?,
    )?;
    Ok(reports)
}

/// Outcome of `degrade`: outputs written per level and failed image ids.
#[derive(Debug, Default, PartialEq)]
pub struct DegradeSummary {
    pub written: BTreeMap<String, usize>,
    pub failed: Vec<String>,
}

pub fn cmd_degrade(args: DegradeArgs) -> CliResult<DegradeSummary> {
    let file = load_file_config(args.config.as_deref())?;
    let images = existing(required(args.images.or(file.images), "images")?, "images")?;
    let out = required(args.out.or(file.out), "out")?;
    let kind: LadderKind = required(args.ladder.or(file.ladder), "ladder")?
        .parse()
        .map_err(|e: Error| CliError::usage(e.to_string()))?;
    let workers = args.workers.or(file.workers).unwrap_or(0);

    let entries = read_image_manifest(&images)?;
    if entries.is_empty() {
        eprintln!("warning: {} lists no images; nothing to do", images.display());
        return Ok(DegradeSummary::default());
    }
    let base = images.parent().unwrap_or(Path::new("."));
    let outcome = run_ladder_batch(&entries, base, kind, &out, workers)?;
    let mut summary = DegradeSummary::default();
    for (tag, level) in &outcome.levels {
        write_image_manifest(level, out.join(tag).join("manifest.csv"))?;
        summary.written.insert(tag.clone(), level.len());
    }
    if !outcome.failures.is_empty() {
        write_with(&out.join("failures.csv"), |w| {
            writeln!(w, "image_id,reason")?;
            for f in &outcome.failures {
                writeln!(w, "{},{}", f.image_id, f.reason.replace([',', '\n'], " "))?;
            }
            Ok(())
        })?;
        summary.failed = outcome.failures.iter().map(|f| f.image_id.clone()).collect();
    }
    Ok(summary)
}

pub fn cmd_synth(args: SynthArgs) -> CliResult<SynthSpec> {
    let text = std::fs::read_to_string(&args.config)
        .map_err(|e| CliError::usage(format!("cannot read {}: {e}", args.config.display())))?;
    let mut spec = if args.config.extension().is_some_and(|e| e == "json") {
        SynthSpec::from_json(&text)?
    } else {
        SynthSpec::from_toml(&text)?
    };
    if let Some(seed) = args.seed {
        spec.rng_seed = seed;
    }
    let (records, store) = generate(&spec)?;
    create_dir(&args.out)?;
    write_manifest(&records, args.out.join("manifest.csv"))?;
    write_embeddings(&store, args.out.join("embeddings.emb"))?;
    Ok(spec)
}

pub fn cmd_validate(args: ValidateArgs) -> CliResult<ValidationReport> {
    let file = load_file_config(args.config.as_deref())?;
    let manifest = existing(required(args.manifest.or(file.manifest), "manifest")?, "manifest")?;
    let embeddings = existing(
        required(args.embeddings.or(file.embeddings), "embeddings")?,
        "embeddings",
    )?;
    let records = read_manifest(manifest)?;
    let store = read_embeddings(embeddings)?;
    Ok(validate_dataset(&records, &store))
}

pub fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Evaluate(args) => {
            let config = RunConfig::resolve(args)?;
            for r in cmd_evaluate(&config)? {
                let fmt = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.4}"));
                println!(
                    "{}: probes={} d'={} delta={} fpir={}",
                    r.group_key,
                    r.n_probes,
                    fmt(r.d_prime),
                    fmt(r.delta_tail),
                    fmt(r.fpir_rank_one)
                );
            }
            Ok(())
        }
        Command::Degrade(args) => {
            let summary = cmd_degrade(args)?;
            for (tag, n) in &summary.written {
                println!("{tag}: {n} images");
            }
            if summary.failed.is_empty() {
                Ok(())
            } else {
                Err(CliError {
                    code: EXIT_PIPELINE,
                    kind: "DegradeFailures".into(),
                    message: format!("{} image(s) failed: {}", summary.failed.len(), summary.failed.join(" ")),
                })
            }
        }
        Command::Synth(args) => {
            let out = args.out.clone();
            let spec = cmd_synth(args)?;
            let images: usize = spec.groups.iter().map(|g| g.n_subjects * g.images_per_subject).sum();
            println!("wrote {images} images to {}", out.display());
            Ok(())
        }
        Command::Validate(args) => {
            let report = cmd_validate(args)?;
            println!("{}", serde_json::to_string_pretty(&report).map_err(Error::from)?);
            if report.is_valid() {
                Ok(())
            } else {
                Err(Error::ValidationFailed(report.summary()).into())
            }
        }
    }
}

/// Parses `args` (including the program name), runs, and returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("{}", e.to_line());
            e.code
        }
    }
}
