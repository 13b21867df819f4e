//! Command-line driver: `match`, `bench` and `synth`.
//!
//! Exit codes: 0 on success, 2 for usage or input problems, 1 for internal
//! failures.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::bench::{run_benchmark, BenchError};
use crate::matcher::{extract_network, MatchError, MatchReport};
use crate::metrics::{zscore, Metric, MetricKind, Template};
use crate::nifti::{self, NiftiHeader};
use crate::pardata::{ExecutionConfig, Executor, PardataError};
use crate::report;
use crate::synth::{self, SynthSpec};
use crate::volume::Volume;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INTERNAL: i32 = 1;
pub const EXIT_INPUT: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "neuromatch",
    version,
    about = "Template matching of brain component maps",
    args_override_self = true
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Rank components against a template and select the best match.
    Match(MatchArgs),
    /// Time scoring with one worker versus many.
    Bench(BenchArgs),
    /// Write a synthetic component set and template as NIfTI files.
    Synth(SynthArgs),
}

#[derive(Debug, Clone, Args)]
pub struct ScoringArgs {
    /// Similarity metric.
    #[arg(long, default_value = "ssd")]
    pub metric: MetricKind,
    /// Parallel lanes (defaults to the number of logical CPUs).
    #[arg(long)]
    pub workers: Option<usize>,
    /// Dataset partitions (defaults to the worker count).
    #[arg(long)]
    pub partitions: Option<usize>,
    /// Z-score components and template before scoring.
    #[arg(long)]
    pub zscore: bool,
    /// Candidate binarization threshold for Dice.
    #[arg(long, default_value_t = 0.0)]
    pub dice_threshold: f64,
    /// Template binarization threshold for Dice.
    #[arg(long, default_value_t = 0.5)]
    pub template_threshold: f64,
}

#[derive(Debug, Clone, Args)]
pub struct SynthOptions {
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long, default_value_t = 84)]
    pub n_components: usize,
    /// Volume extents as NX,NY,NZ.
    #[arg(long, default_value = "64,64,64", value_parser = parse_dims)]
    pub dims: [usize; 3],
    #[arg(long, default_value_t = 0.1)]
    pub noise_sigma: f64,
    #[arg(long)]
    pub planted_index: Option<usize>,
}

impl SynthOptions {
    fn spec(&self, mask_threshold: f64) -> SynthSpec {
        SynthSpec {
            seed: self.seed,
            n_components: self.n_components,
            dims: self.dims,
            noise_sigma: self.noise_sigma,
            planted_index: self.planted_index,
            mask_threshold,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct MatchArgs {
    /// Directory of .nii/.nii.gz files, or a single 4D file.
    #[arg(long)]
    pub components: Option<PathBuf>,
    /// Template volume file.
    #[arg(long)]
    pub template: Option<PathBuf>,
    #[command(flatten)]
    pub scoring: ScoringArgs,
    #[arg(long)]
    pub out_csv: Option<PathBuf>,
    #[arg(long)]
    pub out_json: Option<PathBuf>,
    /// Write the selected component here (gzip when the name ends in .gz).
    #[arg(long)]
    pub out_nii: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct BenchArgs {
    /// Components to time; a synthetic set is generated when omitted.
    #[arg(long, requires = "template")]
    pub components: Option<PathBuf>,
    #[arg(long, requires = "components")]
    pub template: Option<PathBuf>,
    #[command(flatten)]
    pub scoring: ScoringArgs,
    #[command(flatten)]
    pub synth: SynthOptions,
    #[arg(long, default_value_t = 5)]
    pub reps: usize,
    #[arg(long)]
    pub out_json: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub out_dir: PathBuf,
    #[command(flatten)]
    pub synth: SynthOptions,
    #[arg(long, default_value_t = 0.5)]
    pub template_threshold: f64,
}

fn parse_dims(s: &str) -> Result<[usize; 3], String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let [x, y, z] = parts.as_slice() else {
        return Err(format!("expected NX,NY,NZ, got '{s}'"));
    };
    let parse = |p: &str| {
        p.parse::<usize>()
            .map_err(|e| format!("bad extent '{p}': {e}"))
    };
    Ok([parse(x)?, parse(y)?, parse(z)?])
}

/// A failure with its exit code.
#[derive(Debug)]
pub enum CliError {
    Input(String),
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => EXIT_INPUT,
            CliError::Internal(_) => EXIT_INTERNAL,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Input(m) | CliError::Internal(m) => m,
        }
    }
}

fn input(msg: impl Into<String>) -> CliError {
    CliError::Input(msg.into())
}

impl From<PardataError> for CliError {
    fn from(e: PardataError) -> Self {
        match e {
            PardataError::Pool(_) => CliError::Internal(e.to_string()),
            other => input(other.to_string()),
        }
    }
}

/// Components plus the header of the file each one came from.
struct ComponentSet {
    volumes: Vec<Volume>,
    headers: Vec<NiftiHeader>,
    source: Vec<usize>,
}

fn load_file(path: &Path) -> Result<nifti::LoadedNifti, CliError> {
    let loaded = nifti::load(path).map_err(|e| input(format!("{}: {e}", path.display())))?;
    if loaded.non_finite_replaced > 0 {
        eprintln!(
            "{}: replaced {} non-finite voxels with 0",
            path.display(),
            loaded.non_finite_replaced
        );
    }
    Ok(loaded)
}

fn is_nifti_name(path: &Path) -> bool {
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy())
        .unwrap_or_default();
    name.ends_with(".nii") || name.ends_with(".nii.gz")
}

/// Loads a 4D file or every NIfTI file in a directory, in name order. The
/// template file is skipped when it lives in that directory.
fn load_components(path: &Path, template: &Path) -> Result<ComponentSet, CliError> {
    let files = if path.is_dir() {
        let template = fs::canonicalize(template).ok();
        let mut files: Vec<PathBuf> = fs::read_dir(path)
            .map_err(|e| input(format!("{}: {e}", path.display())))?
            .filter_map(|entry| entry.ok().map(|e| e.path()))
            .filter(|p| p.is_file() && is_nifti_name(p))
            .filter(|p| template.is_none() || fs::canonicalize(p).ok() != template)
            .collect();
        files.sort();
        if files.is_empty() {
            return Err(input(format!(
                "{}: no .nii or .nii.gz files",
                path.display()
            )));
        }
        files
    } else {
        vec![path.to_path_buf()]
    };
    let mut set = ComponentSet {
        volumes: Vec::new(),
        headers: Vec::new(),
        source: Vec::new(),
    };
    for file in &files {
        let loaded = load_file(file)?;
        let header_index = set.headers.len();
        set.source
            .extend(std::iter::repeat(header_index).take(loaded.volumes.len()));
        set.volumes.extend(loaded.volumes);
        set.headers.push(loaded.header);
    }
    Ok(set)
}

fn load_template(path: &Path, threshold: f64) -> Result<Template, CliError> {
    let mut loaded = load_file(path)?;
    if loaded.volumes.len() != 1 {
        return Err(input(format!(
            "{}: template must hold one volume, found {}",
            path.display(),
            loaded.volumes.len()
        )));
    }
    let volume = loaded.volumes.pop().expect("one volume");
    Template::new(volume, threshold).map_err(|e| input(format!("template threshold: {e}")))
}

fn execution_config(scoring: &ScoringArgs) -> Result<ExecutionConfig, CliError> {
    let cfg = match scoring.workers {
        Some(w) => ExecutionConfig::new(w)?,
        None => ExecutionConfig::default(),
    };
    Ok(match scoring.partitions {
        Some(k) => cfg.with_partitions(k)?,
        None => cfg,
    })
}

fn metric(scoring: &ScoringArgs) -> Result<Metric, CliError> {
    if !scoring.dice_threshold.is_finite() {
        return Err(input("--dice-threshold must be finite"));
    }
    Ok(Metric::new(scoring.metric, scoring.dice_threshold))
}

/// Z-scores every component on the dataset engine, plus the template.
fn normalize(
    components: Vec<Volume>,
    template: Template,
    cfg: &ExecutionConfig,
) -> Result<(Vec<Volume>, Template), CliError> {
    let executor = Executor::new(cfg)?;
    let ds = executor.parallelize(components.iter().enumerate().collect(), cfg.partitions())?;
    let normalized = ds
        .try_map(|&(i, v)| zscore(v).map_err(|e| (i, v.label().to_owned(), e)))
        .map_err(|(i, label, e)| input(format!("component {i} ({label}): {e}")))?
        .into_vec();
    let threshold = template.mask_threshold();
    let t = zscore(template.volume()).map_err(|e| input(format!("template: {e}")))?;
    let template = Template::new(t, threshold).map_err(|e| input(e.to_string()))?;
    Ok((normalized, template))
}

fn match_error(e: MatchError, components: &[Volume]) -> CliError {
    match &e {
        MatchError::DimMismatch { index, .. } | MatchError::Metric { index, .. } => {
            input(format!("{e} [{}]", components[*index].label()))
        }
        MatchError::Pardata(p) => p.clone().into(),
        MatchError::MixedMetrics => CliError::Internal(e.to_string()),
        MatchError::EmptyInput => input(e.to_string()),
    }
}

fn write_output(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    fs::write(path, bytes).map_err(|e| input(format!("{}: {e}", path.display())))
}

fn run_scoring(
    components: &[Volume],
    template: &Template,
    scoring: &ScoringArgs,
    cfg: &ExecutionConfig,
) -> Result<(MatchReport, usize), CliError> {
    let (report, _) = extract_network(components, template, metric(scoring)?, cfg)
        .map_err(|e| match_error(e, components))?;
    let selected = report.selected;
    Ok((report, selected))
}

pub fn cmd_match(args: &MatchArgs) -> Result<MatchReport, CliError> {
    let components_path = args
        .components
        .as_deref()
        .ok_or_else(|| input("--components is required"))?;
    let template_path = args
        .template
        .as_deref()
        .ok_or_else(|| input("--template is required"))?;
    let cfg = execution_config(&args.scoring)?;
    let set = load_components(components_path, template_path)?;
    let mut template = load_template(template_path, args.scoring.template_threshold)?;
    let originals = set.volumes;
    let normalized;
    let scored: &[Volume] = if args.scoring.zscore {
        let (n, t) = normalize(originals.clone(), template, &cfg)?;
        normalized = n;
        template = t;
        &normalized
    } else {
        &originals
    };

    let (report, selected) = run_scoring(scored, &template, &args.scoring, &cfg)?;

    if let Some(path) = &args.out_csv {
        write_output(path, &report::csv_bytes(&report))?;
    }
    if let Some(path) = &args.out_json {
        write_output(path, report::json_string(&report).as_bytes())?;
    }
    if let Some(path) = &args.out_nii {
        let reference = &set.headers[set.source[selected]];
        nifti::write_volume_file(path, &originals[selected], Some(reference))
            .map_err(|e| input(format!("{}: {e}", path.display())))?;
    }
    let best = report.best();
    println!(
        "selected component {} ({}) {}={:.9} of {} components [{} workers, {:.3} s]",
        best.component_index,
        best.component_label,
        report.metric,
        best.value,
        report.component_count,
        report.workers,
        report.elapsed_seconds
    );
    Ok(report)
}

pub fn cmd_bench(args: &BenchArgs) -> Result<crate::bench::BenchmarkResult, CliError> {
    let cfg = execution_config(&args.scoring)?;
    let (components, template) = match (&args.components, &args.template) {
        (Some(c), Some(t)) => (
            load_components(c, t)?.volumes,
            load_template(t, args.scoring.template_threshold)?,
        ),
        (None, None) => synth::generate(&args.synth.spec(args.scoring.template_threshold))
            .map_err(|e| input(e.to_string()))?,
        _ => return Err(input("--components and --template must be given together")),
    };
    let (components, template) = if args.scoring.zscore {
        normalize(components, template, &cfg)?
    } else {
        (components, template)
    };
    let result = run_benchmark(
        &components,
        &template,
        metric(&args.scoring)?,
        &cfg,
        args.reps,
    )
    .map_err(|e| match e {
        BenchError::NoRepetitions => input("--reps must be >= 1"),
        BenchError::Match(m) => match_error(m, &components),
        other => CliError::Internal(other.to_string()),
    })?;
    print!("{}", result.table());
    if let Some(path) = &args.out_json {
        let json =
            serde_json::to_string_pretty(&result).map_err(|e| CliError::Internal(e.to_string()))?;
        write_output(path, json.as_bytes())?;
    }
    Ok(result)
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    spec: &'a SynthSpec,
    template: String,
    components: Vec<String>,
}

pub fn cmd_synth(args: &SynthArgs) -> Result<Vec<PathBuf>, CliError> {
    let spec = args.synth.spec(args.template_threshold);
    let (components, template) = synth::generate(&spec).map_err(|e| input(e.to_string()))?;
    fs::create_dir_all(&args.out_dir)
        .map_err(|e| input(format!("{}: {e}", args.out_dir.display())))?;
    let width = (spec.n_components - 1).to_string().len().max(3);
    let mut written = Vec::with_capacity(components.len() + 2);
    let mut names = Vec::with_capacity(components.len());
    for (i, volume) in components.iter().enumerate() {
        let name = format!("comp_{i:0width$}.nii.gz");
        let path = args.out_dir.join(&name);
        nifti::write_volume_file(&path, volume, None)
            .map_err(|e| input(format!("{}: {e}", path.display())))?;
        written.push(path);
        names.push(name);
    }
    let template_name = "template.nii.gz".to_owned();
    let template_path = args.out_dir.join(&template_name);
    nifti::write_volume_file(&template_path, template.volume(), None)
        .map_err(|e| input(format!("{}: {e}", template_path.display())))?;
    written.push(template_path);
    let manifest = Manifest {
        spec: &spec,
        template: template_name,
        components: names,
    };
    let manifest_path = args.out_dir.join("manifest.json");
    let json =
        serde_json::to_string_pretty(&manifest).map_err(|e| CliError::Internal(e.to_string()))?;
    write_output(&manifest_path, json.as_bytes())?;
    written.push(manifest_path);
    println!(
        "wrote {} components and template to {}",
        spec.n_components,
        args.out_dir.display()
    );
    Ok(written)
}

pub fn execute(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Match(args) => cmd_match(args).map(drop),
        Command::Bench(args) => cmd_bench(args).map(drop),
        Command::Synth(args) => cmd_synth(args).map(drop),
    }
}

/// Parses `args` (including the program name) and runs; returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
        }
    };
    match execute(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {}", e.message());
            e.exit_code()
        }
    }
}
