//! `okmk`: fit, benchmark, project and generate overlapping clusterings.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};

use overlapping_kmeans::eval::{evaluate, LabelSets};
use overlapping_kmeans::harness::io::{
    read_json, read_memberships, write_json, EmbeddingReport,
};
use overlapping_kmeans::harness::{
    gen_synthetic, load_csv, load_gram, run_benchmark, write_csv, Dataset, FitReport, LabelColumn,
    MethodSpec, Preset, SolverKind, SyntheticMode, SyntheticSpec,
};
use overlapping_kmeans::kernels::{gram, GramMatrix, KernelSpec, DEFAULT_POLY_OFFSET};
use overlapping_kmeans::{okm, okmk, projection, InitPolicy, OkmError, Result, SolverConfig};

#[derive(Parser)]
#[command(name = "okmk", version, about = "Overlapping k-means in input space or kernel feature space")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Cluster one dataset and write the memberships and objective trace.
    Fit(FitArgs),
    /// Compare several methods over shared random initializations.
    Bench(BenchArgs),
    /// Two-dimensional PCA or kernel PCA view of a dataset.
    Project(ProjectArgs),
    /// Generate a labeled synthetic dataset as CSV.
    Gen(GenArgs),
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct Source {
    /// Feature CSV; a non-numeric last column is read as `;`-separated labels.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Precomputed gram matrix (`# gram N=<n>` header, then N rows).
    #[arg(long)]
    gram: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum KernelKind {
    Linear,
    Poly,
    Rbf,
}

#[derive(Args)]
struct KernelArgs {
    /// Kernel for the feature-space solver.
    #[arg(long, value_enum)]
    kernel: Option<KernelKind>,
    /// RBF bandwidth.
    #[arg(long)]
    sigma: Option<f64>,
    /// Polynomial degree (may be fractional).
    #[arg(long)]
    degree: Option<f64>,
    /// Polynomial offset.
    #[arg(long, default_value_t = DEFAULT_POLY_OFFSET)]
    offset: f64,
}

impl KernelArgs {
    fn spec(&self) -> Result<Option<KernelSpec>> {
        let missing = |flag: &str, kind: &str| {
            OkmError::InvalidConfig(format!("--kernel {kind} requires --{flag}"))
        };
        let spec = match self.kernel {
            None => return Ok(None),
            Some(KernelKind::Linear) => KernelSpec::Linear,
            Some(KernelKind::Poly) => KernelSpec::Polynomial {
                degree: self.degree.ok_or_else(|| missing("degree", "poly"))?,
                offset: self.offset,
            },
            Some(KernelKind::Rbf) => KernelSpec::rbf(self.sigma.ok_or_else(|| missing("sigma", "rbf"))?),
        };
        spec.validate()?;
        Ok(Some(spec))
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum InitArg {
    Random,
    Provided,
}

#[derive(Args)]
struct FitArgs {
    #[command(flatten)]
    source: Source,
    #[arg(long)]
    k: usize,
    #[command(flatten)]
    kernel: KernelArgs,
    #[arg(long, default_value_t = overlapping_kmeans::config::DEFAULT_MAX_ITER)]
    max_iter: usize,
    /// Minimum relative objective improvement per iteration.
    #[arg(long, default_value_t = overlapping_kmeans::config::DEFAULT_MIN_IMPROVEMENT)]
    epsilon: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "random")]
    init: InitArg,
    /// JSON list of per-object cluster-id lists, for `--init provided`.
    #[arg(long)]
    init_file: Option<PathBuf>,
    /// Upper bound on the number of clusters per object.
    #[arg(long)]
    max_clusters_per_object: Option<usize>,
    /// Ground-truth label sets (JSON list of lists) used to score the result.
    #[arg(long)]
    labels: Option<PathBuf>,
    #[arg(long)]
    output: PathBuf,
    /// Omit the timestamp so repeated runs give identical files.
    #[arg(long)]
    no_timestamp: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum PresetArg {
    EachmovieAnalog,
    Rings,
}

impl From<PresetArg> for Preset {
    fn from(p: PresetArg) -> Self {
        match p {
            PresetArg::EachmovieAnalog => Preset::EachmovieAnalog,
            PresetArg::Rings => Preset::Rings,
        }
    }
}

#[derive(Args)]
struct BenchArgs {
    /// JSON list of methods `{name, solver, config}`; overrides the preset's methods.
    #[arg(long)]
    methods: Option<PathBuf>,
    /// Named dataset and method bundle.
    #[arg(long, value_enum)]
    preset: Option<PresetArg>,
    /// Labeled feature CSV; overrides the preset's dataset.
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long, default_value_t = 10)]
    runs: usize,
    #[arg(long, default_value_t = 0)]
    base_seed: u64,
    /// Seed for the preset's synthetic dataset.
    #[arg(long, default_value_t = 1)]
    data_seed: u64,
    #[arg(long)]
    output: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum ProjectMethod {
    Pca,
    Kpca,
}

#[derive(Args)]
struct ProjectArgs {
    #[command(flatten)]
    source: Source,
    #[arg(long, value_enum)]
    method: ProjectMethod,
    #[command(flatten)]
    kernel: KernelArgs,
    #[arg(long)]
    output: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Blobs,
    Rings,
}

#[derive(Args)]
struct GenArgs {
    /// Start from a preset; the other flags override its fields.
    #[arg(long, value_enum)]
    preset: Option<PresetArg>,
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    /// Core objects per class, comma separated.
    #[arg(long, value_delimiter = ',')]
    sizes: Option<Vec<usize>>,
    /// Objects labeled with both classes of the overlap pair.
    #[arg(long)]
    overlap: Option<usize>,
    /// The two overlapping classes, comma separated.
    #[arg(long, value_delimiter = ',')]
    overlap_pair: Option<Vec<usize>>,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    noise: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    output: PathBuf,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let outcome = match cli.command {
        Command::Fit(args) => fit(args),
        Command::Bench(args) => bench(args),
        Command::Project(args) => project(args),
        Command::Gen(args) => gen(args),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(cause) = source {
                eprintln!("  caused by: {cause}");
                source = cause.source();
            }
            ExitCode::from(if e.is_numerical() { 2 } else { 1 })
        }
    }
}

enum Input {
    Features(Dataset),
    Gram(GramMatrix),
}

impl Input {
    fn load(source: &Source) -> Result<Self> {
        match (&source.input, &source.gram) {
            (Some(path), _) => Ok(Input::Features(load_csv(path, LabelColumn::Detect)?)),
            (None, Some(path)) => Ok(Input::Gram(load_gram(path)?)),
            (None, None) => Err(OkmError::InvalidConfig("one of --input or --gram is required".into())),
        }
    }
}

fn fit(args: FitArgs) -> Result<()> {
    let kernel = args.kernel.spec()?;
    let mut config = SolverConfig::new(args.k)
        .with_max_iter(args.max_iter)
        .with_min_improvement(args.epsilon)
        .with_seed(args.seed);
    if let Some(kernel) = kernel {
        config = config.with_kernel(kernel);
    }
    if let Some(limit) = args.max_clusters_per_object {
        config = config.with_max_clusters_per_object(limit);
    }
    let init = match (args.init, &args.init_file) {
        (InitArg::Random, None) => None,
        (InitArg::Provided, Some(path)) => {
            config = config.with_init(InitPolicy::ProvidedMembership);
            Some(read_memberships(path, Some(args.k))?)
        }
        (InitArg::Random, Some(_)) => {
            return Err(OkmError::InvalidConfig("--init-file requires --init provided".into()))
        }
        (InitArg::Provided, None) => {
            return Err(OkmError::InvalidConfig("--init provided requires --init-file".into()))
        }
    };

    let input = Input::load(&args.source)?;
    let (solver, result, csv_labels) = match input {
        Input::Features(ds) => {
            let (solver, result) = match kernel {
                None => (SolverKind::Okm, okm::solve(&ds.data, &config, init.as_ref())?),
                Some(_) => (
                    SolverKind::Okmk,
                    okmk::solve_kernel_features(&ds.data, &config, init.as_ref())?,
                ),
            };
            (solver, result, ds.labels)
        }
        Input::Gram(k) => {
            if kernel.is_some() {
                log::warn!("--kernel is ignored with --gram; the matrix is used as given");
            }
            (SolverKind::Okmk, okmk::solve_kernel(&k, &config, init.as_ref())?, None)
        }
    };

    if result.psd_ok == Some(false) {
        log::warn!("gram matrix is not positive semidefinite; feature-space distances may be negative");
    }
    let truth = match &args.labels {
        Some(path) => Some(LabelSets::new(read_json(path)?)?),
        None => csv_labels,
    };
    let metrics = truth
        .map(|t| evaluate(&result.memberships, &t))
        .transpose()?;
    let mut report = FitReport::new(solver, &config, &result, metrics);
    if !args.no_timestamp {
        report.timestamp_unix = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .ok()
            .map(|d| d.as_secs());
    }
    write_json(&args.output, &report)
}

fn bench(args: BenchArgs) -> Result<()> {
    let preset = args.preset.map(Preset::from);
    let methods: Vec<MethodSpec> = match (&args.methods, preset) {
        (Some(path), _) => read_json(path)?,
        (None, Some(p)) => p.methods(),
        (None, None) => {
            return Err(OkmError::InvalidConfig("bench needs --methods or --preset".into()))
        }
    };
    let (data, truth, synthetic, name) = match (&args.input, preset) {
        (Some(path), _) => {
            let ds = load_csv(path, LabelColumn::Last)?;
            let truth = ds
                .labels
                .ok_or_else(|| OkmError::InvalidData("benchmark input needs a label column".into()))?;
            (ds.data, truth, None, display_name(path))
        }
        (None, Some(p)) => {
            let spec = p.synthetic(args.data_seed);
            let (data, truth) = gen_synthetic(&spec)?;
            (data, truth, Some(spec), p.name().to_string())
        }
        (None, None) => {
            return Err(OkmError::InvalidConfig("bench needs --input or --preset".into()))
        }
    };
    let mut report = run_benchmark(&data, &truth, &methods, args.runs, args.base_seed)?;
    report.dataset = name;
    report.synthetic = synthetic;
    for m in &report.methods {
        log::info!(
            "{}: P {:.3} R {:.3} F {:.3} (sd {:.3})",
            m.name,
            m.mean.precision,
            m.mean.recall,
            m.mean.f,
            m.std.f
        );
    }
    write_json(&args.output, &report)
}

fn display_name(path: &Path) -> String {
    path.file_stem()
        .map_or_else(|| path.display().to_string(), |s| s.to_string_lossy().into_owned())
}

fn project(args: ProjectArgs) -> Result<()> {
    let kernel = args.kernel.spec()?;
    let input = Input::load(&args.source)?;
    let (method, kernel, labels, embedding) = match (args.method, input) {
        (ProjectMethod::Pca, Input::Features(ds)) => {
            if kernel.is_some() {
                log::warn!("kernel flags are ignored by PCA");
            }
            ("pca", None, ds.labels, projection::pca_2d(&ds.data)?)
        }
        (ProjectMethod::Pca, Input::Gram(_)) => {
            return Err(OkmError::InvalidConfig("PCA needs --input features, not a gram".into()))
        }
        (ProjectMethod::Kpca, Input::Features(ds)) => {
            let spec = kernel.ok_or_else(|| {
                OkmError::InvalidConfig("kernel PCA on features needs --kernel".into())
            })?;
            let k = gram(&spec, &ds.data)?;
            ("kpca", Some(spec), ds.labels, projection::kpca_2d(&k)?)
        }
        (ProjectMethod::Kpca, Input::Gram(k)) => ("kpca", None, None, projection::kpca_2d(&k)?),
    };
    let report = EmbeddingReport {
        method: method.into(),
        kernel,
        labels: labels.map(|l| l.sets().to_vec()),
        embedding,
    };
    write_json(&args.output, &report)
}

fn gen(args: GenArgs) -> Result<()> {
    let mut spec = match args.preset.map(Preset::from) {
        Some(p) => p.synthetic(args.seed),
        None => SyntheticSpec::eachmovie_analog(args.seed),
    };
    spec.seed = args.seed;
    if let Some(mode) = args.mode {
        spec.mode = match mode {
            ModeArg::Blobs => SyntheticMode::GaussianBlobs,
            ModeArg::Rings => SyntheticMode::ConcentricRings,
        };
    }
    if let Some(sizes) = args.sizes {
        spec.class_sizes = sizes;
    }
    if let Some(overlap) = args.overlap {
        spec.overlap = overlap;
    }
    if let Some(pair) = args.overlap_pair {
        let [a, b] = pair[..] else {
            return Err(OkmError::InvalidConfig(format!(
                "--overlap-pair takes two class ids, got {}",
                pair.len()
            )));
        };
        spec.overlap_pair = (a, b);
    }
    if let Some(dim) = args.dim {
        spec.dim = dim;
    }
    if let Some(noise) = args.noise {
        spec.noise = noise;
    }
    let (data, labels) = gen_synthetic(&spec)?;
    let label_names = (0..labels.class_count()).map(|c| format!("c{c}")).collect();
    write_csv(
        &args.output,
        &Dataset {
            data,
            labels: Some(labels),
            label_names,
        },
    )
}
