use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use treehfd::data::{read_csv, write_csv_string, Dataset};
use treehfd::formats::boosted::import_boosted_dump;
use treehfd::formats::decomposition::{curve_to_csv, parse_decomposition, serialize_decomposition};
use treehfd::formats::model::{parse_ensemble, serialize_ensemble};
use treehfd::parallel::fit_ensemble_hfd_parallel;
use treehfd::report::ReportDocument;
use treehfd_core::analytical::{sample_case, AnalyticalReference, CaseConfig, N_FEATURES};
use treehfd_core::decomposition::{quantile_axis, CurveGrid, DEFAULT_CURVE_POINTS};
use treehfd_core::diagnostics::{diagnose, residual_mse_ratio, ComponentReference};
use treehfd_core::trainer::{fit_gbt, training_mse, GbtConfig};
use treehfd_core::{
    assemble, axis_partitions, collect_subsets, oracle, prune_tree, solve, Ensemble, Matrix, SolveParams, SubsetKey,
};

/// Hoeffding functional decomposition of tree ensembles.
#[derive(Parser)]
#[command(name = "treehfd", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a gradient-boosted ensemble on a CSV file.
    Train(TrainArgs),
    /// Decompose a model on a dataset.
    Fit(FitArgs),
    /// Compute diagnostics of a decomposition.
    Diagnose(DiagnoseArgs),
    /// Draw a sample from the analytical benchmark.
    Simulate(SimulateArgs),
    /// Convert a boosted-tree JSON dump into a native model.
    ImportXgb(ImportArgs),
    /// Tabulate one component on a grid.
    Curve(CurveArgs),
    /// Compare the solver with the dense reference on every small tree.
    #[command(hide = true)]
    Verify(VerifyArgs),
}

#[derive(Args)]
struct DataArgs {
    /// Numeric CSV with a header row.
    #[arg(long)]
    data: PathBuf,
    /// Column to drop from the features (e.g. the response).
    #[arg(long)]
    target: Option<String>,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    data: PathBuf,
    /// Response column.
    #[arg(long)]
    target: String,
    #[arg(long, default_value_t = 100)]
    n_trees: usize,
    #[arg(long, default_value_t = 6)]
    max_depth: usize,
    #[arg(long, default_value_t = 0.3)]
    learning_rate: f64,
    #[arg(long, default_value_t = 1)]
    min_samples_leaf: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct FitArgs {
    #[arg(long)]
    model: PathBuf,
    #[command(flatten)]
    data: DataArgs,
    /// Maximum interaction order.
    #[arg(long = "d-i", default_value_t = 2)]
    max_order: usize,
    /// Tree pruning depth (`INF` keeps every split).
    #[arg(long = "d-t", default_value = "INF")]
    prune_depth: Depth,
    /// Depth limit for variable subsets (`INF` uses every split).
    #[arg(long = "d-v", default_value = "INF")]
    subset_depth: Depth,
    /// Worker threads; defaults to TREEHFD_THREADS, then to all cores.
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct DiagnoseArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    dec: PathBuf,
    #[command(flatten)]
    data: DataArgs,
    /// Ground truth to score components against, as `analytical:RHO`.
    #[arg(long)]
    reference: Option<String>,
    /// Report as `metric,name,value` CSV.
    #[arg(long)]
    out: PathBuf,
    /// Also write the report as JSON.
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long, default_value_t = 5000)]
    n: usize,
    #[arg(long, default_value_t = 0.5)]
    rho: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.5)]
    noise_sd: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ImportArgs {
    /// JSON dump: an array with one nested object per tree.
    #[arg(long)]
    dump: PathBuf,
    /// Constant added to every prediction.
    #[arg(long, default_value_t = 0.0)]
    base_score: f64,
    /// Model width; defaults to the largest split index plus one.
    #[arg(long)]
    n_features: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CurveArgs {
    #[arg(long)]
    dec: PathBuf,
    /// One or two zero-based feature indices, comma separated.
    #[arg(long, value_delimiter = ',', num_args = 1..=2)]
    vars: Vec<usize>,
    /// Points per axis of a regular grid over the cut-point span.
    #[arg(long, conflicts_with = "data")]
    grid: Option<usize>,
    /// Use empirical quantiles of this dataset as the grid.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    target: Option<String>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long)]
    model: PathBuf,
    #[command(flatten)]
    data: DataArgs,
    #[arg(long = "d-i", default_value_t = 2)]
    max_order: usize,
    /// Largest acceptable coefficient difference.
    #[arg(long, default_value_t = 1e-6)]
    tolerance: f64,
    /// Trees whose system has more columns are skipped.
    #[arg(long, default_value_t = 600)]
    max_columns: usize,
}

/// A depth limit; `INF` means unlimited.
#[derive(Clone, Copy)]
struct Depth(Option<usize>);

impl std::str::FromStr for Depth {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        if s.eq_ignore_ascii_case("inf") {
            return Ok(Depth(None));
        }
        s.parse()
            .map(|d| Depth(Some(d)))
            .map_err(|_| format!("\"{s}\" is neither a depth nor INF"))
    }
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn load_model(path: &Path) -> Result<Ensemble> {
    parse_ensemble(&read_text(path)?).with_context(|| format!("loading model {}", path.display()))
}

fn load_data(args: &DataArgs, ensemble: &Ensemble) -> Result<Matrix> {
    let Dataset { features, .. } = read_csv(&args.data, args.target.as_deref())?;
    if features.cols() != ensemble.n_features() {
        bail!(
            "{} has {} feature columns, the model expects {}",
            args.data.display(),
            features.cols(),
            ensemble.n_features()
        );
    }
    Ok(features)
}

fn fmt_metric(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".into(), |v| format!("{v:.6}"))
}

fn train(a: TrainArgs) -> Result<()> {
    let d = read_csv(&a.data, Some(&a.target))?;
    let y = d.target.expect("target column requested");
    let cfg = GbtConfig {
        n_trees: a.n_trees,
        max_depth: a.max_depth,
        learning_rate: a.learning_rate,
        min_samples_leaf: a.min_samples_leaf,
        ..GbtConfig::default()
    };
    let ensemble = fit_gbt(&d.features, &y, &cfg)?;
    write_text(&a.out, &serialize_ensemble(&ensemble))?;
    println!("trees {}", ensemble.trees().len());
    println!("training_mse {:.6}", training_mse(&ensemble, &d.features, &y));
    Ok(())
}

fn fit(a: FitArgs) -> Result<()> {
    let ensemble = load_model(&a.model)?;
    let x = load_data(&a.data, &ensemble)?;
    let params = SolveParams {
        max_order: a.max_order,
        prune_depth: a.prune_depth.0,
        subset_depth: a.subset_depth.0,
        ..SolveParams::default()
    };
    let dec = fit_ensemble_hfd_parallel(&ensemble, &x, &params, a.threads)?;
    write_text(&a.out, &serialize_decomposition(&dec))?;
    println!("components {}", dec.components().len());
    println!("residual_mse_ratio {}", fmt_metric(residual_mse_ratio(&dec, &ensemble, &x).ok()));
    Ok(())
}

fn parse_reference(arg: &str) -> Result<AnalyticalReference> {
    let Some(rho) = arg.strip_prefix("analytical:") else {
        bail!("unknown reference \"{arg}\"; expected analytical:RHO");
    };
    let rho: f64 = rho.parse().with_context(|| format!("bad correlation in \"{arg}\""))?;
    if !(rho > -0.2 && rho < 1.0) {
        bail!("reference correlation {rho} outside (-0.2, 1)");
    }
    Ok(AnalyticalReference { rho })
}

fn diagnose_cmd(a: DiagnoseArgs) -> Result<()> {
    let ensemble = load_model(&a.model)?;
    let dec = parse_decomposition(&read_text(&a.dec)?).with_context(|| format!("loading {}", a.dec.display()))?;
    if dec.n_features() != ensemble.n_features() {
        bail!("decomposition and model disagree on the number of features");
    }
    let x = load_data(&a.data, &ensemble)?;
    let reference = a.reference.as_deref().map(parse_reference).transpose()?;
    if reference.is_some() && ensemble.n_features() != N_FEATURES {
        bail!("the analytical reference needs {N_FEATURES} features");
    }
    let report = diagnose(&dec, &ensemble, &x, reference.as_ref().map(|r| r as &dyn ComponentReference))?;
    let doc = ReportDocument::from(&report);
    write_text(&a.out, &doc.to_csv()?)?;
    if let Some(path) = &a.json {
        write_text(path, &doc.to_json())?;
    }
    println!("residual_mse_ratio {}", fmt_metric(doc.residual_mse_ratio));
    println!("orthogonality_max_abs {}", fmt_metric(doc.orthogonality_max_abs));
    println!("local_variability {}", fmt_metric(doc.local_variability));
    if doc.cumulated_mse.is_some() {
        println!("cumulated_mse {}", fmt_metric(doc.cumulated_mse));
    }
    Ok(())
}

fn simulate(a: SimulateArgs) -> Result<()> {
    let cfg = CaseConfig {
        n: a.n,
        rho: a.rho,
        noise_sd: a.noise_sd,
        seed: a.seed,
    };
    let (x, y) = sample_case(&cfg)?;
    let names: Vec<String> = (1..=N_FEATURES).map(|j| format!("X{j}")).collect();
    write_text(&a.out, &write_csv_string(&names, &x, Some(("y", &y)))?)
}

fn import(a: ImportArgs) -> Result<()> {
    let ensemble = import_boosted_dump(&read_text(&a.dump)?, a.base_score, a.n_features)
        .with_context(|| format!("importing {}", a.dump.display()))?;
    write_text(&a.out, &serialize_ensemble(&ensemble))?;
    println!("trees {}", ensemble.trees().len());
    println!("n_features {}", ensemble.n_features());
    Ok(())
}

fn curve(a: CurveArgs) -> Result<()> {
    let dec = parse_decomposition(&read_text(&a.dec)?).with_context(|| format!("loading {}", a.dec.display()))?;
    let subset = SubsetKey::new(a.vars.clone());
    if subset.len() != a.vars.len() {
        bail!("--vars repeats a feature");
    }
    let grid = match (&a.data, a.grid) {
        (Some(path), _) => {
            let d = read_csv(path, a.target.as_deref())?;
            if d.features.cols() != dec.n_features() {
                bail!("{} has {} feature columns, expected {}", path.display(), d.features.cols(), dec.n_features());
            }
            CurveGrid::Explicit(
                subset
                    .vars()
                    .iter()
                    .map(|&v| quantile_axis(&d.features.column(v), DEFAULT_CURVE_POINTS))
                    .collect(),
            )
        }
        (None, Some(n)) => CurveGrid::Regular(n),
        (None, None) => CurveGrid::default(),
    };
    let points = dec.component_curve(&subset, &grid)?;
    write_text(&a.out, &curve_to_csv(&points)?)
}

fn verify(a: VerifyArgs) -> Result<()> {
    let ensemble = load_model(&a.model)?;
    let x = load_data(&a.data, &ensemble)?;
    let params = SolveParams {
        max_order: a.max_order,
        ..SolveParams::default()
    };
    let (mut checked, mut skipped, mut worst) = (0, 0, 0.0f64);
    for tree in ensemble.trees() {
        let pruned = prune_tree(tree, None, &x);
        let grids = axis_partitions(&pruned);
        let subsets = collect_subsets(&pruned, params.max_order, None)?;
        let sys = assemble(&pruned, &x, &subsets, &grids)?;
        if sys.n_cols() > a.max_columns.min(oracle::MAX_DENSE_COLUMNS) {
            skipped += 1;
            continue;
        }
        let reference = oracle::dense_tree_hfd(&pruned, &x, &subsets, &grids)?;
        let beta = solve(&sys, &params)?;
        let diff = beta.iter().zip(&reference).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        worst = worst.max(diff);
        checked += 1;
    }
    println!("checked {checked} skipped {skipped} max_abs_diff {worst:.3e}");
    if worst > a.tolerance {
        bail!("solver and reference differ by {worst:.3e}");
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train(a) => train(a),
        Command::Fit(a) => fit(a),
        Command::Diagnose(a) => diagnose_cmd(a),
        Command::Simulate(a) => simulate(a),
        Command::ImportXgb(a) => import(a),
        Command::Curve(a) => curve(a),
        Command::Verify(a) => verify(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
