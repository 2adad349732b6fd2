use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DMatrix;

use rgbm::boosting::{fit_stumps, StumpModel, TrainResult};
use rgbm::config::RunConfig;
use rgbm::data::{feature_quantiles, read_libsvm, train_test_split, Dataset, ParseOptions};
use rgbm::geometry::{
    binary_extended_basis, mca_binary_infinity, mca_estimate, mca_orthogonal_infinity, mca_orthogonal_ordered,
    orthogonal_basis, DEFAULT_RESTARTS, DEFAULT_TOL,
};
use rgbm::learners::build_stump_basis;
use rgbm::norms::{exact_rtg_expectation, NormSpec};
use rgbm::sampling::{beta_limit_pdf, selection_pmf, Partition, RunRng, SelectionRule, GEOMETRY_STREAM};
use rgbm::{Error, Result};

#[derive(Parser)]
#[command(name = "rgbm", version, about = "Randomized gradient boosting with tree stumps")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train on a LIBSVM file and write a per-iteration metrics CSV.
    Train(TrainArgs),
    /// Score a LIBSVM file with a saved model, one prediction per line.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
    },
    /// Print the selection law of the random-then-greedy pick.
    Pmf {
        #[arg(long = "k")]
        k: usize,
        #[arg(long)]
        t: usize,
    },
    /// Compare closed-form and estimated minimal cosine angles.
    Mca(McaArgs),
    /// Evaluate a structured norm, its dual and the exact expected pick.
    Norms(NormsArgs),
}

#[derive(Args)]
struct TrainArgs {
    /// key=value file; flags given on the command line override it
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    train: Option<PathBuf>,
    #[arg(long)]
    test: Option<PathBuf>,
    #[arg(long)]
    loss: Option<String>,
    #[arg(long)]
    loss_param: Option<f64>,
    #[arg(long)]
    rule: Option<String>,
    #[arg(long)]
    t: Option<usize>,
    /// `line` or `const`
    #[arg(long)]
    step: Option<String>,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    iters: Option<usize>,
    #[arg(long)]
    quantiles: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// metrics CSV; stdout when absent
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    model_out: Option<PathBuf>,
    #[arg(long)]
    split_frac: Option<f64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum BasisKind {
    Orthogonal,
    Binary,
    File,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum NormKind {
    Infinity,
    Ordered,
    Group,
    Mixed,
}

#[derive(Args)]
struct McaArgs {
    #[arg(long, value_enum)]
    basis: BasisKind,
    #[arg(long)]
    p: Option<usize>,
    /// whitespace-separated dense matrix, one row per line
    #[arg(long)]
    matrix: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "infinity")]
    norm: NormKind,
    #[arg(long)]
    t: Option<usize>,
    /// learners per group, for the group and mixed norms
    #[arg(long, default_value_t = 1)]
    group_size: usize,
    #[arg(long, default_value_t = DEFAULT_RESTARTS)]
    restarts: usize,
    #[arg(long, default_value_t = DEFAULT_TOL)]
    tol: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct NormsArgs {
    /// comma-separated vector
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    values: Vec<f64>,
    #[arg(long, default_value = "type0")]
    rule: String,
    #[arg(long)]
    t: Option<usize>,
    /// comma-separated group sizes; singletons when absent
    #[arg(long, value_delimiter = ',')]
    groups: Vec<usize>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Train(args) => cmd_train(args),
        Command::Predict { model, data } => cmd_predict(&model, &data),
        Command::Pmf { k, t } => cmd_pmf(k, t),
        Command::Mca(args) => cmd_mca(&args),
        Command::Norms(args) => cmd_norms(&args),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Io { .. } => ExitCode::from(2),
                _ => ExitCode::FAILURE,
            }
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> Error + '_ {
    move |source| Error::Io { path: path.to_path_buf(), source }
}

fn resolve_config(args: TrainArgs) -> Result<RunConfig> {
    let mut cfg = match &args.config {
        Some(path) => RunConfig::read(path)?,
        None => RunConfig::default(),
    };
    let s = |v: Option<String>| v;
    let overrides: [(&str, Option<String>); 14] = [
        ("train", args.train.map(|p| p.display().to_string())),
        ("test", args.test.map(|p| p.display().to_string())),
        ("out", args.out.map(|p| p.display().to_string())),
        ("model_out", args.model_out.map(|p| p.display().to_string())),
        ("loss", s(args.loss)),
        ("loss_param", args.loss_param.map(|v| v.to_string())),
        ("rule", s(args.rule)),
        ("t", args.t.map(|v| v.to_string())),
        ("step", s(args.step)),
        ("rho", args.rho.map(|v| v.to_string())),
        ("iters", args.iters.map(|v| v.to_string())),
        ("quantiles", args.quantiles.map(|v| v.to_string())),
        ("seed", args.seed.map(|v| v.to_string())),
        ("split_frac", args.split_frac.map(|v| v.to_string())),
    ];
    for (key, value) in overrides {
        if let Some(v) = value {
            cfg.set(key, &v)?;
        }
    }
    Ok(cfg)
}

/// Re-declares both sets over the same feature count.
fn align_features(train: Dataset, test: Dataset) -> Result<(Dataset, Dataset)> {
    let n = train.n_features().max(test.n_features());
    let widen = |d: Dataset| Dataset::new(n, d.rows().to_vec(), d.labels().to_vec());
    Ok((widen(train)?, widen(test)?))
}

fn cmd_train(args: TrainArgs) -> Result<()> {
    let cfg = resolve_config(args)?;
    for line in cfg.to_kv().lines() {
        eprintln!("# {line}");
    }
    let train_cfg = cfg.train_config()?;
    let opts = ParseOptions { labels: cfg.label_mode(), n_features: None };
    let full = read_libsvm(cfg.train.as_deref().expect("checked by train_config"), &opts)?;
    let (train, test) = match &cfg.test {
        Some(path) => align_features(full, read_libsvm(path, &opts)?)?,
        None => train_test_split(&full, cfg.split_frac, cfg.seed)?,
    };
    let splits = feature_quantiles(&train, cfg.quantiles)?;
    let basis = build_stump_basis(&train, &splits)?;
    eprintln!(
        "# samples={} test_samples={} features={} learners={} generator={}",
        train.n_samples(),
        test.n_samples(),
        train.n_features(),
        splits.total(),
        rgbm::sampling::GENERATOR_ID
    );
    let result = fit_stumps(&basis, &train, Some(&test), &train_cfg)?;

    match &cfg.out {
        Some(path) => {
            let file = File::create(path).map_err(io_err(path))?;
            write_csv(BufWriter::new(file), &result).map_err(io_err(path))?;
        }
        None => write_csv(io::stdout().lock(), &result).map_err(io_err(Path::new("<stdout>")))?,
    }
    if let Some(path) = &cfg.model_out {
        let model = StumpModel::from_coefficients(&result.model, &basis, &train_cfg.loss)?;
        std::fs::write(path, model.to_text()).map_err(io_err(path))?;
    }
    eprintln!(
        "final train_loss={} test_loss={}",
        result.final_train_loss(),
        result.final_test_loss().map(|v| v.to_string()).unwrap_or_default()
    );
    Ok(())
}

fn write_csv<W: Write>(mut w: W, result: &TrainResult) -> io::Result<()> {
    writeln!(w, "iter,elapsed_sec,train_loss,test_loss")?;
    for r in &result.trace {
        let test = r.test_loss.map(|v| v.to_string()).unwrap_or_default();
        writeln!(w, "{},{:.6},{},{}", r.iter, r.elapsed_sec, r.train_loss, test)?;
    }
    w.flush()
}

fn cmd_predict(model: &Path, data: &Path) -> Result<()> {
    let text = std::fs::read_to_string(model).map_err(io_err(model))?;
    let model = StumpModel::from_text(&text)?;
    let opts = ParseOptions { labels: rgbm::data::LabelMode::Regression, n_features: None };
    let d = read_libsvm(data, &opts)?;
    let mut out = io::stdout().lock();
    for row in d.rows() {
        writeln!(out, "{}", model.predict(row)).map_err(io_err(Path::new("<stdout>")))?;
    }
    Ok(())
}

fn cmd_pmf(k: usize, t: usize) -> Result<()> {
    let pmf = selection_pmf(k, t)?;
    println!("j,gamma,k_gamma,beta_limit");
    for (i, g) in pmf.probabilities().iter().enumerate() {
        // rank j stands for the quantile bin ((j-1)/K, j/K]; compare at its centre
        let q = (i as f64 + 0.5) / k as f64;
        println!("{},{},{},{}", i + 1, g, k as f64 * g, beta_limit_pdf(q, t));
    }
    println!("# sum={}", pmf.probabilities().iter().sum::<f64>());
    Ok(())
}

fn read_matrix(path: &Path) -> Result<DMatrix<f64>> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() || line.trim_start().starts_with('#') {
            continue;
        }
        let row = line
            .split_whitespace()
            .map(|x| x.parse::<f64>().map_err(|_| Error::Parse { line: n + 1, msg: format!("bad number {x:?}") }))
            .collect::<Result<Vec<f64>>>()?;
        if rows.first().is_some_and(|r| r.len() != row.len()) {
            return Err(Error::Parse { line: n + 1, msg: "ragged matrix".into() });
        }
        rows.push(row);
    }
    let k = rows.first().map_or(0, Vec::len);
    if rows.is_empty() || k == 0 {
        return Err(Error::EmptyBasis);
    }
    let mut m = DMatrix::from_fn(rows.len(), k, |i, j| rows[i][j]);
    for (j, mut col) in m.column_iter_mut().enumerate() {
        let norm = col.norm();
        if norm == 0.0 {
            return Err(Error::InvalidArgument(format!("column {} is zero", j + 1)));
        }
        col /= norm;
    }
    Ok(m)
}

fn cmd_mca(args: &McaArgs) -> Result<()> {
    let need_p = || args.p.ok_or_else(|| Error::InvalidArgument("--p is required for this basis".into()));
    let b = match args.basis {
        BasisKind::Orthogonal => orthogonal_basis(need_p()?)?,
        BasisKind::Binary => binary_extended_basis(need_p()?)?,
        BasisKind::File => {
            let path = args.matrix.as_ref().ok_or_else(|| Error::InvalidArgument("--matrix is required".into()))?;
            read_matrix(path)?
        }
    };
    let k = b.ncols();
    let partition = if args.group_size == 0 || k % args.group_size != 0 {
        return Err(Error::InvalidArgument(format!("group size {} does not divide {k}", args.group_size)));
    } else {
        Partition::from_sizes(&vec![args.group_size; k / args.group_size])?
    };
    let need_t = || args.t.ok_or_else(|| Error::InvalidArgument("--t is required for this norm".into()));
    let spec = match args.norm {
        NormKind::Infinity => NormSpec::Infinity,
        NormKind::Ordered => NormSpec::for_rule(SelectionRule::Type1 { t: need_t()? }, k, &partition)?,
        NormKind::Group => NormSpec::group(partition),
        NormKind::Mixed => NormSpec::for_rule(SelectionRule::Type3 { t: need_t()? }, k, &partition)?,
    };
    let closed = match (args.basis, args.norm, &spec) {
        (BasisKind::Orthogonal, NormKind::Infinity, _) => Some(mca_orthogonal_infinity(k)?),
        (BasisKind::Orthogonal, NormKind::Ordered, NormSpec::OrderedL1 { gamma }) => {
            Some(mca_orthogonal_ordered(gamma)?)
        }
        (BasisKind::Binary, NormKind::Infinity, _) => Some(mca_binary_infinity(b.nrows())?),
        _ => None,
    };
    let mut rng = RunRng::new(args.seed, GEOMETRY_STREAM);
    let est = mca_estimate(&b, &spec, args.restarts, args.tol, &mut rng)?;
    println!("learners={k} rows={}", b.nrows());
    println!("closed_form={}", closed.map(|v| v.to_string()).unwrap_or_else(|| "n/a".into()));
    println!("estimate={}", est.value);
    println!("restarts={}", est.restarts);
    Ok(())
}

fn cmd_norms(args: &NormsArgs) -> Result<()> {
    let a = &args.values;
    if a.is_empty() {
        return Err(Error::InvalidArgument("--values is empty".into()));
    }
    let partition = if args.groups.is_empty() {
        Partition::singletons(a.len())
    } else {
        Partition::from_sizes(&args.groups)?
    };
    let rule = SelectionRule::from_kind(&args.rule, args.t)?;
    let spec = NormSpec::for_rule(rule, a.len(), &partition)?;
    println!("rule={rule}");
    println!("norm={}", spec.norm(a)?);
    println!("dual_norm={}", spec.dual_norm(a)?);
    match exact_rtg_expectation(a, rule, &partition) {
        Ok(v) => println!("expected_pick={v}"),
        Err(e @ Error::EnumerationTooLarge { .. }) => println!("expected_pick=n/a ({e})"),
        Err(e) => return Err(e),
    }
    Ok(())
}
