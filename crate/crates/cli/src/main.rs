use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use symbolic_mlp::experiments::{
    generate_synthetic_stations, predictions_csv, robustness_csv, run_degradation_study, run_experiment,
    stations_from_csv, stations_to_csv, summary_table, CodingMethod, Condition, ExperimentConfig, ExperimentReport,
    OutlierSpec, Station,
};
use symbolic_mlp::imputation::{impute_knn, impute_mean, DegradationLevel};
use symbolic_mlp::optim::Method;
use symbolic_mlp::pipeline::{cross_validate_table, fit_table, PipelineConfig, TrainedModel};
use symbolic_mlp::recoding::{encode_table, fit_standardizer, parse_coding_modes, CodingModes};
use symbolic_mlp::selection::Split;
use symbolic_mlp::symbolic::parse_table;

#[derive(Parser)]
#[command(name = "smlp", version, about = "Multilayer perceptrons on symbolic data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Master seed (overrides the config file).
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; defaults to the number of CPUs.
    #[arg(long)]
    jobs: Option<usize>,
    /// Output directory for artifacts and the manifest.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args, Clone)]
struct TrainFlags {
    /// Pipeline configuration JSON.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    restarts: Option<usize>,
    #[arg(long)]
    max_iterations: Option<usize>,
    #[arg(long, value_enum)]
    optimizer: Option<OptimizerArg>,
    /// Weight decay, shared by every layer.
    #[arg(long)]
    lambda: Option<f64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum OptimizerArg {
    ConjugateGradient,
    Bfgs,
    GradientDescent,
}

#[derive(Clone, Copy, ValueEnum)]
enum ImputeMethod {
    Mean,
    Knn,
}

#[derive(Subcommand)]
enum Command {
    /// Encode a symbolic table into a numeric matrix with column-group metadata.
    Recode {
        #[arg(long)]
        data: PathBuf,
        /// JSON file mapping variable names to codings.
        #[arg(long)]
        coding: Option<PathBuf>,
        /// Fit column means and scales and write standardized values.
        #[arg(long)]
        standardize: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Train a network on a symbolic table.
    Train {
        #[arg(long)]
        data: PathBuf,
        /// Hidden layer size (replaces the configured list).
        #[arg(long)]
        hidden: Option<usize>,
        #[command(flatten)]
        flags: TrainFlags,
        #[command(flatten)]
        common: Common,
    },
    /// Score a trained model on a symbolic table.
    Evaluate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Choose a hidden size by validation error or k-fold cross-validation.
    Select {
        #[arg(long)]
        data: PathBuf,
        /// Comma-separated candidate sizes.
        #[arg(long, value_delimiter = ',')]
        hidden_sizes: Option<Vec<usize>>,
        /// Number of cross-validation folds.
        #[arg(long)]
        cv: Option<usize>,
        #[command(flatten)]
        flags: TrainFlags,
        #[command(flatten)]
        common: Common,
    },
    /// Fill missing cells of a numeric CSV (empty or NA cells are missing).
    Impute {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum, default_value = "mean")]
        method: ImputeMethod,
        #[arg(long, default_value_t = 3)]
        k: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Generate synthetic climate stations as CSV.
    GenClimate {
        #[arg(long, default_value_t = 260)]
        n: usize,
        #[arg(long, default_value_t = 1.0)]
        noise: f64,
        #[command(flatten)]
        common: Common,
    },
    /// Locate stations from four climate summaries and report errors in degrees.
    Experiment {
        #[command(flatten)]
        exp: ExperimentFlags,
        #[command(flatten)]
        common: Common,
    },
    /// Measure how trained location models degrade when months go missing.
    DegradeStudy {
        /// `report.json` from a previous `experiment` run; trains afresh when absent.
        #[arg(long)]
        report: Option<PathBuf>,
        /// Comma-separated levels: half, two_thirds, three_quarters.
        #[arg(long, value_delimiter = ',')]
        levels: Option<Vec<String>>,
        /// 1-based month receiving an outlier shift.
        #[arg(long)]
        outlier_month: Option<usize>,
        #[arg(long, default_value_t = 12.0)]
        outlier_shift: f64,
        #[command(flatten)]
        exp: ExperimentFlags,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args, Clone)]
struct ExperimentFlags {
    /// Experiment configuration JSON.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Comma-separated coding methods: full24, mean2, mean_sd4, min_max4.
    #[arg(long, value_delimiter = ',')]
    methods: Option<Vec<String>>,
    /// All eight hidden sizes with ten restarts.
    #[arg(long)]
    full_protocol: bool,
    /// Station CSV to use instead of synthetic data.
    #[arg(long)]
    stations: Option<PathBuf>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    noise: Option<f64>,
    #[arg(long)]
    restarts: Option<usize>,
}

/// Reproducibility record written next to every command's artifacts.
#[derive(Serialize)]
struct Manifest {
    command: String,
    args: Vec<String>,
    seed: Option<u64>,
    inputs: Vec<FileDigest>,
    config: Value,
    config_sha256: String,
    outputs: Vec<FileDigest>,
    versions: Value,
}

#[derive(Serialize)]
struct FileDigest {
    path: String,
    sha256: String,
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

struct Run {
    command: &'static str,
    out: PathBuf,
    seed: Option<u64>,
    inputs: Vec<FileDigest>,
    outputs: Vec<FileDigest>,
}

impl Run {
    fn new(command: &'static str, common: &Common) -> Result<Self> {
        fs::create_dir_all(&common.out).with_context(|| format!("creating {}", common.out.display()))?;
        Ok(Run {
            command,
            out: common.out.clone(),
            seed: common.seed,
            inputs: Vec::new(),
            outputs: Vec::new(),
        })
    }

    fn read(&mut self, path: &Path) -> Result<String> {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        self.inputs.push(FileDigest {
            path: path.display().to_string(),
            sha256: sha256_hex(text.as_bytes()),
        });
        Ok(text)
    }

    fn write(&mut self, name: &str, contents: &str) -> Result<PathBuf> {
        let path = self.out.join(name);
        fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
        self.outputs.push(FileDigest {
            path: name.to_string(),
            sha256: sha256_hex(contents.as_bytes()),
        });
        Ok(path)
    }

    fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<PathBuf> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(name, &text)
    }

    fn finish<T: Serialize>(self, config: &T) -> Result<()> {
        let config = serde_json::to_value(config)?;
        let manifest = Manifest {
            command: self.command.to_string(),
            args: std::env::args().skip(1).collect(),
            seed: self.seed,
            inputs: self.inputs,
            config_sha256: sha256_hex(serde_json::to_string(&config)?.as_bytes()),
            config,
            outputs: self.outputs,
            versions: json!({
                "smlp": env!("CARGO_PKG_VERSION"),
                "symbolic-mlp": env!("CARGO_PKG_VERSION"),
            }),
        };
        let mut text = serde_json::to_string_pretty(&manifest)?;
        text.push('\n');
        fs::write(self.out.join("manifest.json"), text)?;
        Ok(())
    }
}

fn pipeline_config(run: &mut Run, flags: &TrainFlags, seed: Option<u64>) -> Result<PipelineConfig> {
    let mut c = match &flags.config {
        Some(p) => PipelineConfig::from_json(&run.read(p)?)?,
        None => PipelineConfig::default(),
    };
    if let Some(s) = seed {
        c.train.seed = s;
    }
    if let Some(r) = flags.restarts {
        c.train.restarts = r;
    }
    if let Some(m) = flags.max_iterations {
        c.train.max_iterations = m;
    }
    if let Some(o) = flags.optimizer {
        c.train.optimizer = match o {
            OptimizerArg::ConjugateGradient => Method::ConjugateGradient,
            OptimizerArg::Bfgs => Method::Bfgs,
            OptimizerArg::GradientDescent => Method::GradientDescent,
        };
    }
    if let Some(l) = flags.lambda {
        c.train.decay.lambda = vec![l];
    }
    c.validate()?;
    Ok(c)
}

fn experiment_config(run: &mut Run, flags: &ExperimentFlags, seed: Option<u64>) -> Result<ExperimentConfig> {
    let mut c = match (&flags.config, flags.full_protocol) {
        (Some(p), _) => serde_json::from_str(&run.read(p)?).context("parsing experiment config")?,
        (None, true) => ExperimentConfig::full_protocol(),
        (None, false) => ExperimentConfig::default(),
    };
    if flags.full_protocol {
        let full = ExperimentConfig::full_protocol();
        c.hidden_sizes = full.hidden_sizes;
        c.train.restarts = full.train.restarts;
    }
    if let Some(s) = seed {
        c.seed = s;
    }
    if let Some(m) = &flags.methods {
        c.methods = m.iter().map(|s| s.trim().parse()).collect::<Result<Vec<CodingMethod>, _>>()?;
    }
    if let Some(n) = flags.n {
        c.n_stations = n;
    }
    if let Some(x) = flags.noise {
        c.noise_level = x;
    }
    if let Some(r) = flags.restarts {
        c.train.restarts = r;
    }
    Ok(c)
}

fn load_stations(run: &mut Run, flags: &ExperimentFlags, config: &mut ExperimentConfig) -> Result<Option<Vec<Station>>> {
    let Some(path) = &flags.stations else {
        return Ok(None);
    };
    let stations = stations_from_csv(&run.read(path)?)?;
    config.n_stations = stations.len();
    if let Split::Counts { .. } = config.split {
        if config.split.counts(stations.len()).is_err() {
            config.split = Split::Ratios {
                train: 140.0,
                validation: 60.0,
                test: 60.0,
            };
        }
    }
    Ok(Some(stations))
}

/// Header and rows; empty or `NA` cells are `None`.
type PartialCsv = (Vec<String>, Vec<Vec<Option<f64>>>);

fn parse_partial_csv(text: &str) -> Result<PartialCsv> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header: Vec<String> = lines
        .next()
        .context("empty CSV")?
        .split(',')
        .map(|s| s.trim().to_string())
        .collect();
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        if cells.len() != header.len() {
            bail!("row {}: {} cells, expected {}", i + 1, cells.len(), header.len());
        }
        let row = cells
            .iter()
            .zip(&header)
            .map(|(c, h)| match *c {
                "" | "NA" => Ok(None),
                s => s
                    .parse::<f64>()
                    .map(Some)
                    .with_context(|| format!("row {}, column `{h}`: `{s}` is not a number", i + 1)),
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    Ok((header, rows))
}

fn matrix_csv(header: &[String], rows: &[Vec<f64>]) -> String {
    let mut s = header.join(",");
    s.push('\n');
    for r in rows {
        s.push_str(&r.iter().map(f64::to_string).collect::<Vec<_>>().join(","));
        s.push('\n');
    }
    s
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Recode {
            data,
            coding,
            standardize,
            common,
        } => {
            let mut run = Run::new("recode", &common)?;
            let table = parse_table(&run.read(&data)?)?;
            let modes = match &coding {
                Some(p) => parse_coding_modes(&run.read(p)?)?,
                None => CodingModes::new(),
            };
            let mut m = encode_table(&table, &modes)?;
            if standardize {
                m = fit_standardizer(&m)?.transform();
            }
            let rows: Vec<Vec<f64>> = m.rows().map(<[f64]>::to_vec).collect();
            run.write("encoded.csv", &matrix_csv(&m.column_names(), &rows))?;
            run.write_json("groups.json", &m.groups)?;
            run.finish(&json!({ "coding": modes, "standardize": standardize }))
        }
        Command::Train {
            data,
            hidden,
            flags,
            common,
        } => {
            let mut run = Run::new("train", &common)?;
            let table = parse_table(&run.read(&data)?)?;
            let mut config = pipeline_config(&mut run, &flags, common.seed)?;
            if let Some(h) = hidden {
                config.hidden_sizes = vec![h];
            }
            let outcome = fit_table(&table, &config)?;
            log::info!("training took {:?}", outcome.selection.fit.wall_time);
            run.write("model.json", &outcome.model.to_json())?;
            run.write_json("fit_report.json", &outcome.selection.fit)?;
            run.write_json(
                "summary.json",
                &json!({
                    "hidden_size": outcome.selection.hidden_size,
                    "candidates": outcome.selection.candidates,
                    "split": outcome.split,
                    "test_metrics": outcome.test_metrics,
                }),
            )?;
            if let Some(m) = &outcome.test_metrics {
                println!("{}", serde_json::to_string_pretty(m)?);
            }
            run.finish(&config)
        }
        Command::Evaluate { model, data, common } => {
            let mut run = Run::new("evaluate", &common)?;
            let model = TrainedModel::from_json(&run.read(&model)?)?;
            let table = parse_table(&run.read(&data)?)?;
            let metrics = model.evaluate(&table)?;
            let predictions = model.predict(&table)?;
            run.write_json("metrics.json", &metrics)?;
            run.write(
                "predictions.json",
                &symbolic_mlp::symbolic::table_to_json(&prediction_table(&model, predictions)?),
            )?;
            println!("{}", serde_json::to_string_pretty(&metrics)?);
            run.finish(&json!({}))
        }
        Command::Select {
            data,
            hidden_sizes,
            cv,
            flags,
            common,
        } => {
            let mut run = Run::new("select", &common)?;
            let table = parse_table(&run.read(&data)?)?;
            let mut config = pipeline_config(&mut run, &flags, common.seed)?;
            if let Some(h) = hidden_sizes {
                config.hidden_sizes = h;
            }
            if cv.is_some() {
                config.cv_folds = cv;
            }
            config.validate()?;
            match config.cv_folds {
                Some(k) => {
                    let report = cross_validate_table(&table, &config, k)?;
                    for c in &report {
                        println!(
                            "{:>4} {:>12.6} {:>12.6}{}",
                            c.hidden_size,
                            c.report.mean,
                            c.report.sd,
                            if c.winner { "  *" } else { "" }
                        );
                    }
                    run.write_json("selection.json", &report)?;
                }
                None => {
                    let outcome = fit_table(&table, &config)?;
                    for c in &outcome.selection.candidates {
                        let v = c.validation_error.map_or("failed".to_string(), |v| format!("{v:.6}"));
                        println!("{:>4} {:>12}{}", c.hidden_size, v, if c.winner { "  *" } else { "" });
                    }
                    run.write_json(
                        "selection.json",
                        &json!({
                            "candidates": outcome.selection.candidates,
                            "hidden_size": outcome.selection.hidden_size,
                            "test_error": outcome.selection.test_error,
                            "test_metrics": outcome.test_metrics,
                        }),
                    )?;
                    run.write("model.json", &outcome.model.to_json())?;
                }
            }
            run.finish(&config)
        }
        Command::Impute {
            input,
            method,
            k,
            common,
        } => {
            let mut run = Run::new("impute", &common)?;
            let (header, rows) = parse_partial_csv(&run.read(&input)?)?;
            let filled = match method {
                ImputeMethod::Mean => impute_mean(&rows)?,
                ImputeMethod::Knn => impute_knn(&rows, k)?,
            };
            run.write("imputed.csv", &matrix_csv(&header, &filled))?;
            let name = match method {
                ImputeMethod::Mean => "mean",
                ImputeMethod::Knn => "knn",
            };
            run.finish(&json!({ "method": name, "k": k }))
        }
        Command::GenClimate { n, noise, common } => {
            let mut run = Run::new("gen-climate", &common)?;
            let seed = common.seed.unwrap_or(7);
            if n < 10 {
                bail!("at least 10 stations are required");
            }
            let stations = generate_synthetic_stations(n, seed, noise);
            run.write("stations.csv", &stations_to_csv(&stations)?)?;
            run.finish(&json!({ "n": n, "seed": seed, "noise_level": noise }))
        }
        Command::Experiment { exp, common } => {
            let mut run = Run::new("experiment", &common)?;
            let mut config = experiment_config(&mut run, &exp, common.seed)?;
            let stations = load_stations(&mut run, &exp, &mut config)?;
            let started = std::time::Instant::now();
            let out = run_experiment(&config, stations)?;
            log::info!("experiment took {:?}", started.elapsed());
            let table = summary_table(&out.report.rows);
            print!("{table}");
            run.write("table.txt", &table)?;
            run.write_json("report.json", &out.report)?;
            run.write("robustness.csv", &robustness_csv(&out.report.robustness)?)?;
            run.write("predictions.csv", &predictions_csv(&out.predictions)?)?;
            if exp.stations.is_none() {
                run.write("stations.csv", &stations_to_csv(&out.stations)?)?;
            }
            run.finish(&config)
        }
        Command::DegradeStudy {
            report,
            levels,
            outlier_month,
            outlier_shift,
            exp,
            common,
        } => {
            let mut run = Run::new("degrade-study", &common)?;
            let levels: Vec<DegradationLevel> = match &levels {
                Some(l) => l.iter().map(|s| s.trim().parse()).collect::<Result<_, _>>()?,
                None => DegradationLevel::ALL.to_vec(),
            };
            let (report, stations) = match &report {
                Some(p) => {
                    let r: ExperimentReport = serde_json::from_str(&run.read(p)?).context("parsing experiment report")?;
                    let mut cfg = r.config.clone();
                    let stations = match load_stations(&mut run, &exp, &mut cfg)? {
                        Some(s) => s,
                        None => generate_synthetic_stations(cfg.n_stations, cfg.seed, cfg.noise_level),
                    };
                    (r, stations)
                }
                None => {
                    let mut cfg = experiment_config(&mut run, &exp, common.seed)?;
                    let stations = load_stations(&mut run, &exp, &mut cfg)?;
                    let out = run_experiment(&cfg, stations)?;
                    (out.report, out.stations)
                }
            };
            if report.split.test.iter().any(|&i| i >= stations.len()) {
                bail!("the report's test split does not fit the station list");
            }
            let mut conditions: Vec<Condition> = levels.iter().map(|&l| Condition::Degraded(l)).collect();
            if let Some(month) = outlier_month {
                conditions.push(Condition::Outlier(OutlierSpec {
                    month,
                    temperature_shift: outlier_shift,
                    precipitation_shift: 0.0,
                }));
            }
            let rows = run_degradation_study(&report.models, &stations, &report.split.test, &conditions)?;
            let csv = robustness_csv(&rows)?;
            print!("{csv}");
            run.write("robustness.csv", &csv)?;
            run.write_json("robustness.json", &rows)?;
            run.finish(&json!({
                "experiment": report.config,
                "levels": levels,
                "outlier_month": outlier_month,
                "outlier_shift": outlier_shift,
            }))
        }
    }
}

/// Predictions laid out as a symbolic table over the model's targets.
fn prediction_table(
    model: &TrainedModel,
    predictions: Vec<Vec<symbolic_mlp::symbolic::SymbolicValue>>,
) -> Result<symbolic_mlp::symbolic::SymbolicTable> {
    use symbolic_mlp::symbolic::{SymbolicValue, VariableSpec};
    // Rank-coded categories come back as their numeric rank.
    let specs = model
        .targets
        .iter()
        .enumerate()
        .map(|(j, s)| match predictions.first().map(|r| &r[j]) {
            Some(SymbolicValue::Number(_)) => VariableSpec::quantitative(s.name.clone()).as_target(),
            _ => s.clone(),
        })
        .collect();
    Ok(symbolic_mlp::symbolic::SymbolicTable::new(specs, predictions)?)
}

fn jobs(cli: &Cli) -> Option<usize> {
    match &cli.command {
        Command::Recode { common, .. }
        | Command::Train { common, .. }
        | Command::Evaluate { common, .. }
        | Command::Select { common, .. }
        | Command::Impute { common, .. }
        | Command::GenClimate { common, .. }
        | Command::Experiment { common, .. }
        | Command::DegradeStudy { common, .. } => common.jobs,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(j) = jobs(&cli) {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(j).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
