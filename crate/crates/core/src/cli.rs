//! The `flash` command-line front end.
//!
//! Results go to stdout as JSON; logs go to stderr.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{info, warn};
use num_traits::ToPrimitive;
use serde::Serialize;
use serde_json::{json, Value};

use crate::arch::{
    realize_layers, sample_uniform, search_space_size, validate, ArchConfig, SpaceSpec,
};
use crate::error::{Error, Result};
use crate::fixtures::{generate_samples, SyntheticTruth};
use crate::hwmodel::{
    count_tiles, features, features_from_layers, fit_area, fit_energy, fit_latency, HwConfig,
};
use crate::optimizer::{
    brute_force_search, hierarchical_search, training_free_search, Constraints, Objective,
    ObjectiveMode, DEFAULT_STEP,
};
use crate::predictor::{fit_accuracy, AccuracySample};
use crate::store::{load_samples, read_json, to_json_text, write_json, write_samples, ModelStore};
use crate::topology::nn_degree;

#[derive(Debug, Parser)]
#[command(
    name = "flash",
    version,
    about = "Hardware-aware architecture search over DenseNet-style cell spaces"
)]
pub struct Cli {
    /// Increase log verbosity on stderr (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Search-space size and sampling.
    #[command(subcommand)]
    Space(SpaceCommand),
    /// NN-Degree of one architecture.
    Degree(DegreeArgs),
    /// Fit a model from a sample CSV.
    Fit(FitArgs),
    /// Predicted metrics of one architecture.
    Predict(PredictArgs),
    /// Search for the best architecture.
    Search(SearchArgs),
    /// Export realized layers or synthetic fixtures.
    #[command(subcommand)]
    Export(ExportCommand),
}

#[derive(Debug, Args)]
pub struct SpecArg {
    /// Search-space JSON (a file path or an inline object).
    #[arg(long)]
    pub spec: Option<String>,
}

#[derive(Debug, Args)]
pub struct HwArg {
    /// Hardware JSON (a file path or an inline object).
    #[arg(long)]
    pub hw: Option<String>,
}

#[derive(Debug, Subcommand)]
pub enum SpaceCommand {
    /// Exact number of valid configurations.
    Size {
        #[command(flatten)]
        spec: SpecArg,
    },
    /// Uniform samples of valid configurations.
    Sample {
        #[command(flatten)]
        spec: SpecArg,
        #[arg(long, default_value_t = 10)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Debug, Args)]
pub struct DegreeArgs {
    /// Architecture JSON, e.g. '{"w_m":1,"n_c":3,"d_c":5,"t":"5;10;20"}'.
    #[arg(long)]
    pub arch: String,
    #[command(flatten)]
    pub spec: SpecArg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FitKind {
    Accuracy,
    Latency,
    Energy,
    Area,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[arg(value_enum)]
    pub kind: FitKind,
    /// Sample CSV with header w_m,n_c,d_c,t and the measured column.
    #[arg(long)]
    pub samples: PathBuf,
    #[command(flatten)]
    pub hw: HwArg,
    #[command(flatten)]
    pub spec: SpecArg,
    /// Model directory to store the fitted model in.
    #[arg(long)]
    pub models: Option<PathBuf>,
    /// File to write the model JSON to.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub arch: String,
    #[arg(long)]
    pub models: PathBuf,
    #[command(flatten)]
    pub spec: SpecArg,
    #[command(flatten)]
    pub hw: HwArg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SearchMode {
    Shgo,
    TrainingFree,
    Brute,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ObjectiveArg {
    Full,
    Device,
}

#[derive(Debug, Args)]
pub struct SearchArgs {
    #[arg(long, value_enum, default_value = "shgo")]
    pub mode: SearchMode,
    #[command(flatten)]
    pub spec: SpecArg,
    #[command(flatten)]
    pub hw: HwArg,
    #[arg(long)]
    pub models: PathBuf,
    /// Objective for shgo and brute modes.
    #[arg(long, value_enum, default_value = "full")]
    pub objective: ObjectiveArg,
    /// Minimum predicted accuracy, as a fraction.
    #[arg(long)]
    pub theta_min: Option<f64>,
    #[arg(long)]
    pub area_max: Option<f64>,
    #[arg(long)]
    pub latency_max: Option<f64>,
    #[arg(long)]
    pub energy_max: Option<f64>,
    /// Coarse lattice step.
    #[arg(long, default_value_t = DEFAULT_STEP)]
    pub lambda: i64,
    /// Sample count for training-free mode.
    #[arg(long, default_value_t = 20_000)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum ExportCommand {
    /// Layer descriptors and tile counts of one architecture.
    Layers {
        #[arg(long)]
        arch: String,
        #[command(flatten)]
        spec: SpecArg,
        #[command(flatten)]
        hw: HwArg,
    },
    /// Synthetic ground truth and a measurement table.
    Fixtures {
        /// Output directory; receives samples.csv and truth.json.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 180)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Relative Gaussian noise on every measurement.
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
        #[command(flatten)]
        spec: SpecArg,
        #[command(flatten)]
        hw: HwArg,
    },
}

/// Parses an inline JSON object or reads the named file.
fn json_arg<T: serde::de::DeserializeOwned>(arg: &str, what: &str) -> Result<T> {
    let trimmed = arg.trim_start();
    if trimmed.starts_with('{') {
        serde_json::from_str(trimmed).map_err(|e| Error::Domain(format!("{what}: {e}")))
    } else {
        read_json(Path::new(arg))
    }
}

fn load_spec(arg: &SpecArg) -> Result<SpaceSpec> {
    let spec = match &arg.spec {
        Some(s) => json_arg(s, "--spec")?,
        None => SpaceSpec::default(),
    };
    spec.check()?;
    Ok(spec)
}

fn load_hw(arg: &HwArg, store: Option<&ModelStore>) -> Result<HwConfig> {
    let hw = match (&arg.hw, store) {
        (Some(s), _) => json_arg(s, "--hw")?,
        (None, Some(store)) => store.load_hw()?.unwrap_or_default(),
        (None, None) => HwConfig::default(),
    };
    hw.check()?;
    Ok(hw)
}

fn parse_arch(arg: &str, spec: &SpaceSpec) -> Result<ArchConfig> {
    let config: ArchConfig = json_arg(arg, "--arch")?;
    let report = validate(&config, spec);
    if !report.is_valid() {
        return Err(Error::Domain(format!(
            "invalid architecture {config}: {report}"
        )));
    }
    Ok(config)
}

fn emit<T: Serialize>(out: &mut dyn Write, value: &T) -> Result<()> {
    out.write_all(to_json_text(value).as_bytes())
        .map_err(|e| Error::io("<stdout>", e))
}

/// Three-significant-figure scientific notation, e.g. `3.20e10`.
pub fn sci3(v: f64) -> String {
    format!("{v:.2e}")
}

pub fn run(cli: Cli, out: &mut dyn Write) -> Result<()> {
    match cli.command {
        Command::Space(SpaceCommand::Size { spec }) => {
            let spec = load_spec(&spec)?;
            let size = search_space_size(&spec);
            let approx = size.to_f64().unwrap_or(f64::INFINITY);
            let exact = match size.to_u64() {
                Some(v) => json!(v),
                None => json!(size.to_string()),
            };
            emit(out, &json!({ "size": exact, "approx": sci3(approx) }))
        }
        Command::Space(SpaceCommand::Sample { spec, n, seed }) => {
            let spec = load_spec(&spec)?;
            emit(out, &sample_uniform(&spec, seed, n)?)
        }
        Command::Degree(args) => {
            let spec = load_spec(&args.spec)?;
            let config = parse_arch(&args.arch, &spec)?;
            emit(out, &nn_degree(&config, &spec)?)
        }
        Command::Fit(args) => fit(args, out),
        Command::Predict(args) => predict(args, out),
        Command::Search(args) => search(args, out),
        Command::Export(ExportCommand::Layers { arch, spec, hw }) => {
            let spec = load_spec(&spec)?;
            let hw = load_hw(&hw, None)?;
            let config = parse_arch(&arch, &spec)?;
            let layers = realize_layers(&config, &spec, &hw.geometry())?;
            let tiles = count_tiles(&layers, &hw);
            let feats = features_from_layers(&config, &layers, &hw);
            let rows: Vec<Value> = layers
                .iter()
                .zip(&tiles.per_layer)
                .map(|(l, t)| {
                    let mut v = serde_json::to_value(l).expect("layer serializes");
                    v["n_r"] = json!(t.rows);
                    v["n_cols"] = json!(t.cols);
                    v["tiles"] = json!(t.tiles);
                    v
                })
                .collect();
            emit(
                out,
                &json!({ "layers": rows, "total_tiles": tiles.total, "features": feats }),
            )
        }
        Command::Export(ExportCommand::Fixtures {
            out: dir,
            n,
            seed,
            noise,
            spec,
            hw,
        }) => {
            let spec = load_spec(&spec)?;
            let hw = load_hw(&hw, None)?;
            let truth = SyntheticTruth::for_space(&spec, &hw, seed)?;
            let rows = generate_samples(&spec, &hw, &truth, n, seed, noise)?;
            fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
            let csv_path = dir.join("samples.csv");
            let file = fs::File::create(&csv_path).map_err(|e| Error::io(&csv_path, e))?;
            write_samples(file, &rows)?;
            let truth_json = json!({
                "accuracy": { "a": truth.accuracy.a, "b": truth.accuracy.b, "c": truth.accuracy.c },
                "latency": truth.latency.weights(),
                "energy": truth.energy.weights.to_vec(),
                "area": truth.area.weights(),
            });
            write_json(&dir.join("truth.json"), &truth_json)?;
            write_json(&dir.join("spec.json"), &spec)?;
            write_json(&dir.join("hw.json"), &hw)?;
            emit(
                out,
                &json!({ "samples": csv_path, "rows": rows.len(), "truth": dir.join("truth.json") }),
            )
        }
    }
}

fn fit(args: FitArgs, out: &mut dyn Write) -> Result<()> {
    let spec = load_spec(&args.spec)?;
    let store = args.models.as_ref().map(ModelStore::open).transpose()?;
    let hw = load_hw(&args.hw, store.as_ref())?;
    let table = load_samples(&args.samples, &spec)?;
    info!("{} rows from {}", table.rows.len(), args.samples.display());

    let model_json = match args.kind {
        FitKind::Accuracy => {
            let samples = table
                .column("accuracy")?
                .into_iter()
                .map(|(c, v)| Ok(AccuracySample::new(nn_degree(c, &spec)?.g, v)))
                .collect::<Result<Vec<_>>>()?;
            let m = fit_accuracy(&samples)?;
            if let Some(s) = &store {
                s.save_accuracy(&m)?;
            }
            json!({"kind": "accuracy", "a": m.a, "b": m.b, "c": m.c, "rmse": m.rmse, "n_samples": m.n_samples})
        }
        FitKind::Latency | FitKind::Energy => {
            let column = if args.kind == FitKind::Latency {
                "latency_ms"
            } else {
                "energy_mj"
            };
            let rows = table
                .column(column)?
                .into_iter()
                .map(|(c, v)| Ok((features(c, &spec, &hw)?, v)))
                .collect::<Result<Vec<_>>>()?;
            if args.kind == FitKind::Latency {
                let m = fit_latency(&rows)?;
                if let Some(s) = &store {
                    s.save_latency(&m)?;
                }
                json!({"kind": "latency", "weights": m.weights(), "rmse": m.rmse})
            } else {
                let m = fit_energy(&rows)?;
                if let Some(s) = &store {
                    s.save_energy(&m)?;
                }
                json!({"kind": "energy", "weights": m.weights.to_vec(), "rmse": m.rmse})
            }
        }
        FitKind::Area => {
            let rows = table
                .column("area_mm2")?
                .into_iter()
                .map(|(c, v)| Ok((features(c, &spec, &hw)?.tiles, v)))
                .collect::<Result<Vec<_>>>()?;
            let m = fit_area(&rows)?;
            if let Some(s) = &store {
                s.save_area(&m)?;
            }
            json!({"kind": "area", "weights": m.weights(), "rmse": m.rmse})
        }
    };
    if let Some(s) = &store {
        if args.kind != FitKind::Accuracy {
            s.save_hw(&hw)?;
        }
    }
    if let Some(path) = &args.out {
        write_json(path, &model_json)?;
    }
    emit(out, &model_json)
}

fn predict(args: PredictArgs, out: &mut dyn Write) -> Result<()> {
    let spec = load_spec(&args.spec)?;
    let store = ModelStore::open_existing(&args.models)?;
    let hw = load_hw(&args.hw, Some(&store))?;
    let config = parse_arch(&args.arch, &spec)?;
    let accuracy = store.load_accuracy()?;
    let costs = store.load_costs()?;
    let g = nn_degree(&config, &spec)?.g;
    let f = features(&config, &spec, &hw)?;
    let theta = accuracy.map(|m| m.predict(g)).transpose()?;
    for (name, missing) in [
        ("accuracy", accuracy.is_none()),
        ("latency", costs.latency.is_none()),
        ("energy", costs.energy.is_none()),
    ] {
        if missing {
            warn!("{name} model not found in {}", args.models.display());
        }
    }
    emit(
        out,
        &json!({
            "theta": theta,
            "area_mm2": costs.predict_area(&f, &hw),
            "latency_ms": costs.latency.map(|m| m.predict(&f)),
            "energy_mj": costs.energy.map(|m| m.predict(&f)),
            "g": g,
        }),
    )
}

fn search(args: SearchArgs, out: &mut dyn Write) -> Result<()> {
    let spec = load_spec(&args.spec)?;
    let store = ModelStore::open_existing(&args.models)?;
    let hw = load_hw(&args.hw, Some(&store))?;
    let costs = store.load_costs()?;
    let constraints = Constraints {
        theta_min: args.theta_min.map(|t| if t > 1.0 { t / 100.0 } else { t }),
        area_max: args.area_max,
        latency_max: args.latency_max,
        energy_max: args.energy_max,
    };
    let result = match args.mode {
        SearchMode::TrainingFree => {
            training_free_search(&spec, &costs, &hw, &constraints, args.samples, args.seed)?
        }
        SearchMode::Shgo | SearchMode::Brute => {
            let mode = match args.objective {
                ObjectiveArg::Full => ObjectiveMode::Full,
                ObjectiveArg::Device => ObjectiveMode::Device,
            };
            let objective = Objective::new(mode, store.load_accuracy()?, costs, hw);
            if args.mode == SearchMode::Shgo {
                hierarchical_search(&spec, &objective, &constraints, args.lambda)?
            } else {
                brute_force_search(&spec, &objective, &constraints)?
            }
        }
    };
    if let Some(path) = &args.out {
        write_json(path, &result)?;
    }
    emit(out, &result)
}

/// Entry point used by the binary; returns the process exit code.
pub fn main_with_args<I, T>(args: I, out: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    let _ = env_logger::Builder::new()
        .filter_level(level)
        .parse_default_env()
        .target(env_logger::Target::Stderr)
        .try_init();
    match run(cli, out) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if let Error::Infeasible {
                best_point: Some(p),
                ..
            } = &e
            {
                eprintln!("best infeasible point: {p:?}");
            }
            e.exit_code()
        }
    }
}
