use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use neurometa_core::dataset::{self, validate_features, DataSplit, Dataset, FEATURE_COUNT};
use neurometa_core::harness::{
    self, read_json, read_text, run_sweep, time_algorithms, timing_csv, write_json, write_text, ExperimentSpec,
    HarnessError, Method, ModelEntry, RunReport, SweepPlan,
};
use neurometa_core::metaheuristics::{Bounds, Knobs};
use neurometa_core::metrics::{self, ModelReports};
use neurometa_core::mlp::{self, TrainedModel};

#[derive(Parser)]
#[command(name = "neurometa", version, about = "Heating-load MLPs trained by metaheuristics")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// ENB2012-style CSV.
    #[arg(long, global = true, default_value = "data/ENB2012_data.csv")]
    data: PathBuf,
    #[arg(long, global = true, default_value_t = dataset::DEFAULT_SPLIT_SEED)]
    split_seed: u64,
    /// Parallel workers (rayon threads).
    #[arg(long, global = true, default_value_t = 1)]
    workers: usize,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Train one or more models on the canonical split.
    Train {
        /// alo, bbo, da, es, iwo, lca or lm; repeatable.
        #[arg(long = "algorithm", short = 'a', required = true)]
        algorithms: Vec<Method>,
        /// Population size; defaults to each algorithm's published best.
        #[arg(long)]
        pop: Option<usize>,
        #[arg(long, default_value_t = harness::DEFAULT_ITERATIONS)]
        iters: usize,
        /// Repeatable; one run per seed.
        #[arg(long = "seed", default_values_t = [1u64])]
        seeds: Vec<u64>,
        /// Symmetric weight bound.
        #[arg(long, default_value_t = neurometa_core::metaheuristics::DEFAULT_WEIGHT_BOUND)]
        bounds: f64,
        /// TOML file of algorithm knobs.
        #[arg(long)]
        knobs: Option<PathBuf>,
        #[arg(long, default_value = "runs")]
        out: PathBuf,
    },
    /// Population-size sweep; resumable from the output directory.
    Sweep {
        /// TOML plan; defaults to all six algorithms, eleven sizes, five seeds.
        #[arg(long)]
        plan: Option<PathBuf>,
        #[arg(long, default_value = "sweep")]
        out: PathBuf,
    },
    /// Metrics of a saved model on a split.
    Evaluate {
        #[arg(long)]
        model: PathBuf,
        /// Split JSON; defaults to the seeded canonical split.
        #[arg(long)]
        split: Option<PathBuf>,
    },
    /// Rank models from run reports (JSON) or metric-table CSV files.
    Rank {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Median wall time per algorithm and population size.
    Time {
        #[arg(long)]
        plan: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Heating load for one building.
    Predict {
        #[arg(long)]
        model: PathBuf,
        /// RC SA WA RA OH orientation GA GAD
        #[arg(num_args = FEATURE_COUNT, required = true, allow_negative_numbers = true)]
        features: Vec<f64>,
    },
    /// Write the published BBO network as a model file.
    Reference {
        #[arg(long, default_value = "reference.model.json")]
        out: PathBuf,
    },
}

enum Failure {
    Usage(String),
    Data(String),
    Run(String),
}

impl From<HarnessError> for Failure {
    fn from(e: HarnessError) -> Self {
        if e.is_data_error() {
            Failure::Data(e.to_string())
        } else {
            Failure::Run(e.to_string())
        }
    }
}

fn load(path: &Path) -> Result<Dataset, Failure> {
    dataset::load_csv(path).map_err(|e| Failure::Data(e.to_string()))
}

fn load_model(path: &Path) -> Result<TrainedModel, Failure> {
    let text = read_text(path)?;
    TrainedModel::from_json(&text).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))
}

fn load_plan(path: Option<&Path>) -> Result<SweepPlan, Failure> {
    match path {
        Some(p) => SweepPlan::from_toml(&read_text(p)?).map_err(|e| Failure::Usage(format!("{}: {e}", p.display()))),
        None => Ok(SweepPlan::default()),
    }
}

fn emit(text: &str, out: Option<&Path>) -> Result<(), Failure> {
    match out {
        Some(p) => Ok(write_text(p, text)?),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn json<T: serde::Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("serializable") + "\n"
}

fn pool(workers: usize) -> Result<rayon::ThreadPool, Failure> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Failure::Run(e.to_string()))
}

#[allow(clippy::too_many_arguments)]
fn train(
    g: &Global,
    methods: &[Method],
    pop: Option<usize>,
    iters: usize,
    seeds: &[u64],
    bound: f64,
    knobs: Option<&Path>,
    out: &Path,
) -> Result<(), Failure> {
    if !(bound.is_finite() && bound > 0.0) {
        return Err(Failure::Usage(format!("--bounds must be a positive number, got {bound}")));
    }
    let knobs = match knobs {
        Some(p) => Knobs::from_toml(&read_text(p)?).map_err(|e| Failure::Usage(format!("{}: {e}", p.display())))?,
        None => Knobs::default(),
    };
    let data = load(&g.data)?;
    let prep = harness::prepare(&data, dataset::DEFAULT_TRAIN_FRACTION, g.split_seed)?;
    let pool = pool(g.workers)?;
    let mut entries = Vec::new();
    for &method in methods {
        for &seed in seeds {
            let size = match method {
                Method::Meta(a) => pop.unwrap_or(a.published_best_population()),
                Method::Lm => 0,
            };
            let mut spec = ExperimentSpec::new(method, size, iters, seed);
            spec.split_seed = g.split_seed;
            spec.config.bounds = Bounds::uniform(mlp::WEIGHT_COUNT, -bound, bound);
            spec.config.knobs = knobs.clone();
            let exp = pool.install(|| harness::train_prepared(&spec, &prep))?;
            let stem = format!("{method}-p{size}-s{seed}");
            write_text(&out.join(format!("{stem}.model.json")), &exp.model.to_json())?;
            write_text(&out.join(format!("{stem}.curve.csv")), &exp.result.curve.to_csv())?;
            eprintln!(
                "{stem}: train mse {:.6}, test rmse {:.4}, r2 {:.4}, {:.1}s",
                exp.result.best_objective, exp.test.rmse, exp.test.r2, exp.result.wall_time
            );
            let name = if seeds.len() == 1 {
                method.label()
            } else {
                format!("{}@s{seed}", method.label())
            };
            entries.push(ModelEntry {
                name,
                model: exp.model,
                train: exp.train,
                test: exp.test,
                result: exp.result,
            });
        }
    }
    let report = RunReport::new(&data, &prep, entries)?;
    write_json(&out.join("report.json"), &report)?;
    write_json(&out.join("split.json"), &report.split)?;
    let reports = report.model_reports();
    match g.format {
        Format::Json => emit(&json(&reports), None),
        Format::Csv => emit(&metrics::reports_to_csv(&reports), None),
    }
}

fn evaluate(g: &Global, model: &Path, split: Option<&Path>) -> Result<(), Failure> {
    let data = load(&g.data)?;
    let model = load_model(model)?;
    let split: DataSplit = match split {
        Some(p) => read_json(p)?,
        None => dataset::split(&data, dataset::DEFAULT_TRAIN_FRACTION, g.split_seed)
            .map_err(|e| Failure::Data(e.to_string()))?,
    };
    let (train, test) = harness::evaluate(&model, &data, &split)?;
    match g.format {
        Format::Json => emit(&json(&[train, test]), None),
        Format::Csv => {
            let mut s = String::from("phase,rmse,mae,r2,mape,n\n");
            for r in [train, test] {
                s.push_str(&format!("{},{},{},{},{},{}\n", r.phase, r.rmse, r.mae, r.r2, r.mape, r.n));
            }
            emit(&s, None)
        }
    }
}

fn read_reports(path: &Path) -> Result<Vec<ModelReports>, Failure> {
    let text = read_text(path)?;
    if let Ok(report) = serde_json::from_str::<RunReport>(&text) {
        return Ok(report.model_reports());
    }
    if let Ok(list) = serde_json::from_str::<Vec<ModelReports>>(&text) {
        return Ok(list);
    }
    metrics::reports_from_csv(&text).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))
}

fn rank(g: &Global, inputs: &[PathBuf], out: Option<&Path>) -> Result<(), Failure> {
    let mut reports = Vec::new();
    for p in inputs {
        reports.extend(read_reports(p)?);
    }
    let (table, csv) = harness::rank_models(&reports)?;
    match g.format {
        Format::Csv => emit(&csv, out),
        Format::Json => emit(&json(&table), out),
    }
}

fn predict(model: &Path, features: &[f64]) -> Result<(), Failure> {
    let x: [f64; FEATURE_COUNT] = features
        .try_into()
        .map_err(|_| Failure::Usage(format!("expected {FEATURE_COUNT} features, got {}", features.len())))?;
    validate_features(&x, 1).map_err(|e| Failure::Data(e.to_string()))?;
    let model = load_model(model)?;
    println!("{:.4}", model.predict_features(&x));
    Ok(())
}

fn reference(g: &Global, out: &Path) -> Result<(), Failure> {
    let data = load(&g.data)?;
    let model = harness::reference_model(&data)?;
    write_text(out, &model.to_json())?;
    let fit = harness::reference_fit(&data)?;
    eprintln!(
        "wrote {}; R2 over {} rows: {:.4} reading the output as scaled, {:.4} reading it as raw",
        out.display(),
        fit.rows,
        fit.r2_scaled_output,
        fit.r2_raw_output
    );
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    let g = &cli.global;
    match &cli.command {
        Command::Train {
            algorithms,
            pop,
            iters,
            seeds,
            bounds,
            knobs,
            out,
        } => train(g, algorithms, *pop, *iters, seeds, *bounds, knobs.as_deref(), out),
        Command::Sweep { plan, out } => {
            let plan = load_plan(plan.as_deref())?;
            let data = load(&g.data)?;
            let report = run_sweep(&plan, &data, Some(out), g.workers)?;
            let failed = report.cells.iter().filter(|c| c.summary().is_none()).count();
            eprintln!("{} cells, {failed} failed; report in {}", report.cells.len(), out.join("sweep.json").display());
            match g.format {
                Format::Json => emit(&json(&report.best_sizes), None),
                Format::Csv => {
                    let mut s = String::from("algorithm,best_population,median_final_mse,published\n");
                    for b in &report.best_sizes {
                        s.push_str(&format!(
                            "{},{},{},{}\n",
                            b.algorithm.model_label(),
                            b.population_size,
                            b.median_final_mse,
                            b.published
                        ));
                    }
                    emit(&s, None)
                }
            }
        }
        Command::Evaluate { model, split } => evaluate(g, model, split.as_deref()),
        Command::Rank { inputs, out } => rank(g, inputs, out.as_deref()),
        Command::Time { plan, out } => {
            let plan = load_plan(plan.as_deref())?;
            let data = load(&g.data)?;
            let rows = time_algorithms(&plan, &data, g.workers)?;
            match g.format {
                Format::Csv => emit(&timing_csv(&rows), out.as_deref()),
                Format::Json => emit(&json(&rows), out.as_deref()),
            }
        }
        Command::Predict { model, features } => predict(model, features),
        Command::Reference { out } => reference(g, out),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Data(m)) => {
            eprintln!("data error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Run(m)) => {
            eprintln!("run failed: {m}");
            ExitCode::from(3)
        }
    }
}
