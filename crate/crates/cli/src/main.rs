use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use nilm_core::dataio::{
    self, downsample_1min, generate, load_dir, load_streams, read_estimates, read_model, read_stream,
    save_dir, split_halves, write_estimates, write_model, Estimates, SyntheticSpec,
};
use nilm_core::metrics::{aped, HouseRecord};
use nilm_core::registry::{disaggregate_with, MinimizerRegistry};
use nilm_core::solver::{Initialization, SolveTrace, SolverOptions, DEFAULT_MAX_ITERS};
use nilm_core::training::train_model;
use nilm_core::verify::{run_battery, VerifySize};
use nilm_core::{AggregateSeries, Error};

#[derive(Parser)]
#[command(name = "nilm", version, about = "Phase-aware energy disaggregation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic household bundle with planted ground truth.
    Generate {
        /// JSON generator spec.
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Learn state levels and line connectivity from sub-metered data.
    Train(TrainArgs),
    /// Estimate per-appliance power from per-line aggregates.
    Disaggregate(DisaggregateArgs),
    /// Score estimates against sub-metered truth.
    Evaluate {
        /// Bundle directory with appliance readings; repeat once per house.
        #[arg(long, required = true)]
        truth: Vec<PathBuf>,
        /// Estimates CSV; one per --truth, in the same order.
        #[arg(long, required = true)]
        estimates: Vec<PathBuf>,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Run the structural check battery on random instances.
    Verify {
        #[arg(long, value_enum, default_value_t = SizeArg::Tiny)]
        size: SizeArg,
        #[arg(long, default_value_t = 20)]
        seeds: u64,
        /// Negate every smoothness weight before checking.
        #[arg(long, hide = true)]
        inject_lambda_flip: bool,
    },
    /// Resample a raw bundle to one-minute means and split it in halves.
    Split {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        train_out: PathBuf,
        #[arg(long)]
        test_out: PathBuf,
        /// Average into whole minutes before splitting.
        #[arg(long)]
        downsample: bool,
    },
    /// List the available minimizers.
    Methods,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    data: PathBuf,
    /// One state count for every appliance, or a comma-separated list.
    #[arg(long, default_value = "3")]
    states: String,
    #[arg(long, default_value_t = nilm_core::setfn::DEFAULT_LAMBDA)]
    lambda: f64,
    #[arg(long)]
    out: PathBuf,
    /// Train on the first half of the bundle only.
    #[arg(long)]
    first_half: bool,
}

#[derive(Args)]
struct DisaggregateArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    agg: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_MAX_ITERS)]
    max_iters: usize,
    #[arg(long)]
    out: PathBuf,
    /// Trace JSON path; defaults to `<out stem>.trace.json` next to --out.
    #[arg(long)]
    trace: Option<PathBuf>,
    #[arg(long, default_value = "mm")]
    method: String,
    /// Override every appliance's smoothness weight.
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long, value_enum, default_value_t = InitArg::Random)]
    init: InitArg,
}

#[derive(Clone, Copy, ValueEnum)]
enum SizeArg {
    Tiny,
    Small,
}

#[derive(Clone, Copy, ValueEnum)]
enum InitArg {
    Random,
    Greedy,
}

/// Failure of a command, mapped to the process exit code.
enum Failure {
    Data(Error),
    Verify,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Data(e)
    }
}

type CmdResult = std::result::Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Generate { spec, out } => cmd_generate(&spec, &out),
        Command::Train(a) => cmd_train(&a),
        Command::Disaggregate(a) => cmd_disaggregate(&a),
        Command::Evaluate {
            truth,
            estimates,
            report,
        } => cmd_evaluate(&truth, &estimates, report.as_deref()),
        Command::Verify {
            size,
            seeds,
            inject_lambda_flip,
        } => cmd_verify(size, seeds, inject_lambda_flip),
        Command::Split {
            data,
            train_out,
            test_out,
            downsample,
        } => cmd_split(&data, &train_out, &test_out, downsample),
        Command::Methods => {
            for m in MinimizerRegistry::builtin().iter() {
                println!("{:<12} {}", m.name(), m.description());
            }
            Ok(())
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Verify) => ExitCode::from(1),
        Err(Failure::Data(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> nilm_core::Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("serializable");
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn cmd_generate(spec_path: &Path, out: &Path) -> CmdResult {
    let text = fs::read_to_string(spec_path).map_err(|e| Error::io(spec_path, e))?;
    let spec: SyntheticSpec = serde_json::from_str(&text).map_err(|source| Error::Json {
        path: spec_path.to_path_buf(),
        source,
    })?;
    let ds = generate(&spec)?;
    save_dir(&ds, out)?;
    println!(
        "wrote {} ticks, {} appliances, {} lines to {}",
        ds.len(),
        spec.num_appliances,
        spec.num_lines,
        out.display()
    );
    Ok(())
}

fn parse_states(s: &str, l: usize) -> nilm_core::Result<Vec<usize>> {
    let parsed: Vec<usize> = s
        .split(',')
        .map(|p| p.trim().parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::InvalidInput(format!("--states `{s}` is not a count or list of counts")))?;
    match parsed.len() {
        1 => Ok(vec![parsed[0]; l]),
        n if n == l => Ok(parsed),
        n => Err(Error::Dimension {
            axis: "--states entries",
            expected: l,
            found: n,
        }),
    }
}

fn cmd_train(a: &TrainArgs) -> CmdResult {
    let mut ds = load_dir(&a.data)?;
    if a.first_half {
        ds = split_halves(&ds)?.0;
    }
    let appliances = ds
        .appliances
        .as_ref()
        .ok_or_else(|| Error::InvalidInput(format!("{}: no appliance files", a.data.display())))?;
    let l = appliances.num_appliances();
    let states = parse_states(&a.states, l)?;
    let trained = train_model(appliances, &ds.aggregate, &states, &vec![a.lambda; l])?;
    for w in &trained.warnings {
        eprintln!("warning: {w}");
    }
    for ap in trained.model.appliances() {
        let fmt = |v: &[f64], p: usize| {
            v.iter().map(|x| format!("{x:.p$}")).collect::<Vec<_>>().join(", ")
        };
        println!("{:<16} mu = [{}]  w = [{}]", ap.name, fmt(&ap.mu, 2), fmt(&ap.weights, 4));
    }
    write_model(&a.out, &trained.model)?;
    Ok(())
}

#[derive(Serialize)]
struct TraceFile<'a> {
    method: &'a str,
    seed: u64,
    max_iters: usize,
    #[serde(flatten)]
    trace: &'a SolveTrace,
}

fn cmd_disaggregate(a: &DisaggregateArgs) -> CmdResult {
    let mut model = read_model(&a.model)?;
    if let Some(l) = a.lambda {
        model.set_lambda_all(l)?;
    }
    let stream = read_stream(&a.agg, None)?;
    let agg = AggregateSeries::from_rows(stream.rows)?.with_timestamps(stream.timestamps.clone())?;
    let registry = MinimizerRegistry::builtin();
    let method = registry.get(&a.method)?;
    let opts = SolverOptions {
        max_iters: a.max_iters,
        seed: a.seed,
        init: match a.init {
            InitArg::Random => Initialization::Random,
            InitArg::Greedy => Initialization::PerTimeGreedy,
        },
        ..SolverOptions::default()
    };
    let d = disaggregate_with(method, &model, &agg, &opts)?;
    write_estimates(
        &a.out,
        &Estimates {
            timestamps: stream.timestamps,
            names: model.names(),
            power: d.power,
        },
    )?;
    let trace_path = a.trace.clone().unwrap_or_else(|| {
        let stem = a.out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        a.out.with_file_name(format!("{stem}.trace.json"))
    });
    write_json(
        &trace_path,
        &TraceFile {
            method: method.name(),
            seed: a.seed,
            max_iters: a.max_iters,
            trace: &d.trace,
        },
    )?;
    println!(
        "{}: {} iterations, stop {:?}, set cost {:.6}, residual {:.6}",
        method.name(),
        d.trace.iterations,
        d.trace.stop_reason,
        d.trace.final_set_cost(),
        d.trace.final_residual_cost()
    );
    Ok(())
}

fn house_record(truth_dir: &Path, est_path: &Path) -> nilm_core::Result<(Vec<String>, HouseRecord)> {
    let ds = load_dir(truth_dir)?;
    let truth = ds
        .appliances
        .as_ref()
        .ok_or_else(|| Error::InvalidInput(format!("{}: no appliance files", truth_dir.display())))?;
    let est = read_estimates(est_path)?;
    let ts = ds.timestamps().unwrap_or_default();
    if est.timestamps != ts {
        return Err(Error::InvalidInput(format!(
            "{} has {} rows but {} holds {} aligned ticks (timestamps must match)",
            est_path.display(),
            est.timestamps.len(),
            truth_dir.display(),
            ts.len()
        )));
    }
    let mut truth_rows = Vec::with_capacity(est.names.len());
    for name in &est.names {
        let i = truth.names.iter().position(|n| n == name).ok_or_else(|| {
            Error::InvalidInput(format!("{}: no truth for appliance `{name}`", truth_dir.display()))
        })?;
        truth_rows.push(truth.values[i].clone());
    }
    if truth.names.len() != est.names.len() {
        return Err(Error::Dimension {
            axis: "appliances in estimates",
            expected: truth.names.len(),
            found: est.names.len(),
        });
    }
    let total = (0..ds.len()).map(|t| ds.aggregate.total(t)).collect();
    Ok((
        est.names,
        HouseRecord {
            truth: truth_rows,
            estimates: est.power,
            aggregate_total: total,
        },
    ))
}

fn cmd_evaluate(truth: &[PathBuf], estimates: &[PathBuf], report: Option<&Path>) -> CmdResult {
    if truth.len() != estimates.len() {
        return Err(Error::InvalidInput(format!(
            "{} --truth directories but {} --estimates files",
            truth.len(),
            estimates.len()
        ))
        .into());
    }
    let mut names: Option<Vec<String>> = None;
    let mut houses = Vec::new();
    for (t, e) in truth.iter().zip(estimates) {
        let (n, mut house) = house_record(t, e)?;
        match &names {
            None => names = Some(n),
            Some(first) => {
                // later houses follow the first house's appliance order
                let mut truth_rows = Vec::new();
                let mut est_rows = Vec::new();
                for name in first {
                    let k = n.iter().position(|x| x == name).ok_or_else(|| {
                        Error::InvalidInput(format!("{}: appliance `{name}` missing", e.display()))
                    })?;
                    truth_rows.push(house.truth[k].clone());
                    est_rows.push(house.estimates[k].clone());
                }
                house.truth = truth_rows;
                house.estimates = est_rows;
            }
        }
        houses.push(house);
    }
    let names = names.unwrap_or_default();
    let r = aped(&names, &houses)?;
    print!("{}", r.to_table());
    if let Some(p) = report {
        write_json(p, &r)?;
    }
    Ok(())
}

fn cmd_verify(size: SizeArg, seeds: u64, flip: bool) -> CmdResult {
    let size = match size {
        SizeArg::Tiny => VerifySize::Tiny,
        SizeArg::Small => VerifySize::Small,
    };
    let report = run_battery(size, seeds, flip);
    print!("{}", report.to_table());
    if report.all_passed() {
        println!("all checks passed on {seeds} seeds");
        Ok(())
    } else {
        for c in report.checks.iter().filter(|c| !c.passed()) {
            if let Some((seed, _)) = &c.first_failure {
                println!("FAILED {}: witness instance seed {seed}", c.name);
            }
        }
        Err(Failure::Verify)
    }
}

fn cmd_split(data: &Path, train_out: &Path, test_out: &Path, downsample: bool) -> CmdResult {
    let ds = if downsample {
        let paths = dataio::bundle_appliances(data)?;
        let raw = load_streams(&data.join(dataio::AGGREGATE_FILE), &paths)?;
        downsample_1min(&raw)?
    } else {
        load_dir(data)?
    };
    let (train, test) = split_halves(&ds)?;
    save_dir(&train, train_out)?;
    save_dir(&test, test_out)?;
    println!("train {} ticks, test {} ticks", train.len(), test.len());
    Ok(())
}
