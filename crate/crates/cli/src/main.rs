use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use astm_core::forecast::{fit_forecaster, ForecasterSpec, HourlySeries, LstmModel};
use astm_core::harness::{
    emit_report, generate_suite, run_comparison, simulate_with, training_series, ControllerKind,
    ExperimentConfig, FixedTiming, ForecasterSource,
};
use astm_core::load_scenario;
use astm_core::metrics::MetricsReport;
use clap::{Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "astm", version, about = "Adaptive signal control laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Controller {
    Fixed,
    Astm,
}

impl From<Controller> for ControllerKind {
    fn from(c: Controller) -> Self {
        match c {
            Controller::Fixed => ControllerKind::Fixed,
            Controller::Astm => ControllerKind::Astm,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario under one controller and write its logs and metrics.
    Simulate {
        /// Scenario JSON file.
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum, default_value = "fixed")]
        controller: Controller,
        /// Arrival seed; defaults to the scenario's seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Fixed-time cycle length, seconds.
        #[arg(long, default_value_t = 90.0)]
        cycle: f64,
        /// Forecaster for the astm controller; trained on generated data if absent.
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Train the LSTM forecaster on hourly count CSVs and save it.
    TrainForecaster {
        /// `timestamp,count` CSV; repeatable. Without it, generated demand is used.
        #[arg(long)]
        data: Vec<PathBuf>,
        /// Forecaster spec JSON (hidden, context, seed, train).
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output model file.
        #[arg(long, default_value = "model.json")]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        hidden: Option<usize>,
        #[arg(long)]
        lr: Option<f64>,
    },
    /// Compare a baseline and a treatment controller over a scenario suite.
    Compare {
        /// Experiment config JSON; defaults apply when absent.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Report directory.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Run only this arrival seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Treatment arm.
        #[arg(long, value_enum)]
        controller: Option<Controller>,
    },
    /// Write a generated scenario suite as JSON files.
    GenerateSuite {
        #[arg(long, default_value_t = 20)]
        n: usize,
        #[arg(long, default_value_t = 2017)]
        seed: u64,
        #[arg(long, default_value = "suite")]
        out: PathBuf,
    },
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn simulate(
    config: &Path,
    controller: Controller,
    seed: Option<u64>,
    out: &Path,
    cycle: f64,
    model: Option<&Path>,
) -> Result<()> {
    let scenario =
        load_scenario(config).with_context(|| format!("loading {}", config.display()))?;
    for w in scenario.warnings() {
        eprintln!("warning: {w}");
    }
    let kind = ControllerKind::from(controller);
    let model = match (kind, model) {
        (ControllerKind::Astm, Some(p)) => {
            Some(LstmModel::load(p).with_context(|| format!("loading {}", p.display()))?)
        }
        (ControllerKind::Astm, None) => Some(ForecasterSource::default().obtain()?),
        (ControllerKind::Fixed, _) => None,
    };
    let fixed = FixedTiming {
        cycle,
        greens: None,
    };
    let seed = seed.unwrap_or(scenario.seed);
    let log = simulate_with(kind, &scenario, &fixed, model.as_ref(), seed)?;
    let metrics = MetricsReport::from_log(&log, scenario.mean_free_flow_crossing())?;

    create_dir(out)?;
    log.write_vehicles_csv(out.join("vehicles.csv"))?;
    log.write_throughput_csv(out.join("throughput.csv"))?;
    let csv = format!("{}\n{}\n", MetricsReport::CSV_HEADER, metrics.csv_row());
    std::fs::write(out.join("metrics.csv"), csv).context("writing metrics.csv")?;
    let summary = format!("controller {kind}, seed {seed}\n{}", metrics.summary());
    std::fs::write(out.join("summary.txt"), &summary).context("writing summary.txt")?;
    print!("{summary}");
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn train_forecaster(
    data: &[PathBuf],
    config: Option<&Path>,
    out: &Path,
    seed: Option<u64>,
    epochs: Option<usize>,
    hidden: Option<usize>,
    lr: Option<f64>,
) -> Result<()> {
    let mut spec = match config {
        Some(p) => {
            let text =
                std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            serde_json::from_str::<ForecasterSpec>(&text)
                .with_context(|| format!("parsing {}", p.display()))?
        }
        None => ForecasterSpec::default(),
    };
    if let Some(s) = seed {
        spec.seed = s;
        spec.train.shuffle_seed = Some(s);
    }
    if let Some(e) = epochs {
        spec.train.epochs = e;
    }
    if let Some(h) = hidden {
        spec.hidden = h;
    }
    if let Some(lr) = lr {
        spec.train.learning_rate = lr;
    }
    let series = if data.is_empty() {
        training_series(4, 7, spec.seed)
    } else {
        data.iter()
            .map(|p| HourlySeries::read_csv(p).with_context(|| format!("reading {}", p.display())))
            .collect::<Result<Vec<_>>>()?
    };
    let (model, history) = fit_forecaster(&series, &spec)?;
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    model.save(out)?;
    for (epoch, loss) in history.iter().enumerate() {
        println!("epoch {:>4}  mse {loss:.6}", epoch + 1);
    }
    println!("saved {}", out.display());
    Ok(())
}

fn compare(
    config: Option<&Path>,
    out: Option<&Path>,
    seed: Option<u64>,
    controller: Option<Controller>,
) -> Result<()> {
    let mut config = match config {
        Some(p) => ExperimentConfig::load(p).with_context(|| format!("loading {}", p.display()))?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = seed {
        config.seeds = vec![s];
    }
    if let Some(c) = controller {
        config.treatment = c.into();
    }
    let Some(out) = out
        .map(Path::to_path_buf)
        .or_else(|| config.out_dir.clone())
    else {
        bail!("no report directory: pass --out or set out_dir in the config");
    };
    let scenarios = config.scenarios.load()?;
    let model = if config.needs_forecaster() {
        Some(config.forecaster.obtain()?)
    } else {
        None
    };
    let report = run_comparison(&config, &scenarios, model.as_ref())?;
    emit_report(&report, &out)?;
    print!(
        "{}",
        std::fs::read_to_string(out.join("summary.txt")).context("reading summary.txt")?
    );
    Ok(())
}

fn write_suite(n: usize, seed: u64, out: &Path) -> Result<()> {
    if n == 0 {
        bail!("--n must be at least 1");
    }
    create_dir(out)?;
    for (i, s) in generate_suite(n, seed).iter().enumerate() {
        let path = out.join(format!("scenario_{i:03}.json"));
        s.save(&path)?;
    }
    println!("wrote {n} scenarios to {}", out.display());
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate {
            config,
            controller,
            seed,
            out,
            cycle,
            model,
        } => simulate(&config, controller, seed, &out, cycle, model.as_deref()),
        Command::TrainForecaster {
            data,
            config,
            out,
            seed,
            epochs,
            hidden,
            lr,
        } => train_forecaster(&data, config.as_deref(), &out, seed, epochs, hidden, lr),
        Command::Compare {
            config,
            out,
            seed,
            controller,
        } => compare(config.as_deref(), out.as_deref(), seed, controller),
        Command::GenerateSuite { n, seed, out } => write_suite(n, seed, &out),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
