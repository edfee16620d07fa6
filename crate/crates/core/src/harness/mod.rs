//! Experiment runner: scenario suites, fixed-time versus adaptive comparisons
//! on paired arrival streams, and report files.

mod astm;
mod report;
mod suite;

pub use astm::{AstmController, PlanUpdate};
pub use report::{emit_report, AGGREGATE_HEADER, PER_SCENARIO_HEADER};
pub use suite::{epoch, generate_scenario, generate_suite, sample_minute_counts, training_series};

use std::fmt;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forecast::{fit_forecaster, ForecasterSpec, LstmModel};
use crate::metrics::{mean, MetricsReport};
use crate::scenario::{load_scenario, Scenario, SignalPlan};
use crate::seed::{derive_seed, TAG_RUN};
use crate::sim::{run_simulation, FixedTime, SignalController, SimLog};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ControllerKind {
    Fixed,
    Astm,
}

impl fmt::Display for ControllerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ControllerKind::Fixed => "fixed",
            ControllerKind::Astm => "astm",
        })
    }
}

impl std::str::FromStr for ControllerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fixed" => Ok(ControllerKind::Fixed),
            "astm" => Ok(ControllerKind::Astm),
            other => Err(Error::Argument(format!(
                "unknown controller {other:?}, expected fixed or astm"
            ))),
        }
    }
}

/// Fixed-time baseline timing. Without explicit greens the cycle is split
/// equally after lost time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FixedTiming {
    pub cycle: f64,
    pub greens: Option<Vec<f64>>,
}

impl Default for FixedTiming {
    fn default() -> Self {
        Self {
            cycle: 90.0,
            greens: None,
        }
    }
}

impl FixedTiming {
    pub fn plan(&self, scenario: &Scenario) -> Result<SignalPlan> {
        let plan = match &self.greens {
            None => SignalPlan::equal_split(scenario, self.cycle),
            Some(g) => SignalPlan {
                cycle_length: self.cycle,
                greens: g.clone(),
                lost_time: scenario.lost_time(),
                oversaturated: false,
            },
        };
        plan.validate(scenario)?;
        Ok(plan)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ScenarioSource {
    Files { paths: Vec<PathBuf> },
    Generated { count: usize, seed: u64 },
}

impl ScenarioSource {
    pub fn load(&self) -> Result<Vec<Scenario>> {
        match self {
            ScenarioSource::Files { paths } => paths.iter().map(load_scenario).collect(),
            ScenarioSource::Generated { count, seed } => Ok(generate_suite(*count, *seed)),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ForecasterSource {
    /// A saved model file.
    Load { path: PathBuf },
    /// Train on `profiles` generated demand profiles, `days` days each.
    Train {
        #[serde(default)]
        spec: ForecasterSpec,
        profiles: usize,
        days: usize,
        seed: u64,
    },
}

impl Default for ForecasterSource {
    fn default() -> Self {
        ForecasterSource::Train {
            spec: ForecasterSpec {
                hidden: 16,
                ..ForecasterSpec::default()
            },
            profiles: 4,
            days: 7,
            seed: 7,
        }
    }
}

impl ForecasterSource {
    pub fn obtain(&self) -> Result<LstmModel<f64>> {
        match self {
            ForecasterSource::Load { path } => LstmModel::load(path),
            ForecasterSource::Train {
                spec,
                profiles,
                days,
                seed,
            } => Ok(fit_forecaster(&training_series(*profiles, *days, *seed), spec)?.0),
        }
    }
}

/// Everything a comparison run needs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub scenarios: ScenarioSource,
    pub seeds: Vec<u64>,
    pub baseline: ControllerKind,
    pub treatment: ControllerKind,
    pub fixed: FixedTiming,
    pub forecaster: ForecasterSource,
    pub out_dir: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            scenarios: ScenarioSource::Generated {
                count: 20,
                seed: 2017,
            },
            seeds: (1..=5).collect(),
            baseline: ControllerKind::Fixed,
            treatment: ControllerKind::Astm,
            fixed: FixedTiming::default(),
            forecaster: ForecasterSource::default(),
            out_dir: None,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: Self = serde_json::from_str(text).map_err(Error::from_json)?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::Config("at least one seed is required".into()));
        }
        match &self.scenarios {
            ScenarioSource::Files { paths } if paths.is_empty() => {
                Err(Error::Config("at least one scenario is required".into()))
            }
            ScenarioSource::Generated { count: 0, .. } => {
                Err(Error::Config("at least one scenario is required".into()))
            }
            _ => Ok(()),
        }
    }

    pub fn needs_forecaster(&self) -> bool {
        self.baseline == ControllerKind::Astm || self.treatment == ControllerKind::Astm
    }
}

/// Arrival seed of one (scenario, seed) cell; both arms share it.
pub fn run_seed(scenario: &Scenario, seed: u64) -> u64 {
    derive_seed(scenario.seed, TAG_RUN, seed)
}

/// Runs one controller on one scenario.
pub fn simulate_with(
    kind: ControllerKind,
    scenario: &Scenario,
    fixed: &FixedTiming,
    model: Option<&LstmModel<f64>>,
    seed: u64,
) -> Result<SimLog> {
    let mut controller: Box<dyn SignalController + '_> = match kind {
        ControllerKind::Fixed => Box::new(FixedTime::new(fixed.plan(scenario)?)),
        ControllerKind::Astm => {
            let model = model.ok_or_else(|| {
                Error::Config("the astm controller needs a forecaster model".into())
            })?;
            Box::new(AstmController::new(model, scenario, seed)?)
        }
    };
    run_simulation(scenario, controller.as_mut(), seed)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub scenario: usize,
    pub seed: u64,
    pub baseline: MetricsReport,
    pub treatment: MetricsReport,
}

/// Means over all rows; delay means only over rows where the arm had
/// departures.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub runs: usize,
    pub baseline_flow: f64,
    pub treatment_flow: f64,
    pub baseline_delay: Option<f64>,
    pub treatment_delay: Option<f64>,
    /// (treatment - baseline) / baseline, percent.
    pub flow_improvement_pct: Option<f64>,
    /// (baseline - treatment) / baseline, percent.
    pub delay_improvement_pct: Option<f64>,
}

impl Aggregate {
    pub fn from_rows(rows: &[ComparisonRow]) -> Self {
        if rows.is_empty() {
            return Self::default();
        }
        let flows = |f: fn(&ComparisonRow) -> f64| {
            mean(&rows.iter().map(f).collect::<Vec<_>>()).unwrap_or(0.0)
        };
        let delays = |f: fn(&ComparisonRow) -> Option<f64>| {
            mean(&rows.iter().filter_map(f).collect::<Vec<_>>())
        };
        let baseline_flow = flows(|r| r.baseline.flow_rate);
        let treatment_flow = flows(|r| r.treatment.flow_rate);
        let baseline_delay = delays(|r| r.baseline.mean_delay);
        let treatment_delay = delays(|r| r.treatment.mean_delay);
        let flow_improvement_pct =
            (baseline_flow > 0.0).then(|| 100.0 * (treatment_flow - baseline_flow) / baseline_flow);
        let delay_improvement_pct = match (baseline_delay, treatment_delay) {
            (Some(b), Some(t)) if b > 0.0 => Some(100.0 * (b - t) / b),
            (Some(b), Some(t)) if b == t => Some(0.0),
            _ => None,
        };
        Self {
            runs: rows.len(),
            baseline_flow,
            treatment_flow,
            baseline_delay,
            treatment_delay,
            flow_improvement_pct,
            delay_improvement_pct,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub baseline: ControllerKind,
    pub treatment: ControllerKind,
    /// Ordered by scenario index, then seed.
    pub rows: Vec<ComparisonRow>,
    pub aggregate: Aggregate,
    pub notes: Vec<String>,
}

impl ComparisonReport {
    pub fn new(
        baseline: ControllerKind,
        treatment: ControllerKind,
        rows: Vec<ComparisonRow>,
    ) -> Self {
        let mut notes = Vec::new();
        for r in &rows {
            for (arm, m) in [(baseline, &r.baseline), (treatment, &r.treatment)] {
                if m.mean_delay.is_none() {
                    notes.push(format!(
                        "scenario {} seed {} {arm}: no departures, delay undefined",
                        r.scenario, r.seed
                    ));
                }
            }
        }
        let aggregate = Aggregate::from_rows(&rows);
        Self {
            baseline,
            treatment,
            rows,
            aggregate,
            notes,
        }
    }
}

/// Runs both arms on every scenario and seed. Cells run in parallel; rows come
/// back in scenario-then-seed order.
pub fn run_comparison(
    config: &ExperimentConfig,
    scenarios: &[Scenario],
    model: Option<&LstmModel<f64>>,
) -> Result<ComparisonReport> {
    config.validate()?;
    if scenarios.is_empty() {
        return Err(Error::Config("at least one scenario is required".into()));
    }
    if config.needs_forecaster() && model.is_none() {
        return Err(Error::Config(
            "the astm controller needs a forecaster model".into(),
        ));
    }
    let cells: Vec<(usize, u64)> = (0..scenarios.len())
        .flat_map(|i| config.seeds.iter().map(move |&s| (i, s)))
        .collect();
    let rows = cells
        .par_iter()
        .map(|&(i, seed)| {
            let scenario = &scenarios[i];
            let run = |kind| -> Result<MetricsReport> {
                let log = simulate_with(
                    kind,
                    scenario,
                    &config.fixed,
                    model,
                    run_seed(scenario, seed),
                )?;
                MetricsReport::from_log(&log, scenario.mean_free_flow_crossing())
            };
            (|| {
                Ok(ComparisonRow {
                    scenario: i,
                    seed,
                    baseline: run(config.baseline)?,
                    treatment: run(config.treatment)?,
                })
            })()
            .map_err(|e| Error::Run {
                context: format!("scenario {i} seed {seed}"),
                source: Box::new(e),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ComparisonReport::new(
        config.baseline,
        config.treatment,
        rows,
    ))
}
