//! The adaptive controller: detector counts feed the forecaster, whose
//! next-hour volumes drive Webster timing with the fuzzy adjustment.

use chrono::{Duration, NaiveDateTime};

use crate::control::{plan_for_interval, ControlConfig};
use crate::detector::DetectorModel;
use crate::error::{Error, Result};
use crate::forecast::{predict_steps, FeatureVector, LstmModel};
use crate::scenario::{Scenario, SignalPlan};
use crate::seed::{derive_seed, TAG_DETECTOR, TAG_HISTORY};
use crate::sim::{ControlContext, SignalController};

use super::suite::{epoch, sample_minute_counts};

/// Forecast-driven controller. Replans every `control.cadence` seconds and
/// repeats the cached plan for the cycles in between.
pub struct AstmController<'m> {
    model: &'m LstmModel<f64>,
    detector: DetectorModel,
    control: ControlConfig,
    /// Minute counts per approach for the hours before the run.
    warmup: Vec<Vec<u32>>,
    start: NaiveDateTime,
    seed: u64,
    updates: u64,
    next_update: f64,
    plan: Option<SignalPlan>,
    log: Vec<PlanUpdate>,
}

/// One replanning step, kept for inspection.
#[derive(Clone, Debug, PartialEq)]
pub struct PlanUpdate {
    pub time: f64,
    pub observed_last_hour: Vec<f64>,
    pub forecast: Vec<f64>,
    pub trend: f64,
    pub plan: SignalPlan,
}

impl<'m> AstmController<'m> {
    /// Controller for one run of `scenario` with arrival seed `seed`. The
    /// detector model and control configuration come from the scenario.
    pub fn new(model: &'m LstmModel<f64>, scenario: &Scenario, seed: u64) -> Result<Self> {
        scenario.validate()?;
        let minutes = (model.context() + 1) * 60;
        let end = scenario.demand.end();
        let offset = (end - (minutes as u64 * 60) % end) % end;
        Ok(Self {
            model,
            detector: scenario.detector,
            control: scenario.control.clone(),
            warmup: sample_minute_counts(
                scenario,
                offset,
                minutes,
                derive_seed(seed, TAG_HISTORY, 0),
            ),
            start: epoch(),
            seed,
            updates: 0,
            next_update: 0.0,
            plan: None,
            log: Vec::new(),
        })
    }

    pub fn updates(&self) -> &[PlanUpdate] {
        &self.log
    }

    /// Observed hourly counts for approach `a`, oldest first: `context + 1`
    /// rolling hours, the last one ending at minute `m`.
    fn observed_hours(&self, a: usize, m: usize, minute_arrivals: &[Vec<u32>]) -> Vec<u64> {
        let warm = &self.warmup[a];
        let recorded = &minute_arrivals[a][..m];
        let total = warm.len() + m;
        let minute = |i: usize| -> u64 {
            if i < warm.len() {
                warm[i] as u64
            } else {
                recorded[i - warm.len()] as u64
            }
        };
        let hours = self.model.context() + 1;
        let truth: Vec<u64> = (0..hours)
            .map(|j| {
                let end = total - (hours - 1 - j) * 60;
                (end - 60..end).map(minute).sum()
            })
            .collect();
        let seed = derive_seed(self.seed, TAG_DETECTOR, self.updates * 64 + a as u64);
        self.detector.observe_series(&truth, seed)
    }

    fn replan(&mut self, ctx: &ControlContext<'_>) -> Result<SignalPlan> {
        let scenario = ctx.scenario;
        let m = ((ctx.now / 60.0).floor() as usize)
            .min(ctx.minute_arrivals.first().map_or(0, |v| v.len()));
        // Calendar hour nearest to now; the rolling hour ending now is its lagged count.
        let at = self.start + Duration::hours(((m + 30) / 60) as i64);
        let context = self.model.context();

        let mut forecast = Vec::with_capacity(scenario.approaches.len());
        let mut last = Vec::with_capacity(scenario.approaches.len());
        for a in 0..scenario.approaches.len() {
            let counts = self.observed_hours(a, m, ctx.minute_arrivals);
            let history: Vec<FeatureVector> = (0..context)
                .map(|j| {
                    let ts = at - Duration::hours((context - 1 - j) as i64);
                    FeatureVector::at(counts[j + 1] as f64, ts)
                })
                .collect();
            let next = predict_steps(self.model, &history, at, 1)?;
            forecast.push(next.predictions[0]);
            last.push(counts[context] as f64);
        }

        let sat = scenario.saturation_flows();
        let trend: f64 = scenario
            .phases
            .iter()
            .map(|p| {
                let critical = p
                    .approaches
                    .iter()
                    .copied()
                    .max_by(|&x, &y| (forecast[x] / sat[x]).total_cmp(&(forecast[y] / sat[y])))
                    .expect("phase serves an approach");
                forecast[critical] - last[critical]
            })
            .sum();

        let plan = plan_for_interval(scenario, &forecast, trend, &self.control).map_err(|e| {
            Error::Run {
                context: format!("planning at t={}", ctx.now),
                source: Box::new(e),
            }
        })?;
        self.log.push(PlanUpdate {
            time: ctx.now,
            observed_last_hour: last,
            forecast,
            trend,
            plan: plan.clone(),
        });
        self.updates += 1;
        Ok(plan)
    }
}

impl SignalController for AstmController<'_> {
    fn plan(&mut self, ctx: &ControlContext<'_>) -> Result<SignalPlan> {
        if self.plan.is_none() || ctx.now >= self.next_update {
            let plan = self.replan(ctx)?;
            self.plan = Some(plan);
            while self.next_update <= ctx.now {
                self.next_update += self.control.cadence;
            }
        }
        Ok(self.plan.clone().expect("plan cached"))
    }
}
