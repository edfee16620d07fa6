//! Fixed-step (1 s) simulation of one signalized intersection.
//!
//! Each tick: Poisson arrivals join their approach's FIFO queue at the start
//! of the tick, then every approach with green time in the tick accrues
//! service credit continuously at its saturation flow and discharges a queued
//! vehicle at the instant its credit reaches one. Credit restarts from zero
//! after any non-green gap (start-up loss) and is capped at one vehicle while
//! the queue is empty, so at most `floor(green elapsed * s / 3600)` vehicles
//! leave during a green. A cycle lays out, for each
//! phase in order, `lost_time / phases` seconds of all-red followed by the
//! phase's green.

use std::collections::VecDeque;
use std::io::Write;
use std::path::Path;

use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scenario::{Scenario, SignalPlan};
use crate::seed::stream_rng;

const CREDIT_EPS: f64 = 1e-9;

/// One vehicle's passage. `departure_time` is when it clears the
/// intersection: stop-line discharge plus the approach's free-flow crossing.
/// Vehicles still queued at the horizon have neither departure nor delay.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VehicleRecord {
    pub approach: usize,
    pub arrival_time: f64,
    pub departure_time: Option<f64>,
    pub delay: Option<f64>,
}

impl VehicleRecord {
    pub fn departed(&self) -> bool {
        self.departure_time.is_some()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CycleRecord {
    pub start: f64,
    pub plan: SignalPlan,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimLog {
    /// In arrival order (tick, then approach).
    pub vehicles: Vec<VehicleRecord>,
    /// Stop-line discharges per simulated minute.
    pub per_minute_throughput: Vec<u32>,
    pub final_queue_lengths: Vec<usize>,
    pub horizon: u64,
    pub cycles: Vec<CycleRecord>,
}

impl SimLog {
    pub fn approaches(&self) -> usize {
        self.final_queue_lengths.len()
    }

    pub fn arrivals(&self) -> usize {
        self.vehicles.len()
    }

    pub fn departures(&self) -> usize {
        self.vehicles.iter().filter(|v| v.departed()).count()
    }

    pub fn arrivals_per_approach(&self) -> Vec<usize> {
        let mut out = vec![0; self.approaches()];
        for v in &self.vehicles {
            out[v.approach] += 1;
        }
        out
    }

    pub fn departures_per_approach(&self) -> Vec<usize> {
        let mut out = vec![0; self.approaches()];
        for v in self.vehicles.iter().filter(|v| v.departed()) {
            out[v.approach] += 1;
        }
        out
    }

    /// Arrival log only: what two runs on the same seed must share.
    pub fn arrival_stream(&self) -> Vec<(usize, f64)> {
        self.vehicles
            .iter()
            .map(|v| (v.approach, v.arrival_time))
            .collect()
    }

    /// Writes `approach,arrival,departure,delay`, one row per vehicle;
    /// pending departures are empty fields.
    pub fn write_vehicles_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
        w.write_record(["approach", "arrival", "departure", "delay"])
            .map_err(|e| Error::csv(path, e))?;
        let opt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
        for v in &self.vehicles {
            w.write_record([
                v.approach.to_string(),
                v.arrival_time.to_string(),
                opt(v.departure_time),
                opt(v.delay),
            ])
            .map_err(|e| Error::csv(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    /// Writes `minute,departures`.
    pub fn write_throughput_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut out = String::from("minute,departures\n");
        for (m, d) in self.per_minute_throughput.iter().enumerate() {
            out.push_str(&format!("{m},{d}\n"));
        }
        std::fs::File::create(path)
            .and_then(|mut f| f.write_all(out.as_bytes()))
            .map_err(|e| Error::io(path, e))
    }
}

/// What a controller sees when asked for the next cycle's plan.
pub struct ControlContext<'a> {
    /// Start time of the cycle being planned, seconds.
    pub now: f64,
    pub scenario: &'a Scenario,
    /// True arrivals per approach per completed minute before `now`.
    pub minute_arrivals: &'a [Vec<u32>],
}

/// Supplies one [`SignalPlan`] per cycle.
pub trait SignalController {
    fn plan(&mut self, ctx: &ControlContext<'_>) -> Result<SignalPlan>;
}

impl<F> SignalController for F
where
    F: FnMut(&ControlContext<'_>) -> Result<SignalPlan>,
{
    fn plan(&mut self, ctx: &ControlContext<'_>) -> Result<SignalPlan> {
        self(ctx)
    }
}

/// Repeats the same plan every cycle.
#[derive(Clone, Debug)]
pub struct FixedTime {
    pub plan: SignalPlan,
}

impl FixedTime {
    pub fn new(plan: SignalPlan) -> Self {
        Self { plan }
    }

    /// Equal-split plan with the given cycle length.
    pub fn equal_split(scenario: &Scenario, cycle_length: f64) -> Self {
        Self::new(SignalPlan::equal_split(scenario, cycle_length))
    }
}

impl SignalController for FixedTime {
    fn plan(&mut self, _ctx: &ControlContext<'_>) -> Result<SignalPlan> {
        Ok(self.plan.clone())
    }
}

#[derive(Clone, Copy, Debug)]
struct GreenWindow {
    phase: usize,
    start: f64,
    end: f64,
}

struct ArrivalSource {
    rng: ChaCha8Rng,
    interval: usize,
    dist: Option<Option<Poisson<f64>>>,
}

impl ArrivalSource {
    fn new(seed: u64, approach: usize) -> Self {
        Self {
            rng: stream_rng(seed, approach as u64),
            interval: 0,
            dist: None,
        }
    }

    fn draw(&mut self, scenario: &Scenario, approach: usize, t: u64) -> u64 {
        let intervals = &scenario.demand.intervals;
        while intervals[self.interval].end <= t {
            self.interval += 1;
            self.dist = None;
        }
        let interval = self.interval;
        let dist = self.dist.get_or_insert_with(|| {
            let mean = intervals[interval].rates[approach] / 3600.0;
            (mean > 0.0).then(|| Poisson::new(mean).expect("finite positive mean"))
        });
        match dist {
            Some(d) => d.sample(&mut self.rng) as u64,
            None => 0,
        }
    }
}

/// Runs `scenario` for its full horizon under `controller`, drawing arrivals
/// from `seed`.
///
/// Arrivals for approach `a` come from ChaCha stream `a` of `seed`, so they do
/// not depend on the controller or on other approaches.
pub fn run_simulation(
    scenario: &Scenario,
    controller: &mut dyn SignalController,
    seed: u64,
) -> Result<SimLog> {
    scenario.validate()?;
    let n = scenario.approaches.len();
    let horizon = scenario.horizon;
    let minutes = horizon.div_ceil(60) as usize;
    let phase_count = scenario.phases.len();
    let service_rate: Vec<f64> = scenario
        .approaches
        .iter()
        .map(|a| a.saturation_flow / 3600.0)
        .collect();

    let mut sources: Vec<ArrivalSource> = (0..n).map(|a| ArrivalSource::new(seed, a)).collect();
    let mut vehicles: Vec<VehicleRecord> = Vec::new();
    let mut queues: Vec<VecDeque<usize>> = vec![VecDeque::new(); n];
    let mut credit = vec![0.0f64; n];
    let mut last_green_end = vec![f64::NEG_INFINITY; n];
    let mut minute_arrivals: Vec<Vec<u32>> = vec![vec![0; minutes]; n];
    let mut throughput = vec![0u32; minutes];
    let mut cycles: Vec<CycleRecord> = Vec::new();
    let mut windows: VecDeque<GreenWindow> = VecDeque::new();
    let mut cycle_end = 0.0f64;

    for t in 0..horizon {
        let tick_start = t as f64;
        let tick_end = tick_start + 1.0;
        let minute = (t / 60) as usize;

        for (a, source) in sources.iter_mut().enumerate() {
            let k = source.draw(scenario, a, t);
            for _ in 0..k {
                queues[a].push_back(vehicles.len());
                vehicles.push(VehicleRecord {
                    approach: a,
                    arrival_time: tick_start,
                    departure_time: None,
                    delay: None,
                });
            }
            minute_arrivals[a][minute] += k as u32;
        }

        while cycle_end < tick_end {
            let completed = (cycle_end / 60.0).floor() as usize;
            let history: Vec<Vec<u32>> = minute_arrivals
                .iter()
                .map(|m| m[..completed.min(minutes)].to_vec())
                .collect();
            let ctx = ControlContext {
                now: cycle_end,
                scenario,
                minute_arrivals: &history,
            };
            let plan = controller.plan(&ctx).map_err(|e| Error::Run {
                context: format!("controller failed at t = {cycle_end} s"),
                source: Box::new(e),
            })?;
            plan.validate(scenario).map_err(|e| Error::Run {
                context: format!("plan for cycle starting at t = {cycle_end} s rejected"),
                source: Box::new(e),
            })?;
            let all_red = plan.lost_time / phase_count as f64;
            let mut cursor = cycle_end;
            for (phase, green) in plan.greens.iter().enumerate() {
                cursor += all_red;
                windows.push_back(GreenWindow {
                    phase,
                    start: cursor,
                    end: cursor + green,
                });
                cursor += green;
            }
            cycles.push(CycleRecord {
                start: cycle_end,
                plan: plan.clone(),
            });
            cycle_end += plan.cycle_length;
        }

        while windows.front().is_some_and(|w| w.end <= tick_start) {
            windows.pop_front();
        }
        for w in windows.iter().take_while(|w| w.start < tick_end) {
            let seg_start = w.start.max(tick_start);
            let seg_end = w.end.min(tick_end);
            if seg_end <= seg_start {
                continue;
            }
            for &a in &scenario.phases[w.phase].approaches {
                if w.start > last_green_end[a] + CREDIT_EPS {
                    credit[a] = 0.0;
                }
                last_green_end[a] = w.end;
                let rate = service_rate[a];
                let crossing = scenario.approaches[a].free_flow_crossing;
                let mut now = seg_start;
                loop {
                    if queues[a].is_empty() {
                        credit[a] = (credit[a] + (seg_end - now) * rate).min(1.0);
                        break;
                    }
                    if credit[a] >= 1.0 - CREDIT_EPS {
                        let idx = queues[a].pop_front().expect("queue non-empty");
                        credit[a] = (credit[a] - 1.0).max(0.0);
                        let v = &mut vehicles[idx];
                        v.departure_time = Some(now + crossing);
                        v.delay = Some((now - v.arrival_time).max(0.0));
                        throughput[minute] += 1;
                        continue;
                    }
                    let wait = (1.0 - credit[a]) / rate;
                    if now + wait <= seg_end + CREDIT_EPS {
                        now = (now + wait).min(seg_end);
                        credit[a] = 1.0;
                    } else {
                        credit[a] += (seg_end - now) * rate;
                        break;
                    }
                }
            }
        }
    }

    Ok(SimLog {
        vehicles,
        per_minute_throughput: throughput,
        final_queue_lengths: queues.iter().map(VecDeque::len).collect(),
        horizon,
        cycles,
    })
}

/// Arrival counts per approach in consecutive bins of `interval` seconds.
pub fn true_counts(log: &SimLog, interval: u64) -> Result<Vec<Vec<u64>>> {
    if interval == 0 || !log.horizon.is_multiple_of(interval) {
        return Err(Error::Argument(format!(
            "interval {interval} s does not divide horizon {} s",
            log.horizon
        )));
    }
    let bins = (log.horizon / interval) as usize;
    let mut counts = vec![vec![0u64; bins]; log.approaches()];
    for v in &log.vehicles {
        let bin = ((v.arrival_time / interval as f64).floor() as usize).min(bins - 1);
        counts[v.approach][bin] += 1;
    }
    Ok(counts)
}
