//! Traffic performance measures computed from a [`SimLog`].
//!
//! Delay averages cover departed vehicles only; vehicles still queued at the
//! horizon count as arrivals but contribute no delay. Travel time is free-flow
//! crossing plus delay, so it also stands in for speed and for corridor travel
//! time at a single intersection.

use std::fmt;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::float::Real;
use crate::sim::SimLog;

pub const SECONDS_PER_DAY: u64 = 86_400;

/// Level of service, `A` best. Ordering follows quality: `A < F`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Los {
    A,
    B,
    C,
    D,
    E,
    F,
}

impl fmt::Display for Los {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

/// Upper control-delay bounds (s/veh, inclusive) for grades A through E.
pub const LOS_THRESHOLDS: [f64; 5] = [10.0, 20.0, 35.0, 55.0, 80.0];

pub fn los_grade<T: Real>(mean_delay: T) -> Los {
    const GRADES: [Los; 5] = [Los::A, Los::B, Los::C, Los::D, Los::E];
    LOS_THRESHOLDS
        .iter()
        .zip(GRADES)
        .find(|(limit, _)| mean_delay <= T::lit(**limit))
        .map_or(Los::F, |(_, g)| g)
}

/// Travel time index: `(free_flow + delay) / free_flow`.
pub fn travel_time_index<T: Real>(free_flow_crossing: T, mean_delay: T) -> T {
    (free_flow_crossing + mean_delay) / free_flow_crossing
}

pub fn mean<T: Real>(xs: &[T]) -> Option<T> {
    (!xs.is_empty()).then(|| xs.iter().copied().sum::<T>() / T::from_usize_lossy(xs.len()))
}

/// Departures per minute, held exactly as a ratio.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FlowRate(Ratio<u64>);

impl FlowRate {
    pub fn per_minute(&self) -> f64 {
        *self.0.numer() as f64 / *self.0.denom() as f64
    }

    pub fn as_ratio(&self) -> Ratio<u64> {
        self.0
    }

    /// Vehicles over `horizon` seconds at this rate.
    pub fn vehicles_over(&self, horizon: u64) -> Ratio<u64> {
        self.0 * Ratio::new(horizon, 60)
    }
}

pub fn flow_rate(log: &SimLog) -> Result<FlowRate> {
    if log.horizon < 60 {
        return Err(Error::Argument(format!(
            "flow rate needs a horizon of at least 60 s, got {}",
            log.horizon
        )));
    }
    Ok(FlowRate(Ratio::new(
        log.departures() as u64 * 60,
        log.horizon,
    )))
}

pub fn mean_delay(log: &SimLog) -> Result<f64> {
    let delays: Vec<f64> = log.vehicles.iter().filter_map(|v| v.delay).collect();
    mean(&delays).ok_or_else(|| Error::UndefinedMetric("no departures".into()))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DailyTraffic {
    /// Arrivals per simulated day.
    pub adt: Vec<u64>,
    pub aadt: f64,
}

/// Daily and average daily traffic from one log per simulated day.
pub fn adt_aadt(logs: &[SimLog]) -> Result<DailyTraffic> {
    if logs.is_empty() {
        return Err(Error::Argument("no daily logs".into()));
    }
    if let Some(bad) = logs.iter().find(|l| l.horizon != SECONDS_PER_DAY) {
        return Err(Error::Argument(format!(
            "daily log spans {} s, expected {SECONDS_PER_DAY}",
            bad.horizon
        )));
    }
    let adt: Vec<u64> = logs.iter().map(|l| l.arrivals() as u64).collect();
    let aadt = adt.iter().sum::<u64>() as f64 / adt.len() as f64;
    Ok(DailyTraffic { adt, aadt })
}

/// Travel time index over vehicles arriving in `peak = [start, end)`.
pub fn tti(log: &SimLog, peak: (u64, u64), free_flow_crossing: f64) -> Result<f64> {
    if !(free_flow_crossing > 0.0) {
        return Err(Error::Argument(
            "free-flow crossing must be positive".into(),
        ));
    }
    if peak.0 >= peak.1 || peak.1 > log.horizon {
        return Err(Error::Argument(format!(
            "peak [{}, {}) not within horizon {}",
            peak.0, peak.1, log.horizon
        )));
    }
    let (lo, hi) = (peak.0 as f64, peak.1 as f64);
    let delays: Vec<f64> = log
        .vehicles
        .iter()
        .filter(|v| v.arrival_time >= lo && v.arrival_time < hi)
        .filter_map(|v| v.delay)
        .collect();
    let d = mean(&delays)
        .ok_or_else(|| Error::UndefinedMetric("no departures in peak period".into()))?;
    Ok(travel_time_index(free_flow_crossing, d))
}

/// Window of length `window` (start on a 60 s grid) holding the most
/// arrivals; the earliest such window wins ties.
pub fn peak_period(log: &SimLog, window: u64) -> Result<(u64, u64)> {
    if window == 0 || window > log.horizon {
        return Err(Error::Argument(format!(
            "peak window {window} s must be in (0, horizon = {}]",
            log.horizon
        )));
    }
    let mut times: Vec<f64> = log.vehicles.iter().map(|v| v.arrival_time).collect();
    times.sort_by(f64::total_cmp);
    let count = |start: u64| {
        let lo = times.partition_point(|t| *t < start as f64);
        let hi = times.partition_point(|t| *t < (start + window) as f64);
        hi - lo
    };
    let mut best = (0u64, count(0));
    let mut start = 60;
    while start + window <= log.horizon {
        let c = count(start);
        if c > best.1 {
            best = (start, c);
        }
        start += 60;
    }
    Ok((best.0, best.0 + window))
}

/// Per-run summary.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub arrivals: u64,
    pub departures: u64,
    /// Vehicles per minute.
    pub flow_rate: f64,
    /// Seconds per departed vehicle; `None` without departures.
    pub mean_delay: Option<f64>,
    /// Arrivals scaled to a 24 h day.
    pub adt: f64,
    /// Mean of `adt` over the days covered by this report.
    pub aadt: f64,
    pub tti: Option<f64>,
    pub los: Option<Los>,
    pub peak_period: (u64, u64),
}

/// Default length of the peak-period window, seconds.
pub const PEAK_WINDOW: u64 = 3600;

impl MetricsReport {
    /// Summarises one run; the peak window is [`PEAK_WINDOW`] or the horizon,
    /// whichever is shorter.
    pub fn from_log(log: &SimLog, free_flow_crossing: f64) -> Result<Self> {
        let flow = flow_rate(log)?;
        let delay = mean_delay(log).ok();
        let peak = peak_period(log, PEAK_WINDOW.min(log.horizon))?;
        let tti = tti(log, peak, free_flow_crossing).ok();
        let adt = log.arrivals() as f64 * SECONDS_PER_DAY as f64 / log.horizon as f64;
        Ok(Self {
            arrivals: log.arrivals() as u64,
            departures: log.departures() as u64,
            flow_rate: flow.per_minute(),
            mean_delay: delay,
            adt,
            aadt: adt,
            tti,
            los: delay.map(los_grade),
            peak_period: peak,
        })
    }

    pub const CSV_HEADER: &'static str =
        "arrivals,departures,flow_rate,mean_delay,adt,aadt,tti,los,peak_start,peak_end";

    /// Flat CSV row matching [`Self::CSV_HEADER`]; undefined values are empty.
    pub fn csv_row(&self) -> String {
        let opt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
        format!(
            "{},{},{},{},{},{},{},{},{},{}",
            self.arrivals,
            self.departures,
            self.flow_rate,
            opt(self.mean_delay),
            self.adt,
            self.aadt,
            opt(self.tti),
            self.los.map(|l| l.to_string()).unwrap_or_default(),
            self.peak_period.0,
            self.peak_period.1
        )
    }

    pub fn summary(&self) -> String {
        let delay = self.mean_delay.map_or_else(
            || "undefined (no departures)".to_string(),
            |d| format!("{d:.2} s/veh"),
        );
        let tti = self
            .tti
            .map_or_else(|| "undefined".to_string(), |t| format!("{t:.3}"));
        let los = self.los.map_or_else(|| "-".to_string(), |l| l.to_string());
        format!(
            "arrivals       {}\n\
             departures     {}\n\
             flow rate      {:.3} veh/min\n\
             mean delay     {delay}\n\
             LOS            {los}\n\
             ADT            {:.0} veh/day\n\
             AADT           {:.0} veh/day\n\
             TTI            {tti}\n\
             peak period    {}-{} s\n",
            self.arrivals,
            self.departures,
            self.flow_rate,
            self.adt,
            self.aadt,
            self.peak_period.0,
            self.peak_period.1
        )
    }
}
