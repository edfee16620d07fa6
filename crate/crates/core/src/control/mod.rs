//! Signal timing: critical flow ratios, Webster cycle length, green splits and
//! the fuzzy cycle adjustment, composed into a [`SignalPlan`].

mod fuzzy;

pub use fuzzy::{fuzzy_adjust, Adjust, FuzzyConfig, Singletons, Triangle};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::float::Real;
use crate::scenario::{Phase, Scenario, SignalPlan};

/// Cycle bounds, oversaturation guard, update cadence and fuzzy layer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ControlConfig<T = f64> {
    /// Shortest cycle, seconds.
    pub c_min: T,
    /// Longest cycle, seconds.
    pub c_max: T,
    /// Critical-ratio sum at or above which Webster's formula is not applied.
    pub y_cap: T,
    /// Seconds between plan recomputations.
    pub cadence: T,
    pub fuzzy: FuzzyConfig<T>,
}

impl<T: Real> Default for ControlConfig<T> {
    fn default() -> Self {
        Self {
            c_min: T::lit(40.0),
            c_max: T::lit(120.0),
            y_cap: T::lit(0.95),
            cadence: T::lit(900.0),
            fuzzy: FuzzyConfig::default(),
        }
    }
}

impl<T: Real> ControlConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.c_min > T::zero() && self.c_min <= self.c_max) {
            return Err(Error::Invariant(format!(
                "cycle bounds must satisfy 0 < c_min <= c_max, got [{}, {}]",
                self.c_min, self.c_max
            )));
        }
        if !(self.y_cap > T::zero() && self.y_cap < T::one()) {
            return Err(Error::Invariant(format!(
                "y_cap must lie in (0, 1), got {}",
                self.y_cap
            )));
        }
        if !(self.cadence > T::zero()) {
            return Err(Error::Invariant("control cadence must be positive".into()));
        }
        self.fuzzy.validate()
    }
}

/// Per-phase critical flow ratios.
#[derive(Clone, Debug, PartialEq)]
pub struct CriticalVolumes<T> {
    pub ratios: Vec<T>,
    pub sum: T,
    /// The ratios add up to one or more: demand exceeds capacity.
    pub oversaturated: bool,
}

/// Critical flow ratio per phase: the largest volume/saturation-flow ratio
/// among the approaches the phase serves.
pub fn critical_volumes<T: Real>(
    phases: &[Phase],
    volumes: &[T],
    saturation_flows: &[T],
) -> Result<CriticalVolumes<T>> {
    let ratios = phases
        .iter()
        .map(|phase| {
            phase.approaches.iter().try_fold(T::zero(), |acc, &a| {
                let v = *volumes.get(a).ok_or_else(|| {
                    Error::Argument(format!("no volume for approach {a} of phase {}", phase.id))
                })?;
                let s = *saturation_flows.get(a).ok_or_else(|| {
                    Error::Argument(format!("no saturation flow for approach {a}"))
                })?;
                if !(v >= T::zero()) || !(s > T::zero()) {
                    return Err(Error::Argument(format!(
                        "approach {a}: volume {v} and saturation flow {s} must be non-negative and positive"
                    )));
                }
                Ok(acc.max(v / s))
            })
        })
        .collect::<Result<Vec<T>>>()?;
    let sum: T = ratios.iter().copied().sum();
    Ok(CriticalVolumes {
        oversaturated: sum >= T::one(),
        ratios,
        sum,
    })
}

/// Webster's delay-minimising cycle, `(1.5 L + 5) / (1 - ΣY)`, unrounded.
pub fn webster_raw<T: Real>(lost_time: T, sum_y: T) -> T {
    (T::lit(1.5) * lost_time + T::lit(5.0)) / (T::one() - sum_y)
}

/// Rounds to the nearest multiple of 5, halves upward.
///
/// A tolerance of `sqrt(eps)` absorbs representation error, so
/// `23 / (1 - 0.6)` (57.49999999999999 in binary) rounds to 60.
pub fn round_to_nearest_5<T: Real>(x: T) -> T {
    let five = T::lit(5.0);
    ((x / five) + T::lit(0.5) + T::epsilon().sqrt()).floor() * five
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CycleLength<T> {
    pub seconds: T,
    /// Set when ΣY reached the oversaturation guard and the cycle was forced
    /// to its maximum.
    pub oversaturated: bool,
}

/// Cycle length for lost time `L` and critical ratio sum `ΣY`, rounded to 5 s
/// and clamped to `[c_min, c_max]`.
pub fn webster_cycle<T: Real>(
    lost_time: T,
    sum_y: T,
    config: &ControlConfig<T>,
) -> Result<CycleLength<T>> {
    if !(lost_time >= T::zero()) {
        return Err(Error::Argument(format!(
            "lost time must be non-negative, got {lost_time}"
        )));
    }
    if !(sum_y >= T::zero()) {
        return Err(Error::Argument(format!(
            "critical ratio sum must be non-negative, got {sum_y}"
        )));
    }
    if sum_y >= config.y_cap {
        return Ok(CycleLength {
            seconds: config.c_max,
            oversaturated: true,
        });
    }
    let raw = webster_raw(lost_time, sum_y);
    Ok(CycleLength {
        seconds: clamp(round_to_nearest_5(raw), config.c_min, config.c_max),
        oversaturated: false,
    })
}

fn clamp<T: Real>(x: T, lo: T, hi: T) -> T {
    x.max(lo).min(hi)
}

const UNITS_PER_SECOND: f64 = 10.0;

/// Divides `cycle - L` among phases in proportion to their critical ratios
/// (equally when all ratios are zero), raising any phase below its minimum
/// green to that minimum and scaling the rest down.
///
/// Greens are whole tenths of a second and sum to `cycle - L` exactly; the
/// tenths are assigned by largest remainder, lower phase index first on ties.
pub fn green_splits<T: Real>(
    cycle: T,
    lost_time: T,
    ratios: &[T],
    min_greens: &[T],
) -> Result<Vec<T>> {
    let tenths = green_split_tenths(cycle, lost_time, ratios, min_greens)?;
    let scale = T::lit(UNITS_PER_SECOND);
    Ok(tenths
        .into_iter()
        .map(|u| T::from_i64(u).expect("unit count representable") / scale)
        .collect())
}

/// [`green_splits`] in integer tenths of a second.
pub fn green_split_tenths<T: Real>(
    cycle: T,
    lost_time: T,
    ratios: &[T],
    min_greens: &[T],
) -> Result<Vec<i64>> {
    let n = ratios.len();
    if n == 0 || min_greens.len() != n {
        return Err(Error::Argument(format!(
            "{} ratios for {} minimum greens",
            n,
            min_greens.len()
        )));
    }
    if !(cycle > lost_time) || !(lost_time >= T::zero()) {
        return Err(Error::Argument(format!(
            "cycle {cycle} must exceed lost time {lost_time} >= 0"
        )));
    }
    if ratios.iter().any(|y| !(*y >= T::zero()) || !y.is_finite()) {
        return Err(Error::Argument(
            "critical ratios must be finite and non-negative".into(),
        ));
    }
    let scale = UNITS_PER_SECOND;
    let available = (cycle - lost_time).to_f64_lossy() * scale;
    let total = available.round();
    if (available - total).abs() > 1e-6 * total.max(1.0) {
        return Err(Error::Argument(format!(
            "cycle - lost time = {} s is not a whole number of tenths",
            available / scale
        )));
    }
    let total = total as i64;
    let mins: Vec<i64> = min_greens
        .iter()
        .map(|m| (m.to_f64_lossy().max(0.0) * scale - 1e-9).ceil() as i64)
        .collect();
    let min_sum: i64 = mins.iter().sum();
    if min_sum > total {
        return Err(Error::Infeasible(format!(
            "minimum greens need {:.1} s but only {:.1} s are available",
            min_sum as f64 / scale,
            total as f64 / scale
        )));
    }

    let sum_y: f64 = ratios.iter().map(|y| y.to_f64_lossy()).sum();
    let weights: Vec<f64> = if sum_y > 0.0 {
        ratios.iter().map(|y| y.to_f64_lossy() / sum_y).collect()
    } else {
        vec![1.0 / n as f64; n]
    };

    // Pin phases whose proportional share falls below their minimum until the
    // remaining shares all clear theirs.
    let mut pinned = vec![false; n];
    let quotas = loop {
        let remaining = total - (0..n).filter(|&i| pinned[i]).map(|i| mins[i]).sum::<i64>();
        let free_weight: f64 = (0..n).filter(|&i| !pinned[i]).map(|i| weights[i]).sum();
        let free_count = pinned.iter().filter(|p| !**p).count();
        let quotas: Vec<f64> = (0..n)
            .map(|i| {
                if pinned[i] {
                    mins[i] as f64
                } else if free_weight > 0.0 {
                    remaining as f64 * weights[i] / free_weight
                } else {
                    remaining as f64 / free_count as f64
                }
            })
            .collect();
        let newly: Vec<usize> = (0..n)
            .filter(|&i| !pinned[i] && quotas[i] < mins[i] as f64)
            .collect();
        if newly.is_empty() {
            break quotas;
        }
        for i in newly {
            pinned[i] = true;
        }
    };

    let mut units: Vec<i64> = Vec::with_capacity(n);
    // Remainders in units of 1e-9, ties to the lower index.
    let mut remainders: Vec<(i64, usize)> = Vec::with_capacity(n);
    for (i, q) in quotas.iter().enumerate() {
        // Quotas within 1e-9 of an integer snap to it.
        let nearest = q.round();
        let q = if (q - nearest).abs() < 1e-9 {
            nearest
        } else {
            *q
        };
        let whole = q.floor();
        units.push(whole as i64);
        remainders.push((((q - whole) * 1e9).round() as i64, i));
    }
    let mut leftover = total - units.iter().sum::<i64>();
    remainders.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    for &(_, i) in remainders.iter().cycle().take(leftover.max(0) as usize) {
        units[i] += 1;
        leftover -= 1;
    }
    debug_assert_eq!(leftover, 0);
    Ok(units)
}

/// Plan for the next control interval from per-approach volume forecasts
/// (vehicles/hour) and the demand trend (vehicles/hour per hour).
pub fn plan_for_interval(
    scenario: &Scenario,
    forecast: &[f64],
    trend: f64,
    config: &ControlConfig,
) -> Result<SignalPlan> {
    if forecast.iter().any(|v| !(*v >= 0.0)) {
        return Err(Error::Argument(
            "forecast volumes must be non-negative".into(),
        ));
    }
    let lost_time = scenario.lost_time();
    let critical = critical_volumes(&scenario.phases, forecast, &scenario.saturation_flows())?;
    let webster = webster_cycle(lost_time, critical.sum, config)?;
    let multiplier = fuzzy_adjust(&config.fuzzy, critical.sum, trend);
    let cycle = clamp(
        round_to_nearest_5(multiplier * webster.seconds),
        config.c_min,
        config.c_max,
    );
    let greens = green_splits(cycle, lost_time, &critical.ratios, &scenario.min_greens())?;
    Ok(SignalPlan {
        cycle_length: cycle,
        greens,
        lost_time,
        oversaturated: webster.oversaturated,
    })
}
