//! Synthetic scenario suites with morning and evening peaks, and the matching
//! hourly count histories used to train the forecaster.

use chrono::{Duration, NaiveDate, NaiveDateTime};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};

use crate::forecast::{hourly_timestamps, HourlySeries};
use crate::metrics::SECONDS_PER_DAY;
use crate::scenario::{four_way, DemandInterval, DemandProfile, Scenario};
use crate::seed::{derive_seed, seeded_rng, TAG_HISTORY, TAG_SUITE};

/// Calendar time of simulated second zero.
pub fn epoch() -> NaiveDateTime {
    NaiveDate::from_ymd_opt(2017, 3, 6)
        .expect("valid date")
        .and_hms_opt(0, 0, 0)
        .expect("valid time")
}

fn hourly_shape(rng: &mut ChaCha8Rng) -> [f64; 24] {
    let mut shape = [1.0; 24];
    for (h, m) in shape.iter_mut().enumerate() {
        *m = match h {
            0..=5 => 0.3,
            6 => 0.7,
            20..=23 => 0.6,
            _ => 1.0,
        };
    }
    let am_start = rng.random_range(7..=8);
    let pm_start = rng.random_range(16..=17);
    let am = rng.random_range(1.6..=2.1);
    let pm = rng.random_range(1.6..=2.1);
    shape[am_start..am_start + 2].fill(am);
    shape[pm_start..pm_start + 2].fill(pm);
    shape
}

/// One day of peaked demand on the default four-approach, two-phase layout.
///
/// Every approach runs at 0.3x its base rate overnight and at least 1x during
/// the day, so the profile's largest rate is always at least twice its
/// smallest.
pub fn generate_scenario(seed: u64) -> Scenario {
    let mut rng = seeded_rng(seed);
    let shape = hourly_shape(&mut rng);
    let ns_base = rng.random_range(150.0..=260.0);
    let ew_base = rng.random_range(100.0..=220.0);
    // Inbound approaches (0, 2) carry the morning peak, outbound (1, 3) the evening one.
    let bases: Vec<f64> = [ns_base, ns_base, ew_base, ew_base]
        .iter()
        .map(|b| b * rng.random_range(0.85..=1.15))
        .collect();
    let am_weight = [1.0, 0.6, 1.0, 0.6];
    let pm_weight = [0.6, 1.0, 0.6, 1.0];

    let intervals = (0..24)
        .map(|h| {
            let rates = (0..4)
                .map(|a| {
                    let m = shape[h];
                    let m = if m > 1.0 {
                        let w = if h < 12 { am_weight[a] } else { pm_weight[a] };
                        1.0 + (m - 1.0) * w
                    } else {
                        m
                    };
                    (bases[a] * m).round()
                })
                .collect();
            DemandInterval {
                start: h as u64 * 3600,
                end: (h as u64 + 1) * 3600,
                rates,
            }
        })
        .collect();

    let mut scenario = four_way(DemandProfile::new(intervals), SECONDS_PER_DAY, seed);
    for a in scenario.approaches.iter_mut() {
        a.saturation_flow = 50.0 * rng.random_range(32..=36) as f64;
        a.free_flow_crossing = rng.random_range(4..=8) as f64;
    }
    scenario
}

/// `n` scenarios, deterministic in `seed`.
pub fn generate_suite(n: usize, seed: u64) -> Vec<Scenario> {
    (0..n)
        .map(|i| generate_scenario(derive_seed(seed, TAG_SUITE, i as u64)))
        .collect()
}

/// Poisson draws of per-minute arrivals for each approach, starting `offset`
/// seconds into the scenario's demand profile and wrapping around its end.
pub fn sample_minute_counts(
    scenario: &Scenario,
    offset: u64,
    minutes: usize,
    seed: u64,
) -> Vec<Vec<u32>> {
    let end = scenario.demand.end() as f64;
    (0..scenario.approaches.len())
        .map(|a| {
            let mut rng = seeded_rng(derive_seed(seed, TAG_HISTORY, a as u64));
            (0..minutes)
                .map(|m| {
                    let from = (offset as f64 + m as f64 * 60.0) % end;
                    let mean = scenario
                        .demand
                        .expected_arrivals(a, from, (from + 60.0).min(end));
                    if mean > 0.0 {
                        Poisson::new(mean).expect("positive mean").sample(&mut rng) as u32
                    } else {
                        0
                    }
                })
                .collect()
        })
        .collect()
}

/// Hourly count histories for forecaster training: `profiles` generated
/// scenarios, each repeated for `days` days with fresh Poisson noise, one
/// series per approach.
pub fn training_series(profiles: usize, days: usize, seed: u64) -> Vec<HourlySeries> {
    let mut out = Vec::new();
    for (i, scenario) in generate_suite(profiles, seed).into_iter().enumerate() {
        let start = epoch() - Duration::days(((i + 1) * days) as i64);
        let minutes = sample_minute_counts(
            &scenario,
            0,
            days * 1440,
            derive_seed(seed, TAG_HISTORY, i as u64),
        );
        for per_minute in minutes {
            let counts = per_minute
                .chunks(60)
                .map(|hour| hour.iter().map(|&c| c as f64).sum())
                .collect();
            out.push(HourlySeries {
                timestamps: hourly_timestamps(start, days * 24),
                counts,
            });
        }
    }
    out
}
