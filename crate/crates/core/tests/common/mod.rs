#![allow(dead_code)]

use astm_core::scenario::{DemandInterval, DemandProfile};
use astm_core::{Approach, Phase, Scenario, SignalPlan};
use rand::Rng;

/// A small random intersection with one to four approaches spread over one to
/// three phases, piecewise demand and a random fixed plan.
pub fn random_case<R: Rng>(rng: &mut R) -> (Scenario, SignalPlan) {
    let n = rng.random_range(1..=4);
    let phases_n = rng.random_range(1..=n.min(3));
    let approaches = (0..n)
        .map(|id| Approach {
            id,
            saturation_flow: rng.random_range(1500.0..=1800.0),
            free_flow_crossing: rng.random_range(2.0..=10.0),
        })
        .collect();
    let mut served = vec![Vec::new(); phases_n];
    for a in 0..n {
        let p = if a < phases_n {
            a
        } else {
            rng.random_range(0..phases_n)
        };
        served[p].push(a);
    }
    let phases = served
        .into_iter()
        .enumerate()
        .map(|(id, approaches)| Phase {
            id,
            approaches,
            min_green: 5.0,
        })
        .collect();

    let horizon: u64 = rng.random_range(1..=15) * 60;
    let pieces = rng.random_range(1..=3u64).min(horizon);
    let mut cuts: Vec<u64> = (0..pieces - 1)
        .map(|_| rng.random_range(1..horizon))
        .collect();
    cuts.push(0);
    cuts.push(horizon);
    cuts.sort_unstable();
    cuts.dedup();
    let intervals = cuts
        .windows(2)
        .map(|w| DemandInterval {
            start: w[0],
            end: w[1],
            rates: (0..n).map(|_| rng.random_range(0.0..=2400.0)).collect(),
        })
        .collect();

    let lost_time_per_phase = rng.random_range(0..=5) as f64;
    let scenario = Scenario {
        approaches,
        phases,
        demand: DemandProfile::new(intervals),
        lost_time_per_phase,
        horizon,
        seed: rng.random(),
        detector: Default::default(),
        control: Default::default(),
    };
    let lost = scenario.lost_time();
    let cycle = (rng.random_range(40..=120) as f64).max(lost + 5.0 * phases_n as f64);
    let plan = SignalPlan::equal_split(&scenario, cycle);
    (scenario, plan)
}

/// One approach at 1800 veh/h served by a single phase with no lost time.
pub fn always_green(rate: f64, horizon: u64) -> Scenario {
    Scenario {
        approaches: vec![Approach {
            id: 0,
            saturation_flow: 1800.0,
            free_flow_crossing: 5.0,
        }],
        phases: vec![Phase {
            id: 0,
            approaches: vec![0],
            min_green: 5.0,
        }],
        demand: DemandProfile::constant(horizon, vec![rate]),
        lost_time_per_phase: 0.0,
        horizon,
        seed: 0,
        detector: Default::default(),
        control: Default::default(),
    }
}

/// Green windows `(phase, start, end)` implied by the cycles a run recorded.
pub fn green_windows(log: &astm_core::SimLog) -> Vec<(usize, f64, f64)> {
    let mut out = Vec::new();
    for c in &log.cycles {
        let n = c.plan.greens.len() as f64;
        let mut t = c.start;
        for (p, g) in c.plan.greens.iter().enumerate() {
            t += c.plan.lost_time / n;
            out.push((p, t, (t + g).min(log.horizon as f64)));
            t += g;
        }
    }
    out
}
