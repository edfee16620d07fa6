//! Intersection description: approaches, phases, demand and the signal plan
//! type exchanged between the controller and the simulator.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::control::ControlConfig;
use crate::detector::DetectorModel;
use crate::error::{Error, Result};

/// Saturation flows outside this band are accepted but reported by
/// [`Scenario::warnings`].
pub const TYPICAL_SATURATION_FLOW: (f64, f64) = (1500.0, 1800.0);

/// Shortest admissible phase minimum green, seconds.
pub const MIN_GREEN_FLOOR: f64 = 5.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Approach {
    pub id: usize,
    /// Discharge capacity under continuous green, vehicles/hour.
    pub saturation_flow: f64,
    /// Unimpeded traversal time, seconds.
    pub free_flow_crossing: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Phase {
    pub id: usize,
    pub approaches: Vec<usize>,
    pub min_green: f64,
}

/// One piece of the demand profile: constant per-approach rates on `[start, end)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DemandInterval {
    pub start: u64,
    pub end: u64,
    /// Arrival rate per approach, vehicles/hour, indexed by approach id.
    pub rates: Vec<f64>,
}

/// Piecewise-constant arrival rates over right-open intervals.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DemandProfile {
    pub intervals: Vec<DemandInterval>,
}

impl DemandProfile {
    pub fn new(intervals: Vec<DemandInterval>) -> Self {
        Self { intervals }
    }

    /// Profile with the same rates everywhere on `[0, horizon)`.
    pub fn constant(horizon: u64, rates: Vec<f64>) -> Self {
        Self::new(vec![DemandInterval {
            start: 0,
            end: horizon,
            rates,
        }])
    }

    pub fn end(&self) -> u64 {
        self.intervals.last().map_or(0, |iv| iv.end)
    }

    /// Index of the interval containing `t`, if any.
    pub fn interval_index(&self, t: f64) -> Option<usize> {
        if !(t >= 0.0) {
            return None;
        }
        let idx = self.intervals.partition_point(|iv| (iv.end as f64) <= t);
        (idx < self.intervals.len() && (self.intervals[idx].start as f64) <= t).then_some(idx)
    }

    /// Arrival rate of `approach` at time `t`, vehicles/hour.
    pub fn rate_at(&self, approach: usize, t: f64) -> Result<f64> {
        let idx = self
            .interval_index(t)
            .ok_or_else(|| Error::Range(format!("t = {t} s is outside the demand profile")))?;
        self.intervals[idx]
            .rates
            .get(approach)
            .copied()
            .ok_or_else(|| Error::Argument(format!("unknown approach {approach}")))
    }

    /// Largest rate over all intervals and approaches.
    pub fn max_rate(&self) -> f64 {
        self.intervals
            .iter()
            .flat_map(|iv| iv.rates.iter().copied())
            .fold(0.0, f64::max)
    }

    /// Expected arrivals of `approach` on `[from, to)`, vehicles.
    pub fn expected_arrivals(&self, approach: usize, from: f64, to: f64) -> f64 {
        self.intervals
            .iter()
            .map(|iv| {
                let lo = from.max(iv.start as f64);
                let hi = to.min(iv.end as f64);
                if hi > lo {
                    iv.rates.get(approach).copied().unwrap_or(0.0) * (hi - lo) / 3600.0
                } else {
                    0.0
                }
            })
            .sum()
    }

    fn validate(&self, approaches: usize, horizon: u64) -> Result<()> {
        let first = self.intervals.first().ok_or_else(|| {
            Error::Invariant("horizon not covered: demand profile is empty".into())
        })?;
        if first.start != 0 {
            return Err(Error::Invariant(format!(
                "horizon not covered: demand starts at {} s instead of 0",
                first.start
            )));
        }
        for (k, iv) in self.intervals.iter().enumerate() {
            if iv.end <= iv.start {
                return Err(Error::Invariant(format!(
                    "interval boundaries not strictly increasing: [{}, {})",
                    iv.start, iv.end
                )));
            }
            if let Some(next) = self.intervals.get(k + 1) {
                if next.start < iv.end {
                    return Err(Error::Invariant(format!(
                        "interval boundaries not strictly increasing: {} follows {}",
                        next.start, iv.end
                    )));
                }
                if next.start > iv.end {
                    return Err(Error::Invariant(format!(
                        "horizon not covered: gap [{}, {})",
                        iv.end, next.start
                    )));
                }
            }
            if iv.rates.len() != approaches {
                return Err(Error::Invariant(format!(
                    "interval [{}, {}) has {} rates for {} approaches",
                    iv.start,
                    iv.end,
                    iv.rates.len(),
                    approaches
                )));
            }
            if let Some(r) = iv.rates.iter().find(|r| !(**r >= 0.0) || !r.is_finite()) {
                return Err(Error::Invariant(format!(
                    "negative arrival rate {r} on [{}, {})",
                    iv.start, iv.end
                )));
            }
        }
        if self.end() < horizon {
            return Err(Error::Invariant(format!(
                "horizon not covered: demand ends at {} s, horizon is {} s",
                self.end(),
                horizon
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub approaches: Vec<Approach>,
    pub phases: Vec<Phase>,
    pub demand: DemandProfile,
    pub lost_time_per_phase: f64,
    /// Simulated duration, seconds.
    pub horizon: u64,
    pub seed: u64,
    #[serde(default)]
    pub detector: DetectorModel,
    #[serde(default)]
    pub control: ControlConfig,
}

impl Scenario {
    /// Parses and validates a scenario document.
    pub fn from_json(text: &str) -> Result<Self> {
        let scenario: Scenario = serde_json::from_str(text).map_err(Error::from_json)?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    /// Total lost time per cycle, seconds.
    pub fn lost_time(&self) -> f64 {
        self.lost_time_per_phase * self.phases.len() as f64
    }

    pub fn demand_rate_at(&self, approach: usize, t: f64) -> Result<f64> {
        if !(t >= 0.0 && t < self.horizon as f64) {
            return Err(Error::Range(format!(
                "t = {t} s outside horizon [0, {})",
                self.horizon
            )));
        }
        if approach >= self.approaches.len() {
            return Err(Error::Argument(format!("unknown approach {approach}")));
        }
        self.demand.rate_at(approach, t)
    }

    /// Phase index serving each approach.
    pub fn phase_of(&self) -> Vec<usize> {
        let mut owner = vec![0; self.approaches.len()];
        for (p, phase) in self.phases.iter().enumerate() {
            for &a in &phase.approaches {
                owner[a] = p;
            }
        }
        owner
    }

    pub fn min_greens(&self) -> Vec<f64> {
        self.phases.iter().map(|p| p.min_green).collect()
    }

    pub fn saturation_flows(&self) -> Vec<f64> {
        self.approaches.iter().map(|a| a.saturation_flow).collect()
    }

    pub fn mean_free_flow_crossing(&self) -> f64 {
        let n = self.approaches.len().max(1) as f64;
        self.approaches
            .iter()
            .map(|a| a.free_flow_crossing)
            .sum::<f64>()
            / n
    }

    /// Non-fatal oddities, such as saturation flows outside the typical band.
    pub fn warnings(&self) -> Vec<String> {
        let (lo, hi) = TYPICAL_SATURATION_FLOW;
        self.approaches
            .iter()
            .filter(|a| a.saturation_flow < lo || a.saturation_flow > hi)
            .map(|a| {
                format!(
                    "approach {} saturation flow {} veh/h outside typical [{lo}, {hi}]",
                    a.id, a.saturation_flow
                )
            })
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::Invariant("horizon must be positive".into()));
        }
        if !(self.lost_time_per_phase >= 0.0) || !self.lost_time_per_phase.is_finite() {
            return Err(Error::Invariant(format!(
                "lost_time_per_phase must be non-negative, got {}",
                self.lost_time_per_phase
            )));
        }
        if self.approaches.is_empty() {
            return Err(Error::Invariant("scenario has no approaches".into()));
        }
        for (k, a) in self.approaches.iter().enumerate() {
            if a.id != k {
                return Err(Error::Invariant(format!(
                    "approach ids must be 0..n in order; position {k} has id {}",
                    a.id
                )));
            }
            if !(a.saturation_flow > 0.0) || !a.saturation_flow.is_finite() {
                return Err(Error::Invariant(format!(
                    "approach {k} saturation flow must be positive"
                )));
            }
            if !(a.free_flow_crossing > 0.0) || !a.free_flow_crossing.is_finite() {
                return Err(Error::Invariant(format!(
                    "approach {k} free_flow_crossing must be positive"
                )));
            }
        }
        if self.phases.is_empty() {
            return Err(Error::Invariant("scenario has no phases".into()));
        }
        let mut owner: Vec<Option<usize>> = vec![None; self.approaches.len()];
        for (p, phase) in self.phases.iter().enumerate() {
            if phase.id != p {
                return Err(Error::Invariant(format!(
                    "phase ids must be 0..n in order; position {p} has id {}",
                    phase.id
                )));
            }
            if phase.approaches.is_empty() {
                return Err(Error::Invariant(format!("phase {p} serves no approaches")));
            }
            if !(phase.min_green >= MIN_GREEN_FLOOR) {
                return Err(Error::Invariant(format!(
                    "phase {p} min_green {} below {MIN_GREEN_FLOOR} s",
                    phase.min_green
                )));
            }
            for &a in &phase.approaches {
                let slot = owner.get_mut(a).ok_or_else(|| {
                    Error::Invariant(format!("phase {p} references unknown approach {a}"))
                })?;
                if let Some(other) = slot.replace(p) {
                    return Err(Error::Invariant(format!(
                        "approach {a} belongs to phases {other} and {p}"
                    )));
                }
            }
        }
        if let Some(a) = owner.iter().position(Option::is_none) {
            return Err(Error::Invariant(format!(
                "approach {a} belongs to no phase"
            )));
        }
        self.demand.validate(self.approaches.len(), self.horizon)?;
        self.detector.validate()?;
        self.control.validate()?;
        Ok(())
    }
}

/// Reads and validates a scenario file.
pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Scenario::from_json(&text)
}

/// Cycle timing handed from a controller to the simulator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SignalPlan {
    /// Seconds.
    pub cycle_length: f64,
    /// Green seconds per phase, in phase order.
    pub greens: Vec<f64>,
    /// Total lost time per cycle, seconds.
    pub lost_time: f64,
    /// Set when the demand ratio hit the oversaturation guard.
    #[serde(default)]
    pub oversaturated: bool,
}

impl SignalPlan {
    /// Fixed-time plan splitting `cycle - L` equally between phases.
    pub fn equal_split(scenario: &Scenario, cycle_length: f64) -> Self {
        let lost_time = scenario.lost_time();
        let n = scenario.phases.len() as f64;
        Self {
            cycle_length,
            greens: vec![(cycle_length - lost_time) / n; scenario.phases.len()],
            lost_time,
            oversaturated: false,
        }
    }

    /// Checks the plan against the scenario it is meant to drive.
    pub fn validate(&self, scenario: &Scenario) -> Result<()> {
        const TOL: f64 = 1e-6;
        let bad = |msg: String| Err(Error::Config(msg));
        if self.greens.len() != scenario.phases.len() {
            return bad(format!(
                "plan has {} greens for {} phases",
                self.greens.len(),
                scenario.phases.len()
            ));
        }
        if (self.lost_time - scenario.lost_time()).abs() > TOL {
            return bad(format!(
                "plan lost time {} differs from scenario lost time {}",
                self.lost_time,
                scenario.lost_time()
            ));
        }
        let total: f64 = self.greens.iter().sum::<f64>() + self.lost_time;
        if !self.cycle_length.is_finite() || (total - self.cycle_length).abs() > TOL {
            return bad(format!(
                "cycle {} != sum of greens plus lost time {}",
                self.cycle_length, total
            ));
        }
        for (p, (g, phase)) in self.greens.iter().zip(&scenario.phases).enumerate() {
            if !(*g + TOL >= phase.min_green) {
                return bad(format!(
                    "phase {p} green {g} s below min_green {} s",
                    phase.min_green
                ));
            }
        }
        let (c_min, c_max) = (scenario.control.c_min, scenario.control.c_max);
        if self.cycle_length < c_min - TOL || self.cycle_length > c_max + TOL {
            return bad(format!(
                "cycle {} s outside [{c_min}, {c_max}]",
                self.cycle_length
            ));
        }
        Ok(())
    }
}

/// Default topology: four approaches (N, S, E, W) in two phases (NS, EW).
pub fn four_way(demand: DemandProfile, horizon: u64, seed: u64) -> Scenario {
    let approaches = (0..4)
        .map(|id| Approach {
            id,
            saturation_flow: 1800.0,
            free_flow_crossing: 5.0,
        })
        .collect();
    let phases = vec![
        Phase {
            id: 0,
            approaches: vec![0, 1],
            min_green: 10.0,
        },
        Phase {
            id: 1,
            approaches: vec![2, 3],
            min_green: 10.0,
        },
    ];
    Scenario {
        approaches,
        phases,
        demand,
        lost_time_per_phase: 4.0,
        horizon,
        seed,
        detector: DetectorModel::default(),
        control: ControlConfig::default(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_interval() -> DemandProfile {
        DemandProfile::new(vec![
            DemandInterval {
                start: 0,
                end: 3600,
                rates: vec![300.0],
            },
            DemandInterval {
                start: 3600,
                end: 7200,
                rates: vec![600.0],
            },
        ])
    }

    fn single_approach(demand: DemandProfile, horizon: u64) -> Scenario {
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
            demand,
            lost_time_per_phase: 0.0,
            horizon,
            seed: 1,
            detector: DetectorModel::default(),
            control: ControlConfig::default(),
        }
    }

    const MINIMAL: &str = r#"{
        "approaches": [
            {"id": 0, "saturation_flow": 1800, "free_flow_crossing": 5},
            {"id": 1, "saturation_flow": 1800, "free_flow_crossing": 5},
            {"id": 2, "saturation_flow": 1700, "free_flow_crossing": 6},
            {"id": 3, "saturation_flow": 1700, "free_flow_crossing": 6}
        ],
        "phases": [
            {"id": 0, "approaches": [0, 1], "min_green": 10},
            {"id": 1, "approaches": [2, 3], "min_green": 10}
        ],
        "demand": [
            {"start": 0, "end": 3600, "rates": [300, 300, 200, 200]}
        ],
        "lost_time_per_phase": 6,
        "horizon": 3600,
        "seed": 9
    }"#;

    #[test]
    fn minimal_file_maps_fields() {
        let s = Scenario::from_json(MINIMAL).unwrap();
        assert_eq!(s.approaches.len(), 4);
        assert_eq!(s.phases.len(), 2);
        assert_eq!(s.lost_time(), 12.0);
        assert_eq!(s.seed, 9);
        assert!(s.warnings().is_empty());
    }

    #[test]
    fn negative_rate_is_rejected() {
        let text = MINIMAL.replace("[300, 300, 200, 200]", "[300, -5, 200, 200]");
        let err = Scenario::from_json(&text).unwrap_err();
        assert!(err.to_string().contains("negative arrival rate"), "{err}");
    }

    #[test]
    fn demand_gap_is_rejected() {
        let mut s = single_approach(two_interval(), 10800);
        s.demand.intervals[1].start = 7200;
        s.demand.intervals[1].end = 10800;
        let err = s.validate().unwrap_err();
        assert!(err.to_string().contains("horizon not covered"), "{err}");
    }

    #[test]
    fn short_demand_is_rejected() {
        let s = single_approach(two_interval(), 9000);
        assert!(s
            .validate()
            .unwrap_err()
            .to_string()
            .contains("horizon not covered"));
    }

    #[test]
    fn parse_errors_carry_position() {
        let err = Scenario::from_json("{\n  \"approaches\": 3\n}").unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
        let missing = MINIMAL.replace("\"horizon\": 3600,", "");
        let err = Scenario::from_json(&missing).unwrap_err();
        assert!(err.to_string().contains("horizon"), "{err}");
    }

    #[test]
    fn shared_and_orphan_approaches_are_rejected() {
        let mut s = Scenario::from_json(MINIMAL).unwrap();
        s.phases[1].approaches.push(0);
        assert!(s
            .validate()
            .unwrap_err()
            .to_string()
            .contains("belongs to phases"));
        let mut s = Scenario::from_json(MINIMAL).unwrap();
        s.phases[1].approaches.pop();
        assert!(s.validate().unwrap_err().to_string().contains("no phase"));
    }

    #[test]
    fn min_green_floor() {
        let mut s = Scenario::from_json(MINIMAL).unwrap();
        s.phases[0].min_green = 4.0;
        assert!(s.validate().is_err());
    }

    #[test]
    fn unusual_saturation_flow_is_flagged_not_rejected() {
        let text = MINIMAL.replace("\"saturation_flow\": 1700", "\"saturation_flow\": 1900");
        let s = Scenario::from_json(&text).unwrap();
        assert_eq!(s.warnings().len(), 2);
    }

    #[test]
    fn rate_lookup_uses_right_open_intervals() {
        let s = single_approach(two_interval(), 7200);
        assert_eq!(s.demand_rate_at(0, 0.0).unwrap(), 300.0);
        assert_eq!(s.demand_rate_at(0, 3599.5).unwrap(), 300.0);
        assert_eq!(s.demand_rate_at(0, 3600.0).unwrap(), 600.0);
        assert!(matches!(s.demand_rate_at(0, 7200.0), Err(Error::Range(_))));
        assert!(matches!(s.demand_rate_at(0, -1.0), Err(Error::Range(_))));
    }

    #[test]
    fn rate_lookup_matches_exhaustive_scan() {
        let bounds = [0u64, 7, 8, 30, 61, 100];
        let intervals = bounds
            .windows(2)
            .enumerate()
            .map(|(k, w)| DemandInterval {
                start: w[0],
                end: w[1],
                rates: vec![k as f64 * 10.0, 1.0 + k as f64],
            })
            .collect();
        let mut s = single_approach(DemandProfile::new(intervals), 100);
        s.approaches.push(Approach {
            id: 1,
            saturation_flow: 1600.0,
            free_flow_crossing: 4.0,
        });
        s.phases[0].approaches.push(1);
        s.validate().unwrap();
        for t in 0..100u64 {
            let covering: Vec<_> = s
                .demand
                .intervals
                .iter()
                .filter(|iv| iv.start <= t && t < iv.end)
                .collect();
            assert_eq!(covering.len(), 1);
            for a in 0..2 {
                assert_eq!(s.demand_rate_at(a, t as f64).unwrap(), covering[0].rates[a]);
            }
        }
    }

    #[test]
    fn expected_arrivals_integrates_rates() {
        let p = two_interval();
        assert!((p.expected_arrivals(0, 0.0, 7200.0) - 900.0).abs() < 1e-9);
        assert!((p.expected_arrivals(0, 1800.0, 5400.0) - 450.0).abs() < 1e-9);
    }

    #[test]
    fn equal_split_plan_is_valid() {
        let s = Scenario::from_json(MINIMAL).unwrap();
        let plan = SignalPlan::equal_split(&s, 90.0);
        assert_eq!(plan.greens, vec![39.0, 39.0]);
        plan.validate(&s).unwrap();
        let mut bad = plan.clone();
        bad.greens[0] += 1.0;
        assert!(matches!(bad.validate(&s), Err(Error::Config(_))));
        let short = SignalPlan::equal_split(&s, 30.0);
        assert!(short.validate(&s).is_err());
    }
}
