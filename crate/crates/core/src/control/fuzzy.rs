//! Mamdani-style cycle-length multiplier.
//!
//! Two inputs (predicted demand ratio and demand trend) are fuzzified with
//! triangular sets, the nine rules fire by min-conjunction, rule strengths are
//! aggregated per output singleton by max, and the crisp multiplier is the
//! singleton-weighted average.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::float::Real;

/// Triangular membership function. For the outermost set of a variable the
/// side facing away from the domain saturates at 1 (shoulder).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Triangle<T> {
    pub left: T,
    pub peak: T,
    pub right: T,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Shoulder {
    None,
    Left,
    Right,
}

impl<T: Real> Triangle<T> {
    pub fn new(left: T, peak: T, right: T) -> Self {
        Self { left, peak, right }
    }

    /// Plain triangular membership.
    pub fn membership(&self, x: T) -> T {
        self.eval(x, Shoulder::None)
    }

    fn eval(&self, x: T, shoulder: Shoulder) -> T {
        if x == self.peak {
            return T::one();
        }
        if x < self.peak {
            if shoulder == Shoulder::Left {
                T::one()
            } else if x <= self.left {
                T::zero()
            } else {
                (x - self.left) / (self.peak - self.left)
            }
        } else if shoulder == Shoulder::Right {
            T::one()
        } else if x >= self.right {
            T::zero()
        } else {
            (self.right - x) / (self.right - self.peak)
        }
    }
}

/// Output classes of the rule table.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Adjust {
    Short,
    Keep,
    Long,
}

impl Adjust {
    fn index(self) -> usize {
        match self {
            Adjust::Short => 0,
            Adjust::Keep => 1,
            Adjust::Long => 2,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Singletons<T> {
    pub short: T,
    pub keep: T,
    pub long: T,
}

impl<T: Copy> Singletons<T> {
    fn as_array(&self) -> [T; 3] {
        [self.short, self.keep, self.long]
    }
}

/// Breakpoints, output singletons and rule table of the fuzzy layer.
///
/// `ratio` holds LOW, MED, HIGH over the predicted demand/saturation ratio;
/// `trend` holds FALLING, STEADY, RISING over the change in demand,
/// vehicles/hour per hour. `rules[r][t]` is the output for ratio set `r` and
/// trend set `t`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FuzzyConfig<T> {
    pub ratio: [Triangle<T>; 3],
    pub trend: [Triangle<T>; 3],
    pub outputs: Singletons<T>,
    pub rules: [[Adjust; 3]; 3],
}

impl<T: Real> Default for FuzzyConfig<T> {
    fn default() -> Self {
        let t = |a: f64, b: f64, c: f64| Triangle::new(T::lit(a), T::lit(b), T::lit(c));
        use Adjust::*;
        Self {
            ratio: [t(0.0, 0.0, 0.4), t(0.3, 0.55, 0.8), t(0.7, 1.0, 1.3)],
            trend: [
                t(-200.0, -200.0, -50.0),
                t(-100.0, 0.0, 100.0),
                t(50.0, 200.0, 200.0),
            ],
            outputs: Singletons {
                short: T::lit(0.85),
                keep: T::one(),
                long: T::lit(1.15),
            },
            // Any HIGH or MED∧RISING lengthens; any LOW or MED∧FALLING shortens.
            rules: [
                [Short, Short, Short],
                [Short, Keep, Long],
                [Long, Long, Long],
            ],
        }
    }
}

fn memberships<T: Real>(sets: &[Triangle<T>; 3], x: T) -> [T; 3] {
    [
        sets[0].eval(x, Shoulder::Left),
        sets[1].eval(x, Shoulder::None),
        sets[2].eval(x, Shoulder::Right),
    ]
}

fn validate_sets<T: Real>(name: &str, sets: &[Triangle<T>; 3]) -> Result<()> {
    for (k, s) in sets.iter().enumerate() {
        if !(s.left <= s.peak && s.peak <= s.right) {
            return Err(Error::Invariant(format!(
                "{name} set {k} breakpoints out of order"
            )));
        }
        if k > 0 && s.left == s.peak {
            return Err(Error::Invariant(format!(
                "{name} set {k} has a vertical left edge"
            )));
        }
        if k < 2 && s.peak == s.right {
            return Err(Error::Invariant(format!(
                "{name} set {k} has a vertical right edge"
            )));
        }
    }
    for k in 0..2 {
        let (a, b) = (&sets[k], &sets[k + 1]);
        if !(a.peak < b.peak && b.left < a.right) {
            return Err(Error::Invariant(format!(
                "{name} sets {k} and {} leave a gap in the input domain",
                k + 1
            )));
        }
    }
    Ok(())
}

impl<T: Real> FuzzyConfig<T> {
    pub fn validate(&self) -> Result<()> {
        validate_sets("ratio", &self.ratio)?;
        validate_sets("trend", &self.trend)?;
        if self.outputs.as_array().iter().any(|m| !(*m > T::zero())) {
            return Err(Error::Invariant(
                "fuzzy output multipliers must be strictly positive".into(),
            ));
        }
        Ok(())
    }

    pub fn ratio_memberships(&self, ratio: T) -> [T; 3] {
        memberships(&self.ratio, ratio)
    }

    pub fn trend_memberships(&self, trend: T) -> [T; 3] {
        memberships(&self.trend, trend)
    }

    /// Aggregated strength per output class (short, keep, long).
    pub fn strengths(&self, ratio: T, trend: T) -> [T; 3] {
        let mr = self.ratio_memberships(ratio);
        let mt = self.trend_memberships(trend);
        let mut out = [T::zero(); 3];
        for (r, row) in self.rules.iter().enumerate() {
            for (t, action) in row.iter().enumerate() {
                let fire = mr[r].min(mt[t]);
                let slot = &mut out[action.index()];
                *slot = slot.max(fire);
            }
        }
        out
    }

    /// Crisp cycle multiplier. With no rule firing the result is the `keep`
    /// singleton.
    pub fn multiplier(&self, ratio: T, trend: T) -> T {
        let strengths = self.strengths(ratio, trend);
        let weights: T = strengths.iter().copied().sum();
        if !(weights > T::zero()) {
            return self.outputs.keep;
        }
        let outputs = self.outputs.as_array();
        let lo = outputs.iter().copied().fold(T::infinity(), T::min);
        let hi = outputs.iter().copied().fold(T::neg_infinity(), T::max);
        let m = strengths
            .iter()
            .zip(outputs)
            .map(|(w, m)| *w * m)
            .sum::<T>()
            / weights;
        m.max(lo).min(hi)
    }
}

/// Multiplier for a predicted demand ratio and trend.
pub fn fuzzy_adjust<T: Real>(config: &FuzzyConfig<T>, predicted_ratio: T, trend: T) -> T {
    config.multiplier(predicted_ratio, trend)
}
