use std::path::Path;

use chrono::{Datelike, Duration, NaiveDateTime, Timelike};
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::float::Real;
use crate::seed::seeded_rng;

/// Inputs per time step: previous hour's count, year, month, day, hour, minute.
pub const FEATURES: usize = 6;

pub const TIMESTAMP_FORMAT: &str = "%Y-%m-%dT%H:%M:%S";

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    /// Vehicles counted in the preceding hour.
    pub count_last_hour: f64,
    pub year: i32,
    pub month: u32,
    pub day: u32,
    pub hour: u32,
    pub minute: u32,
}

impl FeatureVector {
    pub fn at(count_last_hour: f64, ts: NaiveDateTime) -> Self {
        Self {
            count_last_hour,
            year: ts.year(),
            month: ts.month(),
            day: ts.day(),
            hour: ts.hour(),
            minute: ts.minute(),
        }
    }

    pub fn raw(&self) -> [f64; FEATURES] {
        [
            self.count_last_hour,
            self.year as f64,
            self.month as f64,
            self.day as f64,
            self.hour as f64,
            self.minute as f64,
        ]
    }

    pub fn same_time(&self, ts: NaiveDateTime) -> bool {
        (self.year, self.month, self.day, self.hour, self.minute)
            == (ts.year(), ts.month(), ts.day(), ts.hour(), ts.minute())
    }
}

/// Feature vectors for an hourly series: the vector for hour `t` carries the
/// count of hour `t - 1` and the calendar fields of hour `t`, so the output is
/// one shorter than the input.
pub fn build_features(counts: &[f64], timestamps: &[NaiveDateTime]) -> Result<Vec<FeatureVector>> {
    if counts.len() != timestamps.len() {
        return Err(Error::Argument(format!(
            "{} counts but {} timestamps",
            counts.len(),
            timestamps.len()
        )));
    }
    if counts.len() < 2 {
        return Err(Error::Argument(
            "feature construction needs at least two hours".into(),
        ));
    }
    Ok(counts
        .iter()
        .zip(&timestamps[1..])
        .map(|(&c, &ts)| FeatureVector::at(c, ts))
        .collect())
}

/// Min-max scaling fitted on a training split. Feature 0 (the lagged count)
/// shares the target's scale so predictions can be fed back as inputs.
/// A feature that was constant in training maps to 0; a constant target is
/// shifted by its value and left unscaled.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Normalizer<T> {
    pub feature_min: [T; FEATURES],
    pub feature_max: [T; FEATURES],
    pub target_min: T,
    pub target_max: T,
}

impl<T: Real> Normalizer<T> {
    /// Leaves every value unchanged.
    pub fn identity() -> Self {
        Self {
            feature_min: [T::zero(); FEATURES],
            feature_max: [T::one(); FEATURES],
            target_min: T::zero(),
            target_max: T::one(),
        }
    }

    /// Fits ranges over the training features and targets.
    pub fn fit(features: &[FeatureVector], targets: &[f64]) -> Result<Self> {
        if features.is_empty() || targets.is_empty() {
            return Err(Error::Argument(
                "cannot fit normalization on empty data".into(),
            ));
        }
        let mut lo = [f64::INFINITY; FEATURES];
        let mut hi = [f64::NEG_INFINITY; FEATURES];
        for f in features {
            for (k, v) in f.raw().into_iter().enumerate() {
                lo[k] = lo[k].min(v);
                hi[k] = hi[k].max(v);
            }
        }
        let counts = targets
            .iter()
            .chain(features.iter().map(|f| &f.count_last_hour));
        let (tmin, tmax) = counts.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| {
            (a.min(v), b.max(v))
        });
        lo[0] = tmin;
        hi[0] = tmax;
        let norm = Self {
            feature_min: lo.map(T::lit),
            feature_max: hi.map(T::lit),
            target_min: T::lit(tmin),
            target_max: T::lit(tmax),
        };
        norm.validate()?;
        Ok(norm)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self
            .feature_min
            .iter()
            .zip(&self.feature_max)
            .chain(std::iter::once((&self.target_min, &self.target_max)))
            .all(|(lo, hi)| lo.is_finite() && hi.is_finite() && lo <= hi);
        if ok {
            Ok(())
        } else {
            Err(Error::Model(
                "normalization ranges must be finite with min <= max".into(),
            ))
        }
    }

    fn span(lo: T, hi: T) -> T {
        if hi > lo {
            hi - lo
        } else {
            T::one()
        }
    }

    pub fn normalize(&self, f: &FeatureVector) -> [T; FEATURES] {
        let raw = f.raw();
        std::array::from_fn(|k| {
            let (lo, hi) = (self.feature_min[k], self.feature_max[k]);
            if hi > lo {
                (T::lit(raw[k]) - lo) / (hi - lo)
            } else {
                T::zero()
            }
        })
    }

    pub fn normalize_target(&self, y: T) -> T {
        (y - self.target_min) / Self::span(self.target_min, self.target_max)
    }

    pub fn denormalize_target(&self, y: T) -> T {
        self.target_min + y * Self::span(self.target_min, self.target_max)
    }
}

/// Hourly counts with their timestamps.
#[derive(Clone, Debug, PartialEq)]
pub struct HourlySeries {
    pub timestamps: Vec<NaiveDateTime>,
    pub counts: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct CsvRow {
    timestamp: String,
    count: f64,
}

impl HourlySeries {
    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn features(&self) -> Result<Vec<FeatureVector>> {
        build_features(&self.counts, &self.timestamps)
    }

    /// Splits at `at`, returning `[0, at)` and `[at, len)`.
    pub fn split_at(&self, at: usize) -> (Self, Self) {
        let at = at.min(self.len());
        (
            Self {
                timestamps: self.timestamps[..at].to_vec(),
                counts: self.counts[..at].to_vec(),
            },
            Self {
                timestamps: self.timestamps[at..].to_vec(),
                counts: self.counts[at..].to_vec(),
            },
        )
    }

    /// Reads a `timestamp,count` CSV with ISO-8601 timestamps.
    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut reader = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
        let mut series = Self {
            timestamps: vec![],
            counts: vec![],
        };
        for (line, row) in reader.deserialize::<CsvRow>().enumerate() {
            let row = row.map_err(|e| Error::csv(path, e))?;
            let ts = NaiveDateTime::parse_from_str(row.timestamp.trim(), TIMESTAMP_FORMAT)
                .map_err(|e| Error::Parse {
                    line: line + 2,
                    column: 1,
                    message: format!("bad timestamp {:?}: {e}", row.timestamp),
                })?;
            if !(row.count >= 0.0) {
                return Err(Error::Parse {
                    line: line + 2,
                    column: 2,
                    message: format!("negative count {}", row.count),
                });
            }
            series.timestamps.push(ts);
            series.counts.push(row.count);
        }
        Ok(series)
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
        for (ts, c) in self.timestamps.iter().zip(&self.counts) {
            w.serialize(CsvRow {
                timestamp: ts.format(TIMESTAMP_FORMAT).to_string(),
                count: *c,
            })
            .map_err(|e| Error::csv(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// Hourly timestamps starting at `start`.
pub fn hourly_timestamps(start: NaiveDateTime, len: usize) -> Vec<NaiveDateTime> {
    (0..len)
        .map(|k| start + Duration::hours(k as i64))
        .collect()
}

/// Poisson counts around a daily sinusoid peaking at `peak` veh/h at 17:00
/// with its trough at 05:00 at `trough` veh/h.
pub fn synthetic_seasonal(
    days: usize,
    peak: f64,
    trough: f64,
    start: NaiveDateTime,
    seed: u64,
) -> HourlySeries {
    let mut rng = seeded_rng(seed);
    let timestamps = hourly_timestamps(start, days * 24);
    let mid = 0.5 * (peak + trough);
    let amp = 0.5 * (peak - trough);
    let counts = timestamps
        .iter()
        .map(|ts| {
            let phase = 2.0 * std::f64::consts::PI * (ts.hour() as f64 - 11.0) / 24.0;
            let rate = mid + amp * phase.sin();
            if rate > 0.0 {
                Poisson::new(rate).expect("positive rate").sample(&mut rng)
            } else {
                0.0
            }
        })
        .collect();
    HourlySeries { timestamps, counts }
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;
    use proptest::prelude::*;

    fn ts(d: u32, h: u32) -> NaiveDateTime {
        NaiveDate::from_ymd_opt(2017, 3, d)
            .unwrap()
            .and_hms_opt(h, 0, 0)
            .unwrap()
    }

    #[test]
    fn features_shift_counts_by_one_hour() {
        let f = build_features(&[42.0, 50.0], &[ts(5, 13), ts(5, 14)]).unwrap();
        assert_eq!(
            f,
            vec![FeatureVector {
                count_last_hour: 42.0,
                year: 2017,
                month: 3,
                day: 5,
                hour: 14,
                minute: 0
            }]
        );
        assert!(build_features(&[1.0], &[ts(5, 1)]).is_err());
        assert!(build_features(&[1.0, 2.0], &[ts(5, 1)]).is_err());
        let c = build_features(&[7.0; 4], &hourly_timestamps(ts(1, 0), 4)).unwrap();
        assert_eq!(c.len(), 3);
        assert!(c.iter().all(|f| f.count_last_hour == 7.0));
    }

    #[test]
    fn fitted_features_land_in_unit_interval() {
        let s = synthetic_seasonal(3, 60.0, 10.0, ts(1, 0), 4);
        let f = s.features().unwrap();
        let n = Normalizer::<f64>::fit(&f, &s.counts[1..]).unwrap();
        for v in &f {
            for x in n.normalize(v) {
                assert!((0.0..=1.0).contains(&x), "{x}");
            }
        }
        // Year and minute are constant: shifted to zero.
        assert_eq!(n.normalize(&f[0])[1], 0.0);
        assert_eq!(n.normalize(&f[0])[5], 0.0);
    }

    #[test]
    fn csv_round_trip() {
        let s = synthetic_seasonal(2, 60.0, 10.0, ts(1, 0), 9);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("counts.csv");
        s.write_csv(&p).unwrap();
        assert_eq!(HourlySeries::read_csv(&p).unwrap(), s);
        std::fs::write(&p, "timestamp,count\n2017-03-01 00:00,3\n").unwrap();
        assert!(matches!(
            HourlySeries::read_csv(&p),
            Err(Error::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn seasonal_series_peaks_in_the_evening() {
        let s = synthetic_seasonal(30, 60.0, 10.0, ts(1, 0), 1);
        let by_hour = |h: u32| {
            let v: Vec<f64> = s
                .timestamps
                .iter()
                .zip(&s.counts)
                .filter(|(t, _)| t.hour() == h)
                .map(|(_, c)| *c)
                .collect();
            v.iter().sum::<f64>() / v.len() as f64
        };
        assert!((by_hour(17) - 60.0).abs() < 5.0);
        assert!((by_hour(5) - 10.0).abs() < 3.0);
    }

    proptest! {
        #[test]
        fn target_normalization_round_trips(lo in -1e3f64..1e3, span in 1e-3f64..1e4, x in -1e4f64..1e4) {
            let mut n = Normalizer::<f64>::identity();
            n.target_min = lo;
            n.target_max = lo + span;
            let back = n.denormalize_target(n.normalize_target(x));
            prop_assert!((back - x).abs() <= 1e-9 * x.abs().max(1.0));
        }
    }
}
