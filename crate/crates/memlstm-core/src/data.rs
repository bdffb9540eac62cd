//! Series preparation and error metrics for one-step-ahead forecasting.

use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    values: Vec<f64>,
    labels: Option<Vec<String>>,
}

impl TimeSeries {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Empty("time series"));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(k));
        }
        Ok(TimeSeries {
            values,
            labels: None,
        })
    }

    pub fn with_labels(values: Vec<f64>, labels: Vec<String>) -> Result<Self> {
        if labels.len() != values.len() {
            return Err(Error::LengthMismatch {
                left: values.len(),
                right: labels.len(),
            });
        }
        let mut s = TimeSeries::new(values)?;
        s.labels = Some(labels);
        Ok(s)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Affine map of `[min, max]` onto `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Normalizer {
    min: f64,
    max: f64,
}

impl Normalizer {
    pub fn new(min: f64, max: f64) -> Result<Self> {
        if !(min < max) {
            return Err(Error::ZeroRange(min));
        }
        Ok(Normalizer { min, max })
    }

    pub fn fit(series: &TimeSeries) -> Result<Self> {
        let (min, max) = series
            .values()
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            });
        Normalizer::new(min, max)
    }

    pub fn min(&self) -> f64 {
        self.min
    }

    pub fn max(&self) -> f64 {
        self.max
    }

    pub fn span(&self) -> f64 {
        self.max - self.min
    }

    #[inline]
    pub fn apply(&self, v: f64) -> f64 {
        (v - self.min) / self.span()
    }

    #[inline]
    pub fn invert(&self, v: f64) -> f64 {
        v * self.span() + self.min
    }

    pub fn normalize(&self, series: &TimeSeries) -> TimeSeries {
        TimeSeries {
            values: series.values.iter().map(|&v| self.apply(v)).collect(),
            labels: series.labels.clone(),
        }
    }

    pub fn denormalize(&self, values: &[f64]) -> Vec<f64> {
        values.iter().map(|&v| self.invert(v)).collect()
    }
}

/// One supervised pair: `look_back` consecutive inputs and the value after them.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub window: Vec<f64>,
    pub target: f64,
}

impl Sample {
    /// The window as a sequence of single-feature input vectors.
    pub fn steps(&self) -> impl Iterator<Item = &[f64]> {
        self.window.chunks(1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WindowedSeries {
    samples: Vec<Sample>,
    look_back: usize,
}

impl WindowedSeries {
    pub fn from_samples(samples: Vec<Sample>, look_back: usize) -> Result<Self> {
        if look_back == 0 {
            return Err(Error::InvalidConfig("look_back must be at least 1"));
        }
        for s in &samples {
            if s.window.len() != look_back {
                return Err(Error::Dimension {
                    operand: "window",
                    expected: look_back,
                    found: s.window.len(),
                });
            }
        }
        Ok(WindowedSeries { samples, look_back })
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn look_back(&self) -> usize {
        self.look_back
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn targets(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.target).collect()
    }
}

pub fn make_windows(series: &TimeSeries, look_back: usize) -> Result<WindowedSeries> {
    if look_back == 0 {
        return Err(Error::InvalidConfig("look_back must be at least 1"));
    }
    let v = series.values();
    if v.len() <= look_back {
        return Err(Error::SeriesTooShort {
            len: v.len(),
            look_back,
        });
    }
    let samples = v
        .windows(look_back + 1)
        .map(|w| Sample {
            window: w[..look_back].to_vec(),
            target: w[look_back],
        })
        .collect();
    Ok(WindowedSeries { samples, look_back })
}

/// Chronological split: the first `floor(n·fraction)` samples train, the rest test.
pub fn split(train_fraction: f64, windows: &WindowedSeries) -> Result<(WindowedSeries, WindowedSeries)> {
    let n = windows.len();
    let degenerate = Error::DegenerateSplit {
        fraction: train_fraction,
        samples: n,
    };
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(degenerate);
    }
    let n_train = libm::floor(n as f64 * train_fraction) as usize;
    if n_train == 0 || n_train == n {
        return Err(degenerate);
    }
    let (a, b) = windows.samples.split_at(n_train);
    Ok((
        WindowedSeries {
            samples: a.to_vec(),
            look_back: windows.look_back,
        },
        WindowedSeries {
            samples: b.to_vec(),
            look_back: windows.look_back,
        },
    ))
}

fn check_pair(predictions: &[f64], targets: &[f64]) -> Result<()> {
    if predictions.len() != targets.len() {
        return Err(Error::LengthMismatch {
            left: predictions.len(),
            right: targets.len(),
        });
    }
    if predictions.is_empty() {
        return Err(Error::Empty("predictions"));
    }
    Ok(())
}

pub fn mse(predictions: &[f64], targets: &[f64]) -> Result<f64> {
    check_pair(predictions, targets)?;
    let sum: f64 = predictions
        .iter()
        .zip(targets)
        .map(|(p, t)| (p - t) * (p - t))
        .sum();
    Ok(sum / predictions.len() as f64)
}

/// Root-mean-square error, optionally in the original (denormalized) units.
pub fn rmse(predictions: &[f64], targets: &[f64], denorm: Option<&Normalizer>) -> Result<f64> {
    match denorm {
        None => Ok(libm::sqrt(mse(predictions, targets)?)),
        Some(n) => {
            check_pair(predictions, targets)?;
            let p = n.denormalize(predictions);
            let t = n.denormalize(targets);
            Ok(libm::sqrt(mse(&p, &t)?))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn series(v: &[f64]) -> TimeSeries {
        TimeSeries::new(v.to_vec()).unwrap()
    }

    #[test]
    fn normalize_small() {
        let s = series(&[1.0, 2.0, 3.0]);
        let n = Normalizer::fit(&s).unwrap();
        assert_eq!(n.normalize(&s).values(), &[0.0, 0.5, 1.0]);
    }

    #[test]
    fn constant_series_rejected() {
        let s = series(&[4.0, 4.0]);
        assert_eq!(Normalizer::fit(&s), Err(Error::ZeroRange(4.0)));
    }

    #[test]
    fn series_validation() {
        assert!(TimeSeries::new(vec![]).is_err());
        assert_eq!(TimeSeries::new(vec![1.0, f64::NAN]), Err(Error::NonFinite(1)));
    }

    #[test]
    fn windows_small() {
        let w = make_windows(&series(&[1.0, 2.0, 3.0]), 1).unwrap();
        assert_eq!(
            w.samples(),
            &[
                Sample { window: vec![1.0], target: 2.0 },
                Sample { window: vec![2.0], target: 3.0 },
            ]
        );
        assert!(matches!(
            make_windows(&series(&[1.0]), 1),
            Err(Error::SeriesTooShort { len: 1, look_back: 1 })
        ));
    }

    #[test]
    fn split_counts() {
        let s = series(&(0..144).map(|k| k as f64).collect::<Vec<_>>());
        let w = make_windows(&s, 1).unwrap();
        assert_eq!(w.len(), 143);
        let (tr, te) = split(0.67, &w).unwrap();
        assert_eq!((tr.len(), te.len()), (95, 48));
        assert_eq!(tr.samples()[94].target, 95.0);
        assert_eq!(te.samples()[0].window, vec![95.0]);
    }

    #[test]
    fn degenerate_splits() {
        let w = make_windows(&series(&[1.0, 2.0, 3.0]), 1).unwrap();
        assert!(split(0.0, &w).is_err());
        assert!(split(1.0, &w).is_err());
        assert!(split(0.4, &w).is_err());
        assert!(split(0.5, &w).is_ok());
    }

    #[test]
    fn metric_cases() {
        assert_eq!(rmse(&[1.0, 2.0], &[1.0, 2.0], None).unwrap(), 0.0);
        let r = rmse(&[0.0, 0.0], &[3.0, 4.0], None).unwrap();
        assert!((r - 12.5f64.sqrt()).abs() < 1e-15);
        assert!(rmse(&[1.0], &[1.0, 2.0], None).is_err());
        assert!(rmse(&[], &[], None).is_err());

        let n = Normalizer::new(100.0, 600.0).unwrap();
        let r = rmse(&[0.0, 0.0], &[0.1, 0.1], Some(&n)).unwrap();
        assert!((r - 50.0).abs() < 1e-9);
    }
}
