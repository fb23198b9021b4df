//! Least-squares scaling-class selection.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

/// Growth classes, ordered from slowest to fastest.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Growth {
    /// Identically zero.
    Zero,
    /// Decreasing as `a / x + b`.
    Inverse,
    Constant,
    Logarithmic,
    Linear,
    Quadratic,
}

impl Growth {
    pub fn label(self) -> &'static str {
        match self {
            Growth::Zero => "0",
            Growth::Inverse => "1/x",
            Growth::Constant => "1",
            Growth::Logarithmic => "log",
            Growth::Linear => "lin",
            Growth::Quadratic => "quad",
        }
    }

    /// Whether a measured class meets a claimed bound. Exact, except that a
    /// series that is identically zero also meets a constant bound.
    pub fn meets(self, claimed: Growth) -> bool {
        self == claimed || (self == Growth::Zero && claimed == Growth::Constant)
    }
}

impl fmt::Display for Growth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Growth {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "0" | "zero" => Growth::Zero,
            "1/x" | "inverse" => Growth::Inverse,
            "1" | "constant" => Growth::Constant,
            "log" | "logarithmic" => Growth::Logarithmic,
            "lin" | "linear" => Growth::Linear,
            "quad" | "quadratic" => Growth::Quadratic,
            other => return Err(format!("unknown growth class `{other}`")),
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScalingSeries {
    pub protocol: String,
    pub metric: String,
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FitError {
    #[error("series needs at least {MIN_POINTS} points, got {0}")]
    TooFewPoints(usize),
    #[error("x values must be positive and strictly increasing")]
    BadAxis,
    #[error("non-finite value in series")]
    NonFinite,
    #[error("no model reaches R^2 {threshold}: best was {best} with R^2 {r2:.3}")]
    Inconclusive { best: Growth, r2: f64, threshold: f64 },
}

pub const MIN_POINTS: usize = 4;
/// Minimum R^2 for a class to be reported.
pub const MIN_R2: f64 = 0.9;
/// Coefficient of variation under which a series counts as constant.
pub const CONSTANT_CV: f64 = 0.05;

impl ScalingSeries {
    pub fn new(protocol: impl Into<String>, metric: impl Into<String>, points: Vec<(f64, f64)>) -> Result<Self, FitError> {
        if points.len() < MIN_POINTS {
            return Err(FitError::TooFewPoints(points.len()));
        }
        if points.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
            return Err(FitError::NonFinite);
        }
        if points[0].0 <= 0.0 || points.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(FitError::BadAxis);
        }
        Ok(ScalingSeries { protocol: protocol.into(), metric: metric.into(), points })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScalingClass {
    pub class: Growth,
    /// R^2 of the chosen model (`1 - cv^2` for the constant model).
    pub fit_quality: f64,
    pub slope: f64,
    pub intercept: f64,
}

/// Fits `y = a * f(x) + b`; returns `(a, b, r2)`.
fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    if sxx == 0.0 || syy == 0.0 {
        return (0.0, my, 0.0);
    }
    let a = sxy / sxx;
    let b = my - a * mx;
    let ss_res: f64 = xs.iter().zip(ys).map(|(x, y)| (y - (a * x + b)).powi(2)).sum();
    (a, b, 1.0 - ss_res / syy)
}

pub fn fit_scaling(series: &ScalingSeries) -> Result<ScalingClass, FitError> {
    let xs: Vec<f64> = series.points.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = series.points.iter().map(|p| p.1).collect();
    if ys.iter().all(|&y| y == 0.0) {
        return Ok(ScalingClass { class: Growth::Zero, fit_quality: 1.0, slope: 0.0, intercept: 0.0 });
    }
    let n = ys.len() as f64;
    let mean = ys.iter().sum::<f64>() / n;
    let var = ys.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / n;
    let cv = if mean == 0.0 { f64::INFINITY } else { var.sqrt() / mean.abs() };
    if cv <= CONSTANT_CV {
        return Ok(ScalingClass { class: Growth::Constant, fit_quality: 1.0 - cv * cv, slope: 0.0, intercept: mean });
    }

    type Model = (Growth, fn(f64) -> f64);
    let models: [Model; 4] = [
        (Growth::Inverse, |x| 1.0 / x),
        (Growth::Logarithmic, f64::ln),
        (Growth::Linear, |x| x),
        (Growth::Quadratic, |x| x * x),
    ];
    let mut best: Option<ScalingClass> = None;
    for (class, f) in models {
        let fx: Vec<f64> = xs.iter().map(|&x| f(x)).collect();
        let (a, b, r2) = linear_fit(&fx, &ys);
        if a <= 0.0 {
            continue;
        }
        if best.is_none_or(|c| r2 > c.fit_quality) {
            best = Some(ScalingClass { class, fit_quality: r2, slope: a, intercept: b });
        }
    }
    match best {
        Some(c) if c.fit_quality >= MIN_R2 => Ok(c),
        Some(c) => Err(FitError::Inconclusive { best: c.class, r2: c.fit_quality, threshold: MIN_R2 }),
        None => Err(FitError::Inconclusive { best: Growth::Constant, r2: 0.0, threshold: MIN_R2 }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(f: impl Fn(f64) -> f64) -> ScalingSeries {
        let pts = [16.0, 32.0, 64.0, 128.0, 256.0, 512.0].iter().map(|&x| (x, f(x))).collect();
        ScalingSeries::new("t", "m", pts).unwrap()
    }

    #[test]
    fn exact_classes() {
        assert_eq!(fit_scaling(&series(|x| x)).unwrap().class, Growth::Linear);
        assert_eq!(fit_scaling(&series(|x| 3.0 * x.ln() + 1.0)).unwrap().class, Growth::Logarithmic);
        assert_eq!(fit_scaling(&series(|x| x * x)).unwrap().class, Growth::Quadratic);
        assert_eq!(fit_scaling(&series(|_| 7.0)).unwrap().class, Growth::Constant);
        assert_eq!(fit_scaling(&series(|x| 100.0 / x)).unwrap().class, Growth::Inverse);
        assert_eq!(fit_scaling(&series(|_| 0.0)).unwrap().class, Growth::Zero);
    }

    #[test]
    fn rejects_short_or_unsorted() {
        assert!(ScalingSeries::new("t", "m", vec![(1.0, 1.0); 3]).is_err());
        assert!(ScalingSeries::new("t", "m", vec![(1.0, 1.0), (1.0, 2.0), (2.0, 3.0), (3.0, 4.0)]).is_err());
    }
}
