//! Power-law fits of norm time series and the decay report rows built on them.

use serde::Serialize;

use crate::error::{Error, Result};

/// Least-squares line through `(x, y)`: returns `(slope, intercept, rms residual)`.
pub fn least_squares_slope(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - slope * mx;
    let rms = (x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum::<f64>() / n).sqrt();
    (slope, intercept, rms)
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct DecayFit {
    pub exponent: f64,
    pub prefactor: f64,
    /// RMS deviation of `log(value)` from the fitted line.
    pub residual: f64,
    pub samples: usize,
}

/// Fits `value ~ C t^exponent` on samples with `t` inside `window`.
pub fn fit_decay_exponent(times: &[f64], values: &[f64], window: (f64, f64)) -> Result<DecayFit> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (&t, &v) in times.iter().zip(values) {
        if t < window.0 || t > window.1 {
            continue;
        }
        if !(v > 0.0) || t <= 0.0 {
            return Err(Error::NonPositiveSample { t, value: v });
        }
        xs.push(t.ln());
        ys.push(v.ln());
    }
    if xs.len() < 6 {
        return Err(Error::InsufficientSamples(format!(
            "{} samples in [{}, {}], at least 6 required",
            xs.len(),
            window.0,
            window.1
        )));
    }
    let (exponent, intercept, residual) = least_squares_slope(&xs, &ys);
    Ok(DecayFit { exponent, prefactor: intercept.exp(), residual, samples: xs.len() })
}

/// Which norm a row measures.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Norm {
    #[serde(rename = "1")]
    L1,
    #[serde(rename = "2")]
    L2,
    #[serde(rename = "inf")]
    Inf,
}

impl Norm {
    pub fn label(self) -> &'static str {
        match self {
            Norm::L1 => "1",
            Norm::L2 => "2",
            Norm::Inf => "inf",
        }
    }

    /// `1 - 1/p`.
    pub fn conjugate_weight(self) -> f64 {
        match self {
            Norm::L1 => 0.0,
            Norm::L2 => 0.5,
            Norm::Inf => 1.0,
        }
    }
}

/// How a fitted exponent is judged against the theoretical one.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Sidedness {
    /// `|fitted - theory| <= tolerance`.
    Sharp,
    /// `fitted <= theory + tolerance`: the estimate is an upper bound.
    UpperBound,
}

#[derive(Clone, Debug, Serialize)]
pub struct DecayRow {
    pub variable: String,
    pub beta: usize,
    pub p: Norm,
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub fitted: f64,
    pub theoretical: f64,
    pub tolerance: f64,
    pub residual: f64,
    pub sidedness: Sidedness,
    pub pass: bool,
    /// Set when the fit itself failed.
    pub error: Option<String>,
}

/// Largest RMS log-residual a passing fit may have.
pub const MAX_FIT_RESIDUAL: f64 = 0.1;

impl DecayRow {
    #[allow(clippy::too_many_arguments)]
    pub fn evaluate(
        variable: impl Into<String>,
        beta: usize,
        p: Norm,
        times: Vec<f64>,
        values: Vec<f64>,
        window: (f64, f64),
        theoretical: f64,
        tolerance: f64,
        sidedness: Sidedness,
    ) -> Self {
        let fit = fit_decay_exponent(&times, &values, window);
        let (fitted, residual, error) = match &fit {
            Ok(f) => (f.exponent, f.residual, None),
            Err(e) => (f64::NAN, f64::NAN, Some(e.to_string())),
        };
        let within = match sidedness {
            Sidedness::Sharp => (fitted - theoretical).abs() <= tolerance,
            Sidedness::UpperBound => fitted <= theoretical + tolerance,
        };
        let pass = error.is_none() && within && residual <= MAX_FIT_RESIDUAL;
        Self { variable: variable.into(), beta, p, times, values, fitted, theoretical, tolerance, residual, sidedness, pass, error }
    }
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct DecayReport {
    pub window: (f64, f64),
    pub rows: Vec<DecayRow>,
}

impl DecayReport {
    pub fn passes(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }

    pub fn row(&self, variable: &str, beta: usize, p: Norm) -> Option<&DecayRow> {
        self.rows.iter().find(|r| r.variable == variable && r.beta == beta && r.p == p)
    }

    /// Long-format series with columns `variable,beta,p,t,value`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("variable,beta,p,t,value\n");
        for r in &self.rows {
            for (t, v) in r.times.iter().zip(&r.values) {
                out.push_str(&format!("{},{},{},{:.17e},{:.17e}\n", r.variable, r.beta, r.p.label(), t, v));
            }
        }
        out
    }
}

/// Rejects fit windows spanning less than half a decade.
pub fn check_window(window: (f64, f64)) -> Result<()> {
    if !(window.0 > 0.0) || window.1 / window.0 < 10f64.sqrt() {
        return Err(Error::InsufficientSamples(format!(
            "fit window [{}, {}] spans less than half a decade",
            window.0, window.1
        )));
    }
    Ok(())
}
