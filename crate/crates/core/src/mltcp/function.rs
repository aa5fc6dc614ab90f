use serde::{Deserialize, Serialize};

/// Shape of the aggressiveness function. All closed-form shapes share the
/// output range `[I, I + S]` on `r` in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FunctionForm {
    /// `S r + I`
    Linear,
    /// `S r^2 + I`
    QuadraticIncreasing,
    /// `1 / (1/I - (1/I - 1/(I+S)) r)`
    Reciprocal,
    /// `-S r^2 + 2 S r + I`
    ConcaveIncreasing,
    /// `-S r + I + S`
    LinearDecreasing,
    /// `-S r^2 + I + S`
    QuadraticDecreasing,
    /// Piecewise-linear interpolation over `(r, F)` breakpoints.
    CustomTable,
}

impl FunctionForm {
    pub fn is_increasing(self) -> bool {
        !matches!(self, FunctionForm::LinearDecreasing | FunctionForm::QuadraticDecreasing)
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FunctionError {
    #[error("aggressiveness function must be positive on [0, 1], got {value} at r = {ratio}")]
    NotPositive { ratio: f64, value: f64 },
    #[error("{form:?} is declared increasing but F({hi}) < F({lo})")]
    NotMonotone { form: FunctionForm, lo: f64, hi: f64 },
    #[error("custom table needs at least two breakpoints with strictly increasing r in [0, 1]")]
    BadTable,
    #[error("table breakpoints are only valid with form = \"custom-table\"")]
    UnexpectedTable,
    #[error("slope and intercept must be finite")]
    NotFinite,
}

/// Maps the fraction of an iteration's bytes already delivered to a
/// multiplier on a congestion controller's increase or decrease step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AggressivenessFunction {
    #[serde(default = "default_form")]
    pub form: FunctionForm,
    #[serde(default)]
    pub slope: f64,
    #[serde(default = "default_intercept")]
    pub intercept: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub table: Vec<(f64, f64)>,
}

fn default_form() -> FunctionForm {
    FunctionForm::Linear
}

fn default_intercept() -> f64 {
    1.0
}

const SAMPLES: usize = 256;

impl AggressivenessFunction {
    pub fn new(form: FunctionForm, slope: f64, intercept: f64) -> Result<Self, FunctionError> {
        let f = AggressivenessFunction { form, slope, intercept, table: Vec::new() };
        f.validate()?;
        Ok(f)
    }

    pub fn linear(slope: f64, intercept: f64) -> Result<Self, FunctionError> {
        Self::new(FunctionForm::Linear, slope, intercept)
    }

    /// `F == 1` everywhere.
    pub fn identity() -> Self {
        AggressivenessFunction { form: FunctionForm::Linear, slope: 0.0, intercept: 1.0, table: Vec::new() }
    }

    pub fn table(points: Vec<(f64, f64)>) -> Result<Self, FunctionError> {
        let f = AggressivenessFunction { form: FunctionForm::CustomTable, slope: 0.0, intercept: 0.0, table: points };
        f.validate()?;
        Ok(f)
    }

    pub fn validate(&self) -> Result<(), FunctionError> {
        if !self.slope.is_finite() || !self.intercept.is_finite() {
            return Err(FunctionError::NotFinite);
        }
        match self.form {
            FunctionForm::CustomTable => {
                let ok = self.table.len() >= 2
                    && self.table.windows(2).all(|w| w[0].0 < w[1].0)
                    && self.table.iter().all(|&(r, v)| (0.0..=1.0).contains(&r) && v.is_finite());
                if !ok {
                    return Err(FunctionError::BadTable);
                }
            }
            _ if !self.table.is_empty() => return Err(FunctionError::UnexpectedTable),
            FunctionForm::Reciprocal => {
                // The closed form needs both endpoints positive before it
                // can be sampled at all.
                let (lo, hi) = (self.intercept, self.intercept + self.slope);
                if lo <= 0.0 || hi <= 0.0 {
                    let (ratio, value) = if lo <= 0.0 { (0.0, lo) } else { (1.0, hi) };
                    return Err(FunctionError::NotPositive { ratio, value });
                }
            }
            _ => {}
        }
        let mut prev = f64::NEG_INFINITY;
        for i in 0..=SAMPLES {
            let r = i as f64 / SAMPLES as f64;
            let v = self.eval_unclamped(r);
            if !(v > 0.0) {
                return Err(FunctionError::NotPositive { ratio: r, value: v });
            }
            if self.form.is_increasing() && v < prev {
                let lo = (i - 1) as f64 / SAMPLES as f64;
                return Err(FunctionError::NotMonotone { form: self.form, lo, hi: r });
            }
            prev = v;
        }
        Ok(())
    }

    /// `F(bytes_ratio)`, with the ratio clamped into `[0, 1]`.
    pub fn eval(&self, bytes_ratio: f64) -> f64 {
        let r = if bytes_ratio.is_nan() { 0.0 } else { bytes_ratio.clamp(0.0, 1.0) };
        self.eval_unclamped(r)
    }

    fn eval_unclamped(&self, r: f64) -> f64 {
        let (s, i) = (self.slope, self.intercept);
        match self.form {
            FunctionForm::Linear => s * r + i,
            FunctionForm::QuadraticIncreasing => s * r * r + i,
            FunctionForm::Reciprocal => {
                let a = 1.0 / i;
                let b = a - 1.0 / (i + s);
                1.0 / (a - b * r)
            }
            FunctionForm::ConcaveIncreasing => -s * r * r + 2.0 * s * r + i,
            FunctionForm::LinearDecreasing => -s * r + i + s,
            FunctionForm::QuadraticDecreasing => -s * r * r + i + s,
            FunctionForm::CustomTable => interpolate(&self.table, r),
        }
    }
}

impl Default for AggressivenessFunction {
    fn default() -> Self {
        Self::identity()
    }
}

fn interpolate(points: &[(f64, f64)], r: f64) -> f64 {
    let first = points[0];
    let last = points[points.len() - 1];
    if r <= first.0 {
        return first.1;
    }
    if r >= last.0 {
        return last.1;
    }
    let idx = points.partition_point(|&(x, _)| x <= r);
    let (x0, y0) = points[idx - 1];
    let (x1, y1) = points[idx];
    y0 + (y1 - y0) * (r - x0) / (x1 - x0)
}
