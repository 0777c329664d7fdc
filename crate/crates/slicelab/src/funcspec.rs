//! Closed-form 1D function specs with analytic first derivatives.
//!
//! These cover every profile the model library needs (r^p, cosh, sin, e^t,
//! affine) plus natural cubic splines for tabulated user data.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A scalar function of one variable with an analytic derivative.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum FuncSpec {
    /// `a * t + b`
    Affine { a: f64, b: f64 },
    /// `coeff * t^exponent`
    Power { exponent: i32, coeff: f64 },
    /// `scale * exp(rate * t)`
    Exp { rate: f64, scale: f64 },
    /// `scale * cosh(rate * t)`
    Cosh { rate: f64, scale: f64 },
    /// `offset + amp * sin(freq * t + phase)`
    Sin {
        amp: f64,
        freq: f64,
        phase: f64,
        offset: f64,
    },
    /// Natural cubic spline through `(knots[i], values[i])`.
    Spline { knots: Vec<f64>, values: Vec<f64> },
}

impl FuncSpec {
    pub fn constant(c: f64) -> Self {
        FuncSpec::Affine { a: 0.0, b: c }
    }

    /// Validate parameters and precompute spline coefficients.
    pub fn compile(&self) -> Result<CompiledFunc> {
        match self {
            FuncSpec::Spline { knots, values } => {
                let spline = CubicSpline::natural(knots, values)?;
                Ok(CompiledFunc {
                    spec: self.clone(),
                    spline: Some(spline),
                })
            }
            _ => Ok(CompiledFunc {
                spec: self.clone(),
                spline: None,
            }),
        }
    }
}

/// Evaluatable form of a [`FuncSpec`].
#[derive(Debug, Clone)]
pub struct CompiledFunc {
    spec: FuncSpec,
    spline: Option<CubicSpline>,
}

impl CompiledFunc {
    pub fn spec(&self) -> &FuncSpec {
        &self.spec
    }

    pub fn eval(&self, t: f64) -> f64 {
        match &self.spec {
            FuncSpec::Affine { a, b } => a * t + b,
            FuncSpec::Power { exponent, coeff } => coeff * t.powi(*exponent),
            FuncSpec::Exp { rate, scale } => scale * (rate * t).exp(),
            FuncSpec::Cosh { rate, scale } => scale * (rate * t).cosh(),
            FuncSpec::Sin {
                amp,
                freq,
                phase,
                offset,
            } => offset + amp * (freq * t + phase).sin(),
            FuncSpec::Spline { .. } => self.spline.as_ref().unwrap().eval(t),
        }
    }

    pub fn deriv(&self, t: f64) -> f64 {
        match &self.spec {
            FuncSpec::Affine { a, .. } => *a,
            FuncSpec::Power { exponent, coeff } => {
                if *exponent == 0 {
                    0.0
                } else {
                    coeff * f64::from(*exponent) * t.powi(exponent - 1)
                }
            }
            FuncSpec::Exp { rate, scale } => scale * rate * (rate * t).exp(),
            FuncSpec::Cosh { rate, scale } => scale * rate * (rate * t).sinh(),
            FuncSpec::Sin {
                amp, freq, phase, ..
            } => amp * freq * (freq * t + phase).cos(),
            FuncSpec::Spline { .. } => self.spline.as_ref().unwrap().deriv(t),
        }
    }
}

/// Natural cubic spline with clamped-to-linear extrapolation.
#[derive(Debug, Clone)]
pub struct CubicSpline {
    knots: Vec<f64>,
    values: Vec<f64>,
    second: Vec<f64>,
}

impl CubicSpline {
    pub fn natural(knots: &[f64], values: &[f64]) -> Result<Self> {
        if knots.len() != values.len() {
            return Err(Error::InvalidParams(format!(
                "spline knots ({}) and values ({}) differ in length",
                knots.len(),
                values.len()
            )));
        }
        if knots.len() < 3 {
            return Err(Error::InvalidParams(
                "spline needs at least 3 knots".into(),
            ));
        }
        if knots.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidParams(
                "spline knots must be strictly increasing".into(),
            ));
        }
        let n = knots.len();
        // Thomas solve of the tridiagonal system for second derivatives,
        // natural boundary conditions M_0 = M_{n-1} = 0.
        let mut sub = vec![0.0; n];
        let mut diag = vec![1.0; n];
        let mut sup = vec![0.0; n];
        let mut rhs = vec![0.0; n];
        for i in 1..n - 1 {
            let h0 = knots[i] - knots[i - 1];
            let h1 = knots[i + 1] - knots[i];
            sub[i] = h0 / 6.0;
            diag[i] = (h0 + h1) / 3.0;
            sup[i] = h1 / 6.0;
            rhs[i] = (values[i + 1] - values[i]) / h1 - (values[i] - values[i - 1]) / h0;
        }
        for i in 1..n {
            let w = sub[i] / diag[i - 1];
            diag[i] -= w * sup[i - 1];
            rhs[i] -= w * rhs[i - 1];
        }
        let mut second = vec![0.0; n];
        second[n - 1] = rhs[n - 1] / diag[n - 1];
        for i in (0..n - 1).rev() {
            second[i] = (rhs[i] - sup[i] * second[i + 1]) / diag[i];
        }
        Ok(CubicSpline {
            knots: knots.to_vec(),
            values: values.to_vec(),
            second,
        })
    }

    fn segment(&self, t: f64) -> usize {
        let n = self.knots.len();
        match self
            .knots
            .binary_search_by(|k| k.partial_cmp(&t).unwrap())
        {
            Ok(i) => i.min(n - 2),
            Err(0) => 0,
            Err(i) => (i - 1).min(n - 2),
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        let n = self.knots.len();
        if t <= self.knots[0] {
            return self.values[0] + self.boundary_slope(0) * (t - self.knots[0]);
        }
        if t >= self.knots[n - 1] {
            return self.values[n - 1] + self.boundary_slope(n - 1) * (t - self.knots[n - 1]);
        }
        let i = self.segment(t);
        let h = self.knots[i + 1] - self.knots[i];
        let a = (self.knots[i + 1] - t) / h;
        let b = (t - self.knots[i]) / h;
        a * self.values[i]
            + b * self.values[i + 1]
            + ((a * a * a - a) * self.second[i] + (b * b * b - b) * self.second[i + 1]) * h * h
                / 6.0
    }

    pub fn deriv(&self, t: f64) -> f64 {
        let n = self.knots.len();
        if t <= self.knots[0] {
            return self.boundary_slope(0);
        }
        if t >= self.knots[n - 1] {
            return self.boundary_slope(n - 1);
        }
        let i = self.segment(t);
        let h = self.knots[i + 1] - self.knots[i];
        let a = (self.knots[i + 1] - t) / h;
        let b = (t - self.knots[i]) / h;
        (self.values[i + 1] - self.values[i]) / h
            + ((3.0 * b * b - 1.0) * self.second[i + 1] - (3.0 * a * a - 1.0) * self.second[i]) * h
                / 6.0
    }

    fn boundary_slope(&self, i: usize) -> f64 {
        let n = self.knots.len();
        if i == 0 {
            let h = self.knots[1] - self.knots[0];
            (self.values[1] - self.values[0]) / h - h * self.second[1] / 6.0
        } else {
            let h = self.knots[n - 1] - self.knots[n - 2];
            (self.values[n - 1] - self.values[n - 2]) / h + h * self.second[n - 2] / 6.0
        }
    }
}
