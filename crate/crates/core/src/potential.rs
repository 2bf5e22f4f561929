//! The 1-periodic multi-well potential W and its derivatives.
//!
//! The default potential is W(v) = (1 - cos 2πv)/(4π²), which vanishes at the
//! integers, is positive elsewhere, and has curvature W''(0) = 1.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

pub const TWO_PI: f64 = 2.0 * PI;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PotentialKind {
    BuiltinCosine,
    UserPolynomialOfCosines,
}

/// 1-periodic potential W(v) = Σ_m c_m (1 - cos(2πmv)).
///
/// The builtin case is the single term c_1 = 1/(4π²). User potentials are a
/// finite cosine series; positivity off the integers is certified by dense
/// sampling at construction, not symbolically.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PotentialSpec {
    pub kind: PotentialKind,
    /// Series coefficients c_1..c_M.
    pub coefficients: Vec<f64>,
    /// W''(0), the paper's beta.
    pub curvature_at_zero: f64,
}

impl PotentialSpec {
    pub fn builtin_cosine() -> Self {
        let c = 1.0 / (4.0 * PI * PI);
        PotentialSpec {
            kind: PotentialKind::BuiltinCosine,
            coefficients: vec![c],
            curvature_at_zero: 1.0,
        }
    }

    /// Build a user potential from cosine-series coefficients, verifying the
    /// structural assumptions (positivity off integers, W''(0) > 0) by
    /// sampling 10^5 points per period.
    pub fn user_cosine_series(coefficients: Vec<f64>) -> Result<Self> {
        if coefficients.is_empty() {
            return Err(Error::Config("potential needs at least one coefficient".into()));
        }
        if coefficients.iter().any(|c| !c.is_finite()) {
            return Err(Error::Config("potential coefficients must be finite".into()));
        }
        let beta: f64 = coefficients
            .iter()
            .enumerate()
            .map(|(i, c)| c * (TWO_PI * (i + 1) as f64).powi(2))
            .sum();
        if beta <= 0.0 {
            return Err(Error::Config(format!("W''(0) = {beta:.6e} must be positive")));
        }
        let spec = PotentialSpec {
            kind: PotentialKind::UserPolynomialOfCosines,
            coefficients,
            curvature_at_zero: beta,
        };
        let n = 100_000;
        for i in 1..n {
            let x = i as f64 / n as f64;
            let w = spec.eval(x, 0)?;
            // allow roundoff at the wells only
            if w <= 0.0 && x.min(1.0 - x) > 1e-9 {
                return Err(Error::Config(format!(
                    "potential not positive off the integers: W({x}) = {w:.6e}"
                )));
            }
        }
        Ok(spec)
    }

    pub fn beta(&self) -> f64 {
        self.curvature_at_zero
    }

    /// W and derivatives: order 0..3 selects W, W', W'', W'''.
    /// Periodic with period 1 in exact arithmetic of the series.
    pub fn eval(&self, x: f64, order: u32) -> Result<f64> {
        if order > 3 {
            return Err(Error::Argument(format!("derivative order {order} not in 0..3")));
        }
        let mut acc = 0.0;
        for (i, c) in self.coefficients.iter().enumerate() {
            let om = TWO_PI * (i + 1) as f64;
            let ph = om * x;
            acc += c * match order {
                0 => 1.0 - ph.cos(),
                1 => om * ph.sin(),
                2 => om * om * ph.cos(),
                3 => -om * om * om * ph.sin(),
                _ => unreachable!(),
            };
        }
        Ok(acc)
    }

    /// Panicking convenience for hot loops where order is statically valid.
    pub fn w(&self, x: f64, order: u32) -> f64 {
        debug_assert!(order <= 3);
        self.eval(x, order).expect("order in 0..3")
    }

    /// max |W''| over one period, used for reaction CFL bounds.
    pub fn max_abs_w2(&self) -> f64 {
        let n = 4096;
        (0..n)
            .map(|i| self.w(i as f64 / n as f64, 2).abs())
            .fold(0.0, f64::max)
    }
}
