//! Grid functions: values on a uniform 1-D grid plus an analytic tail model
//! describing the function beyond the computational window. The nonlocal
//! operator integrates over the whole line, so the tail is part of the data,
//! not an afterthought.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Fractional order s of the operator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FracOrder {
    pub s: f64,
}

impl FracOrder {
    /// Model range: the paper's regime is s in (0, 1/2).
    pub fn new_model(s: f64) -> Result<Self> {
        if !(s > 0.0 && s < 0.5) {
            return Err(Error::Argument(format!("s = {s} outside model range (0, 1/2)")));
        }
        Ok(FracOrder { s })
    }

    /// Operator range: the quadrature itself is valid for s in (0, 1),
    /// used by spectral self-tests.
    pub fn new_operator(s: f64) -> Result<Self> {
        if !(s > 0.0 && s < 1.0) {
            return Err(Error::Argument(format!("s = {s} outside operator range (0, 1)")));
        }
        Ok(FracOrder { s })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TailKind {
    /// Function is 0 outside the window.
    Zero,
    /// Constant left/right limits outside the window.
    ConstantLimits,
    /// limit -+ coefficient*|x|^{-exponent}: approaches the right limit from
    /// below and the left limit from above (monotone transition layers).
    LayerAsymptotic,
    /// limit + coefficient*|x|^{-exponent} on both sides (derivative bumps).
    EvenDecay,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailModel {
    pub kind: TailKind,
    pub left_limit: f64,
    pub right_limit: f64,
    pub decay_coefficient: f64,
    pub decay_exponent: f64,
}

impl TailModel {
    pub fn zero() -> Self {
        TailModel {
            kind: TailKind::Zero,
            left_limit: 0.0,
            right_limit: 0.0,
            decay_coefficient: 0.0,
            decay_exponent: 1.0,
        }
    }

    pub fn constant_limits(left: f64, right: f64) -> Self {
        TailModel {
            kind: TailKind::ConstantLimits,
            left_limit: left,
            right_limit: right,
            decay_coefficient: 0.0,
            decay_exponent: 1.0,
        }
    }

    pub fn layer_asymptotic(left: f64, right: f64, coeff: f64, exponent: f64) -> Result<Self> {
        if exponent <= 0.0 {
            return Err(Error::Argument(format!("tail exponent {exponent} must be > 0")));
        }
        Ok(TailModel {
            kind: TailKind::LayerAsymptotic,
            left_limit: left,
            right_limit: right,
            decay_coefficient: coeff,
            decay_exponent: exponent,
        })
    }

    pub fn even_decay(left: f64, right: f64, coeff: f64, exponent: f64) -> Result<Self> {
        if exponent <= 0.0 {
            return Err(Error::Argument(format!("tail exponent {exponent} must be > 0")));
        }
        Ok(TailModel {
            kind: TailKind::EvenDecay,
            left_limit: left,
            right_limit: right,
            decay_coefficient: coeff,
            decay_exponent: exponent,
        })
    }

    /// Power tails are anchored at the origin, so they are only meaningful
    /// for windows that straddle 0.
    pub fn has_power_part(&self) -> bool {
        matches!(self.kind, TailKind::LayerAsymptotic | TailKind::EvenDecay)
            && self.decay_coefficient != 0.0
    }

    /// Evaluate the tail left of the window; x must satisfy x < 0 for power
    /// tails (callers guarantee this via window validation).
    pub fn eval_left(&self, x: f64) -> f64 {
        match self.kind {
            TailKind::Zero => 0.0,
            TailKind::ConstantLimits => self.left_limit,
            TailKind::LayerAsymptotic | TailKind::EvenDecay => {
                self.left_limit + self.decay_coefficient * x.abs().powf(-self.decay_exponent)
            }
        }
    }

    /// Evaluate the tail right of the window; x > 0 for power tails.
    pub fn eval_right(&self, x: f64) -> f64 {
        match self.kind {
            TailKind::Zero => 0.0,
            TailKind::ConstantLimits => self.right_limit,
            TailKind::LayerAsymptotic => {
                self.right_limit - self.decay_coefficient * x.abs().powf(-self.decay_exponent)
            }
            TailKind::EvenDecay => {
                self.right_limit + self.decay_coefficient * x.abs().powf(-self.decay_exponent)
            }
        }
    }
}

/// Real function sampled on a uniform grid with an analytic tail outside.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridFunction {
    pub x_min: f64,
    pub dx: f64,
    pub values: Vec<f64>,
    pub tail: TailModel,
    /// Relative mismatch allowed between the tail model and the stored edge
    /// values. Loose by default; profiles with slowly decaying tails widen it.
    pub stitch_tol: f64,
}

impl GridFunction {
    pub fn new(x_min: f64, dx: f64, values: Vec<f64>, tail: TailModel) -> Result<Self> {
        Self::with_stitch_tol(x_min, dx, values, tail, 1e-3)
    }

    pub fn with_stitch_tol(
        x_min: f64,
        dx: f64,
        values: Vec<f64>,
        tail: TailModel,
        stitch_tol: f64,
    ) -> Result<Self> {
        if !(dx > 0.0 && dx.is_finite() && x_min.is_finite()) {
            return Err(Error::Argument(format!("bad grid spec: x_min = {x_min}, dx = {dx}")));
        }
        if values.len() < 3 {
            return Err(Error::Argument(format!(
                "grid needs at least 3 points, got {}",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("grid values must be finite".into()));
        }
        let g = GridFunction { x_min, dx, values, tail, stitch_tol };
        if g.tail.has_power_part() && !(g.x_min < 0.0 && g.x_max() > 0.0) {
            return Err(Error::Config(
                "power-law tails require a window straddling 0".into(),
            ));
        }
        g.check_stitching()?;
        Ok(g)
    }

    fn check_stitching(&self) -> Result<()> {
        if matches!(self.tail.kind, TailKind::Zero) && self.stitch_tol >= 1.0 {
            return Ok(());
        }
        let scale = self
            .values
            .iter()
            .fold(0.0f64, |m, v| m.max(v.abs()))
            .max(1e-300);
        let lm = (self.tail.eval_left(self.x_min) - self.values[0]).abs();
        let rm = (self.tail.eval_right(self.x_max()) - self.values[self.values.len() - 1]).abs();
        if lm > self.stitch_tol * scale || rm > self.stitch_tol * scale {
            return Err(Error::Config(format!(
                "tail model does not stitch to the grid edges \
                 (left mismatch {:.3e}, right mismatch {:.3e}, scale {:.3e}, tol {:.1e})",
                lm, rm, scale, self.stitch_tol
            )));
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.values.len()
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x_min + i as f64 * self.dx
    }

    pub fn x_max(&self) -> f64 {
        self.x(self.values.len() - 1)
    }

    pub fn grids_match(&self, other: &GridFunction) -> bool {
        self.n() == other.n()
            && (self.x_min - other.x_min).abs() < 1e-12 * (1.0 + self.x_min.abs())
            && (self.dx - other.dx).abs() < 1e-12 * self.dx
    }

    /// Evaluate anywhere: linear interpolation inside the window, tail model
    /// outside.
    pub fn eval(&self, x: f64) -> f64 {
        if x < self.x_min {
            return self.tail.eval_left(x);
        }
        if x > self.x_max() {
            return self.tail.eval_right(x);
        }
        let t = (x - self.x_min) / self.dx;
        let i = (t.floor() as usize).min(self.n() - 2);
        let w = t - i as f64;
        self.values[i] * (1.0 - w) + self.values[i + 1] * w
    }

    /// Cubic 4-point (Catmull-Rom style Lagrange) interpolation; falls back
    /// to eval() near the edges and in the tails.
    pub fn eval_cubic(&self, x: f64) -> f64 {
        let t = (x - self.x_min) / self.dx;
        if t < 1.0 || t > (self.n() - 2) as f64 {
            return self.eval(x);
        }
        let i = (t.floor() as usize).clamp(1, self.n() - 3);
        let w = t - i as f64;
        let (a, b, c, d) = (
            self.values[i - 1],
            self.values[i],
            self.values[i + 1],
            self.values[i + 2],
        );
        // Lagrange cubic through nodes -1, 0, 1, 2 evaluated at w
        let wm = w - 1.0;
        let wp = w + 1.0;
        let w2 = w - 2.0;
        -a * w * wm * w2 / 6.0 + b * wp * wm * w2 / 2.0 - c * wp * w * w2 / 2.0
            + d * wp * w * wm / 6.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frac_order_ranges() {
        assert!(FracOrder::new_model(0.25).is_ok());
        assert!(FracOrder::new_model(0.5).is_err());
        assert!(FracOrder::new_operator(0.75).is_ok());
        assert!(FracOrder::new_operator(1.0).is_err());
    }

    #[test]
    fn stitching_enforced() {
        let vals = vec![0.0, 0.5, 1.0];
        // constant-limits tail 0/1 matches the edges exactly
        assert!(GridFunction::new(-1.0, 1.0, vals.clone(), TailModel::constant_limits(0.0, 1.0))
            .is_ok());
        // a grossly wrong tail is rejected
        assert!(GridFunction::new(-1.0, 1.0, vals, TailModel::constant_limits(5.0, 5.0)).is_err());
    }

    #[test]
    fn power_tail_requires_straddling_window() {
        let tail = TailModel::layer_asymptotic(0.0, 1.0, 2.0, 0.5).unwrap();
        let vals = vec![0.9, 0.95, 1.0];
        assert!(GridFunction::new(10.0, 1.0, vals, tail).is_err());
    }

    #[test]
    fn eval_inside_and_outside() {
        let tail = TailModel::constant_limits(-3.0, 7.0);
        let g = GridFunction::new(0.0, 0.5, vec![-3.0, 1.0, 7.0], tail).unwrap();
        assert_eq!(g.eval(-10.0), -3.0);
        assert_eq!(g.eval(10.0), 7.0);
        assert!((g.eval(0.25) - (-1.0)).abs() < 1e-14);
        assert_eq!(g.eval(1.0), 7.0);
    }

    #[test]
    fn cubic_reproduces_cubics() {
        let f = |x: f64| 0.3 * x * x * x - x + 2.0;
        let n = 21;
        let vals: Vec<f64> = (0..n).map(|i| f(-1.0 + 0.1 * i as f64)).collect();
        let g = GridFunction::with_stitch_tol(
            -1.0,
            0.1,
            vals,
            TailModel::constant_limits(f(-1.0), f(1.0)),
            1.0,
        )
        .unwrap();
        for &x in &[-0.55, -0.13, 0.0, 0.42, 0.87] {
            assert!((g.eval_cubic(x) - f(x)).abs() < 1e-12, "x = {x}");
        }
    }

    #[test]
    fn layer_tail_signs() {
        let tail = TailModel::layer_asymptotic(0.0, 1.0, 2.0, 0.5).unwrap();
        assert!(tail.eval_right(100.0) < 1.0);
        assert!(tail.eval_left(-100.0) > 0.0);
        let even = TailModel::even_decay(0.0, 0.0, 2.0, 1.5).unwrap();
        assert!(even.eval_right(100.0) > 0.0);
        assert!(even.eval_left(-100.0) > 0.0);
    }
}
