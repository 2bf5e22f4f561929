//! External stress fields sigma(t, x): bounded, uniformly continuous, with
//! |sigma|, |sigma_x|, |sigma_t| <= M on the simulated domain. The builtin
//! smooth field is a * sin(k_x x + phase) * cos(omega_t t); tabulated fields
//! are piecewise linear in x and constant in t.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StressKind {
    Zero,
    Constant,
    SmoothBuiltin,
    Tabulated,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StressField {
    pub kind: StressKind,
    /// constant value, or amplitude of the builtin field
    pub amplitude: f64,
    pub k_x: f64,
    pub omega_t: f64,
    pub phase: f64,
    /// tabulated samples (x_min, dx, values); linear in x, frozen in t
    pub table_x_min: f64,
    pub table_dx: f64,
    pub table: Vec<f64>,
    /// the uniform bound M on |sigma|, |sigma_x|, |sigma_t|
    pub lipschitz_bound: f64,
}

impl StressField {
    pub fn zero() -> Self {
        StressField {
            kind: StressKind::Zero,
            amplitude: 0.0,
            k_x: 0.0,
            omega_t: 0.0,
            phase: 0.0,
            table_x_min: 0.0,
            table_dx: 1.0,
            table: Vec::new(),
            lipschitz_bound: 0.0,
        }
    }

    pub fn constant(c: f64) -> Result<Self> {
        if !c.is_finite() {
            return Err(Error::Argument("constant stress must be finite".into()));
        }
        Ok(StressField { kind: StressKind::Constant, amplitude: c, lipschitz_bound: c.abs(), ..Self::zero() })
    }

    pub fn smooth_builtin(amplitude: f64, k_x: f64, omega_t: f64, phase: f64) -> Result<Self> {
        if ![amplitude, k_x, omega_t, phase].iter().all(|v| v.is_finite()) {
            return Err(Error::Argument("stress parameters must be finite".into()));
        }
        let m = amplitude.abs() * 1.0f64.max(k_x.abs()).max(omega_t.abs());
        Ok(StressField {
            kind: StressKind::SmoothBuiltin,
            amplitude,
            k_x,
            omega_t,
            phase,
            lipschitz_bound: m,
            ..Self::zero()
        })
    }

    pub fn tabulated(x_min: f64, dx: f64, values: Vec<f64>) -> Result<Self> {
        if !(dx > 0.0) || values.len() < 2 || values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Argument("tabulated stress needs dx > 0 and >= 2 finite samples".into()));
        }
        let vmax = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let slope = values.windows(2).map(|w| (w[1] - w[0]).abs() / dx).fold(0.0f64, f64::max);
        Ok(StressField {
            kind: StressKind::Tabulated,
            table_x_min: x_min,
            table_dx: dx,
            table: values,
            lipschitz_bound: vmax.max(slope),
            ..Self::zero()
        })
    }

    pub fn eval(&self, t: f64, x: f64) -> f64 {
        match self.kind {
            StressKind::Zero => 0.0,
            StressKind::Constant => self.amplitude,
            StressKind::SmoothBuiltin => {
                self.amplitude * (self.k_x * x + self.phase).sin() * (self.omega_t * t).cos()
            }
            StressKind::Tabulated => {
                let n = self.table.len();
                let u = (x - self.table_x_min) / self.table_dx;
                if u <= 0.0 {
                    return self.table[0];
                }
                if u >= (n - 1) as f64 {
                    return self.table[n - 1];
                }
                let i = u.floor() as usize;
                let w = u - i as f64;
                self.table[i] * (1.0 - w) + self.table[i + 1] * w
            }
        }
    }

    pub fn eval_dx(&self, t: f64, x: f64) -> f64 {
        match self.kind {
            StressKind::Zero | StressKind::Constant => 0.0,
            StressKind::SmoothBuiltin => {
                self.amplitude * self.k_x * (self.k_x * x + self.phase).cos() * (self.omega_t * t).cos()
            }
            StressKind::Tabulated => {
                let n = self.table.len();
                let u = (x - self.table_x_min) / self.table_dx;
                if u <= 0.0 || u >= (n - 1) as f64 {
                    return 0.0;
                }
                let i = u.floor() as usize;
                (self.table[i + 1] - self.table[i]) / self.table_dx
            }
        }
    }

    pub fn eval_dt(&self, t: f64, x: f64) -> f64 {
        match self.kind {
            StressKind::Zero | StressKind::Constant | StressKind::Tabulated => 0.0,
            StressKind::SmoothBuiltin => {
                -self.amplitude * self.omega_t * (self.k_x * x + self.phase).sin() * (self.omega_t * t).sin()
            }
        }
    }

    /// Sample |sigma|, |sigma_x|, |sigma_t| over a space-time box and check
    /// they stay within the recorded bound.
    pub fn verify_bounds(&self, x_range: (f64, f64), t_range: (f64, f64)) -> Result<()> {
        let m = self.lipschitz_bound * (1.0 + 1e-12) + 1e-15;
        let samples = 257;
        for it in 0..samples {
            let t = t_range.0 + (t_range.1 - t_range.0) * it as f64 / (samples - 1) as f64;
            for ix in 0..samples {
                let x = x_range.0 + (x_range.1 - x_range.0) * ix as f64 / (samples - 1) as f64;
                let vals = [self.eval(t, x), self.eval_dx(t, x), self.eval_dt(t, x)];
                for v in vals {
                    if !v.is_finite() || v.abs() > m {
                        return Err(Error::Numeric(format!(
                            "stress bound violated at (t, x) = ({t}, {x}): |{v:.3e}| > {m:.3e}"
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_values_and_bounds() {
        let s = StressField::smooth_builtin(0.3, 2.0, 1.5, 0.1).unwrap();
        assert!((s.eval(0.0, 0.0) - 0.3 * 0.1f64.sin()).abs() < 1e-15);
        assert!((s.lipschitz_bound - 0.6).abs() < 1e-15);
        s.verify_bounds((-50.0, 50.0), (0.0, 10.0)).unwrap();
        // finite-difference agreement of the analytic derivatives
        let (t, x, h) = (0.7, 1.3, 1e-6);
        let fd_x = (s.eval(t, x + h) - s.eval(t, x - h)) / (2.0 * h);
        let fd_t = (s.eval(t + h, x) - s.eval(t - h, x)) / (2.0 * h);
        assert!((fd_x - s.eval_dx(t, x)).abs() < 1e-8);
        assert!((fd_t - s.eval_dt(t, x)).abs() < 1e-8);
    }

    #[test]
    fn tabulated_interpolation_and_clamping() {
        let s = StressField::tabulated(-1.0, 1.0, vec![0.0, 2.0, 1.0]).unwrap();
        assert!((s.eval(0.0, -0.5) - 1.0).abs() < 1e-15);
        assert!((s.eval(5.0, -3.0) - 0.0).abs() < 1e-15);
        assert!((s.eval(0.0, 9.0) - 1.0).abs() < 1e-15);
        assert!((s.lipschitz_bound - 2.0).abs() < 1e-15);
        s.verify_bounds((-10.0, 10.0), (0.0, 1.0)).unwrap();
    }

    #[test]
    fn zero_and_constant() {
        let z = StressField::zero();
        assert_eq!(z.eval(3.0, -7.0), 0.0);
        let c = StressField::constant(-0.25).unwrap();
        assert_eq!(c.eval(1.0, 1.0), -0.25);
        assert_eq!(c.eval_dx(1.0, 1.0), 0.0);
        assert!(StressField::constant(f64::NAN).is_err());
    }
}
