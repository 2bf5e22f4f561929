//! Cross-validation harnesses: (a) the sharp-interface comparison between
//! the evolved field and the particle ODE, measured through half-level
//! crossing positions and off-collar L1 distance; (b) the supersolution
//! discrepancy I_e of the shifted ansatz, assembled pointwise with the time
//! derivative taken analytically through the ansatz (no time differencing).

use crate::corrector::CorrectorProfile;
use crate::error::{Error, Result};
use crate::evolution::EvolutionState;
use crate::frac_op::LsOperator;
use crate::grid::{GridFunction, TailModel};
use crate::layer::LayerProfile;
use crate::particles::{velocity, velocity_rate, ParticleState};
use crate::potential::PotentialSpec;
use crate::stress::StressField;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub epsilons: Vec<f64>,
    pub times: Vec<f64>,
    /// [epsilon index][time index] -> max_i |xi_i^e(t) - x_i(t)|
    pub crossing_errors: Vec<Vec<f64>>,
    /// [epsilon index][time index] -> L1 distance to the Heaviside profile
    /// outside the collars
    pub l1_bulk_errors: Vec<Vec<f64>>,
    /// crossing error at the final sample time strictly decreases as
    /// epsilon decreases
    pub monotone_in_epsilon: bool,
}

/// Locate the N half-level upcrossings (levels i - 1/2, i = 1..N) by
/// monotone linear interpolation between the bracketing grid points.
/// Leftmost bracket wins on ties. Exactly one crossing per level is
/// required; anything else is a topology error.
pub fn half_level_crossings(field: &GridFunction, n_layers: usize) -> Result<Vec<f64>> {
    let v = &field.values;
    let n = v.len();
    let mut out = Vec::with_capacity(n_layers);
    for i in 1..=n_layers {
        let level = i as f64 - 0.5;
        let mut found: Option<f64> = None;
        let mut count = 0usize;
        for j in 0..n - 1 {
            if v[j] < level && v[j + 1] >= level {
                count += 1;
                if found.is_none() {
                    let w = (level - v[j]) / (v[j + 1] - v[j]);
                    found = Some(field.x(j) + w * field.dx);
                }
            }
        }
        match (found, count) {
            (Some(x), 1) => out.push(x),
            _ => {
                return Err(Error::Topology(format!(
                    "expected 1 upcrossing of level {level}, found {count} \
                     (layers merged or window too small)"
                )))
            }
        }
    }
    Ok(out)
}

/// L1 distance between the field and sum_i H(x - x_i) outside the collars
/// |x - x_i| < kappa.
fn l1_off_collars(field: &GridFunction, positions: &[f64], kappa: f64) -> f64 {
    let mut acc = 0.0;
    for i in 0..field.n() {
        let x = field.x(i);
        if positions.iter().any(|&xi| (x - xi).abs() < kappa) {
            continue;
        }
        let heavy = positions.iter().filter(|&&xi| x > xi).count() as f64;
        acc += (field.values[i] - heavy).abs();
    }
    acc * field.dx
}

/// Compare evolution sample sets (one per epsilon) against the particle
/// trajectory at the same sample times.
pub fn compare_to_particles(
    epsilons: &[f64],
    runs: &[Vec<EvolutionState>],
    ode: &[ParticleState],
    kappa: f64,
) -> Result<ConvergenceReport> {
    if runs.len() != epsilons.len() || runs.is_empty() {
        return Err(Error::Argument("one evolution sample set per epsilon is required".into()));
    }
    if ode.is_empty() {
        return Err(Error::Argument("empty particle trajectory".into()));
    }
    let times: Vec<f64> = ode.iter().map(|st| st.time).collect();
    let n_layers = ode[0].positions.len();
    let mut crossing_errors = Vec::with_capacity(runs.len());
    let mut l1_bulk_errors = Vec::with_capacity(runs.len());
    for (run, &eps) in runs.iter().zip(epsilons) {
        if run.len() != ode.len() {
            return Err(Error::Argument(format!(
                "evolution run for epsilon = {eps} has {} samples, trajectory has {}",
                run.len(),
                ode.len()
            )));
        }
        let mut errs = Vec::with_capacity(run.len());
        let mut l1s = Vec::with_capacity(run.len());
        for (state, pstate) in run.iter().zip(ode) {
            if (state.time - pstate.time).abs() > 1e-9 * pstate.time.abs().max(1.0) {
                return Err(Error::Argument(format!(
                    "sample time mismatch: field at t = {}, particles at t = {}",
                    state.time, pstate.time
                )));
            }
            let xi = half_level_crossings(&state.field, n_layers)?;
            let err = xi
                .iter()
                .zip(&pstate.positions)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0f64, f64::max);
            errs.push(err);
            l1s.push(l1_off_collars(&state.field, &pstate.positions, kappa));
        }
        crossing_errors.push(errs);
        l1_bulk_errors.push(l1s);
    }
    let last = times.len() - 1;
    let monotone = crossing_errors.windows(2).all(|w| w[1][last] < w[0][last]);
    Ok(ConvergenceReport {
        epsilons: epsilons.to_vec(),
        times,
        crossing_errors,
        l1_bulk_errors,
        monotone_in_epsilon: monotone,
    })
}

#[derive(Debug, Clone)]
pub struct SupersolutionReport {
    pub epsilon: f64,
    pub delta: f64,
    pub grid_min_i: f64,
    pub i_field: GridFunction,
    /// named diagnostic extrema; region split at |x - xbar_i| = epsilon^g
    /// with g = (theta - 2s)/(2 theta)
    pub error_terms: BTreeMap<String, f64>,
}

/// Assemble the shifted supersolution ansatz at particle state `bar` (the
/// delta-shifted trajectory at time t) and evaluate the discrepancy
///
///   I_e = e (vbar)_t + e^{-2s} W'(vbar) - L_s vbar - sigma
///
/// on the window of `grid`. The time derivative is exact through the ansatz.
#[allow(clippy::too_many_arguments)]
pub fn supersolution_discrepancy(
    layer: &LayerProfile,
    corrector: &CorrectorProfile,
    p: &PotentialSpec,
    sigma: &StressField,
    bar: &ParticleState,
    epsilon: f64,
    x_min: f64,
    x_max: f64,
    dx: f64,
) -> Result<SupersolutionReport> {
    if !(bar.delta > 0.0) {
        return Err(Error::Config("supersolution needs delta > 0".into()));
    }
    if !(epsilon > 0.0 && dx > 0.0 && x_max > x_min) {
        return Err(Error::Argument("bad supersolution grid".into()));
    }
    let s = layer.s.s;
    let two_s = 2.0 * s;
    let beta = layer.beta;
    let delta = bar.delta;
    let t = bar.time;
    let eps2s = epsilon.powf(two_s);

    let cbar = velocity(bar, sigma)?;
    let cdot = velocity_rate(bar, sigma)?;

    // psi' on the corrector grid (zero tail keeps the edges harmless)
    let psi = &corrector.psi;
    let dpsi_vals: Vec<f64> = {
        let v = &psi.values;
        let n = v.len();
        (0..n)
            .map(|i| {
                let at = |k: isize| -> f64 {
                    if k < 0 || k as usize >= n {
                        0.0
                    } else {
                        v[k as usize]
                    }
                };
                let i = i as isize;
                (-at(i + 2) + 8.0 * at(i + 1) - 8.0 * at(i - 1) + at(i - 2)) / (12.0 * psi.dx)
            })
            .collect()
    };
    let dpsi = GridFunction::with_stitch_tol(psi.x_min, psi.dx, dpsi_vals, TailModel::zero(), 10.0)?;

    let n = ((x_max - x_min) / dx).round() as usize + 1;
    let n_layers = bar.positions.len();
    let sigma_tilde = |tt: f64, x: f64| (delta + sigma.eval(tt, x)) / beta;
    let sigma_tilde_t = |tt: f64, x: f64| sigma.eval_dt(tt, x) / beta;

    let mut vbar = Vec::with_capacity(n);
    let mut vbar_t = Vec::with_capacity(n);
    for i in 0..n {
        let x = x_min + i as f64 * dx;
        let mut v = eps2s * sigma_tilde(t, x);
        let mut vt = eps2s * sigma_tilde_t(t, x);
        for (j, &xj) in bar.positions.iter().enumerate() {
            let z = (x - xj) / epsilon;
            v += layer.u_at(z) - eps2s * cbar[j] * psi.eval(z);
            vt += -layer.du_at(z) * cbar[j] / epsilon - eps2s * cdot[j] * psi.eval(z)
                + eps2s / epsilon * cbar[j] * cbar[j] * dpsi.eval(z);
        }
        vbar.push(v);
        vbar_t.push(vt);
    }

    // far field: constant sigma-tilde offset plus the superposed layer tails
    let left = eps2s * sigma_tilde(t, x_min - 1.0);
    let right = n_layers as f64 + eps2s * sigma_tilde(t, x_max + 1.0);
    let coeff = n_layers as f64 * eps2s * layer.u.tail.decay_coefficient;
    let tail = TailModel::layer_asymptotic(left, right, coeff, two_s)?;
    let vbar_f = GridFunction::with_stitch_tol(x_min, dx, vbar, tail, 0.5)?;
    let op = LsOperator::new(&vbar_f, layer.s)?;
    let ls = op.apply_values(&vbar_f.values, 0..n)?;

    let mut i_vals = Vec::with_capacity(n);
    for i in 0..n {
        let x = x_min + i as f64 * dx;
        let v = vbar_f.values[i];
        i_vals.push(
            epsilon * vbar_t[i] + epsilon.powf(-two_s) * p.w(v, 1) - ls[i] - sigma.eval(t, x),
        );
    }
    let grid_min_i = i_vals.iter().fold(f64::INFINITY, |m, &v| m.min(v));

    // diagnostics: near/far split mirrors the proof's region threshold
    let theta = crate::layer::theta_exponent(layer.s)?;
    let gamma_exp = (theta - two_s) / (2.0 * theta);
    let radius = epsilon.powf(gamma_exp);
    let mut near_min = f64::INFINITY;
    let mut far_min = f64::INFINITY;
    let mut vt_max: f64 = 0.0;
    for i in 0..n {
        let x = x_min + i as f64 * dx;
        let near = bar.positions.iter().any(|&xj| (x - xj).abs() < radius);
        if near {
            near_min = near_min.min(i_vals[i]);
        } else {
            far_min = far_min.min(i_vals[i]);
        }
        vt_max = vt_max.max(vbar_t[i].abs());
    }
    let mut error_terms = BTreeMap::new();
    error_terms.insert("delta".into(), delta);
    error_terms.insert("region_radius".into(), radius);
    error_terms.insert("min_I_near".into(), near_min);
    error_terms.insert("min_I_far".into(), far_min);
    error_terms.insert("max_abs_vbar_t".into(), vt_max);
    error_terms.insert(
        "max_abs_cbar".into(),
        cbar.iter().fold(0.0f64, |m, &c| m.max(c.abs())),
    );

    let i_field = GridFunction::with_stitch_tol(
        x_min,
        dx,
        i_vals,
        TailModel::constant_limits(delta, delta),
        10.0,
    )?;
    Ok(SupersolutionReport { epsilon, delta, grid_min_i, i_field, error_terms })
}
