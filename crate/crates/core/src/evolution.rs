//! The rescaled reaction-diffusion evolution
//!
//!   (v_e)_t = (1/e) (L_s v_e - e^{-2s} W'(v_e) + sigma(t, x)),
//!
//! started from the layered ansatz v_e(0, x) = (e^{2s}/beta) sigma(0, x)
//! + sum_i u((x - x_i)/e). The field approaches 0 (left) and N (right) only
//! like |x|^{-2s}, so the tail model carries the ansatz's own power decay
//! N c_u e^{2s} |x|^{-2s}; the maximum-principle sanity band
//! [-0.25, N + 0.25] is enforced every step and a violation aborts with an
//! instability error.

use crate::error::{Error, Result};
use crate::frac_op::LsOperator;
use crate::grid::{FracOrder, GridFunction, TailModel};
use crate::layer::LayerProfile;
use crate::potential::{PotentialKind, PotentialSpec};
use crate::stress::StressField;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    /// forward Euler in both terms
    Explicit,
    /// forward Euler in the nonlocal term, exact pointwise integration of
    /// the reaction ODE over the substep (relaxes the reaction CFL)
    ImexReaction,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct EvolutionConfig {
    pub dt_safety: f64,
    pub scheme: Scheme,
    pub x_min: f64,
    pub x_max: f64,
    pub dx: f64,
}

impl EvolutionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt_safety > 0.0 && self.dt_safety <= 1.0) {
            return Err(Error::Config(format!("dt_safety = {} outside (0, 1]", self.dt_safety)));
        }
        if !(self.dx > 0.0 && self.x_max > self.x_min) {
            return Err(Error::Config("evolution window is degenerate".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct EvolutionState {
    pub epsilon: f64,
    pub field: GridFunction,
    pub time: f64,
    pub n_layers: usize,
    pub config: EvolutionConfig,
}

/// Stitching slack for the field tails: the power part captures the leading
/// |x|^{-2s} approach to the limits, leaving preasymptotic corrections and
/// the moving-layer offsets at the edges.
const FIELD_STITCH_TOL: f64 = 0.2;

pub fn initial_condition(
    layer: &LayerProfile,
    sigma: &StressField,
    positions0: &[f64],
    epsilon: f64,
    config: EvolutionConfig,
) -> Result<EvolutionState> {
    config.validate()?;
    if positions0.is_empty() || positions0.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Config("initial positions must be nonempty and sorted".into()));
    }
    if !(epsilon > 0.0) {
        return Err(Error::Config(format!("epsilon = {epsilon} must be positive")));
    }
    if config.dx > epsilon / 8.0 {
        return Err(Error::Config(format!(
            "dx = {} does not resolve the layer width (need dx <= epsilon/8 = {})",
            config.dx,
            epsilon / 8.0
        )));
    }
    let n_layers = positions0.len();
    let margin = 20.0;
    if config.x_min > positions0[0] - margin || config.x_max < positions0[n_layers - 1] + margin {
        return Err(Error::Config(format!(
            "window [{}, {}] must cover the layers with a +-{margin} margin",
            config.x_min, config.x_max
        )));
    }
    let two_s = 2.0 * layer.s.s;
    let beta = layer.beta;
    let n = ((config.x_max - config.x_min) / config.dx).round() as usize + 1;
    let values: Vec<f64> = (0..n)
        .map(|i| {
            let x = config.x_min + i as f64 * config.dx;
            let mut v = epsilon.powf(two_s) / beta * sigma.eval(0.0, x);
            for &xi in positions0 {
                v += layer.u_at((x - xi) / epsilon);
            }
            v
        })
        .collect();
    // limits carry the stress offset at the window edges (exact for
    // constant stress, edge-accurate otherwise)
    let off = epsilon.powf(two_s) / beta;
    let tail = TailModel::layer_asymptotic(
        off * sigma.eval(0.0, config.x_min),
        n_layers as f64 + off * sigma.eval(0.0, config.x_max),
        n_layers as f64 * layer.u.tail.decay_coefficient * epsilon.powf(two_s),
        two_s,
    )?;
    let field = GridFunction::with_stitch_tol(config.x_min, config.dx, values, tail, FIELD_STITCH_TOL)?;
    Ok(EvolutionState { epsilon, field, time: 0.0, n_layers, config })
}

/// Time stepper bound to one grid geometry; rebuilding the quadrature per
/// step would dominate the cost.
pub struct Evolver {
    p: PotentialSpec,
    op: LsOperator,
    s: FracOrder,
    scheme: Scheme,
    /// stable step from the measured operator weights and reaction stiffness
    pub dt: f64,
    epsilon: f64,
    n_layers: usize,
    builtin_reaction: bool,
}

impl Evolver {
    pub fn new(p: &PotentialSpec, s: FracOrder, state: &EvolutionState) -> Result<Self> {
        let op = LsOperator::new(&state.field, s)?;
        let eps = state.epsilon;
        let two_s = 2.0 * s.s;
        let lam_op = op.stability_bound() / eps;
        let lam_reac = p.max_abs_w2() / eps.powf(1.0 + two_s);
        let builtin_reaction = matches!(p.kind, PotentialKind::BuiltinCosine);
        let lam = match state.config.scheme {
            Scheme::Explicit => lam_op + lam_reac,
            Scheme::ImexReaction => {
                if !builtin_reaction {
                    return Err(Error::Config(
                        "imex-reaction needs the builtin potential (exact reaction map)".into(),
                    ));
                }
                lam_op
            }
        };
        let dt = state.config.dt_safety * 1.8 / lam;
        Ok(Evolver {
            p: p.clone(),
            op,
            s,
            scheme: state.config.scheme,
            dt,
            epsilon: eps,
            n_layers: state.n_layers,
            builtin_reaction,
        })
    }

    /// Right-hand side (1/e)(L_s v - e^{-2s} W'(v) + sigma) at the current
    /// time; exposed for stationarity diagnostics.
    pub fn rhs(&self, state: &EvolutionState, sigma: &StressField) -> Result<Vec<f64>> {
        let v = &state.field.values;
        let n = v.len();
        let ls = self.op.apply_values(v, 0..n)?;
        let eps = self.epsilon;
        let c_reac = eps.powf(-2.0 * self.s.s);
        Ok((0..n)
            .map(|i| {
                let x = state.field.x(i);
                (ls[i] - c_reac * self.p.w(v[i], 1) + sigma.eval(state.time, x)) / eps
            })
            .collect())
    }

    fn check_band(&self, values: &[f64], dt: f64, t: f64) -> Result<()> {
        let max = values.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        let min = values.iter().fold(f64::INFINITY, |m, &v| m.min(v));
        if !(min >= -0.25 && max <= self.n_layers as f64 + 0.25) || !max.is_finite() {
            return Err(Error::Instability { dt, max_value: max.abs().max(min.abs()), t });
        }
        Ok(())
    }

    /// One step of length min(dt, dt_cap).
    pub fn step_by(
        &self,
        state: &EvolutionState,
        sigma: &StressField,
        dt_cap: f64,
    ) -> Result<EvolutionState> {
        let dt = self.dt.min(dt_cap);
        let v = &state.field.values;
        let n = v.len();
        let eps = self.epsilon;
        let new_values: Vec<f64> = match self.scheme {
            Scheme::Explicit => {
                let r = self.rhs(state, sigma)?;
                (0..n).map(|i| v[i] + dt * r[i]).collect()
            }
            Scheme::ImexReaction => {
                let ls = self.op.apply_values(v, 0..n)?;
                let c = dt / eps.powf(1.0 + 2.0 * self.s.s);
                let decay = (-c).exp();
                (0..n)
                    .map(|i| {
                        let x = state.field.x(i);
                        let w = v[i] + dt / eps * (ls[i] + sigma.eval(state.time, x));
                        // exact flow of v_t = -e^{-1-2s} W'(v) for the
                        // builtin cosine well: tangent contraction toward
                        // the nearest integer
                        debug_assert!(self.builtin_reaction);
                        let nearest = w.round();
                        let t = (std::f64::consts::PI * (w - nearest)).tan() * decay;
                        nearest + t.atan() / std::f64::consts::PI
                    })
                    .collect()
            }
        };
        self.check_band(&new_values, dt, state.time + dt)?;
        let field = GridFunction::with_stitch_tol(
            state.field.x_min,
            state.field.dx,
            new_values,
            state.field.tail,
            FIELD_STITCH_TOL,
        )?;
        Ok(EvolutionState {
            epsilon: eps,
            field,
            time: state.time + dt,
            n_layers: state.n_layers,
            config: state.config,
        })
    }

    pub fn step(&self, state: &EvolutionState, sigma: &StressField) -> Result<EvolutionState> {
        self.step_by(state, sigma, f64::INFINITY)
    }
}

/// Evolve to t_end, returning snapshots at the requested sample times (and
/// always at t_end). Steps land exactly on sample times.
pub fn run(
    state: &EvolutionState,
    p: &PotentialSpec,
    s: FracOrder,
    sigma: &StressField,
    t_end: f64,
    sample_times: &[f64],
) -> Result<Vec<EvolutionState>> {
    if !(t_end > state.time) {
        return Err(Error::Argument(format!("t_end = {t_end} must exceed t = {}", state.time)));
    }
    let evolver = Evolver::new(p, s, state)?;
    let mut marks: Vec<f64> = sample_times
        .iter()
        .copied()
        .filter(|&t| t > state.time && t <= t_end)
        .collect();
    marks.push(t_end);
    marks.sort_by(|a, b| a.partial_cmp(b).unwrap());
    marks.dedup();

    let mut cur = state.clone();
    let mut out = Vec::with_capacity(marks.len());
    for target in marks {
        while cur.time < target - 1e-12 {
            cur = evolver.step_by(&cur, sigma, target - cur.time)?;
        }
        out.push(cur.clone());
    }
    Ok(out)
}
