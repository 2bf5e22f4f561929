//! The linear corrector psi around the layer profile:
//!
//!   L_s psi - W''(u) psi = u' + eta (W''(u) - W''(0)),
//!
//! the first-order shape deformation of a slowly translating layer. The
//! linearized operator A = L_s - W''(u) is symmetric with a one-dimensional
//! near-kernel spanned by u' (translation invariance); on a finite window
//! the boundary breaks the invariance and the system becomes invertible, so
//! it is solved unconstrained by conjugate gradients on the normal
//! equations and the solution is then pinned by the gauge <psi, u'> = 0.
//! The gauge is a choice, recorded in all output headers.

use crate::error::{Error, Result};
use crate::frac_op::LsOperator;
use crate::grid::{FracOrder, GridFunction, TailModel};
use crate::layer::LayerProfile;
use crate::potential::PotentialSpec;

/// Gauge string recorded in archives and reports.
pub const CORRECTOR_GAUGE: &str = "<psi, u'> = 0";

#[derive(Debug, Clone)]
pub struct CorrectorProfile {
    /// psi on the layer grid with a fitted even power-decay tail; the decay
    /// is slow (a blend of |x|^{-1-2s} and |x|^{-4s}), so the edge values
    /// are not small and the tail model matters.
    pub psi: GridFunction,
    pub s: FracOrder,
    /// eta actually used in the right-hand side, computed from the
    /// window-truncated integrals so the Fredholm compatibility <g, u'> = 0
    /// holds discretely; tends to the layer's eta as the window grows.
    pub eta: f64,
    /// dx * <g, u'> for the right-hand side built with the layer's eta;
    /// vanishes for the exact problem, so this measures window truncation.
    pub solvability_defect: f64,
    /// dx * <psi, u'> after the final gauge projection.
    pub orthogonality_defect: f64,
    /// ||L_s psi - W''(u) psi - g||_2 (dx-weighted) on the interior of the
    /// window (an edge collar of max(window/16, 6) is excluded).
    pub residual_norm: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn solve_corrector(
    layer: &LayerProfile,
    p: &PotentialSpec,
    tol: f64,
) -> Result<CorrectorProfile> {
    if layer.residual_norm > 1e-5 {
        return Err(Error::Argument(format!(
            "layer profile not converged enough for the corrector \
             (residual {:.3e} > 1e-5)",
            layer.residual_norm
        )));
    }
    if tol <= 0.0 {
        return Err(Error::Argument("tolerance must be positive".into()));
    }
    let g_u = &layer.u;
    let n = g_u.n();
    let dx = g_u.dx;
    let x_min = g_u.x_min;
    let beta = layer.beta;

    // Right-hand side g = u' + eta (W''(u) - W''(0)). On the full line
    // <g, u'> = 0 exactly with eta = int(u')^2 / beta, but the window
    // truncates int u' dx to u(R) - u(L) < 1 and these fat-tailed layers
    // leave an O(x_half^{-2s}) deficit. A least-squares solve cannot remove
    // the incompatible component along the translation kernel, so eta is
    // recomputed from the same truncated integrals, which restores
    // <g, u'> = 0 on the window and converges to the layer's eta as the
    // window grows. The layer-eta defect is still reported.
    let w2: Vec<f64> = g_u.values.iter().map(|&v| p.w(v, 2)).collect();
    let du = &layer.du.values;
    let m_int: f64 = (0..n).map(|i| (w2[i] - beta) * du[i]).sum();
    if m_int.abs() < 1e-300 {
        return Err(Error::Numeric(
            "degenerate compatibility integral in the corrector right-hand side".into(),
        ));
    }
    let eta_window = -dot(du, du) / m_int;
    let g_layer_eta: Vec<f64> =
        (0..n).map(|i| du[i] + layer.eta * (w2[i] - beta)).collect();
    let solvability_defect = dx * dot(&g_layer_eta, du);
    let g: Vec<f64> = (0..n).map(|i| du[i] + eta_window * (w2[i] - beta)).collect();

    // Matrix-free operator with the iterate extended by zero outside the
    // window; psi gets its real (fitted) tail model after the solve.
    let zero = GridFunction::with_stitch_tol(x_min, dx, vec![0.0; n], TailModel::zero(), 10.0)?;
    let op = LsOperator::new(&zero, layer.s)?;
    let apply_a = |x: &[f64]| -> Result<Vec<f64>> {
        let ls = op.apply_values(x, 0..n)?;
        Ok((0..n).map(|i| ls[i] - w2[i] * x[i]).collect())
    };

    // The windowed system is invertible (the boundary breaks translation
    // invariance), so solve it without constraints by conjugate gradients on
    // the normal equations, then gauge afterwards. The iteration is run to
    // near machine precision; it is cheap next to the layer relaxation.
    let apply_b = |x: &[f64]| -> Result<Vec<f64>> { apply_a(&apply_a(x)?) };
    let b = apply_a(&g)?;
    let b_norm = dot(&b, &b).sqrt().max(1e-300);
    let mut psi = vec![0.0; n];
    let mut r = b.clone();
    let mut d = r.clone();
    let mut rr = dot(&r, &r);
    let target = 1e-13 * b_norm;
    let max_iters = 20_000;
    let mut iters = 0;
    while rr.sqrt() > target && iters < max_iters {
        let bd = apply_b(&d)?;
        let alpha = rr / dot(&d, &bd).max(1e-300);
        for i in 0..n {
            psi[i] += alpha * d[i];
            r[i] -= alpha * bd[i];
        }
        let rr_new = dot(&r, &r);
        let beta_cg = rr_new / rr;
        for i in 0..n {
            d[i] = r[i] + beta_cg * d[i];
        }
        rr = rr_new;
        iters += 1;
    }

    // Gauge: subtract the u' component. Any multiple of u' can be added to a
    // solution in the continuum; discretely the subtracted part carries u''s
    // power tail with it, so psi inherits -c_gauge times that tail and the
    // residual is measured with the tail in place.
    let vv = dot(du, du);
    let c_gauge = dot(&psi, du) / vv;
    for (xi, &di) in psi.iter_mut().zip(du) {
        *xi -= c_gauge * di;
    }
    let orthogonality_defect = dx * dot(&psi, du);

    let tail = TailModel::even_decay(
        0.0,
        0.0,
        -c_gauge * layer.du.tail.decay_coefficient,
        layer.du.tail.decay_exponent,
    )?;
    let psi_gf = GridFunction::with_stitch_tol(x_min, dx, psi, tail, 0.5)?;

    // Residual of the gauged solution with psi's tail model active, on the
    // interior: a collar at each window edge is excluded because the zero-
    // exterior solve and the power-tail interpretation disagree there by
    // construction.
    let op_psi = LsOperator::new(&psi_gf, layer.s)?;
    let ls = op_psi.apply_values(&psi_gf.values, 0..n)?;
    let x_half = 0.5 * (g_u.x_max() - x_min);
    let collar = ((x_half / 8.0).max(6.0) / dx).round() as usize;
    if 2 * collar + 8 > n {
        return Err(Error::Argument("window too narrow for the corrector collar".into()));
    }
    let resid2: f64 = (collar..n - collar)
        .map(|i| {
            let r = ls[i] - w2[i] * psi_gf.values[i] - g[i];
            r * r
        })
        .sum();
    let residual_norm = (dx * resid2).sqrt();
    if residual_norm > tol {
        return Err(Error::Convergence {
            message: format!(
                "corrector residual {residual_norm:.3e} above tolerance {tol:.1e} \
                 after {iters} CG iterations"
            ),
            residual: residual_norm,
        });
    }
    let psi = psi_gf;
    Ok(CorrectorProfile {
        psi,
        s: layer.s,
        eta: eta_window,
        solvability_defect,
        orthogonality_defect,
        residual_norm,
    })
}

impl CorrectorProfile {
    /// Linear interpolation with zero extension.
    pub fn psi_at(&self, x: f64) -> f64 {
        self.psi.eval(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layer::{solve_layer, LayerGrid};

    fn small_setup() -> (PotentialSpec, LayerProfile) {
        let p = PotentialSpec::builtin_cosine();
        let s = FracOrder::new_model(0.25).unwrap();
        let layer = solve_layer(&p, s, LayerGrid { x_half: 60.0, dx: 0.1 }, 1e-7).unwrap();
        (p, layer)
    }

    #[test]
    fn corrector_solves_and_is_gauged() {
        let (p, layer) = small_setup();
        let c = solve_corrector(&layer, &p, 1e-4).unwrap();
        assert!(c.residual_norm <= 1e-4);
        assert!(c.orthogonality_defect.abs() < 1e-8, "gauge defect {}", c.orthogonality_defect);
        let max = c.psi.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(max.is_finite() && max > 0.0);
        // psi decays slowly; the edges are not small but must stitch to the
        // gauge tail model
        let n = c.psi.n();
        assert!(c.psi.values[0].abs() < max);
        assert!((c.psi.values[0] - c.psi.tail.eval_left(c.psi.x_min)).abs() < 0.5 * max);
        assert!(c.psi.values[n - 1].abs() < max);
    }

    #[test]
    fn corrector_even_for_even_potential() {
        // u(x)+u(-x)=1 makes W''(u(x)) even and u' even, so the RHS and psi
        // are even about 0
        let (p, layer) = small_setup();
        let c = solve_corrector(&layer, &p, 1e-4).unwrap();
        let n = c.psi.n();
        let max = c.psi.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for i in 0..n {
            let dev = (c.psi.values[i] - c.psi.values[n - 1 - i]).abs();
            assert!(dev < 1e-6 * max.max(1.0), "evenness defect {dev} at i = {i}");
        }
    }

    #[test]
    fn compatibility_integral_small() {
        let (p, layer) = small_setup();
        let c = solve_corrector(&layer, &p, 1e-4).unwrap();
        // the layer-eta right-hand side misses exact cancellation of
        // int(u')^2 + eta([W'(u)] - beta) by the window truncation of int u';
        // the window eta restores it exactly
        assert!(c.solvability_defect.abs() < 2e-3, "defect {}", c.solvability_defect);
        assert!((c.eta - layer.eta).abs() < 0.2 * layer.eta, "eta {} vs {}", c.eta, layer.eta);
    }

    #[test]
    fn tol_scaling_is_stable() {
        // linear problem with a fixed gauge: solving at two tolerances gives
        // the same psi up to the looser tolerance
        let (p, layer) = small_setup();
        let a = solve_corrector(&layer, &p, 1e-3).unwrap();
        let b = solve_corrector(&layer, &p, 1e-4).unwrap();
        let dev = a
            .psi
            .values
            .iter()
            .zip(&b.psi.values)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0f64, f64::max);
        assert!(dev < 1e-4, "psi changed by {dev} under tolerance change");
    }

    #[test]
    fn rejects_unconverged_layer() {
        let (p, mut layer) = small_setup();
        layer.residual_norm = 1e-3;
        assert!(solve_corrector(&layer, &p, 1e-6).is_err());
    }
}
