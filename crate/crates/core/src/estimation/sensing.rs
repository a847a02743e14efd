//! Sensing path: closed-form channel inversion followed by Gauss–Newton refinement.

use nalgebra::{DMatrix, DVector, Matrix3, Rotation3, Vector3};
use serde::Serialize;

use super::fisher::response_jacobian;
use super::noise::{FrameSpec, NoiseModel};
use crate::error::{invalid, MiError, Result};
use crate::physics::{
    coil_constant, direction_angles, stack_real, symmetric_eigen_sorted, unit_direction,
    wrap_azimuth, CarrierSpec, ChannelMatrix, CoilSpec, LinkModel,
};

/// `‖G‖_F` for any unit direction.
pub const TENSOR_FROBENIUS_NORM: f64 = 2.449_489_742_783_178;

/// Minimum gap between the radial and first tangential eigenvalue of the
/// reconstructed tensor (the noiseless gap is 3).
pub const MIN_EIGENGAP: f64 = 1.0;

/// Range from the channel magnitude: `(C √6 / ‖H‖_F)^(1/3)`.
///
/// Orientation-free because `‖G‖_F` is rotation invariant. Assumes a lossless
/// medium or an estimate whose attenuation has been compensated.
pub fn estimate_range_closed_form(
    h_est: &ChannelMatrix,
    coil: &CoilSpec,
    carrier: &CarrierSpec,
) -> Result<f64> {
    if !h_est.is_tri_axial() {
        return Err(MiError::NotIdentifiable);
    }
    let norm = h_est.frobenius_norm();
    if !norm.is_finite() || norm <= f64::MIN_POSITIVE {
        return Err(MiError::ZeroChannel);
    }
    let c = coil_constant(coil, carrier);
    Ok((c * TENSOR_FROBENIUS_NORM / norm).cbrt())
}

/// Direction from the dominant eigenvector of the reconstructed coupling tensor.
///
/// `G` is even in `r̂`, so the sign is resolved toward `hemisphere_prior`.
/// Only the real part of the estimate is used.
pub fn estimate_direction_eigen(
    h_est: &ChannelMatrix,
    orientations: (&Rotation3<f64>, &Rotation3<f64>),
    coil: &CoilSpec,
    carrier: &CarrierSpec,
    range_est: f64,
    hemisphere_prior: &Vector3<f64>,
) -> Result<(f64, f64)> {
    if !h_est.is_tri_axial() {
        return Err(MiError::NotIdentifiable);
    }
    if !(range_est.is_finite() && range_est > 0.0) {
        return Err(MiError::NonFiniteGeometry { range_m: range_est });
    }
    let (tx, rx) = orientations;
    let h = Matrix3::from_fn(|i, j| h_est.entries()[(i, j)].re);
    let scale = range_est.powi(3) / coil_constant(coil, carrier);
    let g = scale * rx.matrix() * h * tx.matrix().transpose();
    let g_sym = 0.5 * (g + g.transpose());
    let modes = symmetric_eigen_sorted(&g_sym);
    let gap = modes.values[0] - modes.values[1];
    if gap.is_nan() || gap < MIN_EIGENGAP {
        return Err(MiError::AmbiguousDirection {
            gap,
            tolerance: MIN_EIGENGAP,
        });
    }
    let mut radial = modes.radial_mode();
    if radial.dot(hemisphere_prior) < 0.0 {
        radial = -radial;
    }
    Ok(direction_angles(&radial))
}

/// Gauss–Newton stopping rules.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MleOptions {
    pub max_iterations: usize,
    pub step_tolerance: f64,
    pub gradient_tolerance: f64,
    /// Added to the diagonal of `JᵀJ`; keeps the normal equations solvable at the poles.
    pub regularization: f64,
}

impl Default for MleOptions {
    fn default() -> Self {
        Self {
            max_iterations: 50,
            step_tolerance: 1e-10,
            gradient_tolerance: 1e-12,
            regularization: 1e-12,
        }
    }
}

/// Known link context for the refinement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MleContext {
    pub model: LinkModel,
    pub frame: FrameSpec,
    pub noise: NoiseModel,
    pub options: MleOptions,
}

impl MleContext {
    pub fn new(model: LinkModel, frame: FrameSpec, noise: NoiseModel) -> Self {
        Self {
            model,
            frame,
            noise,
            options: MleOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimationResult {
    pub range_m: f64,
    pub theta_rad: f64,
    pub phi_rad: f64,
    /// `σ_h² (JᵀJ)⁻¹` at the final iterate, over `(r, θ, φ)`.
    pub covariance_proxy: [[f64; 3]; 3],
    pub iterations: usize,
    pub converged: bool,
    /// `‖vec(H_est) − vec(H(r, θ, φ))‖` in channel units.
    pub residual_norm: f64,
    /// Gradient norm of the normalized objective at the final iterate.
    pub gradient_norm: f64,
}

/// Objective normalized so that the range is relative to the initial guess and
/// the channel is expressed in units of `C / r₀³`. The stopping tolerances act on
/// this dimensionless problem.
struct Normalized<'a> {
    model: &'a LinkModel,
    target: Vec<f64>,
    r0: f64,
    scale: f64,
}

impl Normalized<'_> {
    fn physical(&self, q: &[f64; 3]) -> [f64; 3] {
        [q[0] * self.r0, q[1], q[2]]
    }

    fn residual(&self, q: &[f64; 3]) -> DVector<f64> {
        let p = self.physical(q);
        let model = stack_real(&self.model.response(p[0], p[1], p[2]));
        DVector::from_iterator(
            model.len(),
            model
                .iter()
                .zip(self.target.iter())
                .map(|(m, t)| self.scale * (m - t)),
        )
    }

    fn jacobian(&self, q: &[f64; 3]) -> DMatrix<f64> {
        let mut jac = response_jacobian(self.model, self.physical(q));
        let r0 = self.r0;
        let scale = self.scale;
        for (k, mut col) in jac.column_iter_mut().enumerate() {
            let chain = if k == 0 { r0 } else { 1.0 };
            col *= scale * chain;
        }
        jac
    }
}

/// Gauss–Newton minimization of `‖vec(H_est) − vec(H(r, θ, φ))‖²`.
///
/// Steps are backtracked until the objective decreases. Hitting the iteration
/// cap returns the best iterate with `converged = false`.
pub fn mle_refine(
    h_est: &ChannelMatrix,
    initial: (f64, f64, f64),
    context: &MleContext,
) -> Result<EstimationResult> {
    let (r_init, theta_init, phi_init) = initial;
    if !(r_init.is_finite() && r_init > 0.0) {
        return Err(MiError::NonFiniteGeometry { range_m: r_init });
    }
    if !(theta_init.is_finite() && phi_init.is_finite()) {
        return Err(invalid("initial", "angles must be finite"));
    }
    let model = &context.model;
    let expected = (model.coil.axis_count(), model.coil.axis_count());
    if (h_est.rx_axes(), h_est.tx_axes()) != expected {
        return Err(invalid(
            "h_est",
            "channel shape does not match the coil configuration",
        ));
    }
    let opts = context.options;
    let problem = Normalized {
        model,
        target: h_est.stacked_real(),
        r0: r_init,
        scale: r_init.powi(3) / model.coil_constant(),
    };

    let mut q = [1.0, theta_init, phi_init];
    let mut res = problem.residual(&q);
    let mut cost = res.norm_squared();
    let mut jac = problem.jacobian(&q);
    let mut grad = jac.transpose() * &res;
    let mut iterations = 0;
    let mut converged = grad.norm() < opts.gradient_tolerance;

    while !converged && iterations < opts.max_iterations {
        let mut curvature = jac.transpose() * &jac;
        for i in 0..3 {
            curvature[(i, i)] += opts.regularization;
        }
        let step = curvature
            .cholesky()
            .ok_or(MiError::SingularCurvature)?
            .solve(&(-&grad));
        if !step.iter().all(|v| v.is_finite()) {
            return Err(MiError::SingularCurvature);
        }
        iterations += 1;

        if step.norm() < opts.step_tolerance {
            q = [q[0] + step[0], q[1] + step[1], q[2] + step[2]];
            res = problem.residual(&q);
            converged = true;
            break;
        }

        let mut t = 1.0;
        let mut accepted = None;
        while t > 1e-6 {
            let trial = [q[0] + t * step[0], q[1] + t * step[1], q[2] + t * step[2]];
            if trial[0] > 0.0 {
                let trial_res = problem.residual(&trial);
                let trial_cost = trial_res.norm_squared();
                if trial_cost <= cost {
                    accepted = Some((trial, trial_res, trial_cost));
                    break;
                }
            }
            t *= 0.5;
        }
        let Some((next, next_res, next_cost)) = accepted else {
            break;
        };
        let moved = t * step.norm();
        q = next;
        res = next_res;
        cost = next_cost;
        jac = problem.jacobian(&q);
        grad = jac.transpose() * &res;
        converged = moved < opts.step_tolerance || grad.norm() < opts.gradient_tolerance;
    }

    let jac_final = problem.jacobian(&q);
    let grad_final = jac_final.transpose() * problem.residual(&q);
    let covariance_proxy = covariance(&problem, &jac_final, context);

    let (range_m, theta_rad, phi_rad) = canonical_angles(q[0] * problem.r0, q[1], q[2]);
    Ok(EstimationResult {
        range_m,
        theta_rad,
        phi_rad,
        covariance_proxy,
        iterations,
        converged,
        residual_norm: res.norm() / problem.scale,
        gradient_norm: grad_final.norm(),
    })
}

fn covariance(problem: &Normalized<'_>, jac: &DMatrix<f64>, ctx: &MleContext) -> [[f64; 3]; 3] {
    let per_entry = ctx
        .frame
        .channel_estimate_variance(&ctx.model.coil, &ctx.noise);
    let jtj = jac.transpose() * jac;
    let mut out = [[f64::NAN; 3]; 3];
    if let Some(inv) = jtj.try_inverse() {
        let d = [problem.r0, 1.0, 1.0];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = per_entry * problem.scale * problem.scale * inv[(i, j)] * d[i] * d[j];
            }
        }
    }
    out
}

/// Maps an unconstrained `(θ, φ)` onto `θ ∈ [0, π]`, `φ ∈ [0, 2π)` describing the same direction.
fn canonical_angles(r: f64, theta: f64, phi: f64) -> (f64, f64, f64) {
    let d = unit_direction(theta, phi);
    if d.x == 0.0 && d.y == 0.0 {
        // pole: keep the iterate's azimuth
        let (t, _) = direction_angles(&d);
        return (r, t, wrap_azimuth(phi));
    }
    let (t, p) = direction_angles(&d);
    (r, t, p)
}

/// Full sensing path: closed-form range, eigen direction, Gauss–Newton refinement.
pub fn estimate_link(
    h_est: &ChannelMatrix,
    context: &MleContext,
    hemisphere_prior: &Vector3<f64>,
) -> Result<EstimationResult> {
    let model = &context.model;
    let r0 = estimate_range_closed_form(h_est, &model.coil, &model.carrier)?;
    let (theta0, phi0) = estimate_direction_eigen(
        h_est,
        (&model.tx_orientation, &model.rx_orientation),
        &model.coil,
        &model.carrier,
        r0,
        hemisphere_prior,
    )?;
    mle_refine(h_est, (r0, theta0, phi0), context)
}
