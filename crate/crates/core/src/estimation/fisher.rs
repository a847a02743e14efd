//! Fisher information for the link parameters `(r, θ, φ)`.
//!
//! Each received symbol observes every transmit axis at power `P / n_tx` with
//! independent real Gaussian noise of variance `σ_w²` per real dimension of each
//! receive axis, so over `N` symbols
//!
//! ```text
//! FIM = (N · P / n_tx / σ_w²) · Jᵀ J
//! ```
//!
//! with `J` the Jacobian of the stacked real/imaginary channel entries. For a
//! tri-axial lossless link the range entry reduces to `18 N P C² / (σ_w² r⁸)`.

use nalgebra::{DMatrix, Matrix3, Vector3};

use super::noise::{FrameSpec, NoiseModel};
use crate::error::{invalid, MiError, Result};
use crate::physics::{
    coil_constant, stack_real, CarrierSpec, CoilSpec, LinkGeometry, LinkModel, MediumModel,
};

/// Relative central-difference step for the range parameter.
pub const RANGE_STEP_REL: f64 = 1e-6;
/// Absolute central-difference step for the angles, radians.
pub const ANGLE_STEP_RAD: f64 = 1e-6;
/// Singular values below this fraction of the largest do not count toward rank.
pub const RANK_TOLERANCE: f64 = 1e-8;

/// Fisher information over `(r, θ, φ)` together with its numeric rank.
#[derive(Debug, Clone, PartialEq)]
pub struct FisherInfo {
    pub matrix: Matrix3<f64>,
    /// Descending.
    pub singular_values: Vector3<f64>,
    pub numeric_rank: usize,
    pub rank_tolerance: f64,
}

impl FisherInfo {
    pub fn from_matrix(matrix: Matrix3<f64>, rank_tolerance: f64) -> Self {
        let sym = 0.5 * (matrix + matrix.transpose());
        let mut sv: Vec<f64> = sym.singular_values().iter().copied().collect();
        sv.sort_by(|a, b| b.total_cmp(a));
        let singular_values = Vector3::from_column_slice(&sv);
        let cutoff = rank_tolerance * singular_values[0];
        let numeric_rank = singular_values.iter().filter(|&&s| s > cutoff).count();
        Self {
            matrix: sym,
            singular_values,
            numeric_rank,
            rank_tolerance,
        }
    }

    pub fn is_full_rank(&self) -> bool {
        self.numeric_rank == 3
    }

    /// `FIM⁻¹`, or `None` when the information is rank deficient.
    pub fn crb(&self) -> Option<Matrix3<f64>> {
        if self.is_full_rank() {
            self.matrix.try_inverse()
        } else {
            None
        }
    }

    /// `[FIM⁻¹]_rr`.
    pub fn crb_range(&self) -> Option<f64> {
        self.crb().map(|m| m[(0, 0)])
    }
}

/// Central-difference Jacobian of the stacked real channel response.
///
/// Rows follow [`crate::physics::ChannelMatrix::stacked_real`]; columns are `(r, θ, φ)`.
pub fn response_jacobian(model: &LinkModel, params: [f64; 3]) -> DMatrix<f64> {
    let steps = [RANGE_STEP_REL * params[0], ANGLE_STEP_RAD, ANGLE_STEP_RAD];
    let eval = |p: [f64; 3]| stack_real(&model.response(p[0], p[1], p[2]));
    let rows = 2 * model.coil.axis_count() * model.coil.axis_count();
    let mut jac = DMatrix::zeros(rows, 3);
    for (k, &h) in steps.iter().enumerate() {
        let mut plus = params;
        let mut minus = params;
        plus[k] += h;
        minus[k] -= h;
        let fp = eval(plus);
        let fm = eval(minus);
        for (row, (a, b)) in fp.iter().zip(fm.iter()).enumerate() {
            jac[(row, k)] = (a - b) / (2.0 * h);
        }
    }
    jac
}

/// Numeric Fisher information; orientations are treated as known.
///
/// At the poles the FIM is structurally rank 2; that is reported through
/// `numeric_rank` rather than raised.
pub fn fim_numeric(
    geometry: &LinkGeometry,
    coil: &CoilSpec,
    carrier: &CarrierSpec,
    medium: &MediumModel,
    frame: &FrameSpec,
    noise: &NoiseModel,
) -> Result<FisherInfo> {
    let variance = noise.variance();
    if variance <= 0.0 {
        return Err(invalid(
            "noise",
            "Fisher information requires a positive noise variance",
        ));
    }
    let model = LinkModel::for_geometry(geometry, coil, carrier, medium);
    let jac = response_jacobian(
        &model,
        [geometry.range_m(), geometry.theta_rad(), geometry.phi_rad()],
    );
    let jtj = jac.transpose() * &jac;
    let scale = frame.n_symbols() as f64 * frame.per_axis_power(coil) / variance;
    let matrix = Matrix3::from_fn(|i, j| scale * jtj[(i, j)]);
    Ok(FisherInfo::from_matrix(matrix, RANK_TOLERANCE))
}

/// Closed-form range bound `σ_w² r⁸ / (18 N P C²)` for tri-axial links.
pub fn crb_range_analytic(
    geometry: &LinkGeometry,
    coil: &CoilSpec,
    carrier: &CarrierSpec,
    frame: &FrameSpec,
    noise: &NoiseModel,
) -> Result<f64> {
    if !coil.is_tri_axial() {
        return Err(MiError::NotIdentifiable);
    }
    let c = coil_constant(coil, carrier);
    let n = frame.n_symbols() as f64;
    Ok(noise.variance() * geometry.range_m().powi(8) / (18.0 * n * frame.tx_power_w() * c * c))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn setup() -> (CoilSpec, CarrierSpec, FrameSpec, NoiseModel) {
        (
            CoilSpec::tri_axial(0.15, 20).unwrap(),
            CarrierSpec::new(1e4, 1e3).unwrap(),
            FrameSpec::new(100, 1.0).unwrap(),
            NoiseModel::ideal(1e3).unwrap(),
        )
    }

    #[test]
    fn tri_axial_rank_three_and_matches_closed_form() {
        let (coil, carrier, frame, noise) = setup();
        let geom = LinkGeometry::new(10.0, PI / 4.0, PI / 3.0).unwrap();
        let fim = fim_numeric(
            &geom,
            &coil,
            &carrier,
            &MediumModel::lossless(),
            &frame,
            &noise,
        )
        .unwrap();
        assert_eq!(fim.numeric_rank, 3);
        let analytic = crb_range_analytic(&geom, &coil, &carrier, &frame, &noise).unwrap();
        let numeric = fim.crb_range().unwrap();
        assert!(((numeric - analytic) / analytic).abs() < 1e-6);
    }

    #[test]
    fn single_axis_rank_one() {
        let (_, carrier, frame, noise) = setup();
        let coil = CoilSpec::single_axis(0.15, 20, nalgebra::Vector3::z()).unwrap();
        let geom = LinkGeometry::new(10.0, PI / 4.0, PI / 3.0).unwrap();
        let fim = fim_numeric(
            &geom,
            &coil,
            &carrier,
            &MediumModel::lossless(),
            &frame,
            &noise,
        )
        .unwrap();
        assert_eq!(fim.numeric_rank, 1);
        assert!(fim.crb().is_none());
    }

    #[test]
    fn pole_is_rank_two() {
        let (coil, carrier, frame, noise) = setup();
        let geom = LinkGeometry::new(10.0, 0.0, 1.0).unwrap();
        let fim = fim_numeric(
            &geom,
            &coil,
            &carrier,
            &MediumModel::lossless(),
            &frame,
            &noise,
        )
        .unwrap();
        assert_eq!(fim.numeric_rank, 2);
    }

    #[test]
    fn closed_form_scalings() {
        let (coil, carrier, frame, noise) = setup();
        let g10 = LinkGeometry::new(10.0, 1.0, 1.0).unwrap();
        let g20 = g10.with_range(20.0).unwrap();
        let a = crb_range_analytic(&g10, &coil, &carrier, &frame, &noise).unwrap();
        let b = crb_range_analytic(&g20, &coil, &carrier, &frame, &noise).unwrap();
        assert!((b / a - 256.0).abs() < 1e-10);
        let frame400 = FrameSpec::new(400, 1.0).unwrap();
        let c = crb_range_analytic(&g10, &coil, &carrier, &frame400, &noise).unwrap();
        assert!((a / c - 4.0).abs() < 1e-12);
    }

    #[test]
    fn closed_form_requires_tri_axial() {
        let (_, carrier, frame, noise) = setup();
        let coil = CoilSpec::single_axis(0.15, 20, nalgebra::Vector3::x()).unwrap();
        let g = LinkGeometry::new(10.0, 1.0, 1.0).unwrap();
        assert_eq!(
            crb_range_analytic(&g, &coil, &carrier, &frame, &noise),
            Err(MiError::NotIdentifiable)
        );
    }

    #[test]
    fn sub_millimetre_at_ten_metres() {
        let (coil, carrier, frame, noise) = setup();
        let g = LinkGeometry::new(10.0, 1.0, 1.0).unwrap();
        let root = crb_range_analytic(&g, &coil, &carrier, &frame, &noise)
            .unwrap()
            .sqrt();
        // 3.7558e-5 m from the closed form evaluated in double precision offline
        assert!((root - 3.7558e-5).abs() < 1e-8, "√CRB = {root}");
    }

    #[test]
    fn zero_noise_rejected() {
        let (coil, carrier, frame, _) = setup();
        let g = LinkGeometry::new(10.0, 1.0, 1.0).unwrap();
        let quiet = NoiseModel::noiseless(1e3).unwrap();
        assert!(fim_numeric(
            &g,
            &coil,
            &carrier,
            &MediumModel::lossless(),
            &frame,
            &quiet
        )
        .is_err());
    }
}
