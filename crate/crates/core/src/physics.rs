//! Dipole coupling tensor and the deterministic MI-MIMO channel.
//!
//! The channel between two coils at separation `r` along unit direction `r̂` is
//!
//! ```text
//! H = a(r) · (C / r³) · Bᵣᵀ Rᵣᵀ G(r̂) Rₜ Bₜ,     G(r̂) = 3 r̂ r̂ᵀ − I₃
//! ```
//!
//! where `Rₜ`, `Rᵣ` map each node's local frame to the global frame, `Bₜ`, `Bᵣ`
//! hold the coil axes in the local frame (identity for a tri-axial coil, the
//! coil normal for a single-axis coil), `C` is the coil constant and `a(r)` the
//! medium attenuation. With identity orientations and a lossless medium a
//! tri-axial link reproduces `(C / r³) · G` exactly.

use std::f64::consts::PI;

use nalgebra::{DMatrix, Matrix3, Rotation3, SymmetricEigen, Vector3};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, MiError, Result};

/// Vacuum permeability μ₀ in H/m (the classical fixed value).
pub const MU_0: f64 = 4.0 * PI * 1e-7;

const UNIT_NORM_TOL: f64 = 1e-10;
const NORMAL_NORM_TOL: f64 = 1e-12;
const ROTATION_TOL: f64 = 1e-10;

/// Ratio `r / a` below which the dipole approximation is flagged.
pub const DIPOLE_WARN_RATIO: f64 = 5.0;

/// Coil axis arrangement, expressed in the node's local frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum CoilAxes {
    /// One coil with the given unit normal.
    SingleAxis(Vector3<f64>),
    /// Three mutually orthogonal coils along the local x, y, z axes.
    TriAxial,
}

/// Physical coil description. The same coil is used at both link ends.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoilSpec {
    radius_m: f64,
    turns: u32,
    axes: CoilAxes,
}

impl CoilSpec {
    pub fn new(radius_m: f64, turns: u32, axes: CoilAxes) -> Result<Self> {
        if !(radius_m.is_finite() && radius_m > 0.0) {
            return Err(invalid(
                "coil.radius_m",
                format!("must be > 0, got {radius_m}"),
            ));
        }
        if turns == 0 {
            return Err(invalid("coil.turns", "must be >= 1"));
        }
        if let CoilAxes::SingleAxis(n) = axes {
            let norm = n.norm();
            if !norm.is_finite() || (norm - 1.0).abs() > NORMAL_NORM_TOL {
                return Err(invalid(
                    "coil.normal",
                    format!("single-axis normal must be unit norm, got {norm}"),
                ));
            }
        }
        Ok(Self {
            radius_m,
            turns,
            axes,
        })
    }

    pub fn tri_axial(radius_m: f64, turns: u32) -> Result<Self> {
        Self::new(radius_m, turns, CoilAxes::TriAxial)
    }

    pub fn single_axis(radius_m: f64, turns: u32, normal: Vector3<f64>) -> Result<Self> {
        Self::new(radius_m, turns, CoilAxes::SingleAxis(normal))
    }

    pub fn radius_m(&self) -> f64 {
        self.radius_m
    }

    pub fn turns(&self) -> u32 {
        self.turns
    }

    pub fn axes(&self) -> CoilAxes {
        self.axes
    }

    /// Loop area `πa²`.
    pub fn area_m2(&self) -> f64 {
        PI * self.radius_m * self.radius_m
    }

    pub fn is_tri_axial(&self) -> bool {
        matches!(self.axes, CoilAxes::TriAxial)
    }

    pub fn axis_count(&self) -> usize {
        match self.axes {
            CoilAxes::TriAxial => 3,
            CoilAxes::SingleAxis(_) => 1,
        }
    }

    /// Coil axes as columns of a `3 × axis_count` matrix in the local frame.
    pub fn axis_basis(&self) -> DMatrix<f64> {
        match self.axes {
            CoilAxes::TriAxial => DMatrix::identity(3, 3),
            CoilAxes::SingleAxis(n) => DMatrix::from_column_slice(3, 1, n.as_slice()),
        }
    }
}

/// Carrier frequency and occupied bandwidth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CarrierSpec {
    frequency_hz: f64,
    bandwidth_hz: f64,
}

impl CarrierSpec {
    pub fn new(frequency_hz: f64, bandwidth_hz: f64) -> Result<Self> {
        if !(frequency_hz.is_finite() && frequency_hz > 0.0) {
            return Err(invalid(
                "carrier.frequency_hz",
                format!("must be > 0, got {frequency_hz}"),
            ));
        }
        if !(bandwidth_hz.is_finite() && bandwidth_hz > 0.0) {
            return Err(invalid(
                "carrier.bandwidth_hz",
                format!("must be > 0, got {bandwidth_hz}"),
            ));
        }
        if bandwidth_hz > frequency_hz {
            return Err(invalid(
                "carrier.bandwidth_hz",
                format!("narrowband regime requires B <= f0 ({bandwidth_hz} > {frequency_hz})"),
            ));
        }
        Ok(Self {
            frequency_hz,
            bandwidth_hz,
        })
    }

    pub fn frequency_hz(&self) -> f64 {
        self.frequency_hz
    }

    pub fn bandwidth_hz(&self) -> f64 {
        self.bandwidth_hz
    }

    /// ω₀ = 2πf₀.
    pub fn angular_frequency(&self) -> f64 {
        2.0 * PI * self.frequency_hz
    }
}

/// Propagation medium. Permeability is fixed at μ₀.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MediumModel {
    conductivity_s_per_m: f64,
}

impl MediumModel {
    pub fn new(conductivity_s_per_m: f64) -> Result<Self> {
        if !(conductivity_s_per_m.is_finite() && conductivity_s_per_m >= 0.0) {
            return Err(invalid(
                "medium.conductivity_s_per_m",
                format!("must be >= 0, got {conductivity_s_per_m}"),
            ));
        }
        Ok(Self {
            conductivity_s_per_m,
        })
    }

    pub fn lossless() -> Self {
        Self::default()
    }

    pub fn conductivity_s_per_m(&self) -> f64 {
        self.conductivity_s_per_m
    }

    pub fn permeability(&self) -> f64 {
        MU_0
    }

    pub fn is_lossless(&self) -> bool {
        self.conductivity_s_per_m == 0.0
    }

    /// Skin depth `δ = √(2 / (μ₀ ω₀ σ))`; `None` for a lossless medium.
    pub fn skin_depth_m(&self, carrier: &CarrierSpec) -> Option<f64> {
        if self.is_lossless() {
            None
        } else {
            Some((2.0 / (MU_0 * carrier.angular_frequency() * self.conductivity_s_per_m)).sqrt())
        }
    }
}

/// Validates a 3×3 matrix as a proper rotation.
pub fn proper_rotation(m: Matrix3<f64>) -> Result<Rotation3<f64>> {
    let ortho = (m.transpose() * m - Matrix3::identity()).abs().max();
    let det = m.determinant();
    if !ortho.is_finite() || ortho > ROTATION_TOL || (det - 1.0).abs() > ROTATION_TOL {
        return Err(invalid(
            "orientation",
            format!("not a proper rotation (|RᵀR − I|max = {ortho:e}, det = {det})"),
        ));
    }
    Ok(Rotation3::from_matrix_unchecked(m))
}

/// Unit vector `(sinθ cosφ, sinθ sinφ, cosθ)`.
pub fn unit_direction(theta_rad: f64, phi_rad: f64) -> Vector3<f64> {
    let (st, ct) = theta_rad.sin_cos();
    let (sp, cp) = phi_rad.sin_cos();
    Vector3::new(st * cp, st * sp, ct)
}

/// Polar/azimuth angles of a nonzero vector, `θ ∈ [0, π]`, `φ ∈ [0, 2π)`.
pub fn direction_angles(v: &Vector3<f64>) -> (f64, f64) {
    let theta = v.x.hypot(v.y).atan2(v.z);
    (theta, wrap_azimuth(v.y.atan2(v.x)))
}

/// Maps any azimuth into `[0, 2π)`.
pub fn wrap_azimuth(phi: f64) -> f64 {
    let w = phi.rem_euclid(2.0 * PI);
    // rem_euclid can round up to exactly 2π for tiny negative inputs
    if w >= 2.0 * PI {
        0.0
    } else {
        w
    }
}

/// Range, direction and node orientations of a link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkGeometry {
    range_m: f64,
    theta_rad: f64,
    phi_rad: f64,
    tx_orientation: Rotation3<f64>,
    rx_orientation: Rotation3<f64>,
}

impl LinkGeometry {
    /// Link with both nodes aligned to the global frame.
    pub fn new(range_m: f64, theta_rad: f64, phi_rad: f64) -> Result<Self> {
        if !(range_m.is_finite() && range_m > 0.0) {
            return Err(MiError::NonFiniteGeometry { range_m });
        }
        if !(theta_rad.is_finite() && (0.0..=PI).contains(&theta_rad)) {
            return Err(invalid(
                "geometry.theta_rad",
                format!("must lie in [0, π], got {theta_rad}"),
            ));
        }
        if !(phi_rad.is_finite() && (0.0..2.0 * PI).contains(&phi_rad)) {
            return Err(invalid(
                "geometry.phi_rad",
                format!("must lie in [0, 2π), got {phi_rad}"),
            ));
        }
        Ok(Self {
            range_m,
            theta_rad,
            phi_rad,
            tx_orientation: Rotation3::identity(),
            rx_orientation: Rotation3::identity(),
        })
    }

    pub fn with_orientations(mut self, tx: Matrix3<f64>, rx: Matrix3<f64>) -> Result<Self> {
        self.tx_orientation = proper_rotation(tx)?;
        self.rx_orientation = proper_rotation(rx)?;
        Ok(self)
    }

    pub fn with_rotations(mut self, tx: Rotation3<f64>, rx: Rotation3<f64>) -> Self {
        self.tx_orientation = tx;
        self.rx_orientation = rx;
        self
    }

    pub fn range_m(&self) -> f64 {
        self.range_m
    }

    pub fn theta_rad(&self) -> f64 {
        self.theta_rad
    }

    pub fn phi_rad(&self) -> f64 {
        self.phi_rad
    }

    pub fn tx_orientation(&self) -> &Rotation3<f64> {
        &self.tx_orientation
    }

    pub fn rx_orientation(&self) -> &Rotation3<f64> {
        &self.rx_orientation
    }

    pub fn direction(&self) -> Vector3<f64> {
        unit_direction(self.theta_rad, self.phi_rad)
    }

    pub fn with_range(mut self, range_m: f64) -> Result<Self> {
        if !(range_m.is_finite() && range_m > 0.0) {
            return Err(MiError::NonFiniteGeometry { range_m });
        }
        self.range_m = range_m;
        Ok(self)
    }
}

/// Dipole coupling tensor `G = 3 r̂ r̂ᵀ − I₃`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CouplingTensor {
    matrix: Matrix3<f64>,
}

impl CouplingTensor {
    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.matrix
    }
}

/// Builds the coupling tensor for a unit direction.
pub fn coupling_tensor(direction: &Vector3<f64>) -> Result<CouplingTensor> {
    let norm = direction.norm();
    if !norm.is_finite() || (norm - 1.0).abs() > UNIT_NORM_TOL {
        return Err(MiError::NonUnitDirection { norm });
    }
    Ok(CouplingTensor {
        matrix: tensor_unchecked(direction),
    })
}

fn tensor_unchecked(d: &Vector3<f64>) -> Matrix3<f64> {
    3.0 * d * d.transpose() - Matrix3::identity()
}

/// Spectral decomposition of a coupling tensor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Eigenmodes {
    /// Eigenvalues, descending.
    pub values: Vector3<f64>,
    /// Orthonormal eigenvectors as columns, ordered like `values`.
    pub vectors: Matrix3<f64>,
}

impl Eigenmodes {
    /// `|λ|max / |λ|min`.
    pub fn condition_number(&self) -> f64 {
        let abs = self.values.abs();
        abs.max() / abs.min()
    }

    /// Eigenvector of the largest eigenvalue.
    pub fn radial_mode(&self) -> Vector3<f64> {
        self.vectors.column(0).into_owned()
    }

    pub fn tangential_modes(&self) -> (Vector3<f64>, Vector3<f64>) {
        (
            self.vectors.column(1).into_owned(),
            self.vectors.column(2).into_owned(),
        )
    }

    pub fn rank(&self, tolerance: f64) -> usize {
        let max = self.values.abs().max();
        self.values
            .iter()
            .filter(|v| v.abs() > tolerance * max)
            .count()
    }
}

pub fn eigenmodes(tensor: &CouplingTensor) -> Eigenmodes {
    symmetric_eigen_sorted(&tensor.matrix)
}

/// Eigen-decomposition of a symmetric 3×3 matrix with eigenvalues sorted descending.
pub(crate) fn symmetric_eigen_sorted(m: &Matrix3<f64>) -> Eigenmodes {
    let eig = SymmetricEigen::new(*m);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = Vector3::from_fn(|i, _| eig.eigenvalues[order[i]]);
    let vectors = Matrix3::from_fn(|r, c| eig.eigenvectors[(r, order[c])]);
    Eigenmodes { values, vectors }
}

/// Coil constant `C = μ₀ ω₀ N_t² A² / (4π)` with `A = πa²`.
pub fn coil_constant(coil: &CoilSpec, carrier: &CarrierSpec) -> f64 {
    let nt = f64::from(coil.turns);
    let area = coil.area_m2();
    MU_0 * carrier.angular_frequency() * nt * nt * area * area / (4.0 * PI)
}

/// Quasi-static conductive-medium factor `exp(−(1 + j) r / δ)`; exactly `1 + 0j` when lossless.
pub fn attenuation(medium: &MediumModel, carrier: &CarrierSpec, range_m: f64) -> Complex64 {
    match medium.skin_depth_m(carrier) {
        None => Complex64::new(1.0, 0.0),
        Some(delta) => {
            let x = range_m / delta;
            Complex64::from_polar((-x).exp(), -x)
        }
    }
}

/// Deterministic channel realization.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelMatrix {
    entries: DMatrix<Complex64>,
    coil_constant: f64,
}

impl ChannelMatrix {
    pub fn new(entries: DMatrix<Complex64>, coil_constant: f64) -> Self {
        Self {
            entries,
            coil_constant,
        }
    }

    pub fn entries(&self) -> &DMatrix<Complex64> {
        &self.entries
    }

    pub fn into_entries(self) -> DMatrix<Complex64> {
        self.entries
    }

    pub fn coil_constant(&self) -> f64 {
        self.coil_constant
    }

    pub fn rx_axes(&self) -> usize {
        self.entries.nrows()
    }

    pub fn tx_axes(&self) -> usize {
        self.entries.ncols()
    }

    pub fn is_tri_axial(&self) -> bool {
        self.rx_axes() == 3 && self.tx_axes() == 3
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.entries
            .iter()
            .map(|z| z.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    /// Real part of every entry in row-major order, followed by every imaginary part.
    pub fn stacked_real(&self) -> Vec<f64> {
        stack_real(&self.entries)
    }

    /// Row-major `(re, im)` pairs, the dump layout used by the CLI.
    pub fn row_major_interleaved(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(2 * self.entries.len());
        for i in 0..self.entries.nrows() {
            for j in 0..self.entries.ncols() {
                let z = self.entries[(i, j)];
                out.push(z.re);
                out.push(z.im);
            }
        }
        out
    }
}

pub(crate) fn stack_real(m: &DMatrix<Complex64>) -> Vec<f64> {
    let mut out = Vec::with_capacity(2 * m.len());
    for part in [0, 1] {
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                let z = m[(i, j)];
                out.push(if part == 0 { z.re } else { z.im });
            }
        }
    }
    out
}

/// Everything about a link except its (r, θ, φ) parameters.
///
/// Estimators evaluate the forward model through this type at trial
/// parameters that may fall outside the validated angle ranges.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkModel {
    pub coil: CoilSpec,
    pub carrier: CarrierSpec,
    pub medium: MediumModel,
    pub tx_orientation: Rotation3<f64>,
    pub rx_orientation: Rotation3<f64>,
}

impl LinkModel {
    pub fn new(
        coil: CoilSpec,
        carrier: CarrierSpec,
        medium: MediumModel,
        tx_orientation: Rotation3<f64>,
        rx_orientation: Rotation3<f64>,
    ) -> Self {
        Self {
            coil,
            carrier,
            medium,
            tx_orientation,
            rx_orientation,
        }
    }

    pub fn for_geometry(
        geometry: &LinkGeometry,
        coil: &CoilSpec,
        carrier: &CarrierSpec,
        medium: &MediumModel,
    ) -> Self {
        Self::new(
            *coil,
            *carrier,
            *medium,
            geometry.tx_orientation,
            geometry.rx_orientation,
        )
    }

    pub fn coil_constant(&self) -> f64 {
        coil_constant(&self.coil, &self.carrier)
    }

    /// Channel entries at arbitrary parameters (no validation beyond `r > 0` by the caller).
    pub fn response(&self, range_m: f64, theta_rad: f64, phi_rad: f64) -> DMatrix<Complex64> {
        let g = tensor_unchecked(&unit_direction(theta_rad, phi_rad));
        let global = self.rx_orientation.matrix().transpose() * g * self.tx_orientation.matrix();
        let basis = self.coil.axis_basis();
        let projected = basis.transpose() * to_dynamic(&global) * &basis;
        let scale = attenuation(&self.medium, &self.carrier, range_m)
            * (self.coil_constant() / range_m.powi(3));
        projected.map(|v| scale * v)
    }
}

fn to_dynamic(m: &Matrix3<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(3, 3, |i, j| m[(i, j)])
}

/// Builds the MI channel for a validated geometry.
pub fn channel_matrix(
    geometry: &LinkGeometry,
    coil: &CoilSpec,
    carrier: &CarrierSpec,
    medium: &MediumModel,
) -> Result<ChannelMatrix> {
    let r = geometry.range_m;
    if !(r.is_finite() && r > 0.0) {
        return Err(MiError::NonFiniteGeometry { range_m: r });
    }
    if r < DIPOLE_WARN_RATIO * coil.radius_m {
        log::warn!(
            "range {r} m is below {DIPOLE_WARN_RATIO}x the coil radius ({} m); dipole approximation is marginal",
            coil.radius_m
        );
    }
    let model = LinkModel::for_geometry(geometry, coil, carrier, medium);
    Ok(ChannelMatrix::new(
        model.response(r, geometry.theta_rad, geometry.phi_rad),
        model.coil_constant(),
    ))
}
