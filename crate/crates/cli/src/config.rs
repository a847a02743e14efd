//! Flat `key = value` experiment configuration.
//!
//! Resolution order: built-in defaults, then the config file, then command-line
//! overrides. Unknown keys are rejected and every physical parameter is
//! validated against its domain type before any command runs.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::Path;

use mi_isac::analysis::{AxisConfig, NoiseProfile, SweepConfig, SystemParams};
use mi_isac::estimation::{FrameSpec, NoiseModel};
use mi_isac::physics::{CarrierSpec, CoilSpec, LinkGeometry, MediumModel};
use nalgebra::{Rotation3, Vector3};

use crate::CliError;

/// Every accepted key with its default value.
pub const DEFAULTS: &[(&str, &str)] = &[
    ("carrier.bandwidth_hz", "1000"),
    ("carrier.frequency_hz", "10000"),
    ("coil.axes", "tri"),
    ("coil.normal", "0,0,1"),
    ("coil.radius_m", "0.15"),
    ("coil.turns", "20"),
    ("frame.n_symbols", "100"),
    ("frame.pilot_fraction", "1"),
    ("frame.tx_power_w", "1"),
    ("geometry.phi_rad", "0"),
    ("geometry.range_m", "10"),
    ("geometry.rx_euler_rad", "0,0,0"),
    ("geometry.theta_rad", "0"),
    ("geometry.tx_euler_rad", "0,0,0"),
    ("medium.conductivity_s_per_m", "0"),
    ("noise.insertion_loss_db", "0"),
    ("noise.noise_figure_db", "0"),
    ("noise.practical_insertion_loss_db", "3"),
    ("noise.practical_noise_figure_db", "6"),
    ("noise.temperature_k", "290"),
    ("sweep.alpha_grid", "0.1,0.25,0.5"),
    (
        "sweep.geometries",
        "0.7853981633974483:1.0471975511965976;1.2:4;2.5:0.3;0:0",
    ),
    ("sweep.phi_rad", "1.0471975511965976"),
    ("sweep.r_grid", "1,2,5,10,20,30"),
    ("sweep.seed", "42"),
    ("sweep.snr_db_grid", "0,10,20,30,inf"),
    ("sweep.theta_rad", "0.7853981633974483"),
    ("sweep.trials", "500"),
];

/// Resolved raw key/value pairs, sorted by key.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawConfig {
    values: BTreeMap<String, String>,
}

impl Default for RawConfig {
    fn default() -> Self {
        Self {
            values: DEFAULTS
                .iter()
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .collect(),
        }
    }
}

impl RawConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        let key = key.trim();
        match self.values.get_mut(key) {
            Some(slot) => {
                *slot = value.trim().to_string();
                Ok(())
            }
            None => Err(CliError::Config(format!("unknown config key `{key}`"))),
        }
    }

    /// Applies a `key=value` override.
    pub fn apply_assignment(&mut self, assignment: &str) -> Result<(), CliError> {
        let (k, v) = assignment
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("expected key=value, got `{assignment}`")))?;
        self.set(k, v)
    }

    /// Parses a config file: one `key = value` per line, `#` comments, blank
    /// lines ignored, `[section]` headers prefix the following keys.
    pub fn merge_text(&mut self, text: &str) -> Result<(), CliError> {
        let mut section = String::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                section = format!("{}.", name.trim());
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                CliError::Config(format!("line {}: expected key = value", lineno + 1))
            })?;
            let key = if k.contains('.') {
                k.trim().to_string()
            } else {
                format!("{section}{}", k.trim())
            };
            self.set(&key, v)
                .map_err(|e| CliError::Config(format!("line {}: {e}", lineno + 1)))?;
        }
        Ok(())
    }

    pub fn merge_file(&mut self, path: &Path) -> Result<(), CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        self.merge_text(&text)
    }

    pub fn get(&self, key: &str) -> &str {
        self.values
            .get(key)
            .map(String::as_str)
            .unwrap_or_else(|| panic!("key `{key}` missing from defaults"))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.values.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    fn f64(&self, key: &str) -> Result<f64, CliError> {
        parse_f64(self.get(key)).map_err(|e| CliError::Config(format!("`{key}`: {e}")))
    }

    fn u64(&self, key: &str) -> Result<u64, CliError> {
        self.get(key)
            .parse()
            .map_err(|e| CliError::Config(format!("`{key}`: {e}")))
    }

    fn list(&self, key: &str) -> Result<Vec<f64>, CliError> {
        let raw = self.get(key);
        if raw.trim().is_empty() {
            return Ok(Vec::new());
        }
        raw.split(',')
            .map(|s| parse_f64(s).map_err(|e| CliError::Config(format!("`{key}`: {e}"))))
            .collect()
    }

    fn vec3(&self, key: &str) -> Result<Vector3<f64>, CliError> {
        let v = self.list(key)?;
        if v.len() != 3 {
            return Err(CliError::Config(format!("`{key}` needs three components")));
        }
        Ok(Vector3::new(v[0], v[1], v[2]))
    }
}

fn parse_f64(s: &str) -> Result<f64, String> {
    let s = s.trim();
    match s {
        "inf" | "+inf" => Ok(f64::INFINITY),
        _ => {
            let v: f64 = s.parse().map_err(|_| format!("`{s}` is not a number"))?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(format!("`{s}` is not finite"))
            }
        }
    }
}

fn axes_from(value: &str, key: &str) -> Result<AxisConfig, CliError> {
    match value.trim() {
        "tri" => Ok(AxisConfig::TriAxial),
        "single" => Ok(AxisConfig::SingleAxis),
        other => Err(CliError::Config(format!(
            "`{key}` must be `tri` or `single`, got `{other}`"
        ))),
    }
}

fn rotation(euler: Vector3<f64>) -> Rotation3<f64> {
    Rotation3::from_euler_angles(euler.x, euler.y, euler.z)
}

/// Fully validated experiment configuration.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub raw: RawConfig,
    pub coil: CoilSpec,
    /// Same coil dimensions, single-axis along `coil.normal`.
    pub single_axis_coil: CoilSpec,
    /// Same coil dimensions, tri-axial.
    pub tri_axial_coil: CoilSpec,
    pub carrier: CarrierSpec,
    pub medium: MediumModel,
    pub geometry: LinkGeometry,
    pub noise: NoiseModel,
    pub practical_noise: NoiseModel,
    pub frame: FrameSpec,
    pub pilot_fraction: f64,
    pub r_grid: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
    pub sweep_theta_rad: f64,
    pub sweep_phi_rad: f64,
    pub alpha_grid: Vec<f64>,
    pub snr_db_grid: Vec<f64>,
    /// Axis arrangement named by `coil.axes`.
    pub gain_axes: AxisConfig,
    pub geometries: Vec<(f64, f64)>,
    pub threads: usize,
}

impl ExperimentConfig {
    pub fn from_raw(raw: RawConfig, threads: usize) -> Result<Self, CliError> {
        let radius = raw.f64("coil.radius_m")?;
        let turns_raw = raw.u64("coil.turns")?;
        let turns = u32::try_from(turns_raw)
            .map_err(|_| CliError::Config(format!("`coil.turns` too large: {turns_raw}")))?;
        let normal = raw.vec3("coil.normal")?;
        let tri_axial_coil = CoilSpec::tri_axial(radius, turns)?;
        let single_axis_coil = CoilSpec::single_axis(radius, turns, normal)?;
        let gain_axes = axes_from(raw.get("coil.axes"), "coil.axes")?;
        let coil = match gain_axes {
            AxisConfig::TriAxial => tri_axial_coil,
            AxisConfig::SingleAxis => single_axis_coil,
        };

        let carrier = CarrierSpec::new(
            raw.f64("carrier.frequency_hz")?,
            raw.f64("carrier.bandwidth_hz")?,
        )?;
        let medium = MediumModel::new(raw.f64("medium.conductivity_s_per_m")?)?;
        let tx = rotation(raw.vec3("geometry.tx_euler_rad")?);
        let rx = rotation(raw.vec3("geometry.rx_euler_rad")?);
        let geometry = LinkGeometry::new(
            raw.f64("geometry.range_m")?,
            raw.f64("geometry.theta_rad")?,
            raw.f64("geometry.phi_rad")?,
        )?
        .with_rotations(tx, rx);

        let bw = carrier.bandwidth_hz();
        let temperature = raw.f64("noise.temperature_k")?;
        let noise = NoiseModel::new(
            temperature,
            raw.f64("noise.noise_figure_db")?,
            raw.f64("noise.insertion_loss_db")?,
            bw,
        )?;
        let practical_noise = NoiseModel::new(
            temperature,
            raw.f64("noise.practical_noise_figure_db")?,
            raw.f64("noise.practical_insertion_loss_db")?,
            bw,
        )?;

        let n_symbols_raw = raw.u64("frame.n_symbols")?;
        let n_symbols = usize::try_from(n_symbols_raw).map_err(|_| {
            CliError::Config(format!("`frame.n_symbols` too large: {n_symbols_raw}"))
        })?;
        let frame = FrameSpec::new(n_symbols, raw.f64("frame.tx_power_w")?)?;
        let pilot_fraction = raw.f64("frame.pilot_fraction")?;
        mi_isac::comms::Frame::pilot_count(n_symbols, pilot_fraction)?;

        let r_grid = raw.list("sweep.r_grid")?;
        for &r in &r_grid {
            LinkGeometry::new(r, 0.0, 0.0)?;
        }
        let trials = raw.u64("sweep.trials")? as usize;
        let seed = raw.u64("sweep.seed")?;
        let sweep_theta_rad = raw.f64("sweep.theta_rad")?;
        let sweep_phi_rad = raw.f64("sweep.phi_rad")?;
        LinkGeometry::new(1.0, sweep_theta_rad, sweep_phi_rad)?;

        let alpha_grid = raw.list("sweep.alpha_grid")?;
        if let Some(a) = alpha_grid.iter().find(|a| !(**a > 0.0 && **a < 1.0)) {
            return Err(CliError::Config(format!(
                "`sweep.alpha_grid`: {a} is outside (0, 1)"
            )));
        }
        let snr_db_grid = raw.list("sweep.snr_db_grid")?;
        let geometries = parse_geometries(raw.get("sweep.geometries"))?;

        Ok(Self {
            raw,
            coil,
            single_axis_coil,
            tri_axial_coil,
            carrier,
            medium,
            geometry,
            noise,
            practical_noise,
            frame,
            pilot_fraction,
            r_grid,
            trials,
            seed,
            sweep_theta_rad,
            sweep_phi_rad,
            alpha_grid,
            snr_db_grid,
            gain_axes,
            geometries,
            threads,
        })
    }

    pub fn system_params(&self, noise: NoiseModel) -> SystemParams {
        SystemParams {
            coil: self.tri_axial_coil,
            carrier: self.carrier,
            frame: self.frame,
            noise,
        }
    }

    pub fn sweep_config(&self) -> SweepConfig {
        SweepConfig {
            ranges_m: self.r_grid.clone(),
            theta_rad: self.sweep_theta_rad,
            phi_rad: self.sweep_phi_rad,
            tx_orientation: *self.geometry.tx_orientation(),
            rx_orientation: *self.geometry.rx_orientation(),
            coil: self.tri_axial_coil,
            carrier: self.carrier,
            frame: self.frame,
            pilot_fraction: self.pilot_fraction,
            profiles: vec![
                NoiseProfile {
                    name: "ideal",
                    noise: self.noise,
                },
                NoiseProfile {
                    name: "practical",
                    noise: self.practical_noise,
                },
            ],
            trials: self.trials,
            threads: self.threads,
        }
    }
}

/// `θ:φ` pairs separated by `;`.
fn parse_geometries(raw: &str) -> Result<Vec<(f64, f64)>, CliError> {
    raw.split(';')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|pair| {
            let (t, p) = pair.split_once(':').ok_or_else(|| {
                CliError::Config(format!(
                    "`sweep.geometries`: expected theta:phi, got `{pair}`"
                ))
            })?;
            let theta =
                parse_f64(t).map_err(|e| CliError::Config(format!("`sweep.geometries`: {e}")))?;
            let phi =
                parse_f64(p).map_err(|e| CliError::Config(format!("`sweep.geometries`: {e}")))?;
            if !(0.0..=PI).contains(&theta) || !(0.0..2.0 * PI).contains(&phi) {
                return Err(CliError::Config(format!(
                    "`sweep.geometries`: angles out of range in `{pair}`"
                )));
            }
            Ok((theta, phi))
        })
        .collect()
}
