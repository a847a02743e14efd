//! Resolution comparison, ISAC gain decomposition and Monte Carlo validation
//! of the range bound.

use nalgebra::{Rotation3, Vector3};
use rayon::prelude::*;
use serde::Serialize;

use crate::comms::{
    db_to_linear, demodulate_and_nda_estimate, estimate_channel_pilot, eta_nda, simulate_frame,
    Frame,
};
use crate::error::{invalid, MiError, Result};
use crate::estimation::{crb_range_analytic, estimate_link, FrameSpec, MleContext, NoiseModel};
use crate::physics::{channel_matrix, CarrierSpec, CoilSpec, LinkGeometry, LinkModel, MediumModel};
use crate::seeding;

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
/// UWB reference bandwidth for the crossover.
pub const UWB_BANDWIDTH_HZ: f64 = 500e6;
/// Narrowband MI bandwidth.
pub const NARROWBAND_BANDWIDTH_HZ: f64 = 1e3;
/// Bisection bracket for the crossover range, metres.
pub const CROSSOVER_BRACKET_M: (f64, f64) = (0.1, 1000.0);
/// Absolute bisection tolerance, metres.
pub const CROSSOVER_TOLERANCE_M: f64 = 1e-6;
/// Minimum Monte Carlo trials per sweep cell.
pub const MIN_TRIALS: usize = 500;

/// Time-of-flight range resolution `c / (2B)`.
pub fn tof_resolution(bandwidth_hz: f64) -> Result<f64> {
    if !(bandwidth_hz.is_finite() && bandwidth_hz > 0.0) {
        return Err(invalid(
            "bandwidth_hz",
            format!("must be > 0, got {bandwidth_hz}"),
        ));
    }
    Ok(SPEED_OF_LIGHT / (2.0 * bandwidth_hz))
}

/// Coil, carrier, frame and noise shared by the analytic curves.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemParams {
    pub coil: CoilSpec,
    pub carrier: CarrierSpec,
    pub frame: FrameSpec,
    pub noise: NoiseModel,
}

impl SystemParams {
    /// a = 0.15 m, N_t = 20, f₀ = 10 kHz, B = 1 kHz, N = 100, P = 1 W, ideal 290 K noise.
    pub fn reference() -> Self {
        Self {
            coil: CoilSpec::tri_axial(0.15, 20).expect("valid reference coil"),
            carrier: CarrierSpec::new(10e3, 1e3).expect("valid reference carrier"),
            frame: FrameSpec::new(100, 1.0).expect("valid reference frame"),
            noise: NoiseModel::ideal(1e3).expect("valid reference noise"),
        }
    }

    pub fn with_noise(mut self, noise: NoiseModel) -> Self {
        self.noise = noise;
        self
    }

    /// `√CRB(r)` from the closed form.
    pub fn mi_resolution(&self, range_m: f64) -> Result<f64> {
        let geom = LinkGeometry::new(range_m, 0.0, 0.0)?;
        Ok(crb_range_analytic(&geom, &self.coil, &self.carrier, &self.frame, &self.noise)?.sqrt())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ResolutionRecord {
    pub range_m: f64,
    pub mi_resolution_m: f64,
    pub tof_1khz_m: f64,
    pub tof_500mhz_m: f64,
}

/// Where coupling-gradient ranging stops beating a ToF reference.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Crossover {
    /// `√CRB(r*) = c / (2B)` inside the bracket.
    Within { range_m: f64 },
    /// Coupling-gradient ranging is finer over the whole bracket.
    BeyondBracket { upper_m: f64 },
}

impl Crossover {
    pub fn range_m(&self) -> Option<f64> {
        match self {
            Crossover::Within { range_m } => Some(*range_m),
            Crossover::BeyondBracket { .. } => None,
        }
    }
}

/// Solves `√CRB(r*) = c / (2·tof_bandwidth)` by bisection on [`CROSSOVER_BRACKET_M`].
pub fn crossover_range(params: &SystemParams, tof_bandwidth_hz: f64) -> Result<Crossover> {
    let target = tof_resolution(tof_bandwidth_hz)?;
    let (mut lo, mut hi) = CROSSOVER_BRACKET_M;
    let f = |r: f64| params.mi_resolution(r).map(|v| v - target);
    if f(lo)? > 0.0 {
        return Err(MiError::NoCrossover {
            tof_resolution_m: target,
        });
    }
    if f(hi)? < 0.0 {
        return Ok(Crossover::BeyondBracket { upper_m: hi });
    }
    while hi - lo > CROSSOVER_TOLERANCE_M {
        let mid = 0.5 * (lo + hi);
        if f(mid)? < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(Crossover::Within {
        range_m: 0.5 * (lo + hi),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResolutionSweep {
    pub records: Vec<ResolutionRecord>,
    /// Crossover against 500 MHz UWB.
    pub crossover_uwb: Crossover,
    /// Crossover against 1 kHz narrowband ToF.
    pub crossover_narrowband: Crossover,
}

pub fn resolution_sweep(r_grid: &[f64], params: &SystemParams) -> Result<ResolutionSweep> {
    if r_grid.is_empty() {
        return Err(invalid("sweep.r_grid", "must not be empty"));
    }
    let tof_1khz_m = tof_resolution(NARROWBAND_BANDWIDTH_HZ)?;
    let tof_500mhz_m = tof_resolution(UWB_BANDWIDTH_HZ)?;
    let records = r_grid
        .iter()
        .map(|&r| {
            Ok(ResolutionRecord {
                range_m: r,
                mi_resolution_m: params.mi_resolution(r)?,
                tof_1khz_m,
                tof_500mhz_m,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ResolutionSweep {
        records,
        crossover_uwb: crossover_range(params, UWB_BANDWIDTH_HZ)?,
        crossover_narrowband: crossover_range(params, NARROWBAND_BANDWIDTH_HZ)?,
    })
}

/// Coil arrangement compared in the gain analysis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum AxisConfig {
    SingleAxis,
    TriAxial,
}

impl AxisConfig {
    /// Independent coupling-tensor observations per symbol: 1 for a scalar
    /// link, 6 for the symmetric 3×3 tensor.
    pub fn independent_observations(&self) -> f64 {
        match self {
            AxisConfig::SingleAxis => 1.0,
            AxisConfig::TriAxial => 6.0,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            AxisConfig::SingleAxis => "single",
            AxisConfig::TriAxial => "tri",
        }
    }
}

/// Sensing gain of ISAC over a TDMA split with pilot fraction α.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GainRecord {
    pub alpha: f64,
    pub snr_db: f64,
    pub time_mux_gain_db: f64,
    pub structural_gain_db: f64,
    pub total_gain_db: f64,
}

/// Gain decomposition `total = 10 log₁₀(1/α) + max(0, 10 log₁₀(η_NDA · D))`.
///
/// The structural term is a model: `D` counts independent tensor observations
/// and `η_NDA` discounts decision errors. `snr_db = +∞` is accepted.
pub fn isac_gain(alpha: f64, snr_db: f64, axes: AxisConfig) -> Result<GainRecord> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(invalid("alpha", format!("must lie in (0, 1), got {alpha}")));
    }
    if snr_db.is_nan() || snr_db == f64::NEG_INFINITY {
        return Err(invalid(
            "snr_db",
            format!("must be finite or +inf, got {snr_db}"),
        ));
    }
    let time_mux_gain_db = 10.0 * (1.0 / alpha).log10();
    let eta = eta_nda(db_to_linear(snr_db));
    let structural_gain_db = (10.0 * (eta * axes.independent_observations()).log10()).max(0.0);
    Ok(GainRecord {
        alpha,
        snr_db,
        time_mux_gain_db,
        structural_gain_db,
        total_gain_db: time_mux_gain_db + structural_gain_db,
    })
}

/// Named receiver noise profile for a sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseProfile {
    pub name: &'static str,
    pub noise: NoiseModel,
}

/// Monte Carlo validation grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub ranges_m: Vec<f64>,
    pub theta_rad: f64,
    pub phi_rad: f64,
    pub tx_orientation: Rotation3<f64>,
    pub rx_orientation: Rotation3<f64>,
    pub coil: CoilSpec,
    pub carrier: CarrierSpec,
    pub frame: FrameSpec,
    /// Pilot fraction of each simulated frame; below 1 the data symbols are
    /// re-used through decision-directed estimation.
    pub pilot_fraction: f64,
    pub profiles: Vec<NoiseProfile>,
    pub trials: usize,
    /// Worker threads, 0 = rayon default.
    pub threads: usize,
}

impl SweepConfig {
    /// Reference parameters with ideal and practical profiles over {1, 2, 5, 10, 20, 30} m.
    pub fn reference(trials: usize) -> Self {
        let p = SystemParams::reference();
        Self {
            ranges_m: vec![1.0, 2.0, 5.0, 10.0, 20.0, 30.0],
            theta_rad: std::f64::consts::FRAC_PI_4,
            phi_rad: std::f64::consts::FRAC_PI_3,
            tx_orientation: Rotation3::identity(),
            rx_orientation: Rotation3::identity(),
            coil: p.coil,
            carrier: p.carrier,
            frame: p.frame,
            pilot_fraction: 1.0,
            profiles: vec![
                NoiseProfile {
                    name: "ideal",
                    noise: NoiseModel::ideal(p.carrier.bandwidth_hz()).expect("valid"),
                },
                NoiseProfile {
                    name: "practical",
                    noise: NoiseModel::practical(p.carrier.bandwidth_hz()).expect("valid"),
                },
            ],
            trials,
            threads: 0,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.ranges_m.is_empty() {
            return Err(invalid("sweep.r_grid", "must not be empty"));
        }
        if self.profiles.is_empty() {
            return Err(invalid("sweep.profiles", "must not be empty"));
        }
        if self.trials < MIN_TRIALS {
            return Err(invalid(
                "sweep.trials",
                format!(
                    "at least {MIN_TRIALS} trials per cell required, got {}",
                    self.trials
                ),
            ));
        }
        if !self.coil.is_tri_axial() {
            return Err(MiError::NotIdentifiable);
        }
        Frame::pilot_count(self.frame.n_symbols(), self.pilot_fraction)?;
        for &r in &self.ranges_m {
            LinkGeometry::new(r, self.theta_rad, self.phi_rad)?;
        }
        Ok(())
    }
}

/// One `(range, noise profile)` cell of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepCell {
    pub range_index: usize,
    pub profile_index: usize,
    pub profile: &'static str,
    pub range_m: f64,
    pub cell_seed: u64,
    pub trials: usize,
    /// Trials that failed or did not converge; excluded from the RMSE.
    pub nonconverged: usize,
    pub rmse_m: f64,
    pub sqrt_crb_m: f64,
    /// `rmse_m / sqrt_crb_m`.
    pub efficiency: f64,
}

impl SweepCell {
    /// The estimator should not beat the bound by more than sampling error.
    pub fn efficiency_floor(&self) -> f64 {
        let used = (self.trials - self.nonconverged).max(1) as f64;
        1.0 - 3.0 / used.sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonteCarloSweep {
    pub base_seed: u64,
    pub trials: usize,
    pub generator: &'static str,
    /// Sorted by `(range_index, profile_index)`.
    pub cells: Vec<SweepCell>,
}

impl MonteCarloSweep {
    pub fn cell(&self, range_index: usize, profile_index: usize) -> Option<&SweepCell> {
        self.cells
            .iter()
            .find(|c| c.range_index == range_index && c.profile_index == profile_index)
    }
}

/// Runs the full sensing path over every `(range, profile)` cell.
///
/// Cell seeds depend on the range index only, so all noise profiles at one
/// range see the same underlying draws (common random numbers); the
/// practical-to-ideal ratio then isolates the front-end penalty.
pub fn run_crb_validation(config: &SweepConfig, base_seed: u64) -> Result<MonteCarloSweep> {
    config.validate()?;
    let jobs: Vec<(usize, usize)> = (0..config.ranges_m.len())
        .flat_map(|ri| (0..config.profiles.len()).map(move |pi| (ri, pi)))
        .collect();

    let run = || -> Result<Vec<SweepCell>> {
        jobs.par_iter()
            .map(|&(ri, pi)| run_cell(config, base_seed, ri, pi))
            .collect()
    };
    let mut cells = if config.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(config.threads)
            .build()
            .map_err(|e| invalid("threads", e.to_string()))?
            .install(run)?
    } else {
        run()?
    };
    cells.sort_by_key(|c| (c.range_index, c.profile_index));
    Ok(MonteCarloSweep {
        base_seed,
        trials: config.trials,
        generator: seeding::GENERATOR_NAME,
        cells,
    })
}

fn run_cell(
    config: &SweepConfig,
    base_seed: u64,
    range_index: usize,
    profile_index: usize,
) -> Result<SweepCell> {
    let range_m = config.ranges_m[range_index];
    let profile = config.profiles[profile_index];
    let geometry = LinkGeometry::new(range_m, config.theta_rad, config.phi_rad)?
        .with_rotations(config.tx_orientation, config.rx_orientation);
    let medium = MediumModel::lossless();
    let truth = channel_matrix(&geometry, &config.coil, &config.carrier, &medium)?;
    let model = LinkModel::for_geometry(&geometry, &config.coil, &config.carrier, &medium);
    let context = MleContext::new(model, config.frame, profile.noise);
    let prior: Vector3<f64> = geometry.direction();
    let cell_seed = seeding::cell_seed(base_seed, range_index as u64);

    let mut sum_sq = 0.0;
    let mut ok = 0usize;
    for trial in 0..config.trials {
        let seed = seeding::trial_seed(cell_seed, trial as u64);
        let mut rng = seeding::stream(seed);
        let frame = Frame::random(
            config.frame.n_symbols(),
            config.pilot_fraction,
            config.frame.tx_power_w(),
            &mut rng,
        )?;
        let obs = simulate_frame(&frame, &truth, &profile.noise, seeding::splitmix64(seed));
        let estimate = estimate_channel_pilot(&obs, &frame).and_then(|pilot| {
            if frame.n_data() == 0 {
                Ok(pilot)
            } else {
                demodulate_and_nda_estimate(&obs, &frame, &pilot).map(|nda| nda.refined)
            }
        });
        match estimate.and_then(|h| estimate_link(&h, &context, &prior)) {
            Ok(est) if est.converged => {
                sum_sq += (est.range_m - range_m).powi(2);
                ok += 1;
            }
            Ok(_) => {
                log::debug!("cell ({range_index},{profile_index}) trial {trial}: not converged")
            }
            Err(e) => log::debug!("cell ({range_index},{profile_index}) trial {trial}: {e}"),
        }
    }
    let nonconverged = config.trials - ok;
    if nonconverged > 0 {
        log::info!(
            "cell r={range_m} m profile={}: {nonconverged}/{} trials excluded",
            profile.name,
            config.trials
        );
    }
    let rmse_m = if ok > 0 {
        (sum_sq / ok as f64).sqrt()
    } else {
        f64::NAN
    };
    let sqrt_crb_m = crb_range_analytic(
        &geometry,
        &config.coil,
        &config.carrier,
        &config.frame,
        &profile.noise,
    )?
    .sqrt();
    Ok(SweepCell {
        range_index,
        profile_index,
        profile: profile.name,
        range_m,
        cell_seed,
        trials: config.trials,
        nonconverged,
        rmse_m,
        sqrt_crb_m,
        efficiency: rmse_m / sqrt_crb_m,
    })
}

/// Least-squares slope of `log y` against `log x`.
pub fn log_log_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}
