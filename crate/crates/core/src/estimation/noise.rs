use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::physics::CoilSpec;

/// Boltzmann constant in J/K (exact SI value).
pub const BOLTZMANN: f64 = 1.380649e-23;

/// Reference noise temperature in kelvin.
pub const REFERENCE_TEMPERATURE_K: f64 = 290.0;

/// Noise figure of the practical front-end profile, dB.
pub const PRACTICAL_NOISE_FIGURE_DB: f64 = 6.0;

/// Finite-Q insertion loss of the practical front-end profile, dB.
pub const PRACTICAL_INSERTION_LOSS_DB: f64 = 3.0;

/// Thermal receiver noise with an aggregate front-end penalty.
///
/// The variance applies to each real dimension of each receive axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    temperature_k: f64,
    noise_figure_db: f64,
    insertion_loss_db: f64,
    bandwidth_hz: f64,
}

impl NoiseModel {
    /// A zero temperature is accepted and yields a noiseless receiver.
    pub fn new(
        temperature_k: f64,
        noise_figure_db: f64,
        insertion_loss_db: f64,
        bandwidth_hz: f64,
    ) -> Result<Self> {
        if !(temperature_k.is_finite() && temperature_k >= 0.0) {
            return Err(invalid(
                "noise.temperature_k",
                format!("must be >= 0, got {temperature_k}"),
            ));
        }
        if !(noise_figure_db.is_finite() && noise_figure_db >= 0.0) {
            return Err(invalid(
                "noise.noise_figure_db",
                format!("must be >= 0, got {noise_figure_db}"),
            ));
        }
        if !(insertion_loss_db.is_finite() && insertion_loss_db >= 0.0) {
            return Err(invalid(
                "noise.insertion_loss_db",
                format!("must be >= 0, got {insertion_loss_db}"),
            ));
        }
        if !(bandwidth_hz.is_finite() && bandwidth_hz > 0.0) {
            return Err(invalid(
                "noise.bandwidth_hz",
                format!("must be > 0, got {bandwidth_hz}"),
            ));
        }
        Ok(Self {
            temperature_k,
            noise_figure_db,
            insertion_loss_db,
            bandwidth_hz,
        })
    }

    /// Ideal thermal noise at 290 K.
    pub fn ideal(bandwidth_hz: f64) -> Result<Self> {
        Self::new(REFERENCE_TEMPERATURE_K, 0.0, 0.0, bandwidth_hz)
    }

    /// 290 K with a 6 dB noise figure and 3 dB insertion loss.
    pub fn practical(bandwidth_hz: f64) -> Result<Self> {
        Self::new(
            REFERENCE_TEMPERATURE_K,
            PRACTICAL_NOISE_FIGURE_DB,
            PRACTICAL_INSERTION_LOSS_DB,
            bandwidth_hz,
        )
    }

    pub fn noiseless(bandwidth_hz: f64) -> Result<Self> {
        Self::new(0.0, 0.0, 0.0, bandwidth_hz)
    }

    pub fn temperature_k(&self) -> f64 {
        self.temperature_k
    }

    pub fn noise_figure_db(&self) -> f64 {
        self.noise_figure_db
    }

    pub fn insertion_loss_db(&self) -> f64 {
        self.insertion_loss_db
    }

    pub fn bandwidth_hz(&self) -> f64 {
        self.bandwidth_hz
    }

    /// Total front-end penalty in dB.
    pub fn penalty_db(&self) -> f64 {
        self.noise_figure_db + self.insertion_loss_db
    }

    /// `k_B · T · B · 10^((NF + IL) / 10)`.
    pub fn variance(&self) -> f64 {
        BOLTZMANN * self.temperature_k * self.bandwidth_hz * 10f64.powf(self.penalty_db() / 10.0)
    }
}

pub fn effective_noise_variance(noise: &NoiseModel) -> f64 {
    noise.variance()
}

/// Observation frame used by the bounds: `N` symbols at total power `P`,
/// split equally across the transmit axes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameSpec {
    n_symbols: usize,
    tx_power_w: f64,
}

impl FrameSpec {
    pub fn new(n_symbols: usize, tx_power_w: f64) -> Result<Self> {
        if n_symbols == 0 {
            return Err(invalid("frame.n_symbols", "must be >= 1"));
        }
        if !(tx_power_w.is_finite() && tx_power_w > 0.0) {
            return Err(invalid(
                "frame.tx_power_w",
                format!("must be > 0, got {tx_power_w}"),
            ));
        }
        Ok(Self {
            n_symbols,
            tx_power_w,
        })
    }

    pub fn n_symbols(&self) -> usize {
        self.n_symbols
    }

    pub fn tx_power_w(&self) -> f64 {
        self.tx_power_w
    }

    pub fn per_axis_power(&self, coil: &CoilSpec) -> f64 {
        self.tx_power_w / coil.axis_count() as f64
    }

    /// Per-entry, per-real-dimension variance of a least-squares channel estimate
    /// gathered over the whole frame.
    pub fn channel_estimate_variance(&self, coil: &CoilSpec, noise: &NoiseModel) -> f64 {
        noise.variance() / (self.n_symbols as f64 * self.per_axis_power(coil))
    }
}
