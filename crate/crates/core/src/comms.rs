//! Symbol-level MI link simulation with pilot-aided and decision-directed
//! (non-data-aided) channel estimation.
//!
//! A frame is a pilot preamble followed by BPSK data. Symbol `k` is sent on
//! transmit axis `k mod n_tx` at amplitude `√P`, so every transmit axis
//! receives `P / n_tx` on average and a full frame carries the same Fisher
//! information as `N` simultaneous equal-split observations. The receiver sees
//!
//! ```text
//! y_k = H x_k + w_k,   x_k = √P s_k e_(k mod n_tx)
//! ```
//!
//! with complex noise of variance `σ_w²` per real dimension of each receive axis.
//! Per-symbol SNR is `‖H x_k‖² / (2σ_w²)`, which makes the matched-filter BPSK
//! error rate `Q(√(2·SNR))`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;
use statrs::function::erf::erfc;

use crate::error::{invalid, MiError, Result};
use crate::estimation::NoiseModel;
use crate::physics::ChannelMatrix;
use crate::seeding;

/// Gaussian tail probability `Q(x) = ½ erfc(x / √2)`.
pub fn q_function(x: f64) -> f64 {
    0.5 * erfc(x / std::f64::consts::SQRT_2)
}

/// Coherent BPSK bit error rate at linear per-symbol SNR.
pub fn bpsk_ber(snr_linear: f64) -> f64 {
    if snr_linear.is_infinite() {
        return 0.0;
    }
    q_function((2.0 * snr_linear).sqrt())
}

/// Decision-directed efficiency `(1 − 2·BER)²`.
///
/// A wrong decision flips the sign of that symbol's contribution, so the
/// information a data symbol adds to the estimate scales with the squared mean
/// of the decision sign.
pub fn eta_nda(snr_linear: f64) -> f64 {
    let b = bpsk_ber(snr_linear);
    (1.0 - 2.0 * b).powi(2)
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Pilot preamble followed by BPSK data.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pilot_symbols: Vec<Complex64>,
    data_bits: Vec<bool>,
    pilot_fraction: f64,
    tx_power_w: f64,
}

impl Frame {
    /// Frame of `total_length` symbols with `round(α·N)` unit pilots; `data_bits`
    /// must fill the remainder.
    pub fn new(
        total_length: usize,
        pilot_fraction: f64,
        tx_power_w: f64,
        data_bits: Vec<bool>,
    ) -> Result<Self> {
        let n_pilots = Self::pilot_count(total_length, pilot_fraction)?;
        if !(tx_power_w.is_finite() && tx_power_w > 0.0) {
            return Err(invalid(
                "frame.tx_power_w",
                format!("must be > 0, got {tx_power_w}"),
            ));
        }
        if data_bits.len() != total_length - n_pilots {
            return Err(invalid(
                "frame.data_bits",
                format!(
                    "expected {} data bits, got {}",
                    total_length - n_pilots,
                    data_bits.len()
                ),
            ));
        }
        Ok(Self {
            pilot_symbols: vec![Complex64::new(1.0, 0.0); n_pilots],
            data_bits,
            pilot_fraction,
            tx_power_w,
        })
    }

    /// Frame with uniformly random data bits drawn from `rng`.
    pub fn random<R: Rng + ?Sized>(
        total_length: usize,
        pilot_fraction: f64,
        tx_power_w: f64,
        rng: &mut R,
    ) -> Result<Self> {
        let n_pilots = Self::pilot_count(total_length, pilot_fraction)?;
        let bits = (0..total_length - n_pilots)
            .map(|_| rng.random::<bool>())
            .collect();
        Self::new(total_length, pilot_fraction, tx_power_w, bits)
    }

    /// `round(α·N)` after validating `α ∈ (0, 1]` and `N ≥ 1`.
    pub fn pilot_count(total_length: usize, pilot_fraction: f64) -> Result<usize> {
        if total_length == 0 {
            return Err(invalid("frame.n_symbols", "must be >= 1"));
        }
        if !(pilot_fraction > 0.0 && pilot_fraction <= 1.0) {
            return Err(invalid(
                "frame.pilot_fraction",
                format!("must lie in (0, 1], got {pilot_fraction}"),
            ));
        }
        Ok((pilot_fraction * total_length as f64).round() as usize)
    }

    pub fn total_length(&self) -> usize {
        self.pilot_symbols.len() + self.data_bits.len()
    }

    pub fn n_pilots(&self) -> usize {
        self.pilot_symbols.len()
    }

    pub fn n_data(&self) -> usize {
        self.data_bits.len()
    }

    pub fn pilot_fraction(&self) -> f64 {
        self.pilot_fraction
    }

    pub fn tx_power_w(&self) -> f64 {
        self.tx_power_w
    }

    pub fn pilot_symbols(&self) -> &[Complex64] {
        &self.pilot_symbols
    }

    pub fn data_bits(&self) -> &[bool] {
        &self.data_bits
    }

    pub fn is_pilot(&self, k: usize) -> bool {
        k < self.pilot_symbols.len()
    }

    /// Unit-energy symbol at position `k`: a pilot or a BPSK point (`false → +1`).
    pub fn symbol(&self, k: usize) -> Complex64 {
        if self.is_pilot(k) {
            self.pilot_symbols[k]
        } else {
            bpsk(self.data_bits[k - self.pilot_symbols.len()])
        }
    }

    /// Transmit axis excited by symbol `k`.
    pub fn excitation_axis(k: usize, tx_axes: usize) -> usize {
        k % tx_axes
    }

    /// Transmit vector `√P s_k e_axis`.
    pub fn tx_vector(&self, k: usize, tx_axes: usize) -> DVector<Complex64> {
        excitation(self.tx_power_w.sqrt() * self.symbol(k), k, tx_axes)
    }
}

fn bpsk(bit: bool) -> Complex64 {
    Complex64::new(if bit { -1.0 } else { 1.0 }, 0.0)
}

fn excitation(value: Complex64, k: usize, tx_axes: usize) -> DVector<Complex64> {
    let mut x = DVector::zeros(tx_axes);
    x[Frame::excitation_axis(k, tx_axes)] = value;
    x
}

/// Received samples for one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct RxObservation {
    pub samples: Vec<DVector<Complex64>>,
    /// Channel the frame was simulated through.
    pub true_channel: ChannelMatrix,
    pub noise_variance: f64,
    pub seed: u64,
}

impl RxObservation {
    /// Per-symbol SNR `‖H x_k‖² / (2σ_w²)` (infinite when noiseless).
    pub fn symbol_snr(&self, frame: &Frame, k: usize) -> f64 {
        let h = self.true_channel.entries();
        let x = frame.tx_vector(k, h.ncols());
        let signal = (h * x).norm_squared();
        if self.noise_variance == 0.0 {
            f64::INFINITY
        } else {
            signal / (2.0 * self.noise_variance)
        }
    }

    /// SNR averaged over the frame, linear.
    pub fn mean_snr(&self, frame: &Frame) -> f64 {
        let n = self.samples.len();
        (0..n).map(|k| self.symbol_snr(frame, k)).sum::<f64>() / n as f64
    }
}

/// Passes a frame through the channel; bit-reproducible for a fixed seed.
///
/// Noise is drawn symbol by symbol, receive axis by axis, real part first.
pub fn simulate_frame(
    frame: &Frame,
    channel: &ChannelMatrix,
    noise: &NoiseModel,
    seed: u64,
) -> RxObservation {
    let mut rng = seeding::stream(seed);
    let variance = noise.variance();
    let sigma = variance.sqrt();
    let h = channel.entries();
    let samples = (0..frame.total_length())
        .map(|k| {
            let clean = h * frame.tx_vector(k, h.ncols());
            clean.map(|z| {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                z + Complex64::new(sigma * re, sigma * im)
            })
        })
        .collect();
    RxObservation {
        samples,
        true_channel: channel.clone(),
        noise_variance: variance,
        seed,
    }
}

/// Least squares `Ĥ = (Σ y xᴴ)(Σ x xᴴ)⁻¹` over the given `(sample, tx vector)` pairs.
fn least_squares<'a>(
    pairs: impl Iterator<Item = (&'a DVector<Complex64>, DVector<Complex64>)>,
    rx_axes: usize,
    tx_axes: usize,
    coil_constant: f64,
) -> Result<ChannelMatrix> {
    let mut cross = DMatrix::<Complex64>::zeros(rx_axes, tx_axes);
    let mut gram = DMatrix::<Complex64>::zeros(tx_axes, tx_axes);
    for (y, x) in pairs {
        let xh = x.adjoint();
        cross += y * &xh;
        gram += &x * xh;
    }
    let sv = gram.clone().singular_values();
    let max = sv.max();
    let rank = sv.iter().filter(|&&s| s > 1e-12 * max && s > 0.0).count();
    if rank < tx_axes {
        return Err(MiError::RankDeficientPilots {
            rank,
            required: tx_axes,
        });
    }
    let inv = gram.try_inverse().ok_or(MiError::RankDeficientPilots {
        rank,
        required: tx_axes,
    })?;
    Ok(ChannelMatrix::new(cross * inv, coil_constant))
}

/// Pilot-only least-squares channel estimate.
pub fn estimate_channel_pilot(obs: &RxObservation, frame: &Frame) -> Result<ChannelMatrix> {
    let h = obs.true_channel.entries();
    let (rx_axes, tx_axes) = (h.nrows(), h.ncols());
    least_squares(
        (0..frame.n_pilots()).map(|k| (&obs.samples[k], frame.tx_vector(k, tx_axes))),
        rx_axes,
        tx_axes,
        obs.true_channel.coil_constant(),
    )
}

/// Output of decision-directed demodulation.
#[derive(Debug, Clone, PartialEq)]
pub struct NdaEstimate {
    pub bits: Vec<bool>,
    /// Least squares over pilots and re-used data decisions.
    pub refined: ChannelMatrix,
    /// Mean closed-form BER over the data symbols at their true SNR.
    pub ber_oracle: f64,
    /// `(1 − 2·ber_oracle)²`.
    pub eta_nda: f64,
    /// `n_pilots + n_data · η_NDA`.
    pub effective_symbols: f64,
}

/// BPSK detection with the pilot estimate, then re-estimation over the whole
/// frame with the decided symbols acting as virtual pilots.
pub fn demodulate_and_nda_estimate(
    obs: &RxObservation,
    frame: &Frame,
    pilot_estimate: &ChannelMatrix,
) -> Result<NdaEstimate> {
    let tx_axes = obs.true_channel.tx_axes();
    let rx_axes = obs.true_channel.rx_axes();
    if pilot_estimate.tx_axes() != tx_axes || pilot_estimate.rx_axes() != rx_axes {
        return Err(invalid(
            "pilot_estimate",
            "shape does not match the observation",
        ));
    }
    let n_p = frame.n_pilots();
    let amp = frame.tx_power_w().sqrt();
    let est = pilot_estimate.entries();

    let bits: Vec<bool> = (n_p..frame.total_length())
        .map(|k| {
            let col = est.column(Frame::excitation_axis(k, tx_axes));
            let z = col.adjoint() * &obs.samples[k];
            z[(0, 0)].re < 0.0
        })
        .collect();

    let refined = least_squares(
        (0..frame.total_length()).map(|k| {
            let x = if k < n_p {
                frame.tx_vector(k, tx_axes)
            } else {
                excitation(amp * bpsk(bits[k - n_p]), k, tx_axes)
            };
            (&obs.samples[k], x)
        }),
        rx_axes,
        tx_axes,
        pilot_estimate.coil_constant(),
    )?;

    let n_data = frame.n_data();
    let ber_oracle = if n_data == 0 {
        0.0
    } else {
        (n_p..frame.total_length())
            .map(|k| bpsk_ber(obs.symbol_snr(frame, k)))
            .sum::<f64>()
            / n_data as f64
    };
    let eta = (1.0 - 2.0 * ber_oracle).powi(2);
    Ok(NdaEstimate {
        bits,
        refined,
        ber_oracle,
        eta_nda: eta,
        effective_symbols: n_p as f64 + n_data as f64 * eta,
    })
}

/// Per-entry mean squared error summary of a channel estimate over trials.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EstimateError {
    /// Mean over entries of the per-real-dimension error variance.
    pub per_entry_variance: f64,
    pub trials: usize,
}

/// Accumulates `|Ĥ − H|²` per real dimension over trials.
#[derive(Debug, Clone, Default)]
pub struct ErrorAccumulator {
    sum_sq: f64,
    dims: usize,
    trials: usize,
}

impl ErrorAccumulator {
    pub fn push(&mut self, estimate: &ChannelMatrix, truth: &ChannelMatrix) {
        let e = estimate.entries() - truth.entries();
        self.sum_sq += e.iter().map(|z| z.norm_sqr()).sum::<f64>();
        self.dims = 2 * e.len();
        self.trials += 1;
    }

    pub fn finish(&self) -> EstimateError {
        EstimateError {
            per_entry_variance: self.sum_sq / (self.dims * self.trials.max(1)) as f64,
            trials: self.trials,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::physics::{channel_matrix, CarrierSpec, CoilSpec, LinkGeometry, MediumModel};
    use rand::SeedableRng;

    fn channel() -> ChannelMatrix {
        let geom = LinkGeometry::new(10.0, 0.9, 2.2).unwrap();
        channel_matrix(
            &geom,
            &CoilSpec::tri_axial(0.15, 20).unwrap(),
            &CarrierSpec::new(1e4, 1e3).unwrap(),
            &MediumModel::lossless(),
        )
        .unwrap()
    }

    fn frame(n: usize, alpha: f64) -> Frame {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        Frame::random(n, alpha, 1.0, &mut rng).unwrap()
    }

    #[test]
    fn pilot_counts() {
        assert_eq!(Frame::pilot_count(100, 0.25).unwrap(), 25);
        assert_eq!(Frame::pilot_count(10, 0.25).unwrap(), 3);
        assert!(Frame::pilot_count(10, 0.0).is_err());
        assert!(Frame::pilot_count(10, 1.5).is_err());
        let f = frame(100, 0.3);
        assert_eq!(f.n_pilots() + f.n_data(), 100);
    }

    #[test]
    fn noiseless_observations_are_exact() {
        let h = channel();
        let f = frame(30, 0.5);
        let quiet = NoiseModel::noiseless(1e3).unwrap();
        let obs = simulate_frame(&f, &h, &quiet, 1);
        for (k, y) in obs.samples.iter().enumerate() {
            assert_eq!(*y, h.entries() * f.tx_vector(k, 3));
        }
        let est = estimate_channel_pilot(&obs, &f).unwrap();
        assert!((est.entries() - h.entries())
            .iter()
            .all(|z| z.norm() <= 1e-20));
        let nda = demodulate_and_nda_estimate(&obs, &f, &est).unwrap();
        assert_eq!(nda.bits, f.data_bits());
        assert_eq!(nda.eta_nda, 1.0);
        assert_eq!(nda.effective_symbols, 30.0);
    }

    #[test]
    fn same_seed_same_samples() {
        let h = channel();
        let f = frame(20, 0.5);
        let noise = NoiseModel::ideal(1e3).unwrap();
        assert_eq!(
            simulate_frame(&f, &h, &noise, 9),
            simulate_frame(&f, &h, &noise, 9)
        );
        assert_ne!(
            simulate_frame(&f, &h, &noise, 9),
            simulate_frame(&f, &h, &noise, 10)
        );
    }

    #[test]
    fn two_pilots_are_rank_deficient() {
        let h = channel();
        let f = Frame::new(10, 0.2, 1.0, vec![false; 8]).unwrap();
        let obs = simulate_frame(&f, &h, &NoiseModel::ideal(1e3).unwrap(), 3);
        assert_eq!(
            estimate_channel_pilot(&obs, &f),
            Err(MiError::RankDeficientPilots {
                rank: 2,
                required: 3
            })
        );
    }

    #[test]
    fn ber_closed_form_values() {
        assert_eq!(bpsk_ber(f64::INFINITY), 0.0);
        // Q(√20), tabulated value 3.8721e-6
        assert!((bpsk_ber(10.0) - 3.8721e-6).abs() < 1e-9);
        assert!((q_function(0.0) - 0.5).abs() < 1e-16);
    }

    #[test]
    fn eta_is_monotone_and_bounded() {
        let mut last = 0.0;
        for i in -40..=60 {
            let e = eta_nda(db_to_linear(i as f64 * 0.5));
            assert!((0.0..=1.0).contains(&e));
            assert!(e >= last);
            last = e;
        }
        assert_eq!(eta_nda(f64::INFINITY), 1.0);
    }

    #[test]
    fn frame_rejects_wrong_bit_count() {
        assert!(Frame::new(10, 0.5, 1.0, vec![true; 4]).is_err());
    }
}
