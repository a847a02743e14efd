//! Fisher information, Cramér–Rao bounds, noise models and the channel-inversion
//! sensing path.

mod fisher;
mod noise;
mod sensing;

pub use fisher::{
    crb_range_analytic, fim_numeric, response_jacobian, FisherInfo, ANGLE_STEP_RAD, RANGE_STEP_REL,
    RANK_TOLERANCE,
};
pub use noise::{
    effective_noise_variance, FrameSpec, NoiseModel, BOLTZMANN, PRACTICAL_INSERTION_LOSS_DB,
    PRACTICAL_NOISE_FIGURE_DB, REFERENCE_TEMPERATURE_K,
};
pub use sensing::{
    estimate_direction_eigen, estimate_link, estimate_range_closed_form, mle_refine,
    EstimationResult, MleContext, MleOptions, MIN_EIGENGAP, TENSOR_FROBENIUS_NORM,
};
