//! Simulation of a sliding-correlator channel sounder and the analysis
//! chain behind directional path-loss campaigns.
//!
//! Numeric code is generic over [`Real`] (`f32` or `f64`). Timing relations
//! accept any `num_traits::Num`, so they can be evaluated exactly over
//! [`ExactRate`]. The aliases below fix the scalar to `f64`.

// `!(x > 0.0)` rejects NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod campaign;
pub mod channel;
pub mod correlator;
pub mod dsp;
pub mod error;
pub mod geometry;
pub mod io;
pub mod pdp;
pub mod plot;
pub mod pn;
pub mod scalar;
pub mod scenario;
pub mod sweep;
pub mod waveform;

pub use analysis::{ci_fit, fading_rate, local_power_std, max_measurable_path_loss, omni_power, CiFit, LinkBudget};
pub use campaign::{run_campaign, CampaignKind, CampaignSpec, ResultBundle};
pub use channel::{apply_channel, synthesize_channel, AntennaPattern, BeamPattern, Isotropic};
pub use correlator::{correlate_fast, correlate_literal, CorrelatorConfig, FastCorrelator, Preset};
pub use error::{ErrorClass, Result, SounderError};
pub use plot::{emit_plot_data, PlotKind};
pub use pn::{generate_leapforward, generate_msequence, ChipSequence, LfsrSpec};
pub use scalar::Real;
pub use scenario::{load_scenario, ScenarioConfig};
pub use sweep::{run_sweep, CorrelatorKind, Sounder, SweepParams};

/// Exact rational used for chip-rate arithmetic.
pub type ExactRate = num_rational::Ratio<i64>;

pub type Waveform = waveform::SampledWaveform<f64>;
pub type Channel = channel::MultipathChannel<f64>;
pub type PathTap = channel::PathComponent<f64>;
pub type Cir = correlator::DilatedCir<f64>;
pub type Pdp = pdp::PowerDelayProfile<f64>;
pub type Sweep = sweep::SweepSet<f64>;
pub type Correlator = correlator::CorrelatorConfig<f64>;
