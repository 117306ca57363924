//! Evidence for a certificate that does not rely on the solver.

mod check;
mod gain;
mod sample;
mod simulate;

pub use check::{
    check_certificate, decrease_blocks, evaluate_v, evaluate_v_in, max_decay_margin, CheckItem,
    CheckReport, DecreaseBlock,
};
pub use gain::hinf_channel_gain;
pub use sample::{random_state_in_region, sample_certificate, SampleReport};
pub use simulate::{
    check_decrease, cross_validate_pwa, envelope_rate, simulate_pair, DecreaseReport,
    TrajectoryPair,
};
