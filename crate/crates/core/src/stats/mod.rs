//! Bootstrap resampling, the one-sided Welch test and calibration error.

mod bootstrap;
mod ece;
mod welch;

pub use bootstrap::{
    bootstrap, bootstrap_many, draw_weights, expand, percentile, thread_count, BootstrapConfig, BootstrapResult,
    ResampleUnit, DEFAULT_N_BOOT, MAX_REDRAWS, THREADS_ENV,
};
pub use ece::{ece, DEFAULT_ECE_BINS};
pub use welch::{student_t_sf, welch_one_sided, WelchResult};
