//! Numerical laboratory for cyclic delay systems with threshold-type
//! state-dependent delay and their discrete-time analogues.
//!
//! The crate simulates the semiflow, evaluates an integer-valued Lyapunov
//! function based on sign-change counts, counts unstable characteristic
//! roots of the linearization, and assembles ensemble-level evidence for
//! the gradient-like level structure of the dynamics: level monotonicity
//! along trajectories, level constancy on limit sets, a downward-only level
//! graph, and consistency with the spectral threshold level.
//!
//! Module map:
//! - [`segment`]: phase-space points with C¹ data and both norms
//! - [`kernel`]: the threshold delay `∫_{-τ}^0 α(φ) = 1`
//! - [`lyapunov`]: sign-change counting, parity branches, regularity sets
//! - [`system`]: cyclic feedback systems and nonlinearity presets
//! - [`integrator`]: the semiflow with dense output and η tracking
//! - [`spectrum`]: characteristic roots, the unstable count, and N*
//! - [`morse`]: trajectory ensembles and the level graph
//! - [`difference`]: the exact discrete-time analogue
//! - [`config`]: JSON experiment descriptions
//! - [`verify`]: the acceptance suite
//!
//! ```
//! use delay_morse::{
//!     integrate, lyapunov_value, CyclicSystemSpec, DelayKernel, Delta, Nonlinearity, Segment,
//! };
//! use delay_morse::kernel::KernelProfile;
//!
//! // Scalar negative feedback with a plateau rate kernel.
//! let system = CyclicSystemSpec::scalar(
//!     Nonlinearity::TanhFeedback { decay: 1.0, gain: -2.0, slope: 2.0 },
//!     Delta::Negative,
//!     2.0,
//! );
//! let kernel = DelayKernel::new(
//!     KernelProfile::PlateauTanh { alpha0: 1.0, eps: 0.05, alpha2: 1.2, rate: 1.0 },
//!     1.0,
//! )?;
//! let history = Segment::from_fn(
//!     |s| 0.5 * (3.0 * s).sin() + 0.2,
//!     |s| 1.5 * (3.0 * s).cos(),
//!     vec![],
//!     1.0,
//!     201,
//! )?;
//!
//! // The level at the start and after ten time units never increases.
//! let trajectory = integrate(&system, &kernel, &history, 10.0, 0.0025)?;
//! let v0 = lyapunov_value(&trajectory.segment_at(1.0)?, &kernel, system.delta)?;
//! let v1 = lyapunov_value(&trajectory.segment_at(10.0)?, &kernel, system.delta)?;
//! assert!(v1.value <= v0.value);
//! assert_eq!(v1.value % 2, 1);
//! # Ok::<(), delay_morse::Error>(())
//! ```

pub mod config;
pub mod difference;
pub mod error;
pub mod integrator;
pub mod kernel;
pub mod lyapunov;
pub mod morse;
pub mod segment;
pub mod spectrum;
pub mod system;
pub mod verify;

pub use config::ExperimentConfig;
pub use error::{Error, Result};
pub use integrator::{integrate, Trajectory, TrajectoryChecks};
pub use kernel::{kernel_integral, solve_threshold_delay, DelayKernel, KernelProfile};
pub use lyapunov::{
    count_sign_changes, lyapunov_value, regularity_membership, v_signed, Delta, LyapunovValue,
    ParityBranch, RegularitySet, RegularityVerdict,
};
pub use morse::{
    check_nstar_consistency, detect_periodic, estimate_omega_level, run_ensemble, MorseReport,
    ScanParams,
};
pub use segment::Segment;
pub use spectrum::{
    char_fn, compute_nstar, count_unstable_roots, linearize, spectrum_report, SpectrumReport,
};
pub use system::{CyclicSystemSpec, Nonlinearity};
