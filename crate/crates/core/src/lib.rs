//! Secret key rates for phase-encoded QKD with a strong reference pulse,
//! evaluated against a soft-filtering eavesdropper, together with standard
//! and decoy-state BB84 baselines.

pub mod attack;
pub mod discrimination;
pub mod error;
pub mod optimize;
pub mod physics;
pub mod rates;
pub mod simulation;
pub mod sweeps;

pub use attack::{AttackPoint, AttackSolution, SearchOptions};
pub use error::{Error, Result};
pub use physics::{ChannelDerived, DetectorConfig, Protocol, SetupConfig};
pub use rates::{Bb84Yields, DecoyConfig, DecoyRatios, RateBreakdown};
pub use simulation::{DoubleClickPolicy, SimAttack, SimConfig, SimResult};
pub use sweeps::{Bb84MuPolicy, DistanceOptions, GridSpec, MuPolicy, Range, Scale, SrpCriterion, SweepRow};
