//! Radio environment: constellations, channel models, command trajectories,
//! resource-grid synthesis with jammers, and generalized observations.

pub mod channel;
pub mod modulation;
pub mod observation;
pub mod scenario;
pub mod trajectory;

pub use channel::{ChannelConfig, CtuParams, PathLossModel};
pub use modulation::{ModulationScheme, C64};
pub use observation::{build_generalized_observations, GeneralizedObservation};
pub use scenario::{
    bandwidth_for_prbs, prbs_for_bandwidth, synthesize_scenario, JammerPattern, JammerStrategy, JammerWaveform, ResourceGrid, Scenario, ScenarioConfig,
    LTE_BANDWIDTHS,
};
pub use trajectory::{integrate_trajectory, FlightPlan, Trajectory};
