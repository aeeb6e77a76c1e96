//! Behavioral transient simulator for a low-voltage, low-power 3-phase AC→DC
//! conditioning chain: an actively rectified MOSFET bridge with self-supplied
//! comparator control and an autonomous start-up circuit, a soft-connected
//! bulk capacitor on the auxiliary gndc terminal, and a cascaded PFM boost
//! regulator.

pub mod analysis;
pub mod boost;
pub mod control;
pub mod engine;
pub mod error;
pub mod generator;
pub mod power_stage;
pub mod pwl;
pub mod scenario;

pub use analysis::{efficiency_report, export_csv, sweep, RunSummary, SweepTable, Window};
pub use boost::{boost_efficiency, boost_step, BoostMode, BoostParams, BoostState};
pub use control::{
    c1_dynamics_step, startup_engage_condition, startup_release_condition, ComparatorBank,
    ControlParams, Controller, GndcSequencer, RectifierMode, ReferenceGenerator,
    StartupCircuitState,
};
pub use engine::{locate_event, run, startup_duration, EngineConfig, EnergyTotals, Trace};
pub use error::{Result, SimError};
pub use generator::ThreePhaseSource;
pub use power_stage::{
    body_diode_rectification_floor, PowerStageState, RectifierNetwork, RectifierStage,
    StepInputs, SwitchModel,
};
pub use scenario::{load_scenario, parse_scenario, topology_catalog, Scenario, TopologyTag};
