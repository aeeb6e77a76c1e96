//! Scenario configuration: the TOML surface of the simulator.
//!
//! A scenario is a key/value tree with one section per subsystem. Every key
//! has a documented default; unknown keys are rejected so typos cannot
//! silently fall back to defaults. All quantities are SI (volts, ohms,
//! henries, farads, seconds, hertz, siemens, amperes).

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::boost::BoostParams;
use crate::control::ControlParams;
use crate::engine::EngineConfig;
use crate::error::{Result, SimError};
use crate::generator::ThreePhaseSource;
use crate::power_stage::{RectifierNetwork, SwitchModel};

/// Rectifier parameters as they appear in a scenario file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RectifierParams {
    /// On-state channel resistance of each power switch (Ω).
    pub r_on: f64,
    /// Off-state channel resistance (Ω).
    pub r_off: f64,
    /// High-side gate threshold (V); start-up documentation value.
    pub v_th_p: f64,
    /// Low-side gate threshold (V); start-up documentation value.
    pub v_th_n: f64,
    /// Body diode forward drop (V).
    pub body_vf: f64,
    /// Body diode series resistance (Ω).
    pub body_rd: f64,
    /// V_DDA decoupling capacitance (F).
    pub c_vdda: f64,
    /// Bulk output capacitance on the gndc side (F).
    pub c_out: f64,
    /// Bleed resistance kept on V_DDA when the boost stage is the load (Ω).
    pub r_shunt: f64,
}

impl Default for RectifierParams {
    fn default() -> Self {
        Self {
            r_on: 1.0,
            r_off: 1e7,
            v_th_p: 0.7,
            v_th_n: 0.5,
            body_vf: 0.6,
            body_rd: 10.0,
            c_vdda: 10e-9,
            c_out: 1e-6,
            r_shunt: 1e6,
        }
    }
}

impl RectifierParams {
    pub fn switch_model(&self, high_side: bool) -> SwitchModel {
        SwitchModel {
            r_on: self.r_on,
            r_off: self.r_off,
            v_th: if high_side { self.v_th_p } else { self.v_th_n },
            body_vf: self.body_vf,
            body_rd: self.body_rd,
        }
    }
}

/// Which conditioning chain the scenario describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum TopologyTag {
    /// Rectifier alone.
    FullWave,
    /// Rectifier plus decoupled boost regulator (the simulated cascade).
    DualStage,
    /// Descriptor only: chopper boosting against the phase inductances.
    QuasiSingle,
    /// Descriptor only: one stage switching all legs at high frequency.
    SingleStage,
}

/// Catalog entry for `describe-topologies`.
#[derive(Debug, Clone, Copy)]
pub struct TopologyDescriptor {
    pub tag: TopologyTag,
    pub name: &'static str,
    pub simulated: bool,
    pub summary: &'static str,
}

pub fn topology_catalog() -> [TopologyDescriptor; 4] {
    [
        TopologyDescriptor {
            tag: TopologyTag::FullWave,
            name: "FULL_WAVE",
            simulated: true,
            summary: "Comparator-driven MOSFET full-wave rectifier alone: low-drop AC-DC \
                      conversion without voltage boost or regulation.",
        },
        TopologyDescriptor {
            tag: TopologyTag::DualStage,
            name: "DUAL_STAGE",
            simulated: true,
            summary: "Rectifier cascaded with an independent boost regulator through a \
                      storage capacitor; the stages are decoupled and optimized separately.",
        },
        TopologyDescriptor {
            tag: TopologyTag::QuasiSingle,
            name: "QUASI_SINGLE",
            simulated: false,
            summary: "Middle storage capacitor removed; a high-frequency boost chopper works \
                      against the generator phase inductances. Descriptor only: the \
                      high-frequency leg control is outside this simulator's scope.",
        },
        TopologyDescriptor {
            tag: TopologyTag::SingleStage,
            name: "SINGLE_STAGE",
            simulated: false,
            summary: "All six switches chopped at high frequency to rectify and boost in a \
                      single stage. Descriptor only: not simulated.",
        },
    ]
}

/// A complete run description.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Scenario {
    /// Chain output load (Ω): on the boost output when the boost stage is
    /// enabled, directly on V_DDA otherwise.
    pub load: f64,
    pub startup_circuit_enabled: bool,
    pub gndc_sequencer_enabled: bool,
    pub boost_enabled: bool,
    pub topology_tag: TopologyTag,
    pub source: ThreePhaseSource,
    pub rectifier: RectifierParams,
    pub control: ControlParams,
    pub boost: BoostParams,
    pub engine: EngineConfig,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            load: 200.0,
            startup_circuit_enabled: true,
            gndc_sequencer_enabled: true,
            boost_enabled: true,
            topology_tag: TopologyTag::DualStage,
            source: ThreePhaseSource::default(),
            rectifier: RectifierParams::default(),
            control: ControlParams::default(),
            boost: BoostParams::default(),
            engine: EngineConfig::default(),
        }
    }
}

impl Scenario {
    /// The rectifier network this scenario describes. With the boost stage
    /// enabled the V_DDA load is the bleed resistor; the scenario load then
    /// hangs on the boost output.
    pub fn rectifier_network(&self) -> RectifierNetwork {
        let hi = self.rectifier.switch_model(true);
        let lo = self.rectifier.switch_model(false);
        RectifierNetwork {
            switches: [hi, hi, hi, lo, lo, lo],
            c_vdda: self.rectifier.c_vdda,
            c_out: self.rectifier.c_out,
            r_load: if self.boost_enabled {
                self.rectifier.r_shunt
            } else {
                self.load
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.load > 0.0) {
            return Err(SimError::Validation(format!(
                "load must be > 0 Ω, got {}",
                self.load
            )));
        }
        if !(self.rectifier.r_shunt > 0.0) {
            return Err(SimError::Validation("rectifier.r_shunt must be > 0".into()));
        }
        self.source.validate()?;
        self.rectifier_network().validate()?;
        self.control.validate()?;
        self.boost.validate()?;
        self.engine.validate()?;
        if self.boost_enabled && self.engine.dt > self.boost.max_dt() * (1.0 + 1e-9) {
            return Err(SimError::Validation(format!(
                "engine.dt = {} exceeds the boost stepping limit 1/(20·f_sw) = {}",
                self.engine.dt,
                self.boost.max_dt()
            )));
        }
        match self.topology_tag {
            TopologyTag::FullWave if self.boost_enabled => Err(SimError::Validation(
                "topology_tag FULL_WAVE requires boost_enabled = false".into(),
            )),
            TopologyTag::DualStage if !self.boost_enabled => Err(SimError::Validation(
                "topology_tag DUAL_STAGE requires boost_enabled = true".into(),
            )),
            _ => Ok(()),
        }
    }

    /// Reject descriptor-only topologies before a run.
    pub fn ensure_simulatable(&self) -> Result<()> {
        match self.topology_tag {
            TopologyTag::FullWave | TopologyTag::DualStage => Ok(()),
            TopologyTag::QuasiSingle => Err(SimError::NotImplemented(
                "QUASI_SINGLE is a descriptor-only topology: high-frequency chopper control \
                 against the phase inductances is outside this simulator's scope"
                    .into(),
            )),
            TopologyTag::SingleStage => Err(SimError::NotImplemented(
                "SINGLE_STAGE is a descriptor-only topology: high-frequency CMOS leg control \
                 is outside this simulator's scope"
                    .into(),
            )),
        }
    }

    /// Set a numeric scenario key by dotted path (the sweep axis surface).
    pub fn set_key(&mut self, key: &str, value: f64) -> Result<()> {
        let slot: &mut f64 = match key {
            "load" => &mut self.load,
            "source.v_ll_peak" => &mut self.source.v_ll_peak,
            "source.freq" => &mut self.source.freq,
            "source.r_phase" => &mut self.source.r_phase,
            "source.l_phase" => &mut self.source.l_phase,
            "source.phase0" => &mut self.source.phase0,
            "rectifier.r_on" => &mut self.rectifier.r_on,
            "rectifier.r_off" => &mut self.rectifier.r_off,
            "rectifier.v_th_p" => &mut self.rectifier.v_th_p,
            "rectifier.v_th_n" => &mut self.rectifier.v_th_n,
            "rectifier.body_vf" => &mut self.rectifier.body_vf,
            "rectifier.body_rd" => &mut self.rectifier.body_rd,
            "rectifier.c_vdda" => &mut self.rectifier.c_vdda,
            "rectifier.c_out" => &mut self.rectifier.c_out,
            "rectifier.r_shunt" => &mut self.rectifier.r_shunt,
            "control.v_supply_min" => &mut self.control.v_supply_min,
            "control.threshold_tolerance" => &mut self.control.threshold_tolerance,
            "control.hysteresis" => &mut self.control.hysteresis,
            "control.prop_delay" => &mut self.control.prop_delay,
            "control.v_th_m4" => &mut self.control.v_th_m4,
            "control.u12_window_min" => &mut self.control.u12_window_min,
            "control.i_ref_target" => &mut self.control.i_ref_target,
            "control.tau_establish" => &mut self.control.tau_establish,
            "control.tau_decay" => &mut self.control.tau_decay,
            "control.established_fraction" => &mut self.control.established_fraction,
            "control.c1" => &mut self.control.c1,
            "control.i_charge_c1" => &mut self.control.i_charge_c1,
            "control.r_leak" => &mut self.control.r_leak,
            "control.gndc_ramp_duration" => &mut self.control.gndc_ramp_duration,
            "control.gndc_g_max" => &mut self.control.gndc_g_max,
            "boost.l_boost" => &mut self.boost.l_boost,
            "boost.c_out" => &mut self.boost.c_out,
            "boost.f_sw" => &mut self.boost.f_sw,
            "boost.v_out_set" => &mut self.boost.v_out_set,
            "boost.v_in_min" => &mut self.boost.v_in_min,
            "boost.i_quiescent" => &mut self.boost.i_quiescent,
            "boost.r_switch" => &mut self.boost.r_switch,
            "boost.r_diode_eq" => &mut self.boost.r_diode_eq,
            "boost.v_band" => &mut self.boost.v_band,
            "boost.i_peak_clamp" => &mut self.boost.i_peak_clamp,
            "boost.d_max" => &mut self.boost.d_max,
            "engine.dt" => &mut self.engine.dt,
            "engine.t_end" => &mut self.engine.t_end,
            "engine.event_tol" => &mut self.engine.event_tol,
            _ => {
                return Err(SimError::Validation(format!(
                    "'{key}' is not a numeric scenario key"
                )))
            }
        };
        *slot = value;
        Ok(())
    }
}

/// Parse a scenario file, fill defaults, and validate every invariant.
pub fn load_scenario(path: &Path) -> Result<Scenario> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| SimError::Io(format!("{}: {e}", path.display())))?;
    parse_scenario(&text)
}

/// Parse scenario text (factored out for tests).
pub fn parse_scenario(text: &str) -> Result<Scenario> {
    let scenario: Scenario =
        toml::from_str(text).map_err(|e| SimError::Parse(e.to_string()))?;
    scenario.validate()?;
    Ok(scenario)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_yields_defaults() {
        let s = parse_scenario("").unwrap();
        assert_eq!(s, Scenario::default());
        assert_eq!(s.load, 200.0);
        assert!(s.boost_enabled);
    }

    #[test]
    fn negative_load_is_a_validation_error() {
        let err = parse_scenario("load = -5.0").unwrap_err();
        assert!(matches!(err, SimError::Validation(_)), "{err}");
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = parse_scenario("lod = 100.0").unwrap_err();
        assert!(matches!(err, SimError::Parse(_)), "{err}");
        let err = parse_scenario("[source]\nvll = 2.0").unwrap_err();
        assert!(matches!(err, SimError::Parse(_)), "{err}");
    }

    #[test]
    fn parse_error_carries_position() {
        let err = parse_scenario("load = \"abc\"").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line"), "no position in: {msg}");
    }

    #[test]
    fn descriptor_topologies_cannot_run() {
        let text = "topology_tag = \"SINGLE_STAGE\"";
        let s = parse_scenario(text).unwrap();
        let err = s.ensure_simulatable().unwrap_err();
        assert!(matches!(err, SimError::NotImplemented(_)), "{err}");

        let text = "topology_tag = \"QUASI_SINGLE\"";
        let s = parse_scenario(text).unwrap();
        assert!(s.ensure_simulatable().is_err());
    }

    #[test]
    fn topology_flag_consistency() {
        let err = parse_scenario("topology_tag = \"FULL_WAVE\"").unwrap_err();
        assert!(matches!(err, SimError::Validation(_)));
        let s =
            parse_scenario("topology_tag = \"FULL_WAVE\"\nboost_enabled = false").unwrap();
        assert_eq!(s.topology_tag, TopologyTag::FullWave);
    }

    #[test]
    fn set_key_round_trip() {
        let mut s = Scenario::default();
        s.set_key("source.v_ll_peak", 2.5).unwrap();
        assert_eq!(s.source.v_ll_peak, 2.5);
        s.set_key("load", 24.0).unwrap();
        assert_eq!(s.load, 24.0);
        assert!(s.set_key("source.nonsense", 1.0).is_err());
    }

    #[test]
    fn scenario_toml_round_trip() {
        let s = Scenario::default();
        let text = toml::to_string(&s).unwrap();
        let back = parse_scenario(&text).unwrap();
        assert_eq!(s, back);
    }

    #[test]
    fn catalog_lists_all_four_topologies() {
        let cat = topology_catalog();
        assert_eq!(cat.len(), 4);
        assert_eq!(cat.iter().filter(|d| d.simulated).count(), 2);
    }
}
