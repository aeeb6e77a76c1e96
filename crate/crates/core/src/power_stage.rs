//! Three-phase MOSFET rectifier network.
//!
//! Six switches with body diodes bridge the phase terminals to the V_DDA and
//! GND rails. A small decoupling capacitor sits directly on V_DDA; the bulk
//! output capacitor hangs between V_DDA and the auxiliary gndc terminal,
//! which connects to GND through a control-driven conductance. The load (or
//! the boost input port) is taken from V_DDA.
//!
//! Switch order everywhere: P1 P2 P3 (high side), N1 N2 N3 (low side).

use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::pwl::{ElemId, EnergyBreakdown, LossClass, Network};

/// One power switch: commanded channel plus intrinsic body diode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SwitchModel {
    /// Channel resistance when commanded on (Ω).
    pub r_on: f64,
    /// Channel resistance when commanded off (Ω).
    pub r_off: f64,
    /// Gate threshold (V); data for start-up reasoning, not the channel law.
    pub v_th: f64,
    /// Body diode forward drop (V).
    pub body_vf: f64,
    /// Body diode series resistance (Ω).
    pub body_rd: f64,
}

impl Default for SwitchModel {
    fn default() -> Self {
        Self {
            r_on: 1.0,
            r_off: 1e7,
            v_th: 0.7,
            body_vf: 0.6,
            body_rd: 10.0,
        }
    }
}

impl SwitchModel {
    pub fn validate(&self, name: &str) -> Result<()> {
        if !(self.r_on > 0.0 && self.r_off > self.r_on) {
            return Err(SimError::Validation(format!(
                "{name}: need 0 < r_on < r_off (got r_on = {}, r_off = {})",
                self.r_on, self.r_off
            )));
        }
        if self.body_vf < 0.0 || !(self.body_rd > 0.0) {
            return Err(SimError::Validation(format!(
                "{name}: need body_vf ≥ 0 and body_rd > 0"
            )));
        }
        Ok(())
    }
}

/// Static description of the rectifier network.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RectifierNetwork {
    /// P1 P2 P3 N1 N2 N3.
    pub switches: [SwitchModel; 6],
    /// Decoupling capacitance directly on V_DDA (F).
    pub c_vdda: f64,
    /// Bulk output capacitance on the gndc side (F).
    pub c_out: f64,
    /// DC load on V_DDA (Ω).
    pub r_load: f64,
}

impl Default for RectifierNetwork {
    fn default() -> Self {
        Self {
            switches: [SwitchModel::default(); 6],
            c_vdda: 10e-9,
            c_out: 1e-6,
            r_load: 200.0,
        }
    }
}

impl RectifierNetwork {
    pub fn validate(&self) -> Result<()> {
        for (k, sw) in self.switches.iter().enumerate() {
            let name = ["P1", "P2", "P3", "N1", "N2", "N3"][k];
            sw.validate(name)?;
        }
        if !(self.c_vdda > 0.0 && self.c_out > 0.0) {
            return Err(SimError::Validation("c_vdda and c_out must be > 0".into()));
        }
        if !(self.r_load > 0.0) {
            return Err(SimError::Validation("r_load must be > 0".into()));
        }
        Ok(())
    }
}

/// Observable electrical state of the power stage.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerStageState {
    /// Phase branch currents, source → bridge (A).
    pub i_phase: [f64; 3],
    /// Rectified rail voltage (V).
    pub v_dda: f64,
    /// Voltage across the bulk output capacitor (V).
    pub v_cout: f64,
    /// Phase terminal potentials (V).
    pub phase_potentials: [f64; 3],
    /// Potential of the gndc terminal (V).
    pub v_gndc: f64,
    /// Current switch commands.
    pub gate: [bool; 6],
    /// Body diode conduction states.
    pub diode_on: [bool; 6],
}

impl PowerStageState {
    pub fn cold() -> Self {
        Self {
            i_phase: [0.0; 3],
            v_dda: 0.0,
            v_cout: 0.0,
            phase_potentials: [0.0; 3],
            v_gndc: 0.0,
            gate: [false; 6],
            diode_on: [false; 6],
        }
    }
}

/// Per-step inputs decided by the control layer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepInputs {
    pub gates: [bool; 6],
    /// Live gndc→GND conductance (S).
    pub gndc_conductance: f64,
    /// Current drawn from V_DDA by the downstream converter (A).
    pub sink_current: f64,
}

impl Default for StepInputs {
    fn default() -> Self {
        Self {
            gates: [false; 6],
            gndc_conductance: 0.0,
            sink_current: 0.0,
        }
    }
}

/// Energy ledger for one step, extended with the bridge terminal input.
#[derive(Debug, Default, Clone, Copy, PartialEq)]
pub struct StageEnergy {
    pub breakdown: EnergyBreakdown,
    /// Σ φ_k · i_k dt at the phase terminals (J); the rectifier input.
    pub terminal_in: f64,
}

/// The rectifier as a steppable network.
#[derive(Debug, Clone)]
pub struct RectifierStage {
    net: Network,
    phase_branches: [ElemId; 3],
    switch_ids: [ElemId; 6],
    diode_ids: [ElemId; 6],
    cap_vdda: ElemId,
    cap_out: ElemId,
    gndc_id: ElemId,
    sink_id: ElemId,
    node_phase: [usize; 3],
    node_gndc: usize,
    gates: [bool; 6],
}

impl RectifierStage {
    /// Builds the network from cold (all capacitors discharged).
    pub fn new(net: &RectifierNetwork, r_phase: f64, l_phase: f64) -> Self {
        let mut w = Network::new();
        let neutral = w.add_node("neutral");
        let ph = [
            w.add_node("phase1"),
            w.add_node("phase2"),
            w.add_node("phase3"),
        ];
        let vdda = w.add_node("vdda");
        let gndc = w.add_node("gndc");

        let phase_branches = [
            w.add_source_branch(Some(neutral), Some(ph[0]), r_phase, l_phase),
            w.add_source_branch(Some(neutral), Some(ph[1]), r_phase, l_phase),
            w.add_source_branch(Some(neutral), Some(ph[2]), r_phase, l_phase),
        ];

        let mut switch_vec = Vec::with_capacity(6);
        let mut diode_vec = Vec::with_capacity(6);
        for k in 0..3 {
            // high side: phase_k ↔ vdda, body diode phase → vdda
            let m = net.switches[k];
            switch_vec.push(w.add_switch(Some(ph[k]), Some(vdda), m.r_on, m.r_off));
            diode_vec.push(w.add_diode(Some(ph[k]), Some(vdda), m.body_vf, m.body_rd));
        }
        for k in 0..3 {
            // low side: gnd ↔ phase_k, body diode gnd → phase
            let m = net.switches[3 + k];
            switch_vec.push(w.add_switch(None, Some(ph[k]), m.r_on, m.r_off));
            diode_vec.push(w.add_diode(None, Some(ph[k]), m.body_vf, m.body_rd));
        }
        let switch_ids: [ElemId; 6] = switch_vec.try_into().unwrap();
        let diode_ids: [ElemId; 6] = diode_vec.try_into().unwrap();

        let cap_vdda = w.add_capacitor(Some(vdda), None, net.c_vdda, 0.0);
        let cap_out = w.add_capacitor(Some(vdda), Some(gndc), net.c_out, 0.0);
        w.add_resistor(Some(vdda), None, net.r_load, LossClass::Load);
        let gndc_id = w.add_conductance(Some(gndc), None, 0.0, LossClass::Gndc);
        let sink_id = w.add_current_sink(Some(vdda), 0.0);

        Self {
            net: w,
            phase_branches,
            switch_ids,
            diode_ids,
            cap_vdda,
            cap_out,
            gndc_id,
            sink_id,
            node_phase: ph,
            node_gndc: gndc,
            gates: [false; 6],
        }
    }

    /// Stamp the system for the current conduction configuration; exposed so
    /// the assembled matrix can be solved or inspected directly.
    pub fn stamp_and_solve(&mut self, emfs: [f64; 3], inputs: &StepInputs, dt: f64) -> Result<&[f64]> {
        self.apply_inputs(emfs, inputs);
        self.net.solve_fixed_point(dt)
    }

    fn apply_inputs(&mut self, emfs: [f64; 3], inputs: &StepInputs) {
        for k in 0..3 {
            self.net.set_emf(self.phase_branches[k], emfs[k]);
        }
        for k in 0..6 {
            self.net.set_gate(self.switch_ids[k], inputs.gates[k]);
        }
        self.net.set_conductance(self.gndc_id, inputs.gndc_conductance);
        self.net.set_sink(self.sink_id, inputs.sink_current);
        self.gates = inputs.gates;
    }

    /// Advance one backward-Euler step of length `dt` with EMF values taken
    /// at the end of the step.
    pub fn step(&mut self, emfs: [f64; 3], inputs: &StepInputs, dt: f64) -> Result<StageEnergy> {
        self.apply_inputs(emfs, inputs);
        let (_, breakdown) = self.net.step(dt)?;
        let mut terminal_in = 0.0;
        for k in 0..3 {
            let phi = self.net.potentials()[self.node_phase[k]];
            let i = self.net.branch_current(self.phase_branches[k]);
            terminal_in += phi * i * dt;
        }
        Ok(StageEnergy {
            breakdown,
            terminal_in,
        })
    }

    pub fn state(&self) -> PowerStageState {
        let x = self.net.potentials();
        let pot = |i: usize| x.get(i).copied().unwrap_or(0.0);
        let mut diode_on = [false; 6];
        for k in 0..6 {
            diode_on[k] = self.net.diode_is_on(self.diode_ids[k]);
        }
        PowerStageState {
            i_phase: [
                self.net.branch_current(self.phase_branches[0]),
                self.net.branch_current(self.phase_branches[1]),
                self.net.branch_current(self.phase_branches[2]),
            ],
            v_dda: self.net.capacitor_voltage(self.cap_vdda),
            v_cout: self.net.capacitor_voltage(self.cap_out),
            phase_potentials: [
                pot(self.node_phase[0]),
                pot(self.node_phase[1]),
                pot(self.node_phase[2]),
            ],
            v_gndc: pot(self.node_gndc),
            gate: self.gates,
            diode_on,
        }
    }

    /// Rail voltage as held by the decoupling capacitor.
    pub fn v_dda(&self) -> f64 {
        self.net.capacitor_voltage(self.cap_vdda)
    }

    pub fn v_cout(&self) -> f64 {
        self.net.capacitor_voltage(self.cap_out)
    }

    pub fn node_names(&self) -> [&str; 6] {
        ["neutral", "phase1", "phase2", "phase3", "vdda", "gndc"]
    }
}

/// Minimum line-to-line peak needed to self-start through the body diodes
/// alone: two series diode drops plus the control supply floor.
pub fn body_diode_rectification_floor(body_vf: f64, v_supply_min: f64) -> f64 {
    2.0 * body_vf + v_supply_min
}
