//! Behavioral model of the second-stage boost regulator.
//!
//! PFM hysteretic control around a non-synchronous boost power path: when the
//! output sags below the regulation band the converter runs fixed-frequency
//! switching; when it overshoots the band it idles and the inductor current
//! runs down to zero. The on-phase duty comes from the loss-adjusted
//! steady-state conversion ratio toward the setpoint, cut short by a peak
//! inductor-current clamp. The input port draws the quiescent current
//! whenever the input is up.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};

/// Regulator and power-path parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoostParams {
    /// Boost inductor (H).
    pub l_boost: f64,
    /// Output capacitor (F).
    pub c_out: f64,
    /// Switching frequency (Hz).
    pub f_sw: f64,
    /// Output setpoint (V), adjustable 2–5.5.
    pub v_out_set: f64,
    /// Minimum input voltage for switching (V).
    pub v_in_min: f64,
    /// Undervoltage recovery hysteresis: switching resumes only once the
    /// input is back above v_in_min + uv_hysteresis (V).
    pub uv_hysteresis: f64,
    /// Quiescent input draw (A).
    pub i_quiescent: f64,
    /// On-state switch resistance (Ω).
    pub r_switch: f64,
    /// Equivalent series resistance of the rectifying path (Ω).
    pub r_diode_eq: f64,
    /// Regulation band half-width (V).
    pub v_band: f64,
    /// Peak inductor-current clamp (A).
    pub i_peak_clamp: f64,
    /// Reduced clamp used while the output is below the regulation band (A).
    pub i_startup_clamp: f64,
    /// Hard ceiling on the commanded duty cycle.
    pub d_max: f64,
}

impl Default for BoostParams {
    fn default() -> Self {
        Self {
            l_boost: 22e-6,
            c_out: 47e-6,
            f_sw: 500e3,
            v_out_set: 5.0,
            v_in_min: 0.8,
            uv_hysteresis: 0.3,
            i_quiescent: 16e-6,
            r_switch: 0.9,
            r_diode_eq: 1.2,
            v_band: 0.05,
            i_peak_clamp: 1.0,
            i_startup_clamp: 0.25,
            d_max: 0.9,
        }
    }
}

impl BoostParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.l_boost > 0.0 && self.c_out > 0.0 && self.f_sw > 0.0) {
            return Err(SimError::Validation("boost passives must be positive".into()));
        }
        if !(2.0..=5.5).contains(&self.v_out_set) {
            return Err(SimError::Validation(format!(
                "boost.v_out_set must be in [2.0, 5.5], got {}",
                self.v_out_set
            )));
        }
        if self.v_in_min < 0.0 || self.i_quiescent < 0.0 || self.uv_hysteresis < 0.0 {
            return Err(SimError::Validation(
                "boost.v_in_min, boost.uv_hysteresis and boost.i_quiescent must be ≥ 0".into(),
            ));
        }
        if self.r_switch < 0.0 || self.r_diode_eq < 0.0 {
            return Err(SimError::Validation(
                "boost loss resistances must be ≥ 0".into(),
            ));
        }
        if !(self.v_band > 0.0) {
            return Err(SimError::Validation("boost.v_band must be > 0".into()));
        }
        if !(self.i_peak_clamp > 0.0 && self.i_startup_clamp > 0.0) {
            return Err(SimError::Validation(
                "boost current clamps must be > 0".into(),
            ));
        }
        if !(self.d_max > 0.0 && self.d_max < 1.0) {
            return Err(SimError::Validation("boost.d_max must be in (0, 1)".into()));
        }
        Ok(())
    }

    pub fn max_dt(&self) -> f64 {
        1.0 / (20.0 * self.f_sw)
    }

    /// Loss-adjusted steady-state duty: the volt-second balance on the
    /// inductor at conversion target `v_target` and current `i_l`,
    ///   d = (v_target + i·r_d − v_in) / (v_target + i·r_d − i·r_sw).
    pub fn duty(&self, v_in: f64, v_target: f64, i_l: f64) -> f64 {
        if v_in <= 0.0 {
            return 0.0;
        }
        let num = v_target + i_l * self.r_diode_eq - v_in;
        let den = v_target + i_l * self.r_diode_eq - i_l * self.r_switch;
        if den <= 0.0 {
            return 0.0;
        }
        (num / den).clamp(0.0, self.d_max)
    }
}

/// Regulator operating mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoostMode {
    Idle,
    Switching,
    Undervoltage,
}

impl BoostMode {
    pub fn as_f64(self) -> f64 {
        match self {
            BoostMode::Idle => 0.0,
            BoostMode::Switching => 1.0,
            BoostMode::Undervoltage => 2.0,
        }
    }
}

/// Dynamic state of the boost stage.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoostState {
    /// Inductor current (A); never negative in this non-synchronous model.
    pub i_l: f64,
    /// Output voltage (V).
    pub v_out: f64,
    pub mode: BoostMode,
    /// Time within the current switching period (s).
    sw_phase: f64,
    /// Hysteretic burst latch.
    bursting: bool,
    /// On-phase cut short by the current clamp for the rest of the period.
    clamp_latched: bool,
    /// True while the switch conducted during the last step.
    switch_on: bool,
}

impl BoostState {
    pub fn cold() -> Self {
        Self {
            i_l: 0.0,
            v_out: 0.0,
            mode: BoostMode::Idle,
            sw_phase: 0.0,
            bursting: false,
            clamp_latched: false,
            switch_on: false,
        }
    }

    pub fn switch_on(&self) -> bool {
        self.switch_on
    }
}

/// Energy crossing the boost stage in one step (J).
#[derive(Debug, Default, Clone, Copy, PartialEq)]
pub struct BoostStepEnergy {
    pub e_in: f64,
    pub e_out: f64,
    pub loss_switch: f64,
    pub loss_diode: f64,
    pub loss_quiescent: f64,
    pub stored_delta: f64,
    pub loss_numerical: f64,
}

impl BoostStepEnergy {
    /// Scale of the largest terms, for residual tolerance checks.
    pub fn magnitude(&self) -> f64 {
        self.e_in.abs()
            + self.e_out.abs()
            + self.loss_switch.abs()
            + self.loss_diode.abs()
            + self.loss_quiescent.abs()
            + self.stored_delta.abs()
            + self.loss_numerical.abs()
    }

    pub fn residual(&self) -> f64 {
        self.e_in
            - self.e_out
            - self.loss_switch
            - self.loss_diode
            - self.loss_quiescent
            - self.stored_delta
            - self.loss_numerical
    }

    pub fn accumulate(&mut self, o: &BoostStepEnergy) {
        self.e_in += o.e_in;
        self.e_out += o.e_out;
        self.loss_switch += o.loss_switch;
        self.loss_diode += o.loss_diode;
        self.loss_quiescent += o.loss_quiescent;
        self.stored_delta += o.stored_delta;
        self.loss_numerical += o.loss_numerical;
    }
}

/// Advance the boost stage one step of length `dt` at input voltage `v_in`
/// into load `r_load`.
pub fn boost_step(
    p: &BoostParams,
    s: &mut BoostState,
    v_in: f64,
    r_load: f64,
    dt: f64,
) -> Result<BoostStepEnergy> {
    if !(r_load > 0.0) {
        return Err(SimError::Validation(format!(
            "boost load must be positive, got {r_load}"
        )));
    }
    debug_assert!(dt > 0.0 && dt <= p.max_dt() * (1.0 + 1e-9));

    let mut en = BoostStepEnergy::default();
    let i0 = s.i_l;
    let v0 = s.v_out;

    // regulation state; undervoltage is left only after the input recovers
    // above the lockout threshold plus its hysteresis
    let uv = if s.mode == BoostMode::Undervoltage {
        v_in < p.v_in_min + p.uv_hysteresis
    } else {
        v_in < p.v_in_min
    };
    if uv {
        s.mode = BoostMode::Undervoltage;
        s.bursting = false;
    } else {
        if s.v_out < p.v_out_set - p.v_band {
            s.bursting = true;
        } else if s.v_out > p.v_out_set + p.v_band {
            s.bursting = false;
        }
        s.mode = if s.bursting {
            BoostMode::Switching
        } else {
            BoostMode::Idle
        };
    }

    // switching-period clock
    let t_sw = 1.0 / p.f_sw;
    s.sw_phase += dt;
    if s.sw_phase >= t_sw {
        s.sw_phase -= t_sw;
        s.clamp_latched = false;
    }

    // staged current limit: reduced while the output is below the band, so
    // the precharge cannot collapse a weak input rail
    let i_clamp = if s.v_out < p.v_out_set - p.v_band {
        p.i_startup_clamp
    } else {
        p.i_peak_clamp
    };
    // inside the band the duty tracks the steady-state relation toward the
    // setpoint; below the band the converter catches up with the balance
    // taken at the top of the band and the clamp current, which builds
    // inductor current until either the clamp or the band is reached
    let duty = if s.v_out < p.v_out_set - p.v_band {
        p.duty(v_in, p.v_out_set + p.v_band, i_clamp)
    } else {
        p.duty(v_in, p.v_out_set, s.i_l)
    };
    let in_on_window = s.mode == BoostMode::Switching
        && !s.clamp_latched
        && s.sw_phase < duty * t_sw
        && v_in > 0.0;

    // the input port is connected only while the converter runs; in
    // undervoltage lockout the power path is held off and the inductor
    // dumps its remaining current into the output
    let v_port = if s.mode == BoostMode::Undervoltage {
        0.0
    } else {
        v_in
    };

    if in_on_window {
        // switch closed: inductor charges from the input, capacitor feeds the load
        let mut i1 = (i0 + dt * v_port / p.l_boost) / (1.0 + dt * p.r_switch / p.l_boost);
        let mut limiter_v = 0.0;
        if i1 >= i_clamp {
            i1 = i_clamp;
            s.clamp_latched = true;
            limiter_v =
                (v_port - i1 * p.r_switch - p.l_boost * (i1 - i0) / dt).max(0.0);
        }
        let v1 = v0 / (1.0 + dt / (r_load * p.c_out));
        s.i_l = i1;
        s.v_out = v1;
        s.switch_on = true;
        en.e_in += v_port * i1 * dt;
        en.loss_switch += (i1 * i1 * p.r_switch + limiter_v * i1) * dt;
        en.e_out += v1 * v1 / r_load * dt;
        en.stored_delta += 0.5 * p.l_boost * (i1 * i1 - i0 * i0);
        en.loss_numerical += 0.5 * p.l_boost * (i1 - i0) * (i1 - i0);
        en.stored_delta += 0.5 * p.c_out * (v1 * v1 - v0 * v0);
        en.loss_numerical += 0.5 * p.c_out * (v1 - v0) * (v1 - v0);
    } else if i0 > 0.0 || v_port > v0 {
        // switch open: the inductor releases through the rectifying path,
        // which also conducts directly whenever the input is above the output
        let gamma = 1.0 + dt / (r_load * p.c_out);
        let beta = dt / p.c_out;
        let denom = 1.0 + dt * p.r_diode_eq / p.l_boost + dt * beta / (p.l_boost * gamma);
        let mut i1 = (i0 + (dt / p.l_boost) * (v_port - v0 / gamma)) / denom;
        if i1 <= 0.0 {
            // current extinguished within the step; residual magnetic energy
            // is burned in the rectifying path
            let v1 = v0 / gamma;
            s.i_l = 0.0;
            s.v_out = v1;
            s.switch_on = false;
            en.loss_diode += 0.5 * p.l_boost * i0 * i0;
            en.stored_delta += -0.5 * p.l_boost * i0 * i0;
            en.e_out += v1 * v1 / r_load * dt;
            en.stored_delta += 0.5 * p.c_out * (v1 * v1 - v0 * v0);
            en.loss_numerical += 0.5 * p.c_out * (v1 - v0) * (v1 - v0);
        } else {
            let mut limiter_v = 0.0;
            let v1;
            if i1 >= i_clamp {
                // direct conduction with the output far below the input:
                // hold the current at the clamp and burn the headroom
                i1 = i_clamp;
                v1 = (v0 + beta * i1) / gamma;
                limiter_v =
                    (v_port - v1 - i1 * p.r_diode_eq - p.l_boost * (i1 - i0) / dt).max(0.0);
            } else {
                v1 = (v0 + beta * i1) / gamma;
            }
            s.i_l = i1;
            s.v_out = v1;
            s.switch_on = false;
            en.e_in += v_port * i1 * dt;
            en.loss_diode += (i1 * i1 * p.r_diode_eq + limiter_v * i1) * dt;
            en.e_out += v1 * v1 / r_load * dt;
            en.stored_delta += 0.5 * p.l_boost * (i1 * i1 - i0 * i0);
            en.loss_numerical += 0.5 * p.l_boost * (i1 - i0) * (i1 - i0);
            en.stored_delta += 0.5 * p.c_out * (v1 * v1 - v0 * v0);
            en.loss_numerical += 0.5 * p.c_out * (v1 - v0) * (v1 - v0);
        }
    } else {
        // discontinuous: only the load drains the output capacitor
        let v1 = v0 / (1.0 + dt / (r_load * p.c_out));
        s.i_l = 0.0;
        s.v_out = v1;
        s.switch_on = false;
        en.e_out += v1 * v1 / r_load * dt;
        en.stored_delta += 0.5 * p.c_out * (v1 * v1 - v0 * v0);
        en.loss_numerical += 0.5 * p.c_out * (v1 - v0) * (v1 - v0);
    }

    // static consumption of the regulator itself
    if v_in > 0.0 {
        let w = v_in * p.i_quiescent * dt;
        en.e_in += w;
        en.loss_quiescent += w;
    }

    Ok(en)
}

/// Current drawn from the input port by the state left from the last step.
/// In undervoltage lockout the power path is off and only the quiescent
/// draw remains.
pub fn boost_input_current(p: &BoostParams, s: &BoostState, v_in: f64) -> f64 {
    let iq = if v_in > 0.0 { p.i_quiescent } else { 0.0 };
    let i_l = if s.mode == BoostMode::Undervoltage {
        0.0
    } else {
        s.i_l
    };
    i_l + iq
}

/// E_out / E_in over an accumulated window.
pub fn boost_efficiency(window: &BoostStepEnergy) -> Result<f64> {
    if window.e_in <= 0.0 {
        return Err(SimError::UndefinedEfficiency);
    }
    Ok(window.e_out / window.e_in)
}
