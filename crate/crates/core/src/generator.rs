//! Balanced 3-phase EMF source behind per-phase resistance and inductance.
//!
//! Models the magnetic micro-generator as three ideal sinusoids mutually
//! shifted by 2π/3, each in series with `r_phase` and `l_phase`. Amplitude is
//! given as the peak line-to-line voltage; the per-phase peak is that value
//! divided by √3.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};

/// 3-phase sinusoidal source description.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ThreePhaseSource {
    /// Peak line-to-line EMF amplitude (V).
    pub v_ll_peak: f64,
    /// Electrical frequency (Hz).
    pub freq: f64,
    /// Series resistance per phase (Ω).
    pub r_phase: f64,
    /// Series inductance per phase (H).
    pub l_phase: f64,
    /// Initial electrical angle (rad).
    pub phase0: f64,
}

impl Default for ThreePhaseSource {
    fn default() -> Self {
        Self {
            v_ll_peak: 3.3,
            freq: 50e3,
            r_phase: 0.2,
            l_phase: 1e-6,
            phase0: 0.0,
        }
    }
}

impl ThreePhaseSource {
    /// Peak of a single phase EMF (V): line-to-line peak over √3.
    pub fn phase_peak(&self) -> f64 {
        self.v_ll_peak / 3.0_f64.sqrt()
    }

    /// Electrical period (s).
    pub fn period(&self) -> f64 {
        1.0 / self.freq
    }

    /// The three EMF potentials at time `t`, relative to the source neutral.
    ///
    /// e_k(t) = (v_ll_peak/√3)·sin(2π·freq·t + phase0 − 2π(k−1)/3). The three
    /// values sum to zero at every instant.
    pub fn emf_potentials(&self, t: f64) -> [f64; 3] {
        let theta = 2.0 * PI * self.freq * t + self.phase0;
        let a = self.phase_peak();
        [
            a * theta.sin(),
            a * (theta - 2.0 * PI / 3.0).sin(),
            a * (theta - 4.0 * PI / 3.0).sin(),
        ]
    }

    /// Line-to-line EMF e_i − e_j. Phase indices are 1-based.
    pub fn line_to_line(&self, t: f64, i: usize, j: usize) -> Result<f64> {
        if i == j {
            return Err(SimError::Validation(format!(
                "line_to_line requires distinct phases, got ({i}, {j})"
            )));
        }
        if !(1..=3).contains(&i) || !(1..=3).contains(&j) {
            return Err(SimError::Validation(format!(
                "phase index out of range in ({i}, {j}); expected 1..=3"
            )));
        }
        let e = self.emf_potentials(t);
        Ok(e[i - 1] - e[j - 1])
    }

    /// U12(t) = e1 − e2, the pair the start-up circuit watches.
    pub fn u12(&self, t: f64) -> f64 {
        let e = self.emf_potentials(t);
        e[0] - e[1]
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.v_ll_peak > 0.0) {
            return Err(SimError::Validation(
                "source.v_ll_peak must be > 0".into(),
            ));
        }
        if !(self.freq > 0.0) {
            return Err(SimError::Validation("source.freq must be > 0".into()));
        }
        if self.r_phase < 0.0 || self.l_phase < 0.0 {
            return Err(SimError::Validation(
                "source.r_phase and source.l_phase must be ≥ 0".into(),
            ));
        }
        if self.r_phase == 0.0 && self.l_phase == 0.0 {
            return Err(SimError::Validation(
                "source needs r_phase > 0 or l_phase > 0 for a well-posed network".into(),
            ));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn src() -> ThreePhaseSource {
        ThreePhaseSource::default()
    }

    #[test]
    fn emfs_sum_to_zero() {
        let s = src();
        for k in 0..5000 {
            let t = k as f64 * 7.3e-9;
            let e = s.emf_potentials(t);
            let sum = e[0] + e[1] + e[2];
            assert!(
                sum.abs() <= 1e-12 * s.v_ll_peak,
                "sum {sum} at t = {t}"
            );
        }
    }

    #[test]
    fn peak_line_to_line_matches_amplitude() {
        // Dense sampling oracle: max of e1 − e2 over one period, ≥ 10⁴ points.
        let s = src();
        let n = 20_000;
        let mut peak: f64 = 0.0;
        for k in 0..n {
            let t = k as f64 / n as f64 * s.period();
            let e = s.emf_potentials(t);
            peak = peak.max(e[0] - e[1]);
        }
        assert!((peak - 3.3).abs() < 1e-6, "peak = {peak}");
    }

    #[test]
    fn period_at_50khz_is_20us() {
        let s = src();
        assert!((s.period() - 20e-6).abs() < 1e-12);
        // Periodicity of the waveform itself.
        for k in 0..200 {
            let t = k as f64 * 1.7e-7;
            let a = s.emf_potentials(t);
            let b = s.emf_potentials(t + s.period());
            for p in 0..3 {
                assert!((a[p] - b[p]).abs() <= 1e-9 * s.v_ll_peak);
            }
        }
    }

    #[test]
    fn line_to_line_rejects_equal_indices() {
        let s = src();
        assert!(s.line_to_line(0.0, 2, 2).is_err());
        assert!(s.line_to_line(0.0, 0, 1).is_err());
        assert!(s.line_to_line(0.0, 1, 4).is_err());
    }

    #[test]
    fn line_to_line_telescopes() {
        let s = src();
        for k in 0..1000 {
            let t = k as f64 * 3.1e-8;
            let u12 = s.line_to_line(t, 1, 2).unwrap();
            let u23 = s.line_to_line(t, 2, 3).unwrap();
            let u31 = s.line_to_line(t, 3, 1).unwrap();
            assert!((u12 + u23 + u31).abs() <= 1e-12 * s.v_ll_peak);
        }
    }

    #[test]
    fn abs_line_to_line_peak_is_v_ll_peak() {
        let s = ThreePhaseSource {
            v_ll_peak: 1.7,
            ..src()
        };
        let n = 20_000;
        let mut peak: f64 = 0.0;
        for k in 0..n {
            let t = k as f64 / n as f64 * s.period();
            peak = peak.max(s.line_to_line(t, 1, 2).unwrap().abs());
        }
        assert!((peak - 1.7).abs() < 1.7e-6, "peak = {peak}");
    }

    #[test]
    fn validation_rejects_bad_parameters() {
        let mut s = src();
        s.v_ll_peak = -1.0;
        assert!(s.validate().is_err());
        let mut s = src();
        s.r_phase = 0.0;
        s.l_phase = 0.0;
        assert!(s.validate().is_err());
    }
}
