//! Piecewise-linear network solver.
//!
//! Nodal analysis over Norton-style element stamps. Storage elements use
//! backward-Euler companion models, so every element reduces to a conductance
//! plus a current source and the system never needs auxiliary branch-current
//! variables. Diodes are piecewise linear (forward drop + series resistance
//! when conducting, open when blocking); their conduction states are settled
//! by a fixed-point iteration that flips the most violated diode per pass.
//!
//! Energy is accounted per element from the converged end-of-step solution.
//! Backward Euler is dissipative: the difference between the discrete energy
//! absorbed by a storage element and its change in stored energy is collected
//! in `loss_numerical`, which makes the per-step balance exact by
//! construction.

use std::sync::Arc;

use crate::error::{Result, SimError};

/// `None` is the ground reference.
pub type Node = Option<usize>;

/// Maximum diode fixed-point passes before the step is declared failed.
pub const MAX_CONDUCTION_ITERATIONS: usize = 50;

const DIODE_CURRENT_EPS: f64 = 1e-12;
const DIODE_VOLTAGE_EPS: f64 = 1e-9;

/// Classification used when a resistive element dissipates energy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossClass {
    /// Generator phase resistance (inside the source).
    Phase,
    /// Commanded-on switch channel.
    Switch,
    /// Off-state channel leakage.
    Leakage,
    /// The gndc connection conductance.
    Gndc,
    /// A load resistor; accumulated as delivered energy, not loss.
    Load,
}

#[derive(Debug, Clone, Copy)]
enum Element {
    Resistor {
        a: Node,
        b: Node,
        g: f64,
        class: LossClass,
    },
    Capacitor {
        a: Node,
        b: Node,
        c: f64,
        v_prev: f64,
    },
    /// EMF `e` in series with `r` and `l`, driving current from `a` to `b`.
    SourceBranch {
        a: Node,
        b: Node,
        e: f64,
        r: f64,
        l: f64,
        i_prev: f64,
    },
    /// Anode `a`, cathode `c`.
    Diode {
        a: Node,
        c: Node,
        vf: f64,
        rd: f64,
        on: bool,
    },
    /// Gate-commanded channel; conducts with `g_on` when on, `g_off` otherwise.
    Switch {
        a: Node,
        b: Node,
        g_on: f64,
        g_off: f64,
        on: bool,
    },
    /// Fixed current drawn out of `node` to ground.
    CurrentSink { node: Node, i: f64 },
    /// Plain settable conductance.
    Conductance {
        a: Node,
        b: Node,
        g: f64,
        class: LossClass,
    },
}

/// Handle to an element, returned by the `add_*` methods.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ElemId(usize);

/// Per-step energy bookkeeping (joules).
#[derive(Debug, Default, Clone, Copy, PartialEq)]
pub struct EnergyBreakdown {
    /// Energy delivered by the EMFs.
    pub source_emf: f64,
    /// Energy delivered into `Load`-class resistors.
    pub load: f64,
    /// Energy drawn by current sinks (e.g. a downstream converter port).
    pub sink: f64,
    pub loss_phase: f64,
    pub loss_switch: f64,
    pub loss_diode: f64,
    pub loss_leak: f64,
    pub loss_gndc: f64,
    /// Change of ½CV² + ½LI² over the step.
    pub stored_delta: f64,
    /// Backward-Euler dissipation of the storage elements.
    pub loss_numerical: f64,
}

impl EnergyBreakdown {
    pub fn losses(&self) -> f64 {
        self.loss_phase
            + self.loss_switch
            + self.loss_diode
            + self.loss_leak
            + self.loss_gndc
            + self.loss_numerical
    }

    /// source − (load + sink + losses + stored); zero up to rounding.
    pub fn residual(&self) -> f64 {
        self.source_emf - self.load - self.sink - self.losses() - self.stored_delta
    }

    pub fn accumulate(&mut self, other: &EnergyBreakdown) {
        self.source_emf += other.source_emf;
        self.load += other.load;
        self.sink += other.sink;
        self.loss_phase += other.loss_phase;
        self.loss_switch += other.loss_switch;
        self.loss_diode += other.loss_diode;
        self.loss_leak += other.loss_leak;
        self.loss_gndc += other.loss_gndc;
        self.stored_delta += other.stored_delta;
        self.loss_numerical += other.loss_numerical;
    }
}

/// A solvable network with mutable element state.
#[derive(Debug, Clone)]
pub struct Network {
    node_names: Arc<Vec<String>>,
    elements: Vec<Element>,
    // scratch buffers, reused across steps
    matrix: Vec<f64>,
    rhs: Vec<f64>,
    solution: Vec<f64>,
    pivot_rows: Vec<usize>,
}

impl Network {
    pub fn new() -> Self {
        Self {
            node_names: Arc::new(Vec::new()),
            elements: Vec::new(),
            matrix: Vec::new(),
            rhs: Vec::new(),
            solution: Vec::new(),
            pivot_rows: Vec::new(),
        }
    }

    pub fn add_node(&mut self, name: &str) -> usize {
        let names = Arc::make_mut(&mut self.node_names);
        names.push(name.to_string());
        names.len() - 1
    }

    pub fn node_count(&self) -> usize {
        self.node_names.len()
    }

    pub fn node_name(&self, node: Node) -> &str {
        match node {
            None => "gnd",
            Some(i) => &self.node_names[i],
        }
    }

    fn push(&mut self, e: Element) -> ElemId {
        self.elements.push(e);
        ElemId(self.elements.len() - 1)
    }

    pub fn add_resistor(&mut self, a: Node, b: Node, r: f64, class: LossClass) -> ElemId {
        assert!(r > 0.0, "resistance must be positive");
        self.push(Element::Resistor {
            a,
            b,
            g: 1.0 / r,
            class,
        })
    }

    pub fn add_capacitor(&mut self, a: Node, b: Node, c: f64, v0: f64) -> ElemId {
        assert!(c > 0.0, "capacitance must be positive");
        self.push(Element::Capacitor { a, b, c, v_prev: v0 })
    }

    pub fn add_source_branch(&mut self, a: Node, b: Node, r: f64, l: f64) -> ElemId {
        assert!(r > 0.0 || l > 0.0, "source branch needs series impedance");
        self.push(Element::SourceBranch {
            a,
            b,
            e: 0.0,
            r,
            l,
            i_prev: 0.0,
        })
    }

    pub fn add_diode(&mut self, anode: Node, cathode: Node, vf: f64, rd: f64) -> ElemId {
        assert!(rd > 0.0, "diode series resistance must be positive");
        self.push(Element::Diode {
            a: anode,
            c: cathode,
            vf,
            rd,
            on: false,
        })
    }

    pub fn add_switch(&mut self, a: Node, b: Node, r_on: f64, r_off: f64) -> ElemId {
        assert!(r_on > 0.0 && r_off > r_on, "need 0 < r_on < r_off");
        self.push(Element::Switch {
            a,
            b,
            g_on: 1.0 / r_on,
            g_off: 1.0 / r_off,
            on: false,
        })
    }

    pub fn add_current_sink(&mut self, node: Node, i: f64) -> ElemId {
        self.push(Element::CurrentSink { node, i })
    }

    pub fn add_conductance(&mut self, a: Node, b: Node, g: f64, class: LossClass) -> ElemId {
        assert!(g >= 0.0);
        self.push(Element::Conductance { a, b, g, class })
    }

    pub fn set_emf(&mut self, id: ElemId, value: f64) {
        match &mut self.elements[id.0] {
            Element::SourceBranch { e, .. } => *e = value,
            _ => panic!("set_emf on a non-source element"),
        }
    }

    pub fn set_gate(&mut self, id: ElemId, on_state: bool) {
        match &mut self.elements[id.0] {
            Element::Switch { on, .. } => *on = on_state,
            _ => panic!("set_gate on a non-switch element"),
        }
    }

    pub fn set_sink(&mut self, id: ElemId, value: f64) {
        match &mut self.elements[id.0] {
            Element::CurrentSink { i, .. } => *i = value,
            _ => panic!("set_sink on a non-sink element"),
        }
    }

    pub fn set_conductance(&mut self, id: ElemId, value: f64) {
        assert!(value >= 0.0);
        match &mut self.elements[id.0] {
            Element::Conductance { g, .. } => *g = value,
            _ => panic!("set_conductance on a non-conductance element"),
        }
    }

    pub fn capacitor_voltage(&self, id: ElemId) -> f64 {
        match &self.elements[id.0] {
            Element::Capacitor { v_prev, .. } => *v_prev,
            _ => panic!("capacitor_voltage on a non-capacitor element"),
        }
    }

    pub fn branch_current(&self, id: ElemId) -> f64 {
        match &self.elements[id.0] {
            Element::SourceBranch { i_prev, .. } => *i_prev,
            _ => panic!("branch_current on a non-source element"),
        }
    }

    pub fn diode_is_on(&self, id: ElemId) -> bool {
        match &self.elements[id.0] {
            Element::Diode { on, .. } => *on,
            _ => panic!("diode_is_on on a non-diode element"),
        }
    }

    pub fn diode_states(&self) -> Vec<bool> {
        self.elements
            .iter()
            .filter_map(|e| match e {
                Element::Diode { on, .. } => Some(*on),
                _ => None,
            })
            .collect()
    }

    fn pot(x: &[f64], n: Node) -> f64 {
        match n {
            None => 0.0,
            Some(i) => x[i],
        }
    }

    /// Assemble the nodal matrix and right-hand side for the current
    /// conduction configuration and step length `dt`.
    pub fn stamp(&mut self, dt: f64) {
        let n = self.node_count();
        self.matrix.clear();
        self.matrix.resize(n * n, 0.0);
        self.rhs.clear();
        self.rhs.resize(n, 0.0);

        let matrix = &mut self.matrix;
        let rhs = &mut self.rhs;

        let mut conductance = |a: Node, b: Node, g: f64| {
            if let Some(i) = a {
                matrix[i * n + i] += g;
            }
            if let Some(j) = b {
                matrix[j * n + j] += g;
            }
            if let (Some(i), Some(j)) = (a, b) {
                matrix[i * n + j] -= g;
                matrix[j * n + i] -= g;
            }
        };
        // current source `j` flowing from `a` to `b`
        let mut current = |a: Node, b: Node, j: f64| {
            if let Some(i) = a {
                rhs[i] -= j;
            }
            if let Some(k) = b {
                rhs[k] += j;
            }
        };

        for e in &self.elements {
            match *e {
                Element::Resistor { a, b, g, .. } => conductance(a, b, g),
                Element::Conductance { a, b, g, .. } => {
                    if g > 0.0 {
                        conductance(a, b, g);
                    }
                }
                Element::Capacitor { a, b, c, v_prev } => {
                    let g = c / dt;
                    conductance(a, b, g);
                    current(a, b, -g * v_prev);
                }
                Element::SourceBranch {
                    a,
                    b,
                    e,
                    r,
                    l,
                    i_prev,
                } => {
                    let g = 1.0 / (r + l / dt);
                    conductance(a, b, g);
                    current(a, b, g * e + g * (l / dt) * i_prev);
                }
                Element::Diode { a, c, vf, rd, on } => {
                    if on {
                        let g = 1.0 / rd;
                        conductance(a, c, g);
                        current(a, c, -g * vf);
                    }
                }
                Element::Switch {
                    a,
                    b,
                    g_on,
                    g_off,
                    on,
                } => conductance(a, b, if on { g_on } else { g_off }),
                Element::CurrentSink { node, i } => current(node, None, i),
            }
        }
    }

    /// Gaussian elimination with partial pivoting over the stamped system.
    fn solve_stamped(&mut self) -> Result<()> {
        let n = self.node_count();
        let a = &mut self.matrix;
        let b = &mut self.rhs;

        let scale = a
            .iter()
            .fold(0.0_f64, |acc, v| acc.max(v.abs()))
            .max(1e-300);
        let tol = scale * 1e-14;

        self.pivot_rows.clear();
        self.pivot_rows.extend(0..n);
        let perm = &mut self.pivot_rows;

        for col in 0..n {
            let mut best = col;
            let mut best_val = a[perm[col] * n + col].abs();
            for row in col + 1..n {
                let v = a[perm[row] * n + col].abs();
                if v > best_val {
                    best = row;
                    best_val = v;
                }
            }
            if best_val < tol {
                return Err(SimError::SingularSystem {
                    node: self.node_names[col].clone(),
                });
            }
            perm.swap(col, best);
            let prow = perm[col];
            let pivot = a[prow * n + col];
            for row in col + 1..n {
                let r = perm[row];
                let factor = a[r * n + col] / pivot;
                if factor != 0.0 {
                    for k in col..n {
                        a[r * n + k] -= factor * a[prow * n + k];
                    }
                    b[r] -= factor * b[prow];
                }
            }
        }

        self.solution.clear();
        self.solution.resize(n, 0.0);
        for col in (0..n).rev() {
            let r = perm[col];
            let mut acc = b[r];
            for k in col + 1..n {
                acc -= a[r * n + k] * self.solution[k];
            }
            self.solution[col] = acc / a[r * n + col];
        }
        Ok(())
    }

    /// Solve with the diode conduction states iterated to consistency.
    ///
    /// A conducting diode must carry forward current; a blocking diode must
    /// see sub-threshold bias. The most violated diode flips per pass, up to
    /// [`MAX_CONDUCTION_ITERATIONS`].
    pub fn solve_fixed_point(&mut self, dt: f64) -> Result<&[f64]> {
        for _ in 0..MAX_CONDUCTION_ITERATIONS {
            self.stamp(dt);
            self.solve_stamped()?;

            let mut worst: Option<(usize, f64)> = None;
            for (idx, e) in self.elements.iter().enumerate() {
                if let Element::Diode { a, c, vf, rd, on } = *e {
                    let v = Self::pot(&self.solution, a) - Self::pot(&self.solution, c);
                    let severity = if on {
                        let i = (v - vf) / rd;
                        if i < -DIODE_CURRENT_EPS {
                            Some(-i)
                        } else {
                            None
                        }
                    } else if v - vf > DIODE_VOLTAGE_EPS {
                        Some((v - vf) / rd)
                    } else {
                        None
                    };
                    if let Some(s) = severity {
                        if worst.map(|(_, w)| s > w).unwrap_or(true) {
                            worst = Some((idx, s));
                        }
                    }
                }
            }

            match worst {
                None => return Ok(&self.solution),
                Some((idx, _)) => {
                    if let Element::Diode { on, .. } = &mut self.elements[idx] {
                        *on = !*on;
                    }
                }
            }
        }
        Err(SimError::ConductionFixedPoint {
            iterations: MAX_CONDUCTION_ITERATIONS,
        })
    }

    /// Advance storage-element state using the converged solution and return
    /// the energy breakdown for the step.
    fn advance(&mut self, dt: f64) -> EnergyBreakdown {
        let mut out = EnergyBreakdown::default();
        let x = std::mem::take(&mut self.solution);
        for e in &mut self.elements {
            match e {
                Element::Resistor { a, b, g, class } => {
                    let dv = Self::pot(&x, *a) - Self::pot(&x, *b);
                    let w = *g * dv * dv * dt;
                    match class {
                        LossClass::Load => out.load += w,
                        LossClass::Phase => out.loss_phase += w,
                        LossClass::Switch => out.loss_switch += w,
                        LossClass::Leakage => out.loss_leak += w,
                        LossClass::Gndc => out.loss_gndc += w,
                    }
                }
                Element::Conductance { a, b, g, class } => {
                    let dv = Self::pot(&x, *a) - Self::pot(&x, *b);
                    let w = *g * dv * dv * dt;
                    match class {
                        LossClass::Load => out.load += w,
                        LossClass::Phase => out.loss_phase += w,
                        LossClass::Switch => out.loss_switch += w,
                        LossClass::Leakage => out.loss_leak += w,
                        LossClass::Gndc => out.loss_gndc += w,
                    }
                }
                Element::Capacitor { a, b, c, v_prev } => {
                    let v = Self::pot(&x, *a) - Self::pot(&x, *b);
                    out.stored_delta += 0.5 * *c * (v * v - *v_prev * *v_prev);
                    out.loss_numerical += 0.5 * *c * (v - *v_prev) * (v - *v_prev);
                    *v_prev = v;
                }
                Element::SourceBranch {
                    a,
                    b,
                    e,
                    r,
                    l,
                    i_prev,
                } => {
                    let dv = Self::pot(&x, *a) - Self::pot(&x, *b);
                    let g = 1.0 / (*r + *l / dt);
                    let i = g * (dv + *e) + g * (*l / dt) * *i_prev;
                    out.source_emf += *e * i * dt;
                    out.loss_phase += i * i * *r * dt;
                    out.stored_delta += 0.5 * *l * (i * i - *i_prev * *i_prev);
                    out.loss_numerical += 0.5 * *l * (i - *i_prev) * (i - *i_prev);
                    *i_prev = i;
                }
                Element::Diode { a, c, vf, rd, on } => {
                    if *on {
                        let v = Self::pot(&x, *a) - Self::pot(&x, *c);
                        let i = (v - *vf) / *rd;
                        out.loss_diode += i * v * dt;
                    }
                }
                Element::Switch {
                    a,
                    b,
                    g_on,
                    g_off,
                    on,
                } => {
                    let dv = Self::pot(&x, *a) - Self::pot(&x, *b);
                    if *on {
                        out.loss_switch += *g_on * dv * dv * dt;
                    } else {
                        out.loss_leak += *g_off * dv * dv * dt;
                    }
                }
                Element::CurrentSink { node, i } => {
                    out.sink += Self::pot(&x, *node) * *i * dt;
                }
            }
        }
        self.solution = x;
        out
    }

    /// One backward-Euler step: settle conduction states, then advance state.
    /// Returns the node potentials and the per-step energy breakdown.
    pub fn step(&mut self, dt: f64) -> Result<(&[f64], EnergyBreakdown)> {
        assert!(dt > 0.0, "dt must be positive");
        self.solve_fixed_point(dt)?;
        let energy = self.advance(dt);
        Ok((&self.solution, energy))
    }

    /// Node potentials from the most recent solve.
    pub fn potentials(&self) -> &[f64] {
        &self.solution
    }
}

impl Default for Network {
    fn default() -> Self {
        Self::new()
    }
}
