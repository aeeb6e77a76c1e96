//! Run reporting: windowed efficiency measurement, run summaries, CSV
//! export, and parameter sweeps.

use std::io::Write;
use std::path::Path;

use crate::engine::{self, EnergyTotals, Trace};
use crate::error::{Result, SimError};
use crate::scenario::Scenario;

/// A time window within a trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Window {
    pub t_start: f64,
    pub t_end: f64,
}

impl Window {
    /// The steady-state window convention: the last quarter of the run.
    pub fn steady_tail(trace: &Trace) -> Option<Window> {
        let t_last = *trace.time.last()?;
        let t_first = *trace.time.first()?;
        let span = t_last - t_first;
        Some(Window {
            t_start: t_last - 0.25 * span,
            t_end: t_last,
        })
    }

    pub fn duration(&self) -> f64 {
        self.t_end - self.t_start
    }
}

/// Trapezoidal integral of a channel over the window.
fn integrate(trace: &Trace, channel: &str, w: Window) -> Result<f64> {
    let y = trace.channel(channel)?;
    let t = &trace.time;
    let mut acc = 0.0;
    for k in 1..t.len() {
        let (t0, t1) = (t[k - 1], t[k]);
        if t1 <= w.t_start || t0 >= w.t_end {
            continue;
        }
        let a = t0.max(w.t_start);
        let b = t1.min(w.t_end);
        // linear interpolation of the channel onto the clipped interval
        let frac = |tt: f64| (tt - t0) / (t1 - t0);
        let ya = y[k - 1] + (y[k] - y[k - 1]) * frac(a);
        let yb = y[k - 1] + (y[k] - y[k - 1]) * frac(b);
        acc += 0.5 * (ya + yb) * (b - a);
    }
    Ok(acc)
}

fn mean(trace: &Trace, channel: &str, w: Window) -> Result<f64> {
    let d = w.duration();
    if d <= 0.0 {
        return Err(SimError::Measurement("empty window".into()));
    }
    Ok(integrate(trace, channel, w)? / d)
}

fn peak_to_peak(trace: &Trace, channel: &str, w: Window) -> Result<f64> {
    let y = trace.channel(channel)?;
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for (t, v) in trace.time.iter().zip(y.iter()) {
        if *t >= w.t_start && *t <= w.t_end {
            lo = lo.min(*v);
            hi = hi.max(*v);
        }
    }
    if lo > hi {
        return Err(SimError::Measurement("window contains no samples".into()));
    }
    Ok(hi - lo)
}

/// Windowed per-stage efficiency figures.
#[derive(Debug, Clone, PartialEq)]
pub struct EfficiencyReport {
    pub window: Window,
    pub e_source: f64,
    pub e_rect_in: f64,
    pub e_rect_out: f64,
    pub e_boost_in: f64,
    pub e_boost_out: f64,
    pub eta_rectifier: f64,
    pub eta_boost: Option<f64>,
    pub eta_cascade: Option<f64>,
    pub v_dda_mean: f64,
    pub warnings: Vec<String>,
}

/// Integrate the power channels over `window` and form stage efficiencies.
///
/// The window must cover at least 10 source periods. A warning is attached
/// when the cycle-averaged rail drifts by more than 1 % across the window
/// (the run has not settled).
pub fn efficiency_report(trace: &Trace, window: Window, source_freq: f64) -> Result<EfficiencyReport> {
    let t_first = *trace
        .time
        .first()
        .ok_or_else(|| SimError::Measurement("empty trace".into()))?;
    let t_last = *trace.time.last().unwrap();
    if window.t_start < t_first - 1e-12 || window.t_end > t_last + 1e-12 {
        return Err(SimError::Measurement(format!(
            "window [{}, {}] lies outside the trace [{}, {}]",
            window.t_start, window.t_end, t_first, t_last
        )));
    }
    if window.duration() < 10.0 / source_freq {
        return Err(SimError::Measurement(format!(
            "window of {} s covers fewer than 10 source periods",
            window.duration()
        )));
    }

    let e_source = integrate(trace, "p_source", window)?;
    let e_rect_in = integrate(trace, "p_rect_in", window)?;
    let e_rect_out = integrate(trace, "p_rect_out", window)?;
    let e_boost_in = integrate(trace, "p_boost_in", window)?;
    let e_boost_out = integrate(trace, "p_boost_out", window)?;

    if e_rect_in <= 0.0 {
        return Err(SimError::UndefinedEfficiency);
    }
    let eta_rectifier = e_rect_out / e_rect_in;
    let (eta_boost, eta_cascade) = if e_boost_in > 0.0 {
        (
            Some(e_boost_out / e_boost_in),
            Some(e_boost_out / e_rect_in),
        )
    } else {
        (None, None)
    };

    let mut warnings = Vec::new();
    let half = Window {
        t_start: window.t_start,
        t_end: window.t_start + window.duration() / 2.0,
    };
    let half2 = Window {
        t_start: half.t_end,
        t_end: window.t_end,
    };
    let v1 = mean(trace, "v_dda", half)?;
    let v2 = mean(trace, "v_dda", half2)?;
    if v1.abs() > 1e-9 && ((v2 - v1) / v1).abs() > 0.01 {
        warnings.push(format!(
            "v_dda drifts {:.2}% across the steady window; run may not be settled",
            100.0 * (v2 - v1) / v1
        ));
    }

    Ok(EfficiencyReport {
        window,
        e_source,
        e_rect_in,
        e_rect_out,
        e_boost_in,
        e_boost_out,
        eta_rectifier,
        eta_boost,
        eta_cascade,
        v_dda_mean: mean(trace, "v_dda", window)?,
        warnings,
    })
}

/// Per-run results: exact energy ledger plus steady-window measurements.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub energies: EnergyTotals,
    pub eta_rectifier: Option<f64>,
    pub eta_boost: Option<f64>,
    pub eta_cascade: Option<f64>,
    pub startup_engaged_at: Option<f64>,
    pub startup_active_at: Option<f64>,
    /// First engagement → ACTIVE, when both happened.
    pub startup_duration: Option<f64>,
    pub v_dda_steady_mean: Option<f64>,
    pub v_out_steady_mean: Option<f64>,
    pub v_out_ripple: Option<f64>,
    pub warnings: Vec<String>,
}

/// Build the lenient end-of-run summary (missing measurements become `None`
/// rather than errors).
pub fn summarize(trace: &Trace, scenario: &Scenario, totals: &EnergyTotals) -> RunSummary {
    use crate::control::ControlEvent;

    let engaged_at = trace
        .events
        .iter()
        .find(|(_, e)| *e == ControlEvent::SyncEngaged)
        .map(|(t, _)| *t);
    let active_at = trace
        .events
        .iter()
        .find(|(_, e)| *e == ControlEvent::ActiveReached)
        .map(|(t, _)| *t);
    let duration = match (engaged_at, active_at) {
        (Some(e), Some(a)) if a >= e => Some(a - e),
        _ => None,
    };

    let mut summary = RunSummary {
        energies: *totals,
        eta_rectifier: None,
        eta_boost: None,
        eta_cascade: None,
        startup_engaged_at: engaged_at,
        startup_active_at: active_at,
        startup_duration: duration,
        v_dda_steady_mean: None,
        v_out_steady_mean: None,
        v_out_ripple: None,
        warnings: Vec::new(),
    };

    let Some(window) = Window::steady_tail(trace) else {
        return summary;
    };
    if window.duration() < 10.0 / scenario.source.freq {
        summary
            .warnings
            .push("steady window shorter than 10 source periods; efficiencies omitted".into());
        return summary;
    }

    // stage energies over the window from the exact running accumulators,
    // immune to decimation aliasing of the pulsed conduction waveforms
    let row0 = trace
        .time
        .iter()
        .position(|t| *t >= window.t_start - 1e-15)
        .unwrap_or(0);
    let last = trace.len() - 1;
    let delta = |ch: &str| -> f64 {
        let v = trace.channel(ch).expect("known channel");
        v[last] - v[row0]
    };
    let e_rect_in = delta("e_rect_in");
    let e_rect_out = delta("e_rect_out");
    let e_boost_in = delta("e_boost_in");
    let e_boost_out = delta("e_boost_out");
    if e_rect_in > 0.0 {
        summary.eta_rectifier = Some(e_rect_out / e_rect_in);
        if e_boost_in > 0.0 {
            summary.eta_boost = Some(e_boost_out / e_boost_in);
            summary.eta_cascade = Some(e_boost_out / e_rect_in);
        }
    } else {
        summary.warnings.push(SimError::UndefinedEfficiency.to_string());
    }

    if let Ok(m) = mean(trace, "v_dda", window) {
        summary.v_dda_steady_mean = Some(m);
        let half = Window {
            t_start: window.t_start,
            t_end: window.t_start + window.duration() / 2.0,
        };
        let half2 = Window {
            t_start: half.t_end,
            t_end: window.t_end,
        };
        if let (Ok(v1), Ok(v2)) = (mean(trace, "v_dda", half), mean(trace, "v_dda", half2)) {
            if v1.abs() > 1e-9 && ((v2 - v1) / v1).abs() > 0.01 {
                summary.warnings.push(format!(
                    "v_dda drifts {:.2}% across the steady window; run may not be settled",
                    100.0 * (v2 - v1) / v1
                ));
            }
        }
    }
    if scenario.boost_enabled {
        if let (Ok(m), Ok(r)) = (
            mean(trace, "boost_v_out", window),
            peak_to_peak(trace, "boost_v_out", window),
        ) {
            summary.v_out_steady_mean = Some(m);
            summary.v_out_ripple = Some(r);
        }
    }
    summary
}

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

/// RFC-4180-style quoting; numeric fields never need it but headers could.
fn csv_field(s: &str) -> String {
    if s.contains(',') || s.contains('"') || s.contains('\n') {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Write selected channels (plus time) to a CSV file. Float formatting is
/// shortest-round-trip, so re-parsing reproduces the stored values exactly.
pub fn export_csv(trace: &Trace, path: &Path, channels: &[&str]) -> Result<()> {
    // validate the selection before touching the file
    for name in channels {
        trace.channel(name)?;
    }
    let file = std::fs::File::create(path)
        .map_err(|e| SimError::Io(format!("{}: {e}", path.display())))?;
    let mut w = std::io::BufWriter::new(file);
    write_csv(trace, &mut w, channels).map_err(|e| SimError::Io(format!("{}: {e}", path.display())))
}

fn write_csv(trace: &Trace, w: &mut impl Write, channels: &[&str]) -> std::io::Result<()> {
    write!(w, "time")?;
    for name in channels {
        write!(w, ",{}", csv_field(name))?;
    }
    writeln!(w)?;
    let cols: Vec<&[f64]> = channels
        .iter()
        .map(|n| trace.channel(n).expect("validated"))
        .collect();
    for (k, t) in trace.time.iter().enumerate() {
        write!(w, "{t}")?;
        for col in &cols {
            write!(w, ",{}", col[k])?;
        }
        writeln!(w)?;
    }
    w.flush()
}

/// Parse a CSV written by [`export_csv`]: header row, then one row per step.
pub fn import_csv(text: &str) -> Result<Vec<(String, Vec<f64>)>> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| SimError::Parse("empty CSV".into()))?;
    let names: Vec<String> = header.split(',').map(|s| s.trim_matches('"').to_string()).collect();
    let mut cols: Vec<Vec<f64>> = names.iter().map(|_| Vec::new()).collect();
    for (row_idx, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != names.len() {
            return Err(SimError::Parse(format!(
                "row {}: {} fields, expected {}",
                row_idx + 2,
                fields.len(),
                names.len()
            )));
        }
        for (col, f) in cols.iter_mut().zip(fields.iter()) {
            col.push(f.parse().map_err(|e| {
                SimError::Parse(format!("row {}: bad float '{f}': {e}", row_idx + 2))
            })?);
        }
    }
    Ok(names.into_iter().zip(cols).collect())
}

// ---------------------------------------------------------------------------
// Sweeps
// ---------------------------------------------------------------------------

/// One sweep row: the axis value plus either a summary or the run error.
#[derive(Debug, Clone)]
pub struct SweepRow {
    pub value: f64,
    pub summary: Option<RunSummary>,
    pub error: Option<String>,
}

#[derive(Debug, Clone)]
pub struct SweepTable {
    pub axis: String,
    pub rows: Vec<SweepRow>,
}

/// Run the base scenario once per axis value, in order. Individual run
/// errors are recorded in their row and do not abort the sweep.
pub fn sweep(base: &Scenario, axis: &str, values: &[f64]) -> Result<SweepTable> {
    if values.is_empty() {
        return Err(SimError::Validation("sweep needs at least one value".into()));
    }
    // reject bad axis names up front
    let mut probe = *base;
    probe.set_key(axis, f64::NAN)?;

    let mut rows = Vec::with_capacity(values.len());
    for &v in values {
        let mut scenario = *base;
        let row = match scenario
            .set_key(axis, v)
            .and_then(|_| engine::run(&scenario))
        {
            Ok((_, summary)) => SweepRow {
                value: v,
                summary: Some(summary),
                error: None,
            },
            Err(e) => SweepRow {
                value: v,
                summary: None,
                error: Some(e.to_string()),
            },
        };
        rows.push(row);
    }
    Ok(SweepTable {
        axis: axis.to_string(),
        rows,
    })
}

impl SweepTable {
    /// Summary table as CSV, one row per axis value.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "{},eta_rectifier,eta_boost,eta_cascade,startup_duration,active_at,v_dda_steady_mean,v_out_steady_mean,v_out_ripple,e_source,e_rect_in,e_rect_out,e_boost_out,e_losses,error\n",
            csv_field(&self.axis)
        ));
        for row in &self.rows {
            out.push_str(&format!("{}", row.value));
            match &row.summary {
                Some(s) => {
                    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
                    out.push_str(&format!(
                        ",{},{},{},{},{},{},{},{},{},{},{},{},{},",
                        opt(s.eta_rectifier),
                        opt(s.eta_boost),
                        opt(s.eta_cascade),
                        opt(s.startup_duration),
                        opt(s.startup_active_at),
                        opt(s.v_dda_steady_mean),
                        opt(s.v_out_steady_mean),
                        opt(s.v_out_ripple),
                        s.energies.source,
                        s.energies.rect_in,
                        s.energies.rect_out(),
                        s.energies.boost_out,
                        s.energies.losses_total(),
                    ));
                }
                None => out.push_str(",,,,,,,,,,,,,"),
            }
            if let Some(e) = &row.error {
                out.push_str(&csv_field(e));
            }
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::Trace;
    use crate::scenario::Scenario;

    #[test]
    fn empty_trace_exports_header_only() {
        let trace = Trace::new();
        let dir = std::env::temp_dir().join("rectsim_test_csv");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("empty.csv");
        export_csv(&trace, &path, &["v_dda"]).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text, "time,v_dda\n");
    }

    #[test]
    fn unknown_channel_is_rejected() {
        let trace = Trace::new();
        let path = std::env::temp_dir().join("rectsim_never_written.csv");
        let err = export_csv(&trace, &path, &["no_such_channel"]).unwrap_err();
        assert!(matches!(err, SimError::UnknownChannel(_)));
    }

    #[test]
    fn csv_round_trips_exactly() {
        let mut s = Scenario::default();
        s.engine.t_end = 50e-6;
        s.engine.record_decimation = 50;
        let (trace, _) = engine::run(&s).unwrap();

        let dir = std::env::temp_dir().join("rectsim_test_csv");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("roundtrip.csv");
        export_csv(&trace, &path, &["v_dda", "boost_v_out", "i1"]).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let cols = import_csv(&text).unwrap();
        assert_eq!(cols[0].0, "time");
        assert_eq!(cols[0].1, trace.time);
        assert_eq!(cols[1].1.as_slice(), trace.channel("v_dda").unwrap());
        assert_eq!(cols[2].1.as_slice(), trace.channel("boost_v_out").unwrap());
        assert_eq!(cols[3].1.as_slice(), trace.channel("i1").unwrap());
    }

    #[test]
    fn lossless_rectifier_efficiency_is_unity() {
        let mut s = Scenario::default();
        s.boost_enabled = false;
        s.topology_tag = crate::scenario::TopologyTag::FullWave;
        s.rectifier.r_on = 1e-6;
        s.rectifier.body_vf = 0.0;
        s.rectifier.body_rd = 1e-6;
        s.source.r_phase = 1e-6;
        s.source.l_phase = 0.0;
        s.control.hysteresis = 1e-4;
        s.engine.t_end = 1e-3;
        s.engine.record_decimation = 10;
        let (trace, _) = engine::run(&s).unwrap();
        let w = Window::steady_tail(&trace).unwrap();
        let report = efficiency_report(&trace, w, s.source.freq).unwrap();
        assert!(
            (report.eta_rectifier - 1.0).abs() <= 5e-3,
            "eta {}",
            report.eta_rectifier
        );
    }

    #[test]
    fn window_shorter_than_ten_periods_is_rejected() {
        let mut s = Scenario::default();
        s.engine.t_end = 100e-6;
        let (trace, _) = engine::run(&s).unwrap();
        let w = Window {
            t_start: 0.0,
            t_end: 100e-6, // 5 periods at 50 kHz
        };
        assert!(matches!(
            efficiency_report(&trace, w, s.source.freq),
            Err(SimError::Measurement(_))
        ));
    }

    #[test]
    fn stage_efficiencies_multiply_to_cascade() {
        let mut s = Scenario::default();
        s.engine.t_end = 3e-3;
        let (trace, _) = engine::run(&s).unwrap();
        let w = Window::steady_tail(&trace).unwrap();
        let report = efficiency_report(&trace, w, s.source.freq).unwrap();
        let eta_b = report.eta_boost.expect("boost present");
        let eta_c = report.eta_cascade.expect("cascade present");
        let product = report.eta_rectifier * eta_b;
        assert!(
            (eta_c - product).abs() <= 0.01 * eta_c.max(1e-9),
            "cascade {eta_c} vs product {product}"
        );
    }

    #[test]
    fn sweep_row_count_matches_values() {
        let mut base = Scenario::default();
        base.engine.t_end = 40e-6;
        let values = [1.0, 2.0, 3.3];
        let table = sweep(&base, "source.v_ll_peak", &values).unwrap();
        assert_eq!(table.rows.len(), values.len());
        for (row, v) in table.rows.iter().zip(values.iter()) {
            assert_eq!(row.value, *v);
            assert!(row.summary.is_some());
        }
    }

    #[test]
    fn single_value_sweep_equals_single_run() {
        let mut base = Scenario::default();
        base.engine.t_end = 60e-6;
        let table = sweep(&base, "load", &[150.0]).unwrap();
        let mut alone = base;
        alone.set_key("load", 150.0).unwrap();
        let (_, summary) = engine::run(&alone).unwrap();
        assert_eq!(table.rows[0].summary.as_ref().unwrap(), &summary);
    }

    #[test]
    fn sweep_records_row_errors_without_aborting() {
        let mut base = Scenario::default();
        base.engine.t_end = 30e-6;
        // a negative load fails validation inside the run, not the sweep
        let table = sweep(&base, "load", &[100.0, -1.0, 200.0]).unwrap();
        assert_eq!(table.rows.len(), 3);
        assert!(table.rows[0].error.is_none());
        assert!(table.rows[1].error.is_some());
        assert!(table.rows[2].error.is_none());
        let csv = table.to_csv();
        assert_eq!(csv.lines().count(), 4);
    }

    #[test]
    fn bad_sweep_axis_is_rejected() {
        let base = Scenario::default();
        assert!(sweep(&base, "bogus.key", &[1.0]).is_err());
    }
}
