//! Command-line front end: run scenarios, sweep parameters, export CSV.
//!
//! Exit codes: 0 success, 1 run or measurement failure, 2 configuration
//! error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use rectsim_core::{analysis, engine, load_scenario, topology_catalog, RunSummary, SimError};

#[derive(Parser)]
#[command(
    name = "rectsim",
    about = "Transient simulator for a 3-phase active rectifier with autonomous start-up and a cascaded boost regulator",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario file and report the summary.
    Run {
        /// Scenario file (TOML).
        scenario: PathBuf,
        /// Directory for CSV artifacts (trace.csv).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Comma-separated channel selection for the trace export.
        #[arg(long, value_delimiter = ',')]
        channels: Option<Vec<String>>,
    },
    /// Run the scenario once per axis value and export a summary table.
    Sweep {
        /// Base scenario file (TOML).
        scenario: PathBuf,
        /// Numeric scenario key to vary, e.g. source.v_ll_peak.
        #[arg(long)]
        axis: String,
        /// Comma-separated axis values.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        /// Directory for CSV artifacts (sweep.csv).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the conditioning-chain topology catalog.
    DescribeTopologies,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                SimError::Parse(_)
                | SimError::Validation(_)
                | SimError::NotImplemented(_)
                | SimError::UnknownChannel(_) => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), SimError> {
    match cli.command {
        Command::Run {
            scenario,
            out,
            channels,
        } => cmd_run(&scenario, out.as_deref(), channels),
        Command::Sweep {
            scenario,
            axis,
            values,
            out,
        } => cmd_sweep(&scenario, &axis, &values, out.as_deref()),
        Command::DescribeTopologies => {
            for d in topology_catalog() {
                let status = if d.simulated {
                    "simulated"
                } else {
                    "descriptor only"
                };
                println!("{:<14} [{status}]", d.name);
                println!("    {}", d.summary);
            }
            Ok(())
        }
    }
}

fn cmd_run(path: &Path, out: Option<&Path>, channels: Option<Vec<String>>) -> Result<(), SimError> {
    let scenario = load_scenario(path)?;
    let (trace, summary) = engine::run(&scenario)?;
    print_summary(&summary);

    if let Some(dir) = out {
        std::fs::create_dir_all(dir).map_err(|e| SimError::Io(format!("{}: {e}", dir.display())))?;
        let selection: Vec<&str> = match &channels {
            Some(list) => list.iter().map(|s| s.as_str()).collect(),
            None => engine::Trace::channel_names().to_vec(),
        };
        let target = dir.join("trace.csv");
        analysis::export_csv(&trace, &target, &selection)?;
        println!("trace written to {}", target.display());
    }
    Ok(())
}

fn cmd_sweep(path: &Path, axis: &str, values: &[f64], out: Option<&Path>) -> Result<(), SimError> {
    let scenario = load_scenario(path)?;
    let table = analysis::sweep(&scenario, axis, values)?;

    let mut failures = 0usize;
    for row in &table.rows {
        match (&row.summary, &row.error) {
            (Some(s), _) => println!(
                "{axis} = {:<10} eta_r {:<8} eta_b {:<8} eta_c {:<8} v_dda {:<8} v_out {}",
                row.value,
                fmt_opt(s.eta_rectifier),
                fmt_opt(s.eta_boost),
                fmt_opt(s.eta_cascade),
                fmt_opt(s.v_dda_steady_mean),
                fmt_opt(s.v_out_steady_mean),
            ),
            (None, Some(e)) => {
                failures += 1;
                println!("{axis} = {:<10} error: {e}", row.value);
            }
            _ => unreachable!(),
        }
    }

    if let Some(dir) = out {
        std::fs::create_dir_all(dir).map_err(|e| SimError::Io(format!("{}: {e}", dir.display())))?;
        let target = dir.join("sweep.csv");
        std::fs::write(&target, table.to_csv())
            .map_err(|e| SimError::Io(format!("{}: {e}", target.display())))?;
        println!("sweep table written to {}", target.display());
    }

    if failures == values.len() {
        return Err(SimError::Measurement("every sweep row failed".into()));
    }
    Ok(())
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.4}")).unwrap_or_else(|| "-".into())
}

fn print_summary(s: &RunSummary) {
    println!("run summary");
    println!("  energies (J):");
    println!("    source EMF        {:.6e}", s.energies.source);
    println!("    rectifier input   {:.6e}", s.energies.rect_in);
    println!("    rectifier output  {:.6e}", s.energies.rect_out());
    println!("    boost input       {:.6e}", s.energies.boost_in);
    println!("    boost output      {:.6e}", s.energies.boost_out);
    println!(
        "    losses            {:.6e}  (phase {:.3e}, switch {:.3e}, diode {:.3e}, gndc {:.3e}, boost {:.3e})",
        s.energies.losses_total(),
        s.energies.loss_phase,
        s.energies.loss_switch,
        s.energies.loss_diode,
        s.energies.loss_gndc,
        s.energies.boost_loss_switch + s.energies.boost_loss_diode + s.energies.boost_loss_quiescent,
    );
    println!("  efficiencies (steady window):");
    println!("    rectifier {}", fmt_opt(s.eta_rectifier));
    println!("    boost     {}", fmt_opt(s.eta_boost));
    println!("    cascade   {}", fmt_opt(s.eta_cascade));
    match (s.startup_engaged_at, s.startup_active_at) {
        (Some(e), Some(a)) => println!(
            "  start-up: engaged at {:.3e} s, ACTIVE at {:.3e} s (duration {:.3e} s)",
            e,
            a,
            a - e
        ),
        (None, Some(a)) => println!("  start-up: ACTIVE at {:.3e} s (body-diode start)", a),
        _ => println!("  start-up: ACTIVE not reached"),
    }
    if let Some(v) = s.v_dda_steady_mean {
        println!("  steady v_dda mean: {v:.4} V");
    }
    if let (Some(m), Some(r)) = (s.v_out_steady_mean, s.v_out_ripple) {
        println!("  steady v_out: {m:.4} V (ripple {r:.4} V peak-peak)");
    }
    for w in &s.warnings {
        println!("  warning: {w}");
    }
}
