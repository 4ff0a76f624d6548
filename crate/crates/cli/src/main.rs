use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

use panelbot::engine::run;
use panelbot::power::{charge_profile, BatteryModel, BuckDesign, ChargerConfig};
use panelbot::scenario::Scenario;
use panelbot::trace::{emit_summary, emit_trace_csv, fmt_sig6, write_file};
use panelbot::Result;

#[derive(Parser)]
#[command(name = "panelbot", version, about = "Solar-panel cleaning robot simulator")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a scenario and write its trace and summary.
    Simulate {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        trace: PathBuf,
        #[arg(long)]
        summary: PathBuf,
        /// Overrides the scenario's seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides the scenario's time limit.
        #[arg(long = "max-sim-s")]
        max_sim_s: Option<f64>,
    },
    /// Size the buck converter inductor.
    BuckDesign {
        #[arg(long)]
        vin: f64,
        #[arg(long)]
        vout: f64,
        #[arg(long)]
        fsw: f64,
        /// Ripple current half-amplitude in amps.
        #[arg(long)]
        ripple: f64,
        /// Also size the output capacitor for this LC corner frequency.
        #[arg(long)]
        corner: Option<f64>,
    },
    /// Tabulate a CC/CV charge from an empty pack.
    ChargeProfile {
        #[arg(long)]
        capacity: f64,
        #[arg(long)]
        icc: f64,
        #[arg(long)]
        iterm: f64,
        #[arg(long)]
        tau: f64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0.0)]
        soc: f64,
        #[arg(long, default_value_t = 1.0)]
        dt: f64,
    },
}

fn simulate(
    scenario: &Path,
    trace: &Path,
    summary: &Path,
    seed: Option<u64>,
    max_sim_s: Option<f64>,
) -> Result<()> {
    let mut sc = Scenario::load(scenario)?;
    if let Some(s) = seed {
        sc.seed = s;
    }
    if let Some(m) = max_sim_s {
        sc.max_sim_s = m;
    }
    sc.validate()?;
    let out = run(&sc)?;
    write_file(trace, &emit_trace_csv(&out.trace)?)?;
    write_file(summary, &emit_summary(&out.summary))?;
    Ok(())
}

fn buck_design(vin: f64, vout: f64, fsw: f64, ripple: f64, corner: Option<f64>) -> Result<()> {
    let d = BuckDesign::new(vin, vout, fsw, ripple, corner)?;
    println!("duty_d = {}", fmt_sig6(d.duty_d));
    println!("l_h = {}", fmt_sig6(d.l_h));
    if let (Some(c), Some(f)) = (d.c_f, d.f_corner) {
        println!("c_f = {}", fmt_sig6(c));
        println!("f_corner = {}", fmt_sig6(f));
    }
    Ok(())
}

fn charge(capacity: f64, icc: f64, iterm: f64, tau: f64, out: &Path, soc: f64, dt: f64) -> Result<()> {
    let batt = BatteryModel {
        capacity_ah: capacity,
        soc,
        ..BatteryModel::default()
    };
    let cfg = ChargerConfig {
        i_cc: icc,
        i_term: iterm,
        cv_tau_s: tau,
        v_cv: batt.v_full,
    };
    batt.validate()?;
    cfg.validate(&batt)?;
    // Long enough for any valid configuration to finish.
    let max_s = 2.0 * (capacity * 3600.0 / icc + cfg.cv_duration_s()) + dt;
    let rows = charge_profile(&batt, &cfg, dt, max_s)?;
    let mut csv = String::from("t_s,phase,terminal_v,current_a,soc\n");
    for r in &rows {
        writeln!(
            csv,
            "{},{},{},{},{}",
            fmt_sig6(r.t_s),
            r.phase.name(),
            fmt_sig6(r.terminal_v),
            fmt_sig6(r.current_a),
            fmt_sig6(r.soc)
        )
        .expect("writing to a String cannot fail");
    }
    write_file(out, &csv)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    let res = match &cli.cmd {
        Cmd::Simulate {
            scenario,
            trace,
            summary,
            seed,
            max_sim_s,
        } => simulate(scenario, trace, summary, *seed, *max_sim_s),
        Cmd::BuckDesign {
            vin,
            vout,
            fsw,
            ripple,
            corner,
        } => buck_design(*vin, *vout, *fsw, *ripple, *corner),
        Cmd::ChargeProfile {
            capacity,
            icc,
            iterm,
            tau,
            out,
            soc,
            dt,
        } => charge(*capacity, *icc, *iterm, *tau, out, *soc, *dt),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 1 } else { 2 })
        }
    }
}
