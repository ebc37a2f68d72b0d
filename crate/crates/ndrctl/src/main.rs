use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ndr_core::decision_rule::{read_params, write_params, write_params_csv, DecisionRuleParams, SensorWindow};
use ndr_core::exec::ExecMode;
use ndr_core::harness::{
    demand_sweep, evaluate_online, load_training_spec, sensor_relocation_compare, simulate_with_sink,
    train, write_detail_csv, write_evaluation_csv, write_evaluation_summary, write_kpi_csv,
    write_relocation_csv, write_sweep_csv, Control, DecisionLogEntry, KpiSummary, ObjectiveMode,
    TrainingSpec,
};
use ndr_core::microsim::{write_trajectories_csv, write_trips_csv, TrajectoryPoint};
use ndr_core::network::{load_scenario, parse_scenario, read_detector_layout, validate_scenario, Scenario};
use ndr_core::pso::{load_checkpoint, FileProgress};
use ndr_core::Error;

const EXIT_USAGE: u8 = 1;
const EXIT_INVALID: u8 = 2;
const EXIT_RUNTIME: u8 = 3;

#[derive(Parser)]
#[command(name = "ndrctl", version, about = "Train and evaluate neural signal-timing decision rules")]
struct Cli {
    /// Log progress to stderr (repeat for more detail).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,

    /// Run Monte-Carlo seeds on the calling thread only.
    #[arg(long, global = true)]
    sequential: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a scenario file and print its diagnostics.
    Validate { scenario: PathBuf },

    /// Train a decision rule from a training spec.
    Train {
        spec: PathBuf,
        #[arg(long, value_parser = parse_objective)]
        objective: Option<ObjectiveMode>,
        #[arg(long)]
        out: PathBuf,
        /// Per-iteration progress CSV.
        #[arg(long)]
        log: Option<PathBuf>,
        /// Swarm state written after every iteration.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Continue from a checkpoint written by an earlier run.
        #[arg(long)]
        resume: Option<PathBuf>,
    },

    /// Compare a trained rule against fixed timing on the given seeds.
    Evaluate {
        scenario: PathBuf,
        params: PathBuf,
        #[arg(long, value_parser = parse_seeds)]
        seeds: SeedList,
        #[command(flatten)]
        window: WindowArgs,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },

    /// Re-evaluate at scaled demand levels.
    SweepDemand {
        scenario: PathBuf,
        /// Trained rule; without it fixed timing is compared with itself.
        params: Option<PathBuf>,
        #[arg(long, value_delimiter = ',', default_value = "1.0,1.1,1.2,1.3")]
        factors: Vec<f64>,
        #[arg(long, value_parser = parse_seeds)]
        seeds: SeedList,
        #[command(flatten)]
        window: WindowArgs,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },

    /// Train and evaluate one rule per detector layout.
    CompareSensors {
        spec: PathBuf,
        /// Second layout; the first is the spec's own.
        #[arg(long)]
        layout_b: PathBuf,
        /// Replace the spec's layout as the first layout.
        #[arg(long)]
        layout_a: Option<PathBuf>,
        #[arg(long, value_parser = parse_objective)]
        objective: Option<ObjectiveMode>,
        /// Skip training and use these rules (both required together).
        #[arg(long, requires = "params_b")]
        params_a: Option<PathBuf>,
        #[arg(long, requires = "params_a")]
        params_b: Option<PathBuf>,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },

    /// Run a single seed and export its trips and decisions.
    Replay {
        scenario: PathBuf,
        /// Trained rule; fixed timing if omitted.
        params: Option<PathBuf>,
        #[arg(long)]
        seed: u64,
        /// Also write every vehicle's state at every step.
        #[arg(long)]
        export_trajectories: bool,
        #[command(flatten)]
        window: WindowArgs,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
}

#[derive(clap::Args, Clone, Copy)]
struct WindowArgs {
    /// Sensor window lag in aggregation periods; depth follows from the rule.
    #[arg(long, default_value_t = 0)]
    lag: usize,
}

#[derive(Clone)]
struct SeedList(Vec<u64>);

/// `a..b` (inclusive) or a comma-separated list.
fn parse_seeds(s: &str) -> Result<SeedList, String> {
    if let Some((a, b)) = s.split_once("..") {
        let a: u64 = a.trim().parse().map_err(|e| format!("{a:?}: {e}"))?;
        let b: u64 = b.trim().parse().map_err(|e| format!("{b:?}: {e}"))?;
        if a > b {
            return Err(format!("empty seed range {s}"));
        }
        return Ok(SeedList((a..=b).collect()));
    }
    let seeds = s
        .split(',')
        .map(|p| p.trim().parse::<u64>().map_err(|e| format!("{p:?}: {e}")))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(SeedList(seeds))
}

fn parse_objective(s: &str) -> Result<ObjectiveMode, String> {
    s.parse::<ObjectiveMode>().map_err(|e| e.to_string())
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Parse { .. }
        | Error::Invalid(_)
        | Error::InfeasibleSet { .. }
        | Error::Dimension { .. }
        | Error::UnknownClass(_)
        | Error::InvalidArgument(_)
        | Error::ParamFormat(_) => EXIT_INVALID,
        _ => EXIT_RUNTIME,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    let exec = if cli.sequential { ExecMode::Sequential } else { ExecMode::Parallel };
    match run(cli.command, exec) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn run(command: Command, exec: ExecMode) -> ndr_core::Result<u8> {
    match command {
        Command::Validate { scenario } => validate(&scenario),
        Command::Train {
            spec,
            objective,
            out,
            log,
            checkpoint,
            resume,
        } => {
            let mut spec = load_training_spec(&spec)?;
            if exec == ExecMode::Sequential {
                spec.exec = exec;
            }
            let objective = spec.objective_for(objective)?;
            let resume = resume.map(load_checkpoint).transpose()?;
            let mut progress = FileProgress::new(log, checkpoint)?;
            let result = train(&spec, &objective, resume, &mut progress)?;
            write_params(&result.params, &out)?;
            write_params_csv(&result.params, File::create(out.with_extension("csv"))?)?;
            println!(
                "trained {} weights ({} {}), objective {} = {:.6} after {} iterations ({} evaluations)",
                result.params.weights.len(),
                result.params.arch.name(),
                describe_window(&spec.window),
                objective.mode,
                result.pso.best_value,
                result.pso.state.iteration,
                result.pso.state.evaluations,
            );
            println!("wrote {}", out.display());
            Ok(0)
        }
        Command::Evaluate {
            scenario,
            params,
            seeds,
            window,
            out_dir,
        } => {
            let sc = load_scenario(&scenario)?;
            let params = read_params(&params)?;
            let window = infer_window(&sc, &params, window)?;
            let report = evaluate_online(&sc, &params, window, &seeds.0, exec)?;
            fs::create_dir_all(&out_dir)?;
            write_evaluation_csv(&report, create(&out_dir, "evaluation.csv")?)?;
            write_kpi_csv(&report.baseline, create(&out_dir, "kpi_baseline.csv")?)?;
            write_kpi_csv(&report.candidate, create(&out_dir, "kpi_ndr.csv")?)?;
            write_detail_csv(&report.candidate, &sc.network, create(&out_dir, "detail_ndr.csv")?)?;
            let mut summary = Vec::new();
            write_evaluation_summary(&report, &mut summary)?;
            fs::write(out_dir.join("summary.txt"), &summary)?;
            io::stdout().write_all(&summary)?;
            Ok(0)
        }
        Command::SweepDemand {
            scenario,
            params,
            factors,
            seeds,
            window,
            out_dir,
        } => {
            let sc = load_scenario(&scenario)?;
            let params = params.map(read_params).transpose()?;
            let control = match &params {
                Some(p) => Control::Ndr {
                    params: p,
                    window: infer_window(&sc, p, window)?,
                },
                None => Control::Fixed,
            };
            let rows = demand_sweep(&sc, control, &factors, &seeds.0, exec)?;
            fs::create_dir_all(&out_dir)?;
            write_sweep_csv(&rows, create(&out_dir, "sweep.csv")?)?;
            let mut text = String::new();
            text.push_str(&format!(
                "{:>7} {:>12} {:>12} {:>10} {:>10}\n",
                "factor", "delay_fixed", "delay_ndr", "delay_inc", "thru_inc"
            ));
            for r in &rows {
                text.push_str(&format!(
                    "{:>7.2} {:>12.2} {:>12.2} {:>9.1}% {:>9.1}%\n",
                    r.factor,
                    r.report.baseline_mean.mean_delay,
                    r.report.candidate_mean.mean_delay,
                    100.0 * r.relative.mean_delay,
                    100.0 * r.relative.throughput
                ));
            }
            fs::write(out_dir.join("sweep_summary.txt"), &text)?;
            print!("{text}");
            Ok(0)
        }
        Command::CompareSensors {
            spec,
            layout_b,
            layout_a,
            objective,
            params_a,
            params_b,
            out_dir,
        } => {
            let mut spec: TrainingSpec = load_training_spec(&spec)?;
            if exec == ExecMode::Sequential {
                spec.exec = exec;
            }
            let a = match layout_a {
                Some(p) => read_detector_layout(p)?,
                None => spec.scenario.network.detectors.clone(),
            };
            let b = read_detector_layout(&layout_b)?;
            let objective = spec.objective_for(objective)?;
            let params = match (params_a, params_b) {
                (Some(pa), Some(pb)) => Some((read_params(pa)?, read_params(pb)?)),
                _ => None,
            };
            let report = sensor_relocation_compare(&spec, &objective, &a, &b, params)?;
            fs::create_dir_all(&out_dir)?;
            write_relocation_csv(&report, create(&out_dir, "relocation.csv")?)?;
            write_params(&report.params_a, out_dir.join("params_a.bin"))?;
            write_params(&report.params_b, out_dir.join("params_b.bin"))?;
            let mut text = String::new();
            for (name, r) in [("A", &report.a), ("B", &report.b)] {
                text.push_str(&format!("layout {name}\n"));
                let mut buf = Vec::new();
                write_evaluation_summary(r, &mut buf)?;
                text.push_str(&String::from_utf8_lossy(&buf));
                text.push('\n');
            }
            text.push_str("B - A (ndr means)\n");
            for (name, v) in KpiSummary::FIELDS.iter().zip(report.delta.values()) {
                text.push_str(&format!("{name:<12} {v:>12.3}\n"));
            }
            fs::write(out_dir.join("relocation_summary.txt"), &text)?;
            print!("{text}");
            Ok(0)
        }
        Command::Replay {
            scenario,
            params,
            seed,
            export_trajectories,
            window,
            out_dir,
        } => {
            let sc = load_scenario(&scenario)?;
            let params = params.map(read_params).transpose()?;
            let control = match &params {
                Some(p) => Control::Ndr {
                    params: p,
                    window: infer_window(&sc, p, window)?,
                },
                None => Control::Fixed,
            };
            let mut points: Vec<TrajectoryPoint> = Vec::new();
            let run = if export_trajectories {
                simulate_with_sink(&sc, control, seed, &mut points)?
            } else {
                simulate_with_sink(&sc, control, seed, &mut ())?
            };
            fs::create_dir_all(&out_dir)?;
            write_trips_csv(&run.output.trips, create(&out_dir, "trips.csv")?)?;
            write_kpi_csv(std::slice::from_ref(&run.kpi), create(&out_dir, "kpi.csv")?)?;
            write_detail_csv(std::slice::from_ref(&run.kpi), &sc.network, create(&out_dir, "detail.csv")?)?;
            write_decisions_csv(&run.decisions, &sc, create(&out_dir, "decisions.csv")?)?;
            if export_trajectories {
                write_trajectories_csv(&points, &sc.network, create(&out_dir, "trajectories.csv")?)?;
            }
            let k = &run.kpi;
            println!(
                "seed {seed}: {} departed, {} completed, mean delay {:.2} s, CO2 {:.3} kg, BC {:.4} g, {} decisions",
                k.departures,
                k.throughput,
                k.mean_delay,
                k.co2,
                k.bc,
                run.decisions.len()
            );
            if let Some(t) = k.gridlock {
                println!("gridlock detected at t = {t:.1} s");
            }
            Ok(0)
        }
    }
}

fn validate(path: &Path) -> ndr_core::Result<u8> {
    let text = fs::read_to_string(path)?;
    let sc = parse_scenario(&text).map_err(|e| match e {
        Error::Parse { message, .. } => Error::Parse {
            path: path.to_path_buf(),
            message,
        },
        other => other,
    })?;
    let diags = validate_scenario(&sc);
    if diags.is_empty() {
        let net = &sc.network;
        println!(
            "{}: ok ({} links, {} junctions, {} detectors, {} OD pairs)",
            path.display(),
            net.links.len(),
            net.junctions.len(),
            net.detectors.len(),
            sc.demand.od.len()
        );
        return Ok(0);
    }
    for d in &diags {
        println!("{}: {d}", path.display());
    }
    Ok(EXIT_INVALID)
}

fn create(dir: &Path, name: &str) -> io::Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn describe_window(w: &SensorWindow) -> String {
    format!("lag {}, depth {}, period {} s", w.lag, w.depth, w.period)
}

/// The rule fixes the number of window columns; with the lag this gives the
/// depth, and the aggregation period is the detectors'.
fn infer_window(sc: &Scenario, params: &DecisionRuleParams, args: WindowArgs) -> ndr_core::Result<SensorWindow> {
    let period = sc
        .network
        .detectors
        .first()
        .map(|d| d.period)
        .ok_or_else(|| Error::InvalidArgument("scenario has no detectors".into()))?;
    if params.n_cols == 0 {
        return Err(Error::ParamFormat("decision rule reads zero window columns".into()));
    }
    Ok(SensorWindow {
        lag: args.lag,
        depth: params.n_cols - 1 + args.lag,
        period,
    })
}

fn write_decisions_csv<W: Write>(log: &[DecisionLogEntry], sc: &Scenario, mut out: W) -> ndr_core::Result<()> {
    writeln!(out, "time_s,junction,phase,proposal_s,green_s,lambda")?;
    for e in log {
        let j = &sc.network.junctions[e.junction];
        for ((phase, p), g) in j.phases.iter().zip(&e.proposal).zip(&e.greens) {
            writeln!(out, "{},{},{},{},{},{}", e.time, j.junction_id, phase.id, p, g, e.lambda)?;
        }
    }
    out.flush()?;
    Ok(())
}
