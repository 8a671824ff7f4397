use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use irsloc::harness::{write_track_csv, Pipeline};
use irsloc::irscontrol::optimal_phases_for;
use irsloc::locate::{locate_multi, noise_floor_estimate, FocusedPatterns, MultiOptions, PatternCache};
use irsloc::rng::{domain, stream};
use irsloc::{
    build_codebook, compare_patterns, load_scenario, locate_single, quantize, run_experiment, track, Baseline, ChannelModel,
    ExperimentSpec, Grid, PhasePattern, Scenario, SimulatedSource, Sweep, TrackOptions,
};
use serde_json::json;

#[derive(Parser)]
#[command(name = "irsloc", version, about = "IRS-assisted passive localization simulator", arg_required_else_help = true)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Scenario JSON file; the built-in preset is used when omitted.
    #[arg(long, global = true)]
    scenario: Option<PathBuf>,
    /// Built-in scenario used when no file is given.
    #[arg(long, global = true, value_enum, default_value_t = Preset::Reference)]
    preset: Preset,
    /// Output directory, created if missing.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Overrides the scenario's rng_seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true, env = "IRSLOC_THREADS")]
    threads: Option<usize>,
    /// Monte Carlo trials.
    #[arg(long, global = true)]
    trials: Option<usize>,
    /// Format of tabular outputs.
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    Reference,
    ThreePerson,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum SweepAxis {
    Power,
    Dims,
    States,
}

#[derive(Clone, Copy, ValueEnum)]
enum PipelineArg {
    Single,
    Multi,
}

#[derive(Subcommand)]
enum Command {
    /// Dump received snapshots along the scenario's trajectories.
    Simulate {
        #[arg(long, default_value_t = 10)]
        frames: u64,
        /// Seconds between frames.
        #[arg(long, default_value_t = 0.1)]
        dt: f64,
        /// Skip receiver noise.
        #[arg(long)]
        noiseless: bool,
    },
    /// Single-person localization: heatmaps per level plus the estimate.
    Locate {
        /// Scenario time of the frame pair.
        #[arg(long, default_value_t = 0.0)]
        time: f64,
    },
    /// Multi-person localization with side-lobe nulling.
    LocateMulti {
        #[arg(long, default_value_t = 0.0)]
        time: f64,
        /// Phase perturbation bound in radians.
        #[arg(long, default_value_t = std::f64::consts::FRAC_PI_6)]
        phi_max: f64,
        #[arg(long, default_value_t = 0.5)]
        mask: f64,
        #[arg(long, default_value_t = 10)]
        max_persons: usize,
        /// Disable null steering (mask only).
        #[arg(long)]
        no_null: bool,
        /// Use unquantized phases.
        #[arg(long)]
        continuous: bool,
        /// Empty-scene trials for the noise floor (at least 30).
        #[arg(long, default_value_t = 100)]
        floor_trials: usize,
    },
    /// Per-frame localization along the trajectories.
    Track {
        #[arg(long, default_value_t = 20)]
        frames: usize,
        #[arg(long, value_enum, default_value_t = PipelineArg::Single)]
        pipeline: PipelineArg,
        #[arg(long)]
        noiseless: bool,
    },
    /// Beam patterns without and with a null toward an interferer.
    Beampattern {
        #[arg(long, value_parser = parse_point, default_value = "3,3")]
        focus: (f64, f64),
        #[arg(long, value_parser = parse_point, default_value = "2.22,3")]
        interference: (f64, f64),
        #[arg(long, default_value_t = std::f64::consts::FRAC_PI_6)]
        phi_max: f64,
        /// Grid cell size of the maps.
        #[arg(long, default_value_t = 0.05)]
        cell: f64,
        /// Use unquantized phases.
        #[arg(long)]
        continuous: bool,
    },
    /// Error sweeps for one or all baselines.
    Bench {
        #[arg(long, value_enum, default_value_t = SweepAxis::Power)]
        sweep: SweepAxis,
        /// Baseline name or `all`.
        #[arg(long, default_value = "proposed")]
        baseline: String,
        /// Comma-separated sweep values (dims as RxC, e.g. 9x9).
        #[arg(long)]
        values: Option<String>,
    },
    /// Build the quantized focusing codebook for a grid.
    Codebook {
        #[arg(long, default_value_t = 0.5)]
        cell: f64,
    },
}

fn parse_point(s: &str) -> std::result::Result<(f64, f64), String> {
    let (x, y) = s.split_once(',').ok_or("expected x,y")?;
    let p = |v: &str| v.trim().parse::<f64>().map_err(|e| format!("{v}: {e}"));
    Ok((p(x)?, p(y)?))
}

fn parse_sweep(axis: SweepAxis, values: Option<&str>) -> Result<Sweep> {
    let Some(values) = values else {
        return Ok(match axis {
            SweepAxis::Power => Sweep::default_power(),
            SweepAxis::Dims => Sweep::default_dims(),
            SweepAxis::States => Sweep::default_states(),
        });
    };
    let items: Vec<&str> = values.split(',').map(str::trim).collect();
    Ok(match axis {
        SweepAxis::Power => Sweep::Power(items.iter().map(|v| v.parse()).collect::<Result<_, _>>()?),
        SweepAxis::States => Sweep::States(items.iter().map(|v| v.parse()).collect::<Result<_, _>>()?),
        SweepAxis::Dims => Sweep::IrsDims(
            items
                .iter()
                .map(|v| {
                    let (r, c) = v.split_once('x').with_context(|| format!("bad dims `{v}`, expected RxC"))?;
                    Ok((r.parse()?, c.parse()?))
                })
                .collect::<Result<_>>()?,
        ),
    })
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    let p = dir.join(name);
    Ok(BufWriter::new(File::create(&p).with_context(|| format!("cannot write {}", p.display()))?))
}

fn write_json(dir: &Path, name: &str, v: &impl serde::Serialize) -> Result<()> {
    let mut w = create(dir, name)?;
    serde_json::to_writer_pretty(&mut w, v)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn load(c: &Common) -> Result<Scenario> {
    let mut s = match &c.scenario {
        Some(p) => load_scenario(p).with_context(|| format!("bad scenario file {}", p.display()))?,
        None => match c.preset {
            Preset::Reference => Scenario::reference(),
            Preset::ThreePerson => Scenario::reference_three_person(),
        },
    };
    if let Some(seed) = c.seed {
        s.rng_seed = seed;
    }
    s.validate()?;
    Ok(s)
}

fn run(cli: Cli) -> Result<()> {
    let c = &cli.common;
    if let Some(n) = c.threads {
        if n == 0 {
            bail!("--threads must be at least 1");
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    let s = load(c)?;
    let out = &c.out;
    fs::create_dir_all(out).with_context(|| format!("cannot create {}", out.display()))?;
    match cli.command {
        Command::Simulate { frames, dt, noiseless } => {
            let model = ChannelModel::new(&s)?;
            let pattern = match s.persons.first() {
                Some(p) => {
                    let a = p.start();
                    quantize(&optimal_phases_for(&model, a.x, a.y), s.irs.bits)
                }
                None => PhasePattern::zeros(model.element_count()),
            };
            let snaps = (0..frames)
                .map(|k| {
                    let t = k as f64 * dt;
                    let persons = s.persons.iter().map(|p| model.reflector(p.position_at(t))).collect::<irsloc::Result<Vec<_>>>()?;
                    let mut rng = stream(s.rng_seed, &[domain::SIMULATE, k]);
                    let rng: Option<&mut dyn rand::RngCore> = if noiseless { None } else { Some(&mut rng) };
                    Ok(model.snapshot(&pattern, &persons, rng, k)?)
                })
                .collect::<Result<Vec<_>>>()?;
            match c.format {
                Format::Csv => {
                    let mut w = create(out, "snapshots.csv")?;
                    irsloc::channel::write_snapshots_csv(&mut w, &snaps)?;
                    w.flush()?;
                }
                Format::Json => write_json(out, "snapshots.json", &snaps)?,
            }
        }
        Command::Locate { time } => {
            let model = ChannelModel::new(&s)?;
            let src = SimulatedSource::from_scenario(&s, time, 0)?;
            let r = locate_single(&src, &s, &irsloc::locate::default_levels(), &FocusedPatterns { model: &model, bits: Some(s.irs.bits) })?;
            for (k, h) in r.heatmaps.iter().enumerate() {
                match c.format {
                    Format::Csv => {
                        let mut w = create(out, &format!("heatmap_level{k}.csv"))?;
                        h.write_csv(&mut w)?;
                        w.flush()?;
                    }
                    Format::Json => write_json(out, &format!("heatmap_level{k}.json"), h)?,
                }
            }
            write_json(out, "estimate.json", &json!({ "x": r.estimate.0, "y": r.estimate.1, "amplitude": r.amplitude }))?;
        }
        Command::LocateMulti { time, phi_max, mask, max_persons, no_null, continuous, floor_trials } => {
            let model = ChannelModel::new(&s)?;
            let noise_floor =
                noise_floor_estimate(&SimulatedSource::empty(model.clone()).with_noise(s.rng_seed, u64::MAX), &s, floor_trials)?;
            let src = SimulatedSource::from_scenario(&s, time, 0)?;
            let opts = MultiOptions {
                phi_max,
                mask_side: mask,
                noise_floor,
                max_persons,
                null_steering: !no_null,
                bits: if continuous { None } else { Some(s.irs.bits) },
                ..MultiOptions::default()
            };
            let cache = PatternCache::new();
            let r = locate_multi(&src, &s, &model, &opts, Some(&cache))?;
            let mut w = create(out, "detections.json")?;
            writeln!(w, "{}", r.detections.to_json()?)?;
            w.flush()?;
            write_json(
                out,
                "summary.json",
                &json!({ "stop_reason": r.detections.stop_reason, "noise_floor": noise_floor, "iterations": r.coarse.len() }),
            )?;
            for (k, h) in r.coarse.iter().enumerate() {
                match c.format {
                    Format::Csv => {
                        let mut w = create(out, &format!("coarse_iter{}.csv", k + 1))?;
                        h.write_csv(&mut w)?;
                        w.flush()?;
                    }
                    Format::Json => write_json(out, &format!("coarse_iter{}.json", k + 1), h)?,
                }
            }
        }
        Command::Track { frames, pipeline, noiseless } => {
            let pipeline = match pipeline {
                PipelineArg::Single => Pipeline::Single,
                PipelineArg::Multi => Pipeline::Multi,
            };
            let mut opts = TrackOptions::new(&s, frames, pipeline);
            opts.noise = !noiseless;
            let r = track(&s, &opts)?;
            match c.format {
                Format::Csv => {
                    let mut w = create(out, "track.csv")?;
                    write_track_csv(&r, &mut w)?;
                    w.flush()?;
                }
                Format::Json => write_json(out, "track.json", &r)?,
            }
        }
        Command::Beampattern { focus, interference, phi_max, cell, continuous } => {
            let grid = Grid::covering(&s.room, cell, 0)?;
            let bits = if continuous { Some(None) } else { None };
            let r = compare_patterns(&s, focus, interference, &grid, phi_max, bits)?;
            match c.format {
                Format::Csv => {
                    for (name, m) in [("no_cancellation", &r.no_cancellation), ("proposed", &r.proposed)] {
                        let mut w = create(out, &format!("beampattern_{name}.csv"))?;
                        m.write_csv(&mut w)?;
                        w.flush()?;
                    }
                }
                Format::Json => {
                    write_json(out, "beampattern_no_cancellation.json", &r.no_cancellation)?;
                    write_json(out, "beampattern_proposed.json", &r.proposed)?;
                }
            }
            write_json(
                out,
                "beampattern_summary.json",
                &json!({
                    "focus": r.focus,
                    "interference": r.interference,
                    "bits": r.bits,
                    "suppression_db": r.suppression_db,
                    "focus_change_db": r.focus_change_db,
                    "delta_phi": r.perturbation.delta_phi,
                }),
            )?;
        }
        Command::Bench { sweep, baseline, values } => {
            let sweep = parse_sweep(sweep, values.as_deref())?;
            let baselines = if baseline == "all" { Baseline::ALL.to_vec() } else { vec![baseline.parse::<Baseline>()?] };
            for b in baselines {
                let mut e = ExperimentSpec::new(s.clone(), sweep.clone(), b).with_seed(s.rng_seed);
                if let Some(t) = c.trials {
                    e = e.with_trials(t);
                }
                let r = run_experiment(&e)?;
                match c.format {
                    Format::Csv => {
                        let mut w = create(out, &format!("rmse_{b}.csv"))?;
                        r.write_csv(&mut w)?;
                        w.flush()?;
                        let mut w = create(out, &format!("trials_{b}.csv"))?;
                        r.write_trials_csv(&mut w)?;
                        w.flush()?;
                    }
                    Format::Json => write_json(out, &format!("rmse_{b}.json"), &r)?,
                }
            }
        }
        Command::Codebook { cell } => {
            let grid = Grid::covering(&s.room, cell, 0)?;
            let cb = build_codebook(&s, &grid)?;
            let mut w = create(out, "codebook.txt")?;
            cb.write(&mut w)?;
            w.flush()?;
        }
    }
    Ok(())
}

/// Error chain on one line, skipping causes the message above already quotes.
fn describe(e: &anyhow::Error) -> String {
    let mut msg = String::new();
    for cause in e.chain() {
        let c = cause.to_string();
        if !msg.contains(&c) {
            if !msg.is_empty() {
                msg.push_str(": ");
            }
            msg.push_str(&c);
        }
    }
    msg
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() || e.kind() == clap::error::ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand {
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", describe(&e));
            ExitCode::FAILURE
        }
    }
}
