//! Monte Carlo experiments: error sweeps against baselines, trajectory
//! tracking, and beam-pattern comparisons.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::beamform::steering_weights;
use crate::channel::{ChannelModel, PhasePattern};
use crate::error::{invalid, Error, Result};
use crate::grid::Grid;
use crate::irscontrol::{beam_pattern, beam_response, optimal_phases_for, quantize, BeamPatternMap};
use crate::locate::{
    default_levels, locate_multi, locate_single, scenario_frame_pairs, FixedPattern, FocusedPatterns, Level, MultiOptions, PatternCache,
    PatternProvider, RandomPatterns, SimulatedSource,
};
use crate::nullsteer::{apply_perturbation, apply_perturbation_continuous, build_problem_from_paths, solve_null, Perturbation};
use crate::rng::{domain, stream};
use crate::scene::{Scenario, Trajectory, Vec3};

/// Mean Euclidean distance between paired estimates and truths.
pub fn rmse(estimates: &[(f64, f64)], truths: &[(f64, f64)]) -> Result<f64> {
    if estimates.len() != truths.len() {
        return Err(Error::LengthMismatch { expected: truths.len(), got: estimates.len() });
    }
    if estimates.is_empty() {
        return Err(invalid("estimates", "need at least one pair"));
    }
    let sum: f64 = estimates.iter().zip(truths).map(|(e, t)| (e.0 - t.0).hypot(e.1 - t.1)).sum();
    Ok(sum / estimates.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Baseline {
    Proposed,
    WithoutIrs,
    RandomIrs,
    OneRxAntenna,
    /// Multi-person loop without null steering. With one person per trial it
    /// reduces to the proposed single-person pipeline.
    NoCancellation,
}

impl Baseline {
    pub const ALL: [Baseline; 5] =
        [Baseline::Proposed, Baseline::WithoutIrs, Baseline::RandomIrs, Baseline::OneRxAntenna, Baseline::NoCancellation];

    pub fn name(self) -> &'static str {
        match self {
            Baseline::Proposed => "proposed",
            Baseline::WithoutIrs => "without_irs",
            Baseline::RandomIrs => "random_irs",
            Baseline::OneRxAntenna => "one_rx_antenna",
            Baseline::NoCancellation => "no_cancellation",
        }
    }
}

impl fmt::Display for Baseline {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Baseline {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Baseline::ALL.into_iter().find(|b| b.name() == s).ok_or_else(|| invalid("baseline", format!("unknown baseline `{s}`")))
    }
}

/// What varies across the points of an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sweep {
    /// Transmit power in dBm.
    Power(Vec<f64>),
    /// IRS rows x cols.
    IrsDims(Vec<(usize, usize)>),
    /// Number of phase states per element (a power of two).
    States(Vec<u32>),
}

impl Sweep {
    /// -10 to 20 dBm in 5 dB steps.
    pub fn default_power() -> Self {
        Sweep::Power((0..7).map(|i| -10.0 + 5.0 * i as f64).collect())
    }

    pub fn default_dims() -> Self {
        Sweep::IrsDims(vec![(7, 7), (9, 9), (11, 11)])
    }

    pub fn default_states() -> Self {
        Sweep::States(vec![2, 4, 8])
    }

    pub fn axis(&self) -> &'static str {
        match self {
            Sweep::Power(_) => "power_dbm",
            Sweep::IrsDims(_) => "irs_dims",
            Sweep::States(_) => "states",
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Sweep::Power(v) => v.len(),
            Sweep::IrsDims(v) => v.len(),
            Sweep::States(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn label(&self, i: usize) -> String {
        match self {
            Sweep::Power(v) => format!("{}", v[i]),
            Sweep::IrsDims(v) => format!("{}x{}", v[i].0, v[i].1),
            Sweep::States(v) => format!("{}", v[i]),
        }
    }

    fn apply(&self, i: usize, s: &Scenario) -> Scenario {
        match self {
            Sweep::Power(v) => s.clone().with_tx_power(v[i]),
            Sweep::IrsDims(v) => s.clone().with_irs_dims(v[i].0, v[i].1),
            Sweep::States(v) => s.clone().with_bits(v[i].trailing_zeros()),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.is_empty() {
            return Err(invalid("sweep", "needs at least one value"));
        }
        match self {
            Sweep::Power(v) if v.iter().any(|p| !p.is_finite()) => Err(invalid("sweep", "power must be finite")),
            Sweep::IrsDims(v) if v.iter().any(|d| d.0 == 0 || d.1 == 0) => Err(invalid("sweep", "IRS dimensions must be positive")),
            Sweep::States(v) if v.iter().any(|n| *n < 2 || !n.is_power_of_two() || *n > 1 << 16) => {
                Err(invalid("sweep", "state counts must be powers of two between 2 and 65536"))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub scenario: Scenario,
    pub sweep: Sweep,
    pub baseline: Baseline,
    pub trials: usize,
    pub rng_seed: u64,
    pub levels: Vec<Level>,
    /// Keep-out distance from the walls for the random person positions.
    pub wall_margin: f64,
    /// Put the person here in every trial instead of drawing a position.
    pub position: Option<(f64, f64)>,
}

impl ExperimentSpec {
    pub const DEFAULT_TRIALS: usize = 100;

    pub fn new(scenario: Scenario, sweep: Sweep, baseline: Baseline) -> Self {
        let rng_seed = scenario.rng_seed;
        Self {
            scenario,
            sweep,
            baseline,
            trials: Self::DEFAULT_TRIALS,
            rng_seed,
            levels: default_levels(),
            wall_margin: 0.5,
            position: None,
        }
    }

    pub fn with_trials(mut self, trials: usize) -> Self {
        self.trials = trials;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.rng_seed = seed;
        self
    }

    pub fn at(mut self, x: f64, y: f64) -> Self {
        self.position = Some((x, y));
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub truth: (f64, f64),
    pub estimate: (f64, f64),
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub label: String,
    pub mean_error: f64,
    pub trials: Vec<Trial>,
}

impl SweepPoint {
    pub fn trial_count(&self) -> usize {
        self.trials.len()
    }

    pub fn std_error(&self) -> f64 {
        let n = self.trials.len() as f64;
        if n < 2.0 {
            return f64::INFINITY;
        }
        let var = self.trials.iter().map(|t| (t.error - self.mean_error).powi(2)).sum::<f64>() / (n - 1.0);
        (var / n).sqrt()
    }

    /// Normal-approximation 95% interval of the mean.
    pub fn ci95(&self) -> (f64, f64) {
        let h = 1.96 * self.std_error();
        (self.mean_error - h, self.mean_error + h)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RmseReport {
    pub axis: String,
    pub baseline: Baseline,
    pub points: Vec<SweepPoint>,
}

impl RmseReport {
    /// Rows `sweep_value,mean_error_m,trial_count`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["sweep_value", "mean_error_m", "trial_count"])?;
        for p in &self.points {
            wr.write_record([p.label.clone(), format!("{:?}", p.mean_error), p.trial_count().to_string()])?;
        }
        wr.flush()?;
        Ok(())
    }

    /// One row per trial.
    pub fn write_trials_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["sweep_value", "trial", "truth_x", "truth_y", "est_x", "est_y", "error_m"])?;
        for p in &self.points {
            for (i, t) in p.trials.iter().enumerate() {
                wr.write_record([
                    p.label.clone(),
                    i.to_string(),
                    format!("{:?}", t.truth.0),
                    format!("{:?}", t.truth.1),
                    format!("{:?}", t.estimate.0),
                    format!("{:?}", t.estimate.1),
                    format!("{:?}", t.error),
                ])?;
            }
        }
        wr.flush()?;
        Ok(())
    }
}

/// Uniform person position for `trial`, the same for every sweep point.
pub fn trial_position(s: &Scenario, seed: u64, trial: u64, margin: f64) -> (f64, f64) {
    let mut rng = stream(seed, &[domain::TRIAL, trial]);
    (rng.gen_range(margin..s.room.dx - margin), rng.gen_range(margin..s.room.dy - margin))
}

fn single_trial(s: &Scenario, model: &ChannelModel, baseline: Baseline, levels: &[Level], seed: u64, trial: u64) -> Result<(f64, f64)> {
    let (before, after) = scenario_frame_pairs(s, 0.0, trial);
    let src = SimulatedSource::new(model.clone(), &before, &after)?.with_noise(seed, trial);
    let bits = s.irs.bits;
    let m = s.element_count();
    let focused = FocusedPatterns { model, bits: Some(bits) };
    let zeros = FixedPattern(PhasePattern::zeros(m));
    let random = RandomPatterns { seed, trial, element_count: m, bits };
    let patterns: &dyn PatternProvider = match baseline {
        Baseline::Proposed | Baseline::OneRxAntenna | Baseline::NoCancellation => &focused,
        Baseline::WithoutIrs => &zeros,
        Baseline::RandomIrs => &random,
    };
    Ok(locate_single(&src, s, levels, patterns)?.estimate)
}

/// Run every trial of every sweep point. Trials run in parallel; their random
/// streams depend only on `(rng_seed, trial)`, so the report does not depend on
/// the thread count.
pub fn run_experiment(e: &ExperimentSpec) -> Result<RmseReport> {
    if e.trials == 0 {
        return Err(invalid("trials", "must be at least 1"));
    }
    e.sweep.validate()?;
    let margin = e.wall_margin;
    if !(margin >= 0.0 && 2.0 * margin < e.scenario.room.dx.min(e.scenario.room.dy)) {
        return Err(invalid("wall_margin", "leaves no room for the person"));
    }
    if let Some((x, y)) = e.position {
        if !e.scenario.room.contains_xy(x, y) {
            return Err(Error::OutsideRoom { x, y });
        }
    }
    let mut points = Vec::with_capacity(e.sweep.len());
    for i in 0..e.sweep.len() {
        let mut s = e.sweep.apply(i, &e.scenario);
        if e.baseline == Baseline::OneRxAntenna {
            s = s.with_rx_count(1);
        }
        s.rng_seed = e.rng_seed;
        s.validate()?;
        let mut model = ChannelModel::new(&s)?;
        if e.baseline == Baseline::WithoutIrs {
            model = model.without_irs();
        }
        let trials = (0..e.trials as u64)
            .into_par_iter()
            .map(|t| {
                let truth = e.position.unwrap_or_else(|| trial_position(&s, e.rng_seed, t, margin));
                let mut st = s.clone();
                st.persons = vec![Trajectory::stationary(Vec3::floor(truth.0, truth.1))];
                let estimate = single_trial(&st, &model, e.baseline, &e.levels, e.rng_seed, t)?;
                Ok(Trial { truth, estimate, error: (estimate.0 - truth.0).hypot(estimate.1 - truth.1) })
            })
            .collect::<Result<Vec<_>>>()?;
        let est: Vec<(f64, f64)> = trials.iter().map(|t| t.estimate).collect();
        let tru: Vec<(f64, f64)> = trials.iter().map(|t| t.truth).collect();
        points.push(SweepPoint { label: e.sweep.label(i), mean_error: rmse(&est, &tru)?, trials });
    }
    Ok(RmseReport { axis: e.sweep.axis().to_string(), baseline: e.baseline, points })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pipeline {
    Single,
    Multi,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackOptions {
    pub frames: usize,
    pub pipeline: Pipeline,
    pub noise: bool,
    pub levels: Vec<Level>,
    /// Used by the multi-person pipeline; `max_persons` is set to the number
    /// of people in the scene.
    pub multi: MultiOptions,
}

impl TrackOptions {
    pub fn new(s: &Scenario, frames: usize, pipeline: Pipeline) -> Self {
        Self { frames, pipeline, noise: true, levels: default_levels(), multi: MultiOptions::for_scenario(s) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackFrame {
    pub frame: usize,
    pub t: f64,
    pub truths: Vec<(f64, f64)>,
    /// Estimate matched to each person, if any detection was left for them.
    pub estimates: Vec<Option<(f64, f64)>>,
}

impl TrackFrame {
    pub fn errors(&self) -> Vec<Option<f64>> {
        self.truths.iter().zip(&self.estimates).map(|(t, e)| e.map(|e| (e.0 - t.0).hypot(e.1 - t.1))).collect()
    }
}

/// Greedy nearest matching of detections to truths, closest pairs first.
pub fn associate(truths: &[(f64, f64)], detections: &[(f64, f64)]) -> Vec<Option<(f64, f64)>> {
    let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
    for (i, t) in truths.iter().enumerate() {
        for (j, d) in detections.iter().enumerate() {
            pairs.push(((t.0 - d.0).hypot(t.1 - d.1), i, j));
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut out = vec![None; truths.len()];
    let mut used = vec![false; detections.len()];
    for (_, i, j) in pairs {
        if out[i].is_none() && !used[j] {
            out[i] = Some(detections[j]);
            used[j] = true;
        }
    }
    out
}

/// Localize every person independently in each of `frames` evenly spaced
/// frames between the first and last waypoint times. No temporal filtering.
pub fn track(s: &Scenario, opts: &TrackOptions) -> Result<Vec<TrackFrame>> {
    if s.persons.is_empty() {
        return Err(invalid("persons", "nothing to track"));
    }
    if s.persons.iter().any(|p| p.waypoints.len() < 2) {
        return Err(invalid("persons", "every trajectory needs at least two waypoints"));
    }
    if opts.frames == 0 {
        return Err(invalid("frames", "must be at least 1"));
    }
    s.validate()?;
    let t0 = s.persons.iter().map(|p| p.waypoints[0].t).fold(f64::INFINITY, f64::min);
    let t1 = s.persons.iter().map(|p| p.waypoints[p.waypoints.len() - 1].t).fold(f64::NEG_INFINITY, f64::max);
    let model = ChannelModel::new(s)?;
    let cache = PatternCache::new();
    let focused = FocusedPatterns { model: &model, bits: Some(s.irs.bits) };
    (0..opts.frames)
        .map(|k| {
            let t = if opts.frames == 1 { t0 } else { t0 + (t1 - t0) * k as f64 / (opts.frames - 1) as f64 };
            // headings only matter for people standing still; keep them fixed across frames
            let (before, after) = scenario_frame_pairs(s, t, u64::MAX);
            let mut src = SimulatedSource::new(model.clone(), &before, &after)?;
            if opts.noise {
                src = src.with_noise(s.rng_seed, domain::TRACK << 32 | k as u64);
            }
            let truths: Vec<(f64, f64)> = after.iter().map(|p| (p.x, p.y)).collect();
            let detections = match opts.pipeline {
                Pipeline::Single => vec![locate_single(&src, s, &opts.levels, &focused)?.estimate],
                Pipeline::Multi => {
                    let mo = MultiOptions { max_persons: s.persons.len(), levels: opts.levels.clone(), ..opts.multi.clone() };
                    locate_multi(&src, s, &model, &mo, Some(&cache))?.detections.positions()
                }
            };
            Ok(TrackFrame { frame: k, t, estimates: associate(&truths, &detections), truths })
        })
        .collect()
}

/// Rows `frame,truth_x,truth_y,est_x,est_y,person`; missing estimates are empty.
pub fn write_track_csv<W: Write>(frames: &[TrackFrame], w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["frame", "truth_x", "truth_y", "est_x", "est_y", "person"])?;
    for f in frames {
        for (i, (t, e)) in f.truths.iter().zip(&f.estimates).enumerate() {
            let (ex, ey) = match e {
                Some(e) => (format!("{:?}", e.0), format!("{:?}", e.1)),
                None => (String::new(), String::new()),
            };
            wr.write_record([f.frame.to_string(), format!("{:?}", t.0), format!("{:?}", t.1), ex, ey, i.to_string()])?;
        }
    }
    wr.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternComparison {
    pub focus: (f64, f64),
    pub interference: (f64, f64),
    /// `None` for continuous phases.
    pub bits: Option<u32>,
    pub no_cancellation: BeamPatternMap,
    pub proposed: BeamPatternMap,
    pub perturbation: Perturbation,
    /// Drop of the response at the interference point, in dB.
    pub suppression_db: f64,
    /// Change of the response at the focus, in dB (negative is a loss).
    pub focus_change_db: f64,
}

/// Beam patterns steered at `focus` without and with a null toward
/// `interference`, on `grid`. `bits` overrides the scenario's phase resolution;
/// `Some(None)` keeps continuous phases.
pub fn compare_patterns(
    s: &Scenario,
    focus: (f64, f64),
    interference: (f64, f64),
    grid: &Grid,
    phi_max: f64,
    bits: Option<Option<u32>>,
) -> Result<PatternComparison> {
    for &(x, y) in &[focus, interference] {
        if !s.room.contains_xy(x, y) {
            return Err(Error::OutsideRoom { x, y });
        }
    }
    if (focus.0 - interference.0).hypot(focus.1 - interference.1) < 1e-9 {
        return Err(Error::Degenerate("focus and interference coincide".into()));
    }
    let bits = bits.unwrap_or(Some(s.irs.bits));
    let model = ChannelModel::new(s)?;
    let q0 = optimal_phases_for(&model, focus.0, focus.1);
    let w = steering_weights(s, focus.0, focus.1)?;
    let interferer = model.reflector(Vec3::floor(interference.0, interference.1))?;
    let problem = build_problem_from_paths(std::slice::from_ref(&interferer), &q0, &w, phi_max)?;
    let d = solve_null(&problem)?;
    let (plain, nulled) = match bits {
        Some(b) => (quantize(&q0, b), apply_perturbation(&q0, &d, b)?),
        None => (q0.clone(), apply_perturbation_continuous(&q0, &d)?),
    };
    let at = |p: &PhasePattern, pt: (f64, f64)| beam_response(&model, &p.phasors(), &w, Vec3::floor(pt.0, pt.1));
    let suppression_db = 20.0 * (at(&plain, interference)? / at(&nulled, interference)?).log10();
    let focus_change_db = 20.0 * (at(&nulled, focus)? / at(&plain, focus)?).log10();
    Ok(PatternComparison {
        focus,
        interference,
        bits,
        no_cancellation: beam_pattern(s, &plain, &w, grid)?,
        proposed: beam_pattern(s, &nulled, &w, grid)?,
        perturbation: d,
        suppression_db,
        focus_change_db,
    })
}
