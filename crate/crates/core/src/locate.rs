//! Grid-scan localization: single-person multi-level search and the
//! multi-person loop that null-steers already detected people out of later scans.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::io::Write;
use std::sync::Mutex;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::beamform::{combine, steering_weights_unchecked, BeamWeights};
use crate::channel::{subtract, ChannelModel, PhasePattern, ReflectorPaths, Snapshot};
use crate::error::{invalid, Error, Result};
use crate::grid::Grid;
use crate::irscontrol::{argmax, optimal_phases_for, quantize, Codebook};
use crate::nullsteer::{apply_perturbation, build_problem_from_paths, solve_null, DEFAULT_PHI_MAX};
use crate::rng::{domain, stream};
use crate::scene::{distance, Scenario, Trajectory, Vec3};

/// Side of the square mask placed on every detected person.
pub const DEFAULT_MASK_SIDE: f64 = 0.5;
pub const DEFAULT_MAX_PERSONS: usize = 10;
pub const MIN_NOISE_TRIALS: usize = 30;

/// Amplitude per grid cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Heatmap {
    pub grid: Grid,
    pub amplitude: Vec<f64>,
}

impl Heatmap {
    /// Index of the largest cell; ties go to the smaller index.
    pub fn argmax(&self) -> usize {
        argmax(&self.amplitude)
    }

    pub fn max(&self) -> f64 {
        self.amplitude.iter().cloned().fold(0.0, f64::max)
    }

    pub fn peak(&self) -> (f64, f64) {
        self.grid.center(self.argmax())
    }

    /// Rows `x,y,amplitude`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["x", "y", "amplitude"])?;
        for (i, a) in self.amplitude.iter().enumerate() {
            let (x, y) = self.grid.center(i);
            wr.write_record([format!("{x:?}"), format!("{y:?}"), format!("{a:e}")])?;
        }
        wr.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub x: f64,
    pub y: f64,
    pub amplitude: f64,
    /// 1-based iteration of the multi-person loop that produced it.
    pub iteration: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    NoiseFloor,
    MaxPersons,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionSet {
    pub detections: Vec<Detection>,
    pub stop_reason: StopReason,
}

impl DetectionSet {
    pub fn positions(&self) -> Vec<(f64, f64)> {
        self.detections.iter().map(|d| (d.x, d.y)).collect()
    }

    /// JSON array of `{x, y, amplitude, iteration}`.
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.detections)?)
    }
}

/// Identifies one measurement within a run so that its noise draw is fixed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct MeasureKey {
    pub pass: u64,
    pub level: u32,
    pub cell: u64,
}

/// Something that can record two consecutive frames under a given IRS pattern.
pub trait MeasurementSource: Sync {
    fn measure(&self, key: MeasureKey, pattern: &PhasePattern) -> Result<(Snapshot, Snapshot)>;
}

/// Simulated frame pairs: the people are at `before` in the first frame and at
/// `after` in the second.
#[derive(Debug, Clone)]
pub struct SimulatedSource {
    pub model: ChannelModel,
    before: Vec<ReflectorPaths>,
    after: Vec<ReflectorPaths>,
    noise: Option<(u64, u64)>,
}

impl SimulatedSource {
    /// The two lists need not match: an empty `before` models people walking in.
    pub fn new(model: ChannelModel, before: &[Vec3], after: &[Vec3]) -> Result<Self> {
        let paths = |v: &[Vec3]| v.iter().map(|p| model.reflector(*p)).collect::<Result<Vec<_>>>();
        let (before, after) = (paths(before)?, paths(after)?);
        Ok(Self { model, before, after, noise: None })
    }

    /// Only static clutter and noise.
    pub fn empty(model: ChannelModel) -> Self {
        Self { model, before: vec![], after: vec![], noise: None }
    }

    /// Add receiver noise drawn from streams keyed by `(seed, trial, key)`.
    pub fn with_noise(mut self, seed: u64, trial: u64) -> Self {
        self.noise = Some((seed, trial));
        self
    }

    /// Frame pair for every person of `s` at time `t`; see [`frame_pair`].
    pub fn from_scenario(s: &Scenario, t: f64, trial: u64) -> Result<Self> {
        let (before, after) = scenario_frame_pairs(s, t, trial);
        Ok(Self::new(ChannelModel::new(s)?, &before, &after)?.with_noise(s.rng_seed, trial))
    }
}

impl MeasurementSource for SimulatedSource {
    fn measure(&self, key: MeasureKey, pattern: &PhasePattern) -> Result<(Snapshot, Snapshot)> {
        let frame = |persons: &[ReflectorPaths], f: u64| match self.noise {
            Some((seed, trial)) => {
                let mut rng = stream(seed, &[domain::NOISE, trial, key.pass, key.level as u64, key.cell, f]);
                self.model.snapshot(pattern, persons, Some(&mut rng), f)
            }
            None => self.model.snapshot(pattern, persons, None, f),
        };
        Ok((frame(&self.before, 0)?, frame(&self.after, 1)?))
    }
}

/// Positions one frame apart for a person following `traj`, ending at time `t`.
/// Where the trajectory does not move (stationary people, or right at the
/// start), the earlier frame is `inter_frame_step` back along `heading`.
pub fn frame_pair(traj: &Trajectory, t: f64, heading: f64) -> (Vec3, Vec3) {
    let now = traj.position_at(t);
    let walked = traj.arc_length_at(t);
    let back = traj.position_at(traj.time_at_arc_length(walked - traj.inter_frame_step));
    if walked >= traj.inter_frame_step && distance(back, now) > 0.0 {
        return (back, now);
    }
    let step = traj.inter_frame_step;
    (now - Vec3::new(step * heading.cos(), step * heading.sin(), 0.0), now)
}

/// Frame pairs for every person of `s`, with random headings keyed by the trial.
pub fn scenario_frame_pairs(s: &Scenario, t: f64, trial: u64) -> (Vec<Vec3>, Vec<Vec3>) {
    s.persons
        .iter()
        .enumerate()
        .map(|(i, traj)| {
            let heading = stream(s.rng_seed, &[domain::TRIAL, trial, i as u64]).gen_range(0.0..2.0 * PI);
            let (mut a, b) = frame_pair(traj, t, heading);
            if !s.room.contains(a) {
                a = b + (b - a);
            }
            (a, b)
        })
        .unzip()
}

/// IRS pattern to use when scanning a given cell.
pub trait PatternProvider: Sync {
    fn pattern(&self, grid: &Grid, cell: usize) -> Result<PhasePattern>;
}

/// Focusing phases for each cell center, optionally quantized.
pub struct FocusedPatterns<'a> {
    pub model: &'a ChannelModel,
    pub bits: Option<u32>,
}

impl PatternProvider for FocusedPatterns<'_> {
    fn pattern(&self, grid: &Grid, cell: usize) -> Result<PhasePattern> {
        let (x, y) = grid.center(cell);
        let p = optimal_phases_for(self.model, x, y);
        Ok(match self.bits {
            Some(b) => quantize(&p, b),
            None => p,
        })
    }
}

impl PatternProvider for Codebook {
    fn pattern(&self, grid: &Grid, cell: usize) -> Result<PhasePattern> {
        if *grid != self.grid {
            return Err(Error::GridMismatch(format!(
                "codebook built for a {}x{} grid at level {}, scan uses {}x{} at level {}",
                self.grid.rows, self.grid.cols, self.grid.level, grid.rows, grid.cols, grid.level
            )));
        }
        Ok(Codebook::pattern(self, cell))
    }
}

/// Independent uniformly random quantized pattern for every scanned cell.
pub struct RandomPatterns {
    pub seed: u64,
    pub trial: u64,
    pub element_count: usize,
    pub bits: u32,
}

impl PatternProvider for RandomPatterns {
    fn pattern(&self, grid: &Grid, cell: usize) -> Result<PhasePattern> {
        let mut rng = stream(self.seed, &[domain::RANDOM_PATTERN, self.trial, grid.level as u64, cell as u64]);
        let states = 1u32 << self.bits;
        let step = 2.0 * PI / states as f64;
        let phases = (0..self.element_count).map(|_| rng.gen_range(0..states) as f64 * step).collect();
        Ok(PhasePattern { phases, bits: Some(self.bits) })
    }
}

/// Same pattern everywhere.
pub struct FixedPattern(pub PhasePattern);

impl PatternProvider for FixedPattern {
    fn pattern(&self, _: &Grid, _: usize) -> Result<PhasePattern> {
        Ok(self.0.clone())
    }
}

/// Null-steered patterns keyed by grid, cell, and the detected set rounded to
/// [`CACHE_RESOLUTION`]. Only valid for one scenario.
#[derive(Debug, Default)]
pub struct PatternCache {
    map: Mutex<HashMap<CacheKey, PhasePattern>>,
}

pub const CACHE_RESOLUTION: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct CacheKey {
    grid: [u64; 5],
    cell: usize,
    detected: Vec<(i64, i64)>,
    phi_max: u64,
    bits: Option<u32>,
}

impl PatternCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.map.lock().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn round_key(v: f64) -> i64 {
    (v / CACHE_RESOLUTION).round() as i64
}

/// Focusing pattern of each cell perturbed to cancel the echo of the
/// detected people at that cell's focus, then quantized.
pub struct NullSteeredPatterns<'a> {
    model: &'a ChannelModel,
    detected: Vec<ReflectorPaths>,
    key: Vec<(i64, i64)>,
    phi_max: f64,
    bits: Option<u32>,
    cache: Option<&'a PatternCache>,
}

impl<'a> NullSteeredPatterns<'a> {
    /// Detected positions are snapped to the cache resolution before the
    /// channel toward them is modelled.
    pub fn new(
        model: &'a ChannelModel,
        detected: &[(f64, f64)],
        phi_max: f64,
        bits: Option<u32>,
        cache: Option<&'a PatternCache>,
    ) -> Result<Self> {
        if detected.is_empty() {
            return Err(Error::EmptyDetectedSet);
        }
        let key: Vec<(i64, i64)> = detected.iter().map(|&(x, y)| (round_key(x), round_key(y))).collect();
        let paths = key
            .iter()
            .map(|&(i, j)| model.reflector(Vec3::floor(i as f64 * CACHE_RESOLUTION, j as f64 * CACHE_RESOLUTION)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { model, detected: paths, key, phi_max, bits, cache })
    }

    fn compute(&self, x: f64, y: f64) -> Result<PhasePattern> {
        let q0 = optimal_phases_for(self.model, x, y);
        let w = steering_weights_unchecked(self.model.tx, &self.model.rx, self.model.lambda, x, y);
        let problem = build_problem_from_paths(&self.detected, &q0, &w, self.phi_max)?;
        let d = solve_null(&problem)?;
        match self.bits {
            Some(b) => apply_perturbation(&q0, &d, b),
            None => crate::nullsteer::apply_perturbation_continuous(&q0, &d),
        }
    }
}

impl PatternProvider for NullSteeredPatterns<'_> {
    fn pattern(&self, grid: &Grid, cell: usize) -> Result<PhasePattern> {
        let (x, y) = grid.center(cell);
        let Some(cache) = self.cache else { return self.compute(x, y) };
        let key = CacheKey {
            grid: [grid.origin.0.to_bits(), grid.origin.1.to_bits(), grid.cell.to_bits(), grid.rows as u64, grid.cols as u64],
            cell,
            detected: self.key.clone(),
            phi_max: self.phi_max.to_bits(),
            bits: self.bits,
        };
        if let Some(p) = cache.map.lock().expect("cache lock").get(&key) {
            return Ok(p.clone());
        }
        let p = self.compute(x, y)?;
        cache.map.lock().expect("cache lock").insert(key, p.clone());
        Ok(p)
    }
}

/// Steer at every cell of `grid`, measure a frame pair under that cell's
/// pattern, and record `|w . (s_t - s_{t-1})|`.
pub fn scan(src: &dyn MeasurementSource, s: &Scenario, grid: &Grid, patterns: &dyn PatternProvider, pass: u64) -> Result<Heatmap> {
    if !grid.inside(&s.room) {
        let (x, y) = grid.origin;
        return Err(Error::OutsideRoom { x, y });
    }
    let lambda = s.wavelength();
    let amplitude = (0..grid.len())
        .into_par_iter()
        .map(|k| {
            let (x, y) = grid.center(k);
            let w = steering_weights_unchecked(s.tx, &s.rx_antennas, lambda, x, y);
            let q = patterns.pattern(grid, k)?;
            let (a, b) = src.measure(MeasureKey { pass, level: grid.level, cell: k as u64 }, &q)?;
            if a.pattern_id != b.pattern_id {
                return Err(Error::PatternMismatch);
            }
            Ok(combine(&w, &subtract(&b, &a)?)?.norm())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Heatmap { grid: *grid, amplitude })
}

/// Scan resolution. The first level covers the whole room; each later one
/// is a `span`-wide window centered on the previous level's peak.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Level {
    pub cell: f64,
    pub span: f64,
}

/// 0.5 m over the room, 0.05 m over 1 m, 0.005 m over 0.1 m.
pub fn default_levels() -> Vec<Level> {
    vec![Level { cell: 0.5, span: 6.0 }, Level { cell: 0.05, span: 1.0 }, Level { cell: 0.005, span: 0.1 }]
}

#[derive(Debug, Clone, PartialEq)]
pub struct SingleResult {
    pub estimate: (f64, f64),
    /// Peak amplitude at the finest level reached.
    pub amplitude: f64,
    pub heatmaps: Vec<Heatmap>,
}

fn check_levels(levels: &[Level]) -> Result<()> {
    if levels.is_empty() {
        return Err(invalid("levels", "need at least one level"));
    }
    if levels.iter().any(|l| !(l.cell > 0.0 && l.span > 0.0)) {
        return Err(invalid("levels", "cell size and span must be positive"));
    }
    Ok(())
}

/// Refine from an already scanned (and possibly masked) coarse heatmap.
fn refine(
    src: &dyn MeasurementSource,
    s: &Scenario,
    coarse: Heatmap,
    levels: &[Level],
    patterns: &dyn PatternProvider,
    pass: u64,
    mask: Option<(&[(f64, f64)], f64)>,
) -> Result<SingleResult> {
    let mut estimate = coarse.peak();
    let mut amplitude = coarse.max();
    let mut heatmaps = vec![coarse];
    for (i, lvl) in levels.iter().enumerate() {
        let grid = Grid::window(&s.room, estimate, lvl.cell, lvl.span, i as u32 + 1)?;
        let mut h = scan(src, s, &grid, patterns, pass)?;
        if let Some((dets, side)) = mask {
            h = apply_mask(&h, dets, side);
        }
        if h.max() <= 0.0 {
            heatmaps.push(h);
            break;
        }
        estimate = h.peak();
        amplitude = h.max();
        heatmaps.push(h);
    }
    Ok(SingleResult { estimate, amplitude, heatmaps })
}

/// Coarse scan of the whole room followed by window refinement at each
/// later level; the estimate is the finest peak cell center.
pub fn locate_single(src: &dyn MeasurementSource, s: &Scenario, levels: &[Level], patterns: &dyn PatternProvider) -> Result<SingleResult> {
    check_levels(levels)?;
    let coarse = scan(src, s, &Grid::covering(&s.room, levels[0].cell, 0)?, patterns, 0)?;
    refine(src, s, coarse, &levels[1..], patterns, 0, None)
}

/// Zero every cell whose square overlaps the `side`-wide square around any
/// detection. With `side` equal to the cell size and the detection on a
/// cell center this is exactly that cell.
pub fn apply_mask(h: &Heatmap, detections: &[(f64, f64)], side: f64) -> Heatmap {
    let reach = side / 2.0 + h.grid.cell / 2.0;
    let amplitude = h
        .amplitude
        .iter()
        .enumerate()
        .map(|(k, &a)| {
            let (x, y) = h.grid.center(k);
            let hit = detections.iter().any(|&(dx, dy)| (x - dx).abs() < reach - 1e-12 && (y - dy).abs() < reach - 1e-12);
            if hit {
                0.0
            } else {
                a
            }
        })
        .collect();
    Heatmap { grid: h.grid, amplitude }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiOptions {
    pub phi_max: f64,
    pub mask_side: f64,
    pub noise_floor: f64,
    pub max_persons: usize,
    pub levels: Vec<Level>,
    /// When false later iterations keep the plain focusing patterns.
    pub null_steering: bool,
    /// Quantization of the scan patterns; `None` keeps continuous phases.
    pub bits: Option<u32>,
}

impl MultiOptions {
    /// Defaults with the scenario's phase resolution.
    pub fn for_scenario(s: &Scenario) -> Self {
        Self { bits: Some(s.irs.bits), ..Self::default() }
    }
}

impl Default for MultiOptions {
    fn default() -> Self {
        Self {
            phi_max: DEFAULT_PHI_MAX,
            mask_side: DEFAULT_MASK_SIDE,
            noise_floor: 0.0,
            max_persons: DEFAULT_MAX_PERSONS,
            levels: default_levels(),
            null_steering: true,
            bits: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultiResult {
    pub detections: DetectionSet,
    /// Masked coarse heatmap of every iteration, including the one that stopped.
    pub coarse: Vec<Heatmap>,
}

/// Repeated scans; each one cancels the people found so far, masks them,
/// and takes the strongest remaining cell. Stops below `noise_floor` or
/// after `max_persons` detections.
pub fn locate_multi(
    src: &dyn MeasurementSource,
    s: &Scenario,
    model: &ChannelModel,
    opts: &MultiOptions,
    cache: Option<&PatternCache>,
) -> Result<MultiResult> {
    check_levels(&opts.levels)?;
    if !(opts.mask_side > 0.0) {
        return Err(invalid("mask_side", "must be positive"));
    }
    let bits = opts.bits;
    let focused = FocusedPatterns { model, bits };
    let coarse_grid = Grid::covering(&s.room, opts.levels[0].cell, 0)?;
    let mut found: Vec<Detection> = Vec::new();
    let mut coarse_maps = Vec::new();
    let mut pass = 0u64;
    let stop_reason = loop {
        if found.len() >= opts.max_persons {
            break StopReason::MaxPersons;
        }
        let positions: Vec<(f64, f64)> = found.iter().map(|d| (d.x, d.y)).collect();
        let steered;
        let patterns: &dyn PatternProvider = if positions.is_empty() || !opts.null_steering {
            &focused
        } else {
            steered = NullSteeredPatterns::new(model, &positions, opts.phi_max, bits, cache)?;
            &steered
        };
        let mask = (!positions.is_empty()).then_some((positions.as_slice(), opts.mask_side));
        let mut coarse = scan(src, s, &coarse_grid, patterns, pass)?;
        if let Some((d, side)) = mask {
            coarse = apply_mask(&coarse, d, side);
        }
        let peak = coarse.max();
        coarse_maps.push(coarse.clone());
        if peak <= opts.noise_floor || peak <= 0.0 {
            break StopReason::NoiseFloor;
        }
        let r = refine(src, s, coarse, &opts.levels[1..], patterns, pass, mask)?;
        found.push(Detection { x: r.estimate.0, y: r.estimate.1, amplitude: r.amplitude, iteration: found.len() + 1 });
        pass += 1;
    };
    Ok(MultiResult { detections: DetectionSet { detections: found, stop_reason }, coarse: coarse_maps })
}

/// `mean + 3 std` of the combined amplitude over `trials` measurements of
/// `src` (expected to hold no people), each steered at a random floor point
/// with a random pattern.
pub fn noise_floor_estimate(src: &dyn MeasurementSource, s: &Scenario, trials: usize) -> Result<f64> {
    if trials < MIN_NOISE_TRIALS {
        return Err(Error::TooFewTrials { min: MIN_NOISE_TRIALS, got: trials });
    }
    let m = s.element_count();
    let lambda = s.wavelength();
    let amps = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = stream(s.rng_seed, &[domain::NOISE_FLOOR, t as u64]);
            let (x, y) = (rng.gen_range(0.0..s.room.dx), rng.gen_range(0.0..s.room.dy));
            let states = 1u32 << s.irs.bits;
            let phases = (0..m).map(|_| rng.gen_range(0..states) as f64 * 2.0 * PI / states as f64).collect();
            let q = PhasePattern { phases, bits: Some(s.irs.bits) };
            let w: BeamWeights = steering_weights_unchecked(s.tx, &s.rx_antennas, lambda, x, y);
            let (a, b) = src.measure(MeasureKey { pass: u64::MAX, level: 0, cell: t as u64 }, &q)?;
            Ok(combine(&w, &subtract(&b, &a)?)?.norm())
        })
        .collect::<Result<Vec<f64>>>()?;
    let n = amps.len() as f64;
    let mean = amps.iter().sum::<f64>() / n;
    let var = amps.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok(mean + 3.0 * var.sqrt())
}
