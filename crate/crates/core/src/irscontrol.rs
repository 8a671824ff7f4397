//! IRS phase control: focusing phases, quantization, codebooks and beam patterns.

use std::f64::consts::PI;
use std::io::{BufRead, Write};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::beamform::{combine, BeamWeights};
use crate::channel::{ChannelModel, PhasePattern};
use crate::error::{invalid, Error, Result};
use crate::grid::Grid;
use crate::scene::{distance, Scenario, Vec3};

const TAU: f64 = 2.0 * PI;

/// Phases that bring every Tx-IRS-focus path into phase with the direct
/// Tx-focus path.
pub fn optimal_phases(s: &Scenario, x: f64, y: f64) -> Result<PhasePattern> {
    if !s.room.contains_xy(x, y) {
        return Err(Error::OutsideRoom { x, y });
    }
    let model = ChannelModel::new(s)?;
    Ok(optimal_phases_for(&model, x, y))
}

/// As [`optimal_phases`], reusing a prebuilt channel model.
pub fn optimal_phases_for(model: &ChannelModel, x: f64, y: f64) -> PhasePattern {
    let focus = Vec3::floor(x, y);
    let d_to = distance(model.tx, focus);
    let phases = model
        .elements
        .iter()
        .map(|e| (TAU * (distance(*e, focus) + distance(model.tx, *e) - d_to) / model.lambda).rem_euclid(TAU))
        .map(|p| if p >= TAU { 0.0 } else { p })
        .collect();
    PhasePattern::continuous(phases)
}

/// Codeword index of each phase: nearest of `2^bits` states by circular
/// distance, ties to the smaller index.
pub fn codewords(p: &PhasePattern, bits: u32) -> Vec<u32> {
    let levels = 1u64 << bits;
    let step = TAU / levels as f64;
    p.phases
        .iter()
        .map(|&phi| {
            let x = phi.rem_euclid(TAU) / step;
            let lo = x.floor();
            let frac = x - lo;
            let lo = lo as u64 % levels;
            let k = if frac > 0.5 {
                (lo + 1) % levels
            } else if frac == 0.5 && lo == levels - 1 {
                0
            } else {
                lo
            };
            k as u32
        })
        .collect()
}

pub fn from_codewords(codes: &[u32], bits: u32) -> PhasePattern {
    let step = TAU / (1u64 << bits) as f64;
    PhasePattern { phases: codes.iter().map(|&k| k as f64 * step).collect(), bits: Some(bits) }
}

/// Map every phase to the nearest of `2^bits` uniformly spaced states.
pub fn quantize(p: &PhasePattern, bits: u32) -> PhasePattern {
    from_codewords(&codewords(p, bits), bits)
}

/// `|h_TO + sum_m h_IO[m] h_TI[m] exp(j phi_m)|` for a reflector at `obj`.
pub fn p2_objective(model: &ChannelModel, obj: Vec3, p: &PhasePattern) -> Result<f64> {
    p.check_len(model.element_count())?;
    let r = model.reflector(obj)?;
    Ok((r.h_to + r.irs_sum(&p.phasors())).norm())
}

/// Per-cell quantized focusing patterns for one grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    pub grid: Grid,
    pub bits: u32,
    pub element_count: usize,
    /// Codeword indices, `entries[cell][element]`.
    pub entries: Vec<Vec<u32>>,
    /// Detected positions (rounded) the patterns were nulled against, if any.
    pub null_key: Option<Vec<(f64, f64)>>,
}

impl Codebook {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn pattern(&self, cell: usize) -> PhasePattern {
        from_codewords(&self.entries[cell], self.bits)
    }

    /// Text form: a header line
    /// `level origin_x origin_y cell_size rows cols M B`, an optional
    /// `null x y ...` line, then `cell c_0 ... c_{M-1}` per cell.
    pub fn write<W: Write>(&self, mut w: W) -> Result<()> {
        let g = &self.grid;
        writeln!(
            w,
            "{} {:?} {:?} {:?} {} {} {} {}",
            g.level, g.origin.0, g.origin.1, g.cell, g.rows, g.cols, self.element_count, self.bits
        )?;
        if let Some(key) = &self.null_key {
            write!(w, "null")?;
            for (x, y) in key {
                write!(w, " {x:?} {y:?}")?;
            }
            writeln!(w)?;
        }
        for (i, e) in self.entries.iter().enumerate() {
            write!(w, "{i}")?;
            for c in e {
                write!(w, " {c}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    pub fn read<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let header = lines.next().ok_or_else(|| invalid("codebook", "empty file"))??;
        let h: Vec<&str> = header.split_whitespace().collect();
        if h.len() != 8 {
            return Err(invalid("codebook.header", "expected 8 fields"));
        }
        let f = |i: usize| h[i].parse::<f64>().map_err(|e| invalid("codebook.header", e.to_string()));
        let u = |i: usize| h[i].parse::<usize>().map_err(|e| invalid("codebook.header", e.to_string()));
        let grid = Grid::new((f(1)?, f(2)?), f(3)?, u(4)?, u(5)?, u(0)? as u32)?;
        let element_count = u(6)?;
        let bits = u(7)? as u32;
        let mut null_key = None;
        let mut entries = Vec::with_capacity(grid.len());
        for line in lines {
            let line = line?;
            let mut it = line.split_whitespace();
            let Some(first) = it.next() else { continue };
            if first == "null" {
                let v = it.map(|t| t.parse::<f64>().map_err(|e| invalid("codebook.null", e.to_string()))).collect::<Result<Vec<_>>>()?;
                if v.len() % 2 != 0 {
                    return Err(invalid("codebook.null", "odd coordinate count"));
                }
                null_key = Some(v.chunks(2).map(|c| (c[0], c[1])).collect());
                continue;
            }
            let idx: usize = first.parse().map_err(|_| invalid("codebook.entry", "bad cell index"))?;
            if idx != entries.len() {
                return Err(invalid("codebook.entry", format!("cell {idx} out of order")));
            }
            let codes = it.map(|t| t.parse::<u32>().map_err(|e| invalid("codebook.entry", e.to_string()))).collect::<Result<Vec<_>>>()?;
            if codes.len() != element_count {
                return Err(Error::LengthMismatch { expected: element_count, got: codes.len() });
            }
            if codes.iter().any(|&c| u64::from(c) >= 1u64 << bits) {
                return Err(invalid("codebook.entry", "codeword out of range"));
            }
            entries.push(codes);
        }
        if entries.len() != grid.len() {
            return Err(Error::LengthMismatch { expected: grid.len(), got: entries.len() });
        }
        Ok(Codebook { grid, bits, element_count, entries, null_key })
    }
}

/// Quantized focusing pattern for every cell center of `grid`.
pub fn build_codebook(s: &Scenario, grid: &Grid) -> Result<Codebook> {
    let model = ChannelModel::new(s)?;
    let bits = s.irs.bits;
    let entries = (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let (x, y) = grid.center(i);
            codewords(&optimal_phases_for(&model, x, y), bits)
        })
        .collect();
    Ok(Codebook { grid: *grid, bits, element_count: model.element_count(), entries, null_key: None })
}

/// Response of a fixed pattern/weight pair over a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeamPatternMap {
    pub grid: Grid,
    /// Linear combined magnitude per cell.
    pub linear: Vec<f64>,
    /// `20 log10(linear / peak)` per cell.
    pub value_db: Vec<f64>,
}

impl BeamPatternMap {
    pub fn peak_index(&self) -> usize {
        argmax(&self.linear)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["x", "y", "value_db"])?;
        for (i, v) in self.value_db.iter().enumerate() {
            let (x, y) = self.grid.center(i);
            wr.write_record([format!("{x:?}"), format!("{y:?}"), format!("{v:?}")])?;
        }
        wr.flush()?;
        Ok(())
    }
}

/// First index of the maximum; NaN never wins.
pub(crate) fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// `|w . h_OR(p) (h_TO(p) + sum_m h_IO h_TI q_m)|` for a reflector at `p`.
pub fn beam_response(model: &ChannelModel, q: &[Complex64], w: &BeamWeights, p: Vec3) -> Result<f64> {
    let r = model.reflector(p)?;
    Ok(combine(w, &r.response(q))?.norm())
}

/// Noiseless single-reflector response over `grid`, normalized to its peak.
pub fn beam_pattern(s: &Scenario, p: &PhasePattern, w: &BeamWeights, grid: &Grid) -> Result<BeamPatternMap> {
    let model = ChannelModel::new(s)?;
    p.check_len(model.element_count())?;
    if w.len() != model.rx_count() {
        return Err(Error::LengthMismatch { expected: model.rx_count(), got: w.len() });
    }
    let q = p.phasors();
    let linear = (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let (x, y) = grid.center(i);
            beam_response(&model, &q, w, Vec3::floor(x, y))
        })
        .collect::<Result<Vec<_>>>()?;
    let peak = linear.iter().cloned().fold(0.0, f64::max);
    let value_db = linear.iter().map(|&v| if peak > 0.0 { 20.0 * (v / peak).log10() } else { 0.0 }).collect();
    Ok(BeamPatternMap { grid: *grid, linear, value_db })
}
