//! Scene geometry and scenario configuration.
//!
//! Every position is in meters in a room-fixed Cartesian frame whose origin is
//! a floor corner. Persons move on the floor plane (`z = 0`).

use std::ops::{Add, Mul, Sub};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// A point or direction in the room frame.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    /// Point on the floor plane.
    pub const fn floor(x: f64, y: f64) -> Self {
        Self { x, y, z: 0.0 }
    }

    pub fn dot(self, other: Vec3) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

impl From<[f64; 3]> for Vec3 {
    fn from(v: [f64; 3]) -> Self {
        Vec3::new(v[0], v[1], v[2])
    }
}

impl From<Vec3> for [f64; 3] {
    fn from(v: Vec3) -> Self {
        [v.x, v.y, v.z]
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, k: f64) -> Vec3 {
        Vec3::new(self.x * k, self.y * k, self.z * k)
    }
}

/// Euclidean distance between two points.
pub fn distance(a: Vec3, b: Vec3) -> f64 {
    (a - b).norm()
}

/// Room extent `(dx, dy, dz)`; the room spans `[0, dx] x [0, dy] x [0, dz]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct Room {
    pub dx: f64,
    pub dy: f64,
    pub dz: f64,
}

impl Room {
    pub fn contains(&self, p: Vec3) -> bool {
        (0.0..=self.dx).contains(&p.x) && (0.0..=self.dy).contains(&p.y) && (0.0..=self.dz).contains(&p.z)
    }

    /// True when `(x, y)` lies on the floor rectangle.
    pub fn contains_xy(&self, x: f64, y: f64) -> bool {
        (0.0..=self.dx).contains(&x) && (0.0..=self.dy).contains(&y)
    }
}

impl From<[f64; 3]> for Room {
    fn from(v: [f64; 3]) -> Self {
        Room { dx: v[0], dy: v[1], dz: v[2] }
    }
}

impl From<Room> for [f64; 3] {
    fn from(r: Room) -> Self {
        [r.dx, r.dy, r.dz]
    }
}

fn default_row_axis() -> Vec3 {
    Vec3::new(1.0, 0.0, 0.0)
}

fn default_col_axis() -> Vec3 {
    Vec3::new(0.0, 1.0, 0.0)
}

/// Uniform rectangular IRS array.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IrsGeometry {
    pub center: Vec3,
    pub rows: usize,
    pub cols: usize,
    #[serde(rename = "spacing_m")]
    pub spacing: f64,
    /// Phase-control resolution; each element has `2^bits` states.
    pub bits: u32,
    /// Direction along which the row index grows.
    #[serde(default = "default_row_axis")]
    pub row_axis: Vec3,
    /// Direction along which the column index grows.
    #[serde(default = "default_col_axis")]
    pub col_axis: Vec3,
}

impl IrsGeometry {
    /// Array parallel to the floor with rows along +x and columns along +y.
    pub fn horizontal(center: Vec3, rows: usize, cols: usize, spacing: f64, bits: u32) -> Self {
        Self { center, rows, cols, spacing, bits, row_axis: default_row_axis(), col_axis: default_col_axis() }
    }

    pub fn element_count(&self) -> usize {
        self.rows * self.cols
    }

    /// Number of phase states per element.
    pub fn states(&self) -> u32 {
        1 << self.bits
    }

    pub fn validate(&self) -> Result<()> {
        if self.rows == 0 || self.cols == 0 {
            return Err(invalid("irs.rows/cols", "must be positive"));
        }
        if !(self.spacing > 0.0 && self.spacing.is_finite()) {
            return Err(invalid("irs.spacing_m", "must be positive"));
        }
        if self.bits == 0 || self.bits > 16 {
            return Err(invalid("irs.bits", "must be in 1..=16"));
        }
        if !self.center.is_finite() {
            return Err(invalid("irs.center", "must be finite"));
        }
        for (name, axis) in [("irs.row_axis", self.row_axis), ("irs.col_axis", self.col_axis)] {
            if (axis.norm() - 1.0).abs() > 1e-9 {
                return Err(invalid(name, "must be a unit vector"));
            }
        }
        if self.row_axis.dot(self.col_axis).abs() > 1e-9 {
            return Err(invalid("irs.row_axis", "must be orthogonal to col_axis"));
        }
        Ok(())
    }
}

/// Element positions in row-major order (`index = row * cols + col`).
pub fn irs_element_positions(g: &IrsGeometry) -> Vec<Vec3> {
    let r0 = (g.rows as f64 - 1.0) / 2.0;
    let c0 = (g.cols as f64 - 1.0) / 2.0;
    let mut out = Vec::with_capacity(g.element_count());
    for r in 0..g.rows {
        for c in 0..g.cols {
            let dr = (r as f64 - r0) * g.spacing;
            let dc = (c as f64 - c0) * g.spacing;
            out.push(g.center + g.row_axis * dr + g.col_axis * dc);
        }
    }
    out
}

/// Log-distance path loss parameters; `rho0_db` is the loss at 1 m.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathLossParams {
    pub rho0_db: f64,
    pub alpha_to: f64,
    pub alpha_ti: f64,
    pub alpha_io: f64,
    pub alpha_or: f64,
}

impl Default for PathLossParams {
    fn default() -> Self {
        Self { rho0_db: -20.0, alpha_to: 3.6, alpha_ti: 2.2, alpha_io: 2.2, alpha_or: 3.6 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Waypoint {
    pub t: f64,
    pub pos: Vec3,
}

fn default_step() -> f64 {
    0.1
}

/// Piecewise-linear floor trajectory of one person.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub waypoints: Vec<Waypoint>,
    /// Displacement between the two frames of a measurement pair.
    #[serde(rename = "inter_frame_step_m", default = "default_step")]
    pub inter_frame_step: f64,
}

impl Trajectory {
    pub fn stationary(pos: Vec3) -> Self {
        Self { waypoints: vec![Waypoint { t: 0.0, pos }], inter_frame_step: default_step() }
    }

    /// Straight walk from `a` to `b` over `duration` seconds.
    pub fn line(a: Vec3, b: Vec3, duration: f64) -> Self {
        Self { waypoints: vec![Waypoint { t: 0.0, pos: a }, Waypoint { t: duration, pos: b }], inter_frame_step: default_step() }
    }

    pub fn start(&self) -> Vec3 {
        self.waypoints[0].pos
    }

    /// Linear interpolation, clamped to the first/last waypoint.
    pub fn position_at(&self, t: f64) -> Vec3 {
        let w = &self.waypoints;
        if t <= w[0].t {
            return w[0].pos;
        }
        for pair in w.windows(2) {
            let (a, b) = (pair[0], pair[1]);
            if t <= b.t {
                let f = (t - a.t) / (b.t - a.t);
                return a.pos + (b.pos - a.pos) * f;
            }
        }
        w[w.len() - 1].pos
    }

    /// Total path length.
    pub fn length(&self) -> f64 {
        self.waypoints.windows(2).map(|p| distance(p[0].pos, p[1].pos)).sum()
    }

    /// Distance walked by time `t`.
    pub fn arc_length_at(&self, t: f64) -> f64 {
        let w = &self.waypoints;
        let mut acc = 0.0;
        for pair in w.windows(2) {
            let (a, b) = (pair[0], pair[1]);
            let seg = distance(a.pos, b.pos);
            if t <= a.t {
                break;
            }
            if t < b.t {
                return acc + seg * (t - a.t) / (b.t - a.t);
            }
            acc += seg;
        }
        acc
    }

    /// Time at which the walker has covered `s` meters (clamped).
    pub fn time_at_arc_length(&self, s: f64) -> f64 {
        let w = &self.waypoints;
        let mut acc = 0.0;
        for pair in w.windows(2) {
            let seg = distance(pair[0].pos, pair[1].pos);
            if acc + seg >= s && seg > 0.0 {
                let f = (s - acc) / seg;
                return pair[0].t + f * (pair[1].t - pair[0].t);
            }
            acc += seg;
        }
        w[w.len() - 1].t
    }

    pub fn validate(&self, room: &Room, field: &str) -> Result<()> {
        if self.waypoints.is_empty() {
            return Err(invalid(format!("{field}.waypoints"), "must not be empty"));
        }
        if !(self.inter_frame_step > 0.0 && self.inter_frame_step.is_finite()) {
            return Err(invalid(format!("{field}.inter_frame_step_m"), "must be positive"));
        }
        for (i, wp) in self.waypoints.iter().enumerate() {
            let f = format!("{field}.waypoints[{i}]");
            if !wp.t.is_finite() || !wp.pos.is_finite() {
                return Err(invalid(f, "must be finite"));
            }
            if wp.pos.z != 0.0 {
                return Err(invalid(f, "persons move on the floor (z must be 0)"));
            }
            if !room.contains(wp.pos) {
                return Err(invalid(f, "position outside the room"));
            }
        }
        if self.waypoints.windows(2).any(|p| p[1].t <= p[0].t) {
            return Err(invalid(format!("{field}.waypoints"), "times must be strictly increasing"));
        }
        Ok(())
    }
}

/// Full experiment description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub room: Room,
    pub tx: Vec3,
    pub rx_antennas: Vec<Vec3>,
    pub irs: IrsGeometry,
    #[serde(default)]
    pub static_reflectors: Vec<Vec3>,
    #[serde(default)]
    pub persons: Vec<Trajectory>,
    #[serde(rename = "frequency_hz")]
    pub frequency: f64,
    pub tx_power_dbm: f64,
    pub noise_power_dbm: f64,
    #[serde(default)]
    pub path_loss: PathLossParams,
    #[serde(default)]
    pub rng_seed: u64,
}

/// Spacing of the receive array and of the IRS lattice in the reference setup.
pub const REFERENCE_SPACING: f64 = 0.062;

impl Scenario {
    /// The 6 x 6 x 3.5 m reference room: 9 x 9 four-state IRS on the ceiling,
    /// three receive antennas in the (6, 0, 0) corner, two static reflectors and
    /// one person at (3.5, 3.5).
    pub fn reference() -> Self {
        Scenario {
            room: Room { dx: 6.0, dy: 6.0, dz: 3.5 },
            tx: Vec3::new(3.0, 3.0, 3.0),
            rx_antennas: rx_line(3),
            irs: IrsGeometry::horizontal(Vec3::new(3.0, 3.0, 3.5), 9, 9, REFERENCE_SPACING, 2),
            static_reflectors: vec![Vec3::floor(2.0, 2.0), Vec3::floor(3.0, 5.5)],
            persons: vec![Trajectory::stationary(Vec3::floor(3.5, 3.5))],
            frequency: 2.4e9,
            tx_power_dbm: 15.0,
            noise_power_dbm: -80.0,
            path_loss: PathLossParams::default(),
            rng_seed: 0,
        }
    }

    /// The three-person variant: 11 x 11 eight-state IRS.
    pub fn reference_three_person() -> Self {
        let mut s = Self::reference();
        s.irs.rows = 11;
        s.irs.cols = 11;
        s.irs.bits = 3;
        s.persons = [(4.1, 2.0), (2.0, 4.0), (4.0, 4.5)].iter().map(|&(x, y)| Trajectory::stationary(Vec3::floor(x, y))).collect();
        s
    }

    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.frequency
    }

    pub fn tx_power_watts(&self) -> f64 {
        dbm_to_watts(self.tx_power_dbm)
    }

    pub fn noise_power_watts(&self) -> f64 {
        dbm_to_watts(self.noise_power_dbm)
    }

    pub fn element_count(&self) -> usize {
        self.irs.element_count()
    }

    pub fn with_tx_power(mut self, dbm: f64) -> Self {
        self.tx_power_dbm = dbm;
        self
    }

    pub fn with_irs_dims(mut self, rows: usize, cols: usize) -> Self {
        self.irs.rows = rows;
        self.irs.cols = cols;
        self
    }

    pub fn with_bits(mut self, bits: u32) -> Self {
        self.irs.bits = bits;
        self
    }

    /// Keep only the first `n` receive antennas.
    pub fn with_rx_count(mut self, n: usize) -> Self {
        self.rx_antennas.truncate(n);
        self
    }

    pub fn validate(&self) -> Result<()> {
        let r = &self.room;
        if !(r.dx > 0.0 && r.dy > 0.0 && r.dz > 0.0) || !(r.dx.is_finite() && r.dy.is_finite() && r.dz.is_finite()) {
            return Err(invalid("room", "extents must be positive and finite"));
        }
        if !(self.frequency > 0.0 && self.frequency.is_finite()) {
            return Err(invalid("frequency_hz", "must be positive"));
        }
        if !self.tx_power_dbm.is_finite() {
            return Err(invalid("tx_power_dbm", "must be finite"));
        }
        if !self.noise_power_dbm.is_finite() {
            return Err(invalid("noise_power_dbm", "must be finite"));
        }
        if !self.room.contains(self.tx) {
            return Err(invalid("tx", "position outside the room"));
        }
        if self.rx_antennas.is_empty() {
            return Err(invalid("rx_antennas", "at least one antenna is required"));
        }
        for (i, a) in self.rx_antennas.iter().enumerate() {
            if !self.room.contains(*a) {
                return Err(invalid(format!("rx_antennas[{i}]"), "position outside the room"));
            }
        }
        self.irs.validate()?;
        for (i, e) in irs_element_positions(&self.irs).iter().enumerate() {
            if !self.room.contains(*e) {
                return Err(invalid(format!("irs.element[{i}]"), "element outside the room"));
            }
        }
        for (i, p) in self.static_reflectors.iter().enumerate() {
            if !self.room.contains(*p) {
                return Err(invalid(format!("static_reflectors[{i}]"), "position outside the room"));
            }
        }
        for (i, t) in self.persons.iter().enumerate() {
            t.validate(&self.room, &format!("persons[{i}]"))?;
        }
        let pl = &self.path_loss;
        for (name, a) in [
            ("path_loss.alpha_to", pl.alpha_to),
            ("path_loss.alpha_ti", pl.alpha_ti),
            ("path_loss.alpha_io", pl.alpha_io),
            ("path_loss.alpha_or", pl.alpha_or),
        ] {
            if !(a >= 0.0 && a.is_finite()) {
                return Err(invalid(name, "exponent must be non-negative"));
            }
        }
        if !pl.rho0_db.is_finite() {
            return Err(invalid("path_loss.rho0_db", "must be finite"));
        }
        Ok(())
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let sc: Scenario = serde_json::from_str(s)?;
        sc.validate()?;
        Ok(sc)
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Receive antennas along -x from the (6, 0, 0) corner, so the whole array
/// stays inside the reference room.
pub fn rx_line(n: usize) -> Vec<Vec3> {
    (0..n).map(|i| Vec3::new(6.0 - REFERENCE_SPACING * i as f64, 0.0, 0.0)).collect()
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0) * 1e-3
}

/// Read and validate a scenario file.
pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario> {
    let text = std::fs::read_to_string(path)?;
    Scenario::from_json_str(&text)
}

pub fn save_scenario(s: &Scenario, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, s.to_json_string()?)?;
    Ok(())
}
