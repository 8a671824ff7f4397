//! Narrowband channel synthesis.
//!
//! All signals are complex envelopes. A propagation leg of length `d` with
//! exponent `alpha` contributes `sqrt(rho0 * d^-alpha) * exp(-j 2 pi d / lambda)`.
//! Reflectors (static clutter and persons) are ideal point scatterers with unit
//! coefficient, and IRS-reflector-IRS double bounces are not modeled.

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;
use rand::RngCore;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scene::{distance, irs_element_positions, PathLossParams, Scenario, Vec3};

const COINCIDENT_EPS: f64 = 1e-9;

/// Amplitude of one propagation leg, `sqrt(rho0 * (d / 1 m)^-alpha)`.
pub fn path_amplitude(d: f64, alpha: f64, rho0_db: f64) -> Result<f64> {
    if !(d > 0.0) {
        return Err(Error::NonPositiveDistance(d));
    }
    let rho0 = 10f64.powf(rho0_db / 10.0);
    Ok((rho0 * d.powf(-alpha)).sqrt())
}

fn leg(d: f64, alpha: f64, rho0_db: f64, lambda: f64) -> Result<Complex64> {
    let a = path_amplitude(d, alpha, rho0_db)?;
    Ok(Complex64::from_polar(a, -2.0 * PI * d / lambda))
}

/// IRS control word: one phase per element, optionally restricted to `2^bits`
/// uniformly spaced states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhasePattern {
    pub phases: Vec<f64>,
    /// `Some(B)` when every phase is a multiple of `2 pi / 2^B`.
    pub bits: Option<u32>,
}

impl PhasePattern {
    pub fn continuous(phases: Vec<f64>) -> Self {
        Self { phases, bits: None }
    }

    pub fn zeros(m: usize) -> Self {
        Self { phases: vec![0.0; m], bits: None }
    }

    pub fn len(&self) -> usize {
        self.phases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phases.is_empty()
    }

    pub fn is_quantized(&self) -> bool {
        self.bits.is_some()
    }

    /// `exp(j phi_m)` for every element.
    pub fn phasors(&self) -> Vec<Complex64> {
        self.phases.iter().map(|&p| Complex64::from_polar(1.0, p)).collect()
    }

    /// Content hash identifying the pattern.
    pub fn id(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let mut eat = |v: u64| {
            for b in v.to_le_bytes() {
                h ^= b as u64;
                h = h.wrapping_mul(0x0100_0000_01b3);
            }
        };
        eat(self.bits.map_or(u64::MAX, u64::from));
        eat(self.phases.len() as u64);
        for p in &self.phases {
            eat(p.to_bits());
        }
        h
    }

    pub fn check_len(&self, m: usize) -> Result<()> {
        if self.phases.len() != m {
            return Err(Error::LengthMismatch { expected: m, got: self.phases.len() });
        }
        Ok(())
    }
}

/// Received vector across antennas for one frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub values: Vec<Complex64>,
    pub pattern_id: u64,
    pub t: u64,
}

/// Contribution of one point reflector.
#[derive(Debug, Clone, PartialEq)]
pub struct ReflectorTerms {
    pub tor: Vec<Complex64>,
    pub tior: Vec<Complex64>,
}

/// Noiseless snapshot split by propagation path, already scaled by the
/// transmit amplitude.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelTerms {
    pub direct: Vec<Complex64>,
    pub tx_irs_rx: Vec<Complex64>,
    pub statics: Vec<ReflectorTerms>,
    pub persons: Vec<ReflectorTerms>,
}

impl ChannelTerms {
    pub fn total(&self) -> Vec<Complex64> {
        let mut out = self.direct.clone();
        for (o, v) in out.iter_mut().zip(&self.tx_irs_rx) {
            *o += v;
        }
        for r in self.statics.iter().chain(&self.persons) {
            for ((o, a), b) in out.iter_mut().zip(&r.tor).zip(&r.tior) {
                *o += a + b;
            }
        }
        out
    }
}

/// Per-reflector channel factors.
#[derive(Debug, Clone, PartialEq)]
pub struct ReflectorPaths {
    /// Reflector to each Rx antenna.
    pub h_or: Vec<Complex64>,
    /// Tx to reflector.
    pub h_to: Complex64,
    /// IRS element to reflector.
    pub h_io: Vec<Complex64>,
    /// Cascade `h_io[m] * h_ti[m]`.
    pub h_iti: Vec<Complex64>,
}

impl ReflectorPaths {
    pub fn tor(&self) -> Vec<Complex64> {
        self.h_or.iter().map(|h| h * self.h_to).collect()
    }

    /// `sum_m h_io[m] h_ti[m] exp(j phi_m)`.
    pub fn irs_sum(&self, phasors: &[Complex64]) -> Complex64 {
        self.h_iti.iter().zip(phasors).map(|(g, q)| g * q).sum()
    }

    pub fn tior(&self, phasors: &[Complex64]) -> Vec<Complex64> {
        let s = self.irs_sum(phasors);
        self.h_or.iter().map(|h| h * s).collect()
    }

    /// `tor + tior` for every antenna.
    pub fn response(&self, phasors: &[Complex64]) -> Vec<Complex64> {
        let s = self.h_to + self.irs_sum(phasors);
        self.h_or.iter().map(|h| h * s).collect()
    }
}

/// Precomputed channel state for a scenario: element positions, Tx-IRS legs,
/// the direct and Tx-IRS-Rx paths, and the static reflectors.
#[derive(Debug, Clone)]
pub struct ChannelModel {
    pub lambda: f64,
    pub tx: Vec3,
    pub rx: Vec<Vec3>,
    pub elements: Vec<Vec3>,
    pub path_loss: PathLossParams,
    pub amplitude: f64,
    pub noise_std: f64,
    /// When false every IRS-assisted path is zero.
    pub irs_enabled: bool,
    h_ti: Vec<Complex64>,
    direct: Vec<Complex64>,
    /// `h_ir[n][m]`: element `m` to antenna `n`.
    h_ir: Vec<Vec<Complex64>>,
    statics: Vec<ReflectorPaths>,
}

impl ChannelModel {
    pub fn new(s: &Scenario) -> Result<Self> {
        let lambda = s.wavelength();
        let pl = s.path_loss;
        let elements = irs_element_positions(&s.irs);
        let h_ti = elements.iter().map(|e| leg(distance(s.tx, *e), pl.alpha_ti, pl.rho0_db, lambda)).collect::<Result<Vec<_>>>()?;
        let direct = s.rx_antennas.iter().map(|r| leg(distance(s.tx, *r), pl.alpha_to, pl.rho0_db, lambda)).collect::<Result<Vec<_>>>()?;
        let h_ir = s
            .rx_antennas
            .iter()
            .map(|r| elements.iter().map(|e| leg(distance(*e, *r), pl.alpha_io, pl.rho0_db, lambda)).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        let mut model = ChannelModel {
            lambda,
            tx: s.tx,
            rx: s.rx_antennas.clone(),
            elements,
            path_loss: pl,
            amplitude: s.tx_power_watts().sqrt(),
            noise_std: s.noise_power_watts().sqrt(),
            irs_enabled: true,
            h_ti,
            direct,
            h_ir,
            statics: Vec::new(),
        };
        model.statics = s.static_reflectors.iter().map(|p| model.reflector(*p)).collect::<Result<Vec<_>>>()?;
        Ok(model)
    }

    pub fn without_irs(mut self) -> Self {
        self.irs_enabled = false;
        for r in &mut self.statics {
            r.h_iti.iter_mut().for_each(|g| *g = Complex64::new(0.0, 0.0));
        }
        self
    }

    pub fn element_count(&self) -> usize {
        self.elements.len()
    }

    pub fn rx_count(&self) -> usize {
        self.rx.len()
    }

    pub fn h_ti(&self) -> &[Complex64] {
        &self.h_ti
    }

    pub fn statics(&self) -> &[ReflectorPaths] {
        &self.statics
    }

    /// Channel factors for a point reflector at `obj`.
    pub fn reflector(&self, obj: Vec3) -> Result<ReflectorPaths> {
        let pl = &self.path_loss;
        if distance(obj, self.tx) < COINCIDENT_EPS {
            return Err(Error::CoincidentPoints("reflector at the transmitter".into()));
        }
        if self.rx.iter().any(|r| distance(obj, *r) < COINCIDENT_EPS) {
            return Err(Error::CoincidentPoints("reflector at a receive antenna".into()));
        }
        let h_or = self.rx.iter().map(|r| leg(distance(obj, *r), pl.alpha_or, pl.rho0_db, self.lambda)).collect::<Result<Vec<_>>>()?;
        let h_to = leg(distance(self.tx, obj), pl.alpha_to, pl.rho0_db, self.lambda)?;
        let h_io =
            self.elements.iter().map(|e| leg(distance(*e, obj), pl.alpha_io, pl.rho0_db, self.lambda)).collect::<Result<Vec<_>>>()?;
        let h_iti = if self.irs_enabled {
            h_io.iter().zip(&self.h_ti).map(|(a, b)| a * b).collect()
        } else {
            vec![Complex64::new(0.0, 0.0); h_io.len()]
        };
        Ok(ReflectorPaths { h_or, h_to, h_io, h_iti })
    }

    fn tx_irs_rx(&self, phasors: &[Complex64]) -> Vec<Complex64> {
        if !self.irs_enabled {
            return vec![Complex64::new(0.0, 0.0); self.rx.len()];
        }
        self.h_ir.iter().map(|row| row.iter().zip(&self.h_ti).zip(phasors).map(|((a, b), q)| a * b * q).sum()).collect()
    }

    /// Noiseless received vector split by path.
    pub fn terms(&self, pattern: &PhasePattern, persons: &[ReflectorPaths]) -> Result<ChannelTerms> {
        pattern.check_len(self.element_count())?;
        let q = pattern.phasors();
        let a = self.amplitude;
        let scale = |v: Vec<Complex64>| v.into_iter().map(|z| z * a).collect::<Vec<_>>();
        let refl = |r: &ReflectorPaths| ReflectorTerms { tor: scale(r.tor()), tior: scale(r.tior(&q)) };
        Ok(ChannelTerms {
            direct: scale(self.direct.clone()),
            tx_irs_rx: scale(self.tx_irs_rx(&q)),
            statics: self.statics.iter().map(refl).collect(),
            persons: persons.iter().map(refl).collect(),
        })
    }

    /// One frame. Noise is drawn from `rng` when given.
    pub fn snapshot(&self, pattern: &PhasePattern, persons: &[ReflectorPaths], rng: Option<&mut dyn RngCore>, t: u64) -> Result<Snapshot> {
        pattern.check_len(self.element_count())?;
        let q = pattern.phasors();
        let mut acc = self.direct.clone();
        for (o, v) in acc.iter_mut().zip(self.tx_irs_rx(&q)) {
            *o += v;
        }
        for r in self.statics.iter().chain(persons) {
            for (o, v) in acc.iter_mut().zip(r.response(&q)) {
                *o += v;
            }
        }
        let mut values: Vec<Complex64> = acc.into_iter().map(|z| z * self.amplitude).collect();
        if let Some(rng) = rng {
            add_noise(&mut values, self.noise_std, rng);
        }
        Ok(Snapshot { values, pattern_id: pattern.id(), t })
    }
}

/// Add circularly symmetric complex Gaussian noise with total variance `std^2`.
pub fn add_noise(values: &mut [Complex64], std: f64, rng: &mut dyn RngCore) {
    let s = std / std::f64::consts::SQRT_2;
    for v in values {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        *v += Complex64::new(re * s, im * s);
    }
}

/// Tx-reflector-Rx path for every antenna.
pub fn channel_tor(s: &Scenario, obj: Vec3) -> Result<Vec<Complex64>> {
    Ok(ChannelModel::new(s)?.reflector(obj)?.tor())
}

/// Tx-IRS-reflector-Rx path for every antenna.
pub fn channel_tior(s: &Scenario, p: &PhasePattern, obj: Vec3) -> Result<Vec<Complex64>> {
    let model = ChannelModel::new(s)?;
    p.check_len(model.element_count())?;
    Ok(model.reflector(obj)?.tior(&p.phasors()))
}

/// Received snapshot for persons at `person_positions`, plus its noiseless
/// decomposition.
pub fn synthesize_snapshot(
    s: &Scenario,
    p: &PhasePattern,
    person_positions: &[Vec3],
    rng: Option<&mut dyn RngCore>,
    t: u64,
) -> Result<(Snapshot, ChannelTerms)> {
    let model = ChannelModel::new(s)?;
    let persons = person_positions.iter().map(|x| model.reflector(*x)).collect::<Result<Vec<_>>>()?;
    let snap = model.snapshot(p, &persons, rng, t)?;
    let terms = model.terms(p, &persons)?;
    Ok((snap, terms))
}

/// Consecutive-frame difference `a - b`; both frames must share a pattern.
pub fn subtract(a: &Snapshot, b: &Snapshot) -> Result<Vec<Complex64>> {
    if a.pattern_id != b.pattern_id {
        return Err(Error::PatternMismatch);
    }
    if a.values.len() != b.values.len() {
        return Err(Error::LengthMismatch { expected: a.values.len(), got: b.values.len() });
    }
    Ok(a.values.iter().zip(&b.values).map(|(x, y)| x - y).collect())
}

/// CSV rows `t,antenna_index,re,im`.
pub fn write_snapshots_csv<W: Write>(w: W, snaps: &[Snapshot]) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["t", "antenna_index", "re", "im"])?;
    for s in snaps {
        for (n, v) in s.values.iter().enumerate() {
            wr.write_record([s.t.to_string(), n.to_string(), format!("{:e}", v.re), format!("{:e}", v.im)])?;
        }
    }
    wr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use crate::scene::Trajectory;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn max_abs(v: &[Complex64]) -> f64 {
        v.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    #[test]
    fn path_amplitude_examples() {
        assert!((path_amplitude(1.0, 3.6, -20.0).unwrap() - 0.1).abs() < 1e-15);
        assert!((path_amplitude(1.0, 0.0, -20.0).unwrap() - 0.1).abs() < 1e-15);
        let want = (0.01 * 2f64.powf(-2.2)).sqrt();
        assert!((path_amplitude(2.0, 2.2, -20.0).unwrap() - want).abs() < 1e-15);
        assert!((want - 0.04665).abs() < 1e-5);
        assert!(path_amplitude(0.0, 2.0, -20.0).is_err());
        let pl = PathLossParams::default();
        assert_eq!((pl.alpha_ti, pl.alpha_io, pl.alpha_to, pl.alpha_or), (2.2, 2.2, 3.6, 3.6));
    }

    /// Independent composition from distances, used as the oracle below.
    fn tor_oracle(s: &Scenario, obj: Vec3) -> Vec<Complex64> {
        let lam = s.wavelength();
        let d_to = distance(s.tx, obj);
        let rho = |d: f64, a: f64| (0.01 * d.powf(-a)).sqrt();
        s.rx_antennas
            .iter()
            .map(|r| {
                let d_or = distance(obj, *r);
                let amp = rho(d_to, 3.6) * rho(d_or, 3.6);
                c(0.0, -2.0 * PI * (d_to + d_or) / lam).exp() * amp
            })
            .collect()
    }

    fn tior_oracle(s: &Scenario, phases: &[f64], obj: Vec3) -> Vec<Complex64> {
        let lam = s.wavelength();
        let rho = |d: f64, a: f64| (0.01 * d.powf(-a)).sqrt();
        let el = irs_element_positions(&s.irs);
        let mut out = vec![];
        for r in &s.rx_antennas {
            let d_or = distance(obj, *r);
            let mut acc = c(0.0, 0.0);
            for (m, e) in el.iter().enumerate() {
                let d_io = distance(*e, obj);
                let d_ti = distance(s.tx, *e);
                let a = rho(d_io, 2.2) * rho(d_ti, 2.2);
                acc += c(0.0, -2.0 * PI * (d_io + d_ti) / lam + phases[m]).exp() * a;
            }
            out.push(acc * rho(d_or, 3.6) * c(0.0, -2.0 * PI * d_or / lam).exp());
        }
        out
    }

    #[test]
    fn tor_magnitude_is_product_of_leg_amplitudes() {
        let s = Scenario::reference();
        let obj = Vec3::floor(3.5, 3.5);
        let tor = channel_tor(&s, obj).unwrap();
        let d_to = distance(s.tx, obj);
        for (n, r) in s.rx_antennas.iter().enumerate() {
            let want = path_amplitude(d_to, 3.6, -20.0).unwrap() * path_amplitude(distance(obj, *r), 3.6, -20.0).unwrap();
            assert!((tor[n].norm() - want).abs() < 1e-15 * want.max(1e-300) * 10.0);
        }
    }

    #[test]
    fn tor_phase_wraps_to_zero_on_whole_wavelengths() {
        let mut s = Scenario::reference().with_rx_count(1);
        s.static_reflectors.clear();
        let lam = s.wavelength();
        s.tx = Vec3::new(1.0, 1.0, 10.0 * lam);
        s.rx_antennas = vec![Vec3::new(1.0, 1.0, 21.0 * lam)];
        let tor = channel_tor(&s, Vec3::floor(1.0, 1.0)).unwrap();
        assert!(tor[0].arg().abs() < 1e-9, "{}", tor[0].arg());
    }

    #[test]
    fn single_element_tior_aligns_with_tx_side_phase() {
        let mut s = Scenario::reference().with_irs_dims(1, 1);
        s.static_reflectors.clear();
        let obj = Vec3::floor(2.0, 4.0);
        let lam = s.wavelength();
        let e = s.irs.center;
        let phi = (2.0 * PI * (distance(e, obj) + distance(s.tx, e) - distance(s.tx, obj)) / lam).rem_euclid(2.0 * PI);
        let tior = channel_tior(&s, &PhasePattern::continuous(vec![phi]), obj).unwrap();
        let tor = channel_tor(&s, obj).unwrap();
        for n in 0..tor.len() {
            let d = (tior[n] / tor[n]).arg();
            assert!(d.abs() < 1e-9, "{d}");
        }
    }

    #[test]
    fn symmetric_pair_gives_equal_terms() {
        // two elements mirrored about the plane containing tx and obj
        let mut s = Scenario::reference().with_irs_dims(1, 2);
        s.static_reflectors.clear();
        let obj = Vec3::floor(3.0, 3.0);
        let model = ChannelModel::new(&s).unwrap();
        let r = model.reflector(obj).unwrap();
        assert!((r.h_iti[0] - r.h_iti[1]).norm() < 1e-15);
    }

    #[test]
    fn tior_bounded_by_triangle_inequality() {
        let s = Scenario::reference();
        let model = ChannelModel::new(&s).unwrap();
        let obj = Vec3::floor(1.3, 4.2);
        let r = model.reflector(obj).unwrap();
        let bound: f64 = r.h_iti.iter().map(|g| g.norm()).sum();
        let mut rng = rng::stream(3, &[]);
        for _ in 0..20 {
            let p: Vec<f64> = (0..81).map(|_| rand::Rng::gen_range(&mut rng, 0.0..2.0 * PI)).collect();
            let t = r.tior(&PhasePattern::continuous(p).phasors());
            for (n, v) in t.iter().enumerate() {
                assert!(v.norm() <= bound * r.h_or[n].norm() * (1.0 + 1e-12));
            }
        }
    }

    #[test]
    fn noise_variance_matches_sigma2() {
        let s = Scenario::reference();
        let sigma2 = s.noise_power_watts();
        let mut rng = rng::stream(11, &[]);
        let n = 100_000;
        let mut acc = [0.0f64; 3];
        for _ in 0..n {
            let mut v = vec![c(0.0, 0.0); 3];
            add_noise(&mut v, sigma2.sqrt(), &mut rng);
            for k in 0..3 {
                acc[k] += v[k].norm_sqr();
            }
        }
        for a in acc {
            let est = a / n as f64;
            assert!((est / sigma2 - 1.0).abs() < 0.02, "{est} vs {sigma2}");
        }
    }

    #[test]
    fn power_scales_amplitude() {
        let s = Scenario::reference().with_tx_power(0.0);
        let p = PhasePattern::zeros(81);
        let (snap, terms) = synthesize_snapshot(&s, &p, &[Vec3::floor(1.0, 1.0)], None, 0).unwrap();
        let mut unit = ChannelModel::new(&s).unwrap();
        unit.amplitude = 1.0;
        let r = unit.reflector(Vec3::floor(1.0, 1.0)).unwrap();
        let raw = unit.snapshot(&p, &[r], None, 0).unwrap();
        for (a, b) in snap.values.iter().zip(&raw.values) {
            assert!((a - b * 1e-3f64.sqrt()).norm() <= 1e-14 * a.norm());
        }
        assert_eq!(terms.direct.len(), 3);
    }

    #[test]
    fn subtract_examples() {
        let a = Snapshot { values: vec![c(1.0, 2.0)], pattern_id: 5, t: 0 };
        assert_eq!(subtract(&a, &a).unwrap(), vec![c(0.0, 0.0)]);
        let b = Snapshot { pattern_id: 6, ..a.clone() };
        assert!(matches!(subtract(&a, &b), Err(Error::PatternMismatch)));
    }

    #[test]
    fn moved_person_residual_is_channel_difference() {
        let s = Scenario::reference();
        let model = ChannelModel::new(&s).unwrap();
        let p = PhasePattern::continuous((0..81).map(|m| 0.1 * m as f64).collect());
        let (x0, x1) = (Vec3::floor(3.4, 3.5), Vec3::floor(3.5, 3.5));
        let a = model.snapshot(&p, &[model.reflector(x1).unwrap()], None, 1).unwrap();
        let b = model.snapshot(&p, &[model.reflector(x0).unwrap()], None, 0).unwrap();
        let d = subtract(&a, &b).unwrap();
        let q = p.phasors();
        let want: Vec<Complex64> = model
            .reflector(x1)
            .unwrap()
            .response(&q)
            .iter()
            .zip(model.reflector(x0).unwrap().response(&q))
            .map(|(u, v)| (u - v) * model.amplitude)
            .collect();
        for (g, w) in d.iter().zip(&want) {
            assert!((g - w).norm() <= 1e-9 * max_abs(&want));
        }
    }

    #[test]
    fn without_irs_drops_irs_paths() {
        let s = Scenario::reference();
        let m = ChannelModel::new(&s).unwrap().without_irs();
        let r = m.reflector(Vec3::floor(2.0, 2.5)).unwrap();
        let t = m.terms(&PhasePattern::zeros(81), &[r]).unwrap();
        assert_eq!(max_abs(&t.tx_irs_rx), 0.0);
        assert_eq!(max_abs(&t.persons[0].tior), 0.0);
        assert!(max_abs(&t.persons[0].tor) > 0.0);
    }

    #[test]
    fn snapshot_csv_layout() {
        let snaps = vec![Snapshot { values: vec![c(1.0, -0.5), c(0.0, 2.0)], pattern_id: 0, t: 3 }];
        let mut buf = Vec::new();
        write_snapshots_csv(&mut buf, &snaps).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "t,antenna_index,re,im");
        assert_eq!(lines[1], "3,0,1e0,-5e-1");
        assert_eq!(lines.len(), 3);
    }

    fn floor_point() -> impl Strategy<Value = Vec3> {
        (0.3..5.7f64, 0.3..5.7f64).prop_map(|(x, y)| Vec3::floor(x, y))
    }

    fn pattern(m: usize) -> impl Strategy<Value = PhasePattern> {
        proptest::collection::vec(0.0..2.0 * PI, m).prop_map(PhasePattern::continuous)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn static_scene_cancels(p in pattern(81), persons in proptest::collection::vec(floor_point(), 0..3)) {
            let mut s = Scenario::reference();
            s.persons = persons.iter().map(|x| Trajectory::stationary(*x)).collect();
            let (a, ta) = synthesize_snapshot(&s, &p, &persons, None, 1).unwrap();
            let (b, _) = synthesize_snapshot(&s, &p, &persons, None, 0).unwrap();
            let d = subtract(&a, &b).unwrap();
            let scale = max_abs(&ta.total());
            prop_assert!(max_abs(&d) <= 1e-12 * scale);
        }

        #[test]
        fn terms_sum_to_snapshot(p in pattern(81), persons in proptest::collection::vec(floor_point(), 0..3)) {
            let s = Scenario::reference();
            let (snap, terms) = synthesize_snapshot(&s, &p, &persons, None, 0).unwrap();
            let tot = terms.total();
            let scale = max_abs(&snap.values);
            for (a, b) in tot.iter().zip(&snap.values) {
                prop_assert!((a - b).norm() <= 1e-12 * scale);
            }
        }

        #[test]
        fn two_persons_are_linear(p in pattern(81), a in floor_point(), b in floor_point()) {
            let s = Scenario::reference();
            let (ab, _) = synthesize_snapshot(&s, &p, &[a, b], None, 0).unwrap();
            let (sa, _) = synthesize_snapshot(&s, &p, &[a], None, 0).unwrap();
            let (sb, _) = synthesize_snapshot(&s, &p, &[b], None, 0).unwrap();
            let (s0, _) = synthesize_snapshot(&s, &p, &[], None, 0).unwrap();
            let scale = max_abs(&ab.values);
            for n in 0..3 {
                let want = sa.values[n] + sb.values[n] - s0.values[n];
                prop_assert!((ab.values[n] - want).norm() <= 1e-12 * scale);
            }
        }

        #[test]
        fn tor_matches_oracle(obj in floor_point()) {
            let s = Scenario::reference();
            let got = channel_tor(&s, obj).unwrap();
            let want = tor_oracle(&s, obj);
            for (g, w) in got.iter().zip(&want) {
                prop_assert!((g - w).norm() <= 1e-12 * w.norm());
            }
        }

        #[test]
        fn tior_matches_oracle(obj in floor_point(), p in pattern(81)) {
            let s = Scenario::reference();
            for phases in [vec![0.0; 81], p.phases.clone()] {
                let got = channel_tior(&s, &PhasePattern::continuous(phases.clone()), obj).unwrap();
                let want = tior_oracle(&s, &phases, obj);
                let scale = max_abs(&want);
                for (g, w) in got.iter().zip(&want) {
                    prop_assert!((g - w).norm() <= 1e-11 * scale);
                }
            }
        }
    }
}
