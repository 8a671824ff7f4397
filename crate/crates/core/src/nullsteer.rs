//! Small phase perturbations of an IRS pattern that cancel the echo of
//! already-detected people at the current scan focus.
//!
//! Linearising `q0_m exp(j dphi_m) ~ q0_m (1 + j dphi_m)` turns the combined
//! echo into `s_d(dphi) = h_d + dphi^T h_D`, so `|s_d|^2` is a convex quadratic
//! in the real vector `dphi`. With `v = [dphi; 1]` it reads `v^T G v + |h_d|^2`,
//! minimised over `|dphi_m| <= phi_max` through a semidefinite relaxation.

use std::f64::consts::PI;
use std::io::Write;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::beamform::BeamWeights;
use crate::channel::{ChannelModel, PhasePattern, ReflectorPaths};
use crate::error::{invalid, Error, Result};
use crate::irscontrol::quantize;
use crate::scene::{Scenario, Vec3};
use crate::sdp::{hermitian_eig, solve_sdp, HermitianMatrix, SdpOptions};

/// Default perturbation limit.
pub const DEFAULT_PHI_MAX: f64 = PI / 6.0;

/// Largest relative duality gap accepted from the SDP solver.
const ACCEPT_GAP: f64 = 1e-6;

const J: Complex64 = Complex64 { re: 0.0, im: 1.0 };

#[derive(Debug, Clone, PartialEq)]
pub struct NullProblem {
    pub h_d: Complex64,
    pub h_big_d: Vec<Complex64>,
    pub phi_max: f64,
    /// `[[h_D h_D^H, h_D conj(h_d)], [h_d h_D^H, 0]]`.
    pub g: HermitianMatrix,
}

impl NullProblem {
    pub fn new(h_d: Complex64, h_big_d: Vec<Complex64>, phi_max: f64) -> Result<Self> {
        if !(phi_max > 0.0 && phi_max < PI / 2.0) {
            return Err(invalid("phi_max", format!("{phi_max} outside (0, pi/2)")));
        }
        if h_big_d.is_empty() {
            return Err(Error::Dimension("no IRS elements".into()));
        }
        let m = h_big_d.len();
        let col = |i: usize| if i < m { h_big_d[i] } else { h_d };
        let g = DMatrix::from_fn(m + 1, m + 1, |i, j| if i == m && j == m { Complex64::new(0.0, 0.0) } else { col(i) * col(j).conj() });
        Ok(Self { h_d, g: HermitianMatrix::from_dense(&g)?, h_big_d, phi_max })
    }

    pub fn element_count(&self) -> usize {
        self.h_big_d.len()
    }

    /// `|h_d + dphi^T h_D|^2`.
    pub fn linearized_objective(&self, dphi: &[f64]) -> f64 {
        let s: Complex64 = self.h_big_d.iter().zip(dphi).map(|(b, d)| b * *d).sum();
        (self.h_d + s).norm_sqr()
    }

    /// Rows `kind,i,j,re,im` for `h_d`, `h_D` and `G`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["kind", "i", "j", "re", "im"])?;
        let mut row = |kind: &str, i: usize, j: usize, z: Complex64| {
            out.write_record([kind.to_string(), i.to_string(), j.to_string(), format!("{:e}", z.re), format!("{:e}", z.im)])
        };
        row("h_d", 0, 0, self.h_d)?;
        for (m, z) in self.h_big_d.iter().enumerate() {
            row("h_D", m, 0, *z)?;
        }
        let n = self.g.dim();
        for i in 0..n {
            for j in 0..n {
                row("G", i, j, self.g.get(i, j))?;
            }
        }
        out.flush()?;
        Ok(())
    }
}

/// Which candidate `solve_null` returned.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Extraction {
    /// `sqrt(lambda_1) p_1` scaled to a unit last entry.
    Eigen,
    /// Last column of `V*`.
    FirstMoment,
    /// Neither candidate improved on `dphi = 0`.
    Zero,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Perturbation {
    pub delta_phi: Vec<f64>,
    pub objective_before: f64,
    pub objective_after: f64,
    pub sdp_lower_bound: f64,
    pub extraction: Extraction,
}

impl Perturbation {
    pub fn zero(p: &NullProblem) -> Self {
        let before = p.h_d.norm_sqr();
        Self {
            delta_phi: vec![0.0; p.element_count()],
            objective_before: before,
            objective_after: before,
            sdp_lower_bound: before,
            extraction: Extraction::Zero,
        }
    }
}

/// Linearised combined echo of `detected` at the focus that `w` steers to.
pub fn build_problem(s: &Scenario, q0: &PhasePattern, w: &BeamWeights, detected: &[Vec3], phi_max: f64) -> Result<NullProblem> {
    let model = ChannelModel::new(s)?;
    let paths = detected.iter().map(|p| model.reflector(*p)).collect::<Result<Vec<_>>>()?;
    build_problem_from_paths(&paths, q0, w, phi_max)
}

/// Same as [`build_problem`] with the reflectors' channel factors precomputed.
pub fn build_problem_from_paths(detected: &[ReflectorPaths], q0: &PhasePattern, w: &BeamWeights, phi_max: f64) -> Result<NullProblem> {
    if detected.is_empty() {
        return Err(Error::EmptyDetectedSet);
    }
    let m = detected[0].h_iti.len();
    q0.check_len(m)?;
    let q = q0.phasors();
    let mut h_d = Complex64::new(0.0, 0.0);
    let mut h_big_d = vec![Complex64::new(0.0, 0.0); m];
    for r in detected {
        if r.h_or.len() != w.len() {
            return Err(Error::LengthMismatch { expected: w.len(), got: r.h_or.len() });
        }
        // every antenna sees the same Tx-reflector factor, so the beam only scales it
        let beam: Complex64 = w.weights.iter().zip(&r.h_or).map(|(a, b)| a * b).sum();
        h_d += beam * (r.h_to + r.irs_sum(&q));
        for ((d, g), qm) in h_big_d.iter_mut().zip(&r.h_iti).zip(&q) {
            *d += J * beam * qm * g;
        }
    }
    NullProblem::new(h_d, h_big_d, phi_max)
}

/// `|s_d|^2` with the true phase shifts `exp(j dphi)` instead of the linearisation.
pub fn exact_objective(detected: &[ReflectorPaths], q0: &PhasePattern, w: &BeamWeights, dphi: &[f64]) -> Result<f64> {
    if dphi.len() != q0.len() {
        return Err(Error::LengthMismatch { expected: q0.len(), got: dphi.len() });
    }
    let q: Vec<Complex64> = q0.phasors().iter().zip(dphi).map(|(a, d)| a * Complex64::from_polar(1.0, *d)).collect();
    let mut s = Complex64::new(0.0, 0.0);
    for r in detected {
        let beam: Complex64 = w.weights.iter().zip(&r.h_or).map(|(a, b)| a * b).sum();
        s += beam * (r.h_to + r.irs_sum(&q));
    }
    Ok(s.norm_sqr())
}

pub fn solve_null(p: &NullProblem) -> Result<Perturbation> {
    solve_null_with(p, &SdpOptions { tol: 1e-8, max_iter: 100, record_history: false })
}

pub fn solve_null_with(p: &NullProblem, opts: &SdpOptions) -> Result<Perturbation> {
    let m = p.element_count();
    let before = p.h_d.norm_sqr();
    if before == 0.0 || p.h_big_d.iter().all(|z| *z == Complex64::new(0.0, 0.0)) {
        return Ok(Perturbation::zero(p));
    }
    // dphi is real, so only Re(G) enters v^T G v
    let g = HermitianMatrix::from_real(&p.g.real_part())?;
    let bound = p.phi_max * p.phi_max;
    let bounds: Vec<(usize, f64)> = (0..m).map(|k| (k, bound)).collect();
    let res = solve_sdp(&g, &bounds, &[(m, 1.0)], opts)?;
    if res.relative_gap > ACCEPT_GAP {
        return Err(Error::SdpNotConverged { iterations: res.iterations, gap: res.relative_gap });
    }
    let v = res.v_star.real_part();
    let clip = |x: f64| x.clamp(-p.phi_max, p.phi_max);

    let eig = hermitian_eig(&res.v_star)?;
    let lead = eig.vectors.column(0) * Complex64::new(eig.values[0].max(0.0).sqrt(), 0.0);
    let eigen = if lead[m].norm() > 0.0 { Some((0..m).map(|k| clip((lead[k] / lead[m]).re)).collect::<Vec<_>>()) } else { None };
    let moment: Vec<f64> = (0..m).map(|k| clip(v[(k, m)] / v[(m, m)])).collect();

    let mut best = (Extraction::Zero, vec![0.0; m], before);
    for (kind, cand) in [(Extraction::Eigen, eigen), (Extraction::FirstMoment, Some(moment))] {
        if let Some(c) = cand {
            let obj = p.linearized_objective(&c);
            if obj < best.2 {
                best = (kind, c, obj);
            }
        }
    }
    let (extraction, delta_phi, after) = best;
    Ok(Perturbation {
        delta_phi,
        objective_before: before,
        objective_after: after,
        sdp_lower_bound: (res.dual_bound + before).min(before),
        extraction,
    })
}

/// `(phi0 + dphi) mod 2 pi`, quantized to `bits`.
pub fn apply_perturbation(q0: &PhasePattern, d: &Perturbation, bits: u32) -> Result<PhasePattern> {
    Ok(quantize(&apply_perturbation_continuous(q0, d)?, bits))
}

/// `(phi0 + dphi) mod 2 pi` without quantization.
pub fn apply_perturbation_continuous(q0: &PhasePattern, d: &Perturbation) -> Result<PhasePattern> {
    if d.delta_phi.len() != q0.len() {
        return Err(Error::LengthMismatch { expected: q0.len(), got: d.delta_phi.len() });
    }
    let phases = q0.phases.iter().zip(&d.delta_phi).map(|(a, b)| (a + b).rem_euclid(2.0 * PI)).collect();
    Ok(PhasePattern::continuous(phases))
}
