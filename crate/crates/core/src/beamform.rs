//! Receive beamforming and the classical resolution limits.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scene::{distance, Scenario, Vec3};

/// Unit-modulus combining weights steered at a floor point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeamWeights {
    pub weights: Vec<Complex64>,
    pub focus: (f64, f64),
}

impl BeamWeights {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

/// Weights that undo the Tx-focus-Rx propagation phase at every antenna.
pub fn steering_weights(s: &Scenario, x: f64, y: f64) -> Result<BeamWeights> {
    if !s.room.contains_xy(x, y) {
        return Err(Error::OutsideRoom { x, y });
    }
    Ok(steering_weights_unchecked(s.tx, &s.rx_antennas, s.wavelength(), x, y))
}

pub(crate) fn steering_weights_unchecked(tx: Vec3, rx: &[Vec3], lambda: f64, x: f64, y: f64) -> BeamWeights {
    let focus = Vec3::floor(x, y);
    let d_to = distance(tx, focus);
    let weights = rx.iter().map(|r| Complex64::from_polar(1.0, 2.0 * PI * (d_to + distance(focus, *r)) / lambda)).collect();
    BeamWeights { weights, focus: (x, y) }
}

/// Inner product `sum_n w[n] r[n]`.
pub fn combine(w: &BeamWeights, residual: &[Complex64]) -> Result<Complex64> {
    if w.weights.len() != residual.len() {
        return Err(Error::LengthMismatch { expected: w.weights.len(), got: residual.len() });
    }
    Ok(w.weights.iter().zip(residual).map(|(a, b)| a * b).sum())
}

/// Angular resolution `2 asin(lambda / (N d))` of an N-element line array, in degrees.
pub fn aoa_resolution(n_antennas: usize, spacing: f64, lambda: f64) -> Result<f64> {
    let ratio = lambda / (n_antennas as f64 * spacing);
    if n_antennas == 0 || !(spacing > 0.0) || !(ratio <= 1.0) {
        return Err(Error::NoAngularResolution { n: n_antennas, spacing, lambda });
    }
    Ok(2.0 * ratio.asin().to_degrees())
}

/// Time-of-flight resolution `1 / (2 B)` in seconds.
pub fn tof_resolution(bandwidth: f64) -> Result<f64> {
    if !(bandwidth > 0.0) {
        return Err(Error::NonPositiveBandwidth(bandwidth));
    }
    Ok(1.0 / (2.0 * bandwidth))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::ChannelModel;
    use proptest::prelude::*;

    #[test]
    fn resolution_examples() {
        let lam = 0.125;
        assert!((aoa_resolution(3, lam / 2.0, lam).unwrap() - 83.62).abs() < 0.01);
        assert!((aoa_resolution(4, lam / 2.0, lam).unwrap() - 60.0).abs() < 1e-9);
        assert!((aoa_resolution(2, lam / 2.0, lam).unwrap() - 180.0).abs() < 1e-9);
        assert!(matches!(aoa_resolution(1, lam / 2.0, lam), Err(Error::NoAngularResolution { .. })));
        assert_eq!(tof_resolution(40e6).unwrap(), 12.5e-9);
        assert_eq!(tof_resolution(0.5).unwrap(), 1.0);
        assert_eq!(tof_resolution(20e6).unwrap(), 25e-9);
        assert!(tof_resolution(0.0).is_err());
    }

    #[test]
    fn whole_wavelength_paths_give_unit_weights() {
        let lam = 0.125;
        let tx = Vec3::new(1.0, 1.0, 8.0 * lam);
        let rx = [Vec3::new(1.0, 1.0, 12.0 * lam), Vec3::new(1.0 + 5.0 * lam, 1.0, 0.0)];
        let w = steering_weights_unchecked(tx, &rx, lam, 1.0, 1.0);
        for z in &w.weights {
            assert!((z - Complex64::new(1.0, 0.0)).norm() < 1e-9);
        }
    }

    #[test]
    fn combine_examples() {
        let w = BeamWeights { weights: vec![Complex64::from_polar(1.0, 0.4), Complex64::from_polar(1.0, -1.1)], focus: (0.0, 0.0) };
        let r: Vec<Complex64> = w.weights.iter().map(|z| z.conj()).collect();
        assert!((combine(&w, &r).unwrap().norm() - 2.0).abs() < 1e-15);
        assert_eq!(combine(&w, &[Complex64::default(); 2]).unwrap(), Complex64::default());
        assert!(combine(&w, &[Complex64::default(); 3]).is_err());
    }

    #[test]
    fn single_antenna_is_a_rotation() {
        let s = Scenario::reference().with_rx_count(1);
        let w = steering_weights(&s, 2.0, 2.0).unwrap();
        let r = [Complex64::new(0.3, -0.7)];
        assert!((combine(&w, &r).unwrap().norm() - r[0].norm()).abs() < 1e-15);
    }

    #[test]
    fn outside_focus_rejected() {
        assert!(steering_weights(&Scenario::reference(), -0.1, 1.0).is_err());
    }

    proptest! {
        #[test]
        fn combine_matches_loop(v in proptest::collection::vec((-1.0..1.0f64, -1.0..1.0f64, -3.0..3.0f64), 1..6)) {
            let w = BeamWeights { weights: v.iter().map(|t| Complex64::from_polar(1.0, t.2)).collect(), focus: (0.0, 0.0) };
            let r: Vec<Complex64> = v.iter().map(|t| Complex64::new(t.0, t.1)).collect();
            let mut acc = Complex64::new(0.0, 0.0);
            for (a, b) in w.weights.iter().zip(&r) {
                acc += a * b;
            }
            prop_assert!((combine(&w, &r).unwrap() - acc).norm() < 1e-14);
        }

        #[test]
        fn coherent_gain_equals_sum_of_magnitudes(x in 0.2..5.8f64, y in 0.2..5.8f64, rot in -3.0..3.0f64) {
            let s = Scenario::reference();
            let model = ChannelModel::new(&s).unwrap();
            let r = model.reflector(Vec3::floor(x, y)).unwrap();
            let w = steering_weights(&s, x, y).unwrap();
            let tor = r.tor();
            let got = combine(&w, &tor).unwrap().norm();
            let want: f64 = tor.iter().map(|z| z.norm()).sum();
            prop_assert!((got - want).abs() <= 1e-12 * want);
            let rotated: Vec<Complex64> = tor.iter().map(|z| z * Complex64::from_polar(1.0, rot)).collect();
            prop_assert!((combine(&w, &rotated).unwrap().norm() - got).abs() <= 1e-12 * want);
        }
    }
}
