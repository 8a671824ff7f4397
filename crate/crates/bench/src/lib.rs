//! Shared fixtures for the criterion benchmarks in `benches/`.

use irsloc::irscontrol::optimal_phases_for;
use irsloc::nullsteer::build_problem_from_paths;
use irsloc::{steering_weights, ChannelModel, NullProblem, Scenario, Vec3};

/// Null-steering problem for scene `s` focused at `(3, 3)` with people at
/// `detected`.
pub fn null_problem(s: &Scenario, detected: &[(f64, f64)]) -> NullProblem {
    let model = ChannelModel::new(s).unwrap();
    let q0 = optimal_phases_for(&model, 3.0, 3.0);
    let w = steering_weights(s, 3.0, 3.0).unwrap();
    let paths: Vec<_> = detected.iter().map(|&(x, y)| model.reflector(Vec3::floor(x, y)).unwrap()).collect();
    build_problem_from_paths(&paths, &q0, &w, std::f64::consts::FRAC_PI_6).unwrap()
}
