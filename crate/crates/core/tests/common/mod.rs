#![allow(dead_code)]

use icapm_core::data::{ModelSpec, ParameterLayout, Variant};
use icapm_core::inference::{sandwich_covariance, SandwichCovariance};
use icapm_core::qml::{estimate, EstimationOptions, EstimationResult, QmlProblem};
use icapm_core::simulation::{simulate_panel, InstrumentProcess, SimulatedPanel, SimulationConfig};
use icapm_core::ExecMode;

/// Two-asset model with one non-constant instrument in each price.
pub fn recovery_truth() -> (ModelSpec, Vec<f64>) {
    let spec = ModelSpec::new(Variant::Asymmetric, 2, 2, 2).unwrap();
    let l = ParameterLayout::new(&spec).unwrap();
    let mut theta = vec![0.0; l.len()];
    theta[l.kappa_world.start] = 3.5f64.ln();
    theta[l.kappa_world.start + 1] = 1.0;
    theta[l.kappa_local[0].start] = 2.0f64.ln();
    theta[l.kappa_local[0].start + 1] = -1.0;
    theta[l.c_index(0, 0)] = 0.018;
    theta[l.c_index(1, 0)] = 0.008;
    theta[l.c_index(1, 1)] = 0.016;
    let set = |theta: &mut Vec<f64>, r: &std::ops::Range<usize>, v: [f64; 2]| {
        theta[r.start] = v[0];
        theta[r.start + 1] = v[1];
    };
    set(&mut theta, &l.a, [0.3, 0.28]);
    set(&mut theta, &l.b, [0.8, 0.82]);
    set(&mut theta, l.s.as_ref().unwrap(), [0.3, 0.25]);
    set(&mut theta, l.z.as_ref().unwrap(), [0.3, 0.25]);
    (spec, theta)
}

pub fn simulate(spec: ModelSpec, theta: &[f64], periods: usize, seed: u64) -> SimulatedPanel {
    let cfg = SimulationConfig::new(theta.to_vec(), spec, periods, seed)
        .with_instruments(InstrumentProcess::IidGaussian { scale: 0.1 });
    simulate_panel(&cfg).unwrap()
}

pub fn fit(sim: &SimulatedPanel, spec: ModelSpec, options: &EstimationOptions) -> (EstimationResult, SandwichCovariance) {
    let problem = QmlProblem::new(&sim.panel, &sim.instruments, spec).unwrap();
    let result = estimate(&problem, options).unwrap();
    let problem = problem.with_h_init(result.h_init.clone()).unwrap();
    let cov = sandwich_covariance(&problem, &result.theta, &result.scores, ExecMode::Parallel).unwrap();
    (result, cov)
}
