//! Fixtures shared by the benchmarks.

use vmlimit_core::harness::{RunConfig, RunPlan};
use vmlimit_core::{LightSpeed, SimState, Stepper};

/// Baseline data on an `nx` by `np` by `np` grid, ready to step.
pub struct Fixture {
    pub stepper: Stepper,
    pub state: SimState,
    pub dt: f64,
}

pub fn fixture(c: LightSpeed, nx: usize, np: usize) -> Fixture {
    let mut cfg = RunConfig::baseline(c);
    cfg.nx = nx;
    cfg.np1 = np;
    cfg.np2 = np;
    let plan = RunPlan::new(&cfg).expect("baseline plan");
    let (stepper, state) = Stepper::from_initial(&plan.data, c).expect("baseline state");
    Fixture { stepper, state, dt: plan.dt }
}
