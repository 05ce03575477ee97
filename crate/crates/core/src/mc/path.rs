use rand::Rng;
use serde::Serialize;

use super::path_rng;
use super::step::Stepper;
use crate::error::{invalid, Result};
use crate::model::ProcessModel;

/// A path recorded on the grid `t_i = i dt`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimPath {
    pub dt: f64,
    pub seed: u64,
    pub stream: u64,
    pub values: Vec<f64>,
    /// Running maximum of the grid values.
    pub running_max: Vec<f64>,
    /// `jumps[i]` is set when a jump happened in `(t_{i-1}, t_i]`.
    pub jumps: Vec<bool>,
}

impl SimPath {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn time(&self, i: usize) -> f64 {
        i as f64 * self.dt
    }

    pub fn drawdown(&self, i: usize) -> f64 {
        self.running_max[i] - self.values[i]
    }

    /// First grid index with `pred(i)`.
    pub fn first(&self, mut pred: impl FnMut(usize) -> bool) -> Option<usize> {
        (0..self.len()).find(|&i| pred(i))
    }
}

pub(crate) fn check_grid(dt: f64, horizon: f64) -> Result<usize> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(invalid("dt", "must be > 0"));
    }
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(invalid("horizon", "must be > 0"));
    }
    Ok((horizon / dt).ceil() as usize)
}

/// Simulates on stream 0 of `seed`.
pub fn simulate_path(model: &ProcessModel, x: f64, horizon: f64, dt: f64, seed: u64) -> Result<SimPath> {
    simulate_path_stream(model, x, horizon, dt, seed, 0)
}

pub fn simulate_path_stream(
    model: &ProcessModel,
    x: f64,
    horizon: f64,
    dt: f64,
    seed: u64,
    stream: u64,
) -> Result<SimPath> {
    let steps = check_grid(dt, horizon)?;
    let stepper = Stepper::new(model)?;
    let mut rng = path_rng(seed, stream);
    record(&stepper, x, steps, dt, &mut rng, seed, stream)
}

fn record<R: Rng>(stepper: &Stepper, x: f64, steps: usize, dt: f64, rng: &mut R, seed: u64, stream: u64) -> Result<SimPath> {
    let mut values = Vec::with_capacity(steps + 1);
    let mut running_max = Vec::with_capacity(steps + 1);
    let mut jumps = Vec::with_capacity(steps + 1);
    values.push(x);
    running_max.push(x);
    jumps.push(false);
    let mut state = x;
    let mut top = x;
    let mut clock = stepper.jump_clock(rng);
    for _ in 0..steps {
        let mut remaining = dt;
        let mut jumped = false;
        while remaining > 0.0 {
            if clock <= remaining {
                state = stepper.advance(state, clock, rng)?.0 - stepper.jump_size(rng);
                remaining -= clock;
                clock = stepper.jump_clock(rng);
                jumped = true;
            } else {
                state = stepper.advance(state, remaining, rng)?.0;
                clock -= remaining;
                remaining = 0.0;
            }
        }
        top = top.max(state);
        values.push(state);
        running_max.push(top);
        jumps.push(jumped);
    }
    Ok(SimPath {
        dt,
        seed,
        stream,
        values,
        running_max,
        jumps,
    })
}
