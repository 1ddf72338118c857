//! Mackey-Glass benchmark series.
//!
//! The delay differential equation
//!
//! ```text
//! dx/dt = beta * theta * x(t - tau) / (theta^n + x(t - tau)^n) - gamma * x(t)
//! ```
//!
//! is integrated with fixed-step RK4. The delay line is a ring buffer holding
//! one delay span of grid values together with their derivatives; delayed
//! values at RK4 half steps come from cubic Hermite interpolation so the scheme
//! keeps fourth-order accuracy.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::{SeriesFrame, SplitSpec};

const ALIGN_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MackeyGlassParams {
    pub beta_mg: f64,
    pub theta: f64,
    pub gamma: f64,
    pub exponent: f64,
    pub tau: f64,
}

impl MackeyGlassParams {
    /// `[beta, theta, gamma, n] = [0.2, 1, 0.1, 10]` with the given delay.
    pub fn standard(tau: f64) -> Self {
        Self {
            beta_mg: 0.2,
            theta: 1.0,
            gamma: 0.1,
            exponent: 10.0,
            tau,
        }
    }

    fn validate(&self) -> Result<()> {
        let finite = [
            self.beta_mg,
            self.theta,
            self.gamma,
            self.exponent,
            self.tau,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite || self.theta <= 0.0 || self.tau <= 0.0 || self.exponent <= 0.0 {
            return Err(Error::InvalidConfig(format!(
                "Mackey-Glass parameters need finite values with theta, tau, n > 0: {self:?}"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntegratorConfig {
    pub internal_dt: f64,
    pub sample_dt: f64,
    pub warmup_samples: usize,
    pub history_value: f64,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            internal_dt: 0.1,
            sample_dt: 1.0,
            warmup_samples: 1000,
            history_value: 1.2,
        }
    }
}

/// Integer ratio `num / den`, or `None` if it is not (close to) a whole number.
fn whole_ratio(num: f64, den: f64) -> Option<usize> {
    let r = num / den;
    let rounded = r.round();
    (rounded >= 1.0 && (r - rounded).abs() <= ALIGN_TOL * rounded.max(1.0))
        .then_some(rounded as usize)
}

impl IntegratorConfig {
    /// Returns `(delay_steps, steps_per_sample)`.
    fn grid(&self, tau: f64) -> Result<(usize, usize)> {
        if !(self.internal_dt > 0.0 && self.sample_dt > 0.0) || !self.history_value.is_finite() {
            return Err(Error::ConfigMisaligned(format!(
                "internal_dt and sample_dt must be positive: {self:?}"
            )));
        }
        let per = whole_ratio(self.sample_dt, self.internal_dt).ok_or_else(|| {
            Error::ConfigMisaligned(format!(
                "sample_dt {} is not a multiple of internal_dt {}",
                self.sample_dt, self.internal_dt
            ))
        })?;
        let delay = whole_ratio(tau, self.internal_dt).ok_or_else(|| {
            Error::ConfigMisaligned(format!(
                "tau {} is not a multiple of internal_dt {}",
                tau, self.internal_dt
            ))
        })?;
        Ok((delay, per))
    }
}

pub fn mg_derivative(x_now: f64, x_delayed: f64, params: &MackeyGlassParams) -> f64 {
    let base = x_delayed.max(0.0);
    params.beta_mg * params.theta * x_delayed
        / (params.theta.powf(params.exponent) + base.powf(params.exponent))
        - params.gamma * x_now
}

#[derive(Clone, Copy)]
struct Node {
    x: f64,
    /// Derivative approaching from the left.
    dx_left: f64,
    /// Derivative leaving to the right.
    dx_right: f64,
}

/// Grid values from `t - tau` to `t`, indexed by absolute step.
struct DelayLine {
    nodes: Vec<Node>,
    delay: usize,
}

impl DelayLine {
    fn new(delay: usize, history: f64) -> Self {
        let flat = Node {
            x: history,
            dx_left: 0.0,
            dx_right: 0.0,
        };
        Self {
            nodes: vec![flat; delay + 1],
            delay,
        }
    }

    /// Slot for absolute grid index `k >= -delay`.
    fn slot(&self, k: isize) -> usize {
        (k + self.delay as isize) as usize % self.nodes.len()
    }

    fn get(&self, k: isize) -> Node {
        self.nodes[self.slot(k)]
    }

    fn set(&mut self, k: isize, node: Node) {
        let s = self.slot(k);
        self.nodes[s] = node;
    }
}

/// Integrates and samples the series. Sample `i` is taken at time
/// `(warmup_samples + i) * sample_dt`; the history before `t = 0` is constant.
pub fn generate(
    params: &MackeyGlassParams,
    integ: &IntegratorConfig,
    n_samples: usize,
) -> Result<SeriesFrame> {
    params.validate()?;
    let (delay, per) = integ.grid(params.tau)?;
    let dt = integ.internal_dt;
    let f = |x: f64, xd: f64| mg_derivative(x, xd, params);

    let mut line = DelayLine::new(delay, integ.history_value);
    let total_samples = integ.warmup_samples + n_samples;
    let mut out = Vec::with_capacity(n_samples);
    let mut x = integ.history_value;
    let d = delay as isize;
    let steps = total_samples.saturating_sub(1) * per;

    for k in 0..=steps as isize {
        if (k as usize).is_multiple_of(per) {
            let s = k as usize / per;
            if s >= integ.warmup_samples && s < total_samples {
                out.push(x);
            }
        }
        if k as usize == steps {
            break;
        }
        let a = line.get(k - d);
        let k1 = f(x, a.x);
        // t = 0 is the only point where the derivative jumps.
        let dx_left = if k == 0 { 0.0 } else { k1 };
        line.set(
            k,
            Node {
                x,
                dx_left,
                dx_right: k1,
            },
        );
        let b = line.get(k - d + 1);
        let mid = 0.5 * (a.x + b.x) + dt / 8.0 * (a.dx_right - b.dx_left);
        let k2 = f(x + 0.5 * dt * k1, mid);
        let k3 = f(x + 0.5 * dt * k2, mid);
        let k4 = f(x + dt * k3, b.x);
        x += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if !x.is_finite() {
            return Err(Error::NonFiniteInput("Mackey-Glass integration"));
        }
    }

    SeriesFrame::new(out, format!("mg_tau{}", params.tau))
}

/// Standard-parameter series of `split.total()` samples with the default
/// integrator.
pub fn make_benchmark(tau: f64, split: &SplitSpec) -> Result<SeriesFrame> {
    generate(
        &MackeyGlassParams::standard(tau),
        &IntegratorConfig::default(),
        split.total(),
    )
}
