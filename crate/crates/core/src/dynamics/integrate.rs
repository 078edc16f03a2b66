use std::collections::BTreeMap;
use std::fmt;
use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{state_of, CompiledField, DynamicsError, VectorFieldSpec};
use crate::expr::Point;
use crate::tolerance;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Rk4,
    Rkf45,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Rk4 => "rk4",
            Method::Rkf45 => "rkf45",
        })
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "rk4" => Ok(Method::Rk4),
            "rkf45" => Ok(Method::Rkf45),
            other => Err(format!("unknown method `{other}` (expected rk4 or rkf45)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntegrateOptions {
    pub method: Method,
    pub t_end: f64,
    /// Fixed step for rk4, initial step for rkf45.
    pub step: f64,
    pub rtol: f64,
    pub atol: f64,
    /// Keep every `thin`-th step (the final state is always kept).
    pub thin: usize,
    /// Accepted-step limit for rkf45.
    pub max_steps: usize,
}

impl IntegrateOptions {
    pub fn rk4(t_end: f64, step: f64) -> Self {
        IntegrateOptions {
            method: Method::Rk4,
            t_end,
            step,
            rtol: tolerance::RKF45_RTOL,
            atol: tolerance::RKF45_ATOL,
            thin: 1,
            max_steps: 10_000_000,
        }
    }

    pub fn rkf45(t_end: f64, step: f64) -> Self {
        IntegrateOptions { method: Method::Rkf45, ..IntegrateOptions::rk4(t_end, step) }
    }

    pub fn with_thinning(mut self, thin: usize) -> Self {
        self.thin = thin;
        self
    }
}

/// Why an integration stopped before `t_end`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntegrationFailure {
    pub t: f64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    coords: Vec<String>,
    parameters: BTreeMap<String, f64>,
    times: Vec<f64>,
    states: Vec<Vec<f64>>,
    method: Method,
    step: f64,
    steps: usize,
    failure: Option<IntegrationFailure>,
}

impl Trajectory {
    pub fn coords(&self) -> &[String] {
        &self.coords
    }

    pub fn parameters(&self) -> &BTreeMap<String, f64> {
        &self.parameters
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn states(&self) -> &[Vec<f64>] {
        &self.states
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn method(&self) -> Method {
        self.method
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    /// Accepted integration steps, before thinning.
    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn failure(&self) -> Option<&IntegrationFailure> {
        self.failure.as_ref()
    }

    pub fn completed(&self) -> bool {
        self.failure.is_none()
    }

    pub fn point(&self, i: usize) -> Point {
        Point::from_pairs(self.coords.iter().cloned().zip(self.states[i].iter().copied()))
    }

    pub fn last_point(&self) -> Point {
        self.point(self.len() - 1)
    }

    /// `t,<coords>` header then one row per sample, 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t");
        for c in &self.coords {
            out.push(',');
            out.push_str(c);
        }
        out.push('\n');
        for (t, state) in self.times.iter().zip(&self.states) {
            let _ = write!(out, "{t:.16e}");
            for v in state {
                let _ = write!(out, ",{v:.16e}");
            }
            out.push('\n');
        }
        out
    }
}

struct Recorder {
    times: Vec<f64>,
    states: Vec<Vec<f64>>,
    thin: usize,
    steps: usize,
}

impl Recorder {
    fn accept(&mut self, t: f64, state: &[f64]) {
        self.steps += 1;
        if self.steps.is_multiple_of(self.thin) {
            self.times.push(t);
            self.states.push(state.to_vec());
        }
    }

    fn finish(&mut self, t: f64, state: &[f64]) {
        if self.times.last() != Some(&t) {
            self.times.push(t);
            self.states.push(state.to_vec());
        }
    }
}

/// Integrate `v` from `x0` over `[0, t_end]`. Evaluation failures part way
/// stop the integration and are reported through [`Trajectory::failure`]
/// together with the samples computed so far.
pub fn integrate(v: &VectorFieldSpec, x0: &Point, options: &IntegrateOptions) -> Result<Trajectory, DynamicsError> {
    let valid = |x: f64| x.is_finite() && x > 0.0;
    if !valid(options.step) || !valid(options.t_end) {
        return Err(DynamicsError::Invalid("step and t_end must be positive and finite".into()));
    }
    if options.method == Method::Rkf45 && !(valid(options.rtol) && options.atol >= 0.0) {
        return Err(DynamicsError::Invalid("rkf45 needs a positive relative tolerance".into()));
    }
    if options.thin == 0 {
        return Err(DynamicsError::Invalid("thinning factor must be at least 1".into()));
    }
    let state = state_of(v.chart(), x0)?;
    let mut field = v.compile()?;
    let mut rec = Recorder { times: vec![0.0], states: vec![state.clone()], thin: options.thin, steps: 0 };
    let failure = match options.method {
        Method::Rk4 => run_rk4(&mut field, state, options, &mut rec),
        Method::Rkf45 => run_rkf45(&mut field, state, options, &mut rec),
    }
    .err();
    Ok(Trajectory {
        coords: v.chart().names().to_vec(),
        parameters: v.parameters().clone(),
        times: rec.times,
        states: rec.states,
        method: options.method,
        step: options.step,
        steps: rec.steps,
        failure,
    })
}

fn fail(t: f64, reason: impl fmt::Display) -> IntegrationFailure {
    IntegrationFailure { t, reason: reason.to_string() }
}

fn check_finite(t: f64, state: &[f64]) -> Result<(), IntegrationFailure> {
    if state.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(fail(t, "state became non-finite"))
    }
}

/// Number of fixed steps `⌈t_end / h⌉`, ignoring a rounding-level excess.
fn step_count(t_end: f64, h: f64) -> usize {
    let ratio = t_end / h;
    let n = ratio.ceil();
    let n = if n - ratio > 1.0 - 1e-9 { n - 1.0 } else { n };
    (n as usize).max(1)
}

fn run_rk4(
    field: &mut CompiledField,
    mut y: Vec<f64>,
    options: &IntegrateOptions,
    rec: &mut Recorder,
) -> Result<(), IntegrationFailure> {
    let n = field.dim();
    let h = options.step;
    let steps = step_count(options.t_end, h);
    let (mut k1, mut k2, mut k3, mut k4, mut tmp) =
        (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let mut t = 0.0;
    for i in 0..steps {
        let dt = if i + 1 == steps { options.t_end - (steps - 1) as f64 * h } else { h };
        field.eval(&y, &mut k1).map_err(|e| fail(t, e))?;
        axpy(&y, 0.5 * dt, &k1, &mut tmp);
        field.eval(&tmp, &mut k2).map_err(|e| fail(t, e))?;
        axpy(&y, 0.5 * dt, &k2, &mut tmp);
        field.eval(&tmp, &mut k3).map_err(|e| fail(t, e))?;
        axpy(&y, dt, &k3, &mut tmp);
        field.eval(&tmp, &mut k4).map_err(|e| fail(t, e))?;
        for j in 0..n {
            y[j] += dt / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
        }
        t = if i + 1 == steps { options.t_end } else { (i + 1) as f64 * h };
        check_finite(t, &y)?;
        rec.accept(t, &y);
    }
    rec.finish(t, &y);
    Ok(())
}

fn axpy(y: &[f64], a: f64, k: &[f64], out: &mut [f64]) {
    for ((o, yi), ki) in out.iter_mut().zip(y).zip(k) {
        *o = yi + a * ki;
    }
}

// Fehlberg 4(5) tableau.
const A: [[f64; 5]; 6] = [
    [0.0, 0.0, 0.0, 0.0, 0.0],
    [1.0 / 4.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 32.0, 9.0 / 32.0, 0.0, 0.0, 0.0],
    [1932.0 / 2197.0, -7200.0 / 2197.0, 7296.0 / 2197.0, 0.0, 0.0],
    [439.0 / 216.0, -8.0, 3680.0 / 513.0, -845.0 / 4104.0, 0.0],
    [-8.0 / 27.0, 2.0, -3544.0 / 2565.0, 1859.0 / 4104.0, -11.0 / 40.0],
];
const B5: [f64; 6] = [16.0 / 135.0, 0.0, 6656.0 / 12825.0, 28561.0 / 56430.0, -9.0 / 50.0, 2.0 / 55.0];
const B4: [f64; 6] = [25.0 / 216.0, 0.0, 1408.0 / 2565.0, 2197.0 / 4104.0, -1.0 / 5.0, 0.0];

fn run_rkf45(
    field: &mut CompiledField,
    mut y: Vec<f64>,
    options: &IntegrateOptions,
    rec: &mut Recorder,
) -> Result<(), IntegrationFailure> {
    let n = field.dim();
    let mut k = vec![vec![0.0; n]; 6];
    let mut stage = vec![0.0; n];
    let mut y5 = vec![0.0; n];
    let mut t = 0.0;
    let mut h = options.step.min(options.t_end);
    while t < options.t_end {
        if rec.steps >= options.max_steps {
            return Err(fail(t, format!("exceeded {} steps", options.max_steps)));
        }
        let last = t + h >= options.t_end;
        if last {
            h = options.t_end - t;
        }
        for (s, row) in A.iter().enumerate() {
            let (prev, rest) = k.split_at_mut(s);
            stage.copy_from_slice(&y);
            for (kr, a) in prev.iter().zip(row) {
                for j in 0..n {
                    stage[j] += h * a * kr[j];
                }
            }
            field.eval(&stage, &mut rest[0]).map_err(|e| fail(t, e))?;
        }
        let mut err: f64 = 0.0;
        for j in 0..n {
            let (mut hi, mut lo) = (0.0, 0.0);
            for s in 0..6 {
                hi += B5[s] * k[s][j];
                lo += B4[s] * k[s][j];
            }
            y5[j] = y[j] + h * hi;
            let scale = options.atol + options.rtol * y[j].abs().max(y5[j].abs());
            err = err.max((h * (hi - lo)).abs() / scale);
        }
        if !err.is_finite() {
            return Err(fail(t, "non-finite error estimate"));
        }
        if err <= 1.0 {
            t = if last { options.t_end } else { t + h };
            y.copy_from_slice(&y5);
            check_finite(t, &y)?;
            rec.accept(t, &y);
        }
        let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
        h *= factor;
        if t < options.t_end && h <= 1e-14 * t.abs().max(1.0) {
            return Err(fail(t, format!("step size underflow (h = {h:e})")));
        }
    }
    rec.finish(t, &y);
    Ok(())
}
