//! Fixed-step method-of-steps integrator for the uniformly delayed model.
//!
//! The step h is adjusted downward so that it divides the delay exactly
//! (τ = m·h for integer m). Every breakpoint k·τ then lands on a grid node,
//! each Runge-Kutta step integrates over a single smoothness interval, and
//! every delayed lookup resolves by index arithmetic: a stage at t_n + c·h
//! reads the delayed state at t_{n−m} + c·h, which is a stored node for
//! c ∈ {0, 1} and a cubic-Hermite dense-output query on segment n−m for
//! c = 1/2. Times before the initial node come from the history function,
//! which covers [−τ, 0] and is never extrapolated.
//!
//! Norm drift: the sphere is invariant for the exact flow, so the integrator
//! tracks max_j |‖z_j‖ − 1| along the way. With projection off, exceeding the
//! budget aborts with the partial trajectory attached; with projection on,
//! every accepted step renormalizes.

use crate::model::{rhs_for_form, ModelError, ModelParams};
use crate::sphere::{dist_slices, norm_slice, random_ensemble, Ensemble, SkewHermitian, C64};
use serde::{Deserialize, Serialize};
use std::io::Write;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IntegrateError {
    #[error("invalid integrator configuration: {0}")]
    InvalidConfig(String),
    #[error("history must cover [-tau, 0]: {0}")]
    HistoryCoverage(String),
    #[error("history state norm deviates by {deviation:.3e} (tolerance 1e-9)")]
    HistoryNorm { deviation: f64 },
    #[error("history evaluated at t = {t} outside [{lo}, {hi}]")]
    HistoryOutOfRange { t: f64, lo: f64, hi: f64 },
    #[error("dense evaluation at t = {t} outside [{t0}, {t_end}]")]
    EvalOutOfRange { t: f64, t0: f64, t_end: f64 },
    #[error(
        "norm drift {max_deviation:.3e} exceeded budget {budget:.3e} at t = {time}; \
         partial trajectory retained"
    )]
    Drift {
        max_deviation: f64,
        budget: f64,
        time: f64,
        partial: Box<Trajectory>,
    },
    #[error("run would store {needed} state scalars, over the budget {budget}")]
    BudgetExceeded { needed: usize, budget: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Time-stepping scheme. Euler is kept as a low-order cross-check oracle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Rk4,
    Euler,
}

/// Per-step sphere projection policy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Projection {
    Off,
    EveryStep,
}

/// Default norm drift budget with projection off.
pub const DEFAULT_NORM_BUDGET: f64 = 1e-7;

/// Default cap on stored state scalars (states + derivatives), about 640 MB.
pub const DEFAULT_MEMORY_BUDGET: usize = 20_000_000;

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub h: f64,
    pub t_end: f64,
    pub projection: Projection,
    pub norm_budget: f64,
    pub scheme: Scheme,
    /// Upper bound on stored Complex64 scalars across states and derivatives.
    pub memory_budget: usize,
}

impl IntegratorConfig {
    pub fn new(h: f64, t_end: f64) -> Result<Self, IntegrateError> {
        if !(h > 0.0) || !h.is_finite() {
            return Err(IntegrateError::InvalidConfig(format!(
                "step size {h} must be positive and finite"
            )));
        }
        if !(t_end > 0.0) || !t_end.is_finite() {
            return Err(IntegrateError::InvalidConfig(format!(
                "horizon {t_end} must be positive and finite"
            )));
        }
        Ok(Self {
            h,
            t_end,
            projection: Projection::Off,
            norm_budget: DEFAULT_NORM_BUDGET,
            scheme: Scheme::Rk4,
            memory_budget: DEFAULT_MEMORY_BUDGET,
        })
    }

    pub fn with_projection(mut self, projection: Projection) -> Self {
        self.projection = projection;
        self
    }

    pub fn with_norm_budget(mut self, budget: f64) -> Self {
        self.norm_budget = budget;
        self
    }

    pub fn with_scheme(mut self, scheme: Scheme) -> Self {
        self.scheme = scheme;
        self
    }

    /// Snaps the step to divide `tau` exactly (adjusting downward) and counts
    /// the steps to reach at least `t_end`.
    pub fn resolve(&self, tau: f64) -> Result<ResolvedGrid, IntegrateError> {
        let (h, m, adjusted) = if tau > 0.0 {
            let ratio = tau / self.h;
            let m = (ratio - 1e-9).ceil().max(1.0);
            if m > 1e8 {
                return Err(IntegrateError::InvalidConfig(format!(
                    "delay/step ratio {m} is unreasonably large"
                )));
            }
            let m = m as usize;
            let h = tau / m as f64;
            (h, m, (ratio - m as f64).abs() > 1e-9)
        } else {
            (self.h, 0, false)
        };
        let n_steps = ((self.t_end / h) - 1e-9).ceil().max(1.0) as usize;
        Ok(ResolvedGrid {
            h,
            m,
            n_steps,
            h_requested: self.h,
            h_adjusted: adjusted,
        })
    }
}

/// The actual integration grid after snapping h to the delay.
#[derive(Debug, Clone, Copy)]
pub struct ResolvedGrid {
    pub h: f64,
    /// Steps per delay: τ = m·h (0 when τ = 0).
    pub m: usize,
    pub n_steps: usize,
    pub h_requested: f64,
    pub h_adjusted: bool,
}

/// Initial data on [−τ, 0].
#[derive(Debug, Clone)]
pub enum HistoryFn {
    /// The same ensemble everywhere on [−τ, 0].
    Constant(Ensemble),
    /// Samples interpolated piecewise-linearly and renormalized onto the
    /// sphere; sample times must be strictly increasing and cover [−τ, 0].
    Sampled {
        times: Vec<f64>,
        states: Vec<Ensemble>,
    },
    /// Seeded random constant history with diameter at most `spread`.
    Generator {
        seed: u64,
        n: usize,
        d: usize,
        spread: f64,
        real: bool,
    },
}

impl HistoryFn {
    pub fn materialize(&self, tau: f64) -> Result<History, IntegrateError> {
        const HISTORY_NORM_TOL: f64 = 1e-9;
        match self {
            HistoryFn::Constant(e) => {
                let dev = e.max_norm_deviation();
                if dev > HISTORY_NORM_TOL {
                    return Err(IntegrateError::HistoryNorm { deviation: dev });
                }
                Ok(History {
                    tau,
                    n: e.n(),
                    d: e.dim(),
                    kind: HistoryKind::Constant(e.flat().to_vec()),
                })
            }
            HistoryFn::Sampled { times, states } => {
                if times.len() != states.len() || times.is_empty() {
                    return Err(IntegrateError::HistoryCoverage(
                        "need equally many sample times and states".into(),
                    ));
                }
                if times.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(IntegrateError::HistoryCoverage(
                        "sample times must be strictly increasing".into(),
                    ));
                }
                if times[0] > -tau + 1e-12 && tau > 0.0 {
                    return Err(IntegrateError::HistoryCoverage(format!(
                        "first sample {} is after -tau = {}",
                        times[0], -tau
                    )));
                }
                if *times.last().unwrap() < -1e-12 {
                    return Err(IntegrateError::HistoryCoverage(format!(
                        "last sample {} does not reach 0",
                        times.last().unwrap()
                    )));
                }
                let n = states[0].n();
                let d = states[0].dim();
                for e in states {
                    if e.n() != n || e.dim() != d {
                        return Err(IntegrateError::HistoryCoverage(
                            "sample ensembles have mixed shapes".into(),
                        ));
                    }
                    let dev = e.max_norm_deviation();
                    if dev > HISTORY_NORM_TOL {
                        return Err(IntegrateError::HistoryNorm { deviation: dev });
                    }
                }
                Ok(History {
                    tau,
                    n,
                    d,
                    kind: HistoryKind::Sampled {
                        times: times.clone(),
                        states: states.iter().map(|e| e.flat().to_vec()).collect(),
                    },
                })
            }
            HistoryFn::Generator {
                seed,
                n,
                d,
                spread,
                real,
            } => {
                let e = if *real {
                    crate::sphere::random_real_ensemble(*seed, *n, *d, *spread)
                } else {
                    random_ensemble(*seed, *n, *d, *spread)
                }
                .map_err(|e| IntegrateError::HistoryCoverage(e.to_string()))?;
                Ok(History {
                    tau,
                    n: *n,
                    d: *d,
                    kind: HistoryKind::Constant(e.flat().to_vec()),
                })
            }
        }
    }
}

#[derive(Debug, Clone)]
enum HistoryKind {
    Constant(Vec<C64>),
    Sampled {
        times: Vec<f64>,
        states: Vec<Vec<C64>>,
    },
}

/// Materialized, validated history covering [−τ, 0].
#[derive(Debug, Clone)]
pub struct History {
    tau: f64,
    n: usize,
    d: usize,
    kind: HistoryKind,
}

impl History {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    /// Evaluates the history at t ∈ [−τ, 0] (tight range check; no
    /// extrapolation on either side).
    pub fn eval(&self, t: f64) -> Result<Vec<C64>, IntegrateError> {
        let slack = 1e-9 * self.tau.max(1.0);
        if t < -self.tau - slack || t > slack {
            return Err(IntegrateError::HistoryOutOfRange {
                t,
                lo: -self.tau,
                hi: 0.0,
            });
        }
        match &self.kind {
            HistoryKind::Constant(data) => Ok(data.clone()),
            HistoryKind::Sampled { times, states } => {
                let t = t.clamp(times[0], *times.last().unwrap());
                let idx = match times.binary_search_by(|x| x.partial_cmp(&t).unwrap()) {
                    Ok(i) => return Ok(states[i].clone()),
                    Err(i) => i,
                };
                // t lies strictly inside (times[idx-1], times[idx]).
                let (t0, t1) = (times[idx - 1], times[idx]);
                let w = (t - t0) / (t1 - t0);
                let mut out = Vec::with_capacity(self.n * self.d);
                for j in 0..self.n {
                    let a = &states[idx - 1][j * self.d..(j + 1) * self.d];
                    let b = &states[idx][j * self.d..(j + 1) * self.d];
                    let mut v: Vec<C64> = a
                        .iter()
                        .zip(b.iter())
                        .map(|(x, y)| x * (1.0 - w) + y * w)
                        .collect();
                    // Chords leave the sphere; renormalize to keep evaluated
                    // history states unit within tolerance.
                    let norm = norm_slice(&v);
                    for c in v.iter_mut() {
                        *c /= norm;
                    }
                    out.extend_from_slice(&v);
                }
                Ok(out)
            }
        }
    }
}

/// Stored solution on the uniform grid t_n = n·h, with node derivatives for
/// cubic-Hermite dense output and the originating history for delayed
/// evaluations on [−τ, 0].
#[derive(Debug, Clone)]
pub struct Trajectory {
    n: usize,
    d: usize,
    h: f64,
    tau: f64,
    m: usize,
    h_requested: f64,
    h_adjusted: bool,
    scheme: Scheme,
    times: Vec<f64>,
    states: Vec<Vec<C64>>,
    derivs: Vec<Vec<C64>>,
    max_drift: f64,
    history: History,
}

impl Trajectory {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    /// Steps per delay (τ = m·h; zero for undelayed runs).
    pub fn steps_per_delay(&self) -> usize {
        self.m
    }

    pub fn h_requested(&self) -> f64 {
        self.h_requested
    }

    pub fn h_adjusted(&self) -> bool {
        self.h_adjusted
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn node_count(&self) -> usize {
        self.times.len()
    }

    pub fn node_time(&self, i: usize) -> f64 {
        self.times[i]
    }

    pub fn node_state(&self, i: usize) -> &[C64] {
        &self.states[i]
    }

    pub fn node_deriv(&self, i: usize) -> &[C64] {
        &self.derivs[i]
    }

    pub fn node_ensemble(&self, i: usize) -> Ensemble {
        Ensemble::from_flat(self.times[i], self.n, self.d, self.states[i].clone())
    }

    pub fn final_time(&self) -> f64 {
        *self.times.last().unwrap()
    }

    pub fn final_ensemble(&self) -> Ensemble {
        self.node_ensemble(self.times.len() - 1)
    }

    /// Largest |‖z_j‖ − 1| over all stored nodes.
    pub fn max_drift(&self) -> f64 {
        self.max_drift
    }

    pub fn history(&self) -> &History {
        &self.history
    }

    /// Delayed state for grid node i: the stored node i − m, or the history
    /// when the delayed time falls at or before the initial node. Index
    /// arithmetic only, so node alignment is exact.
    pub fn delayed_node_state(&self, i: usize) -> Result<Vec<C64>, IntegrateError> {
        let idx = i as i64 - self.m as i64;
        if idx >= 0 {
            Ok(self.states[idx as usize].clone())
        } else {
            self.history.eval(idx as f64 * self.h)
        }
    }

    /// Dense evaluation on [0, t_end]. Grid nodes return the stored ensemble
    /// bitwise; interior points use cubic Hermite interpolation on the
    /// enclosing segment (locally O(h⁴) for the RK4 scheme).
    pub fn dense_eval(&self, t: f64) -> Result<Ensemble, IntegrateError> {
        let t_end = self.final_time();
        let slack = 1e-9 * self.h.max(1.0);
        if t < -slack || t > t_end + slack {
            return Err(IntegrateError::EvalOutOfRange { t, t0: 0.0, t_end });
        }
        let nearest = (t / self.h).round();
        if nearest >= 0.0 && (nearest as usize) < self.times.len() {
            let i = nearest as usize;
            if self.times[i] == t {
                return Ok(self.node_ensemble(i));
            }
        }
        let seg = ((t / self.h).floor().max(0.0) as usize).min(self.times.len() - 2);
        let sigma = ((t - self.times[seg]) / self.h).clamp(0.0, 1.0);
        let mut out = vec![C64::new(0.0, 0.0); self.n * self.d];
        hermite_eval(
            &self.states[seg],
            &self.derivs[seg],
            &self.states[seg + 1],
            &self.derivs[seg + 1],
            self.h,
            sigma,
            &mut out,
        );
        Ok(Ensemble::from_flat(t, self.n, self.d, out))
    }

    /// Evaluation extended to [−τ, t_end]: negative times read the history.
    pub fn eval_extended(&self, t: f64) -> Result<Ensemble, IntegrateError> {
        if t < 0.0 {
            let data = self.history.eval(t)?;
            Ok(Ensemble::from_flat(t, self.n, self.d, data))
        } else {
            self.dense_eval(t)
        }
    }

    /// Writes the trajectory as CSV with header
    /// `t,j,re_z0,..,re_z{d-1},im_z0,..,im_z{d-1}`, 17 significant digits,
    /// one row per (node, particle), emitting every `stride`-th node (the
    /// final node always included).
    pub fn write_csv(&self, out: &mut impl Write, stride: usize) -> std::io::Result<()> {
        let stride = stride.max(1);
        write!(out, "t,j")?;
        for alpha in 0..self.d {
            write!(out, ",re_z{alpha}")?;
        }
        for alpha in 0..self.d {
            write!(out, ",im_z{alpha}")?;
        }
        writeln!(out)?;
        let last = self.times.len() - 1;
        for i in (0..self.times.len()).step_by(stride).chain(
            if last % stride != 0 { Some(last) } else { None },
        ) {
            for j in 0..self.n {
                write!(out, "{:.16e},{j}", self.times[i])?;
                let state = &self.states[i][j * self.d..(j + 1) * self.d];
                for c in state {
                    write!(out, ",{:.16e}", c.re)?;
                }
                for c in state {
                    write!(out, ",{:.16e}", c.im)?;
                }
                writeln!(out)?;
            }
        }
        Ok(())
    }
}

/// Cubic Hermite basis on one segment: exact at σ = 0 and σ = 1.
fn hermite_eval(
    y0: &[C64],
    f0: &[C64],
    y1: &[C64],
    f1: &[C64],
    h: f64,
    sigma: f64,
    out: &mut [C64],
) {
    let s2 = sigma * sigma;
    let s3 = s2 * sigma;
    let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
    let h10 = s3 - 2.0 * s2 + sigma;
    let h01 = -2.0 * s3 + 3.0 * s2;
    let h11 = s3 - s2;
    for i in 0..out.len() {
        out[i] = y0[i] * h00 + f0[i] * (h10 * h) + y1[i] * h01 + f1[i] * (h11 * h);
    }
}

/// Stage offsets used by the classical scheme.
#[derive(Clone, Copy, PartialEq)]
enum StageOffset {
    Zero,
    Half,
    One,
}

struct StepContext<'a> {
    history: &'a History,
    states: &'a [Vec<C64>],
    derivs: &'a [Vec<C64>],
    h: f64,
    m: usize,
}

impl StepContext<'_> {
    /// Delayed ensemble for stage t_n + c·h, resolved on segment n − m.
    fn delayed(&self, n: usize, c: StageOffset) -> Result<Vec<C64>, IntegrateError> {
        let base = n as i64 - self.m as i64;
        match c {
            StageOffset::Zero => self.node_or_history(base),
            StageOffset::One => self.node_or_history(base + 1),
            StageOffset::Half => {
                if base >= 0 {
                    let i = base as usize;
                    let mut out = vec![C64::new(0.0, 0.0); self.states[i].len()];
                    hermite_eval(
                        &self.states[i],
                        &self.derivs[i],
                        &self.states[i + 1],
                        &self.derivs[i + 1],
                        self.h,
                        0.5,
                        &mut out,
                    );
                    Ok(out)
                } else {
                    self.history.eval((base as f64 + 0.5) * self.h)
                }
            }
        }
    }

    fn node_or_history(&self, idx: i64) -> Result<Vec<C64>, IntegrateError> {
        if idx >= 0 {
            Ok(self.states[idx as usize].clone())
        } else {
            self.history.eval(idx as f64 * self.h)
        }
    }
}

fn axpy(y: &[C64], a: f64, x: &[C64]) -> Vec<C64> {
    y.iter().zip(x.iter()).map(|(u, v)| u + v * a).collect()
}

/// Integrates the model from the history's value at t = 0 up to at least
/// `config.t_end` (the horizon rounds up to a whole number of steps).
pub fn integrate(
    params: &ModelParams,
    history: &HistoryFn,
    config: &IntegratorConfig,
) -> Result<Trajectory, IntegrateError> {
    let tau = params.tau();
    let grid = config.resolve(tau)?;
    let history = history.materialize(tau)?;
    if history.n() != params.n() || history.dim() != params.dim() {
        return Err(IntegrateError::HistoryCoverage(format!(
            "history shape {}x{} does not match model {}x{}",
            history.n(),
            history.dim(),
            params.n(),
            params.dim()
        )));
    }
    let n = params.n();
    let d = params.dim();
    let needed = 2 * (grid.n_steps + 1) * n * d;
    if needed > config.memory_budget {
        return Err(IntegrateError::BudgetExceeded {
            needed,
            budget: config.memory_budget,
        });
    }

    let h = grid.h;
    let mut times = Vec::with_capacity(grid.n_steps + 1);
    let mut states: Vec<Vec<C64>> = Vec::with_capacity(grid.n_steps + 1);
    let mut derivs: Vec<Vec<C64>> = Vec::with_capacity(grid.n_steps + 1);
    times.push(0.0);
    states.push(history.eval(0.0)?);
    let mut max_drift = Ensemble::from_flat(0.0, n, d, states[0].clone()).max_norm_deviation();

    let eval_rhs = |t: f64, y: &[C64], delayed: &[C64]| -> Result<Vec<C64>, IntegrateError> {
        let current = Ensemble::from_flat(t, n, d, y.to_vec());
        let delayed = Ensemble::from_flat(t - tau, n, d, delayed.to_vec());
        Ok(rhs_for_form(&current, &delayed, params)?.flat().to_vec())
    };

    for step in 0..grid.n_steps {
        let t_n = step as f64 * h;
        let y_n = states[step].clone();
        let ctx = StepContext {
            history: &history,
            states: &states,
            derivs: &derivs,
            h,
            m: grid.m,
        };
        // k1 doubles as the stored node derivative.
        let k1 = if tau > 0.0 {
            let zd = ctx.delayed(step, StageOffset::Zero)?;
            eval_rhs(t_n, &y_n, &zd)?
        } else {
            eval_rhs(t_n, &y_n, &y_n)?
        };
        derivs.push(k1.clone());

        let mut y_next = match config.scheme {
            Scheme::Euler => axpy(&y_n, h, &k1),
            Scheme::Rk4 => {
                let ctx = StepContext {
                    history: &history,
                    states: &states,
                    derivs: &derivs,
                    h,
                    m: grid.m,
                };
                let half = 0.5 * h;
                let y2 = axpy(&y_n, half, &k1);
                let k2 = if tau > 0.0 {
                    let zd = ctx.delayed(step, StageOffset::Half)?;
                    eval_rhs(t_n + half, &y2, &zd)?
                } else {
                    eval_rhs(t_n + half, &y2, &y2)?
                };
                let y3 = axpy(&y_n, half, &k2);
                let k3 = if tau > 0.0 {
                    let zd = ctx.delayed(step, StageOffset::Half)?;
                    eval_rhs(t_n + half, &y3, &zd)?
                } else {
                    eval_rhs(t_n + half, &y3, &y3)?
                };
                let y4 = axpy(&y_n, h, &k3);
                let k4 = if tau > 0.0 {
                    let zd = ctx.delayed(step, StageOffset::One)?;
                    eval_rhs(t_n + h, &y4, &zd)?
                } else {
                    eval_rhs(t_n + h, &y4, &y4)?
                };
                let sixth = h / 6.0;
                let mut y = y_n.clone();
                for i in 0..y.len() {
                    y[i] += (k1[i] + (k2[i] + k3[i]) * 2.0 + k4[i]) * sixth;
                }
                y
            }
        };

        let t_next = (step + 1) as f64 * h;
        let mut next = Ensemble::from_flat(t_next, n, d, y_next);
        if config.projection == Projection::EveryStep {
            next.project();
        }
        let dev = next.max_norm_deviation();
        max_drift = max_drift.max(dev);
        y_next = next.flat().to_vec();
        times.push(t_next);
        states.push(y_next);

        if config.projection == Projection::Off && dev > config.norm_budget {
            // Finish the node derivative so the partial trajectory supports
            // dense output, then abort.
            let ctx = StepContext {
                history: &history,
                states: &states,
                derivs: &derivs,
                h,
                m: grid.m,
            };
            let y_last = states.last().unwrap().clone();
            let k_last = if tau > 0.0 {
                let zd = ctx.delayed(step + 1, StageOffset::Zero)?;
                eval_rhs(t_next, &y_last, &zd)?
            } else {
                eval_rhs(t_next, &y_last, &y_last)?
            };
            derivs.push(k_last);
            return Err(IntegrateError::Drift {
                max_deviation: dev,
                budget: config.norm_budget,
                time: t_next,
                partial: Box::new(Trajectory {
                    n,
                    d,
                    h,
                    tau,
                    m: grid.m,
                    h_requested: grid.h_requested,
                    h_adjusted: grid.h_adjusted,
                    scheme: config.scheme,
                    times,
                    states,
                    derivs,
                    max_drift,
                    history,
                }),
            });
        }
    }

    // Derivative at the final node (completes the last dense segment).
    let last = grid.n_steps;
    let ctx = StepContext {
        history: &history,
        states: &states,
        derivs: &derivs,
        h,
        m: grid.m,
    };
    let y_last = states[last].clone();
    let k_last = if tau > 0.0 {
        let zd = ctx.delayed(last, StageOffset::Zero)?;
        eval_rhs(times[last], &y_last, &zd)?
    } else {
        eval_rhs(times[last], &y_last, &y_last)?
    };
    derivs.push(k_last);

    Ok(Trajectory {
        n,
        d,
        h,
        tau,
        m: grid.m,
        h_requested: grid.h_requested,
        h_adjusted: grid.h_adjusted,
        scheme: config.scheme,
        times,
        states,
        derivs,
        max_drift,
        history,
    })
}

/// Fixed scenarios for scheme qualification.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CannedScenario {
    /// One particle under a planar rotation; closed form (cos t, sin t).
    LinearRotation,
    /// Four delayed gradient-flow particles; reference is the same scheme at
    /// the finest step divided by 64.
    DelayedSl,
}

fn rotation_params() -> ModelParams {
    ModelParams::general(
        1,
        2,
        0.0,
        0.0,
        0.0,
        crate::model::OmegaSpec::Common(SkewHermitian::rotation_2d(1.0)),
        crate::model::CouplingGraph::Complete,
    )
    .expect("static scenario parameters are valid")
}

fn rotation_history() -> HistoryFn {
    let state = crate::sphere::ComplexVec::from_real(&[1.0, 0.0]).unwrap();
    HistoryFn::Constant(Ensemble::new(0.0, &[state], 1e-12).unwrap())
}

fn rotation_error(scheme: Scheme, h: f64) -> Result<f64, IntegrateError> {
    let mut config = IntegratorConfig::new(h, 1.0)?.with_scheme(scheme);
    // Euler drifts off the sphere at first order; that drift is the scheme's
    // error, not a fault to abort on.
    config.norm_budget = f64::INFINITY;
    let traj = integrate(&rotation_params(), &rotation_history(), &config)?;
    let t = traj.final_time();
    let reference = [C64::new(t.cos(), 0.0), C64::new(t.sin(), 0.0)];
    Ok(dist_slices(traj.final_ensemble().state(0), &reference))
}

fn delayed_sl_error(scheme: Scheme, h: f64, h_ref: f64) -> Result<f64, IntegrateError> {
    let params = ModelParams::sl(4, 2, 1.0, 0.1).map_err(IntegrateError::Model)?;
    let history = HistoryFn::Generator {
        seed: 2026,
        n: 4,
        d: 2,
        spread: 0.5,
        real: false,
    };
    let mut config = IntegratorConfig::new(h, 2.0)?.with_scheme(scheme);
    config.norm_budget = f64::INFINITY;
    let traj = integrate(&params, &history, &config)?;
    let mut ref_config = IntegratorConfig::new(h_ref, 2.0)?.with_scheme(scheme);
    ref_config.norm_budget = f64::INFINITY;
    let reference = integrate(&params, &history, &ref_config)?;
    let at = reference.dense_eval(traj.final_time())?;
    let e = traj.final_ensemble();
    let mut err = 0.0f64;
    for j in 0..e.n() {
        err = err.max(dist_slices(e.state(j), at.state(j)));
    }
    Ok(err)
}

/// Measures the observed convergence order of `scheme` on a canned scenario:
/// the least-squares slope of log error against log step size.
pub fn convergence_order(
    scenario: CannedScenario,
    scheme: Scheme,
    steps: &[f64],
) -> Result<f64, IntegrateError> {
    if steps.len() < 2 {
        return Err(IntegrateError::InvalidConfig(
            "need at least two step sizes".into(),
        ));
    }
    let mut points = Vec::with_capacity(steps.len());
    match scenario {
        CannedScenario::LinearRotation => {
            for &h in steps {
                points.push((h.ln(), rotation_error(scheme, h)?.ln()));
            }
        }
        CannedScenario::DelayedSl => {
            let h_ref = steps.iter().copied().fold(f64::INFINITY, f64::min) / 64.0;
            for &h in steps {
                points.push((h.ln(), delayed_sl_error(scheme, h, h_ref)?.ln()));
            }
        }
    }
    let k = points.len() as f64;
    let sx: f64 = points.iter().map(|p| p.0).sum();
    let sy: f64 = points.iter().map(|p| p.1).sum();
    let sxx: f64 = points.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = points.iter().map(|p| p.0 * p.1).sum();
    Ok((k * sxy - sx * sy) / (k * sxx - sx * sx))
}
