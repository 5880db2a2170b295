//! Run orchestration: configuration ingestion with materialized defaults,
//! single adjudicated runs, parameter sweeps, the reduction comparison
//! (complex model vs. its real restriction vs. the phase form), and the
//! splitting check
//!
//! ```text
//! z_j(t) = e^{Ωt} w_j(t)
//! ```
//!
//! for zero delay under a common free flow.

use crate::diagnostics::{
    compute_series, diameter, gram_defect, order_parameter, tail_sup, DiagnosticsError,
    DiagnosticsSeries, SeriesOptions,
};
use crate::integrator::{
    integrate, History, HistoryFn, IntegrateError, IntegratorConfig, Projection, Scheme,
};
use crate::model::{
    rhs_kuramoto, CouplingGraph, ModelError, ModelParams, OmegaSpec,
};
use crate::sphere::{
    dist_slices, Adjacency, ComplexVec, Ensemble, SkewHermitian, SphereError, C64,
    UNIT_NORM_TOL,
};
use crate::theorem::{check_gate, gamma_constant, GateId, Prediction, TheoremReport};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Sphere(#[from] SphereError),
    #[error(transparent)]
    Integrate(#[from] IntegrateError),
    #[error(transparent)]
    Diagnostics(#[from] DiagnosticsError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("sweep grid has {size} points, cap is {cap}")]
    GridTooLarge { size: usize, cap: usize },
    #[error("unknown sweep axis `{0}`")]
    UnknownAxis(String),
}

fn default_cap() -> usize {
    1024
}

fn default_complete_tol() -> f64 {
    1e-5
}

fn default_practical_slack() -> f64 {
    0.02
}

fn default_tail_window() -> f64 {
    0.2
}

/// Which right-hand-side family the run uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FormConfig {
    #[default]
    General,
    Sl,
    CloseSl,
    LsReal,
    Kuramoto,
}

/// Free-flow family, buildable from plain numbers.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OmegaConfig {
    #[default]
    Zero,
    /// One shared planar rotation with frequency ν (d = 2).
    #[serde(rename = "rotation_2d")]
    Rotation2d { nu: f64 },
    /// Per-particle planar rotations (d = 2).
    #[serde(rename = "rotations_2d")]
    Rotations2d { nus: Vec<f64> },
    /// One shared random skew-Hermitian matrix with the given ∞-norm.
    RandomCommon { seed: u64, inf_norm: f64 },
    /// Independent random skew-Hermitian matrices, one per particle.
    Random { seed: u64, inf_norm: f64 },
}

impl OmegaConfig {
    fn build(&self, n: usize, d: usize) -> Result<OmegaSpec, HarnessError> {
        Ok(match self {
            OmegaConfig::Zero => OmegaSpec::Zero,
            OmegaConfig::Rotation2d { nu } => {
                OmegaSpec::Common(SkewHermitian::rotation_2d(*nu))
            }
            OmegaConfig::Rotations2d { nus } => {
                if nus.len() != n {
                    return Err(HarnessError::Config(format!(
                        "expected {n} rotation frequencies, got {}",
                        nus.len()
                    )));
                }
                OmegaSpec::PerParticle(
                    nus.iter().map(|&nu| SkewHermitian::rotation_2d(nu)).collect(),
                )
            }
            OmegaConfig::RandomCommon { seed, inf_norm } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                OmegaSpec::Common(SkewHermitian::random(&mut rng, d, *inf_norm))
            }
            OmegaConfig::Random { seed, inf_norm } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                OmegaSpec::PerParticle(
                    (0..n)
                        .map(|_| SkewHermitian::random(&mut rng, d, *inf_norm))
                        .collect(),
                )
            }
        })
    }
}

/// Coupling network, buildable from plain numbers.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AdjacencyConfig {
    #[default]
    Complete,
    Weighted { rows: Vec<Vec<f64>> },
}

impl AdjacencyConfig {
    fn build(&self) -> Result<CouplingGraph, HarnessError> {
        Ok(match self {
            AdjacencyConfig::Complete => CouplingGraph::Complete,
            AdjacencyConfig::Weighted { rows } => {
                CouplingGraph::Weighted(Adjacency::new(rows)?)
            }
        })
    }
}

/// Model block of a run configuration. Exactly one of `kappa1` and
/// `tilde_kappa` picks the second gain on the general form; the derived forms
/// fix it themselves and reject explicit values.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub n: usize,
    pub d: usize,
    pub kappa0: f64,
    #[serde(default)]
    pub kappa1: Option<f64>,
    #[serde(default)]
    pub tilde_kappa: Option<f64>,
    pub tau: f64,
    #[serde(default)]
    pub form: FormConfig,
    #[serde(default)]
    pub omega: OmegaConfig,
    #[serde(default)]
    pub adjacency: AdjacencyConfig,
    /// Phase-form frequencies ν_j; required (and only allowed) for `kuramoto`.
    #[serde(default)]
    pub frequencies: Option<Vec<f64>>,
}

impl ModelConfig {
    pub fn build(&self) -> Result<ModelParams, HarnessError> {
        if self.frequencies.is_some() && self.form != FormConfig::Kuramoto {
            return Err(HarnessError::Config(
                "frequencies are only meaningful on the kuramoto form".into(),
            ));
        }
        let reject_gain_overrides = |form: &str| -> Result<(), HarnessError> {
            if self.kappa1.is_some() {
                return Err(HarnessError::Config(format!(
                    "{form} derives kappa1; remove the explicit value"
                )));
            }
            Ok(())
        };
        match self.form {
            FormConfig::Sl => {
                reject_gain_overrides("the sl form")?;
                if self.tilde_kappa.is_some() {
                    return Err(HarnessError::Config(
                        "the sl form has tilde_kappa = 0 by construction".into(),
                    ));
                }
                Ok(ModelParams::sl(self.n, self.d, self.kappa0, self.tau)?)
            }
            FormConfig::CloseSl => {
                reject_gain_overrides("the close_sl form")?;
                let tilde = self.tilde_kappa.ok_or_else(|| {
                    HarnessError::Config("the close_sl form requires tilde_kappa".into())
                })?;
                Ok(ModelParams::close_sl(
                    self.n, self.d, self.kappa0, tilde, self.tau,
                )?)
            }
            FormConfig::LsReal => {
                reject_gain_overrides("the ls_real form")?;
                if self.tilde_kappa.is_some() {
                    return Err(HarnessError::Config(
                        "the ls_real form has kappa1 = 0; tilde_kappa is not free".into(),
                    ));
                }
                let omegas = self.omega.build(self.n, self.d)?;
                let graph = self.adjacency.build()?;
                Ok(ModelParams::ls_real(
                    self.n, self.d, self.kappa0, self.tau, omegas, graph,
                )?)
            }
            FormConfig::Kuramoto => {
                reject_gain_overrides("the kuramoto form")?;
                if self.d != 2 {
                    return Err(HarnessError::Config(
                        "the kuramoto form lives in d = 2".into(),
                    ));
                }
                let nus = self.frequencies.as_ref().ok_or_else(|| {
                    HarnessError::Config("the kuramoto form requires frequencies".into())
                })?;
                Ok(ModelParams::kuramoto(self.n, self.kappa0, nus, self.tau)?)
            }
            FormConfig::General => {
                let kappa1 = match (self.kappa1, self.tilde_kappa) {
                    (Some(k1), None) => k1,
                    (None, Some(tk)) => tk - self.kappa0 / 2.0,
                    (Some(_), Some(_)) => {
                        return Err(HarnessError::Config(
                            "give kappa1 or tilde_kappa, not both".into(),
                        ))
                    }
                    (None, None) => {
                        return Err(HarnessError::Config(
                            "the general form needs kappa1 or tilde_kappa".into(),
                        ))
                    }
                };
                let omegas = self.omega.build(self.n, self.d)?;
                let graph = self.adjacency.build()?;
                Ok(ModelParams::general(
                    self.n, self.d, self.kappa0, kappa1, self.tau, omegas, graph,
                )?)
            }
        }
    }
}

/// Initial data on [−τ, 0]. Complex components serialize as [re, im] pairs.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum HistoryConfig {
    Constant {
        states: Vec<Vec<C64>>,
    },
    Generator {
        seed: u64,
        spread: f64,
        #[serde(default)]
        real: bool,
    },
    Sampled {
        times: Vec<f64>,
        states: Vec<Vec<Vec<C64>>>,
    },
}

fn ensemble_from_rows(
    time: f64,
    rows: &[Vec<C64>],
    n: usize,
) -> Result<Ensemble, HarnessError> {
    if rows.len() != n {
        return Err(HarnessError::Config(format!(
            "expected {n} states, got {}",
            rows.len()
        )));
    }
    let vecs = rows
        .iter()
        .map(|r| ComplexVec::unit(r.clone(), UNIT_NORM_TOL))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Ensemble::new(time, &vecs, UNIT_NORM_TOL)?)
}

impl HistoryConfig {
    pub fn build(&self, p: &ModelParams) -> Result<HistoryFn, HarnessError> {
        Ok(match self {
            HistoryConfig::Constant { states } => {
                HistoryFn::Constant(ensemble_from_rows(0.0, states, p.n())?)
            }
            HistoryConfig::Generator { seed, spread, real } => HistoryFn::Generator {
                seed: *seed,
                n: p.n(),
                d: p.dim(),
                spread: *spread,
                real: *real,
            },
            HistoryConfig::Sampled { times, states } => {
                let ensembles = times
                    .iter()
                    .zip(states)
                    .map(|(&t, rows)| ensemble_from_rows(t, rows, p.n()))
                    .collect::<Result<Vec<_>, _>>()?;
                HistoryFn::Sampled {
                    times: times.clone(),
                    states: ensembles,
                }
            }
        })
    }
}

/// Integrator overrides; unspecified fields take the documented defaults
/// h = min(1e-3, τ/10) (snapped to divide τ) and t_end = 100/κ₀.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IntegratorOverrides {
    pub h: Option<f64>,
    pub t_end: Option<f64>,
    pub projection: Option<Projection>,
    pub norm_budget: Option<f64>,
    pub scheme: Option<Scheme>,
    pub memory_budget: Option<usize>,
}

impl IntegratorOverrides {
    pub fn materialize(&self, p: &ModelParams) -> Result<IntegratorConfig, HarnessError> {
        let h = self.h.unwrap_or_else(|| {
            if p.tau() > 0.0 {
                (1e-3f64).min(p.tau() / 10.0)
            } else {
                1e-3
            }
        });
        let t_end = match self.t_end {
            Some(t) => t,
            None if p.kappa0() > 0.0 => 100.0 / p.kappa0(),
            None => {
                return Err(HarnessError::Config(
                    "t_end is required when kappa0 <= 0".into(),
                ))
            }
        };
        let mut config = IntegratorConfig::new(h, t_end)?;
        if let Some(projection) = self.projection {
            config = config.with_projection(projection);
        }
        if let Some(budget) = self.norm_budget {
            config = config.with_norm_budget(budget);
        }
        if let Some(scheme) = self.scheme {
            config = config.with_scheme(scheme);
        }
        if let Some(memory) = self.memory_budget {
            config.memory_budget = memory;
        }
        Ok(config)
    }
}

/// Diagnostics selection. `gamma` defaults to (κ₀ + 2|κ̃|)/N when the
/// Lyapunov columns are requested without an explicit weight.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DiagnosticsConfig {
    pub stride: usize,
    pub lyapunov: bool,
    pub gamma: Option<f64>,
}

impl Default for DiagnosticsConfig {
    fn default() -> Self {
        Self {
            stride: 1,
            lyapunov: false,
            gamma: None,
        }
    }
}

impl DiagnosticsConfig {
    fn options(&self, p: &ModelParams) -> SeriesOptions {
        let gamma = if self.lyapunov || self.gamma.is_some() {
            Some(self.gamma.unwrap_or_else(|| gamma_constant(p)))
        } else {
            None
        };
        SeriesOptions {
            stride: self.stride,
            lyapunov_gamma: gamma,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    /// Emit every k-th node into trajectory.csv.
    pub trajectory_stride: usize,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            trajectory_stride: 1,
        }
    }
}

/// Which gate adjudicates the run, and with what finite-horizon tolerances.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdjudicationConfig {
    pub gate: GateId,
    /// Complete aggregation requires D(Z(t_end)) below this.
    #[serde(default = "default_complete_tol")]
    pub complete_tol: f64,
    /// Practical bound requires tail_sup(Lmax) ≤ x₋ + slack.
    #[serde(default = "default_practical_slack")]
    pub practical_slack: f64,
    /// Fraction of the horizon over which the tail supremum is taken.
    #[serde(default = "default_tail_window")]
    pub tail_window: f64,
}

/// One complete run description; defaults are materialized into the report.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub history: HistoryConfig,
    #[serde(default)]
    pub integrator: IntegratorOverrides,
    #[serde(default)]
    pub diagnostics: DiagnosticsConfig,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub adjudication: Option<AdjudicationConfig>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    Unadjudicated,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
            Verdict::Unadjudicated => "unadjudicated",
        })
    }
}

/// Scalars measured from the actual data, echoed into reports.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct RunMeasurements {
    pub initial_diameter: f64,
    pub initial_defect: f64,
    pub initial_order_parameter: f64,
    pub final_diameter: f64,
    pub tail_sup_lmax: f64,
    pub max_drift: f64,
}

/// Grid and selection values after all defaults were applied.
#[derive(Debug, Clone, Serialize)]
pub struct ResolvedSettings {
    pub h: f64,
    pub h_requested: f64,
    pub steps_per_delay: usize,
    pub node_count: usize,
    pub t_end: f64,
    pub scheme: Scheme,
    pub projection: Projection,
    pub norm_budget: f64,
    pub diagnostics_stride: usize,
    pub trajectory_stride: usize,
    pub lyapunov_gamma: Option<f64>,
}

pub struct RunOutput {
    pub config: RunConfig,
    pub params: ModelParams,
    pub resolved: ResolvedSettings,
    pub trajectory: crate::integrator::Trajectory,
    pub diagnostics: DiagnosticsSeries,
    pub gate: Option<TheoremReport>,
    pub measured: RunMeasurements,
    pub verdict: Verdict,
}

/// sup over [−τ, 0] of the history diameter (101-sample grid), plus the
/// defect maximum and order parameter at t = 0.
fn initial_scalars(
    history: &History,
    tau: f64,
    n: usize,
    d: usize,
) -> Result<(f64, f64, f64), HarnessError> {
    let mut diam0 = 0.0f64;
    let samples = if tau > 0.0 { 101 } else { 1 };
    for k in 0..samples {
        let t = if samples == 1 {
            0.0
        } else {
            -tau + k as f64 * tau / (samples - 1) as f64
        };
        let e = Ensemble::from_flat(t, n, d, history.eval(t)?);
        diam0 = diam0.max(diameter(&e));
    }
    let at_zero = Ensemble::from_flat(0.0, n, d, history.eval(0.0)?);
    let l0 = gram_defect(&at_zero).lmax;
    let rho0 = order_parameter(&at_zero);
    Ok((diam0, l0, rho0))
}

fn adjudicate(
    gate: Option<&TheoremReport>,
    adj: Option<&AdjudicationConfig>,
    final_diameter: f64,
    tail_sup_lmax: f64,
) -> Verdict {
    match (gate, adj) {
        (Some(report), Some(adj)) => match report.prediction {
            Prediction::CompleteAggregation => {
                if final_diameter < adj.complete_tol {
                    Verdict::Pass
                } else {
                    Verdict::Fail
                }
            }
            Prediction::PracticalBound { x_minus } => {
                if tail_sup_lmax <= x_minus + adj.practical_slack {
                    Verdict::Pass
                } else {
                    Verdict::Fail
                }
            }
            Prediction::NoGuarantee => Verdict::Unadjudicated,
        },
        _ => Verdict::Unadjudicated,
    }
}

/// Evaluates the configured gate on the initial data without integrating.
pub fn check(config: &RunConfig) -> Result<TheoremReport, HarnessError> {
    let adj = config.adjudication.as_ref().ok_or_else(|| {
        HarnessError::Config("gate evaluation needs an adjudication block".into())
    })?;
    let params = config.model.build()?;
    let history_fn = config.history.build(&params)?;
    let history = history_fn.materialize(params.tau())?;
    let (diam0, l0, rho0) = initial_scalars(&history, params.tau(), params.n(), params.dim())?;
    Ok(check_gate(adj.gate, &params, diam0, l0, rho0))
}

/// Integrates one configured run, computes its diagnostics, evaluates the
/// requested gate on the actual initial data, and adjudicates the outcome.
pub fn run(config: &RunConfig) -> Result<RunOutput, HarnessError> {
    let params = config.model.build()?;
    let history_fn = config.history.build(&params)?;
    let integ = config.integrator.materialize(&params)?;
    let history = history_fn.materialize(params.tau())?;
    let (diam0, l0, rho0) = initial_scalars(&history, params.tau(), params.n(), params.dim())?;
    let trajectory = integrate(&params, &history_fn, &integ)?;
    let opts = config.diagnostics.options(&params);
    let diagnostics = compute_series(&trajectory, &opts)?;
    let gate = config
        .adjudication
        .as_ref()
        .map(|a| check_gate(a.gate, &params, diam0, l0, rho0));
    let window = config
        .adjudication
        .as_ref()
        .map_or_else(default_tail_window, |a| a.tail_window);
    let tail = tail_sup(&diagnostics.lmax, window)?;
    let final_diameter = *diagnostics.d.last().unwrap();
    let verdict = adjudicate(gate.as_ref(), config.adjudication.as_ref(), final_diameter, tail);
    let resolved = ResolvedSettings {
        h: trajectory.h(),
        h_requested: trajectory.h_requested(),
        steps_per_delay: trajectory.steps_per_delay(),
        node_count: trajectory.node_count(),
        t_end: trajectory.final_time(),
        scheme: integ.scheme,
        projection: integ.projection,
        norm_budget: integ.norm_budget,
        diagnostics_stride: opts.stride,
        trajectory_stride: config.output.trajectory_stride,
        lyapunov_gamma: opts.lyapunov_gamma,
    };
    let measured = RunMeasurements {
        initial_diameter: diam0,
        initial_defect: l0,
        initial_order_parameter: rho0,
        final_diameter,
        tail_sup_lmax: tail,
        max_drift: trajectory.max_drift(),
    };
    Ok(RunOutput {
        config: config.clone(),
        params,
        resolved,
        trajectory,
        diagnostics,
        gate,
        measured,
        verdict,
    })
}

impl RunOutput {
    /// Self-describing report tree: config echo, materialized settings,
    /// measured scalars, gate evaluation, verdict.
    pub fn report_value(&self) -> Result<serde_json::Value, HarnessError> {
        Ok(serde_json::json!({
            "config": serde_json::to_value(&self.config)?,
            "resolved": serde_json::to_value(&self.resolved)?,
            "measured": serde_json::to_value(&self.measured)?,
            "gate": match &self.gate {
                Some(g) => serde_json::to_value(g)?,
                None => serde_json::Value::Null,
            },
            "verdict": self.verdict.to_string(),
        }))
    }

    /// Flat key=value rendering of the same report.
    pub fn report_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("verdict={}\n", self.verdict));
        out.push_str(&format!(
            "initial_diameter={:.17e}\ninitial_defect={:.17e}\ninitial_order_parameter={:.17e}\n",
            self.measured.initial_diameter,
            self.measured.initial_defect,
            self.measured.initial_order_parameter
        ));
        out.push_str(&format!(
            "final_diameter={:.17e}\ntail_sup_lmax={:.17e}\nmax_drift={:.17e}\n",
            self.measured.final_diameter, self.measured.tail_sup_lmax, self.measured.max_drift
        ));
        out.push_str(&format!(
            "resolved.h={:.17e}\nresolved.t_end={:.17e}\nresolved.steps_per_delay={}\nresolved.node_count={}\n",
            self.resolved.h, self.resolved.t_end, self.resolved.steps_per_delay,
            self.resolved.node_count
        ));
        if let Some(gate) = &self.gate {
            out.push('\n');
            out.push_str(&gate.to_key_values());
        }
        out
    }

    /// Writes trajectory.csv, diagnostics.csv, report.json and report.txt.
    pub fn write_all(&self, dir: &Path) -> Result<(), HarnessError> {
        std::fs::create_dir_all(dir)?;
        let mut traj = BufWriter::new(File::create(dir.join("trajectory.csv"))?);
        self.trajectory
            .write_csv(&mut traj, self.config.output.trajectory_stride)?;
        traj.flush()?;
        let mut diag = BufWriter::new(File::create(dir.join("diagnostics.csv"))?);
        self.diagnostics.write_csv(&mut diag)?;
        diag.flush()?;
        let mut report = BufWriter::new(File::create(dir.join("report.json"))?);
        serde_json::to_writer_pretty(&mut report, &self.report_value()?)?;
        report.flush()?;
        std::fs::write(dir.join("report.txt"), self.report_text())?;
        Ok(())
    }
}

/// One named sweep axis; values apply in order, last axis fastest.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepAxis {
    pub name: String,
    pub values: Vec<f64>,
}

/// Derived-delay rule applied after the axes: τ = 1/(c·κ₀).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TauRule {
    InverseKappa0 { coefficient: f64 },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub base: RunConfig,
    pub axes: Vec<SweepAxis>,
    #[serde(default)]
    pub tau_rule: Option<TauRule>,
    #[serde(default = "default_cap")]
    pub cap: usize,
}

/// One grid point's outcome; failed points carry the error in-row.
#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub index: usize,
    pub values: Vec<(String, f64)>,
    pub tau: f64,
    pub prediction: Option<String>,
    pub tail_sup_lmax: Option<f64>,
    pub x_minus: Option<f64>,
    pub x_plus: Option<f64>,
    pub final_diameter: Option<f64>,
    pub verdict: Verdict,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepTable {
    pub axes: Vec<String>,
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    /// CSV with one row per grid point in deterministic grid order. Error
    /// messages have commas and newlines replaced so rows stay single-line.
    pub fn write_csv(&self, out: &mut impl Write) -> std::io::Result<()> {
        write!(out, "index")?;
        for axis in &self.axes {
            write!(out, ",{axis}")?;
        }
        writeln!(
            out,
            ",tau,prediction,tail_sup_lmax,x_minus,x_plus,final_diameter,verdict,error"
        )?;
        for row in &self.rows {
            write!(out, "{}", row.index)?;
            for (_, v) in &row.values {
                write!(out, ",{v:.16e}")?;
            }
            write!(out, ",{:.16e}", row.tau)?;
            write!(out, ",{}", row.prediction.as_deref().unwrap_or(""))?;
            for field in [
                row.tail_sup_lmax,
                row.x_minus,
                row.x_plus,
                row.final_diameter,
            ] {
                match field {
                    Some(v) => write!(out, ",{v:.16e}")?,
                    None => write!(out, ",")?,
                }
            }
            let error = row
                .error
                .as_deref()
                .unwrap_or("")
                .replace([',', '\n'], ";");
            writeln!(out, ",{},{}", row.verdict, error)?;
        }
        Ok(())
    }
}

fn apply_axis(config: &mut RunConfig, name: &str, value: f64) -> Result<(), HarnessError> {
    match name {
        "tau" => config.model.tau = value,
        "kappa0" => config.model.kappa0 = value,
        "kappa1" => config.model.kappa1 = Some(value),
        "tilde_kappa" => config.model.tilde_kappa = Some(value),
        "h" => config.integrator.h = Some(value),
        "t_end" => config.integrator.t_end = Some(value),
        "seed" => {
            if value < 0.0 || value.fract() != 0.0 || value > 2f64.powi(53) {
                return Err(HarnessError::Config(format!(
                    "seed axis value {value} is not a non-negative integer"
                )));
            }
            match &mut config.history {
                HistoryConfig::Generator { seed, .. } => *seed = value as u64,
                _ => {
                    return Err(HarnessError::Config(
                        "seed axis needs a generator history".into(),
                    ))
                }
            }
        }
        "spread" => match &mut config.history {
            HistoryConfig::Generator { spread, .. } => *spread = value,
            _ => {
                return Err(HarnessError::Config(
                    "spread axis needs a generator history".into(),
                ))
            }
        },
        other => return Err(HarnessError::UnknownAxis(other.to_string())),
    }
    Ok(())
}

fn point_config(
    config: &SweepConfig,
    point: &[f64],
) -> Result<RunConfig, HarnessError> {
    let mut c = config.base.clone();
    for (axis, &value) in config.axes.iter().zip(point) {
        apply_axis(&mut c, &axis.name, value)?;
    }
    if let Some(TauRule::InverseKappa0 { coefficient }) = config.tau_rule {
        let product = coefficient * c.model.kappa0;
        if !(product > 0.0) {
            return Err(HarnessError::Config(format!(
                "tau rule needs coefficient*kappa0 > 0, got {product}"
            )));
        }
        c.model.tau = 1.0 / product;
    }
    Ok(c)
}

fn sweep_point(config: &SweepConfig, index: usize, point: &[f64]) -> SweepRow {
    let values: Vec<(String, f64)> = config
        .axes
        .iter()
        .zip(point)
        .map(|(a, &v)| (a.name.clone(), v))
        .collect();
    let outcome = point_config(config, point).and_then(|c| {
        let tau = c.model.tau;
        run(&c).map(|out| (tau, out))
    });
    match outcome {
        Ok((tau, out)) => {
            let prediction = out.gate.as_ref().map(|g| match g.prediction {
                Prediction::CompleteAggregation => "complete_aggregation".to_string(),
                Prediction::PracticalBound { .. } => "practical_bound".to_string(),
                Prediction::NoGuarantee => "no_guarantee".to_string(),
            });
            let constant = |key: &str| out.gate.as_ref().and_then(|g| g.constants.get(key).copied());
            SweepRow {
                index,
                values,
                tau,
                prediction,
                tail_sup_lmax: Some(out.measured.tail_sup_lmax),
                x_minus: constant("x_minus"),
                x_plus: constant("x_plus"),
                final_diameter: Some(out.measured.final_diameter),
                verdict: out.verdict,
                error: None,
            }
        }
        Err(err) => SweepRow {
            index,
            values,
            tau: config.base.model.tau,
            prediction: None,
            tail_sup_lmax: None,
            x_minus: None,
            x_plus: None,
            final_diameter: None,
            verdict: Verdict::Unadjudicated,
            error: Some(err.to_string()),
        },
    }
}

/// Runs the cartesian grid. Row order is the deterministic grid order (first
/// axis outermost) regardless of execution order; per-point failures land in
/// their row and do not stop the sweep.
pub fn sweep(config: &SweepConfig, parallel: bool) -> Result<SweepTable, HarnessError> {
    for axis in &config.axes {
        if axis.values.is_empty() {
            return Err(HarnessError::Config(format!(
                "axis {} has no values",
                axis.name
            )));
        }
    }
    let size: usize = config.axes.iter().map(|a| a.values.len()).product();
    if size > config.cap {
        return Err(HarnessError::GridTooLarge {
            size,
            cap: config.cap,
        });
    }
    let mut grid: Vec<Vec<f64>> = Vec::with_capacity(size);
    for mut idx in 0..size {
        let mut point = vec![0.0; config.axes.len()];
        for (slot, axis) in config.axes.iter().enumerate().rev() {
            point[slot] = axis.values[idx % axis.values.len()];
            idx /= axis.values.len();
        }
        grid.push(point);
    }
    let rows: Vec<SweepRow> = if parallel {
        grid.par_iter()
            .enumerate()
            .map(|(i, p)| sweep_point(config, i, p))
            .collect()
    } else {
        grid.iter()
            .enumerate()
            .map(|(i, p)| sweep_point(config, i, p))
            .collect()
    };
    Ok(SweepTable {
        axes: config.axes.iter().map(|a| a.name.clone()).collect(),
        rows,
    })
}

/// Outcome of integrating the same instance through the complex model, its
/// real restriction, and (when shaped for it) the scalar phase form.
#[derive(Debug, Clone, Serialize)]
pub struct ReductionReport {
    /// max over nodes and particles of ‖z_general − z_real‖.
    pub max_general_vs_real_gap: f64,
    /// max imaginary component on the complex leg.
    pub max_imag_residue: f64,
    /// max over nodes and particles of ‖z_real − lift(θ)‖, when the phase
    /// leg ran.
    pub max_real_vs_phase_gap: Option<f64>,
    pub final_time: f64,
    /// Final angles per leg (atan2 convention), d = 2 only.
    pub final_angles_general: Option<Vec<f64>>,
    pub final_angles_real: Option<Vec<f64>>,
    pub final_angles_phase: Option<Vec<f64>>,
    pub notes: Vec<String>,
}

fn planar_frequency(m: &SkewHermitian) -> Option<f64> {
    let mat = m.matrix();
    if mat.dim() != 2 {
        return None;
    }
    let (a, d) = (mat.get(0, 0), mat.get(1, 1));
    let (b, c) = (mat.get(0, 1), mat.get(1, 0));
    let planar = a.norm() == 0.0
        && d.norm() == 0.0
        && b.im == 0.0
        && c.im == 0.0
        && b.re == -c.re;
    planar.then_some(c.re)
}

fn rotation_frequencies(omegas: &OmegaSpec, n: usize) -> Option<Vec<f64>> {
    match omegas {
        OmegaSpec::Zero => Some(vec![0.0; n]),
        OmegaSpec::Common(m) => planar_frequency(m).map(|nu| vec![nu; n]),
        OmegaSpec::PerParticle(ms) => {
            ms.iter().map(planar_frequency).collect::<Option<Vec<_>>>()
        }
    }
}

fn angles_of(e: &Ensemble) -> Vec<f64> {
    (0..e.n())
        .map(|j| {
            let s = e.state(j);
            s[1].re.atan2(s[0].re)
        })
        .collect()
}

fn cubic_hermite_scalar(y0: f64, d0: f64, y1: f64, d1: f64, h: f64, sigma: f64) -> f64 {
    let s2 = sigma * sigma;
    let s3 = s2 * sigma;
    (2.0 * s3 - 3.0 * s2 + 1.0) * y0
        + (s3 - 2.0 * s2 + sigma) * h * d0
        + (-2.0 * s3 + 3.0 * s2) * y1
        + (s3 - s2) * h * d1
}

/// Method-of-steps RK4 for the phase form with a constant history θ(t) = θ₀
/// on [−τ, 0]. Returns the node states.
fn integrate_phases(
    p: &ModelParams,
    theta0: &[f64],
    integ: &IntegratorConfig,
) -> Result<Vec<Vec<f64>>, HarnessError> {
    if integ.scheme != Scheme::Rk4 {
        return Err(HarnessError::Config(
            "the phase leg supports the fourth-order scheme only".into(),
        ));
    }
    let grid = integ.resolve(p.tau())?;
    let (h, m, n_steps) = (grid.h, grid.m, grid.n_steps);
    let n = p.n();
    let mut states: Vec<Vec<f64>> = Vec::with_capacity(n_steps + 1);
    let mut derivs: Vec<Vec<f64>> = Vec::with_capacity(n_steps + 1);
    states.push(theta0.to_vec());
    let first = rhs_kuramoto(&states[0], theta0, p)?;
    derivs.push(first);
    let axpy = |y: &[f64], k: &[f64], a: f64| -> Vec<f64> {
        y.iter().zip(k).map(|(&yv, &kv)| yv + a * kv).collect()
    };
    for step in 0..n_steps {
        let node_or_history = |idx: i64, states: &Vec<Vec<f64>>| -> Vec<f64> {
            if idx >= 0 {
                states[idx as usize].clone()
            } else {
                theta0.to_vec()
            }
        };
        // Delayed stage values by index arithmetic: the stage at t_step + c·h
        // reads segment step − m at fraction c.
        let base = step as i64 - m as i64;
        let delayed_half = |states: &Vec<Vec<f64>>, derivs: &Vec<Vec<f64>>| -> Vec<f64> {
            if m == 0 {
                unreachable!("half-stage delay lookups only happen with m >= 1");
            }
            if base >= 0 {
                let b = base as usize;
                (0..n)
                    .map(|j| {
                        cubic_hermite_scalar(
                            states[b][j],
                            derivs[b][j],
                            states[b + 1][j],
                            derivs[b + 1][j],
                            h,
                            0.5,
                        )
                    })
                    .collect()
            } else {
                theta0.to_vec()
            }
        };
        let y0 = states[step].clone();
        let k1 = derivs[step].clone();
        let y_a = axpy(&y0, &k1, 0.5 * h);
        let k2 = if m == 0 {
            rhs_kuramoto(&y_a, &y_a, p)?
        } else {
            rhs_kuramoto(&y_a, &delayed_half(&states, &derivs), p)?
        };
        let y_b = axpy(&y0, &k2, 0.5 * h);
        let k3 = if m == 0 {
            rhs_kuramoto(&y_b, &y_b, p)?
        } else {
            rhs_kuramoto(&y_b, &delayed_half(&states, &derivs), p)?
        };
        let y_c = axpy(&y0, &k3, h);
        let k4 = if m == 0 {
            rhs_kuramoto(&y_c, &y_c, p)?
        } else {
            rhs_kuramoto(&y_c, &node_or_history(base + 1, &states), p)?
        };
        let mut y1 = Vec::with_capacity(n);
        for j in 0..n {
            y1.push(y0[j] + h / 6.0 * (k1[j] + 2.0 * (k2[j] + k3[j]) + k4[j]));
        }
        let next_delayed = if m == 0 {
            y1.clone()
        } else {
            node_or_history(step as i64 + 1 - m as i64, &states)
        };
        let d1 = rhs_kuramoto(&y1, &next_delayed, p)?;
        states.push(y1);
        derivs.push(d1);
    }
    Ok(states)
}

const REAL_DATA_TOL: f64 = 1e-12;

/// Integrates the same real instance through the complex right-hand side and
/// the real one, plus the scalar phase form when d = 2 with planar rotations
/// and an effectively constant history; reports max-over-time leg gaps.
pub fn compare_reduction(config: &RunConfig) -> Result<ReductionReport, HarnessError> {
    let params = config.model.build()?;
    let (n, d) = (params.n(), params.dim());
    let is_real_omega = match params.omegas() {
        OmegaSpec::Zero => true,
        OmegaSpec::Common(m) => m.is_real(),
        OmegaSpec::PerParticle(ms) => ms.iter().all(|m| m.is_real()),
    };
    if !is_real_omega {
        return Err(HarnessError::Config(
            "the reduction comparison needs a real free flow".into(),
        ));
    }
    let history_fn = config.history.build(&params)?;
    let history = history_fn.materialize(params.tau())?;
    let initial = Ensemble::from_flat(0.0, n, d, history.eval(0.0)?);
    if initial.max_imag_abs() > REAL_DATA_TOL {
        return Err(HarnessError::Config(
            "the reduction comparison needs real initial data".into(),
        ));
    }
    let integ = config.integrator.materialize(&params)?;

    let params_general = ModelParams::general(
        n,
        d,
        params.kappa0(),
        params.kappa1(),
        params.tau(),
        params.omegas().clone(),
        params.graph().clone(),
    )?;
    let params_real = ModelParams::ls_real(
        n,
        d,
        params.kappa0(),
        params.tau(),
        params.omegas().clone(),
        params.graph().clone(),
    )?;
    let traj_general = integrate(&params_general, &history_fn, &integ)?;
    let traj_real = integrate(&params_real, &history_fn, &integ)?;

    let mut gap = 0.0f64;
    let mut imag = 0.0f64;
    for k in 0..traj_general.node_count() {
        let a = traj_general.node_state(k);
        let b = traj_real.node_state(k);
        for j in 0..n {
            gap = gap.max(dist_slices(&a[j * d..(j + 1) * d], &b[j * d..(j + 1) * d]));
        }
        imag = imag.max(traj_general.node_ensemble(k).max_imag_abs());
    }

    let mut notes = Vec::new();
    let mut max_real_vs_phase_gap = None;
    let mut final_angles_phase = None;
    let history_is_constant = match &history_fn {
        HistoryFn::Constant(_) | HistoryFn::Generator { .. } => true,
        HistoryFn::Sampled { states, .. } => {
            states.windows(2).all(|w| w[0].flat() == w[1].flat())
        }
    };
    let frequencies = rotation_frequencies(params.omegas(), n);
    if d != 2 {
        notes.push("phase leg skipped: state dimension is not 2".to_string());
    } else if frequencies.is_none() {
        notes.push("phase leg skipped: free flow is not a planar rotation family".to_string());
    } else if !params.graph().is_uniform(n) {
        notes.push("phase leg skipped: coupling weights are not uniform".to_string());
    } else if !history_is_constant {
        notes.push("phase leg skipped: history is not constant".to_string());
    } else {
        let nus = frequencies.unwrap();
        let params_phase = ModelParams::kuramoto(n, params.kappa0(), &nus, params.tau())?;
        let theta0 = angles_of(&initial);
        let phases = integrate_phases(&params_phase, &theta0, &integ)?;
        let mut pgap = 0.0f64;
        for (k, theta) in phases.iter().enumerate() {
            let b = traj_real.node_state(k);
            for j in 0..n {
                let lift = [
                    C64::new(theta[j].cos(), 0.0),
                    C64::new(theta[j].sin(), 0.0),
                ];
                pgap = pgap.max(dist_slices(&lift, &b[j * 2..j * 2 + 2]));
            }
        }
        max_real_vs_phase_gap = Some(pgap);
        final_angles_phase = Some(
            phases
                .last()
                .unwrap()
                .iter()
                .map(|&t| t.sin().atan2(t.cos()))
                .collect(),
        );
    }

    let (final_angles_general, final_angles_real) = if d == 2 {
        (
            Some(angles_of(&traj_general.final_ensemble())),
            Some(angles_of(&traj_real.final_ensemble())),
        )
    } else {
        (None, None)
    };
    Ok(ReductionReport {
        max_general_vs_real_gap: gap,
        max_imag_residue: imag,
        max_real_vs_phase_gap,
        final_time: traj_general.final_time(),
        final_angles_general,
        final_angles_real,
        final_angles_phase,
        notes,
    })
}

/// Outcome of the zero-delay splitting check z_j(t) = e^{Ωt} w_j(t).
#[derive(Debug, Clone, Serialize)]
pub struct SplittingReport {
    /// max over nodes and particles of ‖z_j(t) − e^{Ωt} w_j(t)‖.
    pub max_split_gap: f64,
    /// Diameter of the coupled leg at the horizon.
    pub final_diameter: f64,
    pub final_time: f64,
    pub gate: TheoremReport,
    pub notes: Vec<String>,
}

/// One classical RK4 step of ż = Ωz at step size h.
fn rk4_linear_step(omega: &SkewHermitian, v: &[C64], h: f64) -> Vec<C64> {
    let k1 = omega.apply(v);
    let stage = |k: &[C64], a: f64| -> Vec<C64> {
        v.iter().zip(k).map(|(&y, &kv)| y + kv * a).collect()
    };
    let k2 = omega.apply(&stage(&k1, 0.5 * h));
    let k3 = omega.apply(&stage(&k2, 0.5 * h));
    let k4 = omega.apply(&stage(&k3, h));
    v.iter()
        .enumerate()
        .map(|(i, &y)| y + (k1[i] + (k2[i] + k3[i]) * 2.0 + k4[i]) * (h / 6.0))
        .collect()
}

/// Integrates the configured run twice from the same data, once as given and
/// once with the free flow removed, advances e^{Ωt} by fine-step RK4 on the
/// columns (h/10), and reports the worst splitting discrepancy.
pub fn compare_splitting(config: &RunConfig) -> Result<SplittingReport, HarnessError> {
    let params = config.model.build()?;
    if params.tau() != 0.0 {
        return Err(HarnessError::Config(
            "the splitting identity holds for zero delay only".into(),
        ));
    }
    if params.omegas().heterogeneity() != 0.0 {
        return Err(HarnessError::Config(
            "the splitting identity needs a common free flow".into(),
        ));
    }
    if !params.graph().is_uniform(params.n()) {
        return Err(HarnessError::Config(
            "the splitting identity needs uniform coupling".into(),
        ));
    }
    let (n, d) = (params.n(), params.dim());
    let history_fn = config.history.build(&params)?;
    let history = history_fn.materialize(0.0)?;
    let initial = Ensemble::from_flat(0.0, n, d, history.eval(0.0)?);
    let rho0 = order_parameter(&initial);
    let integ = config.integrator.materialize(&params)?;

    let params_z = ModelParams::general(
        n,
        d,
        params.kappa0(),
        params.kappa1(),
        0.0,
        params.omegas().clone(),
        params.graph().clone(),
    )?;
    let params_w = ModelParams::general(
        n,
        d,
        params.kappa0(),
        params.kappa1(),
        0.0,
        OmegaSpec::Zero,
        params.graph().clone(),
    )?;
    let traj_z = integrate(&params_z, &history_fn, &integ)?;
    let traj_w = integrate(&params_w, &history_fn, &integ)?;

    let omega = match params.omegas() {
        OmegaSpec::Zero => None,
        OmegaSpec::Common(m) => Some(m.clone()),
        OmegaSpec::PerParticle(ms) => Some(ms[0].clone()),
    };
    // Columns of e^{Ωt}, advanced in lockstep with the node grid and never
    // stored: column i solves ż = Ωz from e_i.
    let mut columns: Vec<Vec<C64>> = (0..d)
        .map(|i| {
            let mut e = vec![C64::new(0.0, 0.0); d];
            e[i] = C64::new(1.0, 0.0);
            e
        })
        .collect();
    const SUBSTEPS: usize = 10;
    let hf = traj_z.h() / SUBSTEPS as f64;
    let mut gap = 0.0f64;
    for k in 0..traj_z.node_count() {
        if k > 0 {
            if let Some(m) = &omega {
                for col in &mut columns {
                    for _ in 0..SUBSTEPS {
                        *col = rk4_linear_step(m, col, hf);
                    }
                }
            }
        }
        let z = traj_z.node_state(k);
        let w = traj_w.node_state(k);
        for j in 0..n {
            let wj = &w[j * d..(j + 1) * d];
            let mut lifted = vec![C64::new(0.0, 0.0); d];
            for (beta, &wb) in wj.iter().enumerate() {
                for alpha in 0..d {
                    lifted[alpha] += columns[beta][alpha] * wb;
                }
            }
            gap = gap.max(dist_slices(&z[j * d..(j + 1) * d], &lifted));
        }
    }
    let gate = check_gate(GateId::UndelayedOrder, &params_z, 0.0, 0.0, rho0);
    let final_ensemble = traj_z.final_ensemble();
    Ok(SplittingReport {
        max_split_gap: gap,
        final_diameter: diameter(&final_ensemble),
        final_time: traj_z.final_time(),
        gate,
        notes: Vec::new(),
    })
}
