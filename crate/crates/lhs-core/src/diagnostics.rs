//! Aggregation diagnostics.
//!
//! ```text
//! D(Z)      = max_{i,j} ‖z_i − z_j‖                (ensemble diameter)
//! D^{0,τ}(t) = max_{i,j} ‖z_i(t) − z_j(t−τ)‖      (delay-modified diameter)
//! ρ         = ‖(1/N) Σ_k z_k‖                      (order parameter)
//! L_ij      = 1 − ⟨z_i, z_j⟩,  L(t) = max_{i,j} |L_ij|
//! Δ^τ_j(t)  = ‖z_j(t) − z_j(t−τ)‖
//! ℰ_ij(t)   = ‖z_i−z_j‖²(t) + γ ∫_{t−τ}^t ‖z_i−z_j‖²(s) ds
//! ```
//!
//! The integral in ℰ uses composite Simpson panels over [t−τ, t]; when τ/h is
//! even and t is a grid node the panel points are grid nodes.

use crate::integrator::{IntegrateError, Trajectory};
use crate::sphere::{dist_slices, inner_slices, norm_slice, Ensemble, C64};
use std::io::Write;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DiagnosticsError {
    #[error(transparent)]
    Eval(#[from] IntegrateError),
    #[error("series is empty")]
    EmptySeries,
    #[error("window fraction {0} outside (0, 1]")]
    BadWindow(f64),
    #[error("invalid pair ({0}, {1})")]
    BadPair(usize, usize),
    #[error("negative time {0} for a forward-time diagnostic")]
    NegativeTime(f64),
}

/// Ensemble diameter max_{i,j} ‖z_i − z_j‖.
pub fn diameter(e: &Ensemble) -> f64 {
    let mut max = 0.0f64;
    for i in 0..e.n() {
        for j in (i + 1)..e.n() {
            max = max.max(dist_slices(e.state(i), e.state(j)));
        }
    }
    max
}

/// Order parameter ρ = ‖z_c‖ of the ensemble centroid.
pub fn order_parameter(e: &Ensemble) -> f64 {
    norm_slice(&e.centroid())
}

/// The full matrix L_ij = 1 − ⟨z_i, z_j⟩ with its modulus maximum.
#[derive(Debug, Clone)]
pub struct GramDefect {
    n: usize,
    entries: Vec<C64>,
    /// max_{i,j} |L_ij|.
    pub lmax: f64,
    /// Lexicographically smallest pair attaining the maximum.
    pub argmax: (usize, usize),
}

impl GramDefect {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.entries[i * self.n + j]
    }
}

fn gram_defect_from(states_i: &Ensemble, states_j: &Ensemble) -> GramDefect {
    let n = states_i.n();
    let mut entries = Vec::with_capacity(n * n);
    let mut lmax = 0.0f64;
    let mut argmax = (0, 0);
    for i in 0..n {
        for j in 0..n {
            let l = C64::new(1.0, 0.0) - inner_slices(states_i.state(i), states_j.state(j));
            // Strict comparison keeps the first (smallest) maximizing pair.
            if l.norm() > lmax {
                lmax = l.norm();
                argmax = (i, j);
            }
            entries.push(l);
        }
    }
    GramDefect {
        n,
        entries,
        lmax,
        argmax,
    }
}

/// Instantaneous defect L_ij = 1 − ⟨z_i(t), z_j(t)⟩.
pub fn gram_defect(e: &Ensemble) -> GramDefect {
    gram_defect_from(e, e)
}

/// Delayed defect L^τ_ij(t) = 1 − ⟨z_i(t−τ), z_j(t)⟩ (first slot delayed).
pub fn gram_defect_delayed(
    traj: &Trajectory,
    t: f64,
) -> Result<GramDefect, DiagnosticsError> {
    let now = traj.dense_eval(t)?;
    let before = traj.eval_extended(t - traj.tau())?;
    Ok(gram_defect_from(&before, &now))
}

/// Delay-modified diameter D^{0,τ}(t) = max_{i,j} ‖z_i(t) − z_j(t−τ)‖,
/// including i = j.
pub fn modified_diameter(traj: &Trajectory, t: f64) -> Result<f64, DiagnosticsError> {
    let now = traj.dense_eval(t)?;
    let before = traj.eval_extended(t - traj.tau())?;
    let mut max = 0.0f64;
    for i in 0..now.n() {
        for j in 0..now.n() {
            max = max.max(dist_slices(now.state(i), before.state(j)));
        }
    }
    Ok(max)
}

/// Per-particle delay displacement Δ^τ_j(t) = ‖z_j(t) − z_j(t−τ)‖.
pub fn delta_tau(traj: &Trajectory, t: f64, j: usize) -> Result<f64, DiagnosticsError> {
    if j >= traj.n() {
        return Err(DiagnosticsError::BadPair(j, j));
    }
    let now = traj.dense_eval(t)?;
    let before = traj.eval_extended(t - traj.tau())?;
    Ok(dist_slices(now.state(j), before.state(j)))
}

/// Composite Simpson over uniformly sampled values (panels = len − 1 ≥ 2).
/// Even panel counts use the 1/3 rule throughout; odd counts finish with a
/// 3/8 tail on the last three panels.
fn simpson(values: &[f64], dt: f64) -> f64 {
    let panels = values.len() - 1;
    assert!(panels >= 2, "Simpson needs at least two panels");
    let (third_part, tail) = if panels % 2 == 0 {
        (panels, 0)
    } else {
        (panels - 3, 3)
    };
    let mut acc = 0.0;
    if third_part > 0 {
        let mut sum = values[0] + values[third_part];
        let mut k = 1;
        while k < third_part {
            sum += 4.0 * values[k];
            if k + 1 < third_part {
                sum += 2.0 * values[k + 1];
            }
            k += 2;
        }
        acc += sum * dt / 3.0;
    }
    if tail == 3 {
        let base = third_part;
        acc += dt * 3.0 / 8.0
            * (values[base]
                + 3.0 * values[base + 1]
                + 3.0 * values[base + 2]
                + values[base + 3]);
    }
    acc
}

fn pair_sq_dist(e: &Ensemble, i: usize, j: usize) -> f64 {
    let d = dist_slices(e.state(i), e.state(j));
    d * d
}

/// Delay Lyapunov functional
/// ℰ_ij(t) = ‖z_i(t)−z_j(t)‖² + γ ∫_{t−τ}^t ‖z_i(s)−z_j(s)‖² ds.
pub fn lyapunov(
    traj: &Trajectory,
    t: f64,
    i: usize,
    j: usize,
    gamma: f64,
) -> Result<f64, DiagnosticsError> {
    if i >= traj.n() || j >= traj.n() {
        return Err(DiagnosticsError::BadPair(i, j));
    }
    if t < -1e-12 {
        return Err(DiagnosticsError::NegativeTime(t));
    }
    let now = traj.dense_eval(t)?;
    let head = pair_sq_dist(&now, i, j);
    let tau = traj.tau();
    if tau == 0.0 {
        return Ok(head);
    }
    let m = traj.steps_per_delay();
    // Even panel count ≥ 2; equals τ/h when that is even, so grid-node t gets
    // grid-aligned panels.
    let panels = if m < 2 {
        2
    } else if m % 2 == 1 {
        m + 1
    } else {
        m
    };
    let dt = tau / panels as f64;
    let mut values = Vec::with_capacity(panels + 1);
    for k in 0..=panels {
        let s = t - tau + k as f64 * dt;
        let e = traj.eval_extended(s)?;
        values.push(pair_sq_dist(&e, i, j));
    }
    Ok(head + gamma * simpson(&values, dt))
}

/// Supremum over the trailing window: max of the last ⌈fraction·len⌉ values.
pub fn tail_sup(values: &[f64], window_fraction: f64) -> Result<f64, DiagnosticsError> {
    if values.is_empty() {
        return Err(DiagnosticsError::EmptySeries);
    }
    if !(window_fraction > 0.0 && window_fraction <= 1.0) {
        return Err(DiagnosticsError::BadWindow(window_fraction));
    }
    let k = ((values.len() as f64 * window_fraction).ceil() as usize)
        .clamp(1, values.len());
    Ok(values[values.len() - k..]
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max))
}

#[derive(Debug, Clone, Copy)]
pub struct SeriesOptions {
    /// Emit every `stride`-th node (the final node is always included).
    pub stride: usize,
    /// When set, compute ℰ_ij columns for all pairs i < j with this γ.
    pub lyapunov_gamma: Option<f64>,
}

impl Default for SeriesOptions {
    fn default() -> Self {
        Self {
            stride: 1,
            lyapunov_gamma: None,
        }
    }
}

/// Lyapunov functional columns, one per pair i < j in lexicographic order.
#[derive(Debug, Clone)]
pub struct LyapunovColumns {
    pub gamma: f64,
    pub pairs: Vec<(usize, usize)>,
    /// values[p][k] = ℰ over pair p at sample k.
    pub values: Vec<Vec<f64>>,
}

/// Diagnostics sampled along a trajectory.
#[derive(Debug, Clone)]
pub struct DiagnosticsSeries {
    pub times: Vec<f64>,
    pub d: Vec<f64>,
    pub d0tau: Vec<f64>,
    pub rho: Vec<f64>,
    pub lmax: Vec<f64>,
    pub norm_dev: Vec<f64>,
    pub lyapunov: Option<LyapunovColumns>,
}

impl DiagnosticsSeries {
    /// CSV with header `t,D,D0tau,rho,Lmax,norm_dev[,E_i_j...]`,
    /// 17 significant digits.
    pub fn write_csv(&self, out: &mut impl Write) -> std::io::Result<()> {
        write!(out, "t,D,D0tau,rho,Lmax,norm_dev")?;
        if let Some(columns) = &self.lyapunov {
            for (i, j) in &columns.pairs {
                write!(out, ",E_{i}_{j}")?;
            }
        }
        writeln!(out)?;
        for k in 0..self.times.len() {
            write!(
                out,
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                self.times[k], self.d[k], self.d0tau[k], self.rho[k], self.lmax[k],
                self.norm_dev[k]
            )?;
            if let Some(columns) = &self.lyapunov {
                for col in &columns.values {
                    write!(out, ",{:.16e}", col[k])?;
                }
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

fn sample_indices(node_count: usize, stride: usize) -> Vec<usize> {
    let stride = stride.max(1);
    let mut idx: Vec<usize> = (0..node_count).step_by(stride).collect();
    if *idx.last().unwrap() != node_count - 1 {
        idx.push(node_count - 1);
    }
    idx
}

/// Computes the standard diagnostic columns at (strided) grid nodes. Delayed
/// quantities resolve by node-index arithmetic and the stored history, so no
/// interpolation error enters at nodes.
pub fn compute_series(
    traj: &Trajectory,
    opts: &SeriesOptions,
) -> Result<DiagnosticsSeries, DiagnosticsError> {
    let samples = sample_indices(traj.node_count(), opts.stride);
    let n = traj.n();
    let d_dim = traj.dim();
    let mut times = Vec::with_capacity(samples.len());
    let mut d = Vec::with_capacity(samples.len());
    let mut d0tau = Vec::with_capacity(samples.len());
    let mut rho = Vec::with_capacity(samples.len());
    let mut lmax = Vec::with_capacity(samples.len());
    let mut norm_dev = Vec::with_capacity(samples.len());

    for &k in &samples {
        let e = traj.node_ensemble(k);
        let delayed = traj.delayed_node_state(k)?;
        let delayed = Ensemble::from_flat(traj.node_time(k) - traj.tau(), n, d_dim, delayed);
        let mut dmax = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                dmax = dmax.max(dist_slices(e.state(i), delayed.state(j)));
            }
        }
        times.push(traj.node_time(k));
        d.push(diameter(&e));
        d0tau.push(dmax);
        rho.push(order_parameter(&e));
        lmax.push(gram_defect(&e).lmax);
        norm_dev.push(e.max_norm_deviation());
    }

    let lyapunov = match opts.lyapunov_gamma {
        None => None,
        Some(gamma) => {
            let pairs: Vec<(usize, usize)> = (0..n)
                .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
                .collect();
            let m = traj.steps_per_delay();
            let mut values = vec![Vec::with_capacity(samples.len()); pairs.len()];
            if traj.tau() > 0.0 && m >= 2 && m % 2 == 0 {
                // Fast path: per-pair squared distances on the extended node
                // grid [−m, last], then grid-aligned Simpson windows.
                let node_count = traj.node_count();
                let h = traj.h();
                let mut sq = vec![vec![0.0f64; node_count + m]; pairs.len()];
                for back in 1..=m {
                    let t_hist = -(back as f64) * h;
                    let hist = traj.history().eval(t_hist)?;
                    let e = Ensemble::from_flat(t_hist, n, d_dim, hist);
                    for (p, &(i, j)) in pairs.iter().enumerate() {
                        sq[p][m - back] = pair_sq_dist(&e, i, j);
                    }
                }
                for k in 0..node_count {
                    let e = traj.node_ensemble(k);
                    for (p, &(i, j)) in pairs.iter().enumerate() {
                        sq[p][m + k] = pair_sq_dist(&e, i, j);
                    }
                }
                for &k in &samples {
                    for p in 0..pairs.len() {
                        let window = &sq[p][k..=k + m];
                        let head = sq[p][k + m];
                        values[p].push(head + gamma * simpson(window, h));
                    }
                }
            } else {
                for &k in &samples {
                    let t = traj.node_time(k);
                    for (p, &(i, j)) in pairs.iter().enumerate() {
                        values[p].push(lyapunov(traj, t, i, j, gamma)?);
                    }
                }
            }
            Some(LyapunovColumns {
                gamma,
                pairs,
                values,
            })
        }
    };

    Ok(DiagnosticsSeries {
        times,
        d,
        d0tau,
        rho,
        lmax,
        norm_dev,
        lyapunov,
    })
}
