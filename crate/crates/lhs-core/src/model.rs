//! Model parameters and right-hand sides.
//!
//! The general form couples N delayed sphere states through a symmetric
//! network:
//!
//! ```text
//! dz_j/dt = Ω_j z_j
//!         + (κ₀/N) Σ_{k≠j} a_jk (⟨z_j,z_j⟩ z_k^τ − ⟨z_k^τ,z_j⟩ z_j)
//!         + (κ₁/N) Σ_{k≠j} a_jk (⟨z_j,z_k^τ⟩ − ⟨z_k^τ,z_j⟩) z_j
//! ```
//!
//! Special forms implemented alongside it:
//! * `sl` (κ₁ = −κ₀/2): dz_j/dt = (κ₀/N) Σ_{k≠j} (z_k^τ − Re⟨z_k^τ,z_j⟩ z_j)
//! * `close_sl` with κ̃ = κ₀/2 + κ₁:
//!   dz_j/dt = (κ₀/N) Σ_{k≠j} (⟨z_j,z_j⟩ z_k^τ − Re⟨z_k^τ,z_j⟩ z_j)
//!           + (κ̃/N) Σ_{k≠j} (⟨z_j,z_k^τ⟩ − ⟨z_k^τ,z_j⟩) z_j
//! * `ls_real`: the same flow restricted to real states in ℝ^d, where the κ₁
//!   term vanishes identically
//! * `kuramoto`: the d = 2 real ansatz x_j = (cos θ_j, sin θ_j) with
//!   Ω_j = [[0, −ν_j], [ν_j, 0]], giving
//!   dθ_j/dt = ν_j + (κ/N) Σ_{k≠j} sin(θ_k^τ − θ_j)
//!
//! All sums skip k = j, per-row accumulation runs in ascending k so results
//! are bitwise deterministic, and ⟨z_j,z_j⟩ is always computed rather than
//! assumed to be 1.

use crate::sphere::{inner_slices, Adjacency, Ensemble, SkewHermitian, C64};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("operation requires form {expected:?} but parameters have form {actual:?}")]
    WrongForm {
        expected: ModelForm,
        actual: ModelForm,
    },
    #[error("invalid parameters: {0}")]
    Invalid(String),
    #[error("real-form input has imaginary magnitude {max_imag:.3e} beyond 1e-9")]
    NonRealInput { max_imag: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelForm {
    General,
    Sl,
    CloseSl,
    LsReal,
    Kuramoto,
}

/// Free-flow family: one matrix per particle, a shared matrix, or none.
#[derive(Debug, Clone)]
pub enum OmegaSpec {
    Zero,
    Common(SkewHermitian),
    PerParticle(Vec<SkewHermitian>),
}

impl OmegaSpec {
    pub fn get(&self, j: usize) -> Option<&SkewHermitian> {
        match self {
            OmegaSpec::Zero => None,
            OmegaSpec::Common(m) => Some(m),
            OmegaSpec::PerParticle(ms) => Some(&ms[j]),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, OmegaSpec::Zero)
    }

    /// max_j ‖Ω_j‖_∞ (0 for the zero family).
    pub fn max_inf_norm(&self) -> f64 {
        match self {
            OmegaSpec::Zero => 0.0,
            OmegaSpec::Common(m) => m.inf_norm(),
            OmegaSpec::PerParticle(ms) => ms.iter().map(|m| m.inf_norm()).fold(0.0, f64::max),
        }
    }

    /// Pairwise heterogeneity max_{i,j} ‖Ω_i − Ω_j‖_∞ (0 unless per-particle).
    pub fn heterogeneity(&self) -> f64 {
        match self {
            OmegaSpec::Zero | OmegaSpec::Common(_) => 0.0,
            OmegaSpec::PerParticle(ms) => {
                let mut gap = 0.0f64;
                for i in 0..ms.len() {
                    for j in (i + 1)..ms.len() {
                        gap = gap.max(ms[i].matrix().sub(ms[j].matrix()).inf_norm());
                    }
                }
                gap
            }
        }
    }
}

/// Coupling network: all-ones or an explicit symmetric weighted graph.
#[derive(Debug, Clone)]
pub enum CouplingGraph {
    Complete,
    Weighted(Adjacency),
}

impl CouplingGraph {
    #[inline]
    pub fn weight(&self, j: usize, k: usize) -> f64 {
        match self {
            CouplingGraph::Complete => 1.0,
            CouplingGraph::Weighted(a) => a.get(j, k),
        }
    }

    pub fn is_complete(&self) -> bool {
        matches!(self, CouplingGraph::Complete)
    }

    /// True when every weight equals 1, i.e. the graph acts as all-to-all.
    pub fn is_uniform(&self, n: usize) -> bool {
        match self {
            CouplingGraph::Complete => true,
            CouplingGraph::Weighted(a) => {
                (0..n).all(|j| (0..n).all(|k| a.get(j, k) == 1.0))
            }
        }
    }

    pub fn max_entry(&self, _n: usize) -> f64 {
        match self {
            CouplingGraph::Complete => 1.0,
            CouplingGraph::Weighted(a) => a.max_entry(),
        }
    }

    pub fn max_row_gap(&self) -> f64 {
        match self {
            CouplingGraph::Complete => 0.0,
            CouplingGraph::Weighted(a) => a.max_row_gap(),
        }
    }
}

/// Validated model parameters for N particles in ℂ^d.
#[derive(Debug, Clone)]
pub struct ModelParams {
    n: usize,
    d: usize,
    kappa0: f64,
    kappa1: f64,
    tau: f64,
    omegas: OmegaSpec,
    graph: CouplingGraph,
    form: ModelForm,
}

impl ModelParams {
    /// General form with explicit gain pair (κ₀, κ₁).
    pub fn general(
        n: usize,
        d: usize,
        kappa0: f64,
        kappa1: f64,
        tau: f64,
        omegas: OmegaSpec,
        graph: CouplingGraph,
    ) -> Result<Self, ModelError> {
        Self::build(n, d, kappa0, kappa1, tau, omegas, graph, ModelForm::General)
    }

    /// Gradient-flow form: κ₁ is derived as −κ₀/2 exactly; complete network,
    /// no free flow.
    pub fn sl(n: usize, d: usize, kappa0: f64, tau: f64) -> Result<Self, ModelError> {
        Self::build(
            n,
            d,
            kappa0,
            -kappa0 / 2.0,
            tau,
            OmegaSpec::Zero,
            CouplingGraph::Complete,
            ModelForm::Sl,
        )
    }

    /// Near-gradient form parameterized by κ̃ = κ₀/2 + κ₁; κ₁ is derived.
    pub fn close_sl(
        n: usize,
        d: usize,
        kappa0: f64,
        tilde_kappa: f64,
        tau: f64,
    ) -> Result<Self, ModelError> {
        Self::build(
            n,
            d,
            kappa0,
            tilde_kappa - kappa0 / 2.0,
            tau,
            OmegaSpec::Zero,
            CouplingGraph::Complete,
            ModelForm::CloseSl,
        )
    }

    /// Real-restricted form on ℝ^d; all free-flow matrices must be real
    /// skew-symmetric.
    pub fn ls_real(
        n: usize,
        d: usize,
        kappa0: f64,
        tau: f64,
        omegas: OmegaSpec,
        graph: CouplingGraph,
    ) -> Result<Self, ModelError> {
        let real = match &omegas {
            OmegaSpec::Zero => true,
            OmegaSpec::Common(m) => m.is_real(),
            OmegaSpec::PerParticle(ms) => ms.iter().all(|m| m.is_real()),
        };
        if !real {
            return Err(ModelError::Invalid(
                "real form requires real skew-symmetric free flow".into(),
            ));
        }
        Self::build(n, d, kappa0, 0.0, tau, omegas, graph, ModelForm::LsReal)
    }

    /// Phase-oscillator form: d = 2, per-particle planar rotations with
    /// frequencies ν_j, gain κ = κ₀.
    pub fn kuramoto(n: usize, kappa: f64, nus: &[f64], tau: f64) -> Result<Self, ModelError> {
        if nus.len() != n {
            return Err(ModelError::Invalid(format!(
                "expected {n} frequencies, got {}",
                nus.len()
            )));
        }
        let omegas =
            OmegaSpec::PerParticle(nus.iter().map(|&nu| SkewHermitian::rotation_2d(nu)).collect());
        Self::build(
            n,
            2,
            kappa,
            0.0,
            tau,
            omegas,
            CouplingGraph::Complete,
            ModelForm::Kuramoto,
        )
    }

    #[allow(clippy::too_many_arguments)]
    fn build(
        n: usize,
        d: usize,
        kappa0: f64,
        kappa1: f64,
        tau: f64,
        omegas: OmegaSpec,
        graph: CouplingGraph,
        form: ModelForm,
    ) -> Result<Self, ModelError> {
        if n < 1 {
            return Err(ModelError::Invalid("need at least one particle".into()));
        }
        if d < 1 {
            return Err(ModelError::Invalid("dimension must be at least 1".into()));
        }
        if !kappa0.is_finite() || !kappa1.is_finite() {
            return Err(ModelError::Invalid("gains must be finite".into()));
        }
        if !(tau >= 0.0) || !tau.is_finite() {
            return Err(ModelError::Invalid(format!("delay {tau} must be >= 0")));
        }
        match &omegas {
            OmegaSpec::Zero => {}
            OmegaSpec::Common(m) => {
                if m.dim() != d {
                    return Err(ModelError::Invalid(format!(
                        "free-flow dimension {} != state dimension {d}",
                        m.dim()
                    )));
                }
            }
            OmegaSpec::PerParticle(ms) => {
                if ms.len() != n {
                    return Err(ModelError::Invalid(format!(
                        "expected {n} free-flow matrices, got {}",
                        ms.len()
                    )));
                }
                if let Some(m) = ms.iter().find(|m| m.dim() != d) {
                    return Err(ModelError::Invalid(format!(
                        "free-flow dimension {} != state dimension {d}",
                        m.dim()
                    )));
                }
            }
        }
        if let CouplingGraph::Weighted(a) = &graph {
            if a.n() != n {
                return Err(ModelError::Invalid(format!(
                    "coupling network size {} != particle count {n}",
                    a.n()
                )));
            }
        }
        Ok(Self {
            n,
            d,
            kappa0,
            kappa1,
            tau,
            omegas,
            graph,
            form,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn kappa0(&self) -> f64 {
        self.kappa0
    }

    pub fn kappa1(&self) -> f64 {
        self.kappa1
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    /// κ̃ = κ₀/2 + κ₁; zero exactly on the `sl` form.
    pub fn tilde_kappa(&self) -> f64 {
        self.kappa0 / 2.0 + self.kappa1
    }

    pub fn omegas(&self) -> &OmegaSpec {
        &self.omegas
    }

    pub fn graph(&self) -> &CouplingGraph {
        &self.graph
    }

    pub fn form(&self) -> ModelForm {
        self.form
    }

    /// Rotation frequencies ν_j recovered from the planar free-flow blocks.
    pub fn kuramoto_frequencies(&self) -> Result<Vec<f64>, ModelError> {
        if self.form != ModelForm::Kuramoto {
            return Err(ModelError::WrongForm {
                expected: ModelForm::Kuramoto,
                actual: self.form,
            });
        }
        match &self.omegas {
            OmegaSpec::PerParticle(ms) => Ok(ms.iter().map(|m| m.matrix().get(1, 0).re).collect()),
            _ => Err(ModelError::Invalid(
                "phase form requires per-particle rotations".into(),
            )),
        }
    }

    fn expect_form(&self, expected: ModelForm) -> Result<(), ModelError> {
        if self.form != expected {
            return Err(ModelError::WrongForm {
                expected,
                actual: self.form,
            });
        }
        Ok(())
    }
}

/// Per-particle time derivatives, same layout as [`Ensemble`].
#[derive(Debug, Clone, PartialEq)]
pub struct Derivative {
    n: usize,
    d: usize,
    data: Vec<C64>,
}

impl Derivative {
    pub fn zero(n: usize, d: usize) -> Self {
        Self {
            n,
            d,
            data: vec![C64::new(0.0, 0.0); n * d],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    #[inline]
    pub fn row(&self, j: usize) -> &[C64] {
        &self.data[j * self.d..(j + 1) * self.d]
    }

    pub fn flat(&self) -> &[C64] {
        &self.data
    }

    pub fn flat_mut(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn max_imag_abs(&self) -> f64 {
        self.data.iter().map(|c| c.im.abs()).fold(0.0, f64::max)
    }
}

fn check_shapes(current: &Ensemble, delayed: &Ensemble, p: &ModelParams) {
    assert_eq!(current.n(), p.n(), "current ensemble particle count mismatch");
    assert_eq!(current.dim(), p.dim(), "current ensemble dimension mismatch");
    assert_eq!(delayed.n(), p.n(), "delayed ensemble particle count mismatch");
    assert_eq!(delayed.dim(), p.dim(), "delayed ensemble dimension mismatch");
}

/// General right-hand side. Accepts parameters of any complex form; the
/// delayed ensemble is passed in materialized so the function stays pure.
pub fn rhs_general(
    current: &Ensemble,
    delayed: &Ensemble,
    p: &ModelParams,
) -> Result<Derivative, ModelError> {
    check_shapes(current, delayed, p);
    let n = p.n();
    let d = p.dim();
    let inv_n = 1.0 / n as f64;
    let mut out = Derivative::zero(n, d);
    for j in 0..n {
        let zj = current.state(j);
        let sjj = inner_slices(zj, zj);
        let mut acc0 = vec![C64::new(0.0, 0.0); d];
        let mut acc1 = C64::new(0.0, 0.0);
        for k in 0..n {
            if k == j {
                continue;
            }
            let a = p.graph().weight(j, k);
            if a == 0.0 {
                continue;
            }
            let zk_tau = delayed.state(k);
            // g = ⟨z_k^τ, z_j⟩; its conjugate is ⟨z_j, z_k^τ⟩ exactly.
            let g = inner_slices(zk_tau, zj);
            for alpha in 0..d {
                acc0[alpha] += (sjj * zk_tau[alpha] - g * zj[alpha]) * a;
            }
            acc1 += (g.conj() - g) * a;
        }
        let row = &mut out.flat_mut()[j * d..(j + 1) * d];
        let c0 = p.kappa0() * inv_n;
        let c1 = p.kappa1() * inv_n;
        for alpha in 0..d {
            row[alpha] = acc0[alpha] * c0 + acc1 * zj[alpha] * c1;
        }
        if let Some(omega) = p.omegas().get(j) {
            let oz = omega.apply(zj);
            for alpha in 0..d {
                row[alpha] += oz[alpha];
            }
        }
    }
    Ok(out)
}

/// Gradient-flow right-hand side (requires the `sl` form):
/// dz_j/dt = (κ₀/N) Σ_{k≠j} (z_k^τ − Re⟨z_k^τ,z_j⟩ z_j).
pub fn rhs_sl(
    current: &Ensemble,
    delayed: &Ensemble,
    p: &ModelParams,
) -> Result<Derivative, ModelError> {
    p.expect_form(ModelForm::Sl)?;
    check_shapes(current, delayed, p);
    let n = p.n();
    let d = p.dim();
    let c0 = p.kappa0() / n as f64;
    let mut out = Derivative::zero(n, d);
    for j in 0..n {
        let zj = current.state(j);
        let mut acc = vec![C64::new(0.0, 0.0); d];
        for k in 0..n {
            if k == j {
                continue;
            }
            let zk_tau = delayed.state(k);
            let re_g = inner_slices(zk_tau, zj).re;
            for alpha in 0..d {
                acc[alpha] += zk_tau[alpha] - zj[alpha] * re_g;
            }
        }
        let row = &mut out.flat_mut()[j * d..(j + 1) * d];
        for alpha in 0..d {
            row[alpha] = acc[alpha] * c0;
        }
    }
    Ok(out)
}

/// Near-gradient right-hand side (requires the `close_sl` form):
/// dz_j/dt = (κ₀/N) Σ_{k≠j} (⟨z_j,z_j⟩ z_k^τ − Re⟨z_k^τ,z_j⟩ z_j)
///         + (κ̃/N) Σ_{k≠j} (⟨z_j,z_k^τ⟩ − ⟨z_k^τ,z_j⟩) z_j
pub fn rhs_close_sl(
    current: &Ensemble,
    delayed: &Ensemble,
    p: &ModelParams,
) -> Result<Derivative, ModelError> {
    p.expect_form(ModelForm::CloseSl)?;
    check_shapes(current, delayed, p);
    let n = p.n();
    let d = p.dim();
    let c0 = p.kappa0() / n as f64;
    let ct = p.tilde_kappa() / n as f64;
    let mut out = Derivative::zero(n, d);
    for j in 0..n {
        let zj = current.state(j);
        let sjj = inner_slices(zj, zj);
        let mut acc0 = vec![C64::new(0.0, 0.0); d];
        let mut acc1 = C64::new(0.0, 0.0);
        for k in 0..n {
            if k == j {
                continue;
            }
            let zk_tau = delayed.state(k);
            let g = inner_slices(zk_tau, zj);
            for alpha in 0..d {
                acc0[alpha] += sjj * zk_tau[alpha] - zj[alpha] * g.re;
            }
            acc1 += g.conj() - g;
        }
        let row = &mut out.flat_mut()[j * d..(j + 1) * d];
        for alpha in 0..d {
            row[alpha] = acc0[alpha] * c0 + acc1 * zj[alpha] * ct;
        }
    }
    Ok(out)
}

/// Real-restricted right-hand side (requires the `ls_real` form):
/// dx_j/dt = Ω_j x_j + (κ₀/N) Σ_{k≠j} a_jk (‖x_j‖² x_k^τ − ⟨x_k^τ,x_j⟩ x_j),
/// evaluated in real arithmetic. Inputs with imaginary magnitude beyond 1e-9
/// are rejected.
pub fn rhs_ls_real(
    current: &Ensemble,
    delayed: &Ensemble,
    p: &ModelParams,
) -> Result<Derivative, ModelError> {
    p.expect_form(ModelForm::LsReal)?;
    check_shapes(current, delayed, p);
    let max_imag = current.max_imag_abs().max(delayed.max_imag_abs());
    if max_imag > 1e-9 {
        return Err(ModelError::NonRealInput { max_imag });
    }
    let n = p.n();
    let d = p.dim();
    let c0 = p.kappa0() / n as f64;
    let mut out = Derivative::zero(n, d);
    let mut xk = vec![0.0f64; d];
    for j in 0..n {
        let xj: Vec<f64> = current.state(j).iter().map(|c| c.re).collect();
        let norm_sq: f64 = xj.iter().map(|x| x * x).sum();
        let mut acc = vec![0.0f64; d];
        for k in 0..n {
            if k == j {
                continue;
            }
            let a = p.graph().weight(j, k);
            if a == 0.0 {
                continue;
            }
            for (dst, src) in xk.iter_mut().zip(delayed.state(k).iter()) {
                *dst = src.re;
            }
            let dot: f64 = xk.iter().zip(xj.iter()).map(|(u, v)| u * v).sum();
            for alpha in 0..d {
                acc[alpha] += a * (norm_sq * xk[alpha] - dot * xj[alpha]);
            }
        }
        let row = &mut out.flat_mut()[j * d..(j + 1) * d];
        for alpha in 0..d {
            row[alpha] = C64::new(acc[alpha] * c0, 0.0);
        }
        if let Some(omega) = p.omegas().get(j) {
            for alpha in 0..d {
                let mut acc_o = 0.0;
                for beta in 0..d {
                    acc_o += omega.matrix().get(alpha, beta).re * xj[beta];
                }
                row[alpha] += C64::new(acc_o, 0.0);
            }
        }
    }
    Ok(out)
}

/// Phase-oscillator right-hand side (requires the `kuramoto` form):
/// dθ_j/dt = ν_j + (κ/N) Σ_{k≠j} sin(θ_k^τ − θ_j).
pub fn rhs_kuramoto(
    theta: &[f64],
    theta_delayed: &[f64],
    p: &ModelParams,
) -> Result<Vec<f64>, ModelError> {
    let nus = p.kuramoto_frequencies()?;
    assert_eq!(theta.len(), p.n(), "phase vector length mismatch");
    assert_eq!(theta_delayed.len(), p.n(), "delayed phase vector length mismatch");
    let n = p.n();
    let c = p.kappa0() / n as f64;
    let mut out = Vec::with_capacity(n);
    for j in 0..n {
        let mut acc = 0.0;
        for k in 0..n {
            if k == j {
                continue;
            }
            acc += (theta_delayed[k] - theta[j]).sin();
        }
        out.push(nus[j] + c * acc);
    }
    Ok(out)
}

/// Dispatches to the right-hand side matching the parameter form. The phase
/// form has no ensemble representation here and is rejected.
pub fn rhs_for_form(
    current: &Ensemble,
    delayed: &Ensemble,
    p: &ModelParams,
) -> Result<Derivative, ModelError> {
    match p.form() {
        ModelForm::General => rhs_general(current, delayed, p),
        ModelForm::Sl => rhs_sl(current, delayed, p),
        ModelForm::CloseSl => rhs_close_sl(current, delayed, p),
        ModelForm::LsReal => rhs_ls_real(current, delayed, p),
        ModelForm::Kuramoto => Err(ModelError::Invalid(
            "phase form integrates through the scalar path".into(),
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sphere::{random_ensemble, ComplexVec, UNIT_NORM_TOL};

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn pair_ensemble(z1: Vec<C64>, z2: Vec<C64>) -> Ensemble {
        let states = vec![ComplexVec::new(z1).unwrap(), ComplexVec::new(z2).unwrap()];
        Ensemble::new(0.0, &states, UNIT_NORM_TOL).unwrap()
    }

    #[test]
    fn general_rhs_two_particle_hand_values() {
        // N = 2, d = 1, z1 = 1, z2 = i, τ = 0, κ₀ = 1, κ₁ = 0:
        //   dz1/dt = (1/2)(⟨z1,z1⟩ z2 − ⟨z2,z1⟩ z1) = (1/2)(i − (−i)) = i
        //   dz2/dt = (1/2)(⟨z2,z2⟩ z1 − ⟨z1,z2⟩ z2) = (1/2)(1 − i·i) = 1
        let e = pair_ensemble(vec![c(1.0, 0.0)], vec![c(0.0, 1.0)]);
        let p = ModelParams::general(
            2,
            1,
            1.0,
            0.0,
            0.0,
            OmegaSpec::Zero,
            CouplingGraph::Complete,
        )
        .unwrap();
        let dz = rhs_general(&e, &e, &p).unwrap();
        assert!((dz.row(0)[0] - c(0.0, 1.0)).norm() < 1e-15);
        assert!((dz.row(1)[0] - c(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn sl_rhs_hand_value() {
        // N = 2, d = 1, z1 = 1, z2^τ = i, κ₀ = 1:
        //   dz1/dt = (1/2)(i − Re⟨i,1⟩·1) = i/2
        let current = pair_ensemble(vec![c(1.0, 0.0)], vec![c(1.0, 0.0)]);
        let delayed = pair_ensemble(vec![c(1.0, 0.0)], vec![c(0.0, 1.0)]);
        let p = ModelParams::sl(2, 1, 1.0, 0.0).unwrap();
        let dz = rhs_sl(&current, &delayed, &p).unwrap();
        assert!((dz.row(0)[0] - c(0.0, 0.5)).norm() < 1e-15);
    }

    #[test]
    fn ls_real_rhs_hand_value() {
        // d = 2, x1 = (1,0), x2^τ = (0,1), κ₀ = 1: dx1/dt = (0, 1/2).
        let current = pair_ensemble(
            vec![c(1.0, 0.0), c(0.0, 0.0)],
            vec![c(1.0, 0.0), c(0.0, 0.0)],
        );
        let delayed = pair_ensemble(
            vec![c(1.0, 0.0), c(0.0, 0.0)],
            vec![c(0.0, 0.0), c(1.0, 0.0)],
        );
        let p = ModelParams::ls_real(2, 2, 1.0, 0.0, OmegaSpec::Zero, CouplingGraph::Complete)
            .unwrap();
        let dz = rhs_ls_real(&current, &delayed, &p).unwrap();
        assert_eq!(dz.row(0), &[c(0.0, 0.0), c(0.5, 0.0)]);
        assert_eq!(dz.max_imag_abs(), 0.0);
    }

    #[test]
    fn kuramoto_rhs_hand_value() {
        // N = 2, ν = 0, κ = 1, θ = (0, π/2): dθ/dt = (1/2, −1/2).
        let p = ModelParams::kuramoto(2, 1.0, &[0.0, 0.0], 0.0).unwrap();
        let theta = [0.0, std::f64::consts::FRAC_PI_2];
        let dtheta = rhs_kuramoto(&theta, &theta, &p).unwrap();
        assert!((dtheta[0] - 0.5).abs() < 1e-15);
        assert!((dtheta[1] + 0.5).abs() < 1e-15);
    }

    #[test]
    fn sl_constructor_derives_kappa1() {
        let p = ModelParams::sl(3, 2, 2.0, 0.1).unwrap();
        assert_eq!(p.kappa1(), -1.0);
        assert_eq!(p.tilde_kappa(), 0.0);
    }

    #[test]
    fn close_sl_constructor_stores_tilde_kappa() {
        let p = ModelParams::close_sl(4, 2, 1.0, 0.03, 0.05).unwrap();
        assert!((p.tilde_kappa() - 0.03).abs() < 1e-16);
        assert!((p.kappa1() + 0.47).abs() < 1e-16);
    }

    #[test]
    fn sl_matches_general_with_derived_gains() {
        // With ‖z_j‖ = 1 the two expressions agree up to rounding; the
        // observed gap stays below 1e-14 componentwise.
        for seed in 0..50 {
            let current = random_ensemble(seed, 5, 3, 2.0).unwrap();
            let delayed = random_ensemble(seed + 1000, 5, 3, 2.0).unwrap();
            let p_sl = ModelParams::sl(5, 3, 1.3, 0.0).unwrap();
            let p_gen = ModelParams::general(
                5,
                3,
                1.3,
                -0.65,
                0.0,
                OmegaSpec::Zero,
                CouplingGraph::Complete,
            )
            .unwrap();
            let a = rhs_sl(&current, &delayed, &p_sl).unwrap();
            let b = rhs_general(&current, &delayed, &p_gen).unwrap();
            for (x, y) in a.flat().iter().zip(b.flat().iter()) {
                assert!((x - y).norm() <= 1e-14, "seed {seed}: {x} vs {y}");
            }
        }
    }

    #[test]
    fn close_sl_matches_general() {
        for seed in 0..50 {
            let current = random_ensemble(seed, 4, 2, 2.0).unwrap();
            let delayed = random_ensemble(seed + 2000, 4, 2, 2.0).unwrap();
            let p_c = ModelParams::close_sl(4, 2, 1.0, 0.03, 0.0).unwrap();
            let p_g = ModelParams::general(
                4,
                2,
                1.0,
                p_c.kappa1(),
                0.0,
                OmegaSpec::Zero,
                CouplingGraph::Complete,
            )
            .unwrap();
            let a = rhs_close_sl(&current, &delayed, &p_c).unwrap();
            let b = rhs_general(&current, &delayed, &p_g).unwrap();
            for (x, y) in a.flat().iter().zip(b.flat().iter()) {
                assert!((x - y).norm() <= 1e-14, "seed {seed}");
            }
        }
    }

    #[test]
    fn close_sl_with_zero_tilde_matches_sl() {
        let current = random_ensemble(9, 4, 2, 2.0).unwrap();
        let delayed = random_ensemble(10, 4, 2, 2.0).unwrap();
        let p_c = ModelParams::close_sl(4, 2, 1.0, 0.0, 0.0).unwrap();
        let p_s = ModelParams::sl(4, 2, 1.0, 0.0).unwrap();
        let a = rhs_close_sl(&current, &delayed, &p_c).unwrap();
        let b = rhs_sl(&current, &delayed, &p_s).unwrap();
        for (x, y) in a.flat().iter().zip(b.flat().iter()) {
            assert!((x - y).norm() <= 1e-14);
        }
    }

    #[test]
    fn rhs_is_tangent_to_the_sphere() {
        // Re⟨dz_j/dt, z_j⟩ = 0 up to rounding whenever ‖z_j‖ = 1.
        for seed in 0..50 {
            let e = random_ensemble(seed, 6, 3, 2.0).unwrap();
            let delayed = random_ensemble(seed + 500, 6, 3, 2.0).unwrap();
            let mut rng_kappa = 0.3 + 0.1 * (seed as f64);
            rng_kappa = rng_kappa.min(1.9);
            let p = ModelParams::general(
                6,
                3,
                rng_kappa,
                -0.2,
                0.0,
                OmegaSpec::Zero,
                CouplingGraph::Complete,
            )
            .unwrap();
            let dz = rhs_general(&e, &delayed, &p).unwrap();
            for j in 0..6 {
                let g = inner_slices(dz.row(j), e.state(j));
                assert!(g.re.abs() <= 1e-12, "seed {seed} particle {j}: {}", g.re);
            }
        }
    }

    #[test]
    fn rhs_respects_particle_relabeling() {
        // Swapping two particles and their network rows/columns swaps the
        // derivative rows.
        let current = random_ensemble(21, 4, 2, 2.0).unwrap();
        let delayed = random_ensemble(22, 4, 2, 2.0).unwrap();
        let rows = vec![
            vec![0.0, 1.0, 0.5, 0.2],
            vec![1.0, 0.0, 1.0, 0.7],
            vec![0.5, 1.0, 0.0, 1.0],
            vec![0.2, 0.7, 1.0, 0.0],
        ];
        let graph = CouplingGraph::Weighted(Adjacency::new(&rows).unwrap());
        let p = ModelParams::general(4, 2, 1.0, 0.3, 0.0, OmegaSpec::Zero, graph).unwrap();
        let dz = rhs_general(&current, &delayed, &p).unwrap();

        let perm = [1usize, 0, 2, 3];
        let permute = |e: &Ensemble| {
            let mut data = Vec::with_capacity(8);
            for &src in &perm {
                data.extend_from_slice(e.state(src));
            }
            Ensemble::from_flat(e.time(), 4, 2, data)
        };
        let mut prows = vec![vec![0.0; 4]; 4];
        for i in 0..4 {
            for j in 0..4 {
                prows[i][j] = rows[perm[i]][perm[j]];
            }
        }
        let pgraph = CouplingGraph::Weighted(Adjacency::new(&prows).unwrap());
        let pp = ModelParams::general(4, 2, 1.0, 0.3, 0.0, OmegaSpec::Zero, pgraph).unwrap();
        let pdz = rhs_general(&permute(&current), &permute(&delayed), &pp).unwrap();
        for i in 0..4 {
            for (x, y) in pdz.row(i).iter().zip(dz.row(perm[i]).iter()) {
                assert!((x - y).norm() <= 1e-15);
            }
        }
    }

    #[test]
    fn zero_weight_rows_decouple() {
        // A particle with no edges moves only under its free flow (here zero).
        let rows = vec![vec![0.0, 0.0], vec![0.0, 0.0]];
        let graph = CouplingGraph::Weighted(Adjacency::new(&rows).unwrap());
        let p = ModelParams::general(2, 1, 1.0, 0.5, 0.0, OmegaSpec::Zero, graph).unwrap();
        let e = pair_ensemble(vec![c(1.0, 0.0)], vec![c(0.0, 1.0)]);
        let dz = rhs_general(&e, &e, &p).unwrap();
        assert!(dz.flat().iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn wrong_form_is_rejected() {
        let e = pair_ensemble(vec![c(1.0, 0.0)], vec![c(0.0, 1.0)]);
        let p = ModelParams::general(
            2,
            1,
            1.0,
            0.0,
            0.0,
            OmegaSpec::Zero,
            CouplingGraph::Complete,
        )
        .unwrap();
        assert!(matches!(
            rhs_sl(&e, &e, &p).unwrap_err(),
            ModelError::WrongForm { .. }
        ));
        assert!(matches!(
            rhs_close_sl(&e, &e, &p).unwrap_err(),
            ModelError::WrongForm { .. }
        ));
        assert!(matches!(
            rhs_ls_real(&e, &e, &p).unwrap_err(),
            ModelError::WrongForm { .. }
        ));
    }

    #[test]
    fn ls_real_rejects_complex_input() {
        let e = pair_ensemble(vec![c(1.0, 0.0)], vec![c(0.0, 1.0)]);
        let p = ModelParams::ls_real(2, 1, 1.0, 0.0, OmegaSpec::Zero, CouplingGraph::Complete)
            .unwrap();
        assert!(matches!(
            rhs_ls_real(&e, &e, &p).unwrap_err(),
            ModelError::NonRealInput { .. }
        ));
    }

    #[test]
    fn ls_real_matches_general_on_real_data() {
        use crate::sphere::random_real_ensemble;
        for seed in 0..50 {
            let current = random_real_ensemble(seed, 5, 3, 2.0).unwrap();
            let delayed = random_real_ensemble(seed + 300, 5, 3, 2.0).unwrap();
            let p_r = ModelParams::ls_real(5, 3, 1.1, 0.0, OmegaSpec::Zero, CouplingGraph::Complete)
                .unwrap();
            // Arbitrary κ₁: its contribution vanishes identically on real data.
            let p_g = ModelParams::general(
                5,
                3,
                1.1,
                0.37,
                0.0,
                OmegaSpec::Zero,
                CouplingGraph::Complete,
            )
            .unwrap();
            let a = rhs_ls_real(&current, &delayed, &p_r).unwrap();
            let b = rhs_general(&current, &delayed, &p_g).unwrap();
            for (x, y) in a.flat().iter().zip(b.flat().iter()) {
                assert!((x - y).norm() <= 1e-14, "seed {seed}");
            }
            assert_eq!(b.max_imag_abs(), 0.0);
        }
    }

    #[test]
    fn kuramoto_lift_satisfies_chain_rule() {
        // dx_j/dt from the real form at x_j = (cos θ_j, sin θ_j) equals
        // dθ_j/dt · (−sin θ_j, cos θ_j).
        let thetas = [0.3, -1.2, 2.0, 0.9];
        let delayed_thetas = [0.1, -0.8, 2.3, 1.4];
        let nus = [0.5, -0.2, 0.0, 0.8];
        let kappa = 1.3;
        let p_k = ModelParams::kuramoto(4, kappa, &nus, 0.0).unwrap();
        let dtheta = rhs_kuramoto(&thetas, &delayed_thetas, &p_k).unwrap();

        let lift = |angles: &[f64]| {
            let data: Vec<C64> = angles
                .iter()
                .flat_map(|&t| [c(t.cos(), 0.0), c(t.sin(), 0.0)])
                .collect();
            Ensemble::from_flat(0.0, 4, 2, data)
        };
        let omegas =
            OmegaSpec::PerParticle(nus.iter().map(|&nu| SkewHermitian::rotation_2d(nu)).collect());
        let p_r =
            ModelParams::ls_real(4, 2, kappa, 0.0, omegas, CouplingGraph::Complete).unwrap();
        let dx = rhs_ls_real(&lift(&thetas), &lift(&delayed_thetas), &p_r).unwrap();
        for j in 0..4 {
            let expect = [
                -thetas[j].sin() * dtheta[j],
                thetas[j].cos() * dtheta[j],
            ];
            assert!((dx.row(j)[0].re - expect[0]).abs() <= 1e-12);
            assert!((dx.row(j)[1].re - expect[1]).abs() <= 1e-12);
        }
    }

    #[test]
    fn parameter_validation_rejects_bad_shapes() {
        assert!(ModelParams::general(
            0,
            2,
            1.0,
            0.0,
            0.0,
            OmegaSpec::Zero,
            CouplingGraph::Complete
        )
        .is_err());
        assert!(ModelParams::general(
            2,
            2,
            1.0,
            0.0,
            -0.1,
            OmegaSpec::Zero,
            CouplingGraph::Complete
        )
        .is_err());
        // Free-flow dimension mismatch.
        assert!(ModelParams::general(
            2,
            3,
            1.0,
            0.0,
            0.0,
            OmegaSpec::Common(SkewHermitian::rotation_2d(1.0)),
            CouplingGraph::Complete
        )
        .is_err());
        // Network size mismatch.
        assert!(ModelParams::general(
            3,
            2,
            1.0,
            0.0,
            0.0,
            OmegaSpec::Zero,
            CouplingGraph::Weighted(Adjacency::complete(2))
        )
        .is_err());
        // Complex free flow rejected by the real form.
        let mut m = crate::sphere::ComplexMatrix::zero(2);
        m.set(0, 0, c(0.0, 1.0));
        let omega = SkewHermitian::new(m).unwrap();
        assert!(ModelParams::ls_real(
            2,
            2,
            1.0,
            0.0,
            OmegaSpec::Common(omega),
            CouplingGraph::Complete
        )
        .is_err());
    }
}
