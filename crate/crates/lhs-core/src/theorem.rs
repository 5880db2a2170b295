//! Sufficient-condition gates for aggregation guarantees.
//!
//! Each gate evaluates the hypotheses of one analytic guarantee on a concrete
//! parameter set plus a scalar measured from the initial data, computes every
//! derived constant, and emits one of three predictions:
//!
//! ```text
//! complete_aggregation      D(Z(t)) → 0 as t → ∞
//! practical_bound(x₋)       limsup_t L(t) ≤ x₋
//! no_guarantee              at least one hypothesis failed
//! ```
//!
//! Hypotheses compare user-chosen parameters, not measured quantities, so
//! every strict inequality is checked with an exact floating comparison.

use crate::model::{ModelForm, ModelParams};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;

/// Which sufficient condition a report speaks for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GateId {
    /// SL gain pair, zero free flow, complete graph, small delay.
    SlComplete,
    /// Near-SL gain pair, zero free flow, complete graph, small delay.
    NearSlComplete,
    /// Complete graph, zero free flow, delay-dependent defect bound.
    CompleteGraphPractical,
    /// Weighted network, heterogeneous free flows, defect bound.
    NetworkPractical,
    /// Zero delay, common free flow, order-parameter condition.
    UndelayedOrder,
    /// Real states, common real free flow, small delay.
    RealSmallDelay,
}

impl fmt::Display for GateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            GateId::SlComplete => "sl_complete",
            GateId::NearSlComplete => "near_sl_complete",
            GateId::CompleteGraphPractical => "complete_graph_practical",
            GateId::NetworkPractical => "network_practical",
            GateId::UndelayedOrder => "undelayed_order",
            GateId::RealSmallDelay => "real_small_delay",
        };
        f.write_str(s)
    }
}

/// One hypothesis row: `lhs <relation> rhs` with its outcome.
#[derive(Debug, Clone, Serialize)]
pub struct HypothesisCheck {
    pub name: String,
    pub relation: String,
    pub lhs: f64,
    pub rhs: f64,
    pub pass: bool,
}

impl HypothesisCheck {
    fn new(name: &str, relation: &str, lhs: f64, rhs: f64, pass: bool) -> Self {
        Self {
            name: name.to_string(),
            relation: relation.to_string(),
            lhs,
            rhs,
            pass,
        }
    }

    fn strict_lt(name: &str, relation: &str, lhs: f64, rhs: f64) -> Self {
        Self::new(name, relation, lhs, rhs, lhs < rhs)
    }

    fn strict_gt(name: &str, relation: &str, lhs: f64, rhs: f64) -> Self {
        Self::new(name, relation, lhs, rhs, lhs > rhs)
    }

    fn exact_eq(name: &str, relation: &str, lhs: f64, rhs: f64) -> Self {
        Self::new(name, relation, lhs, rhs, lhs == rhs)
    }

    fn boolean(name: &str, relation: &str, holds: bool) -> Self {
        Self::new(name, relation, holds as u8 as f64, 1.0, holds)
    }
}

/// What the gate promises when all hypotheses hold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Prediction {
    CompleteAggregation,
    PracticalBound { x_minus: f64 },
    NoGuarantee,
}

/// Full machine-readable gate evaluation.
#[derive(Debug, Clone, Serialize)]
pub struct TheoremReport {
    pub gate: GateId,
    pub checks: Vec<HypothesisCheck>,
    pub constants: BTreeMap<String, f64>,
    pub prediction: Prediction,
    pub notes: Vec<String>,
}

impl TheoremReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    /// Flat `key=value` rendering with stable field order.
    pub fn to_key_values(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("gate={}\n", self.gate));
        match self.prediction {
            Prediction::CompleteAggregation => {
                out.push_str("prediction=complete_aggregation\n")
            }
            Prediction::PracticalBound { x_minus } => {
                out.push_str(&format!("prediction=practical_bound\nx_minus={x_minus:.17e}\n"))
            }
            Prediction::NoGuarantee => out.push_str("prediction=no_guarantee\n"),
        }
        for c in &self.checks {
            out.push_str(&format!(
                "check.{}={} relation=\"{}\" lhs={:.17e} rhs={:.17e}\n",
                c.name,
                if c.pass { "pass" } else { "fail" },
                c.relation,
                c.lhs,
                c.rhs
            ));
        }
        for (k, v) in &self.constants {
            out.push_str(&format!("constant.{k}={v:.17e}\n"));
        }
        for (i, n) in self.notes.iter().enumerate() {
            out.push_str(&format!("note.{i}={n}\n"));
        }
        out
    }
}

/// Builds the report, downgrading the prediction when any check failed.
fn finish(
    gate: GateId,
    checks: Vec<HypothesisCheck>,
    constants: BTreeMap<String, f64>,
    on_pass: Prediction,
    notes: Vec<String>,
) -> TheoremReport {
    let prediction = if checks.iter().all(|c| c.pass) {
        on_pass
    } else {
        Prediction::NoGuarantee
    };
    TheoremReport {
        gate,
        checks,
        constants,
        prediction,
        notes,
    }
}

/// Numerically stable roots of ax² + bx + c with a > 0, ordered low/high.
/// Returns None when the discriminant is not positive.
fn stable_roots(a: f64, b: f64, c: f64) -> Option<(f64, f64)> {
    let disc = b * b - 4.0 * a * c;
    if !(disc > 0.0) {
        return None;
    }
    if c == 0.0 {
        let other = -b / a;
        return Some((other.min(0.0), other.max(0.0)));
    }
    let q = -0.5 * (b + b.signum() * disc.sqrt());
    let r1 = q / a;
    let r2 = c / q;
    Some((r1.min(r2), r1.max(r2)))
}

/// C₁ = 2((N−1)/N)·min{κ₀+|κ₁|, κ₀+|κ̃|}.
pub fn c1_constant(p: &ModelParams) -> f64 {
    let n = p.n() as f64;
    2.0 * ((n - 1.0) / n)
        * (p.kappa0() + p.kappa1().abs()).min(p.kappa0() + p.tilde_kappa().abs())
}

/// C₂ = 2(N−1)(κ₀+|κ₁|)/N.
pub fn c2_constant(p: &ModelParams) -> f64 {
    let n = p.n() as f64;
    2.0 * (n - 1.0) / n * (p.kappa0() + p.kappa1().abs())
}

/// C₃ = max_i ‖Ω_i‖_∞ + 2‖A‖(N−1)(κ₀+|κ₁|)/N, with ‖A‖ the max entry.
pub fn c3_constant(p: &ModelParams) -> f64 {
    let n = p.n() as f64;
    p.omegas().max_inf_norm()
        + 2.0 * p.graph().max_entry(p.n()) * (n - 1.0) * (p.kappa0() + p.kappa1().abs()) / n
}

/// Variant of C₃ built on the max row gap of A instead of its max entry.
pub fn c3_row_gap_constant(p: &ModelParams) -> f64 {
    let n = p.n() as f64;
    p.omegas().max_inf_norm()
        + 2.0 * p.graph().max_row_gap() * (n - 1.0) * (p.kappa0() + p.kappa1().abs()) / n
}

/// γ = (κ₀ + 2|κ̃|)/N, the delay-window weight of the Lyapunov monitor.
pub fn gamma_constant(p: &ModelParams) -> f64 {
    (p.kappa0() + 2.0 * p.tilde_kappa().abs()) / p.n() as f64
}

/// β = (7/4)κ₀ − 4κ₀/N − 4|κ̃| − 8|κ̃|/N, the dissipation rate.
pub fn beta_constant(p: &ModelParams) -> f64 {
    let n = p.n() as f64;
    let tk = p.tilde_kappa().abs();
    1.75 * p.kappa0() - 4.0 * p.kappa0() / n - 4.0 * tk - 8.0 * tk / n
}

fn structural_uniform_zero_flow(p: &ModelParams, checks: &mut Vec<HypothesisCheck>) {
    checks.push(HypothesisCheck::boolean(
        "uniform_coupling",
        "all a_jk == 1",
        p.graph().is_uniform(p.n()),
    ));
    checks.push(HypothesisCheck::exact_eq(
        "zero_free_flow",
        "max_j ||Omega_j|| == 0",
        p.omegas().max_inf_norm(),
        0.0,
    ));
}

/// Gate: SL gain pair with small delay forces the diameter to zero.
pub fn check_sl_complete(p: &ModelParams, diam0: f64) -> TheoremReport {
    let mut checks = Vec::new();
    checks.push(HypothesisCheck::exact_eq(
        "sl_gain_pair",
        "kappa0/2 + kappa1 == 0",
        p.tilde_kappa(),
        0.0,
    ));
    structural_uniform_zero_flow(p, &mut checks);
    checks.push(HypothesisCheck::strict_gt(
        "positive_coupling",
        "kappa0 > 0",
        p.kappa0(),
        0.0,
    ));
    checks.push(HypothesisCheck::new(
        "ensemble_size",
        "N >= 3",
        p.n() as f64,
        3.0,
        p.n() >= 3,
    ));
    let tau_threshold = 1.0 / (16.0 * p.kappa0());
    checks.push(HypothesisCheck::strict_lt(
        "small_delay",
        "tau < 1/(16 kappa0)",
        p.tau(),
        tau_threshold,
    ));
    checks.push(HypothesisCheck::strict_lt(
        "initial_diameter",
        "sup D(history) < 1/8",
        diam0,
        0.125,
    ));
    let mut constants = BTreeMap::new();
    constants.insert("tau_threshold".to_string(), tau_threshold);
    finish(
        GateId::SlComplete,
        checks,
        constants,
        Prediction::CompleteAggregation,
        Vec::new(),
    )
}

/// Gate: near-SL gain pair with small delay forces the diameter to zero.
/// Also reports the (β, γ) pair the Lyapunov monitor should use.
pub fn check_near_sl_complete(p: &ModelParams, diam0: f64) -> TheoremReport {
    let mut checks = Vec::new();
    structural_uniform_zero_flow(p, &mut checks);
    checks.push(HypothesisCheck::strict_gt(
        "positive_coupling",
        "kappa0 > 0",
        p.kappa0(),
        0.0,
    ));
    let tilde = p.tilde_kappa();
    let tilde_threshold = 9.0 / 256.0 * p.kappa0();
    checks.push(HypothesisCheck::strict_lt(
        "near_sl_gain",
        "|kappa0/2 + kappa1| < (9/256) kappa0",
        tilde.abs(),
        tilde_threshold,
    ));
    let c1 = c1_constant(p);
    checks.push(HypothesisCheck::strict_lt(
        "small_delay",
        "C1 tau < 1/8",
        c1 * p.tau(),
        0.125,
    ));
    checks.push(HypothesisCheck::new(
        "ensemble_size",
        "N >= 3",
        p.n() as f64,
        3.0,
        p.n() >= 3,
    ));
    checks.push(HypothesisCheck::strict_lt(
        "initial_diameter",
        "sup D(history) < 1/8",
        diam0,
        0.125,
    ));
    let mut constants = BTreeMap::new();
    constants.insert("tilde_kappa".to_string(), tilde);
    constants.insert("tilde_threshold".to_string(), tilde_threshold);
    constants.insert("C1".to_string(), c1);
    constants.insert("beta".to_string(), beta_constant(p));
    constants.insert("gamma".to_string(), gamma_constant(p));
    finish(
        GateId::NearSlComplete,
        checks,
        constants,
        Prediction::CompleteAggregation,
        Vec::new(),
    )
}

/// Gate: complete graph, zero free flow; the defect maximum contracts into
/// [0, x₋] provided it starts below x₊, where x± are the roots of
///
/// ```text
/// f(x) = 2κ₀x² + (−2κ₀ + 2C₂κ₀τ + 4|κ₁| + 2C₂κ₀τ/N)x
///      + 4C₂|κ₁|τ + (4C₂τ/N)(κ₀ + 2|κ₁|)
/// ```
pub fn check_complete_graph_practical(p: &ModelParams, l0: f64) -> TheoremReport {
    let mut checks = Vec::new();
    structural_uniform_zero_flow(p, &mut checks);
    checks.push(HypothesisCheck::strict_gt(
        "positive_coupling",
        "kappa0 > 0",
        p.kappa0(),
        0.0,
    ));
    checks.push(HypothesisCheck::strict_lt(
        "gain_ratio",
        "2|kappa1| < kappa0",
        2.0 * p.kappa1().abs(),
        p.kappa0(),
    ));
    let n = p.n() as f64;
    let (k0, k1, tau) = (p.kappa0(), p.kappa1().abs(), p.tau());
    let c2 = c2_constant(p);
    let qa = 2.0 * k0;
    let qb = -2.0 * k0 + 2.0 * c2 * k0 * tau + 4.0 * k1 + 2.0 * c2 * k0 * tau / n;
    let qc = 4.0 * c2 * k1 * tau + (4.0 * c2 * tau / n) * (k0 + 2.0 * k1);
    let disc = qb * qb - 4.0 * qa * qc;
    let roots = stable_roots(qa, qb, qc);
    checks.push(HypothesisCheck::strict_gt(
        "real_roots",
        "discriminant > 0",
        disc,
        0.0,
    ));
    let mut constants = BTreeMap::new();
    constants.insert("C2".to_string(), c2);
    constants.insert("quadratic_a".to_string(), qa);
    constants.insert("quadratic_b".to_string(), qb);
    constants.insert("quadratic_c".to_string(), qc);
    constants.insert("discriminant".to_string(), disc);
    let zero_delay_limit = 1.0 - 2.0 * k1 / k0;
    constants.insert("x_plus_zero_delay".to_string(), zero_delay_limit);
    let mut notes = vec![format!(
        "initial defect is compared against the upper root x_plus; \
         its zero-delay limit is 1 - 2|kappa1|/kappa0 = {zero_delay_limit:.6}"
    )];
    let on_pass = match roots {
        Some((x_minus, x_plus)) => {
            constants.insert("x_minus".to_string(), x_minus);
            constants.insert("x_plus".to_string(), x_plus);
            checks.push(HypothesisCheck::strict_lt(
                "initial_defect",
                "L(0) < x_plus",
                l0,
                x_plus,
            ));
            Prediction::PracticalBound { x_minus }
        }
        None => {
            notes.push("delay too large for real roots".to_string());
            Prediction::NoGuarantee
        }
    };
    finish(
        GateId::CompleteGraphPractical,
        checks,
        constants,
        on_pass,
        notes,
    )
}

/// Gate: weighted network with heterogeneous free flows; the defect maximum
/// obeys dL/dt ≤ κ₀(A₁L² − (A₁−A₂)L + A₃) for the binding pair, giving a
/// practical bound x₋ that vanishes as τ↘0 followed by κ₀→∞.
pub fn check_network_practical(p: &ModelParams, l0: f64) -> TheoremReport {
    let mut checks = Vec::new();
    checks.push(HypothesisCheck::strict_gt(
        "positive_coupling",
        "kappa0 > 0",
        p.kappa0(),
        0.0,
    ));
    let n = p.n();
    let nf = n as f64;
    let (k0, k1, tau) = (p.kappa0(), p.kappa1().abs(), p.tau());
    let c3 = c3_constant(p);
    let d_omega = p.omegas().heterogeneity();

    // Binding pair: smallest network threshold 1 − 2Σ|a_ik−a_jk| / Σ(a_ik+a_jk).
    let mut worst = (0usize, 1usize);
    let mut threshold = f64::INFINITY;
    for i in 0..n {
        for j in (i + 1)..n {
            let mut sum = 0.0;
            let mut gap = 0.0;
            for k in 0..n {
                let (aik, ajk) = (p.graph().weight(i, k), p.graph().weight(j, k));
                sum += aik + ajk;
                gap += (aik - ajk).abs();
            }
            let thr = if sum > 0.0 {
                1.0 - 2.0 * gap / sum
            } else {
                f64::NEG_INFINITY
            };
            if thr < threshold {
                threshold = thr;
                worst = (i, j);
            }
        }
    }
    let (wi, wj) = worst;
    let (mut sum, mut gap) = (0.0, 0.0);
    for k in 0..n {
        let (aik, ajk) = (p.graph().weight(wi, k), p.graph().weight(wj, k));
        sum += aik + ajk;
        gap += (aik - ajk).abs();
    }
    let diag = p.graph().weight(wi, wi) + p.graph().weight(wj, wj);
    let a1 = sum / nf;
    let a2 = 2.0 * gap / nf
        + 2.0 * c3 * tau * sum / nf
        + c3 * tau * diag / nf
        + 2.0 * k1 * sum / (nf * k0);
    let a3 = d_omega / k0
        + 2.0 * c3 * tau * gap / nf
        + 2.0 * c3 * tau * diag * (1.0 + k1 / k0) / nf
        + 4.0 * c3 * tau * k1 / k0;
    let disc = (a1 - a2) * (a1 - a2) - 4.0 * a1 * a3;
    let roots = stable_roots(a1, -(a1 - a2), a3);

    checks.push(HypothesisCheck::strict_gt(
        "contraction_margin",
        "A1 - A2 > 0",
        a1 - a2,
        0.0,
    ));
    checks.push(HypothesisCheck::strict_gt(
        "real_roots",
        "discriminant > 0",
        disc,
        0.0,
    ));
    checks.push(HypothesisCheck::strict_lt(
        "initial_defect",
        "L(0) < min over pairs of 1 - 2 sum|a_ik - a_jk| / sum(a_ik + a_jk)",
        l0,
        threshold,
    ));

    let mut constants = BTreeMap::new();
    constants.insert("C3".to_string(), c3);
    constants.insert("C3_row_gap".to_string(), c3_row_gap_constant(p));
    constants.insert("D_Omega".to_string(), d_omega);
    constants.insert("A1".to_string(), a1);
    constants.insert("A2".to_string(), a2);
    constants.insert("A3".to_string(), a3);
    constants.insert("discriminant".to_string(), disc);
    constants.insert("threshold".to_string(), threshold);
    constants.insert("worst_pair_i".to_string(), wi as f64);
    constants.insert("worst_pair_j".to_string(), wj as f64);
    let mut notes = vec![
        "the bound is asymptotic in the joint limit tau -> 0 then kappa0 -> infinity; \
         the reported roots hold at the given finite values"
            .to_string(),
        "C3 uses the max entry of the weight matrix; C3_row_gap reports the max-row-gap \
         variant for comparison"
            .to_string(),
    ];
    let on_pass = match roots {
        Some((x_minus, x_plus)) => {
            constants.insert("x_minus".to_string(), x_minus);
            constants.insert("x_plus".to_string(), x_plus);
            Prediction::PracticalBound { x_minus }
        }
        None => {
            notes.push("delay too large for real roots".to_string());
            Prediction::NoGuarantee
        }
    };
    finish(GateId::NetworkPractical, checks, constants, on_pass, notes)
}

/// Gate: zero delay, common free flow, complete graph; a large enough order
/// parameter forces complete aggregation, and the flow splits as
/// z_j(t) = e^{Ωt} w_j(t).
pub fn check_undelayed_order(p: &ModelParams, rho0: f64) -> TheoremReport {
    let mut checks = Vec::new();
    checks.push(HypothesisCheck::exact_eq(
        "zero_delay",
        "tau == 0",
        p.tau(),
        0.0,
    ));
    checks.push(HypothesisCheck::exact_eq(
        "common_free_flow",
        "max_{i,j} ||Omega_i - Omega_j|| == 0",
        p.omegas().heterogeneity(),
        0.0,
    ));
    checks.push(HypothesisCheck::boolean(
        "uniform_coupling",
        "all a_jk == 1",
        p.graph().is_uniform(p.n()),
    ));
    checks.push(HypothesisCheck::new(
        "ensemble_size",
        "N >= 3",
        p.n() as f64,
        3.0,
        p.n() >= 3,
    ));
    checks.push(HypothesisCheck::strict_gt(
        "positive_second_gain",
        "kappa1 > 0",
        p.kappa1(),
        0.0,
    ));
    let kappa1_threshold = 0.25 * p.kappa0();
    checks.push(HypothesisCheck::strict_lt(
        "gain_ratio",
        "kappa1 < kappa0/4",
        p.kappa1(),
        kappa1_threshold,
    ));
    let rho_threshold = (p.n() as f64 - 2.0) / p.n() as f64;
    checks.push(HypothesisCheck::strict_gt(
        "initial_order_parameter",
        "rho(0) > (N-2)/N",
        rho0,
        rho_threshold,
    ));
    let mut constants = BTreeMap::new();
    constants.insert("rho_threshold".to_string(), rho_threshold);
    constants.insert("kappa1_threshold".to_string(), kappa1_threshold);
    finish(
        GateId::UndelayedOrder,
        checks,
        constants,
        Prediction::CompleteAggregation,
        vec![
            "the splitting identity z_j(t) = exp(Omega t) w_j(t) is testable via the \
             splitting comparison"
                .to_string(),
        ],
    )
}

/// Gate: real states under a common real skew free flow with small delay.
pub fn check_real_small_delay(p: &ModelParams, diam0: f64) -> TheoremReport {
    let mut checks = Vec::new();
    checks.push(HypothesisCheck::boolean(
        "real_form",
        "model runs the real reduction",
        p.form() == ModelForm::LsReal,
    ));
    checks.push(HypothesisCheck::exact_eq(
        "common_free_flow",
        "max_{i,j} ||Omega_i - Omega_j|| == 0",
        p.omegas().heterogeneity(),
        0.0,
    ));
    checks.push(HypothesisCheck::new(
        "ensemble_size",
        "N >= 3",
        p.n() as f64,
        3.0,
        p.n() >= 3,
    ));
    checks.push(HypothesisCheck::strict_gt(
        "positive_coupling",
        "kappa > 0",
        p.kappa0(),
        0.0,
    ));
    let omega_norm = p.omegas().max_inf_norm();
    let tau_threshold = 1.0 / (8.0 * (p.dim() as f64 * omega_norm + 2.0 * p.kappa0()));
    checks.push(HypothesisCheck::strict_lt(
        "small_delay",
        "tau < 1/(8(d ||Omega|| + 2 kappa))",
        p.tau(),
        tau_threshold,
    ));
    checks.push(HypothesisCheck::strict_lt(
        "initial_diameter",
        "sup D(history) < 1/8",
        diam0,
        0.125,
    ));
    let mut constants = BTreeMap::new();
    constants.insert("tau_threshold".to_string(), tau_threshold);
    constants.insert("omega_inf_norm".to_string(), omega_norm);
    finish(
        GateId::RealSmallDelay,
        checks,
        constants,
        Prediction::CompleteAggregation,
        Vec::new(),
    )
}

/// Dispatch by gate id using the scalar appropriate to each gate:
/// initial diameter for the complete-aggregation gates, initial defect for
/// the practical gates, initial order parameter for the undelayed gate.
pub fn check_gate(
    gate: GateId,
    p: &ModelParams,
    diam0: f64,
    l0: f64,
    rho0: f64,
) -> TheoremReport {
    match gate {
        GateId::SlComplete => check_sl_complete(p, diam0),
        GateId::NearSlComplete => check_near_sl_complete(p, diam0),
        GateId::CompleteGraphPractical => check_complete_graph_practical(p, l0),
        GateId::NetworkPractical => check_network_practical(p, l0),
        GateId::UndelayedOrder => check_undelayed_order(p, rho0),
        GateId::RealSmallDelay => check_real_small_delay(p, diam0),
    }
}
