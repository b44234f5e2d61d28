//! Scalar diagnostics along a trajectory: the two quadratic invariants, the
//! tail bound, the cross-correlation functional `J = sum Phi(k) theta_k theta_{k+e}`
//! with `Phi(k) = k1 + 1/2`, its derivative split into a non-shear part
//! `sigma` and a shear part `Sigma`, weighted perturbation sums, Sobolev sums
//! and the A/B case classification.
//!
//! Sums marked "half-lattice" run over the representatives `k2 > 0` or
//! (`k2 = 0`, `k1 > 0`). Perturbation sums additionally leave out the shear
//! mode `e`, so that they measure the small part of the solution.

use std::fmt;

use crate::error::{Error, Result};
use crate::lattice::{ModeIndex, SpectralState, Tendency};
use crate::tendency::RhsEvaluator;

const E: ModeIndex = ModeIndex::E;

/// `Phi(k) = k1 + 1/2`.
#[inline]
pub fn phi(k: ModeIndex) -> f64 {
    k.k1 as f64 + 0.5
}

/// `1 - 1/|k|`, zero at the origin.
#[inline]
fn damp(k: ModeIndex) -> f64 {
    if k.is_zero() {
        0.0
    } else {
        1.0 - 1.0 / k.norm()
    }
}

/// `sum theta_k^2` over the full lattice.
pub fn l2_sum(state: &SpectralState) -> f64 {
    2.0 * state.support().map(|(_, v)| v * v).sum::<f64>()
}

/// `sum theta_k^2 / |k|` over the full lattice.
pub fn hminus_half_sum(state: &SpectralState) -> f64 {
    2.0 * state.support().map(|(k, v)| v * v / k.norm()).sum::<f64>()
}

/// `sum theta_k^2 (1 - 1/|k|)` over the full lattice, summed directly.
pub fn combined_invariant(state: &SpectralState) -> f64 {
    2.0 * state.support().map(|(k, v)| v * v * damp(k)).sum::<f64>()
}

/// Exact value of [`combined_invariant`] on the initial data, `(3 - 2/sqrt 5) tau^2`.
pub fn combined_initial_value(tau: f64) -> f64 {
    (3.0 - 2.0 / 5f64.sqrt()) * tau * tau
}

/// `sum_{k != ±e} theta_k^2` over the full lattice.
pub fn tail_mass(state: &SpectralState) -> f64 {
    2.0 * state
        .support()
        .filter(|&(k, _)| k != E)
        .map(|(_, v)| v * v)
        .sum::<f64>()
}

/// `theta_e` inside `(1/2, 2)`.
pub fn theta_e_window_ok(state: &SpectralState) -> bool {
    let v = state.get(E);
    v > 0.5 && v < 2.0
}

/// The tighter window `(1 - 8 tau^2, 1 + 2 tau^2)` implied by the invariants.
pub fn theta_e_tau_window(tau: f64) -> (f64, f64) {
    (1.0 - 8.0 * tau * tau, 1.0 + 2.0 * tau * tau)
}

/// `J = sum_{k half-lattice} Phi(k) theta_k theta_{k+e}`.
pub fn j_functional(state: &SpectralState) -> f64 {
    state
        .support()
        .map(|(k, v)| phi(k) * v * state.get(k + E))
        .sum()
}

/// `dJ/dt` by the chain rule from a tendency.
pub fn j_rate(state: &SpectralState, rhs: &Tendency) -> f64 {
    state
        .lattice()
        .modes()
        .map(|k| phi(k) * (rhs.get(k) * state.get(k + E) + state.get(k) * rhs.get(k + E)))
        .sum()
}

/// Chain-rule `dJ/dt` using `evaluator` for the tendency.
pub fn chain_rule_j_rate(state: &SpectralState, evaluator: &dyn RhsEvaluator) -> Result<f64> {
    let rhs = evaluator.try_evaluate(state)?;
    Ok(j_rate(state, &rhs))
}

fn check_margin(state: &SpectralState) -> Result<()> {
    let n = state.truncation();
    let radius = state.support_radius();
    if radius + 2 > n {
        return Err(Error::MarginViolation {
            support_radius: radius,
            required: 2,
            truncation: n,
        });
    }
    Ok(())
}

/// `sigma`: the part of `dJ/dt` from triads with neither leg equal to `±e`.
///
/// Equivalent to the chain rule applied to the tendency of the state with
/// the shear pair removed.
pub fn sigma_unchecked(state: &SpectralState, evaluator: &dyn RhsEvaluator) -> Result<f64> {
    let stripped = state.without_shear();
    let rhs = evaluator.try_evaluate(&stripped)?;
    Ok(j_rate(state, &rhs))
}

/// `Sigma`: the part of `dJ/dt` from triads with one leg equal to `±e`,
///
/// ```text
/// theta_e sum_{k half-lattice} k2 Phi(k) [ A(k) theta_k^2 - A(k+2e) theta_k theta_{k+2e}
///                                          - A(k+e) theta_{k+e}^2 + A(k-e) theta_{k+e} theta_{k-e} ]
/// ```
///
/// with `A(k) = 1 - 1/|k|`. Rows `k2 = 0` carry no weight.
pub fn shear_term(state: &SpectralState) -> f64 {
    let n = state.truncation() as i64;
    let theta_e = state.get(E);
    if theta_e == 0.0 {
        return 0.0;
    }
    let mut total = 0.0;
    for k2 in 1..=n {
        let mut row = 0.0;
        for k1 in -n - 1..=n {
            let k = ModeIndex::new(k1, k2);
            let (t0, t1) = (state.get(k), state.get(k + E));
            if t0 == 0.0 && t1 == 0.0 {
                continue;
            }
            let t2 = state.get(k + E + E);
            let tm = state.get(k - E);
            row += phi(k)
                * (damp(k) * t0 * t0 - damp(k + E + E) * t0 * t2 - damp(k + E) * t1 * t1
                    + damp(k - E) * t1 * tm);
        }
        total += k2 as f64 * row;
    }
    theta_e * total
}

/// `Sigma` regrouped as a sum over sites `k` (with `k2 > 0`) of 2x2
/// quadratic forms in `(theta_{k-e}, theta_{k+e})`:
///
/// ```text
/// theta_e sum k2/2 [ (Phi(k-e) - Phi(k-2e)) A(k-e) x^2 + (Phi(k+e) - Phi(k)) A(k+e) y^2
///                    + 2 (Phi(k) A(k-e) - Phi(k-e) A(k+e)) x y ]
/// ```
pub fn shear_term_rewritten(state: &SpectralState) -> f64 {
    let n = state.truncation() as i64;
    let theta_e = state.get(E);
    if theta_e == 0.0 {
        return 0.0;
    }
    let mut total = 0.0;
    for k2 in 1..=n {
        let mut row = 0.0;
        for k1 in -n - 1..=n + 1 {
            let k = ModeIndex::new(k1, k2);
            let x = state.get(k - E);
            let y = state.get(k + E);
            if x == 0.0 && y == 0.0 {
                continue;
            }
            let sq_x = (phi(k - E) - phi(k - E - E)) * damp(k - E);
            let sq_y = (phi(k + E) - phi(k)) * damp(k + E);
            let cross = phi(k) * damp(k - E) - phi(k - E) * damp(k + E);
            row += sq_x * x * x + sq_y * y * y + 2.0 * cross * x * y;
        }
        total += 0.5 * k2 as f64 * row;
    }
    theta_e * total
}

/// `dJ/dt = sigma + Sigma`, with the chain-rule value for comparison.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JRateSplit {
    pub sigma: f64,
    pub shear: f64,
    pub chain_rule: f64,
}

impl JRateSplit {
    /// `|sigma + Sigma - chain| / max(|sigma| + |Sigma|, |chain|)`; 0 when all vanish.
    pub fn relative_mismatch(&self) -> f64 {
        relative_gap(self.sigma + self.shear, self.chain_rule, self.sigma.abs() + self.shear.abs())
    }
}

/// `|a - b|` relative to the larger of `|a|`, `|b|` and `scale`; 0 when all vanish.
pub fn relative_gap(a: f64, b: f64, scale: f64) -> f64 {
    let denom = a.abs().max(b.abs()).max(scale);
    if denom == 0.0 {
        0.0
    } else {
        (a - b).abs() / denom
    }
}

/// Splits `dJ/dt` into `sigma` and `Sigma`. The support must keep a margin
/// of 2 from the truncation so that the shifted indices stay retained.
pub fn sigma_and_shear(state: &SpectralState, evaluator: &dyn RhsEvaluator) -> Result<JRateSplit> {
    check_margin(state)?;
    Ok(JRateSplit {
        sigma: sigma_unchecked(state, evaluator)?,
        shear: shear_term(state),
        chain_rule: chain_rule_j_rate(state, evaluator)?,
    })
}

/// [`shear_term_rewritten`] under the same margin precondition.
pub fn shear_rewritten_checked(state: &SpectralState) -> Result<f64> {
    check_margin(state)?;
    Ok(shear_term_rewritten(state))
}

/// Weighted sums over the half-lattice without the shear mode.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PerturbationSums {
    /// `sum |k| |Phi(k)| |theta_k|`.
    pub w_phi: f64,
    /// `sum |k|^2 |theta_k|`.
    pub w_k2: f64,
    /// `sum |k|^-3 theta_k^2`.
    pub low_mass: f64,
    /// `sum |k| theta_k^2`.
    pub h_half: f64,
    /// `sum theta_k^2`.
    pub l2: f64,
    /// `sum |k|^21 theta_k^2`.
    pub sob21: f64,
}

pub fn perturbation_sums(state: &SpectralState) -> PerturbationSums {
    let mut out = PerturbationSums::default();
    for (k, v) in state.support().filter(|&(k, _)| k != E) {
        let r = k.norm();
        let sq = v * v;
        out.w_phi += r * phi(k).abs() * v.abs();
        out.w_k2 += r * r * v.abs();
        out.low_mass += sq / (r * r * r);
        out.h_half += r * sq;
        out.l2 += sq;
        out.sob21 += r.powi(21) * sq;
    }
    out
}

/// `sum |k|^-3` over every half-lattice representative of the truncation.
pub fn lattice_inverse_cube_sum(n: usize) -> f64 {
    crate::lattice::HalfLattice::new(n)
        .modes()
        .map(|k| k.norm().powi(-3))
        .sum()
}

/// Homogeneous Sobolev sum `sum_{k != 0} |k|^{2s} theta_k^2` over the full lattice.
pub fn sobolev_sum(state: &SpectralState, s: f64) -> f64 {
    2.0 * state
        .support()
        .map(|(k, v)| (k.norm_sq() as f64).powf(s) * v * v)
        .sum::<f64>()
}

/// The two Hölder interpolation inequalities, each as `(lhs, rhs)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InterpolationCheck {
    /// `sum |k|^2 |theta_k| <= (sum theta_k^2)^{1/3} (sum |k|^21 theta_k^2)^{1/6} (sum |k|^-3)^{1/2}`.
    pub gradient: (f64, f64),
    /// `sum |k| theta_k^2 <= (sum |k|^-3 theta_k^2)^{5/6} (sum |k|^21 theta_k^2)^{1/6}`.
    pub half_norm: (f64, f64),
}

impl InterpolationCheck {
    /// Relative slack allowed for floating-point rounding.
    pub const SLACK: f64 = 1e-12;

    pub fn gradient_holds(&self) -> bool {
        self.gradient.0 <= self.gradient.1 * (1.0 + Self::SLACK)
    }

    pub fn half_norm_holds(&self) -> bool {
        self.half_norm.0 <= self.half_norm.1 * (1.0 + Self::SLACK)
    }
}

pub fn interpolation_checks(state: &SpectralState) -> InterpolationCheck {
    interpolation_from_sums(&perturbation_sums(state), lattice_inverse_cube_sum(state.truncation()))
}

pub fn interpolation_from_sums(sums: &PerturbationSums, lattice_const: f64) -> InterpolationCheck {
    InterpolationCheck {
        gradient: (
            sums.w_k2,
            sums.l2.cbrt() * sums.sob21.powf(1.0 / 6.0) * lattice_const.sqrt(),
        ),
        half_norm: (
            sums.h_half,
            sums.low_mass.powf(5.0 / 6.0) * sums.sob21.powf(1.0 / 6.0),
        ),
    }
}

/// Outcome of `|sigma| <= C * tail * W_phi`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SigmaBound {
    pub sigma: f64,
    pub bound: f64,
    /// `|sigma| / bound` (0 when both vanish, infinite when only the bound does).
    pub ratio: f64,
}

impl SigmaBound {
    /// Constant from the kernel estimate `|(l^m)(1/|l| - 1/|m|)| <= 2 |l + m|`.
    pub const DEFAULT_CONSTANT: f64 = 2.0;

    pub fn new(sigma: f64, tail: f64, w_phi: f64, constant: f64) -> Self {
        let bound = constant * tail * w_phi;
        let ratio = if sigma == 0.0 {
            0.0
        } else if bound == 0.0 {
            f64::INFINITY
        } else {
            sigma.abs() / bound
        };
        SigmaBound {
            sigma,
            bound,
            ratio,
        }
    }

    pub fn holds(&self) -> bool {
        self.sigma.abs() <= self.bound
    }
}

pub fn sigma_bound_check(state: &SpectralState, evaluator: &dyn RhsEvaluator) -> Result<SigmaBound> {
    let sigma = sigma_unchecked(state, evaluator)?;
    Ok(SigmaBound::new(
        sigma,
        tail_mass(state),
        perturbation_sums(state).w_phi,
        SigmaBound::DEFAULT_CONSTANT,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CaseLabel {
    A,
    B,
    None,
}

impl fmt::Display for CaseLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CaseLabel::A => "A",
            CaseLabel::B => "B",
            CaseLabel::None => "NONE",
        })
    }
}

impl CaseLabel {
    /// Aggregate over a run: A if it ever occurred, else B if that did.
    pub fn combine(self, other: CaseLabel) -> CaseLabel {
        match (self, other) {
            (CaseLabel::A, _) | (_, CaseLabel::A) => CaseLabel::A,
            (CaseLabel::B, _) | (_, CaseLabel::B) => CaseLabel::B,
            _ => CaseLabel::None,
        }
    }
}

/// Case A fires at `W_phi >= tau^{1/2}`. Case B fires once the low-frequency
/// mass `sum |k|^-3 theta_k^2` has dropped to `b_factor * tau^{5/2}`: at that
/// point the shear term no longer dominates the `O(tau^{5/2})` remainder,
/// and the mass it moved has gone to high `|k|`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CaseThresholds {
    pub a_threshold: f64,
    pub b_threshold: f64,
}

impl CaseThresholds {
    pub fn for_tau(tau: f64) -> Self {
        Self::with_b_factor(tau, 1.0)
    }

    pub fn with_b_factor(tau: f64, b_factor: f64) -> Self {
        CaseThresholds {
            a_threshold: tau.sqrt(),
            b_threshold: b_factor * tau.powf(2.5),
        }
    }
}

pub fn classify_case(record: &DiagnosticsRecord, thresholds: &CaseThresholds) -> CaseLabel {
    if record.w_phi >= thresholds.a_threshold {
        CaseLabel::A
    } else if record.low_mass <= thresholds.b_threshold {
        CaseLabel::B
    } else {
        CaseLabel::None
    }
}

/// Settings for [`DiagnosticsRecord::compute`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiagnosticsConfig {
    pub s: f64,
    pub thresholds: CaseThresholds,
    pub sigma_constant: f64,
}

impl DiagnosticsConfig {
    pub fn new(tau: f64, s: f64) -> Self {
        DiagnosticsConfig {
            s,
            thresholds: CaseThresholds::for_tau(tau),
            sigma_constant: SigmaBound::DEFAULT_CONSTANT,
        }
    }
}

/// One sample of every monitored scalar.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticsRecord {
    pub t: f64,
    pub l2: f64,
    pub hm12: f64,
    /// `l2 - hm12`, exactly as stored.
    pub combined: f64,
    pub tail: f64,
    pub theta_e: f64,
    pub j: f64,
    pub sigma: f64,
    pub shear: f64,
    pub w_phi: f64,
    pub w_k2: f64,
    pub low_mass: f64,
    pub h_half: f64,
    /// Sobolev sum at `s = 10.5` (weight `|k|^21`).
    pub sob_half: f64,
    pub sob_s: f64,
    pub case_label: CaseLabel,
    /// Not serialized: the Hölder checks and the sigma bound at this sample.
    pub interpolation: InterpolationCheck,
    pub sigma_bound: SigmaBound,
}

impl DiagnosticsRecord {
    pub fn compute(
        state: &SpectralState,
        evaluator: &dyn RhsEvaluator,
        config: &DiagnosticsConfig,
    ) -> Result<Self> {
        let l2 = l2_sum(state);
        let hm12 = hminus_half_sum(state);
        let tail = tail_mass(state);
        let sums = perturbation_sums(state);
        let sigma = sigma_unchecked(state, evaluator)?;
        let mut record = DiagnosticsRecord {
            t: state.time(),
            l2,
            hm12,
            combined: l2 - hm12,
            tail,
            theta_e: state.get(E),
            j: j_functional(state),
            sigma,
            shear: shear_term(state),
            w_phi: sums.w_phi,
            w_k2: sums.w_k2,
            low_mass: sums.low_mass,
            h_half: sums.h_half,
            sob_half: sobolev_sum(state, 10.5),
            sob_s: sobolev_sum(state, config.s),
            case_label: CaseLabel::None,
            interpolation: interpolation_from_sums(
                &sums,
                lattice_inverse_cube_sum(state.truncation()),
            ),
            sigma_bound: SigmaBound::new(sigma, tail, sums.w_phi, config.sigma_constant),
        };
        record.case_label = classify_case(&record, &config.thresholds);
        Ok(record)
    }
}
