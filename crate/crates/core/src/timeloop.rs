//! Classical RK4 time stepping with monitored drift of the quadratic invariants.

use crate::diagnostics::{self, DiagnosticsConfig, DiagnosticsRecord};
use crate::error::{Error, Result};
use crate::lattice::{initial_data, Params, SpectralState};
use crate::tendency::RhsEvaluator;

/// Step size and drift policy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepControl {
    pub dt: f64,
    /// Allowed relative drift of `sum theta^2` per unit time.
    pub drift_budget: f64,
    pub halve_on_breach: bool,
}

impl StepControl {
    pub const DEFAULT_DRIFT_BUDGET: f64 = 1e-9;
    /// Halving stops once `dt` falls below `2^-20` of its starting value.
    pub const HALVING_FLOOR: f64 = 1.0 / (1u64 << 20) as f64;

    pub fn new(dt: f64) -> Self {
        StepControl {
            dt,
            drift_budget: Self::DEFAULT_DRIFT_BUDGET,
            halve_on_breach: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::invalid("dt", "constraint dt>0 violated"));
        }
        if !(self.drift_budget > 0.0) {
            return Err(Error::invalid("drift_budget", "constraint drift_budget>0 violated"));
        }
        Ok(())
    }
}

/// One classical fourth-order Runge-Kutta step.
pub fn step_rk4(evaluator: &dyn RhsEvaluator, state: &SpectralState, dt: f64) -> Result<SpectralState> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::invalid("dt", "constraint dt>0 violated"));
    }
    let k1 = evaluator.try_evaluate(state)?;
    let k2 = evaluator.evaluate(&state.axpy(0.5 * dt, &k1, 0.5 * dt));
    let k3 = evaluator.evaluate(&state.axpy(0.5 * dt, &k2, 0.5 * dt));
    let k4 = evaluator.evaluate(&state.axpy(dt, &k3, dt));

    let h = dt / 6.0;
    let values: Vec<f64> = state
        .values()
        .iter()
        .zip(k1.values())
        .zip(k2.values())
        .zip(k3.values())
        .zip(k4.values())
        .map(|((((v, a), b), c), d)| v + h * (a + 2.0 * b + 2.0 * c + d))
        .collect();
    let next = SpectralState::from_raw(state.lattice(), values, state.time() + dt);
    if let Some(mode) = next.first_non_finite() {
        return Err(Error::NonFinite {
            mode,
            time: next.time(),
        });
    }
    Ok(next)
}

/// Receives diagnostics as the run progresses.
pub trait DiagnosticsSink {
    fn record(&mut self, record: &DiagnosticsRecord) -> Result<()>;

    /// Called once, with the last good sample, before a run returns an error.
    fn abort(&mut self, last: &DiagnosticsRecord, reason: &Error) -> Result<()> {
        let _ = (last, reason);
        Ok(())
    }
}

impl DiagnosticsSink for Vec<DiagnosticsRecord> {
    fn record(&mut self, record: &DiagnosticsRecord) -> Result<()> {
        self.push(record.clone());
        Ok(())
    }
}

/// Relative drift of both invariants since `t = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DriftStats {
    pub max_l2: f64,
    pub max_hm12: f64,
    pub final_l2: f64,
    pub final_hm12: f64,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub final_state: SpectralState,
    pub steps: usize,
    pub records: usize,
    pub dt_final: f64,
    pub halvings: u32,
    pub drift: DriftStats,
}

fn relative(value: f64, reference: f64) -> f64 {
    if reference == 0.0 {
        value.abs()
    } else {
        ((value - reference) / reference).abs()
    }
}

/// Integrates from `initial_data(params.tau)` to `params.t_max`.
pub fn run(
    params: &Params,
    control: &StepControl,
    evaluator: &dyn RhsEvaluator,
    sink: &mut dyn DiagnosticsSink,
) -> Result<RunOutcome> {
    params.validate()?;
    let start = initial_data(params.tau, params.n)?;
    run_from(start, params, control, evaluator, sink)
}

/// Integrates from an arbitrary state to `params.t_max`.
///
/// A record is emitted at the start, after every `sample_every` accepted
/// steps and at the final time. When the relative drift of `sum theta^2`
/// exceeds `drift_budget * t`, the step is rejected and `dt` halved (or the
/// run aborted if halving is disabled or has reached its floor).
pub fn run_from(
    start: SpectralState,
    params: &Params,
    control: &StepControl,
    evaluator: &dyn RhsEvaluator,
    sink: &mut dyn DiagnosticsSink,
) -> Result<RunOutcome> {
    control.validate()?;
    let config = DiagnosticsConfig::new(params.tau, params.s);
    let l2_0 = diagnostics::l2_sum(&start);
    let hm_0 = diagnostics::hminus_half_sum(&start);
    let t0 = start.time();
    let t_end = t0 + params.t_max;
    let dt_floor = control.dt * StepControl::HALVING_FLOOR;

    let mut state = start;
    let mut last = DiagnosticsRecord::compute(&state, evaluator, &config)?;
    sink.record(&last)?;
    let mut records = 1;
    let mut steps = 0usize;
    let mut since_sample = 0usize;
    let mut dt = control.dt;
    let mut halvings = 0;
    let mut drift = DriftStats::default();

    // Stop when the remaining interval is roundoff relative to t_end.
    while t_end - state.time() > 1e-12 * t_end.abs().max(1.0) {
        let remaining = t_end - state.time();
        let h = dt.min(remaining);
        let next = match step_rk4(evaluator, &state, h) {
            Ok(next) => next,
            Err(err) => {
                sink.abort(&last, &err)?;
                return Err(err);
            }
        };
        let d_l2 = relative(diagnostics::l2_sum(&next), l2_0);
        let allowed = control.drift_budget * (next.time() - t0);
        if d_l2 > allowed {
            if control.halve_on_breach && dt * 0.5 >= dt_floor {
                dt *= 0.5;
                halvings += 1;
                continue;
            }
            let err = Error::DriftBreach {
                drift: d_l2,
                allowed,
                time: next.time(),
                dt: h,
            };
            sink.abort(&last, &err)?;
            return Err(err);
        }
        let d_hm = relative(diagnostics::hminus_half_sum(&next), hm_0);
        drift.max_l2 = drift.max_l2.max(d_l2);
        drift.max_hm12 = drift.max_hm12.max(d_hm);
        drift.final_l2 = d_l2;
        drift.final_hm12 = d_hm;

        state = next;
        steps += 1;
        since_sample += 1;
        let finished = t_end - state.time() <= 1e-12 * t_end.abs().max(1.0);
        if since_sample == params.sample_every || finished {
            last = DiagnosticsRecord::compute(&state, evaluator, &config)?;
            sink.record(&last)?;
            records += 1;
            since_sample = 0;
        }
    }

    Ok(RunOutcome {
        final_state: state,
        steps,
        records,
        dt_final: dt,
        halvings,
        drift,
    })
}
