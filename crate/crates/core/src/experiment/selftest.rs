use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::diagnostics::{self, combined_initial_value};
use crate::error::Result;
use crate::lattice::{initial_data, Params, RandomState};
use crate::quadform;
use crate::tendency::{triad_conservation_with, DirectEvaluator, FastEvaluator, RhsEvaluator};
use crate::timeloop::{self, StepControl};

#[derive(Debug, Clone, Default)]
pub struct SelftestReport {
    pub passed: usize,
    pub failed: usize,
}

impl SelftestReport {
    pub fn ok(&self) -> bool {
        self.failed == 0
    }
}

struct Reporter<'a> {
    out: &'a mut dyn Write,
    report: SelftestReport,
}

impl Reporter<'_> {
    fn check(&mut self, name: &str, ok: bool, detail: String) -> Result<()> {
        if ok {
            self.report.passed += 1;
        } else {
            self.report.failed += 1;
        }
        writeln!(self.out, "{} {name}: {detail}", if ok { "ok  " } else { "FAIL" })?;
        Ok(())
    }
}

/// Oracle equivalence, conservation and identity checks on small
/// truncations. Prints one line per check.
pub fn selftest(seed: u64, out: &mut dyn Write) -> Result<SelftestReport> {
    let mut r = Reporter {
        out,
        report: SelftestReport::default(),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    for n in [8, 16] {
        let direct = DirectEvaluator::new(n);
        let fast = FastEvaluator::new(n)?;
        let mut worst: f64 = 0.0;
        let mut worst_triad: f64 = 0.0;
        for i in 0..10 {
            let mut sampler = RandomState::new(n, n);
            if i % 2 == 0 {
                sampler = sampler.even_k2_only();
            }
            let state = sampler.sample(&mut rng);
            let reference = direct.evaluate(&state);
            worst = worst.max(fast.evaluate(&state).max_abs_diff(&reference));
            let (d_l2, d_hm) = triad_conservation_with(&state, &reference);
            let scale = reference.max_abs().max(1.0) * diagnostics::l2_sum(&state).sqrt();
            worst_triad = worst_triad.max(d_l2.abs().max(d_hm.abs()) / scale);
        }
        r.check(
            &format!("fast_vs_direct_N{n}"),
            worst < 1e-12,
            format!("max |fast - direct| = {worst:.3e}"),
        )?;
        r.check(
            &format!("triad_conservation_N{n}"),
            worst_triad < 1e-12,
            format!("max relative d/dt = {worst_triad:.3e}"),
        )?;
    }

    let n = 16;
    let direct = DirectEvaluator::new(n);
    let mut worst_split: f64 = 0.0;
    let mut worst_rewrite: f64 = 0.0;
    let mut states = vec![initial_data(0.1, n)?];
    for _ in 0..5 {
        states.push(RandomState::new(n, n - 2).with_theta_e(1.0).sample(&mut rng));
    }
    for state in &states {
        let split = diagnostics::sigma_and_shear(state, &direct)?;
        worst_split = worst_split.max(split.relative_mismatch());
        let rewritten = diagnostics::shear_rewritten_checked(state)?;
        worst_rewrite = worst_rewrite.max(diagnostics::relative_gap(rewritten, split.shear, 0.0));
    }
    r.check(
        "j_rate_split",
        worst_split < 1e-10,
        format!("max relative |sigma + Sigma - dJ/dt| = {worst_split:.3e}"),
    )?;
    r.check(
        "shear_rewritten",
        worst_rewrite < 1e-10,
        format!("max relative gap = {worst_rewrite:.3e}"),
    )?;

    let tau = 0.1;
    let mut params = Params::new(tau, n);
    params.t_max = 2.0;
    let fast = FastEvaluator::new(n)?;
    let mut records = Vec::new();
    let outcome = timeloop::run(&params, &StepControl::new(params.dt), &fast, &mut records)?;
    let combined_ref = combined_initial_value(tau);
    let combined_err = records
        .iter()
        .map(|rec| (rec.combined - combined_ref).abs() / (tau * tau))
        .fold(0.0, f64::max);
    r.check(
        "short_run_drift",
        outcome.drift.max_l2 < 1e-10 && outcome.drift.max_hm12 < 1e-10,
        format!(
            "max drift l2 = {:.3e}, hm12 = {:.3e}",
            outcome.drift.max_l2, outcome.drift.max_hm12
        ),
    )?;
    r.check(
        "short_run_combined",
        combined_err < 1e-6,
        format!("max |combined - (3 - 2/sqrt5) tau^2| / tau^2 = {combined_err:.3e}"),
    )?;

    let scan = quadform::scan_domination_constant(32)?;
    r.check(
        "quadform_scan_box32",
        scan.c_star > 0.0 && scan.max_axis_deviation <= 1e-14,
        format!(
            "c* = {:.6} at ({}, {}), axis deviation {:.1e}",
            scan.c_star, scan.argmin.k1, scan.argmin.k2, scan.max_axis_deviation
        ),
    )?;

    writeln!(
        r.out,
        "{} passed, {} failed",
        r.report.passed, r.report.failed
    )?;
    Ok(r.report)
}
