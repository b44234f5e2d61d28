//! Positivity of the 2x2 quadratic forms that make up the shear part of `dJ/dt`.
//!
//! At a site `k` with `k2 >= 1` the form in `(x, y) = (theta_{k-e}, theta_{k+e})`
//! is `a x^2 + b y^2 + 2 c x y` with
//!
//! ```text
//! a = 1 - 1/|k-e|,  b = 1 - 1/|k+e|,
//! c = (k1 + 1/2)(1 - 1/|k-e|) - (k1 - 1/2)(1 - 1/|k+e|).
//! ```
//!
//! It is degenerate on the axis `k1 = 0` and positive definite elsewhere,
//! except at the two sites `(±1, 1)` where one of `k ± e` is the unit
//! vector `(0, 1)`. That mode has a zero coefficient and never carries mass
//! on the even-`k2` sublattice, so those sites are reported but kept out of
//! the domination constant.

use crate::diagnostics;
use crate::error::{Error, Result};
use crate::exec::{self, Parallelism};
use crate::lattice::{ModeIndex, SpectralState};

const E: ModeIndex = ModeIndex::E;

/// Coefficients of `a x^2 + b y^2 + 2 c x y`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FormCoefficients {
    pub a: f64,
    pub b: f64,
    /// Half the cross coefficient.
    pub c: f64,
}

impl FormCoefficients {
    pub fn evaluate(&self, x: f64, y: f64) -> f64 {
        self.a * x * x + self.b * y * y + 2.0 * self.c * x * y
    }

    pub fn determinant(&self) -> f64 {
        self.a * self.b - self.c * self.c
    }

    /// Larger eigenvalue from the trace/discriminant formula.
    pub fn max_eigenvalue(&self) -> f64 {
        let mean = 0.5 * (self.a + self.b);
        let half_gap = 0.5 * (self.a - self.b);
        mean + half_gap.hypot(self.c)
    }
}

fn check_site(k: ModeIndex) -> Result<()> {
    if k.k2 < 1 {
        return Err(Error::invalid("k", format!("site {k} needs k2 >= 1")));
    }
    Ok(())
}

pub fn form_coefficients(k: ModeIndex) -> Result<FormCoefficients> {
    check_site(k)?;
    let a = 1.0 - 1.0 / (k - E).norm();
    let b = 1.0 - 1.0 / (k + E).norm();
    let k1 = k.k1 as f64;
    Ok(FormCoefficients {
        a,
        b,
        c: (k1 + 0.5) * a - (k1 - 0.5) * b,
    })
}

/// Determinant expanded in `1/|k ± e|` so that the `O(1)` parts cancel
/// analytically; the naive `ab - c^2` loses about `log10 |k|^3` digits.
fn stable_determinant(k: ModeIndex) -> f64 {
    let p = (k - E).norm();
    let q = (k + E).norm();
    let k1 = k.k1 as f64;
    let s = p + q;
    let d = p * q;
    // |k+e|^2 - |k-e|^2 = 4 k1, hence q - p = 4 k1 / (p + q).
    let gamma = (4.0 * k1 * k1 / s + 0.5 * s) / d;
    (8.0 * k1 * k1 / s + 1.0) / d - gamma * gamma
}

/// Smallest eigenvalue of `[[a, c], [c, b]]`, computed as `det / lambda_max`.
pub fn min_eigenvalue(k: ModeIndex) -> Result<f64> {
    let form = form_coefficients(k)?;
    let lambda_max = form.max_eigenvalue();
    Ok(stable_determinant(k) / lambda_max)
}

/// Sites where `k - e` or `k + e` is a unit vector, i.e. `(±1, 1)`.
pub fn couples_unit_mode(k: ModeIndex) -> bool {
    (k - E).norm_sq() == 1 || (k + E).norm_sq() == 1
}

/// One site of a scan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanRow {
    pub k: ModeIndex,
    pub form: FormCoefficients,
    pub lambda_min: f64,
    /// `lambda_min * |k|^3`.
    pub weighted: f64,
}

impl ScanRow {
    fn at(k: ModeIndex) -> Self {
        let form = form_coefficients(k).expect("scan sites have k2 >= 1");
        let lambda_min = stable_determinant(k) / form.max_eigenvalue();
        ScanRow {
            k,
            form,
            lambda_min,
            weighted: lambda_min * k.norm().powi(3),
        }
    }
}

fn check_box(box_size: usize) -> Result<()> {
    if box_size < 4 {
        return Err(Error::invalid("box", "constraint box>=4 violated"));
    }
    Ok(())
}

/// Every site `-box <= k1 <= box`, `1 <= k2 <= box`, ordered by `k2` then `k1`.
pub fn scan_rows(box_size: usize) -> Result<Vec<ScanRow>> {
    scan_rows_with(box_size, Parallelism::Auto)
}

pub fn scan_rows_with(box_size: usize, par: Parallelism) -> Result<Vec<ScanRow>> {
    check_box(box_size)?;
    let b = box_size as i64;
    let width = 2 * box_size + 1;
    Ok(exec::map_indices(par, width * box_size, |i| {
        let k1 = (i % width) as i64 - b;
        let k2 = (i / width) as i64 + 1;
        ScanRow::at(ModeIndex::new(k1, k2))
    }))
}

/// Summary of a scan over the box.
#[derive(Debug, Clone, PartialEq)]
pub struct DominationScan {
    pub box_size: usize,
    /// `min lambda_min |k|^3` over off-axis sites, unit-mode sites excluded.
    pub c_star: f64,
    pub argmin: ModeIndex,
    /// Largest `|lambda_min|` on the axis `k1 = 0`.
    pub max_axis_deviation: f64,
    /// Smallest `lambda_min` over the off-axis sites counted in `c_star`.
    pub min_off_axis: f64,
    /// Off-axis sites where the form is indefinite, with their `lambda_min`.
    pub indefinite_sites: Vec<(ModeIndex, f64)>,
}

impl DominationScan {
    pub fn from_rows(box_size: usize, rows: &[ScanRow]) -> Self {
        let mut c_star = f64::INFINITY;
        let mut argmin = ModeIndex::new(1, 2);
        let mut max_axis_deviation: f64 = 0.0;
        let mut min_off_axis = f64::INFINITY;
        let mut indefinite_sites = Vec::new();
        for row in rows {
            if row.k.k1 == 0 {
                max_axis_deviation = max_axis_deviation.max(row.lambda_min.abs());
                continue;
            }
            if row.lambda_min <= 0.0 {
                indefinite_sites.push((row.k, row.lambda_min));
            }
            if couples_unit_mode(row.k) {
                continue;
            }
            min_off_axis = min_off_axis.min(row.lambda_min);
            if row.weighted < c_star {
                c_star = row.weighted;
                argmin = row.k;
            }
        }
        DominationScan {
            box_size,
            c_star,
            argmin,
            max_axis_deviation,
            min_off_axis,
            indefinite_sites,
        }
    }
}

pub fn scan_domination_constant(box_size: usize) -> Result<DominationScan> {
    Ok(DominationScan::from_rows(box_size, &scan_rows(box_size)?))
}

/// `Sigma >= c* theta_e kappa sum_{k2 > 0} theta_k^2 / |k|^3`.
///
/// Each mode `j` with `j2 > 0` enters the forms at `j + e` and `j - e` with
/// weight `j2 / 2`, and at least one of those sites is off the axis. With
/// `|j ± e| <= 2|j|` and `j2 >= 1` this gives `kappa = 1/16`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SigmaCertificate {
    pub shear: f64,
    pub bound: f64,
    pub c_star: f64,
    pub kappa: f64,
    /// `sum_{k2 > 0} theta_k^2 / |k|^3` over the half-lattice.
    pub weighted_mass: f64,
}

impl SigmaCertificate {
    pub const KAPPA: f64 = 1.0 / 16.0;

    pub fn holds(&self) -> bool {
        self.shear >= self.bound
    }

    /// `Sigma / bound`; infinite when the bound vanishes but `Sigma` does not.
    pub fn ratio(&self) -> f64 {
        if self.bound > 0.0 {
            self.shear / self.bound
        } else if self.shear == 0.0 {
            1.0
        } else {
            f64::INFINITY
        }
    }
}

/// Compares `Sigma` with the lower bound from the scanned domination constant.
///
/// Requires the support margin used by the `dJ/dt` split, a positive shear
/// amplitude and a state on the even-`k2` sublattice.
pub fn sigma_lower_bound_certificate(state: &SpectralState) -> Result<SigmaCertificate> {
    let n = state.truncation();
    let radius = state.support_radius();
    if radius + 2 > n {
        return Err(Error::MarginViolation {
            support_radius: radius,
            required: 2,
            truncation: n,
        });
    }
    let theta_e = state.get(E);
    if theta_e <= 0.0 {
        return Err(Error::NonPositiveShear { theta_e });
    }
    if let Some(mode) = state.first_odd_k2() {
        return Err(Error::OddSublattice { mode });
    }
    // Forms acting on the state sit at |k1| <= N + 1.
    let scan = scan_domination_constant((n + 1).max(4))?;
    let weighted_mass = state
        .support()
        .filter(|(k, _)| k.k2 > 0)
        .map(|(k, v)| v * v / k.norm().powi(3))
        .sum::<f64>();
    let kappa = SigmaCertificate::KAPPA;
    Ok(SigmaCertificate {
        shear: diagnostics::shear_term(state),
        bound: scan.c_star * theta_e * kappa * weighted_mass,
        c_star: scan.c_star,
        kappa,
        weighted_mass,
    })
}
