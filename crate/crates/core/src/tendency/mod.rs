//! Right-hand side of the Fourier-side SQG equation
//!
//! ```text
//! d theta_k / dt = 1/2 * sum_{l+m=k} (l ^ m) (1/|l| - 1/|m|) theta_l theta_m
//! ```
//!
//! restricted to the square truncation (both `l` and `m` retained, output
//! projected). Two evaluators are provided: [`DirectEvaluator`] sums the
//! triads explicitly and serves as the oracle; [`FastEvaluator`] forms
//! `(u . grad) theta` on a padded collocation grid.

mod direct;
mod fast;

pub use direct::DirectEvaluator;
pub use fast::{FastEvaluator, Orientation};

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::exec::Parallelism;
use crate::lattice::{SpectralState, Tendency};

/// A pure function from states to tendencies on a fixed truncation.
pub trait RhsEvaluator: Send + Sync {
    fn truncation(&self) -> usize;

    /// Evaluates the right-hand side. The state must use this evaluator's truncation.
    fn evaluate(&self, state: &SpectralState) -> Tendency;

    /// [`RhsEvaluator::evaluate`] with the truncation checked.
    fn try_evaluate(&self, state: &SpectralState) -> Result<Tendency> {
        if state.truncation() != self.truncation() {
            return Err(Error::TruncationMismatch {
                expected: self.truncation(),
                found: state.truncation(),
            });
        }
        Ok(self.evaluate(state))
    }
}

/// Which evaluator drives a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Method {
    Direct,
    #[default]
    Fast,
}

impl Method {
    pub fn build(self, n: usize, par: Parallelism) -> Result<Box<dyn RhsEvaluator>> {
        Ok(match self {
            Method::Direct => Box::new(DirectEvaluator::with_parallelism(n, par)),
            Method::Fast => Box::new(FastEvaluator::with_parallelism(n, par)?),
        })
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Direct => "direct",
            Method::Fast => "fast",
        })
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "direct" => Ok(Method::Direct),
            "fast" => Ok(Method::Fast),
            other => Err(format!("expected `direct` or `fast`, got `{other}`")),
        }
    }
}

/// Convenience wrapper around [`DirectEvaluator`].
pub fn rhs_direct(state: &SpectralState) -> Tendency {
    DirectEvaluator::new(state.truncation()).evaluate(state)
}

/// Convenience wrapper around a freshly calibrated [`FastEvaluator`].
pub fn rhs_fast(state: &SpectralState) -> Result<Tendency> {
    Ok(FastEvaluator::new(state.truncation())?.evaluate(state))
}

/// Instantaneous derivatives of `sum theta_k^2` and `sum theta_k^2 / |k|`
/// (full lattice) under the truncated dynamics. Both vanish up to roundoff.
pub fn triad_conservation_check(state: &SpectralState) -> (f64, f64) {
    let rhs = rhs_direct(state);
    triad_conservation_with(state, &rhs)
}

/// [`triad_conservation_check`] for a tendency computed elsewhere.
pub fn triad_conservation_with(state: &SpectralState, rhs: &Tendency) -> (f64, f64) {
    let mut d_l2 = 0.0;
    let mut d_hm = 0.0;
    for ((k, v), (_, r)) in state.iter().zip(rhs.iter()) {
        let p = v * r;
        d_l2 += p;
        d_hm += p / k.norm();
    }
    // d/dt sum theta^2 = 2 sum theta dtheta over the full lattice, which is
    // twice the half-lattice sum again.
    (4.0 * d_l2, 4.0 * d_hm)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{initial_data, ModeIndex, RandomState};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Brute-force oracle: enumerate every ordered pair (l, m) of the full
    /// truncated lattice with l + m = k.
    fn brute_force(state: &SpectralState, k: ModeIndex) -> f64 {
        let n = state.truncation() as i64;
        let mut acc = 0.0;
        for l1 in -n..=n {
            for l2 in -n..=n {
                let l = ModeIndex::new(l1, l2);
                let m = k - l;
                if l.is_zero() || m.is_zero() || !m.in_truncation(n as usize) {
                    continue;
                }
                let w = crate::lattice::wedge(l, m) as f64 * (1.0 / l.norm() - 1.0 / m.norm());
                acc += w * state.get(l) * state.get(m);
            }
        }
        0.5 * acc
    }

    #[test]
    fn direct_matches_brute_force_on_random_state() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let state = RandomState::new(8, 6).sample(&mut rng);
        let rhs = rhs_direct(&state);
        for (k, r) in rhs.iter() {
            let expected = brute_force(&state, k);
            assert!((r - expected).abs() < 1e-13, "{k}: {r} vs {expected}");
        }
    }

    #[test]
    fn initial_data_tendency_values() {
        // Enumerated by hand over the six-mode support: at (2,2) only the
        // pairs (e, g+e) and (g+e, e) contribute; at g only (-e, g+e) and
        // (g+e, -e).
        let tau = 0.1;
        let state = initial_data(tau, 8).unwrap();
        let rhs = rhs_direct(&state);
        let c = 2.0 * (1.0 - 1.0 / 5f64.sqrt());
        assert!((rhs.get(ModeIndex::new(2, 2)) - c * tau).abs() < 1e-15);
        assert!((rhs.get(ModeIndex::G) + c * tau).abs() < 1e-15);
        assert!((brute_force(&state, ModeIndex::new(2, 2)) - c * tau).abs() < 1e-15);
        assert!((brute_force(&state, ModeIndex::G) + c * tau).abs() < 1e-15);
    }

    #[test]
    fn zero_and_shear_are_steady() {
        let zero = SpectralState::zeros(8);
        assert_eq!(rhs_direct(&zero).max_abs(), 0.0);
        assert_eq!(rhs_fast(&zero).unwrap().max_abs(), 0.0);
        let shear = SpectralState::from_modes(8, [(ModeIndex::E, 1.0)]).unwrap();
        assert_eq!(rhs_direct(&shear).max_abs(), 0.0);
        assert!(rhs_fast(&shear).unwrap().max_abs() < 1e-15);
    }

    #[test]
    fn conservation_on_initial_data() {
        let state = initial_data(0.1, 16).unwrap();
        let (a, b) = triad_conservation_check(&state);
        assert!(a.abs() < 1e-13 && b.abs() < 1e-13, "{a} {b}");
        assert_eq!(triad_conservation_check(&SpectralState::zeros(16)), (0.0, 0.0));
    }

    #[test]
    fn conservation_on_random_state() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let state = RandomState::new(24, 24).sample(&mut rng);
        let (a, b) = triad_conservation_check(&state);
        assert!(a.abs() < 1e-12 && b.abs() < 1e-12, "{a} {b}");
    }

    #[test]
    fn quadratic_homogeneity() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let state = RandomState::new(12, 8).sample(&mut rng);
        let base = rhs_direct(&state);
        let lambda = 1.7;
        let scaled = rhs_direct(&state.scaled(lambda));
        for ((_, a), (_, b)) in base.iter().zip(scaled.iter()) {
            assert!((lambda * lambda * a - b).abs() < 1e-12 * (1.0 + b.abs()));
        }
    }

    #[test]
    fn even_sublattice_is_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let state = RandomState::new(16, 12)
            .even_k2_only()
            .with_theta_e(1.0)
            .sample(&mut rng);
        for rhs in [rhs_direct(&state), rhs_fast(&state).unwrap()] {
            for (k, r) in rhs.iter() {
                if k.k2 % 2 != 0 {
                    assert_eq!(r, 0.0, "{k}");
                }
            }
        }
    }

    #[test]
    fn method_parsing() {
        assert_eq!("fast".parse::<Method>().unwrap(), Method::Fast);
        assert_eq!("direct".parse::<Method>().unwrap(), Method::Direct);
        assert!("spectral".parse::<Method>().is_err());
    }

    #[test]
    fn truncation_mismatch_is_reported() {
        let eval = DirectEvaluator::new(8);
        let state = SpectralState::zeros(9);
        assert!(matches!(
            eval.try_evaluate(&state),
            Err(Error::TruncationMismatch { expected: 8, found: 9 })
        ));
    }
}
