use crate::exec::{self, Parallelism};
use crate::lattice::{wedge, HalfLattice, ModeIndex, SpectralState, Tendency};

use super::RhsEvaluator;

/// Explicit triad sum, `O(M * S)` for `M` retained modes and `S` nonzero
/// coefficients. Each output mode accumulates its pairs in a fixed order.
#[derive(Debug, Clone)]
pub struct DirectEvaluator {
    n: usize,
    /// `1/|k|` over the full box, row-major in `k2`, zero at the origin.
    inv_norm: Vec<f64>,
    par: Parallelism,
}

impl DirectEvaluator {
    pub fn new(n: usize) -> Self {
        Self::with_parallelism(n, Parallelism::Auto)
    }

    pub fn with_parallelism(n: usize, par: Parallelism) -> Self {
        let side = 2 * n + 1;
        let mut inv_norm = vec![0.0; side * side];
        for (i, w) in inv_norm.iter_mut().enumerate() {
            let k = ModeIndex::new((i % side) as i64 - n as i64, (i / side) as i64 - n as i64);
            if !k.is_zero() {
                *w = 1.0 / k.norm();
            }
        }
        DirectEvaluator { n, inv_norm, par }
    }

    #[inline]
    fn full_index(&self, k: ModeIndex) -> usize {
        let side = 2 * self.n as i64 + 1;
        ((k.k2 + self.n as i64) * side + k.k1 + self.n as i64) as usize
    }
}

impl RhsEvaluator for DirectEvaluator {
    fn truncation(&self) -> usize {
        self.n
    }

    fn evaluate(&self, state: &SpectralState) -> Tendency {
        assert_eq!(state.truncation(), self.n, "truncation mismatch");
        let n = self.n;
        let side = 2 * n + 1;

        let mut full = vec![0.0; side * side];
        let mut support = Vec::new();
        for (k, v) in state.support() {
            for p in [k, -k] {
                full[self.full_index(p)] = v;
                support.push((p, v, self.inv_norm[self.full_index(p)]));
            }
        }
        support.sort_unstable_by_key(|&(p, _, _)| (p.k2, p.k1));

        let lattice = HalfLattice::new(n);
        let mut values = vec![0.0; lattice.len()];
        exec::for_each_chunk(self.par, &mut values, lattice.row_len(), |k2, row| {
            for (i, out) in row.iter_mut().enumerate() {
                let k = ModeIndex::new(i as i64 - n as i64, k2 as i64);
                if k2 == 0 && k.k1 <= 0 {
                    continue;
                }
                let mut acc = 0.0;
                for &(l, theta_l, inv_l) in &support {
                    let m = k - l;
                    if m.is_zero() || !m.in_truncation(n) {
                        continue;
                    }
                    let idx = self.full_index(m);
                    let theta_m = full[idx];
                    if theta_m != 0.0 {
                        acc += wedge(l, m) as f64 * (inv_l - self.inv_norm[idx]) * theta_l * theta_m;
                    }
                }
                *out = 0.5 * acc;
            }
        });
        Tendency::from_raw(lattice, values)
    }
}
