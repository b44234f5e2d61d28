use std::sync::{Arc, Mutex};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::exec::{self, Parallelism};
use crate::lattice::{HalfLattice, RandomState, SpectralState, Tendency};

use super::{DirectEvaluator, RhsEvaluator};

/// Max-norm agreement required between the transform path and the direct sum
/// on the calibration probes.
pub const CALIBRATION_TOLERANCE: f64 = 1e-12;

/// Orientation of the perpendicular gradient in `u = grad^perp (-Lap)^{-1/2} theta`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Orientation {
    /// `grad^perp = (-d_y, d_x)`.
    Standard,
    /// `grad^perp = (d_y, -d_x)`.
    Reversed,
}

impl Orientation {
    fn sign(self) -> f64 {
        match self {
            Orientation::Standard => 1.0,
            Orientation::Reversed => -1.0,
        }
    }
}

/// Smallest `m >= min` whose prime factors are 2, 3 and 5.
fn smooth_size(min: usize) -> usize {
    (min.max(1)..)
        .find(|&m| {
            let mut r = m;
            for p in [2, 3, 5] {
                while r % p == 0 {
                    r /= p;
                }
            }
            r == 1
        })
        .expect("unbounded search")
}

/// Padded collocation grid for one `k2` stride.
///
/// With `stride = 2` only even `k2 = 2q` are represented and the field is
/// sampled over half a period in `y`, which halves the work for states on
/// the even sublattice.
struct GridPlan {
    stride: usize,
    qmax: usize,
    mx: usize,
    my: usize,
    fwd_x: Arc<dyn Fft<f64>>,
    inv_x: Arc<dyn Fft<f64>>,
    fwd_y: Arc<dyn Fft<f64>>,
    inv_y: Arc<dyn Fft<f64>>,
}

impl GridPlan {
    fn new(n: usize, stride: usize, planner: &mut FftPlanner<f64>) -> Self {
        let qmax = n / stride;
        // Quadratic products reach 2n (2 qmax); 3n + 1 points keep the
        // aliases of those modes outside the retained band.
        let mx = smooth_size(3 * n + 1);
        let my = smooth_size(3 * qmax + 1);
        GridPlan {
            stride,
            qmax,
            mx,
            my,
            fwd_x: planner.plan_fft_forward(mx),
            inv_x: planner.plan_fft_inverse(mx),
            fwd_y: planner.plan_fft_forward(my),
            inv_y: planner.plan_fft_inverse(my),
        }
    }
}

struct Buffers {
    spec_a: Vec<Complex64>,
    spec_b: Vec<Complex64>,
    phys_a: Vec<Complex64>,
    phys_b: Vec<Complex64>,
}

/// Pseudo-spectral evaluator: `(u . grad) theta` on a grid padded to at
/// least `3N + 1` points per axis, which makes it equal to the truncated
/// triad sum.
///
/// Construction calibrates the orientation of `grad^perp` against
/// [`DirectEvaluator`] and fails if neither orientation reproduces it.
pub struct FastEvaluator {
    n: usize,
    par: Parallelism,
    orientation: Orientation,
    full: GridPlan,
    even: GridPlan,
    /// `1/|k|` per half-lattice slot.
    inv_norm: Vec<f64>,
    pool: Mutex<Vec<Buffers>>,
}

impl std::fmt::Debug for FastEvaluator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FastEvaluator")
            .field("n", &self.n)
            .field("orientation", &self.orientation)
            .field("grid", &(self.full.mx, self.full.my))
            .field("even_grid", &(self.even.mx, self.even.my))
            .finish()
    }
}

fn inverse_norms(n: usize) -> Vec<f64> {
    let lattice = HalfLattice::new(n);
    let mut inv = vec![0.0; lattice.len()];
    for k in lattice.modes() {
        inv[lattice.slot(k)] = 1.0 / k.norm();
    }
    inv
}

impl FastEvaluator {
    pub fn new(n: usize) -> Result<Self> {
        Self::with_parallelism(n, Parallelism::Auto)
    }

    pub fn with_parallelism(n: usize, par: Parallelism) -> Result<Self> {
        if n < 2 {
            return Err(Error::invalid("N", "transform evaluator needs N >= 2"));
        }
        let mut planner = FftPlanner::new();
        let mut eval = FastEvaluator {
            n,
            par,
            orientation: Orientation::Standard,
            full: GridPlan::new(n, 1, &mut planner),
            even: GridPlan::new(n, 2, &mut planner),
            inv_norm: inverse_norms(n),
            pool: Mutex::new(Vec::new()),
        };
        eval.calibrate()?;
        Ok(eval)
    }

    pub fn orientation(&self) -> Orientation {
        self.orientation
    }

    /// `(mx, my)` of the general grid and of the even-sublattice grid.
    pub fn grid_sizes(&self) -> [(usize, usize); 2] {
        [(self.full.mx, self.full.my), (self.even.mx, self.even.my)]
    }

    fn calibrate(&mut self) -> Result<()> {
        let radius = (self.n / 2).clamp(1, 6);
        let direct = DirectEvaluator::with_parallelism(self.n, self.par);
        let mut rng = ChaCha8Rng::seed_from_u64(0x5147_0001);
        let general = RandomState::new(self.n, radius).sample(&mut rng);
        let reference = direct.evaluate(&general);

        let mut chosen = None;
        let mut errors = Vec::new();
        for orientation in [Orientation::Standard, Orientation::Reversed] {
            let err = self
                .evaluate_with_orientation(&general, orientation)
                .max_abs_diff(&reference);
            errors.push(format!("{orientation:?}: {err:.3e}"));
            if err < CALIBRATION_TOLERANCE && chosen.is_none() {
                chosen = Some(orientation);
            }
        }
        let Some(orientation) = chosen else {
            return Err(Error::Calibration(format!(
                "no orientation within {CALIBRATION_TOLERANCE:e} ({})",
                errors.join(", ")
            )));
        };
        self.orientation = orientation;

        let sublattice = RandomState::new(self.n, radius)
            .even_k2_only()
            .with_theta_e(1.0)
            .sample(&mut rng);
        let err = self.evaluate(&sublattice).max_abs_diff(&direct.evaluate(&sublattice));
        if err >= CALIBRATION_TOLERANCE {
            return Err(Error::Calibration(format!(
                "even-sublattice grid disagrees by {err:.3e}"
            )));
        }
        Ok(())
    }

    /// Evaluates with an explicit orientation, bypassing the calibrated one.
    pub fn evaluate_with_orientation(
        &self,
        state: &SpectralState,
        orientation: Orientation,
    ) -> Tendency {
        assert_eq!(state.truncation(), self.n, "truncation mismatch");
        let plan = if state.odd_k2_vanishes() {
            &self.even
        } else {
            &self.full
        };
        let mut buf = self.take_buffers(plan);
        let values = self.transform_product(state, plan, orientation.sign(), &mut buf);
        self.pool.lock().expect("buffer pool poisoned").push(buf);
        Tendency::from_raw(HalfLattice::new(self.n), values)
    }

    fn take_buffers(&self, plan: &GridPlan) -> Buffers {
        let spec_len = (2 * self.n + 1) * plan.my;
        let phys_len = plan.mx * plan.my;
        let mut pool = self.pool.lock().expect("buffer pool poisoned");
        let reusable = pool
            .iter()
            .position(|b| b.spec_a.len() == spec_len && b.phys_a.len() == phys_len);
        match reusable {
            Some(i) => pool.swap_remove(i),
            None => Buffers {
                spec_a: vec![Complex64::default(); spec_len],
                spec_b: vec![Complex64::default(); spec_len],
                phys_a: vec![Complex64::default(); phys_len],
                phys_b: vec![Complex64::default(); phys_len],
            },
        }
    }

    fn transform_product(
        &self,
        state: &SpectralState,
        plan: &GridPlan,
        sign: f64,
        buf: &mut Buffers,
    ) -> Vec<f64> {
        let n = self.n;
        let rows = 2 * n + 1;
        let (mx, my) = (plan.mx, plan.my);
        let zero = Complex64::default();
        let values = state.values();

        // Spectra of u1 + i u2 and theta_x + i theta_y, rows k1 = -n..=n,
        // columns q mod my. Only rows k2 = stride * q are visited.
        buf.spec_a.fill(zero);
        buf.spec_b.fill(zero);
        for q in 0..=plan.qmax {
            let k2 = (q * plan.stride) as i64;
            let base = k2 as usize * rows;
            let neg_col = (my - q) % my;
            for r in 0..rows {
                let v = values[base + r];
                if v == 0.0 || (k2 == 0 && r <= n) {
                    continue;
                }
                let k1 = r as i64 - n as i64;
                let psi = v * self.inv_norm[base + r];
                let (f1, f2) = (k1 as f64, k2 as f64);
                let a = Complex64::new(-sign * f1 * psi, -sign * f2 * psi);
                let b = Complex64::new(-f2 * v, f1 * v);
                // theta_{-k} = theta_k flips the sign of every gradient factor.
                buf.spec_a[r * my + q] = a;
                buf.spec_b[r * my + q] = b;
                let mirror = (rows - 1 - r) * my + neg_col;
                buf.spec_a[mirror] = -a;
                buf.spec_b[mirror] = -b;
            }
        }

        let par = self.par;
        fft_rows(par, &plan.inv_y, &mut buf.spec_a, my);
        fft_rows(par, &plan.inv_y, &mut buf.spec_b, my);

        transpose_into_grid(par, &buf.spec_a, &mut buf.phys_a, rows, my, mx, n);
        transpose_into_grid(par, &buf.spec_b, &mut buf.phys_b, rows, my, mx, n);

        fft_rows(par, &plan.inv_x, &mut buf.phys_a, mx);
        fft_rows(par, &plan.inv_x, &mut buf.phys_b, mx);

        let phys_b = &buf.phys_b;
        exec::for_each_chunk(par, &mut buf.phys_a, TILE * mx, |i, chunk| {
            let other = &phys_b[i * TILE * mx..][..chunk.len()];
            for (a, b) in chunk.iter_mut().zip(other) {
                *a = Complex64::new(a.re * b.re + a.im * b.im, 0.0);
            }
        });

        fft_rows(par, &plan.fwd_x, &mut buf.phys_a, mx);
        gather_from_grid(par, &buf.phys_a, &mut buf.spec_a, rows, my, mx, n);
        fft_rows(par, &plan.fwd_y, &mut buf.spec_a, my);

        let scale = 1.0 / (mx * my) as f64;
        let mut out = vec![0.0; values.len()];
        for q in 0..=plan.qmax {
            let base = q * plan.stride * rows;
            for r in 0..rows {
                out[base + r] = buf.spec_a[r * my + q].re * scale;
            }
        }
        out[..=n].fill(0.0);
        out
    }
}

impl RhsEvaluator for FastEvaluator {
    fn truncation(&self) -> usize {
        self.n
    }

    fn evaluate(&self, state: &SpectralState) -> Tendency {
        self.evaluate_with_orientation(state, self.orientation)
    }
}

/// In-place FFT of every `len`-long row of `data`.
fn fft_rows(par: Parallelism, fft: &Arc<dyn Fft<f64>>, data: &mut [Complex64], len: usize) {
    let scratch_len = fft.get_inplace_scratch_len();
    let rows_per_task = (8192 / len).max(1);
    exec::for_each_chunk_with(
        par,
        data,
        rows_per_task * len,
        || vec![Complex64::default(); scratch_len],
        |scratch, _, chunk| fft.process_with_scratch(chunk, scratch),
    );
}

/// Rows (or columns) moved together by the transposes.
const TILE: usize = 16;

/// Scatters the `rows x my` array (rows indexed by `k1 + n`) into the
/// `my x mx` grid, placing row `k1` in column `k1 mod mx`; other columns are zeroed.
fn transpose_into_grid(
    par: Parallelism,
    spec: &[Complex64],
    grid: &mut [Complex64],
    rows: usize,
    my: usize,
    mx: usize,
    n: usize,
) {
    exec::for_each_chunk(par, grid, TILE * mx, |i, chunk| {
        chunk.fill(Complex64::default());
        let y0 = i * TILE;
        let height = chunk.len() / mx;
        for r in 0..rows {
            let col = (r + mx - n) % mx;
            let src = &spec[r * my + y0..][..height];
            for (dy, &v) in src.iter().enumerate() {
                chunk[dy * mx + col] = v;
            }
        }
    });
}

/// Inverse of [`transpose_into_grid`] on the retained columns.
fn gather_from_grid(
    par: Parallelism,
    grid: &[Complex64],
    spec: &mut [Complex64],
    rows: usize,
    my: usize,
    mx: usize,
    n: usize,
) {
    exec::for_each_chunk(par, &mut spec[..rows * my], TILE * my, |i, chunk| {
        let r0 = i * TILE;
        let count = chunk.len() / my;
        for y in 0..my {
            let line = &grid[y * mx..(y + 1) * mx];
            for dr in 0..count {
                chunk[dr * my + y] = line[(r0 + dr + mx - n) % mx];
            }
        }
    });
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::initial_data;

    #[test]
    fn smooth_sizes() {
        assert_eq!(smooth_size(193), 200);
        assert_eq!(smooth_size(97), 100);
        assert_eq!(smooth_size(25), 25);
        assert_eq!(smooth_size(385), 400);
        assert_eq!(smooth_size(1), 1);
    }

    #[test]
    fn grids_are_padded() {
        let eval = FastEvaluator::new(16).unwrap();
        let [(mx, my), (ex, ey)] = eval.grid_sizes();
        assert!(mx >= 49 && my >= 49);
        assert!(ex >= 49 && ey >= 25);
    }

    #[test]
    fn calibration_picks_reversed_orientation() {
        // (u . grad theta)^ with grad^perp = (-d_y, d_x) is minus the printed
        // symmetrized sum, so the reversed orientation must win.
        let eval = FastEvaluator::new(8).unwrap();
        assert_eq!(eval.orientation(), Orientation::Reversed);
        let state = initial_data(0.1, 8).unwrap();
        let a = eval.evaluate(&state);
        let b = eval.evaluate_with_orientation(&state, Orientation::Standard);
        for ((_, x), (_, y)) in a.iter().zip(b.iter()) {
            assert!((x + y).abs() < 1e-15);
        }
    }

    #[test]
    fn agrees_with_direct_on_initial_data() {
        let state = initial_data(0.1, 16).unwrap();
        let fast = FastEvaluator::new(16).unwrap().evaluate(&state);
        let direct = DirectEvaluator::new(16).evaluate(&state);
        assert!(fast.max_abs_diff(&direct) < 1e-12);
    }

    #[test]
    fn agrees_with_direct_on_general_state() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let state = RandomState::new(32, 16).sample(&mut rng);
        assert!(!state.odd_k2_vanishes());
        let fast = FastEvaluator::new(32).unwrap().evaluate(&state);
        let direct = DirectEvaluator::new(32).evaluate(&state);
        let err = fast.max_abs_diff(&direct);
        assert!(err < 1e-12, "{err:e}");
    }

    #[test]
    fn output_on_full_box_is_projected() {
        // Support filling the whole truncation exercises the aliasing margin.
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let state = RandomState::new(10, 10).sample(&mut rng);
        let fast = FastEvaluator::new(10).unwrap().evaluate(&state);
        let direct = DirectEvaluator::new(10).evaluate(&state);
        assert!(fast.max_abs_diff(&direct) < 1e-12);
    }
}
