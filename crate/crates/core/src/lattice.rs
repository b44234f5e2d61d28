//! Lattice geometry, the even (symmetry-reduced) coefficient storage and the
//! perturbed-shear initial data.
//!
//! Coefficients live on the square truncation `|k1|, |k2| <= N`. Because the
//! field is even and real, `theta_{-k} = theta_k` and only one representative
//! of every pair `{k, -k}` is stored: the half-lattice `k2 > 0`, or `k2 = 0`
//! with `k1 > 0`.

use std::fmt;

use rand::Rng;

use crate::error::{Error, Result};

/// An integer wavevector `(k1, k2)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ModeIndex {
    pub k1: i64,
    pub k2: i64,
}

impl ModeIndex {
    /// The shear harmonic `e = (1, 0)`.
    pub const E: ModeIndex = ModeIndex { k1: 1, k2: 0 };
    /// The perturbation harmonic `g = (0, 2)`.
    pub const G: ModeIndex = ModeIndex { k1: 0, k2: 2 };
    pub const ZERO: ModeIndex = ModeIndex { k1: 0, k2: 0 };

    pub const fn new(k1: i64, k2: i64) -> Self {
        ModeIndex { k1, k2 }
    }

    pub fn is_zero(self) -> bool {
        self.k1 == 0 && self.k2 == 0
    }

    pub fn norm_sq(self) -> i64 {
        self.k1 * self.k1 + self.k2 * self.k2
    }

    /// Euclidean length. Computed from the exact integer square so that
    /// mirror-image modes get bitwise-equal lengths.
    pub fn norm(self) -> f64 {
        (self.norm_sq() as f64).sqrt()
    }

    /// `max(|k1|, |k2|)`.
    pub fn sup_norm(self) -> usize {
        self.k1.unsigned_abs().max(self.k2.unsigned_abs()) as usize
    }

    pub fn in_truncation(self, n: usize) -> bool {
        self.sup_norm() <= n
    }

    /// The half-lattice representative of `{self, -self}`.
    pub fn representative(self) -> ModeIndex {
        if half_lattice_contains_unchecked(self) {
            self
        } else {
            -self
        }
    }
}

impl std::ops::Add for ModeIndex {
    type Output = ModeIndex;
    fn add(self, rhs: ModeIndex) -> ModeIndex {
        ModeIndex::new(self.k1 + rhs.k1, self.k2 + rhs.k2)
    }
}

impl std::ops::Sub for ModeIndex {
    type Output = ModeIndex;
    fn sub(self, rhs: ModeIndex) -> ModeIndex {
        ModeIndex::new(self.k1 - rhs.k1, self.k2 - rhs.k2)
    }
}

impl std::ops::Neg for ModeIndex {
    type Output = ModeIndex;
    fn neg(self) -> ModeIndex {
        ModeIndex::new(-self.k1, -self.k2)
    }
}

impl fmt::Display for ModeIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.k1, self.k2)
    }
}

fn half_lattice_contains_unchecked(k: ModeIndex) -> bool {
    k.k2 > 0 || (k.k2 == 0 && k.k1 > 0)
}

/// Whether `k` is the stored representative of its pair `{k, -k}`.
pub fn half_lattice_contains(k: ModeIndex) -> Result<bool> {
    if k.is_zero() {
        return Err(Error::ZeroMode);
    }
    Ok(half_lattice_contains_unchecked(k))
}

/// `l1 m2 - l2 m1`.
pub fn wedge(l: ModeIndex, m: ModeIndex) -> i64 {
    l.k1 * m.k2 - l.k2 * m.k1
}

/// Triad coupling `(l ^ m) (1/|l| - 1/|m|)`.
pub fn kernel_weight(l: ModeIndex, m: ModeIndex) -> Result<f64> {
    if l.is_zero() || m.is_zero() {
        return Err(Error::ZeroMode);
    }
    Ok(wedge(l, m) as f64 * (1.0 / l.norm() - 1.0 / m.norm()))
}

/// Index arithmetic for the half-lattice box of truncation radius `n`.
///
/// Slots are laid out row-major by `k2 = 0..=n`, each row holding
/// `k1 = -n..=n`. In row `k2 = 0` only the slots with `k1 > 0` are live;
/// the rest stay zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HalfLattice {
    n: usize,
}

impl HalfLattice {
    pub fn new(n: usize) -> Self {
        HalfLattice { n }
    }

    pub fn truncation(self) -> usize {
        self.n
    }

    pub fn row_len(self) -> usize {
        2 * self.n + 1
    }

    pub fn len(self) -> usize {
        self.row_len() * (self.n + 1)
    }

    pub fn is_empty(self) -> bool {
        false
    }

    /// Slot of a half-lattice representative inside the truncation.
    #[inline]
    pub fn slot(self, k: ModeIndex) -> usize {
        debug_assert!(half_lattice_contains_unchecked(k) && k.in_truncation(self.n));
        k.k2 as usize * self.row_len() + (k.k1 + self.n as i64) as usize
    }

    /// Mode stored at `slot`; `None` for the dead slots of row `k2 = 0`.
    #[inline]
    pub fn mode(self, slot: usize) -> Option<ModeIndex> {
        let k2 = (slot / self.row_len()) as i64;
        let k1 = (slot % self.row_len()) as i64 - self.n as i64;
        let k = ModeIndex::new(k1, k2);
        half_lattice_contains_unchecked(k).then_some(k)
    }

    /// All representatives in storage order.
    pub fn modes(self) -> impl Iterator<Item = ModeIndex> {
        (0..self.len()).filter_map(move |s| self.mode(s))
    }
}

/// Experiment parameters shared by the time loop and the diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Params {
    /// Amplitude of the `g`-family harmonics.
    pub tau: f64,
    /// Square truncation radius.
    pub n: usize,
    pub dt: f64,
    pub t_max: f64,
    /// Sobolev order used for the `sob_s` column.
    pub s: f64,
    /// Diagnostic cadence in steps.
    pub sample_every: usize,
}

impl Params {
    /// Largest `tau` for which the shear-amplitude window is guaranteed.
    pub const TAU_WINDOW_LIMIT: f64 = 0.05;

    /// Defaults: `dt = 0.25 / N`, `t_max = 100`, `s = 11`, `sample_every = 16`.
    pub fn new(tau: f64, n: usize) -> Self {
        Params {
            tau,
            n,
            dt: Self::default_dt(n),
            t_max: 100.0,
            s: 11.0,
            sample_every: 16,
        }
    }

    pub fn default_dt(n: usize) -> f64 {
        0.25 / n as f64
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(Error::invalid("tau", "constraint tau>0 violated"));
        }
        if self.n < 8 {
            return Err(Error::invalid("N", "constraint N>=8 violated"));
        }
        if self.n > 1 << 15 {
            return Err(Error::invalid("N", "constraint N<=32768 violated"));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::invalid("dt", "constraint dt>0 violated"));
        }
        if !(self.t_max >= 0.0 && self.t_max.is_finite()) {
            return Err(Error::invalid("t_max", "constraint t_max>=0 violated"));
        }
        if !self.s.is_finite() {
            return Err(Error::invalid("s", "must be finite"));
        }
        if self.sample_every == 0 {
            return Err(Error::invalid("sample_every", "constraint sample_every>=1 violated"));
        }
        Ok(())
    }

    /// `true` when `tau` is above the range where the window bound is guaranteed.
    pub fn tau_flagged(&self) -> bool {
        self.tau > Self::TAU_WINDOW_LIMIT
    }
}

/// Real, even Fourier coefficients on the truncated lattice.
///
/// Only half-lattice representatives are stored, so evenness holds by
/// construction. Values are fixed once built; arithmetic produces new states.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralState {
    lattice: HalfLattice,
    values: Vec<f64>,
    time: f64,
}

impl SpectralState {
    pub fn zeros(n: usize) -> Self {
        let lattice = HalfLattice::new(n);
        SpectralState {
            lattice,
            values: vec![0.0; lattice.len()],
            time: 0.0,
        }
    }

    /// Builds a state from `(mode, value)` pairs. Either member of a pair
    /// `{k, -k}` may be given; a later entry for the same pair overwrites an
    /// earlier one.
    pub fn from_modes<I>(n: usize, modes: I) -> Result<Self>
    where
        I: IntoIterator<Item = (ModeIndex, f64)>,
    {
        let mut state = Self::zeros(n);
        for (k, v) in modes {
            if k.is_zero() {
                return Err(Error::ZeroMode);
            }
            if !k.in_truncation(n) {
                return Err(Error::OutsideTruncation {
                    mode: k,
                    truncation: n,
                });
            }
            if !v.is_finite() {
                return Err(Error::NonFinite { mode: k, time: 0.0 });
            }
            let slot = state.lattice.slot(k.representative());
            state.values[slot] = v;
        }
        Ok(state)
    }

    pub(crate) fn from_raw(lattice: HalfLattice, values: Vec<f64>, time: f64) -> Self {
        debug_assert_eq!(values.len(), lattice.len());
        SpectralState {
            lattice,
            values,
            time,
        }
    }

    pub fn truncation(&self) -> usize {
        self.lattice.n
    }

    pub fn lattice(&self) -> HalfLattice {
        self.lattice
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn with_time(mut self, time: f64) -> Self {
        self.time = time;
        self
    }

    /// Coefficient at any lattice point, read through evenness. Zero at the
    /// origin and outside the truncation.
    #[inline]
    pub fn get(&self, k: ModeIndex) -> f64 {
        if k.is_zero() || !k.in_truncation(self.lattice.n) {
            return 0.0;
        }
        self.values[self.lattice.slot(k.representative())]
    }

    /// Raw slot values in [`HalfLattice`] order.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Representatives with their coefficients, zeros included.
    pub fn iter(&self) -> impl Iterator<Item = (ModeIndex, f64)> + '_ {
        self.lattice.modes().map(move |k| (k, self.values[self.lattice.slot(k)]))
    }

    /// Representatives with nonzero coefficients.
    pub fn support(&self) -> impl Iterator<Item = (ModeIndex, f64)> + '_ {
        self.iter().filter(|&(_, v)| v != 0.0)
    }

    /// Largest `max(|k1|,|k2|)` over the nonzero coefficients (0 for the zero state).
    pub fn support_radius(&self) -> usize {
        self.support().map(|(k, _)| k.sup_norm()).max().unwrap_or(0)
    }

    pub fn first_non_finite(&self) -> Option<ModeIndex> {
        self.iter().find(|(_, v)| !v.is_finite()).map(|(k, _)| k)
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// First nonzero mode with odd `k2`, if any.
    pub fn first_odd_k2(&self) -> Option<ModeIndex> {
        self.support().find(|(k, _)| k.k2 % 2 != 0).map(|(k, _)| k)
    }

    /// Whether the state lives on the even-`k2` sublattice, which the dynamics preserves.
    pub fn odd_k2_vanishes(&self) -> bool {
        self.first_odd_k2().is_none()
    }

    /// `self + h * t`, elementwise; time advanced by `dt_time`.
    pub(crate) fn axpy(&self, h: f64, t: &Tendency, dt_time: f64) -> SpectralState {
        debug_assert_eq!(self.lattice, t.lattice);
        let values = self
            .values
            .iter()
            .zip(&t.values)
            .map(|(v, d)| v + h * d)
            .collect();
        SpectralState::from_raw(self.lattice, values, self.time + dt_time)
    }

    /// Every coefficient multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> SpectralState {
        let values = self.values.iter().map(|v| v * factor).collect();
        SpectralState::from_raw(self.lattice, values, self.time)
    }

    /// Copy with the shear pair `±e` removed.
    pub fn without_shear(&self) -> SpectralState {
        let mut values = self.values.clone();
        values[self.lattice.slot(ModeIndex::E)] = 0.0;
        SpectralState::from_raw(self.lattice, values, self.time)
    }

    /// Copy re-embedded into a larger truncation `n >= self.truncation()`.
    pub fn embed(&self, n: usize) -> Result<SpectralState> {
        if n < self.truncation() {
            return Err(Error::invalid("N", "embedding target must not be smaller"));
        }
        let mut out = SpectralState::from_modes(n, self.support())?;
        out.time = self.time;
        Ok(out)
    }
}

/// Per-mode time derivative, laid out like [`SpectralState`].
#[derive(Debug, Clone, PartialEq)]
pub struct Tendency {
    lattice: HalfLattice,
    values: Vec<f64>,
}

impl Tendency {
    pub fn zeros(n: usize) -> Self {
        let lattice = HalfLattice::new(n);
        Tendency {
            lattice,
            values: vec![0.0; lattice.len()],
        }
    }

    pub(crate) fn from_raw(lattice: HalfLattice, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), lattice.len());
        Tendency { lattice, values }
    }

    pub fn truncation(&self) -> usize {
        self.lattice.n
    }

    #[inline]
    pub fn get(&self, k: ModeIndex) -> f64 {
        if k.is_zero() || !k.in_truncation(self.lattice.n) {
            return 0.0;
        }
        self.values[self.lattice.slot(k.representative())]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn iter(&self) -> impl Iterator<Item = (ModeIndex, f64)> + '_ {
        self.lattice.modes().map(move |k| (k, self.values[self.lattice.slot(k)]))
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `max_k |self_k - other_k|`.
    pub fn max_abs_diff(&self, other: &Tendency) -> f64 {
        assert_eq!(self.lattice, other.lattice, "tendency layouts differ");
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

/// The perturbed shear: `theta_{±e} = 1`, `theta_{±g} = theta_{±(g+e)} = tau`.
pub fn initial_data(tau: f64, n: usize) -> Result<SpectralState> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::invalid("tau", "constraint tau>0 violated"));
    }
    if n < 3 {
        return Err(Error::invalid("N", "truncation must contain g + e = (1, 2)"));
    }
    SpectralState::from_modes(
        n,
        [
            (ModeIndex::E, 1.0),
            (ModeIndex::G, tau),
            (ModeIndex::G + ModeIndex::E, tau),
        ],
    )
}

/// Recipe for pseudo-random even states used by tests, benches and the self-test.
///
/// Amplitudes are `U(-1, 1) / |k|` on the box `max(|k1|,|k2|) <= radius`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RandomState {
    pub n: usize,
    pub radius: usize,
    /// Keep only even `k2` (the sublattice the dynamics preserves).
    pub even_k2_only: bool,
    /// Fixed value for `theta_e`; `None` draws it like any other mode.
    pub theta_e: Option<f64>,
}

impl RandomState {
    pub fn new(n: usize, radius: usize) -> Self {
        RandomState {
            n,
            radius: radius.min(n),
            even_k2_only: false,
            theta_e: None,
        }
    }

    pub fn even_k2_only(mut self) -> Self {
        self.even_k2_only = true;
        self
    }

    pub fn with_theta_e(mut self, theta_e: f64) -> Self {
        self.theta_e = Some(theta_e);
        self
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> SpectralState {
        let lattice = HalfLattice::new(self.n);
        let mut values = vec![0.0; lattice.len()];
        for k in lattice.modes() {
            if k.sup_norm() > self.radius || (self.even_k2_only && k.k2 % 2 != 0) {
                continue;
            }
            let draw: f64 = rng.random_range(-1.0..1.0);
            values[lattice.slot(k)] = draw / k.norm();
        }
        if let Some(theta_e) = self.theta_e {
            values[lattice.slot(ModeIndex::E)] = theta_e;
        }
        SpectralState::from_raw(lattice, values, 0.0)
    }
}
