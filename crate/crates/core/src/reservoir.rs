//! Fixed random reservoir: sparse input and recurrent matrices plus
//! teacher-forced state propagation.
//!
//! `W_in` has one nonzero per row drawn uniformly from `[-σ_in, σ_in]`;
//! `W` has exactly `d` nonzeros per row drawn uniformly from `[-1, 1]` and
//! is rescaled so its spectral radius equals `Λ`. Neither matrix is trained.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::seeds::mix;

/// tanh saturates to exactly ±1.0 in f64 once |v| exceeds ~19; clamp one ulp
/// inside so reservoir states stay strictly within (−1, 1).
const TANH_SUP: f64 = 1.0 - f64::EPSILON / 2.0;

fn squash(v: f64) -> f64 {
    v.tanh().clamp(-TANH_SUP, TANH_SUP)
}

/// Generation parameters for the fixed random matrices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReservoirConfig {
    /// Number of reservoir units N_x.
    pub n_units: usize,
    /// Input dimension N_u (bias column excluded).
    pub input_dim: usize,
    /// Input scaling σ_in.
    pub sigma_in: f64,
    /// Target spectral radius Λ of the recurrent matrix.
    pub spectral_radius: f64,
    /// Nonzeros per recurrent row ⟨d⟩.
    pub avg_degree: usize,
    pub seed: u64,
}

impl ReservoirConfig {
    /// Config with the standard Lorenz-experiment constants
    /// (σ_in = 1, Λ = 1, ⟨d⟩ = 20).
    pub fn new(n_units: usize, input_dim: usize, seed: u64) -> Self {
        Self {
            n_units,
            input_dim,
            sigma_in: 1.0,
            spectral_radius: 1.0,
            avg_degree: 20.min(n_units),
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_units == 0 {
            return Err(Error::InvalidArgument("n_units must be positive".into()));
        }
        if self.input_dim == 0 {
            return Err(Error::InvalidArgument("input_dim must be positive".into()));
        }
        if self.avg_degree == 0 || self.avg_degree > self.n_units {
            return Err(Error::InvalidArgument(format!(
                "avg_degree must be in 1..={}, got {}",
                self.n_units, self.avg_degree
            )));
        }
        if !(self.sigma_in >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "sigma_in must be non-negative, got {}",
                self.sigma_in
            )));
        }
        if !(self.spectral_radius > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "spectral_radius must be positive, got {}",
                self.spectral_radius
            )));
        }
        Ok(())
    }
}

/// Fixed input and recurrent matrices. Immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct Reservoir {
    /// `n_units × (input_dim + 1)`; the last column multiplies the bias 1.
    pub w_in: DMatrix<f64>,
    /// `n_units × n_units`.
    pub w: DMatrix<f64>,
    pub config: ReservoirConfig,
}

/// Builds `W_in`: per row, one uniformly chosen column holds one draw from
/// `[-σ_in, σ_in]`, everything else is zero. Deterministic in the seed.
pub fn build_input_matrix(config: &ReservoirConfig) -> Result<DMatrix<f64>> {
    config.validate()?;
    let cols = config.input_dim + 1;
    let mut rng = ChaCha8Rng::seed_from_u64(mix(config.seed, 0x1a));
    let mut w_in = DMatrix::zeros(config.n_units, cols);
    for i in 0..config.n_units {
        let j = rng.random_range(0..cols);
        let r: f64 = rng.random();
        w_in[(i, j)] = config.sigma_in * (2.0 * r - 1.0);
    }
    Ok(w_in)
}

/// Builds `W`: each row has exactly `avg_degree` nonzeros at distinct
/// columns, values uniform on `[-1, 1]`, then the whole matrix is rescaled
/// by `Λ / ρ(W_raw)`. The raw draw depends only on the seed and dimensions,
/// so changing `Λ` rescales the result linearly.
pub fn build_recurrent_matrix(config: &ReservoirConfig) -> Result<DMatrix<f64>> {
    config.validate()?;
    let n = config.n_units;
    let mut rng = ChaCha8Rng::seed_from_u64(mix(config.seed, 0x2b));
    let mut w = DMatrix::zeros(n, n);
    for i in 0..n {
        let cols = rand::seq::index::sample(&mut rng, n, config.avg_degree);
        for j in cols.iter() {
            let r: f64 = rng.random();
            w[(i, j)] = 2.0 * r - 1.0;
        }
    }
    let rho_raw = spectral_radius(&w)?;
    if rho_raw < 1e-12 {
        return Err(Error::DegenerateMatrix);
    }
    let scale = config.spectral_radius / rho_raw;
    w *= scale;
    let rho = spectral_radius(&w)?;
    let rel = (rho - config.spectral_radius).abs() / config.spectral_radius;
    if rel > 1e-6 {
        return Err(Error::Numeric(format!(
            "spectral radius after rescaling is {rho}, target {} (relative error {rel:.3e})",
            config.spectral_radius
        )));
    }
    Ok(w)
}

/// Largest absolute eigenvalue of a square matrix.
///
/// Dense Schur decomposition up to 1200×1200 (robust to complex dominant
/// pairs); power iteration with windowed growth-rate estimates above that.
pub fn spectral_radius(m: &DMatrix<f64>) -> Result<f64> {
    let n = m.nrows();
    if n != m.ncols() {
        return Err(Error::Dimension(format!(
            "matrix is {}×{}, need square",
            n,
            m.ncols()
        )));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidState { index: 0 });
    }
    if n == 0 {
        return Ok(0.0);
    }
    if n <= 1200 {
        let eig = m.clone().complex_eigenvalues();
        return Ok(eig.iter().fold(0.0_f64, |acc, l| acc.max(l.norm())));
    }
    power_iteration_radius(m)
}

/// Growth-rate power iteration for large matrices. A geometric mean over a
/// window of steps averages out the oscillation of complex dominant pairs.
fn power_iteration_radius(m: &DMatrix<f64>) -> Result<f64> {
    let n = m.nrows();
    let window = 32usize;
    let max_windows = 2000usize;
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut x = DVector::from_fn(n, |_, _| 2.0 * rng.random::<f64>() - 1.0);
    let norm = x.norm();
    if norm == 0.0 {
        return Err(Error::Numeric("zero start vector".into()));
    }
    x /= norm;
    let mut y = DVector::zeros(n);
    let mut prev_estimate = f64::NAN;
    for _ in 0..max_windows {
        let mut log_growth = 0.0;
        for _ in 0..window {
            y.gemv(1.0, m, &x, 0.0);
            let ny = y.norm();
            if ny == 0.0 {
                return Ok(0.0); // nilpotent action on this vector
            }
            log_growth += ny.ln();
            y /= ny;
            std::mem::swap(&mut x, &mut y);
        }
        let estimate = (log_growth / window as f64).exp();
        if prev_estimate.is_finite() {
            let rel = (estimate - prev_estimate).abs() / estimate.max(f64::MIN_POSITIVE);
            if rel < 1e-8 {
                return Ok(estimate);
            }
        }
        prev_estimate = estimate;
    }
    Err(Error::Numeric(
        "power iteration for the spectral radius did not converge".into(),
    ))
}

impl Reservoir {
    pub fn build(config: ReservoirConfig) -> Result<Self> {
        let w_in = build_input_matrix(&config)?;
        let w = build_recurrent_matrix(&config)?;
        Ok(Self { w_in, w, config })
    }

    /// One reservoir update: `x(n) = tanh(W_in [u; 1] + W x(n−1))`.
    pub fn advance(&self, x_prev: &DVector<f64>, u: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_dims(x_prev.len(), u.len())?;
        let mut pre = DVector::zeros(self.config.n_units);
        self.accumulate_preactivation(x_prev.as_slice(), u.as_slice(), &mut pre);
        Ok(pre.map(squash))
    }

    /// Teacher-forced state collection: row n of the result is the state
    /// after feeding input rows 0..=n, starting from `x0`.
    pub fn collect_states(&self, inputs: &DMatrix<f64>, x0: &DVector<f64>) -> Result<DMatrix<f64>> {
        self.check_dims(x0.len(), inputs.ncols())?;
        let n_x = self.config.n_units;
        let m = inputs.nrows();
        let mut states = DMatrix::zeros(m, n_x);
        let mut x = x0.clone();
        let mut pre = DVector::zeros(n_x);
        let mut u = vec![0.0; inputs.ncols()];
        for n in 0..m {
            for j in 0..inputs.ncols() {
                u[j] = inputs[(n, j)];
            }
            self.accumulate_preactivation(x.as_slice(), &u, &mut pre);
            for i in 0..n_x {
                x[i] = squash(pre[i]);
                states[(n, i)] = x[i];
            }
        }
        Ok(states)
    }

    fn accumulate_preactivation(&self, x_prev: &[f64], u: &[f64], pre: &mut DVector<f64>) {
        // pre = W_in [u; 1] + W x_prev
        let n_u = u.len();
        pre.copy_from(&self.w_in.column(n_u));
        for j in 0..n_u {
            pre.axpy(u[j], &self.w_in.column(j), 1.0);
        }
        let x = DVector::from_column_slice(x_prev);
        pre.gemv(1.0, &self.w, &x, 1.0);
    }

    fn check_dims(&self, x_len: usize, u_len: usize) -> Result<()> {
        if x_len != self.config.n_units {
            return Err(Error::Dimension(format!(
                "state has length {x_len}, reservoir has {} units",
                self.config.n_units
            )));
        }
        if u_len != self.config.input_dim {
            return Err(Error::Dimension(format!(
                "input has length {u_len}, reservoir expects {}",
                self.config.input_dim
            )));
        }
        Ok(())
    }
}
