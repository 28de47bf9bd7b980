//! Trainable readout: ridge initialization of the observed partition,
//! random initialization of the hidden partition, the combined data+physics
//! loss, its analytic gradient, and the full-batch Adam loop.
//!
//! The loss is E_tot = E_d + E_p where E_d is the mean squared error of the
//! predicted observed states against the measurements and E_p is the mean
//! squared one-step forward-Euler mismatch of the full predicted state
//! trajectory: r(n) = ŷ(n+1) − ŷ(n) − Δt·f(ŷ(n)). Only the hidden partition
//! of the readout receives physics information; the data term is
//! structurally independent of it.
//!
//! Measuring the physics term as the step mismatch (rather than the
//! time-derivative residual, which is the same quantity divided by Δt) is
//! load-bearing: the 1/Δt² amplification would make the physics term at any
//! accurate readout as large as the data term at the all-zero readout, and
//! gradient descent from the ridge initialization then collapses every
//! output to the trivial fixed-point solution ŷ = 0 instead of
//! reconstructing the hidden state.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::Dataset;
use crate::dynamics::PhysicsModel;
use crate::error::{Error, Result};
use crate::reservoir::Reservoir;
use crate::seeds::mix;

/// Linear readout `W_out`, `n_y × (n_x + n_u + 1)`, partitioned by row
/// blocks into the observed part (first `n_z` rows) and the hidden part.
#[derive(Debug, Clone, PartialEq)]
pub struct Readout {
    pub w_out: DMatrix<f64>,
    pub n_z: usize,
}

impl Readout {
    pub fn n_y(&self) -> usize {
        self.w_out.nrows()
    }

    pub fn n_h(&self) -> usize {
        self.n_y() - self.n_z
    }

    /// Observed-partition rows W_z,out.
    pub fn w_z_out(&self) -> DMatrix<f64> {
        self.w_out.rows(0, self.n_z).into_owned()
    }

    /// Hidden-partition rows W_h,out.
    pub fn w_h_out(&self) -> DMatrix<f64> {
        self.w_out.rows(self.n_z, self.n_h()).into_owned()
    }

    /// Applies the readout to every feature row: returns ŷ, `M × n_y`.
    pub fn outputs(&self, features: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if features.ncols() != self.w_out.ncols() {
            return Err(Error::Dimension(format!(
                "features have {} columns, readout expects {}",
                features.ncols(),
                self.w_out.ncols()
            )));
        }
        Ok(features * self.w_out.transpose())
    }
}

/// Optimizer and initialization settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    /// Tikhonov factor γ for the ridge initialization.
    pub gamma: f64,
    pub learning_rate: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_epsilon: f64,
    pub max_steps: usize,
    /// Stop early when the best loss improves by a relative factor below
    /// `plateau_rel_tol` over this many steps.
    pub plateau_window: usize,
    pub plateau_rel_tol: f64,
    /// Initial reservoir rows discarded before fitting.
    pub washout: usize,
    /// Half-width of the uniform hidden-row initialization.
    pub hidden_init_scale: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            gamma: 1e-6,
            learning_rate: 1e-4,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_epsilon: 1e-8,
            max_steps: 20_000,
            plateau_window: 1000,
            plateau_rel_tol: 1e-6,
            washout: 100,
            hidden_init_scale: 1e-2,
            seed: 0,
        }
    }
}

/// Loss decomposition at one point in parameter space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossReport {
    pub e_d: f64,
    pub e_p: f64,
    pub e_tot: f64,
}

/// One sampled row of the training trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub step: usize,
    pub e_d: f64,
    pub e_p: f64,
    pub e_tot: f64,
}

/// Result of [`train`].
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Readout with the lowest recorded E_tot.
    pub readout: Readout,
    /// (step, E_d, E_p, E_tot) sampled every 100 steps plus the final step.
    pub trace: Vec<TraceRow>,
    pub best_e_tot: f64,
    /// Number of Adam updates applied.
    pub steps_run: usize,
}

/// Concatenates `[x(n), u(n), 1]` rowwise.
pub fn build_features(states: &DMatrix<f64>, inputs: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let m = states.nrows();
    if inputs.nrows() != m {
        return Err(Error::Dimension(format!(
            "states have {m} rows, inputs have {}",
            inputs.nrows()
        )));
    }
    let n_x = states.ncols();
    let n_u = inputs.ncols();
    let mut features = DMatrix::zeros(m, n_x + n_u + 1);
    features.columns_mut(0, n_x).copy_from(states);
    features.columns_mut(n_x, n_u).copy_from(inputs);
    features.column_mut(n_x + n_u).fill(1.0);
    Ok(features)
}

/// Ridge regression of row-major `targets` on row-major `features`:
/// `W = Zᵀ·Φ (ΦᵀΦ + γI)⁻¹` solved through a Cholesky factorization.
pub fn ridge_init(
    features: &DMatrix<f64>,
    targets: &DMatrix<f64>,
    gamma: f64,
) -> Result<DMatrix<f64>> {
    let m = features.nrows();
    if m == 0 {
        return Err(Error::InvalidArgument(
            "ridge needs at least one sample".into(),
        ));
    }
    if targets.nrows() != m {
        return Err(Error::Dimension(format!(
            "features have {m} rows, targets have {}",
            targets.nrows()
        )));
    }
    if gamma < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "gamma must be non-negative, got {gamma}"
        )));
    }
    let f = features.ncols();
    let mut gram = features.tr_mul(features);
    for i in 0..f {
        gram[(i, i)] += gamma;
    }
    let rhs = features.tr_mul(targets);
    let chol = gram.cholesky().ok_or({
        if gamma == 0.0 {
            Error::SingularSystem
        } else {
            Error::Numeric("Cholesky factorization of the ridge system failed".into())
        }
    })?;
    Ok(chol.solve(&rhs).transpose())
}

/// Readout initialization: ridge solution for the observed rows, small
/// uniform random values for the hidden rows (deterministic in the seed).
pub fn init_readout(
    features: &DMatrix<f64>,
    observed_targets: &DMatrix<f64>,
    config: &TrainConfig,
    n_h: usize,
) -> Result<Readout> {
    let w_z = ridge_init(features, observed_targets, config.gamma)?;
    let n_z = w_z.nrows();
    let f = w_z.ncols();
    let mut w_out = DMatrix::zeros(n_z + n_h, f);
    w_out.rows_mut(0, n_z).copy_from(&w_z);
    let mut rng = ChaCha8Rng::seed_from_u64(mix(config.seed, 0x4d));
    for i in 0..n_h {
        for j in 0..f {
            let r: f64 = rng.random();
            w_out[(n_z + i, j)] = config.hidden_init_scale * (2.0 * r - 1.0);
        }
    }
    Ok(Readout { w_out, n_z })
}

fn check_loss_dims(
    readout: &Readout,
    features: &DMatrix<f64>,
    measured: &DMatrix<f64>,
    model: &dyn PhysicsModel,
) -> Result<()> {
    let m = features.nrows();
    if m < 2 {
        return Err(Error::InsufficientLength { needed: 2, got: m });
    }
    if measured.nrows() != m {
        return Err(Error::Dimension(format!(
            "features have {m} rows, measurements have {}",
            measured.nrows()
        )));
    }
    if measured.ncols() != readout.n_z {
        return Err(Error::Dimension(format!(
            "measurements have {} columns, readout observes {}",
            measured.ncols(),
            readout.n_z
        )));
    }
    if readout.n_y() != model.state_dim() || readout.n_z != model.observed_dim() {
        return Err(Error::Dimension(format!(
            "readout is {}/{} (full/observed), model is {}/{}",
            readout.n_y(),
            readout.n_z,
            model.state_dim(),
            model.observed_dim()
        )));
    }
    if features.ncols() != readout.w_out.ncols() {
        return Err(Error::Dimension(format!(
            "features have {} columns, readout expects {}",
            features.ncols(),
            readout.w_out.ncols()
        )));
    }
    Ok(())
}

/// Shared forward (and optional backward) pass over the whole batch.
///
/// Thin wrapper over [`loss_and_gradient_t`]: callers that revisit the same
/// features many times (the Adam loop) transpose once and use the `_t` form
/// directly instead of paying for a transpose per evaluation.
fn loss_and_gradient(
    readout: &Readout,
    features: &DMatrix<f64>,
    measured: &DMatrix<f64>,
    dt: f64,
    model: &dyn PhysicsModel,
    want_grad: bool,
) -> Result<(LossReport, Option<DMatrix<f64>>)> {
    check_loss_dims(readout, features, measured, model)?;
    loss_and_gradient_t(
        readout,
        &features.transpose(),
        measured,
        dt,
        model,
        want_grad,
    )
}

/// `out[i] = Σ_j w[i·f + j] · phi[j]` for `n_y` contiguous rows of `w`.
///
/// Four independent accumulators let the reduction vectorize without
/// reassociating a single serial FP sum; the loop is the inner kernel of the
/// training step, executed once per sample per Adam iteration.
fn dot_rows(w: &[f64], phi: &[f64], n_y: usize, out: &mut [f64]) {
    let f = phi.len();
    for (i, o) in out.iter_mut().enumerate().take(n_y) {
        let wi = &w[i * f..(i + 1) * f];
        let mut acc = [0.0f64; 4];
        let end = f - f % 4;
        let mut j = 0;
        while j < end {
            acc[0] += wi[j] * phi[j];
            acc[1] += wi[j + 1] * phi[j + 1];
            acc[2] += wi[j + 2] * phi[j + 2];
            acc[3] += wi[j + 3] * phi[j + 3];
            j += 4;
        }
        let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
        while j < f {
            s += wi[j] * phi[j];
            j += 1;
        }
        *o = s;
    }
}

/// Fused single pass over the transposed feature matrix (one sample per
/// contiguous column): computes ŷ sample-by-sample and accumulates the two
/// loss terms and, on request, the gradient (ΦᵀD)ᵀ, without materializing
/// ŷ or the adjoint D. The feature matrix is streamed through memory once
/// per call, which is what bounds the cost of a full-batch step.
///
/// Callers that evaluate many readouts against the same batch (optimization
/// loops) should transpose the features once and use this entry point;
/// [`evaluate_loss`] and [`loss_gradient`] wrap it for one-off calls.
pub fn loss_and_gradient_t(
    readout: &Readout,
    features_t: &DMatrix<f64>,
    measured: &DMatrix<f64>,
    dt: f64,
    model: &dyn PhysicsModel,
    want_grad: bool,
) -> Result<(LossReport, Option<DMatrix<f64>>)> {
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "dt must be positive, got {dt}"
        )));
    }
    let f = features_t.nrows();
    let m = features_t.ncols();
    if m < 2 {
        return Err(Error::InsufficientLength { needed: 2, got: m });
    }
    let n_y = readout.n_y();
    let n_z = readout.n_z;
    let c_d = 1.0 / (m as f64 * n_z as f64);
    let c_p = 1.0 / ((m - 1) as f64 * n_y as f64);
    let a = 2.0 * c_p;

    let w_t = readout.w_out.transpose(); // f × n_y: row i of W_out is contiguous
    let w = w_t.as_slice();
    let phi_all = features_t.as_slice();
    let mut g_t: Option<DMatrix<f64>> = if want_grad {
        Some(DMatrix::zeros(f, n_y))
    } else {
        None
    };

    let mut y_cur = vec![0.0; n_y];
    let mut y_next = vec![0.0; n_y];
    let mut r = vec![0.0; n_y];
    let mut r_prev = vec![0.0; n_y];
    let mut d = vec![0.0; n_y];
    let mut rhs = vec![0.0; n_y];
    let mut jac = DMatrix::zeros(n_y, n_y);
    let mut e_d = 0.0;
    let mut e_p = 0.0;

    dot_rows(w, &phi_all[0..f], n_y, &mut y_cur);
    for n in 0..m {
        if n + 1 < m {
            dot_rows(w, &phi_all[(n + 1) * f..(n + 2) * f], n_y, &mut y_next);
        }
        // Data term and its adjoint on the observed components.
        for (i, di) in d.iter_mut().enumerate().take(n_z) {
            let diff = y_cur[i] - measured[(n, i)];
            e_d += diff * diff;
            *di = 2.0 * c_d * diff;
        }
        for di in d.iter_mut().take(n_y).skip(n_z) {
            *di = 0.0;
        }
        // Physics term: r(n) = ŷ(n+1) − ŷ(n) − Δt·f(ŷ(n)), with
        // ∂r/∂ŷ(n) = −I − Δt·J and ∂r/∂ŷ(n+1) = I. The latter lands on the
        // next sample's adjoint via r_prev on the following iteration.
        if n + 1 < m {
            model.rhs(&y_cur, &mut rhs);
            for j in 0..n_y {
                r[j] = y_next[j] - y_cur[j] - dt * rhs[j];
                e_p += r[j] * r[j];
            }
            if want_grad {
                model.rhs_jacobian(&y_cur, &mut jac);
                for j in 0..n_y {
                    let mut jt_r = 0.0;
                    for i in 0..n_y {
                        jt_r += jac[(i, j)] * r[i];
                    }
                    d[j] += a * (-r[j] - dt * jt_r);
                }
            }
        }
        if let Some(g) = g_t.as_mut() {
            if n > 0 {
                for j in 0..n_y {
                    d[j] += a * r_prev[j];
                }
            }
            // G += D(n) ⊗ φ_n; φ_n was read for ŷ on the previous
            // iteration and is still cache-hot.
            let phi = &phi_all[n * f..(n + 1) * f];
            let gs = g.as_mut_slice();
            for (i, &di) in d.iter().enumerate().take(n_y) {
                let col = &mut gs[i * f..(i + 1) * f];
                for j in 0..f {
                    col[j] += di * phi[j];
                }
            }
        }
        std::mem::swap(&mut y_cur, &mut y_next);
        std::mem::swap(&mut r_prev, &mut r);
    }
    e_d *= c_d;
    e_p *= c_p;

    let report = LossReport {
        e_d,
        e_p,
        e_tot: e_d + e_p,
    };
    Ok((report, g_t.map(|g| g.transpose())))
}

/// E_tot = E_d + E_p at the given readout.
pub fn evaluate_loss(
    readout: &Readout,
    features: &DMatrix<f64>,
    measured: &DMatrix<f64>,
    dt: f64,
    model: &dyn PhysicsModel,
) -> Result<LossReport> {
    loss_and_gradient(readout, features, measured, dt, model, false).map(|(r, _)| r)
}

/// Analytic ∂E_tot/∂W_out, chain-ruled through the linear readout, the
/// Euler step mismatch, and the model rhs Jacobian.
pub fn loss_gradient(
    readout: &Readout,
    features: &DMatrix<f64>,
    measured: &DMatrix<f64>,
    dt: f64,
    model: &dyn PhysicsModel,
) -> Result<DMatrix<f64>> {
    loss_and_gradient(readout, features, measured, dt, model, true).map(|(_, g)| g.unwrap())
}

/// Teacher-forced training pipeline: collect reservoir states from the
/// measured series, drop the washout, ridge-initialize, then run full-batch
/// Adam on E_tot. Returns the readout with the lowest recorded E_tot.
pub fn train(
    reservoir: &Reservoir,
    dataset: &Dataset,
    model: &dyn PhysicsModel,
    config: &TrainConfig,
) -> Result<TrainOutcome> {
    let n_t = dataset.n_samples();
    if n_t < config.washout + 3 {
        return Err(Error::InvalidArgument(format!(
            "dataset has {n_t} samples; need at least washout + 3 = {}",
            config.washout + 3
        )));
    }
    if dataset.n_z() != model.observed_dim() || dataset.n_y() != model.state_dim() {
        return Err(Error::Dimension(format!(
            "dataset is {}/{} (full/observed), model is {}/{}",
            dataset.n_y(),
            dataset.n_z(),
            model.state_dim(),
            model.observed_dim()
        )));
    }
    let (features, targets) = prepare_training_arrays(reservoir, dataset, config.washout)?;
    let readout = init_readout(&features, &targets, config, model.hidden_dim())?;
    adam_minimize(readout, &features, &targets, dataset.dt, model, config)
}

/// Builds the washout-trimmed feature and target matrices for a dataset.
///
/// Input row n is the measurement z(n−1); the matching target is z(n). The
/// reservoir starts from rest, and the first `washout` rows are dropped.
pub fn prepare_training_arrays(
    reservoir: &Reservoir,
    dataset: &Dataset,
    washout: usize,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let measured = dataset.measured();
    let n_t = measured.nrows();
    let m_full = n_t - 1;
    let inputs = measured.rows(0, m_full).into_owned();
    let x0 = DVector::zeros(reservoir.config.n_units);
    let states = reservoir.collect_states(&inputs, &x0)?;
    let features_full = build_features(&states, &inputs)?;
    let m = m_full - washout;
    let features = features_full.rows(washout, m).into_owned();
    let targets = measured.rows(washout + 1, m).into_owned();
    Ok((features, targets))
}

fn adam_minimize(
    mut readout: Readout,
    features: &DMatrix<f64>,
    targets: &DMatrix<f64>,
    dt: f64,
    model: &dyn PhysicsModel,
    config: &TrainConfig,
) -> Result<TrainOutcome> {
    check_loss_dims(&readout, features, targets, model)?;
    // One transpose up front so every step streams contiguous per-sample
    // columns instead of strided rows.
    let features_t = features.transpose();
    let shape = readout.w_out.shape();
    let mut m1: DMatrix<f64> = DMatrix::zeros(shape.0, shape.1);
    let mut m2: DMatrix<f64> = DMatrix::zeros(shape.0, shape.1);
    let mut best = f64::INFINITY;
    let mut best_w = readout.w_out.clone();
    let mut best_history: Vec<f64> = Vec::with_capacity(config.max_steps + 1);
    let mut trace = Vec::new();
    let mut steps_run = 0usize;

    for step in 0..=config.max_steps {
        let last = step == config.max_steps;
        let (report, grad) = loss_and_gradient_t(&readout, &features_t, targets, dt, model, !last)?;
        if !report.e_tot.is_finite() {
            return Err(Error::TrainingDiverged { step });
        }
        if report.e_tot < best {
            best = report.e_tot;
            best_w.copy_from(&readout.w_out);
        }
        best_history.push(best);
        if step % 100 == 0 || last {
            trace.push(TraceRow {
                step,
                e_d: report.e_d,
                e_p: report.e_p,
                e_tot: report.e_tot,
            });
        }
        if last {
            break;
        }
        if step >= config.plateau_window {
            let prev = best_history[step - config.plateau_window];
            if prev > 0.0 && (prev - best) / prev < config.plateau_rel_tol {
                if trace.last().map(|t| t.step) != Some(step) {
                    trace.push(TraceRow {
                        step,
                        e_d: report.e_d,
                        e_p: report.e_p,
                        e_tot: report.e_tot,
                    });
                }
                break;
            }
        }

        let grad = grad.unwrap();
        let t = (step + 1) as f64;
        let b1 = config.adam_beta1;
        let b2 = config.adam_beta2;
        let bc1 = 1.0 - b1.powf(t);
        let bc2 = 1.0 - b2.powf(t);
        for (i, g) in grad.iter().enumerate() {
            m1[i] = b1 * m1[i] + (1.0 - b1) * g;
            m2[i] = b2 * m2[i] + (1.0 - b2) * g * g;
            let mh = m1[i] / bc1;
            let vh: f64 = m2[i] / bc2;
            readout.w_out[i] -= config.learning_rate * mh / (vh.sqrt() + config.adam_epsilon);
        }
        steps_run = step + 1;
    }

    Ok(TrainOutcome {
        readout: Readout {
            w_out: best_w,
            n_z: readout.n_z,
        },
        trace,
        best_e_tot: best,
        steps_run,
    })
}

/// Teacher-forced prediction: collects states from `inputs`, applies the
/// readout rowwise, and splits the output into observed and hidden series.
/// Rows are aligned with input rows; the first `washout` rows are burn-in.
#[derive(Debug, Clone)]
pub struct Prediction {
    pub z_hat: DMatrix<f64>,
    pub h_hat: DMatrix<f64>,
    /// Number of leading burn-in rows.
    pub washout: usize,
}

pub fn predict(
    readout: &Readout,
    reservoir: &Reservoir,
    inputs: &DMatrix<f64>,
    x0: &DVector<f64>,
    washout: usize,
) -> Result<Prediction> {
    let states = reservoir.collect_states(inputs, x0)?;
    let features = build_features(&states, inputs)?;
    let y = readout.outputs(&features)?;
    Ok(Prediction {
        z_hat: y.columns(0, readout.n_z).into_owned(),
        h_hat: y.columns(readout.n_z, readout.n_h()).into_owned(),
        washout,
    })
}
