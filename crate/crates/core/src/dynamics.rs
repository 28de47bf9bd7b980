//! Physics models and the explicit Euler machinery built on them.
//!
//! A [`PhysicsModel`] supplies the right-hand side f(y) of an autonomous ODE
//! ẏ = f(y) together with the split of the state vector into observed and
//! hidden components, y = [z; h]. The same forward-Euler discretization is
//! used both to generate reference trajectories and to evaluate the physics
//! residual on network outputs, so an exactly Euler-generated trajectory has
//! an identically zero residual up to floating rounding.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Right-hand side of an autonomous ODE with an observed/hidden state split.
///
/// State ordering is `[observed; hidden]`. Implementations must be pure:
/// identical inputs yield identical outputs.
pub trait PhysicsModel: Send + Sync {
    fn name(&self) -> &str;
    fn state_dim(&self) -> usize;
    fn observed_dim(&self) -> usize;
    fn hidden_dim(&self) -> usize {
        self.state_dim() - self.observed_dim()
    }
    /// Factor multiplying the time axis in reports (for Lorenz the largest
    /// Lyapunov exponent, so plots read in Lyapunov times).
    fn report_time_scale(&self) -> f64 {
        1.0
    }
    /// Writes f(state) into `deriv`. Both slices have length `state_dim`.
    fn rhs(&self, state: &[f64], deriv: &mut [f64]);
    /// Writes the Jacobian ∂f/∂y at `state` into `jac` (`state_dim` square).
    fn rhs_jacobian(&self, state: &[f64], jac: &mut DMatrix<f64>);
}

/// Lorenz '63 constants. `beta` is stored at full f64 precision of 8/3.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LorenzConstants {
    pub rho: f64,
    pub sigma: f64,
    pub beta: f64,
    /// Largest Lyapunov exponent, used only to normalize report time axes.
    pub lambda_max: f64,
}

impl Default for LorenzConstants {
    fn default() -> Self {
        Self {
            rho: 28.0,
            sigma: 10.0,
            beta: 8.0 / 3.0,
            lambda_max: 0.934,
        }
    }
}

/// Lorenz system with φ1, φ2 observed and φ3 hidden.
#[derive(Debug, Clone, Default)]
pub struct Lorenz {
    pub constants: LorenzConstants,
}

impl PhysicsModel for Lorenz {
    fn name(&self) -> &str {
        "lorenz"
    }

    fn state_dim(&self) -> usize {
        3
    }

    fn observed_dim(&self) -> usize {
        2
    }

    fn report_time_scale(&self) -> f64 {
        self.constants.lambda_max
    }

    fn rhs(&self, state: &[f64], deriv: &mut [f64]) {
        let c = &self.constants;
        let (p1, p2, p3) = (state[0], state[1], state[2]);
        deriv[0] = c.sigma * (p2 - p1);
        deriv[1] = p1 * (c.rho - p3) - p2;
        deriv[2] = p1 * p2 - c.beta * p3;
    }

    fn rhs_jacobian(&self, state: &[f64], jac: &mut DMatrix<f64>) {
        let c = &self.constants;
        let (p1, p2, p3) = (state[0], state[1], state[2]);
        jac[(0, 0)] = -c.sigma;
        jac[(0, 1)] = c.sigma;
        jac[(0, 2)] = 0.0;
        jac[(1, 0)] = c.rho - p3;
        jac[(1, 1)] = -1.0;
        jac[(1, 2)] = -p1;
        jac[(2, 0)] = p2;
        jac[(2, 1)] = p1;
        jac[(2, 2)] = -c.beta;
    }
}

/// Lorenz right-hand side with input validation.
pub fn lorenz_rhs(state: &[f64; 3], constants: &LorenzConstants) -> Result<[f64; 3]> {
    for (i, v) in state.iter().enumerate() {
        if !v.is_finite() {
            return Err(Error::InvalidState { index: i });
        }
    }
    let model = Lorenz {
        constants: *constants,
    };
    let mut out = [0.0; 3];
    model.rhs(state, &mut out);
    Ok(out)
}

/// Integrates ẏ = f(y) with the explicit Euler scheme.
///
/// Returns an `(n_steps + 1) × state_dim` trajectory whose first row is
/// `y0`. Fails with [`Error::Divergence`] if any step produces a non-finite
/// component.
pub fn euler_integrate(
    model: &dyn PhysicsModel,
    y0: &[f64],
    dt: f64,
    n_steps: usize,
) -> Result<DMatrix<f64>> {
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "dt must be positive, got {dt}"
        )));
    }
    let n_y = model.state_dim();
    if y0.len() != n_y {
        return Err(Error::Dimension(format!(
            "y0 has length {}, model state dimension is {n_y}",
            y0.len()
        )));
    }
    for (i, v) in y0.iter().enumerate() {
        if !v.is_finite() {
            return Err(Error::InvalidState { index: i });
        }
    }

    let mut traj = DMatrix::zeros(n_steps + 1, n_y);
    let mut y = y0.to_vec();
    let mut f = vec![0.0; n_y];
    for j in 0..n_y {
        traj[(0, j)] = y[j];
    }
    for step in 0..n_steps {
        model.rhs(&y, &mut f);
        for j in 0..n_y {
            y[j] += dt * f[j];
            if !y[j].is_finite() {
                return Err(Error::Divergence { step: step + 1 });
            }
            traj[(step + 1, j)] = y[j];
        }
    }
    Ok(traj)
}

/// Forward-Euler physics residual of a trajectory.
///
/// Row n of the result is `(y(n+1) − y(n))/dt − f(y(n))`, so an exactly
/// Euler-generated trajectory gives a residual at rounding level. The last
/// trajectory row has no residual row.
pub fn physics_residual(
    y_hat: &DMatrix<f64>,
    dt: f64,
    model: &dyn PhysicsModel,
) -> Result<DMatrix<f64>> {
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "dt must be positive, got {dt}"
        )));
    }
    let m = y_hat.nrows();
    if m < 2 {
        return Err(Error::InsufficientLength { needed: 2, got: m });
    }
    let n_y = model.state_dim();
    if y_hat.ncols() != n_y {
        return Err(Error::Dimension(format!(
            "trajectory has {} columns, model state dimension is {n_y}",
            y_hat.ncols()
        )));
    }

    let mut res = DMatrix::zeros(m - 1, n_y);
    let mut row = vec![0.0; n_y];
    let mut f = vec![0.0; n_y];
    for n in 0..m - 1 {
        for j in 0..n_y {
            row[j] = y_hat[(n, j)];
        }
        model.rhs(&row, &mut f);
        for j in 0..n_y {
            res[(n, j)] = (y_hat[(n + 1, j)] - y_hat[(n, j)]) / dt - f[j];
        }
    }
    Ok(res)
}

/// Convenience wrapper: rhs as an owned vector.
pub fn rhs_vec(model: &dyn PhysicsModel, state: &[f64]) -> DVector<f64> {
    let mut out = DVector::zeros(model.state_dim());
    model.rhs(state, out.as_mut_slice());
    out
}
