//! Least-squares machinery shared by the spectral, ESR and calibration fits.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct LmOptions {
    pub max_iterations: usize,
    /// Converged when the largest relative parameter step drops below this.
    pub step_tolerance: f64,
    pub initial_damping: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        Self {
            max_iterations: 200,
            step_tolerance: 1e-10,
            initial_damping: 1e-3,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LmOutcome {
    pub params: Vec<f64>,
    /// (JᵀJ)⁻¹ at the solution, unscaled. `None` when singular.
    pub inverse_hessian: Option<DMatrix<f64>>,
    pub cost: f64,
    pub residual_count: usize,
    pub iterations: usize,
    pub converged: bool,
    pub message: String,
}

impl LmOutcome {
    /// Standard errors from the covariance scaled by the reduced residual sum of squares.
    pub fn scaled_errors(&self) -> Vec<f64> {
        let dof = self.residual_count.saturating_sub(self.params.len()).max(1) as f64;
        let scale = self.cost / dof;
        match &self.inverse_hessian {
            Some(cov) => (0..self.params.len())
                .map(|i| (cov[(i, i)] * scale).max(0.0).sqrt())
                .collect(),
            None => vec![f64::NAN; self.params.len()],
        }
    }
}

/// A least-squares problem with an analytic Jacobian.
pub trait Residuals {
    fn len(&self) -> usize;
    fn residuals(&self, params: &[f64], out: &mut [f64]);
    /// Row-major Jacobian of the residuals, `out[(i, j)] = ∂r_i/∂p_j`.
    fn jacobian(&self, params: &[f64], out: &mut DMatrix<f64>);
    /// Parameters outside the feasible set are rejected as trial steps.
    fn feasible(&self, _params: &[f64]) -> bool {
        true
    }
    /// Magnitude below which parameter `i` is judged by absolute rather than relative step.
    fn param_scale(&self, _i: usize) -> f64 {
        0.0
    }
}

/// Levenberg–Marquardt with Marquardt diagonal scaling.
pub fn levenberg_marquardt<P: Residuals>(problem: &P, start: &[f64], opts: LmOptions) -> LmOutcome {
    let n = problem.len();
    let m = start.len();
    let mut x = start.to_vec();
    let mut r = vec![0.0; n];
    let mut jac = DMatrix::zeros(n, m);
    let mut trial = vec![0.0; m];
    let mut r_trial = vec![0.0; n];

    problem.residuals(&x, &mut r);
    let mut cost = sum_sq(&r);
    let mut lambda = opts.initial_damping;
    let mut converged = false;
    let mut message = String::from("iteration limit reached");
    let mut iterations = 0;

    if !cost.is_finite() {
        return LmOutcome {
            params: x,
            inverse_hessian: None,
            cost,
            residual_count: n,
            iterations: 0,
            converged: false,
            message: "non-finite residuals at the starting point".into(),
        };
    }

    'outer: while iterations < opts.max_iterations {
        iterations += 1;
        if cost == 0.0 {
            converged = true;
            message = "exact fit".into();
            break;
        }
        problem.jacobian(&x, &mut jac);
        let jt = jac.transpose();
        let hess = &jt * &jac;
        let grad = &jt * DVector::from_column_slice(&r);

        loop {
            let mut damped = hess.clone();
            for i in 0..m {
                let d = hess[(i, i)].max(1e-300);
                damped[(i, i)] += lambda * d;
            }
            let Some(chol) = damped.cholesky() else {
                lambda *= 10.0;
                if lambda > 1e20 {
                    message = "damped normal matrix not positive definite".into();
                    break 'outer;
                }
                continue;
            };
            let step = chol.solve(&(-&grad));
            let mut rel_step: f64 = 0.0;
            for i in 0..m {
                trial[i] = x[i] + step[i];
                rel_step = rel_step.max(step[i].abs() / x[i].abs().max(problem.param_scale(i)).max(1e-300));
            }
            let accepted = if problem.feasible(&trial) {
                problem.residuals(&trial, &mut r_trial);
                let c = sum_sq(&r_trial);
                if c.is_finite() && c < cost {
                    Some(c)
                } else {
                    // No descent left within rounding: this is the minimum.
                    if c.is_finite() && rel_step < opts.step_tolerance {
                        converged = true;
                        message = "step below tolerance".into();
                        break 'outer;
                    }
                    if c.is_finite() && (c - cost).abs() <= 1e-14 * cost {
                        converged = true;
                        message = "cost stationary".into();
                        break 'outer;
                    }
                    None
                }
            } else {
                None
            };
            match accepted {
                Some(c) => {
                    x.copy_from_slice(&trial);
                    std::mem::swap(&mut r, &mut r_trial);
                    cost = c;
                    lambda = (lambda / 10.0).max(1e-15);
                    if rel_step < opts.step_tolerance {
                        converged = true;
                        message = "step below tolerance".into();
                        break 'outer;
                    }
                    break;
                }
                None => {
                    lambda *= 10.0;
                    if lambda > 1e20 {
                        message = "damping exhausted without descent".into();
                        break 'outer;
                    }
                }
            }
        }
    }

    problem.jacobian(&x, &mut jac);
    let hess = jac.transpose() * &jac;
    LmOutcome {
        params: x,
        inverse_hessian: hess.try_inverse(),
        cost,
        residual_count: n,
        iterations,
        converged,
        message,
    }
}

fn sum_sq(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

/// Result of fitting `y = intercept + slope·x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineFit {
    pub intercept: f64,
    pub slope: f64,
    pub intercept_sigma: f64,
    pub slope_sigma: f64,
    /// Covariance between intercept and slope.
    pub covariance: f64,
    pub chi2: f64,
    pub dof: usize,
}

impl LineFit {
    pub fn eval(&self, x: f64) -> f64 {
        self.intercept + self.slope * x
    }

    pub fn reduced_chi2(&self) -> f64 {
        if self.dof == 0 {
            0.0
        } else {
            self.chi2 / self.dof as f64
        }
    }
}

/// Straight-line least squares.
///
/// With `sigmas`, points are weighted by 1/σ² and the covariance is the absolute
/// one inflated by the reduced χ² when that exceeds one. Without, the fit is
/// unweighted and the covariance is scaled by the residual variance.
pub fn fit_line(x: &[f64], y: &[f64], sigmas: Option<&[f64]>) -> Result<LineFit> {
    if x.len() != y.len() || sigmas.is_some_and(|s| s.len() != x.len()) {
        return Err(Error::InvalidConfig("line fit inputs differ in length".into()));
    }
    if x.len() < 2 {
        return Err(Error::Rank("line fit needs at least two points".into()));
    }
    let weights: Vec<f64> = match sigmas {
        Some(s) => {
            if s.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
                return Err(Error::InvalidConfig("line fit sigmas must be positive".into()));
            }
            s.iter().map(|v| 1.0 / (v * v)).collect()
        }
        None => vec![1.0; x.len()],
    };
    let sw: f64 = weights.iter().sum();
    let xm = weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() / sw;
    let ym = weights.iter().zip(y).map(|(w, v)| w * v).sum::<f64>() / sw;
    let sxx: f64 = weights.iter().zip(x).map(|(w, v)| w * (v - xm).powi(2)).sum();
    let scale_x = x.iter().map(|v| v.abs()).fold(0.0, f64::max).max(1e-300);
    if !(sxx > 1e-24 * sw * scale_x * scale_x) {
        return Err(Error::Rank("regressor has no spread".into()));
    }
    let sxy: f64 = weights
        .iter()
        .zip(x.iter().zip(y))
        .map(|(w, (a, b))| w * (a - xm) * (b - ym))
        .sum();
    let slope = sxy / sxx;
    let intercept = ym - slope * xm;
    let chi2: f64 = weights
        .iter()
        .zip(x.iter().zip(y))
        .map(|(w, (a, b))| w * (b - intercept - slope * a).powi(2))
        .sum();
    let dof = x.len() - 2;
    let var_scale = match sigmas {
        Some(_) => {
            if dof > 0 {
                (chi2 / dof as f64).max(1.0)
            } else {
                1.0
            }
        }
        None => {
            if dof > 0 {
                chi2 / dof as f64
            } else {
                0.0
            }
        }
    };
    let slope_var = var_scale / sxx;
    let intercept_var = var_scale * (1.0 / sw + xm * xm / sxx);
    let covariance = -var_scale * xm / sxx;
    Ok(LineFit {
        intercept,
        slope,
        intercept_sigma: intercept_var.sqrt(),
        slope_sigma: slope_var.sqrt(),
        covariance,
        chi2,
        dof,
    })
}

/// Arithmetic mean and standard error of the mean.
pub fn mean_and_standard_error(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, f64::NAN);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Sample mean and (n−1) standard deviation.
pub fn mean_and_std(values: &[f64]) -> (f64, f64) {
    let (m, se) = mean_and_standard_error(values);
    (m, se * (values.len() as f64).sqrt())
}
