//! Damped least-squares core (Levenberg-Marquardt with multiplicative
//! damping control).

use nalgebra::{DMatrix, DVector};

use super::FitError;

/// Iteration controls. The damping schedule is fixed: halve on an accepted
/// step, quadruple on a rejected one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub max_iter: usize,
    /// First-order optimality tolerance, scale-free: converged when the
    /// largest cosine between the residual vector and any Jacobian column
    /// drops below this (the normal equations hold to that precision).
    pub grad_tol: f64,
    /// Starting damping; near-zero makes the first step close to pure
    /// Gauss-Newton, so linear problems land in one accepted step.
    pub initial_damping: f64,
    /// Scale the covariance by reduced chi-square (leave off when residuals
    /// are already divided by known measurement sigmas).
    pub scale_covariance: bool,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            max_iter: 200,
            grad_tol: 1e-8,
            initial_damping: 1e-8,
            scale_covariance: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub params: Vec<f64>,
    /// Covariance of the parameters from the Gauss-Newton approximation at
    /// the optimum (optionally scaled by reduced chi-square).
    pub covariance: DMatrix<f64>,
    pub chi2: f64,
    pub reduced_chi2: f64,
    pub iterations: usize,
    /// False when the iteration budget ran out before any convergence test
    /// fired; the best parameters found are still returned.
    pub converged: bool,
}

impl FitResult {
    pub fn sigma(&self, i: usize) -> f64 {
        self.covariance[(i, i)].max(0.0).sqrt()
    }
}

const DAMPING_CAP: f64 = 1e12;

/// An accepted step that shrinks chi2 by no more than this fraction means
/// the optimum is resolved as far as floating point allows.
const FTOL: f64 = 1e-12;

fn jacobian<F>(model: &F, params: &[f64], m: usize) -> Result<DMatrix<f64>, FitError>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    let n = params.len();
    let mut jac = DMatrix::zeros(m, n);
    let mut p = params.to_vec();
    for j in 0..n {
        let h = f64::EPSILON.cbrt() * p[j].abs().max(1.0);
        let saved = p[j];
        p[j] = saved + h;
        let plus = model(&p);
        p[j] = saved - h;
        let minus = model(&p);
        p[j] = saved;
        if plus.len() != m || minus.len() != m {
            return Err(FitError::EmptyResiduals);
        }
        for i in 0..m {
            jac[(i, j)] = (plus[i] - minus[i]) / (2.0 * h);
        }
    }
    if jac.iter().any(|v| !v.is_finite()) {
        return Err(FitError::NonFinite {
            context: "finite-difference Jacobian",
        });
    }
    Ok(jac)
}

fn chi2_of(r: &[f64]) -> f64 {
    r.iter().map(|v| v * v).sum()
}

/// Minimise |residuals(p)|^2 from `init`.
///
/// `model` returns the residual vector (data minus model). Non-convergence
/// within the iteration budget is reported through [`FitResult::converged`],
/// not as an error; singular normal equations at the optimum are.
pub fn solve_damped_lsq<F>(model: F, init: &[f64], opts: &FitOptions) -> Result<FitResult, FitError>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    if init.is_empty() {
        return Err(FitError::EmptyParams);
    }
    if init.iter().any(|v| !v.is_finite()) {
        return Err(FitError::NonFinite {
            context: "initial parameters",
        });
    }
    let mut p = init.to_vec();
    let mut r = model(&p);
    let m = r.len();
    if m == 0 {
        return Err(FitError::EmptyResiduals);
    }
    if r.iter().any(|v| !v.is_finite()) {
        return Err(FitError::NonFinite {
            context: "residuals at the initial point",
        });
    }
    let n = p.len();
    let mut chi2 = chi2_of(&r);
    // Exact-data fits drive chi2 to round-off, where the relative gradient
    // loses meaning; below this floor the fit counts as converged.
    let chi2_floor = (16.0 * f64::EPSILON).powi(2) * (chi2 + 1.0);
    let mut damping = opts.initial_damping;
    let mut converged = false;
    let mut iterations = 0;

    for iter in 1..=opts.max_iter {
        iterations = iter;
        if chi2 <= chi2_floor {
            converged = true;
            break;
        }
        let jac = jacobian(&model, &p, m)?;
        let grad = jac.transpose() * DVector::from_column_slice(&r);
        // At a stationary point the residual is orthogonal to every Jacobian
        // column, so this cosine measures first-order optimality without any
        // dependence on the scales of the data or the parameters.
        let r_norm = chi2.sqrt();
        let cos_max = (0..n)
            .map(|i| {
                let denom = r_norm * jac.column(i).norm();
                if denom > 0.0 {
                    grad[i].abs() / denom
                } else {
                    0.0
                }
            })
            .fold(0.0f64, f64::max);
        if cos_max <= opts.grad_tol {
            converged = true;
            break;
        }
        let normal = jac.transpose() * &jac;

        // Inner trial loop: grow the damping until a step lowers chi2.
        let mut accepted = false;
        while damping <= DAMPING_CAP {
            let mut lhs = normal.clone();
            for i in 0..n {
                // Marquardt scaling keeps the damping dimensionless; the
                // floor covers parameters the model momentarily ignores.
                let d = normal[(i, i)];
                lhs[(i, i)] = d + damping * d.max(f64::EPSILON);
            }
            let step = match lhs.clone().cholesky() {
                Some(ch) => ch.solve(&grad),
                None => {
                    damping = (damping * 4.0).max(1e-8);
                    continue;
                }
            };
            // lhs * step = J^T r with r = data - model, so the damped
            // Gauss-Newton update moves against the solved direction.
            let p_try: Vec<f64> = (0..n).map(|i| p[i] - step[i]).collect();
            let r_try = model(&p_try);
            if r_try.len() != m {
                return Err(FitError::EmptyResiduals);
            }
            let chi2_try = if r_try.iter().all(|v| v.is_finite()) {
                chi2_of(&r_try)
            } else {
                f64::INFINITY
            };
            if chi2_try < chi2 {
                let tiny_gain = chi2 - chi2_try <= FTOL * chi2;
                p = p_try;
                r = r_try;
                chi2 = chi2_try;
                damping *= 0.5;
                accepted = true;
                converged = chi2 <= chi2_floor || tiny_gain;
                break;
            }
            damping = (damping * 4.0).max(1e-8);
        }
        if !accepted {
            // Every representable damped step is uphill, including the
            // near-pure-gradient ones at the damping cap: the optimum is
            // resolved to machine precision. The cosine test alone cannot
            // certify this once the residual is dominated by rounding noise.
            converged = true;
            break;
        }
        if converged {
            break;
        }
    }

    let jac = jacobian(&model, &p, m)?;
    let normal = jac.transpose() * &jac;
    let inv = match normal.clone().cholesky() {
        Some(ch) => ch.inverse(),
        None => {
            let svd = normal.svd(false, false);
            let max_sv = svd.singular_values.iter().cloned().fold(0.0f64, f64::max);
            let rank = svd
                .singular_values
                .iter()
                .filter(|&&s| s > max_sv * (m.max(n) as f64) * f64::EPSILON)
                .count();
            return Err(FitError::RankDeficient { rank, params: n });
        }
    };
    let dof = m.saturating_sub(n).max(1);
    let reduced_chi2 = chi2 / dof as f64;
    let covariance = if opts.scale_covariance {
        inv * reduced_chi2
    } else {
        inv
    };

    Ok(FitResult {
        params: p,
        covariance,
        chi2,
        reduced_chi2,
        iterations,
        converged,
    })
}
