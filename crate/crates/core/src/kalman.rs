//! Periodic Kalman filter, periodic Riccati difference equation and the
//! periodic Lyapunov equation for the stationary state covariance.

use nalgebra::LU;

use crate::error::{Error, Result};
use crate::linalg::{self, Flops, Mat, SpdFactor, Vector};
use crate::model::PeriodicModel;

pub const DEFAULT_STATIONARITY_MARGIN: f64 = 1e-9;

/// Largest state dimension for which the Lyapunov equation is solved by the
/// Kronecker lift; larger models use Smith doubling.
pub const LIFT_MAX_DIM: usize = 32;

/// Predicted state and its error covariance at time `t`.
#[derive(Clone, Debug, PartialEq)]
pub struct KalmanState {
    pub t: usize,
    pub xhat: Vector,
    pub sigma: Mat,
}

impl KalmanState {
    pub fn new(xhat: Vector, sigma: Mat) -> Self {
        Self { t: 1, xhat, sigma }
    }
}

#[derive(Clone, Debug)]
pub struct StepResult {
    pub yhat: Vector,
    pub innovation: Vector,
    pub omega: Mat,
    /// Unnormalized gain `K_t = F_t Σ_t H_t`.
    pub gain: Mat,
    pub next: KalmanState,
}

/// Covariance part of one filter step.
#[derive(Clone, Debug)]
pub(crate) struct RiccatiStep {
    pub omega: Mat,
    pub gain: Mat,
    pub factor: SpdFactor,
    pub next: Mat,
}

/// `Ω = HᵀΣH + R`, `K = FΣH`, `Σ' = FΣFᵀ − KΩ⁻¹Kᵀ + GQGᵀ`.
pub(crate) fn riccati_step(
    model: &PeriodicModel,
    sigma: &Mat,
    t: usize,
    fl: &Flops,
) -> Result<RiccatiStep> {
    let s = model.season(t);
    let (f, g, h) = (&model.f[s], &model.g[s], &model.h[s]);
    let sh = linalg::mul(fl, sigma, h);
    let omega = linalg::symmetrize(fl, &linalg::add(fl, &linalg::tr_mul(fl, h, &sh), &model.r[s]));
    let factor = SpdFactor::new(fl, &omega, t)?;
    let gain = linalg::mul(fl, f, &sh);
    let fsf = linalg::mul_tr(fl, &linalg::mul(fl, f, sigma), f);
    let gain_n = factor.right_solve(fl, &gain);
    let kok = linalg::mul_tr(fl, &gain_n, &gain);
    let gqg = linalg::mul_tr(fl, &linalg::mul(fl, g, &model.q[s]), g);
    let next = linalg::symmetrize(fl, &linalg::add(fl, &linalg::sub(fl, &fsf, &kok), &gqg));
    Ok(RiccatiStep {
        omega,
        gain,
        factor,
        next,
    })
}

/// State recursion shared by every covariance engine:
/// `ŷ = Hᵀx̂`, `e = y − ŷ`, `x̂' = Fx̂ + KΩ⁻¹e`, which equals
/// `(F − KΩ⁻¹Hᵀ)x̂ + KΩ⁻¹y`. Returns `(ŷ, e, x̂')`.
pub(crate) fn state_update(
    model: &PeriodicModel,
    t: usize,
    xhat: &Vector,
    y: &Vector,
    gain: &Mat,
    factor: &SpdFactor,
    fl: &Flops,
) -> (Vector, Vector, Vector) {
    let s = model.season(t);
    let yhat = linalg::tr_mul_vec(fl, &model.h[s], xhat);
    let innovation = y - &yhat;
    let w = factor.solve_vec(fl, &innovation);
    let next = linalg::mul_vec(fl, &model.f[s], xhat) + linalg::mul_vec(fl, gain, &w);
    (yhat, innovation, next)
}

/// One step of the periodic Kalman filter.
pub fn kf_step(model: &PeriodicModel, state: &KalmanState, y: &Vector) -> Result<StepResult> {
    let fl = Flops::new();
    let step = riccati_step(model, &state.sigma, state.t, &fl)?;
    let (yhat, innovation, xhat) =
        state_update(model, state.t, &state.xhat, y, &step.gain, &step.factor, &fl);
    Ok(StepResult {
        yhat,
        innovation,
        omega: step.omega,
        gain: step.gain,
        next: KalmanState {
            t: state.t + 1,
            xhat,
            sigma: step.next,
        },
    })
}

/// Covariance-only step `Σ_t ↦ Σ_{t+1}` of the periodic Riccati equation.
pub fn prde_step(model: &PeriodicModel, sigma: &Mat, t: usize) -> Result<Mat> {
    Ok(riccati_step(model, sigma, t, &Flops::new())?.next)
}

#[derive(Clone, Copy, Debug)]
pub struct DpreOptions {
    pub tol: f64,
    pub max_periods: usize,
}

impl Default for DpreOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_periods: 100_000,
        }
    }
}

/// Iterate the Riccati recursion period by period until the seasonal
/// covariances settle, returning the periodic limit `P_1..P_S`.
///
/// Starts from `W₁` when the model carries one, else from the stationary
/// covariance when it exists, else from zero.
pub fn dpre_fixed_point(model: &PeriodicModel, opts: DpreOptions) -> Result<Vec<Mat>> {
    let r = model.state_dim;
    let mut sigma = match &model.w1 {
        Some(w1) => w1.clone(),
        None if is_periodically_stationary(model, DEFAULT_STATIONARITY_MARGIN).stationary => {
            solve_dple(model)?.swap_remove(0)
        }
        None => Mat::zeros(r, r),
    };
    let mut prev: Option<Vec<Mat>> = None;
    let mut residual = f64::INFINITY;
    for _ in 0..opts.max_periods {
        let mut current = Vec::with_capacity(model.period);
        for s in 1..=model.period {
            current.push(sigma.clone());
            sigma = prde_step(model, &sigma, s)?;
        }
        if let Some(prev) = &prev {
            residual = current
                .iter()
                .zip(prev)
                .map(|(a, b)| linalg::fro(&(a - b)) / (1.0 + linalg::fro(a)))
                .fold(0.0, f64::max);
            if residual <= opts.tol {
                return Ok(current);
            }
        }
        prev = Some(current);
    }
    Err(Error::NonConvergence {
        periods: opts.max_periods,
        residual,
    })
}

/// Largest relative residual of the periodic Riccati equation,
/// `‖P_{s+1} − ρ_s(P_s)‖ / (1 + ‖P_{s+1}‖)`, over all seasons.
pub fn dpre_residual(model: &PeriodicModel, p: &[Mat]) -> Result<f64> {
    let mut worst = 0.0f64;
    for s in 0..model.period {
        let next = prde_step(model, &p[s], s + 1)?;
        let target = &p[(s + 1) % model.period];
        worst = worst.max(linalg::fro(&(&next - target)) / (1.0 + linalg::fro(target)));
    }
    Ok(worst)
}

/// `Φ = F_S F_{S−1} ⋯ F_1`.
pub fn monodromy(model: &PeriodicModel) -> Mat {
    let r = model.state_dim;
    model
        .f
        .iter()
        .fold(Mat::identity(r, r), |acc, f| f * acc)
}

pub fn spectral_radius(a: &Mat) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    a.complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Stationarity {
    pub stationary: bool,
    pub radius: f64,
}

/// Stationary iff the monodromy spectral radius is below `1 − margin`.
pub fn is_periodically_stationary(model: &PeriodicModel, margin: f64) -> Stationarity {
    let radius = spectral_radius(&monodromy(model));
    Stationarity {
        stationary: radius < 1.0 - margin,
        radius,
    }
}

/// State covariance accumulated over one period from a zero start,
/// `Σ_k (Π_{j<k} F_{S−j}) G_{S−k} Q_{S−k} G_{S−k}ᵀ (Π_{j<k} F_{S−j})ᵀ`.
pub fn period_noise(model: &PeriodicModel) -> Mat {
    let r = model.state_dim;
    (0..model.period).fold(Mat::zeros(r, r), |acc, s| {
        linalg::sym(&(&model.f[s] * acc * model.f[s].transpose() + model.process_cov(s)))
    })
}

fn lift_solve(phi: &Mat, qbar: &Mat) -> Option<Mat> {
    let r = phi.nrows();
    let n = r * r;
    let a = Mat::identity(n, n) - phi.kronecker(phi);
    let b = Vector::from_column_slice(qbar.as_slice());
    let x = LU::new(a).solve(&b)?;
    Some(Mat::from_column_slice(r, r, x.as_slice()))
}

fn smith_doubling(phi: &Mat, qbar: &Mat) -> Mat {
    let mut x = qbar.clone();
    let mut a = phi.clone();
    for _ in 0..128 {
        let incr = &a * &x * a.transpose();
        x += &incr;
        if linalg::fro(&incr) <= f64::EPSILON * 1e-2 * linalg::fro(&x) {
            break;
        }
        a = &a * &a;
    }
    x
}

/// Relative residual `‖W − ΦWΦᵀ − Q̄‖ / max(‖W‖, ‖Q̄‖)` of the lifted equation.
pub fn dple_lift_residual(model: &PeriodicModel, w1: &Mat) -> f64 {
    let phi = monodromy(model);
    let qbar = period_noise(model);
    let res = w1 - &phi * w1 * phi.transpose() - &qbar;
    let scale = linalg::fro(w1).max(linalg::fro(&qbar));
    if scale == 0.0 {
        0.0
    } else {
        linalg::fro(&res) / scale
    }
}

/// Relative residuals of `W_{s+1} = F_s W_s F_sᵀ + G_s Q_s G_sᵀ` for every
/// season, including the wrap from season `S` back to season 1.
pub fn dple_propagation_residual(model: &PeriodicModel, w: &[Mat]) -> f64 {
    (0..model.period)
        .map(|s| {
            let next = &model.f[s] * &w[s] * model.f[s].transpose() + model.process_cov(s);
            let target = &w[(s + 1) % model.period];
            linalg::fro(&(&next - target)) / (1.0 + linalg::fro(target))
        })
        .fold(0.0, f64::max)
}

/// Stationary periodic covariances `W_1..W_S` of the state.
pub fn solve_dple(model: &PeriodicModel) -> Result<Vec<Mat>> {
    let st = is_periodically_stationary(model, DEFAULT_STATIONARITY_MARGIN);
    if !st.stationary {
        return Err(Error::NotStationary { radius: st.radius });
    }
    let phi = monodromy(model);
    let qbar = period_noise(model);
    let w1 = if model.state_dim <= LIFT_MAX_DIM {
        lift_solve(&phi, &qbar).ok_or(Error::SingularLift {
            residual: f64::INFINITY,
        })?
    } else {
        smith_doubling(&phi, &qbar)
    };
    let w1 = linalg::sym(&w1);
    let residual = dple_lift_residual(model, &w1);
    if residual.is_nan() || residual > 1e-10 {
        return Err(Error::SingularLift { residual });
    }
    let mut w = Vec::with_capacity(model.period);
    w.push(w1);
    for s in 0..model.period - 1 {
        let prev = &w[s];
        let next = &model.f[s] * prev * model.f[s].transpose() + model.process_cov(s);
        w.push(linalg::sym(&next));
    }
    Ok(w)
}
