//! Periodic Chandrasekhar-type recursions.
//!
//! Instead of propagating the full `r×r` covariance `Σ_t`, these recursions
//! propagate the S-lagged increment `Δ_SΣ_t = Σ_{t+S} − Σ_t` in factored
//! form `Y_t M_t Y_tᵀ`, with `Y_t` of shape `r×α` and `M_t` of shape `α×α`.
//! Gains and innovation covariances are carried forward one period at a
//! time:
//!
//! ```text
//! Ω_{t+S} = Ω_t + H_tᵀ Y_t M_t Y_tᵀ H_t
//! K_{t+S} = K_t + F_t Y_t M_t Y_tᵀ H_t
//! ```
//!
//! and `(Y, M)` are advanced by one of three variants:
//!
//! * [`Variant::Alg31`]: `Y_{t+1} = (F_t − K_{t+S}Ω_{t+S}⁻¹H_tᵀ) Y_t`,
//!   `M_{t+1} = M_t + M_t Y_tᵀ H_t Ω_t⁻¹ H_tᵀ Y_t M_t`
//! * [`Variant::Alg32`]: `Y_{t+1} = (F_t − K_tΩ_t⁻¹H_tᵀ) Y_t`,
//!   `M_{t+1} = M_t − M_t Y_tᵀ H_t Ω_{t+S}⁻¹ H_tᵀ Y_t M_t`
//! * [`Variant::MInverse`]: the `Alg31` update of `Y` with the linear
//!   recursion `M_{t+1}⁻¹ = M_t⁻¹ − Y_tᵀ H_t Ω_{t+S}⁻¹ H_tᵀ Y_t`, which is the
//!   inverse of the `Alg31` update of `M`.
//!
//! The `(K, Ω)` pairs for the last `S` times live in a ring buffer indexed
//! by season. The starting pairs and `Δ_SΣ_1` come from `S` steps of the
//! Riccati recursion, see [`build_prelude`].

use std::fmt;

use nalgebra::SymmetricEigen;

use crate::error::{Error, Result};
use crate::kalman::{is_periodically_stationary, riccati_step, DEFAULT_STATIONARITY_MARGIN};
use crate::linalg::{self, Flops, Mat, SpdFactor};
use crate::model::PeriodicModel;

/// Residual tolerance of the gain-form and steady-form constructions.
pub const FACTOR_CHECK_TOL: f64 = 1e-8;
/// Residual tolerance accepted by [`chand_init`].
pub const INIT_CHECK_TOL: f64 = 1e-9;
/// Default eigenvalue cut-off of [`factor_eigen`].
pub const EIGEN_REL_TOL: f64 = 1e-12;
/// Smallest admissible singular value ratio of `M` for the inverse form.
pub const M_SINGULAR_TOL: f64 = 1e-12;

/// Quantities from the first period of the Riccati recursion.
#[derive(Clone, Debug)]
pub struct Prelude {
    /// `Σ_1..Σ_S`.
    pub sigma: Vec<Mat>,
    /// `K_1..K_S` (unnormalized, `F_sΣ_sH_s`).
    pub gain: Vec<Mat>,
    /// `Ω_s = H_sᵀΣ_sH_s + R_s`.
    pub omega: Vec<Mat>,
    /// `Δ_SΣ_1 = F_SΣ_SF_Sᵀ − K_SΩ_S⁻¹K_Sᵀ + G_SQ_SG_Sᵀ − Σ_1`.
    pub delta_sigma1: Mat,
    /// `Σ_{S+1}`.
    pub sigma_next: Mat,
    factors: Vec<SpdFactor>,
}

impl Prelude {
    pub fn period(&self) -> usize {
        self.sigma.len()
    }

    /// `Ω_s⁻¹` for 1-based season `s`.
    pub fn omega_inv(&self, s: usize) -> Mat {
        let m = self.omega[s - 1].nrows();
        self.factors[s - 1].solve(&Flops::new(), &Mat::identity(m, m))
    }
}

pub(crate) fn build_prelude_counted(
    model: &PeriodicModel,
    sigma1: &Mat,
    fl: &Flops,
) -> Result<Prelude> {
    let n = model.period;
    let mut sigma = Vec::with_capacity(n);
    let mut gain = Vec::with_capacity(n);
    let mut omega = Vec::with_capacity(n);
    let mut factors = Vec::with_capacity(n);
    let mut current = linalg::sym(sigma1);
    for t in 1..=n {
        let step = riccati_step(model, &current, t, fl)?;
        sigma.push(std::mem::replace(&mut current, step.next));
        gain.push(step.gain);
        omega.push(step.omega);
        factors.push(step.factor);
    }
    let delta_sigma1 = linalg::sym(&(&current - &sigma[0]));
    Ok(Prelude {
        sigma,
        gain,
        omega,
        delta_sigma1,
        sigma_next: current,
        factors,
    })
}

/// Run the Riccati recursion over the first period from `Σ_1`.
pub fn build_prelude(model: &PeriodicModel, sigma1: &Mat) -> Result<Prelude> {
    build_prelude_counted(model, sigma1, &Flops::new())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FactorMethod {
    GainForm,
    SteadyForm,
    Eigen,
}

impl fmt::Display for FactorMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FactorMethod::GainForm => "gain-form",
            FactorMethod::SteadyForm => "steady-form",
            FactorMethod::Eigen => "eigen",
        })
    }
}

/// `Δ_SΣ_1 = Y_1 M_1 Y_1ᵀ`.
#[derive(Clone, Debug)]
pub struct Factorization {
    pub y: Mat,
    pub m: Mat,
    pub method: FactorMethod,
}

impl Factorization {
    /// Rank bound `α`.
    pub fn alpha(&self) -> usize {
        self.m.nrows()
    }

    pub fn product(&self) -> Mat {
        &self.y * &self.m * self.y.transpose()
    }

    /// `‖Y M Yᵀ − Δ‖ / (1 + ‖Δ‖)`.
    pub fn residual(&self, delta: &Mat) -> f64 {
        linalg::fro(&(self.product() - delta)) / (1.0 + linalg::fro(delta))
    }

    fn empty(r: usize, method: FactorMethod) -> Self {
        Self {
            y: Mat::zeros(r, 0),
            m: Mat::zeros(0, 0),
            method,
        }
    }

    fn checked(self, delta: &Mat, tol: f64) -> Result<Self> {
        let residual = self.residual(delta);
        if residual <= tol {
            Ok(self)
        } else {
            Err(Error::ResidualTooLarge { residual, tol })
        }
    }
}

/// `L = [K_S, F_SK_{S−1}, …, F_S⋯F_2 K_1]`.
pub fn gain_matrix(model: &PeriodicModel, prelude: &Prelude) -> Mat {
    let s_count = model.period;
    let (r, m) = (model.state_dim, model.output_dim);
    let mut l = Mat::zeros(r, m * s_count);
    let mut prod = Mat::identity(r, r);
    for k in 0..s_count {
        let season = s_count - 1 - k;
        l.view_mut((0, k * m), (r, m))
            .copy_from(&(&prod * &prelude.gain[season]));
        prod = &prod * &model.f[season];
    }
    l
}

/// Gain-form factorization `Y_1 = L`, `M_1 = −blockdiag(Ω_S⁻¹, …, Ω_1⁻¹)`
/// with `α = mS`.
///
/// Valid only when the prelude starts from the stationary covariance `W_1`;
/// any other start is caught by the residual check.
pub fn factor_gain_form(model: &PeriodicModel, prelude: &Prelude) -> Result<Factorization> {
    let st = is_periodically_stationary(model, DEFAULT_STATIONARITY_MARGIN);
    if !st.stationary {
        return Err(Error::NotStationary { radius: st.radius });
    }
    let blocks: Vec<Mat> = (1..=model.period).rev().map(|s| -prelude.omega_inv(s)).collect();
    Factorization {
        y: gain_matrix(model, prelude),
        m: linalg::sym(&linalg::block_diag(&blocks)),
        method: FactorMethod::GainForm,
    }
    .checked(&prelude.delta_sigma1, FACTOR_CHECK_TOL)
}

/// Steady-form factorization `Y_1 = F_S`,
/// `M_1 = Σ_S − W_0 − (Σ_SH_S)Ω_S⁻¹(Σ_SH_S)ᵀ` with `α = r`.
///
/// `w0` is the stationary covariance at season `S`; the prelude must start
/// from `Σ_1 = F_S W_0 F_Sᵀ + G_S Q_S G_Sᵀ`. `M_1` is symmetric but in
/// general indefinite.
pub fn factor_steady_form(
    model: &PeriodicModel,
    prelude: &Prelude,
    w0: &Mat,
) -> Result<Factorization> {
    let last = model.period;
    let sigma_s = &prelude.sigma[last - 1];
    let sh = sigma_s * &model.h[last - 1];
    let corr = &sh * prelude.omega_inv(last) * sh.transpose();
    Factorization {
        y: model.f[last - 1].clone(),
        m: linalg::sym(&(sigma_s - w0 - corr)),
        method: FactorMethod::SteadyForm,
    }
    .checked(&prelude.delta_sigma1, FACTOR_CHECK_TOL)
}

/// Eigen factorization of a symmetric increment, keeping eigenpairs with
/// `|λ| > rel_tol · max|λ|`.
pub fn factor_eigen(delta: &Mat, rel_tol: f64) -> Factorization {
    let r = delta.nrows();
    if delta.iter().all(|&x| x == 0.0) {
        return Factorization::empty(r, FactorMethod::Eigen);
    }
    let eig = SymmetricEigen::new(linalg::sym(delta));
    let top = eig.eigenvalues.amax();
    let keep: Vec<usize> = (0..r)
        .filter(|&i| eig.eigenvalues[i].abs() > rel_tol * top)
        .collect();
    let y = Mat::from_fn(r, keep.len(), |i, j| eig.eigenvectors[(i, keep[j])]);
    let m = Mat::from_diagonal(&nalgebra::DVector::from_iterator(
        keep.len(),
        keep.iter().map(|&i| eig.eigenvalues[i]),
    ));
    Factorization {
        y,
        m,
        method: FactorMethod::Eigen,
    }
}

/// Requested start factorization.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum FactorChoice {
    /// Gain form when `Sm < r`, otherwise steady form, falling back to the
    /// eigen form when the stationary covariances are unavailable or do not
    /// match the prelude.
    #[default]
    Auto,
    GainForm,
    SteadyForm,
    Eigen,
}

impl std::str::FromStr for FactorChoice {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "auto" => Ok(Self::Auto),
            "gain-form" | "gain" => Ok(Self::GainForm),
            "steady-form" | "steady" => Ok(Self::SteadyForm),
            "eigen" => Ok(Self::Eigen),
            other => Err(format!("unknown factorization `{other}`")),
        }
    }
}

/// The increment counts as exactly zero below this multiple of `‖Σ_{S+1}‖`.
const ZERO_INCREMENT_REL: f64 = 1e-14;

/// Pick a factorization of `Δ_SΣ_1`. `stationary` holds the stationary
/// covariances `W_1..W_S` when the model is periodically stationary.
pub fn factorize(
    model: &PeriodicModel,
    prelude: &Prelude,
    stationary: Option<&[Mat]>,
    choice: FactorChoice,
) -> Result<Factorization> {
    let r = model.state_dim;
    let w0 = || -> Result<&Mat> {
        let w = stationary.ok_or_else(|| {
            let st = is_periodically_stationary(model, DEFAULT_STATIONARITY_MARGIN);
            Error::NotStationary { radius: st.radius }
        })?;
        Ok(&w[model.period - 1])
    };
    match choice {
        FactorChoice::GainForm => factor_gain_form(model, prelude),
        FactorChoice::SteadyForm => factor_steady_form(model, prelude, w0()?),
        FactorChoice::Eigen => Ok(factor_eigen(&prelude.delta_sigma1, EIGEN_REL_TOL)),
        FactorChoice::Auto => {
            let delta = &prelude.delta_sigma1;
            if linalg::fro(delta) <= ZERO_INCREMENT_REL * linalg::fro(&prelude.sigma_next) {
                return Ok(Factorization::empty(r, FactorMethod::Eigen));
            }
            if let Some(w) = stationary {
                let attempt = if model.period * model.output_dim < r {
                    factor_gain_form(model, prelude)
                } else {
                    factor_steady_form(model, prelude, &w[model.period - 1])
                };
                if let Ok(f) = attempt {
                    return Ok(f);
                }
            }
            Ok(factor_eigen(delta, EIGEN_REL_TOL))
        }
    }
}

/// How `M` is stored in a [`ChandrasekharState`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MForm {
    Direct,
    Inverse,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Variant {
    Alg31,
    Alg32,
    MInverse,
}

#[derive(Clone, Debug)]
struct RingEntry {
    gain: Mat,
    omega: Mat,
    factor: SpdFactor,
}

/// Running state of the recursions at time `t`.
#[derive(Clone, Debug)]
pub struct ChandrasekharState {
    pub t: usize,
    pub y: Mat,
    /// `M_t`, or `M_t⁻¹` when `m_form` is [`MForm::Inverse`].
    pub m: Mat,
    pub m_form: MForm,
    /// `(K, Ω)` for times `t..t+S−1`, slot `i` holding season `i + 1`.
    ring: Vec<RingEntry>,
}

impl ChandrasekharState {
    pub fn alpha(&self) -> usize {
        self.m.nrows()
    }

    pub fn period(&self) -> usize {
        self.ring.len()
    }

    fn slot(&self, t: usize) -> usize {
        (t - 1) % self.ring.len()
    }

    /// `K_t` for the current time.
    pub fn gain(&self) -> &Mat {
        &self.ring[self.slot(self.t)].gain
    }

    /// `Ω_t` for the current time.
    pub fn omega(&self) -> &Mat {
        &self.ring[self.slot(self.t)].omega
    }

    /// `(K, Ω)` stored for time `t ∈ [self.t, self.t + S)`.
    pub fn pair_at(&self, t: usize) -> (&Mat, &Mat) {
        debug_assert!(t >= self.t && t < self.t + self.period());
        let e = &self.ring[self.slot(t)];
        (&e.gain, &e.omega)
    }

    pub(crate) fn factor_at(&self, t: usize) -> &SpdFactor {
        debug_assert!(t >= self.t && t < self.t + self.period());
        &self.ring[self.slot(t)].factor
    }

    /// `M_t` regardless of storage form.
    pub fn m_direct(&self) -> Result<Mat> {
        match self.m_form {
            MForm::Direct => Ok(self.m.clone()),
            MForm::Inverse => invert_m(&self.m),
        }
    }

    /// `Δ_SΣ_t = Y_t M_t Y_tᵀ`.
    pub fn increment(&self) -> Result<Mat> {
        Ok(linalg::sym(&(&self.y * self.m_direct()? * self.y.transpose())))
    }

    /// Switch `M` to inverse storage; fails when `M` is numerically singular.
    pub fn to_inverse_form(&mut self) -> Result<()> {
        if self.m_form == MForm::Direct {
            self.m = invert_m(&self.m)?;
            self.m_form = MForm::Inverse;
        }
        Ok(())
    }

    pub fn to_direct_form(&mut self) -> Result<()> {
        if self.m_form == MForm::Inverse {
            self.m = invert_m(&self.m)?;
            self.m_form = MForm::Direct;
        }
        Ok(())
    }
}

fn check_invertible(m: &Mat) -> Result<()> {
    let ratio = linalg::singular_ratio(m);
    if ratio < M_SINGULAR_TOL {
        Err(Error::MSingular { ratio })
    } else {
        Ok(())
    }
}

fn invert_m(m: &Mat) -> Result<Mat> {
    if m.is_empty() {
        return Ok(m.clone());
    }
    check_invertible(m)?;
    let inv = m.clone().lu().try_inverse().ok_or(Error::MSingular { ratio: 0.0 })?;
    Ok(linalg::sym(&inv))
}

/// Initial state at `t = 1` from a factorization of the prelude increment.
pub fn chand_init(
    model: &PeriodicModel,
    factorization: &Factorization,
    prelude: &Prelude,
) -> Result<ChandrasekharState> {
    let fact = factorization
        .clone()
        .checked(&prelude.delta_sigma1, INIT_CHECK_TOL)?;
    debug_assert_eq!(prelude.period(), model.period);
    let ring = (0..model.period)
        .map(|s| RingEntry {
            gain: prelude.gain[s].clone(),
            omega: prelude.omega[s].clone(),
            factor: prelude.factors[s].clone(),
        })
        .collect();
    Ok(ChandrasekharState {
        t: 1,
        y: fact.y,
        m: fact.m,
        m_form: MForm::Direct,
        ring,
    })
}

pub(crate) fn step_counted(
    model: &PeriodicModel,
    state: &mut ChandrasekharState,
    variant: Variant,
    fl: &Flops,
) -> Result<()> {
    match variant {
        Variant::MInverse => state.to_inverse_form()?,
        _ => state.to_direct_form()?,
    }
    let t = state.t;
    if state.alpha() == 0 {
        state.t += 1;
        return Ok(());
    }
    let period = model.period;
    let s = model.season(t);
    let (f, h) = (&model.f[s], &model.h[s]);
    let entry = &state.ring[state.slot(t)];

    // B = Yᵀ H, MB = M B, Z = Y M Yᵀ H = Δ_SΣ_t H
    let b = linalg::tr_mul(fl, &state.y, h);
    let mb = match state.m_form {
        MForm::Direct => linalg::mul(fl, &state.m, &b),
        MForm::Inverse => {
            check_invertible(&state.m)?;
            linalg::lu_solve(fl, &state.m, &b).ok_or(Error::MSingular { ratio: 0.0 })?
        }
    };
    let z = linalg::mul(fl, &state.y, &mb);

    let d_omega = linalg::tr_mul(fl, h, &z);
    let omega_next = linalg::symmetrize(fl, &linalg::add(fl, &entry.omega, &d_omega));
    let factor_next = SpdFactor::new(fl, &omega_next, t + period)?;
    let gain_next = linalg::add(fl, &entry.gain, &linalg::mul(fl, f, &z));

    let fy = linalg::mul(fl, f, &state.y);
    let bt = b.transpose();
    let mbt = mb.transpose();
    let (y_next, m_next) = match variant {
        Variant::Alg31 => {
            let k_norm = factor_next.right_solve(fl, &gain_next);
            let y_next = linalg::sub(fl, &fy, &linalg::mul(fl, &k_norm, &bt));
            let x = entry.factor.solve(fl, &mbt);
            let m_next = linalg::add(fl, &state.m, &linalg::mul(fl, &mb, &x));
            (y_next, linalg::symmetrize(fl, &m_next))
        }
        Variant::Alg32 => {
            let k_norm = entry.factor.right_solve(fl, &entry.gain);
            let y_next = linalg::sub(fl, &fy, &linalg::mul(fl, &k_norm, &bt));
            let x = factor_next.solve(fl, &mbt);
            let m_next = linalg::sub(fl, &state.m, &linalg::mul(fl, &mb, &x));
            (y_next, linalg::symmetrize(fl, &m_next))
        }
        Variant::MInverse => {
            let k_norm = factor_next.right_solve(fl, &gain_next);
            let y_next = linalg::sub(fl, &fy, &linalg::mul(fl, &k_norm, &bt));
            let x = factor_next.solve(fl, &bt);
            let m_next = linalg::sub(fl, &state.m, &linalg::mul(fl, &b, &x));
            let m_next = linalg::symmetrize(fl, &m_next);
            check_invertible(&m_next)?;
            (y_next, m_next)
        }
    };

    let slot = state.slot(t);
    state.ring[slot] = RingEntry {
        gain: gain_next,
        omega: omega_next,
        factor: factor_next,
    };
    state.y = y_next;
    state.m = m_next;
    state.t += 1;
    Ok(())
}

/// Advance one step with the given variant.
pub fn step(model: &PeriodicModel, state: &mut ChandrasekharState, variant: Variant) -> Result<()> {
    step_counted(model, state, variant, &Flops::new())
}

/// One step of the recursions with the `(F − K_{t+S}Ω_{t+S}⁻¹Hᵀ)` update
/// of `Y` and the `+ M Yᵀ H Ω_t⁻¹ Hᵀ Y M` update of `M`.
pub fn step_alg31(model: &PeriodicModel, state: &mut ChandrasekharState) -> Result<()> {
    step(model, state, Variant::Alg31)
}

/// One step with the `(F − K_tΩ_t⁻¹Hᵀ)` update of `Y` and the
/// `− M Yᵀ H Ω_{t+S}⁻¹ Hᵀ Y M` update of `M`. Keeps `M ⪯ 0` when it
/// starts that way.
pub fn step_alg32(model: &PeriodicModel, state: &mut ChandrasekharState) -> Result<()> {
    step(model, state, Variant::Alg32)
}

/// One step propagating `M⁻¹` linearly. Converts the state to inverse
/// storage on first use and fails with `MSingular` for singular `M`.
pub fn step_minv(model: &PeriodicModel, state: &mut ChandrasekharState) -> Result<()> {
    step(model, state, Variant::MInverse)
}

/// `Σ_{kS+s} = Σ_s + Σ_{j<k} Y_{jS+s} M_{jS+s} Y_{jS+s}ᵀ`.
///
/// `history[t − 1]` holds `(Y_t, M_t)` with `M_t` in direct form; `s` is a
/// 1-based season.
pub fn reconstruct_sigma(
    prelude: &Prelude,
    history: &[(Mat, Mat)],
    k: usize,
    s: usize,
) -> Result<Mat> {
    let period = prelude.period();
    assert!((1..=period).contains(&s), "season {s} out of range");
    let mut sigma = prelude.sigma[s - 1].clone();
    for j in 0..k {
        let idx = j * period + s;
        let (y, m) = history
            .get(idx - 1)
            .ok_or(Error::MissingHistory { index: idx })?;
        sigma += y * m * y.transpose();
    }
    Ok(linalg::sym(&sigma))
}

/// Incremental form of [`reconstruct_sigma`]: keeps one running covariance
/// per season.
#[derive(Clone, Debug)]
pub struct SigmaAccumulator {
    per_season: Vec<Mat>,
}

impl SigmaAccumulator {
    pub fn new(prelude: &Prelude) -> Self {
        Self {
            per_season: prelude.sigma.clone(),
        }
    }

    /// `Σ_t`, valid once the increments of `t − S, t − 2S, …` were absorbed.
    pub fn sigma(&self, t: usize) -> &Mat {
        &self.per_season[(t - 1) % self.per_season.len()]
    }

    /// Absorb `Δ_SΣ_t`, turning the stored `Σ_t` into `Σ_{t+S}`.
    pub fn absorb(&mut self, t: usize, increment: &Mat) {
        let slot = (t - 1) % self.per_season.len();
        self.per_season[slot] = linalg::sym(&(&self.per_season[slot] + increment));
    }
}

/// Prelude, factorization and initial state for a covariance engine.
///
/// For [`Variant::MInverse`] a factorization with invertible `M_1` is
/// required; under [`FactorChoice::Auto`] a singular choice is replaced by
/// the eigen form.
pub fn init_engine(
    model: &PeriodicModel,
    sigma1: &Mat,
    stationary: Option<&[Mat]>,
    choice: FactorChoice,
    variant: Variant,
) -> Result<(Prelude, Factorization, ChandrasekharState)> {
    let prelude = build_prelude(model, sigma1)?;
    let mut fact = factorize(model, &prelude, stationary, choice)?;
    if variant == Variant::MInverse
        && choice == FactorChoice::Auto
        && check_invertible(&fact.m).is_err()
    {
        fact = factor_eigen(&prelude.delta_sigma1, EIGEN_REL_TOL);
    }
    let mut state = chand_init(model, &fact, &prelude)?;
    if variant == Variant::MInverse {
        state.to_inverse_form()?;
    }
    Ok((prelude, fact, state))
}

/// Largest relative residuals of the increment and gain identities over a
/// run of the Kalman filter.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct IdentityReport {
    /// Increment recursion with the `K_{t+S}` closed loop and `+Ω_t⁻¹` term.
    pub incr_lead: f64,
    /// Increment recursion with the `K_t` closed loop and `−Ω_{t+S}⁻¹` term.
    pub incr_lag: f64,
    /// Backward gain identity `K̃_t = K̃_{t+S} − Δ_SK̃_t`.
    pub gain_back: f64,
    /// Forward gain identity `K̃_{t+S} = K̃_t + Δ_SK̃_t`.
    pub gain_fwd: f64,
    pub steps: usize,
}

impl IdentityReport {
    pub fn max(&self) -> f64 {
        self.incr_lead.max(self.incr_lag).max(self.gain_back).max(self.gain_fwd)
    }
}

fn scaled(diff: &Mat, a: &Mat, b: &Mat) -> f64 {
    let scale = linalg::fro(a).max(linalg::fro(b));
    if scale == 0.0 {
        0.0
    } else {
        linalg::fro(diff) / scale
    }
}

/// Check the increment recursions and gain identities against exact
/// Kalman-filter quantities for `t = 1..=steps`.
///
/// Increment residuals are scaled by `max(‖Σ_{t+1}‖, ‖Σ_{t+1+S}‖)` and gain
/// residuals by `max(‖K̃_t‖, ‖K̃_{t+S}‖)`, the magnitudes whose difference
/// defines the increments.
pub fn verify_identities(
    model: &PeriodicModel,
    prelude: &Prelude,
    steps: usize,
) -> Result<IdentityReport> {
    let period = model.period;
    let fl = Flops::new();
    let total = steps + period + 1;
    let mut sigma = vec![prelude.sigma[0].clone()];
    let mut gain_n = Vec::new();
    let mut omega_inv = Vec::new();
    for t in 1..total {
        let st = riccati_step(model, &sigma[t - 1], t, &fl)?;
        let m = st.omega.nrows();
        gain_n.push(st.factor.right_solve(&fl, &st.gain));
        omega_inv.push(st.factor.solve(&fl, &Mat::identity(m, m)));
        sigma.push(st.next);
    }
    // sigma[i] = Σ_{i+1}, gain_n[i] = K̃_{i+1}, omega_inv[i] = Ω_{i+1}⁻¹
    let mut rep = IdentityReport {
        steps,
        ..Default::default()
    };
    for t in 1..=steps {
        let s = model.season(t);
        let (f, h) = (&model.f[s], &model.h[s]);
        let d_t = &sigma[t + period - 1] - &sigma[t - 1];
        let d_next = &sigma[t + period] - &sigma[t];
        let (k_t, k_ts) = (&gain_n[t - 1], &gain_n[t + period - 1]);
        let (oi_t, oi_ts) = (&omega_inv[t - 1], &omega_inv[t + period - 1]);
        let dh = &d_t * h;

        let a_ts = f - k_ts * h.transpose();
        let rhs_lead = &a_ts * (&d_t + &dh * oi_t * dh.transpose()) * a_ts.transpose();
        let a_t = f - k_t * h.transpose();
        let rhs_lag = &a_t * (&d_t - &dh * oi_ts * dh.transpose()) * a_t.transpose();
        let (s1, s2) = (&sigma[t], &sigma[t + period]);
        rep.incr_lead = rep.incr_lead.max(scaled(&(&d_next - rhs_lead), s1, s2));
        rep.incr_lag = rep.incr_lag.max(scaled(&(&d_next - rhs_lag), s1, s2));

        let rhs_back = k_ts - &a_ts * &dh * oi_t;
        let rhs_fwd = k_t + &a_t * &dh * oi_ts;
        rep.gain_back = rep.gain_back.max(scaled(&(k_t - rhs_back), k_t, k_ts));
        rep.gain_fwd = rep.gain_fwd.max(scaled(&(k_ts - rhs_fwd), k_t, k_ts));
    }
    Ok(rep)
}
