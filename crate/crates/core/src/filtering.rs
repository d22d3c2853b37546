//! Full filter passes with a pluggable covariance engine, and the
//! innovations-form Gaussian log-likelihood.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::chandrasekhar::{
    init_engine, step_counted, FactorChoice, FactorMethod, SigmaAccumulator, Variant,
};
use crate::error::{Error, Result};
use crate::kalman::{
    is_periodically_stationary, riccati_step, solve_dple, state_update,
    DEFAULT_STATIONARITY_MARGIN,
};
use crate::linalg::{self, Flops, Mat, SpdFactor, Vector};
use crate::model::PeriodicModel;

/// Covariance engine feeding `(K_t, Ω_t)` into the state recursion.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Engine {
    #[serde(rename = "kalman")]
    Kalman,
    #[serde(rename = "chand31")]
    Chand31,
    #[serde(rename = "chand32")]
    Chand32,
    #[serde(rename = "chand-minv")]
    ChandMinv,
}

impl Engine {
    pub const ALL: [Engine; 4] = [
        Engine::Kalman,
        Engine::Chand31,
        Engine::Chand32,
        Engine::ChandMinv,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Engine::Kalman => "kalman",
            Engine::Chand31 => "chand31",
            Engine::Chand32 => "chand32",
            Engine::ChandMinv => "chand-minv",
        }
    }

    /// Chandrasekhar variant, `None` for the Kalman engine.
    pub fn variant(self) -> Option<Variant> {
        match self {
            Engine::Kalman => None,
            Engine::Chand31 => Some(Variant::Alg31),
            Engine::Chand32 => Some(Variant::Alg32),
            Engine::ChandMinv => Some(Variant::MInverse),
        }
    }
}

impl fmt::Display for Engine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Engine {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Engine::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| format!("unknown engine `{s}` (expected kalman, chand31, chand32 or chand-minv)"))
    }
}

/// Initial conditions of a filter pass.
#[derive(Clone, Debug, PartialEq)]
pub enum Init {
    /// `x̂₁ = 0`; `Σ₁ = W₁` from the model when given, else the stationary
    /// covariance.
    ZeroState,
    /// `x̂₁ = 0`, `Σ₁` the stationary covariance; requires stationarity.
    Stationary,
    Explicit { xhat: Vector, sigma: Mat },
}

#[derive(Clone, Copy, Debug, Default)]
pub struct FilterOptions {
    /// Record `Σ_t` at every step.
    pub sigma_trace: bool,
    pub factor: FactorChoice,
}

#[derive(Clone, Debug, Serialize)]
pub struct FilterOutput {
    pub n: usize,
    pub engine: Engine,
    #[serde(serialize_with = "ser_vecs")]
    pub innovations: Vec<Vector>,
    #[serde(serialize_with = "ser_mats")]
    pub omega: Vec<Mat>,
    #[serde(serialize_with = "ser_mats")]
    pub gains: Vec<Mat>,
    /// `x̂_1..x̂_{n+1}`.
    #[serde(serialize_with = "ser_vecs")]
    pub xhat: Vec<Vector>,
    #[serde(serialize_with = "ser_opt_mats", skip_serializing_if = "Option::is_none")]
    pub sigma_trace: Option<Vec<Mat>>,
    pub loglik: f64,
    /// Start factorization of the Chandrasekhar engines.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<usize>,
    #[serde(serialize_with = "ser_method", skip_serializing_if = "Option::is_none")]
    pub factor_method: Option<FactorMethod>,
}

fn ser_vecs<S: serde::Serializer>(v: &[Vector], s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_seq(v.iter().map(|x| x.as_slice().to_vec()))
}

fn ser_mats<S: serde::Serializer>(v: &[Mat], s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_seq(v.iter().map(linalg::to_rows))
}

fn ser_opt_mats<S: serde::Serializer>(
    v: &Option<Vec<Mat>>,
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    match v {
        Some(v) => ser_mats(v, s),
        None => s.serialize_none(),
    }
}

fn ser_method<S: serde::Serializer>(
    v: &Option<FactorMethod>,
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    match v {
        Some(m) => s.serialize_str(&m.to_string()),
        None => s.serialize_none(),
    }
}

/// Per-step terms `−½[m log 2π + log det Ω_t + e_tᵀ Ω_t⁻¹ e_t]`.
pub fn loglik_terms(output: &FilterOutput) -> Vec<f64> {
    let fl = Flops::new();
    output
        .innovations
        .iter()
        .zip(&output.omega)
        .enumerate()
        .map(|(i, (e, omega))| {
            let factor = SpdFactor::new(&fl, omega, i + 1).expect("Ω checked during filtering");
            let quad = e.dot(&factor.solve_vec(&fl, e));
            -0.5 * (e.len() as f64 * (2.0 * PI).ln() + factor.ln_det() + quad)
        })
        .collect()
}

/// Innovations-form Gaussian log-likelihood
/// `−½ Σ_t [m log 2π + log det Ω_t + e_tᵀ Ω_t⁻¹ e_t]`.
pub fn gaussian_loglik(output: &FilterOutput) -> f64 {
    loglik_terms(output).iter().sum()
}

/// `(x̂₁, Σ₁)` and, when the model is stationary, its stationary covariances.
pub(crate) fn initial_conditions(
    model: &PeriodicModel,
    init: &Init,
) -> Result<(Vector, Mat, Option<Vec<Mat>>)> {
    let st = is_periodically_stationary(model, DEFAULT_STATIONARITY_MARGIN);
    let stationary = if st.stationary {
        Some(solve_dple(model)?)
    } else {
        None
    };
    let zero = Vector::zeros(model.state_dim);
    let not_stationary = Error::NotStationary { radius: st.radius };
    match init {
        Init::Explicit { xhat, sigma } => {
            if xhat.len() != model.state_dim || sigma.shape() != (model.state_dim, model.state_dim) {
                return Err(Error::Dimension("explicit initial state has the wrong shape".into()));
            }
            Ok((xhat.clone(), sigma.clone(), stationary))
        }
        Init::Stationary => {
            let w = stationary.ok_or(not_stationary)?;
            Ok((zero, w[0].clone(), Some(w)))
        }
        Init::ZeroState => {
            let sigma1 = match (&model.w1, &stationary) {
                (Some(w1), _) => w1.clone(),
                (None, Some(w)) => w[0].clone(),
                (None, None) => return Err(not_stationary),
            };
            Ok((zero, sigma1, stationary))
        }
    }
}

/// Filter `y` with the chosen engine. All engines share the state
/// recursion; they differ only in how `(K_t, Ω_t)` are produced.
pub fn filter_series(
    model: &PeriodicModel,
    y: &[Vector],
    engine: Engine,
    init: &Init,
    opts: &FilterOptions,
) -> Result<FilterOutput> {
    if let Some(bad) = y.iter().position(|v| v.len() != model.output_dim) {
        return Err(Error::Dimension(format!(
            "observation {} has length {}, expected {}",
            bad + 1,
            y[bad].len(),
            model.output_dim
        )));
    }
    let (x1, sigma1, stationary) = initial_conditions(model, init)?;
    let n = y.len();
    let fl = Flops::new();
    let mut out = FilterOutput {
        n,
        engine,
        innovations: Vec::with_capacity(n),
        omega: Vec::with_capacity(n),
        gains: Vec::with_capacity(n),
        xhat: Vec::with_capacity(n + 1),
        sigma_trace: opts.sigma_trace.then(|| Vec::with_capacity(n)),
        loglik: 0.0,
        alpha: None,
        factor_method: None,
    };
    out.xhat.push(x1);

    match engine.variant() {
        None => {
            let mut sigma = sigma1;
            for (i, y_t) in y.iter().enumerate() {
                let t = i + 1;
                let step = riccati_step(model, &sigma, t, &fl)?;
                let (_, e, next) = state_update(model, t, &out.xhat[i], y_t, &step.gain, &step.factor, &fl);
                if let Some(trace) = &mut out.sigma_trace {
                    trace.push(sigma.clone());
                }
                out.innovations.push(e);
                out.xhat.push(next);
                out.omega.push(step.omega);
                out.gains.push(step.gain);
                sigma = step.next;
            }
        }
        Some(variant) => {
            let (prelude, fact, mut state) = init_engine(
                model,
                &sigma1,
                stationary.as_deref(),
                opts.factor,
                variant,
            )
            .map_err(|e| Error::EngineInitFailed(Box::new(e)))?;
            out.alpha = Some(fact.alpha());
            out.factor_method = Some(fact.method);
            let mut acc = opts.sigma_trace.then(|| SigmaAccumulator::new(&prelude));
            let period = model.period;
            for (i, y_t) in y.iter().enumerate() {
                let t = i + 1;
                let (gain, omega) = state.pair_at(t);
                let (gain, omega) = (gain.clone(), omega.clone());
                let (_, e, next) = state_update(model, t, &out.xhat[i], y_t, &gain, state.factor_at(t), &fl);
                if let (Some(trace), Some(acc)) = (&mut out.sigma_trace, &acc) {
                    trace.push(acc.sigma(t).clone());
                }
                out.innovations.push(e);
                out.xhat.push(next);
                out.omega.push(omega);
                out.gains.push(gain);
                // the step at t produces (K, Ω) for t + S
                if t + period <= n {
                    if let Some(acc) = &mut acc {
                        acc.absorb(t, &state.increment()?);
                    }
                    step_counted(model, &mut state, variant, &fl)?;
                }
            }
        }
    }
    out.loglik = gaussian_loglik(&out);
    Ok(out)
}

/// Largest relative difference of `(Ω_t, K_t, e_t, x̂_{t+1})` at each step.
pub fn step_deviation(a: &FilterOutput, b: &FilterOutput) -> Vec<f64> {
    (0..a.n.min(b.n))
        .map(|i| {
            linalg::rel_diff(&a.omega[i], &b.omega[i])
                .max(linalg::rel_diff(&a.gains[i], &b.gains[i]))
                .max(linalg::rel_diff_vec(&a.innovations[i], &b.innovations[i]))
                .max(linalg::rel_diff_vec(&a.xhat[i + 1], &b.xhat[i + 1]))
        })
        .collect()
}
