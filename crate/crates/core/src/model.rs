//! Periodic state-space models, periodic autoregressions and simulation.
//!
//! A model with period `S` is
//!
//! ```text
//! x_{t+1} = F_t x_t + G_t ε_t,   ε_t ~ N(0, Q_t)
//! y_t     = H_tᵀ x_t + e_t,      e_t ~ N(0, R_t)
//! ```
//!
//! with every coefficient repeating with period `S`. Time indices are
//! 1-based; season `s` of time `t` is `((t − 1) mod S) + 1`. Internally the
//! coefficient vectors are 0-based, so [`PeriodicModel::season`] returns
//! `(t − 1) mod S`.

use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kalman::{is_periodically_stationary, solve_dple, DEFAULT_STATIONARITY_MARGIN};
use crate::linalg::{self, Mat, Vector};

const SYMMETRY_REL_TOL: f64 = 1e-12;
const EIGEN_FLOOR_REL: f64 = -1e-10;

/// S-periodic linear state-space model.
///
/// Fields are public so malformed models can be represented and reported by
/// [`validate`]; the numerical routines assume a model for which `validate`
/// returns no violations.
#[derive(Clone, Debug, PartialEq)]
pub struct PeriodicModel {
    pub period: usize,
    pub state_dim: usize,
    pub output_dim: usize,
    pub noise_dim: usize,
    /// `r×r` transition matrices.
    pub f: Vec<Mat>,
    /// `r×d` noise loadings.
    pub g: Vec<Mat>,
    /// `r×m` observation matrices, applied transposed.
    pub h: Vec<Mat>,
    /// `d×d` state-noise covariances.
    pub q: Vec<Mat>,
    /// `m×m` observation-noise covariances.
    pub r: Vec<Mat>,
    /// Optional covariance of `x₁`.
    pub w1: Option<Mat>,
}

impl PeriodicModel {
    /// Build a model from its coefficient sequences, rejecting it if any
    /// invariant is violated. Dimensions are read off the first season.
    pub fn new(
        f: Vec<Mat>,
        g: Vec<Mat>,
        h: Vec<Mat>,
        q: Vec<Mat>,
        r: Vec<Mat>,
        w1: Option<Mat>,
    ) -> Result<Self> {
        let period = f.len();
        let state_dim = f.first().map_or(0, |m| m.nrows());
        let noise_dim = g.first().map_or(0, |m| m.ncols());
        let output_dim = h.first().map_or(0, |m| m.ncols());
        let model = Self {
            period,
            state_dim,
            output_dim,
            noise_dim,
            f,
            g,
            h,
            q,
            r,
            w1,
        };
        model.checked()
    }

    /// Returns `self` if it passes [`validate`], otherwise `InvalidModel`.
    pub fn checked(self) -> Result<Self> {
        let v = validate(&self);
        if v.is_empty() {
            Ok(self)
        } else {
            Err(Error::InvalidModel(v.iter().map(|x| x.to_string()).collect()))
        }
    }

    /// 0-based season index of 1-based time `t`.
    #[inline]
    pub fn season(&self, t: usize) -> usize {
        debug_assert!(t >= 1);
        (t - 1) % self.period
    }

    /// `G_s Q_s G_sᵀ` for 0-based season `s`.
    pub fn process_cov(&self, s: usize) -> Mat {
        &self.g[s] * &self.q[s] * self.g[s].transpose()
    }

    /// The model with seasons cyclically relabeled so that season `k + 1`
    /// becomes season 1.
    pub fn rotated(&self, k: usize) -> Self {
        let rot = |v: &Vec<Mat>| {
            let mut v = v.clone();
            v.rotate_left(k % self.period);
            v
        };
        Self {
            f: rot(&self.f),
            g: rot(&self.g),
            h: rot(&self.h),
            q: rot(&self.q),
            r: rot(&self.r),
            w1: None,
            ..self.clone()
        }
    }
}

/// One invariant violation found by [`validate`].
#[derive(Clone, Debug, PartialEq)]
pub struct Violation {
    /// 1-based season, when the violation is tied to one.
    pub season: Option<usize>,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.season {
            Some(s) => write!(f, "season {s}: {}", self.message),
            None => write!(f, "{}", self.message),
        }
    }
}

fn violation(season: Option<usize>, message: String) -> Violation {
    Violation { season, message }
}

fn check_cov(name: &str, season: Option<usize>, a: &Mat, out: &mut Vec<Violation>) {
    let norm = linalg::fro(a);
    let asym = linalg::fro(&(a - a.transpose()));
    if asym > SYMMETRY_REL_TOL * norm {
        out.push(violation(
            season,
            format!("{name} is not symmetric (asymmetry {asym:e})"),
        ));
        return;
    }
    let (lo, hi) = linalg::eig_range(a);
    let spec = lo.abs().max(hi.abs());
    if lo < EIGEN_FLOOR_REL * spec {
        out.push(violation(
            season,
            format!("{name} is indefinite (min eigenvalue {lo:e})"),
        ));
    }
}

/// Every invariant violation of `model`, with the offending season.
/// An empty list means the model is valid. Never panics on finite input.
pub fn validate(model: &PeriodicModel) -> Vec<Violation> {
    let mut out = Vec::new();
    let s_count = model.period;
    if s_count == 0 {
        out.push(violation(None, "period S must be positive".into()));
    }
    for (name, dim) in [
        ("r", model.state_dim),
        ("m", model.output_dim),
        ("d", model.noise_dim),
    ] {
        if dim == 0 {
            out.push(violation(None, format!("dimension {name} must be positive")));
        }
    }
    let (r, m, d) = (model.state_dim, model.output_dim, model.noise_dim);
    let seqs: [(&str, &Vec<Mat>, (usize, usize)); 5] = [
        ("F", &model.f, (r, r)),
        ("G", &model.g, (r, d)),
        ("H", &model.h, (r, m)),
        ("Q", &model.q, (d, d)),
        ("R", &model.r, (m, m)),
    ];
    for (name, seq, shape) in seqs {
        if seq.len() != s_count {
            out.push(violation(
                None,
                format!(
                    "sequence-length mismatch: {name} has {} entries, expected S={s_count}",
                    seq.len()
                ),
            ));
        }
        for (i, a) in seq.iter().enumerate() {
            let season = Some(i + 1);
            if a.shape() != shape {
                out.push(violation(
                    season,
                    format!(
                        "{name}[{}] has shape {}x{}, expected {}x{}",
                        i + 1,
                        a.nrows(),
                        a.ncols(),
                        shape.0,
                        shape.1
                    ),
                ));
                continue;
            }
            if a.iter().any(|x| !x.is_finite()) {
                out.push(violation(season, format!("{name}[{}] has non-finite entries", i + 1)));
                continue;
            }
            if name == "Q" || name == "R" {
                check_cov(&format!("{name}[{}]", i + 1), season, a, &mut out);
            }
        }
    }
    if let Some(w1) = &model.w1 {
        if w1.shape() != (r, r) {
            out.push(violation(
                None,
                format!("W1 has shape {}x{}, expected {r}x{r}", w1.nrows(), w1.ncols()),
            ));
        } else if w1.iter().any(|x| !x.is_finite()) {
            out.push(violation(None, "W1 has non-finite entries".into()));
        } else {
            check_cov("W1", None, w1, &mut out);
        }
    }
    out
}

/// Scalar periodic autoregression
/// `y_t = Σ_j φ_j^{(t)} y_{t−j} + ε_t`, `Var ε_t = σ²_{season(t)}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParModel {
    #[serde(rename = "S")]
    pub period: usize,
    #[serde(rename = "p")]
    pub order: usize,
    /// `phi[s][j]` is the lag-`j+1` coefficient at season `s+1`.
    pub phi: Vec<Vec<f64>>,
    pub sigma2: Vec<f64>,
}

impl ParModel {
    pub fn validate(&self) -> Result<()> {
        if self.period == 0 {
            return Err(Error::InvalidPar("period S must be positive".into()));
        }
        if self.order == 0 {
            return Err(Error::InvalidPar("order p must be positive".into()));
        }
        if self.phi.len() != self.period || self.phi.iter().any(|row| row.len() != self.order) {
            return Err(Error::InvalidPar(format!(
                "phi must have {} rows of {} coefficients",
                self.period, self.order
            )));
        }
        if self.sigma2.len() != self.period {
            return Err(Error::InvalidPar(format!(
                "sigma2 must have {} entries",
                self.period
            )));
        }
        if self.phi.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::InvalidPar("phi has non-finite entries".into()));
        }
        if let Some(bad) = self.sigma2.iter().position(|&v| !(v > 0.0 && v.is_finite())) {
            return Err(Error::InvalidPar(format!(
                "sigma2 at season {} must be positive",
                bad + 1
            )));
        }
        Ok(())
    }
}

/// Companion-form state-space model of a periodic autoregression.
///
/// The state is `x_t = (y_t, …, y_{t−p+1})`. Because the model propagates
/// `x_{t+1} = F_t x_t`, the transition at season `s` carries the
/// coefficients of season `s + 1` and `Q_s = σ²_{s+1}` (seasons mod `S`).
/// The noise enters through `G_s = e₁` with `d = 1`; `R_s = 0`.
pub fn par_to_state_space(par: &ParModel) -> Result<PeriodicModel> {
    par.validate()?;
    let p = par.order;
    let s_count = par.period;
    let e1 = {
        let mut v = Mat::zeros(p, 1);
        v[(0, 0)] = 1.0;
        v
    };
    let mut f = Vec::with_capacity(s_count);
    let mut q = Vec::with_capacity(s_count);
    for s in 0..s_count {
        let next = (s + 1) % s_count;
        let mut fs = Mat::zeros(p, p);
        for j in 0..p {
            fs[(0, j)] = par.phi[next][j];
        }
        for i in 1..p {
            fs[(i, i - 1)] = 1.0;
        }
        f.push(fs);
        q.push(Mat::from_element(1, 1, par.sigma2[next]));
    }
    PeriodicModel::new(
        f,
        vec![e1.clone(); s_count],
        vec![e1; s_count],
        q,
        vec![Mat::zeros(1, 1); s_count],
        None,
    )
}

/// How `x₁` is drawn by [`simulate`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Start {
    ZeroState,
    Stationary,
}

/// Simulated states `x₁..x_n` and outputs `y₁..y_n`.
#[derive(Clone, Debug, PartialEq)]
pub struct Simulation {
    pub states: Vec<Vector>,
    pub outputs: Vec<Vector>,
}

/// Run the model forward from `x1` with the given noise sequences;
/// `state_noise[t−1]` is `ε_t` and `obs_noise[t−1]` is `e_t`.
pub fn simulate_with_noise(
    model: &PeriodicModel,
    x1: Vector,
    state_noise: &[Vector],
    obs_noise: &[Vector],
) -> Simulation {
    let n = obs_noise.len();
    let mut states = Vec::with_capacity(n);
    let mut outputs = Vec::with_capacity(n);
    let mut x = x1;
    for t in 1..=n {
        let s = model.season(t);
        outputs.push(model.h[s].tr_mul(&x) + &obs_noise[t - 1]);
        let next = &model.f[s] * &x + &model.g[s] * &state_noise[t - 1];
        states.push(std::mem::replace(&mut x, next));
    }
    Simulation { states, outputs }
}

/// Simulate `n` steps with seeded Gaussian noise.
///
/// Draw order: `x₁` (stationary start only), then per step the
/// observation noise followed by the state noise. Results are bitwise
/// reproducible for a given seed.
pub fn simulate(model: &PeriodicModel, n: usize, seed: u64, start: Start) -> Result<Simulation> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut normals = |k: usize| -> Vector {
        Vector::from_fn(k, |_, _| StandardNormal.sample(&mut rng))
    };
    let r = model.state_dim;
    let x1 = match start {
        Start::ZeroState => Vector::zeros(r),
        Start::Stationary => {
            let st = is_periodically_stationary(model, DEFAULT_STATIONARITY_MARGIN);
            if !st.stationary {
                return Err(Error::NotStationary { radius: st.radius });
            }
            let w = solve_dple(model)?;
            linalg::psd_sqrt(&w[0]) * normals(r)
        }
    };
    let q_root: Vec<Mat> = model.q.iter().map(linalg::psd_sqrt).collect();
    let r_root: Vec<Mat> = model.r.iter().map(linalg::psd_sqrt).collect();
    let mut state_noise = Vec::with_capacity(n);
    let mut obs_noise = Vec::with_capacity(n);
    for t in 1..=n {
        let s = model.season(t);
        obs_noise.push(&r_root[s] * normals(model.output_dim));
        state_noise.push(&q_root[s] * normals(model.noise_dim));
    }
    Ok(simulate_with_noise(model, x1, &state_noise, &obs_noise))
}

/// JSON representation of a state-space model. Matrices are row-major
/// nested arrays.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ModelFile {
    #[serde(rename = "S")]
    pub period: usize,
    pub r: usize,
    pub m: usize,
    pub d: usize,
    #[serde(rename = "F")]
    pub f: Vec<Vec<Vec<f64>>>,
    #[serde(rename = "G")]
    pub g: Vec<Vec<Vec<f64>>>,
    #[serde(rename = "H")]
    pub h: Vec<Vec<Vec<f64>>>,
    #[serde(rename = "Q")]
    pub q: Vec<Vec<Vec<f64>>>,
    #[serde(rename = "R")]
    pub r_cov: Vec<Vec<Vec<f64>>>,
    #[serde(rename = "W1", default, skip_serializing_if = "Option::is_none")]
    pub w1: Option<Vec<Vec<f64>>>,
}

/// Failure to read a model document.
#[derive(Debug, thiserror::Error)]
pub enum LoadError {
    #[error("{0}")]
    Json(#[from] serde_json::Error),
    #[error("{0}")]
    Ragged(String),
}

fn to_mat(name: &str, idx: Option<usize>, rows: &[Vec<f64>]) -> std::result::Result<Mat, LoadError> {
    if let Some(first) = rows.first() {
        if rows.iter().any(|r| r.len() != first.len()) {
            let at = idx.map_or(String::new(), |i| format!("[{}]", i + 1));
            return Err(LoadError::Ragged(format!("{name}{at} has rows of unequal length")));
        }
    }
    Ok(linalg::from_rows(rows))
}

impl ModelFile {
    /// Convert to a model without validating it.
    pub fn into_model(self) -> std::result::Result<PeriodicModel, LoadError> {
        let conv = |name: &str, seq: &[Vec<Vec<f64>>]| {
            seq.iter()
                .enumerate()
                .map(|(i, rows)| to_mat(name, Some(i), rows))
                .collect::<std::result::Result<Vec<_>, _>>()
        };
        Ok(PeriodicModel {
            period: self.period,
            state_dim: self.r,
            output_dim: self.m,
            noise_dim: self.d,
            f: conv("F", &self.f)?,
            g: conv("G", &self.g)?,
            h: conv("H", &self.h)?,
            q: conv("Q", &self.q)?,
            r: conv("R", &self.r_cov)?,
            w1: self.w1.as_deref().map(|w| to_mat("W1", None, w)).transpose()?,
        })
    }

    pub fn from_model(model: &PeriodicModel) -> Self {
        let conv = |seq: &[Mat]| seq.iter().map(linalg::to_rows).collect();
        Self {
            period: model.period,
            r: model.state_dim,
            m: model.output_dim,
            d: model.noise_dim,
            f: conv(&model.f),
            g: conv(&model.g),
            h: conv(&model.h),
            q: conv(&model.q),
            r_cov: conv(&model.r),
            w1: model.w1.as_ref().map(linalg::to_rows),
        }
    }
}

/// A parsed model document: either a general state-space model or a PAR.
#[derive(Clone, Debug)]
pub enum ModelDoc {
    StateSpace(PeriodicModel),
    Par(ParModel),
}

/// Parse a model document. Documents carrying a `"phi"` key are read as
/// periodic autoregressions, everything else as state-space models.
pub fn parse_model_doc(text: &str) -> std::result::Result<ModelDoc, LoadError> {
    let value: serde_json::Value = serde_json::from_str(text)?;
    if value.get("phi").is_some() {
        Ok(ModelDoc::Par(serde_json::from_value(value)?))
    } else {
        let file: ModelFile = serde_json::from_value(value)?;
        Ok(ModelDoc::StateSpace(file.into_model()?))
    }
}

pub fn model_to_json(model: &PeriodicModel) -> String {
    serde_json::to_string_pretty(&ModelFile::from_model(model)).expect("model serializes")
}
