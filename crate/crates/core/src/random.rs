//! Seeded generators for randomized periodically stationary models.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::linalg::Mat;
use crate::model::{par_to_state_space, ParModel, PeriodicModel};

fn normal_mat<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> Mat {
    Mat::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

fn spd<R: Rng + ?Sized>(rng: &mut R, n: usize, ridge: f64) -> Mat {
    let b = normal_mat(rng, n, n);
    let a = &b * b.transpose() / n as f64 + Mat::identity(n, n) * ridge;
    (&a + a.transpose()) * 0.5
}

/// Shape of a random model.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Dims {
    pub period: usize,
    pub state: usize,
    pub output: usize,
    pub noise: usize,
}

/// Random model with positive-definite `Q_s`, `R_s`, whose transition
/// matrices each have spectral norm in `[0.3, 0.9]`, so the monodromy
/// spectral radius is at most `0.9^S`.
pub fn random_stationary_model<R: Rng + ?Sized>(rng: &mut R, dims: Dims) -> PeriodicModel {
    let Dims {
        period,
        state: r,
        output: m,
        noise: d,
    } = dims;
    let mut f = Vec::with_capacity(period);
    let mut g = Vec::with_capacity(period);
    let mut h = Vec::with_capacity(period);
    let mut q = Vec::with_capacity(period);
    let mut rc = Vec::with_capacity(period);
    for _ in 0..period {
        let a = normal_mat(rng, r, r);
        let norm = a.clone().singular_values().max();
        let target: f64 = rng.random_range(0.3..0.9);
        f.push(a * (target / norm));
        g.push(normal_mat(rng, r, d));
        h.push(normal_mat(rng, r, m));
        q.push(spd(rng, d, 0.2));
        rc.push(spd(rng, m, 0.5));
    }
    PeriodicModel::new(f, g, h, q, rc, None).expect("generated model is valid")
}

/// Dimensions of the randomized test suite: `r ∈ 2..=6`, `S ∈ 1..=4`,
/// `m ∈ 1..=2`, `d = r`.
pub fn suite_dims<R: Rng + ?Sized>(rng: &mut R) -> Dims {
    let state = rng.random_range(2..=6);
    Dims {
        period: rng.random_range(1..=4),
        state,
        output: rng.random_range(1..=2),
        noise: state,
    }
}

/// Random periodic autoregression with `Σ_j |φ_j^{(s)}| < 1` at every
/// season, which keeps the companion form periodically stationary.
pub fn random_stable_par<R: Rng + ?Sized>(rng: &mut R, period: usize, order: usize) -> ParModel {
    let mut phi = Vec::with_capacity(period);
    let mut sigma2 = Vec::with_capacity(period);
    for _ in 0..period {
        let raw: Vec<f64> = (0..order).map(|_| rng.sample(StandardNormal)).collect();
        let l1: f64 = raw.iter().map(|x: &f64| x.abs()).sum();
        let budget: f64 = rng.random_range(0.5..0.9);
        phi.push(raw.iter().map(|x| x * budget / l1.max(f64::MIN_POSITIVE)).collect());
        sigma2.push(rng.random_range(0.5..2.0));
    }
    ParModel {
        period,
        order,
        phi,
        sigma2,
    }
}

/// State-space form of [`random_stable_par`].
pub fn random_par_model<R: Rng + ?Sized>(rng: &mut R, period: usize, order: usize) -> PeriodicModel {
    par_to_state_space(&random_stable_par(rng, period, order)).expect("generated PAR is valid")
}
