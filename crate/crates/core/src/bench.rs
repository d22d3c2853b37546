//! Flop-accounted comparison of the Riccati path against the Chandrasekhar
//! engines on the covariance recursion alone.

use std::fmt::Write as _;
use std::time::Instant;

use crate::chandrasekhar::{init_engine, step_counted, FactorChoice, FactorMethod};
use crate::error::{Error, Result};
use crate::filtering::{initial_conditions, Engine, Init};
use crate::kalman::riccati_step;
use crate::linalg::{Flops, Mat};
use crate::model::PeriodicModel;

/// Shape of the benchmarked model.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ModelDescriptor {
    pub period: usize,
    pub state_dim: usize,
    pub output_dim: usize,
    pub noise_dim: usize,
    /// Rank of the start factorization used by the Chandrasekhar engines.
    pub alpha: Option<usize>,
    pub factor_method: Option<FactorMethod>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EngineCost {
    pub engine: Engine,
    pub steps: usize,
    pub total_flops: u64,
    pub wall_seconds: f64,
}

impl EngineCost {
    pub fn flops_per_step(&self) -> f64 {
        if self.steps == 0 {
            0.0
        } else {
            self.total_flops as f64 / self.steps as f64
        }
    }

    pub fn flops_per_period(&self, period: usize) -> f64 {
        self.flops_per_step() * period as f64
    }
}

/// Asymptotic per-step cost of an engine.
pub fn order_label(engine: Engine) -> &'static str {
    match engine {
        Engine::Kalman => "O(r^3)",
        _ => "O(Smr^2)",
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CostReport {
    pub model: ModelDescriptor,
    pub n_periods: usize,
    pub engines: Vec<EngineCost>,
}

impl CostReport {
    pub fn cost(&self, engine: Engine) -> Option<&EngineCost> {
        self.engines.iter().find(|c| c.engine == engine)
    }

    /// Kalman flops over the flops of `engine`; infinite when the engine
    /// does no arithmetic.
    pub fn ratio(&self, engine: Engine) -> Option<f64> {
        let k = self.cost(Engine::Kalman)?.total_flops as f64;
        Some(k / self.cost(engine)?.total_flops as f64)
    }

    pub fn to_text(&self) -> String {
        let d = &self.model;
        let mut out = format!(
            "model: S={} r={} m={} d={}",
            d.period, d.state_dim, d.output_dim, d.noise_dim
        );
        if let (Some(a), Some(method)) = (d.alpha, d.factor_method) {
            let _ = write!(out, " alpha={a} ({method})");
        }
        let steps = self.n_periods * d.period;
        let _ = writeln!(out, "\nsteps: {steps} ({} periods)", self.n_periods);
        let _ = writeln!(
            out,
            "{:<12}{:<10}{:>16}{:>16}{:>16}{:>12}{:>10}",
            "engine", "order", "flops/step", "flops/period", "total", "wall_ms", "ratio"
        );
        for c in &self.engines {
            let ratio = self.ratio(c.engine).map_or("-".to_string(), |r| format!("{r:.2}"));
            let _ = writeln!(
                out,
                "{:<12}{:<10}{:>16.1}{:>16.1}{:>16}{:>12.3}{:>10}",
                c.engine.name(),
                order_label(c.engine),
                c.flops_per_step(),
                c.flops_per_period(d.period),
                c.total_flops,
                c.wall_seconds * 1e3,
                ratio
            );
        }
        out
    }

    /// Columns: `engine,S,r,m,d,alpha,steps,total_flops,flops_per_step,
    /// flops_per_period,wall_seconds,ratio_kalman`.
    pub fn to_csv(&self) -> String {
        let d = &self.model;
        let mut out = String::from(
            "engine,S,r,m,d,alpha,steps,total_flops,flops_per_step,flops_per_period,wall_seconds,ratio_kalman\n",
        );
        for c in &self.engines {
            let alpha = match c.engine {
                Engine::Kalman => String::new(),
                _ => d.alpha.map(|a| a.to_string()).unwrap_or_default(),
            };
            let ratio = self.ratio(c.engine).map(|r| format!("{r:?}")).unwrap_or_default();
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{:?},{:?},{:?},{}",
                c.engine.name(),
                d.period,
                d.state_dim,
                d.output_dim,
                d.noise_dim,
                alpha,
                c.steps,
                c.total_flops,
                c.flops_per_step(),
                c.flops_per_period(d.period),
                c.wall_seconds,
                ratio
            );
        }
        out
    }
}

/// Outcome of one covariance-only run.
pub(crate) struct Run {
    pub cost: EngineCost,
    pub alpha: Option<usize>,
    pub method: Option<FactorMethod>,
    /// Most recently computed `(K, Ω)`.
    #[allow(dead_code)]
    pub last: Option<(Mat, Mat)>,
}

/// Run `steps` covariance steps of `engine` from `Σ₁`; only the step loop
/// is charged to `fl`.
pub(crate) fn covariance_run(
    model: &PeriodicModel,
    sigma1: &Mat,
    stationary: Option<&[Mat]>,
    engine: Engine,
    steps: usize,
    fl: &Flops,
) -> Result<Run> {
    let (alpha, method, last, wall) = match engine.variant() {
        None => {
            let begin = Instant::now();
            let mut sigma = sigma1.clone();
            let mut last = None;
            for t in 1..=steps {
                let step = riccati_step(model, &sigma, t, fl)?;
                sigma = step.next;
                last = Some((step.gain, step.omega));
            }
            (None, None, last, begin.elapsed())
        }
        Some(variant) => {
            let (_, fact, mut state) =
                init_engine(model, sigma1, stationary, FactorChoice::Auto, variant)
                    .map_err(|e| Error::EngineInitFailed(Box::new(e)))?;
            let begin = Instant::now();
            for _ in 0..steps {
                step_counted(model, &mut state, variant, fl)?;
            }
            let wall = begin.elapsed();
            let last = (steps > 0).then(|| {
                let (k, o) = state.pair_at(state.t + model.period - 1);
                (k.clone(), o.clone())
            });
            (Some(fact.alpha()), Some(fact.method), last, wall)
        }
    };
    Ok(Run {
        cost: EngineCost {
            engine,
            steps,
            total_flops: fl.get(),
            wall_seconds: wall.as_secs_f64(),
        },
        alpha,
        method,
        last,
    })
}

/// Count the flops of `n_periods · S` covariance steps for each engine,
/// started from the stationary covariance (or the model's `W₁`).
pub fn count_costs(model: &PeriodicModel, n_periods: usize, engines: &[Engine]) -> Result<CostReport> {
    let (_, sigma1, stationary) = initial_conditions(model, &Init::ZeroState)?;
    let steps = n_periods * model.period;
    let mut descriptor = ModelDescriptor {
        period: model.period,
        state_dim: model.state_dim,
        output_dim: model.output_dim,
        noise_dim: model.noise_dim,
        alpha: None,
        factor_method: None,
    };
    let mut costs = Vec::with_capacity(engines.len());
    for &engine in engines {
        let fl = Flops::new();
        let run = covariance_run(model, &sigma1, stationary.as_deref(), engine, steps, &fl)?;
        if run.alpha.is_some() && descriptor.alpha.is_none() {
            descriptor.alpha = run.alpha;
            descriptor.factor_method = run.method;
        }
        costs.push(run.cost);
    }
    Ok(CostReport {
        model: descriptor,
        n_periods,
        engines: costs,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScalingTable {
    pub engines: Vec<Engine>,
    pub reports: Vec<CostReport>,
    /// Log-log least-squares slope of flops per step against `r`, per
    /// engine; `None` with fewer than two distinct `r`.
    pub slopes: Option<Vec<(Engine, f64)>>,
}

impl ScalingTable {
    pub fn slope(&self, engine: Engine) -> Option<f64> {
        self.slopes.as_ref()?.iter().find(|(e, _)| *e == engine).map(|(_, s)| *s)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("{:>6}{:>8}", "r", "alpha");
        for e in &self.engines {
            let _ = write!(out, "{:>16}", e.name());
        }
        out.push('\n');
        for rep in &self.reports {
            let alpha = rep.model.alpha.map_or("-".into(), |a| a.to_string());
            let _ = write!(out, "{:>6}{:>8}", rep.model.state_dim, alpha);
            for c in &rep.engines {
                let _ = write!(out, "{:>16.1}", c.flops_per_step());
            }
            out.push('\n');
        }
        match &self.slopes {
            Some(slopes) => {
                for (e, s) in slopes {
                    let _ = writeln!(out, "slope {:<12}{s:.3}  ({})", e.name(), order_label(*e));
                }
            }
            None => out.push_str("slope: not fitted (need two or more r values)\n"),
        }
        out
    }

    /// Columns: `r,alpha,<engine>...` with flops per step, then one
    /// `slope,,<value>...` row when fitted.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("r,alpha");
        for e in &self.engines {
            let _ = write!(out, ",{}", e.name());
        }
        out.push('\n');
        for rep in &self.reports {
            let _ = write!(
                out,
                "{},{}",
                rep.model.state_dim,
                rep.model.alpha.map(|a| a.to_string()).unwrap_or_default()
            );
            for c in &rep.engines {
                let _ = write!(out, ",{:?}", c.flops_per_step());
            }
            out.push('\n');
        }
        if let Some(slopes) = &self.slopes {
            out.push_str("slope,");
            for (_, s) in slopes {
                let _ = write!(out, ",{s:?}");
            }
            out.push('\n');
        }
        out
    }
}

/// Least-squares slope of `ln y` on `ln x`.
pub fn log_log_slope(points: &[(f64, f64)]) -> Option<f64> {
    if points.iter().any(|&(x, y)| x <= 0.0 || y <= 0.0) {
        return None;
    }
    let logs: Vec<(f64, f64)> = points.iter().map(|&(x, y)| (x.ln(), y.ln())).collect();
    let n = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if logs.len() < 2 || sxx <= 0.0 {
        return None;
    }
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    Some(sxy / sxx)
}

/// [`count_costs`] over a family of models indexed by state dimension.
/// Runs for different `r` proceed on separate threads.
pub fn scaling_table<F>(
    family: F,
    r_values: &[usize],
    n_periods: usize,
    engines: &[Engine],
) -> Result<ScalingTable>
where
    F: Fn(usize) -> Result<PeriodicModel> + Sync,
{
    let reports: Vec<Result<CostReport>> = std::thread::scope(|scope| {
        let handles: Vec<_> = r_values
            .iter()
            .map(|&r| {
                let family = &family;
                scope.spawn(move || count_costs(&family(r)?, n_periods, engines))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("benchmark thread panicked"))
            .collect()
    });
    let reports = reports.into_iter().collect::<Result<Vec<_>>>()?;
    let slopes = engines
        .iter()
        .map(|&e| {
            let points: Vec<(f64, f64)> = reports
                .iter()
                .map(|rep| (rep.model.state_dim as f64, rep.cost(e).map_or(0.0, |c| c.flops_per_step())))
                .collect();
            log_log_slope(&points).map(|s| (e, s))
        })
        .collect::<Option<Vec<_>>>();
    Ok(ScalingTable {
        engines: engines.to_vec(),
        reports,
        slopes,
    })
}
