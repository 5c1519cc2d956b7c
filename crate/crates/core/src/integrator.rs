//! Fixed-step RK4 time integration. Deterministic by construction: fixed
//! summation order, single-threaded stepping, full states stored at every
//! sampled time so post-hoc functionals need no re-run.

use crate::dynamics::{cs_rhs, rcs_rhs, Derivative, EnsembleState, ModelKind};
use crate::error::{Error, Result};
use crate::relativity::ModelParams;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub dt: f64,
    pub t_end: f64,
    pub sample_every: usize,
    pub model: ModelKind,
    pub seed: u64,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let check = |cond: bool, key: &str, msg: &str| {
            if cond {
                Ok(())
            } else {
                Err(Error::Config {
                    key: key.to_string(),
                    message: msg.to_string(),
                })
            }
        };
        check(self.dt > 0.0 && self.dt.is_finite(), "dt", "must be > 0")?;
        check(self.t_end > 0.0 && self.t_end.is_finite(), "t_end", "must be > 0")?;
        check(self.dt <= self.t_end, "dt", "must be <= t_end")?;
        check(self.sample_every >= 1, "sample_every", "must be >= 1")?;
        Ok(())
    }

    /// Default step rule: resolves the fastest alignment timescale T*/phi(0).
    pub fn default_dt(params: &ModelParams) -> f64 {
        f64::min(1e-2, 0.1 * params.t_star)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub samples: Vec<EnsembleState>,
    pub config: SimConfig,
    pub params: ModelParams,
}

impl Trajectory {
    pub fn sample_dt(&self) -> f64 {
        self.config.dt * self.config.sample_every as f64
    }
}

/// One classical 4-stage Runge-Kutta update of the ensemble.
pub fn rk4_step<F>(state: &EnsembleState, dt: f64, rhs: &F) -> Result<EnsembleState>
where
    F: Fn(&EnsembleState) -> Result<Derivative>,
{
    let n = state.n();
    let advance = |base: &EnsembleState, d: &Derivative, h: f64| {
        let mut next = base.clone();
        for a in 0..n {
            next.x[a] = base.x[a] + d.dx[a] * h;
            next.w[a] = base.w[a] + d.dw[a] * h;
        }
        next.t = base.t + h;
        next
    };
    let k1 = rhs(state)?;
    let s2 = advance(state, &k1, dt / 2.0);
    let k2 = rhs(&s2)?;
    let s3 = advance(state, &k2, dt / 2.0);
    let k3 = rhs(&s3)?;
    let s4 = advance(state, &k3, dt);
    let k4 = rhs(&s4)?;
    let mut next = state.clone();
    for a in 0..n {
        let dx = (k1.dx[a] + (k2.dx[a] + k3.dx[a]) * 2.0 + k4.dx[a]) * (dt / 6.0);
        let dw = (k1.dw[a] + (k2.dw[a] + k3.dw[a]) * 2.0 + k4.dw[a]) * (dt / 6.0);
        next.x[a] = state.x[a] + dx;
        next.w[a] = state.w[a] + dw;
    }
    next.t = state.t + dt;
    Ok(next)
}

/// Integrates from t = 0 to t_end, recording every `sample_every`-th state
/// (plus the initial state). Aborts with step and agent index on any
/// non-finite intermediate.
pub fn simulate(init: &EnsembleState, params: &ModelParams, config: &SimConfig) -> Result<Trajectory> {
    config.validate()?;
    params.validate()?;
    let rhs = |s: &EnsembleState| match config.model {
        ModelKind::Rcs => rcs_rhs(s, params),
        ModelKind::Cs => cs_rhs(s, params),
    };
    let steps = (config.t_end / config.dt).ceil() as usize;
    let mut state = init.clone();
    state.t = 0.0;
    let mut samples = vec![state.clone()];
    for step in 1..=steps {
        state = rk4_step(&state, config.dt, &rhs)?;
        if let Some(agent) = state.first_bad_agent() {
            return Err(Error::NonFiniteState { step, agent });
        }
        if step % config.sample_every == 0 || step == steps {
            samples.push(state.clone());
        }
    }
    Ok(Trajectory {
        samples,
        config: *config,
        params: params.clone(),
    })
}
