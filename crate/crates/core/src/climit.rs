//! Uniform-time classical limit at the particle level: the deviation
//! functional between matched relativistic and classical runs, perturbed
//! initial data with a prescribed c^{-4} deviation budget, and the
//! log-log rate scan across a ladder of c values.

use crate::diagnostics::{flocking_certificate, linear_fit};
use crate::dynamics::{project_zero_sum, EnsembleState, ModelKind};
use crate::error::{Error, Result};
use crate::integrator::{simulate, SimConfig, Trajectory};
use crate::relativity::ModelParams;
use crate::thread_count;
use crate::vec3::Vec3;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Mean squared position-plus-momentum gap between two matched ensembles.
pub fn delta_c(state_r: &EnsembleState, state_c: &EnsembleState) -> Result<f64> {
    if state_r.n() != state_c.n() {
        return Err(Error::Mismatch(format!(
            "ensemble sizes differ: {} vs {}",
            state_r.n(),
            state_c.n()
        )));
    }
    if (state_r.t - state_c.t).abs() > 1e-12 * state_r.t.abs().max(1.0) {
        return Err(Error::Mismatch(format!(
            "sample times differ: {} vs {}",
            state_r.t, state_c.t
        )));
    }
    let n = state_r.n();
    let mut acc = 0.0;
    for a in 0..n {
        acc += (state_r.x[a] - state_c.x[a]).norm_sq() + (state_r.w[a] - state_c.w[a]).norm_sq();
    }
    Ok(acc / n as f64)
}

/// Adds a seeded perturbation to x and w, rescaled after zero-sum projection
/// so that the initial deviation is exactly K c^{-4}.
pub fn perturb_initial(base: &EnsembleState, c: f64, k: f64, seed: u64) -> EnsembleState {
    if k == 0.0 {
        return base.clone();
    }
    let n = base.n();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut dx: Vec<Vec3> = (0..n)
        .map(|_| Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect();
    let mut dw: Vec<Vec3> = (0..n)
        .map(|_| Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect();
    // project first so the rescale lands on the target exactly
    project_zero_sum(&mut dw);
    let raw: f64 = (0..n).map(|a| dx[a].norm_sq() + dw[a].norm_sq()).sum::<f64>() / n as f64;
    let target = k * c.powi(-4);
    let scale = (target / raw).sqrt();
    for a in 0..n {
        dx[a] = dx[a] * scale;
        dw[a] = dw[a] * scale;
    }
    let mut out = base.clone();
    for a in 0..n {
        out.x[a] += dx[a];
        out.w[a] += dw[a];
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitScanResult {
    pub c_values: Vec<f64>,
    pub sup_delta: Vec<f64>,
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub per_c_series: Option<Vec<Vec<(f64, f64)>>>,
}

/// Runs the configured model at every c in the ladder against a shared
/// classical reference run and fits the log-log slope of sup_t Delta^c
/// against c. A failed flocking certificate at any c aborts the scan.
pub fn c_scan(
    base_init: &EnsembleState,
    params_template: &ModelParams,
    config: &SimConfig,
    c_values: &[f64],
    k: f64,
    keep_series: bool,
) -> Result<LimitScanResult> {
    if c_values.len() < 3 {
        return Err(Error::Config {
            key: "c_values".into(),
            message: "need at least 3 entries for a slope fit".into(),
        });
    }
    let cs_config = SimConfig {
        model: ModelKind::Cs,
        ..*config
    };
    let traj_cs = simulate(base_init, params_template, &cs_config)?;
    let run_one = |&c: &f64| -> Result<(f64, Vec<(f64, f64)>)> {
        let params = ModelParams {
            c,
            ..params_template.clone()
        };
        let init = perturb_initial(base_init, c, k, config.seed);
        let cert = flocking_certificate(&init, &params)?;
        if !cert.satisfied {
            return Err(Error::Uncertified(format!(
                "c = {c}: lhs {} vs rhs {}",
                cert.condition_lhs, cert.condition_rhs
            )));
        }
        // honors the configured model: a classical model here degenerates to
        // a self-comparison with identically zero deviation
        let traj_rcs = simulate(&init, &params, config)?;
        let series = delta_series(&traj_rcs, &traj_cs)?;
        let sup = series.iter().map(|&(_, d)| d).fold(0.0, f64::max);
        Ok((sup, series))
    };
    let results: Vec<(f64, Vec<(f64, f64)>)> = run_keyed(c_values, run_one)?;
    let sup_delta: Vec<f64> = results.iter().map(|r| r.0).collect();
    let series: Vec<Vec<(f64, f64)>> = results.into_iter().map(|r| r.1).collect();
    let (slope, intercept, r_squared) = fit_loglog(c_values, &sup_delta);
    Ok(LimitScanResult {
        c_values: c_values.to_vec(),
        sup_delta,
        slope,
        intercept,
        r_squared,
        per_c_series: keep_series.then_some(series),
    })
}

/// Delta^c(t) on the matched sample grid of two trajectories.
pub fn delta_series(traj_r: &Trajectory, traj_c: &Trajectory) -> Result<Vec<(f64, f64)>> {
    if traj_r.samples.len() != traj_c.samples.len() {
        return Err(Error::Mismatch(format!(
            "sample counts differ: {} vs {}",
            traj_r.samples.len(),
            traj_c.samples.len()
        )));
    }
    traj_r
        .samples
        .iter()
        .zip(&traj_c.samples)
        .map(|(r, c)| Ok((r.t, delta_c(r, c)?)))
        .collect()
}

/// Log-log slope fit over the strictly positive entries.
pub fn fit_loglog(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let pairs: Vec<(f64, f64)> = x
        .iter()
        .zip(y)
        .filter(|(_, &v)| v > 0.0)
        .map(|(&a, &b)| (a.ln(), b.ln()))
        .collect();
    if pairs.len() < 2 {
        return (f64::NAN, f64::NAN, 0.0);
    }
    let xs: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    linear_fit(&xs, &ys)
}

/// Runs `f` over the keys, in parallel when the thread knob exceeds 1.
/// Output order always matches input order.
pub fn run_keyed<K, T, F>(keys: &[K], f: F) -> Result<Vec<T>>
where
    K: Sync,
    T: Send,
    F: Fn(&K) -> Result<T> + Sync,
{
    let threads = thread_count();
    if threads <= 1 || keys.len() <= 1 {
        return keys.iter().map(&f).collect();
    }
    let mut out: Vec<Option<Result<T>>> = (0..keys.len()).map(|_| None).collect();
    std::thread::scope(|scope| {
        let mut slots: Vec<&mut Option<Result<T>>> = out.iter_mut().collect();
        let mut handles = Vec::new();
        for (key, slot) in keys.iter().zip(slots.drain(..)) {
            let f = &f;
            handles.push(scope.spawn(move || {
                *slot = Some(f(key));
            }));
        }
        for h in handles {
            let _ = h.join();
        }
    });
    out.into_iter().map(|r| r.expect("worker finished")).collect()
}
