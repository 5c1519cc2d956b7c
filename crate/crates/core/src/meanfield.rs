//! Kinetic model at the empirical-measure level: cloud sampling from initial
//! measure specs, exact discrete 1-Wasserstein distance via optimal
//! assignment, the W2 coupling bound, and the kinetic-limit scans.
//!
//! The kinetic equation is simulated exclusively through its characteristics,
//! which for an empirical initial measure coincide with the N-particle flow.

use crate::climit::{delta_c, fit_loglog, run_keyed};
use crate::diagnostics::flocking_certificate;
use crate::dynamics::{project_zero_sum, EnsembleState, ModelKind};
use crate::error::{Error, Result};
use crate::integrator::{simulate, SimConfig, Trajectory};
use crate::relativity::ModelParams;
use crate::vec3::Vec3;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Compactly supported initial measures the lab can sample from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MeasureSpec {
    UniformBox {
        x_halfwidth: f64,
        w_halfwidth: f64,
    },
    GaussianTruncated {
        x_sigma: f64,
        x_cut: f64,
        w_sigma: f64,
        w_cut: f64,
    },
    TwoCluster {
        separation: f64,
        x_halfwidth: f64,
        w_halfwidth: f64,
    },
}

/// Equal-weight atomic cloud in position-momentum space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointCloud6D {
    pub x: Vec<Vec3>,
    pub w: Vec<Vec3>,
}

impl PointCloud6D {
    pub fn n(&self) -> usize {
        self.x.len()
    }

    pub fn from_state(state: &EnsembleState) -> Self {
        PointCloud6D {
            x: state.x.clone(),
            w: state.w.clone(),
        }
    }

    pub fn to_state(&self, t: f64) -> EnsembleState {
        EnsembleState::new(t, self.x.clone(), self.w.clone())
    }

    /// Euclidean distance in R^6 between atom `a` of self and atom `b` of other.
    pub fn dist(&self, a: usize, other: &PointCloud6D, b: usize) -> f64 {
        ((self.x[a] - other.x[b]).norm_sq() + (self.w[a] - other.w[b]).norm_sq()).sqrt()
    }
}

/// Seeded, reproducible sampling; w-components are mean-projected to zero.
pub fn sample_cloud(spec: &MeasureSpec, n: usize, seed: u64) -> PointCloud6D {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = Vec::with_capacity(n);
    let mut w = Vec::with_capacity(n);
    let truncated_normal = |rng: &mut ChaCha8Rng, sigma: f64, cut: f64| -> f64 {
        // Box-Muller with rejection outside the cut
        loop {
            let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
            let u2: f64 = rng.gen_range(0.0..1.0);
            let z = (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos() * sigma;
            if z.abs() <= cut {
                return z;
            }
        }
    };
    for i in 0..n {
        match *spec {
            MeasureSpec::UniformBox { x_halfwidth, w_halfwidth } => {
                x.push(Vec3::new(
                    rng.gen_range(-x_halfwidth..=x_halfwidth),
                    rng.gen_range(-x_halfwidth..=x_halfwidth),
                    rng.gen_range(-x_halfwidth..=x_halfwidth),
                ));
                w.push(if w_halfwidth > 0.0 {
                    Vec3::new(
                        rng.gen_range(-w_halfwidth..=w_halfwidth),
                        rng.gen_range(-w_halfwidth..=w_halfwidth),
                        rng.gen_range(-w_halfwidth..=w_halfwidth),
                    )
                } else {
                    Vec3::ZERO
                });
            }
            MeasureSpec::GaussianTruncated { x_sigma, x_cut, w_sigma, w_cut } => {
                x.push(Vec3::new(
                    truncated_normal(&mut rng, x_sigma, x_cut),
                    truncated_normal(&mut rng, x_sigma, x_cut),
                    truncated_normal(&mut rng, x_sigma, x_cut),
                ));
                w.push(Vec3::new(
                    truncated_normal(&mut rng, w_sigma, w_cut),
                    truncated_normal(&mut rng, w_sigma, w_cut),
                    truncated_normal(&mut rng, w_sigma, w_cut),
                ));
            }
            MeasureSpec::TwoCluster { separation, x_halfwidth, w_halfwidth } => {
                let center = if i % 2 == 0 { separation / 2.0 } else { -separation / 2.0 };
                x.push(Vec3::new(
                    center + rng.gen_range(-x_halfwidth..=x_halfwidth),
                    rng.gen_range(-x_halfwidth..=x_halfwidth),
                    rng.gen_range(-x_halfwidth..=x_halfwidth),
                ));
                w.push(if w_halfwidth > 0.0 {
                    Vec3::new(
                        rng.gen_range(-w_halfwidth..=w_halfwidth),
                        rng.gen_range(-w_halfwidth..=w_halfwidth),
                        rng.gen_range(-w_halfwidth..=w_halfwidth),
                    )
                } else {
                    Vec3::ZERO
                });
            }
        }
    }
    project_zero_sum(&mut w);
    PointCloud6D { x, w }
}

/// Permutation coupling between two equal-size clouds and its mean cost.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransportPlan {
    pub permutation: Vec<usize>,
    pub cost: f64,
}

/// Exact W1 between equal-weight empirical measures of equal size, reduced to
/// the linear assignment problem with Euclidean R^6 costs and solved by the
/// O(N^3) Hungarian method with potentials.
pub fn wasserstein1_exact(a: &PointCloud6D, b: &PointCloud6D) -> Result<(f64, TransportPlan)> {
    if a.n() != b.n() {
        return Err(Error::Mismatch(format!(
            "cloud sizes differ: {} vs {} (unbalanced transport unsupported)",
            a.n(),
            b.n()
        )));
    }
    let n = a.n();
    let cost: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| a.dist(i, b, j)).collect())
        .collect();
    let perm = solve_assignment(&cost);
    let total: f64 = (0..n).map(|i| cost[i][perm[i]]).sum();
    let mean = total / n as f64;
    Ok((
        mean,
        TransportPlan {
            permutation: perm,
            cost: mean,
        },
    ))
}

/// Hungarian method with row/column potentials; returns for each row the
/// assigned column of a minimum-cost perfect matching.
pub fn solve_assignment(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    let inf = f64::INFINITY;
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut col_row = vec![0usize; n + 1]; // row matched to column j (1-based), 0 = free
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        col_row[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = col_row[j0];
            let mut delta = inf;
            let mut j1 = 0usize;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[col_row[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if col_row[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            col_row[j0] = col_row[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut perm = vec![0usize; n];
    for j in 1..=n {
        perm[col_row[j] - 1] = j - 1;
    }
    perm
}

/// sqrt(Delta^c(t)) at one matched sample: the diagonal-coupling upper bound
/// on W2, hence on W1.
pub fn wasserstein2_coupling_bound(traj_r: &Trajectory, traj_c: &Trajectory, at_sample: usize) -> Result<f64> {
    let r = traj_r
        .samples
        .get(at_sample)
        .ok_or_else(|| Error::Mismatch(format!("sample index {at_sample} out of range")))?;
    let c = traj_c
        .samples
        .get(at_sample)
        .ok_or_else(|| Error::Mismatch(format!("sample index {at_sample} out of range")))?;
    Ok(delta_c(r, c)?.sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KineticScanResult {
    pub c_values: Vec<f64>,
    pub sup_w1: Vec<f64>,
    pub sup_bound: Vec<f64>,
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub coupling_bound_ok: bool,
}

/// For each c: run the relativistic and classical characteristic flows from
/// the same sampled cloud, take the supremum over (strided) samples of the
/// exact W1 between the two empirical measures, and fit the log-log slope.
pub fn kinetic_limit_scan(
    spec: &MeasureSpec,
    n: usize,
    c_values: &[f64],
    params_template: &ModelParams,
    config: &SimConfig,
    seed: u64,
    w1_stride: usize,
) -> Result<KineticScanResult> {
    if c_values.len() < 3 {
        return Err(Error::Config {
            key: "c_values".into(),
            message: "need at least 3 entries for a slope fit".into(),
        });
    }
    let cloud = sample_cloud(spec, n, seed);
    let init = cloud.to_state(0.0);
    let mut params_n = params_template.clone();
    params_n.agents = vec![params_template.agents[0]; n];
    let cs_config = SimConfig {
        model: ModelKind::Cs,
        ..*config
    };
    let traj_cs = simulate(&init, &params_n, &cs_config)?;
    let stride = w1_stride.max(1);
    let run_one = |&c: &f64| -> Result<(f64, f64, bool)> {
        let params = ModelParams { c, ..params_n.clone() };
        let cert = flocking_certificate(&init, &params)?;
        if !cert.satisfied {
            return Err(Error::Uncertified(format!("kinetic scan at c = {c}")));
        }
        let rcs_config = SimConfig {
            model: ModelKind::Rcs,
            ..*config
        };
        let traj_rcs = simulate(&init, &params, &rcs_config)?;
        let mut sup_w1 = 0.0f64;
        let mut sup_bound = 0.0f64;
        let mut coupling_ok = true;
        let count = traj_rcs.samples.len();
        for idx in (0..count).step_by(stride) {
            let ar = PointCloud6D::from_state(&traj_rcs.samples[idx]);
            let ac = PointCloud6D::from_state(&traj_cs.samples[idx]);
            let (w1, _) = wasserstein1_exact(&ar, &ac)?;
            let bound = wasserstein2_coupling_bound(&traj_rcs, &traj_cs, idx)?;
            if w1 > bound + 1e-12 {
                coupling_ok = false;
            }
            sup_w1 = sup_w1.max(w1);
            sup_bound = sup_bound.max(bound);
        }
        Ok((sup_w1, sup_bound, coupling_ok))
    };
    let results = run_keyed(c_values, run_one)?;
    let sup_w1: Vec<f64> = results.iter().map(|r| r.0).collect();
    let sup_bound: Vec<f64> = results.iter().map(|r| r.1).collect();
    let coupling_bound_ok = results.iter().all(|r| r.2);
    let (slope, intercept, r_squared) = fit_loglog(c_values, &sup_w1);
    Ok(KineticScanResult {
        c_values: c_values.to_vec(),
        sup_w1,
        sup_bound,
        slope,
        intercept,
        r_squared,
        coupling_bound_ok,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanfieldScanResult {
    pub n_values: Vec<usize>,
    pub sup_w1: Vec<f64>,
    pub decreasing_trend: bool,
}

/// Self-consistency check of the mean-field limit: sup_t W1 between the N- and
/// 2N-particle empirical flows, for each N in the ladder. The N-cloud atoms are
/// duplicated so both sides present 2N equal-weight atoms to the assignment
/// solver, which is exact for uniform measures.
pub fn meanfield_convergence_scan(
    spec: &MeasureSpec,
    n_values: &[usize],
    params_template: &ModelParams,
    config: &SimConfig,
    seed: u64,
    w1_stride: usize,
) -> Result<MeanfieldScanResult> {
    if n_values.len() < 3 {
        return Err(Error::Config {
            key: "n_values".into(),
            message: "need at least 3 entries for a trend check".into(),
        });
    }
    let stride = w1_stride.max(1);
    let run_one = |&n: &usize| -> Result<f64> {
        let run = |count: usize, seed: u64| -> Result<Trajectory> {
            let cloud = sample_cloud(spec, count, seed);
            let init = cloud.to_state(0.0);
            let mut params = params_template.clone();
            params.agents = vec![params_template.agents[0]; count];
            simulate(&init, &params, config)
        };
        let traj_n = run(n, seed)?;
        let traj_2n = run(2 * n, seed.wrapping_add(1))?;
        let mut sup = 0.0f64;
        let count = traj_n.samples.len().min(traj_2n.samples.len());
        for idx in (0..count).step_by(stride) {
            let small = PointCloud6D::from_state(&traj_n.samples[idx]);
            // duplicate atoms so both clouds carry 2N atoms of weight 1/(2N)
            let doubled = PointCloud6D {
                x: small.x.iter().chain(small.x.iter()).copied().collect(),
                w: small.w.iter().chain(small.w.iter()).copied().collect(),
            };
            let big = PointCloud6D::from_state(&traj_2n.samples[idx]);
            let (w1, _) = wasserstein1_exact(&doubled, &big)?;
            sup = sup.max(w1);
        }
        Ok(sup)
    };
    let sup_w1 = run_keyed(n_values, run_one)?;
    let decreasing_trend = sup_w1.last().unwrap() < sup_w1.first().unwrap();
    Ok(MeanfieldScanResult {
        n_values: n_values.to_vec(),
        sup_w1,
        decreasing_trend,
    })
}

/// Decay exponent of kinetic flocking: phi(Dx_inf) - 2 Lambda2/c^2, with no
/// 1/T* factor.
pub fn kinetic_flocking_rate(cert: &crate::diagnostics::FlockingCertificate, params: &ModelParams) -> Result<f64> {
    let phi = params.kernel.eval(cert.dx_inf)?;
    Ok(phi - 2.0 * cert.lambda2 / (params.c * params.c))
}
