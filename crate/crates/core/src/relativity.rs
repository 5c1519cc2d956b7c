//! Relativistic kernel: Lorentz factor, the momentum map w = F(w^2) v and its
//! inverse, the Jacobian A(z) = grad(z/F(z^2)), and the computable constants
//! Lambda0, Lambda1, Lambda2 that feed the flocking certificates.

use crate::error::{Error, Result};
use crate::vec3::Vec3;
use serde::{Deserialize, Serialize};

/// Communication kernel. `phi(0) = 1`, nonincreasing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KernelSpec {
    Constant,
    PowerLaw { beta: f64 },
}

impl KernelSpec {
    pub fn eval(&self, r: f64) -> Result<f64> {
        if r < 0.0 || !r.is_finite() {
            return Err(Error::Domain(format!("kernel argument r = {r} must be >= 0")));
        }
        Ok(match self {
            KernelSpec::Constant => 1.0,
            KernelSpec::PowerLaw { beta } => (1.0 + r * r).powf(-beta / 2.0),
        })
    }
}

/// Per-agent rest mass and degrees of freedom.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgentParams {
    pub m: f64,
    pub d: f64,
}

/// Physical constants of the model. `gamma_star` is always derived, never stored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub c: f64,
    pub t_star: f64,
    pub k_b: f64,
    pub agents: Vec<AgentParams>,
    pub kernel: KernelSpec,
}

impl ModelParams {
    /// Uniform ensemble with identical agents.
    pub fn uniform(c: f64, t_star: f64, k_b: f64, m: f64, d: f64, n: usize, kernel: KernelSpec) -> Self {
        ModelParams {
            c,
            t_star,
            k_b,
            agents: vec![AgentParams { m, d }; n],
            kernel,
        }
    }

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
        check(self.c > 0.0 && self.c.is_finite(), "c", "must be > 0")?;
        check(self.t_star > 0.0 && self.t_star.is_finite(), "t_star", "must be > 0")?;
        check(self.k_b > 0.0 && self.k_b.is_finite(), "k_b", "must be > 0")?;
        check(!self.agents.is_empty(), "agents", "need at least one agent")?;
        for (i, a) in self.agents.iter().enumerate() {
            check(a.m > 0.0 && a.m.is_finite(), &format!("agents[{i}].m"), "must be > 0")?;
            check(a.d >= 1.0 && a.d.is_finite(), &format!("agents[{i}].d"), "must be >= 1")?;
        }
        if let KernelSpec::PowerLaw { beta } = self.kernel {
            check(beta >= 0.0 && beta.is_finite(), "kernel.beta", "must be >= 0")?;
        }
        Ok(())
    }

    pub fn n_agents(&self) -> usize {
        self.agents.len()
    }

    /// Relativistic coldness gamma* = m c^2 / (k_B T*), recomputed on demand.
    pub fn gamma_star(&self, agent: usize) -> f64 {
        self.agents[agent].m * self.c * self.c / (self.k_b * self.t_star)
    }

    pub fn lorentz_from_v(&self, v: Vec3, _agent: usize) -> Result<f64> {
        let speed = v.norm();
        if speed >= self.c {
            return Err(Error::Superluminal { speed, c: self.c });
        }
        let ratio = speed / self.c;
        Ok(1.0 / (1.0 - ratio * ratio).sqrt())
    }

    /// F = (1 + (D+2) Gamma / (2 gamma*)) Gamma, as a function of the Lorentz factor.
    pub fn f_of_gamma(&self, gamma: f64, agent: usize) -> Result<f64> {
        if gamma < 1.0 || !gamma.is_finite() {
            return Err(Error::Domain(format!("Lorentz factor {gamma} must be >= 1")));
        }
        let d = self.agents[agent].d;
        let gs = self.gamma_star(agent);
        Ok((1.0 + (d + 2.0) * gamma / (2.0 * gs)) * gamma)
    }

    /// Forward map |w| as a function of Gamma: w^2 = c^2 (Gamma^2 - 1)(1 + (D+2)Gamma/(2 gamma*))^2.
    pub fn w_norm_from_gamma(&self, gamma: f64, agent: usize) -> f64 {
        let d = self.agents[agent].d;
        let gs = self.gamma_star(agent);
        self.c * (gamma * gamma - 1.0).max(0.0).sqrt() * (1.0 + (d + 2.0) * gamma / (2.0 * gs))
    }

    /// Inverts w^2 = c^2 (Gamma^2 - 1)(1 + (D+2)Gamma/(2 gamma*))^2 for Gamma >= 1.
    ///
    /// The right side is strictly increasing in Gamma, so the root is bracketed
    /// by doubling and polished by safeguarded Newton iterations.
    pub fn gamma_from_w(&self, w_norm: f64, agent: usize) -> Result<f64> {
        if w_norm < 0.0 || !w_norm.is_finite() {
            return Err(Error::Domain(format!("|w| = {w_norm} must be finite and >= 0")));
        }
        if w_norm == 0.0 {
            return Ok(1.0);
        }
        let d = self.agents[agent].d;
        let gs = self.gamma_star(agent);
        let c2 = self.c * self.c;
        let target = w_norm * w_norm;
        // g(Gamma) = c^2 (Gamma^2-1)(1 + k Gamma)^2 with k = (D+2)/(2 gamma*)
        let k = (d + 2.0) / (2.0 * gs);
        let g = |gamma: f64| {
            let f = 1.0 + k * gamma;
            c2 * (gamma * gamma - 1.0) * f * f
        };
        let dg = |gamma: f64| {
            let f = 1.0 + k * gamma;
            c2 * (2.0 * gamma * f * f + (gamma * gamma - 1.0) * 2.0 * f * k)
        };
        let mut lo = 1.0;
        let mut hi = 1.0 + w_norm / self.c + 1.0;
        while g(hi) < target {
            lo = hi;
            hi *= 2.0;
        }
        // Newton from the midpoint, clamped to the bracket; bisect on any misstep.
        let mut gamma = 0.5 * (lo + hi);
        for _ in 0..200 {
            let val = g(gamma) - target;
            if val > 0.0 {
                hi = gamma;
            } else {
                lo = gamma;
            }
            let step = val / dg(gamma);
            let mut next = gamma - step;
            if !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            if (next - gamma).abs() <= 1e-13 * gamma.max(1.0) {
                gamma = next;
                break;
            }
            gamma = next;
        }
        Ok(gamma.max(1.0))
    }

    /// v = w / F(w^2); always subluminal.
    pub fn v_from_w(&self, w: Vec3, agent: usize) -> Result<Vec3> {
        let gamma = self.gamma_from_w(w.norm(), agent)?;
        let f = self.f_of_gamma(gamma, agent)?;
        Ok(w / f)
    }

    /// w = Gamma (1 + (D+2) Gamma/(2 gamma*)) v.
    pub fn w_from_v(&self, v: Vec3, agent: usize) -> Result<Vec3> {
        let gamma = self.lorentz_from_v(v, agent)?;
        let f = self.f_of_gamma(gamma, agent)?;
        Ok(v * f)
    }

    /// Closed form of F'(z^2) as a function of Gamma.
    pub fn f_prime(&self, gamma: f64, agent: usize) -> Result<f64> {
        if gamma < 1.0 || !gamma.is_finite() {
            return Err(Error::Domain(format!("Lorentz factor {gamma} must be >= 1")));
        }
        let d = self.agents[agent].d;
        let gs = self.gamma_star(agent);
        let c2 = self.c * self.c;
        let num = 1.0 + (d + 2.0) * gamma / gs;
        let den = 2.0
            * c2
            * (1.0 + (d + 2.0) * gamma / (2.0 * gs))
            * ((d + 2.0) * gamma * gamma / gs + gamma - (d + 2.0) / (2.0 * gs));
        Ok(num / den)
    }

    /// A(z) = grad_z (z / F(z^2)), a symmetric 3x3 matrix.
    pub fn jacobian_a(&self, z: Vec3, agent: usize) -> Result<[[f64; 3]; 3]> {
        let gamma = self.gamma_from_w(z.norm(), agent)?;
        let f = self.f_of_gamma(gamma, agent)?;
        let fp = self.f_prime(gamma, agent)?;
        let coeff = 2.0 * fp / (f * f);
        let mut a = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                a[i][j] = if i == j { 1.0 / f } else { 0.0 } - coeff * z.0[i] * z.0[j];
            }
        }
        Ok(a)
    }

    /// Analytic eigenvalues of A(z): {1/F, 1/F, 1/F - 2 z^2 F'/F^2}.
    pub fn jacobian_a_eigenvalues(&self, z: Vec3, agent: usize) -> Result<[f64; 3]> {
        let gamma = self.gamma_from_w(z.norm(), agent)?;
        let f = self.f_of_gamma(gamma, agent)?;
        let fp = self.f_prime(gamma, agent)?;
        let small = 1.0 / f - 2.0 * z.norm_sq() * fp / (f * f);
        Ok([small, 1.0 / f, 1.0 / f])
    }

    /// Coercivity constant: min over z in [0, W0] of (F - 2 z^2 F')/F^2.
    pub fn lambda0(&self, w0: f64, agent: usize) -> Result<f64> {
        self.lambda0_with_grid(w0, agent, 1024)
    }

    pub fn lambda0_with_grid(&self, w0: f64, agent: usize, grid: usize) -> Result<f64> {
        if w0 < 0.0 || !w0.is_finite() {
            return Err(Error::Domain(format!("W0 = {w0} must be >= 0")));
        }
        let n = grid.max(2);
        let mut min = f64::INFINITY;
        for i in 0..=n {
            let z = w0 * i as f64 / n as f64;
            let gamma = self.gamma_from_w(z, agent)?;
            let f = self.f_of_gamma(gamma, agent)?;
            let fp = self.f_prime(gamma, agent)?;
            let q = (f - 2.0 * z * z * fp) / (f * f);
            if q < min {
                min = q;
            }
        }
        Ok(min)
    }

    /// Constant in |w - w/F| <= Lambda1 |w| / c^2, maximized over |w| <= W.
    pub fn lambda1(&self, w_bound: f64, agent: usize) -> Result<f64> {
        if w_bound < 0.0 || !w_bound.is_finite() {
            return Err(Error::Domain(format!("W = {w_bound} must be >= 0")));
        }
        let gamma = self.gamma_from_w(w_bound, agent)?;
        let f = self.f_of_gamma(gamma, agent)?;
        Ok(self.c * self.c * (1.0 - 1.0 / f))
    }

    /// Gradient-bound constant: c^2 times the analytic three-term majorant of
    /// |grad_z ((1/F - 1) z)|, evaluated at Gamma(W). Each summand is
    /// nondecreasing in Gamma, so the endpoint dominates [0, W].
    pub fn lambda2(&self, w_bound: f64, agent: usize) -> Result<f64> {
        if w_bound < 0.0 || !w_bound.is_finite() {
            return Err(Error::Domain(format!("W = {w_bound} must be >= 0")));
        }
        let gamma = self.gamma_from_w(w_bound, agent)?;
        let d = self.agents[agent].d;
        let m = self.agents[agent].m;
        let c2 = self.c * self.c;
        let kbt = self.k_b * self.t_star;
        let g2m1 = gamma * gamma - 1.0;
        let bound = g2m1 / (gamma + 1.0)
            + (d + 2.0) * kbt * gamma * gamma / (2.0 * m * c2)
            + g2m1 * (1.0 + (d + 2.0) * kbt * gamma / (m * c2));
        Ok(c2 * bound)
    }
}

/// The constants a flocking certificate is built from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RelConstants {
    pub lambda0: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda: f64,
    pub dx_inf: f64,
}
