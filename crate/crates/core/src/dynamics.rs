//! Right-hand sides of the relativistic and classical Cucker-Smale particle
//! systems, plus initial-data preparation (zero-sum projection of w).

use crate::error::{Error, Result};
use crate::relativity::ModelParams;
use crate::vec3::Vec3;
use serde::{Deserialize, Serialize};

/// Time plus N agent records. For the RCS model `w` holds generalized momenta;
/// for the classical CS model it holds velocities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleState {
    pub t: f64,
    pub x: Vec<Vec3>,
    pub w: Vec<Vec3>,
}

impl EnsembleState {
    pub fn new(t: f64, x: Vec<Vec3>, w: Vec<Vec3>) -> Self {
        assert_eq!(x.len(), w.len());
        EnsembleState { t, x, w }
    }

    pub fn n(&self) -> usize {
        self.x.len()
    }

    pub fn is_finite(&self) -> bool {
        self.x.iter().all(|v| v.is_finite()) && self.w.iter().all(|v| v.is_finite())
    }

    /// Index of the first non-finite agent, if any.
    pub fn first_bad_agent(&self) -> Option<usize> {
        (0..self.n()).find(|&a| !self.x[a].is_finite() || !self.w[a].is_finite())
    }

    pub fn momentum_sum(&self) -> Vec3 {
        self.w.iter().fold(Vec3::ZERO, |acc, &w| acc + w)
    }

    pub fn max_w_norm(&self) -> f64 {
        self.w.iter().map(|w| w.norm()).fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Derivative {
    pub dx: Vec<Vec3>,
    pub dw: Vec<Vec3>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Rcs,
    Cs,
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ModelKind::Rcs => write!(f, "rcs"),
            ModelKind::Cs => write!(f, "cs"),
        }
    }
}

/// RCS field: dx_a = w_a/F_a, dw_a = (1/(N T*)) sum_b phi(|x_a - x_b|)(v_b - v_a).
///
/// The pairwise sum runs in fixed index order b = 1..N so repeated evaluations
/// are bitwise identical. F_a is resolved once per agent and reused.
pub fn rcs_rhs(state: &EnsembleState, params: &ModelParams) -> Result<Derivative> {
    let n = state.n();
    let mut v = Vec::with_capacity(n);
    for a in 0..n {
        v.push(params.v_from_w(state.w[a], a)?);
    }
    pairwise_alignment(state, params, &v)
}

/// Classical CS field: dx_a = w_a, dw_a = (1/(N T*)) sum_b phi(|x_a - x_b|)(w_b - w_a).
pub fn cs_rhs(state: &EnsembleState, params: &ModelParams) -> Result<Derivative> {
    pairwise_alignment(state, params, &state.w)
}

fn pairwise_alignment(state: &EnsembleState, params: &ModelParams, v: &[Vec3]) -> Result<Derivative> {
    let n = state.n();
    let scale = 1.0 / (n as f64 * params.t_star);
    let mut dw = vec![Vec3::ZERO; n];
    for a in 0..n {
        let mut acc = Vec3::ZERO;
        for b in 0..n {
            let phi = params.kernel.eval((state.x[a] - state.x[b]).norm())?;
            acc += (v[b] - v[a]) * phi;
        }
        dw[a] = acc * scale;
    }
    Ok(Derivative { dx: v.to_vec(), dw })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitMode {
    FromV,
    FromW,
}

/// Converts velocities to momenta when needed and projects w onto the zero-sum
/// hyperplane, which the flocking theory assumes of the initial data.
pub fn prepare_initial(
    positions: Vec<Vec3>,
    velocities_or_momenta: Vec<Vec3>,
    mode: InitMode,
    params: &ModelParams,
) -> Result<EnsembleState> {
    if positions.is_empty() || positions.len() != velocities_or_momenta.len() {
        return Err(Error::Mismatch(format!(
            "positions ({}) and momenta ({}) must be nonempty and equal-length",
            positions.len(),
            velocities_or_momenta.len()
        )));
    }
    let mut w = match mode {
        InitMode::FromW => velocities_or_momenta,
        InitMode::FromV => {
            let mut out = Vec::with_capacity(velocities_or_momenta.len());
            for (a, v) in velocities_or_momenta.into_iter().enumerate() {
                out.push(params.w_from_v(v, a)?);
            }
            out
        }
    };
    project_zero_sum(&mut w);
    Ok(EnsembleState::new(0.0, positions, w))
}

/// Subtracts the mean so the momenta sum to zero (up to roundoff).
pub fn project_zero_sum(w: &mut [Vec3]) {
    let n = w.len();
    if n == 0 {
        return;
    }
    let mean = w.iter().fold(Vec3::ZERO, |acc, &v| acc + v) / n as f64;
    for v in w.iter_mut() {
        *v -= mean;
    }
}
