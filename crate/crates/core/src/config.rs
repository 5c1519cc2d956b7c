//! Plain-text `key = value` run configuration.
//!
//! Schema (one key per line, `#` starts a comment, order irrelevant):
//!
//! ```text
//! c            = 10        # required, > 0
//! n            = 8         # required, >= 1
//! kernel       = power_law # required: constant | power_law
//! beta         = 2.0       # required iff kernel = power_law, > 0
//! t_star       = 1         # default 1, > 0
//! k_b          = 1         # default 1, > 0
//! m            = 1         # default 1, > 0
//! d            = 3         # default 3, internal degrees of freedom, > 0
//! dt           = 0.01      # default min(1e-2, 0.1 t_star)
//! t_end        = 10        # default 10
//! sample_every = 10        # default 10
//! model        = rcs       # default rcs: rcs | cs
//! seed         = 0         # default 0
//! init.kind    = uniform_box  # default: uniform_box | gaussian_truncated | two_cluster
//! init.x_halfwidth = 0.5   # uniform_box / two_cluster, default 0.5
//! init.w_halfwidth = 0.05  # uniform_box / two_cluster, default 0.05
//! init.x_sigma = 0.5       # gaussian_truncated, default 0.5
//! init.x_cut   = 1.0       # gaussian_truncated, default 1.0
//! init.w_sigma = 0.05      # gaussian_truncated, default 0.05
//! init.w_cut   = 0.1       # gaussian_truncated, default 0.1
//! init.separation = 2.0    # two_cluster, default 2.0
//! scan.k       = 0         # climit perturbation amplitude K, default 0
//! scan.w1_stride = 1       # evaluate W1 every k-th sample, default 1
//! band.climit.lo  = -4.4   # default slope bands, lo < hi
//! band.climit.hi  = -3.6
//! band.kinetic.lo = -2.5
//! band.kinetic.hi = -1.6
//! dx_inf       = 1.0       # reference diameter for the constants command
//! ```
//!
//! Unknown keys are rejected. Every parse error names the offending key.

use crate::dynamics::ModelKind;
use crate::error::{Error, Result};
use crate::integrator::SimConfig;
use crate::meanfield::MeasureSpec;
use crate::relativity::{KernelSpec, ModelParams};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub measure: MeasureSpec,
    pub k: f64,
    pub w1_stride: usize,
    pub band_climit: (f64, f64),
    pub band_kinetic: (f64, f64),
    pub dx_inf: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub params: ModelParams,
    pub sim: SimConfig,
    pub scenario: Scenario,
}

fn cfg_err(key: &str, message: impl Into<String>) -> Error {
    Error::Config {
        key: key.to_string(),
        message: message.into(),
    }
}

struct KeyMap {
    entries: BTreeMap<String, String>,
    consumed: std::cell::RefCell<std::collections::BTreeSet<String>>,
}

impl KeyMap {
    fn get(&self, key: &str) -> Option<&str> {
        self.consumed.borrow_mut().insert(key.to_string());
        self.entries.get(key).map(|s| s.as_str())
    }

    fn f64_or(&self, key: &str, default: f64) -> Result<f64> {
        match self.get(key) {
            None => Ok(default),
            Some(raw) => raw
                .parse::<f64>()
                .map_err(|_| cfg_err(key, format!("not a number: {raw:?}"))),
        }
    }

    fn f64_req(&self, key: &str) -> Result<f64> {
        match self.get(key) {
            None => Err(cfg_err(key, "missing required key")),
            Some(raw) => raw
                .parse::<f64>()
                .map_err(|_| cfg_err(key, format!("not a number: {raw:?}"))),
        }
    }

    fn usize_or(&self, key: &str, default: usize) -> Result<usize> {
        match self.get(key) {
            None => Ok(default),
            Some(raw) => raw
                .parse::<usize>()
                .map_err(|_| cfg_err(key, format!("not a nonnegative integer: {raw:?}"))),
        }
    }

    fn u64_or(&self, key: &str, default: u64) -> Result<u64> {
        match self.get(key) {
            None => Ok(default),
            Some(raw) => raw
                .parse::<u64>()
                .map_err(|_| cfg_err(key, format!("not a nonnegative integer: {raw:?}"))),
        }
    }
}

pub fn parse_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)?;
    parse_config_str(&text)
}

pub fn parse_config_str(text: &str) -> Result<RunConfig> {
    let mut entries = BTreeMap::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            cfg_err(
                &format!("line {}", lineno + 1),
                format!("expected `key = value`, got {line:?}"),
            )
        })?;
        let key = key.trim().to_string();
        let value = value.trim().to_string();
        if entries.insert(key.clone(), value).is_some() {
            return Err(cfg_err(&key, "duplicate key"));
        }
    }
    let map = KeyMap {
        entries,
        consumed: Default::default(),
    };

    let positive = |key: &str, v: f64| -> Result<f64> {
        if v > 0.0 && v.is_finite() {
            Ok(v)
        } else {
            Err(cfg_err(key, format!("must be > 0 and finite, got {v}")))
        }
    };
    let nonneg = |key: &str, v: f64| -> Result<f64> {
        if v >= 0.0 && v.is_finite() {
            Ok(v)
        } else {
            Err(cfg_err(key, format!("must be >= 0 and finite, got {v}")))
        }
    };

    let c = positive("c", map.f64_req("c")?)?;
    let n_raw = map.get("n").ok_or_else(|| cfg_err("n", "missing required key"))?;
    let n: usize = n_raw
        .parse()
        .map_err(|_| cfg_err("n", format!("not a positive integer: {n_raw:?}")))?;
    if n == 0 {
        return Err(cfg_err("n", "must be >= 1"));
    }
    let kernel = match map.get("kernel") {
        None => return Err(cfg_err("kernel", "missing required key")),
        Some("constant") => {
            if map.get("beta").is_some() {
                return Err(cfg_err("beta", "only valid with kernel = power_law"));
            }
            KernelSpec::Constant
        }
        Some("power_law") => KernelSpec::PowerLaw {
            beta: positive("beta", map.f64_req("beta")?)?,
        },
        Some(other) => {
            return Err(cfg_err(
                "kernel",
                format!("unknown kernel kind {other:?}; expected constant or power_law"),
            ))
        }
    };
    let t_star = positive("t_star", map.f64_or("t_star", 1.0)?)?;
    let k_b = positive("k_b", map.f64_or("k_b", 1.0)?)?;
    let m = positive("m", map.f64_or("m", 1.0)?)?;
    let d = positive("d", map.f64_or("d", 3.0)?)?;
    let params = ModelParams::uniform(c, t_star, k_b, m, d, n, kernel);
    params.validate()?;

    let dt = positive("dt", map.f64_or("dt", f64::min(1e-2, 0.1 * t_star))?)?;
    let t_end = positive("t_end", map.f64_or("t_end", 10.0)?)?;
    let sample_every = map.usize_or("sample_every", 10)?;
    let model = match map.get("model").unwrap_or("rcs") {
        "rcs" => ModelKind::Rcs,
        "cs" => ModelKind::Cs,
        other => {
            return Err(cfg_err(
                "model",
                format!("unknown model {other:?}; expected rcs or cs"),
            ))
        }
    };
    let seed = map.u64_or("seed", 0)?;
    let sim = SimConfig {
        dt,
        t_end,
        sample_every,
        model,
        seed,
    };
    sim.validate()?;

    let measure = match map.get("init.kind").unwrap_or("uniform_box") {
        "uniform_box" => MeasureSpec::UniformBox {
            x_halfwidth: positive("init.x_halfwidth", map.f64_or("init.x_halfwidth", 0.5)?)?,
            w_halfwidth: nonneg("init.w_halfwidth", map.f64_or("init.w_halfwidth", 0.05)?)?,
        },
        "gaussian_truncated" => MeasureSpec::GaussianTruncated {
            x_sigma: positive("init.x_sigma", map.f64_or("init.x_sigma", 0.5)?)?,
            x_cut: positive("init.x_cut", map.f64_or("init.x_cut", 1.0)?)?,
            w_sigma: positive("init.w_sigma", map.f64_or("init.w_sigma", 0.05)?)?,
            w_cut: positive("init.w_cut", map.f64_or("init.w_cut", 0.1)?)?,
        },
        "two_cluster" => MeasureSpec::TwoCluster {
            separation: nonneg("init.separation", map.f64_or("init.separation", 2.0)?)?,
            x_halfwidth: positive("init.x_halfwidth", map.f64_or("init.x_halfwidth", 0.5)?)?,
            w_halfwidth: nonneg("init.w_halfwidth", map.f64_or("init.w_halfwidth", 0.05)?)?,
        },
        other => {
            return Err(cfg_err(
                "init.kind",
                format!("unknown initial measure {other:?}"),
            ))
        }
    };
    // touch measure keys irrelevant to the chosen kind so they are not
    // reported as unknown; values were not applied
    for key in [
        "init.x_halfwidth",
        "init.w_halfwidth",
        "init.x_sigma",
        "init.x_cut",
        "init.w_sigma",
        "init.w_cut",
        "init.separation",
    ] {
        map.get(key);
    }

    let scenario = Scenario {
        measure,
        k: nonneg("scan.k", map.f64_or("scan.k", 0.0)?)?,
        w1_stride: map.usize_or("scan.w1_stride", 1)?.max(1),
        band_climit: (
            map.f64_or("band.climit.lo", -4.4)?,
            map.f64_or("band.climit.hi", -3.6)?,
        ),
        band_kinetic: (
            map.f64_or("band.kinetic.lo", -2.5)?,
            map.f64_or("band.kinetic.hi", -1.6)?,
        ),
        dx_inf: positive("dx_inf", map.f64_or("dx_inf", 1.0)?)?,
    };
    for (band, key) in [
        (scenario.band_climit, "band.climit.lo"),
        (scenario.band_kinetic, "band.kinetic.lo"),
    ] {
        if band.0 >= band.1 {
            return Err(cfg_err(key, "band lower bound must be below upper bound"));
        }
    }

    let consumed = map.consumed.borrow();
    for key in map.entries.keys() {
        if !consumed.contains(key) {
            return Err(cfg_err(key, "unknown key"));
        }
    }
    Ok(RunConfig {
        params,
        sim,
        scenario,
    })
}

/// Full echo of the configuration, defaults included. Parsing the result
/// reproduces the configuration exactly.
pub fn serialize_config(cfg: &RunConfig) -> String {
    let mut out = String::new();
    let mut push = |key: &str, value: String| {
        out.push_str(key);
        out.push_str(" = ");
        out.push_str(&value);
        out.push('\n');
    };
    let fnum = |v: f64| {
        let s = format!("{v:.17e}");
        debug_assert_eq!(s.parse::<f64>().unwrap(), v);
        s
    };
    push("c", fnum(cfg.params.c));
    push("n", cfg.params.agents.len().to_string());
    match cfg.params.kernel {
        KernelSpec::Constant => push("kernel", "constant".into()),
        KernelSpec::PowerLaw { beta } => {
            push("kernel", "power_law".into());
            push("beta", fnum(beta));
        }
    }
    push("t_star", fnum(cfg.params.t_star));
    push("k_b", fnum(cfg.params.k_b));
    push("m", fnum(cfg.params.agents[0].m));
    push("d", fnum(cfg.params.agents[0].d));
    push("dt", fnum(cfg.sim.dt));
    push("t_end", fnum(cfg.sim.t_end));
    push("sample_every", cfg.sim.sample_every.to_string());
    push("model", cfg.sim.model.to_string());
    push("seed", cfg.sim.seed.to_string());
    match cfg.scenario.measure {
        MeasureSpec::UniformBox { x_halfwidth, w_halfwidth } => {
            push("init.kind", "uniform_box".into());
            push("init.x_halfwidth", fnum(x_halfwidth));
            push("init.w_halfwidth", fnum(w_halfwidth));
        }
        MeasureSpec::GaussianTruncated { x_sigma, x_cut, w_sigma, w_cut } => {
            push("init.kind", "gaussian_truncated".into());
            push("init.x_sigma", fnum(x_sigma));
            push("init.x_cut", fnum(x_cut));
            push("init.w_sigma", fnum(w_sigma));
            push("init.w_cut", fnum(w_cut));
        }
        MeasureSpec::TwoCluster { separation, x_halfwidth, w_halfwidth } => {
            push("init.kind", "two_cluster".into());
            push("init.separation", fnum(separation));
            push("init.x_halfwidth", fnum(x_halfwidth));
            push("init.w_halfwidth", fnum(w_halfwidth));
        }
    }
    push("scan.k", fnum(cfg.scenario.k));
    push("scan.w1_stride", cfg.scenario.w1_stride.to_string());
    push("band.climit.lo", fnum(cfg.scenario.band_climit.0));
    push("band.climit.hi", fnum(cfg.scenario.band_climit.1));
    push("band.kinetic.lo", fnum(cfg.scenario.band_kinetic.0));
    push("band.kinetic.hi", fnum(cfg.scenario.band_kinetic.1));
    push("dx_inf", fnum(cfg.scenario.dx_inf));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "c = 10\nn = 8\nkernel = constant\n";

    #[test]
    fn minimal_config_fills_defaults() {
        let cfg = parse_config_str(MINIMAL).unwrap();
        assert_eq!(cfg.params.c, 10.0);
        assert_eq!(cfg.params.agents.len(), 8);
        assert_eq!(cfg.params.kernel, KernelSpec::Constant);
        assert_eq!(cfg.params.k_b, 1.0);
        assert_eq!(cfg.params.agents[0].m, 1.0);
        assert_eq!(cfg.params.t_star, 1.0);
        assert_eq!(cfg.sim.dt, 1e-2);
        assert_eq!(cfg.sim.model, ModelKind::Rcs);
        assert_eq!(cfg.scenario.band_climit, (-4.4, -3.6));
        assert_eq!(cfg.scenario.band_kinetic, (-2.5, -1.6));
    }

    #[test]
    fn negative_c_names_key() {
        let err = parse_config_str("c = -1\nn = 8\nkernel = constant\n").unwrap_err();
        assert!(err.to_string().contains('c'), "{err}");
    }

    #[test]
    fn missing_required_keys() {
        for text in ["n = 8\nkernel = constant\n", "c = 10\nkernel = constant\n", "c = 10\nn = 8\n"] {
            assert!(parse_config_str(text).is_err());
        }
        assert!(parse_config_str("c = 10\nn = 8\nkernel = power_law\n").is_err());
    }

    #[test]
    fn unknown_key_rejected() {
        let err = parse_config_str(&format!("{MINIMAL}bogus = 1\n")).unwrap_err();
        assert!(err.to_string().contains("bogus"), "{err}");
        let err = parse_config_str(&format!("{MINIMAL}beta = 2\n")).unwrap_err();
        assert!(err.to_string().contains("beta"), "{err}");
    }

    #[test]
    fn unknown_enum_values() {
        assert!(parse_config_str(&format!("{MINIMAL}model = fast\n")).is_err());
        assert!(parse_config_str(&format!("{MINIMAL}init.kind = delta\n")).is_err());
        assert!(parse_config_str("c = 10\nn = 8\nkernel = gauss\n").is_err());
    }

    #[test]
    fn duplicate_and_malformed_lines() {
        assert!(parse_config_str(&format!("{MINIMAL}c = 11\n")).is_err());
        assert!(parse_config_str("c\nn = 8\nkernel = constant\n").is_err());
    }

    #[test]
    fn comments_and_whitespace() {
        let cfg = parse_config_str("# comment\n  c=10 # inline\n\nn =8\nkernel= constant\n").unwrap();
        assert_eq!(cfg.params.c, 10.0);
    }

    #[test]
    fn round_trip_identity() {
        let text = format!(
            "{MINIMAL}beta = \n"
        );
        let _ = text; // power_law variant exercised below
        let full = "c = 20\nn = 4\nkernel = power_law\nbeta = 2.5\nt_star = 0.5\nmodel = cs\nseed = 9\n\
                    init.kind = two_cluster\ninit.separation = 3\nscan.k = 1\ndx_inf = 2.0\n";
        for text in [MINIMAL.to_string(), full.to_string()] {
            let cfg = parse_config_str(&text).unwrap();
            let echoed = serialize_config(&cfg);
            let cfg2 = parse_config_str(&echoed).unwrap();
            assert_eq!(cfg, cfg2);
            assert_eq!(echoed, serialize_config(&cfg2));
        }
    }

    #[test]
    fn band_ordering_checked() {
        let err = parse_config_str(&format!("{MINIMAL}band.climit.lo = -3\nband.climit.hi = -4\n")).unwrap_err();
        assert!(err.to_string().contains("band"), "{err}");
    }
}
