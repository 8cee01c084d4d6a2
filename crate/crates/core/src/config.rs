//! Experiment configuration: flat `key = value` files with per-key overrides.
//!
//! Every key that is not given takes the canonical setting
//! `p_q = 0.8, k_hn = 1, r = 24, w_l = 100, d = 256, w_s = 20, e = 100,
//! v_l = 0.8, alpha_0 = 1, j = 100, t = 3, k_nn = 3, gamma = 0.9`.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qwalk::ExploitRule;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Policy {
    Qwalk,
    Biased,
    Uniform,
}

impl FromStr for Policy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "qwalk" => Ok(Self::Qwalk),
            "biased" => Ok(Self::Biased),
            "uniform" => Ok(Self::Uniform),
            other => Err(Error::Config(format!(
                "unknown policy `{other}` (expected qwalk|biased|uniform)"
            ))),
        }
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Qwalk => "qwalk",
            Self::Biased => "biased",
            Self::Uniform => "uniform",
        })
    }
}

/// Which nodes are scored by cross-validation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EvalScope {
    /// Every labelled node. For label-aware policies each fold gets its own
    /// embedding whose visible labels come from the training folds only.
    #[default]
    All,
    /// Only nodes hidden from the confidence learner, with a single embedding.
    Hidden,
}

impl FromStr for EvalScope {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "all" => Ok(Self::All),
            "hidden" => Ok(Self::Hidden),
            other => Err(Error::Config(format!(
                "unknown eval scope `{other}` (expected all|hidden)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub graph_path: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub labels_path: Option<PathBuf>,
    pub directed: bool,
    pub policy: Policy,
    /// Fraction of labelled nodes visible to the confidence learner.
    pub v_l: f64,
    /// Neighborhood radius of the confidence learner.
    pub k_hn: usize,
    /// Confidence iterations.
    pub t: usize,
    pub alpha_0: f64,
    pub gamma: f64,
    /// Q-learning epochs.
    pub j: usize,
    /// Exploitation probability of the Q-walk.
    pub p_q: f64,
    pub exploit: ExploitRule,
    /// Walks per node.
    pub r: usize,
    pub w_l: usize,
    /// Embedding dimension.
    pub d: usize,
    /// Skip-gram window.
    pub w_s: usize,
    /// Skip-gram epochs.
    pub e: usize,
    pub negatives: usize,
    pub lr: f64,
    pub noise_exponent: f64,
    /// Skip-gram worker threads; 1 trains deterministically.
    pub threads: usize,
    pub k_nn: usize,
    pub folds: usize,
    pub eval_scope: EvalScope,
    /// Return parameter of the biased baseline.
    pub p: f64,
    /// In-out parameter of the biased baseline.
    pub q: f64,
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            graph_path: None,
            labels_path: None,
            directed: false,
            policy: Policy::Qwalk,
            v_l: 0.8,
            k_hn: 1,
            t: 3,
            alpha_0: 1.0,
            gamma: 0.9,
            j: 100,
            p_q: 0.8,
            exploit: ExploitRule::CurrentNode,
            r: 24,
            w_l: 100,
            d: 256,
            w_s: 20,
            e: 100,
            negatives: 5,
            lr: 0.025,
            noise_exponent: 0.75,
            threads: 1,
            k_nn: 3,
            folds: 5,
            eval_scope: EvalScope::All,
            p: 0.25,
            q: 0.5,
            seed: 0,
        }
    }
}

/// Keys accepted by [`ExperimentConfig::set`].
pub const PARAMETERS: &[&str] = &[
    "graph_path", "labels_path", "directed", "policy", "v_l", "k_hn", "t", "alpha_0",
    "gamma", "j", "p_q", "exploit", "r", "w_l", "d", "w_s", "e", "negatives", "lr",
    "noise_exponent", "threads", "k_nn", "folds", "eval_scope", "p", "q", "seed",
];

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: fmt::Display,
{
    value
        .trim()
        .parse()
        .map_err(|e| Error::Config(format!("{key}: cannot parse `{value}`: {e}")))
}

impl ExperimentConfig {
    /// Parses a config file; absent keys take their defaults.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    /// Fully resolved config, every key written out.
    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Sets one field from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "graph_path" => self.graph_path = Some(PathBuf::from(value)),
            "labels_path" => self.labels_path = Some(PathBuf::from(value)),
            "directed" => self.directed = parse_value(key, value)?,
            "policy" => self.policy = value.trim().parse()?,
            "v_l" => self.v_l = parse_value(key, value)?,
            "k_hn" => self.k_hn = parse_value(key, value)?,
            "t" => self.t = parse_value(key, value)?,
            "alpha_0" => self.alpha_0 = parse_value(key, value)?,
            "gamma" => self.gamma = parse_value(key, value)?,
            "j" => self.j = parse_value(key, value)?,
            "p_q" => self.p_q = parse_value(key, value)?,
            "exploit" => self.exploit = value.trim().parse()?,
            "r" => self.r = parse_value(key, value)?,
            "w_l" => self.w_l = parse_value(key, value)?,
            "d" => self.d = parse_value(key, value)?,
            "w_s" => self.w_s = parse_value(key, value)?,
            "e" => self.e = parse_value(key, value)?,
            "negatives" => self.negatives = parse_value(key, value)?,
            "lr" => self.lr = parse_value(key, value)?,
            "noise_exponent" => self.noise_exponent = parse_value(key, value)?,
            "threads" => self.threads = parse_value(key, value)?,
            "k_nn" => self.k_nn = parse_value(key, value)?,
            "folds" => self.folds = parse_value(key, value)?,
            "eval_scope" => self.eval_scope = value.trim().parse()?,
            "p" => self.p = parse_value(key, value)?,
            "q" => self.q = parse_value(key, value)?,
            "seed" => self.seed = parse_value(key, value)?,
            other => return Err(Error::UnknownParameter(other.to_string())),
        }
        Ok(())
    }

    /// Applies `key=value` overrides in order.
    pub fn apply_overrides<'a>(&mut self, pairs: impl IntoIterator<Item = &'a str>) -> Result<()> {
        for pair in pairs {
            let (key, value) = pair
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("override `{pair}` is not key=value")))?;
            self.set(key.trim(), value)?;
        }
        self.validate()
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if !(self.v_l > 0.0 && self.v_l <= 1.0) {
            return fail(format!("v_l must lie in (0, 1], got {}", self.v_l));
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return fail(format!("gamma must lie in [0, 1], got {}", self.gamma));
        }
        if !(0.0..=1.0).contains(&self.p_q) {
            return fail(format!("p_q must lie in [0, 1], got {}", self.p_q));
        }
        for (name, v) in [("alpha_0", self.alpha_0), ("lr", self.lr), ("p", self.p), ("q", self.q)] {
            if !(v.is_finite() && v > 0.0) {
                return fail(format!("{name} must be positive, got {v}"));
            }
        }
        if !self.noise_exponent.is_finite() {
            return fail("noise_exponent must be finite".into());
        }
        for (name, v) in [
            ("k_hn", self.k_hn),
            ("j", self.j),
            ("r", self.r),
            ("w_l", self.w_l),
            ("d", self.d),
            ("w_s", self.w_s),
            ("e", self.e),
            ("negatives", self.negatives),
            ("threads", self.threads),
            ("k_nn", self.k_nn),
        ] {
            if v == 0 {
                return fail(format!("{name} must be at least 1"));
            }
        }
        if self.folds < 2 {
            return fail(format!("folds must be at least 2, got {}", self.folds));
        }
        Ok(())
    }
}
