use serde::Deserialize;
use std::path::{Path, PathBuf};
use tsa_core::bounds::QUANTITIES;
use tsa_core::generate::TightKind;
use tsa_core::{Caps, CardinalityProfile};

/// A configuration problem; exits with code 2.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "config error: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

pub fn bad(msg: impl Into<String>) -> anyhow::Error {
    ConfigError(msg.into()).into()
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TightSpec {
    pub kind: String,
    pub n: usize,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub sizes: Vec<(usize, usize)>,
    pub seeds: usize,
    /// Instance s of each size uses seed + s.
    pub seed: u64,
    /// Only "uniform-exponential": v ~ U[0,1], w ~ Exp(1).
    pub distribution: String,
    pub k_customer: Option<usize>,
    pub k_supplier: Option<usize>,
    pub instance: Option<PathBuf>,
    pub tight: Option<TightSpec>,
    pub time_limit_secs: Option<f64>,
    pub quantities: Option<Vec<String>>,
    pub caps: Caps,
    pub mc_runs: usize,
    pub static_runs: usize,
    pub trials: usize,
    pub alpha: f64,
    pub epsilon: f64,
    pub delta: f64,
    pub runs_override: Option<usize>,
    pub jobs: Option<usize>,
    pub out: Option<PathBuf>,
    pub timings: bool,
    pub policy: String,
    pub runs: usize,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            sizes: vec![(2, 2), (3, 3)],
            seeds: 20,
            seed: 0,
            distribution: "uniform-exponential".into(),
            k_customer: None,
            k_supplier: None,
            instance: None,
            tight: None,
            time_limit_secs: None,
            quantities: None,
            caps: Caps::default(),
            mc_runs: 10_000,
            static_runs: 20,
            trials: 16,
            alpha: tsa_core::fullstatic::ALPHA,
            epsilon: 0.1,
            delta: 0.05,
            runs_override: None,
            jobs: None,
            out: None,
            timings: false,
            policy: "sampling".into(),
            runs: 10_000,
        }
    }
}

impl Config {
    pub fn load(path: Option<&Path>) -> anyhow::Result<Config> {
        let Some(path) = path else {
            return Ok(Config::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| bad(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| bad(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        if self.seeds == 0 {
            return Err(bad("seeds must be at least 1"));
        }
        if self.sizes.is_empty() {
            return Err(bad("sizes must be nonempty"));
        }
        if self
            .sizes
            .iter()
            .any(|&(n, m)| n == 0 || m == 0 || n > 63 || m > 63)
        {
            return Err(bad("sizes must lie in 1..=63"));
        }
        if self.distribution != "uniform-exponential" {
            return Err(bad(format!("unknown distribution '{}'", self.distribution)));
        }
        if self.k_customer == Some(0) || self.k_supplier == Some(0) {
            return Err(bad("budgets must be at least 1"));
        }
        if let Some(q) = &self.quantities {
            if let Some(x) = q.iter().find(|x| !QUANTITIES.contains(&x.as_str())) {
                return Err(bad(format!(
                    "unknown quantity '{x}'; expected one of {}",
                    QUANTITIES.join(", ")
                )));
            }
        }
        if self
            .time_limit_secs
            .is_some_and(|t| !(t > 0.0 && t.is_finite()))
        {
            return Err(bad("time_limit_secs must be positive"));
        }
        if self.jobs == Some(0) {
            return Err(bad("jobs must be at least 1"));
        }
        if self.mc_runs == 0 || self.runs == 0 {
            return Err(bad("run counts must be at least 1"));
        }
        if let Some(t) = &self.tight {
            t.kind
                .parse::<TightKind>()
                .map_err(|e| bad(e.to_string()))?;
        }
        Ok(())
    }

    pub fn profile(&self) -> CardinalityProfile {
        match (self.k_customer, self.k_supplier) {
            (None, None) => CardinalityProfile::Unconstrained,
            (Some(k), None) => CardinalityProfile::OneWay {
                initiating: tsa_core::Side::Customers,
                k,
            },
            (None, Some(k)) => CardinalityProfile::OneWay {
                initiating: tsa_core::Side::Suppliers,
                k,
            },
            (Some(k_customer), Some(k_supplier)) => CardinalityProfile::TwoWay {
                k_customer,
                k_supplier,
            },
        }
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("tsa-out"))
    }
}
