//! Experiment configuration: a JSON object with a versioned `schema` field.

use std::path::{Path, PathBuf};

use rwl_core::dyadic::Direction;
use rwl_core::estimates::Budget;
use rwl_core::filters::FilterTable;
use rwl_core::grid::{make_grid, TorusGrid};
use rwl_core::suite::SuiteSpec;
use rwl_core::wavelet::build_wavelet_system;
use serde::{Deserialize, Serialize};

pub const SCHEMA: &str = "rwl-experiment/1";

#[derive(Debug, thiserror::Error)]
#[error("configuration error: {0}")]
pub struct ConfigError(pub String);

fn bad(msg: impl Into<String>) -> ConfigError {
    ConfigError(msg.into())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema: String,
    /// Spatial dimension.
    pub n: usize,
    /// `J`, with `2^J` points per axis.
    pub depth: u32,
    pub filter: String,
    pub delta: f64,
    /// Hoelder exponent; the filter's certified value when absent.
    pub alpha: Option<f64>,
    /// Direction bits such as `"10"`; the unit vector at `i0` when absent.
    pub eps: Option<String>,
    /// Distinguished axis, 1-based.
    pub i0: usize,
    /// Exponents for the interpolation check.
    pub p: Vec<f64>,
    pub seed: u64,
    pub suite: SuiteSpec,
    /// Exponents for the `T_l` scans.
    pub scan_p: Vec<f64>,
    pub ells: Vec<i64>,
    pub negative_ells: Vec<i64>,
    pub identity_ells: Vec<i64>,
    pub identity_fields: usize,
    pub mus: Vec<i64>,
    pub semenov_p: f64,
    pub lambdas: Vec<i64>,
    /// Repeat the refinement-sensitive checks at depth `J + 1`.
    pub refine: bool,
    pub budget: Budget,
    pub semenov_budget: Budget,
    pub out: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            schema: SCHEMA.into(),
            n: 1,
            depth: 10,
            filter: "db2".into(),
            delta: 1.0,
            alpha: None,
            eps: None,
            i0: 1,
            p: vec![4.0 / 3.0, 2.0, 4.0],
            seed: 0,
            suite: SuiteSpec::default(),
            scan_p: vec![2.0],
            ells: (0..=5).collect(),
            negative_ells: (-6..=-1).collect(),
            identity_ells: vec![0, 1, 2],
            identity_fields: 20,
            mus: vec![1, 2, 4, 8, 16],
            semenov_p: 4.0,
            lambdas: vec![1, 2, 3],
            refine: true,
            budget: Budget::default(),
            semenov_budget: Budget { probes: 48, restarts: 12, ..Budget::default() },
            out: PathBuf::from("out"),
        }
    }
}

/// Values derived from a validated configuration.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub grid: TorusGrid,
    pub eps: Direction,
    /// 0-based.
    pub i0: usize,
    pub alpha: f64,
}

fn check_exponents(name: &str, ps: &[f64]) -> Result<(), ConfigError> {
    if ps.is_empty() {
        return Err(bad(format!("{name} is empty")));
    }
    match ps.iter().find(|p| !(**p > 1.0 && p.is_finite())) {
        Some(p) => Err(bad(format!("{name} contains p = {p}; need 1 < p < inf"))),
        None => Ok(()),
    }
}

fn check_budget(name: &str, b: &Budget) -> Result<(), ConfigError> {
    if b.probes == 0 || b.iterations == 0 || !(b.tolerance > 0.0 && b.tolerance < 1.0) {
        return Err(bad(format!("{name} is empty or has tolerance outside (0, 1)")));
    }
    Ok(())
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| bad(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| bad(format!("{}: {e}", path.display())))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Checks everything the stages will need before any computation.
    pub fn validate(&self) -> Result<Resolved, ConfigError> {
        if self.schema != SCHEMA {
            return Err(bad(format!("schema '{}' is not '{SCHEMA}'", self.schema)));
        }
        let grid = make_grid(self.n, self.depth).map_err(|e| bad(e.to_string()))?;
        let table = FilterTable::default();
        let filter = table.get(&self.filter).map_err(|e| bad(e.to_string()))?;
        let depths = if self.refine { vec![self.depth, self.depth + 1] } else { vec![self.depth] };
        for &d in &depths {
            let g = make_grid(self.n, d).map_err(|e| bad(e.to_string()))?;
            build_wavelet_system(&self.filter, g, &Direction::all(self.n)).map_err(|e| bad(e.to_string()))?;
        }
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return Err(bad(format!("delta = {} must be positive", self.delta)));
        }
        let alpha = self.alpha.unwrap_or(filter.alpha_default());
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(bad(format!(
                "alpha = {alpha} not in (0, 1]; filter '{}' needs an explicit alpha",
                self.filter
            )));
        }
        if !(1..=self.n).contains(&self.i0) {
            return Err(bad(format!("i0 = {} not in 1..={}", self.i0, self.n)));
        }
        let i0 = self.i0 - 1;
        let eps = match &self.eps {
            Some(s) => s.parse::<Direction>().map_err(|e| bad(e.to_string()))?,
            None => {
                let bits: Vec<u8> = (0..self.n).map(|a| u8::from(a == i0)).collect();
                Direction::new(&bits).map_err(|e| bad(e.to_string()))?
            }
        };
        if eps.dim() != self.n {
            return Err(bad(format!("eps = {eps} has dimension {}, grid has {}", eps.dim(), self.n)));
        }
        if !eps.is_set(i0) {
            return Err(bad(format!("eps = {eps} must have a 1 at i0 = {}", self.i0)));
        }
        check_exponents("p", &self.p)?;
        check_exponents("scan_p", &self.scan_p)?;
        check_exponents("semenov_p", &[self.semenov_p])?;
        check_budget("budget", &self.budget)?;
        check_budget("semenov_budget", &self.semenov_budget)?;
        if self.suite.total() == 0 {
            return Err(bad("suite is empty"));
        }
        let nyquist = (grid.side() / 2) as i64;
        if self.suite.radius < 1 || self.suite.radius >= nyquist {
            return Err(bad(format!("suite radius {} not in 1..{nyquist}", self.suite.radius)));
        }
        if self.identity_fields == 0 {
            return Err(bad("identity_fields must be positive"));
        }
        for (name, list) in [("ells", &self.ells), ("negative_ells", &self.negative_ells), ("identity_ells", &self.identity_ells)] {
            if list.is_empty() {
                return Err(bad(format!("{name} is empty")));
            }
        }
        if self.negative_ells.iter().any(|&l| l >= 0) {
            return Err(bad("negative_ells must be negative"));
        }
        if self.mus.is_empty() {
            return Err(bad("mus is empty"));
        }
        if self.lambdas.is_empty() || self.lambdas.iter().any(|&l| l < 1 || l >= self.depth as i64) {
            return Err(bad(format!("lambdas must lie in 1..{}", self.depth)));
        }
        Ok(Resolved { grid, eps, i0, alpha })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        let r = ExperimentConfig::default().validate().unwrap();
        assert_eq!(r.i0, 0);
        assert_eq!(r.eps.to_string(), "1");
        assert_eq!(r.alpha, 0.55);
    }

    #[test]
    fn roundtrip_and_partial_files() {
        let cfg = ExperimentConfig { n: 2, depth: 7, eps: Some("10".into()), ..Default::default() };
        let back: ExperimentConfig = serde_json::from_str(&cfg.to_json()).unwrap();
        assert_eq!(back, cfg);
        let partial: ExperimentConfig =
            serde_json::from_str(r#"{"schema": "rwl-experiment/1", "depth": 8, "budget": {"probes": 2}}"#).unwrap();
        assert_eq!(partial.depth, 8);
        assert_eq!(partial.budget.probes, 2);
        assert_eq!(partial.budget.iterations, Budget::default().iterations);
        assert!(serde_json::from_str::<ExperimentConfig>(r#"{"nn": 2}"#).is_err());
    }

    #[test]
    fn rejects_inconsistent_settings() {
        let cases = [
            ExperimentConfig { schema: "v0".into(), ..Default::default() },
            ExperimentConfig { filter: "haar".into(), ..Default::default() },
            ExperimentConfig { filter: "db9".into(), ..Default::default() },
            ExperimentConfig { i0: 2, ..Default::default() },
            ExperimentConfig { n: 2, eps: Some("01".into()), ..Default::default() },
            ExperimentConfig { p: vec![1.0], ..Default::default() },
            ExperimentConfig { depth: 4, ..Default::default() },
            ExperimentConfig { lambdas: vec![0], ..Default::default() },
            ExperimentConfig { alpha: Some(1.5), ..Default::default() },
        ];
        for c in cases {
            assert!(c.validate().is_err(), "{c:?}");
        }
        let haar = ExperimentConfig { filter: "haar".into(), alpha: Some(0.5), ..Default::default() };
        assert!(haar.validate().is_ok());
    }
}
