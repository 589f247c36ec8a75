//! Run configuration: defaults, optional `--config` file, then command-line flags.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use flatmaj::conditions::{CheckConfig, Thresholds};
use flatmaj::feasibility::FeasibilityOptions;
use flatmaj::minimize::MinimizeConfig;

use crate::report::Failure;

pub const TOLERANCE_KEYS: [&str; 5] = ["tau_strict", "tau_zero", "delta_bnd", "minimize", "oracle"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub grid_size: usize,
    pub tolerances: BTreeMap<String, f64>,
    pub seed: u64,
    pub dimension_cap: usize,
    pub output_path: Option<String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let th = Thresholds::default();
        let opts = FeasibilityOptions::default();
        let tolerances = BTreeMap::from([
            ("tau_strict".to_string(), th.tau_strict),
            ("tau_zero".to_string(), th.tau_zero),
            ("delta_bnd".to_string(), th.delta_bnd),
            ("minimize".to_string(), MinimizeConfig::default().tol),
            ("oracle".to_string(), opts.tolerance),
        ]);
        RunConfig {
            grid_size: MinimizeConfig::default().grid,
            tolerances,
            seed: 0,
            dimension_cap: opts.dimension_cap,
            output_path: None,
        }
    }
}

/// Partial config file; absent fields keep the defaults, tolerances merge per key.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    grid_size: Option<usize>,
    tolerances: Option<BTreeMap<String, f64>>,
    seed: Option<u64>,
    dimension_cap: Option<usize>,
    output_path: Option<String>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, Failure> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::malformed(format!("cannot read config {}: {e}", path.display())))?;
        let file: ConfigFile = serde_json::from_str(&text)
            .map_err(|e| Failure::malformed(format!("bad config {}: {e}", path.display())))?;
        let mut cfg = RunConfig::default();
        if let Some(g) = file.grid_size {
            cfg.grid_size = g;
        }
        if let Some(t) = file.tolerances {
            cfg.tolerances.extend(t);
        }
        if let Some(s) = file.seed {
            cfg.seed = s;
        }
        if let Some(d) = file.dimension_cap {
            cfg.dimension_cap = d;
        }
        if file.output_path.is_some() {
            cfg.output_path = file.output_path;
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), Failure> {
        if self.grid_size < 8 {
            return Err(Failure::malformed(format!("grid_size {} below 8", self.grid_size)));
        }
        if self.dimension_cap == 0 {
            return Err(Failure::malformed("dimension_cap must be positive"));
        }
        for (k, v) in &self.tolerances {
            if !TOLERANCE_KEYS.contains(&k.as_str()) {
                return Err(Failure::malformed(format!("unknown tolerance {k:?}")));
            }
            if !(v.is_finite() && *v > 0.0) {
                return Err(Failure::malformed(format!("tolerance {k} = {v} must be positive")));
            }
        }
        Ok(())
    }

    fn tol(&self, key: &str) -> f64 {
        self.tolerances[key]
    }

    pub fn minimize(&self) -> MinimizeConfig {
        MinimizeConfig {
            grid: self.grid_size,
            tol: self.tol("minimize"),
            ..MinimizeConfig::default()
        }
    }

    pub fn check(&self) -> CheckConfig {
        CheckConfig {
            minimize: self.minimize(),
            thresholds: Thresholds {
                tau_strict: self.tol("tau_strict"),
                tau_zero: self.tol("tau_zero"),
                delta_bnd: self.tol("delta_bnd"),
            },
        }
    }

    pub fn oracle(&self) -> FeasibilityOptions {
        FeasibilityOptions {
            tolerance: self.tol("oracle"),
            dimension_cap: self.dimension_cap,
            ..FeasibilityOptions::default()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_is_valid_and_round_trips() {
        let cfg = RunConfig::default();
        cfg.validate().unwrap();
        let back: RunConfig = serde_json::from_str(&serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn rejects_small_grid_and_bad_tolerances() {
        let mut cfg = RunConfig {
            grid_size: 4,
            ..RunConfig::default()
        };
        assert!(cfg.validate().is_err());
        cfg.grid_size = 8;
        cfg.tolerances.insert("oracle".into(), 0.0);
        assert!(cfg.validate().is_err());
        cfg.tolerances.insert("oracle".into(), 1e-7);
        cfg.tolerances.insert("bogus".into(), 1.0);
        assert!(cfg.validate().is_err());
    }
}
