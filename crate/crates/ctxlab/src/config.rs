//! Run configuration: flat `key=value` files merged with command-line
//! flags. Precedence: flag > config file > built-in default. The master
//! seed may also come from the `CTXLAB_SEED` environment variable; there
//! is no wall-clock seeding.

use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{CtxError, Result};
use crate::textio;

pub const SEED_ENV_VAR: &str = "CTXLAB_SEED";

/// A loaded (possibly absent) key=value config file.
#[derive(Debug, Clone, Default)]
pub struct RunConfig {
    map: BTreeMap<String, String>,
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<RunConfig> {
        match path {
            None => Ok(RunConfig::default()),
            Some(p) => {
                if !p.exists() {
                    return Err(CtxError::InvalidSpec(format!(
                        "config file {} does not exist",
                        p.display()
                    )));
                }
                Ok(RunConfig {
                    map: textio::read_kv(p)?,
                })
            }
        }
    }

    pub fn from_map(map: BTreeMap<String, String>) -> RunConfig {
        RunConfig { map }
    }

    fn raw(&self, key: &str) -> Option<&String> {
        self.map.get(key)
    }

    pub fn f64_or(&self, key: &str, flag: Option<f64>, default: f64) -> Result<f64> {
        if let Some(v) = flag {
            return Ok(v);
        }
        match self.raw(key) {
            Some(s) => textio::parse_float(s),
            None => Ok(default),
        }
    }

    pub fn usize_or(&self, key: &str, flag: Option<usize>, default: usize) -> Result<usize> {
        if let Some(v) = flag {
            return Ok(v);
        }
        match self.raw(key) {
            Some(s) => textio::parse_usize(s),
            None => Ok(default),
        }
    }

    pub fn string_or(&self, key: &str, flag: Option<String>, default: &str) -> String {
        flag.or_else(|| self.raw(key).cloned())
            .unwrap_or_else(|| default.to_string())
    }

    pub fn f64_required(&self, key: &str, flag: Option<f64>) -> Result<f64> {
        if let Some(v) = flag {
            return Ok(v);
        }
        match self.raw(key) {
            Some(s) => textio::parse_float(s),
            None => Err(CtxError::InvalidSpec(format!(
                "missing required value {key} (flag or config key)"
            ))),
        }
    }

    /// Master seed: flag > config key `seed` > CTXLAB_SEED > error.
    pub fn seed(&self, flag: Option<u64>) -> Result<u64> {
        if let Some(s) = flag {
            return Ok(s);
        }
        if let Some(s) = self.raw("seed") {
            return textio::parse_u64(s);
        }
        match std::env::var(SEED_ENV_VAR) {
            Ok(s) => textio::parse_u64(&s),
            Err(_) => Err(CtxError::InvalidSpec(format!(
                "no seed: pass --seed, set `seed=` in the config, or set {SEED_ENV_VAR}"
            ))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(pairs: &[(&str, &str)]) -> RunConfig {
        RunConfig::from_map(
            pairs
                .iter()
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .collect(),
        )
    }

    #[test]
    fn precedence_flag_over_file_over_default() {
        let c = cfg(&[("p_co", "0.7"), ("n_train", "500")]);
        assert_eq!(c.f64_or("p_co", Some(0.9), 0.5).unwrap(), 0.9);
        assert_eq!(c.f64_or("p_co", None, 0.5).unwrap(), 0.7);
        assert_eq!(c.f64_or("sigma_eps", None, 0.5).unwrap(), 0.5);
        assert_eq!(c.usize_or("n_train", None, 1000).unwrap(), 500);
        assert!(c.f64_required("missing", None).is_err());
        assert_eq!(c.f64_required("missing", Some(1.0)).unwrap(), 1.0);
    }

    #[test]
    fn seed_resolution() {
        let c = cfg(&[("seed", "42")]);
        assert_eq!(c.seed(Some(7)).unwrap(), 7);
        assert_eq!(c.seed(None).unwrap(), 42);
        let empty = cfg(&[]);
        // Environment fallback is exercised in the CLI tests; here only
        // the error path when the variable is unset.
        if std::env::var(SEED_ENV_VAR).is_err() {
            assert!(empty.seed(None).is_err());
        }
    }

    #[test]
    fn missing_config_file_is_an_error() {
        assert!(RunConfig::load(Some(Path::new("/nonexistent/x.cfg"))).is_err());
        assert!(RunConfig::load(None).is_ok());
    }
}
