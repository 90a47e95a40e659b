//! Run configuration: a plain-text `key = value` file, overridden by
//! `--set key=value` flags. Unknown keys are rejected.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

pub const FIRST_YEAR: i32 = 2010;
pub const LAST_YEAR: i32 = 2022;

/// Every recognised key with its default ("" means unset).
pub const DEFAULTS: &[(&str, &str)] = &[
    ("rates", ""),
    ("truth", ""),
    ("covariates", ""),
    ("adjacency", ""),
    ("centroids", ""),
    ("crosswalk", ""),
    ("base_geojson", ""),
    ("predictions", ""),
    ("year_start", "2010"),
    ("year_end", "2022"),
    ("island_neighbors", "5"),
    ("impute_method", "neighbor_mean"),
    ("fraction", "0.5"),
    ("seeds", "0..20"),
    ("methods", "national_mean,state_mean,idw,neighbor_mean"),
    ("idw_power", "1"),
    ("idw_max_donors", "all"),
    ("write_masks", "false"),
    ("crosswalk_years", "2022"),
    ("observed_years", ""),
    ("tail", "0.02"),
    ("tails", "0.01,0.02,0.03"),
    ("seed", "0"),
    ("folds", "5"),
    ("gbt_trees", "50,100,200"),
    ("gbt_depth", "3,4,6"),
    ("gbt_min_leaf", "5,20"),
    ("gbt_lr", "0.1"),
    ("ae_d1", "1024"),
    ("ae_d2", "128"),
    ("ae_epochs", "100"),
    ("ae_patience", "10"),
    ("ae_lr_base", "0.0001"),
    ("ae_lr_peak", "0.01"),
    ("ae_cycle", "10"),
    ("ae_optimizer", "adam"),
    ("ae_validation_year", "2015"),
    ("ae_train_end", "2020"),
    ("ae_test_year", "2021"),
    ("shap_samples", "200"),
    ("synth_lattice", "national"),
    ("synth_seed", "20240101"),
];

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    values: BTreeMap<String, String>,
    pub out_dir: PathBuf,
}

fn parse_pair(line: &str, origin: &str) -> Result<(String, String)> {
    let (k, v) = line
        .split_once('=')
        .ok_or_else(|| CliError::config(format!("{origin}: expected key=value, got {line:?}")))?;
    let key = k.trim().to_string();
    if !DEFAULTS.iter().any(|(d, _)| *d == key) {
        return Err(CliError::config(format!("{origin}: unknown key {key:?}")));
    }
    Ok((key, v.trim().to_string()))
}

impl RunConfig {
    /// Builds the configuration from an optional file, `--set` overrides and
    /// the output directory resolution order: flag, `MORTMAP_OUT`, `out`.
    pub fn load(file: Option<&Path>, overrides: &[String], out_flag: Option<&Path>) -> Result<Self> {
        let mut values: BTreeMap<String, String> =
            DEFAULTS.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
        if let Some(path) = file {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::config(format!("cannot read config {}: {e}", path.display())))?;
            for (n, raw) in text.lines().enumerate() {
                let line = raw.split('#').next().unwrap_or("").trim();
                if line.is_empty() {
                    continue;
                }
                let (k, v) = parse_pair(line, &format!("{}:{}", path.display(), n + 1))?;
                values.insert(k, v);
            }
        }
        for o in overrides {
            let (k, v) = parse_pair(o, "--set")?;
            values.insert(k, v);
        }
        let out_dir = match (out_flag, std::env::var_os("MORTMAP_OUT")) {
            (Some(p), _) => p.to_path_buf(),
            (None, Some(env)) => PathBuf::from(env),
            (None, None) => PathBuf::from("out"),
        };
        let cfg = RunConfig { values, out_dir };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        let (a, b) = self.year_range()?;
        if a > b || a < FIRST_YEAR || b > LAST_YEAR {
            return Err(CliError::config(format!(
                "year range {a}..{b} must be ordered and lie within {FIRST_YEAR}..{LAST_YEAR}"
            )));
        }
        let tail: f64 = self.parse("tail")?;
        for t in std::iter::once(tail).chain(self.list::<f64>("tails")?) {
            if !(t > 0.0 && t < 0.5) {
                return Err(CliError::config(format!("tail must lie in (0, 0.5), got {t}")));
            }
        }
        Ok(())
    }

    pub fn raw(&self, key: &str) -> &str {
        self.values.get(key).map(String::as_str).expect("key listed in DEFAULTS")
    }

    pub fn is_set(&self, key: &str) -> bool {
        !self.raw(key).is_empty()
    }

    pub fn parse<T: FromStr>(&self, key: &str) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        let raw = self.raw(key);
        raw.parse()
            .map_err(|e| CliError::config(format!("{key} = {raw:?}: {e}")))
    }

    pub fn list<T: FromStr>(&self, key: &str) -> Result<Vec<T>>
    where
        T::Err: std::fmt::Display,
    {
        self.raw(key)
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| s.parse().map_err(|e| CliError::config(format!("{key}: {s:?}: {e}"))))
            .collect()
    }

    /// Seeds as `a..b` (half-open) or a comma-separated list.
    pub fn seeds(&self) -> Result<Vec<u64>> {
        let raw = self.raw("seeds");
        if let Some((a, b)) = raw.split_once("..") {
            let a: u64 = a.trim().parse().map_err(|_| CliError::config(format!("seeds = {raw:?}")))?;
            let b: u64 = b.trim().parse().map_err(|_| CliError::config(format!("seeds = {raw:?}")))?;
            if a >= b {
                return Err(CliError::config(format!("seeds = {raw:?} is empty")));
            }
            return Ok((a..b).collect());
        }
        let seeds = self.list("seeds")?;
        if seeds.is_empty() {
            return Err(CliError::config("seeds is empty"));
        }
        Ok(seeds)
    }

    pub fn flag(&self, key: &str) -> Result<bool> {
        match self.raw(key) {
            "true" | "yes" | "1" => Ok(true),
            "false" | "no" | "0" | "" => Ok(false),
            other => Err(CliError::config(format!("{key} = {other:?} is not a boolean"))),
        }
    }

    pub fn year_range(&self) -> Result<(i32, i32)> {
        Ok((self.parse("year_start")?, self.parse("year_end")?))
    }

    /// A required input path; relative paths are taken from the working
    /// directory.
    pub fn path(&self, key: &str) -> Result<PathBuf> {
        if !self.is_set(key) {
            return Err(CliError::config(format!("`{key}` must be set for this command")));
        }
        Ok(PathBuf::from(self.raw(key)))
    }

    /// Resolved settings in key order.
    pub fn entries(&self) -> &BTreeMap<String, String> {
        &self.values
    }

    /// SHA-256 over the sorted `key=value` lines.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        for (k, v) in &self.values {
            h.update(k.as_bytes());
            h.update(b"=");
            h.update(v.as_bytes());
            h.update(b"\n");
        }
        hex(&h.finalize())
    }
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn load(text: &str, sets: &[&str]) -> Result<RunConfig> {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.cfg");
        std::fs::write(&path, text).unwrap();
        let sets: Vec<String> = sets.iter().map(|s| s.to_string()).collect();
        RunConfig::load(Some(&path), &sets, Some(Path::new("o")))
    }

    #[test]
    fn flags_override_file() {
        let c = load("tail = 0.01 # lower\nfraction=0.3\n", &["tail=0.03"]).unwrap();
        assert_eq!(c.raw("tail"), "0.03");
        assert_eq!(c.parse::<f64>("fraction").unwrap(), 0.3);
        assert_eq!(c.raw("folds"), "5");
    }

    #[test]
    fn rejects_unknown_keys_and_bad_ranges() {
        assert!(load("colour = red\n", &[]).is_err());
        assert!(load("", &["tail=0.5"]).is_err());
        assert!(load("year_start = 2009\n", &[]).is_err());
    }

    #[test]
    fn seed_forms() {
        assert_eq!(load("seeds = 3..6\n", &[]).unwrap().seeds().unwrap(), vec![3, 4, 5]);
        assert_eq!(load("seeds = 7, 1\n", &[]).unwrap().seeds().unwrap(), vec![7, 1]);
    }

    #[test]
    fn hash_tracks_values() {
        let a = load("", &[]).unwrap();
        let b = load("", &["seed=1"]).unwrap();
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash(), load("", &[]).unwrap().hash());
    }
}
