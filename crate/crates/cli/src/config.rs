//! Flat `key = value` settings. A config file is read first, command-line
//! flags overwrite it, and every value a command actually reads is
//! recorded so it can be echoed with the results.

use std::cell::RefCell;
use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use gardner_core::percep::PatternDistribution;

use crate::CliError;

pub const KNOWN_KEYS: &[&str] = &[
    "seed",
    "out",
    "threads",
    "kappa",
    "epsilon",
    "sigma",
    "n",
    "n_list",
    "alpha",
    "alpha_grid",
    "kappa_grid",
    "sigma_grid",
    "epsilon_grid",
    "trials",
    "samples",
    "shots",
    "draws",
    "dist",
    "quantum",
    "method",
];

#[derive(Debug, Default)]
pub struct Settings {
    values: BTreeMap<String, String>,
    used: RefCell<BTreeMap<String, String>>,
}

impl Settings {
    /// Parses `key = value` lines; blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut out = Self::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                CliError::Usage(format!("config line {}: expected key = value, got '{raw}'", i + 1))
            })?;
            out.set(k.trim(), v.trim())?;
        }
        Ok(out)
    }

    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        match path {
            None => Ok(Self::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| {
                    CliError::Usage(format!("cannot read config {}: {e}", p.display()))
                })?;
                Self::parse(&text)
            }
        }
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        if !KNOWN_KEYS.contains(&key) {
            return Err(CliError::Usage(format!("unknown config key '{key}'")));
        }
        self.values.insert(key.to_string(), value.to_string());
        Ok(())
    }

    /// Every value read so far, defaults included.
    pub fn effective(&self) -> BTreeMap<String, String> {
        self.used.borrow().clone()
    }

    fn raw(&self, key: &str, default: &str) -> String {
        let v = self.values.get(key).cloned().unwrap_or_else(|| default.to_string());
        self.used.borrow_mut().insert(key.to_string(), v.clone());
        v
    }

    fn parsed<T: FromStr>(&self, key: &str, default: &str) -> Result<T, CliError> {
        let v = self.raw(key, default);
        v.trim()
            .parse()
            .map_err(|_| CliError::Usage(format!("invalid value '{v}' for {key}")))
    }

    pub fn f64(&self, key: &str, default: &str) -> Result<f64, CliError> {
        let x: f64 = self.parsed(key, default)?;
        if !x.is_finite() {
            return Err(CliError::Usage(format!("{key} must be finite")));
        }
        Ok(x)
    }

    pub fn usize(&self, key: &str, default: &str) -> Result<usize, CliError> {
        self.parsed(key, default)
    }

    pub fn u64(&self, key: &str, default: &str) -> Result<u64, CliError> {
        self.parsed(key, default)
    }

    pub fn string(&self, key: &str, default: &str) -> String {
        self.raw(key, default)
    }

    pub fn bool(&self, key: &str, default: &str) -> Result<bool, CliError> {
        match self.raw(key, default).to_ascii_lowercase().as_str() {
            "true" | "1" | "yes" => Ok(true),
            "false" | "0" | "no" => Ok(false),
            other => Err(CliError::Usage(format!("invalid boolean '{other}' for {key}"))),
        }
    }

    pub fn dist(&self, default: &str) -> Result<PatternDistribution, CliError> {
        self.raw("dist", default)
            .parse()
            .map_err(|e: gardner_core::Error| CliError::Usage(e.to_string()))
    }

    fn list<T: FromStr + PartialOrd + Copy>(&self, key: &str, default: &str) -> Result<Vec<T>, CliError> {
        let v = self.raw(key, default);
        let items: Vec<T> = v
            .split(',')
            .map(|s| s.trim().parse().map_err(|_| CliError::Usage(format!("invalid entry '{s}' in {key}"))))
            .collect::<Result<_, _>>()?;
        if items.is_empty() {
            return Err(CliError::Usage(format!("{key} is empty")));
        }
        if items.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(CliError::Usage(format!("{key} must be strictly increasing")));
        }
        Ok(items)
    }

    /// Comma-separated, non-empty, strictly increasing reals.
    pub fn grid(&self, key: &str, default: &str) -> Result<Vec<f64>, CliError> {
        let g: Vec<f64> = self.list(key, default)?;
        if g.iter().any(|x| !x.is_finite()) {
            return Err(CliError::Usage(format!("{key} entries must be finite")));
        }
        Ok(g)
    }

    pub fn usize_list(&self, key: &str, default: &str) -> Result<Vec<usize>, CliError> {
        self.list(key, default)
    }
}
