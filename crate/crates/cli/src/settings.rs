//! `key = value` configuration files merged under command-line flags.

use crate::CliError;
use kpz_ldp::pde::parse_key_values;
use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::str::FromStr;

#[derive(Default)]
pub struct Settings {
    file: BTreeMap<String, String>,
    used: RefCell<BTreeSet<String>>,
}

impl Settings {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else { return Ok(Self::default()) };
        let text = std::fs::read_to_string(path).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
        Self::from_text(&text)
    }

    pub fn from_text(text: &str) -> Result<Self, CliError> {
        let mut file = BTreeMap::new();
        for (k, v) in parse_key_values(text)? {
            if file.insert(k.clone(), v).is_some() {
                return Err(CliError::usage(format!("config key {k:?} given twice")));
            }
        }
        Ok(Settings { file, used: RefCell::default() })
    }

    /// The flag if given, else the file's value, else `default`.
    pub fn pick<T: FromStr>(&self, key: &str, flag: Option<T>, default: T) -> Result<T, CliError>
    where
        T::Err: std::fmt::Display,
    {
        Ok(self.pick_opt(key, flag)?.unwrap_or(default))
    }

    pub fn pick_opt<T: FromStr>(&self, key: &str, flag: Option<T>) -> Result<Option<T>, CliError>
    where
        T::Err: std::fmt::Display,
    {
        self.used.borrow_mut().insert(key.to_string());
        if flag.is_some() {
            return Ok(flag);
        }
        match self.file.get(key) {
            Some(v) => v.parse().map(Some).map_err(|e| CliError::usage(format!("config {key} = {v:?}: {e}"))),
            None => Ok(None),
        }
    }

    /// Fails on file keys no command asked for.
    pub fn finish(&self) -> Result<(), CliError> {
        let used = self.used.borrow();
        let unknown: Vec<&String> = self.file.keys().filter(|k| !used.contains(*k)).collect();
        if unknown.is_empty() {
            Ok(())
        } else {
            Err(CliError::usage(format!("unknown config keys: {unknown:?}")))
        }
    }
}

/// A real number, also written as a fraction like `1/64`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Real(pub f64);

impl FromStr for Real {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let p = |v: &str| v.trim().parse::<f64>().map_err(|e| format!("{v:?}: {e}"));
        match s.split_once('/') {
            Some((a, b)) => Ok(Real(p(a)? / p(b)?)),
            None => Ok(Real(p(s)?)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_win_and_leftovers_are_reported() {
        let s = Settings::from_text("nt = 257\nseed = 4\n# note\n").unwrap();
        assert_eq!(s.pick("nt", Some(129usize), 513).unwrap(), 129);
        assert_eq!(s.pick("nx", None, 801usize).unwrap(), 801);
        assert!(s.finish().is_err());
        assert_eq!(s.pick("seed", None::<u64>, 0).unwrap(), 4);
        assert!(s.finish().is_ok());
        assert_eq!("1/64".parse::<Real>().unwrap().0, 1.0 / 64.0);
    }
}
