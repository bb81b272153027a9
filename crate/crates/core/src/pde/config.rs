use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Scheme parameters. `nt` and `nx` count nodes on [0,2] and [−L,L].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub nt: usize,
    pub nx: usize,
    #[serde(rename = "L")]
    pub half_width: f64,
    pub t0: f64,
    /// Implicitness of the heat half steps; 0.5 is Crank–Nicolson.
    pub theta: f64,
    /// Time grading power, 1 for uniform.
    pub grading: u32,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self::near_center()
    }
}

impl SolverConfig {
    /// Grid for unscaled solves with O(1) potentials.
    pub fn near_center() -> Self {
        SolverConfig { nt: 513, nx: 1601, half_width: 10.0, t0: 1.0 / 64.0, theta: 0.5, grading: 2 }
    }

    /// Grid for the λ-scaled equation up to λ ≈ 60.
    pub fn deep_tail() -> Self {
        SolverConfig { nt: 1025, nx: 2401, half_width: 3.0, t0: 1.0 / 256.0, theta: 0.5, grading: 2 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.nt < 9 || self.nt % 2 == 0 {
            return Err(Error::config(format!("nt must be odd and ≥ 9, got {}", self.nt)));
        }
        if self.nx < 5 || self.nx % 2 == 0 {
            return Err(Error::config(format!("nx must be odd and ≥ 5, got {}", self.nx)));
        }
        if !(self.half_width > 0.0 && self.half_width.is_finite()) {
            return Err(Error::config(format!("L must be positive, got {}", self.half_width)));
        }
        if !(self.t0 > 0.0 && self.t0 <= 0.1) {
            return Err(Error::config(format!("t0 must lie in (0, 0.1], got {}", self.t0)));
        }
        // Below 1/2 the θ-scheme is only conditionally stable.
        if !(0.5..=1.0).contains(&self.theta) {
            return Err(Error::config(format!("theta must lie in [0.5, 1], got {}", self.theta)));
        }
        if !(1..=8).contains(&self.grading) {
            return Err(Error::config(format!("grading must lie in 1..=8, got {}", self.grading)));
        }
        Ok(())
    }

    /// Sets one key. Keys: nt, nx, L, t0, theta, grading.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let bad = |e: &dyn std::fmt::Display| Error::parse(format!("{key} = {value:?}: {e}"));
        match key {
            "nt" => self.nt = value.parse().map_err(|e| bad(&e))?,
            "nx" => self.nx = value.parse().map_err(|e| bad(&e))?,
            "L" => self.half_width = value.parse().map_err(|e| bad(&e))?,
            "t0" => self.t0 = parse_real(value).map_err(|e| bad(&e))?,
            "theta" => self.theta = value.parse().map_err(|e| bad(&e))?,
            "grading" => self.grading = value.parse().map_err(|e| bad(&e))?,
            _ => return Err(Error::parse(format!("unknown solver key {key:?}"))),
        }
        Ok(())
    }

    /// Applies `key = value` lines; `#` starts a comment. Keys this type
    /// does not know are returned for the caller to handle.
    pub fn apply_text(&mut self, text: &str) -> Result<Vec<(String, String)>> {
        let mut rest = Vec::new();
        for (key, value) in parse_key_values(text)? {
            match key.as_str() {
                "nt" | "nx" | "L" | "t0" | "theta" | "grading" => self.set(&key, &value)?,
                _ => rest.push((key, value)),
            }
        }
        Ok(rest)
    }

    /// Defaults overridden by `text`; unknown keys are an error.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        if let Some((k, _)) = cfg.apply_text(text)?.first() {
            return Err(Error::parse(format!("unknown solver key {k:?}")));
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Splits `key = value` lines, dropping blanks and `#` comments.
pub fn parse_key_values(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::parse(format!("line {}: expected key = value, got {line:?}", n + 1)))?;
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() {
            return Err(Error::parse(format!("line {}: empty key", n + 1)));
        }
        out.push((k.to_string(), v.to_string()));
    }
    Ok(out)
}

// Accepts plain reals and fractions like 1/64.
fn parse_real(s: &str) -> std::result::Result<f64, String> {
    match s.split_once('/') {
        Some((a, b)) => {
            let a: f64 = a.trim().parse().map_err(|e| format!("{e}"))?;
            let b: f64 = b.trim().parse().map_err(|e| format!("{e}"))?;
            Ok(a / b)
        }
        None => s.parse().map_err(|e| format!("{e}")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_round_trip() {
        let cfg = SolverConfig::from_text("# grid\nnt = 257\nL=8\n t0 = 1/32 \ntheta = 0.6").unwrap();
        assert_eq!(cfg.nt, 257);
        assert_eq!(cfg.half_width, 8.0);
        assert_eq!(cfg.t0, 1.0 / 32.0);
        assert_eq!(cfg.theta, 0.6);
        assert_eq!(cfg.nx, SolverConfig::default().nx);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(SolverConfig::from_text("nt 5").is_err());
        assert!(SolverConfig::from_text("dt = 3").is_err());
        assert!(SolverConfig::from_text("theta = 0.3").is_err());
        assert!(SolverConfig::from_text("nt = 256").is_err());
        assert!(SolverConfig::from_text("t0 = 0.5").is_err());
    }
}
