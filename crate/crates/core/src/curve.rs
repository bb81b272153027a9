//! Rate-curve tables: one row per (λ, tail, method).

use crate::error::{Error, Result};
use crate::optimizer::Tail;
use serde::{Deserialize, Serialize};
use std::io::{BufRead, Write};

pub const HEADER: &str = "lambda,tail,method,rate,constraint,converged,iterations";
const SCHEMA: &str =
    "# kpz-ldp rate-curve v1: rate = Φ(±λ); constraint = h(ρ;2,0) of the reported field, NaN where there is none";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatePoint {
    pub lambda: f64,
    pub tail: Tail,
    pub method: String,
    pub rate: f64,
    pub constraint: f64,
    pub converged: bool,
    pub iterations: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RateCurve {
    pub points: Vec<RatePoint>,
}

impl RateCurve {
    pub fn push(&mut self, p: RatePoint) {
        self.points.push(p);
    }

    /// Points of one method and tail, sorted by λ.
    pub fn series(&self, method: &str, tail: Tail) -> Vec<&RatePoint> {
        let mut v: Vec<_> = self.points.iter().filter(|p| p.method == method && p.tail == tail).collect();
        v.sort_by(|a, b| a.lambda.total_cmp(&b.lambda));
        v
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{SCHEMA}")?;
        writeln!(w, "{HEADER}")?;
        for p in &self.points {
            writeln!(
                w,
                "{},{},{},{:e},{:e},{},{}",
                p.lambda, p.tail, p.method, p.rate, p.constraint, p.converged, p.iterations
            )?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut points = Vec::new();
        let mut header = false;
        for (n, line) in r.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if !header {
                if line != HEADER {
                    return Err(Error::parse(format!("line {}: expected header {HEADER:?}", n + 1)));
                }
                header = true;
                continue;
            }
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 7 {
                return Err(Error::parse(format!("line {}: expected 7 fields, got {}", n + 1, f.len())));
            }
            let bad = |what: &str| Error::parse(format!("line {}: bad {what}", n + 1));
            points.push(RatePoint {
                lambda: f[0].parse().map_err(|_| bad("lambda"))?,
                tail: f[1].parse()?,
                method: f[2].to_string(),
                rate: f[3].parse().map_err(|_| bad("rate"))?,
                constraint: f[4].parse().map_err(|_| bad("constraint"))?,
                converged: f[5].parse().map_err(|_| bad("converged"))?,
                iterations: f[6].parse().map_err(|_| bad("iterations"))?,
            });
        }
        if !header {
            return Err(Error::parse("missing header"));
        }
        Ok(RateCurve { points })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let mut c = RateCurve::default();
        c.push(RatePoint {
            lambda: 0.1,
            tail: Tail::Lower,
            method: "optimizer".into(),
            rate: 0.004,
            constraint: -0.1,
            converged: true,
            iterations: 12,
        });
        c.push(RatePoint {
            lambda: 2.5,
            tail: Tail::Upper,
            method: "exact".into(),
            rate: 1.25,
            constraint: f64::NAN,
            converged: true,
            iterations: 0,
        });
        let mut buf = Vec::new();
        c.write_csv(&mut buf).unwrap();
        let back = RateCurve::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back.points[0], c.points[0]);
        assert!(back.points[1].constraint.is_nan());
        assert_eq!(back.series("exact", Tail::Upper).len(), 1);
        assert!(RateCurve::read_csv("lambda,x\n".as_bytes()).is_err());
    }
}
