use crate::error::{Error, Result};
use crate::grid::{Potential, Slice};
use crate::stats::McEstimate;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

/// E_{0→x}[exp(∫₀ᵗ ρ(s, b(s)) ds)] over Brownian bridges b from (0,0) to
/// (t,x), i.e. Z(ρ;t,x)/p(t,x).
///
/// Each bridge is sampled on `n_steps` intervals graded quadratically toward
/// both ends and the time integral is the trapezoid rule on those nodes.
/// Path `i` draws from ChaCha8 seeded with `seed` on stream `i`, so the
/// estimate does not depend on the thread count.
pub fn feynman_kac_mc<P: Potential + ?Sized>(
    rho: &P,
    t: f64,
    x: f64,
    n_paths: usize,
    n_steps: usize,
    seed: u64,
) -> Result<McEstimate> {
    if n_paths < 1 {
        return Err(Error::domain("need at least one path"));
    }
    if n_steps < 2 {
        return Err(Error::domain(format!("need n_steps ≥ 2, got {n_steps}")));
    }
    if !(t > 0.0 && t.is_finite() && x.is_finite()) {
        return Err(Error::domain(format!("bad endpoint ({t}, {x})")));
    }
    let s = bridge_times(t, n_steps);
    let mut w = vec![0.0; s.len()];
    for k in 0..n_steps {
        let h = s[k + 1] - s[k];
        w[k] += 0.5 * h;
        w[k + 1] += 0.5 * h;
    }
    let slices: Vec<Slice<'_>> = s.iter().map(|&si| rho.slice(si)).collect();
    let values: Vec<f64> = (0..n_paths)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let mut b = 0.0;
            let mut acc = w[0] * slices[0](0.0);
            for k in 0..n_steps {
                let ds = s[k + 1] - s[k];
                let rem = t - s[k];
                let mean = b + (x - b) * ds / rem;
                b = if k + 1 == n_steps {
                    x
                } else {
                    let var = ds * (t - s[k + 1]) / rem;
                    let z: f64 = StandardNormal.sample(&mut rng);
                    mean + var.sqrt() * z
                };
                acc += w[k + 1] * slices[k + 1](b);
            }
            acc.exp()
        })
        .collect();
    Ok(McEstimate::from_samples(&values))
}

// Symmetric quadratic grading on [0, t].
fn bridge_times(t: f64, n: usize) -> Vec<f64> {
    let mut s = vec![0.0; n + 1];
    for (i, v) in s.iter_mut().enumerate().take(n / 2 + 1) {
        let u = i as f64 / n as f64;
        *v = 2.0 * t * u * u;
    }
    for i in n / 2 + 1..=n {
        s[i] = t - s[n - i];
    }
    if n % 2 == 0 {
        s[n / 2] = 0.5 * t;
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bridge_times_are_symmetric_and_increasing() {
        for n in [2, 3, 16, 17] {
            let s = bridge_times(2.0, n);
            assert_eq!(s[0], 0.0);
            assert_eq!(s[n], 2.0);
            assert!(s.windows(2).all(|w| w[1] > w[0]));
        }
    }
}
