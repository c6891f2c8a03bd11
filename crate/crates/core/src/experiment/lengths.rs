//! Profile-length vectors with a controlled spread.

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::rational::{ratio, to_f64, Rational};

#[derive(Debug, Clone, PartialEq)]
pub struct LengthDistribution {
    pub lengths: Vec<usize>,
    /// `sigma^2 = (1/P) sum (eta_p - eta_avg)^2`, kept exact.
    pub sigma_sq: Rational,
    pub sigma: f64,
    pub eta_avg: Rational,
}

impl LengthDistribution {
    pub fn new(lengths: Vec<usize>) -> Self {
        let p = lengths.len() as u128;
        let k: u128 = lengths.iter().map(|&n| n as u128).sum();
        let sq: u128 = lengths.iter().map(|&n| (n as u128) * (n as u128)).sum();
        // P * sum(eta^2) >= K^2 by Cauchy-Schwarz
        let sigma_sq = ratio(p * sq - k * k, p * p);
        Self {
            sigma: to_f64(&sigma_sq).sqrt(),
            sigma_sq,
            eta_avg: ratio(k, p),
            lengths,
        }
    }

    pub fn users(&self) -> usize {
        self.lengths.iter().sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LengthMode {
    Enumerate,
    /// Up to `count` members of the enumerated set, drawn with `seed`.
    Sample {
        count: usize,
        seed: u64,
    },
}

/// Every non-increasing split of `users` into `profiles` parts.
pub fn compositions(users: usize, profiles: usize) -> Vec<Vec<usize>> {
    fn rec(left: usize, parts: usize, cap: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if parts == 0 {
            if left == 0 {
                out.push(cur.clone());
            }
            return;
        }
        // the remaining parts can hold at most parts * cap
        if left > parts * cap {
            return;
        }
        let lo = left.div_ceil(parts);
        for v in (lo..=cap.min(left)).rev() {
            cur.push(v);
            rec(left - v, parts - 1, v, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    if profiles > 0 {
        rec(users, profiles, users, &mut Vec::with_capacity(profiles), &mut out);
    }
    out
}

fn within(sigma: f64, target: f64, tolerance: f64) -> bool {
    (sigma - target).abs() <= tolerance + 1e-12
}

pub fn generate_lengths(
    users: usize,
    profiles: usize,
    sigma_target: f64,
    tolerance: f64,
    mode: LengthMode,
) -> Result<Vec<LengthDistribution>> {
    if profiles == 0 {
        return Err(Error::InvalidParams("P must be positive".into()));
    }
    if !(sigma_target >= 0.0 && tolerance >= 0.0) {
        return Err(Error::InvalidParams(
            "sigma target and tolerance must be non-negative".into(),
        ));
    }
    let all: Vec<LengthDistribution> = compositions(users, profiles)
        .into_iter()
        .map(LengthDistribution::new)
        .filter(|d| within(d.sigma, sigma_target, tolerance))
        .collect();
    if all.is_empty() {
        return Err(Error::NoFeasibleDistribution {
            target: sigma_target,
            tolerance,
        });
    }
    Ok(match mode {
        LengthMode::Enumerate => all,
        LengthMode::Sample { count, seed } => sample(all, count, seed),
    })
}

/// Seeded subset, kept in enumeration order.
pub fn sample<T>(items: Vec<T>, count: usize, seed: u64) -> Vec<T> {
    if count >= items.len() {
        return items;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = index::sample(&mut rng, items.len(), count).into_vec();
    picked.sort_unstable();
    let mut keep = vec![false; items.len()];
    for i in picked {
        keep[i] = true;
    }
    items
        .into_iter()
        .zip(keep)
        .filter(|(_, k)| *k)
        .map(|(x, _)| x)
        .collect()
}
