//! Univariate TPE and MOTPE suggestion.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use statrs::function::erf::erfc;

use super::pareto::select_best;
use super::space::{Assignment, Param, SearchSpace};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TpeConfig {
    pub gamma: f64,
    pub n_candidates: usize,
    pub n_startup: usize,
    /// Cap on the divisor of the minimum bandwidth: a mixture over `n`
    /// points never narrows below `range / min(floor_divisor, n + 1)`.
    pub floor_divisor: f64,
    pub prior_weight: f64,
}

impl Default for TpeConfig {
    fn default() -> Self {
        TpeConfig {
            gamma: 0.25,
            n_candidates: 24,
            n_startup: 10,
            floor_divisor: 100.0,
            prior_weight: 1.0,
        }
    }
}

/// Which suggestion rule to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sampler {
    #[default]
    Tpe,
    /// Independent uniform draws from the priors (baseline).
    Random,
}

/// One completed observation: its assignment and loss vector (all minimized).
pub struct Observation<'a> {
    pub params: &'a Assignment,
    pub losses: Vec<f64>,
}

pub(crate) fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(splitmix64(seed ^ splitmix64(stream)))
}

const PRIMES: [u64; 24] = [
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89,
];

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let (mut f, mut r) = (inv, 0.0);
    while i > 0 {
        r += f * (i % base) as f64;
        i /= base;
        f *= inv;
    }
    r
}

/// Quasi-random startup point number `index` (0-based), one coordinate per
/// searched parameter: a Halton sequence under a seed-derived rotation.
fn startup_point(seed: u64, index: u64, dims: usize) -> Vec<f64> {
    let mut rot = rng_for(seed, u64::MAX);
    (0..dims)
        .map(|d| {
            let shift: f64 = rot.random();
            let base = if d < PRIMES.len() { PRIMES[d] } else { 0 };
            let u = if base == 0 {
                // More dimensions than listed primes: fall back to seeded uniform draws.
                rng_for(seed ^ d as u64, index).random()
            } else {
                radical_inverse(index + 1, base)
            };
            (u + shift).fract()
        })
        .collect()
}

fn std_normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// Parzen mixture over a bounded interval: one truncated Gaussian per
/// observation plus a uniform prior component.
struct Parzen {
    lo: f64,
    hi: f64,
    mus: Vec<f64>,
    bw: f64,
    prior_weight: f64,
}

impl Parzen {
    fn new(obs: &[f64], lo: f64, hi: f64, cfg: &TpeConfig) -> Self {
        let n = obs.len();
        let range = hi - lo;
        let silverman = if n > 1 {
            let mean = obs.iter().sum::<f64>() / n as f64;
            let var = obs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            1.06 * var.sqrt() * (n as f64).powf(-0.2)
        } else {
            range
        };
        Parzen {
            lo,
            hi,
            mus: obs.to_vec(),
            bw: silverman.max(range / cfg.floor_divisor.min(n as f64 + 1.0)).min(range),
            prior_weight: cfg.prior_weight,
        }
    }

    fn total_weight(&self) -> f64 {
        self.mus.len() as f64 + self.prior_weight
    }

    fn pdf(&self, x: f64) -> f64 {
        let h = self.bw;
        let mut s = self.prior_weight / (self.hi - self.lo);
        for &mu in &self.mus {
            let z = (x - mu) / h;
            let mass = std_normal_cdf((self.hi - mu) / h) - std_normal_cdf((self.lo - mu) / h);
            let phi = (-0.5 * z * z).exp() / (h * (2.0 * std::f64::consts::PI).sqrt());
            s += phi / mass.max(1e-300);
        }
        s / self.total_weight()
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        let pick = rng.random::<f64>() * self.total_weight();
        let idx = pick.floor() as usize;
        if idx >= self.mus.len() {
            return self.lo + rng.random::<f64>() * (self.hi - self.lo);
        }
        let mu = self.mus[idx];
        let normal = Normal::new(mu, self.bw).expect("positive bandwidth");
        for _ in 0..256 {
            let x = normal.sample(rng);
            if x >= self.lo && x <= self.hi {
                return x;
            }
        }
        mu
    }
}

fn categorical_probs(obs: &[&Value], choices: &[Value], prior_weight: f64) -> Vec<f64> {
    let k = choices.len() as f64;
    let total = obs.len() as f64 + prior_weight;
    choices
        .iter()
        .map(|c| (obs.iter().filter(|o| **o == c).count() as f64 + prior_weight / k) / total)
        .collect()
}

fn sample_index(probs: &[f64], rng: &mut ChaCha8Rng) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

/// Splits observations into (good, bad) index sets.
fn split(observations: &[Observation], gamma: f64) -> (Vec<usize>, Vec<usize>) {
    let n = observations.len();
    let n_good = ((gamma * n as f64).ceil() as usize).clamp(1, n);
    let good: Vec<usize> = if observations[0].losses.len() == 1 {
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| observations[a].losses[0].total_cmp(&observations[b].losses[0]).then(a.cmp(&b)));
        order.truncate(n_good);
        order
    } else {
        let pts: Vec<Vec<f64>> = observations.iter().map(|o| o.losses.clone()).collect();
        select_best(&pts, n_good)
    };
    let mut is_good = vec![false; n];
    for &g in &good {
        is_good[g] = true;
    }
    let bad = (0..n).filter(|&i| !is_good[i]).collect();
    (good, bad)
}

/// Next assignment given the completed observations (in trial order).
///
/// A pure function of `(seed, observations)`: failed trials must not be
/// passed in, and retrying after a failure yields the same assignment.
pub fn suggest(space: &SearchSpace, observations: &[Observation], seed: u64, cfg: &TpeConfig, sampler: Sampler) -> Assignment {
    let n = observations.len() as u64;
    let searched: Vec<&Param> = space.parameters.iter().filter(|p| !p.is_fixed()).collect();
    let mut out = Assignment::new();
    for p in &space.parameters {
        if let Param::Fixed { name, value } = p {
            out.insert(name.clone(), value.clone());
        }
    }

    if sampler == Sampler::Random {
        let mut rng = rng_for(seed, n);
        for p in searched {
            out.insert(p.name().to_string(), p.from_unit(rng.random()));
        }
        return out;
    }

    if observations.len() < cfg.n_startup {
        let u = startup_point(seed, n, searched.len());
        for (p, u) in searched.iter().zip(u) {
            out.insert(p.name().to_string(), p.from_unit(u));
        }
        return out;
    }

    let (good, bad) = split(observations, cfg.gamma);
    let mut rng = rng_for(seed, n);
    for p in searched {
        let name = p.name();
        let value = match p {
            Param::Categorical { choices, .. } => {
                let vals = |idx: &[usize]| -> Vec<&Value> { idx.iter().filter_map(|&i| observations[i].params.get(name)).collect() };
                let l = categorical_probs(&vals(&good), choices, cfg.prior_weight);
                let g = categorical_probs(&vals(&bad), choices, cfg.prior_weight);
                let mut best: Option<(f64, usize)> = None;
                for _ in 0..cfg.n_candidates {
                    let c = sample_index(&l, &mut rng);
                    let score = l[c].ln() - g[c].ln();
                    if best.is_none_or(|(s, _)| score > s) {
                        best = Some((score, c));
                    }
                }
                choices[best.expect("at least one candidate").1].clone()
            }
            _ => {
                let (lo, hi) = p.interval().expect("numeric");
                let vals = |idx: &[usize]| -> Vec<f64> {
                    idx.iter()
                        .filter_map(|&i| observations[i].params.get(name).and_then(|v| p.to_internal(v)))
                        .map(|x| x.clamp(lo, hi))
                        .collect()
                };
                let l = Parzen::new(&vals(&good), lo, hi, cfg);
                let g = Parzen::new(&vals(&bad), lo, hi, cfg);
                let mut best: Option<(f64, f64)> = None;
                for _ in 0..cfg.n_candidates {
                    let x = l.sample(&mut rng);
                    let score = l.pdf(x).ln() - g.pdf(x).ln();
                    if best.is_none_or(|(s, _)| score > s) {
                        best = Some((score, x));
                    }
                }
                p.from_internal(best.expect("at least one candidate").1)
            }
        };
        out.insert(name.to_string(), value);
    }
    out
}
