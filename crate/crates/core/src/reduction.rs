//! Collisions from element distinctness: four-wise independent hashing, a
//! classical ED subroutine, and Monte Carlo estimates of the success events.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::derived;

pub const C0: f64 = 40.0;
pub const C1: f64 = 1e-4;
pub const C2: f64 = 8.0;

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959964;

const PRIME_WINDOW: u64 = 1 << 20;

pub fn is_prime(q: u64) -> bool {
    if q < 2 {
        return false;
    }
    let mut d = 2;
    while d * d <= q {
        if q.is_multiple_of(d) {
            return false;
        }
        d += 1;
    }
    true
}

/// Smallest prime `>= from`, searching at most `PRIME_WINDOW` candidates.
pub fn next_prime(from: u64) -> Result<u64> {
    (from.max(2)..from.max(2) + PRIME_WINDOW)
        .find(|&q| is_prime(q))
        .ok_or(Error::NoPrime {
            from,
            to: from + PRIME_WINDOW,
        })
}

/// `h(i) = (a3 i³ + a2 i² + a1 i + a0 mod q) mod R` on `[d]`.
///
/// Coefficients are resampled while any of the `d` field values falls at or
/// above `floor(q/R) R`, so each value reduces uniformly into `[R]`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FourWiseHash {
    pub q: u64,
    pub coeffs: [u64; 4],
    pub d: u64,
    pub r: u64,
}

impl FourWiseHash {
    pub fn modulus(d: u64, r: u64) -> Result<u64> {
        next_prime(r.max(d + 1))
    }

    pub fn sample<R: Rng + ?Sized>(d: u64, r: u64, rng: &mut R) -> Result<Self> {
        if r == 0 {
            return Err(Error::InvalidParameter(
                "hash range must be non-empty".into(),
            ));
        }
        let q = Self::modulus(d, r)?;
        loop {
            let coeffs = [0; 4].map(|_: u64| rng.gen_range(0..q));
            let h = Self { q, coeffs, d, r };
            if h.accepted() {
                return Ok(h);
            }
        }
    }

    /// Raw field value before reduction into `[R]`.
    #[inline]
    pub fn field_value(&self, i: u64) -> u64 {
        let q = self.q as u128;
        let i = i as u128 % q;
        let [a0, a1, a2, a3] = self.coeffs.map(|a| a as u128);
        (((a3 * i % q + a2) % q * i % q + a1) % q * i % q + a0) as u64 % self.q
    }

    #[inline]
    pub fn eval(&self, i: u64) -> u64 {
        self.field_value(i) % self.r
    }

    pub fn accepted(&self) -> bool {
        let cut = self.q / self.r * self.r;
        (0..self.d).all(|i| self.field_value(i) < cut)
    }

    pub fn values(&self) -> Vec<u64> {
        (0..self.d).map(|i| self.eval(i)).collect()
    }
}

/// Counts of `(h(p0), h(p1), h(p2), h(p3))` over every accepted coefficient
/// vector, flattened base `R`. Exact four-wise independence means all equal.
pub fn four_wise_counts(q: u64, d: u64, r: u64, points: [u64; 4]) -> Vec<u64> {
    let mut counts = vec![0u64; (r as usize).pow(4)];
    for a0 in 0..q {
        for a1 in 0..q {
            for a2 in 0..q {
                for a3 in 0..q {
                    let h = FourWiseHash {
                        q,
                        coeffs: [a0, a1, a2, a3],
                        d,
                        r,
                    };
                    if !h.accepted() {
                        continue;
                    }
                    let idx = points
                        .iter()
                        .fold(0usize, |acc, &p| acc * r as usize + h.eval(p) as usize);
                    counts[idx] += 1;
                }
            }
        }
    }
    counts
}

/// Lexicographically smallest `(i, j)`, `i < j`, with `fh[i] = fh[j]`.
pub fn classical_ed_solver<T: Ord + Copy>(fh: &[T]) -> Option<(usize, usize)> {
    let mut idx: Vec<usize> = (0..fh.len()).collect();
    idx.sort_by_key(|&i| (fh[i], i));
    // within a value group the first window (head, second) is the smallest
    idx.windows(2)
        .filter(|w| fh[w[0]] == fh[w[1]])
        .map(|w| (w[0], w[1]))
        .min()
}

fn hash_domain(d_domain: u64) -> u64 {
    (d_domain as f64).sqrt().ceil() as u64
}

/// One round: sample `h: [ceil(sqrt D)] -> [D]`, solve ED on `f∘h`, and map
/// the pair back through `h`.
struct Round {
    h_values: Vec<u64>,
    ed: Option<(usize, usize)>,
}

fn round<R: Rng + ?Sized>(f: &[u32], rng: &mut R) -> Result<Round> {
    let d_domain = f.len() as u64;
    let h = FourWiseHash::sample(hash_domain(d_domain), d_domain, rng)?;
    let h_values = h.values();
    let fh: Vec<u32> = h_values.iter().map(|&v| f[v as usize]).collect();
    Ok(Round {
        ed: classical_ed_solver(&fh),
        h_values,
    })
}

fn ordered(a: u64, b: u64) -> (u64, u64) {
    (a.min(b), a.max(b))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Algorithm1Result {
    pub rounds: u64,
    /// Every `(h(i), h(j))` output, in round order.
    pub outputs: Vec<(u64, u64)>,
    pub distinct: usize,
    /// First round (1-based) after which `ceil(c1 N)` distinct collisions were held.
    pub tau: Option<u64>,
}

/// Runs `rounds` rounds (default `c2 N`) on `f: [D] -> [N]`.
pub fn run_algorithm1(
    f: &[u32],
    n: u64,
    seed: u64,
    rounds: Option<u64>,
) -> Result<Algorithm1Result> {
    if f.is_empty() {
        return Err(Error::InvalidParameter("empty input function".into()));
    }
    let pairs = multicollision_profile(f).collision_pairs;
    if (pairs as f64) < C0 * n as f64 {
        log::warn!(
            "input has {pairs} collision pairs, fewer than c0 N = {}",
            C0 * n as f64
        );
    }
    let rounds = rounds.unwrap_or((C2 * n as f64) as u64);
    let target = (C1 * n as f64).ceil() as usize;
    let per_round: Vec<Option<(u64, u64)>> = (0..rounds)
        .into_par_iter()
        .map(|i| {
            let r = round(f, &mut derived(seed, i))?;
            Ok(r.ed.and_then(|(i, j)| {
                let (a, b) = (r.h_values[i], r.h_values[j]);
                (a != b).then(|| ordered(a, b))
            }))
        })
        .collect::<Result<_>>()?;
    let mut seen = BTreeSet::new();
    let mut outputs = Vec::new();
    let mut tau = None;
    for (i, out) in per_round.into_iter().enumerate() {
        if let Some((a, b)) = out {
            debug_assert!(f[a as usize] == f[b as usize]);
            outputs.push((a, b));
            seen.insert((a, b));
        }
        if tau.is_none() && seen.len() >= target {
            tau = Some(i as u64 + 1);
        }
    }
    Ok(Algorithm1Result {
        rounds,
        distinct: seen.len(),
        outputs,
        tau,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EventStat {
    pub count: u64,
    pub total: u64,
    pub freq: f64,
    pub wilson_lo: f64,
    pub wilson_hi: f64,
    pub bound: f64,
    /// `freq + 3 se >= bound`: the data do not contradict the lower bound.
    pub pass: bool,
}

pub fn wilson_interval(count: u64, total: u64, z: f64) -> (f64, f64) {
    if total == 0 {
        return (0.0, 1.0);
    }
    let n = total as f64;
    let p = count as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

impl EventStat {
    pub fn new(count: u64, total: u64, bound: f64) -> Self {
        let freq = if total == 0 {
            0.0
        } else {
            count as f64 / total as f64
        };
        let se = if total == 0 {
            0.0
        } else {
            (freq * (1.0 - freq) / total as f64).sqrt()
        };
        let (wilson_lo, wilson_hi) = wilson_interval(count, total, Z95);
        Self {
            count,
            total,
            freq,
            wilson_lo,
            wilson_hi,
            bound,
            pass: freq + 3.0 * se >= bound,
        }
    }
}

/// `1 - 4 (1 + sqrt(1 + 2 c0)) / (1 + 2 c0)`.
pub fn event_c_bound() -> f64 {
    let a = 1.0 + 2.0 * C0;
    1.0 - 4.0 * (1.0 + a.sqrt()) / a
}

pub const CONJUNCTION_BOUND: f64 = 1.0 / 250.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EventTally {
    /// `h` is injective.
    pub a: EventStat,
    /// No collision in the current history lies inside the image of `h`.
    pub b: EventStat,
    /// `f` restricted to the image of `h` has a collision.
    pub c: EventStat,
    /// The ED subroutine returns a pair with distinct `h` values.
    pub d: EventStat,
    pub conjunction: EventStat,
    /// History is cleared after this many outputs.
    pub epoch_length: u64,
    pub note: String,
}

impl EventTally {
    pub fn passes(&self) -> bool {
        self.a.pass && self.b.pass && self.c.pass && self.conjunction.pass
    }
}

/// Event frequencies over `rounds` rounds of the reduction on `f: [D] -> [N]`.
///
/// Outputs accumulate into a history that is cleared every `ceil(c1 N)`
/// outputs, so event B always refers to fewer than `c1 N` earlier collisions.
pub fn monte_carlo_events(f: &[u32], n: u64, rounds: u64, seed: u64) -> Result<EventTally> {
    let epoch = (C1 * n as f64).ceil().max(1.0) as u64;
    let results: Vec<Round> = (0..rounds)
        .into_par_iter()
        .map(|i| round(f, &mut derived(seed, i)))
        .collect::<Result<_>>()?;
    let (mut a, mut b, mut c, mut d, mut all) = (0u64, 0u64, 0u64, 0u64, 0u64);
    let mut history: Vec<(u64, u64)> = Vec::new();
    for r in &results {
        let mut image: Vec<u64> = r.h_values.clone();
        image.sort_unstable();
        let injective = image.windows(2).all(|w| w[0] != w[1]);
        image.dedup();
        let in_image = |v: u64| image.binary_search(&v).is_ok();
        let fresh = history.iter().all(|&(x, y)| !(in_image(x) && in_image(y)));
        let mut by_value: Vec<u32> = image.iter().map(|&v| f[v as usize]).collect();
        by_value.sort_unstable();
        let has_collision = by_value.windows(2).any(|w| w[0] == w[1]);
        let found = r.ed.and_then(|(i, j)| {
            let (x, y) = (r.h_values[i], r.h_values[j]);
            (x != y).then(|| ordered(x, y))
        });
        a += injective as u64;
        b += fresh as u64;
        c += has_collision as u64;
        d += found.is_some() as u64;
        all += (injective && fresh && has_collision && found.is_some()) as u64;
        if let Some(pair) = found {
            history.push(pair);
            if history.len() as u64 >= epoch {
                history.clear();
            }
        }
    }
    Ok(EventTally {
        a: EventStat::new(a, rounds, 0.5),
        b: EventStat::new(b, rounds, 1.0 - C1),
        c: EventStat::new(c, rounds, event_c_bound()),
        d: EventStat::new(d, rounds, 0.0),
        conjunction: EventStat::new(all, rounds, CONJUNCTION_BOUND),
        epoch_length: epoch,
        note: "ED subroutine is classical and exact: Pr[D | A, B, C] = 1".into(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MulticollisionProfile {
    /// multiplicity -> number of range values with that many preimages (multiplicity >= 1).
    pub histogram: BTreeMap<usize, usize>,
    pub max_multiplicity: usize,
    pub disjoint_collisions: usize,
    pub collision_pairs: u64,
}

pub fn multicollision_profile(f: &[u32]) -> MulticollisionProfile {
    let mut sorted = f.to_vec();
    sorted.sort_unstable();
    let mut histogram = BTreeMap::new();
    let (mut max_multiplicity, mut disjoint, mut pairs) = (0, 0, 0u64);
    for run in sorted.chunk_by(|a, b| a == b) {
        let m = run.len();
        *histogram.entry(m).or_insert(0) += 1;
        max_multiplicity = max_multiplicity.max(m);
        disjoint += m / 2;
        pairs += (m * (m - 1) / 2) as u64;
    }
    MulticollisionProfile {
        histogram,
        max_multiplicity,
        disjoint_collisions: disjoint,
        collision_pairs: pairs,
    }
}

/// Smallest `t` with `bins * Pr[Poisson(lambda) > t] <= alpha`.
pub fn poisson_max_load_threshold(lambda: f64, bins: u64, alpha: f64) -> usize {
    let mut pmf = (-lambda).exp();
    let mut cdf = pmf;
    let mut t = 0usize;
    while bins as f64 * (1.0 - cdf) > alpha && t < 10_000 {
        t += 1;
        pmf *= lambda / t as f64;
        cdf += pmf;
    }
    t
}

/// Uniformly random `f: [d] -> [n]`.
pub fn random_function<R: Rng + ?Sized>(d: usize, n: u32, rng: &mut R) -> Vec<u32> {
    (0..d).map(|_| rng.gen_range(0..n)).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Algorithm1Trial {
    pub seed: u64,
    pub distinct: usize,
    pub tau: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Algorithm1Trials {
    /// `ceil(c1 N)`.
    pub target: usize,
    pub trials: Vec<Algorithm1Trial>,
    pub successes: usize,
    pub success_rate: f64,
}

/// Independent runs of the reduction, each on a fresh `f: [d] -> [n]`
/// drawn from `derived(root, i)`; the run itself uses seed `mix(root, i)`.
pub fn algorithm1_trials(
    d: usize,
    n: u32,
    seeds: u64,
    root: u64,
    rounds: Option<u64>,
) -> Result<Algorithm1Trials> {
    let target = (C1 * n as f64).ceil() as usize;
    let trials: Vec<Algorithm1Trial> = (0..seeds)
        .map(|i| {
            let f = random_function(d, n, &mut derived(root, i));
            let seed = crate::rng::mix(root, i);
            let r = run_algorithm1(&f, n as u64, seed, rounds)?;
            Ok(Algorithm1Trial {
                seed,
                distinct: r.distinct,
                tau: r.tau,
            })
        })
        .collect::<Result<_>>()?;
    let successes = trials.iter().filter(|t| t.distinct >= target).count();
    Ok(Algorithm1Trials {
        target,
        success_rate: successes as f64 / seeds.max(1) as f64,
        trials,
        successes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn primes() {
        assert_eq!(next_prime(4).unwrap(), 5);
        assert_eq!(next_prime(5).unwrap(), 5);
        assert_eq!(next_prime(100_000).unwrap(), 100_003);
        assert_eq!(FourWiseHash::modulus(4, 4).unwrap(), 5);
    }

    #[test]
    fn exhaustive_four_wise_at_q5() {
        let counts = four_wise_counts(5, 4, 4, [0, 1, 2, 3]);
        assert_eq!(counts.len(), 256);
        assert!(counts.iter().all(|&c| c == counts[0]) && counts[0] > 0);
    }

    #[test]
    fn exhaustive_pairs_at_q5() {
        let counts = four_wise_counts(5, 4, 4, [0, 1, 2, 3]);
        let mut pair = [[0u64; 4]; 4];
        for (idx, c) in counts.iter().enumerate() {
            pair[idx / 64][(idx / 16) % 4] += c;
        }
        assert!(pair.iter().flatten().all(|&c| c == pair[0][0]));
    }

    #[test]
    fn constant_polynomial() {
        let h = FourWiseHash {
            q: 7,
            coeffs: [3, 0, 0, 0],
            d: 5,
            r: 7,
        };
        assert!(h.values().iter().all(|&v| v == 3));
    }

    #[test]
    fn pairwise_collision_rate() {
        let (d, r) = (8u64, 50u64);
        let trials = 100_000u64;
        let hits = (0..trials)
            .filter(|&s| {
                let h = FourWiseHash::sample(d, r, &mut derived(99, s)).unwrap();
                h.eval(2) == h.eval(5)
            })
            .count() as f64;
        let p = 1.0 / r as f64;
        let se = (p * (1.0 - p) / trials as f64).sqrt();
        assert!((hits / trials as f64 - p).abs() <= 3.0 * se);
    }

    #[test]
    fn ed_examples() {
        assert_eq!(classical_ed_solver(&[1, 2, 3]), None);
        assert_eq!(classical_ed_solver(&[5, 3, 5]), Some((0, 2)));
        assert_eq!(classical_ed_solver(&[4, 1, 1, 4]), Some((0, 3)));
    }

    #[test]
    fn ed_matches_quadratic_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            let len = rng.gen_range(0..12);
            let v: Vec<u32> = (0..len).map(|_| rng.gen_range(0..15)).collect();
            let mut brute = None;
            'outer: for i in 0..len {
                for j in i + 1..len {
                    if v[i] == v[j] {
                        brute = Some((i, j));
                        break 'outer;
                    }
                }
            }
            assert_eq!(classical_ed_solver(&v), brute, "{v:?}");
        }
    }

    #[test]
    fn algorithm1_extremes() {
        let constant = vec![7u32; 400];
        let res = run_algorithm1(&constant, 40, 1, Some(50)).unwrap();
        // every round with a non-injective-free hash outputs
        assert!(res.outputs.iter().all(|&(a, b)| a != b));
        assert!(res.outputs.len() >= 45);
        let injective: Vec<u32> = (0..400).collect();
        assert!(run_algorithm1(&injective, 400, 1, Some(50))
            .unwrap()
            .outputs
            .is_empty());
    }

    #[test]
    fn algorithm1_outputs_are_collisions() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let f = random_function(1000, 100, &mut rng);
        let res = run_algorithm1(&f, 100, 2, None).unwrap();
        assert_eq!(res.rounds, 800);
        for &(a, b) in &res.outputs {
            assert!(a != b && f[a as usize] == f[b as usize]);
        }
        assert!(res.distinct > 0);
    }

    #[test]
    fn events_with_huge_range() {
        let n = 100u64;
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let f = random_function((n * n) as usize, (n * n) as u32, &mut rng);
        let t = monte_carlo_events(&f, n, 2000, 4).unwrap();
        // 100 hash points into 10^4 cells
        let exact: f64 = (0..100).map(|i| 1.0 - i as f64 / 1e4).product();
        assert!(
            (t.a.freq - exact).abs() < 5.0 * (exact * (1.0 - exact) / 2000.0).sqrt(),
            "{}",
            t.a.freq
        );
        assert!(t.conjunction.count <= t.a.count.min(t.b.count).min(t.c.count).min(t.d.count));
    }

    #[test]
    fn trials_hit_target() {
        let t = algorithm1_trials(1000, 100, 3, 9, Some(400)).unwrap();
        assert_eq!(t.target, 1);
        assert_eq!(t.trials.len(), 3);
        assert_eq!(
            t.successes,
            t.trials.iter().filter(|x| x.distinct >= 1).count()
        );
        assert_eq!(t, algorithm1_trials(1000, 100, 3, 9, Some(400)).unwrap());
    }

    #[test]
    fn event_c_constant() {
        assert!((event_c_bound() - (1.0 - 40.0 / 81.0)).abs() < 1e-15);
    }

    #[test]
    fn wilson_contains_point_estimate() {
        let (lo, hi) = wilson_interval(30, 100, Z95);
        assert!(lo < 0.3 && 0.3 < hi);
        assert_eq!(wilson_interval(0, 10, Z95).0, 0.0);
    }

    #[test]
    fn profiles() {
        let p = multicollision_profile(&[0, 1, 2, 3]);
        assert_eq!(p.histogram.get(&1), Some(&4));
        assert_eq!(p.max_multiplicity, 1);
        let p = multicollision_profile(&[5; 9]);
        assert_eq!(p.histogram.get(&9), Some(&1));
        assert_eq!(p.disjoint_collisions, 4);
        assert_eq!(p.collision_pairs, 36);
    }

    #[test]
    fn random_function_loads() {
        let n = 10_000u32;
        for seed in 0..30 {
            let mut rng = derived(77, seed);
            let square = random_function(n as usize, n, &mut rng);
            assert!(
                multicollision_profile(&square).max_multiplicity as f64 <= 2.0 * (n as f64).ln()
            );
            let wide = random_function(10 * n as usize, n, &mut rng);
            let threshold = poisson_max_load_threshold(10.0, n as u64, 0.01);
            assert!(multicollision_profile(&wide).max_multiplicity <= threshold);
        }
    }
}
