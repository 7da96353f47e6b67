//! Closed-form bound evaluators, tradeoff curves and the sorting instance.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `ln C(n, k)`, summed term by term.
pub fn ln_binomial(n: u64, k: u64) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    let k = k.min(n - k);
    (0..k).map(|i| ((n - i) as f64 / (i + 1) as f64).ln()).sum()
}

/// `C(n, k)` as a running product; overflows to `inf` for huge arguments.
pub fn binomial(n: u64, k: u64) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// `C(t, k) * base^k` in the log domain, with `0^0 = 1`.
fn binomial_power(t: u64, k: u64, base: f64) -> f64 {
    if k == 0 {
        return 1.0;
    }
    if k > t || base == 0.0 {
        return 0.0;
    }
    (ln_binomial(t, k) + k as f64 * base.ln()).exp()
}

/// `C(t, k) (4 sqrt(t) / sqrt(N))^k`.
pub fn collision_progress_bound(t: u64, k: u64, n: u64) -> f64 {
    binomial_power(t, k, 4.0 * (t as f64 / n as f64).sqrt())
}

/// `C(t, k) (4 sqrt(K / N))^k`.
pub fn ksearch_progress_bound(t: u64, k: u64, kk: u64, n: u64) -> f64 {
    binomial_power(t, k, 4.0 * (kk as f64 / n as f64).sqrt())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuccessBound {
    /// `ceil(K/2)`, used wherever the exponent `K/2` appears.
    pub k_star: u64,
    /// Progress term.
    pub u: f64,
    /// Guessing term.
    pub v: f64,
    /// `2u² + 2v²`.
    pub raw: f64,
    pub clamped: f64,
    /// `1 <= K <= N/8`.
    pub in_range: bool,
}

impl SuccessBound {
    fn new(kind: &str, t: u64, k: u64, n: u64, u: f64, v: f64) -> Self {
        let in_range = k >= 1 && 8 * k <= n;
        if !in_range {
            log::warn!("{kind} bound evaluated outside 1 <= K <= N/8 (T={t}, K={k}, N={n})");
        }
        let raw = 2.0 * u * u + 2.0 * v * v;
        Self {
            k_star: k.div_ceil(2),
            u,
            v,
            raw,
            clamped: raw.clamp(0.0, 1.0),
            in_range,
        }
    }
}

/// Finding `K` disjoint collisions with `T` queries:
/// `u = C(T,k*) (4 sqrt(T/N))^{k*}`, `v = N (2K/N)^{k*}`.
pub fn collision_success_bound(t: u64, k: u64, n: u64) -> SuccessBound {
    let ks = k.div_ceil(2);
    let u = collision_progress_bound(t, ks, n);
    let v = n as f64 * (2.0 * k as f64 / n as f64).powi(ks as i32);
    SuccessBound::new("collision", t, k, n, u, v)
}

/// Finding `K` preimages of 1 with `T` queries:
/// `u = C(T,k*) (4 sqrt(K/N))^{k*}`, `v = 3^{K/2} sqrt(K/N)^{k*}`.
pub fn ksearch_success_bound(t: u64, k: u64, n: u64) -> SuccessBound {
    let ks = k.div_ceil(2);
    let u = ksearch_progress_bound(t, ks, k, n);
    let v = 3f64.powf(k as f64 / 2.0) * (k as f64 / n as f64).sqrt().powi(ks as i32);
    SuccessBound::new("K-search", t, k, n, u, v)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CurveKind {
    /// `max(c_t K^{2/3} N^{1/3}, c_lo K N^{1/3} / (3 S^{1/3}))`.
    CollisionLower,
    /// `c_up K sqrt(N/S)`.
    CollisionUpper,
    /// `c_conj K sqrt(N/S)`, the conjectured tight lower bound.
    CollisionConjecture,
    /// `c_s N^{3/2} / (8 sqrt(S))`.
    SortingLower,
}

/// Unstated asymptotic constants; all default to 1.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CurveConstants {
    pub c_t: f64,
    pub c_lo: f64,
    pub c_up: f64,
    pub c_conj: f64,
    pub c_s: f64,
}

impl Default for CurveConstants {
    fn default() -> Self {
        Self {
            c_t: 1.0,
            c_lo: 1.0,
            c_up: 1.0,
            c_conj: 1.0,
            c_s: 1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub s: f64,
    pub t: f64,
}

/// Required (or achieved) query count at space `s`.
pub fn tradeoff_point(kind: CurveKind, n: f64, k: f64, s: f64, c: &CurveConstants) -> f64 {
    match kind {
        CurveKind::CollisionLower => {
            let time_only = c.c_t * k.powf(2.0 / 3.0) * n.cbrt();
            let segmented = c.c_lo * k * n.cbrt() / (3.0 * s.cbrt());
            time_only.max(segmented)
        }
        CurveKind::CollisionUpper => c.c_up * k * (n / s).sqrt(),
        CurveKind::CollisionConjecture => c.c_conj * k * (n / s).sqrt(),
        CurveKind::SortingLower => c.c_s * n.powf(1.5) / (8.0 * s.sqrt()),
    }
}

pub fn tradeoff_curve(
    kind: CurveKind,
    n: f64,
    k: f64,
    s_values: &[f64],
    c: &CurveConstants,
) -> Vec<CurvePoint> {
    s_values
        .iter()
        .map(|&s| CurvePoint {
            s,
            t: tradeoff_point(kind, n, k, s, c),
        })
        .collect()
}

/// `f: [N] -> {0,1,2}` (1-indexed `x`, stored at `x - 1`):
/// `2` for `x < r`, `g(x - r + 1)` for `r <= x < r + N/2`, `0` afterwards.
pub fn build_sorting_instance(g: &[u8], r: usize, n: usize) -> Result<Vec<u8>> {
    if n == 0 || !n.is_multiple_of(2) {
        return Err(Error::InvalidParameter(format!(
            "N={n} must be even and positive"
        )));
    }
    if g.len() != n / 2 {
        return Err(Error::DimensionMismatch {
            expected: n / 2,
            got: g.len(),
        });
    }
    if r == 0 || r > n / 2 {
        return Err(Error::InvalidParameter(format!(
            "rank r={r} must lie in 1..=N/2"
        )));
    }
    if let Some(v) = g.iter().find(|&&v| v > 1) {
        return Err(Error::InvalidParameter(format!(
            "g takes non-binary value {v}"
        )));
    }
    Ok((1..=n)
        .map(|x| {
            if x < r {
                2
            } else if x < r + n / 2 {
                g[x - r]
            } else {
                0
            }
        })
        .collect())
}
