//! Per-subcommand configs. Every field has a default; unknown fields are
//! rejected, and `validate` checks the whole grid before anything runs.

use anyhow::{bail, ensure, Result};
use reclab_core::bounds::{CurveConstants, CurveKind};
use reclab_core::RegisterLayout;
use serde::{de::DeserializeOwned, Deserialize, Serialize};

pub trait Config: Serialize + DeserializeOwned + Default {
    fn set_seed(&mut self, seed: u64);
    fn validate(&self) -> Result<()>;
}

pub fn load<C: Config>(text: Option<&str>, seed: Option<u64>) -> Result<C> {
    let mut cfg: C = match text {
        Some(t) => serde_json::from_str(t)?,
        None => C::default(),
    };
    if let Some(s) = seed {
        cfg.set_seed(s);
    }
    cfg.validate()?;
    Ok(cfg)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyConfig {
    pub seed: u64,
    /// Random algorithms in the shared grid.
    pub algorithms: usize,
    pub max_queries: usize,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        let g = reclab_core::verify::GridConfig::default();
        Self {
            seed: g.seed,
            algorithms: g.algorithms,
            max_queries: g.max_queries,
        }
    }
}

impl Config for VerifyConfig {
    fn set_seed(&mut self, seed: u64) {
        self.seed = seed;
    }

    fn validate(&self) -> Result<()> {
        ensure!(self.algorithms >= 1, "algorithms must be >= 1");
        ensure!(
            (1..=6).contains(&self.max_queries),
            "max_queries must lie in 1..=6"
        );
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    Uniform,
    Bernoulli,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProgressConfig {
    pub seed: u64,
    /// `uniform` tracks disjoint collisions; `bernoulli` tracks ones (N = 2).
    pub family: Family,
    pub m: Vec<usize>,
    pub n: Vec<usize>,
    pub k: Vec<usize>,
    pub t: Vec<usize>,
    /// Random algorithms per grid point.
    pub algorithms: usize,
}

impl Default for ProgressConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            family: Family::Uniform,
            m: vec![2, 3],
            n: vec![2, 3],
            k: vec![1],
            t: vec![0, 1, 2, 3],
            algorithms: 2,
        }
    }
}

impl ProgressConfig {
    /// `(M, N, K, T)` in grid order; `N` is fixed to 2 for the Bernoulli family.
    pub fn points(&self) -> Vec<(usize, usize, usize, usize)> {
        let ns = match self.family {
            Family::Uniform => self.n.clone(),
            Family::Bernoulli => vec![2],
        };
        let mut out = Vec::new();
        for &m in &self.m {
            for &n in &ns {
                for &k in &self.k {
                    for &t in &self.t {
                        out.push((m, n, k, t));
                    }
                }
            }
        }
        out
    }
}

impl Config for ProgressConfig {
    fn set_seed(&mut self, seed: u64) {
        self.seed = seed;
    }

    fn validate(&self) -> Result<()> {
        ensure!(self.algorithms >= 1, "algorithms must be >= 1");
        let points = self.points();
        ensure!(!points.is_empty(), "empty grid");
        for (m, n, k, t) in points {
            let at = format!("grid point M={m} N={n} K={k} T={t}");
            ensure!((1..=6).contains(&m), "{at}: M must lie in 1..=6");
            ensure!((1..=6).contains(&n), "{at}: N must lie in 1..=6");
            ensure!(t <= 6, "{at}: T must be <= 6");
            ensure!(k >= 1, "{at}: K must be >= 1");
            match self.family {
                Family::Uniform => {
                    if let Err(e) = RegisterLayout::collision(m, n, k, &[]) {
                        bail!("{at}: {e}");
                    }
                }
                Family::Bernoulli => {
                    ensure!(k <= m, "{at}: Bernoulli family needs K <= M");
                    if let Err(e) = RegisterLayout::ksearch(m, k, &[]) {
                        bail!("{at}: {e}");
                    }
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoundsConfig {
    pub seed: u64,
    pub n: Vec<u64>,
    pub k: Vec<u64>,
    /// Query counts for the success-bound table.
    pub t: Vec<u64>,
    /// Space values per curve (geometric from log2 N to N), plus `K^{2/3} N^{1/3}`.
    pub s_points: usize,
    pub curves: Vec<CurveKind>,
    pub constants: CurveConstants,
}

impl Default for BoundsConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            n: vec![1 << 10, 1 << 12, 1 << 14, 1 << 16],
            k: vec![1, 2, 4, 8],
            t: vec![0, 1, 2, 4, 8, 16, 32],
            s_points: 8,
            curves: vec![
                CurveKind::CollisionLower,
                CurveKind::CollisionUpper,
                CurveKind::CollisionConjecture,
                CurveKind::SortingLower,
            ],
            constants: CurveConstants::default(),
        }
    }
}

impl Config for BoundsConfig {
    fn set_seed(&mut self, seed: u64) {
        self.seed = seed;
    }

    fn validate(&self) -> Result<()> {
        ensure!(self.s_points >= 2, "s_points must be >= 2");
        ensure!(!self.n.is_empty() && !self.k.is_empty(), "empty grid");
        for &n in &self.n {
            ensure!(n >= 2, "grid point N={n}: N must be >= 2");
            for &k in &self.k {
                ensure!(k >= 1 && k <= n, "grid point N={n} K={k}: need 1 <= K <= N");
            }
        }
        let c = &self.constants;
        for (name, v) in [
            ("c_t", c.c_t),
            ("c_lo", c.c_lo),
            ("c_up", c.c_up),
            ("c_conj", c.c_conj),
            ("c_s", c.c_s),
        ] {
            ensure!(
                v.is_finite() && v > 0.0,
                "constant {name}={v} must be positive"
            );
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReductionConfig {
    pub seed: u64,
    /// Range size `N`.
    pub n: u32,
    /// Domain size is `d_factor * N`.
    pub d_factor: u32,
    /// Monte Carlo rounds for the event frequencies.
    pub rounds: u64,
    /// Independent full runs of the reduction.
    pub trials: u64,
    /// Rounds per full run; default `c2 N`.
    pub trial_rounds: Option<u64>,
}

impl Default for ReductionConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            n: 10_000,
            d_factor: 10,
            rounds: 100_000,
            trials: 30,
            trial_rounds: None,
        }
    }
}

impl Config for ReductionConfig {
    fn set_seed(&mut self, seed: u64) {
        self.seed = seed;
    }

    fn validate(&self) -> Result<()> {
        ensure!(self.n >= 2, "N must be >= 2");
        ensure!(self.d_factor >= 1, "d_factor must be >= 1");
        ensure!(
            (self.n as u64) * (self.d_factor as u64) <= 1 << 26,
            "domain d_factor * N too large"
        );
        ensure!(self.rounds >= 1, "rounds must be >= 1");
        ensure!(self.trial_rounds != Some(0), "trial_rounds must be >= 1");
        Ok(())
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmulateConfig {
    pub seed: u64,
    pub n: Vec<u64>,
    pub k: Vec<u64>,
    /// Space values per `(N, K)`, geometric over `[log2 N, K^{2/3} N^{1/3}]`.
    pub s_points: usize,
    pub seeds: u64,
    /// Largest accepted `max/min` of the normalized query count.
    pub max_ratio_spread: f64,
    /// Smallest accepted per-point success rate.
    pub min_success_rate: f64,
}

impl Default for EmulateConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            n: (10..=16).map(|e| 1u64 << e).collect(),
            k: vec![4, 8, 16, 32, 64],
            s_points: 3,
            seeds: 100,
            max_ratio_spread: 20.0,
            min_success_rate: 2.0 / 3.0,
        }
    }
}

impl Config for EmulateConfig {
    fn set_seed(&mut self, seed: u64) {
        self.seed = seed;
    }

    fn validate(&self) -> Result<()> {
        ensure!(self.seeds >= 1, "seeds must be >= 1");
        ensure!(self.s_points >= 1, "s_points must be >= 1");
        ensure!(!self.n.is_empty() && !self.k.is_empty(), "empty grid");
        for &n in &self.n {
            for &k in &self.k {
                let at = format!("grid point N={n} K={k}");
                ensure!((4..=1 << 24).contains(&n), "{at}: N must lie in 4..=2^24");
                ensure!(k >= 1 && 2 * k <= n, "{at}: need 1 <= K <= N/2");
                ensure!(
                    !reclab_core::algorithms::space_grid(n, k, self.s_points).is_empty(),
                    "{at}: empty space range"
                );
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SortConfig {
    pub seed: u64,
    pub n: usize,
    pub r: usize,
    /// Binary function on `[N/2]`; drawn from the seed when absent.
    pub g: Option<Vec<u8>>,
}

impl Default for SortConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            n: 16,
            r: 3,
            g: None,
        }
    }
}

impl Config for SortConfig {
    fn set_seed(&mut self, seed: u64) {
        self.seed = seed;
    }

    fn validate(&self) -> Result<()> {
        ensure!(
            self.n >= 2 && self.n.is_multiple_of(2),
            "N={} must be even and >= 2",
            self.n
        );
        ensure!(
            (1..=self.n / 2).contains(&self.r),
            "rank r={} must lie in 1..=N/2",
            self.r
        );
        if let Some(g) = &self.g {
            ensure!(
                g.len() == self.n / 2,
                "g has {} entries, expected N/2 = {}",
                g.len(),
                self.n / 2
            );
            ensure!(g.iter().all(|&v| v <= 1), "g must be binary");
        }
        Ok(())
    }
}
