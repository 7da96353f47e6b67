//! Progress measures `q_{t,k} = ‖Π_{≥k} φ_t‖` on recording-model states.

use serde::{Deserialize, Serialize};

use crate::bounds::{collision_progress_bound, ksearch_progress_bound};
use crate::error::{Error, Result};
use crate::state::QueryState;

/// Recurrence slack below this is reported as a violation.
pub const SLACK_TOL: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProgressMode {
    DisjointCollisions,
    Ones,
}

/// `Σ_y floor(|f^{-1}(y)| / 2)` or `|f^{-1}(1)|`; entries equal to `bot` are ignored.
pub fn count_statistic(f: &[u32], bot: u32, mode: ProgressMode) -> usize {
    match mode {
        ProgressMode::Ones => f.iter().filter(|&&v| v == 1 && v != bot).count(),
        ProgressMode::DisjointCollisions => {
            let mut mult = vec![0usize; bot as usize];
            for &v in f {
                if v < bot {
                    mult[v as usize] += 1;
                }
            }
            mult.iter().map(|m| m / 2).sum()
        }
    }
}

fn key_statistic(state: &QueryState, key: u64, mode: ProgressMode) -> usize {
    let l = state.layout();
    let f: Vec<u32> = (0..l.m()).map(|x| l.f_value(key, x)).collect();
    count_statistic(&f, l.bot(), mode)
}

/// `‖Π_{≥k} state‖`.
pub fn progress_measure(state: &QueryState, k: usize, mode: ProgressMode) -> f64 {
    state
        .entries()
        .iter()
        .filter(|&&(key, _)| key_statistic(state, key, mode) >= k)
        .map(|(_, a)| a.norm_sqr())
        .sum::<f64>()
        .sqrt()
}

/// Squared norm of every exact-`k` shell, indexed by `k`.
pub fn shell_weights(state: &QueryState, mode: ProgressMode) -> Vec<f64> {
    let mut shells = Vec::new();
    for &(key, a) in state.entries() {
        let s = key_statistic(state, key, mode);
        if shells.len() <= s {
            shells.resize(s + 1, 0.0);
        }
        shells[s] += a.norm_sqr();
    }
    shells
}

/// Content of the queried cell `F_x`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CellClass {
    Bot,
    Value(u32),
    One,
    Zero,
}

/// `Π_{=k,class}`: exact-`k` components with an active phase (`p ≠ 0` for
/// collisions, `p = 1` for search) whose queried cell matches `class`.
pub fn project_classified(
    state: &QueryState,
    k: usize,
    class: CellClass,
    mode: ProgressMode,
) -> Result<QueryState> {
    let ok = matches!(
        (mode, class),
        (
            ProgressMode::DisjointCollisions,
            CellClass::Bot | CellClass::Value(_)
        ) | (
            ProgressMode::Ones,
            CellClass::Bot | CellClass::One | CellClass::Zero
        )
    );
    if !ok {
        return Err(Error::ClassModeMismatch {
            class: format!("{class:?}"),
            mode: format!("{mode:?}"),
        });
    }
    let l = state.layout();
    let bot = l.bot();
    Ok(state.project_keys(|key| {
        let p = l.phase_value(key);
        let active = match mode {
            ProgressMode::DisjointCollisions => p != 0,
            ProgressMode::Ones => p == 1,
        };
        if !active || key_statistic(state, key, mode) != k {
            return false;
        }
        let v = l.f_value(key, l.query_value(key) as usize);
        match class {
            CellClass::Bot => v == bot,
            CellClass::Value(y) => v == y,
            CellClass::One => v == 1,
            CellClass::Zero => v == 0,
        }
    }))
}

/// Which recurrence and binomial bound a table is checked against.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum ProgressParams {
    /// `q_{t+1,k+1} ≤ q_{t,k+1} + 4 sqrt(t/N) q_{t,k}`.
    Collision { n: u64 },
    /// `q_{t+1,k+1} ≤ q_{t,k+1} + 4 sqrt(K/N) q_{t,k}`.
    Search { k: u64, n: u64 },
}

impl ProgressParams {
    pub fn mode(&self) -> ProgressMode {
        match self {
            Self::Collision { .. } => ProgressMode::DisjointCollisions,
            Self::Search { .. } => ProgressMode::Ones,
        }
    }

    pub fn step_coefficient(&self, t: usize) -> f64 {
        match *self {
            Self::Collision { n } => 4.0 * (t as f64 / n as f64).sqrt(),
            Self::Search { k, n } => 4.0 * (k as f64 / n as f64).sqrt(),
        }
    }

    pub fn bound(&self, t: usize, k: usize) -> f64 {
        match *self {
            Self::Collision { n } => collision_progress_bound(t as u64, k as u64, n),
            Self::Search { k: kk, n } => ksearch_progress_bound(t as u64, k as u64, kk, n),
        }
    }

    pub fn default_k_max(&self, t_max: usize, m: usize) -> usize {
        match self {
            Self::Collision { .. } => t_max.min(m / 2),
            Self::Search { .. } => t_max.min(m),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProgressTable {
    pub params: ProgressParams,
    /// `q[t][k]` for `t = 0..=T`, `k = 0..=k_max`.
    pub q: Vec<Vec<f64>>,
}

impl ProgressTable {
    /// Table from the recording-model snapshots `φ_0, …, φ_T`.
    pub fn from_snapshots(snapshots: &[QueryState], params: ProgressParams, k_max: usize) -> Self {
        let q = snapshots
            .iter()
            .map(|s| {
                let shells = shell_weights(s, params.mode());
                (0..=k_max)
                    .map(|k| shells.iter().skip(k).sum::<f64>().sqrt())
                    .collect()
            })
            .collect();
        Self { params, q }
    }

    pub fn t_max(&self) -> usize {
        self.q.len().saturating_sub(1)
    }

    pub fn k_max(&self) -> usize {
        self.q.first().map_or(0, |r| r.len().saturating_sub(1))
    }

    /// Per-cell report: recurrence slack for `t, k ≥ 1`, and binomial-bound
    /// slack everywhere.
    pub fn check(&self) -> RecurrenceReport {
        let mut cells = Vec::new();
        for (t, row) in self.q.iter().enumerate() {
            for (k, &q) in row.iter().enumerate() {
                let bound = self.params.bound(t, k);
                let recurrence = (t >= 1 && k >= 1).then(|| {
                    let prev = &self.q[t - 1];
                    prev[k] + self.params.step_coefficient(t - 1) * prev[k - 1] - q
                });
                cells.push(CellCheck {
                    t,
                    k,
                    q,
                    bound,
                    bound_slack: bound - q,
                    recurrence_slack: recurrence,
                });
            }
        }
        let min_recurrence_slack = cells
            .iter()
            .filter_map(|c| c.recurrence_slack)
            .fold(f64::INFINITY, f64::min);
        let min_bound_slack = cells
            .iter()
            .map(|c| c.bound_slack)
            .fold(f64::INFINITY, f64::min);
        RecurrenceReport {
            cells,
            min_recurrence_slack,
            min_bound_slack,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellCheck {
    pub t: usize,
    pub k: usize,
    pub q: f64,
    pub bound: f64,
    pub bound_slack: f64,
    pub recurrence_slack: Option<f64>,
}

impl CellCheck {
    /// The single `slack` column of the CSV export.
    pub fn slack(&self) -> f64 {
        self.recurrence_slack.unwrap_or(self.bound_slack)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecurrenceReport {
    pub cells: Vec<CellCheck>,
    /// `+inf` when no cell has a recurrence.
    pub min_recurrence_slack: f64,
    pub min_bound_slack: f64,
}

impl RecurrenceReport {
    pub fn passes(&self) -> bool {
        self.min_recurrence_slack >= -SLACK_TOL && self.min_bound_slack >= -SLACK_TOL
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layout::Register;
    use crate::layout::{BasisComponent, RegisterLayout};
    use crate::matrix::CMatrix;
    use crate::oracles::{apply_recording_oracle_generic, SamplingUnitary};
    use crate::verify::random_state;
    use num_complex::Complex64;
    use proptest::prelude::*;
    use std::sync::Arc;

    /// Exhaustive maximum matching on the graph `x ~ x'` iff `f(x) = f(x') ≠ ⊥`.
    fn brute_force_matching(f: &[u32], bot: u32) -> usize {
        fn go(f: &[u32], bot: u32, used: &mut Vec<bool>, start: usize) -> usize {
            let Some(i) = (start..f.len()).find(|&i| !used[i]) else {
                return 0;
            };
            used[i] = true;
            let mut best = go(f, bot, used, i + 1);
            if f[i] != bot {
                for j in i + 1..f.len() {
                    if !used[j] && f[j] == f[i] {
                        used[j] = true;
                        best = best.max(1 + go(f, bot, used, i + 1));
                        used[j] = false;
                    }
                }
            }
            used[i] = false;
            best
        }
        go(f, bot, &mut vec![false; f.len()], 0)
    }

    #[test]
    fn statistic_examples() {
        assert_eq!(
            count_statistic(&[1, 1, 1, 4], 4, ProgressMode::DisjointCollisions),
            1
        );
        assert_eq!(
            count_statistic(&[0, 0, 1, 1], 4, ProgressMode::DisjointCollisions),
            2
        );
        assert_eq!(count_statistic(&[2, 1, 0, 1], 2, ProgressMode::Ones), 2);
        assert_eq!(
            count_statistic(&[4, 4, 4], 4, ProgressMode::DisjointCollisions),
            0
        );
    }

    proptest! {
        #[test]
        fn statistic_equals_maximum_matching(n in 1u32..=6, f in proptest::collection::vec(0u32..7, 1..=6)) {
            let f: Vec<u32> = f.into_iter().map(|v| v % (n + 1)).collect();
            prop_assert_eq!(
                count_statistic(&f, n, ProgressMode::DisjointCollisions),
                brute_force_matching(&f, n)
            );
        }
    }

    #[test]
    fn initial_state_progress() {
        let l = Arc::new(RegisterLayout::new(3, 3, vec![]).unwrap());
        let s = QueryState::init_recording(Arc::clone(&l));
        assert_eq!(
            progress_measure(&s, 0, ProgressMode::DisjointCollisions),
            1.0
        );
        assert_eq!(
            progress_measure(&s, 1, ProgressMode::DisjointCollisions),
            0.0
        );
        // one query on a uniform superposition of phases
        let s = s
            .apply_local_unitary(Register::P, &CMatrix::fourier(3))
            .unwrap();
        let s = apply_recording_oracle_generic(&s, &SamplingUnitary::uniform(3).unwrap()).unwrap();
        assert_eq!(
            progress_measure(&s, 1, ProgressMode::DisjointCollisions),
            0.0
        );
        assert!((progress_measure(&s, 0, ProgressMode::DisjointCollisions) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn classified_projectors_partition_active_shell() {
        let l = Arc::new(RegisterLayout::new(3, 3, vec![]).unwrap());
        let s = random_state(&l, 400, 3);
        for k in 0..=1 {
            let mode = ProgressMode::DisjointCollisions;
            let mut total = project_classified(&s, k, CellClass::Bot, mode)
                .unwrap()
                .norm_sqr();
            for y in 0..3 {
                total += project_classified(&s, k, CellClass::Value(y), mode)
                    .unwrap()
                    .norm_sqr();
            }
            let direct = s
                .project(|c| c.p != 0 && count_statistic(&c.f, 3, mode) == k)
                .norm_sqr();
            assert!((total - direct).abs() < 1e-9);
        }
        assert!(
            project_classified(&s, 0, CellClass::One, ProgressMode::DisjointCollisions).is_err()
        );
        let lb = Arc::new(RegisterLayout::ksearch(3, 1, &[]).unwrap());
        let sb = random_state(&lb, 100, 4);
        assert!(project_classified(&sb, 0, CellClass::Value(1), ProgressMode::Ones).is_err());
        assert!(
            project_classified(&sb, 9, CellClass::One, ProgressMode::Ones)
                .unwrap()
                .is_empty()
        );
    }

    #[test]
    fn prepared_initial_state_is_bot_class() {
        let l = Arc::new(RegisterLayout::new(2, 2, vec![]).unwrap());
        let init = QueryState::init_recording(Arc::clone(&l));
        let zero =
            project_classified(&init, 0, CellClass::Bot, ProgressMode::DisjointCollisions).unwrap();
        assert!(zero.is_empty());
        let flipped = QueryState::from_components(
            Arc::clone(&l),
            [(
                BasisComponent {
                    x: 0,
                    p: 1,
                    w: vec![],
                    f: vec![2, 2],
                },
                Complex64::new(1.0, 0.0),
            )],
        )
        .unwrap();
        let full = project_classified(
            &flipped,
            0,
            CellClass::Bot,
            ProgressMode::DisjointCollisions,
        )
        .unwrap();
        assert!(full.distance(&flipped).unwrap() < 1e-15);
    }

    #[test]
    fn shells_telescope_to_norm() {
        let l = Arc::new(RegisterLayout::new(4, 2, vec![]).unwrap());
        let s = random_state(&l, 300, 9);
        let table = ProgressTable::from_snapshots(
            std::slice::from_ref(&s),
            ProgressParams::Collision { n: 2 },
            2,
        );
        let q = &table.q[0];
        let telescoped: f64 = (0..q.len())
            .map(|k| q[k].powi(2) - q.get(k + 1).map_or(0.0, |v| v.powi(2)))
            .sum();
        assert!((telescoped - s.norm_sqr()).abs() < 1e-8);
        assert!(q.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn table_for_zero_queries() {
        let l = Arc::new(RegisterLayout::new(2, 2, vec![]).unwrap());
        let s = QueryState::init_recording(l);
        let t = ProgressTable::from_snapshots(&[s], ProgressParams::Collision { n: 2 }, 0);
        let report = t.check();
        assert_eq!(report.cells.len(), 1);
        assert_eq!(report.cells[0].q, 1.0);
        assert!(report.passes());
    }
}
