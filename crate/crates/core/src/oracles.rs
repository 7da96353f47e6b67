//! Phase oracle, sampling unitaries, and the recording query operator `R = S† O S`.
//!
//! The generic route builds `R` per `(x, p)` by explicit `(N+1)×(N+1)` matrix
//! products and is the reference for everything else; the closed forms for the
//! uniform and Bernoulli families are checked against it.

use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::layout::{Register, RegisterLayout};
use crate::matrix::{CMatrix, UNITARY_TOL};
use crate::relation::OutputRelation;
use crate::state::{local_unitary_kernel, QueryState, DENSE_LIMIT};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Roots of unity `w_N^j = e^{2 pi i j / N}`; powers are resolved by index mod `N`.
#[derive(Clone, Debug)]
pub struct PhaseTable {
    roots: Vec<Complex64>,
}

impl PhaseTable {
    pub fn new(n: usize) -> Self {
        let roots = (0..n)
            .map(|j| {
                let angle = 2.0 * std::f64::consts::PI * j as f64 / n as f64;
                Complex64::new(angle.cos(), angle.sin())
            })
            .collect();
        Self { roots }
    }

    pub fn n(&self) -> usize {
        self.roots.len()
    }

    #[inline]
    pub fn pow(&self, j: u64) -> Complex64 {
        self.roots[(j % self.roots.len() as u64) as usize]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FamilyKind {
    Uniform,
    /// `f(x) = 1` with probability `k / n`, range `{0, 1}`.
    Bernoulli {
        k: u64,
        n: u64,
    },
    Custom,
}

/// Per-position unitaries `S_x` on `F_x` with `S_x|⊥> = |init_x>`.
///
/// The alphabet order is `(0, .., N-1, ⊥)`. A family holding a single matrix
/// uses it for every position.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplingUnitary {
    #[serde(flatten)]
    kind: FamilyKind,
    range: usize,
    matrices: Vec<CMatrix>,
}

impl SamplingUnitary {
    /// Involution `|⊥> <-> N^{-1/2} Σ_y |y>` fixing the nonzero Fourier vectors.
    pub fn uniform(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter("N must be >= 1".into()));
        }
        let inv_sqrt = 1.0 / (n as f64).sqrt();
        let inv = 1.0 / n as f64;
        let m = CMatrix::from_fn(n + 1, |r, c| match (r == n, c == n) {
            (true, true) => ZERO,
            (true, false) | (false, true) => Complex64::new(inv_sqrt, 0.0),
            (false, false) => Complex64::new(if r == c { 1.0 - inv } else { -inv }, 0.0),
        });
        Ok(Self {
            kind: FamilyKind::Uniform,
            range: n,
            matrices: vec![m],
        })
    }

    /// `S|⊥> = |+>`, `S|+> = |⊥>`, `S|-> = |->` with `|+> = α|0> + β|1>`,
    /// `|-> = β|0> - α|1>`, `α = sqrt(1 - k/n)`, `β = sqrt(k/n)`.
    pub fn bernoulli(k: u64, n: u64) -> Result<Self> {
        if k == 0 || k > n {
            return Err(Error::InvalidParameter(format!(
                "Bernoulli family needs 1 <= K <= N (K={k}, N={n})"
            )));
        }
        let (a, b) = bernoulli_amplitudes(k, n);
        let r = |v: f64| Complex64::new(v, 0.0);
        // rows/cols ordered (0, 1, ⊥)
        let m = CMatrix::from_rows(vec![
            vec![r(b * b), r(-a * b), r(a)],
            vec![r(-a * b), r(a * a), r(b)],
            vec![r(a), r(b), ZERO],
        ])?;
        Ok(Self {
            kind: FamilyKind::Bernoulli { k, n },
            range: 2,
            matrices: vec![m],
        })
    }

    /// User-supplied unitaries, one per position. Only the `⊥` column is
    /// constrained: it must have no `⊥` component and, when `distributions`
    /// is given, equal `Σ_y sqrt(Pr[y <- D_x]) |y>`.
    pub fn custom(matrices: Vec<CMatrix>, distributions: Option<&[Vec<f64>]>) -> Result<Self> {
        let first = matrices
            .first()
            .ok_or_else(|| Error::InvalidParameter("no sampling unitaries given".into()))?;
        let dim = first.dim();
        if dim < 2 {
            return Err(Error::InvalidParameter("range must be non-empty".into()));
        }
        let range = dim - 1;
        for (x, m) in matrices.iter().enumerate() {
            if m.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: m.dim(),
                });
            }
            m.ensure_unitary()?;
            if m.get(range, range).norm() > UNITARY_TOL {
                return Err(Error::InvalidParameter(format!(
                    "S_{x}|⊥> has a ⊥ component"
                )));
            }
            if let Some(d) = distributions.and_then(|ds| ds.get(x)) {
                if d.len() != range {
                    return Err(Error::DimensionMismatch {
                        expected: range,
                        got: d.len(),
                    });
                }
                for (y, &pr) in d.iter().enumerate() {
                    if (m.get(y, range) - Complex64::new(pr.sqrt(), 0.0)).norm() > UNITARY_TOL {
                        return Err(Error::InvalidParameter(format!(
                            "S_{x}|⊥> does not match the distribution at y={y}"
                        )));
                    }
                }
            }
        }
        Ok(Self {
            kind: FamilyKind::Custom,
            range,
            matrices,
        })
    }

    pub fn kind(&self) -> &FamilyKind {
        &self.kind
    }

    /// Range size `N` (the `F_x` alphabet has `N + 1` symbols).
    pub fn range(&self) -> usize {
        self.range
    }

    pub fn matrix(&self, x: usize) -> &CMatrix {
        if self.matrices.len() == 1 {
            &self.matrices[0]
        } else {
            &self.matrices[x]
        }
    }

    /// Number of distinct matrices (1 for position-independent families).
    pub fn distinct(&self) -> usize {
        self.matrices.len()
    }

    /// `<y|S_x|v>` with `⊥` encoded as `N`.
    #[inline]
    pub fn entry(&self, x: usize, y: u32, v: u32) -> Complex64 {
        self.matrix(x).get(y as usize, v as usize)
    }

    /// `S_x|⊥>`, i.e. `|init_x>` over `[N]`.
    pub fn init_amplitudes(&self, x: usize) -> Vec<Complex64> {
        let m = self.matrix(x);
        (0..self.range).map(|y| m.get(y, self.range)).collect()
    }

    pub fn check_layout(&self, layout: &RegisterLayout) -> Result<()> {
        if layout.n() != self.range {
            return Err(Error::InvalidParameter(format!(
                "sampling family has range {}, layout has N={}",
                self.range,
                layout.n()
            )));
        }
        if self.matrices.len() != 1 && self.matrices.len() != layout.m() {
            return Err(Error::InvalidParameter(format!(
                "{} sampling unitaries for M={}",
                self.matrices.len(),
                layout.m()
            )));
        }
        Ok(())
    }

    pub fn max_unitarity_deviation(&self) -> f64 {
        self.matrices
            .iter()
            .map(CMatrix::unitarity_deviation)
            .fold(0.0, f64::max)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: SamplingUnitary = serde_json::from_str(text)?;
        match raw.kind {
            FamilyKind::Uniform => {
                let expected = Self::uniform(raw.range)?;
                check_loaded(&raw, &expected)?;
            }
            FamilyKind::Bernoulli { k, n } => {
                let expected = Self::bernoulli(k, n)?;
                check_loaded(&raw, &expected)?;
            }
            FamilyKind::Custom => {}
        }
        Self::custom(raw.matrices.clone(), None)?;
        Ok(raw)
    }
}

fn check_loaded(raw: &SamplingUnitary, expected: &SamplingUnitary) -> Result<()> {
    let ok = raw.matrices.len() == 1
        && raw.range == expected.range
        && raw.matrices[0].max_abs_diff(&expected.matrices[0]) <= 1e-12;
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidParameter(
            "stored matrix does not match its declared family".into(),
        ))
    }
}

/// `(α, β) = (sqrt(1 - k/n), sqrt(k/n))`.
pub fn bernoulli_amplitudes(k: u64, n: u64) -> (f64, f64) {
    let ratio = k as f64 / n as f64;
    ((1.0 - ratio).sqrt(), ratio.sqrt())
}

/// Phase oracle on `F_x` for phase multiplier `p`: `diag(w^{p y})`, identity on `⊥`.
pub fn oracle_matrix(phases: &PhaseTable, p: u32) -> CMatrix {
    let n = phases.n();
    CMatrix::from_fn(n + 1, |r, c| {
        if r != c {
            ZERO
        } else if r == n {
            ONE
        } else {
            phases.pow(p as u64 * r as u64)
        }
    })
}

/// `S_x† O_p S_x` by explicit matrix products.
pub fn recording_matrix(s: &CMatrix, phases: &PhaseTable, p: u32) -> Result<CMatrix> {
    s.adjoint().mul(&oracle_matrix(phases, p))?.mul(s)
}

/// `O|x,p,w>|f> = w^{p f(x)} |x,p,w>|f>`, identity when `f(x) = ⊥`.
pub fn apply_standard_oracle(state: &QueryState) -> QueryState {
    let layout = state.layout();
    let phases = PhaseTable::new(layout.n());
    let bot = layout.bot();
    state.apply_kernel(
        &|key: u64, amp: Complex64, out: &mut Vec<(u64, Complex64)>| {
            let x = layout.query_value(key) as usize;
            let p = layout.phase_value(key);
            let v = layout.f_value(key, x);
            if p == 0 || v == bot {
                out.push((key, amp));
            } else {
                out.push((key, amp * phases.pow(p as u64 * v as u64)));
            }
        },
    )
}

/// Precomputed `R_{x,p}` matrices for a sampling family.
#[derive(Clone, Debug)]
pub struct RecordingOperator {
    layout: Arc<RegisterLayout>,
    /// `[family index][p]`
    matrices: Vec<Vec<CMatrix>>,
}

impl RecordingOperator {
    pub fn generic(layout: Arc<RegisterLayout>, family: &SamplingUnitary) -> Result<Self> {
        family.check_layout(&layout)?;
        let phases = PhaseTable::new(layout.n());
        let matrices = (0..family.distinct())
            .map(|i| {
                (0..layout.n() as u32)
                    .map(|p| recording_matrix(family.matrix(i), &phases, p))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { layout, matrices })
    }

    pub fn matrix(&self, x: usize, p: u32) -> &CMatrix {
        let row = if self.matrices.len() == 1 { 0 } else { x };
        &self.matrices[row][p as usize]
    }

    pub fn apply(&self, state: &QueryState) -> QueryState {
        let layout = &*self.layout;
        state.apply_kernel(
            &|key: u64, amp: Complex64, out: &mut Vec<(u64, Complex64)>| {
                let x = layout.query_value(key) as usize;
                let p = layout.phase_value(key);
                let pos = layout.f_position(x);
                local_unitary_kernel(layout, pos, self.matrix(x, p))(key, amp, out)
            },
        )
    }
}

/// Generic route: `S_x† O S_x` on `F_x` controlled on `Q = x`.
pub fn apply_recording_oracle_generic(
    state: &QueryState,
    family: &SamplingUnitary,
) -> Result<QueryState> {
    Ok(RecordingOperator::generic(Arc::clone(state.layout_arc()), family)?.apply(state))
}

/// Scale of the `⊥` coefficient in the uniform closed form for recorded cells.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BotCoefficient {
    /// `w^{p f(x)} / sqrt(N)`: what the matrix route produces.
    InverseSqrtN,
    /// `w^{p f(x)} / N`: not unitary; kept to demonstrate the failure.
    InverseN,
}

/// Image of `|v>_{F_x}` under the uniform recording operator, `v = N` meaning `⊥`.
pub fn uniform_closed_form_column(
    phases: &PhaseTable,
    p: u32,
    v: u32,
    bot_coefficient: BotCoefficient,
) -> Vec<Complex64> {
    let n = phases.n();
    let nf = n as f64;
    let mut col = vec![ZERO; n + 1];
    if p == 0 {
        col[v as usize] = ONE;
        return col;
    }
    let w = |y: u64| phases.pow(p as u64 * y);
    if v as usize == n {
        for (y, c) in col.iter_mut().take(n).enumerate() {
            *c = w(y as u64) / nf.sqrt();
        }
        return col;
    }
    let wv = w(v as u64);
    col[n] = match bot_coefficient {
        BotCoefficient::InverseSqrtN => wv / nf.sqrt(),
        BotCoefficient::InverseN => wv / nf,
    };
    for (y, c) in col.iter_mut().take(n).enumerate() {
        *c = if y as u32 == v {
            (ONE + wv * (nf - 2.0)) / nf
        } else {
            (ONE - w(y as u64) - wv) / nf
        };
    }
    col
}

pub fn uniform_closed_form_matrix(phases: &PhaseTable, p: u32, bot: BotCoefficient) -> CMatrix {
    let n = phases.n();
    let cols: Vec<_> = (0..=n as u32)
        .map(|v| uniform_closed_form_column(phases, p, v, bot))
        .collect();
    CMatrix::from_fn(n + 1, |r, c| cols[c][r])
}

/// Image of `|v>_{F_x}` (order `0, 1, ⊥`) under the Bernoulli recording operator.
pub fn bernoulli_closed_form_column(alpha: f64, beta: f64, p: u32, v: u32) -> [Complex64; 3] {
    let r = |x: f64| Complex64::new(x, 0.0);
    if p.is_multiple_of(2) {
        let mut col = [ZERO; 3];
        col[v as usize] = ONE;
        return col;
    }
    let (a, b) = (alpha, beta);
    match v {
        0 => [
            r(1.0 - 2.0 * a * a * b * b),
            r(2.0 * a.powi(3) * b),
            r(2.0 * a * b * b),
        ],
        1 => [
            r(2.0 * a.powi(3) * b),
            r(1.0 - 2.0 * a.powi(4)),
            r(-2.0 * a * a * b),
        ],
        _ => [
            r(2.0 * a * b * b),
            r(-2.0 * a * a * b),
            r(1.0 - 2.0 * b * b),
        ],
    }
}

fn column_kernel<'a, C>(
    layout: &'a RegisterLayout,
    column: C,
) -> impl Fn(u64, Complex64, &mut Vec<(u64, Complex64)>) + 'a
where
    C: Fn(u32, u32) -> Vec<Complex64> + 'a,
{
    move |key, amp, out| {
        let x = layout.query_value(key) as usize;
        let p = layout.phase_value(key);
        let pos = layout.f_position(x);
        let v = layout.f_value(key, x);
        if p == 0 {
            out.push((key, amp));
            return;
        }
        for (y, c) in column(p, v).into_iter().enumerate() {
            if c != ZERO {
                out.push((layout.with_digit_at(key, pos, y as u32), c * amp));
            }
        }
    }
}

/// Uniform-family recording operator via its closed form.
pub fn apply_recording_oracle_uniform_closed_form(state: &QueryState) -> QueryState {
    let layout = state.layout();
    let phases = PhaseTable::new(layout.n());
    state.apply_kernel(&column_kernel(layout, move |p, v| {
        uniform_closed_form_column(&phases, p, v, BotCoefficient::InverseSqrtN)
    }))
}

/// Bernoulli-family recording operator via its closed form (`N = 2` layouts).
pub fn apply_recording_oracle_bernoulli_closed_form(
    state: &QueryState,
    k: u64,
    n: u64,
) -> Result<QueryState> {
    let layout = state.layout();
    if layout.n() != 2 {
        return Err(Error::InvalidParameter(
            "Bernoulli recording operator needs range {0,1}".into(),
        ));
    }
    let (a, b) = bernoulli_amplitudes(k, n);
    Ok(state.apply_kernel(&column_kernel(layout, move |p, v| {
        bernoulli_closed_form_column(a, b, p, v).to_vec()
    })))
}

fn ensure_dense_feasible(layout: &RegisterLayout) -> Result<()> {
    if layout.size() > DENSE_LIMIT {
        return Err(Error::TooLarge {
            size: layout.size(),
            limit: DENSE_LIMIT,
        });
    }
    Ok(())
}

/// `T = I_{QPW} ⊗_x S_x`, mapping recording-model states to standard-model states.
pub fn apply_translation(state: &QueryState, family: &SamplingUnitary) -> Result<QueryState> {
    translate(state, family, false)
}

/// `T†`.
pub fn apply_translation_adjoint(
    state: &QueryState,
    family: &SamplingUnitary,
) -> Result<QueryState> {
    translate(state, family, true)
}

fn translate(state: &QueryState, family: &SamplingUnitary, adjoint: bool) -> Result<QueryState> {
    let layout = state.layout();
    ensure_dense_feasible(layout)?;
    family.check_layout(layout)?;
    let mut out = state.clone();
    for x in 0..layout.m() {
        let m = if adjoint {
            family.matrix(x).adjoint()
        } else {
            family.matrix(x).clone()
        };
        out = out.apply_local_unitary(Register::F(x), &m)?;
    }
    Ok(out)
}

/// `T|0>|⊥^M> = |0>|init>`, the standard model's initial state.
pub fn init_standard_state(
    layout: Arc<RegisterLayout>,
    family: &SamplingUnitary,
) -> Result<QueryState> {
    apply_translation(&QueryState::init_recording(layout), family)
}

/// `|0>|f>` for a fixed classical input.
pub fn init_fixed_input(layout: Arc<RegisterLayout>, f: &[u32]) -> Result<QueryState> {
    let mut comp = crate::layout::BasisComponent::initial(&layout);
    if f.len() != layout.m() || f.iter().any(|&v| v as usize >= layout.n()) {
        return Err(Error::InvalidParameter(format!(
            "input {f:?} is not a function [M] -> [N]"
        )));
    }
    comp.f = f.to_vec();
    QueryState::from_components(layout, [(comp, ONE)])
}

/// `‖Π_succ T |φ>‖²` without materializing `T|φ>`.
///
/// Components are grouped on `(x, p, w, f outside z)`; within a group the
/// amplitudes are combined with `Π_{x' ∈ z} <y_{x'}|S_{x'}|f(x')>` before
/// squaring, so interference between different recorded values is exact.
/// Components with malformed `z` contribute nothing.
pub fn success_projection_recording(
    state: &QueryState,
    relation: &OutputRelation,
    family: &SamplingUnitary,
) -> Result<f64> {
    let layout = state.layout();
    relation.validate(layout)?;
    family.check_layout(layout)?;
    let mut groups: Vec<(u64, Complex64)> = Vec::new();
    for &(key, amp) in state.entries() {
        let Some(reqs) = relation.requirements(layout, key) else {
            continue;
        };
        let mut coeff = amp;
        let mut group = key;
        for &(x, y) in &reqs {
            let pos = layout.f_position(x);
            coeff *= family.entry(x, y, layout.f_value(key, x));
            group = layout.with_digit_at(group, pos, 0);
        }
        if coeff != ZERO {
            groups.push((group, coeff));
        }
    }
    groups.sort_by_key(|&(g, _)| g);
    let mut total = 0.0;
    let mut i = 0;
    while i < groups.len() {
        let mut acc = ZERO;
        let g = groups[i].0;
        while i < groups.len() && groups[i].0 == g {
            acc += groups[i].1;
            i += 1;
        }
        total += acc.norm_sqr();
    }
    Ok(total)
}
