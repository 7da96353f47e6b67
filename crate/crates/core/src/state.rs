//! Sparse and dense joint states over a [`RegisterLayout`].

use std::io::Write;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::layout::{BasisComponent, Register, RegisterLayout};
use crate::matrix::CMatrix;

/// Amplitudes with magnitude below this are dropped after every operator.
pub const PRUNE_EPS: f64 = 1e-14;

/// Largest basis-space cardinality for which a dense vector is materialized.
pub const DENSE_LIMIT: u64 = 1 << 24;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Linear map given by its action on basis keys.
///
/// `apply` pushes every `(key', coefficient * amp)` term produced from one input
/// basis state. Both representations feed their components through the same kernel.
pub trait Kernel {
    fn apply(&self, key: u64, amp: Complex64, out: &mut Vec<(u64, Complex64)>);
}

impl<F> Kernel for F
where
    F: Fn(u64, Complex64, &mut Vec<(u64, Complex64)>),
{
    fn apply(&self, key: u64, amp: Complex64, out: &mut Vec<(u64, Complex64)>) {
        self(key, amp, out)
    }
}

/// Kernel applying `U` to one register digit.
pub(crate) fn local_unitary_kernel<'a>(
    layout: &'a RegisterLayout,
    pos: usize,
    u: &'a CMatrix,
) -> impl Fn(u64, Complex64, &mut Vec<(u64, Complex64)>) + 'a {
    let stride = layout.stride_at(pos);
    let radix = layout.radix_at(pos) as usize;
    move |key, amp, out| {
        let v = layout.digit_at(key, pos) as usize;
        let base = key - v as u64 * stride;
        for row in 0..radix {
            let c = u.get(row, v);
            if c != ZERO {
                out.push((base + row as u64 * stride, c * amp));
            }
        }
    }
}

fn check_local_unitary(layout: &RegisterLayout, target: Register, u: &CMatrix) -> Result<usize> {
    let pos = layout.position(target)?;
    let radix = layout.radix_at(pos) as usize;
    if u.dim() != radix {
        return Err(Error::DimensionMismatch {
            expected: radix,
            got: u.dim(),
        });
    }
    u.ensure_unitary()?;
    Ok(pos)
}

/// Sparse superposition over basis components, kept sorted by canonical key.
#[derive(Clone, Debug)]
pub struct QueryState {
    layout: Arc<RegisterLayout>,
    entries: Vec<(u64, Complex64)>,
}

impl QueryState {
    /// `|0>_Q |0>_P |0>_W |⊥^M>_F` with amplitude 1.
    pub fn init_recording(layout: Arc<RegisterLayout>) -> Self {
        let key = layout
            .encode(&BasisComponent::initial(&layout))
            .expect("initial component is always in range");
        Self {
            layout,
            entries: vec![(key, Complex64::new(1.0, 0.0))],
        }
    }

    pub fn zero(layout: Arc<RegisterLayout>) -> Self {
        Self {
            layout,
            entries: Vec::new(),
        }
    }

    /// Builds a state from `(key, amplitude)` terms; duplicate keys are summed in input order.
    pub fn from_terms(layout: Arc<RegisterLayout>, terms: Vec<(u64, Complex64)>) -> Result<Self> {
        if let Some(&(k, _)) = terms.iter().find(|(k, _)| *k >= layout.size()) {
            return Err(Error::InvalidParameter(format!("key {k} out of range")));
        }
        Ok(Self {
            layout,
            entries: canonicalize(terms),
        })
    }

    pub fn from_components(
        layout: Arc<RegisterLayout>,
        components: impl IntoIterator<Item = (BasisComponent, Complex64)>,
    ) -> Result<Self> {
        let terms = components
            .into_iter()
            .map(|(c, a)| Ok((layout.encode(&c)?, a)))
            .collect::<Result<Vec<_>>>()?;
        Self::from_terms(layout, terms)
    }

    pub fn layout(&self) -> &RegisterLayout {
        &self.layout
    }

    pub fn layout_arc(&self) -> &Arc<RegisterLayout> {
        &self.layout
    }

    /// Canonically sorted `(key, amplitude)` pairs.
    pub fn entries(&self) -> &[(u64, Complex64)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn components(&self) -> impl Iterator<Item = (BasisComponent, Complex64)> + '_ {
        self.entries
            .iter()
            .map(|&(k, a)| (self.layout.decode(k), a))
    }

    pub fn amplitude_of_key(&self, key: u64) -> Complex64 {
        match self.entries.binary_search_by_key(&key, |&(k, _)| k) {
            Ok(i) => self.entries[i].1,
            Err(_) => ZERO,
        }
    }

    pub fn amplitude(&self, c: &BasisComponent) -> Complex64 {
        self.layout
            .encode(c)
            .map(|k| self.amplitude_of_key(k))
            .unwrap_or(ZERO)
    }

    pub fn norm_sqr(&self) -> f64 {
        self.entries.iter().map(|(_, a)| a.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    fn same_layout(&self, other: &Self) -> Result<()> {
        if Arc::ptr_eq(&self.layout, &other.layout) || *self.layout == *other.layout {
            Ok(())
        } else {
            Err(Error::LayoutMismatch)
        }
    }

    /// `<self|other>`.
    pub fn inner_product(&self, other: &Self) -> Result<Complex64> {
        self.same_layout(other)?;
        let (a, b) = (&self.entries, &other.entries);
        let (mut i, mut j) = (0, 0);
        let mut acc = ZERO;
        while i < a.len() && j < b.len() {
            match a[i].0.cmp(&b[j].0) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    acc += a[i].1.conj() * b[j].1;
                    i += 1;
                    j += 1;
                }
            }
        }
        Ok(acc)
    }

    /// `‖self - other‖`.
    pub fn distance(&self, other: &Self) -> Result<f64> {
        self.same_layout(other)?;
        let (a, b) = (&self.entries, &other.entries);
        let (mut i, mut j) = (0, 0);
        let mut acc = 0.0;
        while i < a.len() || j < b.len() {
            let ka = a.get(i).map(|e| e.0).unwrap_or(u64::MAX);
            let kb = b.get(j).map(|e| e.0).unwrap_or(u64::MAX);
            if ka < kb {
                acc += a[i].1.norm_sqr();
                i += 1;
            } else if kb < ka {
                acc += b[j].1.norm_sqr();
                j += 1;
            } else {
                acc += (a[i].1 - b[j].1).norm_sqr();
                i += 1;
                j += 1;
            }
        }
        Ok(acc.sqrt())
    }

    /// Zeroes every component failing `keep`; no renormalization.
    pub fn project(&self, keep: impl Fn(&BasisComponent) -> bool) -> Self {
        self.project_keys(|k| keep(&self.layout.decode(k)))
    }

    /// [`Self::project`] with a predicate on raw keys (avoids decoding).
    pub fn project_keys(&self, keep: impl Fn(u64) -> bool) -> Self {
        Self {
            layout: Arc::clone(&self.layout),
            entries: self
                .entries
                .iter()
                .copied()
                .filter(|&(k, _)| keep(k))
                .collect(),
        }
    }

    pub fn scale(&self, factor: Complex64) -> Self {
        Self {
            layout: Arc::clone(&self.layout),
            entries: canonicalize(self.entries.iter().map(|&(k, a)| (k, a * factor)).collect()),
        }
    }

    pub fn apply_kernel(&self, kernel: &impl Kernel) -> Self {
        let mut terms = Vec::with_capacity(self.entries.len() * 2);
        for &(k, a) in &self.entries {
            kernel.apply(k, a, &mut terms);
        }
        Self {
            layout: Arc::clone(&self.layout),
            entries: canonicalize(terms),
        }
    }

    /// Applies `I ⊗ U ⊗ I` with `U` acting on `target`.
    pub fn apply_local_unitary(&self, target: Register, u: &CMatrix) -> Result<Self> {
        let pos = check_local_unitary(&self.layout, target, u)?;
        Ok(self.apply_kernel(&local_unitary_kernel(&self.layout, pos, u)))
    }

    pub fn to_dense(&self) -> Result<DenseState> {
        let mut dense = DenseState::zeros(Arc::clone(&self.layout))?;
        for &(k, a) in &self.entries {
            dense.amps[k as usize] = a;
        }
        Ok(dense)
    }

    /// One JSON object per component, in canonical order:
    /// `{"x":..,"p":..,"w":[..],"f":[..],"re":..,"im":..}` with `⊥` written as `N`.
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> Result<()> {
        for (c, a) in self.components() {
            let line = ComponentLine {
                x: c.x,
                p: c.p,
                w: c.w,
                f: c.f,
                re: a.re,
                im: a.im,
            };
            serde_json::to_writer(&mut out, &line)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn read_jsonl(layout: Arc<RegisterLayout>, text: &str) -> Result<Self> {
        let mut comps = Vec::new();
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            let c: ComponentLine = serde_json::from_str(line)?;
            comps.push((
                BasisComponent {
                    x: c.x,
                    p: c.p,
                    w: c.w,
                    f: c.f,
                },
                Complex64::new(c.re, c.im),
            ));
        }
        Self::from_components(layout, comps)
    }
}

#[derive(Serialize, Deserialize)]
struct ComponentLine {
    x: u32,
    p: u32,
    w: Vec<u32>,
    f: Vec<u32>,
    re: f64,
    im: f64,
}

/// Sorts by key (stable, so duplicates are summed in emission order) and prunes.
fn canonicalize(mut terms: Vec<(u64, Complex64)>) -> Vec<(u64, Complex64)> {
    terms.sort_by_key(|&(k, _)| k);
    let mut out: Vec<(u64, Complex64)> = Vec::with_capacity(terms.len());
    for (k, a) in terms {
        match out.last_mut() {
            Some(last) if last.0 == k => last.1 += a,
            _ => out.push((k, a)),
        }
    }
    out.retain(|(_, a)| a.norm() >= PRUNE_EPS);
    out
}

/// Full amplitude vector indexed by the canonical mixed-radix key.
#[derive(Clone, Debug)]
pub struct DenseState {
    layout: Arc<RegisterLayout>,
    amps: Vec<Complex64>,
}

impl DenseState {
    pub fn zeros(layout: Arc<RegisterLayout>) -> Result<Self> {
        let size = layout.size();
        if size > DENSE_LIMIT {
            return Err(Error::TooLarge {
                size,
                limit: DENSE_LIMIT,
            });
        }
        Ok(Self {
            amps: vec![ZERO; size as usize],
            layout,
        })
    }

    pub fn layout(&self) -> &RegisterLayout {
        &self.layout
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn apply_kernel(&self, kernel: &impl Kernel) -> Self {
        let mut next = vec![ZERO; self.amps.len()];
        let mut buf = Vec::new();
        for (k, &a) in self.amps.iter().enumerate() {
            if a == ZERO {
                continue;
            }
            buf.clear();
            kernel.apply(k as u64, a, &mut buf);
            for &(k2, c) in &buf {
                next[k2 as usize] += c;
            }
        }
        for a in next.iter_mut() {
            if a.norm() < PRUNE_EPS {
                *a = ZERO;
            }
        }
        Self {
            layout: Arc::clone(&self.layout),
            amps: next,
        }
    }

    pub fn apply_local_unitary(&self, target: Register, u: &CMatrix) -> Result<Self> {
        let pos = check_local_unitary(&self.layout, target, u)?;
        Ok(self.apply_kernel(&local_unitary_kernel(&self.layout, pos, u)))
    }

    pub fn to_sparse(&self) -> QueryState {
        let terms = self
            .amps
            .iter()
            .enumerate()
            .filter(|(_, a)| **a != ZERO)
            .map(|(k, &a)| (k as u64, a))
            .collect();
        QueryState {
            layout: Arc::clone(&self.layout),
            entries: canonicalize(terms),
        }
    }

    /// `max_k |self[k] - other[k]|`.
    pub fn max_abs_diff(&self, other: &QueryState) -> f64 {
        let mut worst = 0.0f64;
        let mut it = other.entries().iter().peekable();
        for (k, &a) in self.amps.iter().enumerate() {
            let b = match it.peek() {
                Some(&&(ko, b)) if ko == k as u64 => {
                    it.next();
                    b
                }
                _ => ZERO,
            };
            worst = worst.max((a - b).norm());
        }
        worst
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layout::Slot;
    use crate::verify::random_state;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn initial_state_is_single_bot_component() {
        let l = Arc::new(RegisterLayout::new(2, 2, vec![]).unwrap());
        let s = QueryState::init_recording(Arc::clone(&l));
        let comps: Vec<_> = s.components().collect();
        assert_eq!(comps.len(), 1);
        assert_eq!(comps[0].0.f, vec![2, 2]);
        assert_eq!((comps[0].0.x, comps[0].0.p), (0, 0));
        assert_eq!(comps[0].1, c(1.0, 0.0));
    }

    #[test]
    fn smallest_layout_has_unit_norm() {
        let l = Arc::new(RegisterLayout::new(1, 1, vec![]).unwrap());
        let s = QueryState::init_recording(l);
        assert_eq!(s.len(), 1);
        assert!((s.norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn collision_slot_initial_component() {
        let l = Arc::new(RegisterLayout::collision(4, 4, 1, &[]).unwrap());
        let s = QueryState::init_recording(Arc::clone(&l));
        let (comp, _) = s.components().next().unwrap();
        assert_eq!(comp.f, vec![4; 4]);
        assert_eq!(comp.w, vec![0, 0, 0]);
    }

    #[test]
    fn identity_leaves_state_unchanged() {
        let l = Arc::new(RegisterLayout::new(3, 2, vec![Slot::scratch("s", 2)]).unwrap());
        let s = random_state(&l, 30, 1);
        let t = s
            .apply_local_unitary(Register::Q, &CMatrix::identity(3))
            .unwrap();
        assert_eq!(s.distance(&t).unwrap(), 0.0);
    }

    #[test]
    fn fourier_twice_negates_phase_register() {
        // F^2 |p> = |-p mod N>; oracle: explicit 2x2 product for N = 2 is the identity
        for n in [2usize, 3, 4] {
            let l = Arc::new(RegisterLayout::new(2, n, vec![]).unwrap());
            let s = random_state(&l, 12, n as u64);
            let f = CMatrix::fourier(n);
            let twice = s
                .apply_local_unitary(Register::P, &f)
                .unwrap()
                .apply_local_unitary(Register::P, &f)
                .unwrap();
            let expected = QueryState::from_components(
                Arc::clone(&l),
                s.components().map(|(mut comp, a)| {
                    comp.p = ((n as u32) - comp.p) % n as u32;
                    (comp, a)
                }),
            )
            .unwrap();
            assert!(twice.distance(&expected).unwrap() < 1e-12);
        }
        let f2 = CMatrix::fourier(2);
        assert!(f2.mul(&f2).unwrap().max_abs_diff(&CMatrix::identity(2)) < 1e-15);
    }

    #[test]
    fn rejects_bad_unitaries() {
        let l = Arc::new(RegisterLayout::new(2, 3, vec![]).unwrap());
        let s = QueryState::init_recording(l);
        assert!(matches!(
            s.apply_local_unitary(Register::P, &CMatrix::identity(2)),
            Err(Error::DimensionMismatch { .. })
        ));
        let mut bad = CMatrix::identity(3);
        bad.set(1, 1, c(0.5, 0.0));
        assert!(matches!(
            s.apply_local_unitary(Register::P, &bad),
            Err(Error::NotUnitary { .. })
        ));
        assert!(s
            .apply_local_unitary(Register::W(0), &CMatrix::identity(1))
            .is_err());
    }

    #[test]
    fn unitary_preserves_norm() {
        let l = Arc::new(RegisterLayout::new(3, 3, vec![Slot::scratch("s", 3)]).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut s = random_state(&l, 40, 3);
        for reg in [Register::Q, Register::P, Register::W(0), Register::F(1)] {
            let dim = l.radix(reg).unwrap() as usize;
            s = s
                .apply_local_unitary(reg, &CMatrix::random_unitary(dim, &mut rng))
                .unwrap();
            assert!((s.norm() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn projection_of_initial_state_onto_recorded_is_zero() {
        let l = Arc::new(RegisterLayout::new(3, 2, vec![]).unwrap());
        let s = QueryState::init_recording(Arc::clone(&l));
        assert!(s.project(|c| c.recorded(2) >= 1).is_empty());
    }

    #[test]
    fn inner_product_with_self_is_norm_squared() {
        let l = Arc::new(RegisterLayout::new(3, 3, vec![]).unwrap());
        let s = random_state(&l, 50, 5).scale(c(0.7, 0.2));
        let ip = s.inner_product(&s).unwrap();
        assert!((ip.re - s.norm_sqr()).abs() < 1e-12 && ip.im.abs() < 1e-12);
    }

    #[test]
    fn pythagoras_on_random_state() {
        let l = Arc::new(RegisterLayout::new(4, 3, vec![Slot::scratch("s", 3)]).unwrap());
        let s = random_state(&l, 100, 9);
        assert!(s.len() > 90 && s.len() <= 100);
        let pred = |comp: &BasisComponent| (comp.x + comp.f[0]).is_multiple_of(2);
        let yes = s.project(pred);
        let no = s.project(|comp| !pred(comp));
        // oracle: direct summation over the component list
        let direct: f64 = s.entries().iter().map(|(_, a)| a.norm_sqr()).sum();
        assert!((yes.norm_sqr() + no.norm_sqr() - direct).abs() < 1e-9);
    }

    #[test]
    fn projection_is_idempotent_and_self_adjoint() {
        let l = Arc::new(RegisterLayout::new(3, 3, vec![]).unwrap());
        let a = random_state(&l, 60, 1);
        let b = random_state(&l, 60, 2);
        let pred = |comp: &BasisComponent| comp.p != 0;
        let pa = a.project(pred);
        assert_eq!(pa.project(pred).distance(&pa).unwrap(), 0.0);
        let lhs = pa.inner_product(&b).unwrap();
        let rhs = a.inner_product(&b.project(pred)).unwrap();
        assert!((lhs - rhs).norm() < 1e-9);
    }

    #[test]
    fn layout_mismatch_is_rejected() {
        let a = QueryState::init_recording(Arc::new(RegisterLayout::new(2, 2, vec![]).unwrap()));
        let b = QueryState::init_recording(Arc::new(RegisterLayout::new(2, 3, vec![]).unwrap()));
        assert!(matches!(a.inner_product(&b), Err(Error::LayoutMismatch)));
    }

    #[test]
    fn dense_and_sparse_agree() {
        let l = Arc::new(RegisterLayout::new(3, 3, vec![Slot::scratch("s", 2)]).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut sparse = random_state(&l, 25, 4);
        let mut dense = sparse.to_dense().unwrap();
        for reg in [
            Register::P,
            Register::F(0),
            Register::Q,
            Register::W(0),
            Register::F(2),
        ] {
            let u = CMatrix::random_unitary(l.radix(reg).unwrap() as usize, &mut rng);
            sparse = sparse.apply_local_unitary(reg, &u).unwrap();
            dense = dense.apply_local_unitary(reg, &u).unwrap();
            assert!(dense.max_abs_diff(&sparse) <= 1e-9);
        }
        assert!(dense.to_sparse().distance(&sparse).unwrap() < 1e-9);
    }

    #[test]
    fn dense_guard() {
        let l = Arc::new(RegisterLayout::new(12, 4, vec![]).unwrap());
        assert!(matches!(DenseState::zeros(l), Err(Error::TooLarge { .. })));
    }

    #[test]
    fn jsonl_round_trip_is_canonical() {
        let l = Arc::new(RegisterLayout::new(2, 2, vec![Slot::output("o", 2)]).unwrap());
        let s = random_state(&l, 8, 3);
        let mut buf = Vec::new();
        s.write_jsonl(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.lines().next().unwrap().starts_with("{\"x\":"));
        let back = QueryState::read_jsonl(Arc::clone(&l), &text).unwrap();
        assert_eq!(back.distance(&s).unwrap(), 0.0);
    }
}
