//! Register structure of the joint algorithm/oracle space.
//!
//! A basis state is `|x, p, w>|f>` with `x` in `[M]` (query register `Q`),
//! `p` in `[N]` (phase register `P`), `w` a tuple of workspace slots and `f`
//! a length-`M` array over `[N] ∪ {⊥}` where `⊥` is stored as the value `N`.
//!
//! Every basis state is encoded as a mixed-radix `u64` key whose digits are
//! `(x, p, w_0, .., w_{s-1}, f(0), .., f(M-1))`, most significant first, so
//! numeric key order is the canonical lexicographic order over `(x, p, w, f)`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SlotRole {
    Output,
    Scratch,
}

/// One workspace slot over the alphabet `[radix]`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Slot {
    pub name: String,
    pub radix: u32,
    pub role: SlotRole,
}

impl Slot {
    pub fn output(name: impl Into<String>, radix: u32) -> Self {
        Self {
            name: name.into(),
            radix,
            role: SlotRole::Output,
        }
    }

    pub fn scratch(name: impl Into<String>, radix: u32) -> Self {
        Self {
            name: name.into(),
            radix,
            role: SlotRole::Scratch,
        }
    }
}

/// Register selector.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Register {
    Q,
    P,
    W(usize),
    F(usize),
}

impl fmt::Display for Register {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Register::Q => write!(f, "Q"),
            Register::P => write!(f, "P"),
            Register::W(i) => write!(f, "W{i}"),
            Register::F(x) => write!(f, "F{x}"),
        }
    }
}

impl FromStr for Register {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidRegister(s.to_string());
        match s {
            "Q" => Ok(Register::Q),
            "P" => Ok(Register::P),
            _ if s.starts_with('W') => s[1..].parse().map(Register::W).map_err(|_| bad()),
            _ if s.starts_with('F') => s[1..].parse().map(Register::F).map_err(|_| bad()),
            _ => Err(bad()),
        }
    }
}

impl Serialize for Register {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Register {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Serializable description of a layout; `RegisterLayout` is the validated form.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayoutSpec {
    pub m: usize,
    pub n: usize,
    #[serde(default)]
    pub slots: Vec<Slot>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RegisterLayout {
    m: usize,
    n: usize,
    slots: Vec<Slot>,
    radices: Vec<u64>,
    strides: Vec<u64>,
    size: u64,
}

impl RegisterLayout {
    pub fn new(m: usize, n: usize, slots: Vec<Slot>) -> Result<Self> {
        if m == 0 || n == 0 {
            return Err(Error::InvalidLayout(format!("M={m}, N={n} must be >= 1")));
        }
        if let Some(s) = slots.iter().find(|s| s.radix == 0) {
            return Err(Error::InvalidLayout(format!(
                "slot {} has empty alphabet",
                s.name
            )));
        }
        let mut radices = Vec::with_capacity(2 + slots.len() + m);
        radices.push(m as u64);
        radices.push(n as u64);
        radices.extend(slots.iter().map(|s| s.radix as u64));
        radices.extend(std::iter::repeat_n(n as u64 + 1, m));

        let mut strides = vec![0u64; radices.len()];
        let mut acc: u64 = 1;
        for i in (0..radices.len()).rev() {
            strides[i] = acc;
            acc = acc.checked_mul(radices[i]).ok_or_else(|| {
                Error::InvalidLayout(format!(
                    "basis-space cardinality M*N*|W|*(N+1)^M overflows u64 (M={m}, N={n})"
                ))
            })?;
        }
        Ok(Self {
            m,
            n,
            slots,
            radices,
            strides,
            size: acc,
        })
    }

    pub fn from_spec(spec: &LayoutSpec) -> Result<Self> {
        Self::new(spec.m, spec.n, spec.slots.clone())
    }

    pub fn spec(&self) -> LayoutSpec {
        LayoutSpec {
            m: self.m,
            n: self.n,
            slots: self.slots.clone(),
        }
    }

    /// Layout with `k` collision output triples `(x1: [M], x2: [M], y: [N] ∪ {⊥})`
    /// followed by scratch slots of the given radices.
    pub fn collision(m: usize, n: usize, k: usize, scratch: &[u32]) -> Result<Self> {
        let mut slots = Vec::with_capacity(3 * k + scratch.len());
        for i in 0..k {
            slots.push(Slot::output(format!("x1_{i}"), m as u32));
            slots.push(Slot::output(format!("x2_{i}"), m as u32));
            slots.push(Slot::output(format!("y_{i}"), n as u32 + 1));
        }
        for (i, &r) in scratch.iter().enumerate() {
            slots.push(Slot::scratch(format!("s{i}"), r));
        }
        Self::new(m, n, slots)
    }

    /// Layout over the binary range (`N = 2`) with `k` position slots, then scratch.
    pub fn ksearch(m: usize, k: usize, scratch: &[u32]) -> Result<Self> {
        let mut slots = Vec::with_capacity(k + scratch.len());
        for i in 0..k {
            slots.push(Slot::output(format!("pos_{i}"), m as u32));
        }
        for (i, &r) in scratch.iter().enumerate() {
            slots.push(Slot::scratch(format!("s{i}"), r));
        }
        Self::new(m, 2, slots)
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Stored value of `⊥` in an `F_x` digit.
    #[inline]
    pub fn bot(&self) -> u32 {
        self.n as u32
    }

    pub fn slots(&self) -> &[Slot] {
        &self.slots
    }

    /// Total number of basis states `M * N * |W| * (N+1)^M`.
    pub fn size(&self) -> u64 {
        self.size
    }

    /// `|W|`, the product of slot alphabets.
    pub fn workspace_size(&self) -> u64 {
        self.slots.iter().map(|s| s.radix as u64).product()
    }

    /// Position of a register in the digit list.
    pub fn position(&self, reg: Register) -> Result<usize> {
        let s = self.slots.len();
        match reg {
            Register::Q => Ok(0),
            Register::P => Ok(1),
            Register::W(i) if i < s => Ok(2 + i),
            Register::F(x) if x < self.m => Ok(2 + s + x),
            _ => Err(Error::InvalidRegister(reg.to_string())),
        }
    }

    pub fn radix(&self, reg: Register) -> Result<u32> {
        Ok(self.radices[self.position(reg)?] as u32)
    }

    pub(crate) fn radix_at(&self, pos: usize) -> u64 {
        self.radices[pos]
    }

    pub(crate) fn stride_at(&self, pos: usize) -> u64 {
        self.strides[pos]
    }

    #[inline]
    pub(crate) fn digit_at(&self, key: u64, pos: usize) -> u32 {
        ((key / self.strides[pos]) % self.radices[pos]) as u32
    }

    #[inline]
    pub(crate) fn with_digit_at(&self, key: u64, pos: usize, value: u32) -> u64 {
        let old = self.digit_at(key, pos) as u64;
        key - old * self.strides[pos] + value as u64 * self.strides[pos]
    }

    #[inline]
    pub fn query_value(&self, key: u64) -> u32 {
        self.digit_at(key, 0)
    }

    #[inline]
    pub fn phase_value(&self, key: u64) -> u32 {
        self.digit_at(key, 1)
    }

    #[inline]
    pub fn slot_value(&self, key: u64, slot: usize) -> u32 {
        self.digit_at(key, 2 + slot)
    }

    #[inline]
    pub fn f_value(&self, key: u64, x: usize) -> u32 {
        self.digit_at(key, 2 + self.slots.len() + x)
    }

    pub(crate) fn f_position(&self, x: usize) -> usize {
        2 + self.slots.len() + x
    }

    pub fn digit(&self, key: u64, reg: Register) -> Result<u32> {
        Ok(self.digit_at(key, self.position(reg)?))
    }

    pub fn encode(&self, c: &BasisComponent) -> Result<u64> {
        if c.w.len() != self.slots.len() || c.f.len() != self.m {
            return Err(Error::InvalidParameter(format!(
                "component shape (|w|={}, |f|={}) does not match layout",
                c.w.len(),
                c.f.len()
            )));
        }
        let digits = std::iter::once(c.x)
            .chain(std::iter::once(c.p))
            .chain(c.w.iter().copied())
            .chain(c.f.iter().copied());
        let mut key = 0u64;
        for (pos, d) in digits.enumerate() {
            if d as u64 >= self.radices[pos] {
                return Err(Error::InvalidParameter(format!(
                    "digit {d} out of range at position {pos} (radix {})",
                    self.radices[pos]
                )));
            }
            key += d as u64 * self.strides[pos];
        }
        Ok(key)
    }

    pub fn decode(&self, key: u64) -> BasisComponent {
        let s = self.slots.len();
        BasisComponent {
            x: self.digit_at(key, 0),
            p: self.digit_at(key, 1),
            w: (0..s).map(|i| self.digit_at(key, 2 + i)).collect(),
            f: (0..self.m).map(|x| self.digit_at(key, 2 + s + x)).collect(),
        }
    }
}

/// One computational basis state `|x, p, w>|f>`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BasisComponent {
    pub x: u32,
    pub p: u32,
    pub w: Vec<u32>,
    pub f: Vec<u32>,
}

impl BasisComponent {
    /// `|0>_Q |0>_P |0>_W |⊥^M>_F`.
    pub fn initial(layout: &RegisterLayout) -> Self {
        Self {
            x: 0,
            p: 0,
            w: vec![0; layout.slots().len()],
            f: vec![layout.bot(); layout.m()],
        }
    }

    /// Number of recorded (non-`⊥`) entries of `f`.
    pub fn recorded(&self, bot: u32) -> usize {
        self.f.iter().filter(|&&v| v != bot).count()
    }
}
