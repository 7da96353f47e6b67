use std::sync::Arc;

use rand::Rng;

use super::{haar_step, QueryAlgorithm, Step};
use crate::error::{Error, Result};
use crate::layout::{Register, RegisterLayout};
use crate::matrix::CMatrix;
use crate::relation::OutputRelation;

/// `F, Query, F†` on `P`: adds `f(x)` to `P` (one query).
pub fn read_gadget(layout: &RegisterLayout) -> Vec<Step> {
    let f = CMatrix::fourier(layout.n());
    vec![
        Step::Unitary {
            target: Register::P,
            matrix: f.clone(),
        },
        Step::Query,
        Step::Unitary {
            target: Register::P,
            matrix: f.adjoint(),
        },
    ]
}

/// Two-query read: `f(x)` ends up added into `W[slot]` and `P` is restored to 0.
pub fn read_gadget_uncomputed(layout: &RegisterLayout, slot: usize) -> Result<Vec<Step>> {
    let n = layout.n();
    let negate: Vec<usize> = (0..n).map(|p| (n - p) % n).collect();
    let mut steps = read_gadget(layout);
    steps.push(Step::mod_add(layout, Register::P, Register::W(slot))?);
    steps.push(Step::Unitary {
        target: Register::P,
        matrix: CMatrix::permutation(&negate)?,
    });
    steps.extend(read_gadget(layout));
    Ok(steps)
}

/// Grover search for one preimage of 1 over `[M]` with `iterations` queries,
/// output copied into the single position slot.
pub fn grover_ksearch(m: usize, iterations: usize) -> Result<QueryAlgorithm> {
    let layout = Arc::new(RegisterLayout::ksearch(m, 1, &[])?);
    let diffusion = CMatrix::from_fn(m, |r, c| {
        let v = 2.0 / m as f64 - if r == c { 1.0 } else { 0.0 };
        num_complex::Complex64::new(v, 0.0)
    });
    let mut steps = vec![
        Step::Unitary {
            target: Register::Q,
            matrix: CMatrix::fourier(m),
        },
        Step::Unitary {
            target: Register::P,
            matrix: CMatrix::permutation(&[1, 0])?,
        },
    ];
    for _ in 0..iterations {
        steps.push(Step::Query);
        steps.push(Step::Unitary {
            target: Register::Q,
            matrix: diffusion.clone(),
        });
    }
    steps.push(Step::mod_add(&layout, Register::Q, Register::W(0))?);
    steps.push(Step::OutputMark);
    QueryAlgorithm::new(layout, OutputRelation::ksearch(1), steps)
}

/// Reads positions `0..r` classically (two queries each) into scratch slots
/// and writes the first colliding pair, or the guess `(0, 1, f(0))`.
pub fn classical_reader(m: usize, n: usize, r: usize) -> Result<QueryAlgorithm> {
    if r < 2 || r > m {
        return Err(Error::InvalidParameter(format!(
            "reader needs 2 <= r <= M (r={r}, M={m})"
        )));
    }
    let layout = Arc::new(RegisterLayout::collision(m, n, 1, &vec![n as u32; r])?);
    let mut steps = Vec::new();
    for i in 0..r {
        steps.push(Step::add_constant(Register::Q, i as u32));
        steps.extend(read_gadget_uncomputed(&layout, 3 + i)?);
        steps.push(Step::add_constant(Register::Q, ((m - i) % m) as u32));
    }
    let rows = n.pow(r as u32);
    let table = (0..rows)
        .map(|row| {
            let vals: Vec<usize> = (0..r).rev().map(|j| row / n.pow(j as u32) % n).collect();
            let mut out = vec![0, 1, vals[0] as u32];
            'search: for i in 0..r {
                for j in i + 1..r {
                    if vals[i] == vals[j] {
                        out = vec![i as u32, j as u32, vals[i] as u32];
                        break 'search;
                    }
                }
            }
            out
        })
        .collect();
    steps.push(Step::Shift {
        controls: (0..r).map(|i| Register::W(3 + i)).collect(),
        targets: vec![Register::W(0), Register::W(1), Register::W(2)],
        table,
    });
    steps.push(Step::OutputMark);
    QueryAlgorithm::new(layout, OutputRelation::collision(1), steps)
}

/// Probability that `r` uniform values in `[N]` contain a repeat.
pub fn classical_reader_success(n: usize, r: usize) -> f64 {
    1.0 - (0..r).map(|i| 1.0 - i as f64 / n as f64).product::<f64>()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RandomAlgorithmSpec {
    pub m: usize,
    /// Range size; ignored for search (always 2).
    pub n: usize,
    /// Relation size `K`.
    pub k: usize,
    pub queries: usize,
    pub search: bool,
}

/// Layers of Haar unitaries on `Q` and `P`, plus one random workspace gate
/// per layer (Haar, or a random shift controlled by `Q` or `P`), separated by queries.
pub fn random_algorithm<R: Rng + ?Sized>(
    spec: RandomAlgorithmSpec,
    rng: &mut R,
) -> Result<QueryAlgorithm> {
    let (layout, relation) = if spec.search {
        (
            RegisterLayout::ksearch(spec.m, spec.k, &[])?,
            OutputRelation::ksearch(spec.k),
        )
    } else {
        (
            RegisterLayout::collision(spec.m, spec.n, spec.k, &[])?,
            OutputRelation::collision(spec.k),
        )
    };
    let layout = Arc::new(layout);
    let slots = layout.slots().len();
    let mut steps = Vec::new();
    for layer in 0..=spec.queries {
        steps.push(haar_step(&layout, Register::Q, rng)?);
        steps.push(haar_step(&layout, Register::P, rng)?);
        let w = Register::W(rng.gen_range(0..slots));
        if rng.gen_bool(0.25) {
            steps.push(haar_step(&layout, w, rng)?);
        } else {
            let control = if rng.gen_bool(0.5) {
                Register::Q
            } else {
                Register::P
            };
            let radix = layout.radix(w)?;
            let rows = layout.radix(control)?;
            steps.push(Step::Shift {
                controls: vec![control],
                targets: vec![w],
                table: (0..rows).map(|_| vec![rng.gen_range(0..radix)]).collect(),
            });
        }
        if layer < spec.queries {
            steps.push(Step::Query);
        }
    }
    steps.push(Step::OutputMark);
    QueryAlgorithm::new(layout, relation, steps)
}
