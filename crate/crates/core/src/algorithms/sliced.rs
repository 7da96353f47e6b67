//! Time-segmented runs: outputs are measured at every `OutputMark` and
//! attributed to the slice of queries they follow.

use std::collections::BTreeSet;
use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{apply_step, OracleMode, QueryAlgorithm, QueryOp, Step};
use crate::error::{Error, Result};
use crate::oracles::{apply_translation, init_fixed_input, RecordingOperator, SamplingUnitary};
use crate::relation::RelationKind;
use crate::rng::derived;
use crate::state::QueryState;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SliceReport {
    /// Disjoint valid outputs per slice (collision pairs, or positions holding 1).
    pub counts: Vec<usize>,
    /// Raw measured output substrings per slice.
    pub outputs: Vec<Vec<Vec<u32>>>,
    /// The sampled input.
    pub input: Vec<u32>,
    pub last_slice_short: bool,
}

/// Samples the output slots, collapses, and resets them to 0.
fn measure_and_reset<R: Rng + ?Sized>(
    state: &QueryState,
    slots: &[usize],
    rng: &mut R,
) -> Result<(Vec<u32>, QueryState)> {
    let layout = state.layout();
    let outcome_of =
        |key: u64| -> Vec<u32> { slots.iter().map(|&s| layout.slot_value(key, s)).collect() };
    let mut weights: Vec<(Vec<u32>, f64)> = Vec::new();
    for &(key, a) in state.entries() {
        let o = outcome_of(key);
        match weights.binary_search_by(|(w, _)| w.cmp(&o)) {
            Ok(i) => weights[i].1 += a.norm_sqr(),
            Err(i) => weights.insert(i, (o, a.norm_sqr())),
        }
    }
    let total: f64 = weights.iter().map(|w| w.1).sum();
    let mut pick = rng.gen::<f64>() * total;
    let mut chosen = weights.last().map(|w| w.0.clone()).unwrap_or_default();
    for (o, w) in &weights {
        if pick < *w {
            chosen = o.clone();
            break;
        }
        pick -= w;
    }
    let prob = weights.iter().find(|w| w.0 == chosen).map_or(0.0, |w| w.1);
    let scale = Complex64::new(1.0 / prob.sqrt(), 0.0);
    let terms = state
        .entries()
        .iter()
        .filter(|&&(key, _)| outcome_of(key) == chosen)
        .map(|&(key, a)| {
            let reset = slots
                .iter()
                .fold(key, |k, &s| layout.with_digit_at(k, 2 + s, 0));
            (reset, a * scale)
        })
        .collect();
    Ok((
        chosen,
        QueryState::from_terms(Arc::clone(state.layout_arc()), terms)?,
    ))
}

fn sample_input<R: Rng + ?Sized>(family: &SamplingUnitary, m: usize, rng: &mut R) -> Vec<u32> {
    (0..m)
        .map(|x| {
            let amps = family.init_amplitudes(x);
            let mut pick = rng.gen::<f64>();
            for (y, a) in amps.iter().enumerate() {
                pick -= a.norm_sqr();
                if pick < 0.0 {
                    return y as u32;
                }
            }
            amps.len() as u32 - 1
        })
        .collect()
}

/// Maximum number of pairwise disjoint edges (exhaustive; inputs are tiny).
fn max_disjoint(edges: &[(u32, u32)]) -> usize {
    fn go(edges: &[(u32, u32)], used: &mut BTreeSet<u32>) -> usize {
        let Some((&(a, b), rest)) = edges.split_first() else {
            return 0;
        };
        let mut best = go(rest, used);
        if !used.contains(&a) && !used.contains(&b) {
            used.insert(a);
            used.insert(b);
            best = best.max(1 + go(rest, used));
            used.remove(&a);
            used.remove(&b);
        }
        best
    }
    go(edges, &mut BTreeSet::new())
}

fn count_valid(kind: RelationKind, outputs: &[Vec<u32>], f: &[u32], bot: u32) -> usize {
    match kind {
        RelationKind::Collision => {
            let mut edges = BTreeSet::new();
            for z in outputs {
                for t in z.chunks(3) {
                    let (a, b, y) = (t[0], t[1], t[2]);
                    if a != b && y != bot && f[a as usize] == y && f[b as usize] == y {
                        edges.insert((a.min(b), a.max(b)));
                    }
                }
            }
            max_disjoint(&edges.into_iter().collect::<Vec<_>>())
        }
        RelationKind::KSearch => outputs
            .iter()
            .flatten()
            .filter(|&&x| f[x as usize] == 1)
            .collect::<BTreeSet<_>>()
            .len(),
    }
}

/// Runs `algorithm` on a sampled input, measuring the output substring at
/// every `OutputMark`. An output emitted after `q` queries belongs to slice
/// `max(q - 1, 0) / slice_length`.
pub fn sliced_run(
    algorithm: &QueryAlgorithm,
    slice_length: usize,
    mode: OracleMode,
    seed: u64,
) -> Result<SliceReport> {
    if slice_length == 0 {
        return Err(Error::InvalidParameter("slice length must be >= 1".into()));
    }
    let layout = Arc::clone(algorithm.layout());
    let relation = *algorithm.relation();
    let slots: Vec<usize> = (relation.first_slot..relation.first_slot + relation.width()).collect();
    let t = algorithm.queries();
    let slices = t.div_ceil(slice_length).max(1);
    let last_slice_short = !t.is_multiple_of(slice_length);
    if last_slice_short {
        log::warn!("slice length {slice_length} does not divide T={t}; last slice is shorter");
    }
    let mut rng = derived(seed, 0);

    let (mut state, op, family) = match mode {
        OracleMode::Standard(family) => {
            let f = sample_input(family, layout.m(), &mut rng);
            (
                init_fixed_input(Arc::clone(&layout), &f)?,
                QueryOp::Standard,
                None,
            )
        }
        OracleMode::FixedInput(f) => (
            init_fixed_input(Arc::clone(&layout), f)?,
            QueryOp::Standard,
            None,
        ),
        OracleMode::Recording(family) => (
            QueryState::init_recording(Arc::clone(&layout)),
            QueryOp::Recording(RecordingOperator::generic(Arc::clone(&layout), family)?),
            Some(family),
        ),
    };
    let mut outputs: Vec<Vec<Vec<u32>>> = vec![Vec::new(); slices];
    let mut done = 0usize;
    for step in algorithm.steps() {
        match step {
            Step::Query => {
                state = op.apply(&state);
                done += 1;
            }
            Step::OutputMark => {
                let (z, collapsed) = measure_and_reset(&state, &slots, &mut rng)?;
                outputs[(done.saturating_sub(1) / slice_length).min(slices - 1)].push(z);
                state = collapsed;
            }
            other => state = apply_step(&state, other),
        }
    }
    let input = match family {
        None => state.entries().first().map_or_else(Vec::new, |&(k, _)| {
            (0..layout.m()).map(|x| layout.f_value(k, x)).collect()
        }),
        Some(family) => {
            let translated = apply_translation(&state, family)?;
            let f_slots: Vec<usize> = (0..layout.m()).map(|x| layout.slots().len() + x).collect();
            measure_and_reset(&translated, &f_slots, &mut rng)?.0
        }
    };
    let counts = outputs
        .iter()
        .map(|o| count_valid(relation.kind, o, &input, layout.bot()))
        .collect();
    Ok(SliceReport {
        counts,
        outputs,
        input,
        last_slice_short,
    })
}

#[cfg(test)]
mod tests {
    use super::super::{classical_reader, Step};
    use super::*;
    use crate::layout::{Register, RegisterLayout};
    use crate::relation::OutputRelation;

    #[test]
    fn disjoint_matching() {
        assert_eq!(max_disjoint(&[(0, 1), (1, 2), (2, 3)]), 2);
        assert_eq!(max_disjoint(&[(0, 1), (0, 2)]), 1);
        assert_eq!(max_disjoint(&[]), 0);
    }

    #[test]
    fn zero_output_algorithm() {
        let l = Arc::new(RegisterLayout::collision(3, 2, 1, &[]).unwrap());
        let steps = vec![Step::Query, Step::OutputMark, Step::Query, Step::OutputMark];
        let a = QueryAlgorithm::new(l, OutputRelation::collision(1), steps).unwrap();
        let fam = SamplingUnitary::uniform(2).unwrap();
        let r = sliced_run(&a, 1, OracleMode::Standard(&fam), 0).unwrap();
        // output slot stays (0, 0, 0): never a valid pair
        assert_eq!(r.counts, vec![0, 0]);
    }

    #[test]
    fn single_slice_matches_final_output() {
        let a = classical_reader(3, 2, 3).unwrap();
        let fam = SamplingUnitary::uniform(2).unwrap();
        for seed in 0..20 {
            let r = sliced_run(&a, 6, OracleMode::Standard(&fam), seed).unwrap();
            assert_eq!(r.counts.len(), 1);
            // three binary values always contain a repeat
            assert_eq!(r.counts[0], 1);
            let rec = sliced_run(&a, 6, OracleMode::Recording(&fam), seed).unwrap();
            assert_eq!(rec.counts, vec![1]);
        }
    }

    #[test]
    fn two_slice_hand_trace() {
        // read x=0 and x=1 (2 queries each), output; then read x=2, output (2, 0 or 1)
        let l = Arc::new(RegisterLayout::collision(3, 2, 1, &[2, 2, 2]).unwrap());
        let mut steps = Vec::new();
        for i in 0..2u32 {
            steps.push(Step::add_constant(Register::Q, i));
            steps.extend(super::super::read_gadget_uncomputed(&l, 3 + i as usize).unwrap());
            steps.push(Step::add_constant(Register::Q, (3 - i) % 3));
        }
        steps.push(Step::add_constant(Register::W(0), 0));
        steps.push(Step::add_constant(Register::W(1), 1));
        steps.push(Step::mod_add(&l, Register::W(3), Register::W(2)).unwrap());
        steps.push(Step::OutputMark);
        steps.push(Step::add_constant(Register::Q, 2));
        steps.extend(super::super::read_gadget_uncomputed(&l, 5).unwrap());
        steps.push(Step::add_constant(Register::Q, 1));
        steps.push(Step::add_constant(Register::W(0), 2));
        steps.push(Step::mod_add(&l, Register::W(5), Register::W(2)).unwrap());
        steps.push(Step::OutputMark);
        let a = QueryAlgorithm::new(l, OutputRelation::collision(1), steps).unwrap();
        let f = [1u32, 1, 0];
        let r = sliced_run(&a, 4, OracleMode::FixedInput(&f), 0).unwrap();
        assert_eq!(r.outputs[0], vec![vec![0, 1, 1]]);
        assert_eq!(r.outputs[1], vec![vec![2, 0, 0]]);
        assert_eq!(r.counts, vec![1, 0]);
        assert!(r.last_slice_short);
    }
}
