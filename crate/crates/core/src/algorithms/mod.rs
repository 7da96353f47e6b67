//! Query algorithms as data, and their execution in either oracle model.

mod builders;
mod emulate;
mod sliced;

pub use builders::{
    classical_reader, classical_reader_success, grover_ksearch, random_algorithm, read_gadget,
    read_gadget_uncomputed, RandomAlgorithmSpec,
};
pub use emulate::{
    emulate_algorithm2, guard_range, normalized_queries, scaling_runs, space_grid, summarize,
    Emulation, PointSummary, ScalingPoint,
};
pub use sliced::{sliced_run, SliceReport};

use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::layout::{LayoutSpec, Register, RegisterLayout};
use crate::matrix::CMatrix;
use crate::oracles::{
    apply_standard_oracle, init_fixed_input, init_standard_state, success_projection_recording,
    RecordingOperator, SamplingUnitary,
};
use crate::relation::OutputRelation;
use crate::state::{local_unitary_kernel, QueryState, DENSE_LIMIT};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Step {
    Unitary {
        target: Register,
        matrix: CMatrix,
    },
    /// `targets += table[controls]` digit-wise modulo each target's radix.
    /// `table` is indexed by the mixed-radix value of `controls`, first
    /// control most significant.
    Shift {
        #[serde(default)]
        controls: Vec<Register>,
        targets: Vec<Register>,
        table: Vec<Vec<u32>>,
    },
    Query,
    /// Output slots are final at this point (used by sliced runs).
    OutputMark,
}

impl Step {
    /// `dst += src` (mod the radix of `dst`).
    pub fn mod_add(layout: &RegisterLayout, src: Register, dst: Register) -> Result<Self> {
        let radix = layout.radix(src)?;
        Ok(Step::Shift {
            controls: vec![src],
            targets: vec![dst],
            table: (0..radix).map(|v| vec![v]).collect(),
        })
    }

    /// Unconditional `dst += value`.
    pub fn add_constant(dst: Register, value: u32) -> Self {
        Step::Shift {
            controls: vec![],
            targets: vec![dst],
            table: vec![vec![value]],
        }
    }

    fn validate(&self, layout: &RegisterLayout) -> Result<()> {
        let not_oracle = |r: &Register| -> Result<usize> {
            if matches!(r, Register::F(_)) {
                return Err(Error::InvalidAlgorithm(format!(
                    "algorithm steps may not act on oracle register {r}"
                )));
            }
            layout.position(*r)
        };
        match self {
            Step::Unitary { target, matrix } => {
                let pos = not_oracle(target)?;
                if matrix.dim() as u64 != layout.radix_at(pos) {
                    return Err(Error::DimensionMismatch {
                        expected: layout.radix_at(pos) as usize,
                        got: matrix.dim(),
                    });
                }
                matrix.ensure_unitary()
            }
            Step::Shift {
                controls,
                targets,
                table,
            } => {
                let mut seen = Vec::new();
                for r in controls.iter().chain(targets) {
                    let pos = not_oracle(r)?;
                    if seen.contains(&pos) {
                        return Err(Error::InvalidAlgorithm(format!(
                            "register {r} used twice in shift"
                        )));
                    }
                    seen.push(pos);
                }
                let rows: u64 = controls
                    .iter()
                    .map(|r| layout.radix(*r).unwrap() as u64)
                    .product();
                if table.len() as u64 != rows || table.iter().any(|row| row.len() != targets.len())
                {
                    return Err(Error::InvalidAlgorithm(format!(
                        "shift table must have {rows} rows of {} entries",
                        targets.len()
                    )));
                }
                Ok(())
            }
            Step::Query | Step::OutputMark => Ok(()),
        }
    }
}

#[derive(Clone, Debug)]
pub struct QueryAlgorithm {
    layout: Arc<RegisterLayout>,
    relation: OutputRelation,
    steps: Vec<Step>,
}

#[derive(Serialize, Deserialize)]
struct AlgorithmFile {
    layout: LayoutSpec,
    relation: OutputRelation,
    steps: Vec<Step>,
}

impl QueryAlgorithm {
    pub fn new(
        layout: Arc<RegisterLayout>,
        relation: OutputRelation,
        steps: Vec<Step>,
    ) -> Result<Self> {
        relation.validate(&layout)?;
        for s in &steps {
            s.validate(&layout)?;
        }
        Ok(Self {
            layout,
            relation,
            steps,
        })
    }

    pub fn layout(&self) -> &Arc<RegisterLayout> {
        &self.layout
    }

    pub fn relation(&self) -> &OutputRelation {
        &self.relation
    }

    pub fn steps(&self) -> &[Step] {
        &self.steps
    }

    /// Number of `Query` steps, `T`.
    pub fn queries(&self) -> usize {
        self.steps
            .iter()
            .filter(|s| matches!(s, Step::Query))
            .count()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&AlgorithmFile {
            layout: self.layout.spec(),
            relation: self.relation,
            steps: self.steps.clone(),
        })?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: AlgorithmFile = serde_json::from_str(text)?;
        Self::new(
            Arc::new(RegisterLayout::from_spec(&file.layout)?),
            file.relation,
            file.steps,
        )
    }
}

/// Applies a non-query step.
pub(crate) fn apply_step(state: &QueryState, step: &Step) -> QueryState {
    let layout = state.layout();
    match step {
        Step::Unitary { target, matrix } => {
            let pos = layout.position(*target).expect("validated");
            state.apply_kernel(&local_unitary_kernel(layout, pos, matrix))
        }
        Step::Shift {
            controls,
            targets,
            table,
        } => {
            let cpos: Vec<usize> = controls
                .iter()
                .map(|r| layout.position(*r).expect("validated"))
                .collect();
            let tpos: Vec<usize> = targets
                .iter()
                .map(|r| layout.position(*r).expect("validated"))
                .collect();
            state.apply_kernel(
                &|key: u64, amp: Complex64, out: &mut Vec<(u64, Complex64)>| {
                    let row = cpos.iter().fold(0usize, |acc, &p| {
                        acc * layout.radix_at(p) as usize + layout.digit_at(key, p) as usize
                    });
                    let mut k = key;
                    for (&p, &inc) in tpos.iter().zip(&table[row]) {
                        let radix = layout.radix_at(p);
                        let v = (layout.digit_at(k, p) as u64 + inc as u64) % radix;
                        k = layout.with_digit_at(k, p, v as u32);
                    }
                    out.push((k, amp));
                },
            )
        }
        Step::Query | Step::OutputMark => state.clone(),
    }
}

#[derive(Clone, Copy, Debug)]
pub enum OracleMode<'a> {
    /// Phase oracle on the superposition `T|0>|⊥^M>` over inputs.
    Standard(&'a SamplingUnitary),
    /// Phase oracle on one classical input.
    FixedInput(&'a [u32]),
    /// Recording operator `S† O S` from `|0>|⊥^M>`.
    Recording(&'a SamplingUnitary),
}

#[derive(Clone, Debug)]
pub struct RunResult {
    pub final_state: QueryState,
    /// State just before each query, then the final state (`T + 1` entries);
    /// empty unless requested.
    pub snapshots: Vec<QueryState>,
}

pub(crate) enum QueryOp {
    Standard,
    Recording(RecordingOperator),
}

impl QueryOp {
    pub(crate) fn apply(&self, state: &QueryState) -> QueryState {
        match self {
            QueryOp::Standard => apply_standard_oracle(state),
            QueryOp::Recording(r) => r.apply(state),
        }
    }
}

pub(crate) fn prepare(
    algorithm: &QueryAlgorithm,
    mode: OracleMode,
) -> Result<(QueryState, QueryOp)> {
    let layout = Arc::clone(algorithm.layout());
    Ok(match mode {
        OracleMode::Standard(family) => {
            if layout.size() > DENSE_LIMIT {
                return Err(Error::TooLarge {
                    size: layout.size(),
                    limit: DENSE_LIMIT,
                });
            }
            (init_standard_state(layout, family)?, QueryOp::Standard)
        }
        OracleMode::FixedInput(f) => (init_fixed_input(layout, f)?, QueryOp::Standard),
        OracleMode::Recording(family) => {
            let op = RecordingOperator::generic(Arc::clone(&layout), family)?;
            (QueryState::init_recording(layout), QueryOp::Recording(op))
        }
    })
}

pub fn run(algorithm: &QueryAlgorithm, mode: OracleMode, capture: bool) -> Result<RunResult> {
    let (mut state, op) = prepare(algorithm, mode)?;
    let mut snapshots = Vec::new();
    for step in algorithm.steps() {
        match step {
            Step::Query => {
                if capture {
                    snapshots.push(state.clone());
                }
                state = op.apply(&state);
            }
            other => state = apply_step(&state, other),
        }
    }
    if capture {
        snapshots.push(state.clone());
    }
    Ok(RunResult {
        final_state: state,
        snapshots,
    })
}

/// `σ = ‖Π_succ ψ_T‖²`; recording-model states go through the translation shortcut.
pub fn success_probability(
    state: &QueryState,
    relation: &OutputRelation,
    mode: OracleMode,
) -> Result<f64> {
    let layout = state.layout();
    relation.validate(layout)?;
    match mode {
        OracleMode::Standard(_) | OracleMode::FixedInput(_) => {
            Ok(state.project_keys(|k| relation.holds(layout, k)).norm_sqr())
        }
        OracleMode::Recording(family) => success_projection_recording(state, relation, family),
    }
}

/// Convenience: Haar unitary on a register of `layout`.
pub fn haar_step<R: rand::Rng + ?Sized>(
    layout: &RegisterLayout,
    target: Register,
    rng: &mut R,
) -> Result<Step> {
    let dim = layout.radix(target)? as usize;
    Ok(Step::Unitary {
        target,
        matrix: CMatrix::random_unitary(dim, rng),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracles::apply_translation;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn empty_algorithm_keeps_initial_state() {
        let l = Arc::new(RegisterLayout::collision(2, 2, 1, &[]).unwrap());
        let a = QueryAlgorithm::new(Arc::clone(&l), OutputRelation::collision(1), vec![]).unwrap();
        let fam = SamplingUnitary::uniform(2).unwrap();
        let r = run(&a, OracleMode::Recording(&fam), true).unwrap();
        assert!(
            r.final_state
                .distance(&QueryState::init_recording(l))
                .unwrap()
                == 0.0
        );
        assert_eq!(r.snapshots.len(), 1);
    }

    #[test]
    fn rejects_steps_on_oracle_register() {
        let l = Arc::new(RegisterLayout::collision(2, 2, 1, &[]).unwrap());
        let bad = Step::Unitary {
            target: Register::F(0),
            matrix: CMatrix::identity(3),
        };
        assert!(QueryAlgorithm::new(l, OutputRelation::collision(1), vec![bad]).is_err());
    }

    #[test]
    fn shift_table_shape_checked() {
        let l = Arc::new(RegisterLayout::collision(2, 2, 1, &[]).unwrap());
        let bad = Step::Shift {
            controls: vec![Register::Q],
            targets: vec![Register::W(0)],
            table: vec![vec![1]],
        };
        assert!(QueryAlgorithm::new(l, OutputRelation::collision(1), vec![bad]).is_err());
    }

    #[test]
    fn json_round_trip() {
        let l = Arc::new(RegisterLayout::collision(2, 2, 1, &[]).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let steps = vec![
            haar_step(&l, Register::Q, &mut rng).unwrap(),
            Step::Query,
            Step::mod_add(&l, Register::Q, Register::W(0)).unwrap(),
            Step::OutputMark,
        ];
        let a = QueryAlgorithm::new(l, OutputRelation::collision(1), steps).unwrap();
        let text = a.to_json().unwrap();
        let b = QueryAlgorithm::from_json(&text).unwrap();
        assert_eq!(a.steps(), b.steps());
        assert_eq!(b.queries(), 1);
        assert!(text.contains(r#""op":"query""#));
        assert!(text.contains(r#""target":"Q""#));
    }

    #[test]
    fn random_one_query_indistinguishable() {
        let l = Arc::new(RegisterLayout::collision(2, 2, 1, &[]).unwrap());
        let fam = SamplingUnitary::uniform(2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let steps = vec![
            haar_step(&l, Register::Q, &mut rng).unwrap(),
            haar_step(&l, Register::P, &mut rng).unwrap(),
            Step::Query,
            haar_step(&l, Register::Q, &mut rng).unwrap(),
        ];
        let a = QueryAlgorithm::new(Arc::clone(&l), OutputRelation::collision(1), steps).unwrap();
        let psi = run(&a, OracleMode::Standard(&fam), false)
            .unwrap()
            .final_state;
        let phi = run(&a, OracleMode::Recording(&fam), false)
            .unwrap()
            .final_state;
        assert!(
            psi.distance(&apply_translation(&phi, &fam).unwrap())
                .unwrap()
                <= 1e-9
        );
        assert!((psi.norm() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn unsatisfiable_relation_has_zero_success() {
        // 2 disjoint collisions need 4 positions; M = 3
        let l = Arc::new(RegisterLayout::collision(3, 2, 2, &[]).unwrap());
        let fam = SamplingUnitary::uniform(2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut steps = vec![];
        for i in 0..6 {
            steps.push(haar_step(&l, Register::W(i), &mut rng).unwrap());
        }
        let a = QueryAlgorithm::new(l, OutputRelation::collision(2), steps).unwrap();
        let r = run(&a, OracleMode::Recording(&fam), false).unwrap();
        let rel = *a.relation();
        assert_eq!(
            success_probability(&r.final_state, &rel, OracleMode::Recording(&fam)).unwrap(),
            0.0
        );
    }
}
