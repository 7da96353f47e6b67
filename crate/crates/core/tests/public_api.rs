use reclab_core::algorithms::{
    random_algorithm, run, success_probability, OracleMode, QueryAlgorithm, RandomAlgorithmSpec,
};
use reclab_core::bounds::{build_sorting_instance, collision_progress_bound};
use reclab_core::progress::{ProgressParams, ProgressTable};
use reclab_core::rng::derived;
use reclab_core::SamplingUnitary;

#[test]
fn algorithm_files_round_trip_and_rerun_identically() {
    let spec = RandomAlgorithmSpec {
        m: 3,
        n: 3,
        k: 1,
        queries: 2,
        search: false,
    };
    let a = random_algorithm(spec, &mut derived(1, 0)).unwrap();
    let b = QueryAlgorithm::from_json(&a.to_json().unwrap()).unwrap();
    assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
    let fam = SamplingUnitary::uniform(3).unwrap();
    let ra = run(&a, OracleMode::Recording(&fam), false).unwrap();
    let rb = run(&b, OracleMode::Recording(&fam), false).unwrap();
    assert_eq!(ra.final_state.entries(), rb.final_state.entries());
    let sa =
        success_probability(&ra.final_state, a.relation(), OracleMode::Recording(&fam)).unwrap();
    let ss = {
        let r = run(&a, OracleMode::Standard(&fam), false).unwrap();
        success_probability(&r.final_state, a.relation(), OracleMode::Standard(&fam)).unwrap()
    };
    assert!((sa - ss).abs() < 1e-9);
}

#[test]
fn untouched_state_has_unit_progress_only_at_zero() {
    let spec = RandomAlgorithmSpec {
        m: 4,
        n: 2,
        k: 1,
        queries: 3,
        search: false,
    };
    let a = random_algorithm(spec, &mut derived(2, 0)).unwrap();
    let fam = SamplingUnitary::uniform(2).unwrap();
    let r = run(&a, OracleMode::Recording(&fam), true).unwrap();
    let table = ProgressTable::from_snapshots(&r.snapshots, ProgressParams::Collision { n: 2 }, 2);
    assert_eq!(table.t_max(), 3);
    assert!((table.q[0][0] - 1.0).abs() < 1e-12);
    assert_eq!(table.q[0][1], 0.0);
    assert!(table.check().passes());
}

#[test]
fn hand_computed_values() {
    // C(4,2) (4 sqrt(4/100))^2 = 6 * 0.64
    assert!((collision_progress_bound(4, 2, 100) - 3.84).abs() < 1e-12);
    assert_eq!(
        build_sorting_instance(&[1, 0, 1, 0], 3, 8).unwrap(),
        vec![2, 2, 1, 0, 1, 0, 0, 0]
    );
}
