use std::time::{Duration, Instant};

use pop_smr::model::{check, ModelConfig, ModelScheme, Mutation, Role, Verdict};

const BUDGET: usize = ModelConfig::DEFAULT_BUDGET;

#[test]
fn unmutated_models_are_safe_at_two_threads() {
    for scheme in ModelScheme::ALL {
        let start = Instant::now();
        let v = check(scheme, Mutation::None, 2, BUDGET);
        let took = start.elapsed();
        assert!(v.is_safe(), "{}: {v}", scheme.name());
        assert!(
            took < Duration::from_secs(10),
            "{} took {took:?}",
            scheme.name()
        );
        println!("{:<10} 2 threads: {v} in {took:?}", scheme.name());
    }
}

#[test]
fn unmutated_models_are_safe_at_three_threads() {
    for scheme in ModelScheme::ALL {
        let start = Instant::now();
        let v = check(scheme, Mutation::None, 3, BUDGET);
        let took = start.elapsed();
        assert!(v.is_safe(), "{}: {v}", scheme.name());
        assert!(
            took < Duration::from_secs(300),
            "{} took {took:?}",
            scheme.name()
        );
        println!("{:<10} 3 threads: {v} in {took:?}", scheme.name());
    }
}

#[test]
fn every_mutant_yields_a_violating_trace() {
    for scheme in ModelScheme::ALL {
        for mutant in scheme.mutants() {
            let v = check(scheme, mutant, 2, BUDGET);
            match &v {
                Verdict::Violation { trace, .. } => {
                    assert_eq!(trace.last().unwrap().action, "Access");
                    assert!(trace.iter().any(|s| s.action == "Free"));
                }
                other => panic!(
                    "{} / {}: expected a violation, got {other}",
                    scheme.name(),
                    mutant.name()
                ),
            }
        }
    }
}

#[test]
fn mutants_are_also_caught_with_three_threads() {
    for scheme in ModelScheme::ALL {
        for mutant in scheme.mutants() {
            let v = check(scheme, mutant, 3, BUDGET);
            assert!(
                matches!(v, Verdict::Violation { .. }),
                "{} / {}: {v}",
                scheme.name(),
                mutant.name()
            );
        }
    }
}

#[test]
fn racing_reclaimers_both_finish() {
    // Two reclaimers each wait for the other's handler; a stuck state would
    // surface as a Stuck verdict rather than Safe.
    for scheme in [
        ModelScheme::HpPop,
        ModelScheme::HePop,
        ModelScheme::EpochPop,
    ] {
        let cfg = ModelConfig::new(scheme, vec![Role::Reclaimer, Role::Reclaimer]);
        let v = pop_smr::model::explore(&cfg);
        assert!(v.is_safe(), "{}: {v}", scheme.name());
    }
}

#[test]
fn violation_trace_is_shortest_and_readable() {
    let v = check(ModelScheme::HpPop, Mutation::DropWait, 2, BUDGET);
    let text = v.to_string();
    assert!(text.starts_with("VIOLATION"));
    let trace = v.trace().unwrap();
    // load, store, validate, unlink, retire, snapshot, ping, wait, scan, free, access
    assert!(trace.len() <= 11, "{text}");
}
