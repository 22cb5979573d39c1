use std::time::Duration;

use pop_bench::{run_lrr, run_trial, BenchConfig, BenchError, DsKind, ReclaimerKind, StallSpec};

fn short(reclaimer: ReclaimerKind, ds: DsKind) -> BenchConfig {
    BenchConfig {
        ds,
        reclaimer,
        threads: 4,
        key_range: 256,
        duration: Duration::from_millis(150),
        reclaim_freq: 64,
        sample_every: Duration::from_millis(10),
        ..BenchConfig::default()
    }
}

#[test]
fn read_only_nr_smoke() {
    let cfg = BenchConfig {
        reclaimer: ReclaimerKind::Nr,
        threads: 1,
        insert_pct: 0,
        delete_pct: 0,
        duration: Duration::from_millis(500),
        ..BenchConfig::default()
    };
    let r = run_trial(&cfg).unwrap();
    assert!(r.throughput_mops > 0.0);
    assert_eq!(r.total_ops, r.contains);
    assert_eq!(r.signals_sent, 0);
    assert_eq!(r.retired, 0);
}

#[test]
fn every_pair_runs_and_accounts() {
    for ds in DsKind::ALL {
        for rec in ReclaimerKind::ALL {
            let r = run_trial(&short(rec, ds)).unwrap();
            assert!(r.total_ops > 0, "{rec}/{ds}");
            assert_eq!(r.total_ops, r.inserts + r.deletes + r.contains);
            assert!(r.freed <= r.retired, "{rec}/{ds}");
            if !rec.uses_signals() {
                assert_eq!(r.signals_sent, 0, "{rec}/{ds}");
            }
            if rec == ReclaimerKind::Nr {
                assert_eq!(r.freed, 0);
            }
        }
    }
}

#[test]
fn debug_alloc_trial_is_clean() {
    let cfg = BenchConfig {
        debug_alloc: true,
        ..short(ReclaimerKind::HePop, DsKind::Hml)
    };
    let r = run_trial(&cfg).unwrap();
    assert_eq!((r.uaf_detected, r.double_frees), (0, 0));
}

#[test]
fn stall_window_is_sampled() {
    let cfg = BenchConfig {
        duration: Duration::from_millis(400),
        stall: Some("tid=1,at-ms=50,for-ms=200".parse().unwrap()),
        ..short(ReclaimerKind::Ebr, DsKind::Hml)
    };
    let r = run_trial(&cfg).unwrap();
    let during = r.stall_max_retire_list.expect("stall metric");
    assert!(during <= r.max_retire_list);
    assert!(r.samples.len() >= 10);
    // EBR cannot advance past the sleeping reader.
    assert!(
        during > cfg.reclaim_freq,
        "ebr retire list {during} during stall"
    );
}

#[test]
fn stall_tid_must_exist() {
    let cfg = BenchConfig {
        stall: Some(StallSpec {
            tid: 4,
            at: Duration::ZERO,
            duration: Duration::ZERO,
        }),
        ..short(ReclaimerKind::Hp, DsKind::Ll)
    };
    assert!(matches!(run_trial(&cfg), Err(BenchError::BadStall(_))));
}

#[test]
fn lrr_readers_never_retire() {
    for rec in [
        ReclaimerKind::HpPop,
        ReclaimerKind::EpochPop,
        ReclaimerKind::Hp,
    ] {
        let cfg = BenchConfig {
            key_range: 4096,
            ..short(rec, DsKind::Hml)
        };
        let r = run_lrr(&cfg).unwrap();
        assert_eq!(r.reader_retire_list, 0, "{rec}");
        assert!(r.read_ops > 0 && r.read_ops <= r.contains, "{rec}");
        assert!(r.read_throughput_mops > 0.0);
    }
}

#[test]
fn lrr_needs_even_threads() {
    let cfg = BenchConfig {
        threads: 3,
        lrr: true,
        ..short(ReclaimerKind::HpPop, DsKind::Hml)
    };
    assert!(matches!(run_trial(&cfg), Err(BenchError::OddLrrThreads(3))));
}

#[test]
fn hp_asym_is_an_error_not_a_panic() {
    let cfg = short(ReclaimerKind::HpAsym, DsKind::Hml);
    assert!(matches!(run_trial(&cfg), Err(BenchError::Unimplemented(_))));
}
