use pop_smr::schemes::can_free_sorted;
use pop_smr::{can_free, MAX};

const TOP: u64 = 16;

/// Walks every era in the lifetime and asks whether any slot holds it.
fn brute_force(birth: u64, retire: u64, eras: &[u64]) -> bool {
    !(birth..=retire).any(|e| eras.contains(&e))
}

/// Every slot vector of length `len` over eras `[0, TOP]` plus the empty
/// marker.
fn slot_vectors(len: usize) -> Vec<Vec<u64>> {
    let values: Vec<u64> = (0..=TOP).chain([MAX]).collect();
    let mut out = vec![Vec::new()];
    for _ in 0..len {
        out = out
            .into_iter()
            .flat_map(|v| {
                values.iter().map(move |&e| {
                    let mut v = v.clone();
                    v.push(e);
                    v
                })
            })
            .collect();
    }
    out
}

#[test]
fn can_free_agrees_with_brute_force_on_the_whole_grid() {
    let mut checked = 0u64;
    for len in 0..=4 {
        for eras in slot_vectors(len) {
            let mut sorted: Vec<u64> = eras.iter().copied().filter(|&e| e != MAX).collect();
            sorted.sort_unstable();
            for birth in 0..=TOP {
                for retire in birth..=TOP {
                    let want = brute_force(birth, retire, &eras);
                    assert_eq!(
                        can_free(birth, retire, &eras),
                        want,
                        "[{birth}, {retire}] {eras:?}"
                    );
                    assert_eq!(can_free_sorted(birth, retire, &sorted), want);
                    checked += 1;
                }
            }
        }
    }
    // 153 lifetimes times (1 + 18 + 18^2 + 18^3 + 18^4) slot vectors
    assert_eq!(checked, 153 * (1 + 18 + 324 + 5832 + 104_976));
}

#[test]
fn empty_slots_never_block() {
    assert!(can_free(0, TOP, &[MAX; 4]));
    assert!(can_free(3, 3, &[]));
}

#[test]
fn lifetime_endpoints_are_inclusive() {
    assert!(!can_free(4, 9, &[4]));
    assert!(!can_free(4, 9, &[9]));
    assert!(can_free(4, 9, &[3, 10]));
}
