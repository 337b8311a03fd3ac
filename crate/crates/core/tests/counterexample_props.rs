use strichartz_core::counterexample::{self, MSetSpec};
use strichartz_core::lattice::cubic_identity_check;

#[test]
fn ratio_fixtures() {
    let s = counterexample::l8_ratio_sweep(&[1, 2, 4]).unwrap();
    let p8: Vec<f64> = s.rows.iter().map(|r| r.l8_eighth_power).collect();
    assert_eq!(p8, vec![70.0, 4900.0, 190120.0]);
    assert_eq!(s.rows[0].ratio, 70.0 / 16.0);
    assert!(s.decreases.is_empty());
}

#[test]
fn histogram_partitions_the_admissible_triples() {
    for (n, xi4) in [(8i64, 0i64), (8, -1), (16, 2), (32, 0)] {
        let h = counterexample::m_set_histogram(n, xi4).unwrap();
        assert_eq!(h.counts.iter().sum::<u64>(), h.admissible);
        for alpha in [1u64, 2, 3] {
            let direct = counterexample::m_set_count(MSetSpec { alpha, xi4, n }).unwrap();
            assert_eq!(direct, h.count(alpha), "N={n} ξ₄={xi4} α={alpha}");
        }
    }
}

#[test]
fn witness_is_a_subset() {
    for alpha in 1..=3 {
        let spec = MSetSpec { alpha, xi4: 0, n: 32 };
        let w = counterexample::m_set_witness_count(spec).unwrap();
        assert!(w <= counterexample::m_set_count(spec).unwrap());
    }
}

#[test]
fn grouped_l8_agrees_with_the_generic_engine() {
    for n in [1u64, 2, 4] {
        let g = counterexample::grouped_l8_check(n).unwrap();
        assert!(g.relative_difference < 1e-12, "{g:?}");
    }
    assert!(counterexample::grouped_l8_check(32).is_err());
}

#[test]
fn cubic_identity_on_a_box() {
    for x1 in -6..=6 {
        for x2 in -6..=6 {
            for x3 in -6..=6 {
                assert!(cubic_identity_check(x1, x2, x3, 4));
            }
        }
    }
}
