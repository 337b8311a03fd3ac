use strichartz_core::bilinear::{self, DataKind, ScanConfig};
use strichartz_core::lattice::{DyadicBlock, TorusSpec};
use strichartz_core::norm::{self, BilinearMode, SampledConfig};
use strichartz_core::profile::EtaProfile;

fn blocks(l: u64, n: u64) -> (DyadicBlock, DyadicBlock) {
    (DyadicBlock::new(l).unwrap(), DyadicBlock::new(n).unwrap())
}

/// The semi-analytic pair sum against the shifted trapezoid rule run at
/// the alias-free time resolution.
#[test]
fn semi_analytic_matches_fine_sampling() {
    let eta = EtaProfile::global();
    for (l, n, lambda, kind) in [
        (1u64, 2u64, 1u32, DataKind::Flat),
        (1, 4, 2, DataKind::Flat),
        (2, 4, 1, DataKind::Random(0)),
    ] {
        let (bl, bn) = blocks(l, n);
        let (ul, un) = bilinear::cell_data(bl, bn, TorusSpec::new(lambda).unwrap(), kind, 5).unwrap();
        let exact = norm::bilinear_l4(&ul, &un, eta, BilinearMode::SemiAnalytic).unwrap().power();
        let t = norm::bilinear_t_exact(&ul, &un) as usize;
        let cfg = SampledConfig::new(t, 5);
        let sampled = norm::bilinear_l4(&ul, &un, eta, BilinearMode::Sampled(cfg)).unwrap();
        let rel = (sampled.power() - exact).abs() / exact;
        assert!(rel < 1e-6, "({l},{n},{lambda}): {} vs {exact}", sampled.power());
    }
}

#[test]
fn rhs_shape() {
    for lambda in [1u32, 2, 4, 8, 16] {
        for n in [1u64, 2, 4, 8] {
            let a = bilinear::rhs_theorem2(1, n, lambda, 0.05).unwrap();
            let b = bilinear::rhs_theorem2(1, n, 2 * lambda, 0.05).unwrap();
            assert!(b <= a && a > 0.0);
        }
    }
    assert!(bilinear::rhs_theorem2(4, 2, 1, 0.05).is_err());
}

#[test]
fn random_blocks_are_seeded_and_normalized() {
    let (bl, bn) = blocks(2, 8);
    let t = TorusSpec::new(4).unwrap();
    let a = bilinear::cell_data(bl, bn, t, DataKind::Random(1), 3).unwrap();
    let b = bilinear::cell_data(bl, bn, t, DataKind::Random(1), 3).unwrap();
    let c = bilinear::cell_data(bl, bn, t, DataKind::Random(2), 3).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, c);
    assert!((a.0.mass() - 1.0).abs() < 1e-13 && (a.1.mass() - 1.0).abs() < 1e-13);
    assert!(a.0.support().all(|k| bl.contains(k, t)));
}

#[test]
fn scan_records_skips_instead_of_failing() {
    let cfg = ScanConfig {
        ls: vec![1],
        ns: vec![2],
        lambdas: vec![1, 2],
        kinds: vec![DataKind::Extremized],
        ..ScanConfig::default()
    };
    let r = bilinear::scan(&cfg).unwrap();
    assert_eq!(r.cells.len(), 2);
    assert!(r.cells[0].ratio.is_some());
    assert!(r.cells[1].skipped.is_some() && r.cells[1].ratio.is_none());
}

#[test]
fn level_sets_reconstruct_the_norm() {
    let (bl, bn) = blocks(1, 4);
    let (ul, un) = bilinear::cell_data(bl, bn, TorusSpec::UNIT, DataKind::Flat, 0).unwrap();
    let r = bilinear::levelset_chain_check(&ul, &un, bl, bn, (256, 256), 0.05).unwrap();
    assert_eq!(r.measure_above_block, 0.0);
    assert!(r.layer_cake_rel_err < 0.05);
    let (lo, hi) = r.table.split_at(r.mu0);
    assert!(((lo + hi) - r.direct).abs() < 1e-9 * r.direct);
    assert!(r.table.measures.windows(2).all(|w| w[1] <= w[0]));
}
