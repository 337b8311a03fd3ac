use num_complex::Complex64;
use proptest::prelude::*;
use strichartz_core::lattice::{CoeffVector, DyadicBlock, TorusSpec};
use strichartz_core::norm::{self, SampledConfig};

fn e_frac(n: i128, d: i128) -> Complex64 {
    let r = n.rem_euclid(d) as f64 / d as f64;
    Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * r)
}

/// `∫∫|u|^p` over `𝕋²` by direct summation on an alias-free grid.
fn brute_power(u: &CoeffVector, p: u32) -> f64 {
    let k = u.max_abs_index() as i128;
    let nx = p as i128 * k + 1;
    let nt = p as i128 * k * k * k + 1;
    let modes: Vec<(i128, Complex64)> = u.iter().map(|(k, a)| (k as i128, a)).collect();
    let mut total = 0.0;
    for j in 0..nt {
        for i in 0..nx {
            let v: Complex64 = modes
                .iter()
                .map(|&(k, a)| a * e_frac(k * k * k * j, nt) * e_frac(k * i, nx))
                .sum();
            total += v.norm_sqr().powi(p as i32 / 2);
        }
    }
    total / (nx * nt) as f64
}

fn vector() -> impl Strategy<Value = CoeffVector> {
    prop::collection::btree_map(-6i64..=6, (-1.0f64..1.0, -1.0f64..1.0), 1..8).prop_map(|m| {
        CoeffVector::from_entries(
            TorusSpec::UNIT,
            m.into_iter().map(|(k, (re, im))| (k, Complex64::new(re, im))),
        )
        .unwrap()
    })
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-300)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn exact_counting_matches_grid(u in vector()) {
        for p in [4, 6] {
            let exact = norm::lp_exact_power(&u, p).unwrap();
            prop_assert!(close(exact, brute_power(&u, p), 1e-10), "p={}", p);
        }
    }

    #[test]
    fn closed_form_l4(u in vector()) {
        let exact = norm::lp_exact_power(&u, 4).unwrap();
        prop_assert!(close(exact, norm::l4_closed_form(&u), 1e-12));
    }

    #[test]
    fn homogeneous_of_degree_p(u in vector(), c in 0.1f64..3.0, theta in 0.0f64..1.0) {
        let s = Complex64::from_polar(c, 2.0 * std::f64::consts::PI * theta);
        for p in [2, 4, 6, 8] {
            let a = norm::lp_exact_power(&u, p).unwrap();
            let b = norm::lp_exact_power(&u.scaled(s), p).unwrap();
            prop_assert!(close(b, c.powi(p as i32) * a, 1e-11));
        }
    }

    /// Space and time translations act by the phases `e(kx₀ + k³t₀)`, and
    /// reflection `k ↦ −k` with conjugation reverses time.
    #[test]
    fn symmetries(u in vector(), x0 in 0.0f64..1.0, t0 in 0.0f64..1.0) {
        let moved = CoeffVector::from_entries(
            TorusSpec::UNIT,
            u.iter().map(|(k, a)| {
                let ph = (k as f64 * x0 + (k * k * k) as f64 * t0).fract();
                (k, a * Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * ph))
            }),
        ).unwrap();
        let reflected = CoeffVector::from_entries(TorusSpec::UNIT, u.iter().map(|(k, a)| (-k, a.conj()))).unwrap();
        for p in [4, 6, 8] {
            let a = norm::lp_exact_power(&u, p).unwrap();
            prop_assert!(close(a, norm::lp_exact_power(&moved, p).unwrap(), 1e-11));
            prop_assert!(close(a, norm::lp_exact_power(&reflected, p).unwrap(), 1e-11));
        }
    }

    #[test]
    fn plancherel(u in vector()) {
        let p2 = norm::lp_exact_power(&u, 2).unwrap();
        prop_assert!(close(p2, u.sum_sq(), 1e-14));
    }
}

#[test]
fn sampled_is_exact_above_the_time_bandwidth() {
    let u = CoeffVector::flat(TorusSpec::UNIT, DyadicBlock::new(4).unwrap().indices(TorusSpec::UNIT)).unwrap();
    for p in [4u32, 6] {
        let t = norm::t_exact(&u, p) as usize + 7;
        let s = norm::lp_sampled_with(&u, p, &SampledConfig::new(t, 3)).unwrap();
        let e = norm::lp_exact_power(&u, p).unwrap();
        assert!(close(s.power(), e, 1e-10), "p={p}: {} vs {e}", s.power());
        assert!(s.power_std_error() <= 1e-9 * e);
    }
}

#[test]
fn flat_block_l4_law() {
    for n in [1u64, 2, 4, 8, 16, 32] {
        let u = CoeffVector::flat(TorusSpec::UNIT, DyadicBlock::new(n).unwrap().indices(TorusSpec::UNIT)).unwrap();
        let law = (12 * n * n - 6 * n) as f64;
        assert!(close(norm::lp_exact_power(&u, 4).unwrap(), law, 1e-13), "N={n}");
    }
}

#[test]
fn exact_rejects_unsupported_p() {
    let u = CoeffVector::flat(TorusSpec::UNIT, [1, 2]).unwrap();
    assert!(norm::lp_exact_power(&u, 10).is_err());
    assert!(norm::lp_exact_power(&u, 3).is_err());
}
