use num_complex::Complex64;
use proptest::prelude::*;
use strichartz_core::lattice::{CoeffVector, TorusSpec};
use strichartz_core::scaling::{self, IMultiplier};

fn e_frac(n: i128, d: i128) -> Complex64 {
    let r = n.rem_euclid(d) as f64 / d as f64;
    Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * r)
}

fn real_data() -> impl Strategy<Value = CoeffVector> {
    (
        0u32..3,
        prop::collection::btree_map(1i64..=10, (-1.0f64..1.0, -1.0f64..1.0), 1..6),
    )
        .prop_map(|(e, m)| {
            let mut u = CoeffVector::new(TorusSpec::new(1 << e).unwrap());
            for (k, (re, im)) in m {
                u.insert(k, Complex64::new(re, im)).unwrap();
                u.insert(-k, Complex64::new(re, -im)).unwrap();
            }
            u
        })
}

/// `∫_{𝕋_λ} u⁵` on `M > 5·max|k|` equispaced points.
fn quintic_grid(u: &CoeffVector) -> f64 {
    let lam = u.torus().lambda_f64();
    let m = 5 * u.max_abs_index() as i128 + 1;
    let mut acc = 0.0;
    for j in 0..m {
        let v: Complex64 = u.iter().map(|(k, a)| a * e_frac(k as i128 * j, m)).sum::<Complex64>() / lam;
        acc += v.powi(5).re;
    }
    acc * lam / m as f64
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn quintic_matches_grid(u in real_data()) {
        let q = scaling::quintic_integral(&u).unwrap();
        let g = quintic_grid(&u);
        prop_assert!((q - g).abs() <= 1e-9 * g.abs().max(1.0), "{} vs {}", q, g);
    }

    #[test]
    fn rescale_composes(u in real_data(), a in 1u32..6, b in 1u32..6) {
        let two = scaling::rescale(&scaling::rescale(&u, a).unwrap(), b).unwrap();
        let one = scaling::rescale(&u, a * b).unwrap();
        prop_assert_eq!(two.torus(), one.torus());
        for (k, x) in one.iter() {
            prop_assert!((two.get(k) - x).norm() <= 1e-13 * x.norm().max(1.0));
        }
    }

    #[test]
    fn rescale_l2_law(u in real_data(), lam in 1u32..1025) {
        let v = scaling::rescale(&u, lam).unwrap();
        let expect = (lam as f64).powf(-1.0 / 6.0);
        prop_assert!((v.l2_norm() / u.l2_norm() - expect).abs() <= 1e-14);
    }

    /// `‖∂ₓu^λ‖² = λ^{−2}·λ^{−1/3}‖∂ₓu‖²`: each derivative costs `1/λ`.
    #[test]
    fn derivative_scaling(u in real_data(), lam in 1u32..64) {
        let v = scaling::rescale(&u, lam).unwrap();
        let l = lam as f64;
        let expect = scaling::derivative_norm_sq(&u) * l.powf(-2.0 - 1.0 / 3.0);
        prop_assert!((scaling::derivative_norm_sq(&v) - expect).abs() <= 1e-12 * expect);
    }

    #[test]
    fn i_multiplier_never_amplifies(u in real_data(), n in 0.5f64..20.0, s in 0.51f64..0.99) {
        let m = IMultiplier::new(n, s).unwrap();
        let iu = scaling::apply_i(&u, &m);
        for (k, a) in u.iter() {
            prop_assert!(iu.get(k).norm() <= a.norm());
        }
        prop_assert!(scaling::sobolev_norm(&iu, 1.0) <= scaling::sobolev_norm(&u, 1.0) * (1.0 + 1e-15));
    }
}

#[test]
fn symbol_is_continuous_and_monotone() {
    let m = IMultiplier::new(1.0, 0.7).unwrap();
    let mut prev = m.symbol(0.0);
    for i in 1..=30000 {
        let r = i as f64 * 1e-4;
        let v = m.symbol(r);
        assert!(v <= prev + 1e-15 && v <= 1.0);
        assert!((prev - v).abs() < 1e-3, "jump at r={r}");
        prev = v;
    }
    assert!((m.symbol(4.0) - 4f64.powf(-0.3)).abs() < 1e-15);
}

#[test]
fn hamiltonian_needs_real_data() {
    let u = CoeffVector::flat(TorusSpec::UNIT, [1, 2]).unwrap();
    assert!(scaling::hamiltonian(&u).is_err());
}

#[test]
fn five_tuple_identity_vanishes_on_its_locus() {
    for (x1, x4) in [(3i64, 5i64), (-7, 2), (11, -13)] {
        let xis = [x1, 0, 0, x4, -(x1 + x4)].map(|v| v as f64);
        let taus = [1.5, -0.25, 2.0, -3.0, -0.25];
        let r = scaling::five_tuple_identity_check(taus, xis).unwrap();
        assert!(r.residual <= 1e-12 * r.scale, "{r:?}");
    }
}
