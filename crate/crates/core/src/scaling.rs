//! Rescaling to `𝕋_λ`, the I-multiplier, Sobolev norms, and the Hamiltonian
//! of the quartic gKdV flow.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::lattice::{CoeffVector, TorusSpec};
use crate::numeric::{KahanComplex, KahanSum};

/// Support limit for the quintic convolution.
pub const QUINTIC_MAX_SUPPORT: usize = 200;

/// `u^λ(x) = λ^{−2/3} u(x/λ)`: frequency `k/λ₀ ↦ k/(λ₀λ)` with amplitudes
/// multiplied by `λ^{1/3}`, so `‖u^λ‖₂ = λ^{−1/6}‖u‖₂`.
pub fn rescale(u: &CoeffVector, lambda: u32) -> Result<CoeffVector> {
    if lambda == 0 {
        return Err(LabError::domain("rescale needs λ ≥ 1"));
    }
    let target = u.torus().lambda() as u64 * lambda as u64;
    let target = u32::try_from(target)
        .map_err(|_| LabError::domain(format!("rescaled torus size {target} overflows")))?;
    let torus = TorusSpec::new(target)?;
    let c = (lambda as f64).cbrt();
    CoeffVector::from_entries(torus, u.iter().map(|(k, a)| (k, a * c)))
}

/// The symbol `m(r)`: one for `r ≤ 1`, `r^{s−1}` for `r ≥ 2`, and
/// `r^{(s−1)w(r−1)}` in between with `w(x) = 3x² − 2x³`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IMultiplier {
    pub n: f64,
    pub s: f64,
}

impl IMultiplier {
    pub fn new(n: f64, s: f64) -> Result<Self> {
        if !(n > 0.0) || !n.is_finite() {
            return Err(LabError::domain(format!("I-multiplier needs N > 0, got {n}")));
        }
        if !(s > 0.5 && s < 1.0) {
            return Err(LabError::domain(format!("I-multiplier needs s ∈ (1/2, 1), got {s}")));
        }
        Ok(Self { n, s })
    }

    pub fn symbol(&self, r: f64) -> f64 {
        let r = r.abs();
        if r <= 1.0 {
            1.0
        } else if r >= 2.0 {
            r.powf(self.s - 1.0)
        } else {
            let x = r - 1.0;
            let w = x * x * (3.0 - 2.0 * x);
            r.powf((self.s - 1.0) * w)
        }
    }

    /// `m(ξ/N)`.
    pub fn at(&self, xi: f64) -> f64 {
        self.symbol(xi / self.n)
    }
}

/// `(Iu)^(ξ) = m(ξ/N) û(ξ)`.
pub fn apply_i(u: &CoeffVector, mult: &IMultiplier) -> CoeffVector {
    let torus = u.torus();
    CoeffVector::from_entries(
        torus,
        u.iter().map(|(k, a)| (k, a * mult.at(torus.frequency(k)))),
    )
    .expect("indices already validated")
}

/// `‖⟨ξ⟩^s û‖_{L²((dξ)_λ)}`.
pub fn sobolev_norm(u: &CoeffVector, s: f64) -> f64 {
    let torus = u.torus();
    let sum: KahanSum = u
        .iter()
        .map(|(k, a)| (1.0 + torus.frequency(k).powi(2)).powf(s) * a.norm_sqr())
        .collect();
    (sum.value() / torus.lambda_f64()).sqrt()
}

/// `‖∂ₓu‖²_{L²(𝕋_λ)} = (1/λ) Σ (2πξ)² |a|²`.
pub fn derivative_norm_sq(u: &CoeffVector) -> f64 {
    let torus = u.torus();
    let sum: KahanSum = u
        .iter()
        .map(|(k, a)| (2.0 * PI * torus.frequency(k)).powi(2) * a.norm_sqr())
        .collect();
    sum.value() / torus.lambda_f64()
}

fn convolve(a: &BTreeMap<i64, Complex64>, b: &BTreeMap<i64, Complex64>) -> BTreeMap<i64, Complex64> {
    let mut acc: BTreeMap<i64, KahanComplex> = BTreeMap::new();
    for (&i, &x) in a {
        for (&j, &y) in b {
            acc.entry(i + j).or_default().add(x * y);
        }
    }
    acc.into_iter().map(|(k, v)| (k, v.value())).collect()
}

/// `∫_{𝕋_λ} u⁵ dx = λ⁻⁴ Σ_{k₁+…+k₅=0} a_{k₁}⋯a_{k₅}`.
pub fn quintic_integral(u: &CoeffVector) -> Result<f64> {
    if u.len() > QUINTIC_MAX_SUPPORT {
        return Err(LabError::CostGuard {
            what: "quintic convolution support",
            size: u.len() as u64,
            limit: QUINTIC_MAX_SUPPORT as u64,
            alternative: "grid quadrature",
        });
    }
    let a: BTreeMap<i64, Complex64> = u.iter().collect();
    let a2 = convolve(&a, &a);
    let a4 = convolve(&a2, &a2);
    let mut acc = KahanComplex::new();
    for (&k, &v) in &a4 {
        if let Some(&w) = a.get(&-k) {
            acc.add(v * w);
        }
    }
    Ok(acc.value().re / u.torus().lambda_f64().powi(4))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hamiltonian {
    /// `(1/8π²) ∫ (∂ₓu)²`.
    pub kinetic: f64,
    /// `∫ u⁵`.
    pub quintic: f64,
    /// `kinetic − quintic/20`.
    pub value: f64,
}

/// `H(u) = (1/8π²)∫(∂ₓu)² − (1/20)∫u⁵` for real-valued `u`.
pub fn hamiltonian(u: &CoeffVector) -> Result<Hamiltonian> {
    if !u.is_conjugate_symmetric(1e-12) {
        return Err(LabError::domain("the Hamiltonian needs real-valued data"));
    }
    let kinetic = derivative_norm_sq(u) / (8.0 * PI * PI);
    let quintic = quintic_integral(u)?;
    Ok(Hamiltonian {
        kinetic,
        quintic,
        value: kinetic - quintic / 20.0,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SmallnessRow {
    pub lambda: u32,
    /// `λ^{(1/6+s)/(1−s)} / log(2 + λ)`.
    pub n: f64,
    pub hamiltonian: f64,
    /// `‖I∂ₓu₀^λ‖²`.
    pub derivative_sq: f64,
    pub ratio: f64,
    pub l2_norm: f64,
    pub hs_norm: f64,
    /// `‖Iu₀^λ‖_{H¹} / (N^{1−s}‖u₀^λ‖_{H^s})`.
    pub h1_ratio: f64,
}

/// `H(Iu₀^λ)` against `‖I∂ₓu₀^λ‖²` for each `λ`.
pub fn smallness_check(u0: &CoeffVector, s: f64, lambdas: &[u32]) -> Result<Vec<SmallnessRow>> {
    if u0.torus().lambda() != 1 {
        return Err(LabError::domain("smallness check starts from data on T"));
    }
    lambdas
        .iter()
        .map(|&lambda| {
            let lf = lambda as f64;
            let n = lf.powf((1.0 / 6.0 + s) / (1.0 - s)) / (2.0 + lf).ln();
            let mult = IMultiplier::new(n, s)?;
            let ul = rescale(u0, lambda)?;
            let iu = apply_i(&ul, &mult);
            let h = hamiltonian(&iu)?;
            let d = derivative_norm_sq(&iu);
            let hs = sobolev_norm(&ul, s);
            Ok(SmallnessRow {
                lambda,
                n,
                hamiltonian: h.value,
                derivative_sq: d,
                ratio: h.value / d,
                l2_norm: ul.l2_norm(),
                hs_norm: hs,
                h1_ratio: sobolev_norm(&iu, 1.0) / (n.powf(1.0 - s) * hs),
            })
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FiveTupleResidual {
    /// `|Σ(τ_j − 4π²ξ_j³) + 12π²ξ₁ξ₄ξ₅|`.
    pub residual: f64,
    /// `max(|ξ₁|, |ξ₄|)² |ξ₅|`.
    pub scale: f64,
}

/// Residual of the five-frequency resonance identity under `Στ = Σξ = 0`.
pub fn five_tuple_identity_check(taus: [f64; 5], xis: [f64; 5]) -> Result<FiveTupleResidual> {
    let tol = |v: &[f64; 5]| 1e-9 * (1.0 + v.iter().map(|x| x.abs()).fold(0.0, f64::max));
    let st: f64 = taus.iter().sum();
    let sx: f64 = xis.iter().sum();
    if st.abs() > tol(&taus) || sx.abs() > tol(&xis) {
        return Err(LabError::domain("five-tuple needs Στ = 0 and Σξ = 0"));
    }
    let c = 4.0 * PI * PI;
    let lhs: f64 = taus.iter().zip(&xis).map(|(t, x)| t - c * x.powi(3)).sum();
    let [x1, _, _, x4, x5] = xis;
    Ok(FiveTupleResidual {
        residual: (lhs + 3.0 * c * x1 * x4 * x5).abs(),
        scale: x1.abs().max(x4.abs()).powi(2) * x5.abs(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn real_cos(lambda: u32, k: i64) -> CoeffVector {
        let t = TorusSpec::new(lambda).unwrap();
        let h = Complex64::new(0.5 * lambda as f64, 0.0);
        CoeffVector::from_entries(t, [(k, h), (-k, h)]).unwrap()
    }

    #[test]
    fn cosine_hamiltonian() {
        let h = hamiltonian(&real_cos(1, 1)).unwrap();
        assert!((h.value - 0.25).abs() < 1e-15);
        assert!(h.quintic.abs() < 1e-15);
    }

    #[test]
    fn constant_hamiltonian() {
        for lambda in [1u32, 3, 8] {
            let t = TorusSpec::new(lambda).unwrap();
            let c = 0.7;
            let u = CoeffVector::single(t, 0, Complex64::new(c * lambda as f64, 0.0)).unwrap();
            let h = hamiltonian(&u).unwrap();
            assert!((h.value + lambda as f64 * c.powi(5) / 20.0).abs() < 1e-14);
        }
    }

    #[test]
    fn rescale_power_law() {
        let u = real_cos(1, 3);
        let r = rescale(&u, 64).unwrap();
        assert!((r.l2_norm() / u.l2_norm() - 0.5).abs() < 1e-12);
        assert_eq!(rescale(&u, 1).unwrap(), u);
    }

    #[test]
    fn symbol_shape() {
        let m = IMultiplier::new(4.0, 0.75).unwrap();
        assert_eq!(m.symbol(0.5), 1.0);
        assert_eq!(m.symbol(1.0), 1.0);
        assert!((m.symbol(2.0) - 2f64.powf(-0.25)).abs() < 1e-15);
        assert!((m.at(16.0) - 4f64.powf(-0.25)).abs() < 1e-15);
        let mut prev = 1.0;
        for i in 0..=400 {
            let v = m.symbol(i as f64 / 100.0);
            assert!(v <= prev && v > 0.0);
            prev = v;
        }
    }

    #[test]
    fn five_tuple_degenerate() {
        let r = five_tuple_identity_check([0.0; 5], [1.0, 0.0, 0.0, -1.0, 0.0]).unwrap();
        assert_eq!(r.residual, 0.0);
        let r = five_tuple_identity_check([0.0; 5], [0.0; 5]).unwrap();
        assert_eq!(r.residual, 0.0);
        let r = five_tuple_identity_check([0.0; 5], [5.0, 0.0, 0.0, 3.0, -8.0]).unwrap();
        assert!(r.residual < 1e-9);
        assert!(five_tuple_identity_check([1.0, 0.0, 0.0, 0.0, 0.0], [0.0; 5]).is_err());
    }
}
