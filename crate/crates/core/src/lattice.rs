//! Frequency lattices `Z/λ` on the torus `T_λ = R/λZ`, coefficient vectors,
//! the Airy phase, and the exact integer identities used by the engines.
//!
//! A frequency `ξ = k/λ` is always carried as its integer numerator `k`; the
//! Fourier inversion convention is `f(x) = (1/λ) Σ_k a_k e^{2πi (k/λ) x}`, so
//! the L² mass of `f` is `(1/λ) Σ |a_k|²`.

use crate::error::{LabError, Result};
use crate::numeric::{mul_frac, turns};
use num_complex::Complex64;
use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::f64::consts::PI;

/// Largest admissible frequency numerator: eight cubes of this size still
/// sum inside an `i64`.
pub const MAX_FREQUENCY: i64 = (1 << 20) - 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TorusSpec {
    lambda: u32,
}

impl TorusSpec {
    pub const UNIT: TorusSpec = TorusSpec { lambda: 1 };

    pub fn new(lambda: u32) -> Result<Self> {
        if lambda == 0 {
            return Err(LabError::invalid("torus period λ must be at least 1"));
        }
        Ok(Self { lambda })
    }

    pub fn lambda(&self) -> u32 {
        self.lambda
    }

    pub fn lambda_f64(&self) -> f64 {
        self.lambda as f64
    }

    /// The frequency `k/λ`.
    pub fn frequency(&self, k: i64) -> f64 {
        k as f64 / self.lambda as f64
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FrequencyIndex(i64);

impl FrequencyIndex {
    pub fn new(k: i64) -> Result<Self> {
        if k.abs() > MAX_FREQUENCY {
            return Err(LabError::FrequencyGuard {
                k,
                limit: MAX_FREQUENCY,
            });
        }
        Ok(Self(k))
    }

    pub fn get(self) -> i64 {
        self.0
    }

    pub fn cube(self) -> i64 {
        self.0 * self.0 * self.0
    }
}

/// Finitely supported coefficients `a_k` on `Z/λ`. Zero amplitudes are never
/// stored and iteration is in increasing `k`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CoeffFile", into = "CoeffFile")]
pub struct CoeffVector {
    torus: TorusSpec,
    entries: BTreeMap<i64, Complex64>,
}

impl CoeffVector {
    pub fn new(torus: TorusSpec) -> Self {
        Self {
            torus,
            entries: BTreeMap::new(),
        }
    }

    /// Builds a vector from `(k, a_k)` pairs; repeated `k` are summed.
    pub fn from_entries<I>(torus: TorusSpec, entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (i64, Complex64)>,
    {
        let mut v = Self::new(torus);
        for (k, a) in entries {
            FrequencyIndex::new(k)?;
            let e = v.entries.entry(k).or_insert(Complex64::new(0.0, 0.0));
            *e += a;
        }
        v.entries.retain(|_, a| *a != Complex64::new(0.0, 0.0));
        Ok(v)
    }

    /// Unit amplitude on every `k` in `ks`.
    pub fn flat<I: IntoIterator<Item = i64>>(torus: TorusSpec, ks: I) -> Result<Self> {
        Self::from_entries(torus, ks.into_iter().map(|k| (k, Complex64::new(1.0, 0.0))))
    }

    pub fn single(torus: TorusSpec, k: i64, amp: Complex64) -> Result<Self> {
        Self::from_entries(torus, [(k, amp)])
    }

    pub fn insert(&mut self, k: i64, amp: Complex64) -> Result<()> {
        FrequencyIndex::new(k)?;
        if amp == Complex64::new(0.0, 0.0) {
            self.entries.remove(&k);
        } else {
            self.entries.insert(k, amp);
        }
        Ok(())
    }

    pub fn torus(&self) -> TorusSpec {
        self.torus
    }

    pub fn get(&self, k: i64) -> Complex64 {
        self.entries.get(&k).copied().unwrap_or_default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (i64, Complex64)> + '_ {
        self.entries.iter().map(|(&k, &a)| (k, a))
    }

    pub fn support(&self) -> impl Iterator<Item = i64> + '_ {
        self.entries.keys().copied()
    }

    pub fn max_abs_index(&self) -> i64 {
        self.entries.keys().map(|k| k.abs()).max().unwrap_or(0)
    }

    pub fn min_index(&self) -> Option<i64> {
        self.entries.keys().next().copied()
    }

    pub fn max_index(&self) -> Option<i64> {
        self.entries.keys().next_back().copied()
    }

    /// `Σ |a_k|²` without the `1/λ` measure factor.
    pub fn sum_sq(&self) -> f64 {
        self.entries.values().map(|a| a.norm_sqr()).sum()
    }

    /// L² mass `(1/λ) Σ |a_k|²` under the lattice measure `(dξ)_λ`.
    pub fn mass(&self) -> f64 {
        self.sum_sq() / self.torus.lambda_f64()
    }

    pub fn l2_norm(&self) -> f64 {
        self.mass().sqrt()
    }

    pub fn scaled(&self, c: Complex64) -> Self {
        let entries = self
            .entries
            .iter()
            .map(|(&k, &a)| (k, a * c))
            .filter(|(_, a)| *a != Complex64::new(0.0, 0.0))
            .collect();
        Self {
            torus: self.torus,
            entries,
        }
    }

    /// Rescaled to unit L² mass; `None` for the zero vector.
    pub fn normalized(&self) -> Option<Self> {
        let m = self.l2_norm();
        (m > 0.0).then(|| self.scaled(Complex64::new(1.0 / m, 0.0)))
    }

    /// `a_{-k} = conj(a_k)` for every `k`, i.e. the function is real-valued.
    pub fn is_conjugate_symmetric(&self, tol: f64) -> bool {
        self.entries
            .iter()
            .all(|(&k, &a)| (self.get(-k) - a.conj()).norm() <= tol * (1.0 + a.norm()))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&CoeffFile::from(self))?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let file: CoeffFile = serde_json::from_str(s)?;
        file.try_into()
    }
}

/// On-disk form: `{"lambda": λ, "coeffs": [{"k": .., "re": .., "im": ..}, ..]}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoeffFile {
    pub lambda: u32,
    pub coeffs: Vec<CoeffRecord>,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoeffRecord {
    pub k: i64,
    pub re: f64,
    pub im: f64,
}

impl From<CoeffVector> for CoeffFile {
    fn from(v: CoeffVector) -> Self {
        CoeffFile::from(&v)
    }
}

impl From<&CoeffVector> for CoeffFile {
    fn from(v: &CoeffVector) -> Self {
        CoeffFile {
            lambda: v.torus.lambda,
            coeffs: v
                .iter()
                .map(|(k, a)| CoeffRecord {
                    k,
                    re: a.re,
                    im: a.im,
                })
                .collect(),
        }
    }
}

impl TryFrom<CoeffFile> for CoeffVector {
    type Error = LabError;

    fn try_from(file: CoeffFile) -> Result<Self> {
        let torus = TorusSpec::new(file.lambda)?;
        if file.coeffs.iter().any(|r| !r.re.is_finite() || !r.im.is_finite()) {
            return Err(LabError::invalid("non-finite amplitude in coefficient file"));
        }
        CoeffVector::from_entries(
            torus,
            file.coeffs.iter().map(|r| (r.k, Complex64::new(r.re, r.im))),
        )
    }
}

/// Frequency annulus `{ξ : N ≤ |ξ| < 2N}` (both signs) for a dyadic `N`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DyadicBlock {
    scale: u64,
}

impl DyadicBlock {
    pub fn new(scale: u64) -> Result<Self> {
        if scale == 0 || !scale.is_power_of_two() {
            return Err(LabError::invalid(format!(
                "block scale {scale} is not a power of two"
            )));
        }
        Ok(Self { scale })
    }

    pub fn scale(&self) -> u64 {
        self.scale
    }

    /// `N ≤ |k/λ| < 2N`, decided in integers.
    pub fn contains(&self, k: i64, torus: TorusSpec) -> bool {
        let lo = self.scale as i128 * torus.lambda as i128;
        let a = k.unsigned_abs() as i128;
        lo <= a && a < 2 * lo
    }

    /// All numerators in the block, increasing.
    pub fn indices(&self, torus: TorusSpec) -> Vec<i64> {
        let lo = (self.scale * torus.lambda as u64) as i64;
        let hi = 2 * lo;
        (-hi + 1..=-lo).chain(lo..hi).collect()
    }

    pub fn cardinality(&self, torus: TorusSpec) -> usize {
        2 * (self.scale * torus.lambda as u64) as usize
    }

    /// Flat data on the block, normalized to unit L² mass.
    pub fn flat_unit(&self, torus: TorusSpec) -> Result<CoeffVector> {
        let v = CoeffVector::flat(torus, self.indices(torus))?;
        Ok(v.normalized().expect("blocks are nonempty"))
    }

    pub fn holds(&self, v: &CoeffVector) -> bool {
        v.support().all(|k| self.contains(k, v.torus()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpaceTimePoint {
    pub t: f64,
    pub x: f64,
}

impl SpaceTimePoint {
    pub fn new(t: f64, x: f64, torus: TorusSpec) -> Self {
        Self {
            t,
            x: x.rem_euclid(torus.lambda_f64()),
        }
    }
}

/// Fractional part of `(k/λ)³ t`, reduced exactly in integers where possible.
pub(crate) fn cubic_turns(k: i64, lambda: u32, t: f64) -> f64 {
    let l3 = (lambda as i128).pow(3);
    let k3 = (k as i128).pow(3);
    let q = k3.div_euclid(l3);
    let r = k3.rem_euclid(l3);
    let whole = mul_frac(t, q);
    let part = (r as f64 / l3 as f64) * t;
    whole + part
}

/// `e^{2πi(ξ³t + ξx)}` with `ξ = k/λ`.
pub fn airy_phase(k: i64, torus: TorusSpec, p: SpaceTimePoint) -> Result<Complex64> {
    FrequencyIndex::new(k)?;
    let lambda = torus.lambda;
    let x_turns = {
        let xl = p.x / lambda as f64;
        mul_frac(xl, k as i128)
    };
    Ok(turns(cubic_turns(k, lambda, p.t) + x_turns))
}

/// The linear Airy flow of a coefficient vector frozen at time `t`.
#[derive(Clone, Debug)]
pub struct EvolvedField {
    torus: TorusSpec,
    coeffs: Vec<(i64, Complex64)>,
}

impl EvolvedField {
    /// `u(t, x) = (1/λ) Σ a_k e^{2πi(ξ³t + ξx)}`.
    pub fn eval(&self, x: f64) -> Complex64 {
        let lambda = self.torus.lambda_f64();
        let xl = x / lambda;
        let s: Complex64 = self
            .coeffs
            .iter()
            .map(|&(k, b)| b * turns(mul_frac(xl, k as i128)))
            .sum();
        s / lambda
    }

    /// Evolved coefficients `a_k e^{2πi ξ³ t}`.
    pub fn coefficients(&self) -> CoeffVector {
        CoeffVector::from_entries(self.torus, self.coeffs.iter().copied())
            .expect("indices already validated")
    }

    /// L²_x mass over one period; equal to the mass of the initial data.
    pub fn mass(&self) -> f64 {
        self.coeffs.iter().map(|(_, b)| b.norm_sqr()).sum::<f64>() / self.torus.lambda_f64()
    }
}

pub fn evolve(u0: &CoeffVector, t: f64) -> EvolvedField {
    let lambda = u0.torus().lambda();
    let coeffs = u0
        .iter()
        .map(|(k, a)| (k, a * turns(cubic_turns(k, lambda, t))))
        .collect();
    EvolvedField {
        torus: u0.torus(),
        coeffs,
    }
}

/// Key of a frequency product: (sum of numerators, sum of cubes).
pub type SpectrumKey = (i64, i64);

/// Space-time spectrum of `u²`: for every key `(k_i + k_j, k_i³ + k_j³)` the
/// sum of `a_i a_j` over ordered pairs landing on it. Keys sorted.
#[derive(Clone, Debug, PartialEq)]
pub struct PairSpectrum {
    entries: Vec<(SpectrumKey, Complex64)>,
}

impl PairSpectrum {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, key: SpectrumKey) -> Option<Complex64> {
        self.entries
            .binary_search_by(|(k, _)| k.cmp(&key))
            .ok()
            .map(|i| self.entries[i].1)
    }

    pub fn iter(&self) -> impl Iterator<Item = (SpectrumKey, Complex64)> + '_ {
        self.entries.iter().copied()
    }
}

pub fn pair_spectrum(u: &CoeffVector) -> PairSpectrum {
    let pts: Vec<(i64, i64, Complex64)> = u.iter().map(|(k, a)| (k, k * k * k, a)).collect();
    let mut map: FxHashMap<SpectrumKey, Complex64> = FxHashMap::default();
    for (i, &(ki, ci, ai)) in pts.iter().enumerate() {
        *map.entry((2 * ki, 2 * ci)).or_default() += ai * ai;
        for &(kj, cj, aj) in &pts[i + 1..] {
            *map.entry((ki + kj, ci + cj)).or_default() += 2.0 * ai * aj;
        }
    }
    let mut entries: Vec<_> = map.into_iter().collect();
    entries.sort_unstable_by_key(|e| e.0);
    PairSpectrum { entries }
}

/// Checks `ξ₁³ − (ξ₁−ξ₂)³ + (ξ₃−ξ₂+ξ₄)³ − ξ₃³ = ξ₄³ + 3ξ₄(ξ₃(ξ₃−2ξ₂+ξ₄) + ξ₂(ξ₂−ξ₄))
/// + 3ξ₂(ξ₁−ξ₃)(ξ₁+ξ₃−ξ₂)` in exact integer arithmetic.
pub fn cubic_identity_check(x1: i64, x2: i64, x3: i64, x4: i64) -> bool {
    let (a, b, c, d) = (x1 as i128, x2 as i128, x3 as i128, x4 as i128);
    let cube = |v: i128| v * v * v;
    let lhs = cube(a) - cube(a - b) + cube(c - b + d) - cube(c);
    let rhs = cube(d) + 3 * d * (c * (c - 2 * b + d) + b * (b - d)) + 3 * b * (a - c) * (a + c - b);
    lhs == rhs
}

/// Roots `α, β` of `ξ₁ ↦ τ − 4π²(ξ₁³ − (ξ₁−ξ)³)`, stored as `ξ/2 ± d` so that
/// `α + β = ξ` holds exactly.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ResonanceRoots {
    pub xi: f64,
    center: f64,
    offset: Complex64,
}

impl ResonanceRoots {
    /// The root of larger modulus.
    pub fn alpha(&self) -> Complex64 {
        Complex64::new(self.center, 0.0) + self.offset
    }

    pub fn beta(&self) -> Complex64 {
        Complex64::new(self.center, 0.0) - self.offset
    }

    /// `α + β`, evaluated in the stored representation (exactly `ξ`).
    pub fn sum(&self) -> f64 {
        2.0 * self.center
    }

    /// `−12π²ξ(ξ₁−α)(ξ₁−β)`.
    pub fn factored(&self, xi1: f64) -> Complex64 {
        let z = Complex64::new(xi1, 0.0);
        -12.0 * PI * PI * self.xi * (z - self.alpha()) * (z - self.beta())
    }
}

/// `τ − 4π²(ξ₁³ − (ξ₁−ξ)³)` as a function of `ξ₁`.
pub fn resonance_function(tau: f64, xi: f64, xi1: f64) -> f64 {
    tau - 4.0 * PI * PI * (xi1.powi(3) - (xi1 - xi).powi(3))
}

pub fn resonance_roots(tau: f64, xi: f64) -> Result<ResonanceRoots> {
    if xi == 0.0 || !xi.is_finite() || !tau.is_finite() {
        return Err(LabError::domain("resonance roots need a finite ξ ≠ 0"));
    }
    // ξ₁² − ξξ₁ + (ξ²/3 − τ/(12π²ξ)) = 0, so ξ₁ = ξ/2 ± sqrt(τ/(12π²ξ) − ξ²/12).
    let disc = tau / (12.0 * PI * PI * xi) - xi * xi / 12.0;
    let center = xi / 2.0;
    let mut offset = if disc >= 0.0 {
        Complex64::new(disc.sqrt(), 0.0)
    } else {
        Complex64::new(0.0, (-disc).sqrt())
    };
    // |c + d|² − |c − d|² = 4c·Re(d)
    if center * offset.re < 0.0 {
        offset = -offset;
    }
    Ok(ResonanceRoots { xi, center, offset })
}

/// Removes the zero-frequency entry.
pub fn project_mean_zero(u: &CoeffVector) -> CoeffVector {
    let mut v = u.clone();
    v.entries.remove(&0);
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn airy_phase_fixtures() {
        let t1 = TorusSpec::UNIT;
        let p = SpaceTimePoint::new(0.3, 0.7, t1);
        assert_eq!(airy_phase(0, t1, p).unwrap(), c(1.0));
        let p = SpaceTimePoint::new(1.0, 0.0, t1);
        assert!((airy_phase(1, t1, p).unwrap() - c(1.0)).norm() < 1e-15);
        let p = SpaceTimePoint::new(0.125, 0.0, t1);
        assert!((airy_phase(2, t1, p).unwrap() - c(1.0)).norm() < 1e-15);
        assert!(airy_phase(MAX_FREQUENCY + 1, t1, p).is_err());
    }

    #[test]
    fn airy_phase_on_scaled_torus() {
        // ξ = 3/2 on T_2 at t = 1/27: ξ³t = 1/8, ξx = 3/4 at x = 1/2
        let t2 = TorusSpec::new(2).unwrap();
        let p = SpaceTimePoint::new(1.0 / 27.0, 0.5, t2);
        let z = airy_phase(3, t2, p).unwrap();
        let expected = turns(1.0 / 8.0 + 0.75);
        assert!((z - expected).norm() < 1e-14);
    }

    #[test]
    fn evolve_cosine_pair() {
        let u0 = CoeffVector::flat(TorusSpec::UNIT, [-1, 1]).unwrap();
        let t = 0.37;
        let f = evolve(&u0, t);
        for x in [0.0, 0.1, 0.55, 0.9] {
            let expected = 2.0 * (2.0 * PI * (t + x)).cos();
            assert!((f.eval(x) - c(expected)).norm() < 1e-12);
        }
        let single = CoeffVector::single(TorusSpec::UNIT, 1, c(1.0)).unwrap();
        assert!((evolve(&single, 0.81).eval(0.3).norm() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn evolve_preserves_mass() {
        let u0 = CoeffVector::from_entries(
            TorusSpec::new(3).unwrap(),
            [(-4, c(0.5)), (2, Complex64::new(0.1, -2.0)), (7, c(1.5))],
        )
        .unwrap();
        assert!((evolve(&u0, 0.0).mass() - evolve(&u0, 0.37).mass()).abs() < 1e-12);
        assert!((u0.mass() - evolve(&u0, 0.37).mass()).abs() < 1e-12);
    }

    #[test]
    fn pair_spectrum_fixtures() {
        let one = CoeffVector::flat(TorusSpec::UNIT, [1]).unwrap();
        let s = pair_spectrum(&one);
        assert_eq!(s.len(), 1);
        assert_eq!(s.get((2, 2)), Some(c(1.0)));

        let two = CoeffVector::flat(TorusSpec::UNIT, [-1, 1]).unwrap();
        let s = pair_spectrum(&two);
        assert_eq!(s.len(), 3);
        assert_eq!(s.get((2, 2)), Some(c(1.0)));
        assert_eq!(s.get((-2, -2)), Some(c(1.0)));
        assert_eq!(s.get((0, 0)), Some(c(2.0)));
    }

    #[test]
    fn pair_rigidity_exhaustive() {
        // 200 frequencies; every key with nonzero sum has one unordered preimage.
        let ks: Vec<i64> = (-100..100).map(|i| 3 * i + (i * i) % 7).collect();
        let u = CoeffVector::flat(TorusSpec::UNIT, ks.iter().copied()).unwrap();
        let support: Vec<i64> = u.support().collect();
        let mut preimages: FxHashMap<SpectrumKey, usize> = FxHashMap::default();
        for (i, &a) in support.iter().enumerate() {
            for &b in &support[i..] {
                *preimages.entry((a + b, a * a * a + b * b * b)).or_default() += 1;
            }
        }
        for (key, n) in &preimages {
            if key.0 != 0 {
                assert_eq!(*n, 1, "key {key:?}");
            }
        }
        let m = support.len();
        let antipodal = support.iter().filter(|&&k| k >= 0 && u.get(-k) != c(0.0)).count();
        let s = pair_spectrum(&u);
        assert_eq!(s.len(), m * (m + 1) / 2 - antipodal.saturating_sub(1));
    }

    #[test]
    fn cubic_identity_fixtures() {
        assert!(cubic_identity_check(0, 0, 0, 0));
        assert!(cubic_identity_check(1, 2, 3, 4));
        assert!(cubic_identity_check(-MAX_FREQUENCY, MAX_FREQUENCY, -7, MAX_FREQUENCY));
    }

    #[test]
    fn resonance_root_fixtures() {
        let r = resonance_roots(0.0, 1.0).unwrap();
        let s3 = 3f64.sqrt();
        let a = r.alpha();
        assert!((a.re - 0.5).abs() < 1e-15 && (a.im.abs() - s3 / 6.0).abs() < 1e-15);
        assert_eq!(r.sum(), 1.0);

        let r = resonance_roots(4.0 * PI * PI, 1.0).unwrap();
        assert!((r.alpha() - c(1.0)).norm() < 1e-12);
        assert!(r.beta().norm() < 1e-12);
        assert!(r.alpha().norm() >= r.beta().norm());

        assert!(resonance_roots(1.0, 0.0).is_err());
    }

    #[test]
    fn mean_zero_projection() {
        let u = CoeffVector::from_entries(TorusSpec::UNIT, [(0, c(5.0)), (1, c(2.0))]).unwrap();
        let p = project_mean_zero(&u);
        assert_eq!(p.len(), 1);
        assert_eq!(p.get(1), c(2.0));
        assert_eq!(project_mean_zero(&p), p);
    }

    #[test]
    fn dyadic_block_membership() {
        let t = TorusSpec::UNIT;
        let b = DyadicBlock::new(2).unwrap();
        assert_eq!(b.indices(t), vec![-3, -2, 2, 3]);
        assert!(b.contains(-3, t) && !b.contains(4, t) && !b.contains(1, t));
        let t3 = TorusSpec::new(3).unwrap();
        // ξ = k/3 ∈ [2, 4) ⇔ k ∈ [6, 12)
        assert!(b.contains(6, t3) && b.contains(11, t3) && !b.contains(12, t3));
        assert_eq!(b.cardinality(t3), 12);
        assert!(DyadicBlock::new(3).is_err());
    }

    #[test]
    fn json_round_trip_and_rejects_unknown_fields() {
        let u = CoeffVector::from_entries(
            TorusSpec::new(4).unwrap(),
            [(-3, Complex64::new(0.25, -1.0)), (9, c(2.0))],
        )
        .unwrap();
        let s = u.to_json().unwrap();
        assert_eq!(CoeffVector::from_json(&s).unwrap(), u);
        assert!(CoeffVector::from_json(r#"{"lambda":1,"coeffs":[],"extra":1}"#).is_err());
        assert!(CoeffVector::from_json(r#"{"lambda":0,"coeffs":[]}"#).is_err());
    }

    proptest! {
        #[test]
        fn cubic_identity_holds(a in -1000i64..=1000, b in -1000i64..=1000,
                                c in -1000i64..=1000, d in -1000i64..=1000) {
            prop_assert!(cubic_identity_check(a, b, c, d));
        }

        #[test]
        fn resonance_residual_small(tau in -1e4f64..1e4, xi in prop_oneof![-50.0f64..-0.01, 0.01f64..50.0]) {
            let r = resonance_roots(tau, xi).unwrap();
            prop_assert_eq!(r.sum() - xi, 0.0);
            prop_assert!(r.alpha().norm() >= r.beta().norm());
            for xi1 in [0.0, 1.0, -1.0, 2.0, -2.0] {
                let resid = Complex64::new(resonance_function(tau, xi, xi1), 0.0) - r.factored(xi1);
                let scale = 1.0 + tau.abs() + 4.0 * PI * PI * (xi.abs() + 2.0).powi(3);
                prop_assert!(resid.norm() < 1e-9 * scale, "resid {}", resid.norm());
            }
        }

        #[test]
        fn projection_is_idempotent(entries in proptest::collection::vec((-20i64..20, -5.0f64..5.0), 0..12)) {
            let u = CoeffVector::from_entries(TorusSpec::UNIT,
                entries.into_iter().map(|(k, a)| (k, Complex64::new(a, 0.5)))).unwrap();
            let p = project_mean_zero(&u);
            prop_assert_eq!(project_mean_zero(&p), p.clone());
            prop_assert_eq!(p.get(0), Complex64::new(0.0, 0.0));
        }
    }
}
