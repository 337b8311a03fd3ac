//! Number-theoretic toolkit for the major-arc decomposition: Weyl sums,
//! Farey arcs, the arc bump `Φ` and its Fourier coefficients, totient and
//! divisor sums, and the sup of the localized kernel `K₁`.

use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::lattice::{cubic_turns, DyadicBlock, TorusSpec};
use crate::numeric::{mul_frac, turns, KahanComplex, KahanSum};
use crate::profile::{integrate_panels, EtaProfile, MollifiedPlateau, PHI};
use crate::rng::child_rng;

pub const MAX_ARC_SCALE: u64 = 1 << 20;
pub const MAX_WEYL_LENGTH: u64 = 10_000_000;
pub const MAX_ARC_PAIRS: u64 = 1 << 22;
pub const MAX_KERNEL_FREQUENCY: u64 = 512;
pub const DEFAULT_EPSILON: f64 = 0.05;
/// Decay exponent used in the `𝓕Φ` bound shape.
pub const DECAY_EXPONENT: i32 = 2;

fn check_dyadic(q: u64, what: &str) -> Result<()> {
    if q == 0 || !q.is_power_of_two() {
        return Err(LabError::invalid(format!("{what} = {q} is not a power of two")));
    }
    if q > MAX_ARC_SCALE {
        return Err(LabError::CostGuard {
            what: "arc scale",
            size: q,
            limit: MAX_ARC_SCALE,
            alternative: "use a smaller Q",
        });
    }
    Ok(())
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

pub fn japanese(x: f64) -> f64 {
    (1.0 + x * x).sqrt()
}

// ---------------------------------------------------------------------------
// Totients and divisors

/// `φ(0..=n)` by a linear sieve (`φ(0) = 0`).
pub fn totient_table(n: usize) -> Vec<u64> {
    let mut phi = vec![0u64; n + 1];
    let mut primes: Vec<usize> = Vec::new();
    if n >= 1 {
        phi[1] = 1;
    }
    for i in 2..=n {
        if phi[i] == 0 {
            phi[i] = (i - 1) as u64;
            primes.push(i);
        }
        for &p in &primes {
            let m = i * p;
            if m > n {
                break;
            }
            if i % p == 0 {
                phi[m] = phi[i] * p as u64;
                break;
            }
            phi[m] = phi[i] * (p - 1) as u64;
        }
    }
    phi
}

fn factorize(mut n: u64) -> Vec<(u64, u32)> {
    let mut out = Vec::new();
    let mut d = 2u64;
    while d * d <= n {
        if n % d == 0 {
            let mut e = 0;
            while n % d == 0 {
                n /= d;
                e += 1;
            }
            out.push((d, e));
        }
        d += if d == 2 { 1 } else { 2 };
    }
    if n > 1 {
        out.push((n, 1));
    }
    out
}

/// `φ(q)` from the prime factorization of `q`.
pub fn totient_trial(q: u64) -> u64 {
    if q == 0 {
        return 0;
    }
    factorize(q)
        .into_iter()
        .fold(q, |acc, (p, _)| acc / p * (p - 1))
}

pub fn mobius(n: u64) -> i64 {
    let f = factorize(n);
    if f.iter().any(|&(_, e)| e > 1) {
        0
    } else if f.len() % 2 == 0 {
        1
    } else {
        -1
    }
}

/// `c_q(γ) = Σ_{a ∈ P_q} e^{2πiaγ/q} = Σ_{d | gcd(q,γ)} μ(q/d) d`.
pub fn ramanujan_sum(q: u64, gamma: i64) -> i64 {
    let g = gcd(q, gamma.unsigned_abs());
    let mut s = 0i64;
    let mut d = 1u64;
    while d * d <= g {
        if g % d == 0 {
            s += mobius(q / d) * d as i64;
            let e = g / d;
            if e != d {
                s += mobius(q / e) * e as i64;
            }
        }
        d += 1;
    }
    s
}

/// `Σ_{q ∈ [Q, 2Q)} φ(q)/q²`.
pub fn totient_sum(scale: u64) -> Result<f64> {
    check_dyadic(scale, "Q")?;
    let phi = totient_table(2 * scale as usize - 1);
    Ok((scale..2 * scale)
        .map(|q| phi[q as usize] as f64 / (q as f64 * q as f64))
        .collect::<KahanSum>()
        .value())
}

/// Number of positive divisors of `|γ|` strictly below `q`.
pub fn divisor_count(gamma: i64, q: u64) -> Result<u64> {
    if gamma == 0 {
        return Err(LabError::domain("divisor count of zero"));
    }
    let g = gamma.unsigned_abs();
    let root = g.isqrt();
    let limit = root.min(q.saturating_sub(1));
    if limit > 1 << 32 {
        return Err(LabError::CostGuard {
            what: "divisor enumeration",
            size: limit,
            limit: 1 << 32,
            alternative: "use a smaller Q",
        });
    }
    let mut count = 0;
    for d in 1..=limit {
        if g % d == 0 {
            count += 1;
            let e = g / d;
            if e != d && e < q {
                count += 1;
            }
        }
    }
    Ok(count)
}

// ---------------------------------------------------------------------------
// Farey arcs

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArcPair {
    pub a: u64,
    pub q: u64,
}

impl ArcPair {
    pub fn center(&self) -> f64 {
        self.a as f64 / self.q as f64
    }

    pub fn inv_q2(&self) -> f64 {
        1.0 / (self.q as f64 * self.q as f64)
    }
}

/// The rationals `a/q` with `q ∈ [Q, 2Q)`, `1 ≤ a < q`, `gcd(a, q) = 1`,
/// together with the bump placed on each of them.
#[derive(Clone, Debug)]
pub struct MajorArcSystem {
    scale: u64,
    pairs: Vec<ArcPair>,
    bump: MollifiedPlateau,
}

/// All coprime pairs with `q ∈ [Q, 2Q)`, sorted by `a/q`.
///
/// Walks the Farey sequence of order `2Q − 1` and keeps the terms whose
/// denominator is at least `Q`.
pub fn farey_pairs(scale: u64) -> Result<MajorArcSystem> {
    check_dyadic(scale, "Q")?;
    let expected: u64 = totient_table(2 * scale as usize - 1)[scale as usize..]
        .iter()
        .sum();
    if expected > MAX_ARC_PAIRS {
        return Err(LabError::CostGuard {
            what: "Farey pairs",
            size: expected,
            limit: MAX_ARC_PAIRS,
            alternative: "use totient_sum or a smaller Q",
        });
    }
    let n = 2 * scale - 1;
    let mut pairs = Vec::with_capacity(expected as usize);
    let (mut a, mut b, mut c, mut d) = (0u64, 1u64, 1u64, n);
    while c < d {
        if d >= scale {
            pairs.push(ArcPair { a: c, q: d });
        }
        let k = (n + b) / d;
        (a, b, c, d) = (c, d, k * c - a, k * d - b);
    }
    debug_assert_eq!(pairs.len() as u64, expected);
    Ok(MajorArcSystem {
        scale,
        pairs,
        bump: PHI,
    })
}

fn overlapping_neighbours(mut intervals: Vec<(f64, f64)>) -> usize {
    intervals.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut reach = f64::NEG_INFINITY;
    let mut count = 0;
    for (lo, hi) in intervals {
        if lo <= reach {
            count += 1;
        }
        reach = reach.max(hi);
    }
    count
}

impl MajorArcSystem {
    pub fn scale(&self) -> u64 {
        self.scale
    }

    pub fn pairs(&self) -> &[ArcPair] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn bump(&self) -> MollifiedPlateau {
        self.bump
    }

    /// Support of `φ((t − a/q) q²)`.
    pub fn arc_support(&self, p: ArcPair) -> (f64, f64) {
        let (lo, hi) = self.bump.support();
        (p.center() + lo * p.inv_q2(), p.center() + hi * p.inv_q2())
    }

    /// Arcs that meet an earlier arc when the supports of the bumps are
    /// swept left to right.
    pub fn support_overlaps(&self) -> usize {
        overlapping_neighbours(self.pairs.iter().map(|&p| self.arc_support(p)).collect())
    }

    /// The same count for the closed neighbourhoods `|t − a/q| ≤ 1/q²`.
    pub fn radius_overlaps(&self) -> usize {
        overlapping_neighbours(
            self.pairs
                .iter()
                .map(|p| (p.center() - p.inv_q2(), p.center() + p.inv_q2()))
                .collect(),
        )
    }

    pub fn is_coprime(&self) -> bool {
        self.pairs
            .iter()
            .all(|p| p.a >= 1 && p.a < p.q && gcd(p.a, p.q) == 1)
    }

    /// `Φ(t)` for the 1-periodic extension.
    pub fn phi_eval(&self, t: f64) -> f64 {
        let t = t - t.floor();
        let mut s = 0.0;
        for q in self.scale..2 * self.scale {
            let a = (q as f64 * t).floor() as u64;
            if a == 0 || a >= q || gcd(a, q) != 1 {
                continue;
            }
            let u = (t - a as f64 / q as f64) * (q as f64 * q as f64);
            s += self.bump.value(u);
        }
        s
    }

    /// `𝓕Φ(γ)` from the sum over arcs.
    pub fn phi_fourier(&self, gamma: i64) -> Complex64 {
        let mut acc = KahanComplex::new();
        for p in &self.pairs {
            let r = (p.a as i128 * gamma as i128).rem_euclid(p.q as i128);
            let phase = turns(-(r as f64) / p.q as f64);
            acc.add(phase * self.bump.fourier(gamma as f64 * p.inv_q2()) * p.inv_q2());
        }
        acc.value()
    }

    /// `𝓕Φ(γ)` with the sum over `a` collapsed into Ramanujan sums.
    pub fn phi_fourier_ramanujan(&self, gamma: i64) -> Complex64 {
        let mut acc = KahanComplex::new();
        for q in self.scale..2 * self.scale {
            let w = 1.0 / (q as f64 * q as f64);
            let c = ramanujan_sum(q, gamma) as f64;
            if c != 0.0 {
                acc.add(self.bump.fourier(gamma as f64 * w) * (c * w));
            }
        }
        acc.value()
    }

    /// `𝓕Φ(0) = ∫φ · Σ φ(q)/q²`.
    pub fn phi_fourier_zero(&self) -> f64 {
        let s: KahanSum = self.pairs.iter().map(|p| p.inv_q2()).collect();
        s.value() * (self.bump.hi - self.bump.lo)
    }

    /// `‖Φ‖²_{L²[0,1]}` for disjoint arcs: `Σ q⁻² ∫φ²`.
    pub fn l2_norm_sq(&self) -> f64 {
        let (lo, hi) = self.bump.support();
        let (p0, p1) = self.bump.plateau();
        let phi2 = integrate_panels(
            |u| self.bump.value(u).powi(2),
            lo,
            hi,
            &[p0, p1],
            (hi - lo) / 16.0,
        );
        let s: KahanSum = self.pairs.iter().map(|p| p.inv_q2()).collect();
        s.value() * phi2
    }

    /// `Σ_{|γ| ≤ Γ} |𝓕Φ(γ)|²`.
    pub fn parseval_partial(&self, gamma_max: i64) -> f64 {
        let terms: Vec<f64> = (1..=gamma_max)
            .into_par_iter()
            .map(|g| 2.0 * self.phi_fourier(g).norm_sqr())
            .collect();
        let mut acc = KahanSum::new();
        acc.add(self.phi_fourier(0).norm_sqr());
        for t in terms {
            acc.add(t);
        }
        acc.value()
    }
}

/// `min{⟨γ⟩^ε, Q} / (Q^{1−ε} ⟨γ/Q²⟩^A)`.
pub fn fourier_bound_shape(gamma: i64, scale: u64, eps: f64) -> f64 {
    let q = scale as f64;
    let g = gamma as f64;
    japanese(g).powf(eps).min(q) / (q.powf(1.0 - eps) * japanese(g / (q * q)).powi(DECAY_EXPONENT))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FourierBoundRow {
    pub scale: u64,
    pub gamma: i64,
    pub modulus: f64,
    pub shape: f64,
    pub ratio: f64,
}

/// `|𝓕Φ(γ)|` against the bound shape for `1 ≤ γ ≤ γ_max`.
pub fn fourier_bound_table(sys: &MajorArcSystem, gamma_max: i64, eps: f64) -> Vec<FourierBoundRow> {
    (1..=gamma_max)
        .into_par_iter()
        .map(|g| {
            let modulus = sys.phi_fourier(g).norm();
            let shape = fourier_bound_shape(g, sys.scale, eps);
            FourierBoundRow {
                scale: sys.scale,
                gamma: g,
                modulus,
                shape,
                ratio: modulus / shape,
            }
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Weyl sums

/// `Σ_{n=0}^p e^{2πi(tn³ + a₂n² + a₁n + a₀)}` with every phase reduced
/// exactly before the exponential is taken.
pub fn weyl_sum(t: f64, a2: f64, a1: f64, a0: f64, p: u64) -> Result<Complex64> {
    if p > MAX_WEYL_LENGTH {
        return Err(LabError::CostGuard {
            what: "Weyl sum length",
            size: p,
            limit: MAX_WEYL_LENGTH,
            alternative: "use a shorter sum",
        });
    }
    let base = a0 - a0.floor();
    let mut acc = KahanComplex::new();
    for n in 0..=p as i128 {
        let x = mul_frac(t, n * n * n) + mul_frac(a2, n * n) + mul_frac(a1, n) + base;
        acc.add(turns(x));
    }
    Ok(acc.value())
}

/// `p^{1+ε} (1/p + 1/q + q/p³)^{1/4}`.
pub fn weyl_lemma_bound(p: u64, q: u64, eps: f64) -> f64 {
    let pf = p as f64;
    let qf = q as f64;
    pf.powf(1.0 + eps) * (1.0 / pf + 1.0 / qf + qf / pf.powi(3)).powf(0.25)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeylSample {
    pub a: u64,
    pub q: u64,
    pub t: f64,
    pub a2: f64,
    pub a1: f64,
    pub a0: f64,
    pub modulus: f64,
    pub ratio: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WeylSweepConfig {
    pub epsilon: f64,
    pub samples_per_scale: usize,
    pub max_scale: u64,
    pub seed: u64,
}

impl Default for WeylSweepConfig {
    fn default() -> Self {
        Self {
            epsilon: DEFAULT_EPSILON,
            samples_per_scale: 64,
            max_scale: 1 << 10,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WeylRatioReport {
    pub p: u64,
    pub epsilon: f64,
    pub samples: Vec<WeylSample>,
    pub max_ratio: f64,
}

/// Samples `t` on the arcs `|t − a/q| ≤ 1/q²` for dyadic `Q` from 2 up to
/// `min(p, max_scale)` and records `|S| / bound`.
///
/// Each scale gets one unperturbed sample (`t = 1/q`, zero lower
/// coefficients) and `samples_per_scale` random ones.
pub fn weyl_bound_ratio(p: u64, cfg: &WeylSweepConfig) -> Result<WeylRatioReport> {
    if p == 0 {
        return Err(LabError::invalid("Weyl sum length must be positive"));
    }
    let mut rng = child_rng(cfg.seed, &format!("weyl/{p}"));
    let mut plan = Vec::new();
    let top = p.min(cfg.max_scale).max(2);
    let mut scale = 2u64;
    while scale <= top {
        plan.push((1u64, scale, 0.0, 0.0, 0.0, 0.0));
        for _ in 0..cfg.samples_per_scale {
            let q = rng.gen_range(scale..2 * scale);
            let a = loop {
                let a = rng.gen_range(1..q);
                if gcd(a, q) == 1 {
                    break a;
                }
            };
            let r = 1.0 / (q as f64 * q as f64);
            let delta = rng.gen_range(-r..=r);
            plan.push((a, q, delta, rng.gen(), rng.gen(), rng.gen()));
        }
        scale *= 2;
    }
    let samples = plan
        .into_par_iter()
        .map(|(a, q, delta, a2, a1, a0)| {
            let t = a as f64 / q as f64 + delta;
            let modulus = weyl_sum(t, a2, a1, a0, p)?.norm();
            Ok(WeylSample {
                a,
                q,
                t,
                a2,
                a1,
                a0,
                modulus,
                ratio: modulus / weyl_lemma_bound(p, q, cfg.epsilon),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let max_ratio = samples.iter().map(|s| s.ratio).fold(0.0, f64::max);
    Ok(WeylRatioReport {
        p,
        epsilon: cfg.epsilon,
        samples,
        max_ratio,
    })
}

// ---------------------------------------------------------------------------
// The localized kernel

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub low: DyadicBlock,
    pub high: DyadicBlock,
    pub torus: TorusSpec,
}

impl KernelSpec {
    pub fn new(low: u64, high: u64, torus: TorusSpec) -> Result<Self> {
        let low = DyadicBlock::new(low)?;
        let high = DyadicBlock::new(high)?;
        if high.scale() < low.scale() {
            return Err(LabError::invalid("kernel blocks need N ≥ L"));
        }
        Ok(Self { low, high, torus })
    }

    /// `Q = N` when `N ≤ L²`, else `Q = L²`; never below 2, where the arc
    /// system would be empty.
    pub fn major_arc_scale(&self) -> u64 {
        let l = self.low.scale();
        let n = self.high.scale();
        let q = if n <= l * l { n } else { l * l };
        q.max(2)
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct KernelGrid {
    /// Time samples across the support of each arc.
    pub points_per_arc: usize,
    /// Spatial samples per period; 0 picks four times the Nyquist count.
    pub x_points: usize,
}

impl Default for KernelGrid {
    fn default() -> Self {
        Self {
            points_per_arc: 7,
            x_points: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelSup {
    pub sup: f64,
    pub normalized: f64,
    pub argmax_t: f64,
    pub argmax_x: f64,
    pub scale: u64,
    pub evaluations: u64,
}

struct BlockSum {
    ks: Vec<i64>,
    lambda: u32,
    grid: usize,
    fft: Arc<dyn Fft<f64>>,
}

impl BlockSum {
    /// `|Σ_k e^{2πi(ξ³t + ξx)}|` at `x_j = λj/G`.
    fn abs_row(&self, t: f64, out: &mut [f64], buf: &mut [Complex64]) {
        buf.fill(Complex64::new(0.0, 0.0));
        let g = self.grid as i64;
        for &k in &self.ks {
            buf[k.rem_euclid(g) as usize] += turns(cubic_turns(k, self.lambda, t));
        }
        self.fft.process(buf);
        for (o, z) in out.iter_mut().zip(buf.iter()) {
            *o = z.norm();
        }
    }
}

/// Grid sup of `|K₁| = Φ|η̃||S_L||S_N| / 𝓕Φ(0)` over the arcs in
/// `t ∈ [−4, 4)`, where `η̃` is tabulated, and the normalized ratio
/// `sup / (λ² N^{3/4+ε} L^{3/4+ε})`.
pub fn kernel_k1_sup(
    spec: &KernelSpec,
    sys: &MajorArcSystem,
    grid: &KernelGrid,
    eps: f64,
) -> Result<KernelSup> {
    let lambda = spec.torus.lambda();
    let ln = lambda as u64 * spec.high.scale();
    if ln > MAX_KERNEL_FREQUENCY {
        return Err(LabError::CostGuard {
            what: "kernel λN",
            size: ln,
            limit: MAX_KERNEL_FREQUENCY,
            alternative: "use a smaller block or torus",
        });
    }
    if sys.is_empty() || grid.points_per_arc == 0 {
        return Err(LabError::invalid("kernel sup needs a nonempty arc system and grid"));
    }
    let min_grid = (4 * ln as usize).next_power_of_two();
    let g = if grid.x_points == 0 { 4 * min_grid } else { grid.x_points };
    if g < min_grid || !g.is_power_of_two() {
        return Err(LabError::invalid(format!(
            "x grid {g} must be a power of two ≥ {min_grid}"
        )));
    }
    let fft = FftPlanner::new().plan_fft_inverse(g);
    let low = BlockSum {
        ks: spec.low.indices(spec.torus),
        lambda,
        grid: g,
        fft: fft.clone(),
    };
    let high = BlockSum {
        ks: spec.high.indices(spec.torus),
        lambda,
        grid: g,
        fft,
    };

    let profile = EtaProfile::global();
    let norm0 = sys.phi_fourier_zero();
    let (s0, s1) = sys.bump().support();
    let (p0, p1) = sys.bump().plateau();
    let mut offsets: Vec<f64> = (0..grid.points_per_arc)
        .map(|i| s0 + (s1 - s0) * (i as f64 + 0.5) / grid.points_per_arc as f64)
        .collect();
    offsets.push(0.5 * (p0 + p1));
    let mut times = Vec::new();
    for m in -4i64..4 {
        for p in sys.pairs() {
            for &u in &offsets {
                times.push(m as f64 + p.center() + u * p.inv_q2());
            }
        }
    }

    let best = times
        .par_iter()
        .map_init(
            || (vec![0.0; g], vec![0.0; g], vec![Complex64::new(0.0, 0.0); g]),
            |(rl, rn, buf), &t| {
                let w = sys.phi_eval(t) * profile.eta_tilde(t).abs() / norm0;
                if w == 0.0 {
                    return (0.0, t, 0usize);
                }
                low.abs_row(t, rl, buf);
                high.abs_row(t, rn, buf);
                let mut best = (0.0, t, 0usize);
                for j in 0..g {
                    let v = w * rl[j] * rn[j];
                    if v > best.0 {
                        best = (v, t, j);
                    }
                }
                best
            },
        )
        .reduce(
            || (0.0, 0.0, 0usize),
            |x, y| if y.0 > x.0 || (y.0 == x.0 && y.1 < x.1) { y } else { x },
        );
    let (sup, t_best, j_best) = best;
    let lf = lambda as f64;
    let expo = 0.75 + eps;
    let normalized = sup
        / (lf * lf * (spec.high.scale() as f64).powf(expo) * (spec.low.scale() as f64).powf(expo));
    Ok(KernelSup {
        sup,
        normalized,
        argmax_t: t_best,
        argmax_x: lf * j_best as f64 / g as f64,
        scale: sys.scale(),
        evaluations: (times.len() * g) as u64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sieve_matches_trial_division() {
        let phi = totient_table(5000);
        for q in 0..=5000u64 {
            assert_eq!(phi[q as usize], totient_trial(q), "q = {q}");
        }
    }

    #[test]
    fn totient_sum_examples() {
        assert_eq!(totient_sum(1).unwrap(), 1.0);
        assert!((totient_sum(2).unwrap() - 17.0 / 36.0).abs() < 1e-15);
        assert!(totient_sum(3).is_err());
    }

    #[test]
    fn divisor_examples() {
        assert_eq!(divisor_count(12, 5).unwrap(), 4);
        assert_eq!(divisor_count(-12, 13).unwrap(), 6);
        assert_eq!(divisor_count(1, 2).unwrap(), 1);
        assert_eq!(divisor_count(97, 97).unwrap(), 1);
        assert!(divisor_count(0, 4).is_err());
    }

    #[test]
    fn farey_small_scales() {
        let s = farey_pairs(2).unwrap();
        let v: Vec<(u64, u64)> = s.pairs().iter().map(|p| (p.a, p.q)).collect();
        assert_eq!(v, vec![(1, 3), (1, 2), (2, 3)]);
        let s = farey_pairs(4).unwrap();
        assert_eq!(s.len(), 14);
        assert!(s.is_coprime());
        assert!(s.pairs().windows(2).all(|w| w[0].center() < w[1].center()));
    }

    #[test]
    fn ramanujan_matches_direct_sum() {
        for q in 1..40u64 {
            for g in -50..50i64 {
                let direct: f64 = (1..q.max(2))
                    .filter(|&a| a < q && gcd(a, q) == 1)
                    .map(|a| turns((a as i64 * g) as f64 / q as f64).re)
                    .sum();
                let direct = if q == 1 { 1.0 } else { direct };
                assert!((direct - ramanujan_sum(q, g) as f64).abs() < 1e-9, "q={q} g={g}");
            }
        }
    }

    #[test]
    fn weyl_examples() {
        let s = weyl_sum(0.0, 0.0, 0.0, 0.0, 10).unwrap();
        assert_eq!(s, Complex64::new(11.0, 0.0));
        let s = weyl_sum(0.5, 0.0, 0.0, 0.0, 9).unwrap();
        assert!(s.norm() < 1e-12);
        let (t, a2, a1, a0) = (0.3, 0.1, 0.7, 0.25);
        let s = weyl_sum(t, a2, a1, a0, 1).unwrap();
        let e = turns(a0) * (Complex64::new(1.0, 0.0) + turns(t + a2 + a1));
        assert!((s - e).norm() < 1e-14, "{s} vs {e}");
        let s = weyl_sum(t, a2, a1, 0.0, 1).unwrap();
        let e = Complex64::new(1.0, 0.0) + turns(t + a2 + a1);
        assert!((s - e).norm() < 1e-14);
    }

    #[test]
    fn phi_plateau_and_gaps() {
        let s = farey_pairs(4).unwrap();
        for p in s.pairs() {
            let t = p.center() + 1.5 / 100.0 * p.inv_q2();
            assert_eq!(s.phi_eval(t), 1.0);
        }
        assert_eq!(s.phi_eval(0.0), 0.0);
        assert_eq!(s.phi_eval(0.99), 0.0);
    }
}
