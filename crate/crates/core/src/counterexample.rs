//! Flat dyadic data and the logarithmic growth of its L⁸ norm on 𝕋².

use crate::error::{LabError, Result};
use crate::lattice::{CoeffVector, DyadicBlock, TorusSpec};
use crate::norm::lp_exact_power;
use crate::numeric::{fit_line, KahanSum, LineFit};
use num_complex::Complex64;
use rayon::prelude::*;
use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};

/// Largest `N` for the O(N³) triple enumeration.
pub const MSET_MAX_N: i64 = 128;
/// Largest `N` for the grouped L⁸ evaluation.
pub const GROUPED_MAX_N: u64 = 16;

/// `φ_N(x) = Σ_{N ≤ |ξ| < 2N} e^{2πiξx}` on 𝕋.
pub fn build_phi_n(n: u64) -> Result<CoeffVector> {
    let b = DyadicBlock::new(n)?;
    CoeffVector::flat(TorusSpec::UNIT, b.indices(TorusSpec::UNIT))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatioRow {
    pub n: u64,
    /// `‖e^{−t∂³/4π²}φ_N‖⁸_{L⁸(𝕋²)}`.
    pub l8_eighth_power: f64,
    /// `‖u_N‖⁸₈ / ‖φ_N‖⁸₂ = ‖u_N‖⁸₈ / (2N)⁴`.
    pub ratio: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RatioSweep {
    pub rows: Vec<RatioRow>,
    /// Least squares `ratio = slope·ln N + intercept`.
    pub fit: Option<LineFit>,
    /// `N` values where the ratio dropped below its predecessor.
    pub decreases: Vec<u64>,
}

pub fn l8_ratio_sweep(ns: &[u64]) -> Result<RatioSweep> {
    let mut rows = Vec::with_capacity(ns.len());
    for &n in ns {
        let phi = build_phi_n(n)?;
        let p8 = lp_exact_power(&phi, 8)?;
        rows.push(RatioRow {
            n,
            l8_eighth_power: p8,
            ratio: p8 / (2.0 * n as f64).powi(4),
        });
    }
    let xs: Vec<f64> = rows.iter().map(|r| (r.n as f64).ln()).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.ratio).collect();
    let decreases = rows
        .windows(2)
        .filter(|w| w[1].n > w[0].n && w[1].ratio < w[0].ratio)
        .map(|w| w[1].n)
        .collect();
    Ok(RatioSweep {
        fit: fit_line(&xs, &ys),
        rows,
        decreases,
    })
}

/// `M(α, ξ₄)` at scale `N`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MSetSpec {
    pub alpha: u64,
    pub xi4: i64,
    pub n: i64,
}

/// `⟨ξ⟩ = (1 + ξ²)^{1/2}`.
pub fn japanese(x: i64) -> f64 {
    (1.0 + (x as f64).powi(2)).sqrt()
}

fn resonance(x1: i64, x2: i64, x3: i64) -> i64 {
    (x2 * (x1 - x3) * (x1 + x3 - x2)).abs()
}

/// The bin index `α ≥ 1` of `|R|` for bin width `w`, using exactly the
/// floating comparisons `(α−1)w ≤ |R| < αw`.
fn bin_of(r: i64, w: f64) -> u64 {
    let rf = r as f64;
    let mut a = (rf / w).floor() as u64 + 1;
    while a > 1 && ((a - 1) as f64) * w > rf {
        a -= 1;
    }
    while rf >= a as f64 * w {
        a += 1;
    }
    a
}

fn check_n(n: i64) -> Result<()> {
    if n < 1 || n > MSET_MAX_N {
        return Err(LabError::CostGuard {
            what: "M-set triple enumeration",
            size: n.max(0) as u64,
            limit: MSET_MAX_N as u64,
            alternative: "a smaller N",
        });
    }
    Ok(())
}

/// Visits every triple with `|ξ₁|, |ξ₁−ξ₂|, |ξ₃−ξ₂+ξ₄|, |ξ₃| ≤ N`.
fn for_admissible(n: i64, xi4: i64, x1: i64, mut f: impl FnMut(i64, i64)) {
    for x3 in -n..=n {
        let lo = (x1 - n).max(x3 + xi4 - n);
        let hi = (x1 + n).min(x3 + xi4 + n);
        for x2 in lo..=hi {
            f(x2, x3);
        }
    }
}

/// Counts of `M(α, ξ₄)` for every `α` at once (index `α − 1`), restricted to
/// the four indicator constraints. The bins partition the admissible triples.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MSetHistogram {
    pub n: i64,
    pub xi4: i64,
    pub counts: Vec<u64>,
    pub admissible: u64,
}

impl MSetHistogram {
    pub fn count(&self, alpha: u64) -> u64 {
        if alpha == 0 {
            0
        } else {
            self.counts.get(alpha as usize - 1).copied().unwrap_or(0)
        }
    }
}

pub fn m_set_histogram(n: i64, xi4: i64) -> Result<MSetHistogram> {
    check_n(n)?;
    let w = japanese(xi4) * (n * n) as f64;
    let per_x1: Vec<FxHashMap<u64, u64>> = (-n..=n)
        .into_par_iter()
        .map(|x1| {
            let mut h = FxHashMap::default();
            for_admissible(n, xi4, x1, |x2, x3| {
                *h.entry(bin_of(resonance(x1, x2, x3), w)).or_insert(0) += 1;
            });
            h
        })
        .collect();
    let mut counts: Vec<u64> = Vec::new();
    for h in per_x1 {
        for (a, c) in h {
            let i = a as usize - 1;
            if counts.len() <= i {
                counts.resize(i + 1, 0);
            }
            counts[i] += c;
        }
    }
    let admissible = counts.iter().sum();
    Ok(MSetHistogram {
        n,
        xi4,
        counts,
        admissible,
    })
}

/// `#M(α, ξ₄)` under the indicator constraints, by direct enumeration.
pub fn m_set_count(spec: MSetSpec) -> Result<u64> {
    check_n(spec.n)?;
    if spec.alpha == 0 {
        return Err(LabError::invalid("α must be at least 1"));
    }
    let w = japanese(spec.xi4) * (spec.n * spec.n) as f64;
    let lo = (spec.alpha - 1) as f64 * w;
    let hi = spec.alpha as f64 * w;
    Ok((-spec.n..=spec.n)
        .into_par_iter()
        .map(|x1| {
            let mut c = 0u64;
            for_admissible(spec.n, spec.xi4, x1, |x2, x3| {
                let r = resonance(x1, x2, x3) as f64;
                if lo <= r && r < hi {
                    c += 1;
                }
            });
            c
        })
        .sum())
}

/// The part of `M(α, ξ₄)` with `N/16 ≤ ξ₃ < N/8` and `N/4 ≤ ξ₂ < 3N/4`.
pub fn m_set_witness_count(spec: MSetSpec) -> Result<u64> {
    check_n(spec.n)?;
    let n = spec.n;
    let w = japanese(spec.xi4) * (n * n) as f64;
    let (lo, hi) = ((spec.alpha.max(1) - 1) as f64 * w, spec.alpha as f64 * w);
    let mut c = 0u64;
    // integer forms of N/16 ≤ ξ₃ < N/8 and N/4 ≤ ξ₂ < 3N/4
    for x3 in (-n..=n).filter(|&x| 16 * x >= n && 8 * x < n) {
        for x2 in (-2 * n..=2 * n).filter(|&x| 4 * x >= n && 4 * x < 3 * n) {
            if (x3 - x2 + spec.xi4).abs() > n {
                continue;
            }
            for x1 in (-n..=n).filter(|&x| (x - x2).abs() <= n) {
                let r = resonance(x1, x2, x3) as f64;
                if lo <= r && r < hi {
                    c += 1;
                }
            }
        }
    }
    Ok(c)
}

/// One `(N, ξ₄, α)` cell of the cardinality law `#M ≥ c N² √(α⟨ξ₄⟩N)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MSetCell {
    pub n: i64,
    pub xi4: i64,
    pub alpha: u64,
    pub count: u64,
    /// `count / (N² √(α⟨ξ₄⟩N))`.
    pub ratio: f64,
}

/// All cells with `|ξ₄| ≤ N/8` and `1 ≤ α ≤ N/⟨ξ₄⟩`.
pub fn m_set_law_cells(n: i64) -> Result<Vec<MSetCell>> {
    let mut cells = Vec::new();
    for xi4 in -(n / 8)..=(n / 8) {
        let hist = m_set_histogram(n, xi4)?;
        let jx = japanese(xi4);
        let amax = (n as f64 / jx).floor() as u64;
        for alpha in 1..=amax {
            let count = hist.count(alpha);
            let scale = (n * n) as f64 * (alpha as f64 * jx * n as f64).sqrt();
            cells.push(MSetCell {
                n,
                xi4,
                alpha,
                count,
                ratio: count as f64 / scale,
            });
        }
    }
    Ok(cells)
}

/// The amplitude `a(ξ₁)·conj a(ξ₁−ξ₂)·a(ξ₃−ξ₂+ξ₄)·conj a(ξ₃)` summed into
/// groups keyed by `(ξ₄, phase)`, then `Σ |group|²`.
fn grouped_energy<F>(u: &CoeffVector, phase: F) -> f64
where
    F: Fn(i64, i64, i64, i64) -> i64 + Sync,
{
    let pts: Vec<(i64, Complex64)> = u.iter().collect();
    let mut groups: FxHashMap<(i64, i64), Complex64> = FxHashMap::default();
    // ξ₁, η = ξ₁−ξ₂, ξ₃, ζ = ξ₃−ξ₂+ξ₄ all range over the support
    for &(x1, a1) in &pts {
        for &(eta, b) in &pts {
            let x2 = x1 - eta;
            let ab = a1 * b.conj();
            for &(x3, a3) in &pts {
                let ab3 = ab * a3.conj();
                for &(zeta, c) in &pts {
                    let x4 = zeta - x3 + x2;
                    *groups.entry((x4, phase(x1, x2, x3, x4))).or_default() += ab3 * c;
                }
            }
        }
    }
    let mut keys: Vec<_> = groups.into_iter().collect();
    keys.sort_unstable_by_key(|e| e.0);
    keys.iter().map(|e| e.1.norm_sqr()).collect::<KahanSum>().value()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupedCheck {
    pub n: u64,
    pub generic: f64,
    pub grouped: f64,
    pub relative_difference: f64,
    /// Same grouping with the phase written with `ξ₁ ↔ ξ₂` exchanged.
    pub permuted: f64,
    pub permuted_relative_difference: f64,
}

/// `‖u_N‖⁸₈` through the `ξ₄`-grouped representation, compared with the
/// generic engine.
pub fn grouped_l8_check(n: u64) -> Result<GroupedCheck> {
    if n > GROUPED_MAX_N {
        return Err(LabError::CostGuard {
            what: "grouped L8 evaluation",
            size: n,
            limit: GROUPED_MAX_N,
            alternative: "the generic exact engine",
        });
    }
    let phi = build_phi_n(n)?;
    let generic = lp_exact_power(&phi, 8)?;
    let grouped = grouped_energy(&phi, |x1, x2, x3, x4| {
        x4 * x4 * x4 + 3 * x4 * (x3 * (x3 - 2 * x2 + x4) + x2 * (x2 - x4)) + 3 * x2 * (x1 - x3) * (x1 + x3 - x2)
    });
    let permuted = grouped_energy(&phi, |x1, x2, x3, x4| {
        3 * (x4 * (x3 * (x3 - 2 * x1 + x4) + x1 * (x2 - x4)) + x1 * (x2 - x3) * (x2 + x3 - x1))
    });
    Ok(GroupedCheck {
        n,
        generic,
        grouped,
        relative_difference: (grouped - generic).abs() / generic,
        permuted,
        permuted_relative_difference: (permuted - generic).abs() / generic,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn phi_n_support() {
        let p1 = build_phi_n(1).unwrap();
        assert_eq!(p1.support().collect::<Vec<_>>(), vec![-1, 1]);
        let p2 = build_phi_n(2).unwrap();
        assert_eq!(p2.support().collect::<Vec<_>>(), vec![-3, -2, 2, 3]);
        for n in [1u64, 4, 32] {
            let p = build_phi_n(n).unwrap();
            assert_eq!(p.mass(), 2.0 * n as f64);
            assert_eq!(p.mass().powi(4), (2.0 * n as f64).powi(4));
        }
        assert!(build_phi_n(3).is_err());
    }

    #[test]
    fn ratio_at_one() {
        let s = l8_ratio_sweep(&[1]).unwrap();
        assert!((s.rows[0].l8_eighth_power - 70.0).abs() < 1e-12);
        assert!((s.rows[0].ratio - 70.0 / 16.0).abs() < 1e-12);
    }

    #[test]
    fn bins_partition_admissible_triples() {
        for (n, xi4) in [(4, 0), (8, 1), (8, -3), (16, 2)] {
            let h = m_set_histogram(n, xi4).unwrap();
            let mut direct = 0u64;
            for x1 in -n..=n {
                for x2 in -3 * n..=3 * n {
                    for x3 in -n..=n {
                        if (x1 - x2).abs() <= n && (x3 - x2 + xi4).abs() <= n {
                            direct += 1;
                        }
                    }
                }
            }
            assert_eq!(h.admissible, direct);
            for alpha in 1..=h.counts.len() as u64 + 1 {
                assert_eq!(h.count(alpha), m_set_count(MSetSpec { alpha, xi4, n }).unwrap());
            }
        }
    }

    #[test]
    fn m_set_fixtures() {
        // |R| ≤ (2N)(2N)(4N), so bins beyond 16N³/w are empty
        let n = 4;
        let w = 16.0;
        let alpha = (16.0 * 64.0 / w) as u64 + 2;
        assert_eq!(m_set_count(MSetSpec { alpha, xi4: 0, n }).unwrap(), 0);
        assert_eq!(m_set_count(MSetSpec { alpha: 1, xi4: 0, n: 4 }).unwrap(), 441);
        assert!(m_set_count(MSetSpec { alpha: 1, xi4: 0, n: 129 }).is_err());
    }

    #[test]
    fn witness_is_a_subset() {
        for alpha in 1..=4 {
            let spec = MSetSpec { alpha, xi4: 1, n: 32 };
            assert!(m_set_witness_count(spec).unwrap() <= m_set_count(spec).unwrap());
        }
    }

    #[test]
    fn grouped_matches_generic() {
        let c = grouped_l8_check(1).unwrap();
        assert!((c.grouped - 70.0).abs() < 1e-12 && c.relative_difference <= 1e-12);
        assert!(grouped_l8_check(2).unwrap().relative_difference <= 1e-10);
        assert!(grouped_l8_check(8).unwrap().relative_difference <= 1e-9);
        assert!(grouped_l8_check(32).is_err());
    }
}
