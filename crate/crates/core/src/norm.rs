//! Space-time Lᵖ norms of Airy flows.
//!
//! Exact even norms on 𝕋² go through `‖u‖_p^p = ‖u^{p/2}‖²_{L²(𝕋²)}`: the
//! space-time spectrum of `u^{m}` is indexed by (sum of numerators, sum of
//! cubes), and Plancherel turns the norm into a sum of squared moduli of
//! that spectrum. The spectrum is built one linear-sum slice at a time.

use crate::error::{LabError, Result};
use crate::lattice::{cubic_turns, pair_spectrum, CoeffVector, DyadicBlock, TorusSpec};
use crate::numeric::{mean_stderr, turns, KahanSum};
use crate::profile::EtaProfile;
use crate::rng::child_rng;
use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use rustc_hash::FxHashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// Largest support accepted by the exact p = 8 engine.
pub const EXACT_P8_MAX_SUPPORT: usize = 1200;
/// Largest support accepted by the exact p = 6 engine.
pub const EXACT_P6_MAX_SUPPORT: usize = 4000;
/// Largest `Σ_σ n_σ²` accepted by the semi-analytic bilinear evaluation.
pub const SEMI_ANALYTIC_MAX_PAIRS: u64 = 100_000_000;
/// Largest `|spec(u_L²)|·|spec(u_N²)|` accepted by the semi-analytic mode.
pub const SEMI_ANALYTIC_MAX_PRODUCTS: u64 = 400_000_000;
/// Largest spatial grid used by the sampled estimators.
pub const MAX_GRID: usize = 1 << 24;

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NormMethod {
    ExactCounting,
    SemiAnalytic,
    Sampled,
}

impl NormMethod {
    pub fn as_str(&self) -> &'static str {
        match self {
            NormMethod::ExactCounting => "exact-counting",
            NormMethod::SemiAnalytic => "semi-analytic",
            NormMethod::Sampled => "sampled",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormResult {
    /// The norm itself, not its p-th power.
    pub value: f64,
    pub p: u32,
    pub method: NormMethod,
    pub std_error: f64,
    /// `value^p` as computed, before the root is taken.
    power: f64,
}

impl NormResult {
    fn exact(power: f64, p: u32, method: NormMethod) -> Self {
        NormResult {
            value: power.max(0.0).powf(1.0 / p as f64),
            p,
            method,
            std_error: 0.0,
            power: power.max(0.0),
        }
    }

    /// `value^p`.
    pub fn power(&self) -> f64 {
        self.power
    }

    /// Standard error of `value^p` by the delta method.
    pub fn power_std_error(&self) -> f64 {
        if self.value == 0.0 {
            0.0
        } else {
            self.p as f64 * self.power / self.value * self.std_error
        }
    }
}

/// A space-time spectrum split by linear sum: slice `s` lists
/// `(cube sum, amplitude)` sorted by cube sum.
#[derive(Clone, Debug, Default)]
pub(crate) struct Sliced {
    min_s: i64,
    slices: Vec<Vec<(i64, Complex64)>>,
}

fn sorted_entries(map: FxHashMap<i64, Complex64>) -> Vec<(i64, Complex64)> {
    let mut v: Vec<_> = map.into_iter().collect();
    v.sort_unstable_by_key(|e| e.0);
    v
}

impl Sliced {
    fn from_keyed(mut entries: Vec<((i64, i64), Complex64)>) -> Self {
        if entries.is_empty() {
            return Sliced::default();
        }
        entries.sort_unstable_by_key(|e| e.0);
        let min_s = entries[0].0 .0;
        let max_s = entries[entries.len() - 1].0 .0;
        let mut slices = vec![Vec::new(); (max_s - min_s + 1) as usize];
        for ((s, c), v) in entries {
            slices[(s - min_s) as usize].push((c, v));
        }
        Sliced { min_s, slices }
    }

    /// The spectrum of `u` itself.
    pub(crate) fn first(u: &CoeffVector) -> Self {
        Self::from_keyed(u.iter().map(|(k, a)| ((k, k * k * k), a)).collect())
    }

    /// The spectrum of `u²`.
    pub(crate) fn second(u: &CoeffVector) -> Self {
        Self::from_keyed(pair_spectrum(u).iter().collect())
    }

    /// Spectrum of `u^{m+1}` from that of `u^m` (this) and of `u`.
    pub(crate) fn extend(&self, first: &Sliced) -> Self {
        let Some((lo, hi)) = self.bounds() else {
            return Sliced::default();
        };
        let Some((flo, fhi)) = first.bounds() else {
            return Sliced::default();
        };
        let slices: Vec<Vec<(i64, Complex64)>> = (lo + flo..=hi + fhi)
            .into_par_iter()
            .map(|s| {
                let mut map = FxHashMap::default();
                cross_slice(self, first, s, &mut map);
                sorted_entries(map)
            })
            .collect();
        Sliced {
            min_s: lo + flo,
            slices,
        }
    }

    pub(crate) fn bounds(&self) -> Option<(i64, i64)> {
        (!self.slices.is_empty()).then(|| (self.min_s, self.min_s + self.slices.len() as i64 - 1))
    }

    pub(crate) fn get(&self, s: i64) -> &[(i64, Complex64)] {
        let i = s - self.min_s;
        if i < 0 || i >= self.slices.len() as i64 {
            &[]
        } else {
            &self.slices[i as usize]
        }
    }

    pub(crate) fn sum_sq(&self) -> f64 {
        self.slices
            .iter()
            .map(|sl| sl.iter().map(|e| e.1.norm_sqr()).collect::<KahanSum>().value())
            .collect::<KahanSum>()
            .value()
    }
}

/// Adds slice `s` of `a ⊛ b` into `out`.
pub(crate) fn cross_slice(a: &Sliced, b: &Sliced, s: i64, out: &mut FxHashMap<i64, Complex64>) {
    let (Some((alo, ahi)), Some((blo, bhi))) = (a.bounds(), b.bounds()) else {
        return;
    };
    for sa in alo.max(s - bhi)..=ahi.min(s - blo) {
        let sb = s - sa;
        let right = b.get(sb);
        if right.is_empty() {
            continue;
        }
        for &(ca, va) in a.get(sa) {
            for &(cb, vb) in right {
                *out.entry(ca + cb).or_insert(ZERO) += va * vb;
            }
        }
    }
}

/// Adds slice `s` of `a ⊛ a` into `out`, visiting each unordered pair of
/// slices once.
pub(crate) fn square_slice(a: &Sliced, s: i64, out: &mut FxHashMap<i64, Complex64>) {
    let Some((lo, hi)) = a.bounds() else {
        return;
    };
    let mut sa = lo.max(s - hi);
    while 2 * sa <= s && sa <= hi {
        let sb = s - sa;
        let left = a.get(sa);
        let right = a.get(sb);
        if !left.is_empty() && !right.is_empty() {
            let w = if sa == sb { 1.0 } else { 2.0 };
            for &(ca, va) in left {
                let wa = va * w;
                for &(cb, vb) in right {
                    *out.entry(ca + cb).or_insert(ZERO) += wa * vb;
                }
            }
        }
        sa += 1;
    }
}

fn slice_energy(map: &FxHashMap<i64, Complex64>) -> f64 {
    map.values().map(|v| v.norm_sqr()).collect::<KahanSum>().value()
}

/// Sums per-slice energies over `targets`, folding `s ↦ −s` when the data
/// is real. Slices are computed independently and combined in index order,
/// so the result does not depend on the worker count.
fn sliced_energy<F>(targets: (i64, i64), real: bool, slice: F) -> f64
where
    F: Fn(i64) -> f64 + Sync,
{
    let (lo, hi) = targets;
    let start = if real { lo.max(0) } else { lo };
    let parts: Vec<f64> = (start..=hi)
        .into_par_iter()
        .map(|s| {
            let e = slice(s);
            if real && s > 0 {
                2.0 * e
            } else {
                e
            }
        })
        .collect();
    parts.into_iter().collect::<KahanSum>().value()
}

fn require_unit_torus(u: &CoeffVector) -> Result<()> {
    if u.torus().lambda() != 1 {
        return Err(LabError::domain(format!(
            "exact and sampled torus norms are defined on T² (λ = 1), got λ = {}",
            u.torus().lambda()
        )));
    }
    Ok(())
}

/// `‖u‖_{L^p(𝕋²)}^p` by exact counting.
pub fn lp_exact_power(u0: &CoeffVector, p: u32) -> Result<f64> {
    require_unit_torus(u0)?;
    let m = u0.len();
    if u0.is_empty() {
        return Ok(0.0);
    }
    let real = u0.is_conjugate_symmetric(0.0);
    match p {
        2 => Ok(u0.sum_sq()),
        4 => Ok(Sliced::second(u0).sum_sq()),
        6 => {
            if m > EXACT_P6_MAX_SUPPORT {
                return Err(LabError::CostGuard {
                    what: "exact p=6 counting",
                    size: m as u64,
                    limit: EXACT_P6_MAX_SUPPORT as u64,
                    alternative: "lp_sampled",
                });
            }
            let c1 = Sliced::first(u0);
            let c2 = Sliced::second(u0);
            let (lo, hi) = c2.bounds().expect("nonempty");
            let (flo, fhi) = c1.bounds().expect("nonempty");
            Ok(sliced_energy((lo + flo, hi + fhi), real, |s| {
                let mut map = FxHashMap::default();
                cross_slice(&c2, &c1, s, &mut map);
                slice_energy(&map)
            }))
        }
        8 => {
            if m > EXACT_P8_MAX_SUPPORT {
                return Err(LabError::CostGuard {
                    what: "exact p=8 counting",
                    size: m as u64,
                    limit: EXACT_P8_MAX_SUPPORT as u64,
                    alternative: "lp_sampled",
                });
            }
            let c2 = Sliced::second(u0);
            let (lo, hi) = c2.bounds().expect("nonempty");
            Ok(sliced_energy((2 * lo, 2 * hi), real, |s| {
                let mut map = FxHashMap::default();
                square_slice(&c2, s, &mut map);
                slice_energy(&map)
            }))
        }
        _ => Err(LabError::invalid(format!(
            "exact counting supports p ∈ {{2, 4, 6, 8}}, got p = {p}; use lp_sampled"
        ))),
    }
}

/// `‖e^{−t∂³/4π²}u₀‖_{L^p(𝕋²)}` by exact counting, for `p ∈ {2, 4, 6, 8}`.
pub fn lp_exact_torus(u0: &CoeffVector, p: u32) -> Result<NormResult> {
    Ok(NormResult::exact(
        lp_exact_power(u0, p)?,
        p,
        NormMethod::ExactCounting,
    ))
}

/// `‖u‖_{L⁴(𝕋²)}⁴` in closed form from the pair structure of cubic sums:
/// off-diagonal non-antipodal pairs, diagonal pairs, and the collapsed
/// antipodal key.
pub fn l4_closed_form(u0: &CoeffVector) -> f64 {
    let sq: Vec<(i64, f64)> = u0.iter().map(|(k, a)| (k, a.norm_sqr())).collect();
    let total: KahanSum = sq.iter().map(|e| e.1).collect();
    let quartic: KahanSum = sq.iter().map(|e| e.1 * e.1).collect();
    let t = total.value();
    // Σ_{ξ≠η unordered} 4|a_ξ|²|a_η|² = 2((Σ|a|²)² − Σ|a|⁴)
    let mut acc = KahanSum::new();
    acc.add(2.0 * t * t);
    acc.add(-2.0 * quartic.value());
    for &(k, w) in &sq {
        if k > 0 {
            acc.add(-4.0 * w * u0.get(-k).norm_sqr());
        }
    }
    for &(k, w) in &sq {
        if k != 0 {
            acc.add(w * w);
        }
    }
    let anti: Complex64 = u0.iter().map(|(k, a)| a * u0.get(-k)).sum();
    acc.add(anti.norm_sqr());
    acc.value()
}

/// Smallest power of two exceeding `bound`, or a guard error.
pub(crate) fn grid_above(bound: u64, what: &'static str) -> Result<usize> {
    let g = (bound + 1).next_power_of_two();
    if g as usize > MAX_GRID {
        return Err(LabError::CostGuard {
            what,
            size: g,
            limit: MAX_GRID as u64,
            alternative: "a smaller frequency support",
        });
    }
    Ok(g as usize)
}

/// Number of equispaced times that integrates `|u|^p` over one period exactly.
pub fn t_exact(u: &CoeffVector, p: u32) -> u128 {
    let (Some(lo), Some(hi)) = (u.min_index(), u.max_index()) else {
        return 1;
    };
    let (lo, hi) = (lo as i128, hi as i128);
    (p as u128 / 2) * (hi * hi * hi - lo * lo * lo) as u128 + 1
}

/// Evaluates a flow on an equispaced spatial grid at a progression of times
/// `t_i = t₀ + i·dt`, updating phases by multiplication and resynchronizing
/// them exactly every few steps.
pub(crate) struct FlowGrid {
    lambda: u32,
    ks: Vec<i64>,
    amps: Vec<Complex64>,
    slots: Vec<usize>,
    fft: Arc<dyn Fft<f64>>,
    phase: Vec<Complex64>,
    step: Vec<Complex64>,
    t0: f64,
    dt: f64,
    index: usize,
    pub(crate) buf: Vec<Complex64>,
    scratch: Vec<Complex64>,
}

const RESYNC: usize = 32;

impl FlowGrid {
    pub(crate) fn new(u: &CoeffVector, grid: usize, t0: f64, dt: f64, inverse: bool) -> Self {
        let lambda = u.torus().lambda();
        let ks: Vec<i64> = u.support().collect();
        let amps: Vec<Complex64> = u.iter().map(|e| e.1).collect();
        let slots = ks.iter().map(|&k| k.rem_euclid(grid as i64) as usize).collect();
        let mut planner = FftPlanner::new();
        let fft = if inverse {
            planner.plan_fft_inverse(grid)
        } else {
            planner.plan_fft_forward(grid)
        };
        let step = ks.iter().map(|&k| turns(cubic_turns(k, lambda, dt))).collect();
        let scratch = vec![ZERO; fft.get_inplace_scratch_len()];
        let mut g = FlowGrid {
            lambda,
            ks,
            amps,
            slots,
            fft,
            phase: Vec::new(),
            step,
            t0,
            dt,
            index: 0,
            buf: vec![ZERO; grid],
            scratch,
        };
        g.resync();
        g
    }

    pub(crate) fn time(&self) -> f64 {
        self.t0 + self.index as f64 * self.dt
    }

    fn resync(&mut self) {
        let t = self.time();
        let lambda = self.lambda;
        self.phase = self.ks.iter().map(|&k| turns(cubic_turns(k, lambda, t))).collect();
    }

    /// Fills `buf` with `λ·u(t_i, λj/G)` and advances to `t_{i+1}`.
    pub(crate) fn next(&mut self) {
        self.buf.fill(ZERO);
        for ((&slot, &a), &ph) in self.slots.iter().zip(&self.amps).zip(&self.phase) {
            self.buf[slot] += a * ph;
        }
        self.fft.process_with_scratch(&mut self.buf, &mut self.scratch);
        self.index += 1;
        if self.index % RESYNC == 0 {
            self.resync();
        } else {
            for (ph, st) in self.phase.iter_mut().zip(&self.step) {
                *ph *= st;
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampledConfig {
    /// Equispaced times per shift.
    pub t_samples: usize,
    /// Independent random shifts.
    pub shifts: usize,
    pub seed: u64,
}

impl SampledConfig {
    pub fn new(t_samples: usize, seed: u64) -> Self {
        SampledConfig {
            t_samples,
            shifts: 8,
            seed,
        }
    }
}

/// Per-shift estimates of `‖u‖_{L^p(𝕋²)}^p`.
pub fn lp_sampled_shifts(u0: &CoeffVector, p: u32, cfg: &SampledConfig) -> Result<Vec<f64>> {
    require_unit_torus(u0)?;
    if p == 0 || p % 2 != 0 {
        return Err(LabError::invalid(format!("sampled norms need an even p, got {p}")));
    }
    if cfg.t_samples < 16 || cfg.shifts < 2 {
        return Err(LabError::invalid("sampled norms need t_samples ≥ 16 and shifts ≥ 2"));
    }
    if u0.is_empty() {
        return Ok(vec![0.0; cfg.shifts]);
    }
    let k = u0.max_abs_index() as u64;
    let grid = grid_above(p as u64 * k, "sampled x-grid")?;
    let mut rng = child_rng(cfg.seed, "lp_sampled");
    let shifts: Vec<f64> = (0..cfg.shifts).map(|_| rng.gen::<f64>()).collect();
    let n = cfg.t_samples;
    let half = (p / 2) as i32;
    Ok(shifts
        .par_iter()
        .map(|&sigma| {
            let dt = 1.0 / n as f64;
            let mut flow = FlowGrid::new(u0, grid, sigma * dt, dt, true);
            let mut acc = KahanSum::new();
            for _ in 0..n {
                flow.next();
                let row: f64 = flow.buf.iter().map(|z| z.norm_sqr().powi(half)).sum();
                acc.add(row / grid as f64);
            }
            acc.value() / n as f64
        })
        .collect())
}

/// `‖u‖_{L^p(𝕋²)}` with the x-integral exact on an alias-free grid and the
/// t-integral averaged over randomly shifted equispaced rules.
pub fn lp_sampled(u0: &CoeffVector, p: u32, t_samples: usize, seed: u64) -> Result<NormResult> {
    lp_sampled_with(u0, p, &SampledConfig::new(t_samples, seed))
}

pub fn lp_sampled_with(u0: &CoeffVector, p: u32, cfg: &SampledConfig) -> Result<NormResult> {
    let per_shift = lp_sampled_shifts(u0, p, cfg)?;
    Ok(power_estimate(&per_shift, p))
}

fn power_estimate(per_shift: &[f64], p: u32) -> NormResult {
    let (mean, se) = mean_stderr(per_shift);
    let value = mean.max(0.0).powf(1.0 / p as f64);
    let std_error = if mean > 0.0 {
        value * se / (p as f64 * mean)
    } else {
        0.0
    };
    NormResult {
        value,
        p,
        method: NormMethod::Sampled,
        std_error,
        power: mean.max(0.0),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BilinearMode {
    SemiAnalytic,
    Sampled(SampledConfig),
}

fn check_same_torus(ul: &CoeffVector, un: &CoeffVector) -> Result<TorusSpec> {
    if ul.torus() != un.torus() {
        return Err(LabError::invalid("bilinear factors live on different tori"));
    }
    Ok(ul.torus())
}

/// Checks that both factors are supported in their dyadic blocks.
pub fn check_blocks(ul: &CoeffVector, un: &CoeffVector, l: DyadicBlock, n: DyadicBlock) -> Result<()> {
    if !l.holds(ul) || !n.holds(un) {
        return Err(LabError::invalid(format!(
            "bilinear data not supported in the blocks L = {}, N = {}",
            l.scale(),
            n.scale()
        )));
    }
    Ok(())
}

/// `‖η(t)·u_L·u_N‖_{L⁴(ℝ×𝕋_λ)}`.
pub fn bilinear_l4(ul: &CoeffVector, un: &CoeffVector, eta: &EtaProfile, mode: BilinearMode) -> Result<NormResult> {
    check_same_torus(ul, un)?;
    match mode {
        BilinearMode::SemiAnalytic => {
            let power = bilinear_semi_analytic_power(ul, un, eta)?;
            Ok(NormResult::exact(power, 4, NormMethod::SemiAnalytic))
        }
        BilinearMode::Sampled(cfg) => {
            let per_shift = bilinear_sampled_shifts(ul, un, eta, &cfg)?;
            Ok(power_estimate(&per_shift, 4))
        }
    }
}

/// Cost of the semi-analytic mode before any slice is built.
pub fn semi_analytic_products(ul: &CoeffVector, un: &CoeffVector) -> u64 {
    let pairs = |m: usize| (m * (m + 1) / 2) as u64;
    pairs(ul.len()).saturating_mul(pairs(un.len()))
}

/// `‖η u_L u_N‖⁴ = λ⁻⁷ Σ_σ Σ_{C,C'} D_σ(C) conj D_σ(C') 𝓕(η⁴)((C'−C)/λ³)`,
/// where `D_σ` is the spectrum of `(u_L u_N)²` (unnormalized amplitudes) at
/// spatial numerator `σ`.
pub fn bilinear_semi_analytic_power(ul: &CoeffVector, un: &CoeffVector, eta: &EtaProfile) -> Result<f64> {
    let torus = check_same_torus(ul, un)?;
    if ul.is_empty() || un.is_empty() {
        return Ok(0.0);
    }
    let products = semi_analytic_products(ul, un);
    if products > SEMI_ANALYTIC_MAX_PRODUCTS {
        return Err(LabError::CostGuard {
            what: "semi-analytic bilinear convolution",
            size: products,
            limit: SEMI_ANALYTIC_MAX_PRODUCTS,
            alternative: "sampled mode",
        });
    }
    let pl = Sliced::second(ul);
    let pn = Sliced::second(un);
    let (llo, lhi) = pl.bounds().expect("nonempty");
    let (nlo, nhi) = pn.bounds().expect("nonempty");
    let l3 = (torus.lambda() as f64).powi(3);
    let window = (512.0 * l3).ceil() as i64;
    let f0 = eta.eta4_hat(0.0);
    // slices are built, summed and dropped one at a time; holding them all
    // costs 24 bytes per product
    let pair_count = AtomicU64::new(0);
    let parts: Vec<f64> = (llo + nlo..=lhi + nhi)
        .into_par_iter()
        .map(|s| {
            let mut map = FxHashMap::default();
            cross_slice(&pl, &pn, s, &mut map);
            let d = sorted_entries(map);
            let pairs = (d.len() as u64).pow(2);
            if pair_count.fetch_add(pairs, Ordering::Relaxed) + pairs > SEMI_ANALYTIC_MAX_PAIRS {
                return Err(LabError::CostGuard {
                    what: "semi-analytic bilinear pair sum",
                    size: SEMI_ANALYTIC_MAX_PAIRS + 1,
                    limit: SEMI_ANALYTIC_MAX_PAIRS,
                    alternative: "sampled mode",
                });
            }
            let mut acc = KahanSum::new();
            for (i, &(c, v)) in d.iter().enumerate() {
                acc.add(v.norm_sqr() * f0);
                for &(c2, v2) in &d[i + 1..] {
                    if c2 - c > window {
                        break;
                    }
                    let w = eta.eta4_hat((c2 - c) as f64 / l3);
                    acc.add(2.0 * (v * v2.conj()).re * w);
                }
            }
            Ok(acc.value())
        })
        .collect::<Result<_>>()?;
    let total = parts.into_iter().collect::<KahanSum>().value();
    Ok(total / (torus.lambda() as f64).powi(7))
}

/// Equispaced samples on `[−1, 1]` that make the sampled bilinear rule exact:
/// the `t`-bandwidth of `∫|u_L u_N|⁴dx` plus that of `η⁴`, doubled.
pub fn bilinear_t_exact(ul: &CoeffVector, un: &CoeffVector) -> u128 {
    let cube = |k: Option<i64>| k.map(|k| (k as i128).pow(3)).unwrap_or(0);
    let span = (cube(ul.max_index()) + cube(un.max_index())) - (cube(ul.min_index()) + cube(un.min_index()));
    let l3 = (ul.torus().lambda() as i128).pow(3);
    let band = (2 * span + l3 - 1) / l3 + 512;
    2 * band as u128 + 1
}

/// Spatial grid making `∫|u_L u_N|⁴ dx` exact.
pub(crate) fn bilinear_x_grid(ul: &CoeffVector, un: &CoeffVector) -> Result<usize> {
    let k = (ul.max_abs_index() + un.max_abs_index()) as u64;
    grid_above(4 * k, "bilinear x-grid")
}

/// Per-shift estimates of `‖η u_L u_N‖⁴` by the shifted trapezoid rule on
/// `[−1, 1]`.
pub fn bilinear_sampled_shifts(
    ul: &CoeffVector,
    un: &CoeffVector,
    eta: &EtaProfile,
    cfg: &SampledConfig,
) -> Result<Vec<f64>> {
    let torus = check_same_torus(ul, un)?;
    if cfg.t_samples < 16 || cfg.shifts < 2 {
        return Err(LabError::invalid("sampled norms need t_samples ≥ 16 and shifts ≥ 2"));
    }
    if ul.is_empty() || un.is_empty() {
        return Ok(vec![0.0; cfg.shifts]);
    }
    let grid = bilinear_x_grid(ul, un)?;
    let mut rng = child_rng(cfg.seed, "bilinear_sampled");
    let shifts: Vec<f64> = (0..cfg.shifts).map(|_| rng.gen::<f64>()).collect();
    let n = cfg.t_samples;
    let lambda = torus.lambda() as f64;
    // |u_L u_N|⁴ with both factors carrying an extra λ from the grid evaluation
    let scale = lambda / grid as f64 / lambda.powi(8);
    Ok(shifts
        .par_iter()
        .map(|&sigma| {
            let dt = 2.0 / n as f64;
            let t0 = -1.0 + sigma * dt;
            let mut fl = FlowGrid::new(ul, grid, t0, dt, true);
            let mut fnn = FlowGrid::new(un, grid, t0, dt, true);
            let mut acc = KahanSum::new();
            for _ in 0..n {
                let w = eta.eta(fl.time()).powi(4);
                if w == 0.0 {
                    fl.next();
                    fnn.next();
                    continue;
                }
                fl.next();
                fnn.next();
                let row: f64 = fl
                    .buf
                    .iter()
                    .zip(&fnn.buf)
                    .map(|(a, b)| (a.norm_sqr() * b.norm_sqr()).powi(2))
                    .sum();
                acc.add(w * row);
            }
            acc.value() * dt * scale
        })
        .collect())
}

/// `sup |η u_L u_N| ≤ λ⁻² Σ|a|·Σ|b|`.
pub fn bilinear_sup_bound(ul: &CoeffVector, un: &CoeffVector) -> f64 {
    let l1 = |u: &CoeffVector| u.iter().map(|e| e.1.norm()).sum::<f64>();
    l1(ul) * l1(un) / (ul.torus().lambda() as f64).powi(2)
}

/// Cauchy–Schwarz form of the sup bound for block data:
/// `2√(LN)·‖u_L‖₂‖u_N‖₂`.
pub fn block_sup_bound(l: DyadicBlock, n: DyadicBlock, ul: &CoeffVector, un: &CoeffVector) -> f64 {
    2.0 * ((l.scale() * n.scale()) as f64).sqrt() * ul.l2_norm() * un.l2_norm()
}

/// A space-time amplitude sampled row by row on `[−1, 1] × 𝕋_λ`.
pub trait AmplitudeField: Sync {
    fn torus(&self) -> TorusSpec;
    /// `|F(t, λj/nx)|` for `j < nx`.
    fn abs_row(&self, t: f64, nx: usize) -> Vec<f64>;
}

/// `B(t, x) = η(t)·u_L(t, x)·conj(u_N(t, x))`.
pub struct BilinearField<'a> {
    pub ul: &'a CoeffVector,
    pub un: &'a CoeffVector,
    pub eta: &'a EtaProfile,
}

impl AmplitudeField for BilinearField<'_> {
    fn torus(&self) -> TorusSpec {
        self.ul.torus()
    }

    fn abs_row(&self, t: f64, nx: usize) -> Vec<f64> {
        let e = self.eta.eta(t);
        if e == 0.0 {
            return vec![0.0; nx];
        }
        let mut a = FlowGrid::new(self.ul, nx, t, 0.0, true);
        let mut b = FlowGrid::new(self.un, nx, t, 0.0, true);
        a.next();
        b.next();
        let l2 = (self.torus().lambda() as f64).powi(2);
        a.buf.iter().zip(&b.buf).map(|(x, y)| e * x.norm() * y.norm() / l2).collect()
    }
}

pub struct ConstantField {
    pub value: f64,
    pub torus: TorusSpec,
}

impl AmplitudeField for ConstantField {
    fn torus(&self) -> TorusSpec {
        self.torus
    }

    fn abs_row(&self, _t: f64, nx: usize) -> Vec<f64> {
        vec![self.value.abs(); nx]
    }
}

/// Empirical distribution function `μ ↦ |{|F| ≥ μ}|` on `[−1, 1] × 𝕋_λ`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LevelSetTable {
    pub thresholds: Vec<f64>,
    pub measures: Vec<f64>,
    pub total_measure: f64,
    pub cell_measure: f64,
    pub sampled_sup: f64,
    /// `Σ |F|⁴` over cells, times the cell measure.
    pub sampled_l4_power: f64,
    pub grid: (usize, usize),
    /// Sorted `|F|` samples, one per cell.
    #[serde(skip)]
    pub samples: Vec<f64>,
}

pub const LEVEL_THRESHOLDS: usize = 256;

/// 64 geometric thresholds spanning `[sup/10³, sup]`.
pub fn geometric_thresholds(sup: f64) -> Vec<f64> {
    let lo = sup / 1e3;
    (0..LEVEL_THRESHOLDS)
        .map(|i| lo * 1e3f64.powf(i as f64 / (LEVEL_THRESHOLDS - 1) as f64))
        .collect()
}

impl LevelSetTable {
    /// `4∫μ³|E_μ|dμ` by the trapezoid rule in `log μ` over the thresholds,
    /// with the region below the first threshold bounded by `μ₀⁴·|E|`.
    pub fn layer_cake_l4(&self) -> f64 {
        let n = self.thresholds.len();
        if n == 0 {
            return 0.0;
        }
        let f = |i: usize| 4.0 * self.thresholds[i].powi(4) * self.measures[i];
        let mut acc = KahanSum::new();
        for i in 1..n {
            let h = (self.thresholds[i] / self.thresholds[i - 1]).ln();
            acc.add(0.5 * h * (f(i) + f(i - 1)));
        }
        let mu0 = self.thresholds[0];
        acc.add(mu0.powi(4) * 0.5 * (self.measures[0] + self.total_measure));
        acc.value()
    }

    /// `(∫₀^{μ₀} 4μ³|E_μ|dμ, ∫_{μ₀}^∞ 4μ³|E_μ|dμ)` from the samples, i.e.
    /// `(Σ min(|F|, μ₀)⁴, Σ (|F|⁴ − μ₀⁴)₊)` times the cell measure.
    pub fn split_at(&self, mu0: f64) -> (f64, f64) {
        let m4 = mu0.powi(4);
        let mut low = KahanSum::new();
        let mut high = KahanSum::new();
        for &v in &self.samples {
            let v4 = v.powi(4);
            low.add(v4.min(m4));
            high.add((v4 - m4).max(0.0));
        }
        (low.value() * self.cell_measure, high.value() * self.cell_measure)
    }

    /// `|E_μ|` counted directly from the samples.
    pub fn sample_measure_above(&self, mu: f64) -> f64 {
        let below = self.samples.partition_point(|&v| v < mu);
        (self.samples.len() - below) as f64 * self.cell_measure
    }

    /// `|E_μ|` at an arbitrary level, from the sorted samples' table.
    pub fn measure_above(&self, mu: f64) -> f64 {
        match self.thresholds.iter().position(|&t| t >= mu) {
            Some(i) => self.measures[i],
            None => 0.0,
        }
    }
}

/// Tabulates `|E_μ|` on a `T × X` midpoint grid of `[−1, 1] × 𝕋_λ`; with no
/// thresholds given, uses [`geometric_thresholds`] of the sampled sup.
pub fn superlevel_measure(
    field: &dyn AmplitudeField,
    grid: (usize, usize),
    thresholds: Option<&[f64]>,
) -> Result<LevelSetTable> {
    let (nt, nx) = grid;
    if nt < 64 || nx < 64 {
        return Err(LabError::invalid("level-set grids need at least 64 × 64 cells"));
    }
    let lambda = field.torus().lambda_f64();
    let dt = 2.0 / nt as f64;
    let rows: Vec<Vec<f64>> = (0..nt)
        .into_par_iter()
        .map(|i| field.abs_row(-1.0 + (i as f64 + 0.5) * dt, nx))
        .collect();
    let mut values: Vec<f64> = rows.into_iter().flatten().collect();
    let cell = dt * lambda / nx as f64;
    let l4 = values.iter().map(|v| v.powi(4)).collect::<KahanSum>().value() * cell;
    values.sort_unstable_by(|a, b| a.total_cmp(b));
    let sup = values.last().copied().unwrap_or(0.0);
    let thresholds = match thresholds {
        Some(t) => t.to_vec(),
        None => geometric_thresholds(sup),
    };
    let measures = thresholds
        .iter()
        .map(|&mu| {
            let below = values.partition_point(|&v| v < mu);
            (values.len() - below) as f64 * cell
        })
        .collect();
    Ok(LevelSetTable {
        thresholds,
        measures,
        total_measure: 2.0 * lambda,
        cell_measure: cell,
        sampled_sup: sup,
        sampled_l4_power: l4,
        grid,
        samples: values,
    })
}
