//! Sweeps of the bilinear L⁴ estimate over dyadic blocks and torus sizes,
//! and the level-set chain behind it.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::lattice::{CoeffVector, DyadicBlock, TorusSpec};
use crate::norm::{
    bilinear_l4, block_sup_bound, check_blocks, superlevel_measure, BilinearField, BilinearMode,
    LevelSetTable, NormResult, SampledConfig,
};
use crate::profile::EtaProfile;
use crate::rng::child_rng;

pub const DEFAULT_EPSILON: f64 = 0.05;

/// `(1/λ + 1/N²) L^{3/4+ε} N^{3/4+ε} + min{N^{−(1−ε)}, 1/λ + 1/N²} L N`.
pub fn rhs_theorem2(l: u64, n: u64, lambda: u32, eps: f64) -> Result<f64> {
    if l == 0 || lambda == 0 {
        return Err(LabError::domain("rhs needs L ≥ 1 and λ ≥ 1"));
    }
    if n < l {
        return Err(LabError::domain(format!("rhs needs N ≥ L, got L = {l}, N = {n}")));
    }
    let (lf, nf) = (l as f64, n as f64);
    let small = 1.0 / lambda as f64 + 1.0 / (nf * nf);
    let e = 0.75 + eps;
    Ok(small * lf.powf(e) * nf.powf(e) + nf.powf(-(1.0 - eps)).min(small) * lf * nf)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DataKind {
    Flat,
    /// Complex Gaussian amplitudes; the index selects the seed stream.
    Random(u32),
    Extremized,
}

impl DataKind {
    pub fn label(&self) -> String {
        match self {
            DataKind::Flat => "flat".into(),
            DataKind::Random(i) => format!("random-{i}"),
            DataKind::Extremized => "extremized".into(),
        }
    }
}

/// Unit-mass complex Gaussian data on a block.
pub fn random_block(block: DyadicBlock, torus: TorusSpec, seed: u64, stream: &str) -> Result<CoeffVector> {
    let mut rng = child_rng(seed, stream);
    let entries: Vec<(i64, Complex64)> = block
        .indices(torus)
        .into_iter()
        .map(|k| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            (k, Complex64::new(re, im))
        })
        .collect();
    CoeffVector::from_entries(torus, entries)?
        .normalized()
        .ok_or_else(|| LabError::invalid("random block drew the zero vector"))
}

/// Unit-mass data for one cell.
pub fn cell_data(
    l: DyadicBlock,
    n: DyadicBlock,
    torus: TorusSpec,
    kind: DataKind,
    seed: u64,
) -> Result<(CoeffVector, CoeffVector)> {
    match kind {
        DataKind::Flat => Ok((l.flat_unit(torus)?, n.flat_unit(torus)?)),
        DataKind::Random(i) => {
            let tag = format!("scan/{i}/{}/{}/{}", l.scale(), n.scale(), torus.lambda());
            Ok((
                random_block(l, torus, seed, &format!("{tag}/low"))?,
                random_block(n, torus, seed, &format!("{tag}/high"))?,
            ))
        }
        DataKind::Extremized => {
            let tag = format!("scan/extremized/{}/{}/{}", l.scale(), n.scale(), torus.lambda());
            crate::extremizer::bilinear_block_extremizer(l, n, torus, seed, &tag)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanCell {
    pub l: u64,
    pub n: u64,
    pub lambda: u32,
    pub kind: DataKind,
    pub lhs: Option<NormResult>,
    pub rhs: f64,
    /// `lhs⁴ / rhs`.
    pub ratio: Option<f64>,
    pub skipped: Option<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ScanConfig {
    pub ls: Vec<u64>,
    pub ns: Vec<u64>,
    pub lambdas: Vec<u32>,
    pub kinds: Vec<DataKind>,
    pub eps: f64,
    pub seed: u64,
    /// Time samples per shift when a cell falls back to the sampled rule.
    pub t_samples: usize,
    pub shifts: usize,
    /// Use the sampled rule even where the semi-analytic sum is affordable.
    pub force_sampled: bool,
}

impl Default for ScanConfig {
    fn default() -> Self {
        Self {
            ls: vec![1, 2, 4],
            ns: vec![4, 8, 16, 32, 64],
            lambdas: vec![1, 4, 16],
            kinds: vec![DataKind::Flat],
            eps: DEFAULT_EPSILON,
            seed: 0,
            t_samples: 2048,
            shifts: 8,
            force_sampled: false,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ScanReport {
    pub cells: Vec<ScanCell>,
    /// Largest ratio over the evaluated cells.
    pub max_ratio: f64,
    pub argmax: Option<usize>,
}

/// Semi-analytic where the guards allow it, otherwise the shifted sampled
/// rule.
pub fn cell_norm(ul: &CoeffVector, un: &CoeffVector, cfg: &ScanConfig) -> Result<NormResult> {
    let eta = EtaProfile::global();
    if !cfg.force_sampled {
        match bilinear_l4(ul, un, eta, BilinearMode::SemiAnalytic) {
            Err(e) if e.is_guard() => {}
            other => return other,
        }
    }
    let sampled = SampledConfig {
        t_samples: cfg.t_samples,
        shifts: cfg.shifts,
        seed: cfg.seed,
    };
    bilinear_l4(ul, un, eta, BilinearMode::Sampled(sampled))
}

pub fn scan_cell(l: u64, n: u64, lambda: u32, kind: DataKind, cfg: &ScanConfig) -> Result<ScanCell> {
    let rhs = rhs_theorem2(l, n, lambda, cfg.eps)?;
    let torus = TorusSpec::new(lambda)?;
    let (bl, bn) = (DyadicBlock::new(l)?, DyadicBlock::new(n)?);
    let mut cell = ScanCell {
        l,
        n,
        lambda,
        kind,
        lhs: None,
        rhs,
        ratio: None,
        skipped: None,
    };
    let outcome = cell_data(bl, bn, torus, kind, cfg.seed).and_then(|(ul, un)| {
        check_blocks(&ul, &un, bl, bn)?;
        cell_norm(&ul, &un, cfg)
    });
    match outcome {
        Ok(lhs) => {
            cell.ratio = Some(lhs.power() / rhs);
            cell.lhs = Some(lhs);
        }
        Err(e) if e.is_guard() || matches!(e, LabError::Domain(_)) => cell.skipped = Some(e.to_string()),
        Err(e) => return Err(e),
    }
    Ok(cell)
}

/// Every cell with `L ≤ N`, ordered by `(L, N, λ, kind)` as listed in the
/// configuration.
pub fn scan(cfg: &ScanConfig) -> Result<ScanReport> {
    let mut cells = Vec::new();
    for &l in &cfg.ls {
        for &n in cfg.ns.iter().filter(|&&n| n >= l) {
            for &lambda in &cfg.lambdas {
                for &kind in &cfg.kinds {
                    cells.push(scan_cell(l, n, lambda, kind, cfg)?);
                }
            }
        }
    }
    let mut max_ratio = 0.0;
    let mut argmax = None;
    for (i, c) in cells.iter().enumerate() {
        if let Some(r) = c.ratio {
            if r > max_ratio {
                max_ratio = r;
                argmax = Some(i);
            }
        }
    }
    Ok(ScanReport {
        cells,
        max_ratio,
        argmax,
    })
}

/// Relative slack for the emptiness checks; the bounds are attained at
/// `x = t = 0` by flat data, where rounding can exceed them by an ulp.
pub const SUP_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LevelSetReport {
    pub l: u64,
    pub n: u64,
    pub lambda: u32,
    pub eps: f64,
    pub grid: (usize, usize),
    pub sampled_sup: f64,
    /// `√(LN)` for unit masses.
    pub literal_bound: f64,
    /// `2√(LN)‖u_L‖‖u_N‖`, the Cauchy–Schwarz bound.
    pub block_bound: f64,
    pub measure_above_literal: f64,
    pub measure_above_block: f64,
    pub layer_cake: f64,
    pub direct: f64,
    /// Semi-analytic `‖B‖⁴` where affordable.
    pub reference: Option<f64>,
    /// `|layer_cake − reference| / reference`, or against `direct` when no
    /// reference is available.
    pub layer_cake_rel_err: f64,
    pub mu0: f64,
    pub split_low: f64,
    pub split_high: f64,
    /// `max_μ μ²|E_μ| / (L^{3/4+ε}N^{3/4+ε}|E_μ| + N^{−(1−ε)})`.
    pub branch_one_max: f64,
    /// `max_μ μ²|E_μ| / (1/λ + 1/N²)`.
    pub branch_two_max: f64,
    pub table: LevelSetTable,
}

/// Level sets of `B = η u_L conj(u_N)`: emptiness above the sup bounds, the
/// layer-cake reconstruction of `‖B‖₄⁴`, its split at
/// `μ₀ = L^{3/8+ε}N^{3/8+ε}`, and the two branches of the interpolated
/// distribution bound.
pub fn levelset_chain_check(
    ul: &CoeffVector,
    un: &CoeffVector,
    l: DyadicBlock,
    n: DyadicBlock,
    grid: (usize, usize),
    eps: f64,
) -> Result<LevelSetReport> {
    check_blocks(ul, un, l, n)?;
    if n.scale() < l.scale() {
        return Err(LabError::domain("level-set chain needs N ≥ L"));
    }
    let eta = EtaProfile::global();
    let field = BilinearField { ul, un, eta };
    let table = superlevel_measure(&field, grid, None)?;
    let torus = ul.torus();
    let (lf, nf) = (l.scale() as f64, n.scale() as f64);
    let literal_bound = (lf * nf).sqrt();
    let block_bound = block_sup_bound(l, n, ul, un);
    let reference = match bilinear_l4(ul, un, eta, BilinearMode::SemiAnalytic) {
        Ok(r) => Some(r.power()),
        Err(e) if e.is_guard() => None,
        Err(e) => return Err(e),
    };
    let layer_cake = table.layer_cake_l4();
    let direct = table.sampled_l4_power;
    let base = reference.unwrap_or(direct);
    let mu0 = (lf * nf).powf(0.375 + eps);
    let (split_low, split_high) = table.split_at(mu0);

    let e = 0.75 + eps;
    let small = 1.0 / torus.lambda_f64() + 1.0 / (nf * nf);
    let mut branch_one_max: f64 = 0.0;
    let mut branch_two_max: f64 = 0.0;
    for (&mu, &m) in table.thresholds.iter().zip(&table.measures) {
        let lhs = mu * mu * m;
        let one = lf.powf(e) * nf.powf(e) * m + nf.powf(-(1.0 - eps));
        branch_one_max = branch_one_max.max(lhs / one);
        branch_two_max = branch_two_max.max(lhs / small);
    }
    Ok(LevelSetReport {
        l: l.scale(),
        n: n.scale(),
        lambda: torus.lambda(),
        eps,
        grid,
        sampled_sup: table.sampled_sup,
        literal_bound,
        block_bound,
        measure_above_literal: table.sample_measure_above(literal_bound * (1.0 + SUP_TOLERANCE)),
        measure_above_block: table.sample_measure_above(block_bound * (1.0 + SUP_TOLERANCE)),
        layer_cake,
        direct,
        reference,
        layer_cake_rel_err: (layer_cake - base).abs() / base,
        mu0,
        split_low,
        split_high,
        branch_one_max,
        branch_two_max,
        table,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rhs_unit_cell() {
        assert!((rhs_theorem2(1, 1, 1, 0.0).unwrap() - 3.0).abs() < 1e-15);
        assert!(rhs_theorem2(4, 2, 1, 0.05).is_err());
    }

    #[test]
    fn rhs_nonincreasing_in_lambda() {
        for (l, n) in [(1, 1), (1, 8), (4, 16), (32, 32)] {
            let mut prev = f64::INFINITY;
            for lambda in 1..=64 {
                let r = rhs_theorem2(l, n, lambda, 0.05).unwrap();
                assert!(r <= prev);
                prev = r;
            }
        }
    }

    #[test]
    fn random_blocks_have_unit_mass() {
        let torus = TorusSpec::new(3).unwrap();
        let b = DyadicBlock::new(4).unwrap();
        let u = random_block(b, torus, 7, "x").unwrap();
        assert!((u.mass() - 1.0).abs() < 1e-12);
        assert!(b.holds(&u));
        assert_eq!(u, random_block(b, torus, 7, "x").unwrap());
        assert_ne!(u, random_block(b, torus, 8, "x").unwrap());
    }
}
