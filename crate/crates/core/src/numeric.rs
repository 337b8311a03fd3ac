//! Small numerical helpers shared by the engines: exact phase reduction,
//! compensated summation, and least-squares line fits.

use num_complex::Complex64;
use std::f64::consts::TAU;

/// Fractional part of `t * n`, in `[0, 1)`, computed without forming the
/// (possibly huge) floating product.
///
/// `t` is split as `m * 2^e` and `m * n` is reduced modulo `2^-e` in 128-bit
/// integers, so the result is exact up to the final conversion whenever
/// `|n| < 2^74`.
pub fn mul_frac(t: f64, n: i128) -> f64 {
    if n == 0 || t == 0.0 || !t.is_finite() {
        return 0.0;
    }
    let bits = t.to_bits();
    let sign: i128 = if bits >> 63 == 0 { 1 } else { -1 };
    let exp_bits = ((bits >> 52) & 0x7ff) as i32;
    let (mantissa, exp) = if exp_bits == 0 {
        ((bits & 0xf_ffff_ffff_ffff) as i128, -1074)
    } else {
        (((bits & 0xf_ffff_ffff_ffff) | 0x10_0000_0000_0000) as i128, exp_bits - 1075)
    };
    if exp >= 0 {
        return 0.0;
    }
    let shift = -exp;
    let bits_n = 128 - n.unsigned_abs().leading_zeros() as i32;
    if shift >= 126 || bits_n + 53 >= 126 {
        // Either t is tiny (the product is far below one turn) or n is out of
        // the exact range; plain arithmetic is the best available here.
        let v = t * n as f64;
        return v - v.floor();
    }
    let prod = sign * mantissa * n;
    let modulus: i128 = 1 << shift;
    let r = prod.rem_euclid(modulus);
    let v = r as f64 * (2.0f64).powi(exp);
    if v >= 1.0 {
        0.0
    } else {
        v
    }
}

/// `e^{2πi x}` after reducing `x` to `[-1/2, 1/2]`.
pub fn turns(x: f64) -> Complex64 {
    let r = x - x.round();
    let (s, c) = (TAU * r).sin_cos();
    Complex64::new(c, s)
}

/// Neumaier-compensated accumulator.
#[derive(Clone, Copy, Debug, Default)]
pub struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl FromIterator<f64> for KahanSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = KahanSum::new();
        for x in iter {
            acc.add(x);
        }
        acc
    }
}

/// Compensated accumulator for complex values.
#[derive(Clone, Copy, Debug, Default)]
pub struct KahanComplex {
    re: KahanSum,
    im: KahanSum,
}

impl KahanComplex {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, z: Complex64) {
        self.re.add(z.re);
        self.im.add(z.im);
    }

    pub fn value(&self) -> Complex64 {
        Complex64::new(self.re.value(), self.im.value())
    }
}

/// Ordinary least squares fit `y = slope * x + intercept`.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    /// Standard error of the slope from the residuals (0 for two points).
    pub slope_stderr: f64,
}

pub fn fit_line(xs: &[f64], ys: &[f64]) -> Option<LineFit> {
    let n = xs.len();
    if n < 2 || ys.len() != n {
        return None;
    }
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (y - slope * x - intercept).powi(2))
        .sum();
    let r2 = if syy == 0.0 { 1.0 } else { 1.0 - sse / syy };
    let slope_stderr = if n > 2 {
        (sse / (nf - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    Some(LineFit {
        slope,
        intercept,
        r2,
        slope_stderr,
    })
}

/// Two-sided 97.5% Student-t quantile, tabulated for small degrees of freedom.
pub fn student_t975(dof: usize) -> f64 {
    const TABLE: [f64; 10] = [
        12.706, 4.303, 3.182, 2.776, 2.571, 2.447, 2.365, 2.306, 2.262, 2.228,
    ];
    match dof {
        0 => f64::INFINITY,
        1..=10 => TABLE[dof - 1],
        11..=20 => 2.1,
        21..=40 => 2.03,
        _ => 1.96,
    }
}

/// Mean and standard error of the mean.
pub fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().copied().collect::<KahanSum>().value() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
    (mean, (var / n as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mul_frac_matches_exact_rationals() {
        assert_eq!(mul_frac(0.5, 3), 0.5);
        assert_eq!(mul_frac(0.125, 8), 0.0);
        assert_eq!(mul_frac(-0.25, 1), 0.75);
        assert_eq!(mul_frac(3.0, 12345), 0.0);
        // 2^-10 * (2^40 + 3) has fractional part 3/1024
        let n = (1i128 << 40) + 3;
        assert_eq!(mul_frac(1.0 / 1024.0, n), 3.0 / 1024.0);
    }

    #[test]
    fn mul_frac_large_products_stay_exact() {
        // t = 1/3 rounded; for n = 3 * 2^60 the naive product loses every bit.
        let t = 1.0 / 3.0;
        let n: i128 = 1_000_000_007i128.pow(2);
        let v = mul_frac(t, n);
        assert!((0.0..1.0).contains(&v));
        // cross-check with the identity frac(t * (a + b)) = frac(frac(ta) + frac(tb))
        let a: i128 = 1 << 55;
        let b = n - a;
        let w = (mul_frac(t, a) + mul_frac(t, b)).fract();
        assert!((v - w).abs() < 1e-12 || (v - w).abs() > 1.0 - 1e-12);
    }

    #[test]
    fn kahan_recovers_cancelled_digits() {
        let xs = [1e16, 1.0, -1e16, 1.0];
        let s: KahanSum = xs.iter().copied().collect();
        assert_eq!(s.value(), 2.0);
    }

    #[test]
    fn line_fit_exact_line() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        let ys = [3.0, 5.0, 7.0, 9.0];
        let fit = fit_line(&xs, &ys).unwrap();
        assert!((fit.slope - 2.0).abs() < 1e-12);
        assert!((fit.intercept - 1.0).abs() < 1e-12);
        assert!((fit.r2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn turns_is_unimodular() {
        for x in [0.0, 0.25, 1e9 + 0.5, -3.75] {
            assert!((turns(x).norm() - 1.0).abs() < 1e-15);
        }
        assert!((turns(0.25) - Complex64::new(0.0, 1.0)).norm() < 1e-15);
    }
}
