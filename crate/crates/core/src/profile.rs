//! Smooth cutoffs and their Fourier transforms.
//!
//! Every cutoff here is an interval indicator convolved with a rescaled copy
//! of the standard mollifier `ρ(r) ∝ exp(−1/(1−r²))` on `(−1, 1)`. Values come
//! from a tabulated CDF of `ρ`; transforms factor as the indicator's sinc times
//! `ρ̂`, which is tabulated once.
//!
//! Transforms use `f̂(ν) = ∫ f(t) e^{−2πiνt} dt`.

use crate::error::{LabError, Result};
use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use num_complex::Complex64;
use rustfft::FftPlanner;
use std::f64::consts::PI;
use std::io::{Read, Write};
use std::path::Path;
use std::sync::OnceLock;

/// Absolute accuracy the tables are checked against.
pub const TABLE_TOLERANCE: f64 = 1e-10;

const CDF_STEP: f64 = 1.0 / 2048.0;
const RHO_HAT_STEP: f64 = 1.0 / 256.0;
const RHO_HAT_MAX: f64 = 160.0;
const ETA4_STEP: f64 = 1.0 / 512.0;
const ETA4_MAX: f64 = 512.0;
const ETA_TILDE_MAX_T: f64 = 4.0;
const CACHE_VERSION: u32 = 1;

fn rho_unnormalized(r: f64) -> f64 {
    let d = 1.0 - r * r;
    if d <= 0.0 {
        0.0
    } else {
        (-1.0 / d).exp()
    }
}

fn rho_mass() -> f64 {
    static MASS: OnceLock<f64> = OnceLock::new();
    *MASS.get_or_init(|| {
        quadrature::double_exponential::integrate(rho_unnormalized, -1.0, 1.0, 1e-16).integral
    })
}

/// The standard mollifier, normalized to unit mass.
pub fn rho(r: f64) -> f64 {
    rho_unnormalized(r) / rho_mass()
}

/// Cubic Hermite interpolation on a uniform grid of `(value, derivative)`.
#[derive(Clone, Debug)]
struct HermiteTable {
    start: f64,
    step: f64,
    nodes: Vec<(f64, f64)>,
}

impl HermiteTable {
    fn end(&self) -> f64 {
        self.start + self.step * (self.nodes.len() - 1) as f64
    }

    fn eval(&self, x: f64) -> f64 {
        let u = (x - self.start) / self.step;
        let last = self.nodes.len() - 1;
        let i = (u.floor().max(0.0) as usize).min(last - 1);
        let s = u - i as f64;
        let (y0, d0) = self.nodes[i];
        let (y1, d1) = self.nodes[i + 1];
        let h = self.step;
        let s2 = s * s;
        let s3 = s2 * s;
        (2.0 * s3 - 3.0 * s2 + 1.0) * y0
            + (s3 - 2.0 * s2 + s) * h * d0
            + (-2.0 * s3 + 3.0 * s2) * y1
            + (s3 - s2) * h * d1
    }
}

fn cdf_table() -> &'static HermiteTable {
    static TABLE: OnceLock<HermiteTable> = OnceLock::new();
    TABLE.get_or_init(|| {
        let n = (2.0 / CDF_STEP).round() as usize;
        let mut nodes = Vec::with_capacity(n + 1);
        let mut acc = 0.0;
        nodes.push((0.0, 0.0));
        for j in 1..=n {
            let a = -1.0 + (j - 1) as f64 * CDF_STEP;
            let b = -1.0 + j as f64 * CDF_STEP;
            acc += quadrature::double_exponential::integrate(rho, a, b, 1e-18).integral;
            nodes.push((acc, rho(b)));
        }
        // Pin the midpoint to exactly 1/2; the reflection in `rho_cdf` then
        // makes every cutoff exactly even.
        let scale = 0.5 / nodes[n / 2].0;
        for node in &mut nodes {
            node.0 *= scale;
            node.1 *= scale;
        }
        HermiteTable {
            start: -1.0,
            step: CDF_STEP,
            nodes,
        }
    })
}

/// `∫_{−1}^{y} ρ`.
pub fn rho_cdf(y: f64) -> f64 {
    if y <= -1.0 {
        0.0
    } else if y >= 1.0 {
        1.0
    } else if y > 0.0 {
        1.0 - cdf_table().eval(-y)
    } else {
        cdf_table().eval(y)
    }
}

/// Adaptive double-exponential quadrature over `[a, b]`, split at `breaks`
/// and further into panels no wider than `max_width`.
pub fn integrate_panels(f: impl Fn(f64) -> f64, a: f64, b: f64, breaks: &[f64], max_width: f64) -> f64 {
    let mut cuts = vec![a];
    cuts.extend(breaks.iter().copied().filter(|&c| a < c && c < b));
    cuts.push(b);
    let mut total = 0.0;
    for w in cuts.windows(2) {
        let n = ((w[1] - w[0]) / max_width).ceil().max(1.0) as usize;
        let step = (w[1] - w[0]) / n as f64;
        for i in 0..n {
            let lo = w[0] + i as f64 * step;
            total += quadrature::double_exponential::integrate(&f, lo, lo + step, 1e-15).integral;
        }
    }
    total
}

/// Direct quadrature of `ρ̂(ω) = 2∫₀¹ ρ(r) cos(2πωr) dr`.
pub fn rho_hat_quadrature(omega: f64) -> f64 {
    let width = 0.5 / omega.abs().max(1.0);
    2.0 * integrate_panels(|r| rho(r) * (2.0 * PI * omega * r).cos(), 0.0, 1.0, &[], width)
}

/// Transform of an even function sampled at `t_j = j·h`, `|j| ≤ half`, by the
/// trapezoid rule on a zero-padded FFT of length `size`. Returns `(f̂, f̂′)` at
/// `ν_m = m/(size·h)` for `0 ≤ m ≤ keep`.
///
/// The odd companion `2πt·f(t)` rides in the same real input: its transform
/// is purely imaginary and equals `i·f̂′`.
fn even_transform(f: impl Fn(f64) -> f64, h: f64, half: usize, size: usize, keep: usize) -> Vec<(f64, f64)> {
    let mut buf = vec![Complex64::new(0.0, 0.0); size];
    for j in 0..=half {
        let t = j as f64 * h;
        let v = f(t);
        let odd = 2.0 * PI * t * v;
        buf[j] += Complex64::new(v + odd, 0.0);
        if j > 0 {
            buf[size - j] += Complex64::new(v - odd, 0.0);
        }
    }
    let fft = FftPlanner::new().plan_fft_forward(size);
    fft.process(&mut buf);
    buf[..=keep].iter().map(|z| (z.re * h, z.im * h)).collect()
}

/// Tabulated `ρ̂` on `[0, 160]`, value and derivative, with cubic Hermite
/// interpolation. `ρ̂` is even and below `1e−17` past the table.
#[derive(Clone, Debug)]
pub struct RhoHatTable {
    table: HermiteTable,
}

impl RhoHatTable {
    pub fn build() -> Self {
        let h = 1.0 / 2048.0;
        let size = (1.0 / (RHO_HAT_STEP * h)).round() as usize;
        let keep = (RHO_HAT_MAX / RHO_HAT_STEP).round() as usize;
        let nodes = even_transform(rho, h, 2048, size, keep);
        RhoHatTable {
            table: HermiteTable {
                start: 0.0,
                step: RHO_HAT_STEP,
                nodes,
            },
        }
    }

    pub fn step(&self) -> f64 {
        self.table.step
    }

    pub fn len(&self) -> usize {
        self.table.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.nodes.is_empty()
    }

    pub fn eval(&self, omega: f64) -> f64 {
        let w = omega.abs();
        if w > self.table.end() {
            0.0
        } else {
            self.table.eval(w)
        }
    }

    /// Binary layout, little-endian: `u32` version, `f64` tolerance, `f64`
    /// step, `u64` length, then interleaved value/derivative pairs.
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_u32::<LittleEndian>(CACHE_VERSION)?;
        w.write_f64::<LittleEndian>(TABLE_TOLERANCE)?;
        w.write_f64::<LittleEndian>(self.table.step)?;
        w.write_u64::<LittleEndian>(self.table.nodes.len() as u64)?;
        for &(v, d) in &self.table.nodes {
            w.write_f64::<LittleEndian>(v)?;
            w.write_f64::<LittleEndian>(d)?;
        }
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let version = r.read_u32::<LittleEndian>()?;
        let tol = r.read_f64::<LittleEndian>()?;
        let step = r.read_f64::<LittleEndian>()?;
        let len = r.read_u64::<LittleEndian>()? as usize;
        if version != CACHE_VERSION || tol != TABLE_TOLERANCE || step != RHO_HAT_STEP {
            return Err(LabError::invalid(format!(
                "cache header mismatch (version {version}, tolerance {tol}, step {step})"
            )));
        }
        if len < 2 || len > 1 << 24 {
            return Err(LabError::invalid(format!("cache length {len} out of range")));
        }
        let mut nodes = Vec::with_capacity(len);
        for _ in 0..len {
            let v = r.read_f64::<LittleEndian>()?;
            let d = r.read_f64::<LittleEndian>()?;
            nodes.push((v, d));
        }
        Ok(RhoHatTable {
            table: HermiteTable {
                start: 0.0,
                step,
                nodes,
            },
        })
    }

    /// Reads the cache at `path`, rebuilding and rewriting it when missing or
    /// keyed to a different tolerance or layout.
    pub fn load_or_build(path: &Path) -> Result<Self> {
        if let Ok(file) = std::fs::File::open(path) {
            if let Ok(t) = Self::read_from(std::io::BufReader::new(file)) {
                return Ok(t);
            }
        }
        let t = Self::build();
        let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
        std::fs::create_dir_all(dir)?;
        let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
        t.write_to(std::io::BufWriter::new(tmp.as_file_mut()))?;
        tmp.persist(path).map_err(|e| LabError::Io(e.error))?;
        Ok(t)
    }
}

pub fn rho_hat_table() -> &'static RhoHatTable {
    static TABLE: OnceLock<RhoHatTable> = OnceLock::new();
    TABLE.get_or_init(RhoHatTable::build)
}

/// `1_{[lo, hi]} * ρ_r` with `ρ_r(t) = ρ(t/r)/r`: equal to one on
/// `[lo + r, hi − r]` and supported in `[lo − r, hi + r]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MollifiedPlateau {
    pub lo: f64,
    pub hi: f64,
    pub radius: f64,
}

impl MollifiedPlateau {
    pub fn value(&self, t: f64) -> f64 {
        let r = self.radius;
        let a = 0.5 * (self.hi - self.lo);
        let d = (t - 0.5 * (self.lo + self.hi)).abs();
        (rho_cdf((d + a) / r) - rho_cdf((d - a) / r)).max(0.0)
    }

    pub fn support(&self) -> (f64, f64) {
        (self.lo - self.radius, self.hi + self.radius)
    }

    pub fn plateau(&self) -> (f64, f64) {
        (self.lo + self.radius, self.hi - self.radius)
    }

    /// `f̂(ν) = e^{−2πiνc} sin(πνw)/(πν) · ρ̂(rν)` with centre `c` and width `w`.
    pub fn fourier(&self, nu: f64) -> Complex64 {
        let c = 0.5 * (self.lo + self.hi);
        let w = self.hi - self.lo;
        let sinc = if nu == 0.0 {
            w
        } else {
            (PI * nu * w).sin() / (PI * nu)
        };
        let mag = sinc * rho_hat_table().eval(self.radius * nu);
        Complex64::from_polar(mag, -2.0 * PI * nu * c)
    }

    pub fn descriptor(&self) -> String {
        format!(
            "mollified-plateau(lo={},hi={},radius={})",
            self.lo, self.hi, self.radius
        )
    }
}

/// The time cutoff: one on `[−1/2, 1/2]`, supported in `[−1, 1]`.
pub const ETA: MollifiedPlateau = MollifiedPlateau {
    lo: -0.75,
    hi: 0.75,
    radius: 0.25,
};

/// The arc bump: one on `[1/100, 2/100]`, supported in `[0, 3/100]`.
pub const PHI: MollifiedPlateau = MollifiedPlateau {
    lo: 0.005,
    hi: 0.025,
    radius: 0.005,
};

pub fn eta(t: f64) -> f64 {
    ETA.value(t)
}

/// Tabulated transforms tied to `η`: `𝓕(η⁴)` and `η̃ = 𝓕⁻¹|η̂|`.
#[derive(Clone, Debug)]
pub struct EtaProfile {
    eta4_hat: HermiteTable,
    eta_tilde: HermiteTable,
}

impl EtaProfile {
    fn build() -> Self {
        // η⁴ sampled at h = 1/2048 on [−1, 1]; aliases sit beyond ν = 1536.
        let h = 1.0 / 2048.0;
        let size = (1.0 / (ETA4_STEP * h)).round() as usize;
        let keep = (ETA4_MAX / ETA4_STEP).round() as usize;
        let eta4_hat = HermiteTable {
            start: 0.0,
            step: ETA4_STEP,
            nodes: even_transform(|t| eta(t).powi(4), h, 2048, size, keep),
        };

        // |η̂| has kinks at the zeros of sin(3πτ/2), i.e. τ ∈ (2/3)Z; the
        // step 1/384 puts every kink on a node.
        let ht = 1.0 / 384.0;
        let tau_max = 4.0 * RHO_HAT_MAX;
        let half = (tau_max / ht).round() as usize;
        let size = 1 << 20;
        let dt = 1.0 / (size as f64 * ht);
        let keep = (ETA_TILDE_MAX_T / dt).ceil() as usize;
        let eta_tilde = HermiteTable {
            start: 0.0,
            step: dt,
            nodes: even_transform(|tau| ETA.fourier(tau).re.abs(), ht, half, size, keep),
        };
        EtaProfile {
            eta4_hat,
            eta_tilde,
        }
    }

    pub fn global() -> &'static EtaProfile {
        static PROFILE: OnceLock<EtaProfile> = OnceLock::new();
        PROFILE.get_or_init(EtaProfile::build)
    }

    pub fn eta(&self, t: f64) -> f64 {
        eta(t)
    }

    /// `𝓕(η⁴)(ν)`, real and even; zero past `|ν| = 512`.
    pub fn eta4_hat(&self, nu: f64) -> f64 {
        let v = nu.abs();
        if v > self.eta4_hat.end() {
            0.0
        } else {
            self.eta4_hat.eval(v)
        }
    }

    /// `∫ η⁴`.
    pub fn eta4_integral(&self) -> f64 {
        self.eta4_hat.nodes[0].0
    }

    /// `η̃(t) = ∫ |η̂(τ)| e^{2πiτt} dτ` for `|t| ≤ 4`, zero beyond. The kinks
    /// of `|η̂|` limit this to second-order accuracy (about `1e−6`).
    pub fn eta_tilde(&self, t: f64) -> f64 {
        let a = t.abs();
        if a > self.eta_tilde.end() {
            0.0
        } else {
            self.eta_tilde.eval(a)
        }
    }

    pub fn descriptor(&self) -> String {
        format!("eta={}", ETA.descriptor())
    }
}

/// Independent evaluation of `𝓕(η⁴)(ν)` by adaptive quadrature.
pub fn eta4_hat_quadrature(nu: f64) -> f64 {
    let width = 0.25 / nu.abs().max(1.0);
    2.0 * integrate_panels(|t| eta(t).powi(4) * (2.0 * PI * nu * t).cos(), 0.0, 1.0, &[0.5], width)
}
