//! Batch execution: per-command JSON configs, a worker pool sized by the
//! shard count, CSV artifacts written atomically with a manifest sidecar.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use num_complex::Complex64;
use rand::Rng;
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use crate::arithmetic::{self, KernelGrid, KernelSpec, WeylSweepConfig};
use crate::bilinear::{self, DataKind, ScanConfig};
use crate::counterexample;
use crate::error::{LabError, Result};
use crate::extremizer::{self, AscentConfig};
use crate::lattice::{self, CoeffVector, DyadicBlock, TorusSpec};
use crate::norm::{self, NormResult, SampledConfig};
use crate::profile::{EtaProfile, PHI, TABLE_TOLERANCE};
use crate::rng::child_rng;
use crate::scaling;

pub const TOOL_NAME: &str = "strichartz";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Largest `N` whose m-set histograms go into the counterexample fixture.
pub const FIXTURE_MAX_N: u64 = 32;

fn default_eps() -> f64 {
    0.05
}

#[derive(Clone, Debug, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct NormConfig {
    /// Coefficient vector file (JSON).
    pub input: PathBuf,
    #[serde(default = "NormConfig::default_p")]
    pub p: u32,
    /// `exact`, `sampled`, or `auto`.
    #[serde(default = "NormConfig::default_method")]
    pub method: String,
    #[serde(default = "NormConfig::default_t")]
    pub t_samples: usize,
}

impl NormConfig {
    fn default_p() -> u32 {
        8
    }
    fn default_method() -> String {
        "auto".into()
    }
    fn default_t() -> usize {
        4096
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct CounterexampleConfig {
    #[serde(default = "CounterexampleConfig::default_ns")]
    pub ns: Vec<u64>,
}

impl CounterexampleConfig {
    fn default_ns() -> Vec<u64> {
        vec![1, 2, 4, 8, 16, 32, 64]
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct McountConfig {
    #[serde(default = "McountConfig::default_ns")]
    pub ns: Vec<i64>,
}

impl McountConfig {
    fn default_ns() -> Vec<i64> {
        vec![8, 16, 32, 64]
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct WeylConfig {
    #[serde(default = "WeylConfig::default_ps")]
    pub ps: Vec<u64>,
    #[serde(default = "default_eps")]
    pub eps: f64,
    #[serde(default = "WeylConfig::default_samples")]
    pub samples_per_scale: usize,
    #[serde(default = "WeylConfig::default_max_scale")]
    pub max_scale: u64,
}

impl WeylConfig {
    fn default_ps() -> Vec<u64> {
        vec![64, 256, 1024]
    }
    fn default_samples() -> usize {
        64
    }
    fn default_max_scale() -> u64 {
        1 << 10
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct KernelCell {
    pub l: u64,
    pub n: u64,
    pub lambda: u32,
}

#[derive(Clone, Debug, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct MajorarcConfig {
    #[serde(default = "MajorarcConfig::default_scales")]
    pub scales: Vec<u64>,
    /// Largest `γ` in the bound-shape table, as a multiple of `Q²`.
    #[serde(default = "MajorarcConfig::default_gamma")]
    pub gamma_factor: i64,
    #[serde(default = "default_eps")]
    pub eps: f64,
    #[serde(default)]
    pub kernels: Vec<KernelCell>,
}

impl MajorarcConfig {
    fn default_scales() -> Vec<u64> {
        vec![4, 8, 16, 32]
    }
    fn default_gamma() -> i64 {
        8
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct ScanRunConfig {
    #[serde(default = "ScanRunConfig::default_ls")]
    pub ls: Vec<u64>,
    #[serde(default = "ScanRunConfig::default_ns")]
    pub ns: Vec<u64>,
    #[serde(default = "ScanRunConfig::default_lambdas")]
    pub lambdas: Vec<u32>,
    /// `flat`, `random`, or `extremized`.
    #[serde(default = "ScanRunConfig::default_data")]
    pub data: Vec<String>,
    /// Number of seed streams for `random` data.
    #[serde(default = "ScanRunConfig::default_random")]
    pub random_streams: u32,
    #[serde(default = "default_eps")]
    pub eps: f64,
    #[serde(default = "ScanRunConfig::default_t")]
    pub t_samples: usize,
    #[serde(default)]
    pub force_sampled: bool,
}

impl ScanRunConfig {
    fn default_ls() -> Vec<u64> {
        vec![1, 2, 4]
    }
    fn default_ns() -> Vec<u64> {
        vec![4, 8, 16, 32, 64]
    }
    fn default_lambdas() -> Vec<u32> {
        vec![1, 4, 16]
    }
    fn default_data() -> Vec<String> {
        vec!["flat".into()]
    }
    fn default_random() -> u32 {
        5
    }
    fn default_t() -> usize {
        2048
    }

    fn kinds(&self) -> Result<Vec<DataKind>> {
        let mut kinds = Vec::new();
        for d in &self.data {
            match d.as_str() {
                "flat" => kinds.push(DataKind::Flat),
                "random" => kinds.extend((0..self.random_streams).map(DataKind::Random)),
                "extremized" => kinds.push(DataKind::Extremized),
                other => {
                    return Err(LabError::Config {
                        path: "data".into(),
                        message: format!("unknown data kind `{other}`"),
                    })
                }
            }
        }
        Ok(kinds)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct LevelsetConfig {
    #[serde(default = "LevelsetConfig::default_cells")]
    pub cells: Vec<KernelCell>,
    #[serde(default = "LevelsetConfig::default_data")]
    pub data: String,
    #[serde(default = "LevelsetConfig::default_grid")]
    pub grid: (usize, usize),
    #[serde(default = "default_eps")]
    pub eps: f64,
}

impl LevelsetConfig {
    fn default_cells() -> Vec<KernelCell> {
        vec![
            KernelCell { l: 1, n: 4, lambda: 1 },
            KernelCell { l: 2, n: 8, lambda: 2 },
        ]
    }
    fn default_data() -> String {
        "flat".into()
    }
    fn default_grid() -> (usize, usize) {
        (512, 512)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct ExtremizeConfig {
    #[serde(default = "ExtremizeConfig::default_ns")]
    pub ns: Vec<u64>,
    #[serde(default = "ExtremizeConfig::default_ps")]
    pub ps: Vec<u32>,
    #[serde(default = "ExtremizeConfig::default_restarts")]
    pub restarts: usize,
    #[serde(default = "ExtremizeConfig::default_iters")]
    pub max_iters: usize,
    #[serde(default = "ExtremizeConfig::default_tol")]
    pub tolerance: f64,
    #[serde(default = "ExtremizeConfig::default_t")]
    pub t_samples: usize,
}

impl ExtremizeConfig {
    fn default_ns() -> Vec<u64> {
        vec![4, 8]
    }
    fn default_ps() -> Vec<u32> {
        vec![4, 8]
    }
    fn default_restarts() -> usize {
        4
    }
    fn default_iters() -> usize {
        200
    }
    fn default_tol() -> f64 {
        1e-8
    }
    fn default_t() -> usize {
        1024
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct ScalingConfig {
    #[serde(default = "ScalingConfig::default_s")]
    pub s: f64,
    #[serde(default = "ScalingConfig::default_lambdas")]
    pub lambdas: Vec<u32>,
    /// Initial data on `𝕋`; the default is `cos(2πx) + cos(4πx)/2`.
    #[serde(default)]
    pub input: Option<PathBuf>,
}

impl ScalingConfig {
    fn default_s() -> f64 {
        0.75
    }
    fn default_lambdas() -> Vec<u32> {
        (0..=8).map(|e| 1 << e).collect()
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct IdentitiesConfig {
    #[serde(default = "IdentitiesConfig::default_samples")]
    pub samples: usize,
    #[serde(default = "IdentitiesConfig::default_range")]
    pub range: i64,
}

impl IdentitiesConfig {
    fn default_samples() -> usize {
        200
    }
    fn default_range() -> i64 {
        1 << 12
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub enum Command {
    Norm(NormConfig),
    Counterexample(CounterexampleConfig),
    Mcount(McountConfig),
    Weyl(WeylConfig),
    Majorarc(MajorarcConfig),
    Scan(ScanRunConfig),
    Levelset(LevelsetConfig),
    Extremize(ExtremizeConfig),
    Scaling(ScalingConfig),
    Identities(IdentitiesConfig),
}

pub const COMMANDS: [&str; 10] = [
    "norm",
    "counterexample",
    "mcount",
    "weyl",
    "majorarc",
    "scan",
    "levelset",
    "extremize",
    "scaling",
    "identities",
];

fn parse_config<T: serde::de::DeserializeOwned>(text: &str) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| LabError::Config {
        path: e.path().to_string(),
        message: e.inner().to_string(),
    })
}

fn schema_of<T: JsonSchema>() -> serde_json::Value {
    serde_json::to_value(schemars::schema_for!(T)).expect("schemas serialize")
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Norm(_) => "norm",
            Command::Counterexample(_) => "counterexample",
            Command::Mcount(_) => "mcount",
            Command::Weyl(_) => "weyl",
            Command::Majorarc(_) => "majorarc",
            Command::Scan(_) => "scan",
            Command::Levelset(_) => "levelset",
            Command::Extremize(_) => "extremize",
            Command::Scaling(_) => "scaling",
            Command::Identities(_) => "identities",
        }
    }

    /// Parses the JSON config of `name`; `{}` gives the defaults.
    pub fn from_json(name: &str, text: &str) -> Result<Self> {
        Ok(match name {
            "norm" => Command::Norm(parse_config(text)?),
            "counterexample" => Command::Counterexample(parse_config(text)?),
            "mcount" => Command::Mcount(parse_config(text)?),
            "weyl" => Command::Weyl(parse_config(text)?),
            "majorarc" => Command::Majorarc(parse_config(text)?),
            "scan" => Command::Scan(parse_config(text)?),
            "levelset" => Command::Levelset(parse_config(text)?),
            "extremize" => Command::Extremize(parse_config(text)?),
            "scaling" => Command::Scaling(parse_config(text)?),
            "identities" => Command::Identities(parse_config(text)?),
            other => {
                return Err(LabError::Config {
                    path: ".".into(),
                    message: format!("unknown command `{other}`"),
                })
            }
        })
    }

    pub fn schema(name: &str) -> Result<serde_json::Value> {
        Ok(match name {
            "norm" => schema_of::<NormConfig>(),
            "counterexample" => schema_of::<CounterexampleConfig>(),
            "mcount" => schema_of::<McountConfig>(),
            "weyl" => schema_of::<WeylConfig>(),
            "majorarc" => schema_of::<MajorarcConfig>(),
            "scan" => schema_of::<ScanRunConfig>(),
            "levelset" => schema_of::<LevelsetConfig>(),
            "extremize" => schema_of::<ExtremizeConfig>(),
            "scaling" => schema_of::<ScalingConfig>(),
            "identities" => schema_of::<IdentitiesConfig>(),
            other => return Err(LabError::invalid(format!("unknown command `{other}`"))),
        })
    }

    fn config_value(&self) -> serde_json::Value {
        let v = match self {
            Command::Norm(c) => serde_json::to_value(c),
            Command::Counterexample(c) => serde_json::to_value(c),
            Command::Mcount(c) => serde_json::to_value(c),
            Command::Weyl(c) => serde_json::to_value(c),
            Command::Majorarc(c) => serde_json::to_value(c),
            Command::Scan(c) => serde_json::to_value(c),
            Command::Levelset(c) => serde_json::to_value(c),
            Command::Extremize(c) => serde_json::to_value(c),
            Command::Scaling(c) => serde_json::to_value(c),
            Command::Identities(c) => serde_json::to_value(c),
        };
        v.expect("configs serialize")
    }
}

/// `"a..b"` lists the powers of two in `[a, b]`; otherwise a comma list.
pub fn parse_list(s: &str) -> Result<Vec<u64>> {
    let bad = |m: String| LabError::Config {
        path: "list".into(),
        message: m,
    };
    if let Some((a, b)) = s.split_once("..") {
        let a: u64 = a.trim().parse().map_err(|_| bad(format!("bad range start in `{s}`")))?;
        let b: u64 = b.trim().parse().map_err(|_| bad(format!("bad range end in `{s}`")))?;
        if a == 0 || a > b {
            return Err(bad(format!("empty range `{s}`")));
        }
        let mut v = Vec::new();
        let mut x = a.next_power_of_two();
        while x <= b {
            v.push(x);
            x *= 2;
        }
        Ok(v)
    } else {
        s.split(',')
            .map(|t| t.trim().parse().map_err(|_| bad(format!("bad entry `{t}` in `{s}`"))))
            .collect()
    }
}

#[derive(Clone, Debug)]
pub struct RunOptions {
    pub seed: u64,
    pub shards: usize,
    pub out: PathBuf,
    /// Leave wall time out of the manifest so reruns are byte-identical.
    pub no_timing: bool,
    pub argv: Vec<String>,
}

impl RunOptions {
    pub fn new(out: impl Into<PathBuf>) -> Self {
        Self {
            seed: 0,
            shards: 1,
            out: out.into(),
            no_timing: false,
            argv: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub argv: Vec<String>,
    pub config: serde_json::Value,
    pub seed: u64,
    pub shards: usize,
    pub wall_seconds: Option<f64>,
    pub guards: BTreeMap<String, u64>,
    pub profiles: BTreeMap<String, String>,
    pub artifacts: Vec<String>,
    pub skipped: usize,
}

impl RunManifest {
    pub fn sidecar(artifact: &Path) -> PathBuf {
        let mut s = artifact.as_os_str().to_owned();
        s.push(".manifest.json");
        PathBuf::from(s)
    }

    pub fn read(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}

fn guard_limits() -> BTreeMap<String, u64> {
    [
        ("exact_p8_max_support", norm::EXACT_P8_MAX_SUPPORT as u64),
        ("exact_p6_max_support", norm::EXACT_P6_MAX_SUPPORT as u64),
        ("semi_analytic_max_pairs", norm::SEMI_ANALYTIC_MAX_PAIRS),
        ("semi_analytic_max_products", norm::SEMI_ANALYTIC_MAX_PRODUCTS),
        ("max_grid", norm::MAX_GRID as u64),
        ("mset_max_n", counterexample::MSET_MAX_N as u64),
        ("grouped_max_n", counterexample::GROUPED_MAX_N),
        ("max_arc_scale", arithmetic::MAX_ARC_SCALE),
        ("max_arc_pairs", arithmetic::MAX_ARC_PAIRS),
        ("max_weyl_length", arithmetic::MAX_WEYL_LENGTH),
        ("max_kernel_frequency", arithmetic::MAX_KERNEL_FREQUENCY),
        ("gradient_max_support", extremizer::GRADIENT_MAX_SUPPORT as u64),
        ("quintic_max_support", scaling::QUINTIC_MAX_SUPPORT as u64),
        ("max_frequency", lattice::MAX_FREQUENCY as u64),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v))
    .collect()
}

fn profiles() -> BTreeMap<String, String> {
    [
        ("eta".to_string(), EtaProfile::global().descriptor()),
        ("phi".to_string(), PHI.descriptor()),
        ("table_tolerance".to_string(), format!("{TABLE_TOLERANCE:e}")),
    ]
    .into_iter()
    .collect()
}

/// A CSV table with a fixed header.
#[derive(Clone, Debug, Default)]
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn new(header: &[&'static str]) -> Self {
        Self {
            header: header.to_vec(),
            rows: Vec::new(),
        }
    }

    fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header).map_err(csv_err)?;
        for r in &self.rows {
            w.write_record(r).map_err(csv_err)?;
        }
        w.into_inner().map_err(|e| LabError::invalid(e.to_string()))
    }
}

fn csv_err(e: csv::Error) -> LabError {
    LabError::invalid(format!("csv: {e}"))
}

/// 17 significant digits.
pub fn fmt_f(x: f64) -> String {
    format!("{x:.16e}")
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_f).unwrap_or_default()
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
        _ => PathBuf::from("."),
    };
    std::fs::create_dir_all(&dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(&dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| LabError::Io(e.error))?;
    Ok(())
}

/// `out.csv` → `out.<tag>.csv`.
pub fn companion_path(out: &Path, tag: &str) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let ext = out.extension().map(|s| s.to_string_lossy().into_owned());
    let name = match ext {
        Some(e) => format!("{stem}.{tag}.{e}"),
        None => format!("{stem}.{tag}"),
    };
    out.with_file_name(name)
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub artifacts: Vec<PathBuf>,
    pub skipped: usize,
    pub manifest: RunManifest,
}

struct Output {
    tables: Vec<(String, Table)>,
    json: Vec<(String, String)>,
    skipped: usize,
}

impl Output {
    fn single(t: Table) -> Self {
        Self {
            tables: vec![(String::new(), t)],
            json: Vec::new(),
            skipped: 0,
        }
    }
}

/// Runs `cmd` on a pool of `opts.shards` workers and writes its artifacts.
pub fn run(cmd: &Command, opts: &RunOptions) -> Result<RunOutcome> {
    if opts.shards == 0 {
        return Err(LabError::Config {
            path: "shards".into(),
            message: "shard count must be positive".into(),
        });
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.shards)
        .build()
        .map_err(|e| LabError::invalid(e.to_string()))?;
    let start = Instant::now();
    let output = pool.install(|| execute(cmd, opts.seed))?;
    let wall = start.elapsed().as_secs_f64();

    let mut paths = Vec::new();
    let mut payloads = Vec::new();
    for (tag, table) in &output.tables {
        let p = if tag.is_empty() { opts.out.clone() } else { companion_path(&opts.out, tag) };
        payloads.push((p.clone(), table.to_csv()?));
        paths.push(p);
    }
    for (tag, text) in &output.json {
        let p = companion_path(&opts.out.with_extension("json"), tag);
        payloads.push((p.clone(), text.clone().into_bytes()));
        paths.push(p);
    }
    let manifest = RunManifest {
        tool: TOOL_NAME.into(),
        version: TOOL_VERSION.into(),
        command: cmd.name().into(),
        argv: opts.argv.clone(),
        config: cmd.config_value(),
        seed: opts.seed,
        shards: opts.shards,
        wall_seconds: (!opts.no_timing).then_some(wall),
        guards: guard_limits(),
        profiles: profiles(),
        artifacts: paths
            .iter()
            .map(|p| p.file_name().map(|f| f.to_string_lossy().into_owned()).unwrap_or_default())
            .collect(),
        skipped: output.skipped,
    };
    let manifest_text = serde_json::to_string_pretty(&manifest)?;
    for (p, bytes) in payloads {
        write_atomic(&p, &bytes)?;
        write_atomic(&RunManifest::sidecar(&p), manifest_text.as_bytes())?;
    }
    Ok(RunOutcome {
        artifacts: paths,
        skipped: output.skipped,
        manifest,
    })
}

fn norm_row(t: &mut Table, label: &str, r: &NormResult) {
    t.push(vec![
        label.to_string(),
        r.p.to_string(),
        r.method.as_str().to_string(),
        fmt_f(r.value),
        fmt_f(r.power()),
        fmt_f(r.power_std_error()),
    ]);
}

fn default_scaling_data() -> CoeffVector {
    let h = Complex64::new(0.5, 0.0);
    let q = Complex64::new(0.25, 0.0);
    CoeffVector::from_entries(TorusSpec::UNIT, [(-2, q), (-1, h), (1, h), (2, q)]).expect("small indices")
}

fn read_coeffs(path: &Path) -> Result<CoeffVector> {
    let text = std::fs::read_to_string(path)?;
    CoeffVector::from_json(&text)
}

fn execute(cmd: &Command, seed: u64) -> Result<Output> {
    match cmd {
        Command::Norm(c) => {
            let u = read_coeffs(&c.input)?;
            let exact = || norm::lp_exact_torus(&u, c.p);
            let sampled = || norm::lp_sampled_with(&u, c.p, &SampledConfig::new(c.t_samples, seed));
            let r = match c.method.as_str() {
                "exact" => exact()?,
                "sampled" => sampled()?,
                "auto" => match exact() {
                    Ok(r) => r,
                    Err(e) if e.is_guard() || matches!(e, LabError::Invalid(_)) => sampled()?,
                    Err(e) => return Err(e),
                },
                other => {
                    return Err(LabError::Config {
                        path: "method".into(),
                        message: format!("unknown method `{other}`"),
                    })
                }
            };
            let mut t = Table::new(&["input", "p", "method", "value", "power", "power_stderr"]);
            norm_row(&mut t, &c.input.display().to_string(), &r);
            Ok(Output::single(t))
        }
        Command::Counterexample(c) => {
            let sweep = counterexample::l8_ratio_sweep(&c.ns)?;
            let mut t = Table::new(&["N", "l8_eighth_power", "ratio", "fit_slope", "fit_r2"]);
            for row in &sweep.rows {
                t.push(vec![
                    row.n.to_string(),
                    fmt_f(row.l8_eighth_power),
                    fmt_f(row.ratio),
                    fmt_opt(sweep.fit.map(|f| f.slope)),
                    fmt_opt(sweep.fit.map(|f| f.r2)),
                ]);
            }
            let mut fixture = Vec::new();
            for &n in c.ns.iter().filter(|&&n| (8..=FIXTURE_MAX_N).contains(&n)) {
                let n = n as i64;
                for xi4 in 0..=n / 8 {
                    fixture.push(counterexample::m_set_histogram(n, xi4)?);
                }
            }
            let mut out = Output::single(t);
            out.json.push(("mset".into(), serde_json::to_string_pretty(&fixture)?));
            Ok(out)
        }
        Command::Mcount(c) => {
            let mut t = Table::new(&["N", "xi4", "alpha", "count", "ratio"]);
            for &n in &c.ns {
                for cell in counterexample::m_set_law_cells(n)? {
                    t.push(vec![
                        cell.n.to_string(),
                        cell.xi4.to_string(),
                        cell.alpha.to_string(),
                        cell.count.to_string(),
                        fmt_f(cell.ratio),
                    ]);
                }
            }
            Ok(Output::single(t))
        }
        Command::Weyl(c) => {
            let mut t = Table::new(&["p", "a", "q", "t", "a2", "a1", "a0", "modulus", "ratio", "max_ratio"]);
            for &p in &c.ps {
                let cfg = WeylSweepConfig {
                    epsilon: c.eps,
                    samples_per_scale: c.samples_per_scale,
                    max_scale: c.max_scale,
                    seed,
                };
                let rep = arithmetic::weyl_bound_ratio(p, &cfg)?;
                for s in &rep.samples {
                    t.push(vec![
                        p.to_string(),
                        s.a.to_string(),
                        s.q.to_string(),
                        fmt_f(s.t),
                        fmt_f(s.a2),
                        fmt_f(s.a1),
                        fmt_f(s.a0),
                        fmt_f(s.modulus),
                        fmt_f(s.ratio),
                        fmt_f(rep.max_ratio),
                    ]);
                }
            }
            Ok(Output::single(t))
        }
        Command::Majorarc(c) => {
            let mut t = Table::new(&[
                "Q",
                "pairs",
                "totient_sum",
                "support_overlaps",
                "radius_overlaps",
                "fourier_zero",
                "l2_norm_sq",
                "parseval_partial",
                "bound_max_ratio",
            ]);
            for &q in &c.scales {
                let sys = arithmetic::farey_pairs(q)?;
                let gmax = c.gamma_factor * (q * q) as i64;
                let tab = arithmetic::fourier_bound_table(&sys, gmax, c.eps);
                let mx = tab.iter().map(|r| r.ratio).fold(0.0, f64::max);
                t.push(vec![
                    q.to_string(),
                    sys.len().to_string(),
                    fmt_f(arithmetic::totient_sum(q)?),
                    sys.support_overlaps().to_string(),
                    sys.radius_overlaps().to_string(),
                    fmt_f(sys.phi_fourier_zero()),
                    fmt_f(sys.l2_norm_sq()),
                    fmt_f(sys.parseval_partial(gmax)),
                    fmt_f(mx),
                ]);
            }
            let mut out = Output::single(t);
            if !c.kernels.is_empty() {
                let mut k = Table::new(&["L", "N", "lambda", "Q", "sup", "normalized", "argmax_t", "argmax_x"]);
                for cell in &c.kernels {
                    let spec = KernelSpec::new(cell.l, cell.n, TorusSpec::new(cell.lambda)?)?;
                    let sys = arithmetic::farey_pairs(spec.major_arc_scale())?;
                    match arithmetic::kernel_k1_sup(&spec, &sys, &KernelGrid::default(), c.eps) {
                        Ok(s) => k.push(vec![
                            cell.l.to_string(),
                            cell.n.to_string(),
                            cell.lambda.to_string(),
                            s.scale.to_string(),
                            fmt_f(s.sup),
                            fmt_f(s.normalized),
                            fmt_f(s.argmax_t),
                            fmt_f(s.argmax_x),
                        ]),
                        Err(e) if e.is_guard() => out.skipped += 1,
                        Err(e) => return Err(e),
                    }
                }
                out.tables.push(("kernel".into(), k));
            }
            Ok(out)
        }
        Command::Scan(c) => {
            let cfg = ScanConfig {
                ls: c.ls.clone(),
                ns: c.ns.clone(),
                lambdas: c.lambdas.clone(),
                kinds: c.kinds()?,
                eps: c.eps,
                seed,
                t_samples: c.t_samples,
                shifts: 8,
                force_sampled: c.force_sampled,
            };
            let rep = bilinear::scan(&cfg)?;
            let mut t = Table::new(&[
                "L", "N", "lambda", "kind", "lhs4", "rhs", "ratio", "stderr", "method", "skipped",
            ]);
            let mut skipped = 0;
            for cell in &rep.cells {
                skipped += cell.skipped.is_some() as usize;
                t.push(vec![
                    cell.l.to_string(),
                    cell.n.to_string(),
                    cell.lambda.to_string(),
                    cell.kind.label(),
                    fmt_opt(cell.lhs.map(|r| r.power())),
                    fmt_f(cell.rhs),
                    fmt_opt(cell.ratio),
                    fmt_opt(cell.lhs.map(|r| r.power_std_error())),
                    cell.lhs.map(|r| r.method.as_str().to_string()).unwrap_or_default(),
                    cell.skipped.clone().unwrap_or_default(),
                ]);
            }
            let mut out = Output::single(t);
            out.skipped = skipped;
            Ok(out)
        }
        Command::Levelset(c) => {
            let kind = match c.data.as_str() {
                "flat" => DataKind::Flat,
                "random" => DataKind::Random(0),
                "extremized" => DataKind::Extremized,
                other => {
                    return Err(LabError::Config {
                        path: "data".into(),
                        message: format!("unknown data kind `{other}`"),
                    })
                }
            };
            let mut summary = Table::new(&[
                "L",
                "N",
                "lambda",
                "kind",
                "sampled_sup",
                "literal_bound",
                "block_bound",
                "measure_above_literal",
                "measure_above_block",
                "layer_cake",
                "direct",
                "reference",
                "layer_cake_rel_err",
                "mu0",
                "split_low",
                "split_high",
                "branch_one_max",
                "branch_two_max",
            ]);
            let mut table = Table::new(&["L", "N", "lambda", "mu", "measure"]);
            for cell in &c.cells {
                let torus = TorusSpec::new(cell.lambda)?;
                let (l, n) = (DyadicBlock::new(cell.l)?, DyadicBlock::new(cell.n)?);
                let (ul, un) = bilinear::cell_data(l, n, torus, kind, seed)?;
                let r = bilinear::levelset_chain_check(&ul, &un, l, n, c.grid, c.eps)?;
                summary.push(vec![
                    cell.l.to_string(),
                    cell.n.to_string(),
                    cell.lambda.to_string(),
                    kind.label(),
                    fmt_f(r.sampled_sup),
                    fmt_f(r.literal_bound),
                    fmt_f(r.block_bound),
                    fmt_f(r.measure_above_literal),
                    fmt_f(r.measure_above_block),
                    fmt_f(r.layer_cake),
                    fmt_f(r.direct),
                    fmt_opt(r.reference),
                    fmt_f(r.layer_cake_rel_err),
                    fmt_f(r.mu0),
                    fmt_f(r.split_low),
                    fmt_f(r.split_high),
                    fmt_f(r.branch_one_max),
                    fmt_f(r.branch_two_max),
                ]);
                for (mu, m) in r.table.thresholds.iter().zip(&r.table.measures) {
                    table.push(vec![
                        cell.l.to_string(),
                        cell.n.to_string(),
                        cell.lambda.to_string(),
                        fmt_f(*mu),
                        fmt_f(*m),
                    ]);
                }
            }
            let mut out = Output::single(summary);
            out.tables.push(("table".into(), table));
            Ok(out)
        }
        Command::Extremize(c) => {
            let mut t = Table::new(&["N", "p", "best_ratio", "best_power", "iters", "restarts", "seed", "best_start", "monotone"]);
            let mut dump = BTreeMap::new();
            for &p in &c.ps {
                for &n in &c.ns {
                    let cfg = AscentConfig {
                        restarts: c.restarts,
                        max_iters: c.max_iters,
                        tolerance: c.tolerance,
                        seed,
                        t_samples: c.t_samples,
                    };
                    let r = extremizer::ascend(n, p, &cfg)?;
                    let iters: usize = r.traces.iter().map(|x| x.iters).sum();
                    t.push(vec![
                        n.to_string(),
                        p.to_string(),
                        fmt_f(r.best_ratio),
                        fmt_f(r.best_power),
                        iters.to_string(),
                        r.traces.len().to_string(),
                        seed.to_string(),
                        r.traces[r.best_restart].label.clone(),
                        r.traces.iter().all(|x| x.is_monotone()).to_string(),
                    ]);
                    dump.insert(format!("N={n},p={p}"), r.best);
                }
            }
            let mut out = Output::single(t);
            out.json.push(("best".into(), serde_json::to_string_pretty(&dump)?));
            Ok(out)
        }
        Command::Scaling(c) => {
            let u0 = match &c.input {
                Some(p) => read_coeffs(p)?,
                None => default_scaling_data(),
            };
            let rows = scaling::smallness_check(&u0, c.s, &c.lambdas)?;
            let mut t = Table::new(&[
                "lambda",
                "N",
                "l2_ratio",
                "hamiltonian",
                "derivative_sq",
                "ratio",
                "hs_norm",
                "h1_ratio",
            ]);
            let base = u0.l2_norm();
            for r in rows {
                t.push(vec![
                    r.lambda.to_string(),
                    fmt_f(r.n),
                    fmt_f(r.l2_norm / base),
                    fmt_f(r.hamiltonian),
                    fmt_f(r.derivative_sq),
                    fmt_f(r.ratio),
                    fmt_f(r.hs_norm),
                    fmt_f(r.h1_ratio),
                ]);
            }
            Ok(Output::single(t))
        }
        Command::Identities(c) => {
            let mut rng = child_rng(seed, "identities");
            let mut t = Table::new(&["identity", "inputs", "residual", "scale"]);
            let r = c.range;
            for _ in 0..c.samples {
                let x: [i64; 4] = std::array::from_fn(|_| rng.gen_range(-r..=r));
                let ok = lattice::cubic_identity_check(x[0], x[1], x[2], x[3]);
                t.push(vec![
                    "cubic".into(),
                    format!("{} {} {} {}", x[0], x[1], x[2], x[3]),
                    if ok { "0" } else { "1" }.into(),
                    String::new(),
                ]);
            }
            for _ in 0..c.samples {
                let tau: f64 = rng.gen_range(-1e4..1e4);
                let xi = rng.gen_range(1..=r) as f64 * if rng.gen::<bool>() { 1.0 } else { -1.0 };
                let roots = lattice::resonance_roots(tau, xi)?;
                let x1: f64 = rng.gen_range(-(r as f64)..r as f64);
                let direct = lattice::resonance_function(tau, xi, x1);
                let fact = roots.factored(x1);
                let mut inputs = String::new();
                let _ = write!(inputs, "{} {} {}", fmt_f(tau), fmt_f(xi), fmt_f(x1));
                t.push(vec![
                    "resonance".into(),
                    inputs,
                    fmt_f((fact.re - direct).abs().max(fact.im.abs())),
                    fmt_f(direct.abs().max(1.0)),
                ]);
            }
            let small = (r as f64).sqrt().max(1.0) as i64;
            for _ in 0..c.samples {
                let x1 = rng.gen_range(-r..=r);
                let x4 = rng.gen_range(-r..=r);
                let x2 = rng.gen_range(-small..=small);
                let x3 = rng.gen_range(-small..=small);
                let x5 = -(x1 + x2 + x3 + x4);
                let xis = [x1, x2, x3, x4, x5].map(|v| v as f64);
                let res = scaling::five_tuple_identity_check([0.0; 5], xis)?;
                t.push(vec![
                    "five-tuple".into(),
                    format!("{x1} {x2} {x3} {x4} {x5}"),
                    fmt_f(res.residual),
                    fmt_f(res.scale),
                ]);
            }
            Ok(Output::single(t))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lists() {
        assert_eq!(parse_list("1..256").unwrap(), vec![1, 2, 4, 8, 16, 32, 64, 128, 256]);
        assert_eq!(parse_list("4..64").unwrap(), vec![4, 8, 16, 32, 64]);
        assert_eq!(parse_list("1,4,16").unwrap(), vec![1, 4, 16]);
        assert!(parse_list("8..4").is_err());
        assert!(parse_list("x").is_err());
    }

    #[test]
    fn unknown_fields_report_their_path() {
        let e = Command::from_json("scan", r#"{"ls": [1], "lamda": [2]}"#).unwrap_err();
        match e {
            LabError::Config { path, .. } => assert_eq!(path, "lamda"),
            other => panic!("{other:?}"),
        }
        let e = Command::from_json("weyl", r#"{"ps": ["x"]}"#).unwrap_err();
        match e {
            LabError::Config { path, .. } => assert_eq!(path, "ps[0]"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn defaults_parse_and_schemas_exist() {
        for name in COMMANDS {
            if name != "norm" {
                Command::from_json(name, "{}").unwrap();
            }
            assert!(Command::schema(name).unwrap().is_object());
        }
    }

    #[test]
    fn companion_names() {
        assert_eq!(companion_path(Path::new("a/b.csv"), "kernel"), PathBuf::from("a/b.kernel.csv"));
        assert_eq!(
            RunManifest::sidecar(Path::new("a/b.csv")),
            PathBuf::from("a/b.csv.manifest.json")
        );
    }
}
