use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use serde_json::{json, Map, Value};
use strichartz_core::runner::{self, Command, RunOptions};
use strichartz_core::LabError;

const EXIT_CONFIG: u8 = 2;
const EXIT_SKIPPED: u8 = 3;

#[derive(Parser, Debug)]
#[command(name = "strichartz", version, about = "Periodic Airy Strichartz laboratory")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Debug)]
struct Global {
    /// Root seed for every random stream.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads.
    #[arg(long, global = true, default_value_t = 1)]
    shards: usize,
    /// Primary CSV artifact.
    #[arg(long, global = true, default_value = "out.csv")]
    out: PathBuf,
    #[arg(long, global = true)]
    eps: Option<f64>,
    /// JSON config; flags override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Exit with status 3 when any cell was skipped by a cost guard.
    #[arg(long, global = true)]
    strict: bool,
    /// Omit wall time from the manifest.
    #[arg(long, global = true)]
    no_timing: bool,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// One Lp norm of a coefficient file.
    Norm {
        #[arg(long = "in")]
        input: Option<PathBuf>,
        #[arg(long)]
        p: Option<u32>,
        /// exact, sampled, or auto.
        #[arg(long)]
        method: Option<String>,
        #[arg(long)]
        t_samples: Option<usize>,
    },
    /// L8 ratio sweep of the counterexample family.
    Counterexample {
        #[arg(long = "N")]
        n: Option<String>,
    },
    /// M-set counts against the square-root law.
    Mcount {
        #[arg(long = "N")]
        n: Option<String>,
    },
    /// Weyl sum bound ratios.
    Weyl {
        #[arg(long)]
        p: Option<String>,
        #[arg(long)]
        samples: Option<usize>,
    },
    /// Farey arcs, bump transform and kernel sup.
    Majorarc {
        #[arg(long = "Q")]
        q: Option<String>,
    },
    /// Bilinear estimate scan.
    Scan {
        #[arg(long = "L")]
        l: Option<String>,
        #[arg(long = "N")]
        n: Option<String>,
        #[arg(long)]
        lambda: Option<String>,
        /// Comma list of flat, random, extremized.
        #[arg(long)]
        data: Option<String>,
        #[arg(long)]
        random_streams: Option<u32>,
        #[arg(long)]
        t_samples: Option<usize>,
        #[arg(long)]
        force_sampled: bool,
    },
    /// Level-set chain for one cell.
    Levelset {
        #[arg(long = "L")]
        l: Option<u64>,
        #[arg(long = "N")]
        n: Option<u64>,
        #[arg(long)]
        lambda: Option<u32>,
        #[arg(long)]
        data: Option<String>,
        #[arg(long)]
        grid: Option<usize>,
    },
    /// Gradient ascent for the Lp extremizer.
    Extremize {
        #[arg(long = "N")]
        n: Option<String>,
        #[arg(long)]
        p: Option<String>,
        #[arg(long)]
        restarts: Option<usize>,
        #[arg(long)]
        max_iters: Option<usize>,
    },
    /// I-method smallness under rescaling.
    Scaling {
        #[arg(long)]
        s: Option<f64>,
        #[arg(long)]
        lambda: Option<String>,
        #[arg(long = "in")]
        input: Option<PathBuf>,
    },
    /// Randomized algebraic identity checks.
    Identities {
        #[arg(long)]
        samples: Option<usize>,
    },
    /// Print the JSON schema of a command's config.
    Schema { command: String },
}

fn list(s: &str) -> anyhow::Result<Value> {
    Ok(json!(runner::parse_list(s)?))
}

fn set(map: &mut Map<String, Value>, key: &str, v: Option<Value>) {
    if let Some(v) = v {
        map.insert(key.to_string(), v);
    }
}

fn overrides(cmd: &Cmd, map: &mut Map<String, Value>) -> anyhow::Result<()> {
    let l = |s: &Option<String>| s.as_deref().map(list).transpose();
    match cmd {
        Cmd::Norm { input, p, method, t_samples } => {
            set(map, "input", input.as_ref().map(|v| json!(v)));
            set(map, "p", p.map(|v| json!(v)));
            set(map, "method", method.as_ref().map(|v| json!(v)));
            set(map, "t_samples", t_samples.map(|v| json!(v)));
        }
        Cmd::Counterexample { n } | Cmd::Mcount { n } => set(map, "ns", l(n)?),
        Cmd::Weyl { p, samples } => {
            set(map, "ps", l(p)?);
            set(map, "samples_per_scale", samples.map(|v| json!(v)));
        }
        Cmd::Majorarc { q } => set(map, "scales", l(q)?),
        Cmd::Scan { l: ls, n, lambda, data, random_streams, t_samples, force_sampled } => {
            set(map, "ls", l(ls)?);
            set(map, "ns", l(n)?);
            set(map, "lambdas", l(lambda)?);
            set(
                map,
                "data",
                data.as_ref().map(|d| json!(d.split(',').map(str::trim).collect::<Vec<_>>())),
            );
            set(map, "random_streams", random_streams.map(|v| json!(v)));
            set(map, "t_samples", t_samples.map(|v| json!(v)));
            if *force_sampled {
                map.insert("force_sampled".into(), json!(true));
            }
        }
        Cmd::Levelset { l: lv, n, lambda, data, grid } => {
            if lv.is_some() || n.is_some() || lambda.is_some() {
                let cell = json!({
                    "l": lv.unwrap_or(1),
                    "n": n.unwrap_or(4),
                    "lambda": lambda.unwrap_or(1),
                });
                map.insert("cells".into(), json!([cell]));
            }
            set(map, "data", data.as_ref().map(|v| json!(v)));
            set(map, "grid", grid.map(|g| json!([g, g])));
        }
        Cmd::Extremize { n, p, restarts, max_iters } => {
            set(map, "ns", l(n)?);
            set(map, "ps", l(p)?);
            set(map, "restarts", restarts.map(|v| json!(v)));
            set(map, "max_iters", max_iters.map(|v| json!(v)));
        }
        Cmd::Scaling { s, lambda, input } => {
            set(map, "s", s.map(|v| json!(v)));
            set(map, "lambdas", l(lambda)?);
            set(map, "input", input.as_ref().map(|v| json!(v)));
        }
        Cmd::Identities { samples } => set(map, "samples", samples.map(|v| json!(v))),
        Cmd::Schema { .. } => {}
    }
    Ok(())
}

fn name(cmd: &Cmd) -> &'static str {
    match cmd {
        Cmd::Norm { .. } => "norm",
        Cmd::Counterexample { .. } => "counterexample",
        Cmd::Mcount { .. } => "mcount",
        Cmd::Weyl { .. } => "weyl",
        Cmd::Majorarc { .. } => "majorarc",
        Cmd::Scan { .. } => "scan",
        Cmd::Levelset { .. } => "levelset",
        Cmd::Extremize { .. } => "extremize",
        Cmd::Scaling { .. } => "scaling",
        Cmd::Identities { .. } => "identities",
        Cmd::Schema { .. } => "schema",
    }
}

fn build(cli: &Cli) -> anyhow::Result<Command> {
    let name = name(&cli.cmd);
    let mut value = match &cli.global.config {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            serde_json::from_str(&text).map_err(|e| LabError::Config {
                path: ".".into(),
                message: e.to_string(),
            })?
        }
        None => json!({}),
    };
    let map = value.as_object_mut().ok_or_else(|| LabError::Config {
        path: ".".into(),
        message: "config must be a JSON object".into(),
    })?;
    overrides(&cli.cmd, map)?;
    if let Some(eps) = cli.global.eps {
        let schema = Command::schema(name)?;
        if schema.pointer("/properties/eps").is_some() {
            map.insert("eps".into(), json!(eps));
        }
    }
    Ok(Command::from_json(name, &value.to_string())?)
}

fn is_config_error(e: &anyhow::Error) -> bool {
    e.chain().any(|c| {
        matches!(c.downcast_ref::<LabError>(), Some(LabError::Config { .. }))
            || c.downcast_ref::<std::io::Error>().is_some()
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Cmd::Schema { command } = &cli.cmd {
        return match Command::schema(command) {
            Ok(s) => {
                println!("{}", serde_json::to_string_pretty(&s).expect("schema serializes"));
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(EXIT_CONFIG)
            }
        };
    }
    let cmd = match build(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("config error: {e:#}");
            return ExitCode::from(if is_config_error(&e) { EXIT_CONFIG } else { 1 });
        }
    };
    let opts = RunOptions {
        seed: cli.global.seed,
        shards: cli.global.shards,
        out: cli.global.out.clone(),
        no_timing: cli.global.no_timing,
        argv: std::env::args().collect(),
    };
    match runner::run(&cmd, &opts) {
        Ok(outcome) => {
            for a in &outcome.artifacts {
                println!("{}", a.display());
            }
            if outcome.skipped > 0 {
                eprintln!("{} cell(s) skipped by cost guards", outcome.skipped);
                if cli.global.strict {
                    return ExitCode::from(EXIT_SKIPPED);
                }
            }
            ExitCode::SUCCESS
        }
        Err(e @ LabError::Config { .. }) => {
            eprintln!("config error: {e}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
