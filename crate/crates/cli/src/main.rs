use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use ifc_core::certify::certify_sum_capacity;
use ifc_core::construct::{build_z_channel, many_to_one, rank_one_channel};
use ifc_core::gaussian_info::{build_joint, conditional_mi, x_label, y_label};
use ifc_core::model::{
    complex_pairs, complex_rows, parse_channel, parse_complex_matrix, parse_complex_vec,
};
use ifc_core::oracle::{grid_min_sigma, mc_mutual_information, GRID_MAX_K};
use ifc_core::outer_bound::{
    count_terms, kra_term_min, region_with_mode, BoundTerm, OptimizerConfig, FULL_ENUMERATION_CAP,
};
use ifc_core::{ChannelMatrix, Error, Family, NoiseCorrelation, SCHEMA_VERSION};

mod sweep;

/// Largest K for full-region evaluation from the command line.
const CLI_REGION_CAP: usize = 6;

#[derive(Parser, Debug)]
#[command(name = "ifc", version, about = "Outer bounds and sum-capacity certificates for Gaussian interference channels")]
struct Cli {
    #[command(flatten)]
    opts: GlobalOpts,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct GlobalOpts {
    /// Master seed for all optimizer and sampler streams.
    #[arg(long, global = true, env = "IFC_SEED", default_value_t = 0)]
    seed: u64,
    /// Optimizer restarts per bound term.
    #[arg(long, global = true, env = "IFC_RESTARTS", default_value_t = 8)]
    restarts: usize,
    /// Function evaluations per restart.
    #[arg(long, global = true, env = "IFC_MAX_EVALS", default_value_t = 2000)]
    max_evals: usize,
    /// Comma-separated bound families (kra, etw, bc).
    #[arg(long, global = true, env = "IFC_FAMILIES", value_delimiter = ',', default_value = "kra,etw")]
    families: Vec<String>,
    /// Only bound the sum rate (all users, every ordering).
    #[arg(long, global = true, env = "IFC_SUM_RATE_ONLY")]
    sum_rate_only: bool,
    /// Optimizer convergence threshold in bits.
    #[arg(long, global = true, env = "IFC_TOLERANCE", default_value_t = 1e-7)]
    tolerance: f64,
    /// Largest K at which `verify` runs the exhaustive grid search.
    #[arg(long, global = true, env = "IFC_GRID_FALLBACK_K", default_value_t = 2)]
    grid_fallback_k: usize,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Compute the outer-bound region (or sum-rate bound) of a channel.
    Evaluate {
        /// Channel spec JSON ("-" for stdin).
        channel: String,
    },
    /// Build a channel from construction parameters.
    Construct {
        #[arg(value_enum)]
        mode: ConstructMode,
        /// Parameters JSON ("-" for stdin).
        params: String,
    },
    /// Try to certify the sum capacity of a channel.
    Certify { channel: String },
    /// Sweep one or more entries of a channel template and emit CSV.
    Sweep {
        template: String,
        /// JSON pointer(s) to the swept entries, e.g. /H/0/1.
        #[arg(long = "param", required = true)]
        params: Vec<String>,
        #[arg(long)]
        from: f64,
        #[arg(long)]
        to: f64,
        #[arg(long)]
        steps: usize,
    },
    /// Cross-check a channel against the Monte-Carlo and grid oracles.
    Verify {
        channel: String,
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
        /// Grid resolution (defaults to 200 for two users, 24 for three).
        #[arg(long)]
        resolution: Option<usize>,
    },
    /// Print the number of (subset, ordering) bound terms N(K).
    CountBounds {
        /// Values of K (defaults to 1 through 8).
        ks: Vec<usize>,
    },
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum ConstructMode {
    Z,
    ManyToOne,
    RankOne,
}

/// Failure with its process exit code.
#[derive(Debug)]
pub struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    pub fn usage(message: impl Into<String>) -> Self {
        Self { code: 2, message: message.into() }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::TooLarge { .. } => 3,
            Error::InternalInconsistency(_) => 4,
            _ => 2,
        };
        Self { code, message: e.to_string() }
    }
}

/// Stdout payload plus exit code of a successful run.
pub struct Outcome {
    stdout: String,
    code: u8,
}

fn read_input(path: &str) -> Result<String, Failure> {
    let read = if path == "-" {
        std::io::read_to_string(std::io::stdin())
    } else {
        std::fs::read_to_string(path)
    };
    read.map_err(|e| Failure::usage(format!("cannot read {path}: {e}")))
}

fn read_json(path: &str) -> Result<Value, Failure> {
    serde_json::from_str(&read_input(path)?)
        .map_err(|e| Failure::usage(format!("invalid JSON in {path}: {e}")))
}

impl GlobalOpts {
    fn optimizer(&self) -> Result<OptimizerConfig, Failure> {
        let cfg = OptimizerConfig {
            seed: self.seed,
            restarts: self.restarts,
            max_evals: self.max_evals,
            grid_fallback_k: self.grid_fallback_k,
            tolerance: self.tolerance,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn families(&self) -> Result<Vec<Family>, Failure> {
        self.families
            .iter()
            .map(|f| Family::parse(f.trim()).ok_or_else(|| Failure::usage(format!("unknown bound family `{f}`"))))
            .collect()
    }
}

fn pretty(v: &impl serde::Serialize) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

fn evaluate(opts: &GlobalOpts, path: &str) -> Result<Outcome, Failure> {
    let h = parse_channel(&read_input(path)?)?;
    if !opts.sum_rate_only && h.k() > CLI_REGION_CAP {
        return Err(Error::TooLarge {
            what: "K for full-region evaluation",
            value: h.k(),
            cap: CLI_REGION_CAP,
        }
        .into());
    }
    let report = region_with_mode(&h, &opts.optimizer()?, &opts.families()?, opts.sum_rate_only)?;
    Ok(Outcome {
        stdout: pretty(&report),
        code: if report.consistent { 0 } else { 4 },
    })
}

fn gains_from(v: &Value, pointer: &str) -> Result<Vec<f64>, Failure> {
    v.as_array()
        .and_then(|a| a.iter().map(Value::as_f64).collect::<Option<Vec<f64>>>())
        .ok_or_else(|| Failure::usage(format!("schema error at '{pointer}': expected an array of numbers")))
}

fn field<'a>(params: &'a Value, name: &str) -> Result<&'a Value, Failure> {
    params
        .get(name)
        .ok_or_else(|| Failure::usage(format!("schema error at '/{name}': missing required field")))
}

fn construct(mode: ConstructMode, path: &str) -> Result<Outcome, Failure> {
    let params = read_json(path)?;
    let (h, provenance): (ChannelMatrix, Value) = match mode {
        ConstructMode::Z => {
            let raw = field(&params, "Sigma")?;
            let k = raw.as_array().map_or(0, Vec::len);
            let sigma = NoiseCorrelation::new(parse_complex_matrix(raw, k, "/Sigma")?)?;
            let gains = match params.get("diag_gains") {
                Some(v) => gains_from(v, "/diag_gains")?,
                None => vec![1.0; k],
            };
            let h = build_z_channel(&sigma, &gains)?;
            (h, json!({"mode": "z", "Sigma": sigma, "diag_gains": gains}))
        }
        ConstructMode::ManyToOne => {
            let v = parse_complex_vec(field(&params, "v")?, "/v")?;
            let gains = match params.get("diag_gains") {
                Some(g) => gains_from(g, "/diag_gains")?,
                None => vec![1.0; v.len() + 1],
            };
            let strict = params.get("strict").and_then(Value::as_bool).unwrap_or(true);
            let h = many_to_one(&v, &gains, strict)?;
            (h, json!({"mode": "many-to-one", "v": complex_pairs(&v), "diag_gains": gains, "strict": strict}))
        }
        ConstructMode::RankOne => {
            let a = parse_complex_vec(field(&params, "a")?, "/a")?;
            let b = parse_complex_vec(field(&params, "b")?, "/b")?;
            let h = rank_one_channel(&a, &b)?;
            (h, json!({"mode": "rank-one", "a": complex_pairs(&a), "b": complex_pairs(&b)}))
        }
    };
    let doc = json!({
        "schema_version": SCHEMA_VERSION,
        "K": h.k(),
        "H": complex_rows(h.matrix()),
        "provenance": provenance,
    });
    Ok(Outcome { stdout: pretty(&doc), code: 0 })
}

fn certify(opts: &GlobalOpts, path: &str) -> Result<Outcome, Failure> {
    let h = parse_channel(&read_input(path)?)?;
    let cert = certify_sum_capacity(&h, &opts.optimizer()?)?;
    Ok(Outcome {
        stdout: pretty(&cert),
        code: if cert.is_certified() { 0 } else { 1 },
    })
}

fn verify(opts: &GlobalOpts, path: &str, samples: usize, resolution: Option<usize>) -> Result<Outcome, Failure> {
    let h = parse_channel(&read_input(path)?)?;
    let cfg = opts.optimizer()?;
    let k = h.k();
    let mut agree = true;

    // Monte-Carlo check of each summand of the natural-order bound at independent noises
    let joint = build_joint(&h, &NoiseCorrelation::identity(k), &[])?;
    let mut mc = Vec::new();
    for step in 0..k {
        let a = vec![y_label(step)];
        let b: Vec<String> = (step..k).map(x_label).collect();
        let mut cond: Vec<String> = (0..step).map(x_label).collect();
        cond.extend((0..step).map(y_label));
        let exact = conditional_mi(&joint, &a, &b, &cond)?;
        let (estimate, se) = mc_mutual_information(&joint, &a, &b, &cond, samples, opts.seed.wrapping_add(step as u64))?;
        let ok = (estimate - exact).abs() <= 3.0 * se + 1e-12;
        agree &= ok;
        mc.push(json!({"A": a, "B": b, "C": cond, "exact": exact, "estimate": estimate, "standard_error": se, "within_3se": ok}));
    }

    let mut grid = Vec::new();
    if k <= cfg.grid_fallback_k.min(GRID_MAX_K) {
        let res = resolution.unwrap_or(if k <= 2 { 200 } else { 24 });
        for perm in ifc_core::outer_bound::sum_rate_terms(k)? {
            let t = BoundTerm::new(perm.perm)?;
            let opt = kra_term_min(&h, &t, &cfg)?;
            let (g, _) = grid_min_sigma(&h, &t, res)?;
            let ok = (opt.value - g).abs() <= 1e-4;
            agree &= ok;
            grid.push(json!({
                "perm": t.perm.iter().map(|u| u + 1).collect::<Vec<_>>(),
                "optimizer": opt.value,
                "grid": g,
                "difference": opt.value - g,
                "within_1e-4": ok,
            }));
        }
    }
    let doc = json!({
        "schema_version": SCHEMA_VERSION,
        "K": k,
        "samples": samples,
        "monte_carlo": mc,
        "grid": grid,
        "agree": agree,
    });
    Ok(Outcome { stdout: pretty(&doc), code: if agree { 0 } else { 4 } })
}

fn count_bounds(ks: &[usize]) -> Result<Outcome, Failure> {
    let ks: Vec<usize> = if ks.is_empty() { (1..=FULL_ENUMERATION_CAP).collect() } else { ks.to_vec() };
    let mut out = String::new();
    for k in ks {
        if k == 0 {
            return Err(Failure::usage("K must be positive"));
        }
        out.push_str(&format!("N({k})={}\n", count_terms(k)));
    }
    Ok(Outcome { stdout: out, code: 0 })
}

fn run(cli: Cli) -> Result<Outcome, Failure> {
    let opts = &cli.opts;
    match cli.command {
        Command::Evaluate { channel } => evaluate(opts, &channel),
        Command::Construct { mode, params } => construct(mode, &params),
        Command::Certify { channel } => certify(opts, &channel),
        Command::Sweep { template, params, from, to, steps } => {
            sweep::run(opts, &read_json(&template)?, &params, from, to, steps)
        }
        Command::Verify { channel, samples, resolution } => verify(opts, &channel, samples, resolution),
        Command::CountBounds { ks } => count_bounds(&ks),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(out) => {
            print!("{}", out.stdout);
            ExitCode::from(out.code)
        }
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
