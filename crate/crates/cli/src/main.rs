use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use momentgmp::conic::Settings;
use momentgmp::experiments::{self, gap_sweep, hausdorff_sweep, reference_optimum};
use momentgmp::gmp::GmpInstance;
use momentgmp::poly::{Polynomial, PolynomialJson};
use momentgmp::rates::{self, PsatzConstants, RateInputs};
use momentgmp::tensor::{self, DecompositionConfig, Mode};

const EXIT_OK: u8 = 0;
const EXIT_ERROR: u8 = 1;
const EXIT_NOT_CERTIFIED: u8 = 2;

#[derive(Parser, Debug)]
#[command(name = "momentgmp", version, about = "Moment-SoS relaxations and symmetric tensor decomposition")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Decompose a homogeneous form into powers of linear forms.
    Decompose(DecomposeArgs),
    /// Tabulate the hierarchy gap bound κ ℓ^{−θ}.
    Rates(RatesArgs),
    /// Solve a GMP instance at several relaxation orders.
    Sweep(SweepArgs),
    /// Sampled Hausdorff-distance estimate over random unit objectives.
    Hausdorff(HausdorffArgs),
    /// Re-run the command recorded in a manifest.
    Replay(ReplayArgs),
}

#[derive(Args, Debug, Clone, Serialize)]
struct Common {
    /// Solver tolerance on relative residuals and gap.
    #[arg(long)]
    tol: Option<f64>,
    /// Random seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Solver iteration cap.
    #[arg(long)]
    max_iter: Option<usize>,
    /// Output directory; results are printed to stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn settings(&self, base: Settings) -> Settings {
        Settings {
            eps: self.tol.unwrap_or(base.eps),
            max_iter: self.max_iter.unwrap_or(base.max_iter),
            ..base
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ModeArg {
    Positive,
    Signed,
}

#[derive(Args, Debug)]
struct DecomposeArgs {
    /// Tensor JSON: `{"n": .., "terms": [{"alpha": [..], "coef": ..}], "degree": ..}`.
    input: PathBuf,
    #[arg(long, value_enum, default_value_t = ModeArg::Positive)]
    mode: ModeArg,
    /// Relaxation order ℓ.
    #[arg(long)]
    order: Option<usize>,
    /// Half-degree of the trace objective.
    #[arg(long)]
    psi_halfdeg: Option<usize>,
    /// Points are divided by this factor before solving; suggested when absent.
    #[arg(long)]
    scale: Option<f64>,
    /// Total-variation cap (signed mode).
    #[arg(long = "L")]
    tv_cap: Option<f64>,
    /// Add kernel rows from the middle catalecticant (signed mode).
    #[arg(long)]
    use_kernel: bool,
    #[arg(long)]
    rank_tol: Option<f64>,
    #[arg(long)]
    merge_tol: Option<f64>,
    #[command(flatten)]
    common: Common,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum PresetArg {
    Ball,
    Box1,
    Box2,
    Generic,
}

#[derive(Args, Debug)]
struct RatesArgs {
    /// Rate-inputs JSON; κ and θ are derived from it.
    input: Option<PathBuf>,
    #[arg(long)]
    kappa: Option<f64>,
    #[arg(long)]
    theta: Option<f64>,
    /// Positivstellensatz preset supplying θ and the threshold ℓ₀.
    #[arg(long, value_enum)]
    preset: Option<PresetArg>,
    /// Dimension for the preset.
    #[arg(long)]
    n: Option<usize>,
    /// Polynomial degree for the preset.
    #[arg(long)]
    deg: Option<usize>,
    /// Positivstellensatz constant γ.
    #[arg(long, default_value_t = 1.0)]
    gamma: f64,
    /// First order of the table; defaults to the rate threshold.
    #[arg(long)]
    ell_min: Option<f64>,
    #[arg(long, default_value_t = 100.0)]
    max_order: f64,
    #[arg(long, default_value_t = 2.0)]
    step: f64,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct SweepArgs {
    /// GMP instance JSON.
    input: PathBuf,
    /// Comma-separated even orders; defaults to every even order up to --order.
    #[arg(long, value_delimiter = ',')]
    orders: Option<Vec<usize>>,
    /// Largest order when --orders is absent.
    #[arg(long, default_value_t = 8)]
    order: usize,
    /// Known optimum; skips the grid reference.
    #[arg(long, allow_negative_numbers = true)]
    reference: Option<f64>,
    /// Grid points per dimension of the reference LP; 0 disables it.
    #[arg(long, default_value_t = 2001)]
    grid: usize,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct HausdorffArgs {
    /// GMP instance JSON; its objective is ignored.
    input: PathBuf,
    /// Degree of the sampled objectives.
    #[arg(long, default_value_t = 2)]
    k: usize,
    /// Comma-separated relaxation orders.
    #[arg(long, value_delimiter = ',', default_value = "2,4,6,8")]
    orders: Vec<usize>,
    #[arg(long, default_value_t = 50)]
    samples: usize,
    #[arg(long, default_value_t = 2001)]
    grid: usize,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct ReplayArgs {
    manifest: PathBuf,
    /// Output directory for the replay; defaults to the recorded one.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Record of one invocation, written next to its outputs.
#[derive(Debug, Serialize, Deserialize)]
struct RunManifest {
    command: String,
    argv: Vec<String>,
    inputs: Vec<PathBuf>,
    config: serde_json::Value,
    seed: u64,
    version: String,
    threads: Option<String>,
}

#[derive(Deserialize)]
struct TensorFile {
    degree: Option<usize>,
    #[serde(flatten)]
    poly: PolynomialJson,
}

struct Outcome {
    exit: u8,
    files: Vec<(String, String)>,
    stdout: String,
    config: serde_json::Value,
    seed: u64,
    inputs: Vec<PathBuf>,
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn to_json<T: Serialize>(v: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(v)? + "\n")
}

fn decompose(args: &DecomposeArgs) -> Result<Outcome> {
    let file: TensorFile = read_json(&args.input)?;
    let f = Polynomial::try_from(file.poly).context("invalid polynomial")?;
    let d = match (file.degree, f.homogeneous_degree()) {
        (Some(d), _) => d,
        (None, Some(d)) => d,
        (None, None) => bail!("input is not homogeneous and has no degree field"),
    };
    let mode = match args.mode {
        ModeArg::Positive => Mode::Positive,
        ModeArg::Signed => Mode::Signed,
    };
    let mut cfg = DecompositionConfig::for_degree(d);
    if let Some(l) = args.order {
        cfg.ell = l;
        cfg.psi_halfdeg = l / 2;
    }
    if let Some(h) = args.psi_halfdeg {
        cfg.psi_halfdeg = h;
    }
    cfg.scale = match args.scale {
        Some(s) => s,
        None => tensor::suggest_scale(&f, d)?,
    };
    cfg.tv_cap = args.tv_cap;
    cfg.use_kernel = args.use_kernel;
    if let Some(t) = args.rank_tol {
        cfg.rank_tol = t;
    }
    if let Some(t) = args.merge_tol {
        cfg.merge_tol = t;
    }
    cfg.seed = args.common.seed;
    cfg.solver = args.common.settings(cfg.solver.clone());

    let dec = tensor::decompose(&f, d, mode, &cfg)?;
    let certified = dec.diagnostics.certified;
    if !certified {
        eprintln!(
            "not certified: extraction residual {:.3e}, status {:?}",
            dec.diagnostics.extraction_residual, dec.diagnostics.status
        );
    }
    let atoms = to_json(&dec.atoms)?;
    let diagnostics = to_json(&dec.diagnostics)?;
    let stdout = to_json(&serde_json::json!({ "atoms": dec.atoms, "diagnostics": dec.diagnostics }))?;
    Ok(Outcome {
        exit: if certified { EXIT_OK } else { EXIT_NOT_CERTIFIED },
        files: vec![("atoms.json".into(), atoms), ("diagnostics.json".into(), diagnostics)],
        stdout,
        config: serde_json::json!({ "mode": mode, "degree": d, "decomposition": cfg }),
        seed: args.common.seed,
        inputs: vec![args.input.clone()],
    })
}

fn rates_cmd(args: &RatesArgs) -> Result<Outcome> {
    let (kappa, theta, ell0) = if let Some(path) = &args.input {
        let inputs: RateInputs = read_json(path)?;
        let (k, t) = rates::kappa_theta(&inputs)?;
        let ell0: Vec<f64> = inputs.slots.iter().map(|s| s.psatz.ell0).collect();
        (args.kappa.unwrap_or(k), args.theta.unwrap_or(t), rates::ell_threshold(&ell0, &[]))
    } else if let Some(preset) = args.preset {
        let n = args.n.context("--preset needs --n")?;
        let (theta, ell0) = match preset {
            PresetArg::Generic => {
                let t = args.theta.context("--preset generic needs --theta")?;
                (t, 0.0)
            }
            _ => {
                let deg = args.deg.context("--preset needs --deg")?;
                let c = match preset {
                    PresetArg::Ball => PsatzConstants::ball(n, deg, args.gamma),
                    PresetArg::Box1 => PsatzConstants::box1(n, deg, args.gamma),
                    _ => PsatzConstants::box2(n, deg, args.gamma),
                };
                (args.theta.unwrap_or(c.theta), c.ell0)
            }
        };
        let kappa = match args.kappa {
            Some(k) => k,
            None => {
                eprintln!("note: κ not given, using 1 (bound shape only)");
                1.0
            }
        };
        (kappa, theta, ell0)
    } else {
        let kappa = args.kappa.context("need --kappa and --theta, --preset, or an input file")?;
        let theta = args.theta.context("need --theta")?;
        (kappa, theta, 0.0)
    };
    if !(args.step > 0.0) {
        bail!("--step must be positive");
    }
    let start = args.ell_min.unwrap_or(ell0.ceil()).max(ell0);
    let start = if start > 0.0 { start } else { args.step };
    let mut csv = String::from("ell,bound\n");
    let mut i = 0u64;
    loop {
        let ell = start + i as f64 * args.step;
        if ell > args.max_order + 1e-9 {
            break;
        }
        let b = rates::gap_bound(ell, kappa, theta)?;
        csv.push_str(&format!("{ell},{b}\n"));
        i += 1;
    }
    Ok(Outcome {
        exit: EXIT_OK,
        files: vec![("rates.csv".into(), csv.clone())],
        stdout: csv,
        config: serde_json::json!({
            "kappa": kappa, "theta": theta, "ell0": ell0, "preset": args.preset,
            "gamma": args.gamma, "ell_min": start, "max_order": args.max_order, "step": args.step,
        }),
        seed: args.common.seed,
        inputs: args.input.iter().cloned().collect(),
    })
}

fn sweep_cmd(args: &SweepArgs) -> Result<Outcome> {
    let inst: GmpInstance = read_json(&args.input)?;
    let orders = match &args.orders {
        Some(o) => o.clone(),
        None => {
            let deg = inst
                .objective_degree()
                .max(inst.rows.iter().map(|r| r.degree()).max().unwrap_or(0));
            let lo = (deg.max(2) + 1) / 2 * 2;
            (lo..=args.order).step_by(2).collect()
        }
    };
    let settings = args.common.settings(Settings::default());
    let small = inst.slots.iter().all(|s| s.n <= 2);
    let reference = match args.reference {
        Some(v) => Some(v),
        None if args.grid > 0 && small => Some(reference_optimum(&inst, args.grid)?),
        None => None,
    };
    let res = gap_sweep(&inst, &orders, reference, &settings)?;
    for r in &res.rows {
        if let Some(e) = &r.error {
            eprintln!("ℓ = {}: {e}", r.ell);
        }
    }
    let csv = res.to_csv()?;
    Ok(Outcome {
        exit: EXIT_OK,
        files: vec![("sweep.csv".into(), csv.clone()), ("sweep.json".into(), to_json(&res)?)],
        stdout: csv,
        config: serde_json::json!({ "orders": orders, "reference": reference, "grid": args.grid, "solver": settings }),
        seed: args.common.seed,
        inputs: vec![args.input.clone()],
    })
}

fn hausdorff_cmd(args: &HausdorffArgs) -> Result<Outcome> {
    let inst: GmpInstance = read_json(&args.input)?;
    let settings = args.common.settings(Settings::default());
    let res = hausdorff_sweep(&inst, args.k, &args.orders, args.samples, args.grid, args.common.seed, &settings)?;
    let csv = res.to_csv()?;
    Ok(Outcome {
        exit: EXIT_OK,
        files: vec![("hausdorff.csv".into(), csv.clone())],
        stdout: csv,
        config: serde_json::json!({
            "k": args.k, "orders": args.orders, "samples": args.samples, "grid": args.grid, "solver": settings,
        }),
        seed: args.common.seed,
        inputs: vec![args.input.clone()],
    })
}

fn finish(name: &str, argv: &[String], out: Option<&Path>, outcome: Outcome) -> Result<u8> {
    match out {
        None => print!("{}", outcome.stdout),
        Some(dir) => {
            fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            for (file, body) in &outcome.files {
                fs::write(dir.join(file), body).with_context(|| format!("writing {file}"))?;
            }
            let manifest = RunManifest {
                command: name.into(),
                argv: argv.to_vec(),
                inputs: outcome.inputs,
                config: outcome.config,
                seed: outcome.seed,
                version: env!("CARGO_PKG_VERSION").into(),
                threads: std::env::var(experiments::THREADS_ENV).ok(),
            };
            fs::write(dir.join("manifest.json"), to_json(&manifest)?)?;
            eprintln!("wrote {}", dir.display());
        }
    }
    Ok(outcome.exit)
}

fn run(argv: Vec<String>) -> Result<u8> {
    let cli = Cli::try_parse_from(&argv).map_err(|e| {
        let _ = e.print();
        anyhow::anyhow!("invalid arguments")
    })?;
    match &cli.command {
        Command::Decompose(a) => finish("decompose", &argv, a.common.out.as_deref(), decompose(a)?),
        Command::Rates(a) => finish("rates", &argv, a.common.out.as_deref(), rates_cmd(a)?),
        Command::Sweep(a) => finish("sweep", &argv, a.common.out.as_deref(), sweep_cmd(a)?),
        Command::Hausdorff(a) => finish("hausdorff", &argv, a.common.out.as_deref(), hausdorff_cmd(a)?),
        Command::Replay(a) => {
            let m: RunManifest = read_json(&a.manifest)?;
            let mut args = strip_out(&m.argv);
            if let Some(out) = &a.out {
                args.push("--out".into());
                args.push(out.display().to_string());
            } else if let Some(out) = recorded_out(&m.argv) {
                args.push("--out".into());
                args.push(out);
            }
            run(args)
        }
    }
}

fn recorded_out(argv: &[String]) -> Option<String> {
    let mut it = argv.iter();
    while let Some(a) = it.next() {
        if a == "--out" {
            return it.next().cloned();
        }
        if let Some(v) = a.strip_prefix("--out=") {
            return Some(v.to_string());
        }
    }
    None
}

fn strip_out(argv: &[String]) -> Vec<String> {
    let mut out = Vec::with_capacity(argv.len());
    let mut skip = false;
    for a in argv {
        if skip {
            skip = false;
        } else if a == "--out" {
            skip = true;
        } else if !a.starts_with("--out=") {
            out.push(a.clone());
        }
    }
    out
}

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().collect();
    let help = argv.iter().skip(1).any(|a| a == "--help" || a == "-h" || a == "--version" || a == "-V");
    if help || argv.len() == 1 {
        if let Err(e) = Cli::try_parse_from(&argv) {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_ERROR } else { EXIT_OK });
        }
    }
    match run(argv) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}
