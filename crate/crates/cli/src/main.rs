//! `kronruin`: winning probabilities, absorption-time laws and simulation
//! for multidimensional gambler's ruin games described in a JSON file.

mod spec_file;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use kronruin_core::absorption::{pgf_multidim, pgf_two_sided};
use kronruin_core::markov::hitting_pgf;
use kronruin_core::siegmund::{win_prob_fundamental, win_prob_product, win_prob_via_stationary};
use kronruin_core::{
    absorb_dist, build_game, simulate, simulate_coupled, verify, AbsorbingChain, Error, GameSpec,
    HorizonOpts, SimConfig,
};
use serde_json::{json, Map, Value};

use spec_file::{check_start, GameFile};

#[derive(Debug, Parser)]
#[command(name = "kronruin", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Winning probability from every cell, by two independent methods.
    WinProb { file: PathBuf },
    /// Law of the absorption time as CSV rows `t,pmf,cdf`.
    AbsorbDist {
        file: PathBuf,
        /// Start cell, e.g. `2,3` (1-based).
        #[arg(long, value_delimiter = ',')]
        start: Option<Vec<usize>>,
        #[arg(long, value_enum, default_value_t = Target::Win)]
        target: Target,
        /// Fixed number of steps.
        #[arg(long)]
        horizon: Option<usize>,
        /// Residual mass at which the iteration stops.
        #[arg(long)]
        eps: Option<f64>,
    },
    /// Generating function of the time to win, evaluated at given points.
    Pgf {
        file: PathBuf,
        #[arg(long, value_delimiter = ',')]
        start: Option<Vec<usize>>,
        #[arg(long, value_delimiter = ',', required = true)]
        eval: Vec<f64>,
    },
    /// Monte Carlo estimate of the winning probability and times.
    Simulate {
        file: PathBuf,
        #[arg(long, value_delimiter = ',')]
        start: Option<Vec<usize>>,
        #[arg(long)]
        runs: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 1_000_000)]
        max_steps: usize,
        /// Run the dual chain alongside and report coupling statistics.
        #[arg(long)]
        coupled: bool,
        #[arg(long, env = "GAMBLER_WORKERS")]
        workers: Option<usize>,
    },
    /// Runs every internal consistency check and reports residuals.
    Verify {
        file: PathBuf,
        #[arg(long, value_delimiter = ',')]
        start: Option<Vec<usize>>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Target {
    Win,
    Lose,
}

/// A failure reported as a JSON body with an exit code.
#[derive(Debug)]
struct Failure {
    code: u8,
    kind: &'static str,
    message: String,
    field: Option<String>,
}

impl Failure {
    fn usage(kind: &'static str, message: impl Into<String>) -> Self {
        Self {
            code: 2,
            kind,
            message: message.into(),
            field: None,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let (code, kind) = match &e {
            Error::Internal(_) => (1, "internal"),
            Error::NumericGuard(_) => (1, "numeric_guard"),
            Error::Size { .. } => (2, "size"),
            Error::Shape(_) | Error::NonFinite { .. } | Error::NotSubstochastic { .. } => (2, "matrix"),
            Error::NotAbsorbing { .. } => (2, "not_absorbing"),
            Error::InvalidSpec(_) | Error::InvalidGame(_) => (2, "invalid_spec"),
            Error::NotStochastic { .. } => (2, "not_stochastic"),
            Error::Communication(_) => (2, "communication"),
            Error::Index { .. } | Error::StartOutOfRange(_) => (2, "start_out_of_range"),
            Error::Monotonicity(_) => (2, "monotonicity"),
            Error::NegativeSpectrum { .. } => (2, "negative_spectrum"),
            Error::DegenerateSpectrum { .. } => (2, "degenerate_spectrum"),
            Error::Nonnegativity { .. } => (2, "nonnegativity"),
            Error::MatrixCoefficients(_) => (2, "matrix_coefficients"),
            Error::WrongCase(_) => (2, "wrong_case"),
            Error::Horizon { .. } => (2, "horizon"),
            Error::NegativeMass { .. } => (2, "negative_mass"),
            Error::Singular(_) => (2, "singular"),
            Error::CouplingUnavailable(_) => (2, "coupling_unavailable"),
        };
        Self {
            code,
            kind,
            message: e.to_string(),
            field: None,
        }
    }
}

type CmdResult = Result<Output, Failure>;

enum Output {
    Json(Value, u8),
    Text(String),
}

fn load(path: &PathBuf) -> Result<GameFile, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::usage("io", format!("{}: {e}", path.display())))?;
    spec_file::parse(&text).map_err(|e| Failure {
        code: 2,
        kind: "invalid_spec",
        message: e.to_string(),
        field: Some(e.field),
    })
}

fn start_cell(file: &GameFile, flag: Option<Vec<usize>>) -> Result<Vec<usize>, Failure> {
    let cell = flag
        .or_else(|| file.start.clone())
        .unwrap_or_else(|| file.game.space().origin());
    check_start(&file.game, &cell).map_err(|m| Failure {
        code: 2,
        kind: "start_out_of_range",
        message: m,
        field: Some("start".into()),
    })?;
    Ok(cell)
}

fn cell_key(cell: &[usize]) -> String {
    cell.iter().map(usize::to_string).collect::<Vec<_>>().join(",")
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn by_cell(game: &GameSpec, values: &[f64]) -> Value {
    let space = game.space();
    let map: Map<String, Value> = values
        .iter()
        .enumerate()
        .map(|(i, v)| (cell_key(&space.cell(i)), json!(v)))
        .collect();
    Value::Object(map)
}

fn win_prob(path: &PathBuf) -> CmdResult {
    let file = load(path)?;
    let chain = build_game(&file.game)?;
    let product = win_prob_product(&file.game);
    let solve = win_prob_fundamental(&chain)?;
    let mut agreement = max_diff(&product, &solve);
    let stationary = match win_prob_via_stationary(&chain) {
        Ok(s) => {
            agreement = agreement.max(max_diff(&product, &s));
            by_cell(&file.game, &s)
        }
        Err(_) => Value::Null,
    };
    Ok(Output::Json(
        json!({
            "rho": by_cell(&file.game, &product),
            "rho_linear_solve": by_cell(&file.game, &solve),
            "rho_stationary": stationary,
            "method_agreement": agreement,
        }),
        0,
    ))
}

fn absorb(
    path: &PathBuf,
    start: Option<Vec<usize>>,
    target: Target,
    horizon: Option<usize>,
    eps: Option<f64>,
) -> CmdResult {
    let file = load(path)?;
    let cell = start_cell(&file, start)?;
    let chain = build_game(&file.game)?;
    let idx = target_index(&chain, target);
    let nu = chain.lift(&chain.space().delta(&cell)?);
    let opts = HorizonOpts {
        horizon: horizon.or(file.horizon),
        eps: eps.or(file.eps).unwrap_or(HorizonOpts::default().eps),
    };
    if opts.eps <= 0.0 || !opts.eps.is_finite() {
        return Err(Failure::usage("invalid_argument", "--eps must be positive"));
    }
    let dist = absorb_dist(chain.matrix(), &nu, idx, opts)?;
    let mut out = String::from("t,pmf,cdf\n");
    for (t, (p, c)) in dist.pmf.iter().zip(dist.cdf()).enumerate() {
        out.push_str(&format!("{t},{p:?},{c:?}\n"));
    }
    out.push_str(&format!("# tail={:?}\n", dist.tail));
    Ok(Output::Text(out))
}

fn target_index(chain: &AbsorbingChain, target: Target) -> usize {
    match target {
        Target::Win => chain.win_index(),
        Target::Lose => chain.sink_index(),
    }
}

fn pgf(path: &PathBuf, start: Option<Vec<usize>>, eval: &[f64]) -> CmdResult {
    let file = load(path)?;
    let cell = start_cell(&file, start)?;
    if let Some(s) = eval.iter().find(|s| !(0.0..=1.0).contains(*s)) {
        return Err(Failure::usage("invalid_argument", format!("--eval point {s} outside [0, 1]")));
    }
    let chain = build_game(&file.game)?;
    let from = chain.space().index(&cell)? + 1;
    let win = chain.win_index();
    let closed = if file.game.d() == 1 && file.game.dims()[0].has_sink() {
        pgf_two_sided(&file.game.dims()[0], cell[0]).map(|(w, _)| w)
    } else {
        pgf_multidim(&file.game, &file.game.space().delta(&cell)?)
    };
    let mut values = Vec::with_capacity(eval.len());
    for &s in eval {
        let direct = hitting_pgf(chain.matrix(), win, s)?[from];
        let product = match &closed {
            Ok(expr) => json!(expr.eval(s)?),
            Err(_) => Value::Null,
        };
        values.push(json!({"s": s, "pgf": direct, "product_form": product}));
    }
    let rho_at_1 = hitting_pgf(chain.matrix(), win, 1.0)?[from];
    Ok(Output::Json(
        json!({
            "start": cell,
            "values": values,
            "rho_at_1": rho_at_1,
            "product_form_unavailable": closed.err().map(|e| e.to_string()),
        }),
        0,
    ))
}

#[allow(clippy::too_many_arguments)]
fn sim(
    path: &PathBuf,
    start: Option<Vec<usize>>,
    runs: Option<usize>,
    seed: Option<u64>,
    max_steps: usize,
    coupled: bool,
    workers: Option<usize>,
) -> CmdResult {
    let file = load(path)?;
    let cell = start_cell(&file, start)?;
    let defaults = SimConfig::default();
    let cfg = SimConfig {
        runs: runs.or(file.runs).unwrap_or(defaults.runs),
        seed: seed.or(file.seed).unwrap_or(defaults.seed),
        max_steps,
        workers: workers.unwrap_or(defaults.workers),
    };
    let chain = build_game(&file.game)?;
    let report = if coupled {
        simulate_coupled(&file.game, &file.game.space().delta(&cell)?, &cfg)?
    } else {
        simulate(&chain, &cell, &cfg)?
    };
    let exact = win_prob_product(&file.game)[chain.space().index(&cell)?];
    let z = if report.win_freq_se > 0.0 {
        Some((report.win_freq - exact) / report.win_freq_se)
    } else {
        None
    };
    Ok(Output::Json(
        json!({
            "start": cell,
            "report": report,
            "exact_win_prob": exact,
            "z_score": z,
        }),
        0,
    ))
}

fn run_verify(path: &PathBuf, start: Option<Vec<usize>>) -> CmdResult {
    let file = load(path)?;
    let cell = start_cell(&file, start)?;
    let report = verify(&file.game, &cell);
    let code = if report.all_pass() { 0 } else { 1 };
    let body = serde_json::to_value(&report).map_err(|e| Failure::from(Error::Internal(e.to_string())))?;
    Ok(Output::Json(
        json!({"start": cell, "all_pass": report.all_pass(), "checks": body["checks"], "skipped": body["skipped"]}),
        code,
    ))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::WinProb { file } => win_prob(&file),
        Command::AbsorbDist {
            file,
            start,
            target,
            horizon,
            eps,
        } => absorb(&file, start, target, horizon, eps),
        Command::Pgf { file, start, eval } => pgf(&file, start, &eval),
        Command::Simulate {
            file,
            start,
            runs,
            seed,
            max_steps,
            coupled,
            workers,
        } => sim(&file, start, runs, seed, max_steps, coupled, workers),
        Command::Verify { file, start } => run_verify(&file, start),
    };
    match result {
        Ok(Output::Json(v, code)) => {
            println!("{}", serde_json::to_string_pretty(&v).expect("serializable"));
            ExitCode::from(code)
        }
        Ok(Output::Text(t)) => {
            print!("{t}");
            ExitCode::SUCCESS
        }
        Err(f) => {
            let body = json!({"error": {"kind": f.kind, "message": f.message, "field": f.field}});
            println!("{}", serde_json::to_string_pretty(&body).expect("serializable"));
            eprintln!("kronruin: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
