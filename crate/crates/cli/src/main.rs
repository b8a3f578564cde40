mod examples;
mod report;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use choi_divergence::bounds::{sandwich, BoundRequest, BoundStatus, EnergyConstraint, R_CAP};
use choi_divergence::channel::{ChannelSpec, ChoiMatrix, MatrixJson};
use choi_divergence::grid::GridScheme;
use choi_divergence::oracle::{brute_force_channel_re, BruteForceOptions};
use choi_divergence::resource::{min_over_free, FreeRequest, FreeSetJson};
use choi_divergence::sdp::SolverOptions;
use choi_divergence::spectral::{dmax, dmax_sdp, interval_for_pair, DMAX_TOL};
use choi_divergence::Error;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use report::{num, Report};

#[derive(Parser)]
#[command(name = "choi-div", version, about = "Certified bounds on the relative entropy of quantum channels")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Lower and upper bounds on D(N||M).
    Bounds {
        #[command(flatten)]
        pair: Pair,
        #[arg(long, default_value_t = 1e-3)]
        epsilon: f64,
        /// Starting grid size; doubled until the gap is below epsilon.
        #[arg(long)]
        r: Option<usize>,
        #[arg(long, default_value_t = R_CAP)]
        r_cap: usize,
        #[arg(long, value_enum, default_value_t = Scheme::Geometric)]
        grid: Scheme,
        #[command(flatten)]
        energy: Energy,
        #[command(flatten)]
        common: Common,
    },
    /// Max-relative entropy of the Choi pair and the interval ends.
    Dmax {
        #[command(flatten)]
        pair: Pair,
        /// Also solve the semidefinite program for D_max(N||M).
        #[arg(long)]
        sdp: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Minimum of D(N||M) over a set of free channels M.
    Resource {
        #[arg(long = "n")]
        n: PathBuf,
        /// replacer, ppt, fixed:<path>, custom:<path> or a descriptor file.
        #[arg(long)]
        free: String,
        #[arg(long)]
        lambda_bar: Option<f64>,
        #[arg(long)]
        delta_reg: Option<f64>,
        #[arg(long, default_value_t = 1e-2)]
        epsilon: f64,
        #[arg(long)]
        r: Option<usize>,
        #[arg(long, default_value_t = R_CAP)]
        r_cap: usize,
        #[arg(long, value_enum, default_value_t = Scheme::Geometric)]
        grid: Scheme,
        #[command(flatten)]
        energy: Energy,
        #[command(flatten)]
        common: Common,
    },
    /// Brute-force maximization over input states.
    Oracle {
        #[command(flatten)]
        pair: Pair,
        #[arg(long, default_value_t = 6)]
        restarts: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Writes channel specs for the builtin channels and a README table.
    Examples {
        #[arg(long, default_value = "examples")]
        dir: PathBuf,
    },
}

#[derive(Args)]
struct Pair {
    #[arg(long = "n")]
    n: PathBuf,
    #[arg(long = "m")]
    m: PathBuf,
}

#[derive(Args)]
struct Energy {
    /// Hamiltonian as a JSON matrix; requires --E.
    #[arg(long, requires = "e")]
    energy: Option<PathBuf>,
    #[arg(long = "E", id = "e", requires = "energy", allow_negative_numbers = true)]
    e: Option<f64>,
}

#[derive(Args)]
struct Common {
    #[arg(long, default_value_t = 1e-8)]
    tol_gap: f64,
    #[arg(long, default_value_t = 1e-8)]
    tol_feas: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Omits timings so identical runs give identical output.
    #[arg(long)]
    no_meta: bool,
    /// Reports entropies in bits instead of nats.
    #[arg(long)]
    bits: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Scheme {
    Geometric,
    Uniform,
}

impl From<Scheme> for GridScheme {
    fn from(s: Scheme) -> Self {
        match s {
            Scheme::Geometric => GridScheme::Geometric,
            Scheme::Uniform => GridScheme::Uniform,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

/// Failure with its exit code.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Solver { .. } => 3,
            Error::InfiniteDivergence => 2,
            _ => 1,
        };
        Failure { code, message: e.to_string() }
    }
}

fn input(path: &Path, e: impl std::fmt::Display) -> Failure {
    Failure { code: 1, message: format!("{}: {e}", path.display()) }
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| input(path, e))
}

fn load_channel(path: &Path) -> Result<ChoiMatrix, Failure> {
    let spec = ChannelSpec::from_json(&read(path)?).map_err(|e| input(path, e))?;
    spec.to_choi().map_err(|e| input(path, e))
}

fn load_energy(e: &Energy) -> Result<Vec<EnergyConstraint>, Failure> {
    match (&e.energy, e.e) {
        (Some(path), Some(bound)) => {
            let m: MatrixJson = serde_json::from_str(&read(path)?).map_err(|err| input(path, err))?;
            let h = m.to_hermitian().map_err(|err| input(path, err))?;
            Ok(vec![EnergyConstraint::new(h, bound)?])
        }
        _ => Ok(Vec::new()),
    }
}

fn solver(c: &Common) -> Result<SolverOptions, Failure> {
    if !(c.tol_gap > 0.0 && c.tol_feas > 0.0) {
        return Err(Failure { code: 1, message: "tolerances must be positive".into() });
    }
    Ok(SolverOptions { tol_gap: c.tol_gap, tol_feas: c.tol_feas, ..SolverOptions::default() })
}

fn check_epsilon(eps: f64) -> Result<(), Failure> {
    if eps > 0.0 {
        Ok(())
    } else {
        Err(Failure { code: 1, message: format!("--epsilon must be positive, got {eps}") })
    }
}

fn parse_free(arg: &str, dim_a: usize, dim_b: usize) -> Result<FreeSetJson, Failure> {
    let bad = |e: Error| Failure { code: 1, message: format!("--free {arg}: {e}") };
    let desc = match arg.split_once(':') {
        Some(("fixed", path)) => {
            let text = read(Path::new(path))?;
            let spec: ChannelSpec = serde_json::from_str(&text).map_err(|e| input(Path::new(path), e))?;
            json!({"kind": "fixed", "choi": spec})
        }
        Some(("custom", path)) => serde_json::from_str(&read(Path::new(path))?).map_err(|e| input(Path::new(path), e))?,
        _ if Path::new(arg).is_file() => serde_json::from_str(&read(Path::new(arg))?).map_err(|e| input(Path::new(arg), e))?,
        _ => json!({ "kind": arg }),
    };
    let parsed: FreeSetJson = serde_json::from_value(desc).map_err(|e| bad(e.into()))?;
    parsed.to_spec(dim_a, dim_b).map_err(bad)?;
    Ok(parsed)
}

fn run(cli: Cli) -> Result<(Report, u8), Failure> {
    match cli.command {
        Command::Bounds { pair, epsilon, r, r_cap, grid, energy, common } => {
            check_epsilon(epsilon)?;
            let t = Instant::now();
            let (n, m) = (load_channel(&pair.n)?, load_channel(&pair.m)?);
            let mut req = BoundRequest::new(n, m, epsilon);
            req.r_init = r;
            req.r_cap = r_cap;
            req.scheme = grid.into();
            req.energy = load_energy(&energy)?;
            req.solver = solver(&common)?;
            let load_s = t.elapsed().as_secs_f64();
            let t = Instant::now();
            let res = sandwich(&req)?;
            let solve_s = t.elapsed().as_secs_f64();
            let mut rep = Report::new("bounds", &common);
            let infinite = res.status == BoundStatus::InfiniteDivergence;
            rep.field("status", serde_json::to_value(res.status).expect("serializable"));
            rep.entropy("lower", res.lower);
            rep.entropy("upper", res.upper);
            rep.entropy("gap", res.gap);
            rep.field("lambda", num(res.lambda));
            rep.field("mu", num(res.mu));
            rep.field("r_used", json!(res.r_used));
            rep.matrix("witness", res.witness_rho_a.as_ref());
            rep.detail("rounds", serde_json::to_value(&res.rounds).expect("serializable"));
            rep.detail("diagnostics", serde_json::to_value(&res.diagnostics).expect("serializable"));
            rep.timing("load", load_s);
            rep.timing("solve", solve_s);
            Ok((rep, if infinite { 2 } else { 0 }))
        }
        Command::Dmax { pair, sdp, common } => {
            let t = Instant::now();
            let (n, m) = (load_channel(&pair.n)?, load_channel(&pair.m)?);
            n.same_dims(&m)?;
            let iv = interval_for_pair(&n, &m)?;
            let mut rep = Report::new("dmax", &common);
            rep.entropy("dmax", dmax(n.op(), m.op(), DMAX_TOL)?);
            rep.field("lambda", num(iv.lambda));
            rep.field("mu", num(iv.mu));
            if sdp {
                rep.entropy("dmax_sdp", dmax_sdp(n.op(), m.op(), &solver(&common)?)?);
            }
            rep.timing("total", t.elapsed().as_secs_f64());
            Ok((rep, if iv.is_finite() { 0 } else { 2 }))
        }
        Command::Resource { n, free, lambda_bar, delta_reg, epsilon, r, r_cap, grid, energy, common } => {
            check_epsilon(epsilon)?;
            let t = Instant::now();
            let g_n = load_channel(&n)?;
            let mut desc = parse_free(&free, g_n.dim_a(), g_n.dim_b())?;
            if lambda_bar.is_some() {
                desc.lambda_bar = lambda_bar;
            }
            if delta_reg.is_some() {
                desc.delta_reg = delta_reg;
            }
            let spec = desc.to_spec(g_n.dim_a(), g_n.dim_b())?;
            let mut req = FreeRequest::new(g_n, spec, epsilon);
            req.r_init = r;
            req.r_cap = r_cap;
            req.scheme = grid.into();
            req.energy = load_energy(&energy)?;
            req.solver = solver(&common)?;
            let load_s = t.elapsed().as_secs_f64();
            let t = Instant::now();
            let run = min_over_free(&req)?;
            let res = &run.result;
            let mut rep = Report::new("resource", &common);
            rep.field("status", serde_json::to_value(run.status).expect("serializable"));
            rep.field("free", serde_json::to_value(&desc).expect("serializable"));
            rep.entropy("value", res.upper);
            rep.entropy("upper", res.upper);
            rep.entropy("matching_lower", res.matching_lower);
            rep.entropy("gap", res.gap);
            rep.field("lambda_bar", num(res.lambda_bar));
            rep.field("lambda_optimizer", num(res.lambda_optimizer));
            rep.field("r_used", json!(res.r));
            rep.matrix("optimizer_choi", Some(res.optimizer_choi.op()));
            rep.detail("rounds", serde_json::to_value(&run.rounds).expect("serializable"));
            rep.detail("diagnostics", serde_json::to_value(&res.diagnostics).expect("serializable"));
            rep.timing("load", load_s);
            rep.timing("solve", t.elapsed().as_secs_f64());
            Ok((rep, 0))
        }
        Command::Oracle { pair, restarts, common } => {
            let t = Instant::now();
            let (n, m) = (load_channel(&pair.n)?, load_channel(&pair.m)?);
            let opts = BruteForceOptions { n_restarts: restarts, seed: common.seed, ..BruteForceOptions::default() };
            let res = brute_force_channel_re(&n, &m, &opts)?;
            let mut rep = Report::new("oracle", &common);
            rep.entropy("value", res.value);
            rep.field("method", serde_json::to_value(res.method).expect("serializable"));
            rep.field("converged", json!(res.converged));
            rep.field("iterations", json!(res.iterations));
            rep.field("evaluations", json!(res.evaluations));
            rep.matrix("witness", res.witness.as_ref());
            rep.timing("total", t.elapsed().as_secs_f64());
            Ok((rep, if res.value.is_finite() { 0 } else { 2 }))
        }
        Command::Examples { dir } => {
            let files = examples::emit(&dir).map_err(|e| input(&dir, e))?;
            let mut rep = Report::new("examples", &Common::quiet());
            rep.field("dir", json!(dir.display().to_string()));
            rep.field("files", json!(files));
            Ok((rep, 0))
        }
    }
}

impl Common {
    fn quiet() -> Self {
        Common { tol_gap: 1e-8, tol_feas: 1e-8, seed: 0, format: Format::Json, no_meta: true, bits: false }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok((rep, code)) => match rep.render() {
            Ok(text) => {
                print!("{text}");
                ExitCode::from(code)
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(1)
            }
        },
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
