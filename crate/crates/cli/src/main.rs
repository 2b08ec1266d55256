mod manifest;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use logsp::fiber;
use logsp::solver::{self, InitialGuess};
use logsp::{Field, Functional, GridSpec, KernelTables, Params, SolveReport, SolverConfig, SymmetryGroup};

use manifest::{unix_now, OutDir, RunManifest, RunParams};

const EXIT_USAGE: u8 = 1;
const EXIT_NONCONVERGENCE: u8 = 2;
const EXIT_VERIFY: u8 = 3;

#[derive(Parser)]
#[command(name = "logsp", version, about = "Planar Schrödinger–Poisson solver with logarithmic convolution")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute a ground state or a symmetric critical point.
    Solve(SolveArgs),
    /// Recheck a stored solution against the critical-point identities.
    Verify(VerifyArgs),
    /// Tabulate the scaling fiber t -> I(t² u(t·)) as CSV.
    FiberScan(FiberScanArgs),
    /// Solve for Dihedral(3ⁿ), n = 1..=nmax, and check the energy ladder.
    Ladder(LadderArgs),
    /// Compare the FFT log potential with direct summation.
    ConvolveTest(ConvolveArgs),
}

#[derive(Args)]
struct GridArgs {
    /// Half-width of the box [-L, L]².
    #[arg(long = "L", default_value_t = 12.0)]
    half_width: f64,
    /// Cells per side.
    #[arg(long = "N", default_value_t = 256)]
    n: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum StrategyArg {
    Fiber,
    Flow,
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long)]
    p: f64,
    #[command(flatten)]
    grid: GridArgs,
    /// none, radial, oddeven or dihedral:<k>
    #[arg(long, default_value = "none")]
    group: String,
    #[arg(long, value_enum, default_value_t = StrategyArg::Fiber)]
    strategy: StrategyArg,
    /// key = value solver settings.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct VerifyArgs {
    /// LSPF1 field file.
    file: PathBuf,
    #[arg(long)]
    p: f64,
    /// Bound on ‖I'(u)‖₂ / ‖u‖_{H¹}.
    #[arg(long, default_value_t = 1e-5)]
    grad_tol: f64,
    /// Relative bound for P and J; defaults to max(1e-3, h²).
    #[arg(long)]
    identity_tol: Option<f64>,
    /// Bound on the outer-ring potential residual relative to the mass.
    #[arg(long, default_value_t = 5e-3)]
    asymptotics_tol: f64,
}

#[derive(Args)]
struct FiberScanArgs {
    #[arg(long)]
    p: f64,
    /// Scan the fiber of exp(-|x|²/2).
    #[arg(long, conflicts_with = "input")]
    gaussian: bool,
    /// Scan the fiber of a stored field.
    #[arg(long)]
    input: Option<PathBuf>,
    #[command(flatten)]
    grid: GridArgs,
    #[arg(long, default_value_t = 1e-3)]
    t_min: f64,
    #[arg(long, default_value_t = 1e3)]
    t_max: f64,
    #[arg(long, default_value_t = 2001)]
    samples: usize,
    /// Write fiber_scan.csv and a manifest here instead of printing.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct LadderArgs {
    #[arg(long)]
    p: f64,
    #[arg(long, default_value_t = 2)]
    nmax: u32,
    #[arg(long = "L", default_value_t = 4.0)]
    half_width: f64,
    #[arg(long = "N", default_value_t = 256)]
    n: usize,
    #[arg(long, default_value_t = 1e-6)]
    slack: f64,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct ConvolveArgs {
    #[arg(long = "N", default_value_t = 32)]
    n: usize,
    #[arg(long = "L", default_value_t = 8.0)]
    half_width: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    if let Err(e) = configure_threads() {
        eprintln!("error: {e:#}");
        return ExitCode::from(EXIT_USAGE);
    }
    let outcome = match cli.command {
        Command::Solve(a) => cmd_solve(a),
        Command::Verify(a) => cmd_verify(a),
        Command::FiberScan(a) => cmd_fiber_scan(a),
        Command::Ladder(a) => cmd_ladder(a),
        Command::ConvolveTest(a) => cmd_convolve_test(a),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}

fn exit_code_for(e: &anyhow::Error) -> u8 {
    match e.downcast_ref::<logsp::Error>() {
        Some(logsp::Error::NonConvergence { .. } | logsp::Error::Collapse { .. }) => EXIT_NONCONVERGENCE,
        _ => EXIT_USAGE,
    }
}

fn configure_threads() -> Result<()> {
    let Ok(raw) = std::env::var("LOGSP_THREADS") else {
        return Ok(());
    };
    let threads: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .with_context(|| format!("LOGSP_THREADS must be a positive integer, got {raw:?}"))?;
    logsp::par::init_thread_pool(threads);
    Ok(())
}

fn parse_group(s: &str) -> Result<Option<SymmetryGroup>> {
    if s.eq_ignore_ascii_case("none") {
        return Ok(None);
    }
    Ok(Some(s.parse::<SymmetryGroup>()?))
}

fn load_config(path: Option<&Path>) -> Result<SolverConfig> {
    match path {
        Some(p) => SolverConfig::from_file(p).with_context(|| format!("reading config {}", p.display())),
        None => Ok(SolverConfig::default()),
    }
}

fn params(p: f64, half_width: f64, n: usize) -> Result<Params> {
    let grid = GridSpec::new(half_width, n)?;
    Ok(Params::new(p, grid)?)
}

fn cmd_solve(a: SolveArgs) -> Result<u8> {
    let started = unix_now();
    let params = params(a.p, a.grid.half_width, a.grid.n)?;
    let group = parse_group(&a.group)?;
    let cfg = load_config(a.config.as_deref())?;
    let report = match a.strategy {
        StrategyArg::Fiber => {
            if !params.p_ge_3() {
                bail!("--strategy fiber needs p >= 3 (got p = {}); use --strategy flow", a.p);
            }
            solver::solve_fiber_projected(params, &cfg, group)?
        }
        StrategyArg::Flow => {
            let u0 = solver::prescale(&solver::initial_field(&params, &cfg, group)?, &params)?;
            solver::solve_damped_flow(params, &cfg, group, u0)?
        }
    };

    let mut out = OutDir::create(&a.out)?;
    let report = write_solution(&mut out, report, "solution")?;
    print_summary(&report);
    out.finish(RunManifest {
        subcommand: "solve".into(),
        params: RunParams {
            p: a.p,
            half_width: a.grid.half_width,
            n: a.grid.n,
        },
        config: cfg,
        group: a.group,
        out_dir: String::new(),
        started_unix: started,
        finished_unix: 0,
        artifacts: Vec::new(),
    })?;
    if report.converged {
        Ok(0)
    } else {
        eprintln!(
            "did not converge: residual {:.3e} after {} descent and {} Newton steps",
            report.grad_residual, report.iterations, report.newton_iterations
        );
        Ok(EXIT_NONCONVERGENCE)
    }
}

/// Writes `<stem>.lspf` and `<stem>.json`.
fn write_solution(out: &mut OutDir, mut report: SolveReport, stem: &str) -> Result<SolveReport> {
    let field_name = format!("{stem}.lspf");
    let mut bytes = Vec::new();
    logsp::io::write_field(&report.field, &mut bytes)?;
    out.write(&field_name, &bytes)?;
    report.field_file = Some(field_name);
    let json = serde_json::to_string_pretty(&report)?;
    out.write(&format!("{stem}.json"), json.as_bytes())?;
    Ok(report)
}

fn print_summary(r: &SolveReport) {
    let b = &r.breakdown;
    println!("{} ({}, group {})", r.label, r.strategy, group_name(r.group));
    println!("  converged       {}", r.converged);
    println!("  I               {:.10}", b.i);
    println!("  minimax         {:.10}", r.minimax_energy);
    println!("  residual        {:.3e}", r.grad_residual);
    println!("  P/(mass+lp)     {:.3e}", b.p / (b.mass + b.lp));
    println!("  J/(kin+mass)    {:.3e}", b.j / (b.kinetic + b.mass));
    println!("  sign definite   {}", r.sign_definite);
    println!("  steps           {} descent, {} Newton", r.iterations, r.newton_iterations);
}

fn group_name(g: Option<SymmetryGroup>) -> String {
    g.map(|g| g.to_string()).unwrap_or_else(|| "none".into())
}

struct Check {
    name: &'static str,
    value: f64,
    bound: f64,
}

fn cmd_verify(a: VerifyArgs) -> Result<u8> {
    let u = logsp::io::load_field(&a.file).with_context(|| format!("reading {}", a.file.display()))?;
    if u.is_zero() {
        bail!("{} holds the zero field; verification needs a nontrivial solution", a.file.display());
    }
    let params = Params::new(a.p, *u.grid())?;
    let f = Functional::new(params);
    let s = f.state(u)?;
    let g = f.gradient(&s);
    let residual = f.residual(&s, &g);
    let b = f.breakdown(&s)?;
    let asym = f.tables().potential_asymptotics_residual(&s.u)?;
    let h = s.u.grid().spacing();
    let identity_tol = a.identity_tol.unwrap_or((h * h).max(1e-3));

    let checks = [
        Check {
            name: "gradient residual",
            value: residual,
            bound: a.grad_tol,
        },
        Check {
            name: "|P|/(mass+lp)",
            value: b.p.abs() / (b.mass + b.lp),
            bound: identity_tol,
        },
        Check {
            name: "|J|/(kinetic+mass)",
            value: b.j.abs() / (b.kinetic + b.mass),
            bound: identity_tol,
        },
        Check {
            name: "asymptotics/mass",
            value: asym / b.mass,
            bound: a.asymptotics_tol,
        },
    ];
    println!("I = {:.10}  (p = {}, L = {}, N = {})", b.i, a.p, s.u.grid().half_width(), s.u.grid().n());
    println!("{:<22} {:>12} {:>12}  result", "check", "value", "bound");
    let mut all = true;
    for c in &checks {
        let ok = c.value <= c.bound;
        all &= ok;
        println!(
            "{:<22} {:>12.3e} {:>12.3e}  {}",
            c.name,
            c.value,
            c.bound,
            if ok { "pass" } else { "FAIL" }
        );
    }
    Ok(if all { 0 } else { EXIT_VERIFY })
}

fn cmd_fiber_scan(a: FiberScanArgs) -> Result<u8> {
    let started = unix_now();
    let u = match (&a.input, a.gaussian) {
        (Some(path), _) => logsp::io::load_field(path).with_context(|| format!("reading {}", path.display()))?,
        (None, true) => {
            InitialGuess::gaussian(std::f64::consts::SQRT_2, 1.0).build(GridSpec::new(a.grid.half_width, a.grid.n)?, 0)?
        }
        (None, false) => bail!("pass --gaussian or --input <file>"),
    };
    let params = Params::new(a.p, *u.grid())?;
    let m = fiber::moments(&u, &params)?;
    let scan = fiber::fiber_scan(&m, a.t_min, a.t_max, a.samples)?;
    let csv = scan.to_csv();
    eprintln!("sign changes of h': {}", scan.brackets.len());
    match a.out {
        Some(dir) => {
            let mut out = OutDir::create(&dir)?;
            out.write("fiber_scan.csv", csv.as_bytes())?;
            out.finish(RunManifest {
                subcommand: "fiber-scan".into(),
                params: RunParams {
                    p: a.p,
                    half_width: u.grid().half_width(),
                    n: u.grid().n(),
                },
                config: SolverConfig::default(),
                group: "none".into(),
                out_dir: String::new(),
                started_unix: started,
                finished_unix: 0,
                artifacts: Vec::new(),
            })?;
        }
        None => {
            // a closed pipe (e.g. `| head`) is not an error for a data dump
            let _ = std::io::stdout().lock().write_all(csv.as_bytes());
        }
    }
    Ok(0)
}

fn cmd_ladder(a: LadderArgs) -> Result<u8> {
    let started = unix_now();
    let params = params(a.p, a.half_width, a.n)?;
    let cfg = load_config(a.config.as_deref())?;
    let reports = solver::dihedral_ladder(params, &cfg, a.nmax)?;

    let mut out = OutDir::create(&a.out)?;
    println!("{:<14} {:>18} {:>11} {:>11} {:>10}", "group", "I", "residual", "radial", "signs");
    let mut written = Vec::with_capacity(reports.len());
    for (level, r) in reports.into_iter().enumerate() {
        let r = write_solution(&mut out, r, &format!("ladder_{}", level + 1))?;
        let radial = logsp::symmetry::invariance_residual(&r.field, SymmetryGroup::Radial);
        let both = r.sign_change.as_ref().is_some_and(|c| c.both_signs);
        println!(
            "{:<14} {:>18.9} {:>11.3e} {:>11.3e} {:>10}",
            group_name(r.group),
            r.energy(),
            r.grad_residual,
            radial,
            if both { "both" } else { "one" }
        );
        written.push(r);
    }
    let violations = solver::ladder_violations(&written, a.slack);
    for v in &violations {
        eprintln!("violation: {v}");
    }
    out.finish(RunManifest {
        subcommand: "ladder".into(),
        params: RunParams {
            p: a.p,
            half_width: a.half_width,
            n: a.n,
        },
        config: cfg,
        group: format!("dihedral:3^1..3^{}", a.nmax),
        out_dir: String::new(),
        started_unix: started,
        finished_unix: 0,
        artifacts: Vec::new(),
    })?;
    Ok(if violations.is_empty() { 0 } else { EXIT_VERIFY })
}

fn cmd_convolve_test(a: ConvolveArgs) -> Result<u8> {
    if a.n > 64 {
        bail!("convolve-test runs an O(N⁴) direct sum and caps N at 64 (got {})", a.n);
    }
    let grid = GridSpec::new(a.half_width, a.n)?;
    let guess = InitialGuess::Noise {
        width: a.half_width / 4.0,
        amplitude: 1.0,
        offset: (0.5, -0.25),
        noise: 0.2,
    };
    let u: Field = guess.build(grid, a.seed)?;
    let tables = KernelTables::new(grid);
    let fast = tables.log_potential(&u)?;
    let direct = tables.direct_log_potential(&u)?;
    let dev = fast
        .values()
        .iter()
        .zip(direct.values())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max);
    println!("N = {}, L = {}: max |fast - direct| = {dev:.3e} (tolerance {:.1e})", a.n, a.half_width, a.tol);
    Ok(if dev <= a.tol { 0 } else { EXIT_VERIFY })
}
