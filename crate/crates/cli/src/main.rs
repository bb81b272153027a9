use clap::{Args, Parser, Subcommand};
use kpz_ldp::curve::{RateCurve, RatePoint};
use kpz_ldp::deviation::{ell, integral_r, solve_r, InstantonProfile};
use kpz_ldp::geodesic::{direct_minimize, geodesic_with, path_energy, DiscretePath};
use kpz_ldp::grid::{Potential, ScalarField};
use kpz_ldp::optimizer::{deep_tail_scaled_value, minimize_rate, OptimizationOutcome, OptimizerConfig, Source, Tail};
use kpz_ldp::pde::{HeatPotentialSolver, SolverConfig};
use kpz_ldp::rate::{phi_asymptotic, phi_exact_with, PhiConfig, Regime};
use kpz_ldp::selftest::{run_criterion, CRITERIA};
use kpz_ldp::she::{estimate_tail, write_tail_csv, SheConfig, TailEstimate, TiltPolicy};
use serde_json::{json, Value};
use settings::{Real, Settings};
use std::f64::consts::PI;
use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use svg::{Plot, Style};

mod settings;
mod svg;

/// Short-time KPZ large deviations from the command line.
#[derive(Parser)]
#[command(name = "kpz-ldp", version)]
struct Cli {
    /// Write JSON records instead of CSV.
    #[arg(long, global = true)]
    json: bool,
    /// Output file for the main table (stdout by default).
    #[arg(long, short, global = true)]
    out: Option<PathBuf>,
    /// Also write an 800×600 SVG figure here.
    #[arg(long, global = true)]
    svg: Option<PathBuf>,
    /// `key = value` file; flags override its entries.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true, env = "KPZ_LDP_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sweep Φ(λ) with the exact formula and the asymptotic laws.
    Phi(PhiArgs),
    /// Dump r, ℓ and ρ*, or check their integrals.
    Instanton(InstantonArgs),
    /// Closed-form or descended geodesic to (t, x), or the αℓ family.
    Geodesic(GeodesicArgs),
    /// Solve the heat equation with potential for a stored field.
    Solve(SolveArgs),
    /// Minimize ½‖ρ‖² under the one-point constraint.
    Optimize(OptimizeArgs),
    /// Importance-sampled SHE tail probabilities.
    Simulate(SimulateArgs),
    /// Run the acceptance criteria.
    Selftest(SelftestArgs),
}

#[derive(Args)]
struct GridArgs {
    #[arg(long)]
    nt: Option<usize>,
    #[arg(long)]
    nx: Option<usize>,
    /// Spatial half-width.
    #[arg(long = "L")]
    half_width: Option<f64>,
    #[arg(long)]
    t0: Option<Real>,
    #[arg(long)]
    theta: Option<f64>,
    #[arg(long)]
    grading: Option<u32>,
}

#[derive(Args)]
struct PhiArgs {
    #[arg(long, allow_hyphen_values = true)]
    from: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    to: Option<f64>,
    #[arg(long)]
    step: Option<f64>,
    /// Comma list of exact, quadratic, five-halves, three-halves, or `all`.
    #[arg(long)]
    methods: Option<String>,
    /// Exponent on −log(−z) in the above-critical branch.
    #[arg(long)]
    log_exponent: Option<f64>,
}

#[derive(Args)]
struct InstantonArgs {
    /// Print the ∫r and ½‖ρ*‖² residuals instead of the profile.
    #[arg(long)]
    check: bool,
    /// Also write ρ* sampled on the grid (CSV, or binary for `.bin`).
    #[arg(long)]
    field: Option<PathBuf>,
    #[command(flatten)]
    grid: GridArgs,
}

#[derive(Args)]
struct GeodesicArgs {
    #[arg(long)]
    t: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    x: Option<f64>,
    /// Energies and paths of αℓ on [0, 2] for α in steps of 0.25.
    #[arg(long)]
    family: bool,
    /// Minimize the discrete energy instead of using the closed form.
    #[arg(long)]
    descent: bool,
    #[arg(long)]
    nodes: Option<usize>,
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct SolveArgs {
    /// Deviation field (CSV, or binary for `.bin`).
    #[arg(long)]
    field: Option<PathBuf>,
    /// Solve the λ-scaled equation.
    #[arg(long)]
    scaled: Option<f64>,
    /// Write W on the solver grid here.
    #[arg(long)]
    solution: Option<PathBuf>,
    #[command(flatten)]
    grid: GridArgs,
}

#[derive(Args)]
struct OptimizeArgs {
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    tail: Option<Tail>,
    /// The λ-scaled problem h_λ(ρ;2,0) = −1, reported as λ^{−5/2}Φ(−λ).
    #[arg(long)]
    deep: bool,
    /// Write ρ_opt here (CSV, or binary for `.bin`).
    #[arg(long)]
    field: Option<PathBuf>,
    #[arg(long)]
    max_outer: Option<usize>,
    #[arg(long)]
    max_inner: Option<usize>,
    #[command(flatten)]
    grid: GridArgs,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    eps: Option<f64>,
    /// One λ or a comma list.
    #[arg(long)]
    lambda: Option<String>,
    #[arg(long)]
    tail: Option<Tail>,
    #[arg(long)]
    samples: Option<usize>,
    /// none or instanton.
    #[arg(long)]
    tilt: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    dx: Option<Real>,
    #[arg(long)]
    dt: Option<Real>,
    #[arg(long = "L")]
    half_width: Option<f64>,
    #[arg(long)]
    t0: Option<Real>,
}

#[derive(Args)]
struct SelftestArgs {
    /// Comma list of criterion numbers (default: all).
    #[arg(long)]
    criteria: Option<String>,
}

/// An error with the exit status it maps to.
#[derive(Debug)]
pub struct CliError {
    code: u8,
    msg: String,
}

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        CliError { code: 2, msg: msg.into() }
    }

    fn numeric(msg: impl Into<String>) -> Self {
        CliError { code: 3, msg: msg.into() }
    }
}

impl From<kpz_ldp::Error> for CliError {
    fn from(e: kpz_ldp::Error) -> Self {
        match e {
            kpz_ldp::Error::Numeric(_) => CliError::numeric(e.to_string()),
            _ => CliError::usage(e.to_string()),
        }
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::usage(e.to_string())
    }
}

type Res<T> = Result<T, CliError>;

struct Sink {
    out: Option<PathBuf>,
    json: bool,
    svg: Option<PathBuf>,
}

impl Sink {
    fn writer(&self) -> Res<Box<dyn Write>> {
        Ok(match &self.out {
            Some(p) => {
                Box::new(BufWriter::new(File::create(p).map_err(|e| CliError::usage(format!("{}: {e}", p.display())))?))
            }
            None => Box::new(BufWriter::new(io::stdout().lock())),
        })
    }

    /// The CSV writer's output, or `records` as a JSON array.
    fn table(&self, csv: impl FnOnce(&mut dyn Write) -> kpz_ldp::Result<()>, records: Vec<Value>) -> Res<()> {
        let mut w = self.writer()?;
        if self.json {
            serde_json::to_writer_pretty(&mut w, &Value::Array(records)).map_err(|e| CliError::usage(e.to_string()))?;
            writeln!(w)?;
        } else {
            csv(&mut w)?;
        }
        w.flush()?;
        Ok(())
    }

    fn plot(&self, plot: impl FnOnce() -> Plot) -> Res<()> {
        if let Some(p) = &self.svg {
            std::fs::write(p, plot().render()).map_err(|e| CliError::usage(format!("{}: {e}", p.display())))?;
        }
        Ok(())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.msg);
            ExitCode::from(e.code)
        }
    }
}

fn run(cli: Cli) -> Res<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::usage("threads must be positive"));
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| CliError::usage(e.to_string()))?;
    }
    let settings = Settings::load(cli.config.as_deref())?;
    let sink = Sink { out: cli.out, json: cli.json, svg: cli.svg };
    match cli.command {
        Command::Phi(a) => phi(a, &settings, &sink),
        Command::Instanton(a) => instanton(a, &settings, &sink),
        Command::Geodesic(a) => geodesic_cmd(a, &settings, &sink),
        Command::Solve(a) => solve(a, &settings, &sink),
        Command::Optimize(a) => optimize(a, &settings, &sink),
        Command::Simulate(a) => simulate(a, &settings, &sink),
        Command::Selftest(a) => selftest(a, &settings, &sink),
    }
}

fn positive(name: &str, v: f64) -> Res<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(CliError::usage(format!("{name} must be positive, got {v}")))
    }
}

fn solver_config(g: GridArgs, s: &Settings, base: SolverConfig) -> Res<SolverConfig> {
    let cfg = SolverConfig {
        nt: s.pick("nt", g.nt, base.nt)?,
        nx: s.pick("nx", g.nx, base.nx)?,
        half_width: s.pick("L", g.half_width, base.half_width)?,
        t0: s.pick("t0", g.t0, Real(base.t0))?.0,
        theta: s.pick("theta", g.theta, base.theta)?,
        grading: s.pick("grading", g.grading, base.grading)?,
    };
    cfg.validate()?;
    Ok(cfg)
}

fn read_field(path: &Path) -> Res<ScalarField> {
    let f = File::open(path).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
    let r = BufReader::new(f);
    Ok(if path.extension().is_some_and(|e| e == "bin") {
        ScalarField::read_binary(r)?
    } else {
        ScalarField::read_csv(r)?
    })
}

fn write_field(path: &Path, field: &ScalarField) -> Res<()> {
    let f = File::create(path).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
    let mut w = BufWriter::new(f);
    if path.extension().is_some_and(|e| e == "bin") {
        field.write_binary(&mut w)?;
    } else {
        field.write_csv(&mut w)?;
    }
    w.flush()?;
    Ok(())
}

fn point_record(p: &RatePoint) -> Value {
    json!({
        "lambda": p.lambda, "tail": p.tail, "method": p.method, "rate": finite(p.rate),
        "constraint": finite(p.constraint), "converged": p.converged, "iterations": p.iterations,
    })
}

// JSON has no NaN; missing values become null.
fn finite(v: f64) -> Value {
    if v.is_finite() {
        json!(v)
    } else {
        Value::Null
    }
}

fn phi(a: PhiArgs, s: &Settings, sink: &Sink) -> Res<()> {
    let from = s.pick("from", a.from, -2.0)?;
    let to = s.pick("to", a.to, 2.0)?;
    let step = positive("step", s.pick("step", a.step, 0.1)?)?;
    let methods = s.pick("methods", a.methods, "exact".to_string())?;
    let cfg = PhiConfig { log_exponent: positive("log_exponent", s.pick("log_exponent", a.log_exponent, 1.5)?)? };
    s.finish()?;
    if !(from.is_finite() && to.is_finite() && to >= from) {
        return Err(CliError::usage(format!("need from ≤ to, got {from} and {to}")));
    }
    let n = ((to - from) / step + 1e-9).floor() as usize + 1;
    if n > 1_000_000 {
        return Err(CliError::usage(format!("{n} points is too many")));
    }
    let wanted: Vec<&str> = if methods == "all" {
        vec!["exact", "quadratic", "five-halves", "three-halves"]
    } else {
        methods.split(',').map(str::trim).collect()
    };
    for m in &wanted {
        if !["exact", "quadratic", "five-halves", "three-halves"].contains(m) {
            return Err(CliError::usage(format!("unknown method {m:?}")));
        }
    }
    let mut curve = RateCurve::default();
    for k in 0..n {
        let mut lambda = from + k as f64 * step;
        if lambda.abs() < 1e-9 * step {
            lambda = 0.0;
        }
        let tail = if lambda < 0.0 { Tail::Lower } else { Tail::Upper };
        for m in &wanted {
            let rate = match *m {
                "exact" => Some(phi_exact_with(lambda, cfg)?.value),
                "quadratic" => phi_asymptotic(lambda, Regime::Quadratic).ok(),
                "five-halves" => phi_asymptotic(lambda, Regime::LowerFiveHalves).ok(),
                _ => phi_asymptotic(lambda, Regime::UpperThreeHalves).ok(),
            };
            if let Some(rate) = rate {
                curve.push(RatePoint {
                    lambda: lambda.abs(),
                    tail,
                    method: m.to_string(),
                    rate,
                    constraint: f64::NAN,
                    converged: true,
                    iterations: 0,
                });
            }
        }
    }
    sink.table(|w| curve.write_csv(w), curve.points.iter().map(point_record).collect())?;
    sink.plot(|| {
        let mut p = Plot::new("Φ(λ)", "λ", "Φ");
        for m in &wanted {
            let pts =
                curve.points.iter().filter(|q| q.method == *m).map(|q| (q.tail.sign() * q.lambda, q.rate)).collect();
            p.add(*m, pts, if *m == "exact" { Style::Line } else { Style::Scatter });
        }
        p
    })
}

fn instanton(a: InstantonArgs, s: &Settings, sink: &Sink) -> Res<()> {
    let cfg = solver_config(a.grid, s, SolverConfig::default())?;
    s.finish()?;
    if a.check {
        let ir = integral_r()?;
        let half = 0.5 * InstantonProfile::new().norm_sq_quadrature()?;
        let rows = [("integral_r", ir, 2.0 * PI, 1e-5), ("half_norm_sq", half, 4.0 / (15.0 * PI), 1e-4)];
        let records = rows
            .iter()
            .map(|(n, v, t, tol)| json!({"quantity": n, "value": v, "target": t, "residual": v - t, "pass": (v - t).abs() <= *tol}))
            .collect();
        sink.table(
            |w| {
                writeln!(w, "# kpz-ldp instanton-check v1")?;
                writeln!(w, "quantity,value,target,residual,pass")?;
                for (n, v, t, tol) in rows {
                    writeln!(w, "{n},{v},{t},{:e},{}", v - t, (v - t).abs() <= tol)?;
                }
                Ok(())
            },
            records,
        )?;
        if rows.iter().any(|(_, v, t, tol)| (v - t).abs() > *tol) {
            return Err(CliError::numeric("instanton integrals outside tolerance"));
        }
        return Ok(());
    }
    let solver = HeatPotentialSolver::standard(&cfg)?;
    let grid = solver.grid();
    let profile: Vec<(f64, f64, f64)> = grid
        .times()
        .iter()
        .filter(|&&t| t > 0.0 && t < 2.0)
        .map(|&t| Ok((t, solve_r(t)?, ell(t))))
        .collect::<kpz_ldp::Result<_>>()?;
    let records = profile.iter().map(|(t, r, l)| json!({"t": t, "r": r, "ell": l})).collect();
    sink.table(
        |w| {
            writeln!(w, "# kpz-ldp instanton-profile v1")?;
            writeln!(w, "t,r,ell")?;
            for (t, r, l) in &profile {
                writeln!(w, "{t},{r},{l}")?;
            }
            Ok(())
        },
        records,
    )?;
    if let Some(path) = &a.field {
        write_field(path, &InstantonProfile::new().sample(grid))?;
    }
    sink.plot(|| {
        let mut p = Plot::new("instanton profile", "t", "value");
        p.add("ℓ(t)", profile.iter().map(|v| (v.0, v.2)).collect(), Style::Line);
        p.add("r(t)/10", profile.iter().map(|v| (v.0, v.1 / 10.0)).collect(), Style::Line);
        p
    })
}

fn geodesic_cmd(a: GeodesicArgs, s: &Settings, sink: &Sink) -> Res<()> {
    let nodes = s.pick("nodes", a.nodes, 1025usize)?;
    if nodes < 16 {
        return Err(CliError::usage("nodes must be at least 16"));
    }
    if a.family {
        s.finish()?;
        let alphas: Vec<f64> = (-4..=4).map(|k| k as f64 / 4.0).collect();
        let paths: Vec<(f64, DiscretePath)> = alphas
            .iter()
            .map(|&al| Ok((al, DiscretePath::family_member(al, 2.0, nodes)?)))
            .collect::<kpz_ldp::Result<_>>()?;
        let rows: Vec<(f64, f64)> = paths.iter().map(|(al, p)| (*al, path_energy(p))).collect();
        sink.table(
            |w| {
                writeln!(w, "# kpz-ldp geodesic-family v1: energy of αℓ on [0, 2]")?;
                writeln!(w, "alpha,energy")?;
                for (al, e) in &rows {
                    writeln!(w, "{al},{e}")?;
                }
                Ok(())
            },
            rows.iter().map(|(al, e)| json!({"alpha": al, "energy": e})).collect(),
        )?;
        return sink.plot(|| {
            let mut p = Plot::new("geodesics αℓ(s) ending at (2, 0)", "s", "γ(s)");
            for (al, path) in &paths {
                p.add(
                    format!("α = {al}"),
                    path.times().iter().copied().zip(path.positions().iter().copied()).collect(),
                    Style::Line,
                );
            }
            p
        });
    }
    let t = s.pick("t", a.t, 2.0)?;
    let x = s.pick("x", a.x, 0.0)?;
    let (path, energy, note) = if a.descent {
        let iterations = s.pick("iterations", a.iterations, 2000usize)?;
        let seed = s.pick("seed", a.seed, 1u64)?;
        s.finish()?;
        let d = direct_minimize(t, x, nodes, iterations, seed)?;
        if !d.converged {
            eprintln!("descent stopped after {} iterations without meeting its tolerance", d.iterations);
        }
        (d.path, d.energy, format!("descent, {} iterations", d.iterations))
    } else {
        s.finish()?;
        let g = geodesic_with(t, x, nodes)?;
        (g.path, g.energy, format!("{:?}, nonunique = {}", g.classification, g.nonunique))
    };
    eprintln!("geodesic to ({t}, {x}): energy {energy:.8}, h* = {:.8} ({note})", -energy);
    let records = path.times().iter().zip(path.positions()).map(|(s, g)| json!({"s": s, "gamma": g})).collect();
    sink.table(|w| path.write_csv(w), records)?;
    sink.plot(|| {
        let mut p = Plot::new(&format!("geodesic to ({t}, {x})"), "s", "γ(s)");
        p.add("γ", path.times().iter().copied().zip(path.positions().iter().copied()).collect(), Style::Line);
        let ls: Vec<(f64, f64)> = path.times().iter().map(|&u| (u, ell(u))).collect();
        p.add("ℓ", ls.clone(), Style::Line);
        p.add("−ℓ", ls.iter().map(|&(u, l)| (u, -l)).collect(), Style::Line);
        p
    })
}

fn solve(a: SolveArgs, s: &Settings, sink: &Sink) -> Res<()> {
    let field_path: Option<PathBuf> = s.pick_opt("field", a.field)?;
    let scaled = s.pick_opt("scaled", a.scaled)?;
    let base = if scaled.is_some() { SolverConfig::deep_tail() } else { SolverConfig::default() };
    let cfg = solver_config(a.grid, s, base)?;
    s.finish()?;
    let path = field_path.ok_or_else(|| CliError::usage("solve needs --field"))?;
    let rho = read_field(&path)?;
    let solver = match scaled {
        Some(l) => HeatPotentialSolver::scaled(&cfg, l)?,
        None => HeatPotentialSolver::standard(&cfg)?,
    };
    let res = solver.solve(&rho)?;
    let d = &res.diagnostics;
    let (h, ratio) = (res.h(), res.ratio());
    sink.table(
        |w| {
            writeln!(w, "# kpz-ldp solve v1")?;
            writeln!(w, "h,ratio,boundary_flux,boundary_warning,negative_nodes,support_clipped")?;
            writeln!(
                w,
                "{h},{ratio},{:e},{},{},{}",
                d.boundary_flux, d.boundary_warning, d.negative_nodes, d.support_clipped
            )?;
            Ok(())
        },
        vec![json!({
            "h": h, "ratio": ratio, "boundary_flux": d.boundary_flux, "boundary_warning": d.boundary_warning,
            "negative_nodes": d.negative_nodes, "support_clipped": d.support_clipped,
        })],
    )?;
    if d.boundary_warning {
        eprintln!("warning: boundary flux {:.2e}; enlarge L", d.boundary_flux);
    }
    if let Some(p) = &a.solution {
        write_field(p, &res.z_field)?;
    }
    sink.plot(|| {
        let mut p = Plot::new("solution at t = 2", "x", "W(2, x)");
        let xs = solver.grid().xs();
        p.add("W", xs.iter().map(|&x| (x, res.z_field.value(2.0, x))).collect(), Style::Line);
        p
    })
}

fn optimize(a: OptimizeArgs, s: &Settings, sink: &Sink) -> Res<()> {
    let lambda = positive("lambda", s.pick("lambda", a.lambda, 0.1)?)?;
    let tail = s.pick("tail", a.tail, Tail::Lower)?;
    let deep = a.deep || s.pick("deep", None, false)?;
    let base = if deep { SolverConfig::deep_tail() } else { SolverConfig::default() };
    let cfg = solver_config(a.grid, s, base)?;
    let d = OptimizerConfig::default();
    let ocfg = OptimizerConfig {
        max_outer: s.pick("max_outer", a.max_outer, d.max_outer)?,
        max_inner: s.pick("max_inner", a.max_inner, d.max_inner)?,
        ..d
    };
    s.finish()?;
    if deep && tail != Tail::Lower {
        return Err(CliError::usage("--deep is a lower-tail problem"));
    }
    let out: OptimizationOutcome =
        if deep { deep_tail_scaled_value(lambda, &cfg, &ocfg)? } else { minimize_rate(lambda, tail, &cfg, &ocfg)? };
    let point = RatePoint {
        lambda,
        tail,
        method: match (deep, out.source) {
            (true, _) => "optimizer-scaled".into(),
            (false, Source::Candidate) => "candidate".into(),
            (false, Source::Optimizer) => "optimizer".into(),
        },
        rate: out.rate_value,
        constraint: out.constraint_value,
        converged: out.converged,
        iterations: out.iterations,
    };
    eprintln!(
        "rate {:.8} ({:?}; optimizer {:.8}, candidate {:.8}), h {:.6}, μ {:.6}, stationarity {:.2e}",
        out.rate_value,
        out.source,
        out.optimizer_rate,
        out.candidate_rate,
        out.constraint_value,
        out.multiplier,
        out.stationarity
    );
    let curve = RateCurve { points: vec![point] };
    sink.table(|w| curve.write_csv(w), curve.points.iter().map(point_record).collect())?;
    if let Some(p) = &a.field {
        write_field(p, &out.rho_opt)?;
    }
    sink.plot(|| {
        let mut p = Plot::new("ρ_opt(1, x)", "x", "ρ");
        let xs = out.rho_opt.grid().xs();
        p.add("ρ_opt", xs.iter().map(|&x| (x, out.rho_opt.value(1.0, x))).collect(), Style::Line);
        p
    })?;
    if !out.converged {
        return Err(CliError::numeric("optimizer did not converge; the table reports the best bound"));
    }
    Ok(())
}

fn tail_record(e: &TailEstimate) -> Value {
    json!({
        "epsilon": e.epsilon, "lambda": e.lambda, "tail": e.tail, "n": e.probability.samples,
        "prob": e.probability.mean, "stderr": e.probability.stderr, "log_rate": finite(e.log_rate),
        "ess": e.ess, "flags": e.flags(),
    })
}

fn simulate(a: SimulateArgs, s: &Settings, sink: &Sink) -> Res<()> {
    let eps = s.pick("eps", a.eps, 0.05)?;
    let lambdas = s.pick("lambda", a.lambda, "0.5".to_string())?;
    let tail = s.pick("tail", a.tail, Tail::Lower)?;
    let samples = s.pick("samples", a.samples, 10_000usize)?;
    let tilt = s.pick("tilt", a.tilt, "instanton".to_string())?;
    let seed = s.pick("seed", a.seed, 1u64)?;
    let d = SheConfig::default();
    let cfg = SheConfig {
        half_width: s.pick("L", a.half_width, d.half_width)?,
        dx: s.pick("dx", a.dx, Real(d.dx))?.0,
        t0: s.pick("t0", a.t0, Real(d.t0))?.0,
        dt: s.pick("dt", a.dt, Real(d.dt))?.0,
    };
    s.finish()?;
    cfg.validate()?;
    let policy = match tilt.as_str() {
        "none" => TiltPolicy::None,
        "instanton" => TiltPolicy::Instanton,
        t => return Err(CliError::usage(format!("tilt must be none or instanton, got {t:?}"))),
    };
    let lambdas: Vec<f64> = lambdas
        .split(',')
        .map(|v| v.trim().parse::<f64>().map_err(|e| CliError::usage(format!("lambda {v:?}: {e}"))))
        .collect::<Res<_>>()?;
    let rows: Vec<TailEstimate> = lambdas
        .iter()
        .map(|&l| estimate_tail(eps, l, tail, samples, &policy, seed, &cfg))
        .collect::<kpz_ldp::Result<_>>()?;
    for r in rows.iter().filter(|r| r.low_confidence) {
        eprintln!("warning: λ = {}: effective sample size {:.1}", r.lambda, r.ess);
    }
    sink.table(|w| write_tail_csv(w, &rows), rows.iter().map(tail_record).collect())?;
    sink.plot(|| {
        let mut p = Plot::new(&format!("−ε log P, ε = {eps}"), "λ", "rate");
        p.add("SHE estimate", rows.iter().map(|r| (r.lambda, r.log_rate)).collect(), Style::Scatter);
        let exact = rows
            .iter()
            .filter_map(|r| {
                phi_exact_with(tail.sign() * r.lambda, PhiConfig::default()).ok().map(|e| (r.lambda, e.value))
            })
            .collect();
        p.add("Φ exact", exact, Style::Line);
        p
    })
}

fn selftest(a: SelftestArgs, s: &Settings, sink: &Sink) -> Res<()> {
    let list = s.pick_opt("criteria", a.criteria)?;
    s.finish()?;
    let ids: Vec<u8> = match list {
        Some(l) => l
            .split(',')
            .map(|v| {
                v.trim()
                    .parse::<u8>()
                    .ok()
                    .filter(|id| CRITERIA.iter().any(|c| c.0 == *id))
                    .ok_or_else(|| CliError::usage(format!("no criterion {v:?}")))
            })
            .collect::<Res<_>>()?,
        None => CRITERIA.iter().map(|c| c.0).collect(),
    };
    let mut reports = Vec::new();
    for id in ids {
        let r = run_criterion(id);
        if !sink.json {
            eprint!("{r}");
        }
        reports.push(r);
    }
    let failed: Vec<u8> = reports.iter().filter(|r| !r.passed()).map(|r| r.id).collect();
    sink.table(
        |w| {
            writeln!(w, "# kpz-ldp selftest v1")?;
            writeln!(w, "criterion,title,passed")?;
            for r in &reports {
                writeln!(w, "{},{},{}", r.id, r.title, r.passed())?;
            }
            Ok(())
        },
        reports.iter().map(|r| serde_json::to_value(r).unwrap_or(Value::Null)).collect(),
    )?;
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::numeric(format!("criteria failed: {failed:?}")))
    }
}
