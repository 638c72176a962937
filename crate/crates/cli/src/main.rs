//! `hypersub`: calibrated subactions, shadowing and verification from the
//! command line. Outputs are CSV and JSON files for external plotting.

mod config;

use clap::{Args, Parser, Subcommand};
use config::{CPolicy, PhibarPolicy, SolveConfig};
use hypersub::charts::{self, ChartFamily, HyperbolicConstants};
use hypersub::laxoleinik::{self, Grid, LaxOleinikProblem};
use hypersub::shadowing::{self, PeriodicOptions, PseudoOrbit, ShadowOptions};
use hypersub::systems::{self, DynamicalSystem, Point};
use hypersub::{orbits, verify, Error};
use serde::Serialize;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Parser)]
#[command(name = "hypersub", version, about = "Lipschitz subactions and shadowing for hyperbolic toy systems")]
struct Cli {
    /// Worker threads for the parallel kernels (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve T[u] = u on a grid and check the subaction inequality.
    Solve(SolveArgs),
    /// Shadow a generated or loaded pseudo-orbit.
    Shadow(ShadowArgs),
    /// List the periodic points of the cat map with period dividing n.
    Periodic(PeriodicArgs),
    /// Estimate the ergodic minimizing value of an observable.
    Ebar(EbarArgs),
    /// Local unstable manifold by iterated graph transforms.
    Manifold(ManifoldArgs),
    /// Run the acceptance checks.
    Verify(VerifyArgs),
}

#[derive(Args)]
struct SolveArgs {
    /// JSON config; flags override its keys.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    system: Option<String>,
    #[arg(long)]
    observable: Option<String>,
    /// Lattice size q on the torus.
    #[arg(long, alias = "grid_q", alias = "grid-q")]
    grid: Option<usize>,
    /// Word depth on the shift.
    #[arg(long)]
    depth: Option<usize>,
    /// Distortion constant: a number or `auto`.
    #[arg(long = "C")]
    c: Option<String>,
    /// A number, `auto:karp` or `auto:periodic:P`.
    #[arg(long)]
    phibar: Option<String>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long, alias = "max_iter")]
    max_iter: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// CSV of the returned u.
    #[arg(long)]
    out: Option<PathBuf>,
    /// JSON solve report.
    #[arg(long)]
    json: Option<PathBuf>,
    /// Also write a gnuplot script next to the CSV.
    #[arg(long)]
    gnuplot: bool,
}

#[derive(Args)]
struct ShadowArgs {
    #[arg(long, default_value = "cat")]
    system: String,
    #[arg(long, default_value_t = 200)]
    len: usize,
    #[arg(long, default_value_t = 1e-4)]
    noise: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Starting point `x1,x2`; drawn from the seed when absent.
    #[arg(long)]
    x0: Option<String>,
    /// Load the pseudo-orbit from CSV instead of generating it.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Close the pseudo-orbit into a loop and look for a periodic shadow.
    #[arg(long)]
    periodic: bool,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    json: Option<PathBuf>,
    #[arg(long)]
    gnuplot: bool,
}

#[derive(Args)]
struct PeriodicArgs {
    #[arg(long, default_value = "cat")]
    system: String,
    /// Period (points of period dividing n are listed).
    #[arg(long, short)]
    n: usize,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args)]
struct EbarArgs {
    #[arg(long)]
    system: String,
    #[arg(long)]
    observable: String,
    /// `karp`, `periodic:P` or `sweep:n`.
    #[arg(long, default_value = "auto")]
    method: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args)]
struct ManifoldArgs {
    #[arg(long, default_value = "pcat:1e-3:1")]
    system: String,
    /// Base point `x1,x2`.
    #[arg(long, default_value = "0.3,0.6")]
    point: String,
    /// Number of graph transforms.
    #[arg(long, default_value_t = 60)]
    len: usize,
    #[arg(long, default_value_t = 32)]
    nodes: usize,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    json: Option<PathBuf>,
    #[arg(long)]
    gnuplot: bool,
}

#[derive(Args)]
struct VerifyArgs {
    /// Criterion number or a substring of the check anchor.
    #[arg(long)]
    only: Option<String>,
    #[arg(long)]
    json: Option<PathBuf>,
}

/// A failure with its exit code and a one-line machine-readable message.
#[derive(Debug)]
pub struct Failure {
    code: u8,
    kind: &'static str,
    message: String,
}

impl Failure {
    pub fn config(message: impl Into<String>) -> Self {
        Failure { code: 1, kind: "config", message: message.into() }
    }

    fn violation(kind: &'static str, message: impl Into<String>) -> Self {
        Failure { code: 2, kind, message: message.into() }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let (code, kind) = match &e {
            Error::InvalidArgument(_) => (1, "invalid-argument"),
            Error::UnknownSystem(_) => (1, "unknown-system"),
            Error::UnknownObservable(_) => (1, "unknown-observable"),
            Error::Divergence { .. } => (2, "divergence"),
            Error::InfeasibleConstants { .. } => (3, "infeasible-constants"),
            Error::LeavesDomain { .. } => (3, "leaves-domain"),
            Error::RootFinding(_) => (3, "root-finding"),
            Error::Growth { .. } => (3, "growth"),
            Error::MaxIterations(_) => (3, "max-iterations"),
            Error::Overflow(_) => (3, "overflow"),
        };
        Failure { code, kind, message: e.to_string() }
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

fn write_file(path: &Path, contents: &str) -> CliResult<()> {
    std::fs::write(path, contents).map_err(|e| Failure::config(format!("cannot write {}: {e}", path.display())))
}

fn write_json<T: Serialize>(path: Option<&Path>, value: &T) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value).expect("report serializes") + "\n";
    match path {
        Some(p) => write_file(p, &text),
        None => Ok(()),
    }
}

fn parse_point(s: &str) -> CliResult<Point> {
    let v: Vec<f64> = s.split(',').map(|t| t.trim().parse::<f64>()).collect::<Result<_, _>>().map_err(|_| Failure::config(format!("bad point `{s}`, expected x1,x2")))?;
    match v.as_slice() {
        [a, b] if a.is_finite() && b.is_finite() => Ok([*a, *b]),
        _ => Err(Failure::config(format!("bad point `{s}`, expected x1,x2"))),
    }
}

const WITNESS_SHOWN: usize = 8;

fn point_label(grid: &Grid, i: usize) -> String {
    if grid.system.is_torus() {
        let p = grid.torus_point(i);
        format!("({:.6},{:.6})", p[0], p[1])
    } else {
        grid.coordinate_fields(i)
    }
}

fn gnuplot_path(out: &Path) -> PathBuf {
    out.with_extension("gp")
}

/// Chart family with constants measured on a 32x32 net. Seeds are fixed so
/// that outputs depend only on the command-line seed.
fn chart_setup(sys: &DynamicalSystem, net: &[Point]) -> CliResult<(ChartFamily, HyperbolicConstants)> {
    let base = HyperbolicConstants::cat_defaults();
    let (fam, _) = charts::build_charts(sys, &base, 64, 3)?;
    let c = charts::derive_constants(&base, &fam, net, 64, 3);
    Ok((fam, c))
}

fn lattice_net(k: usize) -> Vec<Point> {
    (0..k * k).map(|i| [(i / k) as f64 / k as f64, (i % k) as f64 / k as f64]).collect()
}

#[derive(Serialize)]
struct SolveOutput<'a> {
    schema_version: u32,
    command: &'static str,
    config: &'a SolveConfig,
    system: String,
    observable: String,
    phibar: f64,
    phibar_method: String,
    c: f64,
    k_lambda: f64,
    c_policy: String,
    report: &'a laxoleinik::SolveReport,
    subaction: &'a laxoleinik::SubactionReport,
    residual_tolerance: f64,
    passed: bool,
}

fn cmd_solve(args: SolveArgs) -> CliResult<()> {
    let mut cfg = match &args.config {
        Some(p) => SolveConfig::load(p)?,
        None => SolveConfig::default(),
    };
    cfg.override_with(args.system, args.observable, args.grid, args.depth, args.c.as_deref(), args.phibar.as_deref(), args.tol, args.max_iter, args.seed)?;
    let sys = cfg.system()?;
    let phi = systems::observable_library(&cfg.observable, &sys)?;
    let grid = match sys.depth() {
        Some(_) => Grid::words(&sys)?,
        None => Grid::torus(&sys, cfg.grid_q.unwrap_or(config::DEFAULT_GRID_Q))?,
    };
    let (phibar, phibar_method) = match cfg.phibar_policy()? {
        PhibarPolicy::Value(v) => (v, "given".to_string()),
        PhibarPolicy::Karp => {
            let e = orbits::min_mean_cycle(&sys, &phi)?;
            (e.value, e.method)
        }
        PhibarPolicy::Periodic(p) => {
            let (e, _) = orbits::birkhoff_min_periodic(&sys, &phi, p)?;
            (e.value, e.method)
        }
    };
    let consts = match sys.depth() {
        Some(d) => charts::symbolic_constants(d),
        None => {
            let net: Vec<Point> = (0..grid.len()).map(|i| grid.torus_point(i)).collect();
            chart_setup(&sys, &net)?.1
        }
    };
    let (c, c_policy) = match cfg.c_policy()? {
        CPolicy::Auto => (consts.k_lambda * phi.lip, "auto: K_Lambda Lip(phi)".to_string()),
        CPolicy::Value(v) => (v, "given".to_string()),
    };
    let prob = LaxOleinikProblem::new(grid, phi, phibar, c)?.with_tolerance(cfg.tol, cfg.max_iter);
    let sol = match laxoleinik::solve_calibrated(&prob) {
        Err(Error::Divergence { slope, witness }) => {
            let shown = &witness[witness.len().saturating_sub(WITNESS_SHOWN)..];
            let path: Vec<String> = shown.iter().map(|&i| point_label(&prob.grid, i)).collect();
            let skipped = if shown.len() < witness.len() { format!("{} earlier points, then ", witness.len() - shown.len()) } else { String::new() };
            return Err(Failure::violation(
                "divergence",
                format!("inf_n T^n[0] decreases with slope {slope:.6e}; no subaction for C = {c:e}, phibar = {phibar:e}; witness path: {skipped}{}", path.join(" -> ")),
            ));
        }
        Err(Error::Growth { slope }) => {
            return Err(Failure {
                code: 3,
                kind: "growth",
                message: format!(
                    "T^n[v] increases by {slope:.6e} per iteration: phibar = {phibar:e} is below the minimal cycle mean of this grid; try --phibar {:e} or a finer grid",
                    phibar + slope
                ),
            });
        }
        Err(Error::MaxIterations(n)) => {
            return Err(Failure {
                code: 3,
                kind: "max-iterations",
                message: format!("no convergence after {n} iterations with C = {c:e}; large C needs on the order of C*diam/|phi| iterations, try a smaller --C or a larger --max_iter"),
            });
        }
        other => other?,
    };
    let sub = laxoleinik::subaction_check(&sol.u.values, &prob, Some(consts.k_lambda), 10_000, cfg.seed);
    let tolerance = cfg.tol.max(1e-10);
    let passed = sol.report.calibration_residual <= tolerance && sub.within_bound;
    if let Some(out) = &args.out {
        write_file(out, &sol.u.to_csv(&prob.grid))?;
        if args.gnuplot {
            let script = if prob.grid.system.is_torus() {
                format!("set datafile separator ','\nset xlabel 'x1'\nset ylabel 'x2'\nset view map\nsplot '{}' using 1:2:3 with points pointtype 5 pointsize 0.3 palette title 'u'\n", out.display())
            } else {
                format!("set datafile separator ','\nset xlabel 'word index'\nplot '{}' using 0:2 with points title 'u'\n", out.display())
            };
            write_file(&gnuplot_path(out), &script)?;
        }
    }
    let report = SolveOutput {
        schema_version: SCHEMA_VERSION,
        command: "solve",
        config: &cfg,
        system: sys.id(),
        observable: cfg.observable.clone(),
        phibar,
        phibar_method,
        c,
        k_lambda: consts.k_lambda,
        c_policy,
        report: &sol.report,
        subaction: &sub,
        residual_tolerance: tolerance,
        passed,
    };
    write_json(args.json.as_deref(), &report)?;
    println!(
        "solve {} {}: residual {:.3e}, grid slack {:.3e}, Lip(u) {:.6}, C {:.6}, iterations {}+{}",
        sys.id(),
        cfg.observable,
        sol.report.calibration_residual,
        sub.grid_min_slack,
        sub.lipschitz_estimate,
        c,
        sol.report.iterations_inf,
        sol.report.iterations_sup
    );
    if !passed {
        return Err(Failure::violation(
            "bound",
            format!(
                "calibration residual {:.3e} (tolerance {tolerance:.1e}), grid slack {:.3e}, off-grid slack {}, allowed -{:.3e}",
                sol.report.calibration_residual,
                sub.grid_min_slack,
                sub.offgrid_min_slack.map_or("n/a".to_string(), |s| format!("{s:.3e}")),
                sub.mesh_bound
            ),
        ));
    }
    Ok(())
}

#[derive(Serialize)]
struct ShadowOutput<T: Serialize> {
    schema_version: u32,
    command: &'static str,
    system: String,
    len: usize,
    noise: f64,
    seed: u64,
    periodic: bool,
    constants: HyperbolicConstants,
    result: T,
    bounds: shadowing::BoundsReport,
    passed: bool,
}

fn cmd_shadow(args: ShadowArgs) -> CliResult<()> {
    let sys = DynamicalSystem::parse(&args.system)?;
    if !sys.is_torus() {
        return Err(Failure::config("shadowing needs a torus system (cat or pcat:<eps>:<seed>)"));
    }
    if !(args.noise >= 0.0) {
        return Err(Failure::config(format!("noise must be >= 0, got {}", args.noise)));
    }
    let (fam, c) = chart_setup(&sys, &lattice_net(32))?;
    let x0 = match &args.x0 {
        Some(s) => parse_point(s)?,
        None => laxoleinik::random_torus_points(1, args.seed)[0],
    };
    let pseudo = match &args.input {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Failure::config(format!("cannot read {}: {e}", p.display())))?;
            let po = PseudoOrbit::from_csv(&sys, &text)?;
            if args.periodic {
                PseudoOrbit::periodic_from_points(&sys, po.points)
            } else {
                po
            }
        }
        None if args.periodic => shadowing::periodic_pseudo_orbit(&sys, args.len, args.noise, args.seed)?,
        None => shadowing::make_pseudo_orbit(&sys, x0, args.len, args.noise, args.seed, false)?,
    };
    let (passed, csv, summary) = if args.periodic {
        let r = shadowing::shadow_periodic(&pseudo, &fam, &c, &PeriodicOptions::default())?;
        let bounds = shadowing::verify_periodic_bounds(&sys, &r, &c);
        let passed = bounds.passed && r.closure <= 1e-10;
        let csv = shadow_csv(&r.x, &r.p, &r.dist);
        let summary = format!("periodic shadow n = {}: closure {:.3e}, max distance {:.3e}, s = {}", r.n, r.closure, r.dist.iter().cloned().fold(0.0, f64::max), r.s);
        let out = ShadowOutput { schema_version: SCHEMA_VERSION, command: "shadow", system: sys.id(), len: pseudo.len(), noise: args.noise, seed: args.seed, periodic: true, constants: c.clone(), result: r, bounds, passed };
        write_json(args.json.as_deref(), &out)?;
        (passed, csv, summary)
    } else {
        let r = shadowing::shadow(&pseudo, &fam, &c, &ShadowOptions::default())?;
        let bounds = shadowing::verify_shadowing_bounds(&sys, &pseudo, &r, &c);
        let csv = shadow_csv(&r.x, &r.p, &r.dist);
        let summary = format!("shadow n = {}: max distance {:.3e}, max step error {:.3e}, orbit defect {:.3e}", pseudo.len(), r.dist.iter().cloned().fold(0.0, f64::max), pseudo.max_delta(), r.orbit_defect);
        let passed = bounds.passed;
        let out = ShadowOutput { schema_version: SCHEMA_VERSION, command: "shadow", system: sys.id(), len: pseudo.len(), noise: args.noise, seed: args.seed, periodic: false, constants: c.clone(), result: r, bounds, passed };
        write_json(args.json.as_deref(), &out)?;
        (passed, csv, summary)
    };
    if let Some(out) = &args.out {
        write_file(out, &csv)?;
        if args.gnuplot {
            let script = format!(
                "set datafile separator ','\nset xlabel 'i'\nset ylabel 'd(x_i, p_i)'\nset logscale y\nplot '{}' using 1:6 with linespoints title 'shadow distance'\n",
                out.display()
            );
            write_file(&gnuplot_path(out), &script)?;
        }
    }
    println!("{summary}");
    if !passed {
        return Err(Failure::violation("bound", "a shadowing inequality failed; see the JSON report"));
    }
    Ok(())
}

fn shadow_csv(x: &[Point], p: &[Point], dist: &[f64]) -> String {
    let mut s = String::from("i,x1,x2,p1,p2,dist\n");
    for i in 0..x.len().min(p.len()) {
        s.push_str(&format!("{i},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}\n", x[i][0], x[i][1], p[i][0], p[i][1], dist[i]));
    }
    s
}

#[derive(Serialize)]
struct PeriodicOutput {
    schema_version: u32,
    command: &'static str,
    n: usize,
    determinant: i128,
    points: usize,
    orbits: Vec<orbits::RationalOrbit>,
    all_exact: bool,
}

fn cmd_periodic(args: PeriodicArgs) -> CliResult<()> {
    let sys = DynamicalSystem::parse(&args.system)?;
    let found = orbits::periodic_points(&sys, args.n)?;
    let det = orbits::periodic_point_count(args.n)?;
    let points: usize = found.iter().map(|o| o.period()).sum();
    let all_exact = found.iter().all(|o| o.verify());
    if let Some(out) = &args.out {
        let mut s = String::from("orbit,period,k,num1,num2,den,x1,x2\n");
        for (j, o) in found.iter().enumerate() {
            for (k, (num, x)) in o.numerators.iter().zip(o.points()).enumerate() {
                s.push_str(&format!("{j},{},{k},{},{},{},{:.17e},{:.17e}\n", o.period(), num[0], num[1], o.denominator, x[0], x[1]));
            }
        }
        write_file(out, &s)?;
    }
    println!("period {}: {} points in {} orbits, |det(A^n - I)| = {det}", args.n, points, found.len());
    let ok = all_exact && points as i128 == det;
    write_json(args.json.as_deref(), &PeriodicOutput { schema_version: SCHEMA_VERSION, command: "periodic", n: args.n, determinant: det, points, orbits: found, all_exact })?;
    if !ok {
        return Err(Failure::violation("bound", format!("found {points} points, expected {det}")));
    }
    Ok(())
}

#[derive(Serialize)]
struct EbarOutput {
    schema_version: u32,
    command: &'static str,
    system: String,
    observable: String,
    estimate: orbits::EbarEstimate,
}

fn cmd_ebar(args: EbarArgs) -> CliResult<()> {
    let sys = DynamicalSystem::parse(&args.system)?;
    let phi = systems::observable_library(&args.observable, &sys)?;
    let method = if args.method == "auto" {
        if sys.is_torus() { "periodic:8".to_string() } else { "karp".to_string() }
    } else {
        args.method.clone()
    };
    let bad = || Failure::config(format!("unknown method `{}`; use karp, periodic:P or sweep:n", args.method));
    let estimate = match method.split_once(':') {
        None if method == "karp" => orbits::min_mean_cycle(&sys, &phi)?,
        Some(("periodic", p)) => orbits::birkhoff_min_periodic(&sys, &phi, p.parse().map_err(|_| bad())?)?.0,
        Some(("sweep", n)) => orbits::sweep_min(&sys, &phi, n.parse().map_err(|_| bad())?, 20_000, args.seed)?,
        _ => return Err(bad()),
    };
    println!("phibar {:.17e} ({})", estimate.value, estimate.method);
    write_json(args.json.as_deref(), &EbarOutput { schema_version: SCHEMA_VERSION, command: "ebar", system: sys.id(), observable: args.observable, estimate })
}

#[derive(Serialize)]
struct ManifoldOutput<'a> {
    schema_version: u32,
    command: &'static str,
    system: String,
    point: Point,
    len: usize,
    contraction: f64,
    graph_sup: f64,
    graph_slope: f64,
    successive: &'a [f64],
    rates: &'a [f64],
}

fn cmd_manifold(args: ManifoldArgs) -> CliResult<()> {
    let sys = DynamicalSystem::parse(&args.system)?;
    if !sys.is_torus() {
        return Err(Failure::config("manifolds need a torus system"));
    }
    if args.len == 0 || args.nodes == 0 {
        return Err(Failure::config("--len and --nodes must be positive"));
    }
    let x = parse_point(&args.point)?;
    let (fam, c) = chart_setup(&sys, &lattice_net(32))?;
    let chain = charts::backward_chain(&sys, systems::reduce(x), args.len);
    let m = charts::local_unstable_manifold(&fam, &chain, &c, args.nodes)?;
    if let Some(out) = &args.out {
        write_file(out, &m.graph.to_csv())?;
        if args.gnuplot {
            let script = format!("set datafile separator ','\nset xlabel 'unstable coordinate'\nset ylabel 'G'\nplot '{}' using 1:2 with lines title 'local unstable manifold'\n", out.display());
            write_file(&gnuplot_path(out), &script)?;
        }
    }
    println!(
        "manifold at ({}, {}) after {} transforms: sup |G| {:.3e}, last successive difference {:.3e}",
        x[0],
        x[1],
        args.len,
        m.graph.sup(),
        m.successive.last().copied().unwrap_or(0.0)
    );
    write_json(
        args.json.as_deref(),
        &ManifoldOutput {
            schema_version: SCHEMA_VERSION,
            command: "manifold",
            system: sys.id(),
            point: x,
            len: args.len,
            contraction: c.contraction(),
            graph_sup: m.graph.sup(),
            graph_slope: m.graph.slope(),
            successive: &m.successive,
            rates: &m.rates,
        },
    )
}

fn cmd_verify(args: VerifyArgs) -> CliResult<()> {
    let only = args.only.as_deref();
    if let Some(f) = only {
        if !verify::ANCHORS.iter().any(|(c, a)| verify::selected(Some(f), *c, a)) {
            let names: Vec<&str> = verify::ANCHORS.iter().map(|(_, a)| *a).collect();
            return Err(Failure::config(format!("--only `{f}` matches no check; anchors: {}", names.join(", "))));
        }
    }
    let report = verify::run(only);
    for c in &report.checks {
        println!("{}", c.line());
    }
    write_json(args.json.as_deref(), &report)?;
    if !report.passed {
        return Err(Failure::violation("verify", format!("failed checks: {}", report.failed.join(", "))));
    }
    Ok(())
}

fn run(cli: Cli) -> CliResult<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Failure::config("--threads must be >= 1"));
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| Failure::config(format!("thread pool: {e}")))?;
    }
    match cli.command {
        Command::Solve(a) => cmd_solve(a),
        Command::Shadow(a) => cmd_shadow(a),
        Command::Periodic(a) => cmd_periodic(a),
        Command::Ebar(a) => cmd_ebar(a),
        Command::Manifold(a) => cmd_manifold(a),
        Command::Verify(a) => cmd_verify(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if matches!(e.kind(), clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion) => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = e.to_string();
            let first = msg.lines().find(|l| !l.trim().is_empty()).unwrap_or("invalid arguments");
            eprintln!("error[usage]: {}", first.trim_start_matches("error: "));
            return ExitCode::from(1);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error[{}]: {}", f.kind, f.message.replace('\n', " "));
            ExitCode::from(f.code)
        }
    }
}
