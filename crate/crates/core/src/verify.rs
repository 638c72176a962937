//! Batch verification: every acceptance check with its measured sides, slack
//! and runtime. Shared by the `verify` command and the acceptance tests.

use crate::charts::{self, HyperbolicConstants, PlGraph};
use crate::error::Result;
use crate::laxoleinik::{self, Engine, Grid, LaxOleinikProblem};
use crate::orbits;
use crate::shadowing::{self, PeriodicOptions, ShadowOptions};
use crate::systems::{self, DynamicalSystem, Observable, PhasePoint, Point};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::collections::BTreeMap;
use std::time::Instant;

pub const SCHEMA_VERSION: u32 = 1;

/// Depth of the golden-mean shift used by the symbolic checks.
pub const SHIFT_DEPTH: usize = 8;
/// Lattice sizes of the mesh-refinement check.
pub const TORUS_Q: (usize, usize) = (256, 512);
/// Distortion constant of the torus solves, in units of Lip(phi).
pub const TORUS_C_OVER_LIP: f64 = 2.0;
pub const OFFGRID_SAMPLES: usize = 100_000;
pub const OFFGRID_STARTS: usize = 20;
pub const LIPSCHITZ_PAIRS: usize = 100_000;
/// Observable of the value-iteration checks: coscos with its minimum moved off
/// the fixed point, so that phibar > min phi.
pub const LIVSIC_OBSERVABLE: &str = "coscos:0.25";
pub const LIVSIC_Q: usize = 128;
pub const LIVSIC_STEPS: usize = 50;
pub const PERTURBATION: (f64, u64) = (1e-3, 1);
/// Slack for piecewise-linear interpolation in graph-transform measurements.
pub const INTERPOLATION_SLACK: f64 = 1e-3;
/// Successive differences below this are dominated by root-solver tolerance
/// and are left out of the rate estimate.
pub const RATE_FLOOR: f64 = 1e-10;

#[derive(Clone, Debug, Serialize)]
pub struct CheckResult {
    pub criterion: Option<u8>,
    pub name: String,
    /// Name of the statement being checked.
    pub anchor: String,
    pub pass: bool,
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    pub runtime_s: f64,
    pub runtime_limit_s: Option<f64>,
    pub measured: BTreeMap<String, f64>,
    pub note: String,
}

impl CheckResult {
    pub fn line(&self) -> String {
        let id = self.criterion.map_or("-".to_string(), |c| c.to_string());
        format!(
            "[{}] criterion {id:>2} {:<32} lhs={:.6e} rhs={:.6e} slack={:.3e} t={:.2}s {}",
            if self.pass { "PASS" } else { "FAIL" },
            self.anchor,
            self.lhs,
            self.rhs,
            self.slack,
            self.runtime_s,
            self.note
        )
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct VerificationReport {
    pub schema_version: u32,
    pub checks: Vec<CheckResult>,
    pub passed: bool,
    pub failed: Vec<String>,
}

impl VerificationReport {
    pub fn new(checks: Vec<CheckResult>) -> Self {
        let failed: Vec<String> = checks.iter().filter(|c| !c.pass).map(|c| c.anchor.clone()).collect();
        VerificationReport { schema_version: SCHEMA_VERSION, passed: failed.is_empty(), failed, checks }
    }
}

/// Anchors in run order, paired with their criterion numbers.
pub const ANCHORS: [(Option<u8>, &str); 11] = [
    (Some(1), "calibration fixed point"),
    (Some(2), "subaction inequality"),
    (Some(3), "lipschitz bound"),
    (Some(4), "improved shadowing"),
    (Some(5), "periodic shadowing"),
    (Some(6), "graph transform contraction"),
    (Some(7), "unstable manifold"),
    (Some(8), "livsic lower bound"),
    (Some(9), "brute-force equivalence"),
    (Some(10), "periodic point census"),
    (None, "operator laws"),
];

/// Whether a check is selected by `--only`: a criterion number or a
/// case-insensitive substring of the anchor.
pub fn selected(filter: Option<&str>, criterion: Option<u8>, anchor: &str) -> bool {
    match filter {
        None => true,
        Some(f) => {
            let f = f.trim().to_lowercase();
            criterion.is_some_and(|c| f == c.to_string()) || anchor.contains(&f)
        }
    }
}

struct Check {
    criterion: Option<u8>,
    anchor: &'static str,
    limit: Option<f64>,
    measured: BTreeMap<String, f64>,
    notes: Vec<String>,
    ok: bool,
    main: (f64, f64),
}

impl Check {
    fn new(criterion: Option<u8>, anchor: &'static str, limit: Option<f64>) -> Self {
        Check { criterion, anchor, limit, measured: BTreeMap::new(), notes: Vec::new(), ok: true, main: (0.0, 0.0) }
    }

    fn record(&mut self, key: &str, v: f64) {
        self.measured.insert(key.to_string(), v);
    }

    /// Requires lhs <= rhs; the first call sets the headline sides.
    fn le(&mut self, what: &str, lhs: f64, rhs: f64) {
        let pass = lhs <= rhs;
        if self.measured.is_empty() && self.main == (0.0, 0.0) {
            self.main = (lhs, rhs);
        }
        self.record(&format!("{what}.lhs"), lhs);
        self.record(&format!("{what}.rhs"), rhs);
        if !pass {
            if self.ok {
                self.main = (lhs, rhs);
            }
            self.ok = false;
            self.notes.push(format!("{what}: {lhs:.6e} > {rhs:.6e}"));
        }
    }

    fn require(&mut self, what: &str, cond: bool) {
        if !cond {
            self.ok = false;
            self.notes.push(format!("{what} failed"));
        }
    }

    fn fail(&mut self, msg: String) {
        self.ok = false;
        self.notes.push(msg);
    }

    fn finish(self, start: Instant) -> CheckResult {
        let runtime = start.elapsed().as_secs_f64();
        let mut pass = self.ok;
        let mut notes = self.notes;
        if let Some(l) = self.limit {
            if runtime >= l {
                pass = false;
                notes.push(format!("runtime {runtime:.1}s >= {l}s"));
            }
        }
        CheckResult {
            criterion: self.criterion,
            name: self.criterion.map_or("extra".to_string(), |c| format!("criterion {c}")),
            anchor: self.anchor.to_string(),
            pass,
            lhs: self.main.0,
            rhs: self.main.1,
            slack: self.main.1 - self.main.0,
            runtime_s: runtime,
            runtime_limit_s: self.limit,
            measured: self.measured,
            note: notes.join("; "),
        }
    }
}

/// The shift solve shared by criteria 1 to 3.
pub struct ShiftRun {
    pub prob: LaxOleinikProblem,
    pub solution: laxoleinik::Solution,
    pub seconds: f64,
}

pub fn shift_run() -> Result<ShiftRun> {
    let t = Instant::now();
    let sys = systems::golden_mean_shift(SHIFT_DEPTH)?;
    let phi = systems::observable_library("edgecost:default", &sys)?;
    let phibar = orbits::min_mean_cycle(&sys, &phi)?.value;
    let consts = charts::symbolic_constants(SHIFT_DEPTH as u8);
    let grid = Grid::words(&sys)?;
    let c = consts.k_lambda * phi.lip;
    let prob = LaxOleinikProblem::new(grid, phi, phibar, c)?.with_tolerance(1e-13, 100_000);
    let solution = laxoleinik::solve_calibrated(&prob)?;
    Ok(ShiftRun { prob, solution, seconds: t.elapsed().as_secs_f64() })
}

/// Cat map, coscos, phibar = 0, C = 2 Lip(phi), on a q-lattice.
pub fn torus_run(q: usize) -> Result<(LaxOleinikProblem, laxoleinik::Solution)> {
    let sys = systems::cat_map();
    let phi = systems::observable_library("coscos", &sys)?;
    let c = TORUS_C_OVER_LIP * phi.lip;
    let prob = LaxOleinikProblem::new(Grid::torus(&sys, q)?, phi, 0.0, c)?.with_tolerance(1e-12, 100_000);
    let sol = laxoleinik::solve_calibrated(&prob)?;
    Ok((prob, sol))
}

fn criterion_1(shift: &Result<ShiftRun>) -> CheckResult {
    let start = Instant::now();
    let mut ck = Check::new(Some(1), "calibration fixed point", Some(5.0));
    match shift {
        Ok(run) => {
            let r = &run.solution.report;
            ck.le("calibration residual", r.calibration_residual, 1e-10);
            ck.record("C", r.c);
            ck.record("phibar", r.phibar);
            ck.record("iterations", (r.iterations_inf + r.iterations_sup) as f64);
            let mut res = ck.finish(start);
            res.runtime_s += run.seconds;
            if res.runtime_s >= 5.0 {
                res.pass = false;
            }
            res
        }
        Err(e) => {
            ck.fail(format!("solve failed: {e}"));
            ck.finish(start)
        }
    }
}

fn criterion_2_and_3(shift: &Result<ShiftRun>) -> (CheckResult, CheckResult) {
    let start = Instant::now();
    let mut c2 = Check::new(Some(2), "subaction inequality", Some(60.0));
    let mut c3 = Check::new(Some(3), "lipschitz bound", None);
    let t3 = Instant::now();
    match shift {
        Ok(run) => {
            let (min_slack, _) = laxoleinik::grid_subaction_slack(&run.prob, &run.solution.u.values);
            c2.le("shift slack defect", -min_slack, 1e-12);
            let (lip, pairs) = laxoleinik::lipschitz_estimate(&run.prob.grid, &run.solution.u.values, LIPSCHITZ_PAIRS, 7);
            c3.le("shift Lipschitz ratio (strict)", lip, run.prob.c + 1e-9);
            c3.record("shift pairs", pairs as f64);
        }
        Err(e) => {
            c2.fail(format!("shift solve failed: {e}"));
            c3.fail(format!("shift solve failed: {e}"));
        }
    }
    let mut t3_total = t3.elapsed().as_secs_f64();
    let mut defects = Vec::new();
    for q in [TORUS_Q.0, TORUS_Q.1] {
        match torus_run(q) {
            Ok((prob, sol)) => {
                let (worst, at) = laxoleinik::worst_offgrid_slack(&prob, &sol.u.values, OFFGRID_SAMPLES, OFFGRID_STARTS, 11);
                let defect = (-worst).max(0.0);
                let bound = (prob.c + prob.phi.lip) * prob.grid.mesh;
                let provable = (prob.phi.lip + prob.c * (1.0 + systems::lambda_u())) * prob.grid.mesh;
                let (grid_min, _) = laxoleinik::grid_subaction_slack(&prob, &sol.u.values);
                c2.record(&format!("q{q}.grid_min_slack"), grid_min);
                c2.record(&format!("q{q}.worst_x1"), at[0]);
                c2.record(&format!("q{q}.worst_x2"), at[1]);
                c2.record(&format!("q{q}.provable_bound"), provable);
                c2.record(&format!("q{q}.calibration_residual"), sol.report.calibration_residual);
                c2.le(&format!("q{q} grid slack defect"), -grid_min, bound);
                if q == TORUS_Q.0 {
                    c2.le(&format!("q{q} off-grid slack defect"), defect, bound);
                } else {
                    c2.record(&format!("q{q} off-grid slack defect"), defect);
                    c2.record(&format!("q{q} mesh bound"), bound);
                }
                defects.push(defect);
                let t = Instant::now();
                let (lip, pairs) = laxoleinik::lipschitz_estimate(&prob.grid, &sol.u.values, LIPSCHITZ_PAIRS, 7);
                let d_min = lattice_min_norm() / q as f64;
                let slack = (prob.c + prob.phi.lip) * prob.grid.mesh / d_min;
                c3.le(&format!("q{q} Lipschitz ratio"), lip, prob.c + slack + 1e-9);
                c3.record(&format!("q{q} pairs"), pairs as f64);
                t3_total += t.elapsed().as_secs_f64();
            }
            Err(e) => {
                c2.fail(format!("torus solve q={q} failed: {e}"));
                c3.fail(format!("torus solve q={q} failed: {e}"));
            }
        }
    }
    if defects.len() == 2 {
        let shrink = if defects[1] > 0.0 { defects[0] / defects[1] } else { f64::INFINITY };
        c2.record("shrink factor", shrink);
        c2.require("defect shrinks by >= 1.8x under refinement", shrink >= 1.8);
    }
    let mut r2 = c2.finish(start);
    if let Ok(run) = shift {
        r2.runtime_s += run.seconds;
    }
    let mut r3 = c3.finish(Instant::now());
    r3.runtime_s = t3_total;
    (r2, r3)
}

/// Smallest eigen-sup norm of a nonzero integer vector; the q-lattice spacing is this over q.
fn lattice_min_norm() -> f64 {
    let mut best = f64::INFINITY;
    for a in -3i32..=3 {
        for b in -3i32..=3 {
            if (a, b) != (0, 0) {
                best = best.min(systems::eigen_norm([a as f64, b as f64]));
            }
        }
    }
    best
}

fn cat_setup() -> Result<(DynamicalSystem, charts::ChartFamily, HyperbolicConstants)> {
    let cat = systems::cat_map();
    let base = HyperbolicConstants::cat_defaults();
    let (fam, _) = charts::build_charts(&cat, &base, 64, 3)?;
    let net: Vec<Point> = (0..64 * 64).map(|k| [(k / 64) as f64 / 64.0, (k % 64) as f64 / 64.0]).collect();
    let c = charts::derive_constants(&base, &fam, &net, 64, 3);
    Ok((cat, fam, c))
}

fn pcat_setup() -> Result<(DynamicalSystem, charts::ChartFamily, HyperbolicConstants)> {
    let sys = systems::perturbed_cat_map(PERTURBATION.0, PERTURBATION.1)?;
    let base = HyperbolicConstants::cat_defaults();
    let (fam, _) = charts::build_charts(&sys, &base, 64, 3)?;
    let net: Vec<Point> = (0..32 * 32).map(|k| [(k / 32) as f64 / 32.0, (k % 32) as f64 / 32.0]).collect();
    let c = charts::derive_constants(&base, &fam, &net, 64, 3);
    Ok((sys, fam, c))
}

fn criterion_4() -> CheckResult {
    let start = Instant::now();
    let mut ck = Check::new(Some(4), "improved shadowing", Some(30.0));
    let (cat, fam, c) = match cat_setup() {
        Ok(s) => s,
        Err(e) => {
            ck.fail(format!("setup failed: {e}"));
            return ck.finish(start);
        }
    };
    let mut worst_oracle: f64 = 0.0;
    let mut failures = 0;
    let mut min_slack = f64::INFINITY;
    for seed in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        let x0 = [rng.gen::<f64>(), rng.gen::<f64>()];
        let run = || -> Result<(shadowing::BoundsReport, f64)> {
            let po = shadowing::make_pseudo_orbit(&cat, x0, 200, 1e-4, seed, false)?;
            let r = shadowing::shadow(&po, &fam, &c, &ShadowOptions::default())?;
            let rep = shadowing::verify_shadowing_bounds(&cat, &po, &r, &c);
            let lin = shadowing::shadow_exact_linear(&po, &cat)?;
            let gap = r.p.iter().zip(&lin.p).map(|(a, b)| systems::torus_dist(*a, *b)).fold(0.0, f64::max);
            Ok((rep, gap))
        };
        match run() {
            Ok((rep, gap)) => {
                if !rep.passed {
                    failures += 1;
                }
                for b in &rep.checks {
                    if b.name != "step errors match recomputation" && b.name != "shadow distances match recomputation" {
                        min_slack = min_slack.min(b.slack / b.rhs.max(1e-300));
                    }
                }
                worst_oracle = worst_oracle.max(gap);
            }
            Err(e) => {
                failures += 1;
                ck.notes.push(format!("seed {seed}: {e}"));
            }
        }
    }
    ck.le("distance to linear oracle", worst_oracle, 1e-8);
    ck.record("bound failures", failures as f64);
    ck.record("min relative slack", min_slack);
    ck.record("K_AS", c.k_as);
    ck.record("lambda_AS", c.lambda_as);
    ck.require("all three shadowing inequalities on 100 orbits", failures == 0);
    ck.finish(start)
}

fn criterion_5() -> CheckResult {
    let start = Instant::now();
    let mut ck = Check::new(Some(5), "periodic shadowing", None);
    let (cat, fam, c) = match cat_setup() {
        Ok(s) => s,
        Err(e) => {
            ck.fail(format!("setup failed: {e}"));
            return ck.finish(start);
        }
    };
    let mut worst_closure: f64 = 0.0;
    let mut worst_oracle: f64 = 0.0;
    let mut failures = 0;
    for seed in 0..20u64 {
        let run = || -> Result<(f64, f64, bool)> {
            let po = shadowing::periodic_pseudo_orbit(&cat, 12, 1e-5, seed)?;
            let r = shadowing::shadow_periodic(&po, &fam, &c, &PeriodicOptions::default())?;
            let rep = shadowing::verify_periodic_bounds(&cat, &r, &c);
            let lin = shadowing::shadow_periodic_linear(&po, &cat)?;
            let gap = r.p.iter().zip(&lin.p).map(|(a, b)| systems::torus_dist(*a, *b)).fold(0.0, f64::max);
            Ok((r.closure, gap, rep.passed))
        };
        match run() {
            Ok((closure, gap, ok)) => {
                worst_closure = worst_closure.max(closure);
                worst_oracle = worst_oracle.max(gap);
                if !ok {
                    failures += 1;
                }
            }
            Err(e) => {
                failures += 1;
                ck.notes.push(format!("seed {seed}: {e}"));
            }
        }
    }
    ck.le("closure d(f^n(p), p)", worst_closure, 1e-10);
    ck.le("distance to periodic linear oracle", worst_oracle, 1e-8);
    ck.record("K_APS", c.k_aps);
    ck.record("bound failures", failures as f64);
    ck.require("summed periodic bound on 20 orbits", failures == 0);
    ck.finish(start)
}

/// Random graph with slope at most alpha and |G(0)| <= rho/2, or None if the
/// draw leaves B^s(rho).
fn random_graph(rng: &mut ChaCha8Rng, c: &HyperbolicConstants, nodes_per_side: usize) -> Option<PlGraph> {
    let mut g = PlGraph::constant(c.rho, nodes_per_side, 0.0);
    let h = g.spacing();
    let mid = nodes_per_side;
    g.values[mid] = rng.gen_range(-0.5..0.5) * c.rho;
    for i in mid + 1..g.values.len() {
        g.values[i] = g.values[i - 1] + rng.gen_range(-1.0..1.0) * c.alpha * h;
    }
    for i in (0..mid).rev() {
        g.values[i] = g.values[i + 1] + rng.gen_range(-1.0..1.0) * c.alpha * h;
    }
    g.certify(c.alpha).ok().map(|_| g)
}

fn criterion_6() -> CheckResult {
    let start = Instant::now();
    let mut ck = Check::new(Some(6), "graph transform contraction", None);
    let (_, fam, c) = match pcat_setup() {
        Ok(s) => s,
        Err(e) => {
            ck.fail(format!("setup failed: {e}"));
            return ck.finish(start);
        }
    };
    let mut rng = ChaCha8Rng::seed_from_u64(66);
    let mut worst: f64 = 0.0;
    let mut pairs = 0;
    while pairs < 100 {
        let (Some(g1), Some(g2)) = (random_graph(&mut rng, &c, 32), random_graph(&mut rng, &c, 32)) else { continue };
        let (x, y) = charts::random_transition(&fam, &c, 1.0, &mut rng);
        let lm = fam.local_map(x, y);
        match (charts::graph_transform(&g1, &lm, &c), charts::graph_transform(&g2, &lm, &c)) {
            (Ok(t1), Ok(t2)) => {
                let d = g1.sup_dist(&g2);
                if d > 0.0 {
                    worst = worst.max(t1.sup_dist(&t2) / d);
                }
            }
            (Err(e), _) | (_, Err(e)) => {
                ck.fail(format!("graph transform failed: {e}"));
                break;
            }
        }
        pairs += 1;
    }
    ck.le("contraction factor", worst, c.contraction() + INTERPOLATION_SLACK);
    ck.record("sigma_s + 2 eta", c.contraction());
    ck.record("pairs", pairs as f64);
    ck.finish(start)
}

fn criterion_7() -> CheckResult {
    let start = Instant::now();
    let mut ck = Check::new(Some(7), "unstable manifold", None);
    let n = 60;
    match cat_setup() {
        Ok((cat, fam, c)) => {
            let chain = charts::backward_chain(&cat, [0.3, 0.6], n);
            match charts::local_unstable_manifold(&fam, &chain, &c, 32) {
                Ok(m) => ck.le("linear graph sup", m.graph.sup(), 1e-12),
                Err(e) => ck.fail(format!("linear manifold failed: {e}")),
            }
        }
        Err(e) => ck.fail(format!("setup failed: {e}")),
    }
    match pcat_setup() {
        Ok((sys, fam, c)) => {
            let chain = charts::backward_chain(&sys, [0.3, 0.6], n);
            match charts::local_unstable_manifold(&fam, &chain, &c, 32) {
                Ok(m) => {
                    let last = m.successive.last().copied().unwrap_or(0.0);
                    ck.le("successive difference at n = 60", last, 1e-9);
                    let rate = m.successive.windows(2).filter(|w| w[0] > RATE_FLOOR && w[1] > RATE_FLOOR).map(|w| w[1] / w[0]).fold(0.0, f64::max);
                    ck.le("convergence rate", rate, c.contraction() + INTERPOLATION_SLACK);
                    ck.record("perturbed graph sup", m.graph.sup());
                }
                Err(e) => ck.fail(format!("perturbed manifold failed: {e}")),
            }
        }
        Err(e) => ck.fail(format!("setup failed: {e}")),
    }
    ck.finish(start)
}

/// Problem of the value-iteration checks with phibar from the periodic scan.
pub fn livsic_problem(c_over_lip: Option<f64>) -> Result<(LaxOleinikProblem, HyperbolicConstants)> {
    let sys = systems::cat_map();
    let phi = systems::observable_library(LIVSIC_OBSERVABLE, &sys)?;
    let (ebar, _) = orbits::birkhoff_min_periodic(&sys, &phi, 8)?;
    let grid = Grid::torus(&sys, LIVSIC_Q)?;
    let base = HyperbolicConstants::cat_defaults();
    let (fam, _) = charts::build_charts(&sys, &base, 64, 3)?;
    let net: Vec<Point> = grid.points.iter().map(torus_point).collect();
    let consts = charts::derive_constants(&base, &fam, &net, 64, 3);
    let c = c_over_lip.map_or(consts.k_lambda * phi.lip, |m| m * phi.lip);
    Ok((LaxOleinikProblem::new(grid, phi, ebar.value, c)?, consts))
}

fn torus_point(p: &PhasePoint) -> Point {
    match p {
        PhasePoint::Torus(x) => *x,
        PhasePoint::Word(_) => [f64::NAN; 2],
    }
}

fn criterion_8() -> CheckResult {
    let start = Instant::now();
    let mut ck = Check::new(Some(8), "livsic lower bound", None);
    match livsic_problem(None) {
        Ok((prob, consts)) => {
            let bound = -prob.phi.lip * consts.delta_as;
            let rep = laxoleinik::livsic_lower_bound(&prob, LIVSIC_STEPS, bound);
            ck.le("-min_n I_n", -rep.min_value, -bound);
            ck.record("K_Lambda", consts.k_lambda);
            ck.record("delta_AS", consts.delta_as);
            ck.record("phibar", prob.phibar);
            ck.record("final slope", rep.final_slope);
        }
        Err(e) => ck.fail(format!("setup failed: {e}")),
    }
    match livsic_problem(Some(0.0)) {
        Ok((prob, consts)) => {
            let bound = -prob.phi.lip * consts.delta_as;
            let rep = laxoleinik::livsic_lower_bound(&prob, LIVSIC_STEPS, bound);
            let min_phi = prob.weight.iter().cloned().fold(f64::INFINITY, f64::min);
            ck.record("C=0 slope", rep.final_slope);
            ck.record("C=0 expected slope", min_phi);
            ck.le("C=0 slope error", (rep.final_slope - min_phi).abs(), 1e-12 * (1.0 + min_phi.abs()) * LIVSIC_STEPS as f64);
            ck.require("C=0 run flagged as criterion failure", !rep.criterion_holds());
            ck.require("C=0 run strictly decreasing", min_phi < 0.0);
            ck.record("C=0 witness cost", rep.witness_cost);
        }
        Err(e) => ck.fail(format!("setup failed: {e}")),
    }
    ck.finish(start)
}

fn criterion_9() -> CheckResult {
    let start = Instant::now();
    let mut ck = Check::new(Some(9), "brute-force equivalence", None);
    let sys = systems::cat_map();
    let mut mismatches = 0;
    let mut cases = 0;
    for q in 1..=8 {
        let Ok(phi) = systems::observable_library(LIVSIC_OBSERVABLE, &sys) else { unreachable!() };
        let phibar = 0.3;
        let c = phi.lip;
        let prob = match Grid::torus(&sys, q).and_then(|g| LaxOleinikProblem::new(g, phi, phibar, c)) {
            Ok(p) => p.with_engine(Engine::Brute),
            Err(e) => {
                ck.fail(format!("setup failed: {e}"));
                break;
            }
        };
        let mut u = vec![0.0; prob.len()];
        for n in 1..=4 {
            u = prob.apply_values(&u);
            let vi = u.iter().cloned().fold(f64::INFINITY, f64::min);
            let brute = laxoleinik::exhaustive_path_minimum(&prob, n);
            cases += 1;
            if vi != brute {
                mismatches += 1;
                ck.notes.push(format!("q={q} n={n}: {vi:e} vs {brute:e}"));
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut tables = vec![systems::DEFAULT_EDGE_COST, [1.0, 0.0, 0.0], [0.5, 0.5, 0.5]];
    tables.extend((0..200).map(|_| [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)]));
    let mut cycle_mismatch = 0;
    for t in &tables {
        let edges = orbits::golden_mean_edges(t);
        let k = orbits::karp(2, &edges).map(|r| r.0);
        let e = orbits::exhaustive_min_cycle_mean(2, &edges).map(|r| r.0);
        if k != e {
            cycle_mismatch += 1;
        }
    }
    ck.le("value-iteration mismatches", mismatches as f64, 0.0);
    ck.le("cycle-mean mismatches", cycle_mismatch as f64, 0.0);
    ck.record("path cases", cases as f64);
    ck.record("edge tables", tables.len() as f64);
    ck.finish(start)
}

fn criterion_10() -> CheckResult {
    let start = Instant::now();
    let mut ck = Check::new(Some(10), "periodic point census", None);
    let mut mismatches = 0;
    for n in 1..=12 {
        match orbits::census(n) {
            Ok((det, total, exact)) => {
                let lu = systems::lambda_u();
                let closed = (lu.powi(n as i32) + lu.powi(-(n as i32)) - 2.0).round() as i128;
                if !exact || det != total as i128 || det != closed {
                    mismatches += 1;
                    ck.notes.push(format!("n={n}: det={det} points={total} closed form={closed}"));
                }
                ck.record(&format!("n{n}"), det as f64);
            }
            Err(e) => {
                mismatches += 1;
                ck.notes.push(format!("n={n}: {e}"));
            }
        }
    }
    ck.main = (mismatches as f64, 0.0);
    ck.require("census matches |det(A^n - I)| for n <= 12", mismatches == 0);
    ck.finish(start)
}

fn operator_laws() -> CheckResult {
    let start = Instant::now();
    let mut ck = Check::new(None, "operator laws", None);
    let mut failures = 0;
    let mut trials = 0;
    let run = || -> Result<Vec<laxoleinik::OperatorLawsReport>> {
        let cat = systems::cat_map();
        let gms = systems::golden_mean_shift(SHIFT_DEPTH)?;
        let p1 = LaxOleinikProblem::new(Grid::torus(&cat, 16)?, systems::observable_library("coscos", &cat)?, 0.0, 5.0)?;
        let p2 = LaxOleinikProblem::new(Grid::torus(&cat, 48)?, systems::observable_library(LIVSIC_OBSERVABLE, &cat)?, 0.2, 3.0)?.with_engine(Engine::Sweep);
        let p3 = LaxOleinikProblem::new(Grid::words(&gms)?, systems::observable_library("edgecost:default", &gms)?, 0.1, 2.0)?;
        Ok(vec![laxoleinik::check_operator_laws(&p1, 200, 1), laxoleinik::check_operator_laws(&p2, 200, 2), laxoleinik::check_operator_laws(&p3, 200, 3)])
    };
    match run() {
        Ok(reports) => {
            for r in &reports {
                trials += r.trials;
                failures += r.monotonicity_failures + r.additivity_failures + r.inf_commutation_failures + r.contraction_failures;
                ck.record("max additivity error", r.max_additivity_error.max(*ck.measured.get("max additivity error").unwrap_or(&0.0)));
            }
        }
        Err(e) => ck.fail(format!("setup failed: {e}")),
    }
    ck.le("law failures", failures as f64, 0.0);
    ck.record("trials", trials as f64);
    ck.finish(start)
}

/// Runs the checks matching `--only` in order.
pub fn run(filter: Option<&str>) -> VerificationReport {
    run_selected(|c, a| selected(filter, c, a))
}

/// Runs the checks accepted by `want(criterion, anchor)` in order.
pub fn run_selected(want: impl Fn(Option<u8>, &str) -> bool) -> VerificationReport {
    let mut out = Vec::new();
    let need_shift = want(Some(1), ANCHORS[0].1) || want(Some(2), ANCHORS[1].1) || want(Some(3), ANCHORS[2].1);
    let shift = if need_shift { Some(shift_run()) } else { None };
    if let Some(s) = &shift {
        if want(Some(1), ANCHORS[0].1) {
            out.push(criterion_1(s));
        }
        if want(Some(2), ANCHORS[1].1) || want(Some(3), ANCHORS[2].1) {
            let (r2, r3) = criterion_2_and_3(s);
            if want(Some(2), ANCHORS[1].1) {
                out.push(r2);
            }
            if want(Some(3), ANCHORS[2].1) {
                out.push(r3);
            }
        }
    }
    let rest: [(usize, fn() -> CheckResult); 8] =
        [(3, criterion_4), (4, criterion_5), (5, criterion_6), (6, criterion_7), (7, criterion_8), (8, criterion_9), (9, criterion_10), (10, operator_laws)];
    for (k, f) in rest {
        let (c, a) = ANCHORS[k];
        if want(c, a) {
            out.push(f());
        }
    }
    VerificationReport::new(out)
}

/// Runs a single check by criterion number (1 to 10).
pub fn run_criterion(n: u8) -> VerificationReport {
    run(Some(&n.to_string()))
}

/// Reference observable and system used in documentation examples.
pub fn reference_shift() -> Result<(DynamicalSystem, Observable)> {
    let sys = systems::golden_mean_shift(SHIFT_DEPTH)?;
    let phi = systems::observable_library("edgecost:default", &sys)?;
    Ok((sys, phi))
}
