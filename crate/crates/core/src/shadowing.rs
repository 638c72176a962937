//! Pseudo-orbits, the graph-transform shadowing construction, periodic
//! shadowing and independent verification of the resulting bounds.

use crate::charts::{self, AdaptedChart, ChartFamily, HyperbolicConstants, LocalMap, PlGraph};
use crate::error::{Error, Result};
use crate::linalg::{self, Vec2};
use crate::orbits;
use crate::systems::{self, DynamicalSystem, Point};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

/// Agreement required between stored and recomputed distances.
pub const DISTANCE_CONSISTENCY: f64 = 1e-14;

/// Absolute floating-point allowance in bound comparisons. Root solves leave
/// shadow points off by a few ulps even when every step error is zero.
pub const ROUNDING_ALLOWANCE: f64 = 1e-14;

#[derive(Clone, Debug, Serialize)]
pub struct PseudoOrbit {
    pub points: Vec<Point>,
    /// delta[k - 1] = d(f(x_{k-1}), x_k) for k = 1..n.
    pub delta: Vec<f64>,
    pub periodic: bool,
    pub noise: f64,
    pub seed: Option<u64>,
}

impl PseudoOrbit {
    pub fn from_points(system: &DynamicalSystem, points: Vec<Point>) -> Self {
        let points: Vec<Point> = points.into_iter().map(systems::reduce).collect();
        let delta = points.windows(2).map(|w| systems::torus_dist(system.map_torus(w[0]), w[1])).collect();
        PseudoOrbit { points, delta, periodic: false, noise: f64::NAN, seed: None }
    }

    /// Closes the cycle `points` (x_0..x_{n-1}) by appending x_n = x_0.
    pub fn periodic_from_points(system: &DynamicalSystem, mut points: Vec<Point>) -> Self {
        points.push(points[0]);
        let mut p = Self::from_points(system, points);
        p.periodic = true;
        p
    }

    pub fn len(&self) -> usize {
        self.points.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.points.len() <= 1
    }

    pub fn max_delta(&self) -> f64 {
        self.delta.iter().fold(0.0, |m, d| m.max(*d))
    }

    pub fn sum_delta(&self) -> f64 {
        self.delta.iter().sum()
    }

    /// Largest gap between stored and recomputed step errors.
    pub fn consistency(&self, system: &DynamicalSystem) -> f64 {
        self.points
            .windows(2)
            .zip(&self.delta)
            .map(|(w, d)| (systems::torus_dist(system.map_torus(w[0]), w[1]) - d).abs())
            .fold(0.0, f64::max)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("i,x1,x2,delta\n");
        for (i, p) in self.points.iter().enumerate() {
            let d = if i == 0 { 0.0 } else { self.delta[i - 1] };
            s.push_str(&format!("{i},{:.17e},{:.17e},{:.17e}\n", p[0], p[1], d));
        }
        s
    }

    /// Reads rows `x1,x2` (extra columns ignored, header optional).
    pub fn from_csv(system: &DynamicalSystem, text: &str) -> Result<Self> {
        let mut pts = Vec::new();
        for (ln, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split(',').map(str::trim).collect();
            let nums: Vec<f64> = cols.iter().filter_map(|c| c.parse::<f64>().ok()).collect();
            if nums.len() != cols.len() {
                if ln == 0 {
                    continue;
                }
                return Err(Error::InvalidArgument(format!("line {}: non-numeric field", ln + 1)));
            }
            // with an index column the coordinates are columns 1 and 2
            let (a, b) = if cols.len() >= 3 { (nums[1], nums[2]) } else if cols.len() == 2 { (nums[0], nums[1]) } else {
                return Err(Error::InvalidArgument(format!("line {}: expected two coordinates", ln + 1)));
            };
            pts.push([a, b]);
        }
        if pts.len() < 2 {
            return Err(Error::InvalidArgument("pseudo-orbit needs at least two points".into()));
        }
        Ok(Self::from_points(system, pts))
    }
}

/// Uniform noise vector with eigen coordinates in [-noise, noise].
fn noise_vector<R: Rng>(noise: f64, rng: &mut R) -> Vec2 {
    if noise == 0.0 {
        return [0.0, 0.0];
    }
    systems::from_eigen([rng.gen_range(-noise..=noise), rng.gen_range(-noise..=noise)])
}

/// x_k = f(x_{k-1}) + xi_k with |xi_k| <= noise. In periodic mode the loop is
/// closed by x_n = x_0 and the closing error is recorded as delta_n.
pub fn make_pseudo_orbit(system: &DynamicalSystem, x0: Point, n: usize, noise: f64, seed: u64, periodic: bool) -> Result<PseudoOrbit> {
    if !system.is_torus() {
        return Err(Error::InvalidArgument("pseudo-orbits are generated on torus systems".into()));
    }
    if !(noise >= 0.0) || n == 0 {
        return Err(Error::InvalidArgument("need noise >= 0 and n >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pts = vec![systems::reduce(x0)];
    let steps = if periodic { n - 1 } else { n };
    for _ in 0..steps {
        let fx = system.map_torus(*pts.last().unwrap());
        pts.push(systems::reduce(linalg::add(fx, noise_vector(noise, &mut rng))));
    }
    let mut p = if periodic { PseudoOrbit::periodic_from_points(system, pts) } else { PseudoOrbit::from_points(system, pts) };
    p.noise = noise;
    p.seed = Some(seed);
    Ok(p)
}

/// Periodic pseudo-orbit of length n near a seeded exact periodic orbit of the
/// linear cat map: x_i = A^i p + xi_i with x_n = x_0.
pub fn periodic_pseudo_orbit(system: &DynamicalSystem, n: usize, noise: f64, seed: u64) -> Result<PseudoOrbit> {
    let (d, nums) = orbits::periodic_numerators(n)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // prefer points of exact period n
    let exact: Vec<[i128; 2]> = nums
        .iter()
        .copied()
        .filter(|k| {
            let mut m = *k;
            (1..n).all(|_| {
                m = [(2 * m[0] + m[1]).rem_euclid(d), (m[0] + m[1]).rem_euclid(d)];
                m != *k
            })
        })
        .collect();
    let pool = if exact.is_empty() { &nums } else { &exact };
    let k = pool[rng.gen_range(0..pool.len())];
    let mut base = Vec::with_capacity(n);
    let mut m = k;
    for _ in 0..n {
        base.push([m[0] as f64 / d as f64, m[1] as f64 / d as f64]);
        m = [(2 * m[0] + m[1]).rem_euclid(d), (m[0] + m[1]).rem_euclid(d)];
    }
    let pts = base.into_iter().map(|b| systems::reduce(linalg::add(b, noise_vector(noise, &mut rng)))).collect();
    let mut p = PseudoOrbit::periodic_from_points(system, pts);
    p.noise = noise;
    p.seed = Some(seed);
    Ok(p)
}

/// Pseudo-orbit that follows a true orbit except for one injected error at step m.
pub fn single_error_orbit(system: &DynamicalSystem, x0: Point, n: usize, m: usize, error: Vec2) -> PseudoOrbit {
    let mut pts = vec![systems::reduce(x0)];
    for k in 1..=n {
        let mut x = system.map_torus(pts[k - 1]);
        if k == m {
            x = systems::reduce(linalg::add(x, error));
        }
        pts.push(x);
    }
    PseudoOrbit::from_points(system, pts)
}

#[derive(Clone, Debug, Serialize)]
pub struct ShadowingGrid {
    /// graphs[i][k] = G_{i,k}, k = 0..=i.
    #[serde(skip)]
    pub graphs: Vec<Vec<PlGraph>>,
    /// points[i][j][k] = Q_i(j,k), j = 0..=n-i, k = 0..=i.
    #[serde(skip)]
    pub points: Vec<Vec<Vec<Vec2>>>,
    /// h[i][j] = |P^s (Q_i(j,0) - Q_i(j,i))|_i.
    pub h: Vec<Vec<f64>>,
    /// max |f_{i}(Q_i(j,k)) - Q_{i+1}(j-1,k+1)| over the grid.
    pub max_step_defect: f64,
    /// max distance of Q_i(j,k) to Graph(G_{i,k}).
    pub max_graph_defect: f64,
}

#[derive(Clone, Debug)]
pub struct ShadowOptions {
    pub nodes_per_side: usize,
    /// Build the full triangular grid. `None` builds it when n <= 64.
    pub full_grid: Option<bool>,
}

impl Default for ShadowOptions {
    fn default() -> Self {
        ShadowOptions { nodes_per_side: charts::DEFAULT_NODES_PER_SIDE, full_grid: None }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ShadowResult {
    pub x: Vec<Point>,
    /// Shadow orbit in the ambient space: p[i] = gamma_i(chart_p[i]).
    pub p: Vec<Point>,
    pub chart_p: Vec<Vec2>,
    pub delta: Vec<f64>,
    /// |f_{k-1}(0)|_k, the step errors in chart units.
    pub chart_delta: Vec<f64>,
    /// d(x_i, p_i).
    pub dist: Vec<f64>,
    /// |p_i|_i, the chart-unit distances.
    pub chart_dist: Vec<f64>,
    /// max_i |f_i(p_i) - p_{i+1}|_{i+1}.
    pub chart_orbit_defect: f64,
    /// max_i d(f(p_i), p_{i+1}).
    pub orbit_defect: f64,
    pub within_eps_as: bool,
    pub grid: Option<ShadowingGrid>,
}

fn local_maps<'a>(family: &'a ChartFamily, pts: &[Point]) -> Vec<LocalMap<'a>> {
    let charts: Vec<AdaptedChart> = pts.iter().map(|x| family.chart(*x)).collect();
    (0..pts.len() - 1).map(|i| family.local_map_from(charts[i].clone(), charts[i + 1].clone())).collect()
}

fn check_admissible(maps: &[LocalMap], c: &HyperbolicConstants) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(maps.len());
    for (i, lm) in maps.iter().enumerate() {
        let e = AdaptedChart::norm(lm.eval([0.0, 0.0]));
        if !(e <= c.eps_rho) {
            return Err(Error::LeavesDomain { index: i + 1, error: e, limit: c.eps_rho });
        }
        out.push(e);
    }
    Ok(out)
}

/// Point on Graph(g) whose image under `lm` has unstable coordinate `target`.
fn pull_back(g: &PlGraph, lm: &LocalMap, target: f64) -> Result<Vec2> {
    let v = charts::solve_on_graph(g, lm, target)?;
    Ok([v, g.eval(v)])
}

/// Shadows `pseudo` with the graph-transform construction in the charts
/// centred at the pseudo-orbit points.
pub fn shadow(pseudo: &PseudoOrbit, family: &ChartFamily, c: &HyperbolicConstants, opts: &ShadowOptions) -> Result<ShadowResult> {
    c.check_shadowing_eta()?;
    let n = pseudo.len();
    if n == 0 {
        return Err(Error::InvalidArgument("pseudo-orbit has no steps".into()));
    }
    let maps = local_maps(family, &pseudo.points);
    let chart_delta = check_admissible(&maps, c)?;
    let m = opts.nodes_per_side;
    // diagonal graphs G_{i,i}
    let mut diag = Vec::with_capacity(n + 1);
    diag.push(PlGraph::constant(c.rho, m, 0.0));
    for i in 1..=n {
        let g = charts::graph_transform(&diag[i - 1], &maps[i - 1], c)?;
        diag.push(g);
    }
    // p_n on G_{n,n} over P^u q_n = 0, then pull back along the diagonal
    let mut cp = vec![[0.0; 2]; n + 1];
    cp[n] = [0.0, diag[n].eval(0.0)];
    for i in (0..n).rev() {
        cp[i] = pull_back(&diag[i], &maps[i], cp[i + 1][0])?;
    }
    let grid = if opts.full_grid.unwrap_or(n <= 64) { Some(build_grid(&maps, c, m, &diag)?) } else { None };
    Ok(finish(pseudo, family, c, &maps, cp, chart_delta, grid))
}

fn finish(pseudo: &PseudoOrbit, family: &ChartFamily, c: &HyperbolicConstants, maps: &[LocalMap], cp: Vec<Vec2>, chart_delta: Vec<f64>, grid: Option<ShadowingGrid>) -> ShadowResult {
    let n = pseudo.len();
    let p: Vec<Point> = (0..=n)
        .map(|i| {
            let src = if i < n { &maps[i].src } else { &maps[n - 1].dst };
            systems::reduce(src.to_ambient(cp[i]))
        })
        .collect();
    let chart_orbit_defect = (0..n).map(|i| AdaptedChart::norm(linalg::sub(maps[i].eval(cp[i]), cp[i + 1]))).fold(0.0, f64::max);
    let orbit_defect = (0..n).map(|i| systems::torus_dist(family.system.map_torus(p[i]), p[i + 1])).fold(0.0, f64::max);
    let dist = pseudo.points.iter().zip(&p).map(|(x, y)| systems::torus_dist(*x, *y)).collect();
    let chart_dist = cp.iter().map(|v| AdaptedChart::norm(*v)).collect();
    ShadowResult {
        x: pseudo.points.clone(),
        p,
        chart_p: cp,
        delta: pseudo.delta.clone(),
        chart_delta,
        dist,
        chart_dist,
        chart_orbit_defect,
        orbit_defect,
        within_eps_as: pseudo.max_delta() <= c.eps_as,
        grid,
    }
}

/// The full triangular array Q_i(j,k) together with the diagnostics h_{i,j}.
fn build_grid(maps: &[LocalMap], c: &HyperbolicConstants, m: usize, diag: &[PlGraph]) -> Result<ShadowingGrid> {
    let n = maps.len();
    let mut graphs: Vec<Vec<PlGraph>> = Vec::with_capacity(n + 1);
    for i in 0..=n {
        let mut row = Vec::with_capacity(i + 1);
        row.push(PlGraph::constant(c.rho, m, 0.0));
        for k in 1..=i {
            if k == i {
                row.push(diag[i].clone());
            } else {
                let g = charts::graph_transform(&graphs[i - 1][k - 1], &maps[i - 1], c)?;
                row.push(g);
            }
        }
        graphs.push(row);
    }
    let mut points: Vec<Vec<Vec<Vec2>>> = (0..=n).map(|i| vec![vec![[0.0; 2]; i + 1]; n - i + 1]).collect();
    for i in 0..=n {
        for k in 0..=i {
            points[i][0][k] = [0.0, graphs[i][k].eval(0.0)];
        }
    }
    let mut max_step_defect: f64 = 0.0;
    for i in (1..=n).rev() {
        for j in 1..=n - i + 1 {
            for k in 0..i {
                let target = points[i][j - 1][k + 1];
                let q = pull_back(&graphs[i - 1][k], &maps[i - 1], target[0])?;
                max_step_defect = max_step_defect.max(AdaptedChart::norm(linalg::sub(maps[i - 1].eval(q), target)));
                points[i - 1][j][k] = q;
            }
        }
    }
    let mut max_graph_defect: f64 = 0.0;
    let mut h = Vec::with_capacity(n + 1);
    for i in 0..=n {
        let mut row = Vec::with_capacity(n - i + 1);
        for j in 0..=n - i {
            row.push((points[i][j][0][1] - points[i][j][i][1]).abs());
            for k in 0..=i {
                let q = points[i][j][k];
                max_graph_defect = max_graph_defect.max((q[1] - graphs[i][k].eval(q[0])).abs());
            }
        }
        h.push(row);
    }
    Ok(ShadowingGrid { graphs, points, h, max_step_defect, max_graph_defect })
}

/// Lifted error vectors e_k = x_k - A x_{k-1} in eigen coordinates.
fn linear_errors(pseudo: &PseudoOrbit) -> Vec<Vec2> {
    pseudo
        .points
        .windows(2)
        .map(|w| systems::to_eigen(systems::torus_delta(w[1], systems::reduce(linalg::mat_vec(&systems::CAT, w[0])))))
        .collect()
}

fn linear_result(pseudo: &PseudoOrbit, corr: Vec<Vec2>) -> ShadowResult {
    let cat = systems::cat_map();
    let n = pseudo.len();
    let p: Vec<Point> = pseudo.points.iter().zip(&corr).map(|(x, c)| systems::reduce(linalg::add(*x, systems::from_eigen(*c)))).collect();
    let dist: Vec<f64> = pseudo.points.iter().zip(&p).map(|(x, y)| systems::torus_dist(*x, *y)).collect();
    let orbit_defect = (0..n).map(|i| systems::torus_dist(cat.map_torus(p[i]), p[i + 1])).fold(0.0, f64::max);
    ShadowResult {
        x: pseudo.points.clone(),
        chart_dist: corr.iter().map(|c| linalg::sup_norm(*c)).collect(),
        p,
        chart_p: corr,
        delta: pseudo.delta.clone(),
        chart_delta: pseudo.delta.clone(),
        dist,
        chart_orbit_defect: orbit_defect,
        orbit_defect,
        within_eps_as: true,
        grid: None,
    }
}

fn require_linear(system: &DynamicalSystem) -> Result<()> {
    if system.is_linear_cat() {
        Ok(())
    } else {
        Err(Error::InvalidArgument("the exact linear oracle needs the linear cat map".into()))
    }
}

/// Bounded correction sequence for the linear cat map, summed in eigen
/// coordinates: stable parts forward from c_0 = 0, unstable parts backward
/// from c_n = 0.
pub fn shadow_exact_linear(pseudo: &PseudoOrbit, system: &DynamicalSystem) -> Result<ShadowResult> {
    require_linear(system)?;
    let e = linear_errors(pseudo);
    let n = pseudo.len();
    let (lu, ls) = (systems::lambda_u(), systems::lambda_s());
    let mut corr = vec![[0.0; 2]; n + 1];
    for i in 1..=n {
        corr[i][1] = ls * corr[i - 1][1] - e[i - 1][1];
    }
    for i in (0..n).rev() {
        corr[i][0] = (corr[i + 1][0] + e[i][0]) / lu;
    }
    Ok(linear_result(pseudo, corr))
}

/// Exact periodic correction for the linear cat map: (A^n - I) c_0 = sum_k A^{n-k} e_k.
pub fn shadow_periodic_linear(pseudo: &PseudoOrbit, system: &DynamicalSystem) -> Result<ShadowResult> {
    require_linear(system)?;
    if !pseudo.periodic {
        return Err(Error::InvalidArgument("pseudo-orbit is not periodic".into()));
    }
    let e = linear_errors(pseudo);
    let n = pseudo.len();
    let lam = [systems::lambda_u(), systems::lambda_s()];
    let mut corr = vec![[0.0; 2]; n + 1];
    for c in 0..2 {
        let rhs: f64 = (1..=n).map(|k| lam[c].powi((n - k) as i32) * e[k - 1][c]).sum();
        corr[0][c] = rhs / (lam[c].powi(n as i32) - 1.0);
        for k in 1..=n {
            corr[k][c] = lam[c] * corr[k - 1][c] - e[k - 1][c];
        }
    }
    Ok(linear_result(pseudo, corr))
}

#[derive(Clone, Debug)]
pub struct PeriodicOptions {
    pub s_max: usize,
    /// First extension factor tried.
    pub s_start: usize,
    pub s_step: usize,
    pub tol: f64,
    pub nodes_per_side: usize,
}

impl Default for PeriodicOptions {
    fn default() -> Self {
        PeriodicOptions { s_max: 12, s_start: 1, s_step: 1, tol: 1e-12, nodes_per_side: charts::DEFAULT_NODES_PER_SIDE }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct PeriodicShadowResult {
    pub n: usize,
    pub x: Vec<Point>,
    /// p[i] = f^i(p) for i = 0..=n, from the central window.
    pub p: Vec<Point>,
    pub delta: Vec<f64>,
    pub dist: Vec<f64>,
    /// d(f^n(p), p) with f^n evaluated by direct iteration.
    pub closure: f64,
    /// max_i d(f(p_i), p_{i+1}) over the window.
    pub orbit_defect: f64,
    /// Extension factor s at which the central window stabilised.
    pub s: usize,
    /// Sup change of the central window between the last two extensions.
    pub last_change: f64,
    pub within_eps_as: bool,
}

/// Shadows the s-fold periodic extension over [-sn, sn] for growing s until
/// the central window stops moving, and returns the periodic orbit found there.
///
/// Each period block has at least 8 steps, so short periods are repeated
/// ceil(8/n) times per unit of s.
pub fn shadow_periodic(pseudo: &PseudoOrbit, family: &ChartFamily, c: &HyperbolicConstants, opts: &PeriodicOptions) -> Result<PeriodicShadowResult> {
    if !pseudo.periodic {
        return Err(Error::InvalidArgument("pseudo-orbit is not periodic".into()));
    }
    c.check_shadowing_eta()?;
    let n = pseudo.len();
    let cycle = &pseudo.points[..n];
    let block = n * n.max(8).div_ceil(n);
    let sopts = ShadowOptions { nodes_per_side: opts.nodes_per_side, full_grid: Some(false) };
    let mut prev: Option<Vec<Vec2>> = None;
    let mut s = opts.s_start.max(1);
    let mut last_change = f64::INFINITY;
    while s <= opts.s_max {
        let half = s * block;
        let pts: Vec<Point> = (0..=2 * half).map(|j| cycle[j % n]).collect();
        let ext = PseudoOrbit::from_points(&family.system, pts);
        let res = shadow(&ext, family, c, &sopts)?;
        let window: Vec<Vec2> = res.chart_p[half..=half + n].to_vec();
        if let Some(pw) = &prev {
            last_change = window.iter().zip(pw).map(|(a, b)| AdaptedChart::norm(linalg::sub(*a, *b))).fold(0.0, f64::max);
            if last_change <= opts.tol {
                let p: Vec<Point> = res.p[half..=half + n].to_vec();
                let mut y = p[0];
                for _ in 0..n {
                    y = family.system.map_torus(y);
                }
                let closure = systems::torus_dist(y, p[0]);
                let dist = pseudo.points.iter().zip(&p).map(|(a, b)| systems::torus_dist(*a, *b)).collect();
                let orbit_defect = (0..n).map(|i| systems::torus_dist(family.system.map_torus(p[i]), p[i + 1])).fold(0.0, f64::max);
                return Ok(PeriodicShadowResult {
                    n,
                    x: pseudo.points.clone(),
                    p,
                    delta: pseudo.delta.clone(),
                    dist,
                    closure,
                    orbit_defect,
                    s,
                    last_change,
                    within_eps_as: pseudo.max_delta() <= c.eps_as,
                });
            }
        }
        prev = Some(window);
        s += opts.s_step.max(1);
    }
    Err(Error::InfeasibleConstants { check: format!("periodic window stabilises within s_max = {}", opts.s_max), margin: opts.tol - last_change })
}

#[derive(Clone, Debug, Serialize)]
pub struct BoundCheck {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    pub pass: bool,
    /// Index attaining the smallest slack, for per-index bounds.
    pub index: Option<usize>,
}

impl BoundCheck {
    fn new(name: &str, lhs: f64, rhs: f64, index: Option<usize>) -> Self {
        BoundCheck { name: name.into(), lhs, rhs, slack: rhs - lhs, pass: lhs <= rhs + ROUNDING_ALLOWANCE, index }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct BoundsReport {
    pub k_as: f64,
    pub lambda_as: f64,
    pub checks: Vec<BoundCheck>,
    pub passed: bool,
}

/// Recomputes step errors and shadow distances from the raw points and checks
/// the max bound, the exponentially weighted per-index bound and the summed
/// bound with (K_AS, lambda_AS). Reported values that disagree with the
/// recomputation fail the consistency entries.
pub fn verify_shadowing_bounds(system: &DynamicalSystem, pseudo: &PseudoOrbit, result: &ShadowResult, c: &HyperbolicConstants) -> BoundsReport {
    let n = pseudo.len();
    let delta: Vec<f64> = pseudo.points.windows(2).map(|w| systems::torus_dist(system.map_torus(w[0]), w[1])).collect();
    let dist: Vec<f64> = pseudo.points.iter().zip(&result.p).map(|(x, y)| systems::torus_dist(*x, *y)).collect();
    let dgap = delta.iter().zip(&result.delta).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let pgap = if result.dist.len() == dist.len() {
        dist.iter().zip(&result.dist).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    } else {
        f64::INFINITY
    };
    let (k, lam) = (c.k_as, c.lambda_as);
    let max_d = dist.iter().fold(0.0, |m: f64, d| m.max(*d));
    let max_delta = delta.iter().fold(0.0, |m: f64, d| m.max(*d));
    let sum_d: f64 = dist.iter().sum();
    let sum_delta: f64 = delta.iter().sum();
    let mut worst = BoundCheck::new("exponential locality", 0.0, 0.0, Some(0));
    worst.slack = f64::INFINITY;
    for i in 0..=n {
        let rhs: f64 = k * (1..=n).map(|kk| delta[kk - 1] * (-lam * (kk as f64 - i as f64).abs()).exp()).sum::<f64>();
        let b = BoundCheck::new("exponential locality", dist[i], rhs, Some(i));
        if b.slack < worst.slack {
            worst = b;
        }
    }
    let checks = vec![
        BoundCheck::new("step errors match recomputation", dgap, DISTANCE_CONSISTENCY, None),
        BoundCheck::new("shadow distances match recomputation", pgap, DISTANCE_CONSISTENCY, None),
        BoundCheck::new("max distance", max_d, k * max_delta, None),
        worst,
        BoundCheck::new("summed distances", sum_d, k * sum_delta, None),
    ];
    let passed = checks.iter().all(|c| c.pass);
    BoundsReport { k_as: k, lambda_as: lam, checks, passed }
}

/// Periodic bounds with K_APS: summed distances over i = 1..n and the max form.
pub fn verify_periodic_bounds(system: &DynamicalSystem, res: &PeriodicShadowResult, c: &HyperbolicConstants) -> BoundsReport {
    let n = res.n;
    let delta: Vec<f64> = res.x.windows(2).map(|w| systems::torus_dist(system.map_torus(w[0]), w[1])).collect();
    let dist: Vec<f64> = res.x.iter().zip(&res.p).map(|(x, y)| systems::torus_dist(*x, *y)).collect();
    let sum_d: f64 = dist[1..=n].iter().sum();
    let max_d = dist[..n].iter().fold(0.0, |m: f64, d| m.max(*d));
    let sum_delta: f64 = delta.iter().sum();
    let max_delta = delta.iter().fold(0.0, |m: f64, d| m.max(*d));
    let checks = vec![
        BoundCheck::new("periodic summed distances", sum_d, c.k_aps * sum_delta, None),
        BoundCheck::new("periodic max distance", max_d, c.k_aps * max_delta, None),
    ];
    let passed = checks.iter().all(|c| c.pass);
    BoundsReport { k_as: c.k_aps, lambda_as: c.lambda_as, checks, passed }
}

/// Chart-unit bounds with (K_Gamma, lambda_Gamma) and the tilde constant for
/// the grid construction itself.
pub fn verify_chart_bounds(result: &ShadowResult, c: &HyperbolicConstants) -> BoundsReport {
    let n = result.chart_delta.len();
    let d = &result.chart_delta;
    let q = &result.chart_dist;
    let (k, lam) = (c.k_gamma, c.lambda_gamma);
    let mut worst = BoundCheck::new("chart exponential locality", 0.0, 0.0, Some(0));
    worst.slack = f64::INFINITY;
    for i in 0..=n {
        let rhs = k * (1..=n).map(|kk| d[kk - 1] * (-lam * (kk as f64 - i as f64).abs()).exp()).sum::<f64>();
        let b = BoundCheck::new("chart exponential locality", q[i], rhs, Some(i));
        if b.slack < worst.slack {
            worst = b;
        }
    }
    let checks = vec![
        worst,
        BoundCheck::new("chart summed distances", q.iter().sum(), k * d.iter().sum::<f64>(), None),
        BoundCheck::new("chart max distance", q.iter().fold(0.0, |m: f64, v| m.max(*v)), k * d.iter().fold(0.0, |m: f64, v| m.max(*v)), None),
        BoundCheck::new("true orbit in charts", result.chart_orbit_defect, 1e-10, None),
    ];
    let passed = checks.iter().all(|c| c.pass);
    BoundsReport { k_as: k, lambda_as: lam, checks, passed }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup() -> (DynamicalSystem, ChartFamily, HyperbolicConstants) {
        let cat = systems::cat_map();
        let base = HyperbolicConstants::cat_defaults();
        let (fam, _) = charts::build_charts(&cat, &base, 32, 3).unwrap();
        let mut c = base.clone();
        c.fill_shadowing(1.0, systems::lambda_u());
        (cat, fam, c)
    }

    #[test]
    fn true_orbit_is_its_own_shadow() {
        let (cat, fam, c) = setup();
        let po = make_pseudo_orbit(&cat, [0.3, 0.7], 20, 0.0, 1, false).unwrap();
        let r = shadow(&po, &fam, &c, &ShadowOptions::default()).unwrap();
        assert!(r.dist.iter().all(|d| *d < 1e-15));
        let rep = verify_shadowing_bounds(&cat, &po, &r, &c);
        assert!(rep.passed, "{rep:?}");
    }

    #[test]
    fn grid_is_consistent() {
        let (cat, fam, c) = setup();
        let po = make_pseudo_orbit(&cat, [0.1, 0.2], 12, 1e-4, 5, false).unwrap();
        let r = shadow(&po, &fam, &c, &ShadowOptions { full_grid: Some(true), ..Default::default() }).unwrap();
        let g = r.grid.as_ref().unwrap();
        assert!(g.max_step_defect < 1e-12);
        assert!(g.max_graph_defect < 1e-15);
        // p_i = Q_i(n - i, i)
        for i in 0..=12 {
            let q = g.points[i][12 - i][i];
            assert!(linalg::sup_norm(linalg::sub(q, r.chart_p[i])) < 1e-12);
        }
    }

    #[test]
    fn inflated_distances_fail_verification() {
        let (cat, fam, c) = setup();
        let po = make_pseudo_orbit(&cat, [0.4, 0.1], 30, 1e-4, 9, false).unwrap();
        let mut r = shadow(&po, &fam, &c, &ShadowOptions::default()).unwrap();
        assert!(verify_shadowing_bounds(&cat, &po, &r, &c).passed);
        r.dist.iter_mut().for_each(|d| *d *= 2.0);
        assert!(!verify_shadowing_bounds(&cat, &po, &r, &c).passed);
    }

    #[test]
    fn csv_round_trip() {
        let cat = systems::cat_map();
        let po = make_pseudo_orbit(&cat, [0.4, 0.1], 5, 1e-4, 9, false).unwrap();
        let back = PseudoOrbit::from_csv(&cat, &po.to_csv()).unwrap();
        assert_eq!(back.points, po.points);
    }
}
