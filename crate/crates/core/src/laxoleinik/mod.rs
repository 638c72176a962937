//! The discrete Lax-Oleinik operator on a finite net, the calibrated-subaction
//! solver and diagnostics of the positive Livsic criterion.

mod diagnostics;
mod returns;
mod solver;
pub mod sweep;

pub use diagnostics::*;
pub use returns::*;
pub use solver::*;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::systems::{self, DynamicalSystem, Observable, PhasePoint, Point, Word};
use serde::Serialize;
use std::sync::OnceLock;
use sweep::SweepPlan;

/// Grids with more points than this use the sweep engine by default.
pub const BRUTE_FORCE_LIMIT: usize = 1024;

/// A finite net of the phase space together with the images of its points.
#[derive(Clone, Debug)]
pub struct Grid {
    pub system: DynamicalSystem,
    pub points: Vec<PhasePoint>,
    pub images: Vec<PhasePoint>,
    /// Grid index of f(x) when the image is itself a grid point.
    pub image_index: Vec<Option<usize>>,
    /// Sup over the phase space of the distance to the nearest grid point.
    pub mesh: f64,
    pub q: Option<usize>,
}

impl Grid {
    /// The q x q lattice of the torus. For the linear cat map the images are
    /// computed in integer arithmetic and land on the lattice exactly.
    pub fn torus(system: &DynamicalSystem, q: usize) -> Result<Self> {
        if !system.is_torus() {
            return Err(Error::InvalidArgument("lattice grids need a torus system".into()));
        }
        if q == 0 {
            return Err(Error::InvalidArgument("grid size must be >= 1".into()));
        }
        let linear = system.is_linear_cat();
        let mut points = Vec::with_capacity(q * q);
        let mut images = Vec::with_capacity(q * q);
        let mut image_index = Vec::with_capacity(q * q);
        for i in 0..q {
            for j in 0..q {
                let x = [i as f64 / q as f64, j as f64 / q as f64];
                points.push(PhasePoint::Torus(x));
                if linear {
                    let (a, b) = ((2 * i + j) % q, (i + j) % q);
                    images.push(PhasePoint::Torus([a as f64 / q as f64, b as f64 / q as f64]));
                    image_index.push(Some(a * q + b));
                } else {
                    images.push(PhasePoint::Torus(system.map_torus(x)));
                    image_index.push(None);
                }
            }
        }
        Ok(Grid { system: system.clone(), points, images, image_index, mesh: systems::torus_covering_radius() / q as f64, q: Some(q) })
    }

    /// Every admissible word of the shift; the metric is exact so the mesh is 0.
    pub fn words(system: &DynamicalSystem) -> Result<Self> {
        let depth = system.depth().ok_or_else(|| Error::InvalidArgument("word grids need a symbolic system".into()))?;
        let words = systems::golden_mean_words(depth);
        let index = |w: &Word| words.binary_search(w).ok();
        let images: Vec<PhasePoint> = words.iter().map(|w| PhasePoint::Word(w.shift())).collect();
        let image_index = words.iter().map(|w| index(&w.shift())).collect();
        Ok(Grid { system: system.clone(), points: words.into_iter().map(PhasePoint::Word).collect(), images, image_index, mesh: 0.0, q: None })
    }

    /// Lattice of size q on the torus, all words on the shift.
    pub fn for_system(system: &DynamicalSystem, q: usize) -> Result<Self> {
        if system.is_torus() {
            Self::torus(system, q)
        } else {
            Self::words(system)
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dist(&self, a: &PhasePoint, b: &PhasePoint) -> f64 {
        self.system.dist(a, b)
    }

    pub fn torus_point(&self, i: usize) -> Point {
        match self.points[i] {
            PhasePoint::Torus(x) => x,
            PhasePoint::Word(_) => [f64::NAN; 2],
        }
    }

    /// CSV header naming the coordinate columns.
    pub fn coordinate_header(&self) -> &'static str {
        if self.system.is_torus() {
            "x1,x2"
        } else {
            "word"
        }
    }

    pub fn coordinate_fields(&self, i: usize) -> String {
        match &self.points[i] {
            PhasePoint::Torus(x) => format!("{:.17e},{:.17e}", x[0], x[1]),
            PhasePoint::Word(w) => w.to_string(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Engine {
    Auto,
    Brute,
    Sweep,
}

/// Operator data: E(x, y) = phi(x) - phibar + C d(f(x), y) on a grid.
#[derive(Debug)]
pub struct LaxOleinikProblem {
    pub grid: Grid,
    pub phi: Observable,
    pub phibar: f64,
    pub c: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub engine: Engine,
    /// phi(x_i) - phibar.
    pub weight: Vec<f64>,
    plan: OnceLock<SweepPlan>,
    index: OnceLock<ImageIndex>,
}

impl Clone for LaxOleinikProblem {
    fn clone(&self) -> Self {
        LaxOleinikProblem::new(self.grid.clone(), self.phi.clone(), self.phibar, self.c)
            .expect("cloned problem is valid")
            .with_tolerance(self.tol, self.max_iter)
            .with_engine(self.engine)
    }
}

/// Result of one operator application.
#[derive(Clone, Debug)]
pub struct Applied {
    pub values: Vec<f64>,
    /// Minimizing source grid index for each target.
    pub argmin: Vec<u32>,
}

impl LaxOleinikProblem {
    pub fn new(grid: Grid, phi: Observable, phibar: f64, c: f64) -> Result<Self> {
        if !(c >= 0.0) || !c.is_finite() {
            return Err(Error::InvalidArgument(format!("C must be finite and >= 0, got {c}")));
        }
        if !phibar.is_finite() {
            return Err(Error::InvalidArgument("phibar must be finite".into()));
        }
        let weight: Vec<f64> = grid.points.iter().map(|p| phi.eval(p) - phibar).collect();
        if weight.iter().any(|w| !w.is_finite()) {
            return Err(Error::InvalidArgument(format!("observable `{}` is not finite on the grid", phi.name)));
        }
        Ok(LaxOleinikProblem { grid, phi, phibar, c, tol: 1e-12, max_iter: 100_000, engine: Engine::Auto, weight, plan: OnceLock::new(), index: OnceLock::new() })
    }

    pub fn with_tolerance(mut self, tol: f64, max_iter: usize) -> Self {
        self.tol = tol;
        self.max_iter = max_iter;
        self
    }

    pub fn with_engine(mut self, engine: Engine) -> Self {
        self.engine = engine;
        self
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    /// E(x_i, x_j).
    pub fn edge_cost(&self, i: usize, j: usize) -> f64 {
        self.weight[i] + self.c * self.grid.dist(&self.grid.images[i], &self.grid.points[j])
    }

    pub fn uses_sweep(&self) -> bool {
        match self.engine {
            Engine::Brute => false,
            Engine::Sweep => self.grid.system.is_torus(),
            Engine::Auto => self.grid.system.is_torus() && self.len() > BRUTE_FORCE_LIMIT,
        }
    }

    fn sweep_plan(&self) -> &SweepPlan {
        self.plan.get_or_init(|| {
            let src = torus_sources(&self.grid);
            let tgt: Vec<[f64; 2]> = (0..self.len()).map(|j| sweep::rotate(systems::to_eigen(self.grid.torus_point(j)))).collect();
            SweepPlan::new(&src, &tgt)
        })
    }

    /// T[u](x') = min_x u(x) + E(x, x'), exact over the grid.
    pub fn apply(&self, u: &[f64]) -> Applied {
        assert_eq!(u.len(), self.len());
        if self.uses_sweep() {
            let n = self.len();
            let w: Vec<f64> = (0..9 * n).map(|slot| u[slot % n] + self.weight[slot % n]).collect();
            let (values, arg) = self.sweep_plan().apply(&w, self.c);
            let argmin = arg.into_iter().map(|a| (a as usize % n) as u32).collect();
            Applied { values, argmin }
        } else {
            let (values, argmin) = min_plus_brute(u, self.len(), |i, j| self.edge_cost(i, j));
            Applied { values, argmin }
        }
    }

    pub fn apply_values(&self, u: &[f64]) -> Vec<f64> {
        self.apply(u).values
    }

    /// T[u] evaluated at arbitrary torus points: the C-Lipschitz extension of u.
    pub fn extend(&self, u: &[f64], at: &[Point]) -> Vec<f64> {
        assert_eq!(u.len(), self.len());
        let index = self.index.get_or_init(|| ImageIndex::new(&self.grid));
        let w: Vec<f64> = u.iter().zip(&self.weight).map(|(a, b)| a + b).collect();
        let pyramid = index.pyramid(&w);
        at.iter().map(|p| index.min_plus(&w, &pyramid, self.c, systems::reduce(*p))).collect()
    }
}

/// Bucket grid over the images of a torus grid, for exact queries
/// min_i w_i + C d(f(x_i), y) at scattered points y. Queries run a best-first
/// search over a quadtree of cells carrying the minimum of w.
#[derive(Debug)]
struct ImageIndex {
    /// Cells per side, a power of two.
    k: usize,
    depth: usize,
    cells: Vec<Vec<(u32, Point)>>,
}

#[derive(PartialEq)]
struct Node {
    bound: f64,
    level: usize,
    a: usize,
    b: usize,
}

impl Eq for Node {}

impl Ord for Node {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        other.bound.total_cmp(&self.bound)
    }
}

impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl ImageIndex {
    fn new(grid: &Grid) -> Self {
        let k = ((grid.len() as f64).sqrt().round() as usize).clamp(1, 1024).next_power_of_two();
        let mut cells = vec![Vec::new(); k * k];
        for (i, img) in grid.images.iter().enumerate() {
            if let PhasePoint::Torus(y) = img {
                let y = systems::reduce(*y);
                cells[Self::cell(k, y[0]) * k + Self::cell(k, y[1])].push((i as u32, y));
            }
        }
        ImageIndex { k, depth: k.trailing_zeros() as usize, cells }
    }

    fn cell(k: usize, x: f64) -> usize {
        ((x * k as f64) as usize).min(k - 1)
    }

    /// Minimum of w over every quadtree node, finest level first.
    fn pyramid(&self, w: &[f64]) -> Vec<Vec<f64>> {
        let mut levels = vec![self.cells.iter().map(|c| c.iter().map(|&(i, _)| w[i as usize]).fold(f64::INFINITY, f64::min)).collect::<Vec<f64>>()];
        let mut side = self.k;
        while side > 1 {
            let prev = levels.last().unwrap();
            let half = side / 2;
            let next = (0..half * half)
                .map(|idx| {
                    let (a, b) = (idx / half, idx % half);
                    prev[2 * a * side + 2 * b].min(prev[2 * a * side + 2 * b + 1]).min(prev[(2 * a + 1) * side + 2 * b]).min(prev[(2 * a + 1) * side + 2 * b + 1])
                })
                .collect();
            levels.push(next);
            side = half;
        }
        levels
    }

    /// Lower bound for d(p, y) over p in the box [x0, x0 + s) x [y0, y0 + s).
    /// Only translates with both offsets below 1 in absolute value can realise
    /// a torus distance, which never exceeds the covering radius.
    fn box_bound(x0: f64, y0: f64, s: f64, y: Point) -> f64 {
        let e = systems::eigenbasis();
        let min_abs = |lo: f64, hi: f64| if lo > 0.0 { lo } else if hi < 0.0 { -hi } else { 0.0 };
        let scaled = |c: f64, lo: f64, hi: f64| if c >= 0.0 { (c * lo, c * hi) } else { (c * hi, c * lo) };
        let mut best = f64::INFINITY;
        for m0 in -2..=2 {
            let (xl, xh) = (x0 - y[0] + m0 as f64, x0 + s - y[0] + m0 as f64);
            if min_abs(xl, xh) >= 1.0 {
                continue;
            }
            for m1 in -2..=2 {
                let (yl, yh) = (y0 - y[1] + m1 as f64, y0 + s - y[1] + m1 as f64);
                if min_abs(yl, yh) >= 1.0 {
                    continue;
                }
                let (ul0, uh0) = scaled(e[0][0], xl, xh);
                let (ul1, uh1) = scaled(e[1][0], yl, yh);
                let (sl0, sh0) = scaled(e[0][1], xl, xh);
                let (sl1, sh1) = scaled(e[1][1], yl, yh);
                let lb = min_abs(ul0 + ul1, uh0 + uh1).max(min_abs(sl0 + sl1, sh0 + sh1));
                best = best.min(lb);
            }
        }
        best * (1.0 - 1e-12)
    }

    fn min_plus(&self, w: &[f64], pyramid: &[Vec<f64>], c: f64, y: Point) -> f64 {
        let mut best = f64::INFINITY;
        let mut heap = std::collections::BinaryHeap::new();
        heap.push(Node { bound: pyramid[self.depth][0], level: self.depth, a: 0, b: 0 });
        while let Some(node) = heap.pop() {
            if node.bound >= best {
                break;
            }
            if node.level == 0 {
                for &(i, p) in &self.cells[node.a * self.k + node.b] {
                    best = best.min(w[i as usize] + c * systems::torus_dist(p, y));
                }
                continue;
            }
            let level = node.level - 1;
            let side = self.k >> level;
            let s = 1.0 / side as f64;
            for a in 2 * node.a..2 * node.a + 2 {
                for b in 2 * node.b..2 * node.b + 2 {
                    let m = pyramid[level][a * side + b];
                    if m >= best {
                        continue;
                    }
                    let bound = m + c * Self::box_bound(a as f64 * s, b as f64 * s, s, y);
                    if bound < best {
                        heap.push(Node { bound, level, a, b });
                    }
                }
            }
        }
        best
    }
}

/// Rotated coordinates of the 9 integer translates of every grid image.
/// Translates beyond the unit neighbourhood are never closest, since the
/// covering radius is below 1 in every Euclidean coordinate.
fn torus_sources(grid: &Grid) -> Vec<[f64; 2]> {
    let n = grid.len();
    let mut src = vec![[0.0; 2]; 9 * n];
    for (c, shift) in (-1..=1).flat_map(|a| (-1..=1).map(move |b| [a as f64, b as f64])).enumerate() {
        for i in 0..n {
            let y = match grid.images[i] {
                PhasePoint::Torus(y) => y,
                PhasePoint::Word(_) => unreachable!("torus grid"),
            };
            src[c * n + i] = sweep::rotate(systems::to_eigen([y[0] + shift[0], y[1] + shift[1]]));
        }
    }
    src
}

/// Dense min-plus product: out[j] = min_i u[i] + cost(i, j), with argmin.
pub fn min_plus_brute<S: Scalar, F: Fn(usize, usize) -> S>(u: &[S], n_tgt: usize, cost: F) -> (Vec<S>, Vec<u32>) {
    let mut out = vec![S::infinity(); n_tgt];
    let mut arg = vec![u32::MAX; n_tgt];
    for j in 0..n_tgt {
        for (i, ui) in u.iter().enumerate() {
            let v = *ui + cost(i, j);
            if v < out[j] {
                out[j] = v;
                arg[j] = i as u32;
            }
        }
    }
    (out, arg)
}

/// A function on the grid with its solve metadata.
#[derive(Clone, Debug, Serialize)]
pub struct GridFunction {
    pub values: Vec<f64>,
    pub observable: String,
    pub c: f64,
    pub phibar: f64,
    pub iterations: usize,
}

impl GridFunction {
    pub fn to_csv(&self, grid: &Grid) -> String {
        let mut s = format!("{},u\n", grid.coordinate_header());
        for (i, v) in self.values.iter().enumerate() {
            s.push_str(&format!("{},{:.17e}\n", grid.coordinate_fields(i), v));
        }
        s
    }
}

pub fn sup_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
