//! Phase spaces, metrics, built-in maps and observables.

use crate::error::{Error, Result};
use crate::linalg::{self, Mat2, Vec2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;
use std::fmt;
use std::sync::OnceLock;

pub type Point = [f64; 2];

/// The cat matrix.
pub const CAT: Mat2 = [[2.0, 1.0], [1.0, 1.0]];
pub const CAT_INV: Mat2 = [[1.0, -1.0], [-1.0, 2.0]];

pub fn lambda_u() -> f64 {
    (3.0 + 5f64.sqrt()) / 2.0
}

pub fn lambda_s() -> f64 {
    (3.0 - 5f64.sqrt()) / 2.0
}

/// Orthonormal eigenbasis of the cat matrix: columns are e_u and e_s.
pub fn eigenbasis() -> Mat2 {
    static B: OnceLock<Mat2> = OnceLock::new();
    *B.get_or_init(|| {
        let g = lambda_u() - 2.0;
        let n = (1.0 + g * g).sqrt();
        [[1.0 / n, -g / n], [g / n, 1.0 / n]]
    })
}

/// Ambient vector to eigen-coordinates (unstable, stable).
pub fn to_eigen(v: Vec2) -> Vec2 {
    let e = eigenbasis();
    [e[0][0] * v[0] + e[1][0] * v[1], e[0][1] * v[0] + e[1][1] * v[1]]
}

pub fn from_eigen(c: Vec2) -> Vec2 {
    linalg::mat_vec(&eigenbasis(), c)
}

/// Sup norm over the eigen-coordinates.
pub fn eigen_norm(v: Vec2) -> f64 {
    linalg::sup_norm(to_eigen(v))
}

pub fn reduce(p: Point) -> Point {
    [wrap01(p[0]), wrap01(p[1])]
}

fn wrap01(x: f64) -> f64 {
    let y = x - x.floor();
    if y >= 1.0 {
        0.0
    } else {
        y
    }
}

/// Representative of `v` modulo the integer lattice in [-1/2, 1/2)^2.
pub fn centered(v: Vec2) -> Vec2 {
    [v[0] - v[0].round(), v[1] - v[1].round()]
}

/// Shortest lift of x - y over the integer lattice, in the eigen sup norm.
pub fn torus_delta(x: Point, y: Point) -> Vec2 {
    let c = centered(linalg::sub(x, y));
    let mut best = c;
    let mut bn = eigen_norm(c);
    for k0 in -1..=1 {
        for k1 in -1..=1 {
            if k0 == 0 && k1 == 0 {
                continue;
            }
            let v = [c[0] + k0 as f64, c[1] + k1 as f64];
            let n = eigen_norm(v);
            if n < bn {
                bn = n;
                best = v;
            }
        }
    }
    best
}

pub fn torus_dist(x: Point, y: Point) -> f64 {
    eigen_norm(torus_delta(x, y))
}

/// Covering radius of the integer lattice for the eigen sup norm. This is the
/// diameter of the torus, and the mesh of the q-lattice is this value over q.
pub fn torus_covering_radius() -> f64 {
    static R: OnceLock<f64> = OnceLock::new();
    *R.get_or_init(|| {
        let m = |v: Vec2| torus_dist(v, [0.0, 0.0]);
        let n = 200usize;
        let mut cands: Vec<(f64, Vec2)> = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                let v = [i as f64 / n as f64, j as f64 / n as f64];
                cands.push((m(v), v));
            }
        }
        cands.sort_by(|a, b| b.0.total_cmp(&a.0));
        let mut best = cands[0].0;
        for &(_, start) in cands.iter().take(16) {
            let mut c = start;
            let mut cv = m(c);
            let mut step = 1.0 / n as f64;
            for _ in 0..60 {
                let mut moved = false;
                for di in -2i32..=2 {
                    for dj in -2i32..=2 {
                        let v = [c[0] + di as f64 * step / 2.0, c[1] + dj as f64 * step / 2.0];
                        let val = m(v);
                        if val > cv {
                            cv = val;
                            c = v;
                            moved = true;
                        }
                    }
                }
                if !moved {
                    step /= 2.0;
                }
            }
            best = best.max(cv);
        }
        best
    })
}

/// A word over {0,1} of fixed depth; bit i holds the symbol at index i.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Word {
    pub bits: u32,
    pub depth: u8,
}

impl Word {
    pub fn new(bits: u32, depth: u8) -> Result<Self> {
        if depth == 0 || depth > 30 {
            return Err(Error::InvalidArgument(format!("word depth {depth} out of range 1..=30")));
        }
        if bits >> depth != 0 {
            return Err(Error::InvalidArgument("word bits exceed depth".into()));
        }
        if bits & (bits >> 1) != 0 {
            return Err(Error::InvalidArgument("word contains the forbidden factor 11".into()));
        }
        Ok(Word { bits, depth })
    }

    pub fn parse(s: &str) -> Result<Self> {
        let mut bits = 0u32;
        for (i, c) in s.chars().enumerate() {
            match c {
                '0' => {}
                '1' => bits |= 1 << i,
                _ => return Err(Error::InvalidArgument(format!("bad symbol {c:?} in word"))),
            }
        }
        Word::new(bits, s.len() as u8)
    }

    pub fn symbol(&self, i: usize) -> u8 {
        ((self.bits >> i) & 1) as u8
    }

    /// Left shift, appending 0.
    pub fn shift(&self) -> Word {
        Word { bits: self.bits >> 1, depth: self.depth }
    }

    pub fn dist(&self, other: &Word) -> f64 {
        let x = self.bits ^ other.bits;
        if x == 0 {
            0.0
        } else {
            0.5f64.powi(x.trailing_zeros() as i32)
        }
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.depth as usize {
            write!(f, "{}", self.symbol(i))?;
        }
        Ok(())
    }
}

impl fmt::Debug for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Word({self})")
    }
}

/// All admissible words of the given depth, in increasing bit order.
pub fn golden_mean_words(depth: u8) -> Vec<Word> {
    (0u32..(1u32 << depth))
        .filter(|b| b & (b >> 1) == 0)
        .map(|bits| Word { bits, depth })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PhasePoint {
    Torus(Point),
    Word(Word),
}

/// Seeded trigonometric vector field g with components
/// g_i(x) = sum_m a_{i,m} sin(2 pi k_m.x + theta_{i,m}).
#[derive(Clone, Debug)]
pub struct Perturbation {
    pub modes: Vec<[i32; 2]>,
    pub amp: Vec<[f64; 2]>,
    pub phase: Vec<[f64; 2]>,
}

impl Perturbation {
    pub fn from_seed(seed: u64) -> Self {
        let modes = vec![[1, 0], [0, 1], [1, 1]];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut amp: Vec<[f64; 2]> = modes.iter().map(|_| [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)]).collect();
        let phase = modes.iter().map(|_| [rng.gen_range(0.0..2.0 * PI), rng.gen_range(0.0..2.0 * PI)]).collect();
        // scale so that sum_m |a_m|_eig <= 1/2, hence sup |g|_eig <= 1/2
        let total: f64 = amp.iter().map(|a| eigen_norm(*a)).sum();
        for a in amp.iter_mut() {
            a[0] *= 0.5 / total;
            a[1] *= 0.5 / total;
        }
        Perturbation { modes, amp, phase }
    }

    pub fn eval(&self, x: Point) -> Vec2 {
        let mut g = [0.0; 2];
        for ((k, a), th) in self.modes.iter().zip(&self.amp).zip(&self.phase) {
            let arg = 2.0 * PI * (k[0] as f64 * x[0] + k[1] as f64 * x[1]);
            g[0] += a[0] * (arg + th[0]).sin();
            g[1] += a[1] * (arg + th[1]).sin();
        }
        g
    }

    pub fn jacobian(&self, x: Point) -> Mat2 {
        let mut m = [[0.0; 2]; 2];
        for ((k, a), th) in self.modes.iter().zip(&self.amp).zip(&self.phase) {
            let arg = 2.0 * PI * (k[0] as f64 * x[0] + k[1] as f64 * x[1]);
            for i in 0..2 {
                let c = a[i] * 2.0 * PI * (arg + th[i]).cos();
                m[i][0] += c * k[0] as f64;
                m[i][1] += c * k[1] as f64;
            }
        }
        m
    }

    /// Bound on sup |g| in the eigen sup norm.
    pub fn sup_bound(&self) -> f64 {
        self.amp.iter().map(|a| eigen_norm(*a)).sum()
    }

    /// Bound on sup |Dg| as an operator on the eigen sup norm.
    pub fn jacobian_bound(&self) -> f64 {
        let e = eigenbasis();
        self.modes
            .iter()
            .zip(&self.amp)
            .map(|(k, a)| {
                let ke = linalg::mat_vec(&linalg::transpose(&e), [k[0] as f64, k[1] as f64]);
                2.0 * PI * eigen_norm(*a) * (ke[0].abs() + ke[1].abs())
            })
            .sum()
    }
}

#[derive(Clone, Debug)]
pub enum SystemKind {
    Cat,
    PerturbedCat { eps: f64, seed: u64, g: Perturbation },
    GoldenMean { depth: u8 },
}

/// A map together with its hyperbolicity metadata.
#[derive(Clone, Debug)]
pub struct DynamicalSystem {
    pub kind: SystemKind,
    /// Expansion exponent (log rate).
    pub lambda_u: f64,
    /// Contraction exponent (log rate).
    pub lambda_s: f64,
    pub c_lambda: f64,
}

pub fn cat_map() -> DynamicalSystem {
    DynamicalSystem { kind: SystemKind::Cat, lambda_u: lambda_u().ln(), lambda_s: lambda_s().ln(), c_lambda: 1.0 }
}

pub fn perturbed_cat_map(eps: f64, seed: u64) -> Result<DynamicalSystem> {
    if !(eps >= 0.0) || !eps.is_finite() {
        return Err(Error::InvalidArgument(format!("perturbation size must be >= 0, got {eps}")));
    }
    let g = Perturbation::from_seed(seed);
    let l = eps * g.jacobian_bound();
    if l >= lambda_s().min(lambda_u() - 1.0) {
        return Err(Error::InvalidArgument(format!("perturbation {eps} destroys hyperbolicity")));
    }
    Ok(DynamicalSystem {
        lambda_u: (lambda_u() - l).ln(),
        lambda_s: (lambda_s() + l).ln(),
        c_lambda: 1.0,
        kind: SystemKind::PerturbedCat { eps, seed, g },
    })
}

pub fn golden_mean_shift(depth: usize) -> Result<DynamicalSystem> {
    if !(2..=30).contains(&depth) {
        return Err(Error::InvalidArgument(format!("depth must be in 2..=30, got {depth}")));
    }
    let ln_golden = ((1.0 + 5f64.sqrt()) / 2.0).ln();
    Ok(DynamicalSystem {
        kind: SystemKind::GoldenMean { depth: depth as u8 },
        lambda_u: ln_golden,
        lambda_s: -ln_golden,
        c_lambda: 1.0,
    })
}

impl DynamicalSystem {
    /// Parses `cat`, `pcat:<eps>:<seed>` or `gms:<depth>`.
    pub fn parse(id: &str) -> Result<Self> {
        let parts: Vec<&str> = id.split(':').collect();
        let bad = || Error::UnknownSystem(id.to_string());
        match parts.as_slice() {
            ["cat"] => Ok(cat_map()),
            ["pcat", e, s] => {
                let eps: f64 = e.parse().map_err(|_| bad())?;
                let seed: u64 = s.parse().map_err(|_| bad())?;
                perturbed_cat_map(eps, seed)
            }
            ["gms", d] => golden_mean_shift(d.parse().map_err(|_| bad())?),
            _ => Err(bad()),
        }
    }

    pub fn id(&self) -> String {
        match &self.kind {
            SystemKind::Cat => "cat".into(),
            SystemKind::PerturbedCat { eps, seed, .. } => format!("pcat:{eps:e}:{seed}"),
            SystemKind::GoldenMean { depth } => format!("gms:{depth}"),
        }
    }

    pub fn is_torus(&self) -> bool {
        !matches!(self.kind, SystemKind::GoldenMean { .. })
    }

    pub fn is_linear_cat(&self) -> bool {
        match &self.kind {
            SystemKind::Cat => true,
            SystemKind::PerturbedCat { eps, .. } => *eps == 0.0,
            _ => false,
        }
    }

    pub fn depth(&self) -> Option<u8> {
        match self.kind {
            SystemKind::GoldenMean { depth } => Some(depth),
            _ => None,
        }
    }

    /// A x + eps g(x) without reduction modulo 1.
    pub fn lift(&self, x: Point) -> Point {
        let ax = linalg::mat_vec(&CAT, x);
        match &self.kind {
            SystemKind::PerturbedCat { eps, g, .. } if *eps != 0.0 => {
                let gx = g.eval(x);
                [ax[0] + eps * gx[0], ax[1] + eps * gx[1]]
            }
            _ => ax,
        }
    }

    pub fn map_torus(&self, x: Point) -> Point {
        reduce(self.lift(x))
    }

    pub fn df(&self, x: Point) -> Mat2 {
        match &self.kind {
            SystemKind::PerturbedCat { eps, g, .. } if *eps != 0.0 => {
                let dg = g.jacobian(x);
                [[2.0 + eps * dg[0][0], 1.0 + eps * dg[0][1]], [1.0 + eps * dg[1][0], 1.0 + eps * dg[1][1]]]
            }
            _ => CAT,
        }
    }

    /// The preimage of x under the torus map.
    pub fn preimage(&self, x: Point) -> Point {
        match &self.kind {
            SystemKind::PerturbedCat { eps, g, .. } if *eps != 0.0 => {
                let mut y = reduce(linalg::mat_vec(&CAT_INV, x));
                for _ in 0..200 {
                    let gy = g.eval(y);
                    let next = reduce(linalg::mat_vec(&CAT_INV, [x[0] - eps * gy[0], x[1] - eps * gy[1]]));
                    let done = torus_dist(next, y) < 1e-16;
                    y = next;
                    if done {
                        break;
                    }
                }
                y
            }
            _ => reduce(linalg::mat_vec(&CAT_INV, x)),
        }
    }

    pub fn apply(&self, p: &PhasePoint) -> PhasePoint {
        match p {
            PhasePoint::Torus(x) => PhasePoint::Torus(self.map_torus(*x)),
            PhasePoint::Word(w) => PhasePoint::Word(w.shift()),
        }
    }

    pub fn dist(&self, p: &PhasePoint, q: &PhasePoint) -> f64 {
        match (p, q) {
            (PhasePoint::Torus(x), PhasePoint::Torus(y)) => torus_dist(*x, *y),
            (PhasePoint::Word(a), PhasePoint::Word(b)) => a.dist(b),
            _ => f64::NAN,
        }
    }

    pub fn diameter(&self) -> f64 {
        if self.is_torus() {
            torus_covering_radius()
        } else {
            1.0
        }
    }

    /// A seeded uniformly random phase point.
    pub fn random_point<R: Rng>(&self, rng: &mut R) -> PhasePoint {
        match self.kind {
            SystemKind::GoldenMean { depth } => {
                let words = golden_mean_words(depth);
                PhasePoint::Word(words[rng.gen_range(0..words.len())])
            }
            _ => PhasePoint::Torus([rng.gen::<f64>(), rng.gen::<f64>()]),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ObservableKind {
    Zero,
    Const(f64),
    /// 1 - cos(2 pi (x_1 - phase))
    CosCos { phase: f64 },
    Dist2Fix,
    /// diam - d(x, 0)
    Far2Fix,
    /// Edge weights (w00, w01, w10) on the first two symbols.
    EdgeCost([f64; 3]),
}

/// Default edge weights: the loop at 0 is the unique minimizing cycle.
pub const DEFAULT_EDGE_COST: [f64; 3] = [0.3, 0.6, 0.1];

#[derive(Clone, Debug)]
pub struct Observable {
    pub kind: ObservableKind,
    pub offset: f64,
    pub lip: f64,
    pub name: String,
}

impl Observable {
    pub fn eval(&self, p: &PhasePoint) -> f64 {
        match p {
            PhasePoint::Torus(x) => self.eval_torus(*x),
            PhasePoint::Word(w) => self.eval_word(w),
        }
    }

    pub fn eval_torus(&self, x: Point) -> f64 {
        let v = match &self.kind {
            ObservableKind::Zero => 0.0,
            ObservableKind::Const(c) => *c,
            ObservableKind::CosCos { phase } => 1.0 - (2.0 * PI * (x[0] - phase)).cos(),
            ObservableKind::Dist2Fix => torus_dist(x, [0.0, 0.0]),
            ObservableKind::Far2Fix => torus_covering_radius() - torus_dist(x, [0.0, 0.0]),
            ObservableKind::EdgeCost(_) => f64::NAN,
        };
        v + self.offset
    }

    pub fn eval_word(&self, w: &Word) -> f64 {
        let zero = Word { bits: 0, depth: w.depth };
        let v = match &self.kind {
            ObservableKind::Zero => 0.0,
            ObservableKind::Const(c) => *c,
            ObservableKind::Dist2Fix => w.dist(&zero),
            ObservableKind::Far2Fix => 1.0 - w.dist(&zero),
            ObservableKind::EdgeCost(t) => edge_weight(t, w.symbol(0), w.symbol(1)),
            ObservableKind::CosCos { .. } => f64::NAN,
        };
        v + self.offset
    }

    /// Edge weights when the observable is locally constant on the first two symbols.
    pub fn edge_table(&self) -> Option<[f64; 3]> {
        match &self.kind {
            ObservableKind::EdgeCost(t) => Some([t[0] + self.offset, t[1] + self.offset, t[2] + self.offset]),
            ObservableKind::Zero => Some([self.offset; 3]),
            ObservableKind::Const(c) => Some([c + self.offset; 3]),
            _ => None,
        }
    }
}

pub fn edge_weight(t: &[f64; 3], a: u8, b: u8) -> f64 {
    match (a, b) {
        (0, 0) => t[0],
        (0, 1) => t[1],
        (1, 0) => t[2],
        _ => f64::NAN,
    }
}

/// Lipschitz constant of 1 - cos(2 pi x_1) for the eigen sup metric:
/// 2 pi times the largest first coordinate on the unit ball.
pub fn coscos_lip() -> f64 {
    let e = eigenbasis();
    2.0 * PI * (e[0][0].abs() + e[0][1].abs())
}

/// Looks up an observable by catalogue name and checks it against the system.
///
/// Names: `zero`, `const:<c>`, `coscos`, `coscos:<phase>`, `dist2fix`, `far2fix`,
/// `edgecost:default`, `edgecost:<w00>,<w01>,<w10>`. The argument-free names
/// accept a trailing additive shift such as `coscos-0.5`.
pub fn observable_library(name: &str, system: &DynamicalSystem) -> Result<Observable> {
    let unknown = || Error::UnknownObservable(name.to_string());
    let (kind, offset) = if let Some(arg) = name.strip_prefix("edgecost:") {
        let t = if arg == "default" {
            DEFAULT_EDGE_COST
        } else {
            let v: Vec<f64> = arg.split(',').map(|s| s.trim().parse::<f64>()).collect::<std::result::Result<_, _>>().map_err(|_| unknown())?;
            if v.len() != 3 || v.iter().any(|x| !x.is_finite()) {
                return Err(unknown());
            }
            [v[0], v[1], v[2]]
        };
        (ObservableKind::EdgeCost(t), 0.0)
    } else if let Some(arg) = name.strip_prefix("coscos:") {
        let phase: f64 = arg.parse().map_err(|_| unknown())?;
        (ObservableKind::CosCos { phase }, 0.0)
    } else if let Some(arg) = name.strip_prefix("const:") {
        (ObservableKind::Const(arg.parse().map_err(|_| unknown())?), 0.0)
    } else {
        let split = name.char_indices().skip(1).find(|(_, c)| *c == '+' || *c == '-').map(|(i, _)| i);
        let (base, offset) = match split {
            Some(i) => (&name[..i], name[i..].parse::<f64>().map_err(|_| unknown())?),
            None => (name, 0.0),
        };
        let kind = match base {
            "zero" => ObservableKind::Zero,
            "coscos" => ObservableKind::CosCos { phase: 0.0 },
            "dist2fix" => ObservableKind::Dist2Fix,
            "far2fix" => ObservableKind::Far2Fix,
            _ => return Err(unknown()),
        };
        (kind, offset)
    };
    let torus = system.is_torus();
    let lip = match &kind {
        ObservableKind::Zero | ObservableKind::Const(_) => 0.0,
        ObservableKind::CosCos { .. } if torus => coscos_lip(),
        ObservableKind::Dist2Fix | ObservableKind::Far2Fix => 1.0,
        ObservableKind::EdgeCost(t) if !torus => edge_cost_lip(t),
        _ => {
            return Err(Error::InvalidArgument(format!("observable `{name}` is not defined on system `{}`", system.id())))
        }
    };
    if !offset.is_finite() {
        return Err(unknown());
    }
    Ok(Observable { kind, offset, lip, name: name.to_string() })
}

/// Exact Lipschitz constant of an edge-cost observable for the shift metric.
pub fn edge_cost_lip(t: &[f64; 3]) -> f64 {
    let edges = [(0u8, 0u8, t[0]), (0, 1, t[1]), (1, 0, t[2])];
    let mut lip: f64 = 0.0;
    for &(a, b, w) in &edges {
        for &(a2, b2, w2) in &edges {
            let d = if a != a2 {
                1.0
            } else if b != b2 {
                0.5
            } else {
                continue;
            };
            lip = lip.max((w - w2).abs() / d);
        }
    }
    lip
}
