use super::{grid_subaction_slack, sup_dist, Grid, LaxOleinikProblem, WINDOW};
use crate::systems::{self, PhasePoint, Point};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

/// Relative slack for laws that hold only up to rounding of one addition.
const ROUNDING: f64 = 1e-12;

#[derive(Clone, Debug, Default, Serialize)]
pub struct OperatorLawsReport {
    pub trials: usize,
    pub monotonicity_failures: usize,
    pub additivity_failures: usize,
    pub inf_commutation_failures: usize,
    pub contraction_failures: usize,
    pub max_additivity_error: f64,
    pub max_contraction_excess: f64,
}

impl OperatorLawsReport {
    pub fn passed(&self) -> bool {
        self.monotonicity_failures == 0 && self.additivity_failures == 0 && self.inf_commutation_failures == 0 && self.contraction_failures == 0
    }
}

fn random_function(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-scale..scale)).collect()
}

/// Monotonicity, T[u + c] = T[u] + c, T[min_k u_k] = min_k T[u_k] on a finite
/// family, and the sup-norm 1-Lipschitz property, each on seeded random functions.
pub fn check_operator_laws(prob: &LaxOleinikProblem, samples: usize, seed: u64) -> OperatorLawsReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = prob.len();
    let mut rep = OperatorLawsReport { trials: samples, ..Default::default() };
    for _ in 0..samples {
        let u1 = random_function(&mut rng, n, 2.0);
        let gap: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
        let u2: Vec<f64> = u1.iter().zip(&gap).map(|(a, g)| a + g).collect();
        let t1 = prob.apply_values(&u1);
        let t2 = prob.apply_values(&u2);
        if t1.iter().zip(&t2).any(|(a, b)| a > b) {
            rep.monotonicity_failures += 1;
        }

        let c = 3.7;
        let shifted: Vec<f64> = u1.iter().map(|x| x + c).collect();
        let ts = prob.apply_values(&shifted);
        let err = ts.iter().zip(&t1).map(|(a, b)| (a - (b + c)).abs() / (1.0 + b.abs())).fold(0.0, f64::max);
        rep.max_additivity_error = rep.max_additivity_error.max(err);
        if err > ROUNDING {
            rep.additivity_failures += 1;
        }

        let family = [u1.clone(), u1.iter().map(|x| x - 1.0).collect::<Vec<_>>(), u1.iter().map(|x| x + 2.0).collect(), u2.clone()];
        let pointwise: Vec<f64> = (0..n).map(|i| family.iter().map(|u| u[i]).fold(f64::INFINITY, f64::min)).collect();
        let lhs = prob.apply_values(&pointwise);
        let images: Vec<Vec<f64>> = family.iter().map(|u| prob.apply_values(u)).collect();
        let rhs: Vec<f64> = (0..n).map(|i| images.iter().map(|t| t[i]).fold(f64::INFINITY, f64::min)).collect();
        if lhs != rhs {
            rep.inf_commutation_failures += 1;
        }

        let u3 = random_function(&mut rng, n, 2.0);
        let t3 = prob.apply_values(&u3);
        let excess = sup_dist(&t1, &t3) - sup_dist(&u1, &u3);
        rep.max_contraction_excess = rep.max_contraction_excess.max(excess);
        if excess > ROUNDING * (1.0 + sup_dist(&u1, &u3)) {
            rep.contraction_failures += 1;
        }
    }
    rep
}

/// max |u(x) - u(y)| / d(x, y) over all pairs when there are at most `pairs` of
/// them, otherwise over lattice neighbours plus `pairs` seeded random pairs.
/// Returns the estimate and the number of pairs examined.
pub fn lipschitz_estimate(grid: &Grid, u: &[f64], pairs: usize, seed: u64) -> (f64, usize) {
    let n = grid.len();
    let ratio = |i: usize, j: usize| {
        let d = grid.dist(&grid.points[i], &grid.points[j]);
        if d > 0.0 {
            (u[i] - u[j]).abs() / d
        } else {
            0.0
        }
    };
    let mut best: f64 = 0.0;
    let mut count = 0;
    if n * n.saturating_sub(1) / 2 <= pairs {
        for i in 0..n {
            for j in i + 1..n {
                best = best.max(ratio(i, j));
                count += 1;
            }
        }
        return (best, count);
    }
    if let Some(q) = grid.q {
        for a in 0..q {
            for b in 0..q {
                let i = a * q + b;
                for (da, db) in [(1, 0), (0, 1), (1, 1), (1, q - 1)] {
                    let j = ((a + da) % q) * q + (b + db) % q;
                    best = best.max(ratio(i, j));
                    count += 1;
                }
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..pairs {
        let i = rng.gen_range(0..n);
        let j = rng.gen_range(0..n);
        best = best.max(ratio(i, j));
        count += 1;
    }
    (best, count)
}

/// Allowance for rounding in slack comparisons, also the zero-mesh tolerance on the shift.
pub const SLACK_ROUNDING: f64 = 1e-12;

#[derive(Clone, Debug, Serialize)]
pub struct SubactionReport {
    /// min over grid points of phi(x) - phibar - u(f(x)) + u(x).
    pub grid_min_slack: f64,
    pub grid_argmin: usize,
    /// Same slack at random off-grid points, with u extended by T[u].
    pub offgrid_min_slack: Option<f64>,
    pub offgrid_samples: usize,
    /// (C + Lip(phi)) h.
    pub mesh_bound: f64,
    pub within_bound: bool,
    pub lipschitz_estimate: f64,
    pub lipschitz_over_c: f64,
    pub lipschitz_over_k_lip: Option<f64>,
}

/// Off-grid slack phi(x) - phibar - u~(f(x)) + u~(x) at the given torus points,
/// where u~ = T[u] is the C-Lipschitz extension of a fixed point u.
pub fn offgrid_slack(prob: &LaxOleinikProblem, u: &[f64], at: &[Point]) -> Vec<f64> {
    let images: Vec<Point> = at.iter().map(|&x| prob.grid.system.map_torus(x)).collect();
    let ux = prob.extend(u, at);
    let ufx = prob.extend(u, &images);
    at.iter().enumerate().map(|(k, &x)| prob.phi.eval_torus(x) - prob.phibar - ufx[k] + ux[k]).collect()
}

/// Smallest off-grid slack found by `samples` seeded random points followed by a
/// shrinking random local search from the `starts` worst of them.
pub fn worst_offgrid_slack(prob: &LaxOleinikProblem, u: &[f64], samples: usize, starts: usize, seed: u64) -> (f64, Point) {
    let pts = random_torus_points(samples, seed);
    let slack = offgrid_slack(prob, u, &pts);
    let mut order: Vec<usize> = (0..pts.len()).collect();
    order.sort_by(|a, b| slack[*a].total_cmp(&slack[*b]));
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let mut best = (f64::INFINITY, [0.0; 2]);
    for &k in order.iter().take(starts.max(1)) {
        let (mut x, mut v) = (pts[k], slack[k]);
        let mut step = prob.grid.mesh.max(1e-9);
        for _ in 0..40 {
            let cands: Vec<Point> = (0..32).map(|_| systems::reduce([x[0] + step * rng.gen_range(-1.0..1.0), x[1] + step * rng.gen_range(-1.0..1.0)])).collect();
            for (c, val) in cands.iter().zip(offgrid_slack(prob, u, &cands)) {
                if val < v {
                    v = val;
                    x = *c;
                }
            }
            step *= 0.8;
        }
        if v < best.0 {
            best = (v, x);
        }
    }
    best
}

pub fn random_torus_points(samples: usize, seed: u64) -> Vec<Point> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..samples).map(|_| [rng.gen::<f64>(), rng.gen::<f64>()]).collect()
}

/// Subaction slack on the grid (and at `samples` random points on the torus) and
/// the Lipschitz ratio of u against C and against K_Lambda Lip(phi).
pub fn subaction_check(u: &[f64], prob: &LaxOleinikProblem, k_lambda: Option<f64>, samples: usize, seed: u64) -> SubactionReport {
    let (grid_min_slack, slack) = grid_subaction_slack(prob, u);
    let grid_argmin = (0..slack.len()).min_by(|&a, &b| slack[a].total_cmp(&slack[b])).unwrap_or(0);
    let (offgrid_min_slack, offgrid_samples) = if prob.grid.system.is_torus() && samples > 0 {
        let pts = random_torus_points(samples, seed);
        (Some(offgrid_slack(prob, u, &pts).into_iter().fold(f64::INFINITY, f64::min)), samples)
    } else {
        (None, 0)
    };
    let mesh_bound = (prob.c + prob.phi.lip) * prob.grid.mesh;
    let worst = offgrid_min_slack.map_or(grid_min_slack, |s| s.min(grid_min_slack));
    let (lip, _) = lipschitz_estimate(&prob.grid, u, super::LIPSCHITZ_PAIRS, seed);
    SubactionReport {
        grid_min_slack,
        grid_argmin,
        offgrid_min_slack,
        offgrid_samples,
        mesh_bound,
        within_bound: worst >= -(mesh_bound + SLACK_ROUNDING),
        lipschitz_estimate: lip,
        lipschitz_over_c: if prob.c > 0.0 { lip / prob.c } else { f64::INFINITY },
        lipschitz_over_k_lip: k_lambda.map(|k| if k * prob.phi.lip > 0.0 { lip / (k * prob.phi.lip) } else { f64::INFINITY }),
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct LivsicBoundReport {
    pub n_max: usize,
    pub bound: f64,
    /// I_n = min_x T^n[0](x) for n = 1..=n_max.
    pub values: Vec<f64>,
    pub min_value: f64,
    pub argmin_n: usize,
    pub bound_holds: bool,
    /// Slope of I_n over the final window.
    pub final_slope: f64,
    pub stabilized: bool,
    /// Minimizing grid path of length argmin_n, and its recomputed cost.
    pub witness: Vec<usize>,
    pub witness_cost: f64,
}

impl LivsicBoundReport {
    pub fn criterion_holds(&self) -> bool {
        self.bound_holds && self.stabilized
    }
}

/// Value iteration I_n = min_x T^n[0](x), the minimal cost of a grid path of length n.
pub fn livsic_lower_bound(prob: &LaxOleinikProblem, n_max: usize, bound: f64) -> LivsicBoundReport {
    let n = prob.len();
    let mut u = vec![0.0; n];
    let mut values = Vec::with_capacity(n_max);
    let mut argmins: Vec<Vec<u32>> = Vec::with_capacity(n_max);
    let mut ends = Vec::with_capacity(n_max);
    for _ in 0..n_max {
        let t = prob.apply(&u);
        u = t.values;
        argmins.push(t.argmin);
        let end = (0..n).min_by(|&a, &b| u[a].total_cmp(&u[b])).unwrap_or(0);
        ends.push(end);
        values.push(u[end]);
    }
    let (argmin_n, min_value) = values.iter().enumerate().fold((0, f64::INFINITY), |acc, (k, &v)| if v < acc.1 { (k + 1, v) } else { acc });
    let mut witness = Vec::new();
    if argmin_n > 0 {
        let mut cur = ends[argmin_n - 1];
        witness.push(cur);
        for table in argmins[..argmin_n].iter().rev() {
            cur = table[cur] as usize;
            witness.push(cur);
        }
        witness.reverse();
    }
    let witness_cost = witness.windows(2).map(|w| prob.edge_cost(w[0], w[1])).sum();
    let w = WINDOW.min(values.len().saturating_sub(1));
    let final_slope = if w > 0 { (values[values.len() - 1] - values[values.len() - 1 - w]) / w as f64 } else { 0.0 };
    let scale = 1.0 + values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    LivsicBoundReport {
        n_max,
        bound,
        min_value,
        argmin_n,
        bound_holds: values.iter().all(|&v| v >= bound),
        final_slope,
        stabilized: final_slope >= -1e-12 * scale,
        values,
        witness,
        witness_cost,
    }
}

/// Exhaustive minimum over all grid paths x_0, ..., x_n of the cost sum, accumulated
/// left to right. Enumerates len^(n+1) paths; intended for tiny grids.
pub fn exhaustive_path_minimum(prob: &LaxOleinikProblem, n: usize) -> f64 {
    let m = prob.len();
    let cost: Vec<f64> = (0..m * m).map(|k| prob.edge_cost(k / m, k % m)).collect();
    fn dfs(cost: &[f64], m: usize, cur: usize, acc: f64, left: usize) -> f64 {
        let row = &cost[cur * m..(cur + 1) * m];
        if left == 1 {
            return row.iter().map(|e| acc + e).fold(f64::INFINITY, f64::min);
        }
        let mut best = f64::INFINITY;
        for (next, e) in row.iter().enumerate() {
            best = best.min(dfs(cost, m, next, acc + e, left - 1));
        }
        best
    }
    if n == 0 {
        return 0.0;
    }
    (0..m).map(|start| dfs(&cost, m, start, 0.0, n)).fold(f64::INFINITY, f64::min)
}

/// Nearest grid point by exhaustive search.
pub fn nearest_grid_point(grid: &Grid, p: &PhasePoint) -> usize {
    (0..grid.len()).min_by(|&a, &b| grid.dist(&grid.points[a], p).total_cmp(&grid.dist(&grid.points[b], p))).unwrap_or(0)
}

/// Covering radius check of the torus lattice mesh at random points.
pub fn empirical_mesh(grid: &Grid, samples: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..samples {
        let p = grid.system.random_point(&mut rng);
        let p = match p {
            PhasePoint::Torus(x) => PhasePoint::Torus(systems::reduce(x)),
            w => w,
        };
        let i = nearest_grid_point(grid, &p);
        worst = worst.max(grid.dist(&grid.points[i], &p));
    }
    worst
}
