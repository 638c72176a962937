use super::{lipschitz_estimate, sup_dist, GridFunction, LaxOleinikProblem};
use crate::error::{Error, Result};
use serde::Serialize;
use std::collections::VecDeque;

/// Iterations per window of the divergence and growth monitors.
pub const WINDOW: usize = 10;
/// Consecutive bad windows needed before giving up.
pub const BAD_WINDOWS: usize = 3;
/// Pairs sampled for the Lipschitz estimate on large grids.
pub const LIPSCHITZ_PAIRS: usize = 100_000;

#[derive(Clone, Debug, Serialize)]
pub struct SolveReport {
    pub c: f64,
    pub phibar: f64,
    pub mesh: f64,
    pub grid_points: usize,
    pub iterations_inf: usize,
    pub iterations_sup: usize,
    /// sup norm of T[u] - u.
    pub calibration_residual: f64,
    /// min over grid points of phi(x) - phibar - u(f(x)) + u(x).
    pub subaction_residual: f64,
    pub lipschitz_estimate: f64,
    pub lipschitz_pairs: usize,
}

#[derive(Clone, Debug)]
pub struct Solution {
    pub u: GridFunction,
    pub report: SolveReport,
}

/// Outcome of the inf phase v = inf_n T^n[0].
#[derive(Clone, Debug)]
pub enum InfPhase {
    Bounded { v: Vec<f64>, iterations: usize },
    Divergent { slope: f64, witness: Vec<usize>, iterations: usize },
}

/// Keeps the last few argmin tables so that a minimizing path can be traced back.
struct ArgminHistory {
    cap: usize,
    tables: VecDeque<(Vec<u32>, Vec<bool>)>,
}

impl ArgminHistory {
    fn new(cap: usize) -> Self {
        ArgminHistory { cap, tables: VecDeque::with_capacity(cap + 1) }
    }

    /// `from_zero[j]` marks targets where the minimum came from the constant 0 branch.
    fn push(&mut self, argmin: Vec<u32>, from_zero: Vec<bool>) {
        self.tables.push_back((argmin, from_zero));
        if self.tables.len() > self.cap {
            self.tables.pop_front();
        }
    }

    /// Grid path x_0, ..., x_k ending at `end`, earliest point first.
    fn trace(&self, end: usize) -> Vec<usize> {
        let mut path = vec![end];
        let mut cur = end;
        for (arg, zero) in self.tables.iter().rev() {
            if zero[cur] {
                break;
            }
            cur = arg[cur] as usize;
            path.push(cur);
        }
        path.reverse();
        path
    }
}

/// v = inf_n T^n[0] via the recursion v_{n+1} = min(0, T[v_n]), which equals the
/// running minimum of T^n[0]. Stops when no coordinate decreases by more than tol/10.
pub fn inf_phase(prob: &LaxOleinikProblem) -> Result<InfPhase> {
    let n = prob.len();
    let mut v = vec![0.0; n];
    let mut mins = vec![0.0];
    let mut bad = 0usize;
    let mut history = ArgminHistory::new(BAD_WINDOWS * WINDOW);
    for it in 1..=prob.max_iter {
        let t = prob.apply(&v);
        let mut next = vec![0.0; n];
        let mut from_zero = vec![false; n];
        let mut decrease = 0.0f64;
        for j in 0..n {
            if t.values[j] < 0.0 {
                next[j] = t.values[j];
            } else {
                from_zero[j] = true;
            }
            decrease = decrease.max(v[j] - next[j]);
        }
        history.push(t.argmin, from_zero);
        if !next.iter().all(|x| x.is_finite()) {
            return Err(Error::Overflow("non-finite value in T^n[0]".into()));
        }
        v = next;
        if decrease <= prob.tol / 10.0 {
            return Ok(InfPhase::Bounded { v, iterations: it });
        }
        mins.push(v.iter().cloned().fold(f64::INFINITY, f64::min));
        if it % WINDOW == 0 {
            let slope = (mins[it] - mins[it - WINDOW]) / WINDOW as f64;
            if slope < -prob.tol {
                bad += 1;
            } else {
                bad = 0;
            }
            if bad >= BAD_WINDOWS {
                let end = (0..n).min_by(|&a, &b| v[a].total_cmp(&v[b])).unwrap_or(0);
                return Ok(InfPhase::Divergent { slope, witness: history.trace(end), iterations: it });
            }
        }
    }
    Err(Error::MaxIterations(prob.max_iter))
}

/// u = sup_n T^n[v]; the sequence is nondecreasing since T[v] >= v.
fn sup_phase(prob: &LaxOleinikProblem, v: Vec<f64>) -> Result<(Vec<f64>, usize, f64)> {
    let mut u = v;
    let mut mins = vec![u.iter().cloned().fold(f64::INFINITY, f64::min)];
    let mut bad = 0usize;
    for it in 1..=prob.max_iter {
        let next = prob.apply_values(&u);
        let residual = sup_dist(&next, &u);
        if !next.iter().all(|x| x.is_finite()) {
            return Err(Error::Overflow("non-finite value in T^n[v]".into()));
        }
        if residual <= prob.tol {
            return Ok((u, it, residual));
        }
        u = next;
        mins.push(u.iter().cloned().fold(f64::INFINITY, f64::min));
        if it % WINDOW == 0 {
            let slope = (mins[it] - mins[it - WINDOW]) / WINDOW as f64;
            if slope > 10.0 * prob.tol {
                bad += 1;
            } else {
                bad = 0;
            }
            if bad >= BAD_WINDOWS {
                return Err(Error::Growth { slope });
            }
        }
    }
    Err(Error::MaxIterations(prob.max_iter))
}

/// Calibrated subaction T[u] = u on the grid, normalized by u(x_0) = 0.
pub fn solve_calibrated(prob: &LaxOleinikProblem) -> Result<Solution> {
    let (v, it_inf) = match inf_phase(prob)? {
        InfPhase::Bounded { v, iterations } => (v, iterations),
        InfPhase::Divergent { slope, witness, .. } => return Err(Error::Divergence { slope, witness }),
    };
    let (mut u, it_sup, _) = sup_phase(prob, v)?;
    let shift = u[0];
    u.iter_mut().for_each(|x| *x -= shift);
    let calibration_residual = sup_dist(&prob.apply_values(&u), &u);
    let subaction_residual = grid_subaction_slack(prob, &u).0;
    let (lipschitz_estimate, lipschitz_pairs) = lipschitz_estimate(&prob.grid, &u, LIPSCHITZ_PAIRS, 0);
    let report = SolveReport {
        c: prob.c,
        phibar: prob.phibar,
        mesh: prob.grid.mesh,
        grid_points: prob.len(),
        iterations_inf: it_inf,
        iterations_sup: it_sup,
        calibration_residual,
        subaction_residual,
        lipschitz_estimate,
        lipschitz_pairs,
    };
    let u = GridFunction { values: u, observable: prob.phi.name.clone(), c: prob.c, phibar: prob.phibar, iterations: it_inf + it_sup };
    Ok(Solution { u, report })
}

/// Slack phi(x) - phibar - u(f(x)) + u(x) at every grid point; u(f(x)) is read
/// off the grid when f(x) is a grid point and taken from the extension T[u] otherwise.
/// Returns the minimum and the full vector.
pub fn grid_subaction_slack(prob: &LaxOleinikProblem, u: &[f64]) -> (f64, Vec<f64>) {
    let grid = &prob.grid;
    let off: Vec<usize> = (0..grid.len()).filter(|&i| grid.image_index[i].is_none()).collect();
    let ext = if off.is_empty() {
        Vec::new()
    } else {
        let pts: Vec<[f64; 2]> = off
            .iter()
            .map(|&i| match grid.images[i] {
                crate::systems::PhasePoint::Torus(y) => y,
                crate::systems::PhasePoint::Word(_) => unreachable!("word images are grid points"),
            })
            .collect();
        prob.extend(u, &pts)
    };
    let mut k = 0;
    let slack: Vec<f64> = (0..grid.len())
        .map(|i| {
            let uf = match grid.image_index[i] {
                Some(j) => u[j],
                None => {
                    k += 1;
                    ext[k - 1]
                }
            };
            prob.weight[i] - uf + u[i]
        })
        .collect();
    (slack.iter().cloned().fold(f64::INFINITY, f64::min), slack)
}

#[derive(Clone, Debug, Serialize)]
pub struct SmallestC {
    /// Largest tested C for which inf_n T^n[0] diverged.
    pub diverges_at: Option<f64>,
    /// Smallest tested C for which it stayed bounded.
    pub bounded_at: Option<f64>,
    pub steps: usize,
}

/// Bisection on C for the boundedness of inf_n T^n[0].
pub fn smallest_bounded_c(prob: &LaxOleinikProblem, lo: f64, hi: f64, rel_tol: f64) -> Result<SmallestC> {
    let bounded = |c: f64| -> Result<bool> {
        let mut p = prob.clone();
        p.c = c;
        Ok(matches!(inf_phase(&p)?, InfPhase::Bounded { .. }))
    };
    let mut out = SmallestC { diverges_at: None, bounded_at: None, steps: 0 };
    if !bounded(hi)? {
        out.diverges_at = Some(hi);
        return Ok(out);
    }
    out.bounded_at = Some(hi);
    if bounded(lo)? {
        out.bounded_at = Some(lo);
        return Ok(out);
    }
    out.diverges_at = Some(lo);
    let (mut a, mut b) = (lo, hi);
    while b - a > rel_tol * b.max(1e-300) && out.steps < 200 {
        let m = 0.5 * (a + b);
        if bounded(m)? {
            b = m;
        } else {
            a = m;
        }
        out.steps += 1;
    }
    out.diverges_at = Some(a);
    out.bounded_at = Some(b);
    Ok(out)
}
