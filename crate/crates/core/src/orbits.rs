//! Periodic orbits, Birkhoff averages and estimates of the ergodic minimizing value.

use crate::charts::{self, HyperbolicConstants};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::shadowing;
use crate::systems::{self, DynamicalSystem, Observable, PhasePoint, Point, SystemKind, Word};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::collections::HashMap;

/// Largest number of torus points enumerated by `periodic_points`.
pub const MAX_ENUMERATED: i128 = 20_000_000;

/// A periodic orbit of the cat map in exact rational form: the points are
/// `numerators[k] / denominator`.
#[derive(Clone, Debug, Serialize)]
pub struct RationalOrbit {
    pub denominator: i128,
    pub numerators: Vec<[i128; 2]>,
}

impl RationalOrbit {
    pub fn period(&self) -> usize {
        self.numerators.len()
    }

    pub fn points(&self) -> Vec<Point> {
        let d = self.denominator as f64;
        self.numerators.iter().map(|k| [k[0] as f64 / d, k[1] as f64 / d]).collect()
    }

    /// A^n p = p exactly, and consecutive points are images of each other.
    pub fn verify(&self) -> bool {
        let d = self.denominator;
        let n = self.numerators.len();
        (0..n).all(|i| apply_cat_mod(self.numerators[i], d) == self.numerators[(i + 1) % n])
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct PeriodicOrbit {
    pub period: usize,
    pub points: Vec<PhasePoint>,
    pub sum: f64,
    pub mean: f64,
}

impl Serialize for PhasePoint {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            PhasePoint::Torus(x) => x.serialize(s),
            PhasePoint::Word(w) => w.to_string().serialize(s),
        }
    }
}

impl PeriodicOrbit {
    pub fn new(points: Vec<PhasePoint>, phi: &Observable) -> Self {
        let sum: f64 = points.iter().map(|p| phi.eval(p)).sum();
        let period = points.len();
        PeriodicOrbit { period, mean: sum / period as f64, sum, points }
    }
}

fn apply_cat_mod(k: [i128; 2], d: i128) -> [i128; 2] {
    [(2 * k[0] + k[1]).rem_euclid(d), (k[0] + k[1]).rem_euclid(d)]
}

/// A^n - I in exact integer arithmetic.
pub fn cat_power_minus_identity(n: usize) -> Result<[[i128; 2]; 2]> {
    let mut p: [[i128; 2]; 2] = [[1, 0], [0, 1]];
    for _ in 0..n {
        let q = [
            [p[0][0].checked_mul(2).and_then(|x| x.checked_add(p[1][0])), p[0][1].checked_mul(2).and_then(|x| x.checked_add(p[1][1]))],
            [p[0][0].checked_add(p[1][0]), p[0][1].checked_add(p[1][1])],
        ];
        let mut next = [[0i128; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                next[i][j] = q[i][j].ok_or_else(|| Error::Overflow(format!("A^{n} entries overflow")))?;
            }
        }
        p = next;
    }
    Ok([[p[0][0] - 1, p[0][1]], [p[1][0], p[1][1] - 1]])
}

/// |det(A^n - I)|, the number of points of period dividing n.
pub fn periodic_point_count(n: usize) -> Result<i128> {
    let m = cat_power_minus_identity(n)?;
    let d = m[0][0].checked_mul(m[1][1]).zip(m[0][1].checked_mul(m[1][0])).map(|(a, b)| a - b);
    d.map(i128::abs).ok_or_else(|| Error::Overflow(format!("det(A^{n} - I) overflows")))
}

/// lambda_u^n + lambda_s^n - 2, the same count through the eigenvalues.
pub fn periodic_point_count_float(n: usize) -> f64 {
    systems::lambda_u().powi(n as i32) + systems::lambda_s().powi(n as i32) - 2.0
}

fn ext_gcd(a: i128, b: i128) -> (i128, i128, i128) {
    if b == 0 {
        if a < 0 {
            (-a, -1, 0)
        } else {
            (a, 1, 0)
        }
    } else {
        let (g, x, y) = ext_gcd(b, a.rem_euclid(b));
        // a = q b + r with r = a mod b
        let q = (a - a.rem_euclid(b)) / b;
        (g, y, x - q * y)
    }
}

/// Every point of period dividing n, as numerators over |det(A^n - I)|.
pub fn periodic_numerators(n: usize) -> Result<(i128, Vec<[i128; 2]>)> {
    if n == 0 {
        return Err(Error::InvalidArgument("period must be >= 1".into()));
    }
    let m = cat_power_minus_identity(n)?;
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    let d = det.abs();
    if d > MAX_ENUMERATED {
        return Err(Error::Overflow(format!("{d} periodic points for n = {n} exceeds the enumeration limit")));
    }
    // column operations bring M to lower triangular [[g, 0], [h21, h22]]
    let (a, b) = (m[0][0], m[0][1]);
    let (g, u, v) = ext_gcd(a, b);
    let h22 = (m[1][1] * (a / g) - m[1][0] * (b / g)).abs();
    let _ = (u, v);
    debug_assert_eq!(g * h22, d);
    // x = M^{-1} r = adj(M) r / det; numerators over |det|
    let adj = [[m[1][1], -m[0][1]], [-m[1][0], m[0][0]]];
    let sign = det.signum();
    let mut out = Vec::with_capacity(d as usize);
    for i in 0..g {
        for j in 0..h22 {
            let k0 = (sign * (adj[0][0] * i + adj[0][1] * j)).rem_euclid(d);
            let k1 = (sign * (adj[1][0] * i + adj[1][1] * j)).rem_euclid(d);
            out.push([k0, k1]);
        }
    }
    Ok((d, out))
}

/// Periodic points of the linear cat map of period dividing n, grouped into orbits.
pub fn periodic_points(system: &DynamicalSystem, n: usize) -> Result<Vec<RationalOrbit>> {
    if !system.is_linear_cat() {
        return Err(Error::InvalidArgument("exact periodic points need the linear cat map".into()));
    }
    let (d, nums) = periodic_numerators(n)?;
    let index: HashMap<[i128; 2], usize> = nums.iter().enumerate().map(|(i, k)| (*k, i)).collect();
    let mut seen = vec![false; nums.len()];
    let mut orbits = Vec::new();
    for start in 0..nums.len() {
        if seen[start] {
            continue;
        }
        let mut orbit = Vec::new();
        let mut k = nums[start];
        loop {
            let i = *index.get(&k).ok_or_else(|| Error::Overflow("periodic point image left the solution set".into()))?;
            if seen[i] {
                break;
            }
            seen[i] = true;
            orbit.push(k);
            k = apply_cat_mod(k, d);
        }
        orbits.push(RationalOrbit { denominator: d, numerators: orbit });
    }
    Ok(orbits)
}

/// Census for one period: (determinant count, enumerated points, all orbits exact).
pub fn census(n: usize) -> Result<(i128, usize, bool)> {
    let det = periodic_point_count(n)?;
    let orbits = periodic_points(&systems::cat_map(), n)?;
    let total = orbits.iter().map(|o| o.period()).sum();
    let exact = orbits.iter().all(|o| {
        o.verify() && {
            let mut k = o.numerators[0];
            for _ in 0..n {
                k = apply_cat_mod(k, o.denominator);
            }
            k == o.numerators[0]
        }
    });
    Ok((det, total, exact))
}

/// Cyclically admissible words of the golden-mean graph with exact length p,
/// one per rotation class, as symbol vectors.
pub fn golden_mean_cycles(p: usize) -> Vec<Vec<u8>> {
    let mut out = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for bits in 0u32..(1u32 << p) {
        let sym: Vec<u8> = (0..p).map(|i| ((bits >> i) & 1) as u8).collect();
        if (0..p).any(|i| sym[i] == 1 && sym[(i + 1) % p] == 1) {
            continue;
        }
        let rots: Vec<Vec<u8>> = (0..p).map(|r| (0..p).map(|i| sym[(i + r) % p]).collect()).collect();
        // primitive only: a word equal to a nontrivial rotation has smaller period
        if rots[1..].contains(&sym) {
            continue;
        }
        let canon = rots.iter().min().unwrap().clone();
        if seen.insert(canon.clone()) {
            out.push(canon);
        }
    }
    out
}

/// Orbit of the periodic sequence `sym` under the one-sided shift, each point
/// truncated to depth D.
pub fn periodic_sequence_orbit(sym: &[u8], depth: u8) -> Vec<PhasePoint> {
    let p = sym.len();
    (0..p)
        .map(|r| {
            let mut bits = 0u32;
            for i in 0..depth as usize {
                if sym[(r + i) % p] == 1 {
                    bits |= 1 << i;
                }
            }
            PhasePoint::Word(Word { bits, depth })
        })
        .collect()
}

/// Periodic orbits with period at most `p_max`.
pub fn all_periodic_orbits(system: &DynamicalSystem, phi: &Observable, p_max: usize) -> Result<Vec<PeriodicOrbit>> {
    let mut out = Vec::new();
    match &system.kind {
        SystemKind::GoldenMean { depth } => {
            for p in 1..=p_max {
                for sym in golden_mean_cycles(p) {
                    out.push(PeriodicOrbit::new(periodic_sequence_orbit(&sym, *depth), phi));
                }
            }
        }
        _ if system.is_linear_cat() => {
            for p in 1..=p_max {
                for o in periodic_points(system, p)? {
                    if o.period() == p {
                        out.push(PeriodicOrbit::new(o.points().into_iter().map(PhasePoint::Torus).collect(), phi));
                    }
                }
            }
        }
        SystemKind::PerturbedCat { .. } => {
            let consts = HyperbolicConstants::cat_defaults();
            let (family, _) = charts::build_charts(system, &consts, 64, 1)?;
            for p in 1..=p_max {
                for o in periodic_points(&systems::cat_map(), p)? {
                    if o.period() != p {
                        continue;
                    }
                    let pseudo = shadowing::PseudoOrbit::periodic_from_points(system, o.points());
                    let res = shadowing::shadow_periodic(&pseudo, &family, &consts, &shadowing::PeriodicOptions::default())?;
                    let pts = res.p[..p].iter().map(|x| PhasePoint::Torus(*x)).collect();
                    out.push(PeriodicOrbit::new(pts, phi));
                }
            }
        }
        _ => unreachable!(),
    }
    Ok(out)
}

#[derive(Clone, Debug, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Certificate {
    Cycle { nodes: Vec<usize> },
    Orbit { period: usize, points: Vec<PhasePoint> },
    Window { start: PhasePoint, length: usize },
}

#[derive(Clone, Debug, Serialize)]
pub struct EbarEstimate {
    pub value: f64,
    pub method: String,
    pub certificate: Certificate,
}

/// Minimum Birkhoff mean over periodic orbits with period at most `p_max`.
/// Also returns the running minimum for each P = 1..p_max.
pub fn birkhoff_min_periodic(system: &DynamicalSystem, phi: &Observable, p_max: usize) -> Result<(EbarEstimate, Vec<f64>)> {
    if p_max == 0 {
        return Err(Error::InvalidArgument("P_max must be >= 1".into()));
    }
    let orbits = all_periodic_orbits(system, phi, p_max)?;
    let mut best: Option<&PeriodicOrbit> = None;
    let mut running = vec![f64::INFINITY; p_max];
    for o in &orbits {
        if best.is_none_or(|b| o.mean < b.mean) {
            best = Some(o);
        }
        for r in running.iter_mut().skip(o.period - 1) {
            *r = r.min(o.mean);
        }
    }
    let b = best.expect("every system has a fixed point");
    Ok((
        EbarEstimate {
            value: b.mean,
            method: format!("periodic-scan:{p_max}"),
            certificate: Certificate::Orbit { period: b.period, points: b.points.clone() },
        },
        running,
    ))
}

/// Karp's minimum cycle mean on a small directed graph with `n` nodes.
/// Returns the mean and one optimal cycle as a node list (first node not repeated).
pub fn karp<S: Scalar>(n: usize, edges: &[(usize, usize, S)]) -> Option<(S, Vec<usize>)> {
    if n == 0 || edges.is_empty() {
        return None;
    }
    let inf = S::infinity();
    // d[k][v]: least weight of a walk with k edges ending at v, from any start
    let mut d = vec![vec![inf; n]; n + 1];
    let mut parent = vec![vec![usize::MAX; n]; n + 1];
    d[0].iter_mut().for_each(|x| *x = S::zero());
    for k in 1..=n {
        for &(a, b, w) in edges {
            if d[k - 1][a] < inf && d[k - 1][a] + w < d[k][b] {
                d[k][b] = d[k - 1][a] + w;
                parent[k][b] = a;
            }
        }
    }
    let mut best: Option<(S, usize)> = None;
    for v in 0..n {
        if d[n][v] == inf {
            continue;
        }
        let mut worst = -inf;
        for k in 0..n {
            if d[k][v] < inf {
                let r = (d[n][v] - d[k][v]) / S::of((n - k) as f64);
                if r > worst {
                    worst = r;
                }
            }
        }
        if best.is_none_or(|(b, _)| worst < b) {
            best = Some((worst, v));
        }
    }
    let (_, v) = best?;
    // the walk of length n into v repeats a node; its cycles include an optimal one
    let mut walk = vec![v];
    let mut cur = v;
    for k in (1..=n).rev() {
        cur = parent[k][cur];
        walk.push(cur);
    }
    walk.reverse();
    let weight = |a: usize, b: usize| edges.iter().filter(|e| e.0 == a && e.1 == b).map(|e| e.2).fold(inf, |m, w| if w < m { w } else { m });
    let mut cycle_best: Option<(S, Vec<usize>)> = None;
    for i in 0..walk.len() {
        for j in i + 1..walk.len() {
            if walk[i] == walk[j] {
                let cyc: Vec<usize> = walk[i..j].to_vec();
                let total: S = (0..cyc.len()).map(|t| weight(cyc[t], cyc[(t + 1) % cyc.len()])).sum();
                let mean = total / S::of(cyc.len() as f64);
                if cycle_best.as_ref().is_none_or(|(m, _)| mean < *m) {
                    cycle_best = Some((mean, cyc));
                }
                break;
            }
        }
    }
    cycle_best
}

/// Exhaustive minimum mean over simple cycles, by depth-first search.
pub fn exhaustive_min_cycle_mean(n: usize, edges: &[(usize, usize, f64)]) -> Option<(f64, Vec<usize>)> {
    fn dfs(start: usize, cur: usize, path: &mut Vec<usize>, sum: f64, edges: &[(usize, usize, f64)], best: &mut Option<(f64, Vec<usize>)>) {
        for &(a, b, w) in edges {
            if a != cur {
                continue;
            }
            if b == start {
                let mean = (sum + w) / path.len() as f64;
                if best.as_ref().is_none_or(|(m, _)| mean < *m) {
                    *best = Some((mean, path.clone()));
                }
            } else if b > start && !path.contains(&b) {
                path.push(b);
                dfs(start, b, path, sum + w, edges, best);
                path.pop();
            }
        }
    }
    let mut best = None;
    for s in 0..n {
        dfs(s, s, &mut vec![s], 0.0, edges, &mut best);
    }
    best
}

/// Edges of the golden-mean graph weighted by an edge table.
pub fn golden_mean_edges<S: Scalar>(t: &[S; 3]) -> Vec<(usize, usize, S)> {
    vec![(0, 0, t[0]), (0, 1, t[1]), (1, 0, t[2])]
}

/// Exact ergodic minimizing value of a locally constant observable on the shift.
pub fn min_mean_cycle(system: &DynamicalSystem, phi: &Observable) -> Result<EbarEstimate> {
    if system.depth().is_none() {
        return Err(Error::InvalidArgument("minimum mean cycle needs a symbolic system".into()));
    }
    let t = phi
        .edge_table()
        .ok_or_else(|| Error::InvalidArgument(format!("observable `{}` is not locally constant on two symbols", phi.name)))?;
    let (value, nodes) = karp(2, &golden_mean_edges(&t)).expect("golden-mean graph has cycles");
    Ok(EbarEstimate { value, method: "exact-karp".into(), certificate: Certificate::Cycle { nodes } })
}

/// Minimum of length-n Birkhoff averages over a set of starting points.
///
/// On the torus the starting points are the k x k lattice (k = floor(sqrt(samples)))
/// followed by seeded uniform points; on the shift they are seeded random
/// admissible sequences of length n + D, shifted without truncation.
pub fn sweep_min(system: &DynamicalSystem, phi: &Observable, n: usize, samples: usize, seed: u64) -> Result<EbarEstimate> {
    if n == 0 || samples == 0 {
        return Err(Error::InvalidArgument("sweep needs n >= 1 and samples >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best = (f64::INFINITY, PhasePoint::Torus([0.0, 0.0]));
    match system.depth() {
        Some(depth) => {
            for _ in 0..samples {
                let len = n + depth as usize;
                let mut sym = Vec::with_capacity(len);
                let mut prev = 0u8;
                for _ in 0..len {
                    let s = if prev == 1 { 0 } else { rng.gen_range(0..2u8) };
                    sym.push(s);
                    prev = s;
                }
                let mut total = 0.0;
                for k in 0..n {
                    let mut bits = 0u32;
                    for i in 0..depth as usize {
                        bits |= (sym[k + i] as u32) << i;
                    }
                    total += phi.eval_word(&Word { bits, depth });
                }
                let mean = total / n as f64;
                if mean < best.0 {
                    let mut bits = 0u32;
                    for i in 0..depth as usize {
                        bits |= (sym[i] as u32) << i;
                    }
                    best = (mean, PhasePoint::Word(Word { bits, depth }));
                }
            }
        }
        None => {
            let k = (samples as f64).sqrt().floor() as usize;
            let mut starts: Vec<Point> = Vec::with_capacity(samples);
            for i in 0..k {
                for j in 0..k {
                    starts.push([i as f64 / k as f64, j as f64 / k as f64]);
                }
            }
            while starts.len() < samples {
                starts.push([rng.gen::<f64>(), rng.gen::<f64>()]);
            }
            for x0 in starts {
                let mut x = x0;
                let mut total = 0.0;
                for _ in 0..n {
                    total += phi.eval_torus(x);
                    x = system.map_torus(x);
                }
                let mean = total / n as f64;
                if mean < best.0 {
                    best = (mean, PhasePoint::Torus(x0));
                }
            }
        }
    }
    Ok(EbarEstimate { value: best.0, method: format!("sweep:{n}"), certificate: Certificate::Window { start: best.1, length: n } })
}

#[derive(Clone, Debug, Serialize)]
pub struct LivsicHypothesisReport {
    pub p_max: usize,
    pub orbits_checked: usize,
    pub min_sum: f64,
    pub violations: Vec<PeriodicOrbit>,
}

impl LivsicHypothesisReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks that every periodic orbit with period at most `p_max` has a
/// nonnegative Birkhoff sum.
pub fn check_positive_livsic_hypothesis(system: &DynamicalSystem, phi: &Observable, p_max: usize) -> Result<LivsicHypothesisReport> {
    let orbits = all_periodic_orbits(system, phi, p_max)?;
    let min_sum = orbits.iter().map(|o| o.sum).fold(f64::INFINITY, f64::min);
    let orbits_checked = orbits.len();
    let violations = orbits.into_iter().filter(|o| o.sum < 0.0).collect();
    Ok(LivsicHypothesisReport { p_max, orbits_checked, min_sum, violations })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixed_point_and_period_two() {
        let cat = systems::cat_map();
        let o1 = periodic_points(&cat, 1).unwrap();
        assert_eq!(o1.len(), 1);
        assert_eq!(o1[0].points(), vec![[0.0, 0.0]]);
        let o2 = periodic_points(&cat, 2).unwrap();
        let mut periods: Vec<usize> = o2.iter().map(|o| o.period()).collect();
        periods.sort();
        assert_eq!(periods, vec![1, 2, 2]);
    }

    #[test]
    fn counts_match_eigenvalue_formula() {
        for n in 1..=12 {
            let c = periodic_point_count(n).unwrap();
            assert_eq!(c as f64, periodic_point_count_float(n).round());
        }
    }

    #[test]
    fn ext_gcd_identity() {
        for (a, b) in [(12i128, 18i128), (-7, 5), (0, 4), (9, 0), (-6, -4)] {
            let (g, x, y) = ext_gcd(a, b);
            assert_eq!(a * x + b * y, g);
            assert!(g >= 0);
        }
    }

    #[test]
    fn karp_two_cycle_example() {
        let e = golden_mean_edges(&[1.0, 0.0, 0.0]);
        let (m, cyc) = karp(2, &e).unwrap();
        assert_eq!(m, 0.0);
        assert_eq!(cyc.len(), 2);
    }

    #[test]
    fn karp_in_single_precision() {
        let e = golden_mean_edges(&[0.3f32, 0.6, 0.1]);
        let (m, cyc) = karp(2, &e).unwrap();
        assert!((m - 0.3).abs() < 1e-6);
        assert_eq!(cyc, vec![0]);
    }

    #[test]
    fn golden_mean_cycle_counts() {
        // primitive cyclic words: 1, 1, 1, 1, 2 for p = 1..5 (Lucas-number necklaces)
        let counts: Vec<usize> = (1..=5).map(|p| golden_mean_cycles(p).len()).collect();
        assert_eq!(counts, vec![1, 1, 1, 1, 2]);
    }
}
