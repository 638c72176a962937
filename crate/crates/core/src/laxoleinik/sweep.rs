//! Exact min-plus convolution with an L1 kernel in the plane.
//!
//! For the eigen sup norm, max(|a|, |b|) = |s| + |t| with s = (a+b)/2 and
//! t = (a-b)/2, so `min_c w_c + C |y - y_c|` splits into four dominance
//! queries, one per quadrant. Each is a sweep in s with a Fenwick prefix
//! minimum over t ranks.

use rayon::prelude::*;

#[derive(Clone, Debug)]
struct Event {
    /// Source slot (< n_src) or n_src + target index.
    id: u32,
    /// Sources: index of the first target t-rank at or above the source. Targets: own rank.
    rank: u32,
    /// sigma_s s + sigma_t t for this quadrant.
    sum: f64,
}

#[derive(Clone, Debug)]
struct Quadrant {
    events: Vec<Event>,
    ranks: usize,
}

/// Precomputed sweep orders for a fixed set of sources and targets.
#[derive(Clone, Debug)]
pub struct SweepPlan {
    n_src: usize,
    n_tgt: usize,
    quadrants: Vec<Quadrant>,
}

/// Rotated coordinates (s, t) of a point given in eigen coordinates (a, b).
pub fn rotate(ab: [f64; 2]) -> [f64; 2] {
    [0.5 * (ab[0] + ab[1]), 0.5 * (ab[0] - ab[1])]
}

impl SweepPlan {
    /// `src` and `tgt` are rotated coordinates.
    pub fn new(src: &[[f64; 2]], tgt: &[[f64; 2]]) -> Self {
        let n_src = src.len();
        let n_tgt = tgt.len();
        let signs = [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)];
        let quadrants = signs
            .par_iter()
            .map(|&(ss, st)| {
                // t ranks are taken among targets only, so the Fenwick tree stays small
                let mut ts: Vec<f64> = tgt.iter().map(|p| st * p[1]).collect();
                ts.sort_unstable_by(f64::total_cmp);
                ts.dedup();
                let s_max = tgt.iter().map(|p| ss * p[0]).fold(f64::NEG_INFINITY, f64::max);
                // (s, is_target, event)
                let mut keyed: Vec<(f64, bool, Event)> = Vec::with_capacity(n_src + n_tgt);
                for (i, p) in src.iter().enumerate() {
                    let (s, t) = (ss * p[0], st * p[1]);
                    let rank = ts.partition_point(|v| *v < t);
                    // sources above every target in s or t never enter a query
                    if rank < ts.len() && s <= s_max {
                        keyed.push((s, false, Event { id: i as u32, rank: rank as u32, sum: s + t }));
                    }
                }
                for (j, p) in tgt.iter().enumerate() {
                    let (s, t) = (ss * p[0], st * p[1]);
                    let rank = ts.partition_point(|v| *v < t);
                    keyed.push((s, true, Event { id: (n_src + j) as u32, rank: rank as u32, sum: s + t }));
                }
                // sources before targets at equal s so that ties are included
                keyed.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                Quadrant { events: keyed.into_iter().map(|k| k.2).collect(), ranks: ts.len() }
            })
            .collect();
        SweepPlan { n_src, n_tgt, quadrants }
    }

    /// min_c w[c] + k (|s - s_c| + |t - t_c|) for every target, with the minimizing source.
    pub fn apply(&self, w: &[f64], k: f64) -> (Vec<f64>, Vec<u32>) {
        assert_eq!(w.len(), self.n_src);
        let partial: Vec<(Vec<f64>, Vec<u32>)> = self
            .quadrants
            .par_iter()
            .map(|quad| {
                let ranks = quad.ranks;
                let mut tree = vec![(f64::INFINITY, u32::MAX); ranks + 1];
                let mut best = vec![f64::INFINITY; self.n_tgt];
                let mut arg = vec![u32::MAX; self.n_tgt];
                for e in &quad.events {
                    let id = e.id as usize;
                    if id < self.n_src {
                        let val = w[id] - k * e.sum;
                        // a source at rank r serves every target of rank >= r
                        let mut i = e.rank as usize + 1;
                        while i <= ranks {
                            if val < tree[i].0 {
                                tree[i] = (val, e.id);
                            }
                            i += i & i.wrapping_neg();
                        }
                    } else {
                        let mut i = e.rank as usize + 1;
                        let mut m = (f64::INFINITY, u32::MAX);
                        while i > 0 {
                            if tree[i].0 < m.0 {
                                m = tree[i];
                            }
                            i -= i & i.wrapping_neg();
                        }
                        let t = id - self.n_src;
                        best[t] = m.0 + k * e.sum;
                        arg[t] = m.1;
                    }
                }
                (best, arg)
            })
            .collect();
        let mut best = vec![f64::INFINITY; self.n_tgt];
        let mut arg = vec![u32::MAX; self.n_tgt];
        for (b, a) in partial {
            for t in 0..self.n_tgt {
                if b[t] < best[t] {
                    best[t] = b[t];
                    arg[t] = a[t];
                }
            }
        }
        (best, arg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let src: Vec<[f64; 2]> = (0..300).map(|_| [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)]).collect();
        let tgt: Vec<[f64; 2]> = (0..200).map(|_| [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)]).collect();
        let w: Vec<f64> = (0..300).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let plan = SweepPlan::new(&src, &tgt);
        let (fast, arg) = plan.apply(&w, 1.7);
        for (t, y) in tgt.iter().enumerate() {
            let brute = src.iter().zip(&w).map(|(s, wv)| wv + 1.7 * ((y[0] - s[0]).abs() + (y[1] - s[1]).abs())).fold(f64::INFINITY, f64::min);
            assert!((fast[t] - brute).abs() < 1e-12);
            let a = arg[t] as usize;
            let via = w[a] + 1.7 * ((y[0] - src[a][0]).abs() + (y[1] - src[a][1]).abs());
            assert!((via - brute).abs() < 1e-12);
        }
    }
}
