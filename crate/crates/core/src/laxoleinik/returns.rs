//! Return-time decomposition of a sequence and the segment classification used
//! to bound pseudo-Birkhoff sums from below.

use crate::charts::greedy_cover;
use crate::systems::{DynamicalSystem, Observable, PhasePoint};
use serde::Serialize;

#[derive(Clone, Debug, Serialize)]
pub struct ReturnDecomposition {
    pub epsilon: f64,
    /// tau_0 = 0 < tau_1 < ... < tau_r = n.
    pub taus: Vec<usize>,
    pub r: usize,
    /// For k < r, every x_j with j >= tau_k is epsilon-far from all earlier x_{tau_l}.
    pub far_from_earlier: bool,
    /// For k < r, a jump tau_k >= tau_{k-1} + 2 lands right after a return.
    pub returns_before_jumps: bool,
    /// The final segment starts and ends near x_{tau_{r-1}}.
    pub final_return: bool,
    /// Greedy count of open balls of radius epsilon/2 covering the points.
    pub cover_count: usize,
    pub r_within_cover: bool,
}

impl ReturnDecomposition {
    pub fn holds(&self) -> bool {
        self.far_from_earlier && self.returns_before_jumps && self.final_return && self.r_within_cover
    }
}

/// The inductive rule: with T = { j in (tau_k, n] : d(x_j, x_{tau_k}) < eps },
/// tau_{k+1} is tau_k + 1 if T is empty, max T + 1 if max T < n, and n otherwise.
pub fn decompose_returns<P, D: Fn(&P, &P) -> f64>(points: &[P], epsilon: f64, dist: D) -> ReturnDecomposition {
    assert!(!points.is_empty(), "decompose_returns needs a nonempty sequence");
    let n = points.len() - 1;
    let mut taus = vec![0usize];
    while *taus.last().unwrap() < n {
        let t = *taus.last().unwrap();
        let last_close = (t + 1..=n).rev().find(|&j| dist(&points[j], &points[t]) < epsilon);
        let next = match last_close {
            None => t + 1,
            Some(m) if m < n => m + 1,
            Some(_) => n,
        };
        taus.push(next);
    }
    let r = taus.len() - 1;

    let mut far_from_earlier = true;
    for k in 1..r {
        for l in 0..k {
            for j in taus[k]..n {
                if dist(&points[j], &points[taus[l]]) < epsilon {
                    far_from_earlier = false;
                }
            }
        }
    }
    let returns_before_jumps = (1..r).all(|k| taus[k] < taus[k - 1] + 2 || dist(&points[taus[k] - 1], &points[taus[k - 1]]) < epsilon);
    let final_return = r == 0 || {
        let (a, b) = (taus[r - 1], taus[r]);
        dist(&points[b - 1], &points[a]) < epsilon || dist(&points[b], &points[a]) < epsilon
    };
    let cover_count = greedy_cover(points, epsilon / 2.0, &dist);
    ReturnDecomposition { epsilon, taus, r, far_from_earlier, returns_before_jumps, final_return, cover_count, r_within_cover: r <= cover_count.max(1) }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SegmentKind {
    /// A single step whose error is at least eps_AS.
    First,
    /// An eps_AS pseudo-orbit closed by one large error.
    Second,
    /// The trailing pseudo-orbit.
    Third,
}

#[derive(Clone, Debug, Serialize)]
pub struct Segment {
    pub kind: SegmentKind,
    pub start: usize,
    /// One past the last index whose term is summed.
    pub end: usize,
    /// Sum of phi(x_i) - phibar + C d(f(x_i), x_{i+1}) over the segment.
    pub sum: f64,
    /// Lower bound guaranteed for this kind of segment.
    pub bound: f64,
    /// C threshold making the bound nonnegative (first and second kind).
    pub c_threshold: Option<f64>,
    pub holds: bool,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct SegmentConstants {
    pub eps_as: f64,
    pub delta_as: f64,
    pub diam: f64,
    pub c: f64,
    pub phibar: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct SegmentReport {
    pub segments: Vec<Segment>,
    pub total: f64,
    pub total_bound: f64,
    /// -Lip(phi) delta_AS.
    pub livsic_bound: f64,
    pub all_hold: bool,
}

/// Splits (x_0, ..., x_n) at every step with d(f(x_i), x_{i+1}) >= eps_AS and
/// evaluates each segment against its lower bound.
pub fn classify_segments(system: &DynamicalSystem, phi: &Observable, points: &[PhasePoint], k: &SegmentConstants) -> SegmentReport {
    let n = points.len().saturating_sub(1);
    let lip = phi.lip;
    let errors: Vec<f64> = (0..n).map(|i| system.dist(&system.apply(&points[i]), &points[i + 1])).collect();
    let terms: Vec<f64> = (0..n).map(|i| phi.eval(&points[i]) - k.phibar + k.c * errors[i]).collect();
    let mut segments = Vec::new();
    let mut start = 0;
    let mut push = |kind: SegmentKind, start: usize, end: usize| {
        let sum: f64 = terms[start..end].iter().sum();
        let (bound, c_threshold) = match kind {
            SegmentKind::First => (-lip * k.diam + k.c * k.eps_as, Some(lip * k.diam / k.eps_as)),
            SegmentKind::Second => (-lip * k.delta_as - lip * k.diam + k.c * k.eps_as, Some(lip * (k.delta_as + k.diam) / k.eps_as)),
            SegmentKind::Third => (-lip * k.delta_as, None),
        };
        segments.push(Segment { kind, start, end, sum, bound, c_threshold, holds: sum >= bound });
    };
    for i in 0..n {
        if errors[i] >= k.eps_as {
            let kind = if i == start { SegmentKind::First } else { SegmentKind::Second };
            push(kind, start, i + 1);
            start = i + 1;
        }
    }
    if start < n {
        push(SegmentKind::Third, start, n);
    }
    let total = terms.iter().sum();
    let total_bound = segments.iter().map(|s| s.bound).sum();
    let all_hold = segments.iter().all(|s| s.holds);
    SegmentReport { segments, total, total_bound, livsic_bound: -lip * k.delta_as, all_hold }
}
