//! Adapted charts, hyperbolicity constants, cones and graph transforms.

use crate::error::{Error, Result};
use crate::linalg::{self, Mat2, Vec2};
use crate::roots::solve_increasing;
use crate::systems::{self, DynamicalSystem, Point, SystemKind};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

pub const ROOT_TOL: f64 = 1e-12;
pub const DEFAULT_NODES_PER_SIDE: usize = 64;

/// Default constants for the cat map family: (sigma_u, sigma_s, eta, rho).
pub const CAT_DEFAULTS: (f64, f64, f64, f64) = (2.6, 0.39, 0.01, 0.05);

/// exp(-lambda_Gamma) = max((sigma_s + 3 eta)/(1 - 3 eta), 1/(sigma_u - 3 eta)).
pub fn exp_neg_lambda_gamma(sigma_u: f64, sigma_s: f64, eta: f64) -> f64 {
    ((sigma_s + 3.0 * eta) / (1.0 - 3.0 * eta)).max(1.0 / (sigma_u - 3.0 * eta))
}

/// K_Gamma = 5/(1 - exp(-lambda_Gamma))^2.
pub fn k_gamma(exp_neg_lambda: f64) -> f64 {
    5.0 / (1.0 - exp_neg_lambda).powi(2)
}

/// K_APS = K_AS (1 + e)/(1 - e) with e = exp(-lambda_AS).
pub fn k_aps(k_as: f64, exp_neg_lambda: f64) -> f64 {
    k_as * (1.0 + exp_neg_lambda) / (1.0 - exp_neg_lambda)
}

/// eps(rho) = rho min((sigma_u - 1)/2, (1 - sigma_s)/8).
pub fn eps_of_rho(sigma_u: f64, sigma_s: f64, rho: f64) -> f64 {
    rho * ((sigma_u - 1.0) / 2.0).min((1.0 - sigma_s) / 8.0)
}

/// Cone angle after one step: (alpha sigma_s + 3 eta)/(sigma_u - 3 eta).
pub fn cone_beta(alpha: f64, sigma_u: f64, sigma_s: f64, eta: f64) -> f64 {
    (alpha * sigma_s + 3.0 * eta) / (sigma_u - 3.0 * eta)
}

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct HyperbolicConstants {
    pub sigma_u: f64,
    pub sigma_s: f64,
    pub eta: f64,
    pub rho: f64,
    pub eps_rho: f64,
    pub alpha: f64,
    pub exp_neg_lambda_gamma: f64,
    pub lambda_gamma: f64,
    pub k_gamma: f64,
    pub lip_gamma: f64,
    pub lip_f: f64,
    pub eps_as: f64,
    pub k_as: f64,
    pub lambda_as: f64,
    pub k_aps: f64,
    pub n_as: usize,
    pub diam: f64,
    pub delta_as: f64,
    pub k_lambda: f64,
}

impl HyperbolicConstants {
    /// Validates the basic inequalities and fills the chart-independent fields.
    pub fn new(sigma_u: f64, sigma_s: f64, eta: f64, rho: f64) -> Result<Self> {
        let fail = |check: &str, margin: f64| Err(Error::InfeasibleConstants { check: check.into(), margin });
        if !(sigma_s > 0.0) {
            return fail("sigma_s > 0", sigma_s);
        }
        if !(sigma_s < 1.0) {
            return fail("sigma_s < 1", 1.0 - sigma_s);
        }
        if !(sigma_u > 1.0) {
            return fail("sigma_u > 1", sigma_u - 1.0);
        }
        let eta_max = ((sigma_u - 1.0) / 6.0).min((1.0 - sigma_s) / 6.0);
        if !(eta > 0.0 && eta < eta_max) {
            return fail("0 < eta < min((sigma_u-1)/6, (1-sigma_s)/6)", eta_max - eta);
        }
        if !(rho > 0.0 && rho < 1.0) {
            return fail("0 < rho < 1", rho);
        }
        let e = exp_neg_lambda_gamma(sigma_u, sigma_s, eta);
        Ok(HyperbolicConstants {
            sigma_u,
            sigma_s,
            eta,
            rho,
            eps_rho: eps_of_rho(sigma_u, sigma_s, rho),
            alpha: 6.0 * eta / (sigma_u - sigma_s),
            exp_neg_lambda_gamma: e,
            lambda_gamma: -e.ln(),
            k_gamma: k_gamma(e),
            lip_gamma: f64::NAN,
            lip_f: f64::NAN,
            eps_as: f64::NAN,
            k_as: f64::NAN,
            lambda_as: f64::NAN,
            k_aps: f64::NAN,
            n_as: 0,
            diam: f64::NAN,
            delta_as: f64::NAN,
            k_lambda: f64::NAN,
        })
    }

    pub fn cat_defaults() -> Self {
        let (su, ss, eta, rho) = CAT_DEFAULTS;
        Self::new(su, ss, eta, rho).expect("default constants are feasible")
    }

    /// The stronger eta bound required by the shadowing construction.
    pub fn check_shadowing_eta(&self) -> Result<()> {
        let bound = ((1.0 - self.sigma_s).powi(2) / 12.0).min((self.sigma_u - 1.0) / 6.0);
        if self.eta < bound {
            Ok(())
        } else {
            Err(Error::InfeasibleConstants { check: "eta < min((1-sigma_s)^2/12, (sigma_u-1)/6)".into(), margin: bound - self.eta })
        }
    }

    pub fn beta(&self, alpha: f64) -> f64 {
        cone_beta(alpha, self.sigma_u, self.sigma_s, self.eta)
    }

    /// Graph-transform contraction factor sigma_s + 2 eta.
    pub fn contraction(&self) -> f64 {
        self.sigma_s + 2.0 * self.eta
    }

    /// Fills the shadowing constants from the chart and map Lipschitz data.
    pub fn fill_shadowing(&mut self, lip_gamma: f64, lip_f: f64) {
        self.lip_gamma = lip_gamma;
        self.lip_f = lip_f;
        self.eps_as = self.eps_rho / ((1.0 + lip_gamma).powi(2) * (1.0 + lip_f));
        self.k_as = lip_gamma * lip_gamma * self.k_gamma;
        self.lambda_as = self.lambda_gamma;
        self.k_aps = k_aps(self.k_as, (-self.lambda_as).exp());
    }

    /// Fills N_AS, delta_AS and K_Lambda.
    pub fn fill_cover(&mut self, n_as: usize, diam: f64) {
        self.n_as = n_as;
        self.diam = diam;
        self.delta_as = n_as as f64 * diam;
        self.k_lambda = ((n_as as f64 + 1.0) * diam / self.eps_as).max(self.k_aps);
    }
}

/// Constants for the golden-mean shift. A one-sided subshift shadows any
/// pseudo-orbit with errors below 1/2 by concatenating first symbols, with
/// d(x_i, f^i(y)) <= sum_k 2^-(k-i) delta_k, so K_AS = 2 and lambda_AS = ln 2.
pub fn symbolic_constants(depth: u8) -> HyperbolicConstants {
    let words = systems::golden_mean_words(depth);
    let eps_as = 0.5;
    let n_as = greedy_cover(&words, eps_as / 2.0, |a, b| a.dist(b));
    let e = 0.5;
    let mut c = HyperbolicConstants {
        sigma_u: 2.0,
        sigma_s: 0.5,
        eta: 0.0,
        rho: 1.0,
        eps_rho: eps_as,
        alpha: 0.0,
        exp_neg_lambda_gamma: e,
        lambda_gamma: 2f64.ln(),
        k_gamma: 2.0,
        lip_gamma: 1.0,
        lip_f: 2.0,
        eps_as,
        k_as: 2.0,
        lambda_as: 2f64.ln(),
        k_aps: k_aps(2.0, e),
        n_as: 0,
        diam: f64::NAN,
        delta_as: f64::NAN,
        k_lambda: f64::NAN,
    };
    c.fill_cover(n_as, 1.0);
    c
}

/// Greedy covering count with open balls of the given radius.
pub fn greedy_cover<T, D: Fn(&T, &T) -> f64>(points: &[T], radius: f64, dist: D) -> usize {
    let mut covered = vec![false; points.len()];
    let mut count = 0;
    for i in 0..points.len() {
        if covered[i] {
            continue;
        }
        count += 1;
        for j in i..points.len() {
            if !covered[j] && dist(&points[i], &points[j]) < radius {
                covered[j] = true;
            }
        }
    }
    count
}

/// Greedy covering count of torus points, bucketed so that large nets are cheap.
pub fn greedy_cover_torus(points: &[Point], radius: f64) -> usize {
    // an eigen-sup ball of radius r sits inside the Euclidean ball of radius r sqrt 2
    let reach = radius * std::f64::consts::SQRT_2;
    let cells = ((1.0 / reach).floor() as usize).clamp(1, 1024);
    if cells < 3 {
        return greedy_cover(points, radius, |a, b| systems::torus_dist(*a, *b));
    }
    let cell_of = |p: &Point| {
        let i = ((p[0] * cells as f64) as usize).min(cells - 1);
        let j = ((p[1] * cells as f64) as usize).min(cells - 1);
        (i, j)
    };
    let mut buckets: Vec<Vec<usize>> = vec![Vec::new(); cells * cells];
    for (k, p) in points.iter().enumerate() {
        let (i, j) = cell_of(p);
        buckets[i * cells + j].push(k);
    }
    let mut covered = vec![false; points.len()];
    let mut count = 0;
    for k in 0..points.len() {
        if covered[k] {
            continue;
        }
        count += 1;
        covered[k] = true;
        let (i, j) = cell_of(&points[k]);
        for di in [cells - 1, 0, 1] {
            for dj in [cells - 1, 0, 1] {
                let b = &buckets[((i + di) % cells) * cells + (j + dj) % cells];
                for &m in b {
                    if !covered[m] && systems::torus_dist(points[k], points[m]) < radius {
                        covered[m] = true;
                    }
                }
            }
        }
    }
    count
}

/// A chart gamma_x(v) = x + F v whose coordinates are (unstable, stable) and in
/// which the adapted norm is the plain sup norm.
#[derive(Clone, Debug)]
pub struct AdaptedChart {
    pub base: Point,
    pub frame: Mat2,
    pub frame_inv: Mat2,
}

impl AdaptedChart {
    pub fn new(base: Point, frame: Mat2) -> Self {
        let frame_inv = linalg::inverse(&frame).expect("chart frame is invertible");
        AdaptedChart { base, frame, frame_inv }
    }

    /// Ambient lift of chart coordinates (not reduced modulo 1).
    pub fn to_ambient(&self, v: Vec2) -> Point {
        linalg::add(self.base, linalg::mat_vec(&self.frame, v))
    }

    /// Chart coordinates of an ambient point near the base.
    pub fn from_ambient(&self, p: Point) -> Vec2 {
        linalg::mat_vec(&self.frame_inv, systems::centered(linalg::sub(p, self.base)))
    }

    pub fn norm(v: Vec2) -> f64 {
        linalg::sup_norm(v)
    }

    pub fn proj_u(v: Vec2) -> Vec2 {
        [v[0], 0.0]
    }

    pub fn proj_s(v: Vec2) -> Vec2 {
        [0.0, v[1]]
    }

    /// Unit unstable and stable frame vectors in ambient coordinates.
    pub fn unstable_vector(&self) -> Vec2 {
        [self.frame[0][0], self.frame[1][0]]
    }

    pub fn stable_vector(&self) -> Vec2 {
        [self.frame[0][1], self.frame[1][1]]
    }

    /// Lipschitz constants of the chart and its inverse against the ambient metric.
    pub fn lipschitz(&self) -> (f64, f64) {
        let e = systems::eigenbasis();
        let et = linalg::transpose(&e);
        let fwd = linalg::sup_op_norm(&linalg::mat_mul(&et, &self.frame));
        let inv = linalg::sup_op_norm(&linalg::mat_mul(&self.frame_inv, &e));
        (fwd, inv)
    }
}

/// Chart family over a torus system.
#[derive(Clone, Debug)]
pub struct ChartFamily {
    pub system: DynamicalSystem,
    /// Chain length N of the adapted-norm construction (0 when bypassed).
    pub chain_len: usize,
    /// Length of the power iterations that locate the invariant directions.
    pub power_len: usize,
    pub kappa_u: f64,
    pub kappa_s: f64,
}

impl ChartFamily {
    pub fn chart(&self, x: Point) -> AdaptedChart {
        if self.system.is_linear_cat() {
            return AdaptedChart::new(x, systems::eigenbasis());
        }
        let sys = &self.system;
        let n = self.chain_len.max(1);
        let k = n + self.power_len;
        let e = systems::eigenbasis();
        // backward orbit for the unstable direction
        let mut back = Vec::with_capacity(k + 1);
        back.push(x);
        for i in 0..k {
            back.push(sys.preimage(back[i]));
        }
        let mut v = [e[0][0], e[1][0]];
        let mut mult_u = vec![0.0; k + 1];
        for i in (1..=k).rev() {
            let w = linalg::mat_vec(&sys.df(back[i]), v);
            let m = systems::eigen_norm(w);
            mult_u[i] = m;
            v = linalg::scale(w, 1.0 / m);
        }
        // forward orbit for the stable direction
        let mut fwd = Vec::with_capacity(k + 1);
        fwd.push(x);
        for i in 0..k {
            fwd.push(sys.map_torus(fwd[i]));
        }
        // pulled-back stable directions at fwd[0..k]; each has at least power_len pull-backs
        let mut w = [e[0][1], e[1][1]];
        let mut dirs = vec![w; k + 1];
        for i in (1..=k).rev() {
            let inv = linalg::inverse(&sys.df(fwd[i - 1])).expect("invertible differential");
            let z = linalg::mat_vec(&inv, w);
            w = linalg::scale(z, 1.0 / systems::eigen_norm(z));
            dirs[i - 1] = w;
        }
        // pushing one vector forward would drift into the unstable direction
        let mult_s: Vec<f64> = (0..n).map(|i| systems::eigen_norm(linalg::mat_vec(&sys.df(fwd[i]), dirs[i]))).collect();
        if systems::to_eigen(v)[0] < 0.0 {
            v = linalg::scale(v, -1.0);
        }
        if systems::to_eigen(w)[1] < 0.0 {
            w = linalg::scale(w, -1.0);
        }
        // adapted norms: maxima over the orbit segments of length below N
        let mut nu: f64 = 1.0;
        let mut prod = 1.0;
        for j in 1..n {
            prod *= mult_u[j];
            nu = nu.max((j as f64 * self.kappa_u).exp() / prod);
        }
        let mut ns: f64 = 1.0;
        let mut prod = 1.0;
        for (j, m) in mult_s.iter().enumerate().take(n.saturating_sub(1)) {
            prod *= m;
            ns = ns.max(prod * (-((j + 1) as f64) * self.kappa_s).exp());
        }
        let frame = [[v[0] / nu, w[0] / ns], [v[1] / nu, w[1] / ns]];
        AdaptedChart::new(x, frame)
    }

    pub fn local_map(&self, x: Point, y: Point) -> LocalMap<'_> {
        LocalMap { system: &self.system, src: self.chart(x), dst: self.chart(y) }
    }

    pub fn local_map_from(&self, src: AdaptedChart, dst: AdaptedChart) -> LocalMap<'_> {
        LocalMap { system: &self.system, src, dst }
    }
}

/// f_{x,y} = gamma_y^-1 o f o gamma_x.
#[derive(Clone, Debug)]
pub struct LocalMap<'a> {
    pub system: &'a DynamicalSystem,
    pub src: AdaptedChart,
    pub dst: AdaptedChart,
}

impl LocalMap<'_> {
    pub fn eval(&self, v: Vec2) -> Vec2 {
        self.dst.from_ambient(self.system.lift(self.src.to_ambient(v)))
    }

    pub fn jacobian(&self, v: Vec2) -> Mat2 {
        let df = self.system.df(self.src.to_ambient(v));
        linalg::mat_mul(&self.dst.frame_inv, &linalg::mat_mul(&df, &self.src.frame))
    }

    /// A_{x,y} = Df_{x,y}(0) with blocks [[A^u, D^u], [D^s, A^s]].
    pub fn linearization(&self) -> Mat2 {
        self.jacobian([0.0, 0.0])
    }
}

/// Measured margins of the hyperbolicity inequalities over the sampled transitions.
#[derive(Clone, Debug, Serialize)]
pub struct ChartVerification {
    pub samples: usize,
    pub chain_len: usize,
    pub min_expansion: f64,
    pub max_contraction: f64,
    pub max_offdiag: f64,
    pub max_nonlinearity: f64,
    pub margin_expansion: f64,
    pub margin_contraction: f64,
    pub margin_offdiag: f64,
    pub margin_nonlinearity: f64,
}

impl ChartVerification {
    pub fn worst(&self) -> (&'static str, f64) {
        let all = [
            ("|A^u v| >= sigma_u |v|", self.margin_expansion),
            ("|A^s w| <= sigma_s |w|", self.margin_contraction),
            ("|D^u|, |D^s| <= eta", self.margin_offdiag),
            ("|Df_{x,y}(v) - A_{x,y}| <= eta", self.margin_nonlinearity),
        ];
        let mut w = all[0];
        for a in all {
            if a.1 < w.1 {
                w = a;
            }
        }
        w
    }
}

/// Smallest N with 2 C exp(N lambda_s) <= exp(N kappa_s) and 2 C exp(-N lambda_u) <= exp(-N kappa_u).
pub fn chain_length(system: &DynamicalSystem, kappa_u: f64, kappa_s: f64) -> Option<usize> {
    let c = system.c_lambda;
    (2..=4096).find(|&n| {
        let n = n as f64;
        (2.0 * c).ln() + n * system.lambda_s <= n * kappa_s && (2.0 * c).ln() - n * system.lambda_u <= -n * kappa_u
    })
}

/// Random admissible transition x -> y with |f_{x,y}(0)|_y <= frac eps(rho).
pub fn random_transition<R: Rng>(family: &ChartFamily, consts: &HyperbolicConstants, frac: f64, rng: &mut R) -> (Point, Point) {
    loop {
        let x = [rng.gen::<f64>(), rng.gen::<f64>()];
        let fx = family.system.map_torus(x);
        let off = [rng.gen_range(-1.0..1.0) * frac * consts.eps_rho, rng.gen_range(-1.0..1.0) * frac * consts.eps_rho];
        let y = systems::reduce(linalg::add(fx, systems::from_eigen(off)));
        let lm = family.local_map(x, y);
        if AdaptedChart::norm(lm.eval([0.0, 0.0])) <= frac * consts.eps_rho {
            return (x, y);
        }
    }
}

/// Builds the chart family and verifies the hyperbolicity inequalities on
/// `samples` random admissible transitions.
pub fn build_charts(system: &DynamicalSystem, draft: &HyperbolicConstants, samples: usize, seed: u64) -> Result<(ChartFamily, ChartVerification)> {
    if !system.is_torus() {
        return Err(Error::InvalidArgument("charts are only defined for torus systems".into()));
    }
    let eu = system.lambda_u.exp();
    let es = system.lambda_s.exp();
    if !(draft.sigma_u < eu) {
        return Err(Error::InfeasibleConstants { check: "sigma_u < exp(lambda_u)".into(), margin: eu - draft.sigma_u });
    }
    if !(draft.sigma_s > es) {
        return Err(Error::InfeasibleConstants { check: "sigma_s > exp(lambda_s)".into(), margin: draft.sigma_s - es });
    }
    let kappa_u = draft.sigma_u.ln();
    let kappa_s = draft.sigma_s.ln();
    let chain_len = if system.is_linear_cat() {
        0
    } else {
        chain_length(system, kappa_u, kappa_s)
            .ok_or_else(|| Error::InfeasibleConstants { check: "chain length N exists".into(), margin: 0.0 })?
    };
    let family = ChartFamily { system: system.clone(), chain_len, power_len: 24, kappa_u, kappa_s };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v = ChartVerification {
        samples,
        chain_len,
        min_expansion: f64::INFINITY,
        max_contraction: 0.0,
        max_offdiag: 0.0,
        max_nonlinearity: 0.0,
        margin_expansion: 0.0,
        margin_contraction: 0.0,
        margin_offdiag: 0.0,
        margin_nonlinearity: 0.0,
    };
    let rho = draft.rho;
    for _ in 0..samples {
        let (x, y) = random_transition(&family, draft, 1.0, &mut rng);
        let lm = family.local_map(x, y);
        let a = lm.linearization();
        v.min_expansion = v.min_expansion.min(a[0][0].abs());
        v.max_contraction = v.max_contraction.max(a[1][1].abs());
        v.max_offdiag = v.max_offdiag.max(a[0][1].abs()).max(a[1][0].abs());
        let probes = [[rho, rho], [rho, -rho], [-rho, rho], [-rho, -rho], [rng.gen_range(-rho..rho), rng.gen_range(-rho..rho)]];
        for p in probes {
            let d = linalg::mat_sub(&lm.jacobian(p), &a);
            v.max_nonlinearity = v.max_nonlinearity.max(linalg::sup_op_norm(&d));
        }
    }
    v.margin_expansion = v.min_expansion - draft.sigma_u;
    v.margin_contraction = draft.sigma_s - v.max_contraction;
    v.margin_offdiag = draft.eta - v.max_offdiag;
    v.margin_nonlinearity = draft.eta - v.max_nonlinearity;
    let (check, margin) = v.worst();
    if margin < 0.0 {
        return Err(Error::InfeasibleConstants { check: check.into(), margin });
    }
    Ok((family, v))
}

/// Fills every derived constant. Lip(Gamma) and Lip(f) are sampled maxima;
/// N_AS is the greedy cover count of `net` by balls of radius eps_AS/2.
pub fn derive_constants(base: &HyperbolicConstants, family: &ChartFamily, net: &[Point], samples: usize, seed: u64) -> HyperbolicConstants {
    let mut c = base.clone();
    let (lip_gamma, lip_f) = if family.system.is_linear_cat() {
        let (a, b) = family.chart([0.0, 0.0]).lipschitz();
        (a.max(b), systems::lambda_u())
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let e = systems::eigenbasis();
        let et = linalg::transpose(&e);
        let mut lg: f64 = 1.0;
        let mut lf: f64 = 0.0;
        for _ in 0..samples {
            let x = [rng.gen::<f64>(), rng.gen::<f64>()];
            let (a, b) = family.chart(x).lipschitz();
            lg = lg.max(a).max(b);
            let df = linalg::mat_mul(&et, &linalg::mat_mul(&family.system.df(x), &e));
            lf = lf.max(linalg::sup_op_norm(&df));
        }
        (lg, lf)
    };
    c.fill_shadowing(lip_gamma, lip_f);
    let n_as = greedy_cover_torus(net, c.eps_as / 2.0);
    c.fill_cover(n_as, family.system.diameter());
    c
}

/// Closed cone membership in chart coordinates.
pub fn cone_membership(w: Vec2, side: ConeSide, alpha: f64) -> bool {
    match side {
        ConeSide::Unstable => w[1].abs() <= alpha * w[0].abs(),
        ConeSide::Stable => w[0].abs() <= alpha * w[1].abs(),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum ConeSide {
    Unstable,
    Stable,
}

#[derive(Clone, Debug, Serialize)]
pub struct ConeReport {
    pub alpha: f64,
    pub beta: f64,
    pub in_cone: bool,
    pub image_in_beta_cone: bool,
    /// |P^u (f(b) - f(a))| / |P^u (b - a)| for the unstable statement,
    /// |P^s (f(b) - f(a))| / |P^s (b - a)| for the stable one.
    pub factor: Option<f64>,
    pub factor_ok: bool,
}

impl ConeReport {
    pub fn holds(&self) -> bool {
        !self.in_cone || (self.image_in_beta_cone && self.factor_ok)
    }
}

/// Forward invariance of unstable cones for one local map.
pub fn cone_propagate(a: Vec2, b: Vec2, lm: &LocalMap, alpha: f64, c: &HyperbolicConstants) -> ConeReport {
    let beta = c.beta(alpha);
    let d = linalg::sub(b, a);
    let in_cone = cone_membership(d, ConeSide::Unstable, alpha);
    let fd = linalg::sub(lm.eval(b), lm.eval(a));
    if d == [0.0, 0.0] {
        return ConeReport { alpha, beta, in_cone: true, image_in_beta_cone: true, factor: None, factor_ok: true };
    }
    let factor = fd[0].abs() / d[0].abs();
    ConeReport {
        alpha,
        beta,
        in_cone,
        image_in_beta_cone: cone_membership(fd, ConeSide::Unstable, beta),
        factor: Some(factor),
        factor_ok: factor >= c.sigma_u - 3.0 * c.eta,
    }
}

/// Backward invariance of stable cones: if f(b) - f(a) lies in the alpha
/// stable cone then b - a lies in the beta stable cone.
pub fn cone_propagate_stable(a: Vec2, b: Vec2, lm: &LocalMap, alpha: f64, c: &HyperbolicConstants) -> ConeReport {
    let beta = c.beta(alpha);
    let d = linalg::sub(b, a);
    let fd = linalg::sub(lm.eval(b), lm.eval(a));
    if d == [0.0, 0.0] {
        return ConeReport { alpha, beta, in_cone: true, image_in_beta_cone: true, factor: None, factor_ok: true };
    }
    let in_cone = cone_membership(fd, ConeSide::Stable, alpha);
    let factor = if d[1] == 0.0 { f64::INFINITY } else { fd[1].abs() / d[1].abs() };
    ConeReport {
        alpha,
        beta,
        in_cone,
        image_in_beta_cone: cone_membership(d, ConeSide::Stable, beta),
        factor: Some(factor),
        factor_ok: factor <= c.sigma_s + 3.0 * c.eta,
    }
}

/// Piecewise-linear graph over B^u(rho) with uniform nodes.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PlGraph {
    pub rho: f64,
    pub values: Vec<f64>,
}

impl PlGraph {
    pub fn constant(rho: f64, nodes_per_side: usize, c: f64) -> Self {
        PlGraph { rho, values: vec![c; 2 * nodes_per_side + 1] }
    }

    pub fn from_fn<F: Fn(f64) -> f64>(rho: f64, nodes_per_side: usize, f: F) -> Self {
        let mut g = Self::constant(rho, nodes_per_side, 0.0);
        for i in 0..g.values.len() {
            g.values[i] = f(g.node(i));
        }
        g
    }

    pub fn nodes_per_side(&self) -> usize {
        (self.values.len() - 1) / 2
    }

    pub fn spacing(&self) -> f64 {
        self.rho / self.nodes_per_side() as f64
    }

    pub fn node(&self, i: usize) -> f64 {
        -self.rho + i as f64 * self.spacing()
    }

    pub fn eval(&self, u: f64) -> f64 {
        let h = self.spacing();
        let t = ((u + self.rho) / h).clamp(0.0, (self.values.len() - 1) as f64);
        let i = (t.floor() as usize).min(self.values.len() - 2);
        let s = t - i as f64;
        self.values[i] * (1.0 - s) + self.values[i + 1] * s
    }

    pub fn slope(&self) -> f64 {
        let h = self.spacing();
        self.values.windows(2).map(|w| (w[1] - w[0]).abs() / h).fold(0.0, f64::max)
    }

    pub fn height(&self) -> f64 {
        self.values[self.nodes_per_side()].abs()
    }

    pub fn sup(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn sup_dist(&self, other: &PlGraph) -> f64 {
        self.values.iter().zip(&other.values).fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    /// Slack added to certified slope bounds for node values solved to `ROOT_TOL`.
    pub fn slope_slack(&self) -> f64 {
        4.0 * ROOT_TOL / self.spacing()
    }

    /// Membership in the graph class: slope <= alpha and |G(0)| <= rho/2.
    pub fn certify(&self, alpha: f64) -> Result<()> {
        let slope = self.slope();
        if slope > alpha + self.slope_slack() {
            return Err(Error::InfeasibleConstants { check: "Lip(G) <= alpha".into(), margin: alpha - slope });
        }
        if self.height() > self.rho / 2.0 {
            return Err(Error::InfeasibleConstants { check: "|G(0)| <= rho/2".into(), margin: self.rho / 2.0 - self.height() });
        }
        if self.sup() > self.rho {
            return Err(Error::InfeasibleConstants { check: "G maps into B^s(rho)".into(), margin: self.rho - self.sup() });
        }
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("u,g\n");
        for (i, v) in self.values.iter().enumerate() {
            s.push_str(&format!("{:.17e},{:.17e}\n", self.node(i), v));
        }
        s
    }
}

/// Finds v in B^u(rho) with P^u f(v + G(v)) = target.
pub fn solve_on_graph(g: &PlGraph, lm: &LocalMap, target: f64) -> Result<f64> {
    let rho = g.rho;
    solve_increasing(|v| lm.eval([v, g.eval(v)])[0] - target, -rho, rho, ROOT_TOL)
}

/// Forward graph transform of `g` under the local map, sampled on the same node grid.
pub fn graph_transform(g: &PlGraph, lm: &LocalMap, c: &HyperbolicConstants) -> Result<PlGraph> {
    let out = graph_transform_uncertified(g, lm)?;
    out.certify(c.alpha)?;
    Ok(out)
}

pub fn graph_transform_uncertified(g: &PlGraph, lm: &LocalMap) -> Result<PlGraph> {
    let mut out = g.clone();
    for i in 0..g.values.len() {
        let target = g.node(i);
        let v = solve_on_graph(g, lm, target)?;
        out.values[i] = lm.eval([v, g.eval(v)])[1];
    }
    Ok(out)
}

#[derive(Clone, Debug, Serialize)]
pub struct ManifoldResult {
    pub graph: PlGraph,
    /// sup |G^{k+1} - G^k| for k = 1..n-1.
    pub successive: Vec<f64>,
    /// Ratios of consecutive successive differences.
    pub rates: Vec<f64>,
}

/// Iterates the graph transform along a backward chain of transitions.
/// `chain[0..=n]` are base points with chain[k] -> chain[k+1] admissible; the
/// result lives in the chart at chain[n]. Returns G^n together with the
/// differences between G^m and G^{m+1}, where G^m starts from the null graph at
/// chain[n-m].
pub fn local_unstable_manifold(family: &ChartFamily, chain: &[Point], c: &HyperbolicConstants, nodes_per_side: usize) -> Result<ManifoldResult> {
    let n = chain.len() - 1;
    if n == 0 {
        return Err(Error::InvalidArgument("empty transition chain".into()));
    }
    let charts: Vec<AdaptedChart> = chain.iter().map(|x| family.chart(*x)).collect();
    let maps: Vec<LocalMap> = (0..n).map(|k| family.local_map_from(charts[k].clone(), charts[k + 1].clone())).collect();
    // G^m at the final chart is T_{n-1} ... T_{n-m}(0); run every start at once
    let mut finals: Vec<PlGraph> = Vec::with_capacity(n);
    for m in 1..=n {
        let mut g = PlGraph::constant(c.rho, nodes_per_side, 0.0);
        for lm in &maps[n - m..] {
            g = graph_transform(&g, lm, c)?;
        }
        finals.push(g);
    }
    let successive: Vec<f64> = finals.windows(2).map(|w| w[1].sup_dist(&w[0])).collect();
    let rates = successive.windows(2).filter(|w| w[0] > 0.0).map(|w| w[1] / w[0]).collect();
    Ok(ManifoldResult { graph: finals.pop().unwrap(), successive, rates })
}

/// Backward chain of exact preimages ending at x, as base points for
/// `local_unstable_manifold` (chain[n] = x).
pub fn backward_chain(system: &DynamicalSystem, x: Point, n: usize) -> Vec<Point> {
    let mut chain = vec![x];
    for _ in 0..n {
        let p = system.preimage(*chain.last().unwrap());
        chain.push(p);
    }
    chain.reverse();
    chain
}

pub fn is_perturbed(system: &DynamicalSystem) -> bool {
    matches!(system.kind, SystemKind::PerturbedCat { eps, .. } if eps > 0.0)
}
