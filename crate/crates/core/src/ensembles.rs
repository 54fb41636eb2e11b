//! Hermite β ensemble, its corners process and the θ-Gibbs link between
//! adjacent levels: normalized log-densities and seed-deterministic samplers.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;
use statrs::function::gamma::ln_gamma;

use crate::combinatorics::{levels_in_cone, ConePoint, WeylPoint};
use crate::error::{Error, Result};
use crate::jack::Theta;
use crate::quadrature::TanhSinh;
use crate::rng::{path_rng, rng_from_seed, PathRng};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EnsembleParams {
    pub n: usize,
    pub theta: Theta,
    pub variance_t: f64,
}

impl EnsembleParams {
    pub fn new(n: usize, theta: Theta, variance_t: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::OutOfRange("ensemble needs N ≥ 1".into()));
        }
        if !(variance_t > 0.0 && variance_t.is_finite()) {
            return Err(Error::OutOfRange(format!(
                "variance t must be positive, got {variance_t}"
            )));
        }
        Ok(Self {
            n,
            theta,
            variance_t,
        })
    }
}

fn ln_vandermonde(y: &[f64]) -> f64 {
    let mut s = 0.0;
    for j in 1..y.len() {
        for i in 0..j {
            s += (y[j] - y[i]).ln();
        }
    }
    s
}

/// ln Z for the Hermite density on the Weyl chamber.
pub fn hermite_log_normalizer(n: usize, theta: Theta, t: f64) -> f64 {
    let th = theta.value();
    let nf = n as f64;
    let gammas: f64 = (1..=n)
        .map(|j| ln_gamma(j as f64 * th) - ln_gamma(th))
        .sum();
    (th * nf * (nf - 1.0) / 2.0 + nf / 2.0) * t.ln() + nf / 2.0 * LN_2PI + gammas
}

/// ln Z for the corners process. It follows from writing the corners density as
/// the level-N Hermite density times the normalized links.
pub fn corners_log_normalizer(n: usize, theta: Theta, t: f64) -> f64 {
    let th = theta.value();
    let nf = n as f64;
    (th * nf * (nf - 1.0) / 2.0 + nf / 2.0) * t.ln()
        + nf / 2.0 * LN_2PI
        + nf * (nf - 1.0) / 2.0 * ln_gamma(th)
}

/// (1/Z) ∏_{i<j}(y_j − y_i)^{2θ} ∏ exp(−y_i²/2t), in log form.
pub fn hermite_log_density(y: &WeylPoint, p: &EnsembleParams) -> f64 {
    let c = y.coords();
    debug_assert_eq!(c.len(), p.n);
    hermite_log_density_raw(c, p.theta.value(), p.variance_t)
        - hermite_log_normalizer(p.n, p.theta, p.variance_t)
}

fn hermite_log_density_raw(c: &[f64], theta: f64, t: f64) -> f64 {
    let gauss: f64 = c.iter().map(|x| -x * x / (2.0 * t)).sum();
    2.0 * theta * ln_vandermonde(c) + gauss
}

/// Normalized log-density of the Hermite β = 2θ corners process; −∞ outside the cone.
pub fn corners_log_density(y: &ConePoint, p: &EnsembleParams) -> f64 {
    let levels = y.levels();
    if !levels_in_cone(levels, 0.0) {
        return f64::NEG_INFINITY;
    }
    let n = levels.len();
    let th = p.theta.value();
    let top = &levels[n - 1];
    let mut s = ln_vandermonde(top)
        + top
            .iter()
            .map(|x| -x * x / (2.0 * p.variance_t))
            .sum::<f64>();
    for k in 1..n {
        let (lo, hi) = (&levels[k - 1], &levels[k]);
        if th != 1.0 {
            s += (2.0 - 2.0 * th) * ln_vandermonde(lo);
            for &a in lo {
                for &b in hi {
                    s += (th - 1.0) * (a - b).abs().ln();
                }
            }
        }
    }
    s - corners_log_normalizer(n, p.theta, p.variance_t)
}

/// Normalized log-density of level k−1 (`u`) given level k (`v`); −∞ when `u`
/// does not interlace `v`.
pub fn theta_gibbs_link_log(u: &[f64], v: &[f64], theta: Theta) -> f64 {
    let k = v.len();
    if k == 0 || u.len() + 1 != k {
        return f64::NEG_INFINITY;
    }
    for (i, &x) in u.iter().enumerate() {
        if !(v[i] <= x && x <= v[i + 1]) {
            return f64::NEG_INFINITY;
        }
    }
    let th = theta.value();
    let mut s = ln_gamma(k as f64 * th) - k as f64 * ln_gamma(th);
    s += ln_vandermonde(u);
    if th != 1.0 {
        for &a in u {
            for &b in v {
                s += (th - 1.0) * (a - b).abs().ln();
            }
        }
    }
    s + (1.0 - 2.0 * th) * ln_vandermonde(v)
}

/// Both sides of the Dixon–Anderson integral for m = v.len() − 1 ∈ {1, 2}:
/// the m-fold integral by nested tanh-sinh quadrature and the Gamma closed form.
pub fn dixon_anderson_check(v: &[f64], theta: Theta) -> Result<(f64, f64)> {
    let m = v.len().saturating_sub(1);
    if !(1..=2).contains(&m) {
        return Err(Error::OutOfRange(format!(
            "Dixon–Anderson check supports m ∈ {{1,2}}, got {m}"
        )));
    }
    if v.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::InvalidPoint(format!(
            "{v:?} is not strictly increasing"
        )));
    }
    let th = theta.value();
    let rhs = {
        let mut l = (m + 1) as f64 * ln_gamma(th) - ln_gamma((m + 1) as f64 * th);
        for j in 1..v.len() {
            for i in 0..j {
                l += (2.0 * th - 1.0) * (v[j] - v[i]).ln();
            }
        }
        l.exp()
    };
    let e = th - 1.0;
    let lhs = if m == 1 {
        TanhSinh::with_tol(1e-11)
            .integrate(v[0], v[1], |nd| (nd.from_left * nd.from_right).powf(e))?
    } else {
        let outer = TanhSinh::with_tol(1e-9);
        let inner = TanhSinh::with_tol(1e-11);
        let mut failure = None;
        let val = outer.integrate(v[0], v[1], |n1| {
            // u1 − v1, v2 − u1 and |u1 − v3| without cancellation
            let w1 = (n1.from_left * n1.from_right * (v[2] - n1.x)).powf(e);
            let r = inner.integrate(v[1], v[2], |n2| {
                let gap = n1.from_right + n2.from_left;
                gap * ((n2.x - v[0]) * n2.from_left * n2.from_right).powf(e)
            });
            match r {
                Ok(x) => w1 * x,
                Err(err) => {
                    failure.get_or_insert(err);
                    0.0
                }
            }
        })?;
        if let Some(err) = failure {
            return Err(err);
        }
        val
    };
    Ok((lhs, rhs))
}

/// Tuning and mixing diagnostics of one Metropolis run.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct McmcDiagnostics {
    pub acceptance_rate: f64,
    pub step_size: f64,
    pub burn_in: usize,
    /// Integrated autocorrelation time (in steps) of the slowest monitored observable.
    pub tau_int: f64,
    pub thin: usize,
}

#[derive(Clone, Debug)]
pub struct HermiteSamples {
    pub points: Vec<WeylPoint>,
    pub diagnostics: McmcDiagnostics,
}

const BURN_IN: usize = 4000;
const PILOT: usize = 40_000;
const TARGET_ACCEPT: f64 = 0.3;

/// Sokal-windowed integrated autocorrelation time.
pub fn integrated_autocorrelation(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 4 {
        return 1.0;
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
    if var == 0.0 {
        return f64::INFINITY;
    }
    let mut tau = 1.0;
    for lag in 1..n / 2 {
        let c: f64 = (0..n - lag)
            .map(|i| (xs[i] - mean) * (xs[i + lag] - mean))
            .sum::<f64>()
            / (n as f64 * var);
        tau += 2.0 * c;
        if lag as f64 >= 5.0 * tau {
            break;
        }
    }
    tau.max(1.0)
}

struct Walker {
    y: Vec<f64>,
    logp: f64,
    theta: f64,
    t: f64,
    proposal: Vec<f64>,
}

impl Walker {
    /// One random-walk step in ℝᴺ followed by sorting. The symmetrized target is
    /// exchangeable, so sorting preserves reversibility on the chamber.
    fn step(&mut self, sigma: f64, rng: &mut PathRng) -> bool {
        for (p, &y) in self.proposal.iter_mut().zip(&self.y) {
            let z: f64 = StandardNormal.sample(rng);
            *p = y + sigma * z;
        }
        self.proposal.sort_by(f64::total_cmp);
        let lp = hermite_log_density_raw(&self.proposal, self.theta, self.t);
        let u: f64 = rng.random();
        if lp.is_finite() && u.ln() < lp - self.logp {
            std::mem::swap(&mut self.y, &mut self.proposal);
            self.logp = lp;
            true
        } else {
            false
        }
    }

    fn observables(&self) -> [f64; 2] {
        let c = &self.y;
        [c.iter().map(|x| x * x).sum(), c[c.len() - 1] - c[0]]
    }
}

/// Adaptive random-walk Metropolis for the Hermite density. The step size is
/// tuned during burn-in toward 30% acceptance and then frozen; a pilot run
/// estimates the autocorrelation time and the chain is thinned by ⌈3τ⌉.
pub fn sample_hermite(p: &EnsembleParams, n_samples: usize, seed: u64) -> Result<HermiteSamples> {
    let n = p.n;
    let scale = p.variance_t.sqrt();
    let mut rng = rng_from_seed(seed);
    // Start at the zeros of the Hermite polynomial scale: spread ~ √(θN) · √t.
    let spread = (p.theta.value() * n as f64).sqrt().max(1.0);
    let y0: Vec<f64> = (0..n)
        .map(|i| scale * spread * (2.0 * (i as f64 + 0.5) / n as f64 - 1.0))
        .collect();
    let mut w = Walker {
        logp: hermite_log_density_raw(&y0, p.theta.value(), p.variance_t),
        y: y0,
        theta: p.theta.value(),
        t: p.variance_t,
        proposal: vec![0.0; n],
    };
    let mut log_sigma = (scale * 2.4 / (n as f64).sqrt()).ln();
    for i in 0..BURN_IN {
        let acc = w.step(log_sigma.exp(), &mut rng);
        let gain = 10.0 / (i as f64 + 100.0);
        log_sigma += gain * (f64::from(u8::from(acc)) - TARGET_ACCEPT);
    }
    let sigma = log_sigma.exp();

    let mut trace = [Vec::with_capacity(PILOT), Vec::with_capacity(PILOT)];
    let mut accepted = 0usize;
    for _ in 0..PILOT {
        accepted += usize::from(w.step(sigma, &mut rng));
        let obs = w.observables();
        trace[0].push(obs[0]);
        trace[1].push(obs[1]);
    }
    // the spread is identically zero for one particle
    let monitored = if n == 1 { &trace[..1] } else { &trace[..] };
    let tau = monitored
        .iter()
        .map(|tr| integrated_autocorrelation(tr))
        .fold(1.0, f64::max);
    let pilot_rate = accepted as f64 / PILOT as f64;
    if !(0.05..=0.8).contains(&pilot_rate) || !tau.is_finite() || tau > PILOT as f64 / 50.0 {
        return Err(Error::NonConvergence(format!(
            "Hermite Metropolis: acceptance {pilot_rate:.3}, τ_int {tau:.1} after {PILOT} pilot steps"
        )));
    }
    let thin = (3.0 * tau).ceil() as usize;

    let mut points = Vec::with_capacity(n_samples);
    let mut total_acc = 0usize;
    for _ in 0..n_samples {
        for _ in 0..thin {
            total_acc += usize::from(w.step(sigma, &mut rng));
        }
        points.push(WeylPoint::new(w.y.clone())?);
    }
    let steps = (n_samples * thin).max(1);
    Ok(HermiteSamples {
        points,
        diagnostics: McmcDiagnostics {
            acceptance_rate: if n_samples == 0 {
                pilot_rate
            } else {
                total_acc as f64 / steps as f64
            },
            step_size: sigma,
            burn_in: BURN_IN,
            tau_int: tau,
            thin,
        },
    })
}

/// A corners sample with a flag raised when some interlacing interval was too
/// narrow to sample and its midpoint was used instead.
#[derive(Clone, Debug)]
pub struct CornersSample {
    pub point: ConePoint,
    pub degenerate: bool,
}

const GIBBS_SWEEPS: usize = 12;
const PANELS: usize = 128;
const MIN_WIDTH: f64 = 1e-12;

/// Draws from the density ∝ (x−a)^{θ−1} (b−x)^{θ−1} exp(log_g(x)) on (a, b) by
/// inverting a tabulated CDF. For θ < 1 each half of the interval is mapped by
/// x − a = w^{1/θ} (resp. b − x), which absorbs the endpoint singularity.
fn sample_interval<F: Fn(f64) -> f64>(
    a: f64,
    b: f64,
    theta: f64,
    log_g: F,
    rng: &mut PathRng,
) -> f64 {
    let width = b - a;
    let c = 0.5 * width;
    let substitute = theta < 1.0;
    let w_max = if substitute { c.powf(theta) } else { c };
    let dw = w_max / PANELS as f64;
    // Node values of the integrand in w for both halves, as logs.
    let mut logs = [[0.0f64; PANELS + 1]; 2];
    for (side, row) in logs.iter_mut().enumerate() {
        for (j, slot) in row.iter_mut().enumerate() {
            let wj = j as f64 * dw;
            let r = if substitute { wj.powf(1.0 / theta) } else { wj };
            let x = if side == 0 { a + r } else { b - r };
            let far = width - r;
            *slot = if substitute {
                log_g(x) + (theta - 1.0) * far.ln() - theta.ln()
            } else if theta == 1.0 {
                log_g(x)
            } else {
                log_g(x) + (theta - 1.0) * (r.ln() + far.ln())
            };
        }
    }
    let top = logs
        .iter()
        .flatten()
        .copied()
        .filter(|v| v.is_finite())
        .fold(f64::NEG_INFINITY, f64::max);
    let h: Vec<[f64; PANELS + 1]> = logs
        .iter()
        .map(|row| {
            let mut out = [0.0; PANELS + 1];
            for (o, &l) in out.iter_mut().zip(row) {
                *o = if l.is_finite() { (l - top).exp() } else { 0.0 };
            }
            out
        })
        .collect();
    let masses: Vec<f64> = h
        .iter()
        .flat_map(|row| row.windows(2).map(|p| 0.5 * (p[0] + p[1]) * dw))
        .collect();
    let total: f64 = masses.iter().sum();
    let mut target = rng.random::<f64>() * total;
    let mut idx = masses.len() - 1;
    for (i, &m) in masses.iter().enumerate() {
        if target < m {
            idx = i;
            break;
        }
        target -= m;
    }
    let (side, panel) = (idx / PANELS, idx % PANELS);
    let (h0, h1) = (h[side][panel], h[side][panel + 1]);
    // Linear density h0 + (h1 − h0) s/dw on the panel: solve for s.
    let frac = (target / masses[idx].max(f64::MIN_POSITIVE)).clamp(0.0, 1.0);
    let slope = h1 - h0;
    let s = if slope.abs() <= 1e-12 * (h0 + h1) {
        frac * dw
    } else {
        let m = 0.5 * (h0 + h1) * dw * frac;
        // (slope/2dw) s² + h0 s − m = 0, stable root
        let disc = (h0 * h0 + 2.0 * slope * m / dw).max(0.0);
        2.0 * m / (h0 + disc.sqrt())
    };
    let wv = (panel as f64 * dw + s).min(w_max);
    let r = if substitute { wv.powf(1.0 / theta) } else { wv };
    let x = if side == 0 { a + r } else { b - r };
    x.clamp(a, b)
}

/// Samples level k−1 given level k from the θ-Gibbs link by coordinate-wise
/// Gibbs sweeps. Returns the level and whether a degenerate interval was hit.
fn sample_link(v: &[f64], theta: f64, rng: &mut PathRng) -> (Vec<f64>, bool) {
    let m = v.len() - 1;
    let mut u: Vec<f64> = (0..m).map(|i| 0.5 * (v[i] + v[i + 1])).collect();
    let mut degenerate = false;
    let sweeps = if m == 1 { 1 } else { GIBBS_SWEEPS };
    for _ in 0..sweeps {
        for i in 0..m {
            let (a, b) = (v[i], v[i + 1]);
            if b - a < MIN_WIDTH {
                u[i] = 0.5 * (a + b);
                degenerate = true;
                continue;
            }
            let others = &u;
            let log_g = |x: f64| {
                let mut s = 0.0;
                for (mi, &um) in others.iter().enumerate() {
                    if mi != i {
                        s += (x - um).abs().ln();
                    }
                }
                if theta != 1.0 {
                    for (j, &vj) in v.iter().enumerate() {
                        if j != i && j != i + 1 {
                            s += (theta - 1.0) * (x - vj).abs().ln();
                        }
                    }
                }
                s
            };
            let x = sample_interval(a, b, theta, log_g, rng);
            u[i] = x;
        }
    }
    (u, degenerate)
}

fn corners_from_top(v: &[f64], theta: Theta, rng: &mut PathRng) -> Result<CornersSample> {
    let n = v.len();
    let mut levels = vec![Vec::new(); n];
    levels[n - 1] = v.to_vec();
    let mut degenerate = false;
    for k in (1..n).rev() {
        let (u, d) = sample_link(&levels[k], theta.value(), rng);
        degenerate |= d;
        levels[k - 1] = u;
    }
    Ok(CornersSample {
        point: ConePoint::new(levels)?,
        degenerate,
    })
}

/// Samples levels N−1, …, 1 top-down from the θ-Gibbs conditional given level N.
pub fn sample_corners_given_top(v: &WeylPoint, theta: Theta, seed: u64) -> Result<CornersSample> {
    if v.len() > 1 && !(v.min_gap() > 0.0) {
        return Err(Error::InvalidPoint(format!(
            "top level {:?} is not strictly ordered",
            v.coords()
        )));
    }
    corners_from_top(v.coords(), theta, &mut rng_from_seed(seed))
}

#[derive(Clone, Debug)]
pub struct CornersSamples {
    pub points: Vec<ConePoint>,
    pub degenerate: usize,
    pub diagnostics: McmcDiagnostics,
}

/// Hermite corners samples: the level-N draws of [`sample_hermite`] with the
/// same seed, completed downward with per-sample seeds derived from `seed`.
pub fn sample_corners(p: &EnsembleParams, n_samples: usize, seed: u64) -> Result<CornersSamples> {
    let top = sample_hermite(p, n_samples, seed)?;
    let completed: Vec<CornersSample> = top
        .points
        .par_iter()
        .enumerate()
        .map(|(i, v)| {
            corners_from_top(
                v.coords(),
                p.theta,
                &mut path_rng(seed ^ 0xC0_4E_E5, i as u64),
            )
        })
        .collect::<Result<_>>()?;
    let degenerate = completed.iter().filter(|c| c.degenerate).count();
    Ok(CornersSamples {
        points: completed.into_iter().map(|c| c.point).collect(),
        degenerate,
        diagnostics: top.diagnostics,
    })
}

/// Draws level-(N−1) given level N for many tops in parallel, one derived
/// seed per index. Used by the intertwining pipelines.
pub fn link_batch(tops: &[Vec<f64>], theta: Theta, seed: u64) -> Vec<Vec<f64>> {
    tops.par_iter()
        .enumerate()
        .map(|(i, v)| sample_link(v, theta.value(), &mut path_rng(seed, i as u64)).0)
        .collect()
}
