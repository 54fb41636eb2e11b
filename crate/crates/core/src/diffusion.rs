//! Euler–Maruyama integration of β-Dyson Brownian motion and of the
//! multilevel interlaced SDE, with Brownian-bridge step refinement near
//! collisions and δ-proximity stopping monitors.

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::combinatorics::{levels_in_open_cone, ConePoint, WeylPoint};
use crate::ensembles::{sample_corners, sample_hermite, EnsembleParams};
use crate::error::{Error, Result};
use crate::jack::Theta;
use crate::rng::{derive_seed, rng_from_seed, PathRng};

/// Maximum number of consecutive refused steps.
pub const MAX_HALVINGS: u32 = 40;
pub const DEFAULT_DELTA: f64 = 1e-4;

/// b_i = (β/2) Σ_{j≠i} 1/(x_i − x_j).
pub fn dyson_drift(x: &WeylPoint, beta: f64) -> Result<Vec<f64>> {
    if x.len() > 1 && !(x.min_gap() > 0.0) {
        return Err(Error::InvalidPoint(format!(
            "coincident coordinates in {:?}",
            x.coords()
        )));
    }
    let mut out = vec![0.0; x.len()];
    dyson_drift_into(x.coords(), beta, &mut out);
    Ok(out)
}

fn dyson_drift_into(x: &[f64], beta: f64, out: &mut [f64]) {
    let c = 0.5 * beta;
    out.iter_mut().for_each(|o| *o = 0.0);
    for i in 0..x.len() {
        for j in i + 1..x.len() {
            let r = c / (x[i] - x[j]);
            out[i] += r;
            out[j] -= r;
        }
    }
}

/// Drift of y^k_i: (1−θ) [Σ_{m≠i} 1/(y^k_i − y^k_m) − Σ_m 1/(y^k_i − y^{k−1}_m)].
pub fn multilevel_drift(y: &ConePoint, theta: Theta) -> Result<Vec<Vec<f64>>> {
    if !y.in_open_cone() {
        return Err(Error::InvalidPoint(format!(
            "{:?} is on the boundary of the cone",
            y.levels()
        )));
    }
    let mut out: Vec<Vec<f64>> = y.levels().iter().map(|l| vec![0.0; l.len()]).collect();
    multilevel_drift_into(y.levels(), theta.value(), &mut out);
    Ok(out)
}

fn multilevel_drift_into(levels: &[Vec<f64>], theta: f64, out: &mut [Vec<f64>]) {
    let c = 1.0 - theta;
    for (k, lvl) in levels.iter().enumerate() {
        for (i, &yi) in lvl.iter().enumerate() {
            let mut s = 0.0;
            if c != 0.0 {
                for (m, &ym) in lvl.iter().enumerate() {
                    if m != i {
                        s += 1.0 / (yi - ym);
                    }
                }
                if k > 0 {
                    for &ym in &levels[k - 1] {
                        s -= 1.0 / (yi - ym);
                    }
                }
            }
            out[k][i] = c * s;
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum SdeInitial {
    Point(WeylPoint),
    Cone(ConePoint),
    /// All particles at the origin; the first step of length min(dt, t_end) is
    /// an exact draw from the time-dt law (Hermite or corners, variance dt).
    Zero,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SdeConfig {
    pub n: usize,
    pub theta: Theta,
    pub t_end: f64,
    pub dt: f64,
    pub seed: u64,
    pub delta_stop: f64,
    pub initial: SdeInitial,
    /// Times at which the state is recorded (the final time always is).
    pub snapshot_times: Vec<f64>,
}

impl SdeConfig {
    pub fn new(n: usize, theta: Theta, t_end: f64, dt: f64, seed: u64) -> Self {
        Self {
            n,
            theta,
            t_end,
            dt,
            seed,
            delta_stop: DEFAULT_DELTA,
            initial: SdeInitial::Zero,
            snapshot_times: Vec::new(),
        }
    }

    pub fn with_initial(mut self, initial: SdeInitial) -> Self {
        self.initial = initial;
        self
    }

    pub fn with_snapshots(mut self, mut times: Vec<f64>) -> Self {
        times.sort_by(f64::total_cmp);
        self.snapshot_times = times;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::OutOfRange("SDE needs N ≥ 1".into()));
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return Err(Error::OutOfRange(format!(
                "t_end = {} must be ≥ 0",
                self.t_end
            )));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::OutOfRange(format!(
                "dt = {} must be positive",
                self.dt
            )));
        }
        if !(self.delta_stop >= 0.0) {
            return Err(Error::OutOfRange(format!(
                "δ = {} must be ≥ 0",
                self.delta_stop
            )));
        }
        if let Some(t) = self
            .snapshot_times
            .iter()
            .find(|&&t| !(0.0..=self.t_end).contains(&t))
        {
            return Err(Error::OutOfRange(format!(
                "snapshot time {t} outside [0, {}]",
                self.t_end
            )));
        }
        Ok(())
    }
}

/// δ-proximity monitors. For the multilevel SDE, `hat_tau_delta` is the first
/// time two particles on the same or adjacent levels are within δ and
/// `tau_delta` the first time one particle has two adjacent-level particles
/// within δ. For Dyson motion (one level) they refer to two, resp. three,
/// consecutive particles within δ, and for a Bessel path `hat_tau_delta` is
/// the first time R ≤ δ. `min_gap_seen` is the smallest monitored distance.
/// `exits` counts accepted states that an independent membership check
/// places outside the open chamber (or cone); it should stay 0.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StoppingRecord {
    pub tau_delta: Option<f64>,
    pub hat_tau_delta: Option<f64>,
    pub min_gap_seen: f64,
    pub exits: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SdePath {
    /// (time, levels) at each snapshot time, then at t_end.
    pub snapshots: Vec<(f64, Vec<Vec<f64>>)>,
    pub final_state: Vec<Vec<f64>>,
    pub stopping: StoppingRecord,
    /// Accepted (sub)steps, how many of them were drift-implicit, and the
    /// number of halvings performed.
    pub steps: u64,
    pub implicit_steps: u64,
    pub refinements: u64,
    pub flags: Vec<String>,
}

#[derive(Clone, Copy, Debug)]
enum Model {
    Dyson { beta: f64 },
    Multi { theta: f64 },
    Bessel { dim: f64 },
}

const NEWTON_MAX_ITER: usize = 200;
/// Largest typical explicit move (noise or drift) as a fraction of the
/// particle's nearest gap.
const GUARD: f64 = 0.1;
/// Rejections in a row after which the implicit step is tried at any h.
const IMPLICIT_LATE: u32 = 30;

/// Particle system stored flat, level after level. Every model's drift is a
/// sum of pair terms c/(x_i − x_j), which is what the implicit solver uses.
struct System {
    shape: Vec<usize>,
    x: Vec<f64>,
    proposal: Vec<f64>,
    drift: Vec<f64>,
    gaps: Vec<f64>,
    /// (i, j, c): drift_i += c/(x_i − x_j); j = None is a wall at 0.
    interactions: Vec<(usize, Option<usize>, f64)>,
    /// (lo, hi): x_lo < x_hi is required; hi = None means x_lo > 0.
    constraints: Vec<(usize, Option<usize>)>,
}

fn constraint_gap(x: &[f64], (lo, hi): (usize, Option<usize>)) -> f64 {
    match hi {
        Some(h) => x[h] - x[lo],
        None => x[lo],
    }
}

impl System {
    fn new(model: Model, levels: &[Vec<f64>]) -> Self {
        let shape: Vec<usize> = levels.iter().map(Vec::len).collect();
        let x: Vec<f64> = levels.iter().flatten().copied().collect();
        let offsets: Vec<usize> = shape
            .iter()
            .scan(0, |acc, &len| {
                let o = *acc;
                *acc += len;
                Some(o)
            })
            .collect();
        let mut interactions = Vec::new();
        let mut constraints = Vec::new();
        match model {
            Model::Dyson { beta } => {
                let n = x.len();
                for i in 0..n {
                    for j in (0..n).filter(|&j| j != i) {
                        interactions.push((i, Some(j), 0.5 * beta));
                    }
                }
                constraints.extend((1..n).map(|i| (i - 1, Some(i))));
            }
            Model::Multi { theta } => {
                let c = 1.0 - theta;
                for (k, &len) in shape.iter().enumerate() {
                    let o = offsets[k];
                    constraints.extend((1..len).map(|i| (o + i - 1, Some(o + i))));
                    if c != 0.0 {
                        for i in 0..len {
                            for m in (0..len).filter(|&m| m != i) {
                                interactions.push((o + i, Some(o + m), c));
                            }
                        }
                    }
                    if k > 0 {
                        let lo = offsets[k - 1];
                        for m in 0..shape[k - 1] {
                            constraints.push((o + m, Some(lo + m)));
                            constraints.push((lo + m, Some(o + m + 1)));
                        }
                        if c != 0.0 {
                            for i in 0..len {
                                for m in 0..shape[k - 1] {
                                    interactions.push((o + i, Some(lo + m), -c));
                                }
                            }
                        }
                    }
                }
            }
            Model::Bessel { dim } => {
                interactions.push((0, None, 0.5 * (dim - 1.0)));
                constraints.push((0, None));
            }
        }
        let n = x.len();
        Self {
            shape,
            proposal: vec![0.0; n],
            drift: vec![0.0; n],
            gaps: vec![0.0; n],
            x,
            interactions,
            constraints,
        }
    }

    fn levels(&self) -> Vec<Vec<f64>> {
        let mut rest = &self.x[..];
        self.shape
            .iter()
            .map(|&len| {
                let (head, tail) = rest.split_at(len);
                rest = tail;
                head.to_vec()
            })
            .collect()
    }

    fn drift_at(&self, x: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for &(i, j, c) in &self.interactions {
            out[i] += c / (x[i] - j.map_or(0.0, |j| x[j]));
        }
    }

    fn admissible(&self, x: &[f64]) -> bool {
        self.constraints.iter().all(|&p| constraint_gap(x, p) > 0.0)
    }

    /// Evaluates drift and gaps at the current state and returns the longest
    /// step over which noise and drift each move every particle by at most
    /// GUARD times its nearest gap. Depends on the state only, so the grid
    /// never looks at the increment it is about to use.
    fn step_bound(&mut self) -> f64 {
        let mut drift = std::mem::take(&mut self.drift);
        self.drift_at(&self.x, &mut drift);
        self.drift = drift;
        self.gaps.iter_mut().for_each(|g| *g = f64::INFINITY);
        for &(lo, hi) in &self.constraints {
            let g = constraint_gap(&self.x, (lo, hi));
            self.gaps[lo] = self.gaps[lo].min(g);
            if let Some(hi) = hi {
                self.gaps[hi] = self.gaps[hi].min(g);
            }
        }
        self.gaps
            .iter()
            .zip(&self.drift)
            .map(|(&g, &b)| (GUARD * g).powi(2).min(GUARD * g / b.abs()))
            .fold(f64::INFINITY, f64::min)
    }

    /// Explicit step x + b(x) h + dW using the drift from the last
    /// `step_bound`; refused if the state leaves the admissible set or a
    /// constrained pair closes by more than half.
    fn try_explicit(&mut self, h: f64, dw: &[f64]) -> bool {
        for (i, p) in self.proposal.iter_mut().enumerate() {
            *p = self.x[i] + self.drift[i] * h + dw[i];
        }
        let closes_gently = self
            .constraints
            .iter()
            .all(|&p| constraint_gap(&self.proposal, p) >= 0.5 * constraint_gap(&self.x, p));
        if !closes_gently || !self.admissible(&self.proposal) {
            return false;
        }
        std::mem::swap(&mut self.x, &mut self.proposal);
        true
    }

    /// Drift-implicit step y = x + b(y) h + dW by damped Newton inside the
    /// admissible set. Repulsive pair terms make the solution exist in the
    /// open chamber/cone even when x + dW has left it.
    fn try_implicit(&mut self, h: f64, dw: &[f64]) -> bool {
        let n = self.x.len();
        let base: Vec<f64> = self.x.iter().zip(dw).map(|(x, w)| x + w).collect();
        let mut y = self.x.clone();
        let mut b = vec![0.0; n];
        let residual = |sys: &Self, y: &[f64], b: &mut [f64]| -> (Vec<f64>, f64) {
            sys.drift_at(y, b);
            let f: Vec<f64> = (0..n).map(|i| y[i] - base[i] - h * b[i]).collect();
            let norm = f.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            (f, norm)
        };
        let (mut f, mut norm) = residual(self, &y, &mut b);
        for _ in 0..NEWTON_MAX_ITER {
            let scale = 1.0 + y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if norm <= 1e-13 * scale {
                self.x = y;
                return true;
            }
            let mut jac = nalgebra::DMatrix::<f64>::identity(n, n);
            for &(i, j, c) in &self.interactions {
                let d = y[i] - j.map_or(0.0, |j| y[j]);
                let g = h * c / (d * d);
                jac[(i, i)] += g;
                if let Some(j) = j {
                    jac[(i, j)] -= g;
                }
            }
            let Some(step) = jac.lu().solve(&nalgebra::DVector::from_column_slice(&f)) else {
                return false;
            };
            let mut alpha = 1.0;
            loop {
                let cand: Vec<f64> = (0..n).map(|i| y[i] - alpha * step[i]).collect();
                if self.admissible(&cand) {
                    let (fc, nc) = residual(self, &cand, &mut b);
                    if nc < norm {
                        (y, f, norm) = (cand, fc, nc);
                        break;
                    }
                }
                alpha *= 0.5;
                if alpha < 1e-30 {
                    return false;
                }
            }
        }
        false
    }
}

struct Monitor {
    delta: f64,
    model: Model,
    record: StoppingRecord,
}

impl Monitor {
    fn new(delta: f64, model: Model) -> Self {
        Self {
            delta,
            model,
            record: StoppingRecord {
                tau_delta: None,
                hat_tau_delta: None,
                min_gap_seen: f64::INFINITY,
                exits: 0,
            },
        }
    }

    fn observe(&mut self, t: f64, x: &[f64], shape: &[usize]) {
        let d = self.delta;
        let (mut min_pair, mut triple) = (f64::INFINITY, false);
        let inside = match self.model {
            Model::Bessel { .. } => x[0] > 0.0,
            Model::Dyson { .. } => x.windows(2).all(|w| w[0] < w[1]),
            Model::Multi { .. } => {
                let mut rest = x;
                let levels: Vec<Vec<f64>> = shape
                    .iter()
                    .map(|&l| {
                        let (head, tail) = rest.split_at(l);
                        rest = tail;
                        head.to_vec()
                    })
                    .collect();
                levels_in_open_cone(&levels)
            }
        };
        self.record.exits += u64::from(!inside);
        if let Model::Bessel { .. } = self.model {
            min_pair = x[0];
        } else if let Model::Multi { .. } = self.model {
            let mut off = 0;
            let offsets: Vec<usize> = shape
                .iter()
                .map(|&l| {
                    off += l;
                    off - l
                })
                .collect();
            let level = |k: usize| &x[offsets[k]..offsets[k] + shape[k]];
            for k in 0..shape.len() {
                for w in level(k).windows(2) {
                    min_pair = min_pair.min(w[1] - w[0]);
                }
                for &y in level(k) {
                    let mut close = 0;
                    for kk in [k.wrapping_sub(1), k + 1] {
                        if kk < shape.len() {
                            for &z in level(kk) {
                                let g = (y - z).abs();
                                min_pair = min_pair.min(g);
                                if g <= d {
                                    close += 1;
                                }
                            }
                        }
                    }
                    triple |= close >= 2;
                }
            }
        } else {
            for w in x.windows(2) {
                min_pair = min_pair.min(w[1] - w[0]);
            }
            triple = x.windows(3).any(|w| w[2] - w[0] <= d);
        }
        let r = &mut self.record;
        r.min_gap_seen = r.min_gap_seen.min(min_pair);
        if min_pair <= d && r.hat_tau_delta.is_none() {
            r.hat_tau_delta = Some(t);
        }
        if triple && r.tau_delta.is_none() {
            r.tau_delta = Some(t);
        }
    }
}

struct Integrator<'a> {
    sys: System,
    /// Steps this short are taken drift-implicitly; the explicit bound only
    /// gets there for gaps well below the stopping distance.
    implicit_below: f64,
    rng: &'a mut PathRng,
    monitor: Monitor,
    steps: u64,
    implicit_steps: u64,
    refinements: u64,
}

impl Integrator<'_> {
    fn gaussian(&mut self, scale: f64) -> Vec<f64> {
        (0..self.sys.x.len())
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut *self.rng);
                scale * z
            })
            .collect()
    }

    /// Advances by h with Brownian increment dw. Segments longer than the
    /// state's step bound are split at a Brownian-bridge midpoint and the
    /// halves processed in order, so the driving path is the same whatever
    /// the refinement. Below `implicit_below` (pairs closer than the
    /// resolution floor) steps are drift-implicit. A refused step is split as
    /// well; MAX_HALVINGS refusals in a row are an underflow.
    fn advance(&mut self, t: f64, h: f64, dw: Vec<f64>) -> Result<()> {
        let mut pending = vec![(h, dw)];
        let (mut now, mut rejections) = (t, 0u32);
        while let Some((h, dw)) = pending.pop() {
            let bound = self.sys.step_bound();
            let floor = h <= self.implicit_below;
            let attempted = h <= bound || floor;
            let accepted = attempted && {
                let explicit = h <= bound && self.sys.try_explicit(h, &dw);
                explicit
                    || (floor || rejections >= IMPLICIT_LATE) && {
                        let ok = self.sys.try_implicit(h, &dw);
                        self.implicit_steps += u64::from(ok);
                        ok
                    }
            };
            if accepted {
                self.steps += 1;
                now += h;
                rejections = 0;
                self.monitor.observe(now, &self.sys.x, &self.sys.shape);
                continue;
            }
            if attempted {
                rejections += 1;
                if rejections > MAX_HALVINGS {
                    return Err(Error::StepUnderflow {
                        time: now,
                        state: self.sys.x.clone(),
                    });
                }
            }
            self.refinements += 1;
            let noise = self.gaussian((0.25 * h).sqrt());
            let first: Vec<f64> = dw.iter().zip(&noise).map(|(w, e)| 0.5 * w + e).collect();
            let second: Vec<f64> = dw.iter().zip(&first).map(|(w, f)| w - f).collect();
            pending.push((0.5 * h, second));
            pending.push((0.5 * h, first));
        }
        Ok(())
    }
}

/// Integrates from `t0` with state `levels` to `t_end`, recording the
/// requested times on the way.
fn integrate_system(
    model: Model,
    levels: Vec<Vec<f64>>,
    t0: f64,
    cfg: &SdeConfig,
    rng: &mut PathRng,
    flags: Vec<String>,
) -> Result<SdePath> {
    let mut snapshots = Vec::new();
    let mut pending = cfg.snapshot_times.iter().copied().peekable();
    while let Some(&ts) = pending.peek() {
        if ts > t0 {
            break;
        }
        // times before a warm start see the origin
        let origin = if ts < t0 {
            levels.iter().map(|l| vec![0.0; l.len()]).collect()
        } else {
            levels.clone()
        };
        snapshots.push((ts, origin));
        pending.next();
    }
    // pairs closer than a quarter of δ are stepped implicitly
    let resolution = GUARD * cfg.delta_stop.max(1e-6) / 4.0;
    let mut it = Integrator {
        sys: System::new(model, &levels),
        implicit_below: resolution * resolution,
        rng,
        monitor: Monitor::new(cfg.delta_stop, model),
        steps: 0,
        implicit_steps: 0,
        refinements: 0,
    };
    it.monitor.observe(t0, &it.sys.x, &it.sys.shape);
    let mut t = t0;
    while t < cfg.t_end {
        let mut target = (t + cfg.dt).min(cfg.t_end);
        if let Some(&ts) = pending.peek() {
            target = target.min(ts);
        }
        let h = target - t;
        if h > 0.0 {
            let dw = it.gaussian(h.sqrt());
            it.advance(t, h, dw)?;
        }
        t = target;
        while let Some(&ts) = pending.peek() {
            if ts > t {
                break;
            }
            snapshots.push((ts, it.sys.levels()));
            pending.next();
        }
    }
    let final_state = it.sys.levels();
    snapshots.push((cfg.t_end, final_state.clone()));
    Ok(SdePath {
        snapshots,
        final_state,
        stopping: it.monitor.record,
        steps: it.steps,
        implicit_steps: it.implicit_steps,
        refinements: it.refinements,
        flags,
    })
}

const WARM_STREAM: u64 = 0x5741_524D;

/// β-Dyson Brownian motion with β = 2θ. A zero start requires β ≥ 1; the
/// warm-start draw uses the MCMC Hermite sampler.
pub fn integrate_dyson(cfg: &SdeConfig) -> Result<SdePath> {
    let warm = match cfg.initial {
        SdeInitial::Zero => Some(dyson_warm_starts(cfg, 1)?.remove(0)),
        _ => None,
    };
    integrate_dyson_from(cfg, warm)
}

fn warm_time(cfg: &SdeConfig) -> f64 {
    cfg.dt.min(cfg.t_end)
}

fn dyson_warm_starts(cfg: &SdeConfig, paths: usize) -> Result<Vec<Vec<f64>>> {
    if cfg.t_end == 0.0 {
        return Ok(vec![vec![0.0; cfg.n]; paths]);
    }
    let p = EnsembleParams::new(cfg.n, cfg.theta, warm_time(cfg))?;
    Ok(
        sample_hermite(&p, paths, derive_seed(cfg.seed, WARM_STREAM))?
            .points
            .into_iter()
            .map(WeylPoint::into_inner)
            .collect(),
    )
}

fn integrate_dyson_from(cfg: &SdeConfig, warm: Option<Vec<f64>>) -> Result<SdePath> {
    cfg.validate()?;
    let beta = cfg.theta.beta();
    let (start, t0) = match (&cfg.initial, warm) {
        (SdeInitial::Point(w), _) => {
            if w.len() != cfg.n || (w.len() > 1 && !(w.min_gap() > 0.0)) {
                return Err(Error::InvalidPoint(format!(
                    "Dyson start {:?} must hold {} strictly ordered points",
                    w.coords(),
                    cfg.n
                )));
            }
            (w.coords().to_vec(), 0.0)
        }
        (SdeInitial::Zero, Some(x)) => {
            if beta < 1.0 {
                return Err(Error::OutOfRange(format!(
                    "zero start needs β ≥ 1, got β = {beta}"
                )));
            }
            (
                x,
                if cfg.t_end == 0.0 {
                    0.0
                } else {
                    warm_time(cfg)
                },
            )
        }
        (SdeInitial::Zero, None) => unreachable!("warm start drawn by the caller"),
        (SdeInitial::Cone(_), _) => {
            return Err(Error::InvalidPoint(
                "Dyson motion starts from a Weyl point".into(),
            ))
        }
    };
    let mut rng = rng_from_seed(cfg.seed);
    integrate_system(
        Model::Dyson { beta },
        vec![start],
        t0,
        cfg,
        &mut rng,
        Vec::new(),
    )
}

fn multilevel_flags(theta: f64) -> Result<Vec<String>> {
    if theta <= 1.0 {
        return Err(Error::OutOfRange(format!(
            "multilevel SDE needs θ > 1 (got {theta}); for θ ≤ 1 it is not the right object"
        )));
    }
    Ok(if theta < 2.0 {
        vec!["no collision guarantee: adjacent-level particles may meet for 1 < θ < 2".into()]
    } else {
        Vec::new()
    })
}

fn corners_warm_starts(cfg: &SdeConfig, paths: usize) -> Result<Vec<Vec<Vec<f64>>>> {
    if cfg.t_end == 0.0 {
        return Ok(vec![ConePoint::zeros(cfg.n).into_levels(); paths]);
    }
    let p = EnsembleParams::new(cfg.n, cfg.theta, warm_time(cfg))?;
    Ok(
        sample_corners(&p, paths, derive_seed(cfg.seed, WARM_STREAM))?
            .points
            .into_iter()
            .map(ConePoint::into_levels)
            .collect(),
    )
}

/// The multilevel SDE on the Gelfand–Tsetlin cone. Refuses θ ≤ 1 and flags
/// 1 < θ < 2.
pub fn integrate_multilevel(cfg: &SdeConfig) -> Result<SdePath> {
    multilevel_flags(cfg.theta.value())?;
    let warm = match cfg.initial {
        SdeInitial::Zero => Some(corners_warm_starts(cfg, 1)?.remove(0)),
        _ => None,
    };
    integrate_multilevel_from(cfg, warm)
}

fn integrate_multilevel_from(cfg: &SdeConfig, warm: Option<Vec<Vec<f64>>>) -> Result<SdePath> {
    cfg.validate()?;
    let flags = multilevel_flags(cfg.theta.value())?;
    let (start, t0) = match (&cfg.initial, warm) {
        (SdeInitial::Cone(c), _) => {
            if c.depth() != cfg.n || !c.in_open_cone() {
                return Err(Error::InvalidPoint(format!(
                    "multilevel start must be an interior {}-level cone point",
                    cfg.n
                )));
            }
            (c.levels().to_vec(), 0.0)
        }
        (SdeInitial::Zero, Some(x)) => (
            x,
            if cfg.t_end == 0.0 {
                0.0
            } else {
                warm_time(cfg)
            },
        ),
        (SdeInitial::Zero, None) => unreachable!("warm start drawn by the caller"),
        (SdeInitial::Point(_), _) => {
            return Err(Error::InvalidPoint(
                "multilevel SDE starts from a cone point".into(),
            ))
        }
    };
    let mut rng = rng_from_seed(cfg.seed);
    integrate_system(
        Model::Multi {
            theta: cfg.theta.value(),
        },
        start,
        t0,
        cfg,
        &mut rng,
        flags,
    )
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum SdeKind {
    Dyson,
    Multilevel,
}

/// Runs `paths` independent paths; path `i` uses seed `derive_seed(cfg.seed, i)`.
/// Zero starts draw all warm-start points from one sampler run seeded by
/// `cfg.seed`, so results do not depend on `workers` (0 = current pool).
pub fn integrate_batch(
    cfg: &SdeConfig,
    kind: SdeKind,
    paths: usize,
    workers: usize,
) -> Result<Vec<SdePath>> {
    if paths == 0 {
        return Err(Error::OutOfRange("batch needs at least one path".into()));
    }
    cfg.validate()?;
    if kind == SdeKind::Multilevel {
        multilevel_flags(cfg.theta.value())?;
    }
    let zero = matches!(cfg.initial, SdeInitial::Zero);
    let warm_dyson = if zero && kind == SdeKind::Dyson {
        Some(dyson_warm_starts(cfg, paths)?)
    } else {
        None
    };
    let warm_multi = if zero && kind == SdeKind::Multilevel {
        Some(corners_warm_starts(cfg, paths)?)
    } else {
        None
    };
    let job = || {
        (0..paths)
            .into_par_iter()
            .map(|i| {
                let mut c = cfg.clone();
                c.seed = derive_seed(cfg.seed, i as u64);
                match kind {
                    SdeKind::Dyson => {
                        integrate_dyson_from(&c, warm_dyson.as_ref().map(|w| w[i].clone()))
                    }
                    SdeKind::Multilevel => {
                        integrate_multilevel_from(&c, warm_multi.as_ref().map(|w| w[i].clone()))
                    }
                }
            })
            .collect::<Result<Vec<_>>>()
    };
    if workers == 0 {
        job()
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| Error::OutOfRange(format!("cannot build worker pool: {e}")))?
            .install(job)
    }
}

/// Final states of independent Dyson paths started at `points` (one path per
/// point, seed `derive_seed(seed, i)`), run for time `t_end`.
pub fn dyson_from_points(
    points: &[Vec<f64>],
    theta: Theta,
    t_end: f64,
    dt: f64,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    points
        .par_iter()
        .enumerate()
        .map(|(i, x)| {
            let cfg = SdeConfig::new(x.len(), theta, t_end, dt, derive_seed(seed, i as u64))
                .with_initial(SdeInitial::Point(WeylPoint::new(x.clone())?));
            Ok(integrate_dyson(&cfg)?.final_state.remove(0))
        })
        .collect()
}

/// Bessel process dR = (dim − 1)/(2R) dt + dW through the same stepping
/// kernel, with the δ-monitor watching R and snapshots at `snapshot_times`.
/// For 1 < dim < 2 the process reaches 0 and refinement may underflow.
pub fn bessel_path(
    dim: f64,
    x0: f64,
    t: f64,
    dt: f64,
    delta: f64,
    snapshot_times: Vec<f64>,
    seed: u64,
) -> Result<SdePath> {
    if !(dim > 1.0) || !(x0 > 0.0) {
        return Err(Error::OutOfRange(format!(
            "Bessel path needs dim > 1 and x0 > 0 (dim={dim}, x0={x0})"
        )));
    }
    let mut cfg = SdeConfig::new(1, Theta::new(1.0)?, t, dt, seed).with_snapshots(snapshot_times);
    cfg.delta_stop = delta;
    cfg.validate()?;
    let mut rng = rng_from_seed(seed);
    integrate_system(
        Model::Bessel { dim },
        vec![vec![x0]],
        0.0,
        &cfg,
        &mut rng,
        Vec::new(),
    )
}

/// R on the grid 0, dt, 2dt, …, t (the last interval may be shorter).
pub fn bessel_step_reference(dim: f64, x0: f64, t: f64, dt: f64, seed: u64) -> Result<Vec<f64>> {
    if !(dt > 0.0) || !(t >= 0.0) {
        return Err(Error::OutOfRange(format!(
            "Bessel reference needs dt > 0 and t ≥ 0 (dt={dt}, t={t})"
        )));
    }
    let n_steps = (t / dt).ceil() as usize;
    let grid: Vec<f64> = (0..n_steps).map(|k| k as f64 * dt).collect();
    let path = bessel_path(dim, x0, t, dt, 0.0, grid, seed)?;
    Ok(path.snapshots.iter().map(|(_, l)| l[0][0]).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn th(v: f64) -> Theta {
        Theta::new(v).unwrap()
    }

    #[test]
    fn dyson_drift_examples() {
        assert_eq!(
            dyson_drift(&WeylPoint::new(vec![0.3]).unwrap(), 2.0).unwrap(),
            vec![0.0]
        );
        let b = dyson_drift(&WeylPoint::new(vec![-0.5, 0.5]).unwrap(), 3.0).unwrap();
        assert!((b[0] + 3.0 / 2.0).abs() < 1e-15 && (b[1] - 1.5).abs() < 1e-15);
        let b = dyson_drift(&WeylPoint::new(vec![-1.0, 0.0, 1.0]).unwrap(), 2.0).unwrap();
        assert_eq!(b, vec![-1.5, 0.0, 1.5]);
        assert!(dyson_drift(&WeylPoint::new(vec![0.0, 0.0]).unwrap(), 2.0).is_err());
    }

    #[test]
    fn multilevel_drift_examples() {
        let a = 0.8;
        let y = ConePoint::new(vec![vec![0.0], vec![-a, a]]).unwrap();
        for t in [1.0, 2.0, 3.5] {
            let d = multilevel_drift(&y, th(t)).unwrap();
            assert_eq!(d[0], vec![0.0]);
            assert!((d[1][0] - (1.0 - t) / (2.0 * a)).abs() < 1e-14);
        }
        let y = ConePoint::new(vec![vec![0.1], vec![-1.0, 2.0], vec![-2.0, 0.5, 3.0]]).unwrap();
        assert!(multilevel_drift(&y, th(1.0))
            .unwrap()
            .iter()
            .flatten()
            .all(|&v| v == 0.0));
        let edge = ConePoint::new(vec![vec![-1.0], vec![-1.0, 1.0]]).unwrap();
        assert!(multilevel_drift(&edge, th(2.0)).is_err());
    }

    #[test]
    fn zero_horizon_returns_initial() {
        let w = WeylPoint::new(vec![-1.0, 0.5]).unwrap();
        let cfg =
            SdeConfig::new(2, th(1.0), 0.0, 0.01, 3).with_initial(SdeInitial::Point(w.clone()));
        assert_eq!(
            integrate_dyson(&cfg).unwrap().final_state,
            vec![w.into_inner()]
        );
        let z = SdeConfig::new(3, th(1.0), 0.0, 0.01, 3);
        assert_eq!(integrate_dyson(&z).unwrap().final_state, vec![vec![0.0; 3]]);
        assert_eq!(
            bessel_step_reference(3.0, 1.5, 0.0, 0.1, 1).unwrap(),
            vec![1.5]
        );
    }

    #[test]
    fn multilevel_refuses_small_theta() {
        let c = ConePoint::new(vec![vec![0.0], vec![-1.0, 1.0]]).unwrap();
        let cfg =
            SdeConfig::new(2, th(1.0), 0.1, 0.01, 3).with_initial(SdeInitial::Cone(c.clone()));
        assert!(integrate_multilevel(&cfg).is_err());
        let cfg = SdeConfig::new(2, th(1.5), 0.1, 0.01, 3).with_initial(SdeInitial::Cone(c));
        assert_eq!(integrate_multilevel(&cfg).unwrap().flags.len(), 1);
    }

    #[test]
    fn snapshots_land_on_requested_times() {
        let w = WeylPoint::new(vec![-1.0, 0.0, 1.0]).unwrap();
        let cfg = SdeConfig::new(3, th(2.0), 1.0, 0.03, 5)
            .with_initial(SdeInitial::Point(w))
            .with_snapshots(vec![0.0, 0.25, 0.5]);
        let p = integrate_dyson(&cfg).unwrap();
        let times: Vec<f64> = p.snapshots.iter().map(|s| s.0).collect();
        assert_eq!(times, vec![0.0, 0.25, 0.5, 1.0]);
    }
}
