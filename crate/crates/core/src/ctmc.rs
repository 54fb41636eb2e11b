//! Exact event-driven simulation of the single-level chain on Young diagrams
//! and of the multilevel chain on interlacing arrays with block/push
//! interactions.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::combinatorics::{
    predecessors, rescale_array, rescale_level, ConePoint, InterlacingArray, Partition,
    ScalingParams, WeylPoint,
};
use crate::error::{Error, Result};
use crate::jack::{jack_principal, multilevel_rates_into, psi, single_level_rates_into, Theta};
use crate::rng::{derive_seed, rng_from_seed, PathRng};

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum ChainState {
    Single(Partition),
    Multi(InterlacingArray),
}

impl ChainState {
    /// Total number of boxes on the top level.
    pub fn top_size(&self) -> u64 {
        match self {
            ChainState::Single(l) => l.size(),
            ChainState::Multi(a) => a.top().size(),
        }
    }

    pub fn top(&self) -> &Partition {
        match self {
            ChainState::Single(l) => l,
            ChainState::Multi(a) => a.top(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum Record {
    /// Keep every event.
    Events,
    /// Keep only the states at these chain times (sorted on construction).
    Snapshots(Vec<f64>),
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ChainConfig {
    pub n: usize,
    pub theta: Theta,
    pub horizon_s: f64,
    pub seed: u64,
    pub initial: ChainState,
    pub record: Record,
}

impl ChainConfig {
    /// Single-level chain from the empty diagram, logging every event.
    pub fn single(n: usize, theta: Theta, horizon_s: f64, seed: u64) -> Self {
        Self {
            n,
            theta,
            horizon_s,
            seed,
            initial: ChainState::Single(Partition::empty()),
            record: Record::Events,
        }
    }

    /// Multilevel chain from the empty array, logging every event.
    pub fn multi(n: usize, theta: Theta, horizon_s: f64, seed: u64) -> Self {
        Self {
            n,
            theta,
            horizon_s,
            seed,
            initial: ChainState::Multi(InterlacingArray::empty(n)),
            record: Record::Events,
        }
    }

    pub fn with_snapshots(mut self, mut times: Vec<f64>) -> Self {
        times.sort_by(f64::total_cmp);
        self.record = Record::Snapshots(times);
        self
    }

    pub fn with_initial(mut self, initial: ChainState) -> Self {
        self.initial = initial;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::OutOfRange("chain needs N ≥ 1".into()));
        }
        if !(self.horizon_s >= 0.0 && self.horizon_s.is_finite()) {
            return Err(Error::OutOfRange(format!(
                "horizon must be finite and nonnegative, got {}",
                self.horizon_s
            )));
        }
        match &self.initial {
            ChainState::Single(l) if l.length() > self.n => Err(Error::TooManyRows {
                diagram: l.to_string(),
                level: self.n,
            }),
            ChainState::Multi(a) if a.depth() != self.n => Err(Error::Interlacing(format!(
                "initial array has {} levels, expected {}",
                a.depth(),
                self.n
            ))),
            _ => Ok(()),
        }?;
        if let Record::Snapshots(ts) = &self.record {
            if let Some(t) = ts.iter().find(|&&t| !(0.0..=self.horizon_s).contains(&t)) {
                return Err(Error::OutOfRange(format!(
                    "snapshot time {t} outside [0, {}]",
                    self.horizon_s
                )));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EventRecord {
    pub time: f64,
    /// Level k (1 for the single-level chain).
    pub level: usize,
    pub row: usize,
    pub pushed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Trajectory {
    pub config: ChainConfig,
    pub events: Vec<EventRecord>,
    /// States at the requested snapshot times, in time order.
    pub snapshots: Vec<(f64, ChainState)>,
    pub final_state: ChainState,
    pub n_events: u64,
}

struct Recorder {
    log_events: bool,
    events: Vec<EventRecord>,
    pending: Vec<f64>,
    next: usize,
    snapshots: Vec<(f64, ChainState)>,
}

impl Recorder {
    fn new(record: &Record) -> Self {
        let (log_events, pending) = match record {
            Record::Events => (true, Vec::new()),
            Record::Snapshots(ts) => (false, ts.clone()),
        };
        Self {
            log_events,
            events: Vec::new(),
            pending,
            next: 0,
            snapshots: Vec::new(),
        }
    }

    /// Records every snapshot time strictly before `time`, using `state`.
    fn advance<F: Fn() -> ChainState>(&mut self, time: f64, state: F) {
        while self.next < self.pending.len() && self.pending[self.next] < time {
            self.snapshots.push((self.pending[self.next], state()));
            self.next += 1;
        }
    }
}

fn rows_to_partition(rows: &[u32]) -> Partition {
    Partition::new(rows.to_vec()).expect("chain rows stay nonincreasing")
}

fn levels_to_array(levels: &[Vec<u32>]) -> InterlacingArray {
    InterlacingArray::new(levels.iter().map(|r| rows_to_partition(r)).collect())
        .expect("chain preserves interlacing")
}

fn exp_wait(rng: &mut PathRng, rate: f64) -> f64 {
    let u: f64 = rng.random();
    -(1.0 - u).ln() / rate
}

/// Gillespie simulation of the single-level chain on diagrams with ≤ N rows.
pub fn run_single(cfg: &ChainConfig) -> Result<Trajectory> {
    cfg.validate()?;
    let ChainState::Single(init) = &cfg.initial else {
        return Err(Error::OutOfRange(
            "run_single needs a partition as initial state".into(),
        ));
    };
    let th = cfg.theta.value();
    let mut rng = rng_from_seed(cfg.seed);
    let mut rows = init.padded(cfg.n);
    let mut rates = vec![0.0; cfg.n];
    let mut rec = Recorder::new(&cfg.record);
    let mut time = 0.0;
    let mut n_events = 0u64;
    loop {
        single_level_rates_into(&rows, th, &mut rates);
        let total: f64 = rates.iter().sum();
        let next = time + exp_wait(&mut rng, total);
        rec.advance(next, || ChainState::Single(rows_to_partition(&rows)));
        if next > cfg.horizon_s {
            break;
        }
        time = next;
        let mut u = rng.random::<f64>() * total;
        let mut row = cfg.n;
        for (i, &r) in rates.iter().enumerate() {
            if u < r {
                row = i + 1;
                break;
            }
            u -= r;
        }
        // guard against rounding in the cumulative scan
        while rates[row - 1] == 0.0 {
            row -= 1;
        }
        rows[row - 1] += 1;
        n_events += 1;
        if rec.log_events {
            rec.events.push(EventRecord {
                time,
                level: 1,
                row,
                pushed: false,
            });
        }
    }
    let final_state = ChainState::Single(rows_to_partition(&rows));
    rec.advance(f64::INFINITY, || final_state.clone());
    Ok(Trajectory {
        config: cfg.clone(),
        events: rec.events,
        snapshots: rec.snapshots,
        final_state,
        n_events,
    })
}

/// Gillespie simulation of the multilevel chain. Each level-k row carries its
/// own-clock rate given level k−1; a jump that breaks interlacing with level
/// k+1 pushes the same row upward, level by level, at the same time stamp.
pub fn run_multi(cfg: &ChainConfig) -> Result<Trajectory> {
    cfg.validate()?;
    let ChainState::Multi(init) = &cfg.initial else {
        return Err(Error::OutOfRange(
            "run_multi needs an interlacing array as initial state".into(),
        ));
    };
    let th = cfg.theta.value();
    let n = cfg.n;
    let mut rng = rng_from_seed(cfg.seed);
    let mut levels: Vec<Vec<u32>> = init
        .levels()
        .iter()
        .enumerate()
        .map(|(k, l)| l.padded(k + 1))
        .collect();
    let mut rates: Vec<Vec<f64>> = (1..=n).map(|k| vec![0.0; k]).collect();
    let mut sums = vec![0.0; n];
    let refresh = |levels: &[Vec<u32>], rates: &mut [Vec<f64>], sums: &mut [f64], k: usize| {
        let lower: &[u32] = if k == 0 { &[] } else { &levels[k - 1] };
        multilevel_rates_into(&levels[k], lower, th, &mut rates[k]);
        sums[k] = rates[k].iter().sum();
    };
    for k in 0..n {
        refresh(&levels, &mut rates, &mut sums, k);
    }
    let mut rec = Recorder::new(&cfg.record);
    let mut time = 0.0;
    let mut n_events = 0u64;
    loop {
        let total: f64 = sums.iter().sum();
        let next = time + exp_wait(&mut rng, total);
        rec.advance(next, || ChainState::Multi(levels_to_array(&levels)));
        if next > cfg.horizon_s {
            break;
        }
        time = next;
        let mut u = rng.random::<f64>() * total;
        let mut k = n - 1;
        for (j, &s) in sums.iter().enumerate() {
            if u < s {
                k = j;
                break;
            }
            u -= s;
        }
        while sums[k] == 0.0 {
            k -= 1;
        }
        let mut i = k;
        for (r, &q) in rates[k].iter().enumerate() {
            if u < q {
                i = r;
                break;
            }
            u -= q;
        }
        while rates[k][i] == 0.0 {
            i -= 1;
        }
        levels[k][i] += 1;
        n_events += 1;
        if rec.log_events {
            rec.events.push(EventRecord {
                time,
                level: k + 1,
                row: i + 1,
                pushed: false,
            });
        }
        let mut top_changed = k;
        for up in k + 1..n {
            if levels[up - 1][i] > levels[up][i] {
                levels[up][i] += 1;
                top_changed = up;
                if rec.log_events {
                    rec.events.push(EventRecord {
                        time,
                        level: up + 1,
                        row: i + 1,
                        pushed: true,
                    });
                }
            } else {
                break;
            }
        }
        // changed levels and the level above the highest change
        for j in k..=(top_changed + 1).min(n - 1) {
            refresh(&levels, &mut rates, &mut sums, j);
        }
    }
    let final_state = ChainState::Multi(levels_to_array(&levels));
    rec.advance(f64::INFINITY, || final_state.clone());
    Ok(Trajectory {
        config: cfg.clone(),
        events: rec.events,
        snapshots: rec.snapshots,
        final_state,
        n_events,
    })
}

/// Runs the chain matching the type of the initial state.
pub fn run(cfg: &ChainConfig) -> Result<Trajectory> {
    match cfg.initial {
        ChainState::Single(_) => run_single(cfg),
        ChainState::Multi(_) => run_multi(cfg),
    }
}

/// Replays an event log from `initial` up to and including chain time `at_s`.
pub fn replay(initial: &ChainState, events: &[EventRecord], at_s: f64) -> ChainState {
    match initial {
        ChainState::Single(l) => {
            let mut rows = l.rows().to_vec();
            for e in events.iter().take_while(|e| e.time <= at_s) {
                if rows.len() < e.row {
                    rows.resize(e.row, 0);
                }
                rows[e.row - 1] += 1;
            }
            ChainState::Single(rows_to_partition(&rows))
        }
        ChainState::Multi(a) => {
            let mut levels: Vec<Vec<u32>> = a
                .levels()
                .iter()
                .enumerate()
                .map(|(k, l)| l.padded(k + 1))
                .collect();
            for e in events.iter().take_while(|e| e.time <= at_s) {
                levels[e.level - 1][e.row - 1] += 1;
            }
            ChainState::Multi(levels_to_array(&levels))
        }
    }
}

/// State of the trajectory at chain time `at_s`: a recorded snapshot at that
/// exact time, or a replay of the event log.
pub fn state_at(traj: &Trajectory, at_s: f64) -> Result<ChainState> {
    if at_s > traj.config.horizon_s || at_s < 0.0 {
        return Err(Error::OutOfRange(format!(
            "snapshot time {at_s} outside [0, {}]",
            traj.config.horizon_s
        )));
    }
    if let Some((_, s)) = traj.snapshots.iter().find(|(t, _)| *t == at_s) {
        return Ok(s.clone());
    }
    match traj.config.record {
        Record::Events => Ok(replay(&traj.config.initial, &traj.events, at_s)),
        Record::Snapshots(_) => Err(Error::OutOfRange(format!(
            "no snapshot recorded at s = {at_s} and the event log was not kept"
        ))),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum RescaledPoint {
    Weyl(WeylPoint),
    Cone(ConePoint),
}

impl RescaledPoint {
    /// Levels as coordinate vectors (one level for a Weyl point).
    pub fn levels(&self) -> Vec<Vec<f64>> {
        match self {
            RescaledPoint::Weyl(w) => vec![w.coords().to_vec()],
            RescaledPoint::Cone(c) => c.levels().to_vec(),
        }
    }
}

/// Applies the diffusive map to a chain state.
pub fn rescale_state(state: &ChainState, n: usize, p: &ScalingParams) -> Result<RescaledPoint> {
    Ok(match state {
        ChainState::Single(l) => RescaledPoint::Weyl(WeylPoint::new(rescale_level(l, p, n)?)?),
        ChainState::Multi(a) => RescaledPoint::Cone(rescale_array(a, p)),
    })
}

/// The state at chain time `at_s`, mapped by the diffusive scaling `p`.
pub fn snapshot_rescaled(traj: &Trajectory, p: &ScalingParams, at_s: f64) -> Result<RescaledPoint> {
    rescale_state(&state_at(traj, at_s)?, traj.config.n, p)
}

/// Runs `paths` independent copies of `cfg`; path `i` uses seed
/// `derive_seed(cfg.seed, i)`. Output order and content do not depend on
/// `workers` (0 means the current rayon pool).
pub fn batch(cfg: &ChainConfig, paths: usize, workers: usize) -> Result<Vec<Trajectory>> {
    if paths == 0 {
        return Err(Error::OutOfRange("batch needs at least one path".into()));
    }
    cfg.validate()?;
    let job = || {
        (0..paths)
            .into_par_iter()
            .map(|i| {
                let mut c = cfg.clone();
                c.seed = derive_seed(cfg.seed, i as u64);
                run(&c)
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

/// Draws λ¹ ≺ … ≺ λᴺ⁻¹ given λᴺ = `top` from the Jack–Gibbs conditional,
/// P(λᵏ⁻¹ | λᵏ) = ψ_{λᵏ/λᵏ⁻¹} J_{λᵏ⁻¹}(1^{k−1}) / J_{λᵏ}(1^k), by enumeration.
pub fn sample_jack_gibbs(
    top: &Partition,
    n: usize,
    theta: Theta,
    seed: u64,
) -> Result<InterlacingArray> {
    if top.length() > n {
        return Err(Error::TooManyRows {
            diagram: top.to_string(),
            level: n,
        });
    }
    let mut rng = rng_from_seed(seed);
    let mut levels = vec![Partition::empty(); n];
    levels[n - 1] = top.clone();
    for k in (2..=n).rev() {
        let upper = levels[k - 1].clone();
        let denom = jack_principal(&upper, k, theta);
        let cands = predecessors(&upper, k - 1);
        let weights: Vec<f64> = cands
            .iter()
            .map(|mu| (psi(&upper, mu, theta) * jack_principal(mu, k - 1, theta) / denom).value())
            .collect();
        let total: f64 = weights.iter().sum();
        let mut u = rng.random::<f64>() * total;
        let mut pick = cands.len() - 1;
        for (j, &w) in weights.iter().enumerate() {
            if u < w {
                pick = j;
                break;
            }
            u -= w;
        }
        levels[k - 2] = cands[pick].clone();
    }
    InterlacingArray::new(levels)
}
