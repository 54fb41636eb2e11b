//! The verification suites: exact identities, rate expansions, scaling
//! limits, intertwining and the SDE invariants, each reported as a list of
//! [`TestReport`]s grouped by criterion.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::combinatorics::{addable_cells, partitions, predecessors, Partition, ScalingParams};
use crate::ctmc::{
    batch, rescale_state, run_multi, run_single, sample_jack_gibbs, ChainConfig, ChainState,
};
use crate::diffusion::{integrate_batch, integrate_multilevel, SdeConfig, SdeInitial, SdeKind};
use crate::ensembles::{
    dixon_anderson_check, sample_corners, sample_hermite, theta_gibbs_link_log, EnsembleParams,
};
use crate::error::{Error, Result};
use crate::jack::{jack_measure, jack_principal, psi, single_level_rate, Theta};
use crate::rng::{derive_seed, rng_from_seed};
use crate::statcheck::{
    chi2_histogram, ks_two_sample, mean_and_se, rate_expansion_probe,
    rate_expansion_probe_multilevel, TestReport, EXPANSION_GROWTH, KS_CEILING, P_FLOOR,
};
use crate::{ConePoint, WeylPoint};

pub const DEFAULT_SEED: u64 = 0x6A61_636B;

/// Scaling parameter of the chain-to-diffusion comparisons.
pub const CHAIN_EPSILON: f64 = 2.5e-4;
/// Base step of the SDE criteria.
pub const SDE_DT: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Identities,
    Rates,
    Convergence,
    Intertwining,
    Sde,
    All,
}

impl Suite {
    pub fn criteria(self) -> &'static [u8] {
        match self {
            Suite::Identities => &[1, 2, 3, 4],
            Suite::Rates => &[5],
            Suite::Convergence => &[6, 7, 11],
            Suite::Intertwining => &[10],
            Suite::Sde => &[8, 9],
            Suite::All => &[1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11],
        }
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "identities" => Suite::Identities,
            "rates" => Suite::Rates,
            "convergence" => Suite::Convergence,
            "intertwining" => Suite::Intertwining,
            "sde" => Suite::Sde,
            "all" => Suite::All,
            other => {
                return Err(Error::Parse(format!(
                "unknown suite '{other}' (identities, rates, convergence, intertwining, sde, all)"
            )))
            }
        })
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Suite::Identities => "identities",
            Suite::Rates => "rates",
            Suite::Convergence => "convergence",
            Suite::Intertwining => "intertwining",
            Suite::Sde => "sde",
            Suite::All => "all",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CriterionOutcome {
    pub id: u8,
    pub title: &'static str,
    pub pass: bool,
    pub runtime_s: f64,
    pub reports: Vec<TestReport>,
}

impl CriterionOutcome {
    pub fn summary_line(&self) -> String {
        let failed = self.reports.iter().filter(|r| !r.pass).count();
        format!(
            "criterion {:>2} [{}] {} ({} checks, {} failed, {:.1}s)",
            self.id,
            if self.pass { "PASS" } else { "FAIL" },
            self.title,
            self.reports.len(),
            failed,
            self.runtime_s
        )
    }
}

pub fn title(id: u8) -> &'static str {
    match id {
        1 => "total jump rate equals Nθ",
        2 => "branching recursion of J_λ(1^N)",
        3 => "Jack measure layers are Poisson",
        4 => "Dixon–Anderson integral",
        5 => "rate expansion residuals stay bounded",
        6 => "single-level chain converges to the Hermite ensemble",
        7 => "multilevel chain converges to the corners process",
        8 => "Dyson second moment",
        9 => "multilevel SDE at θ = 2 stays in the cone and avoids collisions",
        10 => "intertwining of Dyson semigroups",
        11 => "top level of the multilevel chain is the single-level chain",
        _ => "unknown criterion",
    }
}

pub fn run_criterion(id: u8, seed: u64) -> Result<CriterionOutcome> {
    let clock = Instant::now();
    let seed = derive_seed(seed, u64::from(id));
    let reports = match id {
        1 => total_rate(seed)?,
        2 => branching()?,
        3 => poisson_layering()?,
        4 => dixon_anderson()?,
        5 => rate_expansion()?,
        6 => single_level_convergence(seed)?,
        7 => multilevel_convergence(seed)?,
        8 => dyson_moments(seed)?,
        9 => multilevel_invariants(seed)?,
        10 => intertwining(seed)?,
        11 => level_restriction(seed)?,
        _ => return Err(Error::OutOfRange(format!("no criterion {id}"))),
    };
    Ok(CriterionOutcome {
        id,
        title: title(id),
        pass: reports.iter().all(|r| r.pass),
        runtime_s: clock.elapsed().as_secs_f64(),
        reports,
    })
}

/// Runs every criterion of `suite`, calling `progress` after each one.
pub fn run_suite(
    suite: Suite,
    seed: u64,
    mut progress: impl FnMut(&CriterionOutcome),
) -> Result<Vec<CriterionOutcome>> {
    suite
        .criteria()
        .iter()
        .map(|&id| {
            let out = run_criterion(id, seed)?;
            progress(&out);
            Ok(out)
        })
        .collect()
}

fn th(v: f64) -> Result<Theta> {
    Theta::new(v)
}

fn rel_err(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
    }
}

fn column(points: &[Vec<f64>], i: usize) -> Vec<f64> {
    points.iter().map(|p| p[i]).collect()
}

fn ks_report(name: String, a: &[f64], b: &[f64], floor: f64) -> Result<TestReport> {
    let (d, p) = ks_two_sample(a, b)?;
    Ok(TestReport::ks(name, d, p, KS_CEILING, floor, a.len()))
}

fn total_rate(seed: u64) -> Result<Vec<TestReport>> {
    let clock = Instant::now();
    let mut rng = rng_from_seed(seed);
    let thetas = [0.5, 1.0, 2.0, 2.5];
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let n = rng.random_range(1..=6usize);
        let t = th(thetas[rng.random_range(0..thetas.len())])?;
        // n rows with total at most 30
        let budget = rng.random_range(0..=30u32);
        let mut rows: Vec<u32> = (0..n).map(|_| rng.random_range(0..=budget)).collect();
        rows.sort_unstable_by(|a, b| b.cmp(a));
        let mut left = budget;
        for r in rows.iter_mut() {
            *r = (*r).min(left);
            left -= *r;
        }
        rows.sort_unstable_by(|a, b| b.cmp(a));
        let lambda = Partition::new(rows)?;
        let total = addable_cells(&lambda, n)
            .into_iter()
            .map(|c| single_level_rate(&lambda, c, n, t))
            .sum::<Result<f64>>()?;
        worst = worst.max(rel_err(total, n as f64 * t.value()));
    }
    Ok(vec![TestReport::upper_bound(
        "max relative error of Σ rates − Nθ",
        worst,
        1e-9,
        200,
    )
    .with_runtime(clock.elapsed().as_secs_f64())])
}

fn branching() -> Result<Vec<TestReport>> {
    let clock = Instant::now();
    let (mut worst, mut count): (f64, usize) = (0.0, 0);
    for t in [0.5, 1.0, 2.0] {
        let t = th(t)?;
        for size in 0..=8 {
            for n in 1..=5 {
                for lambda in partitions(size, n) {
                    let direct = jack_principal(&lambda, n, t).value();
                    let recursive = if n == 1 {
                        psi(&lambda, &Partition::empty(), t).value()
                    } else {
                        predecessors(&lambda, n - 1)
                            .iter()
                            .map(|mu| (psi(&lambda, mu, t) * jack_principal(mu, n - 1, t)).value())
                            .sum()
                    };
                    worst = worst.max(rel_err(recursive, direct));
                    count += 1;
                }
            }
        }
    }
    Ok(vec![TestReport::upper_bound(
        "max relative error of the branching recursion",
        worst,
        1e-10,
        count,
    )
    .with_runtime(clock.elapsed().as_secs_f64())])
}

fn poisson_layering() -> Result<Vec<TestReport>> {
    let clock = Instant::now();
    let (mut worst, mut count): (f64, usize) = (0.0, 0);
    for t in [0.5, 1.0, 2.0] {
        let theta = th(t)?;
        for n in 1..=3 {
            for s in [0.5, 2.0] {
                let rate = n as f64 * t * s;
                for m in 0..=10u32 {
                    let layer: f64 = partitions(m, n)
                        .iter()
                        .map(|l| jack_measure(l, n, s, theta).value())
                        .sum();
                    let ln_poisson = -rate + f64::from(m) * rate.ln()
                        - statrs::function::factorial::ln_factorial(u64::from(m));
                    worst = worst.max(rel_err(layer, ln_poisson.exp()));
                    count += 1;
                }
            }
        }
    }
    Ok(vec![TestReport::upper_bound(
        "max relative error of the size law vs Poisson(Nθs)",
        worst,
        1e-9,
        count,
    )
    .with_runtime(clock.elapsed().as_secs_f64())])
}

fn dixon_anderson() -> Result<Vec<TestReport>> {
    let points: [&[f64]; 4] = [
        &[-0.4, 1.3],
        &[0.0, 0.05],
        &[-1.2, 0.1, 0.9],
        &[-0.3, -0.2, 1.8],
    ];
    let mut out = Vec::new();
    for (m, tol) in [(1, 1e-6), (2, 1e-5)] {
        let clock = Instant::now();
        let mut worst: f64 = 0.0;
        let mut count = 0;
        for t in [0.5, 1.0, 1.5, 2.0] {
            for v in points.iter().filter(|v| v.len() == m + 1) {
                let (lhs, rhs) = dixon_anderson_check(v, th(t)?)?;
                worst = worst.max(rel_err(lhs, rhs));
                count += 1;
            }
        }
        out.push(
            TestReport::upper_bound(
                format!("Dixon–Anderson m={m}: max relative error"),
                worst,
                tol,
                count,
            )
            .with_runtime(clock.elapsed().as_secs_f64()),
        );
    }
    Ok(out)
}

const EXPANSION_EPS: [f64; 3] = [1e-2, 1e-4, 1e-6];

fn rate_expansion() -> Result<Vec<TestReport>> {
    let mut out = Vec::new();
    let single: [(&[f64], f64); 4] = [
        (&[-1.0, 1.0], 1.0),
        (&[-1.0, 1.0], 0.5),
        (&[-1.2, 0.1, 1.4], 0.5),
        (&[-1.2, 0.1, 1.4], 2.0),
    ];
    for (y, t) in single {
        let clock = Instant::now();
        let table = rate_expansion_probe(&WeylPoint::new(y.to_vec())?, th(t)?, &EXPANSION_EPS)?;
        out.push(expansion_report(
            format!("single-level y={y:?} θ={t}"),
            table.growth.iter().copied(),
            clock,
        ));
    }
    let multi: [(Vec<Vec<f64>>, f64); 4] = [
        (vec![vec![0.1], vec![-1.0, 1.0]], 0.5),
        (vec![vec![0.1], vec![-1.0, 1.0]], 1.5),
        (vec![vec![0.2], vec![-0.5, 0.7], vec![-1.3, 0.1, 1.5]], 2.0),
        (vec![vec![0.2], vec![-0.5, 0.7], vec![-1.3, 0.1, 1.5]], 0.7),
    ];
    for (levels, t) in multi {
        let clock = Instant::now();
        let label = format!("multilevel y={levels:?} θ={t}");
        let table =
            rate_expansion_probe_multilevel(&ConePoint::new(levels)?, th(t)?, &EXPANSION_EPS)?;
        out.push(expansion_report(label, table.growth.iter().copied(), clock));
    }
    Ok(out)
}

fn expansion_report(name: String, growth: impl Iterator<Item = f64>, clock: Instant) -> TestReport {
    let worst = growth.fold(0.0f64, f64::max);
    TestReport::upper_bound(
        format!("{name}: largest decade growth of sup residual"),
        worst,
        EXPANSION_GROWTH,
        EXPANSION_EPS.len(),
    )
    .with_runtime(clock.elapsed().as_secs_f64())
}

const CHAIN_PATHS: usize = 5_000;

/// Rescaled final states of `paths` chains run to the chain time of t = 1.
fn chain_finals(cfg: ChainConfig, scaling: &ScalingParams) -> Result<Vec<Vec<Vec<f64>>>> {
    let s = scaling.chain_time();
    let n = cfg.n;
    batch(&cfg.with_snapshots(vec![s]), CHAIN_PATHS, 0)?
        .iter()
        .map(|traj| Ok(rescale_state(&traj.final_state, n, scaling)?.levels()))
        .collect()
}

fn single_level_convergence(seed: u64) -> Result<Vec<TestReport>> {
    let clock = Instant::now();
    let (n, theta, t) = (3, th(1.0)?, 1.0);
    let scaling = ScalingParams::new(CHAIN_EPSILON, t, theta.value())?;
    let chain: Vec<Vec<f64>> = chain_finals(
        ChainConfig::single(n, theta, scaling.chain_time(), derive_seed(seed, 1)),
        &scaling,
    )?
    .into_iter()
    .map(|mut l| l.remove(0))
    .collect();
    let reference: Vec<Vec<f64>> = sample_hermite(
        &EnsembleParams::new(n, theta, t)?,
        CHAIN_PATHS,
        derive_seed(seed, 2),
    )?
    .points
    .into_iter()
    .map(WeylPoint::into_inner)
    .collect();
    let runtime = clock.elapsed().as_secs_f64();
    (0..n)
        .map(|i| {
            Ok(ks_report(
                format!("y_{} at ε={CHAIN_EPSILON} vs Hermite β=2", i + 1),
                &column(&chain, i),
                &column(&reference, i),
                P_FLOOR / n as f64,
            )?
            .with_runtime(runtime))
        })
        .collect()
}

fn multilevel_convergence(seed: u64) -> Result<Vec<TestReport>> {
    let mut out = Vec::new();
    for (j, t_val) in [1.0, 2.0].into_iter().enumerate() {
        let clock = Instant::now();
        let (n, theta, t) = (2, th(t_val)?, 1.0);
        let seed = derive_seed(seed, j as u64);
        let scaling = ScalingParams::new(CHAIN_EPSILON, t, theta.value())?;
        let chain: Vec<Vec<f64>> = chain_finals(
            ChainConfig::multi(n, theta, scaling.chain_time(), derive_seed(seed, 1)),
            &scaling,
        )?
        .into_iter()
        .map(|l| l.concat())
        .collect();
        let reference: Vec<Vec<f64>> = sample_corners(
            &EnsembleParams::new(n, theta, t)?,
            CHAIN_PATHS,
            derive_seed(seed, 2),
        )?
        .points
        .iter()
        .map(ConePoint::flatten)
        .collect();
        let runtime = clock.elapsed().as_secs_f64();
        for (i, label) in ["y¹₁", "y²₁", "y²₂"].iter().enumerate() {
            out.push(
                ks_report(
                    format!("θ={t_val} {label} at ε={CHAIN_EPSILON} vs corners process"),
                    &column(&chain, i),
                    &column(&reference, i),
                    P_FLOOR / 3.0,
                )?
                .with_runtime(runtime),
            );
        }
        out.push(conditional_chi2(&chain, theta, &scaling)?.with_runtime(runtime));
    }
    Ok(out)
}

/// χ² of the position of y¹ inside (y²₁, y²₂), restricted to the central half
/// of the observed y²-gaps, against the θ-conditional law. Lattice values are
/// mapped to cell centres: with L + 1 admissible rows, row offset j sits at
/// (j + 1/2)/(L + 1).
fn conditional_chi2(
    chain: &[Vec<f64>],
    theta: Theta,
    scaling: &ScalingParams,
) -> Result<TestReport> {
    let cells = |v: f64| v / scaling.scale();
    let mut gaps: Vec<f64> = chain.iter().map(|p| p[2] - p[1]).collect();
    gaps.sort_by(f64::total_cmp);
    let (lo, hi) = (gaps[gaps.len() / 4], gaps[3 * gaps.len() / 4]);
    let u: Vec<f64> = chain
        .iter()
        .filter(|p| (lo..=hi).contains(&(p[2] - p[1])))
        .map(|p| {
            let width = cells(p[2] - p[1]).round();
            let offset = cells(p[0] - p[1]).round();
            (offset + 0.5) / (width + 1.0)
        })
        .collect();
    let edges: Vec<f64> = (0..=10).map(|k| k as f64 / 10.0).collect();
    let (stat, p) = chi2_histogram(
        &u,
        |x| theta_gibbs_link_log(&[x], &[0.0, 1.0], theta),
        &edges,
    )?;
    Ok(TestReport::p_above(
        format!(
            "θ={} position of y¹ given the central y²-gap bin vs θ-conditional (χ²)",
            theta.value()
        ),
        stat,
        p,
        P_FLOOR,
        u.len(),
    ))
}

fn dyson_moments(seed: u64) -> Result<Vec<TestReport>> {
    let (n, t, paths) = (3usize, 1.0, 10_000);
    let mut out = Vec::new();
    for (j, beta) in [1.0, 2.0, 4.0].into_iter().enumerate() {
        let clock = Instant::now();
        let cfg = SdeConfig::new(
            n,
            Theta::from_beta(beta)?,
            t,
            SDE_DT,
            derive_seed(seed, j as u64),
        );
        let m2: Vec<f64> = integrate_batch(&cfg, SdeKind::Dyson, paths, 0)?
            .iter()
            .map(|p| p.final_state[0].iter().map(|x| x * x).sum())
            .collect();
        out.push(moment_report(
            format!("β={beta} E Σx² at t={t}"),
            &m2,
            (n as f64 + beta * (n * (n - 1)) as f64 / 2.0) * t,
            clock,
        ));
    }
    Ok(out)
}

/// |mean − exact| measured in standard errors; passes at ≤ 3.
fn moment_report(name: String, xs: &[f64], exact: f64, clock: Instant) -> TestReport {
    let (m, se) = mean_and_se(xs);
    TestReport::upper_bound(
        format!("{name}: mean {m:.4} ± {se:.4} vs {exact} (in SE)"),
        (m - exact).abs() / se,
        3.0,
        xs.len(),
    )
    .with_runtime(clock.elapsed().as_secs_f64())
}

fn multilevel_invariants(seed: u64) -> Result<Vec<TestReport>> {
    let clock = Instant::now();
    let (n, theta, t, paths) = (3usize, th(2.0)?, 0.5, 1_000);
    let starts = sample_corners(
        &EnsembleParams::new(n, theta, 1.0)?,
        paths,
        derive_seed(seed, 1),
    )?;
    let runs = starts
        .points
        .par_iter()
        .enumerate()
        .map(|(i, c)| {
            let cfg = SdeConfig::new(n, theta, t, SDE_DT, derive_seed(seed, 100 + i as u64))
                .with_initial(SdeInitial::Cone(c.clone()));
            integrate_multilevel(&cfg).map(|p| (c.top().to_vec(), p))
        })
        .collect::<Result<Vec<_>>>()?;
    let runtime = clock.elapsed().as_secs_f64();
    let exits: u64 = runs.iter().map(|(_, p)| p.stopping.exits).sum();
    let steps: u64 = runs.iter().map(|(_, p)| p.steps).sum();
    let hits = runs
        .iter()
        .filter(|(_, p)| p.stopping.hat_tau_delta.is_some())
        .count();
    let sum_sq = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>();
    let incr: Vec<f64> = runs
        .iter()
        .map(|(top, p)| sum_sq(&p.final_state[n - 1]) - sum_sq(top))
        .collect();
    let beta = theta.beta();
    Ok(vec![
        TestReport::upper_bound(
            format!("accepted states outside the open cone ({steps} steps)"),
            exits as f64,
            0.0,
            paths,
        )
        .with_runtime(runtime),
        TestReport::upper_bound(
            "paths reaching two-particle distance 1e-4 (τ̂_δ)",
            hits as f64,
            0.0,
            paths,
        )
        .with_runtime(runtime),
        moment_report(
            format!("level-{n} increment of Σx² over t={t}"),
            &incr,
            (n as f64 + beta * (n * (n - 1)) as f64 / 2.0) * t,
            clock,
        ),
    ])
}

fn intertwining(seed: u64) -> Result<Vec<TestReport>> {
    let mut out = Vec::new();
    for n in [2, 3] {
        for (j, t) in [0.25, 0.5].into_iter().enumerate() {
            out.extend(crate::statcheck::intertwining_test(
                n,
                th(1.0)?,
                t,
                10_000,
                SDE_DT,
                derive_seed(seed, (10 * n + j) as u64),
            )?);
        }
    }
    Ok(out)
}

fn level_restriction(seed: u64) -> Result<Vec<TestReport>> {
    let clock = Instant::now();
    let (n, theta) = (3usize, th(1.0)?);
    let top: Partition = "4,2,0".parse()?;
    let times = vec![1.0, 4.0];
    let horizon = 4.0;
    let rows = |state: &ChainState| -> Vec<f64> {
        state
            .top()
            .padded(n)
            .iter()
            .map(|&r| f64::from(r))
            .collect()
    };
    let collect = |multi: bool| -> Result<Vec<Vec<Vec<f64>>>> {
        (0..CHAIN_PATHS as u64)
            .into_par_iter()
            .map(|i| {
                let traj = if multi {
                    let start = sample_jack_gibbs(&top, n, theta, derive_seed(seed, 2 * i))?;
                    run_multi(
                        &ChainConfig::multi(n, theta, horizon, derive_seed(seed, 2 * i + 1))
                            .with_initial(ChainState::Multi(start))
                            .with_snapshots(times.clone()),
                    )?
                } else {
                    run_single(
                        &ChainConfig::single(n, theta, horizon, derive_seed(seed ^ 1, i))
                            .with_initial(ChainState::Single(top.clone()))
                            .with_snapshots(times.clone()),
                    )?
                };
                Ok(traj.snapshots.iter().map(|(_, s)| rows(s)).collect())
            })
            .collect()
    };
    let multi = collect(true)?;
    let single = collect(false)?;
    let runtime = clock.elapsed().as_secs_f64();
    let floor = P_FLOOR / (n * times.len()) as f64;
    let mut out = Vec::new();
    for (k, s) in times.iter().enumerate() {
        for i in 0..n {
            let a: Vec<f64> = multi.iter().map(|p| p[k][i]).collect();
            let b: Vec<f64> = single.iter().map(|p| p[k][i]).collect();
            out.push(
                ks_report(
                    format!("λ³ row {} at s={s}: multilevel vs single-level", i + 1),
                    &a,
                    &b,
                    floor,
                )?
                .with_runtime(runtime),
            );
        }
    }
    Ok(out)
}
