//! Two-sample KS, Pearson χ², Poisson dispersion and the report type shared
//! by the verification suites.

use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::combinatorics::{levels_in_open_cone, ConePoint, WeylPoint};
use crate::diffusion::{dyson_drift, dyson_from_points, multilevel_drift};
use crate::ensembles::{link_batch, sample_hermite, EnsembleParams};
use crate::error::{Error, Result};
use crate::jack::{multilevel_rates_into, single_level_rates_into, Theta};
use crate::quadrature::TanhSinh;
use crate::rng::derive_seed;

/// p-value floor used by every distributional acceptance test.
pub const P_FLOOR: f64 = 0.01;
/// KS distance ceiling used by the acceptance tests.
pub const KS_CEILING: f64 = 0.05;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TestReport {
    pub name: String,
    pub statistic: f64,
    pub threshold: f64,
    pub p_value: Option<f64>,
    pub pass: bool,
    pub n_samples: usize,
    pub runtime_s: f64,
}

impl TestReport {
    /// Passes when `statistic ≤ threshold`.
    pub fn upper_bound(
        name: impl Into<String>,
        statistic: f64,
        threshold: f64,
        n_samples: usize,
    ) -> Self {
        Self {
            name: name.into(),
            statistic,
            threshold,
            p_value: None,
            pass: statistic <= threshold,
            n_samples,
            runtime_s: 0.0,
        }
    }

    /// Passes when `p > floor`; the floor is stored as the threshold.
    pub fn p_above(
        name: impl Into<String>,
        statistic: f64,
        p: f64,
        floor: f64,
        n_samples: usize,
    ) -> Self {
        Self {
            name: name.into(),
            statistic,
            threshold: floor,
            p_value: Some(p),
            pass: p > floor,
            n_samples,
            runtime_s: 0.0,
        }
    }

    /// KS report: D must stay under `ceiling` and p above `floor`.
    pub fn ks(
        name: impl Into<String>,
        d: f64,
        p: f64,
        ceiling: f64,
        floor: f64,
        n_samples: usize,
    ) -> Self {
        Self {
            name: name.into(),
            statistic: d,
            threshold: ceiling,
            p_value: Some(p),
            pass: d <= ceiling && p > floor,
            n_samples,
            runtime_s: 0.0,
        }
    }

    pub fn with_runtime(mut self, runtime_s: f64) -> Self {
        self.runtime_s = runtime_s;
        self
    }

    pub fn summary_line(&self) -> String {
        let p = self
            .p_value
            .map(|p| format!(" p={p:.4}"))
            .unwrap_or_default();
        format!(
            "[{}] {}: stat={:.4e} threshold={:.3e}{} n={} ({:.1}s)",
            if self.pass { "PASS" } else { "FAIL" },
            self.name,
            self.statistic,
            self.threshold,
            p,
            self.n_samples,
            self.runtime_s
        )
    }
}

/// Kolmogorov survival function Q(λ) = 2 Σ (−1)^{j−1} exp(−2j²λ²).
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    if lambda < 1.18 {
        // Jacobi-transformed series converges fast for small λ
        let pi2 = std::f64::consts::PI * std::f64::consts::PI;
        let mut s = 0.0;
        for j in 1..=6 {
            let k = (2 * j - 1) as f64;
            s += (-k * k * pi2 / (8.0 * lambda * lambda)).exp();
        }
        (1.0 - (2.0 * std::f64::consts::PI).sqrt() / lambda * s).clamp(0.0, 1.0)
    } else {
        let mut s = 0.0;
        for j in 1..=100 {
            let jf = j as f64;
            let term = (-2.0 * jf * jf * lambda * lambda).exp();
            s += if j % 2 == 1 { term } else { -term };
            if term < 1e-17 {
                break;
            }
        }
        (2.0 * s).clamp(0.0, 1.0)
    }
}

fn sorted(xs: &[f64]) -> Result<Vec<f64>> {
    if xs.iter().any(|x| x.is_nan()) {
        return Err(Error::Statistics("NaN in sample".into()));
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    Ok(v)
}

/// Two-sample KS distance and asymptotic p-value. Tied values are stepped
/// over together, so identical samples give D = 0.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<(f64, f64)> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Statistics(
            "KS test needs two nonempty samples".into(),
        ));
    }
    let (a, b) = (sorted(a)?, sorted(b)?);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    let ne = na * nb / (na + nb);
    let sq = ne.sqrt();
    Ok((d, kolmogorov_sf((sq + 0.12 + 0.11 / sq) * d)))
}

/// One-sample KS against a continuous CDF.
pub fn ks_one_sample<F: Fn(f64) -> f64>(a: &[f64], cdf: F) -> Result<(f64, f64)> {
    if a.is_empty() {
        return Err(Error::Statistics("KS test needs a nonempty sample".into()));
    }
    let a = sorted(a)?;
    let n = a.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in a.iter().enumerate() {
        let f = cdf(x);
        d = d
            .max((f - i as f64 / n).abs())
            .max(((i + 1) as f64 / n - f).abs());
    }
    let sq = n.sqrt();
    Ok((d, kolmogorov_sf((sq + 0.12 + 0.11 / sq) * d)))
}

/// Pearson χ² of observed counts against cell probabilities (which must sum
/// to 1 up to rounding). `fitted` parameters are subtracted from the degrees
/// of freedom.
pub fn chi2_counts(observed: &[u64], probs: &[f64], fitted: usize) -> Result<(f64, f64)> {
    if observed.len() != probs.len() || observed.len() < 2 {
        return Err(Error::Statistics(
            "χ² needs at least two matching cells".into(),
        ));
    }
    let n: u64 = observed.iter().sum();
    let mut stat = 0.0;
    for (&o, &p) in observed.iter().zip(probs) {
        let e = p * n as f64;
        if e < 5.0 {
            return Err(Error::Statistics(format!(
                "expected count {e:.2} < 5 in a χ² cell"
            )));
        }
        stat += (o as f64 - e).powi(2) / e;
    }
    let dof = observed.len() - 1 - fitted;
    if dof == 0 {
        return Err(Error::Statistics("χ² with zero degrees of freedom".into()));
    }
    let chi = ChiSquared::new(dof as f64).map_err(|e| Error::Statistics(e.to_string()))?;
    Ok((stat, chi.sf(stat)))
}

/// Pearson χ² of `samples` binned by `edges` against the law whose (possibly
/// unnormalized) log-density is `target_log_density`; bin masses come from
/// quadrature and are normalized over [edges₀, edges_last].
pub fn chi2_histogram<F: Fn(f64) -> f64>(
    samples: &[f64],
    target_log_density: F,
    edges: &[f64],
) -> Result<(f64, f64)> {
    if edges.len() < 3 || edges.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::Statistics(
            "χ² bins need increasing edges, at least two bins".into(),
        ));
    }
    let (lo, hi) = (edges[0], edges[edges.len() - 1]);
    if let Some(x) = samples.iter().find(|&&x| !(lo..=hi).contains(&x)) {
        return Err(Error::Statistics(format!(
            "sample {x} outside bin range [{lo}, {hi}]"
        )));
    }
    let rule = TanhSinh::with_tol(1e-8).with_abs_tol(1e-14);
    // Nodes that round onto a singular bin edge carry negligible mass; drop them.
    let masses = edges
        .windows(2)
        .map(|w| {
            rule.integrate(w[0], w[1], |nd| {
                Some(target_log_density(nd.x).exp())
                    .filter(|v| v.is_finite())
                    .unwrap_or(0.0)
            })
        })
        .collect::<Result<Vec<f64>>>()?;
    let total: f64 = masses.iter().sum();
    let probs: Vec<f64> = masses.iter().map(|m| m / total).collect();
    let mut counts = vec![0u64; probs.len()];
    for &x in samples {
        let k = edges.partition_point(|&e| e <= x).clamp(1, probs.len());
        counts[k - 1] += 1;
    }
    chi2_counts(&counts, &probs, 0)
}

/// Default acceptance band for the variance-to-mean index.
pub const DISPERSION_BAND: (f64, f64) = (0.9, 1.1);

/// Variance/mean index of counts and whether it lies in [`DISPERSION_BAND`].
pub fn poisson_dispersion(counts: &[u64]) -> Result<(f64, bool)> {
    if counts.is_empty() {
        return Err(Error::Statistics("dispersion of an empty sample".into()));
    }
    let n = counts.len() as f64;
    let mean = counts.iter().map(|&c| c as f64).sum::<f64>() / n;
    if mean == 0.0 {
        return Ok((0.0, false));
    }
    let var = counts
        .iter()
        .map(|&c| (c as f64 - mean).powi(2))
        .sum::<f64>()
        / (n - 1.0).max(1.0);
    let index = var / mean;
    Ok((
        index,
        (DISPERSION_BAND.0..=DISPERSION_BAND.1).contains(&index),
    ))
}

/// Sample mean and its standard error.
pub fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    (mean, (var / n).sqrt())
}

/// Base time of the probe: rows sit near t/ε.
const PROBE_TIME: f64 = 1.0;
/// Residuals below this are treated as zero when forming decade ratios.
const RESIDUAL_FLOOR: f64 = 1e-8;
/// Largest decade-to-decade growth of the sup residual still called bounded.
pub const EXPANSION_GROWTH: f64 = 2.0;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExpansionRow {
    pub epsilon: f64,
    /// The probe point after rounding the rows to integers.
    pub y_adjusted: Vec<Vec<f64>>,
    /// q/(θε) − ε⁻¹ − ε^{-1/2} b(y_adjusted), particle by particle.
    pub residuals: Vec<Vec<f64>>,
    pub sup: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExpansionTable {
    pub rows: Vec<ExpansionRow>,
    /// sup residual at each ε over the one before it.
    pub growth: Vec<f64>,
    pub bounded: bool,
}

fn round_rows(level: &[f64], eps: f64) -> Result<(Vec<u32>, Vec<f64>)> {
    // y_i (ascending) ↔ row k+1−i (descending)
    let shift = PROBE_TIME / eps;
    let rows: Vec<u32> = level
        .iter()
        .rev()
        .map(|&y| (shift + y / eps.sqrt()).round())
        .map(|r| {
            if r >= 0.0 && r < u32::MAX as f64 {
                Ok(r as u32)
            } else {
                Err(r)
            }
        })
        .collect::<std::result::Result<_, _>>()
        .map_err(|r| Error::OutOfRange(format!("row {r} does not fit at ε = {eps}")))?;
    let y = rows
        .iter()
        .rev()
        .map(|&r| eps.sqrt() * (f64::from(r) - shift))
        .collect();
    Ok((rows, y))
}

fn finish_table(rows: Vec<ExpansionRow>) -> ExpansionTable {
    let growth: Vec<f64> = rows
        .windows(2)
        .map(|w| (w[1].sup + RESIDUAL_FLOOR) / (w[0].sup + RESIDUAL_FLOOR))
        .collect();
    let bounded = growth.iter().all(|&g| g <= EXPANSION_GROWTH);
    ExpansionTable {
        rows,
        growth,
        bounded,
    }
}

/// Residual table of the single-level rates at the lattice point nearest to
/// the rescaled point y.
pub fn rate_expansion_probe(
    y: &WeylPoint,
    theta: Theta,
    eps_list: &[f64],
) -> Result<ExpansionTable> {
    let th = theta.value();
    let mut rows = Vec::new();
    for &eps in eps_list {
        let (lambda, y_adj) = round_rows(y.coords(), eps)?;
        if lambda.windows(2).any(|w| w[0] <= w[1]) {
            return Err(Error::OutOfRange(format!(
                "ε = {eps} too large: particles of {:?} overlap after rounding",
                y.coords()
            )));
        }
        let mut q = vec![0.0; lambda.len()];
        single_level_rates_into(&lambda, th, &mut q);
        let b = dyson_drift(&WeylPoint::new(y_adj.clone())?, 2.0 * th)?;
        let n = lambda.len();
        let res: Vec<f64> = (0..n)
            .map(|i| q[n - 1 - i] / (th * eps) - 1.0 / eps - b[i] / eps.sqrt())
            .collect();
        let sup = res.iter().fold(0.0f64, |m, r| m.max(r.abs()));
        rows.push(ExpansionRow {
            epsilon: eps,
            y_adjusted: vec![y_adj],
            residuals: vec![res],
            sup,
        });
    }
    Ok(finish_table(rows))
}

/// Residual table of the multilevel own-clock rates at the interlacing array
/// nearest to the rescaled cone point y.
pub fn rate_expansion_probe_multilevel(
    y: &ConePoint,
    theta: Theta,
    eps_list: &[f64],
) -> Result<ExpansionTable> {
    let th = theta.value();
    let mut rows = Vec::new();
    for &eps in eps_list {
        let rounded = y
            .levels()
            .iter()
            .map(|l| round_rows(l, eps))
            .collect::<Result<Vec<_>>>()?;
        let y_adj: Vec<Vec<f64>> = rounded.iter().map(|(_, y)| y.clone()).collect();
        if !levels_in_open_cone(&y_adj) {
            return Err(Error::OutOfRange(format!(
                "ε = {eps} too large: {:?} leaves the open cone after rounding",
                y.levels()
            )));
        }
        let b = multilevel_drift(&ConePoint::new(y_adj.clone())?, theta)?;
        let mut residuals = Vec::new();
        for (k, (upper, _)) in rounded.iter().enumerate() {
            let lower: &[u32] = if k == 0 { &[] } else { &rounded[k - 1].0 };
            let mut q = vec![0.0; upper.len()];
            multilevel_rates_into(upper, lower, th, &mut q);
            let n = upper.len();
            residuals.push(
                (0..n)
                    .map(|i| q[n - 1 - i] / (th * eps) - 1.0 / eps - b[k][i] / eps.sqrt())
                    .collect::<Vec<f64>>(),
            );
        }
        let sup = residuals
            .iter()
            .flatten()
            .fold(0.0f64, |m, r| m.max(r.abs()));
        rows.push(ExpansionRow {
            epsilon: eps,
            y_adjusted: y_adj,
            residuals,
            sup,
        });
    }
    Ok(finish_table(rows))
}

/// Compares the two sides of the intertwining relation at variance-1 Hermite
/// input. Pipeline A links a level-N Hermite point down to N−1 particles and
/// runs (N−1)-particle Dyson motion for time t; pipeline B runs N-particle
/// Dyson motion for time t and then links down. Returns one KS report per
/// level-(N−1) coordinate, Bonferroni-corrected.
pub fn intertwining_test(
    n: usize,
    theta: Theta,
    t: f64,
    n_samples: usize,
    dt: f64,
    seed: u64,
) -> Result<Vec<TestReport>> {
    if n < 2 || theta.value() < 0.5 {
        return Err(Error::OutOfRange(format!(
            "intertwining needs N ≥ 2 and θ ≥ 1/2 (N={n}, θ={})",
            theta.value()
        )));
    }
    let clock = std::time::Instant::now();
    let p = EnsembleParams::new(n, theta, 1.0)?;
    let tops = |s: u64| -> Result<Vec<Vec<f64>>> {
        Ok(sample_hermite(&p, n_samples, s)?
            .points
            .into_iter()
            .map(WeylPoint::into_inner)
            .collect())
    };
    let a_start = link_batch(&tops(derive_seed(seed, 1))?, theta, derive_seed(seed, 2));
    let a = dyson_from_points(&a_start, theta, t, dt, derive_seed(seed, 3))?;
    let b_top = dyson_from_points(
        &tops(derive_seed(seed, 4))?,
        theta,
        t,
        dt,
        derive_seed(seed, 5),
    )?;
    let b = link_batch(&b_top, theta, derive_seed(seed, 6));
    let floor = P_FLOOR / (n - 1) as f64;
    let runtime = clock.elapsed().as_secs_f64();
    (0..n - 1)
        .map(|i| {
            let ca: Vec<f64> = a.iter().map(|v| v[i]).collect();
            let cb: Vec<f64> = b.iter().map(|v| v[i]).collect();
            let (d, pv) = ks_two_sample(&ca, &cb)?;
            Ok(TestReport::ks(
                format!(
                    "intertwining N={n} θ={} t={t} coordinate {}",
                    theta.value(),
                    i + 1
                ),
                d,
                pv,
                KS_CEILING,
                floor,
                n_samples,
            )
            .with_runtime(runtime))
        })
        .collect()
}
