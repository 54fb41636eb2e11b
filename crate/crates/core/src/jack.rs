//! Jack polynomial specializations, branching coefficients and jump rates.
//!
//! Every product is accumulated in log space. The P-normalized Jack
//! polynomials are evaluated at the principal specialization 1^N and the
//! Plancherel specialization 𝔯_s (γ = s); their duals differ by the
//! explicit box product in [`dual_factor`].

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::combinatorics::{arm_leg, interlaces, Cell, InterlacingArray, Partition};
use crate::error::{Error, Result};
use crate::logvalue::LogValue;

/// The Jack parameter θ > 0; β = 2θ.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Theta(f64);

impl Theta {
    pub fn new(theta: f64) -> Result<Self> {
        if theta > 0.0 && theta.is_finite() {
            Ok(Theta(theta))
        } else {
            Err(Error::OutOfRange(format!(
                "theta must be positive and finite, got {theta}"
            )))
        }
    }

    pub fn from_beta(beta: f64) -> Result<Self> {
        Self::new(beta / 2.0)
            .map_err(|_| Error::OutOfRange(format!("beta must be positive, got {beta}")))
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn beta(self) -> f64 {
        2.0 * self.0
    }
}

impl TryFrom<f64> for Theta {
    type Error = Error;

    fn try_from(v: f64) -> Result<Self> {
        Theta::new(v)
    }
}

impl From<Theta> for f64 {
    fn from(t: Theta) -> f64 {
        t.0
    }
}

/// The two Jack-positive specializations used by the dynamics.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Specialization {
    /// α₁ = … = α_N = 1.
    PrincipalOnes(usize),
    /// γ = s, all other parameters zero.
    PlancherelGamma(f64),
}

impl Specialization {
    /// Newton power sum p_k under the specialization.
    pub fn power_sum(&self, k: usize) -> f64 {
        match *self {
            Specialization::PrincipalOnes(n) => n as f64,
            Specialization::PlancherelGamma(s) => {
                if k == 1 {
                    s
                } else {
                    0.0
                }
            }
        }
    }

    pub fn evaluate(&self, lambda: &Partition, theta: Theta) -> LogValue {
        match *self {
            Specialization::PrincipalOnes(n) => jack_principal(lambda, n, theta),
            Specialization::PlancherelGamma(s) => jack_plancherel(lambda, s, theta),
        }
    }
}

/// ln (a)_n for a > 0: direct product for short runs, log-Gamma otherwise.
fn ln_pochhammer(a: f64, n: u32) -> f64 {
    if n == 0 {
        0.0
    } else if n <= 24 {
        (0..n).map(|k| (a + f64::from(k)).ln()).sum()
    } else {
        ln_gamma(a + f64::from(n)) - ln_gamma(a)
    }
}

/// a(□) + θ l(□) + θ, a(□) + θ l(□) + 1, and the principal numerator N θ + a′ − θ l′.
fn box_terms(lambda: &Partition, cell: Cell, n: usize, theta: f64) -> (f64, f64, f64) {
    let al = arm_leg(lambda, cell).expect("cell taken from the diagram");
    let hook = al.arm as f64 + theta * al.leg as f64;
    let content = n as f64 * theta + al.coarm as f64 - theta * al.coleg as f64;
    (hook + theta, hook + 1.0, content)
}

/// J_λ(1^N) = ∏ (Nθ + a′ − θl′)/(a + θl + θ); zero when ℓ(λ) > N.
pub fn jack_principal(lambda: &Partition, n: usize, theta: Theta) -> LogValue {
    if lambda.length() > n {
        return LogValue::ZERO;
    }
    let th = theta.value();
    let log = lambda
        .cells()
        .map(|c| {
            let (upper_hook, _, content) = box_terms(lambda, c, n, th);
            content.ln() - upper_hook.ln()
        })
        .sum();
    LogValue::from_log(log)
}

/// J_λ(𝔯_s) = (sθ)^{|λ|} ∏ 1/(a + θl + θ).
pub fn jack_plancherel(lambda: &Partition, s: f64, theta: Theta) -> LogValue {
    assert!(s >= 0.0, "Plancherel parameter must be nonnegative");
    if lambda.is_empty() {
        return LogValue::ONE;
    }
    if s == 0.0 {
        return LogValue::ZERO;
    }
    let th = theta.value();
    let hooks: f64 = lambda
        .cells()
        .map(|c| box_terms(lambda, c, 0, th).0.ln())
        .sum();
    LogValue::from_log(lambda.size() as f64 * (s * th).ln() - hooks)
}

/// J̃_λ / J_λ = ∏ (a + θl + θ)/(a + θl + 1).
pub fn dual_factor(lambda: &Partition, theta: Theta) -> LogValue {
    let th = theta.value();
    let log = lambda
        .cells()
        .map(|c| {
            let (upper, lower, _) = box_terms(lambda, c, 0, th);
            upper.ln() - lower.ln()
        })
        .sum();
    LogValue::from_log(log)
}

/// Branching coefficient ψ_{ν/μ} = J_{ν/μ}(1): the double product of
/// Pochhammer ratios over 1 ≤ i ≤ j ≤ k−1, with k = max(ℓ(ν), ℓ(μ)+1).
/// Zero unless μ ≺ ν.
pub fn psi(nu: &Partition, mu: &Partition, theta: Theta) -> LogValue {
    if !interlaces(mu, nu) {
        return LogValue::ZERO;
    }
    let th = theta.value();
    let k = nu.length().max(mu.length() + 1);
    let mut log = 0.0;
    for j in 1..k {
        let len = mu.row(j) - nu.row(j + 1);
        if len == 0 {
            continue;
        }
        let mu_j = f64::from(mu.row(j));
        for i in 1..=j {
            let shift = th * (j - i) as f64;
            let mm = f64::from(mu.row(i)) - mu_j + shift;
            let nm = f64::from(nu.row(i)) - mu_j + shift;
            log += ln_pochhammer(mm + th, len) - ln_pochhammer(mm + 1.0, len)
                + ln_pochhammer(nm + 1.0, len)
                - ln_pochhammer(nm + th, len);
        }
    }
    LogValue::from_log(log)
}

/// J̃_{μ/λ}(𝔯_1) for μ = λ ⊔ (i, j), arms measured in λ.
pub fn single_box_dual_skew(lambda: &Partition, cell: Cell, theta: Theta) -> Result<LogValue> {
    if !lambda.is_addable(cell) {
        return Err(Error::CellNotAddable {
            row: cell.row,
            col: cell.col,
            diagram: lambda.to_string(),
        });
    }
    let th = theta.value();
    let mut log = th.ln();
    for k in 1..cell.row {
        let a = f64::from(lambda.row(k)) - cell.col as f64;
        let d = (cell.row - k) as f64;
        log += (a + th * (d + 1.0)).ln() - (a + th * d).ln() + (a + 1.0 + th * (d - 1.0)).ln()
            - (a + 1.0 + th * d).ln();
    }
    Ok(LogValue::from_log(log))
}

fn check_single_level(lambda: &Partition, cell: Cell, n: usize) -> Result<()> {
    if !lambda.is_addable(cell) {
        return Err(Error::CellNotAddable {
            row: cell.row,
            col: cell.col,
            diagram: lambda.to_string(),
        });
    }
    if cell.row > n {
        return Err(Error::TooManyRows {
            diagram: format!("{lambda} ⊔ ({},{})", cell.row, cell.col),
            level: n,
        });
    }
    Ok(())
}

/// Jump rate q_{λ→λ⊔□} of the single-level chain on diagrams with at most N rows.
pub fn single_level_rate(lambda: &Partition, cell: Cell, n: usize, theta: Theta) -> Result<f64> {
    check_single_level(lambda, cell, n)?;
    Ok(single_level_row_rate(
        &lambda.padded(n),
        cell.row,
        theta.value(),
    ))
}

/// The same rate through the full ratio J_{λ⊔□}(1^N)/J_λ(1^N) · J̃_{λ⊔□/λ}(𝔯_1).
/// Costs O(|λ|); used to cross-check the telescoped form.
pub fn single_level_rate_via_jack(
    lambda: &Partition,
    cell: Cell,
    n: usize,
    theta: Theta,
) -> Result<f64> {
    check_single_level(lambda, cell, n)?;
    let mu = lambda.with_box(cell.row)?;
    let ratio = jack_principal(&mu, n, theta) / jack_principal(lambda, n, theta);
    Ok((ratio * single_box_dual_skew(lambda, cell, theta)?).value())
}

/// Telescoped single-level rate for adding a box to row `i` of `rows` (length N):
/// θ ∏_{k>i} (d_k + θ(k−i+1))/(d_k + θ(k−i)) ∏_{l<i} (e_l + θ(i−l−1))/(e_l + θ(i−l)),
/// d_k = λ_i − λ_k, e_l = λ_l − λ_i. Vanishes automatically when λ_{i−1} = λ_i.
pub(crate) fn single_level_row_rate(rows: &[u32], i: usize, theta: f64) -> f64 {
    let n = rows.len();
    let li = f64::from(rows[i - 1]);
    let mut rate = theta;
    for k in (i + 1)..=n {
        let d = li - f64::from(rows[k - 1]);
        let m = (k - i) as f64;
        rate *= (d + theta * (m + 1.0)) / (d + theta * m);
    }
    for l in 1..i {
        let e = f64::from(rows[l - 1]) - li;
        let m = (i - l) as f64;
        rate *= (e + theta * (m - 1.0)) / (e + theta * m);
    }
    rate
}

/// Rates for every row 1..=N of a padded row vector (zero where not addable).
pub fn single_level_rates(lambda: &Partition, n: usize, theta: Theta) -> Vec<f64> {
    let rows = lambda.padded(n);
    let mut out = vec![0.0; n];
    single_level_rates_into(&rows, theta.value(), &mut out);
    out
}

pub(crate) fn single_level_rates_into(rows: &[u32], theta: f64, out: &mut [f64]) {
    for i in 1..=rows.len() {
        out[i - 1] = if i == 1 || rows[i - 2] > rows[i - 1] {
            single_level_row_rate(rows, i, theta)
        } else {
            0.0
        };
    }
}

fn check_multilevel(lk: &Partition, lk1: &Partition, level: usize, cell: Cell) -> Result<()> {
    if level == 0 || lk.length() > level || lk1.length() > level - 1 {
        return Err(Error::TooManyRows {
            diagram: format!("{lk1} / {lk}"),
            level,
        });
    }
    if !interlaces(lk1, lk) {
        return Err(Error::Interlacing(format!("{lk1} does not interlace {lk}")));
    }
    if !lk.is_addable(cell) {
        return Err(Error::CellNotAddable {
            row: cell.row,
            col: cell.col,
            diagram: lk.to_string(),
        });
    }
    if cell.row > level {
        return Err(Error::TooManyRows {
            diagram: format!("{lk} ⊔ ({},{})", cell.row, cell.col),
            level,
        });
    }
    Ok(())
}

/// Own-clock rate of adding `cell` to λᵏ given λᵏ⁻¹:
/// J̃_{(λᵏ⊔□)/λᵏ}(𝔯_1) · ψ_{(λᵏ⊔□)/λᵏ⁻¹} / ψ_{λᵏ/λᵏ⁻¹}. Exactly zero when the
/// enlarged diagram no longer interlaces λᵏ⁻¹ from above (blocking).
pub fn multilevel_rate(
    lk: &Partition,
    lk1: &Partition,
    level: usize,
    cell: Cell,
    theta: Theta,
) -> Result<f64> {
    check_multilevel(lk, lk1, level, cell)?;
    let grown = lk.with_box(cell.row)?;
    let num = psi(&grown, lk1, theta);
    if num.is_zero() {
        return Ok(0.0);
    }
    let ratio = num / psi(lk, lk1, theta);
    Ok((single_box_dual_skew(lk, cell, theta)? * ratio).value())
}

/// Closed-form own-clock rate for row `i` of level k; `upper` has k entries,
/// `lower` has k−1 entries.
pub(crate) fn multilevel_row_rate(upper: &[u32], lower: &[u32], i: usize, theta: f64) -> f64 {
    let k = upper.len();
    let li = f64::from(upper[i - 1]);
    let mut rate = theta;
    for m in 1..i {
        let d = f64::from(upper[m - 1]) - li;
        let e = f64::from(lower[m - 1]) - li;
        let s = (i - m) as f64;
        rate *= (d - 1.0 + theta * (s + 1.0)) / (d + theta * s);
        rate *= (e + theta * (s - 1.0)) / (e - 1.0 + theta * s);
    }
    for n in i..k {
        let d = li - f64::from(upper[n]);
        let e = li - f64::from(lower[n - 1]);
        let s = (n - i) as f64;
        rate *= (d + theta * s + 1.0) / (d + theta * (s + 1.0));
        rate *= (e + theta * (s + 1.0)) / (e + theta * s + 1.0);
    }
    rate
}

/// Own-clock rates for all rows of level k, zero where the box is not addable
/// or is blocked by level k−1.
pub fn multilevel_rates(lk: &Partition, lk1: &Partition, level: usize, theta: Theta) -> Vec<f64> {
    let upper = lk.padded(level);
    let lower = lk1.padded(level.saturating_sub(1));
    let mut out = vec![0.0; level];
    multilevel_rates_into(&upper, &lower, theta.value(), &mut out);
    out
}

pub(crate) fn multilevel_rates_into(upper: &[u32], lower: &[u32], theta: f64, out: &mut [f64]) {
    for i in 1..=upper.len() {
        let addable = i == 1 || upper[i - 2] > upper[i - 1];
        let unblocked = i == 1 || lower[i - 2] > upper[i - 1];
        out[i - 1] = if addable && unblocked {
            multilevel_row_rate(upper, lower, i, theta)
        } else {
            0.0
        };
    }
}

/// H_θ(1^N; 𝔯_s) = exp(θ N s).
pub fn h_norm(n: usize, s: f64, theta: Theta) -> LogValue {
    let p1 = Specialization::PrincipalOnes(n).power_sum(1)
        * Specialization::PlancherelGamma(s).power_sum(1);
    LogValue::from_log(theta.value() * p1)
}

/// Jack measure 𝒥_{1^N;𝔯_s}(λ), zero when ℓ(λ) > N.
pub fn jack_measure(lambda: &Partition, n: usize, s: f64, theta: Theta) -> LogValue {
    assert!(s >= 0.0 && n >= 1);
    if lambda.length() > n {
        return LogValue::ZERO;
    }
    if lambda.is_empty() {
        return LogValue::from_log(-theta.value() * s * n as f64);
    }
    if s == 0.0 {
        return LogValue::ZERO;
    }
    let th = theta.value();
    let boxes: f64 = lambda
        .cells()
        .map(|c| {
            let (upper, lower, content) = box_terms(lambda, c, n, th);
            content.ln() - upper.ln() - lower.ln()
        })
        .sum();
    LogValue::from_log(-th * s * n as f64 + lambda.size() as f64 * (s * th).ln() + boxes)
}

/// Conditional probability of λ¹, …, λᴺ⁻¹ given λᴺ under a Jack–Gibbs law:
/// ψ_{λᴺ/λᴺ⁻¹} ⋯ ψ_{λ²/λ¹} J_{λ¹}(1) / J_{λᴺ}(1^N).
pub fn jack_gibbs_weight(arr: &InterlacingArray, theta: Theta) -> LogValue {
    let n = arr.depth();
    let mut w = jack_principal(arr.level(1), 1, theta);
    for k in 2..=n {
        w = w * psi(arr.level(k), arr.level(k - 1), theta);
    }
    let denom = jack_principal(arr.top(), n, theta);
    w.checked_div(&denom).unwrap_or(LogValue::ZERO)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(rows: &[u32]) -> Partition {
        Partition::new(rows.to_vec()).unwrap()
    }

    fn th(v: f64) -> Theta {
        Theta::new(v).unwrap()
    }

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-12 * (1.0 + b.abs())
    }

    #[test]
    fn principal_examples() {
        for t in [0.5, 1.0, 2.5] {
            assert!(close(
                jack_principal(&Partition::empty(), 3, th(t)).value(),
                1.0
            ));
            assert!(close(jack_principal(&p(&[1]), 4, th(t)).value(), 4.0));
            assert!(jack_principal(&p(&[1, 1, 1]), 2, th(t)).is_zero());
            assert!(close(
                jack_principal(&p(&[2]), 2, th(t)).value(),
                2.0 * (2.0 * t + 1.0) / (1.0 + t)
            ));
        }
        // Schur case: s_λ(1^N) counts SSYT; s_{(2,1)}(1,1,1) = 8
        assert!(close(jack_principal(&p(&[2, 1]), 3, th(1.0)).value(), 8.0));
    }

    #[test]
    fn plancherel_and_dual_examples() {
        let (s, t) = (1.7, 0.8);
        assert!(close(
            jack_plancherel(&Partition::empty(), s, th(t)).value(),
            1.0
        ));
        assert!(close(jack_plancherel(&p(&[1]), s, th(t)).value(), s));
        assert!(close(
            jack_plancherel(&p(&[2]), s, th(t)).value(),
            s * s * t / (1.0 + t)
        ));
        assert!(close(dual_factor(&Partition::empty(), th(t)).value(), 1.0));
        assert!(close(dual_factor(&p(&[1]), th(t)).value(), t));
        assert!(close(
            dual_factor(&p(&[2]), th(t)).value(),
            t * (1.0 + t) / 2.0
        ));
    }

    #[test]
    fn psi_examples() {
        let t = 1.3;
        for lam in [p(&[]), p(&[3, 1]), p(&[2, 2, 1])] {
            assert!(close(psi(&lam, &lam, th(t)).value(), 1.0));
        }
        assert!(close(
            psi(&p(&[1]), &Partition::empty(), th(t)).value(),
            1.0
        ));
        assert!(close(
            psi(&p(&[2]), &p(&[1]), th(t)).value(),
            2.0 * t / (1.0 + t)
        ));
        assert!(psi(&p(&[1, 1]), &p(&[2]), th(t)).is_zero());
    }

    #[test]
    fn dual_skew_examples() {
        let t = 0.7;
        assert!(close(
            single_box_dual_skew(&Partition::empty(), Cell::new(1, 1), th(t))
                .unwrap()
                .value(),
            t
        ));
        assert!(close(
            single_box_dual_skew(&p(&[4, 2]), Cell::new(1, 5), th(t))
                .unwrap()
                .value(),
            t
        ));
        assert!(close(
            single_box_dual_skew(&p(&[1]), Cell::new(2, 1), th(t))
                .unwrap()
                .value(),
            2.0 * t / (1.0 + t)
        ));
        assert!(single_box_dual_skew(&p(&[1]), Cell::new(2, 2), th(t)).is_err());
        // consistency with J̃_{(1)}(𝔯_1) = J_{(1)}(𝔯_1) · dual factor = θ
        let via = jack_plancherel(&p(&[1]), 1.0, th(t)) * dual_factor(&p(&[1]), th(t));
        assert!(close(via.value(), t));
    }

    #[test]
    fn single_level_rate_examples() {
        let t = 1.9;
        for m in 0..6u32 {
            let lam = p(&[m]);
            let r = single_level_rate(&lam, Cell::new(1, m as usize + 1), 1, th(t)).unwrap();
            assert!(close(r, t));
        }
        assert!(close(
            single_level_rate(&Partition::empty(), Cell::new(1, 1), 2, th(t)).unwrap(),
            2.0 * t
        ));
        let r = single_level_rate(&p(&[1]), Cell::new(2, 1), 2, th(t)).unwrap();
        let brute = (jack_principal(&p(&[1, 1]), 2, th(t)) / jack_principal(&p(&[1]), 2, th(t)))
            .value()
            * 2.0
            * t
            / (1.0 + t);
        assert!(close(r, brute));
        let r1 = single_level_rate(&p(&[1]), Cell::new(1, 2), 2, th(t)).unwrap();
        assert!(close(r + r1, 2.0 * t));
        assert!(single_level_rate(&p(&[1, 1]), Cell::new(3, 1), 2, th(t)).is_err());
    }

    #[test]
    fn multilevel_rate_examples() {
        let t = 0.6;
        let e = Partition::empty();
        assert!(close(
            multilevel_rate(&e, &e, 2, Cell::new(1, 1), th(t)).unwrap(),
            t
        ));
        assert!(multilevel_rate(&e, &e, 2, Cell::new(2, 1), th(t)).is_err());
        assert_eq!(multilevel_rates(&e, &e, 2, th(t))[1], 0.0);
        assert!(close(
            multilevel_rate(&p(&[1]), &p(&[1]), 2, Cell::new(2, 1), th(t)).unwrap(),
            2.0 * t / (1.0 + t)
        ));
        // blocked from above: λ² = (1), λ¹ = (0) cannot grow row 2
        assert_eq!(
            multilevel_rate(&p(&[1]), &e, 2, Cell::new(2, 1), th(t)).unwrap(),
            0.0
        );
    }

    #[test]
    fn level_marginal_at_empty_state() {
        let t = 1.4;
        let e = Partition::empty();
        let own = multilevel_rates(&e, &e, 2, th(t))[0];
        let push_from_level_one = multilevel_rates(&e, &e, 1, th(t))[0];
        assert!(close(
            own + push_from_level_one,
            single_level_rates(&e, 2, th(t))[0]
        ));
        assert!(close(own + push_from_level_one, 2.0 * t));
    }

    #[test]
    fn measure_examples() {
        let (n, s, t) = (2, 0.9, 1.5);
        let m0 = jack_measure(&Partition::empty(), n, s, th(t)).value();
        assert!(close(m0, (-t * s * n as f64).exp()));
        let m1 = jack_measure(&p(&[1]), n, s, th(t)).value();
        assert!(close(m1, m0 * n as f64 * t * s));
        assert!(close(h_norm(2, 1.0, th(1.0)).value(), 2f64.exp()));
        assert!(close(h_norm(5, 0.0, th(3.0)).value(), 1.0));
    }

    #[test]
    fn gibbs_examples() {
        let arr: InterlacingArray = "1".parse().unwrap();
        assert!(close(jack_gibbs_weight(&arr, th(2.0)).value(), 1.0));
        let arr: InterlacingArray = "1;1,1".parse().unwrap();
        assert!(close(jack_gibbs_weight(&arr, th(1.0)).value(), 1.0));
        for l1 in 0..=2 {
            let arr: InterlacingArray = format!("{l1};2,0").parse().unwrap();
            assert!(close(jack_gibbs_weight(&arr, th(1.0)).value(), 1.0 / 3.0));
        }
    }
}
