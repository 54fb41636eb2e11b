use jackflow::ensembles::{
    corners_log_density, dixon_anderson_check, hermite_log_density, link_batch, sample_corners,
    sample_corners_given_top, sample_hermite, theta_gibbs_link_log, EnsembleParams,
};
use jackflow::quadrature::TanhSinh;
use jackflow::rng::rng_from_seed;
use jackflow::statcheck::{chi2_histogram, ks_one_sample, ks_two_sample, mean_and_se};
use jackflow::{ConePoint, Theta, WeylPoint};
use nalgebra::{DMatrix, SymmetricEigen};
use proptest::prelude::*;
use rand::Rng;
use rand_distr::{ChiSquared, Distribution, Gamma, Normal, StandardNormal};
use statrs::distribution::{ContinuousCDF, Normal as SNormal};

fn th(v: f64) -> Theta {
    Theta::new(v).unwrap()
}

/// Dumitriu–Edelman tridiagonal model: eigenvalues have density
/// ∝ |Δ|^β exp(−Σλ²/2); scaled by √t for variance t.
fn tridiagonal_hermite(n: usize, beta: f64, t: f64, seed: u64) -> Vec<f64> {
    let mut rng = rng_from_seed(seed);
    let mut m = DMatrix::<f64>::zeros(n, n);
    let diag = Normal::new(0.0, 2f64.sqrt()).unwrap();
    for i in 0..n {
        m[(i, i)] = diag.sample(&mut rng);
        if i + 1 < n {
            let chi = ChiSquared::new(beta * (n - 1 - i) as f64)
                .unwrap()
                .sample(&mut rng)
                .sqrt();
            m[(i, i + 1)] = chi;
            m[(i + 1, i)] = chi;
        }
    }
    let mut ev: Vec<f64> = SymmetricEigen::new(m)
        .eigenvalues
        .iter()
        .map(|x| x * (t / 2.0).sqrt())
        .collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// Dixon–Anderson construction: with Dirichlet(θ,…,θ) weights w, the roots of
/// Σ w_j/(x − v_j) interlace v and follow the θ-Gibbs link law.
fn dirichlet_link(v: &[f64], theta: f64, rng: &mut impl Rng) -> Vec<f64> {
    let g = Gamma::new(theta, 1.0).unwrap();
    let w: Vec<f64> = v.iter().map(|_| g.sample(rng)).collect();
    (0..v.len() - 1)
        .map(|i| {
            let (mut lo, mut hi) = (v[i], v[i + 1]);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                let f: f64 = w.iter().zip(v).map(|(wj, vj)| wj / (mid - vj)).sum();
                if f > 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            0.5 * (lo + hi)
        })
        .collect()
}

#[test]
fn hermite_density_integrates_to_one() {
    let rule = TanhSinh::with_tol(1e-10).with_abs_tol(1e-15);
    for t in [0.5, 1.0, 2.0] {
        let p = EnsembleParams::new(2, th(t), 1.3).unwrap();
        let l = 14.0 * 1.3f64.sqrt();
        let total = rule
            .integrate(-l, l, |n1| {
                rule.integrate(n1.x, l, |n2| {
                    let y = WeylPoint::new(vec![n1.x, n2.x]).unwrap();
                    hermite_log_density(&y, &p).exp()
                })
                .unwrap()
            })
            .unwrap();
        assert!((total - 1.0).abs() <= 1e-6, "θ={t}: {total}");
    }
}

#[test]
fn hermite_density_scales_with_variance() {
    for t in [0.5, 2.0] {
        let (n, var) = (3usize, 2.7f64);
        let y = vec![-1.1, 0.2, 1.9];
        let p = EnsembleParams::new(n, th(t), var).unwrap();
        let p1 = EnsembleParams::new(n, th(t), 1.0).unwrap();
        let scaled: Vec<f64> = y.iter().map(|v| v / var.sqrt()).collect();
        let lhs = hermite_log_density(&WeylPoint::new(y).unwrap(), &p);
        // density_t(y) = t^{-N/2} density_1(y/√t)
        let rhs =
            hermite_log_density(&WeylPoint::new(scaled).unwrap(), &p1) - n as f64 / 2.0 * var.ln();
        assert!((lhs - rhs).abs() < 1e-12);
    }
}

#[test]
fn corners_density_integrates_to_one() {
    // N = 2: ∫∫_{y₁<y₂} ∫_{y₁}^{y₂} density d y¹ over the whole cone
    // The innermost integrand only sees x, so nodes rounded onto a singular
    // edge are dropped and very narrow intervals cannot meet a relative
    // tolerance; their best estimate is used, and they carry negligible mass.
    let rule = TanhSinh::with_tol(1e-9).with_abs_tol(1e-15);
    for t in [0.5, 1.0, 2.0] {
        let p = EnsembleParams::new(2, th(t), 0.8).unwrap();
        let l = 12.0;
        let total = rule
            .integrate(-l, l, |a| {
                rule.integrate(a.x, l, |b| {
                    rule.estimate(a.x, b.x, |c| {
                        let cp = ConePoint::new(vec![vec![c.x], vec![a.x, b.x]]);
                        let v = cp
                            .map(|cp| corners_log_density(&cp, &p).exp())
                            .unwrap_or(0.0);
                        if v.is_finite() {
                            v
                        } else {
                            0.0
                        }
                    })
                    .unwrap()
                    .value
                })
                .unwrap()
            })
            .unwrap();
        assert!((total - 1.0).abs() <= 1e-6, "θ={t}: {total}");
    }
}

#[test]
fn link_integrates_to_one() {
    let rule = TanhSinh::with_tol(1e-8).with_abs_tol(1e-15);
    let finite = |v: f64| if v.is_finite() { v } else { 0.0 };
    for t in [0.5, 1.0, 2.0] {
        let v2 = [-0.7, 1.6];
        let total2 = rule
            .integrate(v2[0], v2[1], |n| {
                finite(theta_gibbs_link_log(&[n.x], &v2, th(t)).exp())
            })
            .unwrap();
        assert!((total2 - 1.0).abs() <= 1e-6, "k=2 θ={t}: {total2}");
        let v3 = [-1.0, 0.3, 2.2];
        let total3 = rule
            .integrate(v3[0], v3[1], |a| {
                rule.integrate(v3[1], v3[2], |b| {
                    finite(theta_gibbs_link_log(&[a.x, b.x], &v3, th(t)).exp())
                })
                .unwrap()
            })
            .unwrap();
        assert!((total3 - 1.0).abs() <= 1e-6, "k=3 θ={t}: {total3}");
    }
}

#[test]
fn dixon_anderson_on_random_points() {
    let mut rng = rng_from_seed(11);
    for t in [0.5, 1.0, 1.5, 2.0] {
        for m in 1..=2 {
            for _ in 0..3 {
                let mut v: Vec<f64> = (0..=m).map(|_| rng.random_range(-2.0..2.0)).collect();
                v.sort_by(f64::total_cmp);
                let (lhs, rhs) = dixon_anderson_check(&v, th(t)).unwrap();
                let tol = if m == 1 { 1e-6 } else { 1e-5 };
                assert!(
                    (lhs - rhs).abs() <= tol * rhs,
                    "θ={t} v={v:?}: {lhs} vs {rhs}"
                );
            }
        }
    }
}

fn cone_strategy() -> impl Strategy<Value = Vec<Vec<f64>>> {
    // top level then downward interlacing draws via fractions of each gap
    (
        proptest::collection::vec(0.05f64..2.0, 4),
        proptest::collection::vec(0.01f64..0.99, 6),
        -3.0f64..3.0,
    )
        .prop_map(|(gaps, fr, start)| {
            let mut top = vec![start];
            for g in gaps {
                top.push(top.last().unwrap() + g);
            }
            let mut levels = vec![top];
            let mut f = fr.into_iter().cycle();
            while levels[0].len() > 1 {
                let up = &levels[0];
                let next: Vec<f64> = up
                    .windows(2)
                    .map(|w| w[0] + f.next().unwrap() * (w[1] - w[0]))
                    .collect();
                levels.insert(0, next);
            }
            levels
        })
}

proptest! {
    #[test]
    fn corners_density_factorizes(levels in cone_strategy(), t in 0.3f64..3.0, var in 0.2f64..4.0) {
        let n = levels.len();
        let p = EnsembleParams::new(n, th(t), var).unwrap();
        let cp = ConePoint::new(levels.clone()).unwrap();
        let mut rhs = hermite_log_density(&WeylPoint::new(levels[n - 1].clone()).unwrap(), &p);
        for k in 1..n {
            rhs += theta_gibbs_link_log(&levels[k - 1], &levels[k], th(t));
        }
        let lhs = corners_log_density(&cp, &p);
        prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + lhs.abs()), "{lhs} vs {rhs}");
    }
}

#[test]
fn one_particle_hermite_is_gaussian() {
    let p = EnsembleParams::new(1, th(1.3), 2.0).unwrap();
    let s = sample_hermite(&p, 10_000, 5).unwrap();
    let xs: Vec<f64> = s.points.iter().map(|w| w.coords()[0]).collect();
    let g = SNormal::new(0.0, 2f64.sqrt()).unwrap();
    let (d, _) = ks_one_sample(&xs, |x| g.cdf(x)).unwrap();
    assert!(d <= 0.02, "D = {d}, diagnostics {:?}", s.diagnostics);
}

#[test]
fn hermite_gap_moment_matches_quadrature() {
    let p = EnsembleParams::new(2, th(1.0), 1.0).unwrap();
    let rule = TanhSinh::with_tol(1e-10).with_abs_tol(1e-15);
    let exact = rule
        .integrate(-14.0, 14.0, |a| {
            rule.integrate(a.x, 14.0, |b| {
                let y = WeylPoint::new(vec![a.x, b.x]).unwrap();
                (b.x - a.x).powi(2) * hermite_log_density(&y, &p).exp()
            })
            .unwrap()
        })
        .unwrap();
    let s = sample_hermite(&p, 10_000, 17).unwrap();
    let gaps: Vec<f64> = s
        .points
        .iter()
        .map(|w| (w.coords()[1] - w.coords()[0]).powi(2))
        .collect();
    let (m, se) = mean_and_se(&gaps);
    assert!((m - exact).abs() <= 3.0 * se, "{m} ± {se} vs {exact}");

    let long = sample_hermite(&p, 20_000, 17).unwrap();
    let gaps2: Vec<f64> = long
        .points
        .iter()
        .map(|w| (w.coords()[1] - w.coords()[0]).powi(2))
        .collect();
    let (m2, se2) = mean_and_se(&gaps2);
    assert!(
        (m2 - m).abs() <= 2.0 * (se * se + se2 * se2).sqrt(),
        "{m} vs {m2}"
    );
}

#[test]
fn hermite_sampler_matches_tridiagonal_model() {
    for t in [0.5, 1.0, 2.0] {
        let n = 3;
        let p = EnsembleParams::new(n, th(t), 1.0).unwrap();
        let mc = sample_hermite(&p, 5_000, 23).unwrap();
        let tri: Vec<Vec<f64>> = (0..5_000)
            .map(|i| tridiagonal_hermite(n, 2.0 * t, 1.0, 1000 + i))
            .collect();
        for c in 0..n {
            let a: Vec<f64> = mc.points.iter().map(|w| w.coords()[c]).collect();
            let b: Vec<f64> = tri.iter().map(|w| w[c]).collect();
            let (d, pv) = ks_two_sample(&a, &b).unwrap();
            assert!(
                d <= 0.05 && pv > 0.01 / n as f64,
                "θ={t} coord {c}: D={d} p={pv}"
            );
        }
    }
}

#[test]
fn link_sampler_is_uniform_at_theta_one() {
    let v = WeylPoint::new(vec![-0.5, 1.5]).unwrap();
    let xs: Vec<f64> = (0..10_000)
        .map(|i| {
            sample_corners_given_top(&v, th(1.0), i)
                .unwrap()
                .point
                .level(1)[0]
        })
        .collect();
    let (d, _) = ks_one_sample(&xs, |x| ((x + 0.5) / 2.0).clamp(0.0, 1.0)).unwrap();
    assert!(d <= 0.02, "D = {d}");
}

#[test]
fn link_sampler_theta_two_beta_shape() {
    let v = WeylPoint::new(vec![0.0, 1.0]).unwrap();
    let xs: Vec<f64> = (0..20_000)
        .map(|i| {
            sample_corners_given_top(&v, th(2.0), 100 + i)
                .unwrap()
                .point
                .level(1)[0]
        })
        .collect();
    let edges: Vec<f64> = (0..=20).map(|i| i as f64 / 20.0).collect();
    let (_, p) = chi2_histogram(&xs, |x| (x * (1.0 - x)).max(1e-300).ln(), &edges).unwrap();
    assert!(p > 0.01, "p = {p}");
}

#[test]
fn link_sampler_matches_dirichlet_construction() {
    for t in [0.5, 2.0] {
        let v = vec![-1.0, 0.2, 0.9, 2.5];
        let gibbs = link_batch(&vec![v.clone(); 8_000], th(t), 31);
        let mut rng = rng_from_seed(77);
        let exact: Vec<Vec<f64>> = (0..8_000)
            .map(|_| dirichlet_link(&v, t, &mut rng))
            .collect();
        for c in 0..3 {
            let a: Vec<f64> = gibbs.iter().map(|u| u[c]).collect();
            let b: Vec<f64> = exact.iter().map(|u| u[c]).collect();
            let (d, p) = ks_two_sample(&a, &b).unwrap();
            assert!(p > 0.01 / 3.0, "θ={t} coord {c}: D={d} p={p}");
        }
    }
}

#[test]
fn corners_samples_interlace_and_share_top() {
    let p = EnsembleParams::new(3, th(2.0), 1.0).unwrap();
    let c = sample_corners(&p, 500, 9).unwrap();
    let h = sample_hermite(&p, 500, 9).unwrap();
    assert_eq!(c.degenerate, 0);
    for (cp, hp) in c.points.iter().zip(&h.points) {
        assert!(cp.in_cone(0.0));
        assert_eq!(cp.top(), hp.coords());
    }
}

#[test]
fn normal_sampler_used_by_oracles_is_standard() {
    let mut rng = rng_from_seed(1);
    let xs: Vec<f64> = (0..10_000)
        .map(|_| StandardNormal.sample(&mut rng))
        .collect();
    let g = SNormal::new(0.0, 1.0).unwrap();
    assert!(ks_one_sample(&xs, |x| g.cdf(x)).unwrap().1 > 0.001);
}
