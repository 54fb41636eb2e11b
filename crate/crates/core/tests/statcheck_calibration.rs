use jackflow::rng::{derive_seed, rng_from_seed};
use jackflow::statcheck::{
    chi2_histogram, intertwining_test, ks_two_sample, poisson_dispersion, rate_expansion_probe,
    rate_expansion_probe_multilevel, P_FLOOR,
};
use jackflow::{ConePoint, Theta, WeylPoint};
use rand::Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};

const REPS: u64 = 100;

fn th(v: f64) -> Theta {
    Theta::new(v).unwrap()
}

fn normals(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = rng_from_seed(seed);
    (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
}

#[test]
fn ks_holds_its_level_under_the_null() {
    let passed = (0..REPS)
        .filter(|&r| {
            let a = normals(500, derive_seed(1, r));
            let b = normals(700, derive_seed(2, r));
            ks_two_sample(&a, &b).unwrap().1 > P_FLOOR
        })
        .count();
    assert!(passed >= 95, "{passed}/100");
}

#[test]
fn ks_sees_a_shift() {
    let a = normals(2000, 3);
    let b: Vec<f64> = normals(2000, 4).iter().map(|x| x + 0.3).collect();
    let (d, p) = ks_two_sample(&a, &b).unwrap();
    assert!(d > 0.05 && p < 1e-6, "D={d} p={p}");
}

#[test]
fn chi2_holds_its_level_under_the_null() {
    let edges: Vec<f64> = (0..=10).map(|k| k as f64 / 10.0).collect();
    let passed = (0..REPS)
        .filter(|&r| {
            let mut rng = rng_from_seed(derive_seed(5, r));
            let u: Vec<f64> = (0..1000).map(|_| rng.random::<f64>()).collect();
            chi2_histogram(&u, |_| 0.0, &edges).unwrap().1 > P_FLOOR
        })
        .count();
    assert!(passed >= 95, "{passed}/100");
}

#[test]
fn chi2_sees_the_wrong_shape() {
    // uniform draws against the Beta(2,2) shape
    let mut rng = rng_from_seed(6);
    let u: Vec<f64> = (0..2000).map(|_| rng.random::<f64>()).collect();
    let edges: Vec<f64> = (0..=10).map(|k| k as f64 / 10.0).collect();
    let (_, p) = chi2_histogram(&u, |x| (x * (1.0 - x)).ln(), &edges).unwrap();
    assert!(p < 1e-6);
}

#[test]
fn dispersion_holds_its_band_for_poisson_counts() {
    let law = Poisson::new(5.0).unwrap();
    let passed = (0..REPS)
        .filter(|&r| {
            let mut rng = rng_from_seed(derive_seed(7, r));
            let c: Vec<u64> = (0..2000).map(|_| law.sample(&mut rng) as u64).collect();
            poisson_dispersion(&c).unwrap().1
        })
        .count();
    assert!(passed >= 95, "{passed}/100");
}

#[test]
fn dispersion_rejects_doubled_counts() {
    let law = Poisson::new(5.0).unwrap();
    let mut rng = rng_from_seed(8);
    let c: Vec<u64> = (0..2000).map(|_| 2 * law.sample(&mut rng) as u64).collect();
    let (index, pass) = poisson_dispersion(&c).unwrap();
    assert!(!pass && index > 1.5);
}

#[test]
fn two_particle_expansion_is_bounded() {
    let table = rate_expansion_probe(
        &WeylPoint::new(vec![-1.0, 1.0]).unwrap(),
        th(1.0),
        &[1e-2, 1e-4, 1e-6],
    )
    .unwrap();
    assert!(table.bounded, "{:?}", table.growth);
    assert_eq!(table.rows.len(), 3);
    assert!(table.rows.iter().all(|r| r.sup.is_finite()));
}

#[test]
fn multilevel_expansion_is_bounded() {
    let y = ConePoint::new(vec![vec![0.3], vec![-0.8, 1.2]]).unwrap();
    for t in [0.5, 2.0] {
        let table = rate_expansion_probe_multilevel(&y, th(t), &[1e-2, 1e-4, 1e-6]).unwrap();
        assert!(table.bounded, "θ={t}: {:?}", table.growth);
    }
}

#[test]
fn intertwining_at_time_zero_compares_link_draws() {
    // at t = 0 both pipelines are link draws from independent Hermite tops
    let reports = intertwining_test(3, th(1.5), 0.0, 2000, 1e-2, 11).unwrap();
    assert_eq!(reports.len(), 2);
    assert!(reports.iter().all(|r| r.pass), "{reports:?}");
}

#[test]
fn intertwining_at_small_size() {
    let reports = intertwining_test(2, th(1.0), 0.1, 2000, 2e-3, 12).unwrap();
    assert!(reports.iter().all(|r| r.pass), "{reports:?}");
}

#[test]
fn intertwining_rejects_single_particle() {
    assert!(intertwining_test(1, th(1.0), 0.1, 10, 1e-2, 0).is_err());
}
