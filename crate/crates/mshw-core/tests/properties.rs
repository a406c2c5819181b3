//! Property tests over randomized service laws and driver paths.

use mshw_core::grid::GridPath;
use mshw_core::linalg::SquareMat;
use mshw_core::maps::{self, MapCoefficients, MapVariant, Quadrature, SolveOptions};
use mshw_core::phase_type::PhaseType;
use mshw_core::random;
use mshw_core::stats;
use proptest::prelude::*;

/// Valid, well-balanced phase-type parameters: every phase carries initial
/// mass (so all phases are reachable), rates within one decade, routing rows
/// bounded away from stochastic.
fn phase_type_strategy() -> impl Strategy<Value = PhaseType> {
    (1usize..=4)
        .prop_flat_map(|k| {
            let p = proptest::collection::vec(0.1f64..1.0, k);
            let nu = proptest::collection::vec(0.5f64..5.0, k);
            let rows = proptest::collection::vec(proptest::collection::vec(0.0f64..1.0, k), k);
            let budgets = proptest::collection::vec(0.0f64..0.85, k);
            (Just(k), p, nu, rows, budgets)
        })
        .prop_map(|(k, mut p, nu, rows, budgets)| {
            let total: f64 = p.iter().sum();
            for v in p.iter_mut() {
                *v /= total;
            }
            let mut routing = SquareMat::zeros(k);
            for (i, row) in rows.iter().enumerate() {
                let mut off: f64 = 0.0;
                for (j, &v) in row.iter().enumerate() {
                    if j != i {
                        off += v;
                    }
                }
                if off > 0.0 {
                    for (j, &v) in row.iter().enumerate() {
                        if j != i {
                            routing.set(i, j, v / off * budgets[i]);
                        }
                    }
                }
            }
            PhaseType::new(p, nu, routing).expect("constructed parameters are valid")
        })
}

fn step_path(zdim: usize, dt: f64, horizon: f64, seed: u64) -> GridPath {
    let mut rng = random::stream(seed, 0);
    let mut y = GridPath::zeros(zdim, dt, horizon).unwrap();
    let mut level: Vec<f64> =
        (0..=zdim).map(|_| 2.0 * random::uniform(&mut rng) - 1.0).collect();
    for i in 0..y.num_points() {
        if random::uniform(&mut rng) < 0.08 {
            for l in level.iter_mut() {
                *l = 2.0 * random::uniform(&mut rng) - 1.0;
            }
        }
        y.point_mut(i).copy_from_slice(&level);
    }
    y
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn load_vector_identities(ph in phase_type_strategy()) {
        let gamma = ph.load_vector();
        prop_assert!((gamma.iter().sum::<f64>() - 1.0).abs() < 1e-10);
        let mu_p: Vec<f64> = ph.initial_law().iter().map(|v| ph.rate() * v).collect();
        let res = ph.rate_matrix().matvec(gamma);
        for (a, b) in res.iter().zip(&mu_p) {
            prop_assert!((a - b).abs() <= 1e-10);
        }
        prop_assert!(ph.mean() > 0.0);
        prop_assert!(ph.variance() >= 0.0);
    }

    #[test]
    fn selector_covariances_are_psd(ph in phase_type_strategy()) {
        for k in 0..=ph.phases() {
            let h = ph.routing_cov(k).unwrap();
            for i in 0..ph.phases() {
                for j in 0..ph.phases() {
                    prop_assert!((h.get(i, j) - h.get(j, i)).abs() < 1e-15);
                }
            }
            let (vals, _) = h.eigen_sym();
            prop_assert!(vals.iter().all(|&v| v >= -1e-12));
        }
    }

    #[test]
    fn cdf_is_monotone_and_saturates(ph in phase_type_strategy()) {
        let hi = 40.0 * ph.mean();
        let mut prev = 0.0;
        for i in 0..=200 {
            let v = ph.cdf(hi * i as f64 / 200.0).unwrap();
            prop_assert!(v >= prev - 1e-12);
            prop_assert!((0.0..=1.0).contains(&v));
            prev = v;
        }
        prop_assert!(1.0 - prev < 1e-6);
    }

    #[test]
    fn sampler_mean_tracks_algebra(ph in phase_type_strategy(), seed in 0u64..1000) {
        let mut rng = random::stream(seed, 0);
        let n = 20_000;
        let total: f64 = (0..n).map(|_| ph.sample(&mut rng).duration).sum();
        let mean = total / n as f64;
        let se = (ph.variance() / n as f64).sqrt();
        prop_assert!((mean - ph.mean()).abs() < 6.0 * se,
            "mean {mean} vs {} (se {se})", ph.mean());
    }

    #[test]
    fn maps_are_positively_homogeneous(
        ph in phase_type_strategy(),
        alpha in 0.0f64..3.0,
        a in prop_oneof![Just(1e-3), Just(0.1), Just(2.0), Just(50.0), Just(1e3)],
        seed in 0u64..1000,
    ) {
        let k = ph.phases();
        let y = step_path(k, 0.02, 1.5, seed);
        for variant in [MapVariant::Phi, MapVariant::Psi] {
            let coeff = MapCoefficients::new(variant, alpha, ph.initial_law(), ph.rate_matrix());
            let base = maps::picard_solve(&coeff, &y, &SolveOptions::default()).unwrap();
            let scaled = maps::picard_solve(&coeff, &y.scale(a), &SolveOptions::default()).unwrap();
            let d = scaled.sup_distance(&base.scale(a));
            prop_assert!(d <= a * 1e-9 + 1e-12, "a={a}: {d:e}");
        }
    }

    #[test]
    fn picard_fixed_point_residual(
        ph in phase_type_strategy(),
        alpha in 0.0f64..3.0,
        seed in 0u64..1000,
        left in proptest::bool::ANY,
    ) {
        let k = ph.phases();
        let y = step_path(k, 0.01, 1.0, seed);
        let quadrature = if left { Quadrature::LeftPoint } else { Quadrature::Trapezoid };
        let opts = SolveOptions { quadrature, ..SolveOptions::default() };
        let coeff = MapCoefficients::new(MapVariant::Phi, alpha, ph.initial_law(), ph.rate_matrix());
        let x = maps::picard_solve(&coeff, &y, &opts).unwrap();
        let swept = maps::residual_sweep(&coeff, &y, &x, quadrature);
        prop_assert!(swept.sup_distance(&x) <= 2.0 * opts.tolerance);
    }

    #[test]
    fn ks_statistic_bounds_and_permutation_invariance(
        mut a in proptest::collection::vec(-5.0f64..5.0, 2..60),
        b in proptest::collection::vec(-5.0f64..5.0, 2..60),
    ) {
        let r = stats::ks_two_sample(&a, &b).unwrap();
        prop_assert!((0.0..=1.0).contains(&r.statistic));
        prop_assert!((0.0..=1.0).contains(&r.p_value));
        prop_assert!(stats::ks_two_sample(&a, &a).unwrap().statistic == 0.0);
        a.reverse();
        let r2 = stats::ks_two_sample(&a, &b).unwrap();
        prop_assert!(r2.statistic == r.statistic);
    }
}
