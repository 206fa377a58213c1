use std::sync::Arc;

use hypercone::corpus::{scaling_map, snowflake_map};
use hypercone::verify::{self, check_theorem, verify_map, PairBudget, ReportSettings};
use hypercone::*;
use proptest::prelude::*;

fn kind() -> impl Strategy<Value = GeneratorKind> {
    prop::sample::select(GeneratorKind::ALL.to_vec())
}

fn space(n: usize, kind: GeneratorKind, seed: u64) -> Arc<Space> {
    Arc::new(generate_space(kind, n, seed, &GeneratorParams::default()).unwrap())
}

fn config() -> ProptestConfig {
    ProptestConfig {
        cases: 24,
        ..ProptestConfig::default()
    }
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn gromov_products_are_non_negative(kind in kind(), n in 3usize..12, seed in 0u64..1000) {
        let s = space(n, kind, seed);
        for x in 0..n {
            for y in 0..n {
                for o in 0..n {
                    prop_assert!(gromov_product(&s, x, y, o).unwrap() >= -1e-12);
                }
            }
        }
    }

    #[test]
    fn delta_scales_linearly(kind in kind(), n in 4usize..14, seed in 0u64..1000, c in 0.01f64..100.0) {
        let s = space(n, kind, seed);
        let d = delta_hyperbolicity(&s).delta;
        let dc = delta_hyperbolicity(&s.scaled(c).unwrap()).delta;
        prop_assert!((dc - c * d).abs() <= 1e-9 * (c * d).max(1.0));
    }

    #[test]
    fn snowflakes_are_metrics(kind in kind(), n in 3usize..20, seed in 0u64..1000, alpha in 0.01f64..=1.0) {
        let s = space(n, kind, seed);
        let w = snowflake_space(&s, alpha).unwrap();
        prop_assert!(validate_metric(&w.rows(), None, 1e-9).is_ok());
    }

    #[test]
    fn rho_is_a_scale_invariant_metric(
        kind in kind(),
        seed in 0u64..1000,
        pts in prop::collection::vec((0usize..8, -12i32..12, 0.5f64..2.0), 3),
        c in 0.001f64..1000.0,
    ) {
        let s = space(8, kind, seed);
        let p: Vec<Point> = pts.iter().map(|&(b, k, m)| ConePoint::new(b, m * 2f64.powi(k)).unwrap()).collect();
        let (a, b, q) = (p[0], p[1], p[2]);
        prop_assert_eq!(rho_h(&s, a, b), rho_h(&s, b, a));
        prop_assert_eq!(rho_h(&s, a, a), 0.0);
        if a != b {
            prop_assert!(rho_h(&s, a, b) > 0.0);
        }
        prop_assert!(rho_h(&s, a, q) <= rho_h(&s, a, b) + rho_h(&s, b, q) + 1e-9);
        let sc = s.scaled(c).unwrap();
        let up = |p: Point| ConePoint::new(p.base, p.height * c).unwrap();
        prop_assert!((rho_h(&sc, up(a), up(b)) - rho_h(&s, a, b)).abs() <= 1e-12 * rho_h(&s, a, b).max(1.0));
    }

    #[test]
    fn rho_and_d_h_agree_on_rays(x in 0usize..5, s in -30f64..30.0, t in -30f64..30.0) {
        let z = space(5, GeneratorKind::Circle, 0);
        let (p, q) = (ConePoint::new(x, s.exp2()).unwrap(), ConePoint::new(x, t.exp2()).unwrap());
        prop_assert!((rho_h(&z, p, q) - d_h(&z, p, q)).abs() <= 1e-12 * rho_h(&z, p, q).max(1.0));
    }

    #[test]
    fn lambda_is_non_increasing_in_theta(kind in kind(), n in 4usize..16, seed in 0u64..1000, alpha in 0.2f64..=1.0) {
        let f = snowflake_map(space(n, kind, seed), alpha).unwrap();
        let mut prev = f64::INFINITY;
        for k in 0..20 {
            let lambda = fit_power_qs(&f, 1.0 + 0.25 * k as f64).lambda;
            prop_assert!(lambda <= prev);
            prev = lambda;
        }
    }

    #[test]
    fn lambda_ignores_dyadic_scaling(kind in kind(), n in 4usize..16, seed in 0u64..1000, kz in -8i32..8, kw in -8i32..8, theta in 1.0f64..4.0) {
        let f = snowflake_map(space(n, kind, seed), 0.5).unwrap();
        let g = PointMap::identity(
            Arc::new(f.source.scaled(2f64.powi(kz)).unwrap()),
            Arc::new(f.target.scaled(2f64.powi(kw)).unwrap()),
        ).unwrap();
        prop_assert_eq!(fit_power_qs(&f, theta).lambda, fit_power_qs(&g, theta).lambda);
    }

    #[test]
    fn lambda_nearly_ignores_any_scaling(kind in kind(), n in 4usize..16, seed in 0u64..1000, c in 0.01f64..100.0, theta in 1.0f64..4.0) {
        let f = snowflake_map(space(n, kind, seed), 0.5).unwrap();
        let g = scaling_map(f.target.clone(), c).unwrap();
        let fg = compose(&f, &g).unwrap();
        let (a, b) = (fit_power_qs(&f, theta).lambda, fit_power_qs(&fg, theta).lambda);
        prop_assert!((a - b).abs() <= 1e-12 * a);
    }

    /// `g o f` is a power quasi-symmetry at `theta_f theta_g` with
    /// `lambda <= lambda_g lambda_f^(theta_g + 1/theta_g)`.
    #[test]
    fn composition_stays_quasisymmetric(
        n in 4usize..14,
        seed in 0u64..1000,
        a in 0.3f64..=1.0,
        b in 0.3f64..=1.0,
        theta_f in 1.0f64..3.0,
        theta_g in 1.0f64..3.0,
    ) {
        let f = snowflake_map(space(n, GeneratorKind::EuclideanCloud, seed), a).unwrap();
        let g = snowflake_map(f.target.clone(), b).unwrap();
        let lf = fit_power_qs(&f, theta_f).lambda;
        let lg = fit_power_qs(&g, theta_g).lambda;
        let composed = fit_power_qs(&compose(&f, &g).unwrap(), theta_f * theta_g).lambda;
        prop_assert!(composed <= lg * lf.powf(theta_g + 1.0 / theta_g) * (1.0 + 1e-9));
    }

    #[test]
    fn inverse_fits_at_the_same_theta(n in 4usize..14, seed in 0u64..1000, alpha in 0.3f64..=1.0) {
        let f = snowflake_map(space(n, GeneratorKind::EuclideanCloud, seed), alpha).unwrap();
        let grid = ThetaGrid::default();
        let cap = 1.5;
        if let Ok(env) = fit_theta_envelope(&f, cap, &grid, &TripleScan::default()) {
            let inv = fit_power_qs(&invert_map(&f), env.fit.theta);
            prop_assert!(inv.lambda.is_finite());
            let back = invert_map(&invert_map(&f));
            prop_assert_eq!(back.pairing(), f.pairing());
        }
    }

    #[test]
    fn level_maps_are_continuous_monotone_and_affine(kind in kind(), n in 3usize..30, seed in 0u64..1000, alpha in 0.2f64..=1.0) {
        let ext = extend_map(&snowflake_map(space(n, kind, seed), alpha).unwrap());
        for x in 0..n {
            let phi = &ext.per_point[x];
            let levels = &ext.spectra[x].levels;
            let (lo, hi) = (levels[0] as f64 - 4.0, *levels.last().unwrap() as f64 + 4.0);
            let mut prev = f64::NEG_INFINITY;
            for k in 0..=200 {
                let t = lo + (hi - lo) * k as f64 / 200.0;
                let v = phi.eval(t);
                prop_assert!(v >= prev);
                prev = v;
            }
            for &l in levels {
                let l = l as f64;
                let h = 1e-9;
                prop_assert!((phi.eval(l - h) - phi.eval(l)).abs() < 1e-8);
                prop_assert!((phi.eval(l + h) - phi.eval(l)).abs() < 1e-8);
            }
            for w in levels.windows(2) {
                let (u, v) = (w[0] as f64, w[1] as f64);
                for mu in [0.1, 0.37, 0.5, 0.93] {
                    let t = (1.0 - mu) * u + mu * v;
                    let affine = (1.0 - mu) * phi.eval(u) + mu * phi.eval(v);
                    prop_assert!((phi.eval(t) - affine).abs() <= 1e-12 * affine.abs().max(1.0));
                }
            }
            // Tails have slope one.
            prop_assert!((phi.eval(lo - 10.0) - phi.eval(lo) + 10.0).abs() < 1e-9);
            prop_assert!((phi.eval(hi + 10.0) - phi.eval(hi) - 10.0).abs() < 1e-9);
        }
    }

    #[test]
    fn ray_maps_are_monotone(kind in kind(), n in 3usize..25, seed in 0u64..1000, alpha in 0.2f64..=1.0) {
        let ext = extend_map(&snowflake_map(space(n, kind, seed), alpha).unwrap());
        for x in 0..n {
            let mut prev = 0.0;
            for k in 0..=400 {
                let t = (-20.0 + 40.0 * k as f64 / 400.0).exp2();
                let image = ext.apply(ConePoint::new(x, t).unwrap()).height;
                prop_assert!(image >= prev);
                prev = image;
            }
        }
    }
}

fn relabeled(f: &Map, pz: &[usize], pw: &[usize]) -> Map {
    // Point i of the new source is old point pz[i]; it maps to the new index of f(pz[i]).
    let z = Arc::new(f.source.permuted(pz).unwrap());
    let w = Arc::new(f.target.permuted(pw).unwrap());
    let mut w_index = vec![0; pw.len()];
    for (k, &old) in pw.iter().enumerate() {
        w_index[old] = k;
    }
    let pairing = pz.iter().map(|&old| w_index[f.image(old)]).collect();
    PointMap::new(z, w, pairing).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 8, ..ProptestConfig::default() })]

    #[test]
    fn exhaustive_constants_ignore_relabeling(
        seed in 0u64..1000,
        alpha in 0.3f64..=1.0,
        pz in Just((0..10).collect::<Vec<usize>>()).prop_shuffle(),
        pw in Just((0..10).collect::<Vec<usize>>()).prop_shuffle(),
    ) {
        let f = snowflake_map(space(10, GeneratorKind::EuclideanCloud, seed), alpha).unwrap();
        let g = relabeled(&f, &pz, &pw);
        let settings = ReportSettings::default();
        let a = verify_map(&f, Some(alpha), &settings).unwrap();
        let b = verify_map(&g, Some(alpha), &settings).unwrap();
        prop_assert_eq!(a.map.theta, b.map.theta);
        prop_assert_eq!(a.map.lambda, b.map.lambda);
        for (ca, cb) in a.checks.iter().zip(&b.checks) {
            prop_assert_eq!(&ca.id, &cb.id);
            if ca.exhaustive {
                prop_assert_eq!(ca.value, cb.value, "{}", ca.id);
            }
        }
    }

    /// Scaling both spaces by `2^k` and shifting the height grid with them
    /// leaves every constant unchanged.
    #[test]
    fn constants_ignore_dyadic_rescaling(seed in 0u64..1000, alpha in 0.3f64..=1.0, k in -6i32..6) {
        let f = snowflake_map(space(12, GeneratorKind::EuclideanCloud, seed), alpha).unwrap();
        let c = 2f64.powi(k);
        let g = PointMap::identity(
            Arc::new(f.source.scaled(c).unwrap()),
            Arc::new(f.target.scaled(c).unwrap()),
        ).unwrap();
        let settings = ReportSettings::default();
        let shifted = ReportSettings { heights: (-10 + k, 10 + k), ..settings.clone() };
        let a = verify_map(&f, None, &settings).unwrap();
        let b = verify_map(&g, None, &shifted).unwrap();
        prop_assert_eq!(a.map.lambda, b.map.lambda);
        for (ca, cb) in a.checks.iter().zip(&b.checks) {
            prop_assert!((ca.value - cb.value).abs() <= 1e-9 * ca.value.abs().max(1.0), "{}: {} vs {}", ca.id, ca.value, cb.value);
        }
    }
}

#[test]
fn sampled_constants_grow_with_the_sample() {
    let z = space(40, GeneratorKind::EuclideanCloud, 11);
    let f = snowflake_map(z.clone(), 0.5).unwrap();
    let ext = extend_map(&f);
    let sample = build_cone_sample(&z, -10, 10, false).unwrap();
    let mut prev = (0.0, 0.0);
    for k in [100, 1_000, 10_000, 100_000] {
        let fit = check_theorem(&ext, &sample, 2.0, Some(0.5), &PairBudget::sampled(k), 3).unwrap();
        let now = (fit.qi.value, fit.similarity.unwrap().value);
        assert!(now.0 >= prev.0 && now.1 >= prev.1);
        prev = now;
    }
    let fit = verify::check_phi_pair_bounds(&ext, 2.0, 100, 1);
    let more = verify::check_phi_pair_bounds(&ext, 2.0, 1_000, 1);
    assert!(more.reals.value >= fit.reals.value);
}
