use approx::assert_relative_eq;
use proptest::prelude::*;

use disperse::billiard::{
    billiard_step, involution, phase_to_line, random_phase_point, reflect_velocity, LineChart, OrientedLine,
};
use disperse::geometry::{BilliardConfig, Bump, Scatterer};
use disperse::io;
use disperse::linalg::vector;
use disperse::rng;
use disperse::singularity::even_odd_decompose;
use disperse::stats::{log_grid, ScalingReport};

fn unit(raw: &[f64]) -> Option<disperse::linalg::Vector> {
    let v = vector(raw);
    (v.norm() > 1e-3).then(|| v.normalize())
}

fn pair() -> BilliardConfig {
    BilliardConfig::new(
        2,
        vec![
            Scatterer::sphere(0, &[0.0, 0.0], 0.38),
            Scatterer::sphere(1, &[0.5, 0.5], 0.14),
        ],
        2.0,
        0.1,
    )
    .unwrap()
}

proptest! {
    #[test]
    fn reflection_is_an_isometric_involution(
        v in prop::collection::vec(-1.0f64..1.0, 3),
        n in prop::collection::vec(-1.0f64..1.0, 3),
    ) {
        let (Some(v), Some(n)) = (unit(&v), unit(&n)) else { return Ok(()) };
        let w = reflect_velocity(&v, &n);
        prop_assert!((w.norm() - 1.0).abs() < 1e-14);
        prop_assert!((w.dot(&n) + v.dot(&n)).abs() < 1e-14);
        prop_assert!((reflect_velocity(&w, &n) - &v).amax() < 1e-14);
    }

    #[test]
    fn phase_involution_squares_to_identity(seed in any::<u64>()) {
        let cfg = pair();
        let x = random_phase_point(&cfg, &mut rng::stream(seed, 0));
        let y = involution(&cfg, &involution(&cfg, &x).unwrap()).unwrap();
        prop_assert!(y.distance(&x) < 1e-13);
    }

    #[test]
    fn step_keeps_speed_and_outgoing_direction(seed in any::<u64>()) {
        let cfg = pair();
        let x = random_phase_point(&cfg, &mut rng::stream(seed, 1));
        if let Ok((y, e)) = billiard_step(&cfg, &x) {
            prop_assert!((y.v.norm() - 1.0).abs() < 1e-12);
            prop_assert!(cfg.value(&y.instance, &y.q).abs() < 1e-9);
            prop_assert!(e.t_flight > 0.0 && e.t_flight <= cfg.horizon_bound);
            let n = cfg.gradient_direction(&y.instance, &y.q).unwrap();
            prop_assert!(y.v.dot(&n) >= -1e-12);
        }
    }

    #[test]
    fn line_chart_round_trips(
        seed in any::<u64>(),
        c in prop::collection::vec(-0.05f64..0.05, 4),
    ) {
        let cfg = BilliardConfig::new(3, vec![Scatterer::sphere(0, &[0.0, 0.0, 0.0], 0.3)], 3.0, 0.05).unwrap();
        let base: OrientedLine = phase_to_line(&random_phase_point(&cfg, &mut rng::stream(seed, 2)));
        let chart = LineChart::at(&base);
        let back = chart.coords(&chart.line(&c));
        for (a, b) in back.iter().zip(&c) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn scene_json_round_trips(
        r0 in 0.05f64..0.3,
        r1 in 0.05f64..0.15,
        cx in 0.45f64..0.55,
        axes in prop::collection::vec(0.05f64..0.15, 2),
    ) {
        let cfg = BilliardConfig::new(
            2,
            vec![
                Scatterer::sphere(0, &[0.0, 0.0], r0),
                Scatterer::ellipsoid(1, &[cx, 0.5], &axes).with_bump(Bump { center: vec![cx + axes[0], 0.5], radius: 0.02, amplitude: 1e-5 }),
                Scatterer::sphere(2, &[0.5, 0.0], r1),
            ],
            2.0,
            0.01,
        ).unwrap();
        prop_assert_eq!(io::scene_from_json(&io::scene_to_json(&cfg)).unwrap(), cfg);
    }

    #[test]
    fn decimal_output_round_trips(x in any::<f64>().prop_filter("finite", |x| x.is_finite())) {
        prop_assert_eq!(io::fmt_f64(x).parse::<f64>().unwrap(), x);
    }

    #[test]
    fn power_law_fit_recovers_exponent(a in 0.3f64..2.5, c in 0.01f64..10.0) {
        let deltas = log_grid(1e-3, 1e-1, 7);
        let est: Vec<f64> = deltas.iter().map(|d| c * d.powf(a)).collect();
        let r = ScalingReport::fit(deltas, est, vec![0.0; 7], 0, 0);
        assert_relative_eq!(r.slope, a, epsilon = 1e-10);
        prop_assert!(r.r2 > 1.0 - 1e-12);
    }

    #[test]
    fn even_odd_split_reconstructs(coef in prop::collection::vec(-2.0f64..2.0, 4)) {
        let f = |u: f64| Ok(coef[0] + u * (coef[1] + u * (coef[2] + u * coef[3])));
        let grid: Vec<f64> = (1..=20).map(|i| i as f64 * 5e-3).collect();
        let t = even_odd_decompose(f, &grid).unwrap();
        prop_assert!(t.reconstruction_residual < 1e-12);
        for (tau, gp) in t.tau.iter().zip(&t.g_plus) {
            prop_assert!((gp - (coef[0] + coef[2] * tau)).abs() < 1e-12);
        }
    }
}
