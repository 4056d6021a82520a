use pifit::model::double_tanh_gamma;
use pifit::transform::ParamTransform;
use pifit::{ModelClass, ModelId, Param, ParameterVector};
use proptest::prelude::*;

/// Maps uniforms in [0, 1) onto valid, moderately conditioned values.
fn scale(p: Param, u: f64) -> f64 {
    let lerp = |a: f64, b: f64| a + (b - a) * u;
    match p {
        Param::PMax | Param::Ps => lerp(1.0, 50.0),
        Param::IAlpha | Param::IAlphaS => lerp(20.0, 400.0),
        Param::IBeta | Param::IBetaS => lerp(500.0, 3000.0),
        Param::Theta => lerp(0.05, 0.45),
        Param::ThetaBeta => lerp(0.82, 1.0),
        Param::Gamma => lerp(1.1, 8.0),
        Param::B => lerp(1.1, 4.0),
        Param::Alpha => lerp(0.01, 0.2),
        Param::Beta => lerp(0.001, 0.005),
        Param::R => lerp(0.0, 3.0),
    }
}

fn params(m: ModelId, u: &[f64]) -> ParameterVector {
    let v: Vec<f64> = m.parameters().iter().zip(u).map(|(&p, &x)| scale(p, x)).collect();
    m.params(&v).unwrap()
}

fn unit() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0..1.0f64, 5)
}

fn model() -> impl Strategy<Value = ModelId> {
    (0..24usize).prop_map(|k| ModelId::ALL[k])
}

/// Slope at the origin, written out per family.
fn initial_slope(m: ModelId, p: &ParameterVector) -> f64 {
    let v = p.values();
    match m {
        ModelId::Lm | ModelId::Ph09 => v[0],
        ModelId::Ph01 => std::f64::consts::E * v[0] / v[1],
        ModelId::Ph07 => v[0] / v[1].powf(1.0 / v[3]),
        ModelId::Ph16 => v[0] / v[1] * (1.0 + v[3] / (2.0 * v[2])),
        _ => v[0] / v[1],
    }
}

fn alpha_scale(m: ModelId, p: &ParameterVector) -> f64 {
    match m {
        ModelId::Lm => 100.0,
        ModelId::Ph09 => p.values()[2] / p.values()[0],
        _ => p.values()[1],
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn saturating_models_are_monotone_and_bounded(k in 0..8usize, u in unit()) {
        let m = [ModelId::Lm, ModelId::Ls1, ModelId::Ls2, ModelId::Ls3, ModelId::Ls4, ModelId::Ls5, ModelId::Ls6, ModelId::Ls7][k];
        let p = params(m, &u);
        let grid: Vec<f64> = (0..10_000).map(|j| 1e6 * j as f64 / 9_999.0).collect();
        let y = m.evaluate_grid(&p, &grid).unwrap();
        prop_assert!(y.windows(2).all(|w| w[1] >= w[0]));
        if m != ModelId::Lm {
            let cap = p.get(Param::PMax).unwrap() + if m == ModelId::Ls6 { 1e-12 } else { 0.0 };
            prop_assert!(y.iter().all(|&v| v <= cap));
        }
    }

    #[test]
    fn continuous_at_origin(m in model(), u in unit()) {
        let p = params(m, &u);
        let at0 = m.evaluate(&p, 0.0).unwrap();
        let near = m.evaluate(&p, 1e-12).unwrap();
        prop_assert!((near - at0).abs() <= 1e-8, "{m}: {at0} vs {near}");
    }

    #[test]
    fn initial_slope_matches_efficiency(m in model(), u in unit()) {
        prop_assume!(!matches!(m, ModelId::Ls1 | ModelId::Ph09));
        let p = params(m, &u);
        let h = 1e-6 * alpha_scale(m, &p);
        let slope = (m.evaluate(&p, h).unwrap() - m.evaluate(&p, 0.0).unwrap()) / h;
        let want = initial_slope(m, &p);
        prop_assert!(((slope - want) / want).abs() < 0.01, "{m}: {slope} vs {want}");
    }

    #[test]
    fn piecewise_slopes_are_exact(u in unit()) {
        for m in [ModelId::Ls1, ModelId::Ph09] {
            let p = params(m, &u);
            let h = 1e-6 * alpha_scale(m, &p);
            let slope = m.evaluate(&p, h).unwrap() / h;
            let want = initial_slope(m, &p);
            prop_assert!(((slope - want) / want).abs() < 1e-9);
        }
    }

    #[test]
    fn respiration_shifts_the_curve(m in model(), u in unit(), r in 0.0..5.0f64, i in 0.0..3000.0f64) {
        let p = params(m, &u);
        let mut q = p.clone();
        q.set(Param::R, r);
        let (a, b) = (m.evaluate(&p, i).unwrap(), m.evaluate(&q, i).unwrap());
        prop_assert!((a - r - b).abs() <= 1e-12 * a.abs().max(1.0));
        prop_assert_eq!(m.evaluate(&q, 0.0).unwrap(), -r);
    }

    #[test]
    fn ph10_is_ph11_at_fixed_gamma(u in unit(), grid in prop::collection::vec(0.0..5000.0f64, 1..50)) {
        let p10 = params(ModelId::Ph10, &u);
        let mut v = p10.values();
        v.push(double_tanh_gamma());
        let p11 = ModelId::Ph11.params(&v).unwrap();
        prop_assert_eq!(
            ModelId::Ph10.evaluate_grid(&p10, &grid).unwrap(),
            ModelId::Ph11.evaluate_grid(&p11, &grid).unwrap()
        );
    }
}

#[test]
fn transform_round_trip() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
    for m in ModelId::ALL {
        let t = ParamTransform::new(m, true);
        for _ in 0..1000 {
            let v: Vec<f64> = m.roster(true).iter().map(|&p| scale(p, rng.gen())).collect();
            let u = t.forward_values(&v).unwrap();
            let back = t.inverse_values(&u);
            for (a, b) in v.iter().zip(&back) {
                assert!((a - b).abs() <= 1e-12 * a.abs(), "{m}: {a} -> {b}");
            }
        }
    }
}

#[test]
fn derived_maximum_matches_brute_force() {
    // Ph01-Ph08 realize their maximum below P_s; the other photoinhibited
    // forms carry P_max as a parameter and only I_opt is searched for.
    let cases: [(ModelId, &[f64]); 6] = [
        (ModelId::Ph03, &[11.0, 100.0, 600.0]),
        (ModelId::Ph01, &[8.0, 250.0]),
        (ModelId::Ph05, &[10.0, 80.0, 900.0]),
        (ModelId::Ph07, &[10.0, 100.0, 500.0, 2.0]),
        (ModelId::Ph08, &[9.0, 120.0, 1500.0, 0.6]),
        (ModelId::Ph10, &[12.0, 90.0, 700.0]),
    ];
    for (m, v) in cases {
        let p = m.params(v).unwrap();
        let dq = m.derive_quantities(&p).unwrap();
        let hi = 20.0 * v[1].max(*v.get(2).unwrap_or(&0.0));
        let n = 1_000_000;
        let (mut best_i, mut best) = (0.0, f64::NEG_INFINITY);
        for j in 0..=n {
            let i = hi * j as f64 / n as f64;
            let y = m.evaluate(&p, i).unwrap();
            if y > best {
                best = y;
                best_i = i;
            }
        }
        if m.uses_ps() {
            // The realized maximum can only exceed what any grid point sees.
            assert!(dq.p_max >= best * (1.0 - 1e-12), "{m}");
            assert!((dq.p_max - best) / best < 1e-8, "{m}: {} vs {best}", dq.p_max);
        } else {
            assert_eq!(dq.p_max, v[0]);
        }
        assert!((dq.i_opt - best_i).abs() <= 2.0 * hi / n as f64 + 1e-6 * best_i, "{m}");
        if matches!(m, ModelId::Ph03 | ModelId::Ph05 | ModelId::Ph07 | ModelId::Ph08) {
            // beta = P_s / I_beta_s and I_beta = P_max / beta
            assert!((dq.i_beta - dq.p_max * v[2] / v[0]).abs() < 1e-9 * dq.i_beta);
        }
    }
}

#[test]
fn classes_follow_model_names() {
    for m in ModelId::ALL {
        let want = match m.as_str() {
            "lm" => ModelClass::LightLimited,
            s if s.starts_with("LS") => ModelClass::LightSaturated,
            _ => ModelClass::Photoinhibited,
        };
        assert_eq!(m.class(), want);
    }
}

#[test]
fn ph16_negative_radicand_is_an_error() {
    // 4 theta^2 > theta_beta: the radicand dips below zero past the origin.
    let p = ModelId::Ph16.params(&[10.0, 100.0, 0.45, 0.2]).unwrap();
    assert!(ModelId::Ph16.evaluate(&p, 100.0).is_err());
    assert!(ModelId::Ph16.evaluate(&p, 10.0).is_ok());
}
