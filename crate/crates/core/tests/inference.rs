use pifit::inference::{
    conf_intervals, covariance, criteria_from_sse, info_matrix, information_criteria, normal_quantile,
    prediction_band, recalc_ci, r_squared,
};
use pifit::synth::{irradiance_levels, synthesize};
use pifit::{example_data, fit_all, fit_model, Dataset, FitOptions, ModelId, Param};

fn noisy_line() -> Dataset {
    let p = ModelId::Lm.params(&[0.02]).unwrap();
    synthesize("lm", ModelId::Lm, &p, irradiance_levels(30, 1000.0), 0.4, 9).unwrap()
}

#[test]
fn lm_hessian_matches_closed_form() {
    let data = noisy_line();
    let f = fit_model(&data, ModelId::Lm, &FitOptions::default()).unwrap();
    let alpha = f.params.get(Param::Alpha).unwrap();
    let sigma2 = f.sse / data.len() as f64;
    let sum_i2: f64 = data.irradiance.iter().map(|i| i * i).sum();
    // NLL in u = ln(alpha) at the optimum: alpha^2 * sum(I^2) / sigma^2.
    let want = alpha * alpha * sum_i2 / sigma2;
    let info = info_matrix(&f, &data).unwrap();
    let got = info.matrix[(0, 0)];
    assert!(((got - want) / want).abs() < 1e-2, "{got} vs {want}");
}

#[test]
fn lm_band_is_proportional_to_irradiance() {
    let data = noisy_line();
    let f = fit_model(&data, ModelId::Lm, &FitOptions::default()).unwrap();
    let cov = covariance(&info_matrix(&f, &data).unwrap());
    let ci = conf_intervals(&f, &cov, 0.95).unwrap();
    let se = ci.intervals[0].se;
    let z = normal_quantile(0.95).unwrap();
    let grid = irradiance_levels(50, 1000.0);
    let band = prediction_band(&f, &cov, &grid, 0.95).unwrap();
    for (k, &i) in grid.iter().enumerate().skip(1) {
        let half = 0.5 * (band.upper[k] - band.lower[k]);
        let want = z * se * i;
        assert!(((half - want) / want).abs() < 1e-2, "I = {i}: {half} vs {want}");
    }
    assert_eq!(band.upper[0], band.lower[0]);
}

#[test]
fn covariance_is_positive_semidefinite() {
    let opts = FitOptions::default();
    let mut checked = 0;
    for data in example_data().iter().take(6) {
        for f in fit_all(data, &opts).unwrap().iter().filter_map(|f| f.ok()) {
            let Ok(info) = info_matrix(f, data) else { continue };
            let cov = covariance(&info);
            if cov.pseudo_inverted {
                continue;
            }
            let m = &cov.matrix;
            assert!((m - m.transpose()).amax() <= 1e-12 * m.amax().max(1e-300));
            let trace = m.trace();
            let min_eig = m.clone().symmetric_eigenvalues().min();
            assert!(min_eig >= -1e-10 * trace, "{} {}: {min_eig}", data.id, f.model);
            checked += 1;
        }
    }
    assert!(checked > 50, "only {checked} covariances checked");
}

#[test]
fn aicc_approaches_aic() {
    for k in 1..=6 {
        let c = criteria_from_sse(1e5, 100_000, k);
        assert!((c.aicc - c.aic).abs() < 1e-3);
    }
}

#[test]
fn criteria_order_models_alike_at_equal_k() {
    let sse = [3.0, 1.5, 7.25, 0.4, 2.2];
    for k in 2..=5 {
        let sets: Vec<_> = sse.iter().map(|&s| criteria_from_sse(s, 20, k)).collect();
        let order = |key: fn(&pifit::CriteriaSet) -> f64| {
            let mut idx: Vec<usize> = (0..sets.len()).collect();
            idx.sort_by(|&a, &b| key(&sets[a]).total_cmp(&key(&sets[b])));
            idx
        };
        assert_eq!(order(|c| c.aic), order(|c| c.aicc));
        assert_eq!(order(|c| c.aic), order(|c| c.bic));
    }
}

#[test]
fn aicc_undefined_for_tiny_samples() {
    let c = criteria_from_sse(1.0, 5, 4);
    assert!(!c.aicc_defined);
    assert_eq!(c.aicc, f64::INFINITY);
}

#[test]
fn wider_level_gives_wider_band_and_intervals() {
    let data = &example_data()[1];
    let f = fit_model(data, ModelId::Ls5, &FitOptions::default()).unwrap();
    let cov = covariance(&info_matrix(&f, data).unwrap());
    let grid = irradiance_levels(40, data.max_irradiance());
    let b95 = prediction_band(&f, &cov, &grid, 0.95).unwrap();
    let b99 = prediction_band(&f, &cov, &grid, 0.99).unwrap();
    for k in 0..grid.len() {
        assert!(b99.upper[k] - b99.lower[k] >= b95.upper[k] - b95.lower[k]);
        assert!(b95.lower[k] <= b95.fit[k] && b95.fit[k] <= b95.upper[k]);
    }
    let c95 = conf_intervals(&f, &cov, 0.95).unwrap();
    let c99 = recalc_ci(&f, &cov, 0.99).unwrap();
    for (a, b) in c95.intervals.iter().zip(&c99.intervals) {
        assert!(b.lower <= a.lower && a.upper <= b.upper);
        assert!(a.lower > 0.0, "positive parameters keep positive limits");
        assert_eq!(a.estimate, b.estimate);
    }
}

#[test]
fn band_rejects_bad_grids() {
    let data = &example_data()[1];
    let f = fit_model(data, ModelId::Ls5, &FitOptions::default()).unwrap();
    let cov = covariance(&info_matrix(&f, data).unwrap());
    assert!(prediction_band(&f, &cov, &[-1.0, 2.0], 0.95).is_err());
    assert!(prediction_band(&f, &cov, &[5.0, 2.0], 0.95).is_err());
    assert!(prediction_band(&f, &cov, &[0.0, 2.0], 1.5).is_err());
}

#[test]
fn fit_statistics_are_consistent() {
    let data = &example_data()[4];
    let f = fit_model(data, ModelId::Ls6, &FitOptions::default()).unwrap();
    let r2 = r_squared(&f, data).unwrap();
    assert!(r2.r2 > 0.9 && r2.r2 <= 1.0);
    assert!(r2.adjusted.unwrap() < r2.r2);
    let ic = information_criteria(&f);
    assert_eq!(ic.k_ic, f.k + 1);
    assert!(ic.bic > ic.aic, "ln(20) > 2");
}
