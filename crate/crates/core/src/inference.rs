//! Post-fit diagnostics: observed information, covariance, Wald intervals,
//! information criteria, R², and delta-method confidence bands.
//!
//! Everything is computed in the transformed coordinates the fit was
//! optimized in. Intervals are mapped back through the inverse transform,
//! so they are asymmetric in natural units and respect positivity.
//!
//! Bands from [`prediction_band`] are confidence bands on the mean
//! response; they carry no observation-noise term.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::fit::{total_sum_of_squares, FitResult};
use crate::model::Param;
use crate::objective::{nll_from_sse, sse_values, SIGMA2_FLOOR};

/// Condition number above which the covariance falls back to the
/// Moore–Penrose pseudo-inverse.
pub const MAX_CONDITION: f64 = 1e12;

/// Variances more negative than this are errors; smaller negatives are
/// rounding and are clamped to zero.
const NEGATIVE_VARIANCE_TOL: f64 = 1e-12;

/// Finite-difference step for coordinate `x`: `eps^(1/3) * max(|x|, 1)`.
pub fn fd_step(x: f64) -> f64 {
    f64::EPSILON.cbrt() * x.abs().max(1.0)
}

/// Central finite-difference Hessian of `f` at `x`, symmetrized.
pub fn hessian<F: Fn(&[f64]) -> f64>(f: F, x: &[f64]) -> Result<DMatrix<f64>> {
    let k = x.len();
    let h: Vec<f64> = x.iter().map(|&xi| fd_step(xi)).collect();
    let f0 = f(x);
    let mut m = DMatrix::zeros(k, k);
    let mut at = x.to_vec();
    let mut eval = |shifts: &[(usize, f64)]| {
        at.copy_from_slice(x);
        for &(i, d) in shifts {
            at[i] += d;
        }
        f(&at)
    };
    for i in 0..k {
        let fp = eval(&[(i, h[i])]);
        let fm = eval(&[(i, -h[i])]);
        m[(i, i)] = (fp - 2.0 * f0 + fm) / (h[i] * h[i]);
        for j in 0..i {
            let fpp = eval(&[(i, h[i]), (j, h[j])]);
            let fpm = eval(&[(i, h[i]), (j, -h[j])]);
            let fmp = eval(&[(i, -h[i]), (j, h[j])]);
            let fmm = eval(&[(i, -h[i]), (j, -h[j])]);
            let v = (fpp - fpm - fmp + fmm) / (4.0 * h[i] * h[j]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    let sym = (&m + m.transpose()) * 0.5;
    for i in 0..k {
        for j in 0..k {
            if !sym[(i, j)].is_finite() {
                return Err(Error::NonFiniteHessian { row: i, col: j });
            }
        }
    }
    Ok(sym)
}

#[derive(Debug, Clone, PartialEq)]
pub struct InfoMatrix {
    pub names: Vec<Param>,
    /// Observed information in transformed coordinates.
    pub matrix: DMatrix<f64>,
    pub condition_number: f64,
}

fn condition_number(m: &DMatrix<f64>) -> f64 {
    let sv = m.clone().svd(false, false).singular_values;
    let max = sv.max();
    let min = sv.min();
    if min > 0.0 {
        max / min
    } else {
        f64::INFINITY
    }
}

/// Hessian of the profiled Gaussian negative log-likelihood at the optimum.
pub fn info_matrix(fit: &FitResult, data: &Dataset) -> Result<InfoMatrix> {
    let n = data.len();
    let nll = |u: &[f64]| {
        let v = fit.transform.inverse_values(u);
        nll_from_sse(sse_values(fit.model, &v, fit.respiration, data), n).value
    };
    let matrix = hessian(nll, &fit.transformed)?;
    Ok(InfoMatrix {
        names: fit.transform.names().to_vec(),
        condition_number: condition_number(&matrix),
        matrix,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Covariance {
    pub names: Vec<Param>,
    pub matrix: DMatrix<f64>,
    pub pseudo_inverted: bool,
}

impl Covariance {
    pub fn zeros(names: Vec<Param>) -> Self {
        let k = names.len();
        Covariance {
            names,
            matrix: DMatrix::zeros(k, k),
            pseudo_inverted: false,
        }
    }
}

/// Inverse of the information matrix. Ill-conditioned, singular or
/// indefinite input (an optimum that is not a strict local minimum) gets a
/// flagged pseudo-inverse instead: eigen-directions with curvature at or
/// below `max|lambda| / MAX_CONDITION` are dropped, which is the
/// Moore-Penrose inverse for a positive semidefinite matrix and keeps the
/// result positive semidefinite otherwise.
pub fn covariance(info: &InfoMatrix) -> Covariance {
    let m = &info.matrix;
    let eigen = m.clone().symmetric_eigen();
    let definite = eigen.eigenvalues.iter().all(|&l| l > 0.0);
    if definite && info.condition_number <= MAX_CONDITION {
        if let Some(inv) = m.clone().try_inverse() {
            let sym = (&inv + inv.transpose()) * 0.5;
            return Covariance {
                names: info.names.clone(),
                matrix: sym,
                pseudo_inverted: false,
            };
        }
    }
    let k = m.nrows();
    let cutoff = eigen.eigenvalues.amax() / MAX_CONDITION;
    let mut pinv = DMatrix::zeros(k, k);
    for (j, &l) in eigen.eigenvalues.iter().enumerate() {
        if l > cutoff && l.is_finite() {
            let v = eigen.eigenvectors.column(j);
            pinv += (v * v.transpose()) / l;
        }
    }
    let sym = (&pinv + pinv.transpose()) * 0.5;
    Covariance {
        names: info.names.clone(),
        matrix: sym,
        pseudo_inverted: true,
    }
}

/// Two-sided standard-normal quantile `z_{(1 + level) / 2}`.
pub fn normal_quantile(level: f64) -> Result<f64> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidLevel(level));
    }
    let n = Normal::new(0.0, 1.0).expect("standard normal");
    Ok(n.inverse_cdf(0.5 * (1.0 + level)))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParamInterval {
    #[serde(serialize_with = "ser_param")]
    pub name: Param,
    pub estimate: f64,
    /// Standard error in natural units (delta method).
    pub se: f64,
    pub lower: f64,
    pub upper: f64,
}

fn ser_param<S: serde::Serializer>(p: &Param, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(p.as_str())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntervalSet {
    pub level: f64,
    pub intervals: Vec<ParamInterval>,
}

impl IntervalSet {
    pub fn get(&self, p: Param) -> Option<&ParamInterval> {
        self.intervals.iter().find(|i| i.name == p)
    }
}

fn diag_variance(cov: &Covariance, i: usize) -> Result<f64> {
    let v = cov.matrix[(i, i)];
    let scale = cov.matrix.diagonal().amax().max(1.0);
    if v < -NEGATIVE_VARIANCE_TOL * scale || v.is_nan() {
        return Err(Error::NegativeVariance(i));
    }
    Ok(v.max(0.0))
}

/// Wald intervals `u ± z * se_u` in transformed space, mapped back.
pub fn conf_intervals(fit: &FitResult, cov: &Covariance, level: f64) -> Result<IntervalSet> {
    let z = normal_quantile(level)?;
    if cov.names != fit.transform.names() {
        return Err(Error::Mismatch(format!(
            "covariance is for {} parameters, fit {} has {}",
            cov.names.len(),
            fit.model,
            fit.transform.len()
        )));
    }
    let jac = fit.transform.jacobian_diag(&fit.transformed);
    let estimates = fit.params.values();
    let mut intervals = Vec::with_capacity(estimates.len());
    for (i, (t, &u)) in fit.transform.transforms().iter().zip(&fit.transformed).enumerate() {
        let se_u = diag_variance(cov, i)?.sqrt();
        let est = estimates[i];
        let lower = t.inverse(u - z * se_u).min(est);
        let upper = t.inverse(u + z * se_u).max(est);
        intervals.push(ParamInterval {
            name: fit.transform.names()[i],
            estimate: est,
            se: se_u * jac[i].abs(),
            lower,
            upper,
        });
    }
    Ok(IntervalSet { level, intervals })
}

/// Re-evaluates intervals at `level` from the stored covariance.
pub fn recalc_ci(fit: &FitResult, cov: &Covariance, level: f64) -> Result<IntervalSet> {
    conf_intervals(fit, cov, level)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CriteriaSet {
    pub aic: f64,
    /// `+inf` when `n <= k_ic + 1`.
    pub aicc: f64,
    pub bic: f64,
    pub n: usize,
    pub k_ic: usize,
    /// `2 k (k + 1) / (n - k - 1)`, the AICc small-sample term.
    pub aicc_correction: f64,
    pub aicc_defined: bool,
    pub sse_floored: bool,
}

/// AIC, AICc and BIC with the full Gaussian constant and sigma counted as
/// a parameter.
pub fn criteria_from_sse(sse: f64, n: usize, k_ic: usize) -> CriteriaSet {
    let nf = n as f64;
    let kf = k_ic as f64;
    let s2 = sse / nf;
    let sse_floored = !(s2 >= SIGMA2_FLOOR);
    let s2 = if sse_floored { SIGMA2_FLOOR } else { s2 };
    let deviance = nf * ((2.0 * std::f64::consts::PI * s2).ln() + 1.0);
    let aic = 2.0 * kf + deviance;
    let aicc_defined = n > k_ic + 1;
    let aicc_correction = if aicc_defined {
        (2 * k_ic * (k_ic + 1)) as f64 / (n - k_ic - 1) as f64
    } else {
        f64::INFINITY
    };
    CriteriaSet {
        aic,
        aicc: aic + aicc_correction,
        bic: kf * nf.ln() + deviance,
        n,
        k_ic,
        aicc_correction,
        aicc_defined,
        sse_floored,
    }
}

pub fn information_criteria(fit: &FitResult) -> CriteriaSet {
    criteria_from_sse(fit.sse, fit.n, fit.k_ic())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RSquared {
    pub r2: f64,
    /// Undefined when `n - k - 1 <= 0`.
    pub adjusted: Option<f64>,
}

/// `1 - (1 - r2)(n - 1)/(n - k - 1)`.
pub fn adjusted_r2(r2: f64, n: usize, k: usize) -> Option<f64> {
    (n > k + 1).then(|| 1.0 - (1.0 - r2) * (n - 1) as f64 / (n - k - 1) as f64)
}

pub fn r_squared_from_sse(sse: f64, rate: &[f64], k: usize) -> Result<RSquared> {
    let sst = total_sum_of_squares(rate);
    if !(sst > 0.0) {
        return Err(Error::ConstantResponse);
    }
    let r2 = 1.0 - sse / sst;
    Ok(RSquared {
        r2,
        adjusted: adjusted_r2(r2, rate.len(), k),
    })
}

pub fn r_squared(fit: &FitResult, data: &Dataset) -> Result<RSquared> {
    r_squared_from_sse(fit.sse, &data.rate, fit.k)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PredictionBand {
    pub grid: Vec<f64>,
    pub fit: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub level: f64,
}

/// Delta-method confidence band on the fitted curve over `grid`.
pub fn prediction_band(fit: &FitResult, cov: &Covariance, grid: &[f64], level: f64) -> Result<PredictionBand> {
    let z = normal_quantile(level)?;
    if grid.iter().any(|g| !g.is_finite() || *g < 0.0) || grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidGrid);
    }
    let values = fit.model.evaluate_grid(&fit.params, grid)?;
    let u0 = &fit.transformed;
    let k = u0.len();
    let np = fit.model.parameters().len();
    let predict = |u: &[f64], i: f64| {
        let v = fit.transform.inverse_values(u);
        let r = if fit.respiration { v[np] } else { 0.0 };
        fit.model.gross_unchecked(&v[..np], i) - r
    };
    let steps: Vec<f64> = u0.iter().map(|&x| fd_step(x)).collect();
    let mut lower = Vec::with_capacity(grid.len());
    let mut upper = Vec::with_capacity(grid.len());
    let mut shifted = u0.clone();
    for (idx, (&i, &y)) in grid.iter().zip(&values).enumerate() {
        let mut g = DVector::zeros(k);
        for j in 0..k {
            shifted[j] = u0[j] + steps[j];
            let yp = predict(&shifted, i);
            shifted[j] = u0[j] - steps[j];
            let ym = predict(&shifted, i);
            shifted[j] = u0[j];
            g[j] = (yp - ym) / (2.0 * steps[j]);
        }
        let var = (g.transpose() * &cov.matrix * &g)[(0, 0)];
        if var.is_nan() || var < -NEGATIVE_VARIANCE_TOL {
            return Err(Error::NegativeBandVariance(idx));
        }
        let half = z * var.max(0.0).sqrt();
        lower.push(y - half);
        upper.push(y + half);
    }
    Ok(PredictionBand {
        grid: grid.to_vec(),
        fit: values,
        lower,
        upper,
        level,
    })
}

/// Information matrix, covariance and intervals for one fit.
#[derive(Debug, Clone, PartialEq)]
pub struct Inference {
    pub info: InfoMatrix,
    pub covariance: Covariance,
    pub intervals: IntervalSet,
}

pub fn infer(fit: &FitResult, data: &Dataset, level: f64) -> Result<Inference> {
    let info = info_matrix(fit, data)?;
    let covariance = covariance(&info);
    let intervals = conf_intervals(fit, &covariance, level)?;
    Ok(Inference {
        info,
        covariance,
        intervals,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fit::{fit_model, FitOptions};
    use crate::model::ModelId;

    fn noisy_ls5() -> (Dataset, FitResult) {
        let pv = ModelId::Ls5.params(&[10.0, 100.0]).unwrap();
        let i: Vec<f64> = (1..=25).map(|k| 40.0 * k as f64).collect();
        let mut p = ModelId::Ls5.evaluate_grid(&pv, &i).unwrap();
        for (k, y) in p.iter_mut().enumerate() {
            *y += 0.2 * (((k * 37) % 11) as f64 / 5.0 - 1.0);
        }
        let d = Dataset::new("n", i, p);
        let f = fit_model(&d, ModelId::Ls5, &FitOptions::default()).unwrap();
        (d, f)
    }

    #[test]
    fn quadratic_hessian_is_identity() {
        let h = hessian(|x| x.iter().map(|v| v * v).sum::<f64>() / 2.0, &[0.0, 0.1, -0.2]).unwrap();
        let id = DMatrix::<f64>::identity(3, 3);
        assert!((h - id).amax() < 1e-6);
    }

    #[test]
    fn covariance_inverts_diagonal() {
        let info = |m: DMatrix<f64>| InfoMatrix {
            names: vec![Param::PMax, Param::IAlpha],
            condition_number: condition_number(&m),
            matrix: m,
        };
        let c = covariance(&info(DMatrix::identity(2, 2)));
        assert_eq!(c.matrix, DMatrix::identity(2, 2));
        let c = covariance(&info(DMatrix::from_diagonal(&DVector::from_vec(vec![4.0, 0.25]))));
        assert!((c.matrix[(0, 0)] - 0.25).abs() < 1e-15 && (c.matrix[(1, 1)] - 4.0).abs() < 1e-15);
        assert!(!c.pseudo_inverted);
        let c = covariance(&info(DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0])));
        assert!(c.pseudo_inverted);
        // Moore-Penrose inverse of [[1, 1], [1, 1]] is [[1, 1], [1, 1]] / 4.
        assert!(c.matrix.iter().all(|v| (v - 0.25).abs() < 1e-15));
        // Saddle: only the positive-curvature direction survives.
        let c = covariance(&info(DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, -3.0]))));
        assert!(c.pseudo_inverted);
        assert_eq!(c.matrix, DMatrix::from_diagonal(&DVector::from_vec(vec![0.5, 0.0])));
    }

    #[test]
    fn info_matrix_is_symmetric() {
        let (d, f) = noisy_ls5();
        let info = info_matrix(&f, &d).unwrap();
        let m = &info.matrix;
        assert!((m - m.transpose()).amax() <= 1e-10 * m.amax());
    }

    #[test]
    fn intervals_contain_estimates_and_nest() {
        let (d, f) = noisy_ls5();
        let inf = infer(&f, &d, 0.95).unwrap();
        let wide = recalc_ci(&f, &inf.covariance, 0.99).unwrap();
        let narrow = recalc_ci(&f, &inf.covariance, 0.50).unwrap();
        for ((a, b), c) in inf.intervals.intervals.iter().zip(&wide.intervals).zip(&narrow.intervals) {
            assert!(a.lower <= a.estimate && a.estimate <= a.upper);
            assert!(a.lower > 0.0);
            assert!(b.lower <= a.lower && a.upper <= b.upper);
            assert!(c.lower > a.lower && c.upper < a.upper);
        }
        assert_eq!(recalc_ci(&f, &inf.covariance, 0.95).unwrap(), inf.intervals);
    }

    #[test]
    fn zero_covariance_degenerates() {
        let (d, f) = noisy_ls5();
        let cov = Covariance::zeros(f.transform.names().to_vec());
        let ci = conf_intervals(&f, &cov, 0.95).unwrap();
        for i in &ci.intervals {
            assert_eq!(i.lower, i.estimate);
            assert_eq!(i.upper, i.estimate);
        }
        let grid = crate::data::high_res_grid(&d, 20).unwrap();
        let band = prediction_band(&f, &cov, &grid, 0.95).unwrap();
        assert_eq!(band.lower, band.fit);
        assert_eq!(band.upper, band.fit);
    }

    #[test]
    fn negative_variance_reported() {
        let (_, f) = noisy_ls5();
        let mut cov = Covariance::zeros(f.transform.names().to_vec());
        cov.matrix[(1, 1)] = -1.0;
        assert_eq!(conf_intervals(&f, &cov, 0.95).unwrap_err(), Error::NegativeVariance(1));
    }

    #[test]
    fn criteria_identities() {
        let c = criteria_from_sse(10.0, 10, 3);
        assert!((c.aicc - c.aic - 4.0).abs() < 1e-12);
        assert!((c.aic - 34.378_770_664_093_45).abs() < 1e-9);
        let c = criteria_from_sse(1.0, 4, 3);
        assert!(!c.aicc_defined && c.aicc.is_infinite());
    }

    #[test]
    fn r2_cases() {
        assert!((adjusted_r2(0.9, 20, 3).unwrap() - 0.88125).abs() < 1e-14);
        let y = [1.0, 2.0, 3.0, 4.0, 6.0];
        let r = r_squared_from_sse(0.0, &y, 2).unwrap();
        assert_eq!((r.r2, r.adjusted), (1.0, Some(1.0)));
        let sst = total_sum_of_squares(&y);
        assert_eq!(r_squared_from_sse(sst, &y, 2).unwrap().r2, 0.0);
        assert_eq!(r_squared_from_sse(0.0, &[2.0; 5], 1).unwrap_err(), Error::ConstantResponse);
    }

    #[test]
    fn level_validation() {
        assert!(normal_quantile(1.0).is_err());
        assert!(normal_quantile(0.0).is_err());
        assert!((normal_quantile(0.95).unwrap() - 1.959_963_984_540_054).abs() < 1e-9);
    }
}
