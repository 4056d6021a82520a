//! Registry and evaluator for the 24 photosynthesis-irradiance formulations.
//!
//! Every model is written as a gross rate `P(I)`; when a respiration intercept
//! `R` is part of the parameter vector the net rate `P(I) - R` is returned.
//! Forms with the irradiance in a denominator (`tanh[(I_beta / I)^gamma]`,
//! `1 - exp(-I_beta / I)`) take their right limit at `I = 0`, so every model
//! evaluates to `-R` there.

use std::fmt;
use std::str::FromStr;

use serde::ser::SerializeMap;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};

/// Shape exponent of the double-tanh model, `cosh(1)^2`.
pub fn double_tanh_gamma() -> f64 {
    let c = 1f64.cosh();
    c * c
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelClass {
    LightLimited,
    LightSaturated,
    Photoinhibited,
}

impl ModelClass {
    pub const ALL: [ModelClass; 3] = [
        ModelClass::LightLimited,
        ModelClass::LightSaturated,
        ModelClass::Photoinhibited,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelClass::LightLimited => "light-limited",
            ModelClass::LightSaturated => "light-saturated",
            ModelClass::Photoinhibited => "photoinhibited",
        }
    }
}

impl fmt::Display for ModelClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Parameter symbols used across the model library.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Param {
    Alpha,
    Beta,
    PMax,
    Ps,
    IAlpha,
    IBeta,
    IAlphaS,
    IBetaS,
    Theta,
    Gamma,
    B,
    ThetaBeta,
    R,
}

impl Param {
    pub fn as_str(self) -> &'static str {
        match self {
            Param::Alpha => "alpha",
            Param::Beta => "beta",
            Param::PMax => "P_max",
            Param::Ps => "P_s",
            Param::IAlpha => "I_alpha",
            Param::IBeta => "I_beta",
            Param::IAlphaS => "I_alpha_s",
            Param::IBetaS => "I_beta_s",
            Param::Theta => "theta",
            Param::Gamma => "gamma",
            Param::B => "b",
            Param::ThetaBeta => "theta_beta",
            Param::R => "R",
        }
    }

    /// Checks the natural-space constraint of the parameter.
    pub fn check(self, value: f64) -> std::result::Result<(), &'static str> {
        if !value.is_finite() {
            return Err("not finite");
        }
        let ok = match self {
            Param::Theta => value > 0.0 && value < 1.0,
            Param::ThetaBeta => value > 0.0 && value <= 1.0,
            Param::B => value > 1.0,
            Param::R => value >= 0.0,
            _ => value > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(match self {
                Param::Theta => "must lie in (0, 1)",
                Param::ThetaBeta => "must lie in (0, 1]",
                Param::B => "must exceed 1",
                Param::R => "must be non-negative",
                _ => "must be strictly positive",
            })
        }
    }
}

impl fmt::Display for Param {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Param {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        use Param::*;
        [
            Alpha, Beta, PMax, Ps, IAlpha, IBeta, IAlphaS, IBetaS, Theta, Gamma, B, ThetaBeta, R,
        ]
        .into_iter()
        .find(|p| p.as_str() == s)
        .ok_or_else(|| Error::UnknownModel(format!("parameter {s}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ModelId {
    Lm,
    Ls1,
    Ls2,
    Ls3,
    Ls4,
    Ls5,
    Ls6,
    Ls7,
    Ph01,
    Ph02,
    Ph03,
    Ph04,
    Ph05,
    Ph06,
    Ph07,
    Ph08,
    Ph09,
    Ph10,
    Ph11,
    Ph12,
    Ph13,
    Ph14,
    Ph15,
    Ph16,
}

use ModelId::*;
use Param::*;

impl ModelId {
    pub const ALL: [ModelId; 24] = [
        Lm, Ls1, Ls2, Ls3, Ls4, Ls5, Ls6, Ls7, Ph01, Ph02, Ph03, Ph04, Ph05, Ph06, Ph07, Ph08,
        Ph09, Ph10, Ph11, Ph12, Ph13, Ph14, Ph15, Ph16,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Lm => "lm",
            Ls1 => "LS1",
            Ls2 => "LS2",
            Ls3 => "LS3",
            Ls4 => "LS4",
            Ls5 => "LS5",
            Ls6 => "LS6",
            Ls7 => "LS7",
            Ph01 => "Ph01",
            Ph02 => "Ph02",
            Ph03 => "Ph03",
            Ph04 => "Ph04",
            Ph05 => "Ph05",
            Ph06 => "Ph06",
            Ph07 => "Ph07",
            Ph08 => "Ph08",
            Ph09 => "Ph09",
            Ph10 => "Ph10",
            Ph11 => "Ph11",
            Ph12 => "Ph12",
            Ph13 => "Ph13",
            Ph14 => "Ph14",
            Ph15 => "Ph15",
            Ph16 => "Ph16",
        }
    }

    pub fn class(self) -> ModelClass {
        match self {
            Lm => ModelClass::LightLimited,
            Ls1 | Ls2 | Ls3 | Ls4 | Ls5 | Ls6 | Ls7 => ModelClass::LightSaturated,
            _ => ModelClass::Photoinhibited,
        }
    }

    /// Free parameters of the gross curve, in canonical order. `R` is
    /// appended by [`ModelId::roster`] when respiration is enabled.
    pub fn parameters(self) -> &'static [Param] {
        match self {
            Lm => &[Alpha],
            Ls1 | Ls2 | Ls3 | Ls4 | Ls5 => &[PMax, IAlpha],
            Ls6 => &[PMax, IAlpha, Theta],
            Ls7 => &[PMax, IAlpha, Gamma],
            Ph01 => &[Ps, IAlphaS],
            Ph02 | Ph03 | Ph04 | Ph05 | Ph06 => &[Ps, IAlphaS, IBetaS],
            Ph07 => &[Ps, IAlphaS, IBetaS, B],
            Ph08 => &[Ps, IAlphaS, IBetaS, Theta],
            Ph09 => &[Alpha, Beta, PMax],
            Ph10 | Ph12 | Ph14 | Ph15 => &[PMax, IAlpha, IBeta],
            Ph11 | Ph13 => &[PMax, IAlpha, IBeta, Gamma],
            Ph16 => &[PMax, IAlpha, Theta, ThetaBeta],
        }
    }

    pub fn roster(self, respiration: bool) -> Vec<Param> {
        let mut r = self.parameters().to_vec();
        if respiration {
            r.push(R);
        }
        r
    }

    pub fn fixed_constants(self) -> Vec<(&'static str, f64)> {
        match self {
            Ph10 | Ph12 => vec![("gamma", double_tanh_gamma())],
            _ => Vec::new(),
        }
    }

    /// Models parameterized by the theoretical maximum `P_s`, whose realized
    /// maximum has to be found numerically.
    pub fn uses_ps(self) -> bool {
        matches!(
            self,
            Ph01 | Ph02 | Ph03 | Ph04 | Ph05 | Ph06 | Ph07 | Ph08
        )
    }

    /// Light-saturated model reached when the inhibition scale goes to infinity.
    pub fn reduction_partner(self) -> Option<ModelId> {
        match self {
            Ph10 | Ph11 | Ph14 | Ph04 => Some(Ls5),
            Ph12 | Ph13 | Ph15 | Ph03 => Some(Ls4),
            Ph05 => Some(Ls2),
            Ph06 => Some(Ls3),
            Ph08 => Some(Ls6),
            _ => None,
        }
    }

    pub fn spec(self) -> ModelSpec {
        ModelSpec {
            id: self,
            class: self.class(),
            parameter_names: self.parameters().to_vec(),
            fixed_constants: self.fixed_constants(),
            supports_respiration: true,
        }
    }

    /// Gross rate without any validation; `values` follow [`ModelId::parameters`].
    /// Returns NaN where the form is undefined (Ph16 negative discriminant).
    pub(crate) fn gross_unchecked(self, v: &[f64], i: f64) -> f64 {
        match self {
            Lm => v[0] * i,
            Ls1 => v[0] * (i / v[1]).min(1.0),
            Ls2 => v[0] * i / (i + v[1]),
            Ls3 => v[0] * i / i.hypot(v[1]),
            Ls4 => v[0] * saturating_exp(i / v[1]),
            Ls5 => v[0] * (i / v[1]).tanh(),
            Ls6 => v[0] * non_rectangular(i / v[1], v[2]),
            Ls7 => v[0] * generalized_hyperbola(i / v[1], v[2]),
            Ph01 => {
                let x = i / v[1];
                v[0] * x * (1.0 - x).exp()
            }
            Ph02 => {
                let x = i / v[1];
                v[0] * x / (i * i / (v[1] * v[2]) + x + 1.0)
            }
            Ph03 => v[0] * saturating_exp(i / v[1]) * (-i / v[2]).exp(),
            Ph04 => v[0] * (i / v[1]).tanh() * (-i / v[2]).exp(),
            Ph05 => v[0] * i / (i + v[1]) * (-i / v[2]).exp(),
            Ph06 => v[0] * i / i.hypot(v[1]) * (-i / v[2]).exp(),
            Ph07 => v[0] * i / (i + v[1]).powf(1.0 / v[3]) * (-i / v[2]).exp(),
            Ph08 => v[0] * non_rectangular(i / v[1], v[3]) * (-i / v[2]).exp(),
            Ph09 => {
                let (alpha, beta, pmax) = (v[0], v[1], v[2]);
                (alpha * i).min(pmax).min(2.0 * pmax - beta * i).max(-pmax)
            }
            Ph10 => v[0] * (i / v[1]).tanh() * reciprocal_tanh(v[2], i, double_tanh_gamma()),
            Ph11 => v[0] * (i / v[1]).tanh() * reciprocal_tanh(v[2], i, v[3]),
            Ph12 => v[0] * saturating_exp(i / v[1]) * reciprocal_tanh(v[2], i, double_tanh_gamma()),
            Ph13 => v[0] * saturating_exp(i / v[1]) * reciprocal_tanh(v[2], i, v[3]),
            Ph14 => v[0] * (i / v[1]).tanh() * reciprocal_exp(v[2], i),
            Ph15 => v[0] * saturating_exp(i / v[1]) * reciprocal_exp(v[2], i),
            Ph16 => {
                let (pmax, x, theta, theta_b) = (v[0], i / v[1], v[2], v[3]);
                // 1 + tb*x - sqrt(1 + u) with u = tb*x^2 - 4*theta*x, written
                // without the cancellation near x = 0.
                let u = theta_b * x * x - 4.0 * theta * x;
                if 1.0 + u < 0.0 {
                    return f64::NAN;
                }
                pmax / (2.0 * theta) * (theta_b * x - u / (1.0 + (1.0 + u).sqrt()))
            }
        }
    }

    /// Whether the gross curve is defined on all of `[0, max_i]`. Only Ph16
    /// can fail: its radicand `tb x^2 - 4 theta x + 1` dips below zero
    /// somewhere once `tb < 4 theta^2`.
    pub(crate) fn defined_on(self, v: &[f64], max_i: f64) -> bool {
        if self != Ph16 {
            return true;
        }
        let (theta, theta_b) = (v[2], v[3]);
        let x_max = max_i / v[1];
        let x = (2.0 * theta / theta_b).min(x_max);
        theta_b * x * x - 4.0 * theta * x + 1.0 >= 0.0
    }

    /// Net rate at one irradiance; `R` is read from `params` when present.
    pub fn evaluate(self, params: &ParameterVector, irradiance: f64) -> Result<f64> {
        self.validate(params)?;
        self.evaluate_validated(params, irradiance)
    }

    fn evaluate_validated(self, params: &ParameterVector, irradiance: f64) -> Result<f64> {
        if !irradiance.is_finite() || irradiance < 0.0 {
            return Err(Error::InvalidIrradiance(irradiance));
        }
        let n = self.parameters().len();
        let g = self.gross_unchecked(&params.values()[..n], irradiance);
        if g.is_nan() {
            return Err(Error::NegativeDiscriminant {
                model: self,
                irradiance,
            });
        }
        Ok(g - params.respiration())
    }

    pub fn evaluate_grid(self, params: &ParameterVector, irradiances: &[f64]) -> Result<Vec<f64>> {
        self.validate(params)?;
        irradiances
            .iter()
            .enumerate()
            .map(|(index, &i)| {
                self.evaluate_validated(params, i).map_err(|e| Error::AtIndex {
                    index,
                    source: Box::new(e),
                })
            })
            .collect()
    }

    /// Checks that `params` carries exactly this model's roster (optionally
    /// extended by `R`) and that every value satisfies its constraint.
    pub fn validate(self, params: &ParameterVector) -> Result<()> {
        let names: Vec<Param> = params.names().collect();
        let base = self.parameters();
        let matches = names.len() >= base.len()
            && names[..base.len()] == *base
            && (names.len() == base.len() || (names.len() == base.len() + 1 && names[base.len()] == R));
        if !matches {
            return Err(Error::Roster {
                model: self,
                expected: base.iter().map(|p| p.as_str()).collect::<Vec<_>>().join(","),
                got: names.iter().map(|p| p.as_str()).collect::<Vec<_>>().join(","),
            });
        }
        for (name, value) in params.iter() {
            name.check(value).map_err(|reason| Error::InvalidParameter {
                model: self,
                name: name.as_str(),
                value,
                reason,
            })?;
        }
        Ok(())
    }

    /// Builds a parameter vector from values in roster order.
    pub fn params(self, values: &[f64]) -> Result<ParameterVector> {
        let base = self.parameters();
        let respiration = match values.len() {
            n if n == base.len() => false,
            n if n == base.len() + 1 => true,
            _ => {
                return Err(Error::Roster {
                    model: self,
                    expected: base.iter().map(|p| p.as_str()).collect::<Vec<_>>().join(","),
                    got: format!("{} values", values.len()),
                })
            }
        };
        let pv = ParameterVector::from_pairs(
            self.roster(respiration).into_iter().zip(values.iter().copied()),
        );
        self.validate(&pv)?;
        Ok(pv)
    }

    /// Irradiance scales used to bound the search for the curve maximum.
    fn search_upper(self, v: &[f64]) -> f64 {
        let scales: &[usize] = match self {
            Ph01 => &[1],
            Ph02 | Ph03 | Ph04 | Ph05 | Ph06 | Ph07 | Ph08 => &[1, 2],
            Ph10 | Ph11 | Ph12 | Ph13 | Ph14 | Ph15 => &[1, 2],
            _ => &[1],
        };
        50.0 * scales.iter().map(|&k| v[k]).fold(0.0, f64::max)
    }

    pub fn derive_quantities(self, params: &ParameterVector) -> Result<DerivedQuantities> {
        self.validate(params)?;
        let v = &params.values()[..self.parameters().len()];
        let inf = f64::INFINITY;
        let dq = match self {
            Lm => DerivedQuantities {
                p_max: inf,
                i_beta: inf,
                alpha: v[0],
                i_opt: inf,
            },
            Ls1 => DerivedQuantities {
                p_max: v[0],
                i_beta: inf,
                alpha: v[0] / v[1],
                i_opt: v[1],
            },
            Ls2 | Ls3 | Ls4 | Ls5 | Ls6 | Ls7 => DerivedQuantities {
                p_max: v[0],
                i_beta: inf,
                alpha: v[0] / v[1],
                i_opt: inf,
            },
            Ph09 => DerivedQuantities {
                p_max: v[2],
                i_beta: v[2] / v[1],
                alpha: v[0],
                i_opt: v[2] / v[0],
            },
            Ph10 | Ph11 | Ph12 | Ph13 | Ph14 | Ph15 | Ph16 => {
                let (i_opt, _) = self.maximize_gross(v)?;
                DerivedQuantities {
                    p_max: v[0],
                    i_beta: if self == Ph16 { inf } else { v[2] },
                    alpha: v[0] / v[1],
                    i_opt,
                }
            }
            _ => {
                // P_s family: realized maximum found numerically.
                let (i_opt, p_max) = self.maximize_gross(v)?;
                let i_beta = if self == Ph01 {
                    inf
                } else {
                    // beta = P_s / I_beta_s, so I_beta = P_max / beta.
                    p_max * v[2] / v[0]
                };
                DerivedQuantities {
                    p_max,
                    i_beta,
                    alpha: v[0] / v[1],
                    i_opt,
                }
            }
        };
        Ok(dq)
    }

    /// Bracketed maximization of the gross curve over `(0, I_hi]`: a
    /// log-spaced scan locates the bracket, golden-section refines it.
    fn maximize_gross(self, v: &[f64]) -> Result<(f64, f64)> {
        let hi = self.search_upper(v);
        let f = |i: f64| self.gross_unchecked(v, i);
        let scan = 4000usize;
        let lo = hi * 1e-9;
        let ratio = (hi / lo).ln() / (scan - 1) as f64;
        let grid: Vec<f64> = (0..scan).map(|k| lo * (ratio * k as f64).exp()).collect();
        let mut best = 0usize;
        let mut best_val = f64::NEG_INFINITY;
        for (k, &i) in grid.iter().enumerate() {
            let y = f(i);
            if y.is_nan() {
                return Err(Error::Maximization {
                    model: self,
                    reason: format!("undefined curve at I = {i}"),
                });
            }
            if y > best_val {
                best_val = y;
                best = k;
            }
        }
        if best == scan - 1 {
            return Err(Error::Maximization {
                model: self,
                reason: format!("maximum at the search boundary I = {hi}"),
            });
        }
        let mut a = if best == 0 { 0.0 } else { grid[best - 1] };
        let mut b = grid[best + 1];
        let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
        let mut c = b - inv_phi * (b - a);
        let mut d = a + inv_phi * (b - a);
        let (mut fc, mut fd) = (f(c), f(d));
        let mut iter = 0;
        while (b - a) > 1e-12 * b.max(f64::MIN_POSITIVE) {
            if fc >= fd {
                b = d;
                d = c;
                fd = fc;
                c = b - inv_phi * (b - a);
                fc = f(c);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + inv_phi * (b - a);
                fd = f(d);
            }
            iter += 1;
            if iter > 500 {
                return Err(Error::Maximization {
                    model: self,
                    reason: "golden-section iteration limit".into(),
                });
            }
        }
        let x = 0.5 * (a + b);
        let y = f(x).max(best_val);
        Ok((x, y))
    }
}

fn saturating_exp(x: f64) -> f64 {
    -(-x).exp_m1()
}

/// `[(x + 1) - sqrt((x + 1)^2 - 4 theta x)] / (2 theta)` in conjugate form.
fn non_rectangular(x: f64, theta: f64) -> f64 {
    let s = x + 1.0;
    let disc = (s * s - 4.0 * theta * x).max(0.0);
    2.0 * x / (s + disc.sqrt())
}

/// `x / (x^g + 1)^(1/g)`, rearranged for large `x`.
fn generalized_hyperbola(x: f64, g: f64) -> f64 {
    if x <= 1.0 {
        x / (x.powf(g) + 1.0).powf(1.0 / g)
    } else {
        1.0 / (1.0 + x.powf(-g)).powf(1.0 / g)
    }
}

/// `tanh[(I_beta / I)^gamma]`, equal to 1 in the limit `I -> 0+`.
fn reciprocal_tanh(i_beta: f64, i: f64, gamma: f64) -> f64 {
    if i == 0.0 {
        1.0
    } else {
        (i_beta / i).powf(gamma).tanh()
    }
}

/// `1 - exp(-I_beta / I)`, equal to 1 in the limit `I -> 0+`.
fn reciprocal_exp(i_beta: f64, i: f64) -> f64 {
    if i == 0.0 {
        1.0
    } else {
        saturating_exp(i_beta / i)
    }
}

impl fmt::Display for ModelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelId::ALL
            .into_iter()
            .find(|m| m.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::UnknownModel(s.to_string()))
    }
}

impl Serialize for ModelId {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub id: ModelId,
    pub class: ModelClass,
    pub parameter_names: Vec<Param>,
    pub fixed_constants: Vec<(&'static str, f64)>,
    pub supports_respiration: bool,
}

/// All 24 model specifications in registry order.
pub fn list_models() -> Vec<ModelSpec> {
    ModelId::ALL.iter().map(|m| m.spec()).collect()
}

/// Named parameter values in natural units, in roster order.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterVector {
    entries: Vec<(Param, f64)>,
}

impl ParameterVector {
    pub fn from_pairs(pairs: impl IntoIterator<Item = (Param, f64)>) -> Self {
        ParameterVector {
            entries: pairs.into_iter().collect(),
        }
    }

    pub fn get(&self, name: Param) -> Option<f64> {
        self.entries.iter().find(|(p, _)| *p == name).map(|e| e.1)
    }

    /// Replaces `name`, or appends it when absent.
    pub fn set(&mut self, name: Param, value: f64) {
        match self.entries.iter_mut().find(|(p, _)| *p == name) {
            Some(e) => e.1 = value,
            None => self.entries.push((name, value)),
        }
    }

    pub fn names(&self) -> impl Iterator<Item = Param> + '_ {
        self.entries.iter().map(|e| e.0)
    }

    pub fn values(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.1).collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = (Param, f64)> + '_ {
        self.entries.iter().copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn respiration(&self) -> f64 {
        self.get(R).unwrap_or(0.0)
    }

    pub fn has_respiration(&self) -> bool {
        self.get(R).is_some()
    }
}

impl Serialize for ParameterVector {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut m = s.serialize_map(Some(self.entries.len()))?;
        for (p, v) in &self.entries {
            m.serialize_entry(p.as_str(), v)?;
        }
        m.end()
    }
}

/// Quantities derived from a fitted parameter vector. Unbounded quantities
/// (no inhibition, no saturation) are reported as `+inf`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivedQuantities {
    pub p_max: f64,
    pub i_beta: f64,
    pub alpha: f64,
    pub i_opt: f64,
}
