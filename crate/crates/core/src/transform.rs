//! Maps between natural (constrained) parameters and the unconstrained
//! coordinates the simplex works in.

use crate::error::{Error, Result};
use crate::model::{ModelId, Param, ParameterVector};

/// Offset keeping `log(R + offset)` finite at `R = 0`.
pub const RESPIRATION_OFFSET: f64 = 1e-12;

/// Interval of the shape exponent `gamma` (LS7, Ph11, Ph13).
pub const GAMMA_BOUNDS: (f64, f64) = (1.0, 10.0);

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Transform {
    /// `x = lo + exp(u)` on `(lo, inf)`.
    Log { lo: f64 },
    /// `x = lo + (hi - lo) * sigmoid(u)` on `(lo, hi)`.
    Logit { lo: f64, hi: f64 },
    /// `x = exp(u) - offset` on `[0, inf)`.
    LogOffset,
}

impl Transform {
    pub fn default_for(p: Param) -> Self {
        match p {
            Param::Theta | Param::ThetaBeta => Transform::Logit { lo: 0.0, hi: 1.0 },
            Param::Gamma => Transform::Logit {
                lo: GAMMA_BOUNDS.0,
                hi: GAMMA_BOUNDS.1,
            },
            Param::B => Transform::Log { lo: 1.0 },
            Param::R => Transform::LogOffset,
            _ => Transform::Log { lo: 0.0 },
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            Transform::Log { .. } => "log",
            Transform::Logit { .. } => "logit",
            Transform::LogOffset => "offset-log",
        }
    }

    pub fn forward(&self, x: f64) -> Option<f64> {
        if !x.is_finite() {
            return None;
        }
        match *self {
            Transform::Log { lo } => (x > lo).then(|| (x - lo).ln()),
            Transform::Logit { lo, hi } => (x > lo && x < hi).then(|| {
                let t = (x - lo) / (hi - lo);
                (t / (1.0 - t)).ln()
            }),
            Transform::LogOffset => (x >= 0.0).then(|| (x + RESPIRATION_OFFSET).ln()),
        }
    }

    pub fn inverse(&self, u: f64) -> f64 {
        match *self {
            Transform::Log { lo } => lo + u.exp(),
            Transform::Logit { lo, hi } => lo + (hi - lo) * sigmoid(u),
            Transform::LogOffset => (u.exp() - RESPIRATION_OFFSET).max(0.0),
        }
    }

    /// `d x / d u` at `u`.
    pub fn derivative(&self, u: f64) -> f64 {
        match *self {
            Transform::Log { .. } | Transform::LogOffset => u.exp(),
            Transform::Logit { lo, hi } => {
                let s = sigmoid(u);
                (hi - lo) * s * (1.0 - s)
            }
        }
    }
}

fn sigmoid(u: f64) -> f64 {
    if u >= 0.0 {
        1.0 / (1.0 + (-u).exp())
    } else {
        let e = u.exp();
        e / (1.0 + e)
    }
}

/// Per-parameter transforms for one model roster.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamTransform {
    model: ModelId,
    names: Vec<Param>,
    transforms: Vec<Transform>,
}

impl ParamTransform {
    pub fn new(model: ModelId, respiration: bool) -> Self {
        let names = model.roster(respiration);
        let transforms = names.iter().map(|&p| Transform::default_for(p)).collect();
        ParamTransform {
            model,
            names,
            transforms,
        }
    }

    /// Replaces the default transform of `param` by one bounded to `(lo, hi)`;
    /// `hi = inf` gives a lower bound only.
    pub fn with_bounds(mut self, param: Param, lo: f64, hi: f64) -> Result<Self> {
        let Some(k) = self.names.iter().position(|&p| p == param) else {
            return Err(Error::InvalidOption(format!(
                "model {} has no parameter {param}",
                self.model
            )));
        };
        if lo.is_nan() || hi.is_nan() || lo >= hi || lo.is_infinite() {
            return Err(Error::InvalidOption(format!("invalid bounds ({lo}, {hi}) for {param}")));
        }
        let natural_lo = match param {
            Param::B => 1.0,
            _ => 0.0,
        };
        let natural_hi = match param {
            Param::Theta | Param::ThetaBeta => 1.0,
            _ => f64::INFINITY,
        };
        if lo < natural_lo || hi > natural_hi {
            return Err(Error::InvalidOption(format!(
                "bounds ({lo}, {hi}) for {param} exceed its domain"
            )));
        }
        self.transforms[k] = if hi.is_infinite() {
            Transform::Log { lo }
        } else {
            Transform::Logit { lo, hi }
        };
        Ok(self)
    }

    pub fn model(&self) -> ModelId {
        self.model
    }

    pub fn names(&self) -> &[Param] {
        &self.names
    }

    pub fn transforms(&self) -> &[Transform] {
        &self.transforms
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn transform(&self, params: &ParameterVector) -> Result<Vec<f64>> {
        self.forward_values(&params.values())
    }

    pub fn forward_values(&self, values: &[f64]) -> Result<Vec<f64>> {
        values
            .iter()
            .zip(&self.transforms)
            .zip(&self.names)
            .map(|((&x, t), p)| {
                t.forward(x).ok_or(Error::TransformDomain {
                    name: p.as_str(),
                    kind: t.kind(),
                    value: x,
                })
            })
            .collect()
    }

    /// Natural values in roster order, without constructing a vector.
    pub fn inverse_values(&self, u: &[f64]) -> Vec<f64> {
        u.iter()
            .zip(&self.transforms)
            .map(|(&u, t)| t.inverse(u))
            .collect()
    }

    pub fn untransform(&self, u: &[f64]) -> ParameterVector {
        ParameterVector::from_pairs(self.names.iter().copied().zip(self.inverse_values(u)))
    }

    pub fn jacobian_diag(&self, u: &[f64]) -> Vec<f64> {
        u.iter()
            .zip(&self.transforms)
            .map(|(&u, t)| t.derivative(u))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn simple_round_trips() {
        let t = ParamTransform::new(ModelId::Ls5, false);
        let pv = ModelId::Ls5.params(&[1.0, 1.0]).unwrap();
        assert_eq!(t.transform(&pv).unwrap(), vec![0.0, 0.0]);
        let th = Transform::default_for(Param::Theta);
        assert_eq!(th.forward(0.5), Some(0.0));
        assert_eq!(th.inverse(0.0), 0.5);
        assert!(Transform::default_for(Param::R).inverse(RESPIRATION_OFFSET.ln()) < 1e-25);
    }

    #[test]
    fn out_of_domain() {
        let t = ParamTransform::new(ModelId::Ls6, false);
        let err = t.forward_values(&[1.0, 1.0, 1.5]).unwrap_err();
        assert!(matches!(err, Error::TransformDomain { name: "theta", .. }));
        assert!(Transform::default_for(Param::Gamma).forward(10.0).is_none());
        assert!(Transform::default_for(Param::B).forward(1.0).is_none());
    }

    #[test]
    fn bounds_override() {
        let t = ParamTransform::new(ModelId::Ls5, false)
            .with_bounds(Param::PMax, 5.0, 20.0)
            .unwrap();
        let u = t.forward_values(&[10.0, 3.0]).unwrap();
        for x in [-50.0, 0.0, 50.0] {
            let v = t.inverse_values(&[x, u[1]]);
            assert!((5.0..=20.0).contains(&v[0]));
        }
        assert!(ParamTransform::new(ModelId::Ls6, false)
            .with_bounds(Param::Theta, 0.0, 2.0)
            .is_err());
    }

    fn sample(p: Param, a: f64) -> f64 {
        // a in [0, 1)
        match p {
            Param::Theta | Param::ThetaBeta => 0.001 + 0.998 * a,
            Param::Gamma => 1.01 + 8.98 * a,
            Param::B => 1.0 + 10f64.powf(-3.0 + 5.0 * a),
            Param::R => 10f64.powf(-3.0 + 5.0 * a),
            _ => 10f64.powf(-4.0 + 8.0 * a),
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]
        #[test]
        fn round_trip(model_idx in 0usize..24, resp: bool, draws in prop::collection::vec(0.0f64..1.0, 5)) {
            let model = ModelId::ALL[model_idx];
            let t = ParamTransform::new(model, resp);
            let values: Vec<f64> = t.names().iter().zip(&draws).map(|(&p, &a)| sample(p, a)).collect();
            let u = t.forward_values(&values).unwrap();
            let back = t.inverse_values(&u);
            for (x, y) in values.iter().zip(&back) {
                prop_assert!(((x - y) / x).abs() < 1e-12, "{} vs {}", x, y);
            }
        }
    }
}
