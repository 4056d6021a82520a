//! Nelder–Mead downhill simplex.

use crate::error::{Error, Result};

const REFLECTION: f64 = 1.0;
const EXPANSION: f64 = 2.0;
const CONTRACTION: f64 = 0.5;
const SHRINK: f64 = 0.5;
const INITIAL_STEP: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NelderMeadOptions {
    pub max_iterations: usize,
    /// Convergence threshold on `max f - min f` over the simplex vertices.
    pub tolerance: f64,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        NelderMeadOptions {
            max_iterations: 2000,
            tolerance: 1e-10,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NelderMeadResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Best vertex value after each iteration.
    pub best_history: Vec<f64>,
}

/// Minimizes `objective` from `start`. Non-finite objective values are
/// treated as `+inf`, so they are never accepted over a finite vertex.
pub fn nelder_mead<F>(mut objective: F, start: &[f64], options: &NelderMeadOptions) -> Result<NelderMeadResult>
where
    F: FnMut(&[f64]) -> f64,
{
    let mut f = |x: &[f64]| {
        let y = objective(x);
        if y.is_nan() {
            f64::INFINITY
        } else {
            y
        }
    };
    let dim = start.len();
    let f0 = f(start);
    if !f0.is_finite() {
        return Err(Error::NonFiniteStart);
    }
    if dim == 0 {
        return Ok(NelderMeadResult {
            x: Vec::new(),
            value: f0,
            iterations: 0,
            converged: true,
            best_history: Vec::new(),
        });
    }

    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(dim + 1);
    simplex.push((start.to_vec(), f0));
    for k in 0..dim {
        let mut x = start.to_vec();
        x[k] += INITIAL_STEP * x[k].abs().max(1.0);
        let y = f(&x);
        simplex.push((x, y));
    }

    let mut iterations = 0;
    let mut converged = false;
    let mut best_history = Vec::new();
    loop {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let best = simplex[0].1;
        let worst = simplex[dim].1;
        // A flat simplex straddling a minimum (equal values on both sides)
        // is caught by probing its centroid before declaring convergence.
        if worst - best < options.tolerance && f(&centroid_of(&simplex)) >= best - options.tolerance {
            converged = true;
            break;
        }
        if iterations >= options.max_iterations {
            break;
        }
        iterations += 1;

        let mut centroid = vec![0.0; dim];
        for (x, _) in &simplex[..dim] {
            for (c, xi) in centroid.iter_mut().zip(x) {
                *c += xi;
            }
        }
        centroid.iter_mut().for_each(|c| *c /= dim as f64);

        let toward = |coef: f64, from: &[f64]| -> Vec<f64> {
            centroid
                .iter()
                .zip(from)
                .map(|(c, w)| c + coef * (c - w))
                .collect()
        };
        let worst_x = simplex[dim].0.clone();
        let second_worst = simplex[dim - 1].1;

        let xr = toward(REFLECTION, &worst_x);
        let fr = f(&xr);
        if fr < best {
            let xe = toward(EXPANSION, &worst_x);
            let fe = f(&xe);
            simplex[dim] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < second_worst {
            simplex[dim] = (xr, fr);
        } else {
            let (xc, fc, accept) = if fr < worst {
                let xc = toward(REFLECTION * CONTRACTION, &worst_x);
                let fc = f(&xc);
                let ok = fc <= fr;
                (xc, fc, ok)
            } else {
                let xc = toward(-CONTRACTION, &worst_x);
                let fc = f(&xc);
                let ok = fc < worst;
                (xc, fc, ok)
            };
            if accept {
                simplex[dim] = (xc, fc);
            } else {
                let anchor = simplex[0].0.clone();
                for v in simplex.iter_mut().skip(1) {
                    for (xi, ai) in v.0.iter_mut().zip(&anchor) {
                        *xi = ai + SHRINK * (*xi - ai);
                    }
                    v.1 = f(&v.0);
                }
            }
        }
        let current_best = simplex.iter().map(|v| v.1).fold(f64::INFINITY, f64::min);
        best_history.push(current_best);
    }

    let (x, value) = simplex.swap_remove(0);
    Ok(NelderMeadResult {
        x,
        value,
        iterations,
        converged,
        best_history,
    })
}

fn centroid_of(simplex: &[(Vec<f64>, f64)]) -> Vec<f64> {
    let mut c = vec![0.0; simplex[0].0.len()];
    for (x, _) in simplex {
        for (ci, xi) in c.iter_mut().zip(x) {
            *ci += xi;
        }
    }
    let m = simplex.len() as f64;
    c.iter_mut().for_each(|ci| *ci /= m);
    c
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_1d() {
        let r = nelder_mead(|x| (x[0] - 3.0).powi(2), &[0.0], &NelderMeadOptions::default()).unwrap();
        assert!((r.x[0] - 3.0).abs() < 1e-5, "{:?}", r.x);
        assert!(r.converged);
    }

    #[test]
    fn constant_objective_converges_immediately() {
        let r = nelder_mead(|_| 7.0, &[1.0, 2.0], &NelderMeadOptions::default()).unwrap();
        assert!(r.converged);
        assert!(r.iterations <= 1);
    }

    #[test]
    fn rosenbrock_with_restarts() {
        let rosen = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
        let opts = NelderMeadOptions {
            max_iterations: 5000,
            tolerance: 1e-14,
        };
        let mut x = vec![-1.2, 1.0];
        for _ in 0..4 {
            x = nelder_mead(rosen, &x, &opts).unwrap().x;
        }
        assert!((x[0] - 1.0).abs() < 1e-3 && (x[1] - 1.0).abs() < 1e-3, "{x:?}");
    }

    #[test]
    fn best_value_never_increases() {
        let f = |x: &[f64]| (x[0] - 1.0).powi(2) + 3.0 * (x[1] + 2.0).powi(2) + x[0] * x[1];
        let r = nelder_mead(f, &[5.0, 5.0], &NelderMeadOptions::default()).unwrap();
        assert!(r.best_history.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn non_finite_start_is_an_error() {
        let err = nelder_mead(|_| f64::NAN, &[0.0], &NelderMeadOptions::default()).unwrap_err();
        assert_eq!(err, Error::NonFiniteStart);
    }

    #[test]
    fn deterministic() {
        let f = |x: &[f64]| (x[0] - 0.3).powi(4) + (x[1] * x[0] - 1.0).powi(2);
        let a = nelder_mead(f, &[2.0, 2.0], &NelderMeadOptions::default()).unwrap();
        let b = nelder_mead(f, &[2.0, 2.0], &NelderMeadOptions::default()).unwrap();
        assert_eq!(a, b);
    }
}
