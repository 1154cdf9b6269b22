use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::simplex::{fitness_into, mean_of, FitnessParams, SimplexMeasure};

use super::integrate::{integrate, IntegrateOptions};
use super::rhs_into;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StationaryOptions {
    /// Target for the largest stationarity residual.
    pub tol: f64,
    pub max_newton: usize,
    /// Number of integrate-then-retry rounds after Newton stalls.
    pub fallback_rounds: usize,
}

impl Default for StationaryOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_newton: 60,
            fallback_rounds: 3,
        }
    }
}

impl StationaryOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self { tol, ..Self::default() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stationary {
    pub measure: SimplexMeasure,
    /// Largest entry of `stationary_residual` at `measure`.
    pub residual: f64,
    pub newton_iterations: usize,
    pub fallback_rounds: usize,
}

/// `m_x - mbar + mu (1/pi_x - (2L+1))` per site; zero exactly at interior
/// stationary points.
pub fn stationary_residual(pi: &SimplexMeasure, p: &FitnessParams) -> Result<Vec<f64>> {
    if pi.len() != p.len() {
        return Err(Error::DimensionMismatch {
            expected: p.len(),
            got: pi.len(),
        });
    }
    if let Some((index, &value)) = pi.values().iter().enumerate().find(|(_, v)| **v <= 0.0) {
        return Err(Error::NonInteriorMeasure { index, value });
    }
    Ok(residual_raw(p, pi.values()))
}

fn residual_raw(p: &FitnessParams, pi: &[f64]) -> Vec<f64> {
    let mut m = vec![0.0; pi.len()];
    fitness_into(p, pi, &mut m);
    let mbar = mean_of(pi, &m);
    let n = pi.len() as f64;
    pi.iter()
        .zip(&m)
        .map(|(q, mx)| mx - mbar + p.mu() * (1.0 / q - n))
        .collect()
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |a, r| a.max(r.abs()))
}

fn best_residual(p: &FitnessParams, pi: &[f64]) -> f64 {
    if pi.iter().all(|&q| q > 0.0) {
        max_abs(&residual_raw(p, pi))
    } else {
        f64::INFINITY
    }
}

/// Newton system: the first `n - 1` components of the vector field plus the
/// mass constraint.
fn system(p: &FitnessParams, pi: &[f64], m: &mut [f64]) -> Vec<f64> {
    let n = pi.len();
    let mut out = vec![0.0; n];
    rhs_into(p, pi, m, &mut out);
    out[n - 1] = pi.iter().sum::<f64>() - 1.0;
    out
}

fn jacobian(p: &FitnessParams, pi: &[f64]) -> DMatrix<f64> {
    let n = pi.len();
    let g = p.interaction();
    let mut m = vec![0.0; n];
    fitness_into(p, pi, &mut m);
    let mbar = mean_of(pi, &m);
    let nf = n as f64;
    // d mbar / d pi_y = (G^T pi)_y + m_y
    let grad: Vec<f64> = (0..n)
        .map(|y| (0..n).map(|x| g[x * n + y] * pi[x]).sum::<f64>() + m[y])
        .collect();
    DMatrix::from_fn(n, n, |x, y| {
        if x == n - 1 {
            1.0
        } else {
            let diag = if x == y { m[x] - mbar - p.mu() * nf } else { 0.0 };
            diag + pi[x] * (g[x * n + y] - grad[y])
        }
    })
}

fn newton(p: &FitnessParams, start: &[f64], opts: &StationaryOptions) -> (Vec<f64>, usize, bool) {
    let n = start.len();
    let mut pi = start.to_vec();
    let mut m = vec![0.0; n];
    let mut f = system(p, &pi, &mut m);
    let mut norm = max_abs(&f);
    for iter in 0..opts.max_newton {
        if best_residual(p, &pi) < opts.tol {
            return (pi, iter, true);
        }
        let j = jacobian(p, &pi);
        let rhs = DVector::from_iterator(n, f.iter().map(|v| -v));
        let Some(step) = j.lu().solve(&rhs) else {
            return (pi, iter, false);
        };
        let mut scale = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let trial: Vec<f64> = pi.iter().zip(step.iter()).map(|(q, d)| q + scale * d).collect();
            if trial.iter().all(|&q| q > 0.0) {
                let ft = system(p, &trial, &mut m);
                let nt = max_abs(&ft);
                if nt < norm {
                    pi = trial;
                    f = ft;
                    norm = nt;
                    accepted = true;
                    break;
                }
            }
            scale *= 0.5;
        }
        if !accepted {
            let ok = best_residual(p, &pi) < opts.tol;
            return (pi, iter, ok);
        }
    }
    let ok = best_residual(p, &pi) < opts.tol;
    (pi, opts.max_newton, ok)
}

/// Finds a stationary point of the selection-mutation flow near `init`.
///
/// Damped Newton runs first. When it stalls, the flow is integrated for
/// `10 / mu` time units from the best iterate and Newton is retried, so the
/// basin the flow selects from `init` is the one reported.
pub fn find_stationary(p: &FitnessParams, init: &SimplexMeasure, opts: StationaryOptions) -> Result<Stationary> {
    if p.mu() <= 0.0 {
        return Err(Error::InvalidParams("stationary solver needs mu > 0".into()));
    }
    if init.len() != p.len() {
        return Err(Error::DimensionMismatch {
            expected: p.len(),
            got: init.len(),
        });
    }
    let floor = 1.0 / (p.len() as f64 + 1.0 / p.mu());
    let mut start: Vec<f64> = init.values().iter().map(|&q| q.max(floor * 1e-3)).collect();
    let total: f64 = start.iter().sum();
    start.iter_mut().for_each(|q| *q /= total);

    let mut iterations = 0;
    for round in 0..=opts.fallback_rounds {
        let (pi, its, ok) = newton(p, &start, &opts);
        iterations += its;
        if ok {
            let measure = SimplexMeasure::new(pi)?;
            let residual = max_abs(&residual_raw(p, measure.values()));
            return Ok(Stationary {
                measure,
                residual,
                newton_iterations: iterations,
                fallback_rounds: round,
            });
        }
        if round == opts.fallback_rounds {
            return Err(Error::NoConvergence {
                iterations,
                best_residual: best_residual(p, &pi).min(best_residual(p, &start)),
            });
        }
        let from = if best_residual(p, &pi) < best_residual(p, &start) {
            pi
        } else {
            start
        };
        let traj = integrate(
            &SimplexMeasure::from_raw(from),
            p,
            10.0 / p.mu(),
            IntegrateOptions::rk45(1e-10).record_every(usize::MAX),
        )?;
        start = traj.last().values().to_vec();
    }
    unreachable!("loop returns on its final round")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simplex::Kernel;

    #[test]
    fn one_dimensional_unique_point() {
        let p = FitnessParams::one_dimensional(0.2, 1.0 / 70.0).unwrap();
        for start in [0.1, 0.3, 0.5, 0.9] {
            let other = (1.0 - start) / 2.0;
            let init = SimplexMeasure::new(vec![other, start, other]).unwrap();
            let s = find_stationary(&p, &init, StationaryOptions::default()).unwrap();
            assert!((s.measure.values()[1] - 1.0 / 3.0).abs() < 1e-9, "start {start}");
            assert!(s.residual < 1e-10);
        }
    }

    #[test]
    fn outputs_respect_lower_bound_and_order_by_fitness() {
        let p = FitnessParams::symmetric_from_half(&[1.0, 0.8, 0.55, 0.3], Kernel::Threshold { b: 0.15, m: 4 }, 0.01)
            .unwrap();
        let init = SimplexMeasure::uniform(3);
        let s = find_stationary(&p, &init, StationaryOptions::default()).unwrap();
        let floor = 1.0 / (7.0 + 1.0 / p.mu());
        assert!(s.measure.values().iter().all(|&q| q >= floor * (1.0 - 1e-10)));
        let m = crate::simplex::fitness_vector(&s.measure, &p).unwrap();
        let v = s.measure.values();
        for i in 0..v.len() {
            for j in 0..v.len() {
                if m[i] > m[j] + 1e-12 {
                    assert!(v[i] > v[j]);
                }
            }
        }
    }

    #[test]
    fn rejects_zero_mutation() {
        let p = FitnessParams::one_dimensional(0.2, 0.0).unwrap();
        assert!(find_stationary(&p, &SimplexMeasure::uniform(1), StationaryOptions::default()).is_err());
    }
}
