//! The selection-mutation equation
//!
//! `d/dt pi_x = pi_x (m_x - mbar) + mu (1 - (2L+1) pi_x)`
//!
//! on the probability simplex, with integrators, a stationary-point solver,
//! the three-site reduction to a cubic, and checkers for the invariant sets
//! and constants from the small- and large-mutation analysis.

mod constants;
mod integrate;
mod invariant;
mod reduction;
mod stationary;

pub use constants::{theory_constants, SpeciationConstants};
pub use integrate::{integrate, IntegrateOptions, Method, SelmutTrajectory};
pub use invariant::{invariant_set_check, InvariantCheck, InvariantSet};
pub use reduction::{cubic_reduce_1d, reduced_rate_1d, CubicReduction, CubicRoot};
pub use stationary::{find_stationary, stationary_residual, Stationary, StationaryOptions};

use crate::error::Result;
use crate::simplex::{fitness_into, mean_of, FitnessParams, SimplexMeasure};

/// Right-hand side of the selection-mutation equation.
pub fn selmut_rhs(pi: &SimplexMeasure, p: &FitnessParams) -> Result<Vec<f64>> {
    p.check_dims(pi.len())?;
    let mut out = vec![0.0; pi.len()];
    rhs_into(p, pi.values(), &mut vec![0.0; pi.len()], &mut out);
    Ok(out)
}

pub(crate) fn rhs_into(p: &FitnessParams, pi: &[f64], m: &mut [f64], out: &mut [f64]) {
    fitness_into(p, pi, m);
    let mbar = mean_of(pi, m);
    let n = pi.len() as f64;
    let mu = p.mu();
    for ((o, &q), &mx) in out.iter_mut().zip(pi).zip(m.iter()) {
        *o = q * (mx - mbar) + mu * (1.0 - n * q);
    }
}

/// Exact rate of change of the mean fitness along the flow,
/// `<grad mbar, rhs>` with `grad mbar = (G + G^T) pi`.
pub fn mean_fitness_rate(pi: &SimplexMeasure, p: &FitnessParams) -> Result<f64> {
    let rhs = selmut_rhs(pi, p)?;
    let n = pi.len();
    let g = p.interaction();
    let v = pi.values();
    let rate = (0..n)
        .map(|y| {
            let grad: f64 = (0..n).map(|x| (g[x * n + y] + g[y * n + x]) * v[x]).sum();
            grad * rhs[y]
        })
        .sum();
    Ok(rate)
}

/// Threshold below which a coordinate is pushed upwards by the flow
/// regardless of fitness, `mu / (2 L mu + mu + 1)`.
pub fn absorption_threshold(p: &FitnessParams) -> f64 {
    let mu = p.mu();
    mu / (2.0 * p.half_width() as f64 * mu + mu + 1.0)
}
