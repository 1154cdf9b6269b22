//! The conditioned Dieckmann-Doebeli map: resample by fitness, mutate,
//! normalize.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;

use crate::error::{Error, Result};
use crate::simplex::SimplexMeasure;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitnessVariant {
    /// `max(0, 1 - (C * pi)_x / K_x)`.
    Linear,
    /// `K_x / (C * pi)_x`.
    Ratio,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Mutation {
    /// Convolution with `mu d_{-1} + (1 - 2 mu) d_0 + mu d_1`; a step that
    /// would leave the grid is suppressed.
    Nearest { mu: f64 },
    /// Row-major stochastic matrix, entry `(y, x)` is the chance that a
    /// parent at `y` produces offspring at `x`.
    Matrix(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DdParams {
    half_width: usize,
    capacity: Vec<f64>,
    competition: Vec<f64>,
    variant: FitnessVariant,
    mutation: Mutation,
    rectangular: Option<usize>,
}

impl DdParams {
    /// `competition` lists `C_d` for `d` in `[-2L, 2L]`.
    pub fn new(capacity: Vec<f64>, competition: Vec<f64>, variant: FitnessVariant, mutation: Mutation) -> Result<Self> {
        if capacity.len().is_multiple_of(2) {
            return Err(Error::InvalidParams("capacity needs an odd number of sites".into()));
        }
        let half_width = capacity.len() / 2;
        let n = capacity.len();
        if capacity.iter().any(|k| !(*k >= 0.0) || !k.is_finite()) {
            return Err(Error::InvalidParams("capacity entries must be finite and >= 0".into()));
        }
        if competition.len() != 4 * half_width + 1 {
            return Err(Error::DimensionMismatch {
                expected: 4 * half_width + 1,
                got: competition.len(),
            });
        }
        let nc = competition.len();
        if competition.iter().any(|c| !(*c >= 0.0) || !c.is_finite())
            || (0..nc).any(|i| competition[i] != competition[nc - 1 - i])
        {
            return Err(Error::BadKernel("competition kernel must be symmetric and >= 0".into()));
        }
        match &mutation {
            Mutation::Nearest { mu } => {
                if !(0.0..=0.5).contains(mu) {
                    return Err(Error::InvalidParams(format!("mutation weight {mu} outside [0, 1/2]")));
                }
            }
            Mutation::Matrix(a) => {
                if a.len() != n * n {
                    return Err(Error::DimensionMismatch {
                        expected: n * n,
                        got: a.len(),
                    });
                }
                for row in a.chunks(n) {
                    if row.iter().any(|v| !(*v >= 0.0)) || (row.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
                        return Err(Error::InvalidParams("mutation matrix rows must be stochastic".into()));
                    }
                }
            }
        }
        Ok(Self {
            half_width,
            capacity,
            competition,
            variant,
            mutation,
            rectangular: None,
        })
    }

    /// `K_x = 1{|x| <= L-1}`, `C_x = 1{|x| <= M}` with ratio fitness and
    /// nearest-neighbour mutation; `M` even with `L-1 <= M < 2(L-1)`.
    pub fn rectangular(half_width: usize, m: usize, mu: f64) -> Result<Self> {
        if half_width < 2 || !m.is_multiple_of(2) || m + 1 < half_width || m >= 2 * (half_width - 1) {
            return Err(Error::BadKernel(format!(
                "rectangular kernels need M even with L-1 <= M < 2(L-1), got L = {half_width}, M = {m}"
            )));
        }
        let l = half_width as i64;
        let capacity = (-l..=l).map(|x| f64::from(u8::from(x.abs() < l))).collect();
        let competition = (-2 * l..=2 * l)
            .map(|d| f64::from(u8::from(d.unsigned_abs() as usize <= m)))
            .collect();
        let mut p = Self::new(capacity, competition, FitnessVariant::Ratio, Mutation::Nearest { mu })?;
        p.rectangular = Some(m);
        Ok(p)
    }

    pub fn with_mutation(&self, mutation: Mutation) -> Result<Self> {
        let mut p = Self::new(self.capacity.clone(), self.competition.clone(), self.variant, mutation)?;
        p.rectangular = self.rectangular;
        Ok(p)
    }

    pub fn half_width(&self) -> usize {
        self.half_width
    }

    pub fn len(&self) -> usize {
        self.capacity.len()
    }

    pub fn is_empty(&self) -> bool {
        self.capacity.is_empty()
    }

    pub fn variant(&self) -> FitnessVariant {
        self.variant
    }

    pub fn mutation(&self) -> &Mutation {
        &self.mutation
    }

    /// The competition range `M` of rectangular parameters.
    pub fn rectangular_range(&self) -> Option<usize> {
        self.rectangular
    }

    fn check(&self, pi: &SimplexMeasure) -> Result<()> {
        if pi.len() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                got: pi.len(),
            });
        }
        Ok(())
    }

    /// `(C * pi)_x`, summed symmetrically in the offset so mirrored inputs
    /// give bitwise mirrored outputs.
    fn competition_mass(&self, pi: &[f64], x: usize) -> f64 {
        let n = pi.len() as i64;
        let centre = 2 * self.half_width as i64;
        let at = |i: i64| if (0..n).contains(&i) { pi[i as usize] } else { 0.0 };
        let xi = x as i64;
        let mut total = self.competition[centre as usize] * pi[x];
        for d in 1..=centre {
            let c = self.competition[(centre + d) as usize];
            total += c * at(xi + d) + c * at(xi - d);
        }
        total
    }
}

/// Fitness `V_x(pi)` for every site.
pub fn dd_fitness(pi: &SimplexMeasure, p: &DdParams) -> Result<Vec<f64>> {
    p.check(pi)?;
    fitness_raw(pi.values(), p)
}

fn fitness_raw(pi: &[f64], p: &DdParams) -> Result<Vec<f64>> {
    let l = p.half_width as i64;
    (0..pi.len())
        .map(|x| {
            let k = p.capacity[x];
            if k == 0.0 {
                return Ok(0.0);
            }
            let mass = p.competition_mass(pi, x);
            match p.variant {
                FitnessVariant::Linear => Ok((1.0 - mass / k).max(0.0)),
                FitnessVariant::Ratio if mass > 0.0 => Ok(k / mass),
                FitnessVariant::Ratio => Err(Error::DivisionByZeroSupport { site: x as i64 - l }),
            }
        })
        .collect()
}

fn mutate(weights: &[f64], mutation: &Mutation) -> Vec<f64> {
    let n = weights.len();
    match mutation {
        Mutation::Nearest { mu } => (0..n)
            .map(|x| {
                let stay = if x == 0 || x == n - 1 { 1.0 - mu } else { 1.0 - 2.0 * mu };
                let left = if x > 0 { weights[x - 1] } else { 0.0 };
                let right = if x + 1 < n { weights[x + 1] } else { 0.0 };
                stay * weights[x] + mu * (left + right)
            })
            .collect(),
        Mutation::Matrix(a) => (0..n)
            .map(|x| (0..n).map(|y| a[y * n + x] * weights[y]).sum())
            .collect(),
    }
}

/// One step of the conditioned map and its normalization constant
/// `sum_x pi_x V_x`.
fn step_raw(pi: &[f64], p: &DdParams) -> Result<(Vec<f64>, f64)> {
    let v = fitness_raw(pi, p)?;
    let resampled: Vec<f64> = pi.iter().zip(&v).map(|(a, b)| a * b).collect();
    let vbar: f64 = resampled.iter().sum();
    if !(vbar > 0.0) {
        return Err(Error::ZeroTotalFitness);
    }
    let mutated = mutate(&resampled, &p.mutation);
    let total: f64 = mutated.iter().sum();
    Ok((mutated.into_iter().map(|w| w / total).collect(), vbar))
}

/// One step: resample in proportion to `pi_x V_x`, mutate, normalize.
pub fn dd_step(pi: &SimplexMeasure, p: &DdParams) -> Result<SimplexMeasure> {
    p.check(pi)?;
    let (next, _) = step_raw(pi.values(), p)?;
    Ok(SimplexMeasure::from_raw(next))
}

/// Normalization constant `sum_x pi_x V_x(pi)`.
pub fn dd_mean_fitness(pi: &SimplexMeasure, p: &DdParams) -> Result<f64> {
    let v = dd_fitness(pi, p)?;
    Ok(pi.values().iter().zip(&v).map(|(a, b)| a * b).sum())
}

/// Finite-population version: `n` offspring each pick a parent with
/// probability proportional to `pi_x V_x` and then mutate.
pub fn dd_sample_step<R: Rng + ?Sized>(
    pi: &SimplexMeasure,
    p: &DdParams,
    n: usize,
    rng: &mut R,
) -> Result<SimplexMeasure> {
    p.check(pi)?;
    if n == 0 {
        return Err(Error::InvalidParams("population size must be positive".into()));
    }
    let v = fitness_raw(pi.values(), p)?;
    let weights: Vec<f64> = pi.values().iter().zip(&v).map(|(a, b)| a * b).collect();
    let parents = WeightedIndex::new(&weights).map_err(|_| Error::ZeroTotalFitness)?;
    let sites = p.len();
    let mut counts = vec![0u64; sites];
    for _ in 0..n {
        let y = parents.sample(rng);
        let x = match &p.mutation {
            Mutation::Nearest { mu } => {
                let u: f64 = rng.random();
                if u < *mu && y > 0 {
                    y - 1
                } else if u >= 1.0 - mu && y + 1 < sites {
                    y + 1
                } else {
                    y
                }
            }
            Mutation::Matrix(a) => {
                let row = &a[y * sites..(y + 1) * sites];
                WeightedIndex::new(row)
                    .map_err(|_| Error::ZeroTotalFitness)?
                    .sample(rng)
            }
        };
        counts[x] += 1;
    }
    Ok(SimplexMeasure::from_raw(
        counts.iter().map(|&c| c as f64 / n as f64).collect(),
    ))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StationaryOptions {
    pub max_iter: usize,
    /// Target for `|| step(nu) - nu ||_inf`.
    pub tol: f64,
}

impl Default for StationaryOptions {
    fn default() -> Self {
        Self {
            max_iter: 20_000_000,
            tol: 1e-12,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DdStationary {
    pub measure: SimplexMeasure,
    pub iterations: usize,
    pub residual: f64,
    pub vbar: f64,
}

fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

/// Fixed-point iteration of `dd_step` until the sup-norm residual drops
/// below `opts.tol`.
pub fn dd_stationary(p: &DdParams, init: &SimplexMeasure, opts: StationaryOptions) -> Result<DdStationary> {
    p.check(init)?;
    let mut current = init.values().to_vec();
    let mut best = (f64::INFINITY, current.clone());
    for iter in 1..=opts.max_iter {
        let (next, _) = step_raw(&current, p)?;
        let residual = sup_diff(&next, &current);
        if residual < best.0 {
            best = (residual, current.clone());
        }
        current = next;
        if residual < opts.tol {
            // The residual reported is the one of the returned measure.
            let (after, vbar_after) = step_raw(&current, p)?;
            let final_residual = sup_diff(&after, &current);
            return Ok(DdStationary {
                measure: SimplexMeasure::from_raw(current),
                iterations: iter,
                residual: final_residual,
                vbar: vbar_after,
            });
        }
    }
    Err(Error::NoConvergence {
        iterations: opts.max_iter,
        best_residual: best.0,
    })
}

/// Mass of `[-M/2, M/2]` for rectangular parameters.
pub fn middle_mass(nu: &SimplexMeasure, p: &DdParams) -> Result<f64> {
    p.check(nu)?;
    let m = p
        .rectangular
        .ok_or_else(|| Error::InvalidParams("middle mass is defined for rectangular kernels".into()))?;
    let half = (m / 2) as i64;
    Ok(nu.mass_between(-half, half))
}

/// Roots of `mu + (1 - 2 mu - vbar) r + mu r^2 = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RecurrenceRoots {
    /// Two distinct real roots `beta` and `1 / beta`, `|beta| >= 1`.
    Real {
        beta: f64,
        inverse: f64,
    },
    Double {
        root: f64,
    },
    /// Complex conjugate pair `modulus * exp(+-i angle)`.
    Complex {
        modulus: f64,
        angle: f64,
    },
}

pub fn recurrence_roots(mu: f64, vbar: f64) -> Result<RecurrenceRoots> {
    if !(mu > 0.0) || !vbar.is_finite() {
        return Err(Error::InvalidParams(format!(
            "need mu > 0 and finite vbar, got {mu}, {vbar}"
        )));
    }
    let alpha = vbar - 1.0;
    let disc = alpha * (alpha + 4.0 * mu);
    let scale = alpha * alpha + 4.0 * mu * alpha.abs();
    let centre = alpha + 2.0 * mu;
    if disc.abs() <= 1e-10 * scale || scale == 0.0 {
        return Ok(RecurrenceRoots::Double {
            root: centre / (2.0 * mu),
        });
    }
    if disc > 0.0 {
        let sq = disc.sqrt();
        // Larger-magnitude root first, the other from the product being 1.
        let beta = (centre + centre.signum() * sq) / (2.0 * mu);
        Ok(RecurrenceRoots::Real {
            beta,
            inverse: 1.0 / beta,
        })
    } else {
        Ok(RecurrenceRoots::Complex {
            modulus: 1.0,
            angle: (-disc).sqrt().atan2(centre),
        })
    }
}
