//! Probability measures on the phenotype grid `[-L, L]` and the fitness
//! functionals evaluated on them.
//!
//! Fitness at site `x` is `m_x = K_x * sum_z B_{x-z} K_z pi_z`, where `K` is the
//! carrying capacity and `B` the cooperation kernel. Threshold kernels
//! `B_d = b + (1 - b) 1{|d| >= M}` are expanded to an explicit vector when the
//! parameters are built, so every evaluation goes through the same matrix.

use std::fmt::Write as _;

use crate::error::{Error, Result};

/// Sums further than this from one are rejected instead of renormalized.
pub const RENORMALIZE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct SimplexMeasure {
    half_width: usize,
    values: Vec<f64>,
}

impl SimplexMeasure {
    /// Builds a measure from masses listed from `-L` to `L`.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len().is_multiple_of(2) {
            return Err(Error::InvalidMeasure(format!(
                "expected an odd number of sites, got {}",
                values.len()
            )));
        }
        if let Some((i, v)) = values.iter().enumerate().find(|(_, v)| !v.is_finite() || **v < 0.0) {
            return Err(Error::InvalidMeasure(format!("entry {i} is {v}")));
        }
        let total: f64 = values.iter().sum();
        if (total - 1.0).abs() > RENORMALIZE_TOLERANCE {
            return Err(Error::InvalidMeasure(format!("masses sum to {total}")));
        }
        let half_width = values.len() / 2;
        let values = values.into_iter().map(|v| v / total).collect();
        Ok(Self { half_width, values })
    }

    /// Normalizes arbitrary non-negative weights.
    pub fn from_weights(weights: &[f64]) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) || !total.is_finite() {
            return Err(Error::InvalidMeasure(format!("weights sum to {total}")));
        }
        Self::new(weights.iter().map(|w| w / total).collect())
    }

    /// Wraps a state produced by an integrator without renormalizing it, so
    /// that mass drift stays observable.
    pub(crate) fn from_raw(values: Vec<f64>) -> Self {
        debug_assert!(values.len() % 2 == 1);
        Self {
            half_width: values.len() / 2,
            values,
        }
    }

    pub fn uniform(half_width: usize) -> Self {
        let n = 2 * half_width + 1;
        Self::from_raw(vec![1.0 / n as f64; n])
    }

    pub fn point_mass(half_width: usize, site: i64) -> Result<Self> {
        let mut values = vec![0.0; 2 * half_width + 1];
        let idx = site_index(half_width, site)
            .ok_or_else(|| Error::InvalidMeasure(format!("site {site} outside [-{half_width}, {half_width}]")))?;
        values[idx] = 1.0;
        Ok(Self::from_raw(values))
    }

    /// Builds a reflection-symmetric measure from the masses at `0, 1, ..., L`.
    /// The mirrored entries are copied, so the symmetry is exact.
    pub fn symmetric_from_half(half: &[f64]) -> Result<Self> {
        let l = half
            .len()
            .checked_sub(1)
            .ok_or_else(|| Error::InvalidMeasure("empty half profile".into()))?;
        let mut values = vec![0.0; 2 * l + 1];
        for (k, &v) in half.iter().enumerate() {
            values[l + k] = v;
            values[l - k] = v;
        }
        Self::new(values)
    }

    pub fn half_width(&self) -> usize {
        self.half_width
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Mass at site `x`; zero outside the grid.
    pub fn at(&self, x: i64) -> f64 {
        site_index(self.half_width, x).map_or(0.0, |i| self.values[i])
    }

    pub fn sites(&self) -> impl Iterator<Item = i64> {
        let l = self.half_width as i64;
        -l..=l
    }

    pub fn total_mass(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn is_interior(&self) -> bool {
        self.values.iter().all(|&v| v > 0.0)
    }

    pub fn sup_distance(&self, other: &Self) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Mass of the sites in `[lo, hi]`.
    pub fn mass_between(&self, lo: i64, hi: i64) -> f64 {
        (lo..=hi).map(|x| self.at(x)).sum()
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!("# simplex L={}\nx,pi_x\n", self.half_width);
        for (x, v) in self.sites().zip(&self.values) {
            let _ = writeln!(out, "{x},{v:e}");
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::InvalidMeasure("empty input".into()))?;
        let half_width: usize = header
            .strip_prefix("# simplex L=")
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| Error::InvalidMeasure(format!("bad header {header:?}")))?;
        let mut values = vec![f64::NAN; 2 * half_width + 1];
        for line in lines.filter(|l| !l.trim().is_empty()) {
            if line.trim() == "x,pi_x" {
                continue;
            }
            let (x, v) = line
                .split_once(',')
                .ok_or_else(|| Error::InvalidMeasure(format!("bad row {line:?}")))?;
            let x: i64 = x
                .trim()
                .parse()
                .map_err(|_| Error::InvalidMeasure(format!("bad site in {line:?}")))?;
            let v: f64 = v
                .trim()
                .parse()
                .map_err(|_| Error::InvalidMeasure(format!("bad mass in {line:?}")))?;
            let idx =
                site_index(half_width, x).ok_or_else(|| Error::InvalidMeasure(format!("site {x} out of range")))?;
            values[idx] = v;
        }
        if values.iter().any(|v| v.is_nan()) {
            return Err(Error::InvalidMeasure("missing sites".into()));
        }
        Self::new(values)
    }
}

pub(crate) fn site_index(half_width: usize, x: i64) -> Option<usize> {
    let l = half_width as i64;
    (-l..=l).contains(&x).then(|| (x + l) as usize)
}

/// The cooperation kernel, either listed on `[-2L, 2L]` or in threshold form.
#[derive(Debug, Clone, PartialEq)]
pub enum Kernel {
    Explicit(Vec<f64>),
    Threshold { b: f64, m: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Threshold {
    pub b: f64,
    pub m: usize,
}

impl Threshold {
    /// `M - L`, the half-width of the block of sites that cooperate only at
    /// the base level `b`.
    pub fn inner(&self, half_width: usize) -> usize {
        self.m - half_width
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitnessParams {
    half_width: usize,
    capacity: Vec<f64>,
    cooperation: Vec<f64>,
    threshold: Option<Threshold>,
    mu: f64,
    symmetric: bool,
    interaction: Vec<f64>,
}

impl FitnessParams {
    /// Parameters without a symmetry requirement on `K`.
    pub fn new(capacity: Vec<f64>, kernel: Kernel, mu: f64) -> Result<Self> {
        Self::build(capacity, kernel, mu, false)
    }

    /// Parameters for the symmetric model: `K_x = K_{-x}` and `K_0 = 1`.
    pub fn symmetric(capacity: Vec<f64>, kernel: Kernel, mu: f64) -> Result<Self> {
        Self::build(capacity, kernel, mu, true)
    }

    /// Symmetric parameters from the capacities at `0, 1, ..., L`.
    pub fn symmetric_from_half(half_capacity: &[f64], kernel: Kernel, mu: f64) -> Result<Self> {
        let l = half_capacity.len().saturating_sub(1);
        let mut capacity = vec![0.0; 2 * l + 1];
        for (k, &v) in half_capacity.iter().enumerate() {
            capacity[l + k] = v;
            capacity[l - k] = v;
        }
        Self::symmetric(capacity, kernel, mu)
    }

    /// Three sites with `K = (1/2, 1, 1/2)` and threshold kernel with `M = 2`.
    pub fn one_dimensional(b: f64, mu: f64) -> Result<Self> {
        Self::symmetric(vec![0.5, 1.0, 0.5], Kernel::Threshold { b, m: 2 }, mu)
    }

    fn build(capacity: Vec<f64>, kernel: Kernel, mu: f64, symmetric: bool) -> Result<Self> {
        if capacity.len().is_multiple_of(2) {
            return Err(Error::InvalidParams(format!(
                "capacity needs an odd number of sites, got {}",
                capacity.len()
            )));
        }
        let half_width = capacity.len() / 2;
        if let Some(k) = capacity.iter().find(|k| !(**k > 0.0 && **k <= 1.0)) {
            return Err(Error::InvalidParams(format!("capacity {k} outside (0, 1]")));
        }
        if !(mu >= 0.0) || !mu.is_finite() {
            return Err(Error::InvalidParams(format!("mutation rate {mu} must be >= 0")));
        }
        if symmetric {
            let n = capacity.len();
            if (0..n).any(|i| capacity[i] != capacity[n - 1 - i]) {
                return Err(Error::InvalidParams("capacity is not symmetric".into()));
            }
            if capacity[half_width] != 1.0 {
                return Err(Error::InvalidParams("symmetric model needs K_0 = 1".into()));
            }
        }
        let (cooperation, threshold) = match kernel {
            Kernel::Explicit(b) => {
                if b.len() != 4 * half_width + 1 {
                    return Err(Error::DimensionMismatch {
                        expected: 4 * half_width + 1,
                        got: b.len(),
                    });
                }
                (b, None)
            }
            Kernel::Threshold { b, m } => {
                if !(half_width < m && m <= 2 * half_width) {
                    return Err(Error::BadKernel(format!(
                        "threshold M = {m} must satisfy L < M <= 2L with L = {half_width}"
                    )));
                }
                let lw = 2 * half_width as i64;
                let vector = (-lw..=lw)
                    .map(|d| if d.unsigned_abs() as usize >= m { 1.0 } else { b })
                    .collect();
                (vector, Some(Threshold { b, m }))
            }
        };
        if let Some(v) = cooperation.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::BadKernel(format!("kernel entry {v} outside [0, 1]")));
        }
        let nb = cooperation.len();
        if (0..nb).any(|i| cooperation[i] != cooperation[nb - 1 - i]) {
            return Err(Error::BadKernel("kernel is not symmetric".into()));
        }

        let n = capacity.len();
        let mut interaction = vec![0.0; n * n];
        for x in 0..n {
            for z in 0..n {
                let d = x as i64 - z as i64 + 2 * half_width as i64;
                interaction[x * n + z] = capacity[x] * cooperation[d as usize] * capacity[z];
            }
        }
        Ok(Self {
            half_width,
            capacity,
            cooperation,
            threshold,
            mu,
            symmetric,
            interaction,
        })
    }

    pub fn with_mu(&self, mu: f64) -> Result<Self> {
        if !(mu >= 0.0) || !mu.is_finite() {
            return Err(Error::InvalidParams(format!("mutation rate {mu} must be >= 0")));
        }
        Ok(Self { mu, ..self.clone() })
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

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn threshold(&self) -> Option<Threshold> {
        self.threshold
    }

    pub fn capacity(&self) -> &[f64] {
        &self.capacity
    }

    /// `K_x`, zero outside the grid.
    pub fn capacity_at(&self, x: i64) -> f64 {
        site_index(self.half_width, x).map_or(0.0, |i| self.capacity[i])
    }

    /// `B_d` for `|d| <= 2L`.
    pub fn cooperation_at(&self, d: i64) -> f64 {
        self.cooperation[(d + 2 * self.half_width as i64) as usize]
    }

    /// Row-major matrix `G_xz = K_x B_{x-z} K_z`.
    pub(crate) fn interaction(&self) -> &[f64] {
        &self.interaction
    }

    pub(crate) fn check_dims(&self, got: usize) -> Result<()> {
        if got != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                got,
            });
        }
        Ok(())
    }
}

pub(crate) fn fitness_into(p: &FitnessParams, pi: &[f64], out: &mut [f64]) {
    let n = pi.len();
    let g = p.interaction();
    for (x, m) in out.iter_mut().enumerate() {
        let row = &g[x * n..(x + 1) * n];
        *m = row.iter().zip(pi).map(|(gx, pz)| gx * pz).sum();
    }
}

pub(crate) fn mean_of(pi: &[f64], m: &[f64]) -> f64 {
    pi.iter().zip(m).map(|(a, b)| a * b).sum()
}

pub(crate) fn psi_raw(p: &FitnessParams, pi: &[f64], m: &[f64]) -> f64 {
    let mbar = mean_of(pi, m);
    let n = pi.len() as f64;
    let spread: f64 = pi.iter().zip(m).map(|(q, mx)| q * (mx - mbar).powi(2)).sum();
    let drift: f64 = pi.iter().zip(m).map(|(q, mx)| mx * (1.0 / n - q)).sum();
    spread + p.mu() * n * drift
}

/// `m_x = K_x sum_z B_{x-z} K_z pi_z` for every site.
pub fn fitness_vector(pi: &SimplexMeasure, p: &FitnessParams) -> Result<Vec<f64>> {
    p.check_dims(pi.len())?;
    let mut m = vec![0.0; pi.len()];
    fitness_into(p, pi.values(), &mut m);
    Ok(m)
}

/// `sum_x pi_x m_x`.
pub fn mean_fitness(pi: &SimplexMeasure, p: &FitnessParams) -> Result<f64> {
    let m = fitness_vector(pi, p)?;
    Ok(mean_of(pi.values(), &m))
}

/// The same quantity evaluated as the quadratic form `pi^T K B K pi`, summed
/// pair by pair without going through the fitness vector.
pub fn mean_fitness_quadratic(pi: &SimplexMeasure, p: &FitnessParams) -> Result<f64> {
    p.check_dims(pi.len())?;
    let v = pi.values();
    let mut total = 0.0;
    for (i, x) in pi.sites().enumerate() {
        for (j, z) in pi.sites().enumerate() {
            total += v[i] * p.capacity_at(x) * p.cooperation_at(x - z) * p.capacity_at(z) * v[j];
        }
    }
    Ok(total)
}

/// `sum_x pi_x (m_x - mbar)^2 + mu (2L+1) sum_x m_x (1/(2L+1) - pi_x)`.
pub fn psi(pi: &SimplexMeasure, p: &FitnessParams) -> Result<f64> {
    let m = fitness_vector(pi, p)?;
    Ok(psi_raw(p, pi.values(), &m))
}

/// `mbar / 2 + mu sum_x log pi_x`, defined on the interior of the simplex.
pub fn lyapunov_value(pi: &SimplexMeasure, p: &FitnessParams) -> Result<f64> {
    p.check_dims(pi.len())?;
    if let Some((index, &value)) = pi.values().iter().enumerate().find(|(_, v)| **v <= 0.0) {
        return Err(Error::NonInteriorMeasure { index, value });
    }
    Ok(lyapunov_raw(p, pi.values()))
}

pub(crate) fn lyapunov_raw(p: &FitnessParams, pi: &[f64]) -> f64 {
    let mut m = vec![0.0; pi.len()];
    fitness_into(p, pi, &mut m);
    let logs: f64 = if p.mu() == 0.0 {
        0.0
    } else {
        pi.iter().map(|v| v.ln()).sum()
    };
    0.5 * mean_of(pi, &m) + p.mu() * logs
}
