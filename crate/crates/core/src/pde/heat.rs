use super::Field;
use crate::error::{Error, Result};

/// Sampled Gaussian kernel of `e^{s Delta}` on a grid of spacing `h`,
/// truncated at six standard deviations (`6 sqrt(2 s)`) and renormalized.
#[derive(Debug, Clone, PartialEq)]
pub struct HeatKernel {
    s: f64,
    h: f64,
    weights: Vec<f64>,
}

impl HeatKernel {
    pub fn new(s: f64, h: f64) -> Result<Self> {
        if !(s > 0.0 && s.is_finite()) {
            return Err(Error::InvalidParams(format!("heat time must be positive, got {s}")));
        }
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::InvalidParams(format!("grid spacing must be positive, got {h}")));
        }
        let reach = (Self::support_for(s) / h).ceil() as usize;
        let mut weights: Vec<f64> = (0..=2 * reach)
            .map(|k| {
                let y = (k as f64 - reach as f64) * h;
                (-y * y / (4.0 * s)).exp()
            })
            .collect();
        let total: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= total);
        Ok(Self { s, h, weights })
    }

    pub fn support_for(s: f64) -> f64 {
        6.0 * (2.0 * s).sqrt()
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    /// Kernel half-width in grid points.
    pub fn reach(&self) -> usize {
        self.weights.len() / 2
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Convolves `values` in place, reflecting about the half-grid points
    /// beyond either end so that grid mass is conserved.
    pub fn apply(&self, values: &mut [f64]) -> Result<()> {
        let n = values.len();
        let reach = self.reach();
        if reach + 1 > n {
            return Err(Error::KernelTooWide {
                support: reach as f64 * self.h,
                domain: n.saturating_sub(1) as f64 * self.h,
            });
        }
        if reach == 0 {
            return Ok(());
        }
        let padded: Vec<f64> = (0..n + 2 * reach)
            .map(|j| {
                let i = j as i64 - reach as i64;
                let i = if i < 0 {
                    -i - 1
                } else if i >= n as i64 {
                    2 * n as i64 - 1 - i
                } else {
                    i
                };
                values[i as usize]
            })
            .collect();
        for (i, out) in values.iter_mut().enumerate() {
            *out = padded[i..i + self.weights.len()]
                .iter()
                .zip(&self.weights)
                .map(|(a, w)| a * w)
                .sum();
        }
        Ok(())
    }
}

/// Runs every component of `field` through the heat equation for time `s`.
pub fn heat_step(field: &mut Field, s: f64) -> Result<()> {
    let kernel = HeatKernel::new(s, field.h())?;
    for k in 0..field.components() {
        kernel.apply(field.component_mut(k))?;
    }
    field.time += s;
    Ok(())
}

/// One explicit finite-difference heat step with reflecting ends. Stable
/// only for `s / h^2 <= 1/2`.
pub(crate) fn fd_heat_apply(values: &mut [f64], s: f64, h: f64) -> Result<()> {
    let ratio = s / (h * h);
    if ratio > 0.5 {
        return Err(Error::InvalidParams(format!(
            "explicit diffusion needs s / h^2 <= 1/2, got {ratio}"
        )));
    }
    let n = values.len();
    if n < 2 {
        return Ok(());
    }
    let old = values.to_vec();
    for i in 0..n {
        let left = old[i.saturating_sub(1)];
        let right = old[(i + 1).min(n - 1)];
        values[i] = old[i] + ratio * (left - 2.0 * old[i] + right);
    }
    Ok(())
}
