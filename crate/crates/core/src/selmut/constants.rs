use crate::error::{Error, Result};
use crate::simplex::FitnessParams;

/// Constants of the small- and large-mutation analysis for symmetric,
/// unimodal capacities and a threshold kernel.
///
/// `inner` is `l = M - L`; `bimodal_peak` is `p = M / 2` when `M` is even.
#[derive(Debug, Clone, PartialEq)]
pub struct SpeciationConstants {
    pub half_width: usize,
    pub inner: usize,
    pub b: f64,
    /// Smallest gap between adjacent capacities.
    pub k: f64,
    /// Lower bound on the stationary mean fitness in the large-mutation regime.
    pub c1: f64,
    pub delta2: f64,
    /// Largest admissible threshold for the delta-like invariant set.
    pub eps1: f64,
    pub bimodal_peak: Option<usize>,
    pub c2: Option<f64>,
    pub eps2: Option<f64>,
    pub eps3: Option<f64>,
    capacity_edge: f64,
}

impl SpeciationConstants {
    /// `mu^2 K_L^2 / (16 (2L+2)^2)`, the mean-fitness floor of the
    /// finite-population stationary laws.
    pub fn delta1(&self, mu: f64) -> f64 {
        let l = self.half_width as f64;
        mu * mu * self.capacity_edge.powi(2) / (16.0 * (2.0 * l + 2.0).powi(2))
    }

    /// `mu / (4 (2L+2))`, below which no coordinate of a stationary
    /// finite-population law falls.
    pub fn stationary_mass_floor(&self, mu: f64) -> f64 {
        mu / (4.0 * (2.0 * self.half_width as f64 + 2.0))
    }

    /// Bound `(1/delta) mu / (delta2/2 + mu (2L+1))` on the stationary
    /// probability that a middle coordinate exceeds `delta`.
    pub fn middle_mass_tail_bound(&self, mu: f64, delta: f64) -> f64 {
        let n = 2.0 * self.half_width as f64 + 1.0;
        mu / (self.delta2 / 2.0 + mu * n) / delta
    }

    fn spread(&self) -> f64 {
        (self.half_width - self.inner) as f64
    }

    fn r1_bound(&self, mu: f64) -> f64 {
        let n = 2.0 * self.half_width as f64 + 1.0;
        let k2 = self.capacity_edge.powi(2);
        (4.0 * mu * k2 * self.spread()).min(k2 * self.spread() / (4.0 * n.powi(3)))
    }

    /// Membership of `(mu, b)` in the region where the mean fitness of any
    /// stationary point stays above `c1`.
    pub fn in_region_r1(&self, mu: f64, b: f64) -> bool {
        (0.0..=self.r1_bound(mu)).contains(&b)
    }

    /// Membership of `(mu, b)` in the region where the middle sites carry at
    /// most `2 mu / c1` each.
    pub fn in_region_r(&self, mu: f64, b: f64) -> bool {
        (0.0..=self.r1_bound(mu).min(self.c1 / 2.0)).contains(&b)
    }

    /// Largest mutation rate for which the delta-like set traps the flow.
    pub fn a1_mu_bound(&self) -> f64 {
        self.b * self.k * self.eps1 / 8.0
    }

    /// Largest mutation rate for which the bimodal set traps the flow.
    pub fn a2_mu_bound(&self) -> Option<f64> {
        Some(3.0 * self.c2? * self.eps2? / 8.0)
    }
}

/// Computes all constants for `p`, which must be symmetric with a threshold
/// kernel and strictly decreasing capacities on `[0, L]`.
pub fn theory_constants(p: &FitnessParams) -> Result<SpeciationConstants> {
    let threshold = p
        .threshold()
        .ok_or_else(|| Error::BadKernel("constants need a threshold kernel".into()))?;
    if !p.is_symmetric() {
        return Err(Error::InvalidParams("constants need symmetric capacities".into()));
    }
    let lw = p.half_width();
    let l_i = lw as i64;
    let inner = threshold.inner(lw);
    let b = threshold.b;
    let cap = |x: i64| p.capacity_at(x);

    let k = (-l_i + 1..=l_i)
        .map(|x| (cap(x) - cap(x - 1)).abs())
        .fold(f64::INFINITY, f64::min);
    if !(k > 0.0) {
        return Err(Error::InvalidParams("capacities must be strictly unimodal".into()));
    }

    let n = 2.0 * lw as f64 + 1.0;
    let spread = (lw - inner) as f64;
    let k_edge = cap(l_i);
    let k_inner = cap(inner as i64);
    let k_one = cap(1);

    let c1 = (k_edge.powi(2) * spread / n.powi(2)).min(k_edge.powi(4) * spread / (4.0 * n.powi(3)));
    let delta2 = (k_edge.powi(2) / (2.0 * n))
        .min(k_edge.powi(4) / (4.0 * n * k_inner.powi(2)))
        .min(k_edge.powi(2) / (2.0 * n * n));
    let eps1 = (1.0 / (4.0 * lw as f64))
        .min(b * k / (2.0 * k_inner.powi(2) * (spread + 1.0)))
        .min(k / (16.0 * lw as f64 * k_one));

    let (bimodal_peak, c2, eps2, eps3) = if threshold.m % 2 == 0 {
        let peak = threshold.m / 2;
        let kp = cap(peak as i64);
        // K_{L+1} = 0, so the second term of eps2 drops out when p = L.
        let kp1 = cap(peak as i64 + 1);
        let gap = kp - kp1;
        let c2 = 0.5 * ((1.0 - b) * kp * gap / 8.0).min(b).min(kp * kp / 16.0);
        let eps2 = (1.0 / (8.0 * n))
            .min(kp * gap / (8.0 * kp1 * kp1 * (spread + 1.0)))
            .min(kp * kp / (16.0 * k_inner * (spread + 1.0)))
            .min(c2 / (16.0 * n * kp));
        let eps3 = std::f64::consts::LN_2.min((c2 / (4.0 * kp * kp)).ln_1p());
        (Some(peak), Some(c2), Some(eps2), Some(eps3))
    } else {
        (None, None, None, None)
    };

    Ok(SpeciationConstants {
        half_width: lw,
        inner,
        b,
        k,
        c1,
        delta2,
        eps1,
        bimodal_peak,
        c2,
        eps2,
        eps3,
        capacity_edge: k_edge,
    })
}
