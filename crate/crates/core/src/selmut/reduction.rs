use crate::error::{Error, Result};
use crate::simplex::{FitnessParams, SimplexMeasure};

use super::selmut_rhs;

/// Critical points whose value is this close to zero count as double roots.
const DOUBLE_ROOT_TOL: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CubicRoot {
    pub value: f64,
    pub multiplicity: u8,
}

/// The three-site symmetric system reduced to `d/dt pi_0 = p(pi_0)` with a
/// cubic `p`, for `K = (1/2, 1, 1/2)` and threshold `M = 2`.
#[derive(Debug, Clone, PartialEq)]
pub struct CubicReduction {
    pub b: f64,
    pub mu: f64,
    /// `(c3, c2, c1, c0)` with `p(x) = c3 x^3 + c2 x^2 + c1 x + c0`.
    pub coeffs: [f64; 4],
    /// Real roots in `[0, 1]`, increasing.
    pub roots: Vec<CubicRoot>,
}

impl CubicReduction {
    pub fn eval(&self, x: f64) -> f64 {
        let [c3, c2, c1, c0] = self.coeffs;
        ((c3 * x + c2) * x + c1) * x + c0
    }

    fn derivative(&self, x: f64) -> f64 {
        let [c3, c2, c1, _] = self.coeffs;
        (3.0 * c3 * x + 2.0 * c2) * x + c1
    }

    /// Roots in increasing order, each listed once.
    pub fn root_values(&self) -> Vec<f64> {
        self.roots.iter().map(|r| r.value).collect()
    }

    /// Roots where the derivative is negative.
    pub fn stable_roots(&self) -> Vec<f64> {
        self.roots
            .iter()
            .filter(|r| r.multiplicity == 1 && self.derivative(r.value) < 0.0)
            .map(|r| r.value)
            .collect()
    }
}

fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let mut flo = f(lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return mid;
        }
        if (fm < 0.0) == (flo < 0.0) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Coefficients and roots of the reduced cubic.
pub fn cubic_reduce_1d(b: f64, mu: f64) -> Result<CubicReduction> {
    if !(0.0..=1.0).contains(&b) || !(mu >= 0.0) || !mu.is_finite() {
        return Err(Error::InvalidParams(format!(
            "need 0 <= b <= 1 and mu >= 0, got b = {b}, mu = {mu}"
        )));
    }
    let coeffs = [-(b + 1.0) / 8.0, (1.0 - b) / 4.0, (3.0 * b - 1.0 - 24.0 * mu) / 8.0, mu];
    let mut red = CubicReduction {
        b,
        mu,
        coeffs,
        roots: Vec::new(),
    };

    // Critical points split [0, 1] into intervals where p is monotone.
    let (qa, qb, qc) = (3.0 * coeffs[0], 2.0 * coeffs[1], coeffs[2]);
    let disc = qb * qb - 4.0 * qa * qc;
    let mut critical = Vec::new();
    if disc >= 0.0 {
        let sq = disc.sqrt();
        let q = -0.5 * (qb + qb.signum() * sq);
        critical.push(q / qa);
        if q != 0.0 {
            critical.push(qc / q);
        }
    }
    critical.retain(|c| (0.0..=1.0).contains(c));
    critical.sort_by(f64::total_cmp);

    let mut doubles: Vec<f64> = critical
        .iter()
        .copied()
        .filter(|&c| red.eval(c).abs() <= DOUBLE_ROOT_TOL)
        .collect();
    doubles.dedup_by(|a, b| (*a - *b).abs() < 1e-9);

    let mut knots = vec![0.0];
    knots.extend(critical.iter().copied());
    knots.push(1.0);
    let mut simple = Vec::new();
    for w in knots.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        let (flo, fhi) = (red.eval(lo), red.eval(hi));
        if flo == 0.0 {
            simple.push(lo);
        }
        if fhi == 0.0 {
            simple.push(hi);
        }
        if flo != 0.0 && fhi != 0.0 && (flo < 0.0) != (fhi < 0.0) {
            simple.push(bisect(|x| red.eval(x), lo, hi));
        }
    }
    simple.retain(|r| doubles.iter().all(|d| (r - d).abs() > 1e-6));
    simple.sort_by(f64::total_cmp);
    simple.dedup_by(|a, b| (*a - *b).abs() < 1e-12);

    red.roots = simple
        .into_iter()
        .map(|value| CubicRoot { value, multiplicity: 1 })
        .chain(doubles.into_iter().map(|value| CubicRoot { value, multiplicity: 2 }))
        .collect();
    red.roots.sort_by(|a, b| a.value.total_cmp(&b.value));
    Ok(red)
}

/// `d/dt pi_0` from the full three-site vector field on the symmetric slice
/// `pi_{-1} = pi_1 = (1 - pi_0) / 2`.
pub fn reduced_rate_1d(pi0: f64, b: f64, mu: f64) -> Result<f64> {
    let p = FitnessParams::one_dimensional(b, mu)?;
    let side = (1.0 - pi0) / 2.0;
    let pi = SimplexMeasure::new(vec![side, pi0, side])?;
    Ok(selmut_rhs(&pi, &p)?[1])
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn reference_roots() {
        let mu = 1.0 / 150.0;
        let red = cubic_reduce_1d(0.2, mu).unwrap();
        let disc = (1.0 - 80.0 * mu).sqrt();
        let expected = [(1.0 - disc) / 2.0, 1.0 / 3.0, (1.0 + disc) / 2.0];
        let got = red.root_values();
        assert_eq!(got.len(), 3);
        for (g, e) in got.iter().zip(expected) {
            assert!((g - e).abs() < 1e-12, "{g} vs {e}");
        }
        assert!((got[0] - 0.158_434_974_468).abs() < 1e-11);
        assert!((got[2] - 0.841_565_025_532).abs() < 1e-11);
        assert_eq!(red.stable_roots().len(), 2);
        for r in &got {
            assert!(red.eval(*r).abs() < 1e-12);
        }
    }

    #[test]
    fn double_root_at_critical_mutation() {
        let red = cubic_reduce_1d(0.2, 1.0 / 80.0).unwrap();
        assert_eq!(red.roots.len(), 2);
        assert!((red.roots[0].value - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(red.roots[0].multiplicity, 1);
        assert!((red.roots[1].value - 0.5).abs() < 1e-6);
        assert_eq!(red.roots[1].multiplicity, 2);
    }

    #[test]
    fn single_root_above_critical_mutation() {
        let red = cubic_reduce_1d(0.2, 1.0 / 70.0).unwrap();
        assert_eq!(red.root_values().len(), 1);
        assert!((red.roots[0].value - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn factored_form_for_one_fifth() {
        let mu = 0.003;
        let red = cubic_reduce_1d(0.2, mu).unwrap();
        for x in [0.0, 0.1, 0.37, 0.9, 1.0] {
            let factored = -0.15 * (x - 1.0 / 3.0) * (x * x - x + 20.0 * mu);
            assert!((red.eval(x) - factored).abs() < 1e-15);
        }
    }

    #[test]
    fn endpoint_values() {
        let red = cubic_reduce_1d(0.4, 0.01).unwrap();
        assert!((red.eval(0.0) - 0.01).abs() < 1e-16);
        assert!((red.eval(1.0) + 0.02).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn cubic_matches_full_vector_field(b in 0.0f64..=1.0, mu in 0.0f64..0.05, x in 0.0f64..=1.0) {
            let red = cubic_reduce_1d(b, mu).unwrap();
            let direct = reduced_rate_1d(x, b, mu).unwrap();
            prop_assert!((red.eval(x) - direct).abs() < 1e-12);
        }

        #[test]
        fn roots_are_zeros(b in 0.0f64..=1.0, mu in 0.0f64..0.05) {
            let red = cubic_reduce_1d(b, mu).unwrap();
            for r in red.root_values() {
                prop_assert!(red.eval(r).abs() < 1e-12);
                prop_assert!((0.0..=1.0).contains(&r));
            }
        }
    }
}
