use crate::error::{Error, Result};
use crate::simplex::{FitnessParams, SimplexMeasure};

use super::constants::SpeciationConstants;
use super::rhs_into;

/// Relative tolerance for deciding that a measure sits on a face.
const FACE_TOL: f64 = 1e-9;

/// Which trapping region to test, with the thresholds that define it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InvariantSet {
    /// `pi_x <= eps` for every `x != 0`.
    DeltaLike { eps: f64 },
    /// `pi_x <= eps` off the peaks `+-p` and `|log(pi_p / pi_{-p})| <= log_ratio`.
    Bimodal { eps: f64, log_ratio: f64 },
}

impl InvariantSet {
    /// The region with the largest thresholds the constants allow.
    pub fn delta_like(c: &SpeciationConstants) -> Self {
        InvariantSet::DeltaLike { eps: c.eps1 }
    }

    pub fn bimodal(c: &SpeciationConstants) -> Option<Self> {
        Some(InvariantSet::Bimodal {
            eps: c.eps2?,
            log_ratio: c.eps3?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InvariantCheck {
    pub inside: bool,
    /// Every active face has the inward drift the invariance argument
    /// predicts, including its quantitative bound.
    pub boundary_drift_ok: bool,
    /// Number of faces the measure lies on.
    pub active_faces: usize,
}

fn on_face(value: f64, level: f64) -> bool {
    (value - level).abs() <= FACE_TOL * level.max(f64::MIN_POSITIVE)
}

fn check_delta_like(pi: &[f64], p: &FitnessParams, c: &SpeciationConstants, eps: f64) -> Result<InvariantCheck> {
    let mu = p.mu();
    if !(eps > 0.0 && eps <= c.eps1) {
        return Err(Error::PreconditionViolated(format!(
            "threshold {eps} must lie in (0, {}]",
            c.eps1
        )));
    }
    if !(mu < c.b * c.k * eps / 8.0) {
        return Err(Error::PreconditionViolated(format!(
            "mutation rate {mu} must be below b k eps / 8 = {}",
            c.b * c.k * eps / 8.0
        )));
    }
    let centre = p.half_width();
    let n = pi.len();
    let mut m = vec![0.0; n];
    let mut rhs = vec![0.0; n];
    rhs_into(p, pi, &mut m, &mut rhs);

    let inside = pi
        .iter()
        .enumerate()
        .all(|(i, &q)| i == centre || q <= eps * (1.0 + FACE_TOL));
    let bound = -eps * c.b * c.k / 8.0 + mu;
    let mut active = 0;
    let mut ok = true;
    for (i, (&q, &r)) in pi.iter().zip(&rhs).enumerate() {
        if i == centre {
            continue;
        }
        if q == 0.0 {
            active += 1;
            ok &= r > 0.0;
        } else if on_face(q, eps) {
            active += 1;
            ok &= r < 0.0 && r <= bound + FACE_TOL * eps;
        }
    }
    Ok(InvariantCheck {
        inside,
        boundary_drift_ok: ok,
        active_faces: active,
    })
}

fn check_bimodal(
    pi: &[f64],
    p: &FitnessParams,
    c: &SpeciationConstants,
    eps: f64,
    log_ratio: f64,
) -> Result<InvariantCheck> {
    let (Some(peak), Some(c2), Some(eps2), Some(eps3)) = (c.bimodal_peak, c.c2, c.eps2, c.eps3) else {
        return Err(Error::PreconditionViolated(
            "the bimodal set needs an even threshold M".into(),
        ));
    };
    let mu = p.mu();
    let b = c.b;
    let kp = p.capacity_at(peak as i64);
    let kl = p.capacity_at(c.inner as i64);
    if !(eps > 0.0 && eps <= eps2 && log_ratio > 0.0 && log_ratio <= eps3) {
        return Err(Error::PreconditionViolated(format!(
            "thresholds ({eps}, {log_ratio}) must lie in (0, {eps2}] x (0, {eps3}]"
        )));
    }
    if !(b / (1.0 - b) <= kp * kp / 8.0) {
        return Err(Error::PreconditionViolated(format!(
            "b / (1 - b) = {} exceeds K_p^2 / 8",
            b / (1.0 - b)
        )));
    }
    // Used in the fitness comparison on [l, p - 1] without being stated.
    if !(b <= kp * kp / (2.0 * kp * kp + kl)) {
        return Err(Error::PreconditionViolated(format!(
            "b = {b} exceeds K_p^2 / (2 K_p^2 + K_l)"
        )));
    }
    if !(mu < 3.0 * c2 * eps / 8.0) {
        return Err(Error::PreconditionViolated(format!(
            "mutation rate {mu} must be below 3 c2 eps / 8 = {}",
            3.0 * c2 * eps / 8.0
        )));
    }

    let centre = p.half_width();
    let (hi, lo) = (centre + peak, centre - peak);
    let n = pi.len();
    let mut m = vec![0.0; n];
    let mut rhs = vec![0.0; n];
    rhs_into(p, pi, &mut m, &mut rhs);

    let ratio = (pi[hi] / pi[lo]).ln();
    let inside = pi
        .iter()
        .enumerate()
        .all(|(i, &q)| i == hi || i == lo || q <= eps * (1.0 + FACE_TOL))
        && ratio.abs() <= log_ratio * (1.0 + FACE_TOL);

    let bound = -eps * 3.0 * c2 / 8.0 + mu;
    let mut active = 0;
    let mut ok = true;
    for (i, (&q, &r)) in pi.iter().zip(&rhs).enumerate() {
        if i == hi || i == lo {
            continue;
        }
        if q == 0.0 {
            active += 1;
            ok &= r > 0.0;
        } else if on_face(q, eps) {
            active += 1;
            ok &= r < 0.0 && r <= bound + FACE_TOL * eps;
        }
    }
    if ratio.is_finite() && on_face(ratio.abs(), log_ratio) {
        active += 1;
        let rate = m[hi] - m[lo] + mu * (1.0 / pi[hi] - 1.0 / pi[lo]);
        ok &= if ratio > 0.0 { rate < 0.0 } else { rate > 0.0 };
    }
    Ok(InvariantCheck {
        inside,
        boundary_drift_ok: ok,
        active_faces: active,
    })
}

/// Tests membership of `pi` in a trapping region and the drift on every face
/// `pi` lies on.
///
/// Returns `PreconditionViolated` when the parameters fall outside the
/// hypotheses under which the region is trapping, since the check would say
/// nothing in that case.
pub fn invariant_set_check(
    pi: &SimplexMeasure,
    p: &FitnessParams,
    which: InvariantSet,
    constants: &SpeciationConstants,
) -> Result<InvariantCheck> {
    p.check_dims(pi.len())?;
    if constants.half_width != p.half_width() || Some(constants.b) != p.threshold().map(|t| t.b) {
        return Err(Error::InvalidParams(
            "constants were computed for different parameters".into(),
        ));
    }
    match which {
        InvariantSet::DeltaLike { eps } => check_delta_like(pi.values(), p, constants, eps),
        InvariantSet::Bimodal { eps, log_ratio } => check_bimodal(pi.values(), p, constants, eps, log_ratio),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::selmut::theory_constants;
    use crate::simplex::{fitness_into, mean_of, Kernel};
    use proptest::prelude::*;

    fn delta_params(mu: f64) -> FitnessParams {
        FitnessParams::symmetric_from_half(&[1.0, 0.8, 0.5], Kernel::Threshold { b: 0.2, m: 3 }, mu).unwrap()
    }

    fn bimodal_params(mu: f64) -> FitnessParams {
        FitnessParams::symmetric_from_half(&[1.0, 0.8, 0.5], Kernel::Threshold { b: 0.02, m: 4 }, mu).unwrap()
    }

    /// Small entries in `[0, eps]` with the first pinned to `eps`; the rest
    /// split between the centre and the others.
    fn delta_boundary(eps: f64, raw: &[f64], pin: usize) -> Vec<f64> {
        let n = raw.len() + 1;
        let centre = n / 2;
        let mut out = vec![0.0; n];
        let others: Vec<usize> = (0..n).filter(|&i| i != centre).collect();
        for (k, &i) in others.iter().enumerate() {
            out[i] = if k == pin { eps } else { raw[k] * eps };
        }
        out[centre] = 1.0 - out.iter().sum::<f64>();
        out
    }

    #[test]
    fn zero_coordinate_drifts_inward() {
        let p = delta_params(2e-5);
        let c = theory_constants(&p).unwrap();
        let pi = SimplexMeasure::new(vec![0.0, 0.001, 0.998, 0.001, 0.0]).unwrap();
        let check = invariant_set_check(&pi, &p, InvariantSet::delta_like(&c), &c).unwrap();
        assert!(check.inside && check.boundary_drift_ok);
        assert_eq!(check.active_faces, 2);
        let rhs = crate::selmut::selmut_rhs(&pi, &p).unwrap();
        assert!((rhs[0] - 2e-5).abs() < 1e-18);
    }

    #[test]
    fn too_much_mutation_is_a_precondition_failure() {
        let p = delta_params(1e-3);
        let c = theory_constants(&p).unwrap();
        let pi = SimplexMeasure::uniform(2);
        let err = invariant_set_check(&pi, &p, InvariantSet::delta_like(&c), &c).unwrap_err();
        assert!(matches!(err, Error::PreconditionViolated(_)));
    }

    #[test]
    fn far_measure_is_outside() {
        let p = delta_params(2e-5);
        let c = theory_constants(&p).unwrap();
        let check = invariant_set_check(&SimplexMeasure::uniform(2), &p, InvariantSet::delta_like(&c), &c).unwrap();
        assert!(!check.inside);
        assert_eq!(check.active_faces, 0);
    }

    #[test]
    fn mean_fitness_stays_close_to_the_peaks() {
        let p = bimodal_params(5e-7);
        let c = theory_constants(&p).unwrap();
        let pi = [0.49, 0.0001, 0.0001, 0.0001, 0.5097];
        let mut m = vec![0.0; 5];
        fitness_into(&p, &pi, &mut m);
        let gap = m[0].min(m[4]) - mean_of(&pi, &m);
        assert!(gap < c.c2.unwrap() / 8.0);
    }

    proptest! {
        #[test]
        fn delta_like_faces_point_inward(
            raw in prop::collection::vec(0.0f64..=1.0, 4),
            pin in 0usize..4,
            zeros in prop::collection::vec(any::<bool>(), 4),
        ) {
            let p = delta_params(2e-5);
            let c = theory_constants(&p).unwrap();
            let raw: Vec<f64> = raw.iter().zip(&zeros).map(|(r, z)| if *z { 0.0 } else { *r }).collect();
            let pi = SimplexMeasure::new(delta_boundary(c.eps1, &raw, pin)).unwrap();
            let check = invariant_set_check(&pi, &p, InvariantSet::delta_like(&c), &c).unwrap();
            prop_assert!(check.inside);
            prop_assert!(check.active_faces >= 1);
            prop_assert!(check.boundary_drift_ok);
        }

        #[test]
        fn bimodal_ratio_faces_point_inward(
            raw in prop::collection::vec(0.0f64..=1.0, 3),
            upper in any::<bool>(),
        ) {
            let p = bimodal_params(5e-7);
            let c = theory_constants(&p).unwrap();
            let (eps, e3) = (c.eps2.unwrap(), c.eps3.unwrap());
            let mut v = vec![0.0; 5];
            for (slot, r) in [1usize, 2, 3].iter().zip(&raw) {
                v[*slot] = r * eps;
            }
            let rest = 1.0 - v.iter().sum::<f64>();
            let ratio = if upper { e3.exp() } else { (-e3).exp() };
            v[0] = rest / (1.0 + ratio);
            v[4] = rest - v[0];
            let pi = SimplexMeasure::new(v).unwrap();
            let check = invariant_set_check(&pi, &p, InvariantSet::bimodal(&c).unwrap(), &c).unwrap();
            prop_assert!(check.inside);
            prop_assert!(check.boundary_drift_ok);
        }
    }
}
