use super::{heat_step, Field};
use crate::error::{Error, Result};

/// The smooth step used in the transition regions: zero below `-l`, two
/// quadratic pieces meeting at height 1/2 at the origin, one above `l`.
pub fn transition(x: f64, l: f64) -> f64 {
    if x < -l {
        0.0
    } else if x <= 0.0 {
        0.5 * ((x + l) / l).powi(2)
    } else if x <= l {
        1.0 - 0.5 * ((l - x) / l).powi(2)
    } else {
        1.0
    }
}

/// Plateau of height one on `[-L + l, L - l]` with transition regions of
/// half-width `l` around `-L` and `L`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Profile {
    half_width: f64,
    ramp: f64,
}

impl Profile {
    /// The ramp width used throughout the front analysis, `sqrt(0.1 / 3)`.
    pub fn default_ramp() -> f64 {
        (0.1f64 / 3.0).sqrt()
    }

    pub fn new(half_width: f64, ramp: f64) -> Result<Self> {
        if !(ramp > 0.0 && half_width > ramp && half_width.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "profile needs L > l > 0, got L = {half_width}, l = {ramp}"
            )));
        }
        Ok(Self { half_width, ramp })
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn ramp(&self) -> f64 {
        self.ramp
    }

    pub fn value(&self, x: f64) -> f64 {
        let (big, l) = (self.half_width, self.ramp);
        if x < 0.0 {
            transition(x + big, l)
        } else {
            transition(big - x, l)
        }
    }
}

/// Result of comparing `e^{s Delta} f0` with `f0 + s / (5 l^2)` on the
/// outer parts of both transition regions.
#[derive(Debug, Clone, PartialEq)]
pub struct HeatGainReport {
    pub holds: bool,
    /// Smallest `e^{s Delta} f0(x) - f0(x) - s / (5 l^2)` over the checked points.
    pub worst_margin: f64,
    pub worst_x: f64,
    pub points: usize,
}

/// Evaluates the heat-gain inequality for the profile at every grid
/// point of spacing `h` in `(-L - l - s, -L - l/200)` and
/// `(L + l/200, L + l + s)`.
pub fn heat_gain_check(profile: &Profile, s: f64, h: f64) -> Result<HeatGainReport> {
    let (big, l) = (profile.half_width, profile.ramp);
    let margin = 2.0 * super::HeatKernel::support_for(s) + h;
    let x_max = ((big + l + margin) / h).ceil() * h;
    let init = Field::from_fn(h, x_max, 1, |x| vec![profile.value(x)])?;
    let mut smoothed = init.clone();
    heat_step(&mut smoothed, s)?;
    let gain = s / (5.0 * l * l);
    let outer = |x: f64| {
        let a = x.abs();
        a > big + l / 200.0 && a < big + l + s
    };
    let mut report = HeatGainReport {
        holds: true,
        worst_margin: f64::INFINITY,
        worst_x: f64::NAN,
        points: 0,
    };
    for i in (0..init.len()).filter(|&i| outer(init.x(i))) {
        let m = smoothed.component(0)[i] - init.component(0)[i] - gain;
        report.points += 1;
        if m < report.worst_margin {
            report.worst_margin = m;
            report.worst_x = init.x(i);
        }
    }
    if report.points == 0 {
        return Err(Error::InvalidParams(format!(
            "grid spacing {h} misses the checked range"
        )));
    }
    report.holds = report.worst_margin > 0.0;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plateau_and_tails() {
        let p = Profile::new(3.0, Profile::default_ramp()).unwrap();
        let l = p.ramp();
        assert_eq!(p.value(0.0), 1.0);
        assert_eq!(p.value(3.0 + l), 0.0);
        assert_eq!(p.value(-3.0 - l), 0.0);
        assert_eq!(p.value(-3.0), 0.5);
        assert!(Profile::new(0.1, 0.2).is_err());
    }

    #[test]
    fn step_is_point_symmetric() {
        let l = 0.4;
        assert_eq!(transition(0.0, l), 0.5);
        for i in 0..=100 {
            let x = -0.6 + 0.012 * i as f64;
            assert!((transition(x, l) + transition(-x, l) - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn second_difference_is_bounded() {
        let p = Profile::new(1.0, Profile::default_ramp()).unwrap();
        let l = p.ramp();
        let h = 1e-3;
        let worst = (1..4000)
            .map(|i| {
                let x = -2.0 + i as f64 * h;
                ((p.value(x - h) - 2.0 * p.value(x) + p.value(x + h)) / (h * h)).abs()
            })
            .fold(0.0, f64::max);
        // Independent: the pieces are quadratics with curvature exactly 1/l^2.
        assert!(worst <= 1.0 / (l * l) + 10.0 * h, "{worst}");
        assert!(worst >= 0.99 / (l * l));
    }

    #[test]
    fn heat_gain_holds_for_short_times_only() {
        let p = Profile::new(1.0, Profile::default_ramp()).unwrap();
        let short = heat_gain_check(&p, 1e-5, 2e-5).unwrap();
        assert!(short.holds, "{short:?}");
        // At s = 1e-4 the smoothed kink at +-L spreads past L +- l/200.
        let long = heat_gain_check(&p, 1e-4, 1e-4).unwrap();
        assert!(!long.holds);
        assert!((long.worst_x.abs() - 1.0).abs() < 0.01);
    }
}
