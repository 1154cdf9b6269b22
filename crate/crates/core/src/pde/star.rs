use super::trotter::trotter_observe;
use super::{Field, Profile, ReactionSpec, System, TrotterOptions};
use crate::error::{Error, Result};

/// Inputs of the front-regeneration check: start from `(a0 f0, b0 f0)`
/// and ask whether `v > density_high` on `[-3L, 3L]` at time `horizon`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StarParams {
    pub c: f64,
    /// Lower bound `D1` the initial pair density must reach on the plateau.
    pub density_low: f64,
    /// Level `d1` the pair density must exceed at the horizon.
    pub density_high: f64,
    pub half_width: f64,
    pub ramp: f64,
    pub horizon: f64,
    pub s: f64,
    pub h: f64,
    pub a0: f64,
    pub b0: f64,
}

impl StarParams {
    /// The constants the existence argument works with, `D1 = 0.55`,
    /// `d1 = 0.7`, `b0 = 0.6`, with `a0` halfway across the admissible band.
    pub fn standard(c: f64, half_width: f64, horizon: f64) -> Self {
        let b0 = 0.6;
        Self {
            c,
            density_low: 0.55,
            density_high: 0.7,
            half_width,
            ramp: Profile::default_ramp(),
            horizon,
            s: 1e-3,
            h: 0.01,
            a0: 0.5 * (b0 + admissible_u_bound(c, b0)),
            b0,
        }
    }
}

/// Largest `u` at height `v` in the start region: 0.04 left of the
/// curve where the first reaction component vanishes.
pub fn admissible_u_bound(c: f64, v: f64) -> f64 {
    (1.0 + 2.0 * c) * v / (1.0 + 2.0 * c * v) - 0.04
}

/// Whether `(u, v)` lies in the start region `R0`.
pub fn in_start_region(c: f64, u: f64, v: f64) -> bool {
    (0.55..=0.8).contains(&v) && u >= v && u <= 1.0 && u < admissible_u_bound(c, v)
}

#[derive(Debug, Clone, PartialEq)]
pub struct StarReport {
    pub holds: bool,
    /// Smallest `v` on `[-3L, 3L]` at the horizon.
    pub min_v: f64,
    /// `(t, |{x : v(t, x) > d1}|)` after every splitting step, from `t = 0`.
    pub wet_width: Vec<(f64, f64)>,
    /// The wet width never shrinks by more than two grid cells once it
    /// first becomes positive.
    pub width_monotone: bool,
    pub last: Field,
}

fn wet_width(field: &Field, level: f64) -> f64 {
    field.component(1).iter().filter(|&&v| v > level).count() as f64 * field.h()
}

/// Integrates the pair-density system from the scaled profile and reports
/// the front-regeneration outcome. A negative outcome is a valid report.
pub fn condition_star_check(p: &StarParams) -> Result<StarReport> {
    let spec = ReactionSpec::new(System::Uv, p.c)?;
    let profile = Profile::new(p.half_width, p.ramp)?;
    if !(0.0 < p.density_low && p.density_low < p.density_high && p.density_high < 1.0) {
        return Err(Error::InvalidParams(format!(
            "need 0 < D1 < d1 < 1, got {} and {}",
            p.density_low, p.density_high
        )));
    }
    if p.b0 < p.density_low || !in_start_region(p.c, p.a0, p.b0) {
        return Err(Error::PreconditionViolated(format!(
            "(a0, b0) = ({}, {}) is not an admissible start with b0 >= {}",
            p.a0, p.b0, p.density_low
        )));
    }
    let big = p.half_width;
    let x_max = ((3.0 * big + 3.0 * p.horizon.sqrt() + 1.0) / p.h).ceil() * p.h;
    let init = Field::from_fn(p.h, x_max, 2, |x| {
        let f = profile.value(x);
        vec![p.a0 * f, p.b0 * f]
    })?;

    let mut widths = vec![(0.0, wet_width(&init, p.density_high))];
    let last = trotter_observe(&spec, &init, p.horizon, &TrotterOptions::new(p.s), |f| {
        widths.push((f.time, wet_width(f, p.density_high)));
    })?;

    let slack = 2.0 * p.h;
    let mut width_monotone = true;
    let mut best = f64::NEG_INFINITY;
    for &(_, w) in widths.iter().skip_while(|(_, w)| *w <= 0.0) {
        width_monotone &= w >= best - slack;
        best = best.max(w);
    }
    let min_v = last
        .indices_in(-3.0 * big, 3.0 * big)
        .map(|i| last.component(1)[i])
        .fold(f64::INFINITY, f64::min);
    Ok(StarReport {
        holds: min_v > p.density_high,
        min_v,
        wet_width: widths,
        width_monotone,
        last,
    })
}
