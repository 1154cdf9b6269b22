//! Reaction-diffusion limits of the stirred particle systems: reaction
//! fields and their equilibria, heat-kernel smoothing, operator-split
//! integration and the front-regeneration checker.

mod heat;
mod profile;
mod star;
mod trotter;

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

pub use heat::{heat_step, HeatKernel};
pub use profile::{heat_gain_check, transition, HeatGainReport, Profile};
pub use star::{admissible_u_bound, condition_star_check, in_start_region, StarParams, StarReport};
pub use trotter::{ode_integrate, trotter_integrate, trotter_observe, Diffusion, PdeTrajectory, TrotterOptions};

/// The reaction systems obtained in the fast-stirring limit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum System {
    /// Densities of the four site states `(0,0), (0,1), (1,0), (1,1)`.
    FourState,
    /// Densities of sites holding zero, one or two particles.
    ThreeState,
    /// `u` = at least one particle, `v` = a full pair.
    Uv,
    /// Male and female occupation densities under individual stirring.
    IndPair,
    /// The symmetric reduction of `IndPair`.
    ScalarSex,
}

impl System {
    pub const ALL: [System; 5] = [
        System::FourState,
        System::ThreeState,
        System::Uv,
        System::IndPair,
        System::ScalarSex,
    ];

    pub fn components(self) -> usize {
        self.names().len()
    }

    pub fn names(self) -> &'static [&'static str] {
        match self {
            System::FourState => &["u00", "u01", "u10", "u11"],
            System::ThreeState => &["u0", "u1", "u2"],
            System::Uv => &["u", "v"],
            System::IndPair => &["male", "female"],
            System::ScalarSex => &["u"],
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            System::FourState => "four_state",
            System::ThreeState => "three_state",
            System::Uv => "uv",
            System::IndPair => "ind_pair",
            System::ScalarSex => "scalar_sex",
        }
    }
}

impl fmt::Display for System {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for System {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        System::ALL
            .into_iter()
            .find(|sys| sys.as_str() == s)
            .ok_or_else(|| Error::InvalidParams(format!("unknown reaction system {s:?}")))
    }
}

/// A reaction system with its birth parameter `c` (`lambda d` under
/// lily-pad stirring, `lambda d^2` under individual stirring).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReactionSpec {
    system: System,
    c: f64,
}

impl ReactionSpec {
    pub fn new(system: System, c: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::InvalidParams(format!("c must be positive, got {c}")));
        }
        Ok(Self { system, c })
    }

    pub fn system(&self) -> System {
        self.system
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    /// Writes the reaction velocity at `p` into `out`.
    pub fn rate(&self, p: &[f64], out: &mut [f64]) {
        let c = self.c;
        match self.system {
            System::FourState => {
                let (u00, u01, u10, u11) = (p[0], p[1], p[2], p[3]);
                out[0] = u01 + u10 - 2.0 * c * u00 * u11;
                out[1] = u11 - u01 + c * (u00 - u01) * u11;
                out[2] = u11 - u10 + c * (u00 - u10) * u11;
                out[3] = -2.0 * u11 + c * (u01 + u10) * u11;
            }
            System::ThreeState => {
                let (u0, u1, u2) = (p[0], p[1], p[2]);
                out[0] = u1 - 2.0 * c * u0 * u2;
                out[1] = 2.0 * u2 - u1 + c * (2.0 * u0 - u1) * u2;
                out[2] = -2.0 * u2 + c * u1 * u2;
            }
            System::Uv => {
                let (u, v) = (p[0], p[1]);
                out[0] = (2.0 * c * (1.0 - u) + 1.0) * v - u;
                out[1] = (c * (u - v) - 2.0) * v;
            }
            System::IndPair => {
                let (a, b) = (p[0], p[1]);
                out[0] = -a + 2.0 * c * (1.0 - a) * a * b;
                out[1] = -b + 2.0 * c * (1.0 - b) * a * b;
            }
            System::ScalarSex => out[0] = scalar_reaction(c, p[0]),
        }
    }

    pub fn ode_field(&self, p: &[f64]) -> Result<Vec<f64>> {
        let n = self.system.components();
        if p.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: p.len(),
            });
        }
        let mut out = vec![0.0; n];
        self.rate(p, &mut out);
        Ok(out)
    }
}

/// `f(u) = -u + 2c(1 - u)u^2`.
pub fn scalar_reaction(c: f64, u: f64) -> f64 {
    -u + 2.0 * c * (1.0 - u) * u * u
}

/// The two nonzero roots `rho1 < rho0` of the scalar reaction.
pub fn scalar_roots(c: f64) -> Result<(f64, f64)> {
    if !(c >= 2.0) {
        return Err(Error::NoRealRoots { c });
    }
    let r = (1.0 - 2.0 / c).sqrt();
    Ok(((1.0 - r) / 2.0, (1.0 + r) / 2.0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Eigenvalue {
    pub re: f64,
    pub im: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stability {
    Stable,
    Unstable,
    Saddle,
    NonHyperbolic,
}

impl Stability {
    pub fn as_str(self) -> &'static str {
        match self {
            Stability::Stable => "stable",
            Stability::Unstable => "unstable",
            Stability::Saddle => "saddle",
            Stability::NonHyperbolic => "nonhyperbolic",
        }
    }
}

const HYPERBOLIC_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Equilibrium {
    pub u: f64,
    pub v: f64,
    pub eigenvalues: [Eigenvalue; 2],
    pub stability: Stability,
}

impl Equilibrium {
    fn classify(c: f64, u: f64, v: f64) -> Self {
        let j = uv_jacobian(c, u, v);
        let tr = j[0][0] + j[1][1];
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        let disc = tr * tr / 4.0 - det;
        let eigenvalues = if disc >= 0.0 {
            let r = disc.sqrt();
            [
                Eigenvalue {
                    re: tr / 2.0 - r,
                    im: 0.0,
                },
                Eigenvalue {
                    re: tr / 2.0 + r,
                    im: 0.0,
                },
            ]
        } else {
            let r = (-disc).sqrt();
            [Eigenvalue { re: tr / 2.0, im: -r }, Eigenvalue { re: tr / 2.0, im: r }]
        };
        let (lo, hi) = (eigenvalues[0].re, eigenvalues[1].re);
        let stability = if lo.abs() < HYPERBOLIC_TOL || hi.abs() < HYPERBOLIC_TOL {
            Stability::NonHyperbolic
        } else if hi < 0.0 {
            Stability::Stable
        } else if lo > 0.0 {
            Stability::Unstable
        } else {
            Stability::Saddle
        };
        Self {
            u,
            v,
            eigenvalues,
            stability,
        }
    }
}

/// Jacobian of the `(u, v)` reaction field, row by component.
pub fn uv_jacobian(c: f64, u: f64, v: f64) -> [[f64; 2]; 2] {
    [
        [-2.0 * c * v - 1.0, 2.0 * c * (1.0 - u) + 1.0],
        [c * v, c * (u - 2.0 * v) - 2.0],
    ]
}

/// Fixed points of the `(u, v)` field: the origin and the two interior
/// points where the nullclines cross.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Equilibria {
    pub origin: Equilibrium,
    pub plus: Equilibrium,
    pub minus: Equilibrium,
}

/// Classified equilibria of the pair-density reaction. The three-state
/// system shares them through `(u, v) = (u1 + u2, u2)`.
pub fn equilibria(spec: &ReactionSpec) -> Result<Equilibria> {
    if !matches!(spec.system, System::Uv | System::ThreeState) {
        return Err(Error::InvalidParams(format!(
            "equilibria are classified for the uv and three-state systems, not {}",
            spec.system
        )));
    }
    let c = spec.c;
    if (c - 4.0).abs() < 1e-12 {
        return Err(Error::DegenerateAtC4);
    }
    if c < 4.0 {
        return Err(Error::NoRealRoots { c });
    }
    let r = (0.25 - 1.0 / c).sqrt();
    let point = |sign: f64| Equilibrium::classify(c, 0.5 + 1.0 / c + sign * r, 0.5 - 1.0 / c + sign * r);
    Ok(Equilibria {
        origin: Equilibrium::classify(c, 0.0, 0.0),
        plus: point(1.0),
        minus: point(-1.0),
    })
}

/// Tolerance on the region and box constraints of a field.
pub const REGION_TOL: f64 = 1e-6;

/// Values of a one-dimensional field on the grid `-x_max + i h`, one
/// vector per component.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    h: f64,
    x_max: f64,
    values: Vec<Vec<f64>>,
    pub time: f64,
}

impl Field {
    pub fn from_fn(h: f64, x_max: f64, components: usize, f: impl Fn(f64) -> Vec<f64>) -> Result<Self> {
        let n = grid_len(h, x_max)?;
        let mut values = vec![Vec::with_capacity(n); components];
        for i in 0..n {
            let x = -x_max + i as f64 * h;
            let p = f(x);
            if p.len() != components {
                return Err(Error::DimensionMismatch {
                    expected: components,
                    got: p.len(),
                });
            }
            for (col, value) in values.iter_mut().zip(p) {
                if !value.is_finite() {
                    return Err(Error::InvalidParams(format!("non-finite initial value at x = {x}")));
                }
                col.push(value);
            }
        }
        Ok(Self {
            h,
            x_max,
            values,
            time: 0.0,
        })
    }

    pub fn constant(h: f64, x_max: f64, point: &[f64]) -> Result<Self> {
        Self::from_fn(h, x_max, point.len(), |_| point.to_vec())
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn len(&self) -> usize {
        self.values[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn components(&self) -> usize {
        self.values.len()
    }

    pub fn x(&self, i: usize) -> f64 {
        -self.x_max + i as f64 * self.h
    }

    pub fn component(&self, k: usize) -> &[f64] {
        &self.values[k]
    }

    pub fn component_mut(&mut self, k: usize) -> &mut [f64] {
        &mut self.values[k]
    }

    pub fn point(&self, i: usize) -> Vec<f64> {
        self.values.iter().map(|col| col[i]).collect()
    }

    /// Grid mass `h * sum` of one component.
    pub fn mass(&self, k: usize) -> f64 {
        self.h * self.values[k].iter().sum::<f64>()
    }

    /// Indices of grid points in `[lo, hi]`.
    pub fn indices_in(&self, lo: f64, hi: f64) -> impl Iterator<Item = usize> + '_ {
        (0..self.len()).filter(move |&i| {
            let x = self.x(i);
            x >= lo - 1e-9 * self.h && x <= hi + 1e-9 * self.h
        })
    }

    /// CSV rows `t,x,<components>`.
    pub fn to_csv_rows(&self) -> Vec<String> {
        (0..self.len())
            .map(|i| {
                let mut row = format!("{},{}", self.time, self.x(i));
                for col in &self.values {
                    row.push_str(&format!(",{}", col[i]));
                }
                row
            })
            .collect()
    }

    /// Checks the box `[0, 1]` for every component and `v <= u` for the
    /// pair-density system.
    pub fn check_region(&self, system: System, tol: f64) -> Result<()> {
        for i in 0..self.len() {
            let p = self.point(i);
            let escape = |detail: String| Error::RegionEscape { t: self.time, detail };
            if let Some(k) = p.iter().position(|&q| !(q >= -tol && q <= 1.0 + tol)) {
                return Err(escape(format!("component {k} is {} at x = {}", p[k], self.x(i))));
            }
            if system == System::Uv && p[1] > p[0] + tol {
                return Err(escape(format!(
                    "v = {} exceeds u = {} at x = {}",
                    p[1],
                    p[0],
                    self.x(i)
                )));
            }
        }
        Ok(())
    }
}

fn grid_len(h: f64, x_max: f64) -> Result<usize> {
    if !(h > 0.0 && x_max > 0.0 && h.is_finite() && x_max.is_finite()) {
        return Err(Error::InvalidParams(format!("bad grid h = {h}, x_max = {x_max}")));
    }
    let cells = 2.0 * x_max / h;
    if (cells - cells.round()).abs() > 1e-6 * cells.max(1.0) {
        return Err(Error::InvalidParams(format!(
            "h = {h} does not divide the domain [-{x_max}, {x_max}]"
        )));
    }
    let n = cells.round() as usize + 1;
    if n > 50_000_000 {
        return Err(Error::TooLarge(format!("{n} grid points")));
    }
    Ok(n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn uv(c: f64) -> ReactionSpec {
        ReactionSpec::new(System::Uv, c).unwrap()
    }

    #[test]
    fn uv_field_values() {
        let s = uv(5.0);
        assert_eq!(s.ode_field(&[0.0, 0.0]).unwrap(), vec![0.0, 0.0]);
        // (1, 1) is not a fixed point: pairs still die at rate 2.
        assert_eq!(s.ode_field(&[1.0, 1.0]).unwrap(), vec![0.0, -2.0]);
        let v = 0.5 - 2.0 / 5.0;
        assert!(s.ode_field(&[0.5, v]).unwrap()[1].abs() < 1e-15);
        assert!(s.ode_field(&[0.5]).is_err());
        assert!(ReactionSpec::new(System::Uv, 0.0).is_err());
    }

    #[test]
    fn c25_equilibria_match_closed_form() {
        let e = equilibria(&uv(25.0)).unwrap();
        let r = (0.25f64 - 0.04).sqrt();
        assert!((e.plus.u - (0.54 + r)).abs() < 1e-12);
        assert!((e.plus.v - (0.46 + r)).abs() < 1e-12);
        assert!((e.plus.u - 0.998_257_57).abs() < 1e-8);
        assert!((e.plus.v - 0.918_257_57).abs() < 1e-8);
        assert_eq!(e.plus.stability, Stability::Stable);
        assert_eq!(e.minus.stability, Stability::Saddle);
        assert_eq!(e.origin.stability, Stability::Stable);
        for p in [e.plus, e.minus, e.origin] {
            let f = uv(25.0).ode_field(&[p.u, p.v]).unwrap();
            assert!(f[0].abs() < 1e-12 && f[1].abs() < 1e-12);
        }
    }

    #[test]
    fn equilibria_edge_cases() {
        assert_eq!(equilibria(&uv(4.0)), Err(Error::DegenerateAtC4));
        assert!(matches!(equilibria(&uv(3.0)), Err(Error::NoRealRoots { .. })));
        let three = ReactionSpec::new(System::ThreeState, 10.0).unwrap();
        assert_eq!(equilibria(&three).unwrap(), equilibria(&uv(10.0)).unwrap());
        assert!(equilibria(&ReactionSpec::new(System::ScalarSex, 10.0).unwrap()).is_err());
        let e = equilibria(&uv(1e4)).unwrap();
        assert!((e.plus.u - 1.0).abs() < 1e-3 && (e.plus.v - 1.0).abs() < 1e-3);
        // Just above the double point both interior points sit near (3/4, 1/4).
        let e = equilibria(&uv(4.0 + 1e-9)).unwrap();
        assert!((e.plus.u - 0.75).abs() < 1e-4 && (e.minus.v - 0.25).abs() < 1e-4);
    }

    #[test]
    fn scalar_roots_and_residuals() {
        assert_eq!(scalar_roots(2.0).unwrap(), (0.5, 0.5));
        let (r1, r0) = scalar_roots(2.5).unwrap();
        // Independent: roots of 5u^2 - 5u + 1 by the quadratic formula.
        let d = (25.0f64 - 20.0).sqrt();
        assert!((r1 - (5.0 - d) / 10.0).abs() < 1e-15 && (r0 - (5.0 + d) / 10.0).abs() < 1e-15);
        assert!((r1 - 0.276_393_2).abs() < 1e-7 && (r0 - 0.723_606_8).abs() < 1e-7);
        for c in [2.5, 7.0, 100.0] {
            let (a, b) = scalar_roots(c).unwrap();
            assert!(scalar_reaction(c, a).abs() < 1e-14 && scalar_reaction(c, b).abs() < 1e-14);
        }
        assert_eq!(scalar_roots(1.9), Err(Error::NoRealRoots { c: 1.9 }));
    }

    #[test]
    fn system_names_round_trip() {
        for s in System::ALL {
            assert_eq!(s.as_str().parse::<System>().unwrap(), s);
            assert_eq!(s.names().len(), s.components());
        }
        assert!("five_state".parse::<System>().is_err());
    }

    #[test]
    fn field_grid_and_region() {
        let f = Field::constant(0.25, 1.0, &[0.5, 0.6]).unwrap();
        assert_eq!(f.len(), 9);
        assert_eq!(f.x(8), 1.0);
        assert!(f.check_region(System::Uv, 1e-8).is_err());
        assert!(f.check_region(System::IndPair, 1e-8).is_ok());
        assert!(Field::constant(0.3, 1.0, &[0.0]).is_err());
        assert_eq!(f.indices_in(-0.25, 0.25).count(), 3);
    }

    proptest! {
        #[test]
        fn second_component_bounded_below(c in 0.1f64..500.0, u in 0.0f64..1.0, t in 0.0f64..1.0) {
            let v = u * t;
            let eta = uv(c).ode_field(&[u, v]).unwrap();
            prop_assert!(eta[1] >= -2.0 * v - 1e-12);
        }

        #[test]
        fn four_state_rates_sum_to_zero(c in 0.1f64..100.0, w in proptest::collection::vec(0.0f64..1.0, 4)) {
            let spec = ReactionSpec::new(System::FourState, c).unwrap();
            let r = spec.ode_field(&w).unwrap();
            prop_assert!(r.iter().sum::<f64>().abs() < 1e-10 * (1.0 + c));
        }

        #[test]
        fn variable_change_maps_three_state_to_uv(c in 0.1f64..100.0, a in 0.0f64..1.0, b in 0.0f64..1.0) {
            let (u1, u2) = (a * (1.0 - b), b);
            let three = ReactionSpec::new(System::ThreeState, c).unwrap().ode_field(&[1.0 - u1 - u2, u1, u2]).unwrap();
            let eta = uv(c).ode_field(&[u1 + u2, u2]).unwrap();
            prop_assert!((three[1] + three[2] - eta[0]).abs() < 1e-10 * (1.0 + c));
            prop_assert!((three[2] - eta[1]).abs() < 1e-10 * (1.0 + c));
        }
    }
}
