//! Diploid branching particle systems on a finite torus: each site holds a
//! male and a female nest, particles die at a constant rate and are born
//! into empty nests from a male-female parent pair nearby.

mod dual;
mod events;
mod good_event;

pub use dual::{dual_influence, DualStats};
pub use events::{
    advance, coupled_advance, coupled_advance_rates, run, CouplingReport, EventKind, EventStream, GraphicalEvent,
    GraphicalEventLog, RunOutcome,
};
pub use good_event::{good_event_field, good_event_probability, no_death_probability, GoodEventField};

use crate::error::{Error, Result};

/// Periodic box `Z_{n_1} x ... x Z_{n_d}`, sites numbered row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Torus {
    sides: Vec<usize>,
}

impl Torus {
    pub fn new(sides: Vec<usize>) -> Result<Self> {
        if sides.is_empty() || sides.iter().any(|&s| s < 3) {
            return Err(Error::InvalidParams(format!(
                "torus sides must be at least 3, got {sides:?}"
            )));
        }
        Ok(Self { sides })
    }

    pub fn line(n: usize) -> Result<Self> {
        Self::new(vec![n])
    }

    pub fn dims(&self) -> usize {
        self.sides.len()
    }

    pub fn sides(&self) -> &[usize] {
        &self.sides
    }

    pub fn len(&self) -> usize {
        self.sides.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn coords(&self, mut site: usize) -> Vec<usize> {
        let mut out = vec![0; self.dims()];
        for (c, &s) in out.iter_mut().zip(&self.sides).rev() {
            *c = site % s;
            site /= s;
        }
        out
    }

    /// Site at integer coordinates, wrapped onto the torus.
    pub fn site(&self, coords: &[i64]) -> usize {
        coords
            .iter()
            .zip(&self.sides)
            .fold(0, |acc, (&c, &s)| acc * s + c.rem_euclid(s as i64) as usize)
    }

    pub fn shift(&self, site: usize, offset: &[i64]) -> usize {
        let c: Vec<i64> = self
            .coords(site)
            .iter()
            .zip(offset)
            .map(|(&c, &o)| c as i64 + o)
            .collect();
        self.site(&c)
    }

    /// Neighbor of `site` one step along axis `axis` in the positive
    /// direction.
    pub fn step(&self, site: usize, axis: usize) -> usize {
        let mut offset = vec![0; self.dims()];
        offset[axis] = 1;
        self.shift(site, &offset)
    }
}

/// Interaction offsets; always contains the origin.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Neighborhood {
    offsets: Vec<Vec<i64>>,
}

impl Neighborhood {
    pub fn new(offsets: Vec<Vec<i64>>) -> Result<Self> {
        let Some(d) = offsets.first().map(Vec::len) else {
            return Err(Error::InvalidParams("neighborhood is empty".into()));
        };
        if offsets.iter().any(|o| o.len() != d) {
            return Err(Error::InvalidParams("neighborhood offsets differ in dimension".into()));
        }
        if !offsets.iter().any(|o| o.iter().all(|&c| c == 0)) {
            return Err(Error::InvalidParams("neighborhood must contain the origin".into()));
        }
        let mut sorted = offsets.clone();
        sorted.sort();
        sorted.dedup();
        if sorted.len() != offsets.len() {
            return Err(Error::InvalidParams("neighborhood has repeated offsets".into()));
        }
        Ok(Self { offsets })
    }

    /// The origin and the `2d` nearest neighbors.
    pub fn nearest(d: usize) -> Self {
        let mut offsets = vec![vec![0; d]];
        for axis in 0..d {
            for sign in [-1, 1] {
                let mut o = vec![0; d];
                o[axis] = sign;
                offsets.push(o);
            }
        }
        Self { offsets }
    }

    pub fn offsets(&self) -> &[Vec<i64>] {
        &self.offsets
    }

    pub fn len(&self) -> usize {
        self.offsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.offsets.is_empty()
    }

    pub fn dims(&self) -> usize {
        self.offsets[0].len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BirthRule {
    /// Each male-female pair anywhere in the neighborhood gives birth at
    /// rate `lambda`.
    PairedAnywhere,
    /// Each neighboring site holding both sexes gives birth at rate `lambda`.
    SameSite,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Stirring {
    None,
    /// Whole sites exchanged across each edge at rate `epsilon^-2`.
    LilyPad {
        epsilon: f64,
    },
    /// Each floor exchanged separately across each edge at rate `epsilon^-2`.
    Individual {
        epsilon: f64,
    },
}

impl Stirring {
    pub fn rate(self) -> f64 {
        match self {
            Stirring::None => 0.0,
            Stirring::LilyPad { epsilon } | Stirring::Individual { epsilon } => epsilon.powi(-2),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IpsParams {
    pub lambda: f64,
    pub delta: f64,
    pub rule: BirthRule,
    pub neighborhood: Neighborhood,
    pub stirring: Stirring,
}

impl IpsParams {
    pub fn new(lambda: f64, delta: f64, rule: BirthRule, neighborhood: Neighborhood) -> Result<Self> {
        let p = Self {
            lambda,
            delta,
            rule,
            neighborhood,
            stirring: Stirring::None,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_stirring(mut self, stirring: Stirring) -> Result<Self> {
        self.stirring = stirring;
        self.validate()?;
        Ok(self)
    }

    fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite() && self.delta >= 0.0 && self.delta.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "rates must be finite and non-negative, got lambda = {}, delta = {}",
                self.lambda, self.delta
            )));
        }
        if let Stirring::LilyPad { epsilon } | Stirring::Individual { epsilon } = self.stirring {
            if !(epsilon > 0.0 && epsilon.is_finite()) {
                return Err(Error::InvalidParams(format!(
                    "stirring scale must be positive, got {epsilon}"
                )));
            }
        }
        Ok(())
    }

    /// Parent channels per nest: ordered pairs of neighborhood sites, or
    /// single sites.
    pub fn parent_channels(&self) -> usize {
        let n = self.neighborhood.len();
        match self.rule {
            BirthRule::PairedAnywhere => n * n,
            BirthRule::SameSite => n,
        }
    }

    /// Largest total flip rate of a nest, `delta + lambda |N|^2` or
    /// `delta + lambda |N|`.
    pub fn c_star(&self) -> f64 {
        self.delta + self.lambda * self.parent_channels() as f64
    }

    pub(crate) fn check_torus(&self, torus: &Torus) -> Result<()> {
        if torus.dims() != self.neighborhood.dims() {
            return Err(Error::DimensionMismatch {
                expected: self.neighborhood.dims(),
                got: torus.dims(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Floor {
    Male = 0,
    Female = 1,
}

impl Floor {
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Self {
        if i == 0 {
            Floor::Male
        } else {
            Floor::Female
        }
    }
}

/// Occupancy bits `(male, female)` per site.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeState {
    torus: Torus,
    nests: Vec<[bool; 2]>,
    time: f64,
}

impl LatticeState {
    pub fn empty(torus: Torus) -> Self {
        let n = torus.len();
        Self {
            torus,
            nests: vec![[false; 2]; n],
            time: 0.0,
        }
    }

    pub fn full(torus: Torus) -> Self {
        let n = torus.len();
        Self {
            torus,
            nests: vec![[true; 2]; n],
            time: 0.0,
        }
    }

    pub fn from_fn(torus: Torus, mut f: impl FnMut(usize) -> (bool, bool)) -> Self {
        let nests = (0..torus.len())
            .map(|s| {
                let (m, w) = f(s);
                [m, w]
            })
            .collect();
        Self {
            torus,
            nests,
            time: 0.0,
        }
    }

    /// A single male-female pair at `site`.
    pub fn single_pair(torus: Torus, site: usize) -> Self {
        Self::from_fn(torus, |s| (s == site, s == site))
    }

    pub fn torus(&self) -> &Torus {
        &self.torus
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn get(&self, site: usize) -> (bool, bool) {
        let [m, w] = self.nests[site];
        (m, w)
    }

    pub fn nest(&self, site: usize, floor: Floor) -> bool {
        self.nests[site][floor.index()]
    }

    pub fn set(&mut self, site: usize, floor: Floor, value: bool) {
        self.nests[site][floor.index()] = value;
    }

    pub fn particles(&self) -> usize {
        self.nests.iter().map(|[m, w]| usize::from(*m) + usize::from(*w)).sum()
    }

    pub fn floor_count(&self, floor: Floor) -> usize {
        self.nests.iter().filter(|n| n[floor.index()]).count()
    }

    /// No births can ever happen again: one sex has died out.
    pub fn is_dead(&self) -> bool {
        self.floor_count(Floor::Male) == 0 || self.floor_count(Floor::Female) == 0
    }

    pub fn has_pair(&self) -> bool {
        self.nests.iter().any(|[m, w]| *m && *w)
    }

    /// Sites holding both a male and a female.
    pub fn pair_sites(&self) -> impl Iterator<Item = usize> + '_ {
        self.nests
            .iter()
            .enumerate()
            .filter(|(_, [m, w])| *m && *w)
            .map(|(s, _)| s)
    }

    fn site_le(&self, other: &Self, site: usize) -> bool {
        let [a1, a2] = self.nests[site];
        let [b1, b2] = other.nests[site];
        a1 <= b1 && a2 <= b2
    }

    /// First site where `self <= other` fails in the nest-wise order.
    pub fn first_order_violation(&self, other: &Self) -> Option<usize> {
        (0..self.nests.len()).find(|&s| !self.site_le(other, s))
    }

    pub fn le(&self, other: &Self) -> bool {
        self.torus == other.torus && self.first_order_violation(other).is_none()
    }

    /// Rows `t, x, male, female` with `x` the site index.
    pub fn to_csv_rows(&self) -> String {
        let mut out = String::new();
        for (x, [m, w]) in self.nests.iter().enumerate() {
            out.push_str(&format!("{},{x},{},{}\n", self.time, u8::from(*m), u8::from(*w)));
        }
        out
    }
}

/// Axis-aligned box of sites, half-open per axis and measured in torus
/// coordinates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Window {
    pub lo: Vec<usize>,
    pub hi: Vec<usize>,
}

impl Window {
    pub fn full(torus: &Torus) -> Self {
        Self {
            lo: vec![0; torus.dims()],
            hi: torus.sides().to_vec(),
        }
    }

    pub fn interval(lo: usize, hi: usize) -> Self {
        Self {
            lo: vec![lo],
            hi: vec![hi],
        }
    }

    fn contains(&self, coords: &[usize]) -> bool {
        coords
            .iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(c, (lo, hi))| lo <= c && c < hi)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    pub pairs: f64,
    pub males: f64,
    pub females: f64,
    /// Some site in the window holds both sexes.
    pub survival: bool,
}

pub fn observe(state: &LatticeState, window: &Window) -> Result<Observation> {
    let torus = state.torus();
    let fits = window.lo.len() == torus.dims()
        && window.hi.len() == torus.dims()
        && window
            .lo
            .iter()
            .zip(&window.hi)
            .zip(torus.sides())
            .all(|((lo, hi), side)| lo < hi && hi <= side);
    if !fits {
        return Err(Error::InvalidParams(format!(
            "window {window:?} does not fit the torus"
        )));
    }
    let (mut n, mut pairs, mut males, mut females) = (0usize, 0usize, 0usize, 0usize);
    for site in 0..torus.len() {
        if !window.contains(&torus.coords(site)) {
            continue;
        }
        let (m, w) = state.get(site);
        n += 1;
        pairs += usize::from(m && w);
        males += usize::from(m);
        females += usize::from(w);
    }
    let n = n as f64;
    Ok(Observation {
        pairs: pairs as f64 / n,
        males: males as f64 / n,
        females: females as f64 / n,
        survival: pairs > 0,
    })
}
