//! Oriented site percolation on the even sublattice `{(x, n) : x + n even}`
//! with wet fronts, Monte Carlo survival estimates and an exact oracle for
//! small instances.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Most sites `survival_exact` enumerates over.
pub const EXACT_SITE_LIMIT: usize = 25;

/// Open/closed marks on `[-w, w] x [0, levels]`. Sites off the even
/// sublattice are never open.
#[derive(Debug, Clone, PartialEq)]
pub struct PercGrid {
    half_width: usize,
    levels: usize,
    gamma: f64,
    dependence: usize,
    open: Vec<Vec<bool>>,
}

fn check_gamma(gamma: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&gamma) {
        return Err(Error::InvalidParams(format!(
            "closed density must lie in [0, 1], got {gamma}"
        )));
    }
    Ok(())
}

fn on_lattice(x: i64, n: usize) -> bool {
    (x + n as i64).rem_euclid(2) == 0
}

impl PercGrid {
    /// Builds a grid from an explicit mark function evaluated on the even
    /// sublattice. `dependence` records the range `M` of the field.
    pub fn from_fn(
        half_width: usize,
        levels: usize,
        gamma: f64,
        dependence: usize,
        mut open: impl FnMut(i64, usize) -> bool,
    ) -> Result<Self> {
        check_gamma(gamma)?;
        let w = half_width as i64;
        let open = (0..=levels)
            .map(|n| (-w..=w).map(|x| on_lattice(x, n) && open(x, n)).collect())
            .collect();
        Ok(Self {
            half_width,
            levels,
            gamma,
            dependence,
            open,
        })
    }

    /// Independent marks: a site is open iff its uniform exceeds `gamma`.
    pub fn from_uniforms(u: &UniformField, gamma: f64) -> Result<Self> {
        Self::from_fn(u.half_width, u.levels, gamma, 0, |x, n| u.get(x, n) > gamma)
    }

    pub fn half_width(&self) -> usize {
        self.half_width
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn dependence(&self) -> usize {
        self.dependence
    }

    pub fn is_open(&self, x: i64, n: usize) -> bool {
        let w = self.half_width as i64;
        n <= self.levels && (-w..=w).contains(&x) && self.open[n][(x + w) as usize]
    }

    /// Sites of the even sublattice at level `n`.
    pub fn lattice_sites(&self, n: usize) -> impl Iterator<Item = i64> {
        let w = self.half_width as i64;
        (-w..=w).filter(move |&x| on_lattice(x, n))
    }

    /// Fraction of closed sites among those on the even sublattice.
    pub fn closed_fraction(&self) -> f64 {
        let (mut closed, mut total) = (0usize, 0usize);
        for n in 0..=self.levels {
            for x in self.lattice_sites(n) {
                total += 1;
                closed += usize::from(!self.is_open(x, n));
            }
        }
        closed as f64 / total as f64
    }

    /// One line per level starting at `n = 0`: `#` open, `.` closed, blank
    /// off the sublattice.
    pub fn to_dump(&self) -> String {
        let mut out = format!("# perc gamma={} M={}\n", self.gamma, self.dependence);
        let w = self.half_width as i64;
        for n in 0..=self.levels {
            let line: String = (-w..=w)
                .map(|x| match (on_lattice(x, n), self.is_open(x, n)) {
                    (false, _) => ' ',
                    (true, true) => '#',
                    (true, false) => '.',
                })
                .collect();
            let _ = writeln!(out, "{line}");
        }
        out
    }

    pub fn from_dump(text: &str) -> Result<Self> {
        // Other comment lines may precede the grid's own header.
        let mut lines = text
            .lines()
            .skip_while(|l| l.starts_with('#') && !l.starts_with("# perc "));
        let header = lines.next().unwrap_or_default();
        let bad = |msg: String| Error::InvalidParams(format!("grid dump: {msg}"));
        let rest = header
            .strip_prefix("# perc ")
            .ok_or_else(|| bad(format!("missing header, got {header:?}")))?;
        let (mut gamma, mut dependence) = (None, None);
        for field in rest.split_whitespace() {
            match field.split_once('=') {
                Some(("gamma", v)) => gamma = v.parse::<f64>().ok(),
                Some(("M", v)) => dependence = v.parse::<usize>().ok(),
                _ => return Err(bad(format!("unexpected header field {field:?}"))),
            }
        }
        let (Some(gamma), Some(dependence)) = (gamma, dependence) else {
            return Err(bad("header needs gamma and M".into()));
        };
        let rows: Vec<&str> = lines.collect();
        if rows.is_empty() {
            return Err(bad("no levels".into()));
        }
        let width = rows.iter().map(|r| r.len()).max().unwrap_or(0).max(1);
        if width % 2 == 0 {
            return Err(bad(format!("row width {width} must be odd")));
        }
        let w = (width / 2) as i64;
        let mut cells = Vec::with_capacity(rows.len());
        for (n, row) in rows.iter().enumerate() {
            let chars: Vec<char> = row.chars().collect();
            let mut level = Vec::with_capacity(width);
            for (i, x) in (-w..=w).enumerate() {
                let c = chars.get(i).copied().unwrap_or(' ');
                let open = match (on_lattice(x, n), c) {
                    (true, '#') => true,
                    (true, '.') | (false, ' ') => false,
                    _ => return Err(bad(format!("unexpected {c:?} at level {n}, x = {x}"))),
                };
                level.push(open);
            }
            cells.push(level);
        }
        let levels = cells.len() - 1;
        Self::from_fn(w as usize, levels, gamma, dependence, |x, n| cells[n][(x + w) as usize])
    }
}

/// Uniform marks shared across closed densities, so grids at different
/// `gamma` are coupled monotonically.
#[derive(Debug, Clone)]
pub struct UniformField {
    half_width: usize,
    levels: usize,
    values: Vec<f64>,
}

impl UniformField {
    pub fn sample<R: Rng + ?Sized>(half_width: usize, levels: usize, rng: &mut R) -> Self {
        let width = 2 * half_width + 1;
        let values = (0..width * (levels + 1)).map(|_| rng.random::<f64>()).collect();
        Self {
            half_width,
            levels,
            values,
        }
    }

    fn get(&self, x: i64, n: usize) -> f64 {
        let width = 2 * self.half_width + 1;
        self.values[n * width + (x + self.half_width as i64) as usize]
    }
}

/// Independent Bernoulli(1 - gamma) open marks.
pub fn generate(gamma: f64, half_width: usize, levels: usize, seed: u64) -> Result<PercGrid> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    PercGrid::from_uniforms(&UniformField::sample(half_width, levels, &mut rng), gamma)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WetFront {
    pub n: usize,
    pub wet: BTreeSet<i64>,
}

/// Wet sets for every level. A site is wet at level `n` when an oriented
/// path of open sites, starting at an open site of `w0` on level 0, reaches
/// it.
pub fn evolve(grid: &PercGrid, w0: &[i64]) -> Vec<WetFront> {
    let first: BTreeSet<i64> = w0.iter().copied().filter(|&x| grid.is_open(x, 0)).collect();
    let mut fronts = vec![WetFront { n: 0, wet: first }];
    for n in 1..=grid.levels {
        let prev = &fronts[n - 1].wet;
        let wet = prev
            .iter()
            .flat_map(|&x| [x - 1, x + 1])
            .filter(|&y| grid.is_open(y, n))
            .collect();
        fronts.push(WetFront { n, wet });
    }
    fronts
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitialWet {
    Fixed(Vec<i64>),
    /// Each even site of level 0 is included independently with this
    /// probability.
    Bernoulli(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Target {
    /// The origin is wet at the last level (which must be even).
    Origin,
    /// Some site is wet at the last level.
    Nonempty,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SurvivalQuery {
    pub gamma: f64,
    pub half_width: usize,
    pub levels: usize,
    pub init: InitialWet,
    pub target: Target,
}

impl SurvivalQuery {
    fn validate(&self) -> Result<()> {
        check_gamma(self.gamma)?;
        if let InitialWet::Bernoulli(p) = self.init {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidParams(format!(
                    "initial density must lie in [0, 1], got {p}"
                )));
            }
        }
        if self.target == Target::Origin && self.levels % 2 == 1 {
            return Err(Error::InvalidParams(format!(
                "the origin is not on the sublattice at odd level {}",
                self.levels
            )));
        }
        Ok(())
    }

    fn hit(&self, fronts: &[WetFront]) -> bool {
        let last = &fronts[self.levels].wet;
        match self.target {
            Target::Origin => last.contains(&0),
            Target::Nonempty => !last.is_empty(),
        }
    }

    fn draw_initial<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<i64> {
        let w = self.half_width as i64;
        match &self.init {
            InitialWet::Fixed(sites) => sites.clone(),
            InitialWet::Bernoulli(p) => (-w..=w)
                .filter(|x| x.rem_euclid(2) == 0)
                .filter(|_| rng.random::<f64>() < *p)
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub successes: u64,
    pub trials: u64,
}

impl McEstimate {
    pub fn mean(&self) -> f64 {
        self.successes as f64 / self.trials as f64
    }

    pub fn std_error(&self) -> f64 {
        let p = self.mean();
        (p * (1.0 - p) / self.trials as f64).sqrt()
    }

    /// Normal-approximation interval `mean +- z * std_error`.
    pub fn interval(&self, z: f64) -> (f64, f64) {
        let (p, s) = (self.mean(), self.std_error());
        (p - z * s, p + z * s)
    }
}

/// Monte Carlo frequency of the query's target event.
pub fn survival_mc(query: &SurvivalQuery, trials: u64, seed: u64) -> Result<McEstimate> {
    Ok(survival_curve(&[query.gamma], query, trials, seed)?[0])
}

/// Estimates at several closed densities from the same uniforms and initial
/// sets, so the estimates are non-increasing in `gamma`.
pub fn survival_curve(gammas: &[f64], query: &SurvivalQuery, trials: u64, seed: u64) -> Result<Vec<McEstimate>> {
    if trials == 0 {
        return Err(Error::InvalidParams("need at least one trial".into()));
    }
    for &gamma in gammas {
        SurvivalQuery { gamma, ..query.clone() }.validate()?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut hits = vec![0u64; gammas.len()];
    for _ in 0..trials {
        let marks = UniformField::sample(query.half_width, query.levels, &mut rng);
        let w0 = query.draw_initial(&mut rng);
        for (hit, &gamma) in hits.iter_mut().zip(gammas) {
            let grid = PercGrid::from_uniforms(&marks, gamma)?;
            *hit += u64::from(query.hit(&evolve(&grid, &w0)));
        }
    }
    Ok(hits
        .into_iter()
        .map(|successes| McEstimate { successes, trials })
        .collect())
}

/// Exact probability of the query's target event, summing over every mark
/// configuration of the sites that can influence it.
pub fn survival_exact(query: &SurvivalQuery) -> Result<f64> {
    query.validate()?;
    let w = query.half_width as i64;
    let gamma = query.gamma;
    let (w0, start_open) = match &query.init {
        InitialWet::Fixed(sites) => (sites.clone(), 1.0 - gamma),
        // A level-0 site is wet with probability p (1 - gamma) independently.
        InitialWet::Bernoulli(p) => ((-w..=w).filter(|x| x.rem_euclid(2) == 0).collect(), p * (1.0 - gamma)),
    };

    // Forward cone of w0 in the fully open grid.
    let all_open = PercGrid::from_fn(query.half_width, query.levels, gamma, 0, |_, _| true)?;
    let cone: Vec<(i64, usize)> = evolve(&all_open, &w0)
        .into_iter()
        .flat_map(|f| f.wet.into_iter().map(move |x| (x, f.n)))
        .collect();
    if cone.len() > EXACT_SITE_LIMIT {
        return Err(Error::TooLarge(format!(
            "{} relevant sites exceed the limit of {EXACT_SITE_LIMIT}",
            cone.len()
        )));
    }

    let mut total = 0.0;
    for mask in 0u64..(1u64 << cone.len()) {
        let bit = |x: i64, n: usize| {
            cone.iter()
                .position(|&s| s == (x, n))
                .is_some_and(|i| mask >> i & 1 == 1)
        };
        let weight: f64 = cone
            .iter()
            .enumerate()
            .map(|(i, &(_, n))| {
                let q = if n == 0 { start_open } else { 1.0 - gamma };
                if mask >> i & 1 == 1 {
                    q
                } else {
                    1.0 - q
                }
            })
            .product();
        if weight == 0.0 {
            continue;
        }
        let grid = PercGrid::from_fn(query.half_width, query.levels, gamma, 0, bit)?;
        if query.hit(&evolve(&grid, &w0)) {
            total += weight;
        }
    }
    Ok(total)
}
