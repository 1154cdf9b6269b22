//! Finite-population Moran models whose empirical measures follow the
//! selection-mutation flow (strong selection) or a Fleming-Viot diffusion
//! (weak selection, with extra resampling).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};

use crate::error::{Error, Result};
use crate::simplex::{fitness_into, mean_of, site_index, FitnessParams, SimplexMeasure};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Strong,
    Weak,
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "strong" => Ok(Mode::Strong),
            "weak" => Ok(Mode::Weak),
            other => Err(Error::InvalidParams(format!(
                "unknown mode {other:?}, expected strong or weak"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Channel {
    Selection,
    Mutation,
    Resampling,
}

impl Channel {
    pub fn as_str(self) -> &'static str {
        match self {
            Channel::Selection => "selection",
            Channel::Mutation => "mutation",
            Channel::Resampling => "resampling",
        }
    }
}

/// One particle at `from` replaced by one at `to`. Indices are 0-based grid
/// positions; `from == to` is a recorded no-op.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MoranEvent {
    pub t: f64,
    pub from: usize,
    pub to: usize,
    pub channel: Channel,
}

/// Particle counts per site with the time they refer to.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Population {
    half_width: usize,
    counts: Vec<u64>,
    size: u64,
}

impl Population {
    pub fn from_counts(half_width: usize, counts: Vec<u64>) -> Result<Self> {
        if counts.len() != 2 * half_width + 1 {
            return Err(Error::DimensionMismatch {
                expected: 2 * half_width + 1,
                got: counts.len(),
            });
        }
        let size = counts.iter().sum::<u64>();
        if size < 2 {
            return Err(Error::InvalidParams(format!("need at least 2 particles, got {size}")));
        }
        Ok(Self {
            half_width,
            counts,
            size,
        })
    }

    /// `n` particles distributed as close to `pi` as integer counts allow
    /// (largest remainders get the leftover particles).
    pub fn from_measure(pi: &SimplexMeasure, n: u64) -> Result<Self> {
        let scaled: Vec<f64> = pi.values().iter().map(|q| q * n as f64).collect();
        let mut counts: Vec<u64> = scaled.iter().map(|s| s.floor() as u64).collect();
        let placed: u64 = counts.iter().sum();
        let mut order: Vec<usize> = (0..counts.len()).collect();
        order.sort_by(|&a, &b| (scaled[b] - scaled[b].floor()).total_cmp(&(scaled[a] - scaled[a].floor())));
        for &i in order.iter().take(n.saturating_sub(placed) as usize) {
            counts[i] += 1;
        }
        Self::from_counts(pi.half_width(), counts)
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn size(&self) -> u64 {
        self.size
    }

    pub fn half_width(&self) -> usize {
        self.half_width
    }

    pub fn empirical(&self) -> SimplexMeasure {
        let n = self.size as f64;
        SimplexMeasure::from_raw(self.counts.iter().map(|&c| c as f64 / n).collect())
    }

    fn apply(&mut self, from: usize, to: usize) {
        self.counts[from] -= 1;
        self.counts[to] += 1;
    }
}

/// Draws a site with probability proportional to its count.
fn pick_by_count<R: Rng + ?Sized>(counts: &[u64], total: u64, rng: &mut R) -> usize {
    let mut target = rng.random_range(0..total);
    for (i, &c) in counts.iter().enumerate() {
        if target < c {
            return i;
        }
        target -= c;
    }
    unreachable!("counts sum to total")
}

fn pick_by_weight<R: Rng + ?Sized>(weights: impl Iterator<Item = f64>, total: f64, rng: &mut R) -> usize {
    let mut target = rng.random::<f64>() * total;
    let mut last = 0;
    for (i, w) in weights.enumerate() {
        if w > 0.0 {
            last = i;
            if target < w {
                return i;
            }
            target -= w;
        }
    }
    last
}

/// Exact next-event sampler for one trajectory.
pub struct MoranEngine<'a, R: Rng + ?Sized> {
    mode: Mode,
    params: &'a FitnessParams,
    pop: Population,
    time: f64,
    rng: &'a mut R,
    pi: Vec<f64>,
    m: Vec<f64>,
}

impl<'a, R: Rng + ?Sized> MoranEngine<'a, R> {
    pub fn new(mode: Mode, params: &'a FitnessParams, init: Population, rng: &'a mut R) -> Result<Self> {
        params.check_dims(init.counts.len())?;
        let n = init.counts.len();
        Ok(Self {
            mode,
            params,
            pop: init,
            time: 0.0,
            rng,
            pi: vec![0.0; n],
            m: vec![0.0; n],
        })
    }

    pub fn population(&self) -> &Population {
        &self.pop
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    /// Samples the next event at or before `t_end`, applying it to the
    /// population. Returns `None` once the next event would fall after
    /// `t_end` or every rate vanishes; the clock is then left at `t_end`.
    pub fn next_event(&mut self, t_end: f64) -> Option<MoranEvent> {
        let n = self.pop.size as f64;
        for (q, &c) in self.pi.iter_mut().zip(&self.pop.counts) {
            *q = c as f64 / n;
        }
        fitness_into(self.params, &self.pi, &mut self.m);
        let mbar = mean_of(&self.pi, &self.m);
        let sites = self.pi.len();

        let selection = n * mbar;
        let mutation = n * sites as f64 * self.params.mu();
        let resampling = match self.mode {
            Mode::Strong => 0.0,
            Mode::Weak => 0.5 * n * n * (1.0 - self.pi.iter().map(|q| q * q).sum::<f64>()).max(0.0),
        };
        let total = selection + mutation + resampling;
        if !(total > 0.0) {
            self.time = t_end;
            return None;
        }
        let wait: f64 = Exp1.sample(self.rng);
        let t = self.time + wait / total;
        if t > t_end {
            self.time = t_end;
            return None;
        }
        self.time = t;

        let u = self.rng.random::<f64>() * total;
        let counts = &self.pop.counts;
        let size = self.pop.size;
        let (from, to, channel) = if u < selection {
            let from = pick_by_count(counts, size, self.rng);
            let weights = self.m.iter().zip(&self.pi).map(|(m, q)| m * q);
            let to = pick_by_weight(weights, mbar, self.rng);
            (from, to, Channel::Selection)
        } else if u < selection + mutation {
            let from = pick_by_count(counts, size, self.rng);
            (from, self.rng.random_range(0..sites), Channel::Mutation)
        } else {
            // Ordered pairs of distinct sites, weighted by pi_x pi_y.
            loop {
                let from = pick_by_count(counts, size, self.rng);
                let to = pick_by_count(counts, size, self.rng);
                if from != to {
                    break (from, to, Channel::Resampling);
                }
            }
        };
        self.pop.apply(from, to);
        Some(MoranEvent { t, from, to, channel })
    }
}

/// Initial state and complete event log of a simulated path.
#[derive(Debug, Clone, PartialEq)]
pub struct MoranTrajectory {
    pub mode: Mode,
    pub initial: Population,
    pub events: Vec<MoranEvent>,
    pub t_end: f64,
}

impl MoranTrajectory {
    pub fn size(&self) -> u64 {
        self.initial.size
    }

    /// Counts after every event up to and including time `t`.
    pub fn counts_at(&self, t: f64) -> Vec<u64> {
        let mut counts = self.initial.counts.clone();
        for e in self.events.iter().take_while(|e| e.t <= t) {
            counts[e.from] -= 1;
            counts[e.to] += 1;
        }
        counts
    }

    pub fn final_measure(&self) -> SimplexMeasure {
        let mut pop = self.initial.clone();
        for e in &self.events {
            pop.apply(e.from, e.to);
        }
        pop.empirical()
    }

    /// Empirical measures at `0, mesh, 2 mesh, ...` up to `t_end`.
    pub fn snapshots(&self, mesh: f64) -> Result<Vec<(f64, SimplexMeasure)>> {
        let times = mesh_times(mesh, self.t_end)?;
        let mut pop = self.initial.clone();
        let mut events = self.events.iter().peekable();
        let mut out = Vec::with_capacity(times.len());
        for t in times {
            while let Some(e) = events.next_if(|e| e.t <= t) {
                pop.apply(e.from, e.to);
            }
            out.push((t, pop.empirical()));
        }
        Ok(out)
    }

    pub fn count(&self, channel: Channel) -> usize {
        self.events.iter().filter(|e| e.channel == channel).count()
    }

    /// `int_0^T f(pi_s) ds` along the piecewise-constant path.
    pub fn time_integral(&self, mut f: impl FnMut(&[f64]) -> f64) -> f64 {
        let mut pop = self.initial.clone();
        let mut pi = pop.empirical().into_values();
        let mut last = 0.0;
        let mut acc = 0.0;
        for e in &self.events {
            acc += (e.t - last) * f(&pi);
            last = e.t;
            pop.apply(e.from, e.to);
            refresh(&pop, &mut pi);
        }
        acc + (self.t_end - last) * f(&pi)
    }
}

fn refresh(pop: &Population, pi: &mut [f64]) {
    let n = pop.size as f64;
    for (q, &c) in pi.iter_mut().zip(&pop.counts) {
        *q = c as f64 / n;
    }
}

fn mesh_times(mesh: f64, t_end: f64) -> Result<Vec<f64>> {
    if !(mesh > 0.0 && mesh.is_finite()) {
        return Err(Error::InvalidParams(format!("mesh must be positive, got {mesh}")));
    }
    let steps = (t_end / mesh + 1e-9).floor() as usize;
    Ok((0..=steps).map(|k| k as f64 * mesh).collect())
}

/// Simulates with a fresh ChaCha generator seeded from `seed`.
pub fn simulate(mode: Mode, p: &FitnessParams, init: &Population, t_end: f64, seed: u64) -> Result<MoranTrajectory> {
    simulate_with_rng(mode, p, init, t_end, &mut ChaCha8Rng::seed_from_u64(seed))
}

pub fn simulate_with_rng<R: Rng + ?Sized>(
    mode: Mode,
    p: &FitnessParams,
    init: &Population,
    t_end: f64,
    rng: &mut R,
) -> Result<MoranTrajectory> {
    if !(t_end >= 0.0 && t_end.is_finite()) {
        return Err(Error::InvalidParams(format!(
            "horizon must be finite and non-negative, got {t_end}"
        )));
    }
    let mut engine = MoranEngine::new(mode, p, init.clone(), rng)?;
    let mut events = Vec::new();
    while let Some(e) = engine.next_event(t_end) {
        events.push(e);
    }
    Ok(MoranTrajectory {
        mode,
        initial: init.clone(),
        events,
        t_end,
    })
}

/// Realized and predicted covariation of two coordinates on a time mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct QvPath {
    pub times: Vec<f64>,
    /// Running sum of products of compensated increments over mesh cells.
    pub realized: Vec<f64>,
    /// `int_0^t (1{x = y} pi_x - pi_x pi_y) ds` along the simulated path.
    pub predicted: Vec<f64>,
}

impl QvPath {
    pub fn final_ratio(&self) -> f64 {
        self.realized.last().unwrap_or(&0.0) / self.predicted.last().unwrap_or(&0.0)
    }
}

/// Quadratic covariation estimate for sites `x` and `y` (grid coordinates in
/// `[-L, L]`). Increments of `pi` are compensated by the integrated drift
/// `pi (m - mbar) + mu (1 - |E| pi)` before being multiplied.
pub fn qv_estimate(traj: &MoranTrajectory, p: &FitnessParams, x: i64, y: i64, mesh: f64) -> Result<QvPath> {
    let lw = traj.initial.half_width;
    p.check_dims(traj.initial.counts.len())?;
    let (Some(ix), Some(iy)) = (site_index(lw, x), site_index(lw, y)) else {
        return Err(Error::InvalidParams(format!(
            "sites ({x}, {y}) lie outside [-{lw}, {lw}]"
        )));
    };
    let times = mesh_times(mesh, traj.t_end)?;
    let sites = traj.initial.counts.len();
    let mu = p.mu();

    let mut pop = traj.initial.clone();
    let mut pi = pop.empirical().into_values();
    let mut m = vec![0.0; sites];
    let drift = |pi: &[f64], m: &mut [f64], i: usize| {
        fitness_into(p, pi, m);
        let mbar = mean_of(pi, m);
        pi[i] * (m[i] - mbar) + mu * (1.0 - sites as f64 * pi[i])
    };
    let bracket = |pi: &[f64]| {
        if ix == iy {
            pi[ix] - pi[ix] * pi[ix]
        } else {
            -pi[ix] * pi[iy]
        }
    };

    // Compensated martingale values M_x, M_y and the predicted bracket, all
    // advanced exactly between events.
    let (mut mx, mut my, mut pred) = (0.0, 0.0, 0.0);
    let mut rates = (drift(&pi, &mut m, ix), drift(&pi, &mut m, iy), bracket(&pi));
    let mut clock = 0.0;
    let advance = |to: f64, clock: &mut f64, mx: &mut f64, my: &mut f64, pred: &mut f64, rates: (f64, f64, f64)| {
        let dt = to - *clock;
        *mx -= rates.0 * dt;
        *my -= rates.1 * dt;
        *pred += rates.2 * dt;
        *clock = to;
    };

    let mut events = traj.events.iter().peekable();
    let mut out = QvPath {
        times: times.clone(),
        realized: Vec::with_capacity(times.len()),
        predicted: Vec::with_capacity(times.len()),
    };
    let (mut prev_x, mut prev_y, mut realized) = (0.0, 0.0, 0.0);
    let step = 1.0 / pop.size as f64;
    for t in times {
        while let Some(e) = events.next_if(|e| e.t <= t) {
            advance(e.t, &mut clock, &mut mx, &mut my, &mut pred, rates);
            if e.from != e.to {
                for (target, idx) in [(&mut mx, ix), (&mut my, iy)] {
                    if e.from == idx {
                        *target -= step;
                    }
                    if e.to == idx {
                        *target += step;
                    }
                }
                pop.apply(e.from, e.to);
                refresh(&pop, &mut pi);
                rates = (drift(&pi, &mut m, ix), drift(&pi, &mut m, iy), bracket(&pi));
            }
        }
        advance(t, &mut clock, &mut mx, &mut my, &mut pred, rates);
        realized += (mx - prev_x) * (my - prev_y);
        prev_x = mx;
        prev_y = my;
        out.realized.push(realized);
        out.predicted.push(pred);
    }
    Ok(out)
}

/// Unnormalized log-density `(mu - 1) sum log pi_x + mbar` of the stationary
/// law of the weak-selection diffusion.
pub fn ek_log_density(pi: &SimplexMeasure, p: &FitnessParams) -> Result<f64> {
    p.check_dims(pi.len())?;
    if let Some((index, &value)) = pi.values().iter().enumerate().find(|(_, q)| !(**q > 0.0)) {
        return Err(Error::NonInteriorMeasure { index, value });
    }
    let mut m = vec![0.0; pi.len()];
    fitness_into(p, pi.values(), &mut m);
    let log_sum: f64 = pi.values().iter().map(|q| q.ln()).sum();
    Ok((p.mu() - 1.0) * log_sum + mean_of(pi.values(), &m))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simplex::Kernel;
    use proptest::prelude::*;

    fn one_d(mu: f64) -> FitnessParams {
        FitnessParams::one_dimensional(0.2, mu).unwrap()
    }

    fn start(n: u64) -> Population {
        Population::from_measure(&SimplexMeasure::new(vec![0.2, 0.6, 0.2]).unwrap(), n).unwrap()
    }

    #[test]
    fn single_site_is_constant() {
        let p = FitnessParams::new(vec![1.0], Kernel::Explicit(vec![1.0]), 0.1).unwrap();
        let init = Population::from_counts(0, vec![50]).unwrap();
        for mode in [Mode::Strong, Mode::Weak] {
            let traj = simulate(mode, &p, &init, 5.0, 1).unwrap();
            assert!(!traj.events.is_empty());
            assert!(traj.events.iter().all(|e| e.from == 0 && e.to == 0));
            assert_eq!(traj.final_measure().values(), &[1.0]);
        }
    }

    #[test]
    fn no_rates_means_no_events() {
        let p = FitnessParams::new(vec![1.0; 3], Kernel::Explicit(vec![0.0; 5]), 0.0).unwrap();
        let traj = simulate(Mode::Strong, &p, &start(100), 10.0, 3).unwrap();
        assert!(traj.events.is_empty());
    }

    #[test]
    fn seeded_runs_repeat() {
        let p = one_d(1.0 / 70.0);
        let a = simulate(Mode::Weak, &p, &start(60), 1.0, 42).unwrap();
        let b = simulate(Mode::Weak, &p, &start(60), 1.0, 42).unwrap();
        let c = simulate(Mode::Weak, &p, &start(60), 1.0, 43).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.events, c.events);
    }

    #[test]
    fn rounding_keeps_population_size() {
        let pi = SimplexMeasure::new(vec![1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0]).unwrap();
        let pop = Population::from_measure(&pi, 100).unwrap();
        assert_eq!(pop.size(), 100);
        assert_eq!(pop.counts().iter().max(), Some(&34));
        assert!(Population::from_counts(1, vec![1, 0, 0]).is_err());
    }

    #[test]
    fn selection_events_match_integrated_mean_fitness() {
        let p = one_d(1.0 / 70.0);
        let n = 400;
        let (mut observed, mut expected) = (0.0, 0.0);
        for seed in 0..10 {
            let traj = simulate(Mode::Strong, &p, &start(n), 5.0, seed).unwrap();
            observed += traj.count(Channel::Selection) as f64;
            let mut m = vec![0.0; 3];
            expected += n as f64
                * traj.time_integral(|pi| {
                    fitness_into(&p, pi, &mut m);
                    mean_of(pi, &m)
                });
        }
        assert!(
            (observed - expected).abs() < 3.0 * expected.sqrt(),
            "{observed} vs {expected}"
        );
    }

    #[test]
    fn quiet_window_has_zero_increments() {
        let p = FitnessParams::new(vec![1.0; 3], Kernel::Explicit(vec![0.0; 5]), 0.0).unwrap();
        let traj = simulate(Mode::Strong, &p, &start(100), 2.0, 0).unwrap();
        let qv = qv_estimate(&traj, &p, 0, 0, 0.1).unwrap();
        // No events, so the compensated martingale is frozen while the
        // predicted bracket only integrates pi_0 (1 - pi_0).
        assert!(qv.realized.iter().all(|v| *v == 0.0));
        assert!((qv.predicted.last().unwrap() - 2.0 * 0.6 * 0.4).abs() < 1e-12);
    }

    #[test]
    fn weak_covariation_matches_bracket() {
        let p = one_d(1.0 / 70.0);
        let traj = simulate(Mode::Weak, &p, &start(200), 5.0, 9).unwrap();
        for (x, y) in [(0, 0), (-1, 1), (1, 1)] {
            let qv = qv_estimate(&traj, &p, x, y, 0.01).unwrap();
            assert!(
                (qv.final_ratio() - 1.0).abs() < 0.1,
                "({x},{y}) ratio {}",
                qv.final_ratio()
            );
            if x != y {
                assert!(qv.predicted.windows(2).all(|w| w[1] <= w[0]));
            }
        }
    }

    #[test]
    fn density_is_flat_without_selection_at_unit_mutation() {
        let p = FitnessParams::new(vec![1.0; 3], Kernel::Explicit(vec![0.0; 5]), 1.0).unwrap();
        let pi = SimplexMeasure::new(vec![0.1, 0.3, 0.6]).unwrap();
        assert_eq!(ek_log_density(&pi, &p).unwrap(), 0.0);
        let edge = SimplexMeasure::new(vec![0.0, 0.4, 0.6]).unwrap();
        assert!(matches!(
            ek_log_density(&edge, &p),
            Err(Error::NonInteriorMeasure { index: 0, .. })
        ));
    }

    /// Long weak-mode run against the density integrated over a coarse
    /// triangular binning of the simplex. The diffusion limit of the
    /// resampling-plus-mutation generator carries the exponent `2 mu - 1`
    /// for per-target mutation rate `mu`, so the chain runs at half the
    /// density's mutation parameter.
    #[test]
    fn weak_stationary_histogram_matches_density() {
        let target = FitnessParams::one_dimensional(0.2, 1.5).unwrap();
        let sim = target.with_mu(0.75).unwrap();
        let n = 100;
        let bins = 5usize;
        let bin_of = |a: f64, c: f64| {
            let i = ((a * bins as f64) as usize).min(bins - 1);
            let j = ((c * bins as f64) as usize).min(bins - 1);
            (i, j)
        };

        let mut init = Population::from_counts(1, vec![33, 34, 33]).unwrap();
        let mut hist = vec![0.0; bins * bins];
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let burn = 20.0;
        let horizon = 3000.0;
        let sample_every = 0.25;
        let mut engine = MoranEngine::new(Mode::Weak, &sim, init.clone(), &mut rng).unwrap();
        while engine.next_event(burn).is_some() {}
        init = engine.population().clone();
        let mut engine = MoranEngine::new(Mode::Weak, &sim, init, &mut rng).unwrap();
        let mut next = sample_every;
        let mut samples = 0.0;
        while next <= horizon {
            while engine.next_event(next).is_some() {}
            let c = engine.population().counts();
            let (i, j) = bin_of(c[0] as f64 / n as f64, c[2] as f64 / n as f64);
            hist[i * bins + j] += 1.0;
            samples += 1.0;
            next += sample_every;
        }

        // Midpoint quadrature of exp(log density) on a fine grid.
        let fine = 400;
        let mut mass = vec![0.0; bins * bins];
        for a in 0..fine {
            for c in 0..fine {
                let (x, z) = ((a as f64 + 0.5) / fine as f64, (c as f64 + 0.5) / fine as f64);
                if x + z >= 1.0 {
                    continue;
                }
                let pi = SimplexMeasure::from_raw(vec![x, 1.0 - x - z, z]);
                let w = ek_log_density(&pi, &target).unwrap().exp();
                let (i, j) = bin_of(x, z);
                mass[i * bins + j] += w;
            }
        }
        let total: f64 = mass.iter().sum();
        let tv: f64 = hist
            .iter()
            .zip(&mass)
            .map(|(h, w)| (h / samples - w / total).abs())
            .sum::<f64>()
            / 2.0;
        assert!(tv < 0.05, "total variation {tv}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn events_move_one_particle(seed in any::<u64>(), weak in any::<bool>()) {
            let p = FitnessParams::symmetric_from_half(&[1.0, 0.7, 0.3], Kernel::Threshold { b: 0.3, m: 3 }, 0.02).unwrap();
            let init = Population::from_counts(2, vec![3, 10, 20, 10, 7]).unwrap();
            let mode = if weak { Mode::Weak } else { Mode::Strong };
            let traj = simulate(mode, &p, &init, 0.5, seed).unwrap();
            let mut pop = init.clone();
            let mut prev = pop.empirical();
            let mut last_t = 0.0;
            for e in &traj.events {
                prop_assert!(e.t >= last_t && e.t <= 0.5);
                last_t = e.t;
                pop.apply(e.from, e.to);
                prop_assert_eq!(pop.counts().iter().sum::<u64>(), 50);
                let now = pop.empirical();
                let d = now.sup_distance(&prev);
                if e.from == e.to {
                    prop_assert_eq!(d, 0.0);
                } else {
                    prop_assert!((d - 1.0 / 50.0).abs() < 1e-15);
                    let moved = now.values().iter().zip(prev.values()).filter(|(a, b)| a != b).count();
                    prop_assert_eq!(moved, 2);
                }
                prev = now;
            }
            if !weak {
                prop_assert_eq!(traj.count(Channel::Resampling), 0);
            }
        }

        #[test]
        fn density_ratio_depends_on_log_sum_and_mean_fitness(
            a in prop::collection::vec(0.01f64..1.0, 3),
            c in prop::collection::vec(0.01f64..1.0, 3),
            mu in 0.0f64..3.0,
        ) {
            let p = FitnessParams::one_dimensional(0.2, mu).unwrap();
            let pa = SimplexMeasure::from_weights(&a).unwrap();
            let pc = SimplexMeasure::from_weights(&c).unwrap();
            let diff = ek_log_density(&pa, &p).unwrap() - ek_log_density(&pc, &p).unwrap();
            let log_sum = |pi: &SimplexMeasure| pi.values().iter().map(|q| q.ln()).sum::<f64>();
            let mbar = |pi: &SimplexMeasure| crate::simplex::mean_fitness(pi, &p).unwrap();
            let expected = (mu - 1.0) * (log_sum(&pa) - log_sum(&pc)) + mbar(&pa) - mbar(&pc);
            prop_assert!((diff - expected).abs() < 1e-10);
        }
    }
}
