use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};

use super::{BirthRule, Floor, IpsParams, LatticeState, Stirring, Torus};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EventKind {
    Death {
        site: usize,
        floor: Floor,
    },
    /// Birth attempt into `(site, floor)` from the male at `male_parent`
    /// and the female at `female_parent`; it fires when the acceptance mark
    /// passes and the parents are present.
    Birth {
        site: usize,
        floor: Floor,
        male_parent: usize,
        female_parent: usize,
        mark: f64,
    },
    SwapSites {
        a: usize,
        b: usize,
    },
    SwapNests {
        a: usize,
        b: usize,
        floor: Floor,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GraphicalEvent {
    pub t: f64,
    pub kind: EventKind,
}

impl GraphicalEvent {
    /// Sites whose state the event can change.
    fn touched(&self) -> [usize; 2] {
        match self.kind {
            EventKind::Death { site, .. } | EventKind::Birth { site, .. } => [site, site],
            EventKind::SwapSites { a, b } | EventKind::SwapNests { a, b, .. } => [a, b],
        }
    }
}

/// Applies one event; returns the floor and sign of any particle-count
/// change.
fn apply(state: &mut LatticeState, kind: &EventKind, accept: f64) -> Option<(Floor, bool)> {
    match *kind {
        EventKind::Death { site, floor } => {
            let was = state.nest(site, floor);
            state.set(site, floor, false);
            was.then_some((floor, false))
        }
        EventKind::Birth {
            site,
            floor,
            male_parent,
            female_parent,
            mark,
        } => {
            let fires = mark <= accept
                && !state.nest(site, floor)
                && state.nest(male_parent, Floor::Male)
                && state.nest(female_parent, Floor::Female);
            if fires {
                state.set(site, floor, true);
            }
            fires.then_some((floor, true))
        }
        EventKind::SwapSites { a, b } => {
            state.nests.swap(a, b);
            None
        }
        EventKind::SwapNests { a, b, floor } => {
            let (x, y) = (state.nest(a, floor), state.nest(b, floor));
            state.set(a, floor, y);
            state.set(b, floor, x);
            None
        }
    }
}

fn acceptance(lambda: f64, lambda_ref: f64) -> Result<f64> {
    if lambda > lambda_ref * (1.0 + 1e-12) {
        return Err(Error::InvalidParams(format!(
            "birth rate {lambda} exceeds the log's reference rate {lambda_ref}"
        )));
    }
    Ok(if lambda_ref > 0.0 { lambda / lambda_ref } else { 0.0 })
}

/// Poisson arrivals of every channel of the graphical construction,
/// superposed and generated lazily in time order. Birth channels run at
/// `lambda_ref` per parent channel and carry uniform marks, so any
/// `lambda <= lambda_ref` is obtained by thinning.
pub struct EventStream {
    torus: Torus,
    rule: BirthRule,
    stirring: Stirring,
    neighbors: Vec<usize>,
    width: usize,
    rng: ChaCha8Rng,
    t: f64,
    death_rate: f64,
    birth_rate: f64,
    total: f64,
}

impl EventStream {
    pub fn new(torus: &Torus, params: &IpsParams, lambda_ref: f64, seed: u64) -> Result<Self> {
        Self::from_rng(torus, params, lambda_ref, ChaCha8Rng::seed_from_u64(seed))
    }

    pub fn from_rng(torus: &Torus, params: &IpsParams, lambda_ref: f64, rng: ChaCha8Rng) -> Result<Self> {
        params.check_torus(torus)?;
        acceptance(params.lambda, lambda_ref)?;
        let width = params.neighborhood.len();
        let neighbors = (0..torus.len())
            .flat_map(|s| params.neighborhood.offsets().iter().map(move |o| torus.shift(s, o)))
            .collect();
        let nests = 2.0 * torus.len() as f64;
        let death_rate = params.delta * nests;
        let birth_rate = lambda_ref * params.parent_channels() as f64 * nests;
        let floors = match params.stirring {
            Stirring::None => 0.0,
            Stirring::LilyPad { .. } => 1.0,
            Stirring::Individual { .. } => 2.0,
        };
        let stir_rate = params.stirring.rate() * floors * (torus.len() * torus.dims()) as f64;
        Ok(Self {
            torus: torus.clone(),
            rule: params.rule,
            stirring: params.stirring,
            neighbors,
            width,
            rng,
            t: 0.0,
            death_rate,
            birth_rate,
            total: death_rate + birth_rate + stir_rate,
        })
    }

    pub fn total_rate(&self) -> f64 {
        self.total
    }
}

impl Iterator for EventStream {
    type Item = GraphicalEvent;

    fn next(&mut self) -> Option<GraphicalEvent> {
        if !(self.total > 0.0) {
            return None;
        }
        let wait: f64 = Exp1.sample(&mut self.rng);
        self.t += wait / self.total;
        let n = self.torus.len();
        let u = self.rng.random::<f64>() * self.total;
        let kind = if u < self.death_rate {
            let nest = self.rng.random_range(0..2 * n);
            EventKind::Death {
                site: nest / 2,
                floor: Floor::from_index(nest % 2),
            }
        } else if u < self.death_rate + self.birth_rate {
            let nest = self.rng.random_range(0..2 * n);
            let site = nest / 2;
            let row = &self.neighbors[site * self.width..(site + 1) * self.width];
            let male = row[self.rng.random_range(0..self.width)];
            let female = match self.rule {
                BirthRule::PairedAnywhere => row[self.rng.random_range(0..self.width)],
                BirthRule::SameSite => male,
            };
            EventKind::Birth {
                site,
                floor: Floor::from_index(nest % 2),
                male_parent: male,
                female_parent: female,
                mark: self.rng.random::<f64>(),
            }
        } else {
            let edge = self.rng.random_range(0..n * self.torus.dims());
            let a = edge / self.torus.dims();
            let b = self.torus.step(a, edge % self.torus.dims());
            match self.stirring {
                Stirring::Individual { .. } => EventKind::SwapNests {
                    a,
                    b,
                    floor: Floor::from_index(self.rng.random_range(0..2)),
                },
                _ => EventKind::SwapSites { a, b },
            }
        };
        Some(GraphicalEvent { t: self.t, kind })
    }
}

/// A materialized event stream shared by coupled trajectories.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphicalEventLog {
    pub torus: Torus,
    /// Generation parameters, with `lambda` equal to the reference rate.
    pub params: IpsParams,
    pub t_end: f64,
    pub events: Vec<GraphicalEvent>,
}

impl GraphicalEventLog {
    pub fn generate(torus: &Torus, params: &IpsParams, t_end: f64, seed: u64) -> Result<Self> {
        Self::generate_with_reference(torus, params, params.lambda, t_end, seed)
    }

    pub fn generate_with_reference(
        torus: &Torus,
        params: &IpsParams,
        lambda_ref: f64,
        t_end: f64,
        seed: u64,
    ) -> Result<Self> {
        Self::from_stream(
            EventStream::new(torus, params, lambda_ref, seed)?,
            params,
            lambda_ref,
            t_end,
        )
    }

    pub fn from_stream(stream: EventStream, params: &IpsParams, lambda_ref: f64, t_end: f64) -> Result<Self> {
        if !(t_end >= 0.0 && t_end.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "horizon must be finite and non-negative, got {t_end}"
            )));
        }
        let torus = stream.torus.clone();
        let events = stream.take_while(|e| e.t <= t_end).collect();
        Ok(Self {
            torus,
            params: IpsParams {
                lambda: lambda_ref,
                ..params.clone()
            },
            t_end,
            events,
        })
    }

    /// Events in `(from, to]`.
    pub fn window(&self, from: f64, to: f64) -> &[GraphicalEvent] {
        let lo = self.events.partition_point(|e| e.t <= from);
        let hi = self.events.partition_point(|e| e.t <= to);
        &self.events[lo..hi]
    }

    fn check(&self, state: &LatticeState, lambda: f64, until: f64) -> Result<f64> {
        if state.torus() != &self.torus {
            return Err(Error::InvalidParams("state and log live on different tori".into()));
        }
        if !(until >= state.time() && until <= self.t_end) {
            return Err(Error::InvalidParams(format!(
                "cannot advance from {} to {until} with a log ending at {}",
                state.time(),
                self.t_end
            )));
        }
        acceptance(lambda, self.params.lambda)
    }

    fn check_params(&self, params: &IpsParams) -> Result<()> {
        let log = &self.params;
        if params.rule != log.rule
            || params.neighborhood != log.neighborhood
            || params.stirring != log.stirring
            || params.delta != log.delta
        {
            return Err(Error::InvalidParams(
                "parameters differ from the log's in something other than the birth rate".into(),
            ));
        }
        Ok(())
    }
}

/// Applies the log's events in `(state.time, until]`.
pub fn advance(state: &mut LatticeState, params: &IpsParams, log: &GraphicalEventLog, until: f64) -> Result<()> {
    log.check_params(params)?;
    let accept = log.check(state, params.lambda, until)?;
    for e in log.window(state.time, until) {
        apply(state, &e.kind, accept);
    }
    state.time = until;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub state: LatticeState,
    /// First time one sex had disappeared, if it happened by the horizon.
    pub t_dead: Option<f64>,
    pub events: u64,
}

/// Runs from `state0` on a fresh stream until `until`, or until one sex
/// dies out when `stop_when_dead` is set.
pub fn run(
    state0: &LatticeState,
    params: &IpsParams,
    until: f64,
    seed: u64,
    stop_when_dead: bool,
) -> Result<RunOutcome> {
    let stream = EventStream::new(state0.torus(), params, params.lambda, seed)?;
    run_stream(state0, stream, until, stop_when_dead)
}

pub(crate) fn run_stream(
    state0: &LatticeState,
    stream: EventStream,
    until: f64,
    stop_when_dead: bool,
) -> Result<RunOutcome> {
    let mut state = state0.clone();
    let mut counts = [state.floor_count(Floor::Male), state.floor_count(Floor::Female)];
    let mut t_dead = state.is_dead().then_some(state.time);
    let mut events = 0;
    let start = state.time;
    for e in stream {
        let t = start + e.t;
        if t > until || (stop_when_dead && t_dead.is_some()) {
            break;
        }
        events += 1;
        if let Some((floor, born)) = apply(&mut state, &e.kind, 1.0) {
            let c = &mut counts[floor.index()];
            if born {
                *c += 1;
            } else {
                *c -= 1;
                if *c == 0 && t_dead.is_none() {
                    t_dead = Some(t);
                }
            }
        }
    }
    state.time = if stop_when_dead {
        t_dead.map_or(until, |t| t.min(until))
    } else {
        until
    };
    Ok(RunOutcome { state, t_dead, events })
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CouplingReport {
    /// Pairwise site comparisons made after events.
    pub checks: u64,
    pub violations: u64,
    /// `(time, pair index, site)` of the first violation.
    pub first_violation: Option<(f64, usize, usize)>,
}

/// Advances an ordered chain of states with one shared log, checking the
/// order on every touched site after every event.
pub fn coupled_advance(
    states: &mut [LatticeState],
    params: &IpsParams,
    log: &GraphicalEventLog,
    until: f64,
) -> Result<CouplingReport> {
    let lambdas = vec![params.lambda; states.len()];
    log.check_params(params)?;
    coupled_advance_rates(states, &lambdas, log, until)
}

/// As `coupled_advance` with a birth rate per state; rates must be
/// non-decreasing along the chain, so that ordering is preserved by
/// thinning the shared birth marks.
pub fn coupled_advance_rates(
    states: &mut [LatticeState],
    lambdas: &[f64],
    log: &GraphicalEventLog,
    until: f64,
) -> Result<CouplingReport> {
    if states.len() != lambdas.len() {
        return Err(Error::DimensionMismatch {
            expected: states.len(),
            got: lambdas.len(),
        });
    }
    if lambdas.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidParams(
            "birth rates must be non-decreasing along the chain".into(),
        ));
    }
    let Some(first) = states.first() else {
        return Ok(CouplingReport::default());
    };
    let start = first.time;
    let mut accepts = Vec::with_capacity(states.len());
    for (s, &lambda) in states.iter().zip(lambdas) {
        if s.time != start {
            return Err(Error::InvalidParams("coupled states must share their time".into()));
        }
        accepts.push(log.check(s, lambda, until)?);
    }
    for index in 0..states.len().saturating_sub(1) {
        if !states[index].le(&states[index + 1]) {
            return Err(Error::UnorderedInputs { index });
        }
    }

    let mut report = CouplingReport::default();
    for e in log.window(start, until) {
        for (s, &accept) in states.iter_mut().zip(&accepts) {
            apply(s, &e.kind, accept);
        }
        for pair in 0..states.len().saturating_sub(1) {
            for site in e.touched() {
                report.checks += 1;
                if !states[pair].site_le(&states[pair + 1], site) {
                    report.violations += 1;
                    report.first_violation.get_or_insert((e.t, pair, site));
                }
            }
        }
    }
    for s in states.iter_mut() {
        s.time = until;
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::super::{observe, Neighborhood, Window};
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn line_params(lambda: f64, delta: f64, rule: BirthRule) -> IpsParams {
        IpsParams::new(lambda, delta, rule, Neighborhood::nearest(1)).unwrap()
    }

    #[test]
    fn pure_death_occupancy_decays_exponentially() {
        let torus = Torus::line(100).unwrap();
        let p = line_params(0.0, 1.0, BirthRule::PairedAnywhere);
        let fractions: Vec<f64> = (0..200)
            .map(|seed| {
                let out = run(&LatticeState::full(torus.clone()), &p, 1.0, seed, false).unwrap();
                out.state.particles() as f64 / 200.0
            })
            .collect();
        let mean = fractions.iter().sum::<f64>() / 200.0;
        let e = (-1.0f64).exp();
        let sigma = (e * (1.0 - e) / (200.0 * 200.0)).sqrt();
        assert!((mean - e).abs() < 3.0 * sigma, "{mean}");
    }

    #[test]
    fn absorbing_states() {
        let torus = Torus::line(30).unwrap();
        let p = line_params(2.0, 0.0, BirthRule::PairedAnywhere)
            .with_stirring(Stirring::LilyPad { epsilon: 0.5 })
            .unwrap();
        let full = run(&LatticeState::full(torus.clone()), &p, 5.0, 1, false).unwrap();
        assert_eq!(
            full.state,
            LatticeState {
                time: 5.0,
                ..LatticeState::full(torus.clone())
            }
        );
        let p = line_params(2.0, 1.0, BirthRule::SameSite);
        let empty = run(&LatticeState::empty(torus.clone()), &p, 5.0, 1, false).unwrap();
        assert_eq!(empty.state.particles(), 0);
        assert_eq!(empty.t_dead, Some(0.0));
    }

    #[test]
    fn replay_is_deterministic() {
        let torus = Torus::line(40).unwrap();
        let p = line_params(0.8, 1.0, BirthRule::PairedAnywhere)
            .with_stirring(Stirring::Individual { epsilon: 0.7 })
            .unwrap();
        let log = GraphicalEventLog::generate(&torus, &p, 3.0, 9).unwrap();
        assert_eq!(log, GraphicalEventLog::generate(&torus, &p, 3.0, 9).unwrap());
        let mut a = LatticeState::full(torus.clone());
        let mut b = a.clone();
        advance(&mut a, &p, &log, 3.0).unwrap();
        advance(&mut b, &p, &log, 1.0).unwrap();
        advance(&mut b, &p, &log, 3.0).unwrap();
        assert_eq!(a, b);
        let lazy = run(&LatticeState::full(torus), &p, 3.0, 9, false).unwrap();
        assert_eq!(lazy.state, a);
    }

    #[test]
    fn subcritical_pair_dies_out() {
        let torus = Torus::line(201).unwrap();
        let p = line_params(0.05, 1.0, BirthRule::PairedAnywhere);
        let dead = (0..50)
            .filter(|&seed| {
                let out = run(&LatticeState::single_pair(torus.clone(), 100), &p, 200.0, seed, true).unwrap();
                !observe(&out.state, &Window::full(&torus)).unwrap().survival
            })
            .count();
        assert_eq!(dead, 50);
    }

    #[test]
    fn rejections() {
        let torus = Torus::line(10).unwrap();
        let p = line_params(1.0, 1.0, BirthRule::SameSite);
        let log = GraphicalEventLog::generate(&torus, &p, 1.0, 0).unwrap();
        let mut states = vec![LatticeState::full(torus.clone()), LatticeState::empty(torus.clone())];
        assert!(matches!(
            coupled_advance(&mut states, &p, &log, 1.0),
            Err(Error::UnorderedInputs { index: 0 })
        ));
        let faster = IpsParams {
            lambda: 2.0,
            ..p.clone()
        };
        let mut s = LatticeState::full(torus.clone());
        assert!(advance(&mut s, &faster, &log, 1.0).is_err());
        assert!(advance(&mut s, &p, &log, 2.0).is_err());
        let other = IpsParams {
            rule: BirthRule::PairedAnywhere,
            ..p
        };
        assert!(advance(&mut s, &other, &log, 1.0).is_err());
    }

    fn random_pair(torus: &Torus, seed: u64) -> (LatticeState, LatticeState) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let upper = LatticeState::from_fn(torus.clone(), |_| (rng.random_bool(0.6), rng.random_bool(0.6)));
        let lower = LatticeState::from_fn(torus.clone(), |s| {
            let (m, w) = upper.get(s);
            (m && rng.random_bool(0.5), w && rng.random_bool(0.5))
        });
        (lower, upper)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn coupling_preserves_order(seed in any::<u64>(), lily in any::<bool>(), same_site in any::<bool>()) {
            let torus = Torus::line(30).unwrap();
            let rule = if same_site { BirthRule::SameSite } else { BirthRule::PairedAnywhere };
            let stirring = if lily { Stirring::LilyPad { epsilon: 0.5 } } else { Stirring::Individual { epsilon: 0.5 } };
            let p = line_params(0.7, 1.0, rule).with_stirring(stirring).unwrap();
            let log = GraphicalEventLog::generate(&torus, &p, 5.0, seed).unwrap();
            let (lo, hi) = random_pair(&torus, seed ^ 1);
            let mut states = vec![LatticeState::empty(torus.clone()), lo, hi, LatticeState::full(torus.clone())];
            let report = coupled_advance(&mut states, &p, &log, 5.0).unwrap();
            prop_assert_eq!(report.violations, 0);
            for w in states.windows(2) {
                prop_assert!(w[0].le(&w[1]));
            }
        }

        #[test]
        fn faster_births_dominate(seed in any::<u64>()) {
            let torus = Torus::line(30).unwrap();
            let p = line_params(0.9, 1.0, BirthRule::PairedAnywhere);
            let log = GraphicalEventLog::generate(&torus, &p, 5.0, seed).unwrap();
            let mut states = vec![LatticeState::full(torus.clone()); 3];
            let report = coupled_advance_rates(&mut states, &[0.2, 0.5, 0.9], &log, 5.0).unwrap();
            prop_assert_eq!(report.violations, 0);
        }

        #[test]
        fn stirring_conserves_particles(seed in any::<u64>(), lily in any::<bool>()) {
            let torus = Torus::new(vec![6, 5]).unwrap();
            let stirring = if lily { Stirring::LilyPad { epsilon: 0.3 } } else { Stirring::Individual { epsilon: 0.3 } };
            let p = IpsParams::new(0.0, 0.0, BirthRule::SameSite, Neighborhood::nearest(2)).unwrap()
                .with_stirring(stirring).unwrap();
            let (_, start) = random_pair(&torus, seed);
            let out = run(&start, &p, 1.0, seed, false).unwrap();
            prop_assert!(out.events > 0);
            prop_assert_eq!(out.state.floor_count(Floor::Male), start.floor_count(Floor::Male));
            prop_assert_eq!(out.state.floor_count(Floor::Female), start.floor_count(Floor::Female));
            if lily {
                let mut a: Vec<_> = (0..torus.len()).map(|s| start.get(s)).collect();
                let mut b: Vec<_> = (0..torus.len()).map(|s| out.state.get(s)).collect();
                a.sort();
                b.sort();
                prop_assert_eq!(a, b);
            }
        }
    }
}
