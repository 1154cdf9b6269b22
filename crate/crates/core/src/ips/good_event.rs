use std::collections::{BTreeSet, HashSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::events::{advance, EventKind, EventStream, GraphicalEventLog};
use super::{Floor, IpsParams, LatticeState, Stirring};
use crate::error::{Error, Result};
use crate::percolation::{evolve, PercGrid, WetFront};

/// Probability of no death at the six nests of three sites over a block of
/// length `block_t`.
pub fn no_death_probability(delta: f64, block_t: f64) -> f64 {
    (-6.0 * delta * block_t).exp()
}

/// Probability of the good event: no deaths at `x - 1, x, x + 1` and a
/// birth from the pair at `x` into each of the four nests at `x +- 1`.
pub fn good_event_probability(lambda: f64, delta: f64, block_t: f64) -> f64 {
    no_death_probability(delta, block_t) * (1.0 - (-lambda * block_t).exp()).powi(4)
}

/// Percolation marks built from a particle-system run, together with the
/// sets the comparison argument tracks.
#[derive(Debug, Clone, PartialEq)]
pub struct GoodEventField {
    pub grid: PercGrid,
    pub good_probability: f64,
    /// `V_n`: sites reached through good events from `X_0`.
    pub reached: Vec<BTreeSet<i64>>,
    /// `X_n`: sites holding both sexes at time `n T`.
    pub paired: Vec<BTreeSet<i64>>,
    pub state: LatticeState,
}

impl GoodEventField {
    /// Wet fronts of the field started from `X_0`.
    pub fn fronts(&self) -> Vec<WetFront> {
        let w0: Vec<i64> = self.paired[0].iter().copied().collect();
        evolve(&self.grid, &w0)
    }

    /// `W_n` within `V_n` within `X_n` at every level.
    pub fn dominated(&self) -> bool {
        self.fronts().iter().all(|f| {
            let n = f.n;
            f.wet.is_subset(&self.reached[n]) && self.reached[n].is_subset(&self.paired[n])
        })
    }
}

/// Runs the particle system in blocks of length `block_t` and marks each
/// sublattice site `(x, n)` of `[-w, w] x [0, levels]`: by the translated
/// good event when `x` is in `V_n`, and by an independent coin with the
/// same success probability otherwise.
pub fn good_event_field(
    params: &IpsParams,
    state0: &LatticeState,
    block_t: f64,
    half_width: usize,
    levels: usize,
    seed: u64,
) -> Result<GoodEventField> {
    let torus = state0.torus().clone();
    if torus.dims() != 1 || params.stirring != Stirring::None {
        return Err(Error::InvalidParams(
            "good events need a one-dimensional run without stirring".into(),
        ));
    }
    if !(block_t > 0.0 && block_t.is_finite()) {
        return Err(Error::InvalidParams(format!(
            "block length must be positive, got {block_t}"
        )));
    }
    let offsets = params.neighborhood.offsets();
    if !offsets.contains(&vec![1]) || !offsets.contains(&vec![-1]) {
        return Err(Error::InvalidParams(
            "good events need nearest neighbors in the neighborhood".into(),
        ));
    }
    if torus.len() < 2 * half_width + 3 {
        return Err(Error::InvalidParams(format!(
            "torus of {} sites is too small for half-width {half_width}",
            torus.len()
        )));
    }

    let w = half_width as i64;
    let site = |x: i64| torus.site(&[x]);
    let horizon = (levels + 1) as f64 * block_t;
    let stream = EventStream::from_rng(&torus, params, params.lambda, ChaCha8Rng::seed_from_u64(seed))?;
    let log = GraphicalEventLog::from_stream(stream, params, params.lambda, horizon)?;
    let mut coins = ChaCha8Rng::seed_from_u64(seed);
    coins.set_stream(1);
    let good_probability = good_event_probability(params.lambda, params.delta, block_t);

    let mut state = LatticeState {
        time: 0.0,
        ..state0.clone()
    };
    let lattice = |n: usize| (-w..=w).filter(move |x| (x + n as i64).rem_euclid(2) == 0);
    let mut paired = Vec::with_capacity(levels + 1);
    let mut reached: Vec<BTreeSet<i64>> = Vec::with_capacity(levels + 1);
    let mut omega: Vec<BTreeSet<i64>> = Vec::with_capacity(levels + 1);
    for n in 0..=levels {
        let start = n as f64 * block_t;
        advance(&mut state, params, &log, start)?;
        let x_n: BTreeSet<i64> = lattice(n)
            .filter(|&x| {
                let (m, f) = state.get(site(x));
                m && f
            })
            .collect();
        let v_n = if n == 0 {
            x_n.clone()
        } else {
            let (prev_v, prev_w) = (&reached[n - 1], &omega[n - 1]);
            lattice(n)
                .filter(|y| [y - 1, y + 1].iter().any(|z| prev_v.contains(z) && prev_w.contains(z)))
                .collect()
        };

        let mut deaths = HashSet::new();
        let mut births = HashSet::new();
        for e in log.window(start, start + block_t) {
            match e.kind {
                EventKind::Death { site, .. } => {
                    deaths.insert(site);
                }
                EventKind::Birth {
                    site,
                    floor,
                    male_parent,
                    female_parent,
                    ..
                } if male_parent == female_parent => {
                    births.insert((site, floor, male_parent));
                }
                _ => {}
            }
        }
        let good = |x: i64| {
            [x - 1, x, x + 1].iter().all(|&s| !deaths.contains(&site(s)))
                && [x - 1, x + 1].iter().all(|&s| {
                    [Floor::Male, Floor::Female]
                        .iter()
                        .all(|&f| births.contains(&(site(s), f, site(x))))
                })
        };
        let open: BTreeSet<i64> = lattice(n)
            .filter(|x| {
                let coin = coins.random::<f64>() < good_probability;
                if v_n.contains(x) {
                    good(*x)
                } else {
                    coin
                }
            })
            .collect();
        paired.push(x_n);
        reached.push(v_n);
        omega.push(open);
    }
    advance(&mut state, params, &log, horizon)?;

    let grid = PercGrid::from_fn(half_width, levels, 1.0 - good_probability, 2, |x, n| {
        omega[n].contains(&x)
    })?;
    Ok(GoodEventField {
        grid,
        good_probability,
        reached,
        paired,
        state,
    })
}

#[cfg(test)]
mod tests {
    use super::super::{BirthRule, Neighborhood, Torus};
    use super::*;

    fn params(lambda: f64, delta: f64) -> IpsParams {
        IpsParams::new(lambda, delta, BirthRule::PairedAnywhere, Neighborhood::nearest(1)).unwrap()
    }

    #[test]
    fn closed_form_probabilities() {
        assert_eq!(good_event_probability(0.0, 0.7, 1.3), 0.0);
        assert!((no_death_probability(0.5, 0.4) - (-1.2f64).exp()).abs() < 1e-15);
        assert!((good_event_probability(50.0, 0.0, 1.0) - (1.0 - (-50.0f64).exp()).powi(4)).abs() < 1e-15);
        assert!(good_event_probability(50.0, 0.0, 1.0) > 0.99);
    }

    #[test]
    fn frequency_of_good_events_matches_formula() {
        let torus = Torus::line(41).unwrap();
        let p = params(2.0, 0.3);
        let t = 0.5;
        let expected = good_event_probability(2.0, 0.3, t);
        let (mut hits, mut total) = (0usize, 0usize);
        for seed in 0..200 {
            let f = good_event_field(&p, &LatticeState::full(torus.clone()), t, 9, 0, seed).unwrap();
            for x in f.grid.lattice_sites(0) {
                total += 1;
                hits += usize::from(f.grid.is_open(x, 0));
            }
        }
        let freq = hits as f64 / total as f64;
        // Neighboring blocks overlap, so allow for positive correlation.
        let sigma = (expected * (1.0 - expected) / total as f64).sqrt();
        assert!((freq - expected).abs() < 6.0 * sigma, "{freq} vs {expected}");
    }

    #[test]
    fn fronts_are_dominated_by_paired_sites() {
        let torus = Torus::line(61).unwrap();
        let p = params(3.0, 0.2);
        for seed in 0..20 {
            let f = good_event_field(&p, &LatticeState::full(torus.clone()), 0.5, 20, 12, seed).unwrap();
            assert!(f.dominated());
            assert_eq!(f.grid.dependence(), 2);
        }
    }

    #[test]
    fn disjoint_levels_are_uncorrelated() {
        let torus = Torus::line(31).unwrap();
        let p = params(1.5, 0.3);
        let runs = 400;
        let (mut a, mut b, mut ab) = (0.0, 0.0, 0.0);
        for seed in 0..runs {
            let f = good_event_field(&p, &LatticeState::full(torus.clone()), 0.7, 10, 2, seed).unwrap();
            let (x, y) = (
                f64::from(u8::from(f.grid.is_open(0, 0))),
                f64::from(u8::from(f.grid.is_open(0, 2))),
            );
            a += x;
            b += y;
            ab += x * y;
        }
        let n = runs as f64;
        let cov = ab / n - (a / n) * (b / n);
        let sd = ((a / n) * (1.0 - a / n) * (b / n) * (1.0 - b / n)).sqrt();
        assert!((cov / sd).abs() < 3.0 / n.sqrt(), "correlation {}", cov / sd);
    }

    #[test]
    fn rejects_stirring_and_small_torus() {
        let p = params(1.0, 1.0)
            .with_stirring(Stirring::LilyPad { epsilon: 0.5 })
            .unwrap();
        let s = LatticeState::full(Torus::line(21).unwrap());
        assert!(good_event_field(&p, &s, 1.0, 5, 2, 0).is_err());
        assert!(good_event_field(&params(1.0, 1.0), &s, 1.0, 10, 2, 0).is_err());
    }
}
