use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};

use super::{Floor, IpsParams, Stirring, Torus};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct DualStats {
    /// Particles in the cloud at the end, counted with multiplicity.
    pub size: usize,
    /// Particles born onto an occupied nest, or descended from one.
    pub fictitious: usize,
    /// Branchings that happened while another particle sat in the
    /// branching particle's neighborhood.
    pub collisions: u64,
    pub branchings: u64,
}

impl DualStats {
    pub fn real(&self) -> usize {
        self.size - self.fictitious
    }

    pub fn collided(&self) -> bool {
        self.collisions > 0
    }
}

#[derive(Debug, Clone, Copy)]
struct Particle {
    site: usize,
    floor: Floor,
    fictitious: bool,
}

fn bump<K: std::hash::Hash + Eq>(map: &mut HashMap<K, u32>, key: K, up: bool) {
    if up {
        *map.entry(key).or_insert(0) += 1;
    } else if let Some(c) = map.get_mut(&key) {
        *c -= 1;
        if *c == 0 {
            map.remove(&key);
        }
    }
}

/// Simulates the influence set of one nest backwards over a time span `t`
/// under individual stirring. Each particle branches at rate `c*`, adding
/// one particle on every other nest the flip rule reads (`2|N| - 1` in
/// all), and jumps to each neighboring site on its own floor at rate
/// `epsilon^-2`. Particles move independently, so coinciding particles
/// are kept separately and marked fictitious.
///
/// Fails with `CloudExplosion` once the cloud exceeds `max_size`.
pub fn dual_influence(
    torus: &Torus,
    params: &IpsParams,
    start: (usize, Floor),
    t: f64,
    seed: u64,
    max_size: usize,
) -> Result<DualStats> {
    params.check_torus(torus)?;
    let Stirring::Individual { .. } = params.stirring else {
        return Err(Error::InvalidParams("the dual cloud needs individual stirring".into()));
    };
    if start.0 >= torus.len() {
        return Err(Error::InvalidParams(format!("start site {} is off the torus", start.0)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let branch = params.c_star();
    let jump = params.stirring.rate() * 2.0 * torus.dims() as f64;
    let per_particle = branch + jump;
    let offsets = params.neighborhood.offsets();

    let mut particles = vec![Particle {
        site: start.0,
        floor: start.1,
        fictitious: false,
    }];
    let mut by_site: HashMap<usize, u32> = HashMap::from([(start.0, 1)]);
    let mut by_nest: HashMap<(usize, Floor), u32> = HashMap::from([(start, 1)]);
    let mut stats = DualStats::default();
    let mut clock = 0.0;

    while per_particle > 0.0 && clock <= t {
        let wait: f64 = Exp1.sample(&mut rng);
        clock += wait / (per_particle * particles.len() as f64);
        if clock > t {
            break;
        }
        let j = rng.random_range(0..particles.len());
        let p = particles[j];
        if rng.random::<f64>() * per_particle < branch {
            stats.branchings += 1;
            let crowd: u32 = offsets
                .iter()
                .map(|o| by_site.get(&torus.shift(p.site, o)).copied().unwrap_or(0))
                .sum();
            if crowd > 1 {
                stats.collisions += 1;
            }
            for o in offsets {
                let site = torus.shift(p.site, o);
                for floor in [Floor::Male, Floor::Female] {
                    if site == p.site && floor == p.floor {
                        continue;
                    }
                    let fictitious = p.fictitious || by_nest.contains_key(&(site, floor));
                    particles.push(Particle {
                        site,
                        floor,
                        fictitious,
                    });
                    bump(&mut by_site, site, true);
                    bump(&mut by_nest, (site, floor), true);
                }
            }
            if particles.len() > max_size {
                return Err(Error::CloudExplosion {
                    limit: max_size,
                    t: clock,
                });
            }
        } else {
            let axis = rng.random_range(0..torus.dims());
            let mut offset = vec![0; torus.dims()];
            offset[axis] = if rng.random::<bool>() { 1 } else { -1 };
            let site = torus.shift(p.site, &offset);
            bump(&mut by_site, p.site, false);
            bump(&mut by_nest, (p.site, p.floor), false);
            bump(&mut by_site, site, true);
            bump(&mut by_nest, (site, p.floor), true);
            particles[j].site = site;
        }
    }
    stats.size = particles.len();
    stats.fictitious = particles.iter().filter(|p| p.fictitious).count();
    Ok(stats)
}

#[cfg(test)]
mod tests {
    use super::super::{BirthRule, Neighborhood};
    use super::*;

    fn params(lambda: f64, delta: f64, epsilon: f64) -> IpsParams {
        IpsParams::new(lambda, delta, BirthRule::SameSite, Neighborhood::nearest(1))
            .unwrap()
            .with_stirring(Stirring::Individual { epsilon })
            .unwrap()
    }

    #[test]
    fn no_branching_means_a_lone_walker() {
        let torus = Torus::line(1001).unwrap();
        let s = dual_influence(&torus, &params(0.0, 0.0, 0.3), (500, Floor::Male), 2.0, 4, 10).unwrap();
        assert_eq!(
            s,
            DualStats {
                size: 1,
                ..DualStats::default()
            }
        );
    }

    #[test]
    fn each_branching_adds_the_rule_arity() {
        let torus = Torus::line(10_001).unwrap();
        let p = params(0.1, 0.2, 0.5);
        for seed in 0..20 {
            let s = dual_influence(&torus, &p, (0, Floor::Female), 1.0, seed, 100_000).unwrap();
            assert_eq!(s.size as u64, 1 + 5 * s.branchings);
            assert!(s.collisions <= s.branchings);
        }
    }

    #[test]
    fn mean_size_grows_exponentially() {
        let torus = Torus::line(100_001).unwrap();
        let p = params(0.1, 0.2, 0.5);
        let runs = 2000;
        let sizes: Vec<f64> = (0..runs)
            .map(|seed| {
                dual_influence(&torus, &p, (0, Floor::Male), 1.0, seed, 1_000_000)
                    .unwrap()
                    .size as f64
            })
            .collect();
        let mean = sizes.iter().sum::<f64>() / runs as f64;
        let var = sizes.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (runs - 1) as f64;
        let expected = (p.c_star() * 5.0).exp();
        assert!(
            (mean - expected).abs() < 3.0 * (var / runs as f64).sqrt(),
            "{mean} vs {expected}"
        );
    }

    #[test]
    fn explosion_guard_and_mode_check() {
        let torus = Torus::line(101).unwrap();
        let err = dual_influence(&torus, &params(1.0, 1.0, 0.5), (0, Floor::Male), 5.0, 0, 50).unwrap_err();
        assert!(matches!(err, Error::CloudExplosion { limit: 50, .. }));
        let lily = IpsParams::new(0.1, 0.1, BirthRule::SameSite, Neighborhood::nearest(1))
            .unwrap()
            .with_stirring(Stirring::LilyPad { epsilon: 0.5 })
            .unwrap();
        assert!(dual_influence(&torus, &lily, (0, Floor::Male), 1.0, 0, 50).is_err());
    }
}
