use super::heat::{fd_heat_apply, HeatKernel};
use super::{Field, ReactionSpec, REGION_TOL};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Diffusion {
    /// Convolution with the sampled heat kernel.
    #[default]
    Kernel,
    /// One explicit finite-difference step per splitting step.
    ExplicitFd,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrotterOptions {
    /// Splitting step.
    pub s: f64,
    /// RK4 steps per reaction sub-flow.
    pub reaction_substeps: usize,
    /// Keep every `record_every`-th field; the first and last are always kept.
    pub record_every: usize,
    pub diffusion: Diffusion,
}

impl TrotterOptions {
    pub fn new(s: f64) -> Self {
        Self {
            s,
            reaction_substeps: 1,
            record_every: usize::MAX,
            diffusion: Diffusion::Kernel,
        }
    }

    pub fn record_every(self, record_every: usize) -> Self {
        Self { record_every, ..self }
    }

    pub fn reaction_substeps(self, reaction_substeps: usize) -> Self {
        Self {
            reaction_substeps,
            ..self
        }
    }

    pub fn diffusion(self, diffusion: Diffusion) -> Self {
        Self { diffusion, ..self }
    }

    fn steps(&self, t_end: f64) -> Result<(usize, f64)> {
        if !(self.s > 0.0 && self.s.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "splitting step must be positive, got {}",
                self.s
            )));
        }
        if !(t_end >= 0.0 && t_end.is_finite()) {
            return Err(Error::InvalidParams(format!("bad horizon {t_end}")));
        }
        if self.reaction_substeps == 0 || self.record_every == 0 {
            return Err(Error::InvalidParams(
                "substep and record counts must be positive".into(),
            ));
        }
        let n = (t_end / self.s).round().max(1.0) as usize;
        Ok((n, t_end / n as f64))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PdeTrajectory {
    pub spec: ReactionSpec,
    pub frames: Vec<Field>,
}

impl PdeTrajectory {
    pub fn last(&self) -> &Field {
        self.frames
            .last()
            .expect("a trajectory holds at least its initial field")
    }
}

fn rk4_point(spec: &ReactionSpec, p: &mut [f64], dt: f64, steps: usize) {
    let n = p.len();
    let mut k = [[0.0; 4]; 4];
    let mut tmp = [0.0; 4];
    let h = dt / steps as f64;
    for _ in 0..steps {
        spec.rate(p, &mut k[0][..n]);
        for stage in 1..4 {
            let scale = if stage == 3 { h } else { h / 2.0 };
            for j in 0..n {
                tmp[j] = p[j] + scale * k[stage - 1][j];
            }
            let (_, rest) = k.split_at_mut(stage);
            spec.rate(&tmp[..n], &mut rest[0][..n]);
        }
        for j in 0..n {
            p[j] += h / 6.0 * (k[0][j] + 2.0 * k[1][j] + 2.0 * k[2][j] + k[3][j]);
        }
    }
}

/// Spatially constant solution: the reaction flow alone, sampled on the
/// same RK4 schedule as [`trotter_integrate`].
pub fn ode_integrate(spec: &ReactionSpec, point: &[f64], t_end: f64, opts: &TrotterOptions) -> Result<Vec<f64>> {
    let n = spec.system().components();
    if point.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: point.len(),
        });
    }
    let (steps, s) = opts.steps(t_end)?;
    let mut p = point.to_vec();
    for _ in 0..steps {
        rk4_point(spec, &mut p, s, opts.reaction_substeps);
    }
    Ok(p)
}

/// Integrates the reaction-diffusion system by alternating the pointwise
/// reaction flow and the heat flow over steps of length `s`. Fails with
/// `RegionEscape` when the state leaves its physical region.
pub fn trotter_integrate(
    spec: &ReactionSpec,
    init: &Field,
    t_end: f64,
    opts: &TrotterOptions,
) -> Result<PdeTrajectory> {
    let mut frames = vec![init.clone()];
    let record_every = opts.record_every;
    let mut last = init.clone();
    let mut step = 0usize;
    trotter_observe(spec, init, t_end, opts, |f| {
        step += 1;
        if step.is_multiple_of(record_every) {
            frames.push(f.clone());
        }
        last = f.clone();
    })?;
    if !step.is_multiple_of(record_every) {
        frames.push(last);
    }
    Ok(PdeTrajectory { spec: *spec, frames })
}

/// Like [`trotter_integrate`], but hands every intermediate field to
/// `observe` instead of storing it. Returns the final field.
pub fn trotter_observe(
    spec: &ReactionSpec,
    init: &Field,
    t_end: f64,
    opts: &TrotterOptions,
    mut observe: impl FnMut(&Field),
) -> Result<Field> {
    let system = spec.system();
    if init.components() != system.components() {
        return Err(Error::DimensionMismatch {
            expected: system.components(),
            got: init.components(),
        });
    }
    init.check_region(system, REGION_TOL)
        .map_err(|e| Error::PreconditionViolated(format!("initial field outside the phase region: {e}")))?;
    let (steps, s) = opts.steps(t_end)?;
    let kernel = match opts.diffusion {
        Diffusion::Kernel => Some(HeatKernel::new(s, init.h())?),
        Diffusion::ExplicitFd => None,
    };
    let mut field = init.clone();
    let ncomp = field.components();
    let mut p = vec![0.0; ncomp];
    for _ in 0..steps {
        for i in 0..field.len() {
            for (k, q) in p.iter_mut().enumerate() {
                *q = field.component(k)[i];
            }
            rk4_point(spec, &mut p, s, opts.reaction_substeps);
            for (k, q) in p.iter().enumerate() {
                field.component_mut(k)[i] = *q;
            }
        }
        for k in 0..ncomp {
            match &kernel {
                Some(kernel) => kernel.apply(field.component_mut(k))?,
                None => fd_heat_apply(field.component_mut(k), s, init.h())?,
            }
        }
        field.time += s;
        field.check_region(system, REGION_TOL)?;
        observe(&field);
    }
    Ok(field)
}

#[cfg(test)]
mod tests {
    use super::super::{Profile, System};
    use super::*;

    fn spec(system: System, c: f64) -> ReactionSpec {
        ReactionSpec::new(system, c).unwrap()
    }

    #[test]
    fn constant_data_follows_the_ode() {
        let sp = spec(System::Uv, 25.0);
        let opts = TrotterOptions::new(0.01);
        let init = Field::constant(0.05, 1.0, &[0.6, 0.4]).unwrap();
        let out = trotter_integrate(&sp, &init, 2.0, &opts).unwrap();
        let ode = ode_integrate(&sp, &[0.6, 0.4], 2.0, &opts).unwrap();
        let f = out.last();
        for i in 0..f.len() {
            assert!((f.component(0)[i] - ode[0]).abs() < 1e-8);
            assert!((f.component(1)[i] - ode[1]).abs() < 1e-8);
        }
        assert!((f.time - 2.0).abs() < 1e-12);
    }

    #[test]
    fn recorded_frames() {
        let sp = spec(System::ScalarSex, 3.0);
        let init = Field::constant(0.1, 3.0, &[0.5]).unwrap();
        let out = trotter_integrate(&sp, &init, 1.0, &TrotterOptions::new(0.1).record_every(3)).unwrap();
        let times: Vec<f64> = out.frames.iter().map(|f| (f.time * 10.0).round()).collect();
        assert_eq!(times, vec![0.0, 3.0, 6.0, 9.0, 10.0]);
    }

    #[test]
    fn explicit_diffusion_agrees_with_the_kernel() {
        let sp = spec(System::Uv, 10.0);
        let p = Profile::new(1.0, 0.5).unwrap();
        let init = Field::from_fn(0.05, 4.0, 2, |x| vec![0.8 * p.value(x), 0.6 * p.value(x)]).unwrap();
        let a = trotter_integrate(&sp, &init, 0.5, &TrotterOptions::new(1e-3)).unwrap();
        let b = trotter_integrate(
            &sp,
            &init,
            0.5,
            &TrotterOptions::new(1e-3).diffusion(Diffusion::ExplicitFd),
        )
        .unwrap();
        let gap = (0..init.len())
            .map(|i| (a.last().component(1)[i] - b.last().component(1)[i]).abs())
            .fold(0.0, f64::max);
        assert!(gap < 5e-3, "{gap}");
        let bad = TrotterOptions::new(0.01).diffusion(Diffusion::ExplicitFd);
        assert!(trotter_integrate(&sp, &init, 0.1, &bad).is_err());
    }

    #[test]
    fn rejects_data_outside_the_region() {
        let init = Field::constant(0.1, 1.0, &[0.2, 0.5]).unwrap();
        let err = trotter_integrate(&spec(System::Uv, 5.0), &init, 1.0, &TrotterOptions::new(0.1)).unwrap_err();
        assert!(matches!(err, Error::PreconditionViolated(_)));
    }

    #[test]
    fn unstable_steps_are_caught() {
        // A huge step blows the reaction flow out of the box.
        let init = Field::constant(0.1, 5.0, &[0.9, 0.8]).unwrap();
        let err = trotter_integrate(&spec(System::Uv, 400.0), &init, 2.0, &TrotterOptions::new(0.5)).unwrap_err();
        assert!(matches!(err, Error::RegionEscape { .. }));
        assert!(err.is_numerical());
    }

    fn bump(x: f64, centre: f64, width: f64) -> f64 {
        (-(x - centre).powi(2) / (width * width)).exp()
    }

    #[test]
    fn ordered_pair_data_stay_ordered() {
        let sp = spec(System::Uv, 30.0);
        let opts = TrotterOptions::new(2e-3);
        let low = Field::from_fn(0.02, 3.0, 2, |x| {
            let b = bump(x, 0.0, 0.8);
            vec![0.7 * b, 0.5 * b]
        })
        .unwrap();
        let high = Field::from_fn(0.02, 3.0, 2, |x| {
            let b = bump(x, 0.1, 1.0);
            vec![0.75 * b, 0.55 * b]
        })
        .unwrap();
        let a = trotter_integrate(&sp, &low, 1.0, &opts.record_every(50)).unwrap();
        let b = trotter_integrate(&sp, &high, 1.0, &opts.record_every(50)).unwrap();
        for (fa, fb) in a.frames.iter().zip(&b.frames) {
            for k in 0..2 {
                for (i, (x, y)) in fa.component(k).iter().zip(fb.component(k)).enumerate() {
                    assert!(*x <= y + 1e-10, "t {} k {k} x {} : {x} > {y}", fa.time, fa.x(i));
                }
            }
            fa.check_region(System::Uv, 1e-8).unwrap();
        }
    }

    #[test]
    fn four_state_mass_is_conserved() {
        let sp = spec(System::FourState, 8.0);
        let init = Field::from_fn(0.05, 3.0, 4, |x| {
            let b = bump(x, 0.0, 1.0);
            let (p01, p10, p11) = (0.2 * b, 0.1 * b, 0.6 * b);
            vec![1.0 - p01 - p10 - p11, p01, p10, p11]
        })
        .unwrap();
        let f = trotter_integrate(&sp, &init, 2.0, &TrotterOptions::new(5e-3)).unwrap();
        let last = f.last();
        for i in 0..last.len() {
            assert!((last.point(i).iter().sum::<f64>() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn three_state_maps_onto_the_pair_system() {
        let c = 12.0;
        let opts = TrotterOptions::new(2e-3);
        let three = Field::from_fn(0.05, 3.0, 3, |x| {
            let b = bump(x, 0.2, 0.9);
            vec![1.0 - 0.8 * b, 0.3 * b, 0.5 * b]
        })
        .unwrap();
        let uv = Field::from_fn(0.05, 3.0, 2, |x| {
            let b = bump(x, 0.2, 0.9);
            vec![0.8 * b, 0.5 * b]
        })
        .unwrap();
        let a = trotter_integrate(&spec(System::ThreeState, c), &three, 1.5, &opts).unwrap();
        let b = trotter_integrate(&spec(System::Uv, c), &uv, 1.5, &opts).unwrap();
        let (a, b) = (a.last(), b.last());
        for i in 0..a.len() {
            assert!((a.component(1)[i] + a.component(2)[i] - b.component(0)[i]).abs() < 1e-8);
            assert!((a.component(2)[i] - b.component(1)[i]).abs() < 1e-8);
        }
    }

    #[test]
    fn symmetric_pairs_reduce_to_the_scalar_model() {
        let c = 3.0;
        let opts = TrotterOptions::new(5e-3);
        let pair = Field::from_fn(0.05, 3.0, 2, |x| vec![0.9 * bump(x, 0.0, 1.2); 2]).unwrap();
        let scalar = Field::from_fn(0.05, 3.0, 1, |x| vec![0.9 * bump(x, 0.0, 1.2)]).unwrap();
        let a = trotter_integrate(&spec(System::IndPair, c), &pair, 2.0, &opts).unwrap();
        let b = trotter_integrate(&spec(System::ScalarSex, c), &scalar, 2.0, &opts).unwrap();
        let (a, b) = (a.last(), b.last());
        for i in 0..a.len() {
            assert_eq!(a.component(0)[i], a.component(1)[i]);
            assert!((a.component(0)[i] - b.component(0)[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn subcritical_scalar_model_dies_out() {
        // f < 0 on (0, 1] when c < 2.
        let sp = spec(System::ScalarSex, 1.5);
        let init = Field::constant(0.1, 3.0, &[1.0]).unwrap();
        let out = trotter_integrate(&sp, &init, 30.0, &TrotterOptions::new(0.01)).unwrap();
        assert!(out.last().component(0).iter().all(|&u| u < 1e-3));
    }
}
