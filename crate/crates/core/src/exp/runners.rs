use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::config::Module;
use super::registry::Params;
use super::{derive_seed, Artifact};
use crate::dd::{self, dd_stationary, dd_step, middle_mass, DdParams};
use crate::error::{Error, Result};
use crate::ips::{
    coupled_advance_rates, dual_influence, good_event_field, run as ips_run, BirthRule, Floor, GoodEventField,
    GraphicalEventLog, IpsParams, LatticeState, Neighborhood, Stirring, Torus,
};
use crate::moran::{simulate, Mode, Population};
use crate::pde::{
    condition_star_check, equilibria, trotter_integrate, Field, Profile, ReactionSpec, Stability, StarParams, System,
    TrotterOptions,
};
use crate::percolation::{survival_exact, survival_mc, InitialWet, SurvivalQuery, Target};
use crate::selmut::{
    cubic_reduce_1d, find_stationary, integrate, stationary_residual, IntegrateOptions, StationaryOptions,
};
use crate::simplex::{fitness_vector, mean_fitness, FitnessParams, Kernel, SimplexMeasure};

pub(super) fn dispatch(module: Module, action: &str, p: &Params, seed: u64) -> Result<Vec<Artifact>> {
    match (module, action) {
        (Module::Selmut, "run") => selmut_run(p),
        (Module::Selmut, "stationary") => selmut_stationary(p),
        (Module::Selmut, "cubic") => selmut_cubic(p),
        (Module::Dd, "run") => dd_run(p),
        (Module::Dd, "stationary") => dd_stationary_run(p),
        (Module::Dd, "sweep") => dd_sweep(p),
        (Module::Moran, "run") => moran_run(p, seed),
        (Module::Ips, "run") => ips_run_trials(p, seed),
        (Module::Ips, "couple") => ips_couple(p, seed),
        (Module::Ips, "dual") => ips_dual(p, seed),
        (Module::Ips, "goodevents") => ips_good_events(p, seed),
        (Module::Perc, "survive") => perc_survive(p, seed),
        (Module::Perc, "exact") => perc_exact(p),
        (Module::Perc, "fromips") => perc_from_ips(p, seed),
        (Module::Pde, "run") => pde_run(p),
        (Module::Pde, "star") => pde_star(p),
        (Module::Pde, "phase") => pde_phase(p),
        _ => Err(Error::InvalidParams(format!(
            "no runner for {} {action}",
            module.as_str()
        ))),
    }
}

/// Symmetric threshold model; capacities default to `1 - |x| / (2L)` and
/// may be listed for `0..=L` or for the whole range `-L..=L`.
fn fitness(p: &Params) -> Result<FitnessParams> {
    let l = p.usize("half_width");
    let kernel = Kernel::Threshold {
        b: p.f64("b"),
        m: p.opt_usize("m").unwrap_or(2 * l),
    };
    let mu = p.f64("mu");
    match p.opt_list("capacity") {
        None => {
            let half: Vec<f64> = (0..=l).map(|x| 1.0 - x as f64 / (2 * l) as f64).collect();
            FitnessParams::symmetric_from_half(&half, kernel, mu)
        }
        Some(k) if k.len() == l + 1 => FitnessParams::symmetric_from_half(&k, kernel, mu),
        Some(k) if k.len() == 2 * l + 1 => FitnessParams::symmetric(k, kernel, mu),
        Some(k) => Err(Error::InvalidParams(format!(
            "capacity lists {} values; half-width {l} needs {} or {}",
            k.len(),
            l + 1,
            2 * l + 1
        ))),
    }
}

/// Uniform, or mass `init_center` at 0 with the rest spread evenly.
fn initial_measure(p: &Params) -> Result<SimplexMeasure> {
    let l = p.usize("half_width");
    match p.opt_f64("init_center") {
        None => Ok(SimplexMeasure::uniform(l)),
        Some(c) => {
            let rest = (1.0 - c) / (2 * l) as f64;
            SimplexMeasure::new((0..=2 * l).map(|i| if i == l { c } else { rest }).collect())
        }
    }
}

fn measure_rows(out: &mut Artifact, prefix: &str, pi: &SimplexMeasure) {
    for (x, v) in pi.sites().zip(pi.values()) {
        out.row(format_args!("{prefix},{x},{v}"));
    }
}

fn selmut_run(p: &Params) -> Result<Vec<Artifact>> {
    let fp = fitness(p)?;
    let opts = match p.str("method") {
        "rk45" => IntegrateOptions::rk45(p.f64("tol")),
        _ => IntegrateOptions::rk4(p.f64("dt")),
    }
    .record_every(p.usize("record_every"));
    let traj = integrate(&initial_measure(p)?, &fp, p.f64("t_end"), opts)?;
    let mut out = Artifact::csv("trajectory.csv", "t,x,pi_x,V,mbar");
    for ((t, pi), v) in traj.times.iter().zip(&traj.states).zip(&traj.lyapunov) {
        let mbar = mean_fitness(pi, &fp)?;
        for (x, q) in pi.sites().zip(pi.values()) {
            out.row(format_args!("{t},{x},{q},{v},{mbar}"));
        }
    }
    Ok(vec![out])
}

fn selmut_stationary(p: &Params) -> Result<Vec<Artifact>> {
    let fp = fitness(p)?;
    let st = find_stationary(&fp, &initial_measure(p)?, StationaryOptions::with_tol(p.f64("tol")))?;
    let m = fitness_vector(&st.measure, &fp)?;
    let r = stationary_residual(&st.measure, &fp)?;
    let mut out = Artifact::csv("stationary.csv", "x,pi_x,m_x,residual");
    for (i, (x, q)) in st.measure.sites().zip(st.measure.values()).enumerate() {
        out.row(format_args!("{x},{q},{},{}", m[i], r[i]));
    }
    Ok(vec![out])
}

fn selmut_cubic(p: &Params) -> Result<Vec<Artifact>> {
    let red = cubic_reduce_1d(p.f64("b"), p.f64("mu"))?;
    let n = p.usize("points");
    let mut curve = Artifact::csv("cubic.csv", "pi0,rate");
    for i in 0..n {
        let x = i as f64 / (n - 1) as f64;
        curve.row(format_args!("{x},{}", red.eval(x)));
    }
    let stable = red.stable_roots();
    let mut roots = Artifact::csv("roots.csv", "root,multiplicity,stable");
    for r in &red.roots {
        roots.row(format_args!(
            "{},{},{}",
            r.value,
            r.multiplicity,
            u8::from(stable.contains(&r.value))
        ));
    }
    Ok(vec![curve, roots])
}

fn dd_params(p: &Params, mu: f64) -> Result<DdParams> {
    DdParams::rectangular(p.usize("half_width"), p.usize("m"), mu)
}

fn dd_run(p: &Params) -> Result<Vec<Artifact>> {
    let dp = dd_params(p, p.f64("mu"))?;
    let (iters, every) = (p.usize("iters"), p.usize("record_every"));
    let mut pi = SimplexMeasure::uniform(dp.half_width());
    let mut out = Artifact::csv("evolution.csv", "iter,x,pi_x");
    measure_rows(&mut out, "0", &pi);
    for k in 1..=iters {
        pi = dd_step(&pi, &dp)?;
        if k % every == 0 || k == iters {
            measure_rows(&mut out, &k.to_string(), &pi);
        }
    }
    Ok(vec![out])
}

fn dd_solve(p: &Params, mu: f64) -> Result<(DdParams, dd::DdStationary)> {
    let dp = dd_params(p, mu)?;
    let opts = dd::StationaryOptions {
        max_iter: p.usize("max_iter"),
        tol: p.f64("tol"),
    };
    let st = dd_stationary(&dp, &SimplexMeasure::uniform(dp.half_width()), opts)?;
    Ok((dp, st))
}

const DD_SUMMARY: &str = "mu,middle_mass,vbar,iters";

fn dd_stationary_run(p: &Params) -> Result<Vec<Artifact>> {
    let mu = p.f64("mu");
    let (dp, st) = dd_solve(p, mu)?;
    let mut measure = Artifact::csv("stationary.csv", "x,pi_x");
    for (x, q) in st.measure.sites().zip(st.measure.values()) {
        measure.row(format_args!("{x},{q}"));
    }
    let mut summary = Artifact::csv("summary.csv", DD_SUMMARY);
    summary.row(format_args!(
        "{mu},{},{},{}",
        middle_mass(&st.measure, &dp)?,
        st.vbar,
        st.iterations
    ));
    Ok(vec![measure, summary])
}

fn dd_sweep(p: &Params) -> Result<Vec<Artifact>> {
    let rows = p
        .list("mus")
        .into_par_iter()
        .map(|mu| {
            let (dp, st) = dd_solve(p, mu)?;
            Ok(format!(
                "{mu},{},{},{}",
                middle_mass(&st.measure, &dp)?,
                st.vbar,
                st.iterations
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut out = Artifact::csv("sweep.csv", DD_SUMMARY);
    rows.into_iter().for_each(|r| out.row(r));
    Ok(vec![out])
}

fn moran_run(p: &Params, seed: u64) -> Result<Vec<Artifact>> {
    let fp = fitness(p)?;
    let mode: Mode = p.str("mode").parse()?;
    let init = Population::from_measure(&initial_measure(p)?, p.usize("size") as u64)?;
    let traj = simulate(mode, &fp, &init, p.f64("t_end"), seed)?;
    let l = fp.half_width() as i64;
    let mut events = Artifact::csv("events.csv", "t,from_x,to_x,channel");
    for e in &traj.events {
        events.row(format_args!(
            "{},{},{},{}",
            e.t,
            e.from as i64 - l,
            e.to as i64 - l,
            e.channel.as_str()
        ));
    }
    let mut snaps = Artifact::csv("snapshots.csv", "t,x,pi_x");
    for (t, pi) in traj.snapshots(p.f64("mesh"))? {
        measure_rows(&mut snaps, &t.to_string(), &pi);
    }
    Ok(vec![events, snaps])
}

fn ips_params(p: &Params) -> Result<IpsParams> {
    let rule = match p.str("rule") {
        "same_site" => BirthRule::SameSite,
        _ => BirthRule::PairedAnywhere,
    };
    let dims = p.opt_usize("dims").unwrap_or(1);
    let epsilon = p.opt_f64("epsilon").unwrap_or(1.0);
    let stirring = match p.opt_str("stirring").unwrap_or("none") {
        "lily_pad" => Stirring::LilyPad { epsilon },
        "individual" => Stirring::Individual { epsilon },
        _ => Stirring::None,
    };
    IpsParams::new(p.f64("lambda"), p.f64("delta"), rule, Neighborhood::nearest(dims))?.with_stirring(stirring)
}

fn ips_torus(p: &Params) -> Result<Torus> {
    let dims = p.opt_usize("dims").unwrap_or(1);
    Torus::new(vec![p.usize("sides"); dims])
}

fn center(torus: &Torus) -> usize {
    let coords: Vec<i64> = torus.sides().iter().map(|&s| (s / 2) as i64).collect();
    torus.site(&coords)
}

fn ips_initial(p: &Params, torus: Torus, pair_site: usize) -> LatticeState {
    match p.str("init") {
        "full" => LatticeState::full(torus),
        _ => LatticeState::single_pair(torus, pair_site),
    }
}

/// Trial `k` of a unit runs on `derive_seed(seed, k)`; snapshots follow
/// trial 0.
fn ips_run_trials(p: &Params, seed: u64) -> Result<Vec<Artifact>> {
    let ip = ips_params(p)?;
    let torus = ips_torus(p)?;
    let state0 = ips_initial(p, torus.clone(), center(&torus));
    let t_end = p.f64("t_end");
    let mesh = p.f64("mesh");

    let first = derive_seed(seed, 0);
    let log = GraphicalEventLog::generate(&torus, &ip, t_end, first)?;
    let mut snaps = Artifact::csv("snapshots.csv", "t,x,male,female");
    let mut state = state0.clone();
    let steps = (t_end / mesh + 1e-9).floor() as usize;
    for k in 0..=steps {
        crate::ips::advance(&mut state, &ip, &log, (k as f64 * mesh).min(t_end))?;
        snaps.body.push_str(&state.to_csv_rows());
    }

    let rows = (0..p.usize("trials") as u64)
        .into_par_iter()
        .map(|k| {
            let s = derive_seed(seed, k);
            let out = ips_run(&state0, &ip, t_end, s, true)?;
            let t = out.t_dead.map(|t| t.to_string()).unwrap_or_default();
            Ok(format!("{s},{},{t}", u8::from(out.t_dead.is_none())))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut summary = Artifact::csv("summary.csv", "seed,survival,t_extinct");
    rows.into_iter().for_each(|r| summary.row(r));
    Ok(vec![snaps, summary])
}

/// A random ordered pair: the upper state has each nest occupied with
/// probability 1/2, the lower keeps each of those with probability 1/2.
pub(crate) fn random_ordered_pair(torus: &Torus, rng: &mut impl Rng) -> (LatticeState, LatticeState) {
    let upper = LatticeState::from_fn(torus.clone(), |_| (rng.random::<bool>(), rng.random::<bool>()));
    let lower = LatticeState::from_fn(torus.clone(), |x| {
        let (m, f) = upper.get(x);
        (m && rng.random::<bool>(), f && rng.random::<bool>())
    });
    (lower, upper)
}

fn ips_couple(p: &Params, seed: u64) -> Result<Vec<Artifact>> {
    let ip = ips_params(p)?;
    let torus = ips_torus(p)?;
    let lambdas = p.opt_list("lambdas").unwrap_or_else(|| vec![ip.lambda; 2]);
    let reference = lambdas.iter().copied().fold(0.0, f64::max);
    let t_end = p.f64("t_end");
    let rows = (0..p.usize("trials") as u64)
        .into_par_iter()
        .map(|k| {
            let s = derive_seed(seed, k);
            let mut rng = ChaCha8Rng::seed_from_u64(s);
            let (lower, upper) = random_ordered_pair(&torus, &mut rng);
            let mut chain: Vec<LatticeState> = (0..lambdas.len())
                .map(|i| if i == 0 { lower.clone() } else { upper.clone() })
                .collect();
            let log = GraphicalEventLog::generate_with_reference(&torus, &ip, reference, t_end, rng.random())?;
            let report = coupled_advance_rates(&mut chain, &lambdas, &log, t_end)?;
            Ok(format!("{s},{},{}", report.checks, report.violations))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut out = Artifact::csv("coupling.csv", "seed,checks,violations");
    rows.into_iter().for_each(|r| out.row(r));
    Ok(vec![out])
}

fn ips_dual(p: &Params, seed: u64) -> Result<Vec<Artifact>> {
    let ip = ips_params(p)?;
    let torus = ips_torus(p)?;
    let start = (center(&torus), Floor::Male);
    let (t, max_size) = (p.f64("t"), p.usize("max_size"));
    let rows = (0..p.usize("trials") as u64)
        .into_par_iter()
        .map(|k| {
            let s = derive_seed(seed, k);
            let d = dual_influence(&torus, &ip, start, t, s, max_size)?;
            Ok(format!(
                "{s},{},{},{},{}",
                d.size, d.fictitious, d.collisions, d.branchings
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut out = Artifact::csv("dual.csv", "seed,size,fictitious,collisions,branchings");
    rows.into_iter().for_each(|r| out.row(r));
    Ok(vec![out])
}

fn good_events(p: &Params, seed: u64) -> Result<GoodEventField> {
    let ip = ips_params(p)?;
    let torus = Torus::line(p.usize("sides"))?;
    let state0 = ips_initial(p, torus, 0);
    good_event_field(
        &ip,
        &state0,
        p.f64("block_t"),
        p.usize("half_width"),
        p.usize("levels"),
        seed,
    )
}

fn ips_good_events(p: &Params, seed: u64) -> Result<Vec<Artifact>> {
    let field = good_events(p, seed)?;
    let fronts = field.fronts();
    let mut sets = Artifact::csv("fronts.csv", "n,x,open,wet,reached,paired");
    for f in &fronts {
        for x in field.grid.lattice_sites(f.n) {
            sets.row(format_args!(
                "{},{x},{},{},{},{}",
                f.n,
                u8::from(field.grid.is_open(x, f.n)),
                u8::from(f.wet.contains(&x)),
                u8::from(field.reached[f.n].contains(&x)),
                u8::from(field.paired[f.n].contains(&x)),
            ));
        }
    }
    let mut summary = Artifact::csv("summary.csv", "good_probability,dominated,closed_fraction");
    summary.row(format_args!(
        "{},{},{}",
        field.good_probability,
        u8::from(field.dominated()),
        field.grid.closed_fraction()
    ));
    Ok(vec![sets, summary])
}

fn perc_from_ips(p: &Params, seed: u64) -> Result<Vec<Artifact>> {
    let field = good_events(p, seed)?;
    let mut wet = Artifact::csv("wet.csv", "n,x");
    for f in field.fronts() {
        for x in &f.wet {
            wet.row(format_args!("{},{x}", f.n));
        }
    }
    Ok(vec![Artifact::text("grid.txt", field.grid.to_dump()), wet])
}

fn survival_query(p: &Params) -> SurvivalQuery {
    SurvivalQuery {
        gamma: p.f64("gamma"),
        half_width: p.usize("half_width"),
        levels: p.usize("levels"),
        init: match p.str("init") {
            "bernoulli" => InitialWet::Bernoulli(p.f64("density")),
            _ => InitialWet::Fixed(vec![0]),
        },
        target: match p.str("target") {
            "origin" => Target::Origin,
            _ => Target::Nonempty,
        },
    }
}

fn perc_survive(p: &Params, seed: u64) -> Result<Vec<Artifact>> {
    let q = survival_query(p);
    let est = survival_mc(&q, p.usize("trials") as u64, seed)?;
    let mut out = Artifact::csv("survival.csv", "gamma,successes,trials,mean,std_error");
    out.row(format_args!(
        "{},{},{},{},{}",
        q.gamma,
        est.successes,
        est.trials,
        est.mean(),
        est.std_error()
    ));
    Ok(vec![out])
}

fn perc_exact(p: &Params) -> Result<Vec<Artifact>> {
    let q = survival_query(p);
    let mut out = Artifact::csv("exact.csv", "gamma,probability");
    out.row(format_args!("{},{}", q.gamma, survival_exact(&q)?));
    Ok(vec![out])
}

/// Default amplitudes per system; for the four- and three-state systems
/// these are the non-empty states and the empty state takes the rest.
fn default_amplitudes(system: System) -> Vec<f64> {
    match system {
        System::FourState => vec![0.2, 0.2, 0.6],
        System::ThreeState => vec![0.2, 0.6],
        System::Uv => vec![0.8, 0.6],
        System::IndPair => vec![0.7, 0.7],
        System::ScalarSex => vec![0.7],
    }
}

fn pde_initial(p: &Params, system: System, t_end: f64) -> Result<Field> {
    let profile = Profile::new(p.f64("half_width"), p.f64("ramp"))?;
    let amps = p.opt_list("amplitudes").unwrap_or_else(|| default_amplitudes(system));
    let complement = matches!(system, System::FourState | System::ThreeState);
    let expected = system.components() - usize::from(complement);
    if amps.len() != expected {
        return Err(Error::InvalidParams(format!(
            "{system} takes {expected} amplitudes, got {}",
            amps.len()
        )));
    }
    let h = p.f64("h");
    let x_max = p
        .opt_f64("x_max")
        .unwrap_or_else(|| ((3.0 * profile.half_width() + 3.0 * t_end.sqrt() + 1.0) / h).ceil() * h);
    Field::from_fn(h, x_max, system.components(), |x| {
        let f = profile.value(x);
        let mut point: Vec<f64> = amps.iter().map(|a| a * f).collect();
        if complement {
            point.insert(0, 1.0 - point.iter().sum::<f64>());
        }
        point
    })
}

fn pde_run(p: &Params) -> Result<Vec<Artifact>> {
    let system: System = p.str("system").parse()?;
    let spec = ReactionSpec::new(system, p.f64("c"))?;
    let t_end = p.f64("t_end");
    let init = pde_initial(p, system, t_end)?;
    let opts = TrotterOptions::new(p.f64("s")).record_every(p.usize("record_every"));
    let traj = trotter_integrate(&spec, &init, t_end, &opts)?;
    let mut out = Artifact::csv("field.csv", &format!("t,x,{}", system.names().join(",")));
    for frame in &traj.frames {
        frame.to_csv_rows().into_iter().for_each(|r| out.row(r));
    }
    Ok(vec![out])
}

fn pde_star(p: &Params) -> Result<Vec<Artifact>> {
    let c = p.f64("c");
    let mut sp = StarParams::standard(c, p.f64("half_width"), p.f64("t_end"));
    sp.density_low = p.f64("d_low");
    sp.density_high = p.f64("d_high");
    sp.ramp = p.f64("ramp");
    sp.s = p.f64("s");
    sp.h = p.f64("h");
    sp.b0 = p.f64("b0");
    sp.a0 = p
        .opt_f64("a0")
        .unwrap_or_else(|| 0.5 * (sp.b0 + crate::pde::admissible_u_bound(c, sp.b0)));
    let report = condition_star_check(&sp)?;
    let every = p.usize("record_every");
    let mut widths = Artifact::csv("star.csv", "t,wet_width");
    let last = report.wet_width.len() - 1;
    for (i, (t, w)) in report.wet_width.iter().enumerate() {
        if i % every == 0 || i == last {
            widths.row(format_args!("{t},{w}"));
        }
    }
    let mut summary = Artifact::csv("summary.csv", "c,holds,min_v,width_monotone");
    summary.row(format_args!(
        "{c},{},{},{}",
        u8::from(report.holds),
        report.min_v,
        u8::from(report.width_monotone)
    ));
    let mut field = Artifact::csv("final.csv", "t,x,u,v");
    report.last.to_csv_rows().into_iter().for_each(|r| field.row(r));
    Ok(vec![widths, summary, field])
}

fn pde_phase(p: &Params) -> Result<Vec<Artifact>> {
    let rows = p
        .list("cs")
        .into_par_iter()
        .map(|c| {
            let eq = equilibria(&ReactionSpec::new(System::Uv, c)?)?;
            let saddle = eq.minus.stability == Stability::Saddle;
            Ok(format!(
                "{c},{},{},{},{},{}",
                eq.plus.u,
                eq.plus.v,
                eq.minus.u,
                eq.minus.v,
                u8::from(saddle)
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut out = Artifact::csv("phase.csv", "c,Pplus_u,Pplus_v,Pminus_u,Pminus_v,saddle_flag");
    rows.into_iter().for_each(|r| out.row(r));
    Ok(vec![out])
}

#[cfg(test)]
mod tests {
    use super::super::{parse_config_for, schema, strip_header};
    use super::*;

    fn run_default(module: Module, action: &str, params: &str) -> Vec<Artifact> {
        let text = format!("[params]\n{params}");
        let c = parse_config_for(&text, Some(module), Some(action)).unwrap();
        let p = Params::resolve(schema(module, action).unwrap(), &c.params);
        dispatch(module, action, &p, 1).unwrap()
    }

    fn rows(a: &Artifact) -> Vec<Vec<f64>> {
        strip_header(&a.body)
            .lines()
            .map(|l| l.split(',').map(|x| x.parse().unwrap_or(f64::NAN)).collect())
            .collect()
    }

    #[test]
    fn cubic_roots_match_the_bistable_case() {
        let out = run_default(Module::Selmut, "cubic", "b = 0.2\n");
        let roots: Vec<f64> = rows(&out[1]).iter().map(|r| r[0]).collect();
        // Closed form: 1/3 and (1 -+ sqrt(1 - 80 mu)) / 2.
        let r = (1.0f64 - 80.0 / 150.0).sqrt();
        assert_eq!(roots.len(), 3);
        assert!((roots[0] - (1.0 - r) / 2.0).abs() < 1e-12, "{roots:?}");
        assert!((roots[1] - 1.0 / 3.0).abs() < 1e-12 && (roots[2] - (1.0 + r) / 2.0).abs() < 1e-12);
        assert_eq!(out[0].body.lines().count(), 201);
    }

    #[test]
    fn initial_center_places_mass() {
        let c = parse_config_for(
            "[params]\ninit_center = 0.3\nhalf_width = 2\n",
            Some(Module::Selmut),
            Some("run"),
        )
        .unwrap();
        let p = Params::resolve(schema(Module::Selmut, "run").unwrap(), &c.params);
        let pi = initial_measure(&p).unwrap();
        assert_eq!(pi.values(), &[0.175, 0.175, 0.3, 0.175, 0.175]);
        let fp = fitness(&p).unwrap();
        assert_eq!(fp.capacity(), &[0.5, 0.75, 1.0, 0.75, 0.5]);
    }

    #[test]
    fn capacity_list_lengths() {
        let c = parse_config_for(
            "[params]\ncapacity = [1.0, 0.5, 0.2]\n",
            Some(Module::Selmut),
            Some("run"),
        )
        .unwrap();
        let p = Params::resolve(schema(Module::Selmut, "run").unwrap(), &c.params);
        assert!(fitness(&p).is_err());
    }

    #[test]
    fn pde_run_writes_named_components() {
        let out = run_default(
            Module::Pde,
            "run",
            "system = \"three_state\"\nt_end = 0.01\nrecord_every = 5\nhalf_width = 1.0\n",
        );
        assert_eq!(out[0].columns.as_deref(), Some("t,x,u0,u1,u2"));
        for r in rows(&out[0]) {
            assert!((r[2] + r[3] + r[4] - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn phase_rows_follow_the_closed_form() {
        let out = run_default(Module::Pde, "phase", "cs = [25.0]\n");
        let r = &rows(&out[0])[0];
        assert!((r[1] - 0.998_257_57).abs() < 1e-8);
        assert_eq!(r[5], 1.0);
    }

    #[test]
    fn grid_dump_survives_a_header() {
        let out = run_default(
            Module::Perc,
            "fromips",
            "half_width = 4\nlevels = 4\nsides = 21\nlambda = 5.0\n",
        );
        let grid = crate::percolation::PercGrid::from_dump(&format!("# spdyn test\n{}", out[0].body)).unwrap();
        assert_eq!(grid.levels(), 4);
    }

    #[test]
    fn dd_sweep_lists_each_mu() {
        let out = run_default(Module::Dd, "sweep", "mus = [0.05, 0.02]\ntol = 1e-9\n");
        let r = rows(&out[0]);
        assert_eq!(r.len(), 2);
        assert!(r[0][1] > r[1][1]);
    }

    #[test]
    fn ips_trials_report_per_seed() {
        let out = run_default(
            Module::Ips,
            "run",
            "lambda = 0.0\nsides = 11\ntrials = 4\nt_end = 5.0\n",
        );
        assert_eq!(out[0].body.lines().count(), 11 * 6);
        let summary = rows(&out[1]);
        assert_eq!(summary.len(), 4);
        assert!(summary.iter().all(|r| r[1] == 0.0 && r[2] <= 5.0));
    }

    #[test]
    fn couple_reports_no_violations() {
        let out = run_default(
            Module::Ips,
            "couple",
            "sides = 15\ntrials = 3\nt_end = 2.0\nlambdas = [1.0, 2.0]\n",
        );
        assert!(rows(&out[0]).iter().all(|r| r[1] > 0.0 && r[2] == 0.0));
    }
}
