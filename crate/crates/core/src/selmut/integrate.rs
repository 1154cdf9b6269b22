use crate::error::{Error, Result};
use crate::simplex::{lyapunov_raw, FitnessParams, SimplexMeasure};

use super::rhs_into;

/// Largest tolerated excursion outside the simplex before a run is aborted.
const SIMPLEX_SLACK: f64 = 1e-7;
const MIN_ADAPTIVE_STEP: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Method {
    Rk4,
    /// Dormand-Prince 5(4) with per-component absolute and relative tolerance.
    Rk45 {
        tol: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegrateOptions {
    /// Fixed step for RK4, initial step for RK45.
    pub dt: f64,
    pub method: Method,
    /// Keep every n-th accepted step (the final state is always kept).
    pub record_every: usize,
}

impl Default for IntegrateOptions {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            method: Method::Rk4,
            record_every: 1,
        }
    }
}

impl IntegrateOptions {
    pub fn rk4(dt: f64) -> Self {
        Self { dt, ..Self::default() }
    }

    pub fn rk45(tol: f64) -> Self {
        Self {
            dt: 1e-3,
            method: Method::Rk45 { tol },
            record_every: 1,
        }
    }

    pub fn record_every(self, record_every: usize) -> Self {
        Self { record_every, ..self }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelmutTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<SimplexMeasure>,
    /// Lyapunov value per recorded state; `-inf` off the interior when `mu > 0`.
    pub lyapunov: Vec<f64>,
}

impl SelmutTrajectory {
    pub fn last(&self) -> &SimplexMeasure {
        self.states.last().expect("trajectory is never empty")
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

struct Recorder<'a> {
    p: &'a FitnessParams,
    every: usize,
    steps: usize,
    out: SelmutTrajectory,
}

impl<'a> Recorder<'a> {
    fn new(p: &'a FitnessParams, every: usize) -> Self {
        Self {
            p,
            every: every.max(1),
            steps: 0,
            out: SelmutTrajectory {
                times: Vec::new(),
                states: Vec::new(),
                lyapunov: Vec::new(),
            },
        }
    }

    fn push(&mut self, t: f64, y: &[f64]) {
        let v = if self.p.mu() > 0.0 && y.iter().any(|&q| q <= 0.0) {
            f64::NEG_INFINITY
        } else {
            lyapunov_raw(self.p, y)
        };
        self.out.times.push(t);
        self.out.states.push(SimplexMeasure::from_raw(y.to_vec()));
        self.out.lyapunov.push(v);
    }

    fn step(&mut self, t: f64, y: &[f64], last: bool) {
        self.steps += 1;
        if last || self.steps.is_multiple_of(self.every) {
            self.push(t, y);
        }
    }
}

fn check_simplex(t: f64, y: &[f64]) -> Result<()> {
    let total: f64 = y.iter().sum();
    let low = y.iter().cloned().fold(f64::INFINITY, f64::min);
    if low < -SIMPLEX_SLACK || (total - 1.0).abs() > SIMPLEX_SLACK || !total.is_finite() {
        return Err(Error::SimplexEscape {
            t,
            detail: format!("min entry {low:e}, total mass {total}"),
        });
    }
    Ok(())
}

struct Field<'a> {
    p: &'a FitnessParams,
    m: Vec<f64>,
}

impl Field<'_> {
    fn eval(&mut self, y: &[f64], out: &mut [f64]) {
        rhs_into(self.p, y, &mut self.m, out);
    }
}

/// Integrates the selection-mutation equation from `pi0` up to `t_end`.
/// States are never clipped or renormalized.
pub fn integrate(
    pi0: &SimplexMeasure,
    p: &FitnessParams,
    t_end: f64,
    opts: IntegrateOptions,
) -> Result<SelmutTrajectory> {
    if pi0.len() != p.len() {
        return Err(Error::DimensionMismatch {
            expected: p.len(),
            got: pi0.len(),
        });
    }
    if !(opts.dt > 0.0) || !(t_end >= 0.0) {
        return Err(Error::InvalidParams(format!(
            "need dt > 0 and t_end >= 0, got dt = {}, t_end = {t_end}",
            opts.dt
        )));
    }
    let mut rec = Recorder::new(p, opts.record_every);
    rec.push(0.0, pi0.values());
    let field = Field {
        p,
        m: vec![0.0; p.len()],
    };
    match opts.method {
        Method::Rk4 => run_rk4(field, pi0.values().to_vec(), t_end, opts.dt, &mut rec)?,
        Method::Rk45 { tol } => run_rk45(field, pi0.values().to_vec(), t_end, opts.dt, tol, &mut rec)?,
    }
    Ok(rec.out)
}

fn run_rk4(mut f: Field<'_>, mut y: Vec<f64>, t_end: f64, dt: f64, rec: &mut Recorder<'_>) -> Result<()> {
    let n = y.len();
    let steps = (t_end / dt).round().max(0.0) as usize;
    let steps = if (steps as f64 * dt - t_end).abs() > 1e-9 * dt.max(t_end) {
        (t_end / dt).ceil() as usize
    } else {
        steps
    };
    let (mut k1, mut k2, mut k3, mut k4, mut tmp) =
        (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let mut t = 0.0;
    for i in 0..steps {
        let h = if i + 1 == steps { t_end - t } else { dt };
        f.eval(&y, &mut k1);
        axpy(&y, h / 2.0, &k1, &mut tmp);
        f.eval(&tmp, &mut k2);
        axpy(&y, h / 2.0, &k2, &mut tmp);
        f.eval(&tmp, &mut k3);
        axpy(&y, h, &k3, &mut tmp);
        f.eval(&tmp, &mut k4);
        for j in 0..n {
            y[j] += h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
        }
        t = if i + 1 == steps { t_end } else { (i + 1) as f64 * dt };
        check_simplex(t, &y)?;
        rec.step(t, &y, i + 1 == steps);
    }
    Ok(())
}

fn axpy(y: &[f64], a: f64, k: &[f64], out: &mut [f64]) {
    for ((o, yi), ki) in out.iter_mut().zip(y).zip(k) {
        *o = yi + a * ki;
    }
}

// Dormand-Prince coefficients.
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const B5: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

fn run_rk45(mut f: Field<'_>, mut y: Vec<f64>, t_end: f64, dt0: f64, tol: f64, rec: &mut Recorder<'_>) -> Result<()> {
    let n = y.len();
    let mut k = vec![vec![0.0; n]; 7];
    let mut stage = vec![0.0; n];
    let mut y5 = vec![0.0; n];
    let mut t = 0.0;
    let mut h = dt0.min(t_end.max(f64::MIN_POSITIVE));
    while t < t_end {
        if t + h > t_end {
            h = t_end - t;
        }
        f.eval(&y, &mut k[0]);
        for s in 1..7 {
            for j in 0..n {
                stage[j] = y[j] + h * (0..s).map(|r| A[s][r] * k[r][j]).sum::<f64>();
            }
            f.eval(&stage, &mut k[s]);
        }
        let mut err: f64 = 0.0;
        for j in 0..n {
            let hi: f64 = (0..7).map(|s| B5[s] * k[s][j]).sum();
            let lo: f64 = (0..7).map(|s| B4[s] * k[s][j]).sum();
            y5[j] = y[j] + h * hi;
            let scale = tol + tol * y[j].abs().max(y5[j].abs());
            err = err.max((h * (hi - lo)).abs() / scale);
        }
        if err <= 1.0 {
            t = if (t_end - (t + h)).abs() < 1e-12 * t_end.max(1.0) {
                t_end
            } else {
                t + h
            };
            y.copy_from_slice(&y5);
            check_simplex(t, &y)?;
            rec.step(t, &y, t >= t_end);
        }
        let factor = if err == 0.0 {
            5.0
        } else {
            (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
        };
        h *= factor;
        if h < MIN_ADAPTIVE_STEP && t < t_end {
            return Err(Error::StepRejected { t, dt: h });
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simplex::Kernel;

    #[test]
    fn flat_fitness_stays_put() {
        let n = 3;
        let p = FitnessParams::new(vec![1.0; n], Kernel::Explicit(vec![1.0; 2 * n - 1]), 0.1).unwrap();
        let traj = integrate(&SimplexMeasure::uniform(1), &p, 1.0, IntegrateOptions::rk4(0.01)).unwrap();
        assert_eq!(traj.len(), 101);
        assert!(traj.last().sup_distance(&SimplexMeasure::uniform(1)) < 1e-15);
    }

    #[test]
    fn final_time_is_exact_and_recording_thins() {
        let p = FitnessParams::one_dimensional(0.2, 0.01).unwrap();
        let pi0 = SimplexMeasure::new(vec![0.3, 0.4, 0.3]).unwrap();
        let traj = integrate(&pi0, &p, 0.105, IntegrateOptions::rk4(0.01).record_every(5)).unwrap();
        assert_eq!(*traj.times.last().unwrap(), 0.105);
        assert_eq!(traj.times.len(), 4);
    }

    #[test]
    fn adaptive_matches_fixed_step() {
        let p = FitnessParams::symmetric_from_half(&[1.0, 0.7, 0.4], Kernel::Threshold { b: 0.3, m: 3 }, 0.02).unwrap();
        let pi0 = SimplexMeasure::new(vec![0.1, 0.25, 0.3, 0.2, 0.15]).unwrap();
        let a = integrate(&pi0, &p, 20.0, IntegrateOptions::rk4(1e-3).record_every(1000)).unwrap();
        let b = integrate(&pi0, &p, 20.0, IntegrateOptions::rk45(1e-11)).unwrap();
        assert!(a.last().sup_distance(b.last()) < 1e-9);
        assert!(b.len() < 2000);
    }

    #[test]
    fn oversized_steps_abort_instead_of_clipping() {
        let p = FitnessParams::one_dimensional(0.2, 0.5).unwrap();
        let pi0 = SimplexMeasure::new(vec![0.0, 1.0, 0.0]).unwrap();
        let err = integrate(&pi0, &p, 50.0, IntegrateOptions::rk4(2.0)).unwrap_err();
        assert!(matches!(err, Error::SimplexEscape { .. }));
    }

    #[test]
    fn coordinates_below_half_threshold_rise_above_it() {
        let p = FitnessParams::symmetric_from_half(&[1.0, 0.6, 0.3], Kernel::Threshold { b: 0.1, m: 3 }, 0.01).unwrap();
        let floor = super::super::absorption_threshold(&p) / 2.0;
        let pi0 = SimplexMeasure::new(vec![floor / 2.0, 0.3, 0.4 - floor, 0.3, floor / 2.0]).unwrap();
        let traj = integrate(&pi0, &p, 50.0, IntegrateOptions::rk4(1e-2)).unwrap();
        let edge: Vec<f64> = traj.states.iter().map(|s| s.values()[0]).collect();
        let crossing = edge
            .iter()
            .position(|&q| q >= floor)
            .expect("never rose above threshold");
        assert!(edge[..crossing].windows(2).all(|w| w[1] > w[0]));
    }
}
