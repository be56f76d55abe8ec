//! One-step integrators shared by the reduced flows and the Cartesian oracle.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// First-order system `y' = f(t, y)`.
pub trait OdeSystem {
    fn dim(&self) -> usize;
    fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]) -> Result<()>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    RK4Fixed,
    AdaptiveRK45,
    ImplicitMidpoint,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorSpec {
    pub method: Method,
    /// Step of the fixed-step methods; initial step guess of the adaptive one
    /// (chosen automatically when not positive).
    #[serde(default)]
    pub step: f64,
    #[serde(default = "default_tol")]
    pub abs_tol: f64,
    #[serde(default = "default_tol")]
    pub rel_tol: f64,
    #[serde(default = "default_max_steps")]
    pub max_steps: usize,
}

fn default_tol() -> f64 {
    1e-10
}

fn default_max_steps() -> usize {
    5_000_000
}

impl Default for IntegratorSpec {
    fn default() -> Self {
        Self::adaptive(1e-10, 1e-10)
    }
}

impl IntegratorSpec {
    pub fn adaptive(abs_tol: f64, rel_tol: f64) -> Self {
        Self {
            method: Method::AdaptiveRK45,
            step: 0.0,
            abs_tol,
            rel_tol,
            max_steps: default_max_steps(),
        }
    }

    pub fn rk4(step: f64) -> Self {
        Self {
            method: Method::RK4Fixed,
            step,
            ..Self::default()
        }
    }

    pub fn implicit_midpoint(step: f64) -> Self {
        Self {
            method: Method::ImplicitMidpoint,
            step,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.into()));
        match self.method {
            Method::AdaptiveRK45 => {
                if !(self.abs_tol > 0.0 && self.rel_tol > 0.0) {
                    return bad("tolerances must be positive");
                }
                if !(self.step >= 0.0) {
                    return bad("initial step must be nonnegative");
                }
            }
            _ => {
                if !(self.step > 0.0 && self.step.is_finite()) {
                    return bad("fixed-step methods need a positive step");
                }
            }
        }
        if self.max_steps == 0 {
            return bad("max_steps must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SolveStats {
    pub accepted: usize,
    pub rejected: usize,
}

const NEWTON_MAX_ITER: usize = 50;
const NEWTON_TOL: f64 = 1e-13;

/// Integrates from `t0` through every time in `targets` (strictly increasing,
/// all `> t0`), landing exactly on each. `observer` sees every accepted step
/// end point together with a flag marking target times.
pub fn solve(
    sys: &dyn OdeSystem,
    spec: &IntegratorSpec,
    y0: &[f64],
    t0: f64,
    targets: &[f64],
    observer: &mut dyn FnMut(f64, &[f64], bool) -> Result<()>,
) -> Result<SolveStats> {
    spec.validate()?;
    let n = sys.dim();
    if y0.len() != n {
        return Err(Error::InvalidParameter(
            "state length does not match system".into(),
        ));
    }
    if targets.windows(2).any(|w| !(w[1] > w[0])) || targets.first().is_some_and(|&t| !(t > t0)) {
        return Err(Error::InvalidParameter(
            "output times must increase strictly".into(),
        ));
    }
    let Some(&t_end) = targets.last() else {
        return Ok(SolveStats::default());
    };
    let mut stepper: Box<dyn Stepper> = match spec.method {
        Method::RK4Fixed => Box::new(Rk4::new(n)),
        Method::ImplicitMidpoint => Box::new(Midpoint::new(n)),
        Method::AdaptiveRK45 => Box::new(Dopri::new(n, spec)),
    };
    let mut y = y0.to_vec();
    let mut t = t0;
    let mut h = if spec.method == Method::AdaptiveRK45 && spec.step <= 0.0 {
        initial_step(sys, t0, &y, spec, t_end - t0)?
    } else {
        spec.step
    };
    let mut stats = SolveStats::default();
    let mut next = 0;
    while next < targets.len() {
        if stats.accepted + stats.rejected >= spec.max_steps {
            return Err(Error::StepFailure {
                t,
                reason: format!("maximum number of steps ({}) exceeded", spec.max_steps),
            });
        }
        let target = targets[next];
        let remaining = target - t;
        // avoid a sliver step just before an output time
        let (h_try, lands) = if h >= remaining * (1.0 - 1e-12) {
            (remaining, true)
        } else if h > 0.5 * remaining && spec.method == Method::AdaptiveRK45 {
            (0.5 * remaining, false)
        } else {
            (h, false)
        };
        let min_step = 1e-13 * t.abs().max(t_end.abs()).max(1.0);
        if h_try < min_step && !lands {
            return Err(Error::StepFailure {
                t,
                reason: format!("step size {h_try:e} below minimum"),
            });
        }
        match stepper.step(sys, t, &mut y, h_try)? {
            StepOutcome::Accepted { next_h } => {
                stats.accepted += 1;
                t = if lands { target } else { t + h_try };
                if y.iter().any(|v| !v.is_finite()) {
                    return Err(Error::StepFailure {
                        t,
                        reason: "non-finite state".into(),
                    });
                }
                observer(t, &y, lands)?;
                if lands {
                    next += 1;
                    // keep the natural step size rather than the clamped one
                    if spec.method == Method::AdaptiveRK45 {
                        h = next_h.max(h.min(next_h * 4.0));
                    }
                } else {
                    h = next_h;
                }
                if spec.method != Method::AdaptiveRK45 {
                    h = spec.step;
                }
            }
            StepOutcome::Rejected { next_h } => {
                stats.rejected += 1;
                h = next_h;
                if h < min_step {
                    return Err(Error::StepFailure {
                        t,
                        reason: format!("step size {h:e} below minimum after rejection"),
                    });
                }
            }
        }
    }
    Ok(stats)
}

enum StepOutcome {
    Accepted { next_h: f64 },
    Rejected { next_h: f64 },
}

trait Stepper {
    /// Advances `y` in place on acceptance; leaves it untouched on rejection.
    fn step(&mut self, sys: &dyn OdeSystem, t: f64, y: &mut [f64], h: f64) -> Result<StepOutcome>;
}

fn axpy(out: &mut [f64], y: &[f64], h: f64, terms: &[(&[f64], f64)]) {
    for i in 0..out.len() {
        let mut acc = 0.0;
        for (k, c) in terms {
            acc += c * k[i];
        }
        out[i] = y[i] + h * acc;
    }
}

struct Rk4 {
    k: [Vec<f64>; 4],
    tmp: Vec<f64>,
}

impl Rk4 {
    fn new(n: usize) -> Self {
        Self {
            k: std::array::from_fn(|_| vec![0.0; n]),
            tmp: vec![0.0; n],
        }
    }
}

impl Stepper for Rk4 {
    fn step(&mut self, sys: &dyn OdeSystem, t: f64, y: &mut [f64], h: f64) -> Result<StepOutcome> {
        let [k1, k2, k3, k4] = &mut self.k;
        sys.rhs(t, y, k1)?;
        axpy(&mut self.tmp, y, 0.5 * h, &[(k1, 1.0)]);
        sys.rhs(t + 0.5 * h, &self.tmp, k2)?;
        axpy(&mut self.tmp, y, 0.5 * h, &[(k2, 1.0)]);
        sys.rhs(t + 0.5 * h, &self.tmp, k3)?;
        axpy(&mut self.tmp, y, h, &[(k3, 1.0)]);
        sys.rhs(t + h, &self.tmp, k4)?;
        for i in 0..y.len() {
            y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        Ok(StepOutcome::Accepted { next_h: h })
    }
}

// Dormand-Prince 5(4) tableau
const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
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
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

struct Dopri {
    k: [Vec<f64>; 7],
    tmp: Vec<f64>,
    y_new: Vec<f64>,
    fsal_valid: bool,
    last_t: f64,
    err_old: f64,
    abs_tol: f64,
    rel_tol: f64,
    rejected_last: bool,
}

impl Dopri {
    fn new(n: usize, spec: &IntegratorSpec) -> Self {
        Self {
            k: std::array::from_fn(|_| vec![0.0; n]),
            tmp: vec![0.0; n],
            y_new: vec![0.0; n],
            fsal_valid: false,
            last_t: f64::NAN,
            err_old: 1e-4,
            abs_tol: spec.abs_tol,
            rel_tol: spec.rel_tol,
            rejected_last: false,
        }
    }
}

impl Stepper for Dopri {
    fn step(&mut self, sys: &dyn OdeSystem, t: f64, y: &mut [f64], h: f64) -> Result<StepOutcome> {
        let n = y.len();
        if !(self.fsal_valid && self.last_t == t) {
            sys.rhs(t, y, &mut self.k[0])?;
        }
        for s in 1..7 {
            let (done, rest) = self.k.split_at_mut(s);
            for i in 0..n {
                let mut acc = 0.0;
                for (j, kj) in done.iter().enumerate() {
                    acc += A[s][j] * kj[i];
                }
                self.tmp[i] = y[i] + h * acc;
            }
            if s == 6 {
                self.y_new.copy_from_slice(&self.tmp);
            }
            sys.rhs(t + C[s] * h, &self.tmp, &mut rest[0])?;
        }
        let mut err = 0.0;
        for i in 0..n {
            let mut e = 0.0;
            for (s, es) in E.iter().enumerate() {
                e += es * self.k[s][i];
            }
            let sc = self.abs_tol + self.rel_tol * y[i].abs().max(self.y_new[i].abs());
            err += (h * e / sc).powi(2);
        }
        let err = (err / n as f64).sqrt();
        if !err.is_finite() {
            self.fsal_valid = true;
            self.last_t = t;
            self.rejected_last = true;
            return Ok(StepOutcome::Rejected { next_h: 0.1 * h });
        }
        // PI step-size control
        const BETA: f64 = 0.04;
        const EXPO: f64 = 0.2 - 0.75 * BETA;
        let fac11 = err.powf(EXPO);
        if err <= 1.0 {
            let fac = (fac11 / self.err_old.powf(BETA) / 0.9).clamp(0.2, 10.0);
            let mut next_h = h / fac;
            if self.rejected_last {
                next_h = next_h.min(h);
            }
            self.err_old = err.max(1e-4);
            y.copy_from_slice(&self.y_new);
            self.k.swap(0, 6);
            self.fsal_valid = true;
            self.last_t = t + h;
            self.rejected_last = false;
            Ok(StepOutcome::Accepted { next_h })
        } else {
            self.fsal_valid = true;
            self.last_t = t;
            self.rejected_last = true;
            Ok(StepOutcome::Rejected {
                next_h: h / (fac11 / 0.9).min(5.0),
            })
        }
    }
}

fn initial_step(
    sys: &dyn OdeSystem,
    t0: f64,
    y0: &[f64],
    spec: &IntegratorSpec,
    span: f64,
) -> Result<f64> {
    let n = y0.len();
    let sc: Vec<f64> = y0
        .iter()
        .map(|y| spec.abs_tol + spec.rel_tol * y.abs())
        .collect();
    let norm = |v: &[f64]| {
        (v.iter().zip(&sc).map(|(x, s)| (x / s).powi(2)).sum::<f64>() / n as f64).sqrt()
    };
    let mut f0 = vec![0.0; n];
    sys.rhs(t0, y0, &mut f0)?;
    let d0 = norm(y0);
    let d1 = norm(&f0);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 {
        1e-6
    } else {
        0.01 * d0 / d1
    };
    let h0 = h0.min(span);
    let y1: Vec<f64> = y0.iter().zip(&f0).map(|(y, f)| y + h0 * f).collect();
    let mut f1 = vec![0.0; n];
    sys.rhs(t0 + h0, &y1, &mut f1)?;
    let diff: Vec<f64> = f1.iter().zip(&f0).map(|(a, b)| a - b).collect();
    let d2 = norm(&diff) / h0;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(0.2)
    };
    Ok((100.0 * h0).min(h1).min(span))
}

struct Midpoint {
    f: Vec<f64>,
    mid: Vec<f64>,
}

impl Midpoint {
    fn new(n: usize) -> Self {
        Self {
            f: vec![0.0; n],
            mid: vec![0.0; n],
        }
    }

    fn jacobian(&mut self, sys: &dyn OdeSystem, t: f64, x: &[f64]) -> Result<DMatrix<f64>> {
        let n = x.len();
        let mut j = DMatrix::zeros(n, n);
        let mut f0 = vec![0.0; n];
        let mut f1 = vec![0.0; n];
        sys.rhs(t, x, &mut f0)?;
        let mut xp = x.to_vec();
        for c in 0..n {
            let dx = f64::EPSILON.sqrt() * x[c].abs().max(1.0);
            xp[c] = x[c] + dx;
            sys.rhs(t, &xp, &mut f1)?;
            xp[c] = x[c];
            for r in 0..n {
                j[(r, c)] = (f1[r] - f0[r]) / dx;
            }
        }
        Ok(j)
    }
}

impl Stepper for Midpoint {
    fn step(&mut self, sys: &dyn OdeSystem, t: f64, y: &mut [f64], h: f64) -> Result<StepOutcome> {
        let n = y.len();
        let tm = t + 0.5 * h;
        // explicit Euler predictor
        sys.rhs(t, y, &mut self.f)?;
        let mut z: Vec<f64> = (0..n).map(|i| y[i] + h * self.f[i]).collect();
        for i in 0..n {
            self.mid[i] = 0.5 * (y[i] + z[i]);
        }
        let jac = self.jacobian(sys, tm, &self.mid.clone())?;
        let m = DMatrix::identity(n, n) - jac * (0.5 * h);
        let lu = m.lu();
        let fail = |reason: String| Error::StepFailure { t, reason };
        for _ in 0..NEWTON_MAX_ITER {
            for i in 0..n {
                self.mid[i] = 0.5 * (y[i] + z[i]);
            }
            sys.rhs(tm, &self.mid, &mut self.f)?;
            let res = DVector::from_iterator(n, (0..n).map(|i| z[i] - y[i] - h * self.f[i]));
            let size = z.iter().fold(1.0f64, |a, b| a.max(b.abs()));
            let rnorm = res.amax();
            if !rnorm.is_finite() {
                return Err(fail("non-finite residual in implicit solve".into()));
            }
            if rnorm <= NEWTON_TOL * size {
                y.copy_from_slice(&z);
                return Ok(StepOutcome::Accepted { next_h: h });
            }
            let dz = lu
                .solve(&res)
                .ok_or_else(|| fail("singular Newton matrix".into()))?;
            for i in 0..n {
                z[i] -= dz[i];
            }
        }
        Err(fail(format!(
            "implicit midpoint Newton iteration did not converge in {NEWTON_MAX_ITER} iterations"
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// y'' = -w^2 y as a first-order system.
    struct Oscillator(f64);

    impl OdeSystem for Oscillator {
        fn dim(&self) -> usize {
            2
        }
        fn rhs(&self, _t: f64, y: &[f64], dy: &mut [f64]) -> Result<()> {
            dy[0] = y[1];
            dy[1] = -self.0 * self.0 * y[0];
            Ok(())
        }
    }

    fn run(spec: IntegratorSpec, t1: f64) -> (Vec<f64>, SolveStats) {
        let mut last = vec![];
        let stats = solve(
            &Oscillator(2.0),
            &spec,
            &[1.0, 0.0],
            0.0,
            &[t1],
            &mut |_, y, _| {
                last = y.to_vec();
                Ok(())
            },
        )
        .unwrap();
        (last, stats)
    }

    #[test]
    fn adaptive_meets_tolerance() {
        let (y, stats) = run(IntegratorSpec::adaptive(1e-11, 1e-11), 10.0);
        assert!((y[0] - (20.0f64).cos()).abs() < 1e-8, "{y:?}");
        assert!(stats.accepted > 10);
    }

    #[test]
    fn rk4_is_fourth_order() {
        let err = |h: f64| (run(IntegratorSpec::rk4(h), 1.0).0[0] - 2.0f64.cos()).abs();
        let ratio = err(0.02) / err(0.01);
        assert!((ratio.log2() - 4.0).abs() < 0.2, "{ratio}");
    }

    #[test]
    fn midpoint_is_second_order_and_conserves_quadratic_energy() {
        let err =
            |h: f64| (run(IntegratorSpec::implicit_midpoint(h), 1.0).0[0] - 2.0f64.cos()).abs();
        let ratio = err(0.02) / err(0.01);
        assert!((ratio.log2() - 2.0).abs() < 0.1, "{ratio}");
        let (y, _) = run(IntegratorSpec::implicit_midpoint(0.1), 100.0);
        let e = y[1] * y[1] + 4.0 * y[0] * y[0];
        assert!((e - 4.0).abs() < 1e-11, "{e}");
    }

    #[test]
    fn lands_on_targets() {
        let mut seen = vec![];
        solve(
            &Oscillator(1.0),
            &IntegratorSpec::default(),
            &[1.0, 0.0],
            0.0,
            &[0.1, 0.35, 2.0],
            &mut |t, _, hit| {
                if hit {
                    seen.push(t);
                }
                Ok(())
            },
        )
        .unwrap();
        assert_eq!(seen, vec![0.1, 0.35, 2.0]);
    }

    #[test]
    fn blow_up_is_a_step_failure() {
        let err = solve(
            &Oscillator(3.0),
            &IntegratorSpec::rk4(10.0),
            &[1.0, 0.0],
            0.0,
            &[1e4],
            &mut |_, _, _| Ok(()),
        )
        .unwrap_err();
        assert!(matches!(err, Error::StepFailure { .. }), "{err:?}");
    }

    #[test]
    fn rejects_bad_specs() {
        assert!(IntegratorSpec::rk4(0.0).validate().is_err());
        assert!(IntegratorSpec::adaptive(0.0, 1e-8).validate().is_err());
    }
}
