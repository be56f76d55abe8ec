//! Closed-form solutions and ODE residuals for the worked examples.

use serde::{Deserialize, Serialize};

use crate::dynamics::newton_rhs_geo;
use crate::elliptic::{complete_k, sn_imaginary_modulus};
use crate::error::{Error, Result};
use crate::hamiltonians::{eval_H_anharmonic_energy, harmonic_energy};
use crate::potentials::PotentialSpec;

const SQRT3: f64 = 1.732_050_807_568_877_2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ClosedForm {
    /// `c1 cos^2(sqrt(3 A) t + c2)` for `V = A P`.
    HarmonicCos2 { c1: f64, c2: f64, a: f64 },
    /// `(A k^2 / (B (1 - k^2))) sn^2(y, i k)` for `V = A P + B P^2`;
    /// `sign` picks the branch of `y = +- sqrt(3 A / (1 - k^2)) t`.
    AnharmonicSn2 { a: f64, b: f64, k: f64, sign: f64 },
    /// Shape curve of the lemniscate choreography, known only through its
    /// differential equation.
    WeierstrassLemniscate,
}

impl ClosedForm {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::HarmonicCos2 { c1, a, .. } => {
                if !(c1 > 0.0 && a > 0.0) {
                    return Err(Error::InvalidParameter(format!(
                        "need c1 > 0, A > 0; got {c1}, {a}"
                    )));
                }
            }
            Self::AnharmonicSn2 { a, b, k, .. } => {
                if b == 0.0 || k.abs() == 1.0 {
                    return Err(Error::DegenerateModulus(format!("B = {b}, k = {k}")));
                }
                if !(3.0 * a / (1.0 - k * k) > 0.0) {
                    return Err(Error::InvalidParameter(
                        "3A / (1 - k^2) must be positive".into(),
                    ));
                }
            }
            Self::WeierstrassLemniscate => {}
        }
        Ok(())
    }

    pub fn value(&self, t: f64) -> Result<f64> {
        self.validate()?;
        match *self {
            Self::HarmonicCos2 { c1, c2, a } => Ok(harmonic_P(t, c1, c2, a)),
            Self::AnharmonicSn2 { a, b, k, sign } => anharmonic_P(sign.signum() * t, a, b, k),
            Self::WeierstrassLemniscate => Err(Error::InvalidParameter(
                "the lemniscate shape curve has no explicit time parametrisation here".into(),
            )),
        }
    }

    pub fn energy(&self) -> Result<f64> {
        self.validate()?;
        match *self {
            Self::HarmonicCos2 { c1, a, .. } => Ok(harmonic_energy(c1, a)),
            Self::AnharmonicSn2 { a, b, k, .. } => eval_H_anharmonic_energy(a, b, k),
            Self::WeierstrassLemniscate => {
                Err(Error::InvalidParameter("no energy attached".into()))
            }
        }
    }

    /// Period of `P(t)`.
    pub fn period(&self) -> Result<f64> {
        self.validate()?;
        match *self {
            Self::HarmonicCos2 { a, .. } => Ok(std::f64::consts::PI / (3.0 * a).sqrt()),
            Self::AnharmonicSn2 { a, k, .. } => {
                let q = (1.0 + k * k).sqrt();
                let half = 2.0 * complete_k(k * k / (1.0 + k * k))? / q;
                Ok(half / (3.0 * a / (1.0 - k * k)).sqrt())
            }
            Self::WeierstrassLemniscate => {
                Err(Error::InvalidParameter("no period attached".into()))
            }
        }
    }

    /// The potential whose `P`-only flow this solution belongs to.
    pub fn potential(&self) -> Option<PotentialSpec> {
        match *self {
            Self::HarmonicCos2 { a, .. } => Some(PotentialSpec::AnharmonicPS { a, b: 0.0, c: 0.0 }),
            Self::AnharmonicSn2 { a, b, .. } => Some(PotentialSpec::AnharmonicPS { a, b, c: 0.0 }),
            Self::WeierstrassLemniscate => Some(PotentialSpec::Lemniscate),
        }
    }
}

#[allow(non_snake_case)]
pub fn harmonic_P(t: f64, c1: f64, c2: f64, a: f64) -> f64 {
    c1 * ((3.0 * a).sqrt() * t + c2).cos().powi(2)
}

#[allow(non_snake_case)]
pub fn anharmonic_P(t: f64, a: f64, b: f64, k: f64) -> Result<f64> {
    if b == 0.0 || k.abs() == 1.0 {
        return Err(Error::DegenerateModulus(format!("B = {b}, k = {k}")));
    }
    let k2 = k * k;
    let rate = 3.0 * a / (1.0 - k2);
    if !(rate > 0.0) {
        return Err(Error::InvalidParameter(
            "3A / (1 - k^2) must be positive".into(),
        ));
    }
    let sn = sn_imaginary_modulus(rate.sqrt() * t, k)?;
    Ok(a * k2 / (b * (1.0 - k2)) * sn * sn)
}

/// Time at which the `sn^2` solution first reaches its maximum
/// `A k^2 / (B (1 - k^2))`.
pub fn anharmonic_turning_time(a: f64, k: f64) -> Result<f64> {
    let q = (1.0 + k * k).sqrt();
    Ok(complete_k(k * k / (1.0 + k * k))? / q / (3.0 * a / (1.0 - k * k)).sqrt())
}

/// `S (256 S^2 + 864 S - 243) + 48 sqrt(3) dS^2`.
pub fn weierstrass_residual(s: f64, s_dot: f64) -> f64 {
    s * (256.0 * s * s + 864.0 * s - 243.0) + 48.0 * SQRT3 * s_dot * s_dot
}

/// Positive turning value of the lemniscate shape curve.
pub fn s_max() -> f64 {
    (9.0 * SQRT3 - 13.5) / 8.0
}

/// `dS/dt >= 0` on the curve at `S`.
pub fn weierstrass_s_dot(s: f64) -> f64 {
    (-s * (256.0 * s * s + 864.0 * s - 243.0) / (48.0 * SQRT3))
        .max(0.0)
        .sqrt()
}

/// Second derivative implied by differentiating the curve equation.
pub fn weierstrass_s_ddot(s: f64) -> f64 {
    -(768.0 * s * s + 1728.0 * s - 243.0) / (96.0 * SQRT3)
}

/// Constant values `(P, T)` along the lemniscate choreography.
pub fn lemniscate_constants() -> (f64, f64) {
    (1.5 * SQRT3, 1.5 * SQRT3)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LemniscateSample {
    pub s: f64,
    pub s_ddot_newton: f64,
    pub s_ddot_curve: f64,
    pub rel_err: f64,
}

/// Evaluates the second-order `S` equation with the lemniscate potential at
/// `n` points of `(0, S_max)` with `P`, `T` constant and `dS/dt` from the
/// curve, against the curve's own `S''`.
pub fn lemniscate_consistency(n: usize) -> Result<Vec<LemniscateSample>> {
    let (p, t) = lemniscate_constants();
    let smax = s_max();
    (0..n)
        .map(|i| {
            let s = smax * (i as f64 + 0.5) / n as f64;
            let sd = weierstrass_s_dot(s);
            let acc = newton_rhs_geo(&[p, s, t, 0.0, sd, 0.0], &PotentialSpec::Lemniscate)?;
            let expect = weierstrass_s_ddot(s);
            Ok(LemniscateSample {
                s,
                s_ddot_newton: acc[1],
                s_ddot_curve: expect,
                rel_err: (acc[1] - expect).abs() / expect.abs(),
            })
        })
        .collect()
}
