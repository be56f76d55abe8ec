//! Jacobi elliptic functions by the arithmetic-geometric mean (descending
//! Landen) scheme.

use std::f64::consts::FRAC_PI_2;

use crate::error::{Error, Result};

const MAX_AGM: usize = 64;

/// `(sn, cn, dn)` of `u` with parameter `m = k^2`, `0 <= m <= 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jacobi {
    pub sn: f64,
    pub cn: f64,
    pub dn: f64,
}

fn check_parameter(m: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&m) {
        return Err(Error::DegenerateModulus(format!(
            "parameter {m} outside [0, 1]"
        )));
    }
    Ok(())
}

/// Complete integral of the first kind, `K(m) = pi / (2 AGM(1, sqrt(1 - m)))`.
pub fn complete_k(m: f64) -> Result<f64> {
    check_parameter(m)?;
    if m == 1.0 {
        return Err(Error::DegenerateModulus("K diverges at m = 1".into()));
    }
    let (mut a, mut b) = (1.0_f64, (1.0 - m).sqrt());
    for _ in 0..MAX_AGM {
        if (a - b).abs() <= f64::EPSILON * a {
            break;
        }
        (a, b) = (0.5 * (a + b), (a * b).sqrt());
    }
    Ok(FRAC_PI_2 / a)
}

pub fn jacobi(u: f64, m: f64) -> Result<Jacobi> {
    check_parameter(m)?;
    if m == 1.0 {
        let sech = 1.0 / u.cosh();
        return Ok(Jacobi {
            sn: u.tanh(),
            cn: sech,
            dn: sech,
        });
    }
    if m == 0.0 {
        return Ok(Jacobi {
            sn: u.sin(),
            cn: u.cos(),
            dn: 1.0,
        });
    }
    // reduce modulo 4K, a common period of all three functions
    let quarter = complete_k(m)?;
    let u = u - 4.0 * quarter * (u / (4.0 * quarter)).round();

    let mut a = vec![1.0_f64];
    let mut c = vec![m.sqrt()];
    let mut b = (1.0 - m).sqrt();
    while c.last().unwrap().abs() > f64::EPSILON && a.len() < MAX_AGM {
        let an = *a.last().unwrap();
        a.push(0.5 * (an + b));
        c.push(0.5 * (an - b));
        b = (an * b).sqrt();
    }
    let n = a.len() - 1;
    let mut phi = (1u64 << n) as f64 * a[n] * u;
    for i in (1..=n).rev() {
        phi = 0.5 * (phi + (c[i] / a[i] * phi.sin()).asin());
    }
    let (sn, cn) = phi.sin_cos();
    // the ratio form cos(phi0) / cos(phi1 - phi0) is 0/0 at odd multiples of K
    let dn = (1.0 - m * sn * sn).sqrt();
    Ok(Jacobi { sn, cn, dn })
}

/// `sd = sn / dn`.
pub fn sd(u: f64, m: f64) -> Result<f64> {
    let j = jacobi(u, m)?;
    Ok(j.sn / j.dn)
}

/// `sn(u, i k)`: imaginary modulus, parameter `-k^2`, via
/// `sn(u, i k) = sd(u sqrt(1 + k^2), k / sqrt(1 + k^2)) / sqrt(1 + k^2)`.
pub fn sn_imaginary_modulus(u: f64, k: f64) -> Result<f64> {
    if !k.is_finite() {
        return Err(Error::DegenerateModulus(format!("modulus {k}")));
    }
    let q = (1.0 + k * k).sqrt();
    sd(u * q, k * k / (1.0 + k * k)).map(|v| v / q)
}

/// Real period of `sn(., i k)`, `4 K(k^2 / (1 + k^2)) / sqrt(1 + k^2)`.
pub fn sn_imaginary_period(k: f64) -> Result<f64> {
    let q = (1.0 + k * k).sqrt();
    Ok(4.0 * complete_k(k * k / (1.0 + k * k))? / q)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// `F(phi | m)` by composite Simpson quadrature, valid for any real `m < 1`.
    fn incomplete_f(phi: f64, m: f64) -> f64 {
        let n = 4000;
        let h = phi / n as f64;
        let f = |t: f64| 1.0 / (1.0 - m * t.sin().powi(2)).sqrt();
        let mut sum = f(0.0) + f(phi);
        for i in 1..n {
            sum += if i % 2 == 1 { 4.0 } else { 2.0 } * f(i as f64 * h);
        }
        sum * h / 3.0
    }

    #[test]
    fn complete_integral_values() {
        assert!((complete_k(0.0).unwrap() - FRAC_PI_2).abs() < 1e-15);
        // K(1/2) = Gamma(1/4)^2 / (4 sqrt(pi))
        let k_half = 1.854_074_677_301_372;
        assert!((complete_k(0.5).unwrap() - k_half).abs() < 1e-14);
        assert!((complete_k(0.5).unwrap() - incomplete_f(FRAC_PI_2, 0.5)).abs() < 1e-12);
        assert!(complete_k(1.0).is_err());
        assert!(complete_k(-0.1).is_err());
    }

    #[test]
    fn sn_inverts_incomplete_integral() {
        for m in [0.1, 0.5, 0.9, 0.999] {
            for phi in [0.2, 0.7, 1.3, 1.5] {
                let u = incomplete_f(phi, m);
                let j = jacobi(u, m).unwrap();
                assert!((j.sn - phi.sin()).abs() < 1e-12, "m={m} phi={phi}");
                assert!((j.cn - phi.cos()).abs() < 1e-12);
                assert!((j.dn - (1.0 - m * phi.sin().powi(2)).sqrt()).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn identities_and_periodicity() {
        let m = 0.6;
        let k4 = 4.0 * complete_k(m).unwrap();
        for u in [-7.0, -1.2, 0.3, 2.9, 25.0] {
            let j = jacobi(u, m).unwrap();
            assert!((j.sn * j.sn + j.cn * j.cn - 1.0).abs() < 1e-14);
            assert!((j.dn * j.dn + m * j.sn * j.sn - 1.0).abs() < 1e-14);
            let shifted = jacobi(u + k4, m).unwrap();
            assert!((shifted.sn - j.sn).abs() < 1e-12);
        }
        assert!((jacobi(1.0, 1.0).unwrap().sn - 1.0_f64.tanh()).abs() < 1e-15);
        let at_k = jacobi(k4 / 4.0, m).unwrap();
        assert!((at_k.sn - 1.0).abs() < 1e-15);
        assert!((at_k.dn - (1.0 - m).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn imaginary_modulus_matches_quadrature() {
        // sn(F(phi | -k^2), i k) = sin(phi)
        for k in [0.25, 0.5, 0.9, 2.0] {
            for phi in [0.3, 1.0, 1.5, FRAC_PI_2, 2.5] {
                let u = incomplete_f(phi, -k * k);
                let sn = sn_imaginary_modulus(u, k).unwrap();
                assert!((sn - phi.sin()).abs() < 1e-12, "k={k} phi={phi}");
            }
            let quarter = incomplete_f(FRAC_PI_2, -k * k);
            assert!((sn_imaginary_period(k).unwrap() - 4.0 * quarter).abs() < 1e-11);
        }
        assert_eq!(sn_imaginary_modulus(0.0, 0.5).unwrap(), 0.0);
    }
}
