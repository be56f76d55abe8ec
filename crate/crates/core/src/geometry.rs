//! Descriptions of the triangle formed by the three bodies.
//!
//! Three coordinate systems are used throughout the crate:
//!
//! * side lengths `r = (r12, r23, r31)`,
//! * squared side lengths `rho = (rho12, rho23, rho31)`,
//! * the permutation-invariant triple `(P, S, T)` where `P` is half the sum of
//!   squared sides, `S` the squared area (Cayley-Menger) and `T` the product of
//!   squared sides.
//!
//! Component order is always `(12, 23, 31)`.

use nalgebra::{Matrix2x3, Matrix3};
use serde::{Deserialize, Serialize};
use twofloat::TwoFloat;

use crate::error::{Error, Result};

/// Relative tolerance used to decide whether a squared area is physical:
/// `S >= -PHYSICAL_TOL * P^2`.
pub const PHYSICAL_TOL: f64 = 1e-10;

/// Three positive body masses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 3]", into = "[f64; 3]")]
pub struct MassTriple {
    m1: f64,
    m2: f64,
    m3: f64,
}

impl MassTriple {
    pub fn new(m1: f64, m2: f64, m3: f64) -> Result<Self> {
        let ok = |m: f64| m.is_finite() && m > 0.0;
        if ok(m1) && ok(m2) && ok(m3) {
            Ok(Self { m1, m2, m3 })
        } else {
            Err(Error::InvalidMass(m1, m2, m3))
        }
    }

    pub fn unit() -> Self {
        Self {
            m1: 1.0,
            m2: 1.0,
            m3: 1.0,
        }
    }

    pub fn m1(&self) -> f64 {
        self.m1
    }
    pub fn m2(&self) -> f64 {
        self.m2
    }
    pub fn m3(&self) -> f64 {
        self.m3
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.m1, self.m2, self.m3]
    }

    pub fn total(&self) -> f64 {
        self.m1 + self.m2 + self.m3
    }

    pub fn product(&self) -> f64 {
        self.m1 * self.m2 * self.m3
    }

    pub fn is_unit(&self) -> bool {
        self.m1 == 1.0 && self.m2 == 1.0 && self.m3 == 1.0
    }

    /// `mu_ij = m_i m_j / M`, in pair order `(12, 23, 31)`.
    pub fn mu(&self) -> [f64; 3] {
        let total = self.total();
        [
            self.m1 * self.m2 / total,
            self.m2 * self.m3 / total,
            self.m3 * self.m1 / total,
        ]
    }

    /// Two-body reduced masses `m_ij = m_i m_j / (m_i + m_j)`, pair order `(12, 23, 31)`.
    pub fn pair_reduced(&self) -> [f64; 3] {
        let red = |a: f64, b: f64| a * b / (a + b);
        [
            red(self.m1, self.m2),
            red(self.m2, self.m3),
            red(self.m3, self.m1),
        ]
    }

    /// The factor `M / (3 m1 m2 m3)` relating mass-weighted volume
    /// Hamiltonians to their unit-mass form. Equals one for unit masses.
    pub fn volume_factor(&self) -> f64 {
        self.total() / (3.0 * self.product())
    }
}

impl TryFrom<[f64; 3]> for MassTriple {
    type Error = Error;
    fn try_from(m: [f64; 3]) -> Result<Self> {
        Self::new(m[0], m[1], m[2])
    }
}

impl From<MassTriple> for [f64; 3] {
    fn from(m: MassTriple) -> Self {
        m.as_array()
    }
}

/// Squared mutual distances.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RhoPoint {
    pub rho12: f64,
    pub rho23: f64,
    pub rho31: f64,
}

impl RhoPoint {
    pub const fn new(rho12: f64, rho23: f64, rho31: f64) -> Self {
        Self {
            rho12,
            rho23,
            rho31,
        }
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        Self::new(a[0], a[1], a[2])
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.rho12, self.rho23, self.rho31]
    }

    pub fn sorted(&self) -> Self {
        let mut a = self.as_array();
        a.sort_by(f64::total_cmp);
        Self::from_array(a)
    }

    /// Nonnegative components and a Cayley-Menger area within tolerance.
    pub fn is_physical(&self) -> bool {
        self.as_array().iter().all(|&x| x >= 0.0) && area_sq_cayley_menger(self).physical
    }
}

/// Geometrical variables `(P, S, T)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    pub p: f64,
    pub s: f64,
    pub t: f64,
}

impl GeoPoint {
    pub const fn new(p: f64, s: f64, t: f64) -> Self {
        Self { p, s, t }
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.p, self.s, self.t]
    }
}

/// Mass-weighted volume variables `(Pm, Sm)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModifiedVolumePoint {
    pub pm: f64,
    pub sm: f64,
}

/// Squared area from the Cayley-Menger formula together with a physicality flag.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CayleyMenger {
    pub area_sq: f64,
    pub physical: bool,
}

/// A preimage of `(P, S, T)` in squared distances. Body labels are lost by the
/// forward map, so only the ascending representative is returned;
/// `multiplicity` counts its distinct labelled permutations (6, 3 or 1).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RhoPreimage {
    pub sorted: RhoPoint,
    pub multiplicity: usize,
}

pub fn rho_from_r(r12: f64, r23: f64, r31: f64) -> RhoPoint {
    debug_assert!(r12 >= 0.0 && r23 >= 0.0 && r31 >= 0.0);
    RhoPoint::new(r12 * r12, r23 * r23, r31 * r31)
}

fn cayley_menger(a: f64, b: f64, c: f64) -> f64 {
    (2.0 * a * b + 2.0 * a * c + 2.0 * b * c - a * a - b * b - c * c) / 16.0
}

pub fn area_sq_cayley_menger(rho: &RhoPoint) -> CayleyMenger {
    let area_sq = cayley_menger(rho.rho12, rho.rho23, rho.rho31);
    let p = 0.5 * (rho.rho12 + rho.rho23 + rho.rho31);
    CayleyMenger {
        area_sq,
        physical: area_sq >= -PHYSICAL_TOL * p * p,
    }
}

/// Symmetric functions of the squared sides, evaluated on the sorted triple
/// so that relabelling the bodies gives bitwise identical results.
pub fn geo_from_rho(rho: &RhoPoint) -> GeoPoint {
    let [a, b, c] = rho.sorted().as_array();
    GeoPoint {
        p: 0.5 * (a + b + c),
        s: cayley_menger(a, b, c),
        t: a * b * c,
    }
}

/// Jacobian `d(P, S, T) / d(rho12, rho23, rho31)`; rows are `P`, `S`, `T`.
pub fn geo_jacobian(rho: &RhoPoint) -> Matrix3<f64> {
    let (a, b, c) = (rho.rho12, rho.rho23, rho.rho31);
    Matrix3::new(
        0.5,
        0.5,
        0.5,
        (b + c - a) / 8.0,
        (a + c - b) / 8.0,
        (a + b - c) / 8.0,
        b * c,
        a * c,
        a * b,
    )
}

pub fn moment_of_inertia(rho: &RhoPoint, m: &MassTriple) -> f64 {
    let mu = m.mu();
    mu[0] * rho.rho12 + mu[1] * rho.rho23 + mu[2] * rho.rho31
}

pub fn modified_volume(rho: &RhoPoint, m: &MassTriple) -> ModifiedVolumePoint {
    let pm = 0.5 * (rho.rho12 / m.m3() + rho.rho23 / m.m1() + rho.rho31 / m.m2());
    let sm = 3.0 * m.product() / m.total() * cayley_menger(rho.rho12, rho.rho23, rho.rho31);
    ModifiedVolumePoint { pm, sm }
}

/// Jacobian `d(Pm, Sm) / d(rho12, rho23, rho31)`.
pub fn modified_volume_jacobian(rho: &RhoPoint, m: &MassTriple) -> Matrix2x3<f64> {
    let (a, b, c) = (rho.rho12, rho.rho23, rho.rho31);
    let k = 3.0 * m.product() / m.total() / 8.0;
    Matrix2x3::new(
        0.5 / m.m3(),
        0.5 / m.m1(),
        0.5 / m.m2(),
        k * (b + c - a),
        k * (a + c - b),
        k * (a + b - c),
    )
}

/// Mass-weighted volume chart `(Pm, k S)` with `k = M / (3 m1 m2 m3)`. In these
/// coordinates the squared-distance kinetic term pushes forward to `k` times
/// the unit-mass volume form; the second coordinate differs from
/// [`modified_volume`]'s `Sm` by the factor `k^2` and agrees with it at unit
/// masses.
pub fn mass_volume_chart(rho: &RhoPoint, m: &MassTriple) -> ModifiedVolumePoint {
    let pm = 0.5 * (rho.rho12 / m.m3() + rho.rho23 / m.m1() + rho.rho31 / m.m2());
    let sm = m.volume_factor() * cayley_menger(rho.rho12, rho.rho23, rho.rho31);
    ModifiedVolumePoint { pm, sm }
}

/// Jacobian of [`mass_volume_chart`].
pub fn mass_volume_chart_jacobian(rho: &RhoPoint, m: &MassTriple) -> Matrix2x3<f64> {
    let (a, b, c) = (rho.rho12, rho.rho23, rho.rho31);
    let k = m.volume_factor() / 8.0;
    Matrix2x3::new(
        0.5 / m.m3(),
        0.5 / m.m1(),
        0.5 / m.m2(),
        k * (b + c - a),
        k * (a + c - b),
        k * (a + b - c),
    )
}

/// The factor `4PT(36S + P^2) - 16S(4S + P^2)^2 - 27T^2`. It vanishes on
/// isosceles triangles and is nonnegative on physical points.
///
/// Evaluated in double-double arithmetic: the three terms cancel to many
/// digits near the isosceles locus.
pub fn shape_discriminant(geo: &GeoPoint) -> f64 {
    let (p, s, t) = (
        TwoFloat::from(geo.p),
        TwoFloat::from(geo.s),
        TwoFloat::from(geo.t),
    );
    let pp = p * p;
    let q = s * 4.0 + pp;
    let value = p * t * (s * 36.0 + pp) * 4.0 - s * q * q * 16.0 - t * t * 27.0;
    f64::from(value)
}

/// Discriminant of the monic cubic `x^3 + b x^2 + c x + d`, computed from its
/// coefficients with the textbook formula.
pub fn cubic_discriminant(b: f64, c: f64, d: f64) -> f64 {
    b * b * c * c - 4.0 * c * c * c - 4.0 * b * b * b * d + 18.0 * b * c * d - 27.0 * d * d
}

/// Coefficients `(b, c, d)` of the monic cubic whose roots are the squared
/// sides: `t^3 - 2P t^2 + (4S + P^2) t - T`.
pub fn rho_cubic(geo: &GeoPoint) -> (f64, f64, f64) {
    (-2.0 * geo.p, 4.0 * geo.s + geo.p * geo.p, -geo.t)
}

/// Inverts `geo_from_rho`. The squared sides are the roots of
/// `t^3 - 2P t^2 + (4S + P^2) t - T`, found with the trigonometric formula and
/// Newton-polished. Roots in `[-1e-12 * scale, 0)` are clamped to zero.
pub fn rho_from_geo(geo: &GeoPoint) -> Result<RhoPreimage> {
    let GeoPoint { p, s, t } = *geo;
    let none = || Error::NoPhysicalPreimage { p, s, t };
    if !(p.is_finite() && s.is_finite() && t.is_finite()) || p < 0.0 {
        return Err(none());
    }
    if p == 0.0 {
        if s == 0.0 && t == 0.0 {
            return Ok(RhoPreimage {
                sorted: RhoPoint::new(0.0, 0.0, 0.0),
                multiplicity: 1,
            });
        }
        return Err(none());
    }
    if s < -PHYSICAL_TOL * p * p {
        return Err(none());
    }
    let scale = 2.0 * p;
    let disc = shape_discriminant(geo);
    let disc_scale = p.powi(6);
    if disc < -1e-12 * disc_scale {
        return Err(none());
    }

    let (b, c, d) = rho_cubic(geo);
    let shift = -b / 3.0;
    // depressed cubic y^3 + pp y + qq
    let pp = c - b * b / 3.0;
    let qq = 2.0 * b * b * b / 27.0 - b * c / 3.0 + d;
    let mut roots = if pp.abs() <= 1e-14 * scale * scale {
        let y = (-qq).cbrt();
        [shift + y, shift + y, shift + y]
    } else if pp > 0.0 {
        // a positive depressed coefficient with a real-rooted cubic only
        // happens through rounding at a triple root
        [shift, shift, shift]
    } else {
        let amp = 2.0 * (-pp / 3.0).sqrt();
        let arg = (3.0 * qq / (2.0 * pp) * (-3.0 / pp).sqrt()).clamp(-1.0, 1.0);
        let theta = arg.acos() / 3.0;
        let tau = 2.0 * std::f64::consts::PI / 3.0;
        [
            shift + amp * theta.cos(),
            shift + amp * (theta - tau).cos(),
            shift + amp * (theta - 2.0 * tau).cos(),
        ]
    };
    let f = |x: f64| ((x + b) * x + c) * x + d;
    let df = |x: f64| (3.0 * x + 2.0 * b) * x + c;
    for r in roots.iter_mut() {
        for _ in 0..4 {
            let fx = f(*r);
            let dfx = df(*r);
            if fx == 0.0 || dfx == 0.0 {
                break;
            }
            let cand = *r - fx / dfx;
            if f(cand).abs() < fx.abs() {
                *r = cand;
            } else {
                break;
            }
        }
    }
    roots.sort_by(f64::total_cmp);

    // snap exact double/triple roots: the pair mean is well conditioned
    let snap = 1e-13 * disc_scale;
    if disc.abs() <= snap {
        let spread = roots[2] - roots[0];
        if spread <= 1e-6 * scale {
            roots = [2.0 * p / 3.0; 3];
        } else if roots[1] - roots[0] < roots[2] - roots[1] {
            let mean = 0.5 * (2.0 * p - roots[2]);
            roots[0] = mean;
            roots[1] = mean;
        } else {
            let mean = 0.5 * (2.0 * p - roots[0]);
            roots[1] = mean;
            roots[2] = mean;
        }
    }

    for r in roots.iter_mut() {
        if *r < 0.0 {
            if *r >= -1e-12 * scale {
                *r = 0.0;
            } else {
                return Err(none());
            }
        }
    }
    let sorted = RhoPoint::from_array(roots);
    let eq = |x: f64, y: f64| (x - y).abs() <= 1e-9 * scale;
    let multiplicity = match (eq(roots[0], roots[1]), eq(roots[1], roots[2])) {
        (true, true) => 1,
        (true, false) | (false, true) => 3,
        (false, false) => 6,
    };
    Ok(RhoPreimage {
        sorted,
        multiplicity,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn squares_sides() {
        assert_eq!(rho_from_r(1.0, 1.0, 1.0), RhoPoint::new(1.0, 1.0, 1.0));
        assert_eq!(rho_from_r(3.0, 4.0, 5.0), RhoPoint::new(9.0, 16.0, 25.0));
        assert_eq!(rho_from_r(0.0, 2.0, 2.0), RhoPoint::new(0.0, 4.0, 4.0));
    }

    #[test]
    fn geo_of_reference_triangles() {
        let g = geo_from_rho(&RhoPoint::new(1.0, 1.0, 1.0));
        assert_eq!(g, GeoPoint::new(1.5, 3.0 / 16.0, 1.0));
        let g = geo_from_rho(&RhoPoint::new(9.0, 16.0, 25.0));
        assert_eq!(g, GeoPoint::new(25.0, 36.0, 3600.0));
        let g = geo_from_rho(&RhoPoint::new(0.0, 4.0, 4.0));
        assert_eq!(g, GeoPoint::new(4.0, 0.0, 0.0));
    }

    #[test]
    fn geo_inversion() {
        let pre = rho_from_geo(&GeoPoint::new(1.5, 3.0 / 16.0, 1.0)).unwrap();
        assert_eq!(pre.multiplicity, 1);
        for x in pre.sorted.as_array() {
            assert_relative_eq!(x, 1.0, max_relative = 1e-14);
        }
        let pre = rho_from_geo(&GeoPoint::new(25.0, 36.0, 3600.0)).unwrap();
        assert_eq!(pre.multiplicity, 6);
        for (x, y) in pre.sorted.as_array().iter().zip([9.0, 16.0, 25.0]) {
            assert_relative_eq!(*x, y, max_relative = 1e-14);
        }
        let pre = rho_from_geo(&GeoPoint::new(4.5, 15.0 / 16.0, 16.0)).unwrap();
        assert_eq!(pre.multiplicity, 3);
        assert_eq!(pre.sorted.as_array(), [1.0, 4.0, 4.0]);
    }

    #[test]
    fn inconsistent_t_has_no_preimage() {
        // t^3 - 3t^2 + 3t - 2 = (t - 1)^3 - 1 has a single real root
        let err = rho_from_geo(&GeoPoint::new(1.5, 3.0 / 16.0, 2.0)).unwrap_err();
        assert!(matches!(err, Error::NoPhysicalPreimage { .. }));
        // sides (1, 2, 4) are real roots but violate the triangle inequality
        let g = geo_from_rho(&RhoPoint::new(1.0, 4.0, 16.0));
        assert!(rho_from_geo(&g).is_err());
    }

    #[test]
    fn cayley_menger_area() {
        assert_eq!(
            area_sq_cayley_menger(&RhoPoint::new(9.0, 16.0, 25.0)).area_sq,
            36.0
        );
        assert_eq!(
            area_sq_cayley_menger(&RhoPoint::new(1.0, 1.0, 1.0)).area_sq,
            3.0 / 16.0
        );
        // sides 1, 2, 3 are collinear, so the area vanishes exactly
        let cm = area_sq_cayley_menger(&RhoPoint::new(1.0, 4.0, 9.0));
        assert_eq!(cm.area_sq, 0.0);
        assert!(cm.physical);
        let cm = area_sq_cayley_menger(&RhoPoint::new(1.0, 4.0, 16.0));
        assert_eq!(cm.area_sq, -105.0 / 16.0);
        assert!(!cm.physical);
    }

    #[test]
    fn inertia_and_modified_volume() {
        let unit = MassTriple::unit();
        let m123 = MassTriple::new(1.0, 2.0, 3.0).unwrap();
        assert_relative_eq!(moment_of_inertia(&RhoPoint::new(1.0, 1.0, 1.0), &unit), 1.0);
        assert_relative_eq!(
            moment_of_inertia(&RhoPoint::new(9.0, 16.0, 25.0), &unit),
            50.0 / 3.0
        );
        assert_relative_eq!(
            moment_of_inertia(&RhoPoint::new(1.0, 1.0, 1.0), &m123),
            11.0 / 6.0,
            max_relative = 1e-15
        );
        let v = modified_volume(&RhoPoint::new(1.0, 1.0, 1.0), &unit);
        assert_eq!((v.pm, v.sm), (1.5, 3.0 / 16.0));
        let v = modified_volume(&RhoPoint::new(9.0, 16.0, 25.0), &m123);
        assert_relative_eq!(v.pm, 63.0 / 4.0);
        assert_relative_eq!(v.sm, 108.0);
        let v = modified_volume(
            &RhoPoint::new(0.0, 4.0, 4.0),
            &MassTriple::new(2.0, 2.0, 2.0).unwrap(),
        );
        assert_eq!((v.pm, v.sm), (2.0, 0.0));
    }

    #[test]
    fn unit_masses_reduce_to_volume_variables() {
        let rho = RhoPoint::new(2.3, 1.7, 3.1);
        let g = geo_from_rho(&rho);
        let v = modified_volume(&rho, &MassTriple::unit());
        assert_eq!(v.pm, g.p);
        assert_relative_eq!(v.sm, g.s, max_relative = 1e-15);
        assert_relative_eq!(
            g.p,
            1.5 * moment_of_inertia(&rho, &MassTriple::unit()),
            max_relative = 1e-15
        );
    }

    #[test]
    fn equilateral_locus() {
        for a in [0.3, 1.0, 7.5] {
            let g = geo_from_rho(&RhoPoint::new(a, a, a));
            assert_relative_eq!(12.0 * g.s, g.p * g.p, max_relative = 1e-15);
            assert_relative_eq!(27.0 * g.t, 8.0 * g.p.powi(3), max_relative = 1e-15);
        }
    }

    #[test]
    fn rejects_bad_masses() {
        assert!(MassTriple::new(1.0, 0.0, 1.0).is_err());
        assert!(MassTriple::new(1.0, -2.0, 1.0).is_err());
        assert!(MassTriple::new(f64::NAN, 1.0, 1.0).is_err());
    }
}
