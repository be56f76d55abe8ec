//! Potential families with analytic gradients in every representation, and the
//! quartic satisfied by Newtonian gravity in geometrical variables.

use std::fmt;
use std::sync::Arc;

use nalgebra::{Complex, Matrix4};
use serde::{Deserialize, Serialize};
use twofloat::TwoFloat;

use crate::error::{Error, Result};
use crate::geometry::{
    geo_from_rho, geo_jacobian, mass_volume_chart, mass_volume_chart_jacobian, rho_from_geo,
    shape_discriminant, GeoPoint, MassTriple, RhoPoint,
};
use crate::hamiltonians::Representation;
use crate::metrics::{classify_degeneracy, DegeneracyClass};

const SQRT3: f64 = 1.732_050_807_568_877_2;

/// User function `U(z)` of the scale family `V = U(P / sqrt S) / sqrt S`,
/// returning `(U(z), U'(z))`.
#[derive(Clone)]
pub struct CustomScale(pub Arc<dyn Fn(f64) -> (f64, f64) + Send + Sync>);

impl fmt::Debug for CustomScale {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("CustomScale(..)")
    }
}

impl PartialEq for CustomScale {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.0, &other.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScaleFn {
    /// `U(z) = coeff * z^exponent`
    Power { coeff: f64, exponent: f64 },
    #[serde(skip)]
    Custom(CustomScale),
}

impl ScaleFn {
    pub fn custom(f: impl Fn(f64) -> (f64, f64) + Send + Sync + 'static) -> Self {
        Self::Custom(CustomScale(Arc::new(f)))
    }

    pub fn eval(&self, z: f64) -> (f64, f64) {
        match self {
            Self::Power { coeff, exponent } => {
                let v = coeff * z.powf(*exponent);
                let d = if *exponent == 0.0 {
                    0.0
                } else {
                    coeff * exponent * z.powf(exponent - 1.0)
                };
                (v, d)
            }
            Self::Custom(f) => (f.0)(z),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PotentialSpec {
    /// `-gamma * sum rho_ij^{-1/2}`
    NewtonGravity { gamma: f64 },
    /// `(gamma / 2) ln T`
    #[serde(rename = "log_gravity_2d")]
    LogGravity2D { gamma: f64 },
    /// `2 omega^2 (nu12 rho12 + nu13 rho31 + nu23 rho23)`
    HarmonicChain {
        omega: f64,
        nu12: f64,
        nu13: f64,
        nu23: f64,
    },
    /// `ln(T) / 4 - sqrt(3) P / 12`
    Lemniscate,
    /// `a P + b P^2 + c S`
    #[serde(rename = "anharmonic_ps")]
    AnharmonicPS {
        a: f64,
        b: f64,
        #[serde(default)]
        c: f64,
    },
    /// `U(P / sqrt S) / sqrt S`
    ScaleFamily { u: ScaleFn },
    /// `M / (3 m1 m2 m3) * inner(Pm, Sm)`; `inner` is evaluated with `(P, S)`
    /// replaced by the coordinates of [`mass_volume_chart`].
    VolumeMass {
        inner: Box<PotentialSpec>,
        masses: MassTriple,
    },
}

/// The variables a potential depends on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DependencyClass {
    RhoGeneral,
    Geo,
    Vol,
    POnly,
    VolM,
    PmOnly,
}

impl PotentialSpec {
    pub fn free() -> Self {
        Self::AnharmonicPS {
            a: 0.0,
            b: 0.0,
            c: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidParameter(msg.to_string()));
        match self {
            Self::NewtonGravity { gamma } if !(*gamma > 0.0 && gamma.is_finite()) => {
                bad("gravity requires gamma > 0")
            }
            Self::LogGravity2D { gamma } if !gamma.is_finite() => bad("gamma must be finite"),
            Self::HarmonicChain {
                omega,
                nu12,
                nu13,
                nu23,
            } => {
                if !(*omega > 0.0 && omega.is_finite()) {
                    bad("harmonic chain requires omega > 0")
                } else if [nu12, nu13, nu23]
                    .iter()
                    .any(|n| !(**n >= 0.0 && n.is_finite()))
                {
                    bad("spring constants must be nonnegative")
                } else {
                    Ok(())
                }
            }
            Self::AnharmonicPS { a, b, c } if ![a, b, c].iter().all(|x| x.is_finite()) => {
                bad("anharmonic coefficients must be finite")
            }
            Self::VolumeMass { inner, .. } => match inner.dependency() {
                DependencyClass::Vol | DependencyClass::POnly => inner.validate(),
                _ => bad("mass-weighted potential needs an inner potential of (P, S) only"),
            },
            _ => Ok(()),
        }
    }

    pub fn dependency(&self) -> DependencyClass {
        match self {
            Self::NewtonGravity { .. } => DependencyClass::RhoGeneral,
            Self::LogGravity2D { .. } | Self::Lemniscate => DependencyClass::Geo,
            Self::HarmonicChain {
                nu12, nu13, nu23, ..
            } => {
                if nu12 == nu13 && nu13 == nu23 {
                    DependencyClass::POnly
                } else {
                    DependencyClass::RhoGeneral
                }
            }
            Self::AnharmonicPS { c, .. } => {
                if *c == 0.0 {
                    DependencyClass::POnly
                } else {
                    DependencyClass::Vol
                }
            }
            Self::ScaleFamily { .. } => DependencyClass::Vol,
            Self::VolumeMass { inner, .. } => match inner.dependency() {
                DependencyClass::POnly => DependencyClass::PmOnly,
                _ => DependencyClass::VolM,
            },
        }
    }

    /// The mass-weighted wrapper at unit masses is its inner potential.
    fn unit_equivalent(&self) -> &PotentialSpec {
        match self {
            Self::VolumeMass { inner, masses } if masses.is_unit() => inner,
            other => other,
        }
    }

    /// Whether the potential can be evaluated from the coordinates of `rep`
    /// with masses `m`.
    pub fn check_supported(&self, rep: Representation, m: &MassTriple) -> Result<()> {
        use DependencyClass as D;
        let unit = self.unit_equivalent();
        let class = unit.dependency();
        let ok = match rep {
            Representation::R | Representation::Rho => true,
            Representation::Geo => {
                matches!(class, D::Geo | D::Vol | D::POnly)
                    || matches!(unit, Self::NewtonGravity { .. })
            }
            Representation::Vol => matches!(class, D::Vol | D::POnly),
            Representation::POnly => class == D::POnly,
            Representation::VolM | Representation::PmOnly => match self {
                Self::VolumeMass { inner, masses } if masses == m => {
                    rep == Representation::VolM || inner.dependency() == D::POnly
                }
                _ => false,
            },
        };
        if ok {
            Ok(())
        } else {
            Err(Error::UnsupportedPotential(rep))
        }
    }

    /// Value and `(dV/dP, dV/dS)` for potentials of the volume variables.
    fn volume_eval(&self, p: f64, s: f64) -> Result<(f64, f64, f64)> {
        match self {
            Self::AnharmonicPS { a, b, c } => {
                let cs = if *c == 0.0 { 0.0 } else { c * s };
                Ok((a * p + b * p * p + cs, a + 2.0 * b * p, *c))
            }
            Self::HarmonicChain { omega, nu12, .. }
                if self.dependency() == DependencyClass::POnly =>
            {
                let k = 4.0 * omega * omega * nu12;
                Ok((k * p, k, 0.0))
            }
            Self::ScaleFamily { u } => {
                if !(s > 0.0) {
                    return Err(Error::CollisionSingularity([p, s, f64::NAN]));
                }
                let rs = s.sqrt();
                let z = p / rs;
                let (uv, du) = u.eval(z);
                let v = uv / rs;
                let dp = du / s;
                let ds = -p * du / (2.0 * s * s) - uv / (2.0 * s * rs);
                Ok((v, dp, ds))
            }
            Self::VolumeMass { masses, .. } if masses.is_unit() => {
                self.unit_equivalent().volume_eval(p, s)
            }
            _ => Err(Error::UnsupportedPotential(Representation::Vol)),
        }
    }

    /// Value and gradient in `(P, S, T)`.
    fn geo_eval(&self, geo: &GeoPoint) -> Result<(f64, [f64; 3])> {
        let unit = self.unit_equivalent();
        match unit {
            Self::LogGravity2D { gamma } => {
                if !(geo.t > 0.0) {
                    return Err(Error::CollisionSingularity(geo.as_array()));
                }
                Ok((0.5 * gamma * geo.t.ln(), [0.0, 0.0, 0.5 * gamma / geo.t]))
            }
            Self::Lemniscate => {
                if !(geo.t > 0.0) {
                    return Err(Error::CollisionSingularity(geo.as_array()));
                }
                let v = 0.25 * geo.t.ln() - SQRT3 / 12.0 * geo.p;
                Ok((v, [-SQRT3 / 12.0, 0.0, 0.25 / geo.t]))
            }
            Self::NewtonGravity { .. } => {
                // through the ascending preimage; the gradient needs J^{-T}
                if classify_degeneracy(geo) != DegeneracyClass::Regular {
                    return Err(Error::SingularJacobian(format!(
                        "{:?} point has no regular squared-distance chart",
                        classify_degeneracy(geo)
                    )));
                }
                let rho = rho_from_geo(geo)?.sorted;
                let (v, g_rho) = unit.rho_eval(&rho)?;
                let jt = geo_jacobian(&rho).transpose();
                let g = jt
                    .lu()
                    .solve(&nalgebra::Vector3::from(g_rho))
                    .ok_or_else(|| Error::SingularJacobian("geo jacobian".into()))?;
                Ok((v, [g[0], g[1], g[2]]))
            }
            _ => {
                let (v, dp, ds) = unit.volume_eval(geo.p, geo.s)?;
                Ok((v, [dp, ds, 0.0]))
            }
        }
    }

    /// Value and gradient in `(rho12, rho23, rho31)`.
    fn rho_eval(&self, rho: &RhoPoint) -> Result<(f64, [f64; 3])> {
        match self {
            Self::NewtonGravity { gamma } => {
                let r = rho.as_array();
                if r.iter().any(|&x| !(x > 0.0)) {
                    return Err(Error::CollisionSingularity(r));
                }
                let mut v = 0.0;
                let mut g = [0.0; 3];
                for i in 0..3 {
                    let inv = 1.0 / r[i].sqrt();
                    v -= gamma * inv;
                    g[i] = 0.5 * gamma * inv / r[i];
                }
                Ok((v, g))
            }
            Self::LogGravity2D { gamma } => {
                let r = rho.as_array();
                if r.iter().any(|&x| !(x > 0.0)) {
                    return Err(Error::CollisionSingularity(r));
                }
                let v = 0.5 * gamma * (r[0].ln() + r[1].ln() + r[2].ln());
                Ok((v, r.map(|x| 0.5 * gamma / x)))
            }
            Self::HarmonicChain {
                omega,
                nu12,
                nu13,
                nu23,
            } => {
                let w = 2.0 * omega * omega;
                let v = w * (nu12 * rho.rho12 + nu13 * rho.rho31 + nu23 * rho.rho23);
                Ok((v, [w * nu12, w * nu23, w * nu13]))
            }
            Self::VolumeMass { inner, masses } => {
                let k = masses.volume_factor();
                let vm = mass_volume_chart(rho, masses);
                let (v, dp, ds) = inner.volume_eval(vm.pm, vm.sm)?;
                let j = mass_volume_chart_jacobian(rho, masses);
                let g = [0, 1, 2].map(|i| k * (j[(0, i)] * dp + j[(1, i)] * ds));
                Ok((k * v, g))
            }
            _ => {
                let geo = geo_from_rho(rho);
                let (v, gg) = self.geo_eval(&geo)?;
                let j = geo_jacobian(rho);
                let g =
                    [0, 1, 2].map(|i| j[(0, i)] * gg[0] + j[(1, i)] * gg[1] + j[(2, i)] * gg[2]);
                Ok((v, g))
            }
        }
    }
}

/// Potential energy at squared distances `point`. `VolumeMass` uses the masses
/// stored in the spec.
pub fn eval_potential(spec: &PotentialSpec, point: &RhoPoint, _m: &MassTriple) -> Result<f64> {
    Ok(spec.rho_eval(point)?.0)
}

/// Value and gradient of the potential in the coordinates of `rep`. Unused
/// coordinate slots of lower-dimensional representations are zero.
pub fn potential_and_gradient(
    spec: &PotentialSpec,
    rep: Representation,
    q: &[f64; 3],
    m: &MassTriple,
) -> Result<(f64, [f64; 3])> {
    spec.check_supported(rep, m)?;
    match rep {
        Representation::R => {
            let rho = RhoPoint::new(q[0] * q[0], q[1] * q[1], q[2] * q[2]);
            let (v, g) = spec.rho_eval(&rho)?;
            Ok((v, [2.0 * q[0] * g[0], 2.0 * q[1] * g[1], 2.0 * q[2] * g[2]]))
        }
        Representation::Rho => spec.rho_eval(&RhoPoint::from_array(*q)),
        Representation::Geo => spec.geo_eval(&GeoPoint::new(q[0], q[1], q[2])),
        Representation::Vol => {
            let (v, dp, ds) = spec.unit_equivalent().volume_eval(q[0], q[1])?;
            Ok((v, [dp, ds, 0.0]))
        }
        Representation::POnly => {
            let (v, dp, _) = spec.unit_equivalent().volume_eval(q[0], 0.0)?;
            Ok((v, [dp, 0.0, 0.0]))
        }
        Representation::VolM | Representation::PmOnly => {
            let PotentialSpec::VolumeMass { inner, masses } = spec else {
                return Err(Error::UnsupportedPotential(rep));
            };
            let k = masses.volume_factor();
            let s = if rep == Representation::VolM {
                q[1]
            } else {
                0.0
            };
            let (v, dp, ds) = inner.volume_eval(q[0], s)?;
            if rep == Representation::VolM {
                Ok((k * v, [k * dp, k * ds, 0.0]))
            } else {
                Ok((k * v, [k * dp, 0.0, 0.0]))
            }
        }
    }
}

pub fn grad_potential(
    spec: &PotentialSpec,
    rep: Representation,
    q: &[f64; 3],
    m: &MassTriple,
) -> Result<[f64; 3]> {
    Ok(potential_and_gradient(spec, rep, q, m)?.1)
}

/// Residual of `2 S dV/dS + P dV/dP + V` for `V = U(P / sqrt S) / sqrt S`.
pub fn scale_family_check(u: &ScaleFn, p: f64, s: f64) -> f64 {
    let spec = PotentialSpec::ScaleFamily { u: u.clone() };
    match spec.volume_eval(p, s) {
        Ok((v, dp, ds)) => 2.0 * s * ds + p * dp + v,
        Err(_) => f64::NAN,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Superintegrability {
    Maximal,
    Minimal,
    Generic,
}

pub fn superintegrability_class(
    m: &MassTriple,
    nu12: f64,
    nu13: f64,
    nu23: f64,
) -> Superintegrability {
    let eq = |a: f64, b: f64| (a - b).abs() <= 1e-12 * a.abs().max(b.abs());
    let [m1, m2, m3] = m.as_array();
    let holds = [
        eq(m2 * nu13, m3 * nu12),
        eq(m1 * nu23, m2 * nu13),
        eq(m3 * nu12, m1 * nu23),
    ]
    .iter()
    .filter(|&&b| b)
    .count();
    match holds {
        0 => Superintegrability::Generic,
        1 => Superintegrability::Minimal,
        _ => Superintegrability::Maximal,
    }
}

/// Which sign pattern of `gamma * rho_ij^{-1/2}` a quartic root reproduces.
/// `CoulombK` flips the sign of the term of the k-th pair of the ascending
/// preimage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum QuarticBranch {
    Gravity,
    Coulomb1,
    Coulomb2,
    Coulomb3,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuarticRoots {
    pub roots: [Complex<f64>; 4],
    /// Coefficients of `V^4, V^3, V^2, V, 1`.
    pub coefficients: [f64; 5],
    /// Branch of each root, when `(P, S, T)` has a physical preimage.
    pub branches: Option<[QuarticBranch; 4]>,
    /// `4096 gamma^12 T^8` times the shape discriminant.
    pub discriminant: f64,
    /// Discriminant evaluated from the coefficients.
    pub discriminant_from_coefficients: f64,
}

fn horner(c: &[f64], x: Complex<f64>) -> Complex<f64> {
    c.iter()
        .fold(Complex::new(0.0, 0.0), |acc, &ci| acc * x + ci)
}

fn derivative(c: &[f64]) -> Vec<f64> {
    let n = c.len() - 1;
    c[..n]
        .iter()
        .enumerate()
        .map(|(i, &ci)| ci * (n - i) as f64)
        .collect()
}

fn newton_polish(c: &[f64], x0: Complex<f64>, iters: usize) -> Complex<f64> {
    let dc = derivative(c);
    let mut x = x0;
    let mut fx = horner(c, x).norm();
    for _ in 0..iters {
        let d = horner(&dc, x);
        if d.norm() == 0.0 || fx == 0.0 {
            break;
        }
        let cand = x - horner(c, x) / d;
        let fc = horner(c, cand).norm();
        if fc < fx {
            x = cand;
            fx = fc;
        } else {
            break;
        }
    }
    x
}

/// Roots of a monic polynomial `c[0] = 1`, from companion eigenvalues.
/// Clusters of nearly equal eigenvalues that form a genuine multiple root are
/// replaced by the root of the matching derivative near the cluster mean.
fn monic_quartic_roots(c: &[f64; 5]) -> [Complex<f64>; 4] {
    let comp = Matrix4::new(
        0.0, 0.0, 0.0, -c[4], //
        1.0, 0.0, 0.0, -c[3], //
        0.0, 1.0, 0.0, -c[2], //
        0.0, 0.0, 1.0, -c[1],
    );
    let eig = comp.complex_eigenvalues();
    let mut roots: Vec<Complex<f64>> = eig.iter().copied().collect();
    roots.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));

    let scale = |x: Complex<f64>| {
        let ax = x.norm();
        c.iter()
            .enumerate()
            .map(|(i, ci)| ci.abs() * ax.powi(4 - i as i32))
            .sum::<f64>()
    };
    let mut assigned = [false; 4];
    let mut out = roots.clone();
    for i in 0..4 {
        if assigned[i] {
            continue;
        }
        let mut cluster = vec![i];
        for j in i + 1..4 {
            if !assigned[j]
                && cluster
                    .iter()
                    .any(|&k| (roots[k] - roots[j]).norm() < 1e-4 * (1.0 + roots[k].norm()))
            {
                cluster.push(j);
            }
        }
        for &k in &cluster {
            assigned[k] = true;
        }
        let k = cluster.len();
        let mut snapped = false;
        if k > 1 {
            let mean = cluster.iter().map(|&j| roots[j]).sum::<Complex<f64>>() / k as f64;
            let mut d = c.to_vec();
            for _ in 0..k - 1 {
                d = derivative(&d);
            }
            let x = newton_polish(&d, mean, 30);
            if horner(c, x).norm() <= 1e-13 * scale(x) {
                for &j in &cluster {
                    out[j] = x;
                }
                snapped = true;
            }
        }
        if !snapped {
            for &j in &cluster {
                out[j] = newton_polish(c, roots[j], 8);
            }
        }
    }
    for r in out.iter_mut() {
        if r.im.abs() <= 1e-12 * (1.0 + r.re.abs()) {
            r.im = 0.0;
        }
    }
    [out[0], out[1], out[2], out[3]]
}

/// Standard discriminant of `a x^4 + b x^3 + c x^2 + d x + e`.
fn quartic_discriminant(
    a: TwoFloat,
    b: TwoFloat,
    c: TwoFloat,
    d: TwoFloat,
    e: TwoFloat,
) -> TwoFloat {
    a.powi(3) * e.powi(3) * 256.0 - a * a * b * d * e * e * 192.0 - a * a * c * c * e * e * 128.0
        + a * a * c * d * d * e * 144.0
        - a * a * d.powi(4) * 27.0
        + a * b * b * c * e * e * 144.0
        - a * b * b * d * d * e * 6.0
        - a * b * c * c * d * e * 80.0
        + a * b * c * d.powi(3) * 18.0
        + a * c.powi(4) * e * 16.0
        - a * c.powi(3) * d * d * 4.0
        - b.powi(4) * e * e * 27.0
        + b.powi(3) * c * d * e * 18.0
        - b.powi(3) * d.powi(3) * 4.0
        - b * b * c.powi(3) * e * 4.0
        + b * b * c * c * d * d
}

/// Quartic coefficients formed, and the discriminant evaluated, in
/// double-double: the terms exceed the result by the inverse of the
/// relative shape discriminant, so rounding the coefficients to f64 already
/// costs digits.
fn quartic_discriminant_from_geo(p: f64, s: f64, t: f64, gamma: f64) -> f64 {
    let (p, s, t, g) = (
        TwoFloat::from(p),
        TwoFloat::from(s),
        TwoFloat::from(t),
        TwoFloat::from(gamma),
    );
    let q = s * 4.0 + p * p;
    let g2 = g * g;
    let zero = TwoFloat::from(0.0);
    f64::from(quartic_discriminant(
        t * t,
        zero,
        -(g2 * q * t * 2.0),
        g2 * g * t * t.sqrt() * 8.0,
        g2 * g2 * (q * q - t * p * 8.0),
    ))
}

/// Roots of `T^2 V^4 - 2 g^2 (4S + P^2) T V^2 + 8 g^3 T^{3/2} V + g^4 ((4S + P^2)^2 - 8TP) = 0`
/// using the positive branch of `sqrt T`.
pub fn newton_quartic_roots(geo: &GeoPoint, gamma: f64) -> Result<QuarticRoots> {
    let GeoPoint { p, s, t } = *geo;
    if !(t > 0.0) {
        return Err(Error::DegenerateQuartic(t));
    }
    if !(p > 0.0) || gamma == 0.0 {
        return Err(Error::InvalidParameter(
            "quartic needs P > 0 and nonzero gamma".into(),
        ));
    }
    let q = 4.0 * s + p * p;
    let g2 = gamma * gamma;
    let coefficients = [
        t * t,
        0.0,
        -2.0 * g2 * q * t,
        8.0 * g2 * gamma * t * t.sqrt(),
        g2 * g2 * (q * q - 8.0 * t * p),
    ];
    // V = gamma P u / sqrt(T) gives a quartic in u with O(1) coefficients
    let sigma = q / (p * p);
    let tau = t / (p * p * p);
    let monic = [1.0, 0.0, -2.0 * sigma, 8.0 * tau, sigma * sigma - 8.0 * tau];
    let u = monic_quartic_roots(&monic);
    let factor = gamma * p / t.sqrt();
    let roots = u.map(|x| x * factor);

    let discriminant_from_coefficients = quartic_discriminant_from_geo(p, s, t, gamma);
    let discriminant = 4096.0 * g2.powi(6) * t.powi(8) * shape_discriminant(geo);

    let branches = rho_from_geo(geo).ok().map(|pre| {
        let [r1, r2, r3] = pre.sorted.as_array().map(|x| gamma / x.sqrt());
        let expected = [
            (-(r1 + r2 + r3), QuarticBranch::Gravity),
            (-r1 + r2 + r3, QuarticBranch::Coulomb1),
            (r1 - r2 + r3, QuarticBranch::Coulomb2),
            (r1 + r2 - r3, QuarticBranch::Coulomb3),
        ];
        best_assignment(&roots, &expected)
    });

    Ok(QuarticRoots {
        roots,
        coefficients,
        branches,
        discriminant,
        discriminant_from_coefficients,
    })
}

fn best_assignment(
    roots: &[Complex<f64>; 4],
    expected: &[(f64, QuarticBranch); 4],
) -> [QuarticBranch; 4] {
    let mut best = (f64::INFINITY, [QuarticBranch::Gravity; 4]);
    let mut perm = [0usize, 1, 2, 3];
    permutations(&mut perm, 0, &mut |pm| {
        let err = (0..4)
            .map(|i| (roots[i] - expected[pm[i]].0).norm())
            .fold(0.0, f64::max);
        if err < best.0 {
            best = (err, pm.map(|j| expected[j].1));
        }
    });
    best.1
}

fn permutations(a: &mut [usize; 4], k: usize, f: &mut impl FnMut(&[usize; 4])) {
    if k == a.len() {
        f(a);
        return;
    }
    for i in k..a.len() {
        a.swap(k, i);
        permutations(a, k + 1, f);
        a.swap(k, i);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn unit() -> MassTriple {
        MassTriple::unit()
    }

    #[test]
    fn reference_values() {
        let rho = RhoPoint::new(1.0, 1.0, 1.0);
        let v =
            eval_potential(&PotentialSpec::NewtonGravity { gamma: 1.0 }, &rho, &unit()).unwrap();
        assert_eq!(v, -3.0);
        let v = eval_potential(&PotentialSpec::Lemniscate, &rho, &unit()).unwrap();
        assert_relative_eq!(v, -SQRT3 / 8.0, max_relative = 1e-15);
        let chain = PotentialSpec::HarmonicChain {
            omega: 1.0,
            nu12: 1.0,
            nu13: 1.0,
            nu23: 1.0,
        };
        let v = eval_potential(&chain, &RhoPoint::new(1.0, 2.0, 3.0), &unit()).unwrap();
        assert_eq!(v, 12.0);
        let err = eval_potential(
            &PotentialSpec::NewtonGravity { gamma: 1.0 },
            &RhoPoint::new(0.0, 1.0, 1.0),
            &unit(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::CollisionSingularity(_)));
    }

    #[test]
    fn volume_mass_scaling() {
        let m = MassTriple::new(1.0, 2.0, 3.0).unwrap();
        let spec = PotentialSpec::VolumeMass {
            inner: Box::new(PotentialSpec::AnharmonicPS {
                a: 1.0,
                b: 0.0,
                c: 2.0,
            }),
            masses: m,
        };
        let rho = RhoPoint::new(9.0, 16.0, 25.0);
        let v = eval_potential(&spec, &rho, &m).unwrap();
        // Pm = 63/4 and the chart area coordinate is S / 3 = 12
        assert_relative_eq!(v, (63.0 / 4.0 + 24.0) / 3.0, max_relative = 1e-14);
        let (vm, g) =
            potential_and_gradient(&spec, Representation::VolM, &[63.0 / 4.0, 12.0, 0.0], &m)
                .unwrap();
        assert_relative_eq!(vm, v, max_relative = 1e-14);
        assert_relative_eq!(g[0], 1.0 / 3.0, max_relative = 1e-15);
        assert_relative_eq!(g[1], 2.0 / 3.0, max_relative = 1e-15);
    }

    #[test]
    fn simple_gradients() {
        let spec = PotentialSpec::AnharmonicPS {
            a: 2.0,
            b: 0.5,
            c: 0.0,
        };
        let g = grad_potential(&spec, Representation::Vol, &[3.0, 1.0, 0.0], &unit()).unwrap();
        assert_eq!(g, [2.0 + 3.0, 0.0, 0.0]);
        let g = grad_potential(
            &PotentialSpec::NewtonGravity { gamma: 2.0 },
            Representation::Rho,
            &[4.0, 1.0, 9.0],
            &unit(),
        )
        .unwrap();
        assert_relative_eq!(g[0], 1.0 / 8.0);
        assert_relative_eq!(g[1], 1.0);
        assert_relative_eq!(g[2], 1.0 / 27.0);
    }

    #[test]
    fn support_matrix() {
        let m = MassTriple::unit();
        let newton = PotentialSpec::NewtonGravity { gamma: 1.0 };
        assert!(newton.check_supported(Representation::Geo, &m).is_ok());
        assert_eq!(
            newton.check_supported(Representation::Vol, &m),
            Err(Error::UnsupportedPotential(Representation::Vol))
        );
        assert!(PotentialSpec::Lemniscate
            .check_supported(Representation::Vol, &m)
            .is_err());
        let chain = PotentialSpec::HarmonicChain {
            omega: 1.0,
            nu12: 2.0,
            nu13: 2.0,
            nu23: 2.0,
        };
        assert!(chain.check_supported(Representation::POnly, &m).is_ok());
    }

    #[test]
    fn equilateral_quartic() {
        let q = newton_quartic_roots(&GeoPoint::new(1.5, 3.0 / 16.0, 1.0), 1.0).unwrap();
        let mut re: Vec<f64> = q.roots.iter().map(|r| r.re).collect();
        re.sort_by(f64::total_cmp);
        assert!((re[0] + 3.0).abs() < 1e-12, "{re:?}");
        for r in &re[1..] {
            assert!((r - 1.0).abs() < 1e-12, "{re:?}");
        }
        assert!(q.roots.iter().all(|r| r.im == 0.0));
        assert_eq!(q.coefficients, [1.0, 0.0, -6.0, 8.0, -3.0]);
        assert_eq!(q.discriminant, 0.0);
    }

    #[test]
    fn isosceles_quartic_discriminant_vanishes() {
        let q = newton_quartic_roots(&GeoPoint::new(4.5, 15.0 / 16.0, 16.0), 1.0).unwrap();
        assert_eq!(q.discriminant, 0.0);
        let scale = 4096.0 * 16f64.powi(8) * 4.5f64.powi(6);
        assert!(q.discriminant_from_coefficients.abs() < 1e-10 * scale);
    }

    #[test]
    fn quartic_matches_sign_patterns() {
        let rho = RhoPoint::new(2.0, 3.0, 4.5);
        let gamma = 1.7;
        let q = newton_quartic_roots(&geo_from_rho(&rho), gamma).unwrap();
        let a = rho.as_array().map(|x| gamma / x.sqrt());
        let branches = q.branches.unwrap();
        for (root, br) in q.roots.iter().zip(branches) {
            let want = match br {
                QuarticBranch::Gravity => -(a[0] + a[1] + a[2]),
                QuarticBranch::Coulomb1 => -a[0] + a[1] + a[2],
                QuarticBranch::Coulomb2 => a[0] - a[1] + a[2],
                QuarticBranch::Coulomb3 => a[0] + a[1] - a[2],
            };
            assert_relative_eq!(root.re, want, max_relative = 1e-12);
            assert_eq!(root.im, 0.0);
        }
        assert_relative_eq!(
            q.discriminant_from_coefficients,
            q.discriminant,
            max_relative = 1e-9
        );
        assert_eq!(
            newton_quartic_roots(&GeoPoint::new(1.0, 0.1, 0.0), 1.0).unwrap_err(),
            Error::DegenerateQuartic(0.0)
        );
    }

    #[test]
    fn scale_family_residuals() {
        for u in [
            ScaleFn::Power {
                coeff: -2.0,
                exponent: 1.0,
            },
            ScaleFn::Power {
                coeff: 1.0,
                exponent: 0.0,
            },
            ScaleFn::Power {
                coeff: 1.0,
                exponent: 2.0,
            },
            ScaleFn::custom(|z| (z.sin(), z.cos())),
        ] {
            assert!(scale_family_check(&u, 2.3, 0.4).abs() < 1e-13);
        }
        // V = -gamma P / S for U(z) = -gamma z
        let spec = PotentialSpec::ScaleFamily {
            u: ScaleFn::Power {
                coeff: -3.0,
                exponent: 1.0,
            },
        };
        let (v, _) =
            potential_and_gradient(&spec, Representation::Vol, &[2.0, 0.5, 0.0], &unit()).unwrap();
        assert_relative_eq!(v, -3.0 * 2.0 / 0.5, max_relative = 1e-15);
    }

    #[test]
    fn superintegrability() {
        let m = MassTriple::new(1.0, 2.0, 3.0).unwrap();
        assert_eq!(
            superintegrability_class(&m, 2.0, 3.0, 6.0),
            Superintegrability::Maximal
        );
        assert_eq!(
            superintegrability_class(&m, 2.0, 3.0, 1.0),
            Superintegrability::Minimal
        );
        assert_eq!(
            superintegrability_class(&MassTriple::unit(), 1.0, 2.0, 3.0),
            Superintegrability::Generic
        );
    }

    #[test]
    fn spec_round_trips_through_json() {
        let spec = PotentialSpec::VolumeMass {
            inner: Box::new(PotentialSpec::ScaleFamily {
                u: ScaleFn::Power {
                    coeff: 1.0,
                    exponent: 2.0,
                },
            }),
            masses: MassTriple::new(1.0, 2.0, 3.0).unwrap(),
        };
        let text = serde_json::to_string(&spec).unwrap();
        let back: PotentialSpec = serde_json::from_str(&text).unwrap();
        assert_eq!(back, spec);
        let custom = PotentialSpec::ScaleFamily {
            u: ScaleFn::custom(|z| (z, 1.0)),
        };
        assert!(serde_json::to_string(&custom).is_err());
    }
}
