//! Reduced Hamiltonians `H = p^T G(q) p + V_eff(q)` in every representation.

use std::ops::{Add, Div, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::dynamics::momentum_transform;
use crate::error::{Error, Result};
use crate::geometry::MassTriple;
use crate::metrics::{cometric_with_partials, quad3};
use crate::potentials::{potential_and_gradient, PotentialSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Representation {
    /// side lengths `(r12, r23, r31)`
    R,
    /// squared side lengths
    Rho,
    /// `(P, S, T)`, unit masses
    Geo,
    /// `(P, S)`, unit masses
    Vol,
    /// `(Pm, Sm)`
    VolM,
    /// `P`, unit masses
    POnly,
    /// `Pm`
    PmOnly,
}

impl Representation {
    pub fn dim(self) -> usize {
        match self {
            Self::R | Self::Rho | Self::Geo => 3,
            Self::Vol | Self::VolM => 2,
            Self::POnly | Self::PmOnly => 1,
        }
    }

    pub fn coordinate_names(self) -> &'static [&'static str] {
        match self {
            Self::R => &["r12", "r23", "r31"],
            Self::Rho => &["rho12", "rho23", "rho31"],
            Self::Geo => &["P", "S", "T"],
            Self::Vol => &["P", "S"],
            Self::VolM => &["Pm", "Sm"],
            Self::POnly => &["P"],
            Self::PmOnly => &["Pm"],
        }
    }

    pub fn momentum_names(self) -> &'static [&'static str] {
        match self {
            Self::R => &["p12", "p23", "p31"],
            Self::Rho => &["P12", "P23", "P31"],
            Self::Geo => &["P_P", "P_S", "P_T"],
            Self::Vol => &["P_P", "P_S"],
            Self::VolM => &["P_Pm", "P_Sm"],
            Self::POnly => &["P_P"],
            Self::PmOnly => &["P_Pm"],
        }
    }

    /// Representations written for unit masses only.
    pub fn unit_mass_only(self) -> bool {
        matches!(self, Self::Geo | Self::Vol | Self::POnly)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HamiltonianSpec {
    pub rep: Representation,
    pub masses: MassTriple,
    pub potential: PotentialSpec,
    #[serde(default)]
    pub p_omega: f64,
}

impl HamiltonianSpec {
    pub fn new(
        rep: Representation,
        masses: MassTriple,
        potential: PotentialSpec,
        p_omega: f64,
    ) -> Result<Self> {
        let spec = Self {
            rep,
            masses,
            potential,
            p_omega,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.p_omega.is_finite() {
            return Err(Error::InvalidParameter("p_omega must be finite".into()));
        }
        if self.p_omega != 0.0 && !matches!(self.rep, Representation::R | Representation::Rho) {
            return Err(Error::AngularMomentumNotAllowed(self.rep));
        }
        if self.rep.unit_mass_only() && !self.masses.is_unit() {
            return Err(Error::InvalidParameter(format!(
                "{:?} representation is written for unit masses",
                self.rep
            )));
        }
        self.potential.validate()?;
        self.potential.check_supported(self.rep, &self.masses)
    }
}

/// Phase point; slots beyond `rep.dim()` are zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseState {
    pub rep: Representation,
    pub q: [f64; 3],
    pub p: [f64; 3],
}

impl PhaseState {
    pub fn new(rep: Representation, q: &[f64], p: &[f64]) -> Result<Self> {
        let n = rep.dim();
        if q.len() != n || p.len() != n {
            return Err(Error::InvalidParameter(format!(
                "{:?} needs {n} coordinates and {n} momenta",
                rep
            )));
        }
        let mut s = Self {
            rep,
            q: [0.0; 3],
            p: [0.0; 3],
        };
        s.q[..n].copy_from_slice(q);
        s.p[..n].copy_from_slice(p);
        Ok(s)
    }

    pub fn coords(&self) -> &[f64] {
        &self.q[..self.rep.dim()]
    }

    pub fn momenta(&self) -> &[f64] {
        &self.p[..self.rep.dim()]
    }
}

/// Forward-mode dual number carrying a gradient with respect to three
/// coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Dual3 {
    pub v: f64,
    pub d: [f64; 3],
}

impl Dual3 {
    pub fn constant(v: f64) -> Self {
        Self { v, d: [0.0; 3] }
    }

    pub fn variable(v: f64, i: usize) -> Self {
        let mut d = [0.0; 3];
        d[i] = 1.0;
        Self { v, d }
    }

    pub fn sqrt(self) -> Self {
        let s = self.v.sqrt();
        let f = 0.5 / s;
        Self {
            v: s,
            d: self.d.map(|x| x * f),
        }
    }

    fn scale(self, k: f64) -> Self {
        Self {
            v: self.v * k,
            d: self.d.map(|x| x * k),
        }
    }
}

impl Add for Dual3 {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self {
            v: self.v + o.v,
            d: [0, 1, 2].map(|i| self.d[i] + o.d[i]),
        }
    }
}

impl Sub for Dual3 {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self {
            v: self.v - o.v,
            d: [0, 1, 2].map(|i| self.d[i] - o.d[i]),
        }
    }
}

impl Mul for Dual3 {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        Self {
            v: self.v * o.v,
            d: [0, 1, 2].map(|i| self.d[i] * o.v + self.v * o.d[i]),
        }
    }
}

impl Div for Dual3 {
    type Output = Self;
    fn div(self, o: Self) -> Self {
        let inv = 1.0 / o.v;
        Self {
            v: self.v * inv,
            d: [0, 1, 2].map(|i| (self.d[i] * o.v - self.v * o.d[i]) * inv * inv),
        }
    }
}

impl Mul<f64> for Dual3 {
    type Output = Self;
    fn mul(self, k: f64) -> Self {
        self.scale(k)
    }
}

impl Neg for Dual3 {
    type Output = Self;
    fn neg(self) -> Self {
        self.scale(-1.0)
    }
}

/// Terms carried by a nonzero angular momentum `p_Omega` in the planar R and
/// Rho Hamiltonians: `H = p^T G p + p_Omega * c(q) . p + V + p_Omega^2 * w(q)`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct AngularTerms {
    pub linear: [Dual3; 3],
    pub effective: Dual3,
}

fn area(rho: [Dual3; 3]) -> Dual3 {
    let [a, b, c] = rho;
    let two = |x: Dual3, y: Dual3| (x * y) * 2.0;
    let s = (two(a, b) + two(a, c) + two(b, c) - a * a - b * b - c * c) * (1.0 / 16.0);
    s.sqrt()
}

/// Coefficients of the `p_Omega`-linear momentum terms as printed. With
/// `cyclic = true` the third coefficient is instead obtained by cyclically
/// relabelling the first one; the two agree only if the printed form is
/// cyclically consistent.
pub(crate) fn angular_terms(
    rep: Representation,
    q: &[f64; 3],
    m: &MassTriple,
    cyclic: bool,
) -> AngularTerms {
    let [m1, m2, m3] = m.as_array();
    let red = m.pair_reduced();
    let x = [0, 1, 2].map(|i| Dual3::variable(q[i], i));
    let rho = match rep {
        Representation::R => x.map(|r| r * r),
        _ => x,
    };
    let [r12, r23, r31] = rho; // squared sides
    let s_delta = area(rho);
    let c = |v: f64| Dual3::constant(v);
    let mut lin = [
        (c(m1) * r31 - c(m2) * r23) / (r23 * r31 * (m1 * m2)),
        (c(m2) * r12 - c(m3) * r31) / (r12 * r31 * (m2 * m3)),
        if cyclic {
            (c(m3) * r23 - c(m1) * r12) / (r12 * r23 * (m3 * m1))
        } else {
            (c(m3) * r23 - c(m1) * r12) / (r23 * r31 * (m1 * m3))
        },
    ];
    let prefactor = match rep {
        Representation::R => {
            // p_ij = 2 r_ij P_ij turns the squared-distance form into the side-length form
            for (l, r) in lin.iter_mut().zip(x) {
                *l = *l / r * 0.5;
            }
            4.0 / 3.0
        }
        _ => 4.0 / 3.0,
    };
    let linear = lin.map(|l| l * s_delta * prefactor);
    let effective = ((c(1.0) / (r12 * red[0]) + c(1.0) / (r23 * red[1]) + c(1.0) / (r31 * red[2]))
        - r12 / (r23 * r31 * (2.0 * m3))
        - r23 / (r12 * r31 * (2.0 * m1))
        - r31 / (r12 * r23 * (2.0 * m2)))
        * (1.0 / 9.0);
    AngularTerms { linear, effective }
}

fn check_rep(spec: &HamiltonianSpec, state: &PhaseState) -> Result<()> {
    if spec.rep != state.rep {
        return Err(Error::RepresentationMismatch {
            expected: spec.rep,
            found: state.rep,
        });
    }
    Ok(())
}

/// Kinetic energy `p^T G p`.
pub fn kinetic_energy(spec: &HamiltonianSpec, state: &PhaseState) -> Result<f64> {
    check_rep(spec, state)?;
    let (g, _) = cometric_with_partials(spec.rep, &state.q, &spec.masses)?;
    Ok(quad3(&g, &state.p))
}

#[allow(non_snake_case)]
pub fn eval_H(spec: &HamiltonianSpec, state: &PhaseState) -> Result<f64> {
    let kin = kinetic_energy(spec, state)?;
    let (v, _) = potential_and_gradient(&spec.potential, spec.rep, &state.q, &spec.masses)?;
    let mut h = kin + v;
    if spec.p_omega != 0.0 {
        let ang = angular_terms(spec.rep, &state.q, &spec.masses, false);
        let w = spec.p_omega;
        h += w * (0..3).map(|i| ang.linear[i].v * state.p[i]).sum::<f64>();
        h += w * w * ang.effective.v;
    }
    Ok(h)
}

/// Energy `A^2 k^2 / (B (1 - k^2)^2)` of the elliptic solution of
/// `3 P P_P^2 + A P + B P^2`.
#[allow(non_snake_case)]
pub fn eval_H_anharmonic_energy(a: f64, b: f64, k: f64) -> Result<f64> {
    if b == 0.0 {
        return Err(Error::DegenerateModulus(
            "B = 0 has no elliptic solution".into(),
        ));
    }
    if (k.abs() - 1.0).abs() == 0.0 {
        return Err(Error::DegenerateModulus(format!("|k| = 1 (k = {k})")));
    }
    let den = 1.0 - k * k;
    Ok(a * a * k * k / (b * den * den))
}

/// Energy `c1 A` of the trigonometric solution `c1 cos^2(sqrt(3A) t + c2)`.
pub fn harmonic_energy(c1: f64, a: f64) -> f64 {
    c1 * a
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConsistencyReport {
    pub energy_rho: f64,
    pub energy_r: f64,
    /// `None` when the geometrical transform is unavailable; see `geo_note`.
    pub energy_geo: Option<f64>,
    pub geo_note: Option<String>,
    pub max_rel_diff: f64,
    pub passed: bool,
    /// Printed minus cyclically relabelled coefficient of the third
    /// `p_Omega`-linear momentum term, at this state (squared-distance form).
    pub angular_cyclic_mismatch: f64,
}

/// Evaluates the same physical state in the Rho, R and (unit masses) Geo
/// representations.
pub fn consistency_check_representations(
    spec: &HamiltonianSpec,
    rho_state: &PhaseState,
) -> Result<ConsistencyReport> {
    check_rep(spec, rho_state)?;
    if spec.rep != Representation::Rho {
        return Err(Error::RepresentationMismatch {
            expected: Representation::Rho,
            found: spec.rep,
        });
    }
    let m = spec.masses;
    let energy_rho = eval_H(spec, rho_state)?;
    let r_state = momentum_transform(Representation::Rho, Representation::R, rho_state, &m)?;
    let r_spec = HamiltonianSpec {
        rep: Representation::R,
        ..spec.clone()
    };
    let energy_r = eval_H(&r_spec, &r_state)?;

    let (energy_geo, geo_note) = if !m.is_unit() {
        (
            None,
            Some("geometrical variables need unit masses".to_string()),
        )
    } else if spec.p_omega != 0.0 {
        (
            None,
            Some("geometrical variables need p_Omega = 0".to_string()),
        )
    } else {
        match momentum_transform(Representation::Rho, Representation::Geo, rho_state, &m) {
            Err(e) => (None, Some(e.to_string())),
            Ok(g_state) => {
                let g_spec = HamiltonianSpec {
                    rep: Representation::Geo,
                    ..spec.clone()
                };
                match eval_H(&g_spec, &g_state) {
                    Ok(e) => (Some(e), None),
                    Err(e) => (None, Some(e.to_string())),
                }
            }
        }
    };

    let mut all = vec![energy_rho, energy_r];
    all.extend(energy_geo);
    let scale = all
        .iter()
        .fold(0.0f64, |a, b| a.max(b.abs()))
        .max(f64::MIN_POSITIVE);
    let max_rel_diff = all
        .iter()
        .map(|e| (e - energy_rho).abs() / scale)
        .fold(0.0, f64::max);

    let printed = angular_terms(Representation::Rho, &rho_state.q, &m, false).linear[2].v;
    let cyclic = angular_terms(Representation::Rho, &rho_state.q, &m, true).linear[2].v;

    Ok(ConsistencyReport {
        energy_rho,
        energy_r,
        energy_geo,
        geo_note,
        max_rel_diff,
        passed: max_rel_diff <= 1e-12,
        angular_cyclic_mismatch: printed - cyclic,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn free(rep: Representation) -> HamiltonianSpec {
        HamiltonianSpec::new(rep, MassTriple::unit(), PotentialSpec::free(), 0.0).unwrap()
    }

    #[test]
    fn reference_energies() {
        let s = PhaseState::new(Representation::Rho, &[1.0, 1.0, 1.0], &[1.0, 0.0, 0.0]).unwrap();
        assert_eq!(eval_H(&free(Representation::Rho), &s).unwrap(), 4.0);
        let s = PhaseState::new(
            Representation::Geo,
            &[1.5, 3.0 / 16.0, 1.0],
            &[1.0, 0.0, 0.0],
        )
        .unwrap();
        assert_eq!(eval_H(&free(Representation::Geo), &s).unwrap(), 4.5);
        let spec = HamiltonianSpec::new(
            Representation::Vol,
            MassTriple::unit(),
            PotentialSpec::AnharmonicPS {
                a: 3.0,
                b: 0.0,
                c: 0.0,
            },
            0.0,
        )
        .unwrap();
        let s = PhaseState::new(Representation::Vol, &[2.0, 1.0], &[0.0, 0.0]).unwrap();
        assert_eq!(eval_H(&spec, &s).unwrap(), 6.0);
    }

    #[test]
    fn spec_validation() {
        let m = MassTriple::new(1.0, 2.0, 3.0).unwrap();
        assert_eq!(
            HamiltonianSpec::new(
                Representation::Geo,
                MassTriple::unit(),
                PotentialSpec::free(),
                1.0
            )
            .unwrap_err(),
            Error::AngularMomentumNotAllowed(Representation::Geo)
        );
        assert!(HamiltonianSpec::new(Representation::Geo, m, PotentialSpec::free(), 0.0).is_err());
        assert!(HamiltonianSpec::new(Representation::Rho, m, PotentialSpec::free(), 0.5).is_ok());
        let s = PhaseState::new(Representation::R, &[1.0, 1.0, 1.0], &[0.0; 3]).unwrap();
        assert_eq!(
            eval_H(&free(Representation::Rho), &s).unwrap_err(),
            Error::RepresentationMismatch {
                expected: Representation::Rho,
                found: Representation::R
            }
        );
    }

    #[test]
    fn anharmonic_energy() {
        assert_relative_eq!(eval_H_anharmonic_energy(1.0, 1.0, 0.5).unwrap(), 4.0 / 9.0);
        assert_eq!(eval_H_anharmonic_energy(2.0, 1.0, 0.0).unwrap(), 0.0);
        assert!(matches!(
            eval_H_anharmonic_energy(1.0, 1.0, -1.0),
            Err(Error::DegenerateModulus(_))
        ));
        assert!(eval_H_anharmonic_energy(1.0, 0.0, 0.5).is_err());
        assert_eq!(harmonic_energy(2.0, 3.0), 6.0);
    }

    #[test]
    fn angular_terms_agree_between_r_and_rho() {
        let m = MassTriple::new(1.0, 2.0, 3.0).unwrap();
        let rho_spec = HamiltonianSpec::new(
            Representation::Rho,
            m,
            PotentialSpec::HarmonicChain {
                omega: 1.0,
                nu12: 1.0,
                nu13: 2.0,
                nu23: 0.5,
            },
            0.7,
        )
        .unwrap();
        let s = PhaseState::new(Representation::Rho, &[2.0, 3.0, 4.0], &[0.3, -0.2, 0.5]).unwrap();
        let rep = consistency_check_representations(&rho_spec, &s).unwrap();
        assert!(rep.passed, "{rep:?}");
        assert!(rep.energy_geo.is_none());
        // the printed third coefficient is not the cyclic image of the first
        assert!(rep.angular_cyclic_mismatch.abs() > 1e-3);
    }

    #[test]
    fn zero_angular_momentum_drops_terms() {
        let m = MassTriple::new(1.0, 2.0, 3.0).unwrap();
        let mut spec =
            HamiltonianSpec::new(Representation::R, m, PotentialSpec::free(), 0.0).unwrap();
        let s = PhaseState::new(Representation::R, &[1.2, 1.5, 1.9], &[0.3, -0.2, 0.5]).unwrap();
        let h0 = eval_H(&spec, &s).unwrap();
        assert_eq!(h0, kinetic_energy(&spec, &s).unwrap());
        spec.p_omega = 0.4;
        assert_ne!(eval_H(&spec, &s).unwrap(), h0);
    }

    #[test]
    fn dual_numbers_differentiate() {
        let x = Dual3::variable(2.0, 0);
        let y = Dual3::variable(3.0, 1);
        let f = (x * y - Dual3::constant(1.0)) / (x + y).sqrt();
        let h = 1e-6;
        let g = |a: f64, b: f64| (a * b - 1.0) / (a + b).sqrt();
        assert_relative_eq!(
            f.d[0],
            (g(2.0 + h, 3.0) - g(2.0 - h, 3.0)) / (2.0 * h),
            max_relative = 1e-8
        );
        assert_relative_eq!(
            f.d[1],
            (g(2.0, 3.0 + h) - g(2.0, 3.0 - h)) / (2.0 * h),
            max_relative = 1e-8
        );
        assert_eq!(f.d[2], 0.0);
    }
}
