//! Hamiltonian flows, Newton-form equations, canonical momentum transforms,
//! integration and invariant monitors.

pub mod integrators;

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use serde::Serialize;

pub use integrators::{solve, IntegratorSpec, Method, OdeSystem, SolveStats};

use crate::error::{Error, Result};
use crate::geometry::{
    area_sq_cayley_menger, geo_from_rho, geo_jacobian, mass_volume_chart,
    mass_volume_chart_jacobian, moment_of_inertia, rho_from_geo, shape_discriminant, GeoPoint,
    MassTriple, RhoPoint,
};
use crate::hamiltonians::{angular_terms, eval_H, HamiltonianSpec, PhaseState, Representation};
use crate::metrics::{
    classify_degeneracy, cometric_with_partials, quad3, DegeneracyClass, DEGENERACY_TOL,
};
use crate::potentials::{potential_and_gradient, PotentialSpec};

/// Hamilton's equations: `dq/dt = 2 G p (+ p_Omega c)`,
/// `dp/dt = -d/dq (p^T G p) - d/dq V_eff (- p_Omega d/dq (c . p))`.
pub fn flow_rhs(spec: &HamiltonianSpec, state: &PhaseState) -> Result<([f64; 3], [f64; 3])> {
    if spec.rep != state.rep {
        return Err(Error::RepresentationMismatch {
            expected: spec.rep,
            found: state.rep,
        });
    }
    let n = spec.rep.dim();
    let (g, dg) = cometric_with_partials(spec.rep, &state.q, &spec.masses)?;
    let (_, dv) = potential_and_gradient(&spec.potential, spec.rep, &state.q, &spec.masses)?;
    let p = Vector3::from(state.p);
    let gp = g * p;
    let mut qdot = [0.0; 3];
    let mut pdot = [0.0; 3];
    for i in 0..n {
        qdot[i] = 2.0 * gp[i];
        pdot[i] = -quad3(&dg[i], &state.p) - dv[i];
    }
    if spec.p_omega != 0.0 {
        let w = spec.p_omega;
        let ang = angular_terms(spec.rep, &state.q, &spec.masses, false);
        for i in 0..3 {
            qdot[i] += w * ang.linear[i].v;
            let lin: f64 = (0..3).map(|j| ang.linear[j].d[i] * state.p[j]).sum();
            pdot[i] -= w * lin + w * w * ang.effective.d[i];
        }
    }
    Ok((qdot, pdot))
}

/// `(P, S, T, dP/dt, dS/dt, dT/dt)`.
pub type GeoVelocityState = [f64; 6];

/// Second-order equations of motion in `(P, S, T)` for unit masses.
pub fn newton_rhs_geo(state: &GeoVelocityState, potential: &PotentialSpec) -> Result<[f64; 3]> {
    let [p, s, t, dp, ds, dt] = *state;
    let geo = GeoPoint::new(p, s, t);
    let d = 3.0 * p * s * shape_discriminant(&geo);
    let tol = DEGENERACY_TOL * p.abs().powi(9);
    if !(d.abs() > tol) {
        return Err(Error::DegenerateMetric { det: d, tol });
    }
    let (_, [vp, vs, vt]) = potential_and_gradient(
        potential,
        Representation::Geo,
        &[p, s, t],
        &MassTriple::unit(),
    )?;
    let p2 = p * p;
    let q = 4.0 * s + p2;

    let pdd = 3.0 / (2.0 * d)
        * (-4.0 * s * dp * dp * (4.0 * s * q * q - p * t * (12.0 * s + p2))
            + 3.0 * ds * ds * t * (48.0 * s * p + 4.0 * p2 * p - 27.0 * t)
            - 3.0 * s * dt * dt * (12.0 * s - p2)
            - 12.0 * s * ds * dp * t * (24.0 * s - 2.0 * p2)
            + dt * (6.0 * s * dp * (8.0 * s * q - 3.0 * p * t)
                - 12.0 * s * ds * (8.0 * s * p + 2.0 * p2 * p - 9.0 * t)))
        - 6.0 * (3.0 * t * vt + 2.0 * s * vs + p * vp);

    let sdd = 3.0 / (2.0 * d * p)
        * (ds
            * ds
            * (4.0 * p * t * (-72.0 * s * s + 30.0 * s * p2 + p2 * p2) - 16.0 * s * p2 * q * q
                + 27.0 * t * t * (6.0 * s - p2))
            + 6.0 * s * s * dt * dt * (12.0 * s - p2)
            + 8.0 * s * s * dp * dp * (4.0 * s * q * q - p * t * (12.0 * s + p2))
            + 2.0
                * s
                * ds
                * dp
                * (4.0 * t * (72.0 * s * s + 30.0 * s * p2 + p2 * p2)
                    - 16.0 * s * p * q * q
                    - 27.0 * p * t * t)
            + dt * (24.0 * s * s * ds * (8.0 * s * p + 2.0 * p2 * p - 9.0 * t)
                - 12.0 * s * s * dp * (8.0 * s * q - 3.0 * p * t)))
        - 2.0 * s * (4.0 * q * vt + p * vs + 6.0 * vp);

    let p3 = p2 * p;
    let p4 = p2 * p2;
    let p5 = p4 * p;
    let s2 = s * s;
    let tdd = 3.0 / (2.0 * d * p)
        * (8.0 * s * dp * dp * t * (96.0 * s2 * s - 48.0 * s2 * p2 + 14.0 * s * p4 - 3.0 * p3 * t)
            + ds * ds
                * t
                * (16.0 * p2 * (96.0 * s2 + 12.0 * s * p2 + p4) - 144.0 * p * t * (6.0 * s + p2)
                    + 243.0 * t * t)
            + s * dt
                * dt
                * (-192.0 * s2 * p + 12.0 * s * (8.0 * p3 + 9.0 * t) + 4.0 * p5 - 45.0 * p2 * t)
            - 8.0
                * s
                * ds
                * dp
                * t
                * (192.0 * s2 * p - 12.0 * s * (8.0 * p3 + 9.0 * t) - 4.0 * p5 + 45.0 * p2 * t)
            + dt * (16.0
                * s
                * dp
                * (32.0 * s2 * s * p
                    - 4.0 * s2 * (4.0 * p3 + 9.0 * t)
                    - 3.0 * s * p2 * (2.0 * p3 - 5.0 * t)
                    + p4 * t)
                - 4.0
                    * s
                    * ds
                    * (-6.0 * p * t * (36.0 * s + 13.0 * p2)
                        + 8.0 * p2 * q * (12.0 * s + p2)
                        + 81.0 * t * t)))
        - 2.0 * (4.0 * t * (12.0 * s + p2) * vt + 4.0 * s * q * vs + 9.0 * t * vp);

    Ok([pdd, sdd, tdd])
}

/// Velocities `dq/dt = 2 G p` (zero angular momentum).
pub fn velocities_from_momenta(
    rep: Representation,
    q: &[f64; 3],
    p: &[f64; 3],
    m: &MassTriple,
) -> Result<[f64; 3]> {
    let (g, _) = cometric_with_partials(rep, q, m)?;
    let v = g * Vector3::from(*p) * 2.0;
    Ok([v[0], v[1], v[2]])
}

/// Inverts `dq/dt = 2 G p` at zero angular momentum.
pub fn momenta_from_velocities(
    rep: Representation,
    q: &[f64; 3],
    qdot: &[f64; 3],
    m: &MassTriple,
) -> Result<[f64; 3]> {
    let n = rep.dim();
    let (g, _) = cometric_with_partials(rep, q, m)?;
    let block = DMatrix::from_fn(n, n, |i, j| g[(i, j)]);
    let det = block.determinant();
    let size = block.amax();
    let tol = 1e-14 * size.powi(n as i32);
    if !(det.abs() > tol) {
        return Err(Error::DegenerateMetric { det, tol });
    }
    let rhs = DVector::from_iterator(n, qdot[..n].iter().map(|v| 0.5 * v));
    let sol = block
        .lu()
        .solve(&rhs)
        .ok_or(Error::DegenerateMetric { det, tol })?;
    let mut p = [0.0; 3];
    p[..n].copy_from_slice(sol.as_slice());
    Ok(p)
}

/// Closed-form momenta conjugate to the side lengths at zero angular
/// momentum, the first component written out and the others obtained by
/// cyclic relabelling.
pub fn r_momenta_closed_form(r: &[f64; 3], rdot: &[f64; 3], m: &MassTriple) -> [f64; 3] {
    let rho = RhoPoint::new(r[0] * r[0], r[1] * r[1], r[2] * r[2]);
    let inertia = moment_of_inertia(&rho, m);
    let s = area_sq_cayley_menger(&rho).area_sq;
    let mu = m.mu();
    let first = |r: [f64; 3], v: [f64; 3], mu: [f64; 3]| {
        let [a, b, c] = r; // r12, r23, r31
        let [m12, m23, m31] = mu;
        let (a2, b2, c2) = (a * a, b * b, c * c);
        let t1 =
            4.0 * a2 * ((m12 * m23 + m12 * m31 + m23 * m31) * b2 * c2 + 4.0 * m12 * m12 * s) * v[0];
        let t2 = a
            * b
            * (2.0 * (m12 + m23) * m31 * (a2 + b2 - c2) * c2
                + m12 * m23 * ((a2 - b2).powi(2) - c2 * c2))
            * v[1];
        let t3 = a
            * c
            * (2.0 * (m12 + m31) * m23 * (a2 - b2 + c2) * b2
                + m12 * m31 * ((a2 - c2).powi(2) - b2 * b2))
            * v[2];
        (t1 - t2 - t3) / (16.0 * inertia * s)
    };
    let rot = |x: [f64; 3]| [x[1], x[2], x[0]];
    let p12 = first(*r, *rdot, mu);
    let p23 = first(rot(*r), rot(*rdot), rot(mu));
    let p31 = first(rot(rot(*r)), rot(rot(*rdot)), rot(rot(mu)));
    [p12, p23, p31]
}

/// Closed-form `P_T` in terms of geometrical velocities.
pub fn pt_from_velocities_closed_form(geo: &GeoPoint, vel: &[f64; 3]) -> f64 {
    let GeoPoint { p, s, t } = *geo;
    let d = 3.0 * p * s * shape_discriminant(geo);
    let q = p * p + 4.0 * s;
    3.0 * s / (2.0 * d)
        * (vel[0] * (8.0 * s * q - 3.0 * p * t)
            + vel[1] * (18.0 * t - 4.0 * p * q)
            + vel[2] * (p * p - 12.0 * s))
}

/// Closed-form `P_S` of the volume representation in terms of `(dP, dS)`.
pub fn ps_from_velocities_closed_form(p: f64, s: f64, dp: f64, ds: f64) -> f64 {
    (2.0 * dp * s - p * ds) / (2.0 * s * (12.0 * s - p * p))
}

fn mismatch(found: Representation, expected: Representation) -> Error {
    Error::RepresentationMismatch { expected, found }
}

fn singular_geo(geo: &GeoPoint) -> Option<Error> {
    let class = classify_degeneracy(geo);
    (class != DegeneracyClass::Regular)
        .then(|| Error::SingularJacobian(format!("{class:?} configuration")))
}

fn rho_to_geo(state: &PhaseState) -> Result<PhaseState> {
    let rho = RhoPoint::from_array(state.q);
    let geo = geo_from_rho(&rho);
    if let Some(e) = singular_geo(&geo) {
        return Err(e);
    }
    let jt = geo_jacobian(&rho).transpose();
    let pg = jt
        .lu()
        .solve(&Vector3::from(state.p))
        .ok_or_else(|| Error::SingularJacobian("geo jacobian".into()))?;
    Ok(PhaseState {
        rep: Representation::Geo,
        q: geo.as_array(),
        p: [pg[0], pg[1], pg[2]],
    })
}

fn geo_to_rho(state: &PhaseState) -> Result<PhaseState> {
    let geo = GeoPoint::new(state.q[0], state.q[1], state.q[2]);
    if let Some(e) = singular_geo(&geo) {
        return Err(e);
    }
    let rho = rho_from_geo(&geo)?.sorted;
    let pr = geo_jacobian(&rho).transpose() * Vector3::from(state.p);
    Ok(PhaseState {
        rep: Representation::Rho,
        q: rho.as_array(),
        p: [pr[0], pr[1], pr[2]],
    })
}

fn r_to_rho(state: &PhaseState) -> Result<PhaseState> {
    if let Some(index) = state.q.iter().position(|&r| r == 0.0) {
        return Err(Error::SingularJacobian(format!("side {index} vanishes")));
    }
    Ok(PhaseState {
        rep: Representation::Rho,
        q: state.q.map(|r| r * r),
        p: [0, 1, 2].map(|i| state.p[i] / (2.0 * state.q[i])),
    })
}

fn rho_to_r(state: &PhaseState) -> Result<PhaseState> {
    let r = state.q.map(f64::sqrt);
    if let Some(index) = r.iter().position(|&x| !(x > 0.0)) {
        return Err(Error::SingularJacobian(format!("side {index} vanishes")));
    }
    Ok(PhaseState {
        rep: Representation::R,
        q: r,
        p: [0, 1, 2].map(|i| 2.0 * r[i] * state.p[i]),
    })
}

/// Projects squared-distance momenta onto the span of the gradients of the
/// (mass-weighted) volume variables. Fails unless the state lies on the
/// invariant manifold where the complementary momentum vanishes.
fn rho_to_volume(state: &PhaseState, to: Representation, m: &MassTriple) -> Result<PhaseState> {
    let rho = RhoPoint::from_array(state.q);
    let j = mass_volume_chart_jacobian(&rho, m);
    let pr = Vector3::from(state.p);
    let jjt = j * j.transpose();
    let pv = jjt
        .lu()
        .solve(&(j * pr))
        .ok_or_else(|| Error::SingularJacobian("volume jacobian".into()))?;
    let residual = (j.transpose() * pv - pr).amax();
    if residual > 1e-9 * pr.amax().max(f64::MIN_POSITIVE) {
        return Err(Error::NotOnInvariantManifold(format!(
            "momentum component transverse to the volume variables is {residual:e}"
        )));
    }
    let vm = mass_volume_chart(&rho, m);
    Ok(PhaseState {
        rep: to,
        q: [vm.pm, vm.sm, 0.0],
        p: [pv[0], pv[1], 0.0],
    })
}

/// Drops the last active momentum when it does not contribute to the kinetic
/// energy (within `1e-10` relative).
fn drop_last(state: &PhaseState, to: Representation, m: &MassTriple) -> Result<PhaseState> {
    let n = state.rep.dim();
    let (g, _) = cometric_with_partials(state.rep, &state.q, m)?;
    let full = quad3(&g, &state.p);
    let mut reduced_p = state.p;
    reduced_p[n - 1] = 0.0;
    let reduced = quad3(&g, &reduced_p);
    if (full - reduced).abs() > 1e-10 * full.abs().max(f64::MIN_POSITIVE) && state.p[n - 1] != 0.0 {
        return Err(Error::NotOnInvariantManifold(format!(
            "momentum {} = {:e} is not zero",
            state.rep.momentum_names()[n - 1],
            state.p[n - 1]
        )));
    }
    let mut q = state.q;
    q[n - 1] = 0.0;
    Ok(PhaseState {
        rep: to,
        q,
        p: reduced_p,
    })
}

/// Point-transformation law `p_old = J^T p_new`, `J = d q_new / d q_old`.
pub fn momentum_transform(
    from: Representation,
    to: Representation,
    state: &PhaseState,
    m: &MassTriple,
) -> Result<PhaseState> {
    use Representation as R;
    if state.rep != from {
        return Err(mismatch(state.rep, from));
    }
    if from == to {
        return Ok(*state);
    }
    let unsupported = Error::UnsupportedTransform { from, to };
    match (from, to) {
        (R::R, R::Rho) => r_to_rho(state),
        (R::Rho, R::R) => rho_to_r(state),
        (R::Rho, R::Geo) => rho_to_geo(state),
        (R::Geo, R::Rho) => geo_to_rho(state),
        (R::R, R::Geo) => rho_to_geo(&r_to_rho(state)?),
        (R::Geo, R::R) => rho_to_r(&geo_to_rho(state)?),
        (R::Rho, R::Vol) if m.is_unit() => rho_to_volume(state, R::Vol, m),
        (R::Rho, R::VolM) => rho_to_volume(state, R::VolM, m),
        (R::R, R::Vol | R::VolM) => momentum_transform(R::Rho, to, &r_to_rho(state)?, m),
        (R::Geo, R::Vol) => drop_last(state, R::Vol, m),
        (R::Vol, R::POnly) => drop_last(state, R::POnly, m),
        (R::VolM, R::PmOnly) => drop_last(state, R::PmOnly, m),
        (R::Geo, R::POnly) => drop_last(&drop_last(state, R::Vol, m)?, R::POnly, m),
        _ => Err(unsupported),
    }
}

/// How a representation is laid out as a flat ODE state.
#[derive(Debug, Clone, Copy)]
enum Chart {
    /// `(q, p)` directly
    Direct(usize),
    /// `x = sqrt(P)`, `p_x = 2 x P_P`; regular through `P = 0`. The kinetic
    /// energy becomes `(3 k / 4) p_x^2`.
    SqrtP { k: f64 },
}

struct FlowSystem<'a> {
    spec: &'a HamiltonianSpec,
    chart: Chart,
}

impl<'a> FlowSystem<'a> {
    fn new(spec: &'a HamiltonianSpec) -> Self {
        let chart = match spec.rep {
            Representation::POnly => Chart::SqrtP { k: 1.0 },
            Representation::PmOnly => Chart::SqrtP {
                k: spec.masses.volume_factor(),
            },
            rep => Chart::Direct(rep.dim()),
        };
        Self { spec, chart }
    }

    fn to_flat(&self, s: &PhaseState) -> Result<Vec<f64>> {
        Ok(match self.chart {
            Chart::Direct(n) => s.q[..n].iter().chain(&s.p[..n]).copied().collect(),
            Chart::SqrtP { .. } => {
                if s.q[0] < 0.0 {
                    return Err(Error::InvalidParameter("P must be nonnegative".into()));
                }
                let x = s.q[0].sqrt();
                vec![x, 2.0 * x * s.p[0]]
            }
        })
    }

    fn from_flat(&self, y: &[f64]) -> PhaseState {
        let mut s = PhaseState {
            rep: self.spec.rep,
            q: [0.0; 3],
            p: [0.0; 3],
        };
        match self.chart {
            Chart::Direct(n) => {
                s.q[..n].copy_from_slice(&y[..n]);
                s.p[..n].copy_from_slice(&y[n..2 * n]);
            }
            Chart::SqrtP { .. } => {
                s.q[0] = y[0] * y[0];
                s.p[0] = y[1] / (2.0 * y[0]);
            }
        }
        s
    }

    fn energy(&self, y: &[f64]) -> Result<f64> {
        match self.chart {
            Chart::Direct(_) => eval_H(self.spec, &self.from_flat(y)),
            Chart::SqrtP { k } => {
                let (v, _) = potential_and_gradient(
                    &self.spec.potential,
                    self.spec.rep,
                    &[y[0] * y[0], 0.0, 0.0],
                    &self.spec.masses,
                )?;
                Ok(0.75 * k * y[1] * y[1] + v)
            }
        }
    }
}

impl OdeSystem for FlowSystem<'_> {
    fn dim(&self) -> usize {
        match self.chart {
            Chart::Direct(n) => 2 * n,
            Chart::SqrtP { .. } => 2,
        }
    }

    fn rhs(&self, _t: f64, y: &[f64], dy: &mut [f64]) -> Result<()> {
        match self.chart {
            Chart::Direct(n) => {
                let (qd, pd) = flow_rhs(self.spec, &self.from_flat(y))?;
                dy[..n].copy_from_slice(&qd[..n]);
                dy[n..].copy_from_slice(&pd[..n]);
            }
            Chart::SqrtP { k } => {
                let x = y[0];
                let (_, dv) = potential_and_gradient(
                    &self.spec.potential,
                    self.spec.rep,
                    &[x * x, 0.0, 0.0],
                    &self.spec.masses,
                )?;
                dy[0] = 1.5 * k * y[1];
                dy[1] = -2.0 * x * dv[0];
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub rep: Representation,
    pub times: Vec<f64>,
    pub states: Vec<PhaseState>,
    pub energy: Vec<f64>,
    /// Shape class at each sample where the representation determines it.
    pub degeneracy: Vec<Option<DegeneracyClass>>,
    /// Requested momentum components, `(index, series)`.
    pub tagged: Vec<(usize, Vec<f64>)>,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
}

impl Trajectory {
    /// `max |E(t) - E(0)|`, relative to `|E(0)|` when that is nonzero.
    pub fn max_energy_drift(&self) -> f64 {
        let e0 = self.energy[0];
        let scale = if e0 != 0.0 { e0.abs() } else { 1.0 };
        self.energy
            .iter()
            .map(|e| (e - e0).abs() / scale)
            .fold(0.0, f64::max)
    }

    pub fn final_state(&self) -> &PhaseState {
        self.states
            .last()
            .expect("trajectories hold the initial state")
    }
}

fn degeneracy_of(state: &PhaseState) -> Option<DegeneracyClass> {
    match state.rep {
        Representation::R => Some(classify_degeneracy(&geo_from_rho(&RhoPoint::from_array(
            state.q.map(|r| r * r),
        )))),
        Representation::Rho => Some(classify_degeneracy(&geo_from_rho(&RhoPoint::from_array(
            state.q,
        )))),
        Representation::Geo => Some(classify_degeneracy(&GeoPoint::new(
            state.q[0], state.q[1], state.q[2],
        ))),
        _ => None,
    }
}

fn run(
    spec: &HamiltonianSpec,
    state0: &PhaseState,
    t0: f64,
    targets: &[f64],
    integ: &IntegratorSpec,
    monitors: &[usize],
    record_all: bool,
) -> Result<Trajectory> {
    spec.validate()?;
    if spec.rep != state0.rep {
        return Err(mismatch(state0.rep, spec.rep));
    }
    if let Some(&bad) = monitors.iter().find(|&&i| i >= spec.rep.dim()) {
        return Err(Error::InvalidParameter(format!(
            "no momentum component {bad}"
        )));
    }
    let sys = FlowSystem::new(spec);
    let y0 = sys.to_flat(state0)?;
    let mut traj = Trajectory {
        rep: spec.rep,
        times: vec![],
        states: vec![],
        energy: vec![],
        degeneracy: vec![],
        tagged: monitors.iter().map(|&i| (i, vec![])).collect(),
        accepted_steps: 0,
        rejected_steps: 0,
    };
    let record = |t: f64, y: &[f64], traj: &mut Trajectory| -> Result<()> {
        let s = sys.from_flat(y);
        traj.times.push(t);
        traj.energy.push(sys.energy(y)?);
        traj.degeneracy.push(degeneracy_of(&s));
        for (i, series) in traj.tagged.iter_mut() {
            series.push(s.p[*i]);
        }
        traj.states.push(s);
        Ok(())
    };
    record(t0, &y0, &mut traj)?;
    let stats = solve(&sys, integ, &y0, t0, targets, &mut |t, y, hit| {
        if record_all || hit {
            record(t, y, &mut traj)?;
        }
        Ok(())
    })?;
    traj.accepted_steps = stats.accepted;
    traj.rejected_steps = stats.rejected;
    Ok(traj)
}

/// Integrates over `t_span`, sampling every accepted step.
pub fn integrate(
    spec: &HamiltonianSpec,
    state0: &PhaseState,
    t_span: (f64, f64),
    integ: &IntegratorSpec,
    monitors: &[usize],
) -> Result<Trajectory> {
    if !(t_span.1 > t_span.0) {
        return Err(Error::InvalidParameter("empty time span".into()));
    }
    run(spec, state0, t_span.0, &[t_span.1], integ, monitors, true)
}

/// Integrates from `grid[0]`, sampling exactly at the grid times (steps are
/// shortened to land on them).
pub fn integrate_on_grid(
    spec: &HamiltonianSpec,
    state0: &PhaseState,
    grid: &[f64],
    integ: &IntegratorSpec,
    monitors: &[usize],
) -> Result<Trajectory> {
    let (&t0, rest) = grid
        .split_first()
        .ok_or_else(|| Error::InvalidParameter("empty time grid".into()))?;
    run(spec, state0, t0, rest, integ, monitors, false)
}

/// `sup_t |p_index(t)|` over a trajectory.
pub fn invariant_manifold_monitor(trajectory: &Trajectory, index: usize) -> f64 {
    trajectory
        .states
        .iter()
        .map(|s| s.p[index].abs())
        .fold(0.0, f64::max)
}

struct GeoNewtonSystem<'a> {
    potential: &'a PotentialSpec,
}

impl OdeSystem for GeoNewtonSystem<'_> {
    fn dim(&self) -> usize {
        6
    }

    fn rhs(&self, _t: f64, y: &[f64], dy: &mut [f64]) -> Result<()> {
        let state: GeoVelocityState = y.try_into().expect("six components");
        let acc = newton_rhs_geo(&state, self.potential)?;
        dy[..3].copy_from_slice(&y[3..]);
        dy[3..].copy_from_slice(&acc);
        Ok(())
    }
}

/// Integrates the second-order geometrical equations, sampled on `grid`.
pub fn integrate_newton_geo(
    potential: &PotentialSpec,
    y0: &GeoVelocityState,
    grid: &[f64],
    integ: &IntegratorSpec,
) -> Result<Vec<GeoVelocityState>> {
    let (&t0, rest) = grid
        .split_first()
        .ok_or_else(|| Error::InvalidParameter("empty time grid".into()))?;
    let sys = GeoNewtonSystem { potential };
    let mut out = vec![*y0];
    solve(&sys, integ, y0, t0, rest, &mut |_, y, hit| {
        if hit {
            out.push(y.try_into().expect("six components"));
        }
        Ok(())
    })?;
    Ok(out)
}

/// Geometrical velocities of a flow state, `2 G p`.
pub fn geo_velocity_state(state: &PhaseState) -> Result<GeoVelocityState> {
    if state.rep != Representation::Geo {
        return Err(mismatch(state.rep, Representation::Geo));
    }
    let v = velocities_from_momenta(Representation::Geo, &state.q, &state.p, &MassTriple::unit())?;
    Ok([state.q[0], state.q[1], state.q[2], v[0], v[1], v[2]])
}

/// Second time derivative of the configuration along the flow,
/// `d/dt (2 G p) = 2 (dG . qdot) p + 2 G pdot`.
pub fn flow_acceleration(spec: &HamiltonianSpec, state: &PhaseState) -> Result<[f64; 3]> {
    let (qd, pd) = flow_rhs(spec, state)?;
    let (g, dg) = cometric_with_partials(spec.rep, &state.q, &spec.masses)?;
    let mut gdot = Matrix3::zeros();
    for (k, dgk) in dg.iter().enumerate() {
        gdot += dgk * qd[k];
    }
    let a = (gdot * Vector3::from(state.p) + g * Vector3::from(pd)) * 2.0;
    Ok([a[0], a[1], a[2]])
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn unit() -> MassTriple {
        MassTriple::unit()
    }

    fn spec(rep: Representation, potential: PotentialSpec) -> HamiltonianSpec {
        HamiltonianSpec::new(rep, unit(), potential, 0.0).unwrap()
    }

    #[test]
    fn free_rest_state_is_stationary() {
        for (rep, q) in [
            (Representation::R, [1.0, 1.2, 1.5]),
            (Representation::Rho, [1.0, 1.4, 2.0]),
            (Representation::Geo, [2.2, 0.3, 2.8]),
            (Representation::Vol, [2.0, 0.25, 0.0]),
        ] {
            let s = PhaseState {
                rep,
                q,
                p: [0.0; 3],
            };
            let (qd, pd) = flow_rhs(&spec(rep, PotentialSpec::free()), &s).unwrap();
            assert_eq!(qd, [0.0; 3]);
            assert_eq!(pd, [0.0; 3]);
        }
    }

    #[test]
    fn pt_evolution_matches_closed_form() {
        let h = spec(Representation::Geo, PotentialSpec::Lemniscate);
        let s = PhaseState {
            rep: Representation::Geo,
            q: [2.0, 0.3, 2.5],
            p: [0.4, -0.7, 0.2],
        };
        let (_, pd) = flow_rhs(&h, &s).unwrap();
        let [p, ss, t] = s.q;
        let [pp, _, pt] = s.p;
        let expected = -2.0 * pt * (9.0 * pp + 2.0 * pt * (12.0 * ss + p * p)) - 0.25 / t;
        assert_relative_eq!(pd[2], expected, max_relative = 1e-13);
        let h = spec(
            Representation::Geo,
            PotentialSpec::AnharmonicPS {
                a: 1.0,
                b: 0.0,
                c: 2.0,
            },
        );
        let s0 = PhaseState {
            p: [0.4, -0.7, 0.0],
            ..s
        };
        assert_eq!(flow_rhs(&h, &s0).unwrap().1[2], 0.0);
    }

    #[test]
    fn r_to_rho_momenta() {
        let s = PhaseState {
            rep: Representation::R,
            q: [2.0, 3.0, 4.0],
            p: [1.0, 1.0, 1.0],
        };
        let t = momentum_transform(Representation::R, Representation::Rho, &s, &unit()).unwrap();
        assert_eq!(t.q, [4.0, 9.0, 16.0]);
        assert_eq!(t.p, [0.25, 1.0 / 6.0, 0.125]);
        let same = momentum_transform(Representation::R, Representation::R, &s, &unit()).unwrap();
        assert_eq!(same, s);
        let back = momentum_transform(Representation::Rho, Representation::R, &t, &unit()).unwrap();
        for i in 0..3 {
            assert_relative_eq!(back.q[i], s.q[i], max_relative = 1e-15);
            assert_relative_eq!(back.p[i], s.p[i], max_relative = 1e-15);
        }
    }

    #[test]
    fn geo_round_trip_and_rejection() {
        let s = PhaseState {
            rep: Representation::Rho,
            q: [1.0, 1.7, 2.2],
            p: [0.3, -0.4, 0.25],
        };
        let g = momentum_transform(Representation::Rho, Representation::Geo, &s, &unit()).unwrap();
        let back =
            momentum_transform(Representation::Geo, Representation::Rho, &g, &unit()).unwrap();
        for i in 0..3 {
            assert_relative_eq!(back.q[i], s.q[i], max_relative = 1e-12);
            assert_relative_eq!(back.p[i], s.p[i], max_relative = 1e-12);
        }
        let collinear = PhaseState {
            q: [0.0, 4.0, 4.0],
            ..s
        };
        assert!(matches!(
            momentum_transform(
                Representation::Rho,
                Representation::Geo,
                &collinear,
                &unit()
            ),
            Err(Error::SingularJacobian(_))
        ));
    }

    #[test]
    fn velocity_inversion_closed_forms() {
        let rep = Representation::Geo;
        let q = [2.0, 0.3, 2.5];
        let v = [0.2, -0.1, 0.4];
        let p = momenta_from_velocities(rep, &q, &v, &unit()).unwrap();
        let pt = pt_from_velocities_closed_form(&GeoPoint::new(q[0], q[1], q[2]), &v);
        assert_relative_eq!(p[2], pt, max_relative = 1e-10);
        let p = momenta_from_velocities(
            Representation::Vol,
            &[2.0, 0.25, 0.0],
            &[0.3, 0.1, 0.0],
            &unit(),
        )
        .unwrap();
        assert_relative_eq!(
            p[1],
            ps_from_velocities_closed_form(2.0, 0.25, 0.3, 0.1),
            max_relative = 1e-12
        );
        assert_eq!(
            momenta_from_velocities(rep, &q, &[0.0; 3], &unit()).unwrap(),
            [0.0; 3]
        );
        assert!(matches!(
            momenta_from_velocities(Representation::Vol, &[1.5, 3.0 / 16.0, 0.0], &v, &unit()),
            Err(Error::DegenerateMetric { .. })
        ));
    }

    #[test]
    fn r_momenta_match_closed_form() {
        let m = MassTriple::new(1.0, 2.0, 3.0).unwrap();
        let r = [1.1, 1.4, 1.9];
        let rdot = [0.3, -0.2, 0.5];
        let p = momenta_from_velocities(Representation::R, &r, &rdot, &m).unwrap();
        let closed = r_momenta_closed_form(&r, &rdot, &m);
        for i in 0..3 {
            assert_relative_eq!(p[i], closed[i], max_relative = 1e-12);
        }
    }

    #[test]
    fn newton_form_matches_flow_acceleration() {
        for potential in [
            PotentialSpec::Lemniscate,
            PotentialSpec::AnharmonicPS {
                a: 1.0,
                b: 0.3,
                c: 0.7,
            },
            PotentialSpec::NewtonGravity { gamma: 1.0 },
        ] {
            let h = spec(Representation::Geo, potential.clone());
            let rho = RhoPoint::new(1.0, 1.7, 2.2);
            let geo = geo_from_rho(&rho);
            let s = PhaseState {
                rep: Representation::Geo,
                q: geo.as_array(),
                p: [0.4, -0.9, 0.15],
            };
            let flow = flow_acceleration(&h, &s).unwrap();
            let newton = newton_rhs_geo(&geo_velocity_state(&s).unwrap(), &potential).unwrap();
            for i in 0..3 {
                assert_relative_eq!(newton[i], flow[i], max_relative = 1e-9, epsilon = 1e-12);
            }
        }
        let err = newton_rhs_geo(
            &[4.5, 15.0 / 16.0, 16.0, 0.1, 0.0, 0.0],
            &PotentialSpec::Lemniscate,
        )
        .unwrap_err();
        assert!(matches!(err, Error::DegenerateMetric { .. }));
    }

    #[test]
    fn newton_form_at_rest_is_potential_only() {
        let a = 1.3;
        let pot = PotentialSpec::AnharmonicPS { a, b: 0.0, c: 0.0 };
        let geo = geo_from_rho(&RhoPoint::new(1.0, 1.7, 2.2));
        let acc = newton_rhs_geo(&[geo.p, geo.s, geo.t, 0.0, 0.0, 0.0], &pot).unwrap();
        assert_relative_eq!(acc[0], -6.0 * a * geo.p, max_relative = 1e-14);
    }

    #[test]
    fn free_particle_conserves_energy() {
        let h = spec(Representation::Vol, PotentialSpec::free());
        let s = PhaseState {
            rep: Representation::Vol,
            q: [2.0, 0.25, 0.0],
            p: [0.1, 0.05, 0.0],
        };
        let integ = IntegratorSpec::adaptive(1e-13, 1e-13);
        let tr = integrate(&h, &s, (0.0, 0.1), &integ, &[]).unwrap();
        assert!(tr.max_energy_drift() < 1e-12, "{}", tr.max_energy_drift());
        assert!(tr.times.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn harmonic_p_only_through_zero() {
        let a = 3.0;
        let h = spec(
            Representation::POnly,
            PotentialSpec::AnharmonicPS { a, b: 0.0, c: 0.0 },
        );
        let s = PhaseState::new(Representation::POnly, &[2.0], &[0.0]).unwrap();
        let grid: Vec<f64> = (0..=100).map(|i| i as f64 * 0.1).collect();
        let tr = integrate_on_grid(&h, &s, &grid, &IntegratorSpec::default(), &[]).unwrap();
        let w = (3.0 * a).sqrt();
        for (t, st) in tr.times.iter().zip(&tr.states) {
            assert!((st.q[0] - 2.0 * (w * t).cos().powi(2)).abs() < 1e-8);
        }
    }

    #[test]
    fn geo_to_vol_requires_zero_pt() {
        let s = PhaseState {
            rep: Representation::Geo,
            q: [2.0, 0.3, 2.5],
            p: [0.4, -0.7, 0.2],
        };
        assert!(matches!(
            momentum_transform(Representation::Geo, Representation::Vol, &s, &unit()),
            Err(Error::NotOnInvariantManifold(_))
        ));
        let s0 = PhaseState {
            p: [0.4, -0.7, 0.0],
            ..s
        };
        let v = momentum_transform(Representation::Geo, Representation::Vol, &s0, &unit()).unwrap();
        assert_eq!(v.q, [2.0, 0.3, 0.0]);
        assert!(matches!(
            momentum_transform(Representation::Vol, Representation::Geo, &v, &unit()),
            Err(Error::UnsupportedTransform { .. })
        ));
    }
}
