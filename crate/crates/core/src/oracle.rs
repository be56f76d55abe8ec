//! Cartesian three-body simulator in dimension `d >= 2`, used as ground truth
//! for the reduced flows.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::Serialize;

use crate::dynamics::{solve, IntegratorSpec, OdeSystem};
use crate::error::{Error, Result};
use crate::geometry::{
    geo_from_rho, mass_volume_chart, modified_volume, GeoPoint, MassTriple, ModifiedVolumePoint,
    RhoPoint,
};
use crate::hamiltonians::Representation;
use crate::metrics::{classify_degeneracy, DegeneracyClass};
use crate::potentials::{potential_and_gradient, PotentialSpec};

/// Body pairs in `(12, 23, 31)` order.
const PAIRS: [(usize, usize); 3] = [(0, 1), (1, 2), (2, 0)];

/// Positions and velocities of three bodies in `R^d`, stored body-major
/// (`x[i * d + a]`).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CartesianState {
    pub d: usize,
    pub x: Vec<f64>,
    pub v: Vec<f64>,
}

impl CartesianState {
    pub fn new(d: usize, x: Vec<f64>, v: Vec<f64>) -> Result<Self> {
        if d < 2 {
            return Err(Error::InvalidParameter(format!("dimension {d} < 2")));
        }
        if x.len() != 3 * d || v.len() != 3 * d {
            return Err(Error::InvalidParameter(format!(
                "expected {} position and velocity components",
                3 * d
            )));
        }
        Ok(Self { d, x, v })
    }

    pub fn position(&self, i: usize) -> &[f64] {
        &self.x[i * self.d..(i + 1) * self.d]
    }

    pub fn velocity(&self, i: usize) -> &[f64] {
        &self.v[i * self.d..(i + 1) * self.d]
    }

    pub fn rho(&self) -> RhoPoint {
        RhoPoint::from_array(PAIRS.map(|(i, j)| {
            self.position(i)
                .iter()
                .zip(self.position(j))
                .map(|(a, b)| (a - b) * (a - b))
                .sum()
        }))
    }

    /// `d rho_ij / dt = 2 (x_i - x_j) . (v_i - v_j)`.
    pub fn rho_dot(&self) -> [f64; 3] {
        PAIRS.map(|(i, j)| {
            (0..self.d)
                .map(|a| {
                    2.0 * (self.position(i)[a] - self.position(j)[a])
                        * (self.velocity(i)[a] - self.velocity(j)[a])
                })
                .sum()
        })
    }

    pub fn center_of_mass(&self, m: &MassTriple) -> Vec<f64> {
        let w = m.as_array();
        (0..self.d)
            .map(|a| (0..3).map(|i| w[i] * self.position(i)[a]).sum::<f64>() / m.total())
            .collect()
    }

    pub fn total_momentum(&self, m: &MassTriple) -> Vec<f64> {
        let w = m.as_array();
        (0..self.d)
            .map(|a| (0..3).map(|i| w[i] * self.velocity(i)[a]).sum())
            .collect()
    }

    /// Whether centre of mass and total momentum vanish to `1e-12` of the
    /// configuration scale.
    pub fn is_com_frame(&self, m: &MassTriple) -> bool {
        let xs = self.x.iter().fold(1.0_f64, |s, v| s.max(v.abs())) * m.total();
        let vs = self.v.iter().fold(1.0_f64, |s, v| s.max(v.abs())) * m.total();
        self.center_of_mass(m).iter().all(|c| c.abs() < 1e-12 * xs)
            && self.total_momentum(m).iter().all(|p| p.abs() < 1e-12 * vs)
    }

    /// Components `L_ab`, `a < b`, in lexicographic order.
    pub fn angular_momentum(&self, m: &MassTriple) -> Vec<f64> {
        let w = m.as_array();
        let mut out = Vec::with_capacity(self.d * (self.d - 1) / 2);
        for a in 0..self.d {
            for b in a + 1..self.d {
                out.push(
                    (0..3)
                        .map(|i| {
                            let (x, v) = (self.position(i), self.velocity(i));
                            w[i] * (x[a] * v[b] - x[b] * v[a])
                        })
                        .sum(),
                );
            }
        }
        out
    }

    pub fn kinetic_energy(&self, m: &MassTriple) -> f64 {
        let w = m.as_array();
        (0..3)
            .map(|i| 0.5 * w[i] * self.velocity(i).iter().map(|v| v * v).sum::<f64>())
            .sum()
    }

    /// Applies an orthogonal `d x d` matrix to every position and velocity.
    pub fn rotated(&self, q: &DMatrix<f64>) -> Self {
        let apply = |flat: &[f64]| -> Vec<f64> {
            (0..3)
                .flat_map(|i| {
                    let col = q * DVector::from_column_slice(&flat[i * self.d..(i + 1) * self.d]);
                    col.iter().copied().collect::<Vec<_>>()
                })
                .collect()
        };
        Self {
            d: self.d,
            x: apply(&self.x),
            v: apply(&self.v),
        }
    }
}

/// Haar-distributed rotation from the QR factorization of a Gaussian matrix.
pub fn random_rotation(d: usize, rng: &mut impl Rng) -> DMatrix<f64> {
    let g = DMatrix::from_fn(d, d, |_, _| {
        // Box-Muller
        let u1: f64 = 1.0 - rng.gen::<f64>();
        let u2: f64 = rng.gen();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    });
    let qr = g.qr();
    let (mut q, r) = (qr.q(), qr.r());
    for j in 0..d {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// Accelerations `a_i = -(1/m_i) sum_j 2 (x_i - x_j) dV/d rho_ij`, body-major.
pub fn cartesian_rhs(
    state: &CartesianState,
    potential: &PotentialSpec,
    m: &MassTriple,
) -> Result<Vec<f64>> {
    let rho = state.rho();
    let (_, grad) = potential_and_gradient(potential, Representation::Rho, &rho.as_array(), m)?;
    let d = state.d;
    let w = m.as_array();
    let mut acc = vec![0.0; 3 * d];
    for (k, &(i, j)) in PAIRS.iter().enumerate() {
        for a in 0..d {
            let f = 2.0 * (state.position(i)[a] - state.position(j)[a]) * grad[k];
            acc[i * d + a] -= f / w[i];
            acc[j * d + a] += f / w[j];
        }
    }
    Ok(acc)
}

/// Triangle with squared sides `rho0` placed in the `x_1 x_2` plane (body 1
/// and body 2 on the first axis, body 3 in the upper half plane, then shifted
/// to the centre of mass) with the minimal-norm velocities that give zero
/// total momentum, zero angular momentum and the requested `d rho / dt`.
#[allow(non_snake_case)]
pub fn zero_L_initial(
    rho0: &RhoPoint,
    rho_dot0: &[f64; 3],
    m: &MassTriple,
    d: usize,
) -> Result<CartesianState> {
    if d < 2 {
        return Err(Error::InvalidParameter(format!("dimension {d} < 2")));
    }
    if !rho0.is_physical() {
        return Err(Error::NoPhysicalPreimage {
            p: 0.5 * (rho0.rho12 + rho0.rho23 + rho0.rho31),
            s: crate::geometry::area_sq_cayley_menger(rho0).area_sq,
            t: rho0.rho12 * rho0.rho23 * rho0.rho31,
        });
    }
    let r12 = rho0.rho12.sqrt();
    if r12 == 0.0 {
        return Err(Error::Infeasible("bodies 1 and 2 coincide".into()));
    }
    let x3 = (rho0.rho12 + rho0.rho31 - rho0.rho23) / (2.0 * r12);
    let y3 = (rho0.rho31 - x3 * x3).max(0.0).sqrt();
    let mut x = vec![0.0; 3 * d];
    x[d] = r12;
    x[2 * d] = x3;
    x[2 * d + 1] = y3;
    let probe = CartesianState {
        d,
        x: x.clone(),
        v: vec![0.0; 3 * d],
    };
    let com = probe.center_of_mass(m);
    for i in 0..3 {
        for a in 0..d {
            x[i * d + a] -= com[a];
        }
    }

    let w = m.as_array();
    let n_rows = d + d * (d - 1) / 2 + 3;
    let mut a_mat = DMatrix::zeros(n_rows, 3 * d);
    let mut rhs = DVector::zeros(n_rows);
    let mut row = 0;
    for a in 0..d {
        for i in 0..3 {
            a_mat[(row, i * d + a)] = w[i];
        }
        row += 1;
    }
    for a in 0..d {
        for b in a + 1..d {
            for i in 0..3 {
                a_mat[(row, i * d + b)] += w[i] * x[i * d + a];
                a_mat[(row, i * d + a)] -= w[i] * x[i * d + b];
            }
            row += 1;
        }
    }
    for (k, &(i, j)) in PAIRS.iter().enumerate() {
        for a in 0..d {
            let e = 2.0 * (x[i * d + a] - x[j * d + a]);
            a_mat[(row, i * d + a)] += e;
            a_mat[(row, j * d + a)] -= e;
        }
        rhs[row] = rho_dot0[k];
        row += 1;
    }

    let scale = a_mat.amax();
    let svd = a_mat.clone().svd(true, true);
    let v = svd
        .solve(&rhs, 1e-12 * scale)
        .map_err(|e| Error::Infeasible(e.to_string()))?;
    let residual = (&a_mat * &v - &rhs).amax();
    if residual > 1e-10 * rhs.amax().max(1.0) {
        return Err(Error::Infeasible(format!(
            "rates incompatible with the configuration (residual {residual:e})"
        )));
    }
    CartesianState::new(d, x, v.iter().copied().collect())
}

struct CartesianSystem<'a> {
    d: usize,
    potential: &'a PotentialSpec,
    m: &'a MassTriple,
}

impl CartesianSystem<'_> {
    fn unpack(&self, y: &[f64]) -> CartesianState {
        let n = 3 * self.d;
        CartesianState {
            d: self.d,
            x: y[..n].to_vec(),
            v: y[n..].to_vec(),
        }
    }
}

impl OdeSystem for CartesianSystem<'_> {
    fn dim(&self) -> usize {
        6 * self.d
    }

    fn rhs(&self, _t: f64, y: &[f64], dy: &mut [f64]) -> Result<()> {
        let n = 3 * self.d;
        let acc = cartesian_rhs(&self.unpack(y), self.potential, self.m)?;
        dy[..n].copy_from_slice(&y[n..]);
        dy[n..].copy_from_slice(&acc);
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CartesianTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<CartesianState>,
}

/// Integrates Newton's equations from `grid[0]`, sampled on `grid`.
pub fn integrate_cartesian(
    state0: &CartesianState,
    potential: &PotentialSpec,
    m: &MassTriple,
    grid: &[f64],
    integ: &IntegratorSpec,
) -> Result<CartesianTrajectory> {
    potential.validate()?;
    let (&t0, rest) = grid
        .split_first()
        .ok_or_else(|| Error::InvalidParameter("empty time grid".into()))?;
    let sys = CartesianSystem {
        d: state0.d,
        potential,
        m,
    };
    let y0: Vec<f64> = state0.x.iter().chain(&state0.v).copied().collect();
    let mut traj = CartesianTrajectory {
        times: vec![t0],
        states: vec![state0.clone()],
    };
    solve(&sys, integ, &y0, t0, rest, &mut |t, y, hit| {
        if hit {
            traj.times.push(t);
            traj.states.push(sys.unpack(y));
        }
        Ok(())
    })?;
    Ok(traj)
}

/// Pointwise reduction of a Cartesian trajectory.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReducedSeries {
    pub times: Vec<f64>,
    pub rho: Vec<RhoPoint>,
    pub geo: Vec<GeoPoint>,
    pub modified_volume: Vec<ModifiedVolumePoint>,
    /// `(Pm, k S)`, see [`mass_volume_chart`].
    pub volume_chart: Vec<ModifiedVolumePoint>,
    pub angular_momentum: Vec<Vec<f64>>,
    pub energy: Vec<f64>,
    pub degeneracy: Vec<DegeneracyClass>,
}

impl ReducedSeries {
    pub fn max_angular_momentum(&self) -> f64 {
        self.angular_momentum
            .iter()
            .flatten()
            .fold(0.0, |a, l| a.max(l.abs()))
    }

    pub fn max_energy_drift(&self) -> f64 {
        let e0 = self.energy[0];
        let scale = if e0 != 0.0 { e0.abs() } else { 1.0 };
        self.energy
            .iter()
            .fold(0.0, |a, e| a.max((e - e0).abs() / scale))
    }
}

pub fn reduce_trajectory(
    traj: &CartesianTrajectory,
    m: &MassTriple,
    potential: &PotentialSpec,
) -> Result<ReducedSeries> {
    let mut out = ReducedSeries {
        times: traj.times.clone(),
        rho: vec![],
        geo: vec![],
        modified_volume: vec![],
        volume_chart: vec![],
        angular_momentum: vec![],
        energy: vec![],
        degeneracy: vec![],
    };
    for s in &traj.states {
        let rho = s.rho();
        let geo = geo_from_rho(&rho);
        let (v, _) = potential_and_gradient(potential, Representation::Rho, &rho.as_array(), m)?;
        out.rho.push(rho);
        out.geo.push(geo);
        out.modified_volume.push(modified_volume(&rho, m));
        out.volume_chart.push(mass_volume_chart(&rho, m));
        out.angular_momentum.push(s.angular_momentum(m));
        out.energy.push(s.kinetic_energy(m) + v);
        out.degeneracy.push(classify_degeneracy(&geo));
    }
    Ok(out)
}
