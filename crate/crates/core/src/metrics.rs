//! Contravariant metrics (tensors of inertia) of the reduced kinetic energy.
//!
//! Every reduced Hamiltonian in this crate has the kinetic form `p^T G(q) p`
//! with no factor one half, so `G` is read off directly from the momentum
//! coefficients and Hamilton's equations give `dq/dt = 2 G p`.

use nalgebra::{Matrix2, Matrix3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{
    area_sq_cayley_menger, moment_of_inertia, rho_from_r, shape_discriminant, GeoPoint, MassTriple,
    ModifiedVolumePoint, RhoPoint,
};
use crate::hamiltonians::Representation;

/// Relative tolerance for degeneracy classification.
pub const DEGENERACY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Cometric3Tag {
    R,
    Rho,
    Geo,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Cometric2Tag {
    Vol,
    VolMass,
}

/// Symmetric 3x3 cometric together with its determinant evaluated through the
/// closed-form factorization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cometric3 {
    pub matrix: Matrix3<f64>,
    pub tag: Cometric3Tag,
    pub factorized_det: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cometric2 {
    pub matrix: Matrix2<f64>,
    pub tag: Cometric2Tag,
    pub factorized_det: f64,
}

impl Cometric3 {
    fn symmetric(
        tag: Cometric3Tag,
        diag: [f64; 3],
        g01: f64,
        g02: f64,
        g12: f64,
        det: f64,
    ) -> Self {
        Self {
            matrix: Matrix3::new(
                diag[0], g01, g02, //
                g01, diag[1], g12, //
                g02, g12, diag[2],
            ),
            tag,
            factorized_det: det,
        }
    }

    /// Determinant by direct expansion of the matrix entries.
    pub fn det(&self) -> f64 {
        det3(&self.matrix)
    }

    pub fn quadratic_form(&self, p: &[f64; 3]) -> f64 {
        quad3(&self.matrix, p)
    }
}

impl Cometric2 {
    fn symmetric(tag: Cometric2Tag, g00: f64, g01: f64, g11: f64, det: f64) -> Self {
        Self {
            matrix: Matrix2::new(g00, g01, g01, g11),
            tag,
            factorized_det: det,
        }
    }

    pub fn det(&self) -> f64 {
        let m = &self.matrix;
        m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)]
    }
}

pub(crate) fn det3(m: &Matrix3<f64>) -> f64 {
    m[(0, 0)] * (m[(1, 1)] * m[(2, 2)] - m[(1, 2)] * m[(2, 1)])
        - m[(0, 1)] * (m[(1, 0)] * m[(2, 2)] - m[(1, 2)] * m[(2, 0)])
        + m[(0, 2)] * (m[(1, 0)] * m[(2, 1)] - m[(1, 1)] * m[(2, 0)])
}

pub(crate) fn quad3(m: &Matrix3<f64>, p: &[f64; 3]) -> f64 {
    let mut acc = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            acc += p[i] * m[(i, j)] * p[j];
        }
    }
    acc
}

// (a^2 + b^2 - c^2) / (4 m a b) and its partials wrt (a, b, c)
fn cosine_entry(a: f64, b: f64, c: f64, m: f64) -> (f64, [f64; 3]) {
    let v = (a * a + b * b - c * c) / (4.0 * m * a * b);
    let da = (a * a - b * b + c * c) / (4.0 * m * a * a * b);
    let db = (b * b - a * a + c * c) / (4.0 * m * a * b * b);
    let dc = -c / (2.0 * m * a * b);
    (v, [da, db, dc])
}

/// Cometric of the side-length representation. Component order `(12, 23, 31)`.
pub fn cometric_r(r: [f64; 3], m: &MassTriple) -> Result<Cometric3> {
    if let Some(index) = r.iter().position(|&x| x == 0.0) {
        return Err(Error::BinaryCollision { index });
    }
    let [r12, r23, r31] = r;
    let red = m.pair_reduced();
    let (g01, _) = cosine_entry(r12, r23, r31, m.m2());
    let (g02, _) = cosine_entry(r12, r31, r23, m.m1());
    let (g12, _) = cosine_entry(r23, r31, r12, m.m3());
    let rho = rho_from_r(r12, r23, r31);
    let area_sq = area_sq_cayley_menger(&rho).area_sq;
    let mt = m.total();
    let det = mt * mt / (2.0 * m.product().powi(2)) * moment_of_inertia(&rho, m) * area_sq
        / (rho.rho12 * rho.rho23 * rho.rho31);
    Ok(Cometric3::symmetric(
        Cometric3Tag::R,
        [0.5 / red[0], 0.5 / red[1], 0.5 / red[2]],
        g01,
        g02,
        g12,
        det,
    ))
}

/// Partial derivatives of [`cometric_r`] with respect to `(r12, r23, r31)`.
pub fn cometric_r_partials(r: [f64; 3], m: &MassTriple) -> Result<[Matrix3<f64>; 3]> {
    if let Some(index) = r.iter().position(|&x| x == 0.0) {
        return Err(Error::BinaryCollision { index });
    }
    let [r12, r23, r31] = r;
    // each entry depends on its two adjacent sides and the opposite side
    let (_, d01) = cosine_entry(r12, r23, r31, m.m2()); // wrt (r12, r23, r31)
    let (_, d02) = cosine_entry(r12, r31, r23, m.m1()); // wrt (r12, r31, r23)
    let (_, d12) = cosine_entry(r23, r31, r12, m.m3()); // wrt (r23, r31, r12)
    let mut out = [Matrix3::zeros(); 3];
    let set = |mat: &mut Matrix3<f64>, i: usize, j: usize, v: f64| {
        mat[(i, j)] = v;
        mat[(j, i)] = v;
    };
    // wrt r12
    set(&mut out[0], 0, 1, d01[0]);
    set(&mut out[0], 0, 2, d02[0]);
    set(&mut out[0], 1, 2, d12[2]);
    // wrt r23
    set(&mut out[1], 0, 1, d01[1]);
    set(&mut out[1], 0, 2, d02[2]);
    set(&mut out[1], 1, 2, d12[0]);
    // wrt r31
    set(&mut out[2], 0, 1, d01[2]);
    set(&mut out[2], 0, 2, d02[1]);
    set(&mut out[2], 1, 2, d12[1]);
    Ok(out)
}

/// Cometric of the squared-distance representation; entries are linear in rho
/// and the metric stays regular at binary collisions.
pub fn cometric_rho(rho: &RhoPoint, m: &MassTriple) -> Cometric3 {
    let (a, b, c) = (rho.rho12, rho.rho23, rho.rho31);
    let red = m.pair_reduced();
    let [m1, m2, m3] = m.as_array();
    let area_sq = area_sq_cayley_menger(rho).area_sq;
    let det = 2.0 * m.total() / m.product().powi(2)
        * (m1 * m2 * a + m1 * m3 * c + m2 * m3 * b)
        * (16.0 * area_sq);
    Cometric3::symmetric(
        Cometric3Tag::Rho,
        [2.0 * a / red[0], 2.0 * b / red[1], 2.0 * c / red[2]],
        (a + b - c) / m2,
        (a + c - b) / m1,
        (b + c - a) / m3,
        det,
    )
}

/// Partials of [`cometric_rho`]; constant because the entries are linear.
pub fn cometric_rho_partials(m: &MassTriple) -> [Matrix3<f64>; 3] {
    let red = m.pair_reduced();
    let [m1, m2, m3] = m.as_array();
    let build = |diag: [f64; 3], s01: f64, s02: f64, s12: f64| {
        Matrix3::new(
            diag[0],
            s01 / m2,
            s02 / m1, //
            s01 / m2,
            diag[1],
            s12 / m3, //
            s02 / m1,
            s12 / m3,
            diag[2],
        )
    };
    [
        build([2.0 / red[0], 0.0, 0.0], 1.0, 1.0, -1.0),
        build([0.0, 2.0 / red[1], 0.0], 1.0, -1.0, 1.0),
        build([0.0, 0.0, 2.0 / red[2]], -1.0, 1.0, 1.0),
    ]
}

/// Cometric in geometrical variables `(P, S, T)`, unit masses.
pub fn cometric_geo(geo: &GeoPoint) -> Cometric3 {
    let GeoPoint { p, s, t } = *geo;
    let q = 4.0 * s + p * p;
    Cometric3::symmetric(
        Cometric3Tag::Geo,
        [3.0 * p, p * s, 4.0 * (12.0 * s + p * p) * t],
        6.0 * s,
        9.0 * t,
        4.0 * s * q,
        3.0 * p * s * shape_discriminant(geo),
    )
}

pub fn cometric_geo_partials(geo: &GeoPoint) -> [Matrix3<f64>; 3] {
    let GeoPoint { p, s, t } = *geo;
    let sym = |d: [f64; 3], g01: f64, g02: f64, g12: f64| {
        Matrix3::new(d[0], g01, g02, g01, d[1], g12, g02, g12, d[2])
    };
    [
        sym([3.0, s, 8.0 * p * t], 0.0, 0.0, 8.0 * s * p),
        sym([0.0, p, 48.0 * t], 6.0, 0.0, 32.0 * s + 4.0 * p * p),
        sym([0.0, 0.0, 4.0 * (12.0 * s + p * p)], 0.0, 9.0, 0.0),
    ]
}

/// Unit-mass volume cometric `[[3P, 6S], [6S, PS]]`.
pub fn cometric_vol(p: f64, s: f64) -> Cometric2 {
    Cometric2::symmetric(
        Cometric2Tag::Vol,
        3.0 * p,
        6.0 * s,
        p * s,
        3.0 * s * (p * p - 12.0 * s),
    )
}

/// Mass-weighted volume cometric, `M / (3 m1 m2 m3)` times the unit-mass form
/// in `(Pm, Sm)`.
pub fn cometric_vol_mass(vol: &ModifiedVolumePoint, m: &MassTriple) -> Cometric2 {
    let k = m.volume_factor();
    let ModifiedVolumePoint { pm, sm } = *vol;
    let mt = m.total();
    Cometric2::symmetric(
        Cometric2Tag::VolMass,
        k * 3.0 * pm,
        k * 6.0 * sm,
        k * pm * sm,
        mt * mt / (3.0 * m.product().powi(2)) * sm * (pm * pm - 12.0 * sm),
    )
}

/// Cometric of any representation at coordinates `q`, padded to 3x3 with
/// zeros, together with its coordinate partials (unused slots zero).
pub fn cometric_with_partials(
    rep: Representation,
    q: &[f64; 3],
    m: &MassTriple,
) -> Result<(Matrix3<f64>, [Matrix3<f64>; 3])> {
    let pad2 = |g: Matrix2<f64>| {
        let mut out = Matrix3::zeros();
        out.fixed_view_mut::<2, 2>(0, 0).copy_from(&g);
        out
    };
    Ok(match rep {
        Representation::R => (cometric_r(*q, m)?.matrix, cometric_r_partials(*q, m)?),
        Representation::Rho => (
            cometric_rho(&RhoPoint::from_array(*q), m).matrix,
            cometric_rho_partials(m),
        ),
        Representation::Geo => {
            let g = GeoPoint::new(q[0], q[1], q[2]);
            (cometric_geo(&g).matrix, cometric_geo_partials(&g))
        }
        Representation::Vol | Representation::VolM => {
            let k = if rep == Representation::VolM {
                m.volume_factor()
            } else {
                1.0
            };
            let g = cometric_vol(q[0], q[1]).matrix * k;
            let dp = Matrix2::new(3.0, 0.0, 0.0, q[1]) * k;
            let ds = Matrix2::new(0.0, 6.0, 6.0, q[0]) * k;
            (pad2(g), [pad2(dp), pad2(ds), Matrix3::zeros()])
        }
        Representation::POnly | Representation::PmOnly => {
            let k = if rep == Representation::PmOnly {
                m.volume_factor()
            } else {
                1.0
            };
            let mut g = Matrix3::zeros();
            g[(0, 0)] = 3.0 * k * q[0];
            let mut dp = Matrix3::zeros();
            dp[(0, 0)] = 3.0 * k;
            (g, [dp, Matrix3::zeros(), Matrix3::zeros()])
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DegeneracyClass {
    Regular,
    TripleCollision,
    Collinear,
    Isosceles,
}

/// Checked in order: triple collision, collinear, isosceles. The loci nest, so
/// the first hit wins.
pub fn classify_degeneracy(geo: &GeoPoint) -> DegeneracyClass {
    let GeoPoint { p, s, .. } = *geo;
    if p < DEGENERACY_TOL {
        DegeneracyClass::TripleCollision
    } else if s < DEGENERACY_TOL * p * p {
        DegeneracyClass::Collinear
    } else if shape_discriminant(geo) < DEGENERACY_TOL * p.powi(6) {
        DegeneracyClass::Isosceles
    } else {
        DegeneracyClass::Regular
    }
}

/// Scalar curvature of a two-dimensional metric `g_ij` from its first
/// (`dg[k][i][j] = d_k g_ij`) and second (`ddg[k][l][i][j]`) partials.
pub fn scalar_curvature_2d(
    g: &Matrix2<f64>,
    dg: &[Matrix2<f64>; 2],
    ddg: &[[Matrix2<f64>; 2]; 2],
) -> Option<f64> {
    let gi = g.try_inverse()?;
    // derivative of the inverse: d_k g^{-1} = -g^{-1} (d_k g) g^{-1}
    let dgi: [Matrix2<f64>; 2] = [-gi * dg[0] * gi, -gi * dg[1] * gi];
    // Christoffel symbols Gamma^a_bc and their partials
    let mut gam = [[[0.0; 2]; 2]; 2];
    let mut dgam = [[[[0.0; 2]; 2]; 2]; 2]; // [e][a][b][c]
    for a in 0..2 {
        for b in 0..2 {
            for c in 0..2 {
                let mut v = 0.0;
                for d in 0..2 {
                    let bracket = dg[c][(d, b)] + dg[b][(d, c)] - dg[d][(b, c)];
                    v += 0.5 * gi[(a, d)] * bracket;
                }
                gam[a][b][c] = v;
                for e in 0..2 {
                    let mut dv = 0.0;
                    for d in 0..2 {
                        let bracket = dg[c][(d, b)] + dg[b][(d, c)] - dg[d][(b, c)];
                        let dbracket = ddg[e][c][(d, b)] + ddg[e][b][(d, c)] - ddg[e][d][(b, c)];
                        dv += 0.5 * (dgi[e][(a, d)] * bracket + gi[(a, d)] * dbracket);
                    }
                    dgam[e][a][b][c] = dv;
                }
            }
        }
    }
    // Ricci R_bd = R^a_{bad}, R^a_{bcd} = d_c G^a_db - d_d G^a_cb + G^a_ce G^e_db - G^a_de G^e_cb
    let mut scalar = 0.0;
    for b in 0..2 {
        for d in 0..2 {
            let mut ric = 0.0;
            for a in 0..2 {
                let c = a;
                ric += dgam[c][a][d][b] - dgam[d][a][c][b];
                for e in 0..2 {
                    ric += gam[a][c][e] * gam[e][d][b] - gam[a][d][e] * gam[e][c][b];
                }
            }
            scalar += gi[(b, d)] * ric;
        }
    }
    Some(scalar)
}

/// Metric field on a 2D chart: value and coordinate partials.
pub(crate) type Metric2Field = dyn Fn(f64, f64) -> Matrix2<f64>;

/// Scalar curvature from central finite differences of a metric field with
/// step `h` (relative steps per coordinate are the caller's business).
pub fn scalar_curvature_2d_fd(metric: &Metric2Field, x: f64, y: f64, h: [f64; 2]) -> Option<f64> {
    let at = |dx: f64, dy: f64| metric(x + dx, y + dy);
    let g = at(0.0, 0.0);
    let dgx = (at(h[0], 0.0) - at(-h[0], 0.0)) / (2.0 * h[0]);
    let dgy = (at(0.0, h[1]) - at(0.0, -h[1])) / (2.0 * h[1]);
    let dxx = (at(h[0], 0.0) - g * 2.0 + at(-h[0], 0.0)) / (h[0] * h[0]);
    let dyy = (at(0.0, h[1]) - g * 2.0 + at(0.0, -h[1])) / (h[1] * h[1]);
    let dxy = (at(h[0], h[1]) - at(h[0], -h[1]) - at(-h[0], h[1]) + at(-h[0], -h[1]))
        / (4.0 * h[0] * h[1]);
    scalar_curvature_2d(&g, &[dgx, dgy], &[[dxx, dxy], [dxy, dyy]])
}

/// Curvature report for the unit-mass volume metric at `(P, S)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RicciReport {
    /// Scalar curvature of the kinetic-energy metric, the inverse of the
    /// volume cometric, from analytic partials.
    pub independent: f64,
    /// The closed form `3 S P (S - 3) / D_vol^2`.
    pub closed_form: f64,
    pub abs_difference: f64,
    /// Scalar curvature obtained when the cometric entries themselves are read
    /// as a covariant metric.
    pub cometric_as_metric: f64,
}

/// Kinetic metric `g = G^{-1}` of the volume chart and its analytic partials.
fn vol_inverse_metric(
    p: f64,
    s: f64,
) -> Option<(Matrix2<f64>, [Matrix2<f64>; 2], [[Matrix2<f64>; 2]; 2])> {
    let big_g = cometric_vol(p, s).matrix;
    let gi = big_g.try_inverse()?;
    let dg_co = [
        Matrix2::new(3.0, 0.0, 0.0, s),
        Matrix2::new(0.0, 6.0, 6.0, p),
    ];
    let mut dd_co = [[Matrix2::zeros(); 2]; 2];
    dd_co[0][1] = Matrix2::new(0.0, 0.0, 0.0, 1.0);
    dd_co[1][0] = dd_co[0][1];
    let d = [-gi * dg_co[0] * gi, -gi * dg_co[1] * gi];
    let mut dd = [[Matrix2::zeros(); 2]; 2];
    for k in 0..2 {
        for l in 0..2 {
            dd[k][l] = gi * dg_co[k] * gi * dg_co[l] * gi + gi * dg_co[l] * gi * dg_co[k] * gi
                - gi * dd_co[k][l] * gi;
        }
    }
    Some((gi, d, dd))
}

fn vol_cometric_as_metric(
    p: f64,
    s: f64,
) -> (Matrix2<f64>, [Matrix2<f64>; 2], [[Matrix2<f64>; 2]; 2]) {
    let g = cometric_vol(p, s).matrix;
    let d = [
        Matrix2::new(3.0, 0.0, 0.0, s),
        Matrix2::new(0.0, 6.0, 6.0, p),
    ];
    let mut dd = [[Matrix2::zeros(); 2]; 2];
    dd[0][1] = Matrix2::new(0.0, 0.0, 0.0, 1.0);
    dd[1][0] = dd[0][1];
    (g, d, dd)
}

pub fn ricci_scalar_vol(p: f64, s: f64) -> Result<RicciReport> {
    let d_vol = 3.0 * s * (p * p - 12.0 * s);
    let tol = DEGENERACY_TOL * p.powi(4);
    if !(d_vol.abs() > tol) {
        return Err(Error::DegenerateMetric { det: d_vol, tol });
    }
    let degenerate = || Error::DegenerateMetric { det: d_vol, tol };
    let (g, d, dd) = vol_inverse_metric(p, s).ok_or_else(degenerate)?;
    let independent = scalar_curvature_2d(&g, &d, &dd).ok_or_else(degenerate)?;
    let (g2, d2, dd2) = vol_cometric_as_metric(p, s);
    let cometric_as_metric = scalar_curvature_2d(&g2, &d2, &dd2).ok_or_else(degenerate)?;
    let closed_form = 3.0 * s * p * (s - 3.0) / (d_vol * d_vol);
    Ok(RicciReport {
        independent,
        closed_form,
        abs_difference: (independent - closed_form).abs(),
        cometric_as_metric,
    })
}

/// Same quantities as [`ricci_scalar_vol`] with metric derivatives replaced by
/// central differences of relative step `h`. Returns
/// `(independent, cometric_as_metric)`.
pub fn ricci_scalar_vol_fd(p: f64, s: f64, h: f64) -> Option<(f64, f64)> {
    let inv = |x: f64, y: f64| {
        cometric_vol(x, y)
            .matrix
            .try_inverse()
            .unwrap_or(Matrix2::zeros())
    };
    let co = |x: f64, y: f64| cometric_vol(x, y).matrix;
    let steps = [h * p.abs(), h * s.abs()];
    Some((
        scalar_curvature_2d_fd(&inv, p, s, steps)?,
        scalar_curvature_2d_fd(&co, p, s, steps)?,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::geo_from_rho;
    use approx::assert_relative_eq;

    #[test]
    fn r_metric_reference_values() {
        let unit = MassTriple::unit();
        let g = cometric_r([1.0, 1.0, 1.0], &unit).unwrap();
        assert_relative_eq!(g.matrix[(0, 0)], 1.0);
        assert_relative_eq!(g.matrix[(0, 1)], 0.25);
        assert_relative_eq!(g.det(), 27.0 / 32.0, max_relative = 1e-15);
        assert_relative_eq!(g.factorized_det, 27.0 / 32.0, max_relative = 1e-15);
        let g = cometric_r([3.0, 4.0, 5.0], &unit).unwrap();
        assert_relative_eq!(g.det(), 0.75, max_relative = 1e-14);
        assert_relative_eq!(g.factorized_det, 0.75, max_relative = 1e-14);
        assert_eq!(
            cometric_r([0.0, 1.0, 1.0], &unit).unwrap_err(),
            Error::BinaryCollision { index: 0 }
        );
    }

    #[test]
    fn rho_metric_reference_values() {
        let g = cometric_rho(&RhoPoint::new(1.0, 1.0, 1.0), &MassTriple::unit());
        let expected = Matrix3::new(4.0, 1.0, 1.0, 1.0, 4.0, 1.0, 1.0, 1.0, 4.0);
        assert_eq!(g.matrix, expected);
        assert_relative_eq!(g.det(), 54.0);
        assert_relative_eq!(g.factorized_det, 54.0);
        let g = cometric_rho(&RhoPoint::new(0.0, 4.0, 4.0), &MassTriple::unit());
        assert_eq!(g.factorized_det, 0.0);
        assert!(g.det().abs() < 1e-12);
        let g = cometric_rho(
            &RhoPoint::new(1.0, 1.0, 1.0),
            &MassTriple::new(1.0, 2.0, 3.0).unwrap(),
        );
        assert_relative_eq!(g.det(), 11.0, max_relative = 1e-14);
        assert_relative_eq!(g.factorized_det, 11.0, max_relative = 1e-14);
    }

    #[test]
    fn geo_metric_reference_values() {
        let g = cometric_geo(&GeoPoint::new(1.5, 3.0 / 16.0, 1.0));
        let expected = Matrix3::new(4.5, 1.125, 9.0, 1.125, 0.28125, 2.25, 9.0, 2.25, 18.0);
        assert_eq!(g.matrix, expected);
        assert_eq!(g.factorized_det, 0.0);
        assert!(g.det().abs() < 1e-12);
        let iso = geo_from_rho(&RhoPoint::new(4.0, 4.0, 1.0));
        assert_eq!(iso, GeoPoint::new(4.5, 15.0 / 16.0, 16.0));
        assert_eq!(shape_discriminant(&iso), 0.0);
        let g = cometric_geo(&iso);
        assert_eq!(g.factorized_det, 0.0);
        assert!(g.det().abs() < 1e-9);
        assert_eq!(
            cometric_geo(&GeoPoint::new(2.0, 0.0, 0.7)).factorized_det,
            0.0
        );
    }

    #[test]
    fn vol_metric_reference_values() {
        let g = cometric_vol(1.5, 3.0 / 16.0);
        assert_eq!(g.factorized_det, 0.0);
        let g = cometric_vol(2.0, 0.25);
        assert_eq!(g.matrix, Matrix2::new(6.0, 1.5, 1.5, 0.5));
        assert_relative_eq!(g.det(), 0.75);
        assert_relative_eq!(g.factorized_det, 0.75);
        let m = MassTriple::new(1.0, 2.0, 3.0).unwrap();
        let gm = cometric_vol_mass(&ModifiedVolumePoint { pm: 2.0, sm: 0.25 }, &m);
        assert_relative_eq!(gm.matrix, g.matrix / 3.0, max_relative = 1e-15);
        assert_relative_eq!(gm.det(), gm.factorized_det, max_relative = 1e-14);
    }

    #[test]
    fn vol_block_matches_geo_metric() {
        let geo = geo_from_rho(&RhoPoint::new(2.0, 3.0, 4.0));
        let g3 = cometric_geo(&geo).matrix;
        let g2 = cometric_vol(geo.p, geo.s).matrix;
        assert_eq!(g3[(0, 0)], g2[(0, 0)]);
        assert_eq!(g3[(0, 1)], g2[(0, 1)]);
        assert_eq!(g3[(1, 1)], g2[(1, 1)]);
    }

    #[test]
    fn curvature_report() {
        let err = ricci_scalar_vol(6.0, 3.0).unwrap_err();
        assert!(matches!(err, Error::DegenerateMetric { .. }));
        let rep = ricci_scalar_vol(2.0, 0.25).unwrap();
        assert_relative_eq!(rep.closed_form, -22.0 / 3.0, max_relative = 1e-14);
        // the kinetic metric of the volume chart is flat
        assert!(rep.independent.abs() < 1e-10, "{}", rep.independent);
        // reading the cometric entries as a covariant metric reproduces the closed form
        assert_relative_eq!(
            rep.cometric_as_metric,
            rep.closed_form,
            max_relative = 1e-12
        );
    }

    #[test]
    fn difference_scheme_converges_at_order_two() {
        let (p, s) = (1.5, 0.1);
        let rep = ricci_scalar_vol(p, s).unwrap();
        let errs: Vec<(f64, f64)> = [4e-3, 2e-3, 1e-3]
            .iter()
            .map(|&h| {
                let (a, b) = ricci_scalar_vol_fd(p, s, h).unwrap();
                (
                    (a - rep.independent).abs(),
                    (b - rep.cometric_as_metric).abs(),
                )
            })
            .collect();
        for w in errs.windows(2) {
            assert!(((w[0].0 / w[1].0).log2() - 2.0).abs() < 0.1);
        }
        // the cometric entries are quadratic, so their central differences are exact
        for e in &errs {
            assert!(e.1 < 1e-6 * rep.cometric_as_metric.abs());
        }
    }

    #[test]
    fn curvature_scales_inversely_with_metric() {
        let (g, d, dd) = vol_cometric_as_metric(2.0, 0.25);
        let base = scalar_curvature_2d(&g, &d, &dd).unwrap();
        let c = 3.7;
        let scaled = scalar_curvature_2d(
            &(g * c),
            &[d[0] * c, d[1] * c],
            &[[dd[0][0] * c, dd[0][1] * c], [dd[1][0] * c, dd[1][1] * c]],
        )
        .unwrap();
        assert_relative_eq!(scaled, base / c, max_relative = 1e-13);
    }

    #[test]
    fn sphere_has_curvature_two() {
        let metric = |th: f64, _ph: f64| Matrix2::new(1.0, 0.0, 0.0, th.sin().powi(2));
        let r = scalar_curvature_2d_fd(&metric, 0.9, 0.3, [1e-4, 1e-4]).unwrap();
        assert_relative_eq!(r, 2.0, max_relative = 1e-6);
    }

    #[test]
    fn classification() {
        assert_eq!(
            classify_degeneracy(&GeoPoint::new(0.0, 0.0, 0.0)),
            DegeneracyClass::TripleCollision
        );
        assert_eq!(
            classify_degeneracy(&GeoPoint::new(4.0, 0.0, 0.0)),
            DegeneracyClass::Collinear
        );
        assert_eq!(
            classify_degeneracy(&GeoPoint::new(4.5, 15.0 / 16.0, 16.0)),
            DegeneracyClass::Isosceles
        );
        assert_eq!(
            classify_degeneracy(&geo_from_rho(&RhoPoint::new(2.0, 3.0, 4.0))),
            DegeneracyClass::Regular
        );
    }

    #[test]
    fn mass_volume_chart_carries_the_volume_form() {
        use crate::geometry::{
            mass_volume_chart, mass_volume_chart_jacobian, modified_volume,
            modified_volume_jacobian,
        };
        let m = MassTriple::new(1.0, 2.0, 3.0).unwrap();
        let rho = RhoPoint::new(1.3, 1.7, 2.1);
        let g = cometric_rho(&rho, &m).matrix;
        let j = mass_volume_chart_jacobian(&rho, &m);
        let pushed = j * g * j.transpose();
        let expect = cometric_vol_mass(&mass_volume_chart(&rho, &m), &m).matrix;
        assert!((pushed - expect).amax() < 1e-14 * expect.amax());
        // with Sm = (3 m1 m2 m3 / M) S the (Sm, Sm) entry is off by (3 m1 m2 m3 / M)^2 = 9
        let j = modified_volume_jacobian(&rho, &m);
        let pushed = j * g * j.transpose();
        let printed = cometric_vol_mass(&modified_volume(&rho, &m), &m).matrix;
        assert_relative_eq!(pushed[(1, 1)], 9.0 * printed[(1, 1)], max_relative = 1e-13);
        assert_relative_eq!(pushed[(0, 1)], printed[(0, 1)], max_relative = 1e-13);
    }
}
