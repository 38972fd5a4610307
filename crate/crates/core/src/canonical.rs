//! General two-field problems, their equivalence group and the canonical form.
//!
//! A problem is `(I, l, A, C)`: inertia tensor, gyrostatic momentum, the 3x2
//! matrix whose columns are the two application points, and the 2x2 Gram
//! matrix of the field intensities. A state is `(omega, U)` with `U` the 3x2
//! matrix of field vectors.

use nalgebra::{Matrix2, Matrix3, Matrix3x2, SymmetricEigen, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::phase::Params;

/// Relative gap `|a - b| / a` below which the canonical problem is reported
/// as reducible.
pub const REDUCIBLE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DGParams {
    pub inertia: Matrix3<f64>,
    pub gyro: Vector3<f64>,
    pub a: Matrix3x2<f64>,
    pub c: Matrix2<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroupElement {
    pub lambda: Matrix3<f64>,
    pub d: Matrix2<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Canonical {
    pub group: GroupElement,
    pub problem: DGParams,
    pub a: f64,
    pub b: f64,
    /// Third body component of the transformed gyrostatic momentum.
    pub lambda: f64,
    pub reducible: bool,
}

impl Canonical {
    /// Canonical parameters; fails for the reducible case `a = b`.
    pub fn params(&self) -> Result<Params> {
        Params::new(self.a, self.b, self.lambda)
    }
}

impl GroupElement {
    pub fn identity() -> Self {
        GroupElement { lambda: Matrix3::identity(), d: Matrix2::identity() }
    }

    pub fn compose(&self, other: &GroupElement) -> GroupElement {
        GroupElement { lambda: self.lambda * other.lambda, d: self.d * other.d }
    }

    pub fn inverse(&self) -> Result<GroupElement> {
        let d = self.d.try_inverse().ok_or(Error::SingularD)?;
        Ok(GroupElement { lambda: self.lambda.transpose(), d })
    }
}

/// `sum_i c_i(A) x c_i(B)` over the two columns.
pub fn col_cross(a: &Matrix3x2<f64>, b: &Matrix3x2<f64>) -> Vector3<f64> {
    a.column(0).cross(&b.column(0)) + a.column(1).cross(&b.column(1))
}

/// Column-wise cross product `v x A`.
pub fn vec_cross_mat(v: &Vector3<f64>, a: &Matrix3x2<f64>) -> Matrix3x2<f64> {
    Matrix3x2::from_columns(&[v.cross(&a.column(0)), v.cross(&a.column(1))])
}

/// `(omega, U) -> (Lambda omega, Lambda U D^T)`.
pub fn act(g: &GroupElement, omega: &Vector3<f64>, u: &Matrix3x2<f64>) -> (Vector3<f64>, Matrix3x2<f64>) {
    (g.lambda * omega, g.lambda * u * g.d.transpose())
}

/// `(I, l, A, C) -> (Lambda I Lambda^T, Lambda l, Lambda A D^-1, D C D^T)`.
pub fn act_params(g: &GroupElement, p: &DGParams) -> Result<DGParams> {
    let d_inv = g.d.try_inverse().ok_or(Error::SingularD)?;
    Ok(DGParams {
        inertia: g.lambda * p.inertia * g.lambda.transpose(),
        gyro: g.lambda * p.gyro,
        a: g.lambda * p.a * d_inv,
        c: g.d * p.c * g.d.transpose(),
    })
}

/// Equations of motion of a general problem:
/// `I omega' = (I omega + l) x omega + A x U`, `U' = U x omega`.
pub fn field_dg(p: &DGParams, omega: &Vector3<f64>, u: &Matrix3x2<f64>) -> Result<(Vector3<f64>, Matrix3x2<f64>)> {
    let inv = p.inertia.try_inverse().ok_or_else(|| Error::InvalidParams("singular inertia tensor".into()))?;
    let m = p.inertia * omega + p.gyro;
    let domega = inv * (m.cross(omega) + col_cross(&p.a, u));
    let du = -vec_cross_mat(omega, u);
    Ok((domega, du))
}

impl DGParams {
    /// The normalized problem with inertia `diag(2, 2, 1)`, `l = lambda e3`,
    /// application points `e1, e2` and orthogonal intensities `a, b`.
    pub fn kowalevski(params: &Params) -> Self {
        DGParams {
            inertia: Matrix3::from_diagonal(&Vector3::new(2.0, 2.0, 1.0)),
            gyro: Vector3::new(0.0, 0.0, params.lambda),
            a: Matrix3x2::new(1.0, 0.0, 0.0, 1.0, 0.0, 0.0),
            c: Matrix2::new(params.a * params.a, 0.0, 0.0, params.b * params.b),
        }
    }
}

/// Orthogonalizing group element and canonical intensities `a >= b > 0`.
///
/// `D` simultaneously reduces `(A^T A)^-1` to the identity and `C` to
/// `diag(a^2, b^2)`; `Lambda` sends the orthonormal columns of `A D^-1` to
/// `e1, e2` and has determinant one.
pub fn canonicalize(p: &DGParams) -> Result<Canonical> {
    let sv = p.a.singular_values();
    let (smax, smin) = (sv.max(), sv.min());
    if !(smax > 0.0) || smin <= 1e-12 * smax {
        return Err(Error::DependentFields(format!("rank A < 2 (singular values {smax:.3e}, {smin:.3e})")));
    }
    if (p.c - p.c.transpose()).norm() > 1e-12 * p.c.norm().max(1.0) {
        return Err(Error::DependentFields("C is not symmetric".into()));
    }
    let c_eig = SymmetricEigen::new(p.c).eigenvalues;
    if !(c_eig.min() > 1e-14 * c_eig.max().abs().max(1.0)) {
        return Err(Error::DependentFields("C is not positive definite".into()));
    }
    let ata = p.a.transpose() * p.a;
    let a_star = ata.try_inverse().ok_or(Error::SingularD)?;
    let chol = a_star.cholesky().ok_or_else(|| Error::DependentFields("A^T A is not positive definite".into()))?;
    let d0 = chol.l().try_inverse().ok_or(Error::SingularD)?;
    let cp = d0 * p.c * d0.transpose();
    let eig = SymmetricEigen::new((cp + cp.transpose()) * 0.5);
    let (i0, i1) = if eig.eigenvalues[0] >= eig.eigenvalues[1] { (0, 1) } else { (1, 0) };
    let mut v = Matrix2::from_columns(&[eig.eigenvectors.column(i0).into_owned(), eig.eigenvectors.column(i1).into_owned()]);
    for j in 0..2 {
        let col = v.column(j);
        let big = if col[0].abs() >= col[1].abs() { col[0] } else { col[1] };
        if big < 0.0 {
            v.column_mut(j).neg_mut();
        }
    }
    let d = v.transpose() * d0;
    let d_inv = d.try_inverse().ok_or(Error::SingularD)?;
    let cols = p.a * d_inv;
    let c1: Vector3<f64> = cols.column(0).into_owned();
    let c2: Vector3<f64> = cols.column(1).into_owned();
    let c3 = c1.cross(&c2);
    let lambda = Matrix3::from_rows(&[c1.transpose(), c2.transpose(), c3.transpose()]);
    let group = GroupElement { lambda, d };
    let problem = act_params(&group, p)?;
    let a = problem.c[(0, 0)].sqrt();
    let b = problem.c[(1, 1)].sqrt();
    Ok(Canonical {
        group,
        problem,
        a,
        b,
        lambda: problem.gyro[2],
        reducible: (a - b).abs() <= REDUCIBLE_TOL * a,
    })
}

#[derive(Serialize, Deserialize)]
struct DGParamsRecord {
    inertia: [[f64; 3]; 3],
    gyro: [f64; 3],
    #[serde(rename = "A")]
    a: [[f64; 2]; 3],
    #[serde(rename = "C")]
    c: [[f64; 2]; 2],
}

impl Serialize for DGParams {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        DGParamsRecord {
            inertia: rows3(&self.inertia),
            gyro: [self.gyro[0], self.gyro[1], self.gyro[2]],
            a: std::array::from_fn(|i| [self.a[(i, 0)], self.a[(i, 1)]]),
            c: [[self.c[(0, 0)], self.c[(0, 1)]], [self.c[(1, 0)], self.c[(1, 1)]]],
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for DGParams {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let r = DGParamsRecord::deserialize(d)?;
        Ok(DGParams {
            inertia: Matrix3::from_fn(|i, j| r.inertia[i][j]),
            gyro: Vector3::from(r.gyro),
            a: Matrix3x2::from_fn(|i, j| r.a[i][j]),
            c: Matrix2::from_fn(|i, j| r.c[i][j]),
        })
    }
}

#[derive(Serialize, Deserialize)]
struct GroupRecord {
    #[serde(rename = "Lambda")]
    lambda: [[f64; 3]; 3],
    #[serde(rename = "D")]
    d: [[f64; 2]; 2],
}

impl Serialize for GroupElement {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        GroupRecord {
            lambda: rows3(&self.lambda),
            d: [[self.d[(0, 0)], self.d[(0, 1)]], [self.d[(1, 0)], self.d[(1, 1)]]],
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for GroupElement {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let r = GroupRecord::deserialize(d)?;
        Ok(GroupElement { lambda: Matrix3::from_fn(|i, j| r.lambda[i][j]), d: Matrix2::from_fn(|i, j| r.d[i][j]) })
    }
}

fn rows3(m: &Matrix3<f64>) -> [[f64; 3]; 3] {
    std::array::from_fn(|i| [m[(i, 0)], m[(i, 1)], m[(i, 2)]])
}
