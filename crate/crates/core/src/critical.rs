//! Critical sets of the momentum map: the families L, N, O, their partial
//! integrals, Lagrange multipliers, closed-form brackets and the numerical
//! rank of the momentum map.

use nalgebra::DMatrix;
use rand::Rng;
use serde::Serialize;

use crate::dynamics::field_complex;
use crate::error::{Error, Result};
use crate::phase::{integrals_complex, orbit_residual_norm, orbit_residuals, ComplexState, Params, PhaseState, ZCoords};
use crate::scalar::{Complex64, Dual, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Stratum {
    L,
    N,
    O,
}

impl std::str::FromStr for Stratum {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "L" | "l" => Ok(Stratum::L),
            "N" | "n" => Ok(Stratum::N),
            "O" | "o" => Ok(Stratum::O),
            _ => Err(Error::InvalidParams(format!("unknown stratum {s}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StratumResidual {
    pub which: Stratum,
    pub values: Vec<f64>,
    pub s_value: Option<f64>,
}

/// Complex coordinates without `y1, y2`, which the closures supply.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PartialState<T> {
    pub w1: T,
    pub w2: T,
    pub w3: T,
    pub x1: T,
    pub x2: T,
    pub z1: T,
    pub z2: T,
}

impl<T: Copy> PartialState<T> {
    pub fn of(c: &ZCoords<T>) -> Self {
        PartialState { w1: c.w1, w2: c.w2, w3: c.w3, x1: c.x1, x2: c.x2, z1: c.z1, z2: c.z2 }
    }

    pub fn with_y(&self, y1: T, y2: T) -> ZCoords<T> {
        ZCoords { w1: self.w1, w2: self.w2, w3: self.w3, x1: self.x1, x2: self.x2, y1, y2, z1: self.z1, z2: self.z2 }
    }

    fn swapped(&self) -> Self {
        PartialState { w1: self.w2, w2: self.w1, w3: self.w3, x1: self.x2, x2: self.x1, z1: self.z2, z2: self.z1 }
    }
}

pub fn residual_l(c: &ComplexState) -> [f64; 4] {
    [c.w1.norm(), c.w2.norm(), c.z1.norm(), c.z2.norm()]
}

fn p_common<T: Scalar>(c: &ZCoords<T>, lam: f64) -> T {
    c.x2 * c.z1 * c.w1 + c.x1 * c.z2 * c.w2 - c.x1 * c.x2 * c.w3 + c.z1 * c.z2 * (2.0 * lam)
}

fn f1_factored<T: Scalar>(c: &ZCoords<T>, lam: f64) -> T {
    let ZCoords { w1, w2, w3, x1, x2, y1, z1, z2, .. } = *c;
    (w1 * w2 + w3 * lam) * (w2 * x1 + z1 * lam) * y1 * lam
        - w2 * (w1 * w1 + x1) * p_common(c, lam)
        - x2 * (w1 * w3 + z1) * (w1 * z1 - x1 * w3) * lam
        + (x1 * w3 * w3 - z1 * w1 * w3 * 2.0 - z1 * z1) * z2 * (lam * lam)
}

/// `[F1, F2]` whose common zeros define N, in factored form.
pub fn f_pair<T: Scalar>(c: &ZCoords<T>, params: &Params) -> [T; 2] {
    let lam = params.lambda;
    [f1_factored(c, lam), f1_factored(&c.swapped(), lam)]
}

/// `[F1, F2]` expanded as polynomials in `lambda`.
pub fn f_pair_horner<T: Scalar>(c: &ZCoords<T>, params: &Params) -> [T; 2] {
    let lam = params.lambda;
    let ZCoords { w1, w2, w3, x1, x2, y1, y2, z1, z2 } = *c;
    let core = -w1 * x2 * z1 - w2 * x1 * z2 + w3 * x1 * x2;
    let f1 = [
        w2 * (w1 * w1 + x1) * core,
        -w1 * w1 * w2 * z1 * z2 * 2.0 - w1 * w1 * w3 * x2 * z1 + w1 * w2 * w2 * x1 * y1 + w1 * w3 * w3 * x1 * x2
            - w1 * x2 * z1 * z1
            - w2 * x1 * z1 * z2 * 2.0
            + w3 * x1 * x2 * z1,
        w1 * w2 * y1 * z1 - w1 * w3 * z1 * z2 * 2.0 + w2 * w3 * x1 * y1 + w3 * w3 * x1 * z2 - z1 * z1 * z2,
        w3 * y1 * z1,
    ];
    let f2 = [
        w1 * (w2 * w2 + x2) * core,
        w1 * w1 * w2 * x2 * y2 - w1 * w2 * w2 * z1 * z2 * 2.0 - w1 * x2 * z1 * z2 * 2.0 - w2 * w2 * w3 * x1 * z2
            + w2 * w3 * w3 * x1 * x2
            - w2 * x1 * z2 * z2
            + w3 * x1 * x2 * z2,
        w1 * w2 * y2 * z2 + w1 * w3 * x2 * y2 - w2 * w3 * z1 * z2 * 2.0 + w3 * w3 * x2 * z1 - z1 * z2 * z2,
        w3 * y2 * z2,
    ];
    let h = |k: [T; 4]| k[0] + (k[1] + (k[2] + k[3] * lam) * lam) * lam;
    [h(f1), h(f2)]
}

/// `[R1, R2]` whose common zeros define O, in factored form.
pub fn r_pair<T: Scalar>(c: &ZCoords<T>, params: &Params) -> [T; 2] {
    let lam = params.lambda;
    let ZCoords { w1, w2, w3, x1, x2, y1, y2, z1, z2 } = *c;
    let cc = x2 * z1 * w1 + x1 * z2 * w2 + z1 * z2 * (w3 + lam);
    [
        (y1 * w2 + x2 * w1 + z2 * (w3 + lam)) * w1 * (w3 - lam) + cc,
        (y2 * w1 + x1 * w2 + z1 * (w3 + lam)) * w2 * (w3 - lam) + cc,
    ]
}

/// `[R1, R2]` expanded as polynomials in `lambda`.
pub fn r_pair_horner<T: Scalar>(c: &ZCoords<T>, params: &Params) -> [T; 2] {
    let lam = params.lambda;
    let ZCoords { w1, w2, w3, x1, x2, y1, y2, z1, z2 } = *c;
    let r1 = [
        w1 * w1 * w3 * x2 + w1 * w2 * w3 * y1 + w1 * w3 * w3 * z2 + w1 * x2 * z1 + w2 * x1 * z2 + w3 * z1 * z2,
        -w1 * w1 * x2 - w1 * w2 * y1 + z1 * z2,
        -w1 * z2,
    ];
    let r2 = [
        w1 * w2 * w3 * y2 + w1 * x2 * z1 + w2 * w2 * w3 * x1 + w2 * w3 * w3 * z1 + w2 * x1 * z2 + w3 * z1 * z2,
        -w1 * w2 * y2 - w2 * w2 * x1 + z1 * z2,
        -w2 * z1,
    ];
    let h = |k: [T; 3]| k[0] + (k[1] + k[2] * lam) * lam;
    [h(r1), h(r2)]
}

pub fn residual_n(c: &ComplexState, params: &Params) -> [f64; 2] {
    f_pair(c, params).map(|z| z.norm())
}

pub fn residual_o(c: &ComplexState, params: &Params) -> [f64; 2] {
    r_pair(c, params).map(|z| z.norm())
}

pub fn stratum_residual(which: Stratum, c: &ComplexState, params: &Params) -> StratumResidual {
    match which {
        Stratum::L => StratumResidual { which, values: residual_l(c).to_vec(), s_value: None },
        Stratum::N => StratumResidual {
            which,
            values: residual_n(c, params).to_vec(),
            s_value: s_n(c, params).ok().map(|s| s.re),
        },
        Stratum::O => StratumResidual {
            which,
            values: residual_o(c, params).to_vec(),
            s_value: s_o(c, params).ok().map(|s| s.re),
        },
    }
}

fn y1_closure_n<T: Scalar>(c: &PartialState<T>, lam: f64) -> (T, T) {
    let PartialState { w1, w2, w3, x1, x2, z1, z2 } = *c;
    let p = x2 * z1 * w1 + x1 * z2 * w2 - x1 * x2 * w3 + z1 * z2 * (2.0 * lam);
    let num = w2 * (w1 * w1 + x1) * p + x2 * (w1 * w3 + z1) * (w1 * z1 - x1 * w3) * lam
        - (x1 * w3 * w3 - z1 * w1 * w3 * 2.0 - z1 * z1) * z2 * (lam * lam);
    let den = (w1 * w2 + w3 * lam) * (w2 * x1 + z1 * lam) * lam;
    (num, den)
}

fn y1_closure_o<T: Scalar>(c: &PartialState<T>, lam: f64) -> (T, T) {
    let PartialState { w1, w2, w3, x1, x2, z1, z2 } = *c;
    let d = w3 - lam;
    let cp = x2 * z1 * w1 + x1 * z2 * w2 + z1 * z2 * (2.0 * lam);
    let num = -(w1 * z2 * d * d + (x2 * w1 * w1 + z1 * z2 + w1 * z2 * (2.0 * lam)) * d + cp) * 2.0;
    let den = w1 * w2 * d * 2.0;
    (num, den)
}

/// `(y1, y2)` that put the partial state on N. Generic so it can be
/// differentiated.
pub fn closure_n<T: Scalar>(c: &PartialState<T>, params: &Params) -> (T, T) {
    let (n1, d1) = y1_closure_n(c, params.lambda);
    let (n2, d2) = y1_closure_n(&c.swapped(), params.lambda);
    (n1 / d1, n2 / d2)
}

pub fn closure_o<T: Scalar>(c: &PartialState<T>, params: &Params) -> (T, T) {
    let (n1, d1) = y1_closure_o(c, params.lambda);
    let (n2, d2) = y1_closure_o(&c.swapped(), params.lambda);
    (n1 / d1, n2 / d2)
}

const DEN_TOL: f64 = 1e-12;

pub fn close_n(partial: &PartialState<Complex64>, params: &Params) -> Result<ComplexState> {
    let lam = params.lambda;
    if lam == 0.0 {
        return Err(Error::DegenerateDenominator("lambda"));
    }
    let PartialState { w1, w2, w3, x1, x2, z1, z2 } = *partial;
    if (w1 * w2 + w3 * lam).norm() < DEN_TOL {
        return Err(Error::DegenerateDenominator("w1 w2 + lambda w3"));
    }
    if (w2 * x1 + z1 * lam).norm() < DEN_TOL || (w1 * x2 + z2 * lam).norm() < DEN_TOL {
        return Err(Error::DegenerateDenominator("w2 x1 + lambda z1"));
    }
    let (y1, y2) = closure_n(partial, params);
    Ok(partial.with_y(y1, y2))
}

pub fn close_o(partial: &PartialState<Complex64>, params: &Params) -> Result<ComplexState> {
    let PartialState { w1, w2, w3, .. } = *partial;
    if (w1 * w2 * (w3 - params.lambda)).norm() < DEN_TOL {
        return Err(Error::DegenerateDenominator("w1 w2 (w3 - lambda)"));
    }
    let (y1, y2) = closure_o(partial, params);
    Ok(partial.with_y(y1, y2))
}

/// Partial integral on N.
pub fn s_n<T: Scalar>(c: &ZCoords<T>, params: &Params) -> Result<T>
where
    T: NormLike,
{
    let lam = params.lambda;
    let den = (c.w1 * c.w2 + c.w3 * lam) * (2.0 * lam);
    if den.modulus() < DEN_TOL {
        return Err(Error::DegenerateDenominator("lambda (w1 w2 + lambda w3)"));
    }
    Ok((c.x1 * c.x2 * c.w3 - c.x2 * c.z1 * c.w1 - c.x1 * c.z2 * c.w2 - c.z1 * c.z2 * lam) / den)
}

/// Partial integral on O.
pub fn s_o<T: Scalar>(c: &ZCoords<T>, params: &Params) -> Result<T>
where
    T: NormLike,
{
    let lam = params.lambda;
    let den = c.w1 * c.w2 * (c.w3 - lam) * 2.0;
    if den.modulus() < DEN_TOL {
        return Err(Error::DegenerateDenominator("w1 w2 (w3 - lambda)"));
    }
    Ok((c.x2 * c.z1 * c.w1 + c.x1 * c.z2 * c.w2 + c.z1 * c.z2 * (c.w3 + lam)) / den)
}

/// Modulus of the value part, for denominator checks in generic code.
pub trait NormLike {
    fn modulus(&self) -> f64;
}

impl NormLike for Complex64 {
    fn modulus(&self) -> f64 {
        self.norm()
    }
}

impl NormLike for Dual {
    fn modulus(&self) -> f64 {
        self.v.norm()
    }
}

pub fn u1<T: Scalar>(c: &ZCoords<T>, params: &Params) -> T {
    let lam = params.lambda;
    (c.y2 * c.w1 + c.x1 * c.w2 + c.z1 * (c.w3 + lam)) / c.w1 - (c.x2 * c.w1 + c.y1 * c.w2 + c.z2 * (c.w3 + lam)) / c.w2
}

/// Derivative of `f` along the complex vector field, exact via dual numbers.
pub fn lie_derivative(f: impl Fn(&ZCoords<Dual>) -> Dual, c: &ComplexState, params: &Params) -> Complex64 {
    let v = field_complex(c, params);
    f(&directional(c, &v)).d
}

fn directional(c: &ComplexState, dir: &ComplexState) -> ZCoords<Dual> {
    let a = c.to_array();
    let d = dir.to_array();
    ZCoords::from_array(std::array::from_fn(|i| Dual::new(a[i], d[i])))
}

/// `U2 = w1 w2 U1'`.
pub fn u2(c: &ComplexState, params: &Params) -> Complex64 {
    c.w1 * c.w2 * lie_derivative(|z| u1(z, params), c, params)
}

/// Multipliers `(S, T)` with `d(G - S K ... )`-type dependence on N and O,
/// from the closed-form solution of the two linear equations.
pub fn lagrange_st(c: &ComplexState, params: &Params) -> Result<(Complex64, Complex64)> {
    let lam = params.lambda;
    let ZCoords { w1, w2, w3, x1, x2, y1, y2, z1, z2 } = *c;
    let delta = x1 * w2 * w2 - x2 * w1 * w1 - (z2 * w1 - z1 * w2) * lam;
    let scale = 1.0 + c.to_array().iter().map(|z| z.norm_sqr()).sum::<f64>();
    if delta.norm() < 1e-12 * scale {
        return Err(Error::SingularDelta);
    }
    let s_num = x2 * y2 * w1 * w1 - x1 * y1 * w2 * w2 + (x2 * z1 * w1 - x1 * z2 * w2) * w3 + (y2 * z2 * w1 - y1 * z1 * w2) * lam;
    let a1 = (x1 * w2 + z1 * lam) * y1 + (x1 * w3 - z1 * w1) * z2;
    let b1 = (w2 * w2 + x2) * w1 + w2 * (w3 - lam) * lam + z2 * lam;
    let a2 = (x2 * w1 + z2 * lam) * y2 + (x2 * w3 - z2 * w2) * z1;
    let b2 = (w1 * w1 + x1) * w2 + w1 * (w3 - lam) * lam + z1 * lam;
    Ok((s_num / delta * 0.5, (a1 * b1 - a2 * b2) / delta))
}

/// Residuals of the linear system for `(S, T)`; zero at the multipliers.
pub fn lagrange_system(c: &ComplexState, params: &Params, s: Complex64, t: Complex64) -> [Complex64; 2] {
    let eq = |c: &ComplexState| {
        let lam = params.lambda;
        let ZCoords { w1, w2, w3, x2, y2, z1, z2, .. } = *c;
        x2 * (y2 + s * 2.0) * w1 + s * (w1 * w2 + w3 * lam) * w2 * 2.0 + (t - z1 * z2 - s * (2.0 * lam * lam)) * w2
            + x2 * z1 * w3
            + (y2 + s * 2.0) * z2 * lam
    };
    [eq(c), eq(&c.swapped())]
}

/// Solve the two linear equations for `(S, T)` directly.
pub fn lagrange_st_solve(c: &ComplexState, params: &Params) -> Result<(Complex64, Complex64)> {
    let zero = Complex64::new(0.0, 0.0);
    let one = Complex64::new(1.0, 0.0);
    let e0 = lagrange_system(c, params, zero, zero);
    let es = lagrange_system(c, params, one, zero);
    let et = lagrange_system(c, params, zero, one);
    let m = [[es[0] - e0[0], et[0] - e0[0]], [es[1] - e0[1], et[1] - e0[1]]];
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    if det.norm() < 1e-14 {
        return Err(Error::SingularDelta);
    }
    let s = (-e0[0] * m[1][1] + e0[1] * m[0][1]) / det;
    let t = (-e0[1] * m[0][0] + e0[0] * m[1][0]) / det;
    Ok((s, t))
}

/// Closed form of `{F1, F2}` on N, principal branches of the roots.
pub fn bracket_f_closed(c: &ComplexState, params: &Params) -> Result<Complex64> {
    let lam = params.lambda;
    let s = s_n(c, params)?;
    if s.norm() == 0.0 {
        return Err(Error::SZero);
    }
    let h = integrals_complex(c, params)[2];
    let (p2, r2) = (params.p2(), params.r2());
    let rad = s * s * 2.0 - s * (h * 2.0 + lam * lam) + p2;
    let cc = (s * s * s * (8.0 * lam * lam) - r2 * r2) / s * rad.sqrt();
    let a = c.w1 * c.w2 + c.w3 * lam;
    let b = (c.w2 * c.x1 + c.z1 * lam) * (c.w1 * c.x2 + c.z2 * lam);
    Ok(a.powf(1.5) * b.sqrt() * cc * (2f64.sqrt() * lam))
}

/// Closed form of `{U1, U2}` on O.
pub fn bracket_u_closed(c: &ComplexState, params: &Params) -> Result<Complex64> {
    let s = s_o(c, params)?;
    if s.norm() == 0.0 {
        return Err(Error::SZero);
    }
    let h = integrals_complex(c, params)[2];
    let ht = h - params.lambda * params.lambda / 2.0;
    let q = params.p2() * params.p2() - params.r2() * params.r2();
    Ok(-(s.powu(4) * 3.0 - s.powu(3) * ht * 2.0 + q / 4.0) * 4.0 / s)
}

/// Directions of the six tangent fields, in coordinate order.
pub fn tangent_fields(c: &ComplexState) -> [ComplexState; 6] {
    let zero = Complex64::new(0.0, 0.0);
    let one = Complex64::new(1.0, 0.0);
    let z = ZCoords { w1: zero, w2: zero, w3: zero, x1: zero, x2: zero, y1: zero, y2: zero, z1: zero, z2: zero };
    [
        ZCoords { w1: one, ..z },
        ZCoords { w2: one, ..z },
        ZCoords { w3: one, ..z },
        ZCoords { x2: c.z2, y2: c.z1, z1: -c.x1 * 0.5, z2: -c.y1 * 0.5, ..z },
        ZCoords { x1: c.z1, y1: c.z2, z1: -c.y2 * 0.5, z2: -c.x2 * 0.5, ..z },
        ZCoords { x1: c.x1, x2: -c.x2, y1: c.y1, y2: -c.y2, ..z },
    ]
}

/// `X_i f` for `f` in `(G, K, H)`: a 6x3 matrix.
pub fn tangent_matrix(c: &ComplexState, params: &Params) -> [[Complex64; 3]; 6] {
    tangent_fields(c).map(|dir| integrals_complex(&directional(c, &dir), params).map(|d| d.d))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RankInfo {
    pub rank: usize,
    pub singular_values: [f64; 3],
}

pub const SVD_TOL: f64 = 1e-7;

pub fn momentum_rank_info(c: &ComplexState, params: &Params, tol_svd: f64) -> RankInfo {
    let m = tangent_matrix(c, params);
    let mat = DMatrix::from_fn(6, 3, |i, j| m[i][j]);
    let mut sv: Vec<f64> = mat.singular_values().iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    let smax = sv[0];
    let rank = if smax <= 1e-12 { 0 } else { sv.iter().filter(|s| **s > tol_svd * smax).count() };
    RankInfo { rank, singular_values: [sv[0], sv[1], sv[2]] }
}

pub fn momentum_rank(c: &ComplexState, params: &Params, tol_svd: f64) -> usize {
    momentum_rank_info(c, params, tol_svd).rank
}

/// `(M.alpha / M1, M.beta / M2)` with `M = I omega + lambda e3`; both equal
/// `-S` on O.
pub fn momentum_ratios(s: &PhaseState, params: &Params) -> (f64, f64) {
    let m = [2.0 * s.omega[0], 2.0 * s.omega[1], s.omega[2] + params.lambda];
    let dot = |v: &[f64; 3]| m[0] * v[0] + m[1] * v[1] + m[2] * v[2];
    (dot(&s.alpha) / m[0], dot(&s.beta) / m[1])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClosedPoint {
    pub stratum: Stratum,
    pub state: ComplexState,
    /// Value of the partial integral.
    pub s: f64,
    pub orbit_residual: f64,
    pub attempts: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct SeedOptions {
    pub max_tries: usize,
    /// Half-width of the uniform box for the free coordinates.
    pub box_size: f64,
    /// Lower bound on the closure denominators, keeping points away from the
    /// lower strata.
    pub min_denominator: f64,
    pub tol: f64,
}

impl Default for SeedOptions {
    fn default() -> Self {
        SeedOptions { max_tries: 200, box_size: 1.5, min_denominator: 1e-2, tol: 1e-12 }
    }
}

fn build_partial<T: Scalar>(v: &[T; 7], i: T) -> PartialState<T> {
    let w1 = v[0] + v[1] * i;
    let w2 = v[0] - v[1] * i;
    let x1 = v[3] + v[4] * i;
    let x2 = v[3] - v[4] * i;
    let z1 = v[5] + v[6] * i;
    let z2 = v[5] - v[6] * i;
    PartialState { w1, w2, w3: v[2], x1, x2, z1, z2 }
}

fn close_generic<T: Scalar>(which: Stratum, p: &PartialState<T>, params: &Params) -> ZCoords<T> {
    let (y1, y2) = match which {
        Stratum::N => closure_n(p, params),
        _ => closure_o(p, params),
    };
    p.with_y(y1, y2)
}

/// Real part of the two orbit constraints not implied by the closure
/// (the second one is the conjugate of the first on real images).
fn seed_residual(which: Stratum, v: &[f64; 7], params: &Params) -> ([f64; 3], [[f64; 7]; 3]) {
    let mut jac = [[0.0; 7]; 3];
    let mut val = [0.0; 3];
    for j in 0..7 {
        let vd: [Dual; 7] = std::array::from_fn(|k| {
            Dual::new(Complex64::new(v[k], 0.0), Complex64::new(if k == j { 1.0 } else { 0.0 }, 0.0))
        });
        let i = Dual::constant(Complex64::i());
        let c = close_generic(which, &build_partial(&vd, i), params);
        let [e1, _, e3] = orbit_residuals(&c, params);
        val = [e1.v.re, e1.v.im, e3.v.re];
        jac[0][j] = e1.d.re;
        jac[1][j] = e1.d.im;
        jac[2][j] = e3.d.re;
    }
    (val, jac)
}

/// Real point of N or O: random free coordinates, then minimum-norm
/// Gauss–Newton on the orbit constraints; fresh seeds on failure.
pub fn seed_point<R: Rng + ?Sized>(which: Stratum, params: &Params, rng: &mut R, opts: &SeedOptions) -> Result<ClosedPoint> {
    if which == Stratum::L {
        return Err(Error::InvalidParams("L points are pendulum motions; use pendulum_state".into()));
    }
    if which == Stratum::N && params.lambda == 0.0 {
        return Err(Error::DegenerateDenominator("lambda"));
    }
    for attempt in 1..=opts.max_tries {
        let mut v: [f64; 7] = std::array::from_fn(|_| rng.random_range(-opts.box_size..opts.box_size));
        if newton_seed(which, &mut v, params, opts).is_some() {
            if let Ok(mut p) = finish_point(which, &v, params, opts) {
                p.attempts = attempt;
                return Ok(p);
            }
        }
    }
    Err(Error::NoConvergence(format!("no point of {which:?} after {} seeds", opts.max_tries)))
}

fn newton_seed(which: Stratum, v: &mut [f64; 7], params: &Params, opts: &SeedOptions) -> Option<()> {
    let norm = |r: &[f64; 3]| r.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let (mut r, mut jac) = seed_residual(which, v, params);
    for _ in 0..60 {
        if !r.iter().all(|x| x.is_finite()) {
            return None;
        }
        if norm(&r) < opts.tol {
            return Some(());
        }
        let j = nalgebra::SMatrix::<f64, 3, 7>::from_fn(|i, k| jac[i][k]);
        let jjt = j * j.transpose();
        let rhs = nalgebra::Vector3::new(r[0], r[1], r[2]);
        let y = jjt.lu().solve(&rhs)?;
        let step = j.transpose() * y;
        let mut t = 1.0;
        loop {
            let trial: [f64; 7] = std::array::from_fn(|k| v[k] - t * step[k]);
            let (rt, jt) = seed_residual(which, &trial, params);
            if rt.iter().all(|x| x.is_finite()) && norm(&rt) < norm(&r) {
                *v = trial;
                r = rt;
                jac = jt;
                break;
            }
            t *= 0.5;
            if t < 1e-6 {
                return None;
            }
        }
    }
    None
}

fn finish_point(which: Stratum, v: &[f64; 7], params: &Params, opts: &SeedOptions) -> Result<ClosedPoint> {
    let partial = build_partial(&v.map(|x| Complex64::new(x, 0.0)), Complex64::i());
    let lam = params.lambda;
    let dens: Vec<Complex64> = match which {
        Stratum::N => vec![
            partial.w1 * partial.w2 + partial.w3 * lam,
            partial.w2 * partial.x1 + partial.z1 * lam,
            partial.w1 * partial.x2 + partial.z2 * lam,
        ],
        _ => vec![partial.w1 * partial.w2 * (partial.w3 - lam)],
    };
    if dens.iter().any(|d| d.norm() < opts.min_denominator) {
        return Err(Error::DegenerateDenominator("seed too close to a lower stratum"));
    }
    let state = match which {
        Stratum::N => close_n(&partial, params)?,
        _ => close_o(&partial, params)?,
    };
    let orbit_residual = orbit_residual_norm(&state, params);
    let scale = 1.0 + state.to_array().iter().map(|z| z.norm_sqr()).sum::<f64>();
    if !(orbit_residual < 1e-10 * scale) || !(state.realness_deviation() < 1e-9 * scale) {
        return Err(Error::NoConvergence("closed point is not a real on-orbit state".into()));
    }
    let s = match which {
        Stratum::N => s_n(&state, params)?,
        _ => s_o(&state, params)?,
    };
    Ok(ClosedPoint { stratum: which, state, s: s.re, orbit_residual, attempts: 0 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{bracket_oracle_complex, integrate_with, IntegrateOptions, FD_STEP};
    use crate::phase::{complexify, integrals_of_complex, realify, PhaseState};
    use crate::special::{equilibria, pendulum_state, rank1_admissible, rank1_point, PendulumFamily, Rank1Data};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn params() -> Params {
        Params::new(1.3, 0.7, 0.45).unwrap()
    }

    fn points(which: Stratum, n: usize, seed: u64) -> Vec<ClosedPoint> {
        let p = params();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| seed_point(which, &p, &mut rng, &SeedOptions::default()).unwrap()).collect()
    }

    fn rank1_states() -> Vec<(f64, ComplexState)> {
        let p = params();
        let sig: Vec<f64> = (-30..=30).filter(|i| *i != 0).map(|i| i as f64 * 0.1).collect();
        rank1_admissible(&sig, &p)
            .into_iter()
            .take(10)
            .map(|m| {
                let w = 0.5 * (m.window.0 + m.window.1);
                (m.sigma, rank1_point(&Rank1Data::new(m.sigma, m.u, w, &p).unwrap(), &p).unwrap())
            })
            .collect()
    }

    fn arb_complex() -> impl Strategy<Value = ComplexState> {
        prop::array::uniform18(-2.0f64..2.0)
            .prop_map(|v| ZCoords::from_array(std::array::from_fn(|i| Complex64::new(v[2 * i], v[2 * i + 1]))))
    }

    proptest! {
        #[test]
        fn f_codings_agree(c in arb_complex()) {
            let p = params();
            let (a, b) = (f_pair(&c, &p), f_pair_horner(&c, &p));
            for k in 0..2 {
                prop_assert!((a[k] - b[k]).norm() < 1e-11 * (1.0 + a[k].norm()));
            }
        }

        #[test]
        fn r_codings_agree(c in arb_complex()) {
            let p = params();
            let (a, b) = (r_pair(&c, &p), r_pair_horner(&c, &p));
            for k in 0..2 {
                prop_assert!((a[k] - b[k]).norm() < 1e-12 * (1.0 + a[k].norm()));
            }
        }

        // the closures annihilate the residual polynomials identically
        #[test]
        fn closures_zero_the_residuals(c in arb_complex()) {
            let p = params();
            let part = PartialState::of(&c);
            if let Ok(cn) = close_n(&part, &p) {
                let scale = 1.0 + cn.to_array().iter().map(|z| z.norm_sqr()).sum::<f64>();
                prop_assert!(residual_n(&cn, &p).iter().all(|r| *r < 1e-9 * scale * scale));
            }
            if let Ok(co) = close_o(&part, &p) {
                let scale = 1.0 + co.to_array().iter().map(|z| z.norm_sqr()).sum::<f64>();
                prop_assert!(residual_o(&co, &p).iter().all(|r| *r < 1e-10 * scale * scale));
            }
        }
    }

    #[test]
    fn residual_l_examples() {
        let p = params();
        for s in equilibria(&p) {
            assert_eq!(residual_l(&complexify(&s)), [0.0; 4]);
        }
        let c = complexify(&pendulum_state(PendulumFamily::P3, 0.4, 1.1, 1.0, &p).unwrap());
        assert_eq!(residual_l(&c), [0.0; 4]);
        let s = PhaseState { omega: [0.3, 0.4, 0.0], alpha: [0.0, 0.0, 1.3], beta: [0.0, 0.7, 0.0] };
        let r = residual_l(&complexify(&s));
        assert!((r[0] - 0.5).abs() < 1e-15 && (r[2] - 1.3).abs() < 1e-15);
    }

    #[test]
    fn seeded_points_are_on_their_stratum() {
        let p = params();
        for which in [Stratum::N, Stratum::O] {
            for cp in points(which, 10, 1) {
                let c = cp.state;
                assert!(cp.orbit_residual < 1e-10);
                let r = match which {
                    Stratum::N => residual_n(&c, &p),
                    _ => residual_o(&c, &p),
                };
                assert!(r.iter().all(|x| *x < 1e-10), "{which:?} {r:?}");
                // the field is tangent to the stratum
                let d = match which {
                    Stratum::N => [0, 1].map(|k| lie_derivative(|z| f_pair(z, &p)[k], &c, &p)),
                    _ => [0, 1].map(|k| lie_derivative(|z| r_pair(z, &p)[k], &c, &p)),
                };
                assert!(d.iter().all(|x| x.norm() < 1e-9));
            }
        }
    }

    #[test]
    fn random_orbit_points_are_off_the_strata() {
        let p = params();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..10 {
            let c = complexify(&PhaseState::random_on_orbit(&mut rng, &p, 1.0));
            assert!(residual_n(&c, &p).iter().any(|x| *x > 1e-3));
            assert!(residual_o(&c, &p).iter().any(|x| *x > 1e-3));
            assert_eq!(momentum_rank(&c, &p, SVD_TOL), 3);
        }
    }

    #[test]
    fn multipliers_on_n() {
        let p = params();
        let lam2 = p.lambda * p.lambda;
        for cp in points(Stratum::N, 10, 3) {
            let (s, t) = lagrange_st(&cp.state, &p).unwrap();
            let sn = s_n(&cp.state, &p).unwrap();
            assert!((s - sn).norm() < 1e-10 * (1.0 + sn.norm()));
            assert!((t - s * (2.0 * lam2)).norm() < 1e-9 * (1.0 + t.norm()));
            let (s2, t2) = lagrange_st_solve(&cp.state, &p).unwrap();
            assert!((s - s2).norm() < 1e-9 * (1.0 + s.norm()) && (t - t2).norm() < 1e-9 * (1.0 + t.norm()));
            let res = lagrange_system(&cp.state, &p, s, t);
            assert!(res.iter().all(|r| r.norm() < 1e-11 * (1.0 + s.norm() + t.norm()) * 10.0));
        }
    }

    #[test]
    fn multipliers_on_o() {
        let p = params();
        for cp in points(Stratum::O, 10, 4) {
            let c = cp.state;
            let (s, t) = lagrange_st(&c, &p).unwrap();
            let so = s_o(&c, &p).unwrap();
            assert!((s - so).norm() < 1e-10 * (1.0 + so.norm()));
            let expect = c.x1 * c.x2 + c.z1 * c.z2 - c.w1 * c.w2 * s * 2.0;
            assert!((t - expect).norm() < 1e-9 * (1.0 + t.norm()));
        }
    }

    #[test]
    fn partial_integrals_are_conserved() {
        let p = params();
        for (which, seed) in [(Stratum::N, 5), (Stratum::O, 6)] {
            for cp in points(which, 3, seed) {
                let s0 = realify(&cp.state).unwrap();
                let opts = IntegrateOptions { t_eval: (0..=20).map(|i| i as f64 * 0.5).collect(), ..IntegrateOptions::new(1e-12) };
                let tr = integrate_with(&s0, &p, 10.0, &opts).unwrap();
                for st in &tr.states {
                    let c = complexify(st);
                    let (r, s) = match which {
                        Stratum::N => (residual_n(&c, &p), s_n(&c, &p).unwrap()),
                        _ => (residual_o(&c, &p), s_o(&c, &p).unwrap()),
                    };
                    assert!(r.iter().all(|x| *x < 1e-7), "{which:?} residual {r:?}");
                    assert!((s.re - cp.s).abs() < 1e-8, "{which:?} S drift {}", (s.re - cp.s).abs());
                }
            }
        }
    }

    #[test]
    fn u_bracket_matches_closed_form() {
        let p = params();
        for cp in points(Stratum::O, 5, 7) {
            let s = realify(&cp.state).unwrap();
            let f = |x: &PhaseState| u1(&complexify(x), &p);
            let g = |x: &PhaseState| u2(&complexify(x), &p);
            let oracle = bracket_oracle_complex(&f, &g, &s, &p, FD_STEP) * Complex64::i();
            let closed = bracket_u_closed(&cp.state, &p).unwrap();
            assert!((oracle - closed).norm() < 1e-6 * closed.norm(), "{oracle} vs {closed}");
        }
    }

    #[test]
    fn f_bracket_matches_closed_form_up_to_branch() {
        let p = params();
        for cp in points(Stratum::N, 5, 8) {
            let s = realify(&cp.state).unwrap();
            let f = |x: &PhaseState| f_pair(&complexify(x), &p)[0];
            let g = |x: &PhaseState| f_pair(&complexify(x), &p)[1];
            let oracle = bracket_oracle_complex(&f, &g, &s, &p, FD_STEP) * Complex64::i();
            let closed = bracket_f_closed(&cp.state, &p).unwrap();
            let (o2, c2) = (oracle * oracle, closed * closed);
            assert!((o2 - c2).norm() < 1e-6 * c2.norm(), "{oracle} vs {closed}");
        }
    }

    #[test]
    fn f_bracket_zeros() {
        // first factor: 8 s^3 lambda^2 = r^4; second: the radicand
        let p = params();
        let s_star = (p.r2() * p.r2() / (8.0 * p.lambda * p.lambda)).cbrt();
        assert!((8.0 * s_star.powi(3) * p.lambda * p.lambda - p.r2() * p.r2()).abs() < 1e-12);
    }

    #[test]
    fn stratum_ranks() {
        let p = params();
        for s in equilibria(&p) {
            assert_eq!(momentum_rank(&complexify(&s), &p, SVD_TOL), 0);
        }
        let c = complexify(&pendulum_state(PendulumFamily::P3, 0.3, 1.2, -1.0, &p).unwrap());
        assert_eq!(momentum_rank(&c, &p, SVD_TOL), 1);
        for which in [Stratum::N, Stratum::O] {
            for cp in points(which, 5, 9) {
                let info = momentum_rank_info(&cp.state, &p, SVD_TOL);
                assert_eq!(info.rank, 2, "{which:?} {:?}", info.singular_values);
            }
        }
        for (_, c) in rank1_states() {
            assert_eq!(momentum_rank(&c, &p, SVD_TOL), 1);
        }
    }

    #[test]
    fn l_points_have_dependent_differentials() {
        let p = params();
        let c = complexify(&pendulum_state(PendulumFamily::P3, 0.9, -0.7, 1.0, &p).unwrap());
        let m = tangent_matrix(&c, &p);
        let mix = c.x1 * c.x2 - c.y1 * c.y2;
        for row in &m {
            assert!(row[1].norm() < 1e-10);
            assert!((row[0] * 4.0 + mix * row[2]).norm() < 1e-10);
        }
    }

    #[test]
    fn rank1_points_lie_on_n_and_o() {
        let p = params();
        for (sigma, c) in rank1_states() {
            let scale = 1.0 + c.to_array().iter().map(|z| z.norm_sqr()).sum::<f64>();
            assert!(residual_n(&c, &p).iter().all(|x| *x < 1e-8 * scale * scale));
            assert!(residual_o(&c, &p).iter().all(|x| *x < 1e-8 * scale * scale));
            // X_i (K - 2 sigma H) = 0
            for row in tangent_matrix(&c, &p) {
                assert!((row[1] - row[2] * (2.0 * sigma)).norm() < 1e-8 * scale);
            }
        }
    }

    #[test]
    fn momentum_ratios_on_o() {
        for lam in [1e-4, 0.45] {
            let p = Params::new(1.3, 0.7, lam).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(12);
            for _ in 0..5 {
                let cp = seed_point(Stratum::O, &p, &mut rng, &SeedOptions::default()).unwrap();
                let (ra, rb) = momentum_ratios(&realify(&cp.state).unwrap(), &p);
                assert!((ra + cp.s).abs() < 1e-9 * (1.0 + cp.s.abs()), "{ra} vs {}", -cp.s);
                assert!((rb + cp.s).abs() < 1e-9 * (1.0 + cp.s.abs()));
            }
        }
    }

    #[test]
    fn closed_points_map_to_real_integrals() {
        let p = params();
        for cp in points(Stratum::O, 3, 10) {
            let [g, k, h] = integrals_complex(&cp.state, &p);
            let t = integrals_of_complex(&cp.state, &p);
            assert!(g.im.abs() < 1e-10 && k.im.abs() < 1e-10 && h.im.abs() < 1e-10);
            assert_eq!(t.h, h.re);
        }
    }

    #[test]
    fn degenerate_denominators_are_reported() {
        let p = params();
        let zero = Complex64::new(0.0, 0.0);
        let part = PartialState { w1: zero, w2: zero, w3: zero, x1: zero, x2: zero, z1: zero, z2: zero };
        assert!(matches!(close_n(&part, &p), Err(Error::DegenerateDenominator(_))));
        assert!(matches!(close_o(&part, &p), Err(Error::DegenerateDenominator(_))));
        let c = complexify(&equilibria(&p)[0]);
        assert!(matches!(lagrange_st(&c, &p), Err(Error::SingularDelta)));
    }
}
