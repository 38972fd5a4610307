//! Phase-space types, the complex coordinates, Casimirs and first integrals.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{Complex64, Scalar};

/// Default bound on Casimir residuals for a state to count as on the orbit.
pub const ORBIT_TOL: f64 = 1e-8;
/// Default bound on the deviation from the conjugation pattern of a real image.
pub const REALNESS_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
struct ParamsRecord {
    a: f64,
    b: f64,
    lambda: f64,
}

/// Field intensities `a > b > 0` and axial gyrostatic momentum `lambda`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ParamsRecord", into = "ParamsRecord")]
pub struct Params {
    pub a: f64,
    pub b: f64,
    pub lambda: f64,
    pub p: f64,
    pub r: f64,
}

impl Params {
    pub fn new(a: f64, b: f64, lambda: f64) -> Result<Self> {
        if !(a.is_finite() && b.is_finite() && lambda.is_finite()) {
            return Err(Error::InvalidParams("non-finite value".into()));
        }
        if !(b > 0.0) {
            return Err(Error::InvalidParams(format!("b = {b} must be positive")));
        }
        if !(a > b) {
            return Err(Error::InvalidParams(format!(
                "a = {a} must exceed b = {b} (a = b is the reducible case)"
            )));
        }
        Ok(Params {
            a,
            b,
            lambda,
            p: (a * a + b * b).sqrt(),
            r: (a * a - b * b).sqrt(),
        })
    }

    pub fn p2(&self) -> f64 {
        self.a * self.a + self.b * self.b
    }

    pub fn r2(&self) -> f64 {
        self.a * self.a - self.b * self.b
    }

    pub fn with_lambda(&self, lambda: f64) -> Result<Self> {
        Params::new(self.a, self.b, lambda)
    }
}

impl TryFrom<ParamsRecord> for Params {
    type Error = Error;
    fn try_from(r: ParamsRecord) -> Result<Self> {
        Params::new(r.a, r.b, r.lambda)
    }
}

impl From<Params> for ParamsRecord {
    fn from(p: Params) -> Self {
        ParamsRecord { a: p.a, b: p.b, lambda: p.lambda }
    }
}

/// Real point `(omega, alpha, beta)` of the nine-dimensional phase space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseState {
    pub omega: [f64; 3],
    pub alpha: [f64; 3],
    pub beta: [f64; 3],
}

impl PhaseState {
    pub fn to_array(&self) -> [f64; 9] {
        let mut v = [0.0; 9];
        v[..3].copy_from_slice(&self.omega);
        v[3..6].copy_from_slice(&self.alpha);
        v[6..].copy_from_slice(&self.beta);
        v
    }

    pub fn from_slice(v: &[f64]) -> Self {
        PhaseState {
            omega: [v[0], v[1], v[2]],
            alpha: [v[3], v[4], v[5]],
            beta: [v[6], v[7], v[8]],
        }
    }

    /// Random state on the orbit: a uniformly random rotation applied to the
    /// canonical frame `(a e1, b e2)` and angular velocity uniform in the cube
    /// of half-width `omega_scale`.
    pub fn random_on_orbit<R: Rng + ?Sized>(rng: &mut R, params: &Params, omega_scale: f64) -> Self {
        let rot = random_rotation(rng);
        let col = |j: usize| [rot[0][j], rot[1][j], rot[2][j]];
        let (e1, e2) = (col(0), col(1));
        PhaseState {
            omega: std::array::from_fn(|_| rng.random_range(-omega_scale..=omega_scale)),
            alpha: e1.map(|x| params.a * x),
            beta: e2.map(|x| params.b * x),
        }
    }
}

/// Uniform rotation from a uniform unit quaternion (rejection in the 4-ball).
pub fn random_rotation<R: Rng + ?Sized>(rng: &mut R) -> [[f64; 3]; 3] {
    let q = loop {
        let q: [f64; 4] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
        let n2: f64 = q.iter().map(|x| x * x).sum();
        if n2 > 1e-6 && n2 <= 1.0 {
            let n = n2.sqrt();
            break q.map(|x| x / n);
        }
    };
    let [w, x, y, z] = q;
    [
        [1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - z * w), 2.0 * (x * z + y * w)],
        [2.0 * (x * y + z * w), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - x * w)],
        [2.0 * (x * z - y * w), 2.0 * (y * z + x * w), 1.0 - 2.0 * (x * x + y * y)],
    ]
}

/// The nine complex coordinates, generic over the scalar so that the same
/// polynomial code runs on plain values and on dual numbers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZCoords<T> {
    pub w1: T,
    pub w2: T,
    pub w3: T,
    pub x1: T,
    pub x2: T,
    pub y1: T,
    pub y2: T,
    pub z1: T,
    pub z2: T,
}

pub type ComplexState = ZCoords<Complex64>;

impl<T: Copy> ZCoords<T> {
    /// Coordinates in the fixed order `w1 w2 w3 x1 x2 y1 y2 z1 z2`.
    pub fn to_array(&self) -> [T; 9] {
        [self.w1, self.w2, self.w3, self.x1, self.x2, self.y1, self.y2, self.z1, self.z2]
    }

    pub fn from_array(v: [T; 9]) -> Self {
        ZCoords { w1: v[0], w2: v[1], w3: v[2], x1: v[3], x2: v[4], y1: v[5], y2: v[6], z1: v[7], z2: v[8] }
    }

    pub fn map<U: Copy>(&self, f: impl Fn(T) -> U) -> ZCoords<U> {
        ZCoords::from_array(self.to_array().map(f))
    }

    /// The coordinates with the indices 1 and 2 exchanged.
    pub fn swapped(&self) -> Self {
        ZCoords {
            w1: self.w2,
            w2: self.w1,
            w3: self.w3,
            x1: self.x2,
            x2: self.x1,
            y1: self.y2,
            y2: self.y1,
            z1: self.z2,
            z2: self.z1,
        }
    }
}

impl ComplexState {
    /// Largest violation of the conjugation pattern of a real image.
    pub fn realness_deviation(&self) -> f64 {
        [
            (self.w2 - self.w1.conj()).norm(),
            self.w3.im.abs(),
            (self.x2 - self.x1.conj()).norm(),
            (self.y2 - self.y1.conj()).norm(),
            (self.z2 - self.z1.conj()).norm(),
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegralTriple {
    pub g: f64,
    pub k: f64,
    pub h: f64,
}

pub fn complexify(s: &PhaseState) -> ComplexState {
    let [o1, o2, o3] = s.omega;
    let [a1, a2, a3] = s.alpha;
    let [b1, b2, b3] = s.beta;
    let c = Complex64::new;
    ZCoords {
        w1: c(o1, o2),
        w2: c(o1, -o2),
        w3: c(o3, 0.0),
        x1: c(a1 - b2, a2 + b1),
        x2: c(a1 - b2, -(a2 + b1)),
        y1: c(a1 + b2, a2 - b1),
        y2: c(a1 + b2, -(a2 - b1)),
        z1: c(a3, b3),
        z2: c(a3, -b3),
    }
}

pub fn realify(c: &ComplexState) -> Result<PhaseState> {
    realify_with_tol(c, REALNESS_TOL)
}

pub fn realify_with_tol(c: &ComplexState, tol: f64) -> Result<PhaseState> {
    let deviation = c.realness_deviation();
    if !(deviation <= tol) {
        return Err(Error::NotRealImage { deviation });
    }
    // symmetrize so that the round trip is exact on the conjugate pair
    let w = (c.w1 + c.w2.conj()) * 0.5;
    let x = (c.x1 + c.x2.conj()) * 0.5;
    let y = (c.y1 + c.y2.conj()) * 0.5;
    let z = (c.z1 + c.z2.conj()) * 0.5;
    Ok(PhaseState {
        omega: [w.re, w.im, c.w3.re],
        alpha: [(x.re + y.re) / 2.0, (x.im + y.im) / 2.0, z.re],
        beta: [(x.im - y.im) / 2.0, (y.re - x.re) / 2.0, z.im],
    })
}

/// `(|alpha|^2 - a^2, |beta|^2 - b^2, alpha . beta)`.
pub fn casimir_residuals(s: &PhaseState, params: &Params) -> [f64; 3] {
    let dot = |u: &[f64; 3], v: &[f64; 3]| u[0] * v[0] + u[1] * v[1] + u[2] * v[2];
    [
        dot(&s.alpha, &s.alpha) - params.a * params.a,
        dot(&s.beta, &s.beta) - params.b * params.b,
        dot(&s.alpha, &s.beta),
    ]
}

pub fn casimir_norm(s: &PhaseState, params: &Params) -> f64 {
    casimir_residuals(s, params).iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Orbit constraints in complex form:
/// `z1^2 + x1 y2 - r^2`, `z2^2 + x2 y1 - r^2`, `x1 x2 + y1 y2 + 2 z1 z2 - 2 p^2`.
pub fn orbit_residuals<T: Scalar>(c: &ZCoords<T>, params: &Params) -> [T; 3] {
    let (r2, p2) = (params.r2(), params.p2());
    [
        c.z1 * c.z1 + c.x1 * c.y2 - r2,
        c.z2 * c.z2 + c.x2 * c.y1 - r2,
        c.x1 * c.x2 + c.y1 * c.y2 + c.z1 * c.z2 * 2.0 - p2 * 2.0,
    ]
}

pub fn orbit_residual_norm(c: &ComplexState, params: &Params) -> f64 {
    orbit_residuals(c, params).iter().fold(0.0, |m, x| m.max(x.norm()))
}

/// Real forms of `(G, K, H)`, no orbit check.
pub fn integrals_real(s: &PhaseState, params: &Params) -> IntegralTriple {
    let lam = params.lambda;
    let [o1, o2, o3] = s.omega;
    let [a1, a2, a3] = s.alpha;
    let [b1, b2, b3] = s.beta;
    let h = o1 * o1 + o2 * o2 + 0.5 * o3 * o3 - a1 - b2;
    let k = (o1 * o1 - o2 * o2 + a1 - b2).powi(2)
        + (2.0 * o1 * o2 + a2 + b1).powi(2)
        + 2.0 * lam * ((o3 - lam) * (o1 * o1 + o2 * o2) + 2.0 * o1 * a3 + 2.0 * o2 * b3);
    let m = [2.0 * o1, 2.0 * o2, o3 + lam];
    let ma = m[0] * a1 + m[1] * a2 + m[2] * a3;
    let mb = m[0] * b1 + m[1] * b2 + m[2] * b3;
    let axb = [a2 * b3 - a3 * b2, a3 * b1 - a1 * b3, a1 * b2 - a2 * b1];
    let mab = m[0] * axb[0] + m[1] * axb[1] + m[2] * axb[2];
    let g = 0.25 * (ma * ma + mb * mb) + 0.5 * (o3 - lam) * mab
        - params.b * params.b * a1
        - params.a * params.a * b2;
    IntegralTriple { g, k, h }
}

/// `(G, K, H)` of an on-orbit state; `OffOrbit` beyond [`ORBIT_TOL`].
pub fn integrals(s: &PhaseState, params: &Params) -> Result<IntegralTriple> {
    let residual = casimir_norm(s, params);
    if !(residual < ORBIT_TOL) {
        return Err(Error::OffOrbit { residual });
    }
    Ok(integrals_real(s, params))
}

/// Complex forms `[G, K, H]`. They agree with the real forms on the orbit.
pub fn integrals_complex<T: Scalar>(c: &ZCoords<T>, params: &Params) -> [T; 3] {
    let lam = params.lambda;
    let (p2, r2) = (params.p2(), params.r2());
    let ZCoords { w1, w2, w3, x1, x2, y1, y2, z1, z2 } = *c;
    let h = w1 * w2 + w3 * w3 * 0.5 - (y1 + y2) * 0.5;
    let k = (w1 * w1 + x1) * (w2 * w2 + x2) + (w1 * w2 * w3 + z2 * w1 + z1 * w2) * (2.0 * lam)
        - w1 * w2 * (2.0 * lam * lam);
    let g = (T::cst(p2) - x1 * x2) * w3 * w3 * 0.25
        + (x2 * z1 * w1 + x1 * z2 * w2) * w3 * 0.5
        + (x2 * w1 + y1 * w2) * (y2 * w1 + x1 * w2) * 0.25
        - (y1 + y2) * (0.25 * p2)
        + (x1 + x2) * (0.25 * r2)
        + (z1 * z2 * w3 + y2 * z2 * w1 + y1 * z1 * w2) * (0.5 * lam)
        + (T::cst(p2) - y1 * y2) * (0.25 * lam * lam);
    [g, k, h]
}

pub fn integrals_of_complex(c: &ComplexState, params: &Params) -> IntegralTriple {
    let [g, k, h] = integrals_complex(c, params);
    IntegralTriple { g: g.re, k: k.re, h: h.re }
}
