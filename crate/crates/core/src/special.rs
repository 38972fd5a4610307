//! Closed-form critical motions: equilibria, pendulum families and the
//! one-parameter family of rank-one periodic motions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::phase::{orbit_residual_norm, ComplexState, Params, PhaseState, ZCoords};
use crate::poly::{self, RealRoot};
use crate::scalar::Complex64;

/// The four equilibria `omega = 0, alpha = e1 a e1, beta = e2 b e2`, in the
/// sign order `(+,+), (+,-), (-,+), (-,-)`.
pub fn equilibria(params: &Params) -> [PhaseState; 4] {
    [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)].map(|(e1, e2)| PhaseState {
        omega: [0.0; 3],
        alpha: [e1 * params.a, 0.0, 0.0],
        beta: [0.0, e2 * params.b, 0.0],
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PendulumFamily {
    P1,
    P2,
    P3,
}

impl std::str::FromStr for PendulumFamily {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "P1" | "p1" | "1" => Ok(PendulumFamily::P1),
            "P2" | "p2" | "2" => Ok(PendulumFamily::P2),
            "P3" | "p3" | "3" => Ok(PendulumFamily::P3),
            _ => Err(Error::InvalidParams(format!("unknown pendulum family {s}"))),
        }
    }
}

/// Point of a pendulum motion with angle `phi` and rate `dphi`; `sign` selects
/// the orientation of the fixed field. `P1`, `P2` need `lambda = 0`.
///
/// * `P1`: rotation about `e1`, `alpha = +-a e1`, `2 phi'' = -b sin phi`
/// * `P2`: rotation about `e2`, `beta = +-b e2`, `2 phi'' = -a sin phi`
/// * `P3`: rotation about `e3`, `phi'' = -(a +- b) sin phi`
pub fn pendulum_state(family: PendulumFamily, phi: f64, dphi: f64, sign: f64, params: &Params) -> Result<PhaseState> {
    let sg = if sign < 0.0 { -1.0 } else { 1.0 };
    let (a, b) = (params.a, params.b);
    let (s, c) = phi.sin_cos();
    match family {
        PendulumFamily::P3 => Ok(PhaseState {
            omega: [0.0, 0.0, dphi],
            alpha: [a * c, -a * s, 0.0],
            beta: [sg * b * s, sg * b * c, 0.0],
        }),
        _ if params.lambda != 0.0 => Err(Error::InadmissibleFamily(match family {
            PendulumFamily::P1 => "P1",
            _ => "P2",
        })),
        PendulumFamily::P1 => Ok(PhaseState {
            omega: [dphi, 0.0, 0.0],
            alpha: [sg * a, 0.0, 0.0],
            beta: [0.0, b * c, -b * s],
        }),
        PendulumFamily::P2 => Ok(PhaseState {
            omega: [0.0, dphi, 0.0],
            alpha: [a * c, 0.0, a * s],
            beta: [0.0, sg * b, 0.0],
        }),
    }
}

/// Largest violation of the algebraic relations defining the family.
pub fn pendulum_family_distance(family: PendulumFamily, s: &PhaseState, sign: f64, params: &Params) -> f64 {
    let sg = if sign < 0.0 { -1.0 } else { 1.0 };
    let (a, b) = (params.a, params.b);
    let [o1, o2, o3] = s.omega;
    let [a1, a2, a3] = s.alpha;
    let [b1, b2, b3] = s.beta;
    let v = match family {
        PendulumFamily::P3 => vec![o1, o2, a3, b3, b1 + sg * b / a * a2, b2 - sg * b / a * a1],
        PendulumFamily::P1 => vec![o2, o3, a1 - sg * a, a2, a3, b1],
        PendulumFamily::P2 => vec![o1, o3, b1, b2 - sg * b, b3, a2],
    };
    v.into_iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Coefficients (highest power first) of the quintic in `u` that ties the
/// constants of the rank-one family to the multiplier `sigma`.
pub fn rank1_quintic(sigma: f64, params: &Params) -> [f64; 6] {
    let l2 = params.lambda * params.lambda;
    let r4 = params.r2() * params.r2();
    let p2 = params.p2();
    let a = l2 + sigma;
    [
        l2 * a * a,
        a * (2.0 * p2 * l2 * l2 - a.powi(3) * sigma) * sigma,
        r4 * l2.powi(3) * sigma * sigma,
        2.0 * r4 * l2 * l2 * sigma.powi(4) * a * a,
        0.0,
        -r4 * r4 * l2.powi(4) * sigma.powi(6),
    ]
}

fn check_rank1_params(sigma: f64, params: &Params) -> Result<()> {
    if sigma == 0.0 || !sigma.is_finite() {
        return Err(Error::InvalidParams("sigma must be finite and nonzero".into()));
    }
    if params.lambda == 0.0 {
        return Err(Error::InvalidParams("the rank-one family needs lambda != 0".into()));
    }
    if sigma + params.lambda * params.lambda == 0.0 {
        return Err(Error::DegenerateDenominator("sigma + lambda^2"));
    }
    Ok(())
}

/// Real roots `u` of the quintic with residual below `1e-9` (relative).
/// An empty list is a valid answer.
pub fn rank1_solve_u(sigma: f64, params: &Params) -> Result<Vec<RealRoot>> {
    check_rank1_params(sigma, params)?;
    let c = rank1_quintic(sigma, params);
    Ok(poly::real_roots(&c, 1e-7, 1e-7).into_iter().filter(|r| r.residual < 1e-9 && r.value != 0.0).collect())
}

/// `Q(w)`; the branch variable solves `q^4 - 2 Q q^2 + 1 = 0`.
pub fn rank1_q_of_w(sigma: f64, u: f64, w: f64, params: &Params) -> f64 {
    let l2 = params.lambda * params.lambda;
    let (r2, a) = (params.r2(), l2 + sigma);
    (sigma * u.powi(3) + a * (l2 * w * w + sigma * sigma * (2.0 * w - sigma)) * u * u + r2 * r2 * l2 * l2 * sigma.powi(4))
        / (2.0 * r2 * l2 * sigma * sigma * a * u * w)
}

/// `(P+(w), P-(w))`, whose product governs `(dw/dt)^2`.
pub fn rank1_polys(sigma: f64, u: f64, w: f64, params: &Params) -> (f64, f64) {
    let [cp, cm] = rank1_poly_coeffs(sigma, u, params);
    (cp[0] * w * w + cp[1] * w + cp[2], cm[0] * w * w + cm[1] * w + cm[2])
}

fn rank1_poly_coeffs(sigma: f64, u: f64, params: &Params) -> [[f64; 3]; 2] {
    let l2 = params.lambda * params.lambda;
    let (r2, a) = (params.r2(), l2 + sigma);
    let c0 = sigma * (u.powi(3) - a * sigma * sigma * u * u + r2 * r2 * l2 * l2 * sigma.powi(3)) / (a * l2 * u * u);
    let lin = |s: f64| 2.0 * sigma * sigma * (u + s * r2 * l2) / (l2 * u);
    [[1.0, lin(1.0), c0], [1.0, lin(-1.0), c0]]
}

/// Intervals of `w > 0` on which `P+ P- <= 0`, i.e. where real motions live.
/// Their end points are the turning points of `w(t)`.
pub fn rank1_windows(sigma: f64, u: f64, params: &Params) -> Vec<(f64, f64)> {
    let [cp, cm] = rank1_poly_coeffs(sigma, u, params);
    let mut pts: Vec<f64> = poly::real_roots(&cp, 1e-12, 1e-14)
        .into_iter()
        .chain(poly::real_roots(&cm, 1e-12, 1e-14))
        .map(|r| r.value)
        .filter(|w| *w > 0.0)
        .collect();
    pts.push(0.0);
    pts.sort_by(|a, b| a.total_cmp(b));
    pts.dedup();
    let mut out: Vec<(f64, f64)> = Vec::new();
    for seg in pts.windows(2) {
        let mid = 0.5 * (seg[0] + seg[1]);
        let (pp, pm) = rank1_polys(sigma, u, mid, params);
        if pp * pm < 0.0 {
            match out.last_mut() {
                Some(last) if last.1 == seg[0] => last.1 = seg[1],
                _ => out.push((seg[0], seg[1])),
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Rank1Data {
    pub sigma: f64,
    pub u: f64,
    pub w: f64,
    pub q: Complex64,
}

impl Rank1Data {
    /// Picks the branch `q` as described for [`rank1_point`] and checks the
    /// quintic residual.
    pub fn new(sigma: f64, u: f64, w: f64, params: &Params) -> Result<Self> {
        check_rank1_params(sigma, params)?;
        let qr = poly::relative_residual(&rank1_quintic(sigma, params), Complex64::new(u, 0.0));
        if !(qr < 1e-9) {
            return Err(Error::InvalidParams(format!("u = {u} is not a root of the quintic (residual {qr:.3e})")));
        }
        if w == 0.0 || u == 0.0 {
            return Err(Error::DegenerateDenominator("u w"));
        }
        let qq = Complex64::new(rank1_q_of_w(sigma, u, w, params), 0.0);
        let disc = (qq * qq - 1.0).sqrt();
        let mut best: Option<(f64, f64, Complex64)> = None;
        for t in [qq + disc, qq - disc] {
            let q = t.sqrt();
            let bq = (q.powu(4) - qq * q * q * 2.0 + 1.0).norm();
            if !(bq < 1e-10 * (1.0 + qq.norm())) {
                continue;
            }
            let d = Rank1Data { sigma, u, w, q };
            let res = orbit_residual_norm(&rank1_point_unchecked(&d, params), params);
            let better = match best {
                None => true,
                Some((r0, _, q0)) => {
                    let tie = (res - r0).abs() <= 1e-12 * (1.0 + r0);
                    if tie { q.norm() <= 1.0 && q0.norm() > 1.0 } else { res < r0 }
                }
            };
            if better {
                best = Some((res, bq, q));
            }
        }
        match best {
            Some((_, _, q)) => Ok(Rank1Data { sigma, u, w, q }),
            None => {
                let q = (qq + disc).sqrt();
                Err(Error::BranchFailure { residual: (q.powu(4) - qq * q * q * 2.0 + 1.0).norm() })
            }
        }
    }
}

/// Point of the rank-one family for the constants `(sigma, u)` at the value
/// `w` of the dynamical variable.
pub fn rank1_point(d: &Rank1Data, params: &Params) -> Result<ComplexState> {
    let qq = rank1_q_of_w(d.sigma, d.u, d.w, params);
    let residual = (d.q.powu(4) - d.q * d.q * (2.0 * qq) + 1.0).norm();
    if !(residual < 1e-10 * (1.0 + qq.abs())) {
        return Err(Error::BranchFailure { residual });
    }
    Ok(rank1_point_unchecked(d, params))
}

fn rank1_point_unchecked(d: &Rank1Data, params: &Params) -> ComplexState {
    let Rank1Data { sigma, u, w, q } = *d;
    let lam = params.lambda;
    let l2 = lam * lam;
    let (r2, a) = (params.r2(), l2 + sigma);
    let sw = Complex64::new(w, 0.0).sqrt();
    let q2 = q * q;
    let yc = sigma * (1.0 + sigma / l2 - r2 * r2 * l2 * sigma / (u * u));
    ZCoords {
        w1: q * sw,
        w2: sw / q,
        w3: Complex64::new(lam * w / sigma, 0.0),
        x1: (-q2 * (a * u * w) + r2 * l2 * sigma * sigma) / (sigma * u),
        x2: (-(a * u * w) / q2 + r2 * l2 * sigma * sigma) / (sigma * u),
        y1: q2 * (r2 * l2 / u * w) + yc,
        y2: (r2 * l2 / u * w) / q2 + yc,
        z1: -(sw / q) * (r2 * lam * sigma / u) + q * sw * (a / lam),
        z2: -(q * sw) * (r2 * lam * sigma / u) + (sw / q) * (a / lam),
    }
}

/// `(dw/dt)^2 + lambda^2 / (4 sigma^2) P+ P-` at a real state of the family,
/// with `w = sigma omega3 / lambda`.
pub fn rank1_dwdt_residual(sigma: f64, u: f64, s: &PhaseState, params: &Params) -> f64 {
    let lam = params.lambda;
    let w = sigma * s.omega[2] / lam;
    let dw = sigma / lam * (s.alpha[1] - s.beta[0]);
    let (pp, pm) = rank1_polys(sigma, u, w, params);
    dw * dw + lam * lam / (4.0 * sigma * sigma) * pp * pm
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Rank1Motion {
    pub sigma: f64,
    pub u: f64,
    pub window: (f64, f64),
}

/// Admissible `(sigma, u)` pairs with a nonempty real-motion window, for the
/// listed values of `sigma`.
pub fn rank1_admissible(sigmas: &[f64], params: &Params) -> Vec<Rank1Motion> {
    let mut out = Vec::new();
    for &sigma in sigmas {
        let Ok(roots) = rank1_solve_u(sigma, params) else { continue };
        for r in roots.iter().filter(|r| r.multiplicity == 1) {
            for window in rank1_windows(sigma, r.value, params) {
                if window.1 - window.0 > 1e-6 * window.1.max(1.0) {
                    out.push(Rank1Motion { sigma, u: r.value, window });
                }
            }
        }
    }
    out
}
