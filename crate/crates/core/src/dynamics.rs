//! Equations of motion, trajectory integration and the numerical Lie–Poisson bracket.

use crate::error::{Error, Result};
use crate::ode::{self, Dop853Options};
use crate::phase::{casimir_norm, integrals_real, IntegralTriple, Params, PhaseState, ZCoords, ORBIT_TOL};
use crate::scalar::{Complex64, Scalar};

/// Principal moments of inertia in the normalized units.
pub const INERTIA: [f64; 3] = [2.0, 2.0, 1.0];

/// Default relative finite-difference step of [`bracket_oracle`].
pub const FD_STEP: f64 = 1e-6;

pub fn field_real(s: &PhaseState, params: &Params) -> [f64; 9] {
    field_real_flat(&s.to_array(), params.lambda)
}

fn field_real_flat(v: &[f64; 9], lam: f64) -> [f64; 9] {
    let [o1, o2, o3, a1, a2, a3, b1, b2, b3] = *v;
    [
        0.5 * (o2 * (o3 - lam) + b3),
        -0.5 * (o1 * (o3 - lam) + a3),
        a2 - b1,
        a2 * o3 - a3 * o2,
        a3 * o1 - a1 * o3,
        a1 * o2 - a2 * o1,
        b2 * o3 - b3 * o2,
        b3 * o1 - b1 * o3,
        b1 * o2 - b2 * o1,
    ]
}

/// Derivative of the complex coordinates with respect to complex time `i t`.
/// Along real motions `d/dt complexify(s) = i * field_complex(complexify(s))`.
pub fn field_complex<T: Scalar>(c: &ZCoords<T>, params: &Params) -> ZCoords<T> {
    let lam = params.lambda;
    let ZCoords { w1, w2, w3, x1, x2, y1, y2, z1, z2 } = *c;
    ZCoords {
        w1: -(w1 * (w3 - lam) + z1) * 0.5,
        w2: (w2 * (w3 - lam) + z2) * 0.5,
        w3: (y2 - y1) * 0.5,
        x1: -x1 * w3 + z1 * w1,
        x2: x2 * w3 - z2 * w2,
        y1: -y1 * w3 + z2 * w1,
        y2: y2 * w3 - z1 * w2,
        z1: (x1 * w2 - y2 * w1) * 0.5,
        z2: (y1 * w2 - x2 * w1) * 0.5,
    }
}

#[derive(Debug, Clone, Default)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<PhaseState>,
    pub integrals: Vec<IntegralTriple>,
    /// Integral values minus their values at the first time.
    pub drift: Vec<IntegralTriple>,
    /// Largest Casimir residual of each stored state.
    pub casimir: Vec<f64>,
}

impl Trajectory {
    fn push(&mut self, t: f64, s: PhaseState, params: &Params) {
        let j = integrals_real(&s, params);
        let d = match self.integrals.first() {
            Some(j0) => IntegralTriple { g: j.g - j0.g, k: j.k - j0.k, h: j.h - j0.h },
            None => IntegralTriple { g: 0.0, k: 0.0, h: 0.0 },
        };
        self.times.push(t);
        self.states.push(s);
        self.integrals.push(j);
        self.drift.push(d);
        self.casimir.push(casimir_norm(&s, params));
    }

    pub fn max_drift(&self) -> f64 {
        self.drift.iter().fold(0.0, |m, d| m.max(d.g.abs()).max(d.k.abs()).max(d.h.abs()))
    }

    pub fn max_casimir(&self) -> f64 {
        self.casimir.iter().copied().fold(0.0, f64::max)
    }

    pub fn last(&self) -> Option<&PhaseState> {
        self.states.last()
    }
}

#[derive(Debug, Clone)]
pub struct IntegrateOptions {
    pub tol: f64,
    /// Output times; every accepted step is stored when empty.
    pub t_eval: Vec<f64>,
    /// Re-normalize onto the orbit after each step. Off by default because
    /// it would hide the drift that is being measured.
    pub project: bool,
    pub orbit_tol: f64,
}

impl IntegrateOptions {
    pub fn new(tol: f64) -> Self {
        IntegrateOptions { tol, t_eval: Vec::new(), project: false, orbit_tol: ORBIT_TOL }
    }
}

pub fn integrate(s0: &PhaseState, params: &Params, t_end: f64, tol: f64) -> Result<Trajectory> {
    integrate_with(s0, params, t_end, &IntegrateOptions::new(tol))
}

pub fn integrate_with(s0: &PhaseState, params: &Params, t_end: f64, opts: &IntegrateOptions) -> Result<Trajectory> {
    let residual = casimir_norm(s0, params);
    if !(residual < opts.orbit_tol) {
        return Err(Error::OffOrbit { residual });
    }
    if !(opts.tol > 0.0) || !t_end.is_finite() {
        return Err(Error::InvalidParams("tolerance must be positive and t_end finite".into()));
    }
    let lam = params.lambda;
    let (a, b) = (params.a, params.b);
    let projector = move |v: &mut [f64; 9]| project_onto_orbit(v, a, b);
    let post: Option<&dyn Fn(&mut [f64; 9])> = if opts.project { Some(&projector) } else { None };
    let mut traj = Trajectory::default();
    let t_eval_has_start = opts.t_eval.first() == Some(&0.0);
    if opts.t_eval.is_empty() || !t_eval_has_start {
        traj.push(0.0, *s0, params);
    }
    ode::solve(
        |_, y: &[f64; 9]| field_real_flat(y, lam),
        0.0,
        s0.to_array(),
        t_end,
        &opts.t_eval,
        &Dop853Options::with_tol(opts.tol),
        post,
        |t, y| traj.push(t, PhaseState::from_slice(y), params),
    )?;
    Ok(traj)
}

/// Scale `alpha` to length `a`, make `beta` orthogonal to it and of length `b`.
fn project_onto_orbit(v: &mut [f64; 9], a: f64, b: f64) {
    let dot = |u: &[f64], w: &[f64]| u.iter().zip(w).map(|(x, y)| x * y).sum::<f64>();
    let na = dot(&v[3..6], &v[3..6]).sqrt();
    for i in 3..6 {
        v[i] *= a / na;
    }
    let c = dot(&v[3..6], &v[6..9]) / (a * a);
    for i in 0..3 {
        v[6 + i] -= c * v[3 + i];
    }
    let nb = dot(&v[6..9], &v[6..9]).sqrt();
    for i in 6..9 {
        v[i] *= b / nb;
    }
}

/// Lie–Poisson bracket `{f, g}` at `s` with momenta `M = I omega + lambda e3`
/// and central differences of relative step `h_fd`.
///
/// With this convention a function evolves as `df/dt = {H, f}`.
pub fn bracket_oracle(
    f: &dyn Fn(&PhaseState) -> f64,
    g: &dyn Fn(&PhaseState) -> f64,
    s: &PhaseState,
    params: &Params,
    h_fd: f64,
) -> f64 {
    let fc = |x: &PhaseState| Complex64::new(f(x), 0.0);
    let gc = |x: &PhaseState| Complex64::new(g(x), 0.0);
    bracket_oracle_complex(&fc, &gc, s, params, h_fd).re
}

/// Same bracket for complex-valued functions of the real state.
pub fn bracket_oracle_complex(
    f: &dyn Fn(&PhaseState) -> Complex64,
    g: &dyn Fn(&PhaseState) -> Complex64,
    s: &PhaseState,
    params: &Params,
    h_fd: f64,
) -> Complex64 {
    let df = momentum_gradient(f, s, h_fd);
    let dg = momentum_gradient(g, s, h_fd);
    let pi = structure_matrix(s, params);
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..9 {
        for j in 0..9 {
            if pi[i][j] != 0.0 {
                acc += df[i] * pi[i][j] * dg[j];
            }
        }
    }
    acc
}

/// Gradient in the coordinates `(M, alpha, beta)`.
fn momentum_gradient(f: &dyn Fn(&PhaseState) -> Complex64, s: &PhaseState, h_fd: f64) -> [Complex64; 9] {
    let v = s.to_array();
    std::array::from_fn(|i| {
        let h = h_fd * (1.0 + v[i].abs());
        let mut vp = v;
        let mut vm = v;
        vp[i] += h;
        vm[i] -= h;
        let d = (f(&PhaseState::from_slice(&vp)) - f(&PhaseState::from_slice(&vm))) / (2.0 * h);
        if i < 3 {
            d / INERTIA[i]
        } else {
            d
        }
    })
}

fn structure_matrix(s: &PhaseState, params: &Params) -> [[f64; 9]; 9] {
    let m = [INERTIA[0] * s.omega[0], INERTIA[1] * s.omega[1], INERTIA[2] * s.omega[2] + params.lambda];
    let mut pi = [[0.0; 9]; 9];
    for i in 0..3 {
        for j in 0..3 {
            for k in 0..3 {
                let e = levi_civita(i, j, k);
                if e == 0.0 {
                    continue;
                }
                pi[i][j] += e * m[k];
                pi[i][3 + j] += e * s.alpha[k];
                pi[3 + j][i] -= e * s.alpha[k];
                pi[i][6 + j] += e * s.beta[k];
                pi[6 + j][i] -= e * s.beta[k];
            }
        }
    }
    pi
}

fn levi_civita(i: usize, j: usize, k: usize) -> f64 {
    let (i, j, k) = (i as i64, j as i64, k as i64);
    ((i - j) * (j - k) * (k - i)) as f64 / 2.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phase::complexify;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn params() -> Params {
        Params::new(1.3, 0.7, 0.45).unwrap()
    }

    // second coding: Euler equations in vector form with explicit torque
    fn field_oracle(s: &PhaseState, lam: f64) -> [f64; 9] {
        let cross = |u: [f64; 3], v: [f64; 3]| [u[1] * v[2] - u[2] * v[1], u[2] * v[0] - u[0] * v[2], u[0] * v[1] - u[1] * v[0]];
        let w = s.omega;
        let m = [2.0 * w[0], 2.0 * w[1], w[2] + lam];
        let mxw = cross(m, w);
        let torque = {
            let t1 = cross([1.0, 0.0, 0.0], s.alpha);
            let t2 = cross([0.0, 1.0, 0.0], s.beta);
            [t1[0] + t2[0], t1[1] + t2[1], t1[2] + t2[2]]
        };
        let md: Vec<f64> = (0..3).map(|i| (mxw[i] + torque[i]) / INERTIA[i]).collect();
        let ad = cross(s.alpha, w);
        let bd = cross(s.beta, w);
        [md[0], md[1], md[2], ad[0], ad[1], ad[2], bd[0], bd[1], bd[2]]
    }

    #[test]
    fn equilibrium_is_fixed() {
        let p = params();
        for (e1, e2) in [(1.0, 1.0), (-1.0, 1.0), (1.0, -1.0), (-1.0, -1.0)] {
            let s = PhaseState { omega: [0.0; 3], alpha: [e1 * p.a, 0.0, 0.0], beta: [0.0, e2 * p.b, 0.0] };
            assert_eq!(field_real(&s, &p), [0.0; 9]);
            let fc = field_complex(&complexify(&s), &p);
            assert!(fc.to_array().iter().all(|z| z.norm() == 0.0));
        }
    }

    #[test]
    fn pendulum_angular_acceleration() {
        let p = params();
        for (phi, sign) in [(0.7f64, 1.0), (-2.1, -1.0)] {
            let s = PhaseState {
                omega: [0.0, 0.0, 0.3],
                alpha: [p.a * phi.cos(), -p.a * phi.sin(), 0.0],
                beta: [sign * p.b * phi.sin(), sign * p.b * phi.cos(), 0.0],
            };
            let f = field_real(&s, &p);
            assert!((f[2] + (p.a + sign * p.b) * phi.sin()).abs() < 1e-15);
        }
    }

    #[test]
    fn coordinate_brackets() {
        let p = params();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = PhaseState::random_on_orbit(&mut rng, &p, 1.0);
        let m = |i: usize| move |x: &PhaseState| INERTIA[i] * x.omega[i] + if i == 2 { p.lambda } else { 0.0 };
        let b = bracket_oracle(&m(0), &m(1), &s, &p, FD_STEP);
        assert!((b - (s.omega[2] + p.lambda)).abs() < 1e-8);
        let b = bracket_oracle(&|x: &PhaseState| x.alpha[0], &|x: &PhaseState| x.beta[1], &s, &p, FD_STEP);
        assert_eq!(b, 0.0);
    }

    #[test]
    fn integrals_are_in_involution() {
        let p = params();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let h = |x: &PhaseState| integrals_real(x, &p).h;
        let k = |x: &PhaseState| integrals_real(x, &p).k;
        let g = |x: &PhaseState| integrals_real(x, &p).g;
        for _ in 0..10 {
            let s = PhaseState::random_on_orbit(&mut rng, &p, 1.0);
            assert!(bracket_oracle(&h, &k, &s, &p, FD_STEP).abs() < 1e-7);
            assert!(bracket_oracle(&h, &g, &s, &p, FD_STEP).abs() < 1e-7);
            assert!(bracket_oracle(&k, &g, &s, &p, FD_STEP).abs() < 1e-7);
        }
    }

    #[test]
    fn hamiltonian_bracket_generates_the_flow() {
        let p = params();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let s = PhaseState::random_on_orbit(&mut rng, &p, 1.0);
        let h = |x: &PhaseState| integrals_real(x, &p).h;
        let f = field_real(&s, &p);
        for (i, fi) in f.iter().enumerate() {
            let coord = move |x: &PhaseState| x.to_array()[i];
            assert!((bracket_oracle(&h, &coord, &s, &p, FD_STEP) - fi).abs() < 1e-8);
        }
    }

    #[test]
    fn equilibrium_trajectory_is_constant() {
        let p = params();
        let s = PhaseState { omega: [0.0; 3], alpha: [p.a, 0.0, 0.0], beta: [0.0, p.b, 0.0] };
        let tr = integrate(&s, &p, 10.0, 1e-10).unwrap();
        assert!(tr.states.iter().all(|x| *x == s));
        assert_eq!(tr.max_drift(), 0.0);
    }

    #[test]
    fn lambda_zero_p1_family_is_invariant() {
        let p = Params::new(1.3, 0.7, 0.0).unwrap();
        let (phi, dphi) = (0.4f64, 0.9);
        let s = PhaseState {
            omega: [dphi, 0.0, 0.0],
            alpha: [p.a, 0.0, 0.0],
            beta: [0.0, p.b * phi.cos(), -p.b * phi.sin()],
        };
        let tr = integrate(&s, &p, 20.0, 1e-12).unwrap();
        for x in &tr.states {
            assert!(x.omega[1].abs() < 1e-12 && x.omega[2].abs() < 1e-12);
            assert!((x.alpha[0] - p.a).abs() < 1e-12 && x.alpha[1].abs() < 1e-12 && x.alpha[2].abs() < 1e-12);
        }
    }

    #[test]
    fn conservation_over_long_run() {
        let p = params();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let s = PhaseState::random_on_orbit(&mut rng, &p, 1.0);
        let tr = integrate(&s, &p, 100.0, 1e-12).unwrap();
        assert!(tr.max_drift() < 1e-9, "drift {}", tr.max_drift());
        assert!(tr.max_casimir() < 1e-9);
        assert!(tr.times.windows(2).all(|w| w[1] > w[0]));
        assert_eq!(tr.drift[0], IntegralTriple { g: 0.0, k: 0.0, h: 0.0 });
    }

    #[test]
    fn projection_keeps_casimirs_at_rounding() {
        let p = params();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let s = PhaseState::random_on_orbit(&mut rng, &p, 1.0);
        let opts = IntegrateOptions { project: true, ..IntegrateOptions::new(1e-8) };
        let tr = integrate_with(&s, &p, 50.0, &opts).unwrap();
        assert!(tr.max_casimir() < 1e-13);
    }

    #[test]
    fn off_orbit_start_is_rejected() {
        let p = params();
        let s = PhaseState { omega: [0.0; 3], alpha: [p.a * 1.01, 0.0, 0.0], beta: [0.0, p.b, 0.0] };
        assert!(matches!(integrate(&s, &p, 1.0, 1e-10), Err(Error::OffOrbit { .. })));
    }

    proptest! {
        #[test]
        fn field_matches_vector_form(v in prop::array::uniform9(-2.0f64..2.0), lam in -1.0f64..1.0) {
            let p = Params::new(1.3, 0.7, lam).unwrap();
            let s = PhaseState::from_slice(&v);
            let f = field_real(&s, &p);
            let o = field_oracle(&s, lam);
            for i in 0..9 {
                prop_assert!((f[i] - o[i]).abs() < 1e-14);
            }
        }

        // complexify is linear, so its differential is itself
        #[test]
        fn complex_field_is_pushforward(v in prop::array::uniform9(-2.0f64..2.0), lam in -1.0f64..1.0) {
            let p = Params::new(1.3, 0.7, lam).unwrap();
            let s = PhaseState::from_slice(&v);
            let push = complexify(&PhaseState::from_slice(&field_real(&s, &p)));
            let fc = field_complex(&complexify(&s), &p);
            for (u, w) in push.to_array().iter().zip(fc.to_array().iter()) {
                prop_assert!((u - Complex64::i() * w).norm() < 1e-12);
            }
        }
    }
}
