//! Lax pair with spectral parameter and the equation of the spectral curve.

use nalgebra::Matrix4;
use serde::Serialize;

use crate::dynamics::field_complex;
use crate::error::{Error, Result};
use crate::phase::{integrals_complex, orbit_residual_norm, ComplexState, Params, ORBIT_TOL};
use crate::scalar::Complex64;

pub type CMatrix4 = Matrix4<Complex64>;

fn c(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

/// Part of `L` linear in the state.
fn l_linear(z: &ComplexState, kappa: Complex64) -> CMatrix4 {
    let k = kappa.inv();
    let zero = c(0.0);
    #[rustfmt::skip]
    let m = CMatrix4::new(
        zero,            z.x2 * k,        -z.w2 * 2.0,   z.z2 * k,
        -z.x1 * k,       zero,            -z.z1 * k,     z.w1 * 2.0,
        -z.w1 * 2.0,     z.z2 * k,        -z.w3 * 2.0,   -z.y1 * k,
        -z.z1 * k,       z.w2 * 2.0,      z.y2 * k,      z.w3 * 2.0,
    );
    m
}

/// `(L, M)` at the state `z` and spectral parameter `kappa`.
pub fn lax_matrices(z: &ComplexState, kappa: Complex64, params: &Params) -> Result<(CMatrix4, CMatrix4)> {
    if kappa.norm() == 0.0 {
        return Err(Error::ZeroKappa);
    }
    let lam = params.lambda;
    let mut l = l_linear(z, kappa);
    l[(0, 0)] += lam * 2.0;
    l[(1, 1)] -= lam * 2.0;
    l[(2, 3)] -= kappa * 4.0;
    l[(3, 2)] += kappa * 4.0;
    let zero = c(0.0);
    let h = 0.5;
    #[rustfmt::skip]
    let m = CMatrix4::new(
        -z.w3 * h,  zero,       z.w2 * h,  zero,
        zero,       z.w3 * h,   zero,      -z.w1 * h,
        z.w1 * h,   zero,       z.w3 * h,  kappa,
        zero,       -z.w2 * h,  -kappa,    -z.w3 * h,
    );
    Ok((l, m))
}

/// `||L' - [L, M]||_F`, with `L'` assembled from the complex vector field.
pub fn lax_residual(z: &ComplexState, kappa: Complex64, params: &Params) -> Result<f64> {
    let (l, m) = lax_matrices(z, kappa, params)?;
    let dl = l_linear(&field_complex(z, params), kappa);
    Ok((dl - (l * m - m * l)).norm())
}

/// Coefficients of `det(mu I - A)`, lowest power first, by the
/// Faddeev–LeVerrier recursion.
pub fn char_poly(a: &CMatrix4) -> [Complex64; 5] {
    let mut coef = [c(0.0); 5];
    coef[4] = c(1.0);
    let mut mk = CMatrix4::zeros();
    for k in 1..=4 {
        mk = a * mk + CMatrix4::identity() * coef[5 - k];
        coef[4 - k] = -(a * mk).trace() / k as f64;
    }
    coef
}

/// The curve is `mu^4 + c2 mu^2 + c0 = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpectralCoeffs<T> {
    pub c2: T,
    pub c0: T,
}

/// Curve coefficients from the integral values, with `s = 2 kappa^2`.
pub fn spectral_coeffs(s: Complex64, g: Complex64, k: Complex64, h: Complex64, params: &Params) -> Result<SpectralCoeffs<Complex64>> {
    if s.norm() == 0.0 {
        return Err(Error::SZero);
    }
    let lam2 = params.lambda * params.lambda;
    let (p2, r2) = (params.p2(), params.r2());
    let b = p2 / s - (h * 2.0 + lam2) + s * 2.0;
    let c0 = r2 * r2 / (s * s) + (g * 4.0 - h * (2.0 * p2) - p2 * lam2) * 2.0 / s + (k + h * (2.0 * lam2)) * 4.0 - s * (8.0 * lam2);
    Ok(SpectralCoeffs { c2: b * 4.0, c0: c0 * 4.0 })
}

/// Real-parameter version used by the diagram code.
pub fn spectral_coeffs_real(s: f64, g: f64, k: f64, h: f64, params: &Params) -> Result<SpectralCoeffs<f64>> {
    let r = spectral_coeffs(c(s), c(g), c(k), c(h), params)?;
    Ok(SpectralCoeffs { c2: r.c2.re, c0: r.c0.re })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpectralCheck {
    /// Largest deviation of the even coefficients from the curve.
    pub even: f64,
    /// Largest odd coefficient.
    pub odd: f64,
    /// The same, each coefficient of degree `4 - j` divided by
    /// `max(1, |L|_F^j)`, the size of the terms it is summed from.
    pub even_relative: f64,
    pub odd_relative: f64,
}

impl SpectralCheck {
    pub fn max(&self) -> f64 {
        self.even.max(self.odd)
    }
}

pub fn spectral_check_detail(z: &ComplexState, kappa: Complex64, params: &Params) -> Result<SpectralCheck> {
    let (l, _) = lax_matrices(z, kappa, params)?;
    let res = orbit_residual_norm(z, params);
    if res > ORBIT_TOL {
        return Err(Error::OffOrbit { residual: res });
    }
    let cp = char_poly(&l);
    let [g, k, h] = integrals_complex(z, params);
    let sc = spectral_coeffs(kappa * kappa * 2.0, g, k, h, params)?;
    let n = l.norm();
    let sc_j = |j: i32| n.powi(j).max(1.0);
    let (e2, e0) = ((cp[2] - sc.c2).norm(), (cp[0] - sc.c0).norm());
    let (o3, o1) = (cp[3].norm(), cp[1].norm());
    Ok(SpectralCheck {
        even: e2.max(e0),
        odd: o1.max(o3),
        even_relative: (e2 / sc_j(2)).max(e0 / sc_j(4)),
        odd_relative: (o3 / sc_j(1)).max(o1 / sc_j(3)),
    })
}

/// Largest coefficient deviation of `det(mu I - L)` from the curve.
pub fn spectral_check(z: &ComplexState, kappa: Complex64, params: &Params) -> Result<f64> {
    Ok(spectral_check_detail(z, kappa, params)?.max())
}

/// Eigenvalues of `L`, via the Schur form.
pub fn lax_eigenvalues(z: &ComplexState, kappa: Complex64, params: &Params) -> Result<[Complex64; 4]> {
    let (l, _) = lax_matrices(z, kappa, params)?;
    let ev = l.schur().eigenvalues().ok_or_else(|| Error::NoConvergence("Schur form of L".into()))?;
    Ok([ev[0], ev[1], ev[2], ev[3]])
}

/// Matching distance between two spectra: for each eigenvalue of `a`, the
/// distance to the nearest one in `b`, maximized (and symmetrized).
pub fn spectrum_distance(a: &[Complex64; 4], b: &[Complex64; 4]) -> f64 {
    let one = |a: &[Complex64; 4], b: &[Complex64; 4]| {
        a.iter().map(|x| b.iter().map(|y| (x - y).norm()).fold(f64::INFINITY, f64::min)).fold(0.0, f64::max)
    };
    one(a, b).max(one(b, a))
}

/// Ring `0.1 <= |kappa| <= 10`, log-uniform in the modulus.
pub fn sample_kappa<R: rand::Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let m = 10f64.powf(rng.random_range(-1.0..1.0));
    let arg = rng.random_range(0.0..std::f64::consts::TAU);
    Complex64::from_polar(m, arg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{integrate_with, IntegrateOptions};
    use crate::phase::{complexify, PhaseState};
    use crate::special::equilibria;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn params() -> Params {
        Params::new(1.1, 0.6, 0.8).unwrap()
    }

    fn det4(m: &CMatrix4) -> Complex64 {
        // cofactor expansion, independent of the LU in nalgebra
        let minor = |r: usize, col: usize| {
            let idx = |skip: usize| (0..4).filter(move |i| *i != skip).collect::<Vec<_>>();
            let (rs, cs) = (idx(r), idx(col));
            let e = |i: usize, j: usize| m[(rs[i], cs[j])];
            e(0, 0) * (e(1, 1) * e(2, 2) - e(1, 2) * e(2, 1)) - e(0, 1) * (e(1, 0) * e(2, 2) - e(1, 2) * e(2, 0))
                + e(0, 2) * (e(1, 0) * e(2, 1) - e(1, 1) * e(2, 0))
        };
        (0..4).map(|j| m[(0, j)] * minor(0, j) * if j % 2 == 0 { 1.0 } else { -1.0 }).sum()
    }

    #[test]
    fn trace_and_entries() {
        let p = params();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let z = complexify(&PhaseState::random_on_orbit(&mut rng, &p, 1.0));
        let kappa = Complex64::new(0.7, 0.2);
        let (l, m) = lax_matrices(&z, kappa, &p).unwrap();
        assert!(l.trace().norm() < 1e-14);
        assert!(m.trace().norm() < 1e-14);
        assert_eq!(l[(0, 1)], z.x2 / kappa);
        assert_eq!(l[(2, 3)], -z.y1 / kappa - kappa * 4.0);
        assert!(matches!(lax_matrices(&z, c(0.0), &p), Err(Error::ZeroKappa)));
    }

    #[test]
    fn lax_identity_holds() {
        let p = params();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20 {
            let z = complexify(&PhaseState::random_on_orbit(&mut rng, &p, 1.0));
            for _ in 0..5 {
                let k = sample_kappa(&mut rng);
                assert!(lax_residual(&z, k, &p).unwrap() < 1e-10);
            }
        }
    }

    #[test]
    fn lax_identity_off_orbit() {
        let p = params();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut s = PhaseState::random_on_orbit(&mut rng, &p, 1.0);
        s.alpha[0] += 0.3;
        s.beta[2] -= 0.2;
        let z = complexify(&s);
        assert!(lax_residual(&z, Complex64::new(0.4, -1.3), &p).unwrap() < 1e-10);
    }

    #[test]
    fn equilibria_have_constant_l() {
        let p = params();
        for s in equilibria(&p) {
            assert!(lax_residual(&complexify(&s), c(1.5), &p).unwrap() < 1e-13);
        }
    }

    #[test]
    fn char_poly_matches_cofactor_determinant() {
        let p = params();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let z = complexify(&PhaseState::random_on_orbit(&mut rng, &p, 1.0));
        let (l, _) = lax_matrices(&z, Complex64::new(0.9, 0.3), &p).unwrap();
        let cp = char_poly(&l);
        for mu in [c(0.0), c(1.3), Complex64::new(-0.4, 2.0)] {
            let direct = det4(&(CMatrix4::identity() * mu - l));
            let via: Complex64 = cp.iter().rev().fold(c(0.0), |acc, x| acc * mu + x);
            assert!((direct - via).norm() < 1e-10 * (1.0 + direct.norm()));
        }
    }

    #[test]
    fn spectral_identity() {
        let p = params();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..30 {
            let z = complexify(&PhaseState::random_on_orbit(&mut rng, &p, 1.0));
            let k = sample_kappa(&mut rng);
            let d = spectral_check_detail(&z, k, &p).unwrap();
            assert!(d.even < 1e-9 * (1.0 + 1.0 / k.norm_sqr()).powi(2), "{d:?} kappa {k}");
            assert!(d.odd < 1e-11 * (1.0 + 1.0 / k.norm_sqr()).powf(1.5), "{d:?} kappa {k}");
        }
        let z = complexify(&PhaseState::random_on_orbit(&mut rng, &p, 1.0));
        assert!(spectral_check(&z, c(0.7), &p).unwrap() < 1e-9);
    }

    #[test]
    fn spectral_constant_term_without_gyrostat() {
        let p = Params::new(1.1, 0.6, 0.0).unwrap();
        let z = complexify(&equilibria(&p)[1]);
        let kappa = c(0.8);
        let s = 2.0 * 0.64;
        let (l, _) = lax_matrices(&z, kappa, &p).unwrap();
        let cp = char_poly(&l);
        let [g, k, h] = integrals_complex(&z, &p).map(|x| x.re);
        let r4 = p.r2() * p.r2();
        let expect = 4.0 * (r4 / (s * s) + (2.0 / s) * (4.0 * g - 2.0 * p.p2() * h) + 4.0 * k);
        assert!((cp[0].re - expect).abs() < 1e-10 * expect.abs().max(1.0));
    }

    #[test]
    fn spectrum_is_conserved() {
        let p = params();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let s0 = PhaseState::random_on_orbit(&mut rng, &p, 1.0);
        let kappa = Complex64::new(0.8, 0.5);
        let e0 = lax_eigenvalues(&complexify(&s0), kappa, &p).unwrap();
        let opts = IntegrateOptions { t_eval: (1..=10).map(|i| i as f64).collect(), ..IntegrateOptions::new(1e-12) };
        let tr = integrate_with(&s0, &p, 10.0, &opts).unwrap();
        for st in &tr.states {
            let e = lax_eigenvalues(&complexify(st), kappa, &p).unwrap();
            assert!(spectrum_distance(&e0, &e) < 1e-8);
        }
    }

    #[test]
    fn kappa_ring() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let k = sample_kappa(&mut rng).norm();
            assert!((0.1..=10.0).contains(&k));
        }
    }
}
