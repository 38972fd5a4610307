//! Roots of real polynomials: companion-matrix eigenvalues polished by Newton.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::scalar::Complex64;

/// Coefficients are stored from the highest power down.
pub fn horner(coeffs: &[f64], x: Complex64) -> Complex64 {
    coeffs.iter().fold(Complex64::new(0.0, 0.0), |acc, &c| acc * x + c)
}

fn horner_with_derivative(coeffs: &[f64], x: Complex64) -> (Complex64, Complex64) {
    let zero = Complex64::new(0.0, 0.0);
    coeffs.iter().fold((zero, zero), |(p, dp), &c| (p * x + c, dp * x + p))
}

/// `|p(x)| / sum |c_i| |x|^i`, the backward-error style relative residual.
pub fn relative_residual(coeffs: &[f64], x: Complex64) -> f64 {
    let scale = coeffs.iter().fold(0.0, |acc, &c| acc * x.norm() + c.abs());
    if scale == 0.0 {
        return 0.0;
    }
    horner(coeffs, x).norm() / scale
}

/// All complex roots, with leading zero coefficients stripped.
///
/// The largest root of the companion matrix is polished against the full
/// polynomial and deflated (a conjugate pair as one real quadratic); the
/// quotient is rescaled and solved again. This keeps clustered small roots
/// resolvable next to a large one.
pub fn roots(coeffs: &[f64]) -> Vec<Complex64> {
    let first = coeffs.iter().position(|&c| c != 0.0);
    let Some(first) = first else { return Vec::new() };
    let full = &coeffs[first..];
    let mut cur: Vec<f64> = full.to_vec();
    let mut out = Vec::new();
    while cur.len() > 3 {
        let z = companion_eigenvalues(&cur)
            .into_iter()
            .max_by(|a, b| a.norm().total_cmp(&b.norm()))
            .unwrap_or_default();
        let z = polish(full, polish(&cur, z));
        if z.im.abs() <= 1e-12 * z.norm() {
            let r = z.re;
            out.push(Complex64::new(r, 0.0));
            cur = deflate(&cur, &[1.0, -r]);
        } else {
            out.push(z);
            out.push(z.conj());
            cur = deflate(&cur, &[1.0, -2.0 * z.re, z.norm_sqr()]);
        }
    }
    out.extend(small_roots(&cur).into_iter().map(|z| polish(full, z)));
    out
}

fn companion_eigenvalues(c: &[f64]) -> Vec<Complex64> {
    let n = c.len() - 1;
    // balance the scale of the coefficients by x = rho * y
    let lead = c[0].abs();
    let mut rho: f64 = 0.0;
    for (i, ci) in c.iter().enumerate().skip(1) {
        if *ci != 0.0 {
            rho = rho.max((ci.abs() / lead).powf(1.0 / i as f64));
        }
    }
    if rho == 0.0 {
        rho = 1.0;
    }
    let mut comp = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        comp[(0, j)] = -c[j + 1] / c[0] / rho.powi(j as i32 + 1);
    }
    for i in 1..n {
        comp[(i, i - 1)] = 1.0;
    }
    comp.complex_eigenvalues().iter().map(|y| *y * rho).collect()
}

/// Quotient by a factor holding the largest roots. The division runs from the
/// constant term (reversed polynomials), which is the stable direction here.
fn deflate(num: &[f64], den: &[f64]) -> Vec<f64> {
    if *den.last().unwrap() == 0.0 {
        return divide(num, den);
    }
    let rev = |v: &[f64]| v.iter().rev().copied().collect::<Vec<f64>>();
    rev(&divide(&rev(num), &rev(den)))
}

/// Quotient of polynomial division, remainder dropped.
fn divide(num: &[f64], den: &[f64]) -> Vec<f64> {
    let mut rem = num.to_vec();
    let n = num.len() - den.len() + 1;
    let mut q = vec![0.0; n];
    for i in 0..n {
        let c = rem[i] / den[0];
        q[i] = c;
        for (j, d) in den.iter().enumerate() {
            rem[i + j] -= c * d;
        }
    }
    q
}

fn small_roots(c: &[f64]) -> Vec<Complex64> {
    match c.len() {
        2 => vec![Complex64::new(-c[1] / c[0], 0.0)],
        3 => {
            let (a, b, cc) = (c[0], c[1], c[2]);
            let disc = b * b - 4.0 * a * cc;
            if disc >= 0.0 {
                let q = -0.5 * (b + b.signum() * disc.sqrt());
                if q == 0.0 {
                    return vec![Complex64::new(0.0, 0.0); 2];
                }
                vec![Complex64::new(q / a, 0.0), Complex64::new(cc / q, 0.0)]
            } else {
                let re = -b / (2.0 * a);
                let im = (-disc).sqrt() / (2.0 * a.abs());
                vec![Complex64::new(re, im), Complex64::new(re, -im)]
            }
        }
        _ => Vec::new(),
    }
}

/// Newton refinement; keeps the input if the iteration does not improve it.
pub fn polish(coeffs: &[f64], x0: Complex64) -> Complex64 {
    let mut x = x0;
    let mut best = (relative_residual(coeffs, x), x);
    for _ in 0..50 {
        let (p, dp) = horner_with_derivative(coeffs, x);
        if dp.norm() == 0.0 || p.norm() == 0.0 {
            break;
        }
        let next = x - p / dp;
        if !(next.re.is_finite() && next.im.is_finite()) {
            break;
        }
        x = next;
        let r = relative_residual(coeffs, x);
        if r < best.0 {
            best = (r, x);
        } else if r > 4.0 * best.0 {
            break;
        }
        if (p / dp).norm() <= 1e-16 * x.norm() {
            break;
        }
    }
    best.1
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RealRoot {
    pub value: f64,
    pub multiplicity: usize,
    pub residual: f64,
}

/// Real roots in increasing order. Roots closer than `cluster` (relative)
/// are merged and reported with their multiplicity.
pub fn real_roots(coeffs: &[f64], imag_tol: f64, cluster: f64) -> Vec<RealRoot> {
    let all = roots(coeffs);
    let mut reals: Vec<f64> = all
        .iter()
        .filter(|z| z.im.abs() <= imag_tol * z.norm().max(1.0))
        .map(|z| polish(coeffs, Complex64::new(z.re, 0.0)).re)
        .collect();
    reals.sort_by(|a, b| a.total_cmp(b));
    let mut out: Vec<RealRoot> = Vec::new();
    for x in reals {
        if let Some(last) = out.last_mut() {
            if (x - last.value).abs() <= cluster * x.abs().max(1.0) {
                last.multiplicity += 1;
                continue;
            }
        }
        out.push(RealRoot { value: x, multiplicity: 1, residual: 0.0 });
    }
    // complex pairs very close to the real axis belong to a real multiple root
    for z in &all {
        if z.im.abs() > imag_tol * z.norm().max(1.0) {
            if let Some(r) = out.iter_mut().find(|r| (z - r.value).norm() <= cluster * r.value.abs().max(1.0)) {
                r.multiplicity += 1;
            }
        }
    }
    for r in &mut out {
        r.residual = relative_residual(coeffs, Complex64::new(r.value, 0.0));
    }
    out
}

/// Sign changes of `p` between consecutive points of an increasing grid,
/// refined by bisection.
pub fn bracketed_real_roots(coeffs: &[f64], grid: &[f64]) -> Vec<f64> {
    let p = |x: f64| horner(coeffs, Complex64::new(x, 0.0)).re;
    let mut out = Vec::new();
    let Some(&lo) = grid.first() else { return out };
    let mut x0 = lo;
    let mut f0 = p(x0);
    for &x1 in &grid[1..] {
        let f1 = p(x1);
        if f0 == 0.0 {
            out.push(x0);
        } else if f0 * f1 < 0.0 {
            let (mut a, mut b, mut fa) = (x0, x1, f0);
            for _ in 0..200 {
                let m = 0.5 * (a + b);
                if m <= a || m >= b {
                    break;
                }
                let fm = p(m);
                if fm == 0.0 {
                    a = m;
                    b = m;
                    break;
                }
                if fa * fm < 0.0 {
                    b = m;
                } else {
                    a = m;
                    fa = fm;
                }
            }
            out.push(0.5 * (a + b));
        }
        x0 = x1;
        f0 = f1;
    }
    out
}
