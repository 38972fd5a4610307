//! Bifurcation surfaces in the space of integral values, their slices at
//! fixed energy, and the singular points of those slices.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::phase::{integrals_complex, Params};
use crate::poly;
use crate::special::{rank1_point, rank1_solve_u, Rank1Data};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    GammaPlus,
    GammaMinus,
    Gamma1,
    Gamma2,
}

impl Branch {
    pub const ALL: [Branch; 4] = [Branch::GammaPlus, Branch::GammaMinus, Branch::Gamma1, Branch::Gamma2];

    pub fn name(self) -> &'static str {
        match self {
            Branch::GammaPlus => "gamma_plus",
            Branch::GammaMinus => "gamma_minus",
            Branch::Gamma1 => "gamma1",
            Branch::Gamma2 => "gamma2",
        }
    }

    fn is_line(self) -> bool {
        matches!(self, Branch::GammaPlus | Branch::GammaMinus)
    }
}

impl std::fmt::Display for Branch {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Branch {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Branch::ALL
            .into_iter()
            .find(|b| b.name() == s)
            .ok_or_else(|| Error::InvalidParams(format!("unknown branch {s}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurvePoint {
    pub g: f64,
    pub k: f64,
    pub dg_ds: f64,
    pub dk_ds: f64,
}

/// `h - lambda^2 / 2`.
pub fn shifted_energy(h: f64, params: &Params) -> f64 {
    h - 0.5 * params.lambda * params.lambda
}

/// The lines, as functions of the energy: `[plus, minus]` at `h`.
/// Derivatives are taken along the line, with respect to `h`.
pub fn gamma_lines(h: f64, params: &Params) -> [CurvePoint; 2] {
    let ab = params.a * params.b;
    let ht = shifted_energy(h, params);
    [1.0, -1.0].map(|sg| CurvePoint {
        g: -sg * ab * ht,
        k: (params.a + sg * params.b).powi(2),
        dg_ds: -sg * ab,
        dk_ds: 0.0,
    })
}

pub fn gamma1(s: f64, h: f64, params: &Params) -> Result<CurvePoint> {
    if s == 0.0 {
        return Err(Error::SZero);
    }
    let l2 = params.lambda * params.lambda;
    let r4 = params.r2() * params.r2();
    let p2 = params.p2();
    Ok(CurvePoint {
        g: -l2 * s * s + 0.5 * p2 * (h + 0.5 * l2) - r4 / (4.0 * s),
        k: 4.0 * l2 * s - 2.0 * l2 * h + r4 / (4.0 * s * s),
        dg_ds: -2.0 * l2 * s + r4 / (4.0 * s * s),
        dk_ds: 4.0 * l2 - r4 / (2.0 * s * s * s),
    })
}

/// `p^4 - r^4 = 4 a^2 b^2`.
fn q_const(params: &Params) -> f64 {
    4.0 * (params.a * params.b).powi(2)
}

pub fn gamma2(s: f64, h: f64, params: &Params) -> Result<CurvePoint> {
    if s == 0.0 {
        return Err(Error::SZero);
    }
    let ht = shifted_energy(h, params);
    let q = q_const(params);
    let p2 = params.p2();
    Ok(CurvePoint {
        g: -s * s * s + ht * s * s + q / (4.0 * s),
        k: 3.0 * s * s - 4.0 * ht * s + p2 + ht * ht - q / (4.0 * s * s),
        dg_ds: -3.0 * s * s + 2.0 * ht * s - q / (4.0 * s * s),
        dk_ds: 6.0 * s - 4.0 * ht + q / (2.0 * s * s * s),
    })
}

/// Uniform access; on the lines `s` is the energy.
pub fn gamma(branch: Branch, s: f64, h: f64, params: &Params) -> Result<CurvePoint> {
    match branch {
        Branch::GammaPlus => Ok(gamma_lines(s, params)[0]),
        Branch::GammaMinus => Ok(gamma_lines(s, params)[1]),
        Branch::Gamma1 => gamma1(s, h, params),
        Branch::Gamma2 => gamma2(s, h, params),
    }
}

fn d2k_ds2(branch: Branch, s: f64, params: &Params) -> f64 {
    match branch {
        Branch::Gamma1 => 1.5 * params.r2() * params.r2() / s.powi(4),
        Branch::Gamma2 => 6.0 - 1.5 * q_const(params) / s.powi(4),
        _ => 0.0,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiagramSample {
    pub s: f64,
    pub branch: Branch,
    pub g: f64,
    pub k: f64,
    pub dg_ds: f64,
    pub dk_ds: f64,
}

impl DiagramSample {
    fn new(branch: Branch, s: f64, c: CurvePoint) -> Self {
        DiagramSample { s, branch, g: c.g, k: c.k, dg_ds: c.dg_ds, dk_ds: c.dk_ds }
    }
}

/// Logarithmic grid on both signs of `s`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SGrid {
    pub per_sign: usize,
    pub s_min: f64,
    pub s_max: f64,
}

impl Default for SGrid {
    fn default() -> Self {
        SGrid { per_sign: 2000, s_min: 1e-3, s_max: 50.0 }
    }
}

impl SGrid {
    /// Increasing values in `[s_min, s_max]`.
    pub fn positive(&self) -> Vec<f64> {
        let n = self.per_sign.max(2);
        let (l0, l1) = (self.s_min.ln(), self.s_max.ln());
        (0..n).map(|i| (l0 + (l1 - l0) * i as f64 / (n - 1) as f64).exp()).collect()
    }

    /// All grid values, increasing.
    pub fn values(&self) -> Vec<f64> {
        let pos = self.positive();
        pos.iter().rev().map(|s| -s).chain(pos.iter().copied()).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SingularKind {
    Cusp,
    DoublePoint,
    Intersection,
    SZeroAsymptote,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingularPoint {
    pub kind: SingularKind,
    pub g: f64,
    pub k: f64,
    /// Contributing branches, parallel to `s`.
    pub branches: Vec<Branch>,
    pub s: Vec<f64>,
    pub residual: f64,
    /// For intersections of the two curves: the multiplier of the rank-one
    /// motion landing on this point, when there is one.
    pub rank1_sigma: Option<f64>,
    pub note: String,
}

/// Integral values of a rank-one motion at the energy of the slice.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Rank1Image {
    pub sigma: f64,
    pub u: f64,
    pub g: f64,
    pub k: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diagram {
    pub h: f64,
    pub samples: Vec<DiagramSample>,
    pub singular: Vec<SingularPoint>,
    pub rank1: Vec<Rank1Image>,
}

impl Diagram {
    pub fn branch_samples(&self, b: Branch) -> impl Iterator<Item = &DiagramSample> {
        self.samples.iter().filter(move |x| x.branch == b)
    }

    pub fn count(&self, kind: SingularKind) -> usize {
        self.singular.iter().filter(|p| p.kind == kind).count()
    }
}

/// Largest allowed sagitta between neighbours, relative to `1 + |Gamma|`.
pub const MAX_SAGITTA: f64 = 1e-3;

fn sample_branch(branch: Branch, h: f64, params: &Params, grid: &SGrid) -> Result<Vec<DiagramSample>> {
    if branch.is_line() {
        return Ok(vec![DiagramSample::new(branch, h, gamma(branch, h, h, params)?)]);
    }
    let s = grid.values();
    let mut out = Vec::with_capacity(s.len());
    for &si in &s {
        out.push(DiagramSample::new(branch, si, gamma(branch, si, h, params)?));
    }
    for w in out.windows(2) {
        if w[0].s.signum() != w[1].s.signum() {
            continue;
        }
        let sm = 0.5 * (w[0].s + w[1].s);
        let m = gamma(branch, sm, h, params)?;
        let sag = (m.g - 0.5 * (w[0].g + w[1].g)).hypot(m.k - 0.5 * (w[0].k + w[1].k));
        if sag > MAX_SAGITTA * (1.0 + m.g.hypot(m.k)) {
            return Err(Error::GridTooCoarse { branch: branch.name().into(), s: sm });
        }
    }
    Ok(out)
}

/// The slice at energy `h`: samples of all four branches and the singular
/// points.
pub fn sigma_h(h: f64, params: &Params, grid: &SGrid) -> Result<Diagram> {
    if !(grid.s_min > 0.0 && grid.s_max > grid.s_min && grid.per_sign >= 2) {
        return Err(Error::InvalidParams("s grid needs 0 < s_min < s_max and at least two points".into()));
    }
    let per_branch: Vec<Result<Vec<DiagramSample>>> =
        Branch::ALL.par_iter().map(|b| sample_branch(*b, h, params, grid)).collect();
    let mut samples = Vec::new();
    for r in per_branch {
        samples.extend(r?);
    }
    let mut singular = Vec::new();
    for b in [Branch::Gamma1, Branch::Gamma2] {
        singular.extend(cusps(b, h, params, grid));
    }
    let pieces = polylines(&samples);
    for i in 0..pieces.len() {
        for j in i..pieces.len() {
            singular.extend(crossings(&pieces[i], &pieces[j], h, params));
        }
    }
    singular.extend(line_crossings(h, params));
    singular.extend(asymptotes(h, params, grid));
    let rank1 = if params.lambda != 0.0 { rank1_slice(h, params, &rank1_sigma_grid())? } else { Vec::new() };
    for img in &rank1 {
        let scale = 1.0 + img.g.hypot(img.k);
        let hit = singular
            .iter_mut()
            .filter(|p| p.kind == SingularKind::Intersection && p.branches == [Branch::Gamma1, Branch::Gamma2])
            .map(|p| ((p.g - img.g).hypot(p.k - img.k), p))
            .min_by(|a, b| a.0.total_cmp(&b.0));
        if let Some((d, p)) = hit {
            if d < 1e-6 * scale {
                p.rank1_sigma = Some(img.sigma);
            }
        }
    }
    Ok(Diagram { h, samples, singular, rank1 })
}

/// Cusps: `dk/ds = 0`, which forces `dg/ds = -(s/2) dk/ds = 0` as well.
/// Seeded from sign changes of `dk/ds` on the grid, refined by safeguarded
/// Newton.
pub fn cusps(branch: Branch, h: f64, params: &Params, grid: &SGrid) -> Vec<SingularPoint> {
    let dk = |s: f64| gamma(branch, s, h, params).map(|c| c.dk_ds).unwrap_or(f64::NAN);
    let s = grid.values();
    let mut out = Vec::new();
    for w in s.windows(2) {
        if w[0].signum() != w[1].signum() {
            continue;
        }
        let (f0, f1) = (dk(w[0]), dk(w[1]));
        if !(f0 * f1 < 0.0 || f0 == 0.0) {
            continue;
        }
        let root = safeguarded_newton(w[0], w[1], &dk, |x| d2k_ds2(branch, x, params));
        let c = match gamma(branch, root, h, params) {
            Ok(c) => c,
            Err(_) => continue,
        };
        let scale = 1.0 + c.g.hypot(c.k);
        out.push(SingularPoint {
            kind: SingularKind::Cusp,
            g: c.g,
            k: c.k,
            branches: vec![branch],
            s: vec![root],
            residual: c.dg_ds.hypot(c.dk_ds) / scale,
            rank1_sigma: None,
            note: String::new(),
        });
    }
    out
}

fn safeguarded_newton(mut a: f64, mut b: f64, f: &dyn Fn(f64) -> f64, df: impl Fn(f64) -> f64) -> f64 {
    let fa = f(a);
    if fa == 0.0 {
        return a;
    }
    let mut x = 0.5 * (a + b);
    for _ in 0..100 {
        let fx = f(x);
        if fx == 0.0 {
            return x;
        }
        if fx.signum() == fa.signum() {
            a = x;
        } else {
            b = x;
        }
        let d = df(x);
        let mut next = x - fx / d;
        if !(next > a.min(b) && next < a.max(b)) {
            next = 0.5 * (a + b);
        }
        if (next - x).abs() <= 4.0 * f64::EPSILON * x.abs() {
            return next;
        }
        x = next;
    }
    x
}

struct Polyline<'a> {
    branch: Branch,
    pts: &'a [DiagramSample],
}

/// Curves split into connected pieces (each sign of `s`).
fn polylines(samples: &[DiagramSample]) -> Vec<Polyline<'_>> {
    let mut out = Vec::new();
    let mut start = 0;
    for i in 1..=samples.len() {
        let cut = i == samples.len()
            || samples[i].branch != samples[start].branch
            || samples[i].s.signum() != samples[i - 1].s.signum();
        if cut {
            if !samples[start].branch.is_line() && i - start >= 2 {
                out.push(Polyline { branch: samples[start].branch, pts: &samples[start..i] });
            }
            start = i;
        }
    }
    out
}

type BBox = (f64, f64, f64, f64);

fn bbox(pts: &[DiagramSample]) -> BBox {
    pts.iter().fold((f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY), |b, p| {
        (b.0.min(p.g), b.1.max(p.g), b.2.min(p.k), b.3.max(p.k))
    })
}

fn overlap(a: BBox, b: BBox) -> bool {
    a.0 <= b.1 && b.0 <= a.1 && a.2 <= b.3 && b.2 <= a.3
}

/// Parameters `(t, u)` in `[0, 1)` where two segments cross.
fn segment_cross(p0: (f64, f64), p1: (f64, f64), q0: (f64, f64), q1: (f64, f64)) -> Option<(f64, f64)> {
    let r = (p1.0 - p0.0, p1.1 - p0.1);
    let s = (q1.0 - q0.0, q1.1 - q0.1);
    let den = r.0 * s.1 - r.1 * s.0;
    if den == 0.0 {
        return None;
    }
    let d = (q0.0 - p0.0, q0.1 - p0.1);
    let t = (d.0 * s.1 - d.1 * s.0) / den;
    let u = (d.0 * r.1 - d.1 * r.0) / den;
    ((0.0..1.0).contains(&t) && (0.0..1.0).contains(&u)).then_some((t, u))
}

/// Segment pairs that cross, found by recursive bounding-box subdivision.
fn crossing_seeds(a: &[DiagramSample], b: &[DiagramSample], same: bool) -> Vec<(usize, f64, usize, f64)> {
    fn rec(a: &[DiagramSample], ai: usize, aj: usize, b: &[DiagramSample], bi: usize, bj: usize, same: bool, out: &mut Vec<(usize, f64, usize, f64)>) {
        if same && ai >= bj {
            return;
        }
        if !overlap(bbox(&a[ai..=aj]), bbox(&b[bi..=bj])) {
            return;
        }
        let (na, nb) = (aj - ai, bj - bi);
        if na == 1 && nb == 1 {
            if same && ai + 1 >= bi {
                return;
            }
            let pt = |x: &DiagramSample| (x.g, x.k);
            if let Some((t, u)) = segment_cross(pt(&a[ai]), pt(&a[aj]), pt(&b[bi]), pt(&b[bj])) {
                out.push((ai, t, bi, u));
            }
            return;
        }
        if na >= nb {
            let m = ai + na / 2;
            rec(a, ai, m, b, bi, bj, same, out);
            rec(a, m, aj, b, bi, bj, same, out);
        } else {
            let m = bi + nb / 2;
            rec(a, ai, aj, b, bi, m, same, out);
            rec(a, ai, aj, b, m, bj, same, out);
        }
    }
    let mut out = Vec::new();
    if a.len() >= 2 && b.len() >= 2 {
        rec(a, 0, a.len() - 1, b, 0, b.len() - 1, same, &mut out);
    }
    out
}

/// Newton on `Gamma_a(s) = Gamma_b(t)`.
fn refine_crossing(ba: Branch, bb: Branch, s0: f64, t0: f64, h: f64, params: &Params) -> (f64, f64, f64) {
    let (mut s, mut t) = (s0, t0);
    let resid = |s: f64, t: f64| -> Option<(CurvePoint, CurvePoint)> {
        Some((gamma(ba, s, h, params).ok()?, gamma(bb, t, h, params).ok()?))
    };
    for _ in 0..50 {
        let Some((p, q)) = resid(s, t) else { break };
        let f = (p.g - q.g, p.k - q.k);
        let det = -p.dg_ds * q.dk_ds + q.dg_ds * p.dk_ds;
        if det == 0.0 || !det.is_finite() {
            break;
        }
        let ds = (-f.0 * -q.dk_ds + f.1 * -q.dg_ds) / det;
        let dt = (-p.dg_ds * f.1 + p.dk_ds * f.0) / det;
        let (ns, nt) = (s + ds, t + dt);
        if ns.signum() != s.signum() || nt.signum() != t.signum() {
            break;
        }
        let old = f.0.hypot(f.1);
        match resid(ns, nt) {
            Some((p2, q2)) if (p2.g - q2.g).hypot(p2.k - q2.k) <= old => {
                s = ns;
                t = nt;
            }
            _ => break,
        }
        if ds.abs() <= 1e-15 * s.abs() && dt.abs() <= 1e-15 * t.abs() {
            break;
        }
    }
    let (p, q) = resid(s, t).expect("nonzero parameters");
    let scale = 1.0 + p.g.hypot(p.k);
    (s, t, (p.g - q.g).hypot(p.k - q.k) / scale)
}

fn crossings(a: &Polyline, b: &Polyline, h: f64, params: &Params) -> Vec<SingularPoint> {
    let same = std::ptr::eq(a.pts, b.pts);
    let mut out: Vec<SingularPoint> = Vec::new();
    for (i, t, j, u) in crossing_seeds(a.pts, b.pts, same) {
        let s0 = a.pts[i].s + t * (a.pts[i + 1].s - a.pts[i].s);
        let t0 = b.pts[j].s + u * (b.pts[j + 1].s - b.pts[j].s);
        let (s, tt, residual) = refine_crossing(a.branch, b.branch, s0, t0, h, params);
        let c = gamma(a.branch, s, h, params).expect("nonzero parameter");
        let dup = out.iter().any(|p| (p.g - c.g).hypot(p.k - c.k) <= 1e-9 * (1.0 + c.g.hypot(c.k)));
        if dup {
            continue;
        }
        let kind = if a.branch == b.branch { SingularKind::DoublePoint } else { SingularKind::Intersection };
        let pa = gamma(a.branch, s, h, params).expect("nonzero");
        let pb = gamma(b.branch, tt, h, params).expect("nonzero");
        let cross = pa.dg_ds * pb.dk_ds - pa.dk_ds * pb.dg_ds;
        let transversal = cross.abs() > 1e-8 * pa.dg_ds.hypot(pa.dk_ds) * pb.dg_ds.hypot(pb.dk_ds);
        out.push(SingularPoint {
            kind,
            g: c.g,
            k: c.k,
            branches: vec![a.branch, b.branch],
            s: vec![s, tt],
            residual,
            rank1_sigma: None,
            note: if transversal { "transversal".into() } else { "tangential".into() },
        });
    }
    out
}

/// Points where a curve passes through the point of a line. Solved exactly
/// from `s g(s) = G`, a polynomial in `s`, then checked on `k`.
pub fn line_crossings(h: f64, params: &Params) -> Vec<SingularPoint> {
    let l2 = params.lambda * params.lambda;
    let ht = shifted_energy(h, params);
    let mut out = Vec::new();
    for (line, lp) in [Branch::GammaPlus, Branch::GammaMinus].into_iter().zip(gamma_lines(h, params)) {
        let r4 = params.r2() * params.r2();
        let c1 = 0.5 * params.p2() * (h + 0.5 * l2);
        let candidates = [
            (Branch::Gamma1, vec![-l2, 0.0, c1 - lp.g, -r4 / 4.0]),
            (Branch::Gamma2, vec![-1.0, ht, 0.0, -lp.g, q_const(params) / 4.0]),
        ];
        for (curve, coeffs) in candidates {
            for r in poly::real_roots(&coeffs, 1e-10, 1e-12) {
                if r.value == 0.0 {
                    continue;
                }
                let Ok(c) = gamma(curve, r.value, h, params) else { continue };
                let scale = 1.0 + lp.g.hypot(lp.k);
                let residual = (c.g - lp.g).hypot(c.k - lp.k) / scale;
                if residual < 1e-9 {
                    out.push(SingularPoint {
                        kind: SingularKind::Intersection,
                        g: lp.g,
                        k: lp.k,
                        branches: vec![line, curve],
                        s: vec![h, r.value],
                        residual,
                        rank1_sigma: None,
                        note: String::new(),
                    });
                }
            }
        }
    }
    out
}

fn asymptotes(h: f64, params: &Params, grid: &SGrid) -> Vec<SingularPoint> {
    let mut out = Vec::new();
    for branch in [Branch::Gamma1, Branch::Gamma2] {
        for s in [-grid.s_min, grid.s_min] {
            let Ok(c) = gamma(branch, s, h, params) else { continue };
            let dir = |x: f64| if x > 0.0 { "+inf" } else { "-inf" };
            // leading terms: Gamma1 ~ (-r^4/4s, r^4/4s^2), Gamma2 ~ (q/4s, -q/4s^2)
            let (gs, ks) = match branch {
                Branch::Gamma1 => (-s, 1.0),
                _ => (s, -1.0),
            };
            out.push(SingularPoint {
                kind: SingularKind::SZeroAsymptote,
                g: c.g,
                k: c.k,
                branches: vec![branch],
                s: vec![s],
                residual: 0.0,
                rank1_sigma: None,
                note: format!("s -> 0{}: g -> {}, k -> {}", if s > 0.0 { "+" } else { "-" }, dir(gs), dir(ks)),
            });
        }
    }
    out
}

/// Integral values `(g, k, h)` of the rank-one motion `(sigma, u)`.
pub fn rank1_integrals(sigma: f64, u: f64, params: &Params) -> Result<[f64; 3]> {
    let mut last = Err(Error::NoConvergence("rank-one point".into()));
    for w in [1.0, 0.5, 2.0, 0.25, 4.0] {
        match Rank1Data::new(sigma, u, w, params).and_then(|d| rank1_point(&d, params)) {
            Ok(c) => {
                let v = integrals_complex(&c, params);
                return Ok(v.map(|z| z.re));
            }
            Err(e) => last = Err(e),
        }
    }
    last
}

/// Log-spaced multipliers on both signs.
pub fn rank1_sigma_grid() -> Vec<f64> {
    let n = 1500;
    let pos: Vec<f64> = (0..n).map(|i| 10f64.powf(-3.0 + 6.0 * i as f64 / (n - 1) as f64)).collect();
    pos.iter().rev().map(|s| -s).chain(pos.iter().copied()).collect()
}

/// Rank-one motions whose energy equals `h`: continuation of the quintic
/// roots along the `sigma` grid, bisection on sign changes of `h - H`.
pub fn rank1_slice(h: f64, params: &Params, sigmas: &[f64]) -> Result<Vec<Rank1Image>> {
    let energy = |sigma: f64, u: f64| rank1_integrals(sigma, u, params).map(|v| v[2]).unwrap_or(f64::NAN);
    let roots_at = |sigma: f64| -> Vec<f64> {
        rank1_solve_u(sigma, params).map(|v| v.into_iter().map(|r| r.value).collect()).unwrap_or_default()
    };
    let nearest = |us: &[f64], u: f64| -> Option<f64> {
        us.iter().copied().min_by(|a, b| (a - u).abs().total_cmp(&(b - u).abs()))
    };
    let level: Vec<(f64, Vec<(f64, f64)>)> = sigmas
        .par_iter()
        .map(|&s| (s, roots_at(s).into_iter().map(|u| (u, energy(s, u) - h)).collect()))
        .collect();
    let mut out: Vec<Rank1Image> = Vec::new();
    for w in level.windows(2) {
        let ((s0, r0), (s1, r1)) = (&w[0], &w[1]);
        if s0.signum() != s1.signum() {
            continue;
        }
        for &(u0, e0) in r0 {
            let us1: Vec<f64> = r1.iter().map(|x| x.0).collect();
            let Some(u1) = nearest(&us1, u0) else { continue };
            if (u1 - u0).abs() > 0.1 * u0.abs().max(1e-12) + 1e-12 {
                continue;
            }
            let e1 = r1.iter().find(|x| x.0 == u1).map(|x| x.1).unwrap_or(f64::NAN);
            if !(e0 * e1 < 0.0) {
                continue;
            }
            let (mut a, mut b, mut ua, mut ea) = (*s0, *s1, u0, e0);
            let mut ub = u1;
            for _ in 0..100 {
                let m = 0.5 * (a + b);
                if m <= a.min(b) || m >= a.max(b) {
                    break;
                }
                let guess = ua + (ub - ua) * (m - a) / (b - a);
                let Some(um) = nearest(&roots_at(m), guess) else { break };
                let em = energy(m, um) - h;
                if !em.is_finite() {
                    break;
                }
                if em.signum() == ea.signum() {
                    a = m;
                    ua = um;
                    ea = em;
                } else {
                    b = m;
                    ub = um;
                }
            }
            let sigma = 0.5 * (a + b);
            let Some(u) = nearest(&roots_at(sigma), ua) else { continue };
            let Ok([g, k, hh]) = rank1_integrals(sigma, u, params) else { continue };
            if (hh - h).abs() < 1e-8 * (1.0 + h.abs()) {
                out.push(Rank1Image { sigma, u, g, k });
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::critical::{s_n, s_o, seed_point, SeedOptions, Stratum};
    use crate::phase::{integrals_of_complex, integrals_real};
    use crate::special::{equilibria, pendulum_state, PendulumFamily};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn fixture() -> Params {
        Params::new(1.0, 0.5, 0.1).unwrap()
    }

    #[test]
    fn line_values() {
        let p = Params::new(1.2, 0.4, 0.6).unwrap();
        let [plus, minus] = gamma_lines(0.18, &p);
        assert!(plus.g.abs() < 1e-16 && (plus.k - 2.56).abs() < 1e-14);
        assert!((minus.k - 0.64).abs() < 1e-14);
    }

    #[test]
    fn equilibria_and_pendulums_land_on_lines() {
        let p = Params::new(1.2, 0.4, 0.6).unwrap();
        let eq = equilibria(&p);
        for s in &eq {
            let t = integrals_real(s, &p);
            let [plus, minus] = gamma_lines(t.h, &p);
            let on = |c: CurvePoint| (c.g - t.g).abs().max((c.k - t.k).abs()) < 1e-12;
            assert!(on(plus) || on(minus), "{t:?}");
        }
        for (phi, dphi) in [(0.3, 0.8), (2.0, -1.4)] {
            let s = pendulum_state(PendulumFamily::P3, phi, dphi, 1.0, &p).unwrap();
            let t = integrals_real(&s, &p);
            let [plus, minus] = gamma_lines(t.h, &p);
            let r = |c: CurvePoint| (c.g - t.g).abs().max((c.k - t.k).abs());
            assert!(r(plus).min(r(minus)) < 1e-10);
        }
    }

    #[test]
    fn lines_without_gyrostat() {
        let p = Params::new(1.0, 0.5, 0.0).unwrap();
        let [plus, minus] = gamma_lines(1.3, &p);
        assert_eq!((plus.g, plus.k), (-0.5 * 1.3, 2.25));
        assert_eq!((minus.g, minus.k), (0.5 * 1.3, 0.25));
    }

    #[test]
    fn zero_parameter_is_rejected() {
        let p = fixture();
        assert!(matches!(gamma1(0.0, 1.0, &p), Err(Error::SZero)));
        assert!(matches!(gamma2(0.0, 1.0, &p), Err(Error::SZero)));
    }

    #[test]
    fn gamma1_without_gyrostat_is_a_parabola() {
        let p = Params::new(1.0, 0.5, 0.0).unwrap();
        let r4 = p.r2() * p.r2();
        for s in [-3.0, -0.2, 0.1, 0.7, 5.0] {
            let c = gamma1(s, 1.7, &p).unwrap();
            let lhs = (p.p2() * 1.7 - 2.0 * c.g).powi(2);
            assert!((lhs - r4 * c.k).abs() < 1e-10 * (1.0 + lhs));
        }
    }

    #[test]
    fn gamma1_grows_linearly() {
        let p = fixture();
        let c = gamma1(1e6, 1.0, &p).unwrap();
        assert!((c.k / (4.0 * 0.01 * 1e6) - 1.0).abs() < 1e-6);
    }

    proptest! {
        #[test]
        fn derivatives_match_central_differences(s in prop_oneof![-20.0f64..-0.05, 0.05f64..20.0], h in -3.0f64..3.0, lam in 0.0f64..1.5) {
            let p = Params::new(1.3, 0.6, lam).unwrap();
            let ds = 1e-5;
            for b in Branch::ALL {
                let c = gamma(b, s, h, &p).unwrap();
                let (lo, hi) = (gamma(b, s - ds, h, &p).unwrap(), gamma(b, s + ds, h, &p).unwrap());
                let fd = ((hi.g - lo.g) / (2.0 * ds), (hi.k - lo.k) / (2.0 * ds));
                let scale = 1.0 + c.dg_ds.abs().max(c.dk_ds.abs());
                prop_assert!((fd.0 - c.dg_ds).abs() < 1e-6 * scale);
                prop_assert!((fd.1 - c.dk_ds).abs() < 1e-6 * scale);
            }
        }

        #[test]
        fn curves_share_the_slope_relation(s in prop_oneof![-20.0f64..-0.05, 0.05f64..20.0], h in -3.0f64..3.0) {
            let p = fixture();
            for c in [gamma1(s, h, &p).unwrap(), gamma2(s, h, &p).unwrap()] {
                prop_assert!((c.dg_ds + 0.5 * s * c.dk_ds).abs() < 1e-9 * (1.0 + c.dg_ds.abs()));
            }
        }

        // the energy enters only through h - lambda^2/2
        #[test]
        fn gamma2_shift_invariance(s in 0.05f64..10.0, h in -2.0f64..2.0, delta in 0.0f64..2.0, lam in 0.0f64..1.0) {
            let p = Params::new(1.3, 0.6, lam).unwrap();
            let q = p.with_lambda((lam * lam + 2.0 * delta).sqrt()).unwrap();
            let (a, b) = (gamma2(s, h, &p).unwrap(), gamma2(s, h + delta, &q).unwrap());
            prop_assert!((a.g - b.g).abs() <= 1e-12 * (1.0 + a.g.abs()));
            prop_assert!((a.k - b.k).abs() <= 1e-12 * (1.0 + a.k.abs()));
        }
    }

    #[test]
    fn critical_points_land_on_their_curves() {
        let p = Params::new(1.3, 0.7, 0.45).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for which in [Stratum::N, Stratum::O] {
            for _ in 0..5 {
                let cp = seed_point(which, &p, &mut rng, &SeedOptions::default()).unwrap();
                let t = integrals_of_complex(&cp.state, &p);
                let c = match which {
                    Stratum::N => gamma1(s_n(&cp.state, &p).unwrap().re, t.h, &p).unwrap(),
                    _ => gamma2(s_o(&cp.state, &p).unwrap().re, t.h, &p).unwrap(),
                };
                assert!((c.g - t.g).abs().max((c.k - t.k).abs()) < 1e-8);
            }
        }
    }

    #[test]
    fn cusps_match_polynomial_roots() {
        let p = fixture();
        let h = 2.0;
        let grid = SGrid::default();
        // Gamma1: s^3 = r^4 / (8 lambda^2); Gamma2: 12 s^4 - 8 h~ s^3 + q = 0
        let r4 = p.r2() * p.r2();
        let mut expect1 = vec![(r4 / (8.0 * p.lambda * p.lambda)).cbrt()];
        let ht = shifted_energy(h, &p);
        let mut expect2: Vec<f64> = poly::real_roots(&[12.0, -8.0 * ht, 0.0, 0.0, q_const(&p)], 1e-10, 1e-12)
            .into_iter()
            .map(|r| r.value)
            .collect();
        let inside = |s: &f64| (grid.s_min..=grid.s_max).contains(&s.abs());
        expect1.retain(inside);
        expect2.retain(inside);
        for (b, expect) in [(Branch::Gamma1, expect1), (Branch::Gamma2, expect2)] {
            let found: Vec<f64> = cusps(b, h, &p, &grid).iter().map(|c| c.s[0]).collect();
            assert_eq!(found.len(), expect.len(), "{b}");
            for (f, e) in found.iter().zip(&expect) {
                assert!((f - e).abs() < 1e-12 * e.abs().max(1.0), "{b}: {f} vs {e}");
            }
        }
    }

    #[test]
    fn regression_cusp_count() {
        let d = sigma_h(2.0, &fixture(), &SGrid::default()).unwrap();
        assert_eq!(d.count(SingularKind::Cusp), 3);
        assert!(d.singular.iter().filter(|p| p.kind == SingularKind::Cusp).all(|p| p.residual < 1e-12));
    }

    #[test]
    fn diagram_shape() {
        let d = sigma_h(2.0, &fixture(), &SGrid::default()).unwrap();
        assert_eq!(d.branch_samples(Branch::Gamma1).count(), 4000);
        assert_eq!(d.branch_samples(Branch::Gamma2).count(), 4000);
        assert_eq!(d.branch_samples(Branch::GammaPlus).count(), 1);
        assert_eq!(d.count(SingularKind::SZeroAsymptote), 4);
        for p in &d.singular {
            if matches!(p.kind, SingularKind::Intersection | SingularKind::DoublePoint) {
                assert!(p.residual < 1e-10, "{p:?}");
            }
        }
    }

    #[test]
    fn coarse_grid_is_rejected() {
        let grid = SGrid { per_sign: 6, s_min: 1e-3, s_max: 50.0 };
        assert!(matches!(sigma_h(2.0, &fixture(), &grid), Err(Error::GridTooCoarse { .. })));
    }

    #[test]
    fn line_points_lie_on_gamma2() {
        // oracle: nearest grid sample, then golden-section refinement
        let p = fixture();
        let h = 2.0;
        let found = line_crossings(h, &p);
        for lp in gamma_lines(h, &p) {
            let dist = |s: f64| {
                let c = gamma2(s, h, &p).unwrap();
                (c.g - lp.g).hypot(c.k - lp.k)
            };
            let grid: Vec<f64> = (1..200000).map(|i| i as f64 * 1e-4).collect();
            let s0 = grid.iter().copied().min_by(|a, b| dist(*a).total_cmp(&dist(*b))).unwrap();
            let (mut a, mut b) = (s0 - 1e-4, s0 + 1e-4);
            let gr = 0.5 * (5f64.sqrt() - 1.0);
            for _ in 0..200 {
                let (c, d) = (b - gr * (b - a), a + gr * (b - a));
                if dist(c) < dist(d) { b = d } else { a = c }
            }
            let s = 0.5 * (a + b);
            assert!(dist(s) < 1e-7);
            assert!(found.iter().any(|x| x.branches[1] == Branch::Gamma2 && (x.s[1] - s).abs() < 1e-6 && x.k == lp.k));
        }
    }

    #[test]
    fn rank1_images_are_curve_intersections() {
        let p = Params::new(1.3, 0.7, 0.45).unwrap();
        let d = sigma_h(1.5, &p, &SGrid::default()).unwrap();
        assert!(!d.rank1.is_empty());
        for img in &d.rank1 {
            let hit = d.singular.iter().any(|x| x.rank1_sigma == Some(img.sigma));
            assert!(hit, "rank-one image {img:?} is not a detected intersection");
        }
    }
}
