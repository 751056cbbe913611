//! Independent reference computations shared by the integration tests.

#![allow(dead_code)]

use std::path::PathBuf;

use massimo_core::ingest::QueuePoint;
use massimo_core::synth::SplitMix64;
use nalgebra::{DMatrix, DVector};
use num_rational::Ratio;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests").join("fixtures").join(name)
}

pub fn uniform(rng: &mut SplitMix64, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.next_f64()
}

pub fn int_in(rng: &mut SplitMix64, lo: usize, hi_inclusive: usize) -> usize {
    lo + (rng.next_u64() % (hi_inclusive - lo + 1) as u64) as usize
}

/// Regularized normal equations on the raw design matrix, solved by LU.
/// The intercept is not penalized.
pub fn normal_equations(xs: &[f64], ys: &[f64], degree: usize, lambda: f64) -> Vec<f64> {
    let n = xs.len();
    let m = degree + 1;
    let x = DMatrix::from_fn(n, m, |i, j| xs[i].powi(j as i32));
    let y = DVector::from_column_slice(ys);
    let mut a = x.transpose() * &x;
    for j in 1..m {
        a[(j, j)] += lambda;
    }
    let b = x.transpose() * y;
    a.lu().solve(&b).expect("oracle system is solvable").iter().copied().collect()
}

pub fn poly_eval(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().enumerate().map(|(j, c)| c * x.powi(j as i32)).sum()
}

pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt();
    let scale: f64 = b.iter().map(|q| q * q).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
    diff / scale
}

/// Residual standard error of a straight-line OLS fit, with the residuals.
pub fn ols_line_residuals(xs: &[f64], ys: &[f64]) -> (Vec<f64>, f64) {
    let beta = normal_equations(xs, ys, 1, 0.0);
    let e: Vec<f64> = xs.iter().zip(ys).map(|(x, y)| y - poly_eval(&beta, *x)).collect();
    let sse: f64 = e.iter().map(|v| v * v).sum();
    let se = (sse / (xs.len() as f64 - 2.0)).sqrt();
    (e, se)
}

/// Exhaustive scan of every split `t` in `0..=254` with exact rational
/// arithmetic. Returns `(argmin within-class variance, argmax between-class
/// variance)`, smallest `t` on ties, or `None` when no split has both
/// classes non-empty.
pub fn otsu_exhaustive(scaled: &[f64]) -> Option<(u8, u8)> {
    let bins: Vec<i128> = scaled.iter().map(|v| (v.floor() as i128).clamp(0, 255)).collect();
    let total = bins.len() as i128;
    let mut best_w: Option<(Ratio<i128>, u8)> = None;
    let mut best_b: Option<(Ratio<i128>, u8)> = None;
    for t in 0..=254i128 {
        let (mut n1, mut s1, mut q1, mut n2, mut s2, mut q2) = (0i128, 0i128, 0i128, 0i128, 0i128, 0i128);
        for &b in &bins {
            if b <= t {
                n1 += 1;
                s1 += b;
                q1 += b * b;
            } else {
                n2 += 1;
                s2 += b;
                q2 += b * b;
            }
        }
        if n1 == 0 || n2 == 0 {
            continue;
        }
        // n * var = sum of squares - sum^2 / n
        let w = (Ratio::from_integer(q1) - Ratio::new(s1 * s1, n1) + Ratio::from_integer(q2)
            - Ratio::new(s2 * s2, n2))
            / total;
        let m1 = Ratio::new(s1, n1);
        let m2 = Ratio::new(s2, n2);
        let between = Ratio::new(n1 * n2, total * total) * (m1 - m2) * (m1 - m2);
        if best_w.as_ref().is_none_or(|(v, _)| w < *v) {
            best_w = Some((w, t as u8));
        }
        if best_b.as_ref().is_none_or(|(v, _)| between > *v) {
            best_b = Some((between, t as u8));
        }
    }
    Some((best_w?.1, best_b?.1))
}

/// Min-max scaling onto [0, 255].
pub fn scale_255(v: &[f64]) -> Vec<f64> {
    let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    v.iter()
        .map(|x| if hi > lo { 255.0 * (x - lo) / (hi - lo) } else { 0.0 })
        .collect()
}

pub struct LedgerLink {
    pub d: f64,
    pub theta: f64,
    pub magnitude: f64,
}

pub struct Ledger {
    pub links: Vec<LedgerLink>,
    pub net: Vec<(f64, f64)>,
}

impl Ledger {
    pub fn net_magnitudes(&self) -> Vec<f64> {
        self.net.iter().map(|(x, y)| x.hypot(*y)).collect()
    }
}

/// Spring forces computed the long way: clamped arccos for the angle,
/// `d (1 - cos)` for the stretch, and the perpendicular component signed by
/// which side of the queue direction the link points to.
pub fn spring_ledger(points: &[(f64, f64)], dir: (f64, f64), k: f64) -> Ledger {
    let n = points.len();
    let len = dir.0.hypot(dir.1);
    let (ux, uy) = (dir.0 / len, dir.1 / len);
    let mut links = Vec::new();
    let mut net = vec![(0.0, 0.0); n];
    for i in 0..n.saturating_sub(1) {
        let (lx, ly) = (points[i + 1].0 - points[i].0, points[i + 1].1 - points[i].1);
        let d = lx.hypot(ly);
        if d == 0.0 {
            links.push(LedgerLink {
                d,
                theta: 0.0,
                magnitude: 0.0,
            });
            continue;
        }
        let cos = ((lx * ux + ly * uy) / d).clamp(-1.0, 1.0);
        let theta = cos.acos();
        let stretch = d * (1.0 - cos);
        let f_par = k * stretch * cos;
        let f_perp = k * stretch * theta.sin();
        let side = (ux * ly - uy * lx).signum();
        let (px, py) = (-uy * side, ux * side);
        let fx = f_par * ux + f_perp * px;
        let fy = f_par * uy + f_perp * py;
        net[i].0 += fx;
        net[i].1 += fy;
        net[i + 1].0 -= fx;
        net[i + 1].1 -= fy;
        links.push(LedgerLink {
            d,
            theta,
            magnitude: f_par.hypot(f_perp),
        });
    }
    Ledger { links, net }
}

pub fn to_points(xy: &[(f64, f64)]) -> Vec<QueuePoint<f64>> {
    xy.iter()
        .enumerate()
        .map(|(i, &(x, y))| QueuePoint::new(i as u64, x, y))
        .collect()
}

/// A roughly straight queue with random spacing, heading and jitter.
pub fn random_queue(rng: &mut SplitMix64, n: usize, jitter: f64) -> Vec<(f64, f64)> {
    let heading = uniform(rng, -std::f64::consts::PI, std::f64::consts::PI);
    let (c, s) = (heading.cos(), heading.sin());
    let (ox, oy) = (uniform(rng, 0.0, 500.0), uniform(rng, 0.0, 500.0));
    let mut t = 0.0;
    (0..n)
        .map(|_| {
            t += uniform(rng, 10.0, 80.0);
            let off = jitter * rng.next_gaussian();
            (ox + t * c - off * s, oy + t * s + off * c)
        })
        .collect()
}
