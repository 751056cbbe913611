//! Queue line fitting (ordinary least squares, polynomial, ridge) plus the
//! geometric helpers built on top of a fitted line.
//!
//! All fits regress y on x. Internally x is mapped onto [-1, 1] before the
//! normal equations are formed and the coefficients are mapped back to raw
//! pixel coordinates afterwards, so callers only ever see raw coefficients.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::QueuePoint;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    #[default]
    Linear,
    Polynomial,
    Ridge,
}

impl ModelKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ModelKind::Linear => "linear",
            ModelKind::Polynomial => "polynomial",
            ModelKind::Ridge => "ridge",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(
    try_from = "RawModelSpec<T>",
    bound(deserialize = "T: Scalar + Deserialize<'de>")
)]
pub struct ModelSpec<T> {
    pub kind: ModelKind,
    pub degree: usize,
    pub lambda: T,
}

/// Config form of [`ModelSpec`]: degree and lambda default by kind.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModelSpec<T> {
    #[serde(default)]
    kind: ModelKind,
    degree: Option<usize>,
    lambda: Option<T>,
}

impl<T: Scalar> TryFrom<RawModelSpec<T>> for ModelSpec<T> {
    type Error = Error;

    fn try_from(raw: RawModelSpec<T>) -> Result<Self> {
        let base = match raw.kind {
            ModelKind::Linear => Self::linear(),
            ModelKind::Polynomial => Self::polynomial(Self::DEFAULT_POLY_DEGREE),
            ModelKind::Ridge => Self::ridge(T::of(Self::DEFAULT_RIDGE_LAMBDA)),
        };
        let spec = Self {
            kind: raw.kind,
            degree: raw.degree.unwrap_or(base.degree),
            lambda: raw.lambda.unwrap_or(base.lambda),
        };
        spec.validate()?;
        Ok(spec)
    }
}

impl<T: Scalar> Default for ModelSpec<T> {
    fn default() -> Self {
        Self::linear()
    }
}

impl<T: Scalar> ModelSpec<T> {
    pub const DEFAULT_POLY_DEGREE: usize = 2;
    pub const DEFAULT_RIDGE_LAMBDA: f64 = 1.0;

    pub fn linear() -> Self {
        Self {
            kind: ModelKind::Linear,
            degree: 1,
            lambda: T::zero(),
        }
    }

    pub fn polynomial(degree: usize) -> Self {
        Self {
            kind: ModelKind::Polynomial,
            degree,
            lambda: T::zero(),
        }
    }

    /// Straight-line ridge fit. Use [`ModelSpec::with_degree`] for polynomial ridge.
    pub fn ridge(lambda: T) -> Self {
        Self {
            kind: ModelKind::Ridge,
            degree: 1,
            lambda,
        }
    }

    pub fn with_degree(mut self, degree: usize) -> Self {
        self.degree = degree;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.degree < 1 {
            return Err(Error::Domain("model degree must be >= 1".into()));
        }
        if !(self.lambda >= T::zero()) || !self.lambda.is_finite() {
            return Err(Error::Domain(format!(
                "ridge lambda must be finite and >= 0, got {}",
                self.lambda
            )));
        }
        if self.kind == ModelKind::Linear && (self.degree != 1 || self.lambda != T::zero()) {
            return Err(Error::Domain("linear model requires degree 1 and lambda 0".into()));
        }
        if self.kind == ModelKind::Polynomial && self.lambda != T::zero() {
            return Err(Error::Domain("polynomial model takes no lambda".into()));
        }
        Ok(())
    }

    fn penalty(&self) -> T {
        match self.kind {
            ModelKind::Ridge => self.lambda,
            _ => T::zero(),
        }
    }
}

/// Regression model with raw-coordinate coefficients `[b0, b1, ..., bn]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Scalar + Deserialize<'de>"))]
pub struct FittedLine<T> {
    pub spec: ModelSpec<T>,
    pub coefficients: Vec<T>,
    pub n_points: usize,
}

impl<T: Scalar> FittedLine<T> {
    pub fn degree(&self) -> usize {
        self.coefficients.len() - 1
    }

    pub fn predict(&self, x: T) -> T {
        predict(self, x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResidualStats<T> {
    pub sse: T,
    /// Standard error of the estimate, `sqrt(sse / (n - 2))`.
    pub se: T,
    pub df: usize,
    pub n: usize,
    pub x_mean: T,
    pub sxx: T,
}

/// Queue direction from the first to the last person. Never zero-length.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DirectionVector<T> {
    pub dx: T,
    pub dy: T,
}

impl<T: Scalar> DirectionVector<T> {
    pub fn new(dx: T, dy: T) -> Result<Self> {
        let m = dx.hypot(dy);
        if !(m > T::zero()) || !m.is_finite() {
            return Err(Error::DegenerateGeometry(
                "direction vector has zero length".into(),
            ));
        }
        Ok(Self { dx, dy })
    }

    pub fn magnitude(&self) -> T {
        self.dx.hypot(self.dy)
    }

    pub fn unit(&self) -> (T, T) {
        let m = self.magnitude();
        (self.dx / m, self.dy / m)
    }
}

/// Position of a point relative to the queue axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TopViewPoint<T> {
    pub person_id: u64,
    /// Scalar projection onto the axis direction.
    pub along: T,
    /// Signed perpendicular distance; positive means below the line in the
    /// image (larger y).
    pub offset: T,
}

fn binomial<T: Scalar>(n: usize, k: usize) -> T {
    let mut acc = T::one();
    for i in 0..k {
        acc = acc * T::of_usize(n - i) / T::of_usize(i + 1);
    }
    acc
}

/// In-place Cholesky solve of a symmetric positive-definite system.
/// Returns `None` when a pivot collapses (singular or indefinite matrix).
#[allow(clippy::needless_range_loop)]
fn cholesky_solve<T: Scalar>(mut a: Vec<Vec<T>>, mut b: Vec<T>) -> Option<Vec<T>> {
    let n = b.len();
    let scale = (0..n).map(|i| a[i][i].abs()).fold(T::zero(), T::max);
    let tol = scale * T::epsilon() * T::of(64.0);
    for j in 0..n {
        let mut d = a[j][j];
        for k in 0..j {
            d -= a[j][k] * a[j][k];
        }
        if !(d > tol) {
            return None;
        }
        let l = d.sqrt();
        a[j][j] = l;
        for i in j + 1..n {
            let mut s = a[i][j];
            for k in 0..j {
                s -= a[i][k] * a[j][k];
            }
            a[i][j] = s / l;
        }
    }
    // Forward then back substitution.
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= a[i][k] * b[k];
        }
        b[i] = s / a[i][i];
    }
    for i in (0..n).rev() {
        let mut s = b[i];
        for k in i + 1..n {
            s -= a[k][i] * b[k];
        }
        b[i] = s / a[i][i];
    }
    Some(b)
}

/// Fits the queue line.
///
/// Ridge penalizes `b1..bn` in raw coordinates and leaves the intercept free.
pub fn fit_line<T: Scalar>(points: &[QueuePoint<T>], spec: ModelSpec<T>) -> Result<FittedLine<T>> {
    spec.validate()?;
    let p = spec.degree + 1;
    let n = points.len();
    if n < p {
        return Err(Error::InsufficientData(format!(
            "degree {} fit needs at least {p} points, got {n}",
            spec.degree
        )));
    }
    let (lo, hi) = points
        .iter()
        .fold((T::infinity(), T::neg_infinity()), |(lo, hi), q| (lo.min(q.x), hi.max(q.x)));
    if !(hi > lo) {
        return Err(Error::DegenerateGeometry(
            "all x values are identical; swap axes and refit".into(),
        ));
    }
    let two = T::of(2.0);
    let center = (lo + hi) / two;
    let half = (hi - lo) / two;

    // Gram matrix and right-hand side in scaled coordinates z = (x - center) / half.
    let mut gram = vec![vec![T::zero(); p]; p];
    let mut rhs = vec![T::zero(); p];
    let mut powers = vec![T::one(); 2 * p - 1];
    for q in points {
        let z = (q.x - center) / half;
        for k in 1..powers.len() {
            powers[k] = powers[k - 1] * z;
        }
        for (i, row) in gram.iter_mut().enumerate() {
            for (j, g) in row.iter_mut().enumerate() {
                *g += powers[i + j];
            }
            rhs[i] += powers[i] * q.y;
        }
    }

    // raw = transform * scaled, with transform[i][j] = C(j, i) (-center)^(j-i) / half^j.
    let mut transform = vec![vec![T::zero(); p]; p];
    for j in 0..p {
        let inv = half.powi(j as i32).recip();
        for (i, row) in transform.iter_mut().enumerate().take(j + 1) {
            row[j] = binomial::<T>(j, i) * (-center).powi((j - i) as i32) * inv;
        }
    }

    let lambda = spec.penalty();
    if lambda > T::zero() {
        // Add lambda * T' P T where P zeroes the intercept row.
        for i in 0..p {
            for j in 0..p {
                let mut acc = T::zero();
                for row in transform.iter().skip(1) {
                    acc += row[i] * row[j];
                }
                gram[i][j] += lambda * acc;
            }
        }
    }

    let scaled = cholesky_solve(gram, rhs).ok_or_else(|| {
        Error::DegenerateGeometry(format!(
            "design matrix is singular for degree {} (too few distinct x values); swap axes and refit",
            spec.degree
        ))
    })?;

    let coefficients: Vec<T> = transform
        .iter()
        .map(|row| row.iter().zip(&scaled).map(|(&t, &c)| t * c).sum())
        .collect();
    if coefficients.iter().any(|c| !c.is_finite()) {
        return Err(Error::DegenerateGeometry("non-finite coefficients".into()));
    }

    Ok(FittedLine {
        spec,
        coefficients,
        n_points: n,
    })
}

/// Evaluates the fitted polynomial at `x` (Horner's scheme).
pub fn predict<T: Scalar>(line: &FittedLine<T>, x: T) -> T {
    line.coefficients
        .iter()
        .rev()
        .fold(T::zero(), |acc, &c| acc * x + c)
}

pub fn residual_stats<T: Scalar>(
    line: &FittedLine<T>,
    points: &[QueuePoint<T>],
) -> Result<ResidualStats<T>> {
    let n = points.len();
    if n < 3 {
        return Err(Error::InsufficientData(format!(
            "residual statistics need at least 3 points, got {n}"
        )));
    }
    let sse: T = points
        .iter()
        .map(|q| {
            let e = q.y - predict(line, q.x);
            e * e
        })
        .sum();
    let df = n - 2;
    let x_mean = points.iter().map(|q| q.x).sum::<T>() / T::of_usize(n);
    let sxx = points.iter().map(|q| (q.x - x_mean) * (q.x - x_mean)).sum();
    Ok(ResidualStats {
        sse,
        se: (sse / T::of_usize(df)).sqrt(),
        df,
        n,
        x_mean,
        sxx,
    })
}

/// Vector from the first to the last point of an ordered queue.
pub fn direction_vector<T: Scalar>(points: &[QueuePoint<T>]) -> Result<DirectionVector<T>> {
    let (Some(first), Some(last)) = (points.first(), points.last()) else {
        return Err(Error::InsufficientData("direction needs at least 2 points".into()));
    };
    if points.len() < 2 {
        return Err(Error::InsufficientData("direction needs at least 2 points".into()));
    }
    DirectionVector::new(last.x - first.x, last.y - first.y).map_err(|_| {
        Error::DegenerateGeometry("first and last queue points coincide".into())
    })
}

/// Axis used for top-view projection: an origin and a unit direction.
///
/// Degree 1 uses the line itself through `(0, b0)`. Higher degrees use the
/// chord between the predictions at the first and last x.
pub fn line_axis<T: Scalar>(line: &FittedLine<T>, points: &[QueuePoint<T>]) -> ((T, T), (T, T)) {
    let zero = T::zero();
    if line.degree() == 1 {
        let slope = line.coefficients[1];
        let norm = T::one().hypot(slope);
        return ((zero, line.coefficients[0]), (T::one() / norm, slope / norm));
    }
    let (x0, x1) = match (points.first(), points.last()) {
        (Some(a), Some(b)) => (a.x, b.x),
        _ => (zero, T::one()),
    };
    let start = (x0, predict(line, x0));
    let (mut dx, mut dy) = (x1 - x0, predict(line, x1) - start.1);
    if dx < zero {
        dx = -dx;
        dy = -dy;
    }
    let norm = dx.hypot(dy);
    if !(norm > zero) {
        return (start, (T::one(), zero));
    }
    (start, (dx / norm, dy / norm))
}

/// Projects points into (along-axis, perpendicular-offset) coordinates.
pub fn top_view<T: Scalar>(points: &[QueuePoint<T>], line: &FittedLine<T>) -> Vec<TopViewPoint<T>> {
    let ((ox, oy), (ux, uy)) = line_axis(line, points);
    // Normal with a non-negative y component so "below the line" is positive.
    let (mut nx, mut ny) = (-uy, ux);
    if ny < T::zero() || (ny == T::zero() && nx < T::zero()) {
        nx = -nx;
        ny = -ny;
    }
    points
        .iter()
        .map(|q| {
            let (rx, ry) = (q.x - ox, q.y - oy);
            TopViewPoint {
                person_id: q.person_id,
                along: rx * ux + ry * uy,
                offset: rx * nx + ry * ny,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn pts(xy: &[(f64, f64)]) -> Vec<QueuePoint<f64>> {
        xy.iter()
            .enumerate()
            .map(|(i, &(x, y))| QueuePoint::new(i as u64, x, y))
            .collect()
    }

    fn worked() -> Vec<QueuePoint<f64>> {
        pts(&[(0.0, 0.0), (1.0, 2.0), (2.0, 3.0), (3.0, 5.0)])
    }

    #[test]
    fn exact_line() {
        let p = pts(&[(0.0, 1.0), (1.0, 3.0), (2.0, 5.0), (5.0, 11.0)]);
        let line = fit_line(&p, ModelSpec::linear()).unwrap();
        assert_abs_diff_eq!(line.coefficients[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(line.coefficients[1], 2.0, epsilon = 1e-12);
        let stats = residual_stats(&line, &p).unwrap();
        assert_abs_diff_eq!(stats.sse, 0.0, epsilon = 1e-20);
        assert_abs_diff_eq!(stats.se, 0.0, epsilon = 1e-10);
    }

    #[test]
    fn worked_example() {
        // Sxy = 8, Sxx = 5 => b1 = 1.6, b0 = 2.5 - 1.6 * 1.5 = 0.1
        let line = fit_line(&worked(), ModelSpec::linear()).unwrap();
        assert_abs_diff_eq!(line.coefficients[0], 0.1, epsilon = 1e-12);
        assert_abs_diff_eq!(line.coefficients[1], 1.6, epsilon = 1e-12);
        assert_abs_diff_eq!(predict(&line, 2.0), 3.3, epsilon = 1e-12);
    }

    #[test]
    fn worked_example_residuals() {
        // residuals (-0.1, 0.3, -0.3, 0.1)
        let p = worked();
        let line = fit_line(&p, ModelSpec::linear()).unwrap();
        let s = residual_stats(&line, &p).unwrap();
        assert_abs_diff_eq!(s.sse, 0.2, epsilon = 1e-12);
        assert_abs_diff_eq!(s.se, 0.1f64.sqrt(), epsilon = 1e-12);
        assert_eq!(s.df, 2);
        assert_abs_diff_eq!(s.x_mean, 1.5, epsilon = 1e-15);
        assert_abs_diff_eq!(s.sxx, 5.0, epsilon = 1e-12);
    }

    #[test]
    fn exact_parabola() {
        let p = pts(&[(0.0, 0.0), (1.0, 1.0), (2.0, 4.0), (3.0, 9.0)]);
        let line = fit_line(&p, ModelSpec::polynomial(2)).unwrap();
        for (c, e) in line.coefficients.iter().zip([0.0, 0.0, 1.0]) {
            assert_abs_diff_eq!(*c, e, epsilon = 1e-10);
        }
    }

    #[test]
    fn ridge_without_penalty_is_ols() {
        let p = worked();
        let ols = fit_line(&p, ModelSpec::linear()).unwrap();
        let ridge = fit_line(&p, ModelSpec::ridge(0.0)).unwrap();
        for (a, b) in ols.coefficients.iter().zip(&ridge.coefficients) {
            assert_abs_diff_eq!(*a, *b, epsilon = 1e-12);
        }
    }

    #[test]
    fn ridge_shrinks_slope() {
        let p = worked();
        let slope = |l: f64| fit_line(&p, ModelSpec::ridge(l)).unwrap().coefficients[1];
        // Closed form for centered straight-line ridge: Sxy / (Sxx + lambda).
        assert_abs_diff_eq!(slope(1.0), 8.0 / 6.0, epsilon = 1e-12);
        assert_abs_diff_eq!(slope(3.0), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn predict_horner() {
        let line = FittedLine {
            spec: ModelSpec::linear(),
            coefficients: vec![1.0, 2.0],
            n_points: 2,
        };
        assert_eq!(predict(&line, 3.0), 7.0);
        let parabola = FittedLine {
            spec: ModelSpec::polynomial(2),
            coefficients: vec![0.0, 0.0, 1.0],
            n_points: 3,
        };
        assert_eq!(predict(&parabola, 4.0), 16.0);
    }

    #[test]
    fn too_few_points() {
        let p = pts(&[(0.0, 0.0), (1.0, 1.0)]);
        assert!(matches!(
            fit_line(&p, ModelSpec::polynomial(2)),
            Err(Error::InsufficientData(_))
        ));
        let line = fit_line(&p, ModelSpec::linear()).unwrap();
        assert!(matches!(residual_stats(&line, &p), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn vertical_points_are_degenerate() {
        let p = pts(&[(4.0, 0.0), (4.0, 1.0), (4.0, 2.0)]);
        match fit_line(&p, ModelSpec::linear()) {
            Err(Error::DegenerateGeometry(msg)) => assert!(msg.contains("swap axes")),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn repeated_x_too_few_distinct() {
        let p = pts(&[(0.0, 0.0), (0.0, 1.0), (1.0, 2.0), (1.0, 3.0)]);
        assert!(matches!(
            fit_line(&p, ModelSpec::polynomial(2)),
            Err(Error::DegenerateGeometry(_))
        ));
    }

    #[test]
    fn invalid_specs() {
        let bad = ModelSpec::<f64> {
            kind: ModelKind::Linear,
            degree: 2,
            lambda: 0.0,
        };
        assert!(bad.validate().is_err());
        assert!(ModelSpec::<f64>::ridge(-1.0).validate().is_err());
        assert!(ModelSpec::<f64>::polynomial(0).validate().is_err());
    }

    #[test]
    fn direction_from_endpoints() {
        let d = direction_vector(&pts(&[(0.0, 0.0), (3.0, 1.0), (10.0, 2.0)])).unwrap();
        assert_eq!((d.dx, d.dy), (10.0, 2.0));
        let d = direction_vector(&pts(&[(0.0, 0.0), (4.0, 1.0), (8.0, 2.0)])).unwrap();
        assert_eq!((d.dx, d.dy), (8.0, 2.0));
        assert!(matches!(
            direction_vector(&pts(&[(5.0, 5.0), (5.0, 5.0)])),
            Err(Error::DegenerateGeometry(_))
        ));
    }

    fn line(b: &[f64]) -> FittedLine<f64> {
        FittedLine {
            spec: ModelSpec::linear(),
            coefficients: b.to_vec(),
            n_points: 3,
        }
    }

    #[test]
    fn top_view_on_line_has_zero_offset() {
        let l = line(&[1.0, 0.5]);
        let p = pts(&[(0.0, 1.0), (2.0, 2.0), (4.0, 3.0)]);
        for t in top_view(&p, &l) {
            assert_abs_diff_eq!(t.offset, 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn top_view_sign_convention() {
        let l = line(&[0.0, 0.0]);
        let t = top_view(&pts(&[(3.0, -5.0)]), &l);
        assert_abs_diff_eq!(t[0].offset, -5.0, epsilon = 1e-12);
        assert_abs_diff_eq!(t[0].along, 3.0, epsilon = 1e-12);
    }

    #[test]
    fn top_view_diagonal() {
        // Rotating (0, sqrt 2) by -45 degrees gives (1, 1) in the line frame.
        let l = line(&[0.0, 1.0]);
        let t = top_view(&pts(&[(0.0, 2f64.sqrt())]), &l);
        assert_abs_diff_eq!(t[0].along, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(t[0].offset, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn top_view_polynomial_uses_chord() {
        let parabola = FittedLine {
            spec: ModelSpec::polynomial(2),
            coefficients: vec![0.0, 0.0, 1.0],
            n_points: 3,
        };
        // Chord from (-1, 1) to (1, 1) is horizontal at y = 1.
        let t = top_view(&pts(&[(-1.0, 1.0), (0.0, 0.0), (1.0, 1.0)]), &parabola);
        assert_abs_diff_eq!(t[0].offset, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(t[1].offset, -1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(t[2].along, 2.0, epsilon = 1e-12);
    }

    #[test]
    fn f32_fit() {
        let p: Vec<QueuePoint<f32>> = vec![
            QueuePoint::new(0, 0.0, 0.0),
            QueuePoint::new(1, 1.0, 2.0),
            QueuePoint::new(2, 2.0, 3.0),
            QueuePoint::new(3, 3.0, 5.0),
        ];
        let l = fit_line(&p, ModelSpec::linear()).unwrap();
        assert!((l.coefficients[1] - 1.6).abs() < 1e-5);
    }
}
