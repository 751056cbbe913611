//! Confidence-band outlier detection around a fitted queue line.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::QueuePoint;
use crate::linefit::{predict, FittedLine, ResidualStats};
use crate::scalar::Scalar;
use crate::tdist;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum BandMode {
    /// Half-width `t * se` everywhere.
    #[default]
    Constant,
    /// Half-width `t * se * sqrt(1 + 1/n + (x - x_mean)^2 / sxx)`.
    Prediction,
}

impl BandMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            BandMode::Constant => "constant",
            BandMode::Prediction => "prediction",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, bound(deserialize = "T: Scalar + Deserialize<'de>"))]
pub struct BandSpec<T> {
    pub level: T,
    pub mode: BandMode,
}

impl<T: Scalar> Default for BandSpec<T> {
    fn default() -> Self {
        Self {
            level: T::of(0.95),
            mode: BandMode::Constant,
        }
    }
}

impl<T: Scalar> BandSpec<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.level > T::zero() && self.level < T::one()) {
            return Err(Error::Domain(format!(
                "band level must be in (0, 1), got {}",
                self.level
            )));
        }
        Ok(())
    }
}

/// Two-sided Student-t critical value for `df` degrees of freedom.
pub fn t_critical<T: Scalar>(df: usize, level: T) -> Result<T> {
    tdist::t_critical(df, level.to_f64_lossy()).map(T::of)
}

/// Band evaluator with the critical value computed once.
#[derive(Debug, Clone)]
pub struct ConfidenceBand<'a, T> {
    line: &'a FittedLine<T>,
    stats: ResidualStats<T>,
    mode: BandMode,
    t: T,
}

impl<'a, T: Scalar> ConfidenceBand<'a, T> {
    pub fn new(line: &'a FittedLine<T>, stats: &ResidualStats<T>, band: BandSpec<T>) -> Result<Self> {
        band.validate()?;
        if stats.df < 1 {
            return Err(Error::InsufficientData("band requires df >= 1".into()));
        }
        Ok(Self {
            line,
            stats: *stats,
            mode: band.mode,
            t: t_critical(stats.df, band.level)?,
        })
    }

    pub fn critical_value(&self) -> T {
        self.t
    }

    pub fn half_width(&self, x: T) -> T {
        let base = self.t * self.stats.se;
        match self.mode {
            BandMode::Constant => base,
            BandMode::Prediction => {
                let n = T::of_usize(self.stats.n);
                let dx = x - self.stats.x_mean;
                let leverage = if self.stats.sxx > T::zero() {
                    dx * dx / self.stats.sxx
                } else {
                    T::zero()
                };
                base * (T::one() + T::one() / n + leverage).sqrt()
            }
        }
    }

    /// `(predicted, lower, upper)` at `x`.
    pub fn at(&self, x: T) -> (T, T, T) {
        let y = predict(self.line, x);
        let h = self.half_width(x);
        (y, y - h, y + h)
    }
}

/// Lower and upper band limits at `x`.
pub fn confidence_band<T: Scalar>(
    line: &FittedLine<T>,
    stats: &ResidualStats<T>,
    x: T,
    band: BandSpec<T>,
) -> Result<(T, T)> {
    let (_, lo, hi) = ConfidenceBand::new(line, stats, band)?.at(x);
    Ok((lo, hi))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CiEntry<T> {
    pub person_id: u64,
    pub predicted: T,
    pub lower: T,
    pub upper: T,
    pub is_outlier: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CiFlags<T> {
    pub level: T,
    pub mode: BandMode,
    pub entries: Vec<CiEntry<T>>,
}

impl<T: Scalar> CiFlags<T> {
    pub fn outliers(&self) -> Vec<u64> {
        self.entries
            .iter()
            .filter(|e| e.is_outlier)
            .map(|e| e.person_id)
            .collect()
    }

    pub fn outlier_count(&self) -> usize {
        self.entries.iter().filter(|e| e.is_outlier).count()
    }
}

/// Flags every point whose y falls outside the closed band.
pub fn flag_ci_outliers<T: Scalar>(
    points: &[QueuePoint<T>],
    line: &FittedLine<T>,
    stats: &ResidualStats<T>,
    band: BandSpec<T>,
) -> Result<CiFlags<T>> {
    let evaluator = ConfidenceBand::new(line, stats, band)?;
    let entries = points
        .iter()
        .map(|p| {
            let (predicted, lower, upper) = evaluator.at(p.x);
            CiEntry {
                person_id: p.person_id,
                predicted,
                lower,
                upper,
                is_outlier: p.y < lower || p.y > upper,
            }
        })
        .collect();
    Ok(CiFlags {
        level: band.level,
        mode: band.mode,
        entries,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linefit::{fit_line, residual_stats, ModelSpec};
    use approx::assert_abs_diff_eq;

    fn pts(xy: &[(f64, f64)]) -> Vec<QueuePoint<f64>> {
        xy.iter()
            .enumerate()
            .map(|(i, &(x, y))| QueuePoint::new(i as u64, x, y))
            .collect()
    }

    fn worked() -> (Vec<QueuePoint<f64>>, FittedLine<f64>, ResidualStats<f64>) {
        let p = pts(&[(0.0, 0.0), (1.0, 2.0), (2.0, 3.0), (3.0, 5.0)]);
        let line = fit_line(&p, ModelSpec::linear()).unwrap();
        let stats = residual_stats(&line, &p).unwrap();
        (p, line, stats)
    }

    #[test]
    fn zero_se_collapses_band() {
        let p = pts(&[(0.0, 1.0), (1.0, 3.0), (2.0, 5.0)]);
        let line = fit_line(&p, ModelSpec::linear()).unwrap();
        let mut stats = residual_stats(&line, &p).unwrap();
        stats.se = 0.0;
        let (lo, hi) = confidence_band(&line, &stats, 1.0, BandSpec::default()).unwrap();
        assert_abs_diff_eq!(lo, 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(hi, 3.0, epsilon = 1e-12);
    }

    #[test]
    fn constant_band_worked_example() {
        // 4.3027 * 0.31623 = 1.36066 around 3.3
        let (_, line, stats) = worked();
        let (lo, hi) = confidence_band(&line, &stats, 2.0, BandSpec::default()).unwrap();
        assert_abs_diff_eq!(lo, 1.9393, epsilon = 1e-3);
        assert_abs_diff_eq!(hi, 4.6607, epsilon = 1e-3);
    }

    #[test]
    fn prediction_band_at_mean() {
        let (_, line, stats) = worked();
        let band = BandSpec {
            level: 0.95,
            mode: BandMode::Prediction,
        };
        let (lo, hi) = confidence_band(&line, &stats, stats.x_mean, band).unwrap();
        let t = t_critical(2, 0.95).unwrap();
        assert_abs_diff_eq!((hi - lo) / 2.0, t * stats.se * 1.25f64.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn exact_fit_has_no_outliers() {
        let p = pts(&[(0.0, 1.0), (1.0, 3.0), (2.0, 5.0), (3.0, 7.0)]);
        let line = fit_line(&p, ModelSpec::linear()).unwrap();
        let mut stats = residual_stats(&line, &p).unwrap();
        // Force the exact degenerate band; rounding in the fit is not the point here.
        stats.se = 0.0;
        let line = FittedLine {
            coefficients: vec![1.0, 2.0],
            ..line
        };
        let flags = flag_ci_outliers(&p, &line, &stats, BandSpec::default()).unwrap();
        assert_eq!(flags.outlier_count(), 0);
    }

    #[test]
    fn boundary_is_inside() {
        let line = FittedLine {
            spec: ModelSpec::linear(),
            coefficients: vec![0.0, 0.0],
            n_points: 4,
        };
        let stats = ResidualStats {
            sse: 2.0,
            se: 1.0,
            df: 2,
            n: 4,
            x_mean: 0.0,
            sxx: 1.0,
        };
        let t = t_critical(2, 0.95).unwrap();
        let p = vec![QueuePoint::new(0, 0.0, t), QueuePoint::new(1, 1.0, t * 1.0001)];
        let flags = flag_ci_outliers(&p, &line, &stats, BandSpec::default()).unwrap();
        assert_eq!(flags.outliers(), vec![1]);
    }

    #[test]
    fn bad_level_rejected() {
        let (p, line, stats) = worked();
        let band = BandSpec {
            level: 1.0,
            mode: BandMode::Constant,
        };
        assert!(flag_ci_outliers(&p, &line, &stats, band).is_err());
    }
}
