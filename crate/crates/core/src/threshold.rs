//! Min-max scaling of force magnitudes and Otsu thresholding.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::springs::ForceField;

pub const LEVELS: usize = 256;

/// Largest input for which the exact u128 split comparison cannot overflow.
pub const MAX_SAMPLES: usize = 1 << 22;

/// Maps values linearly onto `[0, 255]`. A constant input maps to all zeros.
pub fn minmax_scale<T: Scalar>(values: &[T]) -> Vec<T> {
    let (lo, hi) = values
        .iter()
        .fold((T::infinity(), T::neg_infinity()), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if !(hi > lo) {
        return vec![T::zero(); values.len()];
    }
    let range = hi - lo;
    let full = T::of(255.0);
    values
        .iter()
        .map(|&v| ((v - lo) / range * full).min(full))
        .collect()
}

/// Histogram bin of a scaled value: `floor(v)` clamped to `0..=255`.
pub fn bin_of<T: Scalar>(v: T) -> u8 {
    let f = v.floor().to_f64_lossy();
    if f.is_nan() || f <= 0.0 {
        0
    } else if f >= 255.0 {
        255
    } else {
        f as u8
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OtsuResult<T> {
    /// Largest bin of the lower class.
    pub threshold: u8,
    /// `(w1, w2)`: fraction of samples in the lower and upper class.
    pub class_probs: (T, T),
    pub class_vars: (T, T),
    /// `w1 s1^2 + w2 s2^2` at the chosen threshold.
    pub intra_class_variance: T,
    /// `w1 w2 (m1 - m2)^2` at the chosen threshold.
    pub between_class_variance: T,
}

/// Per-class integer sums for a split at `t`.
#[derive(Debug, Clone, Copy)]
struct Split {
    n1: u64,
    n2: u64,
    s1: u64,
    s2: u64,
    q1: u64,
    q2: u64,
}

/// Otsu's threshold over a 256-bin histogram.
///
/// Every split `t` in `0..=254` with both classes non-empty is scored and the
/// smallest `t` minimizing the intra-class variance wins. Comparisons are done
/// in exact integer arithmetic: minimizing `sum_c n_c s_c^2` over splits is
/// the same as maximizing `S1^2 / n1 + S2^2 / n2` (S = sum of bin indices),
/// which is compared by cross-multiplication.
#[allow(clippy::needless_range_loop)]
pub fn otsu_threshold<T: Scalar>(scaled: &[T]) -> Result<OtsuResult<T>> {
    if scaled.len() < 2 {
        return Err(Error::DegenerateDistribution(format!(
            "need at least 2 values, got {}",
            scaled.len()
        )));
    }
    if scaled.len() > MAX_SAMPLES {
        return Err(Error::Domain(format!(
            "at most {MAX_SAMPLES} values supported, got {}",
            scaled.len()
        )));
    }
    let mut hist = [0u64; LEVELS];
    for &v in scaled {
        hist[bin_of(v) as usize] += 1;
    }
    let total_n = scaled.len() as u64;
    let total_s: u64 = hist.iter().enumerate().map(|(b, &c)| b as u64 * c).sum();
    let total_q: u64 = hist.iter().enumerate().map(|(b, &c)| (b * b) as u64 * c).sum();

    let mut best: Option<(u8, u128, u128, Split)> = None;
    let (mut n1, mut s1, mut q1) = (0u64, 0u64, 0u64);
    for t in 0..LEVELS - 1 {
        let c = hist[t];
        n1 += c;
        s1 += t as u64 * c;
        q1 += (t * t) as u64 * c;
        let n2 = total_n - n1;
        if n1 == 0 || n2 == 0 {
            continue;
        }
        let s2 = total_s - s1;
        // Score = (s1^2 n2 + s2^2 n1) / (n1 n2).
        let num = (s1 as u128).pow(2) * n2 as u128 + (s2 as u128).pow(2) * n1 as u128;
        let den = n1 as u128 * n2 as u128;
        let better = match &best {
            None => true,
            Some((_, bnum, bden, _)) => num * bden > bnum * den,
        };
        if better {
            let split = Split {
                n1,
                n2,
                s1,
                s2,
                q1,
                q2: total_q - q1,
            };
            best = Some((t as u8, num, den, split));
        }
    }

    let Some((threshold, _, _, sp)) = best else {
        return Err(Error::DegenerateDistribution(
            "all values fall in one histogram bin".into(),
        ));
    };

    let n = T::of(total_n as f64);
    let (n1, n2) = (T::of(sp.n1 as f64), T::of(sp.n2 as f64));
    let m1 = T::of(sp.s1 as f64) / n1;
    let m2 = T::of(sp.s2 as f64) / n2;
    let v1 = (T::of(sp.q1 as f64) / n1 - m1 * m1).max(T::zero());
    let v2 = (T::of(sp.q2 as f64) / n2 - m2 * m2).max(T::zero());
    let w1 = n1 / n;
    let w2 = n2 / n;
    Ok(OtsuResult {
        threshold,
        class_probs: (w1, w2),
        class_vars: (v1, v2),
        intra_class_variance: w1 * v1 + w2 * v2,
        between_class_variance: w1 * w2 * (m1 - m2) * (m1 - m2),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpringFlag<T> {
    pub person_id: u64,
    pub scaled_force: T,
    pub is_outlier: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpringFlags<T> {
    /// `None` when the force distribution is degenerate.
    pub otsu: Option<OtsuResult<T>>,
    pub entries: Vec<SpringFlag<T>>,
}

impl<T: Scalar> SpringFlags<T> {
    /// Reported threshold; 0 for a degenerate distribution.
    pub fn threshold(&self) -> u8 {
        self.otsu.map_or(0, |o| o.threshold)
    }

    pub fn outliers(&self) -> Vec<u64> {
        self.entries
            .iter()
            .filter(|e| e.is_outlier)
            .map(|e| e.person_id)
            .collect()
    }

    pub fn scaled_forces(&self) -> Vec<T> {
        self.entries.iter().map(|e| e.scaled_force).collect()
    }
}

/// Flags people whose scaled net force lands above the Otsu split.
///
/// A person is an outlier when their histogram bin exceeds the threshold,
/// i.e. they belong to the upper Otsu class.
pub fn flag_force_outliers<T: Scalar>(field: &ForceField<T>) -> SpringFlags<T> {
    let scaled = minmax_scale(&field.net_magnitudes());
    let otsu = otsu_threshold(&scaled).ok();
    let entries = field
        .net
        .iter()
        .zip(&scaled)
        .map(|(n, &s)| SpringFlag {
            person_id: n.person_id,
            scaled_force: s,
            is_outlier: otsu.is_some_and(|o| bin_of(s) > o.threshold),
        })
        .collect();
    SpringFlags { otsu, entries }
}
