//! Synthetic queues with planted deviants, and detection metrics.
//!
//! Scenes are reproducible across implementations: noise comes from a
//! SplitMix64 stream (state += 0x9E3779B97F4A7C15, then the standard
//! xor-shift-multiply finalizer), uniforms take the top 53 bits, and normals
//! use the Box-Muller cosine branch with `u1 = 1 - uniform` so the log never
//! sees zero. One normal is drawn per person, in index order, even when the
//! noise level is zero.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::QueuePoint;
use crate::scalar::Scalar;

#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform in `[0, 1)`.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard normal via Box-Muller (consumes two uniforms).
    pub fn next_gaussian(&mut self) -> f64 {
        let u1 = 1.0 - self.next_f64();
        let u2 = self.next_f64();
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }
}

/// Planted deviant: person index and signed perpendicular offset in pixels
/// (positive = below the line in image coordinates).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Deviant {
    pub index: usize,
    pub offset: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub n_people: usize,
    /// `(slope, intercept)` of the ideal queue line.
    pub base_line: (f64, f64),
    pub spacing: f64,
    #[serde(default)]
    pub noise_sigma: f64,
    #[serde(default)]
    pub deviants: Vec<Deviant>,
    #[serde(default)]
    pub seed: u64,
}

impl Default for SceneSpec {
    fn default() -> Self {
        Self {
            n_people: 20,
            base_line: (0.0, 300.0),
            spacing: 40.0,
            noise_sigma: 0.0,
            deviants: Vec::new(),
            seed: 0,
        }
    }
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_people < 2 {
            return Err(Error::Domain("scene needs at least 2 people".into()));
        }
        if !(self.spacing > 0.0) || !self.spacing.is_finite() {
            return Err(Error::Domain("spacing must be positive".into()));
        }
        if !(self.noise_sigma >= 0.0) || !self.noise_sigma.is_finite() {
            return Err(Error::Domain("noise_sigma must be >= 0".into()));
        }
        let mut seen = BTreeSet::new();
        for d in &self.deviants {
            if d.index >= self.n_people {
                return Err(Error::Domain(format!(
                    "deviant index {} out of range for {} people",
                    d.index, self.n_people
                )));
            }
            if !seen.insert(d.index) {
                return Err(Error::Domain(format!("duplicate deviant index {}", d.index)));
            }
        }
        Ok(())
    }

    pub fn truth(&self) -> BTreeSet<u64> {
        self.deviants.iter().map(|d| d.index as u64).collect()
    }
}

/// Generates the scene's hip midpoints (person id = index) and the set of
/// planted deviant ids.
pub fn generate_queue<T: Scalar>(spec: &SceneSpec) -> Result<(Vec<QueuePoint<T>>, BTreeSet<u64>)> {
    spec.validate()?;
    let (slope, intercept) = spec.base_line;
    let norm = slope.hypot(1.0);
    let (nx, ny) = (-slope / norm, 1.0 / norm);
    let mut rng = SplitMix64::new(spec.seed);

    let mut points = Vec::with_capacity(spec.n_people);
    for i in 0..spec.n_people {
        let x = i as f64 * spec.spacing;
        let noise = rng.next_gaussian();
        let mut px = x;
        let mut py = slope * x + intercept + spec.noise_sigma * noise;
        if let Some(d) = spec.deviants.iter().find(|d| d.index == i) {
            px += d.offset * nx;
            py += d.offset * ny;
        }
        points.push(QueuePoint::new(i as u64, T::of(px), T::of(py)));
    }
    Ok((points, spec.truth()))
}

/// Detections divided by ground-truth count, in percent. Can exceed 100 and
/// ignores whether detections are correct.
pub fn accuracy_paper(detected: &BTreeSet<u64>, truth: &BTreeSet<u64>) -> Result<f64> {
    if truth.is_empty() {
        return Err(Error::UndefinedMetric(
            "accuracy needs at least one ground-truth outlier".into(),
        ));
    }
    Ok(detected.len() as f64 / truth.len() as f64 * 100.0)
}

/// Precision, recall and F1. No detections gives precision 1; empty truth
/// gives recall 1; F1 is 0 when both are 0.
pub fn prf1(detected: &BTreeSet<u64>, truth: &BTreeSet<u64>) -> (f64, f64, f64) {
    let tp = detected.intersection(truth).count() as f64;
    let fp = detected.difference(truth).count() as f64;
    let fn_ = truth.difference(detected).count() as f64;
    let precision = if tp + fp == 0.0 { 1.0 } else { tp / (tp + fp) };
    let recall = if tp + fn_ == 0.0 { 1.0 } else { tp / (tp + fn_) };
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    (precision, recall, f1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub seed: u64,
    pub n: usize,
    pub method: String,
    /// `None` when the scene has no planted deviants.
    pub accuracy_paper: Option<f64>,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub detected: BTreeSet<u64>,
    pub truth: BTreeSet<u64>,
}

impl EvalResult {
    pub fn new(seed: u64, n: usize, method: &str, detected: BTreeSet<u64>, truth: BTreeSet<u64>) -> Self {
        let (precision, recall, f1) = prf1(&detected, &truth);
        Self {
            seed,
            n,
            method: method.to_string(),
            accuracy_paper: accuracy_paper(&detected, &truth).ok(),
            precision,
            recall,
            f1,
            detected,
            truth,
        }
    }

    pub const CSV_HEADER: &'static str = "seed,n,method,precision,recall,f1,accuracy_paper";

    pub fn csv_row(&self) -> String {
        let acc = self
            .accuracy_paper
            .map(|a| format!("{a:.4}"))
            .unwrap_or_default();
        format!(
            "{},{},{},{:.6},{:.6},{:.6},{}",
            self.seed, self.n, self.method, self.precision, self.recall, self.f1, acc
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn set(v: &[u64]) -> BTreeSet<u64> {
        v.iter().copied().collect()
    }

    #[test]
    fn splitmix_reference_stream() {
        // First outputs for seed 0 of the reference SplitMix64.
        let mut r = SplitMix64::new(0);
        assert_eq!(r.next_u64(), 0xE220_A839_7B1D_CDAF);
        assert_eq!(r.next_u64(), 0x6E78_9E6A_A1B9_65F4);
    }

    #[test]
    fn noiseless_queue_is_on_line() {
        let spec = SceneSpec {
            n_people: 6,
            base_line: (0.5, 10.0),
            spacing: 4.0,
            ..SceneSpec::default()
        };
        let (p, truth) = generate_queue::<f64>(&spec).unwrap();
        assert!(truth.is_empty());
        for (i, q) in p.iter().enumerate() {
            assert_eq!(q.x, i as f64 * 4.0);
            assert_eq!(q.y, 0.5 * q.x + 10.0);
        }
    }

    #[test]
    fn deviant_on_horizontal_line() {
        let spec = SceneSpec {
            n_people: 5,
            base_line: (0.0, 100.0),
            spacing: 10.0,
            deviants: vec![Deviant { index: 2, offset: 50.0 }],
            ..SceneSpec::default()
        };
        let (p, truth) = generate_queue::<f64>(&spec).unwrap();
        assert_eq!(truth, set(&[2]));
        assert_eq!((p[2].x, p[2].y), (20.0, 150.0));
        assert!(p.iter().enumerate().all(|(i, q)| i == 2 || q.y == 100.0));
    }

    #[test]
    fn deviant_moves_perpendicular() {
        let spec = SceneSpec {
            n_people: 3,
            base_line: (1.0, 0.0),
            spacing: 10.0,
            deviants: vec![Deviant { index: 1, offset: 2f64.sqrt() }],
            ..SceneSpec::default()
        };
        let (p, _) = generate_queue::<f64>(&spec).unwrap();
        assert_abs_diff_eq!(p[1].x, 9.0, epsilon = 1e-12);
        assert_abs_diff_eq!(p[1].y, 11.0, epsilon = 1e-12);
    }

    #[test]
    fn same_seed_same_scene() {
        let spec = SceneSpec {
            noise_sigma: 3.0,
            seed: 42,
            ..SceneSpec::default()
        };
        let a = generate_queue::<f64>(&spec).unwrap().0;
        let b = generate_queue::<f64>(&spec).unwrap().0;
        assert_eq!(a, b);
        let c = generate_queue::<f64>(&SceneSpec { seed: 43, ..spec }).unwrap().0;
        assert_ne!(a, c);
    }

    #[test]
    fn invalid_scenes() {
        let bad_index = SceneSpec {
            n_people: 3,
            deviants: vec![Deviant { index: 3, offset: 1.0 }],
            ..SceneSpec::default()
        };
        assert!(bad_index.validate().is_err());
        let dup = SceneSpec {
            deviants: vec![Deviant { index: 1, offset: 1.0 }, Deviant { index: 1, offset: 2.0 }],
            ..SceneSpec::default()
        };
        assert!(dup.validate().is_err());
        assert!(SceneSpec { spacing: 0.0, ..SceneSpec::default() }.validate().is_err());
    }

    #[test]
    fn accuracy_formula() {
        assert_eq!(accuracy_paper(&set(&[1, 2, 3]), &set(&[1, 2, 3])).unwrap(), 100.0);
        assert_abs_diff_eq!(accuracy_paper(&set(&[1]), &set(&[1, 2, 3])).unwrap(), 33.333, epsilon = 1e-3);
        assert_eq!(accuracy_paper(&set(&[1, 2, 3, 4]), &set(&[5, 6])).unwrap(), 200.0);
        assert!(matches!(
            accuracy_paper(&set(&[1]), &set(&[])),
            Err(Error::UndefinedMetric(_))
        ));
    }

    #[test]
    fn prf1_cases() {
        assert_eq!(prf1(&set(&[1, 3]), &set(&[1, 3])), (1.0, 1.0, 1.0));
        let (p, r, f) = prf1(&set(&[1, 2, 3]), &set(&[1, 2]));
        assert_abs_diff_eq!(p, 2.0 / 3.0, epsilon = 1e-15);
        assert_eq!(r, 1.0);
        assert_abs_diff_eq!(f, 0.8, epsilon = 1e-15);
        assert_eq!(prf1(&set(&[]), &set(&[5])), (1.0, 0.0, 0.0));
        assert_eq!(prf1(&set(&[2]), &set(&[5])), (0.0, 0.0, 0.0));
    }

    #[test]
    fn csv_row_format() {
        let r = EvalResult::new(7, 20, "spring", set(&[3]), set(&[3]));
        assert_eq!(r.csv_row(), "7,20,spring,1.000000,1.000000,1.000000,100.0000");
        let r = EvalResult::new(1, 5, "ci", set(&[]), set(&[]));
        assert_eq!(r.csv_row(), "1,5,ci,1.000000,1.000000,1.000000,");
    }
}
