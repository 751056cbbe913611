//! End-to-end analysis: hip midpoints -> ordering -> line fit -> confidence
//! band flags -> spring forces -> Otsu flags -> colors and top view.

use serde::{Deserialize, Serialize};

use crate::ci::{flag_ci_outliers, BandSpec, CiFlags};
use crate::error::{Error, Result};
use crate::ingest::{hip_midpoints, order_queue, PoseFrame, QueuePoint, DEFAULT_CONF_THRESHOLD};
use crate::linefit::{
    direction_vector, fit_line, line_axis, residual_stats, top_view, DirectionVector, FittedLine,
    ModelSpec, TopViewPoint,
};
use crate::render::{normalized_colors, render_overlay, render_topview, PixelBuffer, Rgb, StyleConfig};
use crate::springs::{chain_forces, ForceField, SpringParams};
use crate::threshold::{flag_force_outliers, SpringFlags};
use crate::Warnings;

/// Which vector the spring model resolves forces against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum DirectionMode {
    /// First person to last person.
    #[default]
    Endpoints,
    /// Direction of the fitted line.
    Regression,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Config {
    pub model: ModelSpec<f64>,
    pub band: BandSpec<f64>,
    pub spring: SpringParams<f64>,
    pub direction: DirectionMode,
    pub style: StyleConfig,
    pub conf_threshold: f64,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            model: ModelSpec::linear(),
            band: BandSpec::default(),
            spring: SpringParams::default(),
            direction: DirectionMode::Endpoints,
            style: StyleConfig::default(),
            conf_threshold: DEFAULT_CONF_THRESHOLD,
        }
    }
}

impl Config {
    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.band.validate()?;
        if !(self.spring.k > 0.0) || !self.spring.k.is_finite() {
            return Err(Error::Domain(format!("spring constant must be positive, got {}", self.spring.k)));
        }
        self.style.validate()?;
        if !(0.0..=1.0).contains(&self.conf_threshold) {
            return Err(Error::Domain(format!(
                "conf_threshold must be in [0, 1], got {}",
                self.conf_threshold
            )));
        }
        Ok(())
    }

    pub fn from_json(bytes: &[u8]) -> Result<Self> {
        let cfg: Config = serde_json::from_slice(bytes).map_err(|e| Error::Schema(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }
}

// Report schema.

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportPoint {
    pub person_id: u64,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineReport {
    pub kind: String,
    pub degree: usize,
    pub lambda: f64,
    pub coefficients: Vec<f64>,
    pub axes_swapped: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CiReport {
    pub method: String,
    pub level: f64,
    pub mode: String,
    pub outliers: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpringReport {
    pub method: String,
    pub otsu_threshold: f64,
    pub outliers: Vec<u64>,
    pub scaled_forces: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkReport {
    pub i: usize,
    pub d: f64,
    pub theta: f64,
    pub magnitude: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetReport {
    pub person_id: u64,
    pub fx: f64,
    pub fy: f64,
    pub magnitude: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForcesReport {
    pub k: f64,
    pub links: Vec<LinkReport>,
    pub net: Vec<NetReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PersonColor {
    pub person_id: u64,
    pub r: u8,
    pub g: u8,
    pub b: u8,
}

/// Serialized outcome of one analysis. Contains no timestamps, so identical
/// inputs give byte-identical JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub source: String,
    pub points: Vec<ReportPoint>,
    pub line: LineReport,
    pub ci: CiReport,
    pub spring: SpringReport,
    pub forces: ForcesReport,
    pub colors: Vec<PersonColor>,
    pub warnings: Vec<String>,
}

impl AnalysisReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Schema(format!("report: {e}")))
    }
}

/// Full in-memory result. Points are in queue order, image coordinates.
#[derive(Debug, Clone)]
pub struct Analysis {
    pub report: AnalysisReport,
    pub points: Vec<QueuePoint<f64>>,
    pub line: FittedLine<f64>,
    pub axes_swapped: bool,
    pub ci: CiFlags<f64>,
    pub forces: ForceField<f64>,
    pub spring: SpringFlags<f64>,
    pub top_view: Vec<TopViewPoint<f64>>,
    pub style: StyleConfig,
}

impl Analysis {
    pub fn render_overlay(&self, base: &PixelBuffer) -> Result<PixelBuffer> {
        render_overlay(base, &self.points, &self.forces, &self.ci, &self.spring, &self.style)
    }

    pub fn render_topview(&self) -> String {
        render_topview(&self.top_view, &self.spring)
    }

    pub fn ci_outliers(&self) -> std::collections::BTreeSet<u64> {
        self.ci.outliers().into_iter().collect()
    }

    pub fn spring_outliers(&self) -> std::collections::BTreeSet<u64> {
        self.spring.outliers().into_iter().collect()
    }
}

/// Canvas used when the frame's image is unavailable.
pub fn blank_canvas(frame: &PoseFrame) -> PixelBuffer {
    PixelBuffer::filled(frame.width, frame.height, Rgb::new(96, 96, 96))
}

fn swap_all(points: &[QueuePoint<f64>]) -> Vec<QueuePoint<f64>> {
    points.iter().map(QueuePoint::swapped).collect()
}

/// Unit direction of the fitted line in image coordinates, oriented from the
/// first towards the last person.
fn regression_direction(
    line: &FittedLine<f64>,
    fit_points: &[QueuePoint<f64>],
    swapped: bool,
    image_points: &[QueuePoint<f64>],
) -> Result<DirectionVector<f64>> {
    let (_, (ux, uy)) = line_axis(line, fit_points);
    let (mut dx, mut dy) = if swapped { (uy, ux) } else { (ux, uy) };
    if let (Some(f), Some(l)) = (image_points.first(), image_points.last()) {
        if dx * (l.x - f.x) + dy * (l.y - f.y) < 0.0 {
            dx = -dx;
            dy = -dy;
        }
    }
    DirectionVector::new(dx, dy)
}

/// Fits the line, switching to x-on-y when the queue is vertical.
fn fit_with_swap(
    points: &[QueuePoint<f64>],
    model: ModelSpec<f64>,
    warnings: &mut Warnings,
) -> Result<(FittedLine<f64>, bool)> {
    match fit_line(points, model) {
        Ok(line) => Ok((line, false)),
        Err(Error::DegenerateGeometry(msg)) => {
            warnings.push(format!("{msg}; refitting with axes swapped"));
            let line = fit_line(&swap_all(points), model)?;
            Ok((line, true))
        }
        Err(e) => Err(e),
    }
}

/// Runs the analysis on already-extracted hip midpoints.
pub fn analyze_points(
    source: &str,
    points: &[QueuePoint<f64>],
    config: &Config,
    mut warnings: Warnings,
) -> Result<Analysis> {
    config.validate()?;
    if points.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "insufficient queue: {} valid people, need at least 2",
            points.len()
        )));
    }
    let ordered = order_queue(points);

    let (line, swapped) = fit_with_swap(&ordered, config.model, &mut warnings)?;
    let fit_points = if swapped { swap_all(&ordered) } else { ordered.clone() };

    let ci = match residual_stats(&line, &fit_points) {
        Ok(stats) => flag_ci_outliers(&fit_points, &line, &stats, config.band)?,
        Err(Error::InsufficientData(msg)) => {
            warnings.push(format!("confidence band skipped: {msg}"));
            CiFlags {
                level: config.band.level,
                mode: config.band.mode,
                entries: Vec::new(),
            }
        }
        Err(e) => return Err(e),
    };

    let e_v = match config.direction {
        DirectionMode::Endpoints => match direction_vector(&ordered) {
            Ok(d) => d,
            Err(e) => {
                warnings.push(format!("{e}; using the fitted line direction"));
                regression_direction(&line, &fit_points, swapped, &ordered)?
            }
        },
        DirectionMode::Regression => regression_direction(&line, &fit_points, swapped, &ordered)?,
    };

    let forces = chain_forces(&ordered, &e_v, &config.spring, &mut warnings);
    let spring = flag_force_outliers(&forces);
    if spring.otsu.is_none() {
        warnings.push("force distribution is degenerate; no spring outliers".into());
    }
    let colors = normalized_colors(&forces.net_magnitudes());
    let projected = top_view(&fit_points, &line);

    let report = AnalysisReport {
        source: source.to_string(),
        points: ordered
            .iter()
            .map(|p| ReportPoint {
                person_id: p.person_id,
                x: p.x,
                y: p.y,
            })
            .collect(),
        line: LineReport {
            kind: line.spec.kind.as_str().to_string(),
            degree: line.degree(),
            lambda: line.spec.lambda,
            coefficients: line.coefficients.clone(),
            axes_swapped: swapped,
        },
        ci: CiReport {
            method: "ci".into(),
            level: ci.level,
            mode: ci.mode.as_str().into(),
            outliers: ci.outliers(),
        },
        spring: SpringReport {
            method: "spring".into(),
            otsu_threshold: spring.threshold() as f64,
            outliers: spring.outliers(),
            scaled_forces: spring.scaled_forces(),
        },
        forces: ForcesReport {
            k: forces.k,
            links: forces
                .links
                .iter()
                .map(|l| LinkReport {
                    i: l.i,
                    d: l.d,
                    theta: l.theta,
                    magnitude: l.magnitude,
                })
                .collect(),
            net: forces
                .net
                .iter()
                .map(|n| NetReport {
                    person_id: n.person_id,
                    fx: n.fx,
                    fy: n.fy,
                    magnitude: n.magnitude,
                })
                .collect(),
        },
        colors: ordered
            .iter()
            .zip(&colors)
            .map(|(p, c)| PersonColor {
                person_id: p.person_id,
                r: c.r,
                g: c.g,
                b: c.b,
            })
            .collect(),
        warnings,
    };

    Ok(Analysis {
        report,
        points: ordered,
        line,
        axes_swapped: swapped,
        ci,
        forces,
        spring,
        top_view: projected,
        style: config.style,
    })
}

/// Runs the analysis on a parsed keypoint frame.
pub fn analyze_frame(frame: &PoseFrame, config: &Config, mut warnings: Warnings) -> Result<Analysis> {
    config.validate()?;
    let points = hip_midpoints(frame, config.conf_threshold, &mut warnings);
    analyze_points(&frame.image_path, &points, config, warnings)
}
