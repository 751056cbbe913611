use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context};
use clap::{Args, ValueEnum};
use massimo_core::ingest::{to_keypoint_json, Keypoint, COCO_KEYPOINTS, LEFT_HIP, RIGHT_HIP};
use massimo_core::synth::{Deviant, EvalResult, SceneSpec};
use massimo_core::{analyze_points, generate_queue, PersonPose, PoseFrame, QueuePoint, Warnings};
use rayon::prelude::*;
use serde::Serialize;

use crate::options::{load_config, Overrides};

/// Pixels kept free around a synthetic queue.
const MARGIN: f64 = 50.0;
/// Half the distance between the two synthetic hip keypoints.
const HIP_HALF_WIDTH: f64 = 10.0;

#[derive(Clone, Debug)]
pub struct DeviantArg(Deviant);

impl FromStr for DeviantArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (i, off) = s.split_once(':').ok_or_else(|| format!("expected INDEX:OFFSET, got {s:?}"))?;
        let index = i.trim().parse().map_err(|e| format!("bad index {i:?}: {e}"))?;
        let offset = off.trim().parse().map_err(|e| format!("bad offset {off:?}: {e}"))?;
        Ok(Self(Deviant { index, offset }))
    }
}

#[derive(Args, Clone)]
pub struct SceneArgs {
    /// Scene description as JSON; replaces the other scene flags.
    #[arg(long)]
    scene: Option<PathBuf>,
    #[arg(long, default_value_t = 20)]
    n: usize,
    /// Planted deviants as INDEX:OFFSET (pixels, perpendicular to the line).
    #[arg(long, value_delimiter = ',', default_value = "7:40")]
    deviants: Vec<DeviantArg>,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    slope: f64,
    #[arg(long, default_value_t = 300.0, allow_hyphen_values = true)]
    intercept: f64,
    #[arg(long, default_value_t = 40.0)]
    spacing: f64,
    /// Standard deviation of the vertical jitter, pixels.
    #[arg(long, default_value_t = 2.0)]
    noise: f64,
}

impl SceneArgs {
    fn spec(&self, seed: u64) -> anyhow::Result<SceneSpec> {
        let mut spec = match &self.scene {
            Some(p) => {
                let bytes = std::fs::read(p).with_context(|| format!("reading {}", p.display()))?;
                serde_json::from_slice(&bytes).with_context(|| format!("scene {}", p.display()))?
            }
            None => SceneSpec {
                n_people: self.n,
                base_line: (self.slope, self.intercept),
                spacing: self.spacing,
                noise_sigma: self.noise,
                deviants: self.deviants.iter().map(|d| d.0).collect(),
                seed,
            },
        };
        spec.seed = seed;
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Args)]
pub struct SynthArgs {
    #[command(flatten)]
    scene: SceneArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Keypoint file to write; the ground truth goes next to it as
    /// `<stem>.truth.json`.
    #[arg(long, default_value = "scene.json")]
    out: PathBuf,
}

#[derive(Serialize)]
struct Sidecar<'a> {
    scene: &'a SceneSpec,
    truth: Vec<u64>,
    /// Added to every generated point so the queue sits inside the image.
    shift: (f64, f64),
    points: Vec<QueuePoint>,
}

fn sidecar_path(out: &Path) -> PathBuf {
    let stem = out.file_stem().map_or("scene".into(), |s| s.to_string_lossy().into_owned());
    out.with_file_name(format!("{stem}.truth.json"))
}

pub fn synth(args: &SynthArgs) -> anyhow::Result<()> {
    let spec = args.scene.spec(args.seed)?;
    let (points, truth) = generate_queue::<f64>(&spec)?;

    let min_x = points.iter().map(|p| p.x).fold(f64::INFINITY, f64::min);
    let min_y = points.iter().map(|p| p.y).fold(f64::INFINITY, f64::min);
    let shift = (MARGIN - min_x, MARGIN - min_y);
    let shifted: Vec<QueuePoint> = points
        .iter()
        .map(|p| QueuePoint::new(p.person_id, p.x + shift.0, p.y + shift.1))
        .collect();
    let max_x = shifted.iter().map(|p| p.x).fold(0.0, f64::max);
    let max_y = shifted.iter().map(|p| p.y).fold(0.0, f64::max);

    let image_name = args
        .out
        .file_stem()
        .map_or("scene".into(), |s| s.to_string_lossy().into_owned())
        + ".png";
    let frame = PoseFrame {
        image_path: image_name,
        width: (max_x + MARGIN).ceil() as u32,
        height: (max_y + MARGIN).ceil() as u32,
        people: shifted
            .iter()
            .map(|p| {
                let mut keypoints = vec![Keypoint::new(0.0, 0.0, 0.0); COCO_KEYPOINTS];
                keypoints[LEFT_HIP] = Keypoint::new(p.x - HIP_HALF_WIDTH, p.y, 0.95);
                keypoints[RIGHT_HIP] = Keypoint::new(p.x + HIP_HALF_WIDTH, p.y, 0.95);
                PersonPose {
                    id: p.person_id,
                    keypoints,
                }
            })
            .collect(),
    };

    if let Some(dir) = args.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(&args.out, to_keypoint_json(&frame)).with_context(|| format!("writing {}", args.out.display()))?;
    let side = Sidecar {
        scene: &spec,
        truth: truth.iter().copied().collect(),
        shift,
        points: shifted,
    };
    let side_path = sidecar_path(&args.out);
    std::fs::write(&side_path, serde_json::to_string_pretty(&side)? + "\n")?;
    println!(
        "wrote {} ({} people) and {}",
        args.out.display(),
        spec.n_people,
        side_path.display()
    );
    Ok(())
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
pub enum Method {
    Ci,
    Spring,
    Both,
}

#[derive(Args)]
pub struct EvalArgs {
    #[command(flatten)]
    scene: SceneArgs,
    /// Seed range, inclusive: `1..100`, `1..=100` or a single seed.
    #[arg(long, default_value = "1..100")]
    seeds: String,
    #[arg(long, value_enum, default_value = "both")]
    method: Method,
    /// CSV destination; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    overrides: Overrides,
}

fn parse_seeds(s: &str) -> anyhow::Result<Vec<u64>> {
    let s = s.trim();
    let (lo, hi) = match s.split_once("..") {
        Some((a, b)) => (a.trim().parse::<u64>()?, b.trim_start_matches('=').trim().parse::<u64>()?),
        None => {
            let v = s.parse::<u64>()?;
            (v, v)
        }
    };
    if hi < lo {
        bail!("empty seed range {s:?}");
    }
    Ok((lo..=hi).collect())
}

pub fn eval(args: &EvalArgs) -> anyhow::Result<()> {
    let seeds = parse_seeds(&args.seeds).with_context(|| format!("--seeds {:?}", args.seeds))?;
    let config = load_config(args.config.as_deref(), &args.overrides)?;
    let methods: &[(&str, Method)] = match args.method {
        Method::Ci => &[("ci", Method::Ci)],
        Method::Spring => &[("spring", Method::Spring)],
        Method::Both => &[("ci", Method::Ci), ("spring", Method::Spring)],
    };

    let rows: Vec<anyhow::Result<Vec<EvalResult>>> = seeds
        .par_iter()
        .map(|&seed| {
            let spec = args.scene.spec(seed)?;
            let (points, truth) = generate_queue::<f64>(&spec)?;
            let a = analyze_points(&format!("seed {seed}"), &points, &config, Warnings::new())
                .with_context(|| format!("seed {seed}"))?;
            Ok(methods
                .iter()
                .map(|(name, m)| {
                    let detected = if *m == Method::Ci { a.ci_outliers() } else { a.spring_outliers() };
                    EvalResult::new(seed, spec.n_people, name, detected, truth.clone())
                })
                .collect())
        })
        .collect();

    let mut csv = String::from(EvalResult::CSV_HEADER);
    csv.push('\n');
    for r in rows {
        for row in r? {
            csv.push_str(&row.csv_row());
            csv.push('\n');
        }
    }
    match &args.out {
        Some(p) => std::fs::write(p, csv).with_context(|| format!("writing {}", p.display()))?,
        None => std::io::stdout().lock().write_all(csv.as_bytes())?,
    }
    Ok(())
}
