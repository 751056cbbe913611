use std::path::{Path, PathBuf};

use anyhow::Context;
use massimo_core::ingest::PoseFrame;
use massimo_core::pipeline::blank_canvas;
use massimo_core::{analyze_frame, fit_line, hip_midpoints, order_queue, residual_stats, Analysis, Config};
use massimo_core::{parse_keypoint_file, Error, PixelBuffer, Warnings};
use rayon::prelude::*;
use serde::Serialize;

pub fn read_frame(path: &Path) -> anyhow::Result<(PoseFrame, Warnings)> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    let mut warnings = Warnings::new();
    let frame = parse_keypoint_file(&bytes, &mut warnings).with_context(|| path.display().to_string())?;
    Ok((frame, warnings))
}

pub fn validate(path: &Path) -> anyhow::Result<()> {
    let (frame, warnings) = read_frame(path)?;
    for w in &warnings {
        eprintln!("warning: {w}");
    }
    println!("{}: valid, {} people", path.display(), frame.people.len());
    Ok(())
}

/// The frame's image, resolved next to the keypoint file. A missing file
/// falls back to a blank canvas; an unreadable one is an error.
fn base_image(keypoints: &Path, frame: &PoseFrame, warnings: &mut Warnings) -> anyhow::Result<PixelBuffer> {
    let rel = PathBuf::from(&frame.image_path);
    let path = if rel.is_absolute() {
        rel
    } else {
        keypoints.parent().unwrap_or(Path::new(".")).join(rel)
    };
    if !path.is_file() {
        warnings.push(format!("image {} not found; drawing on a blank canvas", path.display()));
        return Ok(blank_canvas(frame));
    }
    let img = PixelBuffer::load(&path).with_context(|| format!("base image {}", path.display()))?;
    if (img.width(), img.height()) != (frame.width, frame.height) {
        warnings.push(format!(
            "image is {}x{} but keypoints declare {}x{}",
            img.width(),
            img.height(),
            frame.width,
            frame.height
        ));
    }
    Ok(img)
}

/// Runs the pipeline on one file. With `with_report` the report is written
/// too; otherwise only the images.
pub fn analyze_to_dir(keypoints: &Path, config: &Config, out: &Path, with_report: bool) -> anyhow::Result<Analysis> {
    let (frame, mut warnings) = read_frame(keypoints)?;
    let base = base_image(keypoints, &frame, &mut warnings)?;
    let analysis = analyze_frame(&frame, config, warnings).with_context(|| keypoints.display().to_string())?;
    let overlay = analysis.render_overlay(&base)?;

    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    if with_report {
        std::fs::write(out.join("report.json"), analysis.report.to_json())?;
    }
    overlay.save_png(out.join("overlay.png"))?;
    std::fs::write(out.join("topview.svg"), analysis.render_topview())?;

    for w in &analysis.report.warnings {
        eprintln!("warning: {w}");
    }
    let r = &analysis.report;
    println!(
        "{}: {} people, ci outliers {:?}, spring outliers {:?} (otsu {})",
        keypoints.display(),
        r.points.len(),
        r.ci.outliers,
        r.spring.outliers,
        r.spring.otsu_threshold
    );
    Ok(analysis)
}

pub fn batch(files: &[PathBuf], config: &Config, out: &Path, jobs: Option<usize>) -> anyhow::Result<()> {
    let mut names: Vec<String> = files
        .iter()
        .map(|f| f.file_stem().map_or("input".into(), |s| s.to_string_lossy().into_owned()))
        .collect();
    // Keep output folders distinct when stems repeat.
    for i in 0..names.len() {
        if names[..i].contains(&names[i]) {
            names[i] = format!("{}-{i}", names[i]);
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(0))
        .build()
        .context("starting worker pool")?;
    let results: Vec<anyhow::Result<Analysis>> = pool.install(|| {
        files
            .par_iter()
            .zip(&names)
            .map(|(f, name)| analyze_to_dir(f, config, &out.join(name), true))
            .collect()
    });
    let mut worst = None;
    let mut failed = 0;
    for (f, r) in files.iter().zip(results) {
        if let Err(e) = r {
            eprintln!("error: {}: {e:#}", f.display());
            failed += 1;
            let code = crate::exit_code(&e);
            if worst.as_ref().is_none_or(|(c, _)| code > *c) {
                worst = Some((code, e));
            }
        }
    }
    match worst {
        None => Ok(()),
        Some((_, e)) => Err(e.context(format!("{failed} of {} files failed", files.len()))),
    }
}

#[derive(Serialize)]
struct FitOutput {
    kind: &'static str,
    degree: usize,
    lambda: f64,
    coefficients: Vec<f64>,
    n: usize,
    se: Option<f64>,
}

pub fn fit(keypoints: &Path, config: &Config) -> anyhow::Result<()> {
    let (frame, mut warnings) = read_frame(keypoints)?;
    let points = order_queue(&hip_midpoints(&frame, config.conf_threshold, &mut warnings));
    for w in &warnings {
        eprintln!("warning: {w}");
    }
    if points.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "insufficient queue: {} valid people, need at least 2",
            points.len()
        ))
        .into());
    }
    let line = fit_line(&points, config.model)?;
    let out = FitOutput {
        kind: line.spec.kind.as_str(),
        degree: line.degree(),
        lambda: line.spec.lambda,
        se: residual_stats(&line, &points).ok().map(|s| s.se),
        coefficients: line.coefficients,
        n: points.len(),
    };
    println!("{}", serde_json::to_string_pretty(&out)?);
    Ok(())
}
