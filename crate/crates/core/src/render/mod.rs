//! Force visualization: jet colormap, overlay rasterization, top-view SVG.

mod font;
mod svg;

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::ci::CiFlags;
use crate::error::{Error, Result};
use crate::ingest::QueuePoint;
use crate::scalar::Scalar;
use crate::springs::ForceField;
use crate::threshold::{minmax_scale, SpringFlags};

pub use svg::render_topview;

pub const LEGEND: [(&str, f64); 3] = [
    ("blue: aligned", 0.0),
    ("green/yellow: moderate", 0.5),
    ("red: misaligned", 1.0),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Rgb {
    pub r: u8,
    pub g: u8,
    pub b: u8,
}

impl Rgb {
    pub const fn new(r: u8, g: u8, b: u8) -> Self {
        Self { r, g, b }
    }

    pub fn hex(&self) -> String {
        format!("#{:02x}{:02x}{:02x}", self.r, self.g, self.b)
    }
}

/// Classic piecewise-linear jet: blue at 0, green around 0.5, red at 1.
/// Inputs outside `[0, 1]` are clamped; NaN maps like 0.
pub fn jet_color<T: Scalar>(v: T) -> Rgb {
    let v = v.to_f64_lossy();
    let v = if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) };
    let ramp = |center: f64| {
        let c = (1.5 - (4.0 * v - center).abs()).clamp(0.0, 1.0);
        (255.0 * c + 0.5).floor() as u8
    };
    Rgb::new(ramp(3.0), ramp(2.0), ramp(1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StyleConfig {
    pub overlay_alpha: f64,
    /// Semi-major axis of the person marker as a fraction of the median link length.
    pub ellipse_scale: f64,
    pub line_width: f64,
    pub outlier_box_color: Rgb,
}

impl Default for StyleConfig {
    fn default() -> Self {
        Self {
            overlay_alpha: 0.45,
            ellipse_scale: 0.35,
            line_width: 3.0,
            outlier_box_color: Rgb::new(255, 0, 0),
        }
    }
}

impl StyleConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.overlay_alpha) {
            return Err(Error::Domain(format!(
                "overlay_alpha must be in [0, 1], got {}",
                self.overlay_alpha
            )));
        }
        if !(self.ellipse_scale > 0.0) || !self.ellipse_scale.is_finite() {
            return Err(Error::Domain(format!(
                "ellipse_scale must be positive, got {}",
                self.ellipse_scale
            )));
        }
        if !(self.line_width >= 0.0) {
            return Err(Error::Domain("line_width must be >= 0".into()));
        }
        Ok(())
    }
}

/// Row-major RGB8 image.
#[derive(Clone, PartialEq, Eq)]
pub struct PixelBuffer {
    width: u32,
    height: u32,
    pixels: Vec<u8>,
}

impl std::fmt::Debug for PixelBuffer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PixelBuffer")
            .field("width", &self.width)
            .field("height", &self.height)
            .finish_non_exhaustive()
    }
}

impl PixelBuffer {
    pub fn new(width: u32, height: u32, pixels: Vec<u8>) -> Result<Self> {
        if pixels.len() != width as usize * height as usize * 3 {
            return Err(Error::Render(format!(
                "pixel buffer of {} bytes does not match {width}x{height} RGB",
                pixels.len()
            )));
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn filled(width: u32, height: u32, color: Rgb) -> Self {
        let pixels = [color.r, color.g, color.b].repeat(width as usize * height as usize);
        Self {
            width,
            height,
            pixels,
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn get(&self, x: u32, y: u32) -> Rgb {
        let i = (y as usize * self.width as usize + x as usize) * 3;
        Rgb::new(self.pixels[i], self.pixels[i + 1], self.pixels[i + 2])
    }

    /// Decodes an encoded image (any format the `image` crate was built with).
    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let img = image::load_from_memory(bytes)
            .map_err(|e| Error::Render(format!("cannot decode base image: {e}")))?
            .to_rgb8();
        let (w, h) = img.dimensions();
        Self::new(w, h, img.into_raw())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let bytes = std::fs::read(path)?;
        Self::decode(&bytes)
    }

    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<()> {
        image::save_buffer(
            path,
            &self.pixels,
            self.width,
            self.height,
            image::ExtendedColorType::Rgb8,
        )
        .map_err(|e| Error::Render(format!("cannot write PNG: {e}")))
    }
}

/// Overlay layer plus a coverage mask.
struct Layer {
    width: i64,
    height: i64,
    rgb: Vec<u8>,
    mask: Vec<bool>,
}

impl Layer {
    fn new(width: u32, height: u32) -> Self {
        let n = width as usize * height as usize;
        Self {
            width: width as i64,
            height: height as i64,
            rgb: vec![0; n * 3],
            mask: vec![false; n],
        }
    }

    fn put(&mut self, x: i64, y: i64, c: Rgb) {
        if x < 0 || y < 0 || x >= self.width || y >= self.height {
            return;
        }
        let i = (y * self.width + x) as usize;
        self.mask[i] = true;
        self.rgb[i * 3] = c.r;
        self.rgb[i * 3 + 1] = c.g;
        self.rgb[i * 3 + 2] = c.b;
    }

    fn clip_x(&self, lo: f64, hi: f64) -> (i64, i64) {
        (lo.ceil().max(0.0) as i64, hi.floor().min((self.width - 1) as f64) as i64)
    }

    fn clip_y(&self, lo: f64, hi: f64) -> (i64, i64) {
        (lo.ceil().max(0.0) as i64, hi.floor().min((self.height - 1) as f64) as i64)
    }

    fn fill_rect(&mut self, x0: i64, y0: i64, x1: i64, y1: i64, c: Rgb) {
        for y in y0.max(0)..=y1.min(self.height - 1) {
            for x in x0.max(0)..=x1.min(self.width - 1) {
                self.put(x, y, c);
            }
        }
    }

    fn fill_ellipse(&mut self, e: &Ellipse, c: Rgb) {
        let (ex, ey) = e.half_extents();
        let (x0, x1) = self.clip_x(e.cx - ex, e.cx + ex);
        let (y0, y1) = self.clip_y(e.cy - ey, e.cy + ey);
        for y in y0..=y1 {
            for x in x0..=x1 {
                let (rx, ry) = (x as f64 - e.cx, y as f64 - e.cy);
                let u = rx * e.cos + ry * e.sin;
                let v = -rx * e.sin + ry * e.cos;
                if (u / e.a).powi(2) + (v / e.b).powi(2) <= 1.0 {
                    self.put(x, y, c);
                }
            }
        }
        // Markers smaller than a pixel still get their center pixel.
        self.put(e.cx.round() as i64, e.cy.round() as i64, c);
    }

    fn thick_line(&mut self, p: (f64, f64), q: (f64, f64), width: f64, c: Rgb) {
        let hw = (width / 2.0).max(0.5);
        let (x0, x1) = self.clip_x(p.0.min(q.0) - hw, p.0.max(q.0) + hw);
        let (y0, y1) = self.clip_y(p.1.min(q.1) - hw, p.1.max(q.1) + hw);
        let (dx, dy) = (q.0 - p.0, q.1 - p.1);
        let len2 = dx * dx + dy * dy;
        for y in y0..=y1 {
            for x in x0..=x1 {
                let (rx, ry) = (x as f64 - p.0, y as f64 - p.1);
                let t = if len2 > 0.0 {
                    ((rx * dx + ry * dy) / len2).clamp(0.0, 1.0)
                } else {
                    0.0
                };
                let (ox, oy) = (rx - t * dx, ry - t * dy);
                if ox * ox + oy * oy <= hw * hw {
                    self.put(x, y, c);
                }
            }
        }
    }

    fn rect_outline(&mut self, x0: i64, y0: i64, x1: i64, y1: i64, thickness: i64, c: Rgb) {
        let t = thickness - 1;
        self.fill_rect(x0, y0, x1, y0 + t, c);
        self.fill_rect(x0, y1 - t, x1, y1, c);
        self.fill_rect(x0, y0, x0 + t, y1, c);
        self.fill_rect(x1 - t, y0, x1, y1, c);
    }

    fn text(&mut self, x: i64, y: i64, s: &str, c: Rgb) {
        for (k, ch) in s.chars().enumerate() {
            let gx = x + (k * (font::GLYPH_W + 1)) as i64;
            for (row, bits) in font::glyph(ch).iter().enumerate() {
                for col in 0..font::GLYPH_W {
                    if bits & (1 << (font::GLYPH_W - 1 - col)) != 0 {
                        self.put(gx + col as i64, y + row as i64, c);
                    }
                }
            }
        }
    }
}

struct Ellipse {
    cx: f64,
    cy: f64,
    a: f64,
    b: f64,
    cos: f64,
    sin: f64,
}

impl Ellipse {
    /// Half-size of the axis-aligned bounding box.
    fn half_extents(&self) -> (f64, f64) {
        let (a2, b2) = (self.a * self.a, self.b * self.b);
        let (c2, s2) = (self.cos * self.cos, self.sin * self.sin);
        ((a2 * c2 + b2 * s2).sqrt(), (a2 * s2 + b2 * c2).sqrt())
    }
}

fn median(mut v: Vec<f64>) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    Some(if v.len().is_multiple_of(2) { (v[m - 1] + v[m]) / 2.0 } else { v[m] })
}

/// Colors from min-max normalized values; constant inputs give jet(0).
pub fn normalized_colors<T: Scalar>(values: &[T]) -> Vec<Rgb> {
    minmax_scale(values)
        .into_iter()
        .map(|s| jet_color(s.to_f64_lossy() / 255.0))
        .collect()
}

fn draw_legend(layer: &mut Layer) {
    const ROW: i64 = 12;
    const PAD: i64 = 4;
    let text_w = LEGEND.iter().map(|(s, _)| font::text_width(s)).max().unwrap_or(0) as i64;
    let box_w = PAD * 3 + 10 + text_w;
    let box_h = PAD * 2 + ROW * LEGEND.len() as i64;
    let x0 = 8;
    let y0 = layer.height - 8 - box_h;
    layer.fill_rect(x0, y0, x0 + box_w - 1, y0 + box_h - 1, Rgb::new(24, 24, 24));
    for (row, (label, v)) in LEGEND.iter().enumerate() {
        let y = y0 + PAD + row as i64 * ROW;
        layer.fill_rect(x0 + PAD, y + 1, x0 + PAD + 9, y + 8, jet_color(*v));
        layer.text(x0 + PAD * 2 + 10, y + 1, label, Rgb::new(255, 255, 255));
    }
}

/// Draws force-colored markers, link segments, CI outlier boxes and a legend,
/// then alpha-blends the drawing over `base`.
///
/// `points` must be in the same order as `field.net`.
pub fn render_overlay<T: Scalar>(
    base: &PixelBuffer,
    points: &[QueuePoint<T>],
    field: &ForceField<T>,
    ci: &CiFlags<T>,
    spring: &SpringFlags<T>,
    style: &StyleConfig,
) -> Result<PixelBuffer> {
    style.validate()?;
    if points.is_empty() {
        return Ok(base.clone());
    }
    if field.net.len() != points.len()
        || field
            .net
            .iter()
            .zip(points)
            .any(|(n, p)| n.person_id != p.person_id)
    {
        return Err(Error::Render("force field does not match the point list".into()));
    }
    let index: HashMap<u64, usize> = points.iter().enumerate().map(|(i, p)| (p.person_id, i)).collect();
    if let Some(bad) = ci
        .entries
        .iter()
        .map(|e| e.person_id)
        .chain(spring.entries.iter().map(|e| e.person_id))
        .find(|id| !index.contains_key(id))
    {
        return Err(Error::Render(format!("flag refers to unknown person {bad}")));
    }

    let mut layer = Layer::new(base.width, base.height);
    let (dir_x, dir_y) = (field.direction.0.to_f64_lossy(), field.direction.1.to_f64_lossy());
    let norm = dir_x.hypot(dir_y);
    let (cos, sin) = if norm > 0.0 { (dir_x / norm, dir_y / norm) } else { (1.0, 0.0) };

    let link_d = median(field.links.iter().map(|l| l.d.to_f64_lossy()).collect());
    let a = match link_d {
        Some(d) if d > 0.0 => style.ellipse_scale * d,
        _ => (style.ellipse_scale * 0.1 * base.width.min(base.height) as f64).max(2.0),
    };
    let ellipse_at = |p: &QueuePoint<T>| Ellipse {
        cx: p.x.to_f64_lossy(),
        cy: p.y.to_f64_lossy(),
        a,
        b: a / 2.0,
        cos,
        sin,
    };

    let person_colors = normalized_colors(&field.net_magnitudes());
    for (p, c) in points.iter().zip(&person_colors) {
        layer.fill_ellipse(&ellipse_at(p), *c);
    }

    let link_colors = normalized_colors(&crate::springs::per_link_magnitudes(field));
    for (link, c) in field.links.iter().zip(&link_colors) {
        let (p, q) = (&points[link.i], &points[link.i + 1]);
        layer.thick_line(
            (p.x.to_f64_lossy(), p.y.to_f64_lossy()),
            (q.x.to_f64_lossy(), q.y.to_f64_lossy()),
            style.line_width,
            *c,
        );
    }

    for id in ci.outliers() {
        if let Some(&i) = index.get(&id) {
            let e = ellipse_at(&points[i]);
            let (ex, ey) = e.half_extents();
            layer.rect_outline(
                (e.cx - ex - 2.0).floor() as i64,
                (e.cy - ey - 2.0).floor() as i64,
                (e.cx + ex + 2.0).ceil() as i64,
                (e.cy + ey + 2.0).ceil() as i64,
                2,
                style.outlier_box_color,
            );
        }
    }

    draw_legend(&mut layer);

    let alpha = style.overlay_alpha;
    let mut out = base.pixels.clone();
    for (i, covered) in layer.mask.iter().enumerate() {
        if !covered {
            continue;
        }
        for ch in 0..3 {
            let b = out[i * 3 + ch] as f64;
            let o = layer.rgb[i * 3 + ch] as f64;
            out[i * 3 + ch] = (b + alpha * (o - b)).round().clamp(0.0, 255.0) as u8;
        }
    }
    PixelBuffer::new(base.width, base.height, out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ci::{BandMode, CiEntry};
    use crate::linefit::DirectionVector;
    use crate::springs::{chain_forces, SpringParams};
    use crate::threshold::flag_force_outliers;
    use crate::Warnings;

    #[test]
    fn jet_endpoints() {
        assert_eq!(jet_color(0.0), Rgb::new(0, 0, 128));
        assert_eq!(jet_color(1.0), Rgb::new(128, 0, 0));
        assert_eq!(jet_color(0.5), Rgb::new(128, 255, 128));
        assert_eq!(jet_color(-3.0), jet_color(0.0));
        assert_eq!(jet_color(7.0), jet_color(1.0));
    }

    #[test]
    fn jet_hex() {
        assert_eq!(jet_color(0.0).hex(), "#000080");
    }

    fn scene(xy: &[(f64, f64)]) -> (Vec<QueuePoint<f64>>, ForceField<f64>, CiFlags<f64>, SpringFlags<f64>) {
        let points: Vec<_> = xy
            .iter()
            .enumerate()
            .map(|(i, &(x, y))| QueuePoint::new(i as u64, x, y))
            .collect();
        let e_v = if points.len() >= 2 {
            let (f, l) = (points[0], points[points.len() - 1]);
            DirectionVector::new(l.x - f.x, l.y - f.y).unwrap()
        } else {
            DirectionVector::new(1.0, 0.0).unwrap()
        };
        let field = chain_forces(&points, &e_v, &SpringParams::default(), &mut Warnings::new());
        let spring = flag_force_outliers(&field);
        let ci = CiFlags {
            level: 0.95,
            mode: BandMode::Constant,
            entries: vec![],
        };
        (points, field, ci, spring)
    }

    #[test]
    fn no_people_returns_base() {
        let base = PixelBuffer::filled(40, 30, Rgb::new(9, 8, 7));
        let (p, f, c, s) = scene(&[]);
        let out = render_overlay(&base, &p, &f, &c, &s, &StyleConfig::default()).unwrap();
        assert_eq!(out, base);
    }

    #[test]
    fn single_person_is_blue() {
        let base = PixelBuffer::filled(100, 100, Rgb::new(0, 0, 0));
        let (p, f, c, s) = scene(&[(50.0, 30.0)]);
        let style = StyleConfig {
            overlay_alpha: 1.0,
            ..StyleConfig::default()
        };
        let out = render_overlay(&base, &p, &f, &c, &s, &style).unwrap();
        assert_eq!(out.get(50, 30), jet_color(0.0));
        // Nothing drawn away from the marker and legend.
        assert_eq!(out.get(95, 5), Rgb::new(0, 0, 0));
    }

    #[test]
    fn zero_alpha_is_identity() {
        let base = PixelBuffer::filled(120, 80, Rgb::new(200, 100, 50));
        let (p, f, mut c, s) = scene(&[(10.0, 40.0), (60.0, 60.0), (110.0, 40.0)]);
        c.entries.push(CiEntry {
            person_id: 1,
            predicted: 40.0,
            lower: 35.0,
            upper: 45.0,
            is_outlier: true,
        });
        let style = StyleConfig {
            overlay_alpha: 0.0,
            ..StyleConfig::default()
        };
        assert_eq!(render_overlay(&base, &p, &f, &c, &s, &style).unwrap(), base);
    }

    #[test]
    fn outlier_box_is_drawn() {
        let base = PixelBuffer::filled(200, 120, Rgb::new(0, 0, 0));
        let (p, f, mut c, s) = scene(&[(20.0, 40.0), (100.0, 40.0), (180.0, 40.0)]);
        c.entries.push(CiEntry {
            person_id: 1,
            predicted: 40.0,
            lower: 35.0,
            upper: 45.0,
            is_outlier: true,
        });
        let style = StyleConfig {
            overlay_alpha: 1.0,
            ..StyleConfig::default()
        };
        let out = render_overlay(&base, &p, &f, &c, &s, &style).unwrap();
        // a = 0.35 * 80 = 28, so the box's left edge sits at floor(100 - 28 - 2) = 70.
        assert_eq!(out.get(70, 30), Rgb::new(255, 0, 0));
        assert_eq!(out.get(69, 30), Rgb::new(0, 0, 0));
    }

    #[test]
    fn unknown_flag_id_is_an_error() {
        let base = PixelBuffer::filled(50, 50, Rgb::new(0, 0, 0));
        let (p, f, mut c, s) = scene(&[(10.0, 10.0), (40.0, 10.0)]);
        c.entries.push(CiEntry {
            person_id: 99,
            predicted: 0.0,
            lower: 0.0,
            upper: 0.0,
            is_outlier: true,
        });
        assert!(render_overlay(&base, &p, &f, &c, &s, &StyleConfig::default()).is_err());
    }

    #[test]
    fn deterministic() {
        let base = PixelBuffer::filled(160, 90, Rgb::new(30, 60, 90));
        let (p, f, c, s) = scene(&[(10.0, 40.0), (50.0, 65.0), (90.0, 38.0), (150.0, 42.0)]);
        let a = render_overlay(&base, &p, &f, &c, &s, &StyleConfig::default()).unwrap();
        let b = render_overlay(&base, &p, &f, &c, &s, &StyleConfig::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn buffer_length_checked() {
        assert!(PixelBuffer::new(2, 2, vec![0; 11]).is_err());
        assert!(PixelBuffer::decode(b"not an image").is_err());
    }

    #[test]
    fn png_roundtrip() {
        let dir = std::env::temp_dir().join(format!("massimo-png-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("x.png");
        let mut buf = PixelBuffer::filled(7, 5, Rgb::new(1, 2, 3));
        buf.pixels[3] = 250;
        buf.save_png(&path).unwrap();
        assert_eq!(PixelBuffer::load(&path).unwrap(), buf);
        std::fs::remove_dir_all(dir).ok();
    }
}
