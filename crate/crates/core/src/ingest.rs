//! Keypoint file parsing, hip midpoint extraction and queue ordering.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::Warnings;

/// Number of keypoints in the COCO body skeleton.
pub const COCO_KEYPOINTS: usize = 17;
pub const LEFT_HIP: usize = 11;
pub const RIGHT_HIP: usize = 12;

/// Default minimum detector confidence for a hip keypoint to count.
pub const DEFAULT_CONF_THRESHOLD: f64 = 0.5;

/// One detected landmark in image pixel coordinates (origin top-left).
///
/// `(0, 0)` is the detector's "not found" sentinel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Keypoint {
    pub x: f64,
    pub y: f64,
    pub confidence: f64,
}

impl Keypoint {
    pub fn new(x: f64, y: f64, confidence: f64) -> Self {
        Self { x, y, confidence }
    }

    pub fn is_undetected(&self) -> bool {
        self.x == 0.0 && self.y == 0.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PersonPose {
    pub id: u64,
    /// Exactly [`COCO_KEYPOINTS`] entries in COCO order.
    pub keypoints: Vec<Keypoint>,
}

/// All people detected in a single image.
#[derive(Debug, Clone, PartialEq)]
pub struct PoseFrame {
    pub image_path: String,
    pub width: u32,
    pub height: u32,
    pub people: Vec<PersonPose>,
}

/// A person's anchor point on the queue (their hip midpoint).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QueuePoint<T> {
    pub person_id: u64,
    pub x: T,
    pub y: T,
}

impl<T: Scalar> QueuePoint<T> {
    pub fn new(person_id: u64, x: T, y: T) -> Self {
        Self { person_id, x, y }
    }

    /// Same point with x and y exchanged.
    pub fn swapped(&self) -> Self {
        Self::new(self.person_id, self.y, self.x)
    }
}

// Wire format.

#[derive(Serialize, Deserialize)]
struct WireFrame {
    image: WireImage,
    people: Vec<WirePerson>,
}

#[derive(Serialize, Deserialize)]
struct WireImage {
    path: String,
    width: u32,
    height: u32,
}

#[derive(Serialize, Deserialize)]
struct WirePerson {
    id: u64,
    keypoints: Vec<Vec<f64>>,
}

fn byte_offset(bytes: &[u8], line: usize, column: usize) -> usize {
    if line == 0 {
        return 0;
    }
    let mut offset = 0;
    for (idx, l) in bytes.split(|&b| b == b'\n').enumerate() {
        if idx + 1 == line {
            return (offset + column.saturating_sub(1)).min(bytes.len());
        }
        offset += l.len() + 1;
    }
    bytes.len()
}

/// Parses a keypoint JSON document.
///
/// Coordinates of confident keypoints that fall outside the image are clamped
/// into it and reported through `warnings`.
pub fn parse_keypoint_file(bytes: &[u8], warnings: &mut Warnings) -> Result<PoseFrame> {
    let wire: WireFrame = serde_json::from_slice(bytes).map_err(|e| {
        let offset = byte_offset(bytes, e.line(), e.column());
        if e.is_data() {
            Error::Schema(e.to_string())
        } else {
            Error::Parse {
                offset,
                message: e.to_string(),
            }
        }
    })?;

    let WireImage {
        path,
        width,
        height,
    } = wire.image;
    if width == 0 || height == 0 {
        return Err(Error::Schema(format!(
            "image dimensions must be positive, got {width}x{height}"
        )));
    }

    let mut people = Vec::with_capacity(wire.people.len());
    let mut seen = std::collections::HashSet::new();
    for person in wire.people {
        if !seen.insert(person.id) {
            return Err(Error::Schema(format!("duplicate person id {}", person.id)));
        }
        if person.keypoints.len() != COCO_KEYPOINTS {
            return Err(Error::Schema(format!(
                "person {}: expected {COCO_KEYPOINTS} keypoints, found {}",
                person.id,
                person.keypoints.len()
            )));
        }
        let mut keypoints = Vec::with_capacity(COCO_KEYPOINTS);
        for (k, triple) in person.keypoints.iter().enumerate() {
            let &[x, y, confidence] = triple.as_slice() else {
                return Err(Error::Schema(format!(
                    "person {}: keypoint {k} must be [x, y, conf]",
                    person.id
                )));
            };
            if !(0.0..=1.0).contains(&confidence) {
                return Err(Error::Schema(format!(
                    "person {}: keypoint {k} confidence {confidence} outside [0, 1]",
                    person.id
                )));
            }
            let mut kp = Keypoint::new(x, y, confidence);
            if confidence > 0.0 {
                let cx = x.clamp(0.0, width as f64);
                let cy = y.clamp(0.0, height as f64);
                if cx != x || cy != y {
                    warnings.push(format!(
                        "person {}: keypoint {k} ({x}, {y}) clamped into image",
                        person.id
                    ));
                    kp.x = cx;
                    kp.y = cy;
                }
            }
            keypoints.push(kp);
        }
        people.push(PersonPose {
            id: person.id,
            keypoints,
        });
    }

    Ok(PoseFrame {
        image_path: path,
        width,
        height,
        people,
    })
}

/// Serializes a frame in the keypoint JSON format.
pub fn to_keypoint_json(frame: &PoseFrame) -> String {
    let wire = WireFrame {
        image: WireImage {
            path: frame.image_path.clone(),
            width: frame.width,
            height: frame.height,
        },
        people: frame
            .people
            .iter()
            .map(|p| WirePerson {
                id: p.id,
                keypoints: p
                    .keypoints
                    .iter()
                    .map(|k| vec![k.x, k.y, k.confidence])
                    .collect(),
            })
            .collect(),
    };
    serde_json::to_string(&wire).expect("keypoint frame serializes")
}

/// Extracts one anchor point per person from the hip keypoints.
///
/// Both hips valid: their midpoint. One hip valid: that hip. Neither: the
/// person is skipped with a warning.
pub fn hip_midpoints(
    frame: &PoseFrame,
    conf_threshold: f64,
    warnings: &mut Warnings,
) -> Vec<QueuePoint<f64>> {
    let valid = |k: &Keypoint| k.confidence >= conf_threshold && !k.is_undetected();
    let mut out = Vec::with_capacity(frame.people.len());
    for person in &frame.people {
        let left = person.keypoints[LEFT_HIP];
        let right = person.keypoints[RIGHT_HIP];
        match (valid(&left), valid(&right)) {
            (true, true) => out.push(QueuePoint::new(
                person.id,
                (left.x + right.x) / 2.0,
                (left.y + right.y) / 2.0,
            )),
            (true, false) | (false, true) => {
                let hip = if valid(&left) { left } else { right };
                warnings.push(format!("person {}: single-hip fallback", person.id));
                out.push(QueuePoint::new(person.id, hip.x, hip.y));
            }
            (false, false) => {
                warnings.push(format!("person {}: no valid hip keypoints, omitted", person.id));
            }
        }
    }
    out
}

fn canonical_cmp<T: Scalar>(a: &QueuePoint<T>, b: &QueuePoint<T>) -> Ordering {
    a.x.partial_cmp(&b.x)
        .unwrap_or(Ordering::Equal)
        .then(a.y.partial_cmp(&b.y).unwrap_or(Ordering::Equal))
        .then(a.person_id.cmp(&b.person_id))
}

/// Unit vector along the dominant axis of the point cloud.
///
/// The sign is fixed so the larger component is positive (x wins ties), which
/// orders horizontal queues left to right and vertical ones top to bottom.
pub fn principal_axis<T: Scalar>(points: &[QueuePoint<T>]) -> (T, T) {
    let zero = T::zero();
    if points.len() < 2 {
        return (T::one(), zero);
    }
    // Sum in a canonical order so the axis depends only on the point set.
    let mut sorted: Vec<QueuePoint<T>> = points.to_vec();
    sorted.sort_by(canonical_cmp);

    let n = T::of_usize(sorted.len());
    let mx = sorted.iter().map(|p| p.x).sum::<T>() / n;
    let my = sorted.iter().map(|p| p.y).sum::<T>() / n;
    let (mut a, mut b, mut c) = (zero, zero, zero);
    for p in &sorted {
        let dx = p.x - mx;
        let dy = p.y - my;
        a += dx * dx;
        b += dx * dy;
        c += dy * dy;
    }
    if b == zero {
        return if a >= c { (T::one(), zero) } else { (zero, T::one()) };
    }
    let half = T::of(0.5);
    let lambda = (a + c) * half + ((a - c) * half).hypot(b);
    // Two equivalent eigenvector forms; take the better conditioned one.
    let v1 = (lambda - c, b);
    let v2 = (b, lambda - a);
    let (vx, vy) = if v1.0.hypot(v1.1) >= v2.0.hypot(v2.1) { v1 } else { v2 };
    let norm = vx.hypot(vy);
    if norm == zero || !norm.is_finite() {
        return (T::one(), zero);
    }
    let (mut ux, mut uy) = (vx / norm, vy / norm);
    let flip = if ux.abs() >= uy.abs() { ux < zero } else { uy < zero };
    if flip {
        ux = -ux;
        uy = -uy;
    }
    (ux, uy)
}

/// Orders people along the queue by projection onto the principal axis.
///
/// Exact ties fall back to ascending y, then person id.
pub fn order_queue<T: Scalar>(points: &[QueuePoint<T>]) -> Vec<QueuePoint<T>> {
    let (ux, uy) = principal_axis(points);
    let mut keyed: Vec<(T, QueuePoint<T>)> =
        points.iter().map(|p| (p.x * ux + p.y * uy, *p)).collect();
    keyed.sort_by(|(ka, a), (kb, b)| {
        ka.partial_cmp(kb)
            .unwrap_or(Ordering::Equal)
            .then(a.y.partial_cmp(&b.y).unwrap_or(Ordering::Equal))
            .then(a.person_id.cmp(&b.person_id))
    });
    keyed.into_iter().map(|(_, p)| p).collect()
}
