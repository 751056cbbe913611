//! Mass-spring tension model of a queue.
//!
//! Adjacent people are joined by springs. A link that deviates from the queue
//! direction by angle `theta` is stretched by `d * (1 - cos theta)`, i.e. its
//! rest length is its projection onto the queue direction. Link forces are
//! split into components along and across the queue direction and summed per
//! person with equal and opposite contributions.

use serde::{Deserialize, Serialize};

use crate::ingest::QueuePoint;
use crate::linefit::DirectionVector;
use crate::scalar::Scalar;
use crate::Warnings;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, bound(deserialize = "T: Scalar + Deserialize<'de>"))]
pub struct SpringParams<T> {
    /// Spring constant, force per pixel.
    pub k: T,
}

impl<T: Scalar> Default for SpringParams<T> {
    fn default() -> Self {
        Self { k: T::one() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkGeometry<T> {
    pub d: T,
    /// Angle to the queue direction, in `[0, pi]`.
    pub theta: T,
    pub delta_d: T,
    /// Unit vector of the link's component perpendicular to the queue
    /// direction, zero when the link is parallel to it.
    pub across: (T, T),
}

impl<T: Scalar> LinkGeometry<T> {
    pub fn is_coincident(&self) -> bool {
        self.d == T::zero()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpringLink<T> {
    /// Index of the first person of the pair within the ordered queue.
    pub i: usize,
    pub d: T,
    pub theta: T,
    pub delta_d: T,
    pub f_parallel: T,
    pub f_perp: T,
    pub magnitude: T,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NetForce<T> {
    pub person_id: u64,
    pub fx: T,
    pub fy: T,
    pub magnitude: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForceField<T> {
    pub k: T,
    /// Unit queue direction the forces were resolved against.
    pub direction: (T, T),
    pub links: Vec<SpringLink<T>>,
    pub net: Vec<NetForce<T>>,
}

impl<T: Scalar> ForceField<T> {
    pub fn net_magnitudes(&self) -> Vec<T> {
        self.net.iter().map(|n| n.magnitude).collect()
    }
}

/// Distance, angle to the queue direction, and deformation of one link.
///
/// The angle comes from `atan2(|cross|, dot)`, which equals the arccos of the
/// clamped cosine but stays accurate near 0 and pi. Coincident points give an
/// all-zero geometry.
pub fn link_geometry<T: Scalar>(
    p: &QueuePoint<T>,
    next: &QueuePoint<T>,
    e_v: &DirectionVector<T>,
) -> LinkGeometry<T> {
    let zero = T::zero();
    let (dx, dy) = (next.x - p.x, next.y - p.y);
    let d = dx.hypot(dy);
    if d == zero {
        return LinkGeometry {
            d: zero,
            theta: zero,
            delta_d: zero,
            across: (zero, zero),
        };
    }
    let (ux, uy) = e_v.unit();
    let along = dx * ux + dy * uy;
    let cross = dx * uy - dy * ux;
    let theta = cross.abs().atan2(along);
    let half_sin = (theta / T::of(2.0)).sin();
    // 1 - cos(theta) = 2 sin^2(theta / 2), without cancellation.
    let delta_d = d * T::of(2.0) * half_sin * half_sin;

    let (px, py) = (dx - along * ux, dy - along * uy);
    let pn = px.hypot(py);
    let across = if pn > zero { (px / pn, py / pn) } else { (zero, zero) };
    LinkGeometry {
        d,
        theta,
        delta_d,
        across,
    }
}

/// Hooke force of a link: magnitude `k * delta_d` and its components along
/// and across the queue direction.
pub fn link_force<T: Scalar>(i: usize, geometry: &LinkGeometry<T>, params: &SpringParams<T>) -> SpringLink<T> {
    let magnitude = params.k * geometry.delta_d;
    SpringLink {
        i,
        d: geometry.d,
        theta: geometry.theta,
        delta_d: geometry.delta_d,
        f_parallel: magnitude * geometry.theta.cos(),
        f_perp: magnitude * geometry.theta.sin(),
        magnitude,
    }
}

/// Accumulates link forces into per-person net force vectors.
///
/// For the link `i -> i+1` the force on person `i` is
/// `f_parallel * u + f_perp * w`, where `u` is the unit queue direction and
/// `w` the unit perpendicular part of the link. With a left-to-right queue
/// this puts a positive vertical component on `i` when `i+1` is lower in the
/// image. Person `i+1` receives the negation.
pub fn chain_forces<T: Scalar>(
    points: &[QueuePoint<T>],
    e_v: &DirectionVector<T>,
    params: &SpringParams<T>,
    warnings: &mut Warnings,
) -> ForceField<T> {
    let zero = T::zero();
    let mut acc = vec![(zero, zero); points.len()];
    let mut links = Vec::with_capacity(points.len().saturating_sub(1));
    let (ux, uy) = e_v.unit();

    for (i, pair) in points.windows(2).enumerate() {
        let geometry = link_geometry(&pair[0], &pair[1], e_v);
        if geometry.is_coincident() {
            warnings.push(format!(
                "persons {} and {} coincide; link force set to zero",
                pair[0].person_id, pair[1].person_id
            ));
        }
        let link = link_force(i, &geometry, params);
        let (wx, wy) = geometry.across;
        let fx = link.f_parallel * ux + link.f_perp * wx;
        let fy = link.f_parallel * uy + link.f_perp * wy;
        acc[i].0 += fx;
        acc[i].1 += fy;
        acc[i + 1].0 -= fx;
        acc[i + 1].1 -= fy;
        links.push(link);
    }

    let net = points
        .iter()
        .zip(acc)
        .map(|(p, (fx, fy))| NetForce {
            person_id: p.person_id,
            fx,
            fy,
            magnitude: fx.hypot(fy),
        })
        .collect();

    ForceField {
        k: params.k,
        direction: (ux, uy),
        links,
        net,
    }
}

/// Per-link force magnitudes in queue order.
pub fn per_link_magnitudes<T: Scalar>(field: &ForceField<T>) -> Vec<T> {
    field.links.iter().map(|l| l.magnitude).collect()
}
