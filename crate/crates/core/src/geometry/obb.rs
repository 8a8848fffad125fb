use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{GeometryError, PointCloud, Pose, RotationMatrix, Vec3};

/// Smallest half-extent a degenerate box is widened to.
pub const MIN_HALF_EXTENT: f64 = 1e-4;

/// A box with arbitrary orientation, the geometry proxy for every object.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrientedBox {
    pub center: Vec3,
    pub half_extents: Vec3,
    pub rotation: RotationMatrix,
}

impl OrientedBox {
    pub fn axis_aligned(center: Vec3, half_extents: Vec3) -> Self {
        OrientedBox { center, half_extents, rotation: RotationMatrix::IDENTITY }
    }

    /// The box re-expressed after a rigid transform of its frame.
    pub fn transformed(&self, pose: &Pose) -> OrientedBox {
        OrientedBox {
            center: pose.apply(self.center),
            half_extents: self.half_extents,
            rotation: pose.rotation.compose(&self.rotation),
        }
    }

    pub fn corners(&self) -> [Vec3; 8] {
        let h = self.half_extents;
        let mut out = [Vec3::ZERO; 8];
        for (i, corner) in out.iter_mut().enumerate() {
            let local = Vec3::new(
                if i & 1 == 0 { -h.x } else { h.x },
                if i & 2 == 0 { -h.y } else { h.y },
                if i & 4 == 0 { -h.z } else { h.z },
            );
            *corner = self.center.add(self.rotation.apply(local));
        }
        out
    }

    pub fn min_z(&self) -> f64 {
        self.corners().iter().map(|c| c.z).fold(f64::INFINITY, f64::min)
    }

    pub fn max_z(&self) -> f64 {
        self.corners().iter().map(|c| c.z).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn volume(&self) -> f64 {
        8.0 * self.half_extents.x * self.half_extents.y * self.half_extents.z
    }

    pub fn contains(&self, p: Vec3, slack: f64) -> bool {
        let local = self.rotation.apply_transpose(p.sub(self.center));
        local.x.abs() <= self.half_extents.x + slack
            && local.y.abs() <= self.half_extents.y + slack
            && local.z.abs() <= self.half_extents.z + slack
    }

    /// Draws `n` points on the box surface, faces weighted by area.
    pub fn sample_surface<R: Rng>(&self, n: usize, rng: &mut R) -> Vec<Vec3> {
        let h = self.half_extents;
        let areas = [h.y * h.z, h.y * h.z, h.x * h.z, h.x * h.z, h.x * h.y, h.x * h.y];
        let total: f64 = areas.iter().sum();
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            let mut pick = rng.gen_range(0.0..total);
            let mut face = 0;
            for (i, a) in areas.iter().enumerate() {
                if pick < *a {
                    face = i;
                    break;
                }
                pick -= a;
            }
            let u = rng.gen_range(-1.0..1.0);
            let v = rng.gen_range(-1.0..1.0);
            let local = match face {
                0 => Vec3::new(-h.x, u * h.y, v * h.z),
                1 => Vec3::new(h.x, u * h.y, v * h.z),
                2 => Vec3::new(u * h.x, -h.y, v * h.z),
                3 => Vec3::new(u * h.x, h.y, v * h.z),
                4 => Vec3::new(u * h.x, v * h.y, -h.z),
                _ => Vec3::new(u * h.x, v * h.y, h.z),
            };
            out.push(self.center.add(self.rotation.apply(local)));
        }
        out
    }

    /// Outward face normals in world frame, ordered -x,+x,-y,+y,-z,+z.
    pub fn face_normals(&self) -> [Vec3; 6] {
        let cx = self.rotation.column(0);
        let cy = self.rotation.column(1);
        let cz = self.rotation.column(2);
        [cx.scale(-1.0), cx, cy.scale(-1.0), cy, cz.scale(-1.0), cz]
    }
}

fn aabb_of(points: &[Vec3]) -> (Vec3, Vec3) {
    let mut lo = Vec3::new(f64::INFINITY, f64::INFINITY, f64::INFINITY);
    let mut hi = Vec3::new(f64::NEG_INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
    for p in points {
        lo = Vec3::new(lo.x.min(p.x), lo.y.min(p.y), lo.z.min(p.z));
        hi = Vec3::new(hi.x.max(p.x), hi.y.max(p.y), hi.z.max(p.z));
    }
    (lo, hi)
}

fn coplanarity_spread(points: &[Vec3]) -> f64 {
    // crude rank probe: spread along the smallest AABB axis after removing
    // the centroid is enough to detect the degenerate cases we care about
    let (lo, hi) = aabb_of(points);
    (hi.x - lo.x).min(hi.y - lo.y).min(hi.z - lo.z)
}

/// Fits an oriented box around a cloud by sweeping yaw angles and taking
/// the minimum-volume axis-aligned fit in each rotated frame. Tabletop
/// objects only ever rotate about z, so the sweep is restricted to yaw.
pub fn obb_from_cloud(cloud: &PointCloud) -> Result<OrientedBox, GeometryError> {
    if cloud.is_empty() {
        return Err(GeometryError::EmptyCloud);
    }
    let pts = &cloud.points;

    if pts.len() < 4 || coplanarity_spread(pts) < 1e-9 {
        // degenerate: fall back to a padded axis-aligned box
        let (lo, hi) = aabb_of(pts);
        let center = lo.add(hi).scale(0.5);
        let half = hi.sub(lo).scale(0.5);
        return Ok(OrientedBox::axis_aligned(
            center,
            Vec3::new(
                half.x.max(MIN_HALF_EXTENT),
                half.y.max(MIN_HALF_EXTENT),
                half.z.max(MIN_HALF_EXTENT),
            ),
        ));
    }

    let mut best: Option<OrientedBox> = None;
    let steps = 360; // quarter-degree resolution over [0, 90)
    for k in 0..steps {
        let yaw = (k as f64) * std::f64::consts::FRAC_PI_2 / steps as f64;
        let rot = RotationMatrix::about_z(yaw);
        let local: Vec<Vec3> = pts.iter().map(|p| rot.apply_transpose(*p)).collect();
        let (lo, hi) = aabb_of(&local);
        let half = hi.sub(lo).scale(0.5);
        let half = Vec3::new(
            half.x.max(MIN_HALF_EXTENT),
            half.y.max(MIN_HALF_EXTENT),
            half.z.max(MIN_HALF_EXTENT),
        );
        let center = rot.apply(lo.add(hi).scale(0.5));
        let candidate = OrientedBox { center, half_extents: half, rotation: rot };
        if best.map_or(true, |b| candidate.volume() < b.volume()) {
            best = Some(candidate);
        }
    }
    // widen slightly so containment holds despite rotation round-off
    let mut b = best.unwrap();
    b.half_extents = b.half_extents.add(Vec3::new(1e-9, 1e-9, 1e-9));
    Ok(b)
}
