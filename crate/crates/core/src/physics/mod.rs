//! Desk-scale stand-in for a physics engine: quasi-static settling,
//! separating-axis collision, support-polygon stability and displacement
//! checks. Together these define physical validity of a placement.

mod polygon;

pub use polygon::{area, contains_point, convex_hull, intersect_convex, shrink, P2};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{OrientedBox, Vec3};
use crate::scene::Scene;

/// Penetration below this is treated as contact noise, not a collision.
pub const COLLISION_TOLERANCE: f64 = 1e-4;

/// Non-movable objects moving farther than this count as displaced.
pub const DISPLACEMENT_THRESHOLD: f64 = 5e-3;

/// Support polygons are shrunk by this margin before the COM test.
pub const STABILITY_MARGIN: f64 = 2e-3;

#[derive(Debug, Error, PartialEq)]
pub enum PhysicsError {
    #[error("scenes do not contain the same object lists")]
    SceneMismatch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidityReport {
    pub collision_free: bool,
    pub colliding_pairs: Vec<(usize, usize, f64)>,
    pub stable: bool,
    pub unstable_objects: Vec<usize>,
    pub displaced: bool,
    pub displaced_objects: Vec<(usize, f64)>,
}

impl ValidityReport {
    pub fn passes(&self) -> bool {
        self.collision_free && self.stable && !self.displaced
    }
}

/// Penetration depth of two oriented boxes, `None` when separated.
/// Standard 15-axis SAT: the face normals of both boxes plus the nine
/// edge-edge cross products.
pub fn obb_penetration(a: &OrientedBox, b: &OrientedBox) -> Option<f64> {
    let axes_a = [a.rotation.column(0), a.rotation.column(1), a.rotation.column(2)];
    let axes_b = [b.rotation.column(0), b.rotation.column(1), b.rotation.column(2)];
    let d = b.center.sub(a.center);
    let ha = [a.half_extents.x, a.half_extents.y, a.half_extents.z];
    let hb = [b.half_extents.x, b.half_extents.y, b.half_extents.z];

    let mut min_overlap = f64::INFINITY;
    let mut test = |axis: Vec3| -> bool {
        let len = axis.norm();
        if len < 1e-9 {
            return true; // parallel edges, degenerate axis
        }
        let l = axis.scale(1.0 / len);
        let ra: f64 = (0..3).map(|i| ha[i] * axes_a[i].dot(l).abs()).sum();
        let rb: f64 = (0..3).map(|i| hb[i] * axes_b[i].dot(l).abs()).sum();
        let overlap = ra + rb - d.dot(l).abs();
        if overlap <= 0.0 {
            return false;
        }
        min_overlap = min_overlap.min(overlap);
        true
    };

    for ax in axes_a {
        if !test(ax) {
            return None;
        }
    }
    for bx in axes_b {
        if !test(bx) {
            return None;
        }
    }
    for ax in axes_a {
        for bx in axes_b {
            if !test(ax.cross(bx)) {
                return None;
            }
        }
    }
    Some(min_overlap)
}

pub fn footprint(b: &OrientedBox) -> Vec<P2> {
    convex_hull(&b.corners().map(|c| P2::new(c.x, c.y)))
}

pub fn footprints_overlap(a: &[P2], b: &[P2]) -> bool {
    area(&intersect_convex(a, b)) > 1e-10
}

/// Drops object `index` straight down until its lowest point rests on the
/// table or on the highest supporting object below it. Only objects in
/// `support` are considered as supporters. Rotation is unchanged.
fn drop_object(scene: &mut Scene, index: usize, support: &[usize]) {
    let obj_box = scene.objects[index].world_box();
    let bottom = obj_box.min_z();
    let foot = footprint(&obj_box);
    let mut rest = 0.0f64;
    for &j in support {
        if j == index {
            continue;
        }
        let other = scene.objects[j].world_box();
        let top = other.max_z();
        if top <= bottom + 1e-9 && footprints_overlap(&foot, &footprint(&other)) {
            rest = rest.max(top);
        }
    }
    let dz = rest - bottom;
    // ignore round-off so settling a resting object is a bit-exact no-op
    if dz.abs() > 1e-12 {
        scene.objects[index].pose.translation.z += dz;
    }
}

/// Quasi-static settle of the whole scene in list order: each object
/// drops onto the table or onto objects earlier in the list.
pub fn settle(scene: &Scene) -> Scene {
    let mut out = scene.clone();
    for i in 0..out.objects.len() {
        let supporters: Vec<usize> = (0..i).collect();
        drop_object(&mut out, i, &supporters);
    }
    out
}

/// Settles a single object against every other object in the scene,
/// leaving the rest untouched. Used when re-placing the movable object.
pub fn settle_object(scene: &Scene, index: usize) -> Scene {
    let mut out = scene.clone();
    let supporters: Vec<usize> = (0..out.objects.len()).filter(|&j| j != index).collect();
    drop_object(&mut out, index, &supporters);
    out
}

/// All-pairs SAT collision check; table contact is not a collision.
pub fn collision_check(scene: &Scene, tolerance: f64) -> (bool, Vec<(usize, usize, f64)>) {
    let boxes: Vec<OrientedBox> = scene.objects.iter().map(|o| o.world_box()).collect();
    let mut pairs = Vec::new();
    for i in 0..boxes.len() {
        for j in (i + 1)..boxes.len() {
            if let Some(pen) = obb_penetration(&boxes[i], &boxes[j]) {
                if pen > tolerance {
                    pairs.push((i, j, pen));
                }
            }
        }
    }
    (pairs.is_empty(), pairs)
}

/// Static stability of a settled scene: each object's center of mass must
/// project inside the convex hull of its support contacts, shrunk by the
/// stability margin. Objects with no contacts are unstable.
pub fn stability_check(scene: &Scene) -> (bool, Vec<usize>) {
    let boxes: Vec<OrientedBox> = scene.objects.iter().map(|o| o.world_box()).collect();
    let feet: Vec<Vec<P2>> = boxes.iter().map(footprint).collect();
    let mut unstable = Vec::new();
    for i in 0..boxes.len() {
        let bottom = boxes[i].min_z();
        let mut contact_points: Vec<P2> = Vec::new();
        if bottom.abs() <= 1e-6 {
            contact_points.extend(feet[i].iter().copied());
        }
        for j in 0..boxes.len() {
            if j == i {
                continue;
            }
            if (boxes[j].max_z() - bottom).abs() <= 1e-6 {
                let inter = intersect_convex(&feet[i], &feet[j]);
                contact_points.extend(inter);
            }
        }
        let support = shrink(&convex_hull(&contact_points), STABILITY_MARGIN);
        let com = P2::new(boxes[i].center.x, boxes[i].center.y);
        if !contains_point(&support, com) {
            unstable.push(i);
        }
    }
    (unstable.is_empty(), unstable)
}

/// Reports non-movable objects whose translation moved between scenes.
pub fn displacement_check(
    before: &Scene,
    after: &Scene,
    movable_index: usize,
    threshold: f64,
) -> Result<(bool, Vec<(usize, f64)>), PhysicsError> {
    if before.objects.len() != after.objects.len()
        || before
            .objects
            .iter()
            .zip(&after.objects)
            .any(|(a, b)| a.model.id != b.model.id)
    {
        return Err(PhysicsError::SceneMismatch);
    }
    let mut displaced = Vec::new();
    for i in 0..before.objects.len() {
        if i == movable_index {
            continue;
        }
        let d = after.objects[i]
            .pose
            .translation
            .sub(before.objects[i].pose.translation)
            .norm();
        if d > threshold {
            displaced.push((i, d));
        }
    }
    Ok((!displaced.is_empty(), displaced))
}

/// The physical-realism oracle: collision and stability on the goal
/// scene, displacement of everything except the movable object between
/// the pre-placement and goal scenes.
pub fn validate_placement(
    goal: &Scene,
    pre: &Scene,
    movable_index: usize,
) -> Result<ValidityReport, PhysicsError> {
    let (collision_free, colliding_pairs) = collision_check(goal, COLLISION_TOLERANCE);
    let (stable, unstable_objects) = stability_check(goal);
    let (displaced, displaced_objects) =
        displacement_check(pre, goal, movable_index, DISPLACEMENT_THRESHOLD)?;
    Ok(ValidityReport {
        collision_free,
        colliding_pairs,
        stable,
        unstable_objects,
        displaced,
        displaced_objects,
    })
}
