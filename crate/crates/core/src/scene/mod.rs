//! Scene composition: object catalog, roles, workspace and the spatial
//! relation predicates used for both placement sampling and evaluation.

mod catalog;
mod relations;

pub use catalog::{procedural_catalog, canonical_size_table, color_name, PALETTE};
pub use relations::{
    classify_pose, relation_region_contains, relation_region_sample, RefGeom, DEFAULT_DELTA,
    ON_TOP_HEIGHT_BAND,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{CameraPose, OrientedBox, Pose, Vec3};

#[derive(Debug, Error, PartialEq)]
pub enum SceneError {
    #[error("query position coincides with the reference origin")]
    ZeroDistance,
    #[error("region sampling exhausted after {0} attempts")]
    RegionSamplingExhausted(usize),
    #[error("relation {relation:?} requires {required} reference(s), got {got}")]
    BadReferenceCount { relation: Relation, required: usize, got: usize },
}

/// One entry of the object catalog. The geometry proxy is a box centered
/// at the origin of the model frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectModel {
    pub id: String,
    pub category: String,
    pub half_extents: Vec3,
    pub color: [f32; 3],
}

impl ObjectModel {
    pub fn proxy(&self) -> OrientedBox {
        OrientedBox::axis_aligned(Vec3::ZERO, self.half_extents)
    }

    /// Full extents along each axis in the canonical frame.
    pub fn canonical_size(&self) -> Vec3 {
        self.half_extents.scale(2.0)
    }

    /// "red box" style descriptor used in instructions.
    pub fn descriptor(&self) -> String {
        format!("{} {}", color_name(self.color), self.category)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Role {
    Movable,
    Reference,
    Irrelevant,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Relation {
    Left,
    Right,
    Front,
    Behind,
    OnTopOf,
    Between,
}

impl Relation {
    pub const ALL: [Relation; 6] = [
        Relation::Left,
        Relation::Right,
        Relation::Front,
        Relation::Behind,
        Relation::OnTopOf,
        Relation::Between,
    ];

    pub fn reference_count(self) -> usize {
        if self == Relation::Between {
            2
        } else {
            1
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Relation::Left => "left",
            Relation::Right => "right",
            Relation::Front => "front",
            Relation::Behind => "behind",
            Relation::OnTopOf => "on-top-of",
            Relation::Between => "between",
        }
    }

    pub fn from_name(s: &str) -> Option<Relation> {
        match s {
            "left" => Some(Relation::Left),
            "right" => Some(Relation::Right),
            "front" => Some(Relation::Front),
            "behind" => Some(Relation::Behind),
            "on-top-of" | "on_top_of" | "ontopof" | "on" => Some(Relation::OnTopOf),
            "between" => Some(Relation::Between),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneObject {
    pub model: ObjectModel,
    pub pose: Pose,
    pub role: Role,
}

impl SceneObject {
    /// Geometry proxy placed at the object's world pose.
    pub fn world_box(&self) -> OrientedBox {
        self.model.proxy().transformed(&self.pose)
    }

    /// Bottom-center support point: world translation with z replaced by
    /// the lowest point of the box. This is what the region predicates
    /// consume, so "on top of" tests the resting face, not the centroid.
    pub fn support_point(&self) -> Vec3 {
        let b = self.world_box();
        Vec3::new(self.pose.translation.x, self.pose.translation.y, b.min_z())
    }
}

/// Axis-aligned table region; the table surface is the plane z = 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Workspace {
    pub half_x: f64,
    pub half_y: f64,
}

impl Workspace {
    pub fn contains_xy(&self, p: Vec3) -> bool {
        p.x.abs() <= self.half_x && p.y.abs() <= self.half_y
    }
}

impl Default for Workspace {
    fn default() -> Self {
        Workspace { half_x: 0.5, half_y: 0.5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub objects: Vec<SceneObject>,
    pub workspace: Workspace,
    pub camera: CameraPose,
}

impl Scene {
    pub fn movable_index(&self) -> Option<usize> {
        self.objects.iter().position(|o| o.role == Role::Movable)
    }

    pub fn reference_indices(&self) -> Vec<usize> {
        self.objects
            .iter()
            .enumerate()
            .filter(|(_, o)| o.role == Role::Reference)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn reference_geoms(&self) -> Vec<RefGeom> {
        self.reference_indices()
            .iter()
            .map(|&i| RefGeom {
                pose: self.objects[i].pose,
                half_extents: self.objects[i].model.half_extents,
            })
            .collect()
    }

    /// Default camera: above the front table edge, looking at the center.
    pub fn default_camera() -> CameraPose {
        CameraPose::look_at(
            Vec3::new(0.0, -1.1, 0.9),
            Vec3::new(0.0, 0.0, 0.1),
            Vec3::new(0.0, 0.0, 1.0),
            128.0,
            crate::geometry::DEFAULT_GRID,
            crate::geometry::DEFAULT_GRID,
        )
    }
}
