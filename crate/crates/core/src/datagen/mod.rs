//! The data pipeline: catalog preprocessing, seeded instance generation
//! (initial scene, goal scene, instruction), and dataset serialization.

mod instructions;
mod io;

pub use instructions::{generate_instruction, parse_instruction, ParsedInstruction};
pub use io::{read_dataset, write_dataset, DatasetManifest};

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::spcd::SpcdError;
use crate::geometry::{partial_view, PointCloud, Pose, RotationMatrix, Vec3};
use crate::physics::{obb_penetration, settle, settle_object, validate_placement};
use crate::scene::{
    classify_pose, relation_region_sample, ObjectModel, RefGeom, Relation, Role, Scene,
    SceneError, SceneObject, Workspace, DEFAULT_DELTA,
};
use crate::rng::derive_rng;

#[derive(Debug, Error)]
pub enum DatagenError {
    #[error("category {0:?} missing from the size table")]
    UnknownCategory(String),
    #[error("instance generation exhausted after {retries} retries (index {index})")]
    GenerationExhausted { index: u64, retries: usize },
    #[error("template bank is empty")]
    EmptyTemplateBank,
    #[error("bad role assignment: {0}")]
    BadRoles(String),
    #[error("cannot parse instruction: {0:?}")]
    UnparseableInstruction(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("format error: {0}")]
    Format(String),
    #[error("point cloud format error: {0}")]
    Spcd(#[from] SpcdError),
}

/// One training/eval sample: scenes before and after the placement, the
/// relation and roles behind it, the instruction, and per-object
/// partial-view clouds captured from the initial scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub id: String,
    pub initial_scene: Scene,
    pub goal_scene: Scene,
    pub relation: Relation,
    pub movable_index: usize,
    pub reference_indices: Vec<usize>,
    pub instruction: String,
    pub clouds: Vec<PointCloud>,
}

impl Instance {
    pub fn descriptors(&self) -> Vec<String> {
        self.initial_scene
            .objects
            .iter()
            .map(|o| o.model.descriptor())
            .collect()
    }
}

/// A raw (unprocessed) model: possibly off-center, possibly unrealistic
/// size. The mesh-import hook produces these.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawObjectModel {
    pub id: String,
    pub category: String,
    pub center: Vec3,
    pub half_extents: Vec3,
    pub color: [f32; 3],
}

/// Scales each raw model so its largest extent matches the category's
/// canonical size and recenters the proxy at the origin.
pub fn preprocess_catalog(
    raw: &[RawObjectModel],
    size_table: &[(String, f64)],
) -> Result<Vec<ObjectModel>, DatagenError> {
    raw.iter()
        .map(|r| {
            let size = size_table
                .iter()
                .find(|(c, _)| *c == r.category)
                .map(|(_, s)| *s)
                .ok_or_else(|| DatagenError::UnknownCategory(r.category.clone()))?;
            let longest = 2.0 * r.half_extents.x.max(r.half_extents.y).max(r.half_extents.z);
            let scale = size / longest;
            Ok(ObjectModel {
                id: r.id.clone(),
                category: r.category.clone(),
                half_extents: r.half_extents.scale(scale),
                color: r.color,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenConfig {
    pub n_objects_min: usize,
    pub n_objects_max: usize,
    pub partial_view_samples: usize,
    pub delta: f64,
    pub radial_range: (f64, f64),
    pub workspace: Workspace,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            n_objects_min: 3,
            n_objects_max: 5,
            partial_view_samples: 1024,
            delta: DEFAULT_DELTA,
            radial_range: (0.08, 0.35),
            workspace: Workspace::default(),
        }
    }
}

const INSTANCE_RETRIES: usize = 100;
const PLACEMENT_ATTEMPTS: usize = 100;
/// Clearance enforced between objects at initial placement.
const PLACEMENT_MARGIN: f64 = 0.005;

fn quantize_f32(cloud: &mut PointCloud) {
    // clouds persist as float32; quantizing now keeps the in-memory
    // instance bit-identical with its on-disk round trip
    for p in &mut cloud.points {
        p.x = p.x as f32 as f64;
        p.y = p.y as f32 as f64;
        p.z = p.z as f32 as f64;
    }
}

fn inflated(o: &SceneObject, margin: f64) -> crate::geometry::OrientedBox {
    let mut b = o.world_box();
    b.half_extents = b.half_extents.add(Vec3::new(margin, margin, margin));
    b
}

fn place_initial_scene(
    models: &[&ObjectModel],
    roles: &[Role],
    cfg: &GenConfig,
    rng: &mut ChaCha12Rng,
) -> Option<Scene> {
    let mut objects: Vec<SceneObject> = Vec::with_capacity(models.len());
    for (model, &role) in models.iter().zip(roles) {
        let h = model.half_extents;
        let footprint = (h.x * h.x + h.y * h.y).sqrt();
        let mut placed = false;
        for _ in 0..PLACEMENT_ATTEMPTS {
            let x = rng.gen_range(-(cfg.workspace.half_x - footprint)..(cfg.workspace.half_x - footprint));
            let y = rng.gen_range(-(cfg.workspace.half_y - footprint)..(cfg.workspace.half_y - footprint));
            let yaw = rng.gen_range(0.0..std::f64::consts::TAU);
            let candidate = SceneObject {
                model: (*model).clone(),
                pose: Pose::new(Vec3::new(x, y, h.z), RotationMatrix::about_z(yaw)),
                role,
            };
            let cbox = inflated(&candidate, PLACEMENT_MARGIN);
            if objects.iter().all(|o| obb_penetration(&cbox, &o.world_box()).is_none()) {
                objects.push(candidate);
                placed = true;
                break;
            }
        }
        if !placed {
            return None;
        }
    }
    Some(Scene { objects, workspace: cfg.workspace, camera: Scene::default_camera() })
}

fn capture_clouds(scene: &Scene, cfg: &GenConfig, rng: &mut ChaCha12Rng) -> Option<Vec<PointCloud>> {
    let mut clouds = Vec::with_capacity(scene.objects.len());
    for obj in &scene.objects {
        let seed: u64 = rng.gen();
        let mut cloud = partial_view(
            &obj.model.proxy(),
            &obj.pose,
            &scene.camera,
            cfg.partial_view_samples,
            seed,
        )
        .ok()?;
        cloud.colors = Some(vec![obj.model.color; cloud.len()]);
        quantize_f32(&mut cloud);
        clouds.push(cloud);
    }
    Some(clouds)
}

fn try_goal_scene(
    initial: &Scene,
    relation: Relation,
    movable_index: usize,
    cfg: &GenConfig,
    rng: &mut ChaCha12Rng,
) -> Option<Scene> {
    let refs: Vec<RefGeom> = initial
        .reference_indices()
        .iter()
        .map(|&i| RefGeom {
            pose: initial.objects[i].pose,
            half_extents: initial.objects[i].model.half_extents,
        })
        .collect();
    let h = initial.objects[movable_index].model.half_extents;

    for _ in 0..PLACEMENT_ATTEMPTS {
        let support = match relation_region_sample(relation, &refs, cfg.delta, cfg.radial_range, rng)
        {
            Ok(p) => p,
            Err(SceneError::RegionSamplingExhausted(_)) => return None,
            Err(_) => return None,
        };
        if !cfg.workspace.contains_xy(support) {
            continue;
        }
        let yaw = rng.gen_range(0.0..std::f64::consts::TAU);
        let mut goal = initial.clone();
        goal.objects[movable_index].pose =
            Pose::new(Vec3::new(support.x, support.y, support.z + h.z), RotationMatrix::about_z(yaw));
        let goal = settle_object(&goal, movable_index);

        let report = match validate_placement(&goal, initial, movable_index) {
            Ok(r) => r,
            Err(_) => continue,
        };
        if !report.passes() {
            continue;
        }
        let satisfied = classify_pose(
            &goal.reference_geoms(),
            goal.objects[movable_index].support_point(),
            cfg.delta,
        );
        if satisfied.contains(&relation) {
            return Some(goal);
        }
    }
    None
}

/// Generates one instance, fully determined by `(master_seed, index)`.
pub fn generate_instance(
    catalog: &[ObjectModel],
    relation: Relation,
    cfg: &GenConfig,
    master_seed: u64,
    index: u64,
) -> Result<Instance, DatagenError> {
    let mut rng = derive_rng(master_seed, "instance", index);
    let n_refs = relation.reference_count();

    for _retry in 0..INSTANCE_RETRIES {
        // always at least one irrelevant object alongside movable + references
        let lo = cfg.n_objects_min.max(2 + n_refs);
        let hi = cfg.n_objects_max.max(lo);
        let n_objects = rng.gen_range(lo..=hi);

        // models with pairwise-distinct descriptors so parsing is exact
        let mut order: Vec<usize> = (0..catalog.len()).collect();
        order.shuffle(&mut rng);
        let mut picked: Vec<&ObjectModel> = Vec::new();
        let mut used: Vec<String> = Vec::new();
        for i in order {
            let d = catalog[i].descriptor();
            if !used.contains(&d) {
                used.push(d);
                picked.push(&catalog[i]);
                if picked.len() == n_objects {
                    break;
                }
            }
        }
        if picked.len() < n_objects {
            continue;
        }

        let mut roles = vec![Role::Movable];
        roles.extend(std::iter::repeat(Role::Reference).take(n_refs));
        roles.extend(std::iter::repeat(Role::Irrelevant).take(n_objects - 1 - n_refs));
        roles.shuffle(&mut rng);

        let Some(scene) = place_initial_scene(&picked, &roles, cfg, &mut rng) else {
            continue;
        };
        let initial = settle(&scene);
        let Some(clouds) = capture_clouds(&initial, cfg, &mut rng) else {
            continue;
        };

        let movable_index = initial.movable_index().expect("one movable role");
        let reference_indices = initial.reference_indices();
        let Some(goal) = try_goal_scene(&initial, relation, movable_index, cfg, &mut rng) else {
            continue;
        };

        let movable_desc = initial.objects[movable_index].model.descriptor();
        let ref_descs: Vec<String> = reference_indices
            .iter()
            .map(|&i| initial.objects[i].model.descriptor())
            .collect();
        let ref_desc_refs: Vec<&str> = ref_descs.iter().map(String::as_str).collect();
        let instruction = generate_instruction(relation, &movable_desc, &ref_desc_refs, &mut rng)?;

        return Ok(Instance {
            id: format!("{index:06}"),
            initial_scene: initial,
            goal_scene: goal,
            relation,
            movable_index,
            reference_indices,
            instruction,
            clouds,
        });
    }
    Err(DatagenError::GenerationExhausted { index, retries: INSTANCE_RETRIES })
}

/// Relation assigned to each index: round-robin when balanced (counts
/// differ by at most one), otherwise an independent seeded draw.
pub fn relation_for_index(
    relations: &[Relation],
    balanced: bool,
    master_seed: u64,
    index: u64,
) -> Relation {
    if balanced {
        relations[(index as usize) % relations.len()]
    } else {
        let mut rng = derive_rng(master_seed, "relation-pick", index);
        relations[rng.gen_range(0..relations.len())]
    }
}

/// Generates `count` instances in parallel. Each index derives its own
/// rng stream, so the result is independent of thread count.
pub fn generate_dataset(
    catalog: &[ObjectModel],
    relations: &[Relation],
    count: u64,
    balanced: bool,
    cfg: &GenConfig,
    master_seed: u64,
) -> Result<Vec<Instance>, DatagenError> {
    (0..count)
        .into_par_iter()
        .map(|i| {
            let relation = relation_for_index(relations, balanced, master_seed, i);
            generate_instance(catalog, relation, cfg, master_seed, i)
        })
        .collect()
}
