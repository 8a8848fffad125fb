use super::{CameraPose, GeometryError, OrientedBox, PointCloud, Pose, Vec3};
use crate::rng::derive_rng;

/// Pixel grid used for visibility unless the camera says otherwise.
pub const DEFAULT_GRID: u32 = 128;

/// Depth slack when comparing a sample against the z-buffer. Samples on a
/// slanted face that share a pixel differ slightly in depth; this keeps
/// them from culling each other.
const DEPTH_TOLERANCE: f64 = 1e-6;

fn project(camera: &CameraPose, world: Vec3) -> Option<(u32, u32, f64)> {
    let local = camera.pose.apply_inverse(world);
    if local.z <= 1e-9 {
        return None; // behind the camera
    }
    let cx = camera.width as f64 / 2.0;
    let cy = camera.height as f64 / 2.0;
    let u = camera.focal * local.x / local.z + cx;
    let v = camera.focal * local.y / local.z + cy;
    if u < 0.0 || v < 0.0 || u >= camera.width as f64 || v >= camera.height as f64 {
        return None;
    }
    Some((u as u32, v as u32, local.z))
}

/// Synthesizes the partial-view point cloud of one object: surface points
/// of its box proxy that survive back-face culling and a z-buffer over the
/// camera's pixel grid. Points come back in the world frame; the surface
/// sampling is seeded, so the result is a pure function of its inputs.
pub fn partial_view(
    proxy: &OrientedBox,
    object_pose: &Pose,
    camera: &CameraPose,
    samples: usize,
    seed: u64,
) -> Result<PointCloud, GeometryError> {
    assert!(samples >= 1, "sample count must be at least 1");
    let world_box = proxy.transformed(object_pose);
    if world_box.contains(camera.pose.translation, 0.0) {
        return Err(GeometryError::NoVisiblePoints);
    }

    let mut rng = derive_rng(seed, "partial-view", 0);
    let surface = world_box.sample_surface(samples, &mut rng);
    let normals = world_box.face_normals();

    // face index for each sample by nearest face plane in the local frame
    let face_of = |p: Vec3| -> usize {
        let local = world_box.rotation.apply_transpose(p.sub(world_box.center));
        let h = world_box.half_extents;
        let d = [
            (local.x + h.x).abs(),
            (local.x - h.x).abs(),
            (local.y + h.y).abs(),
            (local.y - h.y).abs(),
            (local.z + h.z).abs(),
            (local.z - h.z).abs(),
        ];
        let mut best = 0;
        for (i, v) in d.iter().enumerate() {
            if *v < d[best] {
                best = i;
            }
        }
        best
    };

    // front-facing samples with their pixel and depth
    let mut candidates: Vec<(usize, u32, u32, f64)> = Vec::new();
    for (i, p) in surface.iter().enumerate() {
        let n = normals[face_of(*p)];
        let to_cam = camera.pose.translation.sub(*p);
        if n.dot(to_cam) <= 0.0 {
            continue;
        }
        if let Some((u, v, depth)) = project(camera, *p) {
            candidates.push((i, u, v, depth));
        }
    }
    if candidates.is_empty() {
        return Err(GeometryError::NoVisiblePoints);
    }

    let w = camera.width as usize;
    let mut zbuf = vec![f64::INFINITY; w * camera.height as usize];
    for &(_, u, v, depth) in &candidates {
        let idx = v as usize * w + u as usize;
        if depth < zbuf[idx] {
            zbuf[idx] = depth;
        }
    }
    let visible: Vec<Vec3> = candidates
        .iter()
        .filter(|&&(_, u, v, depth)| depth <= zbuf[v as usize * w + u as usize] + DEPTH_TOLERANCE)
        .map(|&(i, ..)| surface[i])
        .collect();
    if visible.is_empty() {
        return Err(GeometryError::NoVisiblePoints);
    }
    Ok(PointCloud::new(visible))
}
