//! 9-D pose vector codec: workspace-normalized translation plus the first
//! two columns of the rotation matrix.

use crate::geometry::{rotation_from_vectors, GeometryError, Pose, Vec3};
use crate::scene::Workspace;

/// Vertical normalization half-range. The workspace is planar, so the
/// z channel gets a fixed desk-scale stacking headroom instead.
pub const Z_HALF: f64 = 0.25;

fn clamp_unit(v: f64) -> f64 {
    v.clamp(-1.0, 1.0)
}

/// Encodes a pose as `[s̃, a, b]`: translation divided by the workspace
/// half-extents (clamped to [−1, 1]) and the first two columns of R.
pub fn pose_to_vector(pose: &Pose, workspace: &Workspace) -> [f64; 9] {
    let t = pose.translation;
    let a = pose.rotation.column(0);
    let b = pose.rotation.column(1);
    [
        clamp_unit(t.x / workspace.half_x),
        clamp_unit(t.y / workspace.half_y),
        clamp_unit(t.z / Z_HALF),
        a.x,
        a.y,
        a.z,
        b.x,
        b.y,
        b.z,
    ]
}

/// Inverse of [`pose_to_vector`]: un-normalizes the translation and
/// Gram-Schmidts (a, b) back into a rotation.
pub fn vector_to_pose(v: &[f64; 9], workspace: &Workspace) -> Result<Pose, GeometryError> {
    let a = Vec3::new(v[3], v[4], v[5]);
    let b = Vec3::new(v[6], v[7], v[8]);
    let rotation = rotation_from_vectors(a, b)?;
    let translation = Vec3::new(
        v[0] * workspace.half_x,
        v[1] * workspace.half_y,
        v[2] * Z_HALF,
    );
    Ok(Pose::new(translation, rotation))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::RotationMatrix;
    use crate::rng::derive_rng;
    use rand::Rng;

    fn ws() -> Workspace {
        Workspace { half_x: 0.5, half_y: 0.5 }
    }

    #[test]
    fn identity_pose_at_center_is_canonical() {
        let p = Pose::IDENTITY;
        let v = pose_to_vector(&p, &ws());
        assert_eq!(&v[..3], &[0.0, 0.0, 0.0]);
        assert_eq!(&v[3..6], &[1.0, 0.0, 0.0]);
        assert_eq!(&v[6..], &[0.0, 1.0, 0.0]);
    }

    #[test]
    fn round_trip_is_identity_over_random_poses() {
        let mut rng = derive_rng(0, "posevec-test", 0);
        let w = ws();
        for _ in 0..10_000 {
            // random rotation from two Gram-Schmidt'd gaussian vectors
            let g = |r: &mut rand_chacha::ChaCha12Rng| {
                Vec3::new(r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0))
            };
            let rot = match rotation_from_vectors(g(&mut rng), g(&mut rng)) {
                Ok(r) => r,
                Err(_) => continue,
            };
            let t = Vec3::new(
                rng.gen_range(-w.half_x..w.half_x),
                rng.gen_range(-w.half_y..w.half_y),
                rng.gen_range(0.0..Z_HALF),
            );
            let pose = Pose::new(t, rot);
            let back = vector_to_pose(&pose_to_vector(&pose, &w), &w).unwrap();
            assert!(back.translation.sub(t).norm() < 1e-9);
            for i in 0..3 {
                for j in 0..3 {
                    assert!((back.rotation.m[i][j] - rot.m[i][j]).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn parallel_ab_is_degenerate() {
        let v = [0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 2.0, 0.0, 0.0];
        assert!(matches!(
            vector_to_pose(&v, &ws()),
            Err(GeometryError::DegenerateRotation)
        ));
    }

    #[test]
    fn out_of_workspace_translation_is_clamped() {
        let p = Pose::new(Vec3::new(2.0, -2.0, 1.0), RotationMatrix::IDENTITY);
        let v = pose_to_vector(&p, &ws());
        assert_eq!(&v[..3], &[1.0, -1.0, 1.0]);
    }
}
