//! Spatial relation regions, evaluated in the reference object's frame.
//!
//! The four planar relations are cones: "left" holds when
//! x/sqrt(x^2+y^2) < -delta and |y|/sqrt(x^2+y^2) < delta for the query
//! expressed in the reference frame, and the other three mirror that cone
//! onto the +x and +-y axes. "On top of" is the reference's top face plus
//! a short height band; "between" is a disk around the midpoint of the
//! two references.

use rand::Rng;

use super::{Relation, SceneError};
use crate::geometry::{Pose, Vec3};

/// Cone half-width hyperparameter.
pub const DEFAULT_DELTA: f64 = 0.4;

/// Height band above the reference top face accepted as "on top of".
pub const ON_TOP_HEIGHT_BAND: f64 = 0.02;

/// Reference object as the region predicates see it: pose plus box
/// half-extents (needed for the top face).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefGeom {
    pub pose: Pose,
    pub half_extents: Vec3,
}

fn check_ref_count(relation: Relation, refs: &[RefGeom]) -> Result<(), SceneError> {
    let required = relation.reference_count();
    if refs.len() < required {
        return Err(SceneError::BadReferenceCount { relation, required, got: refs.len() });
    }
    Ok(())
}

fn planar_cone(local: Vec3, axis: Relation, delta: f64) -> Result<bool, SceneError> {
    let r = (local.x * local.x + local.y * local.y).sqrt();
    if r < 1e-9 {
        return Err(SceneError::ZeroDistance);
    }
    let (along, across) = match axis {
        Relation::Left => (-local.x, local.y),
        Relation::Right => (local.x, local.y),
        Relation::Front => (-local.y, local.x),
        Relation::Behind => (local.y, local.x),
        _ => unreachable!(),
    };
    Ok(along / r > delta && across.abs() / r < delta)
}

/// Whether `query` (the movable object's support point, in world frame)
/// lies in the region of `relation` around the reference(s).
pub fn relation_region_contains(
    relation: Relation,
    refs: &[RefGeom],
    query: Vec3,
    delta: f64,
) -> Result<bool, SceneError> {
    check_ref_count(relation, refs)?;
    match relation {
        Relation::Left | Relation::Right | Relation::Front | Relation::Behind => {
            let local = refs[0].pose.apply_inverse(query);
            planar_cone(local, relation, delta)
        }
        Relation::OnTopOf => {
            let local = refs[0].pose.apply_inverse(query);
            let h = refs[0].half_extents;
            Ok(local.x.abs() <= h.x
                && local.y.abs() <= h.y
                && local.z >= h.z - 1e-6
                && local.z <= h.z + ON_TOP_HEIGHT_BAND)
        }
        Relation::Between => {
            let a = refs[0].pose.translation;
            let b = refs[1].pose.translation;
            let gap = Vec3::new(b.x - a.x, b.y - a.y, 0.0).norm();
            if gap < 1e-9 {
                return Ok(false); // coincident references: empty region
            }
            let mid = Vec3::new(0.5 * (a.x + b.x), 0.5 * (a.y + b.y), 0.0);
            let d = Vec3::new(query.x - mid.x, query.y - mid.y, 0.0).norm();
            Ok(d < delta * gap)
        }
    }
}

const MAX_SAMPLE_ATTEMPTS: usize = 10_000;

/// Rejection-samples a support point inside the relation region. The
/// returned z is the table surface for planar relations and the reference
/// top face for stacking; the caller settles the object for the exact
/// resting height.
pub fn relation_region_sample<R: Rng>(
    relation: Relation,
    refs: &[RefGeom],
    delta: f64,
    radial_range: (f64, f64),
    rng: &mut R,
) -> Result<Vec3, SceneError> {
    check_ref_count(relation, refs)?;
    let (r_min, r_max) = radial_range;
    assert!(r_min < r_max, "radial range must be non-empty");

    for _ in 0..MAX_SAMPLE_ATTEMPTS {
        let candidate = match relation {
            Relation::Left | Relation::Right | Relation::Front | Relation::Behind => {
                let theta = rng.gen_range(0.0..std::f64::consts::TAU);
                let radius = rng.gen_range(r_min..r_max);
                let local = Vec3::new(radius * theta.cos(), radius * theta.sin(), 0.0);
                let w = refs[0].pose.apply(local);
                Vec3::new(w.x, w.y, 0.0)
            }
            Relation::OnTopOf => {
                let h = refs[0].half_extents;
                let local = Vec3::new(
                    rng.gen_range(-h.x..h.x),
                    rng.gen_range(-h.y..h.y),
                    h.z,
                );
                refs[0].pose.apply(local)
            }
            Relation::Between => {
                let a = refs[0].pose.translation;
                let b = refs[1].pose.translation;
                let gap = Vec3::new(b.x - a.x, b.y - a.y, 0.0).norm();
                if gap < 1e-9 {
                    continue;
                }
                let theta = rng.gen_range(0.0..std::f64::consts::TAU);
                let radius = delta * gap * rng.gen_range(0.0f64..1.0).sqrt();
                Vec3::new(
                    0.5 * (a.x + b.x) + radius * theta.cos(),
                    0.5 * (a.y + b.y) + radius * theta.sin(),
                    0.0,
                )
            }
        };
        match relation_region_contains(relation, refs, candidate, delta) {
            Ok(true) => return Ok(candidate),
            Ok(false) => continue,
            Err(SceneError::ZeroDistance) => continue,
            Err(e) => return Err(e),
        }
    }
    Err(SceneError::RegionSamplingExhausted(MAX_SAMPLE_ATTEMPTS))
}

/// Evaluates every relation predicate against the movable support point.
/// Relations whose reference requirements the scene cannot meet are
/// skipped; degenerate queries count as not contained.
pub fn classify_pose(refs: &[RefGeom], movable_support: Vec3, delta: f64) -> Vec<Relation> {
    Relation::ALL
        .iter()
        .copied()
        .filter(|&rel| {
            refs.len() >= rel.reference_count()
                && relation_region_contains(rel, &refs[..rel.reference_count()], movable_support, delta)
                    .unwrap_or(false)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::RotationMatrix;

    fn unit_ref() -> RefGeom {
        RefGeom { pose: Pose::IDENTITY, half_extents: Vec3::new(0.05, 0.05, 0.05) }
    }

    #[test]
    fn left_region_basics() {
        let refs = [unit_ref()];
        let check = |q: Vec3| relation_region_contains(Relation::Left, &refs, q, 0.4).unwrap();
        assert!(check(Vec3::new(-1.0, 0.0, 0.0)));
        // |y|/r = 0.707 >= delta
        assert!(!check(Vec3::new(-1.0, 1.0, 0.0)));
        assert!(!check(Vec3::new(1.0, 0.0, 0.0)));
    }

    #[test]
    fn zero_distance_is_an_error() {
        let refs = [unit_ref()];
        assert_eq!(
            relation_region_contains(Relation::Left, &refs, Vec3::ZERO, 0.4),
            Err(SceneError::ZeroDistance)
        );
    }

    #[test]
    fn mirror_symmetry_left_right() {
        let refs = [unit_ref()];
        let mut rng = crate::rng::derive_rng(3, "mirror", 0);
        for _ in 0..10_000 {
            let q = Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), 0.0);
            let l = relation_region_contains(Relation::Left, &refs, q, 0.4);
            let r = relation_region_contains(Relation::Right, &refs, Vec3::new(-q.x, q.y, q.z), 0.4);
            assert_eq!(l, r, "mirror mismatch at {q:?}");
        }
    }

    #[test]
    fn frame_covariance_under_z_rotation() {
        let mut rng = crate::rng::derive_rng(4, "covariance", 0);
        for _ in 0..2000 {
            let q = Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), 0.0);
            let theta: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
            let rot = RotationMatrix::about_z(theta);
            let refs0 = [unit_ref()];
            let refs1 = [RefGeom {
                pose: Pose::new(Vec3::ZERO, rot),
                half_extents: unit_ref().half_extents,
            }];
            for rel in [Relation::Left, Relation::Right, Relation::Front, Relation::Behind] {
                let base = relation_region_contains(rel, &refs0, q, 0.4);
                let rotated = relation_region_contains(rel, &refs1, rot.apply(q), 0.4);
                assert_eq!(base, rotated);
            }
        }
    }

    #[test]
    fn sampler_output_satisfies_its_own_predicate() {
        let refs = [unit_ref()];
        let mut rng = crate::rng::derive_rng(5, "sampler", 0);
        for _ in 0..1000 {
            let p = relation_region_sample(Relation::Left, &refs, 0.4, (0.1, 0.3), &mut rng).unwrap();
            assert!(relation_region_contains(Relation::Left, &refs, p, 0.4).unwrap());
        }
    }

    #[test]
    fn on_top_samples_stay_on_the_face() {
        let refs = [RefGeom { pose: Pose::IDENTITY, half_extents: Vec3::new(0.05, 0.05, 0.05) }];
        let mut rng = crate::rng::derive_rng(6, "ontop", 0);
        for _ in 0..200 {
            let p = relation_region_sample(Relation::OnTopOf, &refs, 0.4, (0.1, 0.3), &mut rng).unwrap();
            assert!(p.x.abs() <= 0.05 && p.y.abs() <= 0.05);
            assert!((p.z - 0.05).abs() < 1e-9);
        }
    }

    #[test]
    fn between_with_coincident_references_exhausts() {
        let r = unit_ref();
        let refs = [r, r];
        let mut rng = crate::rng::derive_rng(7, "between", 0);
        assert!(matches!(
            relation_region_sample(Relation::Between, &refs, 0.4, (0.1, 0.3), &mut rng),
            Err(SceneError::RegionSamplingExhausted(_))
        ));
    }

    #[test]
    fn classify_pose_picks_the_right_relation() {
        let refs = [unit_ref()];
        let left = classify_pose(&refs, Vec3::new(-0.2, 0.0, 0.0), 0.4);
        assert_eq!(left, vec![Relation::Left]);
        let on_top = classify_pose(&refs, Vec3::new(0.0, 0.0, 0.05), 0.4);
        assert_eq!(on_top, vec![Relation::OnTopOf]);
        // 45-degree diagonal fails both cone tests
        let nothing = classify_pose(&refs, Vec3::new(5.0, 5.0, 0.0), 0.4);
        assert!(nothing.is_empty());
    }
}
