use rand::Rng;

use super::ObjectModel;
use crate::geometry::Vec3;
use crate::rng::derive_rng;

/// Named colors objects are painted with; names feed the instruction
/// templates, so catalog colors are always drawn from this palette.
pub const PALETTE: [(&str, [f32; 3]); 10] = [
    ("red", [0.85, 0.10, 0.10]),
    ("green", [0.10, 0.65, 0.15]),
    ("blue", [0.15, 0.25, 0.80]),
    ("yellow", [0.90, 0.85, 0.10]),
    ("orange", [0.95, 0.55, 0.10]),
    ("purple", [0.55, 0.15, 0.70]),
    ("pink", [0.95, 0.55, 0.70]),
    ("brown", [0.50, 0.32, 0.15]),
    ("white", [0.92, 0.92, 0.92]),
    ("black", [0.12, 0.12, 0.12]),
];

pub fn color_name(rgb: [f32; 3]) -> &'static str {
    let mut best = PALETTE[0].0;
    let mut best_d = f32::INFINITY;
    for (name, c) in PALETTE {
        let d = (0..3).map(|i| (rgb[i] - c[i]).powi(2)).sum::<f32>();
        if d < best_d {
            best_d = d;
            best = name;
        }
    }
    best
}

/// Canonical per-category sizes: (category, longest extent in meters,
/// aspect ratios relative to the longest extent). The stand-in for any
/// external size lookup.
pub fn canonical_size_table() -> &'static [(&'static str, f64, [f64; 3])] {
    &[
        ("box", 0.10, [1.0, 1.0, 1.0]),
        ("mug", 0.09, [0.9, 0.9, 1.0]),
        ("plate", 0.18, [1.0, 1.0, 0.12]),
        ("bowl", 0.14, [1.0, 1.0, 0.45]),
        ("book", 0.22, [1.0, 0.7, 0.14]),
        ("cellphone", 0.15, [1.0, 0.48, 0.06]),
        ("bottle", 0.08, [0.35, 0.35, 1.0]),
        ("can", 0.07, [0.55, 0.55, 1.0]),
        ("cup", 0.08, [0.85, 0.85, 1.0]),
        ("remote", 0.17, [1.0, 0.3, 0.12]),
        ("keyboard", 0.36, [1.0, 0.35, 0.06]),
        ("mouse", 0.11, [1.0, 0.55, 0.35]),
        ("stapler", 0.16, [1.0, 0.3, 0.35]),
        ("tape", 0.10, [1.0, 1.0, 0.45]),
        ("notebook", 0.21, [1.0, 0.75, 0.08]),
        ("eraser", 0.06, [1.0, 0.45, 0.25]),
        ("pencil-case", 0.20, [1.0, 0.4, 0.25]),
        ("tissue-box", 0.23, [1.0, 0.5, 0.45]),
        ("lunchbox", 0.18, [1.0, 0.72, 0.4]),
        ("thermos", 0.08, [0.35, 0.35, 1.0]),
        ("speaker", 0.12, [0.8, 0.8, 1.0]),
        ("clock", 0.12, [1.0, 0.35, 1.0]),
        ("camera", 0.12, [1.0, 0.6, 0.65]),
        ("charger", 0.08, [1.0, 0.7, 0.45]),
        ("soap", 0.09, [1.0, 0.6, 0.35]),
        ("sponge", 0.11, [1.0, 0.65, 0.35]),
        ("jar", 0.09, [0.8, 0.8, 1.0]),
        ("teapot", 0.15, [1.0, 0.65, 0.65]),
        ("basket", 0.25, [1.0, 0.7, 0.45]),
        ("board-game", 0.28, [1.0, 1.0, 0.2]),
    ]
}

/// Builds the procedural catalog: every category in the size table times
/// `variations` seeded shape/color variations. Aspect jitter is bounded so
/// the longest extent stays pinned to the canonical size.
pub fn procedural_catalog(variations: usize, seed: u64) -> Vec<ObjectModel> {
    let mut out = Vec::new();
    for (ci, (category, size, aspect)) in canonical_size_table().iter().enumerate() {
        let mut rng = derive_rng(seed, "catalog", ci as u64);
        for k in 0..variations {
            let jitter = |r: f64, rng: &mut rand_chacha::ChaCha12Rng| {
                (r * rng.gen_range(0.8..1.2)).min(1.0)
            };
            let ax = jitter(aspect[0], &mut rng);
            let ay = jitter(aspect[1], &mut rng);
            let az = jitter(aspect[2], &mut rng);
            // renormalize so the longest extent equals the canonical size
            let longest = ax.max(ay).max(az);
            let half = Vec3::new(
                0.5 * size * ax / longest,
                0.5 * size * ay / longest,
                0.5 * size * az / longest,
            );
            let color = PALETTE[rng.gen_range(0..PALETTE.len())].1;
            out.push(ObjectModel {
                id: format!("{category}-{k:02}"),
                category: category.to_string(),
                half_extents: half,
                color,
            });
        }
    }
    out
}
