//! Top-down SVG rendering of a scene pair (before/after). Each object is
//! drawn as its footprint polygon, filled with the model color, with the
//! outline color encoding its role.

use sport_core::physics::footprint;
use sport_core::scene::{Role, Scene};

const PANEL: f64 = 300.0;
const MARGIN: f64 = 20.0;

fn role_stroke(role: Role) -> &'static str {
    match role {
        Role::Movable => "#d62728",
        Role::Reference => "#1f77b4",
        Role::Irrelevant => "#7f7f7f",
    }
}

fn fill_color(c: [f32; 3]) -> String {
    format!(
        "rgb({},{},{})",
        (c[0] * 255.0).round() as u8,
        (c[1] * 255.0).round() as u8,
        (c[2] * 255.0).round() as u8
    )
}

fn panel(svg: &mut String, scene: &Scene, label: &str, x_offset: f64) {
    let half_x = scene.workspace.half_x;
    let half_y = scene.workspace.half_y;
    // world (x right, y up) to panel pixels, y flipped
    let sx = PANEL / (2.0 * half_x);
    let sy = PANEL / (2.0 * half_y);
    let to_px = |wx: f64, wy: f64| {
        (
            x_offset + MARGIN + (wx + half_x) * sx,
            MARGIN + (half_y - wy) * sy,
        )
    };

    svg.push_str(&format!(
        "<rect x=\"{:.1}\" y=\"{MARGIN}\" width=\"{PANEL}\" height=\"{PANEL}\" fill=\"#fafafa\" stroke=\"#000\"/>\n",
        x_offset + MARGIN
    ));
    svg.push_str(&format!(
        "<text x=\"{:.1}\" y=\"{:.1}\" font-family=\"monospace\" font-size=\"14\">{label}</text>\n",
        x_offset + MARGIN,
        MARGIN - 6.0
    ));

    for obj in &scene.objects {
        let hull = footprint(&obj.world_box());
        let points: Vec<String> = hull
            .iter()
            .map(|p| {
                let (px, py) = to_px(p.x, p.y);
                format!("{px:.2},{py:.2}")
            })
            .collect();
        svg.push_str(&format!(
            "<polygon data-id=\"{label}/{}\" points=\"{}\" fill=\"{}\" fill-opacity=\"0.7\" stroke=\"{}\" stroke-width=\"2\"/>\n",
            obj.model.id,
            points.join(" "),
            fill_color(obj.model.color),
            role_stroke(obj.role)
        ));
    }
}

/// Renders the initial and goal scenes side by side.
pub fn scene_svg(before: &Scene, after: &Scene) -> String {
    let width = 2.0 * (PANEL + 2.0 * MARGIN);
    let height = PANEL + 2.0 * MARGIN;
    let mut svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width:.0}\" height=\"{height:.0}\" viewBox=\"0 0 {width:.0} {height:.0}\">\n"
    );
    panel(&mut svg, before, "before", 0.0);
    panel(&mut svg, after, "after", PANEL + 2.0 * MARGIN);
    svg.push_str("</svg>\n");
    svg
}
