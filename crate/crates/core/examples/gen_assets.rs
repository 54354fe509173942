//! Regenerates the shipped OBJ assets: `cargo run -p binpick --example gen_assets -- assets`.

use binpick::geometry::{primitives, TriMesh, Vector3};

fn main() -> std::io::Result<()> {
    let dir = std::path::PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "assets".into()));
    std::fs::create_dir_all(&dir)?;
    let meshes: Vec<TriMesh> = vec![
        primitives::box_mesh("cube", Vector3::repeat(0.015)),
        primitives::prism_mesh("l_prism", &primitives::l_outline(0.05, 0.03, 0.015), 0.015),
        primitives::prism_mesh("hex_prism", &primitives::regular_polygon(6, 0.02), 0.02),
        primitives::prism_mesh("elliptic_cylinder", &primitives::ellipse_polygon(24, 0.02, 0.012), 0.02),
        primitives::pin_fin_plate("workpiece", 11, 0.004, 0.003, 0.011),
    ];
    for m in &meshes {
        std::fs::write(dir.join(format!("{}.obj", m.name)), m.to_obj())?;
    }
    Ok(())
}
