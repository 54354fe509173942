use std::path::PathBuf;
use std::sync::Arc;

use nalgebra::{Isometry3, Translation3, UnitQuaternion};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{scene_rng, Result, TrialsError};
use crate::geometry::{build_approx_model, decompose, load_mesh, TriMesh};
use crate::physics::{BodyKind, PhysicsParams, RigidBody, Shape, TrayConfig, World};
use crate::render::{render_depth, CameraConfig, DepthImage};

/// Collision geometry used for the pile's dynamics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CollisionMode {
    /// Fitted boxes of the approximate model.
    #[default]
    Box,
    /// Convex hulls of the decomposition, without box fitting.
    ExactConvex,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SceneConfig {
    /// OBJ file of the object.
    pub asset: PathBuf,
    pub object_count: usize,
    /// Drop height of each object's center above the tray floor, m.
    pub drop_height: f64,
    /// Target part count K of the approximate model.
    pub approx_parts: usize,
    pub collision: CollisionMode,
    pub tray: TrayConfig,
    pub physics: PhysicsParams,
    /// Steps simulated after each drop before the next object falls.
    pub steps_between_drops: usize,
    /// Settling budget after the last drop.
    pub max_settle_steps: usize,
    pub quiescent_linear: f64,
    pub quiescent_angular: f64,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            asset: PathBuf::from("assets/l_prism.obj"),
            object_count: 8,
            drop_height: 0.15,
            approx_parts: 2,
            collision: CollisionMode::Box,
            tray: TrayConfig::default(),
            physics: PhysicsParams::default(),
            steps_between_drops: 90,
            max_settle_steps: 4000,
            quiescent_linear: 5e-3,
            quiescent_angular: 5e-2,
        }
    }
}

impl SceneConfig {
    pub fn validate(&self) -> Result<()> {
        if self.object_count == 0 {
            return Err(TrialsError::Config("object_count must be at least 1".into()));
        }
        if !(self.drop_height > self.tray.wall_height) {
            return Err(TrialsError::Config(format!(
                "drop height {} m must exceed the tray walls at {} m",
                self.drop_height, self.tray.wall_height
            )));
        }
        if self.approx_parts == 0 {
            return Err(TrialsError::Config("approx_parts must be at least 1".into()));
        }
        self.physics.validate()?;
        Ok(())
    }
}

/// Exact mesh plus the collision shape shared by every copy in a pile.
#[derive(Debug, Clone)]
pub struct Asset {
    pub name: String,
    pub mesh: TriMesh,
    pub shape: Arc<Shape>,
    /// Number of collision parts.
    pub parts: usize,
}

pub fn prepare_asset(mesh: TriMesh, approx_parts: usize, mode: CollisionMode) -> Result<Asset> {
    let shape = match mode {
        CollisionMode::Box => Shape::from_model(&build_approx_model(&mesh, approx_parts)?),
        CollisionMode::ExactConvex => Shape::from_hulls(&decompose(&mesh, approx_parts)?),
    };
    Ok(Asset {
        name: mesh.name.clone(),
        parts: shape.parts.len(),
        mesh,
        shape: Arc::new(shape),
    })
}

impl SceneConfig {
    pub fn load_asset(&self) -> Result<Asset> {
        prepare_asset(load_mesh(&self.asset)?, self.approx_parts, self.collision)
    }
}

/// A settled pile.
#[derive(Debug, Clone)]
pub struct Scene {
    pub world: World,
    /// Body indices of the dropped objects.
    pub objects: Vec<usize>,
    pub seed: u64,
    /// Index of the scene's random stream.
    pub index: u64,
}

impl Scene {
    /// Depth image of the objects' exact meshes.
    pub fn render(&self, asset: &Asset, camera: &CameraConfig) -> DepthImage {
        render_depth(self.objects.iter().map(|&i| (&asset.mesh, self.world.body(i).mesh_pose())), camera)
    }
}

/// Drops `object_count` copies one after another with random pose and
/// simulates to quiescence.
pub fn generate_scene(config: &SceneConfig, asset: &Asset, seed: u64, index: u64) -> Result<Scene> {
    config.validate()?;
    let mut rng = scene_rng(seed, index);
    let mut world = World::new(config.physics.clone())?;
    world.add_tray(&config.tray);
    let margin_x = (config.tray.size[0] / 2.0 - asset.shape.radius).max(0.0);
    let margin_y = (config.tray.size[1] / 2.0 - asset.shape.radius).max(0.0);
    let mut objects = Vec::with_capacity(config.object_count);
    for _ in 0..config.object_count {
        let x = if margin_x > 0.0 { rng.gen_range(-margin_x..margin_x) } else { 0.0 };
        let y = if margin_y > 0.0 { rng.gen_range(-margin_y..margin_y) } else { 0.0 };
        let tau = std::f64::consts::TAU;
        let rot = UnitQuaternion::from_euler_angles(rng.gen_range(0.0..tau), rng.gen_range(0.0..tau), rng.gen_range(0.0..tau));
        // place the mesh so that its center of mass lands at the drop point
        let mut body = RigidBody::dynamic(&asset.shape, config.physics.density, Isometry3::identity())?;
        body.position = Translation3::new(x, y, world.floor_z() + config.drop_height).vector.into();
        body.orientation = rot;
        objects.push(world.add_body(body));
        for _ in 0..config.steps_between_drops {
            world.step()?;
        }
    }
    settle(&mut world, &objects, config, seed)?;
    Ok(Scene {
        world,
        objects,
        seed,
        index,
    })
}

/// The same pile with every object's collision shape replaced by `asset`'s,
/// keeping each mesh pose, then settled again.
pub fn rebuild_scene(scene: &Scene, asset: &Asset, config: &SceneConfig) -> Result<Scene> {
    let mut world = World::new(config.physics.clone())?;
    world.add_tray(&config.tray);
    let mut objects = Vec::with_capacity(scene.objects.len());
    for &i in &scene.objects {
        let pose = scene.world.body(i).mesh_pose();
        objects.push(world.add_body(RigidBody::dynamic(&asset.shape, config.physics.density, pose)?));
    }
    settle(&mut world, &objects, config, scene.seed)?;
    Ok(Scene {
        world,
        objects,
        seed: scene.seed,
        index: scene.index,
    })
}

fn settle(world: &mut World, objects: &[usize], config: &SceneConfig, seed: u64) -> Result<()> {
    let mut settled = false;
    for _ in 0..config.max_settle_steps {
        if world.is_quiescent(config.quiescent_linear, config.quiescent_angular) {
            settled = true;
            break;
        }
        world.step()?;
    }
    if !settled {
        return Err(TrialsError::NotQuiescent {
            seed,
            steps: config.max_settle_steps,
        });
    }
    let escaped = objects.iter().any(|&i| {
        let b = world.body(i);
        b.kind == BodyKind::Dynamic && (!config.tray.contains_xy(b.position.x, b.position.y) || b.position.z < world.floor_z())
    });
    if escaped {
        return Err(TrialsError::Escaped { seed });
    }
    Ok(())
}
