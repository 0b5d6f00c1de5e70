//! Scenario configuration, read from JSON.
//!
//! Every field has a default, so `{}` is a valid configuration describing the
//! canonical scene: a 4 cm square resting on the ground, grasped at its centroid
//! with rounded pads of E = 1e8 Pa and friction 0.4.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::grasp::{GraspSpec, PerturbationModel};
use crate::scene::{JawProfile, Material};
use crate::stepper::StepParams;
use crate::{Error, Result, Vec2};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub object: ObjectConfig,
    pub jaw: JawConfig,
    pub physics: PhysicsConfig,
    pub grasp: GraspConfig,
    pub analytic: AnalyticConfig,
    pub seed: u64,
    /// Directory that relative polygon paths are resolved against.
    #[serde(skip)]
    pub base_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Primitive {
    Square,
    Triangle,
    Pentagon,
    Hexagon,
    /// 16-gon approximation of a disk.
    Circle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ObjectConfig {
    pub primitive: Option<Primitive>,
    pub polygon_file: Option<PathBuf>,
    /// Side length for a square, circumscribed diameter for the other primitives,
    /// uniform scale factor for polygon files.
    pub scale: f64,
    pub pose: ObjectPose,
    pub subdivision: u32,
    pub material: Material,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ObjectPose {
    /// Horizontal position of the centroid.
    pub x: f64,
    /// Vertical position of the centroid; `None` rests the object on the ground.
    pub y: Option<f64>,
    /// Rotation about the centroid (rad).
    pub theta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct JawConfig {
    pub profile: JawProfile,
    pub pad_material: Material,
    pub pad_thickness: f64,
    pub pad_height: f64,
    pub rounded_sagitta: f64,
    pub backing_thickness: f64,
    pub max_edge: f64,
    /// Opening between the innermost pad points at the start of the squeeze.
    pub max_width: f64,
    pub closing_speed: f64,
    pub lift_speed: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhysicsConfig {
    pub gravity: [f64; 2],
    pub dhat: f64,
    pub timestep: f64,
    pub newton_tol: f64,
    pub max_newton_iters: usize,
    pub kappa: f64,
    pub eps_v: f64,
    pub ground_friction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GraspConfig {
    /// Jaw center; `None` uses the object centroid.
    pub center: Option<[f64; 2]>,
    pub angle: f64,
    pub psi_threshold: f64,
    /// Relative band for the pad-energy balance test.
    pub psi_balance_tol: f64,
    /// Multiplier converting strain energy in J (per meter of extrusion) into the
    /// units of `psi_threshold`.
    pub psi_unit_scale: f64,
    /// Defaults to `0.1 * dhat`.
    pub contact_eps: Option<f64>,
    /// Defaults to `2 * dhat`.
    pub min_jaw_separation: Option<f64>,
    pub lift_clearance: f64,
    pub settle_time: f64,
    pub translation_std: f64,
    pub rotation_std: f64,
    pub trials: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalyticConfig {
    pub max_normal_force: f64,
    pub torsion_ratio: f64,
    /// Out-of-plane extent used to turn the planar object into a load (m).
    pub depth: f64,
}

impl Default for ObjectConfig {
    fn default() -> Self {
        Self {
            primitive: None,
            polygon_file: None,
            scale: 0.04,
            pose: ObjectPose::default(),
            subdivision: 0,
            material: Material { youngs_modulus: 1e11, poisson_ratio: 0.3, density: 1150.0, friction_coeff: 0.4 },
        }
    }
}

impl Default for ObjectPose {
    fn default() -> Self {
        Self { x: 0.0, y: None, theta: 0.0 }
    }
}

impl Default for JawConfig {
    fn default() -> Self {
        Self {
            profile: JawProfile::Rounded,
            pad_material: Material { youngs_modulus: 1e8, poisson_ratio: 0.4, density: 1100.0, friction_coeff: 0.4 },
            pad_thickness: 0.01,
            pad_height: 0.024,
            rounded_sagitta: 0.003,
            backing_thickness: 0.006,
            max_edge: 0.002,
            max_width: 0.07,
            closing_speed: 0.05,
            lift_speed: 0.05,
        }
    }
}

impl Default for PhysicsConfig {
    fn default() -> Self {
        Self {
            gravity: [0.0, -9.81],
            dhat: 1e-3,
            timestep: 0.01,
            newton_tol: 1e-3,
            max_newton_iters: 200,
            kappa: 1e5,
            eps_v: 1e-3,
            ground_friction: 0.4,
        }
    }
}

impl Default for GraspConfig {
    fn default() -> Self {
        Self {
            center: None,
            angle: 0.0,
            psi_threshold: 5e4,
            psi_balance_tol: 0.1,
            psi_unit_scale: 1e3,
            contact_eps: None,
            min_jaw_separation: None,
            lift_clearance: 0.02,
            settle_time: 0.25,
            translation_std: 0.001,
            rotation_std: 0.003,
            trials: 5,
        }
    }
}

impl Default for AnalyticConfig {
    fn default() -> Self {
        Self { max_normal_force: 20.0, torsion_ratio: 0.005, depth: 0.04 }
    }
}

impl ScenarioConfig {
    pub fn from_json_str(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.check()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut cfg = Self::from_json_str(&text)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf);
        Ok(cfg)
    }

    /// Range checks that serde cannot express.
    pub fn check(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidInput(msg.to_string()));
        self.object.material.check()?;
        self.jaw.pad_material.check()?;
        if self.object.primitive.is_some() && self.object.polygon_file.is_some() {
            return bad("object: give either `primitive` or `polygon_file`, not both");
        }
        if !(self.object.scale > 0.0) {
            return bad("object.scale must be positive");
        }
        let j = &self.jaw;
        if !(j.pad_thickness > 0.0 && j.pad_height > 0.0 && j.backing_thickness > 0.0 && j.max_edge > 0.0) {
            return bad("jaw dimensions must be positive");
        }
        if j.profile == JawProfile::Rounded && !(j.rounded_sagitta > 0.0 && j.rounded_sagitta < j.pad_thickness) {
            return bad("jaw.rounded_sagitta must be in (0, pad_thickness)");
        }
        if !(j.max_width > 0.0 && j.closing_speed > 0.0 && j.lift_speed > 0.0) {
            return bad("jaw.max_width and speeds must be positive");
        }
        let p = &self.physics;
        if !(p.dhat > 0.0 && p.timestep > 0.0 && p.newton_tol > 0.0 && p.kappa > 0.0 && p.eps_v > 0.0) {
            return bad("physics: dhat, timestep, newton_tol, kappa, eps_v must be positive");
        }
        if p.max_newton_iters == 0 {
            return bad("physics.max_newton_iters must be at least 1");
        }
        if !(p.ground_friction >= 0.0) {
            return bad("physics.ground_friction must be non-negative");
        }
        let g = &self.grasp;
        if !(g.psi_threshold >= 0.0 && g.psi_balance_tol >= 0.0 && g.psi_unit_scale > 0.0) {
            return bad("grasp: psi_threshold, psi_balance_tol must be non-negative and psi_unit_scale positive");
        }
        if !(g.translation_std >= 0.0 && g.rotation_std >= 0.0) {
            return bad("grasp: perturbation standard deviations must be non-negative");
        }
        if g.trials == 0 {
            return bad("grasp.trials must be at least 1");
        }
        Ok(())
    }

    pub fn resolve_path(&self, p: &Path) -> PathBuf {
        match (&self.base_dir, p.is_relative()) {
            (Some(base), true) => base.join(p),
            _ => p.to_path_buf(),
        }
    }

    pub fn step_params(&self) -> StepParams {
        let p = &self.physics;
        StepParams {
            h: p.timestep,
            newton_tol: p.newton_tol,
            max_newton_iters: p.max_newton_iters,
            kappa: p.kappa,
            dhat: p.dhat,
            eps_v: p.eps_v,
        }
    }

    pub fn gravity(&self) -> Vec2 {
        Vec2::new(self.physics.gravity[0], self.physics.gravity[1])
    }

    pub fn contact_eps(&self) -> f64 {
        self.grasp.contact_eps.unwrap_or(0.1 * self.physics.dhat)
    }

    pub fn min_jaw_separation(&self) -> f64 {
        self.grasp.min_jaw_separation.unwrap_or(2.0 * self.physics.dhat)
    }

    pub fn perturbation(&self) -> PerturbationModel {
        PerturbationModel { translation_std: self.grasp.translation_std, rotation_std: self.grasp.rotation_std }
    }

    /// The grasp described by this configuration. Without an explicit center the
    /// jaws are centered on the placed object's centroid.
    pub fn grasp_spec(&self) -> Result<GraspSpec> {
        let center = match self.grasp.center {
            Some([x, y]) => Vec2::new(x, y),
            None => crate::scene::placed_object_centroid(self)?,
        };
        Ok(GraspSpec {
            center,
            axis_angle: self.grasp.angle,
            max_width: self.jaw.max_width,
            closing_speed: self.jaw.closing_speed,
            lift_speed: self.jaw.lift_speed,
            jaw_profile: self.jaw.profile,
        })
    }

    /// Copy of this configuration describing the given grasp.
    pub fn with_grasp(&self, u: &GraspSpec) -> Self {
        let mut c = self.clone();
        c.grasp.center = Some([u.center.x, u.center.y]);
        c.grasp.angle = u.axis_angle;
        c.jaw.max_width = u.max_width;
        c.jaw.closing_speed = u.closing_speed;
        c.jaw.lift_speed = u.lift_speed;
        c.jaw.profile = u.jaw_profile;
        c
    }
}
