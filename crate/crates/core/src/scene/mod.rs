//! Planar grasping scene: one stiff object, two jaw assemblies (deformable pad on a
//! rigid backing) and a fixed ground slab.

mod mesh;

use std::path::Path;

use serde::{Deserialize, Serialize};

pub use mesh::{
    check_simple, pad_mesh, polygon_area, polygon_centroid, rectangle, regular_polygon, triangulate, JawProfile,
    PadGeometry, PadMesh, TriMesh,
};
pub(crate) use mesh::{cross, signed_area};

use crate::config::{Primitive, ScenarioConfig};
use crate::contact::point_edge_distance;
use crate::elastic::ElementPrecomp;
use crate::grasp::GraspSpec;
use crate::{Error, Result, Vec2};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Material {
    /// Pa
    pub youngs_modulus: f64,
    pub poisson_ratio: f64,
    /// kg/m^2 (planar: volumetric density times 1 m of extrusion)
    pub density: f64,
    pub friction_coeff: f64,
}

impl Material {
    pub fn check(&self) -> Result<()> {
        let ok = self.youngs_modulus > 0.0
            && (0.0..0.5).contains(&self.poisson_ratio)
            && self.density > 0.0
            && self.friction_coeff >= 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!("invalid material {self:?}")))
        }
    }

    pub fn rigid(density: f64, friction_coeff: f64) -> Self {
        Self { youngs_modulus: 1e11, poisson_ratio: 0.3, density, friction_coeff }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BodyKind {
    DeformablePad,
    RigidObject,
    RigidBacking,
    Ground,
}

/// Row structure of a pad, used to measure compression.
#[derive(Debug, Clone)]
pub struct PadRows {
    /// (face vertex, back vertex) per row, body-local indices.
    pub rows: Vec<(usize, usize)>,
    pub rest_thickness: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Body {
    pub name: String,
    pub mesh: TriMesh,
    pub material: Material,
    pub kind: BodyKind,
    /// Per vertex: position prescribed by the grasp script rather than solved for.
    pub scripted: Vec<bool>,
    /// Bodies sharing a group never interact through contact (a pad and its backing).
    pub group: usize,
    pub elements: Vec<ElementPrecomp>,
    pub pad_rows: Option<PadRows>,
}

impl Body {
    pub fn new(
        name: &str,
        mesh: TriMesh,
        material: Material,
        kind: BodyKind,
        scripted: Vec<bool>,
        group: usize,
    ) -> Result<Self> {
        let elements = mesh
            .triangles
            .iter()
            .enumerate()
            .map(|(e, t)| {
                ElementPrecomp::new(
                    [mesh.rest_positions[t[0]], mesh.rest_positions[t[1]], mesh.rest_positions[t[2]]],
                    &material,
                )
                .ok_or(Error::InvertedElement { body: 0, element: e, det: 0.0 })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { name: name.to_string(), mesh, material, kind, scripted, group, elements, pad_rows: None })
    }

    pub fn n_vertices(&self) -> usize {
        self.mesh.vertices.len()
    }

    pub fn is_fully_scripted(&self) -> bool {
        self.scripted.iter().all(|&s| s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundaryPoint {
    pub body: usize,
    /// Global vertex index.
    pub vertex: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundaryEdge {
    pub body: usize,
    /// Index into the body's `boundary_edges`.
    pub index: usize,
    /// Global vertex indices.
    pub a: usize,
    pub b: usize,
}

/// Which body plays which role.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SceneRoles {
    pub object: usize,
    pub pads: [usize; 2],
    pub backings: [usize; 2],
    pub ground: usize,
}

#[derive(Debug, Clone)]
pub struct Scene {
    pub bodies: Vec<Body>,
    pub gravity: Vec2,
    pub dhat: f64,
    pub contact_stiffness: f64,
    pub ground_friction: f64,
    pub roles: SceneRoles,
    /// Unit grasp axis pointing from jaw 1 toward jaw 2.
    pub grasp_axis: Vec2,
    offsets: Vec<usize>,
    points: Vec<BoundaryPoint>,
    edges: Vec<BoundaryEdge>,
}

impl Scene {
    pub fn new(
        bodies: Vec<Body>,
        gravity: Vec2,
        dhat: f64,
        contact_stiffness: f64,
        ground_friction: f64,
        roles: SceneRoles,
        grasp_axis: Vec2,
    ) -> Self {
        let mut offsets = Vec::with_capacity(bodies.len() + 1);
        let mut total = 0;
        for b in &bodies {
            offsets.push(total);
            total += b.n_vertices();
        }
        offsets.push(total);
        let mut points = Vec::new();
        let mut edges = Vec::new();
        for (bi, b) in bodies.iter().enumerate() {
            let off = offsets[bi];
            points.extend(b.mesh.boundary_vertices().into_iter().map(|v| BoundaryPoint { body: bi, vertex: off + v }));
            edges.extend(b.mesh.boundary_edges.iter().enumerate().map(|(k, e)| BoundaryEdge {
                body: bi,
                index: k,
                a: off + e[0],
                b: off + e[1],
            }));
        }
        Self { bodies, gravity, dhat, contact_stiffness, ground_friction, roles, grasp_axis, offsets, points, edges }
    }

    pub fn n_vertices(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    pub fn offset(&self, body: usize) -> usize {
        self.offsets[body]
    }

    pub fn body_range(&self, body: usize) -> std::ops::Range<usize> {
        self.offsets[body]..self.offsets[body + 1]
    }

    pub fn body_of_vertex(&self, v: usize) -> usize {
        self.offsets.partition_point(|&o| o <= v) - 1
    }

    pub fn boundary_points(&self) -> &[BoundaryPoint] {
        &self.points
    }

    pub fn boundary_edges(&self) -> &[BoundaryEdge] {
        &self.edges
    }

    /// Initial positions of every vertex, concatenated in body order.
    pub fn initial_positions(&self) -> Vec<Vec2> {
        self.bodies.iter().flat_map(|b| b.mesh.vertices.iter().copied()).collect()
    }

    pub fn scripted_mask(&self) -> Vec<bool> {
        self.bodies.iter().flat_map(|b| b.scripted.iter().copied()).collect()
    }

    /// Whether two bodies interact through contact.
    pub fn interacts(&self, a: usize, b: usize) -> bool {
        a != b && self.bodies[a].group != self.bodies[b].group
    }

    /// Friction coefficient of a body pair: the pad's coefficient whenever a pad
    /// is involved, the ground coefficient against the ground, otherwise the smaller one.
    pub fn friction_between(&self, a: usize, b: usize) -> f64 {
        let (ba, bb) = (&self.bodies[a], &self.bodies[b]);
        if ba.kind == BodyKind::DeformablePad {
            ba.material.friction_coeff
        } else if bb.kind == BodyKind::DeformablePad {
            bb.material.friction_coeff
        } else if ba.kind == BodyKind::Ground || bb.kind == BodyKind::Ground {
            self.ground_friction
        } else {
            ba.material.friction_coeff.min(bb.material.friction_coeff)
        }
    }

    pub fn body_positions<'a>(&self, positions: &'a [Vec2], body: usize) -> &'a [Vec2] {
        &positions[self.body_range(body)]
    }

    /// Diagonal of the axis-aligned bounding box of the initial scene.
    pub fn bbox_diagonal(&self) -> f64 {
        let mut lo = Vec2::repeat(f64::INFINITY);
        let mut hi = Vec2::repeat(f64::NEG_INFINITY);
        for b in &self.bodies {
            for p in &b.mesh.vertices {
                lo = lo.inf(p);
                hi = hi.sup(p);
            }
        }
        (hi - lo).norm()
    }

    /// Minimum distance between the boundaries of two bodies (brute force).
    pub fn body_distance(&self, positions: &[Vec2], a: usize, b: usize) -> f64 {
        let mut best = f64::INFINITY;
        for (pa, eb) in [(a, b), (b, a)] {
            for p in self.points.iter().filter(|p| p.body == pa) {
                for e in self.edges.iter().filter(|e| e.body == eb) {
                    if let Ok((d, _)) = point_edge_distance(positions[p.vertex], positions[e.a], positions[e.b]) {
                        best = best.min(d);
                    }
                }
            }
        }
        best
    }

    /// Minimum distance over all interacting body pairs.
    pub fn min_interbody_distance(&self, positions: &[Vec2]) -> f64 {
        let mut best = f64::INFINITY;
        for p in &self.points {
            for e in &self.edges {
                if !self.interacts(p.body, e.body) {
                    continue;
                }
                if let Ok((d, _)) = point_edge_distance(positions[p.vertex], positions[e.a], positions[e.b]) {
                    best = best.min(d);
                }
            }
        }
        best
    }

    /// Signed element areas must stay positive; returns the smallest det F over
    /// all elements of non-scripted bodies.
    pub fn min_jacobian(&self, positions: &[Vec2]) -> f64 {
        let mut best = f64::INFINITY;
        for (bi, b) in self.bodies.iter().enumerate() {
            let x = self.body_positions(positions, bi);
            for (t, el) in b.mesh.triangles.iter().zip(&b.elements) {
                let f = el.deformation_gradient([x[t[0]], x[t[1]], x[t[2]]]);
                best = best.min(f.determinant());
            }
        }
        best
    }

    /// Current-over-rest pad thickness, minimized over rows, for pad `which` (0 or 1).
    pub fn pad_compression(&self, positions: &[Vec2], which: usize) -> f64 {
        let body = self.roles.pads[which];
        let rows = self.bodies[body].pad_rows.as_ref().expect("pad bodies carry row data");
        let x = self.body_positions(positions, body);
        let min_ratio = rows
            .rows
            .iter()
            .zip(&rows.rest_thickness)
            .map(|(&(f, b), &rest)| (x[b] - x[f]).norm() / rest)
            .fold(f64::INFINITY, f64::min);
        1.0 - min_ratio
    }

    /// Lowest vertex height of a body.
    pub fn lowest_point(&self, positions: &[Vec2], body: usize) -> f64 {
        self.body_positions(positions, body).iter().map(|p| p.y).fold(f64::INFINITY, f64::min)
    }
}

/// Parse a polygon file: one `x y` vertex per line (meters), counterclockwise.
/// Blank lines and lines starting with `#` are ignored.
pub fn read_polygon_file(path: &Path) -> Result<Vec<Vec2>> {
    let text = std::fs::read_to_string(path)?;
    parse_polygon(&text, &path.display().to_string())
}

pub fn parse_polygon(text: &str, source: &str) -> Result<Vec<Vec2>> {
    let mut pts = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |message: String| Error::Parse { path: source.to_string(), line: i + 1, message };
        let nums: Vec<f64> = line
            .split(|c: char| c.is_whitespace() || c == ',')
            .filter(|s| !s.is_empty())
            .map(|s| s.parse::<f64>().map_err(|e| err(format!("{s:?}: {e}"))))
            .collect::<Result<_>>()?;
        if nums.len() != 2 || !nums.iter().all(|v| v.is_finite()) {
            return Err(err(format!("expected two finite numbers, got {line:?}")));
        }
        pts.push(Vec2::new(nums[0], nums[1]));
    }
    Ok(pts)
}

/// Object outline in its own frame (centroid at the origin), before placement.
fn object_outline(config: &ScenarioConfig) -> Result<Vec<Vec2>> {
    let o = &config.object;
    let s = o.scale;
    let poly = match (&o.polygon_file, o.primitive) {
        (Some(path), _) => {
            let pts = read_polygon_file(&config.resolve_path(path))?;
            pts.into_iter().map(|p| p * s).collect()
        }
        (None, None | Some(Primitive::Square)) => rectangle(-0.5 * s, -0.5 * s, 0.5 * s, 0.5 * s),
        (None, Some(Primitive::Triangle)) => regular_polygon(3, 0.5 * s, -std::f64::consts::FRAC_PI_2),
        (None, Some(Primitive::Pentagon)) => regular_polygon(5, 0.5 * s, -std::f64::consts::FRAC_PI_2),
        (None, Some(Primitive::Hexagon)) => regular_polygon(6, 0.5 * s, 0.0),
        (None, Some(Primitive::Circle)) => regular_polygon(16, 0.5 * s, 0.0),
    };
    check_simple(&poly)?;
    if polygon_area(&poly) <= 0.0 {
        return Err(Error::InvalidInput("object polygon must be counterclockwise".into()));
    }
    let c = polygon_centroid(&poly);
    Ok(poly.into_iter().map(|p| p - c).collect())
}

/// Object outline in world coordinates. Without an explicit height the object
/// rests with its lowest vertex exactly `dhat` above the ground.
pub fn placed_object_polygon(config: &ScenarioConfig) -> Result<Vec<Vec2>> {
    let outline = object_outline(config)?;
    let pose = config.object.pose;
    let rot = nalgebra::Rotation2::new(pose.theta);
    let rotated: Vec<Vec2> = outline.iter().map(|p| rot * p).collect();
    let y = match pose.y {
        Some(y) => y,
        None => config.physics.dhat - rotated.iter().map(|p| p.y).fold(f64::INFINITY, f64::min),
    };
    let shift = Vec2::new(pose.x, y);
    Ok(rotated.into_iter().map(|p| p + shift).collect())
}

pub fn placed_object_centroid(config: &ScenarioConfig) -> Result<Vec2> {
    Ok(polygon_centroid(&placed_object_polygon(config)?))
}

const GROUND_HALF_WIDTH: f64 = 0.25;
const GROUND_DEPTH: f64 = 0.02;
const BACKING_DENSITY: f64 = 2700.0;
const GROUND_DENSITY: f64 = 2000.0;

/// Build the scene for the grasp stored in `config`.
pub fn build_scene(config: &ScenarioConfig) -> Result<Scene> {
    let u = config.grasp_spec()?;
    build_scene_for(config, &u)
}

/// Build the scene with the jaws placed for grasp `u`: pad faces `u.max_width`
/// apart, symmetric about `u.center` along the grasp axis.
pub fn build_scene_for(config: &ScenarioConfig, u: &GraspSpec) -> Result<Scene> {
    config.check()?;
    let object_poly = placed_object_polygon(config)?;
    let object_mesh = triangulate(&object_poly, config.object.subdivision)?;
    let n_obj = object_mesh.vertices.len();

    let jaw = &config.jaw;
    let geometry = PadGeometry {
        thickness: jaw.pad_thickness,
        height: jaw.pad_height,
        profile: u.jaw_profile,
        sagitta: jaw.rounded_sagitta,
        max_edge: jaw.max_edge,
    };
    let pad = pad_mesh(&geometry);
    let half_h = 0.5 * jaw.pad_height;
    let backing_local =
        triangulate(&rectangle(jaw.pad_thickness, -half_h, jaw.pad_thickness + jaw.backing_thickness, half_h), 0)?;

    let axis = Vec2::new(u.axis_angle.cos(), u.axis_angle.sin());
    let normal = Vec2::new(-axis.y, axis.x);
    let half_w = 0.5 * u.max_width;

    let mut bodies = Vec::with_capacity(6);
    bodies.push(Body::new(
        "object",
        object_mesh,
        config.object.material,
        BodyKind::RigidObject,
        vec![false; n_obj],
        0,
    )?);

    let mut pads = [0; 2];
    let mut backings = [0; 2];
    for (k, side) in [-1.0f64, 1.0].into_iter().enumerate() {
        let place = |p: Vec2| u.center + axis * (side * (half_w + p.x)) + normal * p.y;
        let pad_world = pad.mesh.transformed(place);
        let scripted: Vec<bool> = (0..pad_world.vertices.len()).map(|v| v % (pad.nx + 1) == pad.nx).collect();
        let rows: Vec<(usize, usize)> = (0..=pad.ny).map(|j| (pad.face_vertex(j), pad.back_vertex(j))).collect();
        let rest_thickness =
            rows.iter().map(|&(f, b)| (pad_world.vertices[b] - pad_world.vertices[f]).norm()).collect();
        let mut pad_body =
            Body::new(&format!("pad{}", k + 1), pad_world, jaw.pad_material, BodyKind::DeformablePad, scripted, k + 1)?;
        pad_body.pad_rows = Some(PadRows { rows, rest_thickness });
        pads[k] = bodies.len();
        bodies.push(pad_body);

        let backing_world = backing_local.transformed(place);
        let nb = backing_world.vertices.len();
        backings[k] = bodies.len();
        bodies.push(Body::new(
            &format!("backing{}", k + 1),
            backing_world,
            Material::rigid(BACKING_DENSITY, jaw.pad_material.friction_coeff),
            BodyKind::RigidBacking,
            vec![true; nb],
            k + 1,
        )?);
    }

    let ground_mesh = triangulate(&rectangle(-GROUND_HALF_WIDTH, -GROUND_DEPTH, GROUND_HALF_WIDTH, 0.0), 0)?;
    let ng = ground_mesh.vertices.len();
    let ground = bodies.len();
    bodies.push(Body::new(
        "ground",
        ground_mesh,
        Material::rigid(GROUND_DENSITY, config.physics.ground_friction),
        BodyKind::Ground,
        vec![true; ng],
        3,
    )?);

    let roles = SceneRoles { object: 0, pads, backings, ground };
    let scene = Scene::new(
        bodies,
        config.gravity(),
        config.physics.dhat,
        config.physics.kappa,
        config.physics.ground_friction,
        roles,
        axis,
    );
    if let Some(v) = validate_positions(&scene, &scene.initial_positions())
        .violations
        .iter()
        .find(|v| matches!(v, Violation::Interpenetration { .. }))
    {
        let Violation::Interpenetration { body_a, body_b, distance } = *v else { unreachable!() };
        return Err(Error::Interpenetration { body_a, body_b, distance });
    }
    Ok(scene)
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    InvertedElement {
        body: usize,
        element: usize,
        signed_area: f64,
    },
    /// `distance` is negative (penetration depth) or zero (touching).
    Interpenetration {
        body_a: usize,
        body_b: usize,
        distance: f64,
    },
    OrphanVertex {
        body: usize,
        vertex: usize,
    },
    DuplicateVertex {
        body: usize,
        first: usize,
        second: usize,
    },
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

impl std::fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.violations.is_empty() {
            return writeln!(f, "scene valid");
        }
        for v in &self.violations {
            match v {
                Violation::InvertedElement { body, element, signed_area } => {
                    writeln!(f, "inverted element: body {body} triangle {element} (signed area {signed_area:e})")?
                }
                Violation::Interpenetration { body_a, body_b, distance } => {
                    writeln!(f, "interpenetration: bodies {body_a} and {body_b} (distance {distance:e} m)")?
                }
                Violation::OrphanVertex { body, vertex } => writeln!(f, "orphan vertex: body {body} vertex {vertex}")?,
                Violation::DuplicateVertex { body, first, second } => {
                    writeln!(f, "duplicate vertices: body {body} vertices {first} and {second}")?
                }
            }
        }
        Ok(())
    }
}

fn point_in_mesh(p: Vec2, x: &[Vec2], mesh: &TriMesh) -> bool {
    mesh.triangles.iter().any(|t| {
        let (a, b, c) = (x[t[0]], x[t[1]], x[t[2]]);
        cross(b - a, p - a) >= 0.0 && cross(c - b, p - b) >= 0.0 && cross(a - c, p - c) >= 0.0
    })
}

/// Signed boundary distance between two bodies: positive gap, or minus the
/// deepest penetration of a vertex of one body into the other.
pub fn signed_body_distance(scene: &Scene, positions: &[Vec2], a: usize, b: usize) -> f64 {
    let mut depth: f64 = 0.0;
    let mut inside = false;
    for (pa, pb) in [(a, b), (b, a)] {
        let xb = scene.body_positions(positions, pb);
        for p in scene.boundary_points().iter().filter(|p| p.body == pa) {
            let x = positions[p.vertex];
            if point_in_mesh(x, xb, &scene.bodies[pb].mesh) {
                inside = true;
                let d = scene
                    .boundary_edges()
                    .iter()
                    .filter(|e| e.body == pb)
                    .filter_map(|e| point_edge_distance(x, positions[e.a], positions[e.b]).ok().map(|r| r.0))
                    .fold(f64::INFINITY, f64::min);
                depth = depth.max(d);
            }
        }
    }
    if inside {
        -depth
    } else {
        scene.body_distance(positions, a, b)
    }
}

pub fn validate_scene(scene: &Scene) -> ValidationReport {
    validate_positions(scene, &scene.initial_positions())
}

/// Check mesh and placement invariants for the given vertex positions.
pub fn validate_positions(scene: &Scene, positions: &[Vec2]) -> ValidationReport {
    let mut violations = Vec::new();
    for (bi, body) in scene.bodies.iter().enumerate() {
        let x = scene.body_positions(positions, bi);
        let mut used = vec![false; x.len()];
        for (e, t) in body.mesh.triangles.iter().enumerate() {
            let area = signed_area(x[t[0]], x[t[1]], x[t[2]]);
            if area <= 0.0 {
                violations.push(Violation::InvertedElement { body: bi, element: e, signed_area: area });
            }
            for &v in t {
                used[v] = true;
            }
        }
        for (v, u) in used.iter().enumerate() {
            if !u {
                violations.push(Violation::OrphanVertex { body: bi, vertex: v });
            }
        }
        for i in 0..x.len() {
            for j in (i + 1)..x.len() {
                if (x[i] - x[j]).norm() < 1e-9 {
                    violations.push(Violation::DuplicateVertex { body: bi, first: i, second: j });
                }
            }
        }
    }
    for a in 0..scene.bodies.len() {
        for b in (a + 1)..scene.bodies.len() {
            if !scene.interacts(a, b) {
                continue;
            }
            let d = signed_body_distance(scene, positions, a, b);
            if d <= 0.0 {
                violations.push(Violation::Interpenetration { body_a: a, body_b: b, distance: d });
            }
        }
    }
    ValidationReport { violations }
}

/// Lumped vertex masses: each triangle gives a third of `density * area` to
/// each of its vertices.
pub fn lumped_masses(scene: &Scene) -> Vec<f64> {
    let mut m = vec![0.0; scene.n_vertices()];
    for (bi, body) in scene.bodies.iter().enumerate() {
        let off = scene.offset(bi);
        for (t, el) in body.mesh.triangles.iter().zip(&body.elements) {
            let share = body.material.density * el.rest_area / 3.0;
            for &v in t {
                m[off + v] += share;
            }
        }
    }
    m
}

/// Lumped masses of a single body.
pub fn body_lumped_masses(body: &Body) -> Vec<f64> {
    let mut m = vec![0.0; body.n_vertices()];
    for (t, el) in body.mesh.triangles.iter().zip(&body.elements) {
        for &v in t {
            m[v] += body.material.density * el.rest_area / 3.0;
        }
    }
    m
}
