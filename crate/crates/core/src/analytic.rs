//! Quasistatic planar soft-point-contact baseline: can two jaw contacts hold the
//! object against gravity?

use minilp::{ComparisonOp, OptimizationDirection, Problem};

use crate::config::ScenarioConfig;
use crate::grasp::GraspSpec;
use crate::scene::{cross, placed_object_polygon, polygon_area, polygon_centroid};
use crate::{Result, Vec2};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContactModelInput {
    pub points: [Vec2; 2],
    /// Unit normals pointing into the object.
    pub normals: [Vec2; 2],
    pub mu: f64,
    /// Upper bound on each normal force (N).
    pub max_normal_force: f64,
    /// Bound on the contact torque per unit normal force (m).
    pub torsion_ratio: f64,
    /// kg
    pub mass: f64,
    pub center_of_mass: Vec2,
    /// Gravitational acceleration magnitude, acting along -y.
    pub gravity: f64,
}

/// Contact points and inward normals of the two jaws.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JawContacts {
    pub points: [Vec2; 2],
    pub normals: [Vec2; 2],
}

/// Relative tolerance for snapping a hit onto a polygon vertex.
const VERTEX_SNAP: f64 = 1e-9;

/// Intersect the closing path (the axis between the open jaws) with the polygon
/// boundary. Jaw 1 closes along +axis and touches the first crossing, jaw 2
/// the last. The normal is the inward edge normal, or the closing direction
/// when the hit is a vertex.
pub fn find_contacts(polygon: &[Vec2], u: &GraspSpec) -> Option<JawContacts> {
    let axis = Vec2::new(u.axis_angle.cos(), u.axis_angle.sin());
    let n = polygon.len();
    // (line parameter, inward normal, hit on a vertex)
    let mut hits: Vec<(f64, Vec2, bool)> = Vec::new();
    for i in 0..n {
        let (p, q) = (polygon[i], polygon[(i + 1) % n]);
        let e = q - p;
        let denom = cross(axis, e);
        if denom.abs() < 1e-15 * e.norm() {
            continue;
        }
        // center + s axis = p + r e
        let w = p - u.center;
        let s = cross(w, e) / denom;
        let r = cross(w, axis) / denom;
        if !(-VERTEX_SNAP..=1.0 + VERTEX_SNAP).contains(&r) || s.abs() > 0.5 * u.max_width {
            continue;
        }
        let on_vertex = r <= VERTEX_SNAP || r >= 1.0 - VERTEX_SNAP;
        hits.push((s, Vec2::new(-e.y, e.x).normalize(), on_vertex));
    }
    let first = hits.iter().copied().min_by(|a, b| a.0.total_cmp(&b.0))?;
    let last = hits.iter().copied().max_by(|a, b| a.0.total_cmp(&b.0))?;
    let normal = |hit: (f64, Vec2, bool), closing: Vec2| if hit.2 { closing } else { hit.1 };
    Some(JawContacts {
        points: [u.center + axis * first.0, u.center + axis * last.0],
        normals: [normal(first, axis), normal(last, -axis)],
    })
}

/// Feasibility of contact forces within friction, normal-force and torque
/// limits that cancel the gravity wrench about the center of mass.
pub fn wrench_resistance(input: &ContactModelInput) -> bool {
    let weight = input.mass * input.gravity;
    let mut lp = Problem::new(OptimizationDirection::Minimize);
    let mut rows: [Vec<(minilp::Variable, f64)>; 3] = Default::default();
    for i in 0..2 {
        let n = input.normals[i];
        let t = Vec2::new(-n.y, n.x);
        let r = input.points[i] - input.center_of_mass;
        let fn_ = lp.add_var(0.0, (0.0, input.max_normal_force));
        let ft = lp.add_var(0.0, (f64::NEG_INFINITY, f64::INFINITY));
        let tau = lp.add_var(0.0, (f64::NEG_INFINITY, f64::INFINITY));
        lp.add_constraint([(ft, 1.0), (fn_, -input.mu)], ComparisonOp::Le, 0.0);
        lp.add_constraint([(ft, -1.0), (fn_, -input.mu)], ComparisonOp::Le, 0.0);
        lp.add_constraint([(tau, 1.0), (fn_, -input.torsion_ratio)], ComparisonOp::Le, 0.0);
        lp.add_constraint([(tau, -1.0), (fn_, -input.torsion_ratio)], ComparisonOp::Le, 0.0);
        rows[0].extend([(fn_, n.x), (ft, t.x)]);
        rows[1].extend([(fn_, n.y), (ft, t.y)]);
        rows[2].extend([(fn_, cross(r, n)), (ft, cross(r, t)), (tau, 1.0)]);
    }
    let rhs = [0.0, weight, 0.0];
    for (row, b) in rows.iter_mut().zip(rhs) {
        let plus = lp.add_var(1.0, (0.0, f64::INFINITY));
        let minus = lp.add_var(1.0, (0.0, f64::INFINITY));
        row.extend([(plus, 1.0), (minus, -1.0)]);
        lp.add_constraint(row.iter(), ComparisonOp::Eq, b);
    }
    match lp.solve() {
        Ok(sol) => sol.objective() <= 1e-9 * weight.max(1.0),
        Err(_) => false,
    }
}

/// Analytic success prediction for grasp `u` on the configured object.
pub fn predict(config: &ScenarioConfig, u: &GraspSpec) -> Result<bool> {
    let polygon = placed_object_polygon(config)?;
    let Some(contacts) = find_contacts(&polygon, u) else {
        return Ok(false);
    };
    let a = &config.analytic;
    let input = ContactModelInput {
        points: contacts.points,
        normals: contacts.normals,
        mu: config.jaw.pad_material.friction_coeff,
        max_normal_force: a.max_normal_force,
        torsion_ratio: a.torsion_ratio,
        mass: config.object.material.density * polygon_area(&polygon) * a.depth,
        center_of_mass: polygon_centroid(&polygon),
        gravity: -config.physics.gravity[1],
    };
    Ok(wrench_resistance(&input))
}
