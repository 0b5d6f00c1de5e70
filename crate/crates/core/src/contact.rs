//! Point-edge log-barrier contact, lagged smoothed friction, broad phase and
//! continuous collision detection.

use std::collections::HashMap;

use nalgebra::{Matrix2, SMatrix, SVector};

use crate::linalg::{project_psd, SparseSym};
use crate::scene::{cross, Scene};
use crate::{Error, Result, Vec2};

type Vec6 = SVector<f64, 6>;
type Mat6 = SMatrix<f64, 6, 6>;

/// Distance from `p` to segment `ab` and the closest-point parameter `t`.
pub fn point_edge_distance(p: Vec2, a: Vec2, b: Vec2) -> Result<(f64, f64)> {
    let e = b - a;
    let len2 = e.norm_squared();
    if len2 < 1e-24 {
        return Err(Error::DegenerateEdge);
    }
    let t = ((p - a).dot(&e) / len2).clamp(0.0, 1.0);
    Ok(((p - (a + e * t)).norm(), t))
}

/// b(d) = -(d - dhat)^2 ln(d / dhat) on (0, dhat), zero beyond.
pub fn barrier(d: f64, dhat: f64) -> Result<f64> {
    if !(d > 0.0) {
        return Err(Error::BarrierDomain(d));
    }
    if d >= dhat {
        return Ok(0.0);
    }
    Ok(-(d - dhat).powi(2) * (d / dhat).ln())
}

/// b'(d).
pub fn barrier_derivative(d: f64, dhat: f64) -> f64 {
    if d >= dhat {
        return 0.0;
    }
    let r = d - dhat;
    -2.0 * r * (d / dhat).ln() - r * r / d
}

/// b''(d).
pub fn barrier_second_derivative(d: f64, dhat: f64) -> f64 {
    if d >= dhat {
        return 0.0;
    }
    let r = d - dhat;
    -2.0 * (d / dhat).ln() - 4.0 * r / d + r * r / (d * d)
}

/// A boundary point of one body within `dhat` of a boundary edge of another.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContactPair {
    pub point_body: usize,
    /// Global vertex index.
    pub point: usize,
    pub edge_body: usize,
    /// Index into `Scene::boundary_edges`.
    pub edge: usize,
    /// Global vertex indices of the edge endpoints.
    pub a: usize,
    pub b: usize,
    pub distance: f64,
    pub t: f64,
    pub dhat: f64,
}

/// Lagged friction data for one contact pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrictionDatum {
    pub point: usize,
    pub a: usize,
    pub b: usize,
    /// Closest-point parameter on the edge at the lagged state.
    pub t: f64,
    /// Unit edge direction at the lagged state.
    pub tangent: Vec2,
    /// Lagged normal force magnitude (N per meter of extrusion).
    pub lambda: f64,
    pub mu: f64,
}

#[derive(Debug, Clone, Copy)]
struct Aabb {
    lo: Vec2,
    hi: Vec2,
}

impl Aabb {
    fn of(points: &[Vec2], pad: f64) -> Self {
        let mut lo = points[0];
        let mut hi = points[0];
        for p in &points[1..] {
            lo = lo.inf(p);
            hi = hi.sup(p);
        }
        Self { lo: lo - Vec2::repeat(pad), hi: hi + Vec2::repeat(pad) }
    }

    fn overlaps(&self, o: &Aabb) -> bool {
        self.lo.x <= o.hi.x && o.lo.x <= self.hi.x && self.lo.y <= o.hi.y && o.lo.y <= self.hi.y
    }
}

const MAX_CELLS_PER_BOX: i64 = 4096;

/// Uniform-grid broad phase. Returns `(point slot, edge slot)` candidates whose
/// boxes overlap and whose bodies interact, sorted.
fn broad_phase(scene: &Scene, point_boxes: &[Aabb], edge_boxes: &[Aabb]) -> Vec<(usize, usize)> {
    if point_boxes.is_empty() || edge_boxes.is_empty() {
        return Vec::new();
    }
    let mean_extent = edge_boxes.iter().map(|b| (b.hi - b.lo).max()).sum::<f64>() / edge_boxes.len() as f64;
    let cell = mean_extent.max(1e-9);
    let key = |v: f64| (v / cell).floor() as i64;
    let span = |b: &Aabb| ((key(b.lo.x), key(b.hi.x)), (key(b.lo.y), key(b.hi.y)));

    let mut grid: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
    let mut oversized = Vec::new();
    for (k, b) in edge_boxes.iter().enumerate() {
        let ((x0, x1), (y0, y1)) = span(b);
        if (x1 - x0 + 1) * (y1 - y0 + 1) > MAX_CELLS_PER_BOX {
            oversized.push(k);
            continue;
        }
        for i in x0..=x1 {
            for j in y0..=y1 {
                grid.entry((i, j)).or_default().push(k);
            }
        }
    }

    let points = scene.boundary_points();
    let edges = scene.boundary_edges();
    let mut out = Vec::new();
    let mut cand = Vec::new();
    for (pk, pb) in point_boxes.iter().enumerate() {
        cand.clear();
        cand.extend_from_slice(&oversized);
        let ((x0, x1), (y0, y1)) = span(pb);
        if (x1 - x0 + 1) * (y1 - y0 + 1) > MAX_CELLS_PER_BOX {
            cand.extend(0..edge_boxes.len());
        } else {
            for i in x0..=x1 {
                for j in y0..=y1 {
                    if let Some(list) = grid.get(&(i, j)) {
                        cand.extend_from_slice(list);
                    }
                }
            }
        }
        cand.sort_unstable();
        cand.dedup();
        for &ek in &cand {
            if scene.interacts(points[pk].body, edges[ek].body) && pb.overlaps(&edge_boxes[ek]) {
                out.push((pk, ek));
            }
        }
    }
    out
}

/// All inter-body point-edge pairs closer than `dhat`, ordered by point vertex
/// then edge index.
pub fn active_pairs(scene: &Scene, positions: &[Vec2], dhat: f64) -> Vec<ContactPair> {
    let points = scene.boundary_points();
    let edges = scene.boundary_edges();
    let point_boxes: Vec<Aabb> = points.iter().map(|p| Aabb::of(&[positions[p.vertex]], dhat)).collect();
    let edge_boxes: Vec<Aabb> = edges.iter().map(|e| Aabb::of(&[positions[e.a], positions[e.b]], 0.0)).collect();
    broad_phase(scene, &point_boxes, &edge_boxes)
        .into_iter()
        .filter_map(|(pk, ek)| {
            let (p, e) = (points[pk], edges[ek]);
            let (d, t) = point_edge_distance(positions[p.vertex], positions[e.a], positions[e.b]).ok()?;
            (d < dhat).then_some(ContactPair {
                point_body: p.body,
                point: p.vertex,
                edge_body: e.body,
                edge: ek,
                a: e.a,
                b: e.b,
                distance: d,
                t,
                dhat,
            })
        })
        .collect()
}

/// Squared point-edge distance with its gradient and Hessian over `[p, a, b]`.
fn squared_distance_derivatives(p: Vec2, a: Vec2, b: Vec2) -> (f64, Vec6, Mat6) {
    let e = b - a;
    let len2 = e.norm_squared();
    let t = (p - a).dot(&e) / len2;
    let id = Matrix2::<f64>::identity();
    if t <= 0.0 || t >= 1.0 {
        // point-point with the nearer endpoint (slot 1 = a, slot 2 = b)
        let (q, slot) = if t <= 0.0 { (a, 1) } else { (b, 2) };
        let r = p - q;
        let mut g = Vec6::zeros();
        g.fixed_rows_mut::<2>(0).copy_from(&(r * 2.0));
        g.fixed_rows_mut::<2>(2 * slot).copy_from(&(-r * 2.0));
        let mut h = Mat6::zeros();
        h.fixed_view_mut::<2, 2>(0, 0).copy_from(&(id * 2.0));
        h.fixed_view_mut::<2, 2>(2 * slot, 2 * slot).copy_from(&(id * 2.0));
        h.fixed_view_mut::<2, 2>(0, 2 * slot).copy_from(&(id * -2.0));
        h.fixed_view_mut::<2, 2>(2 * slot, 0).copy_from(&(id * -2.0));
        return (r.norm_squared(), g, h);
    }
    // D = c^2 / L^2 with c = cross(b - a, p - a), L^2 = |b - a|^2
    let c = cross(e, p - a);
    let gc = Vec6::from_column_slice(&[a.y - b.y, b.x - a.x, b.y - p.y, p.x - b.x, p.y - a.y, a.x - p.x]);
    let mut hc = Mat6::zeros();
    for &(i, j, v) in &[(0, 3, 1.0), (0, 5, -1.0), (1, 4, 1.0), (1, 2, -1.0), (2, 5, 1.0), (3, 4, -1.0)] {
        hc[(i, j)] = v;
        hc[(j, i)] = v;
    }
    let gl = Vec6::from_column_slice(&[0.0, 0.0, -2.0 * e.x, -2.0 * e.y, 2.0 * e.x, 2.0 * e.y]);
    let mut hl = Mat6::zeros();
    for k in 0..2 {
        hl[(2 + k, 2 + k)] = 2.0;
        hl[(4 + k, 4 + k)] = 2.0;
        hl[(2 + k, 4 + k)] = -2.0;
        hl[(4 + k, 2 + k)] = -2.0;
    }
    let (l2, l4) = (len2, len2 * len2);
    let dist2 = c * c / l2;
    let g = gc * (2.0 * c / l2) - gl * (c * c / l4);
    let h = gc * gc.transpose() * (2.0 / l2) + hc * (2.0 * c / l2)
        - (gc * gl.transpose() + gl * gc.transpose()) * (2.0 * c / l4)
        - hl * (c * c / l4)
        + gl * gl.transpose() * (2.0 * c * c / (l4 * l2));
    (dist2, g, h)
}

/// Distance with gradient and Hessian over `[p, a, b]`.
pub fn distance_derivatives(p: Vec2, a: Vec2, b: Vec2) -> (f64, Vec6, Mat6) {
    let (dd, gd, hd) = squared_distance_derivatives(p, a, b);
    let d = dd.sqrt();
    let g = gd / (2.0 * d);
    let h = hd / (2.0 * d) - gd * gd.transpose() / (4.0 * d * d * d);
    (d, g, h)
}

fn pair_dofs(dofs: &[Option<usize>], verts: [usize; 3]) -> [Option<usize>; 6] {
    let mut out = [None; 6];
    for (k, &v) in verts.iter().enumerate() {
        if let Some(d) = dofs[v] {
            out[2 * k] = Some(d);
            out[2 * k + 1] = Some(d + 1);
        }
    }
    out
}

/// Add `scale * kappa * sum b(d)` derivatives into `grad`/`hess` for DOFs
/// mapped by `dofs` (one entry per global vertex). Returns `kappa * sum b(d)`.
#[allow(clippy::too_many_arguments)]
pub fn accumulate_contact(
    positions: &[Vec2],
    pairs: &[ContactPair],
    kappa: f64,
    dofs: &[Option<usize>],
    scale: f64,
    grad: &mut [f64],
    mut hess: Option<&mut SparseSym>,
) -> Result<f64> {
    let mut energy = 0.0;
    for pair in pairs {
        let (p, a, b) = (positions[pair.point], positions[pair.a], positions[pair.b]);
        let (d, gd, hd) = distance_derivatives(p, a, b);
        energy += kappa * barrier(d, pair.dhat)?;
        let b1 = barrier_derivative(d, pair.dhat);
        let ld = pair_dofs(dofs, [pair.point, pair.a, pair.b]);
        let g = gd * (scale * kappa * b1);
        for (k, slot) in ld.iter().enumerate() {
            if let Some(i) = *slot {
                grad[i] += g[k];
            }
        }
        if let Some(h) = hess.as_deref_mut() {
            let b2 = barrier_second_derivative(d, pair.dhat);
            let local = (gd * gd.transpose() * b2 + hd * b1) * (scale * kappa);
            h.add_block(&ld, &project_psd(&local));
        }
    }
    Ok(energy)
}

/// Barrier energy `kappa * sum b(d)`, its gradient over all vertices
/// (`[x0, y0, ...]`) and the per-pair PSD-projected Hessian.
pub fn contact_energy_grad_hess(
    positions: &[Vec2],
    pairs: &[ContactPair],
    kappa: f64,
) -> Result<(f64, Vec<f64>, SparseSym)> {
    let n = positions.len();
    let dofs: Vec<Option<usize>> = (0..n).map(|v| Some(2 * v)).collect();
    let mut g = vec![0.0; 2 * n];
    let mut h = SparseSym::new(2 * n);
    let e = accumulate_contact(positions, pairs, kappa, &dofs, 1.0, &mut g, Some(&mut h))?;
    Ok((e, g, h))
}

/// Friction data lagged at `positions` for the given pairs.
pub fn friction_data(scene: &Scene, positions: &[Vec2], pairs: &[ContactPair], kappa: f64) -> Vec<FrictionDatum> {
    pairs
        .iter()
        .filter_map(|pair| {
            let mu = scene.friction_between(pair.point_body, pair.edge_body);
            let lambda = kappa * barrier_derivative(pair.distance, pair.dhat).abs();
            if mu == 0.0 || lambda == 0.0 {
                return None;
            }
            let tangent = (positions[pair.b] - positions[pair.a]).normalize();
            Some(FrictionDatum { point: pair.point, a: pair.a, b: pair.b, t: pair.t, tangent, lambda, mu })
        })
        .collect()
}

/// Mollified sliding potential: smooth on [0, eps), linear beyond, f0(0) = 0.
pub fn f0(y: f64, eps: f64) -> f64 {
    if y < eps {
        y * y / eps - y * y * y / (3.0 * eps * eps)
    } else {
        y - eps / 3.0
    }
}

pub fn f0_derivative(y: f64, eps: f64) -> f64 {
    if y < eps {
        y * (2.0 - y / eps) / eps
    } else {
        1.0
    }
}

pub fn f0_second_derivative(y: f64, eps: f64) -> f64 {
    if y < eps {
        (2.0 - 2.0 * y / eps) / eps
    } else {
        0.0
    }
}

fn tangential_operator(datum: &FrictionDatum) -> Vec6 {
    let t = datum.tangent;
    let (wa, wb) = (-(1.0 - datum.t), -datum.t);
    Vec6::from_column_slice(&[t.x, t.y, wa * t.x, wa * t.y, wb * t.x, wb * t.y])
}

/// Relative tangential displacement of the point against the edge over the step.
pub fn tangential_displacement(positions: &[Vec2], prev: &[Vec2], datum: &FrictionDatum) -> f64 {
    let w = tangential_operator(datum);
    let du = [
        positions[datum.point] - prev[datum.point],
        positions[datum.a] - prev[datum.a],
        positions[datum.b] - prev[datum.b],
    ];
    (0..3).map(|k| w[2 * k] * du[k].x + w[2 * k + 1] * du[k].y).sum()
}

/// Add `scale * D` derivatives into `grad`/`hess`; returns D.
#[allow(clippy::too_many_arguments)]
pub fn accumulate_friction(
    positions: &[Vec2],
    prev: &[Vec2],
    data: &[FrictionDatum],
    eps_v: f64,
    h: f64,
    dofs: &[Option<usize>],
    scale: f64,
    grad: &mut [f64],
    mut hess: Option<&mut SparseSym>,
) -> f64 {
    let eps = eps_v * h;
    let mut energy = 0.0;
    for datum in data {
        let u = tangential_displacement(positions, prev, datum);
        let y = u.abs();
        let k = datum.mu * datum.lambda;
        energy += k * f0(y, eps);
        let w = tangential_operator(datum);
        let ld = pair_dofs(dofs, [datum.point, datum.a, datum.b]);
        let gs = scale * k * f0_derivative(y, eps) * u.signum();
        for (i, slot) in ld.iter().enumerate() {
            if let Some(d) = *slot {
                grad[d] += gs * w[i];
            }
        }
        if let Some(hm) = hess.as_deref_mut() {
            let c = scale * k * f0_second_derivative(y, eps);
            if c > 0.0 {
                hm.add_block(&ld, &(w * w.transpose() * c));
            }
        }
    }
    energy
}

/// Friction potential `D`, its gradient over all vertices and its Hessian.
pub fn friction_energy_grad_hess(
    positions: &[Vec2],
    prev: &[Vec2],
    data: &[FrictionDatum],
    eps_v: f64,
    h: f64,
) -> (f64, Vec<f64>, SparseSym) {
    let n = positions.len();
    let dofs: Vec<Option<usize>> = (0..n).map(|v| Some(2 * v)).collect();
    let mut g = vec![0.0; 2 * n];
    let mut hm = SparseSym::new(2 * n);
    let e = accumulate_friction(positions, prev, data, eps_v, h, &dofs, 1.0, &mut g, Some(&mut hm));
    (e, g, hm)
}

/// Roots of `c0 + c1 s + c2 s^2` in [0, 1], ascending. `None` if the polynomial
/// vanishes identically at the given tolerance.
fn unit_roots(c0: f64, c1: f64, c2: f64, tol: f64) -> Option<Vec<f64>> {
    let scale = c0.abs().max(c1.abs()).max(c2.abs());
    if scale <= tol {
        return None;
    }
    let mut roots = Vec::with_capacity(2);
    if c2.abs() <= 1e-12 * scale {
        if c1 != 0.0 {
            roots.push(-c0 / c1);
        }
    } else {
        let disc = c1 * c1 - 4.0 * c2 * c0;
        if disc < 0.0 {
            // grazing contact lost to rounding
            if disc >= -1e-10 * (c1 * c1).max((4.0 * c2 * c0).abs()) {
                roots.push(-c1 / (2.0 * c2));
            }
        } else {
            let q = -0.5 * (c1 + c1.signum() * disc.sqrt());
            if q != 0.0 {
                roots.push(q / c2);
                roots.push(c0 / q);
            } else {
                roots.push(0.0);
            }
        }
    }
    roots.retain(|s| (0.0..=1.0).contains(s));
    roots.sort_by(f64::total_cmp);
    Some(roots)
}

const T_SLACK: f64 = 1e-10;

/// Earliest `s` in [0, 1] at which point `p + s dp` touches segment
/// `(a + s da, b + s db)`.
pub fn point_edge_impact(p: Vec2, dp: Vec2, a: Vec2, da: Vec2, b: Vec2, db: Vec2) -> Option<f64> {
    let (q0, dq) = (p - a, dp - da);
    let (e0, de) = (b - a, db - da);
    let c0 = cross(e0, q0);
    let c1 = cross(e0, dq) + cross(de, q0);
    let c2 = cross(de, dq);
    let len = e0.norm() + q0.norm() + dq.norm() + de.norm();
    let tol = 1e-14 * len * len;
    let param = |s: f64| {
        let (q, e) = (q0 + dq * s, e0 + de * s);
        let l2 = e.norm_squared();
        (l2 > 0.0).then(|| q.dot(&e) / l2)
    };
    match unit_roots(c0, c1, c2, tol) {
        Some(roots) => roots.into_iter().find(|&s| param(s).is_some_and(|t| (-T_SLACK..=1.0 + T_SLACK).contains(&t))),
        None => {
            // collinear throughout: impact when the point enters the segment
            let inside = |s: f64| param(s).is_some_and(|t| (-T_SLACK..=1.0 + T_SLACK).contains(&t));
            if inside(0.0) {
                return Some(0.0);
            }
            // q.e = 0 (at a) and (q - e).e = 0 (at b)
            let g1 = (q0.dot(&e0), q0.dot(&de) + dq.dot(&e0), dq.dot(&de));
            let r = q0 - e0;
            let dr = dq - de;
            let g2 = (r.dot(&e0), r.dot(&de) + dr.dot(&e0), dr.dot(&de));
            let mut cands: Vec<f64> =
                [g1, g2].iter().filter_map(|&(a0, a1, a2)| unit_roots(a0, a1, a2, 0.0)).flatten().collect();
            cands.sort_by(f64::total_cmp);
            cands.into_iter().find(|&s| inside(s))
        }
    }
}

/// CCD safety factor applied to the earliest impact fraction.
pub const CCD_SAFETY: f64 = 0.9;

/// Largest step fraction along `direction` (one displacement per vertex) that
/// keeps every inter-body point-edge pair crossing-free.
pub fn ccd_max_step(scene: &Scene, positions: &[Vec2], direction: &[Vec2]) -> f64 {
    match earliest_impact(scene, positions, direction) {
        Some(s) => CCD_SAFETY * s,
        None => 1.0,
    }
}

/// Earliest impact fraction in [0, 1] over all inter-body pairs, if any.
pub fn earliest_impact(scene: &Scene, positions: &[Vec2], direction: &[Vec2]) -> Option<f64> {
    let points = scene.boundary_points();
    let edges = scene.boundary_edges();
    let swept = |v: usize| [positions[v], positions[v] + direction[v]];
    let point_boxes: Vec<Aabb> = points.iter().map(|p| Aabb::of(&swept(p.vertex), 0.0)).collect();
    let edge_boxes: Vec<Aabb> = edges
        .iter()
        .map(|e| {
            let (a, b) = (swept(e.a), swept(e.b));
            Aabb::of(&[a[0], a[1], b[0], b[1]], 0.0)
        })
        .collect();
    let mut earliest: Option<f64> = None;
    for (pk, ek) in broad_phase(scene, &point_boxes, &edge_boxes) {
        let (p, e) = (points[pk].vertex, edges[ek]);
        let (dp, da, db) = (direction[p], direction[e.a], direction[e.b]);
        if dp == da && dp == db {
            continue;
        }
        if let Some(s) = point_edge_impact(positions[p], dp, positions[e.a], da, positions[e.b], db) {
            earliest = Some(earliest.map_or(s, |m: f64| m.min(s)));
        }
    }
    earliest
}
