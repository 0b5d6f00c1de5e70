//! Independent reference computations shared by the integration and acceptance tests.
#![allow(dead_code)]

use std::collections::BTreeMap;

use gripsim::scene::Scene;
use gripsim::Vec2;

fn cross(a: Vec2, b: Vec2) -> f64 {
    a.x * b.y - a.y * b.x
}

/// Distance from `p` to segment `ab` by clamped projection.
pub fn segment_distance(p: Vec2, a: Vec2, b: Vec2) -> f64 {
    let e = b - a;
    let t = ((p - a).dot(&e) / e.dot(&e)).clamp(0.0, 1.0);
    (p - (a + e * t)).norm()
}

/// Every inter-body (point, edge index) pair closer than `dhat`, by exhaustive scan.
pub fn brute_force_pairs(scene: &Scene, x: &[Vec2], dhat: f64) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for p in scene.boundary_points() {
        for (k, e) in scene.boundary_edges().iter().enumerate() {
            if scene.interacts(p.body, e.body) && segment_distance(x[p.vertex], x[e.a], x[e.b]) < dhat {
                out.push((p.vertex, k));
            }
        }
    }
    out.sort_unstable();
    out
}

fn boxes_overlap(p: [Vec2; 2], e: [Vec2; 4]) -> bool {
    let (pmin, pmax) = (p[0].inf(&p[1]), p[0].sup(&p[1]));
    let emin = e.iter().fold(e[0], |m, v| m.inf(v));
    let emax = e.iter().fold(e[0], |m, v| m.sup(v));
    pmin.x <= emax.x && emin.x <= pmax.x && pmin.y <= emax.y && emin.y <= pmax.y
}

/// Smallest point-edge distance between interacting bodies.
pub fn min_separation(scene: &Scene, x: &[Vec2]) -> f64 {
    let mut best = f64::INFINITY;
    for p in scene.boundary_points() {
        for e in scene.boundary_edges() {
            if scene.interacts(p.body, e.body) {
                best = best.min(segment_distance(x[p.vertex], x[e.a], x[e.b]));
            }
        }
    }
    best
}

/// Count of sampled point-edge crossings along the straight path from `x0` to
/// `x1`, using `substeps` uniform samples per pair.
pub fn sampled_crossings(scene: &Scene, x0: &[Vec2], x1: &[Vec2], substeps: usize) -> usize {
    let mut crossings = 0;
    for p in scene.boundary_points() {
        for e in scene.boundary_edges() {
            if !scene.interacts(p.body, e.body) {
                continue;
            }
            let (v, a, b) = (p.vertex, e.a, e.b);
            if !boxes_overlap([x0[v], x1[v]], [x0[a], x1[a], x0[b], x1[b]]) {
                continue;
            }
            let at = |s: f64| {
                let lerp = |i: usize| x0[i] + (x1[i] - x0[i]) * s;
                let (q, ea) = (lerp(v) - lerp(a), lerp(b) - lerp(a));
                (cross(ea, q), q.dot(&ea) / ea.dot(&ea))
            };
            let (mut c_prev, mut t_prev) = at(0.0);
            for k in 1..=substeps {
                let (c, t) = at(k as f64 / substeps as f64);
                let on_edge = (0.0..=1.0).contains(&t) || (0.0..=1.0).contains(&t_prev);
                if on_edge && (c == 0.0 || c.signum() != c_prev.signum()) {
                    crossings += 1;
                    break;
                }
                (c_prev, t_prev) = (c, t);
            }
        }
    }
    crossings
}

/// Smallest signed triangle area over all bodies, relative to the rest area.
pub fn min_area_ratio(scene: &Scene, x: &[Vec2]) -> f64 {
    let mut best = f64::INFINITY;
    for (bi, body) in scene.bodies.iter().enumerate() {
        let off = scene.offset(bi);
        for t in &body.mesh.triangles {
            let r = &body.mesh.rest_positions;
            let rest = cross(r[t[1]] - r[t[0]], r[t[2]] - r[t[0]]);
            let (a, b, c) = (x[off + t[0]], x[off + t[1]], x[off + t[2]]);
            best = best.min(cross(b - a, c - a) / rest);
        }
    }
    best
}

/// Central-difference gradient of `f` at `x`.
pub fn central_gradient(f: impl Fn(&[f64]) -> f64, x: &[f64], step: f64) -> Vec<f64> {
    let mut y = x.to_vec();
    (0..x.len())
        .map(|i| {
            y[i] = x[i] + step;
            let fp = f(&y);
            y[i] = x[i] - step;
            let fm = f(&y);
            y[i] = x[i];
            (fp - fm) / (2.0 * step)
        })
        .collect()
}

pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt();
    let norm: f64 = b.iter().map(|q| q * q).sum::<f64>().sqrt();
    diff / norm.max(f64::MIN_POSITIVE)
}

pub fn flatten(x: &[Vec2]) -> Vec<f64> {
    x.iter().flat_map(|p| [p.x, p.y]).collect()
}

pub fn unflatten(x: &[f64]) -> Vec<Vec2> {
    x.chunks(2).map(|c| Vec2::new(c[0], c[1])).collect()
}

/// Compressible Neo-Hookean density written out from E and nu.
pub fn neo_hookean_density(f: [[f64; 2]; 2], youngs: f64, nu: f64) -> f64 {
    let mu = youngs / (2.0 * (1.0 + nu));
    let lambda = youngs * nu / ((1.0 + nu) * (1.0 - 2.0 * nu));
    let j = f[0][0] * f[1][1] - f[0][1] * f[1][0];
    let frob = f[0][0].powi(2) + f[0][1].powi(2) + f[1][0].powi(2) + f[1][1].powi(2);
    0.5 * mu * (frob - 2.0) - mu * j.ln() + 0.5 * lambda * j.ln().powi(2)
}

/// Confusion counts (tp, fp, tn, fn) by direct enumeration.
pub fn tally(preds: &BTreeMap<String, f64>, labels: &BTreeMap<String, f64>, threshold: f64) -> [usize; 4] {
    let mut c = [0; 4];
    for (id, &r) in preds {
        let p = r >= threshold;
        let l = labels[id] >= threshold;
        let slot = match (p, l) {
            (true, true) => 0,
            (true, false) => 1,
            (false, false) => 2,
            (false, true) => 3,
        };
        c[slot] += 1;
    }
    c
}

fn det3(m: [[f64; 3]; 3]) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

/// Whether `target` lies in the convex hull of `points` in R^3, by searching
/// for an enclosing tetrahedron (Caratheodory) with barycentric coordinates
/// computed by Cramer's rule.
pub fn hull_contains(points: &[[f64; 3]], target: [f64; 3], tol: f64) -> bool {
    let n = points.len();
    let sub = |a: [f64; 3], b: [f64; 3]| [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
    for i in 0..n {
        for j in i + 1..n {
            for k in j + 1..n {
                for l in k + 1..n {
                    let p0 = points[i];
                    let cols = [sub(points[j], p0), sub(points[k], p0), sub(points[l], p0)];
                    let m = [
                        [cols[0][0], cols[1][0], cols[2][0]],
                        [cols[0][1], cols[1][1], cols[2][1]],
                        [cols[0][2], cols[1][2], cols[2][2]],
                    ];
                    let d = det3(m);
                    let scale = cols.iter().map(|c| c.iter().map(|v| v * v).sum::<f64>().sqrt()).product::<f64>();
                    if d.abs() <= 1e-12 * scale {
                        continue;
                    }
                    let r = sub(target, p0);
                    let mut w = [0.0; 3];
                    for (c, wc) in w.iter_mut().enumerate() {
                        let mut mc = m;
                        for row in 0..3 {
                            mc[row][c] = r[row];
                        }
                        *wc = det3(mc) / d;
                    }
                    let w0 = 1.0 - w[0] - w[1] - w[2];
                    if w.iter().chain([&w0]).all(|&v| v >= -tol) {
                        return true;
                    }
                }
            }
        }
    }
    false
}

/// Wrench-space vertices of one contact's admissible set: the origin and the four
/// corners of `|ft| <= mu fn`, `|tau| <= gamma fn` at `fn = fmax`.
pub fn contact_wrench_vertices(point: Vec2, normal: Vec2, com: Vec2, mu: f64, fmax: f64, gamma: f64) -> Vec<[f64; 3]> {
    let tangent = Vec2::new(-normal.y, normal.x);
    let r = point - com;
    let mut out = vec![[0.0; 3]];
    for st in [-1.0, 1.0] {
        for sg in [-1.0, 1.0] {
            let f = normal * fmax + tangent * (st * mu * fmax);
            out.push([f.x, f.y, cross(r, f) + sg * gamma * fmax]);
        }
    }
    out
}

/// Pairwise sums of two vertex sets (vertices of their Minkowski sum's hull).
pub fn minkowski_sum(a: &[[f64; 3]], b: &[[f64; 3]]) -> Vec<[f64; 3]> {
    a.iter().flat_map(|p| b.iter().map(move |q| [p[0] + q[0], p[1] + q[1], p[2] + q[2]])).collect()
}
