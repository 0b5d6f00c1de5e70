//! Compressible Neo-Hookean strain energy on linear triangles, with exact
//! gradients and per-element PSD-projected Hessians.

use nalgebra::{Matrix2, SMatrix, SVector};

use crate::linalg::{project_psd, SparseSym};
use crate::scene::{Body, Material};
use crate::{Error, Result, Vec2};

type Vec4 = SVector<f64, 4>;
type Mat4 = SMatrix<f64, 4, 4>;
pub type Vec6 = SVector<f64, 6>;
pub type Mat6 = SMatrix<f64, 6, 6>;

/// Lamé parameters `(lambda, mu)` of an isotropic material.
pub fn lame(youngs_modulus: f64, poisson_ratio: f64) -> (f64, f64) {
    let (e, nu) = (youngs_modulus, poisson_ratio);
    (e * nu / ((1.0 + nu) * (1.0 - 2.0 * nu)), e / (2.0 * (1.0 + nu)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ElementPrecomp {
    pub dm_inv: Matrix2<f64>,
    pub rest_area: f64,
    pub lambda: f64,
    pub mu: f64,
    /// d vec(F) / d x, with vec column-major and x = [x0, y0, x1, y1, x2, y2].
    dfdx: SMatrix<f64, 4, 6>,
}

impl ElementPrecomp {
    /// `None` if the rest triangle is degenerate or clockwise.
    pub fn new(rest: [Vec2; 3], material: &Material) -> Option<Self> {
        let dm = Matrix2::from_columns(&[rest[1] - rest[0], rest[2] - rest[0]]);
        let rest_area = 0.5 * dm.determinant();
        if !(rest_area > 0.0) {
            return None;
        }
        let dm_inv = dm.try_inverse()?;
        let (lambda, mu) = lame(material.youngs_modulus, material.poisson_ratio);
        let mut dfdx = SMatrix::<f64, 4, 6>::zeros();
        for i in 0..2 {
            for j in 0..2 {
                let row = i + 2 * j;
                dfdx[(row, 2 + i)] = dm_inv[(0, j)];
                dfdx[(row, 4 + i)] = dm_inv[(1, j)];
                dfdx[(row, i)] = -(dm_inv[(0, j)] + dm_inv[(1, j)]);
            }
        }
        Some(Self { dm_inv, rest_area, lambda, mu, dfdx })
    }

    pub fn deformation_gradient(&self, x: [Vec2; 3]) -> Matrix2<f64> {
        Matrix2::from_columns(&[x[1] - x[0], x[2] - x[0]]) * self.dm_inv
    }

    /// Strain energy of the element, `+inf` if inverted.
    pub fn energy(&self, x: [Vec2; 3]) -> f64 {
        self.rest_area * energy_density(&self.deformation_gradient(x), self.lambda, self.mu)
    }

    pub fn gradient(&self, x: [Vec2; 3]) -> Option<Vec6> {
        let f = self.deformation_gradient(x);
        let p = density_gradient(&f, self.lambda, self.mu)?;
        Some(self.dfdx.transpose() * p * self.rest_area)
    }

    /// Exact (unprojected) element Hessian.
    pub fn hessian(&self, x: [Vec2; 3]) -> Option<Mat6> {
        let f = self.deformation_gradient(x);
        let h = density_hessian(&f, self.lambda, self.mu)?;
        Some(self.dfdx.transpose() * h * self.dfdx * self.rest_area)
    }
}

fn cofactor_vec(f: &Matrix2<f64>) -> Vec4 {
    Vec4::new(f[(1, 1)], -f[(0, 1)], -f[(1, 0)], f[(0, 0)])
}

fn vec_f(f: &Matrix2<f64>) -> Vec4 {
    Vec4::new(f[(0, 0)], f[(1, 0)], f[(0, 1)], f[(1, 1)])
}

/// psi(F) = mu/2 (tr F^T F - 2) - mu ln J + lambda/2 (ln J)^2, `+inf` for J <= 0.
pub fn energy_density(f: &Matrix2<f64>, lambda: f64, mu: f64) -> f64 {
    let j = f.determinant();
    if !(j > 0.0) {
        return f64::INFINITY;
    }
    let lj = j.ln();
    0.5 * mu * (f.norm_squared() - 2.0) - mu * lj + 0.5 * lambda * lj * lj
}

/// d psi / d vec(F).
fn density_gradient(f: &Matrix2<f64>, lambda: f64, mu: f64) -> Option<Vec4> {
    let j = f.determinant();
    if !(j > 0.0) {
        return None;
    }
    let g = cofactor_vec(f);
    Some(vec_f(f) * mu + g * ((lambda * j.ln() - mu) / j))
}

/// d^2 psi / d vec(F)^2.
fn density_hessian(f: &Matrix2<f64>, lambda: f64, mu: f64) -> Option<Mat4> {
    let j = f.determinant();
    if !(j > 0.0) {
        return None;
    }
    let lj = j.ln();
    let g = cofactor_vec(f);
    let mut k = Mat4::zeros();
    k[(0, 3)] = 1.0;
    k[(3, 0)] = 1.0;
    k[(1, 2)] = -1.0;
    k[(2, 1)] = -1.0;
    Some(
        Mat4::identity() * mu
            + g * g.transpose() * ((mu + lambda - lambda * lj) / (j * j))
            + k * ((lambda * lj - mu) / j),
    )
}

fn element_positions(body: &Body, x: &[Vec2], e: usize) -> [Vec2; 3] {
    let t = body.mesh.triangles[e];
    [x[t[0]], x[t[1]], x[t[2]]]
}

/// Total strain energy of a body (J per meter of extrusion), `+inf` if any
/// element is inverted.
pub fn body_strain_energy(body: &Body, positions: &[Vec2]) -> f64 {
    let mut total = 0.0;
    for (e, el) in body.elements.iter().enumerate() {
        total += el.energy(element_positions(body, positions, e));
    }
    total
}

/// Per-vertex DOF assignment: `dofs[v]` is the index of the x coordinate of
/// vertex `v` (y follows), or `None` for pinned vertices.
pub fn identity_dofs(n: usize) -> Vec<Option<usize>> {
    (0..n).map(|v| Some(2 * v)).collect()
}

fn local_dofs(body: &Body, e: usize, dofs: &[Option<usize>]) -> [Option<usize>; 6] {
    let t = body.mesh.triangles[e];
    let mut out = [None; 6];
    for (k, &v) in t.iter().enumerate() {
        if let Some(d) = dofs[v] {
            out[2 * k] = Some(d);
            out[2 * k + 1] = Some(d + 1);
        }
    }
    out
}

/// Add `scale` times the body's energy gradient into `grad` (and the projected
/// Hessian into `hess` if given). Returns the unscaled energy.
pub fn accumulate(
    body: &Body,
    body_index: usize,
    positions: &[Vec2],
    dofs: &[Option<usize>],
    scale: f64,
    grad: &mut [f64],
    mut hess: Option<&mut SparseSym>,
) -> Result<f64> {
    let mut total = 0.0;
    for (e, el) in body.elements.iter().enumerate() {
        let x = element_positions(body, positions, e);
        let inverted =
            || Error::InvertedElement { body: body_index, element: e, det: el.deformation_gradient(x).determinant() };
        let g = el.gradient(x).ok_or_else(inverted)?;
        total += el.energy(x);
        let ld = local_dofs(body, e, dofs);
        for (k, d) in ld.iter().enumerate() {
            if let Some(d) = *d {
                grad[d] += scale * g[k];
            }
        }
        if let Some(h) = hess.as_deref_mut() {
            let he = project_psd(&el.hessian(x).ok_or_else(inverted)?) * scale;
            h.add_block(&ld, &he);
        }
    }
    Ok(total)
}

/// Gradient of `body_strain_energy`, laid out `[x0, y0, x1, y1, ...]`.
pub fn elastic_gradient(body: &Body, positions: &[Vec2]) -> Result<Vec<f64>> {
    let mut g = vec![0.0; 2 * positions.len()];
    accumulate(body, 0, positions, &identity_dofs(positions.len()), 1.0, &mut g, None)?;
    Ok(g)
}

/// Sum of per-element Hessians, each projected to the PSD cone.
pub fn elastic_hessian_spd(body: &Body, positions: &[Vec2]) -> Result<SparseSym> {
    let n = positions.len();
    let mut g = vec![0.0; 2 * n];
    let mut h = SparseSym::new(2 * n);
    accumulate(body, 0, positions, &identity_dofs(n), 1.0, &mut g, Some(&mut h))?;
    Ok(h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::min_eigenvalue;
    use crate::scene::{rectangle, triangulate, BodyKind};
    use nalgebra::Rotation2;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const PAD: Material = Material { youngs_modulus: 1e8, poisson_ratio: 0.4, density: 1100.0, friction_coeff: 0.4 };

    fn square_body(level: u32) -> Body {
        let mesh = triangulate(&rectangle(0.0, 0.0, 0.01, 0.02), level).unwrap();
        let n = mesh.vertices.len();
        Body::new("pad", mesh, PAD, BodyKind::DeformablePad, vec![false; n], 0).unwrap()
    }

    fn perturbed(body: &Body, rng: &mut ChaCha8Rng, amp: f64) -> Vec<Vec2> {
        body.mesh
            .rest_positions
            .iter()
            .map(|p| p + Vec2::new(rng.gen_range(-amp..amp), rng.gen_range(-amp..amp)))
            .collect()
    }

    #[test]
    fn deformation_gradient_kinematics() {
        let rest = [Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.0), Vec2::new(0.2, 0.7)];
        let el = ElementPrecomp::new(rest, &PAD).unwrap();
        assert!((el.deformation_gradient(rest) - Matrix2::identity()).norm() < 1e-14);
        let r = Rotation2::new(0.3);
        let rotated = rest.map(|p| r * p);
        assert!((el.deformation_gradient(rotated) - r.matrix()).norm() < 1e-14);
        let scaled = rest.map(|p| p * 1.7);
        assert!((el.deformation_gradient(scaled) - Matrix2::identity() * 1.7).norm() < 1e-14);
    }

    #[test]
    fn lame_parameters() {
        let (l, m) = lame(1e8, 0.4);
        assert!((l - 1e8 * 0.4 / (1.4 * 0.2)).abs() < 1e-6);
        assert!((m - 1e8 / 2.8).abs() < 1e-6);
    }

    #[test]
    fn uniaxial_stretch_energy_matches_closed_form() {
        // unit-area element: right triangle with legs sqrt(2)
        let s = 2f64.sqrt();
        let rest = [Vec2::new(0.0, 0.0), Vec2::new(s, 0.0), Vec2::new(0.0, s)];
        let el = ElementPrecomp::new(rest, &PAD).unwrap();
        assert!((el.rest_area - 1.0).abs() < 1e-15);
        let x = rest.map(|p| Vec2::new(1.1 * p.x, p.y));
        let (l, m) = lame(1e8, 0.4);
        let ln = 1.1f64.ln();
        let expected = m / 2.0 * (1.21 + 1.0 - 2.0) - m * ln + l / 2.0 * ln * ln;
        assert!((el.energy(x) - expected).abs() <= 1e-12 * expected);
    }

    #[test]
    fn rest_energy_and_gradient_vanish() {
        let body = square_body(1);
        let x = body.mesh.rest_positions.clone();
        assert_eq!(body_strain_energy(&body, &x), 0.0);
        let g = elastic_gradient(&body, &x).unwrap();
        assert!(g.iter().all(|v| v.abs() < 1e-6));
    }

    #[test]
    fn inverted_element_energy_is_infinite_and_gradient_errors() {
        let body = square_body(0);
        let mut x = body.mesh.rest_positions.clone();
        let t = body.mesh.triangles[0];
        let (a, b, c) = (x[t[0]], x[t[1]], x[t[2]]);
        let d = c - b;
        let foot = b + d * ((a - b).dot(&d) / d.norm_squared());
        x[t[0]] = foot * 2.0 - a;
        assert_eq!(body_strain_energy(&body, &x), f64::INFINITY);
        assert!(matches!(elastic_gradient(&body, &x), Err(Error::InvertedElement { .. })));
    }

    #[test]
    fn gradient_matches_central_differences() {
        let body = square_body(1);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let diag = (0.01f64 * 0.01 + 0.02 * 0.02).sqrt();
        for _ in 0..10 {
            let x = perturbed(&body, &mut rng, 1e-3);
            let g = elastic_gradient(&body, &x).unwrap();
            let step = 1e-6 * diag;
            let gnorm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
            for k in 0..g.len() {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[k / 2][k % 2] += step;
                xm[k / 2][k % 2] -= step;
                let fd = (body_strain_energy(&body, &xp) - body_strain_energy(&body, &xm)) / (2.0 * step);
                assert!((fd - g[k]).abs() <= 1e-5 * gnorm, "dof {k}: fd {fd} vs {}", g[k]);
            }
        }
    }

    #[test]
    fn rest_hessian_is_unclamped_and_psd() {
        let body = square_body(1);
        let x = body.mesh.rest_positions.clone();
        for (e, el) in body.elements.iter().enumerate() {
            let xe = element_positions(&body, &x, e);
            let h = el.hessian(xe).unwrap();
            let p = project_psd(&h);
            assert!((h - p).norm() <= 1e-9 * h.norm());
        }
        let h = elastic_hessian_spd(&body, &x).unwrap().to_dense();
        assert!(min_eigenvalue(&h) >= -1e-10 * h.norm());
    }

    #[test]
    fn hessian_matches_gradient_differences_at_rest() {
        let rest = [Vec2::new(0.0, 0.0), Vec2::new(0.002, 0.0), Vec2::new(0.0005, 0.0018)];
        let el = ElementPrecomp::new(rest, &PAD).unwrap();
        let x = [rest[0], rest[1] + Vec2::new(1e-4, -5e-5), rest[2]];
        let h = el.hessian(x).unwrap();
        let step = 1e-9;
        for k in 0..6 {
            let mut xp = x;
            let mut xm = x;
            xp[k / 2][k % 2] += step;
            xm[k / 2][k % 2] -= step;
            let col = (el.gradient(xp).unwrap() - el.gradient(xm).unwrap()) / (2.0 * step);
            assert!((col - h.column(k)).norm() <= 1e-5 * h.norm(), "column {k}");
        }
    }

    #[test]
    fn compressed_hessian_is_symmetric_psd() {
        let body = square_body(2);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x: Vec<Vec2> = perturbed(&body, &mut rng, 4e-4).iter().map(|p| Vec2::new(0.7 * p.x, p.y)).collect();
        let h = elastic_hessian_spd(&body, &x).unwrap().to_dense();
        assert!((&h - h.transpose()).abs().max() <= 1e-12 * h.norm());
        assert!(min_eigenvalue(&h) >= -1e-10 * h.norm());
    }

    #[test]
    fn translation_gives_force_balance() {
        let body = square_body(1);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = perturbed(&body, &mut rng, 5e-4);
        let g = elastic_gradient(&body, &x).unwrap();
        let gnorm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        let sx: f64 = g.iter().step_by(2).sum();
        let sy: f64 = g.iter().skip(1).step_by(2).sum();
        assert!(sx.abs() <= 1e-8 * gnorm && sy.abs() <= 1e-8 * gnorm);
    }
}
