mod common;

use nalgebra::Rotation2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use gripsim::config::ScenarioConfig;
use gripsim::elastic::{body_strain_energy, elastic_gradient, ElementPrecomp};
use gripsim::scene::{
    body_lumped_masses, build_scene, lumped_masses, polygon_area, rectangle, triangulate, Body, BodyKind, Material,
};
use gripsim::Vec2;

use common::*;

fn material(youngs: f64, nu: f64) -> Material {
    Material { youngs_modulus: youngs, poisson_ratio: nu, density: 1000.0, friction_coeff: 0.5 }
}

#[test]
fn uniaxial_stretch_energy_matches_density_formula() {
    let rest = [Vec2::new(0.0, 0.0), Vec2::new(0.02, 0.0), Vec2::new(0.0, 0.01)];
    for (youngs, nu) in [(1e6, 0.3), (1e8, 0.45), (2e11, 0.0)] {
        let el = ElementPrecomp::new(rest, &material(youngs, nu)).unwrap();
        let x = rest.map(|p| Vec2::new(1.1 * p.x, p.y));
        let expected = 1e-4 * neo_hookean_density([[1.1, 0.0], [0.0, 1.0]], youngs, nu);
        assert!((el.energy(x) - expected).abs() <= 1e-12 * expected, "E = {youngs}: {} vs {expected}", el.energy(x));
    }
}

#[test]
fn general_deformation_energy_matches_density_formula() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let rest = [Vec2::new(0.01, 0.0), Vec2::new(0.03, 0.005), Vec2::new(0.015, 0.02)];
    let el = ElementPrecomp::new(rest, &material(5e7, 0.35)).unwrap();
    let area = 0.5 * ((rest[1] - rest[0]).perp(&(rest[2] - rest[0])));
    for _ in 0..50 {
        let f =
            [[rng.gen_range(0.7..1.3), rng.gen_range(-0.2..0.2)], [rng.gen_range(-0.2..0.2), rng.gen_range(0.7..1.3)]];
        let x = rest.map(|p| Vec2::new(f[0][0] * p.x + f[0][1] * p.y, f[1][0] * p.x + f[1][1] * p.y));
        let expected = area * neo_hookean_density(f, 5e7, 0.35);
        assert!((el.energy(x) - expected).abs() <= 1e-9 * expected.abs().max(1e-9));
    }
}

#[test]
fn object_gradient_matches_central_differences() {
    let mut cfg = ScenarioConfig::default();
    cfg.object.subdivision = 2;
    cfg.object.material.youngs_modulus = 1e7;
    let scene = build_scene(&cfg).unwrap();
    let body = &scene.bodies[scene.roles.object];
    let rest = body.mesh.rest_positions.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..10 {
        let r = Rotation2::new(rng.gen_range(-3.0..3.0));
        let x: Vec<Vec2> = rest
            .iter()
            .map(|p| {
                r * Vec2::new(1.05 * p.x, 0.97 * p.y)
                    + Vec2::new(rng.gen_range(-4e-4..4e-4), rng.gen_range(-4e-4..4e-4))
            })
            .collect();
        let g = elastic_gradient(body, &x).unwrap();
        let fd = central_gradient(|y| body_strain_energy(body, &unflatten(y)), &flatten(&x), 1e-8);
        let err = relative_error(&fd, &g);
        assert!(err <= 1e-5, "relative error {err:e}");
    }
}

#[test]
fn lumped_masses_sum_to_body_mass_at_level_two() {
    let mut cfg = ScenarioConfig::default();
    cfg.object.subdivision = 2;
    let scene = build_scene(&cfg).unwrap();
    let m = lumped_masses(&scene);
    assert!(m.iter().all(|&v| v > 0.0));
    for (bi, body) in scene.bodies.iter().enumerate() {
        let total: f64 = m[scene.body_range(bi)].iter().sum();
        let expected = body.material.density * body.mesh.area();
        assert!((total / expected - 1.0).abs() <= 1e-12, "body {bi}: ratio {}", total / expected);
    }
    let obj = &scene.bodies[scene.roles.object];
    let side = cfg.object.scale;
    let polygon = [Vec2::new(0.0, 0.0), Vec2::new(side, 0.0), Vec2::new(side, side), Vec2::new(0.0, side)];
    let total: f64 = m[scene.body_range(scene.roles.object)].iter().sum();
    assert!((total / (obj.material.density * polygon_area(&polygon)) - 1.0).abs() <= 1e-12);
}

#[test]
fn unit_square_at_level_two_has_unit_mass() {
    let mesh = triangulate(&rectangle(0.0, 0.0, 1.0, 1.0), 2).unwrap();
    assert_eq!(mesh.triangles.len(), 32);
    let n = mesh.rest_positions.len();
    let unit = Material { density: 1.0, ..material(1e9, 0.3) };
    let body = Body::new("unit", mesh, unit, BodyKind::RigidObject, vec![false; n], 0).unwrap();
    let total: f64 = body_lumped_masses(&body).iter().sum();
    assert!((total - 1.0).abs() <= 1e-12, "{total}");
}
