//! Implicit Euler stepping: each step minimizes the incremental potential with
//! projected Newton and a CCD-filtered backtracking line search.

use crate::contact::{
    accumulate_contact, accumulate_friction, active_pairs, barrier, ccd_max_step, earliest_impact, f0, friction_data,
    tangential_displacement, ContactPair, FrictionDatum,
};
use crate::elastic;
use crate::linalg::{inf_norm, solve_spd, SparseSym};
use crate::scene::{lumped_masses, BodyKind, Scene};
use crate::{Error, Result, Vec2};

#[derive(Debug, Clone, PartialEq)]
pub struct StepParams {
    pub h: f64,
    pub newton_tol: f64,
    pub max_newton_iters: usize,
    pub kappa: f64,
    pub dhat: f64,
    pub eps_v: f64,
}

impl Default for StepParams {
    fn default() -> Self {
        Self { h: 0.01, newton_tol: 1e-3, max_newton_iters: 200, kappa: 1e5, dhat: 1e-3, eps_v: 1e-3 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub positions: Vec<Vec2>,
    pub velocities: Vec<Vec2>,
    pub time: f64,
    /// End-of-step position for every vertex; only read at scripted vertices.
    pub scripted_targets: Vec<Vec2>,
}

impl SimState {
    /// Scene at its initial configuration, at rest, with scripted vertices held in place.
    pub fn at_rest(scene: &Scene) -> Self {
        let positions = scene.initial_positions();
        Self {
            velocities: vec![Vec2::zeros(); positions.len()],
            scripted_targets: positions.clone(),
            positions,
            time: 0.0,
        }
    }
}

/// Diagnostics of one time step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepStats {
    pub newton_iterations: usize,
    /// Smallest accepted line-search step.
    pub min_alpha: f64,
    /// Minimum inter-body distance at the end of the step.
    pub min_distance: f64,
    /// Barrier stiffness to use for the next step.
    pub next_kappa: f64,
    /// Number of partial scripted moves needed before the final solve.
    pub premove_rounds: usize,
    /// States visited during the step. Each is reached from the previous one
    /// (the first from the step's initial state) by a straight CCD-filtered
    /// move; the last is the accepted state.
    pub path: Vec<Vec<Vec2>>,
}

/// A smooth objective over a flat DOF vector.
pub trait Objective {
    fn dim(&self) -> usize;
    /// Objective value, `+inf` outside the feasible set.
    fn energy(&self, x: &[f64]) -> f64;
    fn gradient_hessian(&self, x: &[f64]) -> Result<(Vec<f64>, SparseSym)>;
    /// Largest feasible fraction of the step `p` from `x`.
    fn max_step(&self, _x: &[f64], _p: &[f64]) -> f64 {
        1.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonSettings {
    /// Stop once the Newton step satisfies `|p|_inf <= step_tol`.
    pub step_tol: f64,
    pub max_iters: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct NewtonReport {
    pub iterations: usize,
    /// Objective value at every iterate, starting with `x0`.
    pub energies: Vec<f64>,
    pub alphas: Vec<f64>,
    /// Accepted iterates after each line search, excluding the start point.
    pub iterates: Vec<Vec<f64>>,
}

/// Backtracking from `min(1, max_step)` by halving until the objective strictly decreases.
pub fn filtered_line_search(obj: &dyn Objective, x: &[f64], p: &[f64], e0: f64) -> Result<(f64, f64)> {
    let mut alpha = obj.max_step(x, p).min(1.0);
    let mut trial = vec![0.0; x.len()];
    loop {
        if alpha < 1e-14 {
            return Err(Error::LineSearchFailed { alpha, energy: e0 });
        }
        for ((t, xi), pi) in trial.iter_mut().zip(x).zip(p) {
            *t = xi + alpha * pi;
        }
        let e = obj.energy(&trial);
        if e < e0 {
            return Ok((alpha, e));
        }
        alpha *= 0.5;
    }
}

/// Projected Newton with filtered line search.
pub fn newton_solve(obj: &dyn Objective, x0: &[f64], settings: NewtonSettings) -> Result<(Vec<f64>, NewtonReport)> {
    let mut x = x0.to_vec();
    let mut e = obj.energy(&x);
    if !e.is_finite() {
        return Err(Error::InvalidInput("newton started from an infeasible point".into()));
    }
    let mut report = NewtonReport { energies: vec![e], ..Default::default() };
    let mut last = (f64::INFINITY, f64::INFINITY);
    for it in 0..settings.max_iters {
        let (g, h) = obj.gradient_hessian(&x)?;
        let neg: Vec<f64> = g.iter().map(|v| -v).collect();
        let p = solve_spd(&h, &neg)?;
        let step_norm = inf_norm(&p);
        last = (step_norm, inf_norm(&g));
        if step_norm <= settings.step_tol {
            report.iterations = it;
            // the last step is already computed: keep it if it still descends
            let alpha = obj.max_step(&x, &p).min(1.0);
            let trial: Vec<f64> = x.iter().zip(&p).map(|(xi, pi)| xi + alpha * pi).collect();
            let e_new = obj.energy(&trial);
            if e_new < e {
                x = trial;
                report.iterations += 1;
                report.energies.push(e_new);
                report.alphas.push(alpha);
                report.iterates.push(x.clone());
            }
            return Ok((x, report));
        }
        let (alpha, e_new) = match filtered_line_search(obj, &x, &p, e) {
            Ok(r) => r,
            // no representable decrease left within twice the tolerance: converged
            Err(Error::LineSearchFailed { .. }) if step_norm <= 2.0 * settings.step_tol => {
                report.iterations = it;
                return Ok((x, report));
            }
            Err(err) => return Err(err),
        };
        for (xi, pi) in x.iter_mut().zip(&p) {
            *xi += alpha * pi;
        }
        e = e_new;
        report.energies.push(e);
        report.alphas.push(alpha);
        report.iterates.push(x.clone());
    }
    Err(Error::NewtonDidNotConverge { iterations: settings.max_iters, step_norm: last.0, grad_norm: last.1, energy: e })
}

/// Precomputed per-scene data for stepping.
#[derive(Debug, Clone)]
pub struct Simulator<'a> {
    pub scene: &'a Scene,
    masses: Vec<f64>,
    scripted: Vec<bool>,
    /// Bounding-box diagonal of the scene.
    pub length_scale: f64,
    elastic_bodies: Vec<usize>,
}

/// Incremental potential of one step over the free DOFs.
struct IncrementalPotential<'s, 'a> {
    sim: &'s Simulator<'a>,
    params: &'s StepParams,
    /// Scripted vertices take their values from here.
    pinned: Vec<Vec2>,
    x_hat: Vec<Vec2>,
    prev: Vec<Vec2>,
    friction: Vec<FrictionDatum>,
    dofs: Vec<Option<usize>>,
    free: Vec<usize>,
}

impl IncrementalPotential<'_, '_> {
    fn expand(&self, x: &[f64]) -> Vec<Vec2> {
        let mut full = self.pinned.clone();
        for (k, &v) in self.free.iter().enumerate() {
            full[v] = Vec2::new(x[2 * k], x[2 * k + 1]);
        }
        full
    }

    fn pairs(&self, full: &[Vec2]) -> Vec<ContactPair> {
        active_pairs(self.sim.scene, full, self.params.dhat)
            .into_iter()
            .filter(|c| [c.point, c.a, c.b].iter().any(|&v| self.dofs[v].is_some()))
            .collect()
    }
}

impl Objective for IncrementalPotential<'_, '_> {
    fn dim(&self) -> usize {
        2 * self.free.len()
    }

    fn energy(&self, x: &[f64]) -> f64 {
        let full = self.expand(x);
        let scene = self.sim.scene;
        let h2 = self.params.h * self.params.h;
        let mut inertia = 0.0;
        for &v in &self.free {
            inertia += 0.5 * self.sim.masses[v] * (full[v] - self.x_hat[v]).norm_squared();
        }
        let mut potential = 0.0;
        for &b in &self.sim.elastic_bodies {
            potential += elastic::body_strain_energy(&scene.bodies[b], scene.body_positions(&full, b));
            if !potential.is_finite() {
                return f64::INFINITY;
            }
        }
        for c in self.pairs(&full) {
            match barrier(c.distance, c.dhat) {
                Ok(b) => potential += self.params.kappa * b,
                Err(_) => return f64::INFINITY,
            }
        }
        let eps = self.params.eps_v * self.params.h;
        for datum in &self.friction {
            let u = tangential_displacement(&full, &self.prev, datum);
            potential += datum.mu * datum.lambda * f0(u.abs(), eps);
        }
        inertia + h2 * potential
    }

    fn gradient_hessian(&self, x: &[f64]) -> Result<(Vec<f64>, SparseSym)> {
        let full = self.expand(x);
        let scene = self.sim.scene;
        let n = self.dim();
        let h2 = self.params.h * self.params.h;
        let mut g = vec![0.0; n];
        let mut hess = SparseSym::new(n);
        for (k, &v) in self.free.iter().enumerate() {
            let m = self.sim.masses[v];
            let r = full[v] - self.x_hat[v];
            g[2 * k] += m * r.x;
            g[2 * k + 1] += m * r.y;
            hess.push(2 * k, 2 * k, m);
            hess.push(2 * k + 1, 2 * k + 1, m);
        }
        for &b in &self.sim.elastic_bodies {
            let range = scene.body_range(b);
            elastic::accumulate(
                &scene.bodies[b],
                b,
                &full[range.clone()],
                &self.dofs[range],
                h2,
                &mut g,
                Some(&mut hess),
            )?;
        }
        let pairs = self.pairs(&full);
        accumulate_contact(&full, &pairs, self.params.kappa, &self.dofs, h2, &mut g, Some(&mut hess))?;
        accumulate_friction(
            &full,
            &self.prev,
            &self.friction,
            self.params.eps_v,
            self.params.h,
            &self.dofs,
            h2,
            &mut g,
            Some(&mut hess),
        );
        Ok((g, hess))
    }

    fn max_step(&self, x: &[f64], p: &[f64]) -> f64 {
        let full = self.expand(x);
        let mut dir = vec![Vec2::zeros(); full.len()];
        for (k, &v) in self.free.iter().enumerate() {
            dir[v] = Vec2::new(p[2 * k], p[2 * k + 1]);
        }
        ccd_max_step(self.sim.scene, &full, &dir)
    }
}

const MAX_PREMOVE_ROUNDS: usize = 8;

impl<'a> Simulator<'a> {
    pub fn new(scene: &'a Scene) -> Self {
        let scripted = scene.scripted_mask();
        let elastic_bodies =
            scene.bodies.iter().enumerate().filter(|(_, b)| !b.is_fully_scripted()).map(|(i, _)| i).collect();
        Self { masses: lumped_masses(scene), scripted, length_scale: scene.bbox_diagonal(), elastic_bodies, scene }
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    fn potential<'s>(
        &'s self,
        params: &'s StepParams,
        state: &SimState,
        pinned: Vec<Vec2>,
        friction: Vec<FrictionDatum>,
    ) -> IncrementalPotential<'s, 'a> {
        let h = params.h;
        let g = self.scene.gravity;
        let x_hat = state.positions.iter().zip(&state.velocities).map(|(x, v)| x + v * h + g * (h * h)).collect();
        let mut dofs = vec![None; self.scripted.len()];
        let mut free = Vec::new();
        for (v, &s) in self.scripted.iter().enumerate() {
            if !s {
                dofs[v] = Some(2 * free.len());
                free.push(v);
            }
        }
        IncrementalPotential { sim: self, params, pinned, x_hat, prev: state.positions.clone(), friction, dofs, free }
    }

    /// Start guesses for the final solve, most predictive first: pads carried
    /// along with their backings and the object coasting, pads carried only,
    /// scripted vertices moved alone.
    fn start_candidates(&self, state: &SimState, h: f64) -> Vec<Vec<Vec2>> {
        let scene = self.scene;
        let x = &state.positions;
        let mut scripted_only = x.clone();
        for (v, &s) in self.scripted.iter().enumerate() {
            if s {
                scripted_only[v] = state.scripted_targets[v];
            }
        }
        let mut carried = scripted_only.clone();
        for (bi, body) in scene.bodies.iter().enumerate() {
            if body.kind != BodyKind::DeformablePad {
                continue;
            }
            let range = scene.body_range(bi);
            let moved: Vec<Vec2> =
                range.clone().filter(|&v| self.scripted[v]).map(|v| state.scripted_targets[v] - x[v]).collect();
            if moved.is_empty() {
                continue;
            }
            let shift = moved.iter().sum::<Vec2>() / moved.len() as f64;
            for v in range.filter(|&v| !self.scripted[v]) {
                carried[v] = x[v] + shift;
            }
        }
        let mut coasting = carried.clone();
        for v in scene.body_range(scene.roles.object) {
            coasting[v] = x[v] + state.velocities[v] * h;
        }
        vec![coasting, carried, scripted_only]
    }

    fn feasible_start(&self, from: &[Vec2], to: &[Vec2]) -> bool {
        let dir: Vec<Vec2> = to.iter().zip(from).map(|(b, a)| b - a).collect();
        earliest_impact(self.scene, from, &dir).is_none() && self.scene.min_jacobian(to) > 0.0
    }

    fn solve(
        &self,
        obj: &IncrementalPotential,
        start: &[Vec2],
        params: &StepParams,
    ) -> Result<(Vec<Vec2>, NewtonReport)> {
        let x0: Vec<f64> = obj.free.iter().flat_map(|&v| [start[v].x, start[v].y]).collect();
        let settings = NewtonSettings {
            step_tol: params.newton_tol * params.h * self.length_scale,
            max_iters: params.max_newton_iters,
        };
        let (x, report) = newton_solve(obj, &x0, settings)?;
        Ok((obj.expand(&x), report))
    }

    /// Advance one step of length `params.h`.
    pub fn step(&self, state: &SimState, params: &StepParams) -> Result<(SimState, StepStats)> {
        let scene = self.scene;
        let lagged = active_pairs(scene, &state.positions, params.dhat);
        let friction = friction_data(scene, &state.positions, &lagged, params.kappa);

        let mut iterations = 0;
        let mut min_alpha: f64 = 1.0;
        let mut rounds = 0;
        let mut path = Vec::new();
        let start =
            self.start_candidates(state, params.h).into_iter().find(|c| self.feasible_start(&state.positions, c));
        let final_positions = match start {
            Some(start) => {
                let obj = self.potential(params, state, start.clone(), friction);
                let (x, report) = self.solve(&obj, &start, params)?;
                path.push(start);
                path.extend(report.iterates.iter().map(|it| obj.expand(it)));
                iterations += report.iterations;
                min_alpha = report.alphas.iter().copied().fold(min_alpha, f64::min);
                x
            }
            None => {
                // scripted targets blocked by free vertices: advance them in
                // CCD-limited increments, relaxing the free vertices in between
                let mut current = state.positions.clone();
                loop {
                    rounds += 1;
                    if rounds > MAX_PREMOVE_ROUNDS {
                        return Err(Error::ScriptedMotionBlocked);
                    }
                    let dir: Vec<Vec2> = (0..current.len())
                        .map(|v| if self.scripted[v] { state.scripted_targets[v] - current[v] } else { Vec2::zeros() })
                        .collect();
                    let alpha = ccd_max_step(scene, &current, &dir);
                    let mut pinned = current.clone();
                    for v in 0..pinned.len() {
                        pinned[v] += dir[v] * alpha;
                    }
                    if scene.min_jacobian(&pinned) <= 0.0 {
                        return Err(Error::ScriptedMotionBlocked);
                    }
                    let obj = self.potential(params, state, pinned.clone(), friction.clone());
                    let (x, report) = self.solve(&obj, &pinned, params)?;
                    path.push(pinned);
                    path.extend(report.iterates.iter().map(|it| obj.expand(it)));
                    iterations += report.iterations;
                    min_alpha = report.alphas.iter().copied().fold(min_alpha, f64::min);
                    current = x;
                    if alpha == 1.0 {
                        break;
                    }
                }
                current
            }
        };

        let h = params.h;
        let velocities = final_positions.iter().zip(&state.positions).map(|(a, b)| (a - b) / h).collect();
        let min_distance = scene.min_interbody_distance(&final_positions);
        let next_kappa = if min_distance < 1e-4 * params.dhat { 2.0 * params.kappa } else { params.kappa };
        let next = SimState {
            scripted_targets: final_positions.clone(),
            positions: final_positions,
            velocities,
            time: state.time + h,
        };
        Ok((
            next,
            StepStats {
                newton_iterations: iterations,
                min_alpha,
                min_distance,
                next_kappa,
                premove_rounds: rounds,
                path,
            },
        ))
    }
}

/// Advance `state` by one implicit Euler step.
pub fn step(state: &SimState, scene: &Scene, params: &StepParams) -> Result<(SimState, StepStats)> {
    Simulator::new(scene).step(state, params)
}
