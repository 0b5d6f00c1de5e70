//! Grasp state machine (squeeze, lift, settle, evaluate), pose perturbation and
//! Monte-Carlo robustness estimation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::config::ScenarioConfig;
use crate::elastic::body_strain_energy;
use crate::scene::{build_scene_for, JawProfile, Scene};
use crate::stepper::{SimState, Simulator, StepParams};
use crate::{Error, Result, Vec2};

/// A planar grasp: jaw center, closing axis and jaw motion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GraspSpec {
    pub center: Vec2,
    /// Angle of the closing axis from world +x (rad).
    pub axis_angle: f64,
    pub max_width: f64,
    pub closing_speed: f64,
    pub lift_speed: f64,
    pub jaw_profile: JawProfile,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerturbationModel {
    pub translation_std: f64,
    pub rotation_std: f64,
}

impl Default for PerturbationModel {
    fn default() -> Self {
        Self { translation_std: 0.001, rotation_std: 0.003 }
    }
}

/// Offset the center by i.i.d. normal noise per coordinate and the axis angle
/// by normal noise. Always draws three samples.
pub fn perturb_grasp<R: Rng + ?Sized>(u: &GraspSpec, model: &PerturbationModel, rng: &mut R) -> GraspSpec {
    let zx: f64 = rng.sample(StandardNormal);
    let zy: f64 = rng.sample(StandardNormal);
    let zr: f64 = rng.sample(StandardNormal);
    GraspSpec {
        center: u.center + Vec2::new(zx, zy) * model.translation_std,
        axis_angle: u.axis_angle + zr * model.rotation_std,
        ..*u
    }
}

/// Default relative band for the pad-energy balance test.
pub const PSI_BALANCE_TOL: f64 = 0.1;

/// Both pad energies reach the threshold and agree within the balance band.
pub fn squeeze_termination(psi1: f64, psi2: f64, psi_th: f64) -> bool {
    squeeze_termination_with_tol(psi1, psi2, psi_th, PSI_BALANCE_TOL)
}

pub fn squeeze_termination_with_tol(psi1: f64, psi2: f64, psi_th: f64, tol: f64) -> bool {
    psi1 >= psi_th && psi2 >= psi_th && (psi1 - psi2).abs() <= tol * psi1.max(psi2)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ContactFlags {
    pub jaw1_object: bool,
    pub jaw2_object: bool,
    pub object_ground: bool,
}

/// Contact flags at `positions`: body distances at most `contact_eps`.
pub fn contact_flags(scene: &Scene, positions: &[Vec2], contact_eps: f64) -> ContactFlags {
    let r = scene.roles;
    ContactFlags {
        jaw1_object: scene.body_distance(positions, r.pads[0], r.object) <= contact_eps,
        jaw2_object: scene.body_distance(positions, r.pads[1], r.object) <= contact_eps,
        object_ground: scene.body_distance(positions, r.object, r.ground) <= contact_eps,
    }
}

/// Both pads touch the object and the object is off the ground.
pub fn evaluate_success(positions: &[Vec2], scene: &Scene, contact_eps: f64) -> bool {
    let f = contact_flags(scene, positions, contact_eps);
    f.jaw1_object && f.jaw2_object && !f.object_ground
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Squeeze,
    Done,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Squeeze => "squeeze",
            Phase::Done => "done",
        }
    }
}

/// Why the squeeze phase ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SqueezeEnd {
    Threshold,
    JawsMet,
    StepBudget,
    /// One pad's energy ran far past the threshold without the other catching up.
    EnergyRunaway,
    /// Jaws could not be placed without overlapping another body.
    PlacementInfeasible,
}

impl SqueezeEnd {
    pub fn as_str(self) -> &'static str {
        match self {
            SqueezeEnd::Threshold => "threshold",
            SqueezeEnd::JawsMet => "jaws_met",
            SqueezeEnd::StepBudget => "step_budget",
            SqueezeEnd::EnergyRunaway => "energy_runaway",
            SqueezeEnd::PlacementInfeasible => "placement_infeasible",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose2 {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub time: f64,
    pub positions: Vec<Vec2>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GraspOutcome {
    pub success: bool,
    pub phase_reached: Phase,
    pub squeeze_end: SqueezeEnd,
    pub final_object_pose: Pose2,
    /// Pad strain energies at the end of the squeeze, in threshold units.
    pub psi: [f64; 2],
    /// Largest pad compression ratio seen during the squeeze, per pad.
    pub max_compression: [f64; 2],
    pub contacts: ContactFlags,
    pub steps: usize,
    pub newton_iterations: usize,
    /// Smallest minimum inter-body distance over all accepted frames.
    pub min_distance: f64,
    /// Smallest element Jacobian over all accepted frames.
    pub min_jacobian: f64,
    /// Recorded frames (empty unless requested).
    pub trajectory: Vec<Frame>,
    /// Every state visited by the solver, starting at the initial placement
    /// (empty unless requested). Consecutive states are joined by straight
    /// CCD-filtered moves.
    pub solver_path: Vec<Vec<Vec2>>,
}

impl GraspOutcome {
    pub fn placement_infeasible(&self) -> bool {
        self.squeeze_end == SqueezeEnd::PlacementInfeasible
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunOptions {
    pub record_trajectory: bool,
    /// Keep every intermediate solver state in `GraspOutcome::solver_path`.
    pub record_solver_path: bool,
    /// Stop after the squeeze phase.
    pub squeeze_only: bool,
}

/// Pad energy multiple of the threshold beyond which an unbalanced squeeze is abandoned.
const RUNAWAY_FACTOR: f64 = 20.0;

/// Mass-weighted centroid and best-fit rotation of the object.
fn object_pose(scene: &Scene, sim: &Simulator, positions: &[Vec2]) -> Pose2 {
    let range = scene.body_range(scene.roles.object);
    let m = &sim.masses()[range.clone()];
    let rest = &scene.bodies[scene.roles.object].mesh.rest_positions;
    let x = &positions[range];
    let total: f64 = m.iter().sum();
    let c = x.iter().zip(m).map(|(p, w)| p * *w).sum::<Vec2>() / total;
    let c0 = rest.iter().zip(m).map(|(p, w)| p * *w).sum::<Vec2>() / total;
    let (mut s, mut k) = (0.0, 0.0);
    for ((p, p0), w) in x.iter().zip(rest).zip(m) {
        let (r, r0) = (p - c, p0 - c0);
        s += w * (r0.x * r.y - r0.y * r.x);
        k += w * r0.dot(&r);
    }
    Pose2 { x: c.x, y: c.y, theta: s.atan2(k) }
}

struct Run<'a> {
    scene: &'a Scene,
    sim: Simulator<'a>,
    params: StepParams,
    state: SimState,
    options: RunOptions,
    frames: Vec<Frame>,
    path: Vec<Vec<Vec2>>,
    steps: usize,
    newton_iterations: usize,
    min_distance: f64,
    min_jacobian: f64,
}

impl<'a> Run<'a> {
    fn new(scene: &'a Scene, params: StepParams, options: RunOptions) -> Self {
        let state = SimState::at_rest(scene);
        let mut run = Self {
            sim: Simulator::new(scene),
            scene,
            params,
            options,
            frames: Vec::new(),
            path: Vec::new(),
            steps: 0,
            newton_iterations: 0,
            min_distance: scene.min_interbody_distance(&state.positions),
            min_jacobian: scene.min_jacobian(&state.positions),
            state,
        };
        if options.record_solver_path {
            run.path.push(run.state.positions.clone());
        }
        run.record();
        run
    }

    fn record(&mut self) {
        if self.options.record_trajectory {
            self.frames.push(Frame { time: self.state.time, positions: self.state.positions.clone() });
        }
    }

    /// Move every scripted vertex of both jaw assemblies by its displacement and step.
    fn advance(&mut self, jaw_shift: [Vec2; 2]) -> Result<()> {
        let r = self.scene.roles;
        let mut targets = self.state.positions.clone();
        for (k, shift) in jaw_shift.iter().enumerate() {
            for body in [r.pads[k], r.backings[k]] {
                for v in self.scene.body_range(body) {
                    if self.scene.bodies[body].scripted[v - self.scene.offset(body)] {
                        targets[v] += shift;
                    }
                }
            }
        }
        self.state.scripted_targets = targets;
        let (next, stats) = self.sim.step(&self.state, &self.params)?;
        if self.options.record_solver_path {
            self.path.extend(stats.path);
        }
        self.state = next;
        self.params.kappa = stats.next_kappa;
        self.steps += 1;
        self.newton_iterations += stats.newton_iterations;
        self.min_distance = self.min_distance.min(stats.min_distance);
        self.min_jacobian = self.min_jacobian.min(self.scene.min_jacobian(&self.state.positions));
        self.record();
        Ok(())
    }

    fn pad_energy(&self, k: usize) -> f64 {
        let b = self.scene.roles.pads[k];
        body_strain_energy(&self.scene.bodies[b], self.scene.body_positions(&self.state.positions, b))
    }
}

/// Simulate one grasp: squeeze until the pad energies trigger termination, then
/// lift until the object would clear the ground by the configured height,
/// settle, and evaluate success.
pub fn run_grasp(config: &ScenarioConfig, u: &GraspSpec, options: RunOptions) -> Result<GraspOutcome> {
    let scene = match build_scene_for(config, u) {
        Ok(s) => s,
        Err(Error::Interpenetration { .. }) => return Ok(infeasible_outcome()),
        Err(e) => return Err(e),
    };
    let g = &config.grasp;
    let h = config.physics.timestep;
    let mut run = Run::new(&scene, config.step_params(), options);
    let axis = scene.grasp_axis;
    let close = axis * (u.closing_speed * h);
    let budget = (0.5 * u.max_width / (u.closing_speed * h)).ceil() as usize + 20;
    let min_sep = config.min_jaw_separation();
    let (pad1, pad2) = (scene.roles.pads[0], scene.roles.pads[1]);

    let mut max_compression = [0.0f64; 2];
    let mut psi: [f64; 2];
    let squeeze_end = loop {
        run.advance([close, -close])?;
        for (k, c) in max_compression.iter_mut().enumerate() {
            *c = c.max(scene.pad_compression(&run.state.positions, k));
        }
        psi = [run.pad_energy(0) * g.psi_unit_scale, run.pad_energy(1) * g.psi_unit_scale];
        if squeeze_termination_with_tol(psi[0], psi[1], g.psi_threshold, g.psi_balance_tol) {
            break SqueezeEnd::Threshold;
        }
        if scene.body_distance(&run.state.positions, pad1, pad2) <= min_sep {
            break SqueezeEnd::JawsMet;
        }
        if psi[0].max(psi[1]) > RUNAWAY_FACTOR * g.psi_threshold.max(f64::MIN_POSITIVE) {
            break SqueezeEnd::EnergyRunaway;
        }
        if run.steps >= budget {
            break SqueezeEnd::StepBudget;
        }
    };

    let phase = if squeeze_end == SqueezeEnd::Threshold && !options.squeeze_only {
        let lowest = scene.lowest_point(&run.state.positions, scene.roles.object);
        let rise = (g.lift_clearance - lowest + config.physics.dhat).max(0.0);
        let n_lift = (rise / (u.lift_speed * h)).ceil() as usize;
        let up = Vec2::new(0.0, rise / n_lift.max(1) as f64);
        for _ in 0..n_lift {
            run.advance([up, up])?;
        }
        let n_settle = (g.settle_time / h).round() as usize;
        for _ in 0..n_settle {
            run.advance([Vec2::zeros(); 2])?;
        }
        Phase::Done
    } else {
        Phase::Squeeze
    };

    let eps = config.contact_eps();
    let positions = &run.state.positions;
    let contacts = contact_flags(&scene, positions, eps);
    Ok(GraspOutcome {
        success: phase == Phase::Done && contacts.jaw1_object && contacts.jaw2_object && !contacts.object_ground,
        phase_reached: phase,
        squeeze_end,
        final_object_pose: object_pose(&scene, &run.sim, positions),
        psi,
        max_compression,
        contacts,
        steps: run.steps,
        newton_iterations: run.newton_iterations,
        min_distance: run.min_distance,
        min_jacobian: run.min_jacobian,
        trajectory: run.frames,
        solver_path: run.path,
    })
}

fn infeasible_outcome() -> GraspOutcome {
    GraspOutcome {
        success: false,
        phase_reached: Phase::Squeeze,
        squeeze_end: SqueezeEnd::PlacementInfeasible,
        final_object_pose: Pose2 { x: f64::NAN, y: f64::NAN, theta: f64::NAN },
        psi: [0.0; 2],
        max_compression: [0.0; 2],
        contacts: ContactFlags { jaw1_object: false, jaw2_object: false, object_ground: false },
        steps: 0,
        newton_iterations: 0,
        min_distance: f64::NAN,
        min_jacobian: f64::NAN,
        trajectory: Vec::new(),
        solver_path: Vec::new(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    /// Attempt index; also the RNG stream used to draw the perturbation.
    pub attempt: u64,
    pub grasp: GraspSpec,
    pub outcome: GraspOutcome,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RobustnessEstimate {
    /// Success fraction over the `n` valid trials.
    pub r: f64,
    pub n: usize,
    pub seed: u64,
    pub trials: Vec<TrialRecord>,
    /// Attempts dropped for solver failures, with the error message.
    pub invalid: Vec<(u64, String)>,
}

impl RobustnessEstimate {
    pub fn successes(&self) -> usize {
        self.trials.iter().filter(|t| t.outcome.success).count()
    }
}

/// Perturbation drawn for attempt `attempt` under `seed`.
pub fn trial_grasp(u: &GraspSpec, model: &PerturbationModel, seed: u64, attempt: u64) -> GraspSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(attempt);
    perturb_grasp(u, model, &mut rng)
}

/// Estimate grasp robustness from `n` valid perturbed trials. Attempts that end
/// in a solver failure are logged and re-drawn, up to `2n` attempts in total.
pub fn estimate_robustness(
    config: &ScenarioConfig,
    u: &GraspSpec,
    n: usize,
    seed: u64,
    options: RunOptions,
) -> Result<RobustnessEstimate> {
    if n == 0 {
        return Err(Error::InvalidInput("trial count must be at least 1".into()));
    }
    let model = config.perturbation();
    let max_attempts = 2 * n as u64;
    let mut trials = Vec::with_capacity(n);
    let mut invalid = Vec::new();
    let mut next = 0u64;
    while trials.len() < n && next < max_attempts {
        let batch = ((n - trials.len()) as u64).min(max_attempts - next);
        let results: Vec<(u64, GraspSpec, Result<GraspOutcome>)> = (next..next + batch)
            .into_par_iter()
            .map(|attempt| {
                let grasp = trial_grasp(u, &model, seed, attempt);
                (attempt, grasp, run_grasp(config, &grasp, options))
            })
            .collect();
        next += batch;
        for (attempt, grasp, result) in results {
            match result {
                Ok(outcome) => trials.push(TrialRecord { attempt, grasp, outcome }),
                Err(e) if e.is_solver_failure() => {
                    log::warn!("trial {attempt} invalid: {e}");
                    invalid.push((attempt, e.to_string()));
                }
                Err(e) => return Err(e),
            }
        }
    }
    if trials.len() < n {
        return Err(Error::TrialBudgetExceeded { invalid: invalid.len(), attempts: next as usize, needed: n });
    }
    let successes = trials.iter().filter(|t| t.outcome.success).count();
    Ok(RobustnessEstimate { r: successes as f64 / n as f64, n, seed, trials, invalid })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec() -> GraspSpec {
        GraspSpec {
            center: Vec2::new(0.01, 0.02),
            axis_angle: 0.1,
            max_width: 0.07,
            closing_speed: 0.05,
            lift_speed: 0.05,
            jaw_profile: JawProfile::Rounded,
        }
    }

    #[test]
    fn zero_noise_returns_the_input() {
        let model = PerturbationModel { translation_std: 0.0, rotation_std: 0.0 };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(perturb_grasp(&spec(), &model, &mut rng), spec());
    }

    #[test]
    fn default_noise_model() {
        let m = PerturbationModel::default();
        assert_eq!((m.translation_std, m.rotation_std), (0.001, 0.003));
    }

    #[test]
    fn perturbation_touches_only_pose() {
        let u = trial_grasp(&spec(), &PerturbationModel::default(), 4, 2);
        let base = spec();
        assert_ne!(u.center, base.center);
        assert_eq!(
            (u.max_width, u.closing_speed, u.lift_speed, u.jaw_profile),
            (base.max_width, base.closing_speed, base.lift_speed, base.jaw_profile)
        );
        assert_eq!(u, trial_grasp(&spec(), &PerturbationModel::default(), 4, 2));
    }

    #[test]
    fn termination_examples() {
        assert!(squeeze_termination(6e4, 6e4, 5e4));
        assert!(!squeeze_termination(6e4, 1e4, 5e4));
        assert!(!squeeze_termination(8e4, 6e4, 5e4));
        assert!(squeeze_termination(0.0, 0.0, 0.0));
    }
}
