use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::filter::{
    barrier_rows, clf_row, filter_kkt, joint_limit_rows, solve_filter_qp, BarrierRows,
    FilterConfig, FilterResult,
};
use crate::grid::GridGeometry;
use crate::kinematics::BodyPoint;
use crate::qp::QpStatus;
use crate::sampling::{
    generate_dense_cloud, poisson_disk_downsample, verify_coverage, DenseSurfaceCloud, SampleSet,
};
use crate::shapes::ObstacleShape;
use crate::sim::field::{FieldBuilder, FieldSnapshot};
use crate::sim::nominal::{nominal_velocity, NominalState};
use crate::sim::oracle::{ground_truth_min_clearance, step_state};
use crate::sim::scenario::{NominalSpec, Scenario};
use crate::sim::trajectory::Trajectory;
use crate::sim::{Clock, EpisodeSummary, TelemetryRecord};
use crate::{Error, Pose, Result, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EngineOptions {
    /// When false, `v_nom` is applied directly (paired baselines).
    pub filter_enabled: bool,
    /// When false, the filter keeps only the joint-limit rows; `h` is still
    /// evaluated for telemetry.
    pub barriers_enabled: bool,
}

impl Default for EngineOptions {
    fn default() -> Self {
        Self {
            filter_enabled: true,
            barriers_enabled: true,
        }
    }
}

impl EngineOptions {
    pub fn unfiltered() -> Self {
        Self {
            filter_enabled: false,
            ..Self::default()
        }
    }

    pub fn limits_only() -> Self {
        Self {
            barriers_enabled: false,
            ..Self::default()
        }
    }
}

/// What a live view needs after each tick.
#[derive(Debug, Clone, Default)]
pub struct LiveState {
    pub link_poses: Vec<Pose>,
    pub sample_positions: Vec<Vec3>,
    /// `h` per sample; NaN for base-link samples.
    pub sample_h: Vec<f64>,
    pub obstacles: Vec<ObstacleShape>,
}

/// Lockstep simulation of one scenario. Also the state holder for live
/// sessions, which drive it tick by tick and mutate it between ticks.
#[derive(Debug, Clone)]
pub struct Engine {
    scenario: Scenario,
    options: EngineOptions,
    cloud: DenseSurfaceCloud,
    samples: SampleSet,
    builder: FieldBuilder,
    snapshot: Option<FieldSnapshot>,
    /// Obstacles rasterized per field build rather than cached.
    dynamic: Vec<usize>,
    last_dynamic: Vec<ObstacleShape>,
    overrides: Vec<Option<Pose>>,
    q: Vec<f64>,
    tick: usize,
    nominal: NominalState,
    live: LiveState,
    /// Bumped whenever the field builder is replaced, so fields built by an
    /// outside loop against an old builder can be told apart.
    epoch: u64,
    /// A field was installed since the last control tick.
    fresh: bool,
}

/// What an outside field loop needs to build the next field.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldJob {
    pub epoch: u64,
    pub dynamic_shapes: Vec<ObstacleShape>,
    pub t: f64,
}

impl Engine {
    pub fn new(scenario: Scenario, options: EngineOptions) -> Result<Self> {
        scenario.validate()?;
        let cloud = generate_dense_cloud(&scenario.robot, scenario.delta)?;
        let samples = poisson_disk_downsample(&cloud, scenario.epsilon)?;
        let coverage = verify_coverage(&cloud, &samples);
        if !coverage.holds {
            return Err(Error::param(
                "epsilon",
                "sample set does not cover the dense cloud",
            ));
        }
        let dynamic: Vec<usize> = scenario
            .obstacles
            .iter()
            .enumerate()
            .filter(|(_, o)| o.trajectory != Trajectory::Static)
            .map(|(i, _)| i)
            .collect();
        let builder = Self::make_builder(&scenario, &dynamic, &cloud)?;
        Ok(Self {
            q: scenario.q0.clone(),
            overrides: vec![None; scenario.obstacles.len()],
            options,
            cloud,
            samples,
            builder,
            snapshot: None,
            dynamic,
            last_dynamic: Vec::new(),
            tick: 0,
            nominal: NominalState::default(),
            live: LiveState::default(),
            epoch: 0,
            fresh: false,
            scenario,
        })
    }

    fn make_builder(
        scenario: &Scenario,
        dynamic: &[usize],
        cloud: &DenseSurfaceCloud,
    ) -> Result<FieldBuilder> {
        let fixed: Vec<ObstacleShape> = scenario
            .obstacles
            .iter()
            .enumerate()
            .filter(|(i, _)| !dynamic.contains(i))
            .map(|(_, o)| o.shape)
            .collect();
        FieldBuilder::new(
            GridGeometry::new(scenario.bounds, scenario.dims),
            &fixed,
            scenario.epsilon + scenario.delta.max(cloud.delta),
            scenario.solver,
        )
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn samples(&self) -> &SampleSet {
        &self.samples
    }

    pub fn cloud(&self) -> &DenseSurfaceCloud {
        &self.cloud
    }

    pub fn q(&self) -> &[f64] {
        &self.q
    }

    pub fn tick(&self) -> usize {
        self.tick
    }

    pub fn t(&self) -> f64 {
        self.tick as f64 * self.scenario.dt()
    }

    pub fn snapshot(&self) -> Option<&FieldSnapshot> {
        self.snapshot.as_ref()
    }

    pub fn live(&self) -> &LiveState {
        &self.live
    }

    pub fn config(&self) -> &FilterConfig {
        &self.scenario.config
    }

    pub fn nominal_spec(&self) -> &NominalSpec {
        &self.scenario.nominal
    }

    /// Summary fields known before any tick runs.
    pub fn summary_base(&self) -> EpisodeSummary {
        EpisodeSummary {
            scenario: self.scenario.name.clone(),
            sample_count: self.samples.count(),
            epsilon: self.scenario.epsilon,
            delta: self.scenario.delta,
            delta_achieved: self.cloud.delta,
            dt: self.scenario.dt(),
            filtered: self.options.filter_enabled,
            ..Default::default()
        }
    }

    /// Obstacle shapes at the current time.
    pub fn obstacles_now(&self) -> Vec<ObstacleShape> {
        self.scenario.obstacles_at(self.t(), &self.overrides)
    }

    /// Field stage of a tick: rebuilds the field if anything moved.
    /// Returns whether it did.
    pub fn refresh_field(&mut self, shapes: &[ObstacleShape], clock: &dyn Clock) -> Result<bool> {
        let dynamic: Vec<ObstacleShape> = self.dynamic.iter().map(|&i| shapes[i]).collect();
        let stale = self.snapshot.is_none() || dynamic != self.last_dynamic;
        if stale {
            self.snapshot = Some(self.builder.build(&dynamic, self.t(), clock)?);
            self.last_dynamic = dynamic;
        } else if let Some(s) = &self.snapshot {
            if s.pair.previous.is_some() {
                self.snapshot = Some(s.settled());
            }
        }
        Ok(stale)
    }

    pub fn epoch(&self) -> u64 {
        self.epoch
    }

    /// Inputs for the next field build at the current time.
    pub fn field_job(&self) -> FieldJob {
        let shapes = self.obstacles_now();
        FieldJob {
            epoch: self.epoch,
            dynamic_shapes: self.dynamic.iter().map(|&i| shapes[i]).collect(),
            t: self.t(),
        }
    }

    /// The builder fields are made with; an outside loop clones it when the
    /// epoch changes.
    pub fn field_builder(&self) -> &FieldBuilder {
        &self.builder
    }

    /// Installs a field built elsewhere (the concurrent field loop). Fields
    /// from an older epoch are dropped; returns whether it was installed.
    pub fn install_snapshot(&mut self, snapshot: FieldSnapshot, epoch: u64) -> bool {
        if epoch != self.epoch {
            return false;
        }
        self.snapshot = Some(snapshot);
        self.fresh = true;
        true
    }

    /// Whether a field arrived since the last call.
    pub fn take_fresh(&mut self) -> bool {
        core::mem::take(&mut self.fresh)
    }

    /// One full lockstep tick.
    pub fn step(&mut self, clock: &dyn Clock) -> Result<TelemetryRecord> {
        let shapes = self.obstacles_now();
        let refreshed = self.refresh_field(&shapes, clock)?;
        self.control_tick(&shapes, refreshed, clock)
    }

    /// Control stage of a tick against the installed field.
    pub fn control_tick(
        &mut self,
        shapes: &[ObstacleShape],
        refreshed: bool,
        clock: &dyn Clock,
    ) -> Result<TelemetryRecord> {
        let snapshot = self.snapshot.as_ref().ok_or(Error::MissingField)?;
        let sc = &self.scenario;
        let model = &sc.robot;
        let n = model.dof();
        let q = self.q.clone();
        let state = model.chain_state(&q)?;
        let ee_point = model.end_effector;
        let ee = state.link_poses[ee_point.link]
            .transform_point(&ee_point.local.into())
            .coords;
        let jac_ee = model.jacobian_from_state(&state, ee_point.link, &ee);
        let centers: Vec<Vec3> = shapes.iter().map(ObstacleShape::center).collect();

        let (v_nom, goal) = nominal_velocity(
            &sc.nominal,
            model,
            &sc.q0,
            &q,
            &ee,
            &jac_ee,
            &centers,
            &mut self.nominal,
        );

        let barrier: BarrierRows =
            barrier_rows(model, &q, &self.samples, Some(&snapshot.pair), &sc.config)?;

        let (result, kkt_residual) = if self.options.filter_enabled {
            let mut hard = if self.options.barriers_enabled {
                barrier.rows.clone()
            } else {
                Vec::new()
            };
            hard.extend(joint_limit_rows(model, &q, &sc.config));
            let soft = match goal {
                Some(g) if sc.use_clf => Some(clf_row(&ee, &g, &jac_ee, &sc.config)),
                _ => None,
            };
            let t0 = clock.now();
            let mut result = solve_filter_qp(&v_nom, &hard, soft.as_ref(), &sc.config);
            result.solve_time = clock.now() - t0;
            let kkt = if result.status == QpStatus::Optimal {
                let k = filter_kkt(&v_nom, &hard, soft.as_ref(), &sc.config, &result);
                k.stationarity
                    .max(-k.min_multiplier)
                    .max(k.complementarity)
                    .max(k.primal)
            } else {
                0.0
            };
            (result, kkt)
        } else {
            let result = FilterResult {
                v_safe: v_nom.clone(),
                slack: 0.0,
                status: QpStatus::Optimal,
                active_set: Vec::new(),
                multipliers: Vec::new(),
                max_violation: 0.0,
                solve_time: 0.0,
            };
            (result, 0.0)
        };

        let geometry = GridGeometry::new(sc.bounds, sc.dims);
        let clearance =
            ground_truth_min_clearance(&state.link_poses, &self.cloud, shapes, &geometry);
        let premise_ok = (barrier.min_h > 0.0).then(|| {
            self.samples
                .iter()
                .zip(&barrier.positions)
                .filter(|(p, _)| p.link != 0)
                .all(|(_, y)| !snapshot.premise.is_occupied_at(y))
        });
        let buffer = sc.epsilon + sc.delta;

        let guard = self.options.filter_enabled && self.options.barriers_enabled;
        let (q_next, clamped, step_scale) = if guard {
            guarded_step(
                model,
                &q,
                &result.v_safe,
                sc.dt(),
                &self.samples,
                &barrier.h,
                snapshot,
            )?
        } else {
            let (q_next, clamped) = step_state(&q, &result.v_safe, sc.dt(), model);
            (q_next, clamped, 1.0)
        };
        let record = TelemetryRecord {
            t: self.t(),
            tick: self.tick,
            q,
            v_nom,
            v_safe: result.v_safe.clone(),
            min_h_samples: barrier.min_h,
            argmin_sample: barrier.argmin,
            min_true_clearance: clearance.min,
            base_clearance: clearance.base,
            qp_time: result.solve_time,
            pde_time: if refreshed { snapshot.pde_time } else { 0.0 },
            buffer_time: if refreshed { snapshot.buffer_time } else { 0.0 },
            pde_iters: if refreshed { snapshot.pde_iters } else { 0 },
            pde_residual: snapshot.pde_residual,
            field_refreshed: refreshed,
            qp_status: result.status,
            slack: result.slack,
            max_violation: result.max_violation,
            kkt_residual,
            active_rows: result.active_set.len(),
            clamp_anomaly: clamped,
            step_scale,
            premise_ok,
            base_proximal: clearance.base < buffer,
            clamped_samples: barrier.clamped.len(),
            ee: ee.into(),
            goal: goal.map(Into::into),
            filtered: self.options.filter_enabled,
            n_samples: self.samples.count(),
            epsilon: sc.epsilon,
        };
        debug_assert_eq!(record.v_safe.len(), n);

        self.live = LiveState {
            link_poses: state.link_poses,
            sample_positions: barrier.positions,
            sample_h: barrier.h,
            obstacles: shapes.to_vec(),
        };
        self.q = q_next;
        self.tick += 1;
        Ok(record)
    }

    /// Switches to end-effector tracking of `target` (clamped into bounds).
    pub fn set_target(&mut self, target: Vec3) {
        let target = self.scenario.bounds.clamp(&target);
        if !matches!(self.scenario.nominal, NominalSpec::External { .. }) {
            let (gain, speed) = match self.scenario.nominal {
                NominalSpec::EeWaypoints { gain, speed, .. }
                | NominalSpec::AdversarialTowardObstacle { gain, speed, .. } => (gain, speed),
                _ => (2.0, 0.5),
            };
            self.scenario.nominal = NominalSpec::External { gain, speed };
        }
        self.nominal.target = Some(target);
    }

    pub fn set_nominal(&mut self, spec: NominalSpec) -> Result<()> {
        spec.validate(self.scenario.robot.dof(), self.scenario.obstacles.len())?;
        self.scenario.nominal = spec;
        self.nominal = NominalState::default();
        Ok(())
    }

    /// Places obstacle `index` at `pose` until reset. A previously cached
    /// static obstacle becomes dynamic.
    pub fn move_obstacle(&mut self, index: usize, pose: Pose) -> Result<()> {
        if index >= self.scenario.obstacles.len() {
            return Err(Error::param("index", "no such obstacle"));
        }
        if !self.scenario.bounds.contains(&pose.translation.vector) {
            return Err(Error::param("pose", "must lie within the workspace bounds"));
        }
        if !self.dynamic.contains(&index) {
            self.dynamic.push(index);
            self.dynamic.sort_unstable();
            self.builder = Self::make_builder(&self.scenario, &self.dynamic, &self.cloud)?;
            self.snapshot = None;
            self.epoch += 1;
        }
        self.overrides[index] = Some(pose);
        Ok(())
    }

    /// Sets a filter gain by name.
    pub fn set_gain(&mut self, name: &str, value: f64) -> Result<()> {
        let mut cfg = self.scenario.config;
        match name {
            "alpha" => cfg.alpha = value,
            "issf_eps0" => cfg.issf_eps0 = value,
            "alpha_joint" => cfg.alpha_joint = value,
            "clf_gamma" => cfg.clf_gamma = value,
            "slack_penalty" => cfg.slack_penalty = value,
            _ => return Err(Error::param("gain", "unknown gain name")),
        }
        cfg.validate()?;
        self.scenario.config = cfg;
        Ok(())
    }

    /// Back to `q0`, `t = 0`, scripted obstacle poses and the original
    /// nominal mode.
    pub fn reset(&mut self, original: &Scenario) -> Result<()> {
        let epoch = self.epoch + 1;
        *self = Engine::new(original.clone(), self.options)?;
        self.epoch = epoch;
        Ok(())
    }

    /// Flattened sample index → body point.
    pub fn sample_points(&self) -> Vec<BodyPoint> {
        self.samples.iter().copied().collect()
    }

    pub fn describe(&self) -> String {
        alloc::format!(
            "{}: n = {}, N = {}, eps = {}, delta = {} (achieved {:.4})",
            self.scenario.name,
            self.scenario.robot.dof(),
            self.samples.count(),
            self.scenario.epsilon,
            self.scenario.delta,
            self.cloud.delta
        )
        .to_string()
    }
}

/// Sampled-data guard on the integration step. The barrier row only bounds
/// the first-order change of `h`; where the field is strongly curved (a
/// sample deep in a cell whose other nodes are occupied) one explicit step
/// can carry a sample onto `h = 0` and leave it there with a vanishing
/// gradient. The step is halved until no sample with `h > 0` loses more
/// than half of it, evaluated exactly at the next configuration.
fn guarded_step(
    model: &crate::kinematics::RobotModel,
    q: &[f64],
    v: &[f64],
    dt: f64,
    samples: &SampleSet,
    h_now: &[f64],
    snapshot: &FieldSnapshot,
) -> Result<(Vec<f64>, bool, f64)> {
    const MAX_HALVINGS: usize = 12;
    let field = &snapshot.pair.current;
    let (lo, hi) = field.geometry.inner_box();
    let mut scale = 1.0;
    for _ in 0..=MAX_HALVINGS {
        let scaled: Vec<f64> = v.iter().map(|x| x * scale).collect();
        let (q_next, clamped) = step_state(q, &scaled, dt, model);
        let state = model.chain_state(&q_next)?;
        let mut ok = true;
        for (p, &h) in samples.iter().zip(h_now) {
            // base samples carry NaN and never fail
            if !(h > 0.0) {
                continue;
            }
            let y = state.link_poses[p.link]
                .transform_point(&p.local.into())
                .coords;
            let yc = Vec3::new(
                y.x.clamp(lo.x, hi.x),
                y.y.clamp(lo.y, hi.y),
                y.z.clamp(lo.z, hi.z),
            );
            if field.sample_value(&yc)? < 0.5 * h {
                ok = false;
                break;
            }
        }
        if ok {
            return Ok((q_next, clamped, scale));
        }
        scale *= 0.5;
    }
    Ok((q.to_vec(), false, 0.0))
}
