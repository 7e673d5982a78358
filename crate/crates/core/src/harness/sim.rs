//! The deterministic 15 Hz simulation loop.

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::Vector3;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::control::{
    direct_step, ibvs_step, joint_limit_guard, ControllerStatus, DirectConfig, DirectState, GuardDecision, IbvsState, CONTROL_DT,
};
use crate::geometry::{project, CameraModel};
use crate::perception::{
    detect_hsv, evaluate_detections, motion_gate, observe_detection, AssocRule, BBox, Detection2D, DetectorKind, GateDecision,
};
use crate::planning::{
    filter_targets, order_targets, plan_straight, sm_step, Controller, MachineConfig, MotionPhase, PickMachine, PickState,
    ReachabilitySphere, RoIBox, SmCommand, SmEvent,
};
use crate::rng::{stream, Stream};
use crate::tracking::{step_in_place, TrackerState};
use crate::world::{
    actuate_gripper, add_noise, apply_ee_velocity, generate_scenario, render_view, sample_pick_outcome, truth_boxes, ArmState, Fruit,
    GripperCommand, GripperModel, GuardEvent, TruthBox, WorldScenario,
};

use super::report::{MetricsReport, PickEvent, RunTotals};
use super::{HarnessError, RunConfig};

/// Plane-guard truncations shorter than this are rounding, not contact.
const GUARD_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionRecord {
    pub t: f64,
    pub state_from: PickState,
    pub event: String,
    pub state_to: PickState,
    pub target_id: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackRecord {
    pub frame: u64,
    pub id: u64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
    #[serde(rename = "trace_P")]
    pub trace_p: f64,
    pub misses: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TelemetryRecord {
    pub t: f64,
    pub controller: Controller,
    pub du: Option<f64>,
    pub dv: Option<f64>,
    pub cmd: [f64; 3],
    pub status: ControllerStatus,
    pub miss_count: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EventLog {
    pub transitions: Vec<TransitionRecord>,
    pub tracks: Vec<TrackRecord>,
    pub telemetry: Vec<TelemetryRecord>,
}

fn jsonl<T: Serialize>(rows: &[T]) -> String {
    let mut out = String::new();
    for r in rows {
        out.push_str(&serde_json::to_string(r).expect("log records serialize"));
        out.push('\n');
    }
    out
}

impl EventLog {
    pub fn transitions_jsonl(&self) -> String {
        jsonl(&self.transitions)
    }

    pub fn tracks_jsonl(&self) -> String {
        jsonl(&self.tracks)
    }

    pub fn telemetry_jsonl(&self) -> String {
        jsonl(&self.telemetry)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub log: EventLog,
    pub picks: Vec<PickEvent>,
    pub totals: RunTotals,
    pub report: MetricsReport,
}

/// Whether per-tick logs are kept. Monte-Carlo runs skip them.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOptions {
    pub record_logs: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self { record_logs: true }
    }
}

/// Generates the scenario from `cfg` and runs it.
pub fn run_scenario(cfg: &RunConfig) -> Result<RunResult, HarnessError> {
    run_scenario_with(cfg, RunOptions::default())
}

pub fn run_scenario_with(cfg: &RunConfig, options: RunOptions) -> Result<RunResult, HarnessError> {
    cfg.validate()?;
    let world = generate_scenario(&cfg.scenario, cfg.seed).map_err(|e| HarnessError::Config(e.to_string()))?;
    run_world(cfg, world, options)
}

/// Runs a prepared world.
pub fn run_world(cfg: &RunConfig, world: WorldScenario, options: RunOptions) -> Result<RunResult, HarnessError> {
    cfg.validate()?;
    world.validate().map_err(|e| HarnessError::Config(e.to_string()))?;
    let mut sim = Sim::new(cfg, world, options)?;
    sim.run()?;
    Ok(sim.finish())
}

struct Frame {
    cam: CameraModel,
    detections: Vec<Detection2D>,
    truths: Vec<TruthBox>,
    color: crate::raster::HsvRaster,
    depth: crate::raster::DepthRaster,
}

#[derive(Debug, Clone)]
enum After {
    Settle,
    Grasp,
    Event(SmEvent),
}

#[derive(Debug, Clone)]
enum Activity {
    Idle,
    Move { from: Vector3<f64>, to: Vector3<f64>, elapsed: u32, total: u32, then: After },
    Wait { remaining: u32, then: After },
    Settle { remaining: u32 },
    Gross { state: DirectState },
    Direct { state: DirectState, prev_cmd: Vector3<f64>, retract: bool },
    Ibvs { state: IbvsState },
}

struct Attempt {
    event: PickEvent,
    goal: Vector3<f64>,
    start_tick: u64,
}

struct Sim<'a> {
    cfg: &'a RunConfig,
    options: RunOptions,
    world: WorldScenario,
    arm: ArmState,
    gripper: GripperModel,
    tracker: TrackerState,
    machine: PickMachine,
    activity: Activity,
    tick: u64,
    platform_x: f64,
    prev_roi: Option<RoIBox>,
    last_speed: f64,
    render_rng: ChaCha8Rng,
    detector_rng: ChaCha8Rng,
    outcome_rng: ChaCha8Rng,
    planner_rng: ChaCha8Rng,
    log: EventLog,
    picks: Vec<PickEvent>,
    attempt: Option<Attempt>,
    attempted_positions: Vec<Vector3<f64>>,
    attempted_ids: BTreeSet<u64>,
    cached: BTreeMap<u64, Vector3<f64>>,
    totals: RunTotals,
    frame: Option<Frame>,
    finished: bool,
}

impl<'a> Sim<'a> {
    fn new(cfg: &'a RunConfig, world: WorldScenario, options: RunOptions) -> Result<Self, HarnessError> {
        let platform_x = 0.5 * cfg.roi_extents[0];
        let platform = Vector3::new(platform_x, 0.0, 0.0);
        let mut proxy = cfg.joint_proxy.clone();
        proxy.reference_position[0] += platform_x;
        let home = cfg.poses.at_platform(&platform).home;
        let arm = ArmState::at(home, proxy, cfg.ee_velocity_cap).map_err(|e| HarnessError::Config(e.to_string()))?;
        let fruit_total = world.fruits.len() as u64;
        Ok(Self {
            cfg,
            options,
            world,
            arm,
            gripper: GripperModel::new(cfg.gripper),
            tracker: TrackerState::new(),
            machine: PickMachine::new(MachineConfig {
                ibvs_enabled: cfg.ibvs_enabled,
                gripper_has_feedback: cfg.gripper.has_feedback(),
            }),
            activity: Activity::Idle,
            tick: 0,
            platform_x,
            prev_roi: None,
            last_speed: 0.0,
            render_rng: stream(cfg.seed, Stream::Render),
            detector_rng: stream(cfg.seed, Stream::Detector),
            outcome_rng: stream(cfg.seed, Stream::Outcome),
            planner_rng: stream(cfg.seed, Stream::Planner),
            log: EventLog::default(),
            picks: Vec::new(),
            attempt: None,
            attempted_positions: Vec::new(),
            attempted_ids: BTreeSet::new(),
            cached: BTreeMap::new(),
            totals: RunTotals {
                fruit_total,
                ..Default::default()
            },
            frame: None,
            finished: false,
        })
    }

    fn t(&self) -> f64 {
        self.tick as f64 * CONTROL_DT
    }

    fn platform(&self) -> Vector3<f64> {
        Vector3::new(self.platform_x, 0.0, 0.0)
    }

    fn roi(&self) -> RoIBox {
        RoIBox {
            center: self.platform() + Vector3::from(self.cfg.roi_center),
            extents: Vector3::from(self.cfg.roi_extents),
        }
    }

    fn camera(&self) -> CameraModel {
        CameraModel::new(self.cfg.intrinsics, self.arm.ee_pose.compose(&self.cfg.hand_eye))
    }

    fn run(&mut self) -> Result<(), HarnessError> {
        let max_ticks = (self.cfg.max_sim_time / CONTROL_DT).round() as u64;
        self.fire(SmEvent::Start)?;
        while !self.finished && self.tick < max_ticks {
            self.step()?;
        }
        Ok(())
    }

    fn finish(mut self) -> RunResult {
        self.totals.tracks_created = self.tracker.tracks_created();
        self.totals.tracks_pruned = self.tracker.tracks_pruned();
        self.totals.ticks = self.tick;
        let report = MetricsReport::from_picks(
            self.cfg.gripper,
            self.cfg.motion,
            self.cfg.perception.detector.name(),
            1,
            &self.picks,
            &self.totals,
        );
        RunResult {
            log: self.log,
            picks: self.picks,
            totals: self.totals,
            report,
        }
    }

    fn step(&mut self) -> Result<(), HarnessError> {
        let gate = motion_gate(self.last_speed, 0.0, &self.cfg.perception.motion_gate);
        let servoing = matches!(self.activity, Activity::Ibvs { .. });
        self.frame = if gate == GateDecision::Pass || servoing { Some(self.sense()) } else { None };
        if gate == GateDecision::Pass {
            self.observe()?;
        }
        let p0 = self.arm.position();
        self.act()?;
        self.last_speed = (self.arm.position() - p0).norm() / CONTROL_DT;
        self.tick += 1;
        Ok(())
    }

    fn sense(&mut self) -> Frame {
        let cam = self.camera();
        let mut view = render_view(&self.world, &cam, &self.cfg.render);
        add_noise(&mut view, &self.cfg.render, &mut self.render_rng);
        let truths = truth_boxes(&self.world, &cam, &view);
        let detections = match &self.cfg.perception.detector {
            DetectorKind::Hsv => detect_hsv(&view.color, &self.cfg.perception.detection_thresholds),
            DetectorKind::Synthetic(d) => d.detect(&truths, cam.intrinsics.width(), cam.intrinsics.height(), &mut self.detector_rng),
        };
        Frame {
            cam,
            detections,
            truths,
            color: view.color,
            depth: view.depth,
        }
    }

    fn observe(&mut self) -> Result<(), HarnessError> {
        let Some(frame) = &self.frame else { return Ok(()) };
        let p = &self.cfg.perception;
        let w = frame.cam.intrinsics.width();
        let h = frame.cam.intrinsics.height();
        // boxes cut by the image border give biased centroids
        let obs: Vec<_> = frame
            .detections
            .iter()
            .filter(|d| !d.bbox.is_truncated(w, h))
            .filter_map(|d| observe_detection(d, &frame.color, &frame.depth, &p.patch_thresholds, &frame.cam, &p.validity).ok())
            .collect();
        step_in_place(&mut self.tracker, &obs, &frame.cam, &self.cfg.noise)?;

        let rule = AssocRule {
            image_size: Some((w, h)),
            ..p.assoc_rule
        };
        let dets: Vec<BBox> = frame.detections.iter().map(|d| d.bbox).collect();
        let truth: Vec<BBox> = frame.truths.iter().filter(|t| t.visible_pixels > 0).map(|t| t.bbox).collect();
        self.totals.detection.merge(&evaluate_detections(&dets, &truth, &rule));

        if self.options.record_logs {
            for s in self.tracker.snapshot() {
                self.log.tracks.push(TrackRecord {
                    frame: self.tick,
                    id: s.id,
                    x: s.position.x,
                    y: s.position.y,
                    z: s.position.z,
                    trace_p: s.trace_p,
                    misses: s.misses,
                });
            }
        }
        Ok(())
    }

    fn apply(&mut self, v: &Vector3<f64>, phase: MotionPhase) -> Result<Vec<GuardEvent>, HarnessError> {
        let (arm, events) = apply_ee_velocity(&self.arm, v, CONTROL_DT, &self.cfg.planes, phase)?;
        self.arm = arm;
        Ok(events
            .into_iter()
            .filter(|e| match e {
                GuardEvent::EmergencyStop { truncated_by } | GuardEvent::SoftPlaneContact { truncated_by } => *truncated_by > GUARD_EPS,
            })
            .collect())
    }

    fn telemetry(&mut self, controller: Controller, delta: Option<(f64, f64)>, cmd: &Vector3<f64>, status: ControllerStatus, miss: Option<u32>) {
        if self.options.record_logs {
            self.log.telemetry.push(TelemetryRecord {
                t: self.t(),
                controller,
                du: delta.map(|d| d.0),
                dv: delta.map(|d| d.1),
                cmd: [cmd.x, cmd.y, cmd.z],
                status,
                miss_count: miss,
            });
        }
    }

    fn controller_done(&mut self, controller: Controller, status: ControllerStatus) -> Result<(), HarnessError> {
        if let Some(a) = &mut self.attempt {
            a.event.controller_trace.push((controller, status));
        }
        self.fire(if status == ControllerStatus::Success {
            SmEvent::ControllerSuccess
        } else {
            SmEvent::ControllerFailed
        })
    }

    fn act(&mut self) -> Result<(), HarnessError> {
        match std::mem::replace(&mut self.activity, Activity::Idle) {
            Activity::Idle => {}
            Activity::Move {
                from,
                to,
                elapsed,
                total,
                then,
            } => {
                let elapsed = elapsed + 1;
                self.arm.teleport(if elapsed >= total { to } else { from.lerp(&to, f64::from(elapsed) / f64::from(total)) });
                if elapsed >= total {
                    self.after(then)?;
                } else {
                    self.activity = Activity::Move {
                        from,
                        to,
                        elapsed,
                        total,
                        then,
                    };
                }
            }
            Activity::Wait { remaining, then } => {
                if remaining <= 1 {
                    self.after(then)?;
                } else {
                    self.activity = Activity::Wait {
                        remaining: remaining - 1,
                        then,
                    };
                }
            }
            Activity::Settle { remaining } => {
                if remaining <= 1 {
                    self.look_reached()?;
                } else {
                    self.activity = Activity::Settle { remaining: remaining - 1 };
                }
            }
            Activity::Gross { state } => {
                let cfg = DirectConfig {
                    ee_vel: self.cfg.gross_speed,
                    ..self.cfg.direct
                };
                let (state, cmd) = direct_step(&state, &self.arm.position(), &cfg);
                match state.status {
                    ControllerStatus::Running => {
                        let events = self.apply(&cmd, MotionPhase::Gross)?;
                        if events.iter().any(|e| matches!(e, GuardEvent::EmergencyStop { .. })) {
                            self.fire(SmEvent::EmergencyStop)?;
                        } else {
                            self.activity = Activity::Gross { state };
                        }
                    }
                    ControllerStatus::Success => self.fire(SmEvent::MotionDone)?,
                    _ => self.fire(SmEvent::PlanFailed)?,
                }
            }
            Activity::Direct { state, prev_cmd, retract } => self.direct_tick(state, prev_cmd, retract)?,
            Activity::Ibvs { state } => self.ibvs_tick(state)?,
        }
        Ok(())
    }

    fn direct_tick(&mut self, state: DirectState, prev_cmd: Vector3<f64>, retract: bool) -> Result<(), HarnessError> {
        if retract {
            let (state, cmd) = direct_step(&state, &self.arm.position(), &self.cfg.direct);
            if state.status.is_terminal() {
                return self.fire(SmEvent::MotionDone);
            }
            self.apply(&cmd, MotionPhase::FinalApproach)?;
            self.activity = Activity::Direct { state, prev_cmd: cmd, retract };
            return Ok(());
        }
        let guard = joint_limit_guard(&self.arm.joint_proxies, &self.arm.joint_limits, self.cfg.direct.joint_limit_margin);
        let (status, cmd, next) = match guard {
            GuardDecision::ReverseOneStep => (ControllerStatus::FailJointLimit, -prev_cmd, state),
            GuardDecision::StopFailure => (ControllerStatus::FailJointLimit, Vector3::zeros(), state),
            GuardDecision::Ok => {
                let (s, c) = direct_step(&state, &self.arm.position(), &self.cfg.direct);
                (s.status, c, s)
            }
        };
        if cmd != Vector3::zeros() {
            self.apply(&cmd, MotionPhase::FinalApproach)?;
        }
        self.telemetry(Controller::Direct, None, &cmd, status, None);
        if status.is_terminal() {
            self.controller_done(Controller::Direct, status)
        } else {
            self.activity = Activity::Direct {
                state: next,
                prev_cmd: cmd,
                retract,
            };
            Ok(())
        }
    }

    fn ibvs_tick(&mut self, state: IbvsState) -> Result<(), HarnessError> {
        let (detections, cam) = match &self.frame {
            Some(f) => (f.detections.clone(), f.cam),
            None => (Vec::new(), self.camera()),
        };
        let out = ibvs_step(&state, &detections, self.arm.joint_speed, &self.cfg.ibvs);
        let world_cmd = cam.pose.apply_vector(&out.cmd);
        if out.cmd != Vector3::zeros() {
            self.apply(&world_cmd, MotionPhase::FinalApproach)?;
        }
        self.telemetry(Controller::Ibvs, out.delta, &out.cmd, out.status, Some(out.state.miss_count));
        if out.status.is_terminal() {
            self.controller_done(Controller::Ibvs, out.status)
        } else {
            self.activity = Activity::Ibvs { state: out.state };
            Ok(())
        }
    }

    fn after(&mut self, then: After) -> Result<(), HarnessError> {
        match then {
            After::Settle => {
                self.activity = Activity::Settle {
                    remaining: self.cfg.look_settle_ticks.max(1),
                };
                Ok(())
            }
            After::Grasp => self.grasp(),
            After::Event(e) => self.fire(e),
        }
    }

    fn look_reached(&mut self) -> Result<(), HarnessError> {
        let roi = self.roi();
        let sphere = ReachabilitySphere {
            center: self.platform() + Vector3::from(self.cfg.reach_center),
            radius: self.cfg.reach_radius,
        };
        let snapshot = self.tracker.snapshot();
        let tagged = filter_targets(&snapshot, &roi, &sphere);
        let ordered = order_targets(&tagged, self.prev_roi.as_ref(), self.cfg.roi_overlap);
        let r = self.cfg.attempt_exclusion_radius;
        let queue: Vec<u64> = ordered
            .iter()
            .filter(|t| !self.attempted_ids.contains(&t.id))
            .filter(|t| self.attempted_positions.iter().all(|p| (p - t.position).norm() > r))
            .map(|t| {
                self.cached.insert(t.id, t.position);
                t.id
            })
            .collect();
        self.fire(SmEvent::LookReached { queue })
    }

    fn nearest_fruit(&self, p: &Vector3<f64>) -> Option<(&Fruit, f64)> {
        self.world
            .fruits
            .iter()
            .map(|f| (f, (f.position - p).norm()))
            .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.id.cmp(&b.0.id)))
    }

    fn grasp(&mut self) -> Result<(), HarnessError> {
        let ee = self.arm.position();
        let fruit_id = self.attempt.as_ref().and_then(|a| a.event.fruit_id);
        let target = fruit_id.and_then(|id| self.world.fruit(id)).map(|f| (f.position - ee).norm());
        let position_error = target.or_else(|| self.nearest_fruit(&ee).map(|(_, d)| d));
        let in_cup = self.nearest_fruit(&ee).filter(|(_, d)| *d <= self.cfg.capture_radius).map(|(f, _)| f.clone());
        let outcome = sample_pick_outcome(
            &self.cfg.outcome,
            self.cfg.gripper,
            self.cfg.motion,
            position_error.unwrap_or(f64::INFINITY),
            fruit_id,
            &mut self.outcome_rng,
        )?;
        self.gripper = actuate_gripper(&self.gripper, GripperCommand::Close, in_cup.as_ref());
        if let Some(a) = &mut self.attempt {
            a.event.outcome = Some(outcome);
            a.event.position_error = position_error;
        }
        self.fire(SmEvent::GripperClosed)
    }

    fn fire(&mut self, event: SmEvent) -> Result<(), HarnessError> {
        let from = self.machine.state();
        let prev_target = self.machine.target();
        let (next, cmds) = sm_step(&self.machine, &event)?;
        let to = next.state();
        self.machine = next;
        self.log.transitions.push(TransitionRecord {
            t: self.t(),
            state_from: from,
            event: event.name().to_string(),
            state_to: to,
            target_id: self.machine.target().or(prev_target),
        });
        if let Some(a) = &mut self.attempt {
            a.event.states.push(to);
        }
        if matches!(from, PickState::Release | PickState::AbortTarget) && to == PickState::SelectTarget {
            self.close_attempt();
        }
        for c in cmds {
            self.exec(c)?;
        }
        if self.machine.state() == PickState::SelectTarget && !matches!(self.activity, Activity::Idle) {
            return Ok(());
        }
        if self.machine.state() == PickState::SelectTarget {
            self.fire(SmEvent::Select)?;
        }
        Ok(())
    }

    fn close_attempt(&mut self) {
        if let Some(mut a) = self.attempt.take() {
            // the final SELECT_TARGET belongs to the next attempt
            a.event.states.pop();
            a.event.wall_steps = self.tick - a.start_tick;
            a.event.attempt_index = self.picks.len() as u32;
            self.picks.push(a.event);
        }
    }

    fn exec(&mut self, cmd: SmCommand) -> Result<(), HarnessError> {
        let poses = self.cfg.poses.at_platform(&self.platform());
        match cmd {
            SmCommand::MoveToLook => {
                self.activity = Activity::Move {
                    from: self.arm.position(),
                    to: poses.look,
                    elapsed: 0,
                    total: self.cfg.known_move_ticks,
                    then: After::Settle,
                };
            }
            SmCommand::PlanApproach { target } => {
                let goal = self.tracker.position(target).or_else(|| self.cached.get(&target).copied()).ok_or_else(|| {
                    HarnessError::Config(format!("target {target} has no cached position"))
                })?;
                let r = self.cfg.attempt_exclusion_radius;
                let fruit_id = self.nearest_fruit(&goal).filter(|(_, d)| *d <= r).map(|(f, _)| f.id);
                self.attempted_positions.push(goal);
                self.attempted_ids.insert(target);
                self.attempt = Some(Attempt {
                    event: PickEvent {
                        target_id: target,
                        fruit_id,
                        attempt_index: 0,
                        controller_trace: Vec::new(),
                        outcome: None,
                        position_error: None,
                        wall_steps: 0,
                        states: vec![PickState::SelectTarget, PickState::MoveApproach],
                    },
                    goal,
                    start_tick: self.tick,
                });
                let p = self.cfg.plan_failure_probability;
                let timed_out = p > 0.0 && self.planner_rng.random_bool(p);
                let approach = poses.approach(&goal, &self.cfg.planes);
                match plan_straight(&self.arm.position(), &approach, &self.cfg.planes, MotionPhase::Gross) {
                    Ok(_) if !timed_out => {
                        self.activity = Activity::Gross {
                            state: DirectState::new(approach),
                        };
                    }
                    _ => self.fire(SmEvent::PlanFailed)?,
                }
            }
            SmCommand::StartController { controller, .. } => {
                let goal = self.attempt.as_ref().map(|a| a.goal).unwrap_or_else(|| self.arm.position());
                self.activity = match controller {
                    Controller::Direct => Activity::Direct {
                        state: DirectState::new(goal),
                        prev_cmd: Vector3::zeros(),
                        retract: false,
                    },
                    Controller::Ibvs => {
                        let cam = self.camera();
                        let pr = project(&goal, &cam);
                        let reference = (cam.intrinsics.cx(), cam.intrinsics.cy());
                        let detections = self.frame.as_ref().map(|f| f.detections.as_slice()).unwrap_or(&[]);
                        Activity::Ibvs {
                            state: IbvsState::start(reference, (pr.u, pr.v), detections),
                        }
                    }
                };
            }
            SmCommand::CloseGripper => {
                self.activity = Activity::Wait {
                    remaining: self.cfg.gripper_ticks,
                    then: After::Grasp,
                };
            }
            SmCommand::ReadFeedback => {
                let flag = self.gripper.feedback_flag;
                self.fire(SmEvent::GripperFeedback(flag))?;
            }
            SmCommand::OpenGripper => {
                self.gripper = actuate_gripper(&self.gripper, GripperCommand::Open, None);
                if self.machine.state() == PickState::Release {
                    self.activity = Activity::Wait {
                        remaining: self.cfg.gripper_ticks,
                        then: After::Event(SmEvent::GripperOpened),
                    };
                }
            }
            SmCommand::Retract => {
                let outcome = self.attempt.as_ref().and_then(|a| a.event.outcome);
                if let Some(o) = outcome {
                    if o.category.detaches_fruit() {
                        if let Some(id) = o.fruit_id {
                            self.world.remove_fruit(id);
                        }
                    }
                }
                let goal = self.arm.position() + self.cfg.planes.outward_normal() * poses.approach_offset;
                self.activity = Activity::Direct {
                    state: DirectState::new(goal),
                    prev_cmd: Vector3::zeros(),
                    retract: true,
                };
            }
            SmCommand::MoveToDrop => {
                self.activity = Activity::Move {
                    from: self.arm.position(),
                    to: poses.drop,
                    elapsed: 0,
                    total: self.cfg.known_move_ticks,
                    then: After::Event(SmEvent::MotionDone),
                };
            }
            SmCommand::AbortTarget { .. } => {
                let p = self.arm.position();
                let clearance = self.cfg.planes.clearance(&p, MotionPhase::Gross);
                if clearance < 0.0 {
                    // back out behind the hard plane before the next target
                    self.activity = Activity::Move {
                        from: p,
                        to: p - self.cfg.planes.outward_normal() * clearance,
                        elapsed: 0,
                        total: self.cfg.known_move_ticks,
                        then: After::Event(SmEvent::Next),
                    };
                } else {
                    self.fire(SmEvent::Next)?;
                }
            }
            SmCommand::StopComplete => {
                self.prev_roi = Some(self.roi());
                let step = self.cfg.platform_step();
                self.platform_x += step;
                self.arm.proxy.reference_position[0] += step;
                if self.roi().min().x >= self.world.trellis_length {
                    self.finished = true;
                } else {
                    self.fire(SmEvent::Start)?;
                }
            }
        }
        Ok(())
    }
}
