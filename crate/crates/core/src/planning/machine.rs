//! Picking state machine. Transitions are pure; the simulation loop turns
//! emitted commands into motion and reports completion as events.

use std::collections::VecDeque;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::world::FeedbackFlag;

use super::PlanningError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum PickState {
    Idle,
    MoveLook,
    SelectTarget,
    MoveApproach,
    FinalApproachIbvs,
    FinalApproachDirect,
    Grasp,
    Verify,
    RetryIbvs,
    Retract,
    MoveDrop,
    Release,
    AbortTarget,
}

impl PickState {
    pub fn as_str(self) -> &'static str {
        match self {
            PickState::Idle => "IDLE",
            PickState::MoveLook => "MOVE_LOOK",
            PickState::SelectTarget => "SELECT_TARGET",
            PickState::MoveApproach => "MOVE_APPROACH",
            PickState::FinalApproachIbvs => "FINAL_APPROACH_IBVS",
            PickState::FinalApproachDirect => "FINAL_APPROACH_DIRECT",
            PickState::Grasp => "GRASP",
            PickState::Verify => "VERIFY",
            PickState::RetryIbvs => "RETRY_IBVS",
            PickState::Retract => "RETRACT",
            PickState::MoveDrop => "MOVE_DROP",
            PickState::Release => "RELEASE",
            PickState::AbortTarget => "ABORT_TARGET",
        }
    }
}

impl fmt::Display for PickState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SmEvent {
    Start,
    /// Look pose reached and settled; carries the ordered target queue.
    LookReached { queue: Vec<u64> },
    Select,
    MotionDone,
    PlanFailed,
    EmergencyStop,
    ControllerSuccess,
    ControllerFailed,
    GripperClosed,
    GripperFeedback(FeedbackFlag),
    GripperOpened,
    Next,
}

impl SmEvent {
    pub fn name(&self) -> &'static str {
        match self {
            SmEvent::Start => "start",
            SmEvent::LookReached { .. } => "look_reached",
            SmEvent::Select => "select",
            SmEvent::MotionDone => "motion_done",
            SmEvent::PlanFailed => "plan_failed",
            SmEvent::EmergencyStop => "emergency_stop",
            SmEvent::ControllerSuccess => "controller_success",
            SmEvent::ControllerFailed => "controller_failed",
            SmEvent::GripperClosed => "gripper_closed",
            SmEvent::GripperFeedback(FeedbackFlag::Grasped) => "feedback_grasped",
            SmEvent::GripperFeedback(FeedbackFlag::Empty) => "feedback_empty",
            SmEvent::GripperFeedback(FeedbackFlag::None) => "feedback_none",
            SmEvent::GripperOpened => "gripper_opened",
            SmEvent::Next => "next",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Controller {
    Ibvs,
    Direct,
}

impl Controller {
    pub fn as_str(self) -> &'static str {
        match self {
            Controller::Ibvs => "ibvs",
            Controller::Direct => "direct",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SmCommand {
    MoveToLook,
    PlanApproach { target: u64 },
    StartController { controller: Controller, target: u64 },
    CloseGripper,
    ReadFeedback,
    OpenGripper,
    Retract,
    MoveToDrop,
    AbortTarget { target: u64 },
    /// Queue exhausted at this platform stop.
    StopComplete,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MachineConfig {
    pub ibvs_enabled: bool,
    pub gripper_has_feedback: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PickMachine {
    pub config: MachineConfig,
    state: PickState,
    queue: VecDeque<u64>,
    target: Option<u64>,
    retried: bool,
}

impl PickMachine {
    pub fn new(config: MachineConfig) -> Self {
        Self {
            config,
            state: PickState::Idle,
            queue: VecDeque::new(),
            target: None,
            retried: false,
        }
    }

    pub fn state(&self) -> PickState {
        self.state
    }

    pub fn target(&self) -> Option<u64> {
        self.target
    }

    pub fn queue(&self) -> &VecDeque<u64> {
        &self.queue
    }

    fn approach_controller(&self) -> Controller {
        if self.config.ibvs_enabled {
            Controller::Ibvs
        } else {
            Controller::Direct
        }
    }

    fn current(&self) -> Result<u64, PlanningError> {
        self.target.ok_or_else(|| PlanningError::ContractViolation {
            state: self.state,
            event: "no active target".into(),
        })
    }
}

/// Advances the machine by one event.
pub fn sm_step(m: &PickMachine, event: &SmEvent) -> Result<(PickMachine, Vec<SmCommand>), PlanningError> {
    use PickState as S;
    let mut n = m.clone();
    let mut cmds = Vec::new();
    let to = match (m.state, event) {
        (S::Idle, SmEvent::Start) => {
            cmds.push(SmCommand::MoveToLook);
            S::MoveLook
        }
        (S::MoveLook, SmEvent::LookReached { queue }) => {
            n.queue = queue.iter().copied().collect();
            S::SelectTarget
        }
        (S::SelectTarget, SmEvent::Select) => match n.queue.pop_front() {
            Some(id) => {
                n.target = Some(id);
                n.retried = false;
                cmds.push(SmCommand::PlanApproach { target: id });
                S::MoveApproach
            }
            None => {
                n.target = None;
                cmds.push(SmCommand::StopComplete);
                S::Idle
            }
        },
        (S::MoveApproach, SmEvent::PlanFailed | SmEvent::EmergencyStop) => {
            cmds.push(SmCommand::AbortTarget { target: m.current()? });
            S::AbortTarget
        }
        (S::MoveApproach, SmEvent::MotionDone) => {
            let controller = m.approach_controller();
            cmds.push(SmCommand::StartController {
                controller,
                target: m.current()?,
            });
            match controller {
                Controller::Ibvs => S::FinalApproachIbvs,
                Controller::Direct => S::FinalApproachDirect,
            }
        }
        (S::FinalApproachIbvs, SmEvent::ControllerFailed) => {
            cmds.push(SmCommand::StartController {
                controller: Controller::Direct,
                target: m.current()?,
            });
            S::FinalApproachDirect
        }
        (S::FinalApproachDirect, SmEvent::ControllerFailed) => {
            cmds.push(SmCommand::AbortTarget { target: m.current()? });
            S::AbortTarget
        }
        (S::FinalApproachIbvs | S::FinalApproachDirect | S::RetryIbvs, SmEvent::ControllerSuccess) => {
            cmds.push(SmCommand::CloseGripper);
            S::Grasp
        }
        (S::RetryIbvs, SmEvent::ControllerFailed) => {
            cmds.push(SmCommand::Retract);
            S::Retract
        }
        (S::Grasp, SmEvent::GripperClosed) => {
            cmds.push(SmCommand::ReadFeedback);
            S::Verify
        }
        (S::Verify, SmEvent::GripperFeedback(flag)) => {
            if *flag == FeedbackFlag::Empty && m.config.gripper_has_feedback && !m.retried {
                n.retried = true;
                cmds.push(SmCommand::OpenGripper);
                cmds.push(SmCommand::StartController {
                    controller: m.approach_controller(),
                    target: m.current()?,
                });
                S::RetryIbvs
            } else {
                cmds.push(SmCommand::Retract);
                S::Retract
            }
        }
        (S::Retract, SmEvent::MotionDone) => {
            cmds.push(SmCommand::MoveToDrop);
            S::MoveDrop
        }
        (S::MoveDrop, SmEvent::MotionDone) => {
            cmds.push(SmCommand::OpenGripper);
            S::Release
        }
        (S::Release, SmEvent::GripperOpened) | (S::AbortTarget, SmEvent::Next) => {
            n.target = None;
            S::SelectTarget
        }
        (state, event) => {
            return Err(PlanningError::ContractViolation {
                state,
                event: event.name().into(),
            })
        }
    };
    n.state = to;
    Ok((n, cmds))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn machine(ibvs: bool, feedback: bool) -> PickMachine {
        PickMachine::new(MachineConfig {
            ibvs_enabled: ibvs,
            gripper_has_feedback: feedback,
        })
    }

    fn drive(m: PickMachine, events: &[SmEvent]) -> (PickMachine, Vec<PickState>) {
        let mut m = m;
        let mut trace = vec![m.state()];
        for e in events {
            m = sm_step(&m, e).unwrap().0;
            trace.push(m.state());
        }
        (m, trace)
    }

    fn to_approach(ibvs: bool, feedback: bool) -> PickMachine {
        drive(
            machine(ibvs, feedback),
            &[SmEvent::Start, SmEvent::LookReached { queue: vec![7, 3] }, SmEvent::Select, SmEvent::MotionDone],
        )
        .0
    }

    #[test]
    fn ibvs_failure_falls_back_to_direct() {
        let m = to_approach(true, true);
        assert_eq!(m.state(), PickState::FinalApproachIbvs);
        let (m, cmds) = sm_step(&m, &SmEvent::ControllerFailed).unwrap();
        assert_eq!(m.state(), PickState::FinalApproachDirect);
        assert_eq!(
            cmds,
            vec![SmCommand::StartController {
                controller: Controller::Direct,
                target: 7
            }]
        );
        let (m, _) = sm_step(&m, &SmEvent::ControllerFailed).unwrap();
        assert_eq!(m.state(), PickState::AbortTarget);
        let (m, _) = sm_step(&m, &SmEvent::Next).unwrap();
        assert_eq!(m.state(), PickState::SelectTarget);
        let (m, cmds) = sm_step(&m, &SmEvent::Select).unwrap();
        assert_eq!(cmds, vec![SmCommand::PlanApproach { target: 3 }]);
        assert_eq!(m.target(), Some(3));
    }

    #[test]
    fn ibvs_disabled_goes_direct() {
        assert_eq!(to_approach(false, false).state(), PickState::FinalApproachDirect);
    }

    #[test]
    fn soft_gripper_verify_always_retracts() {
        let (m, trace) = drive(
            to_approach(false, false),
            &[SmEvent::ControllerSuccess, SmEvent::GripperClosed, SmEvent::GripperFeedback(FeedbackFlag::None)],
        );
        assert_eq!(*trace.last().unwrap(), PickState::Retract);
        let (_, trace) = drive(m, &[SmEvent::MotionDone, SmEvent::MotionDone, SmEvent::GripperOpened]);
        assert_eq!(&trace[1..], &[PickState::MoveDrop, PickState::Release, PickState::SelectTarget]);
    }

    #[test]
    fn empty_parallel_grasp_retries_once() {
        let events = [
            SmEvent::ControllerSuccess,
            SmEvent::GripperClosed,
            SmEvent::GripperFeedback(FeedbackFlag::Empty),
            SmEvent::ControllerSuccess,
            SmEvent::GripperClosed,
            SmEvent::GripperFeedback(FeedbackFlag::Empty),
        ];
        let (_, trace) = drive(to_approach(true, true), &events);
        assert_eq!(trace.iter().filter(|s| **s == PickState::RetryIbvs).count(), 1);
        assert_eq!(*trace.last().unwrap(), PickState::Retract);

        let (_, trace) = drive(
            to_approach(true, true),
            &[
                SmEvent::ControllerSuccess,
                SmEvent::GripperClosed,
                SmEvent::GripperFeedback(FeedbackFlag::Empty),
                SmEvent::ControllerFailed,
            ],
        );
        assert_eq!(*trace.last().unwrap(), PickState::Retract);
    }

    #[test]
    fn grasped_feedback_retracts() {
        let (m, _) = drive(
            to_approach(true, true),
            &[SmEvent::ControllerSuccess, SmEvent::GripperClosed, SmEvent::GripperFeedback(FeedbackFlag::Grasped)],
        );
        assert_eq!(m.state(), PickState::Retract);
    }

    #[test]
    fn empty_queue_completes_stop() {
        let (m, _) = drive(machine(false, false), &[SmEvent::Start, SmEvent::LookReached { queue: vec![] }]);
        let (m, cmds) = sm_step(&m, &SmEvent::Select).unwrap();
        assert_eq!(m.state(), PickState::Idle);
        assert_eq!(cmds, vec![SmCommand::StopComplete]);
    }

    #[test]
    fn plan_failure_aborts() {
        let (m, _) = drive(
            machine(false, false),
            &[SmEvent::Start, SmEvent::LookReached { queue: vec![1] }, SmEvent::Select, SmEvent::PlanFailed],
        );
        assert_eq!(m.state(), PickState::AbortTarget);
    }

    #[test]
    fn unknown_pair_is_contract_violation() {
        let m = machine(false, false);
        assert!(matches!(
            sm_step(&m, &SmEvent::GripperClosed),
            Err(PlanningError::ContractViolation { state: PickState::Idle, .. })
        ));
    }

    #[test]
    fn state_names_serialize_upper_snake() {
        assert_eq!(serde_json::to_string(&PickState::FinalApproachIbvs).unwrap(), "\"FINAL_APPROACH_IBVS\"");
        assert_eq!(PickState::RetryIbvs.to_string(), "RETRY_IBVS");
    }
}
