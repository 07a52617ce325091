//! Atomic camera actions, their executor, and the teacher-plan compiler.
//!
//! # Executor semantics
//!
//! A plan is folded left to right from the identity. The camera keeps an
//! orientation `R` and position `t`, both expressed in the starting camera
//! frame (+X right, +Y down, +Z forward). Each action acts in the current
//! camera-local frame:
//!
//! | action           | update                                  |
//! |------------------|-----------------------------------------|
//! | `turn_right_deg θ` | `R ← R · Ry(θ)`                       |
//! | `turn_left_deg θ`  | `R ← R · Ry(−θ)`                      |
//! | `turn_up_deg θ`    | `R ← R · Rx(θ)`                       |
//! | `turn_down_deg θ`  | `R ← R · Rx(−θ)`                      |
//! | `move_forward_m d` | `t ← t + R · (0, 0, d)`               |
//! | `move_up_m d`      | `t ← t + R · (0, −d, 0)`              |
//! | `move_down_m d`    | `t ← t + R · (0, d, 0)`               |
//!
//! with
//!
//! ```text
//! Ry(θ) = [ cos θ  0  sin θ ]      Rx(θ) = [ 1    0       0    ]
//!         [   0    1    0   ]              [ 0  cos θ  −sin θ ]
//!         [−sin θ  0  cos θ ]              [ 0  sin θ   cos θ ]
//! ```
//!
//! `Ry(θ)` swings the optical axis toward +X (right) and `Rx(θ)` toward −Y
//! (up). The final `(R, t)` is the destination camera's pose in the source
//! frame; [`execute`] returns its inverse, the [`RelativePose`] mapping
//! source-frame coordinates into the destination frame, which is the same
//! convention as [`crate::geometry::relative_pose`].

use std::fmt;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{pitch_rotation, rotation_angle_deg, yaw_rotation, CameraMotion, RelativePose};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ActionKind {
    TurnLeft,
    TurnRight,
    TurnUp,
    TurnDown,
    MoveForward,
    MoveUp,
    MoveDown,
}

impl ActionKind {
    pub const ALL: [ActionKind; 7] = [
        ActionKind::TurnLeft,
        ActionKind::TurnRight,
        ActionKind::TurnUp,
        ActionKind::TurnDown,
        ActionKind::MoveForward,
        ActionKind::MoveUp,
        ActionKind::MoveDown,
    ];

    pub fn key(self) -> &'static str {
        match self {
            ActionKind::TurnLeft => "turn_left_deg",
            ActionKind::TurnRight => "turn_right_deg",
            ActionKind::TurnUp => "turn_up_deg",
            ActionKind::TurnDown => "turn_down_deg",
            ActionKind::MoveForward => "move_forward_m",
            ActionKind::MoveUp => "move_up_m",
            ActionKind::MoveDown => "move_down_m",
        }
    }

    pub fn from_key(key: &str) -> Option<ActionKind> {
        ActionKind::ALL.into_iter().find(|k| k.key() == key)
    }

    pub fn is_rotation(self) -> bool {
        matches!(
            self,
            ActionKind::TurnLeft | ActionKind::TurnRight | ActionKind::TurnUp | ActionKind::TurnDown
        )
    }

    /// The kind undoing this one, if the vocabulary has it.
    pub fn opposite(self) -> Option<ActionKind> {
        Some(match self {
            ActionKind::TurnLeft => ActionKind::TurnRight,
            ActionKind::TurnRight => ActionKind::TurnLeft,
            ActionKind::TurnUp => ActionKind::TurnDown,
            ActionKind::TurnDown => ActionKind::TurnUp,
            ActionKind::MoveUp => ActionKind::MoveDown,
            ActionKind::MoveDown => ActionKind::MoveUp,
            ActionKind::MoveForward => return None,
        })
    }
}

impl fmt::Display for ActionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

/// One camera operation; `magnitude` is degrees for turns, meters for moves.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AtomicAction {
    kind: ActionKind,
    magnitude: f64,
}

impl AtomicAction {
    pub fn new(kind: ActionKind, magnitude: f64) -> Result<Self> {
        if !(magnitude.is_finite() && magnitude >= 0.0) {
            return Err(Error::invalid(
                "action",
                format!("{kind} magnitude must be finite and >= 0, got {magnitude}"),
            ));
        }
        Ok(AtomicAction { kind, magnitude })
    }

    pub fn kind(&self) -> ActionKind {
        self.kind
    }

    pub fn magnitude(&self) -> f64 {
        self.magnitude
    }

    pub fn turn_left(deg: f64) -> Result<Self> {
        Self::new(ActionKind::TurnLeft, deg)
    }

    pub fn turn_right(deg: f64) -> Result<Self> {
        Self::new(ActionKind::TurnRight, deg)
    }

    pub fn turn_up(deg: f64) -> Result<Self> {
        Self::new(ActionKind::TurnUp, deg)
    }

    pub fn turn_down(deg: f64) -> Result<Self> {
        Self::new(ActionKind::TurnDown, deg)
    }

    pub fn move_forward(m: f64) -> Result<Self> {
        Self::new(ActionKind::MoveForward, m)
    }

    pub fn move_up(m: f64) -> Result<Self> {
        Self::new(ActionKind::MoveUp, m)
    }

    pub fn move_down(m: f64) -> Result<Self> {
        Self::new(ActionKind::MoveDown, m)
    }

    /// Local rotation and translation of this action.
    fn local(&self) -> (Matrix3<f64>, Vector3<f64>) {
        let m = self.magnitude;
        match self.kind {
            ActionKind::TurnRight => (yaw_rotation(m), Vector3::zeros()),
            ActionKind::TurnLeft => (yaw_rotation(-m), Vector3::zeros()),
            ActionKind::TurnUp => (pitch_rotation(m), Vector3::zeros()),
            ActionKind::TurnDown => (pitch_rotation(-m), Vector3::zeros()),
            ActionKind::MoveForward => (Matrix3::identity(), Vector3::new(0.0, 0.0, m)),
            ActionKind::MoveUp => (Matrix3::identity(), Vector3::new(0.0, -m, 0.0)),
            ActionKind::MoveDown => (Matrix3::identity(), Vector3::new(0.0, m, 0.0)),
        }
    }
}

/// Ordered sequence of atomic actions; empty means no motion.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ActionPlan(Vec<AtomicAction>);

impl ActionPlan {
    pub fn new(actions: Vec<AtomicAction>) -> Self {
        ActionPlan(actions)
    }

    pub fn actions(&self) -> &[AtomicAction] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// True when every turn is below `eps_deg` and every move below `eps_m`.
    pub fn is_stop_like(&self, eps_deg: f64, eps_m: f64) -> bool {
        self.0.iter().all(|a| {
            let eps = if a.kind.is_rotation() { eps_deg } else { eps_m };
            a.magnitude < eps
        })
    }

    /// Reversed plan with every action replaced by its opposite, or `None`
    /// when the plan contains a forward move (there is no backward move).
    pub fn reversed(&self) -> Option<ActionPlan> {
        self.0
            .iter()
            .rev()
            .map(|a| {
                a.kind.opposite().map(|kind| AtomicAction {
                    kind,
                    magnitude: a.magnitude,
                })
            })
            .collect::<Option<Vec<_>>>()
            .map(ActionPlan)
    }

    /// Copy with every magnitude rounded to 6 significant digits, the
    /// precision of the canonical annotation text.
    pub fn rounded(&self) -> ActionPlan {
        ActionPlan(
            self.0
                .iter()
                .map(|a| AtomicAction {
                    kind: a.kind,
                    magnitude: round_significant(a.magnitude),
                })
                .collect(),
        )
    }
}

impl FromIterator<AtomicAction> for ActionPlan {
    fn from_iter<I: IntoIterator<Item = AtomicAction>>(iter: I) -> Self {
        ActionPlan(iter.into_iter().collect())
    }
}

pub(crate) fn round_significant(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{x:.5e}").parse().unwrap_or(x)
}

/// Destination camera pose in the source frame after running `plan`.
pub fn execute_motion(plan: &ActionPlan) -> CameraMotion {
    let mut orientation = Matrix3::identity();
    let mut position = Vector3::zeros();
    for action in plan.actions() {
        let (rot, step) = action.local();
        position += orientation * step;
        orientation *= rot;
    }
    CameraMotion {
        orientation,
        position,
    }
}

/// Relative pose (source frame → destination frame) induced by `plan`.
pub fn execute(plan: &ActionPlan) -> RelativePose {
    execute_motion(plan).to_relative()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompileTolerances {
    /// Turns smaller than this are never emitted as a single action.
    pub eps_deg: f64,
    /// Moves smaller than this are dropped.
    pub eps_m: f64,
    /// Largest residual roll accepted, degrees.
    pub roll_tol_deg: f64,
}

impl Default for CompileTolerances {
    fn default() -> Self {
        CompileTolerances {
            eps_deg: 0.1,
            eps_m: 0.001,
            roll_tol_deg: 0.5,
        }
    }
}

impl CompileTolerances {
    pub fn validate(&self) -> Result<()> {
        if !(self.eps_deg > 0.0 && self.eps_m > 0.0 && self.roll_tol_deg >= 0.0) {
            return Err(Error::Config(format!("invalid compile tolerances {self:?}")));
        }
        Ok(())
    }
}

/// Angles below this are treated as exactly zero.
const ZERO_DEG: f64 = 1e-9;

/// Yaw/pitch decomposition `R = Ry(yaw) · Rx(pitch) · roll_residual`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct YawPitch {
    pub yaw_deg: f64,
    pub pitch_deg: f64,
    pub roll_deg: f64,
}

pub fn decompose_yaw_pitch(r: &Matrix3<f64>) -> YawPitch {
    let f = r * Vector3::z();
    let yaw = f.x.atan2(f.z).to_degrees();
    let pitch = (-f.y).atan2(f.x.hypot(f.z)).to_degrees();
    let base = yaw_rotation(yaw) * pitch_rotation(pitch);
    YawPitch {
        yaw_deg: yaw,
        pitch_deg: pitch,
        roll_deg: rotation_angle_deg(&base, r),
    }
}

fn wrap_deg(a: f64) -> f64 {
    let mut w = a % 360.0;
    if w > 180.0 {
        w -= 360.0;
    } else if w <= -180.0 {
        w += 360.0;
    }
    w
}

struct Emitter<'a> {
    tol: &'a CompileTolerances,
    out: Vec<AtomicAction>,
}

impl Emitter<'_> {
    fn push(&mut self, kind: ActionKind, magnitude: f64) {
        self.out.push(AtomicAction { kind, magnitude });
    }

    /// Emits a signed turn. Turns smaller than `eps_deg` but not zero are
    /// split into an overshoot and a `eps_deg` correction so the net angle is
    /// exact while no action falls under the threshold.
    fn turn(&mut self, positive: ActionKind, negative: ActionKind, angle: f64) {
        let mag = angle.abs();
        if mag < ZERO_DEG {
            return;
        }
        let (fwd, back) = if angle > 0.0 {
            (positive, negative)
        } else {
            (negative, positive)
        };
        if mag >= self.tol.eps_deg {
            self.push(fwd, mag);
        } else {
            self.push(fwd, mag + self.tol.eps_deg);
            self.push(back, self.tol.eps_deg);
        }
    }

    fn yaw(&mut self, angle: f64) {
        self.turn(ActionKind::TurnRight, ActionKind::TurnLeft, angle);
    }

    fn pitch(&mut self, angle: f64) {
        self.turn(ActionKind::TurnUp, ActionKind::TurnDown, angle);
    }
}

/// Compiles a relative pose into a teacher plan in three stages: turn toward
/// the destination position, move there, then turn to the destination
/// orientation.
///
/// Displacements whose horizontal part is under `eps_m` become a single
/// `move_up_m`/`move_down_m`. Moves under `eps_m` are dropped, so the
/// translation is reproduced exactly except when a component of that size is
/// discarded. Rotations are always reproduced exactly.
pub fn compile(rel: &RelativePose, tol: &CompileTolerances) -> Result<ActionPlan> {
    tol.validate()?;
    let motion = rel.camera_motion();
    let target = decompose_yaw_pitch(&motion.orientation);
    if !(target.roll_deg <= tol.roll_tol_deg) {
        return Err(Error::NotCompilable {
            roll_deg: target.roll_deg,
            limit_deg: tol.roll_tol_deg,
        });
    }

    let mut emit = Emitter {
        tol,
        out: Vec::new(),
    };
    let d = motion.position;
    let horizontal = d.x.hypot(d.z);
    let (mut yaw, mut pitch) = (0.0, 0.0);
    if d.norm() >= tol.eps_m {
        if horizontal < tol.eps_m {
            let kind = if d.y < 0.0 {
                ActionKind::MoveUp
            } else {
                ActionKind::MoveDown
            };
            if d.y.abs() >= tol.eps_m {
                emit.push(kind, d.y.abs());
            }
        } else {
            yaw = d.x.atan2(d.z).to_degrees();
            pitch = (-d.y).atan2(horizontal).to_degrees();
            emit.yaw(yaw);
            emit.pitch(pitch);
            emit.push(ActionKind::MoveForward, d.norm());
        }
    }

    let yaw_delta = wrap_deg(target.yaw_deg - yaw);
    if yaw_delta.abs() < ZERO_DEG {
        emit.pitch(target.pitch_deg - pitch);
    } else {
        emit.pitch(-pitch);
        emit.yaw(yaw_delta);
        emit.pitch(target.pitch_deg);
    }
    Ok(ActionPlan(emit.out))
}
