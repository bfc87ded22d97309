//! Areas of interest derived from pose keypoints: torso, head and hands.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{Joint, Keypoint, PersonPose, SkeletonLayout, VideoMeta};

/// Axis-aligned box, top-left corner plus size, in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl Rect {
    pub fn new(x: f64, y: f64, w: f64, h: f64) -> Self {
        Self { x, y, w, h }
    }

    pub fn centered(cx: f64, cy: f64, w: f64, h: f64) -> Self {
        Self::new(cx - w / 2.0, cy - h / 2.0, w, h)
    }

    pub fn from_corners(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Self::new(x0, y0, x1 - x0, y1 - y0)
    }

    pub fn right(&self) -> f64 {
        self.x + self.w
    }

    pub fn bottom(&self) -> f64 {
        self.y + self.h
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    pub fn is_empty(&self) -> bool {
        !(self.w > 0.0 && self.h > 0.0)
    }

    /// Closed containment: points on the edge are inside.
    pub fn contains(&self, px: f64, py: f64) -> bool {
        px >= self.x && px <= self.right() && py >= self.y && py <= self.bottom()
    }

    pub fn contains_rect(&self, other: &Rect) -> bool {
        other.x >= self.x
            && other.y >= self.y
            && other.right() <= self.right()
            && other.bottom() <= self.bottom()
    }

    /// Intersection with `[0,width] x [0,height]`. May come out empty.
    pub fn clamp_to(&self, width: f64, height: f64) -> Rect {
        let x0 = self.x.clamp(0.0, width);
        let y0 = self.y.clamp(0.0, height);
        let x1 = self.right().clamp(0.0, width);
        let y1 = self.bottom().clamp(0.0, height);
        Rect::from_corners(x0, y0, x1, y1)
    }

    /// Tight box around the given points, or `None` for an empty iterator.
    fn bounding<I: IntoIterator<Item = (f64, f64)>>(points: I) -> Option<Rect> {
        let mut it = points.into_iter();
        let (fx, fy) = it.next()?;
        let (mut x0, mut y0, mut x1, mut y1) = (fx, fy, fx, fy);
        for (x, y) in it {
            x0 = x0.min(x);
            y0 = y0.min(y);
            x1 = x1.max(x);
            y1 = y1.max(y);
        }
        Some(Rect::from_corners(x0, y0, x1, y1))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AoiLabel {
    Torso,
    Head,
    HandLeft,
    HandRight,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AoiSource {
    PoseDerived,
    ForearmEstimated,
    Detector,
}

impl AoiSource {
    pub fn as_str(&self) -> &'static str {
        match self {
            AoiSource::PoseDerived => "pose",
            AoiSource::ForearmEstimated => "forearm",
            AoiSource::Detector => "detector",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AoiBox {
    pub label: AoiLabel,
    pub rect: Rect,
    pub confidence: f64,
    pub source: AoiSource,
    /// Fraction each side was pushed outward by [`expand_margin`].
    pub margin_applied: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HeadOrientation {
    Frontal,
    LeftProfile,
    RightProfile,
    Unknown,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

/// Tunable constants for the box constructions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeometryConfig {
    pub head_frontal_width: f64,
    pub head_frontal_height: f64,
    pub head_profile_width: f64,
    pub head_profile_height: f64,
    /// Horizontal shift of a profile head's center from the nose toward the ear, as a fraction of nose-ear distance.
    pub head_profile_shift: f64,
    /// Minimum ear confidence for the ear to count as visible.
    pub ear_tau: f64,
    pub torso_min_joints: usize,
    pub hand_min_points: usize,
    pub hand_pad: f64,
    /// Side of the forearm hand square as a fraction of forearm length.
    pub forearm_side: f64,
    /// Offset of the hand center past the wrist as a fraction of the elbow-wrist vector.
    pub forearm_offset: f64,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        Self {
            head_frontal_width: 1.5,
            head_frontal_height: 2.0,
            head_profile_width: 1.8,
            head_profile_height: 2.2,
            head_profile_shift: 0.25,
            ear_tau: 0.3,
            torso_min_joints: 3,
            hand_min_points: 5,
            hand_pad: 0.15,
            forearm_side: 0.75,
            forearm_offset: 0.33,
        }
    }
}

impl GeometryConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("head_frontal_width", self.head_frontal_width),
            ("head_frontal_height", self.head_frontal_height),
            ("head_profile_width", self.head_profile_width),
            ("head_profile_height", self.head_profile_height),
            ("forearm_side", self.forearm_side),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.ear_tau > 0.0 && self.ear_tau < 1.0) {
            return Err(Error::Config(format!(
                "ear_tau must lie in (0,1), got {}",
                self.ear_tau
            )));
        }
        if !(self.hand_pad >= 0.0) {
            return Err(Error::Config(format!(
                "hand_pad must be >= 0, got {}",
                self.hand_pad
            )));
        }
        if !self.head_profile_shift.is_finite() || !self.forearm_offset.is_finite() {
            return Err(Error::Config(
                "head_profile_shift and forearm_offset must be finite".into(),
            ));
        }
        Ok(())
    }
}

const TORSO_JOINTS: [Joint; 5] = [
    Joint::Neck,
    Joint::RShoulder,
    Joint::LShoulder,
    Joint::RHip,
    Joint::LHip,
];
const FACE_JOINTS: [Joint; 5] = [
    Joint::Nose,
    Joint::REye,
    Joint::LEye,
    Joint::REar,
    Joint::LEar,
];

/// Mean confidence of the present (c > 0) keypoints.
pub fn pose_confidence<'a, I>(keypoints: I) -> Result<f64>
where
    I: IntoIterator<Item = &'a Keypoint>,
{
    let (sum, n) = keypoints
        .into_iter()
        .filter(|k| k.is_present())
        .fold((0.0, 0usize), |(s, n), k| (s + k.confidence, n + 1));
    if n == 0 {
        return Err(Error::Undefined(
            "confidence of an empty keypoint set".into(),
        ));
    }
    Ok(sum / n as f64)
}

fn present(pose: &PersonPose, layout: &SkeletonLayout, joints: &[Joint]) -> Vec<Keypoint> {
    joints
        .iter()
        .map(|&j| pose.joint(layout, j))
        .filter(Keypoint::is_present)
        .collect()
}

/// Tight box over the present torso joints (neck, shoulders, hips).
pub fn torso_box_from_pose(
    pose: &PersonPose,
    layout: &SkeletonLayout,
    min_joints: usize,
) -> Option<AoiBox> {
    let pts = present(pose, layout, &TORSO_JOINTS);
    if pts.is_empty() || pts.len() < min_joints {
        return None;
    }
    let rect = Rect::bounding(pts.iter().map(|k| (k.x, k.y)))?;
    if rect.is_empty() {
        return None;
    }
    Some(AoiBox {
        label: AoiLabel::Torso,
        rect,
        confidence: pose_confidence(&pts).ok()?,
        source: AoiSource::PoseDerived,
        margin_applied: 0.0,
    })
}

/// Head orientation from ear visibility. `LeftProfile` means the left side of
/// the head faces the camera.
pub fn classify_head_orientation(
    pose: &PersonPose,
    layout: &SkeletonLayout,
    tau: f64,
) -> HeadOrientation {
    let left = pose.joint(layout, Joint::LEar).confidence >= tau;
    let right = pose.joint(layout, Joint::REar).confidence >= tau;
    match (left, right) {
        (true, true) => HeadOrientation::Frontal,
        (true, false) => HeadOrientation::LeftProfile,
        (false, true) => HeadOrientation::RightProfile,
        (false, false) => HeadOrientation::Unknown,
    }
}

/// Head box from the ears and nose, shaped by the head orientation.
///
/// Frontal heads are centered on the ear midpoint and sized from the ear
/// distance, then grown to include the nose if it falls outside. Profile
/// heads are sized from the nose-ear distance with the center pushed from the
/// nose toward the visible ear. A profile without a present nose is treated
/// as degenerate.
pub fn head_box_from_pose(
    pose: &PersonPose,
    layout: &SkeletonLayout,
    cfg: &GeometryConfig,
) -> Option<AoiBox> {
    let orientation = classify_head_orientation(pose, layout, cfg.ear_tau);
    let nose = pose.joint(layout, Joint::Nose);
    let rect = match orientation {
        HeadOrientation::Unknown => return None,
        HeadOrientation::Frontal => {
            let l = pose.joint(layout, Joint::LEar);
            let r = pose.joint(layout, Joint::REar);
            let d = (l.x - r.x).hypot(l.y - r.y);
            if !(d > 0.0) {
                return None;
            }
            let mut rect = Rect::centered(
                (l.x + r.x) / 2.0,
                (l.y + r.y) / 2.0,
                cfg.head_frontal_width * d,
                cfg.head_frontal_height * d,
            );
            if nose.is_present() && !rect.contains(nose.x, nose.y) {
                rect = Rect::from_corners(
                    rect.x.min(nose.x),
                    rect.y.min(nose.y),
                    rect.right().max(nose.x),
                    rect.bottom().max(nose.y),
                );
            }
            rect
        }
        HeadOrientation::LeftProfile | HeadOrientation::RightProfile => {
            let ear = if orientation == HeadOrientation::LeftProfile {
                pose.joint(layout, Joint::LEar)
            } else {
                pose.joint(layout, Joint::REar)
            };
            if !nose.is_present() {
                return None;
            }
            let d = (ear.x - nose.x).hypot(ear.y - nose.y);
            if !(d > 0.0) {
                return None;
            }
            let toward = if ear.x > nose.x {
                1.0
            } else if ear.x < nose.x {
                -1.0
            } else {
                0.0
            };
            Rect::centered(
                nose.x + toward * cfg.head_profile_shift * d,
                (nose.y + ear.y) / 2.0,
                cfg.head_profile_width * d,
                cfg.head_profile_height * d,
            )
        }
    };
    let face = present(pose, layout, &FACE_JOINTS);
    Some(AoiBox {
        label: AoiLabel::Head,
        rect,
        confidence: pose_confidence(&face).ok()?,
        source: AoiSource::PoseDerived,
        margin_applied: 0.0,
    })
}

/// Box around the present hand keypoints, padded by `pad * max(w, h)` per side.
pub fn hand_box_from_hand_keypoints(
    hand: &[Keypoint],
    side: Side,
    min_points: usize,
    pad: f64,
) -> Option<AoiBox> {
    let pts: Vec<Keypoint> = hand.iter().copied().filter(Keypoint::is_present).collect();
    if pts.is_empty() || pts.len() < min_points {
        return None;
    }
    let tight = Rect::bounding(pts.iter().map(|k| (k.x, k.y)))?;
    let grow = pad * tight.w.max(tight.h);
    let rect = Rect::new(
        tight.x - grow,
        tight.y - grow,
        tight.w + 2.0 * grow,
        tight.h + 2.0 * grow,
    );
    if rect.is_empty() {
        return None;
    }
    Some(AoiBox {
        label: hand_label(side),
        rect,
        confidence: pose_confidence(&pts).ok()?,
        source: AoiSource::PoseDerived,
        margin_applied: 0.0,
    })
}

fn hand_label(side: Side) -> AoiLabel {
    match side {
        Side::Left => AoiLabel::HandLeft,
        Side::Right => AoiLabel::HandRight,
    }
}

/// Square hand box extrapolated past the wrist along the elbow-to-wrist
/// vector. Exists whenever the arm is visible, even if the hand is occluded.
pub fn hand_box_from_forearm(
    pose: &PersonPose,
    layout: &SkeletonLayout,
    side: Side,
    cfg: &GeometryConfig,
) -> Option<AoiBox> {
    let (elbow, wrist) = match side {
        Side::Left => (
            pose.joint(layout, Joint::LElbow),
            pose.joint(layout, Joint::LWrist),
        ),
        Side::Right => (
            pose.joint(layout, Joint::RElbow),
            pose.joint(layout, Joint::RWrist),
        ),
    };
    if !(elbow.is_present() && wrist.is_present()) {
        return None;
    }
    let (vx, vy) = (wrist.x - elbow.x, wrist.y - elbow.y);
    let len = vx.hypot(vy);
    if !(len > 0.0) {
        return None;
    }
    let s = cfg.forearm_side * len;
    let rect = Rect::centered(
        wrist.x + cfg.forearm_offset * vx,
        wrist.y + cfg.forearm_offset * vy,
        s,
        s,
    );
    Some(AoiBox {
        label: hand_label(side),
        rect,
        confidence: (elbow.confidence + wrist.confidence) / 2.0,
        source: AoiSource::ForearmEstimated,
        margin_applied: 0.0,
    })
}

/// Moves each side outward by `margin` times the box dimension, then clamps
/// to the frame. A box entirely outside the frame clamps to an empty box.
pub fn expand_margin(aoi: &AoiBox, margin: f64, frame: &VideoMeta) -> Result<AoiBox> {
    if !(margin >= 0.0 && margin.is_finite()) {
        return Err(Error::Argument(format!(
            "margin must be >= 0, got {margin}"
        )));
    }
    let r = aoi.rect;
    let (dx, dy) = (margin * r.w, margin * r.h);
    let grown = Rect::new(r.x - dx, r.y - dy, r.w + 2.0 * dx, r.h + 2.0 * dy);
    Ok(AoiBox {
        rect: grown.clamp_to(frame.width, frame.height),
        margin_applied: margin,
        ..*aoi
    })
}

/// Keeps the top `fraction` of a full-person box, e.g. 0.66 for an upper body.
pub fn upper_body_from_person_box(person: &Rect, fraction: f64) -> Result<Rect> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::Argument(format!(
            "fraction must lie in (0,1], got {fraction}"
        )));
    }
    Ok(Rect::new(person.x, person.y, person.w, fraction * person.h))
}
