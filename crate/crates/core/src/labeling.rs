//! Per-frame gaze coding against areas of interest, and run-length segments.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{
    expand_margin, hand_box_from_forearm, hand_box_from_hand_keypoints, head_box_from_pose,
    torso_box_from_pose, AoiBox, AoiLabel, AoiSource, GeometryConfig, Side,
};
use crate::ingest::{GazeSample, PersonPose, SkeletonLayout, VideoMeta};
use crate::par::{self, Execution};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Category {
    Head,
    Hand,
    Torso,
    /// Valid gaze that hits no area of interest.
    None,
    /// No valid gaze sample for the frame.
    NoGaze,
}

impl Category {
    pub const ALL: [Category; 5] = [
        Category::Head,
        Category::Hand,
        Category::Torso,
        Category::None,
        Category::NoGaze,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Category::Head => "head",
            Category::Hand => "hand",
            Category::Torso => "torso",
            Category::None => "none",
            Category::NoGaze => "nogaze",
        }
    }

    pub fn of_aoi(label: AoiLabel) -> Category {
        match label {
            AoiLabel::Head => Category::Head,
            AoiLabel::HandLeft | AoiLabel::HandRight => Category::Hand,
            AoiLabel::Torso => Category::Torso,
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Category {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Category::ALL
            .into_iter()
            .find(|c| c.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Argument(format!("unknown category `{s}`")))
    }
}

/// Which hand boxes feed the labeling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HandSource {
    /// Keypoint-derived box, falling back to the forearm estimate for that hand.
    #[default]
    KeypointsThenForearm,
    Keypoints,
    Forearm,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabelPolicy {
    /// Highest priority first; a permutation of Head, Hand, Torso.
    pub priority: Vec<Category>,
    pub min_aoi_confidence: f64,
    pub margin: f64,
    pub hand_source: HandSource,
}

impl Default for LabelPolicy {
    fn default() -> Self {
        Self {
            priority: vec![Category::Head, Category::Hand, Category::Torso],
            min_aoi_confidence: 0.0,
            margin: 0.0,
            hand_source: HandSource::default(),
        }
    }
}

impl LabelPolicy {
    pub fn validate(&self) -> Result<()> {
        let mut p = self.priority.clone();
        p.sort();
        if p != [Category::Head, Category::Hand, Category::Torso] {
            return Err(Error::Argument(format!(
                "priority must be a permutation of head, hand, torso, got {:?}",
                self.priority
            )));
        }
        if !(0.0..=1.0).contains(&self.min_aoi_confidence) {
            return Err(Error::Argument(format!(
                "min_aoi_confidence must lie in [0,1], got {}",
                self.min_aoi_confidence
            )));
        }
        if !(self.margin >= 0.0 && self.margin.is_finite()) {
            return Err(Error::Argument(format!(
                "margin must be >= 0, got {}",
                self.margin
            )));
        }
        Ok(())
    }

    fn rank(&self, c: Category) -> usize {
        self.priority
            .iter()
            .position(|&p| p == c)
            .unwrap_or(usize::MAX)
    }
}

/// An area of interest tagged with the person it belongs to.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PersonAoi {
    pub person_id: usize,
    pub aoi: AoiBox,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FrameLabel {
    pub frame: usize,
    pub category: Category,
    pub person_id: Option<usize>,
    pub source: Option<AoiSource>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CodedSegment {
    pub start_frame: usize,
    pub end_frame: usize,
    pub category: Category,
    pub duration_ms: f64,
}

/// All areas of interest for one person under the given hand source, before margins.
pub fn person_aois(
    pose: &PersonPose,
    layout: &SkeletonLayout,
    cfg: &GeometryConfig,
    hand_source: HandSource,
) -> Vec<AoiBox> {
    let mut out = Vec::with_capacity(4);
    out.extend(head_box_from_pose(pose, layout, cfg));
    for (side, hand) in [
        (Side::Left, &pose.left_hand),
        (Side::Right, &pose.right_hand),
    ] {
        let from_points = || {
            hand.as_deref().and_then(|h| {
                hand_box_from_hand_keypoints(h, side, cfg.hand_min_points, cfg.hand_pad)
            })
        };
        let from_arm = || hand_box_from_forearm(pose, layout, side, cfg);
        let b = match hand_source {
            HandSource::Keypoints => from_points(),
            HandSource::Forearm => from_arm(),
            HandSource::KeypointsThenForearm => from_points().or_else(from_arm),
        };
        out.extend(b);
    }
    out.extend(torso_box_from_pose(pose, layout, cfg.torso_min_joints));
    out
}

/// Derives, margin-expands and clamps the areas of interest of every person in
/// a frame. Boxes that clamp to nothing are dropped.
pub fn frame_aois(
    people: &[PersonPose],
    layout: &SkeletonLayout,
    cfg: &GeometryConfig,
    policy: &LabelPolicy,
    meta: &VideoMeta,
) -> Result<Vec<PersonAoi>> {
    let mut out = Vec::new();
    for p in people {
        for aoi in person_aois(p, layout, cfg, policy.hand_source) {
            let aoi = expand_margin(&aoi, policy.margin, meta)?;
            if !aoi.rect.is_empty() {
                out.push(PersonAoi {
                    person_id: p.person_id,
                    aoi,
                });
            }
        }
    }
    Ok(out)
}

/// Codes one frame. Boxes are tested with closed containment; the containing
/// box of the highest-priority category wins, then the smallest area, then
/// input order.
pub fn label_frame(
    frame: usize,
    aois: &[PersonAoi],
    gaze: Option<&GazeSample>,
    policy: &LabelPolicy,
) -> FrameLabel {
    let Some(g) = gaze.filter(|g| g.valid) else {
        return FrameLabel {
            frame,
            category: Category::NoGaze,
            person_id: None,
            source: None,
        };
    };
    let mut best: Option<(usize, f64, &PersonAoi)> = None;
    for pa in aois {
        if pa.aoi.confidence < policy.min_aoi_confidence || !pa.aoi.rect.contains(g.x, g.y) {
            continue;
        }
        let rank = policy.rank(Category::of_aoi(pa.aoi.label));
        let area = pa.aoi.rect.area();
        let better = match best {
            None => true,
            Some((r, a, _)) => rank < r || (rank == r && area < a),
        };
        if better {
            best = Some((rank, area, pa));
        }
    }
    match best {
        Some((_, _, pa)) => FrameLabel {
            frame,
            category: Category::of_aoi(pa.aoi.label),
            person_id: Some(pa.person_id),
            source: Some(pa.aoi.source),
        },
        None => FrameLabel {
            frame,
            category: Category::None,
            person_id: None,
            source: None,
        },
    }
}

/// Inputs for one frame of [`label_sequence`].
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FrameInput {
    pub aois: Vec<PersonAoi>,
    pub gaze: Option<GazeSample>,
}

pub fn label_sequence(frames: &[FrameInput], policy: &LabelPolicy) -> Vec<FrameLabel> {
    label_sequence_with(frames, policy, Execution::default())
}

/// Codes frames `0..n`. The result is identical for every execution mode.
pub fn label_sequence_with(
    frames: &[FrameInput],
    policy: &LabelPolicy,
    exec: Execution,
) -> Vec<FrameLabel> {
    par::map_range(exec, frames.len(), |i| {
        label_frame(i, &frames[i].aois, frames[i].gaze.as_ref(), policy)
    })
}

/// Collapses the label sequence into maximal runs of one category.
pub fn aggregate_segments(labels: &[FrameLabel], meta: &VideoMeta) -> Vec<CodedSegment> {
    let period = meta.frame_period_ms();
    let mut out: Vec<CodedSegment> = Vec::new();
    for (i, l) in labels.iter().enumerate() {
        match out.last_mut() {
            Some(seg) if seg.category == l.category => seg.end_frame = i,
            _ => out.push(CodedSegment {
                start_frame: i,
                end_frame: i,
                category: l.category,
                duration_ms: 0.0,
            }),
        }
    }
    for seg in &mut out {
        seg.duration_ms = (seg.end_frame - seg.start_frame + 1) as f64 * period;
    }
    out
}
