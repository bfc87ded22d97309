//! Readers for pose frames, gaze streams, detections and ground truth, plus the
//! gaze-to-frame alignment.

use std::io::{BufRead, Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Rect;

/// One body or hand joint. A confidence of exactly 0 marks the joint absent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Keypoint {
    pub x: f64,
    pub y: f64,
    pub confidence: f64,
}

impl Keypoint {
    pub const ABSENT: Keypoint = Keypoint {
        x: 0.0,
        y: 0.0,
        confidence: 0.0,
    };

    pub fn new(x: f64, y: f64, confidence: f64) -> Self {
        Self { x, y, confidence }
    }

    pub fn is_present(&self) -> bool {
        self.confidence > 0.0
    }
}

/// Number of keypoints in a hand skeleton.
pub const HAND_POINTS: usize = 21;

#[derive(Debug, Clone, PartialEq)]
pub struct PersonPose {
    /// Ordinal of this person within its frame.
    pub person_id: usize,
    pub body: Vec<Keypoint>,
    pub left_hand: Option<Vec<Keypoint>>,
    pub right_hand: Option<Vec<Keypoint>>,
}

impl PersonPose {
    /// Keypoint for a named joint, or an absent keypoint if out of range.
    pub fn joint(&self, layout: &SkeletonLayout, joint: Joint) -> Keypoint {
        self.body
            .get(layout.index(joint))
            .copied()
            .unwrap_or(Keypoint::ABSENT)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PoseFrame {
    pub frame: usize,
    pub people: Vec<PersonPose>,
}

/// Joints the geometry code needs to find by name.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Joint {
    Nose,
    Neck,
    REye,
    LEye,
    REar,
    LEar,
    RShoulder,
    LShoulder,
    RElbow,
    LElbow,
    RWrist,
    LWrist,
    RHip,
    LHip,
}

impl Joint {
    pub const ALL: [Joint; 14] = [
        Joint::Nose,
        Joint::Neck,
        Joint::REye,
        Joint::LEye,
        Joint::REar,
        Joint::LEar,
        Joint::RShoulder,
        Joint::LShoulder,
        Joint::RElbow,
        Joint::LElbow,
        Joint::RWrist,
        Joint::LWrist,
        Joint::RHip,
        Joint::LHip,
    ];

    fn slot(self) -> usize {
        self as usize
    }
}

/// Maps named joints to positions in the flat body keypoint array.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SkeletonLayout {
    name: String,
    size: usize,
    indices: [usize; 14],
}

impl SkeletonLayout {
    /// Builds a layout, checking that every joint is mapped to a unique index
    /// below `size`.
    pub fn new(name: impl Into<String>, size: usize, map: &[(Joint, usize)]) -> Result<Self> {
        let mut indices = [usize::MAX; 14];
        for &(joint, idx) in map {
            if idx >= size {
                return Err(Error::Argument(format!(
                    "joint {joint:?} index {idx} out of range for skeleton size {size}"
                )));
            }
            indices[joint.slot()] = idx;
        }
        if let Some(j) = Joint::ALL.iter().find(|j| indices[j.slot()] == usize::MAX) {
            return Err(Error::Argument(format!("joint {j:?} not mapped")));
        }
        let mut sorted = indices;
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Argument("joint indices must be unique".into()));
        }
        Ok(Self {
            name: name.into(),
            size,
            indices,
        })
    }

    /// The 18-joint layout (COCO ordering used by common pose estimators).
    pub fn coco18() -> Self {
        use Joint::*;
        Self::new(
            "coco18",
            18,
            &[
                (Nose, 0),
                (Neck, 1),
                (RShoulder, 2),
                (RElbow, 3),
                (RWrist, 4),
                (LShoulder, 5),
                (LElbow, 6),
                (LWrist, 7),
                (RHip, 8),
                (LHip, 11),
                (REye, 14),
                (LEye, 15),
                (REar, 16),
                (LEar, 17),
            ],
        )
        .expect("static layout is valid")
    }

    /// The 25-joint layout with a mid-hip joint at index 8.
    pub fn body25() -> Self {
        use Joint::*;
        Self::new(
            "body25",
            25,
            &[
                (Nose, 0),
                (Neck, 1),
                (RShoulder, 2),
                (RElbow, 3),
                (RWrist, 4),
                (LShoulder, 5),
                (LElbow, 6),
                (LWrist, 7),
                (RHip, 9),
                (LHip, 12),
                (REye, 15),
                (LEye, 16),
                (REar, 17),
                (LEar, 18),
            ],
        )
        .expect("static layout is valid")
    }

    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "coco18" => Ok(Self::coco18()),
            "body25" => Ok(Self::body25()),
            other => Err(Error::Config(format!("unknown skeleton layout `{other}`"))),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn index(&self, joint: Joint) -> usize {
        self.indices[joint.slot()]
    }
}

impl Default for SkeletonLayout {
    fn default() -> Self {
        Self::coco18()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GazeSample {
    /// Milliseconds from recording start.
    pub timestamp: f64,
    pub x: f64,
    pub y: f64,
    pub valid: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub frame: usize,
    pub label: String,
    pub rect: Rect,
    pub confidence: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TruthBox {
    pub frame: usize,
    pub label: String,
    pub rect: Rect,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameCode {
    pub frame: usize,
    pub label: String,
}

/// Ground truth, either boxes for detection evaluation or per-frame codes
/// for reliability evaluation.
#[derive(Debug, Clone, PartialEq)]
pub enum GroundTruth {
    Boxes(Vec<TruthBox>),
    Labels(Vec<FrameCode>),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VideoMeta {
    pub frame_count: usize,
    pub fps: f64,
    pub width: f64,
    pub height: f64,
}

impl VideoMeta {
    pub fn new(frame_count: usize, fps: f64, width: f64, height: f64) -> Result<Self> {
        let meta = Self {
            frame_count,
            fps,
            width,
            height,
        };
        meta.validate()?;
        Ok(meta)
    }

    /// Frame count may be zero for an empty recording; the rest must be positive.
    pub fn validate(&self) -> Result<()> {
        if !(self.fps > 0.0 && self.fps.is_finite()) {
            return Err(Error::Argument(format!(
                "fps must be positive, got {}",
                self.fps
            )));
        }
        if !(self.width > 0.0 && self.height > 0.0) {
            return Err(Error::Argument(format!(
                "frame size must be positive, got {}x{}",
                self.width, self.height
            )));
        }
        Ok(())
    }

    pub fn frame_period_ms(&self) -> f64 {
        1000.0 / self.fps
    }
}

#[derive(Deserialize)]
struct RawFrame {
    frame: usize,
    #[serde(default)]
    people: Vec<RawPerson>,
}

#[derive(Deserialize)]
struct RawPerson {
    #[serde(default)]
    pose_keypoints_2d: Vec<f64>,
    #[serde(default)]
    hand_left_keypoints_2d: Vec<f64>,
    #[serde(default)]
    hand_right_keypoints_2d: Vec<f64>,
}

const POSE_CTX: &str = "pose";

fn triples(values: &[f64], expected: usize, what: &str, line: usize) -> Result<Vec<Keypoint>> {
    if !values.len().is_multiple_of(3) {
        return Err(Error::format(
            POSE_CTX,
            line,
            format!(
                "{what} array length {} is not a multiple of 3",
                values.len()
            ),
        ));
    }
    if values.len() / 3 != expected {
        return Err(Error::format(
            POSE_CTX,
            line,
            format!(
                "{what} has {} joints, expected {expected}",
                values.len() / 3
            ),
        ));
    }
    values
        .chunks_exact(3)
        .map(|t| {
            let (x, y, c) = (t[0], t[1], t[2]);
            if !(0.0..=1.0).contains(&c) {
                return Err(Error::format(
                    POSE_CTX,
                    line,
                    format!("{what} confidence {c} outside [0,1]"),
                ));
            }
            if c > 0.0 && !(x.is_finite() && y.is_finite()) {
                return Err(Error::format(
                    POSE_CTX,
                    line,
                    format!("{what} has non-finite coordinates"),
                ));
            }
            Ok(Keypoint::new(x, y, c))
        })
        .collect()
}

fn hand(values: &[f64], what: &str, line: usize) -> Result<Option<Vec<Keypoint>>> {
    if values.is_empty() {
        Ok(None)
    } else {
        triples(values, HAND_POINTS, what, line).map(Some)
    }
}

/// Parses line-delimited JSON pose records, one frame per line. Blank lines are skipped.
pub fn parse_pose_frames<R: BufRead>(input: R, layout: &SkeletonLayout) -> Result<Vec<PoseFrame>> {
    let mut frames = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| Error::parse(POSE_CTX, lineno, e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawFrame = serde_json::from_str(&line)
            .map_err(|e| Error::parse(POSE_CTX, lineno, e.to_string()))?;
        let people = raw
            .people
            .iter()
            .enumerate()
            .map(|(person_id, p)| {
                Ok(PersonPose {
                    person_id,
                    body: triples(
                        &p.pose_keypoints_2d,
                        layout.size(),
                        "pose_keypoints_2d",
                        lineno,
                    )?,
                    left_hand: hand(&p.hand_left_keypoints_2d, "hand_left_keypoints_2d", lineno)?,
                    right_hand: hand(
                        &p.hand_right_keypoints_2d,
                        "hand_right_keypoints_2d",
                        lineno,
                    )?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        frames.push(PoseFrame {
            frame: raw.frame,
            people,
        });
    }
    Ok(frames)
}

fn csv_reader<R: Read>(input: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(input)
}

fn headers<R: Read>(rdr: &mut csv::Reader<R>, context: &'static str) -> Result<Vec<String>> {
    let h = rdr
        .headers()
        .map_err(|e| Error::parse(context, 1, e.to_string()))?;
    Ok(h.iter().map(|s| s.to_string()).collect())
}

fn field<T: std::str::FromStr>(
    rec: &csv::StringRecord,
    idx: usize,
    name: &str,
    context: &'static str,
    row: usize,
) -> Result<T> {
    let raw = rec.get(idx).unwrap_or("");
    raw.parse::<T>().map_err(|_| {
        Error::parse(
            context,
            row,
            format!("field `{name}` has invalid value `{raw}`"),
        )
    })
}

fn records<'r, R: Read>(
    rdr: &'r mut csv::Reader<R>,
    context: &'static str,
    width: usize,
) -> impl Iterator<Item = Result<(usize, csv::StringRecord)>> + 'r {
    rdr.records().enumerate().map(move |(i, rec)| {
        let row = i + 1;
        let rec = rec.map_err(|e| Error::parse(context, row, e.to_string()))?;
        if rec.len() != width {
            return Err(Error::format(
                context,
                row,
                format!("expected {width} fields, found {}", rec.len()),
            ));
        }
        Ok((row, rec))
    })
}

const GAZE_CTX: &str = "gaze";
pub const GAZE_HEADER: [&str; 4] = ["timestamp_ms", "x_px", "y_px", "valid"];

/// Parses a gaze CSV. Row numbers in errors count data rows from 1.
pub fn parse_gaze<R: Read>(input: R) -> Result<Vec<GazeSample>> {
    let mut rdr = csv_reader(input);
    let h = headers(&mut rdr, GAZE_CTX)?;
    if h != GAZE_HEADER {
        return Err(Error::format(
            GAZE_CTX,
            0,
            format!("unexpected header {h:?}"),
        ));
    }
    let mut out: Vec<GazeSample> = Vec::new();
    for item in records(&mut rdr, GAZE_CTX, 4) {
        let (row, rec) = item?;
        let timestamp: f64 = field(&rec, 0, "timestamp_ms", GAZE_CTX, row)?;
        let x: f64 = field(&rec, 1, "x_px", GAZE_CTX, row)?;
        let y: f64 = field(&rec, 2, "y_px", GAZE_CTX, row)?;
        let valid = match rec.get(3).unwrap_or("") {
            "1" => true,
            "0" => false,
            other => {
                return Err(Error::parse(
                    GAZE_CTX,
                    row,
                    format!("field `valid` must be 0 or 1, got `{other}`"),
                ))
            }
        };
        if !timestamp.is_finite() {
            return Err(Error::parse(GAZE_CTX, row, "non-finite timestamp"));
        }
        if let Some(prev) = out.last() {
            if timestamp < prev.timestamp {
                return Err(Error::format(
                    GAZE_CTX,
                    row,
                    format!("timestamp {timestamp} decreases from {}", prev.timestamp),
                ));
            }
        }
        out.push(GazeSample {
            timestamp,
            x,
            y,
            valid,
        });
    }
    Ok(out)
}

const DET_CTX: &str = "detections";
pub const DETECTION_HEADER: [&str; 7] = ["frame", "label", "x", "y", "w", "h", "confidence"];

fn rect_fields(rec: &csv::StringRecord, context: &'static str, row: usize) -> Result<Rect> {
    let x: f64 = field(rec, 2, "x", context, row)?;
    let y: f64 = field(rec, 3, "y", context, row)?;
    let w: f64 = field(rec, 4, "w", context, row)?;
    let h: f64 = field(rec, 5, "h", context, row)?;
    if !(w > 0.0 && h > 0.0) {
        return Err(Error::format(
            context,
            row,
            format!("box size must be positive, got {w}x{h}"),
        ));
    }
    if !(x.is_finite() && y.is_finite() && w.is_finite() && h.is_finite()) {
        return Err(Error::format(context, row, "non-finite box coordinates"));
    }
    Ok(Rect::new(x, y, w, h))
}

/// Parses a detection CSV `frame,label,x,y,w,h,confidence`.
pub fn parse_detections<R: Read>(input: R) -> Result<Vec<Detection>> {
    let mut rdr = csv_reader(input);
    let h = headers(&mut rdr, DET_CTX)?;
    if h != DETECTION_HEADER {
        return Err(Error::format(
            DET_CTX,
            0,
            format!("unexpected header {h:?}"),
        ));
    }
    let mut out = Vec::new();
    for item in records(&mut rdr, DET_CTX, 7) {
        let (row, rec) = item?;
        let frame: usize = field(&rec, 0, "frame", DET_CTX, row)?;
        let label = rec.get(1).unwrap_or("").to_string();
        let rect = rect_fields(&rec, DET_CTX, row)?;
        let confidence: f64 = field(&rec, 6, "confidence", DET_CTX, row)?;
        if !(0.0..=1.0).contains(&confidence) {
            return Err(Error::format(
                DET_CTX,
                row,
                format!("confidence {confidence} outside [0,1]"),
            ));
        }
        out.push(Detection {
            frame,
            label,
            rect,
            confidence,
        });
    }
    Ok(out)
}

/// Writes detections in the same CSV schema [`parse_detections`] reads.
pub fn write_detections<W: Write>(out: W, dets: &[Detection]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::Argument(format!("csv write failed: {e}"));
    w.write_record(DETECTION_HEADER).map_err(io)?;
    for d in dets {
        w.write_record([
            d.frame.to_string(),
            d.label.clone(),
            d.rect.x.to_string(),
            d.rect.y.to_string(),
            d.rect.w.to_string(),
            d.rect.h.to_string(),
            d.confidence.to_string(),
        ])
        .map_err(io)?;
    }
    w.flush()
        .map_err(|e| Error::Argument(format!("csv write failed: {e}")))?;
    Ok(())
}

const TRUTH_CTX: &str = "ground truth";

/// Parses ground truth, choosing box or label truth from the header.
///
/// Box truth uses the detection schema, with or without the (ignored)
/// confidence column. Label truth is `frame,label`.
pub fn parse_ground_truth<R: Read>(input: R) -> Result<GroundTruth> {
    let mut rdr = csv_reader(input);
    let h = headers(&mut rdr, TRUTH_CTX)?;
    let h: Vec<&str> = h.iter().map(String::as_str).collect();
    if h == ["frame", "label"] {
        let mut out = Vec::new();
        for item in records(&mut rdr, TRUTH_CTX, 2) {
            let (row, rec) = item?;
            out.push(FrameCode {
                frame: field(&rec, 0, "frame", TRUTH_CTX, row)?,
                label: rec.get(1).unwrap_or("").to_string(),
            });
        }
        return Ok(GroundTruth::Labels(out));
    }
    let width = if h == DETECTION_HEADER {
        7
    } else if h == DETECTION_HEADER[..6] {
        6
    } else {
        return Err(Error::format(TRUTH_CTX, 0, format!("unknown header {h:?}")));
    };
    let mut out = Vec::new();
    for item in records(&mut rdr, TRUTH_CTX, width) {
        let (row, rec) = item?;
        out.push(TruthBox {
            frame: field(&rec, 0, "frame", TRUTH_CTX, row)?,
            label: rec.get(1).unwrap_or("").to_string(),
            rect: rect_fields(&rec, TRUTH_CTX, row)?,
        });
    }
    Ok(GroundTruth::Boxes(out))
}

const LABELS_CTX: &str = "frame labels";

/// Reads per-frame codes from either a `frame,label` file or an annotation
/// file `frame,category,person_id,source`.
pub fn parse_frame_codes<R: Read>(input: R) -> Result<Vec<FrameCode>> {
    let mut rdr = csv_reader(input);
    let h = headers(&mut rdr, LABELS_CTX)?;
    let h: Vec<&str> = h.iter().map(String::as_str).collect();
    let width = match h.as_slice() {
        ["frame", "label"] => 2,
        ["frame", "category", "person_id", "source"] => 4,
        _ => {
            return Err(Error::format(
                LABELS_CTX,
                0,
                format!("unknown header {h:?}"),
            ))
        }
    };
    let mut out = Vec::new();
    for item in records(&mut rdr, LABELS_CTX, width) {
        let (row, rec) = item?;
        out.push(FrameCode {
            frame: field(&rec, 0, "frame", LABELS_CTX, row)?,
            label: rec.get(1).unwrap_or("").to_string(),
        });
    }
    Ok(out)
}

/// Picks, for every frame, the valid gaze sample nearest the frame midpoint
/// `(i + 0.5) * 1000 / fps` ms, if one lies within half a frame period.
/// Equidistant candidates resolve to the earlier sample.
pub fn align_gaze_to_frames(gaze: &[GazeSample], meta: &VideoMeta) -> Vec<Option<GazeSample>> {
    let valid: Vec<&GazeSample> = gaze.iter().filter(|g| g.valid).collect();
    let period = meta.frame_period_ms();
    let half = period / 2.0;
    (0..meta.frame_count)
        .map(|i| {
            let mid = (i as f64 + 0.5) * period;
            let upper = valid.partition_point(|g| g.timestamp < mid);
            let lower = upper.checked_sub(1).map(|k| {
                let t = valid[k].timestamp;
                valid.partition_point(|g| g.timestamp < t)
            });
            let mut best: Option<(f64, usize)> = None;
            for k in lower
                .into_iter()
                .chain((upper < valid.len()).then_some(upper))
            {
                let dist = (valid[k].timestamp - mid).abs();
                if dist <= half && best.is_none_or(|(d, _)| dist < d) {
                    best = Some((dist, k));
                }
            }
            best.map(|(_, k)| *valid[k])
        })
        .collect()
}
