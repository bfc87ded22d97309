//! Run configuration: a flat TOML file where every key has a default.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::ApMode;
use crate::geometry::GeometryConfig;
use crate::ingest::{SkeletonLayout, VideoMeta};
use crate::labeling::{Category, HandSource, LabelPolicy};

/// All settings for one run. Relative paths are resolved against the
/// directory of the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Skeleton layout of the pose file: `coco18` or `body25`.
    pub layout: String,

    pub pose: Option<PathBuf>,
    pub gaze: Option<PathBuf>,
    pub detections: Option<PathBuf>,
    /// Box ground truth for `evaluate`.
    pub box_truth: Option<PathBuf>,
    /// Coder A for `reliability`; defaults to `<out>/annotations.csv`.
    pub labels: Option<PathBuf>,
    /// Coder B (reference coding) for `reliability`.
    pub label_truth: Option<PathBuf>,
    pub out: PathBuf,

    pub fps: f64,
    pub width: f64,
    pub height: f64,
    /// Number of video frames; inferred from the pose file when unset.
    pub frame_count: Option<usize>,

    pub head_frontal_width: f64,
    pub head_frontal_height: f64,
    pub head_profile_width: f64,
    pub head_profile_height: f64,
    pub head_profile_shift: f64,
    pub ear_tau: f64,
    pub torso_min_joints: usize,
    pub hand_min_points: usize,
    pub hand_pad: f64,
    pub forearm_side: f64,
    pub forearm_offset: f64,

    pub priority: Vec<Category>,
    pub min_aoi_confidence: f64,
    pub margin: f64,
    pub hand_source: HandSource,

    pub iou_thresh: f64,
    pub ap_mode: ApMode,
    /// Keep the top fraction of every truth box before matching (0.66 turns a
    /// full-person box into an upper-body box).
    pub truth_height_fraction: f64,

    /// Count gaze-dropout frames as a category of their own in `reliability`.
    pub include_nogaze: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        let g = GeometryConfig::default();
        let p = LabelPolicy::default();
        Self {
            layout: "coco18".into(),
            pose: None,
            gaze: None,
            detections: None,
            box_truth: None,
            labels: None,
            label_truth: None,
            out: PathBuf::from("out"),
            fps: 25.0,
            width: 1920.0,
            height: 1080.0,
            frame_count: None,
            head_frontal_width: g.head_frontal_width,
            head_frontal_height: g.head_frontal_height,
            head_profile_width: g.head_profile_width,
            head_profile_height: g.head_profile_height,
            head_profile_shift: g.head_profile_shift,
            ear_tau: g.ear_tau,
            torso_min_joints: g.torso_min_joints,
            hand_min_points: g.hand_min_points,
            hand_pad: g.hand_pad,
            forearm_side: g.forearm_side,
            forearm_offset: g.forearm_offset,
            priority: p.priority,
            min_aoi_confidence: p.min_aoi_confidence,
            margin: p.margin,
            hand_source: p.hand_source,
            iou_thresh: 0.5,
            ap_mode: ApMode::default(),
            truth_height_fraction: 1.0,
            include_nogaze: false,
        }
    }
}

#[derive(Deserialize)]
struct ManifestConfig {
    config: RunConfig,
}

impl RunConfig {
    /// Loads a TOML config, or the config snapshot of a `.json` run manifest.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            if e.kind() == std::io::ErrorKind::NotFound {
                Error::MissingInput(format!("config file {}", path.display()))
            } else {
                Error::io(path, e)
            }
        })?;
        let mut cfg = if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str::<ManifestConfig>(&text)
                .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
                .config
        } else {
            Self::from_toml(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
        };
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    pub fn from_toml(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    /// Makes every relative path absolute against `base`.
    pub fn resolve_paths(&mut self, base: &Path) {
        let base = if base.is_absolute() {
            base.to_path_buf()
        } else {
            std::env::current_dir().unwrap_or_default().join(base)
        };
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        for p in [
            &mut self.pose,
            &mut self.gaze,
            &mut self.detections,
            &mut self.box_truth,
            &mut self.labels,
            &mut self.label_truth,
        ]
        .into_iter()
        .flatten()
        {
            fix(p);
        }
        fix(&mut self.out);
    }

    pub fn geometry(&self) -> GeometryConfig {
        GeometryConfig {
            head_frontal_width: self.head_frontal_width,
            head_frontal_height: self.head_frontal_height,
            head_profile_width: self.head_profile_width,
            head_profile_height: self.head_profile_height,
            head_profile_shift: self.head_profile_shift,
            ear_tau: self.ear_tau,
            torso_min_joints: self.torso_min_joints,
            hand_min_points: self.hand_min_points,
            hand_pad: self.hand_pad,
            forearm_side: self.forearm_side,
            forearm_offset: self.forearm_offset,
        }
    }

    pub fn policy(&self) -> LabelPolicy {
        LabelPolicy {
            priority: self.priority.clone(),
            min_aoi_confidence: self.min_aoi_confidence,
            margin: self.margin,
            hand_source: self.hand_source,
        }
    }

    pub fn layout(&self) -> Result<SkeletonLayout> {
        SkeletonLayout::by_name(&self.layout)
    }

    pub fn video_meta(&self, frame_count: usize) -> Result<VideoMeta> {
        VideoMeta::new(frame_count, self.fps, self.width, self.height)
            .map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let cfg_err = |e: Error| Error::Config(e.to_string());
        self.layout()?;
        self.geometry().validate()?;
        self.policy().validate().map_err(cfg_err)?;
        self.video_meta(0)?;
        if !(self.iou_thresh > 0.0 && self.iou_thresh <= 1.0) {
            return Err(Error::Config(format!(
                "iou_thresh must lie in (0,1], got {}",
                self.iou_thresh
            )));
        }
        if !(self.truth_height_fraction > 0.0 && self.truth_height_fraction <= 1.0) {
            return Err(Error::Config(format!(
                "truth_height_fraction must lie in (0,1], got {}",
                self.truth_height_fraction
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_all_defaults() {
        let cfg = RunConfig::from_toml("").unwrap();
        assert_eq!(cfg, RunConfig::default());
        assert_eq!(cfg.geometry(), GeometryConfig::default());
        assert_eq!(cfg.policy(), LabelPolicy::default());
        cfg.validate().unwrap();
    }

    #[test]
    fn keys_parse_and_unknown_rejected() {
        let cfg = RunConfig::from_toml(
            r#"
            layout = "body25"
            margin = 0.2
            priority = ["torso", "head", "hand"]
            hand_source = "forearm"
            ap_mode = "eleven_point"
            frame_count = 10
            "#,
        )
        .unwrap();
        assert_eq!(cfg.layout().unwrap().size(), 25);
        assert_eq!(cfg.policy().priority[0], Category::Torso);
        assert_eq!(cfg.hand_source, HandSource::Forearm);
        assert_eq!(cfg.ap_mode, ApMode::ElevenPoint);
        assert_eq!(cfg.frame_count, Some(10));
        assert!(RunConfig::from_toml("marginn = 0.2").is_err());
    }

    #[test]
    fn validation_errors() {
        let cfg = RunConfig {
            iou_thresh: 0.0,
            ..RunConfig::default()
        };
        assert!(cfg.validate().is_err());
        let cfg = RunConfig {
            priority: vec![Category::Head],
            ..RunConfig::default()
        };
        assert!(cfg.validate().is_err());
        let cfg = RunConfig {
            layout: "coco19".into(),
            ..RunConfig::default()
        };
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn paths_resolve_against_base() {
        let mut cfg = RunConfig::from_toml("pose = \"p.jsonl\"\nout = \"/abs/out\"").unwrap();
        cfg.resolve_paths(Path::new("/data/run"));
        assert_eq!(cfg.pose.unwrap(), PathBuf::from("/data/run/p.jsonl"));
        assert_eq!(cfg.out, PathBuf::from("/abs/out"));
    }
}
