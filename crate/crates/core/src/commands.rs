//! The four CLI commands. Each reads its inputs, computes, and writes its
//! outputs plus a run manifest under the configured output directory.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::eval::{best_f1, pr_curve, PrCurve};
use crate::geometry::upper_body_from_person_box;
use crate::ingest::{
    align_gaze_to_frames, parse_detections, parse_frame_codes, parse_gaze, parse_ground_truth,
    parse_pose_frames, FrameCode, GroundTruth, PersonPose,
};
use crate::labeling::{
    aggregate_segments, frame_aois, label_sequence, Category, CodedSegment, FrameInput, FrameLabel,
};
use crate::par::{self, Execution};
use crate::reliability::{reliability_report, ReliabilityReport};

pub const ANNOTATIONS_FILE: &str = "annotations.csv";
pub const SEGMENTS_FILE: &str = "segments.csv";
pub const EVAL_SUMMARY_FILE: &str = "evaluate_summary.json";
pub const RELIABILITY_FILE: &str = "reliability.json";
pub const REPORT_FILE: &str = "report.txt";
pub const DISTRIBUTION_FILE: &str = "gaze_distribution.csv";
pub const PLOT_PR_FILE: &str = "plot_pr.csv";

#[derive(Debug, Clone, Serialize)]
pub struct InputDigest {
    pub path: PathBuf,
    pub bytes: u64,
    pub sha256: String,
}

/// Everything needed to rerun a command. Wall-clock timing lives in a
/// separate `timing_<command>.json` so the manifest itself is reproducible.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub config: RunConfig,
    pub inputs: BTreeMap<String, InputDigest>,
    pub counts: BTreeMap<String, u64>,
    pub outputs: Vec<String>,
    pub timing_file: String,
}

struct Run {
    command: &'static str,
    started: Instant,
    inputs: BTreeMap<String, InputDigest>,
    counts: BTreeMap<String, u64>,
    outputs: Vec<String>,
}

impl Run {
    fn new(command: &'static str) -> Self {
        Self {
            command,
            started: Instant::now(),
            inputs: BTreeMap::new(),
            counts: BTreeMap::new(),
            outputs: Vec::new(),
        }
    }

    /// Reads an input file fully and records its digest.
    fn read(&mut self, role: &str, path: &Path) -> Result<Vec<u8>> {
        let bytes = read_input(path)?;
        self.inputs.insert(
            role.to_string(),
            InputDigest {
                path: path.to_path_buf(),
                bytes: bytes.len() as u64,
                sha256: hex::encode(Sha256::digest(&bytes)),
            },
        );
        Ok(bytes)
    }

    fn count(&mut self, key: &str, n: usize) {
        self.counts.insert(key.to_string(), n as u64);
    }

    fn write(&mut self, out: &Path, name: &str, contents: &str) -> Result<()> {
        let path = out.join(name);
        fs::write(&path, contents).map_err(|e| Error::io(&path, e))?;
        self.outputs.push(name.to_string());
        Ok(())
    }

    fn finish(self, cfg: &RunConfig) -> Result<RunManifest> {
        let timing_file = format!("timing_{}.json", self.command);
        let manifest = RunManifest {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command: self.command,
            config: cfg.clone(),
            inputs: self.inputs,
            counts: self.counts,
            outputs: self.outputs,
            timing_file: timing_file.clone(),
        };
        let mpath = cfg.out.join(format!("manifest_{}.json", self.command));
        let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n";
        fs::write(&mpath, json).map_err(|e| Error::io(&mpath, e))?;
        let timing =
            serde_json::json!({ "elapsed_ms": self.started.elapsed().as_secs_f64() * 1000.0 });
        let tpath = cfg.out.join(&timing_file);
        fs::write(&tpath, timing.to_string() + "\n").map_err(|e| Error::io(&tpath, e))?;
        Ok(manifest)
    }
}

fn read_input(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            Error::MissingInput(path.display().to_string())
        } else {
            Error::io(path, e)
        }
    })
}

fn required<'a>(p: &'a Option<PathBuf>, key: &str) -> Result<&'a Path> {
    p.as_deref()
        .ok_or_else(|| Error::MissingInput(format!("config key `{key}` is not set")))
}

fn ensure_out(cfg: &RunConfig) -> Result<()> {
    fs::create_dir_all(&cfg.out).map_err(|e| Error::io(&cfg.out, e))
}

/// Output of [`annotate`].
#[derive(Debug, Clone)]
pub struct Annotation {
    pub labels: Vec<FrameLabel>,
    pub segments: Vec<CodedSegment>,
    pub manifest: RunManifest,
}

/// Assigns every frame its pose people, checking frame indices.
fn people_by_frame(
    frames: Vec<crate::ingest::PoseFrame>,
    frame_count: Option<usize>,
) -> Result<Vec<Vec<PersonPose>>> {
    let n = frame_count.unwrap_or_else(|| frames.iter().map(|f| f.frame + 1).max().unwrap_or(0));
    let mut out: Vec<Option<Vec<PersonPose>>> = vec![None; n];
    for f in frames {
        let slot = out.get_mut(f.frame).ok_or_else(|| {
            Error::Alignment(format!("pose frame {} beyond frame_count {n}", f.frame))
        })?;
        if slot.is_some() {
            return Err(Error::format(
                "pose",
                0,
                format!("duplicate record for frame {}", f.frame),
            ));
        }
        *slot = Some(f.people);
    }
    Ok(out.into_iter().map(Option::unwrap_or_default).collect())
}

pub fn annotation_csv(labels: &[FrameLabel]) -> String {
    let mut s = String::from("frame,category,person_id,source\n");
    for l in labels {
        let pid = l.person_id.map(|p| p.to_string()).unwrap_or_default();
        let src = l.source.map(|s| s.as_str()).unwrap_or("");
        let _ = writeln!(s, "{},{},{},{}", l.frame, l.category, pid, src);
    }
    s
}

pub fn segments_csv(segs: &[CodedSegment]) -> String {
    let mut s = String::from("start_frame,end_frame,category,duration_ms\n");
    for g in segs {
        let _ = writeln!(
            s,
            "{},{},{},{:.3}",
            g.start_frame, g.end_frame, g.category, g.duration_ms
        );
    }
    s
}

/// Pose + gaze in, per-frame codes and segments out.
pub fn annotate(cfg: &RunConfig) -> Result<Annotation> {
    cfg.validate()?;
    let mut run = Run::new("annotate");
    let pose_path = required(&cfg.pose, "pose")?;
    let gaze_path = required(&cfg.gaze, "gaze")?;
    let pose_bytes = run.read("pose", pose_path)?;
    let gaze_bytes = run.read("gaze", gaze_path)?;

    let layout = cfg.layout()?;
    let geometry = cfg.geometry();
    let policy = cfg.policy();
    let poses = parse_pose_frames(BufReader::new(pose_bytes.as_slice()), &layout)?;
    let gaze = parse_gaze(gaze_bytes.as_slice())?;
    let people = people_by_frame(poses, cfg.frame_count)?;
    let meta = cfg.video_meta(people.len())?;
    let aligned = align_gaze_to_frames(&gaze, &meta);

    let inputs: Vec<FrameInput> = par::map_range(Execution::default(), people.len(), |i| {
        Ok(FrameInput {
            aois: frame_aois(&people[i], &layout, &geometry, &policy, &meta)?,
            gaze: aligned[i],
        })
    })
    .into_iter()
    .collect::<Result<_>>()?;
    let labels = label_sequence(&inputs, &policy);
    let segments = aggregate_segments(&labels, &meta);

    run.count("frames", labels.len());
    run.count("persons", people.iter().map(Vec::len).sum());
    run.count("gaze_samples", gaze.len());
    run.count(
        "frames_with_gaze",
        aligned.iter().filter(|g| g.is_some()).count(),
    );
    run.count("segments", segments.len());

    ensure_out(cfg)?;
    run.write(&cfg.out, ANNOTATIONS_FILE, &annotation_csv(&labels))?;
    run.write(&cfg.out, SEGMENTS_FILE, &segments_csv(&segments))?;
    let manifest = run.finish(cfg)?;
    Ok(Annotation {
        labels,
        segments,
        manifest,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CategoryStatus {
    Ok,
    NoTruth,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategorySummary {
    pub status: CategoryStatus,
    pub ap: Option<f64>,
    pub best_f1: Option<f64>,
    pub best_threshold: Option<f64>,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub detections: usize,
    pub truths: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub iou_thresh: f64,
    pub ap_mode: crate::eval::ApMode,
    /// Mean AP over categories that have truth boxes.
    pub map: Option<f64>,
    pub categories: BTreeMap<String, CategorySummary>,
}

/// File-name-safe form of a category label.
pub fn category_slug(label: &str) -> String {
    label
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

pub fn pr_csv(curve: &PrCurve) -> String {
    let mut s = String::from("threshold,precision,recall\n");
    for p in &curve.points {
        let _ = writeln!(s, "{},{},{}", p.threshold, p.precision, p.recall);
    }
    s
}

fn summarize(curve: &PrCurve, dets: usize, truths: usize) -> CategorySummary {
    match best_f1(curve) {
        Ok((threshold, f1)) => {
            let op = curve
                .points
                .iter()
                .find(|p| p.threshold == threshold)
                .expect("best threshold is a curve point");
            CategorySummary {
                status: CategoryStatus::Ok,
                ap: Some(curve.ap),
                best_f1: Some(f1),
                best_threshold: Some(threshold),
                tp: op.tp,
                fp: op.fp,
                fn_: op.fn_,
                detections: dets,
                truths,
            }
        }
        Err(_) => CategorySummary {
            status: CategoryStatus::Ok,
            ap: Some(curve.ap),
            best_f1: Some(0.0),
            best_threshold: None,
            tp: 0,
            fp: 0,
            fn_: truths,
            detections: dets,
            truths,
        },
    }
}

/// Detections + box truth in, per-category PR curves and a summary out.
pub fn evaluate(cfg: &RunConfig) -> Result<EvalSummary> {
    cfg.validate()?;
    let mut run = Run::new("evaluate");
    let det_bytes = run.read("detections", required(&cfg.detections, "detections")?)?;
    let truth_bytes = run.read("box_truth", required(&cfg.box_truth, "box_truth")?)?;
    let dets = parse_detections(det_bytes.as_slice())?;
    let mut truths = match parse_ground_truth(truth_bytes.as_slice())? {
        GroundTruth::Boxes(b) => b,
        GroundTruth::Labels(_) => {
            return Err(Error::format(
                "ground truth",
                0,
                "evaluate needs box truth, got frame labels",
            ))
        }
    };
    for t in &mut truths {
        t.rect = upper_body_from_person_box(&t.rect, cfg.truth_height_fraction)?;
    }

    let cats: BTreeSet<&str> = dets
        .iter()
        .map(|d| d.label.as_str())
        .chain(truths.iter().map(|t| t.label.as_str()))
        .collect();
    ensure_out(cfg)?;
    let mut categories = BTreeMap::new();
    let mut aps = Vec::new();
    for cat in cats {
        let cd: Vec<_> = dets.iter().filter(|d| d.label == cat).cloned().collect();
        let ct: Vec<_> = truths.iter().filter(|t| t.label == cat).cloned().collect();
        let summary = if ct.is_empty() {
            CategorySummary {
                status: CategoryStatus::NoTruth,
                ap: None,
                best_f1: None,
                best_threshold: None,
                tp: 0,
                fp: cd.len(),
                fn_: 0,
                detections: cd.len(),
                truths: 0,
            }
        } else {
            let curve = pr_curve(&cd, &ct, cfg.iou_thresh, cfg.ap_mode)?;
            run.write(
                &cfg.out,
                &format!("pr_{}.csv", category_slug(cat)),
                &pr_csv(&curve),
            )?;
            aps.push(curve.ap);
            summarize(&curve, cd.len(), ct.len())
        };
        categories.insert(cat.to_string(), summary);
    }
    let summary = EvalSummary {
        iou_thresh: cfg.iou_thresh,
        ap_mode: cfg.ap_mode,
        map: (!aps.is_empty()).then(|| aps.iter().sum::<f64>() / aps.len() as f64),
        categories,
    };
    run.count("detections", dets.len());
    run.count("truth_boxes", truths.len());
    run.count("categories", summary.categories.len());
    let json = serde_json::to_string_pretty(&summary).expect("summary serializes") + "\n";
    run.write(&cfg.out, EVAL_SUMMARY_FILE, &json)?;
    run.finish(cfg)?;
    Ok(summary)
}

/// Normalizes a code for reliability: lowercase, with empty codes and (unless
/// included) gaze dropout treated as missing.
fn reliability_code(label: &str, include_nogaze: bool) -> Option<String> {
    let l = label.trim().to_ascii_lowercase();
    if l.is_empty() || (!include_nogaze && l == Category::NoGaze.as_str()) {
        None
    } else {
        Some(l)
    }
}

type CodePairs = (Vec<Option<String>>, Vec<Option<String>>);

fn aligned_codes(a: &[FrameCode], b: &[FrameCode], include_nogaze: bool) -> Result<CodePairs> {
    if a.len() != b.len() {
        return Err(Error::Alignment(format!(
            "label files have {} and {} frames",
            a.len(),
            b.len()
        )));
    }
    if let Some((x, y)) = a.iter().zip(b).find(|(x, y)| x.frame != y.frame) {
        return Err(Error::Alignment(format!(
            "frame {} paired with frame {}",
            x.frame, y.frame
        )));
    }
    let map = |v: &[FrameCode]| {
        v.iter()
            .map(|c| reliability_code(&c.label, include_nogaze))
            .collect()
    };
    Ok((map(a), map(b)))
}

/// Two aligned frame-code files in, agreement statistics out.
pub fn reliability(cfg: &RunConfig) -> Result<ReliabilityReport> {
    cfg.validate()?;
    let mut run = Run::new("reliability");
    let a_path = cfg
        .labels
        .clone()
        .unwrap_or_else(|| cfg.out.join(ANNOTATIONS_FILE));
    let a = parse_frame_codes(run.read("labels", &a_path)?.as_slice())?;
    let b = parse_frame_codes(
        run.read("label_truth", required(&cfg.label_truth, "label_truth")?)?
            .as_slice(),
    )?;
    let (ca, cb) = aligned_codes(&a, &b, cfg.include_nogaze)?;
    let report = reliability_report(&ca, &cb)?;
    run.count("frames", a.len());
    run.count("units", report.n as usize);
    ensure_out(cfg)?;
    run.write(&cfg.out, RELIABILITY_FILE, &report.to_json())?;
    run.finish(cfg)?;
    Ok(report)
}

/// Gaze distribution row: frames and percent of all frames per category.
#[derive(Debug, Clone, PartialEq)]
pub struct DistributionRow {
    pub category: Category,
    pub frames: usize,
    pub percent: f64,
}

pub fn gaze_distribution(codes: &[FrameCode]) -> Result<Vec<DistributionRow>> {
    let mut counts: BTreeMap<Category, usize> = Category::ALL.iter().map(|&c| (c, 0)).collect();
    for c in codes {
        *counts.entry(c.label.parse::<Category>()?).or_default() += 1;
    }
    let total = codes.len();
    Ok(Category::ALL
        .iter()
        .map(|&c| DistributionRow {
            category: c,
            frames: counts[&c],
            percent: if total == 0 {
                0.0
            } else {
                100.0 * counts[&c] as f64 / total as f64
            },
        })
        .collect())
}

fn read_optional(path: &Path) -> Result<Option<Vec<u8>>> {
    match fs::read(path) {
        Ok(b) => Ok(Some(b)),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
        Err(e) => Err(Error::io(path, e)),
    }
}

/// Collects prior outputs into a text summary and plot-ready tables.
/// Returns the text summary.
pub fn report(cfg: &RunConfig) -> Result<String> {
    cfg.validate()?;
    let mut run = Run::new("report");
    let out = &cfg.out;
    let annotations = read_optional(&out.join(ANNOTATIONS_FILE))?;
    let segments = read_optional(&out.join(SEGMENTS_FILE))?;
    let eval = read_optional(&out.join(EVAL_SUMMARY_FILE))?;
    let rel = read_optional(&out.join(RELIABILITY_FILE))?;
    if annotations.is_none() && eval.is_none() && rel.is_none() {
        return Err(Error::MissingInput(format!(
            "no prior outputs ({ANNOTATIONS_FILE}, {EVAL_SUMMARY_FILE}, {RELIABILITY_FILE}) in {}",
            out.display()
        )));
    }
    for (role, name) in [
        ("annotations", ANNOTATIONS_FILE),
        ("segments", SEGMENTS_FILE),
        ("evaluate_summary", EVAL_SUMMARY_FILE),
        ("reliability", RELIABILITY_FILE),
    ] {
        if out.join(name).exists() {
            run.read(role, &out.join(name))?;
        }
    }

    let mut text = String::from("gaze-aoi report\n===============\n");
    if let Some(bytes) = annotations {
        let codes = parse_frame_codes(bytes.as_slice())?;
        let dist = gaze_distribution(&codes)?;
        let mut csv = String::from("category,frames,percent\n");
        let _ = writeln!(text, "\nGaze distribution over {} frames", codes.len());
        for r in &dist {
            let _ = writeln!(csv, "{},{},{:.3}", r.category, r.frames, r.percent);
            let _ = writeln!(
                text,
                "  {:<8} {:>7} frames {:>8.3}%",
                r.category.as_str(),
                r.frames,
                r.percent
            );
        }
        run.write(out, DISTRIBUTION_FILE, &csv)?;
        run.count("frames", codes.len());
    }
    if let Some(bytes) = segments {
        let text_seg = String::from_utf8_lossy(&bytes);
        let mut per_cat: BTreeMap<String, (usize, f64)> = BTreeMap::new();
        for line in text_seg.lines().skip(1) {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 4 {
                return Err(Error::format(
                    "segments",
                    0,
                    format!("bad segment row `{line}`"),
                ));
            }
            let ms: f64 = f[3]
                .parse()
                .map_err(|_| Error::parse("segments", 0, format!("bad duration `{}`", f[3])))?;
            let e = per_cat.entry(f[2].to_string()).or_default();
            e.0 += 1;
            e.1 += ms;
        }
        let _ = writeln!(text, "\nSegments");
        for (cat, (n, ms)) in &per_cat {
            let _ = writeln!(text, "  {cat:<8} {n:>5} segments {ms:>12.3} ms");
        }
    }
    if let Some(bytes) = eval {
        let summary: EvalSummary = serde_json::from_slice(&bytes)
            .map_err(|e| Error::parse("evaluate summary", e.line(), e.to_string()))?;
        let fmt = |v: Option<f64>| v.map_or("n/a".to_string(), |x| format!("{x:.4}"));
        let _ = writeln!(
            text,
            "\nDetection evaluation (IoU {}, mAP {})",
            summary.iou_thresh,
            fmt(summary.map)
        );
        let mut plot = String::from("category,recall,precision,threshold\n");
        for (cat, s) in &summary.categories {
            let _ = writeln!(
                text,
                "  {cat:<10} ap {:>7} best_f1 {:>7} @ {:>7}  tp {} fp {} fn {}{}",
                fmt(s.ap),
                fmt(s.best_f1),
                fmt(s.best_threshold),
                s.tp,
                s.fp,
                s.fn_,
                if s.status == CategoryStatus::NoTruth {
                    "  (no truth)"
                } else {
                    ""
                }
            );
            if s.status == CategoryStatus::NoTruth {
                continue;
            }
            let name = format!("pr_{}.csv", category_slug(cat));
            let path = out.join(&name);
            let bytes = run.read(&name, &path)?;
            for line in String::from_utf8_lossy(&bytes).lines().skip(1) {
                let f: Vec<&str> = line.split(',').collect();
                if f.len() != 3 {
                    return Err(Error::format(
                        "pr curve",
                        0,
                        format!("bad row `{line}` in {name}"),
                    ));
                }
                let _ = writeln!(plot, "{cat},{},{},{}", f[2], f[1], f[0]);
            }
        }
        run.write(out, PLOT_PR_FILE, &plot)?;
    }
    if let Some(bytes) = rel {
        let v: serde_json::Value = serde_json::from_slice(&bytes)
            .map_err(|e| Error::parse("reliability", e.line(), e.to_string()))?;
        let _ = writeln!(text, "\nReliability over {} units", v["n"]);
        for key in [
            "agreement",
            "scotts_pi",
            "cohens_kappa",
            "krippendorffs_alpha",
        ] {
            let x = v[key].as_f64().unwrap_or(f64::NAN);
            let _ = writeln!(text, "  {key:<20} {:>8.3}%", 100.0 * x);
        }
    }
    run.write(out, REPORT_FILE, &text)?;
    run.finish(cfg)?;
    Ok(text)
}
