//! Regenerates the end-to-end fixture under `tests/fixtures/e2e`.
//!
//! Three people stand side by side in a 1280x720, 25 fps scene for 100
//! frames while a scripted gaze path visits their heads, hands and torsos.
//! The reference coding is the scripted target of every frame. Expected
//! annotation output is computed here through the library calls directly
//! and frozen next to the inputs.
//!
//!     cargo run --example make_fixture

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use gaze_aoi::commands::{annotation_csv, segments_csv};
use gaze_aoi::config::RunConfig;
use gaze_aoi::ingest::{align_gaze_to_frames, parse_gaze, parse_pose_frames};
use gaze_aoi::labeling::{aggregate_segments, frame_aois, label_frame};

const FRAMES: usize = 100;
const FPS: f64 = 25.0;
const CENTERS: [f64; 3] = [250.0, 640.0, 1030.0];

#[derive(Clone, Copy)]
enum Target {
    Head(usize),
    RightHand(usize),
    LeftHand(usize),
    Torso(usize),
    Background,
    Dropout,
}

impl Target {
    fn code(self) -> &'static str {
        match self {
            Target::Head(_) => "head",
            Target::RightHand(_) | Target::LeftHand(_) => "hand",
            Target::Torso(_) => "torso",
            Target::Background => "none",
            Target::Dropout => "nogaze",
        }
    }
}

fn target(frame: usize) -> Target {
    match frame {
        0..=19 => Target::Head(0),
        20..=29 => Target::RightHand(1),
        30..=44 => Target::Torso(2),
        45..=54 => Target::Background,
        55..=59 => Target::Dropout,
        60..=79 => Target::Head(1),
        80..=84 => Target::Torso(0),
        _ => Target::LeftHand(2),
    }
}

fn sway(person: usize, frame: usize) -> f64 {
    8.0 * (2.0 * PI * frame as f64 / 50.0 + person as f64).sin()
}

/// Person 1 turns into a right profile for frames 60..80.
fn right_profile(person: usize, frame: usize) -> bool {
    person == 1 && (60..80).contains(&frame)
}

/// Person 2's left-hand keypoints drop out from frame 85 (motion blur).
fn left_hand_lost(person: usize, frame: usize) -> bool {
    person == 2 && frame >= 85
}

fn aim(t: Target, frame: usize) -> Option<(f64, f64)> {
    let cx = |p: usize| CENTERS[p] + sway(p, frame);
    match t {
        Target::Head(p) => Some((cx(p), 195.0)),
        Target::RightHand(p) => Some((cx(p) - 70.0, 457.0)),
        Target::LeftHand(p) => Some((cx(p) + 70.0, 457.0)),
        Target::Torso(p) => Some((cx(p), 350.0)),
        Target::Background => Some((445.0, 100.0)),
        Target::Dropout => None,
    }
}

fn body(person: usize, frame: usize) -> Vec<f64> {
    let cx = CENTERS[person] + sway(person, frame);
    let profile = right_profile(person, frame);
    let mut kp = [(0.0, 0.0, 0.0); 18];
    kp[0] = if profile {
        (cx + 5.0, 200.0, 0.9)
    } else {
        (cx, 200.0, 0.95)
    };
    kp[1] = (cx, 250.0, 0.9);
    kp[2] = (cx - 60.0, 262.0, 0.9);
    kp[3] = (cx - 75.0, 350.0, 0.85);
    kp[4] = (cx - 70.0, 430.0, 0.8);
    kp[5] = (cx + 60.0, 262.0, 0.9);
    kp[6] = (cx + 75.0, 350.0, 0.85);
    kp[7] = (cx + 70.0, 430.0, 0.8);
    kp[8] = (cx - 40.0, 450.0, 0.8);
    kp[9] = (cx - 42.0, 560.0, 0.7);
    kp[10] = (cx - 44.0, 670.0, 0.6);
    kp[11] = (cx + 40.0, 450.0, 0.8);
    kp[12] = (cx + 42.0, 560.0, 0.7);
    kp[13] = (cx + 44.0, 670.0, 0.6);
    if profile {
        kp[14] = (cx - 6.0, 188.0, 0.8);
        kp[15] = (0.0, 0.0, 0.0);
        kp[16] = (cx - 20.0, 195.0, 0.85);
        kp[17] = (cx + 20.0, 195.0, 0.1);
    } else {
        kp[14] = (cx - 12.0, 188.0, 0.9);
        kp[15] = (cx + 12.0, 188.0, 0.9);
        kp[16] = (cx - 25.0, 195.0, 0.85);
        kp[17] = (cx + 25.0, 195.0, 0.85);
    }
    kp.iter().flat_map(|&(x, y, c)| [x, y, c]).collect()
}

fn hand(cx: f64) -> Vec<f64> {
    (0..21)
        .flat_map(|i| {
            let col = (i % 5) as f64;
            let row = (i / 5) as f64;
            [
                cx - 10.0 + 5.0 * col,
                440.0 + 8.75 * row,
                0.6 + 0.01 * i as f64,
            ]
        })
        .collect()
}

fn round3(v: f64) -> f64 {
    (v * 1000.0).round() / 1000.0
}

fn poses_jsonl() -> String {
    let mut s = String::new();
    for f in 0..FRAMES {
        let people: Vec<_> = (0..3)
            .map(|p| {
                let cx = CENTERS[p] + sway(p, f);
                let body: Vec<f64> = body(p, f).into_iter().map(round3).collect();
                let right: Vec<f64> = hand(cx - 70.0).into_iter().map(round3).collect();
                let left: Vec<f64> = if left_hand_lost(p, f) {
                    vec![]
                } else {
                    hand(cx + 70.0).into_iter().map(round3).collect()
                };
                serde_json::json!({
                    "pose_keypoints_2d": body,
                    "hand_left_keypoints_2d": left,
                    "hand_right_keypoints_2d": right,
                })
            })
            .collect();
        s += &serde_json::json!({ "frame": f, "people": people }).to_string();
        s.push('\n');
    }
    s
}

/// Gaze at 50 Hz. Samples at frame midpoints follow the scripted target with
/// a small tremor; the first sample after the switch into frames 20 and 80
/// is caught mid-saccade halfway between the old and new target.
fn gaze_csv() -> String {
    let mut s = String::from("timestamp_ms,x_px,y_px,valid\n");
    let period = 1000.0 / FPS;
    for k in 0..(FRAMES * 2) {
        let t = 20.0 * k as f64;
        let frame = ((t / period).floor() as usize).min(FRAMES - 1);
        let tremor = (1.7 * (k as f64 * 0.9).sin(), 1.3 * (k as f64 * 1.3).cos());
        let pos = match (frame, aim(target(frame), frame)) {
            (20 | 80, Some((x, y))) => {
                let (px, py) =
                    aim(target(frame - 1), frame).expect("previous target has a position");
                Some(((px + x) / 2.0, (py + y) / 2.0))
            }
            (_, p) => p,
        };
        match pos {
            Some((x, y)) => {
                let _ = writeln!(s, "{t},{},{},1", round3(x + tremor.0), round3(y + tremor.1));
            }
            None => {
                let _ = writeln!(s, "{t},0,0,0");
            }
        }
    }
    s
}

fn truth_csv() -> String {
    let mut s = String::from("frame,label\n");
    for f in 0..FRAMES {
        let _ = writeln!(s, "{f},{}", target(f).code());
    }
    s
}

const CONFIG: &str = r#"# Synthetic 100-frame recording: three people, scripted gaze.
pose = "poses.jsonl"
gaze = "gaze.csv"
label_truth = "truth_labels.csv"
detections = "eval_detections.csv"
box_truth = "eval_truth.csv"
out = "out"
fps = 25.0
width = 1280.0
height = 720.0
frame_count = 100
"#;

/// Six detections against four truth boxes over two frames.
const EVAL_DETECTIONS: &str = "frame,label,x,y,w,h,confidence
0,head,100,100,40,50,0.95
0,head,104,102,40,50,0.60
0,head,300,100,40,50,0.55
1,head,200,80,40,50,0.90
1,hand,50,400,30,30,0.80
1,hand,400,400,30,30,0.30
";

const EVAL_TRUTH: &str = "frame,label,x,y,w,h
0,head,102,101,40,50
0,head,500,100,40,50
1,head,198,84,40,52
1,hand,52,398,28,34
";

fn main() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/e2e");
    fs::create_dir_all(&dir).unwrap();
    let poses = poses_jsonl();
    let gaze = gaze_csv();
    fs::write(dir.join("config.toml"), CONFIG).unwrap();
    fs::write(dir.join("poses.jsonl"), &poses).unwrap();
    fs::write(dir.join("gaze.csv"), &gaze).unwrap();
    fs::write(dir.join("truth_labels.csv"), truth_csv()).unwrap();
    fs::write(dir.join("eval_detections.csv"), EVAL_DETECTIONS).unwrap();
    fs::write(dir.join("eval_truth.csv"), EVAL_TRUTH).unwrap();

    let cfg = RunConfig::from_toml(CONFIG).unwrap();
    let layout = cfg.layout().unwrap();
    let geometry = cfg.geometry();
    let policy = cfg.policy();
    let meta = cfg.video_meta(FRAMES).unwrap();
    let frames = parse_pose_frames(poses.as_bytes(), &layout).unwrap();
    let aligned = align_gaze_to_frames(&parse_gaze(gaze.as_bytes()).unwrap(), &meta);
    let labels: Vec<_> = frames
        .iter()
        .map(|f| {
            let aois = frame_aois(&f.people, &layout, &geometry, &policy, &meta).unwrap();
            label_frame(f.frame, &aois, aligned[f.frame].as_ref(), &policy)
        })
        .collect();
    let segments = aggregate_segments(&labels, &meta);
    fs::write(
        dir.join("expected_annotations.csv"),
        annotation_csv(&labels),
    )
    .unwrap();
    fs::write(dir.join("expected_segments.csv"), segments_csv(&segments)).unwrap();

    let agree = labels
        .iter()
        .filter(|l| l.category.as_str() == target(l.frame).code())
        .count();
    println!(
        "wrote fixture to {} ({agree}/{FRAMES} frames match the script)",
        dir.display()
    );
}
