//! Independent reference implementations and random input generators shared
//! by the integration test targets. Nothing here calls into the code paths it
//! is used to check.

#![allow(dead_code)]

use std::collections::BTreeSet;

use rand::rngs::StdRng;
use rand::Rng;

use gaze_aoi::geometry::Rect;
use gaze_aoi::ingest::{Detection, Keypoint, PersonPose, TruthBox};

/// Statistics computed straight from the two code sequences.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleStats {
    pub agreement: Option<f64>,
    pub pi: Option<f64>,
    pub kappa: Option<f64>,
    pub alpha: Option<f64>,
}

fn chance_corrected(p_o: f64, p_e: f64) -> f64 {
    if (1.0 - p_e).abs() < 1e-12 {
        if p_o == 1.0 {
            1.0
        } else {
            0.0
        }
    } else {
        (p_o - p_e) / (1.0 - p_e)
    }
}

/// From-definition agreement statistics. Units missing a code from either
/// coder are dropped. `None` marks an undefined statistic.
pub fn oracle_stats(a: &[Option<String>], b: &[Option<String>]) -> OracleStats {
    let units: Vec<(&str, &str)> = a
        .iter()
        .zip(b)
        .filter_map(|(x, y)| Some((x.as_deref()?, y.as_deref()?)))
        .collect();
    let n = units.len();
    if n == 0 {
        return OracleStats {
            agreement: None,
            pi: None,
            kappa: None,
            alpha: None,
        };
    }
    let cats: BTreeSet<&str> = units.iter().flat_map(|&(x, y)| [x, y]).collect();
    let nf = n as f64;
    let agree = units.iter().filter(|(x, y)| x == y).count() as f64;
    let p_o = agree / nf;

    let mut kappa_pe = 0.0;
    let mut pi_pe = 0.0;
    for &c in &cats {
        let ca = units.iter().filter(|u| u.0 == c).count() as f64;
        let cb = units.iter().filter(|u| u.1 == c).count() as f64;
        kappa_pe += (ca / nf) * (cb / nf);
        let q = (ca + cb) / (2.0 * nf);
        pi_pe += q * q;
    }

    // coincidence matrix: each two-coder unit adds both ordered value pairs
    let idx: Vec<&str> = cats.iter().copied().collect();
    let k = idx.len();
    let pos = |s: &str| idx.iter().position(|&c| c == s).unwrap();
    let mut o = vec![vec![0.0f64; k]; k];
    for &(x, y) in &units {
        o[pos(x)][pos(y)] += 1.0;
        o[pos(y)][pos(x)] += 1.0;
    }
    let nc: Vec<f64> = o.iter().map(|r| r.iter().sum()).collect();
    let big_n: f64 = nc.iter().sum();
    let mut obs = 0.0;
    let mut exp = 0.0;
    for c in 0..k {
        for kk in 0..k {
            if c != kk {
                obs += o[c][kk];
                exp += nc[c] * nc[kk];
            }
        }
    }
    let alpha = if n < 2 || exp == 0.0 {
        None
    } else {
        Some(1.0 - (big_n - 1.0) * obs / exp)
    };
    OracleStats {
        agreement: Some(p_o),
        pi: Some(chance_corrected(p_o, pi_pe)),
        kappa: Some(chance_corrected(p_o, kappa_pe)),
        alpha,
    }
}

fn overlap(a: &Rect, b: &Rect) -> f64 {
    let x0 = a.x.max(b.x);
    let y0 = a.y.max(b.y);
    let x1 = (a.x + a.w).min(b.x + b.w);
    let y1 = (a.y + a.h).min(b.y + b.h);
    if x1 <= x0 || y1 <= y0 {
        return 0.0;
    }
    let i = (x1 - x0) * (y1 - y0);
    i / (a.w * a.h + b.w * b.h - i)
}

/// (threshold, precision, recall) rows of a sweep that re-matches every frame
/// from scratch at every distinct confidence, plus the all-points AP.
pub fn brute_force_pr(
    dets: &[Detection],
    truths: &[TruthBox],
    iou_thresh: f64,
) -> (Vec<(f64, f64, f64)>, f64) {
    let mut levels: Vec<f64> = dets.iter().map(|d| d.confidence).collect();
    levels.sort_by(|a, b| b.partial_cmp(a).unwrap());
    levels.dedup();
    let frames: BTreeSet<usize> = dets
        .iter()
        .map(|d| d.frame)
        .chain(truths.iter().map(|t| t.frame))
        .collect();
    let mut rows = Vec::new();
    for &c in &levels {
        let (mut tp, mut fp) = (0usize, 0usize);
        for &f in &frames {
            let mut fd: Vec<&Detection> = dets
                .iter()
                .filter(|d| d.frame == f && d.confidence >= c)
                .collect();
            // stable: equal confidences keep input order
            fd.sort_by(|a, b| b.confidence.partial_cmp(&a.confidence).unwrap());
            let ft: Vec<&TruthBox> = truths.iter().filter(|t| t.frame == f).collect();
            let mut used = vec![false; ft.len()];
            for d in fd {
                let mut best = -1.0;
                let mut best_j = None;
                for (j, t) in ft.iter().enumerate() {
                    if !used[j] {
                        let o = overlap(&d.rect, &t.rect);
                        if o > best {
                            best = o;
                            best_j = Some(j);
                        }
                    }
                }
                match best_j {
                    Some(j) if best >= iou_thresh => {
                        used[j] = true;
                        tp += 1;
                    }
                    _ => fp += 1,
                }
            }
        }
        let p = if tp + fp == 0 {
            1.0
        } else {
            tp as f64 / (tp + fp) as f64
        };
        let r = tp as f64 / truths.len() as f64;
        rows.push((c, p, r));
    }
    // VOC all-points reference with sentinels
    let mut mrec = vec![0.0];
    let mut mpre = vec![0.0];
    for &(_, p, r) in &rows {
        mrec.push(r);
        mpre.push(p);
    }
    mrec.push(1.0);
    mpre.push(0.0);
    for i in (1..mpre.len()).rev() {
        mpre[i - 1] = mpre[i - 1].max(mpre[i]);
    }
    let mut ap = 0.0;
    for i in 1..mrec.len() {
        if mrec[i] != mrec[i - 1] {
            ap += (mrec[i] - mrec[i - 1]) * mpre[i];
        }
    }
    (rows, ap)
}

pub fn random_rect(rng: &mut StdRng, extent: f64) -> Rect {
    let w = rng.gen_range(1.0..extent / 4.0);
    let h = rng.gen_range(1.0..extent / 4.0);
    Rect::new(
        rng.gen_range(0.0..extent - w),
        rng.gen_range(0.0..extent - h),
        w,
        h,
    )
}

/// Random detection instance: up to `frames` frames, each with up to
/// `max_dets` detections and `max_truths` truths clustered so overlaps happen.
/// Confidences come from a small grid so ties occur.
pub fn random_detection_instance(
    rng: &mut StdRng,
    frames: usize,
    max_dets: usize,
    max_truths: usize,
) -> (Vec<Detection>, Vec<TruthBox>) {
    let mut dets = Vec::new();
    let mut truths = Vec::new();
    for f in 0..rng.gen_range(1..=frames) {
        let nt = rng.gen_range(0..=max_truths);
        let frame_truths: Vec<Rect> = (0..nt).map(|_| random_rect(rng, 100.0)).collect();
        for r in &frame_truths {
            truths.push(TruthBox {
                frame: f,
                label: "x".into(),
                rect: *r,
            });
        }
        for _ in 0..rng.gen_range(0..=max_dets) {
            let rect = if !frame_truths.is_empty() && rng.gen_bool(0.7) {
                let t = frame_truths[rng.gen_range(0..frame_truths.len())];
                let j = t.w.min(t.h) * 0.4;
                Rect::new(
                    t.x + rng.gen_range(-j..=j),
                    t.y + rng.gen_range(-j..=j),
                    t.w * rng.gen_range(0.7..1.3),
                    t.h * rng.gen_range(0.7..1.3),
                )
            } else {
                random_rect(rng, 100.0)
            };
            let confidence = rng.gen_range(1..=10) as f64 / 10.0;
            dets.push(Detection {
                frame: f,
                label: "x".into(),
                rect,
                confidence,
            });
        }
    }
    (dets, truths)
}

fn random_keypoint(rng: &mut StdRng, absent_p: f64) -> Keypoint {
    if rng.gen_bool(absent_p) {
        Keypoint::ABSENT
    } else {
        Keypoint::new(
            rng.gen_range(0.0..1000.0),
            rng.gen_range(0.0..1000.0),
            rng.gen_range(0.05..=1.0),
        )
    }
}

/// Random 18-joint pose with random joint presence and optional hands.
pub fn random_pose(rng: &mut StdRng) -> PersonPose {
    let body = (0..18).map(|_| random_keypoint(rng, 0.2)).collect();
    let hand = |rng: &mut StdRng| {
        rng.gen_bool(0.7)
            .then(|| (0..21).map(|_| random_keypoint(rng, 0.3)).collect())
    };
    PersonPose {
        person_id: 0,
        body,
        left_hand: hand(rng),
        right_hand: hand(rng),
    }
}

pub fn map_pose(pose: &PersonPose, f: impl Fn(Keypoint) -> Keypoint) -> PersonPose {
    let m = |v: &Vec<Keypoint>| v.iter().map(|&k| f(k)).collect::<Vec<_>>();
    PersonPose {
        person_id: pose.person_id,
        body: m(&pose.body),
        left_hand: pose.left_hand.as_ref().map(m),
        right_hand: pose.right_hand.as_ref().map(m),
    }
}

pub fn rect_close(a: &Rect, b: &Rect, tol: f64) -> bool {
    (a.x - b.x).abs() <= tol
        && (a.y - b.y).abs() <= tol
        && (a.w - b.w).abs() <= tol
        && (a.h - b.h).abs() <= tol
}

/// Synthetic multi-person pose stream in the pose JSONL format: `people`
/// standing in a row, each frame swaying slightly.
pub fn synthetic_pose_jsonl(frames: usize, people: usize) -> String {
    let mut s = String::new();
    for f in 0..frames {
        let persons: Vec<serde_json::Value> = (0..people)
            .map(|p| {
                let cx = 200.0 + 400.0 * p as f64 + 6.0 * ((f as f64) / 7.0 + p as f64).sin();
                let pts: [(f64, f64); 18] = [
                    (cx, 200.0),
                    (cx, 250.0),
                    (cx - 60.0, 262.0),
                    (cx - 75.0, 350.0),
                    (cx - 70.0, 430.0),
                    (cx + 60.0, 262.0),
                    (cx + 75.0, 350.0),
                    (cx + 70.0, 430.0),
                    (cx - 40.0, 450.0),
                    (cx - 42.0, 560.0),
                    (cx - 44.0, 670.0),
                    (cx + 40.0, 450.0),
                    (cx + 42.0, 560.0),
                    (cx + 44.0, 670.0),
                    (cx - 12.0, 188.0),
                    (cx + 12.0, 188.0),
                    (cx - 25.0, 195.0),
                    (cx + 25.0, 195.0),
                ];
                let body: Vec<f64> = pts.iter().flat_map(|&(x, y)| [x, y, 0.9]).collect();
                let hand: Vec<f64> = (0..21)
                    .flat_map(|i| {
                        [
                            cx + 60.0 + (i % 5) as f64 * 5.0,
                            440.0 + (i / 5) as f64 * 8.0,
                            0.7,
                        ]
                    })
                    .collect();
                serde_json::json!({"pose_keypoints_2d": body, "hand_left_keypoints_2d": hand})
            })
            .collect();
        s += &serde_json::json!({"frame": f, "people": persons}).to_string();
        s.push('\n');
    }
    s
}

/// Gaze at twice the frame rate wandering over the scene.
pub fn synthetic_gaze_csv(frames: usize, fps: f64) -> String {
    let mut s = String::from("timestamp_ms,x_px,y_px,valid\n");
    let step = 500.0 / fps;
    for k in 0..frames * 2 {
        let t = step * k as f64;
        let x = 640.0 + 500.0 * (k as f64 / 40.0).sin();
        let y = 350.0 + 200.0 * (k as f64 / 23.0).cos();
        let valid = if k % 97 < 3 { 0 } else { 1 };
        s += &format!("{t},{x:.3},{y:.3},{valid}\n");
    }
    s
}
