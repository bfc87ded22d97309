//! Detection evaluation: IoU matching, confidence-sweep PR curves, F1 and AP.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Rect;
use crate::ingest::{Detection, TruthBox};
use crate::par::{self, Execution};

pub fn iou(a: &Rect, b: &Rect) -> f64 {
    let iw = (a.right().min(b.right()) - a.x.max(b.x)).max(0.0);
    let ih = (a.bottom().min(b.bottom()) - a.y.max(b.y)).max(0.0);
    let inter = iw * ih;
    let union = a.area() + b.area() - inter;
    if union <= 0.0 {
        0.0
    } else {
        inter / union
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchedPair {
    pub detection: usize,
    pub truth: usize,
    pub iou: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MatchResult {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub pairs: Vec<MatchedPair>,
}

/// Order in which greedy matching visits detections: descending confidence,
/// ties in input order.
fn visit_order(dets: &[Detection]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..dets.len()).collect();
    order.sort_by(|&a, &b| dets[b].confidence.total_cmp(&dets[a].confidence));
    order
}

/// Runs greedy matching and returns, per visited detection, the truth it
/// claimed (if any).
fn greedy(
    dets: &[Detection],
    order: &[usize],
    truths: &[Rect],
    iou_thresh: f64,
) -> Vec<Option<(usize, f64)>> {
    let mut taken = vec![false; truths.len()];
    order
        .iter()
        .map(|&d| {
            let mut best: Option<(usize, f64)> = None;
            for (t, truth) in truths.iter().enumerate() {
                if taken[t] {
                    continue;
                }
                let o = iou(&dets[d].rect, truth);
                if best.is_none_or(|(_, b)| o > b) {
                    best = Some((t, o));
                }
            }
            let hit = best.filter(|&(_, o)| o >= iou_thresh);
            if let Some((t, _)) = hit {
                taken[t] = true;
            }
            hit
        })
        .collect()
}

/// Greedy one-to-one matching of one frame's detections (one category) to truths.
pub fn match_detections(dets: &[Detection], truths: &[Rect], iou_thresh: f64) -> MatchResult {
    let order = visit_order(dets);
    let hits = greedy(dets, &order, truths, iou_thresh);
    let pairs: Vec<MatchedPair> = order
        .iter()
        .zip(&hits)
        .filter_map(|(&d, h)| {
            h.map(|(t, o)| MatchedPair {
                detection: d,
                truth: t,
                iou: o,
            })
        })
        .collect();
    MatchResult {
        tp: pairs.len(),
        fp: dets.len() - pairs.len(),
        fn_: truths.len() - pairs.len(),
        pairs,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ApMode {
    /// Area under the full monotone precision envelope.
    #[default]
    AllPoints,
    /// Mean envelope precision at recall 0, 0.1, ..., 1.
    ElevenPoint,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PrPoint {
    pub threshold: f64,
    pub precision: f64,
    pub recall: f64,
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
}

/// Points are ordered by strictly decreasing threshold. A sweep without any
/// detections has no points and AP 0.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PrCurve {
    pub points: Vec<PrPoint>,
    pub ap: f64,
}

pub fn pr_curve(
    dets: &[Detection],
    truths: &[TruthBox],
    iou_thresh: f64,
    mode: ApMode,
) -> Result<PrCurve> {
    pr_curve_with(dets, truths, iou_thresh, mode, Execution::default())
}

/// PR curve from sweeping a threshold over every distinct detection confidence.
///
/// Greedy matching visits detections by descending confidence, so matching
/// the detections above a threshold yields exactly the decisions made for
/// that prefix of the full ordering. Each frame is matched once and the
/// per-threshold counts are accumulated from the prefix decisions.
pub fn pr_curve_with(
    dets: &[Detection],
    truths: &[TruthBox],
    iou_thresh: f64,
    mode: ApMode,
    exec: Execution,
) -> Result<PrCurve> {
    if truths.is_empty() {
        return Err(Error::Undefined("recall without any truth boxes".into()));
    }
    let mut frames: BTreeMap<usize, (Vec<Detection>, Vec<Rect>)> = BTreeMap::new();
    for d in dets {
        frames.entry(d.frame).or_default().0.push(d.clone());
    }
    for t in truths {
        frames.entry(t.frame).or_default().1.push(t.rect);
    }
    let frames: Vec<_> = frames.into_values().collect();
    // (confidence, is_tp) for every detection
    let decisions: Vec<Vec<(f64, bool)>> = par::map(exec, &frames, |(fd, ft)| {
        let order = visit_order(fd);
        let hits = greedy(fd, &order, ft, iou_thresh);
        order
            .iter()
            .zip(hits)
            .map(|(&d, h)| (fd[d].confidence, h.is_some()))
            .collect()
    });
    let mut all: Vec<(f64, bool)> = decisions.into_iter().flatten().collect();
    all.sort_by(|a, b| b.0.total_cmp(&a.0));

    let n_truth = truths.len();
    let mut points = Vec::new();
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < all.len() {
        let c = all[i].0;
        while i < all.len() && all[i].0 == c {
            if all[i].1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push(PrPoint {
            threshold: c,
            precision: precision(tp, fp),
            recall: tp as f64 / n_truth as f64,
            tp,
            fp,
            fn_: n_truth - tp,
        });
    }
    let ap = average_precision(&points, mode);
    Ok(PrCurve { points, ap })
}

fn precision(tp: usize, fp: usize) -> f64 {
    if tp + fp == 0 {
        1.0
    } else {
        tp as f64 / (tp + fp) as f64
    }
}

/// AP for points ordered by increasing recall (decreasing threshold).
pub fn average_precision(points: &[PrPoint], mode: ApMode) -> f64 {
    match mode {
        ApMode::AllPoints => {
            // envelope: max precision at this or any higher recall
            let mut env: Vec<f64> = points.iter().map(|p| p.precision).collect();
            for k in (0..env.len().saturating_sub(1)).rev() {
                env[k] = env[k].max(env[k + 1]);
            }
            let mut ap = 0.0;
            let mut prev_recall = 0.0;
            for (p, e) in points.iter().zip(&env) {
                ap += (p.recall - prev_recall) * e;
                prev_recall = p.recall;
            }
            ap
        }
        ApMode::ElevenPoint => {
            let total: f64 = (0..=10)
                .map(|k| {
                    let r = k as f64 / 10.0;
                    points
                        .iter()
                        .filter(|p| p.recall >= r)
                        .map(|p| p.precision)
                        .fold(0.0, f64::max)
                })
                .sum();
            total / 11.0
        }
    }
}

pub fn f1_score(precision: f64, recall: f64) -> f64 {
    let s = precision + recall;
    if s == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / s
    }
}

/// Operating point with the highest F1; ties go to the higher threshold.
pub fn best_f1(curve: &PrCurve) -> Result<(f64, f64)> {
    let mut best: Option<&PrPoint> = None;
    for p in &curve.points {
        let f = f1_score(p.precision, p.recall);
        let better = match best {
            None => true,
            Some(b) => {
                let bf = f1_score(b.precision, b.recall);
                f > bf || (f == bf && p.threshold > b.threshold)
            }
        };
        if better {
            best = Some(p);
        }
    }
    best.map(|p| (p.threshold, f1_score(p.precision, p.recall)))
        .ok_or_else(|| Error::Argument("best F1 of an empty curve".into()))
}
