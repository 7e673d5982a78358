//! Detector scoring: true/false positives, false negatives and
//! mis-separations, with their derived rates.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::{BBox, PerceptionError};

/// Matching rule for detector evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AssocRule {
    /// Minimum intersection area divided by truth-box area.
    pub min_overlap: f64,
    /// When set, boxes touching the border of this image are ignored.
    pub image_size: Option<(u32, u32)>,
}

impl Default for AssocRule {
    fn default() -> Self {
        Self {
            min_overlap: 0.3,
            image_size: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct DetectionMetrics {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub mis_separation: u64,
}

impl DetectionMetrics {
    pub fn from_counts(tp: u64, fp: u64, fn_: u64, mis_separation: u64) -> Self {
        Self { tp, fp, fn_, mis_separation }
    }

    pub fn recall(&self) -> Option<f64> {
        ratio(self.tp, self.tp + self.fn_)
    }

    pub fn precision(&self) -> Option<f64> {
        ratio(self.tp, self.tp + self.fp)
    }

    pub fn bad_box_rate(&self) -> Option<f64> {
        ratio(self.mis_separation, self.tp)
    }

    pub fn merge(&mut self, other: &DetectionMetrics) {
        self.tp += other.tp;
        self.fp += other.fp;
        self.fn_ += other.fn_;
        self.mis_separation += other.mis_separation;
    }
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

/// Scores one frame.
///
/// Pairs with overlap at or above the rule threshold are matched greedily
/// one-to-one by descending overlap. Unmatched truths are false negatives.
/// A matched detection covering two or more truths is a true positive and a
/// mis-separation; an unmatched detection that still covers a truth
/// (a duplicate box) is a mis-separation; any other unmatched detection is
/// a false positive.
pub fn evaluate_detections(dets: &[BBox], truth: &[BBox], rule: &AssocRule) -> DetectionMetrics {
    let keep = |b: &&BBox| match rule.image_size {
        Some((w, h)) => !b.is_truncated(w, h),
        None => true,
    };
    let dets: Vec<&BBox> = dets.iter().filter(keep).collect();
    let truth: Vec<&BBox> = truth.iter().filter(keep).collect();

    let mut covers = vec![0usize; dets.len()];
    let mut pairs = Vec::new();
    for (i, d) in dets.iter().enumerate() {
        for (j, t) in truth.iter().enumerate() {
            let area = t.area();
            if area <= 0.0 {
                continue;
            }
            let overlap = d.intersection_area(t) / area;
            if overlap >= rule.min_overlap {
                covers[i] += 1;
                pairs.push((overlap, i, j));
            }
        }
    }
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));

    let mut det_matched = vec![false; dets.len()];
    let mut truth_matched = vec![false; truth.len()];
    let mut m = DetectionMetrics::default();
    for (_, i, j) in pairs {
        if !det_matched[i] && !truth_matched[j] {
            det_matched[i] = true;
            truth_matched[j] = true;
            m.tp += 1;
        }
    }
    for (i, matched) in det_matched.iter().enumerate() {
        match (*matched, covers[i]) {
            (true, c) if c >= 2 => m.mis_separation += 1,
            (true, _) => {}
            (false, 0) => m.fp += 1,
            (false, _) => m.mis_separation += 1,
        }
    }
    m.fn_ = truth_matched.iter().filter(|t| !**t).count() as u64;
    m
}

/// One box in the CSV interchange format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxRow {
    pub frame_id: u64,
    pub u_min: f64,
    pub v_min: f64,
    pub u_max: f64,
    pub v_max: f64,
    pub label: String,
}

impl BoxRow {
    pub fn bbox(&self) -> BBox {
        BBox::new(self.u_min, self.v_min, self.u_max, self.v_max)
    }
}

pub fn read_box_rows<R: Read>(reader: R) -> Result<Vec<BoxRow>, PerceptionError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    rdr.deserialize()
        .collect::<Result<Vec<BoxRow>, _>>()
        .map_err(|e| PerceptionError::Csv(e.to_string()))
}

pub fn write_box_rows<W: Write>(writer: W, rows: &[BoxRow]) -> Result<(), PerceptionError> {
    let mut w = csv::Writer::from_writer(writer);
    for r in rows {
        w.serialize(r).map_err(|e| PerceptionError::Csv(e.to_string()))?;
    }
    w.flush().map_err(|e| PerceptionError::Csv(e.to_string()))
}

/// Scores prediction and truth rows frame by frame and sums the counts.
pub fn evaluate_box_rows(pred: &[BoxRow], truth: &[BoxRow], rule: &AssocRule) -> DetectionMetrics {
    let mut frames: BTreeMap<u64, (Vec<BBox>, Vec<BBox>)> = BTreeMap::new();
    for r in pred {
        frames.entry(r.frame_id).or_default().0.push(r.bbox());
    }
    for r in truth {
        frames.entry(r.frame_id).or_default().1.push(r.bbox());
    }
    let mut total = DetectionMetrics::default();
    for (dets, truths) in frames.values() {
        total.merge(&evaluate_detections(dets, truths, rule));
    }
    total
}

pub const METRICS_CSV_HEADER: [&str; 8] = [
    "detector",
    "true_positives",
    "false_positives",
    "false_negatives",
    "mis_separation",
    "recall",
    "precision",
    "bad_box_rate",
];

fn percent(x: Option<f64>) -> String {
    x.map(|v| format!("{:.1}%", v * 100.0)).unwrap_or_default()
}

/// Writes one row per `(detector, metrics)` pair with rates as percentages.
pub fn write_metrics_csv<W: Write>(writer: W, rows: &[(String, DetectionMetrics)]) -> Result<(), PerceptionError> {
    let mut w = csv::Writer::from_writer(writer);
    let err = |e: csv::Error| PerceptionError::Csv(e.to_string());
    w.write_record(METRICS_CSV_HEADER).map_err(err)?;
    for (name, m) in rows {
        w.write_record([
            name.clone(),
            m.tp.to_string(),
            m.fp.to_string(),
            m.fn_.to_string(),
            m.mis_separation.to_string(),
            percent(m.recall()),
            percent(m.precision()),
            percent(m.bad_box_rate()),
        ])
        .map_err(err)?;
    }
    w.flush().map_err(|e| PerceptionError::Csv(e.to_string()))
}
