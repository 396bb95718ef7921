//! Evaluation harness: overlap-based classification and corpus metrics.
//!
//! A detection counts as a true positive when its overlap error against the
//! ground truth stays within the threshold; frames with no true pupil score
//! as true negatives exactly when the detector declares no pupil. Aggregates
//! are precision, recall, and F-measure, plus an F-measure sweep over the
//! overlap-error threshold.

use crate::config::Config;
use crate::detector::{detect, DetectPath, DetectionResult, Verdict};
use crate::ellipse::{overlap_ratio, EllipseParams};
use crate::imaging::GrayImage;
use crate::roi::RoiError;
use crate::synth::{render, CorpusFrame, GtClass, SpecError};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("frame {0}: {1}")]
    Roi(String, RoiError),
    #[error("frame {0}: {1}")]
    Spec(String, SpecError),
}

/// Detection outcome class against ground truth.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DetClass {
    Tp,
    Fp,
    Tn,
    Fn,
}

impl DetClass {
    pub fn as_str(&self) -> &'static str {
        match self {
            DetClass::Tp => "tp",
            DetClass::Fp => "fp",
            DetClass::Tn => "tn",
            DetClass::Fn => "fn",
        }
    }
}

/// Classification of one detection, with the overlap numbers when defined.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Classification {
    pub class: DetClass,
    /// Overlap ratio, defined when both a detection and a truth exist.
    pub or: Option<f64>,
    /// Overlap error `1 - OR`.
    pub eps_o: Option<f64>,
}

/// Classify a detection against optional ground truth at a given overlap
/// error threshold. Every (detection, truth) pair lands in exactly one of
/// the four classes.
pub fn classify(
    det: &DetectionResult,
    gt: Option<&EllipseParams>,
    eps_threshold: f64,
    canvas: (u32, u32),
) -> Classification {
    match (gt, &det.ellipse) {
        (Some(truth), Some(found)) => {
            let or = overlap_ratio(found, truth, canvas);
            let eps_o = 1.0 - or;
            let class = if eps_o <= eps_threshold { DetClass::Tp } else { DetClass::Fp };
            Classification { class, or: Some(or), eps_o: Some(eps_o) }
        }
        (Some(_), None) => Classification { class: DetClass::Fn, or: None, eps_o: None },
        (None, None) => Classification { class: DetClass::Tn, or: None, eps_o: None },
        (None, Some(_)) => Classification { class: DetClass::Fp, or: None, eps_o: None },
    }
}

pub fn precision(tp: usize, fp: usize) -> f64 {
    if tp + fp == 0 {
        0.0
    } else {
        tp as f64 / (tp + fp) as f64
    }
}

pub fn recall(tp: usize, fn_: usize) -> f64 {
    if tp + fn_ == 0 {
        0.0
    } else {
        tp as f64 / (tp + fn_) as f64
    }
}

/// Harmonic mean of precision and recall; 0 by convention when both vanish.
pub fn f_measure(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

/// Per-frame evaluation record (one CSV row).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameEval {
    pub frame_id: String,
    pub gt_class: GtClass,
    pub verdict: Verdict,
    pub or: Option<f64>,
    pub eps_o: Option<f64>,
    pub class: DetClass,
    pub path: DetectPath,
    pub total_us: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub eps_o: f64,
    pub precision: f64,
    pub recall: f64,
    pub f_measure: f64,
}

/// Aggregate report over a corpus.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalReport {
    /// Effective configuration the run used.
    pub config: Config,
    pub eps_threshold: f64,
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub precision: f64,
    pub recall: f64,
    pub f_measure: f64,
    /// Mean overlap ratio over true positives at the report threshold.
    pub mean_or: f64,
    pub sweep: Vec<SweepRow>,
    pub frames: Vec<FrameEval>,
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// CSV with the fixed column set; reals at 6 decimals, undefined
    /// overlaps as empty fields.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("frame_id,gt_class,verdict,or,eps_o,class,path,total_us\n");
        for f in &self.frames {
            let or = f.or.map(|v| format!("{v:.6}")).unwrap_or_default();
            let eps = f.eps_o.map(|v| format!("{v:.6}")).unwrap_or_default();
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                f.frame_id,
                f.gt_class.as_str(),
                f.verdict.as_str(),
                or,
                eps,
                f.class.as_str(),
                f.path.as_str(),
                f.total_us
            ));
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct EvalOptions {
    /// Overlap-error threshold for the headline counts.
    pub eps_threshold: f64,
    /// Zero out wall-clock fields for byte-stable outputs.
    pub zero_timings: bool,
    /// Detect frames in parallel (per-frame timings get noisier).
    pub parallel: bool,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self { eps_threshold: 0.2, zero_timings: false, parallel: false }
    }
}

/// One frame ready for evaluation. `gt` must already respect the class rule
/// (negative samples carry no usable truth ellipse).
pub struct EvalInput {
    pub id: String,
    pub gt_class: GtClass,
    pub gt: Option<EllipseParams>,
    pub image: GrayImage,
}

pub fn evaluate(inputs: &[EvalInput], cfg: &Config, opts: &EvalOptions) -> Result<EvalReport, EvalError> {
    let run_one = |inp: &EvalInput| -> Result<(FrameEval, DetectionResult), EvalError> {
        let det = detect(&inp.image, cfg).map_err(|e| EvalError::Roi(inp.id.clone(), e))?;
        let canvas = (inp.image.width(), inp.image.height());
        let c = classify(&det, inp.gt.as_ref(), opts.eps_threshold, canvas);
        let record = FrameEval {
            frame_id: inp.id.clone(),
            gt_class: inp.gt_class,
            verdict: det.verdict,
            or: c.or,
            eps_o: c.eps_o,
            class: c.class,
            path: det.path,
            total_us: if opts.zero_timings { 0 } else { det.timings.total() },
        };
        Ok((record, det))
    };
    let results: Result<Vec<_>, EvalError> = if opts.parallel {
        inputs.par_iter().map(run_one).collect()
    } else {
        inputs.iter().map(run_one).collect()
    };
    let frames: Vec<FrameEval> = results?.into_iter().map(|(r, _)| r).collect();
    Ok(build_report(cfg.clone(), opts.eps_threshold, frames))
}

fn build_report(config: Config, eps_threshold: f64, frames: Vec<FrameEval>) -> EvalReport {
    let count = |eps: f64| -> (usize, usize, usize, usize) {
        let mut tp = 0;
        let mut fp = 0;
        let mut tn = 0;
        let mut fn_ = 0;
        for f in &frames {
            match (f.verdict, f.eps_o) {
                (Verdict::Pupil, Some(e)) => {
                    if e <= eps {
                        tp += 1;
                    } else {
                        fp += 1;
                    }
                }
                (Verdict::Pupil, None) => fp += 1,
                (Verdict::NoPupil, _) => {
                    if f.class == DetClass::Tn {
                        tn += 1;
                    } else {
                        fn_ += 1;
                    }
                }
            }
        }
        (tp, fp, tn, fn_)
    };
    let (tp, fp, tn, fn_) = count(eps_threshold);
    let p = precision(tp, fp);
    let r = recall(tp, fn_);
    let tp_ors: Vec<f64> = frames
        .iter()
        .filter(|f| f.class == DetClass::Tp)
        .filter_map(|f| f.or)
        .collect();
    let mean_or = if tp_ors.is_empty() {
        0.0
    } else {
        tp_ors.iter().sum::<f64>() / tp_ors.len() as f64
    };
    let sweep = (0..=20)
        .map(|k| {
            let eps = k as f64 / 100.0;
            let (tp, fp, _, fn_) = count(eps);
            let p = precision(tp, fp);
            let r = recall(tp, fn_);
            SweepRow { eps_o: eps, precision: p, recall: r, f_measure: f_measure(p, r) }
        })
        .collect();
    EvalReport {
        config,
        eps_threshold,
        tp,
        fp,
        tn,
        fn_,
        precision: p,
        recall: r,
        f_measure: f_measure(p, r),
        mean_or,
        sweep,
        frames,
    }
}

/// Render a corpus and evaluate it in one pass. Deterministic for fixed
/// seeds and config (timings aside; see `EvalOptions::zero_timings`).
pub fn run_corpus(
    corpus: &[CorpusFrame],
    cfg: &Config,
    opts: &EvalOptions,
) -> Result<EvalReport, EvalError> {
    let render_one = |f: &CorpusFrame| -> Result<EvalInput, EvalError> {
        let (image, gt) = render(&f.spec).map_err(|e| EvalError::Spec(f.id.clone(), e))?;
        let gt = if f.class == GtClass::Absent { None } else { gt };
        Ok(EvalInput { id: f.id.clone(), gt_class: f.class, gt, image })
    };
    let inputs: Result<Vec<_>, EvalError> = if opts.parallel {
        corpus.par_iter().map(render_one).collect()
    } else {
        corpus.iter().map(render_one).collect()
    };
    evaluate(&inputs?, cfg, opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detector::StageTimings;
    use crate::roi::RoiResult;
    use crate::imaging::Rect;

    fn det(verdict: Verdict, ellipse: Option<EllipseParams>) -> DetectionResult {
        DetectionResult {
            verdict,
            ellipse,
            cost: ellipse.map(|_| 1.0),
            roi: RoiResult { rect: Rect::new(0, 0, 150, 150), aperture: 150, score: 1.0 },
            path: DetectPath::Full,
            timings: StageTimings::default(),
        }
    }

    #[test]
    fn classify_truth_table() {
        let gt = EllipseParams::new(200.0, 200.0, 50.0, 45.0, 0.0);
        let perfect = det(Verdict::Pupil, Some(gt));
        assert_eq!(classify(&perfect, Some(&gt), 0.2, (400, 400)).class, DetClass::Tp);

        // A detection overlapping 75% is a false positive at threshold 0.2.
        let offset = EllipseParams::new(225.0, 200.0, 50.0, 45.0, 0.0);
        let shifted = det(Verdict::Pupil, Some(offset));
        let c = classify(&shifted, Some(&gt), 0.2, (400, 400));
        assert!(c.or.unwrap() < 0.8, "or {:?}", c.or);
        assert_eq!(c.class, DetClass::Fp);

        let missed = det(Verdict::NoPupil, None);
        assert_eq!(classify(&missed, Some(&gt), 0.2, (400, 400)).class, DetClass::Fn);
        assert_eq!(classify(&missed, None, 0.2, (400, 400)).class, DetClass::Tn);
        let phantom = det(Verdict::Pupil, Some(gt));
        assert_eq!(classify(&phantom, None, 0.2, (400, 400)).class, DetClass::Fp);
    }

    #[test]
    fn overlap_error_complementarity_is_exact() {
        let gt = EllipseParams::new(200.0, 200.0, 50.0, 45.0, 0.0);
        let found = EllipseParams::new(210.0, 195.0, 48.0, 46.0, 0.3);
        let d = det(Verdict::Pupil, Some(found));
        let c = classify(&d, Some(&gt), 0.2, (400, 400));
        assert_eq!(c.eps_o.unwrap(), 1.0 - c.or.unwrap());
    }

    #[test]
    fn f_measure_closed_forms() {
        assert_eq!(f_measure(1.0, 1.0), 1.0);
        assert!((f_measure(0.8, 1.0) - 0.888_888_888_9).abs() < 1e-9);
        assert_eq!(f_measure(0.0, 0.0), 0.0);
    }

    #[test]
    fn three_frame_counting() {
        // One clean TP, one blink TN, one forced FN.
        let gt = EllipseParams::new(100.0, 100.0, 30.0, 28.0, 0.0);
        let frames = vec![
            FrameEval {
                frame_id: "tp".into(),
                gt_class: GtClass::Clean,
                verdict: Verdict::Pupil,
                or: Some(0.98),
                eps_o: Some(0.02),
                class: DetClass::Tp,
                path: DetectPath::Fast,
                total_us: 0,
            },
            FrameEval {
                frame_id: "tn".into(),
                gt_class: GtClass::Absent,
                verdict: Verdict::NoPupil,
                or: None,
                eps_o: None,
                class: DetClass::Tn,
                path: DetectPath::Full,
                total_us: 0,
            },
            FrameEval {
                frame_id: "fn".into(),
                gt_class: GtClass::Clean,
                verdict: Verdict::NoPupil,
                or: None,
                eps_o: None,
                class: DetClass::Fn,
                path: DetectPath::Full,
                total_us: 0,
            },
        ];
        let _ = gt;
        let report = build_report(Config::default(), 0.2, frames);
        assert_eq!((report.tp, report.fp, report.tn, report.fn_), (1, 0, 1, 1));
        assert_eq!(report.precision, 1.0);
        assert_eq!(report.recall, 0.5);
        assert!((report.f_measure - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn sweep_is_monotone_in_threshold() {
        let mut frames = Vec::new();
        let mut state = 0xC0FFEEu64;
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        for i in 0..60 {
            let has_gt = next() < 0.7;
            let said_pupil = next() < 0.75;
            let eps = next() * 0.3;
            let class = match (has_gt, said_pupil) {
                (true, true) => {
                    if eps <= 0.2 {
                        DetClass::Tp
                    } else {
                        DetClass::Fp
                    }
                }
                (true, false) => DetClass::Fn,
                (false, false) => DetClass::Tn,
                (false, true) => DetClass::Fp,
            };
            frames.push(FrameEval {
                frame_id: format!("f{i}"),
                gt_class: if has_gt { GtClass::Clean } else { GtClass::Absent },
                verdict: if said_pupil { Verdict::Pupil } else { Verdict::NoPupil },
                or: (has_gt && said_pupil).then(|| 1.0 - eps),
                eps_o: (has_gt && said_pupil).then_some(eps),
                class,
                path: DetectPath::Full,
                total_us: 0,
            });
        }
        let report = build_report(Config::default(), 0.2, frames);
        assert_eq!(report.sweep.len(), 21);
        for pair in report.sweep.windows(2) {
            assert!(
                pair[1].f_measure >= pair[0].f_measure - 1e-12,
                "sweep not monotone: {pair:?}"
            );
        }
    }

    #[test]
    fn classify_partitions_randomized_grids() {
        let gt = EllipseParams::new(64.0, 64.0, 20.0, 18.0, 0.1);
        let near = EllipseParams::new(66.0, 64.0, 20.0, 18.0, 0.1);
        let far = EllipseParams::new(100.0, 100.0, 10.0, 8.0, 0.0);
        for gt_opt in [Some(&gt), None] {
            for found in [None, Some(near), Some(far)] {
                let verdict = if found.is_some() { Verdict::Pupil } else { Verdict::NoPupil };
                let d = det(verdict, found);
                for thr in [0.0, 0.05, 0.1, 0.2] {
                    let c = classify(&d, gt_opt, thr, (128, 128));
                    let count = [DetClass::Tp, DetClass::Fp, DetClass::Tn, DetClass::Fn]
                        .iter()
                        .filter(|&&k| k == c.class)
                        .count();
                    assert_eq!(count, 1);
                }
            }
        }
    }

    #[test]
    fn small_corpus_end_to_end_and_csv_determinism() {
        let corpus = crate::synth::corpus(5, 3, 1, 1);
        let cfg = Config::default();
        let opts = EvalOptions { zero_timings: true, ..EvalOptions::default() };
        let a = run_corpus(&corpus, &cfg, &opts).unwrap();
        let b = run_corpus(&corpus, &cfg, &opts).unwrap();
        assert_eq!(a.to_csv(), b.to_csv());
        assert_eq!(a.to_json(), b.to_json());
        assert_eq!(a.frames.len(), 5);
        assert!(a.tp >= 3, "tp {}", a.tp);
        assert!(a.csv_has_header());
    }

    impl EvalReport {
        fn csv_has_header(&self) -> bool {
            self.to_csv().starts_with("frame_id,gt_class,verdict,or,eps_o,class,path,total_us\n")
        }
    }
}
