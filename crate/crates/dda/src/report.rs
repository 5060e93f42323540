//! JSON shapes emitted by the CLI.
//!
//! JSON has no infinity literal, so PSNR values go through [`inf_f64`], which
//! writes non-finite numbers as the strings `"inf"`, `"-inf"` and `"nan"`.

use dda_core::image::PatchGrid;
use dda_core::pipeline::{Evaluation, FlopsReport};
use dda_core::prior::MoireScore;
use dda_core::router::GroupAssignment;
use dda_core::MetricResult;
use serde::{Deserialize, Serialize};

pub mod inf_f64 {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else if v.is_nan() {
            s.serialize_str("nan")
        } else if *v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Number(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Number(v) => Ok(v),
            Repr::Text(t) => match t.as_str() {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                "nan" => Ok(f64::NAN),
                other => Err(serde::de::Error::custom(format!("expected a number or \"inf\", got {other:?}"))),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScoreRecord {
    pub index: usize,
    pub row: usize,
    pub col: usize,
    pub colorfulness: f64,
    pub frequency_mean: f64,
    pub score: f64,
}

impl ScoreRecord {
    pub fn from_grid(grid: &PatchGrid, scores: &[MoireScore]) -> Vec<Self> {
        grid.tiles()
            .iter()
            .zip(scores)
            .enumerate()
            .map(|(index, (t, s))| Self {
                index,
                row: t.row,
                col: t.col,
                colorfulness: s.colorfulness,
                frequency_mean: s.frequency_mean,
                score: s.score,
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RouteRecord {
    pub patch_index: usize,
    pub row: usize,
    pub col: usize,
    pub score: f64,
    pub rank: usize,
    pub group: usize,
    pub width: f64,
}

impl RouteRecord {
    pub fn from_assignment(grid: &PatchGrid, scores: &[MoireScore], assignment: &GroupAssignment) -> Vec<Self> {
        grid.tiles()
            .iter()
            .enumerate()
            .map(|(i, t)| Self {
                patch_index: i,
                row: t.row,
                col: t.col,
                score: scores[i].score,
                rank: assignment.rank_of()[i],
                group: assignment.group_of()[i],
                width: assignment.width_of(i),
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricsJson {
    #[serde(with = "inf_f64")]
    pub psnr_db: f64,
    pub ssim: f64,
    pub delta_e: f64,
}

impl From<MetricResult> for MetricsJson {
    fn from(m: MetricResult) -> Self {
        Self {
            psnr_db: m.psnr_db,
            ssim: m.ssim,
            delta_e: m.delta_e,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalImage {
    pub file: String,
    #[serde(with = "inf_f64")]
    pub psnr_db: f64,
    pub ssim: f64,
    pub delta_e: f64,
    pub flops_dda: u64,
    pub flops_baseline: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalSummary {
    #[serde(with = "inf_f64")]
    pub mean_psnr_db: f64,
    pub mean_ssim: f64,
    pub mean_delta_e: f64,
    pub reduction_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalReport {
    pub per_image: Vec<EvalImage>,
    pub summary: EvalSummary,
}

impl EvalReport {
    /// `files` names the pairs in evaluation order.
    pub fn new(files: &[String], eval: &Evaluation) -> Self {
        let per_image = files
            .iter()
            .zip(&eval.per_image)
            .map(|(file, p)| EvalImage {
                file: file.clone(),
                psnr_db: p.metrics.psnr_db,
                ssim: p.metrics.ssim,
                delta_e: p.metrics.delta_e,
                flops_dda: p.flops_dda,
                flops_baseline: p.flops_baseline,
            })
            .collect();
        let s = &eval.summary;
        Self {
            per_image,
            summary: EvalSummary {
                mean_psnr_db: s.mean_psnr_db,
                mean_ssim: s.mean_ssim,
                mean_delta_e: s.mean_delta_e,
                reduction_fraction: s.reduction_fraction,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Timing {
    pub median_s: f64,
    pub min_s: f64,
}

impl Timing {
    /// Median (mean of the middle two for even counts) and minimum.
    pub fn from_samples(samples: &[f64]) -> Self {
        assert!(!samples.is_empty());
        let mut s = samples.to_vec();
        s.sort_by(f64::total_cmp);
        let n = s.len();
        let median_s = if n % 2 == 1 { s[n / 2] } else { 0.5 * (s[n / 2 - 1] + s[n / 2]) };
        Self { median_s, min_s: s[0] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchReport {
    pub repetitions: usize,
    pub full: Timing,
    pub dda: Timing,
    pub flops_full: FlopsReport,
    pub flops_dda: FlopsReport,
}
