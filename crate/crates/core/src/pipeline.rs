//! Score, route, restore per group, concatenate.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::exec::Executor;
use crate::image::{concat, extract, split, Image, PatchGrid};
use crate::metrics::{self, MetricResult};
use crate::nn::{flops, SubnetView, SupernetWeights, WidthList};
use crate::prior::{moire_score, MoireScore, PriorConfig};
use crate::router::{assign_by_thresholds, assign_groups, GroupAssignment, Thresholds};

/// How patches of one image are mapped to groups.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum GroupingPolicy {
    /// Equal-count split of the image's own ascending score ranks.
    #[default]
    PerImage,
    /// Fixed dataset-level score cutpoints.
    Threshold(Thresholds),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DdaConfig {
    pub widths: WidthList,
    pub patch_height: usize,
    pub patch_width: usize,
    pub prior: PriorConfig,
    pub policy: GroupingPolicy,
}

impl Default for DdaConfig {
    fn default() -> Self {
        Self {
            widths: WidthList::default(),
            patch_height: 512,
            patch_width: 512,
            prior: PriorConfig::default(),
            policy: GroupingPolicy::PerImage,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GroupFlops {
    pub group: usize,
    pub width: f64,
    pub patches: usize,
    pub flops: u64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FlopsReport {
    pub per_group: Vec<GroupFlops>,
    pub total_dda: u64,
    pub total_baseline: u64,
    pub reduction_fraction: f64,
}

impl FlopsReport {
    fn finish(per_group: Vec<GroupFlops>, total_baseline: u64) -> Self {
        let total_dda = per_group.iter().map(|g| g.flops).sum();
        let reduction_fraction = if total_baseline == 0 {
            0.0
        } else {
            1.0 - total_dda as f64 / total_baseline as f64
        };
        Self {
            per_group,
            total_dda,
            total_baseline,
            reduction_fraction,
        }
    }

    /// Compute of `assignment` over `grid`, remainder tiles at their true size.
    pub fn for_assignment(weights: &SupernetWeights, grid: &PatchGrid, assignment: &GroupAssignment) -> Self {
        let spec = weights.spec();
        let mut per_group: Vec<GroupFlops> = assignment
            .widths()
            .iter()
            .enumerate()
            .map(|(group, &width)| GroupFlops {
                group,
                width,
                patches: 0,
                flops: 0,
            })
            .collect();
        let mut baseline = 0;
        for (tile, &g) in grid.tiles().iter().zip(assignment.group_of()) {
            let entry = &mut per_group[g];
            entry.patches += 1;
            entry.flops += flops(spec, entry.width, tile.height, tile.width);
            baseline += flops(spec, 1.0, tile.height, tile.width);
        }
        Self::finish(per_group, baseline)
    }

    /// Sums reports group by group. All reports must share a group count.
    pub fn merge<'a>(reports: impl IntoIterator<Item = &'a FlopsReport>) -> Option<Self> {
        let mut iter = reports.into_iter();
        let first = iter.next()?.clone();
        let mut per_group = first.per_group;
        let mut baseline = first.total_baseline;
        for r in iter {
            if r.per_group.len() != per_group.len() {
                return None;
            }
            for (acc, g) in per_group.iter_mut().zip(&r.per_group) {
                acc.patches += g.patches;
                acc.flops += g.flops;
            }
            baseline += r.total_baseline;
        }
        Some(Self::finish(per_group, baseline))
    }
}

#[derive(Debug, Clone)]
pub struct DdaOutput {
    pub image: Image,
    pub report: FlopsReport,
    pub assignment: GroupAssignment,
    pub grid: PatchGrid,
    pub scores: Vec<MoireScore>,
}

/// Scores every tile and routes it according to `cfg`.
pub fn route<E: Executor>(image: &Image, cfg: &DdaConfig, exec: &E) -> Result<(PatchGrid, Vec<MoireScore>, GroupAssignment)> {
    let grid = split(image, cfg.patch_height, cfg.patch_width)?;
    let scores = exec
        .map(grid.len(), |i| moire_score(&extract(image, &grid, i)?, &cfg.prior))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let raw: Vec<f64> = scores.iter().map(|s| s.score).collect();
    let assignment = match &cfg.policy {
        GroupingPolicy::PerImage => assign_groups(&raw, &cfg.widths)?,
        GroupingPolicy::Threshold(t) => assign_by_thresholds(&raw, t, &cfg.widths)?,
    };
    Ok((grid, scores, assignment))
}

/// Runs each tile once through the subnet of its group. Jobs are issued
/// group-major, then by patch index.
fn restore_tiles<E: Executor>(
    image: &Image,
    grid: &PatchGrid,
    views: &[SubnetView<'_>],
    group_of: &[usize],
    exec: &E,
) -> Result<Image> {
    let mut order: Vec<usize> = (0..grid.len()).collect();
    order.sort_by_key(|&i| (group_of[i], i));
    let outputs = exec.map(order.len(), |j| {
        let patch = order[j];
        let tile = extract(image, grid, patch)?;
        Ok(views[group_of[patch]].forward(&tile))
    });
    let mut restored: Vec<Option<Image>> = vec![None; grid.len()];
    for (&patch, out) in order.iter().zip(outputs) {
        restored[patch] = Some(out?);
    }
    let restored: Vec<Image> = restored
        .into_iter()
        .map(|p| p.expect("every tile restored exactly once"))
        .collect();
    concat(grid, &restored)
}

/// Baseline: every tile at full width.
pub fn demoire_full<E: Executor>(
    image: &Image,
    weights: &SupernetWeights,
    patch_height: usize,
    patch_width: usize,
    exec: &E,
) -> Result<(Image, FlopsReport)> {
    let grid = split(image, patch_height, patch_width)?;
    let view = weights.slice(1.0)?;
    let group_of = vec![0; grid.len()];
    let out = restore_tiles(image, &grid, core::slice::from_ref(&view), &group_of, exec)?;
    let spec = weights.spec();
    let total: u64 = grid
        .tiles()
        .iter()
        .map(|t| flops(spec, 1.0, t.height, t.width))
        .sum();
    let report = FlopsReport::finish(
        vec![GroupFlops {
            group: 0,
            width: 1.0,
            patches: grid.len(),
            flops: total,
        }],
        total,
    );
    Ok((out, report))
}

pub fn demoire_dda<E: Executor>(
    image: &Image,
    weights: &SupernetWeights,
    cfg: &DdaConfig,
    exec: &E,
) -> Result<DdaOutput> {
    let (grid, scores, assignment) = route(image, cfg, exec)?;
    let views = cfg
        .widths
        .as_slice()
        .iter()
        .map(|&w| weights.slice(w))
        .collect::<Result<Vec<_>>>()?;
    let out = restore_tiles(image, &grid, &views, assignment.group_of(), exec)?;
    let report = FlopsReport::for_assignment(weights, &grid, &assignment);
    Ok(DdaOutput {
        image: out,
        report,
        assignment,
        grid,
        scores,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairEvaluation {
    pub metrics: MetricResult,
    /// PSNR of the untouched moiré input against the clean reference.
    pub input_psnr_db: f64,
    pub flops_dda: u64,
    pub flops_baseline: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationSummary {
    pub mean_psnr_db: f64,
    pub mean_input_psnr_db: f64,
    pub mean_ssim: f64,
    pub mean_delta_e: f64,
    pub reduction_fraction: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub per_image: Vec<PairEvaluation>,
    pub summary: EvaluationSummary,
    pub flops: FlopsReport,
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    sum / n as f64
}

/// Restores every `(moire, clean)` pair through the routed pipeline and
/// scores it against the clean reference. A mean containing an infinite
/// PSNR is infinite.
pub fn evaluate<E: Executor>(
    pairs: &[(Image, Image)],
    weights: &SupernetWeights,
    cfg: &DdaConfig,
    exec: &E,
) -> Result<Evaluation> {
    if pairs.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut per_image = Vec::with_capacity(pairs.len());
    let mut reports = Vec::with_capacity(pairs.len());
    for (moire, clean) in pairs {
        moire.check_same_dims(clean)?;
        let out = demoire_dda(moire, weights, cfg, exec)?;
        per_image.push(PairEvaluation {
            metrics: metrics::evaluate_pair(&out.image, clean)?,
            input_psnr_db: metrics::psnr(moire, clean)?,
            flops_dda: out.report.total_dda,
            flops_baseline: out.report.total_baseline,
        });
        reports.push(out.report);
    }
    let flops = FlopsReport::merge(&reports).expect("all reports share the width list");
    let summary = EvaluationSummary {
        mean_psnr_db: mean(per_image.iter().map(|p| p.metrics.psnr_db)),
        mean_input_psnr_db: mean(per_image.iter().map(|p| p.input_psnr_db)),
        mean_ssim: mean(per_image.iter().map(|p| p.metrics.ssim)),
        mean_delta_e: mean(per_image.iter().map(|p| p.metrics.delta_e)),
        reduction_fraction: flops.reduction_fraction,
    };
    Ok(Evaluation {
        per_image,
        summary,
        flops,
    })
}
