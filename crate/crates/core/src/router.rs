//! Score-ordered grouping of patches.
//!
//! At inference, patches of one image are sorted by ascending score and cut
//! into `M` consecutive blocks of `ceil(N / M)` ranks; block `g` runs at
//! `widths[g]`. At training time a dataset-wide quantile split is used
//! instead so that each width sees a stable complexity class.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::nn::WidthList;

#[derive(Debug, Clone, PartialEq)]
pub struct GroupAssignment {
    num_groups: usize,
    group_of: Vec<usize>,
    widths: Vec<f64>,
    rank_of: Vec<usize>,
}

impl GroupAssignment {
    pub fn num_groups(&self) -> usize {
        self.num_groups
    }

    pub fn num_patches(&self) -> usize {
        self.group_of.len()
    }

    pub fn group_of(&self) -> &[usize] {
        &self.group_of
    }

    pub fn rank_of(&self) -> &[usize] {
        &self.rank_of
    }

    pub fn widths(&self) -> &[f64] {
        &self.widths
    }

    pub fn width_of(&self, patch: usize) -> f64 {
        self.widths[self.group_of[patch]]
    }

    pub fn group_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.num_groups];
        for &g in &self.group_of {
            sizes[g] += 1;
        }
        sizes
    }

    /// Patch indices of each group, ascending within a group.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut members = vec![Vec::new(); self.num_groups];
        for (patch, &g) in self.group_of.iter().enumerate() {
            members[g].push(patch);
        }
        members
    }
}

fn check_scores(scores: &[f64]) -> Result<()> {
    if scores.is_empty() {
        return Err(Error::EmptyScores);
    }
    if let Some(&bad) = scores.iter().find(|s| !s.is_finite()) {
        return Err(Error::NonFiniteScore(bad));
    }
    Ok(())
}

/// Ascending-score ranks, ties broken by ascending patch index.
pub fn ranks(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]).then(a.cmp(&b)));
    let mut rank_of = vec![0; scores.len()];
    for (rank, &patch) in order.iter().enumerate() {
        rank_of[patch] = rank;
    }
    rank_of
}

/// Equal-count rank split: group `g` holds ranks `g*ceil(N/M) .. (g+1)*ceil(N/M)`,
/// the last group takes whatever remains and trailing groups may be empty.
pub fn assign_groups(scores: &[f64], widths: &WidthList) -> Result<GroupAssignment> {
    check_scores(scores)?;
    let m = widths.len();
    let per_group = scores.len().div_ceil(m);
    let rank_of = ranks(scores);
    let group_of = rank_of.iter().map(|&r| (r / per_group).min(m - 1)).collect();
    Ok(GroupAssignment {
        num_groups: m,
        group_of,
        widths: widths.as_slice().to_vec(),
        rank_of,
    })
}

/// Fixed score cutpoints, ascending. Group `g` holds scores in
/// `(cutpoints[g-1], cutpoints[g]]`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Thresholds {
    cutpoints: Vec<f64>,
}

impl Thresholds {
    pub fn new(mut cutpoints: Vec<f64>) -> Result<Self> {
        if let Some(&bad) = cutpoints.iter().find(|s| !s.is_finite()) {
            return Err(Error::NonFiniteScore(bad));
        }
        cutpoints.sort_by(f64::total_cmp);
        Ok(Self { cutpoints })
    }

    pub fn cutpoints(&self) -> &[f64] {
        &self.cutpoints
    }

    pub fn num_groups(&self) -> usize {
        self.cutpoints.len() + 1
    }
}

/// Linear-interpolation empirical quantile of sorted data.
fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = crate::math::floor(pos) as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    let frac = pos - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

/// Cutpoints at the `k/M` quantiles, `k = 1..M`.
pub fn dataset_thresholds(scores: &[f64], num_groups: usize) -> Result<Thresholds> {
    if scores.len() < num_groups.max(1) {
        return Err(Error::TooFewScores {
            needed: num_groups.max(1),
            got: scores.len(),
        });
    }
    check_scores(scores)?;
    let mut sorted = scores.to_vec();
    sorted.sort_by(f64::total_cmp);
    let cutpoints = (1..num_groups)
        .map(|k| quantile_sorted(&sorted, k as f64 / num_groups as f64))
        .collect();
    Ok(Thresholds { cutpoints })
}

/// Smallest `g` with `score <= cutpoints[g]`, else the last group.
pub fn classify_by_threshold(score: f64, thresholds: &Thresholds) -> usize {
    thresholds
        .cutpoints
        .iter()
        .position(|&cut| score <= cut)
        .unwrap_or(thresholds.cutpoints.len())
}

/// Routes each patch through fixed thresholds instead of per-image ranks.
pub fn assign_by_thresholds(
    scores: &[f64],
    thresholds: &Thresholds,
    widths: &WidthList,
) -> Result<GroupAssignment> {
    check_scores(scores)?;
    if thresholds.num_groups() != widths.len() {
        return Err(Error::ThresholdCount {
            cutpoints: thresholds.cutpoints.len(),
            groups: widths.len(),
        });
    }
    Ok(GroupAssignment {
        num_groups: widths.len(),
        group_of: scores
            .iter()
            .map(|&s| classify_by_threshold(s, thresholds))
            .collect(),
        widths: widths.as_slice().to_vec(),
        rank_of: ranks(scores),
    })
}
