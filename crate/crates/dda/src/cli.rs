//! The `dda` command line.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, ensure, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use dda_core::image::{quantize_u8, split, PatchGrid};
use dda_core::metrics::evaluate_pair;
use dda_core::pipeline::{demoire_dda, demoire_full, evaluate, route, DdaConfig, GroupingPolicy};
use dda_core::prior::{score_grid, MoireScore, PriorConfig};
use dda_core::router::Thresholds;
use dda_core::train::{train_supernet, ThresholdSource, TrainConfig};
use dda_core::{SupernetSpec, WidthList};
use serde::Serialize;

use crate::dataset::{gen_dataset, load_dataset};
use crate::exec::Rayon;
use crate::pngio::{load_png, save_gray, save_png};
use crate::report::{BenchReport, EvalReport, MetricsJson, RouteRecord, ScoreRecord, Timing};
use crate::weights_file::{load_weights, save_weights};

#[derive(Debug, Parser)]
#[command(name = "dda", version, about = "Dynamic demoireing acceleration toolchain")]
pub struct Cli {
    /// Worker threads (defaults to one per core).
    #[arg(long, global = true, env = "DDA_THREADS")]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Per-patch moiré scores as JSON, optionally with a heatmap PNG.
    Score {
        image: PathBuf,
        #[command(flatten)]
        patch: PatchArgs,
        /// Grayscale heatmap of normalized scores, image-sized.
        #[arg(long)]
        heatmap: Option<PathBuf>,
    },
    /// Per-patch group and width assignment as JSON.
    Route {
        image: PathBuf,
        #[command(flatten)]
        routing: RoutingArgs,
    },
    /// Train a supernet from a dataset manifest.
    Train {
        #[arg(long)]
        manifest: PathBuf,
        /// Output weights file.
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        widths: WidthArgs,
        #[command(flatten)]
        net: NetArgs,
        #[arg(long, default_value_t = 10)]
        epochs: usize,
        #[arg(long, default_value_t = 8)]
        batch_size: usize,
        #[arg(long, default_value_t = 1e-3)]
        lr: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Fixed score cutpoints for grouping pairs; quantiles of the
        /// training scores when omitted.
        #[arg(long, value_delimiter = ',')]
        thresholds: Vec<f64>,
        /// JSON-lines training log; stdout when omitted.
        #[arg(long)]
        log: Option<PathBuf>,
        /// Write the grouping cutpoints as JSON.
        #[arg(long)]
        thresholds_out: Option<PathBuf>,
    },
    /// Restore an image and report its compute as JSON.
    Infer {
        image: PathBuf,
        #[arg(long)]
        weights: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        routing: RoutingArgs,
        /// Run every patch at full width.
        #[arg(long)]
        full: bool,
    },
    /// Time the full-width and routed paths.
    Bench {
        image: PathBuf,
        #[arg(long)]
        weights: PathBuf,
        #[command(flatten)]
        routing: RoutingArgs,
        #[arg(long, default_value_t = 5, value_parser = clap::value_parser!(u32).range(1..))]
        repetitions: u32,
    },
    /// PSNR, SSIM and mean CIEDE2000 between two images.
    Metrics { a: PathBuf, b: PathBuf },
    /// Generate a synthetic pair dataset.
    Gen {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 64)]
        height: usize,
        #[arg(long, default_value_t = 64)]
        width: usize,
    },
    /// Evaluate the routed pipeline on a dataset manifest.
    Eval {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        weights: PathBuf,
        #[command(flatten)]
        routing: RoutingArgs,
    },
}

#[derive(Debug, Clone, Args)]
pub struct PatchArgs {
    #[arg(long, default_value_t = 512)]
    pub patch_height: usize,
    #[arg(long, default_value_t = 512)]
    pub patch_width: usize,
    /// Gaussian sigma of the high-pass filter.
    #[arg(long, default_value_t = 5.0)]
    pub sigma: f64,
}

impl PatchArgs {
    fn prior(&self) -> Result<PriorConfig> {
        Ok(PriorConfig::new(self.sigma)?)
    }

    fn check(&self) -> Result<()> {
        ensure!(self.patch_height > 0 && self.patch_width > 0, "patch dimensions must be positive");
        Ok(())
    }
}

#[derive(Debug, Clone, Args)]
pub struct WidthArgs {
    #[arg(long, value_delimiter = ',', default_value = "0.25,0.5,0.75")]
    pub widths: Vec<f64>,
    /// Number of complexity groups; must equal the number of widths.
    #[arg(long, default_value_t = 3)]
    pub groups: usize,
}

impl WidthArgs {
    fn width_list(&self) -> Result<WidthList> {
        ensure!(
            self.groups == self.widths.len(),
            "--groups {} does not match {} widths",
            self.groups,
            self.widths.len()
        );
        Ok(WidthList::new(self.widths.clone())?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Policy {
    /// Equal-count split of each image's score ranks.
    PerImage,
    /// Fixed score cutpoints from --thresholds.
    Threshold,
}

#[derive(Debug, Clone, Args)]
pub struct RoutingArgs {
    #[command(flatten)]
    pub patch: PatchArgs,
    #[command(flatten)]
    pub widths: WidthArgs,
    #[arg(long, value_enum, default_value_t = Policy::PerImage)]
    pub policy: Policy,
    /// Score cutpoints for the threshold policy, one fewer than groups.
    #[arg(long, value_delimiter = ',')]
    pub thresholds: Vec<f64>,
}

impl RoutingArgs {
    pub fn config(&self) -> Result<DdaConfig> {
        self.patch.check()?;
        let widths = self.widths.width_list()?;
        let policy = match self.policy {
            Policy::PerImage => {
                ensure!(self.thresholds.is_empty(), "--thresholds requires --policy threshold");
                GroupingPolicy::PerImage
            }
            Policy::Threshold => {
                let t = Thresholds::new(self.thresholds.clone())?;
                ensure!(
                    t.num_groups() == widths.len(),
                    "{} cutpoints make {} groups but there are {} widths",
                    t.cutpoints().len(),
                    t.num_groups(),
                    widths.len()
                );
                GroupingPolicy::Threshold(t)
            }
        };
        Ok(DdaConfig {
            widths,
            patch_height: self.patch.patch_height,
            patch_width: self.patch.patch_width,
            prior: self.patch.prior()?,
            policy,
        })
    }
}

#[derive(Debug, Clone, Args)]
pub struct NetArgs {
    #[arg(long, default_value_t = 6)]
    pub layers: usize,
    /// Full-width hidden channels.
    #[arg(long, default_value_t = 32)]
    pub channels: usize,
    #[arg(long, default_value_t = 3)]
    pub kernel_size: usize,
    /// Drop the input-to-output skip connection.
    #[arg(long)]
    pub no_residual: bool,
}

impl NetArgs {
    fn spec(&self) -> Result<SupernetSpec> {
        Ok(SupernetSpec::new(self.layers, self.channels, self.kernel_size, !self.no_residual)?)
    }
}

/// Scores normalized by their maximum, painted over each tile. All black
/// when every score is zero.
pub fn heatmap(grid: &PatchGrid, scores: &[MoireScore]) -> Vec<u8> {
    let max = scores.iter().map(|s| s.score).fold(0.0f64, f64::max);
    let w = grid.image_width();
    let mut pixels = vec![0u8; grid.image_height() * w];
    if max > 0.0 && max.is_finite() {
        for (t, s) in grid.tiles().iter().zip(scores) {
            let v = quantize_u8(s.score / max);
            for r in t.row..t.row + t.height {
                pixels[r * w + t.col..r * w + t.col + t.width].fill(v);
            }
        }
    }
    pixels
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    let mut out = std::io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}

fn load_image(path: &Path) -> Result<dda_core::Image> {
    let img = load_png(path)?;
    ensure!(!img.is_empty(), "{}: image is empty", path.display());
    Ok(img)
}

#[derive(Serialize)]
struct GenSummary<'a> {
    manifest: &'a Path,
    pairs: usize,
}

#[derive(Serialize)]
struct CutpointsJson<'a> {
    cutpoints: &'a [f64],
}

pub fn run(cli: Cli) -> Result<()> {
    if cli.threads == Some(0) {
        bail!("--threads must be at least 1");
    }
    let exec = Rayon::new(cli.threads).context("building the thread pool")?;
    match cli.command {
        Command::Score { image, patch, heatmap: heatmap_path } => {
            patch.check()?;
            let prior = patch.prior()?;
            let img = load_image(&image)?;
            let grid = split(&img, patch.patch_height, patch.patch_width)?;
            let scores = score_grid(&img, &grid, &prior)?;
            if let Some(path) = heatmap_path {
                save_gray(&path, img.height(), img.width(), &heatmap(&grid, &scores))?;
            }
            print_json(&ScoreRecord::from_grid(&grid, &scores))
        }
        Command::Route { image, routing } => {
            let cfg = routing.config()?;
            let img = load_image(&image)?;
            let (grid, scores, assignment) = route(&img, &cfg, &exec)?;
            print_json(&RouteRecord::from_assignment(&grid, &scores, &assignment))
        }
        Command::Train {
            manifest,
            out,
            widths,
            net,
            epochs,
            batch_size,
            lr,
            seed,
            thresholds,
            log,
            thresholds_out,
        } => {
            let widths = widths.width_list()?;
            let spec = net.spec()?;
            ensure!(batch_size > 0, "--batch-size must be at least 1");
            ensure!(lr.is_finite() && lr >= 0.0, "--lr must be finite and non-negative");
            let source = if thresholds.is_empty() {
                ThresholdSource::Quantiles
            } else {
                let t = Thresholds::new(thresholds)?;
                ensure!(
                    t.num_groups() == widths.len(),
                    "{} cutpoints make {} groups but there are {} widths",
                    t.cutpoints().len(),
                    t.num_groups(),
                    widths.len()
                );
                ThresholdSource::Fixed(t)
            };
            let data = load_dataset(&manifest, &exec)?;
            let cfg = TrainConfig {
                widths,
                epochs,
                batch_size,
                learning_rate: lr,
                seed,
                thresholds: source,
            };
            let mut sink: Box<dyn Write> = match &log {
                Some(p) => Box::new(std::io::BufWriter::new(
                    std::fs::File::create(p).with_context(|| format!("{}", p.display()))?,
                )),
                None => Box::new(std::io::stdout().lock()),
            };
            let mut write_err = None;
            let outcome = train_supernet(&data.pairs, spec, &cfg, &exec, |entry| {
                log::info!("epoch {} width {} loss {:.6}", entry.epoch, entry.width, entry.mean_loss);
                if write_err.is_none() {
                    let line = serde_json::to_string(entry).expect("log entry serializes");
                    if let Err(e) = writeln!(sink, "{line}") {
                        write_err = Some(e);
                    }
                }
            })?;
            if let Some(e) = write_err {
                return Err(e).context("writing the training log");
            }
            sink.flush()?;
            for g in &outcome.skipped_groups {
                log::warn!("group {g} has no training pairs; width {} was not trained", cfg.widths.as_slice()[*g]);
            }
            log::info!("grouping cutpoints {:?}", outcome.thresholds.cutpoints());
            if let Some(p) = thresholds_out {
                let text = serde_json::to_string(&CutpointsJson {
                    cutpoints: outcome.thresholds.cutpoints(),
                })?;
                std::fs::write(&p, text + "\n").with_context(|| format!("{}", p.display()))?;
            }
            save_weights(&out, &outcome.weights)?;
            Ok(())
        }
        Command::Infer {
            image,
            weights,
            out,
            routing,
            full,
        } => {
            let cfg = routing.config()?;
            let weights = load_weights(&weights)?;
            let img = load_image(&image)?;
            let (restored, report) = if full {
                demoire_full(&img, &weights, cfg.patch_height, cfg.patch_width, &exec)?
            } else {
                let o = demoire_dda(&img, &weights, &cfg, &exec)?;
                (o.image, o.report)
            };
            save_png(&out, &restored)?;
            print_json(&report)
        }
        Command::Bench {
            image,
            weights,
            routing,
            repetitions,
        } => {
            let cfg = routing.config()?;
            let weights = load_weights(&weights)?;
            let img = load_image(&image)?;
            let reps = repetitions as usize;
            let (mut full_t, mut dda_t) = (Vec::with_capacity(reps), Vec::with_capacity(reps));
            let (mut flops_full, mut flops_dda) = (None, None);
            for _ in 0..reps {
                let start = Instant::now();
                let (_, report) = demoire_full(&img, &weights, cfg.patch_height, cfg.patch_width, &exec)?;
                full_t.push(start.elapsed().as_secs_f64());
                flops_full = Some(report);
                let start = Instant::now();
                let o = demoire_dda(&img, &weights, &cfg, &exec)?;
                dda_t.push(start.elapsed().as_secs_f64());
                flops_dda = Some(o.report);
            }
            print_json(&BenchReport {
                repetitions: reps,
                full: Timing::from_samples(&full_t),
                dda: Timing::from_samples(&dda_t),
                flops_full: flops_full.expect("at least one repetition"),
                flops_dda: flops_dda.expect("at least one repetition"),
            })
        }
        Command::Metrics { a, b } => {
            let (x, y) = (load_image(&a)?, load_image(&b)?);
            ensure!(
                x.same_dims(&y),
                "image sizes differ: {}x{} vs {}x{}",
                x.height(),
                x.width(),
                y.height(),
                y.width()
            );
            print_json(&MetricsJson::from(evaluate_pair(&x, &y)?))
        }
        Command::Gen {
            n,
            seed,
            out,
            height,
            width,
        } => {
            ensure!(n > 0, "--n must be at least 1");
            ensure!(height > 0 && width > 0, "image dimensions must be positive");
            let entries = gen_dataset(n, seed, height, width, &out, &exec)?;
            print_json(&GenSummary {
                manifest: &out.join(crate::dataset::MANIFEST_NAME),
                pairs: entries.len(),
            })
        }
        Command::Eval {
            manifest,
            weights,
            routing,
        } => {
            let cfg = routing.config()?;
            let weights = load_weights(&weights)?;
            let data = load_dataset(&manifest, &exec)?;
            let eval = evaluate(&data.image_pairs(), &weights, &cfg, &exec)?;
            let files: Vec<String> = data.entries.iter().map(|e| e.moire_path.clone()).collect();
            print_json(&EvalReport::new(&files, &eval))
        }
    }
}
