//! `chmkit`: batch front end for chmkit-core.
//!
//! Exit codes: 0 success, 1 input or usage error, 2 internal error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use chmkit_core::dataset::{
    export_tiles, from_pseudo_depth, select_image, to_pseudo_depth_counted, SelectionCriteria,
};
use chmkit_core::geo::{resample_max, resample_mean};
use chmkit_core::ground_filter::{csf_classify, split_by_class};
use chmkit_core::ingest::{
    class, read_image_meta_table, read_point_file, read_raster_file, read_rgb_file,
    remove_outliers, write_point_file, write_raster_file, PointCloud, PointRecord,
};
use chmkit_core::metrics::{chm_histogram, compose_report, composition_analysis};
use chmkit_core::pipeline::{
    mask_clouds, mask_structures, point_grid, run_pipeline, to_output_grid, PipelineConfig,
    Settings,
};
use chmkit_core::surface::{chm_from_products, fill_gaps_spline, rasterize_surfaces_with};
use chmkit_core::{Crs, Error, GridGeometry, Hemisphere, Raster};

#[derive(Parser)]
#[command(name = "chmkit", version, about = "Canopy height model toolkit")]
struct Cli {
    /// TOML config; its parameter sections supply defaults for every step.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// CRS of inputs that carry none, e.g. utm:33N or EPSG:32633.
    #[arg(long, global = true)]
    crs: Option<Crs>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum Canopy {
    /// DSM from ground and vegetation classes (3-5).
    Vegetation,
    /// DSM from every point.
    All,
}

#[derive(Clone, Copy, ValueEnum)]
enum Stat {
    Max,
    Mean,
}

#[derive(Subcommand)]
enum Cmd {
    /// Pick the acquisition to use from an image metadata table.
    SelectImage {
        table: PathBuf,
        #[arg(long)]
        year: i32,
        /// Only consider records from this hemisphere.
        #[arg(long)]
        hemisphere: Option<Hemisphere>,
    },
    /// Convert a LAS or text point cloud to text.
    Ingest {
        input: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Statistical outlier removal.
    Denoise {
        input: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        sigma_mult: Option<f64>,
    },
    /// Cloth simulation ground filter; writes class 2 for ground, 1 otherwise.
    Csf {
        input: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Grid a classified cloud into a gap-filled DEM and a DSM.
    Rasterize {
        input: PathBuf,
        #[arg(long)]
        dem: PathBuf,
        #[arg(long)]
        dsm: PathBuf,
        #[arg(long)]
        pixel_size: Option<f64>,
        #[arg(long, value_enum, default_value = "vegetation")]
        canopy: Canopy,
    },
    /// Fill nodata cells of a raster by cubic spline interpolation.
    Gapfill {
        input: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// CHM = max(DSM - DEM, 0), resampling to the coarser grid if needed.
    Chm {
        #[arg(long)]
        dsm: PathBuf,
        #[arg(long)]
        dem: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Remove structures (RGB vegetation mask) and/or cloudy cells.
    Mask {
        input: PathBuf,
        #[arg(long)]
        rgb: Option<PathBuf>,
        #[arg(long)]
        cloud_mask: Option<PathBuf>,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Put a raster on the UTM output grid (pass-through when already there).
    Reproject {
        input: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        #[arg(long)]
        pixel_size: Option<f64>,
    },
    /// Aggregate a raster to a coarser pixel size in its own CRS.
    Resample {
        input: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        #[arg(long)]
        pixel_size: f64,
        #[arg(long, value_enum, default_value = "max")]
        stat: Stat,
    },
    /// CHM to pseudo-depth, or back with --invert.
    Pseudodepth {
        input: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        #[arg(long)]
        invert: bool,
        #[arg(long)]
        h_max: Option<f64>,
    },
    /// Cut aligned RGB and label rasters into training tiles.
    Tile {
        #[arg(long)]
        rgb: PathBuf,
        #[arg(long)]
        label: PathBuf,
        #[arg(short, long)]
        out_dir: PathBuf,
        #[arg(long)]
        tile_size: Option<usize>,
        #[arg(long)]
        max_nodata_fraction: Option<f64>,
        /// Convert the CHM label to pseudo-depth before tiling.
        #[arg(long)]
        pseudo_depth: bool,
    },
    /// Compare an estimated CHM with a reference CHM.
    Eval {
        estimate: PathBuf,
        reference: PathBuf,
        #[arg(long)]
        json: bool,
        /// Also write the error histogram as CSV.
        #[arg(long)]
        histogram: Option<PathBuf>,
    },
    /// Height histogram of a CHM and optional land-cover composition.
    Report {
        chm: PathBuf,
        #[arg(long)]
        landcover: Option<PathBuf>,
        /// Cells to analyse for composition (default: CHM cells > 0).
        #[arg(long)]
        mask: Option<PathBuf>,
        #[arg(long)]
        bin_width: Option<f64>,
    },
    /// Run the full pipeline described by a config file.
    Run {
        /// Config file (alternatively the global --config).
        #[arg(value_name = "CONFIG")]
        file: Option<PathBuf>,
    },
}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    Error::InvalidInput(msg.into()).into()
}

struct Ctx {
    settings: Settings,
    crs: Option<Crs>,
}

impl Ctx {
    fn point_crs(&self) -> Result<Crs> {
        self.crs
            .ok_or_else(|| usage("point cloud inputs need --crs or crs in the config"))
    }

    fn read_cloud(&self, path: &Path) -> Result<PointCloud> {
        read_point_file(path, self.point_crs()?).with_context(|| format!("reading {}", path.display()))
    }

    fn read_raster(&self, path: &Path) -> Result<Raster> {
        read_raster_file(path, self.crs).with_context(|| format!("reading {}", path.display()))
    }
}

fn write_raster(path: &Path, r: &Raster) -> Result<()> {
    write_raster_file(path, r).with_context(|| format!("writing {}", path.display()))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
                    ExitCode::SUCCESS
                }
                _ => ExitCode::from(1),
            };
        }
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &anyhow::Error) -> u8 {
    for cause in e.chain() {
        if let Some(ce) = cause.downcast_ref::<Error>() {
            return if ce.is_input_error() { 1 } else { 2 };
        }
        if let Some(io) = cause.downcast_ref::<std::io::Error>() {
            use std::io::ErrorKind::*;
            return if matches!(io.kind(), NotFound | InvalidData | PermissionDenied) { 1 } else { 2 };
        }
    }
    2
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(usage("--threads must be >= 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the thread pool")?;
    }
    if let Cmd::Run { file } = &cli.cmd {
        let path = file
            .as_ref()
            .or(cli.config.as_ref())
            .ok_or_else(|| usage("run needs a config file"))?;
        let cfg = PipelineConfig::load(path).with_context(|| format!("loading {}", path.display()))?;
        let out = run_pipeline(&cfg)?;
        println!("chm={}", out.chm_path.display());
        println!("manifest={}", out.manifest_path.display());
        return Ok(());
    }
    let settings = match &cli.config {
        Some(p) => Settings::load(p).with_context(|| format!("loading {}", p.display()))?,
        None => Settings::default(),
    };
    let ctx = Ctx {
        crs: cli.crs.or(settings.crs),
        settings,
    };
    step(&ctx, cli.cmd)
}

fn step(ctx: &Ctx, cmd: Cmd) -> Result<()> {
    let s = &ctx.settings;
    match cmd {
        Cmd::Run { .. } => unreachable!("handled by run"),
        Cmd::SelectImage {
            table,
            year,
            hemisphere,
        } => {
            let text = std::fs::read_to_string(&table)
                .with_context(|| format!("reading {}", table.display()))?;
            let mut records = read_image_meta_table(&text)?;
            if let Some(h) = hemisphere {
                records.retain(|m| m.hemisphere == h);
            }
            match select_image(&records, &SelectionCriteria::for_year(year)) {
                Some((m, path)) => {
                    log::info!("selected {} via {:?} rule", m.id, path);
                    println!("{}", m.id);
                }
                None => println!("NONE"),
            }
        }
        Cmd::Ingest { input, output } => {
            let pc = ctx.read_cloud(&input)?;
            write_point_file(&output, &pc)?;
            log::info!("{} points", pc.len());
        }
        Cmd::Denoise {
            input,
            output,
            k,
            sigma_mult,
        } => {
            let pc = ctx.read_cloud(&input)?;
            let k = k.unwrap_or(s.outlier.k);
            let sigma = sigma_mult.unwrap_or(s.outlier.sigma_mult);
            let kept = remove_outliers(&pc, k, sigma)?;
            log::info!("removed {} of {} points", pc.len() - kept.len(), pc.len());
            write_point_file(&output, &kept)?;
        }
        Cmd::Csf { input, output } => {
            let pc = ctx.read_cloud(&input)?;
            let labels = csf_classify(&pc, &s.csf)?;
            let pts: Vec<PointRecord> = pc
                .points()
                .iter()
                .zip(labels.as_slice())
                .map(|(p, &g)| {
                    let c = if g { class::GROUND } else { class::UNCLASSIFIED };
                    PointRecord::with_class(p.x, p.y, p.z, c)
                })
                .collect();
            write_point_file(&output, &PointCloud::new(pts, pc.crs())?)?;
        }
        Cmd::Rasterize {
            input,
            dem,
            dsm,
            pixel_size,
            canopy,
        } => {
            let pc = ctx.read_cloud(&input)?;
            let grid = point_grid(&pc, pixel_size.unwrap_or(s.grid.pixel_size))?;
            let (ground, canopy_pts) = match canopy {
                Canopy::Vegetation => {
                    let split = split_by_class(&pc)?;
                    let c = split.ground.merged(&split.vegetation)?;
                    (split.ground, c)
                }
                Canopy::All => {
                    let keep: Vec<bool> = pc
                        .points()
                        .iter()
                        .map(|p| p.classification == Some(class::GROUND))
                        .collect();
                    (pc.select(&keep), pc.clone())
                }
            };
            let pair = rasterize_surfaces_with(&ground, &canopy_pts, &grid, s.grid.dem_statistic)?;
            write_raster(&dem, &pair.dem)?;
            write_raster(&dsm, &pair.dsm)?;
        }
        Cmd::Gapfill { input, output } => {
            let r = ctx.read_raster(&input)?;
            write_raster(&output, &fill_gaps_spline(&r)?)?;
        }
        Cmd::Chm { dsm, dem, output } => {
            let chm = chm_from_products(&ctx.read_raster(&dsm)?, &ctx.read_raster(&dem)?)?;
            write_raster(&output, &chm)?;
        }
        Cmd::Mask {
            input,
            rgb,
            cloud_mask,
            output,
        } => {
            if rgb.is_none() && cloud_mask.is_none() {
                return Err(usage("mask needs --rgb and/or --cloud-mask"));
            }
            let mut chm = ctx.read_raster(&input)?;
            if let Some(p) = rgb {
                let img = read_rgb_file(&p).with_context(|| format!("reading {}", p.display()))?;
                chm = mask_structures(&chm, &img, &s.veg)?;
            }
            if let Some(p) = cloud_mask {
                chm = mask_clouds(&chm, &ctx.read_raster(&p)?)?;
            }
            write_raster(&output, &chm)?;
        }
        Cmd::Reproject {
            input,
            output,
            pixel_size,
        } => {
            let r = ctx.read_raster(&input)?;
            write_raster(&output, &to_output_grid(&r, pixel_size.unwrap_or(s.grid.pixel_size))?)?;
        }
        Cmd::Resample {
            input,
            output,
            pixel_size,
            stat,
        } => {
            let r = ctx.read_raster(&input)?;
            let g = r.geometry();
            let target = GridGeometry::covering_extent(
                g.min_x(),
                g.min_y(),
                g.max_x(),
                g.max_y(),
                pixel_size,
                g.crs(),
            )?;
            let out = match stat {
                Stat::Max => resample_max(&r, &target)?,
                Stat::Mean => resample_mean(&r, &target)?,
            };
            write_raster(&output, &out)?;
        }
        Cmd::Pseudodepth {
            input,
            output,
            invert,
            h_max,
        } => {
            let mut cfg = s.pseudo_depth;
            if let Some(h) = h_max {
                cfg.h_max = h;
            }
            cfg.validate()?;
            let r = ctx.read_raster(&input)?;
            let out = if invert {
                from_pseudo_depth(&r, &cfg)?
            } else {
                let (d, clamped) = to_pseudo_depth_counted(&r, &cfg)?;
                if clamped > 0 {
                    eprintln!("clamped {clamped} cells to [0, {}]", cfg.h_max);
                }
                d
            };
            write_raster(&output, &out)?;
        }
        Cmd::Tile {
            rgb,
            label,
            out_dir,
            tile_size,
            max_nodata_fraction,
            pseudo_depth,
        } => {
            let img = read_rgb_file(&rgb).with_context(|| format!("reading {}", rgb.display()))?;
            let mut lab = ctx.read_raster(&label)?;
            if pseudo_depth {
                lab = to_pseudo_depth_counted(&lab, &s.pseudo_depth)?.0;
            }
            std::fs::create_dir_all(&out_dir)?;
            let m = export_tiles(
                &img,
                &lab,
                tile_size.unwrap_or(s.tiling.tile_size),
                max_nodata_fraction.unwrap_or(s.tiling.max_nodata_fraction),
                &out_dir,
            )?;
            println!("kept={} skipped={}", m.entries.len(), m.skipped.len());
        }
        Cmd::Eval {
            estimate,
            reference,
            json,
            histogram,
        } => {
            let est = ctx.read_raster(&estimate)?;
            let rf = ctx.read_raster(&reference)?;
            let report = compose_report(&est, &rf, &s.ssim, &s.eval.half_widths)?;
            if json {
                println!("{}", report.to_json());
            } else {
                print!("{}", report.to_text());
            }
            if let Some(p) = histogram {
                std::fs::write(&p, report.histogram_csv())
                    .with_context(|| format!("writing {}", p.display()))?;
            }
        }
        Cmd::Report {
            chm,
            landcover,
            mask,
            bin_width,
        } => {
            let chm_r = ctx.read_raster(&chm)?;
            let bins = chm_histogram(&chm_r, bin_width.unwrap_or(s.eval.histogram_bin))?;
            let total: usize = bins.iter().map(|b| b.count).sum();
            println!("# height histogram (CHM > 0)");
            println!("lower,upper,count,fraction");
            for b in &bins {
                let f = b.count as f64 / total as f64;
                println!("{},{},{},{}", b.lower, b.upper, b.count, f);
            }
            if let Some(lc) = landcover {
                let lc = ctx.read_raster(&lc)?;
                let sample = match mask {
                    Some(p) => ctx.read_raster(&p)?,
                    None => chm_r,
                };
                println!("# composition");
                println!("class,count,fraction");
                for c in composition_analysis(&lc, &sample)? {
                    println!("{},{},{}", c.class, c.count, c.fraction);
                }
            } else if mask.is_some() {
                return Err(usage("--mask requires --landcover"));
            }
        }
    }
    Ok(())
}
