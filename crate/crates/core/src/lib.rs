//! Canopy height model (CHM) toolkit.
//!
//! Turns airborne LiDAR point clouds, DSM/DEM product pairs or existing CHM
//! rasters into north-up UTM canopy height grids, prepares RGB / pseudo-depth
//! training tiles and scores estimated CHMs against reference CHMs.
//!
//! Module map:
//!
//! - [`geo`]: grid model, CRS, transverse Mercator, resampling and reprojection
//! - [`ingest`]: LAS / text point readers, raster and PPM formats, outlier removal
//! - [`ground_filter`]: cloth simulation ground filter and class-code splitting
//! - [`surface`]: DEM/DSM rasterization, spline gap filling, CHM derivation
//! - [`vegmask`]: RGB vegetation indices and artificial-structure removal
//! - [`dataset`]: image selection, pseudo-depth transform, tile export
//! - [`metrics`]: bias / MAE / RMSE / SSIM, error distributions, composition
//! - [`pipeline`]: config-driven end-to-end workflows with run manifests

pub mod dataset;
pub mod error;
pub mod geo;
pub mod ground_filter;
pub mod ingest;
pub mod metrics;
pub mod pipeline;
pub mod surface;
pub mod vegmask;

pub use error::{Error, LasError, Result};
pub use geo::{Crs, GridGeometry, Hemisphere, Raster, RgbImage};
