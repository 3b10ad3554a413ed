//! Archives, rasters, CSV and configuration files.

pub mod archive;
pub mod config;
pub mod csv;
pub mod raster;

pub use archive::{read_latent, read_mask, write_latent, write_mask};
pub use config::{parse_config, read_config};
pub use self::csv::{csv_string, format_g9, write_csv};
pub use raster::{read_depth, read_image_ppm, read_mask_pgm, write_depth_f32r, write_image_ppm, write_mask_pgm};
