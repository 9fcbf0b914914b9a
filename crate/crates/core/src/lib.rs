//! Non-local patch regression (NLPR) for grayscale image denoising.
//!
//! Each pixel is restored by a weighted `lp` regression, `0 < p <= 2`, over
//! the patches in its search window. `p = 2` is classic non-local means and
//! `p = 1` gives the non-local Euclidean median; smaller `p` rejects patches
//! from across an edge more aggressively. The regression is solved by a
//! regularized IRLS started from the non-local means estimate.

pub mod denoise;
pub mod error;
pub mod harness;
pub mod image;
pub mod irls;
pub mod noise;
pub mod pgm;
pub mod synth;
pub mod weights;

pub use denoise::{denoise, denoise_1d, nlm_closed_form, solve_pixel, solve_position_1d, DenoiseParams, DenoiseReport};
pub use error::{Error, Result};
pub use image::{center_pixel, extract_patch, psnr, Image, Patch, PixelIndex, PSNR_INFINITE};
pub use irls::{irls_solve, nlm_estimate, objective, sorted_multipliers, IrlsConfig, IrlsResult, WeightedPatches};
pub use noise::{add_gaussian_noise, NoiseSpec};
pub use weights::{compute_weights, truncate_to_nearest_half, NeighborSet, SearchParams};
