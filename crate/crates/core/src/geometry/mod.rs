//! Homography estimation, image warping and match back-mapping.

mod dlt;
mod msac;
mod warp;

pub use dlt::{dlt_homography, hartley_normalize};
pub use msac::{msac_homography, msac_homography_observed, MsacParams, RobustFit};
pub use warp::{backmap_matches, warp_image};

use crate::Homography;

/// Mean distance between the images of the four reference corners
/// `(0,0), (w-1,0), (0,h-1), (w-1,h-1)` under `est` and `gt`. A corner
/// sent to infinity by either transform makes the error infinite.
pub fn corner_error(est: &Homography, gt: &Homography, width: usize, height: usize) -> f64 {
    let (w, h) = (width as f64 - 1.0, height as f64 - 1.0);
    let mut total = 0.0;
    for (x, y) in [(0.0, 0.0), (w, 0.0), (0.0, h), (w, h)] {
        match (est.apply(x, y), gt.apply(x, y)) {
            (Ok((ex, ey)), Ok((gx, gy))) => total += (ex - gx).hypot(ey - gy),
            _ => return f64::INFINITY,
        }
    }
    total / 4.0
}
