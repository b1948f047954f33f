//! Reconstruction quality against ground truth.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::RectifiedRig;
use crate::reconstruct::{reconstruct_with, IrradianceImage, ReconstructionParams};
use crate::transport::TransportMatrix;
use crate::types::HeightField;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// RMS depth error as a percentage of the ground-truth depth range.
    pub rms_percent: f64,
    pub mean_abs_error: f64,
    /// Fraction of cells valid in both inputs.
    pub valid_fraction: f64,
    /// RMS error (scene units) per grid row; `None` where a row has no jointly valid cell.
    pub per_row_rms: Vec<Option<f64>>,
    pub baseline_rms_percent: Option<f64>,
}

/// Compares `recon` to `truth` over their jointly valid cells.
pub fn rms_error(recon: &HeightField, truth: &HeightField) -> Result<EvalReport> {
    if recon.width() != truth.width() {
        return Err(Error::dims("reconstruction width", truth.width(), recon.width()));
    }
    if recon.height() != truth.height() {
        return Err(Error::dims("reconstruction height", truth.height(), recon.height()));
    }
    let (lo, hi) = truth.depth_range().ok_or(Error::NoOverlap)?;
    let (w, h) = (truth.width(), truth.height());
    let mut sum_sq = 0.0;
    let mut sum_abs = 0.0;
    let mut count = 0usize;
    let mut per_row_rms = Vec::with_capacity(h);
    for j in 0..h {
        let (mut row_sq, mut row_n) = (0.0, 0usize);
        for i in 0..w {
            if let (Some(r), Some(t)) = (recon.get(i, j), truth.get(i, j)) {
                let d = r - t;
                row_sq += d * d;
                row_n += 1;
                sum_abs += d.abs();
            }
        }
        sum_sq += row_sq;
        count += row_n;
        per_row_rms.push((row_n > 0).then(|| (row_sq / row_n as f64).sqrt()));
    }
    if count == 0 {
        return Err(Error::NoOverlap);
    }
    let rms = (sum_sq / count as f64).sqrt();
    let range = hi - lo;
    let rms_percent = if range > 0.0 {
        100.0 * rms / range
    } else if rms == 0.0 {
        0.0
    } else {
        f64::INFINITY
    };
    Ok(EvalReport {
        rms_percent,
        mean_abs_error: sum_abs / count as f64,
        valid_fraction: count as f64 / (w * h) as f64,
        per_row_rms,
        baseline_rms_percent: None,
    })
}

/// The same reconstruction with every point transport replaced by
/// `constant_fr`, i.e. assuming a Lambertian surface. The transport matrix
/// is still used to seed each row.
pub fn lambertian_baseline(
    e: &IrradianceImage,
    t: &TransportMatrix,
    rig: &RectifiedRig,
    constant_fr: f64,
    params: &ReconstructionParams,
) -> Result<HeightField> {
    if !(constant_fr >= 0.0 && constant_fr.is_finite()) {
        return Err(Error::validation("constant_fr", "must be finite and nonnegative"));
    }
    reconstruct_with(e, t, rig, params, Some(constant_fr))
}
