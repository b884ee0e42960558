use alloc::vec;
use alloc::vec::Vec;

use crate::data::Standardization;
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::math;
use crate::model::{generate, recognize, ModelParams};

pub const DEFAULT_THRESHOLD_SD: f64 = 2.0;

/// Spatial map of one latent unit's generative effect.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionMap {
    pub unit_index: usize,
    pub values: Vec<f64>,
    pub sign_flipped: bool,
    pub threshold_sd: f64,
    /// `|z| >= threshold_sd` where `z` is the map z-scored on its own mean and SD.
    pub supra_mask: Vec<bool>,
}

impl ProjectionMap {
    pub fn new(unit_index: usize, values: Vec<f64>, threshold_sd: f64) -> Self {
        let supra_mask = supra_threshold(&values, threshold_sd);
        ProjectionMap {
            unit_index,
            values,
            sign_flipped: false,
            threshold_sd,
            supra_mask,
        }
    }

    pub fn with_threshold(mut self, threshold_sd: f64) -> Self {
        self.threshold_sd = threshold_sd;
        self.supra_mask = supra_threshold(&self.values, threshold_sd);
        self
    }

    pub fn supra_count(&self) -> usize {
        self.supra_mask.iter().filter(|&&s| s).count()
    }

    /// No voxel reaches the threshold.
    pub fn is_empty_supra(&self) -> bool {
        self.supra_count() == 0
    }

    /// The map z-scored with its population mean and SD (all zeros for a constant map).
    pub fn z_scores(&self) -> Vec<f64> {
        z_scores(&self.values)
    }
}

fn z_scores(values: &[f64]) -> Vec<f64> {
    let mean = math::mean(values);
    let sd = math::std_dev(values, 0);
    if !(sd > 0.0) {
        return vec![0.0; values.len()];
    }
    values.iter().map(|v| (v - mean) / sd).collect()
}

fn supra_threshold(values: &[f64], threshold_sd: f64) -> Vec<bool> {
    z_scores(values).iter().map(|z| z.abs() >= threshold_sd).collect()
}

/// Change in the decoder mean when unit `unit` moves from its prior center
/// by one prior scale, all other units held at their centers. With `stats`
/// the map is expressed in original data units.
pub fn latent_projection(params: &ModelParams, unit: usize, stats: Option<&Standardization>) -> Result<ProjectionMap> {
    let k = params.latent_dim();
    if unit >= k {
        return Err(Error::argument(alloc::format!("latent unit {unit} out of range (K = {k})")));
    }
    let center = &params.prior.center;
    let mut h = Matrix::zeros(2, k);
    h.row_mut(0).copy_from_slice(center);
    h.row_mut(1).copy_from_slice(center);
    h.set(1, unit, center[unit] + params.prior.scale(unit));
    let out = generate(params, &h)?;
    let diff: Vec<f64> = out.mean.row(1).iter().zip(out.mean.row(0)).map(|(a, b)| a - b).collect();
    let values = match stats {
        Some(s) => {
            if s.dim() != diff.len() {
                return Err(Error::shape("projection standardization", diff.len(), s.dim()));
            }
            s.scale_difference(&diff)
        }
        None => diff,
    };
    Ok(ProjectionMap::new(unit, values, DEFAULT_THRESHOLD_SD))
}

/// Recomputes the supra-threshold mask and negates the map when the mean of
/// its supra-threshold values is negative. Maps with no supra-threshold voxel
/// come back unchanged (check [`ProjectionMap::is_empty_supra`]).
pub fn align_and_threshold(p: &ProjectionMap) -> ProjectionMap {
    let mut out = p.clone().with_threshold(p.threshold_sd);
    let supra: Vec<f64> = out
        .values
        .iter()
        .zip(&out.supra_mask)
        .filter_map(|(&v, &s)| s.then_some(v))
        .collect();
    if supra.is_empty() {
        return out;
    }
    if math::mean(&supra) < 0.0 {
        for v in &mut out.values {
            *v = -*v;
        }
        out.sign_flipped = !out.sign_flipped;
    }
    out
}

/// Posterior centers `μ_h(x_n)` for every row; `data` must use the model's standardization.
pub fn encode_subjects(params: &ModelParams, data: &Matrix) -> Result<Matrix> {
    Ok(recognize(params, data)?.center)
}
