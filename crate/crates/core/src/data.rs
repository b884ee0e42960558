//! Subject-by-voxel matrices, quality control, standardization and the
//! synthetic ground-truth generator.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::math;
use crate::rng::{self, Stream};

/// Grid geometry for the columns of a [`SubjectMatrix`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VolumeMask {
    /// Two (plane) or three (volume) grid extents.
    pub dims: Vec<usize>,
    /// One grid position per column, same arity as `dims`.
    pub voxel_coords: Vec<Vec<usize>>,
}

impl VolumeMask {
    pub fn new(dims: Vec<usize>, voxel_coords: Vec<Vec<usize>>) -> Result<Self> {
        let m = VolumeMask { dims, voxel_coords };
        m.validate()?;
        Ok(m)
    }

    /// Every grid position, first axis fastest.
    pub fn full_grid(dims: &[usize]) -> Result<Self> {
        let total: usize = dims.iter().product();
        let coords = (0..total)
            .map(|mut flat| {
                dims.iter()
                    .map(|&d| {
                        let c = flat % d;
                        flat /= d;
                        c
                    })
                    .collect()
            })
            .collect();
        VolumeMask::new(dims.to_vec(), coords)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dims.len() == 2 || self.dims.len() == 3) {
            return Err(Error::argument(format!(
                "mask must have 2 or 3 dimensions, got {}",
                self.dims.len()
            )));
        }
        let mut seen = BTreeSet::new();
        for c in &self.voxel_coords {
            if c.len() != self.dims.len() {
                return Err(Error::shape("mask coordinate arity", self.dims.len(), c.len()));
            }
            if c.iter().zip(&self.dims).any(|(x, d)| x >= d) {
                return Err(Error::argument(format!("mask coordinate {c:?} outside grid {:?}", self.dims)));
            }
            if !seen.insert(c.clone()) {
                return Err(Error::argument(format!("duplicate mask coordinate {c:?}")));
            }
        }
        Ok(())
    }

    pub fn voxel_count(&self) -> usize {
        self.voxel_coords.len()
    }

    pub fn is_volume(&self) -> bool {
        self.dims.len() == 3
    }
}

/// Rows are subjects, columns are voxels (features).
#[derive(Debug, Clone, PartialEq)]
pub struct SubjectMatrix {
    pub values: Matrix,
    pub subject_ids: Vec<String>,
    /// `1` = patient, `0` = control.
    pub labels: Option<Vec<u8>>,
    pub mask: Option<VolumeMask>,
}

impl SubjectMatrix {
    pub fn new(values: Matrix, subject_ids: Vec<String>, labels: Option<Vec<u8>>, mask: Option<VolumeMask>) -> Result<Self> {
        let m = SubjectMatrix {
            values,
            subject_ids,
            labels,
            mask,
        };
        m.validate()?;
        Ok(m)
    }

    /// Unlabelled matrix with ids `sub-0000`, `sub-0001`, ...
    pub fn from_values(values: Matrix) -> Self {
        let ids = (0..values.rows()).map(|i| format!("sub-{i:04}")).collect();
        SubjectMatrix {
            values,
            subject_ids: ids,
            labels: None,
            mask: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.values.rows();
        if self.subject_ids.len() != n {
            return Err(Error::shape("subject ids", n, self.subject_ids.len()));
        }
        if let Some(labels) = &self.labels {
            if labels.len() != n {
                return Err(Error::shape("labels", n, labels.len()));
            }
            if labels.iter().any(|&l| l > 1) {
                return Err(Error::argument("labels must be 0 or 1"));
            }
        }
        if let Some(mask) = &self.mask {
            mask.validate()?;
            if mask.voxel_count() != self.values.cols() {
                return Err(Error::shape("mask voxel count", self.values.cols(), mask.voxel_count()));
            }
        }
        if self.values.as_slice().iter().any(|v| !v.is_finite()) {
            return Err(Error::non_finite("subject matrix values"));
        }
        Ok(())
    }

    pub fn n_subjects(&self) -> usize {
        self.values.rows()
    }

    pub fn n_features(&self) -> usize {
        self.values.cols()
    }

    pub fn select_subjects(&self, idx: &[usize]) -> SubjectMatrix {
        SubjectMatrix {
            values: self.values.select_rows(idx),
            subject_ids: idx.iter().map(|&i| self.subject_ids[i].clone()).collect(),
            labels: self.labels.as_ref().map(|l| idx.iter().map(|&i| l[i]).collect()),
            mask: self.mask.clone(),
        }
    }
}

/// Per-column centering and scaling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Standardization {
    pub means: Vec<f64>,
    /// Sample standard deviations; zero for constant columns.
    pub sds: Vec<f64>,
    pub constant: Vec<bool>,
}

impl Standardization {
    /// Zero means and unit SDs: leaves data unchanged.
    pub fn identity(dim: usize) -> Self {
        Standardization {
            means: vec![0.0; dim],
            sds: vec![1.0; dim],
            constant: vec![false; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.means.len()
    }

    pub fn apply(&self, values: &Matrix) -> Result<Matrix> {
        if values.cols() != self.dim() {
            return Err(Error::shape("standardization width", self.dim(), values.cols()));
        }
        let mut out = values.clone();
        for i in 0..out.rows() {
            for (j, v) in out.row_mut(i).iter_mut().enumerate() {
                *v = if self.constant[j] { 0.0 } else { (*v - self.means[j]) / self.sds[j] };
            }
        }
        Ok(out)
    }

    pub fn invert(&self, values: &Matrix) -> Result<Matrix> {
        if values.cols() != self.dim() {
            return Err(Error::shape("standardization width", self.dim(), values.cols()));
        }
        let mut out = values.clone();
        for i in 0..out.rows() {
            for (j, v) in out.row_mut(i).iter_mut().enumerate() {
                *v = *v * self.sds[j] + self.means[j];
            }
        }
        Ok(out)
    }

    /// Rescales a difference map (no mean shift) into original units.
    pub fn scale_difference(&self, diff: &[f64]) -> Vec<f64> {
        diff.iter().zip(&self.sds).map(|(d, s)| d * s).collect()
    }
}

/// Centers every column and scales it to unit sample SD. Constant columns
/// become zero and are flagged.
pub fn standardize(m: &SubjectMatrix) -> Result<(SubjectMatrix, Standardization)> {
    let d = m.n_features();
    let mut means = Vec::with_capacity(d);
    let mut sds = Vec::with_capacity(d);
    let mut constant = Vec::with_capacity(d);
    for j in 0..d {
        let col = m.values.column(j);
        let mean = math::mean(&col);
        let sd = math::std_dev(&col, 1);
        let is_const = !(sd > 0.0) || col.iter().all(|&v| v == col[0]);
        means.push(mean);
        sds.push(if is_const { 0.0 } else { sd });
        constant.push(is_const);
    }
    let stats = Standardization { means, sds, constant };
    let values = stats.apply(&m.values)?;
    Ok((
        SubjectMatrix {
            values,
            ..m.clone()
        },
        stats,
    ))
}

pub fn destandardize(values: &Matrix, stats: &Standardization) -> Result<Matrix> {
    stats.invert(values)
}

#[derive(Debug, Clone, PartialEq)]
pub struct QcEntry {
    pub subject_id: String,
    pub coefficient: f64,
    pub kept: bool,
    /// The subject's volume was constant; its coefficient is defined as 0.
    pub zero_variance: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QcOutcome {
    pub kept: SubjectMatrix,
    pub excluded: Vec<String>,
    pub report: Vec<QcEntry>,
    pub mean_coefficient: f64,
    pub sd_coefficient: f64,
    pub cutoff: f64,
    /// Coefficient spread was zero (to rounding) so nobody was excluded.
    pub degenerate: bool,
}

pub const QC_THRESHOLD_SD: f64 = 2.0;
const QC_DEGENERATE_SPREAD: f64 = 1e-12;

/// Correlates each subject with the mean volume and drops those more than
/// two (population) SDs below the mean coefficient.
pub fn qc_filter(m: &SubjectMatrix) -> Result<QcOutcome> {
    let n = m.n_subjects();
    if n == 0 {
        return Err(Error::argument("quality control needs at least one subject"));
    }
    let d = m.n_features();
    let mut mean_volume = vec![0.0; d];
    for i in 0..n {
        crate::linalg::axpy(1.0, m.values.row(i), &mut mean_volume);
    }
    for v in &mut mean_volume {
        *v /= n as f64;
    }
    let mut coefficients = Vec::with_capacity(n);
    let mut zero_var = Vec::with_capacity(n);
    for i in 0..n {
        let row = m.values.row(i);
        let constant_row = row.iter().all(|&v| v == row[0]);
        let r = if constant_row { None } else { math::pearson(row, &mean_volume) };
        zero_var.push(constant_row);
        coefficients.push(r.unwrap_or(0.0));
    }
    let mean = math::mean(&coefficients);
    let sd = math::std_dev(&coefficients, 0);
    let cutoff = mean - QC_THRESHOLD_SD * sd;
    let degenerate = sd <= QC_DEGENERATE_SPREAD;
    let mut keep_idx = Vec::new();
    let mut excluded = Vec::new();
    let mut report = Vec::with_capacity(n);
    for i in 0..n {
        let kept = degenerate || coefficients[i] >= cutoff;
        if kept {
            keep_idx.push(i);
        } else {
            excluded.push(m.subject_ids[i].clone());
        }
        report.push(QcEntry {
            subject_id: m.subject_ids[i].clone(),
            coefficient: coefficients[i],
            kept,
            zero_variance: zero_var[i],
        });
    }
    Ok(QcOutcome {
        kept: m.select_subjects(&keep_idx),
        excluded,
        report,
        mean_coefficient: mean,
        sd_coefficient: sd,
        cutoff,
        degenerate,
    })
}

/// Elementwise map applied to the noiseless mixture.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Nonlinearity {
    Identity,
    Tanh,
    /// `softplus(v) - log 2`: a rectifying map that still passes through zero.
    SoftplusMix,
}

impl Nonlinearity {
    pub fn apply(self, v: f64) -> f64 {
        match self {
            Nonlinearity::Identity => v,
            Nonlinearity::Tanh => math::tanh(v),
            Nonlinearity::SoftplusMix => math::softplus(v) - core::f64::consts::LN_2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthConfig {
    pub sources: usize,
    pub grid: Vec<usize>,
    pub subjects: usize,
    /// Loading shift for label-1 subjects, one entry per source.
    pub group_effect: Vec<f64>,
    pub noise_sd: f64,
    pub nonlinearity: Nonlinearity,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            sources: 8,
            grid: vec![32, 32],
            subjects: 200,
            group_effect: vec![0.0; 8],
            noise_sd: 0.2,
            nonlinearity: Nonlinearity::Identity,
            seed: 0,
        }
    }
}

/// What the generator actually drew.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticGroundTruth {
    /// `K × D` spatial maps.
    pub sources: Matrix,
    /// `N × K` subject loadings (group shift included).
    pub loadings: Matrix,
    pub group_effect: Vec<f64>,
    pub noise_sd: f64,
    pub nonlinearity: Nonlinearity,
}

/// Gaussian-blob sources mixed by logistic loadings, plus Gaussian noise.
pub fn synth_generate(cfg: &SynthConfig) -> Result<(SubjectMatrix, SyntheticGroundTruth)> {
    let mask = VolumeMask::full_grid(&cfg.grid)?;
    let d = mask.voxel_count();
    let k = cfg.sources;
    let n = cfg.subjects;
    if k == 0 || k > d {
        return Err(Error::argument(format!("source count {k} must lie in 1..={d} (voxel count)")));
    }
    if n < 2 {
        return Err(Error::argument("at least two subjects are required"));
    }
    if cfg.group_effect.len() != k {
        return Err(Error::shape("group_effect", k, cfg.group_effect.len()));
    }
    if !(cfg.noise_sd >= 0.0 && cfg.noise_sd.is_finite()) {
        return Err(Error::argument("noise_sd must be a non-negative number"));
    }

    let extent = *cfg.grid.iter().max().unwrap_or(&1) as f64;
    let mut geo = rng::stream(cfg.seed, Stream::Synthetic, 0);
    let mut sources = Matrix::zeros(k, d);
    for s in 0..k {
        let center: Vec<f64> = cfg
            .grid
            .iter()
            .map(|&g| (0.15 + 0.7 * rng::open_uniform(&mut geo)) * (g as f64 - 1.0))
            .collect();
        let width = (0.08 + 0.04 * rng::open_uniform(&mut geo)) * extent;
        let inv = 1.0 / (2.0 * width * width);
        for (v, coord) in mask.voxel_coords.iter().enumerate() {
            let r2: f64 = coord.iter().zip(&center).map(|(&c, m)| (c as f64 - m) * (c as f64 - m)).sum();
            sources.set(s, v, math::exp(-r2 * inv));
        }
    }

    let mut label_rng = rng::stream(cfg.seed, Stream::Synthetic, 2);
    let mut labels: Vec<u8> = (0..n).map(|i| u8::from(i >= n / 2)).collect();
    rng::shuffle(&mut labels, &mut label_rng);

    let mut load_rng = rng::stream(cfg.seed, Stream::Synthetic, 1);
    let loadings = Matrix::from_fn(n, k, |i, j| {
        let base = math::logit(rng::open_uniform(&mut load_rng));
        if labels[i] == 1 { base + cfg.group_effect[j] } else { base }
    });

    let mut noise_rng = rng::stream(cfg.seed, Stream::Synthetic, 3);
    let mixed = loadings.matmul(&sources)?;
    let mut values = mixed;
    for v in values.as_mut_slice() {
        *v = cfg.nonlinearity.apply(*v);
        if cfg.noise_sd > 0.0 {
            *v += cfg.noise_sd * rng::standard_normal(&mut noise_rng);
        }
    }

    let data = SubjectMatrix::new(
        values,
        (0..n).map(|i| format!("sub-{i:04}")).collect(),
        Some(labels),
        Some(mask),
    )?;
    let truth = SyntheticGroundTruth {
        sources,
        loadings,
        group_effect: cfg.group_effect.clone(),
        noise_sd: cfg.noise_sd,
        nonlinearity: cfg.nonlinearity,
    };
    Ok((data, truth))
}
