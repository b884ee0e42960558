//! CSV reports.

use std::path::Path;

use hmvae_core::analysis::{ClassificationReport, Communities, ComponentStats, Recovery};
use hmvae_core::data::QcEntry;
use hmvae_core::model::ElboBreakdown;
use hmvae_core::Matrix;

use crate::error::Result;
use crate::fsutil;

/// Collects records in memory, then writes the file atomically.
pub struct Table {
    writer: csv::Writer<Vec<u8>>,
}

impl Table {
    pub fn new<S: AsRef<str>>(header: &[S]) -> Result<Self> {
        let mut writer = csv::Writer::from_writer(Vec::new());
        writer.write_record(header.iter().map(|h| h.as_ref()))?;
        Ok(Table { writer })
    }

    pub fn row<I, S>(&mut self, fields: I) -> Result<()>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.writer.write_record(fields)?;
        Ok(())
    }

    pub fn into_bytes(self) -> Result<Vec<u8>> {
        self.writer
            .into_inner()
            .map_err(|e| crate::error::Error::Invalid(format!("csv buffer: {}", e.error())))
    }

    pub fn save(self, path: &Path) -> Result<()> {
        fsutil::atomic_write(path, &self.into_bytes()?)
    }
}

/// Shortest round-trip form, with an exponent for very large or small magnitudes.
fn num(v: f64) -> String {
    format!("{v:?}")
}

fn unit_name(i: usize) -> String {
    format!("h{i}")
}

pub fn qc_report(entries: &[QcEntry]) -> Result<Table> {
    let mut t = Table::new(&["subject_id", "coefficient", "kept"])?;
    for e in entries {
        t.row([e.subject_id.clone(), num(e.coefficient), e.kept.to_string()])?;
    }
    Ok(t)
}

pub fn elbo_trace(trace: &[f64]) -> Result<Table> {
    let mut t = Table::new(&["epoch", "elbo"])?;
    for (e, v) in trace.iter().enumerate() {
        t.row([e.to_string(), num(*v)])?;
    }
    Ok(t)
}

/// One row per subject: id, label (empty if unknown), posterior center per unit.
pub fn encodings(ids: &[String], labels: Option<&[u8]>, centers: &Matrix) -> Result<Table> {
    let mut header = vec!["subject_id".to_string(), "label".to_string()];
    header.extend((0..centers.cols()).map(unit_name));
    let mut t = Table::new(&header)?;
    for (i, id) in ids.iter().enumerate() {
        let mut row = vec![id.clone(), labels.map_or(String::new(), |l| l[i].to_string())];
        row.extend(centers.row(i).iter().map(|&v| num(v)));
        t.row(row)?;
    }
    Ok(t)
}

pub fn fold_accuracies(r: &ClassificationReport) -> Result<Table> {
    let mut t = Table::new(&["fold", "accuracy", "intercept"])?;
    for (f, (a, b)) in r.fold_accuracies.iter().zip(&r.fold_intercepts).enumerate() {
        t.row([f.to_string(), num(*a), num(*b)])?;
    }
    Ok(t)
}

pub fn fold_betas(r: &ClassificationReport) -> Result<Table> {
    let mut header = vec!["fold".to_string()];
    header.extend((0..r.fold_betas.cols()).map(unit_name));
    let mut t = Table::new(&header)?;
    for f in 0..r.fold_betas.rows() {
        let mut row = vec![f.to_string()];
        row.extend(r.fold_betas.row(f).iter().map(|&v| num(v)));
        t.row(row)?;
    }
    Ok(t)
}

pub fn component_stats(stats: &[ComponentStats]) -> Result<Table> {
    let mut t = Table::new(&["unit", "mean_beta", "t", "p", "df", "significant", "degenerate"])?;
    for (i, s) in stats.iter().enumerate() {
        t.row([
            unit_name(i),
            num(s.mean),
            num(s.t),
            num(s.p),
            s.df.to_string(),
            s.significant.to_string(),
            s.degenerate.to_string(),
        ])?;
    }
    Ok(t)
}

/// Square matrix with row and column names, rows and columns listed in `order`.
pub fn correlation(names: &[String], m: &Matrix, order: &[usize]) -> Result<Table> {
    let mut header = vec![String::new()];
    header.extend(order.iter().map(|&i| names[i].clone()));
    let mut t = Table::new(&header)?;
    for &i in order {
        let mut row = vec![names[i].clone()];
        row.extend(order.iter().map(|&j| num(m.get(i, j))));
        t.row(row)?;
    }
    Ok(t)
}

pub fn communities(c: &Communities) -> Result<Table> {
    let mut t = Table::new(&["unit", "community"])?;
    for (i, l) in c.labels.iter().enumerate() {
        t.row([unit_name(i), l.to_string()])?;
    }
    Ok(t)
}

pub fn subject_elbo(ids: &[String], rows: &[ElboBreakdown]) -> Result<Table> {
    let mut t = Table::new(&["subject_id", "elbo", "reconstruction", "log_prior", "neg_log_q"])?;
    for (id, b) in ids.iter().zip(rows) {
        t.row([
            id.clone(),
            num(b.elbo),
            num(b.recon),
            num(b.log_prior),
            num(b.neg_log_q),
        ])?;
    }
    Ok(t)
}

pub fn projection_summary(rows: &[(usize, usize, bool)]) -> Result<Table> {
    let mut t = Table::new(&["unit", "supra_threshold_voxels", "sign_flipped"])?;
    for &(unit, supra, flipped) in rows {
        t.row([unit_name(unit), supra.to_string(), flipped.to_string()])?;
    }
    Ok(t)
}

pub fn recovery(r: &Recovery) -> Result<Table> {
    let mut t = Table::new(&["unit", "source", "abs_correlation"])?;
    for &(unit, source) in &r.assignment {
        t.row([unit_name(unit), source.to_string(), num(r.correlations.get(unit, source))])?;
    }
    Ok(t)
}
