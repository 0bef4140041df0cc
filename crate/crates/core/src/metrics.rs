//! Per-epoch training metrics and their CSV form.
//!
//! Column order is fixed by the field order of [`EpochMetrics`] and equals
//! [`METRICS_HEADER`].

use std::fs::File;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const METRICS_HEADER: &str =
    "epoch,env_steps,mean_return,max_return,mean_bonus,raw_kl_mean,kl_median,bnn_loss,policy_loss,value_loss,wall_ms";

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub env_steps: usize,
    /// Mean extrinsic return of episodes that ended this epoch; 0 if none did.
    pub mean_return: f64,
    pub max_return: f64,
    pub mean_bonus: f64,
    pub raw_kl_mean: f64,
    /// Divisor applied to this epoch's raw KL values; 0 when nothing was scored.
    pub kl_median: f64,
    /// Mean ELBO loss of this epoch's fit; 0 when the model was not fit.
    pub bnn_loss: f64,
    pub policy_loss: f64,
    pub value_loss: f64,
    pub wall_ms: u64,
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Config(format!("csv: {other:?}")),
    }
}

/// Writes rows as they arrive and flushes after each one, so a failed run
/// still leaves every completed epoch on disk.
pub struct MetricsWriter {
    inner: csv::Writer<File>,
}

impl MetricsWriter {
    pub fn create(path: &Path) -> Result<Self> {
        let mut file = File::create(path)?;
        writeln!(file, "{METRICS_HEADER}")?;
        let inner = csv::WriterBuilder::new().has_headers(false).from_writer(file);
        Ok(Self { inner })
    }

    pub fn write(&mut self, row: &EpochMetrics) -> Result<()> {
        self.inner.serialize(row).map_err(csv_err)?;
        self.inner.flush()?;
        Ok(())
    }
}

pub fn read_metrics(path: &Path) -> Result<Vec<EpochMetrics>> {
    let mut reader = csv::Reader::from_path(path).map_err(csv_err)?;
    let header = reader.headers().map_err(csv_err)?.iter().collect::<Vec<_>>().join(",");
    if header != METRICS_HEADER {
        return Err(Error::Config(format!("{} has an unexpected header", path.display())));
    }
    reader
        .deserialize()
        .map(|r| r.map_err(csv_err))
        .collect()
}

/// Writes any serialisable rows with a header derived from field names.
pub(crate) fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    for r in rows {
        w.serialize(r).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub(crate) fn read_csv<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let mut reader = csv::Reader::from_path(path).map_err(csv_err)?;
    reader.deserialize().map(|r| r.map_err(csv_err)).collect()
}
