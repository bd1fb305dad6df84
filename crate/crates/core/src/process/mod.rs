//! Standard Lévy sequences, their simulation, and spectrally assembled
//! U-valued Lévy paths.

mod grid;
mod levy;
mod path;
mod standard;

pub use grid::{GridSpec, NodeKind, TimeGrid};
pub use levy::{assemble_levy, empirical_covariance, project_standard, transport_levy, LevyPath};
pub use path::{simulate_paths, Sampler, SamplePath};
pub use standard::{make_standard_specs, DriverRecipe, Jump, Preset, StandardLevySpec, NORMALIZATION_TOLERANCE};

use crate::error::Result;

/// Writes one row per grid node: `time,kind,<columns...>`.
pub fn write_columnar<W: std::io::Write>(out: W, grid: &TimeGrid, names: &[String], columns: &[&[f64]]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["time".to_string(), "kind".to_string()];
    header.extend(names.iter().cloned());
    w.write_record(&header).map_err(csv_error)?;
    let mut row: Vec<String> = Vec::with_capacity(header.len());
    for (n, (t, kind)) in grid.times().iter().zip(grid.kinds()).enumerate() {
        row.clear();
        row.push(t.to_string());
        row.push(kind.as_str().to_string());
        row.extend(columns.iter().map(|c| c[n].to_string()));
        w.write_record(&row).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

pub(crate) fn csv_error(e: csv::Error) -> crate::error::Error {
    crate::error::Error::Io(e.to_string())
}
