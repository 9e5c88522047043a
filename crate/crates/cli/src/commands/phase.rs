use std::path::PathBuf;

use clap::Args;
use mds_recover::phase::{fit_boundary, replay, run_phase, Axis, CrossingPoint};
use mds_recover::{Error, PhaseGridConfig, PhaseGridResult};
use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::CliError;
use crate::io::{json_bytes, matrix_csv, read_config, read_matrix, with_suffix, Outputs, SCHEMA_VERSION};

/// Fraction level whose crossing defines the boundary.
const THRESHOLD: f64 = 0.5;

#[derive(Debug, Args)]
pub struct PhaseCmd {
    /// Phase grid config JSON
    pub config: PathBuf,
    /// Writes `<prefix>_fractions.csv`, `_result.json` and `_fit.json`
    #[arg(long)]
    pub out_prefix: PathBuf,
    /// Skip simulation and fit a stored fractions CSV (sigma rows, axis columns)
    #[arg(long)]
    pub replay: Option<PathBuf>,
}

#[derive(Serialize)]
struct ResultFile<'a> {
    schema_version: u32,
    #[serde(flatten)]
    result: &'a PhaseGridResult,
}

#[derive(Serialize)]
struct FitFile {
    schema_version: u32,
    threshold: f64,
    transform: String,
    slope: Option<f64>,
    intercept: Option<f64>,
    r_squared: Option<f64>,
    crossing_points: Vec<CrossingPoint>,
    excluded_columns: Vec<usize>,
    warning: Option<String>,
}

fn axis_header(config: &PhaseGridConfig) -> Vec<String> {
    let name = match config.axis {
        Axis::NSweep => "N",
        Axis::DSweep => "d",
    };
    config.axis_values.iter().map(|v| format!("{name}={v}")).collect()
}

pub fn run(cmd: &PhaseCmd) -> Result<(), CliError> {
    let config: PhaseGridConfig = read_config(&cmd.config)?;
    config.validate()?;
    let result = match &cmd.replay {
        Some(path) => {
            let m = read_matrix(path)?;
            let fractions = m.row_iter().map(|r| r.iter().copied().collect()).collect();
            replay(&config, fractions)?
        }
        None => run_phase(&config)?,
    };
    let fit = match fit_boundary(&result, THRESHOLD) {
        Ok(f) => FitFile {
            schema_version: SCHEMA_VERSION,
            threshold: f.threshold,
            transform: f.transform,
            slope: Some(f.slope),
            intercept: Some(f.intercept),
            r_squared: Some(f.r_squared),
            crossing_points: f.crossing_points,
            excluded_columns: f.excluded_columns,
            warning: None,
        },
        Err(e @ Error::InsufficientCrossings { .. }) => FitFile {
            schema_version: SCHEMA_VERSION,
            threshold: THRESHOLD,
            transform: config.axis.describe().to_string(),
            slope: None,
            intercept: None,
            r_squared: None,
            crossing_points: Vec::new(),
            excluded_columns: Vec::new(),
            warning: Some(e.to_string()),
        },
        Err(e) => return Err(e.into()),
    };
    let (rows, cols) = (result.fractions.len(), config.axis_values.len());
    let fractions = DMatrix::from_fn(rows, cols, |i, j| result.fractions[i][j]);
    let header = axis_header(&config);
    let mut outputs = Outputs::default();
    outputs.add(with_suffix(&cmd.out_prefix, "_fractions.csv"), matrix_csv(&fractions, Some(&header)));
    outputs.add(
        with_suffix(&cmd.out_prefix, "_result.json"),
        json_bytes(&ResultFile { schema_version: SCHEMA_VERSION, result: &result }),
    );
    outputs.add(with_suffix(&cmd.out_prefix, "_fit.json"), json_bytes(&fit));
    outputs.commit()?;
    match (&fit.slope, &fit.intercept, &fit.warning) {
        (Some(slope), Some(intercept), _) => println!(
            "boundary: log SNR = {slope:.4} * {} + {intercept:.4} (R^2 {:.3}, {} crossings)",
            fit.transform,
            fit.r_squared.unwrap_or(f64::NAN),
            fit.crossing_points.len()
        ),
        (_, _, Some(w)) => eprintln!("warning: no boundary fit: {w}"),
        _ => {}
    }
    Ok(())
}
