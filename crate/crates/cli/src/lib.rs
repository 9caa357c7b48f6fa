//! Command implementations behind the `secthru` binary.

pub mod config;
pub mod output;
pub mod verify;

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use secthru_core::outer::master_pc_with;
use secthru_core::region::sweep_boundary_with;

use config::RunConfig;
use output::Row;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("{failed} of {total} sweep points failed")]
    Partial { failed: usize, total: usize },
    #[error("{0} verification check(s) failed")]
    Verify(usize),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numeric(_) => 3,
            CliError::Partial { .. } => 4,
            CliError::Verify(_) => 5,
        }
    }
}

fn core_error(e: secthru_core::Error) -> CliError {
    if e.is_numeric() {
        CliError::Numeric(e.to_string())
    } else {
        CliError::Config(e.to_string())
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    fs::write(path, bytes).map_err(|e| CliError::Config(format!("cannot write {}: {e}", path.display())))
}

/// Solves one boundary point and returns its record.
pub fn cmd_point(cfg: &RunConfig, lambda0: f64) -> Result<Row, CliError> {
    if !(0.0..=1.0).contains(&lambda0) {
        return Err(CliError::Config(format!("lambda0 must lie in [0, 1], got {lambda0}")));
    }
    let (grid, qos) = (cfg.grid()?, cfg.qos()?);
    let r = master_pc_with(&grid, &qos, (lambda0, 1.0 - lambda0), &cfg.solver_options(), None).map_err(core_error)?;
    let row = Row::from_report(&r);
    if let Some(p) = &cfg.report {
        write_file(p, row.record().as_bytes())?;
    }
    Ok(row)
}

/// Sweeps the weights and writes the CSV (and SVG when configured). The rows
/// are returned even when some points failed.
pub fn cmd_region(cfg: &RunConfig) -> (Vec<Row>, Result<(), CliError>) {
    let mut rows = Vec::new();
    let res = (|| {
        let (grid, qos) = (cfg.grid()?, cfg.qos()?);
        let sweep = sweep_boundary_with(&grid, &qos, cfg.num_lambda, &cfg.solver_options()).map_err(core_error)?;
        rows = sweep
            .points
            .iter()
            .map(|p| match &p.report {
                Ok(r) => Row::from_report(r),
                Err(e) => Row::failed(p.lambda, &e.to_string()),
            })
            .collect();
        let mut buf = Vec::new();
        output::write_csv(&mut buf, &rows).map_err(|e| CliError::Config(e.to_string()))?;
        if cfg.csv.as_os_str() == "-" {
            io::stdout().write_all(&buf).map_err(|e| CliError::Config(e.to_string()))?;
        } else {
            write_file(&cfg.csv, &buf)?;
        }
        if let Some(p) = &cfg.svg {
            let title = format!("theta = {:e}, SNR = {} dB, gamma = {}", cfg.theta, cfg.snr_db, cfg.gamma);
            write_file(p, output::svg(&rows, &title).as_bytes())?;
        }
        let failed = rows.iter().filter(|r| !r.is_ok()).count();
        if failed > 0 {
            return Err(CliError::Partial { failed, total: rows.len() });
        }
        Ok(())
    })();
    (rows, res)
}

pub fn cmd_verify(cfg: &RunConfig, fault: Option<verify::Fault>) -> Result<Vec<verify::Check>, CliError> {
    verify::run(cfg, fault)
}
