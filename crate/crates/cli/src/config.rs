//! Run configuration: a flat TOML file plus `key=value` overrides.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use secthru_core::model::{build_rayleigh_grid, db_to_linear, FadingGrid, GridMethod, QosConfig};
use secthru_core::outer::{CaseSelection, SolverOptions};

use crate::CliError;

/// Keys, defaults and meaning, shown by `--help`.
pub const CONFIG_HELP: &str = "\
Configuration keys (flat TOML file via --config, overridden by --set KEY=VALUE):
  theta        = 1e-3         QoS exponent (1/bit)
  frame_t      = 2e-3         frame duration T (s)
  bandwidth_b  = 1e5          bandwidth B (Hz)
  snr_db       = 0.0          average power budget in dB; -inf gives snr = 0
  gamma        = 1.0          eavesdropper gain scaling in the secrecy rate
  fading       = \"rayleigh\"   \"rayleigh\" or \"csv\" (z_M,z_E,weight rows)
  fading_csv   = (unset)      state list for fading = \"csv\"
  mean_main    = 1.0          mean main-receiver gain
  mean_eve     = 1.0          mean second-receiver gain
  grid_method  = \"quadrature\" \"quadrature\" or \"monte-carlo\"
  nodes        = 64           nodes per dimension (nodes^2 states)
  seed         = 0            Monte Carlo seed
  num_lambda   = 33           weights in a region sweep
  selection    = \"exact\"      \"exact\" or \"sequential\" case selection
  power_tol    = 1e-6         relative tolerance on the power constraint
  phi_tol      = 1e-8         relative tolerance on the phi fixed point
  case_tol     = 1e-6         relative tolerance for E{R01} = E{R02}
  max_kappa_iter = 200        outer iteration cap
  max_phi_iter = 500          inner iteration cap
  csv          = \"region.csv\" region output
  svg          = (unset)      optional region plot
  report       = (unset)      optional point report file

Exit codes: 0 ok, 2 configuration error, 3 numeric failure, 4 partial sweep,
5 verification failure.";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FadingKind {
    Rayleigh,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Quadrature,
    MonteCarlo,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Selection {
    Exact,
    Sequential,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub theta: f64,
    pub frame_t: f64,
    pub bandwidth_b: f64,
    pub snr_db: f64,
    pub gamma: f64,
    pub fading: FadingKind,
    pub fading_csv: Option<PathBuf>,
    pub mean_main: f64,
    pub mean_eve: f64,
    pub grid_method: Method,
    pub nodes: usize,
    pub seed: u64,
    pub num_lambda: usize,
    pub selection: Selection,
    pub power_tol: f64,
    pub phi_tol: f64,
    pub case_tol: f64,
    pub max_kappa_iter: usize,
    pub max_phi_iter: usize,
    pub csv: PathBuf,
    pub svg: Option<PathBuf>,
    pub report: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let o = SolverOptions::default();
        RunConfig {
            theta: 1e-3,
            frame_t: 2e-3,
            bandwidth_b: 1e5,
            snr_db: 0.0,
            gamma: 1.0,
            fading: FadingKind::Rayleigh,
            fading_csv: None,
            mean_main: 1.0,
            mean_eve: 1.0,
            grid_method: Method::Quadrature,
            nodes: 64,
            seed: 0,
            num_lambda: 33,
            selection: Selection::Exact,
            power_tol: o.power_tol,
            phi_tol: o.phi_tol,
            case_tol: o.case_tol,
            max_kappa_iter: o.max_kappa_iter,
            max_phi_iter: o.max_phi_iter,
            csv: PathBuf::from("region.csv"),
            svg: None,
            report: None,
        }
    }
}

impl RunConfig {
    /// Reads `path` (if any) and applies the overrides in order.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self, CliError> {
        let mut table = match path {
            Some(p) => {
                let text = fs::read_to_string(p).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
                toml::from_str::<toml::Table>(&text).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?
            }
            None => toml::Table::new(),
        };
        for o in overrides {
            let (key, value) = o
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("override {o:?} is not KEY=VALUE")))?;
            table.insert(key.trim().to_string(), parse_value(value.trim()));
        }
        let cfg: RunConfig = table.try_into().map_err(|e: toml::de::Error| CliError::Config(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), CliError> {
        self.qos()?;
        if self.snr_db.is_nan() || self.snr_db == f64::INFINITY {
            return Err(CliError::Config(format!("snr_db must be finite or -inf, got {}", self.snr_db)));
        }
        if self.num_lambda < 2 {
            return Err(CliError::Config(format!("num_lambda must be at least 2, got {}", self.num_lambda)));
        }
        for (name, v) in [("power_tol", self.power_tol), ("phi_tol", self.phi_tol), ("case_tol", self.case_tol)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(CliError::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if self.max_kappa_iter == 0 || self.max_phi_iter == 0 {
            return Err(CliError::Config("iteration caps must be positive".into()));
        }
        if self.fading == FadingKind::Csv && self.fading_csv.is_none() {
            return Err(CliError::Config("fading = \"csv\" needs fading_csv".into()));
        }
        Ok(())
    }

    pub fn snr(&self) -> f64 {
        if self.snr_db == f64::NEG_INFINITY {
            0.0
        } else {
            db_to_linear(self.snr_db)
        }
    }

    pub fn qos(&self) -> Result<QosConfig, CliError> {
        QosConfig::new(self.theta, self.frame_t, self.bandwidth_b, self.snr(), self.gamma).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn grid(&self) -> Result<FadingGrid, CliError> {
        let grid = match self.fading {
            FadingKind::Rayleigh => {
                let method = match self.grid_method {
                    Method::Quadrature => GridMethod::Quadrature,
                    Method::MonteCarlo => GridMethod::MonteCarlo,
                };
                build_rayleigh_grid(self.mean_main, self.mean_eve, self.nodes, method, Some(self.seed))
            }
            FadingKind::Csv => {
                // validate() guarantees the path
                let p = self.fading_csv.as_deref().unwrap_or(Path::new(""));
                let f = fs::File::open(p).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
                FadingGrid::from_csv(f)
            }
        };
        grid.map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn solver_options(&self) -> SolverOptions {
        SolverOptions {
            selection: match self.selection {
                Selection::Exact => CaseSelection::Exact,
                Selection::Sequential => CaseSelection::Sequential,
            },
            power_tol: self.power_tol,
            phi_tol: self.phi_tol,
            case_tol: self.case_tol,
            max_kappa_iter: self.max_kappa_iter,
            max_phi_iter: self.max_phi_iter,
            ..SolverOptions::default()
        }
    }
}

/// A TOML value if `raw` parses as one, else the bare string.
fn parse_value(raw: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(kv: &[&str]) -> Result<RunConfig, CliError> {
        RunConfig::load(None, &kv.iter().map(|s| s.to_string()).collect::<Vec<_>>())
    }

    #[test]
    fn defaults_are_the_reference_configuration() {
        let c = set(&[]).unwrap();
        assert_eq!(c, RunConfig::default());
        let q = c.qos().unwrap();
        assert_eq!(q.snr, 1.0);
        assert!((q.beta - 0.2 / std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn overrides_parse_numbers_strings_and_minus_infinity() {
        let c = set(&["snr_db=-inf", "nodes=8", "grid_method=monte-carlo", "selection=\"sequential\""]).unwrap();
        assert_eq!(c.snr(), 0.0);
        assert_eq!(c.nodes, 8);
        assert_eq!(c.grid_method, Method::MonteCarlo);
        assert_eq!(c.selection, Selection::Sequential);
        assert_eq!(set(&["snr_db=10"]).unwrap().snr(), 10.0);
    }

    #[test]
    fn bad_keys_and_values_are_config_errors() {
        for kv in [&["thetta=1"][..], &["theta=0"], &["theta=abc"], &["num_lambda=1"], &["snr_db=inf"], &["fading=csv"], &["oops"]] {
            assert!(matches!(set(kv), Err(CliError::Config(_))), "{kv:?}");
        }
    }
}
