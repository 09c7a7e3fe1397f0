use crate::error::{CliError, CliResult};
use ltv_core::channel::ChannelModel;
use ltv_core::discretize::ChannelMatrix;
use ltv_core::io;
use ltv_core::spectral::SvdResult;
use ltv_core::tfa::{AmplitudeMode, AmplitudeOptions, Windows};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::Path;

/// Parses a JSON document, reporting schema errors with the path of the
/// offending field (exit 2).
pub fn parse_config<T: DeserializeOwned>(text: &str, origin: &str) -> CliResult<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        if path.is_empty() || path == "." {
            CliError::Config(format!("{origin}: {inner}"))
        } else {
            CliError::Config(format!("{origin}: field `{path}`: {inner}"))
        }
    })
}

pub fn load_config<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    parse_config(&text, &path.display().to_string())
}

/// Reads a channel model file. Unparseable files are format errors (exit 3);
/// parseable models with invalid parameters are configuration errors.
pub fn load_model(path: &Path) -> CliResult<ChannelModel> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let de = &mut serde_json::Deserializer::from_str(&text);
    let model: ChannelModel = serde_path_to_error::deserialize(de)
        .map_err(|e| CliError::Io(format!("{}: not a channel model: {e}", path.display())))?;
    model.validate().map_err(|e| CliError::from(e).context(path.display()))?;
    Ok(model)
}

pub fn load_svd(path: &Path) -> CliResult<(SvdResult, f64)> {
    let mut f = fs::File::open(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    io::read_svd(&mut std::io::BufReader::new(&mut f)).map_err(|e| CliError::from(e).context(path.display()))
}

pub fn load_matrix(path: &Path) -> CliResult<ChannelMatrix> {
    let mut f = fs::File::open(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    io::read_matrix(&mut std::io::BufReader::new(&mut f)).map_err(|e| CliError::from(e).context(path.display()))
}

/// Time-frequency analysis settings shared by `tfa` and `compare`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TfaConfig {
    /// Time and lag window lengths (odd); sized from the block length when
    /// absent.
    #[serde(default)]
    pub t_win: Option<usize>,
    #[serde(default)]
    pub f_win: Option<usize>,
    #[serde(default = "default_edge")]
    pub edge: f64,
    /// Ridge cells hold more than this fraction of the peak.
    #[serde(default = "default_threshold")]
    pub ridge_threshold: f64,
    #[serde(default = "default_mode")]
    pub amplitude_mode: AmplitudeMode,
    /// Envelope smoothing length; sized from the block length when absent.
    #[serde(default)]
    pub smooth: Option<usize>,
}

fn default_edge() -> f64 {
    ltv_core::tfa::WINDOW_EDGE
}

fn default_threshold() -> f64 {
    0.05
}

fn default_mode() -> AmplitudeMode {
    AmplitudeMode::Envelope
}

impl Default for TfaConfig {
    fn default() -> Self {
        TfaConfig {
            t_win: None,
            f_win: None,
            edge: default_edge(),
            ridge_threshold: default_threshold(),
            amplitude_mode: default_mode(),
            smooth: None,
        }
    }
}

impl TfaConfig {
    pub fn windows(&self, n: usize) -> Windows {
        let d = Windows::default_for(n);
        Windows {
            t_win: self.t_win.unwrap_or(d.t_win),
            f_win: self.f_win.unwrap_or(d.f_win),
            edge: self.edge,
        }
    }

    pub fn amplitude(&self, n: usize) -> AmplitudeOptions {
        let d = AmplitudeOptions::default_for(n);
        AmplitudeOptions {
            mode: self.amplitude_mode,
            smooth: self.smooth.unwrap_or(d.smooth),
        }
    }
}
