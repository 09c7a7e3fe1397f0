use crate::args::{AreaRuleArgs, Cli, Command, CompareArgs, LevelSource, LinkArgs, PredictArgs, Side, SvdArgs, TfaArgs};
use crate::config::{load_config, load_matrix, load_model, load_svd, TfaConfig};
use crate::error::{CliError, CliResult};
use crate::output::Run;
use crate::pipeline::{compare_signal, envelope_csv, predict_level, ridge_csv, spwvd_options, LevelPrediction, TargetMetrics};
use ltv_core::channel::{sample_multipath, ChannelModel, ExperimentConfig};
use ltv_core::discretize::{build_channel_matrix, time_band_limiter};
use ltv_core::io;
use ltv_core::linksim::{ber_curve_csv, run_link, BerPoint, LinkConfig, LinkReport};
use ltv_core::rng::derive_seed;
use ltv_core::spectral::{prolate_svd, svd};
use ltv_core::tfa::{ridge_extract, rspwvd, spwvd_with, write_distribution};
use ltv_core::wkb::{magnitude_grid_with, quantized_levels_with, AreaFunction, PowerGradient, DEFAULT_OVERSAMPLE};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

pub const DEFAULT_N: usize = 256;
pub const PREDICTIONS_FILE: &str = "predictions.json";

pub fn dispatch(cli: &Cli) -> CliResult<PathBuf> {
    let name = cli.command.name();
    if cli.config.is_some() && !matches!(cli.command, Command::Synth | Command::Compare(_) | Command::Tfa(_) | Command::Link(_)) {
        return Err(CliError::Config(format!("{name} takes no --config file")));
    }
    match &cli.command {
        Command::Synth => synth(cli),
        Command::Svd(a) => svd_cmd(cli, a),
        Command::Predict(a) => predict(cli, a),
        Command::Compare(a) => compare(cli, a),
        Command::Tfa(a) => tfa(cli, a),
        Command::Link(a) => link(cli, a),
        Command::AreaRule(a) => area_rule(cli, a),
    }
}

fn oversample(cli: &Cli) -> CliResult<usize> {
    match cli.oversample {
        Some(0) => Err(CliError::Config("--oversample must be positive".into())),
        Some(os) => Ok(os),
        None => Ok(DEFAULT_OVERSAMPLE),
    }
}

fn block_len(cli: &Cli) -> CliResult<usize> {
    match cli.n {
        Some(n) if n < 2 => Err(CliError::Config("--n must be at least 2".into())),
        Some(n) => Ok(n),
        None => Ok(DEFAULT_N),
    }
}

fn synth(cli: &Cli) -> CliResult<PathBuf> {
    let mut cfg = match &cli.config {
        Some(p) => load_config::<ExperimentConfig>(p)?,
        None => ExperimentConfig::paper(0),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(n) = cli.n {
        cfg.n = n;
    }
    let model = sample_multipath(&cfg)?;
    let mut run = Run::new(&cli.out, "synth", &cfg)?;
    if let Some(p) = &cli.config {
        run.input("config", p)?;
    }
    run.seed("channel", cfg.seed);
    let mut text = model.to_json()?;
    text.push('\n');
    run.write("model.json", text.as_bytes())?;
    run.finish()
}

#[derive(Serialize)]
struct SvdSettings {
    n: usize,
    source: &'static str,
    band_limit: Option<f64>,
    matrix_csv: bool,
}

fn svd_cmd(cli: &Cli, a: &SvdArgs) -> CliResult<PathBuf> {
    let mut inputs: Vec<(&str, &Path)> = Vec::new();
    let (h, s, source) = if let Some(p) = &a.source.model {
        inputs.push(("model", p));
        let model = load_model(p)?;
        let h = build_channel_matrix(&model, block_len(cli)?)?;
        let s = svd(&h)?;
        (h, s, "model")
    } else if let Some(p) = &a.source.matrix {
        inputs.push(("matrix", p));
        let h = load_matrix(p)?;
        if cli.n.is_some_and(|n| n != h.n()) {
            return Err(CliError::Contract(format!("--n {} but the matrix is {0}x{0}", h.n())));
        }
        let s = svd(&h)?;
        (h, s, "matrix")
    } else {
        let w = a.source.band_limit.expect("clap enforces one source");
        let n = block_len(cli)?;
        let h = time_band_limiter(n, w)?;
        (h, prolate_svd(n, w)?, "band_limit")
    };
    let settings = SvdSettings {
        n: h.n(),
        source,
        band_limit: a.source.band_limit,
        matrix_csv: a.matrix_csv,
    };
    let mut run = Run::new(&cli.out, "svd", &settings)?;
    for (name, p) in inputs {
        run.input(name, p)?;
    }
    run.write_with("matrix.ltvm", |w| io::write_matrix(w, &h))?;
    run.write_with("svd.ltvm", |w| io::write_svd(w, &s, h.ts))?;
    run.write("sigmas.csv", io::sigmas_csv(&s.sigmas).as_bytes())?;
    if a.matrix_csv {
        run.write("matrix.csv", io::matrix_csv(&h).as_bytes())?;
    }
    log::info!("sigma_1 = {}, sigma_N = {}", s.sigmas[0], s.sigmas[s.n() - 1]);
    run.finish()
}

/// One predicted level, as listed in `predictions.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetRecord {
    pub tag: String,
    /// 1-based singular value index, when the level was chosen by index.
    pub index: Option<usize>,
    /// Absent when no level exists for the index.
    pub sigma: Option<f64>,
    pub bubbles: usize,
    pub models: usize,
    /// File holding the [`LevelPrediction`].
    pub file: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Predictions {
    pub n: usize,
    pub ts: f64,
    pub oversample: usize,
    pub source: LevelSource,
    pub targets: Vec<TargetRecord>,
}

#[derive(Serialize)]
struct PredictSettings<'a> {
    n: usize,
    oversample: usize,
    source: LevelSource,
    indices: &'a [usize],
    levels: &'a [f64],
}

fn predict(cli: &Cli, a: &PredictArgs) -> CliResult<PathBuf> {
    let n = block_len(cli)?;
    let os = oversample(cli)?;
    if a.indices.contains(&0) {
        return Err(CliError::Config("--indices are 1-based".into()));
    }
    let model = load_model(&a.model)?;
    let numeric = match (a.source, &a.svd) {
        (LevelSource::Svd, Some(p)) => {
            let (s, _) = load_svd(p)?;
            if s.n() != n {
                return Err(CliError::Contract(format!("SVD has size {} but --n is {n}", s.n())));
            }
            Some(s.sigmas)
        }
        (LevelSource::Svd, None) => return Err(CliError::Config("--source svd needs --svd".into())),
        (LevelSource::AreaRule, _) => None,
    };

    let grid = magnitude_grid_with(&model, n, 1.0, os)?;
    let grad = PowerGradient::new(&grid);
    let area = AreaFunction::new(&grid);
    let levels = quantized_levels_with(&area, grid.max())?;

    let mut run = Run::new(
        &cli.out,
        "predict",
        &PredictSettings {
            n,
            oversample: os,
            source: a.source,
            indices: &a.indices,
            levels: &a.levels,
        },
    )?;
    run.input("model", &a.model)?;
    if let Some(p) = &a.svd {
        run.input("svd", p)?;
    }
    run.write("area_rule.csv", area_rule_csv(&levels).as_bytes())?;

    let mut targets: Vec<(String, Option<usize>, Option<f64>)> = Vec::new();
    for &i in &a.indices {
        let sigma = match &numeric {
            Some(s) => s.get(i - 1).copied(),
            None => levels.iter().find(|l| l.n == i - 1).map(|l| l.sigma),
        };
        if sigma.is_none() {
            log::warn!("no level for index {i}");
        }
        targets.push((i.to_string(), Some(i), sigma));
    }
    for (k, &s) in a.levels.iter().enumerate() {
        targets.push((format!("level{}", k + 1), None, Some(s)));
    }

    let mut records = Vec::new();
    for (tag, index, sigma) in targets {
        let pred = match sigma {
            Some(s) => predict_level(&grid, &grad, s)?,
            None => LevelPrediction::default(),
        };
        let file = format!("prediction_{tag}.json");
        run.write_json(&file, &pred)?;
        for m in &pred.models {
            run.write(&format!("branches_{tag}_b{}.csv", m.bubble), m.model.branch_csv().as_bytes())?;
        }
        records.push(TargetRecord {
            tag,
            index,
            sigma,
            bubbles: pred.bubbles.len(),
            models: pred.models.len(),
            file,
        });
    }
    run.write_json(
        PREDICTIONS_FILE,
        &Predictions {
            n,
            ts: 1.0,
            oversample: os,
            source: a.source,
            targets: records,
        },
    )?;
    run.finish()
}

fn area_rule_csv(levels: &[ltv_core::wkb::QuantizedLevel]) -> String {
    let mut s = String::from("n,sigma\n");
    for l in levels {
        let _ = writeln!(s, "{},{}", l.n, l.sigma);
    }
    s
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> CliResult<T> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetReport {
    pub tag: String,
    pub index: Option<usize>,
    pub sigma: Option<f64>,
    /// Numeric singular value at the index.
    pub numeric_sigma: Option<f64>,
    pub metrics: Option<TargetMetrics>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareReport {
    pub self_reference: bool,
    pub targets: Vec<TargetReport>,
}

#[derive(Serialize)]
struct CompareSettings {
    tfa: TfaConfig,
    self_reference: bool,
}

fn compare(cli: &Cli, a: &CompareArgs) -> CliResult<PathBuf> {
    let cfg: TfaConfig = match &cli.config {
        Some(p) => load_config(p)?,
        None => TfaConfig::default(),
    };
    let list_path = a.predictions.join(PREDICTIONS_FILE);
    let list: Predictions = read_json(&list_path)?;
    let (s, ts) = load_svd(&a.svd)?;
    if s.n() != list.n {
        return Err(CliError::Contract(format!(
            "SVD has size {} but the predictions were made for N = {}",
            s.n(),
            list.n
        )));
    }
    if (ts - list.ts).abs() > 1e-12 * ts.abs() {
        return Err(CliError::Contract(format!("sampling time {ts} differs from the predictions' {}", list.ts)));
    }

    let mut run = Run::new(
        &cli.out,
        "compare",
        &CompareSettings {
            tfa: cfg,
            self_reference: a.self_reference,
        },
    )?;
    run.input("svd", &a.svd)?;
    run.input("predictions", &list_path)?;

    let mut reports = Vec::new();
    for t in &list.targets {
        let pred_path = a.predictions.join(&t.file);
        let pred: LevelPrediction = read_json(&pred_path)?;
        run.input(&t.file, &pred_path)?;
        let numeric_sigma = t.index.and_then(|i| s.sigmas.get(i - 1).copied());
        let signal = if a.self_reference {
            pred.models.first().map(|m| (m.model.evaluate(), Some(0)))
        } else {
            match t.index {
                Some(i) if i <= s.n() => Some((s.left(i - 1), None)),
                Some(i) => return Err(CliError::Contract(format!("index {i} exceeds the SVD size {}", s.n()))),
                None => None,
            }
        };
        let metrics = match signal {
            Some((u, chosen)) if !pred.bubbles.is_empty() => {
                let c = compare_signal(&u, ts, &pred, chosen, &cfg)?;
                run.write(&format!("ridge_{}.csv", t.tag), ridge_csv(&c.ridge).as_bytes())?;
                if let Some(b) = c.metrics.bubble {
                    let m = pred.models.iter().find(|m| m.bubble == b).expect("chosen bubble has a model");
                    run.write(&format!("envelope_{}.csv", t.tag), envelope_csv(&u, &m.model).as_bytes())?;
                }
                Some(c.metrics)
            }
            _ => {
                log::warn!("nothing to compare for target {}", t.tag);
                None
            }
        };
        reports.push(TargetReport {
            tag: t.tag.clone(),
            index: t.index,
            sigma: t.sigma,
            numeric_sigma,
            metrics,
        });
    }
    run.write_json(
        "metrics.json",
        &CompareReport {
            self_reference: a.self_reference,
            targets: reports,
        },
    )?;
    run.finish()
}

#[derive(Serialize)]
struct TfaSettings {
    tfa: TfaConfig,
    index: usize,
    side: Side,
}

#[derive(Serialize)]
struct TfaSummary {
    mass: f64,
    ridge_points: usize,
    ridge_area: f64,
}

fn tfa(cli: &Cli, a: &TfaArgs) -> CliResult<PathBuf> {
    let cfg: TfaConfig = match &cli.config {
        Some(p) => load_config(p)?,
        None => TfaConfig::default(),
    };
    let (s, ts) = load_svd(&a.svd)?;
    if a.index == 0 || a.index > s.n() {
        return Err(CliError::Config(format!("--index must lie in 1..={}", s.n())));
    }
    let x = match a.side {
        Side::Left => s.left(a.index - 1),
        Side::Right => s.right(a.index - 1),
    };
    let opts = spwvd_options(&cfg, s.n(), ts);
    let plain = spwvd_with(&x, &opts)?;
    let reassigned = rspwvd(&x, &opts)?;
    let ridge = ridge_extract(&reassigned, cfg.ridge_threshold)?;

    let mut run = Run::new(
        &cli.out,
        "tfa",
        &TfaSettings {
            tfa: cfg,
            index: a.index,
            side: a.side,
        },
    )?;
    run.input("svd", &a.svd)?;
    let i = a.index;
    run.write_with(&format!("spwvd_{i}.ltvm"), |w| write_distribution(w, &plain))?;
    run.write_with(&format!("rspwvd_{i}.ltvm"), |w| write_distribution(w, &reassigned))?;
    run.write(&format!("rspwvd_{i}.csv"), io::tf_grid_csv(&reassigned.grid).as_bytes())?;
    run.write(&format!("ridge_{i}.csv"), ridge_csv(&ridge).as_bytes())?;
    run.write_json(
        &format!("tfa_{i}.json"),
        &TfaSummary {
            mass: reassigned.mass(),
            ridge_points: ridge.points.len(),
            ridge_area: ridge.hull_area(),
        },
    )?;
    run.finish()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepEntry {
    pub es_n0_db: f64,
    pub report: LinkReport,
}

/// Noise variance giving `es_n0_db` for unit-energy symbols on a unit gain.
pub fn n0_for_db(es_n0_db: f64) -> f64 {
    10f64.powf(-es_n0_db / 10.0)
}

fn link(cli: &Cli, a: &LinkArgs) -> CliResult<PathBuf> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| CliError::Config("link needs a --config file".into()))?;
    let mut cfg: LinkConfig = load_config(path)?;
    if let Some(n) = cli.n {
        cfg.n = n;
    }
    if let Some(s) = cli.seed {
        cfg.seeds.symbols = derive_seed(s, 0);
        cfg.seeds.noise = derive_seed(s, 1);
    }
    let model = match &a.model {
        Some(p) => load_model(p)?,
        None => ChannelModel::identity(),
    };
    if let Some(&bad) = a.sweep.iter().find(|v| !v.is_finite()) {
        return Err(CliError::Config(format!("--sweep value {bad} is not finite")));
    }

    let mut run = Run::new(&cli.out, "link", &cfg)?;
    run.input("config", path)?;
    if let Some(p) = &a.model {
        run.input("model", p)?;
    }
    run.seed("symbols", cfg.seeds.symbols);
    run.seed("noise", cfg.seeds.noise);
    if a.sweep.is_empty() {
        let report = run_link(&model, &cfg)?;
        log::info!("BER {} over {} bits", report.ber, report.bits);
        run.write_json("link_report.json", &report)?;
    } else {
        let mut entries = Vec::new();
        for &db in &a.sweep {
            let point = LinkConfig { n0: n0_for_db(db), ..cfg.clone() };
            entries.push(SweepEntry {
                es_n0_db: db,
                report: run_link(&model, &point)?,
            });
        }
        let points: Vec<BerPoint> = entries
            .iter()
            .map(|e| BerPoint {
                es_n0_db: e.es_n0_db,
                ber: e.report.ber,
                trials: e.report.bits,
            })
            .collect();
        run.write_json("link_report.json", &entries)?;
        run.write("ber.csv", ber_curve_csv(&points).as_bytes())?;
    }
    run.finish()
}

#[derive(Serialize)]
struct AreaRuleSettings {
    n: usize,
    oversample: usize,
}

#[derive(Serialize)]
struct AreaRuleSummary {
    window_area: f64,
    levels: usize,
    /// Numeric singular values at or above the lowest area-rule level.
    numeric_above_lowest_level: Option<usize>,
}

fn area_rule(cli: &Cli, a: &AreaRuleArgs) -> CliResult<PathBuf> {
    let n = block_len(cli)?;
    let os = oversample(cli)?;
    let model = load_model(&a.model)?;
    let numeric = match &a.svd {
        Some(p) => {
            let (s, _) = load_svd(p)?;
            if s.n() != n {
                return Err(CliError::Contract(format!("SVD has size {} but --n is {n}", s.n())));
            }
            Some(s.sigmas)
        }
        None => None,
    };
    let grid = magnitude_grid_with(&model, n, 1.0, os)?;
    let area = AreaFunction::new(&grid);
    let levels = quantized_levels_with(&area, grid.max())?;

    let mut run = Run::new(&cli.out, "area-rule", &AreaRuleSettings { n, oversample: os })?;
    run.input("model", &a.model)?;
    run.write("area_rule.csv", area_rule_csv(&levels).as_bytes())?;
    if let Some(p) = &a.svd {
        run.input("svd", p)?;
    }
    let lowest = levels.last().map(|l| l.sigma);
    if let Some(sigmas) = &numeric {
        let mut s = String::from("index,sigma,area\n");
        for (i, &x) in sigmas.iter().enumerate() {
            let _ = writeln!(s, "{},{x},{}", i + 1, area.eval(x));
        }
        run.write("staircase.csv", s.as_bytes())?;
    }
    run.write_json(
        "area_rule.json",
        &AreaRuleSummary {
            window_area: area.window_area(),
            levels: levels.len(),
            numeric_above_lowest_level: numeric
                .as_ref()
                .zip(lowest)
                .map(|(s, lo)| s.iter().filter(|&&x| x >= lo).count()),
        },
    )?;
    run.finish()
}
