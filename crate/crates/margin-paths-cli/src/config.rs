//! Run configuration: the JSON config file, the loss and dataset shorthand
//! grammars, and the radius-grid builder shared by the subcommands.

use anyhow::{anyhow, bail, Context, Result};
use margin_paths::data::{
    default_clouds_spec, load_csv, make_clouds, make_margin_scaling_dataset, Dataset,
};
use margin_paths::losses::{
    make_exponential, make_figure_poly, make_logistic, make_poly_tail, splice_exp_to_recip,
    splice_recip_to_exp, Loss,
};
use serde::Deserialize;
use std::path::{Path, PathBuf};

/// Environment variable giving the default output directory.
pub const OUT_ENV: &str = "MARGIN_PATHS_OUT";

/// Fields a JSON config file may set; explicit command-line flags override
/// them. Each subcommand reads only the fields it documents and ignores the
/// rest, but unknown keys are rejected outright.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    /// Loss spec: shorthand string, path to a loss JSON document, an inline
    /// document, or (for compare) an array of those.
    pub loss: Option<serde_json::Value>,
    pub data: Option<String>,
    pub seed: Option<u64>,
    pub normalize: Option<bool>,
    pub out: Option<PathBuf>,
    pub tol: Option<f64>,
    pub max_steps: Option<usize>,
    pub eta: Option<f64>,
    pub record_every: Option<usize>,
    pub target_norm: Option<f64>,
    pub target_risk: Option<f64>,
    pub b_max: Option<f64>,
    pub grid_factor: Option<f64>,
    pub angle_gate: Option<f64>,
    pub jobs: Option<usize>,
    pub b: Option<f64>,
    pub ns: Option<Vec<usize>>,
    pub n: Option<usize>,
    pub b0: Option<f64>,
    pub switches: Option<usize>,
    pub grid_lo: Option<f64>,
    pub grid_hi: Option<f64>,
    pub grid_points: Option<usize>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        match path {
            None => Ok(FileConfig::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .with_context(|| format!("reading config {}", p.display()))?;
                serde_json::from_str(&text)
                    .with_context(|| format!("parsing config {}", p.display()))
            }
        }
    }
}

/// Output directory precedence: flag, config, $MARGIN_PATHS_OUT, ./out.
pub fn resolve_out(flag: Option<PathBuf>, cfg: &FileConfig) -> PathBuf {
    flag.or_else(|| cfg.out.clone())
        .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"))
}

/// A parsed loss plus the key that names its per-job file and orders the
/// merge.
#[derive(Debug, Clone)]
pub struct LossEntry {
    pub key: String,
    pub loss: Loss,
}

/// Key/value parameters of a shorthand spec, with unknown-key detection.
struct Params {
    context: String,
    pairs: Vec<(String, String)>,
    used: Vec<bool>,
}

impl Params {
    fn empty(context: &str) -> Self {
        Params {
            context: context.to_string(),
            pairs: Vec::new(),
            used: Vec::new(),
        }
    }

    fn parse(context: &str, text: &str) -> Result<Self> {
        let mut pairs: Vec<(String, String)> = Vec::new();
        for part in text.split(',') {
            let part = part.trim();
            let (k, v) = part
                .split_once('=')
                .ok_or_else(|| anyhow!("{context}: expected key=value, got {part:?}"))?;
            let (k, v) = (k.trim(), v.trim());
            if k.is_empty() || v.is_empty() {
                bail!("{context}: expected key=value, got {part:?}");
            }
            if pairs.iter().any(|(pk, _)| pk == k) {
                bail!("{context}: duplicate parameter {k}");
            }
            pairs.push((k.to_string(), v.to_string()));
        }
        let used = vec![false; pairs.len()];
        Ok(Params {
            context: context.to_string(),
            pairs,
            used,
        })
    }

    fn take(&mut self, key: &str) -> Option<String> {
        let idx = self.pairs.iter().position(|(k, _)| k == key)?;
        self.used[idx] = true;
        Some(self.pairs[idx].1.clone())
    }

    fn take_f64(&mut self, key: &str) -> Result<Option<f64>> {
        match self.take(key) {
            None => Ok(None),
            Some(v) => v
                .parse::<f64>()
                .map(Some)
                .map_err(|_| anyhow!("{}: parameter {key} is not a number: {v:?}", self.context)),
        }
    }

    fn take_usize(&mut self, key: &str) -> Result<Option<usize>> {
        match self.take(key) {
            None => Ok(None),
            Some(v) => v
                .parse::<usize>()
                .map(Some)
                .map_err(|_| anyhow!("{}: parameter {key} is not a count: {v:?}", self.context)),
        }
    }

    fn take_u64(&mut self, key: &str) -> Result<Option<u64>> {
        match self.take(key) {
            None => Ok(None),
            Some(v) => v
                .parse::<u64>()
                .map(Some)
                .map_err(|_| anyhow!("{}: parameter {key} is not a seed: {v:?}", self.context)),
        }
    }

    fn require_f64(&mut self, key: &str) -> Result<f64> {
        self.take_f64(key)?
            .ok_or_else(|| anyhow!("{}: missing parameter {key}=", self.context))
    }

    fn require_usize(&mut self, key: &str) -> Result<usize> {
        self.take_usize(key)?
            .ok_or_else(|| anyhow!("{}: missing parameter {key}=", self.context))
    }

    fn finish(self) -> Result<()> {
        for ((k, _), used) in self.pairs.iter().zip(&self.used) {
            if !used {
                bail!("{}: unknown parameter {k}", self.context);
            }
        }
        Ok(())
    }
}

fn sanitize_key(raw: &str) -> String {
    raw.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || matches!(c, '.' | '-' | '_') {
                c
            } else {
                '-'
            }
        })
        .collect()
}

fn spec_params(spec: &str) -> Result<(&str, Params)> {
    match spec.split_once(':') {
        Some((family, rest)) => Ok((family, Params::parse(spec, rest)?)),
        None => Ok((spec, Params::empty(spec))),
    }
}

/// Parses one loss spec: a shorthand (`exp[:a=,b=]`, `logistic`,
/// `poly:b=<value-tail exponent>[,a=]`, `figpoly:p=`,
/// `splice-exp-recip[:c0=]`, `splice-recip-exp[:c0=]`) or a path to a loss
/// JSON document (recognized by a `/` or a `.json` suffix).
pub fn parse_loss_spec(spec: &str) -> Result<LossEntry> {
    let spec = spec.trim();
    if spec.contains('/') || spec.ends_with(".json") {
        let text = std::fs::read_to_string(spec)
            .with_context(|| format!("reading loss document {spec}"))?;
        let loss =
            Loss::from_json(&text).with_context(|| format!("parsing loss document {spec}"))?;
        let stem = Path::new(spec)
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| spec.to_string());
        return Ok(LossEntry {
            key: sanitize_key(&stem),
            loss,
        });
    }
    let (family, mut params) = spec_params(spec)?;
    let loss = match family {
        "exp" => {
            let a = params.take_f64("a")?.unwrap_or(1.0);
            let b = params.take_f64("b")?.unwrap_or(1.0);
            make_exponential(a, b)?
        }
        "logistic" => make_logistic(),
        "poly" => {
            // b is the value-tail exponent (the loss decays like z^-b), so
            // the derivative-tail constructor gets b + 1
            let b = params.require_f64("b")?;
            let a = params.take_f64("a")?.unwrap_or(1.0);
            make_poly_tail(a, b + 1.0)?
        }
        "figpoly" => make_figure_poly(params.require_f64("p")?)?,
        "splice-exp-recip" => splice_exp_to_recip(params.take_f64("c0")?.unwrap_or(1.0))?.loss,
        "splice-recip-exp" => splice_recip_to_exp(params.take_f64("c0")?.unwrap_or(1.0))?.loss,
        other => bail!(
            "unknown loss family {other:?}; expected exp, logistic, poly, figpoly, \
             splice-exp-recip, splice-recip-exp, or a path to a loss JSON document"
        ),
    };
    params.finish()?;
    Ok(LossEntry {
        key: sanitize_key(spec),
        loss,
    })
}

fn inline_loss(doc: &serde_json::Value) -> Result<LossEntry> {
    let loss = Loss::from_json(&doc.to_string()).context("parsing inline loss document")?;
    let key = sanitize_key(&loss.name);
    Ok(LossEntry { key, loss })
}

fn check_distinct_keys(entries: &[LossEntry]) -> Result<()> {
    for (i, e) in entries.iter().enumerate() {
        if entries[..i].iter().any(|prev| prev.key == e.key) {
            bail!("duplicate loss key {:?}; jobs need distinct keys", e.key);
        }
    }
    Ok(())
}

/// Parses the config file's `loss` value: a spec string, an inline loss
/// document, or an array mixing the two.
pub fn parse_loss_value(value: &serde_json::Value) -> Result<Vec<LossEntry>> {
    let entries = match value {
        serde_json::Value::String(s) => vec![parse_loss_spec(s)?],
        serde_json::Value::Object(_) => vec![inline_loss(value)?],
        serde_json::Value::Array(items) => {
            let mut out = Vec::new();
            for item in items {
                match item {
                    serde_json::Value::String(s) => out.push(parse_loss_spec(s)?),
                    serde_json::Value::Object(_) => out.push(inline_loss(item)?),
                    other => bail!("loss array entries must be specs or documents, got {other}"),
                }
            }
            out
        }
        other => bail!("loss must be a spec string, a document, or an array, got {other}"),
    };
    if entries.is_empty() {
        bail!("loss list is empty");
    }
    check_distinct_keys(&entries)?;
    Ok(entries)
}

/// Resolves the losses for a subcommand: `--loss` occurrences win, then the
/// config's `loss` value.
pub fn resolve_losses(flags: &[String], cfg: &FileConfig) -> Result<Vec<LossEntry>> {
    if !flags.is_empty() {
        let entries: Vec<LossEntry> = flags
            .iter()
            .map(|s| parse_loss_spec(s))
            .collect::<Result<_>>()?;
        check_distinct_keys(&entries)?;
        return Ok(entries);
    }
    match &cfg.loss {
        Some(value) => parse_loss_value(value),
        None => bail!("no loss given; pass --loss or set \"loss\" in the config"),
    }
}

/// Like [`resolve_losses`] but for subcommands that take exactly one loss.
pub fn resolve_loss(flag: Option<&String>, cfg: &FileConfig) -> Result<LossEntry> {
    let flags: Vec<String> = flag.cloned().into_iter().collect();
    let mut entries = resolve_losses(&flags, cfg)?;
    if entries.len() != 1 {
        bail!("this subcommand takes a single loss, got {}", entries.len());
    }
    Ok(entries.pop().unwrap())
}

/// A parsed dataset plus a canonical description of where it came from.
#[derive(Debug, Clone)]
pub struct DataSource {
    pub dataset: Dataset,
    pub describe: String,
}

fn looks_like_path(spec: &str) -> bool {
    spec.contains('/') || spec.ends_with(".csv")
}

/// Parses a dataset spec: `margin_scaling:n=<count>`, `clouds[:seed=<seed>]`,
/// or a path to a CSV file (recognized by a `/` or a `.csv` suffix). `seed`
/// backs generator specs that omit `seed=`; `normalize` rescales CSV
/// datasets into the unit ball instead of rejecting oversized points.
pub fn parse_data_spec(spec: &str, seed: Option<u64>, normalize: bool) -> Result<DataSource> {
    let spec = spec.trim();
    if looks_like_path(spec) {
        let dataset = load_csv(Path::new(spec), normalize)
            .with_context(|| format!("loading dataset {spec}"))?;
        return Ok(DataSource {
            dataset,
            describe: spec.to_string(),
        });
    }
    let (family, mut params) = spec_params(spec)?;
    let source = match family.replace('-', "_").as_str() {
        "margin_scaling" => {
            let n = params.require_usize("n")?;
            DataSource {
                dataset: make_margin_scaling_dataset(n)?,
                describe: format!("margin_scaling:n={n}"),
            }
        }
        "clouds" => {
            let seed = params.take_u64("seed")?.or(seed).unwrap_or(0);
            DataSource {
                dataset: make_clouds(&default_clouds_spec(), seed)?,
                describe: format!("clouds:seed={seed}"),
            }
        }
        other => bail!(
            "unknown dataset spec {other:?}; expected margin_scaling:n=<count>, \
             clouds[:seed=<seed>], or a path to a CSV file"
        ),
    };
    params.finish()?;
    Ok(source)
}

/// True when the spec names a generator rather than a file.
pub fn is_generator_spec(spec: &str) -> bool {
    !looks_like_path(spec.trim())
}

/// Strictly increasing radii {1, f, f^2, ...} ending exactly at `b_max`.
pub fn radius_grid(b_max: f64, factor: f64) -> Result<Vec<f64>> {
    if !(b_max.is_finite() && b_max >= 1.0) {
        bail!("bmax must be a finite number >= 1, got {b_max}");
    }
    if !(factor.is_finite() && factor > 1.0) {
        bail!("grid factor must be a finite number > 1, got {factor}");
    }
    let mut bs = vec![1.0];
    loop {
        let next = bs.last().unwrap() * factor;
        if next >= b_max * (1.0 - 1e-12) {
            break;
        }
        bs.push(next);
    }
    if *bs.last().unwrap() < b_max {
        bs.push(b_max);
    }
    Ok(bs)
}
