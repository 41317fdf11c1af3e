use std::collections::HashMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{Context as _, Result};
use mmshap_core::adapter::{Adapter, AdapterSpec};
use mmshap_core::io::{attribution_path, read_json, write_atomic, write_json};
use mmshap_core::shapley::DEFAULT_ITERATIONS;
use mmshap_core::{AttributionResult, Dataset, Estimator, EstimatorConfig, ENGINE_VERSION};
use serde::Serialize;

use crate::args::GlobalArgs;

/// Bad invocation or unusable input; reported with exit code 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

pub const DEFAULT_OUT: &str = "mmshap-out";

pub struct Context {
    pub seed: u64,
    pub iterations: usize,
    pub adapter: Option<AdapterSpec>,
    pub out: PathBuf,
    pub timeout: Duration,
    /// False when `--out` was not given.
    pub out_explicit: bool,
    outputs: Vec<String>,
}

impl Context {
    pub fn from_args(g: &GlobalArgs) -> Result<Self> {
        let adapter = g
            .adapter
            .as_deref()
            .map(|s| s.parse::<AdapterSpec>().map_err(|e| usage(e.to_string())))
            .transpose()?;
        if g.iterations == Some(0) {
            return Err(usage("--iterations must be at least 1"));
        }
        if !(g.timeout.is_finite() && g.timeout > 0.0) {
            return Err(usage("--timeout must be a positive number of seconds"));
        }
        Ok(Self {
            seed: g.seed.unwrap_or(0),
            iterations: g.iterations.unwrap_or(DEFAULT_ITERATIONS),
            adapter,
            out: g.out.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUT)),
            timeout: Duration::from_secs_f64(g.timeout),
            out_explicit: g.out.is_some(),
            outputs: Vec::new(),
        })
    }

    pub fn estimator_config(&self) -> EstimatorConfig {
        EstimatorConfig::default()
            .with_iterations(self.iterations)
            .with_seed(self.seed)
    }

    pub fn connect(&self, dataset_path: &Path) -> Result<Box<dyn Adapter>> {
        let spec = self
            .adapter
            .as_ref()
            .ok_or_else(|| usage("this command needs --adapter"))?;
        connect(spec, dataset_path, self.timeout)
    }

    /// Path inside the output directory, remembered for the run manifest.
    pub fn output(&mut self, rel: &str) -> PathBuf {
        self.outputs.push(rel.to_string());
        self.out.join(rel)
    }

    pub fn write_text(&mut self, rel: &str, text: &str) -> Result<()> {
        let path = self.output(rel);
        write_atomic(&path, text.as_bytes()).with_context(|| format!("writing {}", path.display()))
    }

    pub fn write_json<T: Serialize + ?Sized>(&mut self, rel: &str, value: &T) -> Result<()> {
        let path = self.output(rel);
        write_json(&path, value).with_context(|| format!("writing {}", path.display()))
    }

    pub fn write_bytes(&mut self, rel: &str, bytes: &[u8]) -> Result<()> {
        let path = self.output(rel);
        write_atomic(&path, bytes).with_context(|| format!("writing {}", path.display()))
    }

    /// Writes `<out>/<command>.manifest.json` describing this run.
    pub fn finish(self, command: &str, dataset: Option<&Path>, estimator: Option<(Estimator, EstimatorConfig)>) -> Result<()> {
        let manifest = RunManifest {
            engine_version: ENGINE_VERSION.to_string(),
            command: command.to_string(),
            dataset: dataset.map(|p| p.display().to_string()),
            adapter: self.adapter.as_ref().map(ToString::to_string),
            estimator: estimator.as_ref().map(|e| e.0),
            estimator_config: estimator.map(|e| e.1),
            outputs: self.outputs,
            out_dir: self.out.display().to_string(),
        };
        let path = self.out.join(format!("{command}.manifest.json"));
        write_json(&path, &manifest).with_context(|| format!("writing {}", path.display()))
    }
}

#[derive(Debug, Serialize)]
struct RunManifest {
    engine_version: String,
    command: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    dataset: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    adapter: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    estimator: Option<Estimator>,
    #[serde(skip_serializing_if = "Option::is_none")]
    estimator_config: Option<EstimatorConfig>,
    outputs: Vec<String>,
    out_dir: String,
}

pub fn connect(spec: &AdapterSpec, dataset_path: &Path, timeout: Duration) -> Result<Box<dyn Adapter>> {
    spec.connect(&dataset_path.display().to_string(), timeout)
        .with_context(|| format!("connecting to adapter {spec}"))
}

pub fn load_dataset(path: &Path) -> Result<Dataset> {
    if !path.is_file() {
        return Err(usage(format!("dataset {} does not exist", path.display())));
    }
    Dataset::load(path).map_err(|e| usage(format!("dataset {}: {e}", path.display())))
}

/// Attribution files found for the dataset's tuples, keyed by tuple id.
/// Each result gets the tuple's full layout back (the choice table is not
/// serialized); a shape disagreement is an error.
pub fn load_attributions(dir: &Path, dataset: &Dataset) -> Result<HashMap<String, AttributionResult>> {
    if !dir.is_dir() {
        return Err(usage(format!("attribution directory {} does not exist", dir.display())));
    }
    let mut found = HashMap::new();
    for t in &dataset.tuples {
        let path = attribution_path(dir, &t.tuple_id);
        if !path.is_file() {
            continue;
        }
        let mut attr: AttributionResult = read_json(&path).with_context(|| format!("reading {}", path.display()))?;
        let layout = t.layout();
        if !attr.layout.same_shape(&layout) || attr.n_features() != layout.len() {
            anyhow::bail!(
                "{}: attribution shape does not match tuple {} (was the dataset changed?)",
                path.display(),
                t.tuple_id
            );
        }
        if attr.n_classes() != t.n_choices() {
            anyhow::bail!("{}: {} classes for a {}-choice tuple", path.display(), attr.n_classes(), t.n_choices());
        }
        attr.layout = layout;
        attr.tuple_id = t.tuple_id.clone();
        found.insert(t.tuple_id.clone(), attr);
    }
    Ok(found)
}

/// Like [`load_attributions`] but every tuple must be covered.
pub fn require_attributions(dir: &Path, dataset: &Dataset) -> Result<HashMap<String, AttributionResult>> {
    let found = load_attributions(dir, dataset)?;
    let missing: Vec<&str> = dataset
        .tuples
        .iter()
        .filter(|t| !found.contains_key(&t.tuple_id))
        .map(|t| t.tuple_id.as_str())
        .collect();
    if !missing.is_empty() {
        anyhow::bail!("no attributions in {} for: {}", dir.display(), missing.join(", "));
    }
    Ok(found)
}

pub fn attributions_dir(ctx: &Context, explicit: Option<&PathBuf>) -> PathBuf {
    explicit.cloned().unwrap_or_else(|| ctx.out.join("attributions"))
}
