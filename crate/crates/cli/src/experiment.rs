//! Perturbation commands: masking experiments, answer replacement and the
//! iteration ablation.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{Context as _, Result};
use mmshap_core::adapter::AdapterSpec;
use mmshap_core::experiments::{
    iteration_ablation, replace_answers, run_masking_experiment, AblationReference, MaskingReport, ReplacementConfig,
    ReplacementMode,
};
use mmshap_core::io::{read_json, tuple_file_stem};
use mmshap_core::metrics::fmt_f64;
use mmshap_core::{Dataset, Estimator, EstimatorConfig, MaskSpec};
use serde::{Deserialize, Serialize};

use crate::args::{AblateArgs, ExperimentArgs, ReplaceArgs};
use crate::context::{load_attributions, load_dataset, usage, Context};

/// Experiment description read from `--manifest`. Relative paths resolve
/// against the manifest's directory.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct ExperimentManifest {
    dataset: Option<PathBuf>,
    adapter: Option<AdapterSpec>,
    estimator: Option<EstimatorConfig>,
    masks: Vec<MaskSpec>,
    protect_distractors: bool,
    attributions: Option<PathBuf>,
    replacement: Option<ReplacementConfig>,
    output_dir: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
struct ExperimentSummary<'a> {
    dataset: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    replacement: Option<&'a ReplacementConfig>,
    report: &'a MaskingReport,
}

fn resolve(base: &Path, p: PathBuf) -> PathBuf {
    if p.is_absolute() {
        p
    } else {
        base.join(p)
    }
}

fn read_manifest(path: &Path) -> Result<ExperimentManifest> {
    if !path.is_file() {
        return Err(usage(format!("manifest {} does not exist", path.display())));
    }
    let mut m: ExperimentManifest =
        read_json(path).map_err(|e| usage(format!("manifest {}: {e}", path.display())))?;
    let base = path.parent().unwrap_or(Path::new(""));
    m.dataset = m.dataset.map(|p| resolve(base, p));
    m.attributions = m.attributions.map(|p| resolve(base, p));
    m.output_dir = m.output_dir.map(|p| resolve(base, p));
    Ok(m)
}

pub fn experiment(mut ctx: Context, args: &ExperimentArgs) -> Result<()> {
    let mut m = match &args.manifest {
        Some(p) => read_manifest(p)?,
        None => ExperimentManifest::default(),
    };
    // Command-line flags fill what the manifest leaves unset.
    if m.dataset.is_none() {
        m.dataset = args.dataset.clone();
    }
    if m.attributions.is_none() {
        m.attributions = args.attributions.clone();
    }
    if m.masks.is_empty() {
        m.masks = args
            .masks
            .iter()
            .map(|s| s.parse::<MaskSpec>().map_err(|e| usage(format!("--mask {s}: {e}"))))
            .collect::<Result<_>>()?;
    }
    m.protect_distractors |= args.protect_distractors;
    if m.replacement.is_none() {
        if let Some(mode) = &args.replace {
            m.replacement = Some(ReplacementConfig {
                mode: mode.parse::<ReplacementMode>().map_err(|e| usage(format!("--replace: {e}")))?,
                seed: ctx.seed,
                type_compatibility: args.type_compat,
            });
        }
    }
    if let Some(out) = m.output_dir.clone().filter(|_| !ctx.out_explicit) {
        ctx.out = out;
    }
    if m.adapter.is_some() && ctx.adapter.is_none() {
        ctx.adapter = m.adapter.clone();
    }
    let dataset_path = m.dataset.clone().ok_or_else(|| usage("experiment needs a dataset"))?;
    if m.masks.is_empty() {
        m.masks = MaskSpec::table_rows();
    }
    let specs: Vec<MaskSpec> = m
        .masks
        .iter()
        .map(|s| if s.is_sign() { s.protected(s.protect_non_ground_truth || m.protect_distractors) } else { *s })
        .collect();

    let mut dataset = load_dataset(&dataset_path)?;
    let mut eval_path = dataset_path.clone();
    if let Some(cfg) = &m.replacement {
        dataset = replace_answers(&dataset, cfg)?;
        let rel = format!("{}.json", tuple_file_stem(&dataset.name));
        ctx.write_text(&rel, &dataset.to_json())?;
        eval_path = ctx.out.join(rel);
    }
    let attributions = m
        .attributions
        .as_deref()
        .map(|dir| load_attributions(dir, &dataset))
        .transpose()?;
    let adapter = ctx.connect(&eval_path)?;
    let report = run_masking_experiment(&dataset, &*adapter, &specs, attributions.as_ref())?;

    ctx.write_text("masking.csv", &report.to_csv())?;
    ctx.write_json(
        "experiment_summary.json",
        &ExperimentSummary {
            dataset: &dataset.name,
            replacement: m.replacement.as_ref(),
            report: &report,
        },
    )?;
    let estimator = m.estimator.map(|c| (Estimator::MonteCarlo, c));
    ctx.finish("experiment", Some(&dataset_path), estimator)
}

pub fn replace(mut ctx: Context, args: &ReplaceArgs) -> Result<()> {
    let mode = args
        .mode
        .parse::<ReplacementMode>()
        .map_err(|e| usage(format!("--mode: {e}")))?;
    let dataset = load_dataset(&args.dataset)?;
    let cfg = ReplacementConfig {
        mode,
        seed: ctx.seed,
        type_compatibility: args.type_compat,
    };
    let replaced: Dataset = replace_answers(&dataset, &cfg)?;
    ctx.write_text(&format!("{}.json", tuple_file_stem(&replaced.name)), &replaced.to_json())?;
    ctx.finish("replace-answers", Some(&args.dataset), None)
}

pub fn ablate(mut ctx: Context, args: &AblateArgs) -> Result<()> {
    if args.grid.is_empty() || args.grid.contains(&0) {
        return Err(usage("--grid needs positive budgets"));
    }
    if args.seeds == 0 {
        return Err(usage("--seeds must be at least 1"));
    }
    let reference = match args.reference.as_str() {
        "exact" => AblationReference::Exact,
        n => AblationReference::Iterations(
            n.parse()
                .map_err(|_| usage(format!("--reference {n:?}: expected `exact` or a budget")))?,
        ),
    };
    let dataset = load_dataset(&args.dataset)?;
    let tuple = match &args.tuple {
        Some(id) => dataset.get(id).ok_or_else(|| usage(format!("tuple {id} is not in the dataset")))?,
        None => dataset.tuples.first().ok_or_else(|| usage("dataset is empty"))?,
    };
    let adapter = ctx.connect(&args.dataset)?;
    let reward = adapter.bind(tuple).with_context(|| format!("tuple {}", tuple.tuple_id))?;
    let seeds: Vec<u64> = (0..args.seeds).map(|k| ctx.seed.wrapping_add(k)).collect();
    let base = ctx.estimator_config().with_antithetic(!args.no_antithetic);
    let points = iteration_ablation(&*reward, &tuple.layout(), &args.grid, reference, &seeds, &base)?;

    let mut csv = String::from("iterations,mean_mse\n");
    for p in &points {
        let _ = writeln!(csv, "{},{}", p.iterations, fmt_f64(p.mean_mse));
    }
    ctx.write_text("ablation.csv", &csv)?;
    ctx.write_json("ablation.json", &points)?;
    ctx.finish("ablate-iterations", Some(&args.dataset), Some((Estimator::MonteCarlo, base)))
}
