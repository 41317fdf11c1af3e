use anyhow::{Context as _, Result};
use mmshap_core::io::{attribution_path, partial_attribution_path, write_json};
use mmshap_core::shapley::{exact_shapley_with_cap, monte_carlo_shapley, ShapleyError};
use mmshap_core::Estimator;

use crate::args::AttributeArgs;
use crate::context::{load_dataset, usage, Context};

/// Attributes every selected tuple, one file each. Tuples whose file already
/// exists are skipped unless `--force`. A failing tuple stops the run and
/// leaves its partial estimate next to the completed files.
pub fn run(mut ctx: Context, args: &AttributeArgs) -> Result<()> {
    let dataset = load_dataset(&args.dataset)?;
    for id in &args.tuples {
        if dataset.get(id).is_none() {
            return Err(usage(format!("tuple {id} is not in the dataset")));
        }
    }
    let config = ctx
        .estimator_config()
        .with_antithetic(!args.no_antithetic)
        .with_cache(!args.no_cache);
    let estimator = if args.exact { Estimator::Exact } else { Estimator::MonteCarlo };
    if args.exact {
        if let Some(t) = dataset.tuples.iter().find(|t| t.layout().len() > config.exact_cap) {
            return Err(usage(format!(
                "tuple {} has {} features; exact enumeration is capped at {}",
                t.tuple_id,
                t.layout().len(),
                config.exact_cap
            )));
        }
    }
    let adapter = ctx.connect(&args.dataset)?;

    for tuple in &dataset.tuples {
        if !args.tuples.is_empty() && !args.tuples.contains(&tuple.tuple_id) {
            continue;
        }
        let rel = format!("attributions/{}", file_name(&tuple.tuple_id));
        let path = ctx.output(&rel);
        if path.is_file() && !args.force {
            eprintln!("{}: kept existing result", tuple.tuple_id);
            continue;
        }
        let reward = adapter.bind(tuple).with_context(|| format!("tuple {}", tuple.tuple_id))?;
        let layout = tuple.layout();
        let outcome = match estimator {
            Estimator::Exact => exact_shapley_with_cap(&*reward, &layout, config.exact_cap),
            Estimator::MonteCarlo => monte_carlo_shapley(&*reward, &layout, &config),
        };
        match outcome {
            Ok(mut attr) => {
                attr.tuple_id = tuple.tuple_id.clone();
                write_json(&path, &attr).with_context(|| format!("writing {}", path.display()))?;
                let _ = std::fs::remove_file(partial_attribution_path(&ctx.out.join("attributions"), &tuple.tuple_id));
                eprintln!("{}: {} evaluations", tuple.tuple_id, attr.evaluations);
            }
            Err(err) => {
                if let ShapleyError::RewardFailed { partial: Some(p), .. } = &err {
                    let mut p = (**p).clone();
                    p.tuple_id = tuple.tuple_id.clone();
                    let partial_path = partial_attribution_path(&ctx.out.join("attributions"), &tuple.tuple_id);
                    write_json(&partial_path, &p).with_context(|| format!("writing {}", partial_path.display()))?;
                }
                ctx.finish("attribute", Some(&args.dataset), Some((estimator, config)))?;
                return Err(anyhow::Error::new(err).context(format!("tuple {}", tuple.tuple_id)));
            }
        }
    }
    ctx.finish("attribute", Some(&args.dataset), Some((estimator, config)))
}

fn file_name(tuple_id: &str) -> String {
    attribution_path(std::path::Path::new(""), tuple_id)
        .display()
        .to_string()
}
