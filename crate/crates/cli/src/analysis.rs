//! Commands that read stored attributions: metrics tables, heatmaps, word
//! reports and frame-ranking agreement.

use std::collections::HashMap;
use std::fmt::Write as _;

use anyhow::{Context as _, Result};
use image::codecs::png::PngEncoder;
use image::{ExtendedColorType, ImageEncoder};
use mmshap_core::experiments::{rank_frames_by_attribution, run_masking_experiment, spearman_correlation};
use mmshap_core::io::read_json;
use mmshap_core::metrics::{aggregate, csv_field, fmt_f64, metrics_csv, score_tuple, AggregateScores, Triple};
use mmshap_core::report::{diverging_rgb, heatmap_matrix, matrix_csv, modality_value_dump, word_report, word_report_csv};
use mmshap_core::{AttributionResult, ClassBasis, Dataset};
use serde::Serialize;

use crate::args::{HeatmapArgs, MetricsArgs, RankCorrArgs, WordReportArgs};
use crate::context::{attributions_dir, load_dataset, require_attributions, usage, Context};

/// Grey for heatmap cells past the end of a short row.
const PAD_RGB: [u8; 3] = [200, 200, 200];

#[derive(Debug, Serialize)]
struct MetricsSummary {
    dataset: String,
    n_tuples: usize,
    /// Full-input accuracy; present when an adapter was given.
    #[serde(skip_serializing_if = "Option::is_none")]
    accuracy: Option<f64>,
    tables: Vec<AggregateScores>,
}

fn ordered<'a>(dataset: &Dataset, found: &'a HashMap<String, AttributionResult>) -> Vec<(&'a AttributionResult, usize)> {
    dataset
        .tuples
        .iter()
        .map(|t| (&found[&t.tuple_id], t.ground_truth))
        .collect()
}

fn parse_bases(s: &str) -> Result<Vec<ClassBasis>> {
    match s {
        "both" => Ok(vec![ClassBasis::GroundTruth, ClassBasis::FalseMean]),
        other => other
            .parse::<ClassBasis>()
            .map(|b| vec![b])
            .map_err(|e| usage(format!("--basis: {e}"))),
    }
}

pub fn metrics(mut ctx: Context, args: &MetricsArgs) -> Result<()> {
    let bases = parse_bases(&args.basis)?;
    let dataset = load_dataset(&args.dataset)?;
    let found = require_attributions(&attributions_dir(&ctx, args.attributions.as_ref()), &dataset)?;

    let accuracy = match &ctx.adapter {
        Some(_) => {
            let adapter = ctx.connect(&args.dataset)?;
            Some(run_masking_experiment(&dataset, &*adapter, &[], None)?.baseline)
        }
        None => None,
    };

    let mut tables = Vec::new();
    let mut table_csv = String::from("basis,mc_v,mc_q,mc_a,pfc_v,pfc_q,pfc_a,accuracy\n");
    for basis in bases {
        let rows = dataset
            .tuples
            .iter()
            .map(|t| score_tuple(&found[&t.tuple_id], t.ground_truth, basis))
            .collect::<Result<Vec<_>, _>>()?;
        let agg = aggregate(&rows)?;
        ctx.write_text(&format!("metrics_{}.csv", basis.as_str()), &metrics_csv(&rows, &agg))?;
        table_csv.push_str(basis.as_str());
        push_triple(&mut table_csv, agg.mc);
        push_triple(&mut table_csv, agg.pfc);
        let _ = writeln!(table_csv, ",{}", accuracy.map(fmt_f64).unwrap_or_default());
        tables.push(agg);
    }
    ctx.write_text("metrics_table.csv", &table_csv)?;
    ctx.write_json(
        "metrics_summary.json",
        &MetricsSummary {
            dataset: dataset.name.clone(),
            n_tuples: dataset.len(),
            accuracy,
            tables,
        },
    )?;
    ctx.finish("metrics", Some(&args.dataset), None)
}

fn push_triple(out: &mut String, t: Option<Triple>) {
    match t {
        Some(t) => t.iter().for_each(|v| {
            let _ = write!(out, ",{}", fmt_f64(*v));
        }),
        None => out.push_str(",,,"),
    }
}

pub fn heatmap(mut ctx: Context, args: &HeatmapArgs) -> Result<()> {
    if args.cell == 0 || args.truncate_to == 0 {
        return Err(usage("--cell and --truncate-to must be positive"));
    }
    let dataset = load_dataset(&args.dataset)?;
    let found = require_attributions(&attributions_dir(&ctx, args.attributions.as_ref()), &dataset)?;
    let rows = ordered(&dataset, &found);
    let matrix = heatmap_matrix(&rows, args.truncate_to);
    ctx.write_text("heatmap.csv", &matrix_csv(&matrix))?;
    ctx.write_bytes("heatmap.png", &render_png(&matrix, args.cell)?)?;
    ctx.write_text("modality_values.csv", &modality_value_dump(&rows))?;
    ctx.finish("heatmap", Some(&args.dataset), None)
}

/// Diverging raster, one `cell`-pixel square per matrix entry.
fn render_png(matrix: &[Vec<f64>], cell: u32) -> Result<Vec<u8>> {
    let cols = matrix.iter().map(Vec::len).max().unwrap_or(0).max(1) as u32;
    let rows = matrix.len().max(1) as u32;
    let (w, h) = (cols * cell, rows * cell);
    let mut pixels = Vec::with_capacity((w * h * 3) as usize);
    for y in 0..h {
        let row = matrix.get((y / cell) as usize);
        for x in 0..w {
            let rgb = row
                .and_then(|r| r.get((x / cell) as usize))
                .map_or(PAD_RGB, |&v| diverging_rgb(v));
            pixels.extend_from_slice(&rgb);
        }
    }
    let mut png = Vec::new();
    PngEncoder::new(&mut png)
        .write_image(&pixels, w, h, ExtendedColorType::Rgb8)
        .context("encoding heatmap PNG")?;
    Ok(png)
}

pub fn word_report_cmd(mut ctx: Context, args: &WordReportArgs) -> Result<()> {
    let dataset = load_dataset(&args.dataset)?;
    let found = require_attributions(&attributions_dir(&ctx, args.attributions.as_ref()), &dataset)?;
    let pairs: Vec<_> = dataset.tuples.iter().map(|t| (t, &found[&t.tuple_id])).collect();
    let stats = word_report(&pairs, !args.raw);
    ctx.write_text("words.csv", &word_report_csv(&stats))?;
    ctx.finish("word-report", Some(&args.dataset), None)
}

pub fn rank_corr(mut ctx: Context, args: &RankCorrArgs) -> Result<()> {
    let dataset = load_dataset(&args.dataset)?;
    if !args.rankings.is_file() {
        return Err(usage(format!("rankings file {} does not exist", args.rankings.display())));
    }
    let rankings: HashMap<String, Vec<usize>> =
        read_json(&args.rankings).with_context(|| format!("reading {}", args.rankings.display()))?;
    if let Some(id) = rankings.keys().find(|id| dataset.get(id).is_none()) {
        anyhow::bail!("ranking for unknown tuple {id}");
    }
    let subset = Dataset::new(
        dataset.name.clone(),
        dataset
            .tuples
            .iter()
            .filter(|t| rankings.contains_key(&t.tuple_id))
            .cloned()
            .collect(),
    );
    let found = require_attributions(&attributions_dir(&ctx, args.attributions.as_ref()), &subset)?;

    let mut csv = String::from("tuple_id,spearman\n");
    let mut total = 0.0;
    for t in &subset.tuples {
        let ours = rank_frames_by_attribution(&found[&t.tuple_id], t.ground_truth)?;
        let rho = spearman_correlation(&rankings[&t.tuple_id], &ours).with_context(|| format!("tuple {}", t.tuple_id))?;
        total += rho;
        let _ = writeln!(csv, "{},{}", csv_field(&t.tuple_id), fmt_f64(rho));
    }
    if !subset.is_empty() {
        let _ = writeln!(csv, "mean,{}", fmt_f64(total / subset.len() as f64));
    }
    ctx.write_text("rank_corr.csv", &csv)?;
    ctx.finish("rank-corr", Some(&args.dataset), None)
}
