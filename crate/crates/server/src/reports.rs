//! Report files written by `typecase analyze`: one CSV per table plus a
//! `report.json` with the scalar results.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde_json::{json, Value};

use typecase_core::analytics::{
    bbox_anomalies, block_embedding, co_appearance, graph_density, line_rhythm, reuse_counts,
    same_spread_duplicates, spread_graph, zipf_fit,
};
use typecase_core::model::{summary, IndexedDataset, SpreadId};

pub struct AnalyzeOptions {
    pub min_shared: u32,
    pub k: f64,
}

fn write_csv<R: serde::Serialize>(
    path: &Path,
    header: &[&str],
    rows: impl IntoIterator<Item = R>,
) -> Result<()> {
    let mut w =
        csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    w.write_record(header)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

/// Error results are recorded in the report instead of aborting it.
fn or_error<T: serde::Serialize, E: std::fmt::Display>(r: Result<T, E>) -> Value {
    match r {
        Ok(v) => json!(v),
        Err(e) => json!({ "error": e.to_string() }),
    }
}

/// Writes every report into `out`, creating it if needed, and returns the
/// paths written.
pub fn write_reports(
    ix: &IndexedDataset,
    out: &Path,
    opts: &AnalyzeOptions,
) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let ds = ix.dataset();
    let mut written = Vec::new();
    let mut file = |name: &str| {
        let p = out.join(name);
        written.push(p.clone());
        p
    };

    let reuse = reuse_counts(ix);
    write_csv(
        &file("reuse.csv"),
        &["block_id", "text", "jibo", "count"],
        reuse.iter().map(|(b, n)| {
            let key = &ds.blocks[b].key;
            (b.0, key.text.as_str(), key.jibo.as_deref().unwrap_or(""), n)
        }),
    )?;

    let duplicates = same_spread_duplicates(ix);
    write_csv(
        &file("duplicates.csv"),
        &["spread_id", "block_id", "count"],
        duplicates
            .iter()
            .map(|d| (d.spread_id.0, d.block_id.0, d.count)),
    )?;

    let anomalies = bbox_anomalies(ix, opts.k);
    write_csv(
        &file("anomalies.csv"),
        &[
            "segment_id",
            "spread_id",
            "area",
            "score",
            "area_outlier",
            "off_unit_height",
        ],
        anomalies.iter().map(|a| {
            (
                a.segment_id.0,
                a.spread_id.0,
                a.area,
                a.score,
                a.area_outlier,
                a.off_unit_height,
            )
        }),
    )?;

    let matrix = co_appearance(ix, None);
    let ids = matrix.block_ids();
    write_csv(
        &file("coappearance.csv"),
        &["block_a", "block_b", "shared_spreads"],
        matrix.triplets().map(|(i, j, v)| (ids[i].0, ids[j].0, v)),
    )?;

    let graph = spread_graph(ix, opts.min_shared);
    write_csv(
        &file("graph.csv"),
        &["spread_u", "spread_v", "shared_blocks"],
        graph.edges.iter().map(|e| (e.u.0, e.v.0, e.weight)),
    )?;

    let mut rhythm = Vec::new();
    for s in 0..ix.n_spreads() as u32 {
        for line in line_rhythm(ix, SpreadId(s))? {
            let units: Vec<String> = line.units.iter().map(u32::to_string).collect();
            rhythm.push((s, line.line_index, units.join(" ")));
        }
    }
    write_csv(
        &file("rhythm.csv"),
        &["spread_id", "line_index", "units"],
        rhythm,
    )?;

    let counts: Vec<u64> = reuse.values().map(|&n| n as u64).collect();
    let embedding = block_embedding(&matrix, 2)
        .map(|e| json!({ "eigenvalues": e.eigenvalues, "iterations": e.iterations }));
    let report = json!({
        "summary": summary(ix),
        "zipf": or_error(zipf_fit(&counts)),
        "graph": {
            "min_shared": opts.min_shared,
            "n_edges": graph.edges.len(),
            "density": or_error(graph_density(&graph)),
        },
        "embedding": or_error(embedding),
        "duplicates": duplicates.len(),
        "anomalies": { "k": opts.k, "flagged": anomalies.len() },
    });
    let path = file("report.json");
    fs::write(&path, serde_json::to_string_pretty(&report)? + "\n")
        .with_context(|| format!("writing {}", path.display()))?;
    Ok(written)
}
