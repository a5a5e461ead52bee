//! End-to-end acceptance checks. Runs without the test harness so every
//! criterion prints exactly one PASS/FAIL line; exits non-zero on any failure.

mod common;

use std::collections::BTreeSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use axum::http::{Method, StatusCode};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256StarStar;
use serde_json::json;

use common::{client_for, percent_encode, Client};
use typecase_core::analytics::{
    bbox_anomalies, block_embedding, co_appearance, embed_matrix, graph_density,
    partition_modularity, reuse_counts, same_spread_duplicates, spread_graph, zipf_fit,
};
use typecase_core::curation::{CurationState, EditLog};
use typecase_core::ingest::{export_dataset, parse_dataset};
use typecase_core::model::build_indexes;
use typecase_core::raster::{otsu_threshold, GrayRaster};
use typecase_core::synth::{
    generate, BlocksPerCharacter, PartitionConfig, Pool, SynthBook, SynthConfig, UsageDistribution,
};
use typecase_testkit::{
    brute_co_appearance, brute_spread_edges, exhaustive_otsu, partition_violations, pca_reference,
    random_dataset, valid_edit,
};

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn synth(cfg: &SynthConfig) -> Result<SynthBook, String> {
    generate(cfg).map_err(|e| format!("seed {}: {e}", cfg.seed))
}

fn round_trip() -> Check {
    let start = Instant::now();
    let mut rng = Xoshiro256StarStar::seed_from_u64(100);
    let (mut segments, mut partitioned) = (0, 0);
    for seed in 0..50u64 {
        let lines = rng.random_range(2..=6u32);
        let per_line = rng.random_range(3..=8u32);
        let chars = rng.random_range((lines * per_line).max(10)..=80u32);
        let blocks_per_character = if rng.random_bool(0.5) {
            BlocksPerCharacter::Constant {
                count: rng.random_range(1..=3),
            }
        } else {
            BlocksPerCharacter::Zipf {
                s: rng.random_range(0.5..2.0),
                max: 4,
            }
        };
        let min_spreads = (chars * 4).div_ceil(lines * per_line) + 2;
        let n_spreads = min_spreads.max(rng.random_range(4..=30u32));
        let cfg = SynthConfig {
            seed,
            n_characters: chars,
            blocks_per_character,
            usage: if rng.random_bool(0.5) {
                UsageDistribution::Uniform
            } else {
                UsageDistribution::Zipf { s: 1.0 }
            },
            n_spreads,
            lines_per_spread: lines,
            segments_per_line: per_line,
            planted_duplicates: rng.random_range(0..=3),
            planted_oversize: rng.random_range(0..=3),
            // each volume's pool must fill a spread without repeats
            partition: (chars >= 3 * lines * per_line && rng.random_bool(0.5)).then_some(
                PartitionConfig {
                    boundary_spread: n_spreads / 2,
                    pool_overlap_fraction: 0.2,
                },
            ),
            ..SynthConfig::default()
        };
        let book = synth(&cfg)?;
        segments += book.dataset.segments.len();
        partitioned += usize::from(cfg.partition.is_some());
        let text = export_dataset(&book.dataset, &EditLog::default());
        let parsed = parse_dataset(&text).map_err(|e| format!("seed {seed}: {e}"))?;
        ensure(parsed.dataset == book.dataset, || {
            format!("seed {seed}: parse(export) differs")
        })?;
        ensure(
            export_dataset(&parsed.dataset, &parsed.edit_log) == text,
            || format!("seed {seed}: re-export differs"),
        )?;
        let again = export_dataset(&synth(&cfg)?.dataset, &EditLog::default());
        ensure(again == text, || {
            format!("seed {seed}: export not deterministic")
        })?;
    }
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(30), || {
        format!("took {elapsed:.1?}")
    })?;
    Ok(format!(
        "50 books ({partitioned} two-volume), {segments} segments, {elapsed:.1?}"
    ))
}

fn edit_soundness() -> Check {
    let start = Instant::now();
    let mut rng = Xoshiro256StarStar::seed_from_u64(200);
    let (mut edits, mut undos) = (0, 0);
    for seq in 0..1000u64 {
        let chars = rng.random_range(6..12u32);
        let per_char = rng.random_range(1..4u32);
        let cfg = SynthConfig {
            seed: seq,
            n_characters: chars,
            blocks_per_character: BlocksPerCharacter::Constant { count: per_char },
            n_spreads: rng
                .random_range(3..10u32)
                .max((chars * per_char).div_ceil(6)),
            lines_per_spread: 2,
            segments_per_line: 3,
            ..SynthConfig::default()
        };
        let ds = synth(&cfg)?.dataset;
        let pristine = export_dataset(&ds, &EditLog::default());
        let mut state = CurationState::new(ds);
        for _ in 0..rng.random_range(1..25) {
            if rng.random_bool(0.25) && !state.log().is_empty() {
                let before = state.revision();
                state
                    .undo(Some(before))
                    .map_err(|e| format!("seq {seq}: undo: {e}"))?;
                undos += 1;
            } else if let Some(req) =
                valid_edit(state.dataset(), rng.random(), rng.random::<u32>() as usize)
            {
                let before = state.revision();
                let out = state
                    .apply(&req, Some(before))
                    .map_err(|e| format!("seq {seq}: {req:?}: {e}"))?;
                ensure(out.revision == before + 1, || {
                    format!("seq {seq}: revision {} after {before}", out.revision)
                })?;
                edits += 1;
            }
            let bad = partition_violations(state.dataset());
            ensure(bad.is_empty(), || format!("seq {seq}: {bad:?}"))?;
            ensure(state.log().len() as u64 == state.revision(), || {
                format!("seq {seq}: log and revision disagree")
            })?;
        }
        while !state.log().is_empty() {
            state
                .undo(None)
                .map_err(|e| format!("seq {seq}: final undo: {e}"))?;
        }
        ensure(
            export_dataset(state.dataset(), state.log()) == pristine,
            || format!("seq {seq}: not pristine after full undo"),
        )?;
    }
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(60), || {
        format!("took {elapsed:.1?}")
    })?;
    Ok(format!(
        "1000 sequences, {edits} edits, {undos} undos, {elapsed:.1?}"
    ))
}

fn duplicates() -> Check {
    let mut books = 0;
    for d in [0u32, 1, 5, 20] {
        for seed in 0..5u64 {
            let book = synth(&SynthConfig {
                seed,
                planted_duplicates: d,
                ..SynthConfig::default()
            })?;
            let want: BTreeSet<_> = book
                .truth
                .planted_duplicates
                .iter()
                .map(|p| (p.spread_id, p.block_id, 2))
                .collect();
            ensure(want.len() == d as usize, || {
                format!("d={d} seed {seed}: generator planted {}", want.len())
            })?;
            let ix = build_indexes(book.dataset).map_err(|e| e.to_string())?;
            let got: BTreeSet<_> = same_spread_duplicates(&ix)
                .iter()
                .map(|x| (x.spread_id, x.block_id, x.count))
                .collect();
            let tp = got.intersection(&want).count();
            ensure(got == want, || {
                format!(
                    "d={d} seed {seed}: precision {tp}/{} recall {tp}/{}",
                    got.len(),
                    want.len()
                )
            })?;
            books += 1;
        }
    }
    Ok(format!(
        "{books} books, d in {{0,1,5,20}}, precision = recall = 1.0"
    ))
}

fn anomalies() -> Check {
    let (mut planted, mut false_pos, mut negatives) = (0, 0, 0);
    for seed in 0..10u64 {
        let book = synth(&SynthConfig {
            seed,
            planted_oversize: 10,
            ..SynthConfig::default()
        })?;
        let truth: BTreeSet<_> = book.truth.planted_oversize.iter().copied().collect();
        let n = book.dataset.segments.len();
        let ix = build_indexes(book.dataset).map_err(|e| e.to_string())?;
        let flagged: BTreeSet<_> = bbox_anomalies(&ix, 3.5)
            .iter()
            .map(|a| a.segment_id)
            .collect();
        let missed: Vec<_> = truth.difference(&flagged).collect();
        ensure(missed.is_empty(), || {
            format!("seed {seed}: missed {missed:?}")
        })?;
        planted += truth.len();
        false_pos += flagged.difference(&truth).count();
        negatives += n - truth.len();
    }
    let rate = false_pos as f64 / negatives as f64;
    ensure(rate < 0.01, || {
        format!("false-positive rate {rate:.4} ({false_pos}/{negatives})")
    })?;
    Ok(format!("{planted}/{planted} planted flagged, false-positive rate {rate:.4} ({false_pos}/{negatives})"))
}

fn zipf_recovery() -> Check {
    let mut fits = Vec::new();
    for seed in 0..10u64 {
        let book = synth(&SynthConfig {
            seed,
            n_characters: 500,
            blocks_per_character: BlocksPerCharacter::Constant { count: 1 },
            usage: UsageDistribution::Zipf { s: 1.0 },
            n_spreads: 2000,
            lines_per_spread: 2,
            segments_per_line: 2,
            ..SynthConfig::default()
        })?;
        let ix = build_indexes(book.dataset).map_err(|e| e.to_string())?;
        let counts: Vec<u64> = reuse_counts(&ix).values().map(|&c| c as u64).collect();
        fits.push(zipf_fit(&counts).map_err(|e| e.to_string())?.exponent);
    }
    let within = fits.iter().filter(|s| (*s - 1.0).abs() <= 0.15).count();
    let shown: Vec<String> = fits.iter().map(|s| format!("{s:.3}")).collect();
    ensure(within >= 9, || {
        format!("{within}/10 within 1.0 +- 0.15: {}", shown.join(" "))
    })?;
    Ok(format!(
        "{within}/10 seeds within 1.0 +- 0.15 (fits {})",
        shown.join(" ")
    ))
}

fn coappearance_oracles() -> Check {
    let mut rng = Xoshiro256StarStar::seed_from_u64(300);
    let mut cells = 0;
    for i in 0..100 {
        let ds = random_dataset(&mut rng, 200);
        let expected = brute_co_appearance(&ds);
        let edges = [1, 2, 3].map(|k| brute_spread_edges(&ds, k));
        let ix = build_indexes(ds).map_err(|e| e.to_string())?;
        let dense = co_appearance(&ix, None).to_dense();
        ensure(dense == expected, || {
            format!("instance {i}: matrix differs")
        })?;
        cells += dense.len() * dense.len();
        for (k, want) in (1..=3).zip(edges) {
            let g = spread_graph(&ix, k);
            let got: Vec<(u32, u32, u32)> =
                g.edges.iter().map(|e| (e.u.0, e.v.0, e.weight)).collect();
            ensure(got == want, || {
                format!("instance {i}, min_shared {k}: edges differ")
            })?;
            let n = g.n_spreads as f64;
            let density = graph_density(&g).map_err(|e| e.to_string())?;
            ensure(density == want.len() as f64 / (n * (n - 1.0) / 2.0), || {
                format!("instance {i}: density {density}")
            })?;
        }
    }
    Ok(format!(
        "100 instances, {cells} matrix cells, min_shared 1..3 exact"
    ))
}

/// Fewest misclassified points over all straight lines. Candidate normals
/// are perpendicular to each pair of points, nudged both ways, which covers
/// every combinatorially distinct separating direction.
fn best_line_errors(points: &[[f64; 2]], labels: &[bool]) -> usize {
    let mut best = labels
        .iter()
        .filter(|&&l| l)
        .count()
        .min(labels.iter().filter(|&&l| !l).count());
    let mut dirs = vec![[1.0, 0.0], [0.0, 1.0]];
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            let (dx, dy) = (points[j][0] - points[i][0], points[j][1] - points[i][1]);
            for eps in [-1e-7, 0.0, 1e-7] {
                let (s, c) = f64::sin_cos(eps);
                dirs.push([-dy * c - dx * s, dx * c - dy * s]);
            }
        }
    }
    for d in dirs {
        let mut proj: Vec<(f64, bool)> = points
            .iter()
            .zip(labels)
            .map(|(p, &l)| (p[0] * d[0] + p[1] * d[1], l))
            .collect();
        proj.sort_by(|a, b| a.0.total_cmp(&b.0));
        let total_true = labels.iter().filter(|&&l| l).count();
        let mut true_below = 0;
        for k in 0..=proj.len() {
            // split after k points: below = false, above = true (or the reverse)
            if k > 0 {
                true_below += usize::from(proj[k - 1].1);
                if k < proj.len() && proj[k - 1].0 == proj[k].0 {
                    continue;
                }
            }
            let false_above = (proj.len() - k) - (total_true - true_below);
            let errors = true_below + false_above;
            best = best.min(errors).min(proj.len() - errors);
        }
    }
    best
}

fn partition_recovery() -> Check {
    let mut rng = Xoshiro256StarStar::seed_from_u64(400);
    let mut margins = Vec::new();
    for seed in 0..10u64 {
        let book = synth(&SynthConfig {
            seed,
            n_characters: 40,
            blocks_per_character: BlocksPerCharacter::Constant { count: 2 },
            n_spreads: 40,
            lines_per_spread: 4,
            segments_per_line: 5,
            partition: Some(PartitionConfig {
                boundary_spread: 20,
                pool_overlap_fraction: 0.1,
            }),
            ..SynthConfig::default()
        })?;
        let truth = book.truth.clone();
        let ix = build_indexes(book.dataset).map_err(|e| e.to_string())?;
        let g = spread_graph(&ix, 1);
        let split: Vec<u32> = (0..40).map(|s| u32::from(s >= 20)).collect();
        let q_true = partition_modularity(&g, &split).map_err(|e| e.to_string())?;
        let mut best_random = f64::NEG_INFINITY;
        for _ in 0..100 {
            let mut groups = split.clone();
            groups.shuffle(&mut rng);
            best_random =
                best_random.max(partition_modularity(&g, &groups).map_err(|e| e.to_string())?);
        }
        ensure(q_true > best_random, || {
            format!("seed {seed}: Q {q_true:.4} <= random {best_random:.4}")
        })?;
        margins.push(q_true - best_random);

        let e = block_embedding(&co_appearance(&ix, None), 2).map_err(|e| e.to_string())?;
        let (mut points, mut labels) = (Vec::new(), Vec::new());
        for (b, c) in e.block_ids.iter().zip(&e.coords) {
            match truth.pool_of(*b) {
                Some(Pool::Volume1) => labels.push(false),
                Some(Pool::Volume2) => labels.push(true),
                _ => continue,
            }
            points.push([c[0], c[1]]);
        }
        let errors = best_line_errors(&points, &labels);
        ensure(errors == 0, || {
            format!(
                "seed {seed}: {errors} of {} volume-specific blocks misclassified",
                points.len()
            )
        })?;
    }
    let min = margins.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(format!(
        "10 books x 100 random splits, smallest Q margin {min:.3}, 0 embedding errors"
    ))
}

fn embedding_oracle() -> Check {
    let mut rng = Xoshiro256StarStar::seed_from_u64(500);
    let (mut checked, mut worst) = (0, 0.0f64);
    while checked < 20 {
        let n = rng.random_range(3..=12);
        let mut m = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in i..n {
                let v = f64::from(rng.random_range(0..30u32));
                m[i][j] = v;
                m[j][i] = v;
            }
        }
        let (values, coords) = pca_reference(&m, 3);
        // axes inside a repeated eigenvalue are not unique
        if values[0] - values[1] < 1e-4 || values[1] - values[2] < 1e-4 {
            continue;
        }
        let e = embed_matrix(&m, 2).map_err(|e| e.to_string())?;
        for axis in 0..2 {
            let dot: f64 = e
                .coords
                .iter()
                .zip(&coords)
                .map(|(a, b)| a[axis] * b[axis])
                .sum();
            let sign = if dot < 0.0 { -1.0 } else { 1.0 };
            for (a, b) in e.coords.iter().zip(&coords) {
                worst = worst.max((a[axis] - sign * b[axis]).abs());
            }
        }
        ensure(worst <= 1e-6, || {
            format!("matrix {checked} ({n}x{n}): max deviation {worst:e}")
        })?;
        checked += 1;
    }
    Ok(format!(
        "20 matrices up to 12x12, max deviation {worst:.1e}"
    ))
}

fn otsu_oracle() -> Check {
    let mut rng = Xoshiro256StarStar::seed_from_u64(600);
    for i in 0..100 {
        let (w, h) = (rng.random_range(1..=48u32), rng.random_range(1..=48u32));
        let pixels: Vec<u8> = if i < 50 {
            (0..w * h).map(|_| rng.random()).collect()
        } else {
            let (a, b) = (rng.random_range(10..110i32), rng.random_range(140..245i32));
            (0..w * h)
                .map(|_| {
                    let centre = if rng.random_bool(0.4) { a } else { b };
                    let spread: i32 = (0..4).map(|_| rng.random_range(-10..=10)).sum();
                    (centre + spread).clamp(0, 255) as u8
                })
                .collect()
        };
        let img = GrayRaster::from_pixels(w, h, pixels).map_err(|e| e.to_string())?;
        let got = otsu_threshold(&img).ok();
        let want = exhaustive_otsu(img.pixels());
        ensure(got == want, || {
            format!("image {i} ({w}x{h}): {got:?} vs {want:?}")
        })?;
    }
    Ok("50 uniform + 50 bimodal images match exhaustive search".into())
}

async fn endpoint_sweep(c: &Client, book: &SynthBook) -> Result<usize, String> {
    let seg = book.dataset.segments.values().next().unwrap();
    let key = &seg.key;
    let mut timeline = format!(
        "/api/characters/timeline?text={}",
        percent_encode(&key.text)
    );
    if let Some(j) = &key.jibo {
        timeline += &format!("&jibo={}", percent_encode(j));
    }
    let groups: Vec<u32> = (0..book.dataset.spreads.len() as u32)
        .map(|s| s % 2)
        .collect();
    let gets = [
        "/api/summary".to_string(),
        "/api/spreads".into(),
        "/api/spreads/0".into(),
        format!("/api/segments/{}", seg.id.0),
        format!("/api/blocks/{}", seg.block_id.0),
        "/api/characters".into(),
        timeline,
        "/api/analytics/reuse".into(),
        "/api/analytics/zipf".into(),
        "/api/analytics/duplicates".into(),
        "/api/analytics/anomalies?k=3.5".into(),
        "/api/analytics/coappearance".into(),
        "/api/analytics/graph?min_shared=1".into(),
        "/api/analytics/density?min_shared=1".into(),
        "/api/analytics/embedding".into(),
        "/api/analytics/rhythm?spread=0".into(),
        "/api/export".into(),
        "/api/images/page/0".into(),
        format!("/api/images/segment/{}?binarize=true", seg.id.0),
        format!("/api/images/block/{}", seg.block_id.0),
    ];
    let mut n = 0;
    for uri in &gets {
        let r = c.get(uri).await;
        ensure(r.status == StatusCode::OK && r.revision == Some(0), || {
            format!(
                "GET {uri}: {} {}",
                r.status,
                String::from_utf8_lossy(&r.body)
            )
        })?;
        let ct = r.content_type.clone().unwrap_or_default();
        if uri.starts_with("/api/images") {
            ensure(ct == "image/png", || {
                format!("GET {uri}: content type {ct}")
            })?;
        } else if uri != "/api/export" {
            ensure(r.json()["revision"] == 0, || {
                format!("GET {uri}: no revision in body")
            })?;
        }
        n += 1;
    }
    let posts = [
        ("/api/selection/expand", json!({ "segments": [seg.id] })),
        ("/api/analytics/modularity", json!({ "groups": groups })),
    ];
    for (uri, body) in &posts {
        let r = c.post(uri, body).await;
        ensure(r.status == StatusCode::OK, || {
            format!("POST {uri}: {}", r.status)
        })?;
        n += 1;
    }
    let summary = c.get("/api/summary").await.data();
    ensure(summary["n_segments"] == book.dataset.segments.len(), || {
        "summary segment count".into()
    })?;
    ensure(summary["n_blocks"] == book.truth.blocks.len(), || {
        "summary block count".into()
    })?;
    let missing = c.get("/api/blocks/999999").await;
    ensure(
        missing.status == StatusCode::NOT_FOUND && missing.error_code() == "UnknownId",
        || "unknown block".into(),
    )?;
    n += 1;

    // edits: stale revision, then a real edit and its undo
    let req = valid_edit(&book.dataset, 1, 0).ok_or("no merge available")?;
    let mut body = serde_json::to_value(&req).unwrap();
    body["expected_revision"] = json!(5);
    let stale = c.post("/api/edits", &body).await;
    ensure(
        stale.status == StatusCode::PRECONDITION_FAILED && stale.error_code() == "RevisionConflict",
        || format!("stale edit: {}", stale.status),
    )?;
    body["expected_revision"] = json!(0);
    let ok = c.post("/api/edits", &body).await;
    ensure(
        ok.status == StatusCode::OK && ok.revision == Some(1),
        || format!("edit: {}", ok.status),
    )?;
    ensure(
        !ok.data()["changed_block_ids"]
            .as_array()
            .unwrap()
            .is_empty(),
        || "edit listed no blocks".into(),
    )?;
    let stale_undo = c
        .post("/api/edits/undo", &json!({ "expected_revision": 0 }))
        .await;
    ensure(stale_undo.status == StatusCode::PRECONDITION_FAILED, || {
        format!("stale undo: {}", stale_undo.status)
    })?;
    let undo = c.call(Method::POST, "/api/edits/undo", None).await;
    ensure(
        undo.status == StatusCode::OK && undo.revision == Some(0),
        || format!("undo: {}", undo.status),
    )?;
    let export = c.get("/api/export").await;
    ensure(
        export.body == export_dataset(&book.dataset, &EditLog::default()).as_bytes(),
        || "export after undo differs".into(),
    )?;
    Ok(n + 5)
}

/// Readers check each snapshot they see; the writer edits through the API.
async fn stress(c: Client, n_segments: usize) -> Result<(usize, usize), String> {
    let done = Arc::new(AtomicBool::new(false));
    let reads = Arc::new(AtomicUsize::new(0));
    let mut readers = Vec::new();
    for r in 0..8 {
        let (c, done, reads) = (c.clone(), done.clone(), reads.clone());
        readers.push(tokio::spawn(async move {
            let mut i = 0usize;
            while !done.load(Ordering::Acquire) {
                if (i + r).is_multiple_of(2) {
                    let resp = c.get("/api/export").await;
                    let text = std::str::from_utf8(&resp.body).map_err(|e| e.to_string())?;
                    let doc = parse_dataset(text).map_err(|e| format!("export unparsable: {e}"))?;
                    let bad = partition_violations(&doc.dataset);
                    ensure(bad.is_empty(), || {
                        format!("snapshot violates invariants: {bad:?}")
                    })?;
                    ensure(Some(doc.edit_log.len() as u64) == resp.revision, || {
                        "export log length differs from its revision".into()
                    })?;
                    ensure(doc.dataset.segments.len() == n_segments, || {
                        "segments lost".into()
                    })?;
                } else {
                    let resp = c.get("/api/analytics/reuse").await;
                    let data = resp.data();
                    let total: u64 = data
                        .as_array()
                        .unwrap()
                        .iter()
                        .map(|x| x["count"].as_u64().unwrap())
                        .sum();
                    ensure(total as usize == n_segments, || {
                        format!("reuse totals {total}")
                    })?;
                }
                reads.fetch_add(1, Ordering::Relaxed);
                i += 1;
                tokio::task::yield_now().await;
            }
            Ok::<(), String>(())
        }));
    }
    let writer = {
        let c = c.clone();
        tokio::spawn(async move {
            let mut rng = Xoshiro256StarStar::seed_from_u64(700);
            for op in 0..1000 {
                let snap = c.state.snapshot();
                let rev = snap.revision;
                let resp = if rev > 0 && rng.random_bool(0.3) {
                    c.post("/api/edits/undo", &json!({ "expected_revision": rev }))
                        .await
                } else {
                    let Some(req) =
                        valid_edit(snap.dataset(), rng.random(), rng.random::<u32>() as usize)
                    else {
                        continue;
                    };
                    let mut body = serde_json::to_value(&req).unwrap();
                    body["expected_revision"] = json!(rev);
                    c.post("/api/edits", &body).await
                };
                ensure(resp.status == StatusCode::OK, || {
                    format!(
                        "op {op}: {} {}",
                        resp.status,
                        String::from_utf8_lossy(&resp.body)
                    )
                })?;
            }
            Ok::<(), String>(())
        })
    };
    let written = writer.await.map_err(|e| e.to_string());
    done.store(true, Ordering::Release);
    for r in readers {
        r.await.map_err(|e| e.to_string())??;
    }
    written??;
    let final_rev = c.state.snapshot().revision as usize;
    Ok((reads.load(Ordering::Relaxed), final_rev))
}

fn api_contract() -> Check {
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .worker_threads(9)
        .enable_all()
        .build()
        .map_err(|e| e.to_string())?;
    runtime.block_on(async {
        let book = common::small_book(11);
        let c = client_for(&book);
        let requests = endpoint_sweep(&c, &book).await?;
        let c = client_for(&book);
        let (reads, rev) = stress(c, book.dataset.segments.len()).await?;
        Ok(format!("{requests} endpoint requests ok, 412 on stale revisions, stress 8 readers x 1000 writes: {reads} clean reads (final revision {rev})"))
    })
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("round trip", round_trip),
        ("edit soundness", edit_soundness),
        ("duplicate detector", duplicates),
        ("anomaly detector", anomalies),
        ("zipf recovery", zipf_recovery),
        ("co-appearance & graph oracles", coappearance_oracles),
        ("partition recovery", partition_recovery),
        ("embedding oracle", embedding_oracle),
        ("otsu oracle", otsu_oracle),
        ("api contract", api_contract),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let secs = start.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("PASS  {name}: {detail} [{secs:.1}s]"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {name}: {detail} [{secs:.1}s]");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", 10 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
