use std::collections::BTreeMap;
use std::sync::Arc;

use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_xoshiro::Xoshiro256StarStar;

use typecase_core::analytics::{
    bbox_anomalies, character_timeline, co_appearance, partition_modularity, reuse_counts,
    same_spread_duplicates, spread_graph, DEFAULT_ANOMALY_K,
};
use typecase_core::curation::CurationState;
use typecase_core::ingest::{export_dataset, parse_dataset};
use typecase_core::model::{build_indexes, BBox, SpreadId};
use typecase_core::raster::{crop_segment, representative_segment};
use typecase_core::synth::{generate, BlocksPerCharacter, SynthConfig};
use typecase_testkit::valid_edit;

fn config(seed: u64) -> SynthConfig {
    SynthConfig {
        seed,
        n_characters: 20,
        blocks_per_character: BlocksPerCharacter::Constant { count: 2 },
        n_spreads: 30,
        lines_per_spread: 3,
        segments_per_line: 4,
        ..SynthConfig::default()
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn usage_counts_agree_three_ways(seed in any::<u64>()) {
        let book = generate(&config(seed)).unwrap();
        let ix = build_indexes(book.dataset).unwrap();
        let reuse = reuse_counts(&ix);
        prop_assert_eq!(reuse.values().sum::<usize>(), ix.dataset().segments.len());
        for tb in &book.truth.blocks {
            prop_assert_eq!(reuse[&tb.id], tb.usage as usize);
        }
        let keys: Vec<_> = ix.characters().map(|(k, _)| k.clone()).collect();
        for key in keys {
            let t = character_timeline(&ix, &key).unwrap();
            for row in &t.rows {
                prop_assert_eq!(row.total() as usize, reuse[&row.block_id]);
            }
            for (s, total) in t.column_totals().into_iter().enumerate() {
                let direct = ix.dataset().segments.values()
                    .filter(|seg| seg.spread_id == SpreadId(s as u32) && seg.key == key)
                    .count();
                prop_assert_eq!(total as usize, direct);
            }
        }
    }

    #[test]
    fn random_groupings_have_near_zero_modularity(seed in any::<u64>()) {
        let ix = build_indexes(generate(&config(seed)).unwrap().dataset).unwrap();
        let g = spread_graph(&ix, 1);
        let mut rng = Xoshiro256StarStar::seed_from_u64(seed);
        let mut groups: Vec<u32> = (0..g.n_spreads as u32).map(|s| s % 2).collect();
        let mut total = 0.0;
        for _ in 0..100 {
            groups.shuffle(&mut rng);
            total += partition_modularity(&g, &groups).unwrap();
        }
        prop_assert!((total / 100.0).abs() < 0.05, "{}", total / 100.0);
    }

    #[test]
    fn analytics_survive_reingestion(seed in any::<u64>(), edits in prop::collection::vec((any::<u8>(), any::<usize>()), 0..8)) {
        let book = generate(&SynthConfig { planted_duplicates: 3, planted_oversize: 2, ..config(seed) }).unwrap();
        let mut state = CurationState::new(book.dataset);
        for (kind, pick) in edits {
            if let Some(req) = valid_edit(state.dataset(), kind, pick) {
                state.apply(&req, None).unwrap();
            }
        }
        let direct = build_indexes(state.dataset().clone()).unwrap();
        let reparsed = parse_dataset(&export_dataset(state.dataset(), state.log())).unwrap();
        let again = build_indexes(reparsed.dataset).unwrap();
        prop_assert_eq!(reuse_counts(&direct), reuse_counts(&again));
        prop_assert_eq!(same_spread_duplicates(&direct), same_spread_duplicates(&again));
        prop_assert_eq!(co_appearance(&direct, None), co_appearance(&again, None));
        prop_assert_eq!(spread_graph(&direct, 2), spread_graph(&again, 2));
        prop_assert_eq!(bbox_anomalies(&direct, DEFAULT_ANOMALY_K), bbox_anomalies(&again, DEFAULT_ANOMALY_K));
    }

    #[test]
    fn planting_more_duplicates_adds_exactly_that_many(seed in any::<u64>(), d in 0u32..10, extra in 0u32..10) {
        let found = |n: u32| {
            let book = generate(&SynthConfig { planted_duplicates: n, ..config(seed) }).unwrap();
            same_spread_duplicates(&build_indexes(book.dataset).unwrap()).len() as u32
        };
        prop_assert_eq!(found(d + extra), found(d) + extra);
    }
}

#[test]
fn index_readback_reproduces_segments() {
    let ds = generate(&config(4)).unwrap().dataset;
    let ix = build_indexes(ds.clone()).unwrap();
    let mut seen = BTreeMap::new();
    for b in ds.blocks.keys() {
        for s in ix.block_members(*b).unwrap() {
            seen.insert(*s, ds.segments[s].clone());
        }
    }
    assert_eq!(seen, ds.segments);
}

#[test]
fn crops_and_representatives_are_stable() {
    let book = generate(&SynthConfig {
        render_images: true,
        ..config(9)
    })
    .unwrap();
    let pages = book.pages.unwrap();
    let seg = book.dataset.segments.values().nth(5).unwrap();
    let crop = crop_segment(&pages[seg.spread_id.0 as usize], &seg.bbox).unwrap();
    let full = BBox::new(0, 0, crop.width(), crop.height());
    assert_eq!(crop_segment(&crop, &full).unwrap(), crop);

    let shared: Vec<Arc<_>> = pages.clone();
    for b in book.dataset.blocks.keys().take(10) {
        let a = representative_segment(*b, &book.dataset, Some(&shared)).unwrap();
        let again = representative_segment(*b, &book.dataset, Some(&pages)).unwrap();
        assert_eq!(a, again);
        assert!(book.dataset.blocks[b].member_ids.contains(&a));
    }
}
