mod common;

use std::collections::BTreeMap;

use common::{bisection_mask, enumerate_4x4_bisections};
use recom_core::graph::{DualGraph, NodeRecord, VotePair};
use recom_core::region::{run_region_ensembles, validate_split, RegionSpec};
use recom_core::seed::chain_rng;
use recom_core::stats::SeatHistogram;
use recom_core::synth::{grid_edges, grid_graph};
use recom_core::tree::{recursive_seed, BalanceWindow};
use recom_core::{run_ensemble, ChainParams, Seats, TiePolicy};
use statrs::distribution::{ChiSquared, ContinuousCDF};

/// 6×12 grid whose east half mirrors the west half, votes included.
fn mirrored_state() -> DualGraph {
    let (rows, cols) = (6, 12);
    let mut nodes = Vec::new();
    for r in 0..rows {
        for c in 0..cols {
            let m = if c < cols / 2 { c } else { cols - 1 - c };
            let dem = 35 + 10 * ((r + 2 * m) % 4) as i64;
            nodes.push(NodeRecord {
                population: 1,
                vap: 1,
                county: if c < cols / 2 { "W".into() } else { "E".into() },
                votes: vec![VotePair::from_integers(dem, 100 - dem)],
            });
        }
    }
    DualGraph::new(nodes, &grid_edges(rows, cols), vec!["M".into()]).unwrap()
}

/// Chi-square test of homogeneity for two histograms over the same support.
/// Sparse cells are pooled into their neighbour until every expected count
/// is at least 5.
fn homogeneity_p_value(a: &SeatHistogram, b: &SeatHistogram) -> f64 {
    let keys: Vec<Seats> = a.counts.keys().chain(b.counts.keys()).copied().collect::<std::collections::BTreeSet<_>>().into_iter().collect();
    let (na, nb) = (a.total as f64, b.total as f64);
    let mut cells: Vec<(f64, f64)> = Vec::new();
    let mut pending = (0.0, 0.0);
    for k in keys {
        pending.0 += *a.counts.get(&k).unwrap_or(&0) as f64;
        pending.1 += *b.counts.get(&k).unwrap_or(&0) as f64;
        let col = pending.0 + pending.1;
        if col * na.min(nb) / (na + nb) >= 5.0 {
            cells.push(pending);
            pending = (0.0, 0.0);
        }
    }
    if pending.0 + pending.1 > 0.0 {
        match cells.last_mut() {
            Some(last) => {
                last.0 += pending.0;
                last.1 += pending.1;
            }
            None => cells.push(pending),
        }
    }
    if cells.len() < 2 {
        return 1.0;
    }
    let n = na + nb;
    let stat: f64 = cells
        .iter()
        .map(|&(x, y)| {
            let col = x + y;
            let (ea, eb) = (col * na / n, col * nb / n);
            (x - ea).powi(2) / ea + (y - eb).powi(2) / eb
        })
        .sum();
    1.0 - ChiSquared::new((cells.len() - 1) as f64).unwrap().cdf(stat)
}

#[test]
fn mirrored_regions_have_matching_histograms() {
    let g = mirrored_state();
    let west = RegionSpec {
        name: "West".into(),
        counties: ["W".to_string()].into(),
        k_region: 3,
    };
    let east = RegionSpec {
        name: "East".into(),
        counties: ["E".to_string()].into(),
        k_region: 3,
    };
    assert_eq!(validate_split(&g, &west, &east, (1, 1)).unwrap().deviation_from_ratio, 0.0);
    let mut base = ChainParams::new(3, 0.1, 1500, 77);
    base.thin = 10;
    let out = run_region_ensembles(&g, [&west, &east], 6, &base, &[0], TiePolicy::CountHalf).unwrap();
    let (hw, he) = (&out.regions[0].histograms[0], &out.regions[1].histograms[0]);
    assert!(hw.counts.len() > 1, "histogram should not be degenerate: {:?}", hw.counts);
    let p = homogeneity_p_value(hw, he);
    assert!(p > 0.01, "p = {p}, west {:?}, east {:?}", hw.counts, he.counts);
}

#[test]
fn sharded_stream_merges_to_the_whole() {
    let mut nodes = Vec::new();
    for i in 0..36i64 {
        let dem = 30 + (i * 7) % 40;
        nodes.push(NodeRecord {
            votes: vec![VotePair::from_integers(dem, 100 - dem)],
            ..NodeRecord::with_population(1)
        });
    }
    let g = DualGraph::new(nodes, &grid_edges(6, 6), vec!["S".into()]).unwrap();
    let run = run_ensemble(&g, &ChainParams::new(3, 0.1, 10_000, 4), &[0], TiePolicy::CountHalf).unwrap();
    let series = &run.seats[0];
    let whole = SeatHistogram::from_observations(series, 3, "S").unwrap();
    let shards: Vec<SeatHistogram> = series
        .chunks(2500)
        .map(|c| SeatHistogram::from_observations(c, 3, "S").unwrap())
        .collect();
    assert_eq!(shards.len(), 4);
    let forward = shards.iter().fold(SeatHistogram::new(3, "S"), |acc, h| acc.merge(h).unwrap());
    let shuffled = [3, 1, 0, 2].iter().fold(SeatHistogram::new(3, "S"), |acc, &i| shards[i].merge(&acc).unwrap());
    assert_eq!(forward, whole);
    assert_eq!(shuffled, whole);
    assert_eq!(whole.total, 10_000);
}

#[test]
fn seed_plans_on_4x4_are_enumerated_bisections() {
    let valid = enumerate_4x4_bisections();
    let g = grid_graph(4, 4);
    let window = BalanceWindow::ideal(16, 2, 0.0).unwrap();
    let mut seen = BTreeMap::new();
    for seed in 0..2000u64 {
        let plan = recursive_seed(g.topology(), 2, &window, &mut chain_rng(seed), 100).unwrap();
        let mask = bisection_mask(plan.district_of());
        assert!(valid.contains(&mask), "seed {seed} produced {mask:016b}");
        *seen.entry(mask).or_insert(0u32) += 1;
    }
    assert!(seen.len() > 1);
}
