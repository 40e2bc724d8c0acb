//! Grid fixtures for tests, benchmarks and the `synth` command.

use crate::graph::{DualGraph, NodeRecord, VotePair};

/// Node id of grid cell `(row, col)`.
pub fn grid_index(cols: usize, row: usize, col: usize) -> usize {
    row * cols + col
}

/// Rook-adjacency edges of a `rows × cols` grid.
pub fn grid_edges(rows: usize, cols: usize) -> Vec<(usize, usize)> {
    let mut edges = Vec::with_capacity(2 * rows * cols);
    for r in 0..rows {
        for c in 0..cols {
            let u = grid_index(cols, r, c);
            if c + 1 < cols {
                edges.push((u, u + 1));
            }
            if r + 1 < rows {
                edges.push((u, u + cols));
            }
        }
    }
    edges
}

/// Unit-population grid with no contests.
pub fn grid_graph(rows: usize, cols: usize) -> DualGraph {
    let nodes = (0..rows * cols).map(|_| NodeRecord::with_population(1)).collect();
    DualGraph::new(nodes, &grid_edges(rows, cols), Vec::new()).expect("grid is connected")
}

/// Parameters of a "city-state": a square urban cluster of uniformly
/// Democratic-leaning cells inside a rural field.
#[derive(Debug, Clone)]
pub struct CityState {
    pub rows: usize,
    pub cols: usize,
    /// Side length of the square city, centred in the grid.
    pub city_side: usize,
    /// Voters per cell.
    pub voters: i64,
    /// Democratic voters per city cell.
    pub city_dem: i64,
    /// Number of county columns; counties are vertical bands.
    pub county_bands: usize,
}

impl CityState {
    /// 30×30 grid with a 10×10 city at 70% Democratic and a 47.5% rural field.
    pub fn desk_scale() -> Self {
        Self {
            rows: 30,
            cols: 30,
            city_side: 10,
            voters: 200,
            city_dem: 140,
            county_bands: 6,
        }
    }

    pub fn is_city(&self, row: usize, col: usize) -> bool {
        let r0 = (self.rows - self.city_side) / 2;
        let c0 = (self.cols - self.city_side) / 2;
        (r0..r0 + self.city_side).contains(&row) && (c0..c0 + self.city_side).contains(&col)
    }

    /// Rural Democratic voters per cell that put the statewide share at
    /// exactly one half. Returns `None` when no integer value does.
    pub fn calibrated_rural_dem(&self) -> Option<i64> {
        let n = (self.rows * self.cols) as i64;
        let city = (self.city_side * self.city_side) as i64;
        let needed = self.voters * n - 2 * self.city_dem * city;
        let denom = 2 * (n - city);
        (needed % denom == 0).then(|| needed / denom)
    }

    pub fn build(&self) -> Option<DualGraph> {
        let rural_dem = self.calibrated_rural_dem()?;
        let band = self.cols.div_ceil(self.county_bands.max(1));
        let mut nodes = Vec::with_capacity(self.rows * self.cols);
        for r in 0..self.rows {
            for c in 0..self.cols {
                let dem = if self.is_city(r, c) { self.city_dem } else { rural_dem };
                nodes.push(NodeRecord {
                    population: 1,
                    vap: 1,
                    county: format!("C{:02}", c / band),
                    votes: vec![VotePair::from_integers(dem, self.voters - dem)],
                });
            }
        }
        DualGraph::new(nodes, &grid_edges(self.rows, self.cols), vec!["SYNTH".into()]).ok()
    }
}
