#![allow(dead_code)]

use std::collections::{BTreeSet, VecDeque};

/// Grid adjacency built directly from coordinates.
pub fn grid_neighbors(rows: usize, cols: usize) -> Vec<Vec<usize>> {
    let mut nb = vec![Vec::new(); rows * cols];
    for r in 0..rows {
        for c in 0..cols {
            let u = r * cols + c;
            if c + 1 < cols {
                nb[u].push(u + 1);
                nb[u + 1].push(u);
            }
            if r + 1 < rows {
                nb[u].push(u + cols);
                nb[u + cols].push(u);
            }
        }
    }
    nb
}

/// BFS connectivity of the node set `members` under `nb`.
pub fn connected(nb: &[Vec<usize>], members: &[usize]) -> bool {
    let Some(&start) = members.first() else {
        return false;
    };
    let inside: BTreeSet<usize> = members.iter().copied().collect();
    let mut seen = BTreeSet::from([start]);
    let mut queue = VecDeque::from([start]);
    while let Some(u) = queue.pop_front() {
        for &v in &nb[u] {
            if inside.contains(&v) && seen.insert(v) {
                queue.push_back(v);
            }
        }
    }
    seen.len() == inside.len()
}

/// Every split of the 4×4 grid into two connected halves of 8 cells,
/// keyed by the bitmask of the half containing cell 0.
pub fn enumerate_4x4_bisections() -> BTreeSet<u16> {
    let nb = grid_neighbors(4, 4);
    let mut out = BTreeSet::new();
    for mask in 0u32..1 << 16 {
        if mask & 1 == 0 || mask.count_ones() != 8 {
            continue;
        }
        let a: Vec<usize> = (0..16).filter(|i| mask >> i & 1 == 1).collect();
        let b: Vec<usize> = (0..16).filter(|i| mask >> i & 1 == 0).collect();
        if connected(&nb, &a) && connected(&nb, &b) {
            out.insert(mask as u16);
        }
    }
    out
}

/// Canonical mask of a two-district labelling: the side holding cell 0.
pub fn bisection_mask(district_of: &[u32]) -> u16 {
    let side = district_of[0];
    district_of
        .iter()
        .enumerate()
        .filter(|(_, &d)| d == side)
        .fold(0u16, |m, (i, _)| m | 1 << i)
}
