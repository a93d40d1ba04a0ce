//! Exact fixed-radius neighborhoods.
//!
//! Identical rows are grouped first, since discrete covariates produce heavy
//! duplication. Group representatives are bucketed into a grid whose cell side
//! is the radius, so any pair within the radius lies in cells that differ by at
//! most one along every axis. Candidate cells are enumerated with a pruned
//! lexicographic range search over the occupied cells, and every candidate pair
//! is confirmed with an exact distance test.

use std::collections::HashMap;

use ndarray::{Array2, ArrayView1};

/// Neighborhoods N(i) = { j : ‖x_i − x_j‖₂ ≤ radius }, self included.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborIndex {
    radius: f64,
    group_of: Vec<usize>,
    /// Unit indices per group of identical rows, ascending.
    groups: Vec<Vec<usize>>,
    /// Neighbor groups per group (self included), ascending.
    group_neighbors: Vec<Vec<usize>>,
    sizes: Vec<usize>,
}

pub(crate) fn within(a: ArrayView1<f64>, b: ArrayView1<f64>, radius: f64) -> bool {
    let sq: f64 = a.iter().zip(b.iter()).map(|(u, v)| (u - v) * (u - v)).sum();
    sq.sqrt() <= radius
}

impl NeighborIndex {
    pub fn build(x: &Array2<f64>, radius: f64) -> NeighborIndex {
        assert!(radius > 0.0, "radius must be positive");
        let n = x.nrows();

        let mut key_to_group: HashMap<Vec<u64>, usize> = HashMap::new();
        let mut group_of = Vec::with_capacity(n);
        let mut groups: Vec<Vec<usize>> = Vec::new();
        for (i, row) in x.outer_iter().enumerate() {
            let key: Vec<u64> = row.iter().map(|v| (v + 0.0).to_bits()).collect();
            let g = *key_to_group.entry(key).or_insert_with(|| {
                groups.push(Vec::new());
                groups.len() - 1
            });
            groups[g].push(i);
            group_of.push(g);
        }
        let reps: Vec<usize> = groups.iter().map(|m| m[0]).collect();

        // Slightly inflated cell side keeps floor() rounding from splitting a
        // within-radius pair across non-adjacent cells.
        let side = radius * (1.0 + 1e-9);
        let mut cells: Vec<(Vec<i64>, usize)> = reps
            .iter()
            .enumerate()
            .map(|(g, &r)| (x.row(r).iter().map(|v| (v / side).floor() as i64).collect(), g))
            .collect();
        cells.sort();
        // Occupied cells (sorted) and the groups they hold.
        let mut cell_keys: Vec<Vec<i64>> = Vec::new();
        let mut cell_groups: Vec<Vec<usize>> = Vec::new();
        for (key, g) in cells {
            if cell_keys.last() != Some(&key) {
                cell_keys.push(key);
                cell_groups.push(Vec::new());
            }
            cell_groups.last_mut().unwrap().push(g);
        }

        let mut group_neighbors: Vec<Vec<usize>> = vec![Vec::new(); groups.len()];
        let mut candidates = Vec::new();
        for (c, key) in cell_keys.iter().enumerate() {
            candidates.clear();
            adjacent_cells(&cell_keys, key, 0, 0, cell_keys.len(), &mut candidates);
            for &g in &cell_groups[c] {
                let row_g = x.row(reps[g]);
                for &cc in &candidates {
                    for &h in &cell_groups[cc] {
                        if h == g || within(row_g, x.row(reps[h]), radius) {
                            group_neighbors[g].push(h);
                        }
                    }
                }
            }
        }
        for nb in &mut group_neighbors {
            nb.sort_unstable();
        }

        let group_sizes: Vec<usize> = group_neighbors
            .iter()
            .map(|nb| nb.iter().map(|&h| groups[h].len()).sum())
            .collect();
        let sizes = group_of.iter().map(|&g| group_sizes[g]).collect();

        NeighborIndex {
            radius,
            group_of,
            groups,
            group_neighbors,
            sizes,
        }
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn len(&self) -> usize {
        self.group_of.len()
    }

    pub fn is_empty(&self) -> bool {
        self.group_of.is_empty()
    }

    /// |N(i)| for every unit.
    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    /// Number of distinct covariate rows.
    pub fn n_groups(&self) -> usize {
        self.groups.len()
    }

    /// Sorted unit indices of N(i).
    pub fn neighbors(&self, i: usize) -> Vec<usize> {
        self.group_members(self.group_of[i])
    }

    fn group_members(&self, g: usize) -> Vec<usize> {
        let mut out: Vec<usize> = self.group_neighbors[g]
            .iter()
            .flat_map(|&h| self.groups[h].iter().copied())
            .collect();
        out.sort_unstable();
        out
    }

    /// Per-unit mean of `values` over N(i), summed in ascending unit order.
    pub fn neighbor_mean(&self, values: &[f64]) -> Vec<f64> {
        assert_eq!(values.len(), self.len());
        let per_group: Vec<f64> = (0..self.groups.len())
            .map(|g| {
                let members = self.group_members(g);
                let sum: f64 = members.iter().map(|&j| values[j]).sum();
                sum / members.len() as f64
            })
            .collect();
        self.group_of.iter().map(|&g| per_group[g]).collect()
    }
}

/// Collect occupied cells whose coordinates differ from `key` by at most one
/// on every axis. `cells[lo..hi]` share the first `depth` coordinates.
fn adjacent_cells(cells: &[Vec<i64>], key: &[i64], depth: usize, lo: usize, hi: usize, out: &mut Vec<usize>) {
    if depth == key.len() {
        out.extend(lo..hi);
        return;
    }
    let slice = &cells[lo..hi];
    let start = lo + slice.partition_point(|c| c[depth] < key[depth] - 1);
    let end = lo + slice.partition_point(|c| c[depth] <= key[depth] + 1);
    let mut a = start;
    while a < end {
        let v = cells[a][depth];
        let b = a + cells[a..end].partition_point(|c| c[depth] == v);
        adjacent_cells(cells, key, depth + 1, a, b, out);
        a = b;
    }
}
