//! Distance-threshold graphs, grid neighbor search and region predicates.

use std::cmp::Ordering;
use std::io::Write;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{input, Result};
use crate::point_process::PointCloud;
use crate::rng;

/// Region `A` used to restrict face counts by leftmost point.
///
/// Boxes are open; the complement is `R^d` minus the closed box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum RegionSpec {
    #[default]
    All,
    Box {
        lo: Vec<f64>,
        hi: Vec<f64>,
    },
    BoxComplement {
        lo: Vec<f64>,
        hi: Vec<f64>,
    },
}

impl RegionSpec {
    pub fn check_dim(&self, d: usize) -> Result<()> {
        match self {
            RegionSpec::All => Ok(()),
            RegionSpec::Box { lo, hi } | RegionSpec::BoxComplement { lo, hi } => {
                if lo.len() != d || hi.len() != d {
                    return input(format!("region box has dimension {}, expected {d}", lo.len()));
                }
                if lo.iter().zip(hi).any(|(l, h)| !(l <= h)) {
                    return input("region box needs lo <= hi on every axis");
                }
                Ok(())
            }
        }
    }

    pub fn is_all(&self) -> bool {
        matches!(self, RegionSpec::All)
    }

    #[inline]
    pub fn contains(&self, x: &[f64]) -> bool {
        match self {
            RegionSpec::All => true,
            RegionSpec::Box { lo, hi } => x.iter().zip(lo.iter().zip(hi)).all(|(&v, (&l, &h))| l < v && v < h),
            RegionSpec::BoxComplement { lo, hi } => x.iter().zip(lo.iter().zip(hi)).any(|(&v, (&l, &h))| v < l || v > h),
        }
    }

    /// Lebesgue measure of `region ∩ [lo, hi]`.
    pub fn measure_within(&self, lo: &[f64], hi: &[f64]) -> f64 {
        let whole: f64 = lo.iter().zip(hi).map(|(l, h)| h - l).product();
        let overlap = |blo: &[f64], bhi: &[f64]| -> f64 {
            lo.iter()
                .zip(hi)
                .zip(blo.iter().zip(bhi))
                .map(|((l, h), (bl, bh))| (h.min(*bh) - l.max(*bl)).max(0.0))
                .product()
        };
        match self {
            RegionSpec::All => whole,
            RegionSpec::Box { lo: blo, hi: bhi } => overlap(blo, bhi),
            RegionSpec::BoxComplement { lo: blo, hi: bhi } => whole - overlap(blo, bhi),
        }
    }
}

/// Membership of `point` in `region`.
pub fn in_region(point: &[f64], region: &RegionSpec) -> bool {
    region.contains(point)
}

/// Index of the lexicographically smallest point among `indices`; ties go to the lower index.
pub fn leftmost_point(indices: &[usize], cloud: &PointCloud) -> Result<usize> {
    let Some(&first) = indices.first() else {
        return input("leftmost point of an empty vertex set");
    };
    if let Some(&bad) = indices.iter().find(|&&i| i >= cloud.len()) {
        return input(format!("vertex {bad} out of range for {} points", cloud.len()));
    }
    Ok(indices.iter().copied().fold(first, |best, i| match lex_cmp(cloud.point(i), cloud.point(best)) {
        Ordering::Less => i,
        Ordering::Equal if i < best => i,
        _ => best,
    }))
}

#[inline]
pub(crate) fn lex_cmp(a: &[f64], b: &[f64]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            Ordering::Equal => continue,
            o => return o,
        }
    }
    Ordering::Equal
}

#[inline]
pub(crate) fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// The geometric graph `G(X, r)`, optionally edge-thinned to `G(X, r, p)`.
#[derive(Debug, Clone)]
pub struct GeometricGraph {
    pub cloud: Arc<PointCloud>,
    pub r: f64,
    /// Sorted `(i, j)` pairs with `i < j`.
    pub edges: Vec<(u32, u32)>,
    pub edge_retention: Option<f64>,
    offsets: Vec<usize>,
    neighbors: Vec<u32>,
}

impl GeometricGraph {
    fn from_edges(cloud: Arc<PointCloud>, r: f64, edges: Vec<(u32, u32)>, edge_retention: Option<f64>) -> Self {
        let n = cloud.len();
        let mut degree = vec![0usize; n + 1];
        for &(i, j) in &edges {
            degree[i as usize + 1] += 1;
            degree[j as usize + 1] += 1;
        }
        for v in 0..n {
            degree[v + 1] += degree[v];
        }
        let offsets = degree;
        let mut fill = offsets.clone();
        let mut neighbors = vec![0u32; 2 * edges.len()];
        for &(i, j) in &edges {
            neighbors[fill[i as usize]] = j;
            fill[i as usize] += 1;
            neighbors[fill[j as usize]] = i;
            fill[j as usize] += 1;
        }
        for v in 0..n {
            neighbors[offsets[v]..offsets[v + 1]].sort_unstable();
        }
        GeometricGraph { cloud, r, edges, edge_retention, offsets, neighbors }
    }

    pub fn vertex_count(&self) -> usize {
        self.cloud.len()
    }

    /// Sorted neighbor list of `v`.
    pub fn neighbors(&self, v: u32) -> &[u32] {
        &self.neighbors[self.offsets[v as usize]..self.offsets[v as usize + 1]]
    }

    pub fn has_edge(&self, a: u32, b: u32) -> bool {
        let (a, b) = if self.degree(a) <= self.degree(b) { (a, b) } else { (b, a) };
        self.neighbors(a).binary_search(&b).is_ok()
    }

    pub fn degree(&self, v: u32) -> usize {
        self.offsets[v as usize + 1] - self.offsets[v as usize]
    }

    /// Writes the edge list as CSV with columns `i,j`.
    pub fn write_edges_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["i", "j"])?;
        for &(i, j) in &self.edges {
            w.write_record([i.to_string(), j.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Threshold graph with closed threshold `dist ≤ r`.
///
/// With `p1`, each qualifying edge is kept independently with probability
/// `p1`, using a coin that depends only on `(seed, i, j)`.
pub fn build_graph(cloud: Arc<PointCloud>, r: f64, p1: Option<f64>, seed: u64) -> Result<GeometricGraph> {
    if !(r.is_finite() && r > 0.0) {
        return input(format!("threshold must be positive and finite, got {r}"));
    }
    if let Some(p) = p1 {
        if !(0.0..=1.0).contains(&p) {
            return input(format!("edge retention must lie in [0, 1], got {p}"));
        }
    }
    if cloud.len() > u32::MAX as usize {
        return input("too many points for 32-bit vertex ids");
    }
    let mut edges = grid_edges(&cloud, r);
    if let Some(p) = p1 {
        edges.retain(|&(i, j)| rng::face_uniform(seed, &[i, j]) < p);
    }
    Ok(GeometricGraph::from_edges(cloud, r, edges, p1))
}

/// All pairs within distance `r`, found through a uniform grid of cell side `r`.
fn grid_edges(cloud: &PointCloud, r: f64) -> Vec<(u32, u32)> {
    let n = cloud.len();
    let d = cloud.dim();
    if n < 2 {
        return Vec::new();
    }
    let mut lo = vec![f64::INFINITY; d];
    for p in cloud.points() {
        for (l, &x) in lo.iter_mut().zip(p) {
            *l = l.min(x);
        }
    }
    let mut cells = vec![0i64; n * d];
    for (i, p) in cloud.points().enumerate() {
        for a in 0..d {
            cells[i * d + a] = ((p[a] - lo[a]) / r).floor() as i64;
        }
    }
    let offsets = positive_offsets(d);
    let mut edges = match packed_strides(&cells, d) {
        Some(strides) => packed_pairs(cloud, &cells, &strides, &offsets, r * r),
        None => lexicographic_pairs(cloud, &cells, &offsets, r * r),
    };
    edges.sort_unstable();
    edges
}

/// Neighbor offsets lexicographically greater than zero, so each cell pair is visited once.
fn positive_offsets(d: usize) -> Vec<Vec<i64>> {
    let mut offsets = Vec::new();
    for code in 0..3usize.pow(d as u32) {
        let mut c = code;
        let off: Vec<i64> = (0..d)
            .map(|_| {
                let v = (c % 3) as i64 - 1;
                c /= 3;
                v
            })
            .rev()
            .collect();
        if off.iter().find(|&&v| v != 0).is_some_and(|&v| v > 0) {
            offsets.push(off);
        }
    }
    offsets
}

/// Mixed-radix strides turning a cell tuple (shifted by one, so neighbors of
/// boundary cells stay in range) into a `u64` key whose order is the
/// lexicographic order of the tuples. `None` if the grid is too large.
fn packed_strides(cells: &[i64], d: usize) -> Option<Vec<u64>> {
    let mut max = vec![0i64; d];
    for c in cells.chunks_exact(d) {
        for (m, &v) in max.iter_mut().zip(c) {
            *m = (*m).max(v);
        }
    }
    let mut strides = vec![1u64; d];
    let mut size = 1u64;
    for a in (0..d).rev() {
        strides[a] = size;
        size = size.checked_mul(u64::try_from(max[a]).ok()?.checked_add(3)?)?;
    }
    Some(strides)
}

fn packed_pairs(cloud: &PointCloud, cells: &[i64], strides: &[u64], offsets: &[Vec<i64>], r2: f64) -> Vec<(u32, u32)> {
    let d = strides.len();
    let mut keyed: Vec<(u64, u32)> = cells
        .chunks_exact(d)
        .enumerate()
        .map(|(i, c)| (c.iter().zip(strides).map(|(&v, &s)| (v as u64 + 1) * s).sum(), i as u32))
        .collect();
    keyed.sort_unstable();

    // runs of equal keys: (key, start, end) into `keyed`
    let mut runs: Vec<(u64, usize, usize)> = Vec::new();
    let mut s = 0;
    for t in 1..=keyed.len() {
        if t == keyed.len() || keyed[t].0 != keyed[s].0 {
            runs.push((keyed[s].0, s, t));
            s = t;
        }
    }
    let deltas: Vec<u64> = offsets
        .iter()
        .map(|off| off.iter().zip(strides).map(|(&o, &s)| o * s as i64).sum::<i64>() as u64)
        .collect();

    let mut edges = Vec::new();
    // targets key + delta grow with the run index, so each cursor only moves forward
    let mut cursors = vec![0usize; deltas.len()];
    for &(key, s, e) in &runs {
        for x in s..e {
            for y in x + 1..e {
                push_if_close(cloud, keyed[x].1, keyed[y].1, r2, &mut edges);
            }
        }
        for (cursor, &delta) in cursors.iter_mut().zip(&deltas) {
            let target = key + delta;
            while *cursor < runs.len() && runs[*cursor].0 < target {
                *cursor += 1;
            }
            if let Some(&(k, ns, ne)) = runs.get(*cursor) {
                if k == target {
                    for x in s..e {
                        for y in ns..ne {
                            push_if_close(cloud, keyed[x].1, keyed[y].1, r2, &mut edges);
                        }
                    }
                }
            }
        }
    }
    edges
}

/// Fallback for grids too large to pack: sort by cell tuple, binary-search neighbors.
fn lexicographic_pairs(cloud: &PointCloud, cells: &[i64], offsets: &[Vec<i64>], r2: f64) -> Vec<(u32, u32)> {
    let d = cloud.dim();
    let n = cloud.len();
    let cell = |i: usize| &cells[i * d..(i + 1) * d];
    let mut order: Vec<u32> = (0..n as u32).collect();
    order.sort_unstable_by(|&a, &b| cell(a as usize).cmp(cell(b as usize)).then(a.cmp(&b)));

    let mut runs: Vec<(usize, usize)> = Vec::new();
    let mut s = 0;
    for t in 1..=n {
        if t == n || cell(order[t] as usize) != cell(order[s] as usize) {
            runs.push((s, t));
            s = t;
        }
    }

    let mut edges = Vec::new();
    let mut probe = vec![0i64; d];
    for k in 0..runs.len() {
        let (s, e) = runs[k];
        for x in s..e {
            for y in x + 1..e {
                push_if_close(cloud, order[x], order[y], r2, &mut edges);
            }
        }
        let base = cell(order[s] as usize);
        for off in offsets {
            for a in 0..d {
                probe[a] = base[a] + off[a];
            }
            // neighbors with greater keys sit after k in the sorted run list
            let found = runs[k + 1..].binary_search_by(|&(rs, _)| cell(order[rs] as usize).cmp(&probe[..]));
            if let Ok(m) = found {
                let (ns, ne) = runs[k + 1 + m];
                for x in s..e {
                    for y in ns..ne {
                        push_if_close(cloud, order[x], order[y], r2, &mut edges);
                    }
                }
            }
        }
    }
    edges
}

#[inline]
fn push_if_close(cloud: &PointCloud, a: u32, b: u32, r2: f64, edges: &mut Vec<(u32, u32)>) {
    if dist2(cloud.point(a as usize), cloud.point(b as usize)) <= r2 {
        edges.push(if a < b { (a, b) } else { (b, a) });
    }
}
