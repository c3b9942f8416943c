//! Finite cell complexes with signed incidence.
//!
//! Two kinds are supported: cubical grids generated from a [`GridSpec`]
//! (periodic or open per axis, dimension 1 to 3), and simplicial complexes
//! loaded from a JSON document.
//!
//! Orientation conventions:
//!
//! * A cubical `k`-cell is a pair `(origin, axes)` with `axes` a strictly
//!   increasing list of `k` axis indices. Its boundary is
//!   `Σ_j (-1)^j ( face(origin + e_{axes[j]}) - face(origin) )`, where
//!   `face` drops `axes[j]`. Within one degree the cells are ordered first by
//!   the lexicographic order of their axis sets, then row-major by origin
//!   (last axis fastest).
//! * A simplicial cell carries its sorted vertex list; signs come from the
//!   loaded document, which is expected to use the vertex-order sign
//!   `∂[v0..vk] = Σ_i (-1)^i [v0..v̂i..vk]`, but any sign choice with
//!   `∂∂ = 0` is accepted.
//!
//! A complex is immutable once built and every constructor checks
//! `∂_{k-1} ∂_k = 0` in exact integer arithmetic.

use std::collections::{BTreeSet, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rank::rank_over_rationals;
use crate::sparse::CsrMatrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ComplexKind {
    Cubical,
    Simplicial,
}

/// Axis-aligned grid description: cells per axis, spacing, periodicity.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub dim: usize,
    pub extents: Vec<usize>,
    pub spacing: Vec<f64>,
    pub periodic: Vec<bool>,
}

impl GridSpec {
    /// Fully periodic grid with the same extent and spacing on every axis.
    pub fn torus(dim: usize, extent: usize, spacing: f64) -> Self {
        Self {
            dim,
            extents: vec![extent; dim],
            spacing: vec![spacing; dim],
            periodic: vec![true; dim],
        }
    }

    pub fn periodic_with(extents: &[usize], spacing: &[f64]) -> Self {
        Self {
            dim: extents.len(),
            extents: extents.to_vec(),
            spacing: spacing.to_vec(),
            periodic: vec![true; extents.len()],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=3).contains(&self.dim) {
            return Err(Error::InvalidGrid(format!(
                "dimension {} not in 1..=3",
                self.dim
            )));
        }
        if self.extents.len() != self.dim
            || self.spacing.len() != self.dim
            || self.periodic.len() != self.dim
        {
            return Err(Error::InvalidGrid(format!(
                "expected {} entries for extents, spacing and periodic",
                self.dim
            )));
        }
        if let Some(e) = self.extents.iter().find(|&&e| e < 3) {
            return Err(Error::InvalidGrid(format!("extent {e} < 3")));
        }
        if let Some(h) = self.spacing.iter().find(|&&h| !(h > 0.0 && h.is_finite())) {
            return Err(Error::InvalidGrid(format!("spacing {h} is not positive")));
        }
        Ok(())
    }

    pub fn is_fully_periodic(&self) -> bool {
        self.periodic.iter().all(|&p| p)
    }

    fn vertex_range(&self, axis: usize) -> usize {
        if self.periodic[axis] {
            self.extents[axis]
        } else {
            self.extents[axis] + 1
        }
    }

    /// Origin ranges per axis for cells spanning the given axis set.
    fn cell_ranges(&self, axes: &[usize]) -> Vec<usize> {
        (0..self.dim)
            .map(|a| {
                if axes.contains(&a) {
                    self.extents[a]
                } else {
                    self.vertex_range(a)
                }
            })
            .collect()
    }
}

/// Geometric placement of a cell.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellLabel {
    Grid { origin: Vec<usize>, axes: Vec<usize> },
    Simplex(Vec<usize>),
}

#[derive(Clone, Debug)]
pub struct CellComplex {
    dim: usize,
    kind: ComplexKind,
    cell_counts: Vec<usize>,
    /// `boundary[k - 1]` is `∂_k`, mapping `k`-cells (columns) to `(k-1)`-cells (rows).
    boundary: Vec<CsrMatrix<i64>>,
    /// `coboundary[k]` is `D_k = ∂_{k+1}ᵀ`.
    coboundary: Vec<CsrMatrix<i64>>,
    closed: bool,
    labels: Vec<Vec<CellLabel>>,
    grid: Option<GridSpec>,
    vertex_coords: Option<Vec<Vec<f64>>>,
}

/// Lexicographically ordered `k`-subsets of `0..n`.
pub(crate) fn axis_subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for a in start..n {
            cur.push(a);
            rec(a + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, k, &mut Vec::new(), &mut out);
    out
}

pub(crate) fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
}

fn row_major(index: &[usize], ranges: &[usize]) -> usize {
    index.iter().zip(ranges).fold(0, |acc, (&i, &r)| acc * r + i)
}

fn unravel(mut flat: usize, ranges: &[usize]) -> Vec<usize> {
    let mut idx = vec![0; ranges.len()];
    for a in (0..ranges.len()).rev() {
        idx[a] = flat % ranges[a];
        flat /= ranges[a];
    }
    idx
}

/// Index bookkeeping for the cells of one degree of a grid.
struct GridDegree {
    subsets: Vec<Vec<usize>>,
    offsets: Vec<usize>,
    ranges: Vec<Vec<usize>>,
    count: usize,
}

impl GridDegree {
    fn new(spec: &GridSpec, k: usize) -> Self {
        let subsets = axis_subsets(spec.dim, k);
        let mut offsets = Vec::with_capacity(subsets.len());
        let mut ranges = Vec::with_capacity(subsets.len());
        let mut count = 0;
        for s in &subsets {
            offsets.push(count);
            let r = spec.cell_ranges(s);
            count += r.iter().product::<usize>();
            ranges.push(r);
        }
        Self {
            subsets,
            offsets,
            ranges,
            count,
        }
    }

    fn index_of(&self, axes: &[usize], origin: &[usize]) -> usize {
        let s = self
            .subsets
            .iter()
            .position(|s| s == axes)
            .expect("axis subset belongs to degree");
        self.offsets[s] + row_major(origin, &self.ranges[s])
    }
}

/// Builds a cubical grid complex (periodic or open per axis).
pub fn build_grid(spec: &GridSpec) -> Result<CellComplex> {
    spec.validate()?;
    let n = spec.dim;
    let degrees: Vec<GridDegree> = (0..=n).map(|k| GridDegree::new(spec, k)).collect();

    let mut labels = Vec::with_capacity(n + 1);
    for deg in &degrees {
        let mut lab = Vec::with_capacity(deg.count);
        for (s, axes) in deg.subsets.iter().enumerate() {
            let total: usize = deg.ranges[s].iter().product();
            for flat in 0..total {
                lab.push(CellLabel::Grid {
                    origin: unravel(flat, &deg.ranges[s]),
                    axes: axes.clone(),
                });
            }
        }
        labels.push(lab);
    }

    let mut boundary = Vec::with_capacity(n);
    for k in 1..=n {
        let (hi, lo) = (&degrees[k], &degrees[k - 1]);
        let mut triplets = Vec::with_capacity(hi.count * 2 * k);
        for (cell, label) in labels[k].iter().enumerate() {
            let CellLabel::Grid { origin, axes } = label else {
                unreachable!()
            };
            for (j, &axis) in axes.iter().enumerate() {
                let face_axes: Vec<usize> = axes.iter().copied().filter(|&a| a != axis).collect();
                let sign = if j % 2 == 0 { 1 } else { -1 };
                let mut upper = origin.clone();
                upper[axis] += 1;
                if spec.periodic[axis] {
                    upper[axis] %= spec.extents[axis];
                }
                triplets.push((lo.index_of(&face_axes, &upper), cell, sign));
                triplets.push((lo.index_of(&face_axes, origin), cell, -sign));
            }
        }
        boundary.push(CsrMatrix::from_triplets(lo.count, hi.count, &triplets));
    }

    CellComplex::from_parts(
        n,
        ComplexKind::Cubical,
        degrees.iter().map(|d| d.count).collect(),
        boundary,
        labels,
        Some(spec.clone()),
        None,
    )
}

/// Convenience for the fully periodic case; rejects grids with open axes.
pub fn build_periodic_grid(spec: &GridSpec) -> Result<CellComplex> {
    if !spec.is_fully_periodic() {
        return Err(Error::InvalidGrid("grid is not fully periodic".into()));
    }
    build_grid(spec)
}

/// On-disk complex description.
///
/// ```json
/// {
///   "dim": 2,
///   "kind": "simplicial",
///   "cells": [3, 3, 1],
///   "boundary": [
///     [[0, 0, -1], [0, 1, 1], ...],
///     [[0, 0, 1], [0, 1, -1], [0, 2, 1]]
///   ],
///   "vertices": [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]
/// }
/// ```
///
/// `boundary[k - 1]` lists the nonzero entries of `∂_k` as
/// `[k-cell, (k-1)-face, sign]` with sign `±1`. `kind` defaults to
/// `simplicial`; `vertices` (coordinates, any ambient dimension) is optional
/// and enables geometric Hodge stars for simplicial complexes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComplexDocument {
    pub dim: usize,
    #[serde(default = "default_kind")]
    pub kind: ComplexKind,
    pub cells: Vec<usize>,
    pub boundary: Vec<Vec<(usize, usize, i64)>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vertices: Option<Vec<Vec<f64>>>,
}

fn default_kind() -> ComplexKind {
    ComplexKind::Simplicial
}

/// Parses and validates a complex from its JSON document text.
pub fn load_complex(text: &str) -> Result<CellComplex> {
    let doc: ComplexDocument =
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    CellComplex::from_document(&doc)
}

pub fn load_complex_file(path: &Path) -> Result<CellComplex> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    load_complex(&text)
}

/// Outcome of [`CellComplex::validate`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComplexReport {
    pub dim: usize,
    pub cell_counts: Vec<usize>,
    pub boundary_squared_zero: bool,
    pub entry_counts_ok: bool,
    pub closed: bool,
    /// Betti numbers over the rationals.
    pub betti: Vec<usize>,
    pub euler_characteristic: i64,
    pub failures: Vec<String>,
}

impl CellComplex {
    fn from_parts(
        dim: usize,
        kind: ComplexKind,
        cell_counts: Vec<usize>,
        boundary: Vec<CsrMatrix<i64>>,
        labels: Vec<Vec<CellLabel>>,
        grid: Option<GridSpec>,
        vertex_coords: Option<Vec<Vec<f64>>>,
    ) -> Result<Self> {
        if let Some(err) = boundary_squared_failure(&boundary) {
            return Err(err);
        }
        let coboundary = boundary.iter().map(CsrMatrix::transpose).collect();
        let closed = is_closed(dim, &boundary, &cell_counts);
        Ok(Self {
            dim,
            kind,
            cell_counts,
            boundary,
            coboundary,
            closed,
            labels,
            grid,
            vertex_coords,
        })
    }

    pub fn from_document(doc: &ComplexDocument) -> Result<Self> {
        let n = doc.dim;
        if !(1..=3).contains(&n) {
            return Err(Error::Parse(format!("dimension {n} not in 1..=3")));
        }
        if doc.cells.len() != n + 1 {
            return Err(Error::Parse(format!(
                "`cells` has {} entries, expected {}",
                doc.cells.len(),
                n + 1
            )));
        }
        if doc.boundary.len() != n {
            return Err(Error::Parse(format!(
                "`boundary` has {} degrees, expected {}",
                doc.boundary.len(),
                n
            )));
        }
        if let Some(pos) = doc.cells.iter().position(|&c| c == 0) {
            return Err(Error::Parse(format!("degree {pos} has no cells")));
        }

        let mut boundary = Vec::with_capacity(n);
        for k in 1..=n {
            let (hi, lo) = (doc.cells[k], doc.cells[k - 1]);
            let mut seen = BTreeSet::new();
            let mut per_cell = vec![0usize; hi];
            let mut triplets = Vec::with_capacity(doc.boundary[k - 1].len());
            for &(cell, face, sign) in &doc.boundary[k - 1] {
                if cell >= hi {
                    return Err(Error::Parse(format!(
                        "degree {k}: dangling cell reference {cell} (only {hi} cells)"
                    )));
                }
                if face >= lo {
                    return Err(Error::Parse(format!(
                        "degree {k}: cell {cell} references dangling face {face} (only {lo} faces)"
                    )));
                }
                if sign != 1 && sign != -1 {
                    return Err(Error::Parse(format!(
                        "degree {k}: cell {cell}, face {face}: sign {sign} is not ±1"
                    )));
                }
                if !seen.insert((cell, face)) {
                    return Err(Error::Parse(format!(
                        "degree {k}: duplicate entry for cell {cell}, face {face}"
                    )));
                }
                per_cell[cell] += 1;
                triplets.push((face, cell, sign));
            }
            let expected = match doc.kind {
                ComplexKind::Simplicial => k + 1,
                ComplexKind::Cubical => 2 * k,
            };
            if let Some(cell) = per_cell.iter().position(|&c| c != expected) {
                return Err(Error::Structure(format!(
                    "degree {k}: cell {cell} has {} boundary entries, expected {expected}",
                    per_cell[cell]
                )));
            }
            boundary.push(CsrMatrix::from_triplets(lo, hi, &triplets));
        }

        if let Some(err) = boundary_squared_failure(&boundary) {
            return Err(err);
        }

        let labels = match doc.kind {
            ComplexKind::Simplicial => simplex_labels(&doc.cells, &boundary)?,
            ComplexKind::Cubical => (0..=n)
                .map(|k| {
                    (0..doc.cells[k])
                        .map(|i| CellLabel::Simplex(vec![i]))
                        .collect()
                })
                .collect(),
        };

        if let Some(coords) = &doc.vertices {
            if coords.len() != doc.cells[0] {
                return Err(Error::Parse(format!(
                    "`vertices` has {} entries, expected {}",
                    coords.len(),
                    doc.cells[0]
                )));
            }
            let amb = coords.first().map_or(0, Vec::len);
            if coords.iter().any(|c| c.len() != amb) || amb < n {
                return Err(Error::Parse(
                    "vertex coordinates must share one ambient dimension ≥ dim".into(),
                ));
            }
            if doc.kind != ComplexKind::Simplicial {
                return Err(Error::Parse(
                    "vertex coordinates are only supported for simplicial complexes".into(),
                ));
            }
        }

        Self::from_parts(
            n,
            doc.kind,
            doc.cells.clone(),
            boundary,
            labels,
            None,
            doc.vertices.clone(),
        )
    }

    pub fn to_document(&self) -> ComplexDocument {
        ComplexDocument {
            dim: self.dim,
            kind: self.kind,
            cells: self.cell_counts.clone(),
            boundary: self
                .boundary
                .iter()
                .map(|b| {
                    let mut entries: Vec<_> = b.triplets().map(|(f, c, s)| (c, f, s)).collect();
                    entries.sort_unstable();
                    entries
                })
                .collect(),
            vertices: self.vertex_coords.clone(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> ComplexKind {
        self.kind
    }

    pub fn cell_counts(&self) -> &[usize] {
        &self.cell_counts
    }

    pub fn cell_count(&self, k: usize) -> usize {
        self.cell_counts[k]
    }

    pub fn is_closed(&self) -> bool {
        self.closed
    }

    pub fn grid(&self) -> Option<&GridSpec> {
        self.grid.as_ref()
    }

    pub fn vertex_coords(&self) -> Option<&[Vec<f64>]> {
        self.vertex_coords.as_deref()
    }

    pub fn labels(&self, k: usize) -> &[CellLabel] {
        &self.labels[k]
    }

    /// `∂_k` for `1 ≤ k ≤ n`.
    pub fn boundary(&self, k: usize) -> Result<&CsrMatrix<i64>> {
        if k == 0 || k > self.dim {
            return Err(Error::DegreeOutOfRange {
                degree: k,
                max: self.dim,
            });
        }
        Ok(&self.boundary[k - 1])
    }

    /// Matrix `D_k` of the exterior derivative on `k`-cochains, `0 ≤ k ≤ n-1`.
    pub fn coboundary(&self, k: usize) -> Result<&CsrMatrix<i64>> {
        if k >= self.dim {
            return Err(Error::DegreeOutOfRange {
                degree: k,
                max: self.dim.saturating_sub(1),
            });
        }
        Ok(&self.coboundary[k])
    }

    pub(crate) fn check_degree(&self, k: usize) -> Result<()> {
        if k > self.dim {
            return Err(Error::DegreeOutOfRange {
                degree: k,
                max: self.dim,
            });
        }
        Ok(())
    }

    /// Diagnostics: `∂∂ = 0`, per-cell entry counts, closedness and Betti numbers.
    pub fn validate(&self) -> ComplexReport {
        let mut failures = Vec::new();
        let squared_ok = match boundary_squared_failure(&self.boundary) {
            None => true,
            Some(err) => {
                failures.push(err.to_string());
                false
            }
        };

        let mut entries_ok = true;
        for (i, b) in self.boundary.iter().enumerate() {
            let k = i + 1;
            let expected = match self.kind {
                ComplexKind::Simplicial => k + 1,
                ComplexKind::Cubical => 2 * k,
            };
            let bt = &self.coboundary[i];
            for cell in 0..b.ncols() {
                let count = bt.row(cell).count();
                if count != expected {
                    entries_ok = false;
                    failures.push(format!(
                        "degree {k}: cell {cell} has {count} boundary entries, expected {expected}"
                    ));
                    break;
                }
            }
        }
        if !self.closed {
            failures.push("complex is not closed".into());
        }

        let ranks: Vec<usize> = self.boundary.iter().map(rank_over_rationals).collect();
        let betti: Vec<usize> = (0..=self.dim)
            .map(|k| {
                let rank_in = if k >= 1 { ranks[k - 1] } else { 0 };
                let rank_out = if k < self.dim { ranks[k] } else { 0 };
                self.cell_counts[k] - rank_in - rank_out
            })
            .collect();
        let euler = self
            .cell_counts
            .iter()
            .enumerate()
            .map(|(k, &c)| if k % 2 == 0 { c as i64 } else { -(c as i64) })
            .sum();

        ComplexReport {
            dim: self.dim,
            cell_counts: self.cell_counts.clone(),
            boundary_squared_zero: squared_ok,
            entry_counts_ok: entries_ok,
            closed: self.closed,
            betti,
            euler_characteristic: euler,
            failures,
        }
    }

    /// Graph distance between vertices along the 1-skeleton, from `source`.
    pub fn vertex_distances(&self, source: usize) -> Vec<usize> {
        let adjacency = self.vertex_adjacency();
        let mut dist = vec![usize::MAX; self.cell_counts[0]];
        let mut queue = std::collections::VecDeque::new();
        dist[source] = 0;
        queue.push_back(source);
        while let Some(v) = queue.pop_front() {
            for &w in &adjacency[v] {
                if dist[w] == usize::MAX {
                    dist[w] = dist[v] + 1;
                    queue.push_back(w);
                }
            }
        }
        dist
    }

    /// Neighbour lists of the 1-skeleton.
    pub fn vertex_adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.cell_counts[0]];
        if self.dim == 0 {
            return adj;
        }
        let d0 = &self.coboundary[0];
        for e in 0..d0.nrows() {
            let ends: Vec<usize> = d0.row(e).map(|(v, _)| v).collect();
            if let [a, b] = ends[..] {
                adj[a].push(b);
                adj[b].push(a);
            }
        }
        adj
    }

    /// Edge endpoints `(tail, head)` where `D_0` has `-1` at the tail.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let d0 = &self.coboundary[0];
        (0..d0.nrows())
            .map(|e| {
                let mut tail = 0;
                let mut head = 0;
                for (v, s) in d0.row(e) {
                    if s < 0 {
                        tail = v;
                    } else {
                        head = v;
                    }
                }
                (tail, head)
            })
            .collect()
    }
}

fn boundary_squared_failure(boundary: &[CsrMatrix<i64>]) -> Option<Error> {
    for k in 2..=boundary.len() {
        let product = boundary[k - 2].matmul(&boundary[k - 1]);
        let first = product.triplets().next();
        if let Some((face, cell, coefficient)) = first {
            return Some(Error::BoundaryNotClosed {
                degree: k,
                cell,
                face_degree: k - 2,
                face,
                coefficient,
            });
        }
    }
    None
}

fn is_closed(dim: usize, boundary: &[CsrMatrix<i64>], counts: &[usize]) -> bool {
    // every (n-1)-cell must be a face of exactly two n-cells
    let top = &boundary[dim - 1];
    (0..counts[dim - 1]).all(|f| top.row(f).count() == 2)
}

fn simplex_labels(counts: &[usize], boundary: &[CsrMatrix<i64>]) -> Result<Vec<Vec<CellLabel>>> {
    let mut sets: Vec<Vec<BTreeSet<usize>>> =
        vec![(0..counts[0]).map(|v| BTreeSet::from([v])).collect()];
    for k in 1..counts.len() {
        let faces_of = boundary[k - 1].transpose();
        let mut level = Vec::with_capacity(counts[k]);
        let mut index: HashMap<Vec<usize>, usize> = HashMap::new();
        for cell in 0..counts[k] {
            let mut verts = BTreeSet::new();
            for (f, _) in faces_of.row(cell) {
                verts.extend(sets[k - 1][f].iter().copied());
            }
            if verts.len() != k + 1 {
                return Err(Error::Structure(format!(
                    "degree {k}: cell {cell} spans {} vertices, expected {}",
                    verts.len(),
                    k + 1
                )));
            }
            let key: Vec<usize> = verts.iter().copied().collect();
            if let Some(prev) = index.insert(key, cell) {
                return Err(Error::Structure(format!(
                    "degree {k}: cells {prev} and {cell} share the same vertex set"
                )));
            }
            level.push(verts);
        }
        sets.push(level);
    }
    Ok(sets
        .into_iter()
        .map(|lvl| {
            lvl.into_iter()
                .map(|s| CellLabel::Simplex(s.into_iter().collect()))
                .collect()
        })
        .collect())
}
