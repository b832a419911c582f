//! Uniform rectangular mesh of the unit square and cell regions on it.
//!
//! Numbering is fixed and deterministic:
//!
//! * cells are row-major, `c = j * n_x + i`;
//! * vertical edges come first, row-major over `(i, j)` with `i in 0..=n_x`,
//!   then horizontal edges row-major over `(i, j)` with `j in 0..=n_y`;
//! * nodes are row-major over the `(n_x + 1) x (n_y + 1)` vertex grid.
//!
//! Every edge carries a fixed global unit normal: `+x` for vertical edges and
//! `+y` for horizontal ones. Velocity degrees of freedom are integrated normal
//! fluxes with respect to that normal.

use crate::{Error, Result};

/// Orientation of an edge, which also fixes its global normal.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeAxis {
    /// Edge parallel to the y axis, normal `+x`.
    Vertical,
    /// Edge parallel to the x axis, normal `+y`.
    Horizontal,
}

/// Outward-normal sign of the four cell edges in `[left, right, bottom, top]`
/// order relative to the global edge normals.
pub const CELL_EDGE_SIGNS: [f64; 4] = [-1.0, 1.0, -1.0, 1.0];

#[derive(Debug, Clone, PartialEq)]
pub struct FineMesh {
    n_x: usize,
    n_y: usize,
    h_x: f64,
    h_y: f64,
}

impl FineMesh {
    pub fn n_x(&self) -> usize {
        self.n_x
    }

    pub fn n_y(&self) -> usize {
        self.n_y
    }

    pub fn h_x(&self) -> f64 {
        self.h_x
    }

    pub fn h_y(&self) -> f64 {
        self.h_y
    }

    pub fn num_cells(&self) -> usize {
        self.n_x * self.n_y
    }

    pub fn num_vertical_edges(&self) -> usize {
        self.n_y * (self.n_x + 1)
    }

    pub fn num_edges(&self) -> usize {
        self.num_vertical_edges() + self.n_x * (self.n_y + 1)
    }

    pub fn num_nodes(&self) -> usize {
        (self.n_x + 1) * (self.n_y + 1)
    }

    /// Number of unknowns of the RT0/P0 pair on this mesh.
    pub fn mixed_dof_count(&self) -> usize {
        self.num_edges() + self.num_cells()
    }

    pub fn cell_area(&self) -> f64 {
        self.h_x * self.h_y
    }

    pub fn cell_index(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < self.n_x && j < self.n_y);
        j * self.n_x + i
    }

    pub fn cell_ij(&self, c: usize) -> (usize, usize) {
        (c % self.n_x, c / self.n_x)
    }

    pub fn node_index(&self, i: usize, j: usize) -> usize {
        debug_assert!(i <= self.n_x && j <= self.n_y);
        j * (self.n_x + 1) + i
    }

    pub fn node_ij(&self, v: usize) -> (usize, usize) {
        (v % (self.n_x + 1), v / (self.n_x + 1))
    }

    pub fn node_coords(&self, v: usize) -> (f64, f64) {
        let (i, j) = self.node_ij(v);
        (i as f64 * self.h_x, j as f64 * self.h_y)
    }

    /// Vertical edge on the line `x = i h_x` spanning cell row `j`.
    pub fn vertical_edge(&self, i: usize, j: usize) -> usize {
        debug_assert!(i <= self.n_x && j < self.n_y);
        j * (self.n_x + 1) + i
    }

    /// Horizontal edge on the line `y = j h_y` spanning cell column `i`.
    pub fn horizontal_edge(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < self.n_x && j <= self.n_y);
        self.num_vertical_edges() + j * self.n_x + i
    }

    pub fn edge_axis(&self, e: usize) -> EdgeAxis {
        if e < self.num_vertical_edges() {
            EdgeAxis::Vertical
        } else {
            EdgeAxis::Horizontal
        }
    }

    /// Grid position of an edge: `(i, j)` as used by [`Self::vertical_edge`] or
    /// [`Self::horizontal_edge`].
    pub fn edge_ij(&self, e: usize) -> (usize, usize) {
        let nv = self.num_vertical_edges();
        if e < nv {
            (e % (self.n_x + 1), e / (self.n_x + 1))
        } else {
            let k = e - nv;
            (k % self.n_x, k / self.n_x)
        }
    }

    pub fn edge_length(&self, e: usize) -> f64 {
        match self.edge_axis(e) {
            EdgeAxis::Vertical => self.h_y,
            EdgeAxis::Horizontal => self.h_x,
        }
    }

    /// Midpoint of an edge.
    pub fn edge_midpoint(&self, e: usize) -> (f64, f64) {
        let (i, j) = self.edge_ij(e);
        match self.edge_axis(e) {
            EdgeAxis::Vertical => (i as f64 * self.h_x, (j as f64 + 0.5) * self.h_y),
            EdgeAxis::Horizontal => ((i as f64 + 0.5) * self.h_x, j as f64 * self.h_y),
        }
    }

    /// Cells on the negative and positive side of the edge normal.
    pub fn edge_cells(&self, e: usize) -> [Option<usize>; 2] {
        let (i, j) = self.edge_ij(e);
        match self.edge_axis(e) {
            EdgeAxis::Vertical => [
                (i > 0).then(|| self.cell_index(i - 1, j)),
                (i < self.n_x).then(|| self.cell_index(i, j)),
            ],
            EdgeAxis::Horizontal => [
                (j > 0).then(|| self.cell_index(i, j - 1)),
                (j < self.n_y).then(|| self.cell_index(i, j)),
            ],
        }
    }

    /// Start and end node of an edge, ordered along the tangent obtained by
    /// rotating the global normal by +90 degrees.
    ///
    /// For a vertical edge the tangent is `+y`; for a horizontal edge it is
    /// `-x`, so the flux of `curl phi` through the edge is
    /// `phi(end) - phi(start)`.
    pub fn edge_nodes(&self, e: usize) -> [usize; 2] {
        let (i, j) = self.edge_ij(e);
        match self.edge_axis(e) {
            EdgeAxis::Vertical => [self.node_index(i, j), self.node_index(i, j + 1)],
            EdgeAxis::Horizontal => [self.node_index(i + 1, j), self.node_index(i, j)],
        }
    }

    pub fn is_boundary_edge(&self, e: usize) -> bool {
        let [a, b] = self.edge_cells(e);
        a.is_none() || b.is_none()
    }

    pub fn is_boundary_node(&self, v: usize) -> bool {
        let (i, j) = self.node_ij(v);
        i == 0 || j == 0 || i == self.n_x || j == self.n_y
    }

    /// Edges of a cell in `[left, right, bottom, top]` order.
    pub fn cell_edges(&self, c: usize) -> [usize; 4] {
        let (i, j) = self.cell_ij(c);
        [
            self.vertical_edge(i, j),
            self.vertical_edge(i + 1, j),
            self.horizontal_edge(i, j),
            self.horizontal_edge(i, j + 1),
        ]
    }

    /// Corner nodes of a cell: `[(i, j), (i+1, j), (i, j+1), (i+1, j+1)]`.
    pub fn cell_nodes(&self, c: usize) -> [usize; 4] {
        let (i, j) = self.cell_ij(c);
        [
            self.node_index(i, j),
            self.node_index(i + 1, j),
            self.node_index(i, j + 1),
            self.node_index(i + 1, j + 1),
        ]
    }

    pub fn cell_centroid(&self, c: usize) -> (f64, f64) {
        let (i, j) = self.cell_ij(c);
        ((i as f64 + 0.5) * self.h_x, (j as f64 + 0.5) * self.h_y)
    }
}

/// Builds the uniform `n_x x n_y` grid on the unit square.
pub fn build_cartesian_mesh(n_x: usize, n_y: usize) -> Result<FineMesh> {
    if n_x == 0 || n_y == 0 {
        return Err(Error::InvalidInput(format!(
            "mesh size must be positive, got {n_x} x {n_y}"
        )));
    }
    Ok(FineMesh {
        n_x,
        n_y,
        h_x: 1.0 / n_x as f64,
        h_y: 1.0 / n_y as f64,
    })
}

/// Half-open rectangle of cell indices `[i0, i1) x [j0, j1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CellRect {
    pub i0: usize,
    pub i1: usize,
    pub j0: usize,
    pub j1: usize,
}

impl CellRect {
    pub fn width(&self) -> usize {
        self.i1 - self.i0
    }

    pub fn height(&self) -> usize {
        self.j1 - self.j0
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        (self.i0..self.i1).contains(&i) && (self.j0..self.j1).contains(&j)
    }

    pub fn contains_rect(&self, other: &CellRect) -> bool {
        self.i0 <= other.i0 && other.i1 <= self.i1 && self.j0 <= other.j0 && other.j1 <= self.j1
    }

    /// Grows the rectangle by `layers` cells on every side, clipped to the mesh.
    pub fn grow(&self, layers: usize, mesh: &FineMesh) -> CellRect {
        CellRect {
            i0: self.i0.saturating_sub(layers),
            i1: (self.i1 + layers).min(mesh.n_x()),
            j0: self.j0.saturating_sub(layers),
            j1: (self.j1 + layers).min(mesh.n_y()),
        }
    }
}

/// An edge-connected set of mesh cells.
#[derive(Debug, Clone, PartialEq)]
pub struct CellRegion {
    mask: Vec<bool>,
    cells: Vec<usize>,
}

impl CellRegion {
    /// Builds a region from arbitrary cell indices; rejects empty or
    /// disconnected sets.
    pub fn from_cells(mesh: &FineMesh, cells: impl IntoIterator<Item = usize>) -> Result<Self> {
        let mut mask = vec![false; mesh.num_cells()];
        for c in cells {
            if c >= mesh.num_cells() {
                return Err(Error::InvalidInput(format!("cell {c} outside the mesh")));
            }
            mask[c] = true;
        }
        let cells: Vec<usize> = (0..mask.len()).filter(|&c| mask[c]).collect();
        if cells.is_empty() {
            return Err(Error::InvalidInput("empty cell region".into()));
        }
        let region = CellRegion { mask, cells };
        if !region.is_edge_connected(mesh) {
            return Err(Error::InvalidInput("cell region is not edge-connected".into()));
        }
        Ok(region)
    }

    pub fn from_rect(mesh: &FineMesh, rect: CellRect) -> Result<Self> {
        if rect.i0 >= rect.i1 || rect.j0 >= rect.j1 || rect.i1 > mesh.n_x() || rect.j1 > mesh.n_y()
        {
            return Err(Error::InvalidInput(format!("invalid cell rectangle {rect:?}")));
        }
        let mut mask = vec![false; mesh.num_cells()];
        let mut cells = Vec::with_capacity(rect.width() * rect.height());
        for j in rect.j0..rect.j1 {
            for i in rect.i0..rect.i1 {
                let c = mesh.cell_index(i, j);
                mask[c] = true;
                cells.push(c);
            }
        }
        Ok(CellRegion { mask, cells })
    }

    pub fn whole(mesh: &FineMesh) -> Self {
        CellRegion {
            mask: vec![true; mesh.num_cells()],
            cells: (0..mesh.num_cells()).collect(),
        }
    }

    pub fn contains(&self, c: usize) -> bool {
        self.mask[c]
    }

    /// Sorted cell indices.
    pub fn cells(&self) -> &[usize] {
        &self.cells
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn is_subset_of(&self, other: &CellRegion) -> bool {
        self.cells.iter().all(|&c| other.contains(c))
    }

    fn is_edge_connected(&self, mesh: &FineMesh) -> bool {
        let mut seen = vec![false; self.mask.len()];
        let mut stack = vec![self.cells[0]];
        seen[self.cells[0]] = true;
        let mut count = 0;
        while let Some(c) = stack.pop() {
            count += 1;
            for e in mesh.cell_edges(c) {
                for nb in mesh.edge_cells(e).into_iter().flatten() {
                    if self.mask[nb] && !seen[nb] {
                        seen[nb] = true;
                        stack.push(nb);
                    }
                }
            }
        }
        count == self.cells.len()
    }

    /// Number of region cells adjacent to the edge (0, 1 or 2).
    pub fn edge_multiplicity(&self, mesh: &FineMesh, e: usize) -> usize {
        mesh.edge_cells(e)
            .into_iter()
            .flatten()
            .filter(|&c| self.mask[c])
            .count()
    }

    /// Sorted edges incident to at least one region cell.
    pub fn edges(&self, mesh: &FineMesh) -> Vec<usize> {
        let mut edges: Vec<usize> = self.cells.iter().flat_map(|&c| mesh.cell_edges(c)).collect();
        edges.sort_unstable();
        edges.dedup();
        edges
    }

    /// Edges shared by two region cells.
    pub fn interior_edges(&self, mesh: &FineMesh) -> Vec<usize> {
        self.edges(mesh)
            .into_iter()
            .filter(|&e| self.edge_multiplicity(mesh, e) == 2)
            .collect()
    }

    /// Edges adjacent to exactly one region cell.
    pub fn boundary_edges(&self, mesh: &FineMesh) -> Vec<usize> {
        self.edges(mesh)
            .into_iter()
            .filter(|&e| self.edge_multiplicity(mesh, e) == 1)
            .collect()
    }

    /// Sorted corner nodes of the region cells.
    pub fn nodes(&self, mesh: &FineMesh) -> Vec<usize> {
        let mut nodes: Vec<usize> = self.cells.iter().flat_map(|&c| mesh.cell_nodes(c)).collect();
        nodes.sort_unstable();
        nodes.dedup();
        nodes
    }

    pub fn area(&self, mesh: &FineMesh) -> f64 {
        self.cells.len() as f64 * mesh.cell_area()
    }
}

/// Splits the boundary edges of a region into those on the domain boundary
/// and those in the domain interior.
pub fn region_boundary_split(
    mesh: &FineMesh,
    region: &CellRegion,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if region.is_empty() {
        return Err(Error::InvalidInput("empty cell region".into()));
    }
    Ok(region
        .boundary_edges(mesh)
        .into_iter()
        .partition(|&e| mesh.is_boundary_edge(e)))
}

const UNMAPPED: usize = usize::MAX;

/// Local numbering of the cells, edges and nodes of a region.
///
/// Local indices follow the sorted global order, so for the whole mesh the
/// local and global numberings coincide.
#[derive(Debug, Clone)]
pub struct RegionDofs {
    pub cells: Vec<usize>,
    pub edges: Vec<usize>,
    pub nodes: Vec<usize>,
    cell_map: Vec<usize>,
    edge_map: Vec<usize>,
    node_map: Vec<usize>,
}

impl RegionDofs {
    pub fn new(mesh: &FineMesh, region: &CellRegion) -> Self {
        let cells = region.cells().to_vec();
        let edges = region.edges(mesh);
        let nodes = region.nodes(mesh);
        let invert = |ids: &[usize], n: usize| {
            let mut map = vec![UNMAPPED; n];
            for (k, &g) in ids.iter().enumerate() {
                map[g] = k;
            }
            map
        };
        RegionDofs {
            cell_map: invert(&cells, mesh.num_cells()),
            edge_map: invert(&edges, mesh.num_edges()),
            node_map: invert(&nodes, mesh.num_nodes()),
            cells,
            edges,
            nodes,
        }
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn local_cell(&self, global: usize) -> Option<usize> {
        Some(self.cell_map[global]).filter(|&k| k != UNMAPPED)
    }

    pub fn local_edge(&self, global: usize) -> Option<usize> {
        Some(self.edge_map[global]).filter(|&k| k != UNMAPPED)
    }

    pub fn local_node(&self, global: usize) -> Option<usize> {
        Some(self.node_map[global]).filter(|&k| k != UNMAPPED)
    }

    /// Copies a local edge vector into the numbering of `target`, dropping
    /// entries `target` does not own.
    pub fn transfer_edges(&self, values: &[f64], target: &RegionDofs) -> Vec<f64> {
        let mut out = vec![0.0; target.num_edges()];
        for (k, &g) in self.edges.iter().enumerate() {
            if let Some(t) = target.local_edge(g) {
                out[t] = values[k];
            }
        }
        out
    }

    /// Copies a local cell vector into the numbering of `target`.
    pub fn transfer_cells(&self, values: &[f64], target: &RegionDofs) -> Vec<f64> {
        let mut out = vec![0.0; target.num_cells()];
        for (k, &g) in self.cells.iter().enumerate() {
            if let Some(t) = target.local_cell(g) {
                out[t] = values[k];
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn counts_small_meshes() {
        let m = build_cartesian_mesh(2, 2).unwrap();
        assert_eq!(m.num_cells(), 4);
        assert_eq!(m.num_edges(), 12);
        assert_eq!(m.num_vertical_edges(), 6);

        let m = build_cartesian_mesh(1, 1).unwrap();
        assert_eq!(m.num_cells(), 1);
        assert_eq!(m.num_edges(), 4);
        assert!((0..4).all(|e| m.is_boundary_edge(e)));
    }

    #[test]
    fn counts_example_three_mesh() {
        let m = build_cartesian_mesh(240, 240).unwrap();
        assert_eq!(m.num_cells(), 57600);
        assert_eq!(m.num_edges(), 115680);
        assert_eq!(m.mixed_dof_count(), 173280);
    }

    #[test]
    fn rejects_zero_size() {
        assert!(build_cartesian_mesh(0, 3).is_err());
        assert!(build_cartesian_mesh(3, 0).is_err());
    }

    #[test]
    fn edge_cell_adjacency() {
        let m = build_cartesian_mesh(5, 3).unwrap();
        for e in 0..m.num_edges() {
            let n = m.edge_cells(e).iter().flatten().count();
            assert_eq!(n, if m.is_boundary_edge(e) { 1 } else { 2 });
        }
        // every cell lists each of its edges with the matching side
        for c in 0..m.num_cells() {
            for (k, e) in m.cell_edges(c).into_iter().enumerate() {
                let [minus, plus] = m.edge_cells(e);
                if CELL_EDGE_SIGNS[k] > 0.0 {
                    assert_eq!(minus, Some(c));
                } else {
                    assert_eq!(plus, Some(c));
                }
            }
        }
        let area: f64 = (0..m.num_cells()).map(|_| m.cell_area()).sum();
        assert!((area - 1.0).abs() < 1e-14);
    }

    #[test]
    fn boundary_split_whole_and_single_cell() {
        let m = build_cartesian_mesh(4, 4).unwrap();
        let (dom, int) = region_boundary_split(&m, &CellRegion::whole(&m)).unwrap();
        assert_eq!(dom.len(), 16);
        assert!(int.is_empty());

        let single = CellRegion::from_cells(&m, [m.cell_index(1, 2)]).unwrap();
        let (dom, int) = region_boundary_split(&m, &single).unwrap();
        assert!(dom.is_empty());
        assert_eq!(int.len(), 4);
    }

    #[test]
    fn boundary_split_corner_block() {
        // Hand enumeration for the bottom-left 2x2 block of a 4x4 mesh:
        // domain boundary = left edges of rows 0,1 and bottom edges of columns 0,1;
        // interior boundary = right edges at x=2 (rows 0,1) and top edges at y=2
        // (columns 0,1).
        let m = build_cartesian_mesh(4, 4).unwrap();
        let block = CellRegion::from_rect(&m, CellRect { i0: 0, i1: 2, j0: 0, j1: 2 }).unwrap();
        let (dom, int) = region_boundary_split(&m, &block).unwrap();
        let mut want_dom = vec![
            m.vertical_edge(0, 0),
            m.vertical_edge(0, 1),
            m.horizontal_edge(0, 0),
            m.horizontal_edge(1, 0),
        ];
        let mut want_int = vec![
            m.vertical_edge(2, 0),
            m.vertical_edge(2, 1),
            m.horizontal_edge(0, 2),
            m.horizontal_edge(1, 2),
        ];
        want_dom.sort_unstable();
        want_int.sort_unstable();
        assert_eq!(dom, want_dom);
        assert_eq!(int, want_int);
    }

    #[test]
    fn rejects_disconnected_and_empty_regions() {
        let m = build_cartesian_mesh(3, 3).unwrap();
        assert!(CellRegion::from_cells(&m, [0, 8]).is_err());
        assert!(CellRegion::from_cells(&m, std::iter::empty()).is_err());
        // diagonal neighbours only share a node
        assert!(CellRegion::from_cells(&m, [0, 4]).is_err());
    }

    #[test]
    fn numbering_is_deterministic() {
        let a = build_cartesian_mesh(7, 5).unwrap();
        let b = build_cartesian_mesh(7, 5).unwrap();
        let ea: Vec<_> = (0..a.num_cells()).map(|c| a.cell_edges(c)).collect();
        let eb: Vec<_> = (0..b.num_cells()).map(|c| b.cell_edges(c)).collect();
        assert_eq!(ea, eb);
        // bijection between edge index and grid position
        for e in 0..a.num_edges() {
            let (i, j) = a.edge_ij(e);
            let back = match a.edge_axis(e) {
                EdgeAxis::Vertical => a.vertical_edge(i, j),
                EdgeAxis::Horizontal => a.horizontal_edge(i, j),
            };
            assert_eq!(back, e);
        }
    }

    proptest! {
        #[test]
        fn rectangular_region_edge_bookkeeping(
            nx in 1usize..9, ny in 1usize..9,
            a in 0usize..9, b in 0usize..9, c in 0usize..9, d in 0usize..9,
        ) {
            let m = build_cartesian_mesh(nx, ny).unwrap();
            let (i0, i1) = (a.min(b) % nx, a.max(b) % nx + 1);
            let (i0, i1) = (i0.min(i1 - 1), i1.max(i0 + 1));
            let (j0, j1) = (c.min(d) % ny, c.max(d) % ny + 1);
            let (j0, j1) = (j0.min(j1 - 1), j1.max(j0 + 1));
            let region = CellRegion::from_rect(&m, CellRect { i0, i1, j0, j1 }).unwrap();
            let (dom, int) = region_boundary_split(&m, &region).unwrap();
            let boundary = region.boundary_edges(&m);
            // disjoint and exhaustive
            prop_assert!(dom.iter().all(|e| !int.contains(e)));
            let mut union: Vec<usize> = dom.iter().chain(int.iter()).copied().collect();
            union.sort_unstable();
            prop_assert_eq!(&union, &boundary);
            // |boundary| + 2 |interior| = incidences
            let interior = region.interior_edges(&m);
            prop_assert_eq!(boundary.len() + 2 * interior.len(), 4 * region.len());
        }
    }
}
