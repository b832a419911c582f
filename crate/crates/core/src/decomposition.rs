//! Coarse `m x m` partition, overlapping and oversampled subdomains, and the
//! nodal partition of unity.

use crate::mesh::{CellRect, CellRegion, FineMesh};
use crate::{Error, Result};

/// Layers added to each coarse block to form the overlapping subdomains.
pub const DEFAULT_OVERLAP: usize = 2;

#[derive(Debug, Clone)]
pub struct Decomposition {
    pub m: usize,
    pub overlap: usize,
    pub ell: usize,
    pub omega0_rects: Vec<CellRect>,
    pub omega_rects: Vec<CellRect>,
    pub omega_star_rects: Vec<CellRect>,
    pub omega0: Vec<CellRegion>,
    pub omega: Vec<CellRegion>,
    pub omega_star: Vec<CellRegion>,
    /// `pou[i]` holds the nodal values of `chi_i` on the whole mesh.
    pub pou: Vec<Vec<f64>>,
}

impl Decomposition {
    /// Number of subdomains `M = m^2`.
    pub fn len(&self) -> usize {
        self.omega0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omega0.is_empty()
    }

    /// Index of the coarse block containing the cell.
    pub fn coarse_cell_of(&self, mesh: &FineMesh, c: usize) -> usize {
        let (i, j) = mesh.cell_ij(c);
        let sx = mesh.n_x() / self.m;
        let sy = mesh.n_y() / self.m;
        (j / sy) * self.m + i / sx
    }

    /// Largest number of overlapping subdomains containing any one cell.
    pub fn overlap_count(&self, mesh: &FineMesh) -> usize {
        max_cover(mesh, &self.omega_rects)
    }

    /// Same count for the oversampling domains.
    pub fn oversampling_overlap_count(&self, mesh: &FineMesh) -> usize {
        max_cover(mesh, &self.omega_star_rects)
    }
}

fn max_cover(mesh: &FineMesh, rects: &[CellRect]) -> usize {
    let mut count = vec![0usize; mesh.num_cells()];
    for r in rects {
        for j in r.j0..r.j1 {
            for i in r.i0..r.i1 {
                count[mesh.cell_index(i, j)] += 1;
            }
        }
    }
    count.into_iter().max().unwrap_or(0)
}

pub fn build_decomposition(mesh: &FineMesh, m: usize, ell: usize) -> Result<Decomposition> {
    build_decomposition_with_overlap(mesh, m, DEFAULT_OVERLAP, ell)
}

pub fn build_decomposition_with_overlap(
    mesh: &FineMesh,
    m: usize,
    overlap: usize,
    ell: usize,
) -> Result<Decomposition> {
    if m == 0 || mesh.n_x() % m != 0 || mesh.n_y() % m != 0 {
        return Err(Error::InvalidInput(format!(
            "m = {m} must divide the mesh size {}x{}",
            mesh.n_x(),
            mesh.n_y()
        )));
    }
    if ell == 0 {
        return Err(Error::InvalidInput("oversampling layers must be at least 1".into()));
    }
    if overlap == 0 {
        return Err(Error::InvalidInput("overlap layers must be at least 1".into()));
    }
    let sx = mesh.n_x() / m;
    let sy = mesh.n_y() / m;
    let mut d = Decomposition {
        m,
        overlap,
        ell,
        omega0_rects: Vec::new(),
        omega_rects: Vec::new(),
        omega_star_rects: Vec::new(),
        omega0: Vec::new(),
        omega: Vec::new(),
        omega_star: Vec::new(),
        pou: Vec::new(),
    };
    for bj in 0..m {
        for bi in 0..m {
            let r0 = CellRect { i0: bi * sx, i1: (bi + 1) * sx, j0: bj * sy, j1: (bj + 1) * sy };
            let r = r0.grow(overlap, mesh);
            let rs = r.grow(ell, mesh);
            d.omega0.push(CellRegion::from_rect(mesh, r0)?);
            d.omega.push(CellRegion::from_rect(mesh, r)?);
            d.omega_star.push(CellRegion::from_rect(mesh, rs)?);
            d.omega0_rects.push(r0);
            d.omega_rects.push(r);
            d.omega_star_rects.push(rs);
        }
    }
    d.pou = partition_of_unity(mesh, &d.omega_rects, overlap);
    Ok(d)
}

/// Ramp weights: distance in cells to the sides of the overlapping rectangle
/// that lie inside the domain, scaled by the width of the overlap band, then
/// normalized nodewise.
fn partition_of_unity(mesh: &FineMesh, rects: &[CellRect], overlap: usize) -> Vec<Vec<f64>> {
    let (nx, ny) = (mesh.n_x(), mesh.n_y());
    let band = (2 * overlap) as f64;
    let mut raw: Vec<Vec<f64>> = rects
        .iter()
        .map(|r| {
            let mut w = vec![0.0; mesh.num_nodes()];
            for b in r.j0..=r.j1 {
                for a in r.i0..=r.i1 {
                    let mut dist = f64::INFINITY;
                    if r.i0 > 0 {
                        dist = dist.min((a - r.i0) as f64);
                    }
                    if r.i1 < nx {
                        dist = dist.min((r.i1 - a) as f64);
                    }
                    if r.j0 > 0 {
                        dist = dist.min((b - r.j0) as f64);
                    }
                    if r.j1 < ny {
                        dist = dist.min((r.j1 - b) as f64);
                    }
                    w[mesh.node_index(a, b)] = (dist / band).min(1.0);
                }
            }
            w
        })
        .collect();
    for v in 0..mesh.num_nodes() {
        let total: f64 = raw.iter().map(|w| w[v]).sum();
        debug_assert!(total > 0.0);
        for w in raw.iter_mut() {
            w[v] /= total;
        }
    }
    raw
}

/// Largest gradient magnitude of any `chi_i`, evaluated at the corners of
/// each cell (the extrema of a bilinear gradient on a rectangle).
pub fn pou_gradient_bound(mesh: &FineMesh, decomp: &Decomposition) -> f64 {
    let (hx, hy) = (mesh.h_x(), mesh.h_y());
    let mut best = 0.0f64;
    for chi in &decomp.pou {
        for c in 0..mesh.num_cells() {
            let [n00, n10, n01, n11] = mesh.cell_nodes(c);
            let (bot, top) = (chi[n10] - chi[n00], chi[n11] - chi[n01]);
            let (left, right) = (chi[n01] - chi[n00], chi[n11] - chi[n10]);
            for gx in [bot, top] {
                for gy in [left, right] {
                    best = best.max(((gx / hx).powi(2) + (gy / hy).powi(2)).sqrt());
                }
            }
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_cartesian_mesh;

    #[test]
    fn block_sizes() {
        let mesh = build_cartesian_mesh(100, 100).unwrap();
        let d = build_decomposition(&mesh, 4, 3).unwrap();
        assert_eq!(d.len(), 16);
        assert!(d.omega0.iter().all(|r| r.len() == 625));
        // interior subdomain (1,1)
        assert_eq!(d.omega_rects[5].width(), 29);
        assert_eq!(d.omega_rects[5].height(), 29);
        // corner subdomain is clipped
        assert_eq!(d.omega_rects[0].width(), 27);
        assert_eq!(d.omega_star_rects[5].width(), 35);
    }

    #[test]
    fn partition_nesting_and_pou() {
        let mesh = build_cartesian_mesh(24, 24).unwrap();
        let d = build_decomposition(&mesh, 3, 2).unwrap();
        let mut owner = vec![0usize; mesh.num_cells()];
        for i in 0..d.len() {
            for &c in d.omega0[i].cells() {
                owner[c] += 1;
            }
            assert!(d.omega0[i].is_subset_of(&d.omega[i]));
            assert!(d.omega[i].is_subset_of(&d.omega_star[i]));
        }
        assert!(owner.iter().all(|&k| k == 1));
        for v in 0..mesh.num_nodes() {
            let s: f64 = d.pou.iter().map(|chi| chi[v]).sum();
            assert!((s - 1.0).abs() < 1e-14);
        }
        for (i, chi) in d.pou.iter().enumerate() {
            let r = d.omega_rects[i];
            for v in 0..mesh.num_nodes() {
                assert!((0.0..=1.0).contains(&chi[v]));
                let (a, b) = mesh.node_ij(v);
                let inside = a >= r.i0 && a <= r.i1 && b >= r.j0 && b <= r.j1;
                if !inside {
                    assert_eq!(chi[v], 0.0);
                }
            }
        }
        assert_eq!(d.overlap_count(&mesh), 4);
        assert!(d.oversampling_overlap_count(&mesh) >= 4);
        assert_eq!(d.coarse_cell_of(&mesh, mesh.cell_index(9, 17)), 2 * 3 + 1);
    }

    #[test]
    fn pointwise_overlap_never_exceeds_four() {
        for (n, m) in [(16, 2), (30, 5), (36, 6), (64, 8)] {
            let mesh = build_cartesian_mesh(n, n).unwrap();
            let d = build_decomposition(&mesh, m, 1).unwrap();
            // brute force over every cell and every subdomain
            let mut worst = 0;
            for c in 0..mesh.num_cells() {
                worst = worst.max(d.omega.iter().filter(|r| r.contains(c)).count());
            }
            assert!(worst <= 4);
            assert_eq!(worst, d.overlap_count(&mesh));
        }
    }

    #[test]
    fn gradient_bound() {
        let mesh = build_cartesian_mesh(8, 8).unwrap();
        assert_eq!(pou_gradient_bound(&mesh, &build_decomposition(&mesh, 1, 1).unwrap()), 0.0);
        // ramp over 2 * overlap = 4 cells: slope 1 / (4 h) along one axis
        let mesh = build_cartesian_mesh(32, 32).unwrap();
        let d = build_decomposition(&mesh, 2, 1).unwrap();
        let g = pou_gradient_bound(&mesh, &d);
        let ramp = 1.0 / (4.0 * mesh.h_x());
        assert!(g >= ramp * (1.0 - 1e-12) && g <= 2.0 * ramp, "{g} vs {ramp}");
        let fine = build_cartesian_mesh(64, 64).unwrap();
        let g2 = pou_gradient_bound(&fine, &build_decomposition(&fine, 2, 1).unwrap());
        assert!((g2 / g - 2.0).abs() < 1e-10);
    }

    #[test]
    fn rejects_bad_parameters() {
        let mesh = build_cartesian_mesh(10, 10).unwrap();
        assert!(build_decomposition(&mesh, 3, 2).is_err());
        assert!(build_decomposition(&mesh, 0, 2).is_err());
        assert!(build_decomposition(&mesh, 2, 0).is_err());
        assert!(build_decomposition_with_overlap(&mesh, 2, 0, 1).is_err());
    }
}
