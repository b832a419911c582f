//! Lowest-order Raviart–Thomas / piecewise-constant forms on the fine grid.
//!
//! All routines work in the local numbering of a [`RegionDofs`]; passing the
//! whole-mesh numbering gives global operators. Element integrals are exact
//! for cell-wise constant coefficients.

use std::ops::{Deref, DerefMut};

use crate::mesh::{CellRegion, FineMesh, RegionDofs, CELL_EDGE_SIGNS};
use crate::sparse::{DofKind, SparseOperator};
use crate::{Error, Result};

macro_rules! dof_vector {
    ($(#[$doc:meta])* $name:ident) => {
        $(#[$doc])*
        #[derive(Debug, Clone, PartialEq, Default)]
        pub struct $name(pub Vec<f64>);

        impl $name {
            pub fn zeros(n: usize) -> Self {
                Self(vec![0.0; n])
            }

            pub fn into_inner(self) -> Vec<f64> {
                self.0
            }
        }

        impl Deref for $name {
            type Target = [f64];
            fn deref(&self) -> &[f64] {
                &self.0
            }
        }

        impl DerefMut for $name {
            fn deref_mut(&mut self) -> &mut [f64] {
                &mut self.0
            }
        }

        impl From<Vec<f64>> for $name {
            fn from(v: Vec<f64>) -> Self {
                Self(v)
            }
        }
    };
}

dof_vector!(
    /// Integrated normal fluxes, one per edge, w.r.t. the global edge normal.
    VelocityVector
);
dof_vector!(
    /// Cell values of a piecewise-constant pressure.
    PressureVector
);
dof_vector!(
    /// Nodal values of a bilinear stream function.
    StreamVector
);

/// Cell-wise constant permeability.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientField {
    values: Vec<f64>,
    alpha0: f64,
    alpha1: f64,
}

impl CoefficientField {
    pub fn new(mesh: &FineMesh, values: Vec<f64>) -> Result<Self> {
        if values.len() != mesh.num_cells() {
            return Err(Error::InvalidInput(format!(
                "coefficient has {} values for {} cells",
                values.len(),
                mesh.num_cells()
            )));
        }
        if let Some((c, v)) = values.iter().enumerate().find(|(_, v)| !(v.is_finite() && **v > 0.0)) {
            return Err(Error::InvalidInput(format!(
                "coefficient must be positive and finite, cell {c} has {v}"
            )));
        }
        let alpha0 = values.iter().copied().fold(f64::INFINITY, f64::min);
        let alpha1 = values.iter().copied().fold(0.0, f64::max);
        Ok(CoefficientField { values, alpha0, alpha1 })
    }

    pub fn uniform(mesh: &FineMesh, value: f64) -> Result<Self> {
        Self::new(mesh, vec![value; mesh.num_cells()])
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, cell: usize) -> f64 {
        self.values[cell]
    }

    pub fn alpha0(&self) -> f64 {
        self.alpha0
    }

    pub fn alpha1(&self) -> f64 {
        self.alpha1
    }

    pub fn contrast(&self) -> f64 {
        self.alpha1 / self.alpha0
    }

    pub fn scaled(&self, s: f64) -> Result<Self> {
        Self::new_unchecked_len(self.values.iter().map(|v| v * s).collect())
    }

    fn new_unchecked_len(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::InvalidInput("coefficient must be positive and finite".into()));
        }
        let alpha0 = values.iter().copied().fold(f64::INFINITY, f64::min);
        let alpha1 = values.iter().copied().fold(0.0, f64::max);
        Ok(CoefficientField { values, alpha0, alpha1 })
    }
}

fn local_cell_edges(mesh: &FineMesh, dofs: &RegionDofs, c: usize) -> [usize; 4] {
    mesh.cell_edges(c).map(|e| {
        dofs.local_edge(e)
            .expect("edges of region cells are always mapped")
    })
}

fn mass_triplets(
    mesh: &FineMesh,
    coeff: &CoefficientField,
    dofs: &RegionDofs,
    cells: impl Iterator<Item = usize>,
) -> Vec<(usize, usize, f64)> {
    let (hx, hy) = (mesh.h_x(), mesh.h_y());
    let mut t = Vec::new();
    for c in cells {
        let inv = 1.0 / coeff.value(c);
        let [l, r, b, top] = local_cell_edges(mesh, dofs, c);
        let sx = inv * hx / hy;
        let sy = inv * hy / hx;
        for (p, q, s) in [(l, r, sx), (b, top, sy)] {
            t.push((p, p, s / 3.0));
            t.push((q, q, s / 3.0));
            t.push((p, q, s / 6.0));
            t.push((q, p, s / 6.0));
        }
    }
    t
}

/// Weighted velocity mass matrix `a(u, v) = (A^{-1} u, v)` over the region.
pub fn assemble_mass(
    mesh: &FineMesh,
    coeff: &CoefficientField,
    dofs: &RegionDofs,
) -> Result<SparseOperator> {
    let t = mass_triplets(mesh, coeff, dofs, dofs.cells.iter().copied());
    let n = dofs.num_edges();
    Ok(SparseOperator::from_triplets(n, n, t, DofKind::Edge, DofKind::Edge))
}

/// Mass matrix in the numbering of `dofs`, integrated only over the cells of
/// `sub` that belong to the region.
pub fn assemble_mass_on(
    mesh: &FineMesh,
    coeff: &CoefficientField,
    dofs: &RegionDofs,
    sub: &CellRegion,
) -> Result<SparseOperator> {
    let cells = dofs.cells.iter().copied().filter(|&c| sub.contains(c));
    let t = mass_triplets(mesh, coeff, dofs, cells);
    let n = dofs.num_edges();
    Ok(SparseOperator::from_triplets(n, n, t, DofKind::Edge, DofKind::Edge))
}

/// Divergence coupling `b(u, q) = (div u, q)`: rows are cells, columns edges,
/// entries the outward sign of the edge flux.
pub fn assemble_div(mesh: &FineMesh, dofs: &RegionDofs) -> SparseOperator {
    let mut t = Vec::with_capacity(4 * dofs.num_cells());
    for (k, &c) in dofs.cells.iter().enumerate() {
        for (e, s) in local_cell_edges(mesh, dofs, c).into_iter().zip(CELL_EDGE_SIGNS) {
            t.push((k, e, s));
        }
    }
    SparseOperator::from_triplets(dofs.num_cells(), dofs.num_edges(), t, DofKind::Cell, DofKind::Edge)
}

/// Augmented form `a + gamma (div u, div v)`.
pub fn assemble_augmented(
    mesh: &FineMesh,
    mass: &SparseOperator,
    div: &SparseOperator,
    gamma: f64,
) -> Result<SparseOperator> {
    if !(gamma >= 0.0 && gamma.is_finite()) {
        return Err(Error::InvalidInput(format!("gamma must be nonnegative, got {gamma}")));
    }
    if div.ncols() != mass.nrows() {
        return Err(Error::InvalidInput("mass and divergence dimensions differ".into()));
    }
    if gamma == 0.0 {
        return Ok(mass.clone());
    }
    let dtd = div.transpose().matmul(div)?;
    mass.add_scaled(&dtd, gamma / mesh.cell_area())
}

/// Cell-wise divergence values of a velocity field.
pub fn cell_divergence(mesh: &FineMesh, div: &SparseOperator, u: &[f64]) -> Vec<f64> {
    let area = mesh.cell_area();
    div.mul_vec(u).into_iter().map(|s| s / area).collect()
}

/// Value of the RT0 field with cell fluxes `[left, right, bottom, top]` at a
/// point of the cell.
pub fn rt0_value(mesh: &FineMesh, cell: usize, fluxes: [f64; 4], x: f64, y: f64) -> (f64, f64) {
    let (i, j) = mesh.cell_ij(cell);
    let (hx, hy) = (mesh.h_x(), mesh.h_y());
    let xi = x - i as f64 * hx;
    let eta = y - j as f64 * hy;
    let ux = (fluxes[0] * (hx - xi) + fluxes[1] * xi) / (hx * hy);
    let uy = (fluxes[2] * (hy - eta) + fluxes[3] * eta) / (hx * hy);
    (ux, uy)
}

/// RT interpolant of `chi * u` where `chi` is a global nodal bilinear field and
/// `u` a velocity in the numbering of `dofs`.
///
/// The normal component of an RT0 field is constant on each edge and `chi`
/// is linear along it, so the edge moment is the flux times the mean of
/// `chi` at the two endpoints.
pub fn rt_interpolate_scaled(
    mesh: &FineMesh,
    chi: &[f64],
    u: &[f64],
    dofs: &RegionDofs,
) -> VelocityVector {
    assert_eq!(chi.len(), mesh.num_nodes());
    assert_eq!(u.len(), dofs.num_edges());
    dofs.edges
        .iter()
        .zip(u)
        .map(|(&e, &flux)| {
            let [a, b] = mesh.edge_nodes(e);
            flux * 0.5 * (chi[a] + chi[b])
        })
        .collect::<Vec<_>>()
        .into()
}

/// Discrete curl from nodal stream functions to edge fluxes, as an
/// `edges x nodes` operator in the numbering of `dofs`.
pub fn curl_operator(mesh: &FineMesh, dofs: &RegionDofs) -> SparseOperator {
    let mut t = Vec::with_capacity(2 * dofs.num_edges());
    for (k, &e) in dofs.edges.iter().enumerate() {
        let [start, end] = mesh.edge_nodes(e);
        let s = dofs.local_node(start).expect("edge endpoints belong to the region");
        let f = dofs.local_node(end).expect("edge endpoints belong to the region");
        t.push((k, f, 1.0));
        t.push((k, s, -1.0));
    }
    SparseOperator::from_triplets(dofs.num_edges(), dofs.num_nodes(), t, DofKind::Edge, DofKind::Node)
}

/// `curl phi = (d phi / dy, -d phi / dx)` as edge fluxes: the difference of
/// the stream function along each edge.
pub fn curl_of_stream(mesh: &FineMesh, phi: &[f64], dofs: &RegionDofs) -> VelocityVector {
    assert_eq!(phi.len(), dofs.num_nodes());
    dofs.edges
        .iter()
        .map(|&e| {
            let [start, end] = mesh.edge_nodes(e);
            let s = dofs.local_node(start).expect("edge endpoints belong to the region");
            let f = dofs.local_node(end).expect("edge endpoints belong to the region");
            phi[f] - phi[s]
        })
        .collect::<Vec<_>>()
        .into()
}

/// Load vector `(f, q)` for a cell-wise source, restricted to the region.
pub fn assemble_load(mesh: &FineMesh, f: &[f64], dofs: &RegionDofs) -> PressureVector {
    assert_eq!(f.len(), mesh.num_cells());
    let area = mesh.cell_area();
    dofs.cells.iter().map(|&c| f[c] * area).collect::<Vec<_>>().into()
}

/// Edge load `gamma * b(v, f) = gamma * B^T f` for cell values `f` given in
/// the numbering of the divergence operator.
pub fn gamma_div_load(div: &SparseOperator, f_cells: &[f64], gamma: f64) -> Vec<f64> {
    div.mul_transpose_vec(f_cells)
        .into_iter()
        .map(|v| gamma * v)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_cartesian_mesh, CellRect};
    use faer::Side;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn whole(mesh: &FineMesh) -> RegionDofs {
        RegionDofs::new(mesh, &CellRegion::whole(mesh))
    }

    #[test]
    fn unit_cell_mass_entries() {
        // Symbolic integration of the RT0 shape functions on [0,1]^2:
        // int x^2 = 1/3, int x (1 - x) = 1/6, perpendicular pairs vanish.
        let mesh = build_cartesian_mesh(1, 1).unwrap();
        let dofs = whole(&mesh);
        let a = CoefficientField::uniform(&mesh, 1.0).unwrap();
        let m = assemble_mass(&mesh, &a, &dofs).unwrap();
        let [l, r, b, t] = mesh.cell_edges(0);
        assert!((m.get(l, l) - 1.0 / 3.0).abs() < 1e-15);
        assert!((m.get(t, t) - 1.0 / 3.0).abs() < 1e-15);
        assert!((m.get(l, r) - 1.0 / 6.0).abs() < 1e-15);
        assert!((m.get(b, t) - 1.0 / 6.0).abs() < 1e-15);
        assert_eq!(m.get(l, b), 0.0);
        assert_eq!(m.get(r, t), 0.0);
    }

    #[test]
    fn mass_scales_inversely_with_coefficient() {
        let mesh = build_cartesian_mesh(3, 4).unwrap();
        let dofs = whole(&mesh);
        let a = CoefficientField::uniform(&mesh, 1.0).unwrap();
        let m1 = assemble_mass(&mesh, &a, &dofs).unwrap();
        let m2 = assemble_mass(&mesh, &a.scaled(4.0).unwrap(), &dofs).unwrap();
        let diff = &m1.to_dense() * 0.25 - m2.to_dense();
        assert!(diff.norm_max() < 1e-15);
    }

    #[test]
    fn mass_is_symmetric_positive_definite() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for n in [2usize, 8, 16] {
            let mesh = build_cartesian_mesh(n, n).unwrap();
            let vals = (0..mesh.num_cells()).map(|_| rng.random_range(0.01..100.0)).collect();
            let a = CoefficientField::new(&mesh, vals).unwrap();
            let m = assemble_mass(&mesh, &a, &whole(&mesh)).unwrap();
            assert!(m.max_asymmetry() == 0.0);
            let ev = m.to_dense().self_adjoint_eigenvalues(Side::Lower).unwrap();
            assert!(ev[0] > 0.0, "smallest eigenvalue {} on {n}x{n}", ev[0]);
        }
    }

    #[test]
    fn rejects_nonpositive_coefficient() {
        let mesh = build_cartesian_mesh(2, 2).unwrap();
        assert!(CoefficientField::new(&mesh, vec![1.0, 0.0, 1.0, 1.0]).is_err());
        assert!(CoefficientField::new(&mesh, vec![1.0, -2.0, 1.0, 1.0]).is_err());
        assert!(CoefficientField::new(&mesh, vec![1.0; 3]).is_err());
    }

    #[test]
    fn divergence_of_unit_flux_basis() {
        let mesh = build_cartesian_mesh(3, 3).unwrap();
        let dofs = whole(&mesh);
        let b = assemble_div(&mesh, &dofs);
        for c in 0..mesh.num_cells() {
            for (e, s) in mesh.cell_edges(c).into_iter().zip(CELL_EDGE_SIGNS) {
                assert_eq!(b.get(c, e), s);
            }
        }
        // at most two nonzeros per edge column
        let bt = b.transpose();
        for e in 0..mesh.num_edges() {
            assert!(bt.row(e).0.len() <= 2);
        }
    }

    #[test]
    fn divergence_matches_flux_balance() {
        let mesh = build_cartesian_mesh(4, 4).unwrap();
        let dofs = whole(&mesh);
        let b = assemble_div(&mesh, &dofs);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let u: Vec<f64> = (0..mesh.num_edges()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let q: Vec<f64> = (0..mesh.num_cells()).map(|_| rng.random_range(-1.0..1.0)).collect();
        // brute force: net outward flux per cell, right - left + top - bottom
        let mut brute = 0.0;
        for j in 0..4 {
            for i in 0..4 {
                let out = u[mesh.vertical_edge(i + 1, j)] - u[mesh.vertical_edge(i, j)]
                    + u[mesh.horizontal_edge(i, j + 1)]
                    - u[mesh.horizontal_edge(i, j)];
                brute += q[mesh.cell_index(i, j)] * out;
            }
        }
        assert!((b.form(&q, &u) - brute).abs() < 1e-13);
        // summing all rows leaves only the domain-boundary flux functional
        let ones = vec![1.0; mesh.num_cells()];
        let total = b.mul_transpose_vec(&ones);
        for e in 0..mesh.num_edges() {
            if mesh.is_boundary_edge(e) {
                let outward = if mesh.edge_cells(e)[1].is_some() { -1.0 } else { 1.0 };
                assert_eq!(total[e], outward);
            } else {
                assert_eq!(total[e], 0.0);
            }
        }
    }

    #[test]
    fn augmented_form() {
        let mesh = build_cartesian_mesh(4, 4).unwrap();
        let dofs = whole(&mesh);
        let a = CoefficientField::uniform(&mesh, 2.0).unwrap();
        let m = assemble_mass(&mesh, &a, &dofs).unwrap();
        let b = assemble_div(&mesh, &dofs);
        assert_eq!(assemble_augmented(&mesh, &m, &b, 0.0).unwrap(), m);
        assert!(assemble_augmented(&mesh, &m, &b, -1.0).is_err());
        let ag = assemble_augmented(&mesh, &m, &b, 1.0).unwrap();
        assert!(ag.max_asymmetry() < 1e-14);
        let phi: Vec<f64> = (0..mesh.num_nodes()).map(|v| (v as f64 * 0.37).sin()).collect();
        let u = curl_of_stream(&mesh, &phi, &dofs);
        assert!((ag.form(&u, &u) - m.form(&u, &u)).abs() < 1e-12);
    }

    #[test]
    fn curl_examples() {
        let mesh = build_cartesian_mesh(3, 2).unwrap();
        let dofs = whole(&mesh);
        let u = curl_of_stream(&mesh, &vec![2.5; mesh.num_nodes()], &dofs);
        assert!(u.iter().all(|&v| v == 0.0));
        // phi = y gives u = (1, 0): vertical fluxes h_y, horizontal fluxes 0
        let phi: Vec<f64> = (0..mesh.num_nodes()).map(|v| mesh.node_coords(v).1).collect();
        let u = curl_of_stream(&mesh, &phi, &dofs);
        for e in 0..mesh.num_edges() {
            let want = match mesh.edge_axis(e) {
                crate::mesh::EdgeAxis::Vertical => mesh.h_y(),
                crate::mesh::EdgeAxis::Horizontal => 0.0,
            };
            assert!((u[e] - want).abs() < 1e-15);
        }
        let c = curl_operator(&mesh, &dofs);
        assert_eq!(c.mul_vec(&phi), u.0);
    }

    #[test]
    fn curl_is_divergence_free() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for (nx, ny) in [(1, 1), (4, 7), (9, 3)] {
            let mesh = build_cartesian_mesh(nx, ny).unwrap();
            let dofs = whole(&mesh);
            let b = assemble_div(&mesh, &dofs);
            let phi: Vec<f64> = (0..mesh.num_nodes()).map(|_| rng.random_range(-5.0..5.0)).collect();
            let u = curl_of_stream(&mesh, &phi, &dofs);
            assert!(b.mul_vec(&u).iter().all(|d| d.abs() < 1e-13));
        }
    }

    #[test]
    fn interpolation_identity_and_support() {
        let mesh = build_cartesian_mesh(5, 5).unwrap();
        let region = CellRegion::from_rect(&mesh, CellRect { i0: 1, i1: 4, j0: 0, j1: 3 }).unwrap();
        let dofs = RegionDofs::new(&mesh, &region);
        let u: Vec<f64> = (0..dofs.num_edges()).map(|k| (k as f64).cos()).collect();
        let ones = vec![1.0; mesh.num_nodes()];
        assert_eq!(rt_interpolate_scaled(&mesh, &ones, &u, &dofs).0, u);

        let mut chi = vec![1.0; mesh.num_nodes()];
        let target = dofs.edges[3];
        for v in mesh.edge_nodes(target) {
            chi[v] = 0.0;
        }
        let out = rt_interpolate_scaled(&mesh, &chi, &u, &dofs);
        assert_eq!(out[3], 0.0);
    }

    fn random_bilinear_chi(mesh: &FineMesh, rng: &mut ChaCha8Rng) -> Vec<f64> {
        (0..mesh.num_nodes()).map(|_| rng.random_range(0.0..1.0)).collect()
    }

    #[test]
    fn interpolation_commutes_with_divergence() {
        // cell divergence of Pi_h(chi u) against the boundary integral of
        // (chi u) . nu computed with Simpson's rule on every edge
        let mesh = build_cartesian_mesh(6, 6).unwrap();
        let dofs = whole(&mesh);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let chi = random_bilinear_chi(&mesh, &mut rng);
        let u: Vec<f64> = (0..mesh.num_edges()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let b = assemble_div(&mesh, &dofs);
        let pi = rt_interpolate_scaled(&mesh, &chi, &u, &dofs);
        let div_pi = cell_divergence(&mesh, &b, &pi);
        let chi_at = |c: usize, x: f64, y: f64| {
            let (i, j) = mesh.cell_ij(c);
            let s = x / mesh.h_x() - i as f64;
            let t = y / mesh.h_y() - j as f64;
            let [n00, n10, n01, n11] = mesh.cell_nodes(c);
            chi[n00] * (1.0 - s) * (1.0 - t) + chi[n10] * s * (1.0 - t) + chi[n01] * (1.0 - s) * t
                + chi[n11] * s * t
        };
        for c in 0..mesh.num_cells() {
            let fl = mesh.cell_edges(c).map(|e| u[e]);
            let (i, j) = mesh.cell_ij(c);
            let (x0, y0) = (i as f64 * mesh.h_x(), j as f64 * mesh.h_y());
            let (x1, y1) = (x0 + mesh.h_x(), y0 + mesh.h_y());
            let simpson = |g: &dyn Fn(f64) -> f64, len: f64| {
                len / 6.0 * (g(0.0) + 4.0 * g(0.5) + g(1.0))
            };
            let right = simpson(&|t| { let y = y0 + t * mesh.h_y(); chi_at(c, x1, y) * rt0_value(&mesh, c, fl, x1, y).0 }, mesh.h_y());
            let left = simpson(&|t| { let y = y0 + t * mesh.h_y(); chi_at(c, x0, y) * rt0_value(&mesh, c, fl, x0, y).0 }, mesh.h_y());
            let top = simpson(&|t| { let x = x0 + t * mesh.h_x(); chi_at(c, x, y1) * rt0_value(&mesh, c, fl, x, y1).1 }, mesh.h_x());
            let bottom = simpson(&|t| { let x = x0 + t * mesh.h_x(); chi_at(c, x, y0) * rt0_value(&mesh, c, fl, x, y0).1 }, mesh.h_x());
            let avg = (right - left + top - bottom) / mesh.cell_area();
            assert!((avg - div_pi[c]).abs() < 1e-12, "cell {c}: {avg} vs {}", div_pi[c]);
        }
    }

    #[test]
    fn interpolation_divergence_bound() {
        // ||div Pi_h(chi u)|| <= ||grad chi||_inf ||u|| for divergence-free u
        let mesh = build_cartesian_mesh(8, 8).unwrap();
        let dofs = whole(&mesh);
        let a = CoefficientField::uniform(&mesh, 1.0).unwrap();
        let m = assemble_mass(&mesh, &a, &dofs).unwrap();
        let b = assemble_div(&mesh, &dofs);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            let chi = random_bilinear_chi(&mesh, &mut rng);
            let phi: Vec<f64> = (0..mesh.num_nodes()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let u = curl_of_stream(&mesh, &phi, &dofs);
            let pi = rt_interpolate_scaled(&mesh, &chi, &u, &dofs);
            let div = cell_divergence(&mesh, &b, &pi);
            let div_norm = (div.iter().map(|d| d * d).sum::<f64>() * mesh.cell_area()).sqrt();
            let mut grad = 0.0f64;
            for c in 0..mesh.num_cells() {
                let [n00, n10, n01, n11] = mesh.cell_nodes(c);
                for (dx, dy) in [
                    (chi[n10] - chi[n00], chi[n01] - chi[n00]),
                    (chi[n10] - chi[n00], chi[n11] - chi[n10]),
                    (chi[n11] - chi[n01], chi[n01] - chi[n00]),
                    (chi[n11] - chi[n01], chi[n11] - chi[n10]),
                ] {
                    grad = grad.max(((dx / mesh.h_x()).powi(2) + (dy / mesh.h_y()).powi(2)).sqrt());
                }
            }
            let u_norm = m.form(&u, &u).sqrt();
            assert!(div_norm <= grad * u_norm * (1.0 + 1e-12), "{div_norm} > {grad} * {u_norm}");
        }
    }

    #[test]
    fn loads() {
        let mesh = build_cartesian_mesh(4, 4).unwrap();
        let dofs = whole(&mesh);
        let zero = assemble_load(&mesh, &[0.0; 16], &dofs);
        assert!(zero.iter().all(|&v| v == 0.0));
        let f: Vec<f64> = (0..16).map(|c| c as f64).collect();
        let load = assemble_load(&mesh, &f, &dofs);
        assert!((load[5] - 5.0 / 16.0).abs() < 1e-15);
        let b = assemble_div(&mesh, &dofs);
        let g = gamma_div_load(&b, &f, 2.0);
        assert_eq!(g, b.mul_transpose_vec(&f).iter().map(|v| 2.0 * v).collect::<Vec<_>>());
    }
}
