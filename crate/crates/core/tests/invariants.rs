mod common;

use msgfem::coefficient::{generate_highcontrast, Pattern};
use msgfem::decomposition::{build_decomposition, pou_gradient_bound};
use msgfem::fem::{assemble_div, curl_of_stream};
use msgfem::mesh::build_cartesian_mesh;
use msgfem::{CellRegion, RasterField, RegionDofs};
use proptest::prelude::*;

use common::{check_local_invariants, saddle_vs_dense, Instance};

fn grid() -> impl Strategy<Value = (usize, usize)> {
    prop::sample::select(vec![(8usize, 2usize), (8, 4), (12, 2), (12, 3), (16, 2), (16, 4)])
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 16, ..ProptestConfig::default() })]

    #[test]
    fn local_bases_satisfy_invariants(
        (n, m) in grid(),
        ell in 1usize..5,
        contrast in prop::sample::select(vec![1.0f64, 10.0, 1e4]),
        seed in 0u64..10_000,
    ) {
        let r = check_local_invariants(Instance { n, m, ell, contrast, seed });
        prop_assert!(r.is_ok(), "{}", r.unwrap_err());
    }

    #[test]
    fn saddle_matches_dense_oracle(n in 2usize..8, gamma in prop::sample::select(vec![0.0, 1e-6, 1.0, 100.0]), seed in 0u64..10_000) {
        let gap = saddle_vs_dense(n, gamma, seed);
        prop_assert!(gap <= 1e-10, "relative gap {gap:e}");
    }

    #[test]
    fn partition_of_unity_is_nonnegative_and_sums_to_one((n, m) in grid(), ell in 1usize..6) {
        let mesh = build_cartesian_mesh(n, n).unwrap();
        let d = build_decomposition(&mesh, m, ell).unwrap();
        for v in 0..mesh.num_nodes() {
            let s: f64 = d.pou.iter().map(|chi| chi[v]).sum();
            prop_assert!((s - 1.0).abs() < 1e-12);
            prop_assert!(d.pou.iter().all(|chi| chi[v] >= 0.0));
        }
        prop_assert!(pou_gradient_bound(&mesh, &d).is_finite());
        for i in 0..d.len() {
            prop_assert!(d.omega0[i].is_subset_of(&d.omega[i]));
            prop_assert!(d.omega[i].is_subset_of(&d.omega_star[i]));
        }
    }

    #[test]
    fn curls_are_divergence_free(n in 1usize..10, seed in 0u64..1000) {
        let mesh = build_cartesian_mesh(n, n + 1).unwrap();
        let dofs = RegionDofs::new(&mesh, &CellRegion::whole(&mesh));
        let phi: Vec<f64> = (0..mesh.num_nodes()).map(|v| ((v as u64 * 2654435761 + seed) % 1000) as f64 / 100.0).collect();
        let u = curl_of_stream(&mesh, &phi, &dofs);
        let div = assemble_div(&mesh, &dofs).mul_vec(&u);
        prop_assert!(div.iter().all(|d| d.abs() < 1e-10));
    }

    #[test]
    fn raster_round_trip_is_bit_exact(nx in 1usize..12, ny in 1usize..12, seed in 0u64..1000) {
        let r = generate_highcontrast(nx.max(2), ny.max(2), Pattern::Inclusions, 123.456, seed).unwrap();
        let back = RasterField::parse(&r.format()).unwrap();
        prop_assert_eq!(&back, &r);
        let vals: Vec<f64> = (0..nx * ny).map(|k| (k as f64 + 0.1) / 7.0 * 10f64.powi((k % 7) as i32 - 3)).collect();
        let raw = RasterField::new(nx, ny, vals).unwrap();
        prop_assert_eq!(RasterField::parse(&raw.format()).unwrap(), raw);
    }
}
