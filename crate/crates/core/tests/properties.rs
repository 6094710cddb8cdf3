use aitchison_unmix::geometry::{self, OrthonormalBasis, SimplexVector};
use aitchison_unmix::io::{
    format_float, read_vectors_from, write_vectors_to, AbundanceStackFile, CubeFile, Dtype,
};
use aitchison_unmix::prior::AbundanceImage;
use aitchison_unmix::sampler::project_simplex;
use aitchison_unmix::uq::{self, hdr, DensityEstimator};
use nalgebra::DMatrix;
use proptest::prelude::*;

/// Interior compositions of dimension 2..=8, built from positive weights.
fn composition() -> impl Strategy<Value = SimplexVector> {
    (2usize..=8).prop_flat_map(|p| {
        prop::collection::vec(1e-3f64..1.0, p)
            .prop_map(|w| SimplexVector::closed(w).expect("positive weights"))
    })
}

fn compositions(p: usize, n: usize) -> impl Strategy<Value = Vec<SimplexVector>> {
    prop::collection::vec(
        prop::collection::vec(1e-3f64..1.0, p).prop_map(|w| SimplexVector::closed(w).unwrap()),
        n,
    )
}

fn orthogonal(dim: usize, seed: &[f64]) -> DMatrix<f64> {
    DMatrix::from_fn(dim, dim, |r, c| {
        seed[(r * dim + c) % seed.len()] + (r == c) as u8 as f64
    })
    .qr()
    .q()
}

proptest! {
    #[test]
    fn ilr_round_trip(a in composition()) {
        let basis = OrthonormalBasis::helmert(a.dim()).unwrap();
        let back = geometry::ilr_inv(&geometry::ilr(&a, &basis).unwrap(), &basis).unwrap();
        for (x, y) in back.as_slice().iter().zip(a.as_slice()) {
            prop_assert!((x - y).abs() < 1e-10);
        }
    }

    #[test]
    fn clr_sums_to_zero(a in composition()) {
        prop_assert!(geometry::clr(&a).unwrap().sum().abs() < 1e-12);
    }

    #[test]
    fn mirror_map_is_projected_log(a in composition()) {
        let basis = OrthonormalBasis::helmert(a.dim()).unwrap();
        let logs = a.as_vector().map(f64::ln);
        let expected = basis.matrix().transpose() * logs.add_scalar(-logs.mean());
        let got = geometry::mirror_map(&a, &basis).unwrap();
        for (x, y) in got.as_slice().iter().zip(expected.iter()) {
            prop_assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn triangle_inequality(abc in compositions(4, 3)) {
        let basis = OrthonormalBasis::helmert(4).unwrap();
        let d = |x: &SimplexVector, y: &SimplexVector| geometry::geodesic_distance(x, y, &basis).unwrap();
        prop_assert!(d(&abc[0], &abc[2]) <= d(&abc[0], &abc[1]) + d(&abc[1], &abc[2]) + 1e-12);
    }

    #[test]
    fn geodesic_path_is_linear_in_distance(ab in compositions(3, 2), t in 0.0f64..=1.0) {
        let basis = OrthonormalBasis::helmert(3).unwrap();
        let mid = geometry::geodesic_path(&ab[0], &ab[1], t, &basis).unwrap();
        let full = geometry::geodesic_distance(&ab[0], &ab[1], &basis).unwrap();
        let part = geometry::geodesic_distance(&ab[0], &mid, &basis).unwrap();
        prop_assert!((part - t * full).abs() < 1e-10);
    }

    #[test]
    fn distance_does_not_depend_on_basis(ab in compositions(5, 2), seed in prop::collection::vec(-1.0f64..1.0, 16)) {
        let helmert = OrthonormalBasis::helmert(5).unwrap();
        let rotated = helmert.rotated(&orthogonal(4, &seed)).unwrap();
        let d1 = geometry::geodesic_distance(&ab[0], &ab[1], &helmert).unwrap();
        let d2 = geometry::geodesic_distance(&ab[0], &ab[1], &rotated).unwrap();
        prop_assert!((d1 - d2).abs() < 1e-12);
    }

    #[test]
    fn projection_lands_on_simplex_and_is_idempotent(v in prop::collection::vec(-5.0f64..5.0, 2..8)) {
        let a = project_simplex(&v).unwrap();
        prop_assert!(a.as_slice().iter().all(|&x| x >= 0.0));
        prop_assert!((a.as_slice().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let again = project_simplex(a.as_slice()).unwrap();
        for (x, y) in again.as_slice().iter().zip(a.as_slice()) {
            prop_assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn geodesic_mean_is_permutation_equivariant(samples in compositions(4, 7)) {
        let basis = OrthonormalBasis::helmert(4).unwrap();
        let perm = [2, 0, 3, 1];
        let permuted: Vec<SimplexVector> = samples.iter().map(|a| a.permuted(&perm).unwrap()).collect();
        let lhs = uq::geodesic_mean(&permuted, &basis).unwrap();
        let rhs = uq::geodesic_mean(&samples, &basis).unwrap().permuted(&perm).unwrap();
        for (x, y) in lhs.as_slice().iter().zip(rhs.as_slice()) {
            prop_assert!((x - y).abs() < 1e-10);
        }
    }

    #[test]
    fn total_variance_does_not_depend_on_basis(samples in compositions(3, 9), seed in prop::collection::vec(-1.0f64..1.0, 4)) {
        let helmert = OrthonormalBasis::helmert(3).unwrap();
        let rotated = helmert.rotated(&orthogonal(2, &seed)).unwrap();
        let v1 = uq::geodesic_total_variance(&samples, &helmert).unwrap();
        let v2 = uq::geodesic_total_variance(&samples, &rotated).unwrap();
        prop_assert!((v1 - v2).abs() < 1e-10);
    }

    #[test]
    fn hdr_regions_are_nested(samples in compositions(3, 200), a1 in 0.05f64..0.5, gap in 0.01f64..0.4) {
        let est = DensityEstimator::Histogram { bins: 12 };
        let wide = hdr(&samples, a1, &est).unwrap();
        let narrow = hdr(&samples, a1 + gap, &est).unwrap();
        for cell in &narrow.region {
            prop_assert!(wide.region.contains(cell));
        }
    }

    #[test]
    fn hdr_in_sample_coverage_bound(samples in compositions(3, 150), alpha in 0.02f64..0.9, kde in any::<bool>()) {
        let est = if kde {
            DensityEstimator::LatentKde { bandwidth: None, grid: 12 }
        } else {
            DensityEstimator::Histogram { bins: 10 }
        };
        let m = samples.len() as f64;
        let region = hdr(&samples, alpha, &est).unwrap();
        prop_assert!(region.in_sample_coverage() >= 1.0 - alpha - 1.0 / m);
    }

    #[test]
    fn float_text_is_lossless(rows in prop::collection::vec(prop::collection::vec(any::<f64>().prop_filter("finite", |x| x.is_finite()), 3), 1..6)) {
        let mut buf = Vec::new();
        write_vectors_to(&mut buf, None, &rows).unwrap();
        let (_, back) = read_vectors_from(&buf[..]).unwrap();
        prop_assert_eq!(&back, &rows);
        for x in rows.iter().flatten() {
            prop_assert_eq!(format_float(*x).parse::<f64>().unwrap(), *x);
        }
    }

    #[test]
    fn cube_bytes_round_trip(vals in prop::collection::vec(-1e6f64..1e6, 12), f32_payload in any::<bool>()) {
        let dtype = if f32_payload { Dtype::Float32 } else { Dtype::Float64 };
        let cube = CubeFile::new(DMatrix::from_vec(2, 6, vals), 3, 2, dtype).unwrap();
        let bytes = cube.to_bytes().unwrap();
        let back = CubeFile::from_reader(&bytes[..]).unwrap();
        prop_assert_eq!(back.to_bytes().unwrap(), bytes);
    }

    #[test]
    fn stack_bytes_round_trip(frames in prop::collection::vec(compositions(3, 4), 1..4), f32_payload in any::<bool>()) {
        let dtype = if f32_payload { Dtype::Float32 } else { Dtype::Float64 };
        let images: Vec<AbundanceImage> = frames
            .iter()
            .map(|px| AbundanceImage::from_pixels(px, 2, 2).unwrap())
            .collect();
        let bytes = AbundanceStackFile::from_images(&images, dtype).unwrap().to_bytes().unwrap();
        let back = AbundanceStackFile::from_reader(&bytes[..]).unwrap();
        prop_assert_eq!(back.to_bytes().unwrap(), bytes);
    }
}
