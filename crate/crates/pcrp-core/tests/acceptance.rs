//! Acceptance gate: nine desk-scale criteria covering the full pipeline,
//! each printing a single PASS/FAIL verdict line (visible with
//! `cargo test --test acceptance -- --nocapture`).

use std::f64::consts::TAU;
use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector, Point3, Unit, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use pcrp_core::descriptors::{compute_fpfh, estimate_normals, FPFH_DIM};
use pcrp_core::frpointhop::{
    extract_features, fit_model, fit_saab_full, FrPointHopModel, HopConfig,
};
use pcrp_core::geometry::{
    random_rigid_transform, rotation_about_axis, PointCloud, RigidTransform,
};
use pcrp_core::registration::{
    estimate_pose, icp_baseline, procrustes, ransac_pose, register_pair, rotation_error_deg,
    symmetry_partition, Correspondence, RegistrationOptions,
};
use pcrp_core::retrieval::{
    build_gallery, compute_vlad, fit_codebook, retrieve, GalleryIndex, GalleryObject,
};

fn verdict(number: usize, name: &str, pass: bool, detail: &str) {
    println!(
        "acceptance {number}/9 {name}: {} — {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "criterion {number} ({name}) failed: {detail}");
}

fn random_cloud(n: usize, seed: u64) -> PointCloud {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points = (0..n)
        .map(|_| {
            Point3::new(
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            )
        })
        .collect();
    PointCloud::new(points).unwrap()
}

/// A smooth blob with enough surface variation for stable normals.
fn blob_cloud(n: usize, seed: u64) -> PointCloud {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points = (0..n)
        .map(|_| {
            let theta = rng.random_range(0.0..TAU);
            let z: f64 = rng.random_range(-1.0..1.0);
            let ring = (1.0 - z * z).sqrt();
            let r = 1.0 + 0.3 * (2.0 * theta).sin() * (1.0 - z * z);
            Point3::new(ring * theta.cos() * r, ring * theta.sin() * r, z)
        })
        .collect();
    PointCloud::new(points).unwrap()
}

// -------------------------------------------------------------------------
// 1. Procrustes exactness

#[test]
fn criterion_1_procrustes_exactness() {
    let mut worst_rotation = 0.0f64;
    let mut worst_translation = 0.0f64;
    let mut failures = 0;
    for i in 0..100u64 {
        let cloud = random_cloud(50, 10_000 + i);
        let truth = random_rigid_transform(20_000 + i, 180.0, 2.0);
        let source: Vec<Point3<f64>> = cloud.points().to_vec();
        let target: Vec<Point3<f64>> = source.iter().map(|p| truth.apply(p)).collect();
        let fit = procrustes(&source, &target).unwrap();
        let rot_err = rotation_error_deg(fit.rotation(), truth.rotation());
        let trans_err = (fit.translation() - truth.translation()).norm();
        worst_rotation = worst_rotation.max(rot_err);
        worst_translation = worst_translation.max(trans_err);
        if rot_err >= 1e-6 || trans_err >= 1e-9 {
            failures += 1;
        }
    }
    verdict(
        1,
        "procrustes exactness",
        failures == 0,
        &format!(
            "100 instances, worst rotation {worst_rotation:.3e} deg (< 1e-6), worst translation {worst_translation:.3e} (< 1e-9)"
        ),
    );
}

// -------------------------------------------------------------------------
// 2. FPFH rigid invariance

#[test]
fn criterion_2_fpfh_rigid_invariance() {
    let k = 12;
    let mut worst = 0.0f64;
    for c in 0..20u64 {
        let cloud = blob_cloud(120, 30_000 + c);
        let normals = estimate_normals(&cloud, k).unwrap();
        let base = compute_fpfh(&cloud, &normals, k).unwrap();
        for t in 0..5u64 {
            let motion = random_rigid_transform(40_000 + 5 * c + t, 180.0, 3.0);
            let moved = cloud.transformed(&motion);
            let moved_normals = estimate_normals(&moved, k).unwrap();
            let moved_fpfh = compute_fpfh(&moved, &moved_normals, k).unwrap();
            for (a, b) in base.iter().zip(&moved_fpfh) {
                for bin in 0..FPFH_DIM {
                    worst = worst.max((a.bins()[bin] - b.bins()[bin]).abs());
                }
            }
        }
    }
    verdict(
        2,
        "fpfh rigid invariance",
        worst < 1e-6,
        &format!("20 clouds x 5 motions, max per-bin difference {worst:.3e} (< 1e-6)"),
    );
}

// -------------------------------------------------------------------------
// 3. Saab correctness against an independent eigendecomposition

#[test]
fn criterion_3_saab_correctness() {
    let d = 12;
    let n = 400;
    // Samples with a designed, well-separated spectrum.
    let mut rng = ChaCha8Rng::seed_from_u64(50_000);
    let gains: Vec<f64> = (0..d).map(|i| 3.0 / (1.0 + i as f64)).collect();
    let mixer = random_rigid_mixer(d, 50_001);
    let samples = DMatrix::from_fn(n, d, |_, _| rng.random_range(-1.0..1.0f64));
    let samples = {
        let scaled = DMatrix::from_fn(n, d, |r, c| samples[(r, c)] * gains[c]);
        scaled * mixer.transpose()
    };

    let kernel = fit_saab_full(&samples).unwrap();
    let k = kernel.ac_kernels();
    let dc = DVector::from_element(d, 1.0 / (d as f64).sqrt());

    // (a) Orthonormality of the full kernel set (DC plus AC rows).
    let mut ortho_err = 0.0f64;
    for i in 0..k.nrows() {
        let row_i = k.row(i).transpose();
        ortho_err = ortho_err.max((row_i.dot(&dc)).abs());
        for j in 0..k.nrows() {
            let expected = if i == j { 1.0 } else { 0.0 };
            ortho_err = ortho_err.max((row_i.dot(&k.row(j).transpose()) - expected).abs());
        }
    }

    // (b) Energies non-increasing.
    let energies = kernel.ac_energy_fractions();
    let monotone = energies.windows(2).all(|w| w[0] >= w[1] - 1e-15);

    // (c) Full-retention Parseval: transform preserves centered energy.
    let mean = kernel.mean();
    let mut input_energy = 0.0;
    let mut output_energy = 0.0;
    for r in 0..n {
        let x = samples.row(r).transpose();
        let centered = &x - mean;
        input_energy += centered.norm_squared();
        output_energy += kernel.apply(&x).unwrap().norm_squared();
    }
    let parseval_rel = (input_energy - output_energy).abs() / input_energy;

    // (d) AC kernels match nalgebra's covariance eigendecomposition up to
    // sign. The DC direction is projected out first, exactly as in the fit.
    let mut centered = samples.clone();
    for r in 0..n {
        let mut row = centered.row_mut(r);
        let x = row.transpose() - mean;
        let ac = &x - &dc * dc.dot(&x);
        row.copy_from(&ac.transpose());
    }
    let covariance = centered.transpose() * &centered / n as f64;
    let eigen = nalgebra::SymmetricEigen::new(covariance);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eigen.eigenvalues[b].total_cmp(&eigen.eigenvalues[a]));
    let mut eigen_err = 0.0f64;
    for (row, &col) in order.iter().enumerate().take(k.nrows()) {
        let oracle = eigen.eigenvectors.column(col);
        let fitted = k.row(row).transpose();
        let diff_plus = (&fitted - oracle).norm();
        let diff_minus = (&fitted + oracle).norm();
        eigen_err = eigen_err.max(diff_plus.min(diff_minus));
    }

    let pass = ortho_err < 1e-6 && monotone && parseval_rel < 1e-6 && eigen_err < 1e-6;
    verdict(
        3,
        "saab correctness",
        pass,
        &format!(
            "orthonormality {ortho_err:.3e}, energies monotone {monotone}, Parseval rel {parseval_rel:.3e}, eigen oracle {eigen_err:.3e} (all < 1e-6)"
        ),
    );
}

/// A random orthogonal d x d matrix from QR of a random Gaussian-ish matrix.
fn random_rigid_mixer(d: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = DMatrix::from_fn(d, d, |_, _| rng.random_range(-1.0..1.0f64));
    let qr = m.qr();
    qr.q()
}

// -------------------------------------------------------------------------
// 4. VLAD oracle equivalence

#[test]
fn criterion_4_vlad_oracles() {
    // k = 1: the aggregated residual is N * (mean - centroid); the library
    // output is that vector after signed-sqrt and L2 normalization.
    let features = random_matrix(300, 20, 60_000);
    let off_data = random_matrix(100, 20, 60_001);
    let single = fit_codebook(&off_data, 1, 0).unwrap();
    let vlad1 = compute_vlad(&single, &features).unwrap();
    let n = features.nrows() as f64;
    let mean = features.row_mean().transpose();
    let centroid = single.centroids().row(0).transpose();
    let mut expected: DVector<f64> = (mean - centroid) * n;
    for x in expected.iter_mut() {
        *x = x.signum() * x.abs().sqrt();
    }
    expected /= expected.norm();
    let err1 = (vlad1.values() - &expected).norm();

    // k = 10: naive per-point nearest-centroid residual summation.
    let features10 = random_matrix(400, 16, 60_002);
    let book = fit_codebook(&features10, 10, 0).unwrap();
    let vlad10 = compute_vlad(&book, &features10).unwrap();
    let (k, d) = (book.k(), book.dim());
    let mut naive: DVector<f64> = DVector::zeros(k * d);
    for r in 0..features10.nrows() {
        let x = features10.row(r);
        let mut best = 0usize;
        let mut best_d2 = f64::INFINITY;
        for c in 0..k {
            let mut d2 = 0.0;
            for j in 0..d {
                let diff = x[j] - book.centroids()[(c, j)];
                d2 += diff * diff;
            }
            if d2 < best_d2 {
                best_d2 = d2;
                best = c;
            }
        }
        for j in 0..d {
            naive[best * d + j] += x[j] - book.centroids()[(best, j)];
        }
    }
    for x in naive.iter_mut() {
        *x = x.signum() * x.abs().sqrt();
    }
    naive /= naive.norm();
    let err10 = (vlad10.values() - &naive).norm();

    verdict(
        4,
        "vlad oracle equivalence",
        err1 < 1e-9 && err10 < 1e-9,
        &format!("k=1 oracle distance {err1:.3e}, k=10 oracle distance {err10:.3e} (both < 1e-9)"),
    );
}

fn random_matrix(n: usize, d: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DMatrix::from_fn(n, d, |_, _| rng.random_range(-2.0..2.0))
}

// -------------------------------------------------------------------------
// Shared synthetic gallery for criteria 5, 6, and 8

/// One of 40 distinct deformed primitives. The two angular harmonics have
/// coprime frequencies, so no shape has a rotational self-symmetry that
/// would make its pose ambiguous.
fn shape_cloud(kind: usize, seed: u64, n: usize) -> PointCloud {
    let p = (2 + kind % 5) as f64;
    let a = 0.16 + 0.08 * ((kind / 5) % 2) as f64;
    let b = 0.10 + 0.06 * ((kind / 10) % 2) as f64;
    let c = 0.3 * ((kind / 20) % 2) as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points = (0..n)
        .map(|_| {
            let theta = rng.random_range(0.0..TAU);
            let z: f64 = rng.random_range(-1.0..1.0);
            let ring = (1.0 - z * z).sqrt();
            let r = 1.0
                + a * (p * theta).sin() * (1.0 - z * z)
                + b * ((p + 1.0) * theta).cos() * z * (1.0 - z * z)
                + c * z * z;
            Point3::new(ring * theta.cos() * r, ring * theta.sin() * r, z * (1.0 + c))
        })
        .collect();
    PointCloud::new(points).unwrap()
}

struct Pipeline {
    model: FrPointHopModel,
    index: GalleryIndex,
    clouds: Vec<PointCloud>,
}

static PIPELINE: OnceLock<Pipeline> = OnceLock::new();

fn pipeline() -> &'static Pipeline {
    PIPELINE.get_or_init(|| {
        let clouds: Vec<PointCloud> = (0..40)
            .map(|kind| shape_cloud(kind, 1_000 + kind as u64, 320).normalize_to_unit_sphere().0)
            .collect();
        let hop = HopConfig {
            k1: 16,
            k2: 8,
            fps_ratio: 0.5,
            hop1_energy_threshold: 0.95,
            target_dim: 48,
            train_points_cap: 400,
        };
        let model = fit_model(&clouds, &hop, 0).unwrap();
        let mut pooled_rows: Vec<f64> = Vec::new();
        let mut count = 0;
        for cloud in &clouds {
            let features = extract_features(&model, cloud).unwrap();
            for r in 0..features.len() {
                pooled_rows.extend(features.features().row(r).iter().copied());
                count += 1;
            }
        }
        let pooled = DMatrix::from_row_slice(count, model.feature_dim(), &pooled_rows);
        let codebook = fit_codebook(&pooled, 10, 0).unwrap();
        let objects: Vec<GalleryObject> = clouds
            .iter()
            .enumerate()
            .map(|(kind, cloud)| GalleryObject {
                id: format!("shape{kind:02}"),
                category: "synthetic".into(),
                cloud: cloud.clone(),
                cloud_path: format!("mem://shape{kind:02}"),
            })
            .collect();
        let index = build_gallery(&model, &codebook, &objects).unwrap();
        Pipeline { model, index, clouds }
    })
}

fn shape_index(id: &str) -> usize {
    id.strip_prefix("shape").unwrap().parse().unwrap()
}

// -------------------------------------------------------------------------
// 5. Retrieval pose invariance

#[test]
fn criterion_5_retrieval_pose_invariance() {
    let pipe = pipeline();
    let mut correct = 0;
    let total = 40 * 5;
    for kind in 0..40usize {
        for pose in 0..5u64 {
            let motion =
                random_rigid_transform(2_000 + 5 * kind as u64 + pose, 180.0, 0.5);
            let query = pipe.clouds[kind].transformed(&motion);
            let normalized = query.normalize_to_unit_sphere().0;
            let features = extract_features(&pipe.model, &normalized).unwrap();
            let vlad = compute_vlad(pipe.index.codebook(), features.features()).unwrap();
            let hits = retrieve(&pipe.index, &vlad, 1);
            if shape_index(&pipe.index.record(hits[0].record).id) == kind {
                correct += 1;
            }
        }
    }
    let rate = correct as f64 / total as f64;
    verdict(
        5,
        "retrieval pose invariance",
        rate >= 0.95,
        &format!("top-1 self-retrieval {correct}/{total} = {:.1}% (>= 95%)", rate * 100.0),
    );
}

// -------------------------------------------------------------------------
// 6. End-to-end pose recovery

#[test]
fn criterion_6_end_to_end_pose_recovery() {
    let pipe = pipeline();
    let options = RegistrationOptions::default();
    let mut within = 0;
    let trials = 50;
    for t in 0..trials {
        let kind = (t as usize * 7) % 40;
        let motion = random_rigid_transform(3_000 + t, 180.0, 0.5);
        let query = pipe.clouds[kind].transformed(&motion);
        let opts = RegistrationOptions { seed: t, ..options.clone() };
        let estimate = estimate_pose(
            &pipe.model,
            &pipe.index,
            &query,
            |record| Ok(pipe.clouds[shape_index(&record.id)].clone()),
            &opts,
        )
        .unwrap();
        let expected = motion.inverse();
        let err = rotation_error_deg(estimate.transform.rotation(), expected.rotation());
        if err < 5.0 {
            within += 1;
        }
    }
    let rate = within as f64 / trials as f64;
    verdict(
        6,
        "end-to-end pose recovery",
        rate >= 0.90,
        &format!("rotation error < 5 deg in {within}/{trials} trials = {:.0}% (>= 90%)", rate * 100.0),
    );
}

// -------------------------------------------------------------------------
// 7. RANSAC robustness at 50% outliers

#[test]
fn criterion_7_ransac_outlier_robustness() {
    let mut within = 0;
    let trials = 100;
    for t in 0..trials {
        let cloud = random_cloud(60, 70_000 + t);
        let truth = random_rigid_transform(71_000 + t, 180.0, 1.0);
        let source: Vec<Point3<f64>> = cloud.points().to_vec();
        let target: Vec<Point3<f64>> = source.iter().map(|p| truth.apply(p)).collect();

        let mut rng = ChaCha8Rng::seed_from_u64(72_000 + t);
        let mut pairs: Vec<Correspondence> = (0..30)
            .map(|i| Correspondence { query: i, target: i, distance: 0.0 })
            .collect();
        for i in 30..60 {
            // A wrong pairing: some other target point.
            let offset = rng.random_range(1..60);
            pairs.push(Correspondence { query: i, target: (i + offset) % 60, distance: 0.0 });
        }

        let fit = ransac_pose(&source, &target, &pairs, 2_000, 0.05, t).unwrap();
        let err = rotation_error_deg(fit.transform.rotation(), truth.rotation());
        if err < 0.5 {
            within += 1;
        }
    }
    verdict(
        7,
        "ransac outlier robustness",
        within >= 95,
        &format!("rotation error < 0.5 deg in {within}/{trials} trials (>= 95)"),
    );
}

// -------------------------------------------------------------------------
// 8. ICP baseline contrast at 120 degrees

#[test]
fn criterion_8_icp_contrast() {
    let pipe = pipeline();
    let trials = 40;
    let mut icp_failures = 0;
    let mut pipeline_failures = 0;
    for t in 0..trials {
        let kind = (t as usize * 11) % 40;
        let target = &pipe.clouds[kind];
        let mut rng = ChaCha8Rng::seed_from_u64(80_000 + t);
        let axis = Unit::new_normalize(Vector3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0f64),
        ));
        let rotation = rotation_about_axis(&axis, 120f64.to_radians());
        let motion = RigidTransform::new(rotation, Vector3::zeros()).unwrap();
        let query = target.transformed(&motion);
        let expected = motion.inverse();

        let icp = icp_baseline(&query, target, 200, 1e-9).unwrap();
        if rotation_error_deg(icp.transform.rotation(), expected.rotation()) > 10.0 {
            icp_failures += 1;
        }

        let opts = RegistrationOptions { seed: t, ..RegistrationOptions::default() };
        let full = register_pair(&pipe.model, &query, target, &opts).unwrap();
        if rotation_error_deg(full.transform.rotation(), expected.rotation()) > 10.0 {
            pipeline_failures += 1;
        }
    }
    let icp_rate = icp_failures as f64 / trials as f64;
    let pipe_rate = pipeline_failures as f64 / trials as f64;
    verdict(
        8,
        "icp baseline contrast",
        icp_rate >= 0.5 && pipe_rate < 0.05,
        &format!(
            "at 120 deg misalignment: ICP fails {icp_failures}/{trials} = {:.0}% (>= 50%), pipeline fails {pipeline_failures}/{trials} = {:.0}% (< 5%)",
            icp_rate * 100.0,
            pipe_rate * 100.0
        ),
    );
}

// -------------------------------------------------------------------------
// 9. Symmetry partition

#[test]
fn criterion_9_symmetry_partition() {
    // Exactly mirror-symmetric clouds: random half plus its reflection.
    let mut worst_score = 0.0f64;
    let mut structure_ok = true;
    for c in 0..10u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(90_000 + c);
        let mut points = Vec::new();
        for _ in 0..150 {
            let p = Point3::new(
                rng.random_range(0.05..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            );
            points.push(p);
            points.push(Point3::new(-p.x, p.y, p.z));
        }
        let cloud = PointCloud::new(points).unwrap();
        let partition = symmetry_partition(&cloud);

        // Find the principal axis aligned with x, the mirror normal.
        let x_axis = (0..3)
            .max_by(|&i, &j| {
                partition.axes[i].x.abs().total_cmp(&partition.axes[j].x.abs())
            })
            .unwrap();
        structure_ok &= partition.axes[x_axis].x.abs() > 0.999;
        structure_ok &= partition.axis == x_axis;
        worst_score = worst_score.max(partition.scores[x_axis]);

        // Mirror pairs land on opposite sides.
        for i in (0..partition.sides.len()).step_by(2) {
            structure_ok &= partition.sides[i] != partition.sides[i + 1];
        }
        structure_ok &= disjoint_exhaustive(&partition.side_a(), &partition.side_b(), cloud.len());
    }

    // Partition structure must hold on arbitrary (asymmetric) inputs too.
    for c in 0..10u64 {
        let cloud = blob_cloud(130, 91_000 + c);
        let partition = symmetry_partition(&cloud);
        structure_ok &= disjoint_exhaustive(&partition.side_a(), &partition.side_b(), cloud.len());
    }

    verdict(
        9,
        "symmetry partition",
        worst_score < 1e-9 && structure_ok,
        &format!(
            "mirror-axis score worst {worst_score:.3e} (< 1e-9), partitions disjoint and exhaustive on 20 clouds: {structure_ok}"
        ),
    );
}

fn disjoint_exhaustive(a: &[usize], b: &[usize], n: usize) -> bool {
    let mut seen = vec![0u8; n];
    for &i in a.iter().chain(b) {
        if i >= n {
            return false;
        }
        seen[i] += 1;
    }
    a.len() + b.len() == n && seen.iter().all(|&s| s == 1)
}
