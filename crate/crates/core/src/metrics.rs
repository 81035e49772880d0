//! Evaluation metrics over two prepared point clouds: directional Chamfer
//! distances, Std@tau, and precision/recall/F1 per tolerance.
//!
//! Inputs are meters; every reported number is millimeters. Threshold
//! comparisons are strict (`< tau`), so points at exactly the tolerance do
//! not count. Std@tau filters only the forward (reconstruction-to-ground-
//! truth) direction and uses the population standard deviation; with fewer
//! than two qualifying distances it is undefined and surfaces as `None`,
//! never as a silent zero.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::PointCloud;
use crate::spatial::SpatialIndex;

pub const METERS_TO_MM: f64 = 1000.0;

/// Strictly increasing list of positive tolerances, millimeters.
#[derive(Debug, Clone, PartialEq)]
pub struct ToleranceSpec {
    taus_mm: Vec<f64>,
}

impl ToleranceSpec {
    pub fn new(taus_mm: Vec<f64>) -> Result<Self> {
        if taus_mm.is_empty() {
            return Err(Error::schema("tolerances_mm", "list is empty"));
        }
        for (i, t) in taus_mm.iter().enumerate() {
            if !(t.is_finite() && *t > 0.0) {
                return Err(Error::schema(
                    "tolerances_mm",
                    format!("entry {i} is {t}, must be positive and finite"),
                ));
            }
            if i > 0 && taus_mm[i - 1] >= *t {
                return Err(Error::schema(
                    "tolerances_mm",
                    format!(
                        "must be strictly increasing, got {} before {t}",
                        taus_mm[i - 1]
                    ),
                ));
            }
        }
        Ok(ToleranceSpec { taus_mm })
    }

    pub fn taus_mm(&self) -> &[f64] {
        &self.taus_mm
    }
}

impl Default for ToleranceSpec {
    /// The standard 2 mm and 5 mm manipulation tolerances.
    fn default() -> Self {
        ToleranceSpec {
            taus_mm: vec![2.0, 5.0],
        }
    }
}

/// Per-point nearest-neighbor distances in both directions, meters.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceProfile {
    /// From each reconstruction point to the ground truth.
    pub forward: Vec<f64>,
    /// From each ground-truth point to the reconstruction.
    pub backward: Vec<f64>,
}

/// Metrics tied to one tolerance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToleranceMetrics {
    pub tau_mm: f64,
    /// Population std of forward distances below tau, mm; `None` when fewer
    /// than two distances qualify.
    pub std_mm: Option<f64>,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// All per-scene metric values, millimeters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsResult {
    /// Accuracy: mean forward NN distance.
    pub cd_p_to_g_mm: f64,
    /// Completeness: mean backward NN distance.
    pub cd_g_to_p_mm: f64,
    pub reconstruction_points: usize,
    pub ground_truth_points: usize,
    pub per_tolerance: Vec<ToleranceMetrics>,
}

/// Exact NN distances in both directions, computed through the spatial index.
pub fn distance_profile(
    reconstruction: &PointCloud,
    ground_truth: &PointCloud,
) -> Result<DistanceProfile> {
    if reconstruction.is_empty() {
        return Err(Error::EmptyCloud("reconstruction cloud".into()));
    }
    if ground_truth.is_empty() {
        return Err(Error::EmptyCloud("ground-truth cloud".into()));
    }
    let gt_index = SpatialIndex::build(ground_truth)?;
    let forward = gt_index.nearest_batch(reconstruction);
    let rc_index = SpatialIndex::build(reconstruction)?;
    let backward = rc_index.nearest_batch(ground_truth);
    Ok(DistanceProfile { forward, backward })
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Directional Chamfer distances `(P->G, G->P)` in millimeters: arithmetic
/// means of the unsquared NN distances.
pub fn chamfer(profile: &DistanceProfile) -> (f64, f64) {
    (
        mean(&profile.forward) * METERS_TO_MM,
        mean(&profile.backward) * METERS_TO_MM,
    )
}

/// Population standard deviation of the forward distances below `tau_mm`,
/// in millimeters. `None` with fewer than two qualifying distances.
pub fn std_at_tau(profile: &DistanceProfile, tau_mm: f64) -> Option<f64> {
    let qualifying: Vec<f64> = profile
        .forward
        .iter()
        .map(|d| d * METERS_TO_MM)
        .filter(|d| *d < tau_mm)
        .collect();
    if qualifying.len() < 2 {
        return None;
    }
    let m = mean(&qualifying);
    let var = qualifying.iter().map(|d| (d - m) * (d - m)).sum::<f64>() / qualifying.len() as f64;
    Some(var.sqrt())
}

/// Fractions of points within `tau_mm` of the other cloud, plus their
/// harmonic mean. `f1` is zero when precision and recall are both zero.
pub fn precision_recall_f1(profile: &DistanceProfile, tau_mm: f64) -> (f64, f64, f64) {
    let close = |d: &&f64| **d * METERS_TO_MM < tau_mm;
    let precision =
        profile.forward.iter().filter(close).count() as f64 / profile.forward.len() as f64;
    let recall =
        profile.backward.iter().filter(close).count() as f64 / profile.backward.len() as f64;
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    (precision, recall, f1)
}

/// Computes the profile once and derives every metric from it.
pub fn evaluate_pair(
    reconstruction: &PointCloud,
    ground_truth: &PointCloud,
    tolerances: &ToleranceSpec,
) -> Result<MetricsResult> {
    let profile = distance_profile(reconstruction, ground_truth)?;
    Ok(metrics_from_profile(
        &profile,
        reconstruction.len(),
        ground_truth.len(),
        tolerances,
    ))
}

/// Metric reductions over an existing profile; summation order is the stored
/// profile order, so results do not depend on query parallelism.
pub fn metrics_from_profile(
    profile: &DistanceProfile,
    reconstruction_points: usize,
    ground_truth_points: usize,
    tolerances: &ToleranceSpec,
) -> MetricsResult {
    let (cd_p_to_g_mm, cd_g_to_p_mm) = chamfer(profile);
    let per_tolerance = tolerances
        .taus_mm()
        .iter()
        .map(|&tau_mm| {
            let (precision, recall, f1) = precision_recall_f1(profile, tau_mm);
            ToleranceMetrics {
                tau_mm,
                std_mm: std_at_tau(profile, tau_mm),
                precision,
                recall,
                f1,
            }
        })
        .collect();
    MetricsResult {
        cd_p_to_g_mm,
        cd_g_to_p_mm,
        reconstruction_points,
        ground_truth_points,
        per_tolerance,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Point3;
    use crate::spatial::brute_force_nearest;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_cloud(n: usize, span: f64, rng: &mut ChaCha8Rng) -> PointCloud {
        PointCloud::new(
            (0..n)
                .map(|_| {
                    Point3::new(
                        rng.gen_range(-span..span),
                        rng.gen_range(-span..span),
                        rng.gen_range(-span..span),
                    )
                })
                .collect(),
        )
    }

    /// Coarse grid cloud with guaranteed 50 mm point spacing.
    fn grid_cloud(side: usize) -> PointCloud {
        let mut points = Vec::new();
        for i in 0..side {
            for j in 0..side {
                for k in 0..side {
                    points.push(Point3::new(
                        i as f64 * 0.05,
                        j as f64 * 0.05,
                        k as f64 * 0.05,
                    ));
                }
            }
        }
        PointCloud::new(points)
    }

    #[test]
    fn identical_clouds_zero_profile() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let cloud = random_cloud(500, 0.2, &mut rng);
        let profile = distance_profile(&cloud, &cloud).unwrap();
        assert!(profile.forward.iter().all(|&d| d == 0.0));
        assert!(profile.backward.iter().all(|&d| d == 0.0));
    }

    #[test]
    fn tiny_profile_by_hand() {
        let p = PointCloud::new(vec![Point3::new(0.0, 0.0, 0.0)]);
        let g = PointCloud::new(vec![
            Point3::new(0.0, 0.0, 0.003),
            Point3::new(0.0, 0.0, 1.0),
        ]);
        let profile = distance_profile(&p, &g).unwrap();
        assert_eq!(profile.forward, vec![0.003]);
        assert_eq!(profile.backward, vec![0.003, 1.0]);
    }

    #[test]
    fn profile_matches_brute_force_double_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let p = random_cloud(500, 0.1, &mut rng);
        let g = random_cloud(700, 0.1, &mut rng);
        let profile = distance_profile(&p, &g).unwrap();
        for (q, d) in p.points.iter().zip(&profile.forward) {
            assert_eq!(*d, brute_force_nearest(&g, q).0);
        }
        for (q, d) in g.points.iter().zip(&profile.backward) {
            assert_eq!(*d, brute_force_nearest(&p, q).0);
        }
    }

    #[test]
    fn empty_sides_reported() {
        let cloud = PointCloud::new(vec![Point3::new(0.0, 0.0, 0.0)]);
        let empty = PointCloud::new(vec![]);
        match distance_profile(&empty, &cloud) {
            Err(Error::EmptyCloud(which)) => assert!(which.contains("reconstruction")),
            other => panic!("unexpected {other:?}"),
        }
        match distance_profile(&cloud, &empty) {
            Err(Error::EmptyCloud(which)) => assert!(which.contains("ground-truth")),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn chamfer_simple_means() {
        let zero = DistanceProfile {
            forward: vec![0.0; 4],
            backward: vec![0.0; 2],
        };
        assert_eq!(chamfer(&zero), (0.0, 0.0));

        let profile = DistanceProfile {
            forward: vec![0.001, 0.003],
            backward: vec![0.002],
        };
        let (f, b) = chamfer(&profile);
        assert_eq!(f, 2.0);
        assert_eq!(b, 2.0);
    }

    #[test]
    fn chamfer_matches_recomputation() {
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        let forward: Vec<f64> = (0..999).map(|_| rng.gen_range(0.0..0.01)).collect();
        let backward: Vec<f64> = (0..500).map(|_| rng.gen_range(0.0..0.01)).collect();
        let profile = DistanceProfile {
            forward: forward.clone(),
            backward: backward.clone(),
        };
        let (f, b) = chamfer(&profile);
        let fr = forward.iter().sum::<f64>() / forward.len() as f64 * 1000.0;
        let br = backward.iter().sum::<f64>() / backward.len() as f64 * 1000.0;
        assert!((f - fr).abs() <= 1e-12 * fr.abs());
        assert!((b - br).abs() <= 1e-12 * br.abs());
    }

    #[test]
    fn std_filter_and_undefined_marker() {
        let equal = DistanceProfile {
            forward: vec![0.0015; 5],
            backward: vec![],
        };
        assert_eq!(std_at_tau(&equal, 2.0), Some(0.0));

        // {1, 3} mm at tau 2 leaves a single qualifying distance.
        let two = DistanceProfile {
            forward: vec![0.001, 0.003],
            backward: vec![],
        };
        assert_eq!(std_at_tau(&two, 2.0), None);

        // Population std of {1,2,3,4} mm = sqrt(1.25).
        let four = DistanceProfile {
            forward: vec![0.001, 0.002, 0.003, 0.004],
            backward: vec![],
        };
        let std = std_at_tau(&four, 5.0).unwrap();
        assert!((std - 1.25f64.sqrt()).abs() < 1e-12);
        assert!((std - 1.118033988749895).abs() < 1e-12);
    }

    #[test]
    fn std_threshold_is_strict() {
        let profile = DistanceProfile {
            forward: vec![0.002, 0.002, 0.001],
            backward: vec![],
        };
        // The two distances at exactly 2 mm are excluded.
        assert_eq!(std_at_tau(&profile, 2.0), None);
    }

    #[test]
    fn prf_counts() {
        let profile = DistanceProfile {
            forward: vec![0.001, 0.003],
            backward: vec![0.001, 0.001, 0.003, 0.003],
        };
        let (p, r, f1) = precision_recall_f1(&profile, 2.0);
        assert_eq!((p, r, f1), (0.5, 0.5, 0.5));
    }

    #[test]
    fn prf_identical_clouds() {
        let mut rng = ChaCha8Rng::seed_from_u64(44);
        let cloud = random_cloud(200, 0.1, &mut rng);
        let profile = distance_profile(&cloud, &cloud).unwrap();
        assert_eq!(precision_recall_f1(&profile, 2.0), (1.0, 1.0, 1.0));
    }

    #[test]
    fn f1_is_harmonic_mean() {
        // 0.67 precision, 0.53 recall: per-scene harmonic mean is ~0.5918,
        // not the 0.58 a mean-of-scene-F1 aggregation produces.
        let p: f64 = 0.67;
        let r: f64 = 0.53;
        let f1 = 2.0 * p * r / (p + r);
        assert!((f1 - 0.5918333333333333).abs() < 1e-12);
    }

    #[test]
    fn f1_guard_at_zero() {
        let profile = DistanceProfile {
            forward: vec![1.0],
            backward: vec![1.0],
        };
        let (p, r, f1) = precision_recall_f1(&profile, 2.0);
        assert_eq!((p, r, f1), (0.0, 0.0, 0.0));
    }

    #[test]
    fn strict_inequality_at_tau() {
        let profile = DistanceProfile {
            forward: vec![0.002],
            backward: vec![0.002],
        };
        let (p, r, _) = precision_recall_f1(&profile, 2.0);
        assert_eq!((p, r), (0.0, 0.0));
        let (p, r, _) = precision_recall_f1(&profile, 2.0 + 1e-9);
        assert_eq!((p, r), (1.0, 1.0));
    }

    #[test]
    fn evaluate_identical_clouds() {
        let mut rng = ChaCha8Rng::seed_from_u64(45);
        let cloud = random_cloud(300, 0.1, &mut rng);
        let result = evaluate_pair(&cloud, &cloud, &ToleranceSpec::default()).unwrap();
        assert_eq!(result.cd_p_to_g_mm, 0.0);
        assert_eq!(result.cd_g_to_p_mm, 0.0);
        for t in &result.per_tolerance {
            assert_eq!((t.precision, t.recall, t.f1), (1.0, 1.0, 1.0));
            assert_eq!(t.std_mm, Some(0.0));
        }
    }

    #[test]
    fn translated_sparse_cloud_exact_offsets() {
        // 50 mm grid spacing dwarfs the 3 mm shift, so every point's nearest
        // neighbor is its own preimage.
        let g = grid_cloud(6);
        let p = PointCloud::new(
            g.points
                .iter()
                .map(|q| Point3::new(q.x, q.y, q.z + 0.003))
                .collect(),
        );
        let result = evaluate_pair(&p, &g, &ToleranceSpec::default()).unwrap();
        assert!((result.cd_p_to_g_mm - 3.0).abs() < 1e-9);
        assert!((result.cd_g_to_p_mm - 3.0).abs() < 1e-9);
        assert_eq!(result.per_tolerance[0].precision, 0.0);
        assert_eq!(result.per_tolerance[1].precision, 1.0);
    }

    #[test]
    fn evaluate_matches_individual_operations() {
        let mut rng = ChaCha8Rng::seed_from_u64(46);
        let p = random_cloud(400, 0.05, &mut rng);
        let g = random_cloud(300, 0.05, &mut rng);
        let tol = ToleranceSpec::new(vec![1.0, 2.0, 5.0]).unwrap();
        let result = evaluate_pair(&p, &g, &tol).unwrap();
        let profile = distance_profile(&p, &g).unwrap();
        let (cf, cb) = chamfer(&profile);
        assert_eq!(result.cd_p_to_g_mm, cf);
        assert_eq!(result.cd_g_to_p_mm, cb);
        for (t, &tau) in result.per_tolerance.iter().zip(tol.taus_mm()) {
            assert_eq!(t.std_mm, std_at_tau(&profile, tau));
            let (pp, rr, ff) = precision_recall_f1(&profile, tau);
            assert_eq!((t.precision, t.recall, t.f1), (pp, rr, ff));
        }
    }

    #[test]
    fn thresholds_monotone() {
        let mut rng = ChaCha8Rng::seed_from_u64(47);
        let p = random_cloud(500, 0.01, &mut rng);
        let g = random_cloud(500, 0.01, &mut rng);
        let profile = distance_profile(&p, &g).unwrap();
        let mut last = (0.0, 0.0);
        for tau in [1.0, 2.0, 3.0, 4.0, 5.0] {
            let (prec, rec, _) = precision_recall_f1(&profile, tau);
            assert!(prec >= last.0 && rec >= last.1);
            last = (prec, rec);
        }
    }

    #[test]
    fn role_symmetry() {
        let mut rng = ChaCha8Rng::seed_from_u64(48);
        let p = random_cloud(350, 0.05, &mut rng);
        let g = random_cloud(250, 0.05, &mut rng);
        let tol = ToleranceSpec::default();
        let pg = evaluate_pair(&p, &g, &tol).unwrap();
        let gp = evaluate_pair(&g, &p, &tol).unwrap();
        assert_eq!(pg.cd_p_to_g_mm, gp.cd_g_to_p_mm);
        assert_eq!(pg.cd_g_to_p_mm, gp.cd_p_to_g_mm);
    }

    #[test]
    fn moving_apart_never_decreases_accuracy() {
        let mut rng = ChaCha8Rng::seed_from_u64(49);
        let g = random_cloud(200, 0.05, &mut rng);
        let base = random_cloud(200, 0.05, &mut rng);
        let mut last = 0.0;
        for k in [0.0, 0.2, 0.4, 0.8, 1.6] {
            let moved = PointCloud::new(
                base.points
                    .iter()
                    .map(|p| Point3::new(p.x + k, p.y, p.z))
                    .collect(),
            );
            let (cd, _) = chamfer(&distance_profile(&moved, &g).unwrap());
            assert!(cd >= last);
            last = cd;
        }
    }

    #[test]
    fn tolerance_spec_validation() {
        assert!(ToleranceSpec::new(vec![]).is_err());
        assert!(ToleranceSpec::new(vec![2.0, 2.0]).is_err());
        assert!(ToleranceSpec::new(vec![5.0, 2.0]).is_err());
        assert!(ToleranceSpec::new(vec![-1.0, 2.0]).is_err());
        assert!(ToleranceSpec::new(vec![2.0, 5.0]).is_ok());
        assert_eq!(ToleranceSpec::default().taus_mm(), &[2.0, 5.0]);
    }
}
