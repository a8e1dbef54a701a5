//! Synthetic data with ground truth: cluster or image generators plus
//! planted isolated outliers and exact duplicates, with every planted id
//! recorded so studies can assert against the construction.

use memaudit_core::rng::{standard_normal, uniform, ChaCha8Rng, SeedableRng};
use memaudit_core::{Dataset, ShapeTag};
use serde::{Deserialize, Serialize};

use super::{IoError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SynthKind {
    GaussianClusters { centers: Vec<Vec<f64>>, std: f64 },
    TwoMoons { noise: f64 },
    /// Gray-scale images of one soft blob at a random position, values in
    /// `[0, 1]`.
    Images { height: usize, width: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub kind: SynthKind,
    /// Total rows, planted material included.
    pub n: usize,
    /// Isolated outliers appended at the end of the dataset.
    pub outliers: usize,
    /// Outlier distance from the data mean, in units of the per-dimension
    /// standard deviation.
    pub outlier_displacement: f64,
    /// Number of duplicate groups.
    pub duplicates: usize,
    /// Rows per duplicate group (all bit-identical).
    pub duplicate_multiplicity: usize,
    pub seed: u64,
}

impl SynthSpec {
    pub fn clusters(centers: Vec<Vec<f64>>, std: f64, n: usize, seed: u64) -> SynthSpec {
        SynthSpec {
            kind: SynthKind::GaussianClusters { centers, std },
            n,
            outliers: 0,
            outlier_displacement: 20.0,
            duplicates: 0,
            duplicate_multiplicity: 2,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SynthAnnotations {
    pub outlier_ids: Vec<usize>,
    /// One inner vector per duplicate group, listing the ids of its
    /// bit-identical rows.
    pub duplicate_groups: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthData {
    pub dataset: Dataset,
    pub annotations: SynthAnnotations,
}

fn base_row(kind: &SynthKind, rng: &mut ChaCha8Rng) -> Vec<f64> {
    match kind {
        SynthKind::GaussianClusters { centers, std } => {
            let c = (uniform(rng) * centers.len() as f64) as usize % centers.len();
            centers[c]
                .iter()
                .map(|m| m + std * standard_normal(rng))
                .collect()
        }
        SynthKind::TwoMoons { noise } => {
            let t = uniform(rng) * core::f64::consts::PI;
            let (x, y) = if uniform(rng) < 0.5 {
                (t.cos(), t.sin())
            } else {
                (1.0 - t.cos(), 0.5 - t.sin())
            };
            vec![x + noise * standard_normal(rng), y + noise * standard_normal(rng)]
        }
        SynthKind::Images { height, width } => {
            let cy = uniform(rng) * *height as f64;
            let cx = uniform(rng) * *width as f64;
            let amp = 0.5 + 0.5 * uniform(rng);
            let sigma = 1.0 + uniform(rng);
            let mut row = Vec::with_capacity(height * width);
            for y in 0..*height {
                for x in 0..*width {
                    let d2 = (y as f64 - cy).powi(2) + (x as f64 - cx).powi(2);
                    let bump = amp * (-d2 / (2.0 * sigma * sigma)).exp();
                    let noise = 0.05 * uniform(rng);
                    row.push((bump + noise).clamp(0.0, 1.0));
                }
            }
            row
        }
    }
}

fn kind_shape(kind: &SynthKind) -> ShapeTag {
    match kind {
        SynthKind::Images { height, width } => ShapeTag::Image {
            height: *height,
            width: *width,
            channels: 1,
        },
        _ => ShapeTag::Flat,
    }
}

/// Deterministic generation: regular rows first, then the duplicate groups
/// (consecutive identical rows), then the outliers.
pub fn generate_synth(spec: &SynthSpec) -> Result<SynthData> {
    let planted = spec.outliers + spec.duplicates * spec.duplicate_multiplicity;
    if spec.duplicates > 0 && spec.duplicate_multiplicity < 2 {
        return Err(IoError::Format(
            "duplicate groups need multiplicity >= 2".into(),
        ));
    }
    if spec.n < planted + 2 {
        return Err(IoError::Format(format!(
            "n = {} leaves no room for {} planted rows plus regular data",
            spec.n, planted
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let regular = spec.n - planted;
    let mut rows: Vec<Vec<f64>> = (0..regular).map(|_| base_row(&spec.kind, &mut rng)).collect();
    let dim = rows[0].len();

    let mut annotations = SynthAnnotations::default();
    for _ in 0..spec.duplicates {
        let source = base_row(&spec.kind, &mut rng);
        let group: Vec<usize> = (0..spec.duplicate_multiplicity)
            .map(|_| {
                rows.push(source.clone());
                rows.len() - 1
            })
            .collect();
        annotations.duplicate_groups.push(group);
    }

    if spec.outliers > 0 {
        // Place outliers relative to the spread of the rows so far.
        let n_so_far = rows.len() as f64;
        let mut mean = vec![0.0; dim];
        for row in &rows {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v / n_so_far;
            }
        }
        let mut std = vec![0.0; dim];
        for row in &rows {
            for ((s, v), m) in std.iter_mut().zip(row).zip(&mean) {
                *s += (v - m) * (v - m) / n_so_far;
            }
        }
        let std: Vec<f64> = std.iter().map(|s| s.sqrt().max(1e-12)).collect();
        for _ in 0..spec.outliers {
            let mut direction: Vec<f64> = (0..dim).map(|_| standard_normal(&mut rng)).collect();
            let norm = direction.iter().map(|d| d * d).sum::<f64>().sqrt().max(1e-12);
            direction.iter_mut().for_each(|d| *d /= norm);
            let row: Vec<f64> = (0..dim)
                .map(|j| mean[j] + spec.outlier_displacement * std[j] * direction[j])
                .collect();
            rows.push(row);
            annotations.outlier_ids.push(rows.len() - 1);
        }
    }

    let data: Vec<f64> = rows.into_iter().flatten().collect();
    Ok(SynthData {
        dataset: Dataset::from_rows("synth", data, dim, kind_shape(&spec.kind))?,
        annotations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_cluster_spec(n: usize) -> SynthSpec {
        SynthSpec::clusters(vec![vec![-4.0, 0.0], vec![4.0, 0.0]], 1.0, n, 7)
    }

    #[test]
    fn clusters_stay_near_centers() {
        let data = generate_synth(&two_cluster_spec(100)).unwrap();
        assert_eq!(data.dataset.n(), 100);
        for row in data.dataset.rows() {
            let to_a = ((row[0] + 4.0).powi(2) + row[1].powi(2)).sqrt();
            let to_b = ((row[0] - 4.0).powi(2) + row[1].powi(2)).sqrt();
            assert!(to_a.min(to_b) < 6.0, "point {row:?} outside 6 sigma");
        }
    }

    #[test]
    fn duplicates_recorded_and_identical() {
        let mut spec = two_cluster_spec(50);
        spec.duplicates = 2;
        spec.duplicate_multiplicity = 3;
        let data = generate_synth(&spec).unwrap();
        assert_eq!(data.annotations.duplicate_groups.len(), 2);
        for group in &data.annotations.duplicate_groups {
            assert_eq!(group.len(), 3);
            let first = data.dataset.row(group[0]);
            for &id in group {
                assert_eq!(data.dataset.row(id), first);
            }
        }
    }

    #[test]
    fn outliers_are_isolated() {
        let mut spec = two_cluster_spec(120);
        spec.outliers = 2;
        spec.outlier_displacement = 20.0;
        let data = generate_synth(&spec).unwrap();
        assert_eq!(data.annotations.outlier_ids, vec![118, 119]);
        let nn = |i: usize| -> f64 {
            let xi = data.dataset.row(i);
            (0..data.dataset.n())
                .filter(|&j| j != i)
                .map(|j| {
                    xi.iter()
                        .zip(data.dataset.row(j))
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum::<f64>()
                        .sqrt()
                })
                .fold(f64::INFINITY, f64::min)
        };
        let max_inlier_nn = (0..118).map(nn).fold(0.0f64, f64::max);
        for &id in &data.annotations.outlier_ids {
            assert!(nn(id) > max_inlier_nn, "outlier {id} not isolated");
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let a = generate_synth(&two_cluster_spec(40)).unwrap();
        let b = generate_synth(&two_cluster_spec(40)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn image_kind_in_unit_range() {
        let spec = SynthSpec {
            kind: SynthKind::Images {
                height: 8,
                width: 8,
            },
            n: 20,
            outliers: 0,
            outlier_displacement: 0.0,
            duplicates: 0,
            duplicate_multiplicity: 2,
            seed: 1,
        };
        let data = generate_synth(&spec).unwrap();
        assert_eq!(data.dataset.dim(), 64);
        assert!(data
            .dataset
            .values()
            .iter()
            .all(|v| (0.0..=1.0).contains(v)));
    }
}
