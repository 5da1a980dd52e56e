//! Similarity and dissimilarity set construction under the Euclidean metric.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{Dataset, NeighborSets};

/// How the similarity set of each sample is chosen. The dissimilarity set
/// is always every sample of another class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NeighborMode {
    /// The `k0` nearest same-class samples (capped at class size - 1).
    KnnSameClass(usize),
    /// Every other sample of the same class.
    AllSameClass,
}

fn sq_euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub fn build_neighbor_sets(data: &Dataset, mode: NeighborMode) -> Result<NeighborSets> {
    if let NeighborMode::KnnSameClass(0) = mode {
        return Err(Error::InvalidNeighbors("k0 must be ≥ 1".into()));
    }
    let members = data.class_members();
    if let Some(c) = members.iter().position(|m| m.len() < 2) {
        return Err(Error::InvalidNeighbors(format!(
            "class {} has a single sample; it has no similar neighbors",
            c + 1
        )));
    }
    let mut similar = Vec::with_capacity(data.len());
    let mut dissimilar = Vec::with_capacity(data.len());
    for i in 0..data.len() {
        let y = data.label(i);
        let mut same: Vec<usize> = members[y - 1].iter().copied().filter(|&j| j != i).collect();
        if let NeighborMode::KnnSameClass(k0) = mode {
            let xi = data.row(i);
            let mut keyed: Vec<(f64, usize)> = same.iter().map(|&j| (sq_euclidean(xi, data.row(j)), j)).collect();
            keyed.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            same = keyed.into_iter().take(k0).map(|(_, j)| j).collect();
        }
        similar.push(same);
        dissimilar.push((0..data.len()).filter(|&j| data.label(j) != y).collect());
    }
    NeighborSets::new(data, similar, dissimilar)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn all_same_class_sizes() {
        let rows: Vec<Vec<f64>> = (0..5).map(|i| vec![i as f64]).collect();
        let ds = Dataset::from_rows(&rows, vec![1, 1, 1, 2, 2]).unwrap();
        let n = build_neighbor_sets(&ds, NeighborMode::AllSameClass).unwrap();
        for i in 0..3 {
            assert_eq!(n.similar(i).len(), 2);
            assert_eq!(n.dissimilar(i), &[3, 4]);
        }
        assert_eq!(n.similar(3), &[4]);
    }

    #[test]
    fn k0_capped_at_class_size() {
        let rows: Vec<Vec<f64>> = (0..9).map(|i| vec![i as f64, 1.0]).collect();
        let labels = vec![1, 1, 1, 1, 1, 1, 2, 2, 2];
        let ds = Dataset::from_rows(&rows, labels).unwrap();
        let n = build_neighbor_sets(&ds, NeighborMode::KnnSameClass(10)).unwrap();
        assert!((0..6).all(|i| n.similar(i).len() == 5));
        assert!((6..9).all(|i| n.similar(i).len() == 2));
    }

    #[test]
    fn singleton_class_rejected() {
        let ds = Dataset::from_rows(&[vec![0.0], vec![1.0], vec![2.0]], vec![1, 1, 2]).unwrap();
        assert!(build_neighbor_sets(&ds, NeighborMode::AllSameClass).is_err());
        assert!(build_neighbor_sets(&ds, NeighborMode::KnnSameClass(3)).is_err());
    }

    #[test]
    fn ties_break_by_index() {
        let ds = Dataset::from_rows(
            &[vec![0.0], vec![1.0], vec![-1.0], vec![5.0], vec![6.0]],
            vec![1, 1, 1, 2, 2],
        )
        .unwrap();
        let n = build_neighbor_sets(&ds, NeighborMode::KnnSameClass(1)).unwrap();
        assert_eq!(n.similar(0), &[1]);
    }

    #[test]
    fn knn_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10 {
            let rows: Vec<Vec<f64>> = (0..25)
                .map(|_| (0..3).map(|_| rng.gen_range(-2.0..2.0)).collect())
                .collect();
            let labels: Vec<usize> = (0..25).map(|i| 1 + i % 3).collect();
            let ds = Dataset::from_rows(&rows, labels.clone()).unwrap();
            let n = build_neighbor_sets(&ds, NeighborMode::KnnSameClass(3)).unwrap();
            for i in 0..25 {
                let mut cand: Vec<usize> = (0..25).filter(|&j| j != i && labels[j] == labels[i]).collect();
                let dist = |j: usize| -> f64 { (0..3).map(|k| (rows[i][k] - rows[j][k]).powi(2)).sum::<f64>().sqrt() };
                cand.sort_by(|&a, &b| dist(a).partial_cmp(&dist(b)).unwrap());
                cand.truncate(3);
                assert_eq!(n.similar(i), cand.as_slice());
                let others: Vec<usize> = (0..25).filter(|&j| labels[j] != labels[i]).collect();
                assert_eq!(n.dissimilar(i), others.as_slice());
            }
        }
    }
}
