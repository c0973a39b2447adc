//! Contingency tables, entropy and mutual information of labelings.

use std::collections::BTreeMap;

use super::EvalError;

/// Co-occurrence counts of two labelings over the same voxels. Rows follow
/// the sorted distinct labels of `a`, columns those of `b`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContingencyTable {
    pub counts: Vec<Vec<u64>>,
    pub n: u64,
}

fn dense(labels: &[usize]) -> (Vec<usize>, usize) {
    let ids: BTreeMap<usize, usize> = labels
        .iter()
        .copied()
        .collect::<std::collections::BTreeSet<_>>()
        .into_iter()
        .enumerate()
        .map(|(i, l)| (l, i))
        .collect();
    (labels.iter().map(|l| ids[l]).collect(), ids.len())
}

impl ContingencyTable {
    pub fn new(a: &[usize], b: &[usize]) -> Result<Self, EvalError> {
        if a.len() != b.len() {
            return Err(EvalError::LengthMismatch { left: a.len(), right: b.len() });
        }
        let (da, ka) = dense(a);
        let (db, kb) = dense(b);
        let mut counts = vec![vec![0u64; kb]; ka];
        for (&i, &j) in da.iter().zip(&db) {
            counts[i][j] += 1;
        }
        Ok(Self { counts, n: a.len() as u64 })
    }

    pub fn row_sums(&self) -> Vec<u64> {
        self.counts.iter().map(|r| r.iter().sum()).collect()
    }

    pub fn col_sums(&self) -> Vec<u64> {
        let k = self.counts.first().map_or(0, Vec::len);
        (0..k).map(|j| self.counts.iter().map(|r| r[j]).sum()).collect()
    }

    /// Mutual information in nats, `0 log 0 = 0`.
    pub fn mutual_information(&self) -> f64 {
        if self.n == 0 {
            return 0.0;
        }
        let n = self.n as f64;
        let rows = self.row_sums();
        let cols = self.col_sums();
        let mut mi = 0.0;
        for (i, row) in self.counts.iter().enumerate() {
            for (j, &c) in row.iter().enumerate() {
                if c > 0 {
                    let c = c as f64;
                    mi += c / n * (c * n / (rows[i] as f64 * cols[j] as f64)).ln();
                }
            }
        }
        // rounding can leave a tiny negative value for independent labelings
        mi.max(0.0)
    }
}

/// Shannon entropy (nats) of a labeling.
pub fn entropy(labels: &[usize]) -> f64 {
    let n = labels.len() as f64;
    let mut counts: BTreeMap<usize, u64> = BTreeMap::new();
    for &l in labels {
        *counts.entry(l).or_default() += 1;
    }
    -counts
        .values()
        .map(|&c| {
            let p = c as f64 / n;
            p * p.ln()
        })
        .sum::<f64>()
}

/// Raw mutual information (nats) between two labelings of the same voxels.
pub fn mutual_information(a: &[usize], b: &[usize]) -> Result<f64, EvalError> {
    Ok(ContingencyTable::new(a, b)?.mutual_information())
}
