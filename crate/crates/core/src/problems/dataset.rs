use std::io::Read;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

use crate::error::{Error, Result};

/// Feature vectors with integer class labels in `[0, classes)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    pub classes: usize,
}

impl LabeledDataset {
    pub fn new(features: Vec<Vec<f64>>, labels: Vec<usize>, classes: usize) -> Result<Self> {
        if features.len() != labels.len() {
            return Err(Error::Dataset(format!("{} feature rows but {} labels", features.len(), labels.len())));
        }
        if features.is_empty() {
            return Err(Error::Dataset("no items".into()));
        }
        let p = features[0].len();
        if let Some(row) = features.iter().position(|f| f.len() != p) {
            return Err(Error::Dataset(format!("row {row} has {} features, expected {p}", features[row].len())));
        }
        if let Some(&bad) = labels.iter().find(|&&y| y >= classes) {
            return Err(Error::Dataset(format!("label {bad} outside [0, {classes})")));
        }
        if features.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Dataset("non-finite feature value".into()));
        }
        Ok(Self { features, labels, classes })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn feature_dim(&self) -> usize {
        self.features[0].len()
    }

    /// Indices of the items of each class.
    pub fn by_class(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.classes];
        for (i, &y) in self.labels.iter().enumerate() {
            out[y].push(i);
        }
        out
    }

    /// Parses CSV with a header row; the last column is the label. The class
    /// count is one more than the largest label.
    pub fn from_csv_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
        let mut features = Vec::new();
        let mut labels = Vec::new();
        for (row, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| Error::Dataset(e.to_string()))?;
            let line = row + 2;
            if rec.len() < 2 {
                return Err(Error::Dataset(format!("line {line}: need at least one feature and a label")));
            }
            let label = rec[rec.len() - 1]
                .parse::<usize>()
                .map_err(|_| Error::Dataset(format!("line {line}: label `{}` is not a non-negative integer", &rec[rec.len() - 1])))?;
            let x = rec
                .iter()
                .take(rec.len() - 1)
                .map(|v| v.parse::<f64>().map_err(|_| Error::Dataset(format!("line {line}: bad number `{v}`"))))
                .collect::<Result<Vec<f64>>>()?;
            features.push(x);
            labels.push(label);
        }
        let classes = labels.iter().max().map_or(0, |m| m + 1);
        Self::new(features, labels, classes)
    }

    pub fn from_csv_path(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::Dataset(format!("{}: {e}", path.display())))?;
        Self::from_csv_reader(std::io::BufReader::new(file))
    }

    /// `per_class` points per class around class means drawn from
    /// `N(0, separation^2 I)`, with unit-variance isotropic spread.
    pub fn gaussian_clusters<R: Rng + ?Sized>(
        classes: usize,
        per_class: usize,
        features: usize,
        separation: f64,
        rng: &mut R,
    ) -> Result<Self> {
        if classes == 0 || per_class == 0 || features == 0 {
            return Err(Error::param("data", "classes, per_class and features must be positive"));
        }
        let means: Vec<Vec<f64>> = (0..classes)
            .map(|_| (0..features).map(|_| separation * gauss(&mut *rng)).collect())
            .collect();
        let mut xs = Vec::with_capacity(classes * per_class);
        let mut ys = Vec::with_capacity(classes * per_class);
        for (c, mu) in means.iter().enumerate() {
            for _ in 0..per_class {
                xs.push(mu.iter().map(|m| m + gauss(&mut *rng)).collect());
                ys.push(c);
            }
        }
        Self::new(xs, ys, classes)
    }
}

fn gauss<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

/// One draw from the symmetric Dirichlet(alpha, ..., alpha) on `k` parts.
///
/// Gamma variates are formed in log space as `ln G(alpha + 1) + ln(U) / alpha`
/// so that very small `alpha` does not underflow every part to zero.
pub fn dirichlet_weights<R: Rng + ?Sized>(alpha: f64, k: usize, rng: &mut R) -> Result<Vec<f64>> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::param("alpha", "must be positive and finite"));
    }
    if k == 0 {
        return Err(Error::param("k", "need at least one part"));
    }
    let gamma = Gamma::new(alpha + 1.0, 1.0).map_err(|e| Error::param("alpha", e.to_string()))?;
    let logs: Vec<f64> = (0..k)
        .map(|_| {
            let g: f64 = gamma.sample(&mut *rng);
            let u: f64 = 1.0 - rng.random::<f64>();
            g.ln() + u.ln() / alpha
        })
        .collect();
    let max = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = logs.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = w.iter().sum();
    Ok(w.into_iter().map(|x| x / total).collect())
}

/// Splits `total` items into integer counts proportional to `shares`
/// (largest remainder, ties to the lower index).
pub(crate) fn largest_remainder(total: usize, shares: &[f64]) -> Vec<usize> {
    let exact: Vec<f64> = shares.iter().map(|s| s * total as f64).collect();
    let mut counts: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..shares.len()).collect();
    order.sort_by(|&a, &b| (exact[b] - exact[b].floor()).total_cmp(&(exact[a] - exact[a].floor())).then(a.cmp(&b)));
    for &j in order.iter().take(total.saturating_sub(assigned)) {
        counts[j] += 1;
    }
    counts
}

/// Non-IID split of `data` across `n` nodes. For every class an independent
/// Dirichlet(alpha) draw gives the node shares; the class's items, shuffled,
/// are dealt out by largest-remainder rounding of those shares. Every item
/// lands on exactly one node.
pub fn dirichlet_partition<R: Rng + ?Sized>(
    data: &LabeledDataset,
    alpha: f64,
    n: usize,
    rng: &mut R,
) -> Result<Vec<Vec<usize>>> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::param("alpha", "must be positive and finite"));
    }
    if n == 0 {
        return Err(Error::param("n", "need at least one node"));
    }
    let by_class = data.by_class();
    if let Some(c) = by_class.iter().position(|v| v.is_empty()) {
        return Err(Error::Dataset(format!("class {c} has no items")));
    }
    let mut parts = vec![Vec::new(); n];
    for mut items in by_class {
        let shares = dirichlet_weights(alpha, n, rng)?;
        items.shuffle(rng);
        let mut next = 0;
        for (node, count) in largest_remainder(items.len(), &shares).into_iter().enumerate() {
            parts[node].extend_from_slice(&items[next..next + count]);
            next += count;
        }
    }
    for p in parts.iter_mut() {
        p.sort_unstable();
    }
    Ok(parts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Purpose};

    fn balanced(classes: usize, per_class: usize) -> LabeledDataset {
        let labels: Vec<usize> = (0..classes * per_class).map(|i| i % classes).collect();
        let features = labels.iter().map(|&y| vec![y as f64]).collect();
        LabeledDataset::new(features, labels, classes).unwrap()
    }

    fn assert_partition(parts: &[Vec<usize>], total: usize) {
        let mut all: Vec<usize> = parts.iter().flatten().copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..total).collect::<Vec<_>>());
    }

    #[test]
    fn largest_remainder_is_exact() {
        assert_eq!(largest_remainder(10, &[0.5, 0.5]), vec![5, 5]);
        assert_eq!(largest_remainder(10, &[0.33, 0.33, 0.34]), vec![3, 3, 4]);
        assert_eq!(largest_remainder(1, &[0.5, 0.5]), vec![1, 0]);
        assert_eq!(largest_remainder(7, &[1.0, 0.0]), vec![7, 0]);
    }

    #[test]
    fn weights_sum_to_one() {
        let mut rng = stream(1, Purpose::Partition, 0, 0);
        for alpha in [1e-3, 0.1, 1.0, 1e6] {
            let w = dirichlet_weights(alpha, 8, &mut rng).unwrap();
            assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(w.iter().all(|x| x.is_finite() && *x >= 0.0));
        }
        assert!(dirichlet_weights(0.0, 3, &mut rng).is_err());
    }

    #[test]
    fn weights_have_dirichlet_mean_and_variance() {
        // Dirichlet(a,...,a) on k parts: mean 1/k, var (k-1)/(k^2 (k a + 1))
        let (alpha, k, trials) = (0.5, 4usize, 40_000);
        let mut rng = stream(2, Purpose::Partition, 0, 0);
        let mut stats = crate::mixing::RunningStats::new();
        for _ in 0..trials {
            stats.push(dirichlet_weights(alpha, k, &mut rng).unwrap()[0]);
        }
        let kf = k as f64;
        let var = (kf - 1.0) / (kf * kf * (kf * alpha + 1.0));
        assert!((stats.mean() - 0.25).abs() < 4.0 * stats.std_error());
        assert!((stats.variance() / var - 1.0).abs() < 0.05);
    }

    #[test]
    fn single_node_gets_everything() {
        let data = balanced(3, 5);
        let parts = dirichlet_partition(&data, 0.1, 1, &mut stream(0, Purpose::Partition, 0, 0)).unwrap();
        assert_eq!(parts, vec![(0..15).collect::<Vec<_>>()]);
    }

    #[test]
    fn partition_is_complete() {
        let data = balanced(10, 37);
        for seed in 0..20 {
            let parts = dirichlet_partition(&data, 0.1, 7, &mut stream(seed, Purpose::Partition, 0, 0)).unwrap();
            assert_eq!(parts.len(), 7);
            assert_partition(&parts, data.len());
        }
    }

    #[test]
    fn huge_alpha_is_iid() {
        let data = balanced(2, 1000);
        for seed in 0..10 {
            let parts = dirichlet_partition(&data, 1e6, 2, &mut stream(seed, Purpose::Partition, 0, 0)).unwrap();
            for p in &parts {
                let ones = p.iter().filter(|&&i| data.labels[i] == 1).count() as f64;
                assert!((ones / p.len() as f64 - 0.5).abs() < 0.02);
            }
        }
    }

    #[test]
    fn tiny_alpha_is_extreme() {
        let data = balanced(8, 50);
        let mut dominant = Vec::new();
        for seed in 0..100 {
            let parts = dirichlet_partition(&data, 0.01, 8, &mut stream(seed, Purpose::Partition, 0, 0)).unwrap();
            let mut shares: Vec<f64> = parts
                .iter()
                .filter(|p| !p.is_empty())
                .map(|p| {
                    let mut counts = [0usize; 8];
                    p.iter().for_each(|&i| counts[data.labels[i]] += 1);
                    *counts.iter().max().unwrap() as f64 / p.len() as f64
                })
                .collect();
            shares.sort_by(f64::total_cmp);
            dominant.push(shares[shares.len() / 2]);
        }
        dominant.sort_by(f64::total_cmp);
        assert!(dominant[50] > 0.9, "median dominant share {}", dominant[50]);
    }

    #[test]
    fn rejects_bad_input() {
        let data = balanced(2, 4);
        let mut rng = stream(0, Purpose::Partition, 0, 0);
        assert!(dirichlet_partition(&data, 0.0, 2, &mut rng).is_err());
        assert!(dirichlet_partition(&data, -1.0, 2, &mut rng).is_err());
        let gap = LabeledDataset::new(vec![vec![0.0], vec![1.0]], vec![0, 2], 3).unwrap();
        assert!(dirichlet_partition(&gap, 1.0, 2, &mut rng).is_err());
        assert!(LabeledDataset::new(vec![vec![0.0]], vec![3], 3).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let text = "a,b,label\n1.0,2.0,0\n3.5,-1,2\n0,0,1\n";
        let d = LabeledDataset::from_csv_reader(text.as_bytes()).unwrap();
        assert_eq!(d.classes, 3);
        assert_eq!(d.labels, vec![0, 2, 1]);
        assert_eq!(d.features[1], vec![3.5, -1.0]);
        assert!(LabeledDataset::from_csv_reader("a,label\n1.0,x\n".as_bytes()).is_err());
        assert!(LabeledDataset::from_csv_reader("a,label\n1.0,-1\n".as_bytes()).is_err());
    }
}
