//! Shared scalar statistics: ranks, correlation coefficients, regression
//! scores, and five-number summaries.

/// Average ranks (1-based) with ties sharing the mean of their positions.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && values[idx[j + 1]] == values[idx[i]] {
            j += 1;
        }
        // Positions i..=j (0-based) share the average 1-based rank.
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for k in i..=j {
            ranks[idx[k]] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Pearson correlation coefficient; `None` when either side has zero
/// variance or fewer than two points.
pub fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    if a.len() != b.len() || a.len() < 2 {
        return None;
    }
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut cov, mut va, mut vb) = (0.0, 0.0, 0.0);
    for i in 0..a.len() {
        let (da, db) = (a[i] - ma, b[i] - mb);
        cov += da * db;
        va += da * da;
        vb += db * db;
    }
    if va <= 0.0 || vb <= 0.0 {
        return None;
    }
    Some(cov / (va * vb).sqrt())
}

/// Spearman rank correlation: the Pearson coefficient of the two average-rank
/// vectors. `None` when either input is constant (zero rank variance).
pub fn spearman(a: &[f64], b: &[f64]) -> Option<f64> {
    if a.len() != b.len() || a.len() < 2 {
        return None;
    }
    pearson(&average_ranks(a), &average_ranks(b))
}

/// Coefficient of determination R² of predictions against truths.
pub fn r_squared(pred: &[f64], truth: &[f64]) -> Option<f64> {
    if pred.len() != truth.len() || truth.len() < 2 {
        return None;
    }
    let n = truth.len() as f64;
    let mean = truth.iter().sum::<f64>() / n;
    let ss_tot: f64 = truth.iter().map(|y| (y - mean).powi(2)).sum();
    if ss_tot <= 0.0 {
        return None;
    }
    let ss_res: f64 = pred.iter().zip(truth).map(|(p, y)| (p - y).powi(2)).sum();
    Some(1.0 - ss_res / ss_tot)
}

/// Root-mean-square deviation between predictions and truths.
pub fn rmsd(pred: &[f64], truth: &[f64]) -> f64 {
    let n = pred.len().max(1) as f64;
    (pred.iter().zip(truth).map(|(p, y)| (p - y).powi(2)).sum::<f64>() / n).sqrt()
}

/// Linear-interpolation quantile of already-sorted data.
fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let pos = q * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

/// Five-number-ish summary used in reports.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub mean: f64,
    /// Standard error of the mean.
    pub sem: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
}

pub fn summarize(values: &[f64]) -> Option<Summary> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Some(Summary {
        mean,
        sem: (var / n).sqrt(),
        q1: quantile_sorted(&sorted, 0.25),
        median: quantile_sorted(&sorted, 0.5),
        q3: quantile_sorted(&sorted, 0.75),
    })
}

pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Some(quantile_sorted(&sorted, 0.5))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn ranks_without_ties() {
        assert_eq!(average_ranks(&[10.0, 30.0, 20.0]), vec![1.0, 3.0, 2.0]);
    }

    #[test]
    fn ranks_average_ties() {
        // 5 appears at sorted positions 2 and 3 → rank 2.5 each.
        assert_eq!(average_ranks(&[5.0, 1.0, 5.0, 9.0]), vec![2.5, 1.0, 2.5, 4.0]);
    }

    #[test]
    fn spearman_perfect_and_reversed() {
        let a = [0.3, 1.2, -0.5, 2.0, 0.0];
        let mut b = a.to_vec();
        b.sort_by(f64::total_cmp);
        let mut rev = b.clone();
        rev.reverse();
        // Any strictly increasing transform of a itself.
        let exp_a: Vec<f64> = a.iter().map(|v| v.exp()).collect();
        assert_abs_diff_eq!(spearman(&a, &exp_a).unwrap(), 1.0, epsilon = 1e-12);
        // a against its own reverse-sorted values: the values of `rev` in
        // this order are anti-monotone in rank only for distinct data; use
        // index vectors for the classic identity instead.
        let up: Vec<f64> = (0..20).map(|i| i as f64).collect();
        let dn: Vec<f64> = (0..20).map(|i| (19 - i) as f64).collect();
        assert_abs_diff_eq!(spearman(&up, &dn).unwrap(), -1.0, epsilon = 1e-12);
    }

    #[test]
    fn spearman_monotone_invariance() {
        let a = [0.3, -1.2, 0.7, 2.4, -0.1, 1.1];
        let b = [1.0, 0.2, 3.0, 0.9, 2.2, 0.4];
        let base = spearman(&a, &b).unwrap();
        let cube: Vec<f64> = b.iter().map(|v| v.powi(3)).collect();
        let affine: Vec<f64> = b.iter().map(|v| 3.0 * v + 7.0).collect();
        let expb: Vec<f64> = b.iter().map(|v| v.exp()).collect();
        for t in [&cube, &affine, &expb] {
            assert_abs_diff_eq!(spearman(&a, t).unwrap(), base, epsilon = 1e-12);
        }
    }

    #[test]
    fn spearman_undefined_for_constant_input() {
        assert!(spearman(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]).is_none());
    }

    #[test]
    fn r_squared_perfect_and_mean() {
        let y = [1.0, 2.0, 3.0, 4.0];
        assert_abs_diff_eq!(r_squared(&y, &y).unwrap(), 1.0, epsilon = 1e-15);
        let mean_pred = [2.5; 4];
        assert_abs_diff_eq!(r_squared(&mean_pred, &y).unwrap(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn summary_of_known_values() {
        let s = summarize(&[4.0, 1.0, 3.0, 2.0]).unwrap();
        assert_abs_diff_eq!(s.mean, 2.5, epsilon = 1e-15);
        assert_abs_diff_eq!(s.median, 2.5, epsilon = 1e-15);
        assert_abs_diff_eq!(s.q1, 1.75, epsilon = 1e-15);
        assert_abs_diff_eq!(s.q3, 3.25, epsilon = 1e-15);
    }
}
