//! Ranking and thresholded metrics. The generated class is positive and
//! higher scores mean "more likely generated".

use crate::error::{Error, Result};
use crate::scalar::Scalar;

fn class_counts(labels: &[bool]) -> Result<(usize, usize)> {
    let pos = labels.iter().filter(|&&l| l).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::SingleClass);
    }
    Ok((pos, neg))
}

fn check_lengths<T>(scores: &[T], labels: &[bool]) -> Result<()> {
    if scores.len() != labels.len() {
        return Err(Error::InvalidArgument(format!(
            "{} scores for {} labels",
            scores.len(),
            labels.len()
        )));
    }
    Ok(())
}

/// Area under the ROC curve via the Mann-Whitney rank statistic, ties counted half.
pub fn roc_auc<T: Scalar>(scores: &[T], labels: &[bool]) -> Result<T> {
    check_lengths(scores, labels)?;
    let (pos, neg) = class_counts(labels)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| {
        scores[a]
            .partial_cmp(&scores[b])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    // sum of (1-based, tie-averaged) ranks of the positives, kept doubled to stay integral
    let mut rank_sum_x2: u128 = 0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let doubled_rank = (i + 1 + j + 1) as u128;
        let positives = order[i..=j].iter().filter(|&&k| labels[k]).count() as u128;
        rank_sum_x2 += doubled_rank * positives;
        i = j + 1;
    }
    let (p, n) = (pos as u128, neg as u128);
    let u_x2 = rank_sum_x2 - p * (p + 1);
    Ok(T::from_u128(u_x2).expect("count") / T::from_u128(2 * p * n).expect("count"))
}

/// Average precision: the mean, over positives, of the precision at each
/// positive's rank. Scores are sorted descending; equal scores keep input order.
pub fn average_precision<T: Scalar>(scores: &[T], labels: &[bool]) -> Result<T> {
    check_lengths(scores, labels)?;
    let (pos, _) = class_counts(labels)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| {
        scores[b]
            .partial_cmp(&scores[a])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let mut hits = 0usize;
    let mut total = T::zero();
    for (rank, &k) in order.iter().enumerate() {
        if labels[k] {
            hits += 1;
            total = total + T::from_usize_lossy(hits) / T::from_usize_lossy(rank + 1);
        }
    }
    Ok(total / T::from_usize_lossy(pos))
}

/// F1 of the positive class, predicting positive when `score >= threshold`.
/// Zero when precision and recall are both zero.
pub fn f1_at_threshold<T: Scalar>(scores: &[T], labels: &[bool], threshold: T) -> Result<T> {
    check_lengths(scores, labels)?;
    let (mut tp, mut fp, mut fne) = (0usize, 0usize, 0usize);
    for (&s, &l) in scores.iter().zip(labels) {
        match (s >= threshold, l) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fne += 1,
            (false, false) => {}
        }
    }
    if tp == 0 {
        return Ok(T::zero());
    }
    let tp2 = T::from_usize_lossy(2 * tp);
    Ok(tp2 / (tp2 + T::from_usize_lossy(fp + fne)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn auc_examples() {
        assert_eq!(roc_auc(&[0.9, 0.1], &[true, false]).unwrap(), 1.0);
        assert_eq!(
            roc_auc(&[0.8, 0.7, 0.3], &[true, false, true]).unwrap(),
            0.5
        );
        assert_eq!(
            roc_auc(&[0.4f32; 4], &[true, false, true, false]).unwrap(),
            0.5
        );
        assert!(matches!(
            roc_auc(&[0.1, 0.2], &[true, true]),
            Err(Error::SingleClass)
        ));
    }

    #[test]
    fn ap_examples() {
        assert_eq!(
            average_precision(&[0.9, 0.8, 0.2, 0.1], &[true, true, false, false]).unwrap(),
            1.0
        );
        assert_eq!(average_precision(&[0.9, 0.1], &[false, true]).unwrap(), 0.5);
        let mut labels = vec![false; 10];
        labels[3] = true;
        let mut scores = vec![0.1; 10];
        scores[3] = 0.9;
        assert_eq!(average_precision(&scores, &labels).unwrap(), 1.0);
    }

    #[test]
    fn f1_examples() {
        assert_eq!(
            f1_at_threshold(&[0.9, 0.1], &[true, false], 0.5).unwrap(),
            1.0
        );
        assert_eq!(
            f1_at_threshold(&[0.2, 0.1], &[true, false], 0.5).unwrap(),
            0.0
        );
        // TP, FP, FN one each
        assert_eq!(
            f1_at_threshold(&[0.9, 0.8, 0.1], &[true, false, true], 0.5).unwrap(),
            0.5
        );
    }
}
