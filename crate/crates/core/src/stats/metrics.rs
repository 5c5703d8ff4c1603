use crate::error::{Error, Result};

/// `ln(n + 1)`, the log-scaled citation count used as a regression target.
pub fn citation_score(n: i64) -> Result<f64> {
    if n < 0 {
        return Err(Error::InvalidArgument(format!("negative citation count {n}")));
    }
    Ok((n as f64).ln_1p())
}

/// Back-transform of [`citation_score`], `round(e^s − 1)`, clamped at zero.
pub fn citation_count(score: f64) -> Result<u64> {
    if !score.is_finite() {
        return Err(Error::InvalidArgument(format!("non-finite score {score}")));
    }
    Ok(score.exp_m1().round().max(0.0) as u64)
}

fn check_aligned(what: &str, a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::InvalidArgument(format!("{what}: {a} golds vs {b} predictions")));
    }
    if a == 0 {
        return Err(Error::UndefinedMetric(format!("{what} of an empty set")));
    }
    Ok(())
}

pub fn mse(golds: &[f64], preds: &[f64]) -> Result<f64> {
    check_aligned("mse", golds.len(), preds.len())?;
    Ok(golds.iter().zip(preds).map(|(g, p)| (g - p).powi(2)).sum::<f64>() / golds.len() as f64)
}

pub fn mae(golds: &[f64], preds: &[f64]) -> Result<f64> {
    check_aligned("mae", golds.len(), preds.len())?;
    Ok(golds.iter().zip(preds).map(|(g, p)| (g - p).abs()).sum::<f64>() / golds.len() as f64)
}

/// `1 − MSE / var(golds)` with the population variance, so predicting the
/// gold mean scores exactly 0.
pub fn r2_score(golds: &[f64], preds: &[f64]) -> Result<f64> {
    check_aligned("r2", golds.len(), preds.len())?;
    if golds.len() < 2 {
        return Err(Error::UndefinedMetric("r2 needs at least two examples".into()));
    }
    let m = crate::util::mean(golds);
    let var = mse(golds, &vec![m; golds.len()])?;
    if var == 0.0 {
        return Err(Error::UndefinedMetric("r2 with constant gold values".into()));
    }
    Ok(1.0 - mse(golds, preds)? / var)
}

pub fn accuracy<T: PartialEq>(golds: &[T], preds: &[T]) -> Result<f64> {
    check_aligned("accuracy", golds.len(), preds.len())?;
    let hits = golds.iter().zip(preds).filter(|(g, p)| g == p).count();
    Ok(hits as f64 / golds.len() as f64)
}

/// 1-based ranks with ties sharing their average rank.
pub fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut ranks = vec![0.0; xs.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && xs[order[j + 1]] == xs[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Area under the ROC curve via the Mann-Whitney rank statistic; tied
/// scores count one half.
pub fn auc_roc(golds: &[bool], probs: &[f64]) -> Result<f64> {
    check_aligned("auc", golds.len(), probs.len())?;
    let pos = golds.iter().filter(|&&g| g).count();
    let neg = golds.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::UndefinedMetric("auc needs both classes in the gold labels".into()));
    }
    let ranks = average_ranks(probs);
    let rank_sum: f64 = ranks.iter().zip(golds).filter(|(_, &g)| g).map(|(r, _)| r).sum();
    let u = rank_sum - (pos * (pos + 1)) as f64 / 2.0;
    Ok(u / (pos as f64 * neg as f64))
}
