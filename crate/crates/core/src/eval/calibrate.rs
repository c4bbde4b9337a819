use super::EvalError;

/// Smallest threshold `t` such that at most `floor(n * target_fpr)` of the
/// calibration scores lie strictly above `t`.
///
/// Ties resolve conservatively: the returned value is the `(k+1)`-th largest
/// score (k the exceedance budget), so every score below it would blow the
/// budget. A budget of `n` or more admits the minimum score.
pub fn calibrate_threshold(scores: &[f64], target_fpr: f64) -> Result<f64, EvalError> {
    if scores.is_empty() {
        return Err(EvalError::EmptyScores);
    }
    if !(0.0..=1.0).contains(&target_fpr) {
        return Err(EvalError::InvalidTarget(target_fpr));
    }

    let n = scores.len();
    let budget = (n as f64 * target_fpr).floor() as usize;
    let mut sorted: Vec<f64> = scores.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
    if budget >= n {
        return Ok(sorted[n - 1]);
    }
    Ok(sorted[budget])
}
