//! Summary statistics for correlated chain output.

/// Arithmetic mean; `NaN` for an empty slice.
pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Standard error of the mean by non-overlapping batch means.
///
/// The series is cut into `batches` consecutive batches of equal length
/// (a short tail is dropped). Returns `None` with fewer than two batches
/// of at least one value each.
pub fn batch_means_standard_error(values: &[f64], batches: usize) -> Option<f64> {
    if batches < 2 || values.len() < batches {
        return None;
    }
    let len = values.len() / batches;
    let means: Vec<f64> = values.chunks_exact(len).take(batches).map(mean).collect();
    let grand = mean(&means);
    let var = means.iter().map(|m| (m - grand).powi(2)).sum::<f64>() / (batches - 1) as f64;
    Some((var / batches as f64).sqrt())
}
