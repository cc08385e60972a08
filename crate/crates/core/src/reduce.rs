//! Deterministic reductions across chains.
//!
//! Sums use a fixed pairwise tree so results do not depend on how many worker
//! threads produced the inputs.

pub(crate) fn pairwise_sum(values: &[f64]) -> f64 {
    match values.len() {
        0 => 0.0,
        1 => values[0],
        2 => values[0] + values[1],
        n => {
            let (a, b) = values.split_at(n / 2);
            pairwise_sum(a) + pairwise_sum(b)
        }
    }
}

pub(crate) fn mean(values: &[f64]) -> f64 {
    pairwise_sum(values) / values.len() as f64
}

/// Coordinate-wise mean of equally long rows.
pub(crate) fn mean_rows(rows: &[Vec<f64>]) -> Vec<f64> {
    let d = rows.first().map_or(0, Vec::len);
    let mut column = vec![0.0; rows.len()];
    (0..d)
        .map(|j| {
            for (c, row) in column.iter_mut().zip(rows) {
                *c = row[j];
            }
            mean(&column)
        })
        .collect()
}
