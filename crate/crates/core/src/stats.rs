//! Crate-internal numeric helpers shared by the scoring and study modules.

/// Arithmetic mean. Returns NaN on an empty slice; callers validate length.
pub(crate) fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

fn sorted(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).expect("non-comparable value"));
    v
}

/// Lower median: the middle element for odd counts, the lower of the two
/// middle elements for even counts. Deterministic on ordinal data.
pub(crate) fn lower_median(values: &[f64]) -> f64 {
    let v = sorted(values);
    v[(v.len() - 1) / 2]
}

/// Midpoint median (mean of the two central order statistics for even
/// counts). Used where parity with conventional `median` semantics matters.
pub(crate) fn midpoint_median(values: &[f64]) -> f64 {
    let v = sorted(values);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

/// Linear-interpolation percentile on a sorted slice, `p` in `[0, 100]`.
///
/// Uses the inclusive definition: rank `h = (n - 1) * p / 100`, interpolating
/// between the floor and ceil order statistics.
pub(crate) fn percentile_linear_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * p / 100.0;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    if lo == hi {
        sorted[lo]
    } else {
        sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
    }
}

/// Nearest-rank percentile on a sorted slice: the `ceil(p/100 * n)`-th order
/// statistic (1-based), clamped to the first element for `p = 0`.
pub(crate) fn percentile_nearest_rank_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    let rank = (p / 100.0 * n as f64).ceil() as usize;
    sorted[rank.clamp(1, n) - 1]
}

pub(crate) fn percentile_linear(values: &[f64], p: f64) -> f64 {
    percentile_linear_sorted(&sorted(values), p)
}
