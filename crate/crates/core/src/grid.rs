//! Sample grids shared by the detectors and the decay harness.

/// `n` points `10^e` with `e` evenly spaced between `log10(lo)` and `log10(hi)`.
///
/// Exponents are formed as `a + (b − a)·k/(n − 1)` so decade points land exactly.
pub fn logspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(lo > 0.0 && hi >= lo && n >= 1, "bad logspace({lo}, {hi}, {n})");
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.log10(), hi.log10());
    (0..n)
        .map(|k| {
            if k == 0 {
                lo
            } else if k == n - 1 {
                hi
            } else {
                10f64.powf(a + (b - a) * k as f64 / (n - 1) as f64)
            }
        })
        .collect()
}

pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(n >= 2, "linspace needs two points");
    (0..n)
        .map(|k| {
            if k == n - 1 {
                hi
            } else {
                lo + (hi - lo) * k as f64 / (n - 1) as f64
            }
        })
        .collect()
}

/// Negative mirror followed by the positive grid: `−g_{n−1}, ..., −g_0, g_0, ..., g_{n−1}`.
pub fn mirrored(grid: &[f64]) -> Vec<f64> {
    grid.iter()
        .rev()
        .map(|r| -r)
        .chain(grid.iter().copied())
        .collect()
}

/// Number of decades spanned by a positive grid.
pub fn decades(grid: &[f64]) -> f64 {
    let lo = grid.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = grid.iter().copied().fold(0.0, f64::max);
    (hi / lo).log10()
}
