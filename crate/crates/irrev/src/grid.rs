//! The frequency grid every analytic identity is checked on: log-spaced
//! points on the positive imaginary axis plus their reflections, so parity
//! bugs cannot hide.

/// `n` points log-spaced over `[lo, hi]`, endpoints included.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(lo > 0.0 && hi > lo && n >= 2);
    let (llo, lhi) = (lo.ln(), hi.ln());
    let mut g: Vec<f64> = (0..n)
        .map(|k| (llo + (lhi - llo) * k as f64 / (n - 1) as f64).exp())
        .collect();
    g[0] = lo;
    g[n - 1] = hi;
    g
}

/// Default validation grid: 512 log-spaced frequencies in `[1e-3, 1e3]`
/// together with their negatives, sorted ascending.
pub fn validation_grid() -> Vec<f64> {
    validation_grid_with(512)
}

/// Validation grid with a chosen number of positive points.
pub fn validation_grid_with(points: usize) -> Vec<f64> {
    let pos = log_grid(1e-3, 1e3, points);
    let mut all: Vec<f64> = pos.iter().map(|l| -l).chain(pos.iter().copied()).collect();
    all.sort_by(|a, b| a.partial_cmp(b).unwrap());
    all
}

/// Largest value of `|a - b| / max(|b|, floor)` over paired samples.
pub fn max_rel_err(pairs: impl IntoIterator<Item = (f64, f64)>, floor: f64) -> f64 {
    pairs
        .into_iter()
        .map(|(a, b)| (a - b).abs() / b.abs().max(floor))
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_is_symmetric_and_sorted() {
        let g = validation_grid();
        assert_eq!(g.len(), 1024);
        assert!(g.windows(2).all(|w| w[0] < w[1]));
        let n = g.len();
        for k in 0..n / 2 {
            assert_eq!(g[k], -g[n - 1 - k]);
        }
        assert_eq!(g[n / 2], 1e-3);
        assert_eq!(g[n - 1], 1e3);
    }

    #[test]
    fn log_grid_hits_endpoints() {
        let g = log_grid(0.1, 10.0, 5);
        assert!((g[0] - 0.1).abs() < 1e-15);
        assert!((g[4] - 10.0).abs() < 1e-12);
        assert!((g[2] - 1.0).abs() < 1e-12);
    }
}
