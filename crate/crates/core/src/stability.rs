//! Finite-grid proxies for "this quantity is finite".
//!
//! Every sup over a lattice is finite, so membership in a class is read off
//! from how a constant behaves as the lattice is refined.

/// Default bound on `value(m+1) / value(m)`.
pub const RATIO_THRESHOLD: f64 = 1.5;

/// `b / a`, with `0 / 0 = 1`.
pub fn ratio(a: f64, b: f64) -> f64 {
    if a == 0.0 && b == 0.0 {
        1.0
    } else {
        b / a
    }
}

/// Two-resolution test: the refined value exceeds the coarse one by at most `threshold`.
pub fn two_resolution_stable(coarse: f64, fine: f64, threshold: f64) -> bool {
    coarse.is_finite() && fine.is_finite() && ratio(coarse, fine) <= threshold
}

/// Three-resolution test on successive increments.
///
/// A quantity converging like `c - K 2^{-γm}` has increments shrinking by
/// `2^{-γ}`; one diverging like `2^{γm}` has them growing. Slow power-law
/// blow-ups whose per-level ratio is below the two-resolution threshold are
/// still caught here. Increments below `abs_tol` relative to the value count
/// as converged.
pub fn increments_converge(values: [f64; 3], contraction: f64) -> bool {
    if values.iter().any(|v| !v.is_finite()) {
        return false;
    }
    let scale = values[2].abs().max(1e-300);
    let abs_tol = 1e-9 * scale;
    let d1 = values[1] - values[0];
    let d2 = values[2] - values[1];
    d2 <= (contraction * d1).max(0.0) + abs_tol
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ratio_and_threshold() {
        assert_eq!(ratio(0.0, 0.0), 1.0);
        assert!(two_resolution_stable(2.0, 2.9, 1.5));
        assert!(!two_resolution_stable(2.0, 3.1, 1.5));
        assert!(!two_resolution_stable(2.0, f64::INFINITY, 1.5));
    }

    #[test]
    fn increment_classifier() {
        let conv = |m: i32| 3.0 - 2f64.powi(-m);
        assert!(increments_converge([conv(5), conv(6), conv(7)], 0.95));
        let slow = |m: i32| 2f64.powf(0.1 * m as f64);
        assert!(!increments_converge([slow(5), slow(6), slow(7)], 0.95));
        assert!(increments_converge([1.0, 1.0, 1.0], 0.95));
        assert!(increments_converge([2.0, 1.5, 1.4], 0.95));
    }
}
