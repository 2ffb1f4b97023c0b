//! Centered least-squares line fit used by the log-log estimators.

use crate::scalar::Scalar;

/// Result of fitting `y = intercept + slope * x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit<T> {
    pub intercept: T,
    pub slope: T,
    /// Coefficient of determination in the fitted space.
    pub r_squared: T,
    pub n: usize,
}

/// Fits a line by least squares after centering `x`.
///
/// Returns `None` when fewer than two points are given or `x` has no spread.
/// When `y` has no spread the fit is exact and `r_squared` is reported as 1.
pub fn fit_line<T: Scalar>(x: &[T], y: &[T]) -> Option<LineFit<T>> {
    assert_eq!(x.len(), y.len(), "x and y must have equal length");
    let n = x.len();
    if n < 2 {
        return None;
    }
    let nt = T::count(n);
    let mean_x = x.iter().fold(T::zero(), |a, &v| a + v) / nt;
    let mean_y = y.iter().fold(T::zero(), |a, &v| a + v) / nt;

    let mut sxx = T::zero();
    let mut sxy = T::zero();
    let mut syy = T::zero();
    let mut scale = T::zero();
    for (&xi, &yi) in x.iter().zip(y) {
        let dx = xi - mean_x;
        let dy = yi - mean_y;
        sxx = sxx + dx * dx;
        sxy = sxy + dx * dy;
        syy = syy + dy * dy;
        scale = scale.max(xi.abs());
    }
    // Identical x values can leave rounding residue after centering.
    let floor = nt * (T::lit(4.0) * T::epsilon() * scale).powi(2);
    if !(sxx > floor) {
        return None;
    }

    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;

    let mut ssr = T::zero();
    for (&xi, &yi) in x.iter().zip(y) {
        let e = yi - mean_y - slope * (xi - mean_x);
        ssr = ssr + e * e;
    }
    let r_squared = if syy > T::zero() {
        (T::one() - ssr / syy).max(T::zero()).min(T::one())
    } else {
        T::one()
    };

    Some(LineFit {
        intercept,
        slope,
        r_squared,
        n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_line() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y = [3.0, 5.0, 7.0, 9.0];
        let fit = fit_line(&x, &y).unwrap();
        assert!((fit.slope - 2.0_f64).abs() < 1e-15);
        assert!((fit.intercept - 1.0).abs() < 1e-15);
        assert_eq!(fit.r_squared, 1.0);
    }

    #[test]
    fn matches_naive_normal_equations() {
        let x = [0.3_f64, 1.7, 2.2, 4.9, 5.5, 7.1];
        let y = [1.1_f64, 0.4, 2.9, 3.3, 5.0, 4.4];
        let fit = fit_line(&x, &y).unwrap();

        let n = x.len() as f64;
        let sx: f64 = x.iter().sum();
        let sy: f64 = y.iter().sum();
        let sxx: f64 = x.iter().map(|v| v * v).sum();
        let sxy: f64 = x.iter().zip(&y).map(|(a, b)| a * b).sum();
        let det = n * sxx - sx * sx;
        let slope = (n * sxy - sx * sy) / det;
        let intercept = (sxx * sy - sx * sxy) / det;
        assert!((fit.slope - slope).abs() < 1e-12);
        assert!((fit.intercept - intercept).abs() < 1e-12);
    }

    #[test]
    fn constant_x_is_singular() {
        let x = [0.1_f64; 7];
        let y = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0];
        assert!(fit_line(&x, &y).is_none());
        assert!(fit_line(&[1.0_f64], &[1.0]).is_none());
    }

    #[test]
    fn works_in_single_precision() {
        let x = [1.0_f32, 2.0, 3.0];
        let y = [2.0_f32, 4.0, 6.0];
        let fit = fit_line(&x, &y).unwrap();
        assert!((fit.slope - 2.0).abs() < 1e-6);
    }
}
