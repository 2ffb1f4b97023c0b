use thiserror::Error;

use crate::scalar::Scalar;
use crate::stats::student_t_two_sided;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RegressionError {
    #[error("design matrix is rank deficient (column `{0}`)")]
    RankDeficient(String),
    #[error("{n_obs} observations cannot identify {n_coef} coefficients")]
    TooFewObservations { n_obs: usize, n_coef: usize },
    #[error("column `{name}` has {len} rows, expected {expected}")]
    DimensionMismatch {
        name: String,
        len: usize,
        expected: usize,
    },
    #[error("non-finite value in regression data")]
    NonFinite,
    #[error("trade volumes missing")]
    MissingVolumes,
    #[error("degenerate convexity estimate")]
    DegenerateEstimate,
    #[error("trade volume must be non-negative")]
    NegativeVolume,
}

/// Named regressors, optionally preceded by an intercept.
#[derive(Debug, Clone, PartialEq)]
pub struct Design<T> {
    names: Vec<String>,
    columns: Vec<Vec<T>>,
    intercept: bool,
}

impl<T: Scalar> Design<T> {
    pub fn without_intercept() -> Self {
        Self {
            names: Vec::new(),
            columns: Vec::new(),
            intercept: false,
        }
    }

    /// Starts a design whose first coefficient is an intercept called `name`.
    pub fn with_intercept(name: impl Into<String>) -> Self {
        Self {
            names: vec![name.into()],
            columns: Vec::new(),
            intercept: true,
        }
    }

    pub fn column(mut self, name: impl Into<String>, values: Vec<T>) -> Self {
        self.names.push(name.into());
        self.columns.push(values);
        self
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn n_coef(&self) -> usize {
        self.names.len()
    }

    pub fn has_intercept(&self) -> bool {
        self.intercept
    }

    /// Full matrix in column-major order, intercept column included.
    pub fn dense_columns(&self, n_obs: usize) -> Vec<Vec<T>> {
        let mut cols = Vec::with_capacity(self.n_coef());
        if self.intercept {
            cols.push(vec![T::one(); n_obs]);
        }
        cols.extend(self.columns.iter().cloned());
        cols
    }
}

/// Coefficients with classical (homoskedastic) inference.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionResult<T> {
    pub names: Vec<String>,
    pub estimates: Vec<T>,
    pub std_errors: Vec<T>,
    pub t_stats: Vec<T>,
    /// Two-sided, from the t distribution with `n_obs - n_coef` degrees of freedom.
    pub p_values: Vec<T>,
    pub r_squared: T,
    pub rss: T,
    pub n_obs: usize,
}

impl<T: Scalar> RegressionResult<T> {
    pub fn index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn estimate(&self, name: &str) -> Option<T> {
        self.index(name).map(|i| self.estimates[i])
    }

    pub fn df_resid(&self) -> usize {
        self.n_obs - self.names.len()
    }
}

/// Ordinary least squares through a Householder QR factorization.
pub fn ols<T: Scalar>(y: &[T], design: &Design<T>) -> Result<RegressionResult<T>, RegressionError> {
    let n = y.len();
    let k = design.n_coef();
    for (name, col) in design
        .names
        .iter()
        .skip(usize::from(design.intercept))
        .zip(&design.columns)
    {
        if col.len() != n {
            return Err(RegressionError::DimensionMismatch {
                name: name.clone(),
                len: col.len(),
                expected: n,
            });
        }
    }
    if k == 0 || n <= k {
        return Err(RegressionError::TooFewObservations {
            n_obs: n,
            n_coef: k,
        });
    }
    if y.iter()
        .chain(design.columns.iter().flatten())
        .any(|v| !v.is_finite())
    {
        return Err(RegressionError::NonFinite);
    }

    // a: column-major working copy, overwritten by R above the diagonal.
    let mut a = design.dense_columns(n);
    let mut qty = y.to_vec();
    let col_norms: Vec<T> = a.iter().map(|c| norm(c)).collect();
    let rank_tol = T::epsilon() * T::count(n.max(k)) * T::lit(16.0);

    for j in 0..k {
        let alpha = norm(&a[j][j..]);
        if !(alpha > rank_tol * col_norms[j].max(T::min_positive_value())) {
            return Err(RegressionError::RankDeficient(design.names[j].clone()));
        }
        let alpha = if a[j][j] > T::zero() { -alpha } else { alpha };
        // Householder vector v = x - alpha * e1.
        let mut v: Vec<T> = a[j][j..].to_vec();
        v[0] = v[0] - alpha;
        let vnorm2 = v.iter().fold(T::zero(), |s, &x| s + x * x);
        if vnorm2 > T::zero() {
            let reflect = |col: &mut [T]| {
                let dot = v
                    .iter()
                    .zip(col.iter())
                    .fold(T::zero(), |s, (&a, &b)| s + a * b);
                let f = (dot + dot) / vnorm2;
                for (c, &vi) in col.iter_mut().zip(&v) {
                    *c = *c - f * vi;
                }
            };
            for col in a.iter_mut().skip(j + 1) {
                reflect(&mut col[j..]);
            }
            reflect(&mut qty[j..]);
        }
        a[j][j] = alpha;
        for x in a[j][j + 1..].iter_mut() {
            *x = T::zero();
        }
    }
    // Relative rank check on the final diagonal of R.
    let max_diag = (0..k).fold(T::zero(), |m, j| m.max(a[j][j].abs()));
    for j in 0..k {
        if !(a[j][j].abs() > rank_tol * max_diag) {
            return Err(RegressionError::RankDeficient(design.names[j].clone()));
        }
    }

    // Back substitution R b = (Q'y)[..k]; R[i][j] lives at a[j][i].
    let mut beta = vec![T::zero(); k];
    for i in (0..k).rev() {
        let mut s = qty[i];
        for j in i + 1..k {
            s = s - a[j][i] * beta[j];
        }
        beta[i] = s / a[i][i];
    }

    // Residuals from the original data.
    let cols = design.dense_columns(n);
    let mut rss = T::zero();
    for (i, &yi) in y.iter().enumerate() {
        let fitted = cols
            .iter()
            .zip(&beta)
            .fold(T::zero(), |s, (c, &b)| s + c[i] * b);
        let e = yi - fitted;
        rss = rss + e * e;
    }
    let tss = if design.intercept {
        let m = y.iter().fold(T::zero(), |s, &v| s + v) / T::count(n);
        y.iter().fold(T::zero(), |s, &v| s + (v - m) * (v - m))
    } else {
        y.iter().fold(T::zero(), |s, &v| s + v * v)
    };
    let r_squared = if tss > T::zero() {
        (T::one() - rss / tss).max(T::zero()).min(T::one())
    } else {
        T::one()
    };

    // (X'X)^{-1} = R^{-1} R^{-T}; only its diagonal is needed.
    let rinv = upper_inverse(&a, k);
    let df = n - k;
    let sigma2 = rss / T::count(df);
    let dft = T::count(df);
    let mut std_errors = Vec::with_capacity(k);
    let mut t_stats = Vec::with_capacity(k);
    let mut p_values = Vec::with_capacity(k);
    for i in 0..k {
        let diag = (i..k).fold(T::zero(), |s, j| s + rinv[i][j] * rinv[i][j]);
        let se = (sigma2 * diag).sqrt();
        let t = beta[i] / se;
        let p = if t.is_nan() {
            T::one()
        } else {
            student_t_two_sided(t, dft)
        };
        std_errors.push(se);
        t_stats.push(t);
        p_values.push(p);
    }

    Ok(RegressionResult {
        names: design.names.clone(),
        estimates: beta,
        std_errors,
        t_stats,
        p_values,
        r_squared,
        rss,
        n_obs: n,
    })
}

fn norm<T: Scalar>(v: &[T]) -> T {
    let scale = v.iter().fold(T::zero(), |m, x| m.max(x.abs()));
    if scale == T::zero() {
        return T::zero();
    }
    v.iter()
        .fold(T::zero(), |s, &x| {
            let r = x / scale;
            s + r * r
        })
        .sqrt()
        * scale
}

/// Inverse of the upper-triangular R stored column-major in `a`; row-major output.
fn upper_inverse<T: Scalar>(a: &[Vec<T>], k: usize) -> Vec<Vec<T>> {
    let mut inv = vec![vec![T::zero(); k]; k];
    for j in 0..k {
        inv[j][j] = a[j][j].recip();
        for i in (0..j).rev() {
            let mut s = T::zero();
            for m in i + 1..=j {
                s = s + a[m][i] * inv[m][j];
            }
            inv[i][j] = -s / a[i][i];
        }
    }
    inv
}
