use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::math;

pub const SIGNIFICANCE_LEVEL: f64 = 0.001;

/// One-sample t-test of a coefficient sample against zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComponentStats {
    pub mean: f64,
    pub t: f64,
    pub p: f64,
    pub df: usize,
    pub significant: bool,
    /// The sample had zero spread, so `t` is infinite (or zero) by convention.
    pub degenerate: bool,
}

pub fn beta_ttest(betas: &[f64]) -> Result<ComponentStats> {
    let n = betas.len();
    if n < 2 {
        return Err(Error::argument(format!("t-test needs at least 2 values, got {n}")));
    }
    if betas.iter().any(|b| !b.is_finite()) {
        return Err(Error::non_finite("t-test sample"));
    }
    let mean = math::mean(betas);
    let sd = math::std_dev(betas, 1);
    let df = n - 1;
    let scale = math::sqrt(n as f64);
    let (t, p, degenerate) = if sd > 0.0 && sd * scale > mean.abs() * 1e-14 {
        let t = mean / (sd / scale);
        (t, student_t_two_sided_p(t, df as f64), false)
    } else if mean == 0.0 {
        (0.0, 1.0, true)
    } else {
        (f64::INFINITY.copysign(mean), 0.0, true)
    };
    Ok(ComponentStats {
        mean,
        t,
        p,
        df,
        significant: p < SIGNIFICANCE_LEVEL,
        degenerate,
    })
}

/// `P(|T| >= |t|)` for Student's t with `df` degrees of freedom.
pub fn student_t_two_sided_p(t: f64, df: f64) -> f64 {
    if t.is_nan() || !(df > 0.0) {
        return f64::NAN;
    }
    if t.is_infinite() {
        return 0.0;
    }
    let x = df / (df + t * t);
    regularized_incomplete_beta(x, 0.5 * df, 0.5).clamp(0.0, 1.0)
}

/// `I_x(a, b)` evaluated with a modified Lentz continued fraction.
pub fn regularized_incomplete_beta(x: f64, a: f64, b: f64) -> f64 {
    if !(a > 0.0 && b > 0.0) || x.is_nan() {
        return f64::NAN;
    }
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let log_front = math::ln_gamma(a + b) - math::ln_gamma(a) - math::ln_gamma(b) + a * math::ln(x) + b * math::ln_1p(-x);
    let front = math::exp(log_front);
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_continued_fraction(x, a, b) / a
    } else {
        1.0 - front * beta_continued_fraction(1.0 - x, b, a) / b
    }
}

fn beta_continued_fraction(x: f64, a: f64, b: f64) -> f64 {
    const TINY: f64 = 1e-300;
    const EPS: f64 = 1e-16;
    let guard = |v: f64| if v.abs() < TINY { TINY } else { v };
    let mut c = 1.0;
    let mut d = 1.0 / guard(1.0 - (a + b) * x / (a + 1.0));
    let mut h = d;
    for m in 1..=10_000 {
        let m = m as f64;
        let m2 = 2.0 * m;
        let even = m * (b - m) * x / ((a + m2 - 1.0) * (a + m2));
        d = 1.0 / guard(1.0 + even * d);
        c = guard(1.0 + even / c);
        h *= d * c;
        let odd = -(a + m) * (a + b + m) * x / ((a + m2) * (a + m2 + 1.0));
        d = 1.0 / guard(1.0 + odd * d);
        c = guard(1.0 + odd / c);
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    /// Correlate rows with each other.
    Rows,
    /// Correlate columns with each other.
    Columns,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix {
    pub matrix: Matrix,
    /// Vectors with zero variance (correlation defined as 0 off the diagonal).
    pub degenerate: Vec<bool>,
}

/// Pearson correlations between the rows (or columns) of `m`.
pub fn correlation_matrix(m: &Matrix, axis: Axis) -> CorrelationMatrix {
    let vectors: Vec<Vec<f64>> = match axis {
        Axis::Rows => (0..m.rows()).map(|i| m.row(i).to_vec()).collect(),
        Axis::Columns => (0..m.cols()).map(|j| m.column(j)).collect(),
    };
    let k = vectors.len();
    let mut matrix = Matrix::zeros(k, k);
    let mut degenerate = vec![false; k];
    for i in 0..k {
        degenerate[i] = math::pearson(&vectors[i], &vectors[i]).is_none();
        matrix.set(i, i, 1.0);
        for j in 0..i {
            let r = math::pearson(&vectors[i], &vectors[j]).unwrap_or(0.0);
            matrix.set(i, j, r);
            matrix.set(j, i, r);
        }
    }
    CorrelationMatrix { matrix, degenerate }
}
