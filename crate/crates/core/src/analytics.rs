//! Production-rate metrics, class weights, and exact binomial confidence
//! intervals.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Timing and count totals of one or more imaging runs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunAccounting {
    /// Imaging time including robot motion, s.
    pub t_p: f64,
    /// Bulk download time for all master images, s.
    pub t_d: f64,
    /// Cropping time for all subimages, s.
    pub t_c: f64,
    /// Number of master images.
    pub n_m: u64,
    /// Number of subimages.
    pub n_s: u64,
}

impl RunAccounting {
    /// Daily production settings: 3 h 25 min imaging, 46 min download,
    /// 34 min cropping, 2149 masters and 3494 subimages.
    pub const PRODUCTION: RunAccounting = RunAccounting {
        t_p: 12300.0,
        t_d: 2760.0,
        t_c: 2040.0,
        n_m: 2149,
        n_s: 3494,
    };

    fn check_times(&self) -> Result<()> {
        for (name, v) in [("t_p", self.t_p), ("t_d", self.t_d), ("t_c", self.t_c)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::domain(format!("{name} must be non-negative, got {v}")));
            }
        }
        Ok(())
    }
}

/// Average seconds per master image, `(t_p + t_d) / N_m`.
pub fn master_rate(acc: &RunAccounting) -> Result<f64> {
    acc.check_times()?;
    if acc.n_m == 0 {
        return Err(Error::domain("master image count must be at least 1"));
    }
    Ok((acc.t_p + acc.t_d) / acc.n_m as f64)
}

/// Average seconds per subimage, `(t_p + t_d + t_c) / N_s`.
pub fn subimage_rate(acc: &RunAccounting) -> Result<f64> {
    acc.check_times()?;
    if acc.n_s == 0 {
        return Err(Error::domain("subimage count must be at least 1"));
    }
    Ok((acc.t_p + acc.t_d + acc.t_c) / acc.n_s as f64)
}

/// Per-class image counts, in a fixed order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ClassCounts(pub Vec<(String, u64)>);

impl ClassCounts {
    pub fn total(&self) -> u64 {
        self.0.iter().map(|(_, c)| c).sum()
    }
}

/// `total / count` for every class; unnormalized.
pub fn class_weights(counts: &ClassCounts) -> Result<Vec<(String, f64)>> {
    if counts.0.is_empty() {
        return Err(Error::domain("at least one class is required"));
    }
    if let Some((name, _)) = counts.0.iter().find(|(_, c)| *c == 0) {
        return Err(Error::domain(format!("class '{name}' has no images")));
    }
    let total = counts.total() as f64;
    Ok(counts
        .0
        .iter()
        .map(|(name, c)| (name.clone(), total / *c as f64))
        .collect())
}

/// Natural log of the gamma function for `x > 0` (Lanczos, g = 7, n = 9).
pub fn ln_gamma(x: f64) -> f64 {
    const G: f64 = 7.0;
    #[allow(clippy::excessive_precision)]
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_93,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_13,
        -176.615_029_162_140_59,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_571_6e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        // reflection
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = COEF[0];
    let t = x + G + 0.5;
    for (i, c) in COEF.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

/// Continued fraction for the incomplete beta function (modified Lentz).
fn beta_cf(x: f64, a: f64, b: f64) -> f64 {
    const TINY: f64 = 1e-300;
    const EPS: f64 = 1e-15;
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=10_000 {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// Regularized incomplete beta function `I_x(a, b)`.
pub fn regularized_incomplete_beta(x: f64, a: f64, b: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front =
        ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    let front = ln_front.exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_cf(x, a, b) / a
    } else {
        1.0 - front * beta_cf(1.0 - x, b, a) / b
    }
}

/// Quantile of the Beta(a, b) distribution by bisection on the CDF.
pub fn beta_quantile(p: f64, a: f64, b: f64) -> f64 {
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    // 60 halvings take the bracket below 1e-18
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if regularized_incomplete_beta(mid, a, b) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lower: f64,
    pub upper: f64,
}

/// Exact (Clopper-Pearson) two-sided interval for a binomial proportion at
/// significance `alpha`.
pub fn clopper_pearson(successes: u64, trials: u64, alpha: f64) -> Result<Interval> {
    if trials == 0 {
        return Err(Error::domain("at least one trial is required"));
    }
    if successes > trials {
        return Err(Error::domain(format!(
            "successes ({successes}) exceed trials ({trials})"
        )));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::domain(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    let (k, n) = (successes as f64, trials as f64);
    let lower = if successes == 0 {
        0.0
    } else {
        beta_quantile(alpha / 2.0, k, n - k + 1.0)
    };
    let upper = if successes == trials {
        1.0
    } else {
        beta_quantile(1.0 - alpha / 2.0, k + 1.0, n - k)
    };
    Ok(Interval { lower, upper })
}
