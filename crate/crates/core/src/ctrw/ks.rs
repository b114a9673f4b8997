//! Kolmogorov–Smirnov statistics with asymptotic critical values.

use crate::{Error, Result};

fn sorted(xs: &[f64]) -> Result<Vec<f64>> {
    if xs.is_empty() {
        return Err(Error::EmptySample);
    }
    if xs.iter().any(|x| x.is_nan()) {
        return Err(Error::invalid("samples", "NaN in sample"));
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    Ok(v)
}

/// Two-sample statistic `sup |F_a − F_b|`.
pub fn ks_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    let a = sorted(a)?;
    let b = sorted(b)?;
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(d)
}

/// One-sample statistic `sup |F_n − F|` against a continuous CDF.
pub fn ks_one_sample(samples: &[f64], cdf: impl Fn(f64) -> f64) -> Result<f64> {
    let v = sorted(samples)?;
    let n = v.len() as f64;
    let mut d: f64 = 0.0;
    for (k, &x) in v.iter().enumerate() {
        let f = cdf(x);
        d = d.max(f - k as f64 / n).max((k + 1) as f64 / n - f);
    }
    Ok(d)
}

/// `P(K > λ) = 2 Σ_{k≥1} (−1)^{k−1} e^{−2k²λ²}` for the Kolmogorov law.
pub fn kolmogorov_survival(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * lambda * lambda).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-18 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// `c` with `P(K > c) = level`, by bisection.
pub fn kolmogorov_quantile(level: f64) -> Result<f64> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::invalid(
            "level",
            format!("must be in (0,1), got {level}"),
        ));
    }
    let (mut lo, mut hi) = (0.2, 10.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if kolmogorov_survival(mid) > level {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

pub fn two_sample_critical(n: usize, m: usize, level: f64) -> Result<f64> {
    if n == 0 || m == 0 {
        return Err(Error::EmptySample);
    }
    let (n, m) = (n as f64, m as f64);
    Ok(kolmogorov_quantile(level)? * ((n + m) / (n * m)).sqrt())
}

pub fn one_sample_critical(n: usize, level: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::EmptySample);
    }
    Ok(kolmogorov_quantile(level)? / (n as f64).sqrt())
}
