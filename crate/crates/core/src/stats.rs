//! Summary moments, normality and autocorrelation tests, and correlation
//! tables for monthly return series.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::data::YearMonth;
use crate::error::{Error, Result};

/// Lags used for the Ljung–Box statistic in summaries.
pub const LJUNG_BOX_LAGS: usize = 12;

/// Two-sided critical values of the standard normal.
pub const Z_5PCT: f64 = 1.959_963_984_540_054;
pub const Z_1PCT: f64 = 2.575_829_303_548_900_4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryStats {
    pub periods: usize,
    /// Mean × 12 × 100.
    pub mean_annual: f64,
    /// Raw monthly percent.
    pub min_monthly: f64,
    pub max_monthly: f64,
    pub min_index: usize,
    pub max_index: usize,
    pub min_date: Option<YearMonth>,
    pub max_date: Option<YearMonth>,
    /// Sample standard deviation × 12 × 100.
    pub std_annual: f64,
    pub skewness: f64,
    pub excess_kurtosis: f64,
    pub jarque_bera: f64,
    pub jarque_bera_p: f64,
    pub q12: f64,
    pub q12_p: f64,
}

/// Upper-tail probability of χ²_df at `x`.
pub fn chi_squared_sf(x: f64, df: usize) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    let dist = ChiSquared::new(df as f64).expect("df > 0");
    dist.sf(x).clamp(0.0, 1.0)
}

/// Mean computed around the first observation, exact for constant series.
pub fn mean(x: &[f64]) -> f64 {
    let Some(&x0) = x.first() else {
        return f64::NAN;
    };
    x0 + x.iter().map(|v| v - x0).sum::<f64>() / x.len() as f64
}

/// Unbiased (n-1) standard deviation.
pub fn sample_std(x: &[f64]) -> f64 {
    let m = mean(x);
    let ss: f64 = x.iter().map(|v| (v - m).powi(2)).sum();
    (ss / (x.len() as f64 - 1.0)).sqrt()
}

pub fn annualized_mean(x: &[f64]) -> f64 {
    mean(x) * 1200.0
}

pub fn annualized_std(x: &[f64]) -> f64 {
    sample_std(x) * 1200.0
}

/// Population skewness and excess kurtosis (1/T central moments).
pub fn skew_kurtosis(x: &[f64]) -> Result<(f64, f64)> {
    let n = x.len() as f64;
    let m = mean(x);
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for v in x {
        let d = v - m;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    m2 /= n;
    m3 /= n;
    m4 /= n;
    if !(m2 > 0.0) {
        return Err(Error::DegenerateMoments("series has zero variance".into()));
    }
    Ok((m3 / m2.powf(1.5), m4 / (m2 * m2) - 3.0))
}

/// `T/6 · (S² + K²/4)` with `K` the excess kurtosis.
pub fn jarque_bera(periods: usize, skewness: f64, excess_kurtosis: f64) -> f64 {
    periods as f64 / 6.0 * (skewness * skewness + excess_kurtosis * excess_kurtosis / 4.0)
}

fn centered(x: &[f64]) -> Result<(Vec<f64>, f64)> {
    let m = mean(x);
    let d: Vec<f64> = x.iter().map(|v| v - m).collect();
    let denom: f64 = d.iter().map(|v| v * v).sum();
    if !(denom > 0.0) {
        return Err(Error::DegenerateMoments("series has zero variance".into()));
    }
    Ok((d, denom))
}

fn acf_from_centered(d: &[f64], denom: f64, lag: usize) -> f64 {
    if lag == 0 {
        return 1.0;
    }
    d[lag..].iter().zip(d).map(|(a, b)| a * b).sum::<f64>() / denom
}

/// Sample autocorrelation at `lag`; lag 0 is exactly 1.
pub fn autocorrelation(x: &[f64], lag: usize) -> Result<f64> {
    if lag >= x.len() {
        return Err(Error::Domain(format!("lag {lag} ≥ series length {}", x.len())));
    }
    let (d, denom) = centered(x)?;
    Ok(acf_from_centered(&d, denom, lag))
}

/// Ljung–Box Q statistic over lags `1..=lags`.
pub fn ljung_box(x: &[f64], lags: usize) -> Result<f64> {
    let t = x.len();
    if lags == 0 || lags >= t {
        return Err(Error::Domain(format!("Ljung-Box needs 0 < lags < T, got {lags} for T={t}")));
    }
    let (d, denom) = centered(x)?;
    let tf = t as f64;
    let q = (1..=lags)
        .map(|k| acf_from_centered(&d, denom, k).powi(2) / (tf - k as f64))
        .sum::<f64>();
    Ok(tf * (tf + 2.0) * q)
}

pub fn summarize(series: &[f64], dates: Option<&[YearMonth]>) -> Result<SummaryStats> {
    let t = series.len();
    if t < 8 {
        return Err(Error::Domain(format!("summary needs at least 8 observations, got {t}")));
    }
    if let Some(d) = dates {
        if d.len() != t {
            return Err(Error::Shape(format!("{} dates for {t} observations", d.len())));
        }
    }
    if series.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("non-finite observation".into()));
    }
    let (mut min_index, mut max_index) = (0, 0);
    for (i, &v) in series.iter().enumerate() {
        if v < series[min_index] {
            min_index = i;
        }
        if v > series[max_index] {
            max_index = i;
        }
    }
    let (skewness, excess_kurtosis) = skew_kurtosis(series)?;
    let jb = jarque_bera(t, skewness, excess_kurtosis);
    let q12 = ljung_box(series, LJUNG_BOX_LAGS.min(t - 1))?;
    Ok(SummaryStats {
        periods: t,
        mean_annual: annualized_mean(series),
        min_monthly: series[min_index] * 100.0,
        max_monthly: series[max_index] * 100.0,
        min_index,
        max_index,
        min_date: dates.map(|d| d[min_index]),
        max_date: dates.map(|d| d[max_index]),
        std_annual: annualized_std(series),
        skewness,
        excess_kurtosis,
        jarque_bera: jb,
        jarque_bera_p: chi_squared_sf(jb, 2),
        q12,
        q12_p: chi_squared_sf(q12, LJUNG_BOX_LAGS.min(t - 1)),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Autocorrelations {
    /// Lags `1..=max_lag`.
    pub lags: Vec<usize>,
    pub values: Vec<f64>,
    /// Two-sided 5% band half-width, 1.96/√T.
    pub band: f64,
    pub band_1pct: f64,
}

pub fn autocorrelations(series: &[f64], max_lag: usize, squared: bool) -> Result<Autocorrelations> {
    let t = series.len();
    if 2 * max_lag >= t {
        return Err(Error::Domain(format!("max lag {max_lag} must be below T/2 = {}", t / 2)));
    }
    let x: Vec<f64> = if squared {
        series.iter().map(|v| v * v).collect()
    } else {
        series.to_vec()
    };
    let (d, denom) = centered(&x)?;
    let lags: Vec<usize> = (1..=max_lag).collect();
    let values = lags.iter().map(|&k| acf_from_centered(&d, denom, k)).collect();
    let sqrt_t = (t as f64).sqrt();
    Ok(Autocorrelations {
        lags,
        values,
        band: Z_5PCT / sqrt_t,
        band_1pct: Z_1PCT / sqrt_t,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossCorrelations {
    /// Lags `-max_lag..=max_lag`; entry `k` is corr(a²_t, b²_{t-k}).
    pub lags: Vec<i64>,
    pub values: Vec<f64>,
    pub band: f64,
    pub band_1pct: f64,
}

/// Cross-correlations of squared series at leads and lags.
pub fn cross_correlations_squared(a: &[f64], b: &[f64], max_lag: usize) -> Result<CrossCorrelations> {
    let t = a.len();
    if b.len() != t {
        return Err(Error::Shape(format!("series lengths differ: {t} vs {}", b.len())));
    }
    if max_lag >= t {
        return Err(Error::Domain(format!("max lag {max_lag} ≥ T={t}")));
    }
    let sq = |x: &[f64]| x.iter().map(|v| v * v).collect::<Vec<_>>();
    let (da, va) = centered(&sq(a))?;
    let (db, vb) = centered(&sq(b))?;
    let norm = (va * vb).sqrt();
    let ml = max_lag as i64;
    let lags: Vec<i64> = (-ml..=ml).collect();
    let values = lags
        .iter()
        .map(|&k| {
            let s: f64 = if k >= 0 {
                let k = k as usize;
                da[k..].iter().zip(&db).map(|(x, y)| x * y).sum()
            } else {
                let k = (-k) as usize;
                da.iter().zip(&db[k..]).map(|(x, y)| x * y).sum()
            };
            s / norm
        })
        .collect();
    let sqrt_t = (t as f64).sqrt();
    Ok(CrossCorrelations {
        lags,
        values,
        band: Z_5PCT / sqrt_t,
        band_1pct: Z_1PCT / sqrt_t,
    })
}

/// Pearson correlation matrix of the columns of `values`.
pub fn unconditional_correlations(values: &DMatrix<f64>, names: &[String]) -> Result<DMatrix<f64>> {
    let (t, n) = values.shape();
    if t < 3 {
        return Err(Error::Domain(format!("correlations need T ≥ 3, got {t}")));
    }
    let mut centered_cols = Vec::with_capacity(n);
    for j in 0..n {
        let col: Vec<f64> = values.column(j).iter().copied().collect();
        let c = centered(&col).map_err(|_| {
            let name = names.get(j).cloned().unwrap_or_else(|| format!("column {j}"));
            Error::DegenerateMoments(format!("`{name}` is constant"))
        })?;
        centered_cols.push(c);
    }
    let mut out = DMatrix::identity(n, n);
    for i in 0..n {
        for j in 0..i {
            let (di, vi) = &centered_cols[i];
            let (dj, vj) = &centered_cols[j];
            let r = di.iter().zip(dj).map(|(x, y)| x * y).sum::<f64>() / (vi * vj).sqrt();
            let r = r.clamp(-1.0, 1.0);
            out[(i, j)] = r;
            out[(j, i)] = r;
        }
    }
    Ok(out)
}

/// `"*"` for significance at 1%, `"**"` at 5%, empty otherwise.
pub fn stars(p_value: f64) -> &'static str {
    if p_value < 0.01 {
        "*"
    } else if p_value < 0.05 {
        "**"
    } else {
        ""
    }
}

/// Stars for a correlation against its ±z/√T bands.
pub fn band_stars(value: f64, band_5pct: f64, band_1pct: f64) -> &'static str {
    if value.abs() > band_1pct {
        "*"
    } else if value.abs() > band_5pct {
        "**"
    } else {
        ""
    }
}
