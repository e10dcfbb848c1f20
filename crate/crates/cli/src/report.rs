use std::ops::Range;

use anyhow::Result;
use icapm_core::data::ParameterLayout;
use icapm_core::inference::{wald_test_indices, Hypothesis};
use icapm_core::stats::{chi_squared_sf, stars};
use icapm_core::Variant;
use serde::{Deserialize, Serialize};

use crate::fit::FitArtifact;

/// One estimate with its robust standard error and two-sided test of zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterRow {
    pub label: String,
    pub index: usize,
    pub estimate: f64,
    pub std_error: f64,
    pub t_stat: f64,
    pub p_value: f64,
    pub stars: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssetBlock {
    pub asset: String,
    pub rows: Vec<ParameterRow>,
}

/// Price-of-risk coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanPanel {
    pub world_price: Vec<ParameterRow>,
    pub domestic_prices: Vec<AssetBlock>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub country_constants: Option<Vec<ParameterRow>>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub local_coefficients: Vec<AssetBlock>,
}

/// Covariance-equation coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GarchPanel {
    pub c: Vec<ParameterRow>,
    pub a: Vec<ParameterRow>,
    pub b: Vec<ParameterRow>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub s: Option<Vec<ParameterRow>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub z: Option<Vec<ParameterRow>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestEntry {
    pub hypothesis: String,
    pub description: String,
    pub statistic: Option<f64>,
    pub df: usize,
    pub p_value: Option<f64>,
    pub stars: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

fn row(fit: &FitArtifact, k: usize) -> ParameterRow {
    let estimate = fit.theta[k];
    let std_error = fit.standard_errors[k];
    let t_stat = if std_error > 0.0 { estimate / std_error } else { f64::NAN };
    let p_value = if t_stat.is_finite() { chi_squared_sf(t_stat * t_stat, 1) } else { f64::NAN };
    ParameterRow {
        label: fit.labels[k].clone(),
        index: k,
        estimate,
        std_error,
        t_stat,
        p_value,
        stars: if p_value.is_finite() { stars(p_value).to_string() } else { String::new() },
    }
}

fn rows(fit: &FitArtifact, r: &Range<usize>) -> Vec<ParameterRow> {
    r.clone().map(|k| row(fit, k)).collect()
}

fn blocks(fit: &FitArtifact, ranges: &[Range<usize>]) -> Vec<AssetBlock> {
    fit.local_assets()
        .into_iter()
        .zip(ranges)
        .map(|(asset, r)| AssetBlock {
            asset,
            rows: rows(fit, r),
        })
        .collect()
}

pub fn layout_of(fit: &FitArtifact) -> Result<ParameterLayout> {
    Ok(ParameterLayout::new(&fit.spec)?)
}

pub fn mean_panel(fit: &FitArtifact) -> Result<MeanPanel> {
    let l = layout_of(fit)?;
    Ok(MeanPanel {
        world_price: rows(fit, &l.kappa_world),
        domestic_prices: blocks(fit, &l.kappa_local),
        country_constants: l.alpha.as_ref().map(|r| rows(fit, r)),
        local_coefficients: blocks(fit, &l.phi),
    })
}

pub fn garch_panel(fit: &FitArtifact) -> Result<GarchPanel> {
    let l = layout_of(fit)?;
    Ok(GarchPanel {
        c: rows(fit, &l.c_vech),
        a: rows(fit, &l.a),
        b: rows(fit, &l.b),
        s: l.s.as_ref().map(|r| rows(fit, r)),
        z: l.z.as_ref().map(|r| rows(fit, r)),
    })
}

/// The specification tests reported alongside an estimate by default.
pub fn default_hypotheses(variant: Variant, local_assets: &[String]) -> Vec<Hypothesis> {
    let mut h = vec![Hypothesis::WorldPriceConstant];
    h.extend(local_assets.iter().map(|a| Hypothesis::DomesticPriceZero(a.clone())));
    h.push(Hypothesis::AllDomesticZero);
    if variant.has_asymmetry() {
        h.push(Hypothesis::SZero);
        h.push(Hypothesis::ZZero);
    }
    if variant.is_augmented() {
        h.push(Hypothesis::CountryConstantsZero);
        h.push(Hypothesis::LocalCoefficientsZero);
    }
    h
}

pub fn parse_hypotheses(names: &[String]) -> Result<Vec<Hypothesis>> {
    Ok(names.iter().map(|n| n.parse()).collect::<Result<_, _>>()?)
}

/// Robust Wald test of each hypothesis. A hypothesis that does not apply to
/// the fitted model is an error; a numerically singular restriction is
/// reported in the entry.
pub fn wald_entries(fit: &FitArtifact, hypotheses: &[Hypothesis]) -> Result<Vec<TestEntry>> {
    let layout = layout_of(fit)?;
    let locals = fit.local_assets();
    hypotheses
        .iter()
        .map(|h| {
            let idx = h.indices(&layout, &locals)?;
            let entry = match wald_test_indices(&fit.theta, &fit.covariance, &idx, h.to_string()) {
                Ok(t) => TestEntry {
                    hypothesis: h.to_string(),
                    description: h.describe(),
                    statistic: Some(t.statistic),
                    df: t.df,
                    p_value: Some(t.p_value),
                    stars: stars(t.p_value).to_string(),
                    error: None,
                },
                Err(e) => TestEntry {
                    hypothesis: h.to_string(),
                    description: h.describe(),
                    statistic: None,
                    df: idx.len(),
                    p_value: None,
                    stars: String::new(),
                    error: Some(e.to_string()),
                },
            };
            Ok(entry)
        })
        .collect()
}
