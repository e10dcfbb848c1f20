//! Typed containers shared by every other module: the returns panel, the
//! lagged instrument matrices, the model specification and the flat
//! parameter layout.

mod ingest;
mod layout;

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

pub use ingest::{ingest_panel, write_panel_csv, IngestConfig, WrittenFiles};
pub use layout::{ModelParams, ParameterLayout};

/// A calendar month, ordered and serialized as `YYYY-MM`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct YearMonth {
    year: i32,
    month: u32,
}

impl YearMonth {
    pub fn new(year: i32, month: u32) -> Result<Self> {
        if !(1..=12).contains(&month) {
            return Err(Error::Config(format!("month {month} out of range 1..=12")));
        }
        Ok(Self { year, month })
    }

    pub fn year(self) -> i32 {
        self.year
    }

    pub fn month(self) -> u32 {
        self.month
    }

    fn ordinal(self) -> i64 {
        self.year as i64 * 12 + (self.month as i64 - 1)
    }

    fn from_ordinal(ord: i64) -> Self {
        Self {
            year: ord.div_euclid(12) as i32,
            month: (ord.rem_euclid(12) + 1) as u32,
        }
    }

    pub fn succ(self) -> Self {
        Self::from_ordinal(self.ordinal() + 1)
    }

    pub fn pred(self) -> Self {
        Self::from_ordinal(self.ordinal() - 1)
    }

    pub fn offset(self, months: i64) -> Self {
        Self::from_ordinal(self.ordinal() + months)
    }

    /// Signed number of months from `self` to `other`.
    pub fn months_until(self, other: YearMonth) -> i64 {
        other.ordinal() - self.ordinal()
    }
}

impl fmt::Display for YearMonth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-{:02}", self.year, self.month)
    }
}

impl FromStr for YearMonth {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (y, m) = s
            .split_once('-')
            .ok_or_else(|| Error::Config(format!("`{s}` is not a YYYY-MM month")))?;
        let year = y
            .parse::<i32>()
            .map_err(|_| Error::Config(format!("`{s}` is not a YYYY-MM month")))?;
        let month = m
            .parse::<u32>()
            .map_err(|_| Error::Config(format!("`{s}` is not a YYYY-MM month")))?;
        if y.len() != 4 || m.len() != 2 {
            return Err(Error::Config(format!("`{s}` is not a YYYY-MM month")));
        }
        YearMonth::new(year, month)
    }
}

impl Serialize for YearMonth {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for YearMonth {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Inclusive estimation window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Window {
    pub start: YearMonth,
    pub end: YearMonth,
}

impl FromStr for Window {
    type Err = Error;

    /// Parses `YYYY-MM:YYYY-MM`.
    fn from_str(s: &str) -> Result<Self> {
        let (a, b) = s
            .split_once(':')
            .ok_or_else(|| Error::Config(format!("window `{s}` must be YYYY-MM:YYYY-MM")))?;
        let w = Window {
            start: a.parse()?,
            end: b.parse()?,
        };
        if w.end < w.start {
            return Err(Error::Config(format!("window `{s}` ends before it starts")));
        }
        Ok(w)
    }
}

/// Monthly excess returns, T×N, world market in the last column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReturnsPanel {
    dates: Vec<YearMonth>,
    values: DMatrix<f64>,
    asset_names: Vec<String>,
    world_index: usize,
}

impl ReturnsPanel {
    pub fn new(
        dates: Vec<YearMonth>,
        values: DMatrix<f64>,
        asset_names: Vec<String>,
        world_index: usize,
    ) -> Result<Self> {
        let (t, n) = values.shape();
        if t < 2 {
            return Err(Error::Shape(format!("panel needs at least 2 periods, got {t}")));
        }
        if n < 2 {
            return Err(Error::Shape(format!("panel needs at least 2 assets, got {n}")));
        }
        if dates.len() != t {
            return Err(Error::Shape(format!(
                "{} dates for {t} return rows",
                dates.len()
            )));
        }
        if asset_names.len() != n {
            return Err(Error::Shape(format!(
                "{} asset names for {n} columns",
                asset_names.len()
            )));
        }
        if world_index >= n {
            return Err(Error::Shape(format!(
                "world index {world_index} outside {n} columns"
            )));
        }
        check_consecutive(&dates, "returns panel")?;
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Domain(format!(
                "non-finite return at row {}, column {}",
                pos % t,
                pos / t
            )));
        }
        Ok(Self {
            dates,
            values,
            asset_names,
            world_index,
        })
    }

    pub fn periods(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_assets(&self) -> usize {
        self.values.ncols()
    }

    pub fn dates(&self) -> &[YearMonth] {
        &self.dates
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn asset_names(&self) -> &[String] {
        &self.asset_names
    }

    pub fn world_index(&self) -> usize {
        self.world_index
    }

    /// Indices of the non-world assets in column order.
    pub fn local_indices(&self) -> Vec<usize> {
        (0..self.n_assets()).filter(|&i| i != self.world_index).collect()
    }

    pub fn column(&self, i: usize) -> Vec<f64> {
        self.values.column(i).iter().copied().collect()
    }

    pub fn row(&self, t: usize) -> DVector<f64> {
        self.values.row(t).transpose()
    }

    /// Row range `[first, last]` (inclusive) covering `window`.
    pub fn window_rows(&self, window: Window) -> Result<(usize, usize)> {
        let first = *self.dates.first().expect("non-empty");
        let last = *self.dates.last().expect("non-empty");
        if window.start < first || window.end > last {
            return Err(Error::Config(format!(
                "window {}:{} outside data range {first}:{last}",
                window.start, window.end
            )));
        }
        let a = first.months_until(window.start) as usize;
        let b = first.months_until(window.end) as usize;
        if b < a + 1 {
            return Err(Error::Config("window must span at least 2 months".into()));
        }
        Ok((a, b))
    }

    pub fn slice_rows(&self, first: usize, last: usize) -> Result<Self> {
        let len = last + 1 - first;
        Self::new(
            self.dates[first..=last].to_vec(),
            self.values.rows(first, len).into_owned(),
            self.asset_names.clone(),
            self.world_index,
        )
    }

    /// Sample covariance (1/T) of the demeaned returns.
    pub fn sample_covariance(&self) -> DMatrix<f64> {
        covariance(&self.values)
    }
}

pub(crate) fn covariance(x: &DMatrix<f64>) -> DMatrix<f64> {
    let t = x.nrows() as f64;
    let means = x.row_mean();
    let mut centered = x.clone();
    for mut row in centered.row_iter_mut() {
        row -= &means;
    }
    centered.transpose() * &centered / t
}

fn check_consecutive(dates: &[YearMonth], context: &str) -> Result<()> {
    let mut gaps = Vec::new();
    for w in dates.windows(2) {
        if w[1] <= w[0] {
            return Err(Error::Alignment {
                context: format!("{context}: dates not strictly increasing"),
                months: vec![w[0], w[1]],
            });
        }
        let mut m = w[0].succ();
        while m < w[1] {
            gaps.push(m);
            m = m.succ();
        }
    }
    if gaps.is_empty() {
        Ok(())
    } else {
        Err(Error::Alignment {
            context: format!("{context}: missing months"),
            months: gaps,
        })
    }
}

/// Global and per-country conditioning information. Row `t` already holds
/// the values dated one month before return row `t`; column 0 is the constant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstrumentSet {
    global: DMatrix<f64>,
    local: Vec<DMatrix<f64>>,
    #[serde(default)]
    global_names: Vec<String>,
    #[serde(default)]
    local_names: Vec<String>,
}

impl InstrumentSet {
    pub fn new(global: DMatrix<f64>, local: Vec<DMatrix<f64>>) -> Result<Self> {
        let t = global.nrows();
        if global.ncols() == 0 {
            return Err(Error::Shape("global instruments need at least the constant".into()));
        }
        let ones = |m: &DMatrix<f64>| m.column(0).iter().all(|&v| v == 1.0);
        if !ones(&global) {
            return Err(Error::Shape("first global instrument column must be the constant 1".into()));
        }
        let l_local = local.first().map_or(1, |m| m.ncols());
        for (i, m) in local.iter().enumerate() {
            if m.nrows() != t {
                return Err(Error::Shape(format!(
                    "local instrument set {i} has {} rows, expected {t}",
                    m.nrows()
                )));
            }
            if m.ncols() != l_local || m.ncols() == 0 {
                return Err(Error::Shape(format!(
                    "local instrument set {i} has {} columns, expected {l_local}",
                    m.ncols()
                )));
            }
            if !ones(m) {
                return Err(Error::Shape(format!(
                    "first column of local instrument set {i} must be the constant 1"
                )));
            }
        }
        if global.iter().chain(local.iter().flat_map(|m| m.iter())).any(|v| !v.is_finite()) {
            return Err(Error::Domain("non-finite instrument value".into()));
        }
        let global_names = default_names("g", global.ncols());
        let local_names = default_names("l", l_local);
        Ok(Self {
            global,
            local,
            global_names,
            local_names,
        })
    }

    /// Constant-only instruments for `n_local` non-world assets.
    pub fn constant(periods: usize, n_local: usize) -> Self {
        Self::new(
            DMatrix::from_element(periods, 1, 1.0),
            vec![DMatrix::from_element(periods, 1, 1.0); n_local],
        )
        .expect("constant instruments are valid")
    }

    pub fn with_names(mut self, global_names: Vec<String>, local_names: Vec<String>) -> Result<Self> {
        if global_names.len() != self.n_global() || local_names.len() != self.n_local() {
            return Err(Error::Shape("instrument name count mismatch".into()));
        }
        self.global_names = global_names;
        self.local_names = local_names;
        Ok(self)
    }

    pub fn periods(&self) -> usize {
        self.global.nrows()
    }

    pub fn n_global(&self) -> usize {
        self.global.ncols()
    }

    pub fn n_local(&self) -> usize {
        self.local.first().map_or(1, |m| m.ncols())
    }

    pub fn global(&self) -> &DMatrix<f64> {
        &self.global
    }

    pub fn local(&self) -> &[DMatrix<f64>] {
        &self.local
    }

    pub fn global_names(&self) -> &[String] {
        &self.global_names
    }

    pub fn local_names(&self) -> &[String] {
        &self.local_names
    }

    pub fn slice_rows(&self, first: usize, last: usize) -> Result<Self> {
        let len = last + 1 - first;
        let global = self.global.rows(first, len).into_owned();
        let local = self
            .local
            .iter()
            .map(|m| m.rows(first, len).into_owned())
            .collect();
        Self::new(global, local)?.with_names(self.global_names.clone(), self.local_names.clone())
    }
}

fn default_names(prefix: &str, n: usize) -> Vec<String> {
    (0..n)
        .map(|i| if i == 0 { "const".to_string() } else { format!("{prefix}{i}") })
        .collect()
}

/// Which covariance and mean specification to estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Symmetric,
    Asymmetric,
    Augmented,
}

impl Variant {
    pub fn has_asymmetry(self) -> bool {
        !matches!(self, Variant::Symmetric)
    }

    pub fn is_augmented(self) -> bool {
        matches!(self, Variant::Augmented)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Symmetric => "symmetric",
            Variant::Asymmetric => "asymmetric",
            Variant::Augmented => "augmented",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "symmetric" => Ok(Variant::Symmetric),
            "asymmetric" => Ok(Variant::Asymmetric),
            "augmented" => Ok(Variant::Augmented),
            other => Err(Error::Config(format!(
                "unknown model `{other}` (expected symmetric|asymmetric|augmented)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub variant: Variant,
    pub n_assets: usize,
    pub n_global: usize,
    pub n_local: usize,
    pub window: Option<Window>,
}

impl ModelSpec {
    pub fn new(variant: Variant, n_assets: usize, n_global: usize, n_local: usize) -> Result<Self> {
        let spec = Self {
            variant,
            n_assets,
            n_global,
            n_local,
            window: None,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Specification matching the dimensions of `panel` and `instruments`.
    pub fn for_data(variant: Variant, panel: &ReturnsPanel, instruments: &InstrumentSet) -> Result<Self> {
        Self::new(variant, panel.n_assets(), instruments.n_global(), instruments.n_local())
    }

    pub fn with_variant(self, variant: Variant) -> Self {
        Self { variant, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_assets < 2 {
            return Err(Error::Config("at least two assets (one of them the world)".into()));
        }
        if self.n_global < 1 || self.n_local < 1 {
            return Err(Error::Config("instrument sets must contain the constant".into()));
        }
        Ok(())
    }

    /// Checks that `panel` and `instruments` have the dimensions this spec expects.
    pub fn check_data(&self, panel: &ReturnsPanel, instruments: &InstrumentSet) -> Result<()> {
        if panel.n_assets() != self.n_assets {
            return Err(Error::Shape(format!(
                "spec has {} assets, panel has {}",
                self.n_assets,
                panel.n_assets()
            )));
        }
        if instruments.periods() != panel.periods() {
            return Err(Error::Shape(format!(
                "{} instrument rows for {} return rows",
                instruments.periods(),
                panel.periods()
            )));
        }
        if instruments.n_global() != self.n_global || instruments.n_local() != self.n_local {
            return Err(Error::Shape(format!(
                "spec expects L_g={}, L_l={}; instruments have {}, {}",
                self.n_global,
                self.n_local,
                instruments.n_global(),
                instruments.n_local()
            )));
        }
        if instruments.local().len() != self.n_assets - 1 {
            return Err(Error::Shape(format!(
                "{} local instrument sets for {} non-world assets",
                instruments.local().len(),
                self.n_assets - 1
            )));
        }
        Ok(())
    }
}
