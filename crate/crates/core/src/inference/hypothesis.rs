use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::ParameterLayout;
use crate::error::{Error, Result};

/// Named zero restrictions on the parameter vector.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Hypothesis {
    /// Non-constant world price coefficients are zero.
    WorldPriceConstant,
    /// All coefficients of one asset's domestic price are zero.
    DomesticPriceZero(String),
    /// Non-constant coefficients of one asset's domestic price are zero.
    DomesticPriceConstant(String),
    AllDomesticZero,
    SZero,
    ZZero,
    /// Country-specific constants `α` (augmented model).
    CountryConstantsZero,
    /// Local-information coefficients `φ` (augmented model).
    LocalCoefficientsZero,
    /// Arbitrary parameter indices.
    Indices(Vec<usize>),
}

pub const HYPOTHESIS_NAMES: [&str; 9] = [
    "world-price-constant",
    "domestic-price-zero:<asset>",
    "domestic-price-constant:<asset>",
    "all-domestic-zero",
    "s-zero",
    "z-zero",
    "country-constants-zero",
    "local-coefficients-zero",
    "indices:<i>,<j>,...",
];

fn unknown(name: &str) -> Error {
    Error::UnknownHypothesis {
        name: name.to_string(),
        valid: HYPOTHESIS_NAMES.iter().map(|s| s.to_string()).collect(),
    }
}

impl FromStr for Hypothesis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (head, arg) = match s.split_once(':') {
            Some((h, a)) => (h, Some(a.trim())),
            None => (s, None),
        };
        let asset = || match arg {
            Some(a) if !a.is_empty() => Ok(a.to_string()),
            _ => Err(unknown(s)),
        };
        Ok(match (head, arg) {
            ("world-price-constant", None) => Hypothesis::WorldPriceConstant,
            ("domestic-price-zero", _) => Hypothesis::DomesticPriceZero(asset()?),
            ("domestic-price-constant", _) => Hypothesis::DomesticPriceConstant(asset()?),
            ("all-domestic-zero", None) => Hypothesis::AllDomesticZero,
            ("s-zero", None) => Hypothesis::SZero,
            ("z-zero", None) => Hypothesis::ZZero,
            ("country-constants-zero", None) => Hypothesis::CountryConstantsZero,
            ("local-coefficients-zero", None) => Hypothesis::LocalCoefficientsZero,
            ("indices", Some(list)) => {
                let idx = list
                    .split(',')
                    .map(|x| x.trim().parse::<usize>())
                    .collect::<std::result::Result<Vec<_>, _>>()
                    .map_err(|_| unknown(s))?;
                if idx.is_empty() {
                    return Err(unknown(s));
                }
                Hypothesis::Indices(idx)
            }
            _ => return Err(unknown(s)),
        })
    }
}

impl fmt::Display for Hypothesis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Hypothesis::WorldPriceConstant => f.write_str("world-price-constant"),
            Hypothesis::DomesticPriceZero(a) => write!(f, "domestic-price-zero:{a}"),
            Hypothesis::DomesticPriceConstant(a) => write!(f, "domestic-price-constant:{a}"),
            Hypothesis::AllDomesticZero => f.write_str("all-domestic-zero"),
            Hypothesis::SZero => f.write_str("s-zero"),
            Hypothesis::ZZero => f.write_str("z-zero"),
            Hypothesis::CountryConstantsZero => f.write_str("country-constants-zero"),
            Hypothesis::LocalCoefficientsZero => f.write_str("local-coefficients-zero"),
            Hypothesis::Indices(idx) => {
                let list: Vec<String> = idx.iter().map(|i| i.to_string()).collect();
                write!(f, "indices:{}", list.join(","))
            }
        }
    }
}

impl TryFrom<String> for Hypothesis {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Hypothesis> for String {
    fn from(h: Hypothesis) -> String {
        h.to_string()
    }
}

impl Hypothesis {
    /// Readable description for reports.
    pub fn describe(&self) -> String {
        match self {
            Hypothesis::WorldPriceConstant => "price of world market risk is constant".into(),
            Hypothesis::DomesticPriceZero(a) => format!("price of {a} domestic risk is zero"),
            Hypothesis::DomesticPriceConstant(a) => format!("price of {a} domestic risk is constant"),
            Hypothesis::AllDomesticZero => "all domestic risk prices are zero".into(),
            Hypothesis::SZero => "negative-shock coefficients s are jointly zero".into(),
            Hypothesis::ZZero => "large-shock coefficients z are jointly zero".into(),
            Hypothesis::CountryConstantsZero => "country-specific constants are jointly zero".into(),
            Hypothesis::LocalCoefficientsZero => "local information coefficients are jointly zero".into(),
            Hypothesis::Indices(_) => "selected parameters are jointly zero".into(),
        }
    }

    /// Indices of θ restricted to zero. `local_assets` names the non-world
    /// assets in layout order.
    pub fn indices(&self, layout: &ParameterLayout, local_assets: &[String]) -> Result<Vec<usize>> {
        let asset_block = |name: &str| -> Result<std::ops::Range<usize>> {
            let pos = local_assets
                .iter()
                .position(|a| a == name)
                .ok_or_else(|| Error::Config(format!("`{name}` is not a non-world asset (have {local_assets:?})")))?;
            layout
                .kappa_local
                .get(pos)
                .cloned()
                .ok_or_else(|| Error::Shape("asset list longer than layout".into()))
        };
        let need = |block: &Option<std::ops::Range<usize>>, what: &str| {
            block
                .clone()
                .ok_or_else(|| Error::Config(format!("{self} needs the {what} variant")))
        };
        let idx: Vec<usize> = match self {
            Hypothesis::WorldPriceConstant => layout.kappa_world.clone().skip(1).collect(),
            Hypothesis::DomesticPriceZero(a) => asset_block(a)?.collect(),
            Hypothesis::DomesticPriceConstant(a) => asset_block(a)?.skip(1).collect(),
            Hypothesis::AllDomesticZero => layout.kappa_local.iter().flat_map(|r| r.clone()).collect(),
            Hypothesis::SZero => need(&layout.s, "asymmetric")?.collect(),
            Hypothesis::ZZero => need(&layout.z, "asymmetric")?.collect(),
            Hypothesis::CountryConstantsZero => need(&layout.alpha, "augmented")?.collect(),
            Hypothesis::LocalCoefficientsZero => {
                if !layout.variant.is_augmented() {
                    return Err(Error::Config(format!("{self} needs the augmented variant")));
                }
                layout.phi.iter().flat_map(|r| r.clone()).collect()
            }
            Hypothesis::Indices(v) => {
                if let Some(bad) = v.iter().find(|&&i| i >= layout.len()) {
                    return Err(Error::Config(format!("index {bad} out of range for {} parameters", layout.len())));
                }
                v.clone()
            }
        };
        if idx.is_empty() {
            return Err(Error::Config(format!("{self} restricts no parameters in this layout")));
        }
        Ok(idx)
    }
}
