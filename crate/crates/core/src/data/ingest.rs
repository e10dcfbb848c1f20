use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{check_consecutive, InstrumentSet, ReturnsPanel, YearMonth};
use crate::error::{Error, Result};

/// Input files for [`ingest_panel`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestConfig {
    pub returns: PathBuf,
    pub global: PathBuf,
    /// Local instrument file per non-world asset, keyed by asset name.
    /// Empty means constant-only local instruments.
    #[serde(default)]
    pub local: BTreeMap<String, PathBuf>,
    /// Column name of the world market in the returns file.
    pub world: String,
}

struct Table {
    path: PathBuf,
    columns: Vec<String>,
    dates: Vec<YearMonth>,
    rows: Vec<Vec<f64>>,
}

impl Table {
    fn read(path: &Path) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(|source| Error::Csv {
                path: path.to_path_buf(),
                source,
            })?;
        let headers = reader
            .headers()
            .map_err(|source| Error::Csv {
                path: path.to_path_buf(),
                source,
            })?
            .clone();
        let date_col = headers.iter().position(|h| h == "date").ok_or_else(|| Error::Parse {
            path: path.to_path_buf(),
            message: "no `date` column in header".into(),
        })?;
        let columns: Vec<String> = headers
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != date_col)
            .map(|(_, h)| h.to_string())
            .collect();
        let mut dates = Vec::new();
        let mut rows = Vec::new();
        for (row_idx, record) in reader.records().enumerate() {
            let row_no = row_idx + 1;
            let record = record.map_err(|source| Error::Csv {
                path: path.to_path_buf(),
                source,
            })?;
            let date: YearMonth = record
                .get(date_col)
                .unwrap_or("")
                .parse()
                .map_err(|_| Error::Parse {
                    path: path.to_path_buf(),
                    message: format!("data row {row_no}: date `{}` is not YYYY-MM", record.get(date_col).unwrap_or("")),
                })?;
            let mut values = Vec::with_capacity(columns.len());
            let mut col = 0;
            for (i, h) in headers.iter().enumerate() {
                if i == date_col {
                    continue;
                }
                let cell = record.get(i).unwrap_or("");
                let v = parse_cell(cell).ok_or_else(|| Error::MissingValue {
                    path: path.to_path_buf(),
                    row: row_no,
                    column: h.to_string(),
                })?;
                values.push(v);
                col += 1;
            }
            debug_assert_eq!(col, columns.len());
            dates.push(date);
            rows.push(values);
        }
        if dates.is_empty() {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                message: "no data rows".into(),
            });
        }
        Ok(Self {
            path: path.to_path_buf(),
            columns,
            dates,
            rows,
        })
    }

    fn row_for(&self, date: YearMonth) -> Option<&[f64]> {
        self.dates.binary_search(&date).ok().map(|i| self.rows[i].as_slice())
    }

    fn check_sorted(&self) -> Result<()> {
        check_consecutive(&self.dates, &self.path.display().to_string())
    }
}

fn parse_cell(cell: &str) -> Option<f64> {
    match cell {
        "" | "NA" | "na" | "NaN" | "nan" | "null" => None,
        s => s.parse::<f64>().ok().filter(|v| v.is_finite()),
    }
}

/// Reads returns and instruments, lags the instruments by one month,
/// prepends the constant, moves the world column last and aligns on the
/// common dates.
pub fn ingest_panel(config: &IngestConfig) -> Result<(ReturnsPanel, InstrumentSet)> {
    let returns = Table::read(&config.returns)?;
    returns.check_sorted()?;
    if returns.columns.len() < 2 {
        return Err(Error::Shape(format!(
            "{}: need at least 2 assets, found {}",
            config.returns.display(),
            returns.columns.len()
        )));
    }
    let world_col = returns
        .columns
        .iter()
        .position(|c| *c == config.world)
        .ok_or_else(|| Error::Config(format!("world column `{}` not in returns file", config.world)))?;
    let mut order: Vec<usize> = (0..returns.columns.len()).filter(|&i| i != world_col).collect();
    order.push(world_col);
    let asset_names: Vec<String> = order.iter().map(|&i| returns.columns[i].clone()).collect();
    let local_assets = &asset_names[..asset_names.len() - 1];

    let global = Table::read(&config.global)?;
    global.check_sorted()?;

    let locals: Vec<Table> = if config.local.is_empty() {
        Vec::new()
    } else {
        let known: BTreeSet<&String> = local_assets.iter().collect();
        if let Some(extra) = config.local.keys().find(|k| !known.contains(k)) {
            return Err(Error::Config(format!(
                "local instruments given for `{extra}`, which is not a non-world asset"
            )));
        }
        let mut tables = Vec::with_capacity(local_assets.len());
        for asset in local_assets {
            let path = config.local.get(asset).ok_or_else(|| {
                Error::Config(format!("no local instrument file for asset `{asset}`"))
            })?;
            let t = Table::read(path)?;
            t.check_sorted()?;
            tables.push(t);
        }
        let n_cols = tables[0].columns.len();
        if let Some(t) = tables.iter().find(|t| t.columns.len() != n_cols) {
            return Err(Error::Shape(format!(
                "{} has {} instruments, expected {n_cols}",
                t.path.display(),
                t.columns.len()
            )));
        }
        tables
    };

    // return month d uses instruments dated d-1
    let available = |d: YearMonth| {
        global.row_for(d.pred()).is_some() && locals.iter().all(|t| t.row_for(d.pred()).is_some())
    };
    let kept: Vec<YearMonth> = returns.dates.iter().copied().filter(|&d| available(d)).collect();
    let (Some(&first), Some(&last)) = (kept.first(), kept.last()) else {
        return Err(Error::Alignment {
            context: "no return month has lagged instruments".into(),
            months: Vec::new(),
        });
    };
    let missing: Vec<YearMonth> = returns
        .dates
        .iter()
        .copied()
        .filter(|&d| d >= first && d <= last && !available(d))
        .collect();
    if !missing.is_empty() {
        return Err(Error::Alignment {
            context: "lagged instruments missing inside the common range".into(),
            months: missing,
        });
    }

    let t = kept.len();
    let start = returns.dates.binary_search(&first).expect("kept date is in returns");
    let values = DMatrix::from_fn(t, order.len(), |r, c| returns.rows[start + r][order[c]]);

    let lagged = |table: &Table| {
        DMatrix::from_fn(t, table.columns.len() + 1, |r, c| {
            if c == 0 {
                1.0
            } else {
                table.row_for(kept[r].pred()).expect("checked above")[c - 1]
            }
        })
    };
    let global_m = lagged(&global);
    let local_m: Vec<DMatrix<f64>> = if locals.is_empty() {
        vec![DMatrix::from_element(t, 1, 1.0); local_assets.len()]
    } else {
        locals.iter().map(lagged).collect()
    };
    let mut global_names = vec!["const".to_string()];
    global_names.extend(global.columns.iter().cloned());
    let mut local_names = vec!["const".to_string()];
    if let Some(t0) = locals.first() {
        local_names.extend(t0.columns.iter().cloned());
    }

    let panel = ReturnsPanel::new(kept, values, asset_names.clone(), asset_names.len() - 1)?;
    let instruments = InstrumentSet::new(global_m, local_m)?.with_names(global_names, local_names)?;
    Ok((panel, instruments))
}

/// Paths produced by [`write_panel_csv`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WrittenFiles {
    pub returns: PathBuf,
    pub global: PathBuf,
    pub local: BTreeMap<String, PathBuf>,
}

impl WrittenFiles {
    pub fn ingest_config(&self, world: &str) -> IngestConfig {
        IngestConfig {
            returns: self.returns.clone(),
            global: self.global.clone(),
            local: self.local.clone(),
            world: world.to_string(),
        }
    }
}

fn fmt_value(v: f64) -> String {
    // shortest representation that round-trips
    format!("{v:?}")
}

/// Writes the panel in the format [`ingest_panel`] reads: instrument rows
/// are dated one month before the return they condition, and the constant
/// column is omitted.
pub fn write_panel_csv(panel: &ReturnsPanel, instruments: &InstrumentSet, dir: &Path) -> Result<WrittenFiles> {
    fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let io_err = |path: &Path| {
        let path = path.to_path_buf();
        move |source: csv::Error| Error::Csv { path, source }
    };
    let write_table = |path: &Path, header: Vec<String>, rows: Vec<Vec<String>>| -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(io_err(path))?;
        w.write_record(&header).map_err(io_err(path))?;
        for r in rows {
            w.write_record(&r).map_err(io_err(path))?;
        }
        w.flush().map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })
    };

    let returns_path = dir.join("returns.csv");
    let mut header = vec!["date".to_string()];
    header.extend(panel.asset_names().iter().cloned());
    let rows = (0..panel.periods())
        .map(|t| {
            let mut r = vec![panel.dates()[t].to_string()];
            r.extend(panel.values().row(t).iter().map(|&v| fmt_value(v)));
            r
        })
        .collect();
    write_table(&returns_path, header, rows)?;

    let lagged_rows = |m: &DMatrix<f64>| -> Vec<Vec<String>> {
        (0..m.nrows())
            .map(|t| {
                let mut r = vec![panel.dates()[t].pred().to_string()];
                r.extend(m.row(t).iter().skip(1).map(|&v| fmt_value(v)));
                r
            })
            .collect()
    };
    let global_path = dir.join("global.csv");
    let mut header = vec!["date".to_string()];
    header.extend(instruments.global_names().iter().skip(1).cloned());
    write_table(&global_path, header, lagged_rows(instruments.global()))?;

    let mut local = BTreeMap::new();
    if instruments.n_local() > 1 {
        for (m, &asset_col) in instruments.local().iter().zip(&panel.local_indices()) {
            let name = &panel.asset_names()[asset_col];
            let path = dir.join(format!("local_{name}.csv"));
            let mut header = vec!["date".to_string()];
            header.extend(instruments.local_names().iter().skip(1).cloned());
            write_table(&path, header, lagged_rows(m))?;
            local.insert(name.clone(), path);
        }
    }
    Ok(WrittenFiles {
        returns: returns_path,
        global: global_path,
        local,
    })
}
