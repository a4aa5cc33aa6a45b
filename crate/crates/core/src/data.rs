//! Station time-series ingestion with explicit missing markers.
//!
//! The CSV schema is `station_id,lon,lat,timestamp,<var>...`, one row per
//! station and date. An empty cell or the literal `NA` marks a missing value;
//! nothing is imputed here. Lines starting with `#` are comments.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const FIXED_COLUMNS: [&str; 4] = ["station_id", "lon", "lat", "timestamp"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationRecord {
    pub station_id: String,
    /// Degrees east.
    pub lon: f64,
    /// Degrees north.
    pub lat: f64,
}

impl StationRecord {
    pub fn coords(&self) -> (f64, f64) {
        (self.lon, self.lat)
    }
}

/// One dated row of a station series; `values[i]` belongs to variable `i` of
/// the owning dataset, `None` is MISSING.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub date: NaiveDate,
    pub values: Vec<Option<f64>>,
}

/// Georeferenced station series. Stations are kept sorted by id and every
/// series sorted by date, so the layout does not depend on input row order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StationDataset {
    pub stations: Vec<StationRecord>,
    pub series: BTreeMap<String, Vec<Observation>>,
    pub variables: Vec<String>,
}

/// Options for [`parse_station_table`].
#[derive(Debug, Clone, Default)]
pub struct ParseOptions {
    /// Variables allowed to take negative values. Every other variable is
    /// treated as physically nonnegative and negative entries are rejected.
    pub signed_variables: HashSet<String>,
}

/// Parse station CSV text using default options (all variables nonnegative).
pub fn parse_station_table(text: &str) -> Result<StationDataset> {
    parse_station_table_with(text, &ParseOptions::default())
}

fn parse_cell(raw: &str) -> Option<&str> {
    let t = raw.trim();
    if t.is_empty() || t == "NA" {
        None
    } else {
        Some(t)
    }
}

pub fn parse_station_table_with(text: &str, opts: &ParseOptions) -> Result<StationDataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .comment(Some(b'#'))
        .flexible(true)
        .from_reader(text.as_bytes());
    let headers = reader.headers()?.clone();
    let names: Vec<String> = headers.iter().map(|h| h.trim().to_string()).collect();
    if names.len() < 5 {
        return Err(Error::Parse {
            line: 1,
            msg: "header needs station_id, lon, lat, timestamp and at least one variable".into(),
        });
    }
    for (i, want) in FIXED_COLUMNS.iter().enumerate() {
        if names[i] != *want {
            return Err(Error::Parse {
                line: 1,
                msg: format!("column {} must be `{want}`, found `{}`", i + 1, names[i]),
            });
        }
    }
    let variables: Vec<String> = names[4..].to_vec();
    if variables.iter().collect::<BTreeSet<_>>().len() != variables.len() {
        return Err(Error::Parse { line: 1, msg: "duplicate variable column".into() });
    }
    let nonneg: Vec<bool> = variables.iter().map(|v| !opts.signed_variables.contains(v)).collect();

    let mut coords: BTreeMap<String, (f64, f64)> = BTreeMap::new();
    let mut series: BTreeMap<String, BTreeMap<NaiveDate, Vec<Option<f64>>>> = BTreeMap::new();

    for rec in reader.records() {
        let rec = rec?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        if rec.len() != names.len() {
            return Err(Error::Parse {
                line,
                msg: format!("expected {} fields, found {}", names.len(), rec.len()),
            });
        }
        let station = rec[0].trim().to_string();
        if station.is_empty() {
            return Err(Error::Parse { line, msg: "empty station_id".into() });
        }
        let num = |idx: usize, what: &str| -> Result<f64> {
            rec[idx].trim().parse::<f64>().map_err(|_| Error::Parse {
                line,
                msg: format!("invalid {what} `{}`", &rec[idx]),
            })
        };
        let lon = num(1, "lon")?;
        let lat = num(2, "lat")?;
        if !(-180.0..=180.0).contains(&lon) || !(-90.0..=90.0).contains(&lat) {
            return Err(Error::Domain(format!(
                "line {line}: coordinates ({lon}, {lat}) out of range"
            )));
        }
        let date = NaiveDate::parse_from_str(rec[3].trim(), "%Y-%m-%d").map_err(|e| Error::Parse {
            line,
            msg: format!("invalid timestamp `{}`: {e}", &rec[3]),
        })?;
        let mut values = Vec::with_capacity(variables.len());
        for (j, var) in variables.iter().enumerate() {
            let v = match parse_cell(&rec[4 + j]) {
                None => None,
                Some(s) => {
                    let x: f64 = s.parse().map_err(|_| Error::Parse {
                        line,
                        msg: format!("invalid value `{s}` for `{var}`"),
                    })?;
                    if !x.is_finite() {
                        return Err(Error::Parse { line, msg: format!("non-finite value for `{var}`") });
                    }
                    if nonneg[j] && x < 0.0 {
                        return Err(Error::Domain(format!(
                            "line {line}: negative value {x} for nonnegative variable `{var}`"
                        )));
                    }
                    Some(x)
                }
            };
            values.push(v);
        }
        match coords.get(&station) {
            Some(&(lo, la)) if lo != lon || la != lat => {
                return Err(Error::Parse {
                    line,
                    msg: format!("station `{station}` has inconsistent coordinates"),
                });
            }
            _ => {
                coords.insert(station.clone(), (lon, lat));
            }
        }
        let entry = series.entry(station.clone()).or_default();
        if entry.insert(date, values).is_some() {
            return Err(Error::Duplicate { station, date: date.to_string() });
        }
    }

    let stations = coords
        .iter()
        .map(|(id, &(lon, lat))| StationRecord { station_id: id.clone(), lon, lat })
        .collect();
    let series = series
        .into_iter()
        .map(|(id, rows)| {
            let obs = rows.into_iter().map(|(date, values)| Observation { date, values }).collect();
            (id, obs)
        })
        .collect();
    Ok(StationDataset { stations, series, variables })
}

fn format_value(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl StationDataset {
    /// Serialize back into the ingestion CSV schema (missing cells left empty).
    pub fn to_csv(&self) -> String {
        let mut out = String::from("station_id,lon,lat,timestamp");
        for v in &self.variables {
            out.push(',');
            out.push_str(v);
        }
        out.push('\n');
        for st in &self.stations {
            for obs in self.series.get(&st.station_id).map(Vec::as_slice).unwrap_or(&[]) {
                out.push_str(&format!("{},{},{},{}", st.station_id, st.lon, st.lat, obs.date));
                for v in &obs.values {
                    out.push(',');
                    out.push_str(&format_value(*v));
                }
                out.push('\n');
            }
        }
        out
    }

    pub fn variable_index(&self, name: &str) -> Result<usize> {
        self.variables
            .iter()
            .position(|v| v == name)
            .ok_or_else(|| Error::Config(format!("unknown variable `{name}`")))
    }

    pub fn station(&self, id: &str) -> Option<&StationRecord> {
        self.stations.iter().find(|s| s.station_id == id)
    }

    /// All cells of one station and variable in date order.
    pub fn station_values(&self, station: &str, var: usize) -> Vec<Option<f64>> {
        self.series
            .get(station)
            .map(|obs| obs.iter().map(|o| o.values[var]).collect())
            .unwrap_or_default()
    }

    /// Every cell of a variable across stations (station order, then date).
    pub fn pooled_values(&self, var: usize) -> Vec<Option<f64>> {
        self.stations.iter().flat_map(|s| self.station_values(&s.station_id, var)).collect()
    }

    /// Mean of the non-missing values per station; `None` when a station has none.
    pub fn station_means(&self, var: usize) -> Vec<(StationRecord, Option<f64>)> {
        self.stations
            .iter()
            .map(|s| {
                let vals: Vec<f64> = self.station_values(&s.station_id, var).into_iter().flatten().collect();
                let mean = (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64);
                (s.clone(), mean)
            })
            .collect()
    }

    pub fn n_observations(&self) -> usize {
        self.series.values().map(Vec::len).sum()
    }

    /// Keep only the listed stations.
    pub fn subset(&self, keep: &BTreeSet<String>) -> StationDataset {
        StationDataset {
            stations: self.stations.iter().filter(|s| keep.contains(&s.station_id)).cloned().collect(),
            series: self
                .series
                .iter()
                .filter(|(k, _)| keep.contains(*k))
                .map(|(k, v)| (k.clone(), v.clone()))
                .collect(),
            variables: self.variables.clone(),
        }
    }

    /// Sorted list of distinct dates present in any series.
    pub fn dates(&self) -> Vec<NaiveDate> {
        let set: BTreeSet<NaiveDate> = self.series.values().flatten().map(|o| o.date).collect();
        set.into_iter().collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MissingnessReport {
    pub per_station: BTreeMap<String, f64>,
    pub missing: usize,
    pub cells: usize,
    pub global: f64,
}

/// Missing fractions per station and overall, counting one cell per
/// (observation row, variable).
pub fn missingness_report(ds: &StationDataset) -> MissingnessReport {
    let mut per_station = BTreeMap::new();
    let (mut missing, mut cells) = (0usize, 0usize);
    for st in &ds.stations {
        let rows = ds.series.get(&st.station_id).map(Vec::as_slice).unwrap_or(&[]);
        let n = rows.len() * ds.variables.len();
        let m: usize = rows.iter().map(|o| o.values.iter().filter(|v| v.is_none()).count()).sum();
        per_station.insert(st.station_id.clone(), if n == 0 { 0.0 } else { m as f64 / n as f64 });
        missing += m;
        cells += n;
    }
    let global = if cells == 0 { 0.0 } else { missing as f64 / cells as f64 };
    MissingnessReport { per_station, missing, cells, global }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Period {
    Daily,
    Monthly,
}

impl std::str::FromStr for Period {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "daily" | "day" => Ok(Period::Daily),
            "monthly" | "month" => Ok(Period::Monthly),
            other => Err(Error::Config(format!("unknown aggregation period `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AggregateStat {
    Mean,
}

impl std::str::FromStr for AggregateStat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mean" => Ok(AggregateStat::Mean),
            other => Err(Error::Config(format!("unknown aggregation statistic `{other}`"))),
        }
    }
}

fn period_key(date: NaiveDate, period: Period) -> NaiveDate {
    match period {
        Period::Daily => date,
        Period::Monthly => NaiveDate::from_ymd_opt(date.year(), date.month(), 1).expect("valid month start"),
    }
}

/// Aggregate every series to `period`. Only non-missing values enter each
/// statistic; a period whose cells are all missing stays missing. Monthly
/// rows are dated on the first of the month.
pub fn temporal_aggregate(ds: &StationDataset, period: Period, stat: AggregateStat) -> StationDataset {
    let nvar = ds.variables.len();
    let series = ds
        .series
        .iter()
        .map(|(id, rows)| {
            let mut groups: BTreeMap<NaiveDate, Vec<(f64, usize)>> = BTreeMap::new();
            for obs in rows {
                let acc = groups.entry(period_key(obs.date, period)).or_insert_with(|| vec![(0.0, 0); nvar]);
                for (slot, v) in acc.iter_mut().zip(&obs.values) {
                    if let Some(x) = v {
                        slot.0 += x;
                        slot.1 += 1;
                    }
                }
            }
            let out = groups
                .into_iter()
                .map(|(date, acc)| Observation {
                    date,
                    values: acc
                        .into_iter()
                        .map(|(sum, n)| match stat {
                            AggregateStat::Mean => (n > 0).then(|| sum / n as f64),
                        })
                        .collect(),
                })
                .collect();
            (id.clone(), out)
        })
        .collect();
    StationDataset { stations: ds.stations.clone(), series, variables: ds.variables.clone() }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SMALL: &str = "station_id,lon,lat,timestamp,pm25,wd\n\
        A,77.1,28.6,2021-11-01,120.5,45\n\
        A,77.1,28.6,2021-11-02,,90\n\
        A,77.1,28.6,2021-11-03,98.0,NA\n\
        B,77.3,28.7,2021-11-01,150,10\n\
        B,77.3,28.7,2021-11-02,160,20\n\
        B,77.3,28.7,2021-11-03,170,30\n";

    #[test]
    fn header_only_is_empty() {
        let ds = parse_station_table("station_id,lon,lat,timestamp,pm25\n").unwrap();
        assert!(ds.stations.is_empty());
        assert_eq!(ds.n_observations(), 0);
    }

    #[test]
    fn counts_one_blank_pm25_cell() {
        let text = "station_id,lon,lat,timestamp,pm25\n\
            A,77.1,28.6,2021-11-01,1\nA,77.1,28.6,2021-11-02,\nA,77.1,28.6,2021-11-03,3\n\
            B,77.2,28.5,2021-11-01,1\nB,77.2,28.5,2021-11-02,2\nB,77.2,28.5,2021-11-03,3\n";
        let ds = parse_station_table(text).unwrap();
        let rep = missingness_report(&ds);
        assert_eq!(rep.missing, 1);
        assert_eq!(rep.cells, 6);
    }

    #[test]
    fn na_literal_and_blank_are_missing() {
        let ds = parse_station_table(SMALL).unwrap();
        assert_eq!(ds.stations.len(), 2);
        assert_eq!(ds.station_values("A", 0), vec![Some(120.5), None, Some(98.0)]);
        assert_eq!(ds.station_values("A", 1), vec![Some(45.0), Some(90.0), None]);
    }

    #[test]
    fn malformed_row_reports_line() {
        let text = "station_id,lon,lat,timestamp,pm25\nA,77.1,28.6,2021-11-01,1\nA,abc,28.6,2021-11-02,2\n";
        match parse_station_table(text) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn duplicate_and_domain_errors() {
        let dup = "station_id,lon,lat,timestamp,pm25\nA,77.1,28.6,2021-11-01,1\nA,77.1,28.6,2021-11-01,2\n";
        assert!(matches!(parse_station_table(dup), Err(Error::Duplicate { .. })));
        let bad = "station_id,lon,lat,timestamp,pm25\nA,190,28.6,2021-11-01,1\n";
        assert!(matches!(parse_station_table(bad), Err(Error::Domain(_))));
        let neg = "station_id,lon,lat,timestamp,pm25\nA,77,28.6,2021-11-01,-1\n";
        assert!(matches!(parse_station_table(neg), Err(Error::Domain(_))));
        let mut opts = ParseOptions::default();
        opts.signed_variables.insert("pm25".into());
        assert!(parse_station_table_with(neg, &opts).is_ok());
    }

    #[test]
    fn bad_header_is_rejected() {
        assert!(parse_station_table("id,lon,lat,timestamp,pm25\n").is_err());
        assert!(parse_station_table("station_id,lon,lat,timestamp\n").is_err());
    }

    #[test]
    fn no_missing_gives_zero_fractions() {
        let text = "station_id,lon,lat,timestamp,pm25\nA,1,1,2021-01-01,1\nB,2,2,2021-01-01,2\n";
        let rep = missingness_report(&parse_station_table(text).unwrap());
        assert_eq!(rep.global, 0.0);
        assert!(rep.per_station.values().all(|&f| f == 0.0));
    }

    #[test]
    fn one_missing_in_ten_cells() {
        let mut text = String::from("station_id,lon,lat,timestamp,pm25\n");
        for d in 1..=10 {
            let v = if d == 4 { String::new() } else { d.to_string() };
            text.push_str(&format!("A,1,1,2021-01-{d:02},{v}\n"));
        }
        let rep = missingness_report(&parse_station_table(&text).unwrap());
        assert!((rep.global - 0.1).abs() < 1e-15);
    }

    #[test]
    fn monthly_mean_of_identical_values() {
        let mut text = String::from("station_id,lon,lat,timestamp,pm25\n");
        for d in 1..=30 {
            text.push_str(&format!("A,1,1,2021-11-{d:02},42.5\n"));
        }
        let ds = parse_station_table(&text).unwrap();
        let agg = temporal_aggregate(&ds, Period::Monthly, AggregateStat::Mean);
        assert_eq!(agg.series["A"].len(), 1);
        assert_eq!(agg.series["A"][0].values[0], Some(42.5));
        assert_eq!(agg.series["A"][0].date, NaiveDate::from_ymd_opt(2021, 11, 1).unwrap());
    }

    #[test]
    fn all_missing_month_stays_missing() {
        let text = "station_id,lon,lat,timestamp,pm25\nA,1,1,2021-11-01,\nA,1,1,2021-11-02,NA\nA,1,1,2021-12-01,5\n";
        let agg = temporal_aggregate(&parse_station_table(text).unwrap(), Period::Monthly, AggregateStat::Mean);
        assert_eq!(agg.series["A"][0].values[0], None);
        assert_eq!(agg.series["A"][1].values[0], Some(5.0));
    }

    #[test]
    fn monthly_mean_matches_summation() {
        let vals: Vec<f64> = (1..=30).map(|d| 10.0 + (d as f64 * 0.7).sin() * 3.3 + d as f64 / 7.0).collect();
        let mut text = String::from("station_id,lon,lat,timestamp,pm25\n");
        for (i, v) in vals.iter().enumerate() {
            text.push_str(&format!("A,1,1,2021-11-{:02},{v}\n", i + 1));
        }
        let agg = temporal_aggregate(&parse_station_table(&text).unwrap(), Period::Monthly, AggregateStat::Mean);
        let mut oracle = 0.0;
        for v in &vals {
            oracle += v;
        }
        oracle /= 30.0;
        let got = agg.series["A"][0].values[0].unwrap();
        assert!(((got - oracle) / oracle).abs() < 1e-12);
    }

    #[test]
    fn unknown_period_is_config_error() {
        assert!(matches!("weekly".parse::<Period>(), Err(Error::Config(_))));
        assert_eq!("Monthly".parse::<Period>().unwrap(), Period::Monthly);
    }
}
