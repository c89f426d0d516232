//! Uniformly sampled series, aligned panels, weight series and CSV ingestion.
//!
//! Timestamps are integer ticks of a base unit (sample index, day, or month)
//! counted from an epoch; calendar parsing happens only when reading CSV.

use std::path::Path;

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Shortest series accepted anywhere in the engine.
pub const MIN_LEN: usize = 8;

/// Base unit of the integer timestamps.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TimeUnit {
    /// Plain sample index.
    Index,
    /// Days since 1970-01-01.
    Day,
    /// Months since year 0 (`year * 12 + month - 1`).
    Month,
}

impl TimeUnit {
    /// Human-readable label for tick `t`.
    pub fn label(self, t: i64) -> String {
        match self {
            TimeUnit::Index => t.to_string(),
            TimeUnit::Month => format!("{:04}-{:02}", t.div_euclid(12), t.rem_euclid(12) + 1),
            TimeUnit::Day => match epoch().checked_add_signed(chrono::TimeDelta::days(t)) {
                Some(d) => d.format("%Y-%m-%d").to_string(),
                None => t.to_string(),
            },
        }
    }
}

fn epoch() -> NaiveDate {
    NaiveDate::from_ymd_opt(1970, 1, 1).expect("valid epoch")
}

/// A parsed CSV timestamp.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stamp {
    Index(i64),
    Date(NaiveDate),
    Month(i64),
}

/// Parses an integer index, `YYYY-MM-DD`, `YYYY-MM`, or `YYYYQn` / `YYYY-Qn`.
pub fn parse_stamp(raw: &str) -> Result<Stamp> {
    let s = raw.trim();
    if let Ok(i) = s.parse::<i64>() {
        return Ok(Stamp::Index(i));
    }
    if let Ok(d) = NaiveDate::parse_from_str(s, "%Y-%m-%d") {
        return Ok(Stamp::Date(d));
    }
    let bad = || Error::Data(format!("unparseable timestamp `{raw}`"));
    let upper = s.to_ascii_uppercase();
    if let Some((y, q)) = upper.split_once('Q') {
        let year: i64 = y.trim_end_matches('-').parse().map_err(|_| bad())?;
        let quarter: i64 = q.parse().map_err(|_| bad())?;
        if !(1..=4).contains(&quarter) {
            return Err(bad());
        }
        return Ok(Stamp::Month(year * 12 + (quarter - 1) * 3));
    }
    if let Some((y, m)) = s.split_once('-') {
        let year: i64 = y.parse().map_err(|_| bad())?;
        let month: i64 = m.parse().map_err(|_| bad())?;
        if !(1..=12).contains(&month) {
            return Err(bad());
        }
        return Ok(Stamp::Month(year * 12 + month - 1));
    }
    Err(bad())
}

/// Tick of `stamp` in `unit`, for locating a single timestamp on a grid.
pub fn stamp_tick(stamp: Stamp, unit: TimeUnit) -> Result<i64> {
    match (stamp, unit) {
        (Stamp::Index(i), TimeUnit::Index) => Ok(i),
        (Stamp::Date(d), TimeUnit::Day) => Ok(d.signed_duration_since(epoch()).num_days()),
        (Stamp::Date(d), TimeUnit::Month) => Ok(d.year() as i64 * 12 + d.month0() as i64),
        (Stamp::Month(m), TimeUnit::Month) => Ok(m),
        (s, u) => Err(Error::Alignment(format!("timestamp {s:?} does not fit a {u:?} grid"))),
    }
}

/// Converts a list of stamps to ticks of a single unit. Dates that all share
/// a day of month are treated as monthly data.
fn stamps_to_ticks(stamps: &[Stamp]) -> Result<(TimeUnit, Vec<i64>)> {
    let all_index = stamps.iter().all(|s| matches!(s, Stamp::Index(_)));
    if all_index {
        let ticks = stamps
            .iter()
            .map(|s| match s {
                Stamp::Index(i) => *i,
                _ => unreachable!(),
            })
            .collect();
        return Ok((TimeUnit::Index, ticks));
    }
    if stamps.iter().any(|s| matches!(s, Stamp::Index(_))) {
        return Err(Error::Data("mixed integer and calendar timestamps".into()));
    }
    let dates: Vec<NaiveDate> = stamps
        .iter()
        .filter_map(|s| match s {
            Stamp::Date(d) => Some(*d),
            _ => None,
        })
        .collect();
    let same_day = dates.windows(2).all(|w| w[0].day() == w[1].day());
    if dates.len() == stamps.len() && !same_day {
        let ticks = dates
            .iter()
            .map(|d| d.signed_duration_since(epoch()).num_days())
            .collect();
        return Ok((TimeUnit::Day, ticks));
    }
    if !dates.is_empty() && !same_day {
        return Err(Error::Data("mixed daily and monthly timestamps".into()));
    }
    let ticks = stamps
        .iter()
        .map(|s| match s {
            Stamp::Month(m) => *m,
            Stamp::Date(d) => d.year() as i64 * 12 + d.month0() as i64,
            Stamp::Index(_) => unreachable!(),
        })
        .collect();
    Ok((TimeUnit::Month, ticks))
}

/// A named, uniformly sampled real series.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeSeries {
    name: String,
    unit: TimeUnit,
    t0: i64,
    dt: i64,
    values: Vec<f64>,
}

impl TimeSeries {
    /// Series on the plain index grid `0, 1, 2, ...`.
    pub fn new(name: impl Into<String>, values: Vec<f64>) -> Result<Self> {
        Self::with_grid(name, TimeUnit::Index, 0, 1, values)
    }

    pub fn with_grid(
        name: impl Into<String>,
        unit: TimeUnit,
        t0: i64,
        dt: i64,
        values: Vec<f64>,
    ) -> Result<Self> {
        if dt <= 0 {
            return Err(Error::Sampling(format!("sampling interval {dt} is not positive")));
        }
        if values.len() < MIN_LEN {
            return Err(Error::TooShort {
                len: values.len(),
                min: MIN_LEN,
            });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Data(format!("non-finite value at position {i}")));
        }
        Ok(TimeSeries {
            name: name.into(),
            unit,
            t0,
            dt,
            values,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn unit(&self) -> TimeUnit {
        self.unit
    }

    /// Tick of the first observation.
    pub fn t0(&self) -> i64 {
        self.t0
    }

    /// Sampling interval in ticks.
    pub fn step(&self) -> i64 {
        self.dt
    }

    /// Sampling interval as a real number of time units.
    pub fn dt(&self) -> f64 {
        self.dt as f64
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn tick(&self, i: usize) -> i64 {
        self.t0 + i as i64 * self.dt
    }

    pub fn labels(&self) -> Vec<String> {
        (0..self.len()).map(|i| self.unit.label(self.tick(i))).collect()
    }

    pub fn renamed(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    /// Same grid and name, new values.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        Self::with_grid(self.name.clone(), self.unit, self.t0, self.dt, values)
    }

    fn grid_key(&self) -> (TimeUnit, i64, i64, usize) {
        (self.unit, self.t0, self.dt, self.values.len())
    }
}

/// Which columns of a CSV file make up a series.
#[derive(Clone, Debug, Default)]
pub struct ColumnSpec {
    /// Timestamp column name; the first column when `None`.
    pub time: Option<String>,
    /// Value column name.
    pub value: String,
}

struct Table {
    headers: Vec<String>,
    rows: Vec<Vec<String>>,
}

fn read_table(path: &Path) -> Result<Table> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let headers = reader.headers()?.iter().map(str::to_owned).collect::<Vec<_>>();
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record?;
        rows.push(record.iter().map(str::to_owned).collect());
    }
    Ok(Table { headers, rows })
}

fn column_index(table: &Table, name: &str) -> Result<usize> {
    table
        .headers
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| Error::Data(format!("no column named `{name}`")))
}

fn parse_value(raw: &str, row: usize, column: &str) -> Result<f64> {
    raw.trim()
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| Error::Data(format!("row {row}, column `{column}`: `{raw}` is not a number")))
}

/// Sorts rows by tick and checks uniform spacing. Returns the sort order.
fn uniform_grid(ticks: &[i64]) -> Result<(Vec<usize>, i64, i64)> {
    let mut order: Vec<usize> = (0..ticks.len()).collect();
    order.sort_by_key(|&i| ticks[i]);
    if order.len() < 2 {
        return Err(Error::TooShort {
            len: order.len(),
            min: MIN_LEN,
        });
    }
    let t0 = ticks[order[0]];
    let dt = ticks[order[1]] - t0;
    if dt == 0 {
        return Err(Error::Sampling(format!("duplicate timestamp at tick {t0}")));
    }
    for w in order.windows(2) {
        let step = ticks[w[1]] - ticks[w[0]];
        if step != dt {
            return Err(Error::Sampling(format!(
                "step {step} between ticks {} and {} differs from {dt}",
                ticks[w[0]], ticks[w[1]]
            )));
        }
    }
    Ok((order, t0, dt))
}

fn table_series(table: &Table, time_idx: usize, columns: &[usize]) -> Result<Vec<TimeSeries>> {
    let stamps = table
        .rows
        .iter()
        .map(|r| parse_stamp(r.get(time_idx).map_or("", String::as_str)))
        .collect::<Result<Vec<_>>>()?;
    let (unit, ticks) = stamps_to_ticks(&stamps)?;
    let (order, t0, dt) = uniform_grid(&ticks)?;
    columns
        .iter()
        .map(|&c| {
            let name = &table.headers[c];
            let values = order
                .iter()
                .map(|&r| parse_value(table.rows[r].get(c).map_or("", String::as_str), r + 2, name))
                .collect::<Result<Vec<_>>>()?;
            TimeSeries::with_grid(name.clone(), unit, t0, dt, values)
        })
        .collect()
}

/// Reads one series from a CSV file with a header row.
pub fn load_series_csv(path: impl AsRef<Path>, spec: &ColumnSpec) -> Result<TimeSeries> {
    let table = read_table(path.as_ref())?;
    let time_idx = match &spec.time {
        Some(t) => column_index(&table, t)?,
        None => 0,
    };
    let value_idx = column_index(&table, &spec.value)?;
    Ok(table_series(&table, time_idx, &[value_idx])?.remove(0))
}

/// Reads several value columns sharing one timestamp column. An empty
/// `columns` selects every non-timestamp column in file order.
pub fn load_columns_csv(
    path: impl AsRef<Path>,
    time: Option<&str>,
    columns: &[String],
) -> Result<Vec<TimeSeries>> {
    let table = read_table(path.as_ref())?;
    let time_idx = match time {
        Some(t) => column_index(&table, t)?,
        None => 0,
    };
    let indices = if columns.is_empty() {
        (0..table.headers.len()).filter(|&i| i != time_idx).collect()
    } else {
        columns
            .iter()
            .map(|c| column_index(&table, c))
            .collect::<Result<Vec<_>>>()?
    };
    if indices.is_empty() {
        return Err(Error::Data("no value columns".into()));
    }
    table_series(&table, time_idx, &indices)
}

/// Ordered collection of aligned series with unique names.
#[derive(Clone, Debug)]
pub struct Panel {
    series: Vec<TimeSeries>,
}

/// Builds a panel, checking that all members share one grid.
pub fn make_panel(series: Vec<TimeSeries>) -> Result<Panel> {
    if series.len() < 2 {
        return Err(Error::Config(format!(
            "a panel needs at least 2 series, got {}",
            series.len()
        )));
    }
    let key = series[0].grid_key();
    for s in &series[1..] {
        if s.grid_key() != key {
            return Err(Error::Alignment(format!(
                "`{}` (t0 {}, dt {}, n {}) does not match `{}` (t0 {}, dt {}, n {})",
                s.name,
                s.t0,
                s.dt,
                s.len(),
                series[0].name,
                key.1,
                key.2,
                key.3
            )));
        }
    }
    for (i, s) in series.iter().enumerate() {
        if series[..i].iter().any(|o| o.name == s.name) {
            return Err(Error::Name(s.name.clone()));
        }
    }
    Ok(Panel { series })
}

impl Panel {
    pub fn members(&self) -> &[TimeSeries] {
        &self.series
    }

    pub fn len(&self) -> usize {
        self.series.len()
    }

    pub fn is_empty(&self) -> bool {
        self.series.is_empty()
    }

    pub fn names(&self) -> Vec<String> {
        self.series.iter().map(|s| s.name.clone()).collect()
    }

    /// The shared grid, taken from the first member.
    pub fn first(&self) -> &TimeSeries {
        &self.series[0]
    }

    /// Number of observations per member.
    pub fn n(&self) -> usize {
        self.series[0].len()
    }

    /// Position of the timestamp `tick` on the panel grid.
    pub fn index_of(&self, tick: i64) -> Option<usize> {
        let s = &self.series[0];
        let off = tick - s.t0;
        (off >= 0 && off % s.dt == 0 && ((off / s.dt) as usize) < s.len()).then(|| (off / s.dt) as usize)
    }
}

/// Transformation applied before the wavelet analysis.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preprocess {
    #[default]
    None,
    LogDiff,
    Diff,
    Standardize,
}

impl std::str::FromStr for Preprocess {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Preprocess::None),
            "log-diff" | "log_diff" => Ok(Preprocess::LogDiff),
            "diff" => Ok(Preprocess::Diff),
            "standardize" => Ok(Preprocess::Standardize),
            other => Err(Error::Config(format!("unknown preprocessing mode `{other}`"))),
        }
    }
}

pub fn preprocess(x: &TimeSeries, mode: Preprocess) -> Result<TimeSeries> {
    let v = &x.values;
    match mode {
        Preprocess::None => Ok(x.clone()),
        Preprocess::Diff => shifted(x, v.windows(2).map(|w| w[1] - w[0]).collect()),
        Preprocess::LogDiff => {
            if let Some(i) = v.iter().position(|&a| a <= 0.0) {
                return Err(Error::Domain(format!(
                    "log-diff of `{}` needs positive values, found {} at position {i}",
                    x.name, v[i]
                )));
            }
            shifted(x, v.windows(2).map(|w| w[1].ln() - w[0].ln()).collect())
        }
        Preprocess::Standardize => {
            let n = v.len() as f64;
            let mean = v.iter().sum::<f64>() / n;
            let var = v.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / (n - 1.0);
            if var <= 0.0 {
                return Err(Error::Degenerate(format!("`{}` has zero variance", x.name)));
            }
            let sd = var.sqrt();
            x.with_values(v.iter().map(|a| (a - mean) / sd).collect())
        }
    }
}

fn shifted(x: &TimeSeries, values: Vec<f64>) -> Result<TimeSeries> {
    TimeSeries::with_grid(x.name.clone(), x.unit, x.t0 + x.dt, x.dt, values)
}

/// Strictly positive, lower-frequency weights for one panel member.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightSeries {
    name: String,
    unit: TimeUnit,
    observations: Vec<(i64, f64)>,
}

impl WeightSeries {
    pub fn new(name: impl Into<String>, unit: TimeUnit, observations: Vec<(i64, f64)>) -> Result<Self> {
        let name = name.into();
        if observations.is_empty() {
            return Err(Error::Data(format!("weights for `{name}` are empty")));
        }
        for w in observations.windows(2) {
            if w[1].0 <= w[0].0 {
                return Err(Error::Data(format!(
                    "weight timestamps for `{name}` must be strictly increasing"
                )));
            }
        }
        if let Some((t, v)) = observations.iter().find(|(_, v)| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::Domain(format!(
                "weight for `{name}` at {} is {v}, must be positive",
                unit.label(*t)
            )));
        }
        Ok(WeightSeries {
            name,
            unit,
            observations,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn unit(&self) -> TimeUnit {
        self.unit
    }

    pub fn observations(&self) -> &[(i64, f64)] {
        &self.observations
    }
}

fn weights_from_table(table: &Table, columns: &[(usize, String)]) -> Result<Vec<WeightSeries>> {
    let stamps = table
        .rows
        .iter()
        .map(|r| parse_stamp(r.first().map_or("", String::as_str)))
        .collect::<Result<Vec<_>>>()?;
    let (unit, ticks) = stamps_to_ticks(&stamps)?;
    columns
        .iter()
        .map(|(c, name)| {
            let obs = table
                .rows
                .iter()
                .zip(&ticks)
                .enumerate()
                .map(|(r, (row, &t))| {
                    let header = &table.headers[*c];
                    parse_value(row.get(*c).map_or("", String::as_str), r + 2, header).map(|v| (t, v))
                })
                .collect::<Result<Vec<_>>>()?;
            WeightSeries::new(name.clone(), unit, obs)
        })
        .collect()
}

/// Reads a two-column `timestamp,value` weight file for member `name`.
pub fn load_weights_csv(path: impl AsRef<Path>, name: &str) -> Result<WeightSeries> {
    let table = read_table(path.as_ref())?;
    if table.headers.len() != 2 {
        return Err(Error::Data(format!(
            "{}: expected columns timestamp,value",
            path.as_ref().display()
        )));
    }
    Ok(weights_from_table(&table, &[(1, name.to_owned())])?.remove(0))
}

/// Reads a wide weight file: a timestamp column followed by one column per
/// member, headed by the member name.
pub fn load_weights_wide(path: impl AsRef<Path>) -> Result<Vec<WeightSeries>> {
    let table = read_table(path.as_ref())?;
    let cols: Vec<(usize, String)> = (1..table.headers.len())
        .map(|i| (i, table.headers[i].clone()))
        .collect();
    weights_from_table(&table, &cols)
}

/// Last-observation-carried-forward resampling of `w` onto the panel grid.
pub fn resample_weights(w: &WeightSeries, target: &Panel) -> Result<Vec<f64>> {
    let grid = target.first();
    if w.unit != grid.unit {
        return Err(Error::Alignment(format!(
            "weights for `{}` use {:?} timestamps, panel uses {:?}",
            w.name, w.unit, grid.unit
        )));
    }
    let first = w.observations[0].0;
    if first > grid.t0 {
        return Err(Error::Coverage(format!(
            "first weight for `{}` is at {}, after panel start {}",
            w.name,
            w.unit.label(first),
            grid.unit.label(grid.t0)
        )));
    }
    let mut out = Vec::with_capacity(grid.len());
    let mut k = 0;
    for i in 0..grid.len() {
        let t = grid.tick(i);
        while k + 1 < w.observations.len() && w.observations[k + 1].0 <= t {
            k += 1;
        }
        out.push(w.observations[k].1);
    }
    Ok(out)
}
