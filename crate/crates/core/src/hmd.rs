//! Human Mortality Database 1x1 tables and the age-by-year surface built
//! from them.
//!
//! The HMD period 1x1 layout is a few free-text header lines followed by a
//! column header `Year Age Female Male Total` and whitespace-separated data
//! rows. `110+` marks the open age class and `.` marks a missing value.

use std::collections::{BTreeMap, HashMap};
use std::io::{Read, Write};
use std::str::FromStr;

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Cell, Error, Result};

/// Age code used for the open class `110+`.
pub const OPEN_AGE: i32 = 110;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TableKind {
    Deaths,
    Exposures,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sex {
    Female,
    Male,
    Total,
}

impl FromStr for Sex {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "female" | "f" => Ok(Sex::Female),
            "male" | "m" => Ok(Sex::Male),
            "total" | "t" => Ok(Sex::Total),
            other => Err(Error::Config(format!("unknown sex `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HmdRow {
    pub year: i32,
    pub age: i32,
    pub female: Option<f64>,
    pub male: Option<f64>,
    pub total: Option<f64>,
}

impl HmdRow {
    pub fn value(&self, sex: Sex) -> Option<f64> {
        match sex {
            Sex::Female => self.female,
            Sex::Male => self.male,
            Sex::Total => self.total,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawHmdTable {
    pub kind: TableKind,
    pub rows: Vec<HmdRow>,
}

impl RawHmdTable {
    fn index(&self) -> HashMap<(i32, i32), &HmdRow> {
        self.rows.iter().map(|r| ((r.year, r.age), r)).collect()
    }
}

fn parse_age(token: &str, line: usize) -> Result<i32> {
    let digits = token.strip_suffix('+').unwrap_or(token);
    let age: i32 = digits.parse().map_err(|_| Error::Parse {
        line,
        message: format!("unparseable age `{token}`"),
    })?;
    if !(0..=OPEN_AGE).contains(&age) || (token.ends_with('+') && age != OPEN_AGE) {
        return Err(Error::Parse {
            line,
            message: format!("age `{token}` outside 0..110+"),
        });
    }
    Ok(age)
}

fn parse_value(token: &str, line: usize, column: &str) -> Result<Option<f64>> {
    if token == "." {
        return Ok(None);
    }
    let v: f64 = token.parse().map_err(|_| Error::Parse {
        line,
        message: format!("unparseable {column} value `{token}`"),
    })?;
    if !v.is_finite() || v < 0.0 {
        return Err(Error::Parse {
            line,
            message: format!("{column} value `{token}` must be a nonnegative number"),
        });
    }
    Ok(Some(v))
}

/// Parses an HMD 1x1 Deaths or Exposures table.
///
/// Everything up to and including the `Year Age ...` column header is
/// skipped. Blank lines are ignored; line numbers in errors are 1-based.
pub fn parse_hmd_table<R: Read>(mut reader: R, kind: TableKind) -> Result<RawHmdTable> {
    let mut text = String::new();
    reader.read_to_string(&mut text)?;

    let mut lines = text.lines().enumerate();
    let mut found_header = false;
    for (_, l) in lines.by_ref() {
        let mut tokens = l.split_whitespace();
        if tokens.next() == Some("Year") && tokens.next() == Some("Age") {
            found_header = true;
            break;
        }
    }
    if !found_header {
        return Err(Error::Parse {
            line: 1,
            message: "no `Year Age Female Male Total` column header found".into(),
        });
    }

    let mut rows = Vec::new();
    let mut seen: HashMap<(i32, i32), usize> = HashMap::new();
    for (idx, l) in lines {
        let line = idx + 1;
        let tokens: Vec<&str> = l.split_whitespace().collect();
        if tokens.is_empty() {
            continue;
        }
        if tokens.len() != 5 {
            return Err(Error::Parse {
                line,
                message: format!("expected 5 columns, found {}", tokens.len()),
            });
        }
        let year: i32 = tokens[0].parse().map_err(|_| Error::Parse {
            line,
            message: format!("unparseable year `{}`", tokens[0]),
        })?;
        let age = parse_age(tokens[1], line)?;
        if seen.insert((year, age), line).is_some() {
            return Err(Error::Duplicate { year, age, line });
        }
        rows.push(HmdRow {
            year,
            age,
            female: parse_value(tokens[2], line, "Female")?,
            male: parse_value(tokens[3], line, "Male")?,
            total: parse_value(tokens[4], line, "Total")?,
        });
    }

    let mut ages_by_year: BTreeMap<i32, Vec<i32>> = BTreeMap::new();
    for r in &rows {
        ages_by_year.entry(r.year).or_default().push(r.age);
    }
    for (year, mut ages) in ages_by_year {
        ages.sort_unstable();
        if ages.windows(2).any(|w| w[1] != w[0] + 1) {
            return Err(Error::NonContiguousAges { year });
        }
    }

    Ok(RawHmdTable { kind, rows })
}

/// Inclusive integer range, as given on the command line (`LO:HI`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct InclusiveRange {
    pub lo: i32,
    pub hi: i32,
}

impl InclusiveRange {
    pub fn new(lo: i32, hi: i32) -> Result<Self> {
        if lo > hi {
            return Err(Error::InvalidRange { lo, hi });
        }
        Ok(Self { lo, hi })
    }

    pub fn len(&self) -> usize {
        (self.hi - self.lo + 1) as usize
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn values(&self) -> impl Iterator<Item = i32> {
        self.lo..=self.hi
    }
}

impl FromStr for InclusiveRange {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (lo, hi) = s
            .split_once(':')
            .ok_or_else(|| Error::Config(format!("range `{s}` must look like LO:HI")))?;
        let parse = |v: &str| {
            v.trim()
                .parse::<i32>()
                .map_err(|_| Error::Config(format!("range `{s}` must look like LO:HI")))
        };
        Self::new(parse(lo)?, parse(hi)?)
    }
}

/// Observed deaths and exposures on a complete, contiguous age-by-year grid.
///
/// Rows are ages, columns are years.
#[derive(Debug, Clone, PartialEq)]
pub struct MortalitySurface {
    ages: Vec<i32>,
    years: Vec<i32>,
    deaths: Array2<f64>,
    exposures: Array2<f64>,
}

impl MortalitySurface {
    pub fn new(
        first_age: i32,
        first_year: i32,
        deaths: Array2<f64>,
        exposures: Array2<f64>,
    ) -> Result<Self> {
        if deaths.dim() != exposures.dim() {
            return Err(Error::Dimension(format!(
                "deaths {:?} vs exposures {:?}",
                deaths.dim(),
                exposures.dim()
            )));
        }
        let (n_ages, n_years) = deaths.dim();
        if n_ages == 0 || n_years == 0 {
            return Err(Error::InvalidSurface("empty grid".into()));
        }
        let ages: Vec<i32> = (0..n_ages as i32).map(|i| first_age + i).collect();
        let years: Vec<i32> = (0..n_years as i32).map(|j| first_year + j).collect();

        let mut zero = Vec::new();
        for (((i, j), &d), &e) in deaths.indexed_iter().zip(exposures.iter()) {
            if !d.is_finite() || d < 0.0 {
                return Err(Error::InvalidSurface(format!(
                    "deaths must be finite and nonnegative at {}",
                    Cell {
                        age: ages[i],
                        year: years[j]
                    }
                )));
            }
            if !e.is_finite() || e < 0.0 {
                return Err(Error::InvalidSurface(format!(
                    "exposure must be finite and positive at {}",
                    Cell {
                        age: ages[i],
                        year: years[j]
                    }
                )));
            }
            if e == 0.0 {
                zero.push(Cell {
                    age: ages[i],
                    year: years[j],
                });
            }
        }
        if !zero.is_empty() {
            return Err(Error::ZeroExposure { cells: zero });
        }
        Ok(Self {
            ages,
            years,
            deaths,
            exposures,
        })
    }

    pub fn ages(&self) -> &[i32] {
        &self.ages
    }

    pub fn years(&self) -> &[i32] {
        &self.years
    }

    pub fn n_ages(&self) -> usize {
        self.ages.len()
    }

    pub fn n_years(&self) -> usize {
        self.years.len()
    }

    pub fn deaths(&self) -> &Array2<f64> {
        &self.deaths
    }

    pub fn exposures(&self) -> &Array2<f64> {
        &self.exposures
    }

    pub fn year_index(&self, year: i32) -> Option<usize> {
        let first = self.years[0];
        (year >= first && year <= *self.years.last().unwrap()).then(|| (year - first) as usize)
    }

    pub fn age_index(&self, age: i32) -> Option<usize> {
        let first = self.ages[0];
        (age >= first && age <= *self.ages.last().unwrap()).then(|| (age - first) as usize)
    }

    /// Content hash over the axes and the exact bit patterns of both matrices.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        for a in &self.ages {
            h.update(a.to_le_bytes());
        }
        h.update(b"|");
        for y in &self.years {
            h.update(y.to_le_bytes());
        }
        h.update(b"|");
        for v in self.deaths.iter().chain(self.exposures.iter()) {
            h.update(v.to_bits().to_le_bytes());
        }
        hex::encode(h.finalize())
    }

    /// Writes the surface as `age,year,deaths,exposure` rows, ages outermost.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["age", "year", "deaths", "exposure"])?;
        for (i, &age) in self.ages.iter().enumerate() {
            for (j, &year) in self.years.iter().enumerate() {
                w.serialize((age, year, self.deaths[[i, j]], self.exposures[[i, j]]))?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        #[derive(Deserialize)]
        struct Row {
            age: i32,
            year: i32,
            deaths: f64,
            exposure: f64,
        }
        let mut r = csv::Reader::from_reader(reader);
        let mut cells = BTreeMap::new();
        for (n, rec) in r.deserialize::<Row>().enumerate() {
            let row = rec?;
            if cells
                .insert((row.age, row.year), (row.deaths, row.exposure))
                .is_some()
            {
                return Err(Error::Duplicate {
                    year: row.year,
                    age: row.age,
                    line: n + 2,
                });
            }
        }
        let (&(first_age, _), _) = cells
            .first_key_value()
            .ok_or_else(|| Error::InvalidSurface("surface CSV has no rows".into()))?;
        let (&(last_age, _), _) = cells.last_key_value().unwrap();
        let first_year = cells.keys().map(|k| k.1).min().unwrap();
        let last_year = cells.keys().map(|k| k.1).max().unwrap();
        let shape = (
            (last_age - first_age + 1) as usize,
            (last_year - first_year + 1) as usize,
        );
        let mut deaths = Array2::zeros(shape);
        let mut exposures = Array2::zeros(shape);
        let mut missing = Vec::new();
        for age in first_age..=last_age {
            for year in first_year..=last_year {
                let ix = [(age - first_age) as usize, (year - first_year) as usize];
                match cells.get(&(age, year)) {
                    Some(&(d, e)) => {
                        deaths[ix] = d;
                        exposures[ix] = e;
                    }
                    None => missing.push(Cell { age, year }),
                }
            }
        }
        if !missing.is_empty() {
            return Err(Error::Coverage { cells: missing });
        }
        Self::new(first_age, first_year, deaths, exposures)
    }
}

/// Cuts the requested inclusive rectangle for one sex out of a deaths and an
/// exposures table.
pub fn build_surface(
    deaths: &RawHmdTable,
    exposures: &RawHmdTable,
    sex: Sex,
    age_range: InclusiveRange,
    year_range: InclusiveRange,
) -> Result<MortalitySurface> {
    if deaths.kind != TableKind::Deaths || exposures.kind != TableKind::Exposures {
        return Err(Error::Config(
            "build_surface expects a deaths table and an exposures table".into(),
        ));
    }
    let d_idx = deaths.index();
    let e_idx = exposures.index();
    let shape = (age_range.len(), year_range.len());
    let mut d_mat = Array2::zeros(shape);
    let mut e_mat = Array2::zeros(shape);
    let mut missing = Vec::new();
    let mut zero = Vec::new();

    for (i, age) in age_range.values().enumerate() {
        for (j, year) in year_range.values().enumerate() {
            let d = d_idx.get(&(year, age)).and_then(|r| r.value(sex));
            let e = e_idx.get(&(year, age)).and_then(|r| r.value(sex));
            match (d, e) {
                (Some(d), Some(e)) => {
                    if e == 0.0 {
                        zero.push(Cell { age, year });
                    }
                    d_mat[[i, j]] = d;
                    e_mat[[i, j]] = e;
                }
                _ => missing.push(Cell { age, year }),
            }
        }
    }
    if !missing.is_empty() {
        return Err(Error::Coverage { cells: missing });
    }
    if !zero.is_empty() {
        return Err(Error::ZeroExposure { cells: zero });
    }
    MortalitySurface::new(age_range.lo, year_range.lo, d_mat, e_mat)
}

/// Central death rates `D / E`, elementwise.
pub fn central_death_rate(surface: &MortalitySurface) -> Array2<f64> {
    surface.deaths() / surface.exposures()
}
