use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use chrono::NaiveDate;
use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One bid. `winner` is always resolved: taken from the data when the column
/// exists, otherwise derived as the lowest bid of the tender.
#[derive(Debug, Clone, PartialEq)]
pub struct BidRecord {
    pub tender_id: String,
    pub company_id: String,
    pub location_id: Option<String>,
    pub site_id: Option<String>,
    pub bid_value: f64,
    pub winner: bool,
    /// Ordinal date (days since 1970-01-01 for calendar dates).
    pub date: Option<f64>,
    pub pte: Option<f64>,
    /// `true` for collusive bids.
    pub label: bool,
    /// Precomputed screens in the order CV, SPD, DIFFP, RD, KURT, SKEW, KSTEST.
    pub supplied_screens: Option<[f64; 7]>,
}

/// Maps logical fields to the column names of an input file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Schema {
    pub tender_id: String,
    pub company_id: String,
    pub bid_value: String,
    pub label: String,
    pub winner: Option<String>,
    pub location_id: Option<String>,
    pub site_id: Option<String>,
    pub date: Option<String>,
    pub pte: Option<String>,
    /// Column names of precomputed screens, CV through KSTEST, if the file has them.
    pub screens: Option<[String; 7]>,
    /// Single-byte field delimiter.
    pub delimiter: char,
}

impl Default for Schema {
    /// Column names written by [`write_bids`] and the synthetic generator.
    fn default() -> Self {
        Schema {
            tender_id: "tender_id".into(),
            company_id: "company_id".into(),
            bid_value: "bid_value".into(),
            label: "label".into(),
            winner: Some("winner".into()),
            location_id: Some("location_id".into()),
            site_id: Some("site_id".into()),
            date: Some("date".into()),
            pte: Some("pte".into()),
            screens: None,
            delimiter: ',',
        }
    }
}

/// Bids of one dataset in file order.
#[derive(Debug, Clone, PartialEq)]
pub struct BidTable {
    name: String,
    records: Vec<BidRecord>,
}

impl BidTable {
    /// Validates identifiers, bid values and that some tender has two bids.
    pub fn new(name: impl Into<String>, records: Vec<BidRecord>) -> Result<Self> {
        for (i, r) in records.iter().enumerate() {
            let row = i + 1;
            if r.tender_id.is_empty() || r.company_id.is_empty() {
                return Err(Error::Row {
                    row,
                    message: "empty tender or company identifier".into(),
                });
            }
            if !(r.bid_value.is_finite() && r.bid_value > 0.0) {
                return Err(Error::Row {
                    row,
                    message: format!("bid value {} must be positive", r.bid_value),
                });
            }
            if r.location_id.as_deref() == Some("") || r.site_id.as_deref() == Some("") {
                return Err(Error::Row {
                    row,
                    message: "empty location or site identifier".into(),
                });
            }
        }
        let table = BidTable {
            name: name.into(),
            records,
        };
        if !table.tenders().values().any(|rows| rows.len() >= 2) {
            return Err(Error::Data(format!(
                "dataset '{}' has no tender with at least two bids",
                table.name
            )));
        }
        Ok(table)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn records(&self) -> &[BidRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Row indices per tender, tenders in order of first appearance.
    pub fn tenders(&self) -> IndexMap<&str, Vec<usize>> {
        group(self.records.iter().map(|r| r.tender_id.as_str()))
    }

    /// Row indices per company, companies in order of first appearance.
    pub fn companies(&self) -> IndexMap<&str, Vec<usize>> {
        group(self.records.iter().map(|r| r.company_id.as_str()))
    }

    pub fn has_locations(&self) -> bool {
        !self.records.is_empty() && self.records.iter().all(|r| r.location_id.is_some())
    }

    pub fn has_sites(&self) -> bool {
        !self.records.is_empty() && self.records.iter().all(|r| r.site_id.is_some())
    }

    pub fn has_dates(&self) -> bool {
        !self.records.is_empty() && self.records.iter().all(|r| r.date.is_some())
    }

    pub fn labels(&self) -> Vec<bool> {
        self.records.iter().map(|r| r.label).collect()
    }
}

fn group<'a>(keys: impl Iterator<Item = &'a str>) -> IndexMap<&'a str, Vec<usize>> {
    let mut out: IndexMap<&str, Vec<usize>> = IndexMap::new();
    for (i, k) in keys.enumerate() {
        out.entry(k).or_default().push(i);
    }
    out
}

fn parse_number(raw: &str, row: usize, column: &str) -> Result<f64> {
    raw.trim().parse::<f64>().map_err(|_| Error::Row {
        row,
        message: format!("column '{column}': cannot parse '{raw}' as a number"),
    })
}

fn parse_flag(raw: &str, row: usize, column: &str) -> Result<bool> {
    match raw.trim().to_ascii_lowercase().as_str() {
        "1" | "1.0" | "true" | "yes" => Ok(true),
        "0" | "0.0" | "false" | "no" => Ok(false),
        _ => Err(Error::Row {
            row,
            message: format!("column '{column}': '{raw}' is not a binary value"),
        }),
    }
}

fn parse_date(raw: &str, row: usize, column: &str) -> Result<f64> {
    let raw = raw.trim();
    if let Ok(v) = raw.parse::<f64>() {
        return Ok(v);
    }
    let epoch = NaiveDate::from_ymd_opt(1970, 1, 1).expect("valid date");
    for fmt in ["%Y-%m-%d", "%Y/%m/%d", "%d.%m.%Y", "%m/%d/%Y"] {
        if let Ok(d) = NaiveDate::parse_from_str(raw, fmt) {
            return Ok((d - epoch).num_days() as f64);
        }
    }
    Err(Error::Row {
        row,
        message: format!("column '{column}': cannot parse date '{raw}'"),
    })
}

fn delimiter_byte(schema: &Schema) -> Result<u8> {
    u8::try_from(schema.delimiter)
        .ok()
        .filter(u8::is_ascii)
        .ok_or_else(|| Error::Config(format!("delimiter {:?} is not a single ASCII byte", schema.delimiter)))
}

/// Reads a delimited file with a header row.
pub fn load_bids(path: &Path, schema: &Schema) -> Result<BidTable> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    read_bids(file, &name, schema)
}

/// Reads delimited text from any reader; `name` becomes the dataset name.
pub fn read_bids<R: Read>(reader: R, name: &str, schema: &Schema) -> Result<BidTable> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(delimiter_byte(schema)?)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let position = |col: &str| headers.iter().position(|h| h == col);

    let mut missing = Vec::new();
    let mut required = |col: &str| {
        let p = position(col);
        if p.is_none() {
            missing.push(col.to_string());
        }
        p.unwrap_or(usize::MAX)
    };
    let tender = required(&schema.tender_id);
    let company = required(&schema.company_id);
    let value = required(&schema.bid_value);
    let label = required(&schema.label);
    let screen_cols: Option<Vec<usize>> = schema
        .screens
        .as_ref()
        .map(|cols| cols.iter().map(|c| required(c)).collect());
    if !missing.is_empty() {
        return Err(Error::Schema { missing });
    }
    // Optional columns that are mapped but absent simply disable the field.
    let optional = |col: &Option<String>| col.as_deref().and_then(position);
    let winner = optional(&schema.winner);
    let location = optional(&schema.location_id);
    let site = optional(&schema.site_id);
    let date = optional(&schema.date);
    let pte = optional(&schema.pte);

    let mut records = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = rec?;
        let field = |idx: usize| rec.get(idx).unwrap_or("");
        let opt_text = |idx: Option<usize>| idx.map(field).filter(|s| !s.is_empty()).map(str::to_string);
        let winner_flag = match winner {
            Some(w) => Some(parse_flag(field(w), row, "winner")?),
            None => None,
        };
        let date_val = match date.map(field).filter(|s| !s.is_empty()) {
            Some(raw) => Some(parse_date(raw, row, "date")?),
            None => None,
        };
        let pte_val = match pte.map(field).filter(|s| !s.is_empty()) {
            Some(raw) => Some(parse_number(raw, row, "pte")?),
            None => None,
        };
        let supplied = match &screen_cols {
            Some(cols) => {
                let mut s = [0.0; 7];
                for (k, &c) in cols.iter().enumerate() {
                    s[k] = parse_number(field(c), row, "screen")?;
                }
                Some(s)
            }
            None => None,
        };
        let bid_value = parse_number(field(value), row, &schema.bid_value)?;
        records.push((
            winner_flag,
            BidRecord {
                tender_id: field(tender).to_string(),
                company_id: field(company).to_string(),
                location_id: opt_text(location),
                site_id: opt_text(site),
                bid_value,
                winner: false,
                date: date_val,
                pte: pte_val,
                label: parse_flag(field(label), row, &schema.label)?,
                supplied_screens: supplied,
            },
        ));
    }

    let has_winner = winner.is_some();
    let mut records: Vec<BidRecord> = records
        .into_iter()
        .map(|(w, mut r)| {
            r.winner = w.unwrap_or(false);
            r
        })
        .collect();
    if !has_winner {
        derive_winners(&mut records);
    }
    BidTable::new(name, records)
}

/// Marks the lowest bid of each tender as the winner; ties go to the lowest row.
pub fn derive_winners(records: &mut [BidRecord]) {
    let mut best: IndexMap<String, usize> = IndexMap::new();
    for (i, r) in records.iter().enumerate() {
        match best.get(&r.tender_id) {
            Some(&j) if records[j].bid_value <= r.bid_value => {}
            _ => {
                best.insert(r.tender_id.clone(), i);
            }
        }
    }
    for r in records.iter_mut() {
        r.winner = false;
    }
    for (_, i) in best {
        records[i].winner = true;
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Writes a table with the column names of `schema`. Floating-point values use
/// the shortest representation that parses back to the same bits.
pub fn write_bids<W: Write>(table: &BidTable, schema: &Schema, writer: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .delimiter(delimiter_byte(schema)?)
        .from_writer(writer);
    let mut header = vec![
        schema.tender_id.clone(),
        schema.company_id.clone(),
        schema.bid_value.clone(),
        schema.label.clone(),
    ];
    let optional = [
        &schema.winner,
        &schema.location_id,
        &schema.site_id,
        &schema.date,
        &schema.pte,
    ];
    header.extend(optional.iter().filter_map(|c| c.as_ref().cloned()));
    w.write_record(&header)?;
    for r in table.records() {
        let mut row = vec![
            r.tender_id.clone(),
            r.company_id.clone(),
            r.bid_value.to_string(),
            u8::from(r.label).to_string(),
        ];
        if schema.winner.is_some() {
            row.push(u8::from(r.winner).to_string());
        }
        if schema.location_id.is_some() {
            row.push(r.location_id.clone().unwrap_or_default());
        }
        if schema.site_id.is_some() {
            row.push(r.site_id.clone().unwrap_or_default());
        }
        if schema.date.is_some() {
            row.push(fmt_opt(r.date));
        }
        if schema.pte.is_some() {
            row.push(fmt_opt(r.pte));
        }
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io("<bid table output>", e))?;
    Ok(())
}

/// Writes a table to `path` with the default schema.
pub fn save_bids(table: &BidTable, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_bids(table, &Schema::default(), std::io::BufWriter::new(file))
}
