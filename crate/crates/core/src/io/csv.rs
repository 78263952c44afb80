//! CSV schemas. Every file starts with `# ssep-csv v1 <kind>`.

use std::io::{BufRead, BufReader, Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::Record;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Schema {
    /// `u,rho`
    Profile,
    /// `t,value`
    Trace,
    /// `experiment,N,theta,gamma,replica,observable,value`
    Long,
}

impl Schema {
    pub fn name(&self) -> &'static str {
        match self {
            Schema::Profile => "profile",
            Schema::Trace => "trace",
            Schema::Long => "long",
        }
    }

    pub fn columns(&self) -> &'static [&'static str] {
        match self {
            Schema::Profile => &["u", "rho"],
            Schema::Trace => &["t", "value"],
            Schema::Long => &["experiment", "N", "theta", "gamma", "replica", "observable", "value"],
        }
    }

    fn header_comment(&self) -> String {
        format!("# ssep-csv v{SCHEMA_VERSION} {}", self.name())
    }

    fn parse_comment(line: &str) -> Result<Schema> {
        let bad = || Error::InvalidSpec(format!("missing or unsupported schema line {line:?}"));
        let rest = line.trim().strip_prefix("# ssep-csv v").ok_or_else(bad)?;
        let (version, kind) = rest.split_once(' ').ok_or_else(bad)?;
        if version.parse::<u32>().ok() != Some(SCHEMA_VERSION) {
            return Err(bad());
        }
        [Schema::Profile, Schema::Trace, Schema::Long].into_iter().find(|s| s.name() == kind.trim()).ok_or_else(bad)
    }
}

fn pair_writer<W: Write>(mut w: W, schema: Schema, rows: &[(f64, f64)]) -> Result<()> {
    writeln!(w, "{}", schema.header_comment())?;
    let mut out = ::csv::Writer::from_writer(w);
    out.write_record(schema.columns())?;
    for (a, b) in rows {
        out.write_record([a.to_string(), b.to_string()])?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_profile<W: Write>(w: W, rows: &[(f64, f64)]) -> Result<()> {
    pair_writer(w, Schema::Profile, rows)
}

pub fn write_trace<W: Write>(w: W, rows: &[(f64, f64)]) -> Result<()> {
    pair_writer(w, Schema::Trace, rows)
}

pub fn write_long<'a, W: Write>(mut w: W, records: impl IntoIterator<Item = &'a Record>) -> Result<()> {
    writeln!(w, "{}", Schema::Long.header_comment())?;
    let mut out = ::csv::Writer::from_writer(w);
    for r in records {
        out.serialize(r)?;
    }
    out.flush()?;
    Ok(())
}

/// A parsed CSV file of any schema.
#[derive(Debug, Clone, PartialEq)]
pub enum Table {
    Profile(Vec<(f64, f64)>),
    Trace(Vec<(f64, f64)>),
    Long(Vec<Record>),
}

impl Table {
    pub fn schema(&self) -> Schema {
        match self {
            Table::Profile(_) => Schema::Profile,
            Table::Trace(_) => Schema::Trace,
            Table::Long(_) => Schema::Long,
        }
    }
}

pub fn read_table<R: Read>(r: R) -> Result<Table> {
    let mut reader = BufReader::new(r);
    let mut first = String::new();
    reader.read_line(&mut first)?;
    let schema = Schema::parse_comment(&first)?;
    let mut csv = ::csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(reader);
    let headers = csv.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != schema.columns() {
        return Err(Error::InvalidSpec(format!("columns {headers:?} do not match the {} schema", schema.name())));
    }
    Ok(match schema {
        Schema::Long => Table::Long(csv.deserialize().collect::<std::result::Result<_, _>>()?),
        Schema::Profile | Schema::Trace => {
            let rows: Vec<(f64, f64)> = csv.deserialize().collect::<std::result::Result<_, _>>()?;
            if schema == Schema::Profile {
                Table::Profile(rows)
            } else {
                Table::Trace(rows)
            }
        }
    })
}
