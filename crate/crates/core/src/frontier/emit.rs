use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde_json::{Map, Value};

use super::sweep::{RegionPoint, SweepVar};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

impl FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(Error::InvalidParameter(format!(
                "unknown output format {other:?}"
            ))),
        }
    }
}

const LEADING: [&str; 2] = ["sweep_var", "r"];
const TRAILING: [&str; 10] = [
    "n",
    "sigma2",
    "delta",
    "R_bits_per_cu",
    "B_ach",
    "B_conv",
    "eps_ach",
    "eps_conv",
    "logM",
    "config_digest",
];

/// Column names for a scenario with `layers` layer frequencies.
pub fn columns(layers: usize) -> Vec<String> {
    LEADING
        .iter()
        .map(|s| s.to_string())
        .chain((1..=layers).map(|c| format!("p_{c}")))
        .chain(TRAILING.iter().map(|s| s.to_string()))
        .collect()
}

fn check_widths(points: &[RegionPoint], layers: usize) -> Result<()> {
    match points.iter().find(|p| p.p.len() != layers) {
        Some(p) => Err(Error::InvalidParameter(format!(
            "point with {} frequencies in a {layers}-layer table",
            p.p.len()
        ))),
        None => Ok(()),
    }
}

fn row(point: &RegionPoint) -> Vec<String> {
    let mut out = vec![point.sweep_var.as_str().to_string(), point.r.to_string()];
    out.extend(point.p.iter().map(f64::to_string));
    out.push(point.n.to_string());
    out.extend(
        [
            point.sigma2,
            point.delta,
            point.rate,
            point.b_ach,
            point.b_conv,
            point.eps_ach,
            point.eps_conv,
            point.log2_size,
        ]
        .iter()
        .map(f64::to_string),
    );
    out.push(point.config_digest.clone());
    out
}

fn number(x: f64) -> Result<Value> {
    serde_json::Number::from_f64(x)
        .map(Value::Number)
        .ok_or_else(|| Error::Numeric(format!("cannot write non-finite value {x} as JSON")))
}

fn json_row(point: &RegionPoint) -> Result<Value> {
    let mut map = Map::new();
    map.insert("sweep_var".into(), Value::from(point.sweep_var.as_str()));
    map.insert("r".into(), number(point.r)?);
    for (c, &p) in point.p.iter().enumerate() {
        map.insert(format!("p_{}", c + 1), number(p)?);
    }
    map.insert("n".into(), Value::from(point.n));
    let reals = [
        point.sigma2,
        point.delta,
        point.rate,
        point.b_ach,
        point.b_conv,
        point.eps_ach,
        point.eps_conv,
        point.log2_size,
    ];
    for (name, value) in TRAILING[1..9].iter().zip(reals) {
        map.insert(name.to_string(), number(value)?);
    }
    map.insert(
        "config_digest".into(),
        Value::from(point.config_digest.clone()),
    );
    Ok(Value::Object(map))
}

/// Writes one row per point in the given order.
pub fn write_points<W: Write>(
    points: &[RegionPoint],
    layers: usize,
    format: OutputFormat,
    writer: W,
) -> Result<()> {
    check_widths(points, layers)?;
    match format {
        OutputFormat::Csv => {
            let mut w = csv::Writer::from_writer(writer);
            w.write_record(columns(layers))?;
            for point in points {
                w.write_record(row(point))?;
            }
            w.flush()?;
        }
        OutputFormat::Json => {
            let rows = points.iter().map(json_row).collect::<Result<Vec<_>>>()?;
            let mut writer = writer;
            serde_json::to_writer_pretty(&mut writer, &Value::Array(rows))?;
            writeln!(writer)?;
        }
    }
    Ok(())
}

/// Writes the points to `path`.
pub fn emit(
    points: &[RegionPoint],
    layers: usize,
    format: OutputFormat,
    path: impl AsRef<Path>,
) -> Result<()> {
    let mut file = BufWriter::new(File::create(path)?);
    write_points(points, layers, format, &mut file)?;
    file.flush()?;
    Ok(())
}

fn parse_f64(field: &str, column: &str) -> Result<f64> {
    field
        .parse()
        .map_err(|_| Error::Config(format!("column {column}: {field:?} is not a number")))
}

fn parse_var(s: &str) -> Result<SweepVar> {
    match s {
        "radius" => Ok(SweepVar::Radius),
        "region" => Ok(SweepVar::Region),
        other => Err(Error::Config(format!("unknown sweep variable {other:?}"))),
    }
}

fn layers_in(header: &[String]) -> Result<usize> {
    let layers = header.iter().filter(|h| h.starts_with("p_")).count();
    if header != columns(layers).as_slice() {
        return Err(Error::Config(format!("unexpected columns {header:?}")));
    }
    Ok(layers)
}

fn from_fields(fields: &[String], layers: usize) -> Result<RegionPoint> {
    let names = columns(layers);
    let real = |i: usize| parse_f64(&fields[i], &names[i]);
    let base = 2 + layers;
    Ok(RegionPoint {
        sweep_var: parse_var(&fields[0])?,
        r: real(1)?,
        p: (2..base).map(real).collect::<Result<_>>()?,
        n: fields[base].parse().map_err(|_| {
            Error::Config(format!("column n: {:?} is not an integer", fields[base]))
        })?,
        sigma2: real(base + 1)?,
        delta: real(base + 2)?,
        rate: real(base + 3)?,
        b_ach: real(base + 4)?,
        b_conv: real(base + 5)?,
        eps_ach: real(base + 6)?,
        eps_conv: real(base + 7)?,
        log2_size: real(base + 8)?,
        config_digest: fields[base + 9].clone(),
    })
}

fn json_field(value: &Value) -> String {
    match value {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

/// Parses a table written by [`write_points`].
pub fn read_points<R: Read>(reader: R, format: OutputFormat) -> Result<Vec<RegionPoint>> {
    match format {
        OutputFormat::Csv => {
            let mut r = csv::Reader::from_reader(reader);
            let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
            let layers = layers_in(&header)?;
            r.records()
                .map(|rec| {
                    let fields: Vec<String> = rec?.iter().map(str::to_string).collect();
                    from_fields(&fields, layers)
                })
                .collect()
        }
        OutputFormat::Json => {
            let rows: Vec<Map<String, Value>> = serde_json::from_reader(reader)?;
            rows.iter()
                .map(|row| {
                    let header: Vec<String> = row.keys().cloned().collect();
                    let layers = layers_in(&header)?;
                    let fields: Vec<String> = row.values().map(json_field).collect();
                    from_fields(&fields, layers)
                })
                .collect()
        }
    }
}
