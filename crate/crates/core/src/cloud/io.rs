use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::{GroundTruth, SemanticClass, SphericalPoint, StructuredCloud};
use crate::error::{Error, Result};

const MAGIC: &str = "SLCLOUD";
const VERSION: &str = "v1";

pub fn save_cloud(cloud: &StructuredCloud, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_cloud(cloud, &mut w).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn load_cloud(path: impl AsRef<Path>) -> Result<StructuredCloud> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_cloud(BufReader::new(file), path)
}

/// Writes the textual cloud format. Angles and ranges carry nine significant digits.
pub fn write_cloud<W: Write>(cloud: &StructuredCloud, w: &mut W) -> std::io::Result<()> {
    let gt = cloud.ground_truth();
    writeln!(
        w,
        "{MAGIC} {VERSION} rows={} cols={} has_gt={}",
        cloud.rows(),
        cloud.cols(),
        u8::from(gt.is_some())
    )?;
    for row in 0..cloud.rows() {
        for col in 0..cloud.cols() {
            let idx = cloud.index(row, col);
            let p = &cloud.points()[idx];
            write!(
                w,
                "{row} {col} {:.8e} {:.8e} {:.8e} {}",
                p.theta,
                p.phi,
                p.r,
                u8::from(p.valid)
            )?;
            if let Some(gt) = gt {
                write!(w, " {} {}", gt[idx].class.code(), gt[idx].instance)?;
            }
            writeln!(w)?;
        }
    }
    Ok(())
}

struct Header {
    rows: usize,
    cols: usize,
    has_gt: bool,
}

fn parse_header(line: &str, path: &Path, lineno: usize) -> Result<Header> {
    let mut tokens = line.split_whitespace();
    if tokens.next() != Some(MAGIC) {
        return Err(Error::parse(path, lineno, "missing SLCLOUD header"));
    }
    match tokens.next() {
        Some(VERSION) => {}
        Some(v) => {
            return Err(Error::parse(
                path,
                lineno,
                format!("unsupported version `{v}`"),
            ))
        }
        None => return Err(Error::parse(path, lineno, "missing version")),
    }
    let (mut rows, mut cols, mut has_gt) = (None, None, None);
    for tok in tokens {
        let (key, value) = tok
            .split_once('=')
            .ok_or_else(|| Error::parse(path, lineno, format!("malformed header field `{tok}`")))?;
        let value: usize = value
            .parse()
            .map_err(|_| Error::parse(path, lineno, format!("bad value in `{tok}`")))?;
        match key {
            "rows" => rows = Some(value),
            "cols" => cols = Some(value),
            "has_gt" if value <= 1 => has_gt = Some(value == 1),
            _ => {
                return Err(Error::parse(
                    path,
                    lineno,
                    format!("unexpected header field `{tok}`"),
                ))
            }
        }
    }
    match (rows, cols, has_gt) {
        (Some(rows), Some(cols), Some(has_gt)) => Ok(Header { rows, cols, has_gt }),
        _ => Err(Error::parse(
            path,
            lineno,
            "header needs rows=, cols= and has_gt=",
        )),
    }
}

fn field<T: std::str::FromStr>(
    tok: Option<&str>,
    name: &str,
    path: &Path,
    lineno: usize,
) -> Result<T> {
    let tok = tok.ok_or_else(|| Error::parse(path, lineno, format!("missing {name}")))?;
    tok.parse()
        .map_err(|_| Error::parse(path, lineno, format!("bad {name} `{tok}`")))
}

/// Reads the textual cloud format. `path` is only used for error messages.
pub fn read_cloud<R: BufRead>(reader: R, path: impl AsRef<Path>) -> Result<StructuredCloud> {
    let path = path.as_ref();
    let mut header = None;
    let mut points: Vec<SphericalPoint> = Vec::new();
    let mut gt = Vec::new();
    let mut last_line = 0;

    for (i, line) in reader.lines().enumerate() {
        let lineno = i + 1;
        last_line = lineno;
        let line = line.map_err(|e| Error::io(path, e))?;
        let content = line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some(h) = &header else {
            header = Some(parse_header(content, path, lineno)?);
            let h = header.as_ref().unwrap();
            points.reserve(h.rows * h.cols);
            continue;
        };
        let expected = points.len();
        if expected >= h.rows * h.cols {
            return Err(Error::parse(
                path,
                lineno,
                "more cells than declared by the header",
            ));
        }
        let mut tok = content.split_whitespace();
        let row: usize = field(tok.next(), "row", path, lineno)?;
        let col: usize = field(tok.next(), "col", path, lineno)?;
        if (row, col) != (expected / h.cols, expected % h.cols) {
            return Err(Error::parse(
                path,
                lineno,
                format!(
                    "expected cell ({}, {}), found ({row}, {col})",
                    expected / h.cols,
                    expected % h.cols
                ),
            ));
        }
        let theta: f64 = field(tok.next(), "theta", path, lineno)?;
        let phi: f64 = field(tok.next(), "phi", path, lineno)?;
        let r: f64 = field(tok.next(), "r", path, lineno)?;
        let valid: u8 = field(tok.next(), "valid flag", path, lineno)?;
        if valid > 1 {
            return Err(Error::parse(path, lineno, "valid flag must be 0 or 1"));
        }
        if row > 0 && phi != points[expected - h.cols].phi {
            return Err(Error::parse(path, lineno, "phi differs within a column"));
        }
        if col > 0 && theta != points[expected - 1].theta {
            return Err(Error::parse(path, lineno, "theta differs within a row"));
        }
        points.push(SphericalPoint {
            theta,
            phi,
            r,
            valid: valid == 1,
        });
        if h.has_gt {
            let code: u8 = field(tok.next(), "class", path, lineno)?;
            let class = SemanticClass::from_code(code).ok_or_else(|| {
                Error::parse(path, lineno, format!("class code {code} out of range 0-4"))
            })?;
            let instance: u32 = field(tok.next(), "instance", path, lineno)?;
            gt.push(GroundTruth { class, instance });
        }
        if tok.next().is_some() {
            return Err(Error::parse(path, lineno, "trailing fields"));
        }
    }

    let h = header.ok_or_else(|| Error::parse(path, last_line.max(1), "empty file"))?;
    if points.len() != h.rows * h.cols {
        return Err(Error::parse(
            path,
            last_line + 1,
            format!(
                "header declares {}x{} cells, file has {}",
                h.rows,
                h.cols,
                points.len()
            ),
        ));
    }
    let cloud = StructuredCloud::new(h.rows, h.cols, points)?;
    if h.has_gt {
        cloud.with_ground_truth(gt)
    } else {
        Ok(cloud)
    }
}
