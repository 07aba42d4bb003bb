use std::io::{BufRead, Write};

use super::{Dataset, DatasetError, Normalizer, Sample, FEATURE_NAMES};
use crate::netlist::format_value;

const DATASET_HEADER: &str = "x,y,i_d,w";
const NORMALIZER_HEADER: &str = "feature,min,max";

/// `x,y,i_d,w`, one sample per row, as stored (normalized or not).
pub fn write_dataset_csv<W: Write>(dataset: &Dataset, mut out: W) -> std::io::Result<()> {
    writeln!(out, "{DATASET_HEADER}")?;
    for s in &dataset.samples {
        writeln!(
            out,
            "{},{},{},{}",
            format_value(s.x),
            format_value(s.y),
            format_value(s.i_d),
            format_value(s.w)
        )?;
    }
    Ok(())
}

fn parse_field(s: &str, line: usize) -> Result<f64, DatasetError> {
    s.trim()
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| DatasetError::MalformedCsv {
            line,
            reason: format!("invalid number `{s}`"),
        })
}

fn check_header(first: Option<std::io::Result<String>>, expect: &str) -> Result<(), DatasetError> {
    match first {
        Some(h) => {
            let h = h?;
            if h.trim() != expect {
                return Err(DatasetError::MalformedCsv {
                    line: 1,
                    reason: format!("expected header `{expect}`, got `{}`", h.trim()),
                });
            }
            Ok(())
        }
        None => Err(DatasetError::MalformedCsv {
            line: 1,
            reason: "missing header".into(),
        }),
    }
}

pub fn read_dataset_csv<R: BufRead>(input: R, source_tag: &str) -> Result<Dataset, DatasetError> {
    let mut lines = input.lines();
    check_header(lines.next(), DATASET_HEADER)?;
    let mut samples = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(DatasetError::MalformedCsv {
                line: i + 2,
                reason: format!("expected 4 fields, got {}", fields.len()),
            });
        }
        let v: Vec<f64> = fields.iter().map(|f| parse_field(f, i + 2)).collect::<Result<_, _>>()?;
        samples.push(Sample {
            x: v[0],
            y: v[1],
            i_d: v[2],
            w: v[3],
        });
    }
    Ok(Dataset::new(samples, source_tag))
}

/// `feature,min,max` for `x, y, i_d, w`.
pub fn write_normalizer_csv<W: Write>(norm: &Normalizer, mut out: W) -> std::io::Result<()> {
    writeln!(out, "{NORMALIZER_HEADER}")?;
    for (k, name) in FEATURE_NAMES.iter().enumerate() {
        writeln!(out, "{name},{},{}", format_value(norm.min[k]), format_value(norm.max[k]))?;
    }
    Ok(())
}

pub fn read_normalizer_csv<R: BufRead>(input: R) -> Result<Normalizer, DatasetError> {
    let mut lines = input.lines();
    check_header(lines.next(), NORMALIZER_HEADER)?;
    let mut norm = Normalizer {
        min: [f64::NAN; 4],
        max: [f64::NAN; 4],
    };
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        let bad = |reason: String| DatasetError::MalformedCsv { line: i + 2, reason };
        if fields.len() != 3 {
            return Err(bad(format!("expected 3 fields, got {}", fields.len())));
        }
        let k = FEATURE_NAMES
            .iter()
            .position(|n| *n == fields[0].trim())
            .ok_or_else(|| bad(format!("unknown feature `{}`", fields[0])))?;
        norm.min[k] = parse_field(fields[1], i + 2)?;
        norm.max[k] = parse_field(fields[2], i + 2)?;
    }
    if let Some(k) = (0..4).find(|&k| norm.min[k].is_nan()) {
        return Err(DatasetError::MalformedCsv {
            line: 0,
            reason: format!("missing feature `{}`", FEATURE_NAMES[k]),
        });
    }
    Ok(norm)
}

#[cfg(test)]
mod tests {
    use super::super::normalize;
    use super::*;

    #[test]
    fn csv_round_trips() {
        let d = Dataset::new(
            vec![
                Sample { x: 0.0, y: 50.0, i_d: 0.01, w: 1.0 / 3.0 },
                Sample { x: 1e-7, y: 2.5e20, i_d: 0.0, w: 7.0 },
            ],
            "t",
        );
        let mut buf = Vec::new();
        write_dataset_csv(&d, &mut buf).unwrap();
        assert!(buf.starts_with(b"x,y,i_d,w\n"));
        assert_eq!(read_dataset_csv(&buf[..], "t").unwrap().samples, d.samples);

        let norm = normalize(&d).unwrap().normalizer.unwrap();
        let mut buf = Vec::new();
        write_normalizer_csv(&norm, &mut buf).unwrap();
        assert_eq!(read_normalizer_csv(&buf[..]).unwrap(), norm);
    }

    #[test]
    fn malformed_rows() {
        assert!(matches!(
            read_dataset_csv("x,y,i_d,w\n1,2,3\n".as_bytes(), "t"),
            Err(DatasetError::MalformedCsv { line: 2, .. })
        ));
        assert!(read_dataset_csv("a,b\n".as_bytes(), "t").is_err());
        assert!(read_normalizer_csv("feature,min,max\nx,0,1\n".as_bytes()).is_err());
    }
}
