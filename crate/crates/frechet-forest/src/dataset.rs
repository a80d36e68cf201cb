//! Paired predictor/response samples and their CSV form.
//!
//! The CSV layout is one column per flat coordinate. Header cells name the
//! owning variable, its space, and the coordinate index, e.g.
//! `x1[euclidean:1].0` or `y[sphere:3].2`. The loader validates every point
//! and reports offending data rows by number.

use crate::error::{Error, Result};
use crate::metric::{MetricPoint, SpaceDescriptor};
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Dataset {
    pub predictor_space: SpaceDescriptor,
    pub response_space: SpaceDescriptor,
    /// Row-major: `predictors[i][j]` is component `j` of observation `i`.
    pub predictors: Vec<Vec<MetricPoint>>,
    pub responses: Vec<MetricPoint>,
}

impl Dataset {
    pub fn new(
        predictor_space: SpaceDescriptor,
        response_space: SpaceDescriptor,
        predictors: Vec<Vec<MetricPoint>>,
        responses: Vec<MetricPoint>,
    ) -> Result<Self> {
        let ds = Dataset {
            predictor_space,
            response_space,
            predictors,
            responses,
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn n(&self) -> usize {
        self.responses.len()
    }

    /// Number of predictor components.
    pub fn p(&self) -> usize {
        self.predictor_space.components().len()
    }

    pub fn validate(&self) -> Result<()> {
        self.predictor_space.validate()?;
        self.response_space.validate()?;
        if self.predictors.len() != self.responses.len() {
            return Err(Error::InvalidParameter(
                "predictor and response counts differ".into(),
            ));
        }
        let comps = self.predictor_space.components();
        for (i, (x, y)) in self.predictors.iter().zip(&self.responses).enumerate() {
            if x.len() != comps.len() {
                return Err(Error::InvalidRow {
                    row: i + 1,
                    message: format!("expected {} predictor components, got {}", comps.len(), x.len()),
                });
            }
            for (xj, cj) in x.iter().zip(comps) {
                if &xj.descriptor != cj {
                    return Err(Error::InvalidRow {
                        row: i + 1,
                        message: format!(
                            "predictor component is `{}`, expected `{}`",
                            xj.descriptor, cj
                        ),
                    });
                }
                xj.validate().map_err(|e| Error::InvalidRow {
                    row: i + 1,
                    message: e.to_string(),
                })?;
            }
            if y.descriptor != self.response_space {
                return Err(Error::InvalidRow {
                    row: i + 1,
                    message: format!(
                        "response is `{}`, expected `{}`",
                        y.descriptor, self.response_space
                    ),
                });
            }
            y.validate().map_err(|e| Error::InvalidRow {
                row: i + 1,
                message: e.to_string(),
            })?;
        }
        Ok(())
    }

    /// Rows selected by index, with repetition allowed.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            predictor_space: self.predictor_space.clone(),
            response_space: self.response_space.clone(),
            predictors: indices.iter().map(|&i| self.predictors[i].clone()).collect(),
            responses: indices.iter().map(|&i| self.responses[i].clone()).collect(),
        }
    }

    pub fn write_csv(&self, out: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let comps = self.predictor_space.components().to_vec();
        let mut header = Vec::new();
        for (j, cj) in comps.iter().enumerate() {
            for k in 0..cj.flat_len() {
                header.push(format!("x{}[{}].{}", j + 1, cj, k));
            }
        }
        for k in 0..self.response_space.flat_len() {
            header.push(format!("y[{}].{}", self.response_space, k));
        }
        w.write_record(&header).map_err(csv_err)?;
        for (x, y) in self.predictors.iter().zip(&self.responses) {
            let mut row = Vec::new();
            for xj in x {
                for v in &xj.data {
                    row.push(format_value(*v));
                }
            }
            for v in &y.data {
                row.push(format_value(*v));
            }
            w.write_record(&row).map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv(input: impl Read) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .from_reader(input);
        let header = reader.headers().map_err(csv_err)?.clone();
        let mut predictor_comps: Vec<SpaceDescriptor> = Vec::new();
        let mut response_space: Option<SpaceDescriptor> = None;
        let mut layout: Vec<(bool, usize)> = Vec::new(); // (is_response, component index)
        for cell in header.iter() {
            let (name, desc_text, coord) = parse_header_cell(cell)?;
            let desc = SpaceDescriptor::parse(&desc_text)?;
            if name == "y" {
                if response_space.get_or_insert_with(|| desc.clone()) != &desc {
                    return Err(Error::Parse("inconsistent response descriptors".into()));
                }
                layout.push((true, coord));
            } else {
                let idx: usize = name
                    .strip_prefix('x')
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| Error::Parse(format!("bad column name `{cell}`")))?;
                if idx == 0 {
                    return Err(Error::Parse("predictor indices start at 1".into()));
                }
                if predictor_comps.len() < idx {
                    predictor_comps.resize(idx, desc.clone());
                }
                predictor_comps[idx - 1] = desc;
                layout.push((false, coord));
            }
        }
        let response_space =
            response_space.ok_or_else(|| Error::Parse("no response columns found".into()))?;
        let predictor_space = SpaceDescriptor::Product(predictor_comps.clone());
        predictor_space.validate()?;

        // Column offsets per component, assuming coordinates appear in order.
        let mut predictors = Vec::new();
        let mut responses = Vec::new();
        for (row_idx, record) in reader.records().enumerate() {
            let record = record.map_err(csv_err)?;
            let mut x_bufs: Vec<Vec<f64>> = predictor_comps
                .iter()
                .map(|c| Vec::with_capacity(c.flat_len()))
                .collect();
            let mut y_buf: Vec<f64> = Vec::with_capacity(response_space.flat_len());
            let mut comp_cursor = 0usize;
            let mut prev_was_response = false;
            for (cell, (is_response, _)) in record.iter().zip(&layout) {
                let value: f64 = cell.trim().parse().map_err(|_| Error::InvalidRow {
                    row: row_idx + 1,
                    message: format!("cannot parse `{cell}` as a number"),
                })?;
                if *is_response {
                    y_buf.push(value);
                    prev_was_response = true;
                } else {
                    if prev_was_response {
                        return Err(Error::Parse(
                            "predictor columns must precede response columns".into(),
                        ));
                    }
                    if x_bufs[comp_cursor].len() == predictor_comps[comp_cursor].flat_len() {
                        comp_cursor += 1;
                    }
                    x_bufs[comp_cursor].push(value);
                }
            }
            let mut x_points = Vec::with_capacity(x_bufs.len());
            for (buf, desc) in x_bufs.into_iter().zip(&predictor_comps) {
                let pt = MetricPoint::new(desc.clone(), buf).map_err(|e| Error::InvalidRow {
                    row: row_idx + 1,
                    message: e.to_string(),
                })?;
                x_points.push(pt);
            }
            let y = MetricPoint::new(response_space.clone(), y_buf).map_err(|e| {
                Error::InvalidRow {
                    row: row_idx + 1,
                    message: e.to_string(),
                }
            })?;
            predictors.push(x_points);
            responses.push(y);
        }
        Dataset::new(predictor_space, response_space, predictors, responses)
    }
}

/// Reads a query CSV containing only predictor columns (`x1[..].k`, ...).
/// Returns the predictor space and one component row per record.
pub fn read_query_csv(input: impl Read) -> Result<(SpaceDescriptor, Vec<Vec<MetricPoint>>)> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(input);
    let header = reader.headers().map_err(csv_err)?.clone();
    let mut comps: Vec<SpaceDescriptor> = Vec::new();
    for cell in header.iter() {
        let (name, desc_text, _) = parse_header_cell(cell)?;
        if name == "y" {
            return Err(Error::Parse(
                "query files carry predictor columns only".into(),
            ));
        }
        let idx: usize = name
            .strip_prefix('x')
            .and_then(|s| s.parse().ok())
            .filter(|i| *i >= 1)
            .ok_or_else(|| Error::Parse(format!("bad column name `{cell}`")))?;
        let desc = SpaceDescriptor::parse(&desc_text)?;
        if comps.len() < idx {
            comps.resize(idx, desc.clone());
        }
        comps[idx - 1] = desc;
    }
    if comps.is_empty() {
        return Err(Error::Parse("no predictor columns found".into()));
    }
    let space = SpaceDescriptor::Product(comps.clone());
    space.validate()?;
    let mut rows = Vec::new();
    for (row_idx, record) in reader.records().enumerate() {
        let record = record.map_err(csv_err)?;
        let mut bufs: Vec<Vec<f64>> = comps.iter().map(|c| Vec::with_capacity(c.flat_len())).collect();
        let mut cursor = 0usize;
        for cell in record.iter() {
            let value: f64 = cell.trim().parse().map_err(|_| Error::InvalidRow {
                row: row_idx + 1,
                message: format!("cannot parse `{cell}` as a number"),
            })?;
            if bufs[cursor].len() == comps[cursor].flat_len() {
                cursor += 1;
            }
            bufs[cursor].push(value);
        }
        let mut points = Vec::with_capacity(bufs.len());
        for (buf, desc) in bufs.into_iter().zip(&comps) {
            points.push(MetricPoint::new(desc.clone(), buf).map_err(|e| Error::InvalidRow {
                row: row_idx + 1,
                message: e.to_string(),
            })?);
        }
        rows.push(points);
    }
    Ok((space, rows))
}

/// Writes points, one per row, with the standard `y[desc].k` header.
pub fn write_points_csv(points: &[MetricPoint], out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    if points.is_empty() {
        return Ok(());
    }
    let desc = &points[0].descriptor;
    let header: Vec<String> = (0..desc.flat_len()).map(|k| format!("y[{desc}].{k}")).collect();
    w.write_record(&header).map_err(csv_err)?;
    for p in points {
        let row: Vec<String> = p.data.iter().map(|v| format_value(*v)).collect();
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn parse_header_cell(cell: &str) -> Result<(String, String, usize)> {
    let open = cell
        .find('[')
        .ok_or_else(|| Error::Parse(format!("bad column header `{cell}`")))?;
    let close = cell
        .rfind(']')
        .ok_or_else(|| Error::Parse(format!("bad column header `{cell}`")))?;
    let name = cell[..open].to_string();
    let desc = cell[open + 1..close].to_string();
    let coord = cell[close + 1..]
        .strip_prefix('.')
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::Parse(format!("bad coordinate suffix in `{cell}`")))?;
    Ok((name, desc, coord))
}

pub(crate) fn format_value(v: f64) -> String {
    // Shortest representation that round-trips, so CSV output is exact and
    // byte-stable.
    let mut buf = ryu_format(v);
    if buf.ends_with(".0") {
        buf.truncate(buf.len() - 2);
    }
    buf
}

fn ryu_format(v: f64) -> String {
    // serde_json uses ryu internally and emits round-trippable numbers.
    serde_json::to_string(&v).unwrap_or_else(|_| format!("{v}"))
}

fn csv_err(e: csv::Error) -> Error {
    Error::Parse(e.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::{RngFactory, Scenario, ScenarioSpec};

    #[test]
    fn csv_round_trip_sphere_scenario() {
        let sc = Scenario::new(ScenarioSpec::SphereGreatCircle { kappa: 50.0 }).unwrap();
        let ds = sc.generate(25, &mut RngFactory::new(1).stream(0)).unwrap();
        let mut buf = Vec::new();
        ds.write_csv(&mut buf).unwrap();
        let back = Dataset::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back.n(), 25);
        assert_eq!(back.response_space, ds.response_space);
        for (a, b) in back.responses.iter().zip(&ds.responses) {
            assert_eq!(a.data, b.data);
        }
    }

    #[test]
    fn loader_reports_offending_row() {
        let csv_text = "x1[euclidean:1].0,y[sphere:3].0,y[sphere:3].1,y[sphere:3].2\n\
                        0.5,1,0,0\n\
                        0.1,0.5,0.5,0\n";
        let err = Dataset::read_csv(csv_text.as_bytes()).unwrap_err();
        match err {
            Error::InvalidRow { row, .. } => assert_eq!(row, 2),
            other => panic!("unexpected error {other}"),
        }
    }
}
