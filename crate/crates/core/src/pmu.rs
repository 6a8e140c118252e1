//! Synchronised measurement frames at the area roots and their CSV form.

use std::fmt::Write as _;
use std::io::{BufRead, Write};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::BusId;
use crate::sim::SimulationResult;

pub const CSV_HEADER: &str = "t_s,area_id,node_id,v_mag_pu,v_ang_rad,i_mag_pu,i_ang_rad";

/// One measurement: root voltage and the current into one area.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MuPmuFrame {
    pub t: f64,
    pub area: String,
    pub node: BusId,
    pub v: Complex64,
    pub i: Complex64,
}

/// Frames of one area channel in time order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AreaStream {
    pub area: String,
    pub node: BusId,
    pub t: Vec<f64>,
    pub v: Vec<Complex64>,
    pub i: Vec<Complex64>,
}

impl AreaStream {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }
}

/// Decimates a simulation record to `rate_hz`, one frame per area per
/// reporting instant.
pub fn emit_mupmu_stream(result: &SimulationResult, rate_hz: f64) -> Result<Vec<MuPmuFrame>> {
    if result.times.len() < 2 {
        return Ok(Vec::new());
    }
    let recorded = result.times[1] - result.times[0];
    let ratio = 1.0 / (recorded * rate_hz);
    let stride = ratio.round();
    if !(stride >= 1.0) || (ratio - stride).abs() > 1e-6 {
        return Err(Error::invalid(format!(
            "reporting rate {rate_hz} Hz does not divide the recorded rate {} Hz",
            1.0 / recorded
        )));
    }
    let stride = stride as usize;
    let mut frames = Vec::with_capacity(result.times.len() / stride * result.areas.len());
    for k in (0..result.times.len()).step_by(stride) {
        for a in &result.areas {
            frames.push(MuPmuFrame {
                t: result.times[k],
                area: a.id.clone(),
                node: a.root,
                v: a.v[k],
                i: a.i[k],
            });
        }
    }
    Ok(frames)
}

/// Frames restricted to the given areas. Unknown ids are rejected.
pub fn select_areas(frames: &[MuPmuFrame], areas: &[&str]) -> Result<Vec<MuPmuFrame>> {
    for id in areas {
        if !frames.iter().any(|f| f.area == *id) {
            return Err(Error::invalid(format!("unknown area id {id}")));
        }
    }
    Ok(frames.iter().filter(|f| areas.contains(&f.area.as_str())).cloned().collect())
}

/// Splits frames into per-area streams, keeping first-seen area order.
pub fn group_by_area(frames: &[MuPmuFrame]) -> Vec<AreaStream> {
    let mut streams: Vec<AreaStream> = Vec::new();
    for f in frames {
        let s = match streams.iter_mut().position(|s| s.area == f.area) {
            Some(k) => &mut streams[k],
            None => {
                streams.push(AreaStream {
                    area: f.area.clone(),
                    node: f.node,
                    ..AreaStream::default()
                });
                streams.last_mut().unwrap()
            }
        };
        s.t.push(f.t);
        s.v.push(f.v);
        s.i.push(f.i);
    }
    streams
}

/// Nine significant digits in plain decimal notation.
pub fn format_sig9(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return if x.is_finite() { "0".to_string() } else { format!("{x}") };
    }
    let exp = x.abs().log10().floor() as i32;
    let decimals = (8 - exp).max(0) as usize;
    let mut s = format!("{x:.decimals$}");
    // rounding can carry into a new digit (9.99999999995 -> 10.00000000)
    let digits = s.chars().filter(|c| c.is_ascii_digit()).collect::<String>();
    if digits.trim_start_matches('0').len() > 9 && decimals > 0 {
        let d = decimals - 1;
        s = format!("{x:.d$}");
    }
    if s == "-0" || s.chars().all(|c| c == '-' || c == '0' || c == '.') {
        return "0".to_string();
    }
    s
}

fn row(f: &MuPmuFrame) -> String {
    let mut s = String::with_capacity(96);
    let _ = write!(
        s,
        "{},{},{},{},{},{},{}",
        format_sig9(f.t),
        f.area,
        f.node,
        format_sig9(f.v.norm()),
        format_sig9(f.v.arg()),
        format_sig9(f.i.norm()),
        format_sig9(f.i.arg())
    );
    s
}

pub fn write_csv<W: Write>(mut w: W, frames: &[MuPmuFrame]) -> Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    for f in frames {
        writeln!(w, "{}", row(f))?;
    }
    Ok(())
}

/// Parses one data row.
pub fn parse_row(line: &str, line_no: usize) -> Result<MuPmuFrame> {
    let cols: Vec<&str> = line.trim().split(',').collect();
    if cols.len() != 7 {
        return Err(Error::invalid(format!("line {line_no}: expected 7 columns, found {}", cols.len())));
    }
    let num = |k: usize, name: &str| -> Result<f64> {
        cols[k]
            .trim()
            .parse::<f64>()
            .map_err(|_| Error::invalid(format!("line {line_no}: bad {name} value '{}'", cols[k])))
    };
    let node = cols[2]
        .trim()
        .parse::<BusId>()
        .map_err(|_| Error::invalid(format!("line {line_no}: bad node_id '{}'", cols[2])))?;
    let v_mag = num(3, "v_mag_pu")?;
    if v_mag < 0.0 {
        return Err(Error::invalid(format!("line {line_no}: negative voltage magnitude")));
    }
    Ok(MuPmuFrame {
        t: num(0, "t_s")?,
        area: cols[1].trim().to_string(),
        node,
        v: Complex64::from_polar(v_mag, num(4, "v_ang_rad")?),
        i: Complex64::from_polar(num(5, "i_mag_pu")?, num(6, "i_ang_rad")?),
    })
}

pub fn read_csv<R: BufRead>(r: R) -> Result<Vec<MuPmuFrame>> {
    let mut lines = r.lines();
    let header = lines.next().transpose()?.unwrap_or_default();
    if header.trim() != CSV_HEADER {
        return Err(Error::invalid(format!("unexpected CSV header '{}'", header.trim())));
    }
    let mut frames = Vec::new();
    let mut last_t = f64::NEG_INFINITY;
    for (k, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let f = parse_row(&line, k + 2)?;
        if f.t < last_t {
            return Err(Error::invalid(format!("line {}: rows are not time-ordered", k + 2)));
        }
        last_t = f.t;
        frames.push(f);
    }
    Ok(frames)
}
