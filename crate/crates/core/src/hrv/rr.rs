use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MIN_RR_MS: f64 = 300.0;
pub const MAX_RR_MS: f64 = 2000.0;
const MEDIAN_SPAN: usize = 11;
const MEDIAN_DEVIATION: f64 = 0.30;

/// One detected beat and the interval that ended at it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Beat {
    pub t_ms: f64,
    pub rr_ms: f64,
}

/// RR tachogram. Beat times are strictly increasing.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RrSeries {
    beats: Vec<Beat>,
}

impl RrSeries {
    /// Builds the series from R-peak times; the first peak only opens an interval.
    pub fn from_peak_times(times: &[f64]) -> Result<Self> {
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Input(
                "peak times must be strictly increasing".into(),
            ));
        }
        if times.iter().any(|t| !t.is_finite()) {
            return Err(Error::Input("non-finite peak time".into()));
        }
        let beats = times
            .windows(2)
            .map(|w| Beat {
                t_ms: w[1],
                rr_ms: w[1] - w[0],
            })
            .collect();
        Ok(RrSeries { beats })
    }

    pub fn from_beats(beats: Vec<Beat>) -> Result<Self> {
        if beats.windows(2).any(|w| !(w[1].t_ms > w[0].t_ms)) {
            return Err(Error::Input(
                "beat times must be strictly increasing".into(),
            ));
        }
        Ok(RrSeries { beats })
    }

    pub fn beats(&self) -> &[Beat] {
        &self.beats
    }

    pub fn intervals(&self) -> impl Iterator<Item = f64> + '_ {
        self.beats.iter().map(|b| b.rr_ms)
    }

    pub fn len(&self) -> usize {
        self.beats.len()
    }

    pub fn is_empty(&self) -> bool {
        self.beats.is_empty()
    }

    /// Beats whose time falls in `[start_ms, end_ms)`.
    pub fn window(&self, start_ms: f64, end_ms: f64) -> &[Beat] {
        let lo = self.beats.partition_point(|b| b.t_ms < start_ms);
        let hi = self.beats.partition_point(|b| b.t_ms < end_ms);
        &self.beats[lo..hi]
    }

    pub fn shifted(&self, dt_ms: f64) -> RrSeries {
        RrSeries {
            beats: self
                .beats
                .iter()
                .map(|b| Beat {
                    t_ms: b.t_ms + dt_ms,
                    rr_ms: b.rr_ms,
                })
                .collect(),
        }
    }
}

/// Drops physiologically implausible intervals and intervals deviating more
/// than 30% from the median of the 11 intervals centered on them.
pub fn filter_artifacts(rr: &RrSeries) -> RrSeries {
    let in_range: Vec<Beat> = rr
        .beats
        .iter()
        .copied()
        .filter(|b| (MIN_RR_MS..=MAX_RR_MS).contains(&b.rr_ms))
        .collect();
    let n = in_range.len();
    let half = MEDIAN_SPAN / 2;
    let mut scratch = Vec::with_capacity(MEDIAN_SPAN);
    let beats = (0..n)
        .filter(|&i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(n);
            scratch.clear();
            scratch.extend(in_range[lo..hi].iter().map(|b| b.rr_ms));
            let med = median_in_place(&mut scratch);
            (in_range[i].rr_ms - med).abs() <= MEDIAN_DEVIATION * med
        })
        .map(|i| in_range[i])
        .collect();
    RrSeries { beats }
}

pub(crate) fn median_in_place(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Reads a CSV with header `t_ms`, one R-peak time per row.
pub fn read_peak_csv<R: Read>(reader: R) -> Result<RrSeries> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers().map_err(csv_err)?.clone();
    let col = headers
        .iter()
        .position(|h| h == "t_ms")
        .ok_or_else(|| Error::Input("RR csv needs a `t_ms` column".into()))?;
    let mut times = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        let field = rec.get(col).unwrap_or("");
        let t: f64 = field
            .parse()
            .map_err(|_| Error::Input(format!("row {}: bad t_ms `{field}`", row + 2)))?;
        times.push(t);
    }
    RrSeries::from_peak_times(&times)
}

/// Writes peak times in the `t_ms` CSV format.
pub fn write_peak_csv<W: Write>(mut w: W, peak_times: &[f64]) -> Result<()> {
    writeln!(w, "t_ms")?;
    for t in peak_times {
        writeln!(w, "{t}")?;
    }
    Ok(())
}

fn csv_err(e: csv::Error) -> Error {
    Error::Input(format!("csv: {e}"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(rr: &[f64]) -> RrSeries {
        let mut t = 0.0;
        let mut times = vec![0.0];
        for r in rr {
            t += r;
            times.push(t);
        }
        RrSeries::from_peak_times(&times).unwrap()
    }

    #[test]
    fn clean_series_unchanged() {
        let s = series(&[800.0; 40]);
        assert_eq!(filter_artifacts(&s), s);
    }

    #[test]
    fn out_of_range_interval_removed() {
        let mut rr = vec![800.0; 30];
        rr[15] = 2500.0;
        let out = filter_artifacts(&series(&rr));
        assert_eq!(out.len(), 29);
        assert!(out.intervals().all(|r| r == 800.0));
    }

    #[test]
    fn median_outlier_removed() {
        let mut rr = vec![800.0; 30];
        rr[10] = 500.0;
        let original = series(&rr);
        let out = filter_artifacts(&original);
        assert_eq!(out.len(), 29);
        assert!(!out.beats().contains(&original.beats()[10]));
    }

    #[test]
    fn rejects_unsorted_peaks() {
        assert!(RrSeries::from_peak_times(&[0.0, 10.0, 5.0]).is_err());
        assert!(RrSeries::from_peak_times(&[0.0, 0.0]).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let times = [0.0, 812.5, 1620.0, 2433.25];
        let mut buf = Vec::new();
        write_peak_csv(&mut buf, &times).unwrap();
        let s = read_peak_csv(buf.as_slice()).unwrap();
        assert_eq!(s.len(), 3);
        assert_eq!(s.beats()[0].rr_ms, 812.5);
        assert!(read_peak_csv("x\n1\n".as_bytes()).is_err());
        assert!(read_peak_csv("t_ms\nabc\n".as_bytes()).is_err());
    }

    #[test]
    fn window_is_half_open() {
        let s = series(&[1000.0; 10]);
        assert_eq!(s.window(1000.0, 3000.0).len(), 2);
    }
}
