use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::ConvergenceRecord;
use crate::error::{Error, Result};

pub const CSV_HEADER: &str = "n,h,ndof,l2_err,h1_err,h1_err_post,kappa,kappa_h2,wall_time";

fn float(x: f64) -> String {
    format!("{x:.16e}")
}

fn opt(x: Option<f64>) -> String {
    x.map(float).unwrap_or_default()
}

pub fn emit_csv<W: Write>(mut w: W, records: &[ConvergenceRecord]) -> std::io::Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    for r in records {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{}",
            r.n,
            float(r.h),
            r.ndof,
            float(r.l2_err),
            float(r.h1_err),
            opt(r.h1_err_post),
            opt(r.kappa),
            opt(r.kappa_h2),
            opt(r.wall_time)
        )?;
    }
    Ok(())
}

pub fn emit_csv_file(path: impl AsRef<Path>, records: &[ConvergenceRecord]) -> Result<()> {
    let path = path.as_ref();
    if records.is_empty() {
        return Err(Error::invalid("no records to write"));
    }
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    emit_csv(&mut w, records).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn parse_csv<R: BufRead>(r: R) -> Result<Vec<ConvergenceRecord>> {
    let mut lines = r.lines().enumerate();
    let bad = |line: usize, msg: String| Error::Parse {
        line: line + 1,
        msg,
    };
    match lines.next() {
        Some((_, Ok(h))) if h.trim() == CSV_HEADER => {}
        _ => return Err(bad(0, "missing CSV header".into())),
    }
    let mut out = Vec::new();
    for (i, line) in lines {
        let line = line.map_err(|e| bad(i, e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 9 {
            return Err(bad(i, format!("expected 9 fields, found {}", f.len())));
        }
        let req = |k: usize| {
            f[k].parse::<f64>()
                .map_err(|_| bad(i, format!("bad number `{}`", f[k])))
        };
        let opt = |k: usize| {
            if f[k].is_empty() {
                Ok(None)
            } else {
                req(k).map(Some)
            }
        };
        let int = |k: usize| {
            f[k].parse::<usize>()
                .map_err(|_| bad(i, format!("bad integer `{}`", f[k])))
        };
        out.push(ConvergenceRecord {
            n: int(0)?,
            h: req(1)?,
            ndof: int(2)?,
            l2_err: req(3)?,
            h1_err: req(4)?,
            h1_err_post: opt(5)?,
            kappa: opt(6)?,
            kappa_h2: opt(7)?,
            wall_time: opt(8)?,
        });
    }
    Ok(out)
}

/// Plottable record columns.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Column {
    L2,
    H1,
    H1Post,
    Kappa,
    KappaH2,
}

impl Column {
    pub fn name(self) -> &'static str {
        match self {
            Column::L2 => "l2_err",
            Column::H1 => "h1_err",
            Column::H1Post => "h1_err_post",
            Column::Kappa => "kappa",
            Column::KappaH2 => "kappa_h2",
        }
    }

    pub fn value(self, r: &ConvergenceRecord) -> Option<f64> {
        match self {
            Column::L2 => Some(r.l2_err),
            Column::H1 => Some(r.h1_err),
            Column::H1Post => r.h1_err_post,
            Column::Kappa => r.kappa,
            Column::KappaH2 => r.kappa_h2,
        }
    }

    /// Error columns that carry data in `records`.
    pub fn defaults_for(records: &[ConvergenceRecord]) -> Vec<Column> {
        [Column::L2, Column::H1, Column::H1Post]
            .into_iter()
            .filter(|c| records.iter().any(|r| c.value(r).is_some()))
            .collect()
    }
}

const COLORS: [&str; 5] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"];

/// Log-log chart of the requested columns against `h`, with dashed
/// slope-1 and slope-2 guides. One `<polyline>` per column.
pub fn emit_svg_plot<W: Write>(
    mut w: W,
    records: &[ConvergenceRecord],
    columns: &[Column],
) -> Result<()> {
    if records.is_empty() {
        return Err(Error::invalid("no records to plot"));
    }
    let series: Vec<(Column, Vec<(f64, f64)>)> = columns
        .iter()
        .map(|&c| {
            let pts = records
                .iter()
                .filter_map(|r| {
                    c.value(r)
                        .filter(|v| *v > 0.0)
                        .map(|v| (r.h.log10(), v.log10()))
                })
                .collect();
            (c, pts)
        })
        .collect();
    let all: Vec<(f64, f64)> = series.iter().flat_map(|s| s.1.iter().copied()).collect();
    let hs: Vec<f64> = records.iter().map(|r| r.h.log10()).collect();
    let (mut x0, mut x1) = (
        hs.iter().copied().fold(f64::INFINITY, f64::min),
        hs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    );
    let (mut y0, mut y1) = all
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| {
            (a.min(p.1), b.max(p.1))
        });
    if !y0.is_finite() {
        (y0, y1) = (-1.0, 0.0);
    }
    if x1 - x0 < 1e-9 {
        x0 -= 0.5;
        x1 += 0.5;
    }
    if y1 - y0 < 1e-9 {
        y0 -= 0.5;
        y1 += 0.5;
    }
    let pad_x = 0.05 * (x1 - x0);
    let pad_y = 0.05 * (y1 - y0);
    let (x0, x1, y0, y1) = (x0 - pad_x, x1 + pad_x, y0 - pad_y, y1 + pad_y);

    let (width, height, margin) = (640.0, 480.0, 60.0);
    let sx = |x: f64| margin + (x - x0) / (x1 - x0) * (width - 2.0 * margin);
    let sy = |y: f64| height - margin - (y - y0) / (y1 - y0) * (height - 2.0 * margin);

    let mut s = String::new();
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width}" height="{height}" viewBox="0 0 {width} {height}">"#
    );
    let _ = writeln!(
        s,
        r#"<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>"#
    );
    let _ = writeln!(
        s,
        r#"<rect x="{margin}" y="{margin}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        width - 2.0 * margin,
        height - 2.0 * margin
    );
    for d in (x0.ceil() as i32)..=(x1.floor() as i32) {
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" font-size="12" text-anchor="middle">1e{d}</text>"#,
            sx(d as f64),
            height - margin + 18.0
        );
    }
    for d in (y0.ceil() as i32)..=(y1.floor() as i32) {
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" font-size="12" text-anchor="end">1e{d}</text>"#,
            margin - 6.0,
            sy(d as f64) + 4.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" font-size="14" text-anchor="middle">h</text>"#,
        width / 2.0,
        height - 15.0
    );

    // guides anchored at the coarsest point of the first series
    if let Some(&(ax, ay)) = series
        .iter()
        .find_map(|s| s.1.iter().max_by(|a, b| a.0.total_cmp(&b.0)))
    {
        for slope in [1.0, 2.0] {
            let bx = x0 + pad_x;
            let by = ay - slope * (ax - bx);
            let _ = writeln!(
                s,
                r#"<line class="guide" x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="gray" stroke-dasharray="4 3"/>"#,
                sx(ax),
                sy(ay - 0.3 * (y1 - y0)),
                sx(bx),
                sy(by - 0.3 * (y1 - y0))
            );
            let _ = writeln!(
                s,
                r#"<text x="{:.2}" y="{:.2}" font-size="11" fill="gray">slope {slope}</text>"#,
                sx(bx) + 4.0,
                sy(by - 0.3 * (y1 - y0)) - 4.0
            );
        }
    }

    for (i, (c, pts)) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let coords: Vec<String> = pts
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline data-column="{}" points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
            c.name(),
            coords.join(" ")
        );
        for &(x, y) in pts {
            let _ = writeln!(
                s,
                r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{color}"/>"#,
                sx(x),
                sy(y)
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" font-size="12" fill="{color}">{}</text>"#,
            margin + 10.0,
            margin + 18.0 * (i + 1) as f64,
            c.name()
        );
    }
    let _ = writeln!(s, "</svg>");
    w.write_all(s.as_bytes()).map_err(|e| Error::io("<svg>", e))
}

pub fn emit_svg_plot_file(
    path: impl AsRef<Path>,
    records: &[ConvergenceRecord],
    columns: &[Column],
) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    emit_svg_plot(&mut w, records, columns).map_err(|e| match e {
        Error::Io { source, .. } => Error::io(path, source),
        other => other,
    })?;
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads a CSV file written by [`emit_csv_file`].
pub fn parse_csv_file(path: impl AsRef<Path>) -> Result<Vec<ConvergenceRecord>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_csv(BufReader::new(file))
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    fn record() -> ConvergenceRecord {
        ConvergenceRecord {
            n: 16,
            h: 0.0625,
            ndof: 225,
            l2_err: 0.005918073955780001,
            h1_err: 0.227631436842,
            h1_err_post: None,
            kappa: Some(391.3015282790123),
            kappa_h2: Some(1.5285215948399),
            wall_time: None,
        }
    }

    #[test]
    fn round_trip_and_empty_fields() {
        let r = record();
        let mut buf = Vec::new();
        emit_csv(&mut buf, std::slice::from_ref(&r)).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        let row = text.lines().nth(1).unwrap();
        assert_eq!(row.split(',').nth(5), Some(""));
        assert!(row.ends_with(','));
        assert_eq!(parse_csv(buf.as_slice()).unwrap(), vec![r]);
    }

    #[test]
    fn header_checked() {
        assert!(matches!(
            parse_csv("n,h\n".as_bytes()),
            Err(Error::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn svg_has_one_polyline_per_column() {
        let mut a = record();
        let mut b = record();
        b.n = 32;
        b.h = 1.0 / 32.0;
        b.l2_err /= 4.0;
        b.h1_err /= 2.0;
        a.h1_err_post = Some(0.2);
        b.h1_err_post = Some(0.1);
        let cols = [Column::L2, Column::H1, Column::H1Post];
        let mut buf = Vec::new();
        emit_svg_plot(&mut buf, &[a.clone(), b.clone()], &cols).unwrap();
        let svg = String::from_utf8(buf).unwrap();
        assert_eq!(svg.matches("<polyline").count(), 3);
        assert_eq!(svg.matches(r#"class="guide""#).count(), 2);
        for c in cols {
            assert!(svg.contains(&format!(r#"data-column="{}""#, c.name())));
        }
        assert!(svg.trim_end().ends_with("</svg>"));
        assert!(emit_svg_plot(Vec::new(), &[], &cols).is_err());
    }

    #[test]
    fn unwritable_path_is_io_error() {
        let err = emit_csv_file("/nonexistent-dir/x.csv", &[record()]).unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.csv");
        emit_csv_file(&path, &[record()]).unwrap();
        assert_eq!(parse_csv_file(&path).unwrap(), vec![record()]);
    }

    proptest! {
        #[test]
        fn any_record_round_trips(
            n in 2usize..100_000, ndof in 0usize..1_000_000,
            l2 in 0.0f64..1e3, h1 in 0.0f64..1e3,
            post in proptest::option::of(0.0f64..1e3),
            kappa in proptest::option::of(1.0f64..1e12),
            t in proptest::option::of(0.0f64..1e4),
        ) {
            let r = ConvergenceRecord {
                n, h: 1.0 / n as f64, ndof, l2_err: l2, h1_err: h1, h1_err_post: post,
                kappa, kappa_h2: kappa.map(|k| k / (n * n) as f64), wall_time: t,
            };
            let mut buf = Vec::new();
            emit_csv(&mut buf, std::slice::from_ref(&r)).unwrap();
            prop_assert_eq!(parse_csv(buf.as_slice()).unwrap(), vec![r]);
        }
    }
}
