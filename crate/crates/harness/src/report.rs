//! CSV and plot-data output.

use std::io::{Read, Write};

use crate::method::Method;
use crate::sweep::{BerRow, SweepAxis};
use crate::{HarnessError, Result};

pub const CSV_HEADER: [&str; 10] = [
    "method",
    "axis",
    "axis_value",
    "n_tags",
    "ber",
    "ci95",
    "bit_count",
    "error_count",
    "trials",
    "seed",
];

/// `%g`-style formatting with 6 significant digits.
pub fn fmt_sig6(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    // The exponent comes from the rounded mantissa so that a carry into the
    // next decade (9.999996 -> 1.00000e1) is accounted for.
    let sci = format!("{:.5e}", x);
    let (mantissa, e) = sci.split_once('e').expect("scientific format");
    let e: i32 = e.parse().expect("exponent");
    if (-5..6).contains(&e) {
        let decimals = (5 - e).max(0) as usize;
        trim_zeros(format!("{:.*}", decimals, x))
    } else {
        let m = trim_zeros(mantissa.to_string());
        format!("{m}e{}{:02}", if e < 0 { '-' } else { '+' }, e.abs())
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

pub fn write_csv<W: Write>(rows: &[BerRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in rows {
        w.write_record([
            r.method.name().to_string(),
            r.axis.name().to_string(),
            fmt_sig6(r.axis_value),
            r.n_tags.to_string(),
            fmt_sig6(r.ber),
            fmt_sig6(r.ci95),
            r.bit_count.to_string(),
            r.error_count.to_string(),
            r.trials.to_string(),
            r.seed.to_string(),
        ])?;
    }
    w.flush().map_err(|e| HarnessError::Csv(e.to_string()))?;
    Ok(())
}

pub fn csv_string(rows: &[BerRow]) -> String {
    let mut buf = Vec::new();
    write_csv(rows, &mut buf).expect("writing to memory");
    String::from_utf8(buf).expect("ASCII output")
}

pub fn read_csv<R: Read>(input: R) -> Result<Vec<BerRow>> {
    let mut r = csv::Reader::from_reader(input);
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header.iter().map(String::as_str).ne(CSV_HEADER.iter().copied()) {
        return Err(HarnessError::Csv(format!("unexpected header {header:?}")));
    }
    let mut rows = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        let field = |i: usize| rec.get(i).unwrap_or_default();
        let num = |i: usize| -> Result<f64> {
            field(i)
                .parse()
                .map_err(|_| HarnessError::Csv(format!("row {}: `{}` is not a number ({})", line + 1, field(i), CSV_HEADER[i])))
        };
        let int = |i: usize| -> Result<u64> {
            field(i)
                .parse()
                .map_err(|_| HarnessError::Csv(format!("row {}: `{}` is not an integer ({})", line + 1, field(i), CSV_HEADER[i])))
        };
        rows.push(BerRow {
            method: field(0).parse::<Method>()?,
            axis: field(1).parse::<SweepAxis>()?,
            axis_value: num(2)?,
            n_tags: int(3)? as usize,
            ber: num(4)?,
            ci95: num(5)?,
            bit_count: int(6)?,
            error_count: int(7)?,
            trials: int(8)?,
            seed: int(9)?,
            detector_seconds: 0.0,
        });
    }
    Ok(rows)
}

/// Whitespace-separated blocks, one per (method, N) series (one per method
/// when N is the swept axis), separated by two blank lines so gnuplot can
/// address them with `index`.
pub fn write_plot_data<W: Write>(rows: &[BerRow], mut out: W) -> std::io::Result<()> {
    let key = |r: &BerRow| (r.method, if r.axis == SweepAxis::NTags { None } else { Some(r.n_tags) });
    let mut series = Vec::new();
    for r in rows {
        if !series.contains(&key(r)) {
            series.push(key(r));
        }
    }
    for (i, k) in series.iter().enumerate() {
        if i > 0 {
            writeln!(out, "\n")?;
        }
        let members: Vec<&BerRow> = rows.iter().filter(|r| key(r) == *k).collect();
        match k.1 {
            Some(n) => writeln!(out, "# {} N={n}", k.0)?,
            None => writeln!(out, "# {}", k.0)?,
        }
        writeln!(out, "# {} ber", members[0].axis.name())?;
        for r in members {
            writeln!(out, "{} {}", fmt_sig6(r.axis_value), fmt_sig6(r.ber))?;
        }
    }
    Ok(())
}
