//! `trace.csv`: one header line then one row per frame, 22 numeric columns,
//! quaternions in (w, x, y, z) order. Values are written rounded to 9
//! significant digits in shortest form, so a parse/write cycle is stable.

use super::{FormatError, Pose, TelemetryFrame, TelemetryTrace};
use crate::geom::{Quat, Vec3};
use std::io::Read;

pub const TRACE_CSV_HEADER: [&str; 22] = [
    "t", "hx", "hy", "hz", "hqw", "hqx", "hqy", "hqz", "lx", "ly", "lz", "lqw", "lqx", "lqy", "lqz",
    "rx", "ry", "rz", "rqw", "rqx", "rqy", "rqz",
];

/// Parser tolerance on |q| - 1; quaternions inside it but outside the
/// in-memory tolerance are renormalized.
const FILE_QUAT_TOLERANCE: f64 = 1e-3;

pub fn parse_trace_csv<R: Read>(input: R) -> Result<TelemetryTrace, FormatError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(input);
    let mut records = reader.records();

    let header = match records.next() {
        Some(Ok(h)) => h,
        Some(Err(e)) => return Err(malformed(1, e.to_string())),
        None => return Err(malformed(1, "missing header".into())),
    };
    let header_ok = header.len() == TRACE_CSV_HEADER.len()
        && header.iter().zip(TRACE_CSV_HEADER).all(|(a, b)| a.trim() == b);
    if !header_ok {
        return Err(malformed(1, format!("expected header {}", TRACE_CSV_HEADER.join(","))));
    }

    let mut frames: Vec<TelemetryFrame> = Vec::new();
    let mut last_line = 1;
    for rec in records {
        let rec = rec.map_err(|e| {
            let line = e.position().map(|p| p.line() as usize).unwrap_or(last_line + 1);
            malformed(line, e.to_string())
        })?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(last_line + 1);
        last_line = line;
        if rec.len() != TRACE_CSV_HEADER.len() {
            return Err(malformed(line, format!("expected 22 columns, found {}", rec.len())));
        }
        let mut v = [0.0f64; 22];
        for (i, field) in rec.iter().enumerate() {
            let x: f64 = field
                .trim()
                .parse()
                .map_err(|_| malformed(line, format!("column {} is not a number: {field:?}", TRACE_CSV_HEADER[i])))?;
            if !x.is_finite() {
                return Err(malformed(line, format!("column {} is not finite", TRACE_CSV_HEADER[i])));
            }
            v[i] = x;
        }
        let t = v[0];
        if t < 0.0 {
            return Err(malformed(line, "negative time".into()));
        }
        if let Some(prev) = frames.last() {
            if t <= prev.t {
                return Err(FormatError::NonMonotonicTime { line });
            }
        }
        let pose = |o: usize| -> Result<Pose, FormatError> {
            let q = Quat::new(v[o + 3], v[o + 4], v[o + 5], v[o + 6]);
            let n = q.norm();
            if (n - 1.0).abs() > FILE_QUAT_TOLERANCE {
                return Err(FormatError::UnnormalizedQuaternion { line, norm: n });
            }
            let q = if (n - 1.0).abs() > super::QUAT_NORM_TOLERANCE { q.normalized() } else { q };
            Ok(Pose { position: Vec3::new(v[o], v[o + 1], v[o + 2]), orientation: q })
        };
        frames.push(TelemetryFrame { t, hmd: pose(1)?, left: pose(8)?, right: pose(15)? });
    }

    if frames.is_empty() {
        return Err(malformed(last_line + 1, "no frames after header".into()));
    }
    // Rows were validated above; construction cannot fail.
    TelemetryTrace::new(frames, None).map_err(|e| malformed(0, e.to_string()))
}

pub fn write_trace_csv(trace: &TelemetryTrace) -> Vec<u8> {
    let mut out = String::with_capacity(trace.len() * 160);
    out.push_str(&TRACE_CSV_HEADER.join(","));
    out.push('\n');
    for f in trace.frames() {
        push_num(&mut out, f.t);
        for p in [&f.hmd, &f.left, &f.right] {
            for x in [
                p.position.x,
                p.position.y,
                p.position.z,
                p.orientation.w,
                p.orientation.x,
                p.orientation.y,
                p.orientation.z,
            ] {
                out.push(',');
                push_num(&mut out, x);
            }
        }
        out.push('\n');
    }
    out.into_bytes()
}

/// Appends `x` rounded to 9 significant digits, in plain decimal with
/// trailing zeros dropped.
fn push_num(out: &mut String, x: f64) {
    use std::fmt::Write;
    let mut sci = String::with_capacity(24);
    write!(sci, "{x:.8e}").expect("write to string");
    let (mantissa, exp) = sci.split_once('e').expect("scientific form");
    let exp: i32 = exp.parse().expect("integer exponent");
    let (neg, mantissa) = match mantissa.strip_prefix('-') {
        Some(m) => (true, m),
        None => (false, mantissa),
    };
    let digits: Vec<u8> = mantissa.bytes().filter(u8::is_ascii_digit).collect();
    let len = digits.iter().rposition(|d| *d != b'0').map_or(0, |i| i + 1);
    if neg {
        out.push('-');
    }
    if len == 0 {
        out.push('0');
        return;
    }
    let digits = &digits[..len];
    let point = exp + 1;
    if point <= 0 {
        out.push_str("0.");
        (0..-point).for_each(|_| out.push('0'));
        digits.iter().for_each(|d| out.push(*d as char));
    } else {
        let point = point as usize;
        for (i, d) in digits.iter().enumerate() {
            if i == point {
                out.push('.');
            }
            out.push(*d as char);
        }
        (digits.len()..point).for_each(|_| out.push('0'));
    }
}

fn malformed(line: usize, reason: String) -> FormatError {
    FormatError::MalformedRow { line, reason }
}
