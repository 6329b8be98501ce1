//! UTC timestamp parsing and formatting.

use chrono::{DateTime, NaiveDateTime, Utc};

use crate::error::{Error, Result};

/// Parse an ISO-8601 / RFC 3339 UTC timestamp into seconds since the epoch.
///
/// Accepts `2023-03-01T09:00:00Z`, explicit offsets, and a bare
/// `2023-03-01T09:00:00` (read as UTC).
pub fn parse_utc(s: &str) -> Result<i64> {
    let s = s.trim();
    if let Some(t) = parse_fast(s) {
        return Ok(t);
    }
    if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        return Ok(dt.timestamp());
    }
    if let Ok(dt) = NaiveDateTime::parse_from_str(s, "%Y-%m-%dT%H:%M:%S") {
        return Ok(dt.and_utc().timestamp());
    }
    Err(Error::InvalidInput(format!("unparseable timestamp {s:?}")))
}

// Fixed-layout `YYYY-MM-DDTHH:MM:SSZ`, the form every writer in this crate
// emits. Avoids the general parser on the hot ingest path.
fn parse_fast(s: &str) -> Option<i64> {
    let b = s.as_bytes();
    if b.len() != 20
        || b[4] != b'-'
        || b[7] != b'-'
        || b[10] != b'T'
        || b[13] != b':'
        || b[16] != b':'
        || b[19] != b'Z'
    {
        return None;
    }
    let num = |r: std::ops::Range<usize>| -> Option<i64> {
        let mut v = 0i64;
        for &c in &b[r] {
            if !c.is_ascii_digit() {
                return None;
            }
            v = v * 10 + (c - b'0') as i64;
        }
        Some(v)
    };
    let (y, mo, d) = (num(0..4)?, num(5..7)?, num(8..10)?);
    let (h, mi, se) = (num(11..13)?, num(14..16)?, num(17..19)?);
    if !(1..=12).contains(&mo) || d < 1 || d > days_in_month(y, mo) || h > 23 || mi > 59 || se > 59 {
        return None;
    }
    Some(days_from_civil(y, mo, d) * 86_400 + h * 3600 + mi * 60 + se)
}

fn days_in_month(y: i64, m: i64) -> i64 {
    match m {
        1 | 3 | 5 | 7 | 8 | 10 | 12 => 31,
        4 | 6 | 9 | 11 => 30,
        _ if (y % 4 == 0 && y % 100 != 0) || y % 400 == 0 => 29,
        _ => 28,
    }
}

// Howard Hinnant's days-from-civil.
fn days_from_civil(y: i64, m: i64, d: i64) -> i64 {
    let y = if m <= 2 { y - 1 } else { y };
    let era = y.div_euclid(400);
    let yoe = y - era * 400;
    let mp = (m + 9) % 12;
    let doy = (153 * mp + 2) / 5 + d - 1;
    let doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    era * 146_097 + doe - 719_468
}

fn to_datetime(t: i64) -> DateTime<Utc> {
    DateTime::<Utc>::from_timestamp(t, 0).unwrap_or_default()
}

/// `2023-03-01T09:00:00Z`
pub fn format_utc(t: i64) -> String {
    to_datetime(t).format("%Y-%m-%dT%H:%M:%SZ").to_string()
}

/// ISO-8601 basic format, safe in file names: `20230301T090000Z`.
pub fn format_basic(t: i64) -> String {
    to_datetime(t).format("%Y%m%dT%H%M%SZ").to_string()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fast_path_agrees_with_chrono() {
        for s in [
            "1970-01-01T00:00:00Z",
            "2023-03-01T09:00:00Z",
            "2024-02-29T23:59:59Z",
            "2000-12-31T12:34:56Z",
        ] {
            let slow = DateTime::parse_from_rfc3339(s).unwrap().timestamp();
            assert_eq!(parse_fast(s), Some(slow), "{s}");
        }
        assert_eq!(parse_fast("2023-02-29T00:00:00Z"), None);
    }

    #[test]
    fn offsets_and_naive_forms() {
        assert_eq!(
            parse_utc("2023-03-01T17:00:00+08:00").unwrap(),
            parse_utc("2023-03-01T09:00:00Z").unwrap()
        );
        assert_eq!(
            parse_utc("2023-03-01T09:00:00").unwrap(),
            parse_utc("2023-03-01T09:00:00Z").unwrap()
        );
        assert!(parse_utc("yesterday").is_err());
    }

    #[test]
    fn format_round_trip() {
        let t = parse_utc("2023-03-01T09:05:00Z").unwrap();
        assert_eq!(format_utc(t), "2023-03-01T09:05:00Z");
        assert_eq!(format_basic(t), "20230301T090500Z");
    }
}
