//! Date expressions found in changelog lines.
//!
//! Accepted forms: `2021-01-19`, `2021/01/19`, `19-01-2021`, `19/01/2021`,
//! `January 19, 2021`, `Jan 19 2021`, `19 January 2021`, `19th Jan. 2021`.
//! Years must have four digits.

use std::ops::Range;
use std::sync::LazyLock;

use chrono::NaiveDate;
use regex::Regex;

const MONTH: &str = "january|february|march|april|may|june|july|august|september|october|november|december|jan|feb|mar|apr|jun|jul|aug|sept|sep|oct|nov|dec";

enum Layout {
    Ymd,
    Dmy,
    MonthDayYear,
    DayMonthYear,
}

static PATTERNS: LazyLock<Vec<(Regex, Layout)>> = LazyLock::new(|| {
    let build = |p: String| Regex::new(&p).expect("date pattern");
    vec![
        (
            build(r"\b(\d{4})-(\d{1,2})-(\d{1,2})\b|\b(\d{4})/(\d{1,2})/(\d{1,2})\b".into()),
            Layout::Ymd,
        ),
        (
            build(r"\b(\d{1,2})-(\d{1,2})-(\d{4})\b|\b(\d{1,2})/(\d{1,2})/(\d{4})\b".into()),
            Layout::Dmy,
        ),
        (
            build(format!(
                r"(?i)\b({MONTH})\.?\s+(\d{{1,2}})(?:st|nd|rd|th)?,?\s+(\d{{4}})\b"
            )),
            Layout::MonthDayYear,
        ),
        (
            build(format!(
                r"(?i)\b(\d{{1,2}})(?:st|nd|rd|th)?\s+({MONTH})\.?,?\s+(\d{{4}})\b"
            )),
            Layout::DayMonthYear,
        ),
    ]
});

fn month_number(name: &str) -> Option<u32> {
    let lower = name.to_ascii_lowercase();
    let key = &lower[..3.min(lower.len())];
    let idx = [
        "jan", "feb", "mar", "apr", "may", "jun", "jul", "aug", "sep", "oct", "nov", "dec",
    ]
    .iter()
    .position(|m| *m == key)?;
    Some(idx as u32 + 1)
}

fn plausible(d: NaiveDate) -> Option<NaiveDate> {
    use chrono::Datelike;
    (1900..=2099).contains(&d.year()).then_some(d)
}

/// First date expression in `line`, by position.
pub fn parse_date(line: &str) -> Option<NaiveDate> {
    find_date(line).map(|(_, d)| d)
}

/// First date expression in `line` with its byte offset.
pub fn find_date(line: &str) -> Option<(usize, NaiveDate)> {
    find_date_span(line).map(|(r, d)| (r.start, d))
}

/// First date expression in `line` with its byte range.
pub fn find_date_span(line: &str) -> Option<(Range<usize>, NaiveDate)> {
    let mut best: Option<(Range<usize>, NaiveDate)> = None;
    for (re, layout) in PATTERNS.iter() {
        for caps in re.captures_iter(line) {
            let whole = caps.get(0).expect("match");
            let start = whole.start();
            if best.as_ref().is_some_and(|(b, _)| b.start <= start) {
                break;
            }
            let groups: Vec<&str> = caps
                .iter()
                .skip(1)
                .flatten()
                .map(|m| m.as_str())
                .collect();
            let num = |s: &str| s.parse::<u32>().ok();
            let date = match (layout, groups.as_slice()) {
                (Layout::Ymd, [y, m, d]) => {
                    NaiveDate::from_ymd_opt(y.parse().ok()?, num(m)?, num(d)?)
                }
                (Layout::Dmy, [d, m, y]) => {
                    NaiveDate::from_ymd_opt(y.parse().ok()?, num(m)?, num(d)?)
                }
                (Layout::MonthDayYear, [m, d, y]) => {
                    NaiveDate::from_ymd_opt(y.parse().ok()?, month_number(m)?, num(d)?)
                }
                (Layout::DayMonthYear, [d, m, y]) => {
                    NaiveDate::from_ymd_opt(y.parse().ok()?, month_number(m)?, num(d)?)
                }
                _ => None,
            };
            if let Some(date) = date.and_then(plausible) {
                best = Some((whole.range(), date));
                break;
            }
        }
    }
    best
}
