//! Exploratory statistics over raw events and cleaned records: per-column
//! summaries, Pearson correlations, grouped price statistics and a
//! bucketed market trend, gathered into one JSON report.

use std::collections::{BTreeMap, BTreeSet};

use chrono::{DateTime, Duration, Utc};
use serde::Serialize;
use thiserror::Error;

use crate::ingest::{canonical_role, ColumnRole, InteractionRecord, RawEvent, CANONICAL_COLUMNS};

/// Correlations above this magnitude are listed as redundant pairs.
pub const REDUNDANCY_THRESHOLD: f64 = 0.9;

#[derive(Debug, Error, PartialEq)]
pub enum EdaError {
    #[error("no events to summarize")]
    Empty,
    #[error("unknown numeric column {0:?}")]
    UnknownColumn(String),
    #[error("need at least 2 records, got {0}")]
    TooFewRecords(usize),
    #[error("invalid bucket width {0:?}")]
    BucketWidth(String),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MostFrequent {
    pub value: String,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeatureSummary {
    pub column: String,
    pub n_unique: usize,
    pub most_frequent: Option<MostFrequent>,
    pub empty_rate: f64,
}

/// One summary per canonical column. Empty entries are excluded from the
/// unique and mode counts; mode ties go to the smallest value.
pub fn summarize_features(events: &[RawEvent]) -> Result<Vec<FeatureSummary>, EdaError> {
    if events.is_empty() {
        return Err(EdaError::Empty);
    }
    let summaries = CANONICAL_COLUMNS
        .iter()
        .map(|(column, _)| {
            let mut counts: BTreeMap<String, usize> = BTreeMap::new();
            let mut empty = 0;
            for ev in events {
                match ev.text(column) {
                    Some(v) if !ev.is_empty(column) => *counts.entry(v).or_insert(0) += 1,
                    _ => empty += 1,
                }
            }
            // BTreeMap iterates in ascending order, so keeping the first maximum breaks ties
            let most_frequent = counts
                .iter()
                .fold(None::<(&String, usize)>, |best, (v, &c)| match best {
                    Some((_, bc)) if bc >= c => best,
                    _ => Some((v, c)),
                })
                .map(|(v, c)| MostFrequent { value: v.clone(), count: c });
            FeatureSummary {
                column: column.to_string(),
                n_unique: counts.len(),
                most_frequent,
                empty_rate: empty as f64 / events.len() as f64,
            }
        })
        .collect();
    Ok(summaries)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrelationMatrix {
    pub columns: Vec<String>,
    /// `None` where fewer than two rows overlap or a variance is zero.
    pub values: Vec<Vec<Option<f64>>>,
}

impl CorrelationMatrix {
    /// Pairs `(a, b, r)` with `a` before `b` and `|r|` above the threshold.
    pub fn redundant_pairs(&self, threshold: f64) -> Vec<RedundantPair> {
        let mut out = Vec::new();
        for i in 0..self.columns.len() {
            for j in i + 1..self.columns.len() {
                if let Some(r) = self.values[i][j].filter(|r| r.abs() > threshold) {
                    out.push(RedundantPair { a: self.columns[i].clone(), b: self.columns[j].clone(), r });
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RedundantPair {
    pub a: String,
    pub b: String,
    pub r: f64,
}

fn pearson(pairs: &[(f64, f64)]) -> Option<f64> {
    if pairs.len() < 2 {
        return None;
    }
    let n = pairs.len() as f64;
    let mx = pairs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pairs.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in pairs {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx).powi(2);
        syy += (y - my).powi(2);
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Pearson correlation for every column pair over the rows where both are
/// present. A column is known if it is a canonical numeric column or some
/// record carries it.
pub fn correlation_matrix(records: &[InteractionRecord], columns: &[&str]) -> Result<CorrelationMatrix, EdaError> {
    if records.len() < 2 {
        return Err(EdaError::TooFewRecords(records.len()));
    }
    for c in columns {
        let canonical = canonical_role(c) == Some(ColumnRole::Numeric);
        if !canonical && !records.iter().any(|r| r.numeric_features.contains_key(*c)) {
            return Err(EdaError::UnknownColumn(c.to_string()));
        }
    }
    let k = columns.len();
    let mut values = vec![vec![None; k]; k];
    for i in 0..k {
        for j in i..k {
            let pairs: Vec<(f64, f64)> = records
                .iter()
                .filter_map(|r| Some((r.numeric(columns[i])?, r.numeric(columns[j])?)))
                .collect();
            let r = pearson(&pairs).map(|r| if i == j { 1.0 } else { r });
            values[i][j] = r;
            values[j][i] = r;
        }
    }
    Ok(CorrelationMatrix { columns: columns.iter().map(|c| c.to_string()).collect(), values })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrendPoint {
    pub bucket_start: DateTime<Utc>,
    pub tx_count: usize,
    pub usd_volume: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrendSeries {
    pub bucket_width_secs: i64,
    pub points: Vec<TrendPoint>,
}

/// Buckets events by `created_date` into contiguous windows aligned to the
/// Unix epoch, from the earliest to the latest occupied one. Events without a
/// timestamp are skipped; events without a price count with zero volume.
pub fn market_trend(events: &[RawEvent], bucket_width: Duration) -> Result<TrendSeries, EdaError> {
    let width = bucket_width.num_seconds();
    if width <= 0 {
        return Err(EdaError::BucketWidth(format!("{bucket_width}")));
    }
    let mut buckets: BTreeMap<i64, (usize, f64)> = BTreeMap::new();
    for ev in events {
        if let Some(t) = ev.created_date {
            let b = t.timestamp().div_euclid(width);
            let slot = buckets.entry(b).or_insert((0, 0.0));
            slot.0 += 1;
            slot.1 += ev.absolute_price_usd.unwrap_or(0.0);
        }
    }
    let mut points = Vec::new();
    if let (Some(&first), Some(&last)) = (buckets.keys().next(), buckets.keys().next_back()) {
        for b in first..=last {
            let (tx_count, usd_volume) = buckets.get(&b).copied().unwrap_or((0, 0.0));
            let bucket_start = DateTime::from_timestamp(b * width, 0).expect("timestamp in range");
            points.push(TrendPoint { bucket_start, tx_count, usd_volume });
        }
    }
    Ok(TrendSeries { bucket_width_secs: width, points })
}

/// Parses `"<n><unit>"` with unit `s`, `m`, `h` or `d`.
pub fn parse_duration(s: &str) -> Result<Duration, EdaError> {
    let bad = || EdaError::BucketWidth(s.to_string());
    let split = s.find(|c: char| !c.is_ascii_digit()).ok_or_else(bad)?;
    let n: i64 = s[..split].parse().map_err(|_| bad())?;
    let d = match &s[split..] {
        "s" => Duration::try_seconds(n),
        "m" => Duration::try_minutes(n),
        "h" => Duration::try_hours(n),
        "d" => Duration::try_days(n),
        _ => None,
    };
    d.filter(|d| d.num_seconds() > 0).ok_or_else(bad)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PriceStats {
    pub count: usize,
    pub mean: f64,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

/// Quantile of sorted data by linear interpolation between order statistics
/// at 1-based position `n * p + 1/2`, clamped to the sample range.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    assert!(n > 0, "quantile of empty data");
    let h = (n as f64 * p + 0.5).clamp(1.0, n as f64);
    let lo = h.floor() as usize;
    let frac = h - lo as f64;
    if lo >= n {
        sorted[n - 1]
    } else {
        sorted[lo - 1] + frac * (sorted[lo] - sorted[lo - 1])
    }
}

impl PriceStats {
    pub fn from_values(mut values: Vec<f64>) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        values.sort_by(f64::total_cmp);
        Some(Self {
            count: values.len(),
            mean: values.iter().sum::<f64>() / values.len() as f64,
            min: values[0],
            q1: quantile(&values, 0.25),
            median: quantile(&values, 0.5),
            q3: quantile(&values, 0.75),
            max: values[values.len() - 1],
        })
    }
}

/// USD price statistics per value of `column`, over events where both the
/// group value and the price are present.
pub fn grouped_price_stats(events: &[RawEvent], column: &str) -> BTreeMap<String, PriceStats> {
    let mut groups: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for ev in events {
        if let (Some(g), Some(p)) = (ev.text(column), ev.absolute_price_usd) {
            groups.entry(g).or_default().push(p);
        }
    }
    groups
        .into_iter()
        .filter_map(|(g, v)| PriceStats::from_values(v).map(|s| (g, s)))
        .collect()
}

/// Columns the bivariate section groups prices by.
pub const BIVARIATE_COLUMNS: [&str; 2] = ["event_type", "payment_token"];

pub fn bivariate(events: &[RawEvent]) -> BTreeMap<String, BTreeMap<String, PriceStats>> {
    BIVARIATE_COLUMNS
        .iter()
        .map(|c| (c.to_string(), grouped_price_stats(events, c)))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrelationSection {
    #[serde(flatten)]
    pub matrix: CorrelationMatrix,
    pub redundant_pairs: Vec<RedundantPair>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EdaReport {
    pub univariate: Vec<FeatureSummary>,
    pub correlation: CorrelationSection,
    pub bivariate: BTreeMap<String, BTreeMap<String, PriceStats>>,
    pub trend: TrendSeries,
}

/// Renders the report as pretty JSON. Sections and keys always appear in
/// the same order, so identical inputs give identical bytes.
pub fn emit_report(
    summaries: Vec<FeatureSummary>,
    matrix: CorrelationMatrix,
    trend: TrendSeries,
    grouped: BTreeMap<String, BTreeMap<String, PriceStats>>,
) -> String {
    let redundant_pairs = matrix.redundant_pairs(REDUNDANCY_THRESHOLD);
    let report = EdaReport {
        univariate: summaries,
        correlation: CorrelationSection { matrix, redundant_pairs },
        bivariate: grouped,
        trend,
    };
    serde_json::to_string_pretty(&report).expect("report serializes") + "\n"
}

/// Numeric canonical columns present in at least one record, in schema order.
pub fn numeric_columns(records: &[InteractionRecord]) -> Vec<&'static str> {
    let present: BTreeSet<&str> = records.iter().flat_map(|r| r.numeric_features.keys().map(String::as_str)).collect();
    CANONICAL_COLUMNS
        .iter()
        .filter(|(c, role)| *role == ColumnRole::Numeric && present.contains(c))
        .map(|(c, _)| *c)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::EventType;
    use chrono::TimeZone;

    fn ev(kind: EventType, hour: u32, minute: u32, price: Option<f64>) -> RawEvent {
        let mut e = RawEvent::empty(kind);
        e.created_date = Some(Utc.with_ymd_and_hms(2022, 4, 13, hour, minute, 0).unwrap());
        e.absolute_price_usd = price;
        e
    }

    fn rec(values: &[(&str, f64)]) -> InteractionRecord {
        InteractionRecord {
            label: 1,
            user: "u".into(),
            asset_key: "a".into(),
            collection_slug: "c".into(),
            categorical_features: BTreeMap::new(),
            numeric_features: values.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
        }
    }

    #[test]
    fn event_type_summary() {
        let mut events: Vec<_> = (0..4).map(|_| ev(EventType::Successful, 1, 0, None)).collect();
        events.push(ev(EventType::BidWithdrawn, 1, 0, None));
        let s = summarize_features(&events).unwrap();
        assert_eq!(s.len(), CANONICAL_COLUMNS.len());
        let et = s.iter().find(|f| f.column == "event_type").unwrap();
        assert_eq!(et.n_unique, 2);
        assert_eq!(et.most_frequent, Some(MostFrequent { value: "successful".into(), count: 4 }));
        let empty = s.iter().find(|f| f.column == "asset_name").unwrap();
        assert_eq!((empty.n_unique, empty.most_frequent.clone(), empty.empty_rate), (0, None, 1.0));
        assert_eq!(summarize_features(&[]), Err(EdaError::Empty));
    }

    #[test]
    fn mode_ties_go_to_smallest_value() {
        let mut a = ev(EventType::Successful, 1, 0, None);
        a.payment_token = Some("WETH".into());
        let mut b = a.clone();
        b.payment_token = Some("ETH".into());
        let s = summarize_features(&[a, b]).unwrap();
        let pt = s.iter().find(|f| f.column == "payment_token").unwrap();
        assert_eq!(pt.most_frequent.as_ref().unwrap().value, "ETH");
    }

    #[test]
    fn correlation_cases() {
        let rs = |ys: [f64; 3]| -> Vec<InteractionRecord> {
            (0..3).map(|i| rec(&[("x", (i + 1) as f64), ("y", ys[i])])).collect()
        };
        let m = correlation_matrix(&rs([2.0, 4.0, 6.0]), &["x", "y"]).unwrap();
        assert!((m.values[0][1].unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(m.values[0][0], Some(1.0));
        let m = correlation_matrix(&rs([6.0, 4.0, 2.0]), &["x", "y"]).unwrap();
        assert!((m.values[1][0].unwrap() + 1.0).abs() < 1e-12);
        let m = correlation_matrix(&rs([5.0, 5.0, 5.0]), &["x", "y"]).unwrap();
        assert_eq!(m.values[0][1], None);
        assert_eq!(m.values[1][1], None);
        assert_eq!(
            correlation_matrix(&rs([1.0, 2.0, 3.0]), &["x", "nope"]),
            Err(EdaError::UnknownColumn("nope".into()))
        );
        assert_eq!(correlation_matrix(&rs([1.0, 2.0, 3.0])[..1], &["x"]), Err(EdaError::TooFewRecords(1)));
    }

    #[test]
    fn correlation_uses_overlapping_rows_only() {
        let rows = vec![rec(&[("x", 1.0), ("y", 1.0)]), rec(&[("x", 2.0)]), rec(&[("x", 3.0), ("y", 2.0)])];
        let m = correlation_matrix(&rows, &["x", "y"]).unwrap();
        assert!((m.values[0][1].unwrap() - 1.0).abs() < 1e-12);
        let one_overlap = vec![rec(&[("x", 1.0), ("y", 1.0)]), rec(&[("x", 2.0)])];
        assert_eq!(correlation_matrix(&one_overlap, &["x", "y"]).unwrap().values[0][1], None);
    }

    #[test]
    fn trend_buckets() {
        let events = vec![
            ev(EventType::Successful, 3, 5, Some(10.0)),
            ev(EventType::Successful, 3, 40, None),
            ev(EventType::Successful, 3, 59, Some(2.5)),
        ];
        let t = market_trend(&events, Duration::hours(1)).unwrap();
        assert_eq!(t.points.len(), 1);
        assert_eq!((t.points[0].tx_count, t.points[0].usd_volume), (3, 12.5));
        assert_eq!(t.points[0].bucket_start, Utc.with_ymd_and_hms(2022, 4, 13, 3, 0, 0).unwrap());

        let gap = vec![ev(EventType::Successful, 1, 0, Some(1.0)), ev(EventType::Successful, 4, 30, Some(2.0))];
        let t = market_trend(&gap, Duration::hours(1)).unwrap();
        assert_eq!(t.points.iter().map(|p| p.tx_count).collect::<Vec<_>>(), vec![1, 0, 0, 1]);
        assert!(market_trend(&[], Duration::hours(1)).unwrap().points.is_empty());
        assert!(market_trend(&gap, Duration::zero()).is_err());
    }

    #[test]
    fn durations() {
        assert_eq!(parse_duration("1h").unwrap(), Duration::hours(1));
        assert_eq!(parse_duration("15m").unwrap(), Duration::minutes(15));
        assert_eq!(parse_duration("2d").unwrap(), Duration::days(2));
        for bad in ["", "h", "0h", "5x", "-1h", "1.5h"] {
            assert!(parse_duration(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn quartiles_by_interpolation() {
        let s = PriceStats::from_values(vec![4.0, 2.0, 1.0, 3.0]).unwrap();
        assert_eq!((s.q1, s.median, s.q3), (1.5, 2.5, 3.5));
        assert_eq!((s.min, s.max, s.mean), (1.0, 4.0, 2.5));
        let one = PriceStats::from_values(vec![7.0]).unwrap();
        assert_eq!((one.q1, one.median, one.q3), (7.0, 7.0, 7.0));
        assert_eq!(quantile(&[1.0, 2.0, 3.0], 0.5), 2.0);
    }

    #[test]
    fn group_means() {
        let events = vec![
            ev(EventType::Successful, 1, 0, Some(10.0)),
            ev(EventType::Successful, 1, 0, Some(20.0)),
            ev(EventType::BidWithdrawn, 1, 0, Some(40.0)),
            ev(EventType::BidWithdrawn, 1, 0, None),
        ];
        let g = grouped_price_stats(&events, "event_type");
        assert_eq!(g["successful"].mean, 15.0);
        assert_eq!(g["bid_withdrawn"].mean, 40.0);
        assert_eq!(g["bid_withdrawn"].count, 1);
    }

    #[test]
    fn report_is_byte_stable() {
        let events = vec![ev(EventType::Successful, 1, 0, Some(10.0)), ev(EventType::Cancelled, 2, 0, Some(30.0))];
        let records = vec![rec(&[("total_price", 1.0), ("absolute_price_usd", 2.0)]), rec(&[("total_price", 2.0), ("absolute_price_usd", 4.1)])];
        let build = || {
            emit_report(
                summarize_features(&events).unwrap(),
                correlation_matrix(&records, &numeric_columns(&records)).unwrap(),
                market_trend(&events, Duration::hours(1)).unwrap(),
                bivariate(&events),
            )
        };
        let a = build();
        assert_eq!(a, build());
        let v: serde_json::Value = serde_json::from_str(&a).unwrap();
        for section in ["univariate", "correlation", "bivariate", "trend"] {
            assert!(v.get(section).is_some(), "{section}");
        }
        assert_eq!(v["correlation"]["columns"], serde_json::json!(["total_price", "absolute_price_usd"]));
        assert_eq!(v["correlation"]["redundant_pairs"][0]["a"], "total_price");
    }
}
