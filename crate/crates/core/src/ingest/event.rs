use std::collections::BTreeMap;
use std::fmt;

use chrono::{DateTime, NaiveDateTime, SecondsFormat, Utc};
use serde_json::{Map, Value};

use super::IngestError;

/// Marketplace event status. Anything outside the named set lands in `Other`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EventType {
    Successful,
    BidWithdrawn,
    BidEntered,
    Created,
    Cancelled,
    Transfer,
    Other,
}

impl EventType {
    pub fn parse(s: &str) -> Self {
        match s {
            "successful" => Self::Successful,
            "bid_withdrawn" => Self::BidWithdrawn,
            "bid_entered" => Self::BidEntered,
            "created" => Self::Created,
            "cancelled" => Self::Cancelled,
            "transfer" => Self::Transfer,
            _ => Self::Other,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Successful => "successful",
            Self::BidWithdrawn => "bid_withdrawn",
            Self::BidEntered => "bid_entered",
            Self::Created => "created",
            Self::Cancelled => "cancelled",
            Self::Transfer => "transfer",
            Self::Other => "other",
        }
    }

    /// Event types that signal buyer interest and become positive interactions.
    pub fn is_interest(self) -> bool {
        matches!(self, Self::Successful | Self::BidWithdrawn)
    }
}

impl fmt::Display for EventType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One marketplace transaction record. `None` means the source entry was empty.
#[derive(Debug, Clone, PartialEq)]
pub struct RawEvent {
    pub event_id: Option<String>,
    pub event_type: EventType,
    pub created_date: Option<DateTime<Utc>>,
    pub asset_id: Option<String>,
    pub asset_name: Option<String>,
    pub asset_address: Option<String>,
    pub collection_slug: Option<String>,
    pub num_sales: Option<u64>,
    pub buyer_address: Option<String>,
    pub seller_address: Option<String>,
    pub payment_token: Option<String>,
    pub total_price: Option<f64>,
    pub absolute_price_usd: Option<f64>,
    pub user_loyalty: Option<f64>,
    pub asset_loyalty: Option<f64>,
    pub collection_loyalty: Option<f64>,
    /// Remaining sparse columns, untyped.
    pub extra: BTreeMap<String, Option<String>>,
}

/// How a canonical column is used downstream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ColumnRole {
    /// Identifies the event or the interaction; never a model feature.
    Key,
    Categorical,
    Numeric,
}

/// Canonical columns in schema order, with their role.
pub const CANONICAL_COLUMNS: [(&str, ColumnRole); 16] = [
    ("event_id", ColumnRole::Key),
    ("event_type", ColumnRole::Categorical),
    ("created_date", ColumnRole::Key),
    ("asset_id", ColumnRole::Key),
    ("asset_name", ColumnRole::Categorical),
    ("asset_address", ColumnRole::Categorical),
    ("collection_slug", ColumnRole::Categorical),
    ("num_sales", ColumnRole::Numeric),
    ("buyer_address", ColumnRole::Key),
    ("seller_address", ColumnRole::Categorical),
    ("payment_token", ColumnRole::Categorical),
    ("total_price", ColumnRole::Numeric),
    ("absolute_price_usd", ColumnRole::Numeric),
    ("user_loyalty", ColumnRole::Numeric),
    ("asset_loyalty", ColumnRole::Numeric),
    ("collection_loyalty", ColumnRole::Numeric),
];

pub fn canonical_role(column: &str) -> Option<ColumnRole> {
    CANONICAL_COLUMNS
        .iter()
        .find(|(name, _)| *name == column)
        .map(|(_, role)| *role)
}

fn render_time(t: &DateTime<Utc>) -> String {
    t.to_rfc3339_opts(SecondsFormat::AutoSi, true)
}

impl RawEvent {
    /// An event with the given type and every other column empty.
    pub fn empty(event_type: EventType) -> Self {
        Self {
            event_id: None,
            event_type,
            created_date: None,
            asset_id: None,
            asset_name: None,
            asset_address: None,
            collection_slug: None,
            num_sales: None,
            buyer_address: None,
            seller_address: None,
            payment_token: None,
            total_price: None,
            absolute_price_usd: None,
            user_loyalty: None,
            asset_loyalty: None,
            collection_loyalty: None,
            extra: BTreeMap::new(),
        }
    }

    /// Numeric value of a numeric canonical column.
    pub fn numeric(&self, column: &str) -> Option<f64> {
        match column {
            "num_sales" => self.num_sales.map(|n| n as f64),
            "total_price" => self.total_price,
            "absolute_price_usd" => self.absolute_price_usd,
            "user_loyalty" => self.user_loyalty,
            "asset_loyalty" => self.asset_loyalty,
            "collection_loyalty" => self.collection_loyalty,
            _ => None,
        }
    }

    /// Text rendering of any column, canonical or extra. `None` when empty.
    pub fn text(&self, column: &str) -> Option<String> {
        let s = |v: &Option<String>| v.clone();
        match column {
            "event_id" => s(&self.event_id),
            "event_type" => Some(self.event_type.as_str().to_string()),
            "created_date" => self.created_date.as_ref().map(render_time),
            "asset_id" => s(&self.asset_id),
            "asset_name" => s(&self.asset_name),
            "asset_address" => s(&self.asset_address),
            "collection_slug" => s(&self.collection_slug),
            "buyer_address" => s(&self.buyer_address),
            "seller_address" => s(&self.seller_address),
            "payment_token" => s(&self.payment_token),
            "num_sales" | "total_price" | "absolute_price_usd" | "user_loyalty"
            | "asset_loyalty" | "collection_loyalty" => {
                self.numeric(column).map(|v| v.to_string())
            }
            other => self.extra.get(other).cloned().flatten(),
        }
    }

    pub fn is_empty(&self, column: &str) -> bool {
        match column {
            "event_type" => false,
            "created_date" => self.created_date.is_none(),
            _ => self.text(column).is_none(),
        }
    }

    /// Canonical JSON object. Empty canonical fields are omitted; empty extras are `null`.
    pub fn to_json(&self) -> Value {
        let mut obj = Map::new();
        let mut put_str = |k: &str, v: &Option<String>| {
            if let Some(v) = v {
                obj.insert(k.to_string(), Value::String(v.clone()));
            }
        };
        put_str("event_id", &self.event_id);
        put_str("asset_id", &self.asset_id);
        put_str("asset_name", &self.asset_name);
        put_str("asset_address", &self.asset_address);
        put_str("collection_slug", &self.collection_slug);
        put_str("buyer_address", &self.buyer_address);
        put_str("seller_address", &self.seller_address);
        put_str("payment_token", &self.payment_token);
        obj.insert(
            "event_type".into(),
            Value::String(self.event_type.as_str().into()),
        );
        if let Some(t) = &self.created_date {
            obj.insert("created_date".into(), Value::String(render_time(t)));
        }
        if let Some(n) = self.num_sales {
            obj.insert("num_sales".into(), Value::from(n));
        }
        for col in [
            "total_price",
            "absolute_price_usd",
            "user_loyalty",
            "asset_loyalty",
            "collection_loyalty",
        ] {
            if let Some(v) = self.numeric(col) {
                if let Some(n) = serde_json::Number::from_f64(v) {
                    obj.insert(col.into(), Value::Number(n));
                }
            }
        }
        for (k, v) in &self.extra {
            let value = v.clone().map(Value::String).unwrap_or(Value::Null);
            obj.insert(k.clone(), value);
        }
        Value::Object(obj)
    }
}

/// A record that was skipped during parsing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SkippedRecord {
    /// 1-based line number for line-delimited input, 1-based element index for arrays.
    pub position: usize,
    pub reason: String,
}

#[derive(Debug, Clone, Default)]
pub struct ParsedEvents {
    pub events: Vec<RawEvent>,
    pub skipped: Vec<SkippedRecord>,
}

/// Parses a line-delimited JSON document or a single JSON array of event objects.
///
/// Malformed JSON aborts with the offending line. Records without an
/// `event_type`, or with a field value of the wrong type, are skipped and
/// reported in [`ParsedEvents::skipped`].
pub fn parse_events(input: &str) -> Result<ParsedEvents, IngestError> {
    let mut out = ParsedEvents::default();
    let trimmed = input.trim_start();
    if trimmed.starts_with('[') {
        let values: Vec<Value> =
            serde_json::from_str(input).map_err(|e| IngestError::Json {
                line: e.line(),
                message: e.to_string(),
            })?;
        for (i, value) in values.into_iter().enumerate() {
            push_record(&mut out, i + 1, value);
        }
    } else {
        for (i, line) in input.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let value: Value = serde_json::from_str(line).map_err(|e| IngestError::Json {
                line: i + 1,
                message: e.to_string(),
            })?;
            push_record(&mut out, i + 1, value);
        }
    }
    Ok(out)
}

fn push_record(out: &mut ParsedEvents, position: usize, value: Value) {
    match event_from_json(value) {
        Ok(ev) => out.events.push(ev),
        Err(reason) => out.skipped.push(SkippedRecord { position, reason }),
    }
}

/// Renders events as line-delimited JSON, one canonical object per line.
pub fn serialize_events(events: &[RawEvent]) -> String {
    let mut s = String::new();
    for ev in events {
        s.push_str(&ev.to_json().to_string());
        s.push('\n');
    }
    s
}

fn event_from_json(value: Value) -> Result<RawEvent, String> {
    let Value::Object(mut obj) = value else {
        return Err("record is not a JSON object".into());
    };
    let event_type = match obj.remove("event_type") {
        Some(Value::String(s)) if !s.is_empty() => EventType::parse(&s),
        Some(Value::Null) | None => return Err("missing event_type".into()),
        Some(Value::String(_)) => return Err("missing event_type".into()),
        Some(other) => return Err(format!("event_type is not a string: {other}")),
    };
    let mut ev = RawEvent::empty(event_type);

    ev.event_id = take_text(&mut obj, "event_id")?;
    ev.asset_id = take_text(&mut obj, "asset_id")?;
    ev.asset_name = take_text(&mut obj, "asset_name")?;
    ev.asset_address = take_text(&mut obj, "asset_address")?;
    ev.collection_slug = take_text(&mut obj, "collection_slug")?;
    ev.buyer_address = take_text(&mut obj, "buyer_address")?;
    ev.seller_address = take_text(&mut obj, "seller_address")?;
    ev.payment_token = take_text(&mut obj, "payment_token")?;

    ev.created_date = match take_text(&mut obj, "created_date")? {
        None => None,
        Some(s) => Some(parse_timestamp(&s).ok_or_else(|| format!("created_date: bad timestamp {s:?}"))?),
    };
    ev.num_sales = match take_number(&mut obj, "num_sales")? {
        None => None,
        Some(v) if v >= 0.0 && v.fract() == 0.0 && v <= u64::MAX as f64 => Some(v as u64),
        Some(v) => return Err(format!("num_sales: expected a non-negative integer, got {v}")),
    };
    ev.total_price = take_number(&mut obj, "total_price")?;
    ev.absolute_price_usd = take_number(&mut obj, "absolute_price_usd")?;
    ev.user_loyalty = take_number(&mut obj, "user_loyalty")?;
    ev.asset_loyalty = take_number(&mut obj, "asset_loyalty")?;
    ev.collection_loyalty = take_number(&mut obj, "collection_loyalty")?;

    for (k, v) in obj {
        let v = match v {
            Value::Null => None,
            Value::String(s) if s.is_empty() => None,
            Value::String(s) => Some(s),
            other => Some(other.to_string()),
        };
        ev.extra.insert(k, v);
    }
    Ok(ev)
}

fn take_text(obj: &mut Map<String, Value>, key: &str) -> Result<Option<String>, String> {
    match obj.remove(key) {
        None | Some(Value::Null) => Ok(None),
        Some(Value::String(s)) if s.is_empty() => Ok(None),
        Some(Value::String(s)) => Ok(Some(s)),
        Some(v @ (Value::Number(_) | Value::Bool(_))) => Ok(Some(v.to_string())),
        Some(v) => Err(format!("{key}: expected a scalar, got {v}")),
    }
}

fn take_number(obj: &mut Map<String, Value>, key: &str) -> Result<Option<f64>, String> {
    let v = match obj.remove(key) {
        None | Some(Value::Null) => return Ok(None),
        Some(Value::Number(n)) => n.as_f64(),
        Some(Value::String(s)) if s.trim().is_empty() => return Ok(None),
        Some(Value::String(s)) => s.trim().parse::<f64>().ok(),
        Some(_) => None,
    };
    match v {
        Some(v) if v.is_finite() => Ok(Some(v)),
        _ => Err(format!("{key}: expected a finite number")),
    }
}

/// Parses ISO-8601 timestamps. Strings without an offset are taken as UTC.
pub fn parse_timestamp(s: &str) -> Option<DateTime<Utc>> {
    if let Ok(t) = DateTime::parse_from_rfc3339(s) {
        return Some(t.with_timezone(&Utc));
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S%.f", "%Y-%m-%dT%H:%M", "%Y-%m-%d %H:%M"] {
        if let Ok(t) = NaiveDateTime::parse_from_str(s, fmt) {
            return Some(t.and_utc());
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_records_in_both_layouts() {
        let ndjson = r#"{"event_type":"successful","asset_id":"1"}
{"event_type":"bid_withdrawn","asset_id":"2"}

{"event_type":"created","asset_id":"3"}
"#;
        assert_eq!(parse_events(ndjson).unwrap().events.len(), 3);
        let array = r#"[{"event_type":"successful"},{"event_type":"successful"},{"event_type":"x"}]"#;
        let parsed = parse_events(array).unwrap();
        assert_eq!(parsed.events.len(), 3);
        assert_eq!(parsed.events[2].event_type, EventType::Other);
    }

    #[test]
    fn missing_fields_stay_empty() {
        let parsed = parse_events(r#"{"event_type":"successful","total_price":"","num_sales":null}"#).unwrap();
        let ev = &parsed.events[0];
        assert_eq!(ev.num_sales, None);
        assert_eq!(ev.total_price, None);
        assert!(ev.is_empty("num_sales"));
        assert!(!ev.is_empty("event_type"));
    }

    #[test]
    fn zero_is_not_empty() {
        let ev = &parse_events(r#"{"event_type":"successful","num_sales":0}"#).unwrap().events[0];
        assert_eq!(ev.num_sales, Some(0));
        assert!(!ev.is_empty("num_sales"));
    }

    #[test]
    fn unknown_fields_go_to_extra_and_round_trip() {
        let src = r#"{"event_type":"successful","top_bid":"12","is_private":false,"x":null}"#;
        let first = parse_events(src).unwrap().events;
        assert_eq!(first[0].extra["top_bid"].as_deref(), Some("12"));
        assert_eq!(first[0].extra["is_private"].as_deref(), Some("false"));
        assert_eq!(first[0].extra["x"], None);
        let second = parse_events(&serialize_events(&first)).unwrap().events;
        assert_eq!(first, second);
    }

    #[test]
    fn malformed_json_reports_line() {
        let err = parse_events("{\"event_type\":\"successful\"}\n{oops}\n").unwrap_err();
        match err {
            IngestError::Json { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
        let err = parse_events("[\n{\"event_type\": }\n]").unwrap_err();
        assert!(matches!(err, IngestError::Json { line: 2, .. }));
    }

    #[test]
    fn records_without_event_type_are_skipped_and_counted() {
        let parsed = parse_events("{\"asset_id\":\"1\"}\n{\"event_type\":\"successful\"}\n{\"event_type\":\"\"}\n").unwrap();
        assert_eq!(parsed.events.len(), 1);
        assert_eq!(parsed.skipped.len(), 2);
        assert_eq!(parsed.skipped[0].position, 1);
        assert_eq!(parsed.skipped[1].position, 3);
    }

    #[test]
    fn naive_timestamps_are_utc() {
        let t = parse_timestamp("2022-04-16T02:32:03.169797").unwrap();
        assert_eq!(render_time(&t), "2022-04-16T02:32:03.169797Z");
        let z = parse_timestamp("2022-04-16T04:32:03.169797+02:00").unwrap();
        assert_eq!(t, z);
        assert!(parse_timestamp("yesterday").is_none());
    }

    #[test]
    fn numeric_strings_are_accepted() {
        let ev = &parse_events(r#"{"event_type":"successful","total_price":"1000000000000000000","num_sales":"3"}"#)
            .unwrap()
            .events[0];
        assert_eq!(ev.total_price, Some(1e18));
        assert_eq!(ev.num_sales, Some(3));
    }

    #[test]
    fn bad_field_type_skips_record() {
        let parsed = parse_events(r#"{"event_type":"successful","num_sales":-1}"#).unwrap();
        assert!(parsed.events.is_empty());
        assert!(parsed.skipped[0].reason.contains("num_sales"));
    }
}
