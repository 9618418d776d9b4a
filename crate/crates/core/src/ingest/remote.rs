//! Blocking download of raw quote CSV from a templated endpoint.

use std::time::Duration;

use chrono::NaiveDate;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FetchError {
    #[error("endpoint template is missing the `{0}` placeholder")]
    BadTemplate(&'static str),
    #[error("network error: {0}")]
    NetworkError(String),
    #[error("server answered HTTP {0}")]
    HttpStatus(u16),
}

/// Expand an endpoint template.
///
/// Recognized placeholders: `{ticker}`, `{start}` and `{end}` (ISO dates), and
/// `{start_ts}` / `{end_ts}` (Unix seconds at midnight UTC). The ticker and at
/// least one form of each date must appear.
pub fn expand_template(template: &str, ticker: &str, start: NaiveDate, end: NaiveDate) -> Result<String, FetchError> {
    if !template.contains("{ticker}") {
        return Err(FetchError::BadTemplate("{ticker}"));
    }
    if !template.contains("{start}") && !template.contains("{start_ts}") {
        return Err(FetchError::BadTemplate("{start}"));
    }
    if !template.contains("{end}") && !template.contains("{end_ts}") {
        return Err(FetchError::BadTemplate("{end}"));
    }
    let ts = |d: NaiveDate| d.and_hms_opt(0, 0, 0).unwrap().and_utc().timestamp().to_string();
    Ok(template
        .replace("{ticker}", ticker)
        .replace("{start_ts}", &ts(start))
        .replace("{end_ts}", &ts(end))
        .replace("{start}", &start.format("%Y-%m-%d").to_string())
        .replace("{end}", &end.format("%Y-%m-%d").to_string()))
}

/// GET the expanded URL and return the body verbatim.
pub fn fetch_remote(ticker: &str, start: NaiveDate, end: NaiveDate, endpoint: &str) -> Result<String, FetchError> {
    let url = expand_template(endpoint, ticker, start, end)?;
    let agent: ureq::Agent = ureq::Agent::config_builder()
        .timeout_global(Some(Duration::from_secs(30)))
        .build()
        .into();
    let mut resp = agent.get(&url).call().map_err(|e| match e {
        ureq::Error::StatusCode(code) => FetchError::HttpStatus(code),
        other => FetchError::NetworkError(other.to_string()),
    })?;
    let status = resp.status().as_u16();
    if status != 200 {
        return Err(FetchError::HttpStatus(status));
    }
    resp.body_mut()
        .read_to_string()
        .map_err(|e| FetchError::NetworkError(e.to_string()))
}
