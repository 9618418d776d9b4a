use std::io::{BufRead, BufReader, Write};
use std::net::TcpListener;
use std::thread;

use chrono::NaiveDate;
use stockgan_core::ingest::{fetch_remote, parse_csv, FetchError};

const BODY: &str = "Date,Open,High,Low,Close,Adj Close,Volume\n\
2018-01-02,10,11,9,10.5,10.5,100\n\
2018-01-03,10.5,12,10,11.5,11.5,120\n";

/// Serve one request with a canned status line and body; returns the base URL
/// and a handle yielding the request line.
fn serve_once(status: &'static str, body: &'static str) -> (String, thread::JoinHandle<String>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    let handle = thread::spawn(move || {
        let (mut stream, _) = listener.accept().unwrap();
        let mut reader = BufReader::new(stream.try_clone().unwrap());
        let mut request_line = String::new();
        reader.read_line(&mut request_line).unwrap();
        let mut line = String::new();
        while reader.read_line(&mut line).unwrap() > 2 {
            line.clear();
        }
        write!(
            stream,
            "HTTP/1.1 {status}\r\nContent-Type: text/csv\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
            body.len()
        )
        .unwrap();
        request_line
    });
    (format!("http://{addr}"), handle)
}

fn dates() -> (NaiveDate, NaiveDate) {
    (
        NaiveDate::from_ymd_opt(2018, 1, 1).unwrap(),
        NaiveDate::from_ymd_opt(2018, 12, 31).unwrap(),
    )
}

#[test]
fn fetch_returns_body_that_parses() {
    let (base, handle) = serve_once("200 OK", BODY);
    let (start, end) = dates();
    let raw = fetch_remote(
        "^DJI",
        start,
        end,
        &format!("{base}/q/{{ticker}}?from={{start}}&to={{end}}"),
    )
    .unwrap();
    assert_eq!(raw, BODY);
    let request = handle.join().unwrap();
    assert!(request.contains("/q/^DJI?from=2018-01-01&to=2018-12-31"), "{request}");
    let parsed = parse_csv(&raw, "^DJI").unwrap();
    assert_eq!(parsed.series.len(), 2);
}

#[test]
fn http_error_status_is_reported() {
    let (base, handle) = serve_once("404 Not Found", "missing");
    let (start, end) = dates();
    let err = fetch_remote(
        "NOPE",
        start,
        end,
        &format!("{base}/{{ticker}}?a={{start_ts}}&b={{end_ts}}"),
    )
    .unwrap_err();
    assert!(matches!(err, FetchError::HttpStatus(404)), "{err:?}");
    handle.join().unwrap();
}

#[test]
fn unreachable_host_is_network_error() {
    let port = {
        let l = TcpListener::bind("127.0.0.1:0").unwrap();
        l.local_addr().unwrap().port()
    };
    let (start, end) = dates();
    let err = fetch_remote(
        "X",
        start,
        end,
        &format!("http://127.0.0.1:{port}/{{ticker}}/{{start}}/{{end}}"),
    )
    .unwrap_err();
    assert!(matches!(err, FetchError::NetworkError(_)), "{err:?}");
}
