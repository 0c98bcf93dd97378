//! A tiny scripted HTTP/1.1 server for wire-level tests: it answers each
//! incoming request with the next scripted response, records everything it
//! received, and closes the connection after every exchange.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::thread::JoinHandle;

pub struct StubResponse {
    pub status: u16,
    pub body: String,
}

impl StubResponse {
    pub fn new(status: u16, body: impl Into<String>) -> Self {
        Self {
            status,
            body: body.into(),
        }
    }

    pub fn ok(body: impl Into<String>) -> Self {
        Self::new(200, body)
    }
}

pub struct ReceivedRequest {
    pub method: String,
    pub path: String,
    /// Header names lowercased; values trimmed.
    pub headers: Vec<(String, String)>,
    pub body: String,
}

impl ReceivedRequest {
    pub fn header(&self, name: &str) -> Option<&str> {
        let name = name.to_ascii_lowercase();
        self.headers
            .iter()
            .find(|(n, _)| *n == name)
            .map(|(_, v)| v.as_str())
    }
}

pub struct StubServer {
    pub base_url: String,
    handle: JoinHandle<Vec<ReceivedRequest>>,
}

impl StubServer {
    /// Wait for every scripted exchange to complete and hand back the
    /// requests in arrival order. Panics if the serving thread panicked.
    pub fn finish(self) -> Vec<ReceivedRequest> {
        self.handle.join().expect("stub server thread panicked")
    }
}

/// Start a stub bound to an ephemeral localhost port. The server stops
/// listening once every scripted response has been consumed.
pub fn serve(responses: Vec<StubResponse>) -> StubServer {
    let listener = TcpListener::bind("127.0.0.1:0").expect("bind ephemeral port");
    let addr = listener.local_addr().expect("local addr");
    let handle = std::thread::spawn(move || {
        let mut seen = Vec::new();
        for scripted in responses {
            let (stream, _) = listener.accept().expect("accept connection");
            let mut reader = BufReader::new(stream);

            let mut request_line = String::new();
            reader.read_line(&mut request_line).expect("request line");
            let mut parts = request_line.split_whitespace();
            let method = parts.next().unwrap_or_default().to_owned();
            let path = parts.next().unwrap_or_default().to_owned();

            let mut headers = Vec::new();
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).expect("header line");
                let line = line.trim_end();
                if line.is_empty() {
                    break;
                }
                if let Some((name, value)) = line.split_once(':') {
                    headers.push((name.trim().to_ascii_lowercase(), value.trim().to_owned()));
                }
            }
            let length: usize = headers
                .iter()
                .find(|(n, _)| n == "content-length")
                .and_then(|(_, v)| v.parse().ok())
                .unwrap_or(0);
            let mut body = vec![0u8; length];
            reader.read_exact(&mut body).expect("request body");
            let body = String::from_utf8(body).expect("request body is UTF-8");
            seen.push(ReceivedRequest {
                method,
                path,
                headers,
                body,
            });

            let reason = match scripted.status {
                200 => "OK",
                500 => "Internal Server Error",
                _ => "Scripted",
            };
            let reply = format!(
                "HTTP/1.1 {} {}\r\nContent-Type: application/json\r\n\
                 Content-Length: {}\r\nConnection: close\r\n\r\n{}",
                scripted.status,
                reason,
                scripted.body.len(),
                scripted.body
            );
            let mut stream = reader.into_inner();
            stream.write_all(reply.as_bytes()).expect("write response");
            stream.flush().expect("flush response");
        }
        seen
    });
    StubServer {
        base_url: format!("http://{addr}"),
        handle,
    }
}
