//! Canned HTTP/1.1 responder for provider and client tests.

use std::io::{Read, Write};
use std::net::TcpListener;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

/// Serves the given `(status, body)` pairs in request order, repeating the
/// last one once the script runs out. Returns the base URL (no trailing
/// slash) and a request counter.
pub fn serve(responses: Vec<(u16, String)>) -> (String, Arc<AtomicUsize>) {
    let listener = TcpListener::bind("127.0.0.1:0").expect("bind test server");
    let addr = listener.local_addr().unwrap();
    let hits = Arc::new(AtomicUsize::new(0));
    let hits_thread = hits.clone();
    std::thread::spawn(move || {
        let mut served = 0usize;
        for stream in listener.incoming() {
            let Ok(mut stream) = stream else { break };
            if read_request(&mut stream).is_none() {
                continue;
            }
            hits_thread.fetch_add(1, Ordering::SeqCst);
            let (status, body) = responses.get(served).or_else(|| responses.last()).cloned().unwrap_or((200, String::new()));
            served += 1;
            let reason = if status == 200 { "OK" } else { "ERR" };
            let reply = format!(
                "HTTP/1.1 {status} {reason}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                body.len()
            );
            let _ = stream.write_all(reply.as_bytes());
        }
    });
    (format!("http://{addr}"), hits)
}

/// Reads one request (headers plus a Content-Length body). Returns the raw
/// request text, or None on connection errors.
fn read_request(stream: &mut std::net::TcpStream) -> Option<String> {
    let mut buf = vec![0u8; 65536];
    let mut read = 0usize;
    let body_start = loop {
        match stream.read(&mut buf[read..]) {
            Ok(0) => return None,
            Ok(n) => {
                read += n;
                if let Some(pos) = buf[..read].windows(4).position(|w| w == b"\r\n\r\n") {
                    break pos + 4;
                }
                if read == buf.len() {
                    return None;
                }
            }
            Err(_) => return None,
        }
    };
    let headers = String::from_utf8_lossy(&buf[..body_start]).to_string();
    let content_length = headers
        .lines()
        .find_map(|l| l.to_ascii_lowercase().strip_prefix("content-length:").map(|v| v.trim().parse::<usize>().unwrap_or(0)))
        .unwrap_or(0);
    while read < body_start + content_length {
        match stream.read(&mut buf[read..]) {
            Ok(0) => break,
            Ok(n) => read += n,
            Err(_) => break,
        }
    }
    Some(String::from_utf8_lossy(&buf[..read]).to_string())
}
