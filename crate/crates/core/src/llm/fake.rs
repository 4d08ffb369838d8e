//! A minimal in-process chat-completions server for tests and offline demos.

use std::collections::VecDeque;
use std::io::{BufRead, BufReader, Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::{self, JoinHandle};
use std::time::Duration;

use serde_json::{json, Value};

/// What the server answers to one request.
#[derive(Clone, Debug, PartialEq)]
pub enum FakeReply {
    /// 200 with this assistant message content.
    Content(String),
    /// Arbitrary status and raw body.
    Status(u16, String),
    /// Wait before answering.
    Delayed(Duration, Box<FakeReply>),
}

type Handler = dyn FnMut(&Value) -> FakeReply + Send;

pub struct FakeChatServer {
    addr: SocketAddr,
    stop: Arc<AtomicBool>,
    requests: Arc<Mutex<Vec<Value>>>,
    thread: Option<JoinHandle<()>>,
}

impl FakeChatServer {
    /// Answers with `replies` in order, then with status 500.
    pub fn with_replies(replies: impl IntoIterator<Item = FakeReply>) -> std::io::Result<Self> {
        let mut queue: VecDeque<FakeReply> = replies.into_iter().collect();
        Self::with_handler(move |_| {
            queue
                .pop_front()
                .unwrap_or_else(|| FakeReply::Status(500, "script exhausted".into()))
        })
    }

    /// Answers every request with `handler(request_json)`.
    pub fn with_handler(handler: impl FnMut(&Value) -> FakeReply + Send + 'static) -> std::io::Result<Self> {
        let listener = TcpListener::bind("127.0.0.1:0")?;
        let addr = listener.local_addr()?;
        let stop = Arc::new(AtomicBool::new(false));
        let requests = Arc::new(Mutex::new(Vec::new()));
        let handler: Arc<Mutex<Box<Handler>>> = Arc::new(Mutex::new(Box::new(handler)));
        let thread = {
            let stop = stop.clone();
            let requests = requests.clone();
            thread::spawn(move || {
                for stream in listener.incoming() {
                    if stop.load(Ordering::SeqCst) {
                        break;
                    }
                    let Ok(stream) = stream else { continue };
                    let _ = serve(stream, &requests, &handler);
                }
            })
        };
        Ok(Self {
            addr,
            stop,
            requests,
            thread: Some(thread),
        })
    }

    /// Base URL to configure as `provider_url`.
    pub fn base_url(&self) -> String {
        format!("http://{}/v1", self.addr)
    }

    /// Request bodies received so far.
    pub fn requests(&self) -> Vec<Value> {
        self.requests.lock().expect("lock").clone()
    }

    pub fn request_count(&self) -> usize {
        self.requests.lock().expect("lock").len()
    }
}

impl Drop for FakeChatServer {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        let _ = TcpStream::connect(self.addr);
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

fn serve(stream: TcpStream, requests: &Mutex<Vec<Value>>, handler: &Mutex<Box<Handler>>) -> std::io::Result<()> {
    let mut reader = BufReader::new(stream.try_clone()?);
    let mut content_length = 0usize;
    let mut line = String::new();
    reader.read_line(&mut line)?;
    if line.is_empty() {
        return Ok(());
    }
    loop {
        line.clear();
        if reader.read_line(&mut line)? == 0 || line == "\r\n" || line == "\n" {
            break;
        }
        if let Some((name, value)) = line.split_once(':') {
            if name.eq_ignore_ascii_case("content-length") {
                content_length = value.trim().parse().unwrap_or(0);
            }
        }
    }
    let mut body = vec![0u8; content_length];
    reader.read_exact(&mut body)?;
    let request: Value = serde_json::from_slice(&body).unwrap_or(Value::Null);
    requests.lock().expect("lock").push(request.clone());
    let reply = (handler.lock().expect("lock"))(&request);
    write_reply(stream, reply)
}

fn write_reply(mut stream: TcpStream, reply: FakeReply) -> std::io::Result<()> {
    let (status, body) = match reply {
        FakeReply::Delayed(wait, inner) => {
            thread::sleep(wait);
            return write_reply(stream, *inner);
        }
        FakeReply::Content(content) => (
            200,
            json!({
                "id": "fake",
                "object": "chat.completion",
                "choices": [{"index": 0, "message": {"role": "assistant", "content": content}, "finish_reason": "stop"}],
            })
            .to_string(),
        ),
        FakeReply::Status(status, body) => (status, body),
    };
    let head = format!(
        "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n",
        body.len()
    );
    stream.write_all(head.as_bytes())?;
    stream.write_all(body.as_bytes())?;
    stream.flush()
}
