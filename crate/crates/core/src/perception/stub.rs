//! Local chat server speaking the same request/response contract as the
//! external language-model service. Used by tests and offline demos.

use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;

use serde_json::{json, Value};
use tiny_http::{Header, Response, Server};

#[derive(Clone, Debug, PartialEq)]
pub struct RecordedRequest {
    pub authorization: Option<String>,
    pub body: Value,
}

/// Serves canned replies in order, repeating the last one. Stops on drop.
pub struct StubChatServer {
    server: Arc<Server>,
    url: String,
    requests: Arc<Mutex<Vec<RecordedRequest>>>,
    handle: Option<JoinHandle<()>>,
}

impl StubChatServer {
    pub fn start(replies: Vec<String>) -> Self {
        Self::spawn(replies, 200)
    }

    /// Answers every request with an empty body and `status`.
    pub fn start_with_status(status: u16) -> Self {
        Self::spawn(Vec::new(), status)
    }

    fn spawn(replies: Vec<String>, status: u16) -> Self {
        let server = Arc::new(Server::http("127.0.0.1:0").expect("bind stub server"));
        let addr = server.server_addr().to_ip().expect("tcp listener");
        let url = format!("http://{addr}/v1/chat");
        let requests = Arc::new(Mutex::new(Vec::new()));
        let handle = {
            let server = Arc::clone(&server);
            let requests = Arc::clone(&requests);
            std::thread::spawn(move || serve(&server, &replies, status, &requests))
        };
        Self {
            server,
            url,
            requests,
            handle: Some(handle),
        }
    }

    pub fn url(&self) -> String {
        self.url.clone()
    }

    pub fn requests(&self) -> Vec<RecordedRequest> {
        self.requests.lock().unwrap().clone()
    }
}

fn serve(server: &Server, replies: &[String], status: u16, log: &Mutex<Vec<RecordedRequest>>) {
    let mut served = 0usize;
    for mut req in server.incoming_requests() {
        let mut text = String::new();
        let _ = req.as_reader().read_to_string(&mut text);
        let authorization = req
            .headers()
            .iter()
            .find(|h| h.field.equiv("Authorization"))
            .map(|h| h.value.to_string());
        log.lock().unwrap().push(RecordedRequest {
            authorization,
            body: serde_json::from_str(&text).unwrap_or(Value::Null),
        });
        let response = if status == 200 {
            let reply = replies
                .get(served.min(replies.len().saturating_sub(1)))
                .cloned()
                .unwrap_or_default();
            served += 1;
            let header = Header::from_bytes("Content-Type", "application/json").unwrap();
            Response::from_string(json!({ "content": reply }).to_string()).with_header(header)
        } else {
            Response::from_string(String::new()).with_status_code(status)
        };
        let _ = req.respond(response);
    }
}

impl Drop for StubChatServer {
    fn drop(&mut self) {
        self.server.unblock();
        if let Some(h) = self.handle.take() {
            let _ = h.join();
        }
    }
}
