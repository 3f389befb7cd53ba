//! Local stand-ins for the remote services, used by tests, benches and
//! offline demos: a small HTTP server, a SPARQL endpoint that replays canned
//! answer sets, and a synthetic SciQA-style corpus.

mod synthetic;

use std::collections::BTreeMap;
use std::io;
use std::net::SocketAddr;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::Duration;

use serde_json::Value;

pub use synthetic::{memorization_fixture, sciqa_like, MemorizationFixture, SyntheticPair, TEMPLATE_COUNT};

use crate::answer::AnswerSet;
use crate::endpoint::{ExecuteError, QueryExecutor, RESULTS_MEDIA_TYPE};
use crate::sparql::{clean, validate};

#[derive(Debug, Clone)]
pub struct FixtureRequest {
    pub method: String,
    pub url: String,
    pub body: String,
}

impl FixtureRequest {
    /// First value of `name` in a form-encoded body or the query string.
    pub fn param(&self, name: &str) -> Option<String> {
        let query = self.url.split_once('?').map(|(_, q)| q).unwrap_or("");
        form_urlencoded::parse(self.body.as_bytes())
            .chain(form_urlencoded::parse(query.as_bytes()))
            .find(|(k, _)| k == name)
            .map(|(_, v)| v.into_owned())
    }

    pub fn json(&self) -> Option<Value> {
        serde_json::from_str(&self.body).ok()
    }
}

#[derive(Debug, Clone)]
pub struct FixtureResponse {
    pub status: u16,
    pub content_type: String,
    pub body: Vec<u8>,
    /// Sleep before replying; used to provoke client timeouts.
    pub delay: Option<Duration>,
}

impl FixtureResponse {
    pub fn json(status: u16, value: &Value) -> Self {
        Self { status, content_type: "application/json".into(), body: value.to_string().into_bytes(), delay: None }
    }

    pub fn text(status: u16, body: impl Into<String>) -> Self {
        Self { status, content_type: "text/plain".into(), body: body.into().into_bytes(), delay: None }
    }

    pub fn delayed(mut self, delay: Duration) -> Self {
        self.delay = Some(delay);
        self
    }
}

type Handler = dyn Fn(&FixtureRequest) -> FixtureResponse + Send + Sync;

/// HTTP server on an ephemeral localhost port. Counts requests; stops when
/// dropped.
pub struct FixtureServer {
    addr: SocketAddr,
    hits: Arc<AtomicUsize>,
    stop: Arc<AtomicBool>,
    workers: Vec<JoinHandle<()>>,
}

const WORKERS: usize = 4;

impl FixtureServer {
    pub fn start<F>(handler: F) -> io::Result<Self>
    where
        F: Fn(&FixtureRequest) -> FixtureResponse + Send + Sync + 'static,
    {
        let server = tiny_http::Server::http("127.0.0.1:0").map_err(io::Error::other)?;
        let addr = server.server_addr().to_ip().ok_or_else(|| io::Error::other("fixture server has no IP address"))?;
        let server = Arc::new(server);
        let handler: Arc<Handler> = Arc::new(handler);
        let hits = Arc::new(AtomicUsize::new(0));
        let stop = Arc::new(AtomicBool::new(false));
        let workers = (0..WORKERS)
            .map(|_| {
                let (server, handler, hits, stop) = (server.clone(), handler.clone(), hits.clone(), stop.clone());
                std::thread::spawn(move || {
                    while !stop.load(Ordering::SeqCst) {
                        match server.recv_timeout(Duration::from_millis(20)) {
                            Ok(Some(req)) => {
                                hits.fetch_add(1, Ordering::SeqCst);
                                serve_one(req, handler.as_ref());
                            }
                            Ok(None) => {}
                            Err(e) => log::debug!("fixture server: {e}"),
                        }
                    }
                })
            })
            .collect();
        Ok(Self { addr, hits, stop, workers })
    }

    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }

    /// Requests received so far.
    pub fn hits(&self) -> usize {
        self.hits.load(Ordering::SeqCst)
    }
}

impl Drop for FixtureServer {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        for w in self.workers.drain(..) {
            let _ = w.join();
        }
    }
}

fn serve_one(mut req: tiny_http::Request, handler: &Handler) {
    let mut body = String::new();
    let _ = req.as_reader().read_to_string(&mut body);
    let request = FixtureRequest { method: req.method().as_str().to_string(), url: req.url().to_string(), body };
    let reply = handler(&request);
    if let Some(d) = reply.delay {
        std::thread::sleep(d);
    }
    let header =
        tiny_http::Header::from_bytes("Content-Type", reply.content_type.as_bytes()).expect("static header is valid");
    let response = tiny_http::Response::from_data(reply.body).with_status_code(reply.status).with_header(header);
    let _ = req.respond(response);
}

/// SPARQL endpoint over a fixed table of cleaned query → answer set.
/// Queries with hard validation issues are rejected as syntax errors;
/// unknown queries return an empty result.
#[derive(Debug, Clone, Default)]
pub struct FixtureEndpoint {
    answers: BTreeMap<String, AnswerSet>,
}

impl FixtureEndpoint {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, query: &str, answers: AnswerSet) {
        self.answers.insert(clean(query), answers);
    }

    pub fn len(&self) -> usize {
        self.answers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.answers.is_empty()
    }

    pub fn lookup(&self, query: &str) -> Result<AnswerSet, ExecuteError> {
        let query = clean(query);
        let report = validate(&query);
        if !report.ok {
            let codes: Vec<&str> = report.issues.iter().map(|i| i.code.as_str()).collect();
            return Err(ExecuteError::SyntaxRejected(format!("parse error: {}", codes.join(", "))));
        }
        Ok(self.answers.get(&query).cloned().unwrap_or_else(|| AnswerSet::empty(Vec::new())))
    }

    /// Answer one SPARQL protocol request.
    pub fn respond(&self, request: &FixtureRequest) -> FixtureResponse {
        let Some(query) = request.param("query") else {
            return FixtureResponse::text(400, "missing `query` parameter");
        };
        match self.lookup(&query) {
            Ok(answers) => FixtureResponse {
                status: 200,
                content_type: RESULTS_MEDIA_TYPE.into(),
                body: answers.to_results_json().to_string().into_bytes(),
                delay: None,
            },
            Err(e) => FixtureResponse::text(400, e.to_string()),
        }
    }

    /// Serve over HTTP on a local port.
    pub fn serve(self) -> io::Result<FixtureServer> {
        FixtureServer::start(move |req| self.respond(req))
    }
}

impl QueryExecutor for FixtureEndpoint {
    fn execute(&self, query: &str) -> Result<AnswerSet, ExecuteError> {
        self.lookup(query)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::endpoint::{EndpointConfig, ExecuteErrorKind, SparqlEndpoint};

    #[test]
    fn server_counts_hits_and_replies() {
        let server = FixtureServer::start(|req| FixtureResponse::text(200, req.method.clone())).unwrap();
        assert_eq!(server.hits(), 0);
        let agent = crate::http::agent(Duration::from_secs(5));
        let mut resp = agent.get(&server.url()).call().unwrap();
        assert_eq!(resp.body_mut().read_to_string().unwrap(), "GET");
        assert_eq!(server.hits(), 1);
    }

    #[test]
    fn endpoint_over_http() {
        let mut fx = FixtureEndpoint::new();
        let q = "SELECT ?x WHERE {\n ?x a orkgc:Dataset .\n}";
        fx.insert(q, AnswerSet::column("x", ["http://orkg.org/orkg/resource/R1"]));
        let server = fx.serve().unwrap();
        let client = SparqlEndpoint::new(EndpointConfig::new(server.url()));
        assert_eq!(client.execute(q).unwrap().len(), 1);
        let none = client.execute("SELECT ?y WHERE { ?y a orkgc:Model }").unwrap();
        assert!(none.is_null());
        let bad = client.execute("SELECT ?x WHERE { ?x a orkgc:Dataset").unwrap_err();
        assert_eq!(bad.kind(), ExecuteErrorKind::SyntaxRejected);
        assert_eq!(server.hits(), 3);
    }

    #[test]
    fn server_errors_are_retried_then_transport() {
        let server = FixtureServer::start(|_| FixtureResponse::text(503, "busy")).unwrap();
        let mut cfg = EndpointConfig::new(server.url());
        cfg.retry_base_delay = Duration::ZERO;
        cfg.max_retries = 2;
        let err = SparqlEndpoint::new(cfg).execute("ASK { ?a ?b ?c }").unwrap_err();
        assert_eq!(err.kind(), ExecuteErrorKind::Transport);
        assert_eq!(server.hits(), 3);
    }

    #[test]
    fn virtuoso_style_syntax_error() {
        let server = FixtureServer::start(|_| {
            FixtureResponse::text(500, "Virtuoso 37000 Error SP030: SPARQL compiler, line 3: syntax error at '}'")
        })
        .unwrap();
        let err = SparqlEndpoint::new(EndpointConfig::new(server.url())).execute("ASK { ?a ?b ?c }").unwrap_err();
        assert_eq!(err.kind(), ExecuteErrorKind::SyntaxRejected);
        assert_eq!(server.hits(), 1);
    }

    #[test]
    fn slow_endpoint_times_out() {
        let server =
            FixtureServer::start(|_| FixtureResponse::text(200, "{}").delayed(Duration::from_millis(400))).unwrap();
        let mut cfg = EndpointConfig::new(server.url());
        cfg.timeout = Duration::from_millis(100);
        cfg.max_retries = 0;
        let err = SparqlEndpoint::new(cfg).execute("ASK { ?a ?b ?c }").unwrap_err();
        assert_eq!(err.kind(), ExecuteErrorKind::Timeout);
    }

    #[test]
    fn garbage_payload_is_malformed() {
        let server = FixtureServer::start(|_| FixtureResponse::text(200, "<html>oops</html>")).unwrap();
        let err =
            SparqlEndpoint::new(EndpointConfig::new(server.url())).execute("SELECT ?x WHERE { ?x ?p ?o }").unwrap_err();
        assert_eq!(err.kind(), ExecuteErrorKind::MalformedResults);
    }
}
