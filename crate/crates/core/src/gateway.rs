//! Text-completion backends behind one `ChatPrompt -> text` interface.
//!
//! Three kinds ship here: [`HttpBackend`] for a live endpoint,
//! [`ScriptedBackend`] for canned responses, and [`ReplayBackend`], which
//! looks responses up in a [`FixtureStore`] keyed by a hash of the request.

use std::collections::{BTreeMap, VecDeque};
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Turn {
    pub role: Role,
    pub text: String,
}

/// System instructions followed by alternating user/assistant turns.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ChatPrompt {
    pub system: String,
    pub turns: Vec<Turn>,
}

impl ChatPrompt {
    pub fn new(system: impl Into<String>) -> Self {
        Self {
            system: system.into(),
            turns: Vec::new(),
        }
    }

    pub fn user(mut self, text: impl Into<String>) -> Self {
        self.turns.push(Turn {
            role: Role::User,
            text: text.into(),
        });
        self
    }

    pub fn assistant(mut self, text: impl Into<String>) -> Self {
        self.turns.push(Turn {
            role: Role::Assistant,
            text: text.into(),
        });
        self
    }

    /// Roles alternate starting from a user turn, and the last turn is a
    /// user turn.
    pub fn is_well_formed(&self) -> bool {
        let alternates = self.turns.iter().enumerate().all(|(i, t)| {
            t.role
                == if i % 2 == 0 {
                    Role::User
                } else {
                    Role::Assistant
                }
        });
        alternates && self.turns.last().is_some_and(|t| t.role == Role::User)
    }

    /// The prompt as one block of text with `SYSTEM INSTRUCTIONS:`, `USER:`
    /// and `ASSISTANT:` labels, ending with an empty assistant cue.
    pub fn to_flat_text(&self) -> String {
        let mut out = String::new();
        if !self.system.is_empty() {
            out.push_str("SYSTEM INSTRUCTIONS:\n");
            out.push_str(&self.system);
            out.push_str("\n\n");
        }
        for turn in &self.turns {
            out.push_str(match turn.role {
                Role::User => "USER:\n",
                Role::Assistant => "ASSISTANT:\n",
            });
            out.push_str(&turn.text);
            out.push_str("\n\n");
        }
        out.push_str("ASSISTANT:\n");
        out
    }

    /// Stable byte serialization used for fixture keys.
    pub fn canonical_bytes(&self) -> Vec<u8> {
        serde_json::to_vec(self).expect("prompt serializes")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRequest {
    pub prompt: ChatPrompt,
    /// Zero requests greedy decoding.
    pub temperature: f64,
    /// Upper bound on response characters, if any.
    pub max_output: Option<usize>,
}

impl GenerationRequest {
    pub fn greedy(prompt: ChatPrompt) -> Self {
        Self {
            prompt,
            temperature: 0.0,
            max_output: None,
        }
    }

    pub fn with_max_output(mut self, max_output: Option<usize>) -> Self {
        self.max_output = max_output;
        self
    }
}

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("no recorded response for fixture {key}")]
    ReplayMiss { key: String },
    #[error("response has {actual} characters, budget is {budget}")]
    BudgetExceeded { budget: usize, actual: usize },
    #[error("scripted backend has no responses left")]
    ScriptExhausted,
    #[error("unexpected response shape: {0}")]
    BadResponse(String),
    #[error("fixture store I/O: {0}")]
    Store(#[from] io::Error),
    #[error("invalid backend configuration: {0}")]
    Config(String),
}

pub trait Backend: Send + Sync {
    /// Provider label, part of every fixture key.
    fn id(&self) -> &str;
    fn model(&self) -> &str;
    fn generate(&self, request: &GenerationRequest) -> Result<String, GatewayError>;
}

impl<B: Backend + ?Sized> Backend for Arc<B> {
    fn id(&self) -> &str {
        (**self).id()
    }
    fn model(&self) -> &str {
        (**self).model()
    }
    fn generate(&self, request: &GenerationRequest) -> Result<String, GatewayError> {
        (**self).generate(request)
    }
}

impl<B: Backend + ?Sized> Backend for Box<B> {
    fn id(&self) -> &str {
        (**self).id()
    }
    fn model(&self) -> &str {
        (**self).model()
    }
    fn generate(&self, request: &GenerationRequest) -> Result<String, GatewayError> {
        (**self).generate(request)
    }
}

/// Runs one request and enforces its output budget.
pub fn complete(request: &GenerationRequest, backend: &dyn Backend) -> Result<String, GatewayError> {
    let text = backend.generate(request)?;
    if let Some(budget) = request.max_output {
        let actual = text.chars().count();
        if actual > budget {
            return Err(GatewayError::BudgetExceeded { budget, actual });
        }
    }
    Ok(text)
}

/// Returns queued responses in order.
pub struct ScriptedBackend {
    model: String,
    queue: Mutex<VecDeque<String>>,
}

impl ScriptedBackend {
    pub fn new<I, S>(responses: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self {
            model: "scripted".into(),
            queue: Mutex::new(responses.into_iter().map(Into::into).collect()),
        }
    }
}

impl Backend for ScriptedBackend {
    fn id(&self) -> &str {
        "scripted"
    }
    fn model(&self) -> &str {
        &self.model
    }
    fn generate(&self, _request: &GenerationRequest) -> Result<String, GatewayError> {
        self.queue
            .lock()
            .expect("scripted queue poisoned")
            .pop_front()
            .ok_or(GatewayError::ScriptExhausted)
    }
}

type Responder = dyn Fn(&GenerationRequest) -> Result<String, GatewayError> + Send + Sync;

/// Answers each request with a function of the request. Unlike
/// [`ScriptedBackend`] the answer does not depend on call order, so it stays
/// deterministic under concurrent calls.
pub struct FnBackend {
    model: String,
    responder: Box<Responder>,
}

impl FnBackend {
    pub fn new<F>(responder: F) -> Self
    where
        F: Fn(&GenerationRequest) -> Result<String, GatewayError> + Send + Sync + 'static,
    {
        Self {
            model: "function".into(),
            responder: Box::new(responder),
        }
    }
}

impl Backend for FnBackend {
    fn id(&self) -> &str {
        "function"
    }
    fn model(&self) -> &str {
        &self.model
    }
    fn generate(&self, request: &GenerationRequest) -> Result<String, GatewayError> {
        (self.responder)(request)
    }
}

/// Hash identifying one request to one model.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FixtureKey(pub String);

impl std::fmt::Display for FixtureKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl FixtureKey {
    /// SHA-256 over (provider, model, temperature, canonical prompt).
    pub fn for_request(provider: &str, model: &str, request: &GenerationRequest) -> Self {
        #[derive(Serialize)]
        struct KeyMaterial<'a> {
            backend: &'a str,
            model: &'a str,
            temperature: f64,
            prompt: &'a ChatPrompt,
        }
        let material = serde_json::to_vec(&KeyMaterial {
            backend: provider,
            model,
            temperature: request.temperature,
            prompt: &request.prompt,
        })
        .expect("key material serializes");
        FixtureKey(hex::encode(Sha256::digest(material)))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixtureEntry {
    pub backend: String,
    pub model: String,
    /// First characters of the final user turn, for humans browsing the index.
    pub preview: String,
}

#[derive(Debug, Default, Serialize, Deserialize)]
struct FixtureIndex {
    version: u32,
    entries: BTreeMap<FixtureKey, FixtureEntry>,
}

const INDEX_FILE: &str = "index.json";
const INDEX_VERSION: u32 = 1;

/// Recorded responses: one `<hash>.txt` file per fixture plus `index.json`.
///
/// Reads are concurrent; writes are serialized and go straight to disk.
pub struct FixtureStore {
    dir: Option<PathBuf>,
    responses: RwLock<BTreeMap<FixtureKey, String>>,
    index: Mutex<FixtureIndex>,
}

impl FixtureStore {
    pub fn in_memory() -> Self {
        Self {
            dir: None,
            responses: RwLock::default(),
            index: Mutex::new(FixtureIndex {
                version: INDEX_VERSION,
                ..Default::default()
            }),
        }
    }

    /// Opens (or creates) a store directory and loads every fixture.
    pub fn open(dir: impl AsRef<Path>) -> io::Result<Self> {
        let dir = dir.as_ref().to_path_buf();
        fs::create_dir_all(&dir)?;
        let index_path = dir.join(INDEX_FILE);
        let index: FixtureIndex = if index_path.exists() {
            serde_json::from_slice(&fs::read(&index_path)?)
                .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))?
        } else {
            FixtureIndex {
                version: INDEX_VERSION,
                ..Default::default()
            }
        };
        if index.version != INDEX_VERSION {
            return Err(io::Error::new(
                io::ErrorKind::InvalidData,
                format!("fixture index version {} is not {INDEX_VERSION}", index.version),
            ));
        }
        let mut responses = BTreeMap::new();
        for key in index.entries.keys() {
            let text = fs::read_to_string(dir.join(format!("{key}.txt")))?;
            responses.insert(key.clone(), text);
        }
        Ok(Self {
            dir: Some(dir),
            responses: RwLock::new(responses),
            index: Mutex::new(index),
        })
    }

    pub fn dir(&self) -> Option<&Path> {
        self.dir.as_deref()
    }

    pub fn get(&self, key: &FixtureKey) -> Option<String> {
        self.responses.read().expect("store poisoned").get(key).cloned()
    }

    pub fn len(&self) -> usize {
        self.responses.read().expect("store poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn entries(&self) -> Vec<(FixtureKey, FixtureEntry)> {
        let index = self.index.lock().expect("store poisoned");
        index.entries.iter().map(|(k, v)| (k.clone(), v.clone())).collect()
    }

    pub fn insert(&self, key: FixtureKey, entry: FixtureEntry, response: String) -> io::Result<()> {
        let mut index = self.index.lock().expect("store poisoned");
        if let Some(dir) = &self.dir {
            fs::write(dir.join(format!("{key}.txt")), &response)?;
        }
        index.entries.insert(key.clone(), entry);
        if let Some(dir) = &self.dir {
            let bytes = serde_json::to_vec_pretty(&*index).expect("index serializes");
            fs::write(dir.join(INDEX_FILE), bytes)?;
        }
        self.responses.write().expect("store poisoned").insert(key, response);
        Ok(())
    }

    /// Records the response for `request` as answered by (provider, model).
    pub fn record(
        &self,
        provider: &str,
        model: &str,
        request: &GenerationRequest,
        response: impl Into<String>,
    ) -> io::Result<FixtureKey> {
        let key = FixtureKey::for_request(provider, model, request);
        let entry = FixtureEntry {
            backend: provider.to_string(),
            model: model.to_string(),
            preview: preview(&request.prompt),
        };
        self.insert(key.clone(), entry, response.into())?;
        Ok(key)
    }

    /// Writes the prompt of a missed request under `pending/` so a response
    /// can be supplied later.
    fn note_pending(&self, key: &FixtureKey, request: &GenerationRequest) -> io::Result<()> {
        let Some(dir) = &self.dir else {
            return Ok(());
        };
        let pending = dir.join("pending");
        fs::create_dir_all(&pending)?;
        fs::write(pending.join(format!("{key}.prompt.txt")), request.prompt.to_flat_text())
    }
}

fn preview(prompt: &ChatPrompt) -> String {
    let last = prompt.turns.last().map(|t| t.text.as_str()).unwrap_or_default();
    last.chars().take(80).collect()
}

/// Looks responses up in a fixture store; on a miss either fails (strict) or
/// asks a live backend and records the answer.
pub struct ReplayBackend {
    provider: String,
    model: String,
    store: Arc<FixtureStore>,
    recorder: Option<Box<dyn Backend>>,
}

impl ReplayBackend {
    pub fn strict(provider: impl Into<String>, model: impl Into<String>, store: Arc<FixtureStore>) -> Self {
        Self {
            provider: provider.into(),
            model: model.into(),
            store,
            recorder: None,
        }
    }

    /// Replays when possible and records misses from `live`.
    pub fn recording(live: Box<dyn Backend>, store: Arc<FixtureStore>) -> Self {
        Self {
            provider: live.id().to_string(),
            model: live.model().to_string(),
            store,
            recorder: Some(live),
        }
    }

    pub fn store(&self) -> &FixtureStore {
        &self.store
    }
}

impl Backend for ReplayBackend {
    fn id(&self) -> &str {
        &self.provider
    }
    fn model(&self) -> &str {
        &self.model
    }
    fn generate(&self, request: &GenerationRequest) -> Result<String, GatewayError> {
        let key = FixtureKey::for_request(&self.provider, &self.model, request);
        if let Some(text) = self.store.get(&key) {
            return Ok(text);
        }
        match &self.recorder {
            Some(live) => {
                let text = live.generate(request)?;
                self.store.record(&self.provider, &self.model, request, text.clone())?;
                Ok(text)
            }
            None => {
                self.store.note_pending(&key, request)?;
                Err(GatewayError::ReplayMiss { key: key.0 })
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HttpStyle {
    /// `{"model", "messages": [{role, content}], "temperature"}` bodies.
    #[default]
    Chat,
    /// `{"model", "prompt", "temperature"}` with the prompt flattened to one
    /// labelled block of text.
    Flat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HttpConfig {
    pub provider: String,
    pub url: String,
    pub model: String,
    #[serde(default)]
    pub style: HttpStyle,
    /// JSON pointer to the response text, e.g. `/choices/0/message/content`.
    pub response_pointer: String,
    /// Environment variable holding a bearer token.
    #[serde(default)]
    pub api_key_env: Option<String>,
}

pub struct HttpBackend {
    config: HttpConfig,
    agent: ureq::Agent,
}

impl HttpBackend {
    pub fn new(config: HttpConfig) -> Result<Self, GatewayError> {
        if config.url.is_empty() {
            return Err(GatewayError::Config("empty url".into()));
        }
        if !config.response_pointer.is_empty() && !config.response_pointer.starts_with('/') {
            return Err(GatewayError::Config(format!(
                "response pointer {:?} must start with '/'",
                config.response_pointer
            )));
        }
        Ok(Self {
            config,
            agent: ureq::Agent::new_with_defaults(),
        })
    }

    /// The JSON body sent for `request`.
    pub fn request_body(&self, request: &GenerationRequest) -> serde_json::Value {
        let mut body = match self.config.style {
            HttpStyle::Chat => {
                let mut messages = Vec::new();
                if !request.prompt.system.is_empty() {
                    messages.push(serde_json::json!({"role": "system", "content": request.prompt.system}));
                }
                for t in &request.prompt.turns {
                    messages.push(serde_json::json!({"role": t.role, "content": t.text}));
                }
                serde_json::json!({"model": self.config.model, "messages": messages})
            }
            HttpStyle::Flat => serde_json::json!({
                "model": self.config.model,
                "prompt": request.prompt.to_flat_text(),
            }),
        };
        body["temperature"] = serde_json::json!(request.temperature);
        if let Some(max) = request.max_output {
            body["max_tokens"] = serde_json::json!(max);
        }
        body
    }

    /// Pulls the response text out of a decoded reply.
    pub fn extract_text(&self, reply: &serde_json::Value) -> Result<String, GatewayError> {
        reply
            .pointer(&self.config.response_pointer)
            .and_then(serde_json::Value::as_str)
            .map(str::to_string)
            .ok_or_else(|| {
                GatewayError::BadResponse(format!(
                    "no string at {} in reply",
                    self.config.response_pointer
                ))
            })
    }
}

impl Backend for HttpBackend {
    fn id(&self) -> &str {
        &self.config.provider
    }
    fn model(&self) -> &str {
        &self.config.model
    }
    fn generate(&self, request: &GenerationRequest) -> Result<String, GatewayError> {
        let mut call = self.agent.post(&self.config.url);
        if let Some(var) = &self.config.api_key_env {
            let key = std::env::var(var)
                .map_err(|_| GatewayError::Config(format!("environment variable {var} is not set")))?;
            call = call.header("Authorization", &format!("Bearer {key}"));
        }
        let reply: serde_json::Value = call
            .send_json(self.request_body(request))
            .map_err(|e| GatewayError::Transport(e.to_string()))?
            .body_mut()
            .read_json()
            .map_err(|e| GatewayError::BadResponse(e.to_string()))?;
        self.extract_text(&reply)
    }
}
