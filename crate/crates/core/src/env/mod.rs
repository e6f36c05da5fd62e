//! Step environment over newline-delimited JSON.
//!
//! Every line is one message `{type, session, seq, payload}` with `type` one
//! of `reset`, `step`, `reply`, `error`. Matrices travel as
//! `{rows, cols, data}` with `data` row-major. The schema is shipped in
//! `schema/env-protocol-v1.json`.
//!
//! A connection owns at most one session. `reset` creates it (or restarts it
//! with a new episode), and each `step` advances it by one decision step.
//! Sequence numbers must increase; resending the last request with the same
//! `seq` returns the cached reply without touching the session.

mod client;
mod server;

pub use client::{Client, ClientError};
pub use server::{serve_stdio, serve_stream, serve_tcp};

use crate::channel::{draw_snr, ChannelRealization};
use crate::mac::{map_raw_action, IcwMatrix, NetworkConfig, PolicyError, PolicyMatrix, RawAction};
use crate::sim::{rng_stream, Observation, Simulator, StepMetrics, TraceEvent};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::collections::BTreeMap;

pub const PROTOCOL_VERSION: u32 = 1;

/// Random stream reserved for channel draws; simulator streams start at zero.
pub const CHANNEL_STREAM: u64 = 1 << 32;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MessageType {
    Reset,
    Step,
    Reply,
    Error,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Message {
    #[serde(rename = "type")]
    pub kind: MessageType,
    #[serde(default)]
    pub session: Option<String>,
    pub seq: u64,
    #[serde(default)]
    pub payload: Value,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResetRequest {
    /// Name in the server's catalog; the server's default when omitted.
    #[serde(default)]
    pub config: Option<String>,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepRequest {
    pub action: RawAction,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResetReply {
    pub protocol_version: u32,
    pub episode: u64,
    pub num_stas: usize,
    pub num_links: usize,
    pub decision_steps: usize,
    pub observation: Observation,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepInfo {
    #[serde(flatten)]
    pub metrics: StepMetrics,
    /// Stations whose allocation clipped to zero and fell back to uniform.
    pub degenerate_rows: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepReply {
    /// Steps taken in the episode, this one included.
    pub step: usize,
    pub observation: Observation,
    /// Delivered throughput summed over links, Mbps.
    pub reward: f64,
    pub done: bool,
    pub info: StepInfo,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    Malformed,
    UnknownConfig,
    NoSession,
    WrongSession,
    EpisodeDone,
    Shape,
    InvalidAction,
    Sequence,
    Internal,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorReply {
    pub code: ErrorCode,
    pub message: String,
}

impl ErrorReply {
    fn new(code: ErrorCode, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }
}

/// Named network configurations a client may reset into.
#[derive(Clone, Debug, Default)]
pub struct ConfigCatalog {
    configs: BTreeMap<String, NetworkConfig>,
    default: Option<String>,
}

impl ConfigCatalog {
    /// A catalog whose only entry, `name`, is also the default.
    pub fn single(name: &str, cfg: NetworkConfig) -> Self {
        let mut cat = Self::default();
        cat.insert(name, cfg);
        cat
    }

    /// Adds a config; the first one inserted becomes the default.
    pub fn insert(&mut self, name: &str, cfg: NetworkConfig) {
        self.default.get_or_insert_with(|| name.to_owned());
        self.configs.insert(name.to_owned(), cfg);
    }

    pub fn get(&self, name: Option<&str>) -> Option<&NetworkConfig> {
        self.configs.get(name.or(self.default.as_deref())?)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.configs.keys().map(String::as_str)
    }
}

/// One episode's worth of environment state.
pub struct Session {
    pub id: String,
    pub episode: u64,
    pub step: usize,
    cfg: NetworkConfig,
    sim: Simulator,
    channel_rng: ChaCha8Rng,
    /// Channel in force for the next step; its SNR is the last observation's `g`.
    channel: ChannelRealization,
    pub last_obs: Observation,
}

impl Session {
    pub fn new(id: String, episode: u64, cfg: &NetworkConfig, seed: u64) -> Result<Self, ErrorReply> {
        let mut channel_rng = rng_stream(seed, CHANNEL_STREAM);
        let channel = draw_snr(cfg, &mut channel_rng)
            .map_err(|e| ErrorReply::new(ErrorCode::UnknownConfig, e.to_string()))?;
        let last_obs = Observation::new(channel.snr_db.clone(), &vec![0.0; cfg.num_links()]);
        Ok(Self {
            id,
            episode,
            step: 0,
            cfg: cfg.clone(),
            sim: Simulator::new(cfg, seed),
            channel_rng,
            channel,
            last_obs,
        })
    }

    pub fn config(&self) -> &NetworkConfig {
        &self.cfg
    }

    pub fn is_done(&self) -> bool {
        self.step >= self.cfg.decision_steps
    }

    fn reset_reply(&self) -> ResetReply {
        ResetReply {
            protocol_version: PROTOCOL_VERSION,
            episode: self.episode,
            num_stas: self.cfg.num_stas,
            num_links: self.cfg.num_links(),
            decision_steps: self.cfg.decision_steps,
            observation: self.last_obs.clone(),
        }
    }

    /// Runs one decision step. Validation happens before any state changes.
    pub fn step(&mut self, action: &RawAction) -> Result<StepReply, ErrorReply> {
        if self.is_done() {
            return Err(ErrorReply::new(
                ErrorCode::EpisodeDone,
                format!("episode finished after {} steps; send reset", self.step),
            ));
        }
        for (name, m) in [("beta_raw", &action.beta_raw), ("w_raw", &action.w_raw)] {
            if !m.is_consistent() {
                return Err(ErrorReply::new(
                    ErrorCode::Shape,
                    format!(
                        "{name} declares {}x{} but carries {} entries; expected {}x{}",
                        m.rows(),
                        m.cols(),
                        m.as_slice().len(),
                        self.cfg.num_stas,
                        self.cfg.num_links()
                    ),
                ));
            }
        }
        let mapped = map_raw_action(action, &self.cfg).map_err(|e| match e {
            PolicyError::Shape { expected, found } => ErrorReply::new(
                ErrorCode::Shape,
                format!(
                    "action matrices must be {}x{} (stations x links), got {}x{}",
                    expected.0, expected.1, found.0, found.1
                ),
            ),
            other => ErrorReply::new(ErrorCode::InvalidAction, other.to_string()),
        })?;
        let (_, metrics) = self.advance(&mapped.policy, &mapped.icw)?;
        Ok(StepReply {
            step: self.step,
            observation: self.last_obs.clone(),
            reward: metrics.total_throughput(),
            done: self.is_done(),
            info: StepInfo {
                metrics,
                degenerate_rows: mapped.degenerate_rows,
            },
        })
    }

    /// Records simulator events from now on; see [`Simulator::enable_trace`].
    pub fn enable_trace(&mut self) {
        self.sim.enable_trace();
    }

    pub fn take_trace(&mut self) -> Vec<TraceEvent> {
        self.sim.take_trace()
    }

    /// Channel in force for the next step.
    pub fn channel(&self) -> &ChannelRealization {
        &self.channel
    }

    /// Runs one decision step with an already valid policy.
    pub fn advance(
        &mut self,
        policy: &PolicyMatrix,
        icw: &IcwMatrix,
    ) -> Result<(Observation, StepMetrics), ErrorReply> {
        if self.is_done() {
            return Err(ErrorReply::new(
                ErrorCode::EpisodeDone,
                format!("episode finished after {} steps; send reset", self.step),
            ));
        }
        // positions were accepted at reset, so later draws cannot fail
        let next_channel = draw_snr(&self.cfg, &mut self.channel_rng)
            .map_err(|e| ErrorReply::new(ErrorCode::Internal, e.to_string()))?;
        let (_, metrics) = self
            .sim
            .run_step(policy, icw, &self.channel, self.cfg.step_duration_us);
        self.channel = next_channel;
        self.step += 1;
        self.last_obs = Observation::new(self.channel.snr_db.clone(), &metrics.busy_frac);
        Ok((self.last_obs.clone(), metrics))
    }
}

/// Protocol state of one connection.
pub struct Connection<'a> {
    catalog: &'a ConfigCatalog,
    session: Option<Session>,
    last: Option<(Message, String)>,
    sessions_created: u64,
}

impl<'a> Connection<'a> {
    pub fn new(catalog: &'a ConfigCatalog) -> Self {
        Self {
            catalog,
            session: None,
            last: None,
            sessions_created: 0,
        }
    }

    pub fn session(&self) -> Option<&Session> {
        self.session.as_ref()
    }

    /// Handles one request line and returns the reply line, without a newline.
    pub fn handle_line(&mut self, line: &str) -> String {
        let request: Message = match serde_json::from_str(line) {
            Ok(m) => m,
            Err(e) => {
                let seq = serde_json::from_str::<Value>(line)
                    .ok()
                    .and_then(|v| v.get("seq")?.as_u64())
                    .unwrap_or(0);
                let err = ErrorReply::new(ErrorCode::Malformed, e.to_string());
                return encode(self.reply_to(seq, Err(err)));
            }
        };
        if let Some((prev, reply)) = &self.last {
            if request.seq == prev.seq {
                if *prev == request {
                    return reply.clone();
                }
                let err = ErrorReply::new(
                    ErrorCode::Sequence,
                    format!("seq {} was already used by a different request", request.seq),
                );
                return encode(self.reply_to(request.seq, Err(err)));
            }
            if request.seq < prev.seq {
                let err = ErrorReply::new(
                    ErrorCode::Sequence,
                    format!("seq {} is older than the last request ({})", request.seq, prev.seq),
                );
                return encode(self.reply_to(request.seq, Err(err)));
            }
        }
        let outcome = self.dispatch(&request);
        let reply = encode(self.reply_to(request.seq, outcome));
        self.last = Some((request, reply.clone()));
        reply
    }

    fn reply_to(&self, seq: u64, outcome: Result<Value, ErrorReply>) -> Message {
        let session = self.session.as_ref().map(|s| s.id.clone());
        match outcome {
            Ok(payload) => Message {
                kind: MessageType::Reply,
                session,
                seq,
                payload,
            },
            Err(err) => Message {
                kind: MessageType::Error,
                session,
                seq,
                payload: serde_json::to_value(err).expect("error payload serializes"),
            },
        }
    }

    fn dispatch(&mut self, request: &Message) -> Result<Value, ErrorReply> {
        match request.kind {
            MessageType::Reset => self.reset(request),
            MessageType::Step => self.step(request),
            MessageType::Reply | MessageType::Error => Err(ErrorReply::new(
                ErrorCode::Malformed,
                "clients may only send reset or step",
            )),
        }
    }

    fn reset(&mut self, request: &Message) -> Result<Value, ErrorReply> {
        let req: ResetRequest = parse_payload(&request.payload)?;
        let cfg = self.catalog.get(req.config.as_deref()).ok_or_else(|| {
            let known: Vec<_> = self.catalog.names().collect();
            ErrorReply::new(
                ErrorCode::UnknownConfig,
                format!("unknown config {:?}; available: {}", req.config, known.join(", ")),
            )
        })?;
        let (id, episode) = match &self.session {
            Some(s) => (s.id.clone(), s.episode + 1),
            None => (format!("s{}", self.sessions_created + 1), 0),
        };
        let session = Session::new(id, episode, cfg, req.seed)?;
        if self.session.is_none() {
            self.sessions_created += 1;
        }
        let reply = session.reset_reply();
        self.session = Some(session);
        Ok(serde_json::to_value(reply).expect("reply serializes"))
    }

    fn step(&mut self, request: &Message) -> Result<Value, ErrorReply> {
        let session = self
            .session
            .as_mut()
            .ok_or_else(|| ErrorReply::new(ErrorCode::NoSession, "send reset before step"))?;
        if let Some(id) = &request.session {
            if *id != session.id {
                return Err(ErrorReply::new(
                    ErrorCode::WrongSession,
                    format!("this connection serves session {}, not {id}", session.id),
                ));
            }
        }
        let req: StepRequest = parse_payload(&request.payload)?;
        let reply = session.step(&req.action)?;
        Ok(serde_json::to_value(reply).expect("reply serializes"))
    }
}

fn parse_payload<T: serde::de::DeserializeOwned>(payload: &Value) -> Result<T, ErrorReply> {
    T::deserialize(payload).map_err(|e| ErrorReply::new(ErrorCode::Malformed, e.to_string()))
}

fn encode(msg: Message) -> String {
    serde_json::to_string(&msg).expect("messages serialize")
}
