use super::{ErrorReply, Message, MessageType, ResetReply, ResetRequest, StepReply, StepRequest};
use crate::mac::RawAction;
use serde::de::DeserializeOwned;
use serde_json::Value;
use std::io::{self, BufRead, Write};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ClientError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("undecodable reply: {0}")]
    Decode(#[from] serde_json::Error),
    #[error("server closed the connection")]
    Closed,
    #[error("server error {:?}: {}", .0.code, .0.message)]
    Server(ErrorReply),
}

/// Minimal scripted client, numbering requests from 1.
pub struct Client<R, W> {
    reader: R,
    writer: W,
    seq: u64,
    session: Option<String>,
}

impl<R: BufRead, W: Write> Client<R, W> {
    pub fn new(reader: R, writer: W) -> Self {
        Self {
            reader,
            writer,
            seq: 0,
            session: None,
        }
    }

    pub fn session(&self) -> Option<&str> {
        self.session.as_deref()
    }

    /// Sends a request with the next sequence number and returns the raw reply.
    pub fn send(&mut self, kind: MessageType, payload: Value) -> Result<Message, ClientError> {
        self.seq += 1;
        let msg = Message {
            kind,
            session: self.session.clone(),
            seq: self.seq,
            payload,
        };
        self.send_message(&msg)
    }

    /// Sends `msg` as is, without touching the sequence counter.
    pub fn send_message(&mut self, msg: &Message) -> Result<Message, ClientError> {
        let mut line = serde_json::to_string(msg)?;
        line.push('\n');
        self.writer.write_all(line.as_bytes())?;
        self.writer.flush()?;
        let mut reply = String::new();
        if self.reader.read_line(&mut reply)? == 0 {
            return Err(ClientError::Closed);
        }
        let reply: Message = serde_json::from_str(&reply)?;
        if reply.session.is_some() {
            self.session.clone_from(&reply.session);
        }
        Ok(reply)
    }

    fn call<T: DeserializeOwned>(&mut self, kind: MessageType, payload: Value) -> Result<T, ClientError> {
        let reply = self.send(kind, payload)?;
        match reply.kind {
            MessageType::Error => Err(ClientError::Server(serde_json::from_value(reply.payload)?)),
            _ => Ok(serde_json::from_value(reply.payload)?),
        }
    }

    pub fn reset(&mut self, config: Option<&str>, seed: u64) -> Result<ResetReply, ClientError> {
        let req = ResetRequest {
            config: config.map(str::to_owned),
            seed,
        };
        self.call(MessageType::Reset, serde_json::to_value(req)?)
    }

    pub fn step(&mut self, action: &RawAction) -> Result<StepReply, ClientError> {
        let req = StepRequest {
            action: action.clone(),
        };
        self.call(MessageType::Step, serde_json::to_value(req)?)
    }
}
