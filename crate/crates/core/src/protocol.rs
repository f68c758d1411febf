//! Agent message protocol.
//!
//! Each frame is a 4-byte big-endian length followed by a UTF-8 JSON body.
//! Requests are `{"id":n,"verb":"play|stop|debug"}`; replies echo the id as
//! `{"id":n,"status":"ok|error","detail":s}`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use tokio::io::{AsyncRead, AsyncReadExt, AsyncWrite, AsyncWriteExt};

/// Frames larger than this are refused rather than buffered.
pub const MAX_FRAME: u32 = 16 * 1024 * 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verb {
    Play,
    Stop,
    Debug,
}

impl Verb {
    pub fn as_str(self) -> &'static str {
        match self {
            Verb::Play => "play",
            Verb::Stop => "stop",
            Verb::Debug => "debug",
        }
    }
}

impl fmt::Display for Verb {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Verb {
    type Err = ProtocolError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "play" => Ok(Verb::Play),
            "stop" => Ok(Verb::Stop),
            "debug" => Ok(Verb::Debug),
            other => Err(ProtocolError::UnknownVerb {
                id: None,
                verb: other.to_string(),
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentMessage {
    pub id: u64,
    pub verb: Verb,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReplyStatus {
    Ok,
    Error,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentReply {
    pub id: u64,
    pub status: ReplyStatus,
    pub detail: String,
}

impl AgentReply {
    pub fn ok(id: u64, detail: impl Into<String>) -> Self {
        AgentReply {
            id,
            status: ReplyStatus::Ok,
            detail: detail.into(),
        }
    }

    pub fn error(id: u64, detail: impl Into<String>) -> Self {
        AgentReply {
            id,
            status: ReplyStatus::Error,
            detail: detail.into(),
        }
    }
}

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error("unknown verb `{verb}`")]
    UnknownVerb { id: Option<u64>, verb: String },
    #[error("malformed frame: {0}")]
    Malformed(String),
    #[error("frame of {0} bytes exceeds limit")]
    TooLarge(u32),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl ProtocolError {
    /// The request id to echo in an error reply, when one could be read.
    pub fn request_id(&self) -> Option<u64> {
        match self {
            ProtocolError::UnknownVerb { id, .. } => *id,
            _ => None,
        }
    }
}

impl AgentMessage {
    /// Decodes a request body, keeping the id when only the verb is bad.
    pub fn parse(body: &[u8]) -> Result<AgentMessage, ProtocolError> {
        #[derive(Deserialize)]
        struct Raw {
            id: u64,
            verb: String,
        }
        let raw: Raw =
            serde_json::from_slice(body).map_err(|e| ProtocolError::Malformed(e.to_string()))?;
        let verb = raw.verb.parse::<Verb>().map_err(|_| ProtocolError::UnknownVerb {
            id: Some(raw.id),
            verb: raw.verb.clone(),
        })?;
        Ok(AgentMessage { id: raw.id, verb })
    }
}

pub fn encode_frame<T: Serialize>(msg: &T) -> Vec<u8> {
    let body = serde_json::to_vec(msg).expect("protocol messages serialize");
    let mut out = Vec::with_capacity(4 + body.len());
    out.extend_from_slice(&(body.len() as u32).to_be_bytes());
    out.extend_from_slice(&body);
    out
}

pub async fn write_frame<W, T>(w: &mut W, msg: &T) -> Result<(), ProtocolError>
where
    W: AsyncWrite + Unpin,
    T: Serialize,
{
    w.write_all(&encode_frame(msg)).await?;
    w.flush().await?;
    Ok(())
}

/// Reads one frame body. `Ok(None)` on clean end of stream.
pub async fn read_frame<R: AsyncRead + Unpin>(r: &mut R) -> Result<Option<Vec<u8>>, ProtocolError> {
    let mut len = [0u8; 4];
    match r.read_exact(&mut len).await {
        Ok(_) => {}
        Err(e) if e.kind() == std::io::ErrorKind::UnexpectedEof => return Ok(None),
        Err(e) => return Err(e.into()),
    }
    let len = u32::from_be_bytes(len);
    if len > MAX_FRAME {
        return Err(ProtocolError::TooLarge(len));
    }
    let mut body = vec![0u8; len as usize];
    r.read_exact(&mut body).await?;
    Ok(Some(body))
}
