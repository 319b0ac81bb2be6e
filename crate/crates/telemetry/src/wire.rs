//! AIGM framing. A 20-byte header (magic, version, type, room, reserved,
//! u64 LE timestamp, u32 LE payload length) followed by the payload.

use radaract_core::dsp::{DOPPLER_BINS, TIME_STEPS};
use radaract_core::pad::Room;
use radaract_core::status::Status;
use thiserror::Error;
use tokio::io::{AsyncRead, AsyncReadExt, AsyncWrite, AsyncWriteExt};

pub const MAGIC: [u8; 4] = *b"AIGM";
pub const VERSION: u8 = 1;
pub const HEADER_LEN: usize = 20;
/// Values in one jtf_window payload.
pub const JTF_VALUES: usize = TIME_STEPS * DOPPLER_BINS;
pub const JTF_PAYLOAD_LEN: usize = JTF_VALUES * 4;
/// Largest payload any message type carries.
pub const MAX_PAYLOAD: usize = JTF_PAYLOAD_LEN;

#[derive(Debug, Error)]
pub enum WireError {
    #[error("bad magic {0:02X?}")]
    BadMagic([u8; 4]),
    #[error("unsupported protocol version {0}")]
    UnsupportedVersion(u8),
    #[error("unknown message type 0x{0:02X}")]
    UnknownType(u8),
    #[error("unknown room id {0}")]
    UnknownRoom(u8),
    #[error("payload length {found} does not match expected {expected}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("invalid payload: {0}")]
    InvalidPayload(String),
    #[error("connection closed")]
    Closed,
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum MsgType {
    Presence = 0x01,
    JtfWindow = 0x02,
    StatusResult = 0x03,
    Heartbeat = 0x04,
}

impl MsgType {
    pub const ALL: [MsgType; 4] = [MsgType::Presence, MsgType::JtfWindow, MsgType::StatusResult, MsgType::Heartbeat];

    pub fn from_code(code: u8) -> Result<Self, WireError> {
        Self::ALL
            .into_iter()
            .find(|t| *t as u8 == code)
            .ok_or(WireError::UnknownType(code))
    }

    /// Payload size this type requires.
    pub fn payload_len(self) -> usize {
        match self {
            MsgType::Presence => 1,
            MsgType::JtfWindow => JTF_PAYLOAD_LEN,
            MsgType::StatusResult => 2,
            MsgType::Heartbeat => 0,
        }
    }
}

/// Status code carried in status_result payloads: the position in
/// [`Status::ALL`].
pub fn status_code(status: Status) -> u8 {
    Status::ALL.iter().position(|&s| s == status).unwrap() as u8
}

pub fn status_from_code(code: u8) -> Option<Status> {
    Status::ALL.get(code as usize).copied()
}

#[derive(Debug, Clone, PartialEq)]
pub struct WireMessage {
    pub msg_type: MsgType,
    pub room: Room,
    pub timestamp_ms: u64,
    pub payload: Vec<u8>,
}

impl WireMessage {
    pub fn heartbeat(room: Room, timestamp_ms: u64) -> Self {
        Self {
            msg_type: MsgType::Heartbeat,
            room,
            timestamp_ms,
            payload: Vec::new(),
        }
    }

    pub fn presence(room: Room, timestamp_ms: u64, occupied: bool) -> Self {
        Self {
            msg_type: MsgType::Presence,
            room,
            timestamp_ms,
            payload: vec![occupied as u8],
        }
    }

    /// Panics unless `values` holds exactly one window.
    pub fn jtf_window(room: Room, timestamp_ms: u64, values: &[f32]) -> Self {
        assert_eq!(values.len(), JTF_VALUES, "jtf_window needs {JTF_VALUES} values");
        Self {
            msg_type: MsgType::JtfWindow,
            room,
            timestamp_ms,
            payload: values.iter().flat_map(|v| v.to_le_bytes()).collect(),
        }
    }

    /// Confidence is quantized to whole percent.
    pub fn status_result(room: Room, timestamp_ms: u64, status: Status, confidence: f64) -> Self {
        let pct = (confidence.clamp(0.0, 1.0) * 100.0).round() as u8;
        Self {
            msg_type: MsgType::StatusResult,
            room,
            timestamp_ms,
            payload: vec![status_code(status), pct],
        }
    }

    pub fn occupied(&self) -> Result<bool, WireError> {
        match (self.msg_type, self.payload.as_slice()) {
            (MsgType::Presence, [0]) => Ok(false),
            (MsgType::Presence, [1]) => Ok(true),
            (MsgType::Presence, [b]) => Err(WireError::InvalidPayload(format!("presence flag {b}"))),
            _ => Err(WireError::InvalidPayload("not a presence message".into())),
        }
    }

    pub fn jtf_values(&self) -> Result<Vec<f32>, WireError> {
        if self.msg_type != MsgType::JtfWindow {
            return Err(WireError::InvalidPayload("not a jtf_window message".into()));
        }
        Ok(self
            .payload
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
            .collect())
    }

    /// `(status, confidence in [0, 1])`.
    pub fn status(&self) -> Result<(Status, f64), WireError> {
        match (self.msg_type, self.payload.as_slice()) {
            (MsgType::StatusResult, &[code, pct]) if pct <= 100 => status_from_code(code)
                .map(|s| (s, pct as f64 / 100.0))
                .ok_or_else(|| WireError::InvalidPayload(format!("status code {code}"))),
            (MsgType::StatusResult, _) => Err(WireError::InvalidPayload("bad status_result payload".into())),
            _ => Err(WireError::InvalidPayload("not a status_result message".into())),
        }
    }

    pub fn encoded_len(&self) -> usize {
        HEADER_LEN + self.payload.len()
    }

    pub fn encode(&self) -> Result<Vec<u8>, WireError> {
        let expected = self.msg_type.payload_len();
        if self.payload.len() != expected {
            return Err(WireError::LengthMismatch {
                expected,
                found: self.payload.len(),
            });
        }
        let mut out = Vec::with_capacity(self.encoded_len());
        out.extend_from_slice(&MAGIC);
        out.push(VERSION);
        out.push(self.msg_type as u8);
        out.push(self.room.code());
        out.push(0);
        out.extend_from_slice(&self.timestamp_ms.to_le_bytes());
        out.extend_from_slice(&(self.payload.len() as u32).to_le_bytes());
        out.extend_from_slice(&self.payload);
        Ok(out)
    }

    /// Decodes exactly one frame; `bytes` must hold nothing else.
    pub fn decode(bytes: &[u8]) -> Result<Self, WireError> {
        if bytes.len() < HEADER_LEN {
            return Err(WireError::LengthMismatch {
                expected: HEADER_LEN,
                found: bytes.len(),
            });
        }
        let header: [u8; HEADER_LEN] = bytes[..HEADER_LEN].try_into().unwrap();
        let (msg_type, room, ts, len) = parse_header(&header)?;
        let body = &bytes[HEADER_LEN..];
        if body.len() != len {
            return Err(WireError::LengthMismatch {
                expected: len,
                found: body.len(),
            });
        }
        Ok(Self {
            msg_type,
            room,
            timestamp_ms: ts,
            payload: body.to_vec(),
        })
    }
}

/// Validates a header and returns (type, room, timestamp, payload length).
fn parse_header(h: &[u8; HEADER_LEN]) -> Result<(MsgType, Room, u64, usize), WireError> {
    let magic: [u8; 4] = h[0..4].try_into().unwrap();
    if magic != MAGIC {
        return Err(WireError::BadMagic(magic));
    }
    if h[4] != VERSION {
        return Err(WireError::UnsupportedVersion(h[4]));
    }
    let msg_type = MsgType::from_code(h[5])?;
    let room = Room::from_code(h[6]).ok_or(WireError::UnknownRoom(h[6]))?;
    let ts = u64::from_le_bytes(h[8..16].try_into().unwrap());
    let len = u32::from_le_bytes(h[16..20].try_into().unwrap()) as usize;
    if len != msg_type.payload_len() {
        return Err(WireError::LengthMismatch {
            expected: msg_type.payload_len(),
            found: len,
        });
    }
    Ok((msg_type, room, ts, len))
}

/// Reads one frame. A clean end of stream before any header byte is
/// [`WireError::Closed`].
pub async fn read_message<R: AsyncRead + Unpin>(r: &mut R) -> Result<WireMessage, WireError> {
    let mut header = [0u8; HEADER_LEN];
    let n = r.read(&mut header).await?;
    if n == 0 {
        return Err(WireError::Closed);
    }
    r.read_exact(&mut header[n..]).await?;
    let (msg_type, room, ts, len) = parse_header(&header)?;
    let mut payload = vec![0u8; len];
    r.read_exact(&mut payload).await?;
    Ok(WireMessage {
        msg_type,
        room,
        timestamp_ms: ts,
        payload,
    })
}

pub async fn write_message<W: AsyncWrite + Unpin>(w: &mut W, msg: &WireMessage) -> Result<(), WireError> {
    w.write_all(&msg.encode()?).await?;
    Ok(())
}
