//! Framed envelopes exchanged between the gateway and the control-node
//! broker.
//!
//! ```text
//! offset  size  field
//!      0     4  magic "QHQ1"
//!      4     1  message type
//!      5    16  job id
//!     21     4  payload length, unsigned big-endian
//!     25     n  payload, UTF-8
//! ```

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

pub const MAGIC: [u8; 4] = *b"QHQ1";
pub const HEADER_LEN: usize = 25;
pub const MAX_PAYLOAD: usize = 64 * 1024 * 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum MsgType {
    Submit = 1,
    Result = 2,
    Error = 3,
    StatusReq = 4,
    StatusRep = 5,
    Cancel = 6,
    Ping = 7,
    Pong = 8,
}

impl MsgType {
    pub const ALL: [MsgType; 8] = [
        MsgType::Submit,
        MsgType::Result,
        MsgType::Error,
        MsgType::StatusReq,
        MsgType::StatusRep,
        MsgType::Cancel,
        MsgType::Ping,
        MsgType::Pong,
    ];

    pub fn from_byte(b: u8) -> Option<MsgType> {
        MsgType::ALL.get(usize::from(b).wrapping_sub(1)).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            MsgType::Submit => "SUBMIT",
            MsgType::Result => "RESULT",
            MsgType::Error => "ERROR",
            MsgType::StatusReq => "STATUS_REQ",
            MsgType::StatusRep => "STATUS_REP",
            MsgType::Cancel => "CANCEL",
            MsgType::Ping => "PING",
            MsgType::Pong => "PONG",
        }
    }
}

impl fmt::Display for MsgType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// 16-byte job identifier, shown as 32 lowercase hex digits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct JobId(pub [u8; 16]);

impl JobId {
    pub fn from_u128(v: u128) -> JobId {
        JobId(v.to_be_bytes())
    }

    pub fn as_u128(&self) -> u128 {
        u128::from_be_bytes(self.0)
    }
}

impl fmt::Display for JobId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:032x}", self.as_u128())
    }
}

impl FromStr for JobId {
    type Err = WireError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.len() != 32 {
            return Err(WireError::BadJobId);
        }
        u128::from_str_radix(s, 16).map(JobId::from_u128).map_err(|_| WireError::BadJobId)
    }
}

impl serde::Serialize for JobId {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> serde::Deserialize<'de> for JobId {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = <alloc::borrow::Cow<'de, str>>::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Envelope {
    pub msg_type: MsgType,
    pub job_id: JobId,
    pub payload: String,
}

impl Envelope {
    pub fn new(msg_type: MsgType, job_id: JobId, payload: impl Into<String>) -> Envelope {
        Envelope { msg_type, job_id, payload: payload.into() }
    }

    pub fn encoded_len(&self) -> usize {
        HEADER_LEN + self.payload.len()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum WireError {
    #[error("bad magic {0:02x?}")]
    BadMagic(Vec<u8>),
    #[error("unknown message type {0}")]
    UnknownMsgType(u8),
    #[error("payload of {0} bytes exceeds the {MAX_PAYLOAD} byte limit")]
    PayloadTooLarge(usize),
    #[error("payload is not valid UTF-8")]
    InvalidUtf8,
    #[error("frame declares {declared} bytes but {actual} follow the header")]
    LengthMismatch { declared: usize, actual: usize },
    #[error("truncated frame: {needed} more byte(s) needed")]
    Truncated { needed: usize },
    #[error("job id must be 32 hex digits")]
    BadJobId,
}

impl WireError {
    /// Truncation is recoverable by reading more; everything else is a bad frame.
    pub fn is_truncation(&self) -> bool {
        matches!(self, WireError::Truncated { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Decoded {
    /// At least this many further bytes are required.
    NeedMore(usize),
    Complete {
        envelope: Envelope,
        consumed: usize,
    },
}

pub fn encode_envelope(e: &Envelope) -> Result<Vec<u8>, WireError> {
    let len = e.payload.len();
    if len > MAX_PAYLOAD {
        return Err(WireError::PayloadTooLarge(len));
    }
    let mut out = Vec::with_capacity(HEADER_LEN + len);
    out.extend_from_slice(&MAGIC);
    out.push(e.msg_type as u8);
    out.extend_from_slice(&e.job_id.0);
    out.extend_from_slice(&(len as u32).to_be_bytes());
    out.extend_from_slice(e.payload.as_bytes());
    Ok(out)
}

/// Streaming decode of the frame at the start of `buf`. Errors are reported
/// as soon as the offending bytes are visible.
pub fn decode_stream(buf: &[u8]) -> Result<Decoded, WireError> {
    let seen = buf.len().min(4);
    if buf[..seen] != MAGIC[..seen] {
        return Err(WireError::BadMagic(buf[..seen].to_vec()));
    }
    if let Some(&t) = buf.get(4) {
        MsgType::from_byte(t).ok_or(WireError::UnknownMsgType(t))?;
    }
    if buf.len() < HEADER_LEN {
        return Ok(Decoded::NeedMore(HEADER_LEN - buf.len()));
    }
    let len = u32::from_be_bytes([buf[21], buf[22], buf[23], buf[24]]) as usize;
    if len > MAX_PAYLOAD {
        return Err(WireError::PayloadTooLarge(len));
    }
    let total = HEADER_LEN + len;
    if buf.len() < total {
        return Ok(Decoded::NeedMore(total - buf.len()));
    }
    let payload = core::str::from_utf8(&buf[HEADER_LEN..total]).map_err(|_| WireError::InvalidUtf8)?;
    let mut job_id = [0u8; 16];
    job_id.copy_from_slice(&buf[5..21]);
    let msg_type = MsgType::from_byte(buf[4]).expect("checked above");
    Ok(Decoded::Complete {
        envelope: Envelope { msg_type, job_id: JobId(job_id), payload: String::from(payload) },
        consumed: total,
    })
}

/// Decodes exactly one frame occupying all of `buf`.
pub fn decode_envelope(buf: &[u8]) -> Result<Envelope, WireError> {
    match decode_stream(buf)? {
        Decoded::NeedMore(needed) => Err(WireError::Truncated { needed }),
        Decoded::Complete { envelope, consumed } if consumed == buf.len() => Ok(envelope),
        Decoded::Complete { consumed, .. } => {
            Err(WireError::LengthMismatch { declared: consumed - HEADER_LEN, actual: buf.len() - HEADER_LEN })
        }
    }
}

/// Lowercase hex with no separators.
pub fn to_hex(bytes: &[u8]) -> String {
    use core::fmt::Write;
    let mut s = String::with_capacity(bytes.len() * 2);
    for b in bytes {
        let _ = write!(s, "{b:02x}");
    }
    s
}

/// Inverse of [`to_hex`]; ASCII whitespace is ignored.
pub fn from_hex(text: &str) -> Option<Vec<u8>> {
    let digits: Vec<u8> = text.bytes().filter(|b| !b.is_ascii_whitespace()).collect();
    if !digits.len().is_multiple_of(2) {
        return None;
    }
    digits
        .chunks(2)
        .map(|pair| {
            let s = core::str::from_utf8(pair).ok()?;
            u8::from_str_radix(s, 16).ok()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;
    use alloc::vec;

    #[test]
    fn ping_is_25_bytes() {
        let e = Envelope::new(MsgType::Ping, JobId::from_u128(1), "");
        let bytes = encode_envelope(&e).unwrap();
        assert_eq!(bytes.len(), 25);
        assert_eq!(&bytes[..5], b"QHQ1\x07");
        assert_eq!(bytes[20], 1);
        assert_eq!(decode_envelope(&bytes).unwrap(), e);
    }

    #[test]
    fn oversized_payload_rejected() {
        let e = Envelope::new(MsgType::Submit, JobId::default(), "x".repeat(MAX_PAYLOAD + 1));
        assert_eq!(encode_envelope(&e).unwrap_err(), WireError::PayloadTooLarge(MAX_PAYLOAD + 1));
    }

    #[test]
    fn bad_magic_detected_early() {
        assert_eq!(decode_stream(b"XX").unwrap_err(), WireError::BadMagic(b"XX".to_vec()));
        let mut frame = encode_envelope(&Envelope::new(MsgType::Ping, JobId::default(), "")).unwrap();
        frame[..4].copy_from_slice(b"XXXX");
        assert!(matches!(decode_envelope(&frame), Err(WireError::BadMagic(_))));
    }

    #[test]
    fn unknown_type_is_an_error() {
        for t in [0u8, 9, 255] {
            let mut frame = vec![b'Q', b'H', b'Q', b'1', t];
            frame.resize(HEADER_LEN, 0);
            assert_eq!(decode_envelope(&frame).unwrap_err(), WireError::UnknownMsgType(t));
        }
    }

    #[test]
    fn truncated_mid_payload_reports_needed_bytes() {
        let frame = encode_envelope(&Envelope::new(MsgType::Result, JobId::default(), "abcdef")).unwrap();
        assert_eq!(decode_stream(&frame[..HEADER_LEN + 2]).unwrap(), Decoded::NeedMore(4));
        let err = decode_envelope(&frame[..HEADER_LEN + 2]).unwrap_err();
        assert_eq!(err, WireError::Truncated { needed: 4 });
        assert!(err.is_truncation());
    }

    #[test]
    fn trailing_bytes_are_a_length_mismatch() {
        let mut frame = encode_envelope(&Envelope::new(MsgType::Pong, JobId::default(), "ab")).unwrap();
        frame.push(b'c');
        assert_eq!(decode_envelope(&frame).unwrap_err(), WireError::LengthMismatch { declared: 2, actual: 3 });
        match decode_stream(&frame).unwrap() {
            Decoded::Complete { consumed, .. } => assert_eq!(consumed, HEADER_LEN + 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn invalid_utf8_rejected() {
        let mut frame = encode_envelope(&Envelope::new(MsgType::Submit, JobId::default(), "ab")).unwrap();
        frame[HEADER_LEN] = 0xff;
        assert_eq!(decode_envelope(&frame).unwrap_err(), WireError::InvalidUtf8);
    }

    #[test]
    fn job_id_text_form() {
        let id = JobId::from_u128(0xdead_beef);
        assert_eq!(id.to_string(), "000000000000000000000000deadbeef");
        assert_eq!(id.to_string().parse::<JobId>().unwrap(), id);
        assert!("xyz".parse::<JobId>().is_err());
    }

    #[test]
    fn hex_helpers() {
        assert_eq!(to_hex(b"QHQ1"), "51485131");
        assert_eq!(from_hex("5148 5131\n").unwrap(), b"QHQ1");
        assert!(from_hex("abc").is_none());
    }
}
