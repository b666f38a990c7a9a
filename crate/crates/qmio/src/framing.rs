//! Envelope IO over byte streams, plus canonical JSON payload helpers.

use std::io::{self, Read, Write};
use std::net::{TcpStream, ToSocketAddrs};
use std::time::Duration;

use qmio_core::wire::{decode_envelope, decode_stream, encode_envelope, Decoded, Envelope, WireError, HEADER_LEN};
use serde::de::DeserializeOwned;
use serde::Serialize;

#[derive(Debug, thiserror::Error)]
pub enum FrameError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Wire(#[from] WireError),
    #[error("connection closed mid-frame")]
    UnexpectedEof,
}

/// Compact JSON with object keys sorted.
pub fn to_payload<T: Serialize>(value: &T) -> String {
    let v = serde_json::to_value(value).expect("payload types serialize");
    serde_json::to_string(&v).expect("values serialize")
}

pub fn from_payload<T: DeserializeOwned>(text: &str) -> Result<T, serde_json::Error> {
    serde_json::from_str(text)
}

pub fn write_envelope<W: Write>(w: &mut W, e: &Envelope) -> Result<(), FrameError> {
    let bytes = encode_envelope(e)?;
    w.write_all(&bytes)?;
    w.flush()?;
    Ok(())
}

fn fill<R: Read>(r: &mut R, buf: &mut [u8]) -> Result<usize, io::Error> {
    let mut got = 0;
    while got < buf.len() {
        match r.read(&mut buf[got..]) {
            Ok(0) => break,
            Ok(n) => got += n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e),
        }
    }
    Ok(got)
}

/// Reads one envelope. `Ok(None)` on a clean end of stream before the
/// first byte of a frame. Bad magic or type is reported as soon as the
/// offending byte arrives, without waiting for a full header.
pub fn read_envelope<R: Read>(r: &mut R) -> Result<Option<Envelope>, FrameError> {
    let mut buf = vec![0u8; HEADER_LEN];
    let mut got = 0;
    while got < HEADER_LEN {
        let n = match r.read(&mut buf[got..]) {
            Ok(n) => n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => continue,
            Err(e) => return Err(e.into()),
        };
        if n == 0 {
            return if got == 0 { Ok(None) } else { Err(FrameError::UnexpectedEof) };
        }
        got += n;
        decode_stream(&buf[..got])?;
    }
    let needed = match decode_stream(&buf)? {
        Decoded::NeedMore(n) => n,
        Decoded::Complete { envelope, .. } => return Ok(Some(envelope)),
    };
    buf.resize(HEADER_LEN + needed, 0);
    if fill(r, &mut buf[HEADER_LEN..])? < needed {
        return Err(FrameError::UnexpectedEof);
    }
    Ok(Some(decode_envelope(&buf)?))
}

/// A client connection carrying one request/reply exchange at a time.
pub struct Connection {
    stream: TcpStream,
}

impl Connection {
    pub fn open<A: ToSocketAddrs>(addr: A, timeout: Option<Duration>) -> io::Result<Connection> {
        let stream = TcpStream::connect(addr)?;
        stream.set_nodelay(true)?;
        stream.set_read_timeout(timeout)?;
        Ok(Connection { stream })
    }

    pub fn from_stream(stream: TcpStream) -> io::Result<Connection> {
        stream.set_nodelay(true)?;
        Ok(Connection { stream })
    }

    pub fn request(&mut self, e: &Envelope) -> Result<Envelope, FrameError> {
        write_envelope(&mut self.stream, e)?;
        read_envelope(&mut self.stream)?.ok_or(FrameError::UnexpectedEof)
    }

    pub fn set_read_timeout(&self, timeout: Option<Duration>) -> io::Result<()> {
        self.stream.set_read_timeout(timeout)
    }

    pub fn stream(&self) -> &TcpStream {
        &self.stream
    }
}
