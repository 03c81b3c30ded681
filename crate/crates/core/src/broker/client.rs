//! Blocking single-connection broker client.

use std::io::{self, BufReader, BufWriter};
use std::net::{SocketAddr, TcpStream, ToSocketAddrs};
use std::time::Duration;

use thiserror::Error;

use super::wire::{Frame, Tensor, WireError};

/// Timeout used for the solver-side wait for actions.
pub const DEFAULT_GET_TIMEOUT: Duration = Duration::from_secs(60);

#[derive(Debug, Error)]
pub enum ClientError {
    /// The connection failed or dropped; the request may be retried on a new connection.
    #[error("broker transport error: {0}")]
    Transport(#[from] io::Error),
    #[error("key {0:?} not found before the timeout")]
    NotFound(String),
    #[error("broker error: {0}")]
    Server(String),
    #[error("broker protocol error: {0}")]
    Protocol(String),
}

impl ClientError {
    pub fn is_retryable(&self) -> bool {
        matches!(self, ClientError::Transport(_))
    }
}

impl From<WireError> for ClientError {
    fn from(e: WireError) -> Self {
        match e {
            WireError::Io(e) => ClientError::Transport(e),
            other => ClientError::Protocol(other.to_string()),
        }
    }
}

/// A connection to a broker. Not for concurrent use from several threads.
pub struct Client {
    addr: SocketAddr,
    reader: BufReader<TcpStream>,
    writer: BufWriter<TcpStream>,
}

impl Client {
    pub fn connect<A: ToSocketAddrs>(addr: A) -> Result<Self, ClientError> {
        let addrs: Vec<SocketAddr> = addr.to_socket_addrs()?.collect();
        let mut last = io::Error::new(io::ErrorKind::InvalidInput, "no address to connect to");
        for a in addrs {
            match TcpStream::connect_timeout(&a, Duration::from_secs(5)) {
                Ok(s) => return Self::from_stream(a, s),
                Err(e) => last = e,
            }
        }
        Err(ClientError::Transport(last))
    }

    /// Retries [`Self::connect`] until `deadline` elapses, for brokers that are still starting.
    pub fn connect_with_retry<A: ToSocketAddrs + Clone>(
        addr: A,
        deadline: Duration,
    ) -> Result<Self, ClientError> {
        let start = std::time::Instant::now();
        loop {
            match Self::connect(addr.clone()) {
                Ok(c) => return Ok(c),
                Err(e) if e.is_retryable() && start.elapsed() < deadline => {
                    std::thread::sleep(Duration::from_millis(50));
                }
                Err(e) => return Err(e),
            }
        }
    }

    fn from_stream(addr: SocketAddr, stream: TcpStream) -> Result<Self, ClientError> {
        stream.set_nodelay(true)?;
        Ok(Self {
            addr,
            reader: BufReader::new(stream.try_clone()?),
            writer: BufWriter::new(stream),
        })
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    fn roundtrip(&mut self, frame: &Frame) -> Result<Frame, ClientError> {
        frame.write_to(&mut self.writer)?;
        match Frame::read_from(&mut self.reader, u64::MAX)? {
            Some(Frame::Err { message }) => Err(ClientError::Server(message)),
            Some(f) => Ok(f),
            None => Err(ClientError::Transport(io::Error::new(
                io::ErrorKind::UnexpectedEof,
                "broker closed the connection",
            ))),
        }
    }

    fn expect_ok(&mut self, frame: &Frame) -> Result<(), ClientError> {
        match self.roundtrip(frame)? {
            Frame::Ok => Ok(()),
            other => Err(ClientError::Protocol(format!(
                "expected OK, got {:?}",
                other.opcode()
            ))),
        }
    }

    pub fn ping(&mut self) -> Result<(), ClientError> {
        self.expect_ok(&Frame::Ping)
    }

    pub fn put_tensor(&mut self, key: &str, tensor: Tensor) -> Result<(), ClientError> {
        self.expect_ok(&Frame::Put {
            key: key.to_string(),
            tensor,
        })
    }

    /// Waits up to `timeout` for `key`.
    pub fn get_tensor(&mut self, key: &str, timeout: Duration) -> Result<Tensor, ClientError> {
        let timeout_ms = timeout.as_millis().min(u32::MAX as u128) as u32;
        match self.roundtrip(&Frame::Get {
            key: key.to_string(),
            timeout_ms,
        })? {
            Frame::Tensor { tensor, .. } => Ok(tensor),
            Frame::NotFound { key } => Err(ClientError::NotFound(key)),
            other => Err(ClientError::Protocol(format!(
                "expected TENSOR, got {:?}",
                other.opcode()
            ))),
        }
    }

    /// Idempotent delete; a trailing `*` deletes by prefix.
    pub fn delete(&mut self, key: &str) -> Result<(), ClientError> {
        self.expect_ok(&Frame::Del {
            key: key.to_string(),
        })
    }

    pub fn put_f64(&mut self, key: &str, values: &[f64]) -> Result<(), ClientError> {
        self.put_tensor(key, Tensor::vector(values))
    }

    pub fn get_f64(&mut self, key: &str, timeout: Duration) -> Result<Vec<f64>, ClientError> {
        Ok(self.get_tensor(key, timeout)?.to_f64())
    }
}
