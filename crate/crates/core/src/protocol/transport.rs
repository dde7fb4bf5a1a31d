//! Line transports: a pair of in-process channels, or a TCP connection.

use std::io::{self, BufRead, BufReader, Write};
use std::net::{TcpListener, TcpStream, ToSocketAddrs};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError, Sender};
use std::thread;
use std::time::Duration;

use super::{decode, encode, DecodeError, Message, PROTOCOL_VERSION};

#[derive(Debug, thiserror::Error)]
pub enum TransportError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("connection closed")]
    Closed,
    #[error("handshake failed: {0}")]
    Handshake(String),
}

pub enum LineSender {
    Channel(Sender<String>),
    Stream(TcpStream),
}

impl LineSender {
    /// Writes one encoded message. Each write is a whole line.
    pub fn send(&mut self, msg: &Message) -> Result<(), TransportError> {
        self.send_line(&encode(msg))
    }

    pub fn send_line(&mut self, line: &str) -> Result<(), TransportError> {
        match self {
            LineSender::Channel(tx) => tx.send(line.to_string()).map_err(|_| TransportError::Closed),
            LineSender::Stream(s) => {
                s.write_all(line.as_bytes())?;
                s.flush()?;
                Ok(())
            }
        }
    }
}

impl Drop for LineSender {
    // The reading half holds a clone of the socket, so dropping ours alone
    // would not tell the peer we are done.
    fn drop(&mut self) {
        if let LineSender::Stream(s) = self {
            let _ = s.shutdown(std::net::Shutdown::Write);
        }
    }
}

/// One side of a connection. Undecodable incoming lines arrive as `Err`.
pub struct Endpoint {
    pub sender: LineSender,
    pub receiver: Receiver<Result<Message, DecodeError>>,
}

impl Endpoint {
    pub fn send(&mut self, msg: &Message) -> Result<(), TransportError> {
        self.sender.send(msg)
    }

    /// Next message, `Ok(None)` on timeout.
    pub fn recv_timeout(&self, timeout: Duration) -> Result<Option<Result<Message, DecodeError>>, TransportError> {
        match self.receiver.recv_timeout(timeout) {
            Ok(m) => Ok(Some(m)),
            Err(RecvTimeoutError::Timeout) => Ok(None),
            Err(RecvTimeoutError::Disconnected) => Err(TransportError::Closed),
        }
    }

    pub fn recv(&self) -> Result<Result<Message, DecodeError>, TransportError> {
        self.receiver.recv().map_err(|_| TransportError::Closed)
    }
}

/// Reads lines until EOF, decoding each. A final line without its newline
/// yields "unexpected eof".
pub fn read_messages<R: BufRead>(mut reader: R, mut f: impl FnMut(Result<Message, DecodeError>) -> bool) {
    let mut buf = String::new();
    loop {
        buf.clear();
        match reader.read_line(&mut buf) {
            Ok(0) => return,
            Ok(_) if !buf.ends_with('\n') => {
                f(Err(DecodeError("unexpected eof".into())));
                return;
            }
            Ok(_) if buf.trim().is_empty() => {}
            Ok(_) => {
                if !f(decode(&buf)) {
                    return;
                }
            }
            Err(e) => {
                log::debug!("read failed: {e}");
                return;
            }
        }
    }
}

/// A connected pair of endpoints within one process: (front-end, back-end).
pub fn in_process() -> (Endpoint, Endpoint) {
    fn half() -> (Sender<String>, Receiver<Result<Message, DecodeError>>) {
        let (line_tx, line_rx) = mpsc::channel::<String>();
        let (msg_tx, msg_rx) = mpsc::channel();
        thread::spawn(move || {
            for line in line_rx {
                if msg_tx.send(decode(&line)).is_err() {
                    break;
                }
            }
        });
        (line_tx, msg_rx)
    }
    let (to_be, be_rx) = half();
    let (to_fe, fe_rx) = half();
    (
        Endpoint { sender: LineSender::Channel(to_be), receiver: fe_rx },
        Endpoint { sender: LineSender::Channel(to_fe), receiver: be_rx },
    )
}

fn stream_endpoint(stream: TcpStream) -> Result<Endpoint, TransportError> {
    let mut reader = BufReader::new(stream.try_clone()?);
    let mut sender = LineSender::Stream(stream);
    sender.send(&Message::hello())?;
    let mut first = String::new();
    reader.read_line(&mut first)?;
    match decode(&first) {
        Ok(Message::Hello { protocol }) if protocol == PROTOCOL_VERSION => {}
        Ok(Message::Hello { protocol }) => {
            let text = format!("protocol version mismatch: expected {PROTOCOL_VERSION}, got {protocol}");
            let _ = sender.send(&Message::error(&text));
            return Err(TransportError::Handshake(text));
        }
        other => {
            let text = match other {
                Ok(m) => format!("expected hello, got {}", m.kind()),
                Err(e) => e.0,
            };
            let _ = sender.send(&Message::error(&text));
            return Err(TransportError::Handshake(text));
        }
    }
    let (tx, rx) = mpsc::channel();
    thread::spawn(move || read_messages(reader, |m| tx.send(m).is_ok()));
    Ok(Endpoint { sender, receiver: rx })
}

/// Connects to a back-end and performs the hello exchange.
pub fn connect(addr: impl ToSocketAddrs) -> Result<Endpoint, TransportError> {
    let stream = TcpStream::connect(addr)?;
    stream.set_nodelay(true)?;
    stream_endpoint(stream)
}

/// Accepts one front-end connection and performs the hello exchange.
pub fn accept(listener: &TcpListener) -> Result<Endpoint, TransportError> {
    let (stream, peer) = listener.accept()?;
    log::info!("connection from {peer}");
    stream.set_nodelay(true)?;
    stream_endpoint(stream)
}
