//! Frame transports. Both kinds move identical bytes; the counting wrapper
//! tallies them independently of the ledger.

use std::collections::{BTreeMap, VecDeque};
use std::fmt;
use std::io::{Read, Write};
use std::os::unix::net::UnixStream;
use std::str::FromStr;
use std::sync::mpsc::{channel, Receiver};
use std::thread::JoinHandle;

use super::Channel;
use crate::error::{Error, Result};

/// One directed channel of one client's session.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Link {
    pub client: u32,
    pub channel: Channel,
}

pub trait Transport: Send {
    fn send_frame(&mut self, link: Link, frame: Vec<u8>) -> Result<()>;

    /// Next frame on `link`, in send order.
    fn recv_frame(&mut self, link: Link) -> Result<Vec<u8>>;
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum TransportKind {
    #[default]
    InProc,
    Socket,
}

impl TransportKind {
    pub fn build(self) -> Box<dyn Transport> {
        match self {
            TransportKind::InProc => Box::new(InProcTransport::default()),
            TransportKind::Socket => Box::new(SocketTransport::default()),
        }
    }
}

impl fmt::Display for TransportKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TransportKind::InProc => "inproc",
            TransportKind::Socket => "socket",
        })
    }
}

impl FromStr for TransportKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "inproc" => Ok(TransportKind::InProc),
            "socket" => Ok(TransportKind::Socket),
            _ => Err(Error::InvalidParams(format!("unknown transport {s}"))),
        }
    }
}

/// In-memory queues, one per link.
#[derive(Default)]
pub struct InProcTransport {
    queues: BTreeMap<Link, VecDeque<Vec<u8>>>,
}

impl Transport for InProcTransport {
    fn send_frame(&mut self, link: Link, frame: Vec<u8>) -> Result<()> {
        self.queues.entry(link).or_default().push_back(frame);
        Ok(())
    }

    fn recv_frame(&mut self, link: Link) -> Result<Vec<u8>> {
        self.queues
            .get_mut(&link)
            .and_then(|q| q.pop_front())
            .ok_or(Error::TransportClosed(link.channel))
    }
}

struct SocketLink {
    writer: UnixStream,
    frames: Receiver<Vec<u8>>,
    reader: Option<JoinHandle<()>>,
}

/// A connected pair of local stream sockets per link. A reader thread on the
/// receiving end reassembles length-prefixed frames so that large payloads
/// never block the sender.
#[derive(Default)]
pub struct SocketTransport {
    links: BTreeMap<Link, SocketLink>,
}

fn read_frames(mut sock: UnixStream, tx: std::sync::mpsc::Sender<Vec<u8>>) {
    loop {
        let mut len = [0u8; 4];
        if sock.read_exact(&mut len).is_err() {
            return;
        }
        let n = u32::from_le_bytes(len) as usize;
        let mut frame = vec![0u8; 4 + n];
        frame[..4].copy_from_slice(&len);
        if sock.read_exact(&mut frame[4..]).is_err() || tx.send(frame).is_err() {
            return;
        }
    }
}

impl SocketTransport {
    fn link(&mut self, link: Link) -> Result<&mut SocketLink> {
        if !self.links.contains_key(&link) {
            let (writer, reader) = UnixStream::pair()?;
            let (tx, rx) = channel();
            let handle = std::thread::spawn(move || read_frames(reader, tx));
            self.links.insert(
                link,
                SocketLink {
                    writer,
                    frames: rx,
                    reader: Some(handle),
                },
            );
        }
        Ok(self.links.get_mut(&link).expect("inserted"))
    }
}

impl Transport for SocketTransport {
    fn send_frame(&mut self, link: Link, frame: Vec<u8>) -> Result<()> {
        self.link(link)?.writer.write_all(&frame)?;
        Ok(())
    }

    fn recv_frame(&mut self, link: Link) -> Result<Vec<u8>> {
        self.link(link)?
            .frames
            .recv()
            .map_err(|_| Error::TransportClosed(link.channel))
    }
}

impl Drop for SocketTransport {
    fn drop(&mut self) {
        for (_, mut l) in std::mem::take(&mut self.links) {
            let _ = l.writer.shutdown(std::net::Shutdown::Both);
            if let Some(h) = l.reader.take() {
                let _ = h.join();
            }
        }
    }
}

/// Counts every byte and frame handed to the inner transport.
pub struct CountingTransport {
    inner: Box<dyn Transport>,
    bytes: BTreeMap<Channel, u64>,
    frames: u64,
}

impl CountingTransport {
    pub fn new(inner: Box<dyn Transport>) -> Self {
        Self {
            inner,
            bytes: BTreeMap::new(),
            frames: 0,
        }
    }

    pub fn bytes(&self, channel: Channel) -> u64 {
        self.bytes.get(&channel).copied().unwrap_or(0)
    }

    pub fn total_bytes(&self) -> u64 {
        self.bytes.values().sum()
    }

    pub fn frames(&self) -> u64 {
        self.frames
    }
}

impl Transport for CountingTransport {
    fn send_frame(&mut self, link: Link, frame: Vec<u8>) -> Result<()> {
        *self.bytes.entry(link.channel).or_default() += frame.len() as u64;
        self.frames += 1;
        self.inner.send_frame(link, frame)
    }

    fn recv_frame(&mut self, link: Link) -> Result<Vec<u8>> {
        self.inner.recv_frame(link)
    }
}
