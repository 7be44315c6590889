//! Bit-exact serialization of sparse updates and the framed hub/worker
//! protocol realizing the single round of communication.
//!
//! Update frame layout (all integers and floats little-endian):
//!
//! ```text
//! offset  size  field
//!      0     4  magic "DIC1"
//!      4     1  version (= 1)
//!      5     4  machine_id  u32
//!      9     4  p           u32
//!     13     4  n           u32
//!     17     8  rho         f64
//!     25     4  entry_count u32
//!     29   16k  entries: (i u32, j u32, v f64) × entry_count,
//!               i ≤ j, strictly sorted by (i, j), no zero values
//! ```
//!
//! Protocol messages are length-prefixed: a u32 payload length, then a
//! one-byte kind tag and the payload body. Each worker performs exactly
//! one HELLO → CONFIG → UPDATE → ACK exchange per connection:
//!
//! ```text
//! tag 1  HELLO   machine_id u32
//! tag 2  CONFIG  p u32, n u32, lambda f64, bandwidth u64, base_seed u64
//! tag 3  UPDATE  an update frame as above
//! tag 4  ACK     status u8 (0 accepted, 1 duplicate machine, 2 rejected)
//! ```

use std::collections::BTreeMap;
use std::io::{self, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::time::{Duration, Instant};

use crate::debias::{machine_estimate, SparseUpdate};
use crate::error::{Error, Result};
use crate::experiment::ExperimentConfig;
use crate::hub::{aggregate, final_threshold, hub_variance, HubEstimate};
use crate::matrix::{DataMatrix, SparseSymMatrix};

const MAGIC: &[u8; 4] = b"DIC1";
const VERSION: u8 = 1;
const HEADER_LEN: usize = 29;
const ENTRY_LEN: usize = 16;

pub const ACK_OK: u8 = 0;
pub const ACK_DUPLICATE: u8 = 1;
pub const ACK_REJECTED: u8 = 2;

/// Serializes an update to the fixed frame layout; deterministic.
pub fn encode_update(u: &SparseUpdate) -> Vec<u8> {
    let entries = u.entries.entries();
    let mut out = Vec::with_capacity(HEADER_LEN + ENTRY_LEN * entries.len());
    out.extend_from_slice(MAGIC);
    out.push(VERSION);
    out.extend_from_slice(&u.machine_id.to_le_bytes());
    out.extend_from_slice(&(u.p() as u32).to_le_bytes());
    out.extend_from_slice(&u.n.to_le_bytes());
    out.extend_from_slice(&u.rho.to_le_bytes());
    out.extend_from_slice(&(entries.len() as u32).to_le_bytes());
    for &(i, j, v) in entries {
        out.extend_from_slice(&i.to_le_bytes());
        out.extend_from_slice(&j.to_le_bytes());
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

fn read_u32(bytes: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(bytes[at..at + 4].try_into().expect("bounds checked by caller"))
}

fn read_f64(bytes: &[u8], at: usize) -> f64 {
    f64::from_le_bytes(bytes[at..at + 8].try_into().expect("bounds checked by caller"))
}

/// Inverse of [`encode_update`]. Structural problems (magic, version,
/// truncation, trailing bytes) surface as `MalformedFrame`; violations of
/// the update's own invariants (unsorted entries, stored zeros, indices
/// out of range) as `InvariantViolation`.
pub fn decode_update(bytes: &[u8]) -> Result<SparseUpdate> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::MalformedFrame(format!(
            "{} bytes is shorter than the {HEADER_LEN}-byte header",
            bytes.len()
        )));
    }
    if &bytes[0..4] != MAGIC {
        return Err(Error::MalformedFrame("bad magic".into()));
    }
    if bytes[4] != VERSION {
        return Err(Error::MalformedFrame(format!("unsupported version {}", bytes[4])));
    }
    let machine_id = read_u32(bytes, 5);
    let p = read_u32(bytes, 9);
    let n = read_u32(bytes, 13);
    let rho = read_f64(bytes, 17);
    let entry_count = read_u32(bytes, 25) as usize;
    let expected = HEADER_LEN + ENTRY_LEN * entry_count;
    if bytes.len() != expected {
        return Err(Error::MalformedFrame(format!(
            "expected {expected} bytes for {entry_count} entries, got {}",
            bytes.len()
        )));
    }
    if p == 0 {
        return Err(Error::MalformedFrame("p must be positive".into()));
    }
    let mut entries = Vec::with_capacity(entry_count);
    for k in 0..entry_count {
        let at = HEADER_LEN + ENTRY_LEN * k;
        entries.push((read_u32(bytes, at), read_u32(bytes, at + 4), read_f64(bytes, at + 8)));
    }
    let entries = SparseSymMatrix::new(p as usize, entries)?;
    let bandwidth_used = entries.count_diag() + 2 * entries.count_offdiag();
    Ok(SparseUpdate { machine_id, n, entries, rho, bandwidth_used })
}

/// A protocol message, one of the four exchange steps.
#[derive(Debug, Clone, PartialEq)]
pub enum Message {
    Hello { machine_id: u32 },
    Config { p: u32, n: u32, lambda: f64, bandwidth: u64, base_seed: u64 },
    Update(Vec<u8>),
    Ack { status: u8 },
}

const TAG_HELLO: u8 = 1;
const TAG_CONFIG: u8 = 2;
const TAG_UPDATE: u8 = 3;
const TAG_ACK: u8 = 4;

/// Largest payload the reader will accept; far above any legitimate
/// update (a dense p=1000 frame is ~8 MB) but low enough to fail fast on
/// a corrupted length prefix.
const MAX_PAYLOAD: u32 = 64 << 20;

pub fn write_message(w: &mut impl Write, msg: &Message) -> Result<()> {
    let mut payload = Vec::new();
    match msg {
        Message::Hello { machine_id } => {
            payload.push(TAG_HELLO);
            payload.extend_from_slice(&machine_id.to_le_bytes());
        }
        Message::Config { p, n, lambda, bandwidth, base_seed } => {
            payload.push(TAG_CONFIG);
            payload.extend_from_slice(&p.to_le_bytes());
            payload.extend_from_slice(&n.to_le_bytes());
            payload.extend_from_slice(&lambda.to_le_bytes());
            payload.extend_from_slice(&bandwidth.to_le_bytes());
            payload.extend_from_slice(&base_seed.to_le_bytes());
        }
        Message::Update(frame) => {
            payload.reserve(1 + frame.len());
            payload.push(TAG_UPDATE);
            payload.extend_from_slice(frame);
        }
        Message::Ack { status } => {
            payload.push(TAG_ACK);
            payload.push(*status);
        }
    }
    w.write_all(&(payload.len() as u32).to_le_bytes())?;
    w.write_all(&payload)?;
    w.flush()?;
    Ok(())
}

pub fn read_message(r: &mut impl Read) -> Result<Message> {
    let mut len_bytes = [0u8; 4];
    r.read_exact(&mut len_bytes)?;
    let len = u32::from_le_bytes(len_bytes);
    if len == 0 {
        return Err(Error::MalformedFrame("empty payload".into()));
    }
    if len > MAX_PAYLOAD {
        return Err(Error::MalformedFrame(format!("payload length {len} exceeds limit")));
    }
    let mut payload = vec![0u8; len as usize];
    r.read_exact(&mut payload)?;
    let body = &payload[1..];
    match payload[0] {
        TAG_HELLO if body.len() == 4 => Ok(Message::Hello { machine_id: read_u32(body, 0) }),
        TAG_HELLO => Err(Error::MalformedFrame("HELLO payload must be 4 bytes".into())),
        TAG_CONFIG if body.len() == 32 => Ok(Message::Config {
            p: read_u32(body, 0),
            n: read_u32(body, 4),
            lambda: read_f64(body, 8),
            bandwidth: u64::from_le_bytes(body[16..24].try_into().expect("length checked")),
            base_seed: u64::from_le_bytes(body[24..32].try_into().expect("length checked")),
        }),
        TAG_CONFIG => Err(Error::MalformedFrame("CONFIG payload must be 32 bytes".into())),
        TAG_UPDATE => Ok(Message::Update(body.to_vec())),
        TAG_ACK if body.len() == 1 => Ok(Message::Ack { status: body[0] }),
        TAG_ACK => Err(Error::MalformedFrame("ACK payload must be 1 byte".into())),
        tag => Err(Error::MalformedFrame(format!("unknown message tag {tag}"))),
    }
}

/// Worker side of one exchange over any reliable byte stream: announce,
/// receive the shared tuning, estimate, transmit once, await the verdict.
/// The returned byte is the hub's ACK status.
pub fn worker_session<S: Read + Write>(
    stream: &mut S,
    data: &DataMatrix,
    machine_id: u32,
) -> Result<u8> {
    write_message(stream, &Message::Hello { machine_id })?;
    let (p, n, lambda, bandwidth) = match read_message(stream)? {
        Message::Config { p, n, lambda, bandwidth, .. } => (p, n, lambda, bandwidth),
        Message::Ack { status } => return Ok(status),
        other => {
            return Err(Error::MalformedFrame(format!(
                "expected CONFIG or ACK after HELLO, got {other:?}"
            )))
        }
    };
    if data.p() != p as usize || data.n() != n as usize {
        return Err(Error::DimensionMismatch(format!(
            "local data is {}x{}, hub expects n={n}, p={p}",
            data.n(),
            data.p()
        )));
    }
    let update = machine_estimate(data, lambda, bandwidth as usize, machine_id)?;
    write_message(stream, &Message::Update(encode_update(&update)))?;
    match read_message(stream)? {
        Message::Ack { status } => Ok(status),
        other => Err(Error::MalformedFrame(format!("expected ACK, got {other:?}"))),
    }
}

/// Connects to the hub and runs one worker exchange.
pub fn worker_run(data: &DataMatrix, hub_addr: &str, machine_id: u32) -> Result<u8> {
    let mut stream = TcpStream::connect(hub_addr)
        .map_err(|e| Error::ConnectionFailed(format!("{hub_addr}: {e}")))?;
    stream.set_nodelay(true).ok();
    worker_session(&mut stream, data, machine_id)
}

/// What one accepted connection contributed.
enum SessionOutcome {
    Accepted(SparseUpdate),
    /// Duplicate or inconsistent; the hub keeps waiting for a valid update
    /// from the missing machine.
    Rejected,
}

fn hub_session<S: Read + Write>(
    stream: &mut S,
    config: &ExperimentConfig,
    received: &BTreeMap<u32, SparseUpdate>,
) -> Result<(u32, SessionOutcome)> {
    let machine_id = match read_message(stream)? {
        Message::Hello { machine_id } => machine_id,
        other => {
            return Err(Error::MalformedFrame(format!("expected HELLO, got {other:?}")))
        }
    };
    if received.contains_key(&machine_id) || machine_id as usize >= config.machines {
        write_message(stream, &Message::Ack { status: ACK_DUPLICATE })?;
        return Ok((machine_id, SessionOutcome::Rejected));
    }
    write_message(
        stream,
        &Message::Config {
            p: config.p as u32,
            n: config.n as u32,
            lambda: config.lambda(),
            bandwidth: config.bandwidth as u64,
            base_seed: config.base_seed,
        },
    )?;
    let frame = match read_message(stream).map_err(|e| timeout_for(e, machine_id))? {
        Message::Update(frame) => frame,
        other => {
            return Err(Error::MalformedFrame(format!("expected UPDATE, got {other:?}")))
        }
    };
    let update = decode_update(&frame)?;
    let consistent = update.machine_id == machine_id
        && update.p() == config.p
        && update.n as usize == config.n
        && update.bandwidth_used <= config.bandwidth;
    if !consistent {
        write_message(stream, &Message::Ack { status: ACK_REJECTED })?;
        return Ok((machine_id, SessionOutcome::Rejected));
    }
    write_message(stream, &Message::Ack { status: ACK_OK })?;
    Ok((machine_id, SessionOutcome::Accepted(update)))
}

/// A vanished or silent peer surfaces as a timeout attributed to the
/// machine the hub was talking to.
fn timeout_for(e: Error, machine_id: u32) -> Error {
    match &e {
        Error::Io(io_err)
            if matches!(
                io_err.kind(),
                io::ErrorKind::UnexpectedEof
                    | io::ErrorKind::TimedOut
                    | io::ErrorKind::WouldBlock
                    | io::ErrorKind::ConnectionReset
            ) =>
        {
            Error::Timeout { machine_id: Some(machine_id) }
        }
        _ => e,
    }
}

/// Binds the configured address and serves one full round.
pub fn hub_serve(config: &ExperimentConfig) -> Result<HubEstimate> {
    let addr = format!("{}:{}", config.address, config.port);
    let listener = TcpListener::bind(&addr)
        .map_err(|e| Error::ConnectionFailed(format!("bind {addr}: {e}")))?;
    hub_serve_on(config, listener)
}

/// Serves one round on an already-bound listener: accepts connections
/// until every machine id in [0, M) has delivered a valid update, then
/// aggregates, re-estimates variances, and applies the final threshold.
/// Updates are averaged in machine-id order for bit-reproducibility.
pub fn hub_serve_on(config: &ExperimentConfig, listener: TcpListener) -> Result<HubEstimate> {
    config.validate()?;
    let deadline = Instant::now() + Duration::from_millis(config.timeout_ms);
    listener
        .set_nonblocking(true)
        .map_err(|e| Error::ConnectionFailed(format!("listener setup: {e}")))?;
    let mut received: BTreeMap<u32, SparseUpdate> = BTreeMap::new();
    while received.len() < config.machines {
        let (stream, _) = match listener.accept() {
            Ok(pair) => pair,
            Err(e) if e.kind() == io::ErrorKind::WouldBlock => {
                if Instant::now() >= deadline {
                    return Err(Error::Timeout { machine_id: None });
                }
                std::thread::sleep(Duration::from_millis(2));
                continue;
            }
            Err(e) => return Err(Error::ConnectionFailed(format!("accept: {e}"))),
        };
        stream
            .set_nonblocking(false)
            .and_then(|_| {
                let left = deadline.saturating_duration_since(Instant::now());
                let left = left.max(Duration::from_millis(1));
                stream.set_read_timeout(Some(left))?;
                stream.set_write_timeout(Some(left))
            })
            .map_err(|e| Error::ConnectionFailed(format!("session setup: {e}")))?;
        let mut stream = stream;
        let (machine_id, outcome) = hub_session(&mut stream, config, &received)?;
        if let SessionOutcome::Accepted(update) = outcome {
            received.insert(machine_id, update);
        }
    }
    let updates: Vec<SparseUpdate> = received.into_values().collect();
    let theta_bar = aggregate(&updates)?;
    let sigma_m = hub_variance(&theta_bar)?;
    final_threshold(&theta_bar, &sigma_m, config.tau(), config.machines)
}
