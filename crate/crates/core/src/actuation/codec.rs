//! Host to base serial framing.
//!
//! ```text
//! AA 55 | channel u8 | opcode u8 | payload (fixed per opcode) | crc8
//! ```
//!
//! CRC-8 uses polynomial 0x07, initial value 0x00, no reflection, and covers
//! channel, opcode and payload. Multi-byte fields are little-endian.
//!
//! | opcode | name       | payload                                                    |
//! |--------|------------|------------------------------------------------------------|
//! | 0x01   | SET_TARGET | i32 target (µm)                                            |
//! | 0x02   | QUERY      | none                                                       |
//! | 0x03   | STOP       | none                                                       |
//! | 0x80   | TELEMETRY  | i32 position (µm), i32 velocity (µm/s), u16 torque (×1000), u8 flags (bit 0 = faulted) |

pub const SYNC: [u8; 2] = [0xAA, 0x55];
/// Sync, channel, opcode and CRC.
pub const OVERHEAD: usize = 5;
pub const CRC8_POLY: u8 = 0x07;

const CRC8_TABLE: [u8; 256] = build_crc8_table();

const fn build_crc8_table() -> [u8; 256] {
    let mut table = [0u8; 256];
    let mut i = 0;
    while i < 256 {
        let mut crc = i as u8;
        let mut bit = 0;
        while bit < 8 {
            crc = if crc & 0x80 != 0 {
                (crc << 1) ^ CRC8_POLY
            } else {
                crc << 1
            };
            bit += 1;
        }
        table[i] = crc;
        i += 1;
    }
    table
}

pub fn crc8(bytes: &[u8]) -> u8 {
    bytes.iter().fold(0u8, |crc, &b| CRC8_TABLE[(crc ^ b) as usize])
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum Opcode {
    SetTarget = 0x01,
    Query = 0x02,
    Stop = 0x03,
    Telemetry = 0x80,
}

impl Opcode {
    pub fn from_byte(b: u8) -> Option<Self> {
        match b {
            0x01 => Some(Self::SetTarget),
            0x02 => Some(Self::Query),
            0x03 => Some(Self::Stop),
            0x80 => Some(Self::Telemetry),
            _ => None,
        }
    }

    pub fn payload_len(self) -> usize {
        match self {
            Self::SetTarget => 4,
            Self::Query | Self::Stop => 0,
            Self::Telemetry => 11,
        }
    }

    pub fn frame_len(self) -> usize {
        OVERHEAD + self.payload_len()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Payload {
    SetTarget {
        target_um: i32,
    },
    Query,
    Stop,
    Telemetry {
        position_um: i32,
        velocity_um_s: i32,
        torque_milli: u16,
        faulted: bool,
    },
}

impl Payload {
    pub fn opcode(&self) -> Opcode {
        match self {
            Payload::SetTarget { .. } => Opcode::SetTarget,
            Payload::Query => Opcode::Query,
            Payload::Stop => Opcode::Stop,
            Payload::Telemetry { .. } => Opcode::Telemetry,
        }
    }

    fn write_to(&self, out: &mut Vec<u8>) {
        match *self {
            Payload::SetTarget { target_um } => out.extend_from_slice(&target_um.to_le_bytes()),
            Payload::Query | Payload::Stop => {}
            Payload::Telemetry {
                position_um,
                velocity_um_s,
                torque_milli,
                faulted,
            } => {
                out.extend_from_slice(&position_um.to_le_bytes());
                out.extend_from_slice(&velocity_um_s.to_le_bytes());
                out.extend_from_slice(&torque_milli.to_le_bytes());
                out.push(faulted as u8);
            }
        }
    }

    fn read(opcode: Opcode, bytes: &[u8]) -> Result<Self, CodecError> {
        let i32_at = |at: usize| i32::from_le_bytes(bytes[at..at + 4].try_into().unwrap());
        Ok(match opcode {
            Opcode::SetTarget => Payload::SetTarget { target_um: i32_at(0) },
            Opcode::Query => Payload::Query,
            Opcode::Stop => Payload::Stop,
            Opcode::Telemetry => {
                let flags = bytes[10];
                if flags & !1 != 0 {
                    return Err(CodecError::ReservedFlags(flags));
                }
                Payload::Telemetry {
                    position_um: i32_at(0),
                    velocity_um_s: i32_at(4),
                    torque_milli: u16::from_le_bytes([bytes[8], bytes[9]]),
                    faulted: flags & 1 == 1,
                }
            }
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Packet {
    pub channel: u8,
    pub payload: Payload,
}

impl Packet {
    pub fn opcode(&self) -> Opcode {
        self.payload.opcode()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, thiserror::Error)]
pub enum CodecError {
    #[error("frame shorter than {needed} bytes (got {got})")]
    ShortFrame { needed: usize, got: usize },
    #[error("bad sync bytes {0:02X} {1:02X}")]
    BadSync(u8, u8),
    #[error("crc mismatch: frame carries {found:02X}, computed {computed:02X}")]
    BadCrc { found: u8, computed: u8 },
    #[error("unknown opcode {0:02X}")]
    UnknownOpcode(u8),
    #[error("opcode {opcode:02X} expects a {expected}-byte frame, got {got}")]
    LengthMismatch { opcode: u8, expected: usize, got: usize },
    #[error("reserved telemetry flag bits set: {0:02X}")]
    ReservedFlags(u8),
}

pub fn encode_frame(channel: u8, payload: &Payload) -> Vec<u8> {
    let opcode = payload.opcode();
    let mut out = Vec::with_capacity(opcode.frame_len());
    out.extend_from_slice(&SYNC);
    out.push(channel);
    out.push(opcode as u8);
    payload.write_to(&mut out);
    out.push(crc8(&out[2..]));
    out
}

/// Decodes exactly one frame occupying all of `bytes`.
pub fn decode_frame(bytes: &[u8]) -> Result<Packet, CodecError> {
    if bytes.len() < OVERHEAD {
        return Err(CodecError::ShortFrame {
            needed: OVERHEAD,
            got: bytes.len(),
        });
    }
    if bytes[..2] != SYNC {
        return Err(CodecError::BadSync(bytes[0], bytes[1]));
    }
    let (body, crc) = bytes[2..].split_at(bytes.len() - 3);
    let computed = crc8(body);
    if computed != crc[0] {
        return Err(CodecError::BadCrc {
            found: crc[0],
            computed,
        });
    }
    let opcode = Opcode::from_byte(body[1]).ok_or(CodecError::UnknownOpcode(body[1]))?;
    if bytes.len() != opcode.frame_len() {
        return Err(CodecError::LengthMismatch {
            opcode: opcode as u8,
            expected: opcode.frame_len(),
            got: bytes.len(),
        });
    }
    Ok(Packet {
        channel: body[0],
        payload: Payload::read(opcode, &body[2..])?,
    })
}

/// Splits a byte stream into frames, resynchronising on `AA 55`.
#[derive(Debug, Default)]
pub struct FrameReader {
    buf: Vec<u8>,
}

impl FrameReader {
    pub fn new() -> Self {
        Self::default()
    }

    /// Feeds bytes and returns every complete frame found so far. Corrupt
    /// frames are reported and skipped one byte at a time.
    pub fn push(&mut self, bytes: &[u8]) -> Vec<Result<Packet, CodecError>> {
        self.buf.extend_from_slice(bytes);
        let mut out = Vec::new();
        loop {
            match self.buf.windows(2).position(|w| w == SYNC) {
                Some(0) => {}
                Some(start) => {
                    self.buf.drain(..start);
                }
                None => {
                    // keep a trailing 0xAA that may begin the next sync
                    let keep = usize::from(self.buf.last() == Some(&SYNC[0]));
                    self.buf.drain(..self.buf.len() - keep);
                    break;
                }
            }
            if self.buf.len() < 4 {
                break;
            }
            let Some(opcode) = Opcode::from_byte(self.buf[3]) else {
                out.push(Err(CodecError::UnknownOpcode(self.buf[3])));
                self.buf.drain(..1);
                continue;
            };
            let len = opcode.frame_len();
            if self.buf.len() < len {
                break;
            }
            match decode_frame(&self.buf[..len]) {
                Ok(p) => {
                    out.push(Ok(p));
                    self.buf.drain(..len);
                }
                Err(e) => {
                    out.push(Err(e));
                    self.buf.drain(..1);
                }
            }
        }
        out
    }
}

/// Millimetres to whole micrometres, rounded and saturated to `i32`.
pub fn mm_to_um(mm: f64) -> i32 {
    let um = (mm * 1000.0).round();
    if um.is_nan() {
        0
    } else {
        um.clamp(i32::MIN as f64, i32::MAX as f64) as i32
    }
}

pub fn um_to_mm(um: i32) -> f64 {
    um as f64 / 1000.0
}
