//! Console message protocol, version 1.
//!
//! Every message is a JSON object with a `"v": 1` field and a `"type"`
//! discriminator.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::actuation::MotorChannelConfig;
use crate::dsl::{RepairNote, ResolvedSequence};
use crate::gestures::LibraryDocument;
use crate::kinematics::{BendState, PuppetModel};

use super::Phase;

pub const PROTOCOL_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ClientMessage {
    /// Push-to-talk start and stop in one message.
    Utterance {
        text: String,
    },
    PttStart,
    PttStop {
        #[serde(default)]
        text: String,
    },
    TriggerGesture {
        name: String,
        /// Overrides the DSL number for the triggered item.
        #[serde(default)]
        number_s: Option<f64>,
    },
    Preempt {
        sequence: String,
    },
    UpdateConfig(ConfigUpdate),
    Reset,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigUpdate {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<PuppetModel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gestures: Option<LibraryDocument>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub channels: Option<Vec<MotorChannelConfig>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoseMessage {
    pub tick: u64,
    pub t_s: f64,
    pub phase: Phase,
    pub angles_deg: BendState,
    /// Tip position per section, millimetres.
    pub tips_mm: BTreeMap<String, [f64; 3]>,
    /// FK frame origins per section: root, unit boundaries, rigid tip.
    pub polylines_mm: BTreeMap<String, Vec<[f64; 3]>>,
    pub faulted_channels: Vec<u8>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerMessage {
    Pose(PoseMessage),
    Event {
        name: String,
        #[serde(default)]
        detail: Value,
    },
    SequenceEcho {
        raw: String,
        resolved: String,
        repairs: Vec<RepairNote>,
    },
    Fault {
        tick: u64,
        channel: u8,
        torque_estimate: f64,
        torque_limit: f64,
    },
    ConfigAck {
        ok: bool,
        errors: Vec<String>,
    },
}

impl ServerMessage {
    pub fn event(name: &str, detail: Value) -> Self {
        ServerMessage::Event {
            name: name.to_string(),
            detail,
        }
    }

    pub fn echo(raw: &str, resolved: &ResolvedSequence, repairs: &[RepairNote]) -> Self {
        ServerMessage::SequenceEcho {
            raw: raw.to_string(),
            resolved: resolved.to_text(),
            repairs: repairs.to_vec(),
        }
    }
}

#[derive(Serialize)]
struct EnvelopeOut<'a, T> {
    v: u32,
    #[serde(flatten)]
    body: &'a T,
}

/// Serializes with the version field.
pub fn encode<T: Serialize>(msg: &T) -> String {
    serde_json::to_string(&EnvelopeOut {
        v: PROTOCOL_VERSION,
        body: msg,
    })
    .expect("protocol messages serialize")
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum ProtocolError {
    #[error("malformed message: {0}")]
    Malformed(String),
    #[error("unsupported protocol version {0:?}")]
    Version(Option<u64>),
}

impl ProtocolError {
    pub fn code(&self) -> &'static str {
        match self {
            ProtocolError::Malformed(_) => "Malformed",
            ProtocolError::Version(_) => "VersionMismatch",
        }
    }
}

fn split_version(text: &str) -> Result<Value, ProtocolError> {
    let mut value: Value = serde_json::from_str(text).map_err(|e| ProtocolError::Malformed(e.to_string()))?;
    let obj = value
        .as_object_mut()
        .ok_or_else(|| ProtocolError::Malformed("expected a JSON object".into()))?;
    match obj.remove("v") {
        Some(Value::Number(n)) if n.as_u64() == Some(PROTOCOL_VERSION as u64) => Ok(value),
        Some(v) => Err(ProtocolError::Version(v.as_u64())),
        None => Err(ProtocolError::Version(None)),
    }
}

pub fn decode_client(text: &str) -> Result<ClientMessage, ProtocolError> {
    let value = split_version(text)?;
    serde_json::from_value(value).map_err(|e| ProtocolError::Malformed(e.to_string()))
}

pub fn decode_server(text: &str) -> Result<ServerMessage, ProtocolError> {
    let value = split_version(text)?;
    serde_json::from_value(value).map_err(|e| ProtocolError::Malformed(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn client_round_trip() {
        let msgs = vec![
            ClientMessage::Utterance { text: "Hi".into() },
            ClientMessage::PttStart,
            ClientMessage::PttStop { text: "x".into() },
            ClientMessage::TriggerGesture {
                name: "Dancing".into(),
                number_s: Some(3.0),
            },
            ClientMessage::Preempt {
                sequence: "[Joy][1]".into(),
            },
            ClientMessage::UpdateConfig(ConfigUpdate::default()),
            ClientMessage::Reset,
        ];
        for m in msgs {
            let text = encode(&m);
            assert!(text.starts_with(r#"{"v":1,"type":"#), "{text}");
            assert_eq!(decode_client(&text).unwrap(), m);
        }
    }

    #[test]
    fn wire_shapes() {
        assert_eq!(
            decode_client(r#"{"v":1,"type":"utterance","text":"Hi, how are you today?"}"#).unwrap(),
            ClientMessage::Utterance {
                text: "Hi, how are you today?".into()
            }
        );
        assert_eq!(
            decode_client(r#"{"type":"ptt_start","v":1}"#).unwrap(),
            ClientMessage::PttStart
        );
        let ack = encode(&ServerMessage::ConfigAck {
            ok: true,
            errors: vec![],
        });
        assert_eq!(ack, r#"{"v":1,"type":"config_ack","ok":true,"errors":[]}"#);
        let ev = encode(&ServerMessage::event("phase", json!({"to": "idle"})));
        assert_eq!(ev, r#"{"v":1,"type":"event","name":"phase","detail":{"to":"idle"}}"#);
    }

    #[test]
    fn version_and_shape_errors() {
        assert_eq!(decode_client(r#"{"type":"reset"}"#), Err(ProtocolError::Version(None)));
        assert_eq!(
            decode_client(r#"{"v":2,"type":"reset"}"#),
            Err(ProtocolError::Version(Some(2)))
        );
        assert!(matches!(decode_client("[]"), Err(ProtocolError::Malformed(_))));
        assert!(matches!(
            decode_client(r#"{"v":1,"type":"dance"}"#),
            Err(ProtocolError::Malformed(_))
        ));
        assert!(matches!(
            decode_client(r#"{"v":1,"type":"utterance","text":"a","x":1}"#),
            Err(ProtocolError::Malformed(_))
        ));
    }
}
