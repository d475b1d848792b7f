//! Control protocol: command envelopes in, replies out. Telemetry frames
//! are [`beltline_core::sim::TelemetryFrame`].

use beltline_core::controller::ParamsPatch;
use beltline_core::scenarios::ScenarioConfig;
use beltline_core::sim::PROTO_VERSION;
use beltline_core::CoreError;
use serde::{Deserialize, Serialize};
use serde_json::Value;

/// `{id, cmd, args}` as sent by a client. `id` is echoed back verbatim.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    #[serde(default)]
    pub id: Value,
    pub cmd: String,
    #[serde(default)]
    pub args: Value,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Command {
    Start,
    Stop,
    SetParams(ParamsPatch),
    SetScenario(ScenarioConfig),
    SnapshotFrame,
}

impl Command {
    pub const NAMES: [&'static str; 5] = ["start", "stop", "set_params", "set_scenario", "snapshot_frame"];

    pub fn parse(env: &Envelope) -> Result<Command, ErrorBody> {
        let args = || if env.args.is_null() { Value::Object(Default::default()) } else { env.args.clone() };
        let bad_args = |e: serde_json::Error| ErrorBody::protocol(format!("bad arguments for `{}`: {e}", env.cmd));
        match env.cmd.as_str() {
            "start" => Ok(Command::Start),
            "stop" => Ok(Command::Stop),
            "snapshot_frame" => Ok(Command::SnapshotFrame),
            "set_params" => serde_json::from_value(args()).map(Command::SetParams).map_err(bad_args),
            "set_scenario" => serde_json::from_value(args()).map(Command::SetScenario).map_err(bad_args),
            other => Err(ErrorBody::protocol(format!(
                "unknown command `{other}` (expected one of {})",
                Command::NAMES.join(", ")
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    /// `range`, `invalid`, `protocol` or `unavailable`.
    pub kind: String,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub field: Option<String>,
}

impl ErrorBody {
    pub fn protocol(message: impl Into<String>) -> Self {
        Self {
            kind: "protocol".into(),
            message: message.into(),
            field: None,
        }
    }

    pub fn unavailable(message: impl Into<String>) -> Self {
        Self {
            kind: "unavailable".into(),
            message: message.into(),
            field: None,
        }
    }

    pub fn is_protocol(&self) -> bool {
        self.kind == "protocol"
    }
}

impl From<CoreError> for ErrorBody {
    fn from(e: CoreError) -> Self {
        Self {
            kind: e.kind().into(),
            message: e.to_string(),
            field: e.field().map(str::to_owned),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reply {
    pub proto_version: u32,
    pub id: Value,
    pub ok: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<ErrorBody>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub result: Option<Value>,
}

impl Reply {
    pub fn ok(id: Value, result: Option<Value>) -> Self {
        Self {
            proto_version: PROTO_VERSION,
            id,
            ok: true,
            error: None,
            result,
        }
    }

    pub fn err(id: Value, error: ErrorBody) -> Self {
        Self {
            proto_version: PROTO_VERSION,
            id,
            ok: false,
            error: Some(error),
            result: None,
        }
    }
}
