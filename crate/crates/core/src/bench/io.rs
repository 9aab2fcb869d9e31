//! Instance JSON format.
//!
//! ```json
//! {
//!   "num_users": 2,
//!   "num_tx_antennas": 2,
//!   "rate_targets": [1.0, 2.0],
//!   "channels": [[[1.0, 0.0], [0.0, 0.0]], [[0.0, 0.0], [0.0, 1.0]]]
//! }
//! ```
//! Each channel entry is a `[re, im]` pair. Doubles are written in shortest
//! round-trip form.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::BenchError;
use crate::error::ModelError;
use crate::instance::ProblemInstance;
use crate::linalg::C64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    pub num_users: usize,
    pub num_tx_antennas: usize,
    pub rate_targets: Vec<f64>,
    pub channels: Vec<Vec<[f64; 2]>>,
}

impl From<&ProblemInstance> for InstanceFile {
    fn from(inst: &ProblemInstance) -> Self {
        Self {
            num_users: inst.num_users(),
            num_tx_antennas: inst.num_tx_antennas(),
            rate_targets: inst.rate_targets().to_vec(),
            channels: inst
                .channels()
                .iter()
                .map(|h| h.iter().map(|z| [z.re, z.im]).collect())
                .collect(),
        }
    }
}

impl InstanceFile {
    pub fn into_instance(self) -> Result<ProblemInstance, BenchError> {
        let field = |name: &str, source: ModelError| {
            BenchError::Validation(format!("field `{name}`: {source}"))
        };
        if self.channels.len() != self.num_users {
            return Err(field(
                "channels",
                ModelError::LengthMismatch {
                    expected: self.num_users,
                    got: self.channels.len(),
                },
            ));
        }
        if self.rate_targets.len() != self.num_users {
            return Err(field(
                "rate_targets",
                ModelError::LengthMismatch {
                    expected: self.num_users,
                    got: self.rate_targets.len(),
                },
            ));
        }
        for (user, h) in self.channels.iter().enumerate() {
            if h.len() != self.num_tx_antennas {
                return Err(field(
                    "channels",
                    ModelError::ChannelLength {
                        user,
                        expected: self.num_tx_antennas,
                        got: h.len(),
                    },
                ));
            }
        }
        let channels = self
            .channels
            .into_iter()
            .map(|h| h.into_iter().map(|[re, im]| C64::new(re, im)).collect())
            .collect();
        ProblemInstance::new(channels, self.rate_targets).map_err(|e| {
            let name = match e {
                ModelError::InvalidTarget { .. } => "rate_targets",
                ModelError::NoUsers => "num_users",
                ModelError::NoAntennas => "num_tx_antennas",
                _ => "channels",
            };
            field(name, e)
        })
    }
}

pub fn parse_instance(text: &str) -> Result<ProblemInstance, BenchError> {
    let file: InstanceFile = serde_json::from_str(text)
        .map_err(|e| BenchError::Validation(format!("instance schema error: {e}")))?;
    file.into_instance()
}

pub fn load_instance(path: &Path) -> Result<ProblemInstance, BenchError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| BenchError::Io(format!("{}: {e}", path.display())))?;
    parse_instance(&text).map_err(|e| match e {
        BenchError::Validation(msg) => BenchError::Validation(format!("{}: {msg}", path.display())),
        other => other,
    })
}

pub fn instance_to_json(inst: &ProblemInstance) -> String {
    serde_json::to_string_pretty(&InstanceFile::from(inst)).expect("instance serializes")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schema_errors_carry_position() {
        let err =
            parse_instance("{\n  \"num_users\": 1,\n  \"num_tx_antennas\": \"x\"\n}").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line 3"), "{msg}");
    }

    #[test]
    fn invariant_errors_name_the_field() {
        let text =
            r#"{"num_users":1,"num_tx_antennas":1,"rate_targets":[-1.0],"channels":[[[1.0,0.0]]]}"#;
        let msg = parse_instance(text).unwrap_err().to_string();
        assert!(msg.contains("rate_targets"), "{msg}");
        let text = r#"{"num_users":2,"num_tx_antennas":1,"rate_targets":[1.0,1.0],"channels":[[[1.0,0.0]]]}"#;
        assert!(parse_instance(text)
            .unwrap_err()
            .to_string()
            .contains("channels"));
    }
}
