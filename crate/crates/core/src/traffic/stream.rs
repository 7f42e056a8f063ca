use serde::{Deserialize, Serialize};

use super::frame::{MacAddr, StreamKey};
use super::TrafficError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct StreamHandle(pub u32);

/// Match pattern over a [`StreamKey`]; `None` fields are wildcards.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StreamPattern {
    #[serde(default)]
    pub dest_mac: Option<MacAddr>,
    #[serde(default)]
    pub vlan_id: Option<u16>,
    #[serde(default)]
    pub pcp: Option<u8>,
}

impl StreamPattern {
    pub fn exact(key: StreamKey) -> Self {
        StreamPattern {
            dest_mac: Some(key.dest_mac),
            vlan_id: Some(key.vlan_id),
            pcp: Some(key.pcp),
        }
    }

    pub fn is_exact(&self) -> bool {
        self.dest_mac.is_some() && self.vlan_id.is_some() && self.pcp.is_some()
    }

    pub fn matches(&self, key: &StreamKey) -> bool {
        self.dest_mac.is_none_or(|m| m == key.dest_mac)
            && self.vlan_id.is_none_or(|v| v == key.vlan_id)
            && self.pcp.is_none_or(|p| p == key.pcp)
    }
}

/// Ordered, first-match-wins identification table.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StreamRules {
    rules: Vec<(StreamPattern, StreamHandle)>,
}

impl StreamRules {
    pub fn identify(&self, key: Option<&StreamKey>) -> Option<StreamHandle> {
        let key = key?;
        self.rules
            .iter()
            .find(|(p, _)| p.matches(key))
            .map(|(_, h)| *h)
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }
}

pub fn make_stream_rules<I>(rules: I) -> Result<StreamRules, TrafficError>
where
    I: IntoIterator<Item = (StreamPattern, StreamHandle)>,
{
    let rules: Vec<_> = rules.into_iter().collect();
    for (i, (p, _)) in rules.iter().enumerate() {
        if p.is_exact() && rules[..i].iter().any(|(q, _)| q == p) {
            return Err(TrafficError::DuplicateExactRule(i));
        }
    }
    Ok(StreamRules { rules })
}
