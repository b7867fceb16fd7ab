use serde::{Deserialize, Serialize};

use super::state::FockArray;
use super::C64;
use crate::error::{domain, Result};

/// Self-describing JSON record of a pure state.
///
/// ```json
/// {
///   "format": "fock-array/1",
///   "modes": 3,
///   "cutoff": 1,
///   "indexing": "occupation tuples in mode order, terms sorted lexicographically",
///   "terms": [{"occupation": [0,1,0], "re": 0.7071, "im": 0.0}, ...]
/// }
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateDump {
    pub format: String,
    pub modes: usize,
    pub cutoff: u16,
    pub indexing: String,
    pub terms: Vec<DumpTerm>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DumpTerm {
    pub occupation: Vec<u16>,
    pub re: f64,
    pub im: f64,
}

pub const DUMP_FORMAT: &str = "fock-array/1";
const INDEXING: &str = "occupation tuples in mode order, terms sorted lexicographically";

impl StateDump {
    pub fn from_state(s: &FockArray) -> Self {
        StateDump {
            format: DUMP_FORMAT.to_string(),
            modes: s.modes(),
            cutoff: s.cutoff(),
            indexing: INDEXING.to_string(),
            terms: s.terms().map(|(o, a)| DumpTerm { occupation: o.clone(), re: a.re, im: a.im }).collect(),
        }
    }

    pub fn to_state(&self) -> Result<FockArray> {
        if self.format != DUMP_FORMAT {
            return Err(domain(format!("unknown dump format {:?}", self.format)));
        }
        FockArray::from_terms(
            self.modes,
            self.cutoff,
            self.terms.iter().map(|t| (t.occupation.clone(), C64::new(t.re, t.im))),
        )
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("dump serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| domain(format!("bad state dump: {e}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::combinatorics::CodeParams;
    use crate::fock_sim::build_resource_state;

    #[test]
    fn round_trip() {
        let om = build_resource_state(CodeParams::new(1, 2).unwrap()).unwrap();
        let dump = StateDump::from_state(&om);
        assert_eq!(dump.terms[0].occupation, vec![0, 1, 0]);
        let back = StateDump::from_json(&dump.to_json()).unwrap().to_state().unwrap();
        assert_eq!(back, om);
    }

    #[test]
    fn rejects_unknown_format() {
        let mut d = StateDump::from_state(&FockArray::vacuum(1, 1));
        d.format = "other".into();
        assert!(d.to_state().is_err());
        assert!(StateDump::from_json("{").is_err());
    }
}
