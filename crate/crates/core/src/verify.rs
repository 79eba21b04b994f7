//! Verification records: one entry per checked law, with a witness on failure.

use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LawCheck {
    pub law: String,
    pub status: Status,
    /// Number of instances checked.
    pub checked: u64,
    /// The first failing instance.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<Value>,
}

impl LawCheck {
    pub fn passed(&self) -> bool {
        self.status == Status::Pass
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct VerificationRecord {
    pub subject: String,
    pub checks: Vec<LawCheck>,
}

impl VerificationRecord {
    pub fn new(subject: impl Into<String>) -> Self {
        VerificationRecord {
            subject: subject.into(),
            checks: Vec::new(),
        }
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(LawCheck::passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &LawCheck> {
        self.checks.iter().filter(|c| !c.passed())
    }

    pub fn get(&self, law: &str) -> Option<&LawCheck> {
        self.checks.iter().find(|c| c.law == law)
    }

    /// Checks whose name starts with `prefix`.
    pub fn matching<'a>(&'a self, prefix: &'a str) -> impl Iterator<Item = &'a LawCheck> + 'a {
        self.checks.iter().filter(move |c| c.law.starts_with(prefix))
    }

    pub fn push(&mut self, law: Law) {
        self.checks.push(law.finish());
    }

    /// Record a single yes/no fact.
    pub fn assert(&mut self, law: impl Into<String>, ok: bool, witness: impl FnOnce() -> Value) {
        let mut l = Law::new(law);
        l.check(ok, witness);
        self.push(l);
    }

    pub fn extend(&mut self, other: VerificationRecord) {
        self.checks.extend(other.checks);
    }
}

/// Accumulates instances of one law.
#[derive(Debug)]
pub struct Law {
    name: String,
    checked: u64,
    witness: Option<Value>,
}

impl Law {
    pub fn new(name: impl Into<String>) -> Self {
        Law {
            name: name.into(),
            checked: 0,
            witness: None,
        }
    }

    pub fn check(&mut self, ok: bool, witness: impl FnOnce() -> Value) {
        self.checked += 1;
        if !ok && self.witness.is_none() {
            self.witness = Some(witness());
        }
    }

    pub fn failed(&self) -> bool {
        self.witness.is_some()
    }

    pub fn finish(self) -> LawCheck {
        LawCheck {
            status: if self.witness.is_some() {
                Status::Fail
            } else {
                Status::Pass
            },
            law: self.name,
            checked: self.checked,
            witness: self.witness,
        }
    }
}
