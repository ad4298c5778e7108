use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::corpus::PrivacyLabel;
use crate::error::{Error, Result};

/// Calls an image private when any of its tags names people.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RulePolicy {
    person_tags: BTreeSet<String>,
}

impl Default for RulePolicy {
    fn default() -> Self {
        RulePolicy {
            person_tags: ["people", "men", "women"].iter().map(|s| s.to_string()).collect(),
        }
    }
}

impl RulePolicy {
    pub fn new<I: IntoIterator<Item = S>, S: Into<String>>(tags: I) -> Result<Self> {
        let person_tags: BTreeSet<String> = tags.into_iter().map(Into::into).collect();
        if person_tags.is_empty() {
            return Err(Error::arg("rule policy needs at least one person tag"));
        }
        Ok(RulePolicy { person_tags })
    }

    pub fn person_tags(&self) -> &BTreeSet<String> {
        &self.person_tags
    }
}

pub fn rule_tag_classify<S: AsRef<str>>(policy: &RulePolicy, user_tags: &[S]) -> PrivacyLabel {
    if user_tags.iter().any(|t| policy.person_tags.contains(t.as_ref())) {
        PrivacyLabel::Private
    } else {
        PrivacyLabel::Public
    }
}
