//! Class vocabulary and label sets.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The 18 default event classes, in their canonical order.
pub const DEFAULT_CLASSES: [&str; 18] = [
    "AlarmClock",
    "BicycleBell",
    "Blender",
    "Buzzer",
    "Clapping",
    "Cough",
    "CupboardOpenClose",
    "Dishes",
    "Doorbell",
    "Footsteps",
    "HairDryer",
    "MechanicalFans",
    "MusicalKeyboard",
    "Percussion",
    "Pour",
    "Speech",
    "Typing",
    "VacuumCleaner",
];

/// Ordered, duplicate-free list of class names. The index ↔ name mapping is
/// stable for the lifetime of the vocabulary.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassVocabulary {
    labels: Vec<String>,
}

impl ClassVocabulary {
    pub fn new(labels: Vec<String>) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for l in &labels {
            if !seen.insert(l.clone()) {
                return Err(Error::InvalidData(format!("duplicate class '{l}' in vocabulary")));
            }
        }
        if labels.is_empty() {
            return Err(Error::InvalidData("vocabulary must not be empty".into()));
        }
        Ok(Self { labels })
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn contains(&self, label: &str) -> bool {
        self.index_of(label).is_some()
    }

    pub fn require(&self, label: &str) -> Result<usize> {
        self.index_of(label).ok_or_else(|| Error::UnknownLabel(label.to_string()))
    }
}

impl Default for ClassVocabulary {
    fn default() -> Self {
        Self { labels: DEFAULT_CLASSES.iter().map(|s| s.to_string()).collect() }
    }
}

/// A set of class names drawn from one vocabulary.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct LabelSet {
    labels: BTreeSet<String>,
}

impl LabelSet {
    pub fn new<I: IntoIterator<Item = S>, S: Into<String>>(
        labels: I,
        vocab: &ClassVocabulary,
    ) -> Result<Self> {
        let mut set = BTreeSet::new();
        for l in labels {
            let l = l.into();
            vocab.require(&l)?;
            set.insert(l);
        }
        Ok(Self { labels: set })
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn contains(&self, label: &str) -> bool {
        self.labels.contains(label)
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.labels.iter().map(|s| s.as_str())
    }

    pub fn intersection_count(&self, other: &LabelSet) -> usize {
        self.labels.intersection(&other.labels).count()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_has_18_unique_classes() {
        let v = ClassVocabulary::default();
        assert_eq!(v.len(), 18);
        assert_eq!(v.index_of("AlarmClock"), Some(0));
        assert_eq!(v.index_of("VacuumCleaner"), Some(17));
    }

    #[test]
    fn duplicates_rejected() {
        assert!(ClassVocabulary::new(vec!["A".into(), "A".into()]).is_err());
    }

    #[test]
    fn label_set_rejects_unknown_class() {
        let v = ClassVocabulary::default();
        assert!(matches!(LabelSet::new(["NotAClass"], &v), Err(Error::UnknownLabel(_))));
    }
}
