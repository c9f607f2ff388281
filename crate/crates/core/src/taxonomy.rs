//! Lexical question categories.
//!
//! * object identification: the first word is `what`, `where` or `which`
//! * quantity: the words `how many` appear in sequence
//! * color: the word `color` or `colour` appears
//!
//! A question may fall into several categories; `Other` is used only when
//! none of the rules fire.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum QuestionCategory {
    ObjectIdentification,
    Quantity,
    Color,
    Other,
}

impl QuestionCategory {
    /// Canonical listing order (report columns).
    pub const ALL: [QuestionCategory; 4] = [
        QuestionCategory::ObjectIdentification,
        QuestionCategory::Quantity,
        QuestionCategory::Color,
        QuestionCategory::Other,
    ];

    /// Order in which a record's primary category is picked for routing.
    pub const ROUTING_PRIORITY: [QuestionCategory; 4] = [
        QuestionCategory::Quantity,
        QuestionCategory::Color,
        QuestionCategory::ObjectIdentification,
        QuestionCategory::Other,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            QuestionCategory::ObjectIdentification => "OBJECT_IDENTIFICATION",
            QuestionCategory::Quantity => "QUANTITY",
            QuestionCategory::Color => "COLOR",
            QuestionCategory::Other => "OTHER",
        }
    }

    fn bit(self) -> u8 {
        1 << (self as u8)
    }
}

impl fmt::Display for QuestionCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for QuestionCategory {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        QuestionCategory::ALL
            .into_iter()
            .find(|c| c.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::invalid(format!("unknown question category {s:?}")))
    }
}

/// A set of categories, iterated in [`QuestionCategory::ALL`] order.
#[derive(Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct CategorySet(u8);

impl CategorySet {
    pub const fn empty() -> Self {
        Self(0)
    }

    pub fn insert(&mut self, c: QuestionCategory) {
        self.0 |= c.bit();
    }

    pub fn contains(&self, c: QuestionCategory) -> bool {
        self.0 & c.bit() != 0
    }

    pub fn is_empty(&self) -> bool {
        self.0 == 0
    }

    pub fn len(&self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn iter(&self) -> impl Iterator<Item = QuestionCategory> + '_ {
        QuestionCategory::ALL.into_iter().filter(|c| self.contains(*c))
    }

    /// First member in routing priority order.
    pub fn primary(&self) -> QuestionCategory {
        QuestionCategory::ROUTING_PRIORITY
            .into_iter()
            .find(|c| self.contains(*c))
            .unwrap_or(QuestionCategory::Other)
    }
}

impl FromIterator<QuestionCategory> for CategorySet {
    fn from_iter<I: IntoIterator<Item = QuestionCategory>>(iter: I) -> Self {
        let mut set = Self::empty();
        for c in iter {
            set.insert(c);
        }
        set
    }
}

impl fmt::Debug for CategorySet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

impl Serialize for CategorySet {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_seq(self.iter())
    }
}

impl<'de> Deserialize<'de> for CategorySet {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        Ok(Vec::<QuestionCategory>::deserialize(d)?.into_iter().collect())
    }
}

const OBJECT_PREFIXES: [&str; 3] = ["what", "where", "which"];
const COLOR_WORDS: [&str; 2] = ["color", "colour"];

/// Assigns `question` to its categories.
pub fn classify(question: &str) -> Result<CategorySet> {
    if question.trim().is_empty() {
        return Err(Error::invalid("question is empty"));
    }
    let tokens: Vec<String> = question
        .split_whitespace()
        .map(|t| {
            t.trim_matches(|ch: char| !ch.is_alphanumeric())
                .to_lowercase()
        })
        .filter(|t| !t.is_empty())
        .collect();

    let mut set = CategorySet::empty();
    if tokens
        .first()
        .is_some_and(|t| OBJECT_PREFIXES.contains(&t.as_str()))
    {
        set.insert(QuestionCategory::ObjectIdentification);
    }
    if tokens.windows(2).any(|w| w[0] == "how" && w[1] == "many") {
        set.insert(QuestionCategory::Quantity);
    }
    if tokens.iter().any(|t| COLOR_WORDS.contains(&t.as_str())) {
        set.insert(QuestionCategory::Color);
    }
    if set.is_empty() {
        set.insert(QuestionCategory::Other);
    }
    Ok(set)
}
