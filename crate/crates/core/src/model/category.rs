use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::Error;

/// One of the four voice categories, coded as `<assistant bit><expert bit>`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Category {
    /// "00"
    Background,
    /// "01"
    Expert,
    /// "10"
    Assistant,
    /// "11"
    Mixture,
}

impl Category {
    /// Report order: background, expert, assistant, mixture.
    pub const ALL: [Category; 4] = [
        Category::Background,
        Category::Expert,
        Category::Assistant,
        Category::Mixture,
    ];

    pub fn from_bits(assistant: bool, expert: bool) -> Self {
        match (assistant, expert) {
            (false, false) => Category::Background,
            (false, true) => Category::Expert,
            (true, false) => Category::Assistant,
            (true, true) => Category::Mixture,
        }
    }

    pub fn assistant(self) -> bool {
        matches!(self, Category::Assistant | Category::Mixture)
    }

    pub fn expert(self) -> bool {
        matches!(self, Category::Expert | Category::Mixture)
    }

    pub fn code(self) -> &'static str {
        match self {
            Category::Background => "00",
            Category::Expert => "01",
            Category::Assistant => "10",
            Category::Mixture => "11",
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Category::Background => "Background",
            Category::Expert => "Expert",
            Category::Assistant => "Assistant",
            Category::Mixture => "Mixture",
        }
    }

    /// Position in [`Category::ALL`].
    pub fn index(self) -> usize {
        match self {
            Category::Background => 0,
            Category::Expert => 1,
            Category::Assistant => 2,
            Category::Mixture => 3,
        }
    }

    /// Multi-label training target `[assistant, expert]`.
    pub fn target(self) -> [f32; 2] {
        [self.assistant() as u8 as f32, self.expert() as u8 as f32]
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for Category {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s.trim() {
            "00" => Ok(Category::Background),
            "01" => Ok(Category::Expert),
            "10" => Ok(Category::Assistant),
            "11" => Ok(Category::Mixture),
            other => Err(Error::Invalid(format!("unknown category code {other:?}"))),
        }
    }
}

impl TryFrom<String> for Category {
    type Error = Error;

    fn try_from(s: String) -> Result<Self, Error> {
        s.parse()
    }
}

impl From<Category> for String {
    fn from(c: Category) -> String {
        c.code().to_string()
    }
}

/// Thresholds each class probability independently; `probs` is
/// `[assistant, expert]`.
pub fn decode(probs: [f32; 2], threshold: f32) -> Category {
    Category::from_bits(probs[0] > threshold, probs[1] > threshold)
}
