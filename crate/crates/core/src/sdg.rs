//! Goal identifiers and the supported input languages.

use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// One of the 17 Sustainable Development Goals.
///
/// SDG 17 parses, but the community dataset covers goals 1 to 16 only, so
/// it is excluded from training and from the default task inventory.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct SdgId(u8);

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid SDG {0}: expected an integer in 1..=17")]
pub struct InvalidSdg(pub i64);

impl SdgId {
    pub const MIN: u8 = 1;
    pub const MAX: u8 = 17;
    /// Number of goals that have a trained model.
    pub const TRAINABLE_COUNT: usize = 16;

    pub fn new(value: i64) -> Result<Self, InvalidSdg> {
        if (i64::from(Self::MIN)..=i64::from(Self::MAX)).contains(&value) {
            Ok(SdgId(value as u8))
        } else {
            Err(InvalidSdg(value))
        }
    }

    pub const fn get(self) -> u8 {
        self.0
    }

    pub const fn excluded_from_training(self) -> bool {
        self.0 == 17
    }

    /// Goals 1 through 16 in ascending order.
    pub fn trainable() -> impl Iterator<Item = SdgId> + Clone {
        (1..=16u8).map(SdgId)
    }

    /// All 17 goals in ascending order.
    pub fn all() -> impl Iterator<Item = SdgId> + Clone {
        (1..=17u8).map(SdgId)
    }
}

impl TryFrom<u8> for SdgId {
    type Error = InvalidSdg;

    fn try_from(value: u8) -> Result<Self, Self::Error> {
        SdgId::new(i64::from(value))
    }
}

impl From<SdgId> for u8 {
    fn from(id: SdgId) -> u8 {
        id.0
    }
}

impl fmt::Display for SdgId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl FromStr for SdgId {
    type Err = InvalidSdg;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let value: i64 = s.trim().parse().map_err(|_| InvalidSdg(-1))?;
        SdgId::new(value)
    }
}

/// Input languages accepted by the classifier. Everything other than English
/// is translated to English before classification.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LanguageCode {
    En,
    Ar,
    Da,
    Nl,
    Fi,
    Fr,
    De,
    It,
    Ko,
    Pl,
    Pt,
    Ru,
    Es,
    Sv,
    Tr,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unsupported language code {0:?}")]
pub struct UnsupportedLanguage(pub alloc::string::String);

impl LanguageCode {
    pub const ALL: [LanguageCode; 15] = [
        LanguageCode::En,
        LanguageCode::Ar,
        LanguageCode::Da,
        LanguageCode::Nl,
        LanguageCode::Fi,
        LanguageCode::Fr,
        LanguageCode::De,
        LanguageCode::It,
        LanguageCode::Ko,
        LanguageCode::Pl,
        LanguageCode::Pt,
        LanguageCode::Ru,
        LanguageCode::Es,
        LanguageCode::Sv,
        LanguageCode::Tr,
    ];

    pub const fn as_str(self) -> &'static str {
        match self {
            LanguageCode::En => "en",
            LanguageCode::Ar => "ar",
            LanguageCode::Da => "da",
            LanguageCode::Nl => "nl",
            LanguageCode::Fi => "fi",
            LanguageCode::Fr => "fr",
            LanguageCode::De => "de",
            LanguageCode::It => "it",
            LanguageCode::Ko => "ko",
            LanguageCode::Pl => "pl",
            LanguageCode::Pt => "pt",
            LanguageCode::Ru => "ru",
            LanguageCode::Es => "es",
            LanguageCode::Sv => "sv",
            LanguageCode::Tr => "tr",
        }
    }

    pub const fn is_english(self) -> bool {
        matches!(self, LanguageCode::En)
    }
}

impl FromStr for LanguageCode {
    type Err = UnsupportedLanguage;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let code = s.trim();
        LanguageCode::ALL
            .iter()
            .copied()
            .find(|l| l.as_str().eq_ignore_ascii_case(code))
            .ok_or_else(|| UnsupportedLanguage(code.into()))
    }
}

impl fmt::Display for LanguageCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}
