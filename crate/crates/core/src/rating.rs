//! Attack-potential rating of attack paths.
//!
//! Four factors are scored and summed; elapsed time is not rated and the
//! identification and exploitation phases are rated together. Lower totals
//! mean easier attacks and therefore higher priority.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

macro_rules! factor {
    ($(#[$doc:meta])* $name:ident { $($variant:ident = $value:expr, $label:literal;)+ }) => {
        $(#[$doc])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        #[serde(rename_all = "snake_case")]
        pub enum $name {
            $($variant,)+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant,)+];

            pub fn label(self) -> &'static str {
                match self {
                    $($name::$variant => $label,)+
                }
            }

            fn base_value(self) -> u32 {
                match self {
                    $($name::$variant => $value,)+
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.label())
            }
        }

        impl FromStr for $name {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self> {
                let key: String = s
                    .chars()
                    .filter(|c| c.is_ascii_alphanumeric())
                    .map(|c| c.to_ascii_lowercase())
                    .collect();
                $name::ALL
                    .iter()
                    .copied()
                    .find(|l| l.label().replace('_', "") == key)
                    .ok_or_else(|| {
                        let valid: Vec<_> = $name::ALL.iter().map(|l| l.label()).collect();
                        Error::Rating(format!(
                            "unknown {} level `{s}`; expected one of: {}",
                            stringify!($name).to_lowercase(),
                            valid.join(", ")
                        ))
                    })
            }
        }
    };
}

factor!(
    Expertise {
        Laymen = 0, "laymen";
        Proficient = 3, "proficient";
        Expert = 6, "expert";
        MultipleExperts = 8, "multiple_experts";
    }
);

factor!(
    /// Knowledge of the target of evaluation.
    Knowledge {
        Public = 0, "public";
        Restricted = 3, "restricted";
        Sensitive = 7, "sensitive";
        Critical = 11, "critical";
    }
);

factor!(
    /// Window of opportunity.
    Window {
        Unnecessary = 0, "unnecessary";
        Easy = 1, "easy";
        Moderate = 4, "moderate";
        Difficult = 10, "difficult";
    }
);

factor!(
    /// `Quantum` (quantum memories or computers) is rated as unbounded: it is
    /// left out of the sum and forces the top severity.
    Equipment {
        Standard = 0, "standard";
        Specialized = 4, "specialized";
        Bespoke = 7, "bespoke";
        MultipleBespoke = 9, "multiple_bespoke";
        Quantum = 0, "quantum";
    }
);

impl Expertise {
    pub fn value(self) -> u32 {
        self.base_value()
    }
}

impl Knowledge {
    pub fn value(self) -> u32 {
        self.base_value()
    }
}

impl Window {
    pub fn value(self) -> u32 {
        self.base_value()
    }
}

impl Equipment {
    /// Points, or `None` for the unbounded quantum level.
    pub fn value(self) -> Option<u32> {
        (self != Equipment::Quantum).then(|| self.base_value())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FactorLevels {
    pub expertise: Expertise,
    pub knowledge: Knowledge,
    pub window: Window,
    pub equipment: Equipment,
}

impl FactorLevels {
    pub fn new(expertise: Expertise, knowledge: Knowledge, window: Window, equipment: Equipment) -> Self {
        Self {
            expertise,
            knowledge,
            window,
            equipment,
        }
    }

    pub fn needs_quantum_equipment(&self) -> bool {
        self.equipment == Equipment::Quantum
    }
}

/// Sum of the four factor values; quantum equipment contributes nothing here
/// and is flagged separately.
pub fn attack_potential(f: &FactorLevels) -> u32 {
    f.expertise.value() + f.knowledge.value() + f.window.value() + f.equipment.value().unwrap_or(0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    Basic,
    Moderate,
    High,
    BeyondHigh,
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Severity::Basic => "Basic",
            Severity::Moderate => "Moderate",
            Severity::High => "High",
            Severity::BeyondHigh => "Beyond High",
        })
    }
}

/// Bands: 0–10 Basic, 11–15 Moderate, 16–19 High, ≥ 20 Beyond High.
pub fn severity(ap: i64) -> Result<Severity> {
    match ap {
        i64::MIN..=-1 => Err(Error::Rating(format!("attack potential must be >= 0, got {ap}"))),
        0..=10 => Ok(Severity::Basic),
        11..=15 => Ok(Severity::Moderate),
        16..=19 => Ok(Severity::High),
        _ => Ok(Severity::BeyondHigh),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatingSheet {
    pub attack_name: String,
    pub factors: FactorLevels,
    pub attack_potential: u32,
    pub severity: Severity,
    /// Set when the rating relies on quantum equipment.
    pub unbounded: bool,
    pub notes: String,
}

impl RatingSheet {
    pub fn new(attack_name: impl Into<String>, factors: FactorLevels, notes: impl Into<String>) -> Self {
        let ap = attack_potential(&factors);
        let unbounded = factors.needs_quantum_equipment();
        let severity = if unbounded {
            Severity::BeyondHigh
        } else {
            severity(ap as i64).expect("sum of levels is nonnegative")
        };
        Self {
            attack_name: attack_name.into(),
            factors,
            attack_potential: ap,
            severity,
            unbounded,
            notes: notes.into(),
        }
    }
}

/// One attack path as listed in a catalog file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CatalogEntry {
    pub name: String,
    pub expertise: Expertise,
    pub knowledge: Knowledge,
    pub window: Window,
    pub equipment: Equipment,
    #[serde(default)]
    pub notes: String,
    /// Reserved for a future elapsed-time factor; not rated.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub elapsed_time: Option<String>,
}

impl CatalogEntry {
    pub fn factors(&self) -> FactorLevels {
        FactorLevels::new(self.expertise, self.knowledge, self.window, self.equipment)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Catalog {
    #[serde(default, rename = "attack")]
    pub attacks: Vec<CatalogEntry>,
}

impl Catalog {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Rating(format!("catalog: {e}")))
    }

    /// The two attack paths studied in this crate.
    pub fn saturation_attacks() -> Self {
        Self {
            attacks: vec![
                CatalogEntry {
                    name: "coherent saturation".into(),
                    expertise: Expertise::Expert,
                    knowledge: Knowledge::Restricted,
                    window: Window::Difficult,
                    equipment: Equipment::Bespoke,
                    notes: "phase-locked displacement of resent states".into(),
                    elapsed_time: None,
                },
                CatalogEntry {
                    name: "incoherent saturation".into(),
                    expertise: Expertise::Proficient,
                    knowledge: Knowledge::Restricted,
                    window: Window::Moderate,
                    equipment: Equipment::Specialized,
                    notes: "external laser through the unbalanced homodyne splitter".into(),
                    elapsed_time: None,
                },
            ],
        }
    }
}

/// Rates every entry and sorts by attack potential, then by name.
pub fn rate_catalog(entries: &[CatalogEntry]) -> Result<Vec<RatingSheet>> {
    let mut seen = BTreeSet::new();
    for e in entries {
        if !seen.insert(e.name.as_str()) {
            return Err(Error::Rating(format!("duplicate attack name `{}`", e.name)));
        }
    }
    let mut sheets: Vec<RatingSheet> = entries
        .iter()
        .map(|e| RatingSheet::new(e.name.clone(), e.factors(), e.notes.clone()))
        .collect();
    sheets.sort_by(|a, b| {
        (a.unbounded, a.attack_potential, &a.attack_name).cmp(&(b.unbounded, b.attack_potential, &b.attack_name))
    });
    Ok(sheets)
}
