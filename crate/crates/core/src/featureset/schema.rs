use std::fmt;

use serde::{Deserialize, Serialize};

use crate::eda::EDA_FEATURE_NAMES;
use crate::motion::{ACC_FEATURE_NAMES, TEMP_FEATURE_NAMES};
use crate::ppg::{FREQUENCY_NAMES, NONLINEAR_NAMES, TIME_NAMES};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sensor {
    Ppg,
    Eda,
    Acc,
    Temp,
    Context,
    Trait,
}

impl Sensor {
    pub const PHYSIOLOGICAL: [Sensor; 4] = [Sensor::Ppg, Sensor::Eda, Sensor::Acc, Sensor::Temp];

    pub fn as_str(self) -> &'static str {
        match self {
            Sensor::Ppg => "ppg",
            Sensor::Eda => "eda",
            Sensor::Acc => "acc",
            Sensor::Temp => "temp",
            Sensor::Context => "context",
            Sensor::Trait => "trait",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [Sensor::Ppg, Sensor::Eda, Sensor::Acc, Sensor::Temp, Sensor::Context, Sensor::Trait]
            .into_iter()
            .find(|x| x.as_str().eq_ignore_ascii_case(s))
    }

    pub fn is_biobehavioral(self) -> bool {
        Self::PHYSIOLOGICAL.contains(&self)
    }
}

impl fmt::Display for Sensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureInfo {
    pub name: String,
    pub sensor: Sensor,
    pub domain: String,
    pub units: String,
    pub nullable: bool,
}

fn info(name: &str, sensor: Sensor, domain: &str, units: &str, nullable: bool) -> FeatureInfo {
    FeatureInfo { name: name.to_string(), sensor, domain: domain.to_string(), units: units.to_string(), nullable }
}

fn hrv_units(name: &str) -> &'static str {
    match name {
        "CVNN" | "CVSD" | "MCVNN" | "HTI" | "LFHF" | "LFn" | "HFn" | "CSI" | "IALS" => "1",
        "LF" | "HF" | "VHF" => "ms^2",
        "LnHF" => "ln(ms^2)",
        "CVI" => "log10(ms^2)",
        "PIP" | "PSS" | "PAS" | "GI" | "SI" | "AI" | "PI" => "%",
        _ => "ms",
    }
}

fn eda_units(name: &str) -> &'static str {
    if name.ends_with("_N") {
        "count"
    } else if name.ends_with("RiseTime") || name.ends_with("Recovery") {
        "s"
    } else if name.ends_with("Variance") {
        "uS^2"
    } else if name.ends_with("Skew") || name.ends_with("Kurtosis") {
        "1"
    } else {
        "uS"
    }
}

/// Biobehavioral feature catalogue (64 columns) in table order.
pub fn biobehavioral_schema() -> Vec<FeatureInfo> {
    let mut out = Vec::with_capacity(64);
    for (names, domain) in [(&TIME_NAMES[..], "time"), (&FREQUENCY_NAMES[..], "frequency"), (&NONLINEAR_NAMES[..], "nonlinear")] {
        for n in names {
            out.push(info(&format!("HRV_{n}"), Sensor::Ppg, domain, hrv_units(n), true));
        }
    }
    for n in EDA_FEATURE_NAMES {
        let domain = if n.starts_with("SCR") {
            "scr"
        } else if n.starts_with("Tonic") {
            "tonic"
        } else {
            "phasic"
        };
        let nullable = matches!(n, "SCR_Amplitude" | "SCR_Height" | "SCR_RiseTime" | "SCR_Recovery");
        out.push(info(&format!("EDA_{n}"), Sensor::Eda, domain, eda_units(n), nullable));
    }
    for n in ACC_FEATURE_NAMES {
        out.push(info(n, Sensor::Acc, "motion", "g", false));
    }
    for n in TEMP_FEATURE_NAMES {
        out.push(info(n, Sensor::Temp, "temperature", "degC", false));
    }
    out
}

pub const CONTEXT_COLUMNS: [&str; 3] = ["CTX_Group", "CTX_Eval", "CTX_Phase"];
pub const TRAIT_COLUMNS: [&str; 4] = ["TRAIT_SIAS", "TRAIT_BFNE", "TRAIT_DERS", "TRAIT_DASS_Dep"];

/// Full table schema: biobehavioral, then context codes, then trait scores.
pub fn full_schema() -> Vec<FeatureInfo> {
    let mut s = biobehavioral_schema();
    s.push(info(CONTEXT_COLUMNS[0], Sensor::Context, "group_size", "code", false));
    s.push(info(CONTEXT_COLUMNS[1], Sensor::Context, "evaluation", "code", false));
    s.push(info(CONTEXT_COLUMNS[2], Sensor::Context, "phase", "code", false));
    s.push(info(TRAIT_COLUMNS[0], Sensor::Trait, "questionnaire", "sum", false));
    s.push(info(TRAIT_COLUMNS[1], Sensor::Trait, "questionnaire", "sum", false));
    s.push(info(TRAIT_COLUMNS[2], Sensor::Trait, "questionnaire", "mean", false));
    s.push(info(TRAIT_COLUMNS[3], Sensor::Trait, "questionnaire", "sum", false));
    s
}

/// Which non-physiological families accompany the sensor features.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureSetVariant {
    BioOnly,
    BioTrait,
    BioContext,
    Full,
}

impl FeatureSetVariant {
    pub const ALL: [FeatureSetVariant; 4] =
        [FeatureSetVariant::BioOnly, FeatureSetVariant::BioTrait, FeatureSetVariant::BioContext, FeatureSetVariant::Full];

    pub fn as_str(self) -> &'static str {
        match self {
            FeatureSetVariant::BioOnly => "bio_only",
            FeatureSetVariant::BioTrait => "bio_trait",
            FeatureSetVariant::BioContext => "bio_context",
            FeatureSetVariant::Full => "full",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|v| v.as_str() == s)
    }

    pub fn includes(self, sensor: Sensor) -> bool {
        match sensor {
            Sensor::Context => matches!(self, FeatureSetVariant::BioContext | FeatureSetVariant::Full),
            Sensor::Trait => matches!(self, FeatureSetVariant::BioTrait | FeatureSetVariant::Full),
            _ => true,
        }
    }
}

impl fmt::Display for FeatureSetVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Column indices for a variant restricted to a set of physiological sensors.
pub fn select_columns(schema: &[FeatureInfo], variant: FeatureSetVariant, sensors: &[Sensor]) -> Vec<usize> {
    schema
        .iter()
        .enumerate()
        .filter(|(_, f)| {
            if f.sensor.is_biobehavioral() {
                sensors.contains(&f.sensor)
            } else {
                variant.includes(f.sensor)
            }
        })
        .map(|(i, _)| i)
        .collect()
}
