//! Config file schemas, one per subcommand.

use std::fmt;
use std::marker::PhantomData;

use serde::de::value::MapAccessDeserializer;
use serde::de::{DeserializeOwned, Error as _, MapAccess, Visitor};
use serde::{Deserialize, Deserializer, Serialize};
use shiftdyn::criteria::{CriterionData, DenseSetSpec, Iterates};
use shiftdyn::experiments::ExperimentConfig;
use shiftdyn::orbit::{ClassificationParams, MemoryBudget};
use shiftdyn::shift::{BackwardIndexConvention, OperatorExpr, WeightedShift};
use shiftdyn::space::{CoordinateSubspace, Element, SparseVector, Subspace};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
#[allow(clippy::large_enum_variant)]
pub enum CriterionConfig {
    Forward(ForwardCriterion),
    DirectSum(DirectSumCriterion),
    Subspace(SubspaceCriterion),
}

/// Weight products of one invertible bilateral shift.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForwardCriterion {
    pub shift: WeightedShift,
    pub subspace: CoordinateSubspace,
    pub index: i64,
    pub iterates: Iterates,
    pub horizon: Option<usize>,
    pub tol: Option<f64>,
    pub convention: Option<BackwardIndexConvention>,
}

/// Max-of-products criterion for a direct sum of two shifts.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DirectSumCriterion {
    pub left: WeightedShift,
    pub right: WeightedShift,
    pub left_subspace: CoordinateSubspace,
    pub right_subspace: CoordinateSubspace,
    pub left_index: i64,
    pub right_index: i64,
    pub iterates: Iterates,
    pub horizon: Option<usize>,
    pub tol: Option<f64>,
    pub convention: Option<BackwardIndexConvention>,
}

/// Subspace criterion over dense sets and approximants.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubspaceCriterion {
    pub operator: OperatorExpr,
    pub subspace: Subspace,
    pub data: CriterionData,
    pub horizon: Option<usize>,
    pub tol: Option<f64>,
    pub sample_budget: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OrbitConfig {
    pub operator: OperatorExpr,
    pub start: Element,
    pub subspace: Subspace,
    pub length: u64,
    #[serde(default)]
    pub budget: MemoryBudget,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DensityConfig {
    pub operator: OperatorExpr,
    pub start: Element,
    pub subspace: Subspace,
    pub length: u64,
    pub targets: DenseSetSpec,
    pub epsilon: f64,
    #[serde(default)]
    pub budget: MemoryBudget,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WitnessConfig {
    pub operator: OperatorExpr,
    pub subspace: CoordinateSubspace,
    pub u: SparseVector,
    pub v: SparseVector,
    pub n: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReturnSetConfig {
    pub operator: OperatorExpr,
    pub subspace: Subspace,
    pub u_center: Element,
    pub u_radius: f64,
    pub v_center: Element,
    pub v_radius: f64,
    pub horizon: u64,
    #[serde(default)]
    pub classification: ClassificationParams,
}

/// A config enum tagged by a key, parsed as a stream when the tag comes
/// first so that errors keep their line and column.
pub trait Tagged: DeserializeOwned {
    const TAG: &'static str;
    fn variant<'de, D: Deserializer<'de>>(tag: &str, d: D) -> Result<Self, D::Error>;
}

impl Tagged for CriterionConfig {
    const TAG: &'static str = "mode";

    fn variant<'de, D: Deserializer<'de>>(tag: &str, d: D) -> Result<Self, D::Error> {
        match tag {
            "forward" => ForwardCriterion::deserialize(d).map(CriterionConfig::Forward),
            "direct_sum" => DirectSumCriterion::deserialize(d).map(CriterionConfig::DirectSum),
            "subspace" => SubspaceCriterion::deserialize(d).map(CriterionConfig::Subspace),
            other => Err(D::Error::unknown_variant(other, &["forward", "direct_sum", "subspace"])),
        }
    }
}

impl Tagged for ExperimentConfig {
    const TAG: &'static str = "experiment";

    fn variant<'de, D: Deserializer<'de>>(tag: &str, d: D) -> Result<Self, D::Error> {
        use shiftdyn::experiments as x;
        match tag {
            "projection" => x::ProjectionConfig::deserialize(d).map(ExperimentConfig::Projection),
            "mixing" => x::MixingConfig::deserialize(d).map(ExperimentConfig::Mixing),
            "criterion_transfer" => x::TransferConfig::deserialize(d).map(ExperimentConfig::CriterionTransfer),
            "commutant" => x::CommutantConfig::deserialize(d).map(ExperimentConfig::Commutant),
            "criterion_extraction" => x::ExtractionConfig::deserialize(d).map(ExperimentConfig::CriterionExtraction),
            "rolewicz" => x::RolewiczConfig::deserialize(d).map(ExperimentConfig::Rolewicz),
            other => Err(D::Error::unknown_variant(other, &x::EXPERIMENT_NAMES)),
        }
    }
}

const TAG_NOT_FIRST: &str = "\u{0}tag not first";

struct TaggedVisitor<T>(PhantomData<T>);

impl<'de, T: Tagged> Visitor<'de> for TaggedVisitor<T> {
    type Value = T;

    fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
        write!(f, "an object with a {:?} key", T::TAG)
    }

    fn visit_map<A: MapAccess<'de>>(self, mut map: A) -> Result<T, A::Error> {
        match map.next_key::<String>()? {
            Some(k) if k == T::TAG => {
                let tag: String = map.next_value()?;
                T::variant(&tag, MapAccessDeserializer::new(map))
            }
            _ => Err(A::Error::custom(TAG_NOT_FIRST)),
        }
    }
}

/// Formats a parse failure as `path:line:column: message`. Errors without
/// a position are anchored at the start of the document.
pub fn diagnostic(path: &str, err: &serde_json::Error) -> String {
    format!("{path}:{}:{}: {err}", err.line().max(1), err.column().max(1))
}

pub fn parse<T: DeserializeOwned>(path: &str, text: &str) -> Result<T, String> {
    serde_json::from_str(text).map_err(|e| diagnostic(path, &e))
}

pub fn parse_tagged<T: Tagged>(path: &str, text: &str) -> Result<T, String> {
    let mut de = serde_json::Deserializer::from_str(text);
    let streamed = de.deserialize_map(TaggedVisitor::<T>(PhantomData)).and_then(|v| de.end().map(|()| v));
    match streamed {
        Ok(v) => Ok(v),
        Err(e) if e.to_string().starts_with(TAG_NOT_FIRST) => parse(path, text),
        Err(e) => Err(diagnostic(path, &e)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagnostic_names_the_line() {
        let err = parse::<OrbitConfig>("cfg.json", "{\n  \"operator\": {\"op\": \"identity\"},\n  \"bogus\": 1\n}").unwrap_err();
        assert!(err.starts_with("cfg.json:3:"), "{err}");
    }

    #[test]
    fn criterion_modes_parse() {
        let text = r#"{"mode":"forward","shift":{"weights":{"kind":"piecewise","pos":0.5,"neg":2},"space":"bilateral"},
            "subspace":{"space":"bilateral","kind":"residues","modulus":1,"residues":[0]},"index":0,"iterates":{"rule":"arithmetic","step":1}}"#;
        let cfg: CriterionConfig = parse_tagged("x", text).unwrap();
        assert!(matches!(cfg, CriterionConfig::Forward(ForwardCriterion { index: 0, .. })));
        let late = r#"{"shift":{"weights":{"kind":"constant","c":2}},"subspace":{"kind":"half_line","start":0},
            "index":0,"iterates":{"rule":"arithmetic","step":1},"mode":"forward"}"#;
        assert!(matches!(parse_tagged::<CriterionConfig>("x", late).unwrap(), CriterionConfig::Forward(_)));
    }

    #[test]
    fn tagged_errors_keep_positions() {
        let err = parse_tagged::<CriterionConfig>("c.json", "{\n\"mode\": \"forward\",\n\"shift\": 3\n}").unwrap_err();
        assert!(err.starts_with("c.json:3:"), "{err}");
        let err = parse_tagged::<CriterionConfig>("c.json", "{\"mode\": \"sideways\"}").unwrap_err();
        assert!(err.contains("unknown variant"), "{err}");
        let err = parse_tagged::<ExperimentConfig>("e.json", "{\"experiment\": \"mixing\",\n \"horizon\": -1}").unwrap_err();
        assert!(err.starts_with("e.json:2:"), "{err}");
    }
}
