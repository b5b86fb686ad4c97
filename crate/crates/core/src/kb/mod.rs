//! Shipped clinical knowledge base: rule assets, the demo domain vocabulary,
//! schema manifests and query templates, plus host-side oracles that check
//! rule-engine output without going through the engine.

mod oracle;
mod validate;

pub use oracle::{age_reference, bmi_reference, gate_reference, OracleError};
pub use validate::{validate_asset_set, validate_assets, AssetText, Violation, ViolationKind};

use crate::rdf::{N3Error, N3Parser};
use crate::rules::Rule;

/// Domain ontology namespaces and the IRIs the pipeline looks at directly.
pub mod vocab {
    pub const HUMAN: &str = "http://example.org/do/human#";
    pub const ORGANISM: &str = "http://example.org/do/organism#";
    pub const QUANT: &str = "http://example.org/do/quantities#";
    pub const EVENT: &str = "http://example.org/do/event#";
    pub const UNITS: &str = "http://example.org/do/units#";
    pub const TRIAL: &str = "http://example.org/do/trial#";
    pub const FOAF: &str = "http://xmlns.com/foaf/0.1/";

    pub const PERSON: &str = "http://example.org/do/human#Person";
    pub const BIOLOGICAL_ADULT: &str = "http://example.org/do/human#BiologicalAdult";
    pub const WEIGHS: &str = "http://example.org/do/human#weighs";
    pub const HAS_LENGTH: &str = "http://example.org/do/human#hasLength";
    pub const HAS_BODY_MASS_INDEX: &str = "http://example.org/do/human#hasBodyMassIndex";
    pub const HAS_AGE_IN_YEARS: &str = "http://example.org/do/human#hasAgeInYears";
    pub const HAS_BIRTH_DATE_TIME: &str = "http://example.org/do/organism#hasBirthDateTime";
    pub const FAMILY_NAME: &str = "http://xmlns.com/foaf/0.1/familyName";
    pub const HAS_VALUE: &str = "http://example.org/do/quantities#hasValue";
    pub const HAS_UNIT: &str = "http://example.org/do/quantities#hasUnit";
    pub const HAS_DATE_TIME: &str = "http://example.org/do/event#hasDateTime";
    pub const KILOGRAM: &str = "http://example.org/do/units#kilogram";
    pub const METER: &str = "http://example.org/do/units#meter";
    pub const CENTIMETER: &str = "http://example.org/do/units#centimeter";
    pub const KILOGRAM_PER_METER_SQUARE: &str = "http://example.org/do/units#kilogramPerMeterSquare";
    pub const CALCULATING_AGE: &str = "http://www.w3.org/2000/10/swap/time#calculatingAge";
    pub const ENROLLED_IN: &str = "http://example.org/do/trial#enrolledIn";

    /// Prefix map for the domain ontology, used when serializing EHR graphs
    /// and resolving view paths.
    pub fn prefixes() -> [(&'static str, &'static str); 7] {
        [
            ("human", HUMAN),
            ("organism", ORGANISM),
            ("quant", QUANT),
            ("event", EVENT),
            ("units", UNITS),
            ("trial", TRIAL),
            ("foaf", FOAF),
        ]
    }
}

pub const VOCAB: &str = include_str!("../../kb/vocab.n3");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Conversion,
    Normalization,
    Analysis,
}

impl Stage {
    pub fn parse(s: &str) -> Option<Stage> {
        match s {
            "conversion" => Some(Stage::Conversion),
            "normalization" => Some(Stage::Normalization),
            "analysis" => Some(Stage::Analysis),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct RuleAsset {
    pub name: &'static str,
    pub stage: Stage,
    pub text: &'static str,
    /// Namespaces the antecedents read from.
    pub inputs: &'static [&'static str],
    /// Namespaces the consequents write to.
    pub outputs: &'static [&'static str],
}

impl RuleAsset {
    pub fn rules(&self) -> Result<Vec<Rule>, N3Error> {
        Ok(N3Parser::new().source(self.name).parse(self.text)?.rules)
    }
}

const CIS: &[&str] = &[
    "http://example.org/cis/HospitalStay#",
    "http://example.org/cis/Patient#",
    "http://example.org/cis/Natperson#",
    "http://example.org/cis/CLLForm#",
    "http://example.org/cis/TrialInclusion#",
];
const CTMS: &[&str] = &["http://example.org/ctms/Trial#", "http://example.org/ctms/Enrollment#"];
const DO: &[&str] = &[
    vocab::HUMAN,
    vocab::ORGANISM,
    vocab::QUANT,
    vocab::EVENT,
    vocab::UNITS,
    vocab::TRIAL,
    vocab::FOAF,
];

pub const RULE_ASSETS: &[RuleAsset] = &[
    RuleAsset {
        name: "convert_demographics.n3",
        stage: Stage::Conversion,
        text: include_str!("../../kb/convert_demographics.n3"),
        inputs: CIS,
        outputs: DO,
    },
    RuleAsset {
        name: "convert_clinical.n3",
        stage: Stage::Conversion,
        text: include_str!("../../kb/convert_clinical.n3"),
        inputs: CIS,
        outputs: DO,
    },
    RuleAsset {
        name: "convert_ctms.n3",
        stage: Stage::Conversion,
        text: include_str!("../../kb/convert_ctms.n3"),
        inputs: CTMS,
        outputs: DO,
    },
    RuleAsset {
        name: "normalize_units.n3",
        stage: Stage::Normalization,
        text: include_str!("../../kb/normalize_units.n3"),
        inputs: DO,
        outputs: DO,
    },
    RuleAsset {
        name: "derive_age.n3",
        stage: Stage::Analysis,
        text: include_str!("../../kb/derive_age.n3"),
        inputs: DO,
        outputs: DO,
    },
    RuleAsset {
        name: "analyze_bmi.n3",
        stage: Stage::Analysis,
        text: include_str!("../../kb/analyze_bmi.n3"),
        inputs: DO,
        outputs: DO,
    },
];

/// Non-rule files addressable as `kb:<path>`.
const FILES: &[(&str, &str)] = &[
    ("vocab.n3", VOCAB),
    (
        "manifests/clinic.json",
        include_str!("../../assets/manifests/clinic.json"),
    ),
    ("manifests/cis.json", include_str!("../../assets/manifests/cis.json")),
    ("manifests/ctms.json", include_str!("../../assets/manifests/ctms.json")),
    (
        "templates/cis/person.rq",
        include_str!("../../assets/templates/cis/person.rq"),
    ),
    (
        "templates/cis/name.rq",
        include_str!("../../assets/templates/cis/name.rq"),
    ),
    (
        "templates/cis/birthdate.rq",
        include_str!("../../assets/templates/cis/birthdate.rq"),
    ),
    (
        "templates/cis/cll_weight.rq",
        include_str!("../../assets/templates/cis/cll_weight.rq"),
    ),
    (
        "templates/cis/cll_height.rq",
        include_str!("../../assets/templates/cis/cll_height.rq"),
    ),
    (
        "templates/cis/trials.rq",
        include_str!("../../assets/templates/cis/trials.rq"),
    ),
    (
        "templates/ctms/enrollment.rq",
        include_str!("../../assets/templates/ctms/enrollment.rq"),
    ),
    (
        "queries/form_weight.rq",
        include_str!("../../assets/queries/form_weight.rq"),
    ),
    ("fixtures/clinic.sql", include_str!("../../assets/fixtures/clinic.sql")),
    (
        "fixtures/clinic_ddo.n3",
        include_str!("../../assets/fixtures/clinic_ddo.n3"),
    ),
    (
        "fixtures/form_weight_results.n3",
        include_str!("../../assets/fixtures/form_weight_results.n3"),
    ),
    (
        "fixtures/converted_person.n3",
        include_str!("../../assets/fixtures/converted_person.n3"),
    ),
];

/// Scheme used in configuration files to refer to shipped assets.
pub const SCHEME: &str = "kb:";

pub fn rule_asset(name: &str) -> Option<&'static RuleAsset> {
    RULE_ASSETS.iter().find(|a| a.name == name)
}

pub fn assets_for(stage: Stage) -> impl Iterator<Item = &'static RuleAsset> {
    RULE_ASSETS.iter().filter(move |a| a.stage == stage)
}

/// Text of a shipped file, by its path below the asset root.
pub fn file(name: &str) -> Option<&'static str> {
    FILES
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, t)| *t)
        .or_else(|| rule_asset(name).map(|a| a.text))
}

/// Shipped files below `dir/` (e.g. `templates/cis`), sorted by name.
pub fn files_in(dir: &str) -> Vec<(&'static str, &'static str)> {
    let prefix = format!("{}/", dir.trim_end_matches('/'));
    let mut out: Vec<_> = FILES.iter().copied().filter(|(n, _)| n.starts_with(&prefix)).collect();
    out.sort();
    out
}

pub fn file_names() -> impl Iterator<Item = &'static str> {
    FILES.iter().map(|(n, _)| *n).chain(RULE_ASSETS.iter().map(|a| a.name))
}

/// Rules of every shipped asset, in asset order.
pub fn all_rules() -> Vec<Rule> {
    RULE_ASSETS
        .iter()
        .flat_map(|a| a.rules().expect("shipped assets parse"))
        .collect()
}

/// Golden-fixture normalization: the hand-written fixtures use `xsd:Literal`
/// and `xsd:Date` where the generators emit `xsd:string` and `xsd:date`.
pub fn normalize_fixture_datatypes(g: &crate::rdf::Graph) -> crate::rdf::Graph {
    use crate::rdf::vocab::xsd;
    use crate::rdf::{Graph, Term, Triple};
    let fix = |iri: &str| -> Option<&'static str> {
        match iri.strip_prefix(xsd::NS)? {
            "Literal" => Some(xsd::STRING),
            "Date" => Some(xsd::DATE),
            _ => None,
        }
    };
    let map = |t: &Term| -> Term {
        match t {
            Term::Iri(i) => fix(i).map(Term::iri).unwrap_or_else(|| t.clone()),
            Term::Literal(l) => match fix(l.datatype()) {
                Some(dt) => Term::literal(l.lexical(), dt),
                None => t.clone(),
            },
            _ => t.clone(),
        }
    };
    let mut out = Graph::with_prefixes(g.prefixes().clone());
    for t in g.iter() {
        out.insert(Triple::new(map(t.subject()), t.predicate().clone(), map(t.object())).expect("same shape"));
    }
    out
}
