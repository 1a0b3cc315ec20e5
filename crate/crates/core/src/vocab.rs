//! Entity categories and the closed relation vocabulary.
//!
//! Both sets are fixed: six entity categories and forty directed relation
//! types split evenly over four groups. Three relations are flagged as
//! semantically weak and are downweighted during path scoring.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::GraphError;

/// Ontological category of a graph entity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EntityCategory {
    AnatomicalStructure,
    MolecularEntity,
    CellularComponent,
    Process,
    ClinicalEntity,
    ConceptualEntity,
}

impl EntityCategory {
    pub const ALL: [EntityCategory; 6] = [
        EntityCategory::AnatomicalStructure,
        EntityCategory::MolecularEntity,
        EntityCategory::CellularComponent,
        EntityCategory::Process,
        EntityCategory::ClinicalEntity,
        EntityCategory::ConceptualEntity,
    ];

    /// Canonical identifier, e.g. `MolecularEntity`.
    pub fn as_str(self) -> &'static str {
        match self {
            EntityCategory::AnatomicalStructure => "AnatomicalStructure",
            EntityCategory::MolecularEntity => "MolecularEntity",
            EntityCategory::CellularComponent => "CellularComponent",
            EntityCategory::Process => "Process",
            EntityCategory::ClinicalEntity => "ClinicalEntity",
            EntityCategory::ConceptualEntity => "ConceptualEntity",
        }
    }

    /// Human-readable label used in extraction prompts, e.g. `Molecular Entity`.
    pub fn label(self) -> &'static str {
        match self {
            EntityCategory::AnatomicalStructure => "Anatomical Structure",
            EntityCategory::MolecularEntity => "Molecular Entity",
            EntityCategory::CellularComponent => "Cellular Component",
            EntityCategory::Process => "Process",
            EntityCategory::ClinicalEntity => "Clinical Entity",
            EntityCategory::ConceptualEntity => "Conceptual Entity",
        }
    }
}

impl fmt::Display for EntityCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EntityCategory {
    type Err = GraphError;

    /// Accepts `MolecularEntity`, `Molecular Entity`, `molecular_entity` and
    /// other spellings that differ only in case, spaces, hyphens or underscores.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key: String = s
            .chars()
            .filter(|c| !matches!(c, ' ' | '_' | '-' | '\t'))
            .flat_map(char::to_lowercase)
            .collect();
        EntityCategory::ALL
            .into_iter()
            .find(|c| c.as_str().to_ascii_lowercase() == key)
            .ok_or_else(|| GraphError::UnknownCategory(s.to_string()))
    }
}

impl Serialize for EntityCategory {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for EntityCategory {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Functional grouping of relation types.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RelationGroup {
    AnatomicalConnectivity,
    MolecularCellular,
    FunctionalRepresentational,
    CausalClinical,
}

macro_rules! relations {
    ($( $variant:ident => $name:literal, $group:ident ;)*) => {
        /// A relation from the closed 40-member vocabulary.
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
        pub enum RelationType {
            $( $variant, )*
        }

        impl RelationType {
            /// Every relation, in vocabulary order.
            pub const ALL: [RelationType; 40] = [ $( RelationType::$variant, )* ];

            pub fn as_str(self) -> &'static str {
                match self {
                    $( RelationType::$variant => $name, )*
                }
            }

            pub fn group(self) -> RelationGroup {
                match self {
                    $( RelationType::$variant => RelationGroup::$group, )*
                }
            }
        }
    };
}

relations! {
    PartOf => "part_of", AnatomicalConnectivity;
    Contains => "contains", AnatomicalConnectivity;
    LocatedIn => "located_in", AnatomicalConnectivity;
    ConnectedTo => "connected_to", AnatomicalConnectivity;
    ProjectsTo => "projects_to", AnatomicalConnectivity;
    ReceivesInputFrom => "receives_input_from", AnatomicalConnectivity;
    ReceivesModulatoryInputFrom => "receives_modulatory_input_from", AnatomicalConnectivity;
    Innervates => "innervates", AnatomicalConnectivity;
    OriginatesFrom => "originates_from", AnatomicalConnectivity;
    TerminatesIn => "terminates_in", AnatomicalConnectivity;
    ExpressedIn => "expressed_in", MolecularCellular;
    SynthesizedIn => "synthesized_in", MolecularCellular;
    Releases => "releases", MolecularCellular;
    BindsTo => "binds_to", MolecularCellular;
    Activates => "activates", MolecularCellular;
    Inhibits => "inhibits", MolecularCellular;
    Modulates => "modulates", MolecularCellular;
    Regulates => "regulates", MolecularCellular;
    Transports => "transports", MolecularCellular;
    FormsComplexWith => "forms_complex_with", MolecularCellular;
    RespondsTo => "responds_to", FunctionalRepresentational;
    FiresInResponseTo => "fires_in_response_to", FunctionalRepresentational;
    TunedTo => "tuned_to", FunctionalRepresentational;
    SelectiveFor => "selective_for", FunctionalRepresentational;
    EncodesRepresentationOf => "encodes_representation_of", FunctionalRepresentational;
    ParticipatesIn => "participates_in", FunctionalRepresentational;
    RequiredFor => "required_for", FunctionalRepresentational;
    SufficientFor => "sufficient_for", FunctionalRepresentational;
    OscillatesAt => "oscillates_at", FunctionalRepresentational;
    MediatesSignalFor => "mediates_signal_for", FunctionalRepresentational;
    AssociatedWith => "associated_with", CausalClinical;
    Causes => "causes", CausalClinical;
    ResultsIn => "results_in", CausalClinical;
    ImpairedIn => "impaired_in", CausalClinical;
    DegeneratesIn => "degenerates_in", CausalClinical;
    RiskFactorFor => "risk_factor_for", CausalClinical;
    BiomarkerOf => "biomarker_of", CausalClinical;
    SymptomOf => "symptom_of", CausalClinical;
    TreatedBy => "treated_by", CausalClinical;
    DiagnosedBy => "diagnosed_by", CausalClinical;
}

impl RelationType {
    /// Weak relations add structural noise to paths and are downweighted.
    pub fn is_weak(self) -> bool {
        matches!(
            self,
            RelationType::AssociatedWith | RelationType::LocatedIn | RelationType::PartOf
        )
    }

    /// Natural-language gloss: `projects_to` becomes `projects to`.
    pub fn gloss(self) -> String {
        self.as_str().replace('_', " ")
    }

    /// All relation names in vocabulary order.
    pub fn names() -> Vec<&'static str> {
        RelationType::ALL.iter().map(|r| r.as_str()).collect()
    }
}

impl fmt::Display for RelationType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RelationType {
    type Err = GraphError;

    /// Exact match on the snake_case name after trimming and lowercasing;
    /// spaces are read as underscores so `projects to` is accepted.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key = s.trim().to_lowercase().replace([' ', '-'], "_");
        RelationType::ALL
            .into_iter()
            .find(|r| r.as_str() == key)
            .ok_or_else(|| GraphError::UnknownRelation(s.to_string()))
    }
}

impl Serialize for RelationType {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for RelationType {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
