//! SPARQL query templates for the three knowledge feature sets.

use alloc::string::{String, ToString};

use crate::error::{Error, Result};
use crate::knowledge::FeatureSet;

pub const PLACEHOLDER: &str = "<itemURI>";

pub const DBO: &str = "http://dbpedia.org/ontology/";
pub const DCT_SUBJECT: &str = "http://purl.org/dc/terms/subject";

/// Properties never kept in outgoing pairs.
pub const PO_EXCLUDED: [&str; 2] = [
    "http://dbpedia.org/ontology/wikiPageRedirects",
    "http://dbpedia.org/ontology/wikiPageExternalLink",
];

/// Properties never kept in incoming pairs.
pub const SP_EXCLUDED: [&str; 3] = [
    "http://dbpedia.org/ontology/wikiPageRedirects",
    "http://dbpedia.org/ontology/wikiPageExternalLink",
    "http://dbpedia.org/ontology/wikiPageDisambiguates",
];

const PO_QUERY: &str = r#"PREFIX dbo:<http://dbpedia.org/ontology/>
PREFIX dct:<http://purl.org/dc/terms/>

SELECT DISTINCT ?p ?o WHERE { { <itemURI> ?p ?o  .
FILTER REGEX(STR(?p), "^http://dbpedia.org/ontology") . 
FILTER (STR(?p) NOT IN (dbo:wikiPageRedirects, 
dbo:wikiPageExternalLink)) . FILTER ISURI(?o) } 
UNION { <itemURI> ?p ?o . FILTER ( STR(?p) IN (dct:subject) ) } }
"#;

// The closing parenthesis of the NOT IN filter is restored here so the
// query parses.
const SP_QUERY: &str = r#"PREFIX dbo:<http://dbpedia.org/ontology/>

SELECT DISTINCT ?s ?p WHERE { ?s ?p <itemURI> .
FILTER REGEX(STR(?p), "^http://dbpedia.org/ontology") . 
FILTER (STR(?p) NOT IN (dbo:wikiPageRedirects, 
dbo:wikiPageExternalLink, dbo:wikiPageDisambiguates)) } 
"#;

const PR_QUERY: &str = r#"PREFIX rdf:<http://www.w3.org/1999/02/22-rdf-syntax-ns#>
PREFIX dbo:<http://dbpedia.org/ontology/>
PREFIX vrank:<http://purl.org/voc/vrank#>

SELECT ?score FROM <http://dbpedia.org> 
FROM <http://people.aifb.kit.edu/ath/#DBpedia_PageRank>
WHERE { <itemURI> vrank:hasRank/vrank:rankValue ?score . }
"#;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QueryTemplate {
    pub set: FeatureSet,
    pub text: &'static str,
}

impl QueryTemplate {
    pub const PO: QueryTemplate = QueryTemplate {
        set: FeatureSet::Po,
        text: PO_QUERY,
    };
    pub const SP: QueryTemplate = QueryTemplate {
        set: FeatureSet::Sp,
        text: SP_QUERY,
    };
    pub const PR: QueryTemplate = QueryTemplate {
        set: FeatureSet::Pr,
        text: PR_QUERY,
    };

    pub fn for_set(set: FeatureSet) -> QueryTemplate {
        match set {
            FeatureSet::Po => Self::PO,
            FeatureSet::Sp => Self::SP,
            FeatureSet::Pr => Self::PR,
        }
    }

    /// Short id used in cache files: `PO`, `SP` or `PR`.
    pub fn id(&self) -> &'static str {
        match self.set {
            FeatureSet::Po => "PO",
            FeatureSet::Sp => "SP",
            FeatureSet::Pr => "PR",
        }
    }

    /// Result variables in projection order.
    pub fn variables(&self) -> &'static [&'static str] {
        match self.set {
            FeatureSet::Po => &["p", "o"],
            FeatureSet::Sp => &["s", "p"],
            FeatureSet::Pr => &["score"],
        }
    }

    pub fn placeholder_count(&self) -> usize {
        self.text.matches(PLACEHOLDER).count()
    }

    /// Substitutes the item URI after validating it.
    pub fn render(&self, item_uri: &str) -> Result<String> {
        validate_uri(item_uri)?;
        let iri = ["<", item_uri, ">"].concat();
        Ok(self.text.replace(PLACEHOLDER, &iri))
    }

    /// Whether a property may appear in this template's results.
    pub fn keeps_property(&self, property: &str) -> bool {
        match self.set {
            FeatureSet::Po => !PO_EXCLUDED.contains(&property),
            FeatureSet::Sp => !SP_EXCLUDED.contains(&property),
            FeatureSet::Pr => true,
        }
    }
}

/// Accepts absolute IRIs that can sit between `<` and `>` in a query.
pub fn validate_uri(uri: &str) -> Result<()> {
    let bad = || Error::InvalidUri(uri.to_string());
    let (scheme, rest) = uri.split_once(':').ok_or_else(bad)?;
    let scheme_ok = scheme
        .chars()
        .next()
        .is_some_and(|c| c.is_ascii_alphabetic())
        && scheme
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '+' | '-' | '.'));
    if !scheme_ok || rest.is_empty() {
        return Err(bad());
    }
    let forbidden = |c: char| {
        c.is_whitespace()
            || c.is_control()
            || matches!(c, '<' | '>' | '"' | '{' | '}' | '|' | '\\' | '^' | '`')
    };
    if uri.chars().any(forbidden) {
        return Err(bad());
    }
    Ok(())
}
