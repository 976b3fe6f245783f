use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::io::BufRead;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Fake,
    Real,
}

impl Label {
    pub fn as_str(self) -> &'static str {
        match self {
            Label::Fake => "fake",
            Label::Real => "real",
        }
    }

    pub fn other(self) -> Label {
        match self {
            Label::Fake => Label::Real,
            Label::Real => Label::Fake,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "fake" => Ok(Label::Fake),
            "real" => Ok(Label::Real),
            other => Err(Error::parameter(format!("unknown label {other:?}"))),
        }
    }
}

/// One article with everything the aspect builders consume.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArticleRecord {
    pub id: String,
    #[serde(default)]
    pub text: String,
    #[serde(default)]
    pub hashtags: Vec<String>,
    /// Pre-extracted HTML tag frequencies of the serving page.
    #[serde(default)]
    pub tag_counts: BTreeMap<String, u64>,
    #[serde(default)]
    pub domain: String,
    #[serde(default)]
    pub label: Option<Label>,
}

/// Reads a line-delimited JSON corpus. Blank lines are skipped; ids must be
/// unique.
pub fn read_corpus(reader: impl BufRead) -> Result<Vec<ArticleRecord>> {
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: ArticleRecord = serde_json::from_str(&line).map_err(|e| Error::Ingestion {
            line: line_no,
            message: e.to_string(),
        })?;
        if rec.id.is_empty() {
            return Err(Error::Ingestion {
                line: line_no,
                message: "empty article id".into(),
            });
        }
        if !seen.insert(rec.id.clone()) {
            return Err(Error::Ingestion {
                line: line_no,
                message: format!("duplicate article id {:?}", rec.id),
            });
        }
        out.push(rec);
    }
    Ok(out)
}

pub fn load_corpus(path: impl AsRef<Path>) -> Result<Vec<ArticleRecord>> {
    let f = std::fs::File::open(path)?;
    read_corpus(std::io::BufReader::new(f))
}

pub fn write_corpus(records: &[ArticleRecord], mut w: impl std::io::Write) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_jsonl_with_null_label() {
        let src = r##"{"id":"a","text":"x y","hashtags":["#t"],"tag_counts":{"p":2},"domain":"d1","label":"fake"}

{"id":"b","text":"","hashtags":[],"tag_counts":{},"domain":"d2","label":null}
"##;
        let c = read_corpus(src.as_bytes()).unwrap();
        assert_eq!(c.len(), 2);
        assert_eq!(c[0].label, Some(Label::Fake));
        assert_eq!(c[1].label, None);
        assert_eq!(c[0].tag_counts["p"], 2);
    }

    #[test]
    fn duplicate_ids_are_rejected_with_line() {
        let src = "{\"id\":\"a\"}\n{\"id\":\"a\"}\n";
        match read_corpus(src.as_bytes()) {
            Err(Error::Ingestion { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn negative_tag_count_is_an_ingestion_error() {
        let src = "{\"id\":\"a\",\"tag_counts\":{\"p\":-1}}\n";
        assert!(matches!(
            read_corpus(src.as_bytes()),
            Err(Error::Ingestion { line: 1, .. })
        ));
    }
}
