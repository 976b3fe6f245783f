use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::io::Read;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::record::ArticleRecord;
use super::text::{normalize_hashtag, tokenize_filtered, Vocabulary};
use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;
use crate::tensor::SparseTensor3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AspectKind {
    Tta,
    Hta,
    Tags,
    External,
}

impl AspectKind {
    pub fn as_str(self) -> &'static str {
        match self {
            AspectKind::Tta => "tta",
            AspectKind::Hta => "hta",
            AspectKind::Tags => "tags",
            AspectKind::External => "external",
        }
    }
}

impl std::str::FromStr for AspectKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "tta" => Ok(AspectKind::Tta),
            "hta" => Ok(AspectKind::Hta),
            "tags" => Ok(AspectKind::Tags),
            "external" => Ok(AspectKind::External),
            other => Err(Error::parameter(format!("unknown aspect {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum AspectData {
    /// Articles along the third mode.
    Tensor(SparseTensor3),
    /// Articles along the rows.
    Matrix(DenseMatrix),
}

/// One aspect of a corpus, aligned to a shared article order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AspectModel {
    pub kind: AspectKind,
    /// Display name; defaults to the kind, external aspects take the file stem.
    pub name: String,
    pub data: AspectData,
    pub article_ids: Vec<String>,
}

impl AspectModel {
    pub fn n_articles(&self) -> usize {
        self.article_ids.len()
    }

    /// Index of the mode (tensor) or axis (matrix, 0 = rows) holding articles.
    pub fn article_axis(&self) -> usize {
        match self.data {
            AspectData::Tensor(_) => 2,
            AspectData::Matrix(_) => 0,
        }
    }

    pub fn tensor(&self) -> Option<&SparseTensor3> {
        match &self.data {
            AspectData::Tensor(t) => Some(t),
            AspectData::Matrix(_) => None,
        }
    }

    pub fn matrix(&self) -> Option<&DenseMatrix> {
        match &self.data {
            AspectData::Matrix(m) => Some(m),
            AspectData::Tensor(_) => None,
        }
    }
}

fn article_ids(corpus: &[ArticleRecord]) -> Vec<String> {
    corpus.iter().map(|r| r.id.clone()).collect()
}

/// Checks that every model shares the same article order.
pub fn check_alignment(models: &[AspectModel]) -> Result<()> {
    if let Some(first) = models.first() {
        for m in &models[1..] {
            if m.article_ids != first.article_ids {
                return Err(Error::Alignment(format!(
                    "aspect {} article order differs from aspect {}",
                    m.name, first.name
                )));
            }
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TextOptions {
    pub window: usize,
    pub remove_stopwords: bool,
}

impl Default for TextOptions {
    fn default() -> Self {
        Self {
            window: 5,
            remove_stopwords: false,
        }
    }
}

/// Token indices for one article; out-of-vocabulary positions are `None`
/// and still occupy a slot in the window.
fn indexed_tokens(text: &str, vocab: &Vocabulary, remove_stopwords: bool) -> Vec<Option<usize>> {
    tokenize_filtered(text, remove_stopwords)
        .iter()
        .map(|t| vocab.get(t))
        .collect()
}

fn window_pairs(tokens: &[Option<usize>], window: usize) -> BTreeSet<(usize, usize)> {
    let mut pairs = BTreeSet::new();
    for (p, ti) in tokens.iter().enumerate() {
        let Some(i) = *ti else { continue };
        // positions within the same window differ by at most window - 1
        for tj in tokens.iter().skip(p + 1).take(window - 1) {
            if let Some(j) = *tj {
                if i != j {
                    pairs.insert((i, j));
                    pairs.insert((j, i));
                }
            }
        }
    }
    pairs
}

/// Term-term-article binary co-occurrence tensor of shape `(V, V, N)`.
pub fn build_tta(
    corpus: &[ArticleRecord],
    vocab: &Vocabulary,
    opts: &TextOptions,
) -> Result<AspectModel> {
    if opts.window < 2 {
        return Err(Error::parameter(format!(
            "co-occurrence window must be at least 2, got {}",
            opts.window
        )));
    }
    let v = vocab.len();
    let n = corpus.len();
    if v == 0 || n == 0 {
        return Err(Error::dimension(format!(
            "term-term tensor would be empty: vocabulary {v}, articles {n}"
        )));
    }
    let coords: Vec<(usize, usize, usize)> = corpus
        .par_iter()
        .enumerate()
        .flat_map_iter(|(k, rec)| {
            let toks = indexed_tokens(&rec.text, vocab, opts.remove_stopwords);
            window_pairs(&toks, opts.window)
                .into_iter()
                .map(move |(i, j)| (i, j, k))
        })
        .collect();
    Ok(AspectModel {
        kind: AspectKind::Tta,
        name: AspectKind::Tta.as_str().into(),
        data: AspectData::Tensor(SparseTensor3::binary([v, v, n], coords)?),
        article_ids: article_ids(corpus),
    })
}

/// Hashtag-term-article binary tensor of shape `(H, V, N)`.
pub fn build_hta(
    corpus: &[ArticleRecord],
    vocab: &Vocabulary,
    hashtags: &Vocabulary,
    opts: &TextOptions,
) -> Result<AspectModel> {
    let (h, v, n) = (hashtags.len(), vocab.len(), corpus.len());
    if h == 0 || v == 0 || n == 0 {
        return Err(Error::dimension(format!(
            "hashtag-term tensor would be empty: hashtags {h}, vocabulary {v}, articles {n}"
        )));
    }
    let coords: Vec<(usize, usize, usize)> = corpus
        .par_iter()
        .enumerate()
        .flat_map_iter(|(k, rec)| {
            let tags: BTreeSet<usize> = rec
                .hashtags
                .iter()
                .filter_map(|t| hashtags.get(&normalize_hashtag(t)))
                .collect();
            let terms: BTreeSet<usize> = indexed_tokens(&rec.text, vocab, opts.remove_stopwords)
                .into_iter()
                .flatten()
                .collect();
            let mut out = Vec::with_capacity(tags.len() * terms.len());
            for &ht in &tags {
                for &t in &terms {
                    out.push((ht, t, k));
                }
            }
            out
        })
        .collect();
    Ok(AspectModel {
        kind: AspectKind::Hta,
        name: AspectKind::Hta.as_str().into(),
        data: AspectData::Tensor(SparseTensor3::binary([h, v, n], coords)?),
        article_ids: article_ids(corpus),
    })
}

/// Article by HTML-tag raw count matrix; columns in lexicographic tag order.
/// Returns the matrix model and the column names.
pub fn build_tags(corpus: &[ArticleRecord]) -> (AspectModel, Vec<String>) {
    let names: Vec<String> = corpus
        .iter()
        .flat_map(|r| r.tag_counts.keys().cloned())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let col: HashMap<&str, usize> = names
        .iter()
        .enumerate()
        .map(|(i, s)| (s.as_str(), i))
        .collect();
    let mut m = DenseMatrix::zeros(corpus.len(), names.len());
    for (k, rec) in corpus.iter().enumerate() {
        let row = m.row_mut(k);
        for (tag, &c) in &rec.tag_counts {
            row[col[tag.as_str()]] = c as f64;
        }
    }
    let model = AspectModel {
        kind: AspectKind::Tags,
        name: AspectKind::Tags.as_str().into(),
        data: AspectData::Matrix(m),
        article_ids: article_ids(corpus),
    };
    (model, names)
}

/// Parsed `article_id,entity_id` interaction pairs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExternalPairs {
    pub name: String,
    pub pairs: Vec<(String, String)>,
}

impl ExternalPairs {
    /// Parses header-less CSV pairs; every article id must be in
    /// `known_ids`.
    pub fn read(reader: impl Read, name: &str, known_ids: &[String]) -> Result<Self> {
        let known: HashSet<&str> = known_ids.iter().map(String::as_str).collect();
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let mut pairs = Vec::new();
        for (idx, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| Error::Ingestion {
                line: e.position().map_or(idx + 1, |p| p.line() as usize),
                message: e.to_string(),
            })?;
            let line = rec.position().map_or(idx + 1, |p| p.line() as usize);
            if rec.len() == 1 && rec[0].is_empty() {
                continue;
            }
            if rec.len() != 2 {
                return Err(Error::Ingestion {
                    line,
                    message: format!("expected article_id,entity_id, got {} fields", rec.len()),
                });
            }
            if !known.contains(&rec[0]) {
                return Err(Error::Ingestion {
                    line,
                    message: format!("unknown article id {:?}", &rec[0]),
                });
            }
            pairs.push((rec[0].to_string(), rec[1].to_string()));
        }
        Ok(Self {
            name: name.to_string(),
            pairs,
        })
    }

    pub fn load(path: impl AsRef<Path>, known_ids: &[String]) -> Result<Self> {
        let path = path.as_ref();
        let name = path.file_stem().map_or_else(
            || "external".to_string(),
            |s| s.to_string_lossy().into_owned(),
        );
        Self::read(std::fs::File::open(path)?, &name, known_ids)
    }

    /// Binary article-by-entity matrix over `article_ids`, entities in
    /// lexicographic order. Pairs for other articles are skipped, so
    /// entities seen only there get no column.
    pub fn to_model(&self, article_ids: &[String]) -> (AspectModel, Vec<String>) {
        let row_of: HashMap<&str, usize> = article_ids
            .iter()
            .enumerate()
            .map(|(i, s)| (s.as_str(), i))
            .collect();
        let mut by_entity: BTreeMap<&str, BTreeSet<usize>> = BTreeMap::new();
        for (a, e) in &self.pairs {
            if let Some(&r) = row_of.get(a.as_str()) {
                by_entity.entry(e.as_str()).or_default().insert(r);
            }
        }
        let mut m = DenseMatrix::zeros(article_ids.len(), by_entity.len());
        for (c, rows) in by_entity.values().enumerate() {
            for &r in rows {
                m.row_mut(r)[c] = 1.0;
            }
        }
        let model = AspectModel {
            kind: AspectKind::External,
            name: self.name.clone(),
            data: AspectData::Matrix(m),
            article_ids: article_ids.to_vec(),
        };
        (model, by_entity.keys().map(|s| s.to_string()).collect())
    }
}

/// Reads header-less `article_id,entity_id` pairs into a binary
/// article-by-entity matrix aligned to `article_ids`.
pub fn read_external_matrix(
    reader: impl Read,
    name: &str,
    article_ids: &[String],
) -> Result<(AspectModel, Vec<String>)> {
    Ok(ExternalPairs::read(reader, name, article_ids)?.to_model(article_ids))
}

pub fn load_external_matrix(
    path: impl AsRef<Path>,
    article_ids: &[String],
) -> Result<(AspectModel, Vec<String>)> {
    Ok(ExternalPairs::load(path, article_ids)?.to_model(article_ids))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aspects::text::{build_hashtag_vocabulary, build_vocabulary};

    fn rec(id: &str, text: &str, tags: &[&str]) -> ArticleRecord {
        ArticleRecord {
            id: id.into(),
            text: text.into(),
            hashtags: tags.iter().map(|s| s.to_string()).collect(),
            tag_counts: BTreeMap::new(),
            domain: String::new(),
            label: None,
        }
    }

    fn slice(m: &AspectModel, k: usize) -> BTreeSet<(usize, usize)> {
        m.tensor()
            .unwrap()
            .entries()
            .iter()
            .filter(|e| e.k == k)
            .map(|e| (e.i, e.j))
            .collect()
    }

    #[test]
    fn tta_window_two() {
        let c = [rec("1", "a b c", &[])];
        let v = Vocabulary::from_tokens(vec!["a".into(), "b".into(), "c".into()]);
        let m = build_tta(
            &c,
            &v,
            &TextOptions {
                window: 2,
                ..Default::default()
            },
        )
        .unwrap();
        let want: BTreeSet<_> = [(0, 1), (1, 0), (1, 2), (2, 1)].into();
        assert_eq!(slice(&m, 0), want);
    }

    #[test]
    fn tta_excludes_self_pairs() {
        let c = [rec("1", "a a a", &[]), rec("2", "a", &[])];
        let v = build_vocabulary(&c, 1);
        let m = build_tta(
            &c,
            &v,
            &TextOptions {
                window: 2,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(m.tensor().unwrap().nnz(), 0);
    }

    #[test]
    fn tta_rejects_window_one() {
        let c = [rec("1", "a b", &[])];
        let v = build_vocabulary(&c, 1);
        assert!(build_tta(
            &c,
            &v,
            &TextOptions {
                window: 1,
                ..Default::default()
            }
        )
        .is_err());
    }

    #[test]
    fn hta_cross_product() {
        let c = [rec("1", "trump wins", &["#elec"]), rec("2", "", &["#elec"])];
        let v = build_vocabulary(&c, 1);
        let h = build_hashtag_vocabulary(&c, 1);
        let m = build_hta(&c, &v, &h, &TextOptions::default()).unwrap();
        let t = m.tensor().unwrap();
        assert_eq!(t.dims(), [1, 2, 2]);
        assert_eq!(t.get(0, v.get("trump").unwrap(), 0), 1.0);
        assert_eq!(t.get(0, v.get("wins").unwrap(), 0), 1.0);
        assert_eq!(slice(&m, 1).len(), 0);
    }

    #[test]
    fn tags_columns_sorted() {
        let mut a = rec("1", "", &[]);
        a.tag_counts = [("p".to_string(), 2), ("img".to_string(), 1)].into();
        let b = rec("2", "", &[]);
        let (m, names) = build_tags(&[a, b]);
        assert_eq!(names, ["img", "p"]);
        let x = m.matrix().unwrap();
        assert_eq!(x.row(0), &[1.0, 2.0]);
        assert_eq!(x.row(1), &[0.0, 0.0]);
    }

    #[test]
    fn external_matrix_binary_and_aligned() {
        let ids: Vec<String> = ["art1", "art2", "art3"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        let src = "art1,user7\nart2,user7\nart1,user7\nart3,pub1\n";
        let (m, ents) = read_external_matrix(src.as_bytes(), "users", &ids).unwrap();
        assert_eq!(ents, ["pub1", "user7"]);
        let x = m.matrix().unwrap();
        assert_eq!(x.col(1), vec![1.0, 1.0, 0.0]);
        assert_eq!(x.col(0), vec![0.0, 0.0, 1.0]);
    }

    #[test]
    fn external_unknown_id_names_line() {
        let ids = vec!["a".to_string()];
        match read_external_matrix("a,u\nzzz,u\n".as_bytes(), "x", &ids) {
            Err(Error::Ingestion { line, message }) => {
                assert_eq!(line, 2);
                assert!(message.contains("zzz"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn external_empty_file_gives_zero_columns() {
        let ids = vec!["a".to_string(), "b".to_string()];
        let (m, _) = read_external_matrix("".as_bytes(), "x", &ids).unwrap();
        assert_eq!(m.matrix().unwrap().shape(), (2, 0));
    }
}
