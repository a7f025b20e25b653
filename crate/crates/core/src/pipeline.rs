//! The two-stage classifier and document aggregation.
//!
//! Non-English input is first translated to English. The one-vs-rest models
//! then screen the text, and the keyword ontology verifies each screened
//! goal: a goal becomes a final label only when both stages support it.
//!
//! Long documents are cut into paragraph-sized chunks, each chunk is
//! classified on its own, and a distribution is reported only when enough of
//! the document is goal-related.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hash::input_hash;
use crate::model_set::{ml_labels, OvrModelSet};
use crate::ontology::{evidence_sdgs, KeywordMatch, Ontology};
use crate::sdg::{LanguageCode, SdgId};
use crate::tokenize::tokenize;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TranslationError {
    #[error("no translation backend is configured for {0}")]
    Unavailable(LanguageCode),
    #[error("backend {backend} failed after {attempts} attempt(s): {message}")]
    Backend {
        backend: String,
        attempts: u32,
        message: String,
    },
    #[error("backend {backend} returned a malformed response: {message}")]
    MalformedResponse { backend: String, message: String },
}

/// A backend that turns text in a supported language into English.
///
/// Implementations must return non-empty text for non-empty input and must be
/// deterministic for identical requests within a session, so results can be
/// cached.
pub trait Translator {
    fn name(&self) -> &str;
    fn translate(&self, text: &str, source: LanguageCode) -> Result<String, TranslationError>;
}

impl<T: Translator + ?Sized> Translator for alloc::boxed::Box<T> {
    fn name(&self) -> &str {
        (**self).name()
    }

    fn translate(&self, text: &str, source: LanguageCode) -> Result<String, TranslationError> {
        (**self).translate(text, source)
    }
}

impl<T: Translator + ?Sized> Translator for &T {
    fn name(&self) -> &str {
        (**self).name()
    }

    fn translate(&self, text: &str, source: LanguageCode) -> Result<String, TranslationError> {
        (**self).translate(text, source)
    }
}

/// Rejects every request; used when no backend is configured.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoTranslator;

impl Translator for NoTranslator {
    fn name(&self) -> &str {
        "none"
    }

    fn translate(&self, _text: &str, source: LanguageCode) -> Result<String, TranslationError> {
        Err(TranslationError::Unavailable(source))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PipelineError {
    #[error("input text is empty")]
    EmptyText,
    #[error("document contains no text")]
    EmptyDocument,
    #[error("translation failed: {0}")]
    Translation(#[from] TranslationError),
    #[error("invalid aggregation config: {0}")]
    InvalidConfig(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AggregationConfig {
    /// Minimum share of related chunks for a document to get a distribution.
    pub relevance_threshold: f64,
    /// Minimum share of related chunks an SDG must appear in to be kept.
    pub sdg_share_threshold: f64,
    pub chunk_min_sentences: usize,
    pub chunk_max_sentences: usize,
}

impl Default for AggregationConfig {
    fn default() -> Self {
        AggregationConfig {
            relevance_threshold: 0.15,
            sdg_share_threshold: 0.10,
            chunk_min_sentences: 3,
            chunk_max_sentences: 6,
        }
    }
}

impl AggregationConfig {
    pub fn validate(&self) -> Result<(), PipelineError> {
        let unit = |x: f64| x > 0.0 && x < 1.0;
        if !unit(self.relevance_threshold) || !unit(self.sdg_share_threshold) {
            return Err(PipelineError::InvalidConfig("thresholds must lie in (0, 1)"));
        }
        if self.chunk_min_sentences == 0 || self.chunk_min_sentences > self.chunk_max_sentences {
            return Err(PipelineError::InvalidConfig("need 1 <= chunk_min_sentences <= chunk_max_sentences"));
        }
        // Splitting max+1 sentences in two must still give windows of at least min.
        if 2 * self.chunk_min_sentences > self.chunk_max_sentences + 1 {
            return Err(PipelineError::InvalidConfig("chunk sentence range is too narrow to window"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SdgScore {
    pub probability: f64,
    pub keyword_matches: Vec<KeywordMatch>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationResult {
    /// SHA-256 of the whitespace-normalized input text.
    pub input_hash: String,
    pub language: LanguageCode,
    pub translated: bool,
    pub per_sdg: BTreeMap<SdgId, SdgScore>,
    pub final_labels: BTreeSet<SdgId>,
    pub most_relevant: Option<SdgId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocumentResult {
    pub chunk_count: usize,
    pub related_chunk_count: usize,
    pub related_fraction: f64,
    pub distribution: BTreeMap<SdgId, f64>,
    pub per_chunk: Vec<ClassificationResult>,
}

/// Document-level outcome computed from per-chunk final labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Aggregate {
    pub chunk_count: usize,
    pub related_chunk_count: usize,
    pub related_fraction: f64,
    pub distribution: BTreeMap<SdgId, f64>,
}

/// Applies the relevance gate and the per-goal share filter.
///
/// A chunk is related when it has at least one final label. Each goal's share
/// is the fraction of related chunks carrying it; goals below the share
/// threshold are dropped and the rest renormalized to sum to one. Both
/// thresholds are inclusive.
pub fn aggregate(chunk_labels: &[BTreeSet<SdgId>], config: &AggregationConfig) -> Aggregate {
    let chunk_count = chunk_labels.len();
    let related: Vec<&BTreeSet<SdgId>> = chunk_labels.iter().filter(|l| !l.is_empty()).collect();
    let related_chunk_count = related.len();
    let related_fraction = if chunk_count == 0 {
        0.0
    } else {
        related_chunk_count as f64 / chunk_count as f64
    };
    let mut distribution = BTreeMap::new();
    if chunk_count > 0 && related_fraction >= config.relevance_threshold {
        let mut counts: BTreeMap<SdgId, usize> = BTreeMap::new();
        for labels in &related {
            for &s in labels.iter() {
                *counts.entry(s).or_default() += 1;
            }
        }
        // Shares are compared as ratios so that e.g. 2/20 meets 0.10 exactly.
        counts.retain(|_, &mut c| c as f64 / related_chunk_count as f64 >= config.sdg_share_threshold);
        let kept: usize = counts.values().sum();
        distribution = counts
            .into_iter()
            .map(|(s, c)| (s, c as f64 / kept as f64))
            .collect();
    }
    Aggregate {
        chunk_count,
        related_chunk_count,
        related_fraction,
        distribution,
    }
}

/// Splits a document into classification chunks.
///
/// Paragraphs are separated by blank lines. A paragraph with at most
/// `chunk_max_sentences` sentences is one chunk; a longer one is cut into
/// consecutive windows of near-equal size. A sentence ends at `.`, `!` or `?`
/// (plus any closing quotes or brackets) followed by whitespace and an
/// uppercase letter or digit. Chunks are slices of the input.
pub fn chunk_document<'a>(text: &'a str, config: &AggregationConfig) -> Vec<&'a str> {
    let max = config.chunk_max_sentences.max(1);
    let mut chunks = Vec::new();
    for (p_start, p_end) in paragraphs(text) {
        let para = &text[p_start..p_end];
        let sentences = sentence_spans(para);
        if sentences.len() <= max {
            chunks.push(para);
            continue;
        }
        let n = sentences.len();
        let windows = n.div_ceil(max);
        let (base, extra) = (n / windows, n % windows);
        let mut first = 0;
        for w in 0..windows {
            let size = base + usize::from(w < extra);
            let last = first + size - 1;
            chunks.push(&para[sentences[first].0..sentences[last].1]);
            first += size;
        }
    }
    chunks
}

fn paragraphs(text: &str) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut current: Option<(usize, usize)> = None;
    let mut offset = 0;
    for line in text.split_inclusive('\n') {
        let start = offset;
        offset += line.len();
        if line.trim().is_empty() {
            if let Some(p) = current.take() {
                out.push(p);
            }
            continue;
        }
        let lead = line.len() - line.trim_start().len();
        let end = start + line.trim_end().len();
        match &mut current {
            Some((_, e)) => *e = end,
            None => current = Some((start + lead, end)),
        }
    }
    out.extend(current);
    out
}

fn is_closer(c: char) -> bool {
    matches!(c, '"' | '\'' | ')' | ']' | '\u{201d}' | '\u{2019}' | '\u{bb}')
}

/// Byte spans of the sentences in a trimmed paragraph.
fn sentence_spans(para: &str) -> Vec<(usize, usize)> {
    let chars: Vec<(usize, char)> = para.char_indices().collect();
    let mut spans = Vec::new();
    let mut start = 0usize;
    let mut i = 0usize;
    while i < chars.len() {
        if matches!(chars[i].1, '.' | '!' | '?') {
            let mut j = i + 1;
            while j < chars.len() && matches!(chars[j].1, '.' | '!' | '?') {
                j += 1;
            }
            while j < chars.len() && is_closer(chars[j].1) {
                j += 1;
            }
            let end = chars.get(j).map_or(para.len(), |c| c.0);
            let mut k = j;
            while k < chars.len() && chars[k].1.is_whitespace() {
                k += 1;
            }
            if k > j && k < chars.len() && (chars[k].1.is_uppercase() || chars[k].1.is_numeric()) {
                spans.push((start, end));
                start = chars[k].0;
                i = k;
                continue;
            }
            i = j;
            continue;
        }
        i += 1;
    }
    if start < para.len() {
        spans.push((start, para.len()));
    }
    spans
}

/// Everything the two stages need.
pub struct Classifier<'a> {
    pub model_set: &'a OvrModelSet,
    pub ontology: &'a Ontology,
    pub translator: &'a dyn Translator,
    /// Keyword matches required before a goal counts as verified.
    pub min_hits: usize,
}

impl<'a> Classifier<'a> {
    pub fn new(model_set: &'a OvrModelSet, ontology: &'a Ontology, translator: &'a dyn Translator) -> Self {
        Classifier {
            model_set,
            ontology,
            translator,
            min_hits: 1,
        }
    }

    pub fn classify_text(&self, text: &str, language: LanguageCode) -> Result<ClassificationResult, PipelineError> {
        if text.trim().is_empty() {
            return Err(PipelineError::EmptyText);
        }
        let hash = input_hash(text);
        if language.is_english() {
            Ok(self.classify_english(text, hash, language, false))
        } else {
            let english = self.translator.translate(text, language)?;
            Ok(self.classify_english(&english, hash, language, true))
        }
    }

    fn classify_english(&self, english: &str, input_hash: String, language: LanguageCode, translated: bool) -> ClassificationResult {
        let tokens: Vec<String> = tokenize(english).into_iter().map(|t| t.text).collect();
        let probs = self.model_set.predict_proba(english);
        let matches = self.ontology.match_tokens(&tokens);

        let screened = ml_labels(&probs, self.model_set);
        let verified = evidence_sdgs(&matches, self.min_hits);
        let final_labels: BTreeSet<SdgId> = screened.intersection(&verified).copied().collect();

        let mut most_relevant: Option<SdgId> = None;
        for &s in &final_labels {
            if most_relevant.is_none_or(|best| probs[&s] > probs[&best]) {
                most_relevant = Some(s);
            }
        }

        let mut per_sdg: BTreeMap<SdgId, SdgScore> = probs
            .into_iter()
            .map(|(s, probability)| {
                (
                    s,
                    SdgScore {
                        probability,
                        keyword_matches: Vec::new(),
                    },
                )
            })
            .collect();
        for m in matches {
            if let Some(score) = per_sdg.get_mut(&m.sdg) {
                score.keyword_matches.push(m);
            }
        }

        ClassificationResult {
            input_hash,
            language,
            translated,
            per_sdg,
            final_labels,
            most_relevant,
        }
    }

    pub fn classify_document(
        &self,
        text: &str,
        language: LanguageCode,
        config: &AggregationConfig,
    ) -> Result<DocumentResult, PipelineError> {
        config.validate()?;
        let chunks = chunk_document(text, config);
        if chunks.is_empty() {
            return Err(PipelineError::EmptyDocument);
        }
        let per_chunk = chunks
            .iter()
            .map(|c| self.classify_text(c, language))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(document_result(per_chunk, config))
    }
}

/// Assembles a document result from already classified chunks, in order.
pub fn document_result(per_chunk: Vec<ClassificationResult>, config: &AggregationConfig) -> DocumentResult {
    let labels: Vec<BTreeSet<SdgId>> = per_chunk.iter().map(|r| r.final_labels.clone()).collect();
    let agg = aggregate(&labels, config);
    DocumentResult {
        chunk_count: agg.chunk_count,
        related_chunk_count: agg.related_chunk_count,
        related_fraction: agg.related_fraction,
        distribution: agg.distribution,
        per_chunk,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::format;
    use alloc::vec;

    fn sdg(n: i64) -> SdgId {
        SdgId::new(n).unwrap()
    }

    fn labels(spec: &[(usize, &[i64])], unrelated: usize) -> Vec<BTreeSet<SdgId>> {
        let mut out = Vec::new();
        for &(count, goals) in spec {
            for _ in 0..count {
                out.push(goals.iter().map(|&g| sdg(g)).collect());
            }
        }
        out.extend((0..unrelated).map(|_| BTreeSet::new()));
        out
    }

    #[test]
    fn relevance_gate() {
        let cfg = AggregationConfig::default();
        let low = aggregate(&labels(&[(14, &[4])], 86), &cfg);
        assert_eq!(low.related_fraction, 0.14);
        assert!(low.distribution.is_empty());
        let at = aggregate(&labels(&[(15, &[4])], 85), &cfg);
        assert_eq!(at.distribution.get(&sdg(4)), Some(&1.0));
    }

    #[test]
    fn shares_are_filtered_and_renormalized() {
        let cfg = AggregationConfig::default();
        let a = aggregate(&labels(&[(12, &[4]), (6, &[5]), (2, &[13])], 80), &cfg);
        assert_eq!(a.related_chunk_count, 20);
        let d: Vec<(u8, f64)> = a.distribution.iter().map(|(s, v)| (s.get(), *v)).collect();
        assert_eq!(d.len(), 3);
        assert!((d[0].1 - 0.6).abs() < 1e-12 && (d[1].1 - 0.3).abs() < 1e-12 && (d[2].1 - 0.1).abs() < 1e-12);

        let b = aggregate(&labels(&[(19, &[4]), (1, &[13])], 80), &cfg);
        assert_eq!(b.distribution.len(), 1);
        assert_eq!(b.distribution[&sdg(4)], 1.0);
    }

    #[test]
    fn multi_label_chunks_count_once_per_goal() {
        let a = aggregate(&labels(&[(10, &[6, 14]), (10, &[6])], 0), &AggregationConfig::default());
        assert!((a.distribution[&sdg(6)] - 20.0 / 30.0).abs() < 1e-12);
        assert!((a.distribution[&sdg(14)] - 10.0 / 30.0).abs() < 1e-12);
    }

    fn sentences(n: usize) -> String {
        (1..=n).map(|i| format!("Sentence number {i} is here.")).collect::<Vec<_>>().join(" ")
    }

    #[test]
    fn chunking_examples() {
        let cfg = AggregationConfig::default();
        assert!(chunk_document("", &cfg).is_empty());
        assert!(chunk_document("  \n\n \n", &cfg).is_empty());
        assert_eq!(chunk_document(&sentences(4), &cfg).len(), 1);
        let twelve = sentences(12);
        let chunks = chunk_document(&twelve, &cfg);
        assert_eq!(chunks.len(), 2);
        assert_eq!(chunks[0], sentences(6));
        assert!(chunks[1].starts_with("Sentence number 7 ") && chunks[1].ends_with("number 12 is here."));
        let seven_text = sentences(7);
        let seven = chunk_document(&seven_text, &cfg);
        assert_eq!(seven.len(), 2);
        assert_eq!(sentence_spans(seven[0]).len(), 4);
        assert_eq!(sentence_spans(seven[1]).len(), 3);
    }

    #[test]
    fn sentence_rule() {
        assert_eq!(sentence_spans("It costs 3.5 dollars. Really? Yes! 2030 is near.").len(), 4);
        assert_eq!(sentence_spans("e.g. lower case follows. so no split").len(), 1);
        assert_eq!(sentence_spans("He said \"stop.\" Then left.").len(), 2);
    }

    #[test]
    fn paragraphs_split_on_blank_lines() {
        let doc = "First para line one.\nline two.\n\n   \nSecond para.\n\n\nThird.";
        let cfg = AggregationConfig::default();
        assert_eq!(
            chunk_document(doc, &cfg),
            vec!["First para line one.\nline two.", "Second para.", "Third."]
        );
    }

    #[test]
    fn config_validation() {
        assert!(AggregationConfig::default().validate().is_ok());
        let bad = AggregationConfig { relevance_threshold: 1.0, ..Default::default() };
        assert!(bad.validate().is_err());
        let narrow = AggregationConfig { chunk_min_sentences: 4, chunk_max_sentences: 6, ..Default::default() };
        assert!(narrow.validate().is_err());
    }

    proptest::proptest! {
        #[test]
        fn chunks_conserve_text(
            paras in proptest::collection::vec(proptest::collection::vec("[A-Z][a-z]{0,6}( [a-z0-9]{1,5}){0,4}[.!?]", 1..15), 0..6),
            seps in proptest::collection::vec("\n\n|\n \n\n|\n\t\n", 6),
        ) {
            let mut doc = String::new();
            for (i, p) in paras.iter().enumerate() {
                if i > 0 {
                    doc.push_str(&seps[i]);
                }
                doc.push_str(&p.join(" "));
            }
            let cfg = AggregationConfig::default();
            let chunks = chunk_document(&doc, &cfg);
            let squash = |s: &str| s.split_whitespace().collect::<String>();
            proptest::prop_assert_eq!(squash(&chunks.concat()), squash(&doc));
            for c in &chunks {
                let n = sentence_spans(c).len();
                proptest::prop_assert!(n >= 1 && n <= cfg.chunk_max_sentences);
            }
        }

        #[test]
        fn renormalization_sums_to_one_and_keeps_order(
            rows in proptest::collection::vec(proptest::collection::btree_set(1i64..=16, 0..4), 1..120),
        ) {
            let labels: Vec<BTreeSet<SdgId>> = rows.iter().map(|r| r.iter().map(|&g| sdg(g)).collect()).collect();
            let a = aggregate(&labels, &AggregationConfig::default());
            if !a.distribution.is_empty() {
                let total: f64 = a.distribution.values().sum();
                proptest::prop_assert!((total - 1.0).abs() <= 1e-9);
                proptest::prop_assert!(a.related_fraction >= 0.15);
                let mut raw: BTreeMap<SdgId, usize> = BTreeMap::new();
                for l in &labels {
                    for &s in l {
                        *raw.entry(s).or_default() += 1;
                    }
                }
                for (s, v) in &a.distribution {
                    proptest::prop_assert!(raw[s] as f64 / a.related_chunk_count as f64 >= 0.10);
                    for (t, w) in &a.distribution {
                        proptest::prop_assert_eq!(raw[s].cmp(&raw[t]), v.partial_cmp(w).unwrap());
                    }
                }
            }
        }
    }
}
