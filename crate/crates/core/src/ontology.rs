//! Per-goal keyword ontology and token-level multi-phrase matching.
//!
//! Phrases are matched over the token sequence produced by [`tokenize`], never
//! over raw characters, so a phrase only ever matches whole tokens: `water`
//! does not match inside `waterfall`. All phrases are compiled into one
//! Aho-Corasick automaton whose alphabet is the set of distinct phrase tokens.

use alloc::collections::{BTreeMap, BTreeSet, VecDeque};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sdg::SdgId;
use crate::tokenize::tokenize;

/// Longest phrase, in tokens, accepted in an ontology.
pub const MAX_PHRASE_TOKENS: usize = 8;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OntologyTerm {
    pub sdg: SdgId,
    pub phrase: Vec<String>,
    /// `"<sdg>:<phrase tokens joined by spaces>"`.
    pub term_id: String,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct KeywordMatch {
    pub sdg: SdgId,
    pub term_id: String,
    pub start_token: usize,
    /// Exclusive.
    pub end_token: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OntologyError {
    #[error("term {raw:?} for SDG {sdg} contains no word tokens")]
    EmptyTerm { sdg: SdgId, raw: String },
    #[error("term {raw:?} for SDG {sdg} has {tokens} tokens (maximum {MAX_PHRASE_TOKENS})")]
    PhraseTooLong { sdg: SdgId, raw: String, tokens: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum OntologyWarning {
    /// The same (goal, phrase) pair was listed more than once; kept once.
    DuplicateTerm { term_id: String },
    /// A trainable goal has no terms, so it can never receive a final label.
    NoTerms { sdg: SdgId },
}

impl core::fmt::Display for OntologyWarning {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            OntologyWarning::DuplicateTerm { term_id } => write!(f, "duplicate term {term_id} collapsed"),
            OntologyWarning::NoTerms { sdg } => write!(f, "SDG {sdg} has no ontology terms"),
        }
    }
}

/// A loaded ontology with its compiled matcher. Immutable after construction.
#[derive(Debug, Clone)]
pub struct Ontology {
    version: String,
    terms: Vec<OntologyTerm>,
    automaton: TokenAutomaton,
}

impl Ontology {
    /// Builds an ontology from raw `(goal, phrase)` entries.
    ///
    /// Phrases are tokenized with the same rule used for input text. Duplicate
    /// entries collapse into one term and produce a warning.
    pub fn new<I, S>(version: impl Into<String>, entries: I) -> Result<(Self, Vec<OntologyWarning>), OntologyError>
    where
        I: IntoIterator<Item = (SdgId, S)>,
        S: AsRef<str>,
    {
        let mut warnings = Vec::new();
        let mut seen = BTreeSet::new();
        let mut terms = Vec::new();
        for (sdg, raw) in entries {
            let raw = raw.as_ref();
            let phrase: Vec<String> = tokenize(raw).into_iter().map(|t| t.text).collect();
            if phrase.is_empty() {
                return Err(OntologyError::EmptyTerm { sdg, raw: raw.into() });
            }
            if phrase.len() > MAX_PHRASE_TOKENS {
                return Err(OntologyError::PhraseTooLong {
                    sdg,
                    raw: raw.into(),
                    tokens: phrase.len(),
                });
            }
            let term_id = format!("{}:{}", sdg, phrase.join(" "));
            if !seen.insert(term_id.clone()) {
                warnings.push(OntologyWarning::DuplicateTerm { term_id });
                continue;
            }
            terms.push(OntologyTerm { sdg, phrase, term_id });
        }
        let covered: BTreeSet<SdgId> = terms.iter().map(|t| t.sdg).collect();
        warnings.extend(
            SdgId::trainable()
                .filter(|s| !covered.contains(s))
                .map(|sdg| OntologyWarning::NoTerms { sdg }),
        );
        let automaton = TokenAutomaton::build(&terms);
        Ok((
            Ontology {
                version: version.into(),
                terms,
                automaton,
            },
            warnings,
        ))
    }

    pub fn version(&self) -> &str {
        &self.version
    }

    pub fn terms(&self) -> &[OntologyTerm] {
        &self.terms
    }

    pub fn terms_for(&self, sdg: SdgId) -> impl Iterator<Item = &OntologyTerm> {
        self.terms.iter().filter(move |t| t.sdg == sdg)
    }

    /// Matches over an already tokenized text.
    pub fn match_tokens<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<KeywordMatch> {
        let mut raw = self.automaton.find_all(tokens);
        // Same goal, same start: only the longest phrase survives.
        raw.sort_by(|a, b| {
            (a.start, self.terms[a.term].sdg, b.end).cmp(&(b.start, self.terms[b.term].sdg, a.end))
        });
        raw.dedup_by(|later, kept| {
            later.start == kept.start && self.terms[later.term].sdg == self.terms[kept.term].sdg
        });
        raw.into_iter()
            .map(|m| {
                let term = &self.terms[m.term];
                KeywordMatch {
                    sdg: term.sdg,
                    term_id: term.term_id.clone(),
                    start_token: m.start,
                    end_token: m.end,
                }
            })
            .collect()
    }
}

/// All ontology matches in `text`, sorted by `(start_token, sdg)`.
pub fn match_keywords(text: &str, ontology: &Ontology) -> Vec<KeywordMatch> {
    let tokens: Vec<String> = tokenize(text).into_iter().map(|t| t.text).collect();
    ontology.match_tokens(&tokens)
}

/// Goals with at least `min_hits` matches. A `min_hits` of 0 is treated as 1.
pub fn evidence_sdgs(matches: &[KeywordMatch], min_hits: usize) -> BTreeSet<SdgId> {
    let mut counts: BTreeMap<SdgId, usize> = BTreeMap::new();
    for m in matches {
        *counts.entry(m.sdg).or_default() += 1;
    }
    let min_hits = min_hits.max(1);
    counts
        .into_iter()
        .filter(|&(_, n)| n >= min_hits)
        .map(|(s, _)| s)
        .collect()
}

#[derive(Debug, Clone, Copy)]
struct RawMatch {
    term: usize,
    start: usize,
    end: usize,
}

#[derive(Debug, Clone, Default)]
struct State {
    next: BTreeMap<u32, u32>,
    fail: u32,
    /// Terms recognized on entering this state, including those inherited
    /// through the failure chain.
    out: Vec<u32>,
}

#[derive(Debug, Clone)]
struct TokenAutomaton {
    symbols: BTreeMap<String, u32>,
    states: Vec<State>,
    lengths: Vec<usize>,
}

const ROOT: u32 = 0;

impl TokenAutomaton {
    fn build(terms: &[OntologyTerm]) -> Self {
        let mut symbols: BTreeMap<String, u32> = BTreeMap::new();
        let mut states = alloc::vec![State::default()];
        for (id, term) in terms.iter().enumerate() {
            let mut s = ROOT;
            for tok in &term.phrase {
                let next_sym = symbols.len() as u32;
                let sym = *symbols.entry(tok.clone()).or_insert(next_sym);
                s = match states[s as usize].next.get(&sym) {
                    Some(&t) => t,
                    None => {
                        let t = states.len() as u32;
                        states.push(State::default());
                        states[s as usize].next.insert(sym, t);
                        t
                    }
                };
            }
            states[s as usize].out.push(id as u32);
        }

        // Breadth-first failure links; a state's failure target is always
        // shallower, so its output set is final when we inherit it.
        let mut queue: VecDeque<u32> = states[ROOT as usize].next.values().copied().collect();
        while let Some(s) = queue.pop_front() {
            let edges: Vec<(u32, u32)> = states[s as usize].next.iter().map(|(&a, &b)| (a, b)).collect();
            for (sym, child) in edges {
                let mut f = states[s as usize].fail;
                let target = loop {
                    if let Some(&t) = states[f as usize].next.get(&sym) {
                        break t;
                    }
                    if f == ROOT {
                        break ROOT;
                    }
                    f = states[f as usize].fail;
                };
                states[child as usize].fail = target;
                let inherited = states[target as usize].out.clone();
                states[child as usize].out.extend(inherited);
                queue.push_back(child);
            }
        }

        TokenAutomaton {
            symbols,
            states,
            lengths: terms.iter().map(|t| t.phrase.len()).collect(),
        }
    }

    fn find_all<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<RawMatch> {
        let mut found = Vec::new();
        let mut s = ROOT;
        for (i, tok) in tokens.iter().enumerate() {
            let Some(&sym) = self.symbols.get(tok.as_ref()) else {
                s = ROOT;
                continue;
            };
            s = loop {
                if let Some(&t) = self.states[s as usize].next.get(&sym) {
                    break t;
                }
                if s == ROOT {
                    break ROOT;
                }
                s = self.states[s as usize].fail;
            };
            for &term in &self.states[s as usize].out {
                let len = self.lengths[term as usize];
                found.push(RawMatch {
                    term: term as usize,
                    start: i + 1 - len,
                    end: i + 1,
                });
            }
        }
        found
    }
}
