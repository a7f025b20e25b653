//! Labeled snippets, corpus indexing, curation filters and the stratified split.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agreement::compute_agreement;
use crate::sdg::SdgId;

/// Largest tolerated difference between a stored and a recomputed agreement.
pub const AGREEMENT_TOLERANCE: f64 = 1e-9;

/// One row of the community dataset: a text, its candidate goal and the votes
/// it received.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledSnippet {
    pub text_id: String,
    pub source_ref: Option<String>,
    pub text: String,
    pub sdg: SdgId,
    pub labels_positive: u32,
    pub labels_negative: u32,
    pub agreement: f64,
}

/// A row-level invariant violation.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum RowViolation {
    #[error("text is empty")]
    EmptyText,
    #[error("row has no votes")]
    NoVotes,
    #[error("stored agreement {stored} does not match recomputed {recomputed}")]
    AgreementMismatch { stored: f64, recomputed: f64 },
}

impl LabeledSnippet {
    /// Builds a row whose agreement is computed from the vote counts.
    pub fn with_votes(
        text_id: impl Into<String>,
        text: impl Into<String>,
        sdg: SdgId,
        labels_positive: u32,
        labels_negative: u32,
    ) -> Self {
        LabeledSnippet {
            text_id: text_id.into(),
            source_ref: None,
            text: text.into(),
            sdg,
            labels_positive,
            labels_negative,
            agreement: compute_agreement(labels_positive, labels_negative).unwrap_or(0.0),
        }
    }

    pub fn total_votes(&self) -> u32 {
        self.labels_positive + self.labels_negative
    }

    pub fn has_positive_majority(&self) -> bool {
        self.labels_positive > self.labels_negative
    }

    pub fn has_negative_majority(&self) -> bool {
        self.labels_negative > self.labels_positive
    }

    /// Checks the row invariants. With `check_agreement` the stored score is
    /// compared with the value recomputed from the counts.
    pub fn validate(&self, check_agreement: bool) -> Result<(), RowViolation> {
        if self.text.trim().is_empty() {
            return Err(RowViolation::EmptyText);
        }
        let recomputed = compute_agreement(self.labels_positive, self.labels_negative)
            .map_err(|_| RowViolation::NoVotes)?;
        if check_agreement && ((self.agreement - recomputed).abs() > AGREEMENT_TOLERANCE || self.agreement.is_nan()) {
            return Err(RowViolation::AgreementMismatch {
                stored: self.agreement,
                recomputed,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CorpusError {
    #[error("row ({text_id}, SDG {sdg}) appears more than once")]
    DuplicateRow { text_id: String, sdg: SdgId },
    #[error("SDG {sdg} has {rows} row(s); at least 2 are needed to stratify")]
    TooSmallToStratify { sdg: SdgId, rows: usize },
    #[error("test fraction {0} must lie strictly between 0 and 1")]
    InvalidFraction(f64),
}

/// An immutable, indexed collection of snippets.
///
/// A `text_id` may occur more than once only with different candidate goals;
/// such ids are reported by [`Corpus::shared_text_ids`].
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Corpus {
    snippets: Vec<LabeledSnippet>,
    by_sdg: BTreeMap<SdgId, Vec<usize>>,
    shared_text_ids: Vec<String>,
}

impl Corpus {
    pub fn new(snippets: Vec<LabeledSnippet>) -> Result<Self, CorpusError> {
        let mut keys: BTreeMap<&str, BTreeSet<SdgId>> = BTreeMap::new();
        let mut by_sdg: BTreeMap<SdgId, Vec<usize>> = BTreeMap::new();
        for (row, s) in snippets.iter().enumerate() {
            if !keys.entry(s.text_id.as_str()).or_default().insert(s.sdg) {
                return Err(CorpusError::DuplicateRow {
                    text_id: s.text_id.clone(),
                    sdg: s.sdg,
                });
            }
            by_sdg.entry(s.sdg).or_default().push(row);
        }
        let shared_text_ids = keys
            .into_iter()
            .filter(|(_, sdgs)| sdgs.len() > 1)
            .map(|(id, _)| String::from(id))
            .collect();
        Ok(Corpus {
            snippets,
            by_sdg,
            shared_text_ids,
        })
    }

    pub fn len(&self) -> usize {
        self.snippets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.snippets.is_empty()
    }

    pub fn snippets(&self) -> &[LabeledSnippet] {
        &self.snippets
    }

    pub fn iter(&self) -> core::slice::Iter<'_, LabeledSnippet> {
        self.snippets.iter()
    }

    pub fn into_snippets(self) -> Vec<LabeledSnippet> {
        self.snippets
    }

    /// Row indices per candidate goal, in row order.
    pub fn by_sdg(&self) -> &BTreeMap<SdgId, Vec<usize>> {
        &self.by_sdg
    }

    pub fn rows_for(&self, sdg: SdgId) -> impl Iterator<Item = &LabeledSnippet> {
        self.by_sdg
            .get(&sdg)
            .into_iter()
            .flatten()
            .map(move |&i| &self.snippets[i])
    }

    /// Text ids that appear under more than one candidate goal.
    pub fn shared_text_ids(&self) -> &[String] {
        &self.shared_text_ids
    }

    fn retain(&self, mut keep: impl FnMut(&LabeledSnippet) -> bool) -> Corpus {
        let rows = self.snippets.iter().filter(|s| keep(s)).cloned().collect();
        // A subset of a valid corpus cannot introduce duplicates.
        Corpus::new(rows).expect("subset of a valid corpus")
    }

    /// Keeps rows with `agreement >= min_agreement` and, if requested, more
    /// accepts than rejects. Row order is preserved.
    pub fn filter_high_agreement(&self, min_agreement: f64, require_positive_majority: bool) -> Corpus {
        self.retain(|s| {
            s.agreement >= min_agreement && (!require_positive_majority || s.has_positive_majority())
        })
    }

    /// Drops rows whose goal is excluded from training (SDG 17).
    pub fn without_excluded(&self) -> Corpus {
        self.retain(|s| !s.sdg.excluded_from_training())
    }

    /// Deterministic split stratified by candidate goal.
    ///
    /// Each goal contributes `round(n * test_fraction)` rows to the test side,
    /// clamped so that both sides keep at least one row. Both halves preserve
    /// the input row order.
    pub fn split(&self, test_fraction: f64, seed: u64) -> Result<(Corpus, Corpus), CorpusError> {
        if !(test_fraction > 0.0 && test_fraction < 1.0) {
            return Err(CorpusError::InvalidFraction(test_fraction));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut in_test = alloc::vec![false; self.snippets.len()];
        for (&sdg, rows) in &self.by_sdg {
            let n = rows.len();
            if n < 2 {
                return Err(CorpusError::TooSmallToStratify { sdg, rows: n });
            }
            let n_test = (crate::math::round(n as f64 * test_fraction) as usize).clamp(1, n - 1);
            let mut shuffled = rows.clone();
            shuffled.shuffle(&mut rng);
            for &row in &shuffled[..n_test] {
                in_test[row] = true;
            }
        }
        let (mut train, mut test) = (Vec::new(), Vec::new());
        for (s, &t) in self.snippets.iter().zip(&in_test) {
            if t {
                test.push(s.clone());
            } else {
                train.push(s.clone());
            }
        }
        Ok((Corpus::new(train)?, Corpus::new(test)?))
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

    fn row(id: &str, goal: i64, p: u32, n: u32) -> LabeledSnippet {
        LabeledSnippet::with_votes(id, format!("text {id}"), sdg(goal), p, n)
    }

    #[test]
    fn strict_validation_recomputes_agreement() {
        let mut r = row("a", 1, 5, 2);
        r.agreement = 0.9;
        match r.validate(true) {
            Err(RowViolation::AgreementMismatch { recomputed, .. }) => {
                assert_eq!(recomputed, 3.0 / 7.0)
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(r.validate(false).is_ok());
        assert_eq!(row("b", 1, 0, 0).validate(false), Err(RowViolation::NoVotes));
        let mut blank = row("c", 1, 1, 0);
        blank.text = "  \n".into();
        assert_eq!(blank.validate(true), Err(RowViolation::EmptyText));
    }

    #[test]
    fn duplicate_key_rejected_but_shared_id_flagged() {
        let err = Corpus::new(vec![row("a", 1, 3, 0), row("a", 1, 3, 0)]).unwrap_err();
        assert!(matches!(err, CorpusError::DuplicateRow { .. }));
        let c = Corpus::new(vec![row("a", 1, 3, 0), row("a", 2, 3, 0)]).unwrap();
        assert_eq!(c.shared_text_ids(), &[String::from("a")]);
    }

    #[test]
    fn index_partitions_rows() {
        let c = Corpus::new(vec![row("a", 1, 3, 0), row("b", 2, 3, 0), row("c", 1, 0, 3)]).unwrap();
        let mut all: Vec<usize> = c.by_sdg().values().flatten().copied().collect();
        all.sort_unstable();
        assert_eq!(all, vec![0, 1, 2]);
        assert_eq!(c.rows_for(sdg(1)).count(), 2);
    }

    #[test]
    fn filter_examples() {
        let c = Corpus::new(vec![row("a", 1, 9, 0), row("b", 1, 3, 3), row("c", 1, 0, 9)]).unwrap();
        assert_eq!(c.filter_high_agreement(0.0, false), c);
        let strict = c.filter_high_agreement(1.0, true);
        assert_eq!(strict.len(), 1);
        assert_eq!(strict.snippets()[0].text_id, "a");
    }

    #[test]
    fn split_is_stratified_and_deterministic() {
        let mut rows = Vec::new();
        for goal in 1..=16 {
            for i in 0..100 {
                rows.push(row(&format!("{goal}-{i}"), goal, 3, 0));
            }
        }
        let c = Corpus::new(rows).unwrap();
        let (train, test) = c.split(0.2, 42).unwrap();
        for goal in SdgId::trainable() {
            assert_eq!(test.rows_for(goal).count(), 20);
            assert_eq!(train.rows_for(goal).count(), 80);
        }
        assert_eq!(c.split(0.2, 42).unwrap(), (train.clone(), test.clone()));
        assert_ne!(c.split(0.2, 7).unwrap().1, test);
    }

    #[test]
    fn split_errors() {
        let c = Corpus::new(vec![row("a", 1, 3, 0), row("b", 1, 3, 0), row("c", 2, 3, 0)]).unwrap();
        assert_eq!(
            c.split(0.2, 1).unwrap_err(),
            CorpusError::TooSmallToStratify { sdg: sdg(2), rows: 1 }
        );
        assert!(matches!(c.split(0.0, 1), Err(CorpusError::InvalidFraction(_))));
        assert!(matches!(c.split(1.0, 1), Err(CorpusError::InvalidFraction(_))));
    }

    proptest::proptest! {
        #[test]
        fn split_is_an_exact_partition(
            sizes in proptest::collection::vec(2usize..40, 1..6),
            frac in 0.05f64..0.95,
            seed in proptest::prelude::any::<u64>(),
        ) {
            let mut rows = Vec::new();
            for (g, &n) in sizes.iter().enumerate() {
                for i in 0..n {
                    rows.push(row(&format!("{g}-{i}"), g as i64 + 1, 2, 1));
                }
            }
            let c = Corpus::new(rows).unwrap();
            let (train, test) = c.split(frac, seed).unwrap();
            proptest::prop_assert_eq!(train.len() + test.len(), c.len());
            let train_ids: BTreeSet<_> = train.iter().map(|s| s.text_id.clone()).collect();
            proptest::prop_assert!(test.iter().all(|s| !train_ids.contains(&s.text_id)));
            for (g, &n) in sizes.iter().enumerate() {
                let got = test.rows_for(sdg(g as i64 + 1)).count() as f64;
                proptest::prop_assert!((got - n as f64 * frac).abs() <= 1.0);
            }
        }

        #[test]
        fn filter_is_monotone(
            votes in proptest::collection::vec((0u32..10, 0u32..10), 1..40),
            a1 in 0.0f64..1.0,
            a2 in 0.0f64..1.0,
            majority in proptest::prelude::any::<bool>(),
        ) {
            let rows: Vec<_> = votes
                .iter()
                .enumerate()
                .filter(|(_, (p, n))| p + n > 0)
                .map(|(i, &(p, n))| row(&format!("{i}"), 1, p, n))
                .collect();
            let c = Corpus::new(rows).unwrap();
            let (lo, hi) = if a1 <= a2 { (a1, a2) } else { (a2, a1) };
            let loose: BTreeSet<_> = c.filter_high_agreement(lo, majority).iter().map(|s| s.text_id.clone()).collect();
            for s in c.filter_high_agreement(hi, majority).iter() {
                proptest::prop_assert!(loose.contains(&s.text_id));
            }
        }
    }
}
