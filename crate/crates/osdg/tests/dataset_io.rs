mod common;

use osdg::corpus_io::{self, read_community_dataset, write_rows, CorpusIoError, Strictness};
use osdg_core::{compute_agreement, LabeledSnippet, SdgId};
use proptest::prelude::*;

fn row() -> impl Strategy<Value = LabeledSnippet> {
    (
        "[a-z0-9]{1,8}",
        "[A-Za-z][A-Za-z ,.;\"'\t\n-]{0,60}",
        1i64..=17,
        0u32..10,
        0u32..10,
        prop::option::of("10\\.[0-9]{4}/[a-z]{1,6}"),
    )
        .prop_filter("needs a vote", |(_, _, _, a, r, _)| a + r > 0)
        .prop_map(|(id, text, sdg, a, r, doi)| {
            let mut s = LabeledSnippet::with_votes(id, text, SdgId::new(sdg).unwrap(), a, r);
            s.source_ref = doi;
            s
        })
}

proptest! {
    #[test]
    fn write_then_read_is_lossless(rows in prop::collection::vec(row(), 0..20)) {
        let mut rows = rows;
        rows.sort_by(|a, b| (&a.text_id, a.sdg).cmp(&(&b.text_id, b.sdg)));
        rows.dedup_by(|a, b| a.text_id == b.text_id && a.sdg == b.sdg);
        let mut buf = Vec::new();
        write_rows(&mut buf, &rows).unwrap();
        let report = read_community_dataset(buf.as_slice(), Strictness::Strict).unwrap();
        prop_assert!(report.dropped.is_empty());
        prop_assert_eq!(report.corpus.snippets(), rows.as_slice());
        for r in report.corpus.iter() {
            prop_assert_eq!(r.agreement, compute_agreement(r.labels_positive, r.labels_negative).unwrap());
        }
    }
}

#[test]
fn tab_separated_release_layout() {
    let text = "doi\ttext_id\ttext\tsdg\tlabels_negative\tlabels_positive\tagreement\n\
                10.1/x\tabc\tClean water, for all.\t6\t1\t3\t0.5\n\
                10.1/y\tabd\tStock markets.\t8\t0\t4\t1.0\n";
    let report = read_community_dataset(text.as_bytes(), Strictness::Strict).unwrap();
    assert_eq!(report.corpus.len(), 2);
    assert_eq!(report.corpus.snippets()[0].text, "Clean water, for all.");
}

#[test]
fn strict_and_lenient_modes() {
    let text = "doi,text_id,text,sdg,labels_negative,labels_positive,agreement\n\
                x,1,Fine row,3,0,3,1.0\n\
                x,2,Wrong agreement,3,1,3,0.9\n\
                x,3,Bad goal,18,0,3,1.0\n";
    match read_community_dataset(text.as_bytes(), Strictness::Strict) {
        Err(CorpusIoError::Violation { line, .. }) => assert_eq!(line, 3),
        other => panic!("{other:?}"),
    }
    // Lenient mode keeps the stored agreement and only drops unparseable rows.
    let report = read_community_dataset(text.as_bytes(), Strictness::Lenient).unwrap();
    assert_eq!(report.corpus.len(), 2);
    assert_eq!(report.corpus.snippets()[1].agreement, 0.9);
    assert_eq!(report.dropped.len(), 1);
    assert_eq!(report.dropped[0].0, 4);
}

#[test]
fn bundled_sample_loads_strictly() {
    let report = corpus_io::load_community_dataset(common::data("sample_corpus.tsv"), Strictness::Strict).unwrap();
    assert!(report.dropped.is_empty());
    assert_eq!(report.corpus.len(), 16 * 90 + 12);
    assert_eq!(report.corpus.rows_for(SdgId::new(17).unwrap()).count(), 12);
}
