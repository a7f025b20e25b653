//! Regenerates `data/sample_corpus.tsv`, a small synthetic corpus in the
//! community dataset layout used by tests and the quick-start.
//!
//! ```text
//! cargo run -p osdg --example gen_sample_corpus > crates/osdg/data/sample_corpus.tsv
//! ```

use osdg::ontology_io::seed_ontology;
use osdg::targets::sdg_targets;
use osdg_core::community::VOTE_CAP;
use osdg_core::{compute_agreement, LabeledSnippet, SdgId};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const POSITIVE_PER_SDG: usize = 70;
const NEGATIVE_PER_SDG: usize = 20;
const SDG17_ROWS: usize = 12;

const TEMPLATES: &[&str] = &[
    "This paper examines {a} in {place}.",
    "We analyse how {a} changed in {place} between 2000 and 2019.",
    "Survey data from {place} show that {a} is closely linked to {b}.",
    "The programme in {place} targeted {a} and {b}.",
    "Policy makers in {place} have prioritised {a}.",
    "Our results suggest that investment in {a} reduces pressure on {b}.",
    "Interviews with local officials highlight gaps in {a}.",
    "A panel of households in {place} was followed to measure {a}.",
    "The report reviews national strategies on {a} and {b}.",
    "Evidence on {a} remains scarce for {place}.",
];

const FILLER: &[&str] = &[
    "The analysis uses a mixed-methods design.",
    "Data were collected through structured questionnaires.",
    "Limitations of the study are discussed.",
    "The findings are robust to alternative specifications.",
    "Implications for future research are outlined.",
    "We draw on administrative records and field observations.",
    "Results are compared with earlier studies.",
    "The sample covers both rural and urban districts.",
];

const PLACES: &[&str] = &[
    "Kenya", "Bangladesh", "Peru", "Viet Nam", "Ghana", "Indonesia", "Colombia", "Nepal", "Morocco", "the Philippines",
    "Ethiopia", "Brazil", "India", "Uganda", "Mexico",
];

fn sentence(rng: &mut ChaCha8Rng, sdg: SdgId, terms: &[Vec<String>], targets: &[Vec<String>]) -> String {
    let own = &terms[usize::from(u8::from(sdg)) - 1];
    let roll: f64 = rng.gen();
    if roll < 0.3 || own.is_empty() {
        let t = targets[usize::from(u8::from(sdg)) - 1].choose(rng).unwrap();
        format!("{}.", t.trim_end_matches('.'))
    } else if roll < 0.85 {
        let template = TEMPLATES.choose(rng).unwrap();
        template
            .replace("{a}", own.choose(rng).unwrap())
            .replace("{b}", own.choose(rng).unwrap())
            .replace("{place}", PLACES.choose(rng).unwrap())
    } else {
        FILLER.choose(rng).unwrap().to_string()
    }
}

fn snippet(rng: &mut ChaCha8Rng, sdg: SdgId, terms: &[Vec<String>], targets: &[Vec<String>]) -> String {
    let n = rng.gen_range(3..=5);
    let mut out: Vec<String> = (0..n).map(|_| sentence(rng, sdg, terms, targets)).collect();
    // Texts often touch a second goal.
    if rng.gen_bool(0.25) {
        let other = SdgId::new(rng.gen_range(1..=16)).unwrap();
        out.insert(rng.gen_range(0..=out.len()), sentence(rng, other, terms, targets));
    }
    let mut s = out.join(" ");
    if let Some(first) = s.get_mut(0..1) {
        first.make_ascii_uppercase();
    }
    s
}

fn votes(rng: &mut ChaCha8Rng, positive: bool) -> (u32, u32) {
    let total = rng.gen_range(3..=VOTE_CAP);
    // A fifth of the rows are contested.
    let majority = if rng.gen_bool(0.2) {
        total.div_ceil(2)
    } else {
        total - rng.gen_range(0..=total / 5)
    };
    if positive {
        (majority, total - majority)
    } else {
        (total - majority, majority)
    }
}

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(2022);
    let ontology = seed_ontology();
    let terms: Vec<Vec<String>> = SdgId::all()
        .map(|s| ontology.terms_for(s).map(|t| t.phrase.join(" ")).collect())
        .collect();
    let targets: Vec<Vec<String>> = sdg_targets()
        .goals
        .iter()
        .map(|g| g.targets.iter().map(|t| t.text.clone()).collect())
        .collect();

    let mut rows = Vec::new();
    let mut next_id = 0u32;
    let mut push = |rows: &mut Vec<LabeledSnippet>, text: String, sdg: SdgId, (a, r): (u32, u32)| {
        next_id += 1;
        let mut row = LabeledSnippet::with_votes(format!("t{next_id:05}"), text, sdg, a, r);
        row.source_ref = Some(format!("10.5555/sample.{next_id}"));
        rows.push(row);
    };
    for sdg in SdgId::trainable() {
        for _ in 0..POSITIVE_PER_SDG {
            let text = snippet(&mut rng, sdg, &terms, &targets);
            let v = votes(&mut rng, true);
            push(&mut rows, text, sdg, v);
        }
        for _ in 0..NEGATIVE_PER_SDG {
            let source = loop {
                let s = SdgId::new(rng.gen_range(1..=16)).unwrap();
                if s != sdg {
                    break s;
                }
            };
            let text = snippet(&mut rng, source, &terms, &targets);
            let v = votes(&mut rng, false);
            push(&mut rows, text, sdg, v);
        }
    }
    let sdg17 = SdgId::new(17).unwrap();
    for _ in 0..SDG17_ROWS {
        let text = snippet(&mut rng, sdg17, &terms, &targets);
        let v = votes(&mut rng, true);
        push(&mut rows, text, sdg17, v);
    }
    rows.shuffle(&mut rng);

    println!("doi\ttext_id\ttext\tsdg\tlabels_negative\tlabels_positive\tagreement");
    for r in rows {
        let agreement = compute_agreement(r.labels_positive, r.labels_negative).unwrap();
        println!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{:?}",
            r.source_ref.as_deref().unwrap_or(""), r.text_id, r.text, r.sdg, r.labels_negative, r.labels_positive, agreement
        );
    }
}
