use std::path::Path;

use cesig::sigpca::{read_csv, write_csv, FrameClass};
use cesig::timebound::{samples_from_csv, samples_to_csv, Label};

fn data(name: &str) -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("data")
        .join(name)
}

#[test]
fn signature_corpus_round_trips() {
    let text = std::fs::read_to_string(data("sig_sample.csv")).unwrap();
    let records = read_csv(text.as_bytes()).unwrap();
    assert_eq!(records.len(), 120);
    assert_eq!(
        records
            .iter()
            .filter(|r| r.frame_class == Some(FrameClass::Ce))
            .count(),
        60
    );
    let again = read_csv(write_csv(&records).as_bytes()).unwrap();
    assert_eq!(records, again);
}

#[test]
fn timing_samples_round_trip() {
    let text = std::fs::read_to_string(data("timing_sample.csv")).unwrap();
    let samples = samples_from_csv(text.as_bytes()).unwrap();
    assert_eq!(samples.len(), 160);
    assert_eq!(
        samples.iter().filter(|s| s.label == Label::Relayed).count(),
        80
    );
    assert_eq!(samples_to_csv(&samples), text);
}
