use tablereader_core::ctc::{ctc_neg_log_prob, LabelSequence};
use tablereader_core::decode::{best_word, DecodeParams, Dictionary};
use tablereader_core::net::AlphabetSpec;
use tablereader_core::preproc::{segment_field, FieldPolygon, PixelBox, SegmentParams};
use tablereader_core::train::{self, Checkpoint, Sample, Sequential, TrainConfig};
use tablereader_core::{FieldType, Network, NetworkSpec, Raster};

/// White page with a single ruled cell and a dark blob inside it.
fn ruled_page() -> Raster {
    let mut page = Raster::filled(200, 120, 250);
    for x in 20..180 {
        for y in [30, 31, 90, 91] {
            page.set(x, y, 10);
        }
    }
    for y in 30..92 {
        for x in [20, 21, 178, 179] {
            page.set(x, y, 10);
        }
    }
    for y in 50..70 {
        for x in 60..90 {
            page.set(x, y, 90);
        }
    }
    page
}

#[test]
fn page_to_word() {
    let page = ruled_page();
    let poly = FieldPolygon::rectangle(PixelBox { left: 26, top: 35, right: 172, bottom: 86 }, FieldType::Age);
    let (cell, lines) = segment_field(&page, &poly, &SegmentParams::for_field(FieldType::Age)).unwrap();
    // either pixel of a 2-px rule is acceptable
    for (got, rule) in [(lines.left, 20), (lines.right, 178), (lines.top, 30), (lines.bottom, 90)] {
        assert!((rule..=rule + 1).contains(&got), "{lines:?}");
    }
    assert_eq!(cell.height(), 128);

    let spec = NetworkSpec::desk("age", AlphabetSpec::Field(FieldType::Age), 2, [4, 6, 6, 6], 3);
    let net = Network::new(spec).unwrap();
    let small = tablereader_core::preproc::normalize_height(&cell, 16).unwrap();
    let m = net.forward(&small).unwrap();
    assert_eq!(m.classes(), 25);
    let dict = Dictionary::from_words(["42", "7", "65"], net.alphabet()).unwrap();
    let best = best_word(&m, &dict, DecodeParams::new(0.75, 0.25)).unwrap().unwrap();
    assert!(["42", "7", "65"].contains(&best.word.as_str()));
    let labels = LabelSequence::encode(&best.word, net.alphabet()).unwrap();
    assert!(ctc_neg_log_prob(&m, &labels).is_finite());
}

#[test]
fn training_resumes_where_it_stopped() {
    let spec = NetworkSpec::desk("toy", AlphabetSpec::Symbols(vec!["a".into(), "b".into()]), 2, [3, 4, 4, 4], 1);
    let alphabet = spec.alphabet().unwrap();
    let mut raster = Raster::filled(24, 16, 255);
    for x in 4..8 {
        for y in 4..12 {
            raster.set(x, y, 0);
        }
    }
    let samples: Vec<Sample> = ["a", "ab", "b"]
        .iter()
        .map(|w| Sample { raster: raster.clone(), labels: LabelSequence::encode(w, &alphabet).unwrap() })
        .collect();
    let full = TrainConfig { main_epochs: 2, post_epochs: 1, samples_per_epoch: 3, batch_size: 2, ..TrainConfig::default() };
    let straight = train::train(&full, &spec, &samples, &samples[..1], &Sequential, |_| Ok(())).map_err(|f| f.error).unwrap();

    let partial = TrainConfig { main_epochs: 1, post_epochs: 0, ..full.clone() };
    let first = train::train(&partial, &spec, &samples, &samples[..1], &Sequential, |_| Ok(())).map_err(|f| f.error).unwrap();
    let reloaded = Checkpoint::decode(&first.encode()).unwrap();
    let resumed = train::train_from(&full, reloaded, &samples, &samples[..1], &Sequential, |_| Ok(())).map_err(|f| f.error).unwrap();
    assert_eq!(resumed.encode(), straight.encode());
    assert_eq!(resumed.history.len(), 3);
}
