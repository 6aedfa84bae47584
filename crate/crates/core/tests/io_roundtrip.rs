use detkit::io::*;
use detkit::*;
use proptest::prelude::*;

/// Random corpus; `quantum` > 0 snaps coordinates to multiples of it.
fn corpus(quantum: f64) -> impl Strategy<Value = Corpus> {
    let snap = move |v: f64| {
        if quantum > 0.0 {
            (v / quantum).floor() * quantum
        } else {
            v
        }
    };
    let image = (1..40u64, 50..400u32, 50..400u32);
    prop::collection::vec(image, 1..6)
        .prop_flat_map(move |imgs| {
            let mut imgs = imgs;
            imgs.sort_by_key(|i| i.0);
            imgs.dedup_by_key(|i| i.0);
            let n = imgs.len();
            let boxes = prop::collection::vec(
                (0..n, 0.0..0.85f64, 0.0..0.85f64, 0.01..0.1f64, 0.01..0.1f64, 1..4u64),
                0..12,
            );
            (Just(imgs), boxes)
        })
        .prop_map(move |(imgs, boxes)| {
            let images: Vec<ImageInfo> = imgs
                .iter()
                .map(|&(id, width, height)| ImageInfo { id, width, height })
                .collect();
            let gts = boxes
                .into_iter()
                .map(|(i, fx, fy, fw, fh, label)| {
                    let im = images[i];
                    let (w, h) = (im.width as f64, im.height as f64);
                    let x1 = snap(fx * w);
                    let y1 = snap(fy * h);
                    let x2 = snap(x1 + fw * w + 1.0);
                    let y2 = snap(y1 + fh * h + 1.0);
                    GroundTruth {
                        bbox: BBox::new(x1, y1, x2, y2).unwrap(),
                        label,
                        image_id: im.id,
                    }
                })
                .collect();
            let cats = (1..4u64)
                .map(|id| Category {
                    id,
                    name: id.to_string(),
                })
                .collect();
            Corpus::new(images, gts, cats, LoadOptions::default()).unwrap()
        })
}

fn detections() -> impl Strategy<Value = Vec<Detection64>> {
    prop::collection::vec(
        (
            0..1000u64,
            -50.0..500.0f64,
            -50.0..500.0f64,
            0.001..300.0f64,
            0.001..300.0f64,
            0.0..=1.0f64,
            0..9u64,
        ),
        0..30,
    )
    .prop_map(|v| {
        v.into_iter()
            .map(|(img, x, y, w, h, s, l)| Detection::new(BBox::new(x, y, x + w, y + h).unwrap(), s, l, img).unwrap())
            .collect()
    })
}

proptest! {
    #[test]
    fn csv_corpus_round_trip(c in corpus(0.0)) {
        let bytes = corpus_to_bytes(&c, CorpusFormat::Csv).unwrap();
        let back = read_corpus_csv(bytes.as_slice(), LoadOptions::default()).unwrap();
        prop_assert_eq!(back.images(), c.images());
        prop_assert_eq!(back.ground_truths(), c.ground_truths());
    }

    #[test]
    fn coco_corpus_round_trip(c in corpus(0.25)) {
        let text = corpus_to_coco_string(&c).unwrap();
        let back = corpus_from_coco_str(&text, LoadOptions::default()).unwrap();
        prop_assert_eq!(back, c);
    }

    #[test]
    fn predictions_round_trip(d in detections()) {
        let mut buf = Vec::new();
        write_predictions(&d, &mut buf).unwrap();
        prop_assert_eq!(read_predictions(buf.as_slice()).unwrap(), d);
    }
}

#[test]
fn files_round_trip_through_disk() {
    let dir = tempfile::tempdir().unwrap();
    let synth = synthesize(&SyntheticSpec::small_polyp(20, 4)).unwrap();
    for (name, fmt) in [("c.json", CorpusFormat::CocoJson), ("c.csv", CorpusFormat::Csv)] {
        let path = dir.path().join(name);
        save_corpus(&synth.corpus, &path, fmt).unwrap();
        assert_eq!(CorpusFormat::from_path(&path), fmt);
        let back = load_corpus(&path, fmt, LoadOptions::default()).unwrap();
        assert_eq!(back.images(), synth.corpus.images());
        assert_eq!(back.ground_truths().len(), synth.corpus.ground_truths().len());
    }
    let preds: Vec<_> = synth
        .corpus
        .ground_truths()
        .iter()
        .map(|g| Detection::new(g.bbox, 0.75, g.label, g.image_id).unwrap())
        .collect();
    let path = dir.path().join("p.csv");
    save_predictions(&preds, &path).unwrap();
    assert_eq!(load_predictions(&path).unwrap(), preds);
}

#[test]
fn coco_bbox_converts_to_corners() {
    let text = r#"{"images":[{"id":1,"width":100,"height":100}],
        "annotations":[{"id":1,"image_id":1,"category_id":1,"bbox":[10,20,30,40]}],
        "categories":[{"id":1,"name":"polyp"}]}"#;
    let c = corpus_from_coco_str(text, LoadOptions::default()).unwrap();
    assert_eq!(c.ground_truths()[0].bbox, BBox::new(10.0, 20.0, 40.0, 60.0).unwrap());
}

#[test]
fn missing_file_names_path() {
    let err = load_predictions(std::path::Path::new("/nonexistent/preds.csv")).unwrap_err();
    assert!(err.to_string().contains("/nonexistent/preds.csv"));
}
