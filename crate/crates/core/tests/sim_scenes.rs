mod common;

use common::rng;
use mstcn_core::io::{read_labels, read_manifest, read_wav, write_labels, write_wav, WavFile};
use mstcn_core::model::Category;
use mstcn_core::sim::*;
use rand::Rng;

fn corpus() -> Corpora {
    SyntheticCorpus {
        clips_per_kind: 2,
        seconds: 3.5,
        seed: 5,
        ..Default::default()
    }
    .generate()
}

fn db_ratio(a: &[f64], b: &[f64]) -> f64 {
    db(power(a) / power(b))
}

fn classroom_scene(t60: f64, assistant_x: f64, ratio: f64, snr: f64, seed: u64) -> SceneSpec {
    SceneSpec::new(
        RoomSpec::classroom(t60),
        [2.5, 0.5, 2.0],
        [assistant_x, 1.0, 1.6],
        ratio,
        snr,
        seed,
    )
}

#[test]
fn schroeder_t60_within_twenty_percent() {
    for t60 in [0.4, 0.9] {
        for ax in [0.5, 2.0, 4.5] {
            let scene = classroom_scene(t60, ax, 6.0, 10.0, 0);
            let rir =
                image_source_rir(&scene.room, scene.expert_pos, scene.mic_pos, 16_000).unwrap();
            let est = schroeder_t60(&rir, 16_000).unwrap();
            assert!(
                (est - t60).abs() <= 0.2 * t60,
                "t60 {t60}, x {ax}: estimated {est}"
            );

            // The assistant is 1 cm from the microphone; its decay is read
            // after the direct sound.
            let near =
                image_source_rir(&scene.room, scene.assistant_pos, scene.mic_pos, 16_000).unwrap();
            let delay = MIC_DROP * 16_000.0 / scene.room.sound_speed;
            let est = schroeder_t60_reverberant(&near, 16_000, delay).unwrap();
            assert!(
                (est - t60).abs() <= 0.2 * t60,
                "near t60 {t60}, x {ax}: estimated {est}"
            );
        }
    }
}

#[test]
fn rir_length_is_exact() {
    for (t60, sr, want) in [
        (0.45, 16_000, 7200),
        (0.23456, 16_000, 3753),
        (0.4, 8000, 3200),
        (0.3001, 16_000, 4802),
    ] {
        let rir = image_source_rir(
            &RoomSpec::classroom(t60),
            [1.0, 2.0, 1.0],
            [3.0, 3.0, 1.5],
            sr,
        )
        .unwrap();
        assert_eq!(rir.len(), want, "t60 {t60}");
    }
}

#[test]
fn snr_scaling_hits_target_on_random_signals() {
    let mut r = rng(3);
    for _ in 0..50 {
        let n = r.gen_range(100..2000);
        let a: Vec<f64> = (0..n)
            .map(|_| r.gen_range(-1.0..1.0) * r.gen_range(0.1..3.0))
            .collect();
        let b: Vec<f64> = (0..n).map(|_| r.gen_range(-0.2..0.2)).collect();
        let snr = r.gen_range(-10.0..30.0);
        let scaled = scale_to_snr(&a, &b, snr).unwrap();
        assert!((db_ratio(&a, &scaled) - snr).abs() < 0.1);
    }
    assert!(scale_to_snr(&[0.0; 10], &[1.0; 10], 5.0).is_err());
}

#[test]
fn utterance_category_semantics() {
    let c = corpus();
    let cache = RirCache::new();
    let scene = classroom_scene(0.5, 1.5, 7.0, 9.0, 1);
    let rirs = cache.scene(&scene, 16_000).unwrap();
    let mut r = rng(1);
    let n = 48_000;
    for cat in Category::ALL {
        let u = render_utterance(
            cat,
            &c.expert[0],
            &c.assistant[0],
            &c.noise[0],
            &scene,
            &rirs,
            16_000,
            &mut r,
        )
        .unwrap();
        assert_eq!(u.mix.len(), n);
        assert_eq!(u.expert.is_some(), cat.expert());
        assert_eq!(u.assistant.is_some(), cat.assistant());
        let mut sum = u.noise.clone();
        for part in [&u.expert, &u.assistant].into_iter().flatten() {
            sum.iter_mut().zip(part).for_each(|(s, v)| *s += v);
        }
        assert!(sum.iter().zip(&u.mix).all(|(a, b)| (a - b).abs() < 1e-6));
        // Noise sits snr_db below the (possibly virtual) reverberant expert.
        assert!((db(REFERENCE_POWER / power(&u.noise)) - 9.0).abs() < 0.1);
        if cat == Category::Background {
            assert_eq!(u.mix, u.noise);
        }
    }
}

#[test]
fn measured_levels_match_twenty_random_scenes() {
    let c = corpus();
    let cache = RirCache::new();
    let grid = SceneGrid::classroom();
    let mut r = rng(20);
    for i in 0..20 {
        let scene = grid.sample(&mut r, i);
        let rirs = cache.scene(&scene, 16_000).unwrap();
        let u = render_utterance(
            Category::Mixture,
            &c.expert[1],
            &c.assistant[1],
            &c.noise[1],
            &scene,
            &rirs,
            16_000,
            &mut r,
        )
        .unwrap();
        let (e, a) = (u.expert.unwrap(), u.assistant.unwrap());
        assert!(
            (db_ratio(&a, &e) - scene.power_ratio_db).abs() < 0.1,
            "scene {i} ratio"
        );
        assert!(
            (db_ratio(&e, &u.noise) - scene.snr_db).abs() < 0.1,
            "scene {i} snr"
        );
    }
}

#[test]
fn short_clip_error_names_the_file() {
    let c = corpus();
    let short = Clip::new("corpus/expert/tiny.wav", vec![0.1; 1000]);
    let scene = classroom_scene(0.4, 1.0, 5.0, 10.0, 0);
    let rirs = RirCache::new().scene(&scene, 16_000).unwrap();
    let err = render_utterance(
        Category::Expert,
        &short,
        &c.assistant[0],
        &c.noise[0],
        &scene,
        &rirs,
        16_000,
        &mut rng(0),
    )
    .unwrap_err();
    assert!(err.to_string().contains("corpus/expert/tiny.wav"), "{err}");
}

#[test]
fn samples_tile_twelve_seconds_deterministically() {
    let c = corpus();
    let cache = RirCache::new();
    let scene = classroom_scene(0.6, 3.0, 10.0, 6.0, 77);
    let s = make_sample(&c, &scene, &cache).unwrap();
    assert_eq!(s.audio.len(), 12 * 16_000);
    assert_eq!(s, make_sample(&c, &scene, &cache).unwrap());
    let mut seen: Vec<Category> = s.segments.iter().map(|g| g.category).collect();
    seen.sort();
    assert_eq!(seen, Category::ALL.to_vec());
    let mut edge = 0;
    for g in &s.segments {
        assert_eq!(g.start, edge);
        assert_eq!(g.end - g.start, 48_000);
        edge = g.end;
    }
    assert_eq!(edge, s.audio.len());
    assert!(s.audio.iter().all(|v| v.abs() <= 1.0));

    let other = make_sample(&c, &SceneSpec { seed: 78, ..scene }, &cache).unwrap();
    assert_ne!(s.audio, other.audio);
}

#[test]
fn empty_corpus_is_rejected() {
    let mut c = corpus();
    c.noise.clear();
    let scene = classroom_scene(0.4, 1.0, 5.0, 10.0, 0);
    assert!(make_sample(&c, &scene, &RirCache::new()).is_err());

    let dir = tempfile::tempdir().unwrap();
    corpus().save(dir.path()).unwrap();
    for f in std::fs::read_dir(dir.path().join("assistant")).unwrap() {
        std::fs::remove_file(f.unwrap().path()).unwrap();
    }
    let err = Corpora::load(dir.path()).unwrap_err();
    assert!(err.to_string().contains("empty corpus directory"), "{err}");
}

#[test]
fn corpus_round_trips_through_wav_directories() {
    let dir = tempfile::tempdir().unwrap();
    let c = corpus();
    c.save(dir.path()).unwrap();
    let back = Corpora::load(dir.path()).unwrap();
    assert_eq!(back.sample_rate, 16_000);
    assert_eq!(back.expert.len(), 2);
    for (a, b) in c.noise.iter().zip(&back.noise) {
        assert!(a
            .samples
            .iter()
            .zip(&b.samples)
            .all(|(x, y)| (x - y).abs() <= 0.5 / 32768.0 + 1e-7));
    }
    write_wav(
        dir.path().join("noise/odd.wav"),
        &WavFile::new(8000, vec![0.0; 100]),
    )
    .unwrap();
    assert!(Corpora::load(dir.path())
        .unwrap_err()
        .to_string()
        .contains("sample rate"));
}

#[test]
fn dataset_generation_contract() {
    let c = corpus();
    let grid = SceneGrid::classroom();
    let counts = DatasetCounts::new(8, 2, 2);
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let recs = generate_dataset(&c, &grid, counts, a.path(), 7).unwrap();
    generate_dataset(&c, &grid, counts, b.path(), 7).unwrap();
    assert_eq!(recs.len(), 12);
    let ma = std::fs::read(a.path().join(MANIFEST_FILE)).unwrap();
    assert_eq!(ma, std::fs::read(b.path().join(MANIFEST_FILE)).unwrap());
    assert_eq!(read_manifest(a.path().join(MANIFEST_FILE)).unwrap(), recs);

    let xs = grid.assistant_x.values();
    for r in &recs {
        let wav_a = std::fs::read(a.path().join(&r.wav)).unwrap();
        assert_eq!(wav_a, std::fs::read(b.path().join(&r.wav)).unwrap());
        let wav = read_wav(a.path().join(&r.wav)).unwrap();
        assert_eq!(wav.samples.len(), 12 * 16_000);
        let segs = read_labels(a.path().join(&r.labels)).unwrap();
        assert_eq!(segs.len(), 4);
        assert!(xs.contains(&r.assistant_x));
        assert!(grid.t60.values().contains(&r.t60));
        assert!((3.0..=12.0).contains(&r.power_ratio_db) && (5.0..=15.0).contains(&r.snr_db));
        r.scene().validate().unwrap();
    }
    let wavs = walk(a.path(), "wav");
    let labels = walk(a.path(), "txt");
    assert_eq!((wavs, labels), (12, 12));

    let c2 = generate_dataset(&c, &grid, DatasetCounts::new(2, 0, 0), b.path(), 8).unwrap();
    assert_ne!(c2[0].seed, recs[0].seed);
}

fn walk(dir: &std::path::Path, ext: &str) -> usize {
    let mut n = 0;
    for e in std::fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        if p.is_dir() {
            n += walk(&p, ext);
        } else if p.extension().is_some_and(|x| x == ext) {
            n += 1;
        }
    }
    n
}

#[test]
fn labels_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("x.labels.txt");
    let segs = vec![
        Segment {
            category: Category::Assistant,
            start: 0,
            end: 10,
        },
        Segment {
            category: Category::Background,
            start: 10,
            end: 25,
        },
    ];
    write_labels(&path, &segs).unwrap();
    assert_eq!(
        std::fs::read_to_string(&path).unwrap(),
        "0,10,10\n10,25,00\n"
    );
    assert_eq!(read_labels(&path).unwrap(), segs);
    std::fs::write(&path, "0,10,12\n").unwrap();
    assert!(read_labels(&path)
        .unwrap_err()
        .to_string()
        .contains("line 1"));
}
