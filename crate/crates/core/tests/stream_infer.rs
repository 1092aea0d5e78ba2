mod common;

use common::rng;
use mstcn_core::model::{Category, ModelConfig, Mstcn, NormMode};
use mstcn_core::stream::*;
use mstcn_core::Tensor;
use proptest::prelude::*;
use rand::Rng;

const SR: u32 = 1000;

fn tiny(causal: bool) -> ModelConfig {
    ModelConfig {
        filter_len: 16,
        stride: 8,
        filters: 8,
        bottleneck_channels: 6,
        skip_channels: 4,
        hidden_channels: 8,
        blocks_per_repeat: 3,
        repeats: 1,
        hidden1: 8,
        hidden2: 8,
        sample_rate: SR,
        causal,
        norm_mode: if causal { NormMode::Cln } else { NormMode::Gln },
        ..ModelConfig::full()
    }
}

fn noise(seed: u64, n: usize) -> Vec<f32> {
    let mut r = rng(seed);
    (0..n).map(|_| r.gen_range(-0.3..0.3)).collect()
}

/// A model whose output ignores its input.
fn constant_model(bias: [f32; 2]) -> Mstcn<f32> {
    let mut m = Mstcn::new(tiny(true), 0).unwrap();
    let w = m.param_mut("classifier.2.weight").unwrap();
    *w = Tensor::zeros(w.shape().to_vec());
    *m.param_mut("classifier.2.bias").unwrap() = Tensor::vector(&bias).unwrap();
    m
}

#[test]
fn twelve_seconds_give_120_slots_91_interior() {
    let m = Mstcn::new(tiny(false), 3).unwrap();
    let audio = noise(1, 12 * SR as usize);
    let track = infer_offline(&m, &audio, 3.0, 0.1).unwrap();
    assert_eq!(track.len(), 120);
    let grid = SlotGrid::new(3.0, 0.1, SR).unwrap();
    assert_eq!(grid.interior(audio.len()), 15..106);
    for (k, d) in track.decisions.iter().enumerate() {
        assert_eq!(d.timestamp, (k * 100) as f64 / SR as f64);
    }
    assert_eq!(track.decisions[15].timestamp, 1.5);
    assert_eq!(track.decisions[105].timestamp, 10.5);
    for k in 0..15 {
        assert_eq!(track.decisions[k].probs, track.decisions[15].probs);
    }
    for k in 106..120 {
        assert_eq!(track.decisions[k].probs, track.decisions[105].probs);
    }
    for k in [15, 40, 105] {
        let s = k * 100 - 1500;
        let (cat, probs) = m.classify_window(&audio[s..s + 3000]).unwrap();
        assert_eq!(
            (track.decisions[k].category, track.decisions[k].probs),
            (cat, probs)
        );
    }
    assert_eq!(track, infer_offline(&m, &audio, 3.0, 0.1).unwrap());
}

#[test]
fn constant_output_gives_constant_track() {
    let m = constant_model([4.0, -4.0]);
    let track = infer_offline(&m, &noise(2, 7500), 3.0, 0.1).unwrap();
    assert_eq!(track.len(), 75);
    assert!(track.categories().iter().all(|&c| c == Category::Assistant));
    let segs = decisions_to_segments(&track);
    assert_eq!(segs.len(), 1);
    assert_eq!((segs[0].start, segs[0].end), (0.0, 7.5));
}

#[test]
fn short_audio_is_rejected() {
    let m = Mstcn::new(tiny(false), 0).unwrap();
    assert!(infer_offline(&m, &noise(0, 2999), 3.0, 0.1).is_err());
    let track = infer_offline(&m, &noise(0, 3000), 3.0, 0.7).unwrap();
    assert_eq!(track.len(), 5);
    assert!(track
        .decisions
        .iter()
        .all(|d| d.probs == track.decisions[0].probs));
}

#[test]
fn streaming_matches_offline() {
    let m = Mstcn::new(tiny(true), 9).unwrap();
    let audio = noise(4, 12 * SR as usize);
    let offline = infer_offline(&m, &audio, 3.0, 0.1).unwrap();
    let mut s = StreamingSession::new(&m, 3.0, 0.1).unwrap();
    let mut r = rng(5);
    let mut pos = 0;
    let mut live = Vec::new();
    while pos < audio.len() {
        let n = r.gen_range(1..700).min(audio.len() - pos);
        let out = s.push(&audio[pos..pos + n]).unwrap();
        pos += n;
        for d in &out {
            // A decision is only available once its whole window arrived.
            assert!(pos as f64 / SR as f64 >= d.timestamp + 1.5 - 1e-9);
        }
        if pos < 3000 {
            assert!(out.is_empty());
        }
        live.extend(out);
    }
    assert_eq!(live.len(), 91);
    assert_eq!(live[0].timestamp, 1.5);
    for (d, o) in live.iter().zip(&offline.decisions[15..106]) {
        assert_eq!(d.timestamp, o.timestamp);
        assert_eq!(d.category, o.category);
        assert!((d.probs[0] - o.probs[0]).abs() < 1e-5 && (d.probs[1] - o.probs[1]).abs() < 1e-5);
    }
    let closed = s.close().unwrap();
    assert_eq!(closed.len(), offline.len());
    assert_eq!(closed.categories(), offline.categories());
    assert!(matches!(
        s.push(&[0.0]),
        Err(mstcn_core::Error::StreamClosed)
    ));
}

#[test]
fn streaming_requires_causal_model() {
    let m = Mstcn::new(tiny(false), 0).unwrap();
    assert!(StreamingSession::new(&m, 3.0, 0.1).is_err());
}

#[test]
fn frozen_model_serves_concurrent_sessions() {
    let m = Mstcn::new(tiny(true), 2).unwrap();
    let audio = noise(6, 5000);
    let tracks: Vec<DecisionTrack> = std::thread::scope(|sc| {
        let hs: Vec<_> = (0..3)
            .map(|_| {
                sc.spawn(|| {
                    let mut s = StreamingSession::new(&m, 3.0, 0.25).unwrap();
                    for c in audio.chunks(333) {
                        s.push(c).unwrap();
                    }
                    s.close().unwrap()
                })
            })
            .collect();
        hs.into_iter().map(|h| h.join().unwrap()).collect()
    });
    assert!(tracks.windows(2).all(|w| w[0] == w[1]));
}

fn synthetic_track(cats: &[Category], hop: f64, duration: f64) -> DecisionTrack {
    DecisionTrack {
        hop_seconds: hop,
        duration_seconds: duration,
        decisions: cats
            .iter()
            .enumerate()
            .map(|(k, &c)| Decision {
                timestamp: (k * 100) as f64 / 1000.0,
                category: c,
                probs: [0.5; 2],
            })
            .collect(),
    }
}

#[test]
fn alternating_track_gives_one_segment_per_slot() {
    let cats: Vec<Category> = (0..10)
        .map(|k| {
            if k % 2 == 0 {
                Category::Expert
            } else {
                Category::Mixture
            }
        })
        .collect();
    let segs = decisions_to_segments(&synthetic_track(&cats, 0.1, 0.95));
    assert_eq!(segs.len(), 10);
    assert_eq!(segs[9].end, 0.95);
}

#[test]
fn text_outputs_round_trip() {
    let cats = [
        Category::Background,
        Category::Background,
        Category::Assistant,
    ];
    let track = synthetic_track(&cats, 0.1, 0.3);
    assert_eq!(
        track.to_text(),
        "0.0000,00,0.500000,0.500000\n0.1000,00,0.500000,0.500000\n0.2000,10,0.500000,0.500000\n"
    );
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("s.txt");
    let segs = decisions_to_segments(&track);
    write_segments(&p, &segs).unwrap();
    assert_eq!(
        std::fs::read_to_string(&p).unwrap(),
        "0.0000,0.2000,00\n0.2000,0.3000,10\n"
    );
    assert_eq!(read_segments(&p).unwrap(), segs);
}

proptest! {
    #[test]
    fn segments_tile_and_invert(codes in prop::collection::vec(0usize..4, 1..60), tail in 1usize..100) {
        let cats: Vec<Category> = codes.iter().map(|&i| Category::ALL[i]).collect();
        let duration = ((cats.len() - 1) * 100 + tail) as f64 / 1000.0;
        let track = synthetic_track(&cats, 0.1, duration);
        let segs = decisions_to_segments(&track);
        prop_assert_eq!(segs[0].start, 0.0);
        prop_assert_eq!(segs.last().unwrap().end, duration);
        for w in segs.windows(2) {
            prop_assert_eq!(w[0].end, w[1].start);
            prop_assert!(w[0].category != w[1].category);
        }
        let stamps: Vec<f64> = track.decisions.iter().map(|d| d.timestamp).collect();
        prop_assert_eq!(segments_to_slots(&segs, &stamps).unwrap(), cats);
    }

    #[test]
    fn slot_count_is_ceiling(len in 3000usize..20_000, hop_ms in 1usize..800) {
        let grid = SlotGrid::new(3.0, hop_ms as f64 / 1000.0, SR).unwrap();
        prop_assert_eq!(grid.slot_count(len), len.div_ceil(hop_ms));
        for k in grid.interior(len) {
            let s = grid.window_start(k, len).unwrap();
            prop_assert!(s + 3000 <= len);
            prop_assert_eq!(s + 1500, k * hop_ms);
        }
    }
}

#[test]
fn decision_count_matches_for_odd_lengths() {
    let m = Mstcn::new(tiny(false), 1).unwrap();
    for (len, hop) in [(3001, 0.1), (4567, 0.25), (6000, 0.3), (3999, 0.001)] {
        let track = infer_offline(&m, &noise(len as u64, len), 3.0, hop).unwrap();
        let h = (hop * 1000.0).round() as usize;
        assert_eq!(track.len(), len.div_ceil(h), "len {len}, hop {hop}");
        let grid = SlotGrid::new(3.0, hop, SR).unwrap();
        let inner = grid.interior(len);
        for (k, d) in track.decisions.iter().enumerate() {
            let src = k.clamp(inner.start, inner.end - 1);
            assert_eq!(d.probs, track.decisions[src].probs);
        }
    }
}
