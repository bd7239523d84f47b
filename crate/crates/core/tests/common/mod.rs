#![allow(dead_code)]

use melvq_core::scheme::{BitAllocation, SchemeRegistry, TrainedCodebooks};
use melvq_core::testsignal::synthetic_speech;
use melvq_core::{AudioBuffer, FeatureExtractor, FrameConfig, RateMode, TrainingCorpus};

pub fn extractor() -> FeatureExtractor {
    FeatureExtractor::new(FrameConfig::default()).unwrap()
}

/// `count` synthetic utterances with seeds `first..first + count`.
pub fn utterances(first: u64, count: u64, secs: f64) -> Vec<(String, AudioBuffer)> {
    (first..first + count)
        .map(|s| (format!("utt{s:03}"), synthetic_speech(s, secs, 16_000)))
        .collect()
}

pub fn corpus(first: u64, count: u64, secs: f64) -> TrainingCorpus {
    TrainingCorpus::from_audio(&extractor(), &utterances(first, count, secs)).unwrap()
}

pub fn desk_allocation(mode: RateMode) -> BitAllocation {
    match mode {
        RateMode::R1000 => BitAllocation {
            sq_bits: 4,
            spectral_bits: vec![6],
        },
        RateMode::R2000 => BitAllocation {
            sq_bits: 6,
            spectral_bits: vec![6, 6],
        },
    }
}

pub fn train(corpus: &TrainingCorpus, mode: RateMode, alloc: &BitAllocation) -> TrainedCodebooks {
    SchemeRegistry::with_defaults()
        .for_mode(mode)
        .unwrap()
        .train(corpus, alloc)
        .unwrap()
}
