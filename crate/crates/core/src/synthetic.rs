//! Synthetic formant tables shaped like the HGCW corpus.
//!
//! Every phoneme gets one Gaussian cluster (log-normal in Hz) per speaker
//! group, and per-(phoneme, group) counts are the corpus statistics after
//! null filtering. Utterances beyond those counts are emitted with a zeroed
//! measurement, so `filter_nulls` recovers the exact class statistics.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::dataset::{FeatureRecord, PhonemeClass, SpeakerGroup};
use crate::seed;

/// Post-filtering counts as (boys, girls, men, women), in label-id order.
pub const HGCW_COUNTS: [(usize, usize, usize, usize); 12] = [
    (25, 17, 45, 47),
    (24, 19, 45, 47),
    (24, 18, 45, 46),
    (27, 19, 45, 48),
    (26, 18, 37, 37),
    (25, 17, 43, 41),
    (27, 19, 45, 48),
    (20, 18, 43, 43),
    (25, 19, 45, 47),
    (27, 19, 45, 48),
    (26, 19, 45, 48),
    (25, 19, 44, 48),
];

/// Speakers recorded per group before filtering.
const SPEAKERS: [(SpeakerGroup, usize); 4] = [
    (SpeakerGroup::Boy, 27),
    (SpeakerGroup::Girl, 19),
    (SpeakerGroup::Man, 45),
    (SpeakerGroup::Woman, 48),
];

/// Adult-male steady-state F1..F3 means (Hz), label-id order.
const MALE_FORMANTS: [[f64; 3]; 12] = [
    [588.0, 1952.0, 2601.0],
    [768.0, 1333.0, 2522.0],
    [652.0, 997.0, 2538.0],
    [580.0, 1799.0, 2605.0],
    [474.0, 1379.0, 1710.0],
    [476.0, 2089.0, 2691.0],
    [427.0, 2034.0, 2684.0],
    [342.0, 2322.0, 3000.0],
    [497.0, 910.0, 2459.0],
    [469.0, 1122.0, 2434.0],
    [623.0, 1200.0, 2550.0],
    [378.0, 997.0, 2343.0],
];

/// Relative formant movement at 10% / 50% / SS / 80% of the nucleus.
const TRACK: [[f64; 4]; 12] = [
    [1.03, 1.00, 1.00, 0.97],
    [0.98, 1.00, 1.00, 1.02],
    [0.97, 1.00, 1.00, 1.04],
    [1.02, 1.00, 1.00, 0.98],
    [1.05, 1.01, 1.00, 0.98],
    [1.08, 1.02, 1.00, 0.90],
    [0.98, 1.00, 1.00, 1.03],
    [1.01, 1.00, 1.00, 1.00],
    [1.06, 1.02, 1.00, 0.91],
    [1.02, 1.00, 1.00, 0.97],
    [0.99, 1.00, 1.00, 1.02],
    [1.08, 1.02, 1.00, 0.94],
];

fn group_profile(g: SpeakerGroup) -> (f64, f64) {
    // (formant scale vs. adult male, mean F0 Hz)
    match g {
        SpeakerGroup::Man => (1.00, 131.0),
        SpeakerGroup::Woman => (1.16, 220.0),
        SpeakerGroup::Boy => (1.25, 237.0),
        SpeakerGroup::Girl => (1.28, 238.0),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub seed: u64,
    /// Log-normal sigma applied to every formant value.
    pub formant_spread: f64,
    /// Log-normal sigma applied to F0.
    pub f0_spread: f64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            seed: 0,
            formant_spread: 0.06,
            f0_spread: 0.08,
        }
    }
}

impl SyntheticSpec {
    pub fn with_seed(seed: u64) -> Self {
        SyntheticSpec {
            seed,
            ..Self::default()
        }
    }
}

fn expected_count(p: PhonemeClass, g: SpeakerGroup) -> usize {
    let (b, gi, m, w) = HGCW_COUNTS[p.label_id()];
    match g {
        SpeakerGroup::Boy => b,
        SpeakerGroup::Girl => gi,
        SpeakerGroup::Man => m,
        SpeakerGroup::Woman => w,
    }
}

/// Raw (unfiltered) synthetic table: one utterance per speaker and vowel.
pub fn generate(spec: &SyntheticSpec) -> Vec<FeatureRecord> {
    let mut rng = seed::rng(spec.seed);
    let unit = Normal::new(0.0, 1.0).unwrap();
    let mut out = Vec::new();
    for p in PhonemeClass::ALL {
        for (group, speakers) in SPEAKERS {
            let keep = expected_count(p, group);
            let mut nulled: Vec<bool> = (0..speakers).map(|i| i >= keep).collect();
            // spread the failed measurements over speakers
            for i in (1..speakers).rev() {
                let j = rng.random_range(0..=i);
                nulled.swap(i, j);
            }
            let (scale, f0_mean) = group_profile(group);
            for (s, &is_null) in nulled.iter().enumerate() {
                let f0 = f0_mean * (spec.f0_spread * unit.sample(&mut rng)).exp();
                let mut formants = [[0.0; 4]; 3];
                for (fi, row) in formants.iter_mut().enumerate() {
                    let base = MALE_FORMANTS[p.label_id()][fi] * scale;
                    for (pi, v) in row.iter_mut().enumerate() {
                        let track = TRACK[p.label_id()][pi];
                        let noise = (spec.formant_spread * unit.sample(&mut rng)).exp();
                        *v = (base * track * noise).round();
                    }
                }
                let mut f0_ss = f0.round();
                if is_null {
                    let slot = rng.random_range(0..13);
                    if slot == 12 {
                        f0_ss = 0.0;
                    } else {
                        formants[slot / 4][slot % 4] = 0.0;
                    }
                }
                out.push(FeatureRecord {
                    name: format!("{}{:02}{}", group.code(), s + 1, p.arpabet()),
                    group,
                    speaker_id: (s + 1) as u32,
                    phoneme: p,
                    f0_ss,
                    formants,
                });
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{class_stats, filter_nulls};

    #[test]
    fn filtered_counts_match_corpus_statistics() {
        let raw = generate(&SyntheticSpec::with_seed(3));
        assert_eq!(raw.len(), 12 * 139);
        let (kept, dropped) = filter_nulls(raw);
        assert_eq!(kept.len(), 1597);
        assert_eq!(dropped.len(), 12 * 139 - 1597);
        let stats = class_stats(&kept);
        for p in PhonemeClass::ALL {
            let (b, g, m, w) = HGCW_COUNTS[p.label_id()];
            assert_eq!(stats.row(p).as_tuple(), (b + g + m + w, b, g, m, w));
        }
        assert_eq!(stats.totals().as_tuple(), (1597, 301, 221, 527, 548));
    }

    #[test]
    fn deterministic_per_seed() {
        let a = generate(&SyntheticSpec::with_seed(5));
        assert_eq!(a, generate(&SyntheticSpec::with_seed(5)));
        assert_ne!(a, generate(&SyntheticSpec::with_seed(6)));
    }
}
