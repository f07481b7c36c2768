//! Container and pipeline properties: header round trips, encoder/decoder
//! identity, the budget contract, search optimality and frozen golden files.

mod common;

use std::path::PathBuf;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rjip_core::codec::group::quantize_levels;
use rjip_core::codec::{
    budget_bytes, decode, encode, encode_scalar_group, EncodeOptions, GroupParams, Header, Mode, SearchSpace,
    TonalMethod,
};
use rjip_core::entropy::range_encode;
use rjip_core::image::save_ppm;
use rjip_core::mask::{fixed_to_h, RegularGrid};
use rjip_core::quantize::{Codebook, UniformQuantizer};
use rjip_core::Error;

use common::*;

fn arb_header() -> impl Strategy<Value = Header> {
    (
        0u8..3,
        1u16..=4000,
        1u16..=4000,
        any::<u16>(),
        any::<u16>(),
        2u16..=256,
        2u16..=256,
        0u8..5,
        1usize..=256,
        any::<u64>(),
    )
        .prop_map(|(m, width, height, h0, h1, q0, q1, li, k, seed)| {
            let mode = Mode::from_byte(m).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut groups = vec![GroupParams { h_fixed: h0, q: q0 }];
            if mode == Mode::ScalarLp {
                groups.push(GroupParams { h_fixed: h1, q: q1 });
            }
            let mut header = Header {
                mode,
                width,
                height,
                groups,
                luma_index: None,
                codebook: None,
            };
            match mode {
                Mode::ScalarLp => header.luma_index = Some(li),
                Mode::VectorRgb => {
                    let book = Codebook::new((0..k).map(|_| [rng.gen(), rng.gen(), rng.gen()]).collect()).unwrap();
                    header.groups[0].q = k as u16;
                    header.codebook = Some(book);
                }
                Mode::ScalarRgb => {}
            }
            header
        })
}

proptest! {
    #[test]
    fn header_roundtrip(header in arb_header()) {
        let bytes = header.serialize().unwrap();
        let k = header.codebook.as_ref().map_or(0, Codebook::len);
        prop_assert_eq!(bytes.len(), Header::encoded_len(header.mode, k));
        let (parsed, used) = Header::parse(&bytes).unwrap();
        prop_assert_eq!(used, bytes.len());
        prop_assert_eq!(parsed, header);
    }
}

#[test]
fn encoder_and_decoder_agree_on_random_images() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let mut encoded = 0;
    for i in 0..50 {
        let (w, h) = (rng.gen_range(8..40), rng.gen_range(8..40));
        let img = synthetic_image(w, h, i);
        let mode = Mode::from_byte(rng.gen_range(0..3)).unwrap();
        let mut opts = EncodeOptions::new(mode, rng.gen_range(5.0..30.0));
        opts.seed = rng.gen();
        opts.search.h_samples = 5;
        match encode(&img, &opts) {
            Ok(enc) => {
                assert!(enc.bytes.len() <= budget_bytes(w, h, opts.ratio).unwrap());
                let dec = decode(&enc.bytes).unwrap();
                assert_eq!(dec.image, enc.image, "image {i} mode {mode}");
                encoded += 1;
            }
            Err(Error::Infeasible { .. }) => {}
            Err(e) => panic!("image {i}: {e}"),
        }
    }
    assert!(encoded >= 40, "only {encoded} feasible");
}

#[test]
fn damaged_files_never_panic() {
    let img = fixture("coffee64.ppm");
    let mut rng = ChaCha8Rng::seed_from_u64(32);
    for mode in [Mode::ScalarRgb, Mode::ScalarLp, Mode::VectorRgb] {
        let mut opts = EncodeOptions::new(mode, 15.0);
        opts.search.h_samples = 4;
        let bytes = encode(&img, &opts).unwrap().bytes;
        for _ in 0..300 {
            let mut bad = bytes.clone();
            for _ in 0..rng.gen_range(1..4) {
                let at = rng.gen_range(0..bad.len());
                bad[at] ^= 1 << rng.gen_range(0..8);
            }
            let _ = decode(&bad);
            let cut = rng.gen_range(0..bytes.len());
            assert!(decode(&bytes[..cut]).is_err());
        }
    }
}

#[test]
fn search_matches_exhaustive_oracle() {
    let img = fixture("astronaut64.ppm");
    let ratio = 12.0;
    let budget = budget_bytes(64, 64, ratio).unwrap();
    let space = SearchSpace {
        h_min: 2.0,
        h_max: 8.0,
        h_samples: 3,
        q_values: vec![4, 16, 64],
        k_values: vec![],
        refine_steps: 0,
    };
    let avail = budget - Header::encoded_len(Mode::ScalarRgb, 0) - 4;
    let target = img.planes().to_vec();
    let mut oracle: Option<(f64, u16, u16)> = None;
    for &hf in &space.h_grid(64, 64) {
        for &q in &space.q_values {
            let grid = RegularGrid::from_fixed(64, 64, hf).unwrap();
            let quantizer = UniformQuantizer::new(q).unwrap();
            let levels = quantize_levels(&target, 64, &grid.points(), quantizer);
            let coding = encode_scalar_group(&grid, quantizer, &levels).unwrap();
            if coding.payload.len() > avail {
                continue;
            }
            let sse: f64 = (0..3)
                .map(|c| {
                    coding.reconstruction[c]
                        .iter()
                        .zip(&target[c])
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum::<f64>()
                })
                .sum();
            if oracle.is_none_or(|(best, _, _)| sse < best) {
                oracle = Some((sse, hf, q));
            }
        }
    }
    let (_, hf, q) = oracle.expect("some candidate fits");
    let mut opts = EncodeOptions::new(Mode::ScalarRgb, ratio);
    opts.search = space;
    opts.tonal = TonalMethod::Off;
    let enc = encode(&img, &opts).unwrap();
    assert_eq!(
        enc.config.groups[0],
        GroupParams { h_fixed: hf, q },
        "oracle h={} q={q}",
        fixed_to_h(hf)
    );
    // argmin over everything evaluated
    for r in &enc.candidates[0] {
        if r.eval.size <= avail {
            assert!(
                r.eval.sse
                    >= enc.candidates[0]
                        .iter()
                        .find(|c| (c.h_fixed, c.param) == (hf, q))
                        .unwrap()
                        .eval
                        .sse
            );
        }
    }
}

#[test]
fn prediction_never_costs_more_than_plain_levels() {
    for name in ["astronaut64.ppm", "coffee64.ppm", "chelsea64.ppm"] {
        let img = fixture(name);
        let target = img.planes().to_vec();
        for (h, q) in [(1.5, 32u16), (2.0, 64), (3.0, 16), (4.0, 128)] {
            let grid = RegularGrid::new(64, 64, h).unwrap();
            let quantizer = UniformQuantizer::new(q).unwrap();
            let levels = quantize_levels(&target, 64, &grid.points(), quantizer);
            let predicted = encode_scalar_group(&grid, quantizer, &levels).unwrap().payload.len();
            let plain: usize = levels
                .iter()
                .map(|l| range_encode(l, usize::from(q)).unwrap().len())
                .sum();
            assert!(predicted <= plain, "{name} h={h} q={q}: {predicted} > {plain}");
        }
    }
}

fn golden_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/golden")
}

fn golden_options(mode: Mode) -> EncodeOptions {
    let mut opts = EncodeOptions::new(mode, 10.0);
    opts.seed = 7;
    opts
}

const GOLDEN: [(Mode, &str); 3] = [
    (Mode::ScalarRgb, "chelsea64_rgb"),
    (Mode::ScalarLp, "chelsea64_lp"),
    (Mode::VectorRgb, "chelsea64_vector"),
];

/// Regenerates the golden files; run with `--ignored` after a deliberate format change.
#[test]
#[ignore]
fn regenerate_golden_files() {
    let img = fixture("chelsea64.ppm");
    std::fs::create_dir_all(golden_dir()).unwrap();
    for (mode, stem) in GOLDEN {
        let enc = encode(&img, &golden_options(mode)).unwrap();
        std::fs::write(golden_dir().join(format!("{stem}.rjc")), &enc.bytes).unwrap();
        std::fs::write(golden_dir().join(format!("{stem}.ppm")), save_ppm(&enc.image)).unwrap();
    }
}

#[test]
fn golden_files_are_stable() {
    let img = fixture("chelsea64.ppm");
    for (mode, stem) in GOLDEN {
        let rjc = std::fs::read(golden_dir().join(format!("{stem}.rjc"))).unwrap();
        let ppm = std::fs::read(golden_dir().join(format!("{stem}.ppm"))).unwrap();
        assert_eq!(save_ppm(&decode(&rjc).unwrap().image), ppm, "{stem} decode");
        assert_eq!(encode(&img, &golden_options(mode)).unwrap().bytes, rjc, "{stem} encode");
    }
}

#[test]
fn header_fields_are_big_endian() {
    let rjc = std::fs::read(golden_dir().join("chelsea64_rgb.rjc")).unwrap();
    assert_eq!(&rjc[..6], b"RJPC\x01\x00");
    assert_eq!(&rjc[6..10], &[0, 64, 0, 64]);
    let len = u32::from_be_bytes(rjc[13..17].try_into().unwrap()) as usize;
    assert_eq!(17 + len, rjc.len());
}
