use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use qdvapor::emitter::{g2_tls, BlinkingParams};
use qdvapor::instrument::{convolve_histogram, Extension, InstrumentResponse};
use qdvapor::simkit::synth::{Binning, DecaySpec, G2Spec};
use qdvapor::simkit::{
    correlate_stream, poisson_stream, simulate_clickstream, synthesize_dataset, ClickStream, DatasetSpec, NoiseModel,
    SyntheticData, TelegraphRates, TelegraphTrajectory,
};
use qdvapor::spectrum::Histogram;
use qdvapor::{DecayParams, EmitterParams};

fn emitter() -> EmitterParams {
    EmitterParams::from_ghz(1.42, 0.0, 0.39).unwrap()
}

#[test]
fn always_on_stream_reproduces_the_two_level_g2() {
    let p = emitter();
    let always_on = BlinkingParams::new(1.0, 1e-6).unwrap();
    let s = simulate_clickstream(&p, &always_on, 5e-3, 9).unwrap().thinned(0.05).unwrap();
    let h = correlate_stream(&s, 0.1e-9, 3e-9).unwrap();
    let model =
        convolve_histogram(|t| g2_tls(t, &p).unwrap(), &h, &InstrumentResponse::Delta, Extension::Symmetric).unwrap();
    // Poisson variance from the model; σ = √c / n gives the count scale n
    let (v, s) = h.values.iter().zip(h.sigma.as_ref().unwrap()).find(|(v, _)| **v > 0.0).unwrap();
    let per_unit = v / (s * s);
    let chi2: f64 = h.values.iter().zip(&model.values).map(|(v, m)| (v - m).powi(2) * per_unit / m).sum();
    let per_bin = chi2 / h.len() as f64;
    assert!((0.6..1.5).contains(&per_bin), "χ²/bin = {per_bin}");
    // antibunching in the central bin
    let mid = h.len() / 2;
    assert!(h.values[mid] < 0.3, "g²(0) = {}", h.values[mid]);
}

#[test]
fn uncorrelated_light_gives_a_flat_histogram() {
    let s = poisson_stream(2e6, 0.2, 4).unwrap();
    let h = correlate_stream(&s, 1e-9, 50e-9).unwrap();
    let mean = h.values.iter().sum::<f64>() / h.len() as f64;
    assert!((mean - 1.0).abs() < 0.02, "mean g² = {mean}");
}

#[test]
fn streams_are_reproducible_from_the_seed() {
    let p = emitter();
    let b = BlinkingParams::new(0.8, 580e-9).unwrap();
    let a = simulate_clickstream(&p, &b, 1e-5, 42).unwrap();
    let c = simulate_clickstream(&p, &b, 1e-5, 42).unwrap();
    let d = simulate_clickstream(&p, &b, 1e-5, 43).unwrap();
    assert_eq!(a, c);
    assert_ne!(a.channels, d.channels);
}

#[test]
fn channel_csv_round_trips() {
    let s = poisson_stream(1e6, 1e-3, 8).unwrap().split().unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ch0.csv");
    s.save_channel(0, &path).unwrap();
    let back = ClickStream::read_channel_csv(std::fs::File::open(&path).unwrap()).unwrap();
    assert_eq!(back.len(), s.channels[0].len());
    for (a, b) in back.iter().zip(&s.channels[0]) {
        assert!((a - b).abs() <= 1e-15 * b.abs());
    }
}

#[test]
fn telegraph_statistics_match_the_rates() {
    let rates = TelegraphRates::from_blinking(&BlinkingParams::new(0.3, 1e-6).unwrap());
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let traj = TelegraphTrajectory::simulate(&rates, 0.05, &mut rng).unwrap();
    assert!((traj.on_fraction() - 0.3).abs() < 0.02, "on fraction {}", traj.on_fraction());
    let est = traj.estimated_rates().unwrap();
    assert!((est.correlation_time() / 1e-6 - 1.0).abs() < 0.05);
}

#[test]
fn synthetic_histograms_round_trip_through_csv() {
    let spec = DatasetSpec::Decay(DecaySpec {
        decay: DecayParams::new(2.0 * std::f64::consts::PI * 0.176e9, 2.0 * std::f64::consts::PI * 1.7e9).unwrap(),
        irf: InstrumentResponse::gaussian(100e-12).unwrap(),
        binning: Binning { start_s: 0.0, bin_width_s: 8e-12, bins: 500 },
        amplitude: 1000.0,
        time_offset_s: 0.5e-9,
        background: 1.0,
    });
    let d = synthesize_dataset(&spec, NoiseModel::Poisson, 3).unwrap();
    let SyntheticData::Histogram(h) = &d.data else { unreachable!() };
    let mut buf = Vec::new();
    h.write_csv(&mut buf).unwrap();
    let back = Histogram::read_csv(buf.as_slice()).unwrap();
    assert_eq!(back.len(), h.len());
    for (a, b) in back.values.iter().zip(&h.values) {
        assert_eq!(a, b);
    }
    let side = d.sidecar();
    assert_eq!(side["seed"], 3);
    let truth: DatasetSpec = serde_json::from_value(side["truth"].clone()).unwrap();
    assert_eq!(serde_json::to_value(&truth).unwrap(), side["truth"]);
}

#[test]
fn noiseless_g2_equals_the_model() {
    let spec = G2Spec {
        emitter: emitter(),
        blinking: Some(BlinkingParams::new(0.16, 200e-9).unwrap()),
        irf: InstrumentResponse::gaussian(300e-12).unwrap(),
        binning: Binning { start_s: -20e-9, bin_width_s: 0.5e-9, bins: 81 },
        coincidences_per_bin: 100.0,
    };
    let model = spec.model().unwrap();
    let d = synthesize_dataset(&DatasetSpec::G2(spec), NoiseModel::None, 0).unwrap();
    let SyntheticData::Histogram(h) = d.data else { unreachable!() };
    for (a, b) in h.values.iter().zip(&model.values) {
        assert!((a - b).abs() <= 1e-12 * b);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn thinning_keeps_a_sorted_subset(seed in 0u64..1000, eff in 0.05f64..1.0) {
        let s = poisson_stream(1e6, 1e-3, seed).unwrap();
        let t = s.thinned(eff).unwrap();
        prop_assert!(t.total_clicks() <= s.total_clicks());
        prop_assert!(t.channels[0].windows(2).all(|w| w[0] <= w[1]));
        prop_assert!(t.channels[0].iter().all(|x| s.channels[0].binary_search_by(|y| y.total_cmp(x)).is_ok()));
    }

    #[test]
    fn split_conserves_clicks(seed in 0u64..1000) {
        let s = poisson_stream(1e6, 1e-3, seed).unwrap();
        let sp = s.split().unwrap();
        prop_assert_eq!(sp.channels.len(), 2);
        prop_assert_eq!(sp.total_clicks(), s.total_clicks());
    }
}
