use nbimr::ber::{awgn_ber, compute_ber, demodulate, run_trial, run_trial_with, TrialConfig, NOT_APPLICABLE_BER};
use nbimr::dataset::{InterferenceType, MetaRecord};
use nbimr::mitigate::MitigationKind;
use nbimr::sigsim::{
    chip_seed, gen_awgn_signal, gen_interference, gen_soi, mix, InterferenceKind, InterferenceSpec, SoiConfig,
};
use statrs::distribution::{Beta, ContinuousCDF};

fn meta(t: InterferenceType, j2s: f64, snr: f64, rank: u8, dsss: bool) -> MetaRecord {
    MetaRecord {
        modulation_rank: rank,
        j2s_db: j2s,
        snr_db: snr,
        interference_type: t,
        duty_cycle: 1.0,
        tone_freq_hz: (t == InterferenceType::Tone).then_some(7_300.0),
        chirp_rate: None,
        mod_bps: None,
        mod_sps: None,
        mod_bw_ratio: None,
        fnoise_bw_ratio: None,
        is_dsss: dsss,
    }
}

/// Clopper-Pearson 95% interval for `k` successes in `n` trials.
fn binomial_interval(k: usize, n: usize) -> (f64, f64) {
    let lo = if k == 0 { 0.0 } else { Beta::new(k as f64, (n - k + 1) as f64).unwrap().inverse_cdf(0.025) };
    let hi = if k == n { 1.0 } else { Beta::new((k + 1) as f64, (n - k) as f64).unwrap().inverse_cdf(0.975) };
    (lo, hi)
}

/// Whether `p` is consistent with `k` errors in `n` bits at 95%.
fn consistent(p: f64, ber: f64, n: usize) -> bool {
    let (lo, hi) = binomial_interval((ber * n as f64).round() as usize, n);
    (lo..=hi).contains(&p)
}

#[test]
fn awgn_matches_closed_form_across_snr() {
    let bits = 100_000;
    let trial = TrialConfig { num_bits: bits, ..TrialConfig::default() };
    for snr in [8.0, 10.0, 12.0] {
        // Gray QPSK at one sample per symbol has Eb/N0 = SNR - 3 dB.
        let ber = run_trial_with(&meta(InterferenceType::None, 0.0, snr, 2, false), 5, &trial).unwrap();
        let theory = awgn_ber(snr - 10.0 * 2f64.log10());
        assert!(consistent(theory, ber[MitigationKind::Unmitigated], bits), "snr {snr}: {} vs {theory}", ber.0[0]);
    }
}

#[test]
fn bpsk_at_four_db() {
    let bits = 100_000;
    let cfg = SoiConfig::narrowband(1, bits);
    let (tx, soi) = gen_soi(&cfg, 21).unwrap();
    let none = gen_interference(&InterferenceSpec::none(), soi.len(), soi.sample_rate_hz(), 0).unwrap();
    let noise = gen_awgn_signal(soi.len(), soi.sample_rate_hz(), 22).unwrap();
    let rx = mix(&soi, &none, &noise, 0.0, cfg.snr_db_for_ebn0(4.0)).unwrap();
    let ber = compute_ber(&tx, &demodulate(&rx, &cfg, chip_seed(21)).unwrap()).unwrap();
    let theory = awgn_ber(4.0);
    assert!((theory - 0.0125).abs() < 1e-4);
    assert!((ber - theory).abs() < 0.3 * theory, "{ber}");
}

#[test]
fn spreading_beats_tone_jammer() {
    let bits = 10_000;
    let mut wins = 0;
    for seed in 0..5 {
        let ber_for = |cfg: SoiConfig| {
            let (tx, soi) = gen_soi(&cfg, seed).unwrap();
            let spec = InterferenceSpec::continuous(InterferenceKind::Tone { freq_hz: 4_100.0 });
            let i = gen_interference(&spec, soi.len(), soi.sample_rate_hz(), seed + 1).unwrap();
            let n = gen_awgn_signal(soi.len(), soi.sample_rate_hz(), seed + 2).unwrap();
            let rx = mix(&soi, &i, &n, 5.0, 10.0).unwrap();
            compute_ber(&tx, &demodulate(&rx, &cfg, chip_seed(seed)).unwrap()).unwrap()
        };
        let spread = ber_for(SoiConfig::dsss(1, 31, bits));
        let plain = ber_for(SoiConfig::narrowband(1, bits));
        wins += usize::from(spread < plain);
    }
    assert_eq!(wins, 5);
}

#[test]
fn no_interference_keeps_all_paths_near_closed_form() {
    // Spread QPSK at a per-sample SNR giving Eb/N0 of about 4.3 dB, so the
    // BER is large enough to measure at 10^4 bits.
    let snr = 4.3 - 10.0 * 4f64.log10();
    let ber = run_trial(&meta(InterferenceType::None, 0.0, snr, 2, true), 3).unwrap();
    let theory = awgn_ber(4.3);
    for (i, &b) in ber.0.iter().enumerate() {
        assert!(b > theory / 3.0 && b < theory * 3.0, "path {i}: {b} vs {theory}");
        for &other in &ber.0 {
            assert!(b < 3.0 * other && other < 3.0 * b, "{:?}", ber.0);
        }
    }
    assert!(ber[MitigationKind::Transversal] < 2.0 * ber[MitigationKind::Unmitigated]);
}

#[test]
fn narrowband_transversal_is_not_applicable() {
    let ber = run_trial(&meta(InterferenceType::Tone, 0.0, 10.0, 1, false), 9).unwrap();
    assert_eq!(ber[MitigationKind::Transversal], NOT_APPLICABLE_BER);
}

#[test]
fn notch_helps_spread_signal_against_tone() {
    let ber = run_trial(&meta(InterferenceType::Tone, 5.0, 10.0, 1, true), 4).unwrap();
    assert!(ber[MitigationKind::Notch] < ber[MitigationKind::Unmitigated], "{:?}", ber.0);
}

#[test]
fn trials_are_deterministic_and_bounded() {
    for t in InterferenceType::ALL {
        let mut m = meta(t, 3.0, 10.0, 2, true);
        m.chirp_rate = (t == InterferenceType::Chirp).then_some(2e5);
        m.fnoise_bw_ratio = (t == InterferenceType::FilteredNoise).then_some(50.0);
        if t == InterferenceType::UnknownModulated {
            m.mod_bps = Some(2);
            m.mod_sps = Some(300);
            m.mod_bw_ratio = Some(0.1);
        }
        m.duty_cycle = 0.6;
        m.validate().unwrap();
        let a = run_trial(&m, 77).unwrap();
        assert_eq!(a, run_trial(&m, 77).unwrap());
        assert!(a.0.iter().all(|b| (0.0..=0.5).contains(b)), "{t:?} {:?}", a.0);
    }
}
