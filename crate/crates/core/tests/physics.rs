mod common;

use cochlea_core::membrane::{self, ConvolutionMethod, KernelForm, OscillatorParams};
use cochlea_core::signals::Waveform;
use common::*;

#[test]
fn step_response_settles_to_static_deflection() {
    for (f, gamma) in [(300.0, 2000.0), (600.0, 2000.0), (1200.0, 500.0)] {
        let p = OscillatorParams::from_frequency(f, gamma).unwrap();
        let e = step_response_error(&p, 16000.0);
        assert!(e < 1e-3, "{f} Hz: {e}");
    }
}

#[test]
fn resonant_amplitude_matches_closed_form() {
    for f in [300.0, 600.0, 1000.0] {
        let p = OscillatorParams::from_frequency(f, 2000.0).unwrap();
        let e = resonance_error(&p, 16000.0);
        assert!(e < 0.01, "{f} Hz: {e}");
    }
}

#[test]
fn heavier_mass_scales_displacement_down() {
    let light = OscillatorParams::new(2.0 * std::f64::consts::PI * 600.0, 2000.0, 1.0, 1.0).unwrap();
    let heavy = OscillatorParams { mass: 4.0, ..light };
    let w = tone(600.0, 20.0, 16000.0);
    let a = membrane::ode_oracle(&light, &w).unwrap();
    let b = membrane::ode_oracle(&heavy, &w).unwrap();
    for (x, y) in a.iter().zip(&b) {
        assert!((x - 4.0 * y).abs() < 1e-12);
    }
}

#[test]
fn convolution_tracks_the_ode_on_pure_tones() {
    let model = membrane::default_model(6, 300.0, 1200.0, 1e-3).unwrap();
    for f in [300.0, 450.0, 600.0, 900.0, 1200.0] {
        let e = green_vs_ode_error(&model, f, 16000.0);
        assert!(e < 0.02, "{f} Hz: {e}");
    }
}

#[test]
fn direct_and_fft_convolution_agree() {
    let model = membrane::default_model(3, 100.0, 400.0, 20e-3).unwrap();
    let w = Waveform::new(random_signal(6000, 9), 16000.0).unwrap();
    let a = membrane::respond_with(&model, &w, ConvolutionMethod::Direct).unwrap();
    let b = membrane::respond_with(&model, &w, ConvolutionMethod::Fft).unwrap();
    let worst = a.values().iter().zip(b.values()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    assert!(worst < 1e-9, "{worst}");
}

#[test]
fn kernel_forms_are_distinct() {
    let model = membrane::default_model(2, 300.0, 600.0, 1e-3).unwrap();
    let w = tone(450.0, 10.0, 16000.0);
    let a = membrane::respond(&model, &w).unwrap();
    let b = membrane::respond(&model.clone().with_kernel(KernelForm::Verbatim), &w).unwrap();
    assert_ne!(a.values(), b.values());
    assert!(b.values().iter().all(|v| v.is_finite()));
}

#[test]
fn overdamped_channel_is_rejected() {
    assert!(membrane::default_model(4, 100.0, 1300.0, 1e-3).is_err());
    assert!(membrane::default_model(4, 100.0, 1300.0, 4e-3).is_ok());
}

#[test]
fn silence_gives_zero_displacement() {
    let model = membrane::default_model(6, 300.0, 1200.0, 1e-3).unwrap();
    let pat = membrane::respond(&model, &Waveform::zeros(800, 16000.0).unwrap()).unwrap();
    assert!(pat.values().iter().all(|&v| v == 0.0));
}
